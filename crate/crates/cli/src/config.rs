//! Configuration resolution: command-line flag > environment variable >
//! config file > built-in default.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use fakg::graph::FaceAttackGraph;
use fakg::ground::remote::RemoteConfig;
use fakg::ground::TagConfig;
use fakg::reward::RewardConfig;
use fakg::synth::{ImageMode, StageConfigs};

use crate::CliError;

/// Top-level config file, mirroring the global settings.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub graph: Option<PathBuf>,
    pub reward_config: Option<PathBuf>,
    pub tags: Option<TagConfig>,
    pub verifier: Option<EndpointConfig>,
    pub log_level: Option<String>,
}

/// One remote endpoint block, as written in config files.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndpointConfig {
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub model: Option<String>,
    pub timeout_ms: Option<u64>,
    pub max_in_flight: Option<usize>,
}

/// Per-stage endpoints file for remote synthesis generators.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndpointsFile {
    pub skeleton: EndpointConfig,
    pub caption: EndpointConfig,
    pub fusion: EndpointConfig,
    pub judge: EndpointConfig,
    pub image_mode: Option<String>,
}

fn env_string(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

/// Resolved global context for one invocation.
pub struct Ctx {
    pub file: FileConfig,
    pub graph_path: Option<PathBuf>,
    pub tags: TagConfig,
}

impl Ctx {
    pub fn new(config_flag: Option<&Path>, graph_flag: Option<&Path>) -> Result<Ctx, CliError> {
        let file = match config_flag {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::usage(format!("cannot read config {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::usage(format!("invalid config {}: {e}", path.display()))
                })?
            }
            None => FileConfig::default(),
        };
        let graph_path = graph_flag.map(Path::to_path_buf).or_else(|| file.graph.clone());
        let tags = file.tags.clone().unwrap_or_default();
        tags.validate()
            .map_err(|e| CliError::usage(e.to_string()))?;
        Ok(Ctx {
            file,
            graph_path,
            tags,
        })
    }

    /// Load the configured graph, defaulting to the bundled reference graph.
    pub fn load_graph(&self) -> Result<FaceAttackGraph, CliError> {
        match &self.graph_path {
            Some(path) => load_graph_file(path),
            None => Ok(FaceAttackGraph::reference().clone()),
        }
    }

    /// Reward weights and synonyms: flag path > config-file path > defaults.
    pub fn reward_config(&self, flag: Option<&Path>) -> Result<RewardConfig, CliError> {
        let path = flag.or(self.file.reward_config.as_deref());
        match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::usage(format!("cannot read reward config {}: {e}", path.display()))
                })?;
                let cfg: RewardConfig = serde_json::from_str(&text).map_err(|e| {
                    CliError::usage(format!("invalid reward config {}: {e}", path.display()))
                })?;
                cfg.weights::<f64>()
                    .validate()
                    .map_err(|e| CliError::usage(e.to_string()))?;
                Ok(cfg)
            }
            None => Ok(RewardConfig::default()),
        }
    }

    /// Verifier endpoint settings: flags > `VERIFIER_*` environment > config
    /// file. Errors when no endpoint is known.
    pub fn verifier_remote(
        &self,
        endpoint_flag: Option<&str>,
        model_flag: Option<&str>,
        timeout_flag: Option<u64>,
    ) -> Result<RemoteConfig, CliError> {
        let file = self.file.verifier.clone().unwrap_or_default();
        let endpoint = endpoint_flag
            .map(str::to_string)
            .or_else(|| env_string("VERIFIER_ENDPOINT"))
            .or(file.endpoint)
            .ok_or_else(|| {
                CliError::usage(
                    "no verifier endpoint configured (flag, VERIFIER_ENDPOINT, or config file)",
                )
            })?;
        let mut cfg = RemoteConfig::new(endpoint);
        cfg.api_key = env_string("VERIFIER_API_KEY").or(file.api_key);
        cfg.model = model_flag
            .map(str::to_string)
            .or_else(|| env_string("VERIFIER_MODEL"))
            .or(file.model);
        let timeout_ms = timeout_flag
            .or_else(|| env_string("VERIFIER_TIMEOUT_MS").and_then(|v| v.parse().ok()))
            .or(file.timeout_ms);
        if let Some(ms) = timeout_ms {
            cfg.timeout = Duration::from_millis(ms);
        }
        if let Some(n) = file.max_in_flight {
            cfg.max_in_flight = n;
        }
        Ok(cfg)
    }
}

pub fn load_graph_file(path: &Path) -> Result<FaceAttackGraph, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read graph {}: {e}", path.display())))?;
    FaceAttackGraph::load_json(&text).map_err(|e| CliError::data(e.to_string()))
}

/// Build per-stage remote generator configs from an endpoints file plus
/// `SYNTH_<STAGE>_*` environment overrides (falling back to `VERIFIER_*`).
pub fn stage_configs(path: &Path) -> Result<StageConfigs, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read endpoints {}: {e}", path.display())))?;
    let file: EndpointsFile = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("invalid endpoints {}: {e}", path.display())))?;

    let stage = |name: &str, cfg: &EndpointConfig| -> Result<RemoteConfig, CliError> {
        let upper = name.to_uppercase();
        let endpoint = env_string(&format!("SYNTH_{upper}_ENDPOINT"))
            .or_else(|| cfg.endpoint.clone())
            .or_else(|| env_string("VERIFIER_ENDPOINT"))
            .ok_or_else(|| CliError::usage(format!("no endpoint for synthesis stage {name}")))?;
        let mut out = RemoteConfig::new(endpoint);
        out.api_key = env_string(&format!("SYNTH_{upper}_API_KEY"))
            .or_else(|| cfg.api_key.clone())
            .or_else(|| env_string("VERIFIER_API_KEY"));
        out.model = env_string(&format!("SYNTH_{upper}_MODEL"))
            .or_else(|| cfg.model.clone())
            .or_else(|| env_string("VERIFIER_MODEL"));
        let timeout = env_string(&format!("SYNTH_{upper}_TIMEOUT_MS"))
            .and_then(|v| v.parse().ok())
            .or(cfg.timeout_ms);
        if let Some(ms) = timeout {
            out.timeout = Duration::from_millis(ms);
        }
        if let Some(n) = cfg.max_in_flight {
            out.max_in_flight = n;
        }
        Ok(out)
    };

    let image_mode = match file.image_mode.as_deref() {
        None | Some("reference") => ImageMode::Reference,
        Some("base64") => ImageMode::InlineBase64,
        Some(other) => {
            return Err(CliError::usage(format!(
                "unknown image_mode {other:?} (expected \"reference\" or \"base64\")"
            )))
        }
    };
    Ok(StageConfigs {
        skeleton: stage("skeleton", &file.skeleton)?,
        caption: stage("caption", &file.caption)?,
        fusion: stage("fusion", &file.fusion)?,
        judge: stage("judge", &file.judge)?,
        image_mode,
    })
}
