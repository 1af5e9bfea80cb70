//! Generator clients for the synthesis stages.
//!
//! [`StubClients`] is a deterministic in-tree implementation that makes the
//! whole pipeline testable offline: a template skeleton generator over the
//! subgraph's relations, a label-keyed template captioner, a concatenation
//! fuser, and heuristic judges. [`RemoteGeneratorClients`] drives the same
//! stages over chat-completion HTTP endpoints with per-stage configuration.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use base64::Engine as _;
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use crate::graph::{Entity, EntityKind, FaceAttackGraph, RelationId, Subgraph};
use crate::ground::remote::RemoteConfig;
use crate::text;

use super::{Caption, CitedTriple, Fusion, QARecord, Skeleton};

/// Synthesis stage a client error originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Skeleton,
    Caption,
    Fusion,
    Judge,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Skeleton => "skeleton",
            Stage::Caption => "caption",
            Stage::Fusion => "fusion",
            Stage::Judge => "judge",
        })
    }
}

#[derive(Debug, Clone, Error)]
pub enum ClientError {
    #[error("{stage} client transport failure: {message}")]
    Transport { stage: Stage, message: String },
    #[error("{stage} client protocol failure: {message}")]
    Protocol { stage: Stage, message: String },
}

impl ClientError {
    pub fn transport(stage: Stage, message: impl Into<String>) -> Self {
        ClientError::Transport {
            stage,
            message: message.into(),
        }
    }

    pub fn protocol(stage: Stage, message: impl Into<String>) -> Self {
        ClientError::Protocol {
            stage,
            message: message.into(),
        }
    }
}

/// A subgraph with its parent graph, resolved for generator consumption.
pub struct SubgraphView<'g> {
    pub graph: &'g FaceAttackGraph,
    pub subgraph: &'g Subgraph,
    pub center: &'g Entity,
}

/// One subgraph edge with resolved endpoints.
pub struct RelationRow<'g> {
    pub id: RelationId,
    pub attack: &'g Entity,
    pub predicate: &'g str,
    pub feature: &'g Entity,
}

impl<'g> SubgraphView<'g> {
    pub fn new(
        graph: &'g FaceAttackGraph,
        subgraph: &'g Subgraph,
    ) -> Result<Self, crate::graph::GraphError> {
        let center = graph.entity(subgraph.center.as_str()).ok_or_else(|| {
            crate::graph::GraphError::UnknownEntity {
                id: subgraph.center.to_string(),
            }
        })?;
        Ok(SubgraphView {
            graph,
            subgraph,
            center,
        })
    }

    /// Subgraph edges in the parent graph's relation order.
    pub fn relations(&self) -> impl Iterator<Item = RelationRow<'g>> + '_ {
        self.subgraph.edges.iter().map(|rid| {
            let r = self.graph.relation(*rid);
            RelationRow {
                id: *rid,
                attack: self.graph.entity(r.attack.as_str()).expect("endpoint"),
                predicate: &r.predicate,
                feature: self.graph.entity(r.feature.as_str()).expect("endpoint"),
            }
        })
    }

    /// Edges sourced at the center attack.
    pub fn center_relations(&self) -> Vec<RelationRow<'g>> {
        self.relations()
            .filter(|r| r.attack.id == self.center.id)
            .collect()
    }

    /// Other attack entities present in the subgraph, in edge order.
    pub fn other_attacks(&self) -> Vec<&'g Entity> {
        let mut seen = Vec::new();
        for row in self.relations() {
            if row.attack.id != self.center.id && !seen.iter().any(|e: &&Entity| e.id == row.attack.id)
            {
                seen.push(row.attack);
            }
        }
        seen
    }
}

/// Complexity and information-gain scores on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityScores {
    pub complexity: f64,
    pub info_gain: f64,
}

/// Graph size context handed to the pruning judge.
#[derive(Debug, Clone, Copy)]
pub struct GraphStats {
    pub relations: usize,
    pub features: usize,
}

impl GraphStats {
    pub fn of(g: &FaceAttackGraph) -> Self {
        GraphStats {
            relations: g.relations().len(),
            features: g
                .entities()
                .filter(|e| e.kind == EntityKind::Feature)
                .count(),
        }
    }
}

/// The four generator roles behind the synthesis stages.
pub trait GeneratorClients: Sync {
    fn skeleton(&self, view: &SubgraphView<'_>) -> Result<Skeleton, ClientError>;
    fn caption(&self, image_ref: &str, label: &str) -> Result<Caption, ClientError>;
    fn fuse(
        &self,
        image_ref: &str,
        label: &str,
        skeleton: &Skeleton,
        caption: &Caption,
    ) -> Result<Fusion, ClientError>;
    /// True when the caption and skeleton contradict each other.
    fn judge_conflict(&self, skeleton: &Skeleton, caption: &Caption) -> Result<bool, ClientError>;
    fn judge_quality(
        &self,
        record: &QARecord,
        stats: GraphStats,
    ) -> Result<QualityScores, ClientError>;
}

fn fnv1a(seed: u64, text: &str) -> u64 {
    let mut hash = 0xcbf29ce484222325u64 ^ seed;
    for b in text.as_bytes() {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// How an attack reads in a question.
fn subject(e: &Entity) -> String {
    let name = text::normalize_surface(&e.name);
    if name.contains("bona") || name.contains("real") {
        "a bona fide face".to_string()
    } else {
        format!("a {name} attack")
    }
}

/// Deterministic offline generators.
pub struct StubClients {
    pub seed: u64,
    pub emit_rationale: bool,
    conflict_calls: AtomicUsize,
    quality_calls: AtomicUsize,
}

impl StubClients {
    pub fn new(seed: u64) -> Self {
        StubClients {
            seed,
            emit_rationale: true,
            conflict_calls: AtomicUsize::new(0),
            quality_calls: AtomicUsize::new(0),
        }
    }

    pub fn without_rationale(seed: u64) -> Self {
        let mut s = Self::new(seed);
        s.emit_rationale = false;
        s
    }

    /// Number of fact-conflict judgements performed.
    pub fn conflict_calls(&self) -> usize {
        self.conflict_calls.load(Ordering::Relaxed)
    }

    /// Number of pruning judgements performed.
    pub fn quality_calls(&self) -> usize {
        self.quality_calls.load(Ordering::Relaxed)
    }

    fn evidence_phrase(label: &str) -> &'static str {
        match text::normalize_label(label).as_str() {
            "real face" | "bona fide" => "natural skin texture and consistent illumination",
            "print" => "a flat appearance with a faint lattice pattern and a visible paper edge",
            "replay" => "moire interference bands and a hint of screen glare",
            "faceswap" | "face swap" => {
                "a blending boundary and geometric inconsistencies around the jaw"
            }
            "attribute-edit" | "attribute edit" => "over-smoothed regions with editing residue",
            "video-driven" | "video driven" => "unnatural expression warping and landmark jitter",
            "adversarial" => "structured noise overlaid on the skin",
            _ => "attack-consistent irregularities",
        }
    }
}

impl GeneratorClients for StubClients {
    fn skeleton(&self, view: &SubgraphView<'_>) -> Result<Skeleton, ClientError> {
        let center_rels = view.center_relations();
        let contrast = if view.subgraph.k >= 2 {
            view.other_attacks().into_iter().next()
        } else {
            None
        };
        let question = match contrast {
            Some(other) => format!(
                "Why is this {} and not {}?",
                subject(view.center),
                subject(other)
            ),
            None => format!("Why is this {}?", subject(view.center)),
        };
        let mut cited: Vec<CitedTriple> = Vec::new();
        let mut steps: Vec<String> = Vec::new();
        for row in &center_rels {
            cited.push(CitedTriple {
                attack: row.attack.name.clone(),
                predicate: row.predicate.to_string(),
                feature: row.feature.name.clone(),
            });
            steps.push(format!(
                "Check that the sample {} {}.",
                row.predicate, row.feature.name
            ));
        }
        if let Some(other) = contrast {
            for row in view.relations().filter(|r| r.attack.id == other.id) {
                cited.push(CitedTriple {
                    attack: row.attack.name.clone(),
                    predicate: row.predicate.to_string(),
                    feature: row.feature.name.clone(),
                });
                steps.push(format!(
                    "Contrast with {}: it {} {}.",
                    other.name, row.predicate, row.feature.name
                ));
            }
        }
        Ok(Skeleton {
            question,
            reasoning_steps: steps,
            cited_triples: cited,
        })
    }

    fn caption(&self, image_ref: &str, label: &str) -> Result<Caption, ClientError> {
        let phrase = Self::evidence_phrase(label);
        let variants = [
            format!("The image shows a face with {phrase}."),
            format!("Close inspection reveals {phrase}."),
            format!("The capture exhibits {phrase}."),
        ];
        let idx = (fnv1a(self.seed, image_ref) % variants.len() as u64) as usize;
        let mut body = variants[idx].clone();
        // Marker path for exercising the fact-conflict judge end to end.
        if image_ref.contains("pristine") {
            body.push_str(" The skin shows pristine high-resolution textures.");
        }
        Ok(Caption { text: body })
    }

    fn fuse(
        &self,
        _image_ref: &str,
        label: &str,
        skeleton: &Skeleton,
        caption: &Caption,
    ) -> Result<Fusion, ClientError> {
        let rationale = self.emit_rationale.then(|| {
            let mut parts = skeleton.reasoning_steps.clone();
            parts.push(caption.text.clone());
            parts.join(" ")
        });
        Ok(Fusion {
            question: skeleton.question.clone(),
            answer: label.to_string(),
            rationale,
        })
    }

    fn judge_conflict(&self, skeleton: &Skeleton, caption: &Caption) -> Result<bool, ClientError> {
        self.conflict_calls.fetch_add(1, Ordering::Relaxed);
        let pristine = caption
            .text
            .to_lowercase()
            .contains("pristine high-resolution textures");
        let cites_replay = skeleton
            .cited_triples
            .iter()
            .any(|t| text::normalize_surface(&t.attack).contains("replay"));
        Ok(pristine && cites_replay)
    }

    fn judge_quality(
        &self,
        record: &QARecord,
        stats: GraphStats,
    ) -> Result<QualityScores, ClientError> {
        self.quality_calls.fetch_add(1, Ordering::Relaxed);
        let cited = record.provenance.skeleton.cited_triples.len();
        let distinct_features = record
            .provenance
            .skeleton
            .cited_triples
            .iter()
            .map(|t| text::normalize_surface(&t.feature))
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        let complexity = (cited as f64 / stats.relations.max(1) as f64).min(1.0);
        let info_gain = (distinct_features as f64 / stats.features.max(1) as f64).min(1.0);
        Ok(QualityScores {
            complexity,
            info_gain,
        })
    }
}

/// How images are attached to remote requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImageMode {
    /// Pass the image reference (path or URI) through as text.
    #[default]
    Reference,
    /// Read the file and inline it as a base64 data URL.
    InlineBase64,
}

/// Per-stage endpoint configuration for remote generators.
#[derive(Debug, Clone)]
pub struct StageConfigs {
    pub skeleton: RemoteConfig,
    pub caption: RemoteConfig,
    pub fusion: RemoteConfig,
    pub judge: RemoteConfig,
    pub image_mode: ImageMode,
}

/// Chat-completion-backed generators, one endpoint per stage.
pub struct RemoteGeneratorClients {
    cfgs: StageConfigs,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize)]
struct FusionDoc {
    question: String,
    answer: String,
    #[serde(default)]
    rationale: Option<String>,
}

#[derive(Deserialize)]
struct QualityDoc {
    complexity: f64,
    info_gain: f64,
}

impl RemoteGeneratorClients {
    pub fn new(cfgs: StageConfigs) -> Result<Self, ClientError> {
        let timeout = cfgs.skeleton.timeout.max(cfgs.caption.timeout);
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ClientError::transport(Stage::Skeleton, e.to_string()))?;
        Ok(RemoteGeneratorClients { cfgs, client })
    }

    fn image_content(&self, stage: Stage, image_ref: &str) -> Result<serde_json::Value, ClientError> {
        let url = match self.cfgs.image_mode {
            ImageMode::Reference => image_ref.to_string(),
            ImageMode::InlineBase64 => {
                let bytes = std::fs::read(image_ref).map_err(|e| {
                    ClientError::protocol(stage, format!("cannot read image {image_ref}: {e}"))
                })?;
                format!(
                    "data:image/jpeg;base64,{}",
                    base64::engine::general_purpose::STANDARD.encode(bytes)
                )
            }
        };
        Ok(json!({ "type": "image_url", "image_url": { "url": url } }))
    }

    fn chat(
        &self,
        stage: Stage,
        cfg: &RemoteConfig,
        messages: serde_json::Value,
    ) -> Result<String, ClientError> {
        let mut body = json!({ "messages": messages, "temperature": 0 });
        if let Some(model) = &cfg.model {
            body["model"] = json!(model);
        }
        let mut last_err = None;
        for attempt in 0..=cfg.max_retries {
            if attempt > 0 && !cfg.retry_backoff.is_zero() {
                std::thread::sleep(cfg.retry_backoff);
            }
            let mut req = self.client.post(&cfg.endpoint).json(&body);
            if let Some(key) = &cfg.api_key {
                req = req.bearer_auth(key);
            }
            let result = (|| {
                let resp = req
                    .send()
                    .map_err(|e| ClientError::transport(stage, e.to_string()))?;
                let status = resp.status();
                if !status.is_success() {
                    return Err(ClientError::transport(
                        stage,
                        format!("endpoint answered {status}"),
                    ));
                }
                let parsed: ChatResponse = resp
                    .json()
                    .map_err(|e| ClientError::transport(stage, e.to_string()))?;
                parsed
                    .choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content)
                    .ok_or_else(|| ClientError::transport(stage, "reply had no choices"))
            })();
            match result {
                Ok(content) => return Ok(content),
                Err(e) => {
                    log::warn!("{stage} attempt {} failed: {e}", attempt + 1);
                    last_err = Some(e);
                }
            }
        }
        Err(last_err.expect("at least one attempt"))
    }

    /// Extract the first JSON object embedded in a chat reply.
    fn embedded_json(stage: Stage, content: &str) -> Result<&str, ClientError> {
        let start = content
            .find('{')
            .ok_or_else(|| ClientError::protocol(stage, "reply carries no JSON object"))?;
        let end = content
            .rfind('}')
            .filter(|e| *e > start)
            .ok_or_else(|| ClientError::protocol(stage, "reply carries no JSON object"))?;
        Ok(&content[start..=end])
    }
}

impl GeneratorClients for RemoteGeneratorClients {
    fn skeleton(&self, view: &SubgraphView<'_>) -> Result<Skeleton, ClientError> {
        let triples: Vec<String> = view
            .relations()
            .map(|r| format!("({}, {}, {})", r.attack.name, r.predicate, r.feature.name))
            .collect();
        let prompt = format!(
            "You write diagnostic reasoning skeletons for face-attack analysis.\n\
             Center category: {}. Subgraph relations:\n{}\n\
             Reply with a JSON object {{\"question\", \"reasoning_steps\": [..], \
             \"cited_triples\": [{{\"attack\", \"predicate\", \"feature\"}}]}} citing only the relations above.",
            view.center.name,
            triples.join("\n")
        );
        let content = self.chat(
            Stage::Skeleton,
            &self.cfgs.skeleton,
            json!([{ "role": "user", "content": prompt }]),
        )?;
        let doc = Self::embedded_json(Stage::Skeleton, &content)?;
        serde_json::from_str(doc).map_err(|e| ClientError::protocol(Stage::Skeleton, e.to_string()))
    }

    fn caption(&self, image_ref: &str, label: &str) -> Result<Caption, ClientError> {
        let image = self.image_content(Stage::Caption, image_ref)?;
        let prompt = format!(
            "Describe the observable evidence in this face image relevant to the label {label:?}: \
             illumination, texture consistency, boundary artifacts. One short paragraph."
        );
        let content = self.chat(
            Stage::Caption,
            &self.cfgs.caption,
            json!([{ "role": "user", "content": [ {"type": "text", "text": prompt}, image ] }]),
        )?;
        let text = content.trim().to_string();
        if text.is_empty() {
            return Err(ClientError::protocol(Stage::Caption, "empty caption"));
        }
        Ok(Caption { text })
    }

    fn fuse(
        &self,
        image_ref: &str,
        _label: &str,
        skeleton: &Skeleton,
        caption: &Caption,
    ) -> Result<Fusion, ClientError> {
        let image = self.image_content(Stage::Fusion, image_ref)?;
        let prompt = format!(
            "Fuse this reasoning skeleton and image caption into one QA pair.\n\
             Skeleton question: {}\nSkeleton steps: {}\nCaption: {}\n\
             Reply with a JSON object {{\"question\", \"answer\", \"rationale\"}}.",
            skeleton.question,
            skeleton.reasoning_steps.join(" | "),
            caption.text
        );
        let content = self.chat(
            Stage::Fusion,
            &self.cfgs.fusion,
            json!([{ "role": "user", "content": [ {"type": "text", "text": prompt}, image ] }]),
        )?;
        let doc: FusionDoc = serde_json::from_str(Self::embedded_json(Stage::Fusion, &content)?)
            .map_err(|e| ClientError::protocol(Stage::Fusion, e.to_string()))?;
        Ok(Fusion {
            question: doc.question,
            answer: doc.answer,
            rationale: doc.rationale,
        })
    }

    fn judge_conflict(&self, skeleton: &Skeleton, caption: &Caption) -> Result<bool, ClientError> {
        let prompt = format!(
            "You are a critic checking caption/reasoning alignment.\n\
             Caption: {}\nReasoning steps: {}\n\
             Do the caption facts contradict the reasoning? Answer exactly 'conflict' or 'consistent'.",
            caption.text,
            skeleton.reasoning_steps.join(" | ")
        );
        let content = self.chat(
            Stage::Judge,
            &self.cfgs.judge,
            json!([{ "role": "user", "content": prompt }]),
        )?;
        let verdict = content.trim().to_lowercase();
        if verdict.starts_with("conflict") {
            Ok(true)
        } else if verdict.starts_with("consistent") {
            Ok(false)
        } else {
            Err(ClientError::protocol(
                Stage::Judge,
                format!("unrecognized conflict verdict: {verdict:?}"),
            ))
        }
    }

    fn judge_quality(
        &self,
        record: &QARecord,
        _stats: GraphStats,
    ) -> Result<QualityScores, ClientError> {
        let prompt = format!(
            "Score this QA sample for logical complexity (multi-hop, dense evidence) and \
             information gain (diagnostic value), each on [0,1].\n\
             Question: {}\nAnswer: {}\nRationale: {}\n\
             Reply with a JSON object {{\"complexity\", \"info_gain\"}}.",
            record.question,
            record.answer,
            record.rationale.as_deref().unwrap_or("")
        );
        let content = self.chat(
            Stage::Judge,
            &self.cfgs.judge,
            json!([{ "role": "user", "content": prompt }]),
        )?;
        let doc: QualityDoc = serde_json::from_str(Self::embedded_json(Stage::Judge, &content)?)
            .map_err(|e| ClientError::protocol(Stage::Judge, e.to_string()))?;
        Ok(QualityScores {
            complexity: doc.complexity,
            info_gain: doc.info_gain,
        })
    }
}
