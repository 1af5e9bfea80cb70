//! Graph-guided QA synthesis over a labeled image manifest.
//!
//! Per entry: locate the label's attack node, extract its k-hop
//! ego-subgraph, generate a reasoning skeleton and an evidence caption, gate
//! them through the structural and fact-conflict filters, fuse into a QA
//! pair, and prune on complexity/information-gain scores. Passing records
//! carry full provenance and export to instruction-tuning quadruples.
//!
//! Entries may be processed concurrently up to a configured cap; output
//! order and statistics are independent of scheduling.

mod clients;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EntityId, EntityKind, FaceAttackGraph, GraphError};

pub use clients::{
    ClientError, GeneratorClients, GraphStats, ImageMode, QualityScores, RelationRow,
    RemoteGeneratorClients, Stage, StageConfigs, StubClients, SubgraphView,
};

/// One labeled image of the source dataset. Labels are raw strings resolved
/// through the graph's label index at synthesis time, so a bad label skips
/// one sample instead of failing the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub sample_id: String,
    #[serde(rename = "image")]
    pub image_ref: String,
    pub label: String,
}

/// A name-level relation citation inside a skeleton. Names resolve through
/// entity aliases during structural validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitedTriple {
    pub attack: String,
    pub predicate: String,
    pub feature: String,
}

impl std::fmt::Display for CitedTriple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.attack, self.predicate, self.feature)
    }
}

/// Structured reasoning scaffold generated from a subgraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skeleton {
    pub question: String,
    pub reasoning_steps: Vec<String>,
    pub cited_triples: Vec<CitedTriple>,
}

/// Evidence-focused image description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caption {
    pub text: String,
}

/// Fuser output: the final QA pair and an optional rationale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fusion {
    pub question: String,
    pub answer: String,
    pub rationale: Option<String>,
}

/// Why a record was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Structural,
    FactConflict,
    LowComplexity,
    LowInfo,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RejectReason::Structural => "structural",
            RejectReason::FactConflict => "fact_conflict",
            RejectReason::LowComplexity => "low_complexity",
            RejectReason::LowInfo => "low_info",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Reject,
}

/// Filter outcome. `reason` is present exactly when the record was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub status: VerdictStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<RejectReason>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl FilterVerdict {
    pub fn pass() -> Self {
        FilterVerdict {
            status: VerdictStatus::Pass,
            reason: None,
            detail: String::new(),
        }
    }

    pub fn pass_with_detail(detail: impl Into<String>) -> Self {
        FilterVerdict {
            status: VerdictStatus::Pass,
            reason: None,
            detail: detail.into(),
        }
    }

    pub fn reject(reason: RejectReason, detail: impl Into<String>) -> Self {
        FilterVerdict {
            status: VerdictStatus::Reject,
            reason: Some(reason),
            detail: detail.into(),
        }
    }

    pub fn is_pass(&self) -> bool {
        self.status == VerdictStatus::Pass
    }
}

/// Where a record came from: the subgraph it was grounded in and the
/// intermediate generator outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub k: usize,
    pub center: EntityId,
    pub subgraph_hash: String,
    pub skeleton: Skeleton,
    pub caption: Caption,
}

/// One synthesized QA sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QARecord {
    pub sample_id: String,
    #[serde(rename = "image")]
    pub image_ref: String,
    pub label: String,
    pub question: String,
    pub answer: String,
    pub rationale: Option<String>,
    pub provenance: Provenance,
    pub verdict: Option<FilterVerdict>,
}

/// Instruction-tuning record: image, question, rationale, answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgitRecord {
    pub image: String,
    pub question: String,
    pub think: String,
    pub answer: String,
}

impl AgitRecord {
    /// True when the fuser emitted no rationale and `think` is empty.
    pub fn think_missing(&self) -> bool {
        self.think.is_empty()
    }
}

/// Minimum complexity and information-gain scores a fused record must reach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneThresholds {
    pub min_complexity: f64,
    pub min_info: f64,
}

impl Default for PruneThresholds {
    fn default() -> Self {
        PruneThresholds {
            min_complexity: 0.0,
            min_info: 0.0,
        }
    }
}

/// What to do when a judge endpoint is unreachable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JudgeFailurePolicy {
    /// Let the record through, flagging it unverified in the detail.
    #[default]
    PassThrough,
    /// Skip the sample (operational failure, not a rejection).
    HardFail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterToggles {
    pub structural: bool,
    pub fact_conflict: bool,
    pub pruning: bool,
}

impl Default for FilterToggles {
    fn default() -> Self {
        FilterToggles {
            structural: true,
            fact_conflict: true,
            pruning: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 2,
            backoff: Duration::from_millis(250),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Ego-subgraph radius; 1 yields single-relation skeletons, larger radii
    /// enable contrastive ones.
    pub k: usize,
    pub seed: u64,
    pub filters: FilterToggles,
    pub thresholds: PruneThresholds,
    pub retry: RetryPolicy,
    pub concurrency: usize,
    pub judge_failure: JudgeFailurePolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 2,
            seed: 0,
            filters: FilterToggles::default(),
            thresholds: PruneThresholds::default(),
            retry: RetryPolicy::default(),
            concurrency: 1,
            judge_failure: JudgeFailurePolicy::default(),
        }
    }
}

/// Run totals. `attempted = passed + rejected + skipped` always holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PipelineStats {
    pub attempted: usize,
    pub passed: usize,
    pub rejected_structural: usize,
    pub rejected_fact_conflict: usize,
    pub rejected_low_complexity: usize,
    pub rejected_low_info: usize,
    pub skipped: usize,
    /// Passing records whose fuser emitted no rationale.
    pub missing_rationale: usize,
}

impl PipelineStats {
    pub fn rejected_total(&self) -> usize {
        self.rejected_structural
            + self.rejected_fact_conflict
            + self.rejected_low_complexity
            + self.rejected_low_info
    }

    pub fn is_conserved(&self) -> bool {
        self.attempted == self.passed + self.rejected_total() + self.skipped
    }

    fn count_reject(&mut self, reason: RejectReason) {
        match reason {
            RejectReason::Structural => self.rejected_structural += 1,
            RejectReason::FactConflict => self.rejected_fact_conflict += 1,
            RejectReason::LowComplexity => self.rejected_low_complexity += 1,
            RejectReason::LowInfo => self.rejected_low_info += 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("sample {sample_id}: unknown label {label:?}")]
    UnknownLabel { sample_id: String, label: String },
    #[error("sample {sample_id}: {source}")]
    Client {
        sample_id: String,
        source: ClientError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("record {sample_id} was rejected and cannot be exported")]
    RejectedRecord { sample_id: String },
    #[error("record {sample_id} carries no filter verdict")]
    UnfilteredRecord { sample_id: String },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("duplicate sample_id {sample_id:?} in manifest (line {line})")]
    DuplicateSample { sample_id: String, line: usize },
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

/// Parse a JSONL manifest, enforcing per-entry invariants and sample-id
/// uniqueness. Blank lines are ignored.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, SynthError> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry =
            serde_json::from_str(line).map_err(|e| SynthError::Manifest {
                line: line_no,
                message: e.to_string(),
            })?;
        if entry.image_ref.is_empty() {
            return Err(SynthError::Manifest {
                line: line_no,
                message: format!("sample {:?} has an empty image reference", entry.sample_id),
            });
        }
        if let Some(prev) = seen.insert(entry.sample_id.clone(), line_no) {
            let _ = prev;
            return Err(SynthError::DuplicateSample {
                sample_id: entry.sample_id,
                line: line_no,
            });
        }
        out.push(entry);
    }
    Ok(out)
}

fn with_retry<T>(
    policy: RetryPolicy,
    mut attempt: impl FnMut() -> Result<T, ClientError>,
) -> Result<T, ClientError> {
    let mut tries = 0;
    loop {
        match attempt() {
            Ok(v) => return Ok(v),
            Err(e) if tries < policy.max_retries => {
                tries += 1;
                log::warn!("generator attempt {tries} failed, retrying: {e}");
                if !policy.backoff.is_zero() {
                    std::thread::sleep(policy.backoff);
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Reject a skeleton unless every cited triple, resolved through entity
/// aliases, names a relation of the graph. Skeletons citing nothing cannot
/// be validated and are rejected too.
pub fn structural_filter(s: &Skeleton, g: &FaceAttackGraph) -> FilterVerdict {
    if s.cited_triples.is_empty() {
        return FilterVerdict::reject(RejectReason::Structural, "no grounded triples");
    }
    for t in &s.cited_triples {
        let attack = g
            .resolve_entity(&t.attack)
            .filter(|e| e.kind == EntityKind::AttackType);
        let feature = g
            .resolve_entity(&t.feature)
            .filter(|e| e.kind == EntityKind::Feature);
        let known = match (attack, feature) {
            (Some(a), Some(f)) => g.find_relation(&a.id, &t.predicate, &f.id).is_some(),
            _ => false,
        };
        if !known {
            return FilterVerdict::reject(
                RejectReason::Structural,
                format!("triple {t} is not in the graph"),
            );
        }
    }
    FilterVerdict::pass()
}

/// Ask the judge whether the caption's visual facts contradict the
/// skeleton's attack logic. Judge failures follow `policy`.
pub fn logical_flow_filter(
    skeleton: &Skeleton,
    caption: &Caption,
    clients: &dyn GeneratorClients,
    policy: JudgeFailurePolicy,
) -> Result<FilterVerdict, ClientError> {
    match clients.judge_conflict(skeleton, caption) {
        Ok(true) => Ok(FilterVerdict::reject(
            RejectReason::FactConflict,
            "caption facts contradict the reasoning skeleton",
        )),
        Ok(false) => Ok(FilterVerdict::pass()),
        Err(e) => match policy {
            JudgeFailurePolicy::PassThrough => {
                Ok(FilterVerdict::pass_with_detail(format!("unverified: {e}")))
            }
            JudgeFailurePolicy::HardFail => Err(e),
        },
    }
}

/// Score a fused record and reject below-threshold complexity (first) or
/// information gain (second).
pub fn pruning_filter(
    record: &QARecord,
    clients: &dyn GeneratorClients,
    stats: GraphStats,
    thresholds: &PruneThresholds,
    policy: JudgeFailurePolicy,
) -> Result<FilterVerdict, ClientError> {
    let scores = match clients.judge_quality(record, stats) {
        Ok(s) => s,
        Err(e) => {
            return match policy {
                JudgeFailurePolicy::PassThrough => {
                    Ok(FilterVerdict::pass_with_detail(format!("unverified: {e}")))
                }
                JudgeFailurePolicy::HardFail => Err(e),
            }
        }
    };
    if scores.complexity < thresholds.min_complexity {
        return Ok(FilterVerdict::reject(
            RejectReason::LowComplexity,
            format!(
                "complexity {:.3} below threshold {:.3}",
                scores.complexity, thresholds.min_complexity
            ),
        ));
    }
    if scores.info_gain < thresholds.min_info {
        return Ok(FilterVerdict::reject(
            RejectReason::LowInfo,
            format!(
                "information gain {:.3} below threshold {:.3}",
                scores.info_gain, thresholds.min_info
            ),
        ));
    }
    Ok(FilterVerdict::pass())
}

struct Stages {
    skeleton: Skeleton,
    caption: Caption,
    center: EntityId,
    subgraph_hash: String,
}

fn generate_stages(
    entry: &ManifestEntry,
    g: &FaceAttackGraph,
    k: usize,
    retry: RetryPolicy,
    clients: &dyn GeneratorClients,
) -> Result<Stages, SynthError> {
    let center = g
        .attack_node_for_label(&entry.label)
        .map_err(|_| SynthError::UnknownLabel {
            sample_id: entry.sample_id.clone(),
            label: entry.label.clone(),
        })?
        .clone();
    let subgraph = g.ego_subgraph(center.as_str(), k)?;
    let subgraph_hash = subgraph.content_hash(g);
    let view = SubgraphView::new(g, &subgraph)?;
    let skeleton =
        with_retry(retry, || clients.skeleton(&view)).map_err(|source| SynthError::Client {
            sample_id: entry.sample_id.clone(),
            source,
        })?;
    let caption = with_retry(retry, || clients.caption(&entry.image_ref, &entry.label)).map_err(
        |source| SynthError::Client {
            sample_id: entry.sample_id.clone(),
            source,
        },
    )?;
    Ok(Stages {
        skeleton,
        caption,
        center,
        subgraph_hash,
    })
}

fn fuse_record(
    entry: &ManifestEntry,
    stages: Stages,
    k: usize,
    retry: RetryPolicy,
    clients: &dyn GeneratorClients,
) -> Result<QARecord, SynthError> {
    let fusion = with_retry(retry, || {
        clients.fuse(&entry.image_ref, &entry.label, &stages.skeleton, &stages.caption)
    })
    .map_err(|source| SynthError::Client {
        sample_id: entry.sample_id.clone(),
        source,
    })?;
    Ok(QARecord {
        sample_id: entry.sample_id.clone(),
        image_ref: entry.image_ref.clone(),
        label: entry.label.clone(),
        question: fusion.question,
        answer: fusion.answer,
        rationale: fusion.rationale,
        provenance: Provenance {
            k,
            center: stages.center,
            subgraph_hash: stages.subgraph_hash,
            skeleton: stages.skeleton,
            caption: stages.caption,
        },
        verdict: None,
    })
}

/// Synthesize one pre-filter record: subgraph, skeleton, caption, fusion.
pub fn synthesize_one(
    entry: &ManifestEntry,
    g: &FaceAttackGraph,
    k: usize,
    clients: &dyn GeneratorClients,
) -> Result<QARecord, SynthError> {
    let retry = RetryPolicy::default();
    let stages = generate_stages(entry, g, k, retry, clients)?;
    fuse_record(entry, stages, k, retry, clients)
}

enum Outcome {
    Passed(Box<QARecord>),
    Rejected(RejectReason),
    Skipped(String),
}

fn process_entry(
    entry: &ManifestEntry,
    g: &FaceAttackGraph,
    cfg: &PipelineConfig,
    stats_ctx: GraphStats,
    clients: &dyn GeneratorClients,
) -> Outcome {
    let stages = match generate_stages(entry, g, cfg.k, cfg.retry, clients) {
        Ok(s) => s,
        Err(e) => return Outcome::Skipped(e.to_string()),
    };

    if cfg.filters.structural {
        let verdict = structural_filter(&stages.skeleton, g);
        if let Some(reason) = verdict.reason {
            log::info!("sample {}: rejected ({})", entry.sample_id, verdict.detail);
            return Outcome::Rejected(reason);
        }
    }

    let mut pass_details: Vec<String> = Vec::new();
    if cfg.filters.fact_conflict {
        match logical_flow_filter(&stages.skeleton, &stages.caption, clients, cfg.judge_failure) {
            Ok(verdict) => {
                if let Some(reason) = verdict.reason {
                    log::info!("sample {}: rejected ({})", entry.sample_id, verdict.detail);
                    return Outcome::Rejected(reason);
                }
                if !verdict.detail.is_empty() {
                    pass_details.push(verdict.detail);
                }
            }
            Err(e) => return Outcome::Skipped(format!("sample {}: {e}", entry.sample_id)),
        }
    }

    let mut record = match fuse_record(entry, stages, cfg.k, cfg.retry, clients) {
        Ok(r) => r,
        Err(e) => return Outcome::Skipped(e.to_string()),
    };

    if cfg.filters.pruning {
        match pruning_filter(&record, clients, stats_ctx, &cfg.thresholds, cfg.judge_failure) {
            Ok(verdict) => {
                if let Some(reason) = verdict.reason {
                    log::info!("sample {}: rejected ({})", entry.sample_id, verdict.detail);
                    return Outcome::Rejected(reason);
                }
                if !verdict.detail.is_empty() {
                    pass_details.push(verdict.detail);
                }
            }
            Err(e) => return Outcome::Skipped(format!("sample {}: {e}", entry.sample_id)),
        }
    }

    record.verdict = Some(if pass_details.is_empty() {
        FilterVerdict::pass()
    } else {
        FilterVerdict::pass_with_detail(pass_details.join("; "))
    });
    Outcome::Passed(Box::new(record))
}

/// Run the synthesis pipeline over a manifest.
///
/// The corpus holds passing records in manifest order regardless of the
/// concurrency cap; rejected and skipped entries are tallied in the stats.
pub fn run_pipeline(
    manifest: &[ManifestEntry],
    g: &FaceAttackGraph,
    cfg: &PipelineConfig,
    clients: &dyn GeneratorClients,
) -> Result<(Vec<QARecord>, PipelineStats), SynthError> {
    let stats_ctx = GraphStats::of(g);
    let outcomes: Vec<Outcome> = if cfg.concurrency > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.concurrency)
            .build()
            .map_err(|e| SynthError::Pool(e.to_string()))?;
        pool.install(|| {
            use rayon::prelude::*;
            manifest
                .par_iter()
                .map(|entry| process_entry(entry, g, cfg, stats_ctx, clients))
                .collect()
        })
    } else {
        manifest
            .iter()
            .map(|entry| process_entry(entry, g, cfg, stats_ctx, clients))
            .collect()
    };

    let mut stats = PipelineStats {
        attempted: manifest.len(),
        ..PipelineStats::default()
    };
    let mut corpus = Vec::new();
    for outcome in outcomes {
        match outcome {
            Outcome::Passed(record) => {
                stats.passed += 1;
                if record.rationale.is_none() {
                    stats.missing_rationale += 1;
                }
                corpus.push(*record);
            }
            Outcome::Rejected(reason) => stats.count_reject(reason),
            Outcome::Skipped(why) => {
                log::warn!("skipped: {why}");
                stats.skipped += 1;
            }
        }
    }
    debug_assert!(stats.is_conserved());
    Ok((corpus, stats))
}

/// Export a passing record as an instruction-tuning quadruple. The rationale
/// precedes the answer; a record fused without one exports an empty think
/// segment (callers flag these via [`AgitRecord::think_missing`]).
pub fn to_agit_record(record: &QARecord) -> Result<AgitRecord, SynthError> {
    match &record.verdict {
        Some(v) if v.is_pass() => Ok(AgitRecord {
            image: record.image_ref.clone(),
            question: record.question.clone(),
            think: record.rationale.clone().unwrap_or_default(),
            answer: record.answer.clone(),
        }),
        Some(_) => Err(SynthError::RejectedRecord {
            sample_id: record.sample_id.clone(),
        }),
        None => Err(SynthError::UnfilteredRecord {
            sample_id: record.sample_id.clone(),
        }),
    }
}
