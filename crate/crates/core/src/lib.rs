//! fakg: a face-attack knowledge-graph toolkit.
//!
//! The crate centers on an immutable [`graph::FaceAttackGraph`] of attack
//! types and diagnostic feature cues. Around it:
//!
//! - [`ground`]: parse think/answer responses and project rationale text
//!   onto the graph's relation set (regex patterns plus a pluggable
//!   verifier).
//! - [`reward`]: accuracy/format/KG-consistency rewards and critic-free
//!   group-relative advantages.
//! - [`eval`]: three-protocol ACC/FAR/FRR/HTER evaluation with one-vs-rest
//!   categories and image-count-weighted totals.
//! - [`synth`]: graph-guided QA synthesis over a labeled image manifest,
//!   with structural, fact-conflict, and pruning filters, exporting
//!   instruction-tuning records.
//! - [`sandbox`]: a deterministic toy policy trained end-to-end against the
//!   real reward stack.
//!
//! Numeric kernels are generic over [`num::Real`] (`f32` or `f64`); the
//! `f64` instantiations used by the CLI and file formats are aliased at the
//! crate root.

pub mod eval;
pub mod graph;
pub mod ground;
pub mod num;
pub mod reward;
pub mod sandbox;
pub mod synth;
pub mod text;

/// Reward weights at the default `f64` precision.
pub type RewardWeights = reward::RewardWeights<f64>;
/// Per-response reward components at `f64`.
pub type RewardBreakdown = reward::RewardBreakdown<f64>;
/// Group-normalized scores and advantages at `f64`.
pub type GroupScore = reward::GroupScore<f64>;
/// Per-category evaluation metrics at `f64`.
pub type CategoryMetrics = eval::CategoryMetrics<f64>;
/// Full protocol evaluation report at `f64`.
pub type EvalReport = eval::EvalReport<f64>;
/// Toy softmax policy at `f64`.
pub type ToyPolicy = sandbox::ToyPolicy<f64>;
/// Sandbox training configuration at `f64`.
pub type TrainConfig = sandbox::TrainConfig<f64>;
/// Sandbox training trace at `f64`.
pub type TrainTrace = sandbox::TrainTrace<f64>;
