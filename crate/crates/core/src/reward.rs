//! Reward computation and critic-free group-relative advantages.
//!
//! Each response earns an accuracy reward, a format reward, and a
//! KG-consistency reward. The KG reward combines a positive matching term
//! with a contradiction penalty:
//!
//! ```text
//! r_match    = |C ∩ S+| / (|S+| + eps)
//! r_conflict = |C ∩ S-| / (|S-| + eps)
//! r_kg       = clip_[0,1](r_match - eta * r_conflict)
//! total      = l_acc * r_acc + l_fmt * r_fmt + l_kg * r_kg
//! ```
//!
//! where `C` is the grounded relation set and `S+`/`S-` the support and
//! conflict sets of the ground-truth attack. Group advantages normalize
//! totals within a sampled group by its mean and population standard
//! deviation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ConflictPolicy, FaceAttackGraph, GraphError, SupportSets};
use crate::ground::{
    self, GroundError, GroundMode, GroundingReport, ParsedResponse, TagConfig, VerifierClient,
};
use crate::num::Real;
use crate::text;

/// Weights and guards for the reward combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights<F> {
    pub lambda_acc: F,
    pub lambda_fmt: F,
    pub lambda_kg: F,
    /// Conflict penalty weight.
    pub eta: F,
    /// Guard added to set cardinalities in the match/conflict denominators.
    pub epsilon_den: F,
    /// Guard added to sigma in the advantage denominator.
    pub epsilon_adv: F,
}

impl<F: Real> Default for RewardWeights<F> {
    fn default() -> Self {
        RewardWeights {
            lambda_acc: F::of(0.5),
            lambda_fmt: F::of(0.1),
            lambda_kg: F::of(0.4),
            eta: F::of(0.5),
            epsilon_den: F::of(1e-8),
            epsilon_adv: F::of(1e-6),
        }
    }
}

impl<F: Real> RewardWeights<F> {
    pub fn validate(&self) -> Result<(), RewardError> {
        let finite_nonneg = [self.lambda_acc, self.lambda_fmt, self.lambda_kg, self.eta]
            .iter()
            .all(|w| w.is_finite() && *w >= F::zero());
        if !finite_nonneg {
            return Err(RewardError::BadWeights(
                "lambda and eta weights must be finite and non-negative".into(),
            ));
        }
        if !(self.epsilon_den > F::zero() && self.epsilon_adv > F::zero()) {
            return Err(RewardError::BadWeights("epsilons must be positive".into()));
        }
        Ok(())
    }
}

/// Answer normalization: lowercase, trim, collapse internal whitespace,
/// strip trailing punctuation, then an optional synonym lookup.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelNormalizer {
    synonyms: BTreeMap<String, String>,
}

impl LabelNormalizer {
    /// Synonym keys are normalized at construction; values are the
    /// fine-grained labels they map to.
    pub fn new(synonyms: impl IntoIterator<Item = (String, String)>) -> Self {
        LabelNormalizer {
            synonyms: synonyms
                .into_iter()
                .map(|(k, v)| (text::normalize_label(&k), v))
                .collect(),
        }
    }

    pub fn normalize(&self, s: &str) -> String {
        text::normalize_label(s)
    }

    /// Map a raw answer to a fine-grained label: identity after
    /// normalization, or through the synonym table.
    pub fn resolve(&self, answer: &str) -> String {
        let norm = self.normalize(answer);
        match self.synonyms.get(&norm) {
            Some(label) => self.normalize(label),
            None => norm,
        }
    }
}

/// 1 iff the answer maps (exactly or via synonym) to the ground-truth label.
pub fn accuracy_reward(answer: &str, truth: &str, norm: &LabelNormalizer) -> bool {
    norm.resolve(answer) == norm.normalize(truth)
}

/// 1 iff the response had the strict two-segment structure.
pub fn format_reward(parsed: &ParsedResponse) -> bool {
    parsed.format_valid
}

/// The match/conflict/kg triple of the KG-consistency reward.
pub fn kg_reward<F: Real>(
    report: &GroundingReport,
    sets: &SupportSets,
    weights: &RewardWeights<F>,
) -> (F, F, F) {
    let matched = report
        .grounded
        .iter()
        .filter(|(rid, _)| sets.s_plus.contains(rid))
        .count();
    let conflicted = report
        .grounded
        .iter()
        .filter(|(rid, _)| sets.s_minus.contains(rid))
        .count();
    let r_match = F::of_usize(matched) / (F::of_usize(sets.s_plus.len()) + weights.epsilon_den);
    let r_conflict =
        F::of_usize(conflicted) / (F::of_usize(sets.s_minus.len()) + weights.epsilon_den);
    let r_kg = (r_match - weights.eta * r_conflict).clip01();
    (r_match, r_conflict, r_kg)
}

/// Per-response reward components. `r_kg` and `total` are derived in the
/// constructor so the combination identities hold by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown<F> {
    pub r_acc: F,
    pub r_fmt: F,
    pub r_match: F,
    pub r_conflict: F,
    pub r_kg: F,
    pub total: F,
}

impl<F: Real> RewardBreakdown<F> {
    pub fn new(
        correct: bool,
        well_formed: bool,
        r_match: F,
        r_conflict: F,
        weights: &RewardWeights<F>,
    ) -> Self {
        let r_acc = if correct { F::one() } else { F::zero() };
        let r_fmt = if well_formed { F::one() } else { F::zero() };
        let r_kg = (r_match - weights.eta * r_conflict).clip01();
        let mut b = RewardBreakdown {
            r_acc,
            r_fmt,
            r_match,
            r_conflict,
            r_kg,
            total: F::zero(),
        };
        b.total = total_reward(&b, weights);
        b
    }
}

/// The weighted scalar reward of a breakdown.
pub fn total_reward<F: Real>(b: &RewardBreakdown<F>, w: &RewardWeights<F>) -> F {
    w.lambda_acc * b.r_acc + w.lambda_fmt * b.r_fmt + w.lambda_kg * b.r_kg
}

/// Group statistics and per-response advantages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupScore<F> {
    pub breakdowns: Vec<RewardBreakdown<F>>,
    pub mu: F,
    pub sigma: F,
    pub advantages: Vec<F>,
}

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("invalid reward weights: {0}")]
    BadWeights(String),
    #[error("cannot score an empty group")]
    EmptyGroup,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ground(#[from] GroundError),
}

/// Mean, population standard deviation, and advantages for one group.
///
/// Exactly-equal totals short-circuit to zero advantages; otherwise
/// `advantages[g] = (totals[g] - mu) / (sigma + epsilon_adv)`.
///
/// Deviations are taken against a two-pass refined mean, so they (and the
/// advantages) are invariant under shifting every total by a constant, up
/// to a few ulps even when sigma is tiny.
pub fn group_advantages<F: Real>(
    totals: &[F],
    epsilon_adv: F,
) -> Result<(F, F, Vec<F>), RewardError> {
    if totals.is_empty() {
        return Err(RewardError::EmptyGroup);
    }
    let first = totals[0];
    if totals.iter().all(|t| *t == first) {
        return Ok((first, F::zero(), vec![F::zero(); totals.len()]));
    }
    let g = F::of_usize(totals.len());
    let mu_rough = totals.iter().fold(F::zero(), |acc, t| acc + *t) / g;
    let residual = totals
        .iter()
        .fold(F::zero(), |acc, t| acc + (*t - mu_rough))
        / g;
    let deviations: Vec<F> = totals.iter().map(|t| (*t - mu_rough) - residual).collect();
    let mu = mu_rough + residual;
    let var = deviations.iter().fold(F::zero(), |acc, d| acc + *d * *d) / g;
    let sigma = var.sqrt();
    let advantages = deviations
        .iter()
        .map(|d| *d / (sigma + epsilon_adv))
        .collect();
    Ok((mu, sigma, advantages))
}

/// Score one response against a truth label: parse, ground, combine.
#[allow(clippy::too_many_arguments)]
pub fn score_response<F: Real>(
    raw: &str,
    truth: &str,
    sets: &SupportSets,
    g: &FaceAttackGraph,
    verifier: &dyn VerifierClient,
    tags: &TagConfig,
    norm: &LabelNormalizer,
    weights: &RewardWeights<F>,
) -> Result<(RewardBreakdown<F>, GroundingReport), RewardError> {
    let parsed = ground::parse_response(raw, tags);
    let report = ground::ground(&parsed.think, g, Some(verifier), GroundMode::FallbackVerifier)?;
    let (r_match, r_conflict, _) = kg_reward(&report, sets, weights);
    let breakdown = RewardBreakdown::new(
        accuracy_reward(&parsed.answer, truth, norm),
        format_reward(&parsed),
        r_match,
        r_conflict,
        weights,
    );
    Ok((breakdown, report))
}

/// Score a sampled group of raw responses end to end and normalize within
/// the group.
pub fn score_group<F: Real>(
    raws: &[String],
    truth: &str,
    g: &FaceAttackGraph,
    verifier: &dyn VerifierClient,
    tags: &TagConfig,
    norm: &LabelNormalizer,
    weights: &RewardWeights<F>,
) -> Result<GroupScore<F>, RewardError> {
    if raws.is_empty() {
        return Err(RewardError::EmptyGroup);
    }
    let attack = g.attack_node_for_label(truth)?.clone();
    let sets = g.support_sets(attack.as_str(), ConflictPolicy::default())?;
    let mut breakdowns = Vec::with_capacity(raws.len());
    for raw in raws {
        let (b, _) = score_response(raw, truth, &sets, g, verifier, tags, norm, weights)?;
        breakdowns.push(b);
    }
    let totals: Vec<F> = breakdowns.iter().map(|b| b.total).collect();
    let (mu, sigma, advantages) = group_advantages(&totals, weights.epsilon_adv)?;
    Ok(GroupScore {
        breakdowns,
        mu,
        sigma,
        advantages,
    })
}

/// Reward configuration file: weights plus the answer synonym table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub lambda_acc: f64,
    pub lambda_fmt: f64,
    pub lambda_kg: f64,
    pub eta: f64,
    pub epsilon_den: f64,
    pub epsilon_adv: f64,
    pub synonyms: BTreeMap<String, String>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        let w = RewardWeights::<f64>::default();
        RewardConfig {
            lambda_acc: w.lambda_acc,
            lambda_fmt: w.lambda_fmt,
            lambda_kg: w.lambda_kg,
            eta: w.eta,
            epsilon_den: w.epsilon_den,
            epsilon_adv: w.epsilon_adv,
            synonyms: BTreeMap::new(),
        }
    }
}

impl RewardConfig {
    pub fn weights<F: Real>(&self) -> RewardWeights<F> {
        RewardWeights {
            lambda_acc: F::of(self.lambda_acc),
            lambda_fmt: F::of(self.lambda_fmt),
            lambda_kg: F::of(self.lambda_kg),
            eta: F::of(self.eta),
            epsilon_den: F::of(self.epsilon_den),
            epsilon_adv: F::of(self.epsilon_adv),
        }
    }

    pub fn normalizer(&self) -> LabelNormalizer {
        LabelNormalizer::new(self.synonyms.clone())
    }
}

/// One line of the group-scoring input file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupInput {
    pub truth: String,
    pub responses: Vec<String>,
}
