//! Desk-scale, deterministic policy-optimization sandbox.
//!
//! A toy stochastic policy over a finite set of response templates is
//! trained with the full reward stack: sample a group, render and score the
//! responses, normalize rewards into group-relative advantages, and descend
//! the surrogate loss
//!
//! ```text
//! L = -(1/G) * sum_g A_g * log pi(t_g),    pi = softmax(theta / T)
//! ```
//!
//! with plain gradient steps. Reward scoring reuses the grounding and
//! reward modules unchanged, so reward-side regressions surface here as
//! learning-curve regressions. Runs are bit-reproducible from the seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::FaceAttackGraph;
use crate::ground::{PredicateStub, TagConfig};
use crate::num::Real;
use crate::reward::{self, LabelNormalizer, RewardError, RewardWeights};

/// One canned response: a rationale and an answer surface form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub id: usize,
    pub think: String,
    pub answer: String,
}

/// The bundled reference template set (truth label "Print").
pub const REFERENCE_TEMPLATES_JSON: &str = include_str!("../data/reference_templates.json");

/// Parse and validate a template file: ids must be dense `0..K-1`.
pub fn parse_templates(text: &str) -> Result<Vec<Template>, SandboxError> {
    let mut templates: Vec<Template> =
        serde_json::from_str(text).map_err(|e| SandboxError::BadTemplates(e.to_string()))?;
    if templates.is_empty() {
        return Err(SandboxError::BadTemplates("template set is empty".into()));
    }
    templates.sort_by_key(|t| t.id);
    for (i, t) in templates.iter().enumerate() {
        if t.id != i {
            return Err(SandboxError::BadTemplates(format!(
                "template ids must be dense 0..{}; found id {}",
                templates.len() - 1,
                t.id
            )));
        }
    }
    Ok(templates)
}

/// Softmax policy over template indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyPolicy<F> {
    pub logits: Vec<F>,
    pub temperature: F,
}

impl<F: Real> ToyPolicy<F> {
    /// Uniform policy (zero logits) over `k` templates.
    pub fn uniform(k: usize, temperature: F) -> Self {
        ToyPolicy {
            logits: vec![F::zero(); k],
            temperature,
        }
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    /// `softmax(logits / temperature)`, numerically stabilized.
    pub fn probabilities(&self) -> Vec<F> {
        let scaled: Vec<F> = self.logits.iter().map(|l| *l / self.temperature).collect();
        let max = scaled
            .iter()
            .copied()
            .fold(F::neg_infinity(), |a, b| a.max(b));
        let exps: Vec<F> = scaled.iter().map(|s| (*s - max).exp()).collect();
        let sum = exps.iter().fold(F::zero(), |a, b| a + *b);
        exps.into_iter().map(|e| e / sum).collect()
    }
}

/// `G` i.i.d. categorical draws from the policy.
pub fn sample_group<F: Real, R: Rng + ?Sized>(
    policy: &ToyPolicy<F>,
    group_size: usize,
    rng: &mut R,
) -> Vec<usize> {
    let probs = policy.probabilities();
    (0..group_size)
        .map(|_| {
            let u = F::of(rng.random::<f64>());
            let mut acc = F::zero();
            for (i, p) in probs.iter().enumerate() {
                acc += *p;
                if u < acc {
                    return i;
                }
            }
            probs.len() - 1
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("invalid template set: {0}")]
    BadTemplates(String),
    #[error("group and advantage lengths differ: {group} vs {advantages}")]
    LengthMismatch { group: usize, advantages: usize },
    #[error("sampled template id {id} is out of range (K = {k})")]
    TemplateOutOfRange { id: usize, k: usize },
    #[error("invalid train config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

fn check_group<F: Real>(
    policy: &ToyPolicy<F>,
    group: &[usize],
    advantages: &[F],
) -> Result<(), SandboxError> {
    if group.len() != advantages.len() {
        return Err(SandboxError::LengthMismatch {
            group: group.len(),
            advantages: advantages.len(),
        });
    }
    if let Some(&id) = group.iter().find(|&&id| id >= policy.len()) {
        return Err(SandboxError::TemplateOutOfRange {
            id,
            k: policy.len(),
        });
    }
    Ok(())
}

/// `-(1/G) * sum_g A_g * log pi(t_g)`, with advantages treated as constants.
pub fn surrogate_loss<F: Real>(
    policy: &ToyPolicy<F>,
    group: &[usize],
    advantages: &[F],
) -> Result<F, SandboxError> {
    check_group(policy, group, advantages)?;
    let probs = policy.probabilities();
    let g = F::of_usize(group.len());
    let sum = group
        .iter()
        .zip(advantages)
        .fold(F::zero(), |acc, (&t, &a)| acc + a * probs[t].ln());
    Ok(-sum / g)
}

/// Exact gradient of [`surrogate_loss`] with respect to the logits:
/// `dL/dtheta_j = -(1/(G*T)) * sum_g A_g * (1[t_g = j] - pi_j)`.
pub fn policy_gradient<F: Real>(
    policy: &ToyPolicy<F>,
    group: &[usize],
    advantages: &[F],
) -> Result<Vec<F>, SandboxError> {
    check_group(policy, group, advantages)?;
    let probs = policy.probabilities();
    let scale = F::of_usize(group.len()) * policy.temperature;
    let mut grad = vec![F::zero(); policy.len()];
    for (&t, &a) in group.iter().zip(advantages) {
        let coeff = a / scale;
        grad[t] -= coeff;
        for (g, p) in grad.iter_mut().zip(&probs) {
            *g += coeff * *p;
        }
    }
    Ok(grad)
}

/// Hyperparameters for one sandbox run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<F> {
    pub iterations: usize,
    pub group_size: usize,
    pub step_size: F,
    pub seed: u64,
    pub truth: String,
    pub weights: RewardWeights<F>,
    pub temperature: F,
}

impl<F: Real> TrainConfig<F> {
    pub fn new(truth: impl Into<String>) -> Self {
        TrainConfig {
            iterations: 200,
            group_size: 8,
            step_size: F::of(0.5),
            seed: 7,
            truth: truth.into(),
            weights: RewardWeights::default(),
            temperature: F::one(),
        }
    }

    pub fn validate(&self) -> Result<(), SandboxError> {
        if self.group_size == 0 {
            return Err(SandboxError::BadConfig("group_size must be >= 1".into()));
        }
        if !(self.step_size >= F::zero() && self.step_size.is_finite()) {
            return Err(SandboxError::BadConfig(
                "step_size must be finite and non-negative".into(),
            ));
        }
        if !(self.temperature > F::zero()) {
            return Err(SandboxError::BadConfig(
                "temperature must be positive".into(),
            ));
        }
        self.weights.validate()?;
        Ok(())
    }
}

/// Per-iteration trace record, captured before the parameter update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord<F> {
    pub iteration: usize,
    pub expected_total: F,
    pub expected_kg: F,
    pub grad_norm: F,
    pub sampled: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainTrace<F> {
    pub iterations: Vec<IterationRecord<F>>,
}

impl<F> Default for TrainTrace<F> {
    fn default() -> Self {
        TrainTrace {
            iterations: Vec::new(),
        }
    }
}

/// Initial/final expectations of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary<F> {
    pub iterations: usize,
    pub group_size: usize,
    pub seed: u64,
    pub truth: String,
    pub initial_expected_total: F,
    pub initial_expected_kg: F,
    pub final_expected_total: F,
    pub final_expected_kg: F,
}

pub struct TrainOutcome<F> {
    pub policy: ToyPolicy<F>,
    pub trace: TrainTrace<F>,
    pub summary: TrainSummary<F>,
}

fn expectation<F: Real>(probs: &[F], values: &[F]) -> F {
    probs
        .iter()
        .zip(values)
        .fold(F::zero(), |acc, (p, v)| acc + *p * *v)
}

/// Train the toy policy on one (truth, template-set) context.
///
/// Each iteration samples a group, scores the rendered responses through
/// the real grounding/reward stack (with the deterministic predicate-stub
/// verifier), and takes one gradient step on the surrogate loss.
pub fn train<F: Real>(
    g: &FaceAttackGraph,
    templates: &[Template],
    cfg: &TrainConfig<F>,
    tags: &TagConfig,
    norm: &LabelNormalizer,
) -> Result<TrainOutcome<F>, SandboxError> {
    cfg.validate()?;
    if templates.is_empty() {
        return Err(SandboxError::BadTemplates("template set is empty".into()));
    }
    let rendered: Vec<String> = templates
        .iter()
        .map(|t| tags.render(&t.think, &t.answer))
        .collect();

    // Per-template rewards are iteration-invariant; score them once for the
    // trace's expectation metrics.
    let per_template = reward::score_group::<F>(
        &rendered,
        &cfg.truth,
        g,
        &PredicateStub,
        tags,
        norm,
        &cfg.weights,
    )?;
    let totals: Vec<F> = per_template.breakdowns.iter().map(|b| b.total).collect();
    let kgs: Vec<F> = per_template.breakdowns.iter().map(|b| b.r_kg).collect();

    let mut policy = ToyPolicy::uniform(templates.len(), cfg.temperature);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = TrainTrace::default();

    let initial_probs = policy.probabilities();
    let initial_expected_total = expectation(&initial_probs, &totals);
    let initial_expected_kg = expectation(&initial_probs, &kgs);

    for iteration in 1..=cfg.iterations {
        let probs = policy.probabilities();
        let expected_total = expectation(&probs, &totals);
        let expected_kg = expectation(&probs, &kgs);

        let group = sample_group(&policy, cfg.group_size, &mut rng);
        let raws: Vec<String> = group.iter().map(|&t| rendered[t].clone()).collect();
        let score = reward::score_group::<F>(
            &raws,
            &cfg.truth,
            g,
            &PredicateStub,
            tags,
            norm,
            &cfg.weights,
        )?;
        let grad = policy_gradient(&policy, &group, &score.advantages)?;
        let grad_norm = grad.iter().fold(F::zero(), |acc, g| acc + *g * *g).sqrt();
        for (logit, g) in policy.logits.iter_mut().zip(&grad) {
            *logit = *logit - cfg.step_size * *g;
        }

        trace.iterations.push(IterationRecord {
            iteration,
            expected_total,
            expected_kg,
            grad_norm,
            sampled: group,
        });
    }

    let final_probs = policy.probabilities();
    let summary = TrainSummary {
        iterations: cfg.iterations,
        group_size: cfg.group_size,
        seed: cfg.seed,
        truth: cfg.truth.clone(),
        initial_expected_total,
        initial_expected_kg,
        final_expected_total: expectation(&final_probs, &totals),
        final_expected_kg: expectation(&final_probs, &kgs),
    };
    Ok(TrainOutcome {
        policy,
        trace,
        summary,
    })
}

/// Unicode sparkline of a value series, for quick terminal inspection.
pub fn sparkline<F: Real>(values: &[F]) -> String {
    const BARS: [char; 8] = ['▁', '▂', '▃', '▄', '▅', '▆', '▇', '█'];
    if values.is_empty() {
        return String::new();
    }
    let min = values.iter().copied().fold(F::infinity(), F::min);
    let max = values.iter().copied().fold(F::neg_infinity(), F::max);
    let span = (max - min).max(F::of(1e-12));
    values
        .iter()
        .map(|v| {
            let norm = ((*v - min) / span).as_f64();
            let idx = ((norm * 7.0).round() as usize).min(7);
            BARS[idx]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_templates() -> Vec<Template> {
        parse_templates(REFERENCE_TEMPLATES_JSON).unwrap()
    }

    fn reference_cfg() -> TrainConfig<f64> {
        TrainConfig::new("Print")
    }

    #[test]
    fn reference_templates_parse_dense() {
        let t = reference_templates();
        assert!(t.len() >= 4);
        for (i, tpl) in t.iter().enumerate() {
            assert_eq!(tpl.id, i);
        }
    }

    #[test]
    fn template_validation_rejects_gaps() {
        let text =
            r#"[{"id": 0, "think": "a", "answer": "x"}, {"id": 2, "think": "b", "answer": "y"}]"#;
        assert!(matches!(
            parse_templates(text),
            Err(SandboxError::BadTemplates(_))
        ));
        assert!(matches!(
            parse_templates("[]"),
            Err(SandboxError::BadTemplates(_))
        ));
    }

    #[test]
    fn probabilities_form_a_simplex() {
        let mut p = ToyPolicy::<f64>::uniform(5, 1.0);
        p.logits = vec![3.0, -2.0, 0.5, 10.0, -7.5];
        let probs = p.probabilities();
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(probs.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn sample_group_dominant_logit() {
        let mut p = ToyPolicy::<f64>::uniform(4, 1.0);
        p.logits[2] = 50.0;
        // p_2 > 1 - 1e-20, so 64 draws land on 2 with probability > 1 - 1e-9.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let group = sample_group(&p, 64, &mut rng);
        assert!(group.iter().all(|&t| t == 2));
    }

    #[test]
    fn sample_group_uniform_frequencies() {
        let p = ToyPolicy::<f64>::uniform(4, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let group = sample_group(&p, 10_000, &mut rng);
        let mut counts = [0usize; 4];
        for t in group {
            counts[t] += 1;
        }
        // 3 sigma around n*p for p = 1/4.
        let sigma = (10_000.0f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - 2500.0).abs() < 3.0 * sigma, "count {c}");
        }
    }

    #[test]
    fn sample_group_single_template() {
        let p = ToyPolicy::<f64>::uniform(1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_group(&p, 5, &mut rng), vec![0, 0, 0, 0, 0]);
    }

    #[test]
    fn surrogate_loss_examples() {
        let p = ToyPolicy::<f64>::uniform(2, 1.0);
        // All advantages zero.
        assert_eq!(surrogate_loss(&p, &[0, 1], &[0.0, 0.0]).unwrap(), 0.0);
        // Single sample, A = 1, pi = 0.5: loss = -ln 0.5.
        let loss = surrogate_loss(&p, &[0], &[1.0]).unwrap();
        assert!((loss - (-0.5f64.ln())).abs() < 1e-12);
        // Negating advantages negates the loss.
        let l1 = surrogate_loss(&p, &[0, 1], &[1.0, -0.5]).unwrap();
        let l2 = surrogate_loss(&p, &[0, 1], &[-1.0, 0.5]).unwrap();
        assert!((l1 + l2).abs() < 1e-12);
        // Length mismatch is an error.
        assert!(matches!(
            surrogate_loss(&p, &[0], &[1.0, 2.0]),
            Err(SandboxError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn gradient_zero_for_zero_advantages() {
        let p = ToyPolicy::<f64>::uniform(3, 1.0);
        let grad = policy_gradient(&p, &[0, 1, 2], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(grad, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn gradient_uniform_single_sample_closed_form() {
        for k in [2usize, 4, 7] {
            for temp in [1.0f64, 2.0] {
                let p = ToyPolicy::uniform(k, temp);
                let grad = policy_gradient(&p, &[0], &[1.0]).unwrap();
                let expect_sampled = -(1.0 - 1.0 / k as f64) / temp;
                let expect_other = (1.0 / k as f64) / temp;
                assert!((grad[0] - expect_sampled).abs() < 1e-12);
                for &g in &grad[1..] {
                    assert!((g - expect_other).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..25 {
            let k = rng.random_range(2..6);
            let mut p = ToyPolicy::<f64>::uniform(k, 0.5 + rng.random::<f64>());
            for l in p.logits.iter_mut() {
                *l = rng.random::<f64>() * 4.0 - 2.0;
            }
            let g_size = rng.random_range(1..5);
            let group: Vec<usize> = (0..g_size).map(|_| rng.random_range(0..k)).collect();
            let adv: Vec<f64> = (0..g_size)
                .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                .collect();
            let grad = policy_gradient(&p, &group, &adv).unwrap();
            let h = 1e-5;
            for j in 0..k {
                let mut plus = p.clone();
                plus.logits[j] += h;
                let mut minus = p.clone();
                minus.logits[j] -= h;
                let fd = (surrogate_loss(&plus, &group, &adv).unwrap()
                    - surrogate_loss(&minus, &group, &adv).unwrap())
                    / (2.0 * h);
                let denom = grad[j].abs().max(fd.abs()).max(1e-8);
                assert!(
                    ((grad[j] - fd) / denom).abs() < 1e-4,
                    "component {j}: analytic {} vs fd {fd}",
                    grad[j]
                );
            }
        }
    }

    #[test]
    fn train_reference_run_improves_kg() {
        let g = FaceAttackGraph::reference();
        let templates = reference_templates();
        let cfg = reference_cfg();
        let outcome = train(
            g,
            &templates,
            &cfg,
            &TagConfig::default(),
            &LabelNormalizer::default(),
        )
        .unwrap();
        assert_eq!(outcome.trace.iterations.len(), 200);
        let first = &outcome.trace.iterations[0];
        let last = &outcome.trace.iterations[199];
        // Margins pinned from the reference run: uniform start at
        // expected_kg 0.24, converged near 0.9965 (gain ~0.7565).
        assert!((first.expected_kg - 0.24).abs() < 1e-6);
        assert!(
            last.expected_kg - first.expected_kg >= 0.7,
            "kg improvement {} -> {}",
            first.expected_kg,
            last.expected_kg
        );
        // Mean total over the last 10 iterations beats the first 10.
        let mean = |recs: &[IterationRecord<f64>]| {
            recs.iter().map(|r| r.expected_total).sum::<f64>() / recs.len() as f64
        };
        assert!(mean(&outcome.trace.iterations[190..]) >= mean(&outcome.trace.iterations[..10]));
        // Simplex preserved after the full run.
        let sum: f64 = outcome.policy.probabilities().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn train_is_bit_reproducible() {
        let g = FaceAttackGraph::reference();
        let templates = reference_templates();
        let cfg = reference_cfg();
        let tags = TagConfig::default();
        let norm = LabelNormalizer::default();
        let a = train(g, &templates, &cfg, &tags, &norm).unwrap();
        let b = train(g, &templates, &cfg, &tags, &norm).unwrap();
        assert_eq!(
            serde_json::to_string(&a.trace).unwrap(),
            serde_json::to_string(&b.trace).unwrap()
        );
        assert_eq!(a.policy.logits, b.policy.logits);
        let c = train(
            g,
            &templates,
            &TrainConfig {
                seed: 8,
                ..cfg.clone()
            },
            &tags,
            &norm,
        )
        .unwrap();
        assert_ne!(
            serde_json::to_string(&a.trace).unwrap(),
            serde_json::to_string(&c.trace).unwrap()
        );
    }

    #[test]
    fn identical_templates_are_a_fixed_point() {
        let g = FaceAttackGraph::reference();
        let t = Template {
            id: 0,
            think: "a faint lattice pattern".into(),
            answer: "Print".into(),
        };
        let templates: Vec<Template> = (0..3).map(|id| Template { id, ..t.clone() }).collect();
        let cfg = TrainConfig::<f64> {
            iterations: 20,
            ..reference_cfg()
        };
        let outcome = train(
            g,
            &templates,
            &cfg,
            &TagConfig::default(),
            &LabelNormalizer::default(),
        )
        .unwrap();
        assert_eq!(outcome.policy.logits, vec![0.0, 0.0, 0.0]);
        assert!(outcome.trace.iterations.iter().all(|r| r.grad_norm == 0.0));
    }

    #[test]
    fn zero_step_size_keeps_policy_but_records_trace() {
        let g = FaceAttackGraph::reference();
        let templates = reference_templates();
        let cfg = TrainConfig::<f64> {
            step_size: 0.0,
            iterations: 5,
            ..reference_cfg()
        };
        let outcome = train(
            g,
            &templates,
            &cfg,
            &TagConfig::default(),
            &LabelNormalizer::default(),
        )
        .unwrap();
        assert_eq!(outcome.trace.iterations.len(), 5);
        assert!(outcome.policy.logits.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn zero_iterations_yields_empty_trace() {
        let g = FaceAttackGraph::reference();
        let templates = reference_templates();
        let cfg = TrainConfig::<f64> {
            iterations: 0,
            ..reference_cfg()
        };
        let outcome = train(
            g,
            &templates,
            &cfg,
            &TagConfig::default(),
            &LabelNormalizer::default(),
        )
        .unwrap();
        assert!(outcome.trace.iterations.is_empty());
        assert_eq!(
            outcome.summary.initial_expected_total,
            outcome.summary.final_expected_total
        );
    }

    #[test]
    fn unknown_truth_label_is_an_error() {
        let g = FaceAttackGraph::reference();
        let templates = reference_templates();
        let cfg = TrainConfig::<f64>::new("3D-Mask");
        assert!(matches!(
            train(
                g,
                &templates,
                &cfg,
                &TagConfig::default(),
                &LabelNormalizer::default()
            ),
            Err(SandboxError::Reward(_))
        ));
    }

    #[test]
    fn train_at_f32() {
        let g = FaceAttackGraph::reference();
        let templates = reference_templates();
        let cfg = TrainConfig::<f32> {
            iterations: 50,
            group_size: 8,
            step_size: 0.5,
            seed: 7,
            truth: "Print".into(),
            weights: RewardWeights::default(),
            temperature: 1.0,
        };
        let outcome = train(
            g,
            &templates,
            &cfg,
            &TagConfig::default(),
            &LabelNormalizer::default(),
        )
        .unwrap();
        assert_eq!(outcome.trace.iterations.len(), 50);
        let sum: f32 = outcome.policy.probabilities().iter().sum();
        assert!((sum - 1.0).abs() < 1e-5);
    }

    #[test]
    fn sparkline_spans_range() {
        let s = sparkline(&[0.0f64, 0.5, 1.0]);
        assert_eq!(s.chars().count(), 3);
        assert!(s.starts_with('▁'));
        assert!(s.ends_with('█'));
    }
}
