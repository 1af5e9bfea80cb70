//! Three-protocol evaluation of fine-grained predictions.
//!
//! Predictions are ingested at fine granularity and coarsened into the
//! protocol's label space. Per-category ACC is recall; FAR pools every
//! non-category record as the negative class (one-vs-rest); HTER is
//! `(FAR + FRR) / 2` with `FRR = 1 - ACC`. Totals weight each category by
//! its support, which makes the total ACC equal overall accuracy.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Real;

/// The seven fine-grained labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FineLabel {
    RealFace,
    Print,
    Replay,
    FaceSwap,
    AttributeEdit,
    VideoDriven,
    Adversarial,
}

impl FineLabel {
    pub const ALL: [FineLabel; 7] = [
        FineLabel::RealFace,
        FineLabel::Print,
        FineLabel::Replay,
        FineLabel::FaceSwap,
        FineLabel::AttributeEdit,
        FineLabel::VideoDriven,
        FineLabel::Adversarial,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FineLabel::RealFace => "Real Face",
            FineLabel::Print => "Print",
            FineLabel::Replay => "Replay",
            FineLabel::FaceSwap => "FaceSwap",
            FineLabel::AttributeEdit => "Attribute-Edit",
            FineLabel::VideoDriven => "Video-Driven",
            FineLabel::Adversarial => "Adversarial",
        }
    }

    /// Case-, whitespace-, and punctuation-insensitive parse of a label
    /// surface form.
    pub fn parse(s: &str) -> Option<FineLabel> {
        let key = squash(s);
        Self::ALL.into_iter().find(|l| squash(l.as_str()) == key)
    }
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

impl TryFrom<String> for FineLabel {
    type Error = String;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        FineLabel::parse(&value).ok_or_else(|| format!("unknown fine-grained label: {value:?}"))
    }
}

impl From<FineLabel> for String {
    fn from(value: FineLabel) -> Self {
        value.as_str().to_string()
    }
}

impl std::fmt::Display for FineLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Evaluation protocol selecting the label space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    /// Binary: Real Face vs. Attack.
    P1,
    /// Coarse: Real Face, Physical, Digital.
    P2,
    /// Fine-grained: the seven fine labels.
    P3,
}

impl Protocol {
    pub fn categories(self) -> &'static [Category] {
        match self {
            Protocol::P1 => &[Category::RealFace, Category::Attack],
            Protocol::P2 => &[Category::RealFace, Category::Physical, Category::Digital],
            Protocol::P3 => &[
                Category::RealFace,
                Category::Print,
                Category::Replay,
                Category::FaceSwap,
                Category::AttributeEdit,
                Category::VideoDriven,
                Category::Adversarial,
            ],
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::P1 => "P1",
            Protocol::P2 => "P2",
            Protocol::P3 => "P3",
        })
    }
}

/// A label in some protocol's space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Category {
    RealFace,
    Attack,
    Physical,
    Digital,
    Print,
    Replay,
    FaceSwap,
    AttributeEdit,
    VideoDriven,
    Adversarial,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::RealFace => "Real Face",
            Category::Attack => "Attack",
            Category::Physical => "Physical",
            Category::Digital => "Digital",
            Category::Print => "Print",
            Category::Replay => "Replay",
            Category::FaceSwap => "FaceSwap",
            Category::AttributeEdit => "Attribute-Edit",
            Category::VideoDriven => "Video-Driven",
            Category::Adversarial => "Adversarial",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        const ALL: [Category; 10] = [
            Category::RealFace,
            Category::Attack,
            Category::Physical,
            Category::Digital,
            Category::Print,
            Category::Replay,
            Category::FaceSwap,
            Category::AttributeEdit,
            Category::VideoDriven,
            Category::Adversarial,
        ];
        let key = squash(s);
        ALL.into_iter().find(|c| squash(c.as_str()) == key)
    }
}

impl TryFrom<String> for Category {
    type Error = String;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Category::parse(&value).ok_or_else(|| format!("unknown category: {value:?}"))
    }
}

impl From<Category> for String {
    fn from(value: Category) -> Self {
        value.as_str().to_string()
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Map a fine label into a protocol's space. Physical covers Print and
/// Replay; every other attack type is Digital.
pub fn coarsen(label: FineLabel, p: Protocol) -> Category {
    match p {
        Protocol::P1 => match label {
            FineLabel::RealFace => Category::RealFace,
            _ => Category::Attack,
        },
        Protocol::P2 => match label {
            FineLabel::RealFace => Category::RealFace,
            FineLabel::Print | FineLabel::Replay => Category::Physical,
            _ => Category::Digital,
        },
        Protocol::P3 => match label {
            FineLabel::RealFace => Category::RealFace,
            FineLabel::Print => Category::Print,
            FineLabel::Replay => Category::Replay,
            FineLabel::FaceSwap => Category::FaceSwap,
            FineLabel::AttributeEdit => Category::AttributeEdit,
            FineLabel::VideoDriven => Category::VideoDriven,
            FineLabel::Adversarial => Category::Adversarial,
        },
    }
}

/// One prediction at fine granularity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub truth: FineLabel,
    pub predicted: FineLabel,
}

/// Escape hatch for systems that only emit protocol-level outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseRecord {
    pub sample_id: String,
    pub truth: Category,
    pub predicted: Category,
}

/// One-vs-rest rates for a protocol category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryMetrics<F> {
    pub category: Category,
    pub support: usize,
    pub acc: F,
    pub far: F,
    pub frr: F,
    pub hter: F,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// The standard binary FAR/FRR/HTER triple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryRates<F> {
    pub far: F,
    pub frr: F,
    pub hter: F,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub diagnostics: Vec<String>,
}

/// Per-category metrics plus support-weighted totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport<F> {
    pub protocol: Protocol,
    pub categories: Vec<CategoryMetrics<F>>,
    pub total_acc: F,
    pub total_hter: F,
    pub total_support: usize,
    /// Standard binary rates, carried for P1 only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binary: Option<BinaryRates<F>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot evaluate an empty record set")]
    EmptyInput,
    #[error("category {category} is not in protocol {protocol}'s label space")]
    UnknownCategory {
        category: Category,
        protocol: Protocol,
    },
}

fn ratio<F: Real>(num: usize, den: usize) -> F {
    F::of_usize(num) / F::of_usize(den)
}

/// Binary FAR/FRR/HTER over fine records coarsened to the P1 space.
/// An absent class reports its rate as 0 with a diagnostic.
pub fn binary_hter<F: Real>(records: &[PredictionRecord]) -> Result<BinaryRates<F>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut diagnostics = Vec::new();
    let mut reals = 0usize;
    let mut attacks = 0usize;
    let mut false_rejects = 0usize;
    let mut false_accepts = 0usize;
    for r in records {
        let truth = coarsen(r.truth, Protocol::P1);
        let predicted = coarsen(r.predicted, Protocol::P1);
        if truth == Category::RealFace {
            reals += 1;
            if predicted != Category::RealFace {
                false_rejects += 1;
            }
        } else {
            attacks += 1;
            if predicted == Category::RealFace {
                false_accepts += 1;
            }
        }
    }
    let far = if attacks == 0 {
        diagnostics.push("no true attack samples: FAR reported as 0".into());
        F::zero()
    } else {
        ratio(false_accepts, attacks)
    };
    let frr = if reals == 0 {
        diagnostics.push("no true real samples: FRR reported as 0".into());
        F::zero()
    } else {
        ratio(false_rejects, reals)
    };
    let hter = (far + frr) / F::of(2.0);
    Ok(BinaryRates {
        far,
        frr,
        hter,
        diagnostics,
    })
}

fn category_metrics_coarse<F: Real>(
    pairs: &[(Category, Category)],
    category: Category,
) -> CategoryMetrics<F> {
    let mut support = 0usize;
    let mut correct = 0usize;
    let mut false_accepts = 0usize;
    for (truth, predicted) in pairs {
        if *truth == category {
            support += 1;
            if *predicted == category {
                correct += 1;
            }
        } else if *predicted == category {
            false_accepts += 1;
        }
    }
    let negatives = pairs.len() - support;
    let mut diagnostic = None;
    let acc = if support == 0 {
        diagnostic = Some("zero support: ACC reported as 0".into());
        F::zero()
    } else {
        ratio(correct, support)
    };
    let far = if negatives == 0 {
        diagnostic = Some("no negative samples: FAR reported as 0".into());
        F::zero()
    } else {
        ratio(false_accepts, negatives)
    };
    let frr = F::one() - acc;
    let hter = (far + frr) / F::of(2.0);
    CategoryMetrics {
        category,
        support,
        acc,
        far,
        frr,
        hter,
        diagnostic,
    }
}

/// One-vs-rest metrics for one protocol category.
pub fn category_metrics<F: Real>(
    records: &[PredictionRecord],
    p: Protocol,
    category: Category,
) -> Result<CategoryMetrics<F>, EvalError> {
    if !p.categories().contains(&category) {
        return Err(EvalError::UnknownCategory {
            category,
            protocol: p,
        });
    }
    let pairs: Vec<(Category, Category)> = records
        .iter()
        .map(|r| (coarsen(r.truth, p), coarsen(r.predicted, p)))
        .collect();
    Ok(category_metrics_coarse(&pairs, category))
}

fn report_from_pairs<F: Real>(
    pairs: &[(Category, Category)],
    p: Protocol,
) -> Result<EvalReport<F>, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let categories: Vec<CategoryMetrics<F>> = p
        .categories()
        .iter()
        .map(|c| category_metrics_coarse(pairs, *c))
        .collect();
    let total_support = pairs.len();
    let weight_sum = F::of_usize(total_support);
    let total_acc = categories
        .iter()
        .fold(F::zero(), |acc, c| acc + F::of_usize(c.support) * c.acc)
        / weight_sum;
    let total_hter = categories
        .iter()
        .fold(F::zero(), |acc, c| acc + F::of_usize(c.support) * c.hter)
        / weight_sum;
    let diagnostics = categories
        .iter()
        .filter_map(|c| {
            c.diagnostic
                .as_ref()
                .map(|d| format!("{}: {d}", c.category))
        })
        .collect();
    Ok(EvalReport {
        protocol: p,
        categories,
        total_acc,
        total_hter,
        total_support,
        binary: None,
        diagnostics,
    })
}

/// Evaluate fine-grained records under a protocol: per-category one-vs-rest
/// metrics plus support-weighted totals. P1 reports additionally carry
/// the standard binary FAR/FRR/HTER triple.
pub fn evaluate<F: Real>(
    records: &[PredictionRecord],
    p: Protocol,
) -> Result<EvalReport<F>, EvalError> {
    let pairs: Vec<(Category, Category)> = records
        .iter()
        .map(|r| (coarsen(r.truth, p), coarsen(r.predicted, p)))
        .collect();
    let mut report = report_from_pairs(&pairs, p)?;
    if p == Protocol::P1 {
        let binary = binary_hter(records)?;
        report
            .diagnostics
            .extend(binary.diagnostics.iter().map(|d| format!("binary: {d}")));
        report.binary = Some(binary);
    }
    Ok(report)
}

/// Evaluate pre-coarsened records whose labels already live in `p`'s space.
pub fn evaluate_coarse<F: Real>(
    records: &[CoarseRecord],
    p: Protocol,
) -> Result<EvalReport<F>, EvalError> {
    let space = p.categories();
    let mut pairs = Vec::with_capacity(records.len());
    for r in records {
        for side in [r.truth, r.predicted] {
            if !space.contains(&side) {
                return Err(EvalError::UnknownCategory {
                    category: side,
                    protocol: p,
                });
            }
        }
        pairs.push((r.truth, r.predicted));
    }
    report_from_pairs(&pairs, p)
}

impl<F: Real> EvalReport<F> {
    /// Aligned plain-text table with one-decimal percentages.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>7} {:>7} {:>7} {:>7} {:>9}",
            format!("Protocol {}", self.protocol),
            "ACC",
            "FAR",
            "FRR",
            "HTER",
            "Support"
        );
        for c in &self.categories {
            let _ = writeln!(
                out,
                "{:<16} {:>7.1} {:>7.1} {:>7.1} {:>7.1} {:>9}",
                c.category.as_str(),
                c.acc.as_f64() * 100.0,
                c.far.as_f64() * 100.0,
                c.frr.as_f64() * 100.0,
                c.hter.as_f64() * 100.0,
                c.support
            );
        }
        let _ = writeln!(
            out,
            "{:<16} {:>7.1} {:>7} {:>7} {:>7.1} {:>9}",
            "#Total",
            self.total_acc.as_f64() * 100.0,
            "-",
            "-",
            self.total_hter.as_f64() * 100.0,
            self.total_support
        );
        if let Some(b) = &self.binary {
            let _ = writeln!(
                out,
                "Binary           FAR {:>5.1}  FRR {:>5.1}  HTER {:>5.1}",
                b.far.as_f64() * 100.0,
                b.frr.as_f64() * 100.0,
                b.hter.as_f64() * 100.0
            );
        }
        out
    }
}
