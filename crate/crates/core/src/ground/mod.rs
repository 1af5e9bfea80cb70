//! Response parsing and rationale grounding.
//!
//! `parse_response` splits raw generations into a rationale (think) segment
//! and an answer segment. `ground` projects rationale text onto the graph's
//! relation set: deterministic pattern matching first, optionally unioned
//! with confirmations from a [`VerifierClient`]. Grounded relations are
//! always a subset of the graph's relations.

pub mod remote;
mod verifier;

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{FaceAttackGraph, Relation, RelationId};

pub use verifier::{
    candidates_for, ConstStub, PredicateStub, VerifierClient, VerifierError, VerifyCandidate,
};

/// Literal delimiters around the rationale and answer segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagConfig {
    pub think_open: String,
    pub think_close: String,
    pub answer_open: String,
    pub answer_close: String,
}

impl Default for TagConfig {
    fn default() -> Self {
        TagConfig {
            think_open: "<think>".into(),
            think_close: "</think>".into(),
            answer_open: "<answer>".into(),
            answer_close: "</answer>".into(),
        }
    }
}

impl TagConfig {
    /// All four delimiters must be non-empty and pairwise distinct.
    pub fn validate(&self) -> Result<(), GroundError> {
        let tags = [
            &self.think_open,
            &self.think_close,
            &self.answer_open,
            &self.answer_close,
        ];
        for (i, a) in tags.iter().enumerate() {
            if a.is_empty() {
                return Err(GroundError::BadTagConfig(
                    "delimiters must be non-empty".into(),
                ));
            }
            if tags[i + 1..].contains(a) {
                return Err(GroundError::BadTagConfig(format!(
                    "delimiter {a:?} is not distinct"
                )));
            }
        }
        Ok(())
    }

    /// Render a (think, answer) pair into the canonical two-segment form.
    pub fn render(&self, think: &str, answer: &str) -> String {
        format!(
            "{}{}{}{}{}{}",
            self.think_open, think, self.think_close, self.answer_open, answer, self.answer_close
        )
    }
}

/// Outcome of splitting a raw response into segments. Total over all UTF-8
/// input: structural violations yield `format_valid = false` with
/// best-effort extractions, never an error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParsedResponse {
    pub think: String,
    pub answer: String,
    pub format_valid: bool,
    pub diagnostics: Vec<String>,
}

/// Split `raw` into think/answer segments using literal, first-occurrence
/// delimiter matching (no nesting). Valid iff the text is exactly one think
/// segment, then one answer segment, with only whitespace outside.
pub fn parse_response(raw: &str, tags: &TagConfig) -> ParsedResponse {
    let t_open = find_all(raw, &tags.think_open);
    let t_close = find_all(raw, &tags.think_close);
    let a_open = find_all(raw, &tags.answer_open);
    let a_close = find_all(raw, &tags.answer_close);

    let mut diagnostics = Vec::new();
    for (name, opens, closes) in [
        ("think", &t_open, &t_close),
        ("answer", &a_open, &a_close),
    ] {
        if opens.is_empty() || closes.is_empty() {
            diagnostics.push(format!("missing {name} segment"));
        }
        if opens.len() > 1 || closes.len() > 1 {
            diagnostics.push(format!("duplicate {name} delimiter"));
        }
    }

    let think = extract_first(raw, &t_open, &tags.think_open, &t_close);
    let answer = extract_first(raw, &a_open, &tags.answer_open, &a_close);

    let mut format_valid = t_open.len() == 1
        && t_close.len() == 1
        && a_open.len() == 1
        && a_close.len() == 1;
    if format_valid {
        let (to, tc, ao, ac) = (t_open[0], t_close[0], a_open[0], a_close[0]);
        let to_end = to + tags.think_open.len();
        let tc_end = tc + tags.think_close.len();
        let ao_end = ao + tags.answer_open.len();
        let ordered = to_end <= tc && tc_end <= ao && ao_end <= ac;
        if !ordered {
            diagnostics.push("segments out of order".into());
            format_valid = false;
        } else {
            let ac_end = ac + tags.answer_close.len();
            let outside_ws = raw[..to].trim().is_empty()
                && raw[tc_end..ao].trim().is_empty()
                && raw[ac_end..].trim().is_empty();
            if !outside_ws {
                diagnostics.push("unexpected text outside segments".into());
                format_valid = false;
            }
        }
    }

    ParsedResponse {
        think,
        answer,
        format_valid,
        diagnostics,
    }
}

fn find_all(haystack: &str, needle: &str) -> Vec<usize> {
    let mut out = Vec::new();
    if needle.is_empty() {
        return out;
    }
    let mut start = 0;
    while let Some(i) = haystack[start..].find(needle) {
        out.push(start + i);
        start += i + needle.len();
    }
    out
}

fn extract_first(raw: &str, opens: &[usize], open_tag: &str, closes: &[usize]) -> String {
    let Some(&open) = opens.first() else {
        return String::new();
    };
    let begin = open + open_tag.len();
    closes
        .iter()
        .find(|&&c| c >= begin)
        .map(|&c| raw[begin..c].to_string())
        .unwrap_or_default()
}

/// True iff any of the relation's patterns (or its generated fallback) finds
/// a match anywhere in `think`.
pub fn pattern_match(rel: &Relation, think: &str) -> bool {
    rel.matches(think)
}

/// Where a grounded relation's confirmation came from. Pattern provenance
/// wins when both sources match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchSource {
    Pattern,
    Verifier,
}

/// How the verifier participates in grounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroundMode {
    /// Patterns only; no verifier involvement.
    PatternOnly,
    /// Verifier sees only pattern-missed relations (bounds remote calls).
    #[default]
    FallbackVerifier,
    /// Verifier sees every relation; pattern provenance still wins.
    AlwaysVerifier,
}

/// The graph relations detected in one rationale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundingReport {
    /// Grounded relations with provenance, sorted by relation id, each
    /// relation at most once.
    pub grounded: Vec<(RelationId, MatchSource)>,
    /// Number of graph relations considered.
    pub candidates_checked: usize,
    /// Number of candidates submitted to the verifier.
    pub verifier_calls: usize,
}

impl GroundingReport {
    pub fn grounded_ids(&self) -> BTreeSet<RelationId> {
        self.grounded.iter().map(|(id, _)| *id).collect()
    }

    pub fn contains(&self, id: RelationId) -> bool {
        self.grounded.iter().any(|(rid, _)| *rid == id)
    }

    /// JSON projection with resolved triples, for tool output.
    pub fn to_json(&self, g: &FaceAttackGraph) -> serde_json::Value {
        serde_json::json!({
            "grounded": self.grounded.iter().map(|(rid, source)| {
                let r = g.relation(*rid);
                serde_json::json!({
                    "attack": r.attack.as_str(),
                    "predicate": r.predicate,
                    "feature": r.feature.as_str(),
                    "source": source,
                })
            }).collect::<Vec<_>>(),
            "candidates_checked": self.candidates_checked,
            "verifier_calls": self.verifier_calls,
        })
    }
}

#[derive(Debug, Error)]
pub enum GroundError {
    #[error("invalid tag configuration: {0}")]
    BadTagConfig(String),
    #[error("grounding mode requires a verifier client")]
    MissingVerifier,
    #[error("verifier failed over {} candidate(s): {message}", .candidates.len())]
    VerifierTransport {
        message: String,
        candidates: Vec<VerifyCandidate>,
    },
}

/// Project `think` onto the graph's relation space.
///
/// Pattern matches are collected for every relation; depending on `mode`,
/// the verifier confirms pattern misses (or everything). The union is
/// returned with per-relation provenance. Closed world: the result can only
/// contain relations of `g`.
pub fn ground(
    think: &str,
    g: &FaceAttackGraph,
    verifier: Option<&dyn VerifierClient>,
    mode: GroundMode,
) -> Result<GroundingReport, GroundError> {
    let mut grounded: BTreeMap<RelationId, MatchSource> = BTreeMap::new();
    let mut misses: Vec<RelationId> = Vec::new();
    for (i, rel) in g.relations().iter().enumerate() {
        if rel.matches(think) {
            grounded.insert(RelationId(i), MatchSource::Pattern);
        } else {
            misses.push(RelationId(i));
        }
    }

    let to_verify: Vec<RelationId> = match mode {
        GroundMode::PatternOnly => Vec::new(),
        GroundMode::FallbackVerifier => misses,
        GroundMode::AlwaysVerifier => g.relation_ids().collect(),
    };
    let verifier_calls = to_verify.len();

    if !to_verify.is_empty() {
        let verifier = verifier.ok_or(GroundError::MissingVerifier)?;
        let candidates = candidates_for(g, &to_verify);
        let answers = verifier.verify(think, &candidates).map_err(|e| {
            GroundError::VerifierTransport {
                message: e.to_string(),
                candidates: candidates.clone(),
            }
        })?;
        if answers.len() != to_verify.len() {
            return Err(GroundError::VerifierTransport {
                message: VerifierError::LengthMismatch {
                    expected: to_verify.len(),
                    got: answers.len(),
                }
                .to_string(),
                candidates,
            });
        }
        for (rid, yes) in to_verify.into_iter().zip(answers) {
            if yes {
                grounded.entry(rid).or_insert(MatchSource::Verifier);
            }
        }
    }

    Ok(GroundingReport {
        grounded: grounded.into_iter().collect(),
        candidates_checked: g.relations().len(),
        verifier_calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::toy;

    #[test]
    fn parse_canonical_response() {
        let p = parse_response(
            "<think>screen moire visible</think><answer>Replay</answer>",
            &TagConfig::default(),
        );
        assert!(p.format_valid);
        assert_eq!(p.think, "screen moire visible");
        assert_eq!(p.answer, "Replay");
        assert!(p.diagnostics.is_empty());
    }

    #[test]
    fn parse_missing_think_segment() {
        let p = parse_response("<answer>Print</answer>", &TagConfig::default());
        assert!(!p.format_valid);
        assert_eq!(p.answer, "Print");
        assert_eq!(p.think, "");
        assert!(p.diagnostics.iter().any(|d| d.contains("think")));
    }

    #[test]
    fn parse_duplicate_think_invalidates_but_extracts_first() {
        let p = parse_response(
            "<think>a</think><think>b</think><answer>x</answer>",
            &TagConfig::default(),
        );
        assert!(!p.format_valid);
        assert_eq!(p.think, "a");
        assert_eq!(p.answer, "x");
    }

    #[test]
    fn parse_allows_surrounding_whitespace_only() {
        let tags = TagConfig::default();
        let p = parse_response("  <think>a</think>\n<answer>b</answer>\n", &tags);
        assert!(p.format_valid);
        let p = parse_response("x<think>a</think><answer>b</answer>", &tags);
        assert!(!p.format_valid);
        let p = parse_response("<answer>b</answer><think>a</think>", &tags);
        assert!(!p.format_valid, "answer before think is out of order");
    }

    #[test]
    fn tag_config_validation() {
        assert!(TagConfig::default().validate().is_ok());
        let bad = TagConfig {
            think_open: "<t>".into(),
            think_close: "<t>".into(),
            answer_open: "<a>".into(),
            answer_close: "</a>".into(),
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pattern_match_examples() {
        let g = toy::four_node();
        let rel = &g.relations()[0]; // A1 shows f1, pattern "cue one"
        assert!(pattern_match(rel, "a faint cue one near the cheek"));
        assert!(!pattern_match(rel, ""));
    }

    #[test]
    fn ground_pattern_only_empty_think() {
        let g = toy::support();
        let report = ground("", &g, None, GroundMode::PatternOnly).unwrap();
        assert!(report.grounded.is_empty());
        assert_eq!(report.candidates_checked, 4);
        assert_eq!(report.verifier_calls, 0);
    }

    #[test]
    fn ground_pattern_hit_on_toy_graph() {
        let g = toy::support();
        // f_spec1's alias "moire" is covered by relation 1's fallback pattern.
        let report = ground("visible moire bands", &g, None, GroundMode::PatternOnly).unwrap();
        assert_eq!(
            report.grounded,
            vec![(RelationId(1), MatchSource::Pattern)]
        );
    }

    #[test]
    fn ground_fallback_verifier_confirms_predicate_mention() {
        let g = toy::support();
        // "reveals" is relation 1 and 3's predicate; mention relation 3's
        // feature not at all, so only the verifier can confirm it -- but the
        // predicate stub confirms every pattern-missed "reveals" relation.
        let stub = PredicateStub;
        let report = ground(
            "the sample reveals nothing else",
            &g,
            Some(&stub),
            GroundMode::FallbackVerifier,
        )
        .unwrap();
        let verifier_grounded: Vec<_> = report
            .grounded
            .iter()
            .filter(|(_, s)| *s == MatchSource::Verifier)
            .map(|(id, _)| *id)
            .collect();
        assert_eq!(verifier_grounded, vec![RelationId(1), RelationId(3)]);
        // Every pattern miss was submitted.
        assert_eq!(report.verifier_calls, 4);
    }

    #[test]
    fn ground_missing_verifier_is_an_error() {
        let g = toy::support();
        assert!(matches!(
            ground("x", &g, None, GroundMode::FallbackVerifier),
            Err(GroundError::MissingVerifier)
        ));
    }

    #[test]
    fn pattern_provenance_wins_in_always_mode() {
        let g = toy::support();
        let stub = ConstStub(true);
        let report = ground(
            "shared cue present",
            &g,
            Some(&stub),
            GroundMode::AlwaysVerifier,
        )
        .unwrap();
        // Relations 0 and 2 match by pattern; the rest are verifier-confirmed.
        let by_id: std::collections::BTreeMap<_, _> = report.grounded.iter().copied().collect();
        assert_eq!(by_id[&RelationId(0)], MatchSource::Pattern);
        assert_eq!(by_id[&RelationId(2)], MatchSource::Pattern);
        assert_eq!(by_id[&RelationId(1)], MatchSource::Verifier);
        assert_eq!(by_id[&RelationId(3)], MatchSource::Verifier);
        assert_eq!(report.verifier_calls, 4);
    }

    #[test]
    fn closed_world_even_with_always_yes_verifier() {
        let g = toy::support();
        let stub = ConstStub(true);
        let report = ground("anything", &g, Some(&stub), GroundMode::AlwaysVerifier).unwrap();
        assert!(report.grounded.len() <= g.relations().len());
        for (rid, _) in &report.grounded {
            assert!(rid.0 < g.relations().len());
        }
    }

    #[test]
    fn length_mismatch_is_transport_failure() {
        struct Short;
        impl VerifierClient for Short {
            fn verify(
                &self,
                _: &str,
                _: &[VerifyCandidate],
            ) -> Result<Vec<bool>, VerifierError> {
                Ok(vec![true])
            }
        }
        let g = toy::support();
        let err = ground("x", &g, Some(&Short), GroundMode::AlwaysVerifier).unwrap_err();
        match err {
            GroundError::VerifierTransport { candidates, .. } => {
                assert_eq!(candidates.len(), 4)
            }
            other => panic!("unexpected error: {other}"),
        }
    }
}
