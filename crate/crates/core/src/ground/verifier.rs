//! Pluggable verifier for paraphrased or implicit relation mentions.
//!
//! The verifier only confirms or denies relations it is handed; it cannot
//! introduce relations of its own, so grounding stays closed-world no matter
//! how a remote model behaves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{FaceAttackGraph, RelationId};

/// One relation offered to the verifier, with display names for prompt
/// construction on the remote side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyCandidate {
    pub attack: String,
    pub predicate: String,
    pub feature: String,
    pub attack_name: String,
    pub feature_name: String,
}

/// Build wire candidates for a set of relations.
pub fn candidates_for(g: &FaceAttackGraph, ids: &[RelationId]) -> Vec<VerifyCandidate> {
    ids.iter()
        .map(|rid| {
            let r = g.relation(*rid);
            let attack_name = g
                .entity(r.attack.as_str())
                .map(|e| e.name.clone())
                .unwrap_or_else(|| r.attack.to_string());
            let feature_name = g
                .entity(r.feature.as_str())
                .map(|e| e.name.clone())
                .unwrap_or_else(|| r.feature.to_string());
            VerifyCandidate {
                attack: r.attack.to_string(),
                predicate: r.predicate.clone(),
                feature: r.feature.to_string(),
                attack_name,
                feature_name,
            }
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("verifier answered {got} candidates, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Answers one boolean per candidate, in order. Stub implementations are
/// deterministic; remote implementations must be treated as fallible and
/// non-deterministic by callers.
pub trait VerifierClient: Send + Sync {
    fn verify(
        &self,
        think: &str,
        candidates: &[VerifyCandidate],
    ) -> Result<Vec<bool>, VerifierError>;
}

/// Deterministic stub: confirms a candidate iff its predicate string appears
/// in the rationale (case-insensitive).
#[derive(Debug, Clone, Copy, Default)]
pub struct PredicateStub;

impl VerifierClient for PredicateStub {
    fn verify(
        &self,
        think: &str,
        candidates: &[VerifyCandidate],
    ) -> Result<Vec<bool>, VerifierError> {
        let haystack = think.to_lowercase();
        Ok(candidates
            .iter()
            .map(|c| haystack.contains(&c.predicate.to_lowercase()))
            .collect())
    }
}

/// Stub that answers the same boolean for every candidate.
#[derive(Debug, Clone, Copy)]
pub struct ConstStub(pub bool);

impl VerifierClient for ConstStub {
    fn verify(
        &self,
        _think: &str,
        candidates: &[VerifyCandidate],
    ) -> Result<Vec<bool>, VerifierError> {
        Ok(vec![self.0; candidates.len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicate_stub_is_case_insensitive() {
        let c = VerifyCandidate {
            attack: "replay".into(),
            predicate: "Exhibits".into(),
            feature: "moire_pattern".into(),
            attack_name: "Replay".into(),
            feature_name: "moire pattern".into(),
        };
        let stub = PredicateStub;
        assert_eq!(stub.verify("the image exhibits bands", &[c.clone()]).unwrap(), [true]);
        assert_eq!(stub.verify("nothing here", &[c]).unwrap(), [false]);
    }
}
