//! Grounding invariants: totality of parsing, closed-world grounding,
//! determinism, mode ordering, and append monotonicity.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::prelude::*;
use rand::rngs::StdRng;

use fakg::graph::FaceAttackGraph;
use fakg::ground::{ground, parse_response, ConstStub, GroundMode, PredicateStub, TagConfig};

proptest! {
    // parse_response is total: any UTF-8 input yields a result whose
    // extractions are substrings and whose validity implies both segments.
    #[test]
    fn parse_response_is_total(raw in ".{0,200}") {
        let tags = TagConfig::default();
        let parsed = parse_response(&raw, &tags);
        if parsed.format_valid {
            prop_assert!(raw.contains(&tags.think_open));
            prop_assert!(raw.contains(&tags.answer_close));
            prop_assert!(parsed.diagnostics.is_empty());
        }
        prop_assert!(raw.contains(&parsed.think) || parsed.think.is_empty());
        prop_assert!(raw.contains(&parsed.answer) || parsed.answer.is_empty());
    }

    #[test]
    fn render_then_parse_round_trips(think in "[^<>]{0,60}", answer in "[^<>]{0,30}") {
        let tags = TagConfig::default();
        let raw = tags.render(&think, &answer);
        let parsed = parse_response(&raw, &tags);
        prop_assert!(parsed.format_valid);
        prop_assert_eq!(parsed.think, think);
        prop_assert_eq!(parsed.answer, answer);
    }
}

#[test]
fn closed_world_under_arbitrary_verifier_answers() {
    let g = FaceAttackGraph::reference();
    let surfaces: Vec<String> = g
        .entities()
        .flat_map(|e| e.surface_forms().map(str::to_string).collect::<Vec<_>>())
        .collect();
    let mut rng = StdRng::seed_from_u64(77);
    let relation_count = g.relations().len();
    for _ in 0..500 {
        let think = common::random_rationale(&mut rng, &surfaces);
        for (mode, verifier) in [
            (GroundMode::PatternOnly, None),
            (GroundMode::FallbackVerifier, Some(&ConstStub(true))),
            (GroundMode::AlwaysVerifier, Some(&ConstStub(true))),
        ] {
            let report = ground(&think, g, verifier.map(|v| v as _), mode).unwrap();
            assert!(report.grounded.len() <= relation_count);
            for (rid, _) in &report.grounded {
                assert!(rid.0 < relation_count, "grounded outside the relation set");
            }
            assert_eq!(report.candidates_checked, relation_count);
        }
    }
}

#[test]
fn pattern_mode_is_deterministic() {
    let g = FaceAttackGraph::reference();
    let surfaces: Vec<String> = g
        .entities()
        .flat_map(|e| e.surface_forms().map(str::to_string).collect::<Vec<_>>())
        .collect();
    let mut rng = StdRng::seed_from_u64(99);
    for _ in 0..200 {
        let think = common::random_rationale(&mut rng, &surfaces);
        let a = ground(&think, g, None, GroundMode::PatternOnly).unwrap();
        let b = ground(&think, g, None, GroundMode::PatternOnly).unwrap();
        assert_eq!(a, b);
        let c = ground(&think, g, Some(&PredicateStub), GroundMode::FallbackVerifier).unwrap();
        let d = ground(&think, g, Some(&PredicateStub), GroundMode::FallbackVerifier).unwrap();
        assert_eq!(c, d);
    }
}

#[test]
fn mode_ordering_with_additive_stub() {
    let g = FaceAttackGraph::reference();
    let surfaces: Vec<String> = g
        .entities()
        .flat_map(|e| e.surface_forms().map(str::to_string).collect::<Vec<_>>())
        .collect();
    let mut rng = StdRng::seed_from_u64(123);
    for _ in 0..200 {
        let think = common::random_rationale(&mut rng, &surfaces);
        let pattern: BTreeSet<_> = ground(&think, g, None, GroundMode::PatternOnly)
            .unwrap()
            .grounded_ids();
        let fallback: BTreeSet<_> =
            ground(&think, g, Some(&PredicateStub), GroundMode::FallbackVerifier)
                .unwrap()
                .grounded_ids();
        let always: BTreeSet<_> =
            ground(&think, g, Some(&PredicateStub), GroundMode::AlwaysVerifier)
                .unwrap()
                .grounded_ids();
        assert!(pattern.is_subset(&fallback));
        assert!(fallback.is_subset(&always));
    }
}

#[test]
fn appending_text_never_removes_pattern_matches() {
    let g = FaceAttackGraph::reference();
    let surfaces: Vec<String> = g
        .entities()
        .flat_map(|e| e.surface_forms().map(str::to_string).collect::<Vec<_>>())
        .collect();
    let mut rng = StdRng::seed_from_u64(321);
    for _ in 0..200 {
        let think = common::random_rationale(&mut rng, &surfaces);
        let before = ground(&think, g, None, GroundMode::PatternOnly)
            .unwrap()
            .grounded_ids();
        // Appended text starts at a word boundary, as any continuation of a
        // rationale does.
        let suffix = format!(" {}", common::random_rationale(&mut rng, &surfaces));
        let extended = format!("{think}{suffix}");
        let after = ground(&extended, g, None, GroundMode::PatternOnly)
            .unwrap()
            .grounded_ids();
        assert!(
            before.is_subset(&after),
            "append removed a match: {think:?} + {suffix:?}"
        );
    }
}
