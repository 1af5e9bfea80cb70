//! Pipeline invariants: provenance hashes recompute, the structural filter
//! is airtight under fuzzing, stats conserve, and runs are deterministic.

mod common;

use rand::prelude::*;
use rand::rngs::StdRng;

use fakg::graph::FaceAttackGraph;
use fakg::synth::{
    run_pipeline, structural_filter, CitedTriple, FilterToggles, ManifestEntry, PipelineConfig,
    PruneThresholds, Skeleton, StubClients,
};

fn manifest(n: usize) -> Vec<ManifestEntry> {
    let labels = [
        "Print",
        "Replay",
        "FaceSwap",
        "Attribute-Edit",
        "Video-Driven",
        "Adversarial",
        "Real Face",
    ];
    (0..n)
        .map(|i| ManifestEntry {
            sample_id: format!("s{i:03}"),
            image_ref: format!("images/s{i:03}.png"),
            label: labels[i % labels.len()].to_string(),
        })
        .collect()
}

#[test]
fn provenance_hash_recomputes_from_center_and_k() {
    let g = FaceAttackGraph::reference();
    let stub = StubClients::new(11);
    let cfg = PipelineConfig::default();
    let (corpus, _) = run_pipeline(&manifest(14), g, &cfg, &stub).unwrap();
    assert!(!corpus.is_empty());
    for record in &corpus {
        let sub = g
            .ego_subgraph(record.provenance.center.as_str(), record.provenance.k)
            .unwrap();
        assert_eq!(
            sub.content_hash(g),
            record.provenance.subgraph_hash,
            "hash mismatch for {}",
            record.sample_id
        );
    }
}

/// On-graph skeleton with every cited triple taken verbatim from the graph.
fn on_graph_skeleton(g: &FaceAttackGraph, rng: &mut StdRng) -> Skeleton {
    let count = rng.random_range(1..=4);
    let cited = (0..count)
        .map(|_| {
            let rid = rng.random_range(0..g.relations().len());
            let rel = &g.relations()[rid];
            CitedTriple {
                attack: g.entity(rel.attack.as_str()).unwrap().name.clone(),
                predicate: rel.predicate.clone(),
                feature: g.entity(rel.feature.as_str()).unwrap().name.clone(),
            }
        })
        .collect();
    Skeleton {
        question: "q".into(),
        reasoning_steps: vec![],
        cited_triples: cited,
    }
}

/// Corrupt one citation so the triple leaves the graph: swap the attack to
/// one that does not own the relation, invent a feature, or mangle the
/// predicate.
fn inject_off_graph(g: &FaceAttackGraph, skeleton: &mut Skeleton, rng: &mut StdRng) {
    let idx = rng.random_range(0..skeleton.cited_triples.len());
    let t = &mut skeleton.cited_triples[idx];
    match rng.random_range(0..3) {
        0 => {
            // Attack that has no relation with this predicate+feature.
            let feature = g.resolve_entity(&t.feature).unwrap().id.clone();
            let foreign = g
                .entities()
                .filter(|e| e.kind == fakg::graph::EntityKind::AttackType)
                .find(|a| g.find_relation(&a.id, &t.predicate, &feature).is_none());
            match foreign {
                Some(a) => t.attack = a.name.clone(),
                None => t.feature = "surface that is not in the graph".into(),
            }
        }
        1 => t.feature = "surface that is not in the graph".into(),
        _ => t.predicate = format!("{}-mangled", t.predicate),
    }
}

#[test]
fn structural_filter_is_airtight_under_fuzzing() {
    let g = FaceAttackGraph::reference();
    let mut rng = StdRng::seed_from_u64(616);
    for _ in 0..400 {
        let clean = on_graph_skeleton(g, &mut rng);
        assert!(
            structural_filter(&clean, g).is_pass(),
            "clean skeleton rejected: {:?}",
            clean.cited_triples
        );
        let mut corrupted = clean.clone();
        inject_off_graph(g, &mut corrupted, &mut rng);
        assert!(
            !structural_filter(&corrupted, g).is_pass(),
            "corrupted skeleton accepted: {:?}",
            corrupted.cited_triples
        );
    }
}

#[test]
fn stats_conserve_across_filter_configurations() {
    let g = FaceAttackGraph::reference();
    let mut rng = StdRng::seed_from_u64(747);
    for _ in 0..12 {
        let stub = StubClients::new(rng.random());
        let cfg = PipelineConfig {
            k: rng.random_range(1..=3),
            filters: FilterToggles {
                structural: rng.random_bool(0.7),
                fact_conflict: rng.random_bool(0.7),
                pruning: rng.random_bool(0.7),
            },
            thresholds: PruneThresholds {
                min_complexity: if rng.random_bool(0.5) { 0.3 } else { 0.0 },
                min_info: if rng.random_bool(0.5) { 0.4 } else { 0.0 },
            },
            ..PipelineConfig::default()
        };
        let mut entries = manifest(rng.random_range(1..=20));
        if rng.random_bool(0.5) {
            entries.push(ManifestEntry {
                sample_id: "zz-bad".into(),
                image_ref: "images/zz.png".into(),
                label: "Not A Label".into(),
            });
        }
        let (corpus, stats) = run_pipeline(&entries, g, &cfg, &stub).unwrap();
        assert!(stats.is_conserved(), "stats do not reconcile: {stats:?}");
        assert_eq!(stats.attempted, entries.len());
        assert_eq!(corpus.len(), stats.passed);
    }
}

#[test]
fn fifty_entry_run_is_deterministic() {
    let g = FaceAttackGraph::reference();
    let entries = manifest(50);
    let render = |seed: u64| {
        let stub = StubClients::new(seed);
        let cfg = PipelineConfig {
            seed,
            ..PipelineConfig::default()
        };
        let (corpus, stats) = run_pipeline(&entries, g, &cfg, &stub).unwrap();
        let lines: Vec<String> = corpus
            .iter()
            .map(|r| serde_json::to_string(r).unwrap())
            .collect();
        (lines.join("\n"), stats)
    };
    let (a, stats_a) = render(7);
    let (b, stats_b) = render(7);
    assert_eq!(a, b, "same-seed corpus must be byte-identical");
    assert_eq!(stats_a, stats_b);
    assert!(stats_a.is_conserved());
}
