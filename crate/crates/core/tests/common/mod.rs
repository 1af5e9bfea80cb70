//! Shared test oracles and random input generators.
//!
//! Every oracle here recomputes its answer from first principles over plain
//! data (documents, label pairs, index sets), independent of the library's
//! implementation paths.

// Each integration test binary uses its own subset of these helpers.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::prelude::*;
use rand::rngs::StdRng;

use fakg::eval::Category;
use fakg::graph::{EntityDoc, GraphDocument, KindDoc, RelationDoc, ScopeDoc};

/// Ego-subgraph oracle: undirected distances by fixpoint relaxation over the
/// document's edge list, then the induced edge filter.
pub fn oracle_ego(
    doc: &GraphDocument,
    center: &str,
    k: usize,
) -> (BTreeSet<String>, Vec<(String, String, String)>) {
    let ids: Vec<&str> = doc.entities.iter().map(|e| e.id.as_str()).collect();
    let mut dist: HashMap<&str, usize> = HashMap::new();
    dist.insert(center, 0);
    // Relax every edge until no distance changes (Bellman-Ford style).
    loop {
        let mut changed = false;
        for r in &doc.relations {
            let a = r.attack.as_str();
            let f = r.feature.as_str();
            for (u, v) in [(a, f), (f, a)] {
                if let Some(&du) = dist.get(u) {
                    let candidate = du + 1;
                    if dist.get(v).map_or(true, |&dv| candidate < dv) {
                        dist.insert(v, candidate);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let nodes: BTreeSet<String> = ids
        .iter()
        .filter(|id| dist.get(**id).is_some_and(|&d| d <= k))
        .map(|id| id.to_string())
        .collect();
    let edges = doc
        .relations
        .iter()
        .filter(|r| nodes.contains(&r.attack) && nodes.contains(&r.feature))
        .map(|r| (r.attack.clone(), r.predicate.clone(), r.feature.clone()))
        .collect();
    (nodes, edges)
}

const PREDICATES: [&str; 5] = ["shows", "hides", "implies", "lacks", "warps"];
const PATTERN_POOL: [&str; 6] = [
    "alpha cue",
    "beta streak",
    "gamma band",
    "delta ridge",
    "epsilon halo",
    "zeta fringe",
];

/// Random bipartite graph document with up to `max_nodes` entities,
/// satisfying every load invariant.
pub fn random_graph_doc(rng: &mut StdRng, max_nodes: usize) -> GraphDocument {
    let attacks = rng.random_range(1..=6.min(max_nodes - 1));
    let features = rng.random_range(1..=(max_nodes - attacks));
    let mut doc = GraphDocument::new();

    for i in 0..attacks {
        doc.entities.push(EntityDoc {
            id: format!("a{i}"),
            name: format!("Attack {i}"),
            kind: KindDoc::AttackType,
            feature_scope: None,
            aliases: if rng.random_bool(0.3) {
                vec![format!("attack alias {i}")]
            } else {
                vec![]
            },
        });
        doc.labels.insert(format!("Label{i}"), format!("a{i}"));
    }
    for i in 0..features {
        doc.entities.push(EntityDoc {
            id: format!("f{i}"),
            name: format!("cue {i}"),
            kind: KindDoc::Feature,
            feature_scope: Some(if rng.random_bool(0.5) {
                ScopeDoc::Specific
            } else {
                ScopeDoc::Common
            }),
            aliases: if rng.random_bool(0.4) {
                vec![format!("cue alias {i}")]
            } else {
                vec![]
            },
        });
    }

    let max_edges = (attacks * features).min(3 * max_nodes / 2).max(1);
    let edge_count = rng.random_range(1..=max_edges);
    let mut seen: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    for _ in 0..edge_count {
        let a = rng.random_range(0..attacks);
        let f = rng.random_range(0..features);
        let p = rng.random_range(0..PREDICATES.len());
        if !seen.insert((a, p, f)) {
            continue;
        }
        let patterns = if rng.random_bool(0.5) {
            vec![PATTERN_POOL[rng.random_range(0..PATTERN_POOL.len())].to_string()]
        } else {
            vec![]
        };
        doc.relations.push(RelationDoc {
            attack: format!("a{a}"),
            predicate: PREDICATES[p].to_string(),
            feature: format!("f{f}"),
            patterns,
        });
    }
    doc
}

/// Brute-force KG reward over explicit index sets: materialize the
/// intersections by double loop and apply the formula directly.
pub fn oracle_kg_reward(
    grounded: &BTreeSet<usize>,
    s_plus: &BTreeSet<usize>,
    s_minus: &BTreeSet<usize>,
    eta: f64,
    eps: f64,
) -> (f64, f64, f64) {
    let mut in_plus = 0usize;
    let mut in_minus = 0usize;
    for g in grounded {
        for p in s_plus {
            if g == p {
                in_plus += 1;
            }
        }
        for m in s_minus {
            if g == m {
                in_minus += 1;
            }
        }
    }
    let r_match = in_plus as f64 / (s_plus.len() as f64 + eps);
    let r_conflict = in_minus as f64 / (s_minus.len() as f64 + eps);
    let r_kg = (r_match - eta * r_conflict).clamp(0.0, 1.0);
    (r_match, r_conflict, r_kg)
}

/// Per-category metrics computed from a full confusion matrix.
pub struct OracleCategory {
    pub category: Category,
    pub support: usize,
    pub acc: f64,
    pub far: f64,
    pub frr: f64,
    pub hter: f64,
}

pub struct OracleReport {
    pub categories: Vec<OracleCategory>,
    pub total_acc: f64,
    pub total_hter: f64,
}

/// Confusion-matrix oracle over coarsened (truth, predicted) pairs.
pub fn oracle_eval(pairs: &[(Category, Category)], space: &[Category]) -> OracleReport {
    let n = pairs.len();
    let mut matrix: BTreeMap<(Category, Category), usize> = BTreeMap::new();
    for (t, p) in pairs {
        *matrix.entry((*t, *p)).or_default() += 1;
    }
    let row = |c: Category| -> usize {
        space
            .iter()
            .map(|p| matrix.get(&(c, *p)).copied().unwrap_or(0))
            .sum()
    };
    let col = |c: Category| -> usize {
        space
            .iter()
            .map(|t| matrix.get(&(*t, c)).copied().unwrap_or(0))
            .sum()
    };
    let mut categories = Vec::new();
    for &c in space {
        let support = row(c);
        let diag = matrix.get(&(c, c)).copied().unwrap_or(0);
        let acc = if support == 0 {
            0.0
        } else {
            diag as f64 / support as f64
        };
        let negatives = n - support;
        let far = if negatives == 0 {
            0.0
        } else {
            (col(c) - diag) as f64 / negatives as f64
        };
        let frr = 1.0 - acc;
        let hter = (far + frr) / 2.0;
        categories.push(OracleCategory {
            category: c,
            support,
            acc,
            far,
            frr,
            hter,
        });
    }
    let total_acc = categories
        .iter()
        .map(|c| c.support as f64 * c.acc)
        .sum::<f64>()
        / n as f64;
    let total_hter = categories
        .iter()
        .map(|c| c.support as f64 * c.hter)
        .sum::<f64>()
        / n as f64;
    OracleReport {
        categories,
        total_acc,
        total_hter,
    }
}

const FILLER_WORDS: [&str; 10] = [
    "the", "image", "appears", "with", "subtle", "artifacts", "around", "region", "under",
    "inspection",
];

/// Random rationale text mixing graph surface forms with filler words.
pub fn random_rationale(rng: &mut StdRng, surfaces: &[String]) -> String {
    let words = rng.random_range(0..30);
    let mut out = Vec::with_capacity(words);
    for _ in 0..words {
        if !surfaces.is_empty() && rng.random_bool(0.3) {
            out.push(surfaces[rng.random_range(0..surfaces.len())].clone());
        } else {
            out.push(FILLER_WORDS[rng.random_range(0..FILLER_WORDS.len())].to_string());
        }
    }
    out.join(" ")
}

/// Every name and alias in a graph document, for rationale generation.
pub fn surface_forms(doc: &GraphDocument) -> Vec<String> {
    doc.entities
        .iter()
        .flat_map(|e| std::iter::once(e.name.clone()).chain(e.aliases.iter().cloned()))
        .collect()
}
