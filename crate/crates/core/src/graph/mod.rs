//! Face-attack knowledge graph: typed attack/feature entities joined by
//! attack-conditioned relations, with label lookup, k-hop ego-subgraph
//! extraction, and support/conflict set derivation.
//!
//! A loaded graph is immutable and safe to share across threads; every
//! operation here is a pure function of its inputs.

mod format;
mod types;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::LazyLock;

use indexmap::IndexMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text;

pub use format::{EntityDoc, GraphDocument, KindDoc, RelationDoc, ScopeDoc, FORMAT_VERSION};
pub use types::{
    ConflictPolicy, Diagnostic, Entity, EntityId, EntityKind, FeatureScope, Relation, RelationId,
    Subgraph, SupportSets,
};

use types::triple_display;

/// Load or query failure. Integrity failures name the offending id or triple.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph parse failure: {0}")]
    Parse(String),
    #[error("unsupported graph format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("invalid entity id {id:?}: ids are non-empty with no surrounding whitespace")]
    InvalidEntityId { id: String },
    #[error("duplicate entity id: {id}")]
    DuplicateEntity { id: EntityId },
    #[error("entity {id} has an empty name")]
    EmptyName { id: EntityId },
    #[error("entity {id} declares an empty alias")]
    EmptyAlias { id: EntityId },
    #[error("attack_type entity {id} must not declare a feature_scope")]
    AttackWithScope { id: EntityId },
    #[error("feature entity {id} must declare feature_scope common or specific")]
    FeatureWithoutScope { id: EntityId },
    #[error("relation {triple} references missing entity {id}")]
    DanglingEndpoint { triple: String, id: String },
    #[error("relation {triple}: {endpoint} endpoint {id} is not a {expected} entity")]
    WrongDirection {
        triple: String,
        endpoint: &'static str,
        id: EntityId,
        expected: &'static str,
    },
    #[error("duplicate relation triple {triple}")]
    DuplicateTriple { triple: String },
    #[error("relation {triple}: invalid pattern {pattern:?}: {reason}")]
    InvalidPattern {
        triple: String,
        pattern: String,
        reason: String,
    },
    #[error("empty label key in the label index")]
    EmptyLabel,
    #[error("label {label:?} references missing or non-attack entity {id}")]
    BadLabelTarget { label: String, id: String },
    #[error("attack entity {id} is not covered by the label index")]
    LabelMissing { id: EntityId },
    #[error("attack entity {id} is covered by more than one label")]
    LabelDuplicated { id: EntityId },
    #[error("conflict list key {id} is not an attack entity in the graph")]
    BadConflictKey { id: String },
    #[error("conflict list for {attack}: relation {triple} is not present in the graph")]
    UnknownConflictRelation { attack: EntityId, triple: String },
    #[error("conflict list for {attack}: relation {triple} is sourced at the attack itself")]
    SelfConflict { attack: EntityId, triple: String },
    #[error("unknown entity id: {id}")]
    UnknownEntity { id: String },
    #[error("entity {id} is not an attack_type entity")]
    NotAnAttack { id: EntityId },
    #[error("unknown fine-grained label: {label:?}")]
    UnknownLabel { label: String },
}

/// The bundled reference graph document.
pub const REFERENCE_GRAPH_JSON: &str = include_str!("../../data/reference_fakg.json");

static REFERENCE: LazyLock<FaceAttackGraph> = LazyLock::new(|| {
    FaceAttackGraph::load_json(REFERENCE_GRAPH_JSON).expect("bundled reference graph is valid")
});

/// An immutable attack/feature graph with its label index.
#[derive(Debug, Clone)]
pub struct FaceAttackGraph {
    entities: IndexMap<EntityId, Entity>,
    relations: Vec<Relation>,
    labels: IndexMap<String, EntityId>,
    explicit_conflicts: IndexMap<EntityId, Vec<RelationId>>,
    /// Undirected adjacency over entity indices, in relation order.
    adjacency: Vec<Vec<usize>>,
    /// Out-degree per entity index (attacks source all relations).
    out_degree: Vec<usize>,
    /// Normalized surface form -> entity indices claiming it.
    surface_index: HashMap<String, Vec<usize>>,
}

impl PartialEq for FaceAttackGraph {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
            && self.relations == other.relations
            && self.labels == other.labels
            && self.explicit_conflicts == other.explicit_conflicts
    }
}

impl FaceAttackGraph {
    /// Parse and validate a graph from its JSON document form.
    pub fn load_json(serialized: &str) -> Result<Self, GraphError> {
        let doc: GraphDocument =
            serde_json::from_str(serialized).map_err(|e| GraphError::Parse(e.to_string()))?;
        Self::from_document(doc)
    }

    /// The bundled reference graph (shared, parsed once).
    pub fn reference() -> &'static FaceAttackGraph {
        &REFERENCE
    }

    /// Build a graph from a parsed document, checking every invariant:
    /// referential integrity, edge direction, triple uniqueness, pattern
    /// validity, and exact label coverage of the attack entities.
    pub fn from_document(doc: GraphDocument) -> Result<Self, GraphError> {
        if doc.version != FORMAT_VERSION {
            return Err(GraphError::UnsupportedVersion {
                found: doc.version,
                expected: FORMAT_VERSION,
            });
        }

        let mut entities: IndexMap<EntityId, Entity> = IndexMap::with_capacity(doc.entities.len());
        for e in doc.entities {
            let id = EntityId::new(e.id)?;
            let (kind, feature_scope) = match (e.kind, e.feature_scope) {
                (KindDoc::AttackType, None) => (EntityKind::AttackType, FeatureScope::NotApplicable),
                (KindDoc::AttackType, Some(_)) => {
                    return Err(GraphError::AttackWithScope { id });
                }
                (KindDoc::Feature, Some(ScopeDoc::Common)) => {
                    (EntityKind::Feature, FeatureScope::Common)
                }
                (KindDoc::Feature, Some(ScopeDoc::Specific)) => {
                    (EntityKind::Feature, FeatureScope::Specific)
                }
                (KindDoc::Feature, None) => {
                    return Err(GraphError::FeatureWithoutScope { id });
                }
            };
            if e.name.trim().is_empty() {
                return Err(GraphError::EmptyName { id });
            }
            if e.aliases.iter().any(|a| a.trim().is_empty()) {
                return Err(GraphError::EmptyAlias { id });
            }
            let entity = Entity {
                id: id.clone(),
                name: e.name,
                kind,
                feature_scope,
                aliases: e.aliases,
            };
            if entities.insert(id.clone(), entity).is_some() {
                return Err(GraphError::DuplicateEntity { id });
            }
        }

        let mut relations: Vec<Relation> = Vec::with_capacity(doc.relations.len());
        let mut triple_index: HashMap<(usize, String, usize), RelationId> = HashMap::new();
        for r in doc.relations {
            let triple = triple_display(&r.attack, &r.predicate, &r.feature);
            let attack_idx = entities
                .get_index_of(r.attack.as_str())
                .ok_or_else(|| GraphError::DanglingEndpoint {
                    triple: triple.clone(),
                    id: r.attack.clone(),
                })?;
            let feature_idx = entities
                .get_index_of(r.feature.as_str())
                .ok_or_else(|| GraphError::DanglingEndpoint {
                    triple: triple.clone(),
                    id: r.feature.clone(),
                })?;
            let attack_entity = &entities[attack_idx];
            if attack_entity.kind != EntityKind::AttackType {
                return Err(GraphError::WrongDirection {
                    triple,
                    endpoint: "attack",
                    id: attack_entity.id.clone(),
                    expected: "attack_type",
                });
            }
            let feature_entity = &entities[feature_idx];
            if feature_entity.kind != EntityKind::Feature {
                return Err(GraphError::WrongDirection {
                    triple,
                    endpoint: "feature",
                    id: feature_entity.id.clone(),
                    expected: "feature",
                });
            }
            let key = (attack_idx, r.predicate.clone(), feature_idx);
            if triple_index.contains_key(&key) {
                return Err(GraphError::DuplicateTriple { triple });
            }
            for p in &r.patterns {
                validate_pattern(p, &triple)?;
            }
            let fallback_source = r
                .patterns
                .is_empty()
                .then(|| fallback_source(feature_entity));
            triple_index.insert(key, RelationId(relations.len()));
            relations.push(Relation {
                attack: attack_entity.id.clone(),
                predicate: r.predicate,
                feature: feature_entity.id.clone(),
                compiled: (0..r.patterns.len()).map(|_| Default::default()).collect(),
                patterns: r.patterns,
                fallback_source,
                fallback: Default::default(),
            });
        }

        let mut labels: IndexMap<String, EntityId> = IndexMap::with_capacity(doc.labels.len());
        let mut covered: HashMap<usize, ()> = HashMap::new();
        for (label, target) in doc.labels {
            if label.trim().is_empty() {
                return Err(GraphError::EmptyLabel);
            }
            let idx = entities.get_index_of(target.as_str()).ok_or_else(|| {
                GraphError::BadLabelTarget {
                    label: label.clone(),
                    id: target.clone(),
                }
            })?;
            if entities[idx].kind != EntityKind::AttackType {
                return Err(GraphError::BadLabelTarget {
                    label,
                    id: target,
                });
            }
            if covered.insert(idx, ()).is_some() {
                return Err(GraphError::LabelDuplicated {
                    id: entities[idx].id.clone(),
                });
            }
            labels.insert(label, entities[idx].id.clone());
        }
        for (idx, entity) in entities.values().enumerate() {
            if entity.kind == EntityKind::AttackType && !covered.contains_key(&idx) {
                return Err(GraphError::LabelMissing {
                    id: entity.id.clone(),
                });
            }
        }

        let mut explicit_conflicts: IndexMap<EntityId, Vec<RelationId>> = IndexMap::new();
        if let Some(conflicts) = doc.conflicts {
            for (key, triples) in conflicts {
                let idx = entities
                    .get_index_of(key.as_str())
                    .filter(|&i| entities[i].kind == EntityKind::AttackType)
                    .ok_or_else(|| GraphError::BadConflictKey { id: key.clone() })?;
                let attack_id = entities[idx].id.clone();
                let mut resolved = Vec::with_capacity(triples.len());
                for t in triples {
                    let triple = triple_display(&t.attack, &t.predicate, &t.feature);
                    let a = entities.get_index_of(t.attack.as_str());
                    let f = entities.get_index_of(t.feature.as_str());
                    let rid = match (a, f) {
                        (Some(a), Some(f)) => {
                            triple_index.get(&(a, t.predicate.clone(), f)).copied()
                        }
                        _ => None,
                    }
                    .ok_or_else(|| GraphError::UnknownConflictRelation {
                        attack: attack_id.clone(),
                        triple: triple.clone(),
                    })?;
                    if relations[rid.0].attack == attack_id {
                        return Err(GraphError::SelfConflict {
                            attack: attack_id,
                            triple,
                        });
                    }
                    resolved.push(rid);
                }
                explicit_conflicts.insert(attack_id, resolved);
            }
        }

        let mut adjacency = vec![Vec::new(); entities.len()];
        let mut out_degree = vec![0usize; entities.len()];
        for rel in &relations {
            let a = entities.get_index_of(rel.attack.as_str()).expect("resolved");
            let f = entities.get_index_of(rel.feature.as_str()).expect("resolved");
            adjacency[a].push(f);
            adjacency[f].push(a);
            out_degree[a] += 1;
        }

        let mut surface_index: HashMap<String, Vec<usize>> = HashMap::new();
        for (idx, entity) in entities.values().enumerate() {
            let mut seen_here: HashSet<String> = HashSet::new();
            for form in entity.surface_forms() {
                let norm = text::normalize_surface(form);
                if seen_here.insert(norm.clone()) {
                    surface_index.entry(norm).or_default().push(idx);
                }
            }
        }

        Ok(FaceAttackGraph {
            entities,
            relations,
            labels,
            explicit_conflicts,
            adjacency,
            out_degree,
            surface_index,
        })
    }

    /// Project back to the document form, preserving entity, relation, and
    /// label order.
    pub fn to_document(&self) -> GraphDocument {
        let entities = self
            .entities
            .values()
            .map(|e| EntityDoc {
                id: e.id.to_string(),
                name: e.name.clone(),
                kind: match e.kind {
                    EntityKind::AttackType => KindDoc::AttackType,
                    EntityKind::Feature => KindDoc::Feature,
                },
                feature_scope: match e.feature_scope {
                    FeatureScope::Common => Some(ScopeDoc::Common),
                    FeatureScope::Specific => Some(ScopeDoc::Specific),
                    FeatureScope::NotApplicable => None,
                },
                aliases: e.aliases.clone(),
            })
            .collect();
        let relations = self
            .relations
            .iter()
            .map(|r| RelationDoc {
                attack: r.attack.to_string(),
                predicate: r.predicate.clone(),
                feature: r.feature.to_string(),
                patterns: r.patterns.clone(),
            })
            .collect();
        let labels = self
            .labels
            .iter()
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect();
        let conflicts = if self.explicit_conflicts.is_empty() {
            None
        } else {
            Some(
                self.explicit_conflicts
                    .iter()
                    .map(|(attack, rids)| {
                        let triples = rids
                            .iter()
                            .map(|rid| {
                                let r = &self.relations[rid.0];
                                format::TripleDoc {
                                    attack: r.attack.to_string(),
                                    predicate: r.predicate.clone(),
                                    feature: r.feature.to_string(),
                                }
                            })
                            .collect();
                        (attack.to_string(), triples)
                    })
                    .collect(),
            )
        };
        GraphDocument {
            version: FORMAT_VERSION,
            entities,
            relations,
            labels,
            conflicts,
        }
    }

    /// Serialize to the JSON file format (pretty-printed, stable key order).
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("graph document serializes")
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation(&self, id: RelationId) -> &Relation {
        &self.relations[id.0]
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> {
        (0..self.relations.len()).map(RelationId)
    }

    pub fn labels(&self) -> &IndexMap<String, EntityId> {
        &self.labels
    }

    fn index_of(&self, id: &str) -> Result<usize, GraphError> {
        self.entities
            .get_index_of(id)
            .ok_or_else(|| GraphError::UnknownEntity { id: id.to_string() })
    }

    fn entity_at(&self, idx: usize) -> &Entity {
        &self.entities[idx]
    }

    /// Breadth-first distances from `start`, treating relations as
    /// undirected; traversal stops expanding beyond `cap` hops when given.
    fn bfs(&self, start: usize, cap: Option<usize>) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.entities.len()];
        dist[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].expect("queued nodes have distances");
            if cap.is_some_and(|k| d >= k) {
                continue;
            }
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Minimum hop count between two entities under undirected traversal;
    /// `None` when unreachable, `Some(0)` when `u == v`.
    pub fn shortest_distance(&self, u: &str, v: &str) -> Result<Option<usize>, GraphError> {
        let ui = self.index_of(u)?;
        let vi = self.index_of(v)?;
        if ui == vi {
            return Ok(Some(0));
        }
        Ok(self.bfs(ui, None)[vi])
    }

    /// The induced subgraph on every entity within `k` hops of `center`.
    pub fn ego_subgraph(&self, center: &str, k: usize) -> Result<Subgraph, GraphError> {
        let ci = self.index_of(center)?;
        let dist = self.bfs(ci, Some(k));
        let node_idx: HashSet<usize> = dist
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.map(|_| i))
            .collect();
        let nodes: BTreeSet<EntityId> = node_idx
            .iter()
            .map(|&i| self.entity_at(i).id.clone())
            .collect();
        let edges = self
            .relations
            .iter()
            .enumerate()
            .filter(|(_, r)| {
                let a = self.entities.get_index_of(r.attack.as_str()).expect("resolved");
                let f = self.entities.get_index_of(r.feature.as_str()).expect("resolved");
                node_idx.contains(&a) && node_idx.contains(&f)
            })
            .map(|(i, _)| RelationId(i))
            .collect();
        Ok(Subgraph {
            center: self.entity_at(ci).id.clone(),
            k,
            nodes,
            edges,
        })
    }

    /// Relations supporting `attack` (its own out-relations) and relations
    /// incompatible with it, derived per `policy`.
    pub fn support_sets(
        &self,
        attack: &str,
        policy: ConflictPolicy,
    ) -> Result<SupportSets, GraphError> {
        let ai = self.index_of(attack)?;
        let attack_entity = self.entity_at(ai);
        if attack_entity.kind != EntityKind::AttackType {
            return Err(GraphError::NotAnAttack {
                id: attack_entity.id.clone(),
            });
        }
        let attack_id = attack_entity.id.clone();

        let mut s_plus = BTreeSet::new();
        let mut own_features: HashSet<&EntityId> = HashSet::new();
        for (i, r) in self.relations.iter().enumerate() {
            if r.attack == attack_id {
                s_plus.insert(RelationId(i));
                own_features.insert(&r.feature);
            }
        }

        let explicit = match policy {
            ConflictPolicy::ExplicitOrDerived => self.explicit_conflicts.get(&attack_id),
            ConflictPolicy::Derived => None,
        };
        let s_minus = match explicit {
            Some(list) => list.iter().copied().collect(),
            None => self
                .relations
                .iter()
                .enumerate()
                .filter(|(_, r)| {
                    r.attack != attack_id
                        && !own_features.contains(&r.feature)
                        && self
                            .entities
                            .get(r.feature.as_str())
                            .is_some_and(|f| f.feature_scope == FeatureScope::Specific)
                })
                .map(|(i, _)| RelationId(i))
                .collect(),
        };
        Ok(SupportSets {
            attack: attack_id,
            s_plus,
            s_minus,
        })
    }

    /// The attack entity a fine-grained label maps to. Exact label keys win;
    /// otherwise a unique normalized match is accepted.
    pub fn attack_node_for_label(&self, label: &str) -> Result<&EntityId, GraphError> {
        if let Some(id) = self.labels.get(label) {
            return Ok(id);
        }
        let want = text::normalize_label(label);
        let mut hit = None;
        for (key, id) in &self.labels {
            if text::normalize_label(key) == want {
                if hit.is_some() {
                    return Err(GraphError::UnknownLabel {
                        label: label.to_string(),
                    });
                }
                hit = Some(id);
            }
        }
        hit.ok_or_else(|| GraphError::UnknownLabel {
            label: label.to_string(),
        })
    }

    /// Resolve a surface phrase (entity name or alias, normalized) to its
    /// entity. Returns `None` when unknown or ambiguous.
    pub fn resolve_entity(&self, surface: &str) -> Option<&Entity> {
        let norm = text::normalize_surface(surface);
        match self.surface_index.get(&norm).map(Vec::as_slice) {
            Some([idx]) => Some(self.entity_at(*idx)),
            _ => None,
        }
    }

    /// Find the relation with the given endpoints whose predicate matches
    /// under surface normalization.
    pub fn find_relation(
        &self,
        attack: &EntityId,
        predicate: &str,
        feature: &EntityId,
    ) -> Option<RelationId> {
        let want = text::normalize_surface(predicate);
        self.relations.iter().enumerate().find_map(|(i, r)| {
            (r.attack == *attack
                && r.feature == *feature
                && text::normalize_surface(&r.predicate) == want)
                .then_some(RelationId(i))
        })
    }

    /// Non-fatal findings: orphan features, attacks without relations, alias
    /// collisions, and patterns that match the empty string.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (idx, entity) in self.entities.values().enumerate() {
            match entity.kind {
                EntityKind::Feature if self.adjacency[idx].is_empty() => {
                    out.push(Diagnostic::OrphanFeature {
                        id: entity.id.clone(),
                    });
                }
                EntityKind::AttackType if self.out_degree[idx] == 0 => {
                    out.push(Diagnostic::AttackWithoutRelations {
                        id: entity.id.clone(),
                    });
                }
                _ => {}
            }
        }
        let mut collisions: Vec<(&String, &Vec<usize>)> = self
            .surface_index
            .iter()
            .filter(|(_, idxs)| idxs.len() > 1)
            .collect();
        collisions.sort_by_key(|(alias, _)| alias.as_str());
        for (alias, idxs) in collisions {
            let mut ids: Vec<EntityId> =
                idxs.iter().map(|&i| self.entity_at(i).id.clone()).collect();
            ids.sort();
            out.push(Diagnostic::AliasCollision {
                alias: alias.clone(),
                ids,
            });
        }
        for r in &self.relations {
            let triple = triple_display(r.attack.as_str(), &r.predicate, r.feature.as_str());
            for (i, p) in r.patterns.iter().enumerate() {
                if r.pattern_regex(i).is_match("") {
                    out.push(Diagnostic::EmptyMatchPattern {
                        relation: triple.clone(),
                        pattern: p.clone(),
                    });
                }
            }
        }
        out
    }
}

impl Subgraph {
    /// Content hash over the center, k, sorted node ids, and edge triples in
    /// graph order. Stable across runs and processes.
    pub fn content_hash(&self, g: &FaceAttackGraph) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.center.as_str().as_bytes());
        hasher.update([0u8]);
        hasher.update(self.k.to_le_bytes());
        for n in &self.nodes {
            hasher.update(n.as_str().as_bytes());
            hasher.update([1u8]);
        }
        for e in &self.edges {
            let r = g.relation(*e);
            hasher.update(r.attack.as_str().as_bytes());
            hasher.update([2u8]);
            hasher.update(r.predicate.as_bytes());
            hasher.update([2u8]);
            hasher.update(r.feature.as_str().as_bytes());
            hasher.update([3u8]);
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// JSON projection with resolved edge triples, for tool output.
    pub fn to_json(&self, g: &FaceAttackGraph) -> serde_json::Value {
        serde_json::json!({
            "center": self.center.as_str(),
            "k": self.k,
            "nodes": self.nodes.iter().map(EntityId::as_str).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|e| {
                let r = g.relation(*e);
                serde_json::json!({
                    "attack": r.attack.as_str(),
                    "predicate": r.predicate,
                    "feature": r.feature.as_str(),
                })
            }).collect::<Vec<_>>(),
        })
    }
}

/// Validate one pattern without building a matcher: it must parse under the
/// standard grammar and stay an unanchored search (no `^`/`$`/`\A`/`\z`), so
/// match sets are append-monotonic. The regex grammar has no backreferences
/// or lookaround, completing the declared dialect.
fn validate_pattern(pattern: &str, triple: &str) -> Result<(), GraphError> {
    let err = |reason: String| GraphError::InvalidPattern {
        triple: triple.to_string(),
        pattern: pattern.to_string(),
        reason,
    };
    let hir = regex_syntax::parse(pattern).map_err(|e| err(e.to_string()))?;
    use regex_syntax::hir::Look;
    let looks = hir.properties().look_set();
    let anchors = [
        Look::Start,
        Look::End,
        Look::StartLF,
        Look::EndLF,
        Look::StartCRLF,
        Look::EndCRLF,
    ];
    if anchors.iter().any(|l| looks.contains(*l)) {
        return Err(err(
            "start/end anchors are not part of the pattern dialect (patterns are unanchored searches)"
                .to_string(),
        ));
    }
    Ok(())
}

/// Whole-word, case-insensitive alternation over a feature's surface forms.
fn fallback_source(feature: &Entity) -> String {
    let alts = feature
        .surface_forms()
        .map(regex::escape)
        .collect::<Vec<_>>()
        .join("|");
    format!(r"\b(?:{alts})\b")
}

/// Deterministic map from relation ids to their display triples, used by
/// reports and error paths.
pub fn triples_of(g: &FaceAttackGraph, ids: &BTreeSet<RelationId>) -> BTreeMap<RelationId, String> {
    ids.iter()
        .map(|rid| {
            let r = g.relation(*rid);
            (
                *rid,
                triple_display(r.attack.as_str(), &r.predicate, r.feature.as_str()),
            )
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod toy {
    use super::*;

    /// Four-node path graph: A1-f1, A1-f2, A2-f2, A2-f3.
    pub fn four_node() -> FaceAttackGraph {
        FaceAttackGraph::load_json(
            r#"{
              "version": 1,
              "entities": [
                {"id": "A1", "name": "Alpha", "kind": "attack_type"},
                {"id": "A2", "name": "Beta", "kind": "attack_type"},
                {"id": "f1", "name": "cue one", "kind": "feature", "feature_scope": "specific"},
                {"id": "f2", "name": "cue two", "kind": "feature", "feature_scope": "common"},
                {"id": "f3", "name": "cue three", "kind": "feature", "feature_scope": "specific"}
              ],
              "relations": [
                {"attack": "A1", "predicate": "shows", "feature": "f1", "patterns": ["cue one"]},
                {"attack": "A1", "predicate": "shows", "feature": "f2", "patterns": ["cue two"]},
                {"attack": "A2", "predicate": "shows", "feature": "f2", "patterns": ["cue two"]},
                {"attack": "A2", "predicate": "shows", "feature": "f3", "patterns": ["cue three"]}
              ],
              "labels": {"Alpha": "A1", "Beta": "A2"}
            }"#,
        )
        .expect("toy graph is valid")
    }

    /// Support-set toy: A1->f_common, A1->f_spec1, A2->f_common, A2->f_spec2.
    pub fn support() -> FaceAttackGraph {
        FaceAttackGraph::load_json(
            r#"{
              "version": 1,
              "entities": [
                {"id": "A1", "name": "Alpha", "kind": "attack_type"},
                {"id": "A2", "name": "Beta", "kind": "attack_type"},
                {"id": "f_common", "name": "shared cue", "kind": "feature", "feature_scope": "common"},
                {"id": "f_spec1", "name": "alpha cue", "kind": "feature", "feature_scope": "specific", "aliases": ["moire"]},
                {"id": "f_spec2", "name": "beta cue", "kind": "feature", "feature_scope": "specific"}
              ],
              "relations": [
                {"attack": "A1", "predicate": "exhibits", "feature": "f_common", "patterns": ["shared cue"]},
                {"attack": "A1", "predicate": "reveals", "feature": "f_spec1"},
                {"attack": "A2", "predicate": "exhibits", "feature": "f_common", "patterns": ["shared cue"]},
                {"attack": "A2", "predicate": "reveals", "feature": "f_spec2", "patterns": ["beta cue"]}
              ],
              "labels": {"Alpha": "A1", "Beta": "A2"}
            }"#,
        )
        .expect("support toy graph is valid")
    }
}
