//! Domain types for the face-attack knowledge graph.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use super::GraphError;

/// Identity of a graph entity. Non-empty, no surrounding whitespace, unique
/// within a graph.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(value: impl Into<String>) -> Result<Self, GraphError> {
        let value = value.into();
        if value.is_empty() || value.trim() != value {
            return Err(GraphError::InvalidEntityId { id: value });
        }
        Ok(EntityId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EntityId({})", self.0)
    }
}

impl AsRef<str> for EntityId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for EntityId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// What an entity is: an attack class or an observable diagnostic cue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    AttackType,
    Feature,
}

/// Whether a feature cue is shared across attack types or diagnostic of one.
/// Attack entities carry `NotApplicable`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureScope {
    Common,
    Specific,
    NotApplicable,
}

/// A node of the graph: an attack type or a feature cue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entity {
    pub id: EntityId,
    pub name: String,
    pub kind: EntityKind,
    pub feature_scope: FeatureScope,
    pub aliases: Vec<String>,
}

impl Entity {
    /// The name plus every declared alias; the name is implicitly an alias.
    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.name.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

/// Index of a relation within its graph's ordered relation list. Identity of
/// an edge for set operations and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub usize);

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A directed attack-to-feature edge with its match patterns.
///
/// The triple `(attack, predicate, feature)` is the relation's identity and
/// unique within a graph. `patterns` are unanchored, case-insensitive search
/// expressions; when empty, a whole-word pattern over the feature's surface
/// forms is generated at load and used instead. Pattern syntax is validated
/// at load; matchers are compiled on first use.
#[derive(Debug, Clone)]
pub struct Relation {
    pub attack: EntityId,
    pub predicate: String,
    pub feature: EntityId,
    pub patterns: Vec<String>,
    pub(super) compiled: Vec<OnceLock<Regex>>,
    /// Generated whole-word alternation, present iff `patterns` is empty.
    pub(super) fallback_source: Option<String>,
    pub(super) fallback: OnceLock<Regex>,
}

fn compile_validated(source: &str) -> Regex {
    RegexBuilder::new(source)
        .case_insensitive(true)
        .build()
        .expect("pattern was validated at graph load")
}

impl Relation {
    pub(super) fn pattern_regex(&self, index: usize) -> &Regex {
        self.compiled[index].get_or_init(|| compile_validated(&self.patterns[index]))
    }

    fn fallback_regex(&self) -> Option<&Regex> {
        let source = self.fallback_source.as_deref()?;
        Some(self.fallback.get_or_init(|| compile_validated(source)))
    }

    /// True iff any pattern (or the generated fallback) finds a match in
    /// `text`. Matching is case-insensitive and unanchored.
    pub fn matches(&self, text: &str) -> bool {
        if self.patterns.is_empty() {
            self.fallback_regex().is_some_and(|re| re.is_match(text))
        } else {
            (0..self.patterns.len()).any(|i| self.pattern_regex(i).is_match(text))
        }
    }

    /// The `(attack, predicate, feature)` identity as display strings.
    pub fn triple(&self) -> (String, String, String) {
        (
            self.attack.to_string(),
            self.predicate.clone(),
            self.feature.to_string(),
        )
    }
}

impl PartialEq for Relation {
    fn eq(&self, other: &Self) -> bool {
        self.attack == other.attack
            && self.predicate == other.predicate
            && self.feature == other.feature
            && self.patterns == other.patterns
    }
}

pub(super) fn triple_display(attack: &str, predicate: &str, feature: &str) -> String {
    format!("({attack}, {predicate}, {feature})")
}

/// The induced subgraph on all nodes within `k` undirected hops of `center`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    pub center: EntityId,
    pub k: usize,
    pub nodes: BTreeSet<EntityId>,
    /// Relation ids of the parent graph with both endpoints in `nodes`,
    /// in the parent graph's relation order.
    pub edges: Vec<RelationId>,
}

/// Relations compatible (`s_plus`) and incompatible (`s_minus`) with one
/// ground-truth attack type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSets {
    pub attack: EntityId,
    pub s_plus: BTreeSet<RelationId>,
    pub s_minus: BTreeSet<RelationId>,
}

/// How the incompatible relation set is derived for an attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConflictPolicy {
    /// Use the graph's explicit conflict list when one is declared for the
    /// attack; otherwise derive: foreign relations over attack-specific
    /// features the attack does not itself use.
    #[default]
    ExplicitOrDerived,
    /// Always derive, ignoring explicit conflict lists.
    Derived,
}

/// Non-fatal findings about a loaded graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    /// A feature entity with no incident relation.
    OrphanFeature { id: EntityId },
    /// An attack entity that sources no relation.
    AttackWithoutRelations { id: EntityId },
    /// The same surface form is claimed by more than one entity.
    AliasCollision { alias: String, ids: Vec<EntityId> },
    /// A pattern that matches the empty string grounds every rationale.
    EmptyMatchPattern { relation: String, pattern: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::OrphanFeature { id } => {
                write!(f, "orphan feature: {id} has no incident relation")
            }
            Diagnostic::AttackWithoutRelations { id } => {
                write!(f, "attack without relations: {id}")
            }
            Diagnostic::AliasCollision { alias, ids } => {
                let ids = ids
                    .iter()
                    .map(EntityId::as_str)
                    .collect::<Vec<_>>()
                    .join(", ");
                write!(f, "alias collision: {alias:?} claimed by {ids}")
            }
            Diagnostic::EmptyMatchPattern { relation, pattern } => {
                write!(
                    f,
                    "pattern {pattern:?} on relation {relation} matches the empty string"
                )
            }
        }
    }
}
