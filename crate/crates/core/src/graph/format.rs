//! On-disk graph document: a single UTF-8 JSON file.
//!
//! Top-level keys are fixed (`version`, `entities`, `relations`, `labels`,
//! optional `conflicts`); unknown keys are rejected, input key order is
//! irrelevant, and serialization emits keys in declaration order.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub version: u32,
    pub entities: Vec<EntityDoc>,
    pub relations: Vec<RelationDoc>,
    pub labels: IndexMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conflicts: Option<IndexMap<String, Vec<TripleDoc>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityDoc {
    pub id: String,
    pub name: String,
    pub kind: KindDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_scope: Option<ScopeDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindDoc {
    AttackType,
    Feature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeDoc {
    Common,
    Specific,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationDoc {
    pub attack: String,
    pub predicate: String,
    pub feature: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub patterns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleDoc {
    pub attack: String,
    pub predicate: String,
    pub feature: String,
}

impl GraphDocument {
    pub fn new() -> Self {
        GraphDocument {
            version: FORMAT_VERSION,
            entities: Vec::new(),
            relations: Vec::new(),
            labels: IndexMap::new(),
            conflicts: None,
        }
    }
}

impl Default for GraphDocument {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_top_level_key_rejected() {
        let doc = r#"{"version":1,"entities":[],"relations":[],"labels":{},"extra":true}"#;
        let err = serde_json::from_str::<GraphDocument>(doc).unwrap_err();
        assert!(err.to_string().contains("extra"));
    }

    #[test]
    fn key_order_irrelevant_on_input() {
        let doc = r#"{"labels":{},"relations":[],"entities":[],"version":1}"#;
        assert!(serde_json::from_str::<GraphDocument>(doc).is_ok());
    }

    #[test]
    fn serialization_key_order() {
        let json = serde_json::to_string(&GraphDocument::new()).unwrap();
        let v = json.find("\"version\"").unwrap();
        let e = json.find("\"entities\"").unwrap();
        let r = json.find("\"relations\"").unwrap();
        let l = json.find("\"labels\"").unwrap();
        assert!(v < e && e < r && r < l);
    }
}
