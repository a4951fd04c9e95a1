use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::category::Category;

/// Schema version of the mapping file.
pub const MAPPING_VERSION: u32 = 1;

fn default_version() -> u32 {
    MAPPING_VERSION
}

/// One topic's analyst judgment: a label and ranked categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub topic: usize,
    #[serde(default)]
    pub label: String,
    pub ranks: [Category; 3],
}

impl MappingEntry {
    pub fn is_relevant(&self) -> bool {
        !self.ranks.iter().all(|c| c.is_other())
    }
}

/// Topic-to-category assignment for a `K`-topic model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryMapping {
    #[serde(default = "default_version")]
    pub v: u32,
    #[serde(rename = "K")]
    pub k: usize,
    pub entries: Vec<MappingEntry>,
}

impl CategoryMapping {
    /// Every topic irrelevant: ranks `(7, 7, 7)`.
    pub fn all_other(k: usize) -> Self {
        CategoryMapping {
            v: MAPPING_VERSION,
            k,
            entries: (0..k)
                .map(|topic| MappingEntry {
                    topic,
                    label: String::new(),
                    ranks: [Category::Other; 3],
                })
                .collect(),
        }
    }

    pub fn entry(&self, topic: usize) -> Option<&MappingEntry> {
        self.entries.iter().find(|e| e.topic == topic)
    }

    /// Set a topic's ranks and label, adding the entry if needed.
    pub fn set(&mut self, topic: usize, label: impl Into<String>, ranks: [Category; 3]) {
        let label = label.into();
        match self.entries.iter_mut().find(|e| e.topic == topic) {
            Some(e) => {
                e.label = label;
                e.ranks = ranks;
            }
            None => self.entries.push(MappingEntry { topic, label, ranks }),
        }
    }

    /// Ranks indexed by topic id. Only meaningful after validation.
    pub(crate) fn rank_table(&self) -> Vec<[Category; 3]> {
        let mut table = vec![[Category::Other; 3]; self.k];
        for e in &self.entries {
            if let Some(slot) = table.get_mut(e.topic) {
                *slot = e.ranks;
            }
        }
        table
    }
}

/// A broken mapping invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnsupportedVersion {
        version: u32,
    },
    TopicCountMismatch {
        declared: usize,
        expected: usize,
    },
    MissingTopic {
        topic: usize,
    },
    DuplicateTopic {
        topic: usize,
    },
    TopicOutOfRange {
        topic: usize,
    },
    /// Some but not all ranks are Other.
    PartialOther {
        topic: usize,
    },
    DuplicateCode {
        topic: usize,
        code: u8,
    },
}

impl Violation {
    pub fn topic(&self) -> Option<usize> {
        match self {
            Violation::UnsupportedVersion { .. } | Violation::TopicCountMismatch { .. } => None,
            Violation::MissingTopic { topic }
            | Violation::DuplicateTopic { topic }
            | Violation::TopicOutOfRange { topic }
            | Violation::PartialOther { topic }
            | Violation::DuplicateCode { topic, .. } => Some(*topic),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnsupportedVersion { version } => {
                write!(f, "mapping schema version {version} is not supported")
            }
            Violation::TopicCountMismatch { declared, expected } => {
                write!(f, "mapping declares K={declared} but the model has {expected} topics")
            }
            Violation::MissingTopic { topic } => write!(f, "topic {topic} has no entry"),
            Violation::DuplicateTopic { topic } => write!(f, "topic {topic} has more than one entry"),
            Violation::TopicOutOfRange { topic } => write!(f, "topic {topic} is outside the model"),
            Violation::PartialOther { topic } => write!(
                f,
                "topic {topic} mixes Other with signaling categories; use (7,7,7) or three signaling codes"
            ),
            Violation::DuplicateCode { topic, code } => {
                write!(f, "topic {topic} ranks category {code} more than once")
            }
        }
    }
}

/// Check `mapping` against a `k`-topic model; returns every violation.
pub fn validate_mapping(mapping: &CategoryMapping, k: usize) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    if mapping.v != MAPPING_VERSION {
        violations.push(Violation::UnsupportedVersion { version: mapping.v });
    }
    if mapping.k != k {
        violations.push(Violation::TopicCountMismatch {
            declared: mapping.k,
            expected: k,
        });
    }

    let mut seen = BTreeSet::new();
    for e in &mapping.entries {
        if e.topic >= k {
            violations.push(Violation::TopicOutOfRange { topic: e.topic });
            continue;
        }
        if !seen.insert(e.topic) {
            violations.push(Violation::DuplicateTopic { topic: e.topic });
            continue;
        }
        let others = e.ranks.iter().filter(|c| c.is_other()).count();
        if others == 3 {
            continue;
        }
        if others > 0 {
            violations.push(Violation::PartialOther { topic: e.topic });
        }
        let mut codes = BTreeSet::new();
        for c in e.ranks.iter().filter(|c| !c.is_other()) {
            if !codes.insert(*c) {
                violations.push(Violation::DuplicateCode {
                    topic: e.topic,
                    code: c.code(),
                });
            }
        }
    }
    for topic in 0..k {
        if !seen.contains(&topic) {
            violations.push(Violation::MissingTopic { topic });
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Category::*;

    fn arms_topic0() -> CategoryMapping {
        let mut m = CategoryMapping::all_other(40);
        m.set(
            0,
            "deployment of strategic missiles",
            [Programs, Movement, ThreatOfForce],
        );
        m
    }

    #[test]
    fn topic0_programs_movement_tof_is_valid() {
        assert_eq!(validate_mapping(&arms_topic0(), 40), Ok(()));
    }

    #[test]
    fn duplicate_code_is_flagged() {
        let mut m = arms_topic0();
        m.set(5, "", [ArmsControl, ArmsControl, Programs]);
        assert_eq!(
            validate_mapping(&m, 40),
            Err(vec![Violation::DuplicateCode { topic: 5, code: 3 }])
        );
    }

    #[test]
    fn missing_topic_is_flagged() {
        let mut m = CategoryMapping::all_other(40);
        m.entries.retain(|e| e.topic != 39);
        let v = validate_mapping(&m, 40).unwrap_err();
        assert!(v.contains(&Violation::MissingTopic { topic: 39 }));
    }

    #[test]
    fn mixed_other_and_structure_errors() {
        let mut m = CategoryMapping::all_other(3);
        m.set(1, "", [Funding, Other, Other]);
        m.entries.push(MappingEntry {
            topic: 2,
            label: String::new(),
            ranks: [Other; 3],
        });
        m.entries.push(MappingEntry {
            topic: 7,
            label: String::new(),
            ranks: [Other; 3],
        });
        let v = validate_mapping(&m, 4).unwrap_err();
        assert!(v.contains(&Violation::TopicCountMismatch {
            declared: 3,
            expected: 4
        }));
        assert!(v.contains(&Violation::PartialOther { topic: 1 }));
        assert!(v.contains(&Violation::DuplicateTopic { topic: 2 }));
        assert!(v.contains(&Violation::TopicOutOfRange { topic: 7 }));
        assert!(v.contains(&Violation::MissingTopic { topic: 3 }));
        assert!(v.iter().all(|x| !x.to_string().is_empty()));
    }

    #[test]
    fn file_format() {
        let json = r#"{ "K": 2, "entries": [
            { "topic": 0, "label": "deployment of strategic missiles", "ranks": [5,1,0] },
            { "topic": 1, "label": "action: policy review process", "ranks": [7,7,7] } ] }"#;
        let m: CategoryMapping = serde_json::from_str(json).unwrap();
        assert_eq!(m.v, MAPPING_VERSION);
        assert_eq!(m.entries[0].ranks, [Programs, Movement, ThreatOfForce]);
        assert!(m.entries[0].is_relevant());
        assert!(!m.entries[1].is_relevant());
        let out = serde_json::to_value(&m).unwrap();
        assert_eq!(out["K"], 2);
        assert_eq!(out["entries"][0]["ranks"], serde_json::json!([5, 1, 0]));
        assert!(serde_json::from_str::<CategoryMapping>(r#"{"K":1,"entries":[{"topic":0,"ranks":[8,1,0]}]}"#).is_err());
    }

    #[test]
    fn violations_serialize_with_kind_and_topic() {
        let v = serde_json::to_value(Violation::DuplicateCode { topic: 4, code: 3 }).unwrap();
        assert_eq!(v, serde_json::json!({"kind": "duplicate_code", "topic": 4, "code": 3}));
    }
}
