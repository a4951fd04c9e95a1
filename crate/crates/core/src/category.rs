//! The fixed signaling category key.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One of the seven signaling categories, or `Other`.
///
/// Codes are stable and appear in every file format (manifest gold labels,
/// mapping ranks, classification output).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Category {
    ThreatOfForce = 0,
    Movement = 1,
    Maintenance = 2,
    ArmsControl = 3,
    MonitoringVerification = 4,
    Programs = 5,
    Funding = 6,
    Other = 7,
}

impl Category {
    pub const COUNT: usize = 8;

    /// All eight categories in code order.
    pub const ALL: [Category; 8] = [
        Category::ThreatOfForce,
        Category::Movement,
        Category::Maintenance,
        Category::ArmsControl,
        Category::MonitoringVerification,
        Category::Programs,
        Category::Funding,
        Category::Other,
    ];

    /// The seven signaling categories, excluding `Other`.
    pub const SIGNALING: [Category; 7] = [
        Category::ThreatOfForce,
        Category::Movement,
        Category::Maintenance,
        Category::ArmsControl,
        Category::MonitoringVerification,
        Category::Programs,
        Category::Funding,
    ];

    pub fn from_code(code: u8) -> Option<Category> {
        Category::ALL.get(code as usize).copied()
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_other(self) -> bool {
        self == Category::Other
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::ThreatOfForce => "Threat of Force",
            Category::Movement => "Movement of Forces/Materials",
            Category::Maintenance => "Maintenance",
            Category::ArmsControl => "Reductions/Arms Control",
            Category::MonitoringVerification => "Monitoring/Verification",
            Category::Programs => "Programs",
            Category::Funding => "Funding",
            Category::Other => "Other",
        }
    }

    /// Short key used in compact tables.
    pub fn short_name(self) -> &'static str {
        match self {
            Category::ThreatOfForce => "ToF",
            Category::Movement => "Movement",
            Category::Maintenance => "Maintenance",
            Category::ArmsControl => "Arms Control",
            Category::MonitoringVerification => "Mon/Ver",
            Category::Programs => "Programs",
            Category::Funding => "Funding",
            Category::Other => "Other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let code = u8::deserialize(deserializer)?;
        Category::from_code(code).ok_or_else(|| serde::de::Error::custom(format!("category code {code} outside 0..=7")))
    }
}

/// Parse a `;`-separated list of category codes, e.g. `"5;1;0"`.
/// An empty string parses to an empty list.
pub fn parse_code_list(s: &str) -> Result<Vec<Category>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|part| {
            let part = part.trim();
            part.parse::<u8>()
                .ok()
                .and_then(Category::from_code)
                .ok_or_else(|| format!("invalid category code {part:?}"))
        })
        .collect()
}

pub fn format_code_list(categories: &[Category]) -> String {
    categories
        .iter()
        .map(|c| c.code().to_string())
        .collect::<Vec<_>>()
        .join(";")
}
