use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::category::{self, Category};

/// Column order of the manifest CSV.
pub const MANIFEST_HEADER: [&str; 7] = [
    "doc_id",
    "source_path",
    "administration",
    "year",
    "impacted_override",
    "gold_relevant",
    "gold_categories",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Administration {
    Reagan,
    Bush,
    Clinton,
    Other,
}

impl Administration {
    pub const ALL: [Administration; 4] = [
        Administration::Reagan,
        Administration::Bush,
        Administration::Clinton,
        Administration::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Administration::Reagan => "Reagan",
            Administration::Bush => "Bush",
            Administration::Clinton => "Clinton",
            Administration::Other => "Other",
        }
    }
}

impl fmt::Display for Administration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Administration {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Administration::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown administration {s:?}"))
    }
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentMeta {
    pub doc_id: String,
    pub source_path: String,
    pub administration: Administration,
    pub year: u16,
    pub impacted_override: Option<bool>,
    pub gold_relevant: Option<bool>,
    /// Analyst-marked categories; only the seven signaling codes are allowed.
    pub gold_categories: Option<BTreeSet<Category>>,
}

impl DocumentMeta {
    pub fn new(doc_id: impl Into<String>, administration: Administration, year: u16) -> Self {
        let doc_id = doc_id.into();
        DocumentMeta {
            source_path: format!("{doc_id}.txt"),
            doc_id,
            administration,
            year,
            impacted_override: None,
            gold_relevant: None,
            gold_categories: None,
        }
    }
}

/// Read a manifest from disk.
pub fn load_manifest(path: &Path) -> Result<Vec<DocumentMeta>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest(file)
}

/// Parse manifest CSV from any reader. Rows are numbered from 1, excluding the header.
pub fn parse_manifest<R: Read>(reader: R) -> Result<Vec<DocumentMeta>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);

    let header = rdr.headers().map_err(|e| malformed(0, e.to_string()))?.clone();
    let columns: Vec<&str> = header.iter().collect();
    if columns != MANIFEST_HEADER {
        return Err(malformed(
            0,
            format!(
                "expected header {:?}, found {:?}",
                MANIFEST_HEADER.join(","),
                columns.join(",")
            ),
        ));
    }

    let mut seen = HashSet::new();
    let mut metas = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| malformed(row, e.to_string()))?;
        let meta = parse_row(&record).map_err(|reason| malformed(row, reason))?;
        if !seen.insert(meta.doc_id.clone()) {
            return Err(IngestError::DuplicateDocId {
                doc_id: meta.doc_id,
                row,
            });
        }
        metas.push(meta);
    }
    Ok(metas)
}

fn malformed(row: usize, reason: String) -> IngestError {
    IngestError::MalformedRow { row, reason }
}

fn parse_row(record: &csv::StringRecord) -> Result<DocumentMeta, String> {
    let field = |i: usize| record.get(i).unwrap_or("");

    let doc_id = field(0);
    if doc_id.is_empty() {
        return Err("doc_id is empty".into());
    }
    let source_path = field(1);
    if source_path.is_empty() {
        return Err("source_path is empty".into());
    }
    let administration: Administration = field(2).parse()?;
    let year: u16 = field(3)
        .parse()
        .map_err(|_| format!("year {:?} is not an integer", field(3)))?;
    if !(1900..=2100).contains(&year) {
        return Err(format!("year {year} outside 1900..=2100"));
    }
    let impacted_override = parse_opt_bool(field(4), "impacted_override")?;
    let gold_relevant = parse_opt_bool(field(5), "gold_relevant")?;
    let gold_categories = match field(6) {
        "" => None,
        list => {
            let codes = category::parse_code_list(list)?;
            if let Some(other) = codes.iter().find(|c| c.is_other()) {
                return Err(format!("gold category {} is not a signaling category", other.code()));
            }
            Some(codes.into_iter().collect::<BTreeSet<_>>())
        }
    };
    if gold_categories.is_some() && gold_relevant.is_none() {
        return Err("gold_categories given without gold_relevant".into());
    }

    Ok(DocumentMeta {
        doc_id: doc_id.to_owned(),
        source_path: source_path.to_owned(),
        administration,
        year,
        impacted_override,
        gold_relevant,
        gold_categories,
    })
}

fn parse_opt_bool(s: &str, column: &str) -> Result<Option<bool>, String> {
    match s.to_ascii_lowercase().as_str() {
        "" => Ok(None),
        "1" | "true" | "yes" | "x" => Ok(Some(true)),
        "0" | "false" | "no" => Ok(Some(false)),
        other => Err(format!("{column} {other:?} is not a boolean")),
    }
}

/// Write metas back out in manifest format.
pub fn write_manifest<W: std::io::Write>(writer: W, metas: &[DocumentMeta]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(MANIFEST_HEADER)?;
    let opt = |b: Option<bool>| match b {
        None => String::new(),
        Some(true) => "1".into(),
        Some(false) => "0".into(),
    };
    for m in metas {
        let cats = m
            .gold_categories
            .as_ref()
            .map(|set| category::format_code_list(&set.iter().copied().collect::<Vec<_>>()))
            .unwrap_or_default();
        wtr.write_record([
            m.doc_id.clone(),
            m.source_path.clone(),
            m.administration.to_string(),
            m.year.to_string(),
            opt(m.impacted_override),
            opt(m.gold_relevant),
            cats,
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Document counts per administration, in administration order.
pub fn count_by_administration(metas: &[DocumentMeta]) -> BTreeMap<Administration, usize> {
    let mut counts = BTreeMap::new();
    for m in metas {
        *counts.entry(m.administration).or_insert(0) += 1;
    }
    counts
}
