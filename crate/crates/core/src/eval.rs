//! Scoring machine relevance judgments against analyst gold labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::category::Category;
use crate::ingest::DocumentMeta;
use crate::rules::ClassificationRecord;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("gold and predicted labels cover different documents ({only_gold} only in gold, {only_predicted} only predicted; e.g. {example:?})")]
    DocSetMismatch {
        only_gold: usize,
        only_predicted: usize,
        example: String,
    },
    #[error("nothing to evaluate")]
    EmptyEvaluation,
    #[error("document {0:?} has no gold relevance label")]
    MissingGold(String),
    #[error("document {doc_id:?} has no value for grouping key {key}")]
    MissingGroupKey { doc_id: String, key: GroupBy },
}

/// How to treat manifest rows without `gold_relevant`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GoldPolicy {
    /// Every document must be labeled.
    #[default]
    RequireAll,
    /// Evaluate only the labeled documents.
    RestrictToLabeled,
}

pub type Labels = BTreeMap<String, bool>;

pub fn gold_labels(metas: &[DocumentMeta], policy: GoldPolicy) -> Result<Labels, EvalError> {
    let mut out = Labels::new();
    for m in metas {
        match (m.gold_relevant, policy) {
            (Some(g), _) => {
                out.insert(m.doc_id.clone(), g);
            }
            (None, GoldPolicy::RequireAll) => return Err(EvalError::MissingGold(m.doc_id.clone())),
            (None, GoldPolicy::RestrictToLabeled) => {}
        }
    }
    Ok(out)
}

/// Machine `analyze_document` flags keyed by doc id.
pub fn predicted_labels(records: &[ClassificationRecord]) -> Labels {
    records.iter().map(|r| (r.doc_id.clone(), r.analyze_document)).collect()
}

fn check_same_docs(gold: &Labels, predicted: &Labels) -> Result<(), EvalError> {
    if gold.is_empty() && predicted.is_empty() {
        return Err(EvalError::EmptyEvaluation);
    }
    let only_gold: Vec<&String> = gold.keys().filter(|k| !predicted.contains_key(*k)).collect();
    let only_pred: Vec<&String> = predicted.keys().filter(|k| !gold.contains_key(*k)).collect();
    if only_gold.is_empty() && only_pred.is_empty() {
        return Ok(());
    }
    Err(EvalError::DocSetMismatch {
        only_gold: only_gold.len(),
        only_predicted: only_pred.len(),
        example: only_gold
            .first()
            .or(only_pred.first())
            .map(|s| s.to_string())
            .unwrap_or_default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn predicted_positive(&self) -> usize {
        self.tp + self.fp
    }

    pub fn actual_positive(&self) -> usize {
        self.tp + self.fn_
    }

    /// 2×2 block: truth down the rows' second word, prediction across.
    pub fn render(&self) -> String {
        format!(
            "True Positive: {}\tFalse Positive: {}\nFalse Negative: {}\tTrue Negative: {}\n",
            self.tp, self.fp, self.fn_, self.tn
        )
    }
}

pub fn confusion(gold: &Labels, predicted: &Labels) -> Result<ConfusionMatrix, EvalError> {
    check_same_docs(gold, predicted)?;
    let mut m = ConfusionMatrix::default();
    for (id, &g) in gold {
        match (g, predicted[id]) {
            (true, true) => m.tp += 1,
            (false, true) => m.fp += 1,
            (true, false) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    Ok(m)
}

/// An exact fraction kept alongside its value for display.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: usize,
    pub den: usize,
}

impl Ratio {
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `"88.61% (358/404)"`
    pub fn render(&self) -> String {
        format!("{:.2}% ({}/{})", 100.0 * self.value(), self.num, self.den)
    }

    fn defined(num: usize, den: usize) -> Option<Ratio> {
        (den > 0).then_some(Ratio { num, den })
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl Serialize for Metrics {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        #[derive(Serialize)]
        struct Shown {
            num: usize,
            den: usize,
            value: f64,
            display: String,
        }
        let shown = |r: &Ratio| Shown {
            num: r.num,
            den: r.den,
            value: r.value(),
            display: r.render(),
        };
        let mut s = serializer.serialize_struct("Metrics", 3)?;
        s.serialize_field("accuracy", &shown(&self.accuracy))?;
        s.serialize_field("precision", &self.precision.as_ref().map(shown))?;
        s.serialize_field("recall", &self.recall.as_ref().map(shown))?;
        s.end()
    }
}

/// Precision and recall are `None` when their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: Ratio,
    pub precision: Option<Ratio>,
    pub recall: Option<Ratio>,
}

impl Metrics {
    pub fn render(&self) -> String {
        let opt = |r: &Option<Ratio>| r.map(|r| r.render()).unwrap_or_else(|| "n/a".into());
        format!(
            "Accuracy {}\tPrecision {}\tRecall {}",
            self.accuracy.render(),
            opt(&self.precision),
            opt(&self.recall)
        )
    }
}

pub fn metrics(m: &ConfusionMatrix) -> Result<Metrics, EvalError> {
    let total = m.total();
    if total == 0 {
        return Err(EvalError::EmptyEvaluation);
    }
    Ok(Metrics {
        accuracy: Ratio {
            num: m.tp + m.tn,
            den: total,
        },
        precision: Ratio::defined(m.tp, m.tp + m.fp),
        recall: Ratio::defined(m.tp, m.tp + m.fn_),
    })
}

/// Machine-only flags (false positives) and analyst-only flags (false
/// negatives), each sorted by doc id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancies {
    pub fp_docs: Vec<String>,
    pub fn_docs: Vec<String>,
    pub fp_count: usize,
    pub fn_count: usize,
    pub total: usize,
}

pub fn discrepancies(gold: &Labels, records: &[ClassificationRecord]) -> Result<Discrepancies, EvalError> {
    let predicted = predicted_labels(records);
    check_same_docs(gold, &predicted)?;
    let mut fp_docs = Vec::new();
    let mut fn_docs = Vec::new();
    for (id, &g) in gold {
        match (g, predicted[id]) {
            (false, true) => fp_docs.push(id.clone()),
            (true, false) => fn_docs.push(id.clone()),
            _ => {}
        }
    }
    Ok(Discrepancies {
        fp_count: fp_docs.len(),
        fn_count: fn_docs.len(),
        total: fp_docs.len() + fn_docs.len(),
        fp_docs,
        fn_docs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Administration,
    Year,
    Impacted,
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupBy::Administration => "administration",
            GroupBy::Year => "year",
            GroupBy::Impacted => "impacted",
        })
    }
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "administration" => Ok(GroupBy::Administration),
            "year" => Ok(GroupBy::Year),
            "impacted" => Ok(GroupBy::Impacted),
            other => Err(format!("unknown group key {other:?} (administration|year|impacted)")),
        }
    }
}

/// Sortable group key; rendering happens in [`GroupKey::label`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum GroupKey {
    Admin(crate::ingest::Administration),
    Year(u16),
    Impacted(bool),
}

impl GroupKey {
    fn of(meta: &DocumentMeta, by: GroupBy) -> Result<GroupKey, EvalError> {
        Ok(match by {
            GroupBy::Administration => GroupKey::Admin(meta.administration),
            GroupBy::Year => GroupKey::Year(meta.year),
            GroupBy::Impacted => {
                GroupKey::Impacted(meta.impacted_override.ok_or_else(|| EvalError::MissingGroupKey {
                    doc_id: meta.doc_id.clone(),
                    key: by,
                })?)
            }
        })
    }

    fn label(&self) -> String {
        match self {
            GroupKey::Admin(a) => a.to_string(),
            GroupKey::Year(y) => y.to_string(),
            GroupKey::Impacted(false) => "clean".into(),
            GroupKey::Impacted(true) => "impacted".into(),
        }
    }
}

/// Counts for one group. Category arrays are indexed by signaling code 0..=6.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    pub documents: usize,
    pub gold_relevant: usize,
    pub machine_flagged: usize,
    pub gold_categories: [usize; 7],
    pub machine_categories: [usize; 7],
}

impl GroupRow {
    fn empty(group: String) -> Self {
        GroupRow {
            group,
            documents: 0,
            gold_relevant: 0,
            machine_flagged: 0,
            gold_categories: [0; 7],
            machine_categories: [0; 7],
        }
    }

    pub fn pct(&self, n: usize) -> Ratio {
        Ratio {
            num: n,
            den: self.documents,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedTable {
    pub group_by: GroupBy,
    pub rows: Vec<GroupRow>,
}

impl GroupedTable {
    /// All groups summed into one row.
    pub fn total(&self) -> GroupRow {
        let mut t = GroupRow::empty("total".into());
        for r in &self.rows {
            t.documents += r.documents;
            t.gold_relevant += r.gold_relevant;
            t.machine_flagged += r.machine_flagged;
            for c in 0..7 {
                t.gold_categories[c] += r.gold_categories[c];
                t.machine_categories[c] += r.machine_categories[c];
            }
        }
        t
    }

    /// CSV rendering with counts and 2-decimal percentages.
    pub fn to_csv(&self) -> String {
        let mut header = vec![
            self.group_by.to_string(),
            "documents".into(),
            "gold_relevant".into(),
            "gold_relevant_pct".into(),
            "machine_flagged".into(),
            "machine_flagged_pct".into(),
        ];
        for c in Category::SIGNALING {
            let code = c.code();
            header.extend([
                format!("gold_{code}"),
                format!("gold_{code}_pct"),
                format!("machine_{code}"),
                format!("machine_{code}_pct"),
            ]);
        }
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(&header).expect("write to memory");
        let pct = |r: &GroupRow, n: usize| {
            if r.documents == 0 {
                String::new()
            } else {
                format!("{:.2}", 100.0 * r.pct(n).value())
            }
        };
        let rows = self.rows.iter().cloned().chain(std::iter::once(self.total()));
        for r in rows {
            let mut line = vec![
                r.group.clone(),
                r.documents.to_string(),
                r.gold_relevant.to_string(),
                pct(&r, r.gold_relevant),
                r.machine_flagged.to_string(),
                pct(&r, r.machine_flagged),
            ];
            for c in 0..7 {
                line.extend([
                    r.gold_categories[c].to_string(),
                    pct(&r, r.gold_categories[c]),
                    r.machine_categories[c].to_string(),
                    pct(&r, r.machine_categories[c]),
                ]);
            }
            wtr.write_record(&line).expect("write to memory");
        }
        String::from_utf8(wtr.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }
}

/// Per-group document, relevance and category counts. Machine category
/// membership is presence in a record's `top3`.
pub fn grouped_report(
    records: &[ClassificationRecord],
    metas: &[DocumentMeta],
    group_by: GroupBy,
) -> Result<GroupedTable, EvalError> {
    let by_id: BTreeMap<&str, &ClassificationRecord> = records.iter().map(|r| (r.doc_id.as_str(), r)).collect();
    let meta_ids: BTreeSet<&str> = metas.iter().map(|m| m.doc_id.as_str()).collect();
    let only_gold = meta_ids.iter().filter(|id| !by_id.contains_key(*id)).count();
    let only_pred = by_id.keys().filter(|id| !meta_ids.contains(*id)).count();
    if only_gold + only_pred > 0 {
        let example = meta_ids
            .iter()
            .find(|id| !by_id.contains_key(*id))
            .or_else(|| by_id.keys().find(|id| !meta_ids.contains(*id)))
            .map(|s| s.to_string())
            .unwrap_or_default();
        return Err(EvalError::DocSetMismatch {
            only_gold,
            only_predicted: only_pred,
            example,
        });
    }

    let mut groups: BTreeMap<GroupKey, GroupRow> = BTreeMap::new();
    for meta in metas {
        let key = GroupKey::of(meta, group_by)?;
        let row = groups.entry(key).or_insert_with(|| GroupRow::empty(key.label()));
        let rec = by_id[meta.doc_id.as_str()];
        row.documents += 1;
        if meta.gold_relevant == Some(true) {
            row.gold_relevant += 1;
        }
        if rec.analyze_document {
            row.machine_flagged += 1;
        }
        for c in meta.gold_categories.iter().flatten().filter(|c| !c.is_other()) {
            row.gold_categories[c.index()] += 1;
        }
        for c in rec.top3.iter().filter(|c| !c.is_other()) {
            row.machine_categories[c.index()] += 1;
        }
    }
    Ok(GroupedTable {
        group_by,
        rows: groups.into_values().collect(),
    })
}

/// Everything `eval` produces, bound to the classification it scored.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub v: u32,
    pub classification_digest: Option<String>,
    pub documents: usize,
    pub matrix: ConfusionMatrix,
    pub metrics: Metrics,
    pub discrepancies: Discrepancies,
    pub grouped: GroupedTable,
}

impl EvaluationReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.matrix.render());
        s.push('\n');
        s.push_str(&self.metrics.render());
        s.push('\n');
        let _ = writeln!(
            s,
            "Discrepancies: {} ({} false positives, {} false negatives)",
            self.discrepancies.total, self.discrepancies.fp_count, self.discrepancies.fn_count
        );
        s
    }

    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("metric,numerator,denominator,percent\n");
        let mut row = |name: &str, r: Option<Ratio>| match r {
            Some(r) => {
                let _ = writeln!(s, "{name},{},{},{:.2}", r.num, r.den, 100.0 * r.value());
            }
            None => {
                let _ = writeln!(s, "{name},,,");
            }
        };
        row("accuracy", Some(self.metrics.accuracy));
        row("precision", self.metrics.precision);
        row("recall", self.metrics.recall);
        let m = &self.matrix;
        let _ = writeln!(s, "tp,{},,\nfp,{},,\nfn,{},,\ntn,{},,", m.tp, m.fp, m.fn_, m.tn);
        s
    }
}

pub fn evaluate(
    records: &[ClassificationRecord],
    metas: &[DocumentMeta],
    group_by: GroupBy,
    policy: GoldPolicy,
) -> Result<EvaluationReport, EvalError> {
    let gold = gold_labels(metas, policy)?;
    let kept: Vec<ClassificationRecord> = records
        .iter()
        .filter(|r| gold.contains_key(&r.doc_id))
        .cloned()
        .collect();
    let records = match policy {
        GoldPolicy::RequireAll => records,
        GoldPolicy::RestrictToLabeled => &kept,
    };
    let labeled: Vec<DocumentMeta> = metas.iter().filter(|m| gold.contains_key(&m.doc_id)).cloned().collect();
    let matrix = confusion(&gold, &predicted_labels(records))?;
    Ok(EvaluationReport {
        v: REPORT_VERSION,
        classification_digest: None,
        documents: matrix.total(),
        metrics: metrics(&matrix)?,
        discrepancies: discrepancies(&gold, records)?,
        grouped: grouped_report(records, &labeled, group_by)?,
        matrix,
    })
}
