use std::io::{Read, Write};

use super::{ClassificationRecord, RulesError};
use crate::category::{format_code_list, parse_code_list};

pub const CLASSIFICATION_HEADER: [&str; 13] = [
    "doc_id",
    "wc_0",
    "wc_1",
    "wc_2",
    "wc_3",
    "wc_4",
    "wc_5",
    "wc_6",
    "wc_7",
    "contains_nuclear",
    "other_dominates",
    "analyze_document",
    "top3",
];

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// CSV with weights at 6 decimals, flags as 0/1, top3 as `;`-joined codes.
pub fn write_classification_csv<W: Write>(writer: W, records: &[ClassificationRecord]) -> Result<(), RulesError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CLASSIFICATION_HEADER)?;
    for r in records {
        let mut row = Vec::with_capacity(CLASSIFICATION_HEADER.len());
        row.push(r.doc_id.clone());
        row.extend(r.wc.iter().map(|x| format!("{x:.6}")));
        row.push(flag(r.contains_nuclear).into());
        row.push(flag(r.other_dominates).into());
        row.push(flag(r.analyze_document).into());
        row.push(format_code_list(&r.top3));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_classification_csv<R: Read>(reader: R) -> Result<Vec<ClassificationRecord>, RulesError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CLASSIFICATION_HEADER {
        return Err(RulesError::MalformedRecord {
            row: 0,
            reason: "unexpected header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let bad = |reason: String| RulesError::MalformedRecord { row, reason };
        let mut wc = [0.0; 8];
        for (j, slot) in wc.iter_mut().enumerate() {
            *slot = rec[j + 1]
                .parse()
                .map_err(|_| bad(format!("wc_{j} {:?} is not a number", &rec[j + 1])))?;
        }
        let parse_flag = |s: &str| match s {
            "1" => Ok(true),
            "0" => Ok(false),
            other => Err(bad(format!("flag {other:?} is not 0/1"))),
        };
        out.push(ClassificationRecord {
            doc_id: rec[0].to_owned(),
            wc,
            contains_nuclear: parse_flag(&rec[9])?,
            other_dominates: parse_flag(&rec[10])?,
            analyze_document: parse_flag(&rec[11])?,
            top3: parse_code_list(&rec[12]).map_err(bad)?,
        });
    }
    Ok(out)
}
