use std::io::{Read, Write};

use super::LabeledSet;
use crate::error::{Error, Result};

/// `label,f0,f1,...` with a header row. Labels are `1`/`-1` or
/// `speech`/`non-speech`.
pub fn read_labeled_csv<R: Read>(input: R, context: &str) -> Result<LabeledSet> {
    let mut r = csv::Reader::from_reader(input);
    let header = r
        .headers()
        .map_err(|e| Error::parse(format!("{context}:1"), e.to_string()))?
        .clone();
    if header.get(0) != Some("label") || header.len() < 2 {
        return Err(Error::parse(format!("{context}:1"), "header must be label followed by feature columns"));
    }
    let mut set = LabeledSet::default();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(format!("{context}:{line}"), e.to_string())
        })?;
        let at = format!("{context}:{}", rec.position().map_or(0, |p| p.line()));
        let y = match rec[0].trim() {
            "1" | "+1" | "speech" => 1,
            "-1" | "non-speech" => -1,
            other => return Err(Error::parse(&at, format!("bad label `{other}`"))),
        };
        let x = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|f| f.is_finite())
                    .ok_or_else(|| Error::parse(&at, format!("bad feature value `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        set.push(x, y);
    }
    if set.is_empty() {
        return Err(Error::parse(context, "no rows"));
    }
    Ok(set)
}

pub fn write_labeled_csv<W: Write>(out: W, set: &LabeledSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string()];
    header.extend((0..set.dim()).map(|k| format!("f{k}")));
    let fail = |e: csv::Error| Error::parse("output", e.to_string());
    w.write_record(&header).map_err(fail)?;
    for (x, y) in set.features.iter().zip(&set.labels) {
        let mut row = vec![y.to_string()];
        row.extend(x.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io("output", e))
}
