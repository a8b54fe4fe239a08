//! Feature-set CSV, label CSV, and HR/IMU JSONL session streams.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use serde::de::DeserializeOwned;

use super::{EmotionLabel, FeatureSchema, FeatureSet, HrSample, HrSeries, ImuSample, ImuSeries, ModalityFeatures};
use super::{Arousal, Modality, Valence};
use crate::error::{Error, Result};

/// Marker for an absent modality in feature CSV files.
pub const ABSENT: &str = "NA";

fn csv_err(context: &str, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::parse(format!("{context}:{line}"), e.to_string())
}

/// One row per session; header is `session_id` then `modality.feature`.
/// Absent modalities are written as `NA` in every one of their columns.
pub fn write_feature_sets_csv<W: Write>(out: W, schema: &FeatureSchema, sets: &[FeatureSet]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["session_id".to_string()];
    header.extend(schema.column_names());
    w.write_record(&header).map_err(|e| csv_err("output", e))?;
    for set in sets {
        let mut row = vec![set.session_id.clone()];
        for (m, names) in &schema.modalities {
            match set.modality(*m) {
                Some(f) if f.names() == names.as_slice() => row.extend(f.values().iter().map(|v| v.to_string())),
                Some(_) => {
                    return Err(Error::Schema(format!(
                        "session {}: {m} features do not match the schema",
                        set.session_id
                    )))
                }
                None => row.extend(std::iter::repeat_n(ABSENT.to_string(), names.len())),
            }
        }
        w.write_record(&row).map_err(|e| csv_err("output", e))?;
    }
    w.flush().map_err(|e| Error::io("output", e))
}

/// Reads a feature CSV and derives the schema from its header.
pub fn read_feature_sets_csv<R: Read>(input: R, context: &str) -> Result<(FeatureSchema, Vec<FeatureSet>)> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| csv_err(context, e))?.clone();
    if header.get(0) != Some("session_id") {
        return Err(Error::parse(format!("{context}:1"), "first column must be session_id"));
    }
    let mut modalities: Vec<(Modality, Vec<String>)> = Vec::new();
    for col in header.iter().skip(1) {
        let (m, name) = col
            .split_once('.')
            .ok_or_else(|| Error::parse(format!("{context}:1"), format!("column `{col}` is not modality.feature")))?;
        let m = match m {
            "physio" => Modality::Physio,
            "movement" => Modality::Movement,
            "acoustic" => Modality::Acoustic,
            other => return Err(Error::parse(format!("{context}:1"), format!("unknown modality `{other}`"))),
        };
        match modalities.last_mut() {
            Some((last, names)) if *last == m => names.push(name.to_string()),
            _ => {
                if modalities.iter().any(|(x, _)| *x == m) {
                    return Err(Error::parse(format!("{context}:1"), format!("columns of {m} are not contiguous")));
                }
                modalities.push((m, vec![name.to_string()]));
            }
        }
    }
    let schema = FeatureSchema { modalities };
    let mut sets = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(context, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let at = || format!("{context}:{line}");
        let mut set = FeatureSet::new(&rec[0]);
        let mut col = 1;
        for (m, names) in &schema.modalities {
            let cells: Vec<&str> = (col..col + names.len()).map(|i| rec.get(i).unwrap_or("")).collect();
            col += names.len();
            if cells.iter().all(|c| *c == ABSENT) {
                continue;
            }
            let values = cells
                .iter()
                .map(|c| c.trim().parse::<f64>().map_err(|_| Error::parse(at(), format!("`{c}` is not a number"))))
                .collect::<Result<Vec<_>>>()?;
            set.set(ModalityFeatures::new(*m, names.clone(), values).map_err(|e| Error::parse(at(), e.to_string()))?);
        }
        sets.push(set);
    }
    Ok((schema, sets))
}

fn parse_axis_value(raw: &str, pos: &[&str], neg: &[&str]) -> Option<bool> {
    let v = raw.trim().to_ascii_lowercase();
    if pos.contains(&v.as_str()) {
        Some(true)
    } else if neg.contains(&v.as_str()) {
        Some(false)
    } else {
        None
    }
}

/// `session_id,valence,arousal`; values are words (`positive`/`negative`,
/// `high`/`low`) or `1`/`0`.
pub fn read_labels_csv<R: Read>(input: R, context: &str) -> Result<BTreeMap<String, EmotionLabel>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| csv_err(context, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["session_id", "valence", "arousal"] {
        return Err(Error::parse(format!("{context}:1"), "header must be session_id,valence,arousal"));
    }
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(context, e))?;
        let at = format!("{context}:{}", rec.position().map(|p| p.line()).unwrap_or(0));
        let valence = parse_axis_value(&rec[1], &["positive", "1"], &["negative", "0"])
            .ok_or_else(|| Error::parse(&at, format!("bad valence `{}`", &rec[1])))?;
        let arousal = parse_axis_value(&rec[2], &["high", "1"], &["low", "0"])
            .ok_or_else(|| Error::parse(&at, format!("bad arousal `{}`", &rec[2])))?;
        let label = EmotionLabel {
            valence: if valence { Valence::Positive } else { Valence::Negative },
            arousal: if arousal { Arousal::High } else { Arousal::Low },
        };
        if out.insert(rec[0].to_string(), label).is_some() {
            return Err(Error::parse(at, format!("duplicate session `{}`", &rec[0])));
        }
    }
    Ok(out)
}

pub fn write_labels_csv<W: Write>(out: W, labels: &BTreeMap<String, EmotionLabel>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["session_id", "valence", "arousal"]).map_err(|e| csv_err("output", e))?;
    for (id, l) in labels {
        let v = if l.valence == Valence::Positive { "positive" } else { "negative" };
        let a = if l.arousal == Arousal::High { "high" } else { "low" };
        w.write_record([id.as_str(), v, a]).map_err(|e| csv_err("output", e))?;
    }
    w.flush().map_err(|e| Error::io("output", e))
}

fn read_jsonl<T: DeserializeOwned, R: BufRead>(input: R, context: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(context, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(format!("{context}:{}", i + 1), e.to_string()))?);
    }
    Ok(out)
}

/// One `{"t": .., "bpm": ..}` object per line.
pub fn read_hr_jsonl<R: BufRead>(input: R, context: &str) -> Result<HrSeries> {
    HrSeries::new(read_jsonl::<HrSample, _>(input, context)?)
}

/// One `{"t", "ax", "ay", "az", "gx", "gy", "gz"}` object per line.
pub fn read_imu_jsonl<R: BufRead>(input: R, context: &str) -> Result<ImuSeries> {
    ImuSeries::new(read_jsonl::<ImuSample, _>(input, context)?)
}

pub fn write_jsonl<T: serde::Serialize, W: Write>(mut out: W, items: &[T]) -> Result<()> {
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| Error::Model(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io("output", e))?;
    }
    Ok(())
}
