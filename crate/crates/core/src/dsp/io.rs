use std::io::Write;

use serde::{Deserialize, Serialize};

use super::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    Csv,
    Jsonl,
}

/// `frame_index,timestamp,c0..cK` with a header row.
pub fn write_features_csv<W: Write>(mut out: W, features: &[FeatureVector]) -> std::io::Result<()> {
    let dim = features.first().map_or(0, |f| f.dim());
    write!(out, "frame_index,timestamp")?;
    for k in 0..dim {
        write!(out, ",c{k}")?;
    }
    writeln!(out)?;
    for f in features {
        write!(out, "{},{}", f.frame_index, f.timestamp)?;
        for v in &f.values {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_features_jsonl<W: Write>(mut out: W, features: &[FeatureVector]) -> std::io::Result<()> {
    for f in features {
        serde_json::to_writer(&mut out, f)?;
        writeln!(out)?;
    }
    Ok(())
}
