use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Indices of the most positive segment, the most negative segment and the
/// final segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeakEnd {
    pub peak_positive: usize,
    pub peak_negative: usize,
    pub end: usize,
}

/// Ties resolve to the earliest index.
pub fn peak_end_select(scores: &[f64]) -> Result<PeakEnd> {
    if scores.is_empty() {
        return Err(Error::InsufficientData("peak-end selection needs at least one segment".into()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Schema(format!("segment score {i} is not finite")));
    }
    let mut hi = 0;
    let mut lo = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[hi] {
            hi = i;
        }
        if s < scores[lo] {
            lo = i;
        }
    }
    Ok(PeakEnd {
        peak_positive: hi,
        peak_negative: lo,
        end: scores.len() - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let pe = |s: &[f64]| peak_end_select(s).unwrap();
        assert_eq!(
            pe(&[0.1, 0.9, -0.5, 0.2]),
            PeakEnd { peak_positive: 1, peak_negative: 2, end: 3 }
        );
        assert_eq!(pe(&[0.4]), PeakEnd { peak_positive: 0, peak_negative: 0, end: 0 });
        assert_eq!(pe(&[0.3; 5]), PeakEnd { peak_positive: 0, peak_negative: 0, end: 4 });
        assert!(peak_end_select(&[]).is_err());
        assert!(peak_end_select(&[0.0, f64::NAN]).is_err());
    }
}
