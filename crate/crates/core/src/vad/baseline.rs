//! Frame-energy threshold detector used as the comparison baseline.

use crate::dsp::frame_log_energy;

use super::VadLabel;

/// Speech iff the frame's log energy exceeds `threshold`.
pub fn energy_baseline<F: AsRef<[f64]>>(frames: &[F], threshold: f64) -> Vec<VadLabel> {
    frames
        .iter()
        .map(|f| {
            if frame_log_energy(f.as_ref()) > threshold {
                VadLabel::Speech
            } else {
                VadLabel::NonSpeech
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyThreshold {
    pub threshold: f64,
    pub balanced_accuracy: f64,
}

/// Exhaustive scan for the threshold maximizing balanced accuracy on the
/// given log energies and `+1`/`-1` labels. Candidates are all midpoints
/// between adjacent distinct energies plus both extremes.
pub fn best_energy_threshold(energies: &[f64], labels: &[i8]) -> EnergyThreshold {
    assert_eq!(energies.len(), labels.len());
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));

    let score = |tp: usize, tn: usize| {
        let tpr = if positives == 0 { 1.0 } else { tp as f64 / positives as f64 };
        let tnr = if negatives == 0 { 1.0 } else { tn as f64 / negatives as f64 };
        (tpr + tnr) / 2.0
    };

    // threshold below everything: all frames speech
    let mut best = EnergyThreshold {
        threshold: f64::NEG_INFINITY,
        balanced_accuracy: score(positives, 0),
    };
    let (mut tp, mut tn) = (positives, 0);
    let mut i = 0;
    while i < order.len() {
        let e = energies[order[i]];
        // move every frame with this energy below the threshold
        while i < order.len() && energies[order[i]] == e {
            if labels[order[i]] == 1 {
                tp -= 1;
            } else {
                tn += 1;
            }
            i += 1;
        }
        let threshold = if i < order.len() {
            0.5 * (e + energies[order[i]])
        } else {
            f64::INFINITY
        };
        let acc = score(tp, tn);
        if acc > best.balanced_accuracy {
            best = EnergyThreshold {
                threshold,
                balanced_accuracy: acc,
            };
        }
    }
    best
}
