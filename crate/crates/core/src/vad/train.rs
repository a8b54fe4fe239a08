//! Pegasos-style stochastic subgradient training for the linear SVM.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LinearSvmModel, MIN_STD};
use crate::error::{Error, Result};

/// Feature rows with `+1` (positive / speech) or `-1` labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
}

impl LabeledSet {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<i8>) -> Result<Self> {
        let set = LabeledSet { features, labels };
        set.validate()?;
        Ok(set)
    }

    pub fn push(&mut self, x: Vec<f64>, y: i8) {
        self.features.push(x);
        self.labels.push(y);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.labels.len() {
            return Err(Error::Training(format!(
                "{} feature rows but {} labels",
                self.features.len(),
                self.labels.len()
            )));
        }
        let dim = self.dim();
        for (i, (x, &y)) in self.features.iter().zip(&self.labels).enumerate() {
            if x.len() != dim {
                return Err(Error::Training(format!(
                    "row {i} has {} features, expected {dim}",
                    x.len()
                )));
            }
            if y != 1 && y != -1 {
                return Err(Error::Training(format!("row {i} has label {y}, expected +1 or -1")));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Training(format!("row {i} has a non-finite feature")));
            }
        }
        Ok(())
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&1) && self.labels.contains(&-1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmHyper {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmHyper {
    fn default() -> Self {
        SvmHyper {
            lambda: 1e-4,
            epochs: 20,
            seed: 42,
        }
    }
}

/// Primal objective after each epoch, evaluated over the training set in
/// its original order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epoch_objectives: Vec<f64>,
}

impl TrainingReport {
    /// Largest epoch-to-epoch increase of the objective, as a fraction of
    /// the first epoch's objective.
    pub fn max_relative_increase(&self) -> f64 {
        let Some(&first) = self.epoch_objectives.first() else {
            return 0.0;
        };
        self.epoch_objectives
            .windows(2)
            .map(|w| (w[1] - w[0]) / first.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

fn column_stats(features: &[Vec<f64>], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for x in features {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for x in features {
        for j in 0..dim {
            let d = x[j] - mean[j];
            var[j] += d * d;
        }
    }
    let std = var
        .into_iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s < MIN_STD {
                1.0
            } else {
                s
            }
        })
        .collect();
    (mean, std)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn objective(w: &[f64], rows: &[Vec<f64>], labels: &[i8], lambda: f64) -> f64 {
    let hinge: f64 = rows
        .iter()
        .zip(labels)
        .map(|(z, &y)| (1.0 - y as f64 * dot(w, z)).max(0.0))
        .sum();
    0.5 * lambda * dot(w, w) + hinge / rows.len() as f64
}

/// Trains on z-normalized features augmented with a constant 1 (the bias
/// is regularized with the weights). Each epoch visits a seeded shuffle of
/// the data; the returned model is the average iterate of the final epoch.
pub fn train_linear_svm(data: &LabeledSet, hyper: &SvmHyper) -> Result<(LinearSvmModel, TrainingReport)> {
    data.validate()?;
    if data.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if !data.has_both_classes() {
        return Err(Error::Training(
            "training set must contain both +1 and -1 labels".into(),
        ));
    }
    if !(hyper.lambda > 0.0 && hyper.lambda.is_finite()) || hyper.epochs == 0 {
        return Err(Error::Training(format!(
            "need lambda > 0 and epochs >= 1, got {} and {}",
            hyper.lambda, hyper.epochs
        )));
    }

    let dim = data.dim();
    let (mean, std) = column_stats(&data.features, dim);
    let rows: Vec<Vec<f64>> = data
        .features
        .iter()
        .map(|x| {
            let mut z: Vec<f64> = (0..dim).map(|j| (x[j] - mean[j]) / std[j]).collect();
            z.push(1.0);
            z
        })
        .collect();

    let lambda = hyper.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut w = vec![0.0; dim + 1];
    let mut avg = vec![0.0; dim + 1];
    let mut t = 0u64;
    let mut objectives = Vec::with_capacity(hyper.epochs);

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        avg.iter_mut().for_each(|a| *a = 0.0);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let y = data.labels[i] as f64;
            let z = &rows[i];
            let margin = y * dot(&w, z);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (v, zj) in w.iter_mut().zip(z) {
                    *v += eta * y * zj;
                }
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
            }
            for (a, v) in avg.iter_mut().zip(&w) {
                *a += v;
            }
        }
        let n = order.len() as f64;
        avg.iter_mut().for_each(|a| *a /= n);
        objectives.push(objective(&avg, &rows, &data.labels, lambda));
    }

    let bias = avg[dim];
    avg.truncate(dim);
    let mut metadata = BTreeMap::new();
    metadata.insert("trainer".into(), "pegasos".into());
    metadata.insert("lambda".into(), lambda.into());
    metadata.insert("epochs".into(), hyper.epochs.into());
    metadata.insert("seed".into(), hyper.seed.into());
    metadata.insert("samples".into(), data.len().into());
    let model = LinearSvmModel::new(avg, bias, mean, std)?.with_metadata(metadata);
    Ok((
        model,
        TrainingReport {
            epoch_objectives: objectives,
        },
    ))
}
