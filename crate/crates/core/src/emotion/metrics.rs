/// Mean of per-class recalls over the classes present in `labels`.
/// Returns 0 for empty input.
pub fn balanced_accuracy(predictions: &[bool], labels: &[bool]) -> f64 {
    assert_eq!(predictions.len(), labels.len(), "prediction/label length mismatch");
    let recalls = per_class_recall(predictions, labels);
    let present: Vec<f64> = recalls.into_iter().flatten().collect();
    if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    }
}

/// `[recall of negatives, recall of positives]`, `None` for an absent class.
pub fn per_class_recall(predictions: &[bool], labels: &[bool]) -> [Option<f64>; 2] {
    let mut hits = [0usize; 2];
    let mut totals = [0usize; 2];
    for (&p, &y) in predictions.iter().zip(labels) {
        let c = usize::from(y);
        totals[c] += 1;
        if p == y {
            hits[c] += 1;
        }
    }
    [0, 1].map(|c| (totals[c] > 0).then(|| hits[c] as f64 / totals[c] as f64))
}
