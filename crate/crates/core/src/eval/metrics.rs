use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

fn check_lengths(truth: &[String], predicted: &[String]) -> Result<()> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Per-class scores over the sorted union of true and predicted labels.
/// Undefined ratios (no predictions, no support) are 0.
pub fn per_class_metrics(truth: &[String], predicted: &[String]) -> Result<Vec<ClassMetrics>> {
    check_lengths(truth, predicted)?;
    let labels: BTreeSet<&String> = truth.iter().chain(predicted).collect();
    Ok(labels
        .into_iter()
        .map(|label| {
            let tp = truth.iter().zip(predicted).filter(|(t, p)| *t == label && *p == label).count();
            let support = truth.iter().filter(|t| *t == label).count();
            let predicted_n = predicted.iter().filter(|p| *p == label).count();
            let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
            let precision = ratio(tp, predicted_n);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                label: label.clone(),
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect())
}

/// Support-weighted mean of per-class F1.
pub fn weighted_f1(truth: &[String], predicted: &[String]) -> Result<f64> {
    let per_class = per_class_metrics(truth, predicted)?;
    Ok(weighted_from(&per_class, truth.len()))
}

pub(crate) fn weighted_from(per_class: &[ClassMetrics], total: usize) -> f64 {
    per_class.iter().map(|m| m.f1 * m.support as f64).sum::<f64>() / total as f64
}

/// `m[i][j]` counts records of true label `label_order[i]` predicted as
/// `label_order[j]`.
pub fn confusion_matrix(truth: &[String], predicted: &[String], label_order: &[String]) -> Result<Vec<Vec<u64>>> {
    check_lengths(truth, predicted)?;
    let index = |l: &String| {
        label_order
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| Error::UnknownLabel(l.clone()))
    };
    let mut m = vec![vec![0u64; label_order.len()]; label_order.len()];
    for (t, p) in truth.iter().zip(predicted) {
        m[index(t)?][index(p)?] += 1;
    }
    Ok(m)
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn hand_computed_weighted_f1() {
        // a: p=1, r=1/2, f1=2/3. b: p=1/2, r=1, f1=2/3.
        let f = weighted_f1(&s(&["a", "a", "b"]), &s(&["a", "b", "b"])).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_all_wrong() {
        let t = s(&["a", "b", "b", "c"]);
        assert_eq!(weighted_f1(&t, &t).unwrap(), 1.0);
        assert_eq!(weighted_f1(&t, &s(&["z", "z", "z", "z"])).unwrap(), 0.0);
        assert!(matches!(weighted_f1(&t, &t[..2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn confusion_entries() {
        let order = s(&["a", "b"]);
        let m = confusion_matrix(&s(&["a", "a", "b"]), &s(&["a", "b", "b"]), &order).unwrap();
        assert_eq!(m, vec![vec![1, 1], vec![0, 1]]);
        assert!(matches!(
            confusion_matrix(&s(&["a"]), &s(&["q"]), &order),
            Err(Error::UnknownLabel(l)) if l == "q"
        ));
    }

    #[test]
    fn population_std() {
        let (m, sd) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, sd), (2.0, 1.0));
    }

    proptest! {
        #[test]
        fn confusion_totals_and_f1_range(pairs in prop::collection::vec((0u8..4, 0u8..4), 1..60)) {
            let t: Vec<String> = pairs.iter().map(|p| p.0.to_string()).collect();
            let p: Vec<String> = pairs.iter().map(|p| p.1.to_string()).collect();
            let order: Vec<String> = (0..4).map(|i: u8| i.to_string()).collect();
            let m = confusion_matrix(&t, &p, &order).unwrap();
            prop_assert_eq!(m.iter().flatten().sum::<u64>() as usize, t.len());
            for (i, row) in m.iter().enumerate() {
                prop_assert_eq!(row.iter().sum::<u64>() as usize, t.iter().filter(|x| **x == order[i]).count());
            }
            let f = weighted_f1(&t, &p).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}
