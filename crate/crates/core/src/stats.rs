//! Performance metrics, dispersion and correlation coefficients.
//!
//! Every function works on unit-scaled values; percent scaling is a
//! presentation concern handled by report renderers.

use alloc::format;
use alloc::vec::Vec;

use crate::bundle::MetricKind;
use crate::error::{Error, Result};
use crate::math;

/// Scores `predictions` against `gold`.
///
/// Accuracy works for any number of classes. F1 (on class 1) and MCC need
/// binary labels. MCC is 0 when any confusion-matrix margin is empty, and F1
/// is 0 when there are neither positive predictions nor positive labels.
pub fn performance_score(
    predictions: &[u32],
    gold: &[u32],
    metric: MetricKind,
    num_classes: usize,
) -> Result<f64> {
    if predictions.len() != gold.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            found: predictions.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::InvalidParameter {
            name: "gold",
            reason: "no samples".into(),
        });
    }
    for (context, labels) in [("predictions", predictions), ("gold", gold)] {
        if let Some((index, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= num_classes)
        {
            return Err(Error::LabelOutOfRange {
                context: context.into(),
                index,
                label,
                num_classes,
            });
        }
    }

    if metric == MetricKind::Accuracy {
        let correct = predictions.iter().zip(gold).filter(|(p, g)| p == g).count();
        return Ok(correct as f64 / gold.len() as f64);
    }
    if num_classes != 2 {
        return Err(Error::UnsupportedMetric {
            metric: metric.name(),
            num_classes,
        });
    }

    let (mut tp, mut tn, mut fp, mut fneg) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &g) in predictions.iter().zip(gold) {
        match (p, g) {
            (1, 1) => tp += 1,
            (0, 0) => tn += 1,
            (1, 0) => fp += 1,
            _ => fneg += 1,
        }
    }
    Ok(match metric {
        MetricKind::F1 => {
            let denom = 2 * tp + fp + fneg;
            if denom == 0 {
                0.0
            } else {
                (2 * tp) as f64 / denom as f64
            }
        }
        MetricKind::Mcc => {
            let (tp, tn, fp, fneg) = (tp as f64, tn as f64, fp as f64, fneg as f64);
            let margins = (tp + fp) * (tp + fneg) * (tn + fp) * (tn + fneg);
            if margins == 0.0 {
                0.0
            } else {
                (tp * tn - fp * fneg) / math::sqrt(margins)
            }
        }
        MetricKind::Accuracy => unreachable!(),
    })
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (divisor `m - 1`).
pub fn sd_of_scores(scores: &[f64]) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "scores",
            reason: format!("need at least 2 scores for a sample SD, got {}", scores.len()),
        });
    }
    if is_constant(scores) {
        return Ok(0.0);
    }
    let mu = mean(scores);
    let ss: f64 = scores.iter().map(|s| (s - mu) * (s - mu)).sum();
    Ok(math::sqrt(ss / (scores.len() - 1) as f64))
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 observations, got {}",
            x.len()
        )));
    }
    Ok(())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

/// Pearson product-moment correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (math::sqrt(sxx) * math::sqrt(syy))).clamp(-1.0, 1.0))
}

/// Kendall's tau-b, which corrects for ties in either argument.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_x, mut ties_y) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].partial_cmp(&x[j]);
            let dy = y[i].partial_cmp(&y[j]);
            let (dx, dy) = match (dx, dy) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::NonFinite { context: "kendall_tau input".into() }),
            };
            use core::cmp::Ordering::Equal;
            match (dx == Equal, dy == Equal) {
                (true, true) => {
                    ties_x += 1;
                    ties_y += 1;
                }
                (true, false) => ties_x += 1,
                (false, true) => ties_y += 1,
                (false, false) if dx == dy => concordant += 1,
                (false, false) => discordant += 1,
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as i64;
    if ties_x == pairs || ties_y == pairs {
        return Err(Error::UndefinedCorrelation("all values tied".into()));
    }
    let denom = math::sqrt(((pairs - ties_x) as f64) * ((pairs - ties_y) as f64));
    Ok(((concordant - discordant) as f64 / denom).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties receiving their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman's rank correlation (Pearson on average ranks).
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson_r(&average_ranks(x), &average_ranks(y))
}

/// Rescales to mean 0 and sample SD 1.
pub fn zscore_standardize(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "values",
            reason: "need at least 2 values to standardize".into(),
        });
    }
    if is_constant(values) {
        return Err(Error::UndefinedCorrelation(
            "cannot standardize a constant vector".into(),
        ));
    }
    let mu = mean(values);
    let sd = sd_of_scores(values)?;
    Ok(values.iter().map(|v| (v - mu) / sd).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn accuracy_perfect() {
        let g = [0, 1, 2, 1];
        assert_eq!(performance_score(&g, &g, MetricKind::Accuracy, 3).unwrap(), 1.0);
    }

    #[test]
    fn f1_hand_count() {
        let v = performance_score(&[1, 1, 0, 0], &[1, 1, 1, 0], MetricKind::F1, 2).unwrap();
        assert!(close(v, 0.8, 1e-15));
    }

    #[test]
    fn mcc_symmetric_confusion_is_zero() {
        let v = performance_score(&[1, 1, 0, 0], &[1, 0, 1, 0], MetricKind::Mcc, 2).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn mcc_degenerate_margin_is_zero() {
        let v = performance_score(&[1, 1, 1], &[1, 0, 1], MetricKind::Mcc, 2).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn binary_metrics_reject_multiclass() {
        let err = performance_score(&[0, 2], &[0, 1], MetricKind::Mcc, 3).unwrap_err();
        assert!(matches!(err, Error::UnsupportedMetric { num_classes: 3, .. }));
        let err = performance_score(&[0, 5], &[0, 1], MetricKind::Accuracy, 3).unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { label: 5, .. }));
    }

    #[test]
    fn sample_sd() {
        assert_eq!(sd_of_scores(&[0.7, 0.7, 0.7]).unwrap(), 0.0);
        assert!(close(sd_of_scores(&[0.7, 0.8]).unwrap(), 0.0707106781, 1e-10));
        assert!(sd_of_scores(&[0.7]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0];
        assert!(close(pearson_r(&x, &x).unwrap(), 1.0, 1e-15));
        assert!(close(pearson_r(&x, &[-1.0, -2.0, -3.0]).unwrap(), -1.0, 1e-15));
        assert!(close(pearson_r(&x, &[2.0, 4.0, 7.0]).unwrap(), 0.9933992678, 1e-10));
        assert!(close(pearson_r(&x, &[2.0, 4.0, 5.0]).unwrap(), 0.9819805061, 1e-10));
        assert!(matches!(
            pearson_r(&x, &[1.0, 1.0, 1.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn kendall_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(kendall_tau(&x, &x).unwrap(), 1.0);
        assert_eq!(kendall_tau(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!(close(kendall_tau(&x, &[1.0, 3.0, 2.0, 4.0, 5.0]).unwrap(), 0.8, 1e-15));
        assert!(kendall_tau(&x, &[2.0; 5]).is_err());
    }

    #[test]
    fn kendall_tau_b_with_ties() {
        // x has one tied pair, y none: C=5, D=0, n0=6, n1=1 → 5/sqrt(5·6)
        let t = kendall_tau(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(close(t, 5.0 / math::sqrt(30.0), 1e-15));
    }

    #[test]
    fn zscore_examples() {
        let z = zscore_standardize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(z, vec![-1.0, 0.0, 1.0]);
        let again = zscore_standardize(&z).unwrap();
        for (a, b) in z.iter().zip(&again) {
            assert!(close(*a, *b, 1e-12));
        }
        assert!(zscore_standardize(&[4.0, 4.0]).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..20).prop_flat_map(|n| {
            (
                proptest::collection::vec(-100.0f64..100.0, n),
                proptest::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn correlations_symmetric_and_affine_invariant(
            (x, y) in vec_pair(), a in 0.1f64..10.0, b in -50.0f64..50.0
        ) {
            let shifted: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            if let (Ok(r1), Ok(r2)) = (pearson_r(&x, &y), pearson_r(&y, &x)) {
                prop_assert!((r1 - r2).abs() < 1e-12);
                let r3 = pearson_r(&shifted, &y).unwrap();
                prop_assert!((r1 - r3).abs() < 1e-9);
            }
            if let (Ok(t1), Ok(t2)) = (kendall_tau(&x, &y), kendall_tau(&y, &x)) {
                prop_assert_eq!(t1, t2);
                let t3 = kendall_tau(&shifted, &y).unwrap();
                prop_assert_eq!(t1, t3);
            }
        }

        #[test]
        fn sd_translation_and_scale((x, _y) in vec_pair(), a in 0.1f64..10.0, b in -50.0f64..50.0) {
            let sd = sd_of_scores(&x).unwrap();
            let shifted: Vec<f64> = x.iter().map(|v| v + b).collect();
            let scaled: Vec<f64> = x.iter().map(|v| v * a).collect();
            prop_assert!((sd_of_scores(&shifted).unwrap() - sd).abs() < 1e-9);
            prop_assert!((sd_of_scores(&scaled).unwrap() - a * sd).abs() < 1e-9 * (1.0 + a * sd));
        }

        #[test]
        fn mcc_swap_symmetry(pairs in proptest::collection::vec((0u32..2, 0u32..2), 1..40)) {
            let (p, g): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
            let flip = |v: &[u32]| v.iter().map(|x| 1 - x).collect::<Vec<u32>>();
            let a = performance_score(&p, &g, MetricKind::Mcc, 2).unwrap();
            let b = performance_score(&flip(&p), &flip(&g), MetricKind::Mcc, 2).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn zscore_moments(x in proptest::collection::vec(-1e3f64..1e3, 2..30)) {
            if let Ok(z) = zscore_standardize(&x) {
                prop_assert!(mean(&z).abs() < 1e-12);
                prop_assert!((sd_of_scores(&z).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }
}
