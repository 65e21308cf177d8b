//! Reference implementations used to cross-check the main measures.
//!
//! Everything here is computed the slow, direct way: double loops over run
//! pairs for prediction measures, and dense full SVDs / eigendecompositions
//! from nalgebra for representation measures, with no shared factorization
//! or algebraic shortcut.

use std::collections::BTreeMap;

use instability_core::linalg::Matrix;
use instability_core::prediction::kappa_instability_from;
use instability_core::{EnsembleBundle, Measure, MetricKind, OpVariant, RepresentationOptions};
use nalgebra::{DMatrix, SymmetricEigen};

/// Fraction of disagreeing run pairs, by direct enumeration.
pub fn pairwise_disagreement(labels: &[Vec<u32>]) -> f64 {
    let (m, n) = (labels.len(), labels[0].len());
    let mut disagreements: u64 = 0;
    for i in 0..m {
        for j in i + 1..m {
            for t in 0..n {
                if labels[i][t] != labels[j][t] {
                    disagreements += 1;
                }
            }
        }
    }
    (2 * disagreements) as f64 / (n as u64 * m as u64 * (m as u64 - 1)) as f64
}

/// `1 − κ` from ordered agreeing pairs and pooled class shares.
pub fn kappa_instability(labels: &[Vec<u32>], num_classes: usize) -> Option<f64> {
    let (m, n) = (labels.len(), labels[0].len());
    let mut agreeing: u64 = 0;
    for t in 0..n {
        for i in 0..m {
            for j in 0..m {
                if i != j && labels[i][t] == labels[j][t] {
                    agreeing += 1;
                }
            }
        }
    }
    let p_a = agreeing as f64 / (m as u64 * n as u64 * (m as u64 - 1)) as f64;
    let mut counts = vec![0u64; num_classes];
    for run in labels {
        for &l in run {
            counts[l as usize] += 1;
        }
    }
    let total = (n * m) as f64;
    let p_eps: f64 = counts
        .iter()
        .map(|&c| {
            let share = c as f64 / total;
            share * share
        })
        .sum();
    kappa_instability_from(p_a, p_eps).ok()
}

fn entropy2(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum()
}

/// Mean JSD over run pairs and items, via `H(M) − (H(P) + H(Q))/2`.
/// `probs[run]` holds n rows of k probabilities, row-major.
pub fn pairwise_jsd(probs: &[Vec<f64>], k: usize) -> f64 {
    let m = probs.len();
    let n = probs[0].len() / k;
    let mut total = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            for t in 0..n {
                let p = &probs[i][t * k..(t + 1) * k];
                let q = &probs[j][t * k..(t + 1) * k];
                let mid: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
                total += entropy2(&mid) - 0.5 * (entropy2(p) + entropy2(q));
            }
        }
    }
    total / (n * m * (m - 1) / 2) as f64
}

/// Accuracy, F1 (positive class 1) or MCC of one run.
pub fn performance(preds: &[u32], gold: &[u32], metric: MetricKind) -> f64 {
    let n = gold.len() as f64;
    let (mut tp, mut tn, mut fp, mut fneg) = (0.0, 0.0, 0.0, 0.0);
    let mut correct = 0.0;
    for (&p, &g) in preds.iter().zip(gold) {
        if p == g {
            correct += 1.0;
        }
        match (p == 1, g == 1) {
            (true, true) => tp += 1.0,
            (false, false) => tn += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fneg += 1.0,
        }
    }
    match metric {
        MetricKind::Accuracy => correct / n,
        MetricKind::F1 => {
            let d = 2.0 * tp + fp + fneg;
            if d == 0.0 {
                0.0
            } else {
                2.0 * tp / d
            }
        }
        MetricKind::Mcc => {
            let d = ((tp + fp) * (tp + fneg) * (tn + fp) * (tn + fneg)).sqrt();
            if d == 0.0 {
                0.0
            } else {
                (tp * tn - fp * fneg) / d
            }
        }
    }
}

/// Sample standard deviation (n − 1 denominator), two-pass.
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    out
}

fn singular_values(x: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = x.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Linear CKA distance through HSIC with an explicit centering matrix.
pub fn cka_distance(x: &Matrix, y: &Matrix) -> f64 {
    let (x, y) = (to_dmatrix(x), to_dmatrix(y));
    let n = x.nrows();
    let h = DMatrix::<f64>::identity(n, n) - DMatrix::<f64>::from_element(n, n, 1.0 / n as f64);
    let k = &h * (&x * x.transpose()) * &h;
    let l = &h * (&y * y.transpose()) * &h;
    let hsic = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a * b).trace();
    1.0 - hsic(&k, &l) / (hsic(&k, &k) * hsic(&l, &l)).sqrt()
}

/// Orthogonal Procrustes distance from the nuclear norm of `XᵀY`.
pub fn op_distance(x: &Matrix, y: &Matrix, variant: OpVariant) -> f64 {
    let (x, y) = (centered(&to_dmatrix(x)), centered(&to_dmatrix(y)));
    let nuclear: f64 = singular_values(&(x.transpose() * &y)).iter().sum();
    let denom = match variant {
        OpVariant::Corrected => x.norm() * y.norm(),
        OpVariant::Literal => (x.transpose() * &x).norm() * (y.transpose() * &y).norm(),
    };
    1.0 - nuclear / denom
}

/// Inverse square root of a symmetric positive definite matrix.
fn inv_sqrt(c: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(c);
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// SVD-reduced data: the leading directions holding `threshold` of the
/// variance (all numerically nonzero ones when `threshold` is 1).
fn reduce(x: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    let svd = x.clone().svd(true, false);
    let u = svd.u.expect("left vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = s[0];
    let kept: Vec<usize> = (0..s.len()).filter(|&i| s[i] > 1e-10 * smax).collect();
    let total: f64 = kept.iter().map(|&i| s[i] * s[i]).sum();
    let mut acc = 0.0;
    let mut r = kept.len();
    if threshold < 1.0 {
        for (pos, &i) in kept.iter().enumerate() {
            acc += s[i] * s[i];
            if acc >= threshold * total {
                r = pos + 1;
                break;
            }
        }
    }
    let mut out = DMatrix::zeros(x.nrows(), r);
    for c in 0..r {
        out.set_column(c, &(u.column(order[c]) * s[c]));
    }
    out
}

/// Canonical correlations by whitening the covariance blocks.
pub fn canonical_correlations(x: &Matrix, y: &Matrix, threshold: f64) -> Vec<f64> {
    let x = reduce(&centered(&to_dmatrix(x)), threshold);
    let y = reduce(&centered(&to_dmatrix(y)), threshold);
    let cxx = x.transpose() * &x;
    let cyy = y.transpose() * &y;
    let cxy = x.transpose() * &y;
    let t = inv_sqrt(cxx) * cxy * inv_sqrt(cyy);
    let mut rho = singular_values(&t);
    rho.truncate(x.ncols().min(y.ncols()));
    rho.iter().map(|r| r.clamp(0.0, 1.0)).collect()
}

pub fn svcca_distance(x: &Matrix, y: &Matrix, threshold: f64) -> f64 {
    let rho = canonical_correlations(x, y, threshold);
    1.0 - rho.iter().sum::<f64>() / rho.len() as f64
}

pub fn cca_distance(x: &Matrix, y: &Matrix) -> f64 {
    svcca_distance(x, y, 1.0)
}

pub fn representation_distance(measure: Measure, x: &Matrix, y: &Matrix, options: &RepresentationOptions) -> f64 {
    match measure {
        Measure::Cka => cka_distance(x, y),
        Measure::Op => op_distance(x, y, options.op_variant),
        Measure::Svcca => svcca_distance(x, y, options.svcca_threshold),
        other => panic!("{other} is not a representation measure"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleScores {
    /// Scalar prediction measures; kappa is absent when undefined and JSD
    /// when the bundle lacks probabilities.
    pub prediction: BTreeMap<Measure, f64>,
    /// Per-layer mean pairwise distance for each representation measure.
    pub profiles: BTreeMap<Measure, Vec<f64>>,
}

/// Every measure on `bundle`, recomputed by the reference routines.
pub fn oracle_measures(bundle: &EnsembleBundle, options: &RepresentationOptions) -> OracleScores {
    let labels: Vec<Vec<u32>> = bundle.runs().iter().map(|r| r.predictions.clone()).collect();
    let mut prediction = BTreeMap::new();
    let scores: Vec<f64> = labels
        .iter()
        .map(|p| performance(p, bundle.gold(), bundle.metric()))
        .collect();
    prediction.insert(Measure::Sd, sample_sd(&scores));
    prediction.insert(Measure::Pwd, pairwise_disagreement(&labels));
    if let Some(k) = kappa_instability(&labels, bundle.num_classes()) {
        prediction.insert(Measure::Kappa, k);
    }
    if bundle.has_probabilities() {
        let probs: Vec<Vec<f64>> = bundle
            .runs()
            .iter()
            .map(|r| r.probabilities.as_ref().expect("checked").values().to_vec())
            .collect();
        prediction.insert(Measure::Jsd, pairwise_jsd(&probs, bundle.num_classes()));
    }

    let m = bundle.m();
    let mut profiles = BTreeMap::new();
    for measure in Measure::REPRESENTATION.iter().copied() {
        let mut per_layer = Vec::with_capacity(bundle.layer_count());
        for l in 0..bundle.layer_count() {
            let mut sum = 0.0;
            for i in 0..m {
                for j in i + 1..m {
                    let x = bundle.runs()[i].layers[l].matrix();
                    let y = bundle.runs()[j].layers[l].matrix();
                    sum += representation_distance(measure, x, y, options);
                }
            }
            per_layer.push(sum / (m * (m - 1) / 2) as f64);
        }
        profiles.insert(measure, per_layer);
    }
    OracleScores { prediction, profiles }
}
