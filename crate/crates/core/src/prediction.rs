//! Prediction-level instability: SD of performance, pairwise disagreement,
//! Fleiss'-Kappa instability and pairwise Jensen-Shannon divergence.
//!
//! Disagreement and Kappa are both computed from per-item class tallies
//! `x_ij` (number of runs predicting class `j` on item `i`), which makes the
//! identity `I_κ · (1 − p_ε) = I_pwd` hold up to rounding.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::bundle::EnsembleBundle;
use crate::error::{Error, Result};
use crate::math;
use crate::measure::Measure;
use crate::pairs::PairMatrix;
use crate::stats;

/// Discrete predictions of `runs` models on `items` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    runs: usize,
    items: usize,
    num_classes: usize,
    labels: Vec<u32>,
}

impl PredictionSet {
    /// `labels[i]` holds run `i`'s predictions.
    pub fn new(labels: &[Vec<u32>], num_classes: usize) -> Result<Self> {
        let items = labels.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(labels.len() * items);
        for (run, row) in labels.iter().enumerate() {
            if row.len() != items {
                return Err(Error::LengthMismatch {
                    expected: items,
                    found: row.len(),
                });
            }
            if let Some(index) = row.iter().position(|&l| l as usize >= num_classes) {
                return Err(Error::LabelOutOfRange {
                    context: format!("prediction set run {run}"),
                    index,
                    label: row[index],
                    num_classes,
                });
            }
            flat.extend_from_slice(row);
        }
        Ok(PredictionSet {
            runs: labels.len(),
            items,
            num_classes,
            labels: flat,
        })
    }

    pub(crate) fn from_validated(runs: usize, items: usize, num_classes: usize, labels: Vec<u32>) -> Self {
        debug_assert_eq!(labels.len(), runs * items);
        PredictionSet {
            runs,
            items,
            num_classes,
            labels,
        }
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn run(&self, i: usize) -> &[u32] {
        &self.labels[i * self.items..(i + 1) * self.items]
    }

    /// A multiset of runs (indices may repeat).
    pub fn select_runs(&self, members: &[usize]) -> PredictionSet {
        let mut labels = Vec::with_capacity(members.len() * self.items);
        for &i in members {
            labels.extend_from_slice(self.run(i));
        }
        PredictionSet {
            runs: members.len(),
            items: self.items,
            num_classes: self.num_classes,
            labels,
        }
    }

    /// `x_ij`: item-major counts of runs predicting class `j` on item `i`.
    fn tallies(&self) -> Vec<u64> {
        let k = self.num_classes;
        let mut x = vec![0u64; self.items * k];
        for run in 0..self.runs {
            for (item, &label) in self.run(run).iter().enumerate() {
                x[item * k + label as usize] += 1;
            }
        }
        x
    }

    fn require_pairs(&self) -> Result<()> {
        if self.runs < 2 {
            return Err(Error::TooFewRuns {
                required: 2,
                found: self.runs,
            });
        }
        if self.items == 0 {
            return Err(Error::InvalidParameter {
                name: "items",
                reason: "prediction set has no items".into(),
            });
        }
        Ok(())
    }
}

/// Class probabilities of `runs` models on `items` samples over `classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilitySet {
    runs: usize,
    items: usize,
    classes: usize,
    probs: Vec<f64>,
}

impl ProbabilitySet {
    /// `probs[i]` is run `i`'s row-major items × classes table.
    pub fn new(probs: &[Vec<f64>], items: usize, classes: usize) -> Result<Self> {
        let mut flat = Vec::with_capacity(probs.len() * items * classes);
        for (run, table) in probs.iter().enumerate() {
            if table.len() != items * classes {
                return Err(Error::LengthMismatch {
                    expected: items * classes,
                    found: table.len(),
                });
            }
            for (row, p) in table.chunks(classes).enumerate() {
                let sum: f64 = p.iter().sum();
                if p.iter().any(|v| !(*v >= 0.0))
                    || (sum - 1.0).abs() > crate::bundle::PROBABILITY_SUM_TOLERANCE
                {
                    return Err(Error::InvalidProbabilityRow {
                        run_id: format!("#{run}"),
                        row,
                        reason: format!("is not a distribution (sum {sum})"),
                    });
                }
            }
            flat.extend_from_slice(table);
        }
        Ok(ProbabilitySet {
            runs: probs.len(),
            items,
            classes,
            probs: flat,
        })
    }

    pub(crate) fn from_validated(runs: usize, items: usize, classes: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), runs * items * classes);
        ProbabilitySet {
            runs,
            items,
            classes,
            probs,
        }
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn row(&self, run: usize, item: usize) -> &[f64] {
        let start = (run * self.items + item) * self.classes;
        &self.probs[start..start + self.classes]
    }

    /// Mean JSD over items for every run pair.
    pub fn pair_means(&self) -> PairMatrix {
        PairMatrix::build(self.runs, |i, j| {
            let sum: f64 = (0..self.items)
                .map(|k| jensen_shannon(self.row(i, k), self.row(j, k)))
                .sum();
            sum / self.items as f64
        })
    }
}

/// Chance-corrected agreement terms of Fleiss' Kappa.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgreementStats {
    /// Mean over items of the proportion of run pairs that agree.
    pub p_a: f64,
    /// Agreement expected from the pooled class marginals.
    pub p_epsilon: f64,
}

/// Disagreeing run pairs, summed over items, as an exact count.
fn disagreement_count(preds: &PredictionSet) -> u64 {
    let m = preds.runs as u64;
    let pairs = m * (m - 1) / 2;
    preds
        .tallies()
        .chunks(preds.num_classes)
        .map(|x| pairs - x.iter().map(|&c| c * c.saturating_sub(1) / 2).sum::<u64>())
        .sum()
}

/// Mean fraction of run pairs whose predictions differ, over all items.
pub fn pairwise_disagreement(preds: &PredictionSet) -> Result<f64> {
    preds.require_pairs()?;
    let (n, m) = (preds.items as u64, preds.runs as u64);
    Ok((2 * disagreement_count(preds)) as f64 / (n * m * (m - 1)) as f64)
}

pub fn agreement_stats(preds: &PredictionSet) -> Result<AgreementStats> {
    preds.require_pairs()?;
    let (n, m, k) = (preds.items as u64, preds.runs as u64, preds.num_classes);
    let x = preds.tallies();

    let sum_sq: u64 = x.iter().map(|c| c * c).sum();
    let p_a = (sum_sq - m * n) as f64 / (m * n * (m - 1)) as f64;

    let mut marginals = vec![0u64; k];
    for row in x.chunks(k) {
        for (c, &v) in marginals.iter_mut().zip(row) {
            *c += v;
        }
    }
    let total = (n * m) as f64;
    let p_epsilon = marginals
        .iter()
        .map(|&c| {
            let share = c as f64 / total;
            share * share
        })
        .sum();
    Ok(AgreementStats { p_a, p_epsilon })
}

/// `1 − κ`. Exceeds 1 when agreement is below chance.
pub fn fleiss_kappa_instability(preds: &PredictionSet) -> Result<f64> {
    let AgreementStats { p_a, p_epsilon } = agreement_stats(preds)?;
    kappa_instability_from(p_a, p_epsilon)
}

/// `1 − (p_a − p_ε)/(1 − p_ε)`; shared with the reference implementation so
/// both paths round identically.
pub fn kappa_instability_from(p_a: f64, p_epsilon: f64) -> Result<f64> {
    if p_epsilon >= 1.0 {
        return Err(Error::DegenerateMarginals);
    }
    Ok(1.0 - (p_a - p_epsilon) / (1.0 - p_epsilon))
}

/// Base-2 Jensen-Shannon divergence, in `[0, 1]`. Zero-probability terms
/// contribute nothing.
pub fn jensen_shannon(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let mid = 0.5 * (a + b);
        if a > 0.0 {
            acc += a * math::log2(a / mid);
        }
        if b > 0.0 {
            acc += b * math::log2(b / mid);
        }
    }
    (0.5 * acc).max(0.0)
}

/// Mean pairwise JSD over all run pairs and items.
pub fn pairwise_jsd(probs: &ProbabilitySet) -> Result<f64> {
    if probs.runs < 2 {
        return Err(Error::TooFewRuns {
            required: 2,
            found: probs.runs,
        });
    }
    Ok(probs.pair_means().mean())
}

/// Scalar prediction measures for one bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    /// Per-run performance scores in run order.
    pub scores: Vec<f64>,
    pub mean_score: f64,
    /// Measure values; a measure missing here has an entry in `notes`.
    pub values: BTreeMap<Measure, f64>,
    pub notes: Vec<(Measure, String)>,
}

impl PredictionReport {
    pub fn get(&self, measure: Measure) -> Option<f64> {
        self.values.get(&measure).copied()
    }
}

pub fn prediction_report(bundle: &EnsembleBundle) -> Result<PredictionReport> {
    let scores = bundle.performance_scores()?;
    let mut values = BTreeMap::new();
    let mut notes = Vec::new();

    values.insert(Measure::Sd, stats::sd_of_scores(&scores)?);

    let preds = bundle.prediction_set();
    values.insert(Measure::Pwd, pairwise_disagreement(&preds)?);
    match fleiss_kappa_instability(&preds) {
        Ok(v) => {
            if v > 1.0 {
                notes.push((
                    Measure::Kappa,
                    format!("value {v} exceeds 1: agreement is below chance (negative kappa)"),
                ));
            }
            values.insert(Measure::Kappa, v);
        }
        Err(e @ Error::DegenerateMarginals) => notes.push((Measure::Kappa, format!("{e}"))),
        Err(e) => return Err(e),
    }
    match bundle.probability_set() {
        Ok(probs) => {
            values.insert(Measure::Jsd, pairwise_jsd(&probs)?);
        }
        Err(e @ Error::MissingCapability { .. }) => notes.push((Measure::Jsd, format!("{e}"))),
        Err(e) => return Err(e),
    }

    Ok(PredictionReport {
        mean_score: stats::mean(&scores),
        scores,
        values,
        notes,
    })
}
