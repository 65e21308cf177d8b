//! In-memory ensemble bundle: per-run predictions, probabilities and layer
//! representations over one shared test set.
//!
//! [`EnsembleBundle::new`] is the only way to build a bundle and checks every
//! cross-run invariant, so downstream code can index without re-validating.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::prediction::{PredictionSet, ProbabilitySet};
use crate::stats;

/// Tolerance on probability row sums.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum MetricKind {
    #[default]
    Accuracy,
    F1,
    Mcc,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::F1 => "f1",
            MetricKind::Mcc => "mcc",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "accuracy" | "acc" => Ok(MetricKind::Accuracy),
            "f1" => Ok(MetricKind::F1),
            "mcc" => Ok(MetricKind::Mcc),
            other => Err(Error::InvalidParameter {
                name: "metric",
                reason: format!("unknown metric {other:?}"),
            }),
        }
    }
}

/// Storage precision of a matrix payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

/// A finite real matrix together with the precision it is stored at.
///
/// Values are always held as `f64`; an `F32` matrix only holds values that
/// are exactly representable in `f32`, so storing it loses nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorMatrix {
    precision: Precision,
    matrix: Matrix,
}

impl TensorMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, precision: Precision) -> Result<Self> {
        TensorMatrix::from_matrix(Matrix::new(rows, cols, values)?, precision)
    }

    pub fn from_matrix(matrix: Matrix, precision: Precision) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::NonFinite {
                context: format!("{}x{} matrix", matrix.rows(), matrix.cols()),
            });
        }
        if precision == Precision::F32
            && matrix.as_slice().iter().any(|&v| v as f32 as f64 != v)
        {
            return Err(Error::InvalidParameter {
                name: "precision",
                reason: "values not representable as float32".into(),
            });
        }
        Ok(TensorMatrix { precision, matrix })
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn values(&self) -> &[f64] {
        self.matrix.as_slice()
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    fn select_rows(&self, rows: &[usize]) -> TensorMatrix {
        TensorMatrix {
            precision: self.precision,
            matrix: self.matrix.select_rows(rows),
        }
    }
}

/// One fine-tuning run evaluated on the shared test set.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: String,
    pub seed: u64,
    pub predictions: Vec<u32>,
    /// n × k class probabilities, if the run logged them.
    pub probabilities: Option<TensorMatrix>,
    /// Layer representations, bottom layer first, each n × e_l.
    pub layers: Vec<TensorMatrix>,
    pub tags: BTreeMap<String, String>,
}

impl RunRecord {
    fn select_items(&self, rows: &[usize]) -> RunRecord {
        RunRecord {
            run_id: self.run_id.clone(),
            seed: self.seed,
            predictions: rows.iter().map(|&r| self.predictions[r]).collect(),
            probabilities: self.probabilities.as_ref().map(|p| p.select_rows(rows)),
            layers: self.layers.iter().map(|l| l.select_rows(rows)).collect(),
            tags: self.tags.clone(),
        }
    }
}

/// `m ≥ 2` runs sharing n, k, L and per-layer widths, plus gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleBundle {
    dataset_name: String,
    metric: MetricKind,
    num_classes: usize,
    layer_count: usize,
    gold: Vec<u32>,
    runs: Vec<RunRecord>,
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn check_labels(context: &str, labels: &[u32], num_classes: usize) -> Result<()> {
    match labels.iter().position(|&l| l as usize >= num_classes) {
        Some(index) => Err(Error::LabelOutOfRange {
            context: context.to_string(),
            index,
            label: labels[index],
            num_classes,
        }),
        None => Ok(()),
    }
}

fn shape_error(run_id: &str, what: String, expected: usize, found: usize) -> Error {
    Error::ShapeMismatch {
        run_id: run_id.to_string(),
        what,
        expected,
        found,
    }
}

impl EnsembleBundle {
    pub fn new(
        dataset_name: impl Into<String>,
        metric: MetricKind,
        num_classes: usize,
        layer_count: usize,
        gold: Vec<u32>,
        runs: Vec<RunRecord>,
    ) -> Result<Self> {
        if runs.len() < 2 {
            return Err(Error::TooFewRuns {
                required: 2,
                found: runs.len(),
            });
        }
        if num_classes == 0 {
            return Err(Error::InvalidParameter {
                name: "num_classes",
                reason: "must be at least 1".into(),
            });
        }
        if metric != MetricKind::Accuracy && num_classes != 2 {
            return Err(Error::UnsupportedMetric {
                metric: metric.name(),
                num_classes,
            });
        }
        let n = gold.len();
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "gold",
                reason: "no samples".into(),
            });
        }
        check_labels("gold", &gold, num_classes)?;

        let mut seen = BTreeSet::new();
        let widths: Vec<usize> = runs[0].layers.iter().map(|l| l.cols()).collect();
        for run in &runs {
            let id = run.run_id.as_str();
            if !seen.insert(id) {
                return Err(Error::DuplicateRunId(run.run_id.clone()));
            }
            if run.predictions.len() != n {
                return Err(shape_error(id, "prediction count".into(), n, run.predictions.len()));
            }
            check_labels(&format!("run {id} predictions"), &run.predictions, num_classes)?;

            if let Some(p) = &run.probabilities {
                Self::check_probabilities(run, p, n, num_classes)?;
            }

            if run.layers.len() != layer_count {
                return Err(shape_error(id, "layer count".into(), layer_count, run.layers.len()));
            }
            for (l, (layer, &width)) in run.layers.iter().zip(&widths).enumerate() {
                if layer.rows() != n {
                    return Err(shape_error(id, format!("layer {l} rows"), n, layer.rows()));
                }
                if layer.cols() != width {
                    return Err(shape_error(id, format!("layer {l} width"), width, layer.cols()));
                }
            }
        }

        Ok(EnsembleBundle {
            dataset_name: dataset_name.into(),
            metric,
            num_classes,
            layer_count,
            gold,
            runs,
        })
    }

    fn check_probabilities(
        run: &RunRecord,
        p: &TensorMatrix,
        n: usize,
        num_classes: usize,
    ) -> Result<()> {
        let id = run.run_id.as_str();
        if p.rows() != n {
            return Err(shape_error(id, "probability rows".into(), n, p.rows()));
        }
        if p.cols() != num_classes {
            return Err(shape_error(id, "probability columns".into(), num_classes, p.cols()));
        }
        for row in 0..n {
            let values = p.matrix().row(row);
            if values.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidProbabilityRow {
                    run_id: id.to_string(),
                    row,
                    reason: "has a negative entry".into(),
                });
            }
            let sum: f64 = values.iter().sum();
            if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                return Err(Error::InvalidProbabilityRow {
                    run_id: id.to_string(),
                    row,
                    reason: format!("sums to {sum}"),
                });
            }
            let best = argmax(values) as u32;
            if best != run.predictions[row] {
                return Err(Error::ArgmaxMismatch {
                    run_id: id.to_string(),
                    row,
                    predicted: run.predictions[row],
                    argmax: best,
                });
            }
        }
        Ok(())
    }

    pub fn dataset_name(&self) -> &str {
        &self.dataset_name
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn layer_count(&self) -> usize {
        self.layer_count
    }

    pub fn gold(&self) -> &[u32] {
        &self.gold
    }

    pub fn runs(&self) -> &[RunRecord] {
        &self.runs
    }

    /// Number of test samples.
    pub fn n(&self) -> usize {
        self.gold.len()
    }

    /// Number of runs.
    pub fn m(&self) -> usize {
        self.runs.len()
    }

    pub fn layer_widths(&self) -> Vec<usize> {
        self.runs[0].layers.iter().map(|l| l.cols()).collect()
    }

    /// True when every run carries class probabilities.
    pub fn has_probabilities(&self) -> bool {
        self.runs.iter().all(|r| r.probabilities.is_some())
    }

    pub fn prediction_set(&self) -> PredictionSet {
        let labels = self.runs.iter().flat_map(|r| r.predictions.iter().copied()).collect();
        PredictionSet::from_validated(self.m(), self.n(), self.num_classes, labels)
    }

    /// Fails with a capability error when any run lacks probabilities.
    pub fn probability_set(&self) -> Result<ProbabilitySet> {
        let mut probs = Vec::with_capacity(self.m() * self.n() * self.num_classes);
        for run in &self.runs {
            match &run.probabilities {
                Some(p) => probs.extend_from_slice(p.values()),
                None => {
                    return Err(Error::MissingCapability {
                        measure: crate::Measure::Jsd,
                        reason: format!("run {} has no class probabilities", run.run_id),
                    })
                }
            }
        }
        Ok(ProbabilitySet::from_validated(
            self.m(),
            self.n(),
            self.num_classes,
            probs,
        ))
    }

    /// Per-run performance against the gold labels, in run order.
    pub fn performance_scores(&self) -> Result<Vec<f64>> {
        self.runs
            .iter()
            .map(|r| stats::performance_score(&r.predictions, &self.gold, self.metric, self.num_classes))
            .collect()
    }

    /// Restricts every run (and the gold labels) to the given test rows.
    pub fn select_items(&self, rows: &[usize]) -> Result<EnsembleBundle> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::InvalidParameter {
                name: "rows",
                reason: format!("row {bad} out of range for {} samples", self.n()),
            });
        }
        EnsembleBundle::new(
            self.dataset_name.clone(),
            self.metric,
            self.num_classes,
            self.layer_count,
            rows.iter().map(|&r| self.gold[r]).collect(),
            self.runs.iter().map(|r| r.select_items(rows)).collect(),
        )
    }

    /// Keeps the listed runs (distinct indices), in the given order.
    pub fn select_runs(&self, indices: &[usize]) -> Result<EnsembleBundle> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.m()) {
            return Err(Error::InvalidParameter {
                name: "runs",
                reason: format!("run index {bad} out of range for {} runs", self.m()),
            });
        }
        EnsembleBundle::new(
            self.dataset_name.clone(),
            self.metric,
            self.num_classes,
            self.layer_count,
            self.gold.clone(),
            indices.iter().map(|&i| self.runs[i].clone()).collect(),
        )
    }
}
