//! Synthetic ensembles with controllable instability.
//!
//! A shared base plays the role of the pre-trained model: gold labels, one
//! class-structured activation matrix per layer, and a linear readout on the
//! top layer. Each run perturbs the base with Gaussian noise of scale
//! `σ·(1 + l/L)` at layer `l` and `σ/√e` on the readout, so deeper layers
//! move more. Failed runs scale every perturbation by `failed_update_scale`
//! and blend their class probabilities toward the majority-class one-hot,
//! which pins their accuracy to the majority baseline.
//!
//! All draws come from one sequential stream in a fixed order that does not
//! depend on `σ` or on which runs fail, so configs differing only in those
//! share their random numbers.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bundle::{argmax, EnsembleBundle, MetricKind, Precision, RunRecord, TensorMatrix};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub dataset_name: String,
    /// Test samples.
    pub n: usize,
    /// Classes.
    pub k: usize,
    /// Width of each layer, bottom first.
    pub layer_widths: Vec<usize>,
    /// Runs.
    pub m: usize,
    /// Per-run perturbation scale σ.
    pub noise_scale: f64,
    /// `floor(failed_fraction · m)` runs (the last ones) are built as failed.
    pub failed_fraction: f64,
    /// Multiplier on failed runs' perturbations.
    pub failed_update_scale: f64,
    /// Weight of the majority-class one-hot in failed runs' probabilities.
    pub failed_blend: f64,
    /// Spread of the class centroids relative to unit within-class noise.
    pub class_separation: f64,
    /// Logit multiplier of the readout.
    pub readout_gain: f64,
    pub metric: MetricKind,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dataset_name: "synthetic".into(),
            n: 64,
            k: 2,
            layer_widths: vec![16, 16],
            m: 10,
            noise_scale: 0.1,
            failed_fraction: 0.0,
            failed_update_scale: 0.1,
            failed_blend: 0.9,
            class_separation: 1.0,
            readout_gain: 4.0,
            metric: MetricKind::Accuracy,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if self.n < 2 {
            return bad("n", "need at least 2 samples");
        }
        if self.k < 1 {
            return bad("k", "need at least 1 class");
        }
        if self.m < 2 {
            return bad("m", "need at least 2 runs");
        }
        if self.layer_widths.iter().any(|&w| w == 0) {
            return bad("layer_widths", "every layer needs width ≥ 1");
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad("noise_scale", "must be finite and ≥ 0");
        }
        for (name, v) in [
            ("failed_fraction", self.failed_fraction),
            ("failed_update_scale", self.failed_update_scale),
            ("failed_blend", self.failed_blend),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v} is not in [0, 1]"),
                });
            }
        }
        if !(self.class_separation.is_finite() && self.readout_gain.is_finite()) {
            return bad("class_separation", "must be finite");
        }
        if self.metric != MetricKind::Accuracy && self.k != 2 {
            return Err(Error::UnsupportedMetric {
                metric: self.metric.name(),
                num_classes: self.k,
            });
        }
        Ok(())
    }

    /// Number of runs built as failed.
    pub fn failed_run_count(&self) -> usize {
        math::floor(self.failed_fraction * self.m as f64) as usize
    }
}

fn normals<R: Rng>(rng: &mut R, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| math::exp(l - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Most frequent gold label, lowest index on ties.
fn majority_label(gold: &[u32], k: usize) -> u32 {
    let mut counts = vec![0usize; k];
    for &g in gold {
        counts[g as usize] += 1;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best as u32
}

pub fn generate_ensemble(config: &SynthConfig) -> Result<EnsembleBundle> {
    config.validate()?;
    let (n, k, m) = (config.n, config.k, config.m);
    let widths = &config.layer_widths;
    let depth = widths.len();
    let mut rng = rng::stream(config.seed, Purpose::Synthesis, 0);

    let gold: Vec<u32> = (0..n).map(|_| rng.random_range(0..k as u32)).collect();

    let mut base_layers = Vec::with_capacity(depth);
    let mut top_centroids = Vec::new();
    for &e in widths {
        let centroids: Vec<f64> = normals(&mut rng, k * e)
            .into_iter()
            .map(|v| v * config.class_separation)
            .collect();
        let noise = normals(&mut rng, n * e);
        let data: Vec<f64> = (0..n * e)
            .map(|idx| {
                let (row, col) = (idx / e, idx % e);
                centroids[gold[row] as usize * e + col] + noise[idx]
            })
            .collect();
        base_layers.push(data);
        top_centroids = centroids;
    }

    // Readout on the top layer: e_top × k, nearest-centroid style.
    let readout_width = widths.last().copied().unwrap_or(0);
    let readout: Vec<f64> = (0..readout_width * k)
        .map(|idx| {
            let (f, c) = (idx / k, idx % k);
            top_centroids[c * readout_width + f] / readout_width as f64
        })
        .collect();

    let majority = majority_label(&gold, k);
    let failed = config.failed_run_count();
    let sigma = config.noise_scale;
    let mut runs = Vec::with_capacity(m);
    for run in 0..m {
        let is_failed = run >= m - failed;
        let scale = if is_failed { config.failed_update_scale } else { 1.0 };

        let mut layers = Vec::with_capacity(depth);
        for (l, (&e, base)) in widths.iter().zip(&base_layers).enumerate() {
            let layer_sigma = scale * sigma * (1.0 + l as f64 / depth as f64);
            let noise = normals(&mut rng, n * e);
            let data: Vec<f64> = base.iter().zip(&noise).map(|(b, z)| b + layer_sigma * z).collect();
            layers.push(Matrix::new(n, e, data)?);
        }
        let readout_noise = normals(&mut rng, readout_width * k);

        let probabilities = match layers.last() {
            Some(top) => {
                let w_sigma = scale * sigma / math::sqrt(readout_width as f64);
                let weights: Vec<f64> = readout
                    .iter()
                    .zip(&readout_noise)
                    .map(|(w, z)| w + w_sigma * z)
                    .collect();
                let weights = Matrix::new(readout_width, k, weights)?;
                let logits = top.mul(&weights);
                let mut probs = Vec::with_capacity(n * k);
                for row in 0..n {
                    let scaled: Vec<f64> = logits.row(row).iter().map(|v| v * config.readout_gain).collect();
                    let mut p = softmax(&scaled);
                    if is_failed {
                        for (c, v) in p.iter_mut().enumerate() {
                            let hot = if c as u32 == majority { 1.0 } else { 0.0 };
                            *v = config.failed_blend * hot + (1.0 - config.failed_blend) * *v;
                        }
                    }
                    probs.extend(p);
                }
                probs
            }
            // without layers there is no readout input: uniform probabilities
            None => vec![1.0 / k as f64; n * k],
        };
        let predictions: Vec<u32> = probabilities.chunks(k).map(|p| argmax(p) as u32).collect();

        let mut tags = BTreeMap::new();
        tags.insert(
            "kind".to_string(),
            if is_failed { "failed" } else { "successful" }.to_string(),
        );
        runs.push(RunRecord {
            run_id: format!("run_{run:02}"),
            seed: config.seed.wrapping_mul(1000).wrapping_add(run as u64),
            predictions,
            probabilities: Some(TensorMatrix::new(n, k, probabilities, Precision::F64)?),
            layers: layers
                .into_iter()
                .map(|l| TensorMatrix::from_matrix(l, Precision::F64))
                .collect::<Result<Vec<_>>>()?,
            tags,
        });
    }

    EnsembleBundle::new(
        config.dataset_name.clone(),
        config.metric,
        k,
        depth,
        gold,
        runs,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let cfg = SynthConfig::default();
        assert_eq!(generate_ensemble(&cfg).unwrap(), generate_ensemble(&cfg).unwrap());
        let other = SynthConfig { seed: 1, ..cfg.clone() };
        assert_ne!(generate_ensemble(&cfg).unwrap(), generate_ensemble(&other).unwrap());
    }

    #[test]
    fn zero_noise_gives_identical_runs() {
        let cfg = SynthConfig {
            noise_scale: 0.0,
            ..Default::default()
        };
        let b = generate_ensemble(&cfg).unwrap();
        let first = &b.runs()[0];
        for r in b.runs() {
            assert_eq!(r.predictions, first.predictions);
            assert_eq!(r.layers, first.layers);
            assert_eq!(r.probabilities, first.probabilities);
        }
    }

    #[test]
    fn failed_runs_sit_at_majority_baseline() {
        let cfg = SynthConfig {
            m: 20,
            failed_fraction: 0.45,
            ..Default::default()
        };
        assert_eq!(cfg.failed_run_count(), 9);
        let b = generate_ensemble(&cfg).unwrap();
        let majority = majority_label(b.gold(), 2);
        let failed: Vec<&RunRecord> = b.runs().iter().filter(|r| r.tags["kind"] == "failed").collect();
        assert_eq!(failed.len(), 9);
        for r in failed {
            assert!(r.predictions.iter().all(|&p| p == majority));
        }
    }

    #[test]
    fn rejects_invalid_config() {
        for cfg in [
            SynthConfig { m: 1, ..Default::default() },
            SynthConfig { noise_scale: -1.0, ..Default::default() },
            SynthConfig { failed_fraction: 1.5, ..Default::default() },
            SynthConfig { layer_widths: vec![4, 0], ..Default::default() },
            SynthConfig { k: 3, metric: MetricKind::F1, ..Default::default() },
        ] {
            assert!(generate_ensemble(&cfg).is_err());
        }
    }
}
