#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use instability_core::bundle::argmax;
use instability_core::linalg::Matrix;
use instability_core::{EnsembleBundle, MetricKind, Precision, RunRecord, TensorMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Approximately standard normal (sum of uniforms), enough for test data.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| gaussian(rng)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

pub struct BundleShape {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub widths: Vec<usize>,
    pub probabilities: bool,
    pub precision: Precision,
    pub metric: MetricKind,
}

impl BundleShape {
    pub fn random(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize, max_width: usize, max_layers: usize) -> Self {
        let k = rng.random_range(2..=4);
        BundleShape {
            n: rng.random_range(4..=max_n),
            k,
            m: rng.random_range(2..=max_m),
            widths: (0..rng.random_range(1..=max_layers))
                .map(|_| rng.random_range(1..=max_width))
                .collect(),
            probabilities: true,
            precision: if rng.random_bool(0.5) { Precision::F32 } else { Precision::F64 },
            metric: if k == 2 && rng.random_bool(0.5) {
                if rng.random_bool(0.5) {
                    MetricKind::F1
                } else {
                    MetricKind::Mcc
                }
            } else {
                MetricKind::Accuracy
            },
        }
    }
}

fn value(rng: &mut ChaCha8Rng, precision: Precision) -> f64 {
    let v = gaussian(rng);
    match precision {
        Precision::F32 => v as f32 as f64,
        Precision::F64 => v,
    }
}

/// A valid bundle with random labels, probabilities and representations.
pub fn random_bundle(rng: &mut ChaCha8Rng, shape: &BundleShape) -> EnsembleBundle {
    let (n, k) = (shape.n, shape.k);
    let gold: Vec<u32> = (0..n).map(|_| rng.random_range(0..k as u32)).collect();
    let runs = (0..shape.m)
        .map(|r| {
            let (predictions, probabilities) = if shape.probabilities {
                let mut probs = Vec::with_capacity(n * k);
                for _ in 0..n {
                    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let sum: f64 = raw.iter().sum();
                    probs.extend(raw.iter().map(|v| v / sum));
                }
                let preds = probs.chunks(k).map(|row| argmax(row) as u32).collect();
                (preds, Some(TensorMatrix::new(n, k, probs, Precision::F64).unwrap()))
            } else {
                ((0..n).map(|_| rng.random_range(0..k as u32)).collect(), None)
            };
            let layers = shape
                .widths
                .iter()
                .map(|&e| {
                    let data = (0..n * e).map(|_| value(rng, shape.precision)).collect();
                    TensorMatrix::new(n, e, data, shape.precision).unwrap()
                })
                .collect();
            let mut tags = BTreeMap::new();
            if rng.random_bool(0.5) {
                tags.insert("imm".to_string(), format!("method {}", r % 3));
                tags.insert("note".to_string(), "quoted \"value\", with comma".to_string());
            }
            RunRecord {
                run_id: format!("seed-{r}"),
                seed: rng.random(),
                predictions,
                probabilities,
                layers,
                tags,
            }
        })
        .collect();
    EnsembleBundle::new("random", shape.metric, k, shape.widths.len(), gold, runs).unwrap()
}

/// Relative path -> bytes for every file under `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
