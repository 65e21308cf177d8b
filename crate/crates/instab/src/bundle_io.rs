//! On-disk bundles.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/gold.csv
//! <dir>/runs/<run_id>/predictions.csv
//! <dir>/runs/<run_id>/probabilities.mtx      (optional)
//! <dir>/runs/<run_id>/layers/layer_<ll>.mtx  (layer 00 = bottom)
//! ```
//!
//! Label files are CSV with a `sample_id,label` header, one row per sample
//! in order. Paths in the manifest are relative to the bundle directory and
//! use `/` separators.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};

use instability_core::{EnsembleBundle, MetricKind, RunRecord, TensorMatrix};
use serde::{Deserialize, Serialize};

use crate::imtx::{self, ImtxError};

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: invalid manifest: {reason}", path.display())]
    Manifest { path: PathBuf, reason: String },
    #[error("{owner}: {}: {source}", path.display())]
    Matrix {
        owner: String,
        path: PathBuf,
        #[source]
        source: ImtxError,
    },
    #[error("{owner}: {}: {reason}", path.display())]
    Labels {
        owner: String,
        path: PathBuf,
        reason: String,
    },
    #[error("{}: {source}", path.display())]
    Invalid {
        path: PathBuf,
        #[source]
        source: instability_core::Error,
    },
    #[error("run id {0:?} cannot be used as a directory name")]
    UnsafeRunId(String),
}

impl BundleError {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
        move |source| BundleError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub dataset_name: String,
    pub metric: MetricKind,
    pub num_classes: usize,
    pub layer_count: usize,
    pub gold: String,
    pub runs: Vec<RunEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEntry {
    pub id: String,
    pub seed: u64,
    pub predictions: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<String>,
    #[serde(default)]
    pub layers: Vec<String>,
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

impl Manifest {
    /// Every file the manifest references, manifest first.
    pub fn files(&self) -> Vec<&str> {
        let mut out = vec![MANIFEST, self.gold.as_str()];
        for run in &self.runs {
            out.push(&run.predictions);
            out.extend(run.probabilities.as_deref());
            out.extend(run.layers.iter().map(String::as_str));
        }
        out
    }
}

/// Resolves a manifest path, refusing anything that escapes the bundle.
fn resolve(dir: &Path, manifest_path: &Path, rel: &str) -> Result<PathBuf, BundleError> {
    let rel_path = Path::new(rel);
    let escapes = rel.is_empty()
        || rel_path
            .components()
            .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir));
    if escapes {
        return Err(BundleError::Manifest {
            path: manifest_path.to_path_buf(),
            reason: format!("path {rel:?} is not relative to the bundle"),
        });
    }
    Ok(rel.split('/').fold(dir.to_path_buf(), |p, part| p.join(part)))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, BundleError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(BundleError::io(&path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| BundleError::Manifest {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(BundleError::Manifest {
            path,
            reason: format!("unsupported format_version {}", manifest.format_version),
        });
    }
    Ok(manifest)
}

fn parse_labels(owner: &str, path: &Path, bytes: &[u8]) -> Result<Vec<u32>, BundleError> {
    let bad = |reason: String| BundleError::Labels {
        owner: owner.to_string(),
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["sample_id", "label"] {
        return Err(bad(format!("header must be `sample_id,label`, found {headers:?}")));
    }
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let id: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| bad(format!("row {row}: sample_id {:?} is not an integer", &record[0])))?;
        if id != row {
            return Err(bad(format!("row {row}: sample_id {id} out of order")));
        }
        let label: u32 = record[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("row {row}: label {:?} is not a non-negative integer", &record[1])))?;
        labels.push(label);
    }
    Ok(labels)
}

fn format_labels(labels: &[u32]) -> Vec<u8> {
    let mut out = String::from("sample_id,label\n");
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out.into_bytes()
}

fn read_file(path: &Path) -> Result<Vec<u8>, BundleError> {
    fs::read(path).map_err(BundleError::io(path))
}

fn read_matrix(owner: &str, path: &Path) -> Result<TensorMatrix, BundleError> {
    imtx::decode(&read_file(path)?).map_err(|source| BundleError::Matrix {
        owner: owner.to_string(),
        path: path.to_path_buf(),
        source,
    })
}

/// Run named by a validation error, if any.
fn offending_run(err: &instability_core::Error) -> Option<&str> {
    use instability_core::Error::*;
    match err {
        ShapeMismatch { run_id, .. } | InvalidProbabilityRow { run_id, .. } | ArgmaxMismatch { run_id, .. } => {
            Some(run_id)
        }
        DuplicateRunId(id) => Some(id),
        LabelOutOfRange { context, .. } => context.strip_prefix("run ")?.strip_suffix(" predictions"),
        _ => None,
    }
}

pub fn load_bundle(dir: &Path) -> Result<EnsembleBundle, BundleError> {
    let manifest = read_manifest(dir)?;
    let manifest_path = dir.join(MANIFEST);

    let gold_path = resolve(dir, &manifest_path, &manifest.gold)?;
    let gold = parse_labels("gold", &gold_path, &read_file(&gold_path)?)?;

    let mut runs = Vec::with_capacity(manifest.runs.len());
    let mut run_paths = BTreeMap::new();
    for entry in &manifest.runs {
        let owner = format!("run {}", entry.id);
        let pred_path = resolve(dir, &manifest_path, &entry.predictions)?;
        let predictions = parse_labels(&owner, &pred_path, &read_file(&pred_path)?)?;
        let probabilities = match &entry.probabilities {
            Some(rel) => Some(read_matrix(&owner, &resolve(dir, &manifest_path, rel)?)?),
            None => None,
        };
        let layers = entry
            .layers
            .iter()
            .map(|rel| read_matrix(&owner, &resolve(dir, &manifest_path, rel)?))
            .collect::<Result<Vec<_>, _>>()?;
        run_paths.insert(entry.id.clone(), pred_path.parent().unwrap_or(dir).to_path_buf());
        runs.push(RunRecord {
            run_id: entry.id.clone(),
            seed: entry.seed,
            predictions,
            probabilities,
            layers,
            tags: entry.tags.clone(),
        });
    }

    EnsembleBundle::new(
        manifest.dataset_name,
        manifest.metric,
        manifest.num_classes,
        manifest.layer_count,
        gold,
        runs,
    )
    .map_err(|source| {
        let path = offending_run(&source)
            .and_then(|id| run_paths.get(id).cloned())
            .unwrap_or_else(|| dir.to_path_buf());
        BundleError::Invalid { path, source }
    })
}

fn safe_run_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && !id.contains(['/', '\\', '\0'])
}

/// Manifest of the canonical layout for `bundle`.
pub fn canonical_manifest(bundle: &EnsembleBundle) -> Result<Manifest, BundleError> {
    let runs = bundle
        .runs()
        .iter()
        .map(|run| {
            if !safe_run_id(&run.run_id) {
                return Err(BundleError::UnsafeRunId(run.run_id.clone()));
            }
            let base = format!("runs/{}", run.run_id);
            Ok(RunEntry {
                id: run.run_id.clone(),
                seed: run.seed,
                predictions: format!("{base}/predictions.csv"),
                probabilities: run.probabilities.as_ref().map(|_| format!("{base}/probabilities.mtx")),
                layers: (0..run.layers.len())
                    .map(|l| format!("{base}/layers/layer_{l:02}.mtx"))
                    .collect(),
                tags: run.tags.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Manifest {
        format_version: FORMAT_VERSION,
        dataset_name: bundle.dataset_name().to_string(),
        metric: bundle.metric(),
        num_classes: bundle.num_classes(),
        layer_count: bundle.layer_count(),
        gold: "gold.csv".into(),
        runs,
    })
}

fn write_file(dir: &Path, rel: &str, bytes: &[u8]) -> Result<(), BundleError> {
    let path = rel.split('/').fold(dir.to_path_buf(), |p, part| p.join(part));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(BundleError::io(parent))?;
    }
    fs::write(&path, bytes).map_err(BundleError::io(&path))
}

pub fn save_bundle(bundle: &EnsembleBundle, dir: &Path) -> Result<(), BundleError> {
    let manifest = canonical_manifest(bundle)?;
    fs::create_dir_all(dir).map_err(BundleError::io(dir))?;
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_file(dir, MANIFEST, json.as_bytes())?;
    write_file(dir, &manifest.gold, &format_labels(bundle.gold()))?;
    for (run, entry) in bundle.runs().iter().zip(&manifest.runs) {
        write_file(dir, &entry.predictions, &format_labels(&run.predictions))?;
        if let (Some(p), Some(rel)) = (&run.probabilities, &entry.probabilities) {
            write_file(dir, rel, &imtx::encode(p))?;
        }
        for (layer, rel) in run.layers.iter().zip(&entry.layers) {
            write_file(dir, rel, &imtx::encode(layer))?;
        }
    }
    Ok(())
}
