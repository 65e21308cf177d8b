//! Representation-level instability.
//!
//! Each run's layer activations are centered once and factorized once
//! ([`Factorized`]); every pair distance is then computed from those
//! factors:
//!
//! * CCA: canonical correlations are the singular values of `U_xᵀ U_y`,
//!   where `U_x`, `U_y` are orthonormal bases of the column spaces.
//! * SVCCA: the same, after truncating each basis to the leading singular
//!   directions that explain the requested share of variance.
//! * Orthogonal Procrustes: `1 − ‖X̃ᵀỸ‖_*` on Frobenius-normalized inputs,
//!   with `‖XᵀY‖_* = ‖diag(s_x) U_xᵀ U_y diag(s_y)‖_*`.
//! * Linear CKA: `1 − ‖XᵀY‖_F² / (‖XᵀX‖_F ‖YᵀY‖_F)` from feature-space
//!   cross products when the width is at most n, otherwise from n × n Gram
//!   matrices.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::bundle::EnsembleBundle;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, ThinSvd};
use crate::math;
use crate::measure::{self, Measure};
use crate::pairs::PairMatrix;
use crate::par;

/// Share of variance SVCCA keeps by default.
pub const DEFAULT_SVCCA_THRESHOLD: f64 = 0.99;

/// Allowed absolute column-mean drift of a centered representation, relative
/// to the largest magnitude in the matrix.
const CENTERING_TOLERANCE: f64 = 1e-9;

/// Procrustes normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum OpVariant {
    /// Inputs scaled to unit Frobenius norm: `1 − ‖X̃ᵀỸ‖_*`, in `[0, 1]`.
    #[default]
    Corrected,
    /// Nuclear norm divided by `‖XᵀX‖_F ‖YᵀY‖_F`. Not scale invariant and
    /// negative on `(X, X)` whenever rank ≥ 2; kept for auditing.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepresentationOptions {
    pub svcca_threshold: f64,
    pub op_variant: OpVariant,
}

impl Default for RepresentationOptions {
    fn default() -> Self {
        RepresentationOptions {
            svcca_threshold: DEFAULT_SVCCA_THRESHOLD,
            op_variant: OpVariant::Corrected,
        }
    }
}

impl RepresentationOptions {
    fn validate(&self) -> Result<()> {
        if !(self.svcca_threshold > 0.0 && self.svcca_threshold <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "svcca_threshold",
                reason: format!("{} is not in (0, 1]", self.svcca_threshold),
            });
        }
        Ok(())
    }
}

/// A centered n × e activation matrix of one run at one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRepresentation {
    matrix: Matrix,
    layer_index: usize,
    run_id: String,
}

/// Subtracts column means. Needs at least two rows.
pub fn center(matrix: &Matrix) -> Result<LayerRepresentation> {
    if matrix.rows() < 2 {
        return Err(Error::InvalidParameter {
            name: "matrix",
            reason: format!("centering needs at least 2 rows, got {}", matrix.rows()),
        });
    }
    let means = matrix.column_means();
    let cols = matrix.cols();
    let mut data = matrix.as_slice().to_vec();
    for row in data.chunks_mut(cols) {
        for (v, mu) in row.iter_mut().zip(&means) {
            *v -= mu;
        }
    }
    let centered = Matrix::new(matrix.rows(), cols, data)?;
    LayerRepresentation::from_centered(centered)
}

impl LayerRepresentation {
    /// Wraps an already-centered matrix, checking the column means.
    pub fn from_centered(matrix: Matrix) -> Result<Self> {
        let scale = matrix.max_abs().max(1.0);
        if let Some((col, mean)) = matrix
            .column_means()
            .into_iter()
            .enumerate()
            .find(|(_, m)| m.abs() > CENTERING_TOLERANCE * scale)
        {
            return Err(Error::InvalidParameter {
                name: "matrix",
                reason: format!("column {col} has mean {mean}; representation is not centered"),
            });
        }
        Ok(LayerRepresentation {
            matrix,
            layer_index: 0,
            run_id: String::new(),
        })
    }

    pub fn with_owner(mut self, run_id: impl Into<String>, layer_index: usize) -> Self {
        self.run_id = run_id.into();
        self.layer_index = layer_index;
        self
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }
}

/// Canonical correlations of two representations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CcaResult {
    /// Descending, clamped to `[0, 1]`; length `min(d_x, d_y)`.
    pub correlations: Vec<f64>,
    /// Dimensions entering CCA on each side, after any truncation.
    pub retained_dims: (usize, usize),
}

impl CcaResult {
    pub fn mean_correlation(&self) -> f64 {
        self.correlations.iter().sum::<f64>() / self.correlations.len() as f64
    }

    pub fn distance(&self) -> f64 {
        1.0 - self.mean_correlation()
    }
}

/// Per-run, per-layer factors reused across all pairs.
#[derive(Debug, Clone)]
pub struct Factorized {
    rep: LayerRepresentation,
    frobenius: f64,
    svd: Option<ThinSvd>,
    /// `‖XᵀX‖_F`, computed in the cheaper space.
    self_kernel_norm: Option<f64>,
    /// `XXᵀ`, kept only when the representation is wider than it is tall.
    gram: Option<Matrix>,
}

#[derive(Debug, Clone, Copy)]
struct Needs {
    svd: bool,
    kernel: bool,
}

impl Needs {
    const ALL: Needs = Needs {
        svd: true,
        kernel: true,
    };

    fn for_measures(measures: &[Measure]) -> Needs {
        Needs {
            svd: measures.iter().any(|m| matches!(m, Measure::Svcca | Measure::Op)),
            kernel: measures.contains(&Measure::Cka),
        }
    }
}

impl Factorized {
    pub fn new(rep: LayerRepresentation) -> Self {
        Factorized::with_needs(rep, Needs::ALL)
    }

    fn with_needs(rep: LayerRepresentation, needs: Needs) -> Self {
        let x = &rep.matrix;
        let frobenius = x.frobenius_norm();
        let svd = needs.svd.then(|| linalg::thin_svd(x));
        let (self_kernel_norm, gram) = if needs.kernel {
            if x.cols() <= x.rows() {
                (Some(x.t_mul(x).frobenius_norm()), None)
            } else {
                let g = x.gram();
                (Some(g.frobenius_norm()), Some(g))
            }
        } else {
            (None, None)
        };
        Factorized {
            rep,
            frobenius,
            svd,
            self_kernel_norm,
            gram,
        }
    }

    pub fn representation(&self) -> &LayerRepresentation {
        &self.rep
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.svd().singular_values
    }

    fn svd(&self) -> &ThinSvd {
        self.svd.as_ref().expect("factorization built without SVD")
    }

    fn nonzero(&self) -> Result<()> {
        if self.frobenius == 0.0 {
            return Err(Error::DegenerateRepresentation(self.describe("is all zeros")));
        }
        Ok(())
    }

    fn describe(&self, what: &str) -> String {
        if self.rep.run_id.is_empty() {
            format!("representation {what}")
        } else {
            format!("run {} layer {} {what}", self.rep.run_id, self.rep.layer_index)
        }
    }
}

fn same_rows(x: &Factorized, y: &Factorized) -> Result<()> {
    let (a, b) = (x.rep.matrix.rows(), y.rep.matrix.rows());
    if a != b {
        return Err(Error::LengthMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Smallest number of leading singular directions whose squared singular
/// values reach `threshold` of the total.
pub fn truncation_rank(singular_values: &[f64], threshold: f64) -> usize {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let target = threshold * total;
    let mut acc = 0.0;
    for (k, s) in singular_values.iter().enumerate() {
        acc += s * s;
        if acc >= target {
            return k + 1;
        }
    }
    singular_values.len()
}

/// Canonical correlations between the leading `dims` basis directions of
/// each side (all of them when `None`).
fn canonical_correlations_truncated(
    x: &Factorized,
    y: &Factorized,
    dims: Option<(usize, usize)>,
) -> Result<CcaResult> {
    same_rows(x, y)?;
    let (sx, sy) = (x.svd(), y.svd());
    for (f, s) in [(x, sx), (y, sy)] {
        if s.rank() == 0 {
            return Err(Error::DegenerateRepresentation(f.describe("has rank 0")));
        }
    }
    let (dx, dy) = dims.unwrap_or((sx.rank(), sy.rank()));
    let ux = sx.left.leading_columns(dx);
    let uy = sy.left.leading_columns(dy);
    let mut correlations = linalg::singular_values(&ux.t_mul(&uy));
    correlations.truncate(dx.min(dy));
    correlations.iter_mut().for_each(|r| *r = r.clamp(0.0, 1.0));
    Ok(CcaResult {
        correlations,
        retained_dims: (dx, dy),
    })
}

pub fn canonical_correlations(x: &Factorized, y: &Factorized) -> Result<CcaResult> {
    canonical_correlations_truncated(x, y, None)
}

pub fn svcca(x: &Factorized, y: &Factorized, threshold: f64) -> Result<CcaResult> {
    let dims = (
        truncation_rank(x.singular_values(), threshold),
        truncation_rank(y.singular_values(), threshold),
    );
    canonical_correlations_truncated(x, y, Some(dims))
}

/// `‖XᵀY‖_*` from the thin SVD factors.
fn cross_nuclear_norm(x: &Factorized, y: &Factorized) -> f64 {
    let (sx, sy) = (x.svd(), y.svd());
    let mut core = sx.left.t_mul(&sy.left);
    for i in 0..core.rows() {
        for j in 0..core.cols() {
            let v = core.get(i, j) * sx.singular_values[i] * sy.singular_values[j];
            core.set(i, j, v);
        }
    }
    if core.rows() == 0 || core.cols() == 0 {
        return 0.0;
    }
    linalg::singular_values(&core).iter().sum()
}

fn op_factorized(x: &Factorized, y: &Factorized, variant: OpVariant) -> Result<f64> {
    same_rows(x, y)?;
    x.nonzero()?;
    y.nonzero()?;
    let nuclear = cross_nuclear_norm(x, y);
    let denom = match variant {
        OpVariant::Corrected => x.frobenius * y.frobenius,
        OpVariant::Literal => {
            let fourth = |f: &Factorized| {
                math::sqrt(f.singular_values().iter().map(|s| (s * s) * (s * s)).sum::<f64>())
            };
            fourth(x) * fourth(y)
        }
    };
    Ok(1.0 - nuclear / denom)
}

fn cka_factorized(x: &Factorized, y: &Factorized) -> Result<f64> {
    same_rows(x, y)?;
    x.nonzero()?;
    y.nonzero()?;
    let (a, b) = (&x.rep.matrix, &y.rep.matrix);
    let cross = match (&x.gram, &y.gram) {
        (Some(gx), Some(gy)) => gx.frobenius_dot(gy),
        _ if a.cols().max(b.cols()) > a.rows() => a.gram().frobenius_dot(&b.gram()),
        _ => a.t_mul(b).frobenius_norm_sq(),
    };
    let nx = x.self_kernel_norm.expect("factorization built without kernel norms");
    let ny = y.self_kernel_norm.expect("factorization built without kernel norms");
    Ok(1.0 - cross / (nx * ny))
}

/// Pair distance under `measure`, which must be a representation measure.
pub fn distance(
    measure: Measure,
    x: &Factorized,
    y: &Factorized,
    options: &RepresentationOptions,
) -> Result<f64> {
    match measure {
        Measure::Svcca => Ok(svcca(x, y, options.svcca_threshold)?.distance()),
        Measure::Op => op_factorized(x, y, options.op_variant),
        Measure::Cka => cka_factorized(x, y),
        other => Err(Error::InvalidParameter {
            name: "measure",
            reason: format!("{other} is not a representation measure"),
        }),
    }
}

/// `1 − mean ρ` over all canonical correlations.
pub fn cca_distance(x: &LayerRepresentation, y: &LayerRepresentation) -> Result<f64> {
    let (fx, fy) = (Factorized::new(x.clone()), Factorized::new(y.clone()));
    Ok(canonical_correlations(&fx, &fy)?.distance())
}

pub fn svcca_distance(
    x: &LayerRepresentation,
    y: &LayerRepresentation,
    variance_threshold: f64,
) -> Result<f64> {
    RepresentationOptions {
        svcca_threshold: variance_threshold,
        ..Default::default()
    }
    .validate()?;
    let (fx, fy) = (Factorized::new(x.clone()), Factorized::new(y.clone()));
    Ok(svcca(&fx, &fy, variance_threshold)?.distance())
}

pub fn op_distance(x: &LayerRepresentation, y: &LayerRepresentation) -> Result<f64> {
    op_distance_variant(x, y, OpVariant::Corrected)
}

pub fn op_distance_variant(
    x: &LayerRepresentation,
    y: &LayerRepresentation,
    variant: OpVariant,
) -> Result<f64> {
    let (fx, fy) = (Factorized::new(x.clone()), Factorized::new(y.clone()));
    op_factorized(&fx, &fy, variant)
}

pub fn cka_distance(x: &LayerRepresentation, y: &LayerRepresentation) -> Result<f64> {
    let needs = Needs {
        svd: false,
        kernel: true,
    };
    let fx = Factorized::with_needs(x.clone(), needs);
    let fy = Factorized::with_needs(y.clone(), needs);
    cka_factorized(&fx, &fy)
}

/// Per-layer instability scores of one measure, bottom layer first.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerInstabilityProfile {
    pub measure: Measure,
    pub layers: Vec<usize>,
    pub scores: Vec<f64>,
}

/// Centered, factorized representations of every run at selected layers.
#[derive(Debug, Clone)]
pub struct RepresentationCache {
    layers: Vec<usize>,
    /// `[layer position][run]`
    factors: Vec<Vec<Factorized>>,
    run_count: usize,
}

impl RepresentationCache {
    /// Centers and factorizes each run's representation at `layers`,
    /// computing only what `measures` require.
    pub fn build(bundle: &EnsembleBundle, layers: &[usize], measures: &[Measure]) -> Result<Self> {
        for &l in layers {
            if l >= bundle.layer_count() {
                return Err(Error::LayerOutOfRange {
                    layer: l,
                    layer_count: bundle.layer_count(),
                });
            }
        }
        let needs = Needs::for_measures(measures);
        let m = bundle.m();
        let jobs = layers.len() * m;
        let built = par::map_indexed(jobs, |job| -> Result<Factorized> {
            let (pos, run) = (job / m, job % m);
            let record = &bundle.runs()[run];
            let rep = center(record.layers[layers[pos]].matrix())?
                .with_owner(record.run_id.clone(), layers[pos]);
            Ok(Factorized::with_needs(rep, needs))
        });
        let mut factors: Vec<Vec<Factorized>> = Vec::with_capacity(layers.len());
        let mut iter = built.into_iter();
        for _ in layers {
            factors.push(iter.by_ref().take(m).collect::<Result<Vec<_>>>()?);
        }
        Ok(RepresentationCache {
            layers: layers.to_vec(),
            factors,
            run_count: m,
        })
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn run_count(&self) -> usize {
        self.run_count
    }

    fn position(&self, layer: usize) -> Result<usize> {
        self.layers
            .iter()
            .position(|&l| l == layer)
            .ok_or(Error::LayerOutOfRange {
                layer,
                layer_count: self.layers.len(),
            })
    }

    pub fn factors(&self, layer: usize) -> Result<&[Factorized]> {
        Ok(&self.factors[self.position(layer)?])
    }

    /// Distances between every run pair at one layer.
    pub fn pair_distances(
        &self,
        layer: usize,
        measure: Measure,
        options: &RepresentationOptions,
    ) -> Result<PairMatrix> {
        options.validate()?;
        let f = self.factors(layer)?;
        PairMatrix::try_build(self.run_count, |i, j| distance(measure, &f[i], &f[j], options))
    }
}

fn require_representation(measures: &[Measure]) -> Result<()> {
    match measures.iter().find(|m| !m.is_representation()) {
        Some(m) => Err(Error::InvalidParameter {
            name: "measures",
            reason: format!("{m} is not a representation measure"),
        }),
        None => Ok(()),
    }
}

/// Mean pair distance at one layer over all `C(m, 2)` run pairs.
pub fn layer_instability(
    bundle: &EnsembleBundle,
    measure: Measure,
    layer: usize,
    options: &RepresentationOptions,
) -> Result<f64> {
    require_representation(&[measure])?;
    let cache = RepresentationCache::build(bundle, &[layer], &[measure])?;
    Ok(cache.pair_distances(layer, measure, options)?.mean())
}

/// Profiles at the given layers (all layers when `layers` is `None`), one
/// per distinct requested measure in canonical order.
pub fn representation_profile(
    bundle: &EnsembleBundle,
    measures: &[Measure],
    layers: Option<&[usize]>,
    options: &RepresentationOptions,
) -> Result<Vec<LayerInstabilityProfile>> {
    let all: Vec<usize> = (0..bundle.layer_count()).collect();
    let distances = PairDistanceSet::compute(bundle, measures, layers.unwrap_or(&all), options)?;
    distances.profiles(None)
}

/// Run-pair distance matrices for several measures and layers, from which
/// profiles of any run subset or multiset can be read off.
#[derive(Debug, Clone)]
pub struct PairDistanceSet {
    measures: Vec<Measure>,
    layers: Vec<usize>,
    run_count: usize,
    /// `[measure position][layer position]`
    matrices: Vec<Vec<PairMatrix>>,
}

impl PairDistanceSet {
    pub fn compute(
        bundle: &EnsembleBundle,
        measures: &[Measure],
        layers: &[usize],
        options: &RepresentationOptions,
    ) -> Result<Self> {
        require_representation(measures)?;
        options.validate()?;
        let measures = measure::canonical(measures);
        let cache = RepresentationCache::build(bundle, layers, &measures)?;
        let matrices = measures
            .iter()
            .map(|&m| {
                layers
                    .iter()
                    .map(|&l| cache.pair_distances(l, m, options))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PairDistanceSet {
            measures,
            layers: layers.to_vec(),
            run_count: bundle.m(),
            matrices,
        })
    }

    pub fn measures(&self) -> &[Measure] {
        &self.measures
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn matrix(&self, measure: Measure, layer: usize) -> Option<&PairMatrix> {
        let mi = self.measures.iter().position(|&m| m == measure)?;
        let li = self.layers.iter().position(|&l| l == layer)?;
        Some(&self.matrices[mi][li])
    }

    /// Profiles over the runs in `members` (all runs when `None`). Members
    /// may repeat; a repeated run pairs with itself at distance zero.
    pub fn profiles(&self, members: Option<&[usize]>) -> Result<Vec<LayerInstabilityProfile>> {
        let all: Vec<usize> = (0..self.run_count).collect();
        let members = members.unwrap_or(&all);
        if members.len() < 2 {
            return Err(Error::TooFewRuns {
                required: 2,
                found: members.len(),
            });
        }
        Ok(self
            .measures
            .iter()
            .zip(&self.matrices)
            .map(|(&measure, per_layer)| LayerInstabilityProfile {
                measure,
                layers: self.layers.clone(),
                scores: per_layer.iter().map(|pm| pm.mean_over(members)).collect(),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(v: &[f64]) -> LayerRepresentation {
        let rows: Vec<&[f64]> = v.chunks(1).collect();
        center(&Matrix::from_rows(&rows).unwrap()).unwrap()
    }

    #[test]
    fn centering() {
        let c = column(&[1.0, 3.0]);
        assert_eq!(c.matrix().as_slice(), &[-1.0, 1.0]);
        let again = center(c.matrix()).unwrap();
        assert_eq!(again.matrix(), c.matrix());
        assert!(center(&Matrix::from_rows(&[&[1.0, 2.0]]).unwrap()).is_err());
        assert!(LayerRepresentation::from_centered(Matrix::from_rows(&[&[1.0], &[2.0]]).unwrap()).is_err());
    }

    #[test]
    fn one_dimensional_closed_forms() {
        let x = column(&[1.0, -1.0, 0.0]);
        let y = column(&[0.0, 1.0, -1.0]);
        assert!((cca_distance(&x, &y).unwrap() - 0.5).abs() < 1e-12);
        assert!((op_distance(&x, &y).unwrap() - 0.5).abs() < 1e-12);
        assert!((cka_distance(&x, &y).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn identical_inputs_have_zero_distance() {
        let x = center(
            &Matrix::from_rows(&[&[1.0, 2.0, 0.5], &[0.0, 1.0, 3.0], &[2.0, -1.0, 1.0], &[4.0, 0.0, -2.0]])
                .unwrap(),
        )
        .unwrap();
        assert!(cca_distance(&x, &x).unwrap().abs() < 1e-8);
        assert!(svcca_distance(&x, &x, 0.99).unwrap().abs() < 1e-8);
        assert!(op_distance(&x, &x).unwrap().abs() < 1e-10);
        assert!(cka_distance(&x, &x).unwrap().abs() < 1e-10);
        // the printed normalization does not give zero on (X, X)
        assert!(op_distance_variant(&x, &x, OpVariant::Literal).unwrap() != 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        let z = center(&Matrix::zeros(3, 2)).unwrap();
        let x = column(&[1.0, 2.0, 4.0]);
        assert!(matches!(op_distance(&z, &x), Err(Error::DegenerateRepresentation(_))));
        assert!(matches!(cka_distance(&x, &z), Err(Error::DegenerateRepresentation(_))));
        assert!(matches!(cca_distance(&z, &x), Err(Error::DegenerateRepresentation(_))));
        let short = column(&[1.0, 2.0]);
        assert!(matches!(cka_distance(&x, &short), Err(Error::LengthMismatch { .. })));
        assert!(svcca_distance(&x, &x, 0.0).is_err());
    }

    #[test]
    fn truncation_rank_thresholds() {
        // squared: 81, 16, 2, 1 → total 100
        let s = [9.0, 4.0, 1.4142135623730951, 1.0];
        assert_eq!(truncation_rank(&s, 0.8), 1);
        assert_eq!(truncation_rank(&s, 0.97), 2);
        assert_eq!(truncation_rank(&s, 0.99), 3);
        assert_eq!(truncation_rank(&s, 1.0), 4);
    }

    #[test]
    fn cka_gram_and_feature_paths_agree() {
        // 3 × 5: wider than tall uses Gram matrices.
        let a = center(
            &Matrix::from_rows(&[
                &[1.0, 0.0, 2.0, -1.0, 0.5],
                &[0.0, 3.0, 1.0, 1.0, -0.5],
                &[2.0, 1.0, -1.0, 0.0, 1.5],
            ])
            .unwrap(),
        )
        .unwrap();
        let b = center(
            &Matrix::from_rows(&[
                &[0.3, 1.0, -2.0, 0.0, 0.2],
                &[1.0, -1.0, 0.5, 2.0, 0.0],
                &[-0.5, 0.0, 1.0, 1.0, 1.0],
            ])
            .unwrap(),
        )
        .unwrap();
        let gram = cka_distance(&a, &b).unwrap();
        let cross = a.matrix().t_mul(b.matrix()).frobenius_norm_sq();
        let na = a.matrix().t_mul(a.matrix()).frobenius_norm();
        let nb = b.matrix().t_mul(b.matrix()).frobenius_norm();
        assert!((gram - (1.0 - cross / (na * nb))).abs() < 1e-14);
    }
}
