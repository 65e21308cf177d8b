//! Instability measures for ensembles of models fine-tuned from the same
//! pre-trained weights with different random seeds.
//!
//! The crate is `no_std` (with `alloc`) and covers the numerical side only:
//!
//! * [`prediction`]: SD of performance, pairwise disagreement, Fleiss'-Kappa
//!   based instability and pairwise Jensen-Shannon divergence.
//! * [`representation`]: centering, CCA/SVCCA, orthogonal Procrustes and
//!   linear CKA distances, aggregated per layer over all run pairs.
//! * [`validity`]: convergent and concurrent validity tests.
//! * [`analysis`]: Kendall's tau rankings across groups and bootstrap
//!   correlations between measures.
//! * [`synth`]: synthetic ensembles with controllable instability.
//!
//! Reading and writing bundles, reports and the command line frontend live in
//! the `instab` crate.
//!
//! Feature `parallel` (implies `std`) spreads pairwise distance computations
//! and bootstrap iterations over rayon's pool. Results are bit-identical with
//! and without it.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod analysis;
pub mod bundle;
mod error;
pub mod linalg;
mod math;
mod measure;
mod par;
pub mod pairs;
pub mod prediction;
pub mod representation;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod validity;

pub use crate::bundle::{EnsembleBundle, MetricKind, Precision, RunRecord, TensorMatrix};
pub use crate::error::{Error, Result};
pub use crate::linalg::Matrix;
pub use crate::measure::{Measure, ParseMeasureError};
pub use crate::representation::{OpVariant, RepresentationOptions};
