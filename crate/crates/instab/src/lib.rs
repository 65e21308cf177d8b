//! Bundle IO, reference implementations, reports and the `instab` command
//! line on top of `instability-core`.

pub mod bundle_io;
pub mod cli;
pub mod digest;
pub mod imtx;
pub mod oracle;
pub mod report;

pub use bundle_io::{load_bundle, save_bundle, BundleError};
