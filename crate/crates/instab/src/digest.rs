//! Content digests of bundles, recorded in reports.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::bundle_io::{read_manifest, BundleError};

/// SHA-256 over the manifest and every file it references, in path order.
/// Each file contributes its relative path, a NUL, its length (u64 LE) and
/// its bytes.
pub fn bundle_digest(dir: &Path) -> Result<String, BundleError> {
    let manifest = read_manifest(dir)?;
    let mut files: Vec<&str> = manifest.files();
    files.sort_unstable();
    files.dedup();
    let mut hasher = Sha256::new();
    for rel in files {
        let path = rel.split('/').fold(dir.to_path_buf(), |p, part| p.join(part));
        let bytes = fs::read(&path).map_err(|source| BundleError::Io { path, source })?;
        hasher.update(rel.as_bytes());
        hasher.update([0u8]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}
