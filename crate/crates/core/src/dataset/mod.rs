//! Dataset factory: asset catalogs, random layered scenes, LQ/HQ sample
//! synthesis with manifests, benchmark construction and corpus evaluation.

pub mod bench;
pub mod catalog;
pub mod eval;
pub mod scene;
pub mod synth;

use std::path::Path;

use sha2::{Digest, Sha256};
use walkdir::WalkDir;

pub use bench::{build_benchmark, corpus_listing, BenchEntry};
pub use catalog::{write_procedural_catalog, AssetCatalog};
pub use eval::{evaluate_dirs, EvalReport};
pub use scene::{sample_scene, FocusTarget, SceneSpec};
pub use synth::{synthesize, synthesize_dataset, verify_sample, SampleRecord, SynthOptions};

use crate::error::Result;

/// SHA-256 over every file's relative path and contents, in path order.
pub fn directory_digest(root: &Path) -> Result<String> {
    let mut files = Vec::new();
    for e in WalkDir::new(root).sort_by_file_name() {
        let e = e.map_err(std::io::Error::from)?;
        if e.file_type().is_file() {
            files.push(e.path().strip_prefix(root).unwrap_or(e.path()).to_path_buf());
        }
    }
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.to_string_lossy().as_bytes());
        h.update([0]);
        let bytes = std::fs::read(root.join(&f))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(format!("{:x}", h.finalize()))
}
