//! Benchmark construction from a corpus of high-quality images.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degrade::{degrade, DegradationConfig, DegradationTrace};
use crate::error::{Error, Result};
use crate::{io, rng, PIPELINE_VERSION};

/// Optional file listing corpus images, one relative path per line.
pub const LISTING_FILE: &str = "listing.txt";
pub const LABELS_DIR: &str = "labels";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchHeader {
    pub pipeline_version: String,
    pub generator: String,
    pub seed: u64,
    pub count: usize,
    pub degradation: DegradationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub id: String,
    pub lq: PathBuf,
    pub hq: PathBuf,
    pub label: Option<PathBuf>,
    pub trace: DegradationTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BenchLine {
    Header(BenchHeader),
    Entry(BenchEntry),
}

pub(crate) fn is_image_file(p: &Path) -> bool {
    p.is_file()
        && matches!(
            p.extension()
                .and_then(|e| e.to_str())
                .map(str::to_ascii_lowercase)
                .as_deref(),
            Some("png" | "jpg" | "jpeg")
        )
}

/// Image paths of a corpus, relative to `corpus`: the listing if present,
/// otherwise every top-level image sorted by name.
pub fn corpus_listing(corpus: &Path) -> Result<Vec<PathBuf>> {
    let listing = corpus.join(LISTING_FILE);
    let files: Vec<PathBuf> = if listing.is_file() {
        let text = std::fs::read_to_string(&listing)?;
        let files: Vec<PathBuf> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(PathBuf::from)
            .collect();
        let missing: Vec<PathBuf> = files.iter().map(|f| corpus.join(f)).filter(|p| !p.is_file()).collect();
        if !missing.is_empty() {
            return Err(Error::MissingFiles(missing));
        }
        files
    } else {
        if !corpus.is_dir() {
            return Err(Error::MissingFiles(vec![corpus.to_path_buf()]));
        }
        let mut files = Vec::new();
        for e in std::fs::read_dir(corpus)? {
            let path = e?.path();
            if is_image_file(&path) {
                files.push(PathBuf::from(path.file_name().unwrap_or_default()));
            }
        }
        files.sort();
        files
    };
    if files.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(files)
}

fn stem(p: &Path) -> String {
    p.file_stem().unwrap_or_default().to_string_lossy().into_owned()
}

/// Degrades every corpus image into `out/lq/<stem>.png`, copies the
/// originals untouched into `out/hq/`, copies matching `labels/<stem>.*`
/// when present, and writes `out/manifest.jsonl`.
pub fn build_benchmark(corpus: &Path, out: &Path, deg_cfg: &DegradationConfig) -> Result<Vec<BenchEntry>> {
    deg_cfg.validate()?;
    let files = corpus_listing(corpus)?;
    for dir in ["lq", "hq"] {
        std::fs::create_dir_all(out.join(dir))?;
    }
    let label_dir = corpus.join(LABELS_DIR);
    let entries = files
        .par_iter()
        .enumerate()
        .map(|(i, rel)| {
            let src = corpus.join(rel);
            let id = stem(rel);
            let hq_img = io::load_linear::<f32>(&src)?;
            let cfg = DegradationConfig {
                seed: rng::derive(deg_cfg.seed, "bench", i as u64),
                final_size: Some(hq_img.dims()),
                ..deg_cfg.clone()
            };
            let (lq_img, trace) = degrade(&hq_img, &cfg)?;
            let lq = PathBuf::from("lq").join(format!("{id}.png"));
            io::save_linear_png(&lq_img, &out.join(&lq))?;
            let hq = PathBuf::from("hq").join(rel.file_name().unwrap_or_default());
            std::fs::copy(&src, out.join(&hq))?;
            let label = find_label(&label_dir, &id)
                .map(|src| -> Result<PathBuf> {
                    let rel = PathBuf::from(LABELS_DIR).join(src.file_name().unwrap_or_default());
                    std::fs::create_dir_all(out.join(LABELS_DIR))?;
                    std::fs::copy(&src, out.join(&rel))?;
                    Ok(rel)
                })
                .transpose()?;
            Ok(BenchEntry {
                id,
                lq,
                hq,
                label,
                trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let header = BenchHeader {
        pipeline_version: PIPELINE_VERSION.to_string(),
        generator: rng::GENERATOR.to_string(),
        seed: deg_cfg.seed,
        count: entries.len(),
        degradation: deg_cfg.clone(),
    };
    let mut manifest = serde_json::to_string(&BenchLine::Header(header))?;
    manifest.push('\n');
    for e in &entries {
        manifest.push_str(&serde_json::to_string(&BenchLine::Entry(e.clone()))?);
        manifest.push('\n');
    }
    std::fs::write(out.join(super::synth::MANIFEST_FILE), manifest)?;
    Ok(entries)
}

fn find_label(dir: &Path, id: &str) -> Option<PathBuf> {
    let mut hits: Vec<PathBuf> = std::fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_image_file(p) && stem(p) == id)
        .collect();
    hits.sort();
    hits.into_iter().next()
}

pub fn read_bench_manifest(path: &Path) -> Result<(BenchHeader, Vec<BenchEntry>)> {
    let text = std::fs::read_to_string(path)?;
    let mut header = None;
    let mut entries = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        match serde_json::from_str(line)? {
            BenchLine::Header(h) => header = Some(h),
            BenchLine::Entry(e) => entries.push(e),
        }
    }
    let header = header.ok_or_else(|| Error::InvalidParameter(format!("{} has no header line", path.display())))?;
    Ok((header, entries))
}
