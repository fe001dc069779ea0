//! Corpus-level PSNR/SSIM between a prediction and a reference directory.
//! Metrics are computed on the stored (sRGB-encoded) samples.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bench::{is_image_file, read_bench_manifest};
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::MetricReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub count: usize,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub summary: EvalSummary,
}

impl EvalReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

fn images_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::MissingFiles(vec![dir.to_path_buf()]));
    }
    let mut map = BTreeMap::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    for p in paths.into_iter().filter(|p| is_image_file(p)) {
        let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        map.entry(stem).or_insert(p);
    }
    Ok(map)
}

/// Pairs images by file stem. With a benchmark manifest, only its ids are
/// evaluated, in manifest order; otherwise every reference image is.
pub fn evaluate_dirs(pred: &Path, reference: &Path, manifest: Option<&Path>) -> Result<EvalReport> {
    let preds = images_by_stem(pred)?;
    let refs = images_by_stem(reference)?;
    let ids: Vec<String> = match manifest {
        Some(m) => read_bench_manifest(m)?.1.into_iter().map(|e| e.id).collect(),
        None => refs.keys().cloned().collect(),
    };
    if ids.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut missing = Vec::new();
    let mut pairs = Vec::new();
    for id in &ids {
        match (preds.get(id), refs.get(id)) {
            (Some(p), Some(r)) => pairs.push((id.clone(), p.clone(), r.clone())),
            (p, r) => {
                if p.is_none() {
                    missing.push(pred.join(format!("{id}.*")));
                }
                if r.is_none() {
                    missing.push(reference.join(format!("{id}.*")));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingFiles(missing));
    }
    let rows = pairs
        .par_iter()
        .map(|(id, p, r)| {
            let a = io::load_encoded::<f64>(p)?;
            let b = io::load_encoded::<f64>(r)?;
            let m = MetricReport::compute(&a, &b)?;
            Ok(EvalRow {
                id: id.clone(),
                psnr: m.psnr,
                ssim: m.ssim,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len() as f64;
    let summary = EvalSummary {
        count: rows.len(),
        mean_psnr: rows.iter().map(|r| r.psnr).sum::<f64>() / n,
        mean_ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
    };
    Ok(EvalReport { rows, summary })
}
