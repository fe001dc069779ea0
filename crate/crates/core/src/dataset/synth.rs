//! Sample synthesis, per-sample consistency checks, and whole-dataset runs.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::catalog::AssetCatalog;
use super::scene::{sample_scene, SceneSpec};
use crate::defocus::{
    binarize_focus, compute_defocus, export_defocus, sidecar_path, DefocusSidecar, FocusMask, LensParams,
    DEFAULT_FOCUS_THRESHOLD,
};
use crate::degrade::{degrade, write_trace_lines, DegradationConfig, DegradationTrace, Preset};
use crate::error::{Error, Result};
use crate::io;
use crate::render::{render_ground_truth, RenderConfig};
use crate::{rng, PIPELINE_VERSION};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const TRACES_FILE: &str = "traces.jsonl";

/// Paths of a sample's artifacts, relative to the dataset root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFiles {
    pub lq_allinfocus: PathBuf,
    pub hq_allinfocus: PathBuf,
    pub hq_bokeh: PathBuf,
    pub disparity: PathBuf,
    pub defocus: PathBuf,
    pub focus_mask: PathBuf,
}

impl SampleFiles {
    fn for_id(id: &str) -> Self {
        let dir = Path::new("samples").join(id);
        Self {
            lq_allinfocus: dir.join("lq_allinfocus.png"),
            hq_allinfocus: dir.join("hq_allinfocus.png"),
            hq_bokeh: dir.join("hq_bokeh.png"),
            disparity: dir.join("disparity.png"),
            defocus: dir.join("defocus.png"),
            focus_mask: dir.join("focus_mask.png"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub files: SampleFiles,
    pub scene: SceneSpec,
    pub trace: DegradationTrace,
    pub focus_threshold: f64,
    pub pipeline_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub pipeline_version: String,
    pub generator: String,
    pub root_seed: u64,
    pub count: usize,
    pub canvas: (usize, usize),
    pub focus_threshold: f64,
    pub degradation: DegradationConfig,
    pub render: RenderConfig,
}

/// One line of `manifest.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifestLine {
    Header(DatasetHeader),
    Sample(SampleRecord),
}

pub fn sample_id(index: usize) -> String {
    format!("s{index:06}")
}

/// Renders, degrades and writes one sample under `root`. Calling it again
/// with the same arguments rewrites identical bytes.
pub fn synthesize(
    catalog: &AssetCatalog,
    spec: &SceneSpec,
    deg_cfg: &DegradationConfig,
    root: &Path,
    id: &str,
) -> Result<SampleRecord> {
    let scene = spec.compose(catalog)?;
    let lens = spec.lens();
    let truth = render_ground_truth(&scene, &lens)?;
    let sharp = render_ground_truth(&scene, &LensParams::all_in_focus())?.bokeh;
    let mask = binarize_focus(&truth.defocus, DEFAULT_FOCUS_THRESHOLD);

    let cfg = DegradationConfig {
        seed: rng::derive(spec.seed, "degrade", 0),
        final_size: Some(spec.canvas),
        ..deg_cfg.clone()
    };
    let (lq, trace) = degrade(&sharp, &cfg)?;

    let files = SampleFiles::for_id(id);
    std::fs::create_dir_all(root.join("samples").join(id))?;
    io::save_linear_png(&lq, &root.join(&files.lq_allinfocus))?;
    io::save_linear_png(&sharp, &root.join(&files.hq_allinfocus))?;
    io::save_linear_png(&truth.bokeh, &root.join(&files.hq_bokeh))?;
    io::save_field16(&truth.disparity, &root.join(&files.disparity))?;
    export_defocus(
        &truth.defocus,
        &DefocusSidecar::for_lens(&lens, DEFAULT_FOCUS_THRESHOLD),
        &root.join(&files.defocus),
    )?;
    std::fs::write(root.join(&files.focus_mask), mask.encode_png()?)?;

    Ok(SampleRecord {
        id: id.to_string(),
        files,
        scene: spec.clone(),
        trace,
        focus_threshold: DEFAULT_FOCUS_THRESHOLD,
        pipeline_version: PIPELINE_VERSION.to_string(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SampleCheck {
    /// Stored defocus codes equal the encoding of the radii recomputed from
    /// the stored disparity.
    pub defocus_matches: bool,
    /// Stored mask equals the binarisation of those recomputed radii.
    pub mask_matches: bool,
    pub files_present: bool,
}

impl SampleCheck {
    pub fn ok(&self) -> bool {
        self.defocus_matches && self.mask_matches && self.files_present
    }
}

/// Re-derives defocus and mask from the stored disparity and compares them
/// with the stored artifacts.
pub fn verify_sample(root: &Path, record: &SampleRecord) -> Result<SampleCheck> {
    let f = &record.files;
    let all = [
        &f.lq_allinfocus,
        &f.hq_allinfocus,
        &f.hq_bokeh,
        &f.disparity,
        &f.defocus,
        &f.focus_mask,
    ];
    let files_present = all.iter().all(|p| root.join(p).is_file()) && sidecar_path(&root.join(&f.defocus)).is_file();
    if !files_present {
        return Ok(SampleCheck {
            defocus_matches: false,
            mask_matches: false,
            files_present,
        });
    }
    let disparity = io::load_field::<f32>(&root.join(&f.disparity))?;
    let lens = record.scene.lens();
    let defocus = compute_defocus(&disparity, &lens)?.into_inner();
    let sidecar: DefocusSidecar = serde_json::from_slice(&std::fs::read(sidecar_path(&root.join(&f.defocus)))?)?;
    let (_, _, stored_codes) = io::load_u16_codes(&root.join(&f.defocus))?;
    let expected_sidecar = DefocusSidecar::for_lens(&lens, record.focus_threshold);
    let defocus_matches = sidecar == expected_sidecar && stored_codes == sidecar.encode_codes(&defocus);

    let (w, h) = disparity.dims();
    let (mw, mh, mask_codes) = io::load_u16_codes(&root.join(&f.focus_mask))?;
    let stored_mask = FocusMask::from_bits(
        mw,
        mh,
        mask_codes.iter().map(|&c| c > u16::MAX / 2).collect(),
        record.focus_threshold,
    )?;
    let mask_matches = (mw, mh) == (w, h) && stored_mask == binarize_focus(&defocus, record.focus_threshold);
    Ok(SampleCheck {
        defocus_matches,
        mask_matches,
        files_present,
    })
}

#[derive(Clone, Debug)]
pub struct SynthOptions {
    pub count: usize,
    pub root_seed: u64,
    pub canvas: (usize, usize),
    pub preset: Preset,
}

impl SynthOptions {
    pub fn new(count: usize, root_seed: u64) -> Self {
        Self {
            count,
            root_seed,
            canvas: (256, 256),
            preset: Preset::Standard,
        }
    }
}

/// Synthesises `count` samples in parallel and writes the manifest (header
/// then records in id order) and the degradation traces.
pub fn synthesize_dataset(catalog: &AssetCatalog, out: &Path, opts: &SynthOptions) -> Result<Vec<SampleRecord>> {
    catalog.check_sufficient()?;
    let deg_cfg = DegradationConfig::preset(opts.preset, opts.root_seed);
    deg_cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let records = (0..opts.count)
        .into_par_iter()
        .map(|i| {
            let id = sample_id(i);
            let spec = sample_scene(rng::derive(opts.root_seed, "sample", i as u64), catalog, opts.canvas)?;
            log::debug!("synthesizing {id}");
            synthesize(catalog, &spec, &deg_cfg, out, &id)
        })
        .collect::<Result<Vec<_>>>()?;

    let header = DatasetHeader {
        pipeline_version: PIPELINE_VERSION.to_string(),
        generator: rng::GENERATOR.to_string(),
        root_seed: opts.root_seed,
        count: opts.count,
        canvas: opts.canvas,
        focus_threshold: DEFAULT_FOCUS_THRESHOLD,
        degradation: deg_cfg,
        render: RenderConfig::with_max_radius(f64::from(super::scene::MAX_BLUR_INTENSITY)),
    };
    let mut manifest = serde_json::to_string(&ManifestLine::Header(header))?;
    manifest.push('\n');
    for r in &records {
        manifest.push_str(&serde_json::to_string(&ManifestLine::Sample(r.clone()))?);
        manifest.push('\n');
    }
    std::fs::write(out.join(MANIFEST_FILE), manifest)?;
    std::fs::write(
        out.join(TRACES_FILE),
        write_trace_lines(records.iter().map(|r| &r.trace))?,
    )?;
    Ok(records)
}

pub fn read_manifest(path: &Path) -> Result<(DatasetHeader, Vec<SampleRecord>)> {
    let text = std::fs::read_to_string(path)?;
    let mut header = None;
    let mut records = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        match serde_json::from_str(line)? {
            ManifestLine::Header(h) => header = Some(h),
            ManifestLine::Sample(r) => records.push(r),
        }
    }
    let header = header.ok_or_else(|| Error::InvalidParameter(format!("{} has no header line", path.display())))?;
    Ok((header, records))
}
