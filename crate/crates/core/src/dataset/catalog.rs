//! Asset catalog: opaque backgrounds and alpha-matted foregrounds.

use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{linear_to_srgb_sample, AlphaMatte, ImageBuffer, ResizeFilter, ScalarField};
use crate::io;
use crate::rng;

pub const INDEX_FILE: &str = "index.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetEntry {
    pub id: String,
    /// Relative to the catalog root.
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetIndex {
    pub backgrounds: Vec<AssetEntry>,
    pub foregrounds: Vec<AssetEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssetCatalog {
    pub root: PathBuf,
    pub index: AssetIndex,
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

fn scan(root: &Path, sub: &str) -> Result<Vec<AssetEntry>> {
    let dir = root.join(sub);
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut entries = Vec::new();
    for e in std::fs::read_dir(&dir)? {
        let path = e?.path();
        if path.is_file() && is_image(&path) {
            let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            entries.push(AssetEntry {
                id,
                path: Path::new(sub).join(path.file_name().unwrap_or_default()),
            });
        }
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(entries)
}

impl AssetCatalog {
    /// Reads `index.json` under `root`, or scans `backgrounds/` and
    /// `foregrounds/` when there is no index.
    pub fn load(root: &Path) -> Result<Self> {
        let index_path = root.join(INDEX_FILE);
        let index = if index_path.is_file() {
            serde_json::from_slice(&std::fs::read(&index_path)?)?
        } else {
            AssetIndex {
                backgrounds: scan(root, "backgrounds")?,
                foregrounds: scan(root, "foregrounds")?,
            }
        };
        let catalog = Self {
            root: root.to_path_buf(),
            index,
        };
        let missing: Vec<PathBuf> = catalog
            .index
            .backgrounds
            .iter()
            .chain(&catalog.index.foregrounds)
            .map(|e| root.join(&e.path))
            .filter(|p| !p.is_file())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingFiles(missing));
        }
        Ok(catalog)
    }

    pub fn check_sufficient(&self) -> Result<()> {
        if self.index.backgrounds.is_empty() || self.index.foregrounds.len() < 2 {
            return Err(Error::InsufficientAssets(format!(
                "need >= 1 background and >= 2 foregrounds, found {} and {}",
                self.index.backgrounds.len(),
                self.index.foregrounds.len()
            )));
        }
        Ok(())
    }

    fn find<'a>(entries: &'a [AssetEntry], id: &str) -> Result<&'a AssetEntry> {
        entries
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| Error::InsufficientAssets(format!("no asset with id {id:?}")))
    }

    pub fn load_background(&self, id: &str) -> Result<ImageBuffer<f32>> {
        let e = Self::find(&self.index.backgrounds, id)?;
        io::load_linear(&self.root.join(&e.path))
    }

    pub fn load_foreground(&self, id: &str) -> Result<(ImageBuffer<f32>, AlphaMatte<f32>)> {
        let e = Self::find(&self.index.foregrounds, id)?;
        let path = self.root.join(&e.path);
        let (color, alpha) = io::load_linear_rgba(&path)?;
        let alpha = AlphaMatte::new(alpha).map_err(|err| Error::AssetDecode {
            path,
            reason: err.to_string(),
        })?;
        Ok((color, alpha))
    }
}

/// Writes a small procedural catalog (textured backgrounds, soft-edged
/// blob foregrounds) plus its index. Useful for demos and tests.
pub fn write_procedural_catalog(
    root: &Path,
    backgrounds: usize,
    foregrounds: usize,
    size: usize,
    seed: u64,
) -> Result<AssetCatalog> {
    std::fs::create_dir_all(root.join("backgrounds"))?;
    std::fs::create_dir_all(root.join("foregrounds"))?;
    let mut index = AssetIndex {
        backgrounds: Vec::new(),
        foregrounds: Vec::new(),
    };
    for i in 0..backgrounds {
        let mut r = rng::stream(rng::derive(seed, "background", i as u64));
        let (fx, fy, ph): (f32, f32, f32) = (
            r.random_range(0.05..0.4),
            r.random_range(0.05..0.4),
            r.random_range(0.0..6.0),
        );
        let tint: [f32; 3] = [
            r.random_range(0.2..0.9),
            r.random_range(0.2..0.9),
            r.random_range(0.2..0.9),
        ];
        let img = ImageBuffer::from_fn(size, size, |x, y| {
            let (xf, yf) = (x as f32, y as f32);
            let stripes = 0.5 + 0.5 * (xf * fx + ph).sin() * (yf * fy).cos();
            let check = if ((x / 8) + (y / 8)) % 2 == 0 { 0.15 } else { 0.0 };
            let g = yf / size as f32;
            [
                (tint[0] * stripes + check).min(1.0),
                (tint[1] * (1.0 - g) + check).min(1.0),
                (tint[2] * (0.5 + 0.5 * stripes * g)).min(1.0),
            ]
        })?;
        let rel = PathBuf::from(format!("backgrounds/bg{i:03}.png"));
        io::save_linear_png(&img, &root.join(&rel))?;
        index.backgrounds.push(AssetEntry {
            id: format!("bg{i:03}"),
            path: rel,
        });
    }
    for i in 0..foregrounds {
        let mut r = rng::stream(rng::derive(seed, "foreground", i as u64));
        let (w, h) = (size * 3 / 4, size);
        let (rx, ry) = (
            r.random_range(0.25..0.45) * w as f32,
            r.random_range(0.3..0.48) * h as f32,
        );
        let base: [f32; 3] = [
            r.random_range(0.1..1.0),
            r.random_range(0.1..1.0),
            r.random_range(0.1..1.0),
        ];
        let freq: f32 = r.random_range(0.2..0.8);
        let (cx, cy) = (w as f32 / 2.0, h as f32 / 2.0);
        let color = ImageBuffer::from_fn(w, h, |x, y| {
            let t = 0.75 + 0.25 * ((x as f32 + y as f32) * freq).sin();
            [base[0] * t, base[1] * t, base[2] * (1.5 - t).min(1.0)]
        })?;
        let alpha = ScalarField::from_fn(w, h, |x, y| {
            let dx = (x as f32 + 0.5 - cx) / rx;
            let dy = (y as f32 + 0.5 - cy) / ry;
            let d = (dx * dx + dy * dy).sqrt();
            ((1.0 - d) * rx.min(ry) / 2.0 + 0.5).clamp(0.0, 1.0)
        })?;
        let rgba: Vec<u8> = color
            .data()
            .chunks_exact(3)
            .zip(alpha.data())
            .flat_map(|(p, &a)| {
                [
                    io::quantize_u8(linear_to_srgb_sample(p[0])),
                    io::quantize_u8(linear_to_srgb_sample(p[1])),
                    io::quantize_u8(linear_to_srgb_sample(p[2])),
                    io::quantize_u8(a),
                ]
            })
            .collect();
        let rel = PathBuf::from(format!("foregrounds/fg{i:03}.png"));
        std::fs::write(root.join(&rel), io::encode_png_rgba8(w, h, &rgba)?)?;
        index.foregrounds.push(AssetEntry {
            id: format!("fg{i:03}"),
            path: rel,
        });
    }
    std::fs::write(root.join(INDEX_FILE), serde_json::to_vec_pretty(&index)?)?;
    Ok(AssetCatalog {
        root: root.to_path_buf(),
        index,
    })
}

/// Resampling filter for fitting an asset to a new size.
pub(crate) fn fit_filter(from: (usize, usize), to: (usize, usize)) -> ResizeFilter {
    if to.0 <= from.0 && to.1 <= from.1 {
        ResizeFilter::Area
    } else {
        ResizeFilter::Bilinear
    }
}
