//! Random scene composition: one background with a vertical disparity ramp
//! and two constant-disparity foregrounds in front of it.

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::catalog::{fit_filter, AssetCatalog};
use crate::defocus::LensParams;
use crate::error::{Error, Result};
use crate::image::{AlphaMatte, ImageBuffer, ScalarField};
use crate::io::dequantize_u16;
use crate::render::{LayeredScene, SceneLayer};
use crate::rng;

pub const MAX_BLUR_INTENSITY: f32 = 32.0;
const FG_SCALE: (f64, f64) = (0.35, 0.75);
const FG_CENTER: (f64, f64) = (0.2, 0.8);
/// Largest background ramp code (disparity ≈ 0.6), leaving headroom for
/// foregrounds.
const RAMP_MAX_CODE: u16 = 39321;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum FocusTarget {
    /// Focus on the background ramp at this row of the unflipped canvas.
    Background {
        row: usize,
    },
    Foreground {
        index: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForegroundPlacement {
    pub asset_id: String,
    /// 16-bit disparity code; the layer disparity is `code / 65535`.
    pub disparity_code: u16,
    /// Placed height as a fraction of the canvas height.
    pub scale: f64,
    pub center_x: f64,
    pub center_y: f64,
}

/// Everything needed to rebuild a sample. Disparities are stored as 16-bit
/// codes so the disparity PNG written for the sample is lossless.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub canvas: (usize, usize),
    pub background_id: String,
    /// Background disparity codes at the top and bottom edge.
    pub ramp_codes: (u16, u16),
    /// Back to front.
    pub foregrounds: Vec<ForegroundPlacement>,
    pub blur_intensity: f32,
    pub focus: FocusTarget,
    pub focal_code: u16,
    pub flip: bool,
}

/// Background disparity code on row `y` of a `height`-row ramp.
pub fn ramp_code(ramp: (u16, u16), y: usize, height: usize) -> u16 {
    let t = (y as f64 + 0.5) / height as f64;
    let (a, b) = (f64::from(ramp.0), f64::from(ramp.1));
    (a + (b - a) * t).round() as u16
}

impl SceneSpec {
    pub fn lens(&self) -> LensParams<f32> {
        LensParams {
            blur_intensity: self.blur_intensity,
            focal_disparity: dequantize_u16(self.focal_code),
        }
    }

    /// Checks every sampled parameter against its declared range.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScene(m));
        if !(0.0..=MAX_BLUR_INTENSITY).contains(&self.blur_intensity) {
            return bad(format!(
                "blur intensity {} outside [0, {MAX_BLUR_INTENSITY}]",
                self.blur_intensity
            ));
        }
        if self.foregrounds.len() != 2 {
            return bad(format!("expected 2 foregrounds, got {}", self.foregrounds.len()));
        }
        let ramp_max = self.ramp_codes.0.max(self.ramp_codes.1);
        let mut prev = ramp_max;
        for fg in &self.foregrounds {
            if fg.disparity_code <= ramp_max || fg.disparity_code < prev {
                return bad("foreground disparities must exceed the background and be sorted back to front".into());
            }
            prev = fg.disparity_code;
            if !(FG_SCALE.0..=FG_SCALE.1).contains(&fg.scale)
                || !(FG_CENTER.0..=FG_CENTER.1).contains(&fg.center_x)
                || !(FG_CENTER.0..=FG_CENTER.1).contains(&fg.center_y)
            {
                return bad(format!("placement of {} out of range", fg.asset_id));
            }
        }
        let expected = match self.focus {
            FocusTarget::Background { row } if row < self.canvas.1 => ramp_code(self.ramp_codes, row, self.canvas.1),
            FocusTarget::Foreground { index } if index < 2 => self.foregrounds[index].disparity_code,
            _ => return bad(format!("invalid focus target {:?}", self.focus)),
        };
        if expected != self.focal_code {
            return bad("focal disparity does not match its target layer".into());
        }
        Ok(())
    }

    /// Composes the layered scene from catalog assets.
    pub fn compose(&self, catalog: &AssetCatalog) -> Result<LayeredScene<f32>> {
        let (w, h) = self.canvas;
        let bg = catalog.load_background(&self.background_id)?;
        let bg = bg.resize(w, h, fit_filter(bg.dims(), (w, h)))?;
        let ramp = ScalarField::from_fn(w, h, |_, y| dequantize_u16(ramp_code(self.ramp_codes, y, h)))?;
        let mut layers = vec![SceneLayer::opaque(bg, ramp)?];
        for fg in &self.foregrounds {
            layers.push(place_foreground(catalog, fg, self.canvas)?);
        }
        if self.flip {
            layers = layers.iter().map(SceneLayer::flip_horizontal).collect();
        }
        LayeredScene::new(layers, self.lens())
    }
}

fn place_foreground(
    catalog: &AssetCatalog,
    fg: &ForegroundPlacement,
    canvas: (usize, usize),
) -> Result<SceneLayer<f32>> {
    let (cw, ch) = canvas;
    let (color, alpha) = catalog.load_foreground(&fg.asset_id)?;
    let (aw, ah) = color.dims();
    let th = ((fg.scale * ch as f64).round() as usize).max(1);
    let tw = ((aw as f64 * th as f64 / ah as f64).round() as usize).clamp(1, cw);
    let filter = fit_filter((aw, ah), (tw, th));
    let color = color.resize(tw, th, filter)?;
    let alpha = alpha.field().resize(tw, th, filter)?;
    let x0 = (fg.center_x * cw as f64 - tw as f64 / 2.0).round() as isize;
    let y0 = (fg.center_y * ch as f64 - th as f64 / 2.0).round() as isize;
    let inside = |x: usize, y: usize| {
        let (lx, ly) = (x as isize - x0, y as isize - y0);
        (lx >= 0 && ly >= 0 && (lx as usize) < tw && (ly as usize) < th).then_some((lx as usize, ly as usize))
    };
    let canvas_color = ImageBuffer::from_fn(cw, ch, |x, y| {
        inside(x, y).map_or([0.0; 3], |(lx, ly)| color.pixel(lx, ly))
    })?;
    let canvas_alpha = ScalarField::from_fn(cw, ch, |x, y| {
        inside(x, y).map_or(0.0, |(lx, ly)| alpha.get(lx, ly).clamp(0.0, 1.0))
    })?;
    let d = dequantize_u16(fg.disparity_code);
    SceneLayer::new(
        canvas_color,
        AlphaMatte::new(canvas_alpha)?,
        ScalarField::filled(cw, ch, d)?,
    )
}

/// Draws a random scene. Requires at least one background and two
/// foregrounds in the catalog.
pub fn sample_scene(seed: u64, catalog: &AssetCatalog, canvas: (usize, usize)) -> Result<SceneSpec> {
    catalog.check_sufficient()?;
    if canvas.0 == 0 || canvas.1 == 0 {
        return Err(Error::InvalidDimensions {
            width: canvas.0,
            height: canvas.1,
        });
    }
    let mut r = rng::stream(seed);
    let index = &catalog.index;
    let background_id = index.backgrounds.choose(&mut r).expect("checked non-empty").id.clone();
    let picked: Vec<_> = index.foregrounds.choose_multiple(&mut r, 2).cloned().collect();

    let ramp_codes = (r.random_range(0..=RAMP_MAX_CODE), r.random_range(0..=RAMP_MAX_CODE));
    let ramp_max = ramp_codes.0.max(ramp_codes.1);
    let mut codes = [
        r.random_range(ramp_max + 1..=u16::MAX),
        r.random_range(ramp_max + 1..=u16::MAX),
    ];
    codes.sort_unstable();

    let foregrounds: Vec<ForegroundPlacement> = picked
        .into_iter()
        .zip(codes)
        .map(|(asset, disparity_code)| ForegroundPlacement {
            asset_id: asset.id,
            disparity_code,
            scale: r.random_range(FG_SCALE.0..=FG_SCALE.1),
            center_x: r.random_range(FG_CENTER.0..=FG_CENTER.1),
            center_y: r.random_range(FG_CENTER.0..=FG_CENTER.1),
        })
        .collect();

    let blur_intensity = r.random_range(0.0..=MAX_BLUR_INTENSITY);
    let (focus, focal_code) = match r.random_range(0..3u32) {
        0 => {
            let row = r.random_range(0..canvas.1);
            (FocusTarget::Background { row }, ramp_code(ramp_codes, row, canvas.1))
        }
        i => {
            let index = (i - 1) as usize;
            (FocusTarget::Foreground { index }, foregrounds[index].disparity_code)
        }
    };
    let flip = r.random_bool(0.5);
    let spec = SceneSpec {
        seed,
        canvas,
        background_id,
        ramp_codes,
        foregrounds,
        blur_intensity,
        focus,
        focal_code,
        flip,
    };
    spec.validate()?;
    Ok(spec)
}
