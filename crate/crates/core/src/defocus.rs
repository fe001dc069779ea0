//! Disparity → blur radius, blur radius → focus mask, and mask resampling to
//! attention resolutions.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Clamped, DisparityMap, ScalarField};
use crate::io;
use crate::scalar::Scalar;

/// Default focus threshold, in pixels of blur radius.
pub const DEFAULT_FOCUS_THRESHOLD: f64 = 1.0;

/// Thin-lens control: `r = blur_intensity · |d − focal_disparity|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LensParams<T> {
    /// Pixels of blur radius per unit disparity gap.
    pub blur_intensity: T,
    /// Disparity of the sharp plane, in `[0,1]`.
    pub focal_disparity: T,
}

impl<T: Scalar> LensParams<T> {
    pub fn new(blur_intensity: T, focal_disparity: T) -> Result<Self> {
        let lens = Self {
            blur_intensity,
            focal_disparity,
        };
        lens.validate()?;
        Ok(lens)
    }

    /// All-in-focus lens (`K = 0`).
    pub fn all_in_focus() -> Self {
        Self {
            blur_intensity: T::zero(),
            focal_disparity: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.blur_intensity >= T::zero()) || !self.blur_intensity.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "blur intensity must be finite and >= 0, got {}",
                self.blur_intensity
            )));
        }
        if !(self.focal_disparity >= T::zero() && self.focal_disparity <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "focal disparity must lie in [0,1], got {}",
                self.focal_disparity
            )));
        }
        Ok(())
    }

    /// Blur radius for one disparity sample. The product is formed in `f64`
    /// and rounded once into `T`.
    #[inline]
    pub fn radius(&self, disparity: T) -> T {
        T::lit(self.blur_intensity.wide() * (disparity.wide() - self.focal_disparity.wide()).abs())
    }
}

/// Per-pixel blur radius in pixels; every sample is `>= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DefocusMap<T>(ScalarField<T>);

impl<T: Scalar> DefocusMap<T> {
    pub fn new(field: ScalarField<T>) -> Result<Self> {
        if field.data().iter().any(|&r| r < T::zero()) {
            return Err(Error::InvalidParameter("blur radius must be non-negative".into()));
        }
        Ok(Self(field))
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Ok(Self(ScalarField::filled(width, height, T::zero())?))
    }

    pub fn field(&self) -> &ScalarField<T> {
        &self.0
    }

    pub fn into_field(self) -> ScalarField<T> {
        self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.0.get(x, y)
    }

    pub fn max_radius(&self) -> T {
        self.0.max_value()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self(self.0.map(|r| r * factor))
    }
}

/// Applies the thin-lens radius formula to every pixel. Disparities outside
/// `[0,1]` are clamped and counted.
pub fn compute_defocus<T: Scalar>(disparity: &DisparityMap<T>, lens: &LensParams<T>) -> Result<Clamped<DefocusMap<T>>> {
    lens.validate()?;
    let Clamped { value: d, clamped } = disparity.clamp01();
    let radii = d.map(|v| lens.radius(v));
    Ok(Clamped {
        value: DefocusMap(radii),
        clamped,
    })
}

/// Binary in-focus mask: 1 where the blur radius is below the threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct FocusMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    threshold: f64,
}

impl FocusMask {
    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>, threshold: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        if bits.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "expected {} mask bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
            threshold,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Region label per token (row-major): 1 in focus, 0 defocused.
    pub fn region_labels(&self) -> Vec<u32> {
        self.bits.iter().map(|&b| u32::from(b)).collect()
    }

    /// 0/255 greyscale PNG.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let codes: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        io::encode_png_gray8(self.width, self.height, &codes)
    }
}

/// `mask = 1` where `r < threshold` (strict), else 0.
pub fn binarize_focus<T: Scalar>(defocus: &DefocusMap<T>, threshold: f64) -> FocusMask {
    let (width, height) = defocus.dims();
    let bits = defocus.field().data().iter().map(|r| r.wide() < threshold).collect();
    FocusMask {
        width,
        height,
        bits,
        threshold,
    }
}

/// Block majority vote down to `width × height`; ties go to in-focus.
pub fn downsample_mask(mask: &FocusMask, width: usize, height: usize) -> Result<FocusMask> {
    if width == 0 || height == 0 || width > mask.width || height > mask.height {
        return Err(Error::InvalidDimensions { width, height });
    }
    if !mask.width.is_multiple_of(width) || !mask.height.is_multiple_of(height) {
        return Err(Error::InvalidParameter(format!(
            "{}x{} mask does not divide evenly into {width}x{height}",
            mask.width, mask.height
        )));
    }
    let (bw, bh) = (mask.width / width, mask.height / height);
    let mut bits = Vec::with_capacity(width * height);
    for by in 0..height {
        for bx in 0..width {
            let mut ones = 0;
            for y in by * bh..(by + 1) * bh {
                let row = &mask.bits[y * mask.width + bx * bw..y * mask.width + (bx + 1) * bw];
                ones += row.iter().filter(|&&b| b).count();
            }
            bits.push(2 * ones >= bw * bh);
        }
    }
    Ok(FocusMask {
        width,
        height,
        bits,
        threshold: mask.threshold,
    })
}

/// Metadata stored next to an exported defocus PNG.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefocusSidecar {
    pub blur_intensity: f64,
    pub focal_disparity: f64,
    pub threshold: f64,
    /// Radius represented by code 65535.
    pub encoding_max_radius: f64,
}

impl DefocusSidecar {
    pub fn for_lens<T: Scalar>(lens: &LensParams<T>, threshold: f64) -> Self {
        let k = lens.blur_intensity.wide();
        Self {
            blur_intensity: k,
            focal_disparity: lens.focal_disparity.wide(),
            threshold,
            encoding_max_radius: if k > 0.0 { k } else { 1.0 },
        }
    }

    pub fn encode_codes<T: Scalar>(&self, defocus: &DefocusMap<T>) -> Vec<u16> {
        defocus
            .field()
            .data()
            .iter()
            .map(|r| io::quantize_u16(r.wide() / self.encoding_max_radius))
            .collect()
    }
}

pub fn sidecar_path(png: &Path) -> PathBuf {
    let mut name = png.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Writes `defocus` as a 16-bit PNG plus a `<png>.json` sidecar.
pub fn export_defocus<T: Scalar>(defocus: &DefocusMap<T>, sidecar: &DefocusSidecar, png: &Path) -> Result<()> {
    let (w, h) = defocus.dims();
    std::fs::write(png, io::encode_png_gray16(w, h, &sidecar.encode_codes(defocus))?)?;
    std::fs::write(sidecar_path(png), serde_json::to_vec_pretty(sidecar)?)?;
    Ok(())
}

pub fn import_defocus(png: &Path) -> Result<(DefocusMap<f64>, DefocusSidecar)> {
    let sidecar: DefocusSidecar = serde_json::from_slice(&std::fs::read(sidecar_path(png))?)?;
    let (w, h, codes) = io::load_u16_codes(png)?;
    let data = codes
        .into_iter()
        .map(|c| f64::from(c) / 65535.0 * sidecar.encoding_max_radius)
        .collect();
    Ok((DefocusMap(ScalarField::new(w, h, data)?), sidecar))
}
