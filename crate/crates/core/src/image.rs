//! Raster containers, transfer functions and resampling.
//!
//! Every buffer is row-major with a top-left origin. Colour images always carry
//! three interleaved channels in linear light; conversion to and from sRGB
//! happens only at the I/O boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHANNELS: usize = 3;

/// A value together with the number of samples that had to be clamped into
/// range while producing it.
#[derive(Clone, Debug, PartialEq)]
pub struct Clamped<V> {
    pub value: V,
    pub clamped: usize,
}

impl<V> Clamped<V> {
    pub fn into_inner(self) -> V {
        if self.clamped > 0 {
            log::warn!("{} samples clamped into range", self.clamped);
        }
        self.value
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    Ok(())
}

fn check_finite<T: Scalar>(data: &[T]) -> Result<()> {
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite sample at index {i}")));
    }
    Ok(())
}

/// `H×W×3` linear-light image.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImageBuffer<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height * CHANNELS {
            return Err(Error::InvalidParameter(format!(
                "expected {} samples for {width}x{height}x{CHANNELS}, got {}",
                width * height * CHANNELS,
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [T; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self::new(width, height, data)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [T; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Builds an image without re-validating; callers guarantee the
    /// invariants.
    pub(crate) fn from_raw_unchecked(width: usize, height: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), width * height * CHANNELS);
        Self { width, height, data }
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

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [T; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Applies `f` to every sample.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw_unchecked(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Mean over all samples of all channels.
    pub fn mean(&self) -> f64 {
        self.data.iter().map(|v| v.wide()).sum::<f64>() / self.data.len() as f64
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                data.extend_from_slice(&self.pixel(x, y));
            }
        }
        Self::from_raw_unchecked(self.width, self.height, data)
    }

    /// Rec. 601 luma.
    pub fn luma(&self) -> ScalarField<T> {
        let (wr, wg, wb) = (T::lit(0.299), T::lit(0.587), T::lit(0.114));
        let data = self
            .data
            .chunks_exact(CHANNELS)
            .map(|p| wr * p[0] + wg * p[1] + wb * p[2])
            .collect();
        ScalarField::from_raw_unchecked(self.width, self.height, data)
    }

    pub fn clamp01(&self) -> Clamped<Self> {
        let mut clamped = 0;
        let data = self
            .data
            .iter()
            .map(|&v| {
                let c = v.max(T::zero()).min(T::one());
                if c != v {
                    clamped += 1;
                }
                c
            })
            .collect();
        Clamped {
            value: Self::from_raw_unchecked(self.width, self.height, data),
            clamped,
        }
    }

    pub fn resize(&self, width: usize, height: usize, filter: ResizeFilter) -> Result<Self> {
        check_dims(width, height)?;
        let data = resample_planar(&self.data, CHANNELS, (self.width, self.height), (width, height), filter);
        Ok(Self::from_raw_unchecked(width, height, data))
    }

    /// Converts to another scalar precision.
    pub fn cast<U: Scalar>(&self) -> ImageBuffer<U> {
        ImageBuffer::from_raw_unchecked(
            self.width,
            self.height,
            self.data.iter().map(|v| U::lit(v.wide())).collect(),
        )
    }
}

/// Single-channel `H×W` field: disparity, blur radius, alpha.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> ScalarField<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, v: T) -> Result<Self> {
        check_dims(width, height)?;
        Self::new(width, height, vec![v; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub(crate) fn from_raw_unchecked(width: usize, height: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self { width, height, data }
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

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw_unchecked(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn max_value(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min_value(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            data.extend(self.data[y * self.width..(y + 1) * self.width].iter().rev());
        }
        Self::from_raw_unchecked(self.width, self.height, data)
    }

    pub fn clamp01(&self) -> Clamped<Self> {
        let mut clamped = 0;
        let data = self
            .data
            .iter()
            .map(|&v| {
                let c = v.max(T::zero()).min(T::one());
                if c != v {
                    clamped += 1;
                }
                c
            })
            .collect();
        Clamped {
            value: Self::from_raw_unchecked(self.width, self.height, data),
            clamped,
        }
    }

    pub fn resize(&self, width: usize, height: usize, filter: ResizeFilter) -> Result<Self> {
        check_dims(width, height)?;
        let data = resample_planar(&self.data, 1, (self.width, self.height), (width, height), filter);
        Ok(Self::from_raw_unchecked(width, height, data))
    }
}

/// Disparity in `[0,1]`; larger is closer.
pub type DisparityMap<T> = ScalarField<T>;

/// Coverage matte with every sample in `[0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaMatte<T>(ScalarField<T>);

impl<T: Scalar> AlphaMatte<T> {
    pub fn new(field: ScalarField<T>) -> Result<Self> {
        if field.data().iter().any(|&v| v < T::zero() || v > T::one()) {
            return Err(Error::InvalidParameter("alpha samples must lie in [0,1]".into()));
        }
        Ok(Self(field))
    }

    pub fn opaque(width: usize, height: usize) -> Result<Self> {
        Ok(Self(ScalarField::filled(width, height, T::one())?))
    }

    pub(crate) fn from_field_unchecked(field: ScalarField<T>) -> Self {
        Self(field)
    }

    pub fn field(&self) -> &ScalarField<T> {
        &self.0
    }

    pub fn into_field(self) -> ScalarField<T> {
        self.0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.0.get(x, y)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn is_opaque(&self) -> bool {
        self.0.data().iter().all(|&a| a == T::one())
    }

    pub fn flip_horizontal(&self) -> Self {
        Self(self.0.flip_horizontal())
    }
}

#[inline]
fn eotf(s: f64) -> f64 {
    if s <= 0.04045 {
        s / 12.92
    } else {
        ((s + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn oetf(l: f64) -> f64 {
    if l >= 1.0 {
        1.0
    } else if l <= 0.003_130_8 {
        l * 12.92
    } else {
        1.055 * l.powf(1.0 / 2.4) - 0.055
    }
}

/// Scalar sRGB decode. Input is clamped to `[0,1]`.
pub fn srgb_to_linear_sample<T: Scalar>(s: T) -> T {
    T::lit(eotf(s.wide().clamp(0.0, 1.0)))
}

/// Scalar sRGB encode. Input is clamped to `[0,1]`.
pub fn linear_to_srgb_sample<T: Scalar>(l: T) -> T {
    T::lit(oetf(l.wide().clamp(0.0, 1.0)))
}

/// Applies the sRGB transfer function per channel, clamping out-of-range
/// samples and counting them.
pub fn srgb_to_linear<T: Scalar>(img: &ImageBuffer<T>) -> Clamped<ImageBuffer<T>> {
    let Clamped { value, clamped } = img.clamp01();
    Clamped {
        value: value.map(srgb_to_linear_sample),
        clamped,
    }
}

pub fn linear_to_srgb<T: Scalar>(img: &ImageBuffer<T>) -> Clamped<ImageBuffer<T>> {
    let Clamped { value, clamped } = img.clamp01();
    Clamped {
        value: value.map(linear_to_srgb_sample),
        clamped,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizeFilter {
    Nearest,
    Bilinear,
    Bicubic,
    Area,
}

impl ResizeFilter {
    pub const ALL: [ResizeFilter; 4] = [Self::Nearest, Self::Bilinear, Self::Bicubic, Self::Area];
}

/// Sparse 1-D resampling row: output sample = Σ weights[k] · src[start + k].
struct Taps {
    start: usize,
    weights: Vec<f64>,
}

fn cubic(x: f64) -> f64 {
    // Keys kernel, a = -0.5
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

fn taps_for(src: usize, dst: usize, filter: ResizeFilter) -> Vec<Taps> {
    let scale = src as f64 / dst as f64;
    let last = src as isize - 1;
    // Clamped-index taps folded into a dense window.
    let gather = |pairs: Vec<(isize, f64)>| -> Taps {
        let idx: Vec<usize> = pairs.iter().map(|(i, _)| (*i).clamp(0, last) as usize).collect();
        let start = *idx.iter().min().unwrap();
        let end = *idx.iter().max().unwrap();
        let mut weights = vec![0.0; end - start + 1];
        for (k, (_, w)) in idx.iter().zip(pairs) {
            weights[k - start] += w;
        }
        Taps { start, weights }
    };
    (0..dst)
        .map(|j| {
            let center = (j as f64 + 0.5) * scale - 0.5;
            match filter {
                ResizeFilter::Nearest => {
                    let i = (((j as f64 + 0.5) * scale).floor() as isize).clamp(0, last);
                    Taps {
                        start: i as usize,
                        weights: vec![1.0],
                    }
                }
                ResizeFilter::Bilinear => {
                    let i0 = center.floor();
                    let t = center - i0;
                    let i0 = i0 as isize;
                    gather(vec![(i0, 1.0 - t), (i0 + 1, t)])
                }
                ResizeFilter::Bicubic => {
                    let i0 = center.floor();
                    let t = center - i0;
                    let i0 = i0 as isize;
                    let pairs: Vec<(isize, f64)> = (-1..=2).map(|k| (i0 + k, cubic(t - k as f64))).collect();
                    let sum: f64 = pairs.iter().map(|p| p.1).sum();
                    gather(pairs.into_iter().map(|(i, w)| (i, w / sum)).collect())
                }
                ResizeFilter::Area => {
                    let lo = j as f64 * scale;
                    let hi = (j + 1) as f64 * scale;
                    let first = lo.floor() as isize;
                    let last_i = (hi.ceil() as isize - 1).max(first);
                    let pairs = (first..=last_i)
                        .map(|i| {
                            let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                            (i, overlap / scale)
                        })
                        .collect();
                    gather(pairs)
                }
            }
        })
        .collect()
}

/// Separable resampling of interleaved planar data, horizontal pass first.
fn resample_planar<T: Scalar>(
    src: &[T],
    channels: usize,
    (sw, sh): (usize, usize),
    (dw, dh): (usize, usize),
    filter: ResizeFilter,
) -> Vec<T> {
    if (sw, sh) == (dw, dh) {
        return src.to_vec();
    }
    let xt = taps_for(sw, dw, filter);
    let yt = taps_for(sh, dh, filter);

    let mut tmp = vec![0.0f64; dw * sh * channels];
    for y in 0..sh {
        let row = &src[y * sw * channels..(y + 1) * sw * channels];
        for (x, t) in xt.iter().enumerate() {
            for c in 0..channels {
                let mut acc = 0.0;
                for (k, w) in t.weights.iter().enumerate() {
                    acc += w * row[(t.start + k) * channels + c].wide();
                }
                tmp[(y * dw + x) * channels + c] = acc;
            }
        }
    }

    let mut out = Vec::with_capacity(dw * dh * channels);
    for t in &yt {
        for x in 0..dw {
            for c in 0..channels {
                let mut acc = 0.0;
                for (k, w) in t.weights.iter().enumerate() {
                    acc += w * tmp[((t.start + k) * dw + x) * channels + c];
                }
                out.push(T::lit(acc));
            }
        }
    }
    out
}
