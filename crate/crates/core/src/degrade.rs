//! Seeded second-order degradation: `rounds` passes of
//! blur → resample → noise → JPEG, then a resize to the target resolution.
//!
//! Every random draw is captured in a [`DegradationTrace`], and degrading is
//! implemented as "sample a trace, then replay it", so a stored trace
//! reproduces its output bit for bit.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{srgb_to_linear_sample, ImageBuffer, ResizeFilter, CHANNELS};
use crate::io;
use crate::rng;
use crate::scalar::Scalar;

/// Photon count per unit intensity used by the Poisson stage.
const POISSON_PEAK: f64 = 256.0;
/// Smallest intermediate edge length the resample stage will produce.
const MIN_EDGE: usize = 4;

/// Closed interval sampled uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn check(&self, name: &str, lo: f64, hi: f64) -> Result<()> {
        let ok =
            self.min.is_finite() && self.max.is_finite() && self.min <= self.max && self.min >= lo && self.max <= hi;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "{name} range [{}, {}] must satisfy {lo} <= min <= max <= {hi}",
                self.min, self.max
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut rng::Rng) -> f64 {
        let u: f64 = rng.random();
        if self.min == self.max {
            self.min
        } else {
            self.min + (self.max - self.min) * u
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlurConfig {
    /// Gaussian standard deviation in pixels; 0 disables the stage.
    pub sigma: Range,
    /// Odd kernel widths to choose from.
    pub kernel_sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    pub scale: Range,
    pub filters: Vec<ResizeFilter>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Standard deviation of additive Gaussian noise on the `[0,1]` scale.
    pub gaussian_sigma: Range,
    /// Strength of the Poisson (shot) noise term.
    pub poisson_scale: Range,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JpegConfig {
    pub quality_min: u8,
    pub quality_max: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationConfig {
    pub seed: u64,
    pub rounds: usize,
    pub blur: BlurConfig,
    pub resample: ResampleConfig,
    pub noise: NoiseConfig,
    pub jpeg: JpegConfig,
    /// Output size; `None` keeps the input size.
    pub final_size: Option<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Training-pair synthesis.
    Standard,
    /// Milder single preset used to build benchmark inputs.
    Benchmark,
    /// Every stage is (near) identity.
    Identity,
}

impl DegradationConfig {
    pub fn preset(preset: Preset, seed: u64) -> Self {
        match preset {
            Preset::Standard => Self {
                seed,
                rounds: 2,
                blur: BlurConfig {
                    sigma: Range::new(0.2, 3.0),
                    kernel_sizes: vec![7, 9, 11, 13, 15, 17, 19, 21],
                },
                resample: ResampleConfig {
                    scale: Range::new(0.3, 1.2),
                    filters: vec![ResizeFilter::Area, ResizeFilter::Bilinear, ResizeFilter::Bicubic],
                },
                noise: NoiseConfig {
                    gaussian_sigma: Range::new(1.0 / 255.0, 25.0 / 255.0),
                    poisson_scale: Range::new(0.05, 2.5),
                },
                jpeg: JpegConfig {
                    quality_min: 30,
                    quality_max: 95,
                },
                final_size: None,
            },
            Preset::Benchmark => Self {
                seed,
                rounds: 2,
                blur: BlurConfig {
                    sigma: Range::new(0.2, 1.5),
                    kernel_sizes: vec![7, 9, 11],
                },
                resample: ResampleConfig {
                    scale: Range::new(0.5, 1.0),
                    filters: vec![ResizeFilter::Area, ResizeFilter::Bilinear, ResizeFilter::Bicubic],
                },
                noise: NoiseConfig {
                    gaussian_sigma: Range::new(1.0 / 255.0, 10.0 / 255.0),
                    poisson_scale: Range::new(0.05, 1.0),
                },
                jpeg: JpegConfig {
                    quality_min: 60,
                    quality_max: 95,
                },
                final_size: None,
            },
            Preset::Identity => Self {
                seed,
                rounds: 1,
                blur: BlurConfig {
                    sigma: Range::fixed(0.0),
                    kernel_sizes: vec![1],
                },
                resample: ResampleConfig {
                    scale: Range::fixed(1.0),
                    filters: vec![ResizeFilter::Bilinear],
                },
                noise: NoiseConfig {
                    gaussian_sigma: Range::fixed(0.0),
                    poisson_scale: Range::fixed(0.0),
                },
                jpeg: JpegConfig {
                    quality_min: 100,
                    quality_max: 100,
                },
                final_size: None,
            },
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidParameter("rounds must be >= 1".into()));
        }
        self.blur.sigma.check("blur sigma", 0.0, 64.0)?;
        if self.blur.kernel_sizes.is_empty() || self.blur.kernel_sizes.iter().any(|k| k % 2 == 0) {
            return Err(Error::InvalidParameter(
                "kernel sizes must be a non-empty set of odd widths".into(),
            ));
        }
        self.resample.scale.check("resample scale", f64::MIN_POSITIVE, 16.0)?;
        if self.resample.filters.is_empty() {
            return Err(Error::InvalidParameter("resample filter set is empty".into()));
        }
        self.noise.gaussian_sigma.check("gaussian sigma", 0.0, 1.0)?;
        self.noise.poisson_scale.check("poisson scale", 0.0, 16.0)?;
        let JpegConfig {
            quality_min,
            quality_max,
        } = self.jpeg;
        if quality_min == 0 || quality_min > quality_max || quality_max > 100 {
            return Err(Error::InvalidParameter(format!(
                "jpeg quality range [{quality_min}, {quality_max}] must lie within [1, 100]"
            )));
        }
        if let Some((w, h)) = self.final_size {
            if w == 0 || h == 0 {
                return Err(Error::InvalidDimensions { width: w, height: h });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlurStep {
    pub sigma: f64,
    pub kernel_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleStep {
    pub scale: f64,
    pub filter: ResizeFilter,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseStep {
    pub gaussian_sigma: f64,
    pub poisson_scale: f64,
    /// Seed of the per-pixel noise stream.
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JpegStep {
    pub quality: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub blur: BlurStep,
    pub resample: ResampleStep,
    pub noise: NoiseStep,
    pub jpeg: JpegStep,
}

/// Every sampled parameter of one degradation, in application order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationTrace {
    pub generator: String,
    pub seed: u64,
    pub input_size: (usize, usize),
    pub rounds: Vec<RoundTrace>,
    pub final_size: (usize, usize),
    pub final_filter: ResizeFilter,
}

/// Draws all parameters for an input of `input_size`.
pub fn sample_trace(cfg: &DegradationConfig, input_size: (usize, usize)) -> Result<DegradationTrace> {
    cfg.validate()?;
    let (w0, h0) = input_size;
    if w0 == 0 || h0 == 0 {
        return Err(Error::InvalidDimensions { width: w0, height: h0 });
    }
    let mut rng = rng::stream(cfg.seed);
    let (mut w, mut h) = input_size;
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        let sigma = cfg.blur.sigma.sample(&mut rng);
        let kernel_size = cfg.blur.kernel_sizes[rng.random_range(0..cfg.blur.kernel_sizes.len())];
        let scale = cfg.resample.scale.sample(&mut rng);
        let filter = cfg.resample.filters[rng.random_range(0..cfg.resample.filters.len())];
        let nw = scaled_edge(w, scale);
        let nh = scaled_edge(h, scale);
        let gaussian_sigma = cfg.noise.gaussian_sigma.sample(&mut rng);
        let poisson_scale = cfg.noise.poisson_scale.sample(&mut rng);
        let noise_seed: u64 = rng.random();
        let quality = rng.random_range(cfg.jpeg.quality_min..=cfg.jpeg.quality_max);
        rounds.push(RoundTrace {
            blur: BlurStep { sigma, kernel_size },
            resample: ResampleStep {
                scale,
                filter,
                width: nw,
                height: nh,
            },
            noise: NoiseStep {
                gaussian_sigma,
                poisson_scale,
                seed: noise_seed,
            },
            jpeg: JpegStep { quality },
        });
        (w, h) = (nw, nh);
    }
    Ok(DegradationTrace {
        generator: rng::GENERATOR.to_string(),
        seed: cfg.seed,
        input_size,
        rounds,
        final_size: cfg.final_size.unwrap_or(input_size),
        final_filter: ResizeFilter::Bicubic,
    })
}

fn scaled_edge(edge: usize, scale: f64) -> usize {
    if scale == 1.0 {
        return edge;
    }
    ((edge as f64 * scale).round() as usize).max(MIN_EDGE.min(edge))
}

/// Samples a trace from `cfg` and applies it.
pub fn degrade<T: Scalar>(hq: &ImageBuffer<T>, cfg: &DegradationConfig) -> Result<(ImageBuffer<T>, DegradationTrace)> {
    let trace = sample_trace(cfg, hq.dims())?;
    let lq = replay(hq, &trace)?;
    Ok((lq, trace))
}

/// Re-applies a recorded trace.
pub fn replay<T: Scalar>(hq: &ImageBuffer<T>, trace: &DegradationTrace) -> Result<ImageBuffer<T>> {
    if hq.dims() != trace.input_size {
        return Err(Error::DimensionMismatch {
            expected: trace.input_size,
            actual: hq.dims(),
        });
    }
    let mut img = hq.clone();
    for round in &trace.rounds {
        img = gaussian_blur(&img, round.blur.sigma, round.blur.kernel_size);
        let ResampleStep {
            filter, width, height, ..
        } = round.resample;
        img = img.resize(width, height, filter)?;
        img = apply_noise(&img, &round.noise);
        img = jpeg_round_trip(&img, round.jpeg.quality)?;
    }
    let (fw, fh) = trace.final_size;
    Ok(img.resize(fw, fh, trace.final_filter)?.clamp01().value)
}

/// Separable Gaussian blur with half-sample mirror edges. `sigma == 0` or a
/// one-tap kernel is the identity.
pub fn gaussian_blur<T: Scalar>(img: &ImageBuffer<T>, sigma: f64, kernel_size: usize) -> ImageBuffer<T> {
    if sigma <= 0.0 || kernel_size <= 1 {
        return img.clone();
    }
    let half = (kernel_size / 2) as isize;
    let mut kernel: Vec<f64> = (-half..=half)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);

    let (w, h) = img.dims();
    let mirror = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let m = i.rem_euclid(2 * n);
        (if m < n { m } else { 2 * n - 1 - m }) as usize
    };
    let src = img.data();
    let mut tmp = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for (k, wk) in kernel.iter().enumerate() {
                    let sx = mirror(x as isize + k as isize - half, w);
                    acc += wk * src[(y * w + sx) * CHANNELS + c].wide();
                }
                tmp[(y * w + x) * CHANNELS + c] = acc;
            }
        }
    }
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in 0..w {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for (k, wk) in kernel.iter().enumerate() {
                    let sy = mirror(y as isize + k as isize - half, h);
                    acc += wk * tmp[(sy * w + x) * CHANNELS + c];
                }
                out.push(T::lit(acc));
            }
        }
    }
    ImageBuffer::from_raw_unchecked(w, h, out)
}

/// Additive Gaussian plus scaled Poisson noise in linear light, clamped to
/// `[0,1]`. A step with both strengths at zero is the identity and draws
/// nothing.
pub fn apply_noise<T: Scalar>(img: &ImageBuffer<T>, step: &NoiseStep) -> ImageBuffer<T> {
    if step.gaussian_sigma <= 0.0 && step.poisson_scale <= 0.0 {
        return img.clone();
    }
    let mut rng = rng::stream(step.seed);
    let mut data: Vec<f64> = img.data().iter().map(|v| v.wide()).collect();
    if step.gaussian_sigma > 0.0 {
        let normal = Normal::new(0.0, step.gaussian_sigma).expect("sigma validated > 0");
        for v in &mut data {
            *v += normal.sample(&mut rng);
        }
    }
    if step.poisson_scale > 0.0 {
        for v in &mut data {
            let lambda = v.clamp(0.0, 1.0) * POISSON_PEAK;
            let counts = if lambda > 0.0 {
                Poisson::new(lambda).expect("lambda > 0").sample(&mut rng)
            } else {
                0.0
            };
            *v += step.poisson_scale * (counts / POISSON_PEAK - v.clamp(0.0, 1.0));
        }
    }
    let (w, h) = img.dims();
    ImageBuffer::from_raw_unchecked(w, h, data.into_iter().map(|v| T::lit(v.clamp(0.0, 1.0))).collect())
}

/// Encodes to 8-bit sRGB JPEG at `quality`, decodes, and returns to linear
/// light.
pub fn jpeg_round_trip<T: Scalar>(img: &ImageBuffer<T>, quality: u8) -> Result<ImageBuffer<T>> {
    let (w, h) = img.dims();
    let rgb = io::to_srgb8(img);
    let bytes = io::encode_jpeg_rgb8(w, h, &rgb, quality)?;
    let (dw, dh, decoded) = io::decode_jpeg_rgb8(&bytes)?;
    if (dw, dh) != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: (w, h),
            actual: (dw, dh),
        });
    }
    let data = decoded
        .into_iter()
        .map(|v| srgb_to_linear_sample(T::lit(f64::from(v) / 255.0)))
        .collect();
    Ok(ImageBuffer::from_raw_unchecked(w, h, data))
}

/// Largest per-sample difference between the 8-bit sRGB encodings of two
/// linear images, in `[0,1]` units (code difference / 255).
pub fn max_encoded_error<T: Scalar>(a: &ImageBuffer<T>, b: &ImageBuffer<T>) -> f64 {
    io::to_srgb8(a)
        .into_iter()
        .zip(io::to_srgb8(b))
        .map(|(x, y)| x.abs_diff(y))
        .max()
        .map_or(0.0, |d| f64::from(d) / 255.0)
}

/// Serialises traces one JSON object per line.
pub fn write_trace_lines<'a>(traces: impl IntoIterator<Item = &'a DegradationTrace>) -> Result<String> {
    let mut out = String::new();
    for t in traces {
        out.push_str(&serde_json::to_string(t)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_trace_lines(text: &str) -> Result<Vec<DegradationTrace>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
