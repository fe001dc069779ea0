//! Thin-lens bokeh rendering.
//!
//! Every source pixel spreads its energy over a uniform disc whose radius is
//! its circle of confusion. Boundary pixels of the disc are coverage-weighted
//! with `w = clamp(r + 0.5 − dist, 0, 1)`, which makes the result continuous
//! in the radius; radii below half a pixel leave the pixel where it is. Each
//! source's disc is normalised to unit energy and every destination divides
//! by the total weight it received. Energy that lands outside the frame is
//! folded back with half-sample mirror reflection.
//!
//! Work is split into fixed-height bands of source rows. Bands scatter into
//! private buffers in parallel and are merged in band order, so the output
//! does not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defocus::{compute_defocus, DefocusMap, LensParams};
use crate::error::{Error, Result};
use crate::image::{AlphaMatte, DisparityMap, ImageBuffer, ScalarField, CHANNELS};
use crate::scalar::Scalar;

const BAND_ROWS: usize = 32;
const BANDS_IN_FLIGHT: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Psf {
    #[default]
    UniformDisc,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSpace {
    #[default]
    Linear,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgePolicy {
    #[default]
    Mirror,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub psf: Psf,
    pub gamma_space: GammaSpace,
    pub edge_policy: EdgePolicy,
    /// Largest radius the renderer accepts, in pixels.
    pub max_radius: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self::with_max_radius(64.0)
    }
}

impl RenderConfig {
    pub fn with_max_radius(max_radius: f64) -> Self {
        Self {
            psf: Psf::UniformDisc,
            gamma_space: GammaSpace::Linear,
            edge_policy: EdgePolicy::Mirror,
            max_radius,
        }
    }

    /// Config whose radius budget is exactly what `lens` can produce.
    pub fn for_lens<T: Scalar>(lens: &LensParams<T>) -> Self {
        Self::with_max_radius(lens.blur_intensity.wide())
    }

    fn validate(&self) -> Result<()> {
        if !(self.max_radius >= 0.0) || !self.max_radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "max_radius must be finite and >= 0, got {}",
                self.max_radius
            )));
        }
        Ok(())
    }
}

/// One compositing layer: colour, coverage and per-pixel disparity.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneLayer<T> {
    pub color: ImageBuffer<T>,
    pub alpha: AlphaMatte<T>,
    pub disparity: DisparityMap<T>,
}

impl<T: Scalar> SceneLayer<T> {
    pub fn new(color: ImageBuffer<T>, alpha: AlphaMatte<T>, disparity: DisparityMap<T>) -> Result<Self> {
        let dims = color.dims();
        for other in [alpha.dims(), disparity.dims()] {
            if other != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    actual: other,
                });
            }
        }
        Ok(Self {
            color,
            alpha,
            disparity,
        })
    }

    /// Opaque layer.
    pub fn opaque(color: ImageBuffer<T>, disparity: DisparityMap<T>) -> Result<Self> {
        let (w, h) = color.dims();
        Self::new(color, AlphaMatte::opaque(w, h)?, disparity)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.color.dims()
    }

    pub fn flip_horizontal(&self) -> Self {
        Self {
            color: self.color.flip_horizontal(),
            alpha: self.alpha.flip_horizontal(),
            disparity: self.disparity.flip_horizontal(),
        }
    }

    /// `color · alpha`, per channel.
    pub fn premultiplied(&self) -> ImageBuffer<T> {
        let a = self.alpha.field().data();
        let data = self
            .color
            .data()
            .chunks_exact(CHANNELS)
            .zip(a)
            .flat_map(|(p, &a)| [p[0] * a, p[1] * a, p[2] * a])
            .collect();
        ImageBuffer::from_raw_unchecked(self.color.width(), self.color.height(), data)
    }
}

/// Layers ordered back to front, plus the lens that images them.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredScene<T> {
    layers: Vec<SceneLayer<T>>,
    pub lens: LensParams<T>,
}

impl<T: Scalar> LayeredScene<T> {
    pub fn new(layers: Vec<SceneLayer<T>>, lens: LensParams<T>) -> Result<Self> {
        let scene = Self { layers, lens };
        scene.validate()?;
        Ok(scene)
    }

    pub fn layers(&self) -> &[SceneLayer<T>] {
        &self.layers
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.layers.first().map(SceneLayer::dims)
    }

    pub fn with_lens(&self, lens: LensParams<T>) -> Self {
        Self {
            layers: self.layers.clone(),
            lens,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let back = self.layers.first().ok_or(Error::EmptyScene)?;
        self.lens.validate()?;
        let dims = back.dims();
        if !back.alpha.is_opaque() {
            return Err(Error::InvalidScene("back layer must be fully opaque".into()));
        }
        for layer in &self.layers {
            if layer.dims() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    actual: layer.dims(),
                });
            }
        }
        for (i, behind) in self.layers.iter().enumerate() {
            for (j, front) in self.layers.iter().enumerate().skip(i + 1) {
                let ordered = behind
                    .alpha
                    .field()
                    .data()
                    .iter()
                    .zip(front.alpha.field().data())
                    .zip(behind.disparity.data().iter().zip(front.disparity.data()))
                    .all(|((&ab, &af), (&db, &df))| ab == T::zero() || af == T::zero() || df >= db);
                if !ordered {
                    return Err(Error::InvalidScene(format!(
                        "layer {j} lies behind layer {i} where both are visible"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Coverage weight of a destination at `dist` from a source of radius `r`.
#[inline]
fn coverage(dist: f64, r: f64) -> f64 {
    (r + 0.5 - dist).clamp(0.0, 1.0)
}

/// Half-sample mirror reflection into `[0, n)`, periodic with period `2n`.
#[inline]
fn reflect(i: isize, n: isize) -> usize {
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Scattered sums of `planes` plus the received weight, normalised per
/// destination. `S` is the number of planes plus one for the weight.
fn scatter_planes<T: Scalar, const S: usize>(
    width: usize,
    height: usize,
    planes: &[&[T]],
    radii: &[T],
    max_radius: f64,
) -> Vec<Vec<f64>> {
    debug_assert_eq!(planes.len() + 1, S);
    let pad = (max_radius + 0.5).ceil() as usize;
    let pw = width + 2 * pad;
    let ph = height + 2 * pad;
    let mut global = vec![[0.0f64; S]; pw * ph];

    let bands: Vec<(usize, usize)> = (0..height)
        .step_by(BAND_ROWS)
        .map(|y0| (y0, (y0 + BAND_ROWS).min(height)))
        .collect();

    for group in bands.chunks(BANDS_IN_FLIGHT) {
        let locals: Vec<Vec<[f64; S]>> = group
            .par_iter()
            .map(|&(y0, y1)| scatter_band::<T, S>(width, y0, y1, pad, planes, radii))
            .collect();
        for (&(y0, _), local) in group.iter().zip(locals) {
            // local row k corresponds to padded row y0 + k
            let base = y0 * pw;
            for (g, l) in global[base..base + local.len()].iter_mut().zip(&local) {
                for k in 0..S {
                    g[k] += l[k];
                }
            }
        }
    }

    // Fold padding back into the frame.
    let (w, h) = (width as isize, height as isize);
    let mut interior = vec![[0.0f64; S]; width * height];
    for py in 0..ph {
        let sy = reflect(py as isize - pad as isize, h);
        for px in 0..pw {
            let sx = reflect(px as isize - pad as isize, w);
            let src = &global[py * pw + px];
            let dst = &mut interior[sy * width + sx];
            for k in 0..S {
                dst[k] += src[k];
            }
        }
    }

    let mut out = vec![Vec::with_capacity(width * height); S - 1];
    for px in &interior {
        let wsum = px[S - 1];
        for (c, plane) in out.iter_mut().enumerate() {
            plane.push(px[c] / wsum);
        }
    }
    out
}

/// Fixed-point scale for run accumulation. Integer prefix sums cancel
/// exactly, so pixels outside every run receive exactly nothing.
const RUN_SCALE: f64 = (1u64 << 62) as f64;

/// Normalised disc weights split into one full-coverage run per row plus the
/// partially covered rim.
#[derive(Default)]
struct Stamp {
    radius: f64,
    /// `(dy, half_width)`: offsets `-half_width..=half_width` on row `dy`.
    runs: Vec<(isize, isize)>,
    run_weight: f64,
    rim: Vec<(isize, isize, f64)>,
}

impl Stamp {
    fn rebuild(&mut self, r: f64) {
        let extent = (r + 0.5).ceil() as isize;
        self.radius = r;
        self.runs.clear();
        self.rim.clear();
        let mut total = 0.0;
        let mut full = 0usize;
        for dy in -extent..=extent {
            let fy = dy as f64;
            let w = |dx: isize| coverage(((dx * dx) as f64 + fy * fy).sqrt(), r);
            // Coverage falls monotonically in |dx|; find the last full and
            // the last non-zero offset, starting from the analytic guesses.
            let mut half = ((r - 0.5) * (r - 0.5) - fy * fy).max(0.0).sqrt().floor() as isize;
            while w(half + 1) >= 1.0 {
                half += 1;
            }
            while half >= 0 && w(half) < 1.0 {
                half -= 1;
            }
            let mut outer = ((r + 0.5) * (r + 0.5) - fy * fy).max(0.0).sqrt().ceil() as isize;
            while w(outer + 1) > 0.0 {
                outer += 1;
            }
            while outer > half && w(outer) <= 0.0 {
                outer -= 1;
            }
            if half >= 0 {
                self.runs.push((dy, half));
                full += (2 * half + 1) as usize;
            }
            for dx in (half + 1).max(0)..=outer {
                let wt = w(dx);
                self.rim.push((dx, dy, wt));
                total += wt;
                if dx != 0 {
                    self.rim.push((-dx, dy, wt));
                    total += wt;
                }
            }
        }
        total += full as f64;
        self.run_weight = 1.0 / total;
        for s in self.rim.iter_mut() {
            s.2 /= total;
        }
    }
}

fn scatter_band<T: Scalar, const S: usize>(
    width: usize,
    y0: usize,
    y1: usize,
    pad: usize,
    planes: &[&[T]],
    radii: &[T],
) -> Vec<[f64; S]> {
    let pw = width + 2 * pad;
    let rows = y1 - y0 + 2 * pad;
    let mut buf = vec![[0.0f64; S]; rows * pw];
    // Per-row difference arrays for the constant-weight runs.
    let dw = pw + 1;
    let mut diff = vec![[0i128; S]; rows * dw];
    let mut stamp = Stamp {
        radius: f64::NAN,
        ..Stamp::default()
    };
    // Last slot carries the unit weight.
    let mut values = [1.0f64; S];
    let mut fixed = [0i128; S];

    for y in y0..y1 {
        for x in 0..width {
            let i = y * width + x;
            for (v, p) in values.iter_mut().zip(planes) {
                *v = p[i].wide();
            }
            let r = radii[i].wide();
            // (x, y) sits at padded (x + pad, y + pad), local row y - y0 + pad.
            let cx = (x + pad) as isize;
            let cy = (y - y0 + pad) as isize;
            if r < 0.5 {
                let b = &mut buf[cy as usize * pw + cx as usize];
                for k in 0..S {
                    b[k] += values[k];
                }
                continue;
            }
            if r != stamp.radius {
                stamp.rebuild(r);
            }
            for &(dx, dy, w) in &stamp.rim {
                let b = &mut buf[(cy + dy) as usize * pw + (cx + dx) as usize];
                for k in 0..S {
                    b[k] += values[k] * w;
                }
            }
            for k in 0..S {
                fixed[k] = (values[k] * stamp.run_weight * RUN_SCALE).round() as i128;
            }
            for &(dy, half) in &stamp.runs {
                let row = (cy + dy) as usize * dw;
                let start = &mut diff[row + (cx - half) as usize];
                for k in 0..S {
                    start[k] += fixed[k];
                }
                let end = &mut diff[row + (cx + half + 1) as usize];
                for k in 0..S {
                    end[k] -= fixed[k];
                }
            }
        }
    }

    for row in 0..rows {
        let mut acc = [0i128; S];
        for x in 0..pw {
            let d = &diff[row * dw + x];
            let b = &mut buf[row * pw + x];
            for k in 0..S {
                acc[k] += d[k];
                if acc[k] != 0 {
                    b[k] += acc[k] as f64 / RUN_SCALE;
                }
            }
        }
    }
    buf
}

fn check_radii<T: Scalar>(defocus: &DefocusMap<T>, cfg: &RenderConfig) -> Result<()> {
    cfg.validate()?;
    let max = defocus.max_radius().wide();
    // Allow one rounding step when max_radius is derived from K in f64.
    if max > cfg.max_radius * (1.0 + 1e-6) {
        return Err(Error::InvalidParameter(format!(
            "blur radius {max} exceeds configured max_radius {}",
            cfg.max_radius
        )));
    }
    Ok(())
}

/// Scatter-renders `img` with per-pixel radii from `defocus`.
pub fn render_scatter<T: Scalar>(
    img: &ImageBuffer<T>,
    defocus: &DefocusMap<T>,
    cfg: &RenderConfig,
) -> Result<ImageBuffer<T>> {
    if img.dims() != defocus.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            actual: defocus.dims(),
        });
    }
    check_radii(defocus, cfg)?;
    let (w, h) = img.dims();
    let channels: Vec<Vec<T>> = (0..CHANNELS)
        .map(|c| img.data().iter().skip(c).step_by(CHANNELS).copied().collect())
        .collect();
    let planes: Vec<&[T]> = channels.iter().map(Vec::as_slice).collect();
    let out = scatter_planes::<T, 4>(w, h, &planes, defocus.field().data(), defocus.max_radius().wide());
    let data = (0..w * h)
        .flat_map(|i| [T::lit(out[0][i]), T::lit(out[1][i]), T::lit(out[2][i])])
        .collect();
    Ok(ImageBuffer::from_raw_unchecked(w, h, data))
}

/// Blurred premultiplied colour and blurred alpha of one layer. Colour and
/// alpha share the same scatter weights.
pub fn render_layer_blur<T: Scalar>(
    layer: &SceneLayer<T>,
    lens: &LensParams<T>,
    cfg: &RenderConfig,
) -> Result<(ImageBuffer<T>, AlphaMatte<T>)> {
    let defocus = compute_defocus(&layer.disparity, lens)?.into_inner();
    check_radii(&defocus, cfg)?;
    let (w, h) = layer.dims();
    let premul = layer.premultiplied();
    let channels: Vec<Vec<T>> = (0..CHANNELS)
        .map(|c| premul.data().iter().skip(c).step_by(CHANNELS).copied().collect())
        .collect();
    let planes = [
        channels[0].as_slice(),
        channels[1].as_slice(),
        channels[2].as_slice(),
        layer.alpha.field().data(),
    ];
    let out = scatter_planes::<T, 5>(w, h, &planes, defocus.field().data(), defocus.max_radius().wide());
    let color = (0..w * h)
        .flat_map(|i| [T::lit(out[0][i]), T::lit(out[1][i]), T::lit(out[2][i])])
        .collect();
    let alpha = out[3].iter().map(|&a| T::lit(a.clamp(0.0, 1.0))).collect();
    Ok((
        ImageBuffer::from_raw_unchecked(w, h, color),
        AlphaMatte::from_field_unchecked(ScalarField::from_raw_unchecked(w, h, alpha)),
    ))
}

/// Blurs every layer independently, then composites back to front with the
/// premultiplied over operator.
pub fn render_layered<T: Scalar>(scene: &LayeredScene<T>, cfg: &RenderConfig) -> Result<ImageBuffer<T>> {
    scene.validate()?;
    let (w, h) = scene.dims().ok_or(Error::EmptyScene)?;
    let mut out = vec![T::zero(); w * h * CHANNELS];
    for layer in scene.layers() {
        let (premul, alpha) = render_layer_blur(layer, &scene.lens, cfg)?;
        for ((o, c), &a) in out
            .chunks_exact_mut(CHANNELS)
            .zip(premul.data().chunks_exact(CHANNELS))
            .zip(alpha.field().data())
        {
            let keep = T::one() - a;
            for k in 0..CHANNELS {
                o[k] = c[k] + keep * o[k];
            }
        }
    }
    Ok(ImageBuffer::from_raw_unchecked(w, h, out))
}

/// Disparity of the layer contributing most to each pixel's sharp
/// composite, i.e. `argmax_i α_i · Π_{j>i}(1 − α_j)`; ties go to the front.
pub fn visible_disparity<T: Scalar>(scene: &LayeredScene<T>) -> Result<DisparityMap<T>> {
    let (w, h) = scene.dims().ok_or(Error::EmptyScene)?;
    let data = (0..w * h)
        .map(|i| {
            let mut transmit = T::one();
            let mut best = T::neg_infinity();
            let mut disparity = T::zero();
            for layer in scene.layers().iter().rev() {
                let a = layer.alpha.field().data()[i];
                let weight = a * transmit;
                if weight > best {
                    best = weight;
                    disparity = layer.disparity.data()[i];
                }
                transmit *= T::one() - a;
            }
            disparity
        })
        .collect();
    Ok(ScalarField::from_raw_unchecked(w, h, data))
}

/// The triple recorded for one training sample.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth<T> {
    pub bokeh: ImageBuffer<T>,
    pub disparity: DisparityMap<T>,
    pub defocus: DefocusMap<T>,
}

/// Renders `scene` through `lens` and derives the visible disparity and its
/// defocus map.
pub fn render_ground_truth<T: Scalar>(scene: &LayeredScene<T>, lens: &LensParams<T>) -> Result<GroundTruth<T>> {
    let scene = scene.with_lens(*lens);
    let bokeh = render_layered(&scene, &RenderConfig::for_lens(lens))?;
    let disparity = visible_disparity(&scene)?;
    let defocus = compute_defocus(&disparity, lens)?.into_inner();
    Ok(GroundTruth {
        bokeh,
        disparity,
        defocus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_image(w: usize, h: usize, seed: u64) -> ImageBuffer<f32> {
        let mut s = seed;
        ImageBuffer::from_fn(w, h, |_, _| {
            let mut next = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 40) as f32) / (1u64 << 24) as f32
            };
            [next(), next(), next()]
        })
        .unwrap()
    }

    fn constant_radius(w: usize, h: usize, r: f32) -> DefocusMap<f32> {
        DefocusMap::new(ScalarField::filled(w, h, r).unwrap()).unwrap()
    }

    #[test]
    fn reflect_is_half_sample_mirror() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
    }

    #[test]
    fn zero_radius_is_bitwise_identity() {
        let img = noise_image(23, 17, 3);
        let out = render_scatter(&img, &constant_radius(23, 17, 0.0), &RenderConfig::default()).unwrap();
        assert_eq!(out, img);
        let out = render_scatter(&img, &constant_radius(23, 17, 0.49), &RenderConfig::default()).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = ImageBuffer::filled(20, 14, [0.2f32, 0.4, 0.9]).unwrap();
        let r = DefocusMap::new(ScalarField::from_fn(20, 14, |x, y| ((x * 3 + y) % 9) as f32).unwrap()).unwrap();
        let out = render_scatter(&img, &r, &RenderConfig::default()).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn mismatched_dims_and_excess_radius_error() {
        let img = noise_image(8, 8, 1);
        assert!(render_scatter(&img, &constant_radius(8, 7, 1.0), &RenderConfig::default()).is_err());
        assert!(render_scatter(&img, &constant_radius(8, 8, 5.0), &RenderConfig::with_max_radius(4.0)).is_err());
    }

    #[test]
    fn constant_radius_conserves_energy_exactly() {
        let img = noise_image(40, 31, 9);
        for r in [1.0f32, 2.5, 7.0, 16.0, 45.0] {
            let out = render_scatter(&img, &constant_radius(40, 31, r), &RenderConfig::default()).unwrap();
            let rel = (out.mean() - img.mean()).abs() / img.mean();
            assert!(rel < 1e-5, "r={r}: {rel}");
        }
    }

    #[test]
    fn radius_continuity_at_half_pixel() {
        let img = noise_image(12, 12, 5);
        let a = render_scatter(&img, &constant_radius(12, 12, 0.4999), &RenderConfig::default()).unwrap();
        let b = render_scatter(&img, &constant_radius(12, 12, 0.5001), &RenderConfig::default()).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-3);
        }
    }

    #[test]
    fn result_is_independent_of_thread_count() {
        let img = noise_image(70, 90, 11);
        let r = DefocusMap::new(ScalarField::from_fn(70, 90, |x, y| ((x + 2 * y) % 13) as f32 * 0.7).unwrap()).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| render_scatter(&img, &r, &RenderConfig::default()).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn scene_validation() {
        let lens = LensParams::new(4.0f32, 0.5).unwrap();
        assert!(matches!(LayeredScene::new(vec![], lens), Err(Error::EmptyScene)));

        let color = noise_image(6, 6, 2);
        let half = AlphaMatte::new(ScalarField::filled(6, 6, 0.5f32).unwrap()).unwrap();
        let d = |v: f32| ScalarField::filled(6, 6, v).unwrap();
        let translucent_back = SceneLayer::new(color.clone(), half.clone(), d(0.2)).unwrap();
        assert!(LayeredScene::new(vec![translucent_back], lens).is_err());

        let back = SceneLayer::opaque(color.clone(), d(0.6)).unwrap();
        let front = SceneLayer::new(color.clone(), half, d(0.3)).unwrap();
        assert!(LayeredScene::new(vec![back.clone(), front], lens).is_err());

        let wrong_size = SceneLayer::opaque(noise_image(5, 6, 2), ScalarField::filled(5, 6, 0.9).unwrap()).unwrap();
        assert!(LayeredScene::new(vec![back, wrong_size], lens).is_err());
    }

    #[test]
    fn layer_blur_reduces_to_scatter_for_opaque_constant_layer() {
        let color = noise_image(16, 16, 4);
        let layer = SceneLayer::opaque(color.clone(), ScalarField::filled(16, 16, 0.2f32).unwrap()).unwrap();
        let lens = LensParams::new(10.0f32, 0.6).unwrap();
        let cfg = RenderConfig::for_lens(&lens);
        let (premul, alpha) = render_layer_blur(&layer, &lens, &cfg).unwrap();
        let direct = render_scatter(&color, &constant_radius(16, 16, lens.radius(0.2)), &cfg).unwrap();
        assert_eq!(premul, direct);
        assert!(alpha.field().data().iter().all(|&a| (a - 1.0).abs() < 1e-6));
    }

    #[test]
    fn focused_opaque_layer_is_unchanged() {
        let color = noise_image(10, 10, 8);
        let layer = SceneLayer::opaque(color.clone(), ScalarField::filled(10, 10, 0.7f32).unwrap()).unwrap();
        let lens = LensParams::new(20.0f32, 0.7).unwrap();
        let (premul, _) = render_layer_blur(&layer, &lens, &RenderConfig::for_lens(&lens)).unwrap();
        assert_eq!(premul, color);
    }

    #[test]
    fn half_opaque_constant_layer_keeps_half_alpha() {
        let layer = SceneLayer::new(
            ImageBuffer::filled(12, 12, [0.8f32, 0.1, 0.3]).unwrap(),
            AlphaMatte::new(ScalarField::filled(12, 12, 0.5f32).unwrap()).unwrap(),
            ScalarField::filled(12, 12, 0.9f32).unwrap(),
        )
        .unwrap();
        let lens = LensParams::new(8.0f32, 0.1).unwrap();
        let (_, alpha) = render_layer_blur(&layer, &lens, &RenderConfig::for_lens(&lens)).unwrap();
        assert!(alpha.field().data().iter().all(|&a| (a - 0.5).abs() < 1e-6));
    }

    #[test]
    fn single_layer_scene_equals_layer_blur() {
        let layer = SceneLayer::opaque(
            noise_image(14, 9, 6),
            ScalarField::from_fn(14, 9, |x, _| x as f32 / 13.0).unwrap(),
        )
        .unwrap();
        let lens = LensParams::new(6.0f32, 0.3).unwrap();
        let scene = LayeredScene::new(vec![layer.clone()], lens).unwrap();
        let cfg = RenderConfig::for_lens(&lens);
        let (premul, _) = render_layer_blur(&layer, &lens, &cfg).unwrap();
        let out = render_layered(&scene, &cfg).unwrap();
        for (a, b) in out.data().iter().zip(premul.data()) {
            // over "nothing": c + (1 - a)·0
            assert_eq!(a, b);
        }
    }
}
