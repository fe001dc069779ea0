//! Full-reference quality metrics and a sharpness statistic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::scalar::Scalar;

/// Reported PSNR for a perfect match, keeping corpus means finite.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn same_dims<T: Scalar>(a: &ImageBuffer<T>, b: &ImageBuffer<T>) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            actual: b.dims(),
        });
    }
    Ok(())
}

/// Mean squared error over every sample of every channel.
pub fn mse<T: Scalar>(a: &ImageBuffer<T>, b: &ImageBuffer<T>) -> Result<f64> {
    same_dims(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x.wide() - y.wide();
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// `10·log10(peak² / MSE)` in dB, capped at [`PSNR_CAP_DB`].
pub fn psnr<T: Scalar>(a: &ImageBuffer<T>, b: &ImageBuffer<T>, peak: f64) -> Result<f64> {
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let x = i as f64 - half;
            (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Valid-region separable filtering of a `w × h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = k.iter().enumerate().map(|(i, kv)| kv * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(i, kv)| kv * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM on Rec. 601 luma with an 11×11 Gaussian window (σ = 1.5),
/// peak 1.0, evaluated over window positions fully inside the image.
pub fn ssim<T: Scalar>(a: &ImageBuffer<T>, b: &ImageBuffer<T>) -> Result<f64> {
    same_dims(a, b)?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidDimensions { width: w, height: h });
    }
    let x: Vec<f64> = a.luma().data().iter().map(|v| v.wide()).collect();
    let y: Vec<f64> = b.luma().data().iter().map(|v| v.wide()).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();

    let k = gaussian_window();
    let mx = filter_valid(&x, w, h, &k);
    let my = filter_valid(&y, w, h, &k);
    let sxx = filter_valid(&xx, w, h, &k);
    let syy = filter_valid(&yy, w, h, &k);
    let sxy = filter_valid(&xy, w, h, &k);

    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

/// Largest absolute 4-neighbour Laplacian of luma over interior pixels.
pub fn max_laplacian<T: Scalar>(img: &ImageBuffer<T>) -> f64 {
    let l = img.luma();
    let (w, h) = l.dims();
    let mut best = 0.0f64;
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let c = l.get(x, y).wide();
            let lap = l.get(x - 1, y).wide() + l.get(x + 1, y).wide() + l.get(x, y - 1).wide() + l.get(x, y + 1).wide()
                - 4.0 * c;
            best = best.max(lap.abs());
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
}

impl MetricReport {
    pub fn compute<T: Scalar>(a: &ImageBuffer<T>, b: &ImageBuffer<T>) -> Result<Self> {
        Ok(Self {
            psnr: psnr(a, b, 1.0)?,
            ssim: ssim(a, b)?,
        })
    }

    pub fn mean(reports: &[MetricReport]) -> Option<MetricReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        Some(MetricReport {
            psnr: reports.iter().map(|r| r.psnr).sum::<f64>() / n,
            ssim: reports.iter().map(|r| r.ssim).sum::<f64>() / n,
        })
    }
}
