//! Independent reference implementations checked against the library.

use bokeh_core::defocus::{DefocusMap, LensParams};
use bokeh_core::image::{srgb_to_linear_sample, AlphaMatte, ImageBuffer, ScalarField};
use bokeh_core::metrics::{psnr, ssim};
use bokeh_core::render::{render_layered, render_scatter, visible_disparity, LayeredScene, RenderConfig, SceneLayer};

/// Disc coverage summed over integer offsets.
fn disc_total(r: f64) -> f64 {
    let e = (r + 0.5).ceil() as i64;
    let mut t = 0.0;
    for dy in -e..=e {
        for dx in -e..=e {
            t += (r + 0.5 - ((dx * dx + dy * dy) as f64).sqrt()).clamp(0.0, 1.0);
        }
    }
    t
}

#[test]
fn single_point_spreads_into_the_normalised_disc() {
    let n = 33;
    let c = 16;
    let img = ImageBuffer::from_fn(n, n, |x, y| if (x, y) == (c, c) { [1.0f64; 3] } else { [0.0; 3] }).unwrap();
    let r = 3.0;
    let d = DefocusMap::new(ScalarField::filled(n, n, r).unwrap()).unwrap();
    let out = render_scatter(&img, &d, &RenderConfig::with_max_radius(r)).unwrap();
    let total = disc_total(r);
    for y in 0..n {
        for x in 0..n {
            let dist = (((x as f64 - c as f64).powi(2)) + (y as f64 - c as f64).powi(2)).sqrt();
            let expect = (r + 0.5 - dist).clamp(0.0, 1.0) / total;
            for v in out.pixel(x, y) {
                assert!((v - expect).abs() < 1e-5, "({x},{y}) {v} vs {expect}");
            }
        }
    }
}

/// Every position congruent to `p` under half-sample mirroring whose
/// distance from `s` is within `reach`.
fn mirror_images(p: usize, n: usize, s: usize, reach: f64) -> Vec<f64> {
    let (p, n, s) = (p as f64, n as f64, s as f64);
    let mut out = Vec::new();
    for k in -2..=2 {
        for q in [p + 2.0 * n * k as f64, -1.0 - p + 2.0 * n * k as f64] {
            if (q - s).abs() <= reach {
                out.push(q - s);
            }
        }
    }
    out
}

/// Weight of source `s` (radius `r`) arriving at destination `p`.
fn pair_weight(s: (usize, usize), p: (usize, usize), r: f64, dims: (usize, usize)) -> f64 {
    if r < 0.5 {
        return f64::from(u8::from(s == p));
    }
    let reach = r + 0.5;
    let mut w = 0.0;
    for dx in mirror_images(p.0, dims.0, s.0, reach) {
        for dy in mirror_images(p.1, dims.1, s.1, reach) {
            w += (reach - (dx * dx + dy * dy).sqrt()).clamp(0.0, 1.0);
        }
    }
    w / disc_total(r)
}

fn oracle_layered(scene: &LayeredScene<f64>) -> Vec<f64> {
    let (w, h) = scene.dims().unwrap();
    let lens = scene.lens;
    let mut out = vec![0.0; w * h * 3];
    for layer in scene.layers() {
        for py in 0..h {
            for px in 0..w {
                let (mut acc, mut alpha, mut wsum) = ([0.0; 3], 0.0, 0.0);
                for sy in 0..h {
                    for sx in 0..w {
                        let r = lens.radius(layer.disparity.get(sx, sy));
                        let wt = pair_weight((sx, sy), (px, py), r, (w, h));
                        if wt == 0.0 {
                            continue;
                        }
                        let a = layer.alpha.get(sx, sy);
                        let c = layer.color.pixel(sx, sy);
                        for k in 0..3 {
                            acc[k] += wt * a * c[k];
                        }
                        alpha += wt * a;
                        wsum += wt;
                    }
                }
                let a = alpha / wsum;
                let o = &mut out[(py * w + px) * 3..(py * w + px) * 3 + 3];
                for k in 0..3 {
                    o[k] = acc[k] / wsum + (1.0 - a) * o[k];
                }
            }
        }
    }
    out
}

fn lcg(seed: u64) -> impl FnMut() -> f64 {
    let mut s = seed;
    move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn two_layer_scene(seed: u64, n: usize, k: f64) -> LayeredScene<f64> {
    let mut u = lcg(seed);
    let bg = ImageBuffer::from_fn(n, n, |_, _| [u(), u(), u()]).unwrap();
    let ramp = ScalarField::from_fn(n, n, |_, y| 0.1 + 0.3 * y as f64 / n as f64).unwrap();
    let fg = ImageBuffer::from_fn(n, n, |_, _| [u(), u(), u()]).unwrap();
    let (cx, cy, rad) = (
        n as f64 * (0.3 + 0.4 * u()),
        n as f64 * (0.3 + 0.4 * u()),
        n as f64 * 0.25,
    );
    let alpha = ScalarField::from_fn(n, n, |x, y| {
        let d = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
        (rad - d + 0.5).clamp(0.0, 1.0)
    })
    .unwrap();
    let fd = 0.6 + 0.4 * u();
    let df = u();
    LayeredScene::new(
        vec![
            SceneLayer::opaque(bg, ramp).unwrap(),
            SceneLayer::new(
                fg,
                AlphaMatte::new(alpha).unwrap(),
                ScalarField::filled(n, n, fd).unwrap(),
            )
            .unwrap(),
        ],
        LensParams::new(k, df).unwrap(),
    )
    .unwrap()
}

#[test]
fn layered_render_matches_pixel_pair_oracle() {
    for seed in 0..3 {
        let scene = two_layer_scene(seed, 20, 2.0 + 3.0 * seed as f64);
        let got = render_layered(&scene, &RenderConfig::with_max_radius(16.0)).unwrap();
        let want = oracle_layered(&scene);
        let err = got
            .data()
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "seed {seed}: {err}");
    }
}

#[test]
fn visible_disparity_matches_front_to_back_oracle() {
    let scene = two_layer_scene(5, 16, 4.0);
    let vis = visible_disparity(&scene).unwrap();
    let [bg, fg] = scene.layers() else { panic!() };
    for y in 0..16 {
        for x in 0..16 {
            let a = fg.alpha.get(x, y);
            let expect = if a >= 1.0 - a {
                fg.disparity.get(x, y)
            } else {
                bg.disparity.get(x, y)
            };
            assert_eq!(vis.get(x, y), expect);
        }
    }
}

/// Direct (non-separable) SSIM over every 11×11 window.
fn ssim_direct(a: &ImageBuffer<f64>, b: &ImageBuffer<f64>) -> f64 {
    let (w, h) = a.dims();
    let luma = |img: &ImageBuffer<f64>, x: usize, y: usize| {
        let p = img.pixel(x, y);
        0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
    };
    let g: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / 4.5).exp()).collect();
    let gs: f64 = g.iter().sum();
    let (c1, c2) = (1e-4, 9e-4);
    let mut total = 0.0;
    let mut count = 0;
    for oy in 0..=h - 11 {
        for ox in 0..=w - 11 {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for j in 0..11 {
                for i in 0..11 {
                    let wt = g[i] * g[j] / (gs * gs);
                    let x = luma(a, ox + i, oy + j);
                    let y = luma(b, ox + i, oy + j);
                    mx += wt * x;
                    my += wt * y;
                    sxx += wt * x * x;
                    syy += wt * y * y;
                    sxy += wt * x * y;
                }
            }
            let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / count as f64
}

#[test]
fn ssim_and_psnr_match_direct_formulas() {
    for seed in 0..5 {
        let mut u = lcg(100 + seed);
        let a = ImageBuffer::from_fn(32, 32, |_, _| [u(), u(), u()]).unwrap();
        let b = ImageBuffer::new(
            32,
            32,
            a.data()
                .iter()
                .map(|v| (v + 0.1 * (u() - 0.5)).clamp(0.0, 1.0))
                .collect(),
        )
        .unwrap();
        assert!((ssim(&a, &b).unwrap() - ssim_direct(&a, &b)).abs() < 1e-10);
        let mse: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / 3072.0;
        assert!((psnr(&a, &b, 1.0).unwrap() - 10.0 * (1.0 / mse).log10()).abs() < 1e-9);
    }
}

#[test]
fn srgb_decode_matches_piecewise_formula() {
    let eotf = |s: f64| {
        if s <= 0.04045 {
            s / 12.92
        } else {
            ((s + 0.055) / 1.055).powf(2.4)
        }
    };
    for code in 0..=255u32 {
        let s = f64::from(code) / 255.0;
        assert!((srgb_to_linear_sample(s) - eotf(s)).abs() < 1e-15);
    }
}
