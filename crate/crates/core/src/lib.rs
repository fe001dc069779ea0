//! Disparity-driven depth-of-field toolkit.
//!
//! The library turns disparity maps into per-pixel blur radii, renders
//! occlusion-aware bokeh from layered scenes, synthesises degraded LQ/HQ
//! training pairs, and provides a reference focus-masked attention plus
//! PSNR/SSIM. All numeric code is generic over [`Scalar`] (`f32` or `f64`);
//! the aliases below fix the working precision to `f32`, which is what the
//! dataset tools and the service use.

pub mod attention;
pub mod dataset;
pub mod defocus;
pub mod degrade;
pub mod error;
pub mod image;
pub mod io;
pub mod metrics;
pub mod render;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Image = image::ImageBuffer<f32>;
pub type Field = image::ScalarField<f32>;
pub type Disparity = image::DisparityMap<f32>;
pub type Alpha = image::AlphaMatte<f32>;
pub type Lens = defocus::LensParams<f32>;
pub type Defocus = defocus::DefocusMap<f32>;
pub type Layer = render::SceneLayer<f32>;
pub type Scene = render::LayeredScene<f32>;
pub type Tokens = attention::TokenMatrix<f64>;
pub type Mask = attention::AttentionMask<f64>;

/// Version tag written into every manifest this crate produces.
pub const PIPELINE_VERSION: &str = concat!("bokeh-core/", env!("CARGO_PKG_VERSION"));
