//! PNG/JPEG boundary: sRGB-encoded files in, linear-light buffers out.
//!
//! Disparity and other scalar fields travel as 16-bit greyscale PNG where the
//! stored code `v` maps to `v / 65535`.

use std::io::Cursor;
use std::path::Path;

use image::codecs::jpeg::JpegEncoder;
use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{Error, Result};
use crate::image::{linear_to_srgb_sample, srgb_to_linear_sample, ImageBuffer, ScalarField};
use crate::scalar::Scalar;

#[inline]
pub fn quantize_u8<T: Scalar>(v: T) -> u8 {
    (v.wide().clamp(0.0, 1.0) * 255.0).round() as u8
}

#[inline]
pub fn quantize_u16<T: Scalar>(v: T) -> u16 {
    (v.wide().clamp(0.0, 1.0) * 65535.0).round() as u16
}

#[inline]
pub fn dequantize_u16<T: Scalar>(v: u16) -> T {
    T::lit(f64::from(v) / 65535.0)
}

fn decode_dynamic(bytes: &[u8]) -> Result<DynamicImage> {
    Ok(image::load_from_memory(bytes)?)
}

fn encoded_from_dynamic<T: Scalar>(img: &DynamicImage) -> ImageBuffer<T> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<T> = match img {
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => img
            .to_rgb16()
            .into_raw()
            .into_iter()
            .map(|v| T::lit(f64::from(v) / 65535.0))
            .collect(),
        _ => img
            .to_rgb8()
            .into_raw()
            .into_iter()
            .map(|v| T::lit(f64::from(v) / 255.0))
            .collect(),
    };
    ImageBuffer::from_raw_unchecked(w, h, data)
}

/// Decodes an image file's samples as stored (sRGB-encoded, `[0,1]`).
pub fn decode_encoded<T: Scalar>(bytes: &[u8]) -> Result<ImageBuffer<T>> {
    Ok(encoded_from_dynamic(&decode_dynamic(bytes)?))
}

/// Decodes an image and converts it to linear light.
pub fn decode_linear<T: Scalar>(bytes: &[u8]) -> Result<ImageBuffer<T>> {
    Ok(decode_encoded::<T>(bytes)?.map(srgb_to_linear_sample))
}

/// Decodes colour and alpha; opaque formats yield alpha ≡ 1.
pub fn decode_linear_rgba<T: Scalar>(bytes: &[u8]) -> Result<(ImageBuffer<T>, ScalarField<T>)> {
    let img = decode_dynamic(bytes)?;
    let color = encoded_from_dynamic::<T>(&img).map(srgb_to_linear_sample);
    let (w, h) = color.dims();
    let alpha = if img.color().has_alpha() {
        let raw = img.to_rgba16().into_raw();
        raw.chunks_exact(4).map(|p| dequantize_u16::<T>(p[3])).collect()
    } else {
        vec![T::one(); w * h]
    };
    Ok((color, ScalarField::from_raw_unchecked(w, h, alpha)))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::AssetDecode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn named<V>(path: &Path, r: Result<V>) -> Result<V> {
    r.map_err(|e| Error::AssetDecode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn load_linear<T: Scalar>(path: &Path) -> Result<ImageBuffer<T>> {
    named(path, decode_linear(&read(path)?))
}

pub fn load_encoded<T: Scalar>(path: &Path) -> Result<ImageBuffer<T>> {
    named(path, decode_encoded(&read(path)?))
}

pub fn load_linear_rgba<T: Scalar>(path: &Path) -> Result<(ImageBuffer<T>, ScalarField<T>)> {
    named(path, decode_linear_rgba(&read(path)?))
}

/// Single-channel field from greyscale PNG: 16-bit as `v/65535`, 8-bit as
/// `v/255`. Colour inputs use their first channel.
pub fn decode_field<T: Scalar>(bytes: &[u8]) -> Result<ScalarField<T>> {
    let img = decode_dynamic(bytes)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<T> = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(|v| T::lit(f64::from(v) / 255.0)).collect(),
        DynamicImage::ImageLuma16(g) => g.into_raw().into_iter().map(dequantize_u16).collect(),
        other => other.to_luma16().into_raw().into_iter().map(dequantize_u16).collect(),
    };
    Ok(ScalarField::from_raw_unchecked(w, h, data))
}

pub fn load_field<T: Scalar>(path: &Path) -> Result<ScalarField<T>> {
    named(path, decode_field(&read(path)?))
}

/// Raw 16-bit codes of a greyscale PNG.
pub fn load_u16_codes(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let img = named(path, decode_dynamic(&read(path)?))?;
    let g = img.to_luma16();
    Ok((g.width() as usize, g.height() as usize, g.into_raw()))
}

/// Linear image to 8-bit sRGB samples.
pub fn to_srgb8<T: Scalar>(img: &ImageBuffer<T>) -> Vec<u8> {
    img.data()
        .iter()
        .map(|&v| quantize_u8(linear_to_srgb_sample(v)))
        .collect()
}

/// Already-encoded image to 8-bit samples.
pub fn encoded_to_u8<T: Scalar>(img: &ImageBuffer<T>) -> Vec<u8> {
    img.data().iter().map(|&v| quantize_u8(v)).collect()
}

pub fn encode_png_rgb8(width: usize, height: usize, rgb: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(rgb, width as u32, height as u32, ExtendedColorType::Rgb8)?;
    Ok(out)
}

pub fn encode_png_rgba8(width: usize, height: usize, rgba: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(rgba, width as u32, height as u32, ExtendedColorType::Rgba8)?;
    Ok(out)
}

pub fn encode_png_gray16(width: usize, height: usize, codes: &[u16]) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = codes.iter().flat_map(|v| v.to_ne_bytes()).collect();
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(&bytes, width as u32, height as u32, ExtendedColorType::L16)?;
    Ok(out)
}

pub fn encode_png_gray8(width: usize, height: usize, codes: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(codes, width as u32, height as u32, ExtendedColorType::L8)?;
    Ok(out)
}

/// Baseline sequential JPEG, no chroma subsampling.
pub fn encode_jpeg_rgb8(width: usize, height: usize, rgb: &[u8], quality: u8) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    JpegEncoder::new_with_quality(&mut out, quality.clamp(1, 100)).write_image(
        rgb,
        width as u32,
        height as u32,
        ExtendedColorType::Rgb8,
    )?;
    Ok(out)
}

pub fn decode_jpeg_rgb8(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let img = image::load(Cursor::new(bytes), ImageFormat::Jpeg)?.to_rgb8();
    Ok((img.width() as usize, img.height() as usize, img.into_raw()))
}

/// Linear image to an 8-bit sRGB PNG byte stream.
pub fn encode_linear_png<T: Scalar>(img: &ImageBuffer<T>) -> Result<Vec<u8>> {
    encode_png_rgb8(img.width(), img.height(), &to_srgb8(img))
}

pub fn save_linear_png<T: Scalar>(img: &ImageBuffer<T>, path: &Path) -> Result<()> {
    std::fs::write(path, encode_linear_png(img)?)?;
    Ok(())
}

pub fn save_linear_jpeg<T: Scalar>(img: &ImageBuffer<T>, path: &Path, quality: u8) -> Result<()> {
    std::fs::write(
        path,
        encode_jpeg_rgb8(img.width(), img.height(), &to_srgb8(img), quality)?,
    )?;
    Ok(())
}

/// Field in `[0,1]` to 16-bit greyscale PNG.
pub fn encode_field16<T: Scalar>(field: &ScalarField<T>) -> Result<Vec<u8>> {
    let codes: Vec<u16> = field.data().iter().map(|&v| quantize_u16(v)).collect();
    encode_png_gray16(field.width(), field.height(), &codes)
}

pub fn save_field16<T: Scalar>(field: &ScalarField<T>, path: &Path) -> Result<()> {
    std::fs::write(path, encode_field16(field)?)?;
    Ok(())
}
