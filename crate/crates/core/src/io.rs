//! 8-bit PNG reading and writing. Values map to `[0,1]` by `/255` on the way
//! in and back by `round(v*255)` on the way out.

use std::path::Path;

use image::{GrayImage, ImageBuffer, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::types::ImageTensor;

fn decode(path: &Path) -> Result<image::DynamicImage> {
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Loads an RGB image; grayscale and alpha inputs are converted.
pub fn load_image(path: &Path) -> Result<ImageTensor> {
    let rgb = decode(path)?.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let hwc: Vec<f32> = rgb.as_raw().iter().map(|v| *v as f32 / 255.0).collect();
    ImageTensor::from_interleaved(h, w, &hwc)
}

/// Loads a single-channel raster as intensities in `[0,1]`, row-major.
pub fn load_gray(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let g = decode(path)?.to_luma8();
    let (w, h) = (g.width() as usize, g.height() as usize);
    Ok((h, w, g.as_raw().iter().map(|v| *v as f32 / 255.0).collect()))
}

pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn save_image(img: &ImageTensor, path: &Path) -> Result<()> {
    let raw: Vec<u8> = img.to_interleaved().into_iter().map(quantize).collect();
    let buf: RgbImage = ImageBuffer::<Rgb<u8>, _>::from_raw(img.width() as u32, img.height() as u32, raw)
        .expect("buffer sized from image");
    buf.save(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes a row-major intensity raster in `[0,1]`.
pub fn save_gray(height: usize, width: usize, values: &[f32], path: &Path) -> Result<()> {
    let raw: Vec<u8> = values.iter().map(|v| quantize(*v)).collect();
    let buf = GrayImage::from_raw(width as u32, height as u32, raw)
        .ok_or_else(|| Error::dims(format!("{} values", height * width), values.len()))?;
    buf.save(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
