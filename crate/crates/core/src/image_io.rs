//! Grayscale image input (8-bit PGM or PNG) and PGM export.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::imageops::FilterType;
use image::{ExtendedColorType, ImageEncoder};

use crate::camera::SceneImage;
use crate::error::{invalid, Error, Result};

/// Loads an image as linear intensity in `[0, 1]`, resampling to
/// `width x height` when the file has a different size.
pub fn load_scene(path: impl AsRef<Path>, width: usize, height: usize) -> Result<SceneImage> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ));
    }
    let mut gray = image::open(path)?.to_luma8();
    if gray.width() as usize != width || gray.height() as usize != height {
        gray = image::imageops::resize(&gray, width as u32, height as u32, FilterType::Triangle);
    }
    SceneImage::new(
        width,
        height,
        gray.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
    )
}

/// Quantises to 8 bits after clipping negatives and normalising by the max.
pub fn to_gray8(values: &[f64]) -> Vec<u8> {
    let peak = values.iter().copied().fold(0.0, f64::max);
    values
        .iter()
        .map(|&v| {
            if peak <= 0.0 {
                0
            } else {
                (v.max(0.0) / peak * 255.0).round() as u8
            }
        })
        .collect()
}

/// Writes a binary (P5) PGM.
pub fn save_pgm(path: impl AsRef<Path>, values: &[f64], width: usize, height: usize) -> Result<()> {
    let path = path.as_ref();
    if values.len() != width * height {
        return invalid(format!(
            "{} values do not form a {width}x{height} image",
            values.len()
        ));
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    PnmEncoder::new(BufWriter::new(f))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(
            &to_gray8(values),
            width as u32,
            height as u32,
            ExtendedColorType::L8,
        )?;
    Ok(())
}
