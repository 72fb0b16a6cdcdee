//! PNG / PPM frames as `[0, 1]` RGB tensors.

use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn image_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

/// Loads any PNG or PNM file as an `h x w x 3` tensor.
pub fn load_rgb(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory(&bytes).map_err(|e| image_error(path, e))?;
    Ok(from_rgb(&img.to_rgb8()))
}

pub fn from_rgb(img: &RgbImage) -> Tensor {
    let (w, h) = img.dimensions();
    let data = img.as_raw().iter().map(|&v| f32::from(v) / 255.0).collect();
    Tensor::from_vec(h as usize, w as usize, 3, data).expect("rgb buffer matches its dimensions")
}

/// Values are clamped to `[0, 1]` and rounded to 8 bits. Single-channel
/// tensors are written as gray.
pub fn to_rgb(t: &Tensor) -> Result<RgbImage> {
    let (h, w, c) = t.shape();
    if c != 1 && c != 3 {
        return Err(Error::contract(format!("only 1 or 3 channel tensors can be written, got {c}")));
    }
    let q = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    Ok(RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let p = t.pixel(y as usize, x as usize);
        if c == 1 {
            Rgb([q(p[0]); 3])
        } else {
            Rgb([q(p[0]), q(p[1]), q(p[2])])
        }
    }))
}

/// Format follows the extension: `.ppm`/`.pnm` write binary PPM, anything
/// else PNG.
pub fn save_rgb(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("ppm" | "pnm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    };
    to_rgb(t)?
        .save_with_format(path, format)
        .map_err(|e| image_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_bit_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor::from_fn(5, 7, 3, |y, x, c| ((y * 7 + x) * 3 + c) as f32 / 255.0).unwrap();
        for name in ["a.png", "a.ppm"] {
            let p = dir.path().join(name);
            save_rgb(&t, &p).unwrap();
            let back = load_rgb(&p).unwrap();
            assert_eq!(back.shape(), (5, 7, 3));
            assert!(back.max_abs_diff(&t).unwrap() < 1e-6);
        }
    }

    #[test]
    fn unreadable_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_rgb(dir.path().join("none.png")), Err(Error::Io { .. })));
        let junk = dir.path().join("junk.png");
        std::fs::write(&junk, b"not an image").unwrap();
        assert!(matches!(load_rgb(&junk), Err(Error::Image { .. })));
    }
}
