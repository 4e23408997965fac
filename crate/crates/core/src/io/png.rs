//! PNG import for external test images and 8-bit export for inspection.

use std::io;
use std::path::Path;

use image::imageops::{self, FilterType};
use image::{GrayImage, ImageError, ImageFormat, Luma};

use crate::error::{ensure, Error, Result};
use crate::geometry::Image;

fn write_png(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let mut bytes = io::Cursor::new(Vec::new());
    img.write_to(&mut bytes, ImageFormat::Png).map_err(map_image_error)?;
    super::write_atomic(path, bytes.get_ref())
}

fn map_image_error(err: ImageError) -> Error {
    match err {
        ImageError::IoError(e) => Error::Io(e),
        ImageError::Unsupported(e) => Error::Format(e.to_string()),
        ImageError::Decoding(e) => Error::Io(io::Error::new(io::ErrorKind::InvalidData, e.to_string())),
        other => Error::Format(other.to_string()),
    }
}

/// Loads a PNG (8/16-bit grey or RGB), converts to luma, resizes bilinearly
/// to `size x size` and scales the full bit range onto `[0, 1]`.
pub fn ingest_image(path: impl AsRef<Path>, size: usize) -> Result<Image> {
    ensure!(size >= 1, "target size must be positive");
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)?.with_guessed_format()?;
    match reader.format() {
        Some(ImageFormat::Png) => {}
        Some(other) => return Err(Error::Format(format!("unsupported image format {other:?}"))),
        None => return Err(Error::Format(format!("unrecognised image format in {}", path.display()))),
    }
    let luma = reader.decode().map_err(map_image_error)?.to_luma32f();
    let resized = if luma.width() as usize == size && luma.height() as usize == size {
        luma
    } else {
        imageops::resize(&luma, size as u32, size as u32, FilterType::Triangle)
    };
    let data = resized.pixels().map(|p| (p.0[0] as f64).clamp(0.0, 1.0)).collect();
    Image::from_vec(size, size, data)
}

fn window(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn to_u8(v: f64, lo: f64, hi: f64) -> u8 {
    if hi > lo {
        ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8
    } else {
        0
    }
}

/// 8-bit greyscale with min-max windowing.
pub fn to_gray8(image: &Image) -> GrayImage {
    let (lo, hi) = window(image.data().iter().copied());
    GrayImage::from_fn(image.width() as u32, image.height() as u32, |c, r| {
        Luma([to_u8(image.get(c as usize, r as usize), lo, hi)])
    })
}

pub fn save_png(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    write_png(path, &to_gray8(image))
}

/// Tiles equally sized images row by row with a one-pixel gap, sharing one
/// min-max window so tiles are directly comparable.
pub fn save_png_grid(path: impl AsRef<Path>, rows: &[Vec<&Image>]) -> Result<()> {
    let first = rows.iter().flat_map(|r| r.iter()).next().ok_or_else(|| Error::InvalidArgument("image grid is empty".into()))?;
    let (w, h) = (first.width(), first.height());
    ensure!(rows.iter().flatten().all(|i| i.width() == w && i.height() == h), "grid tiles must share one size");
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let (lo, hi) = window(rows.iter().flatten().flat_map(|i| i.data().iter().copied()));
    let gw = cols * (w + 1) - 1;
    let gh = rows.len() * (h + 1) - 1;
    let mut grid = GrayImage::new(gw as u32, gh as u32);
    for (ri, row) in rows.iter().enumerate() {
        for (ci, tile) in row.iter().enumerate() {
            for r in 0..h {
                for c in 0..w {
                    let px = to_u8(tile.get(c, r), lo, hi);
                    grid.put_pixel((ci * (w + 1) + c) as u32, (ri * (h + 1) + r) as u32, Luma([px]));
                }
            }
        }
    }
    write_png(path, &grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_tiles_share_one_window() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let (dark, bright) = (Image::filled(3, 2, 0.0), Image::filled(3, 2, 1.0));
        save_png_grid(&path, &[vec![&dark, &bright]]).unwrap();
        let g = image::open(&path).unwrap().to_luma8();
        assert_eq!(g.dimensions(), (7, 2));
        assert_eq!(g.get_pixel(0, 0)[0], 0);
        assert_eq!(g.get_pixel(6, 1)[0], 255);
        assert!(save_png_grid(&path, &[vec![&dark, &Image::zeros(2, 2)]]).is_err());
    }

    #[test]
    fn exported_png_ingests_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ramp.png");
        let ramp = Image::from_vec(4, 4, (0..16).map(|i| i as f64 / 15.0).collect()).unwrap();
        save_png(&path, &ramp).unwrap();
        let back = ingest_image(&path, 4).unwrap();
        for (a, b) in ramp.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1.0 / 255.0, "{a} vs {b}");
        }
    }
}
