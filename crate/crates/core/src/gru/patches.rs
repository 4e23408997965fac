//! Slicing images into non-overlapping patch sequences and back.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::geometry::Image;
use crate::nn::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchOrder {
    /// Left to right on every grid row.
    #[default]
    Raster,
    /// Left to right on even grid rows, right to left on odd ones.
    Serpentine,
}

impl PatchOrder {
    pub fn name(self) -> &'static str {
        match self {
            PatchOrder::Raster => "raster",
            PatchOrder::Serpentine => "serpentine",
        }
    }

    /// Grid `(row, col)` visited at each time step.
    pub fn positions(self, rows: usize, cols: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let col = if self == PatchOrder::Serpentine && r % 2 == 1 { cols - 1 - c } else { c };
                out.push((r, col));
            }
        }
        out
    }
}

impl fmt::Display for PatchOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatchOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raster" => Ok(PatchOrder::Raster),
            "serpentine" => Ok(PatchOrder::Serpentine),
            other => Err(Error::InvalidArgument(format!("unknown patch order '{other}'"))),
        }
    }
}

/// Patches of `N` images as a `[N, T, C, patch_h, patch_w]` tensor, with
/// the grid each time step came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSequence {
    data: Tensor,
    grid_rows: usize,
    grid_cols: usize,
    order: PatchOrder,
    positions: Vec<(usize, usize)>,
}

impl PatchSequence {
    /// Assembles a sequence from raw parts; `stitch_patches` later checks
    /// that `positions` agree with `order`.
    pub fn from_parts(
        data: Tensor,
        grid_rows: usize,
        grid_cols: usize,
        order: PatchOrder,
        positions: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let (_, t, _, ph, pw) = data.dims5()?;
        ensure!(ph >= 1 && pw >= 1, "patches must be non-empty");
        ensure!(grid_rows * grid_cols == t, "grid {grid_rows}x{grid_cols} does not hold {t} patches");
        ensure!(positions.len() == t, "{} grid positions for {t} patches", positions.len());
        ensure!(positions.iter().all(|&(r, c)| r < grid_rows && c < grid_cols), "grid position outside {grid_rows}x{grid_cols}");
        Ok(PatchSequence { data, grid_rows, grid_cols, order, positions })
    }

    pub fn data(&self) -> &Tensor {
        &self.data
    }

    pub fn into_data(self) -> Tensor {
        self.data
    }

    pub fn n_patches(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn n_samples(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn patch_size(&self) -> (usize, usize) {
        (self.data.shape()[3], self.data.shape()[4])
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.grid_rows, self.grid_cols)
    }

    pub fn order(&self) -> PatchOrder {
        self.order
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    /// Same grid and order with new data of the same shape.
    pub fn with_data(&self, data: Tensor) -> Result<Self> {
        ensure!(
            data.shape() == self.data.shape(),
            "data shape {:?} does not match sequence {:?}",
            data.shape(),
            self.data.shape()
        );
        Ok(PatchSequence { data, ..self.clone() })
    }
}

pub fn slice_patches(input: &Tensor, patch_h: usize, patch_w: usize, order: PatchOrder) -> Result<PatchSequence> {
    let (n, c, h, w) = input.dims4()?;
    ensure!(patch_h >= 1 && patch_w >= 1, "patch size must be positive");
    ensure!(h % patch_h == 0 && w % patch_w == 0, "{h}x{w} image is not divisible into {patch_h}x{patch_w} patches");
    let (rows, cols) = (h / patch_h, w / patch_w);
    let positions = order.positions(rows, cols);
    let t = positions.len();
    let mut out = Tensor::zeros(&[n, t, c, patch_h, patch_w]);
    let dst = out.data_mut();
    let src = input.data();
    let mut k = 0;
    for s in 0..n {
        for &(gr, gc) in &positions {
            for ch in 0..c {
                let base = (s * c + ch) * h * w;
                for y in 0..patch_h {
                    let row = base + (gr * patch_h + y) * w + gc * patch_w;
                    dst[k..k + patch_w].copy_from_slice(&src[row..row + patch_w]);
                    k += patch_w;
                }
            }
        }
    }
    PatchSequence::from_parts(out, rows, cols, order, positions)
}

pub fn stitch_patches(seq: &PatchSequence) -> Result<Tensor> {
    ensure!(
        seq.positions == seq.order.positions(seq.grid_rows, seq.grid_cols),
        "patch positions do not follow {} order on a {}x{} grid",
        seq.order,
        seq.grid_rows,
        seq.grid_cols
    );
    let (n, _, c, ph, pw) = seq.data.dims5()?;
    let (h, w) = (seq.grid_rows * ph, seq.grid_cols * pw);
    let mut out = Tensor::zeros(&[n, c, h, w]);
    let dst = out.data_mut();
    let src = seq.data.data();
    let mut k = 0;
    for s in 0..n {
        for &(gr, gc) in &seq.positions {
            for ch in 0..c {
                let base = (s * c + ch) * h * w;
                for y in 0..ph {
                    let row = base + (gr * ph + y) * w + gc * pw;
                    dst[row..row + pw].copy_from_slice(&src[k..k + pw]);
                    k += pw;
                }
            }
        }
    }
    Ok(out)
}

pub fn image_to_tensor(image: &Image) -> Tensor {
    Tensor::from_vec(&[1, 1, image.height(), image.width()], image.data().to_vec()).expect("image layout")
}

pub fn slice_image(image: &Image, patch_h: usize, patch_w: usize, order: PatchOrder) -> Result<PatchSequence> {
    slice_patches(&image_to_tensor(image), patch_h, patch_w, order)
}

/// Stitches a single-sample, single-channel sequence back into an image.
pub fn stitch_image(seq: &PatchSequence) -> Result<Image> {
    ensure!(seq.n_samples() == 1 && seq.channels() == 1, "only a single-channel, single-sample sequence maps to an image");
    let t = stitch_patches(seq)?;
    let (_, _, h, w) = t.dims4()?;
    Image::from_vec(w, h, t.into_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raster_and_serpentine_positions() {
        assert_eq!(PatchOrder::Raster.positions(2, 2), vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(PatchOrder::Serpentine.positions(2, 3), vec![(0, 0), (0, 1), (0, 2), (1, 2), (1, 1), (1, 0)]);
    }

    #[test]
    fn first_patch_is_top_left() {
        let img = Image::from_vec(4, 4, (0..16).map(f64::from).collect()).unwrap();
        let seq = slice_image(&img, 2, 2, PatchOrder::Raster).unwrap();
        assert_eq!(seq.n_patches(), 4);
        assert_eq!(&seq.data().data()[..4], &[0.0, 1.0, 4.0, 5.0]);
        assert_eq!(stitch_image(&seq).unwrap(), img);
    }

    #[test]
    fn grid_512_by_128_has_sixteen_slots() {
        let seq = slice_patches(&Tensor::zeros(&[1, 1, 512, 512]), 128, 128, PatchOrder::Raster).unwrap();
        assert_eq!(seq.n_patches(), 16);
        assert_eq!(seq.grid(), (4, 4));
    }

    #[test]
    fn non_divisible_rejected() {
        assert!(slice_patches(&Tensor::zeros(&[1, 1, 10, 8]), 4, 4, PatchOrder::Raster).is_err());
    }

    #[test]
    fn permuted_positions_rejected() {
        let seq = slice_patches(&Tensor::zeros(&[1, 1, 4, 4]), 2, 2, PatchOrder::Raster).unwrap();
        let mut pos = seq.positions().to_vec();
        pos.swap(1, 2);
        let bad = PatchSequence::from_parts(seq.data().clone(), 2, 2, PatchOrder::Raster, pos).unwrap();
        assert!(stitch_patches(&bad).is_err());
    }
}
