//! Texture level of image patches, used as the representativeness score.

use rayon::prelude::*;

use crate::bins::Bin;
use crate::dataset::{FeatureTable, ImageRef, ImageTable};
use crate::error::{AdqError, Result};
use crate::numeric::{order_free_mean, pairwise_sum};

/// Square grayscale tile with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    side: usize,
    pixels: Vec<f64>,
    pub source: u32,
    /// Top-left corner `(row, col)` in the source image.
    pub origin: (usize, usize),
}

impl Patch {
    pub fn new(side: usize, pixels: Vec<f64>) -> Result<Self> {
        if side == 0 || pixels.len() != side * side {
            return Err(AdqError::InvalidInput(format!(
                "patch of side {side} needs {} pixels, got {}",
                side * side,
                pixels.len()
            )));
        }
        if pixels.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(AdqError::InvalidInput(
                "patch intensities must lie in [0, 1]".into(),
            ));
        }
        Ok(Patch {
            side,
            pixels,
            source: 0,
            origin: (0, 0),
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    fn at_clamped(&self, r: isize, c: isize) -> f64 {
        let max = self.side as isize - 1;
        let (r, c) = (r.clamp(0, max) as usize, c.clamp(0, max) as usize);
        self.pixels[r * self.side + c]
    }
}

/// Where bin representativeness came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepSource {
    Texture,
    /// Feature-only data: negated mean distance to the global centroid.
    ProxyRep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepScore {
    pub bin: usize,
    pub value: f64,
}

/// Tiles the luma of `image` into non-overlapping `side x side` patches,
/// row-major, dropping right and bottom remainders.
pub fn extract_patches(image: &ImageRef<'_>, side: usize) -> Result<Vec<Patch>> {
    if side < 2 || side > image.width.min(image.height) {
        return Err(AdqError::PatchTooLarge {
            side,
            width: image.width,
            height: image.height,
        });
    }
    let gray = image.grayscale();
    let (rows, cols) = (image.height / side, image.width / side);
    let mut out = Vec::with_capacity(rows * cols);
    for pr in 0..rows {
        for pc in 0..cols {
            let mut pixels = Vec::with_capacity(side * side);
            for r in 0..side {
                let start = (pr * side + r) * image.width + pc * side;
                pixels.extend_from_slice(&gray[start..start + side]);
            }
            out.push(Patch {
                side,
                pixels,
                source: image.id,
                origin: (pr * side, pc * side),
            });
        }
    }
    Ok(out)
}

/// Horizontal and vertical 3x3 Sobel responses with clamp-to-edge borders.
///
/// Each kernel row is summed left to right before the rows are combined top
/// to bottom, the same order as a plain row-wise 3x3 correlation loop. Mirror
/// rows and columns then cancel exactly, so flat regions give exactly zero.
pub fn sobel(patch: &Patch) -> (Vec<f64>, Vec<f64>) {
    let n = patch.side as isize;
    let mut gx = Vec::with_capacity(patch.pixels.len());
    let mut gy = Vec::with_capacity(patch.pixels.len());
    for r in 0..n {
        for c in 0..n {
            let p = |dr: isize, dc: isize| patch.at_clamped(r + dr, c + dc);
            let x = (-p(-1, -1) + p(-1, 1)) + (-2.0 * p(0, -1) + 2.0 * p(0, 1)) + (-p(1, -1) + p(1, 1));
            let y = (-p(-1, -1) - 2.0 * p(-1, 0) - p(-1, 1)) + (p(1, -1) + 2.0 * p(1, 0) + p(1, 1));
            gx.push(x);
            gy.push(y);
        }
    }
    (gx, gy)
}

/// Per-pixel Sobel magnitude `sqrt(gx^2 + gy^2)`.
pub fn gradient_magnitude(patch: &Patch) -> Vec<f64> {
    let (gx, gy) = sobel(patch);
    gx.iter().zip(&gy).map(|(x, y)| (x * x + y * y).sqrt()).collect()
}

/// Mean gradient magnitude over the patch.
pub fn patch_texture_level(patch: &Patch) -> f64 {
    let g = gradient_magnitude(patch);
    pairwise_sum(&g) / g.len() as f64
}

/// Mean texture level of every patch of every member image.
pub fn bin_representativeness(bin: &Bin, images: &ImageTable, side: usize) -> Result<RepScore> {
    let per_image: Vec<Vec<f64>> = bin
        .members
        .par_iter()
        .map(|&id| {
            let img = images.image(id)?;
            Ok(extract_patches(&img, side)?
                .iter()
                .map(patch_texture_level)
                .collect())
        })
        .collect::<Result<_>>()?;
    let levels: Vec<f64> = per_image.into_iter().flatten().collect();
    Ok(RepScore {
        bin: bin.index,
        value: order_free_mean(&levels),
    })
}

/// Stand-in when no pixels exist: the negated mean Euclidean distance of the
/// members to the global feature centroid. Only meaningful after min-max
/// normalization across bins.
pub fn proxy_representativeness(bin: &Bin, features: &FeatureTable, centroid: &[f64]) -> Result<RepScore> {
    let dists = bin
        .members
        .iter()
        .map(|&id| {
            let row = features.row(id)?;
            Ok(row
                .iter()
                .zip(centroid)
                .map(|(&v, c)| (v as f64 - c) * (v as f64 - c))
                .sum::<f64>()
                .sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RepScore {
        bin: bin.index,
        value: -order_free_mean(&dists),
    })
}
