use rand_distr::{Distribution, StandardNormal};

use super::features::FeatureTable;
use super::images::{ImageRef, ImageTable};
use crate::error::{AdqError, Result};
use crate::rng::{substream, Purpose};

/// Seeded Gaussian random projection of mean-centered raw pixels.
///
/// Entries are unit normals scaled by `1/sqrt(W*H*C)`, drawn row by row from
/// the featurizer substream of `seed`.
#[derive(Debug, Clone)]
pub struct RandomProjection {
    input_len: usize,
    out_dim: usize,
    seed: u64,
    matrix: Vec<f64>,
}

impl RandomProjection {
    pub fn new(input_len: usize, out_dim: usize, seed: u64) -> Result<Self> {
        if out_dim == 0 || input_len == 0 {
            return Err(AdqError::Config(format!(
                "projection needs positive sizes, got {input_len} -> {out_dim}"
            )));
        }
        let scale = 1.0 / (input_len as f64).sqrt();
        let mut rng = substream(seed, Purpose::Featurizer, 0, 0);
        let matrix = (0..input_len * out_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        Ok(RandomProjection {
            input_len,
            out_dim,
            seed,
            matrix,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major `out_dim x input_len`.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn project(&self, pixels: &[u8]) -> Result<Vec<f64>> {
        if pixels.len() != self.input_len {
            return Err(AdqError::LengthMismatch {
                left: pixels.len(),
                right: self.input_len,
            });
        }
        let mean = pixels.iter().map(|&p| p as f64).sum::<f64>() / pixels.len() as f64;
        let centered: Vec<f64> = pixels.iter().map(|&p| p as f64 - mean).collect();
        Ok(self
            .matrix
            .chunks_exact(self.input_len)
            .map(|row| crate::numeric::dot(row, &centered))
            .collect())
    }

    pub fn project_image(&self, image: &ImageRef<'_>) -> Result<Vec<f64>> {
        self.project(image.data)
    }
}

/// Featurizes every image with a [`RandomProjection`] of width `out_dim`.
pub fn fallback_featurize(images: &ImageTable, out_dim: usize, seed: u64) -> Result<FeatureTable> {
    let proj = RandomProjection::new(images.image_len(), out_dim, seed)?;
    let mut values = Vec::with_capacity(images.len() * out_dim);
    for id in 0..images.len() as u32 {
        let f = proj.project_image(&images.image(id)?)?;
        values.extend(f.iter().map(|&v| v as f32));
    }
    FeatureTable::new(images.len(), out_dim, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_maps_to_zero() {
        let images = ImageTable::new(4, 4, 3, vec![77; 48]).unwrap();
        let f = fallback_featurize(&images, 8, 1).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_in_seed() {
        let px: Vec<u8> = (0..2 * 27).map(|i| (i * 37 % 256) as u8).collect();
        let images = ImageTable::new(3, 3, 3, px).unwrap();
        assert_eq!(
            fallback_featurize(&images, 5, 9).unwrap(),
            fallback_featurize(&images, 5, 9).unwrap()
        );
        assert_ne!(
            fallback_featurize(&images, 5, 9).unwrap(),
            fallback_featurize(&images, 5, 10).unwrap()
        );
    }

    #[test]
    fn zero_out_dim_rejected() {
        let images = ImageTable::new(1, 1, 1, vec![0]).unwrap();
        assert!(fallback_featurize(&images, 0, 1).is_err());
    }
}
