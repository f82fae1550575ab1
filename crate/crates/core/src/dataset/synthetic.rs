use rand_distr::{Distribution, StandardNormal};

use super::features::FeatureTable;
use super::images::ImageTable;
use crate::error::{AdqError, Result};
use crate::rng::{substream, Purpose};

/// Gaussian mixture test substrate.
///
/// Cluster centers sit on a sphere of radius `10 * spread` in directions
/// drawn from `seed`; each point is its center plus isotropic Gaussian noise
/// of scale `spread`. Rows are cluster-major and labels hold the cluster index.
pub fn gen_synthetic_mixture(
    clusters: usize,
    per_cluster: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<FeatureTable> {
    if clusters == 0 || per_cluster == 0 || dim == 0 {
        return Err(AdqError::Config(
            "clusters, per_cluster and dim must be positive".into(),
        ));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(AdqError::Config(format!("spread must be positive, got {spread}")));
    }
    let centers = mixture_centers(clusters, dim, spread, seed);
    let mut values = Vec::with_capacity(clusters * per_cluster * dim);
    let mut labels = Vec::with_capacity(clusters * per_cluster);
    for (c, center) in centers.iter().enumerate() {
        let mut rng = substream(seed, Purpose::Synthetic, 1, c as u64);
        for _ in 0..per_cluster {
            for &mu in center {
                let z: f64 = StandardNormal.sample(&mut rng);
                values.push((mu + spread * z) as f32);
            }
            labels.push(c as u32);
        }
    }
    FeatureTable::new(clusters * per_cluster, dim, values)?.with_labels(labels)
}

/// The centers [`gen_synthetic_mixture`] uses for the same arguments.
pub fn mixture_centers(clusters: usize, dim: usize, spread: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = substream(seed, Purpose::Synthetic, 0, 0);
    (0..clusters)
        .map(|_| loop {
            let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = crate::numeric::norm(&dir);
            if n > 1e-12 {
                break dir.iter().map(|v| v / n * 10.0 * spread).collect();
            }
        })
        .collect()
}

/// Synthetic 8-bit images with item-dependent texture: a smooth gradient
/// background plus seeded noise whose amplitude grows with `id % levels`.
pub fn gen_textured_images(
    count: usize,
    width: usize,
    height: usize,
    channels: usize,
    levels: usize,
    seed: u64,
) -> Result<ImageTable> {
    use rand::Rng;
    let levels = levels.max(1);
    let mut pixels = Vec::with_capacity(count * width * height * channels);
    for id in 0..count {
        let mut rng = substream(seed, Purpose::Synthetic, 2, id as u64);
        let amp = 120.0 * (id % levels) as f64 / levels as f64;
        let base = rng.random_range(40.0..200.0);
        for y in 0..height {
            for x in 0..width {
                for _ in 0..channels {
                    let smooth = base + 20.0 * (x + y) as f64 / (width + height) as f64;
                    let v = smooth + amp * (rng.random::<f64>() - 0.5);
                    pixels.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
    }
    ImageTable::new(width, height, channels, pixels)
}
