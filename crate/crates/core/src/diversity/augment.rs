use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bins::Bin;
use crate::dataset::{FeatureTable, ImageRef, ImageTable, RandomProjection};
use crate::error::{AdqError, Result};
use crate::rng::{substream, Purpose};

/// How positive views are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentMode {
    /// `x+ = x`; for tests and closed-form checks.
    Identity,
    /// Gaussian noise with per-dimension scale `0.05 * std` over the bin.
    FeatureNoise,
    /// Flip, rotation or brightness jitter on pixels, then re-featurization.
    Pixel,
}

/// Pixel transforms available to [`AugmentMode::Pixel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PixelOp {
    FlipHorizontal,
    Rotate90,
    Rotate180,
    Rotate270,
    /// Multiplies intensities by a factor in `[0.9, 1.1]`.
    Brightness(f64),
}

impl PixelOp {
    fn draw(rng: &mut impl Rng) -> Self {
        match rng.random_range(0..5u8) {
            0 => PixelOp::FlipHorizontal,
            1 => PixelOp::Rotate90,
            2 => PixelOp::Rotate180,
            3 => PixelOp::Rotate270,
            _ => PixelOp::Brightness(rng.random_range(0.9..=1.1)),
        }
    }

    /// Returns `(width, height, pixels)` of the transformed image.
    pub fn apply(self, img: &ImageRef<'_>) -> (usize, usize, Vec<u8>) {
        let (w, h, c) = (img.width, img.height, img.channels);
        let src = |x: usize, y: usize| &img.data[(y * w + x) * c..(y * w + x + 1) * c];
        let mut out = Vec::with_capacity(img.data.len());
        match self {
            PixelOp::FlipHorizontal => {
                for y in 0..h {
                    for x in 0..w {
                        out.extend_from_slice(src(w - 1 - x, y));
                    }
                }
                (w, h, out)
            }
            PixelOp::Rotate180 => {
                for y in 0..h {
                    for x in 0..w {
                        out.extend_from_slice(src(w - 1 - x, h - 1 - y));
                    }
                }
                (w, h, out)
            }
            // clockwise: output (x', y') of an h-wide, w-tall image
            PixelOp::Rotate90 => {
                for y in 0..w {
                    for x in 0..h {
                        out.extend_from_slice(src(y, h - 1 - x));
                    }
                }
                (h, w, out)
            }
            PixelOp::Rotate270 => {
                for y in 0..w {
                    for x in 0..h {
                        out.extend_from_slice(src(w - 1 - y, x));
                    }
                }
                (h, w, out)
            }
            PixelOp::Brightness(f) => {
                out.extend(
                    img.data
                        .iter()
                        .map(|&v| (v as f64 * f).round().clamp(0.0, 255.0) as u8),
                );
                (w, h, out)
            }
        }
    }
}

/// Builds discriminator inputs and positive views for the members of one bin.
pub struct Augmenter<'a> {
    mode: AugmentMode,
    features: &'a FeatureTable,
    images: Option<&'a ImageTable>,
    projection: Option<&'a RandomProjection>,
    channel_means: bool,
    noise_scale: Vec<f64>,
}

impl<'a> Augmenter<'a> {
    pub fn new(mode: AugmentMode, bin: &Bin, features: &'a FeatureTable) -> Result<Self> {
        let noise_scale = if mode == AugmentMode::FeatureNoise {
            bin_std(bin, features)?.into_iter().map(|s| 0.05 * s).collect()
        } else {
            Vec::new()
        };
        Ok(Augmenter {
            mode,
            features,
            images: None,
            projection: None,
            channel_means: false,
            noise_scale,
        })
    }

    /// Supplies pixels and the featurizer that produced `features`;
    /// required for [`AugmentMode::Pixel`].
    pub fn with_pixels(mut self, images: &'a ImageTable, projection: &'a RandomProjection) -> Self {
        self.images = Some(images);
        self.projection = Some(projection);
        self
    }

    /// Appends each image's per-channel mean to the discriminator input.
    pub fn with_channel_means(mut self, images: &'a ImageTable) -> Self {
        self.images = Some(images);
        self.channel_means = true;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.features.dim() + if self.channel_means { self.images.map_or(0, |i| i.channels()) } else { 0 }
    }

    /// Discriminator input of the unaugmented item.
    pub fn input(&self, id: u32) -> Result<Vec<f64>> {
        let mut x = self.features.row_f64(id)?;
        if self.channel_means {
            let img = self.images.ok_or(AdqError::MissingImage(id))?.image(id)?;
            x.extend(img.channel_means());
        }
        Ok(x)
    }

    /// Seed-deterministic positive view of `id`.
    pub fn positive(&self, id: u32, seed: u64) -> Result<Vec<f64>> {
        let mut rng = substream(seed, Purpose::Augment, id as u64, 0);
        match self.mode {
            AugmentMode::Identity => self.input(id),
            AugmentMode::FeatureNoise => {
                let mut x = self.input(id)?;
                for (v, s) in x.iter_mut().zip(&self.noise_scale) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v += s * z;
                }
                Ok(x)
            }
            AugmentMode::Pixel => {
                let (images, proj) = match (self.images, self.projection) {
                    (Some(i), Some(p)) => (i, p),
                    _ => {
                        return Err(AdqError::Config(
                            "pixel augmentation needs images and the projection featurizer".into(),
                        ))
                    }
                };
                let img = images.image(id)?;
                let (w, h, pixels) = PixelOp::draw(&mut rng).apply(&img);
                // Match the f32 storage of the ingested features.
                let mut x: Vec<f64> = proj
                    .project(&pixels)?
                    .into_iter()
                    .map(|v| v as f32 as f64)
                    .collect();
                if self.channel_means {
                    let view = ImageRef {
                        id,
                        width: w,
                        height: h,
                        channels: img.channels,
                        data: &pixels,
                    };
                    x.extend(view.channel_means());
                }
                Ok(x)
            }
        }
    }
}

/// Population standard deviation of each feature dimension over the bin.
fn bin_std(bin: &Bin, features: &FeatureTable) -> Result<Vec<f64>> {
    let d = features.dim();
    let n = bin.members.len().max(1) as f64;
    let mut mean = vec![0.0; d];
    for &id in &bin.members {
        for (m, &v) in mean.iter_mut().zip(features.row(id)?) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for &id in &bin.members {
        for ((s, m), &v) in var.iter_mut().zip(&mean).zip(features.row(id)?) {
            let dv = v as f64 - m;
            *s += dv * dv;
        }
    }
    Ok(var.into_iter().map(|s| (s / n).sqrt()).collect())
}
