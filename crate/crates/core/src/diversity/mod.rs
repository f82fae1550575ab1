//! Contrastive diversity score of a bin.
//!
//! Each member `x_i` is embedded by a discriminator `d`, paired with an
//! augmented positive view `x_i+`, and contrasted against the other members
//! of the same bin. With `c_ij = cos(d(x_i), d(x_j))` and
//! `c_i+ = cos(d(x_i), d(x_i+))`:
//!
//! ```text
//! Div = -1/(N-1) * mean_i [ sum_{j != i} exp(c_ij / tau) / exp(c_i+ / tau) ]
//! ```
//!
//! The discriminator is trained per bin on the matching InfoNCE-style loss
//! `mean_i [ -c_i+/tau + log sum_{j != i} exp(c_ij / tau) ]`.

mod augment;
mod mlp;

pub use augment::{AugmentMode, Augmenter, PixelOp};
pub use mlp::Mlp;

use crate::bins::Bin;
use crate::error::{AdqError, Result};
use crate::numeric::{dot, norm};

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(AdqError::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Embedding network used inside the diversity score.
#[derive(Debug, Clone, PartialEq)]
pub enum Discriminator {
    /// `d(x) = x`
    Identity,
    Mlp(Mlp),
}

impl Discriminator {
    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Discriminator::Identity => x.to_vec(),
            Discriminator::Mlp(m) => m.forward(x),
        }
    }
}

/// Discriminator inputs and positive views of one bin, in member order.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    pub inputs: Vec<Vec<f64>>,
    pub positives: Vec<Vec<f64>>,
}

impl ContrastiveBatch {
    pub fn new(inputs: Vec<Vec<f64>>, positives: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.len() != positives.len() {
            return Err(AdqError::LengthMismatch {
                left: inputs.len(),
                right: positives.len(),
            });
        }
        if inputs.len() < 2 {
            return Err(AdqError::BinTooSmall(inputs.len()));
        }
        Ok(ContrastiveBatch { inputs, positives })
    }

    /// Collects inputs and seed-deterministic positives for `bin`.
    pub fn from_bin(bin: &Bin, aug: &Augmenter<'_>, seed: u64) -> Result<Self> {
        if bin.members.len() < 2 {
            return Err(AdqError::BinTooSmall(bin.members.len()));
        }
        let inputs = bin
            .members
            .iter()
            .map(|&id| aug.input(id))
            .collect::<Result<_>>()?;
        let positives = bin
            .members
            .iter()
            .map(|&id| aug.positive(id, seed))
            .collect::<Result<_>>()?;
        ContrastiveBatch::new(inputs, positives)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivScore {
    pub bin: usize,
    pub value: f64,
}

/// Hyperparameters of per-bin discriminator training.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub embed: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 128,
            embed: 64,
            epochs: 5,
            learning_rate: 0.01,
        }
    }
}

/// Unit vectors and original norms.
fn normalize_all(vs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut units = Vec::with_capacity(vs.len());
    let mut norms = Vec::with_capacity(vs.len());
    for v in vs {
        let n = norm(v);
        if n == 0.0 || !n.is_finite() {
            return Err(AdqError::ZeroVector);
        }
        units.push(v.iter().map(|x| x / n).collect());
        norms.push(n);
    }
    Ok((units, norms))
}

fn cos_unit(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0)
}

/// Diversity score of a bin under `disc`.
pub fn bin_diversity(bin: usize, batch: &ContrastiveBatch, disc: &Discriminator, tau: f64) -> Result<DivScore> {
    if !(tau > 0.0) {
        return Err(AdqError::Config(format!("temperature must be positive, got {tau}")));
    }
    let n = batch.len();
    if n < 2 {
        return Err(AdqError::BinTooSmall(n));
    }
    let z: Vec<Vec<f64>> = batch.inputs.iter().map(|x| disc.embed(x)).collect();
    let p: Vec<Vec<f64>> = batch.positives.iter().map(|x| disc.embed(x)).collect();
    let (u, _) = normalize_all(&z)?;
    let (v, _) = normalize_all(&p)?;
    let ratios: Vec<f64> = (0..n)
        .map(|i| {
            let pos = cos_unit(&u[i], &v[i]);
            let mut acc = 0.0;
            for j in 0..n {
                if j != i {
                    acc += ((cos_unit(&u[i], &u[j]) - pos) / tau).exp();
                }
            }
            acc
        })
        .collect();
    let mean = crate::numeric::pairwise_sum(&ratios) / n as f64;
    Ok(DivScore {
        bin,
        value: -mean / (n - 1) as f64,
    })
}

/// Contrastive training loss of `disc` on `batch`.
pub fn contrastive_loss(batch: &ContrastiveBatch, disc: &Discriminator, tau: f64) -> Result<f64> {
    let z: Vec<Vec<f64>> = batch.inputs.iter().map(|x| disc.embed(x)).collect();
    let p: Vec<Vec<f64>> = batch.positives.iter().map(|x| disc.embed(x)).collect();
    let (u, _) = normalize_all(&z)?;
    let (v, _) = normalize_all(&p)?;
    let n = batch.len();
    let mut total = 0.0;
    for i in 0..n {
        let logits: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| cos_unit(&u[i], &u[j]) / tau).collect();
        total += -cos_unit(&u[i], &v[i]) / tau + log_sum_exp(&logits);
    }
    Ok(total / n as f64)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Loss and its gradient with respect to the flattened MLP parameters.
pub fn contrastive_loss_grad(batch: &ContrastiveBatch, mlp: &Mlp, tau: f64) -> Result<(f64, Vec<f64>)> {
    let n = batch.len();
    if n < 2 {
        return Err(AdqError::BinTooSmall(n));
    }
    let zt: Vec<_> = batch.inputs.iter().map(|x| mlp.trace(x)).collect();
    let pt: Vec<_> = batch.positives.iter().map(|x| mlp.trace(x)).collect();
    let z: Vec<Vec<f64>> = zt.iter().map(|t| t.out.clone()).collect();
    let p: Vec<Vec<f64>> = pt.iter().map(|t| t.out.clone()).collect();
    let (u, zn) = normalize_all(&z)?;
    let (v, pn) = normalize_all(&p)?;
    let e = mlp.output_dim();
    let scale = 1.0 / (n as f64 * tau);

    // d loss / d c_ij for i != j, symmetric in (i, j) after summing both rows
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s = cos_unit(&u[i], &u[j]);
            c[i * n + j] = s;
            c[j * n + i] = s;
        }
    }
    let mut w = vec![0.0; n * n];
    let mut loss = 0.0;
    let mut cpos = vec![0.0; n];
    for i in 0..n {
        cpos[i] = cos_unit(&u[i], &v[i]);
        let logits: Vec<f64> = (0..n).map(|j| if j == i { f64::NEG_INFINITY } else { c[i * n + j] / tau }).collect();
        let lse = log_sum_exp(&logits);
        loss += -cpos[i] / tau + lse;
        for j in 0..n {
            if j != i {
                let soft = (logits[j] - lse).exp();
                w[i * n + j] += soft * scale;
                w[j * n + i] += soft * scale;
            }
        }
    }
    loss /= n as f64;

    // Gradients w.r.t. raw embeddings: d cos(a, b) / d a = (b_hat - cos * a_hat) / |a|
    let mut gz = vec![vec![0.0; e]; n];
    let mut gp = vec![vec![0.0; e]; n];
    for i in 0..n {
        let gi = &mut gz[i];
        for j in 0..n {
            if j == i {
                continue;
            }
            let (wij, cij) = (w[i * n + j], c[i * n + j]);
            for k in 0..e {
                gi[k] += wij * (u[j][k] - cij * u[i][k]);
            }
        }
        let g_pos = -scale;
        for k in 0..e {
            gi[k] += g_pos * (v[i][k] - cpos[i] * u[i][k]);
            gp[i][k] = g_pos * (u[i][k] - cpos[i] * v[i][k]) / pn[i];
        }
        gi.iter_mut().for_each(|g| *g /= zn[i]);
    }

    let mut grad = vec![0.0; mlp.param_count()];
    for i in 0..n {
        mlp.backward(&batch.inputs[i], &zt[i], &gz[i], &mut grad);
        mlp.backward(&batch.positives[i], &pt[i], &gp[i], &mut grad);
    }
    Ok((loss, grad))
}

/// Result of [`train_discriminator`].
#[derive(Debug, Clone)]
pub struct Trained {
    pub mlp: Mlp,
    /// Loss before each update and after the last one (`epochs + 1` values).
    pub losses: Vec<f64>,
}

/// Full-batch gradient descent on the contrastive loss. `stream`
/// distinguishes discriminators sharing one root seed (the bin index in the
/// pipeline).
pub fn train_discriminator(
    batch: &ContrastiveBatch,
    tau: f64,
    cfg: &TrainConfig,
    seed: u64,
    stream: u64,
) -> Result<Trained> {
    if !(tau > 0.0) {
        return Err(AdqError::Config(format!("temperature must be positive, got {tau}")));
    }
    if batch.len() < 2 {
        return Err(AdqError::BinTooSmall(batch.len()));
    }
    let input = batch.inputs[0].len();
    let mut mlp = Mlp::init(input, cfg.hidden, cfg.embed, seed, stream)?;
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    let mut params = mlp.params();
    for _ in 0..cfg.epochs {
        let (loss, grad) = contrastive_loss_grad(batch, &mlp, tau)?;
        losses.push(loss);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }
        mlp.set_params(&params);
    }
    losses.push(contrastive_loss(batch, &Discriminator::Mlp(mlp.clone()), tau)?);
    Ok(Trained { mlp, losses })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: Vec<f64>, b: Vec<f64>) -> ContrastiveBatch {
        ContrastiveBatch::new(vec![a.clone(), b.clone()], vec![a, b]).unwrap()
    }

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(AdqError::ZeroVector)));
    }

    #[test]
    fn duplicate_pair_scores_minus_one() {
        let d = bin_diversity(1, &pair(vec![1.0, 2.0], vec![1.0, 2.0]), &Discriminator::Identity, 1.0).unwrap();
        assert!((d.value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pair_scores_minus_inverse_e() {
        let d = bin_diversity(1, &pair(vec![1.0, 0.0], vec![0.0, 1.0]), &Discriminator::Identity, 1.0).unwrap();
        assert!((d.value + (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn small_bins_rejected() {
        assert!(matches!(
            ContrastiveBatch::new(vec![vec![1.0]], vec![vec![1.0]]),
            Err(AdqError::BinTooSmall(1))
        ));
    }

    #[test]
    fn zero_epochs_is_initialization() {
        let b = pair(vec![1.0, 0.0, 0.5], vec![0.0, 1.0, -0.5]);
        let cfg = TrainConfig { hidden: 5, embed: 3, epochs: 0, learning_rate: 0.01 };
        let t = train_discriminator(&b, 0.5, &cfg, 4, 1).unwrap();
        assert_eq!(t.mlp, Mlp::init(3, 5, 3, 4, 1).unwrap());
        assert_eq!(t.losses.len(), 1);
    }

    #[test]
    fn loss_gradient_matches_central_differences() {
        let inputs = vec![vec![0.3, -1.0, 0.5], vec![1.2, 0.1, -0.4], vec![-0.7, 0.9, 0.2]];
        let positives = vec![vec![0.35, -0.9, 0.45], vec![1.1, 0.2, -0.5], vec![-0.6, 1.0, 0.1]];
        let batch = ContrastiveBatch::new(inputs, positives).unwrap();
        let mlp = Mlp::init(3, 4, 2, 11, 0).unwrap();
        let (_, grad) = contrastive_loss_grad(&batch, &mlp, 0.5).unwrap();
        let base = mlp.params();
        let h = 1e-5;
        for k in 0..base.len() {
            let eval = |delta: f64| {
                let mut m = mlp.clone();
                let mut p = base.clone();
                p[k] += delta;
                m.set_params(&p);
                contrastive_loss(&batch, &Discriminator::Mlp(m), 0.5).unwrap()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!((fd - grad[k]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", grad[k]);
        }
    }
}
