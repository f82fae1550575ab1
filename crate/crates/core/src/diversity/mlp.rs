use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{AdqError, Result};
use crate::rng::{substream, Purpose};

/// Two-layer perceptron `input -> tanh(hidden) -> output`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input: usize,
    hidden: usize,
    output: usize,
    /// `hidden x input`, row-major
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// `output x hidden`, row-major
    w2: Vec<f64>,
    b2: Vec<f64>,
}

/// Activations kept for backpropagation.
pub(crate) struct Trace {
    pub hidden: Vec<f64>,
    pub out: Vec<f64>,
}

impl Mlp {
    /// Weights are unit normals scaled by `1/sqrt(fan_in)`; biases are
    /// `N(0, 0.1^2)` so a zero input still maps to a nonzero embedding.
    pub fn init(input: usize, hidden: usize, output: usize, seed: u64, stream: u64) -> Result<Self> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(AdqError::Config(format!(
                "discriminator layers must be non-empty, got {input}->{hidden}->{output}"
            )));
        }
        let mut rng = substream(seed, Purpose::DiscriminatorInit, stream, 0);
        let bias = Normal::new(0.0, 0.1).unwrap();
        let mut layer = |rows: usize, cols: usize| -> (Vec<f64>, Vec<f64>) {
            let scale = 1.0 / (cols as f64).sqrt();
            let w = (0..rows * cols)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * scale
                })
                .collect();
            let b = (0..rows).map(|_| bias.sample(&mut rng)).collect();
            (w, b)
        };
        let (w1, b1) = layer(hidden, input);
        let (w2, b2) = layer(output, hidden);
        Ok(Mlp {
            input,
            hidden,
            output,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Flattened parameters in the order `w1, b1, w2, b2`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.extend_from_slice(&self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let (w1, rest) = p.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2.copy_from_slice(b2);
    }

    pub(crate) fn trace(&self, x: &[f64]) -> Trace {
        debug_assert_eq!(x.len(), self.input);
        let hidden: Vec<f64> = self
            .w1
            .chunks_exact(self.input)
            .zip(&self.b1)
            .map(|(row, b)| (crate::numeric::dot(row, x) + b).tanh())
            .collect();
        let out = self
            .w2
            .chunks_exact(self.hidden)
            .zip(&self.b2)
            .map(|(row, b)| crate::numeric::dot(row, &hidden) + b)
            .collect();
        Trace { hidden, out }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).out
    }

    /// Accumulates `d loss / d params` into `grad` (flat, same order as
    /// [`Mlp::params`]) given `d loss / d output` for input `x`.
    pub(crate) fn backward(&self, x: &[f64], trace: &Trace, g_out: &[f64], grad: &mut [f64]) {
        let (gw1, rest) = grad.split_at_mut(self.w1.len());
        let (gb1, rest) = rest.split_at_mut(self.b1.len());
        let (gw2, gb2) = rest.split_at_mut(self.w2.len());
        let mut g_hidden = vec![0.0; self.hidden];
        for o in 0..self.output {
            let g = g_out[o];
            gb2[o] += g;
            let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
            let grow = &mut gw2[o * self.hidden..(o + 1) * self.hidden];
            for h in 0..self.hidden {
                grow[h] += g * trace.hidden[h];
                g_hidden[h] += g * row[h];
            }
        }
        for h in 0..self.hidden {
            let t = trace.hidden[h];
            let g_pre = g_hidden[h] * (1.0 - t * t);
            gb1[h] += g_pre;
            let grow = &mut gw1[h * self.input..(h + 1) * self.input];
            for (gw, xi) in grow.iter_mut().zip(x) {
                *gw += g_pre * xi;
            }
        }
    }
}
