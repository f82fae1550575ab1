//! Small numeric kernels shared by the scoring modules.

/// Pairwise (cascade) summation. The result depends only on the order of
/// `values`, never on how work was split across threads.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean that is independent of element order: sorts a copy, then sums pairwise.
pub fn order_free_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    pairwise_sum(&sorted) / sorted.len() as f64
}

/// Dot product of a 64-bit vector with a 32-bit row, accumulated in 64 bits.
/// Eight independent accumulators let the compiler vectorize the loop.
#[inline(always)]
pub fn dot_f64_f32(a: &[f64], b: &[f32]) -> f64 {
    let mut acc = [0.0f64; 8];
    let xa = a.chunks_exact(8);
    let yb = b.chunks_exact(8);
    let mut tail = 0.0;
    for (x, y) in xa.remainder().iter().zip(yb.remainder()) {
        tail += x * *y as f64;
    }
    for (x, y) in xa.zip(yb) {
        let x: &[f64; 8] = x.try_into().unwrap();
        let y: &[f32; 8] = y.try_into().unwrap();
        for k in 0..8 {
            acc[k] += x[k] * y[k] as f64;
        }
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn order_free_mean_ignores_permutation() {
        let a = [0.1, 0.7, 0.3, 1e-9, 5.5];
        let b = [5.5, 1e-9, 0.3, 0.1, 0.7];
        assert_eq!(order_free_mean(&a).to_bits(), order_free_mean(&b).to_bits());
    }

    #[test]
    fn mixed_dot_handles_tails() {
        let a: Vec<f64> = (0..13).map(|i| i as f64).collect();
        let b: Vec<f32> = (0..13).map(|i| (i % 3) as f32).collect();
        let want: f64 = (0..13).map(|i| (i * (i % 3)) as f64).sum();
        assert_eq!(dot_f64_f32(&a, &b), want);
    }
}
