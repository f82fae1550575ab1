//! Greedy GraphCut bin generation on a synthetic mixture.
//!
//! ```bash
//! cargo run --release --example bin_generation -- 50000 64 10
//! ```
//! Arguments: item count, feature dimension, bin count.

use std::time::Instant;

use adq::bins::generate_bins;
use adq::dataset::gen_synthetic_mixture;

fn main() -> adq::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let items = args.first().copied().unwrap_or(5000);
    let dim = args.get(1).copied().unwrap_or(16);
    let m = args.get(2).copied().unwrap_or(10);

    let features = gen_synthetic_mixture(10, items.div_ceil(10), dim, 1.0, 7)?;
    let global = features.centroid();
    let start = Instant::now();
    let bins = generate_bins(&features, m)?;
    let elapsed = start.elapsed();
    bins.check_partition(features.len())?;

    println!("M={} d={dim} m={m} K={} in {:.2?}", features.len(), bins.k, elapsed);
    println!("bin  size  centroid-distance");
    for b in &bins.bins {
        let mut c = vec![0.0; dim];
        for &id in &b.members {
            for (acc, &v) in c.iter_mut().zip(features.row(id)?) {
                *acc += v as f64;
            }
        }
        let dist: f64 = c
            .iter()
            .zip(&global)
            .map(|(s, g)| (s / b.len() as f64 - g).powi(2))
            .sum::<f64>()
            .sqrt();
        println!("{:>3}  {:>4}  {dist:.4}", b.index, b.len());
    }
    Ok(())
}
