//! Contrastive diversity of a tight bin versus a spread-out bin, first with
//! the identity discriminator, then with a trained MLP.

use adq::bins::Bin;
use adq::dataset::gen_synthetic_mixture;
use adq::diversity::{
    bin_diversity, train_discriminator, AugmentMode, Augmenter, ContrastiveBatch, Discriminator, TrainConfig,
};

fn main() -> adq::Result<()> {
    let features = gen_synthetic_mixture(8, 25, 16, 1.0, 4)?;
    let tight = Bin {
        index: 1,
        members: (0..20).collect(),
    };
    let spread = Bin {
        index: 2,
        members: (0..200).step_by(10).collect(),
    };
    let tau = 0.5;
    let cfg = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };

    for bin in [&tight, &spread] {
        let aug = Augmenter::new(AugmentMode::FeatureNoise, bin, &features)?;
        let batch = ContrastiveBatch::from_bin(bin, &aug, 1)?;
        let plain = bin_diversity(bin.index, &batch, &Discriminator::Identity, tau)?;
        let trained = train_discriminator(&batch, tau, &cfg, 1, bin.index as u64)?;
        let learned = bin_diversity(bin.index, &batch, &Discriminator::Mlp(trained.mlp), tau)?;
        println!(
            "bin {}: identity Div {:.5}  mlp Div {:.5}  loss {:.4} -> {:.4}",
            bin.index,
            plain.value,
            learned.value,
            trained.losses[0],
            trained.losses[trained.losses.len() - 1]
        );
    }
    Ok(())
}
