//! Representativeness from Sobel texture level.
//!
//! Synthetic images get noise amplitude `id % 4`, so grouping them by that
//! residue gives four bins of increasing texture.

use adq::bins::Bin;
use adq::dataset::{gen_synthetic_mixture, gen_textured_images};
use adq::texture::{bin_representativeness, extract_patches, patch_texture_level, proxy_representativeness};

fn main() -> adq::Result<()> {
    let images = gen_textured_images(40, 32, 32, 3, 4, 9)?;
    let bins: Vec<Bin> = (0..4u32)
        .map(|level| Bin {
            index: level as usize + 1,
            members: (0..40).filter(|id| id % 4 == level).collect(),
        })
        .collect();

    let first = images.image(0)?;
    let patches = extract_patches(&first, 8)?;
    println!("image 0: {} patches of 8x8, first level {:.4}", patches.len(), patch_texture_level(&patches[0]));

    println!("bin  noise  texture-level");
    for b in &bins {
        let r = bin_representativeness(b, &images, 8)?;
        println!("{:>3}  {:>5}  {:.5}", b.index, b.index - 1, r.value);
    }

    // Without images the score falls back to closeness to the global centroid.
    let features = gen_synthetic_mixture(4, 10, 8, 1.0, 3)?;
    let centroid = features.centroid();
    for b in &bins {
        let r = proxy_representativeness(b, &features, &centroid)?;
        println!("proxy bin {}: {:.4}", b.index, r.value);
    }
    Ok(())
}
