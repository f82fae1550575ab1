//! Raw images end to end: write PGM files, import them, featurize with the
//! seeded random projection and run with pixel-level positives.

use std::fs;
use std::path::PathBuf;

use adq::dataset::{fallback_featurize, gen_textured_images, import_pnm_dir, write_features, write_images, DatasetManifest};
use adq::pipeline::{run_pipeline, AugmentChoice, FeaturizerConfig, PipelineConfig};
use adq::AdqError;

fn main() -> adq::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("adq-pnm"));
    let pgm = root.join("pgm");
    fs::create_dir_all(&pgm).map_err(|e| AdqError::io(&pgm, e))?;

    let source = gen_textured_images(60, 16, 16, 1, 5, 3)?;
    for id in 0..source.len() as u32 {
        let img = source.image(id)?;
        let mut bytes = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
        bytes.extend_from_slice(img.data);
        let path = pgm.join(format!("img{id:03}.pgm"));
        fs::write(&path, bytes).map_err(|e| AdqError::io(&path, e))?;
    }

    let (images, files) = import_pnm_dir(&pgm)?;
    println!("imported {} images of {}x{}", files.len(), images.width(), images.height());
    let (out_dim, seed) = (32, 5);
    let features = fallback_featurize(&images, out_dim, seed)?;
    write_images(&images, root.join("images.adqi"))?;
    write_features(&features, root.join("features.adqf"))?;
    DatasetManifest::describe("features.adqf", Some("images.adqi".into()), vec![], &root)?
        .save(root.join("manifest.json"))?;

    let cfg = PipelineConfig {
        bins: 6,
        rho: 0.25,
        patch: 8,
        augmentation: AugmentChoice::Pixel,
        featurizer: FeaturizerConfig::Fallback { out_dim, seed },
        manifest: Some(root.join("manifest.json")),
        out: Some(root.join("out")),
        ..PipelineConfig::default()
    };
    let report = run_pipeline(&cfg)?;
    println!("rep source {:?}", report.rep_source);
    println!("rep  {:.4?}", report.scores.rep);
    println!("div  {:.4?}", report.scores.div);
    println!("quotas {:?} -> {} kept", report.plan.quotas, report.coreset_len);
    Ok(())
}
