//! Write a synthetic mixture to disk as an ADQF feature file plus a
//! manifest, then load it back through the checksum-verifying loader.
//!
//! ```bash
//! cargo run --example ingest_synthetic -- /tmp/adq-mixture
//! ```

use std::path::PathBuf;

use adq::dataset::{gen_synthetic_mixture, load_dataset, write_features, DatasetManifest};

fn main() -> adq::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("adq-mixture"));
    std::fs::create_dir_all(&dir).map_err(|e| adq::AdqError::io(&dir, e))?;

    let table = gen_synthetic_mixture(10, 100, 8, 1.0, 1)?;
    write_features(&table, dir.join("features.adqf"))?;
    let labels = table.labels().unwrap_or_default().to_vec();
    let manifest = DatasetManifest::describe("features.adqf", None, labels, &dir)?;
    manifest.save(dir.join("manifest.json"))?;

    let ds = load_dataset(dir.join("manifest.json"))?;
    println!("{}", dir.join("manifest.json").display());
    println!("items {}  dim {}  sha256 {}", ds.features.len(), ds.features.dim(), ds.manifest.sha256);
    let c = ds.features.centroid();
    println!("centroid[..3] = {:.3?}", &c[..3]);
    Ok(())
}
