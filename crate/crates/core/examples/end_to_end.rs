//! Full run: synthetic dataset on disk, every stage, all artifacts written.
//!
//! ```bash
//! cargo run --release --example end_to_end -- /tmp/adq-run
//! ```

use std::path::PathBuf;

use adq::dataset::{gen_synthetic_mixture, write_features, DatasetManifest};
use adq::pipeline::{emit_trend_report, run_pipeline, PipelineConfig};

fn main() -> adq::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("adq-run"));
    let data = root.join("data");
    std::fs::create_dir_all(&data).map_err(|e| adq::AdqError::io(&data, e))?;

    let table = gen_synthetic_mixture(10, 200, 16, 1.0, 2)?;
    write_features(&table, data.join("features.adqf"))?;
    let labels = table.labels().unwrap_or_default().to_vec();
    DatasetManifest::describe("features.adqf", None, labels, &data)?.save(data.join("manifest.json"))?;

    let cfg = PipelineConfig {
        manifest: Some(data.join("manifest.json")),
        out: Some(root.join("out")),
        rho: 0.1,
        ..PipelineConfig::default()
    };
    let report = run_pipeline(&cfg)?;
    println!("config {}", report.config_hash);
    println!("kept {} of {} items, quotas {:?}", report.coreset_len, report.items, report.plan.quotas);
    for (stage, secs) in &report.timings.stages {
        println!("  {stage:<7} {secs:.3}s");
    }
    print!("{}", emit_trend_report(&report.scores));
    println!("artifacts in {}", root.join("out").display());
    Ok(())
}
