//! End-to-end orchestration: bins, scores, importance, plan, draw.

mod config;
mod report;

pub use config::{
    AugmentChoice, DiscriminatorConfig, DiscriminatorKind, FeaturizerConfig, PipelineConfig,
    THREADS_ENV,
};
pub use report::{emit_trend_report, RunReport, StageTimings};

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::bins::{generate_bins, Bin, BinSet};
use crate::dataset::{load_dataset, Dataset, RandomProjection};
use crate::diversity::{
    bin_diversity, train_discriminator, AugmentMode, Augmenter, ContrastiveBatch, Discriminator,
};
use crate::error::{AdqError, Result};
use crate::sampling::{draw_samples, SamplingPlan, ScoreTable};
use crate::texture::{bin_representativeness, proxy_representativeness, RepSource};

/// Diversity assigned to single-item bins, which have no negatives. It is
/// the value a pair of identical items scores under the identity setup.
pub const SINGLETON_DIVERSITY: f64 = -1.0;

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub bins: BinSet,
    pub coreset: Vec<u32>,
    pub report: RunReport,
}

/// Scores of every bin plus provenance notes.
#[derive(Debug, Clone)]
pub struct ScoreStage {
    pub scores: ScoreTable,
    pub rep_source: RepSource,
    pub singleton_bins: Vec<usize>,
}

pub fn stage_bins(dataset: &Dataset, cfg: &PipelineConfig) -> Result<BinSet> {
    generate_bins(&dataset.features, cfg.bins).map_err(|e| e.in_stage("bins"))
}

fn augment_mode(dataset: &Dataset, cfg: &PipelineConfig) -> AugmentMode {
    match cfg.augmentation {
        AugmentChoice::Identity => AugmentMode::Identity,
        AugmentChoice::FeatureNoise => AugmentMode::FeatureNoise,
        AugmentChoice::Pixel => AugmentMode::Pixel,
        AugmentChoice::Auto => match (&dataset.images, cfg.featurizer) {
            (Some(_), FeaturizerConfig::Fallback { .. }) => AugmentMode::Pixel,
            _ => AugmentMode::FeatureNoise,
        },
    }
}

fn score_diversity(
    bin: &Bin,
    dataset: &Dataset,
    cfg: &PipelineConfig,
    mode: AugmentMode,
    projection: Option<&RandomProjection>,
) -> Result<f64> {
    if bin.len() < 2 {
        return Ok(SINGLETON_DIVERSITY);
    }
    let mut aug = Augmenter::new(mode, bin, &dataset.features)?;
    if let Some(images) = &dataset.images {
        if let Some(p) = projection {
            aug = aug.with_pixels(images, p);
        }
        if cfg.discriminator.channel_means {
            aug = aug.with_channel_means(images);
        }
    }
    let batch = ContrastiveBatch::from_bin(bin, &aug, cfg.seed)?;
    let disc = match cfg.discriminator.kind {
        DiscriminatorKind::Identity => Discriminator::Identity,
        DiscriminatorKind::Mlp => {
            let trained = train_discriminator(
                &batch,
                cfg.tau,
                &cfg.discriminator.train_config(),
                cfg.seed,
                bin.index as u64,
            )?;
            Discriminator::Mlp(trained.mlp)
        }
    };
    Ok(bin_diversity(bin.index, &batch, &disc, cfg.tau)?.value)
}

pub fn stage_scores(dataset: &Dataset, bins: &BinSet, cfg: &PipelineConfig) -> Result<ScoreStage> {
    let rep_stage = |e: AdqError| e.in_stage("representativeness");
    let (rep, rep_source) = match &dataset.images {
        Some(images) => {
            let rep = bins
                .bins
                .iter()
                .map(|b| bin_representativeness(b, images, cfg.patch).map(|r| r.value))
                .collect::<Result<Vec<_>>>()
                .map_err(rep_stage)?;
            (rep, RepSource::Texture)
        }
        None => {
            let centroid = dataset.features.centroid();
            let rep = bins
                .bins
                .iter()
                .map(|b| proxy_representativeness(b, &dataset.features, &centroid).map(|r| r.value))
                .collect::<Result<Vec<_>>>()
                .map_err(rep_stage)?;
            (rep, RepSource::ProxyRep)
        }
    };

    let mode = augment_mode(dataset, cfg);
    let projection = match (mode, &dataset.images, cfg.featurizer) {
        (AugmentMode::Pixel, Some(images), FeaturizerConfig::Fallback { out_dim, seed }) => {
            if out_dim != dataset.features.dim() {
                return Err(AdqError::Config(format!(
                    "featurizer out_dim {out_dim} does not match feature dimension {}",
                    dataset.features.dim()
                ))
                .in_stage("diversity"));
            }
            Some(RandomProjection::new(images.image_len(), out_dim, seed).map_err(|e| e.in_stage("diversity"))?)
        }
        (AugmentMode::Pixel, _, _) => {
            return Err(AdqError::Config(
                "pixel augmentation needs images and the fallback featurizer".into(),
            )
            .in_stage("diversity"))
        }
        _ => None,
    };
    let div = bins
        .bins
        .par_iter()
        .map(|b| score_diversity(b, dataset, cfg, mode, projection.as_ref()))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("diversity"))?;
    let singleton_bins = bins.bins.iter().filter(|b| b.len() < 2).map(|b| b.index).collect();

    let scores = ScoreTable::from_raw(rep, div).map_err(|e| e.in_stage("importance"))?;
    Ok(ScoreStage {
        scores,
        rep_source,
        singleton_bins,
    })
}

pub fn stage_plan(scores: &ScoreTable, masses: &[usize], cfg: &PipelineConfig) -> Result<SamplingPlan> {
    SamplingPlan::build(&scores.importance, masses, cfg.alpha, cfg.rho).map_err(|e| e.in_stage("plan"))
}

pub fn stage_sample(bins: &BinSet, plan: &SamplingPlan, seed: u64) -> Result<Vec<u32>> {
    draw_samples(&bins.bins, &plan.quotas, seed).map_err(|e| e.in_stage("sample"))
}

/// Runs `f` on a pool sized by the config / `ADQ_THREADS`, or on the
/// current pool when neither is set.
pub fn with_threads<T: Send>(cfg: &PipelineConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match cfg.resolved_threads()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| AdqError::Config(format!("thread pool: {e}")))?
            .install(f),
        None => f(),
    }
}

/// All stages on an already loaded dataset. Nothing is written.
pub fn run_on_dataset(dataset: &Dataset, cfg: &PipelineConfig) -> Result<RunOutput> {
    cfg.validate()?;
    with_threads(cfg, || {
        let start = Instant::now();
        let mut timings = StageTimings::default();
        let mut lap = Instant::now();
        let mut mark = |name: &str, timings: &mut StageTimings| {
            timings.stages.push((name.to_string(), lap.elapsed().as_secs_f64()));
            lap = Instant::now();
        };

        let bins = stage_bins(dataset, cfg)?;
        mark("bins", &mut timings);
        let scored = stage_scores(dataset, &bins, cfg)?;
        mark("score", &mut timings);
        let masses = bins.masses();
        let plan = stage_plan(&scored.scores, &masses, cfg)?;
        mark("plan", &mut timings);
        let coreset = stage_sample(&bins, &plan, cfg.seed)?;
        mark("sample", &mut timings);
        timings.total = start.elapsed().as_secs_f64();

        let report = RunReport {
            config_hash: cfg.hash(&dataset.manifest.sha256),
            seed: cfg.seed,
            items: dataset.features.len(),
            m: bins.m,
            k: bins.k,
            rep_source: scored.rep_source,
            singleton_bins: scored.singleton_bins,
            masses,
            scores: scored.scores,
            plan,
            coreset_path: "coreset.txt".into(),
            coreset_len: coreset.len(),
            timings,
        };
        Ok(RunOutput {
            bins,
            coreset,
            report,
        })
    })
}

/// Loads the manifest named in `cfg`, runs every stage and, when `cfg.out`
/// is set, writes all artifacts there.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let manifest = cfg
        .manifest
        .as_ref()
        .ok_or_else(|| AdqError::Config("no manifest given".into()))?;
    let dataset = load_dataset(manifest).map_err(|e| e.in_stage("load"))?;
    let output = run_on_dataset(&dataset, cfg)?;
    if let Some(out) = &cfg.out {
        write_outputs(&output, out)?;
    }
    Ok(output.report)
}

pub fn coreset_text(ids: &[u32]) -> String {
    let mut s = String::with_capacity(ids.len() * 6);
    for id in ids {
        s.push_str(&id.to_string());
        s.push('\n');
    }
    s
}

pub fn parse_coreset(text: &str) -> Result<Vec<u32>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse().map_err(|e| AdqError::parse("coreset", e)))
        .collect()
}

/// Writes `bins.json`, `scores.csv`, `plan.json`, `coreset.txt`,
/// `coreset.json`, `trend.csv`, `report.json` and `timings.json`.
pub fn write_outputs(output: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| AdqError::io(dir, e))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| AdqError::io(p, e))
    };
    let r = &output.report;
    write("bins.json", output.bins.to_json() + "\n")?;
    write("scores.csv", r.scores.to_csv())?;
    write("plan.json", r.plan.to_json() + "\n")?;
    write("coreset.txt", coreset_text(&output.coreset))?;
    let sidecar = serde_json::json!({
        "config_hash": r.config_hash,
        "seed": r.seed,
        "count": output.coreset.len(),
    });
    write("coreset.json", serde_json::to_string_pretty(&sidecar).unwrap() + "\n")?;
    write("trend.csv", emit_trend_report(&r.scores))?;
    write("report.json", r.to_json())?;
    write(
        "timings.json",
        serde_json::to_string_pretty(&r.timings).unwrap() + "\n",
    )?;
    Ok(())
}
