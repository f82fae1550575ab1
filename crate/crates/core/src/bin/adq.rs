use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adq::bins::BinSet;
use adq::dataset::{
    fallback_featurize, gen_synthetic_mixture, import_pnm_dir, load_dataset, load_features,
    load_images, write_features, write_images, DatasetManifest,
};
use adq::pipeline::{
    self, coreset_text, emit_trend_report, parse_coreset, AugmentChoice, DiscriminatorKind,
    FeaturizerConfig, PipelineConfig, RunReport,
};
use adq::sampling::{SamplingPlan, ScoreTable};
use adq::{AdqError, Result};

#[derive(Parser)]
#[command(name = "adq", version, about = "Adaptive dataset quantization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a dataset manifest from feature/image files, PGM/PPM images or a synthetic mixture
    Ingest(IngestArgs),
    /// Partition the dataset into bins
    Bins {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every bin (scores.csv)
    Score {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long = "bins-file")]
        bins_file: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn scores into per-bin quotas (plan.json)
    Plan {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long = "bins-file")]
        bins_file: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw the coreset from a plan (coreset.txt)
    Sample {
        #[arg(long = "bins-file")]
        bins_file: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage and write all artifacts to a directory
    Run {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit bin-index score series (bin,rs,ds,is) from scores.csv or report.json
    Trend {
        #[arg(long, conflicts_with = "report", required_unless_present = "report")]
        scores: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// JSON config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// mlp or identity
    #[arg(long, value_parser = parse_disc)]
    discriminator: Option<DiscriminatorKind>,
    #[arg(long)]
    epochs: Option<usize>,
    /// auto, identity, feature-noise or pixel
    #[arg(long, value_parser = parse_aug)]
    augment: Option<AugmentChoice>,
    /// Features were produced by the fallback projection of this width
    #[arg(long)]
    fallback_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    fallback_seed: u64,
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_disc(s: &str) -> std::result::Result<DiscriminatorKind, String> {
    match s {
        "mlp" => Ok(DiscriminatorKind::Mlp),
        "identity" => Ok(DiscriminatorKind::Identity),
        _ => Err(format!("unknown discriminator `{s}`")),
    }
}

fn parse_aug(s: &str) -> std::result::Result<AugmentChoice, String> {
    match s {
        "auto" => Ok(AugmentChoice::Auto),
        "identity" => Ok(AugmentChoice::Identity),
        "feature-noise" => Ok(AugmentChoice::FeatureNoise),
        "pixel" => Ok(AugmentChoice::Pixel),
        _ => Err(format!("unknown augmentation `{s}`")),
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),*) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set!(bins => c.bins, alpha => c.alpha, tau => c.tau, patch => c.patch, rho => c.rho,
             seed => c.seed, discriminator => c.discriminator.kind,
             epochs => c.discriminator.epochs, augment => c.augmentation);
        if let Some(out_dim) = self.fallback_dim {
            c.featurizer = FeaturizerConfig::Fallback {
                out_dim,
                seed: self.fallback_seed,
            };
        }
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Existing ADQF feature file
    #[arg(long, conflicts_with_all = ["pnm_dir", "synthetic"])]
    features: Option<PathBuf>,
    /// Existing ADQI image file
    #[arg(long)]
    images: Option<PathBuf>,
    /// Directory of binary PGM/PPM images to import
    #[arg(long)]
    pnm_dir: Option<PathBuf>,
    /// Featurize the images with the seeded random projection of this width
    #[arg(long)]
    fallback_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    fallback_seed: u64,
    /// Text file with one integer label per line
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Generate a Gaussian mixture instead of reading files
    #[arg(long)]
    synthetic: bool,
    #[arg(long, default_value_t = 10)]
    clusters: usize,
    #[arg(long, default_value_t = 100)]
    per_cluster: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory for the manifest and any generated files
    #[arg(long)]
    out: PathBuf,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| AdqError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| AdqError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).map_err(|e| AdqError::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn ingest(a: &IngestArgs) -> Result<()> {
    fs::create_dir_all(&a.out).map_err(|e| AdqError::Io {
        path: a.out.clone(),
        source: e,
    })?;
    let mut labels = match &a.labels {
        Some(p) => read_text(p)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse().map_err(|e| AdqError::Parse { what: "labels", detail: format!("{e}") }))
            .collect::<Result<Vec<u32>>>()?,
        None => vec![],
    };

    let mut images = match &a.images {
        Some(p) => Some((load_images(p)?, absolute(p)?)),
        None => None,
    };
    if let Some(dir) = &a.pnm_dir {
        let (table, files) = import_pnm_dir(dir)?;
        let path = a.out.join("images.adqi");
        write_images(&table, &path)?;
        eprintln!("imported {} images", files.len());
        images = Some((table, PathBuf::from("images.adqi")));
    }

    let feature_path = if a.synthetic {
        let t = gen_synthetic_mixture(a.clusters, a.per_cluster, a.dim, a.spread, a.seed)?;
        if labels.is_empty() {
            labels = t.labels().unwrap_or_default().to_vec();
        }
        write_features(&t, a.out.join("features.adqf"))?;
        PathBuf::from("features.adqf")
    } else if let Some(p) = &a.features {
        load_features(p)?;
        absolute(p)?
    } else if let (Some((table, _)), Some(dim)) = (&images, a.fallback_dim) {
        let t = fallback_featurize(table, dim, a.fallback_seed)?;
        write_features(&t, a.out.join("features.adqf"))?;
        PathBuf::from("features.adqf")
    } else {
        return Err(AdqError::Config(
            "ingest needs --features, --synthetic, or images plus --fallback-dim".into(),
        ));
    };

    let manifest = DatasetManifest::describe(
        feature_path,
        images.map(|(_, p)| p),
        labels,
        &a.out,
    )?;
    let mpath = a.out.join("manifest.json");
    manifest.save(&mpath)?;
    // round-trip through the loader so a bad combination fails now
    let ds = load_dataset(&mpath)?;
    println!("{} ({} items, d={})", mpath.display(), ds.features.len(), ds.features.dim());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(&a),
        Command::Bins { manifest, cfg, out } => {
            let cfg = cfg.resolve()?;
            let ds = load_dataset(&manifest)?;
            let bins = pipeline::with_threads(&cfg, || pipeline::stage_bins(&ds, &cfg))?;
            write_text(&out, &(bins.to_json() + "\n"))
        }
        Command::Score {
            manifest,
            bins_file,
            cfg,
            out,
        } => {
            let cfg = cfg.resolve()?;
            let ds = load_dataset(&manifest)?;
            let bins = BinSet::from_json(&read_text(&bins_file)?)?;
            bins.check_partition(ds.features.len())?;
            let scored = pipeline::with_threads(&cfg, || pipeline::stage_scores(&ds, &bins, &cfg))?;
            write_text(&out, &scored.scores.to_csv())
        }
        Command::Plan {
            scores,
            bins_file,
            cfg,
            out,
        } => {
            let cfg = cfg.resolve()?;
            let scores = ScoreTable::from_csv(&read_text(&scores)?)?;
            let bins = BinSet::from_json(&read_text(&bins_file)?)?;
            let plan = pipeline::stage_plan(&scores, &bins.masses(), &cfg)?;
            write_text(&out, &(plan.to_json() + "\n"))
        }
        Command::Sample {
            bins_file,
            plan,
            cfg,
            out,
        } => {
            let cfg = cfg.resolve()?;
            let bins = BinSet::from_json(&read_text(&bins_file)?)?;
            let plan = SamplingPlan::from_json(&read_text(&plan)?)?;
            let ids = pipeline::stage_sample(&bins, &plan, cfg.seed)?;
            write_text(&out, &coreset_text(&ids))
        }
        Command::Run { manifest, cfg, out } => {
            let mut cfg = cfg.resolve()?;
            if manifest.is_some() {
                cfg.manifest = manifest;
            }
            if out.is_some() {
                cfg.out = out;
            }
            let report = pipeline::run_pipeline(&cfg)?;
            match &cfg.out {
                Some(dir) => {
                    let n = parse_coreset(&read_text(&dir.join(&report.coreset_path))?)?.len();
                    println!(
                        "kept {n} of {} items in {} ({:.3}s)",
                        report.items,
                        dir.display(),
                        report.timings.total
                    );
                }
                None => print!("{}", report.to_json()),
            }
            Ok(())
        }
        Command::Trend {
            scores,
            report,
            out,
        } => {
            let table = match (scores, report) {
                (Some(p), _) => ScoreTable::from_csv(&read_text(&p)?)?,
                (None, Some(p)) => {
                    let r: RunReport = serde_json::from_str(&read_text(&p)?)
                        .map_err(|e| AdqError::Parse { what: "report", detail: e.to_string() })?;
                    r.scores
                }
                (None, None) => unreachable!("clap requires one source"),
            };
            let csv = emit_trend_report(&table);
            match out {
                Some(p) => write_text(&p, &csv),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adq: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
