// Acceptance gate. Runs without the libtest harness so every criterion
// prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use adq::bins::{fast_gain, generate_bins, naive_gain, BinSet, PoolMoments};
use adq::dataset::{gen_synthetic_mixture, Dataset, DatasetManifest, FeatureTable};
use adq::diversity::{
    bin_diversity, contrastive_loss, contrastive_loss_grad, ContrastiveBatch, Discriminator, Mlp,
};
use adq::pipeline::{run_on_dataset, AugmentChoice, DiscriminatorKind, PipelineConfig};
use adq::sampling::{budget, minmax_normalize, uniform_quotas, SamplingPlan};
use adq::texture::{gradient_magnitude, patch_texture_level, sobel, Patch};
use adq::AdqError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_table(rows: usize, dim: usize, scale: f64, r: &mut ChaCha8Rng) -> FeatureTable {
    let values = (0..rows * dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(r);
            (scale * z) as f32
        })
        .collect();
    FeatureTable::new(rows, dim, values).unwrap()
}

fn rows_f64(t: &FeatureTable) -> Vec<Vec<f64>> {
    t.values()
        .chunks_exact(t.dim())
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

// Greedy over the double-loop gain, pool ordered by id, strict improvement
// only so ties keep the smallest id.
fn naive_greedy(t: &FeatureTable, m: usize) -> Vec<Vec<u32>> {
    let x = rows_f64(t);
    let n = x.len();
    let k = n.div_ceil(m);
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = vec![];
    for b in 0..m {
        let size = if b + 1 == m { n - (m - 1) * k } else { k };
        let mut bin: Vec<usize> = vec![];
        for _ in 0..size {
            let mut best = (f64::NEG_INFINITY, usize::MAX);
            for &c in &pool {
                let s: f64 = bin.iter().map(|&p| sq(&x[p], &x[c])).sum();
                let r: f64 = pool.iter().map(|&p| sq(&x[p], &x[c])).sum();
                if s - r > best.0 {
                    best = (s - r, c);
                }
            }
            pool.retain(|&p| p != best.1);
            bin.push(best.1);
        }
        out.push(bin.into_iter().map(|v| v as u32).collect());
    }
    out
}

fn c1_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut mismatched = vec![];
    for seed in 0..10u64 {
        let t = if seed % 2 == 0 {
            gaussian_table(200, 16, 1.0, &mut rng(100 + seed))
        } else {
            gen_synthetic_mixture(10, 20, 16, 1.0, seed).unwrap()
        };
        let fast = generate_bins(&t, 10).unwrap();
        let fast: Vec<Vec<u32>> = fast.bins.into_iter().map(|b| b.members).collect();
        if fast != naive_greedy(&t, 10) {
            mismatched.push(seed);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatched.is_empty() && secs < 5.0,
        format!("10 instances M=200 d=16 m=10, mismatched seeds {mismatched:?}, {secs:.2}s (limit 5s)"),
    )
}

fn c2_gain_identity() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let items = r.random_range(2..60usize);
        let dim = r.random_range(1..12usize);
        let scale = [0.01, 1.0, 50.0][r.random_range(0..3usize)];
        let t = gaussian_table(items, dim, scale, &mut r);
        let mut ids: Vec<u32> = (0..items as u32).collect();
        for i in (1..ids.len()).rev() {
            ids.swap(i, r.random_range(0..=i));
        }
        let in_bin = r.random_range(0..items);
        let rest = &ids[in_bin..];
        let pool_len = r.random_range(1..=rest.len());
        let (bin, pool) = (&ids[..in_bin], &rest[..pool_len]);
        let cand = pool[r.random_range(0..pool.len())];
        let naive = naive_gain(cand, bin, pool, &t).unwrap();
        let moments = PoolMoments::from_sets(&t, bin, pool).unwrap();
        let fast = fast_gain(cand, &moments, &t).unwrap();
        worst = worst.max((fast - naive).abs() / (1.0 + naive.abs()));
    }
    outcome(
        worst <= 1e-6,
        format!("1000 triples, max |fast-naive|/(1+|naive|) = {worst:.3e} (limit 1e-6)"),
    )
}

fn c3_partition_laws() -> Outcome {
    let mut r = rng(3);
    let mut checked = 0;
    let mut problems = vec![];
    while checked < 20 {
        let items = r.random_range(1..400usize);
        let m = r.random_range(1..=items.min(40));
        let t = gaussian_table(items, r.random_range(1..9usize), 1.0, &mut r);
        let k = items.div_ceil(m);
        match generate_bins(&t, m) {
            Err(AdqError::InvalidBinCount { .. }) if (m - 1) * k >= items => continue,
            Err(e) => {
                problems.push(format!("M={items} m={m}: {e}"));
                checked += 1;
                continue;
            }
            Ok(set) => {
                checked += 1;
                let mut seen = vec![false; items];
                let mut ok = set.bins.len() == m && set.k == k;
                for (n, b) in set.bins.iter().enumerate() {
                    let want = if n + 1 == m { items - (m - 1) * k } else { k };
                    ok &= b.members.len() == want && b.index == n + 1;
                    for &id in &b.members {
                        ok &= (id as usize) < items && !seen[id as usize];
                        if (id as usize) < items {
                            seen[id as usize] = true;
                        }
                    }
                }
                ok &= seen.iter().all(|&s| s);
                if !ok {
                    problems.push(format!("M={items} m={m}"));
                }
            }
        }
    }
    outcome(
        problems.is_empty(),
        format!("20 configurations, violations {problems:?}"),
    )
}

// Plain 3x3 correlation with clamped borders.
fn conv_oracle(px: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let ky = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
    let at = |r: isize, c: isize| {
        let r = r.clamp(0, n as isize - 1) as usize;
        let c = c.clamp(0, n as isize - 1) as usize;
        px[r * n + c]
    };
    let (mut gx, mut gy) = (vec![0.0; n * n], vec![0.0; n * n]);
    for r in 0..n {
        for c in 0..n {
            for i in 0..3 {
                for j in 0..3 {
                    let v = at(r as isize + i as isize - 1, c as isize + j as isize - 1);
                    gx[r * n + c] += kx[i][j] * v;
                    gy[r * n + c] += ky[i][j] * v;
                }
            }
        }
    }
    (gx, gy)
}

fn transpose(px: &[f64], n: usize) -> Vec<f64> {
    (0..n * n).map(|i| px[(i % n) * n + i / n]).collect()
}

fn c4_texture() -> Outcome {
    let flat = Patch::new(8, vec![0.37; 64]).unwrap();
    let flat_level = patch_texture_level(&flat);

    let step: Vec<f64> = (0..16).map(|i| if i % 4 >= 2 { 1.0 } else { 0.0 }).collect();
    let (gx, gy) = conv_oracle(&step, 4);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect();
    let oracle_level = mag.iter().sum::<f64>() / 16.0;
    let p = Patch::new(4, step).unwrap();
    let (sx, sy) = sobel(&p);
    let mut step_err = (patch_texture_level(&p) - oracle_level).abs();
    for i in 0..16 {
        step_err = step_err.max((sx[i] - gx[i]).abs()).max((sy[i] - gy[i]).abs());
    }
    let hand = sx.chunks(4).all(|row| row == [0.0, 4.0, 4.0, 0.0]) && sy.iter().all(|&v| v == 0.0);

    let mut r = rng(4);
    let mut t_err = 0.0f64;
    for _ in 0..100 {
        let n = r.random_range(3..17usize);
        let px: Vec<f64> = (0..n * n).map(|_| r.random::<f64>()).collect();
        let a = Patch::new(n, px.clone()).unwrap();
        let b = Patch::new(n, transpose(&px, n)).unwrap();
        let ((ax, ay), (bx, by)) = (sobel(&a), sobel(&b));
        let (ma, mb) = (gradient_magnitude(&a), transpose(&gradient_magnitude(&b), n));
        for i in 0..n * n {
            let j = (i % n) * n + i / n;
            t_err = t_err
                .max((ax[i] - by[j]).abs())
                .max((ay[i] - bx[j]).abs())
                .max((ma[i] - mb[i]).abs());
        }
        t_err = t_err.max((patch_texture_level(&a) - patch_texture_level(&b)).abs());
    }
    outcome(
        flat_level == 0.0 && step_err <= 1e-12 && hand && t_err <= 1e-12,
        format!(
            "flat level {flat_level:e}, step max err {step_err:.1e} (limit 1e-12), step Gx rows 0,4,4,0 {hand}, \
             transpose max err over 100 patches {t_err:.1e} (limit 1e-12)"
        ),
    )
}

fn identity_div(a: Vec<f64>, b: Vec<f64>) -> f64 {
    let batch = ContrastiveBatch::new(vec![a.clone(), b.clone()], vec![a, b]).unwrap();
    bin_diversity(1, &batch, &Discriminator::Identity, 1.0)
        .unwrap()
        .value
}

fn c5_diversity() -> Outcome {
    let dup = identity_div(vec![0.6, 0.8], vec![0.6, 0.8]);
    let orth = identity_div(vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0]);
    let mut sweep = vec![];
    let mut sweep_err = 0.0f64;
    for i in 0..20 {
        let theta = std::f64::consts::PI * i as f64 / 19.0;
        let v = identity_div(vec![1.0, 0.0], vec![theta.cos(), theta.sin()]);
        sweep_err = sweep_err.max((v + (theta.cos() - 1.0).exp()).abs());
        sweep.push(v);
    }
    let monotone = sweep.windows(2).all(|w| w[1] > w[0]);
    let orth_want = -(-1.0f64).exp();
    outcome(
        (dup + 1.0).abs() <= 1e-9 && (orth - orth_want).abs() <= 1e-9 && monotone && sweep_err <= 1e-9,
        format!(
            "duplicate {dup:.12} (want -1), orthogonal {orth:.12} (want {orth_want:.12}), \
             20-angle sweep strictly increasing {monotone}, sweep closed-form err {sweep_err:.1e} (limit 1e-9)"
        ),
    )
}

fn c6_gradient_check() -> Outcome {
    let mut worst = 0.0f64;
    let h = 1e-6;
    for seed in 0..5u64 {
        let mut r = rng(60 + seed);
        let inputs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..6).map(|_| StandardNormal.sample(&mut r)).collect())
            .collect();
        let positives = inputs
            .iter()
            .map(|x| {
                x.iter()
                    .map(|v| {
                        let z: f64 = StandardNormal.sample(&mut r);
                        v + 0.3 * z
                    })
                    .collect()
            })
            .collect();
        let batch = ContrastiveBatch::new(inputs, positives).unwrap();
        let mlp = Mlp::init(6, 8, 4, seed, 0).unwrap();
        let (_, grad) = contrastive_loss_grad(&batch, &mlp, 0.5).unwrap();
        let base = mlp.params();
        for i in 0..base.len() {
            let mut probe = mlp.clone();
            let mut p = base.clone();
            p[i] = base[i] + h;
            probe.set_params(&p);
            let up = contrastive_loss(&batch, &Discriminator::Mlp(probe.clone()), 0.5).unwrap();
            p[i] = base[i] - h;
            probe.set_params(&p);
            let down = contrastive_loss(&batch, &Discriminator::Mlp(probe), 0.5).unwrap();
            let numeric = (up - down) / (2.0 * h);
            let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    outcome(
        worst <= 1e-4,
        format!(
            "5 seeds, d=6 h=8 e=4, max |analytic-numeric|/max(|analytic|,|numeric|,1e-6) = {worst:.2e} (limit 1e-4)"
        ),
    )
}

// Equal masses: floor(B/m) each, the first B mod m bins get one more.
fn uniform_oracle(m: usize, mass: usize, rho: f64) -> Vec<usize> {
    let b = (rho * (m * mass) as f64 * (1.0 + 1e-12)).floor() as usize;
    (0..m).map(|i| b / m + usize::from(i < b % m)).collect()
}

fn c7_plan_laws() -> Outcome {
    let mut r = rng(7);
    let mut problems = vec![];
    for trial in 0..500 {
        let m = r.random_range(1..15usize);
        let masses: Vec<usize> = (0..m).map(|_| r.random_range(1..200usize)).collect();
        let items: usize = masses.iter().sum();
        let imp: Vec<f64> = (0..m).map(|_| 2.0 * r.random::<f64>()).collect();
        let alpha = r.random::<f64>();
        let rho = r.random_range(0.01..1.0);
        let plan = SamplingPlan::build(&imp, &masses, alpha, rho).unwrap();
        let b = budget(rho, items).unwrap();
        let total = plan.total();
        let saturated = plan.quotas.iter().zip(&masses).any(|(q, n)| q == n);
        if total > b
            || plan.quotas.iter().zip(&masses).any(|(q, n)| q > n)
            || (!saturated && total + m < b)
        {
            problems.push(trial);
        }
    }
    let mut dq_mismatch = vec![];
    for seed in 0..50u64 {
        let mut r = rng(700 + seed);
        let m = r.random_range(1..20usize);
        let mass = r.random_range(1..300usize);
        let masses = vec![mass; m];
        let rho = r.random_range(0.01..1.0);
        let imp: Vec<f64> = (0..m).map(|_| 2.0 * r.random::<f64>()).collect();
        let plan = SamplingPlan::build(&imp, &masses, 0.0, rho).unwrap();
        let uniform = uniform_quotas(&masses, rho).unwrap();
        if plan.quotas != uniform || uniform != uniform_oracle(m, mass, rho) {
            dq_mismatch.push(seed);
        }
    }
    outcome(
        problems.is_empty() && dq_mismatch.is_empty(),
        format!(
            "500 random plans, law violations {problems:?}; 50 equal-mass alpha=0 plans vs uniform, mismatches {dq_mismatch:?}"
        ),
    )
}

fn c8_normalization() -> Outcome {
    let mut r = rng(8);
    let mut bad = vec![];
    let mut affine_err = 0.0f64;
    for trial in 0..200 {
        let n = r.random_range(2..30usize);
        let v: Vec<f64> = (0..n).map(|_| r.random_range(-100.0..100.0)).collect();
        let h = minmax_normalize(&v).unwrap();
        let in_range = h.iter().all(|x| (0.0..=1.0).contains(x));
        let ends = h.contains(&0.0) && h.contains(&1.0);
        if !in_range || !ends {
            bad.push(trial);
        }
        let a = r.random_range(0.1..10.0);
        let b = r.random_range(-50.0..50.0);
        let w: Vec<f64> = v.iter().map(|x| a * x + b).collect();
        let hw = minmax_normalize(&w).unwrap();
        for (x, y) in h.iter().zip(&hw) {
            affine_err = affine_err.max((x - y).abs());
        }
    }
    let flat = minmax_normalize(&[3.25; 7]).unwrap();
    let degenerate = flat.iter().all(|&x| x == 0.5);
    outcome(
        bad.is_empty() && affine_err <= 1e-9 && degenerate,
        format!(
            "200 vectors, range/endpoint failures {bad:?}, affine max err {affine_err:.1e} (limit 1e-9), constant input -> 0.5 {degenerate}"
        ),
    )
}

const RUN_FILES: [&str; 7] = [
    "bins.json",
    "scores.csv",
    "plan.json",
    "coreset.txt",
    "coreset.json",
    "trend.csv",
    "report.json",
];

fn cli_run(manifest: &Path, out: &Path, threads: Option<&str>) -> bool {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_adq"));
    cmd.args(["run", "--seed", "11", "--rho", "0.2", "--bins", "10", "--manifest"])
        .arg(manifest)
        .arg("--out")
        .arg(out)
        .env_remove("ADQ_THREADS");
    if let Some(t) = threads {
        cmd.env("ADQ_THREADS", t);
    }
    cmd.output().map(|o| o.status.success()).unwrap_or(false)
}

fn same_files(a: &Path, b: &Path) -> Vec<&'static str> {
    RUN_FILES
        .iter()
        .copied()
        .filter(|f| std::fs::read(a.join(f)).ok() != std::fs::read(b.join(f)).ok() || !a.join(f).exists())
        .collect()
}

fn c9_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let ingest = Command::new(env!("CARGO_BIN_EXE_adq"))
        .args(["ingest", "--synthetic", "--clusters", "10", "--per-cluster", "500", "--dim", "8", "--seed", "5", "--out"])
        .arg(&data)
        .output()
        .unwrap();
    if !ingest.status.success() {
        return outcome(false, format!("ingest failed: {}", String::from_utf8_lossy(&ingest.stderr)));
    }
    let manifest = data.join("manifest.json");
    let runs = [("a", None), ("b", None), ("t1", Some("1")), ("t4", Some("4"))];
    for (name, threads) in runs {
        if !cli_run(&manifest, &tmp.path().join(name), threads) {
            return outcome(false, format!("run {name} failed"));
        }
    }
    let a = tmp.path().join("a");
    let repeat = same_files(&a, &tmp.path().join("b"));
    let env1 = same_files(&a, &tmp.path().join("t1"));
    let env4 = same_files(&a, &tmp.path().join("t4"));

    // In-process, thread count from the config.
    let ds = Dataset {
        features: gen_synthetic_mixture(10, 500, 8, 1.0, 5).unwrap(),
        images: None,
        manifest: DatasetManifest {
            feature_path: "features.adqf".into(),
            image_path: None,
            labels: vec![],
            sha256: "0".into(),
        },
    };
    let cfg = |t| PipelineConfig {
        threads: Some(t),
        seed: 11,
        rho: 0.2,
        ..PipelineConfig::default()
    };
    let one = run_on_dataset(&ds, &cfg(1)).unwrap();
    let three = run_on_dataset(&ds, &cfg(3)).unwrap();
    let in_process = one.bins == three.bins
        && one.coreset == three.coreset
        && one.report.to_json() == three.report.to_json();

    outcome(
        repeat.is_empty() && env1.is_empty() && env4.is_empty() && in_process,
        format!(
            "M=5000 CLI run twice differing files {repeat:?}; ADQ_THREADS=1 {env1:?}; ADQ_THREADS=4 {env4:?}; \
             config threads 1 vs 3 identical {in_process}"
        ),
    )
}

fn centroid(rows: &[Vec<f64>], ids: &[u32]) -> Vec<f64> {
    let mut c = vec![0.0; rows[0].len()];
    for &id in ids {
        for (a, v) in c.iter_mut().zip(&rows[id as usize]) {
            *a += v;
        }
    }
    c.iter().map(|v| v / ids.len() as f64).collect()
}

fn c10_trend() -> Outcome {
    let mut wins = 0;
    let mut pairs = vec![];
    for seed in 1..=20u64 {
        let t = gen_synthetic_mixture(10, 100, 8, 1.0, seed).unwrap();
        let rows = rows_f64(&t);
        let all: Vec<u32> = (0..rows.len() as u32).collect();
        let g = centroid(&rows, &all);
        let set: BinSet = generate_bins(&t, 10).unwrap();
        let first = sq(&centroid(&rows, &set.bins[0].members), &g).sqrt();
        let last = sq(&centroid(&rows, &set.bins[9].members), &g).sqrt();
        if first < last {
            wins += 1;
        }
        pairs.push(format!("{first:.2}/{last:.2}"));
    }
    outcome(
        wins >= 14,
        format!(
            "bin 1 closer than bin 10 in {wins}/20 seeds (need >= 14); distances first/last {}",
            pairs.join(" ")
        ),
    )
}

fn c11_performance() -> Outcome {
    let ds = Dataset {
        features: gen_synthetic_mixture(10, 5000, 64, 1.0, 11).unwrap(),
        images: None,
        manifest: DatasetManifest {
            feature_path: "features.adqf".into(),
            image_path: None,
            labels: vec![],
            sha256: "0".into(),
        },
    };
    let mut cfg = PipelineConfig::default();
    cfg.discriminator.kind = DiscriminatorKind::Identity;
    cfg.augmentation = AugmentChoice::Identity;
    let out = match run_on_dataset(&ds, &cfg) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let bins = out.report.timings.get("bins").unwrap_or(f64::INFINITY);
    outcome(
        bins < 60.0,
        format!(
            "M=50000 d=64 m=10 on {} threads: bin generation {bins:.1}s (limit 60s), whole run {:.1}s",
            rayon::current_num_threads(),
            out.report.timings.total
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 oracle equivalence", c1_oracle_equivalence),
        ("2 gain identity", c2_gain_identity),
        ("3 partition laws", c3_partition_laws),
        ("4 texture oracle", c4_texture),
        ("5 diversity closed forms", c5_diversity),
        ("6 gradient check", c6_gradient_check),
        ("7 sampling-plan laws", c7_plan_laws),
        ("8 normalization laws", c8_normalization),
        ("9 determinism", c9_determinism),
        ("10 early-bin trend", c10_trend),
        ("11 bin generation time", c11_performance),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
