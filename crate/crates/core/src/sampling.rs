//! Importance scores, per-bin quotas and the final draw.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bins::Bin;
use crate::error::{AdqError, Result};
use crate::rng::{substream, Purpose};

/// Min-max scaling to `[0, 1]`. A constant input maps to all `0.5`.
pub fn minmax_normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(AdqError::EmptyInput);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(AdqError::InvalidInput(format!("score {i} is not finite")));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![0.5; values.len()]);
    }
    let span = max - min;
    Ok(values
        .iter()
        .map(|&v| ((v - min) / span).clamp(0.0, 1.0))
        .collect())
}

/// Elementwise sum of normalized representativeness and diversity.
pub fn importance(rep_hat: &[f64], div_hat: &[f64]) -> Result<Vec<f64>> {
    if rep_hat.len() != div_hat.len() {
        return Err(AdqError::LengthMismatch {
            left: rep_hat.len(),
            right: div_hat.len(),
        });
    }
    Ok(rep_hat.iter().zip(div_hat).map(|(r, d)| r + d).collect())
}

/// `r_n = alpha * I_n + (1 - alpha) * N(n) / sum N`.
///
/// The result is a relative weight, not a probability: it can exceed 1.
pub fn raw_ratios(importances: &[f64], masses: &[usize], alpha: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(AdqError::BadAlpha(alpha));
    }
    if importances.len() != masses.len() {
        return Err(AdqError::LengthMismatch {
            left: importances.len(),
            right: masses.len(),
        });
    }
    if masses.iter().any(|&n| n == 0) {
        return Err(AdqError::InvalidInput("bin masses must be positive".into()));
    }
    let total: usize = masses.iter().sum();
    Ok(importances
        .iter()
        .zip(masses)
        .map(|(&i, &n)| alpha * i + (1.0 - alpha) * n as f64 / total as f64)
        .collect())
}

/// `floor(rho * M)`, forgiving the last-ulp error of the product.
pub fn budget(rho: f64, items: usize) -> Result<usize> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(AdqError::BadKeepRatio(rho));
    }
    let exact = rho * items as f64;
    Ok(((exact * (1.0 + 1e-12)).floor() as usize).min(items))
}

/// Integer quotas: wants `w_n = r_n * N(n)` rescaled to the budget
/// `B = floor(rho * M)`, each clipped at its bin mass. Clipped surplus is
/// re-spread over the unclipped bins in proportion to their wants, and the
/// floor leftovers go one each to the largest fractional remainders (ties to
/// the lower bin index).
pub fn quota_counts(ratios: &[f64], masses: &[usize], rho: f64, items: usize) -> Result<Vec<usize>> {
    if ratios.len() != masses.len() {
        return Err(AdqError::LengthMismatch {
            left: ratios.len(),
            right: masses.len(),
        });
    }
    if ratios.is_empty() {
        return Err(AdqError::EmptyInput);
    }
    let total: usize = masses.iter().sum();
    if total != items {
        return Err(AdqError::InvalidInput(format!(
            "bin masses sum to {total}, expected {items}"
        )));
    }
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(AdqError::InvalidInput("ratios must be finite and non-negative".into()));
    }
    let b = budget(rho, items)?;
    let mut wants: Vec<f64> = ratios.iter().zip(masses).map(|(r, &n)| r * n as f64).collect();
    if wants.iter().sum::<f64>() <= 0.0 {
        wants = masses.iter().map(|&n| n as f64).collect();
    }
    Ok(apportion(&wants, masses, b))
}

/// Capacity-constrained largest-remainder apportionment of `budget` seats.
fn apportion(wants: &[f64], caps: &[usize], budget: usize) -> Vec<usize> {
    let m = wants.len();
    let mut quota = vec![0usize; m];
    let mut saturated = vec![false; m];
    loop {
        let left = budget - (0..m).filter(|&n| saturated[n]).map(|n| caps[n]).sum::<usize>();
        let weight: f64 = (0..m).filter(|&n| !saturated[n]).map(|n| wants[n]).sum();
        let shares: Vec<f64> = (0..m)
            .map(|n| {
                if saturated[n] || weight <= 0.0 {
                    0.0
                } else {
                    left as f64 * wants[n] / weight
                }
            })
            .collect();
        let newly: Vec<usize> = (0..m)
            .filter(|&n| !saturated[n] && shares[n] >= caps[n] as f64)
            .collect();
        if !newly.is_empty() {
            for n in newly {
                saturated[n] = true;
                quota[n] = caps[n];
            }
            continue;
        }
        let mut assigned = 0;
        for n in (0..m).filter(|&n| !saturated[n]) {
            quota[n] = (shares[n].floor() as usize).min(caps[n]);
            assigned += quota[n];
        }
        let mut spare = left.saturating_sub(assigned);
        let mut order: Vec<usize> = (0..m).filter(|&n| !saturated[n]).collect();
        order.sort_by(|&a, &b| {
            let fa = shares[a] - shares[a].floor();
            let fb = shares[b] - shares[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for n in order {
            if spare == 0 {
                break;
            }
            if quota[n] < caps[n] {
                quota[n] += 1;
                spare -= 1;
            }
        }
        return quota;
    }
}

/// Equal-proportion plan: the same wants for every item, so each bin's
/// quota is proportional to its mass.
pub fn uniform_quotas(masses: &[usize], rho: f64) -> Result<Vec<usize>> {
    let items = masses.iter().sum();
    let b = budget(rho, items)?;
    let wants: Vec<f64> = masses.iter().map(|&n| n as f64).collect();
    Ok(apportion(&wants, masses, b))
}

/// Per-bin scores in bin order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub rep: Vec<f64>,
    pub div: Vec<f64>,
    pub rep_hat: Vec<f64>,
    pub div_hat: Vec<f64>,
    pub importance: Vec<f64>,
}

impl ScoreTable {
    pub fn from_raw(rep: Vec<f64>, div: Vec<f64>) -> Result<Self> {
        let rep_hat = minmax_normalize(&rep)?;
        let div_hat = minmax_normalize(&div)?;
        let importance = importance(&rep_hat, &div_hat)?;
        Ok(ScoreTable {
            rep,
            div,
            rep_hat,
            div_hat,
            importance,
        })
    }

    pub fn len(&self) -> usize {
        self.rep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rep.is_empty()
    }

    /// `bin,rep,div,rep_hat,div_hat,importance`, bins numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,rep,div,rep_hat,div_hat,importance\n");
        for n in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                n + 1,
                self.rep[n],
                self.div[n],
                self.rep_hat[n],
                self.div_hat[n],
                self.importance[n]
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            bin: usize,
            rep: f64,
            div: f64,
            rep_hat: f64,
            div_hat: f64,
            importance: f64,
        }
        let mut t = ScoreTable {
            rep: vec![],
            div: vec![],
            rep_hat: vec![],
            div_hat: vec![],
            importance: vec![],
        };
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| AdqError::parse("score table", e))?;
            if row.bin != i + 1 {
                return Err(AdqError::parse("score table", format!("row {i} is bin {}", row.bin)));
            }
            t.rep.push(row.rep);
            t.div.push(row.div);
            t.rep_hat.push(row.rep_hat);
            t.div_hat.push(row.div_hat);
            t.importance.push(row.importance);
        }
        if t.is_empty() {
            return Err(AdqError::EmptyInput);
        }
        Ok(t)
    }
}

/// Quotas for every bin under one keep ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub alpha: f64,
    pub rho: f64,
    pub budget: usize,
    pub quotas: Vec<usize>,
    #[serde(skip)]
    pub ratios: Vec<f64>,
    #[serde(skip)]
    pub masses: Vec<usize>,
}

impl SamplingPlan {
    pub fn build(importances: &[f64], masses: &[usize], alpha: f64, rho: f64) -> Result<Self> {
        let items = masses.iter().sum();
        let ratios = raw_ratios(importances, masses, alpha)?;
        let quotas = quota_counts(&ratios, masses, rho, items)?;
        Ok(SamplingPlan {
            alpha,
            rho,
            budget: budget(rho, items)?,
            quotas,
            ratios,
            masses: masses.to_vec(),
        })
    }

    /// `{"alpha":..,"rho":..,"budget":..,"quotas":[..]}`
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| AdqError::parse("plan", e))
    }

    pub fn total(&self) -> usize {
        self.quotas.iter().sum()
    }
}

/// Uniform sampling without replacement inside each bin, from the draw
/// substream of `(seed, bin index)`. Output is sorted by id.
pub fn draw_samples(bins: &[Bin], quotas: &[usize], seed: u64) -> Result<Vec<u32>> {
    if bins.len() != quotas.len() {
        return Err(AdqError::LengthMismatch {
            left: bins.len(),
            right: quotas.len(),
        });
    }
    for (b, &q) in bins.iter().zip(quotas) {
        if q > b.len() {
            return Err(AdqError::QuotaExceedsBin {
                bin: b.index,
                quota: q,
                size: b.len(),
            });
        }
    }
    let per_bin: Vec<Vec<u32>> = bins
        .par_iter()
        .zip(quotas.par_iter())
        .map(|(b, &q)| {
            if q == b.len() {
                return b.members.clone();
            }
            let mut rng = substream(seed, Purpose::Draw, b.index as u64, 0);
            index::sample(&mut rng, b.len(), q)
                .into_iter()
                .map(|i| b.members[i])
                .collect()
        })
        .collect();
    let mut out: Vec<u32> = per_bin.into_iter().flatten().collect();
    out.sort_unstable();
    Ok(out)
}
