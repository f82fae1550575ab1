use serde::{Deserialize, Serialize};

use crate::sampling::{SamplingPlan, ScoreTable};
use crate::texture::RepSource;

/// Wall-clock seconds per stage, in execution order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub stages: Vec<(String, f64)>,
    pub total: f64,
}

impl StageTimings {
    pub fn get(&self, stage: &str) -> Option<f64> {
        self.stages.iter().find(|(s, _)| s == stage).map(|(_, t)| *t)
    }

    pub fn stage_sum(&self) -> f64 {
        self.stages.iter().map(|(_, t)| t).sum()
    }
}

/// Outcome of one pipeline run.
///
/// `report.json` is a pure function of inputs, config and seed; wall-clock
/// timings live only in memory and in `timings.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub seed: u64,
    pub items: usize,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub rep_source: RepSource,
    /// Bins whose diversity was imputed because they hold a single item.
    pub singleton_bins: Vec<usize>,
    pub masses: Vec<usize>,
    pub scores: ScoreTable,
    pub plan: SamplingPlan,
    pub coreset_path: String,
    pub coreset_len: usize,
    #[serde(skip)]
    pub timings: StageTimings,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Bin-index series of the normalized representativeness, diversity and
/// importance scores, as CSV `bin,rs,ds,is`.
pub fn emit_trend_report(scores: &ScoreTable) -> String {
    let mut out = String::from("bin,rs,ds,is\n");
    for n in 0..scores.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            n + 1,
            scores.rep_hat[n],
            scores.div_hat[n],
            scores.importance[n]
        ));
    }
    out
}
