//! Recursive GraphCut bin generation.
//!
//! Bin `n` is grown one item at a time. With `S` the partial bin and `R` the
//! pool of items not yet placed in any bin (the candidate included), the
//! candidate `x` scores
//!
//! ```text
//! P(x) = sum_{p in S} |f(p) - f(x)|^2 - sum_{p in R} |f(p) - f(x)|^2
//! ```
//!
//! Expanding the squares gives `A(x) = Q - 2<m, f(x)> + |set| * |f(x)|^2` for
//! each set, where `m` is the sum of its features and `Q` the sum of squared
//! norms. Those moments are updated in O(d) per move, so a greedy step costs
//! O(|R| d) instead of O(|R|^2 d). Most steps skip even that: items whose
//! cached upper bound cannot reach the best exact score are not rescored.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureTable;
use crate::error::{AdqError, Result};
use crate::numeric::{dot, dot_f64_f32, norm};

/// One bin: item ids in the order greedy selection picked them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bin {
    /// 1-based bin number.
    pub index: usize,
    pub members: Vec<u32>,
}

impl Bin {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// The full partition produced by [`generate_bins`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinSet {
    pub m: usize,
    /// Nominal bin size `ceil(M / m)`.
    pub k: usize,
    pub bins: Vec<Bin>,
}

#[derive(Serialize, Deserialize)]
struct BinSetJson {
    m: usize,
    #[serde(rename = "K")]
    k: usize,
    bins: Vec<Vec<u32>>,
}

impl BinSet {
    pub fn masses(&self) -> Vec<usize> {
        self.bins.iter().map(Bin::len).collect()
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(Bin::len).sum()
    }

    /// `{"m": .., "K": .., "bins": [[id, ..], ..]}` in selection order.
    pub fn to_json(&self) -> String {
        let j = BinSetJson {
            m: self.m,
            k: self.k,
            bins: self.bins.iter().map(|b| b.members.clone()).collect(),
        };
        serde_json::to_string(&j).expect("bins serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: BinSetJson = serde_json::from_str(text).map_err(|e| AdqError::parse("bins", e))?;
        if j.bins.len() != j.m {
            return Err(AdqError::parse(
                "bins",
                format!("m={} but {} bins listed", j.m, j.bins.len()),
            ));
        }
        Ok(BinSet {
            m: j.m,
            k: j.k,
            bins: j
                .bins
                .into_iter()
                .enumerate()
                .map(|(i, members)| Bin {
                    index: i + 1,
                    members,
                })
                .collect(),
        })
    }

    /// Checks disjointness and coverage of `0..items`.
    pub fn check_partition(&self, items: usize) -> Result<()> {
        let mut seen = vec![false; items];
        for b in &self.bins {
            for &id in &b.members {
                let slot = seen.get_mut(id as usize).ok_or(AdqError::UnknownId(id))?;
                if *slot {
                    return Err(AdqError::InvalidInput(format!(
                        "item {id} appears in more than one bin"
                    )));
                }
                *slot = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(AdqError::InvalidInput(format!(
                "item {missing} is in no bin"
            )));
        }
        Ok(())
    }
}

/// Sufficient statistics of the pool `R` and the partial bin `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolMoments {
    pub pool_count: usize,
    pub pool_sum: Vec<f64>,
    pub pool_sumsq: f64,
    pub bin_count: usize,
    pub bin_sum: Vec<f64>,
    pub bin_sumsq: f64,
}

impl PoolMoments {
    /// Direct sums over `bin` and `pool`.
    pub fn from_sets(features: &FeatureTable, bin: &[u32], pool: &[u32]) -> Result<Self> {
        let (bin_sum, bin_sumsq) = set_moments(features, bin)?;
        let (pool_sum, pool_sumsq) = set_moments(features, pool)?;
        Ok(PoolMoments {
            pool_count: pool.len(),
            pool_sum,
            pool_sumsq,
            bin_count: bin.len(),
            bin_sum,
            bin_sumsq,
        })
    }

    /// Moves one item with features `f` from the pool into the bin.
    pub fn move_to_bin(&mut self, f: &[f32]) {
        let mut sq = 0.0;
        for ((r, s), &v) in self.pool_sum.iter_mut().zip(&mut self.bin_sum).zip(f) {
            let v = v as f64;
            *r -= v;
            *s += v;
            sq += v * v;
        }
        self.pool_sumsq -= sq;
        self.bin_sumsq += sq;
        self.pool_count -= 1;
        self.bin_count += 1;
    }

    /// Closes the current bin: `S` becomes empty, `R` is untouched.
    pub fn start_new_bin(&mut self) {
        self.bin_count = 0;
        self.bin_sum.iter_mut().for_each(|v| *v = 0.0);
        self.bin_sumsq = 0.0;
    }
}

fn set_moments(features: &FeatureTable, ids: &[u32]) -> Result<(Vec<f64>, f64)> {
    let mut sum = vec![0.0; features.dim()];
    let mut sumsq = 0.0;
    for &id in ids {
        for (s, &v) in sum.iter_mut().zip(features.row(id)?) {
            let v = v as f64;
            *s += v;
            sumsq += v * v;
        }
    }
    Ok((sum, sumsq))
}

fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// GraphCut gain by direct double summation. `pool` must contain the
/// candidate; its own term is zero.
pub fn naive_gain(
    candidate: u32,
    current_bin: &[u32],
    pool: &[u32],
    features: &FeatureTable,
) -> Result<f64> {
    let fx = features.row(candidate)?;
    if !pool.contains(&candidate) {
        return Err(AdqError::InvalidInput(format!(
            "candidate {candidate} is not in the pool"
        )));
    }
    let mut to_bin = 0.0;
    for &p in current_bin {
        to_bin += sq_dist(features.row(p)?, fx);
    }
    let mut to_pool = 0.0;
    for &p in pool {
        to_pool += sq_dist(features.row(p)?, fx);
    }
    Ok(to_bin - to_pool)
}

/// GraphCut gain from moments: `A_S(x) - A_R(x)` in O(d).
pub fn fast_gain(candidate: u32, moments: &PoolMoments, features: &FeatureTable) -> Result<f64> {
    let fx = features.row(candidate)?;
    let norm2: f64 = fx.iter().map(|&v| (v as f64) * (v as f64)).sum();
    let a_bin = if moments.bin_count == 0 {
        0.0
    } else {
        moments.bin_sumsq - 2.0 * dot_f64_f32(&moments.bin_sum, fx)
            + moments.bin_count as f64 * norm2
    };
    let a_pool = moments.pool_sumsq - 2.0 * dot_f64_f32(&moments.pool_sum, fx)
        + moments.pool_count as f64 * norm2;
    Ok(a_bin - a_pool)
}

/// Nominal bin size for `items` items in `m` bins, or an error when the
/// request cannot give every bin at least one item.
pub fn bin_size(items: usize, m: usize) -> Result<usize> {
    if m == 0 || m > items {
        return Err(AdqError::InvalidBinCount { m, items });
    }
    let k = items.div_ceil(m);
    // the remainder bin must be non-empty
    if (m - 1) * k >= items {
        return Err(AdqError::InvalidBinCount { m, items });
    }
    Ok(k)
}

/// Below this pool size the argmax scan stays on the calling thread.
const PAR_THRESHOLD: usize = 4096;
const CHUNK: usize = PAR_THRESHOLD / 2;
// A pruned step that has to touch more than 1/REFRESH of the pool schedules a
// full scan, which also refreshes the cached dot products.
const REFRESH: usize = 256;

/// Partitions all items into `m` bins of size `ceil(M/m)` (the last bin
/// takes the remainder) by greedy GraphCut maximization with the pool
/// shrinking across bins. Ties go to the smallest id. Parallel scans use the
/// current rayon pool and pick the same winner as a sequential scan.
pub fn generate_bins(features: &FeatureTable, m: usize) -> Result<BinSet> {
    generate(features, m, true)
}

fn generate(features: &FeatureTable, m: usize, prune: bool) -> Result<BinSet> {
    let items = features.len();
    let k = bin_size(items, m)?;
    let dim = features.dim();
    let mut pool = Pool::new(features);

    let all: Vec<u32> = features.ids().collect();
    let mut moments = PoolMoments::from_sets(features, &[], &all)?;
    let mut direction = vec![0.0f64; dim];
    let mut reference = vec![0.0f64; dim];
    let mut bins = Vec::with_capacity(m);

    for n in 0..m {
        let size = if n + 1 == m { items - (m - 1) * k } else { k };
        let mut members = Vec::with_capacity(size);
        // The direction jumps when S is emptied.
        let mut stale = true;
        for _ in 0..size {
            // Drop the candidate-independent Q_S - Q_R:
            // score(x) = <2(m_R - m_S), f(x)> + (|S| - |R|) |f(x)|^2
            for ((d, r), s) in direction
                .iter_mut()
                .zip(&moments.pool_sum)
                .zip(&moments.bin_sum)
            {
                *d = 2.0 * (r - s);
            }
            let coef = moments.bin_count as f64 - moments.pool_count as f64;
            let pos = if stale || !prune {
                reference.copy_from_slice(&direction);
                stale = false;
                pool.full_scan(&direction, coef)
            } else {
                let (pos, touched) = pool.pruned_scan(&direction, &reference, coef);
                stale = touched * REFRESH > pool.len();
                pos
            };

            members.push(pool.ids[pos]);
            moments.move_to_bin(pool.row(pos));
            pool.remove(pos);
        }
        bins.push(Bin {
            index: n + 1,
            members,
        });
        moments.start_new_bin();
        // Refresh pool sums to shed accumulated rounding.
        let (sum, sumsq) = set_moments(features, &pool.ids)?;
        moments.pool_sum = sum;
        moments.pool_sumsq = sumsq;
    }
    Ok(BinSet { m, k, bins })
}

/// Compacted copy of the pool; removal swaps the last item into the hole.
struct Pool {
    dim: usize,
    rows: Vec<f32>,
    ids: Vec<u32>,
    /// `|f(x)|^2`
    norms: Vec<f64>,
    /// `|f(x) - mu|` for the dataset centroid `mu`
    spread: Vec<f64>,
    /// `|f(x)|`
    roots: Vec<f64>,
    /// `<reference, f(x)>` from the last full scan
    cached: Vec<f64>,
    mu: Vec<f64>,
    bounds: Vec<f64>,
}

impl Pool {
    fn new(features: &FeatureTable) -> Self {
        let dim = features.dim();
        let rows = features.values().to_vec();
        let mu = features.centroid();
        let norms: Vec<f64> = rows
            .chunks_exact(dim)
            .map(|r| r.iter().map(|&v| (v as f64) * (v as f64)).sum())
            .collect();
        let spread = rows
            .chunks_exact(dim)
            .map(|r| {
                r.iter()
                    .zip(&mu)
                    .map(|(&v, c)| (v as f64 - c) * (v as f64 - c))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        Pool {
            dim,
            cached: vec![0.0; features.len()],
            ids: features.ids().collect(),
            rows,
            roots: norms.iter().map(|a| a.sqrt()).collect(),
            norms,
            spread,
            mu,
            bounds: Vec::with_capacity(features.len()),
        }
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    fn row(&self, pos: usize) -> &[f32] {
        &self.rows[pos * self.dim..(pos + 1) * self.dim]
    }

    fn remove(&mut self, pos: usize) {
        let last = self.ids.len() - 1;
        if pos != last {
            self.rows
                .copy_within(last * self.dim..(last + 1) * self.dim, pos * self.dim);
        }
        self.rows.truncate(last * self.dim);
        self.ids.swap_remove(pos);
        self.norms.swap_remove(pos);
        self.spread.swap_remove(pos);
        self.roots.swap_remove(pos);
        self.cached.swap_remove(pos);
    }

    #[inline]
    fn exact(&self, direction: &[f64], coef: f64, pos: usize) -> f64 {
        dot_f64_f32(direction, self.row(pos)) + coef * self.norms[pos]
    }

    /// Scores every item and caches `<direction, f(x)>`.
    fn full_scan(&mut self, direction: &[f64], coef: f64) -> usize {
        let (rows, ids, norms, dim) = (&self.rows, &self.ids, &self.norms, self.dim);
        let scan = |start: usize, out: &mut [f64]| {
            scan_dispatch(rows, ids, norms, direction, coef, dim, start, out)
        };
        let best = if self.len() < PAR_THRESHOLD || rayon::current_num_threads() == 1 {
            scan(0, &mut self.cached)
        } else {
            self.cached
                .par_chunks_mut(CHUNK)
                .enumerate()
                .map(|(c, out)| scan(c * CHUNK, out))
                .reduce(|| Best::NONE, Best::better)
        };
        best.pos
    }

    /// Exact argmax using upper bounds from the cached products:
    /// `<d, f> = <r, f> + <d - r, f - mu> + <d - r, mu>`, and Cauchy-Schwarz
    /// on the middle term. Only items whose bound reaches the best exact
    /// score so far are scored, with the same arithmetic as a full scan.
    /// Returns the winner and how many items were scored.
    fn pruned_scan(&mut self, direction: &[f64], reference: &[f64], coef: f64) -> (usize, usize) {
        let delta: Vec<f64> = direction.iter().zip(reference).map(|(d, r)| d - r).collect();
        let step = norm(&delta);
        let shift = dot(&delta, &self.mu);
        let scale = norm(direction) + norm(reference);
        // value + slack, the slack a generous cover for rounding in every term
        let base = shift + 1e-9 * (shift.abs() + 1.0);
        let (w_root, w_spread) = (1e-9 * scale, step * (1.0 + 1e-9));
        let (w_norm, w_cached) = (coef + 1e-9 * coef.abs(), 1e-9);
        let mut bounds = std::mem::take(&mut self.bounds);
        bounds.clear();
        bounds.extend(
            self.cached
                .iter()
                .zip(&self.norms)
                .zip(&self.roots)
                .zip(&self.spread)
                .map(|(((&c, &a), &r), &sp)| {
                    c + w_cached * c.abs() + base + w_spread * sp + w_norm * a + w_root * r
                }),
        );
        let mut top = 0;
        let mut top_bound = f64::NEG_INFINITY;
        for (pos, &b) in bounds.iter().enumerate() {
            if b > top_bound {
                top_bound = b;
                top = pos;
            }
        }
        let mut best = Best {
            score: self.exact(direction, coef, top),
            id: self.ids[top],
            pos: top,
        };
        let mut touched = 1;
        for (pos, &b) in bounds.iter().enumerate() {
            if b >= best.score && pos != top {
                touched += 1;
                best = best.better(Best {
                    score: self.exact(direction, coef, pos),
                    id: self.ids[pos],
                    pos,
                });
            }
        }
        self.bounds = bounds;
        (best.pos, touched)
    }
}

#[derive(Clone, Copy)]
struct Best {
    score: f64,
    id: u32,
    pos: usize,
}

impl Best {
    const NONE: Best = Best {
        score: f64::NEG_INFINITY,
        id: u32::MAX,
        pos: usize::MAX,
    };

    #[inline]
    fn better(self, other: Best) -> Best {
        if other.score > self.score || (other.score == self.score && other.id < self.id) {
            other
        } else {
            self
        }
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn scan(
    rows: &[f32],
    ids: &[u32],
    norms: &[f64],
    direction: &[f64],
    coef: f64,
    dim: usize,
    start: usize,
    out: &mut [f64],
) -> Best {
    let mut best = Best::NONE;
    let end = start + out.len();
    let rows = rows[start * dim..end * dim].chunks_exact(dim);
    for (pos, ((row, norm), slot)) in (start..end).zip(rows.zip(&norms[start..end]).zip(out)) {
        let d = dot_f64_f32(direction, row);
        *slot = d;
        best = best.better(Best {
            score: d + coef * norm,
            id: ids[pos],
            pos,
        });
    }
    best
}

// Same operations in the same order, only wider registers.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
#[allow(clippy::too_many_arguments)]
unsafe fn scan_avx2(
    rows: &[f32],
    ids: &[u32],
    norms: &[f64],
    direction: &[f64],
    coef: f64,
    dim: usize,
    start: usize,
    out: &mut [f64],
) -> Best {
    scan(rows, ids, norms, direction, coef, dim, start, out)
}

#[allow(clippy::too_many_arguments)]
fn scan_dispatch(
    rows: &[f32],
    ids: &[u32],
    norms: &[f64],
    direction: &[f64],
    coef: f64,
    dim: usize,
    start: usize,
    out: &mut [f64],
) -> Best {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        return unsafe { scan_avx2(rows, ids, norms, direction, coef, dim, start, out) };
    }
    scan(rows, ids, norms, direction, coef, dim, start, out)
}
