//! Local Moran's I over km-grid cells with inverse-distance weights and
//! conditional permutation inference.
//!
//! Conventions: population standard deviation for z-scores, weights
//! `1/d` for `0 < d <= max_dist` (row-standardized by default), a two-sided
//! test on `|I_i|`, and `alpha = 0.05`. Cells without any neighbour inside
//! `max_dist` are excluded from inference and reported as `Isolated`.
//!
//! # Permutation stream
//!
//! For cell `i` (its position in ascending cell order) the generator is
//! ChaCha8 seeded with `seed_from_u64(seed)` and switched to stream `i`.
//! A scratch array holds the indices of all other cells in ascending order
//! and persists across that cell's permutations. Each permutation draws
//! `k_i` (the neighbour count) values by partial Fisher-Yates: for
//! `r in 0..k_i`, `j = r + below(n - 1 - r)` and swap positions `r`, `j`.
//! The `r`-th drawn cell takes the place of the `r`-th neighbour.
//! `below(m)` is Lemire's multiply-shift with rejection on `next_u32`.
//! The stream depends only on `(seed, i)`, so serial and parallel runs agree.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::geo::{GeoError, KmCell, PlanarPoint};
use crate::knn::PointIndex;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LisaError {
    #[error("cell {0} listed more than once")]
    DuplicateCell(KmCell),
    #[error("{0} values for {1} cells")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 cells with neighbours, found {0}")]
    TooFewCells(usize),
    #[error("permutation count must be at least 1")]
    NoPermutations,
    #[error("significance level {0} outside (0, 1)")]
    BadAlpha(f64),
    #[error("need at least {k} jobs, registry has {have}")]
    TooFewJobs { k: usize, have: usize },
    #[error("value {0} is not finite")]
    NonFinite(f64),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Parameters of one LISA run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LisaConfig {
    pub max_dist: f64,
    pub row_standardize: bool,
    pub permutations: u32,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for LisaConfig {
    fn default() -> Self {
        LisaConfig {
            max_dist: 3000.0,
            row_standardize: true,
            permutations: 499,
            alpha: 0.05,
            seed: 0,
        }
    }
}

/// Inverse-distance neighbour lists, aligned with `cells`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialWeights {
    cells: Vec<KmCell>,
    neighbors: Vec<Vec<(u32, f64)>>,
    row_standardized: bool,
}

impl SpatialWeights {
    pub fn cells(&self) -> &[KmCell] {
        &self.cells
    }

    /// Neighbour indices (ascending) and weights of cell `i`.
    pub fn neighbors(&self, i: usize) -> &[(u32, f64)] {
        &self.neighbors[i]
    }

    pub fn is_isolated(&self, i: usize) -> bool {
        self.neighbors[i].is_empty()
    }

    pub fn row_standardized(&self) -> bool {
        self.row_standardized
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Sum of all weights.
    pub fn s0(&self) -> f64 {
        self.neighbors.iter().flatten().map(|(_, w)| w).sum()
    }
}

/// Neighbours within `max_dist` of each cell midpoint, weight `1/d`.
pub fn build_weights(cells: &[KmCell], max_dist: f64, row_standardize: bool) -> Result<SpatialWeights, LisaError> {
    let mut lookup: BTreeMap<(i64, i64), u32> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        if lookup.insert(c.index(), i as u32).is_some() {
            return Err(LisaError::DuplicateCell(*c));
        }
    }
    let reach = libm::floor(max_dist / 1000.0) as i64;
    let mut neighbors = Vec::with_capacity(cells.len());
    for c in cells {
        let (ci, cj) = c.index();
        let mut row: Vec<(u32, f64)> = Vec::new();
        for di in -reach..=reach {
            for dj in -reach..=reach {
                if di == 0 && dj == 0 {
                    continue;
                }
                let Some(&j) = lookup.get(&(ci + di, cj + dj)) else {
                    continue;
                };
                let (dx, dy) = ((di * 1000) as f64, (dj * 1000) as f64);
                let d = libm::sqrt(dx * dx + dy * dy);
                if d > 0.0 && d <= max_dist {
                    row.push((j, 1.0 / d));
                }
            }
        }
        row.sort_by_key(|&(j, _)| j);
        if row_standardize && !row.is_empty() {
            let total: f64 = row.iter().map(|(_, w)| w).sum();
            for (_, w) in &mut row {
                *w /= total;
            }
        }
        neighbors.push(row);
    }
    Ok(SpatialWeights {
        cells: cells.to_vec(),
        neighbors,
        row_standardized: row_standardize,
    })
}

/// Observed local statistics, aligned with the weights' cells.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMoran {
    pub z: Vec<f64>,
    /// Spatial lag `sum_j w_ij z_j`.
    pub lag: Vec<f64>,
    /// `z_i * lag_i`; `None` for isolated cells and for a constant field.
    pub local_i: Vec<Option<f64>>,
    /// The field had zero variance.
    pub degenerate: bool,
}

/// z-scores with population standard deviation; `None` for a constant field.
pub fn z_scores(values: &[f64]) -> Option<Vec<f64>> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = libm::sqrt(var);
    if !(sd > 0.0) {
        return None;
    }
    Some(values.iter().map(|v| (v - mean) / sd).collect())
}

fn lag_of(neigh: &[(u32, f64)], z: &[f64]) -> f64 {
    neigh.iter().map(|&(j, w)| w * z[j as usize]).sum()
}

pub fn local_morans_i(values: &[f64], weights: &SpatialWeights) -> Result<LocalMoran, LisaError> {
    if values.len() != weights.len() {
        return Err(LisaError::LengthMismatch(values.len(), weights.len()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(LisaError::NonFinite(*v));
    }
    let active = (0..weights.len()).filter(|&i| !weights.is_isolated(i)).count();
    if active < 3 {
        return Err(LisaError::TooFewCells(active));
    }
    let Some(z) = z_scores(values) else {
        return Ok(LocalMoran {
            z: vec![0.0; values.len()],
            lag: vec![0.0; values.len()],
            local_i: vec![None; values.len()],
            degenerate: true,
        });
    };
    let lag: Vec<f64> = (0..z.len()).map(|i| lag_of(weights.neighbors(i), &z)).collect();
    let local_i = (0..z.len())
        .map(|i| (!weights.is_isolated(i)).then(|| z[i] * lag[i]))
        .collect();
    Ok(LocalMoran {
        z,
        lag,
        local_i,
        degenerate: false,
    })
}

/// Uniform integer in `0..bound` (Lemire, with rejection).
pub fn below<R: RngCore>(rng: &mut R, bound: u32) -> u32 {
    let mut m = rng.next_u32() as u64 * bound as u64;
    let mut low = m as u32;
    if low < bound {
        let threshold = bound.wrapping_neg() % bound;
        while low < threshold {
            m = rng.next_u32() as u64 * bound as u64;
            low = m as u32;
        }
    }
    (m >> 32) as u32
}

/// The permutation generator of cell `i`.
pub fn cell_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Relative tolerance under which a permuted `|I|` counts as reaching the
/// observed one; keeps ranks stable against last-bit rounding.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Pseudo p-value `(R + 1) / (P + 1)` of one non-isolated cell.
pub fn pseudo_p_for_cell(i: usize, z: &[f64], weights: &SpatialWeights, permutations: u32, seed: u64) -> f64 {
    let neigh = weights.neighbors(i);
    let observed = (z[i] * lag_of(neigh, z)).abs();
    let cutoff = observed * (1.0 - TIE_TOLERANCE);
    let n = z.len();
    let k = neigh.len().min(n - 1);
    let mut scratch: Vec<u32> = (0..n as u32).filter(|&j| j as usize != i).collect();
    let mut rng = cell_rng(seed, i);
    let mut reached = 0u32;
    for _ in 0..permutations {
        let mut lag = 0.0;
        for r in 0..k {
            let j = r + below(&mut rng, (n - 1 - r) as u32) as usize;
            scratch.swap(r, j);
            lag += neigh[r].1 * z[scratch[r] as usize];
        }
        if (z[i] * lag).abs() >= cutoff {
            reached += 1;
        }
    }
    (reached + 1) as f64 / (permutations + 1) as f64
}

/// Pseudo p-values for every non-isolated cell (`None` for isolated cells
/// and constant fields).
pub fn permutation_test(
    values: &[f64],
    weights: &SpatialWeights,
    permutations: u32,
    seed: u64,
) -> Result<Vec<Option<f64>>, LisaError> {
    if permutations < 1 {
        return Err(LisaError::NoPermutations);
    }
    let lm = local_morans_i(values, weights)?;
    if lm.degenerate {
        return Ok(vec![None; values.len()]);
    }
    Ok((0..values.len())
        .map(|i| (!weights.is_isolated(i)).then(|| pseudo_p_for_cell(i, &lm.z, weights, permutations, seed)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LisaClass {
    HH,
    LL,
    HL,
    LH,
    NS,
    Isolated,
}

impl LisaClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            LisaClass::HH => "HH",
            LisaClass::LL => "LL",
            LisaClass::HL => "HL",
            LisaClass::LH => "LH",
            LisaClass::NS => "NS",
            LisaClass::Isolated => "ISOLATED",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "HH" => LisaClass::HH,
            "LL" => LisaClass::LL,
            "HL" => LisaClass::HL,
            "LH" => LisaClass::LH,
            "NS" => LisaClass::NS,
            "ISOLATED" => LisaClass::Isolated,
            _ => return None,
        })
    }
}

impl fmt::Display for LisaClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Quadrant of a significant cell, `NS` otherwise.
pub fn classify(pseudo_p: f64, z: f64, lag: f64, alpha: f64) -> LisaClass {
    if pseudo_p > alpha {
        return LisaClass::NS;
    }
    match (z > 0.0, z < 0.0, lag > 0.0, lag < 0.0) {
        (true, _, true, _) => LisaClass::HH,
        (_, true, _, true) => LisaClass::LL,
        (true, _, _, true) => LisaClass::HL,
        (_, true, true, _) => LisaClass::LH,
        _ => LisaClass::NS,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LisaCell {
    pub cell: KmCell,
    pub value: f64,
    pub z: f64,
    pub lag: f64,
    pub local_i: Option<f64>,
    pub pseudo_p: Option<f64>,
    pub class: LisaClass,
}

/// Assembles cells from observed statistics and p-values.
pub fn assemble(
    weights: &SpatialWeights,
    values: &[f64],
    lm: &LocalMoran,
    pvals: &[Option<f64>],
    alpha: f64,
) -> Vec<LisaCell> {
    (0..weights.len())
        .map(|i| {
            let class = if weights.is_isolated(i) {
                LisaClass::Isolated
            } else {
                match pvals[i] {
                    Some(p) => classify(p, lm.z[i], lm.lag[i], alpha),
                    None => LisaClass::NS,
                }
            };
            LisaCell {
                cell: weights.cells()[i],
                value: values[i],
                z: lm.z[i],
                lag: lm.lag[i],
                local_i: lm.local_i[i],
                pseudo_p: pvals[i],
                class,
            }
        })
        .collect()
}

/// Full LISA over a cell → value map, serially.
pub fn lisa(values: &BTreeMap<KmCell, f64>, cfg: &LisaConfig) -> Result<Vec<LisaCell>, LisaError> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(LisaError::BadAlpha(cfg.alpha));
    }
    let cells: Vec<KmCell> = values.keys().copied().collect();
    let vals: Vec<f64> = values.values().copied().collect();
    let weights = build_weights(&cells, cfg.max_dist, cfg.row_standardize)?;
    let lm = local_morans_i(&vals, &weights)?;
    let pvals = permutation_test(&vals, &weights, cfg.permutations, cfg.seed)?;
    Ok(assemble(&weights, &vals, &lm, &pvals, cfg.alpha))
}

/// Global Moran's I, `(n / S0) * sum_ij w_ij d_i d_j / sum_i d_i^2`.
pub fn global_morans_i(values: &[f64], weights: &SpatialWeights) -> Option<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let dev: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let ss: f64 = dev.iter().map(|d| d * d).sum();
    let s0 = weights.s0();
    if !(ss > 0.0 && s0 > 0.0) {
        return None;
    }
    let cross: f64 = (0..dev.len())
        .map(|i| dev[i] * weights.neighbors(i).iter().map(|&(j, w)| w * dev[j as usize]).sum::<f64>())
        .sum();
    Some(n / s0 * cross / ss)
}

/// Distance from each cell midpoint to its `k`-th nearest job.
pub fn dist_to_k_jobs(cells: &[KmCell], jobs: &PointIndex, k: usize) -> Result<Vec<(KmCell, f64)>, LisaError> {
    if k == 0 || jobs.len() < k {
        return Err(LisaError::TooFewJobs { k, have: jobs.len() });
    }
    Ok(cells
        .iter()
        .map(|c| {
            let hits = jobs.nearest(c.midpoint(), k);
            (*c, hits[k - 1].dist())
        })
        .collect())
}

/// Convenience wrapper building the job index on the fly.
pub fn dist_to_k_jobs_from_points(
    cells: &[KmCell],
    jobs: &[PlanarPoint],
    k: usize,
) -> Result<Vec<(KmCell, f64)>, LisaError> {
    dist_to_k_jobs(cells, &PointIndex::new(jobs.to_vec()), k)
}
