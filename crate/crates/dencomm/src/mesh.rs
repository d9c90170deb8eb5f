//! Communication costs on a unit-square mesh of processing elements.
//!
//! A layer of `D` point neurons maps onto an `N x N` grid of PEs
//! (`N = sqrt(D)`, pitch `l = 1/sqrt(D)`). Costs are Manhattan path lengths:
//!
//! * aggregation to the corner junction: `C_A = D - sqrt(D)`,
//! * delivering each of the `D` input dimensions to every PE along a
//!   rectilinear spanning tree: `C_E = (D - 1) sqrt(D)`.
//!
//! The dendritic variant packs `M = D sqrt(K)` dendrite PEs at pitch
//! `l_hat = 1/sqrt(M)` that aggregate in groups of `K` into
//! `D_hat = D/sqrt(K)` neuron outputs. Its aggregation cost splits into the
//! within-neuron gather `C_AG_hat` and the off-die share `C_AA_hat`, and the
//! ratio `eta = (C_A_hat + C_E_hat)/(C_A + C_E)` quantifies the saving.
//!
//! Closed forms are algebraic and accept any `K >= 1`; grid-realized
//! brute-force checks ([`brute_force_aggregation`], [`grid_rmst_length`])
//! run on configurations where the grids exist, and sparse-connectivity
//! estimates sample random target subsets per input dimension.

use crate::fit::{fit_line, FitError};
use crate::rng::stream_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("invalid mesh argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

fn exact_sqrt(v: u64) -> Option<u64> {
    let r = (v as f64).sqrt().round() as u64;
    (r * r == v).then_some(r)
}

/// Baseline width `D` and dendrite count `K` of one mesh configuration.
/// Derived quantities are recomputed on demand, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshConfig {
    pub d: u64,
    pub k: u64,
}

impl MeshConfig {
    /// `d` must be a positive perfect square (the point grid must exist);
    /// `k >= 1`.
    pub fn new(d: u64, k: u64) -> Result<Self, MeshError> {
        if d == 0 || exact_sqrt(d).is_none() {
            return Err(MeshError::Argument(format!(
                "D = {d} is not a positive perfect square"
            )));
        }
        if k == 0 {
            return Err(MeshError::Argument("K must be at least 1".into()));
        }
        Ok(Self { d, k })
    }

    /// Point grid side `N = sqrt(D)`.
    pub fn n(&self) -> u64 {
        exact_sqrt(self.d).expect("validated")
    }

    /// Point PE pitch `l = 1/sqrt(D)`.
    pub fn l(&self) -> f64 {
        1.0 / (self.d as f64).sqrt()
    }

    /// Dendrite count `M = D sqrt(K)` as a real.
    pub fn m(&self) -> f64 {
        self.d as f64 * (self.k as f64).sqrt()
    }

    /// Dendrite PE pitch `l_hat = 1/sqrt(M)`.
    pub fn l_hat(&self) -> f64 {
        1.0 / self.m().sqrt()
    }

    /// Neuron count `D_hat = D/sqrt(K)` as a real.
    pub fn d_hat(&self) -> f64 {
        self.d as f64 / (self.k as f64).sqrt()
    }

    /// Neuron grid side `N_hat = sqrt(D_hat)` as a real.
    pub fn n_hat(&self) -> f64 {
        self.d_hat().sqrt()
    }

    /// `M` as an exact integer, when `D sqrt(K)` is one.
    pub fn m_exact(&self) -> Option<u64> {
        exact_sqrt(self.d * self.d * self.k)
    }

    /// `D_hat` as an exact integer, when `sqrt(K)` divides `D`.
    pub fn d_hat_exact(&self) -> Option<u64> {
        let sk = exact_sqrt(self.k)?;
        (self.d % sk == 0).then(|| self.d / sk)
    }
}

/// All cost terms of one `(D, K)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub d: u64,
    pub k: u64,
    pub c_a: f64,
    pub c_e: f64,
    pub c_ag_hat: f64,
    pub c_aa_hat: f64,
    pub c_a_hat: f64,
    pub c_e_hat: f64,
    pub eta: f64,
}

/// Point-model aggregation cost `C_A = D - sqrt(D)`.
pub fn aggregation_cost_point(d: u64) -> Result<f64, MeshError> {
    let cfg = MeshConfig::new(d, 1)?;
    Ok(cfg.d as f64 - cfg.n() as f64)
}

/// Point-model delivery cost `C_E = (D - 1) sqrt(D)`: a full-grid
/// rectilinear spanning tree of length `(N^2 - 1) l`, once per input
/// dimension.
pub fn delivery_cost_point(d: u64) -> Result<f64, MeshError> {
    let cfg = MeshConfig::new(d, 1)?;
    Ok((cfg.d as f64 - 1.0) * (cfg.n() as f64))
}

/// Dendritic aggregation cost split `(C_AG_hat, C_AA_hat)`:
/// `C_AG_hat = (K-1) D_hat l_hat` and `C_AA_hat = N_hat^2 (N_hat - 1) l_hat sqrt(K)`.
pub fn dendritic_aggregation_cost(cfg: &MeshConfig) -> (f64, f64) {
    let k = cfg.k as f64;
    let c_ag = (k - 1.0) * cfg.d_hat() * cfg.l_hat();
    let n_hat = cfg.n_hat();
    let c_aa = n_hat * n_hat * (n_hat - 1.0) * cfg.l_hat() * k.sqrt();
    (c_ag, c_aa)
}

/// Dendritic delivery cost, exact form `D_hat (M - 1) l_hat`.
pub fn dendritic_delivery_cost(cfg: &MeshConfig) -> f64 {
    cfg.d_hat() * (cfg.m() - 1.0) * cfg.l_hat()
}

/// Large-mesh approximation `D^{3/2} / K^{1/4}`; differs from the exact form
/// by a relative `1/(D sqrt(K))`.
pub fn dendritic_delivery_cost_approx(cfg: &MeshConfig) -> f64 {
    (cfg.d as f64).powf(1.5) / (cfg.k as f64).powf(0.25)
}

/// Evaluate every cost term and `eta` for one configuration.
pub fn cost_report(cfg: &MeshConfig) -> Result<CostReport, MeshError> {
    let c_a = aggregation_cost_point(cfg.d)?;
    let c_e = delivery_cost_point(cfg.d)?;
    let (c_ag_hat, c_aa_hat) = dendritic_aggregation_cost(cfg);
    let c_a_hat = c_ag_hat + c_aa_hat;
    let c_e_hat = dendritic_delivery_cost(cfg);
    let eta = (c_a_hat + c_e_hat) / (c_a + c_e);
    Ok(CostReport {
        d: cfg.d,
        k: cfg.k,
        c_a,
        c_e,
        c_ag_hat,
        c_aa_hat,
        c_a_hat,
        c_e_hat,
        eta,
    })
}

/// Cost reports over a `(D, K)` grid, row-major in `d_values`.
pub fn eta_map(d_values: &[u64], k_values: &[u64]) -> Result<Vec<CostReport>, MeshError> {
    if d_values.is_empty() || k_values.is_empty() {
        return Err(MeshError::Argument("empty D or K range".into()));
    }
    let mut out = Vec::with_capacity(d_values.len() * k_values.len());
    for &d in d_values {
        for &k in k_values {
            out.push(cost_report(&MeshConfig::new(d, k)?)?);
        }
    }
    Ok(out)
}

/// Direct Manhattan summation of every PE's distance to the corner junction,
/// `sum_{x,y} (x + y) l`. Equals `D - sqrt(D)`.
pub fn brute_force_aggregation(d: u64) -> Result<f64, MeshError> {
    let cfg = MeshConfig::new(d, 1)?;
    let n = cfg.n();
    let mut steps: u64 = 0;
    for x in 0..n {
        for y in 0..n {
            steps += x + y;
        }
    }
    Ok(steps as f64 * cfg.l())
}

/// Exact rectilinear MST length over integer-coordinate points under the
/// Manhattan metric, in grid-step units (multiply by the pitch for length).
///
/// Prim's algorithm with O(n^2) distance evaluations; spanning tree only, no
/// Steiner points.
pub fn rmst_steps(points: &[(u32, u32)]) -> u64 {
    if points.len() <= 1 {
        return 0;
    }
    let n = points.len();
    let dist = |a: (u32, u32), b: (u32, u32)| -> u64 {
        (a.0.abs_diff(b.0) as u64) + (a.1.abs_diff(b.1) as u64)
    };
    let mut in_tree = vec![false; n];
    let mut best = vec![u64::MAX; n];
    in_tree[0] = true;
    for i in 1..n {
        best[i] = dist(points[0], points[i]);
    }
    let mut total = 0u64;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_d = u64::MAX;
        for i in 0..n {
            if !in_tree[i] && best[i] < next_d {
                next = i;
                next_d = best[i];
            }
        }
        total += next_d;
        in_tree[next] = true;
        for i in 0..n {
            if !in_tree[i] {
                let d = dist(points[next], points[i]);
                if d < best[i] {
                    best[i] = d;
                }
            }
        }
    }
    total
}

/// RMST length of the full `side x side` grid at pitch `pitch`:
/// computed by Prim, always `(side^2 - 1) * pitch`.
pub fn grid_rmst_length(side: u32, pitch: f64) -> f64 {
    let points: Vec<(u32, u32)> = (0..side)
        .flat_map(|r| (0..side).map(move |c| (r, c)))
        .collect();
    rmst_steps(&points) as f64 * pitch
}

/// Grid-realized point delivery cost: RMST over the `N x N` grid times `D`
/// input dimensions. Equals [`delivery_cost_point`] exactly.
pub fn grid_delivery_cost(d: u64) -> Result<f64, MeshError> {
    let cfg = MeshConfig::new(d, 1)?;
    Ok(grid_rmst_length(cfg.n() as u32, cfg.l()) * cfg.d as f64)
}

/// Near-square `rows x cols` layout of `m` dendrite PEs: `rows` is the
/// largest divisor of `m` not exceeding `sqrt(m)`. Perfect squares give a
/// square grid; power-of-two `m` stays within an aspect ratio of 2.
pub fn pe_grid_dims(m: u64) -> (u64, u64) {
    let mut rows = 1;
    let mut f = 1;
    while f * f <= m {
        if m % f == 0 {
            rows = f;
        }
        f += 1;
    }
    (rows, m / rows)
}

/// One sampled sparse-connectivity delivery estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseEstimate {
    pub d: u64,
    pub k: u64,
    pub sparsity: f64,
    /// Total delivery cost of each sampled pattern.
    pub per_pattern: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
    /// Dimensions whose sampled target set came out empty (cost 0).
    pub empty_dimensions: u64,
}

/// Delivery cost when each input dimension reaches only a random subset of
/// the `M` dendrite PEs.
///
/// Each of the `D_hat` input dimensions keeps each PE independently with
/// probability `1 - sparsity` (independent across dimensions); its cost is
/// the rectilinear MST over the kept PE centers at pitch `l_hat`. Costs are
/// summed over dimensions and averaged over `n_patterns` sampled patterns.
/// Pattern `p` draws from random stream `(seed, p)`.
pub fn sparse_delivery_cost(
    cfg: &MeshConfig,
    sparsity: f64,
    n_patterns: usize,
    seed: u64,
) -> Result<SparseEstimate, MeshError> {
    if !(0.0..1.0).contains(&sparsity) {
        return Err(MeshError::Argument(format!(
            "sparsity {sparsity} outside [0, 1)"
        )));
    }
    if n_patterns == 0 {
        return Err(MeshError::Argument("need at least one pattern".into()));
    }
    let m = cfg.m_exact().ok_or_else(|| {
        MeshError::Argument(format!(
            "D sqrt(K) is not integral for D = {}, K = {}",
            cfg.d, cfg.k
        ))
    })?;
    let d_hat = cfg.d_hat_exact().ok_or_else(|| {
        MeshError::Argument(format!(
            "D/sqrt(K) is not integral for D = {}, K = {}",
            cfg.d, cfg.k
        ))
    })?;
    if m > 1 << 22 {
        return Err(MeshError::Argument(format!(
            "M = {m} PEs exceeds the desk-scale capacity bound"
        )));
    }
    let (rows, cols) = pe_grid_dims(m);
    let all_points: Vec<(u32, u32)> = (0..rows as u32)
        .flat_map(|r| (0..cols as u32).map(move |c| (r, c)))
        .collect();
    let keep = 1.0 - sparsity;
    // full grid spanning trees always total m - 1 steps; computed once
    let full_steps = if keep == 1.0 { rmst_steps(&all_points) } else { 0 };
    let l_hat = cfg.l_hat();
    let mut empty_dimensions = 0u64;
    let mut per_pattern = Vec::with_capacity(n_patterns);
    for pattern in 0..n_patterns {
        let mut rng = stream_rng(seed, pattern as u64);
        let mut steps_total: u64 = 0;
        let mut subset: Vec<(u32, u32)> = Vec::with_capacity(m as usize);
        for _dim in 0..d_hat {
            if keep == 1.0 {
                steps_total += full_steps;
                continue;
            }
            subset.clear();
            subset.extend(
                all_points
                    .iter()
                    .copied()
                    .filter(|_| rng.random::<f64>() < keep),
            );
            if subset.is_empty() {
                empty_dimensions += 1;
                continue;
            }
            steps_total += rmst_steps(&subset);
        }
        per_pattern.push(steps_total as f64 * l_hat);
    }
    let mean = per_pattern.iter().sum::<f64>() / per_pattern.len() as f64;
    let stddev = if per_pattern.len() > 1 {
        let var = per_pattern
            .iter()
            .map(|c| (c - mean) * (c - mean))
            .sum::<f64>()
            / (per_pattern.len() - 1) as f64;
        var.sqrt()
    } else {
        0.0
    };
    Ok(SparseEstimate {
        d: cfg.d,
        k: cfg.k,
        sparsity,
        per_pattern,
        mean,
        stddev,
        empty_dimensions,
    })
}

/// Least-squares slope of `log(cost)` against `log(sqrt(K))`.
pub fn fit_k_slope(costs: &[(u64, f64)]) -> Result<f64, MeshError> {
    let xs: Vec<f64> = costs.iter().map(|&(k, _)| (k as f64).sqrt().ln()).collect();
    let ys: Vec<f64> = costs.iter().map(|&(_, c)| c.ln()).collect();
    Ok(fit_line(&xs, &ys)?.slope)
}
