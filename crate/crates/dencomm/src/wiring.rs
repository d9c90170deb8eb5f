//! Wiring-length estimates for biological layers.
//!
//! A layer with `D/sqrt(K)` input neurons and `D sqrt(K)` synaptic targets
//! per input neuron is modeled by scattering `D sqrt(K)` points uniformly in
//! the unit square or cube, measuring the exact Euclidean minimum spanning
//! tree over them, and scaling by the `D/sqrt(K)` input count:
//! `C_E = (D/sqrt(K)) * mean tree length` over independent trials.
//!
//! MST length over `n` uniform points grows as `n^((d-1)/d)`, so fitting
//! `C_E = alpha * (D/sqrt(K)) * (D sqrt(K))^beta` in log-log space should
//! recover `beta ~ 0.5` in 2D and `~ 0.667` in 3D.

use crate::fit::{fit_line, FitError};
use crate::rng::stream_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WiringError {
    #[error("invalid wiring argument: {0}")]
    Argument(String),
    #[error("configuration too large: {0}")]
    Capacity(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Spatial dimensionality of the synapse cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn as_usize(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    pub fn from_usize(d: usize) -> Result<Self, WiringError> {
        match d {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            other => Err(WiringError::Argument(format!(
                "dimension {other} not in {{2, 3}}"
            ))),
        }
    }
}

/// Uniformly sampled synapse positions in the unit square or cube.
/// Unused coordinates of 2D clouds are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynapseCloud {
    pub points: Vec<[f64; 3]>,
    pub dim: Dim,
    pub seed: u64,
}

/// Sample `n` i.i.d. uniform points. Equal seeds give equal clouds.
pub fn sample_cloud(n: usize, dim: Dim, seed: u64) -> Result<SynapseCloud, WiringError> {
    sample_cloud_stream(n, dim, seed, 0)
}

/// Stream-addressed variant used by multi-trial estimators: trial `t` of
/// seed `s` draws from random stream `(s, t)`.
pub fn sample_cloud_stream(
    n: usize,
    dim: Dim,
    seed: u64,
    stream: u64,
) -> Result<SynapseCloud, WiringError> {
    if n == 0 {
        return Err(WiringError::Argument("need at least one point".into()));
    }
    let mut rng = stream_rng(seed, stream);
    let points = (0..n)
        .map(|_| {
            let mut p = [0.0; 3];
            for coord in p.iter_mut().take(dim.as_usize()) {
                *coord = rng.random::<f64>();
            }
            p
        })
        .collect();
    Ok(SynapseCloud { points, dim, seed })
}

fn euclidean(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Total edge length of an exact Euclidean MST over the cloud.
///
/// Prim's algorithm with O(n^2) distance evaluations; exact at desk scale
/// (n <= 8192 covers the full experiment grid).
pub fn emst_length(cloud: &SynapseCloud) -> f64 {
    let pts = &cloud.points;
    if pts.len() <= 1 {
        return 0.0;
    }
    let n = pts.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    in_tree[0] = true;
    for i in 1..n {
        best[i] = euclidean(&pts[0], &pts[i]);
    }
    let mut total = 0.0;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
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
                let d = euclidean(&pts[next], &pts[i]);
                if d < best[i] {
                    best[i] = d;
                }
            }
        }
    }
    total
}

/// A finished multi-trial wiring estimate for one `(D, K, dim)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WiringEstimate {
    pub d: u64,
    pub k: u64,
    pub dim: Dim,
    pub trials: usize,
    pub per_trial_lengths: Vec<f64>,
    pub mean_tree_length: f64,
    /// `(D/sqrt(K)) * mean_tree_length`.
    pub c_e: f64,
}

impl WiringEstimate {
    /// Synapse count `D sqrt(K)` of this cell.
    pub fn n_synapses(&self) -> f64 {
        self.d as f64 * (self.k as f64).sqrt()
    }

    /// Input-neuron multiplier `D/sqrt(K)`.
    pub fn input_multiplier(&self) -> f64 {
        self.d as f64 / (self.k as f64).sqrt()
    }
}

const MAX_SYNAPSES: u64 = 100_000;

/// Estimate `C_E` for one `(D, K)` cell: `trials` independent clouds of
/// `D sqrt(K)` synapses each, averaged, then scaled by `D/sqrt(K)`.
pub fn wiring_cost(
    d: u64,
    k: u64,
    dim: Dim,
    trials: usize,
    seed: u64,
) -> Result<WiringEstimate, WiringError> {
    if d == 0 || k == 0 {
        return Err(WiringError::Argument("D and K must be positive".into()));
    }
    if trials == 0 {
        return Err(WiringError::Argument("need at least one trial".into()));
    }
    let n_sq = d
        .checked_mul(d)
        .and_then(|v| v.checked_mul(k))
        .ok_or_else(|| WiringError::Capacity(format!("D^2 K overflows for D={d}, K={k}")))?;
    let n = {
        let r = (n_sq as f64).sqrt().round() as u64;
        if r * r != n_sq {
            return Err(WiringError::Argument(format!(
                "D sqrt(K) is not integral for D={d}, K={k}"
            )));
        }
        r
    };
    if n > MAX_SYNAPSES {
        return Err(WiringError::Capacity(format!(
            "{n} synapses exceeds the desk-scale cap of {MAX_SYNAPSES}"
        )));
    }
    let per_trial_lengths: Vec<f64> = (0..trials)
        .map(|t| {
            let cloud = sample_cloud_stream(n as usize, dim, seed, t as u64)?;
            Ok(emst_length(&cloud))
        })
        .collect::<Result<_, WiringError>>()?;
    let mean_tree_length = per_trial_lengths.iter().sum::<f64>() / trials as f64;
    let c_e = (d as f64 / (k as f64).sqrt()) * mean_tree_length;
    Ok(WiringEstimate {
        d,
        k,
        dim,
        trials,
        per_trial_lengths,
        mean_tree_length,
        c_e,
    })
}

/// Fitted `C_E = alpha * (D/sqrt(K)) * (D sqrt(K))^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub beta: f64,
    /// Sum of squared residuals in log-log space.
    pub residual: f64,
}

/// Least-squares fit of `log(C_E / (D/sqrt(K)))` against `log(D sqrt(K))`.
pub fn fit_power_law(estimates: &[WiringEstimate]) -> Result<PowerLawFit, WiringError> {
    let xs: Vec<f64> = estimates.iter().map(|e| e.n_synapses().ln()).collect();
    let ys: Vec<f64> = estimates
        .iter()
        .map(|e| (e.c_e / e.input_multiplier()).ln())
        .collect();
    let line = fit_line(&xs, &ys)?;
    Ok(PowerLawFit {
        alpha: line.intercept.exp(),
        beta: line.slope,
        residual: line.residual,
    })
}
