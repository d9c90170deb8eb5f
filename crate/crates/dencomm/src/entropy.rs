//! Discrete entropy of dendritic outputs and their sum.
//!
//! A neuron transmits only the sum of its `K` dendritic outputs, so the
//! information leaving the neuron is bounded by the information present in
//! the dendrites:
//!
//! ```text
//! H(sum d_j) = H(d_1..d_K) - H(d_1..d_K | sum d_j) <= H(d_1..d_K)
//! ```
//!
//! with equality exactly when the summation map is injective on the support.
//! This module computes every term of that identity for finite joint
//! distributions and cross-checks it two ways.
//!
//! Real-valued sums that differ by less than [`MERGE_TOL`] are treated as the
//! same outcome (adjacent-gap clustering after sorting). The [`rational`]
//! submodule provides an exact-arithmetic variant for adversarial inputs
//! where the tolerance itself is under test.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probabilities must sum to one within this.
pub const NORM_TOL: f64 = 1e-12;
/// Absolute tolerance under which two sum values are one outcome.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum EntropyError {
    #[error("invalid distribution: {0}")]
    Invalid(String),
}

/// Shannon entropy in bits of a normalized probability vector.
///
/// `0 log 0` is taken as 0.
pub fn entropy(probs: &[f64]) -> Result<f64, EntropyError> {
    if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(EntropyError::Invalid(
            "probabilities must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(EntropyError::Invalid(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(entropy_unchecked(probs))
}

fn entropy_unchecked(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// A finite joint distribution over `k` dendritic outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    pub k: usize,
    /// Distinct outcome tuples, each of length `k`.
    pub support: Vec<Vec<f64>>,
    /// One probability per support tuple, summing to 1.
    pub probabilities: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(
        k: usize,
        support: Vec<Vec<f64>>,
        probabilities: Vec<f64>,
    ) -> Result<Self, EntropyError> {
        let joint = Self {
            k,
            support,
            probabilities,
        };
        joint.validate()?;
        Ok(joint)
    }

    pub fn validate(&self) -> Result<(), EntropyError> {
        if self.support.len() != self.probabilities.len() {
            return Err(EntropyError::Invalid(format!(
                "{} support tuples vs {} probabilities",
                self.support.len(),
                self.probabilities.len()
            )));
        }
        if self.support.is_empty() {
            return Err(EntropyError::Invalid("empty support".into()));
        }
        if let Some(t) = self.support.iter().find(|t| t.len() != self.k) {
            return Err(EntropyError::Invalid(format!(
                "support tuple of length {} in a joint with k = {}",
                t.len(),
                self.k
            )));
        }
        entropy(&self.probabilities)?;
        let mut seen = self.support.clone();
        seen.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(EntropyError::Invalid("duplicate support tuple".into()));
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self, EntropyError> {
        let joint: Self = serde_json::from_str(json)
            .map_err(|e| EntropyError::Invalid(format!("invalid joint JSON: {e}")))?;
        joint.validate()?;
        Ok(joint)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("joint serializes")
    }

    /// Joint entropy `H(d_1..d_K)` in bits.
    pub fn joint_entropy(&self) -> f64 {
        entropy_unchecked(&self.probabilities)
    }

    fn sums(&self) -> Vec<f64> {
        self.support.iter().map(|t| t.iter().sum()).collect()
    }

    /// Support indices grouped into merged sum outcomes. Indices are sorted
    /// by sum; a new group starts where the gap to the previous sum exceeds
    /// [`MERGE_TOL`].
    fn sum_groups(&self) -> Vec<Vec<usize>> {
        let sums = self.sums();
        let mut order: Vec<usize> = (0..sums.len()).collect();
        order.sort_by(|&a, &b| sums[a].partial_cmp(&sums[b]).expect("finite sums"));
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut prev = f64::NEG_INFINITY;
        for idx in order {
            if groups.is_empty() || sums[idx] - prev > MERGE_TOL {
                groups.push(vec![idx]);
            } else {
                groups.last_mut().expect("nonempty").push(idx);
            }
            prev = sums[idx];
        }
        groups
    }

    /// Pushforward distribution of `sum_j d_j` as `(value, probability)`
    /// pairs in ascending value order.
    pub fn sum_distribution(&self) -> Vec<(f64, f64)> {
        let sums = self.sums();
        self.sum_groups()
            .into_iter()
            .map(|g| {
                let p: f64 = g.iter().map(|&i| self.probabilities[i]).sum();
                (sums[g[0]], p)
            })
            .collect()
    }

    /// `H(sum_j d_j)` in bits.
    pub fn entropy_of_sum(&self) -> f64 {
        let probs: Vec<f64> = self.sum_distribution().into_iter().map(|(_, p)| p).collect();
        entropy_unchecked(&probs)
    }

    /// `H(d_1..d_K | sum)` via the identity `H(joint) - H(sum)`.
    pub fn conditional_entropy_given_sum(&self) -> f64 {
        self.joint_entropy() - self.entropy_of_sum()
    }

    /// `H(d_1..d_K | sum)` computed directly from the conditional
    /// distributions, as an independent cross-check of the identity.
    pub fn conditional_entropy_given_sum_direct(&self) -> f64 {
        self.sum_groups()
            .into_iter()
            .map(|g| {
                let total: f64 = g.iter().map(|&i| self.probabilities[i]).sum();
                if total <= 0.0 {
                    return 0.0;
                }
                let cond: Vec<f64> = g.iter().map(|&i| self.probabilities[i] / total).collect();
                total * entropy_unchecked(&cond)
            })
            .sum()
    }

    /// `H(sum | d_1..d_K)`: once all dendritic outputs are known the sum is
    /// determined, so this is zero; computing it through the conditional
    /// machinery guards the merge logic against regressions.
    pub fn lemma1_residual(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.probabilities)
            .map(|(tuple, &p)| {
                // conditioned on one tuple the sum is a point mass
                let point = DiscreteJoint {
                    k: self.k,
                    support: vec![tuple.clone()],
                    probabilities: vec![1.0],
                };
                p * point.entropy_of_sum()
            })
            .sum()
    }

    /// Whether `H(sum | components) < 1e-12`, which Lemma-style reasoning
    /// says must always hold.
    pub fn verify_lemma1(&self) -> bool {
        self.lemma1_residual() < 1e-12
    }

    /// True when distinct positive-probability tuples map to distinct merged
    /// sums, the condition for `H(sum) = H(joint)` to hold with equality.
    pub fn sum_is_injective(&self) -> bool {
        self.sum_groups()
            .iter()
            .all(|g| g.iter().filter(|&&i| self.probabilities[i] > 0.0).count() <= 1)
    }
}

/// Exact-arithmetic variant for adversarial tolerance tests.
pub mod rational {
    use num_rational::Rational64;
    use num_traits::{Signed, ToPrimitive, Zero};
    use std::collections::BTreeMap;

    /// A joint distribution with rational outcome values and probabilities,
    /// so sums group by exact equality instead of a merge tolerance.
    #[derive(Debug, Clone, PartialEq)]
    pub struct RationalJoint {
        pub support: Vec<Vec<Rational64>>,
        pub probabilities: Vec<Rational64>,
    }

    impl RationalJoint {
        /// Probabilities must be nonnegative and sum to exactly 1.
        pub fn new(support: Vec<Vec<Rational64>>, probabilities: Vec<Rational64>) -> Self {
            assert_eq!(support.len(), probabilities.len());
            assert!(probabilities.iter().all(|p| !p.is_negative()));
            let total: Rational64 = probabilities.iter().sum();
            assert_eq!(total, Rational64::from_integer(1));
            Self {
                support,
                probabilities,
            }
        }

        fn entropy_bits(probs: impl Iterator<Item = Rational64>) -> f64 {
            probs
                .filter(|p| !p.is_zero())
                .map(|p| {
                    let p = p.to_f64().expect("rational fits f64");
                    -p * p.log2()
                })
                .sum()
        }

        pub fn joint_entropy(&self) -> f64 {
            Self::entropy_bits(self.probabilities.iter().copied())
        }

        pub fn entropy_of_sum(&self) -> f64 {
            let mut by_sum: BTreeMap<Rational64, Rational64> = BTreeMap::new();
            for (tuple, &p) in self.support.iter().zip(&self.probabilities) {
                let s: Rational64 = tuple.iter().sum();
                *by_sum.entry(s).or_insert_with(Rational64::zero) += p;
            }
            Self::entropy_bits(by_sum.into_values())
        }
    }
}

/// Random joint with `k <= max_k` components and at most `max_vals` distinct
/// values per component, for fuzz-style suites and the CLI verifier.
pub fn random_joint(rng: &mut impl rand::Rng, max_k: usize, max_vals: usize) -> DiscreteJoint {
    use rand::seq::IndexedRandom;
    let k = rng.random_range(1..=max_k);
    let per_component: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let n = rng.random_range(1..=max_vals);
            (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
        })
        .collect();
    // Support: a random subset of the product grid, kept small.
    let grid_size: usize = per_component.iter().map(Vec::len).product();
    let n_support = rng.random_range(1..=grid_size.min(24));
    let mut support: Vec<Vec<f64>> = Vec::new();
    let mut guard = 0;
    while support.len() < n_support && guard < 10 * n_support + 100 {
        guard += 1;
        let tuple: Vec<f64> = per_component
            .iter()
            .map(|vals| *vals.choose(rng).expect("nonempty"))
            .collect();
        if !support.contains(&tuple) {
            support.push(tuple);
        }
    }
    let raw: Vec<f64> = (0..support.len())
        .map(|_| rng.random_range(0.01..1.0))
        .collect();
    let total: f64 = raw.iter().sum();
    let mut probabilities: Vec<f64> = raw.iter().map(|p| p / total).collect();
    // Pin the sum to exactly 1 so validation never trips on rounding.
    let correction: f64 = 1.0 - probabilities.iter().sum::<f64>();
    probabilities[0] += correction;
    DiscreteJoint::new(k, support, probabilities).expect("generated joint is valid")
}
