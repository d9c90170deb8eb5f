//! Experiment configuration: one TOML file per run, fully determining every
//! artifact together with the seed. Command-line flags (`--seed`,
//! `--out-dir`, `--threads`) override file values.

use dencomm::toy::{BlobsConfig, ModelTemplate};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Wiring,
    Mesh,
    Gemm,
    Complexity,
    Entropy,
    TrainToy,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Wiring => "wiring",
            Kind::Mesh => "mesh",
            Kind::Gemm => "gemm",
            Kind::Complexity => "complexity",
            Kind::Entropy => "entropy",
            Kind::TrainToy => "train-toy",
        }
    }
}

pub const KNOWN_KINDS: &[&str] = &[
    "wiring",
    "mesh",
    "gemm",
    "complexity",
    "entropy",
    "train-toy",
];

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub wiring: Option<WiringParams>,
    #[serde(default)]
    pub mesh: Option<MeshParams>,
    #[serde(default)]
    pub gemm: Option<GemmParams>,
    #[serde(default)]
    pub complexity: Option<ComplexityParams>,
    #[serde(default)]
    pub entropy: Option<EntropyParams>,
    #[serde(default, rename = "train-toy")]
    pub train_toy: Option<TrainToyParams>,
}

impl ExperimentConfig {
    /// Parse and validate a TOML config.
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let config: Self = toml::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The section matching `kind` must be present (others may coexist but
    /// are ignored by the runner).
    pub fn validate(&self) -> Result<(), String> {
        let present = match self.kind {
            Kind::Wiring => self.wiring.is_some(),
            Kind::Mesh => self.mesh.is_some(),
            Kind::Gemm => self.gemm.is_some(),
            Kind::Complexity => self.complexity.is_some(),
            Kind::Entropy => self.entropy.is_some(),
            Kind::TrainToy => self.train_toy.is_some(),
        };
        if !present {
            return Err(format!(
                "config kind is `{}` but the [{}] section is missing",
                self.kind.as_str(),
                self.kind.as_str().replace('-', "-")
            ));
        }
        if let Some(w) = &self.wiring {
            if w.d_values.is_empty() || w.k_values.is_empty() || w.dims.is_empty() {
                return Err("wiring: empty d_values, k_values or dims".into());
            }
            if w.trials == 0 {
                return Err("wiring: trials must be positive".into());
            }
            if w.dims.iter().any(|d| *d != 2 && *d != 3) {
                return Err("wiring: dims entries must be 2 or 3".into());
            }
        }
        if let Some(m) = &self.mesh {
            if m.d_values.is_empty() || m.k_values.is_empty() {
                return Err("mesh: empty d_values or k_values".into());
            }
            if let Some(s) = &m.sparse {
                if s.sparsities.is_empty() || s.k_values.is_empty() || s.n_patterns == 0 {
                    return Err("mesh.sparse: empty sweep".into());
                }
                if s.sparsities.iter().any(|v| !(0.0..1.0).contains(v)) {
                    return Err("mesh.sparse: sparsities must lie in [0, 1)".into());
                }
            }
        }
        if let Some(g) = &self.gemm {
            if g.k_values.is_empty() {
                return Err("gemm: empty k_values".into());
            }
        }
        if let Some(t) = &self.train_toy {
            if t.models.is_empty() || t.seeds.is_empty() {
                return Err("train-toy: need at least one model and one seed".into());
            }
        }
        if let Some(e) = &self.entropy {
            if e.trials == 0 || e.max_k == 0 || e.max_support == 0 {
                return Err("entropy: trials, max_k and max_support must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WiringParams {
    pub d_values: Vec<u64>,
    pub k_values: Vec<u64>,
    /// Spatial dimensions to sweep, each 2 or 3.
    pub dims: Vec<usize>,
    pub trials: usize,
    #[serde(default)]
    pub check: Option<WiringCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WiringCheck {
    #[serde(default)]
    pub beta_2d: Option<f64>,
    #[serde(default)]
    pub beta_3d: Option<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshParams {
    pub d_values: Vec<u64>,
    pub k_values: Vec<u64>,
    #[serde(default)]
    pub sparse: Option<SparseParams>,
    #[serde(default)]
    pub check: Option<MeshCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseParams {
    pub d: u64,
    pub k_values: Vec<u64>,
    pub sparsities: Vec<f64>,
    pub n_patterns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshCheck {
    /// Require eta(D, 1) = 1 and eta strictly decreasing in K per D.
    #[serde(default)]
    pub eta_monotone: bool,
    #[serde(default)]
    pub slope: Option<SlopeCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeCheck {
    /// Which sparsity level of the sweep to fit.
    pub sparsity: f64,
    pub expected: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GemmParams {
    pub m: u64,
    pub n: u64,
    pub l: u64,
    pub k_values: Vec<u64>,
    /// Cache capacity in elements.
    pub q: u64,
    pub b_m: u64,
    pub b_n: u64,
    pub b_l: u64,
    #[serde(default)]
    pub check: Option<GemmCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GemmCheck {
    /// Relative tolerance for grouped simulation vs formula.
    pub grouped_tolerance: f64,
    /// Relative tolerance for the read-reduction ratio vs 1/sqrt(K).
    pub reduction_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityParams {
    /// `"resnet18"` for the bundled descriptor, otherwise a JSON file path.
    #[serde(default = "default_descriptor")]
    pub descriptor: String,
    #[serde(default = "default_k_values")]
    pub k_values: Vec<u64>,
    #[serde(default = "default_width_factor")]
    pub width_factor: f64,
    /// Activation-memory cases to tabulate alongside the table.
    #[serde(default)]
    pub memory: Vec<MemoryCase>,
    #[serde(default)]
    pub check: Option<ComplexityCheck>,
}

fn default_descriptor() -> String {
    "resnet18".into()
}

fn default_k_values() -> Vec<u64> {
    vec![1]
}

fn default_width_factor() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryCase {
    pub n_neurons: usize,
    pub dendrites: usize,
    pub bits_per_value: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComplexityCheck {
    pub params: Vec<ParamCheck>,
    pub mmacs: Vec<MacCheck>,
    pub memory: Vec<MemoryCheck>,
}

impl Default for ComplexityCheck {
    fn default() -> Self {
        Self {
            params: Vec::new(),
            mmacs: Vec::new(),
            memory: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamCheck {
    pub k: u64,
    pub expected: u64,
    /// Relative tolerance; 0 demands exact equality.
    #[serde(default)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacCheck {
    pub k: u64,
    pub expected_mmacs: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryCheck {
    pub n_neurons: usize,
    pub dendrites: usize,
    pub bits_per_value: u64,
    /// `"full_precision"` or `"bit_mask"`.
    pub scheme: String,
    pub expected_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyParams {
    pub trials: usize,
    pub max_k: usize,
    pub max_support: usize,
    #[serde(default)]
    pub check: Option<EntropyCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyCheck {
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainToyParams {
    pub dataset: BlobsConfig,
    pub models: Vec<NamedModel>,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    #[serde(default)]
    pub check: Option<ParityCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedModel {
    pub name: String,
    pub template: ModelTemplate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParityCheck {
    pub model_a: String,
    pub model_b: String,
    /// Largest allowed gap between mean final accuracies (absolute).
    pub max_gap: f64,
}
