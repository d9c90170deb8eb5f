//! Point and dendritic neuron math.
//!
//! A dendritic neuron with `K` dendrites computes
//!
//! ```text
//! pre_j = w_j . x + b_j        (one affine sum per dendrite)
//! h     = sum_j sigma(pre_j)   (somatic output, ascending j)
//! ```
//!
//! `K = 1` recovers the ordinary point neuron `h = sigma(w . x + b)`.
//!
//! Backpropagation through such a layer needs only `sigma'(pre_j)` per
//! dendrite, not the pre-activation values themselves. For piecewise-linear
//! activations the derivative takes one of two values, so a single stored bit
//! per dendrite replaces the full-precision tensor; [`pack_gradient_mask`] /
//! [`backward_from_mask`] implement that path bit-exactly, and
//! [`activation_memory_bits`] accounts for the savings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Elementwise nonlinearity applied at each dendrite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    ReLU,
    LeakyReLU { slope: f64 },
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::ReLU => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::LeakyReLU { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative used by backprop. The tie at `x = 0` takes the
    /// non-positive branch (subgradient 0 for ReLU), matching the stored
    /// gradient-mask convention so both backward paths agree exactly.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::ReLU => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyReLU { slope } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Identity => 1.0,
        }
    }

    /// Whether the derivative is two-valued and can be stored as one bit.
    pub fn maskable(self) -> bool {
        matches!(self, Activation::ReLU | Activation::LeakyReLU { .. })
    }

    /// Derivative value encoded by a mask bit.
    fn mask_factor(self, bit: bool) -> f64 {
        match self {
            Activation::ReLU => {
                if bit {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyReLU { slope } => {
                if bit {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NeuronError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("record does not belong to this layer: {0}")]
    Inconsistent(String),
    #[error("activation does not support bit masks: {0}")]
    Unsupported(String),
}

/// Weights and biases of one dendritic layer.
///
/// Row `j` of `weights` (row-major, `n_neurons * dendrites_per_neuron` rows of
/// `n_inputs` columns) feeds exactly one dendritic sum; dendrite `j` belongs
/// to neuron `j / dendrites_per_neuron`. The JSON serialization of this
/// struct is the on-disk layer format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendriticLayerSpec {
    pub n_neurons: usize,
    pub dendrites_per_neuron: usize,
    pub n_inputs: usize,
    /// Row-major `(n_neurons * dendrites_per_neuron) x n_inputs`.
    pub weights: Vec<f64>,
    /// One bias per dendrite.
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl DendriticLayerSpec {
    pub fn new(
        n_neurons: usize,
        dendrites_per_neuron: usize,
        n_inputs: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self, NeuronError> {
        let spec = Self {
            n_neurons,
            dendrites_per_neuron,
            n_inputs,
            weights,
            biases,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), NeuronError> {
        if self.n_neurons == 0 || self.dendrites_per_neuron == 0 || self.n_inputs == 0 {
            return Err(NeuronError::Shape(
                "n_neurons, dendrites_per_neuron and n_inputs must be positive".into(),
            ));
        }
        let rows = self.n_dendrites();
        if self.weights.len() != rows * self.n_inputs {
            return Err(NeuronError::Shape(format!(
                "weights has {} entries, expected {} ({} rows x {} inputs)",
                self.weights.len(),
                rows * self.n_inputs,
                rows,
                self.n_inputs
            )));
        }
        if self.biases.len() != rows {
            return Err(NeuronError::Shape(format!(
                "biases has {} entries, expected {}",
                self.biases.len(),
                rows
            )));
        }
        Ok(())
    }

    /// Total dendrite count `n_neurons * dendrites_per_neuron`.
    pub fn n_dendrites(&self) -> usize {
        self.n_neurons * self.dendrites_per_neuron
    }

    /// Weight row of dendrite `j`.
    pub fn weight_row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.n_inputs..(j + 1) * self.n_inputs]
    }

    /// Neuron that dendrite `j` feeds.
    pub fn neuron_of(&self, j: usize) -> usize {
        j / self.dendrites_per_neuron
    }

    /// Weights + biases.
    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layer spec serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, NeuronError> {
        let spec: Self = serde_json::from_str(json)
            .map_err(|e| NeuronError::Shape(format!("invalid layer JSON: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Everything a forward pass produced, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardRecord {
    pub input: Vec<f64>,
    /// Dendritic pre-activations, one per dendrite.
    pub pre_activations: Vec<f64>,
    /// Somatic outputs, one per neuron.
    pub outputs: Vec<f64>,
}

/// Per-dendrite activation-derivative bits, packed 8 per byte (LSB first).
///
/// Encoding: bit `j` is 1 iff `pre_j > 0` (ties at zero store 0). For ReLU a
/// set bit decodes to derivative 1 and a clear bit to 0; for LeakyReLU a
/// clear bit decodes to the slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientMask {
    bytes: Vec<u8>,
    n_bits: usize,
    activation: Activation,
}

impl GradientMask {
    pub fn bit(&self, j: usize) -> bool {
        assert!(j < self.n_bits, "mask bit {j} out of range {}", self.n_bits);
        self.bytes[j / 8] >> (j % 8) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.n_bits
    }

    pub fn is_empty(&self) -> bool {
        self.n_bits == 0
    }

    /// Bits of storage the mask itself occupies (one per dendrite).
    pub fn stored_bits(&self) -> usize {
        self.n_bits
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }
}

/// Gradients of a scalar loss with respect to one layer's parameters and input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Same row-major layout as `DendriticLayerSpec::weights`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub input: Vec<f64>,
}

/// Point-neuron layer: `out_i = sigma(sum_k W[i][k] x[k] + b[i])`.
///
/// `weights` is row-major with `biases.len()` rows of `x.len()` columns.
pub fn forward_point(
    x: &[f64],
    weights: &[f64],
    biases: &[f64],
    activation: Activation,
) -> Result<Vec<f64>, NeuronError> {
    let rows = biases.len();
    if weights.len() != rows * x.len() {
        return Err(NeuronError::Shape(format!(
            "weights has {} entries, expected {} rows x {} inputs",
            weights.len(),
            rows,
            x.len()
        )));
    }
    Ok((0..rows)
        .map(|i| {
            let row = &weights[i * x.len()..(i + 1) * x.len()];
            let pre = affine(row, x, biases[i]);
            activation.apply(pre)
        })
        .collect())
}

/// Dendritic forward pass. Somatic sums run over ascending dendrite index so
/// repeated runs are bitwise identical.
pub fn forward_dendritic(
    x: &[f64],
    layer: &DendriticLayerSpec,
) -> Result<ForwardRecord, NeuronError> {
    layer.validate()?;
    if x.len() != layer.n_inputs {
        return Err(NeuronError::Shape(format!(
            "input has {} entries, layer expects {}",
            x.len(),
            layer.n_inputs
        )));
    }
    let mut pre = Vec::with_capacity(layer.n_dendrites());
    for j in 0..layer.n_dendrites() {
        pre.push(affine(layer.weight_row(j), x, layer.biases[j]));
    }
    let k = layer.dendrites_per_neuron;
    let outputs = (0..layer.n_neurons)
        .map(|i| {
            pre[i * k..(i + 1) * k]
                .iter()
                .fold(0.0, |acc, &p| acc + layer.activation.apply(p))
        })
        .collect();
    Ok(ForwardRecord {
        input: x.to_vec(),
        pre_activations: pre,
        outputs,
    })
}

/// Backward pass from stored pre-activations.
///
/// With `g = grad_h[neuron(j)] * sigma'(pre_j)`:
/// `dW[j] = g * x`, `db[j] = g`, `dx += g * w_j`.
pub fn backward_dendritic(
    record: &ForwardRecord,
    layer: &DendriticLayerSpec,
    grad_h: &[f64],
) -> Result<Gradients, NeuronError> {
    check_backward_shapes(record, layer, grad_h)?;
    backward_with(layer, &record.input, grad_h, |j| {
        layer.activation.derivative(record.pre_activations[j])
    })
}

/// Extract the per-dendrite derivative bits from a forward record.
pub fn pack_gradient_mask(
    record: &ForwardRecord,
    layer: &DendriticLayerSpec,
) -> Result<GradientMask, NeuronError> {
    if !layer.activation.maskable() {
        return Err(NeuronError::Unsupported(format!(
            "{:?} has no two-valued derivative",
            layer.activation
        )));
    }
    if record.pre_activations.len() != layer.n_dendrites() {
        return Err(NeuronError::Inconsistent(format!(
            "record has {} pre-activations, layer has {} dendrites",
            record.pre_activations.len(),
            layer.n_dendrites()
        )));
    }
    let n_bits = layer.n_dendrites();
    let mut bytes = vec![0u8; n_bits.div_ceil(8)];
    for (j, &p) in record.pre_activations.iter().enumerate() {
        if p > 0.0 {
            bytes[j / 8] |= 1 << (j % 8);
        }
    }
    Ok(GradientMask {
        bytes,
        n_bits,
        activation: layer.activation,
    })
}

/// Backward pass from the one-bit mask alone. Bit-exact with
/// [`backward_dendritic`] for ReLU and LeakyReLU.
pub fn backward_from_mask(
    mask: &GradientMask,
    layer: &DendriticLayerSpec,
    x: &[f64],
    grad_h: &[f64],
) -> Result<Gradients, NeuronError> {
    layer.validate()?;
    if mask.len() != layer.n_dendrites() {
        return Err(NeuronError::Shape(format!(
            "mask has {} bits, layer has {} dendrites",
            mask.len(),
            layer.n_dendrites()
        )));
    }
    if mask.activation != layer.activation {
        return Err(NeuronError::Inconsistent(
            "mask was packed under a different activation".into(),
        ));
    }
    if x.len() != layer.n_inputs || grad_h.len() != layer.n_neurons {
        return Err(NeuronError::Shape(format!(
            "x has {} entries (want {}), grad_h has {} (want {})",
            x.len(),
            layer.n_inputs,
            grad_h.len(),
            layer.n_neurons
        )));
    }
    backward_with(layer, x, grad_h, |j| {
        layer.activation.mask_factor(mask.bit(j))
    })
}

fn check_backward_shapes(
    record: &ForwardRecord,
    layer: &DendriticLayerSpec,
    grad_h: &[f64],
) -> Result<(), NeuronError> {
    layer.validate()?;
    if record.input.len() != layer.n_inputs
        || record.pre_activations.len() != layer.n_dendrites()
        || record.outputs.len() != layer.n_neurons
    {
        return Err(NeuronError::Inconsistent(format!(
            "record shapes ({}, {}, {}) do not match layer ({}, {}, {})",
            record.input.len(),
            record.pre_activations.len(),
            record.outputs.len(),
            layer.n_inputs,
            layer.n_dendrites(),
            layer.n_neurons
        )));
    }
    if grad_h.len() != layer.n_neurons {
        return Err(NeuronError::Shape(format!(
            "grad_h has {} entries, layer has {} neurons",
            grad_h.len(),
            layer.n_neurons
        )));
    }
    Ok(())
}

/// Shared backward kernel. Both gradient paths run through here with the
/// same operation order, which is what makes the mask path bit-exact.
fn backward_with(
    layer: &DendriticLayerSpec,
    x: &[f64],
    grad_h: &[f64],
    factor: impl Fn(usize) -> f64,
) -> Result<Gradients, NeuronError> {
    let mut grad_w = vec![0.0; layer.weights.len()];
    let mut grad_b = vec![0.0; layer.biases.len()];
    let mut grad_x = vec![0.0; layer.n_inputs];
    for j in 0..layer.n_dendrites() {
        let g = grad_h[layer.neuron_of(j)] * factor(j);
        grad_b[j] = g;
        let row = layer.weight_row(j);
        let out = &mut grad_w[j * layer.n_inputs..(j + 1) * layer.n_inputs];
        for c in 0..layer.n_inputs {
            out[c] = g * x[c];
            grad_x[c] += g * row[c];
        }
    }
    Ok(Gradients {
        weights: grad_w,
        biases: grad_b,
        input: grad_x,
    })
}

fn affine(w: &[f64], x: &[f64], b: f64) -> f64 {
    w.iter().zip(x).fold(b, |acc, (wi, xi)| acc + wi * xi)
}

/// How a layer's activations are stored for the backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemoryScheme {
    /// Store every value a backward pass naively needs: for a dendritic layer
    /// (`K > 1`) the per-dendrite pre-activations plus the somatic outputs,
    /// for a point layer just the outputs.
    FullPrecision { bits_per_value: u64 },
    /// Store one derivative bit per dendrite plus the somatic outputs.
    /// Requires a piecewise-linear activation (ReLU, LeakyReLU).
    BitMaskPlusOutputs { bits_per_value: u64 },
}

/// Exact stored-activation size of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryFootprint {
    pub stored_bits: u64,
    pub scheme: MemoryScheme,
}

/// Bits of activation memory one layer holds for backprop.
///
/// For 4 neurons with 4 dendrites each at 16 bits this gives 320 bits full
/// precision and 80 bits with the mask; the 8-neuron point layer of the same
/// parametric complexity stores 128 bits.
pub fn activation_memory_bits(
    n_neurons: usize,
    dendrites_per_neuron: usize,
    scheme: MemoryScheme,
) -> MemoryFootprint {
    let n = n_neurons as u64;
    let k = dendrites_per_neuron as u64;
    let stored_bits = match scheme {
        MemoryScheme::FullPrecision { bits_per_value } => {
            if k > 1 {
                (n * k + n) * bits_per_value
            } else {
                n * bits_per_value
            }
        }
        MemoryScheme::BitMaskPlusOutputs { bits_per_value } => n * k + n * bits_per_value,
    };
    MemoryFootprint { stored_bits, scheme }
}
