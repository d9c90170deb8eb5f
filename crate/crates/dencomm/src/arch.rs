//! Architecture descriptors, equal-complexity scaling, and cost counting.
//!
//! A descriptor is an ordered list of convolution, pooling, residual-block
//! and linear layers with explicit channel counts and per-layer dendrite
//! counts. Two operations act on it:
//!
//! * [`scale_architecture`] applies the equal-complexity transform: interior
//!   layers get `K` dendrites and channels scaled by `width_factor/sqrt(K)`,
//!   which leaves per-layer parameter counts invariant before rounding. The
//!   network boundary is handled by per-layer roles: the input layer and the
//!   penultimate layer carry `sqrt(K)` dendrites (the penultimate keeps its
//!   full width so the classifier is untouched), and shortcut convolutions
//!   stay point layers since no nonlinearity sits behind them.
//! * [`count_params`] / [`count_macs`] walk the descriptor and produce exact
//!   integer totals. A convolution with `dd` dendrites per output channel
//!   costs `C_out * dd * C_in * k^2` weights and that many MACs per output
//!   position; dendritic aggregation adds `dd - 1` sums per output element,
//!   counted at half a MAC each. Batch-norm layers contribute `2 C_out`
//!   parameters and no MACs; pooling and residual additions are free.
//!
//! [`psi`] is the inter-layer communication ratio: the total width of all
//! width-scalable layers relative to a baseline. Under the equal-complexity
//! transform it equals `1/sqrt(K)` exactly whenever no rounding occurs.
//!
//! The reference ResNet-18 descriptor ships as a JSON data file and is
//! exposed via [`resnet18`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ArchError {
    #[error("invalid architecture argument: {0}")]
    Argument(String),
    #[error("shape propagation failed: {0}")]
    Shape(String),
}

/// How the equal-complexity transform treats a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerRole {
    /// First parametric layer: `sqrt(K)` dendrites, width scales.
    Input,
    /// Bulk of the network: `K` dendrites, width scales.
    Interior,
    /// Last hidden layer: `sqrt(K)` dendrites, width pinned to the baseline
    /// (times any global width factor) so the classifier sees the same
    /// feature count.
    Penultimate,
    /// Output layer; never scaled, never dendritic.
    Classifier,
}

fn default_dendrites() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    #[serde(default)]
    pub label: Option<String>,
    pub in_channels: u64,
    pub out_channels: u64,
    pub kernel: u32,
    #[serde(default = "default_stride")]
    pub stride: u32,
    #[serde(default)]
    pub padding: u32,
    #[serde(default = "default_dendrites")]
    pub dendrites: u64,
    #[serde(default)]
    pub batch_norm: bool,
    #[serde(default)]
    pub bias: bool,
    #[serde(default = "default_role")]
    pub role: LayerRole,
}

fn default_stride() -> u32 {
    1
}

fn default_role() -> LayerRole {
    LayerRole::Interior
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSpec {
    #[serde(default)]
    pub label: Option<String>,
    pub in_features: u64,
    pub out_features: u64,
    #[serde(default = "default_dendrites")]
    pub dendrites: u64,
    #[serde(default)]
    pub bias: bool,
    #[serde(default = "default_role")]
    pub role: LayerRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Max,
    Avg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub kind: PoolKind,
    pub kernel: u32,
    pub stride: u32,
    #[serde(default)]
    pub padding: u32,
}

/// A residual block: main-path convolutions plus an optional projection
/// shortcut. The shortcut, having no nonlinearity, never gets dendrites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub convs: Vec<ConvSpec>,
    #[serde(default)]
    pub shortcut: Option<ConvSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum Layer {
    Conv(ConvSpec),
    Block(BlockSpec),
    Pool(PoolSpec),
    GlobalAvgPool,
    Linear(LinearSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub channels: u64,
    pub height: u32,
    pub width: u32,
}

/// A layer-by-layer network description. The JSON serialization of this
/// struct is the on-disk descriptor format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    pub name: String,
    pub input: InputSpec,
    pub layers: Vec<Layer>,
}

impl ArchDescriptor {
    pub fn from_json(json: &str) -> Result<Self, ArchError> {
        let arch: Self = serde_json::from_str(json)
            .map_err(|e| ArchError::Argument(format!("invalid descriptor JSON: {e}")))?;
        arch.validate()?;
        Ok(arch)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serializes")
    }

    /// Check channel chaining: every layer's input width must equal the
    /// running feature width, shortcuts must bridge their block exactly.
    pub fn validate(&self) -> Result<(), ArchError> {
        let mut width = self.input.channels;
        for (idx, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv(c) => {
                    check_conv_chain(idx, c, width)?;
                    width = c.out_channels;
                }
                Layer::Block(b) => {
                    if b.convs.is_empty() {
                        return Err(ArchError::Argument(format!("layer {idx}: empty block")));
                    }
                    let block_in = width;
                    let mut inner = width;
                    for c in &b.convs {
                        check_conv_chain(idx, c, inner)?;
                        inner = c.out_channels;
                    }
                    let has_penultimate = b
                        .convs
                        .iter()
                        .any(|c| c.role == LayerRole::Penultimate);
                    if let Some(sc) = &b.shortcut {
                        check_conv_chain(idx, sc, block_in)?;
                        if sc.out_channels != inner {
                            return Err(ArchError::Argument(format!(
                                "layer {idx}: shortcut produces {} channels, block produces {}",
                                sc.out_channels, inner
                            )));
                        }
                    } else if block_in != inner && !has_penultimate {
                        // The boundary rule pins the penultimate width, so
                        // that one block is width-asymmetric by construction
                        // and falls back to a parameter-free shortcut.
                        return Err(ArchError::Argument(format!(
                            "layer {idx}: identity shortcut needs equal widths, got {block_in} vs {inner}"
                        )));
                    }
                    width = inner;
                }
                Layer::Linear(l) => {
                    if l.in_features != width {
                        return Err(ArchError::Argument(format!(
                            "layer {idx}: linear expects {} features, gets {width}",
                            l.in_features
                        )));
                    }
                    if l.dendrites == 0 {
                        return Err(ArchError::Argument(format!("layer {idx}: zero dendrites")));
                    }
                    width = l.out_features;
                }
                Layer::Pool(_) | Layer::GlobalAvgPool => {}
            }
        }
        Ok(())
    }
}

fn check_conv_chain(idx: usize, c: &ConvSpec, expected_in: u64) -> Result<(), ArchError> {
    if c.in_channels != expected_in {
        return Err(ArchError::Argument(format!(
            "layer {idx} ({}): expects {} input channels, gets {expected_in}",
            c.label.as_deref().unwrap_or("conv"),
            c.in_channels
        )));
    }
    if c.out_channels == 0 || c.kernel == 0 || c.stride == 0 || c.dendrites == 0 {
        return Err(ArchError::Argument(format!(
            "layer {idx}: zero-sized convolution field"
        )));
    }
    Ok(())
}

/// The reference ResNet-18 descriptor (ships as `data/resnet18.json`).
pub fn resnet18() -> ArchDescriptor {
    ArchDescriptor::from_json(include_str!("../data/resnet18.json"))
        .expect("bundled ResNet-18 descriptor is valid")
}

/// Per-layer cost entry. MACs are tracked in half-MAC units so dendritic
/// aggregation sums stay in exact integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerComplexity {
    pub label: String,
    pub params: u64,
    pub macs_x2: u64,
}

/// Exact parameter and MAC totals with a per-layer breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub total_params: u64,
    pub total_macs_x2: u64,
    pub per_layer: Vec<LayerComplexity>,
}

impl ComplexityReport {
    pub fn total_macs(&self) -> f64 {
        self.total_macs_x2 as f64 / 2.0
    }

    pub fn mmacs(&self) -> f64 {
        self.total_macs() / 1.0e6
    }
}

fn conv_params(c: &ConvSpec) -> u64 {
    let k2 = (c.kernel as u64) * (c.kernel as u64);
    let weights = c.out_channels * c.dendrites * c.in_channels * k2;
    let bias = if c.bias { c.out_channels * c.dendrites } else { 0 };
    let bn = if c.batch_norm { 2 * c.out_channels } else { 0 };
    weights + bias + bn
}

fn linear_params(l: &LinearSpec) -> u64 {
    let weights = l.out_features * l.dendrites * l.in_features;
    let bias = if l.bias { l.out_features * l.dendrites } else { 0 };
    weights + bias
}

fn out_spatial(h: u32, w: u32, kernel: u32, stride: u32, padding: u32) -> Result<(u32, u32), ArchError> {
    let grow = |dim: u32| -> Result<u32, ArchError> {
        let padded = dim as i64 + 2 * padding as i64;
        if padded < kernel as i64 {
            return Err(ArchError::Shape(format!(
                "kernel {kernel} larger than padded extent {padded}"
            )));
        }
        Ok(((padded - kernel as i64) / stride as i64 + 1) as u32)
    };
    Ok((grow(h)?, grow(w)?))
}

/// MACs (x2) of one convolution applied at `h x w` output resolution:
/// the multiply-accumulates of every dendritic kernel plus the `dd - 1`
/// aggregation sums per output element at half a MAC each.
fn conv_macs_x2(c: &ConvSpec, out_h: u32, out_w: u32) -> u64 {
    let positions = out_h as u64 * out_w as u64;
    let k2 = (c.kernel as u64) * (c.kernel as u64);
    let mac = positions * c.out_channels * c.dendrites * c.in_channels * k2;
    let agg_sums = positions * c.out_channels * (c.dendrites - 1);
    2 * mac + agg_sums
}

fn linear_macs_x2(l: &LinearSpec) -> u64 {
    2 * l.out_features * l.dendrites * l.in_features + l.out_features * (l.dendrites - 1)
}

fn layer_label(idx: usize, explicit: Option<&str>, kind: &str) -> String {
    explicit
        .map(str::to_owned)
        .unwrap_or_else(|| format!("{kind}{idx}"))
}

/// Walk the descriptor and compute both totals at `input` resolution.
fn analyze(arch: &ArchDescriptor, input: (u32, u32)) -> Result<ComplexityReport, ArchError> {
    arch.validate()?;
    let (mut h, mut w) = input;
    let mut per_layer = Vec::new();
    for (idx, layer) in arch.layers.iter().enumerate() {
        match layer {
            Layer::Conv(c) => {
                let (oh, ow) = out_spatial(h, w, c.kernel, c.stride, c.padding)?;
                per_layer.push(LayerComplexity {
                    label: layer_label(idx, c.label.as_deref(), "conv"),
                    params: conv_params(c),
                    macs_x2: conv_macs_x2(c, oh, ow),
                });
                h = oh;
                w = ow;
            }
            Layer::Block(b) => {
                let (block_h, block_w) = (h, w);
                for c in &b.convs {
                    let (oh, ow) = out_spatial(h, w, c.kernel, c.stride, c.padding)?;
                    per_layer.push(LayerComplexity {
                        label: layer_label(idx, c.label.as_deref(), "conv"),
                        params: conv_params(c),
                        macs_x2: conv_macs_x2(c, oh, ow),
                    });
                    h = oh;
                    w = ow;
                }
                if let Some(sc) = &b.shortcut {
                    let (oh, ow) = out_spatial(block_h, block_w, sc.kernel, sc.stride, sc.padding)?;
                    if (oh, ow) != (h, w) {
                        return Err(ArchError::Shape(format!(
                            "layer {idx}: shortcut resolution {oh}x{ow} vs block {h}x{w}"
                        )));
                    }
                    per_layer.push(LayerComplexity {
                        label: layer_label(idx, sc.label.as_deref(), "shortcut"),
                        params: conv_params(sc),
                        macs_x2: conv_macs_x2(sc, oh, ow),
                    });
                }
            }
            Layer::Pool(p) => {
                let (oh, ow) = out_spatial(h, w, p.kernel, p.stride, p.padding)?;
                h = oh;
                w = ow;
            }
            Layer::GlobalAvgPool => {
                h = 1;
                w = 1;
            }
            Layer::Linear(l) => {
                if (h, w) != (1, 1) {
                    return Err(ArchError::Shape(format!(
                        "layer {idx}: linear layer fed {h}x{w} spatial features"
                    )));
                }
                per_layer.push(LayerComplexity {
                    label: layer_label(idx, l.label.as_deref(), "linear"),
                    params: linear_params(l),
                    macs_x2: linear_macs_x2(l),
                });
            }
        }
    }
    Ok(ComplexityReport {
        total_params: per_layer.iter().map(|e| e.params).sum(),
        total_macs_x2: per_layer.iter().map(|e| e.macs_x2).sum(),
        per_layer,
    })
}

/// Exact parameter count of every parametric layer.
pub fn count_params(arch: &ArchDescriptor) -> Result<ComplexityReport, ArchError> {
    analyze(arch, (arch.input.height, arch.input.width))
}

/// Exact MAC count at the given input resolution (descriptor resolution
/// when `None`).
pub fn count_macs(
    arch: &ArchDescriptor,
    input: Option<(u32, u32)>,
) -> Result<ComplexityReport, ArchError> {
    analyze(arch, input.unwrap_or((arch.input.height, arch.input.width)))
}

fn exact_sqrt(v: u64) -> Option<u64> {
    let r = (v as f64).sqrt().round() as u64;
    (r * r == v).then_some(r)
}

fn scale_channel(ideal: f64, what: &str) -> Result<u64, ArchError> {
    let rounded = ideal.round() as i64;
    if rounded < 1 {
        return Err(ArchError::Argument(format!(
            "{what}: ideal width {ideal:.3} rounds below one channel"
        )));
    }
    Ok(rounded as u64)
}

struct ScaleState {
    s: u64,
    k: u64,
    factor: f64,
    /// (ideal, rounded) running feature width.
    width: (f64, u64),
}

impl ScaleState {
    fn scale_conv(&mut self, c: &ConvSpec, block_in: Option<(f64, u64)>) -> Result<(ConvSpec, f64), ArchError> {
        let (dendrites, out_scale) = match c.role {
            LayerRole::Input => (self.s, self.factor / self.s as f64),
            LayerRole::Interior => (self.k, self.factor / self.s as f64),
            LayerRole::Penultimate => (self.s, self.factor),
            LayerRole::Classifier => (1, 1.0),
        };
        let (in_ideal, in_rounded) = block_in.unwrap_or(self.width);
        let out_ideal = c.out_channels as f64 * out_scale;
        let out_rounded = scale_channel(out_ideal, c.label.as_deref().unwrap_or("conv"))?;
        let scaled = ConvSpec {
            in_channels: in_rounded,
            out_channels: out_rounded,
            dendrites,
            ..c.clone()
        };
        let k2 = (c.kernel as u64 * c.kernel as u64) as f64;
        let mut ideal_params = out_ideal * dendrites as f64 * in_ideal * k2;
        if c.bias {
            ideal_params += out_ideal * dendrites as f64;
        }
        if c.batch_norm {
            ideal_params += 2.0 * out_ideal;
        }
        self.width = (out_ideal, out_rounded);
        Ok((scaled, ideal_params))
    }

    /// Shortcut convolutions stay point layers; both ends scale with the
    /// block, so their ideal parameters shrink by `(factor/s)^2`.
    fn scale_shortcut(
        &mut self,
        sc: &ConvSpec,
        block_in: (f64, u64),
        block_out: (f64, u64),
    ) -> Result<(ConvSpec, f64), ArchError> {
        let scaled = ConvSpec {
            in_channels: block_in.1,
            out_channels: block_out.1,
            dendrites: 1,
            ..sc.clone()
        };
        let k2 = (sc.kernel as u64 * sc.kernel as u64) as f64;
        let mut ideal_params = block_out.0 * block_in.0 * k2;
        if sc.bias {
            ideal_params += block_out.0;
        }
        if sc.batch_norm {
            ideal_params += 2.0 * block_out.0;
        }
        Ok((scaled, ideal_params))
    }

    fn scale_linear(&mut self, l: &LinearSpec) -> Result<(LinearSpec, f64), ArchError> {
        let (dendrites, out_scale) = match l.role {
            LayerRole::Input => (self.s, self.factor / self.s as f64),
            LayerRole::Interior => (self.k, self.factor / self.s as f64),
            LayerRole::Penultimate => (self.s, self.factor),
            LayerRole::Classifier => (1, 1.0),
        };
        let (in_ideal, in_rounded) = self.width;
        let out_ideal = l.out_features as f64 * out_scale;
        let out_rounded = scale_channel(out_ideal, l.label.as_deref().unwrap_or("linear"))?;
        let scaled = LinearSpec {
            in_features: in_rounded,
            out_features: out_rounded,
            dendrites,
            ..l.clone()
        };
        let mut ideal_params = out_ideal * dendrites as f64 * in_ideal;
        if l.bias {
            ideal_params += out_ideal * dendrites as f64;
        }
        self.width = (out_ideal, out_rounded);
        Ok((scaled, ideal_params))
    }
}

/// The scaled descriptor plus the unrounded parameter total, so rounding
/// deviations from the equal-complexity ideal stay attributable.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledArch {
    pub descriptor: ArchDescriptor,
    pub ideal_params: f64,
}

/// Equal-complexity transform: `K` dendrites on interior layers, channel
/// widths scaled by `width_factor/sqrt(K)` (boundary layers per their
/// [`LayerRole`]), network input and classifier output untouched.
///
/// `K` must be a perfect square (`{1, 4, 16, 64}` in the experiments);
/// widths that round to zero are an error.
pub fn scale_architecture(
    base: &ArchDescriptor,
    k: u64,
    width_factor: f64,
) -> Result<ScaledArch, ArchError> {
    base.validate()?;
    let s = exact_sqrt(k)
        .ok_or_else(|| ArchError::Argument(format!("K = {k} is not a perfect square")))?;
    if s == 0 {
        return Err(ArchError::Argument("K must be at least 1".into()));
    }
    if !(width_factor > 0.0) {
        return Err(ArchError::Argument(format!(
            "width factor {width_factor} must be positive"
        )));
    }
    let mut state = ScaleState {
        s,
        k,
        factor: width_factor,
        width: (base.input.channels as f64, base.input.channels),
    };
    let mut ideal_params = 0.0;
    let mut layers = Vec::with_capacity(base.layers.len());
    for layer in &base.layers {
        match layer {
            Layer::Conv(c) => {
                let (scaled, ideal) = state.scale_conv(c, None)?;
                ideal_params += ideal;
                layers.push(Layer::Conv(scaled));
            }
            Layer::Block(b) => {
                let block_in = state.width;
                let mut convs = Vec::with_capacity(b.convs.len());
                for c in &b.convs {
                    let (scaled, ideal) = state.scale_conv(c, None)?;
                    ideal_params += ideal;
                    convs.push(scaled);
                }
                let shortcut = match &b.shortcut {
                    Some(sc) => {
                        let (scaled, ideal) = state.scale_shortcut(sc, block_in, state.width)?;
                        ideal_params += ideal;
                        Some(scaled)
                    }
                    None => None,
                };
                layers.push(Layer::Block(BlockSpec { convs, shortcut }));
            }
            Layer::Linear(l) => {
                let (scaled, ideal) = state.scale_linear(l)?;
                ideal_params += ideal;
                layers.push(Layer::Linear(scaled));
            }
            Layer::Pool(p) => layers.push(Layer::Pool(p.clone())),
            Layer::GlobalAvgPool => layers.push(Layer::GlobalAvgPool),
        }
    }
    let descriptor = ArchDescriptor {
        name: if k == 1 && width_factor == 1.0 {
            base.name.clone()
        } else {
            format!("{}-k{}-w{}", base.name, k, width_factor)
        },
        input: base.input,
        layers,
    };
    descriptor.validate()?;
    Ok(ScaledArch {
        descriptor,
        ideal_params,
    })
}

/// Inter-layer communication ratio relative to a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiRatio {
    pub value: f64,
}

/// Sum the widths every layer actually transmits downstream: output
/// channels of width-scalable (input and interior) layers. The penultimate
/// layer is excluded because the boundary rule pins its width, shortcuts
/// merge into their block's output, and the classifier is the network
/// output.
fn transmitted_width(arch: &ArchDescriptor) -> u64 {
    let conv_width = |c: &ConvSpec| match c.role {
        LayerRole::Input | LayerRole::Interior => c.out_channels,
        _ => 0,
    };
    arch.layers
        .iter()
        .map(|layer| match layer {
            Layer::Conv(c) => conv_width(c),
            Layer::Block(b) => b.convs.iter().map(conv_width).sum(),
            Layer::Linear(l) => match l.role {
                LayerRole::Input | LayerRole::Interior => l.out_features,
                _ => 0,
            },
            Layer::Pool(_) | Layer::GlobalAvgPool => 0,
        })
        .sum()
}

/// Neuron-count ratio `Psi` of `arch` against `baseline`.
pub fn psi(arch: &ArchDescriptor, baseline: &ArchDescriptor) -> Result<PsiRatio, ArchError> {
    if arch.layers.len() != baseline.layers.len() {
        return Err(ArchError::Argument(format!(
            "layer lists not alignable: {} vs {} layers",
            arch.layers.len(),
            baseline.layers.len()
        )));
    }
    for (idx, (a, b)) in arch.layers.iter().zip(&baseline.layers).enumerate() {
        let same_kind = matches!(
            (a, b),
            (Layer::Conv(_), Layer::Conv(_))
                | (Layer::Block(_), Layer::Block(_))
                | (Layer::Pool(_), Layer::Pool(_))
                | (Layer::GlobalAvgPool, Layer::GlobalAvgPool)
                | (Layer::Linear(_), Layer::Linear(_))
        );
        if !same_kind {
            return Err(ArchError::Argument(format!(
                "layer {idx} kinds differ between the architectures"
            )));
        }
    }
    let denom = transmitted_width(baseline);
    if denom == 0 {
        return Err(ArchError::Argument(
            "baseline transmits no scalable width".into(),
        ));
    }
    Ok(PsiRatio {
        value: transmitted_width(arch) as f64 / denom as f64,
    })
}
