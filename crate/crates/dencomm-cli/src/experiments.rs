//! Per-kind experiment runners. Each produces in-memory artifacts (so the
//! manifest can checksum them before anything touches disk) plus the
//! outcomes of any checks the config declares.

use crate::config::{
    ComplexityParams, EntropyParams, ExperimentConfig, GemmParams, Kind, MeshParams,
    TrainToyParams, WiringParams,
};
use crate::manifest::CheckRecord;
use dencomm::arch::{count_macs, psi, resnet18, scale_architecture, ArchDescriptor};
use dencomm::entropy::random_joint;
use dencomm::gemm::{
    build_schedule, group_size_for_cache, CacheModel, CachePolicy, GemmShape, Ordering, TilePlan,
};
use dencomm::mesh::{eta_map, sparse_delivery_cost, fit_k_slope, MeshConfig};
use dencomm::neuron::{activation_memory_bits, MemoryScheme};
use dencomm::rng::{derive_seed, seed_rng};
use dencomm::toy::{train_toy, ToyConfig, TrainOutcome};
use dencomm::wiring::{fit_power_law, wiring_cost, Dim};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug)]
pub enum RunError {
    /// Bad config content discovered at run time (exit 2).
    Config(String),
    /// Grid values the models reject (exit 5).
    InvalidGrid(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::InvalidGrid(m) => write!(f, "invalid grid values: {m}"),
        }
    }
}

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<CheckRecord>,
    /// Human-readable summary printed to stdout.
    pub report: String,
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("row serializes");
    }
    w.into_inner().expect("in-memory writer")
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    bytes
}

fn check(name: &str, passed: bool, detail: String) -> CheckRecord {
    CheckRecord {
        name: name.to_string(),
        passed,
        detail,
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput, RunError> {
    match config.kind {
        Kind::Wiring => run_wiring(config.seed, config.wiring.as_ref().expect("validated")),
        Kind::Mesh => run_mesh(config.seed, config.mesh.as_ref().expect("validated")),
        Kind::Gemm => run_gemm(config.gemm.as_ref().expect("validated")),
        Kind::Complexity => run_complexity(config.complexity.as_ref().expect("validated")),
        Kind::Entropy => run_entropy(config.seed, config.entropy.as_ref().expect("validated")),
        Kind::TrainToy => run_train_toy(config.train_toy.as_ref().expect("validated")),
    }
}

// ---------------------------------------------------------------- wiring --

#[derive(Serialize)]
struct WiringRow {
    dim: usize,
    d: u64,
    k: u64,
    trial: usize,
    tree_length: f64,
    c_e: f64,
}

#[derive(Serialize)]
struct WiringFitCell {
    d: u64,
    k: u64,
    synapses: f64,
    mean_tree_length: f64,
    c_e: f64,
}

#[derive(Serialize)]
struct WiringFitSummary {
    dim: usize,
    alpha: f64,
    beta: f64,
    residual: f64,
    cells: Vec<WiringFitCell>,
}

fn run_wiring(seed: u64, params: &WiringParams) -> Result<RunOutput, RunError> {
    let mut cells = Vec::new();
    for &dim in &params.dims {
        for &d in &params.d_values {
            for &k in &params.k_values {
                cells.push((dim, d, k));
            }
        }
    }
    let estimates: Vec<_> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(dim, d, k))| {
            let dim = Dim::from_usize(dim).map_err(|e| RunError::InvalidGrid(e.to_string()))?;
            wiring_cost(d, k, dim, params.trials, derive_seed(seed, idx as u64))
                .map_err(|e| RunError::InvalidGrid(e.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for est in &estimates {
        for (trial, len) in est.per_trial_lengths.iter().enumerate() {
            rows.push(WiringRow {
                dim: est.dim.as_usize(),
                d: est.d,
                k: est.k,
                trial,
                tree_length: *len,
                c_e: est.input_multiplier() * len,
            });
        }
    }

    let mut fits = Vec::new();
    let mut checks = Vec::new();
    let mut report = String::new();
    for &dim in &params.dims {
        let of_dim: Vec<_> = estimates
            .iter()
            .filter(|e| e.dim.as_usize() == dim)
            .cloned()
            .collect();
        let fit = fit_power_law(&of_dim).map_err(|e| RunError::InvalidGrid(e.to_string()))?;
        report.push_str(&format!(
            "wiring {dim}D: alpha = {:.4}, beta = {:.4} over {} cells\n",
            fit.alpha,
            fit.beta,
            of_dim.len()
        ));
        if let Some(c) = &params.check {
            let expected = match dim {
                2 => c.beta_2d,
                _ => c.beta_3d,
            };
            if let Some(expected) = expected {
                let gap = (fit.beta - expected).abs();
                checks.push(check(
                    &format!("beta-{dim}d"),
                    gap <= c.tolerance,
                    format!(
                        "beta = {:.4}, expected {expected:.4} +- {:.3}",
                        fit.beta, c.tolerance
                    ),
                ));
            }
        }
        fits.push(WiringFitSummary {
            dim,
            alpha: fit.alpha,
            beta: fit.beta,
            residual: fit.residual,
            cells: of_dim
                .iter()
                .map(|e| WiringFitCell {
                    d: e.d,
                    k: e.k,
                    synapses: e.n_synapses(),
                    mean_tree_length: e.mean_tree_length,
                    c_e: e.c_e,
                })
                .collect(),
        });
    }

    Ok(RunOutput {
        artifacts: vec![
            Artifact {
                name: "wiring.csv".into(),
                bytes: csv_bytes(&rows),
            },
            Artifact {
                name: "wiring_fit.json".into(),
                bytes: json_bytes(&fits),
            },
        ],
        checks,
        report,
    })
}

// ------------------------------------------------------------------ mesh --

#[derive(Serialize)]
struct SparseRow {
    d: u64,
    k: u64,
    sparsity: f64,
    pattern: usize,
    cost: f64,
}

#[derive(Serialize)]
struct SparseCellSummary {
    k: u64,
    mean: f64,
    stddev: f64,
    empty_dimensions: u64,
}

#[derive(Serialize)]
struct SparseFitSummary {
    sparsity: f64,
    slope: f64,
    cells: Vec<SparseCellSummary>,
}

fn run_mesh(seed: u64, params: &MeshParams) -> Result<RunOutput, RunError> {
    let dense = eta_map(&params.d_values, &params.k_values)
        .map_err(|e| RunError::InvalidGrid(e.to_string()))?;
    let mut artifacts = vec![Artifact {
        name: "mesh.csv".into(),
        bytes: csv_bytes(&dense),
    }];
    let mut checks = Vec::new();
    let mut report = format!(
        "mesh: {} dense cells over D = {:?}, K = {:?}\n",
        dense.len(),
        params.d_values,
        params.k_values
    );

    if let Some(c) = &params.check {
        if c.eta_monotone {
            let mut ok = true;
            let mut detail = String::new();
            for &d in &params.d_values {
                let mut prev = f64::INFINITY;
                let mut ks: Vec<u64> = params.k_values.clone();
                ks.sort_unstable();
                for k in ks {
                    let cell = dense
                        .iter()
                        .find(|r| r.d == d && r.k == k)
                        .expect("cell exists");
                    if k == 1 && cell.eta != 1.0 {
                        ok = false;
                        detail = format!("eta({d}, 1) = {} != 1", cell.eta);
                    }
                    if cell.eta >= prev {
                        ok = false;
                        detail = format!("eta not strictly decreasing at D={d}, K={k}");
                    }
                    prev = cell.eta;
                }
            }
            if ok {
                detail = "eta(D,1) = 1 and eta strictly decreasing in K".into();
            }
            checks.push(check("eta-monotone", ok, detail));
        }
    }

    if let Some(sparse) = &params.sparse {
        let mut cells = Vec::new();
        for (si, &sparsity) in sparse.sparsities.iter().enumerate() {
            for (ki, &k) in sparse.k_values.iter().enumerate() {
                cells.push((si, ki, sparsity, k));
            }
        }
        let estimates: Vec<_> = cells
            .par_iter()
            .map(|&(si, ki, sparsity, k)| {
                let cfg = MeshConfig::new(sparse.d, k)
                    .map_err(|e| RunError::InvalidGrid(e.to_string()))?;
                let cell_seed = derive_seed(seed, (si * sparse.k_values.len() + ki) as u64);
                sparse_delivery_cost(&cfg, sparsity, sparse.n_patterns, cell_seed)
                    .map_err(|e| RunError::InvalidGrid(e.to_string()))
            })
            .collect::<Result<_, _>>()?;

        let mut rows = Vec::new();
        for est in &estimates {
            for (pattern, cost) in est.per_pattern.iter().enumerate() {
                rows.push(SparseRow {
                    d: est.d,
                    k: est.k,
                    sparsity: est.sparsity,
                    pattern,
                    cost: *cost,
                });
            }
        }
        let mut fit_summaries = Vec::new();
        for &sparsity in &sparse.sparsities {
            let of_level: Vec<_> = estimates
                .iter()
                .filter(|e| e.sparsity == sparsity)
                .collect();
            let slope = fit_k_slope(
                &of_level
                    .iter()
                    .map(|e| (e.k, e.mean))
                    .collect::<Vec<_>>(),
            )
            .map_err(|e| RunError::InvalidGrid(e.to_string()))?;
            report.push_str(&format!(
                "mesh sparse: sparsity {sparsity}: slope(log cost vs log sqrt K) = {slope:.4}\n"
            ));
            if let Some(c) = &params.check {
                if let Some(sc) = &c.slope {
                    if sc.sparsity == sparsity {
                        checks.push(check(
                            "sparse-slope",
                            (slope - sc.expected).abs() <= sc.tolerance,
                            format!(
                                "slope = {slope:.4}, expected {:.2} +- {:.2}",
                                sc.expected, sc.tolerance
                            ),
                        ));
                    }
                }
            }
            fit_summaries.push(SparseFitSummary {
                sparsity,
                slope,
                cells: of_level
                    .iter()
                    .map(|e| SparseCellSummary {
                        k: e.k,
                        mean: e.mean,
                        stddev: e.stddev,
                        empty_dimensions: e.empty_dimensions,
                    })
                    .collect(),
            });
        }
        artifacts.push(Artifact {
            name: "mesh_sparse.csv".into(),
            bytes: csv_bytes(&rows),
        });
        artifacts.push(Artifact {
            name: "mesh_sparse_fit.json".into(),
            bytes: json_bytes(&fit_summaries),
        });
    }

    Ok(RunOutput {
        artifacts,
        checks,
        report,
    })
}

// ------------------------------------------------------------------ gemm --

#[derive(Serialize)]
struct GemmRow {
    m: u64,
    n: u64,
    l: u64,
    k: u64,
    b_m: u64,
    b_n: u64,
    b_l: u64,
    group: u64,
    q: u64,
    policy: String,
    reads_sim: u64,
    reads_analytic: f64,
    writes_sim: u64,
    writes_analytic: f64,
}

fn run_gemm(params: &GemmParams) -> Result<RunOutput, RunError> {
    let mut rows = Vec::new();
    for &k in &params.k_values {
        let shape = GemmShape::new(params.m, params.n, params.l, k)
            .map_err(|e| RunError::InvalidGrid(e.to_string()))?;
        let base = TilePlan {
            b_m: params.b_m,
            b_n: params.b_n,
            b_l: params.b_l,
            group: 1,
            ordering: Ordering::RowMajor,
        };
        base.validate(&shape)
            .map_err(|e| RunError::InvalidGrid(e.to_string()))?;

        let uncached = build_schedule(&shape, &base)
            .map_err(|e| RunError::InvalidGrid(e.to_string()))?;
        let report = dencomm::gemm::simulate_cache(
            &uncached,
            &CacheModel {
                capacity: 0,
                policy: CachePolicy::None,
            },
        );
        rows.push(GemmRow {
            m: params.m,
            n: params.n,
            l: params.l,
            k,
            b_m: params.b_m,
            b_n: params.b_n,
            b_l: params.b_l,
            group: 1,
            q: 0,
            policy: "none".into(),
            reads_sim: report.reads_global,
            reads_analytic: report.analytic_reads,
            writes_sim: report.writes_global,
            writes_analytic: report.analytic_writes,
        });

        let mut grouped = base;
        grouped.ordering = Ordering::Grouped;
        grouped.group = group_size_for_cache(&shape, &grouped, params.q);
        let schedule = build_schedule(&shape, &grouped)
            .map_err(|e| RunError::InvalidGrid(e.to_string()))?;
        let report = dencomm::gemm::simulate_cache(
            &schedule,
            &CacheModel {
                capacity: params.q,
                policy: CachePolicy::Lru,
            },
        );
        rows.push(GemmRow {
            m: params.m,
            n: params.n,
            l: params.l,
            k,
            b_m: params.b_m,
            b_n: params.b_n,
            b_l: params.b_l,
            group: grouped.group,
            q: params.q,
            policy: "lru".into(),
            reads_sim: report.reads_global,
            reads_analytic: report.analytic_reads,
            writes_sim: report.writes_global,
            writes_analytic: report.analytic_writes,
        });
    }

    let mut checks = Vec::new();
    let mut report = String::from("gemm traffic (elements):\n");
    for row in &rows {
        report.push_str(&format!(
            "  K={:<3} {:4} G={:<3} reads {:>10} (formula {:>12.1})  writes {:>8}\n",
            row.k, row.policy, row.group, row.reads_sim, row.reads_analytic, row.writes_sim
        ));
    }

    if let Some(c) = &params.check {
        let none_exact = rows
            .iter()
            .filter(|r| r.policy == "none")
            .all(|r| r.reads_sim as f64 == r.reads_analytic);
        checks.push(check(
            "uncached-reads-exact",
            none_exact,
            "policy-none simulation equals the row-major formula".into(),
        ));

        let mut grouped_ok = true;
        let mut detail = String::new();
        for r in rows.iter().filter(|r| r.policy == "lru") {
            let shape = GemmShape::new(r.m, r.n, r.l, r.k).expect("validated");
            if (r.group * r.b_m + r.b_n) * shape.l_eff() <= r.q {
                let rel = (r.reads_sim as f64 - r.reads_analytic).abs() / r.reads_analytic;
                if rel > c.grouped_tolerance {
                    grouped_ok = false;
                    detail = format!("K={}: relative gap {rel:.3}", r.k);
                }
            }
        }
        if grouped_ok {
            detail = format!("grouped sim within {:.0}% of formula", c.grouped_tolerance * 100.0);
        }
        checks.push(check("grouped-agreement", grouped_ok, detail));

        if let Some(base_row) = rows.iter().find(|r| r.policy == "lru" && r.k == 1) {
            let mut reduction_ok = true;
            let mut detail = String::new();
            for r in rows.iter().filter(|r| r.policy == "lru" && r.k > 1) {
                let measured = r.reads_sim as f64 / base_row.reads_sim as f64;
                let expected = 1.0 / (r.k as f64).sqrt();
                let rel = (measured - expected).abs() / expected;
                if rel > c.reduction_tolerance {
                    reduction_ok = false;
                    detail = format!(
                        "K={}: read ratio {measured:.4} vs 1/sqrt(K) = {expected:.4}",
                        r.k
                    );
                }
            }
            if reduction_ok {
                detail = format!(
                    "grouped read reduction within {:.0}% of 1/sqrt(K)",
                    c.reduction_tolerance * 100.0
                );
            }
            checks.push(check("read-reduction", reduction_ok, detail));

            let write_ok = rows.iter().filter(|r| r.policy == "lru").all(|r| {
                let sk = (r.k as f64).sqrt();
                r.writes_sim as f64 * sk == base_row.writes_sim as f64
            });
            checks.push(check(
                "write-ratio-exact",
                write_ok,
                "writes shrink by exactly 1/sqrt(K)".into(),
            ));
        }
    }

    Ok(RunOutput {
        artifacts: vec![Artifact {
            name: "gemm.csv".into(),
            bytes: csv_bytes(&rows),
        }],
        checks,
        report,
    })
}

// ------------------------------------------------------------ complexity --

#[derive(Serialize)]
struct LayerRow {
    arch: String,
    k: u64,
    layer: String,
    params: u64,
    macs: f64,
}

#[derive(Serialize)]
struct MemoryRow {
    n_neurons: usize,
    dendrites: usize,
    bits_per_value: u64,
    scheme: String,
    stored_bits: u64,
}

fn load_descriptor(name: &str) -> Result<ArchDescriptor, RunError> {
    if name == "resnet18" {
        return Ok(resnet18());
    }
    let text = std::fs::read_to_string(name)
        .map_err(|e| RunError::Config(format!("cannot read descriptor {name}: {e}")))?;
    ArchDescriptor::from_json(&text).map_err(|e| RunError::Config(e.to_string()))
}

fn run_complexity(params: &ComplexityParams) -> Result<RunOutput, RunError> {
    let base = load_descriptor(&params.descriptor)?;
    let mut layer_rows = Vec::new();
    let mut table = format!(
        "{:>4}  {:>7}  {:>10}  {:>12}  {:>14}\n",
        "K", "Psi", "MMACs", "params", "ideal params"
    );
    let mut results = Vec::new();
    for &k in &params.k_values {
        let scaled = scale_architecture(&base, k, params.width_factor)
            .map_err(|e| RunError::InvalidGrid(e.to_string()))?;
        let macs = count_macs(&scaled.descriptor, None)
            .map_err(|e| RunError::InvalidGrid(e.to_string()))?;
        let ratio = psi(&scaled.descriptor, &base)
            .map_err(|e| RunError::InvalidGrid(e.to_string()))?;
        for entry in &macs.per_layer {
            layer_rows.push(LayerRow {
                arch: scaled.descriptor.name.clone(),
                k,
                layer: entry.label.clone(),
                params: entry.params,
                macs: entry.macs_x2 as f64 / 2.0,
            });
        }
        table.push_str(&format!(
            "{:>4}  {:>7.4}  {:>10.2}  {:>12}  {:>14.1}\n",
            k,
            ratio.value,
            macs.mmacs(),
            macs.total_params,
            scaled.ideal_params
        ));
        results.push((k, macs));
    }

    let mut artifacts = vec![Artifact {
        name: "complexity.csv".into(),
        bytes: csv_bytes(&layer_rows),
    }];

    let mut memory_rows = Vec::new();
    for case in &params.memory {
        for (scheme_name, scheme) in [
            (
                "full_precision",
                MemoryScheme::FullPrecision {
                    bits_per_value: case.bits_per_value,
                },
            ),
            (
                "bit_mask",
                MemoryScheme::BitMaskPlusOutputs {
                    bits_per_value: case.bits_per_value,
                },
            ),
        ] {
            let fp = activation_memory_bits(case.n_neurons, case.dendrites, scheme);
            memory_rows.push(MemoryRow {
                n_neurons: case.n_neurons,
                dendrites: case.dendrites,
                bits_per_value: case.bits_per_value,
                scheme: scheme_name.into(),
                stored_bits: fp.stored_bits,
            });
        }
    }
    if !memory_rows.is_empty() {
        artifacts.push(Artifact {
            name: "memory.csv".into(),
            bytes: csv_bytes(&memory_rows),
        });
    }

    let mut checks = Vec::new();
    if let Some(c) = &params.check {
        for pc in &c.params {
            let found = results.iter().find(|(k, _)| *k == pc.k);
            let (passed, detail) = match found {
                Some((_, report)) => {
                    let got = report.total_params;
                    if pc.tolerance == 0.0 {
                        (
                            got == pc.expected,
                            format!("K={}: {} params, expected exactly {}", pc.k, got, pc.expected),
                        )
                    } else {
                        let rel = (got as f64 - pc.expected as f64).abs() / pc.expected as f64;
                        (
                            rel <= pc.tolerance,
                            format!(
                                "K={}: {} params vs {} ({:.3}% off)",
                                pc.k,
                                got,
                                pc.expected,
                                rel * 100.0
                            ),
                        )
                    }
                }
                None => (false, format!("K={} not in the sweep", pc.k)),
            };
            checks.push(check(&format!("params-k{}", pc.k), passed, detail));
        }
        for mc in &c.mmacs {
            let found = results.iter().find(|(k, _)| *k == mc.k);
            let (passed, detail) = match found {
                Some((_, report)) => {
                    let rel = (report.mmacs() - mc.expected_mmacs).abs() / mc.expected_mmacs;
                    (
                        rel <= mc.tolerance,
                        format!(
                            "K={}: {:.2} MMACs vs {:.2} ({:.3}% off)",
                            mc.k,
                            report.mmacs(),
                            mc.expected_mmacs,
                            rel * 100.0
                        ),
                    )
                }
                None => (false, format!("K={} not in the sweep", mc.k)),
            };
            checks.push(check(&format!("mmacs-k{}", mc.k), passed, detail));
        }
        for mc in &c.memory {
            let scheme = match mc.scheme.as_str() {
                "full_precision" => MemoryScheme::FullPrecision {
                    bits_per_value: mc.bits_per_value,
                },
                "bit_mask" => MemoryScheme::BitMaskPlusOutputs {
                    bits_per_value: mc.bits_per_value,
                },
                other => {
                    return Err(RunError::Config(format!(
                        "unknown memory scheme `{other}`"
                    )))
                }
            };
            let got = activation_memory_bits(mc.n_neurons, mc.dendrites, scheme).stored_bits;
            checks.push(check(
                &format!(
                    "memory-{}x{}-{}",
                    mc.n_neurons, mc.dendrites, mc.scheme
                ),
                got == mc.expected_bits,
                format!("{got} bits, expected {}", mc.expected_bits),
            ));
        }
    }

    Ok(RunOutput {
        artifacts,
        checks,
        report: table,
    })
}

// --------------------------------------------------------------- entropy --

#[derive(Serialize)]
struct EntropySummary {
    trials: usize,
    max_k: usize,
    max_support: usize,
    worst_identity_residual: f64,
    worst_lemma1_residual: f64,
    bound_violations: usize,
    injective_equality_violations: usize,
}

fn run_entropy(seed: u64, params: &EntropyParams) -> Result<RunOutput, RunError> {
    let mut rng = seed_rng(seed);
    let mut worst_identity = 0.0f64;
    let mut worst_lemma = 0.0f64;
    let mut bound_violations = 0;
    let mut injective_violations = 0;
    for _ in 0..params.trials {
        let joint = random_joint(&mut rng, params.max_k, params.max_support);
        let identity = joint.conditional_entropy_given_sum();
        let direct = joint.conditional_entropy_given_sum_direct();
        worst_identity = worst_identity.max((identity - direct).abs());
        worst_lemma = worst_lemma.max(joint.lemma1_residual());
        if joint.entropy_of_sum() > joint.joint_entropy() + 1e-12 {
            bound_violations += 1;
        }
        if joint.sum_is_injective()
            && (joint.entropy_of_sum() - joint.joint_entropy()).abs() > 1e-12
        {
            injective_violations += 1;
        }
    }
    let summary = EntropySummary {
        trials: params.trials,
        max_k: params.max_k,
        max_support: params.max_support,
        worst_identity_residual: worst_identity,
        worst_lemma1_residual: worst_lemma,
        bound_violations,
        injective_equality_violations: injective_violations,
    };
    let mut checks = Vec::new();
    if let Some(c) = &params.check {
        let passed = worst_identity < c.max_residual
            && worst_lemma < c.max_residual
            && bound_violations == 0
            && injective_violations == 0;
        checks.push(check(
            "entropy-identity",
            passed,
            format!(
                "worst identity residual {worst_identity:.3e}, worst lemma residual {worst_lemma:.3e}, {bound_violations} bound violations"
            ),
        ));
    }
    let report = format!(
        "entropy verify: {} trials (K <= {}, <= {} values/component), worst residual {:.3e}\n",
        params.trials, params.max_k, params.max_support, worst_identity
    );
    Ok(RunOutput {
        artifacts: vec![Artifact {
            name: "entropy.json".into(),
            bytes: json_bytes(&summary),
        }],
        checks,
        report,
    })
}

// ------------------------------------------------------------- train-toy --

#[derive(Serialize)]
struct TrainRow {
    model: String,
    seed: u64,
    epoch: usize,
    loss: f64,
    accuracy: f64,
}

#[derive(Serialize)]
struct ModelSummary {
    model: String,
    param_count: usize,
    final_accuracies: Vec<f64>,
    mean_final_accuracy: f64,
    diverged_runs: usize,
}

fn run_train_toy(params: &TrainToyParams) -> Result<RunOutput, RunError> {
    let mut cells = Vec::new();
    for model in &params.models {
        for &seed in &params.seeds {
            cells.push((model.clone(), seed));
        }
    }
    let runs: Vec<_> = cells
        .par_iter()
        .map(|(model, seed)| {
            let config = ToyConfig {
                dataset: params.dataset.clone(),
                model: model.template.clone(),
                epochs: params.epochs,
                learning_rate: params.learning_rate,
                batch_size: params.batch_size,
            };
            train_toy(&config, *seed)
                .map(|metrics| (model.name.clone(), *seed, metrics))
                .map_err(|e| RunError::InvalidGrid(e.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for (model, seed, metrics) in &runs {
        for e in &metrics.per_epoch {
            rows.push(TrainRow {
                model: model.clone(),
                seed: *seed,
                epoch: e.epoch,
                loss: e.loss,
                accuracy: e.accuracy,
            });
        }
    }

    let mut summaries = Vec::new();
    let mut report = String::new();
    for model in &params.models {
        let of_model: Vec<_> = runs.iter().filter(|(m, _, _)| *m == model.name).collect();
        let final_accuracies: Vec<f64> = of_model
            .iter()
            .map(|(_, _, metrics)| metrics.final_accuracy)
            .collect();
        let diverged = of_model
            .iter()
            .filter(|(_, _, m)| matches!(m.outcome, TrainOutcome::Diverged { .. }))
            .count();
        let mean = final_accuracies.iter().sum::<f64>() / final_accuracies.len() as f64;
        let param_count = of_model
            .first()
            .map(|(_, _, m)| m.param_count)
            .unwrap_or(0);
        report.push_str(&format!(
            "train-toy {}: mean final accuracy {:.4} over {} seeds ({} params)\n",
            model.name,
            mean,
            final_accuracies.len(),
            param_count
        ));
        summaries.push(ModelSummary {
            model: model.name.clone(),
            param_count,
            final_accuracies,
            mean_final_accuracy: mean,
            diverged_runs: diverged,
        });
    }

    let mut checks = Vec::new();
    if let Some(c) = &params.check {
        let a = summaries.iter().find(|s| s.model == c.model_a);
        let b = summaries.iter().find(|s| s.model == c.model_b);
        let (passed, detail) = match (a, b) {
            (Some(a), Some(b)) => {
                let gap = (a.mean_final_accuracy - b.mean_final_accuracy).abs();
                let clean = a.diverged_runs == 0 && b.diverged_runs == 0;
                (
                    gap <= c.max_gap && clean,
                    format!(
                        "{}: {:.4} vs {}: {:.4}, gap {:.4} (allowed {:.4})",
                        a.model, a.mean_final_accuracy, b.model, b.mean_final_accuracy, gap, c.max_gap
                    ),
                )
            }
            _ => (false, "parity models not found in run".into()),
        };
        checks.push(check("accuracy-parity", passed, detail));
    }

    Ok(RunOutput {
        artifacts: vec![
            Artifact {
                name: "train_toy.csv".into(),
                bytes: csv_bytes(&rows),
            },
            Artifact {
                name: "train_toy_summary.json".into(),
                bytes: json_bytes(&summaries),
            },
        ],
        checks,
        report,
    })
}
