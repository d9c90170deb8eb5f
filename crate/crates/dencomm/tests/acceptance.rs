//! Acceptance suite: one test per headline claim, each printing a PASS/FAIL
//! line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Every tolerance is pinned here, in code.

use dencomm::arch::{count_macs, resnet18, scale_architecture};
use dencomm::entropy::{random_joint, DiscreteJoint};
use dencomm::gemm::{
    analytic_costs, build_schedule, dendritic_reduction_sweep, group_size_for_cache, CacheModel,
    CachePolicy, GemmShape, Ordering, TilePlan,
};
use dencomm::mesh::{
    aggregation_cost_point, brute_force_aggregation, cost_report, delivery_cost_point,
    dendritic_aggregation_cost, fit_k_slope, grid_delivery_cost, sparse_delivery_cost, MeshConfig,
};
use dencomm::neuron::{
    activation_memory_bits, backward_dendritic, backward_from_mask, forward_dendritic,
    pack_gradient_mask, Activation, DendriticLayerSpec, MemoryScheme,
};
use dencomm::rng::{seed_rng, stream_rng};
use dencomm::toy::{train_toy, BlobsConfig, ModelTemplate, ToyConfig, TrainOutcome};
use dencomm::wiring::{fit_power_law, wiring_cost, Dim};
use rand::Rng;

fn conclude(number: u32, what: &str, passed: bool, detail: &str) {
    println!(
        "[{}] criterion {number}: {what} — {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {number} failed: {detail}");
}

#[test]
fn c01_mesh_closed_forms_match_brute_force() {
    let mut passed = true;
    let mut detail = String::new();
    for d in [4u64, 16, 64, 256, 1024] {
        let agg_formula = aggregation_cost_point(d).unwrap();
        let agg_brute = brute_force_aggregation(d).unwrap();
        let del_formula = delivery_cost_point(d).unwrap();
        let del_grid = grid_delivery_cost(d).unwrap();
        let n = (d as f64).sqrt();
        if agg_brute != agg_formula || agg_formula != d as f64 - n {
            passed = false;
            detail = format!("aggregation mismatch at D={d}");
        }
        if del_grid != del_formula || del_formula != (d as f64 - 1.0) * n {
            passed = false;
            detail = format!("delivery mismatch at D={d}");
        }
    }
    if passed {
        detail = "brute-force Manhattan sums and grid spanning trees equal the closed forms exactly for D in {4,16,64,256,1024}".into();
    }
    conclude(1, "mesh closed forms vs brute force", passed, &detail);
}

#[test]
fn c02_dendritic_cost_bounds_strict() {
    let mut passed = true;
    let mut detail = String::new();
    for d in [4u64, 16, 64, 256, 1024] {
        for k in [4u64, 16, 64] {
            let cfg = MeshConfig::new(d, k).unwrap();
            let (ag, aa) = dendritic_aggregation_cost(&cfg);
            let (df, kf) = (d as f64, k as f64);
            if !(ag < df.sqrt() * kf.powf(0.25)) || !(aa < df / kf.sqrt()) {
                passed = false;
                detail = format!("bound violated at D={d}, K={k}: AG={ag}, AA={aa}");
            }
        }
    }
    if passed {
        detail =
            "C_AG < sqrt(D) K^1/4 and C_AA < D/sqrt(K) strictly on every K > 1 grid cell".into();
    }
    conclude(2, "dendritic aggregation bounds", passed, &detail);
}

#[test]
fn c03_emst_scaling_exponents() {
    let mut results = Vec::new();
    for (dim, expected) in [(Dim::Two, 0.5), (Dim::Three, 2.0 / 3.0)] {
        let estimates: Vec<_> = [1u64, 4, 16, 64]
            .iter()
            .map(|&k| wiring_cost(1024, k, dim, 10, 42).unwrap())
            .collect();
        let fit = fit_power_law(&estimates).unwrap();
        results.push((dim, fit.beta, expected));
    }
    let passed = results
        .iter()
        .all(|(_, beta, expected)| (beta - expected).abs() <= 0.05);
    let detail = results
        .iter()
        .map(|(dim, beta, expected)| {
            format!("{}D beta = {beta:.4} (expect {expected:.3} +- 0.05)", dim.as_usize())
        })
        .collect::<Vec<_>>()
        .join(", ");
    conclude(3, "EMST scaling exponents at D=1024", passed, &detail);
}

#[test]
fn c04_sparse_mesh_slope() {
    let costs: Vec<(u64, f64)> = [1u64, 4, 16, 64]
        .iter()
        .enumerate()
        .map(|(idx, &k)| {
            let cfg = MeshConfig::new(256, k).unwrap();
            let est = sparse_delivery_cost(&cfg, 0.85, 100, 42 + idx as u64).unwrap();
            (k, est.mean)
        })
        .collect();
    let slope = fit_k_slope(&costs).unwrap();
    let passed = (slope + 0.5).abs() <= 0.1;
    conclude(
        4,
        "sparse delivery slope at D=256, sparsity 0.85",
        passed,
        &format!("slope = {slope:.4} (expect -0.5 +- 0.1)"),
    );
}

#[test]
fn c05_eta_monotonicity() {
    let mut passed = true;
    let mut detail = String::new();
    for d in [16u64, 64, 256, 1024] {
        let mut prev = f64::INFINITY;
        for k in [1u64, 4, 16, 64] {
            let report = cost_report(&MeshConfig::new(d, k).unwrap()).unwrap();
            if k == 1 && report.eta != 1.0 {
                passed = false;
                detail = format!("eta(D={d}, 1) = {} != 1", report.eta);
            }
            if !(report.eta < prev) {
                passed = false;
                detail = format!("eta not strictly decreasing at D={d}, K={k}");
            }
            prev = report.eta;
        }
    }
    if passed {
        detail = "eta(D,1) = 1 exactly and eta strictly decreasing in K for D >= 16".into();
    }
    conclude(5, "eta identity and monotonicity", passed, &detail);
}

#[test]
fn c06_gemm_oracle_agreement() {
    let mut rng = seed_rng(7);
    let mut passed = true;
    let mut detail = String::new();

    // (a) 50 random valid (shape, plan): policy-None equals the formula.
    let mut cases = 0;
    while cases < 50 {
        let b_m = 1u64 << rng.random_range(0..4);
        let b_n = 1u64 << rng.random_range(0..4);
        let b_l = 1u64 << rng.random_range(0..4);
        let m = b_m * rng.random_range(1..6);
        let n = b_n * rng.random_range(1..6);
        let l = b_l * rng.random_range(1..6);
        let k = [1u64, 4, 16][rng.random_range(0..3)];
        let sk = (k as f64).sqrt() as u64;
        let shape = match GemmShape::new(m * sk, n * sk, l * sk, k) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let plan = TilePlan {
            b_m,
            b_n,
            b_l,
            group: 1,
            ordering: if cases % 2 == 0 {
                Ordering::RowMajor
            } else {
                Ordering::Grouped
            },
        };
        if plan.validate(&shape).is_err() {
            continue;
        }
        cases += 1;
        let schedule = build_schedule(&shape, &plan).unwrap();
        let report = dencomm::gemm::simulate_cache(
            &schedule,
            &CacheModel {
                capacity: 0,
                policy: CachePolicy::None,
            },
        );
        let row_major = analytic_costs(
            &shape,
            &TilePlan {
                ordering: Ordering::RowMajor,
                group: 1,
                ..plan
            },
        )
        .unwrap();
        if report.reads_global as f64 != row_major.reads {
            passed = false;
            detail = format!(
                "uncached mismatch: sim {} vs formula {} ({shape:?})",
                report.reads_global, row_major.reads
            );
        }
    }

    // (b) grouped LRU within 10% of the formula whenever the group fits.
    for (m, b, g_cap) in [(64u64, 4u64, 8u64), (128, 8, 4), (64, 2, 16)] {
        let shape = GemmShape::new(m, m, m, 1).unwrap();
        for g in [1, 2, g_cap] {
            if (m / b) % g != 0 {
                continue;
            }
            let plan = TilePlan {
                b_m: b,
                b_n: b,
                b_l: b,
                group: g,
                ordering: Ordering::Grouped,
            };
            let q = (g * b + b) * m; // exactly the working-set bound
            let schedule = build_schedule(&shape, &plan).unwrap();
            let report = dencomm::gemm::simulate_cache(
                &schedule,
                &CacheModel {
                    capacity: q,
                    policy: CachePolicy::Lru,
                },
            );
            let rel = (report.reads_global as f64 - report.analytic_reads).abs()
                / report.analytic_reads;
            if rel > 0.10 {
                passed = false;
                detail = format!("grouped gap {rel:.3} at M={m}, B={b}, G={g}");
            }
        }
    }

    // (c) dendritic grouped-read reduction at M=N=L=256, Q=8192.
    let plan = TilePlan {
        b_m: 4,
        b_n: 4,
        b_l: 16,
        group: 1,
        ordering: Ordering::Grouped,
    };
    let rows = dendritic_reduction_sweep(256, 256, 256, &[1, 4, 16], 8192, &plan).unwrap();
    let base = rows[0].reads_sim as f64;
    for row in rows.iter().skip(1) {
        let measured = row.reads_sim as f64 / base;
        let expected = 1.0 / (row.k as f64).sqrt();
        if (measured - expected).abs() / expected > 0.15 {
            passed = false;
            detail = format!(
                "read reduction K={}: {measured:.4} vs {expected:.4}",
                row.k
            );
        }
        // (d) write ratio exactly 1/sqrt(K)
        if row.writes_sim * (row.k as f64).sqrt() as u64 != rows[0].writes_sim {
            passed = false;
            detail = format!("write ratio not exact at K={}", row.k);
        }
    }

    if passed {
        detail = "50 uncached cases exact; grouped LRU within 10% at the capacity bound; read reduction within 15% of 1/sqrt(K); write ratio exact".into();
    }
    conclude(6, "GEMM traffic oracle agreement", passed, &detail);
}

#[test]
fn c07_memory_constants() {
    let dendritic_fp =
        activation_memory_bits(4, 4, MemoryScheme::FullPrecision { bits_per_value: 16 });
    let point_fp =
        activation_memory_bits(8, 1, MemoryScheme::FullPrecision { bits_per_value: 16 });
    let dendritic_mask =
        activation_memory_bits(4, 4, MemoryScheme::BitMaskPlusOutputs { bits_per_value: 16 });
    let passed = dendritic_fp.stored_bits == 320
        && point_fp.stored_bits == 128
        && dendritic_mask.stored_bits == 80;
    conclude(
        7,
        "activation memory constants",
        passed,
        &format!(
            "dendritic {} (want 320), point {} (want 128), masked {} (want 80)",
            dendritic_fp.stored_bits, point_fp.stored_bits, dendritic_mask.stored_bits
        ),
    );
}

#[test]
fn c08_complexity_table() {
    let base = resnet18();
    let baseline = count_macs(&base, None).unwrap();
    let mut passed = baseline.total_params == 11_689_512;
    let mut notes = vec![format!(
        "baseline {} params (want exactly 11,689,512)",
        baseline.total_params
    )];
    let mmacs_rel = (baseline.mmacs() - 1_821.63).abs() / 1_821.63;
    if mmacs_rel > 0.01 {
        passed = false;
    }
    notes.push(format!(
        "baseline {:.2} MMACs ({:.2}% from 1,821.63)",
        baseline.mmacs(),
        mmacs_rel * 100.0
    ));

    for (k, expected) in [(4u64, 11_556_200i64), (16, 11_521_800), (64, 11_512_664)] {
        let scaled = scale_architecture(&base, k, 1.0).unwrap();
        let report = count_macs(&scaled.descriptor, None).unwrap();
        let rel = (report.total_params as i64 - expected).abs() as f64 / expected as f64;
        if rel > 0.01 {
            passed = false;
        }
        // itemize layers that moved away from the baseline
        let deltas: Vec<String> = report
            .per_layer
            .iter()
            .zip(&baseline.per_layer)
            .filter(|(s, b)| s.params != b.params)
            .map(|(s, b)| format!("{} {:+}", s.label, s.params as i64 - b.params as i64))
            .collect();
        notes.push(format!(
            "K={k}: {} params ({:.3}% from {expected}; per-layer deltas: {})",
            report.total_params,
            rel * 100.0,
            if deltas.is_empty() {
                "none".to_string()
            } else {
                deltas.join(", ")
            }
        ));
    }
    conclude(8, "ResNet-18 complexity table", passed, &notes.join(" | "));
}

#[test]
fn c09_gradient_suite() {
    let mut passed = true;
    let mut detail = String::new();

    // (a) 50 random layers against central finite differences at 1e-4
    // relative error. Samples resample until no pre-activation sits within
    // 1e-3 of the activation kink, where finite differences are undefined.
    let mut rng = stream_rng(99, 0);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 50 && attempts < 5000 {
        attempts += 1;
        let n = rng.random_range(1..9);
        let k = rng.random_range(1..6);
        let d = rng.random_range(1..17);
        let activation = match checked % 3 {
            0 => Activation::ReLU,
            1 => Activation::LeakyReLU { slope: 0.1 },
            _ => Activation::Identity,
        };
        let rows = n * k;
        let layer = DendriticLayerSpec::new(
            n,
            k,
            d,
            (0..rows * d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..rows).map(|_| rng.random_range(-0.5..0.5)).collect(),
            activation,
        )
        .unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rec = forward_dendritic(&x, &layer).unwrap();
        if rec.pre_activations.iter().any(|p| p.abs() < 1e-3) {
            continue; // too close to the kink for finite differences
        }
        checked += 1;
        let grad_h: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let analytic = backward_dendritic(&rec, &layer, &grad_h).unwrap();
        let loss = |layer: &DendriticLayerSpec, x: &[f64]| -> f64 {
            forward_dendritic(x, layer)
                .unwrap()
                .outputs
                .iter()
                .zip(&grad_h)
                .map(|(h, g)| h * g)
                .sum()
        };
        let eps = 1e-5;
        let mut check_rel = |analytic: f64, fd: f64, what: &str| {
            let denom = analytic.abs().max(fd.abs()).max(1e-8);
            if (analytic - fd).abs() / denom > 1e-4 {
                passed = false;
                detail = format!("{what}: analytic {analytic} vs fd {fd}");
            }
        };
        for idx in 0..layer.weights.len() {
            let mut plus = layer.clone();
            plus.weights[idx] += eps;
            let mut minus = layer.clone();
            minus.weights[idx] -= eps;
            let fd = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * eps);
            check_rel(analytic.weights[idx], fd, "weight");
        }
        for idx in 0..layer.biases.len() {
            let mut plus = layer.clone();
            plus.biases[idx] += eps;
            let mut minus = layer.clone();
            minus.biases[idx] -= eps;
            let fd = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * eps);
            check_rel(analytic.biases[idx], fd, "bias");
        }
        for idx in 0..x.len() {
            let mut xp = x.clone();
            xp[idx] += eps;
            let mut xm = x.clone();
            xm[idx] -= eps;
            let fd = (loss(&layer, &xp) - loss(&layer, &xm)) / (2.0 * eps);
            check_rel(analytic.input[idx], fd, "input");
        }
    }
    if checked < 50 {
        passed = false;
        detail = format!("only {checked} kink-free layers in {attempts} attempts");
    }

    // (b) 100 random trials: mask backward bit-exact to full backward.
    let mut rng = stream_rng(99, 1);
    for trial in 0..100 {
        let activation = if trial % 2 == 0 {
            Activation::ReLU
        } else {
            Activation::LeakyReLU { slope: 0.01 }
        };
        let n = rng.random_range(1..8);
        let k = rng.random_range(1..6);
        let d = rng.random_range(1..10);
        let rows = n * k;
        let layer = DendriticLayerSpec::new(
            n,
            k,
            d,
            (0..rows * d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..rows).map(|_| rng.random_range(-0.5..0.5)).collect(),
            activation,
        )
        .unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad_h: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rec = forward_dendritic(&x, &layer).unwrap();
        let full = backward_dendritic(&rec, &layer, &grad_h).unwrap();
        let mask = pack_gradient_mask(&rec, &layer).unwrap();
        let via_mask = backward_from_mask(&mask, &layer, &x, &grad_h).unwrap();
        if full != via_mask {
            passed = false;
            detail = format!("mask path diverged on trial {trial}");
        }
    }

    if passed {
        detail = format!(
            "{checked} layers within 1e-4 of central differences; 100 mask trials bit-exact"
        );
    }
    conclude(9, "gradient correctness and mask fidelity", passed, &detail);
}

#[test]
fn c10_entropy_suite() {
    let mut rng = seed_rng(2024);
    let mut passed = true;
    let mut detail = String::new();
    let mut worst = 0.0f64;
    for trial in 0..1000 {
        let joint = random_joint(&mut rng, 4, 6);
        let identity = joint.conditional_entropy_given_sum();
        let direct = joint.conditional_entropy_given_sum_direct();
        let residual = (identity - direct).abs();
        worst = worst.max(residual);
        if residual >= 1e-12 {
            passed = false;
            detail = format!("identity residual {residual:.3e} on trial {trial}");
        }
        if !joint.verify_lemma1() {
            passed = false;
            detail = format!("lemma violated on trial {trial}");
        }
        let h_sum = joint.entropy_of_sum();
        let h_joint = joint.joint_entropy();
        if h_sum > h_joint + 1e-12 {
            passed = false;
            detail = format!("H(sum) > H(joint) on trial {trial}");
        }
        // equality exactly on injective sums
        if joint.sum_is_injective() != ((h_joint - h_sum).abs() < 1e-12) {
            passed = false;
            detail = format!("equality/injectivity mismatch on trial {trial}");
        }
    }
    // explicit injective-sum construction: strictly separated sums
    let injective = DiscreteJoint::new(
        2,
        vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![4.0, 2.0]],
        vec![0.5, 0.25, 0.25],
    )
    .unwrap();
    if (injective.entropy_of_sum() - injective.joint_entropy()).abs() >= 1e-12 {
        passed = false;
        detail = "explicit injective construction missed equality".into();
    }
    if passed {
        detail = format!("1000 joints: worst identity residual {worst:.3e}, lemma and bound hold, equality iff injective");
    }
    conclude(10, "sum-entropy identities", passed, &detail);
}

#[test]
fn c11_toy_training_parity() {
    let dataset = BlobsConfig {
        classes: 4,
        dim: 8,
        train_per_class: 250,
        test_per_class: 250,
        center_spread: 1.5,
        noise: 0.5,
    };
    let mut means = Vec::new();
    for template in [
        ModelTemplate::PointMlp {
            hidden: vec![32, 32],
        },
        ModelTemplate::DendriticMlp {
            hidden: vec![(16, 2), (16, 4)],
        },
    ] {
        let config = ToyConfig {
            dataset: dataset.clone(),
            model: template,
            epochs: 30,
            learning_rate: 0.1,
            batch_size: 32,
        };
        let mut finals = Vec::new();
        for seed in 1..=5 {
            let metrics = train_toy(&config, seed).unwrap();
            assert_eq!(metrics.outcome, TrainOutcome::Completed);
            finals.push(metrics.final_accuracy);
        }
        means.push(finals.iter().sum::<f64>() / finals.len() as f64);
    }
    let gap = (means[0] - means[1]).abs();
    let passed = gap <= 0.02;
    conclude(
        11,
        "equal-parameter training parity",
        passed,
        &format!(
            "point mean {:.4} vs dendritic-K4 mean {:.4} over 5 seeds (gap {:.4}, allowed 0.02)",
            means[0], means[1], gap
        ),
    );
}
