//! Global-memory traffic for block-wise GEMM.
//!
//! The layer product `C = A . B` with `A in M x L`, `B in L x N` is computed
//! in `B_M x B_N` output blocks accumulated over `B_L` slices. Each block of
//! `C` needs `L (B_M + B_N)` elements from memory, so an uncached pass reads
//! `(B_M + B_N) L (M/B_M) (N/B_N)` elements and writes `M N`.
//!
//! Grouped ordering sweeps `G` block-rows of `C` together along `N` so the
//! `G B_M` rows of `A` stay cache-resident while columns of `B` stream
//! through: reads drop to `N L M / (B_M G) + M L` once
//! `(G B_M + B_N) L <= Q` for cache capacity `Q`.
//!
//! A dendritic layer with `K` dendrites per neuron keeps the MAC count by
//! reshaping to `A_hat in M x L/sqrt(K)`, `B_hat in L/sqrt(K) x N sqrt(K)`;
//! uncached reads are unchanged, writes shrink to `M N / sqrt(K)` because
//! groups of `K` adjacent output columns aggregate on chip before writeback,
//! and at fixed `Q` the shorter inner dimension admits a `sqrt(K)`-fold
//! larger group, cutting cached reads by `sqrt(K)`.
//!
//! [`simulate_cache`] validates the formulas with a block-granular,
//! fully-associative LRU cache over the exact access schedule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GemmError {
    #[error("invalid GEMM argument: {0}")]
    Argument(String),
}

fn exact_sqrt(v: u64) -> Option<u64> {
    let r = (v as f64).sqrt().round() as u64;
    (r * r == v).then_some(r)
}

/// Point-layer GEMM dimensions plus the dendrite count of the layer the
/// product implements (`k_dendrites = 1` is the point model).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GemmShape {
    pub m: u64,
    pub n: u64,
    pub l: u64,
    pub k_dendrites: u64,
}

impl GemmShape {
    /// `k_dendrites` must be a perfect square whose root divides both `l`
    /// (the dendritic inner dimension is `L/sqrt(K)`) and `n` (aggregated
    /// writes are `M N / sqrt(K)`).
    pub fn new(m: u64, n: u64, l: u64, k_dendrites: u64) -> Result<Self, GemmError> {
        if m == 0 || n == 0 || l == 0 {
            return Err(GemmError::Argument("dimensions must be positive".into()));
        }
        let sk = exact_sqrt(k_dendrites)
            .ok_or_else(|| GemmError::Argument(format!("K = {k_dendrites} is not a perfect square")))?;
        if sk == 0 {
            return Err(GemmError::Argument("K must be at least 1".into()));
        }
        if l % sk != 0 || n % sk != 0 {
            return Err(GemmError::Argument(format!(
                "sqrt(K) = {sk} must divide L = {l} and N = {n}"
            )));
        }
        Ok(Self { m, n, l, k_dendrites })
    }

    pub fn sqrt_k(&self) -> u64 {
        exact_sqrt(self.k_dendrites).expect("validated")
    }

    /// Inner dimension of the product actually executed: `L/sqrt(K)`.
    pub fn l_eff(&self) -> u64 {
        self.l / self.sqrt_k()
    }

    /// Output columns of the product actually executed: `N sqrt(K)`.
    pub fn n_eff(&self) -> u64 {
        self.n * self.sqrt_k()
    }

    /// Elements written to global memory after on-chip aggregation.
    pub fn written_elements(&self) -> u64 {
        self.m * self.n_eff() / self.k_dendrites
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ordering {
    RowMajor,
    Grouped,
}

/// Block sizes and traversal order for one GEMM execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilePlan {
    pub b_m: u64,
    pub b_n: u64,
    pub b_l: u64,
    /// Block-rows of `C` swept together; meaningful for `Grouped`.
    pub group: u64,
    pub ordering: Ordering,
}

impl TilePlan {
    pub fn validate(&self, shape: &GemmShape) -> Result<(), GemmError> {
        if self.b_m == 0 || self.b_n == 0 || self.b_l == 0 || self.group == 0 {
            return Err(GemmError::Argument("block sizes and G must be positive".into()));
        }
        if shape.m % self.b_m != 0 {
            return Err(GemmError::Argument(format!(
                "B_M = {} does not divide M = {}",
                self.b_m, shape.m
            )));
        }
        if shape.n_eff() % self.b_n != 0 {
            return Err(GemmError::Argument(format!(
                "B_N = {} does not divide the output width {}",
                self.b_n,
                shape.n_eff()
            )));
        }
        if shape.l_eff() % self.b_l != 0 {
            return Err(GemmError::Argument(format!(
                "B_L = {} does not divide the inner dimension {}",
                self.b_l,
                shape.l_eff()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CachePolicy {
    /// Every block access goes to global memory.
    None,
    /// Fully-associative LRU over blocks.
    Lru,
}

/// Cache abstraction of the traffic model: capacity in elements, residency
/// at whole-block granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheModel {
    pub capacity: u64,
    pub policy: CachePolicy,
}

/// One scheduled access. Reads name a block of `A` or `B`; `WriteC` marks an
/// output block's completion (written back once, bypassing the cache).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    ReadA { row: u64, lb: u64 },
    ReadB { lb: u64, col: u64 },
    WriteC { row: u64, col: u64 },
}

/// The full ordered access stream of one GEMM execution.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSchedule {
    pub shape: GemmShape,
    pub plan: TilePlan,
    pub accesses: Vec<Access>,
}

impl BlockSchedule {
    /// Inner accumulation steps: one `(ReadA, ReadB)` pair per output block
    /// per `B_L` slice, `(M/B_M)(N_eff/B_N)(L_eff/B_L)` in total.
    pub fn inner_steps(&self) -> u64 {
        self.accesses
            .iter()
            .filter(|a| matches!(a, Access::ReadA { .. }))
            .count() as u64
    }

    /// Output blocks in completion order.
    pub fn c_block_order(&self) -> Vec<(u64, u64)> {
        self.accesses
            .iter()
            .filter_map(|a| match a {
                Access::WriteC { row, col } => Some((*row, *col)),
                _ => None,
            })
            .collect()
    }
}

/// Build the access stream for a plan.
///
/// `RowMajor` finishes each `C` block before the next, scanning blocks
/// row-major. `Grouped` sweeps each group of `G` block-rows along `N`,
/// interleaving the group's blocks slice-by-slice — the serialized view of
/// the parallel execution the grouping exists for — so a resident `A` group
/// sees every `B` column exactly once.
pub fn build_schedule(shape: &GemmShape, plan: &TilePlan) -> Result<BlockSchedule, GemmError> {
    plan.validate(shape)?;
    let row_blocks = shape.m / plan.b_m;
    let col_blocks = shape.n_eff() / plan.b_n;
    let l_blocks = shape.l_eff() / plan.b_l;
    let mut accesses = Vec::new();
    match plan.ordering {
        Ordering::RowMajor => {
            for r in 0..row_blocks {
                for c in 0..col_blocks {
                    for lb in 0..l_blocks {
                        accesses.push(Access::ReadA { row: r, lb });
                        accesses.push(Access::ReadB { lb, col: c });
                    }
                    accesses.push(Access::WriteC { row: r, col: c });
                }
            }
        }
        Ordering::Grouped => {
            let mut g0 = 0;
            while g0 < row_blocks {
                let rows = g0..(g0 + plan.group).min(row_blocks);
                for c in 0..col_blocks {
                    for lb in 0..l_blocks {
                        // The group's blocks run in lockstep: their A tiles
                        // are live together, then each consumes the shared
                        // B tile (one computation-step read per block).
                        for r in rows.clone() {
                            accesses.push(Access::ReadA { row: r, lb });
                        }
                        for _ in rows.clone() {
                            accesses.push(Access::ReadB { lb, col: c });
                        }
                    }
                    for r in rows.clone() {
                        accesses.push(Access::WriteC { row: r, col: c });
                    }
                }
                g0 += plan.group;
            }
        }
    }
    Ok(BlockSchedule {
        shape: *shape,
        plan: *plan,
        accesses,
    })
}

/// Closed-form traffic predictions, in elements. Fractional values appear
/// only when `G` does not divide the block-row count evenly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCosts {
    pub reads: f64,
    pub writes: f64,
}

/// Formula traffic for a plan: uncached block reads for `RowMajor`,
/// `N L M/(B_M G) + M L` (in effective dimensions) for `Grouped`; writes are
/// always the aggregated `M N / sqrt(K)`.
pub fn analytic_costs(shape: &GemmShape, plan: &TilePlan) -> Result<AnalyticCosts, GemmError> {
    plan.validate(shape)?;
    let m = shape.m as f64;
    let l = shape.l_eff() as f64;
    let n = shape.n_eff() as f64;
    let reads = match plan.ordering {
        Ordering::RowMajor => {
            (plan.b_m + plan.b_n) as f64 * l * (m / plan.b_m as f64) * (n / plan.b_n as f64)
        }
        Ordering::Grouped => n * l * m / (plan.b_m * plan.group) as f64 + m * l,
    };
    Ok(AnalyticCosts {
        reads,
        writes: shape.written_elements() as f64,
    })
}

/// Largest group size whose working set `(G B_M + B_N) L_eff` fits in `q`,
/// restricted to divisors of the block-row count so every group is full.
/// Falls back to 1 when even a single row-block overflows the cache.
pub fn group_size_for_cache(shape: &GemmShape, plan: &TilePlan, q: u64) -> u64 {
    let row_blocks = shape.m / plan.b_m;
    let mut best = 1;
    for g in 1..=row_blocks {
        if row_blocks % g == 0 && (g * plan.b_m + plan.b_n) * shape.l_eff() <= q {
            best = g;
        }
    }
    best
}

/// Measured traffic next to its closed-form prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficReport {
    pub reads_global: u64,
    pub writes_global: u64,
    pub analytic_reads: f64,
    pub analytic_writes: f64,
}

/// Replay a schedule through the cache model and count global traffic.
///
/// Reads are charged per element on block misses; a block smaller than the
/// remaining capacity is kept under LRU, an oversized working set simply
/// thrashes. Output blocks are written back once at completion and bypass
/// the cache; the on-chip aggregation divides written volume by `K`.
pub fn simulate_cache(schedule: &BlockSchedule, cache: &CacheModel) -> TrafficReport {
    let plan = &schedule.plan;
    let shape = &schedule.shape;
    let a_block = plan.b_m * plan.b_l;
    let b_block = plan.b_l * plan.b_n;

    #[derive(PartialEq, Eq, Clone, Copy, Hash)]
    enum Block {
        A(u64, u64),
        B(u64, u64),
    }

    let mut reads: u64 = 0;
    let mut raw_c_writes: u64 = 0;
    // LRU queue, most recent at the back. Desk-scale schedules keep this
    // list short enough that linear scans win over fancier structures.
    let mut lru: Vec<(Block, u64)> = Vec::new();
    let mut occupancy: u64 = 0;

    for access in &schedule.accesses {
        let (block, size) = match access {
            Access::ReadA { row, lb } => (Block::A(*row, *lb), a_block),
            Access::ReadB { lb, col } => (Block::B(*lb, *col), b_block),
            Access::WriteC { .. } => {
                raw_c_writes += plan.b_m * plan.b_n;
                continue;
            }
        };
        match cache.policy {
            CachePolicy::None => {
                reads += size;
            }
            CachePolicy::Lru => {
                if let Some(pos) = lru.iter().position(|(b, _)| *b == block) {
                    let entry = lru.remove(pos);
                    lru.push(entry);
                } else {
                    reads += size;
                    if size <= cache.capacity {
                        while occupancy + size > cache.capacity {
                            let (_, evicted) = lru.remove(0);
                            occupancy -= evicted;
                        }
                        lru.push((block, size));
                        occupancy += size;
                    }
                }
            }
        }
    }

    debug_assert_eq!(
        raw_c_writes,
        shape.m * shape.n_eff(),
        "every output block written exactly once"
    );
    let writes = raw_c_writes / shape.k_dendrites;
    let analytic =
        analytic_costs(shape, plan).expect("schedule construction already validated the plan");
    TrafficReport {
        reads_global: reads,
        writes_global: writes,
        analytic_reads: analytic.reads,
        analytic_writes: analytic.writes,
    }
}

/// One row of a dendritic reduction sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: u64,
    pub n: u64,
    pub l: u64,
    pub k: u64,
    pub b_m: u64,
    pub b_n: u64,
    pub b_l: u64,
    pub group: u64,
    pub q: u64,
    pub reads_sim: u64,
    pub reads_analytic: f64,
    pub writes_sim: u64,
    pub writes_analytic: f64,
}

/// Sweep dendrite counts at fixed cache capacity: for each `K` the group
/// size is re-derived from `q` via [`group_size_for_cache`], the schedule is
/// simulated under LRU, and traffic is reported next to the formulas.
pub fn dendritic_reduction_sweep(
    m: u64,
    n: u64,
    l: u64,
    ks: &[u64],
    q: u64,
    base_plan: &TilePlan,
) -> Result<Vec<SweepRow>, GemmError> {
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let shape = GemmShape::new(m, n, l, k)?;
        let mut plan = *base_plan;
        plan.ordering = Ordering::Grouped;
        plan.group = group_size_for_cache(&shape, &plan, q);
        let schedule = build_schedule(&shape, &plan)?;
        let report = simulate_cache(
            &schedule,
            &CacheModel {
                capacity: q,
                policy: CachePolicy::Lru,
            },
        );
        rows.push(SweepRow {
            m,
            n,
            l,
            k,
            b_m: plan.b_m,
            b_n: plan.b_n,
            b_l: plan.b_l,
            group: plan.group,
            q,
            reads_sim: report.reads_global,
            reads_analytic: report.analytic_reads,
            writes_sim: report.writes_global,
            writes_analytic: report.analytic_writes,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(m: u64, n: u64, l: u64) -> GemmShape {
        GemmShape::new(m, n, l, 1).unwrap()
    }

    fn plan(b_m: u64, b_n: u64, b_l: u64, group: u64, ordering: Ordering) -> TilePlan {
        TilePlan {
            b_m,
            b_n,
            b_l,
            group,
            ordering,
        }
    }

    #[test]
    fn shape_validation() {
        assert!(GemmShape::new(4, 4, 4, 2).is_err()); // K not a perfect square
        assert!(GemmShape::new(4, 4, 6, 16).is_err()); // sqrt(K)=4 does not divide L=6
        assert!(GemmShape::new(4, 5, 4, 4).is_err()); // sqrt(K)=2 does not divide N=5
        assert!(GemmShape::new(8, 8, 8, 4).is_ok());
    }

    #[test]
    fn analytic_small_case() {
        // M = N = L = 4, B_M = B_N = 2: reads 64, writes 16
        let shape = point(4, 4, 4);
        let p = plan(2, 2, 2, 1, Ordering::RowMajor);
        let c = analytic_costs(&shape, &p).unwrap();
        assert_eq!(c.reads, 64.0);
        assert_eq!(c.writes, 16.0);
    }

    #[test]
    fn analytic_dendritic_reads_unchanged_writes_shrink() {
        // K = 4 at the same complexity: reads 64, writes 8
        let shape = GemmShape::new(4, 4, 4, 4).unwrap();
        let p = plan(2, 2, 2, 1, Ordering::RowMajor);
        let c = analytic_costs(&shape, &p).unwrap();
        assert_eq!(c.reads, 64.0);
        assert_eq!(c.writes, 8.0);
    }

    #[test]
    fn analytic_grouped_case() {
        // M = N = L = 8, B_M = B_N = 2, G = 2: 8*8*8/(2*2) + 64 = 192
        let shape = point(8, 8, 8);
        let p = plan(2, 2, 2, 2, Ordering::Grouped);
        let c = analytic_costs(&shape, &p).unwrap();
        assert_eq!(c.reads, 192.0);
    }

    #[test]
    fn schedule_c_block_orders() {
        let shape = point(4, 4, 4);
        let row_major = build_schedule(&shape, &plan(2, 2, 2, 1, Ordering::RowMajor)).unwrap();
        assert_eq!(
            row_major.c_block_order(),
            vec![(0, 0), (0, 1), (1, 0), (1, 1)]
        );
        let grouped = build_schedule(&shape, &plan(2, 2, 2, 2, Ordering::Grouped)).unwrap();
        assert_eq!(
            grouped.c_block_order(),
            vec![(0, 0), (1, 0), (0, 1), (1, 1)]
        );
    }

    #[test]
    fn schedule_length_identity() {
        let shape = point(8, 8, 8);
        for ordering in [Ordering::RowMajor, Ordering::Grouped] {
            let s = build_schedule(&shape, &plan(2, 4, 2, 2, ordering)).unwrap();
            assert_eq!(s.inner_steps(), (8 / 2) * (8 / 4) * (8 / 2));
        }
    }

    #[test]
    fn policy_none_matches_row_major_formula_exactly() {
        let cases = [
            (point(8, 8, 8), plan(2, 2, 2, 1, Ordering::RowMajor)),
            (point(16, 8, 4), plan(4, 2, 2, 1, Ordering::RowMajor)),
            (point(8, 8, 8), plan(2, 2, 4, 2, Ordering::Grouped)),
            (
                GemmShape::new(8, 8, 8, 4).unwrap(),
                plan(2, 2, 2, 2, Ordering::Grouped),
            ),
        ];
        for (shape, p) in cases {
            let schedule = build_schedule(&shape, &p).unwrap();
            let report = simulate_cache(
                &schedule,
                &CacheModel {
                    capacity: 0,
                    policy: CachePolicy::None,
                },
            );
            let row_major_reads = analytic_costs(&shape, &plan(p.b_m, p.b_n, p.b_l, 1, Ordering::RowMajor))
                .unwrap()
                .reads;
            assert_eq!(report.reads_global as f64, row_major_reads);
        }
    }

    #[test]
    fn infinite_cache_reads_each_element_once() {
        let shape = point(16, 16, 16);
        let p = plan(4, 4, 4, 2, Ordering::Grouped);
        let schedule = build_schedule(&shape, &p).unwrap();
        let report = simulate_cache(
            &schedule,
            &CacheModel {
                capacity: u64::MAX,
                policy: CachePolicy::Lru,
            },
        );
        assert_eq!(report.reads_global, 16 * 16 + 16 * 16);
    }

    #[test]
    fn grouped_lru_matches_formula_at_exact_capacity() {
        // Q exactly (G B_M + B_N) L: steady-state misses are the compulsory
        // B columns plus A once per group.
        let shape = point(16, 16, 16);
        let p = plan(2, 2, 2, 4, Ordering::Grouped);
        let q = (p.group * p.b_m + p.b_n) * shape.l_eff();
        let schedule = build_schedule(&shape, &p).unwrap();
        let report = simulate_cache(
            &schedule,
            &CacheModel {
                capacity: q,
                policy: CachePolicy::Lru,
            },
        );
        let analytic = analytic_costs(&shape, &p).unwrap().reads;
        assert_eq!(report.reads_global as f64, analytic);
    }

    #[test]
    fn grouped_never_reads_more_than_row_major() {
        // Over cache-feasible groups (the way G is picked in practice);
        // an oversized group can legitimately thrash.
        let shape = point(32, 32, 32);
        for b in [2u64, 4, 8] {
            for q in [64u64, 256, 1024, 4096] {
                let p = plan(b, b, b, 1, Ordering::Grouped);
                for g in 1..=group_size_for_cache(&shape, &p, q) {
                    if (32 / b) % g != 0 {
                        continue;
                    }
                    let grouped =
                        build_schedule(&shape, &plan(b, b, b, g, Ordering::Grouped)).unwrap();
                    let row_major =
                        build_schedule(&shape, &plan(b, b, b, 1, Ordering::RowMajor)).unwrap();
                    let cache = CacheModel {
                        capacity: q,
                        policy: CachePolicy::Lru,
                    };
                    let gr = simulate_cache(&grouped, &cache).reads_global;
                    let rr = simulate_cache(&row_major, &cache).reads_global;
                    assert!(
                        gr <= rr,
                        "grouped {gr} > row-major {rr} at b={b} g={g} q={q}"
                    );
                }
            }
        }
    }

    #[test]
    fn compulsory_lower_bound() {
        let shape = point(16, 16, 16);
        for (g, q, ordering) in [
            (1, 64, Ordering::RowMajor),
            (2, 512, Ordering::Grouped),
            (4, 16, Ordering::Grouped),
        ] {
            let schedule = build_schedule(&shape, &plan(4, 4, 4, g, ordering)).unwrap();
            let report = simulate_cache(
                &schedule,
                &CacheModel {
                    capacity: q,
                    policy: CachePolicy::Lru,
                },
            );
            assert!(report.reads_global >= 16 * 16 + 16 * 16);
        }
    }

    #[test]
    fn write_ratio_is_exactly_inverse_sqrt_k() {
        let base = point(16, 16, 16);
        let p = plan(4, 4, 4, 1, Ordering::RowMajor);
        let base_writes = simulate_cache(
            &build_schedule(&base, &p).unwrap(),
            &CacheModel {
                capacity: 0,
                policy: CachePolicy::None,
            },
        )
        .writes_global;
        assert_eq!(base_writes, 256);
        for k in [4u64, 16] {
            let shape = GemmShape::new(16, 16, 16, k).unwrap();
            let writes = simulate_cache(
                &build_schedule(&shape, &p).unwrap(),
                &CacheModel {
                    capacity: 0,
                    policy: CachePolicy::None,
                },
            )
            .writes_global;
            assert_eq!(writes * exact_sqrt(k).unwrap(), base_writes);
        }
    }

    #[test]
    fn sweep_baseline_row_matches_and_reduction_tracks_sqrt_k() {
        let rows = dendritic_reduction_sweep(
            64,
            64,
            64,
            &[1, 4, 16],
            2048,
            &plan(4, 4, 4, 1, Ordering::Grouped),
        )
        .unwrap();
        assert_eq!(rows[0].k, 1);
        // K = 1 row is the baseline: same shape as the point product.
        assert_eq!(rows[0].writes_sim, 64 * 64);
        for row in &rows {
            let rel = (row.reads_sim as f64 - row.reads_analytic).abs() / row.reads_analytic;
            assert!(rel < 0.10, "K={} sim {} vs analytic {}", row.k, row.reads_sim, row.reads_analytic);
        }
    }

    #[test]
    fn group_size_respects_capacity_and_divisibility() {
        let shape = point(64, 64, 64);
        let p = plan(4, 4, 4, 1, Ordering::Grouped);
        // (G*4 + 4) * 64 <= 2048  =>  G <= 7 => largest divisor of 16 is 4
        assert_eq!(group_size_for_cache(&shape, &p, 2048), 4);
        // tiny cache: falls back to 1
        assert_eq!(group_size_for_cache(&shape, &p, 1), 1);
    }
}
