//! Monte Carlo simulation of the controlled fill/impulse dynamics under a
//! solved policy (or the static benchmark schedule), with counter-based
//! per-path random streams so every path is reproducible independently of
//! how many paths run or in what order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{GridSpec, ModelParams, ParamsError, SimConfig};
use crate::solver::{solve, Grid2, PolicyGrid, SolverError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("policy grid does not match the requested simulation grid")]
    GridMismatch,
    #[error("policy inventory range {policy} does not match params Q0 = {params}")]
    InventoryMismatch { policy: u32, params: u32 },
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Lo,
    Mm,
    Mo,
}

/// One executed fill or market order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FillEvent {
    pub channel: Channel,
    pub t: f64,
    /// Execution price per unit (mid +/- the relevant offset).
    pub price: f64,
    pub size: u32,
    /// Exact cash credited, including impact deductions.
    pub cash_delta: f64,
}

/// One Monte Carlo realization of the controlled state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPath {
    pub times: Vec<f64>,
    pub mid: Vec<f64>,
    pub inventory: Vec<u32>,
    pub cash: Vec<f64>,
    pub events: Vec<FillEvent>,
    /// Realized objective: terminal cash + terminal liquidation - penalty.
    pub objective: f64,
    /// Objective minus the initial mark `Q0 * s0`; comparable to h(0, Q0).
    pub excess_objective: f64,
    pub terminal_cash: f64,
    pub terminal_liquidation: f64,
    pub penalty: f64,
}

/// Per-path scalars kept during aggregation runs.
#[derive(Debug, Clone, Default)]
struct PathSummary {
    objective: f64,
    excess: f64,
    cash: f64,
    terminal_liquidation: f64,
    penalty: f64,
    lo_fills: u32,
    mm_fills: u32,
    mo_count: u32,
    mo_volume: u32,
    /// Executed market-order sizes, index = size.
    mo_hist: Vec<u32>,
}

impl PathSummary {
    fn tally_mo(&mut self, size: u32) {
        let idx = size as usize;
        if self.mo_hist.len() <= idx {
            self.mo_hist.resize(idx + 1, 0);
        }
        self.mo_hist[idx] += 1;
        self.mo_count += 1;
        self.mo_volume += size;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Static benchmark schedule executed with market orders.
    AcBenchmark,
    /// Limit orders plus market-order impulses, no internal liquidity.
    LoMo,
    /// Limit orders, market orders, and internal market-making fills.
    LoMoMm,
}

impl StrategyKind {
    pub fn label(&self) -> &'static str {
        match self {
            StrategyKind::AcBenchmark => "ac",
            StrategyKind::LoMo => "lo_mo",
            StrategyKind::LoMoMm => "lo_mo_mm",
        }
    }
}

/// Aggregated results for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub n_paths: usize,
    pub mean_objective: f64,
    /// Sample std of the objective divided by sqrt(n_paths).
    pub std_err: f64,
    /// Mean objective minus `Q0 * s0`; comparable to h(0, Q0).
    pub mean_excess_objective: f64,
    pub mean_cash: f64,
    pub mean_terminal_liquidation: f64,
    pub mean_penalty: f64,
    pub mean_lo_fills: f64,
    pub mean_mm_fills: f64,
    pub mean_mo_count: f64,
    /// Histogram of executed market-order sizes, index = size.
    pub mo_size_histogram: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: StrategyKind,
    pub stats: SimStats,
    /// Solved value at the initial state, when a policy was involved.
    pub value_at_start: Option<f64>,
    /// mean_excess_objective - value_at_start.
    pub dp_gap: Option<f64>,
}

/// Mean and standard error of per-path objective differences between two
/// strategies sharing the mid-price randomness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStat {
    pub better: StrategyKind,
    pub worse: StrategyKind,
    pub mean_gap: f64,
    pub se_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub sim: SimConfig,
    pub strategies: Vec<StrategyReport>,
    pub gaps: Vec<GapStat>,
}

/// Price increments for path `k` come from stream `2k`, fill uniforms from
/// stream `2k + 1`; the mid-price stream is therefore common across
/// strategies run with the same master seed.
fn path_rngs(master: u64, path: u64) -> (ChaCha12Rng, ChaCha12Rng) {
    let mut price = ChaCha12Rng::seed_from_u64(master);
    price.set_stream(2 * path);
    let mut fills = ChaCha12Rng::seed_from_u64(master);
    fills.set_stream(2 * path + 1);
    (price, fills)
}

/// Per-node simulation tables derived from the policy: fill probabilities
/// and cash markups, so the path loop stays in table lookups.
struct SimTables {
    p_lo: Grid2<f64>,
    /// Cash markup over mid on an LO fill: depth minus impact.
    lo_markup: Grid2<f64>,
    p_mm: Option<Grid2<f64>>,
    mm_spread: Option<Grid2<f64>>,
}

impl SimTables {
    fn build(policy: &PolicyGrid, p: &ModelParams, grid: &GridSpec) -> Self {
        let n = grid.n_time_steps;
        let n_q = policy.lo_depth.n_cols();
        let mut p_lo = Grid2::<f64>::new(n + 1, n_q);
        let mut lo_markup = Grid2::<f64>::new(n + 1, n_q);
        let mut p_mm = policy.mm_spread.as_ref().map(|_| Grid2::<f64>::new(n + 1, n_q));
        for i in 0..=n {
            for q in 1..n_q {
                let depth = policy.lo_depth.at(i, q);
                let intensity = p.lambda_lo * (-p.kappa_lo * depth).exp();
                p_lo.row_mut(i)[q] = 1.0 - (-intensity * grid.dt).exp();
                lo_markup.row_mut(i)[q] = depth - p.lo_impact * intensity;
                if let (Some(pm), Some(ms)) = (p_mm.as_mut(), policy.mm_spread.as_ref()) {
                    let spread = ms.at(i, q);
                    let mm_intensity = p.lambda_mm * (-p.kappa_mm * spread).exp();
                    pm.row_mut(i)[q] = 1.0 - (-mm_intensity * grid.dt).exp();
                }
            }
        }
        Self {
            p_lo,
            lo_markup,
            p_mm,
            mm_spread: policy.mm_spread.clone(),
        }
    }
}

struct PathRecorder {
    times: Vec<f64>,
    mid: Vec<f64>,
    inventory: Vec<u32>,
    cash: Vec<f64>,
    events: Vec<FillEvent>,
}

fn run_policy_path(
    tables: &SimTables,
    policy: &PolicyGrid,
    p: &ModelParams,
    grid: &GridSpec,
    sim: &SimConfig,
    path: u64,
    mut rec: Option<&mut PathRecorder>,
) -> PathSummary {
    let (mut price_rng, mut fill_rng) = path_rngs(sim.seed, path);
    let dt = grid.dt;
    let vol = p.sigma * dt.sqrt();
    let n = grid.n_time_steps;
    let mut s = sim.s0;
    let mut x = 0.0_f64;
    let mut q: u32 = p.initial_inventory;
    let mut penalty = 0.0_f64;
    let mut out = PathSummary::default();

    for i in 0..n {
        let t = grid.time(i);
        if q > 0 && policy.impulse_active.at(i, q as usize) {
            let z = policy.mo_size.at(i, q as usize);
            let cash_delta = s * f64::from(z) - p.impulse_cost(z);
            x += cash_delta;
            q -= z;
            out.tally_mo(z);
            if let Some(r) = rec.as_deref_mut() {
                r.events.push(FillEvent {
                    channel: Channel::Mo,
                    t,
                    price: s - p.bid_spread,
                    size: z,
                    cash_delta,
                });
            }
        }
        let dq = f64::from(q) - p.ac_schedule(t).expect("t on grid");
        penalty += p.penalty * dq * dq * dt;
        if q > 0 {
            let u: f64 = fill_rng.gen();
            if u < tables.p_lo.at(i, q as usize) {
                let cash_delta = s + tables.lo_markup.at(i, q as usize);
                x += cash_delta;
                q -= 1;
                out.lo_fills += 1;
                if let Some(r) = rec.as_deref_mut() {
                    r.events.push(FillEvent {
                        channel: Channel::Lo,
                        t,
                        price: s + policy.lo_depth.at(i, q as usize + 1),
                        size: 1,
                        cash_delta,
                    });
                }
            }
        }
        if q > 0 {
            if let (Some(pm), Some(ms)) = (tables.p_mm.as_ref(), tables.mm_spread.as_ref()) {
                let u: f64 = fill_rng.gen();
                if u < pm.at(i, q as usize) {
                    let cash_delta = s + ms.at(i, q as usize);
                    x += cash_delta;
                    q -= 1;
                    out.mm_fills += 1;
                    if let Some(r) = rec.as_deref_mut() {
                        r.events.push(FillEvent {
                            channel: Channel::Mm,
                            t,
                            price: cash_delta,
                            size: 1,
                            cash_delta,
                        });
                    }
                }
            }
        }
        if let Some(r) = rec.as_deref_mut() {
            r.times.push(t);
            r.mid.push(s);
            r.inventory.push(q);
            r.cash.push(x);
        }
        let z: f64 = price_rng.sample(StandardNormal);
        s += vol * z;
    }

    let qf = f64::from(q);
    let terminal_liq = qf * s + p.terminal_h(q);
    if let Some(r) = rec.as_deref_mut() {
        r.times.push(grid.horizon);
        r.mid.push(s);
        r.inventory.push(q);
        r.cash.push(x);
    }
    out.cash = x;
    out.terminal_liquidation = terminal_liq;
    out.penalty = penalty;
    out.objective = x + terminal_liq - penalty;
    out.excess = out.objective - f64::from(p.initial_inventory) * sim.s0;
    out
}

fn run_ac_path(
    targets: &[u32],
    qbar: &[f64],
    p: &ModelParams,
    grid: &GridSpec,
    sim: &SimConfig,
    path: u64,
    mut rec: Option<&mut PathRecorder>,
) -> PathSummary {
    let (mut price_rng, _) = path_rngs(sim.seed, path);
    let dt = grid.dt;
    let vol = p.sigma * dt.sqrt();
    let n = grid.n_time_steps;
    let mut s = sim.s0;
    let mut x = 0.0_f64;
    let mut q: u32 = p.initial_inventory;
    let mut penalty = 0.0_f64;
    let mut out = PathSummary::default();

    for i in 0..n {
        let t = grid.time(i);
        if q > targets[i] {
            let z = q - targets[i];
            let cash_delta = s * f64::from(z) - p.impulse_cost(z);
            x += cash_delta;
            q -= z;
            out.tally_mo(z);
            if let Some(r) = rec.as_deref_mut() {
                r.events.push(FillEvent {
                    channel: Channel::Mo,
                    t,
                    price: s - p.bid_spread,
                    size: z,
                    cash_delta,
                });
            }
        }
        let dq = f64::from(q) - qbar[i];
        penalty += p.penalty * dq * dq * dt;
        if let Some(r) = rec.as_deref_mut() {
            r.times.push(t);
            r.mid.push(s);
            r.inventory.push(q);
            r.cash.push(x);
        }
        let z: f64 = price_rng.sample(StandardNormal);
        s += vol * z;
    }
    let qf = f64::from(q);
    let terminal_liq = qf * s + p.terminal_h(q);
    if let Some(r) = rec.as_deref_mut() {
        r.times.push(grid.horizon);
        r.mid.push(s);
        r.inventory.push(q);
        r.cash.push(x);
    }
    out.cash = x;
    out.terminal_liquidation = terminal_liq;
    out.penalty = penalty;
    out.objective = x + terminal_liq - penalty;
    out.excess = out.objective - f64::from(p.initial_inventory) * sim.s0;
    out
}

fn check_policy(policy: &PolicyGrid, p: &ModelParams, grid: &GridSpec) -> Result<(), SimError> {
    if policy.grid != *grid {
        return Err(SimError::GridMismatch);
    }
    if policy.max_inventory() != p.initial_inventory {
        return Err(SimError::InventoryMismatch {
            policy: policy.max_inventory(),
            params: p.initial_inventory,
        });
    }
    Ok(())
}

fn recorder() -> PathRecorder {
    PathRecorder {
        times: Vec::new(),
        mid: Vec::new(),
        inventory: Vec::new(),
        cash: Vec::new(),
        events: Vec::new(),
    }
}

fn into_path(rec: PathRecorder, summary: PathSummary) -> SimPath {
    SimPath {
        times: rec.times,
        mid: rec.mid,
        inventory: rec.inventory,
        cash: rec.cash,
        events: rec.events,
        objective: summary.objective,
        excess_objective: summary.excess,
        terminal_cash: summary.cash,
        terminal_liquidation: summary.terminal_liquidation,
        penalty: summary.penalty,
    }
}

/// Simulates one fully-logged path under a solved policy.
pub fn simulate_path(
    policy: &PolicyGrid,
    p: &ModelParams,
    grid: &GridSpec,
    sim: &SimConfig,
    path_index: u64,
) -> Result<SimPath, SimError> {
    check_policy(policy, p, grid)?;
    let tables = SimTables::build(policy, p, grid);
    let mut rec = recorder();
    let summary = run_policy_path(&tables, policy, p, grid, sim, path_index, Some(&mut rec));
    Ok(into_path(rec, summary))
}

/// Simulates one fully-logged path of the static benchmark, executed as
/// market orders that keep integer inventory at `floor(qbar_t)`.
pub fn simulate_ac_benchmark(
    p: &ModelParams,
    grid: &GridSpec,
    sim: &SimConfig,
    path_index: u64,
) -> Result<SimPath, SimError> {
    let (targets, qbar) = ac_tables(p, grid)?;
    let mut rec = recorder();
    let summary = run_ac_path(&targets, &qbar, p, grid, sim, path_index, Some(&mut rec));
    Ok(into_path(rec, summary))
}

fn ac_tables(p: &ModelParams, grid: &GridSpec) -> Result<(Vec<u32>, Vec<f64>), SimError> {
    let mut targets = Vec::with_capacity(grid.n_time_steps);
    let mut qbar = Vec::with_capacity(grid.n_time_steps);
    for i in 0..grid.n_time_steps {
        let b = p.ac_schedule(grid.time(i))?;
        qbar.push(b);
        targets.push(b.floor().max(0.0) as u32);
    }
    Ok((targets, qbar))
}

fn aggregate(summaries: &[PathSummary], q0_mark: f64) -> SimStats {
    let n = summaries.len();
    let nf = n as f64;
    let mean = summaries.iter().map(|s| s.objective).sum::<f64>() / nf;
    let var = if n > 1 {
        summaries
            .iter()
            .map(|s| (s.objective - mean) * (s.objective - mean))
            .sum::<f64>()
            / (nf - 1.0)
    } else {
        0.0
    };
    let max_mo = summaries.iter().map(|s| s.mo_hist.len()).max().unwrap_or(1);
    let mut histogram = vec![0u64; max_mo.max(1)];
    for s in summaries {
        for (size, count) in s.mo_hist.iter().enumerate() {
            histogram[size] += u64::from(*count);
        }
    }
    SimStats {
        n_paths: n,
        mean_objective: mean,
        std_err: (var / nf).sqrt(),
        mean_excess_objective: mean - q0_mark,
        mean_cash: summaries.iter().map(|s| s.cash).sum::<f64>() / nf,
        mean_terminal_liquidation: summaries.iter().map(|s| s.terminal_liquidation).sum::<f64>()
            / nf,
        mean_penalty: summaries.iter().map(|s| s.penalty).sum::<f64>() / nf,
        mean_lo_fills: summaries.iter().map(|s| f64::from(s.lo_fills)).sum::<f64>() / nf,
        mean_mm_fills: summaries.iter().map(|s| f64::from(s.mm_fills)).sum::<f64>() / nf,
        mean_mo_count: summaries.iter().map(|s| f64::from(s.mo_count)).sum::<f64>() / nf,
        mo_size_histogram: histogram,
    }
}

/// Runs the requested strategies with common mid-price randomness,
/// aggregating objectives and pairwise gaps in fixed path order.
pub fn run_experiment(
    p: &ModelParams,
    grid: &GridSpec,
    sim: &SimConfig,
    strategies: &[StrategyKind],
) -> Result<ExperimentReport, SimError> {
    let mut reports = Vec::new();
    let mut per_path: Vec<(StrategyKind, Vec<f64>)> = Vec::new();

    for &kind in strategies {
        let (summaries, value_at_start) = match kind {
            StrategyKind::AcBenchmark => {
                let (targets, qbar) = ac_tables(p, grid)?;
                let s: Vec<PathSummary> = (0..sim.n_paths as u64)
                    .into_par_iter()
                    .map(|k| run_ac_path(&targets, &qbar, p, grid, sim, k, None))
                    .collect();
                (s, None)
            }
            StrategyKind::LoMo | StrategyKind::LoMoMm => {
                let params = match kind {
                    StrategyKind::LoMo => p.without_mm(),
                    _ => ModelParams {
                        mm_enabled: true,
                        ..p.clone()
                    },
                };
                let (value, policy) = solve(&params, grid)?;
                let tables = SimTables::build(&policy, &params, grid);
                let s: Vec<PathSummary> = (0..sim.n_paths as u64)
                    .into_par_iter()
                    .map(|k| run_policy_path(&tables, &policy, &params, grid, sim, k, None))
                    .collect();
                (s, Some(value.h.at(0, params.initial_inventory as usize)))
            }
        };
        let stats = aggregate(&summaries, f64::from(p.initial_inventory) * sim.s0);
        let dp_gap = value_at_start.map(|h0| stats.mean_excess_objective - h0);
        per_path.push((kind, summaries.iter().map(|s| s.objective).collect()));
        reports.push(StrategyReport {
            strategy: kind,
            stats,
            value_at_start,
            dp_gap,
        });
    }

    let mut gaps = Vec::new();
    for a in 0..per_path.len() {
        for b in (a + 1)..per_path.len() {
            let (ka, va) = &per_path[a];
            let (kb, vb) = &per_path[b];
            let diffs: Vec<f64> = va.iter().zip(vb.iter()).map(|(x, y)| x - y).collect();
            let n = diffs.len() as f64;
            let mean = diffs.iter().sum::<f64>() / n;
            let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
            let (better, worse, mean_gap) = if mean >= 0.0 {
                (*ka, *kb, mean)
            } else {
                (*kb, *ka, -mean)
            };
            gaps.push(GapStat {
                better,
                worse,
                mean_gap,
                se_gap: (var / n).sqrt(),
            });
        }
    }

    Ok(ExperimentReport {
        sim: sim.clone(),
        strategies: reports,
        gaps,
    })
}
