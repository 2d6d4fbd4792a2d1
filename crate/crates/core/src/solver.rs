//! Backward-induction solver for the reduced liquidation equation on a
//! uniform time grid times integer inventory.
//!
//! The continuation part is stepped explicitly in backward time; after each
//! step the row is projected onto the market-order obstacle (best value
//! attainable by an immediate block sale). Per-inventory optimizations are
//! closed-form for the market-making spread and a one-dimensional root find
//! for the limit-order depth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{GridSpec, ModelParams, ParamsError};

/// Equality slack for the obstacle: a projection that matches the
/// continuation value within this tolerance counts as binding.
pub const OBSTACLE_TOL: f64 = 1e-12;

/// Residual tolerance for the limit-order first-order condition.
pub const LO_ROOT_TOL: f64 = 1e-12;

const LO_BRACKET: (f64, f64) = (-10.0, 10.0);
const LO_MAX_ITER: usize = 200;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("non-finite value difference in optimizer input: {0}")]
    NonFinite(f64),
    #[error(
        "limit-order first-order condition has no sign change on \
         [{lo}, {hi}] for value difference {delta}; g({lo})={g_lo}, g({hi})={g_hi}"
    )]
    NoBracket {
        lo: f64,
        hi: f64,
        delta: f64,
        g_lo: f64,
        g_hi: f64,
    },
    #[error(
        "explicit scheme unstable at t={t}, q={q}: dt * fill intensity = {product:.6} >= 1; \
         refine the time grid (use a smaller dt)"
    )]
    CflViolation { t: f64, q: u32, product: f64 },
    #[error(transparent)]
    Params(#[from] ParamsError),
}

/// Dense (time step) x (inventory) matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2<T> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Grid2<T> {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![T::default(); n_rows * n_cols],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn at(&self, i: usize, q: usize) -> T {
        self.data[i * self.n_cols + q]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn from_data(n_rows: usize, n_cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n_rows * n_cols);
        Self {
            n_rows,
            n_cols,
            data,
        }
    }
}

/// Reduced value function h(t, q) on the solve grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueGrid {
    pub h: Grid2<f64>,
    pub grid: GridSpec,
}

impl ValueGrid {
    pub fn max_inventory(&self) -> u32 {
        (self.h.n_cols() - 1) as u32
    }
}

/// Optimal controls at every grid node.
///
/// Entries at q = 0 are vacuous and stored as zero. `mm_spread` is present
/// only when the market-making channel is enabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyGrid {
    pub lo_depth: Grid2<f64>,
    pub mm_spread: Option<Grid2<f64>>,
    pub impulse_active: Grid2<bool>,
    pub mo_size: Grid2<u32>,
    pub grid: GridSpec,
}

impl PolicyGrid {
    pub fn max_inventory(&self) -> u32 {
        (self.lo_depth.n_cols() - 1) as u32
    }
}

/// Optimal market-making spread and the resulting running gain.
///
/// `delta_h = h(t, q) - h(t, q - 1)`. The spread is `1/kappa + delta_h`
/// (closed form; negative values mean quoting through the mid and are kept)
/// and the gain is the supremum of `(delta + h(q-1) - h(q)) lambda e^{-kappa delta}`.
pub fn mm_spread_and_value(delta_h: f64, p: &ModelParams) -> Result<(f64, f64), SolverError> {
    if !delta_h.is_finite() {
        return Err(SolverError::NonFinite(delta_h));
    }
    let kappa = p.kappa_mm;
    let spread = 1.0 / kappa + delta_h;
    let gain = p.lambda_mm / kappa * (-1.0 - kappa * delta_h).exp();
    Ok((spread, gain))
}

/// First-order condition for the limit-order depth at value difference
/// `delta = h(t, q-1) - h(t, q)`; strictly decreasing in the depth.
fn lo_foc(depth: f64, delta: f64, p: &ModelParams) -> f64 {
    let k = p.kappa_lo;
    1.0 - k * depth + 2.0 * k * p.lo_impact * p.lambda_lo * (-k * depth).exp() - k * delta
}

/// Running gain of a resting limit order at `depth`: fill intensity times
/// (depth - impact - value give-up).
fn lo_gain(depth: f64, delta_big: f64, p: &ModelParams) -> f64 {
    let fill = p.lambda_lo * (-p.kappa_lo * depth).exp();
    (depth - p.lo_impact * fill + delta_big) * fill
}

/// Optimal limit-order depth and running gain.
///
/// `delta_big = h(t, q-1) - h(t, q)`. The depth is the unique root of the
/// first-order condition, found by Newton from `1/kappa` with a guarded
/// bisection fallback on an expanding bracket.
pub fn lo_depth_and_value(delta_big: f64, p: &ModelParams) -> Result<(f64, f64), SolverError> {
    if !delta_big.is_finite() {
        return Err(SolverError::NonFinite(delta_big));
    }
    let k = p.kappa_lo;
    let g = |d: f64| lo_foc(d, delta_big, p);

    // Bracket the root; g is strictly decreasing so we need g(lo) > 0 > g(hi).
    let mut lo = 0.0;
    let mut hi = 2.0 / k;
    let mut width = 1.0 / k;
    while g(lo) <= 0.0 && lo > LO_BRACKET.0 {
        width *= 2.0;
        lo = (lo - width).max(LO_BRACKET.0);
    }
    let mut width = 1.0 / k;
    while g(hi) >= 0.0 && hi < LO_BRACKET.1 {
        width *= 2.0;
        hi = (hi + width).min(LO_BRACKET.1);
    }
    let (g_lo, g_hi) = (g(lo), g(hi));
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(SolverError::NoBracket {
            lo,
            hi,
            delta: delta_big,
            g_lo,
            g_hi,
        });
    }

    let mut x = 1.0 / k;
    if x <= lo || x >= hi {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..LO_MAX_ITER {
        let gx = g(x);
        if gx.abs() <= LO_ROOT_TOL {
            break;
        }
        if gx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dg = -k - 2.0 * k * k * p.lo_impact * p.lambda_lo * (-k * x).exp();
        let newton = x - gx / dg;
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((x, lo_gain(x, delta_big, p)))
}

/// Best immediate market order from inventory `q` given the same-time value
/// row `h_row` (indices 0..=q): maximum over sizes 0..=q of
/// `h_row[q - z] - xi z - alpha_M z^beta_M`, smallest maximizing size.
pub fn intervention(h_row: &[f64], q: usize, p: &ModelParams) -> (u32, f64) {
    debug_assert!(h_row.len() > q);
    let mut best_size = 0u32;
    let mut best_value = h_row[q];
    for z in 1..=q {
        let v = h_row[q - z] - p.impulse_cost(z as u32);
        if v > best_value {
            best_value = v;
            best_size = z as u32;
        }
    }
    (best_size, best_value)
}

/// One row of the backward sweep: values plus the per-inventory policy.
#[derive(Debug, Clone)]
pub struct StepRow {
    pub h: Vec<f64>,
    pub lo_depth: Vec<f64>,
    pub mm_spread: Vec<f64>,
    pub impulse_active: Vec<bool>,
    pub mo_size: Vec<u32>,
}

/// Advances the value one step backward in time, from the row at `t + dt`
/// (`h_next`) to the row at `t`, projecting onto the obstacle as the
/// inventory sweep proceeds upward so same-time post-impulse values are
/// available. Policies are read off the updated row.
pub fn step_backward(
    h_next: &[f64],
    t: f64,
    p: &ModelParams,
    grid: &GridSpec,
) -> Result<StepRow, SolverError> {
    let n_q = h_next.len();
    let dt = grid.dt;
    let qbar = p.ac_schedule(t)?;
    let mut h = vec![0.0; n_q];
    let mut impulse_active = vec![false; n_q];
    let mut mo_size = vec![0u32; n_q];
    h[0] = p.boundary_h_zero(t)?;

    for q in 1..n_q {
        let delta_big = h_next[q - 1] - h_next[q];
        let (depth, gain_lo) = lo_depth_and_value(delta_big, p)?;
        let mut intensity = p.lambda_lo * (-p.kappa_lo * depth).exp();
        let mut gain = gain_lo;
        if p.mm_enabled {
            let (spread, gain_mm) = mm_spread_and_value(-delta_big, p)?;
            intensity += p.lambda_mm * (-p.kappa_mm * spread).exp();
            gain += gain_mm;
        }
        if dt * intensity >= 1.0 {
            return Err(SolverError::CflViolation {
                t,
                q: q as u32,
                product: dt * intensity,
            });
        }
        let qf = q as f64;
        let candidate = h_next[q] + dt * (-p.penalty * (qf - qbar) * (qf - qbar) + gain);

        // Obstacle over strictly positive sizes; equality within tolerance
        // counts as binding, smallest size wins ties.
        let mut best_size = 0u32;
        let mut best_value = f64::NEG_INFINITY;
        for z in 1..=q {
            let v = h[q - z] - p.impulse_cost(z as u32);
            if v > best_value {
                best_value = v;
                best_size = z as u32;
            }
        }
        if best_value >= candidate - OBSTACLE_TOL {
            impulse_active[q] = true;
            mo_size[q] = best_size;
            h[q] = candidate.max(best_value);
        } else {
            h[q] = candidate;
        }
    }

    let (lo_depth, mm_spread) = policy_from_row(&h, p)?;
    Ok(StepRow {
        h,
        lo_depth,
        mm_spread,
        impulse_active,
        mo_size,
    })
}

/// Optimal depth/spread read off a same-time value row.
fn policy_from_row(h: &[f64], p: &ModelParams) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
    let n_q = h.len();
    let mut lo_depth = vec![0.0; n_q];
    let mut mm_spread = vec![0.0; n_q];
    for q in 1..n_q {
        let delta_big = h[q - 1] - h[q];
        lo_depth[q] = lo_depth_and_value(delta_big, p)?.0;
        if p.mm_enabled {
            mm_spread[q] = mm_spread_and_value(-delta_big, p)?.0;
        }
    }
    Ok((lo_depth, mm_spread))
}

/// Solves the full grid: terminal row from the terminal condition, q = 0
/// column from the closed-form boundary, interior rows by backward steps.
pub fn solve(p: &ModelParams, grid: &GridSpec) -> Result<(ValueGrid, PolicyGrid), SolverError> {
    let p = p.clone().checked()?;
    let n = grid.n_time_steps;
    let n_q = p.initial_inventory as usize + 1;
    let mut h = Grid2::<f64>::new(n + 1, n_q);
    let mut lo_depth = Grid2::<f64>::new(n + 1, n_q);
    let mut mm_spread = Grid2::<f64>::new(n + 1, n_q);
    let mut impulse_active = Grid2::<bool>::new(n + 1, n_q);
    let mut mo_size = Grid2::<u32>::new(n + 1, n_q);

    // Terminal row: the terminal condition itself, with the policy and the
    // obstacle read off it (the terminal condition is data, not projected).
    {
        let row = h.row_mut(n);
        for q in 0..n_q {
            row[q] = p.terminal_h(q as u32);
        }
        let (ld, ms) = policy_from_row(h.row(n), &p)?;
        lo_depth.row_mut(n).copy_from_slice(&ld);
        mm_spread.row_mut(n).copy_from_slice(&ms);
        for q in 1..n_q {
            let mut best_size = 0u32;
            let mut best_value = f64::NEG_INFINITY;
            for z in 1..=q {
                let v = h.at(n, q - z) - p.impulse_cost(z as u32);
                if v > best_value {
                    best_value = v;
                    best_size = z as u32;
                }
            }
            if best_value >= h.at(n, q) - OBSTACLE_TOL {
                impulse_active.row_mut(n)[q] = true;
                mo_size.row_mut(n)[q] = best_size;
            }
        }
    }

    for i in (0..n).rev() {
        let t = grid.time(i);
        let row = step_backward(h.row(i + 1), t, &p, grid)?;
        h.row_mut(i).copy_from_slice(&row.h);
        lo_depth.row_mut(i).copy_from_slice(&row.lo_depth);
        mm_spread.row_mut(i).copy_from_slice(&row.mm_spread);
        impulse_active.row_mut(i).copy_from_slice(&row.impulse_active);
        mo_size.row_mut(i).copy_from_slice(&row.mo_size);
    }

    let value = ValueGrid {
        h,
        grid: grid.clone(),
    };
    let policy = PolicyGrid {
        lo_depth,
        mm_spread: if p.mm_enabled { Some(mm_spread) } else { None },
        impulse_active,
        mo_size,
        grid: grid.clone(),
    };
    Ok((value, policy))
}
