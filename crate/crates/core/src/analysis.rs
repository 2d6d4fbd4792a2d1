//! Read-only extraction of reportable artifacts from a solved policy:
//! the no-fill market-order schedule, market-order size statistics, and
//! depth/spread slices, plus their CSV renderings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{GridSpec, ModelParams, ParamsError};
use crate::solver::PolicyGrid;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("inventory {0} outside the policy grid")]
    InventoryOutOfRange(u32),
    #[error("policy has no market-making spreads (mm_enabled = false)")]
    MmDisabled,
}

/// One market order on the no-fill trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoEvent {
    pub tau: f64,
    pub q_before: u32,
    pub size: u32,
}

/// Market-order schedule when no limit-order or market-making fill arrives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoSchedule {
    pub entries: Vec<MoEvent>,
}

impl MoSchedule {
    /// Inventory level immediately after the last entry (residual at the
    /// horizon is liquidated by the terminal term).
    pub fn final_inventory(&self, q0: u32) -> u32 {
        self.entries
            .last()
            .map_or(q0, |e| e.q_before - e.size)
    }

    /// First time inventory drops strictly below `q`, per level
    /// `q = q0 .. 1`; levels never reached get the horizon. The extra
    /// trailing entry for `q = 0` is always the horizon.
    pub fn first_drop_times(&self, q0: u32, horizon: f64) -> Vec<f64> {
        let mut taus = vec![horizon; q0 as usize + 1];
        for e in &self.entries {
            let after = e.q_before - e.size;
            for q in (after + 1)..=e.q_before {
                let slot = (q0 - q) as usize;
                if taus[slot] >= horizon {
                    taus[slot] = e.tau;
                }
            }
        }
        taus
    }
}

/// Walks forward from `(t = 0, q = q0)` executing the stored market-order
/// policy at the first grid time where the obstacle binds, at most one
/// order per grid time.
pub fn no_fill_mo_schedule(policy: &PolicyGrid, grid: &GridSpec) -> MoSchedule {
    let mut entries = Vec::new();
    let mut q = policy.max_inventory();
    for i in 0..=grid.n_time_steps {
        if q == 0 {
            break;
        }
        if policy.impulse_active.at(i, q as usize) {
            let size = policy.mo_size.at(i, q as usize);
            entries.push(MoEvent {
                tau: grid.time(i),
                q_before: q,
                size,
            });
            q -= size;
        }
    }
    MoSchedule { entries }
}

/// Summary statistics of the optimal market-order size over all inventory
/// levels at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoSizeStats {
    pub time: f64,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

/// Percentile with linear interpolation between order statistics.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Statistics of `mo_size(t, q)` over `q = 0 ..= q0` at each requested time
/// (zero where the obstacle is not binding). Standard deviation uses the
/// sample convention (divisor count - 1).
pub fn mo_size_stats(
    policy: &PolicyGrid,
    grid: &GridSpec,
    times: &[f64],
) -> Result<Vec<MoSizeStats>, AnalysisError> {
    let q0 = policy.max_inventory() as usize;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let i = grid.index_of(t)?;
        let mut sizes: Vec<f64> = (0..=q0)
            .map(|q| f64::from(policy.mo_size.at(i, q)))
            .collect();
        sizes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sizes.len();
        let mean = sizes.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            sizes.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        out.push(MoSizeStats {
            time: t,
            count: n,
            mean,
            std: var.sqrt(),
            min: sizes[0],
            q25: percentile(&sizes, 0.25),
            q50: percentile(&sizes, 0.50),
            q75: percentile(&sizes, 0.75),
            max: sizes[n - 1],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SliceQuantity {
    LoDepth,
    MmSpread,
    MoSize,
}

/// A times x inventories rectangle of one policy quantity, looked up
/// exactly on grid nodes (no interpolation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySlice {
    pub quantity: SliceQuantity,
    pub times: Vec<f64>,
    pub inventories: Vec<u32>,
    /// Row-major: `values[time_idx][inventory_idx]`.
    pub values: Vec<Vec<f64>>,
}

pub fn policy_slice(
    policy: &PolicyGrid,
    grid: &GridSpec,
    quantity: SliceQuantity,
    times: &[f64],
    inventories: &[u32],
) -> Result<PolicySlice, AnalysisError> {
    let q0 = policy.max_inventory();
    for &q in inventories {
        if q > q0 {
            return Err(AnalysisError::InventoryOutOfRange(q));
        }
    }
    let mm = match quantity {
        SliceQuantity::MmSpread => {
            Some(policy.mm_spread.as_ref().ok_or(AnalysisError::MmDisabled)?)
        }
        _ => None,
    };
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let i = grid.index_of(t)?;
        let row: Vec<f64> = inventories
            .iter()
            .map(|&q| match quantity {
                SliceQuantity::LoDepth => policy.lo_depth.at(i, q as usize),
                SliceQuantity::MmSpread => mm.unwrap().at(i, q as usize),
                SliceQuantity::MoSize => f64::from(policy.mo_size.at(i, q as usize)),
            })
            .collect();
        values.push(row);
    }
    Ok(PolicySlice {
        quantity,
        times: times.to_vec(),
        inventories: inventories.to_vec(),
        values,
    })
}

/// Default report times and inventory levels for the slice tables.
pub const REPORT_TIMES: [f64; 5] = [10.0, 20.0, 30.0, 40.0, 50.0];
pub const REPORT_INVENTORIES: [u32; 5] = [1, 3, 5, 7, 9];

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

/// CSV of first-drop market-order times, one row per strategy label,
/// columns from `q0` down to 0.
pub fn table1_csv(rows: &[(String, Vec<f64>)], q0: u32) -> String {
    let mut s = String::from("# tau: seconds; q: inventory units\n");
    s.push_str("strategy");
    for q in (0..=q0).rev() {
        s.push_str(&format!(",q={q}"));
    }
    s.push('\n');
    for (label, taus) in rows {
        s.push_str(label);
        for tau in taus {
            s.push_str(&format!(",{:.2}", tau));
        }
        s.push('\n');
    }
    s
}

pub fn table2_csv(stats: &[MoSizeStats]) -> String {
    let mut s =
        String::from("# time: seconds; sizes: inventory units; std: sample convention (n-1)\n");
    s.push_str("time,count,mean,std,min,25%,50%,75%,max\n");
    for r in stats {
        s.push_str(&format!(
            "{:.0},{},{},{},{},{},{},{},{}\n",
            r.time,
            r.count,
            fmt6(r.mean),
            fmt6(r.std),
            fmt6(r.min),
            fmt6(r.q25),
            fmt6(r.q50),
            fmt6(r.q75),
            fmt6(r.max),
        ));
    }
    s
}

/// Tables 3/4 layout: rows are times, columns inventory levels.
pub fn slice_csv(slice: &PolicySlice, unit: &str) -> String {
    let mut s = format!("# time: seconds; values: {unit}\n");
    s.push('t');
    for q in &slice.inventories {
        s.push_str(&format!(",q={q}"));
    }
    s.push('\n');
    for (ti, &t) in slice.times.iter().enumerate() {
        s.push_str(&format!("{t:.0}"));
        for v in &slice.values[ti] {
            s.push(',');
            s.push_str(&fmt6(*v));
        }
        s.push('\n');
    }
    s
}

/// Long-format data behind the schedule figure: the benchmark curve plus
/// the no-fill inventory step function of this policy.
pub fn figure2_csv(
    p: &ModelParams,
    schedule: &MoSchedule,
    label: &str,
) -> Result<String, AnalysisError> {
    let mut s = String::from("# series,t (seconds),value (inventory units)\n");
    s.push_str("series,t,value\n");
    let samples = (p.horizon / 0.1).round() as usize;
    for k in 0..=samples {
        let t = p.horizon * k as f64 / samples as f64;
        s.push_str(&format!("ac,{:.1},{}\n", t, fmt6(p.ac_schedule(t)?)));
    }
    let mut q = f64::from(p.initial_inventory);
    s.push_str(&format!("{label},0.0,{}\n", fmt6(q)));
    for e in &schedule.entries {
        s.push_str(&format!("{label},{:.2},{}\n", e.tau, fmt6(q)));
        q = f64::from(e.q_before - e.size);
        s.push_str(&format!("{label},{:.2},{}\n", e.tau, fmt6(q)));
    }
    Ok(s)
}

/// Long-format depth/spread curves for odd inventory levels, sampled every
/// 0.1 time units.
pub fn figure3_csv(policy: &PolicyGrid, grid: &GridSpec) -> Result<String, AnalysisError> {
    let mut s = String::from("# series,t (seconds),value (price units)\n");
    s.push_str("series,t,value\n");
    let q0 = policy.max_inventory();
    let samples = (grid.horizon / 0.1).round() as usize;
    let levels: Vec<u32> = (1..=q0).step_by(2).collect();
    for &q in &levels {
        for k in 0..=samples {
            let t = grid.horizon * k as f64 / samples as f64;
            let i = grid.index_of(t)?;
            s.push_str(&format!(
                "lo_depth_q{q},{:.1},{}\n",
                t,
                fmt6(policy.lo_depth.at(i, q as usize))
            ));
            if let Some(mm) = &policy.mm_spread {
                s.push_str(&format!(
                    "mm_spread_q{q},{:.1},{}\n",
                    t,
                    fmt6(mm.at(i, q as usize))
                ));
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve;

    #[test]
    fn empty_schedule_for_zero_inventory() {
        let mut params = ModelParams::default();
        params.initial_inventory = 0;
        let grid = GridSpec::new(60.0, 100).unwrap();
        let (_, policy) = solve(&params, &grid).unwrap();
        let schedule = no_fill_mo_schedule(&policy, &grid);
        assert!(schedule.entries.is_empty());
    }

    #[test]
    fn schedule_invariants_on_reference_params() {
        let params = ModelParams::default();
        let grid = GridSpec::new(60.0, 1200).unwrap();
        let (_, policy) = solve(&params, &grid).unwrap();
        let schedule = no_fill_mo_schedule(&policy, &grid);
        assert!(!schedule.entries.is_empty());
        let mut prev_tau = f64::NEG_INFINITY;
        let mut q = params.initial_inventory;
        for e in &schedule.entries {
            assert!(e.tau > prev_tau, "taus not strictly increasing");
            assert_eq!(e.q_before, q);
            assert!(e.size >= 1 && e.size <= q);
            q = e.q_before - e.size;
            prev_tau = e.tau;
        }
        let taus = schedule.first_drop_times(params.initial_inventory, params.horizon);
        assert_eq!(taus.len(), 11);
        // Drop times are non-decreasing as inventory falls.
        for w in taus.windows(2) {
            assert!(w[0] <= w[1] + 1e-12);
        }
    }

    #[test]
    fn stats_all_zero_row() {
        let mut params = ModelParams::default();
        params.penalty = 0.0; // nothing forces early selling
        let grid = GridSpec::new(60.0, 600).unwrap();
        let (_, policy) = solve(&params, &grid).unwrap();
        let stats = mo_size_stats(&policy, &grid, &[1.0]).unwrap();
        assert_eq!(stats[0].count, 11);
        assert_eq!(stats[0].mean, 0.0);
        assert_eq!(stats[0].std, 0.0);
        assert!(mo_size_stats(&policy, &grid, &[-1.0]).is_err());
        assert!(mo_size_stats(&policy, &grid, &[61.0]).is_err());
    }

    #[test]
    fn percentile_linear_interpolation() {
        let v = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.5, 2.0, 3.0];
        assert_eq!(percentile(&v, 0.0), 0.0);
        assert_eq!(percentile(&v, 1.0), 3.0);
        assert_eq!(percentile(&v, 0.5), 1.0);
        // position 7.5 between 1.0 and 1.5
        assert_eq!(percentile(&v, 0.75), 1.25);
    }

    #[test]
    fn slice_exact_lookup_and_errors() {
        let params = ModelParams::default();
        let grid = GridSpec::new(60.0, 600).unwrap();
        let (_, policy) = solve(&params, &grid).unwrap();
        let s = policy_slice(&policy, &grid, SliceQuantity::LoDepth, &[10.0], &[1, 9]).unwrap();
        assert_eq!(s.values.len(), 1);
        assert_eq!(s.values[0].len(), 2);
        let i = grid.index_of(10.0).unwrap();
        assert_eq!(s.values[0][0], policy.lo_depth.at(i, 1));
        assert!(s.values[0].iter().all(|v| v.is_finite()));
        assert!(
            policy_slice(&policy, &grid, SliceQuantity::LoDepth, &[10.0], &[11]).is_err()
        );

        let (_, policy_no_mm) = solve(&params.without_mm(), &grid).unwrap();
        assert!(matches!(
            policy_slice(&policy_no_mm, &grid, SliceQuantity::MmSpread, &[10.0], &[1]),
            Err(AnalysisError::MmDisabled)
        ));
    }

    #[test]
    fn csv_renderings_are_stable() {
        let stats = vec![MoSizeStats {
            time: 10.0,
            count: 11,
            mean: 0.545455,
            std: 0.687552,
            min: 0.0,
            q25: 0.0,
            q50: 0.0,
            q75: 1.0,
            max: 2.0,
        }];
        let csv = table2_csv(&stats);
        assert!(csv.contains("10,11,0.545455,0.687552,0.000000,0.000000,0.000000,1.000000,2.000000"));
        let t1 = table1_csv(&[("lo_mo".to_string(), vec![1.47, 60.0])], 1);
        assert!(t1.contains("strategy,q=1,q=0"));
        assert!(t1.contains("lo_mo,1.47,60.00"));
    }
}
