//! Command implementations behind the binary: solve, tables, simulate,
//! and the combined run. The binary itself only parses arguments and maps
//! errors to exit codes.

use std::fs;
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::analysis::{
    figure2_csv, figure3_csv, mo_size_stats, no_fill_mo_schedule, policy_slice, slice_csv,
    table1_csv, table2_csv, AnalysisError, SliceQuantity, REPORT_INVENTORIES, REPORT_TIMES,
};
use crate::grid_io::{read_solution_binary, write_solution_binary, write_solution_csv, GridIoError};
use crate::manifest::RunManifest;
use crate::params::{ConfigError, GridSpec, ModelParams, ParamsError, RunConfig};
use crate::sim::{run_experiment, SimError, StrategyKind};
use crate::solver::{solve, PolicyGrid, SolverError, ValueGrid};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    /// Scripting-friendly exit codes: 2 for configuration/input problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ParamsError> for CliError {
    fn from(e: ParamsError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Params(p) => CliError::Config(p.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Params(p) => CliError::Config(p.to_string()),
            SimError::GridMismatch | SimError::InventoryMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            SimError::Solver(s) => s.into(),
        }
    }
}

impl From<GridIoError> for CliError {
    fn from(e: GridIoError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Shared flag overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    pub no_mm: bool,
}

pub fn load_config(path: Option<&Path>, over: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(dt) = over.dt {
        cfg.n_time_steps = GridSpec::with_dt(cfg.params.horizon, dt)?.n_time_steps;
    }
    if let Some(n) = over.n_paths {
        cfg.sim.n_paths = n;
    }
    if let Some(seed) = over.seed {
        cfg.sim.seed = seed;
    }
    if over.no_mm {
        cfg.params.mm_enabled = false;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))
}

fn solution_bytes(
    p: &ModelParams,
    value: &ValueGrid,
    policy: &PolicyGrid,
) -> Result<(Vec<u8>, Vec<u8>), CliError> {
    let mut bin = Vec::new();
    write_solution_binary(&mut bin, p, value, policy).map_err(|e| CliError::Config(e.to_string()))?;
    let mut csv = Vec::new();
    write_solution_csv(&mut csv, p, value, policy).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((bin, csv))
}

/// Solves the grid and writes `solution.bin`, `solution.csv`, and the
/// manifest into `out_dir`.
pub fn cmd_solve(
    config_path: Option<&Path>,
    out_dir: &Path,
    over: &Overrides,
) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let cfg = load_config(config_path, over)?;
    let grid = cfg.grid()?;
    ensure_dir(out_dir)?;
    let (value, policy) = solve(&cfg.params, &grid)?;
    let (bin, csv) = solution_bytes(&cfg.params, &value, &policy)?;
    let mut manifest = RunManifest::new("solve", cfg, grid);
    manifest.emit(out_dir, "solution.bin", &bin)?;
    manifest.emit(out_dir, "solution.csv", &csv)?;
    Ok(manifest.finish(out_dir, start.elapsed().as_secs_f64())?)
}

fn read_solution(path: &Path) -> Result<(ModelParams, ValueGrid, PolicyGrid), CliError> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(read_solution_binary(&mut bytes.as_slice())?)
}

fn strategy_label(p: &ModelParams) -> &'static str {
    if p.mm_enabled {
        StrategyKind::LoMoMm.label()
    } else {
        StrategyKind::LoMo.label()
    }
}

fn emit_tables(
    manifest: &mut RunManifest,
    out_dir: &Path,
    solutions: &[(ModelParams, PolicyGrid)],
) -> Result<(), CliError> {
    let mut table1_rows = Vec::new();
    for (p, policy) in solutions {
        let grid = &policy.grid;
        let schedule = no_fill_mo_schedule(policy, grid);
        table1_rows.push((
            strategy_label(p).to_string(),
            schedule.first_drop_times(p.initial_inventory, p.horizon),
        ));
    }
    let (p, policy) = &solutions[0];
    let grid = &policy.grid;
    manifest.emit(
        out_dir,
        "table1.csv",
        table1_csv(&table1_rows, p.initial_inventory).as_bytes(),
    )?;

    let stats = mo_size_stats(policy, grid, &REPORT_TIMES)?;
    manifest.emit(out_dir, "table2.csv", table2_csv(&stats).as_bytes())?;

    let lo = policy_slice(
        policy,
        grid,
        SliceQuantity::LoDepth,
        &REPORT_TIMES,
        &REPORT_INVENTORIES,
    )?;
    manifest.emit(
        out_dir,
        "table3.csv",
        slice_csv(&lo, "limit-order depth (price units)").as_bytes(),
    )?;
    if p.mm_enabled {
        let mm = policy_slice(
            policy,
            grid,
            SliceQuantity::MmSpread,
            &REPORT_TIMES,
            &REPORT_INVENTORIES,
        )?;
        manifest.emit(
            out_dir,
            "table4.csv",
            slice_csv(&mm, "market-making spread (price units)").as_bytes(),
        )?;
    }

    let schedule = no_fill_mo_schedule(policy, grid);
    manifest.emit(
        out_dir,
        "figure2.csv",
        figure2_csv(p, &schedule, strategy_label(p))?.as_bytes(),
    )?;
    manifest.emit(out_dir, "figure3.csv", figure3_csv(policy, grid)?.as_bytes())?;
    Ok(())
}

/// Reads a serialized solution and emits the report tables and figure data.
pub fn cmd_tables(policy_path: &Path, out_dir: &Path) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let (p, value, policy) = read_solution(policy_path)?;
    ensure_dir(out_dir)?;
    let cfg = RunConfig {
        params: p.clone(),
        n_time_steps: value.grid.n_time_steps,
        sim: Default::default(),
    };
    let mut manifest = RunManifest::new("tables", cfg, value.grid.clone());
    emit_tables(&mut manifest, out_dir, &[(p, policy)])?;
    Ok(manifest.finish(out_dir, start.elapsed().as_secs_f64())?)
}

/// Runs the strategy comparison under the config's simulation settings,
/// using the model and grid recorded in the policy file, and writes the
/// aggregated report as JSON.
pub fn cmd_simulate(
    config_path: Option<&Path>,
    policy_path: &Path,
    out_dir: &Path,
    over: &Overrides,
) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let cfg = load_config(config_path, over)?;
    let (p, value, _policy) = read_solution(policy_path)?;
    ensure_dir(out_dir)?;
    let grid = value.grid.clone();
    let strategies = [
        StrategyKind::AcBenchmark,
        StrategyKind::LoMo,
        StrategyKind::LoMoMm,
    ];
    let used = if p.mm_enabled {
        &strategies[..]
    } else {
        &strategies[..2]
    };
    let report = run_experiment(&p, &grid, &cfg.sim, used)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let run_cfg = RunConfig {
        params: p,
        n_time_steps: grid.n_time_steps,
        sim: cfg.sim,
    };
    let mut manifest = RunManifest::new("simulate", run_cfg, grid);
    manifest.emit(out_dir, "simulation.json", json.as_bytes())?;
    Ok(manifest.finish(out_dir, start.elapsed().as_secs_f64())?)
}

/// Full pipeline: solve with and without the market-making channel, emit
/// every table (both rows of the timing table), and run the three-way
/// simulation comparison.
pub fn cmd_all(
    config_path: Option<&Path>,
    out_dir: &Path,
    over: &Overrides,
) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let cfg = load_config(config_path, over)?;
    let grid = cfg.grid()?;
    ensure_dir(out_dir)?;

    let p_mm = ModelParams {
        mm_enabled: true,
        ..cfg.params.clone()
    };
    let p_no_mm = cfg.params.without_mm();
    let (value_mm, policy_mm) = solve(&p_mm, &grid)?;
    let (value_no_mm, policy_no_mm) = solve(&p_no_mm, &grid)?;

    let mut manifest = RunManifest::new("all", cfg.clone(), grid.clone());
    let (bin, csv) = solution_bytes(&p_mm, &value_mm, &policy_mm)?;
    manifest.emit(out_dir, "solution.bin", &bin)?;
    manifest.emit(out_dir, "solution.csv", &csv)?;
    let (bin, csv) = solution_bytes(&p_no_mm, &value_no_mm, &policy_no_mm)?;
    manifest.emit(out_dir, "solution_no_mm.bin", &bin)?;
    manifest.emit(out_dir, "solution_no_mm.csv", &csv)?;

    emit_tables(
        &mut manifest,
        out_dir,
        &[(p_mm.clone(), policy_mm), (p_no_mm, policy_no_mm)],
    )?;

    let report = run_experiment(
        &p_mm,
        &grid,
        &cfg.sim,
        &[
            StrategyKind::AcBenchmark,
            StrategyKind::LoMo,
            StrategyKind::LoMoMm,
        ],
    )?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    manifest.emit(out_dir, "simulation.json", json.as_bytes())?;
    Ok(manifest.finish(out_dir, start.elapsed().as_secs_f64())?)
}
