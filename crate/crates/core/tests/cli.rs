//! End-to-end checks of the command implementations: artifact layout,
//! manifest integrity, reproducibility, and exit-code mapping.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use optliq::cli::{cmd_simulate, cmd_solve, cmd_tables, CliError, Overrides};
use optliq::sim::ExperimentReport;

/// Small but CFL-stable configuration so the full pipeline runs in
/// seconds.
const SMALL_CONF: &str = "\
horizon = 60
initial_inventory = 10
n_time_steps = 300
n_paths = 200
seed = 9
s0 = 100.0
";

fn write_conf(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

#[test]
fn solve_tables_simulate_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(tmp.path(), SMALL_CONF);
    let out = tmp.path().join("out");

    let manifest = cmd_solve(Some(&conf), &out, &Overrides::default()).unwrap();
    for name in ["solution.bin", "solution.csv"] {
        let bytes = fs::read(out.join(name)).unwrap();
        let entry = manifest
            .outputs
            .iter()
            .find(|o| o.name == name)
            .unwrap_or_else(|| panic!("{name} missing from manifest"));
        assert_eq!(entry.bytes, bytes.len() as u64);
        assert_eq!(entry.sha256, sha256_hex(&bytes));
    }
    assert!(out.join("manifest.json").is_file());

    let tables_out = tmp.path().join("tables");
    cmd_tables(&out.join("solution.bin"), &tables_out).unwrap();
    for name in [
        "table1.csv",
        "table2.csv",
        "table3.csv",
        "table4.csv",
        "figure2.csv",
        "figure3.csv",
    ] {
        assert!(tables_out.join(name).is_file(), "{name} not written");
    }
    let table1 = fs::read_to_string(tables_out.join("table1.csv")).unwrap();
    assert!(table1.contains("lo_mo_mm"));

    let sim_out = tmp.path().join("sim");
    cmd_simulate(
        Some(&conf),
        &out.join("solution.bin"),
        &sim_out,
        &Overrides::default(),
    )
    .unwrap();
    let report: ExperimentReport =
        serde_json::from_slice(&fs::read(sim_out.join("simulation.json")).unwrap()).unwrap();
    let labels: Vec<_> = report
        .strategies
        .iter()
        .map(|r| r.strategy.label())
        .collect();
    assert_eq!(labels, ["ac", "lo_mo", "lo_mo_mm"]);
    assert_eq!(report.sim.n_paths, 200);
}

#[test]
fn no_mm_solve_omits_mm_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(tmp.path(), SMALL_CONF);
    let out = tmp.path().join("out");
    cmd_solve(
        Some(&conf),
        &out,
        &Overrides {
            no_mm: true,
            ..Default::default()
        },
    )
    .unwrap();

    let tables_out = tmp.path().join("tables");
    cmd_tables(&out.join("solution.bin"), &tables_out).unwrap();
    assert!(tables_out.join("table3.csv").is_file());
    assert!(!tables_out.join("table4.csv").exists());

    let sim_out = tmp.path().join("sim");
    cmd_simulate(
        Some(&conf),
        &out.join("solution.bin"),
        &sim_out,
        &Overrides::default(),
    )
    .unwrap();
    let report: ExperimentReport =
        serde_json::from_slice(&fs::read(sim_out.join("simulation.json")).unwrap()).unwrap();
    let labels: Vec<_> = report
        .strategies
        .iter()
        .map(|r| r.strategy.label())
        .collect();
    assert_eq!(labels, ["ac", "lo_mo"]);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(tmp.path(), SMALL_CONF);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    cmd_solve(Some(&conf), &a, &Overrides::default()).unwrap();
    cmd_solve(Some(&conf), &b, &Overrides::default()).unwrap();
    assert_eq!(
        fs::read(a.join("solution.bin")).unwrap(),
        fs::read(b.join("solution.bin")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("solution.csv")).unwrap(),
        fs::read(b.join("solution.csv")).unwrap()
    );

    let (sa, sb) = (tmp.path().join("sa"), tmp.path().join("sb"));
    cmd_simulate(Some(&conf), &a.join("solution.bin"), &sa, &Overrides::default()).unwrap();
    cmd_simulate(Some(&conf), &b.join("solution.bin"), &sb, &Overrides::default()).unwrap();
    assert_eq!(
        fs::read(sa.join("simulation.json")).unwrap(),
        fs::read(sb.join("simulation.json")).unwrap()
    );
}

#[test]
fn zero_inventory_solves() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(
        tmp.path(),
        "initial_inventory = 0\nn_time_steps = 300\nn_paths = 50\n",
    );
    let out = tmp.path().join("out");
    cmd_solve(Some(&conf), &out, &Overrides::default()).unwrap();
    assert!(out.join("solution.bin").is_file());
}

#[test]
fn cfl_violation_is_a_numerical_error() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(tmp.path(), SMALL_CONF);
    let err = cmd_solve(
        Some(&conf),
        &tmp.path().join("out"),
        &Overrides {
            dt: Some(6.0),
            ..Default::default()
        },
    )
    .unwrap_err();
    assert!(matches!(err, CliError::Numerical(_)));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn config_problems_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_conf(tmp.path(), "not_a_key = 1\n");
    let err = cmd_solve(Some(&bad), &tmp.path().join("out"), &Overrides::default()).unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
    assert_eq!(err.exit_code(), 2);

    let missing = tmp.path().join("nope.conf");
    let err = cmd_solve(
        Some(&missing),
        &tmp.path().join("out"),
        &Overrides::default(),
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
