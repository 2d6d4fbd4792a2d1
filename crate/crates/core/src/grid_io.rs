//! Solved-grid persistence: a self-describing text CSV and a compact
//! binary form with bit-exact round-tripping.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::params::{GridSpec, ModelParams};
use crate::solver::{Grid2, PolicyGrid, ValueGrid};

const MAGIC: &[u8; 8] = b"OLIQGRID";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GridIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a policy/value grid file (bad magic)")]
    BadMagic,
    #[error("unsupported file version {found} (expected {VERSION})")]
    VersionMismatch { found: u32 },
    #[error("file is truncated or internally inconsistent: {0}")]
    Corrupt(String),
}

fn put_f64(w: &mut impl Write, x: f64) -> io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn put_u64(w: &mut impl Write, x: u64) -> io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn put_u32(w: &mut impl Write, x: u32) -> io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn get_f64(r: &mut impl Read) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u8(r: &mut impl Read) -> io::Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn param_fields(p: &ModelParams) -> [f64; 13] {
    [
        p.horizon,
        p.sigma,
        p.lambda_lo,
        p.lambda_mm,
        p.kappa_lo,
        p.kappa_mm,
        p.lo_impact,
        p.mo_impact,
        p.mo_impact_exponent,
        p.bid_spread,
        p.terminal_impact,
        p.penalty,
        p.ac_urgency,
    ]
}

/// Writes the compact binary form.
pub fn write_solution_binary(
    w: &mut impl Write,
    p: &ModelParams,
    value: &ValueGrid,
    policy: &PolicyGrid,
) -> Result<(), GridIoError> {
    w.write_all(MAGIC)?;
    put_u32(w, VERSION)?;
    for f in param_fields(p) {
        put_f64(w, f)?;
    }
    put_u32(w, p.initial_inventory)?;
    w.write_all(&[u8::from(p.mm_enabled)])?;
    put_u64(w, value.grid.n_time_steps as u64)?;

    let write_f64s = |w: &mut dyn Write, g: &Grid2<f64>| -> io::Result<()> {
        for &x in g.data() {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    };
    write_f64s(w, &value.h)?;
    write_f64s(w, &policy.lo_depth)?;
    w.write_all(&[u8::from(policy.mm_spread.is_some())])?;
    if let Some(ms) = &policy.mm_spread {
        write_f64s(w, ms)?;
    }
    for &b in policy.impulse_active.data() {
        w.write_all(&[u8::from(b)])?;
    }
    for &z in policy.mo_size.data() {
        put_u32(w, z)?;
    }
    Ok(())
}

/// Reads the binary form, rejecting unknown versions.
pub fn read_solution_binary(
    r: &mut impl Read,
) -> Result<(ModelParams, ValueGrid, PolicyGrid), GridIoError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(GridIoError::BadMagic);
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(GridIoError::VersionMismatch { found: version });
    }
    let mut f = [0.0f64; 13];
    for x in f.iter_mut() {
        *x = get_f64(r)?;
    }
    let initial_inventory = get_u32(r)?;
    let mm_enabled = get_u8(r)? != 0;
    let p = ModelParams {
        horizon: f[0],
        initial_inventory,
        sigma: f[1],
        lambda_lo: f[2],
        lambda_mm: f[3],
        kappa_lo: f[4],
        kappa_mm: f[5],
        lo_impact: f[6],
        mo_impact: f[7],
        mo_impact_exponent: f[8],
        bid_spread: f[9],
        terminal_impact: f[10],
        penalty: f[11],
        ac_urgency: f[12],
        mm_enabled,
    };
    let n = get_u64(r)? as usize;
    let grid = GridSpec::new(p.horizon, n)
        .map_err(|e| GridIoError::Corrupt(e.to_string()))?;
    let n_rows = n + 1;
    let n_cols = initial_inventory as usize + 1;
    let count = n_rows * n_cols;

    fn read_f64s<R: Read>(
        r: &mut R,
        n_rows: usize,
        n_cols: usize,
    ) -> Result<Grid2<f64>, GridIoError> {
        let count = n_rows * n_cols;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            data.push(get_f64(r)?);
        }
        Ok(Grid2::from_data(n_rows, n_cols, data))
    }
    let h = read_f64s(r, n_rows, n_cols)?;
    let lo_depth = read_f64s(r, n_rows, n_cols)?;
    let mm_spread = if get_u8(r)? != 0 {
        Some(read_f64s(r, n_rows, n_cols)?)
    } else {
        None
    };
    let mut impulse = Vec::with_capacity(count);
    for _ in 0..count {
        impulse.push(get_u8(r)? != 0);
    }
    let mut mo = Vec::with_capacity(count);
    for _ in 0..count {
        mo.push(get_u32(r)?);
    }
    if mm_spread.is_some() != mm_enabled {
        return Err(GridIoError::Corrupt(
            "mm spread presence disagrees with mm_enabled".to_string(),
        ));
    }
    Ok((
        p,
        ValueGrid {
            h,
            grid: grid.clone(),
        },
        PolicyGrid {
            lo_depth,
            mm_spread,
            impulse_active: Grid2::from_data(n_rows, n_cols, impulse),
            mo_size: Grid2::from_data(n_rows, n_cols, mo),
            grid,
        },
    ))
}

/// Writes the text CSV form: a params/grid echo in header comments, then
/// one row per grid node with full-precision values.
pub fn write_solution_csv(
    w: &mut impl Write,
    p: &ModelParams,
    value: &ValueGrid,
    policy: &PolicyGrid,
) -> Result<(), GridIoError> {
    writeln!(w, "# columns: i (step), t (seconds), q (inventory units), h (cash), lo_depth (price), mm_spread (price), mo_size (inventory units), impulse (0/1)")?;
    writeln!(w, "# horizon = {}", p.horizon)?;
    writeln!(w, "# initial_inventory = {}", p.initial_inventory)?;
    writeln!(w, "# sigma = {}", p.sigma)?;
    writeln!(w, "# lambda_lo = {}", p.lambda_lo)?;
    writeln!(w, "# lambda_mm = {}", p.lambda_mm)?;
    writeln!(w, "# kappa_lo = {}", p.kappa_lo)?;
    writeln!(w, "# kappa_mm = {}", p.kappa_mm)?;
    writeln!(w, "# lo_impact = {}", p.lo_impact)?;
    writeln!(w, "# mo_impact = {}", p.mo_impact)?;
    writeln!(w, "# mo_impact_exponent = {}", p.mo_impact_exponent)?;
    writeln!(w, "# bid_spread = {}", p.bid_spread)?;
    writeln!(w, "# terminal_impact = {}", p.terminal_impact)?;
    writeln!(w, "# penalty = {}", p.penalty)?;
    writeln!(w, "# ac_urgency = {}", p.ac_urgency)?;
    writeln!(w, "# mm_enabled = {}", p.mm_enabled)?;
    writeln!(w, "# n_time_steps = {}", value.grid.n_time_steps)?;
    writeln!(w, "i,t,q,h,lo_depth,mm_spread,mo_size,impulse")?;
    let n_cols = value.h.n_cols();
    for i in 0..value.h.n_rows() {
        let t = value.grid.time(i);
        for q in 0..n_cols {
            let mm = policy
                .mm_spread
                .as_ref()
                .map_or(String::new(), |ms| format!("{}", ms.at(i, q)));
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                i,
                t,
                q,
                value.h.at(i, q),
                policy.lo_depth.at(i, q),
                mm,
                policy.mo_size.at(i, q),
                u8::from(policy.impulse_active.at(i, q)),
            )?;
        }
    }
    Ok(())
}
