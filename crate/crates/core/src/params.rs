//! Model constants, the Almgren-Chriss benchmark schedule, and the
//! closed-form terminal/boundary values of the reduced value function.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: cannot parse value `{value}` for key `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("line {line}: expected `name = value`")]
    BadLine { line: usize },
    #[error(transparent)]
    Params(#[from] ParamsError),
}

/// All market/model constants in one validated record.
///
/// Units follow the reduced model: prices in price units, time in seconds,
/// inventory in integer units of the asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Liquidation horizon T.
    pub horizon: f64,
    /// Initial inventory Q0 to be sold.
    pub initial_inventory: u32,
    /// Mid-price volatility (arithmetic Brownian motion).
    pub sigma: f64,
    /// LO fill intensity at zero depth.
    pub lambda_lo: f64,
    /// MM fill intensity at zero spread.
    pub lambda_mm: f64,
    /// Exponential decay of LO fill intensity in depth.
    pub kappa_lo: f64,
    /// Exponential decay of MM fill intensity in spread.
    pub kappa_mm: f64,
    /// Market impact per unit of LO fill intensity.
    pub lo_impact: f64,
    /// Market-order impact scale.
    pub mo_impact: f64,
    /// Power on market-order size in the impact term.
    pub mo_impact_exponent: f64,
    /// Distance from mid to best bid.
    pub bid_spread: f64,
    /// Terminal liquidation impact per inventory unit.
    pub terminal_impact: f64,
    /// Penalty weight on squared deviation from the benchmark schedule.
    pub penalty: f64,
    /// Almgren-Chriss urgency (decay rate of the benchmark schedule).
    pub ac_urgency: f64,
    /// When false the MM channel is dropped entirely (LO/MO-only strategy).
    pub mm_enabled: bool,
}

impl Default for ModelParams {
    /// Reference parameter set used throughout the numerical experiments.
    fn default() -> Self {
        Self {
            horizon: 60.0,
            initial_inventory: 10,
            sigma: 0.01,
            lambda_lo: 50.0 / 60.0,
            lambda_mm: 60.0 / 60.0,
            kappa_lo: 100.0,
            kappa_mm: 100.0,
            lo_impact: 0.005,
            mo_impact: 0.0001,
            mo_impact_exponent: 1.5,
            bid_spread: 0.01,
            terminal_impact: 0.0001,
            penalty: 0.001,
            ac_urgency: 0.1,
            mm_enabled: true,
        }
    }
}

impl ModelParams {
    /// Validates every invariant, returning the record unchanged on success.
    ///
    /// Construction paths (config loading, CLI) go through this so that
    /// violations are rejected before any numerical code runs.
    pub fn checked(self) -> Result<Self, ParamsError> {
        let err = |m: &str| Err(ParamsError::Invalid(m.to_string()));
        if !(self.horizon > 0.0) {
            return err("horizon must be > 0");
        }
        if !(self.sigma >= 0.0) {
            return err("sigma must be >= 0");
        }
        if !(self.lambda_lo > 0.0) {
            return err("lambda_lo must be > 0");
        }
        if !(self.lambda_mm > 0.0) {
            return err("lambda_mm must be > 0");
        }
        if !(self.kappa_lo > 0.0) {
            return err("kappa_lo must be > 0");
        }
        if !(self.kappa_mm > 0.0) {
            return err("kappa_mm must be > 0");
        }
        if !(self.lo_impact >= 0.0) {
            return err("lo_impact must be >= 0");
        }
        if !(self.mo_impact >= 0.0) {
            return err("mo_impact must be >= 0");
        }
        if !(self.mo_impact_exponent >= 1.0) {
            return err("mo_impact_exponent must be >= 1");
        }
        if !(self.bid_spread >= 0.0) {
            return err("bid_spread must be >= 0");
        }
        if !(self.terminal_impact >= 0.0) {
            return err("terminal_impact must be >= 0");
        }
        if !(self.penalty >= 0.0) {
            return err("penalty must be >= 0");
        }
        if !(self.ac_urgency > 0.0) {
            return err("ac_urgency must be > 0");
        }
        Ok(self)
    }

    /// LO/MO-only variant: same constants with the MM channel dropped.
    pub fn without_mm(&self) -> Self {
        Self {
            mm_enabled: false,
            ..self.clone()
        }
    }

    /// Cash cost of an immediate market order of `size` units: crossing the
    /// bid spread plus power-law impact.
    pub fn impulse_cost(&self, size: u32) -> f64 {
        let z = f64::from(size);
        self.bid_spread * z + self.mo_impact * z.powf(self.mo_impact_exponent)
    }

    /// Almgren-Chriss benchmark inventory at time `t`:
    /// `Q0 sinh(gamma (T - t)) / sinh(gamma T)`.
    pub fn ac_schedule(&self, t: f64) -> Result<f64, ParamsError> {
        self.check_time(t)?;
        let g = self.ac_urgency;
        Ok(f64::from(self.initial_inventory) * (g * (self.horizon - t)).sinh()
            / (g * self.horizon).sinh())
    }

    /// Terminal value of the reduced value function:
    /// `h(T, q) = -q (xi + alpha q) - alpha_M q^beta_M`.
    pub fn terminal_h(&self, q: u32) -> f64 {
        debug_assert!(q <= self.initial_inventory);
        let qf = f64::from(q);
        -qf * (self.bid_spread + self.terminal_impact * qf)
            - self.mo_impact * qf.powf(self.mo_impact_exponent)
    }

    /// Zero-inventory boundary `h(t, 0) = -phi * int_t^T qbar_s^2 ds`,
    /// using the closed-form antiderivative of sinh^2.
    pub fn boundary_h_zero(&self, t: f64) -> Result<f64, ParamsError> {
        self.check_time(t)?;
        let g = self.ac_urgency;
        let tau = self.horizon - t;
        let q0 = f64::from(self.initial_inventory);
        let scale = self.penalty * q0 * q0 / (g * self.horizon).sinh().powi(2);
        Ok(-scale * ((2.0 * g * tau).sinh() - 2.0 * g * tau) / (4.0 * g))
    }

    fn check_time(&self, t: f64) -> Result<(), ParamsError> {
        if t < 0.0 || t > self.horizon || !t.is_finite() {
            return Err(ParamsError::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }
}

/// Uniform time grid over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_time_steps: usize,
    pub dt: f64,
    pub horizon: f64,
}

impl GridSpec {
    pub fn new(horizon: f64, n_time_steps: usize) -> Result<Self, ParamsError> {
        if n_time_steps == 0 || !(horizon > 0.0) {
            return Err(ParamsError::Invalid(
                "grid needs horizon > 0 and at least one time step".to_string(),
            ));
        }
        Ok(Self {
            n_time_steps,
            dt: horizon / n_time_steps as f64,
            horizon,
        })
    }

    /// Grid with step closest to `dt_target`.
    pub fn with_dt(horizon: f64, dt_target: f64) -> Result<Self, ParamsError> {
        if !(dt_target > 0.0) {
            return Err(ParamsError::Invalid("dt must be > 0".to_string()));
        }
        let n = (horizon / dt_target).round().max(1.0) as usize;
        Self::new(horizon, n)
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_time_steps {
            self.horizon
        } else {
            i as f64 * self.dt
        }
    }

    /// Index of the grid time nearest `t`.
    pub fn index_of(&self, t: f64) -> Result<usize, ParamsError> {
        if t < 0.0 || t > self.horizon || !t.is_finite() {
            return Err(ParamsError::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(((t / self.dt).round() as usize).min(self.n_time_steps))
    }
}

/// Simulation settings read from the same flat config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Initial mid price.
    pub s0: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            seed: 1,
            s0: 100.0,
        }
    }
}

/// Full run configuration: model, grid, and simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: ModelParams,
    pub n_time_steps: usize,
    pub sim: SimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            n_time_steps: 6000,
            sim: SimConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<GridSpec, ParamsError> {
        GridSpec::new(self.params.horizon, self.n_time_steps)
    }

    /// Parses the flat `name = value` format (one assignment per line,
    /// `#` starts a comment). Unknown keys are errors; keys not present
    /// keep their defaults. Numeric values may be plain literals or a
    /// single ratio `a/b` so intensities like `50/60` stay exact.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or(ConfigError::BadLine { line })?;
            let key = key.trim();
            let value = value.trim();
            let bad = || ConfigError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
            };
            let num = || parse_number(value).ok_or_else(bad);
            let p = &mut cfg.params;
            match key {
                "horizon" => p.horizon = num()?,
                "initial_inventory" => {
                    p.initial_inventory = value.parse().map_err(|_| bad())?
                }
                "sigma" => p.sigma = num()?,
                "lambda_lo" => p.lambda_lo = num()?,
                "lambda_mm" => p.lambda_mm = num()?,
                "kappa_lo" => p.kappa_lo = num()?,
                "kappa_mm" => p.kappa_mm = num()?,
                "lo_impact" => p.lo_impact = num()?,
                "mo_impact" => p.mo_impact = num()?,
                "mo_impact_exponent" => p.mo_impact_exponent = num()?,
                "bid_spread" => p.bid_spread = num()?,
                "terminal_impact" => p.terminal_impact = num()?,
                "penalty" => p.penalty = num()?,
                "ac_urgency" => p.ac_urgency = num()?,
                "mm_enabled" => p.mm_enabled = value.parse().map_err(|_| bad())?,
                "n_time_steps" => cfg.n_time_steps = value.parse().map_err(|_| bad())?,
                "n_paths" => cfg.sim.n_paths = value.parse().map_err(|_| bad())?,
                "seed" => cfg.sim.seed = value.parse().map_err(|_| bad())?,
                "s0" => cfg.sim.s0 = num()?,
                other => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: other.to_string(),
                    })
                }
            }
        }
        cfg.params = cfg.params.checked()?;
        Ok(cfg)
    }
}

fn parse_number(s: &str) -> Option<f64> {
    if let Some((a, b)) = s.split_once('/') {
        let num: f64 = a.trim().parse().ok()?;
        let den: f64 = b.trim().parse().ok()?;
        if den == 0.0 {
            return None;
        }
        Some(num / den)
    } else {
        s.parse().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn ac_schedule_endpoints_and_midpoint() {
        let p = p();
        assert!((p.ac_schedule(0.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(p.ac_schedule(60.0).unwrap().abs() < 1e-12);
        // sinh(3)/sinh(6) evaluated independently
        let expected = 10.0 * 3.0_f64.sinh() / 6.0_f64.sinh();
        assert!((expected - 0.496640).abs() < 1e-6);
        assert!((p.ac_schedule(30.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ac_schedule_rejects_out_of_range() {
        assert!(p().ac_schedule(-1.0).is_err());
        assert!(p().ac_schedule(60.01).is_err());
    }

    #[test]
    fn ac_schedule_strictly_decreasing() {
        let p = p();
        let mut prev = p.ac_schedule(0.0).unwrap();
        for i in 1..=200 {
            let cur = p.ac_schedule(60.0 * i as f64 / 200.0).unwrap();
            assert!(cur < prev, "schedule not decreasing at i={i}");
            prev = cur;
        }
    }

    #[test]
    fn terminal_h_values() {
        let p = p();
        assert_eq!(p.terminal_h(0), 0.0);
        assert!((p.terminal_h(1) - (-0.0102)).abs() < 1e-12);
        let expected_q10 = -10.0 * 0.011 - 0.0001 * 10f64.powf(1.5);
        assert!((expected_q10 - (-0.113162)).abs() < 1e-6);
        assert!((p.terminal_h(10) - expected_q10).abs() < 1e-12);
    }

    #[test]
    fn terminal_h_strictly_decreasing_in_q() {
        let p = p();
        for q in 1..=9 {
            assert!(p.terminal_h(q + 1) < p.terminal_h(q));
        }
    }

    /// Independent quadrature oracle for the boundary: composite Simpson
    /// over qbar^2 with interval refinement until two levels agree.
    fn boundary_quadrature(p: &ModelParams, t: f64) -> f64 {
        let f = |s: f64| {
            let q = p.ac_schedule(s).unwrap();
            q * q
        };
        let simpson = |n: usize| {
            let h = (p.horizon - t) / n as f64;
            let mut acc = f(t) + f(p.horizon);
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(t + k as f64 * h);
            }
            acc * h / 3.0
        };
        let mut n = 64;
        let mut prev = simpson(n);
        loop {
            n *= 2;
            let cur = simpson(n);
            if (cur - prev).abs() < 1e-13 || n > 1 << 20 {
                return -p.penalty * cur;
            }
            prev = cur;
        }
    }

    #[test]
    fn boundary_matches_quadrature() {
        let p = p();
        assert_eq!(p.boundary_h_zero(60.0).unwrap(), 0.0);
        // 100 deterministic pseudo-random times in [0, T]
        let mut x = 0.5_f64;
        for _ in 0..100 {
            x = (x * 9301.0 + 49297.0) % 233280.0 / 233280.0;
            let t = x * 60.0;
            let closed = p.boundary_h_zero(t).unwrap();
            let quad = boundary_quadrature(&p, t);
            assert!(
                (closed - quad).abs() <= 1e-10,
                "t={t}: closed={closed} quad={quad}"
            );
        }
        let q0 = boundary_quadrature(&p, 0.0);
        assert!((p.boundary_h_zero(0.0).unwrap() - q0).abs() <= 1e-10);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ModelParams {
            lambda_lo: 0.0,
            ..p()
        }
        .checked()
        .is_err());
        assert!(ModelParams {
            kappa_mm: -1.0,
            ..p()
        }
        .checked()
        .is_err());
        assert!(ModelParams {
            mo_impact_exponent: 0.5,
            ..p()
        }
        .checked()
        .is_err());
        assert!(ModelParams {
            horizon: 0.0,
            ..p()
        }
        .checked()
        .is_err());
        assert!(p().checked().is_ok());
    }

    #[test]
    fn config_roundtrip_and_errors() {
        let cfg = RunConfig::parse(
            "# comment\nlambda_lo = 50/60\ninitial_inventory = 5\nmm_enabled = false\n",
        )
        .unwrap();
        assert_eq!(cfg.params.initial_inventory, 5);
        assert!(!cfg.params.mm_enabled);
        assert_eq!(cfg.params.lambda_lo, 50.0 / 60.0);

        match RunConfig::parse("no_such_key = 1\n") {
            Err(ConfigError::UnknownKey { line: 1, .. }) => {}
            other => panic!("expected unknown-key error, got {other:?}"),
        }
        assert!(RunConfig::parse("sigma 0.01\n").is_err());
        assert!(RunConfig::parse("sigma = banana\n").is_err());
        assert!(RunConfig::parse("lambda_lo = -1\n").is_err());
    }

    #[test]
    fn grid_index_of() {
        let g = GridSpec::new(60.0, 6000).unwrap();
        assert_eq!(g.index_of(10.0).unwrap(), 1000);
        assert_eq!(g.index_of(60.0).unwrap(), 6000);
        assert!(g.index_of(61.0).is_err());
        assert!((g.time(1000) - 10.0).abs() < 1e-12);
    }
}
