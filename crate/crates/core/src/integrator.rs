//! IMEX time stepping for `u_t = Δu + f(u)`: backward Euler on the
//! diffusion, explicit (optionally once-corrected) reaction, and a step
//! controller that shrinks like `(1 − max u)²` as the membrane approaches
//! touchdown.

use std::sync::Arc;

use crate::diagnostics::{energy_with_integral, weighted_norm};
use crate::error::{MemsError, Result};
use crate::grid::{build_grid, implicit_solve, laplacian_apply, Domain, Field, Grid};
use crate::nonlocal::{reaction, reaction_eval, Params};

/// Consecutive slow steps needed before a run is declared steady.
pub const STEADY_STREAK: usize = 5;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub grid: Arc<Grid>,
    pub params: Params,
    pub u0: Field,
    /// Time of `u0`; nonzero when resuming an earlier run.
    pub t_start: f64,
    pub dt_init: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub t_max: f64,
    /// Steady when `‖uⁿ⁺¹ − uⁿ‖∞ / dt` stays below this for [`STEADY_STREAK`] steps.
    pub steady_tol: f64,
    pub record_every: usize,
    pub snapshot_times: Vec<f64>,
    /// Step controller gain: `dt = c_adapt · (1 − max u)²`, clamped.
    pub c_adapt: f64,
    /// Re-evaluate the reaction at the predicted state and re-solve once.
    pub picard: bool,
    /// Stop as soon as the steady criterion fires.
    pub stop_at_steady: bool,
    /// Node whose value is reported as `probe_value` in every sample.
    pub probe: usize,
}

impl SimConfig {
    /// Defaults: zero initial data, `dt ∈ [1e-10, 1e-2]` starting at 1e-4,
    /// `t_max = 10`, `steady_tol = 1e-8`.
    pub fn new(grid: Arc<Grid>, params: Params) -> Self {
        let u0 = Field::zeros(&grid);
        let probe = grid.default_probe();
        Self {
            grid,
            params,
            u0,
            t_start: 0.0,
            dt_init: 1e-4,
            dt_max: 1e-2,
            dt_min: 1e-10,
            t_max: 10.0,
            steady_tol: 1e-8,
            record_every: 10,
            snapshot_times: Vec::new(),
            c_adapt: 0.1,
            picard: false,
            stop_at_steady: true,
            probe,
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut c = self.clone();
        c.params.lambda = lambda;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let bad = |msg: String| Err(MemsError::InvalidParams(msg));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.dt_min) && pos(self.dt_init) && pos(self.dt_max)) {
            return bad("time steps must be positive".into());
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad(format!(
                "need dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if !(self.t_max > self.t_start && self.t_max.is_finite()) {
            return bad(format!("t_max must exceed the start time, got {}", self.t_max));
        }
        if !pos(self.steady_tol) || !pos(self.c_adapt) {
            return bad("steady_tol and c_adapt must be positive".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if self.probe >= self.grid.len() {
            return bad(format!("probe node {} outside the grid", self.probe));
        }
        self.grid.check_boundary(&self.u0)?;
        if !self.u0.is_finite() {
            return bad("initial data must be finite".into());
        }
        if self.u0.max() >= 1.0 {
            return bad(format!("initial data must stay below 1, max is {}", self.u0.max()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub max_u: f64,
    pub energy: f64,
    /// Weighted L² norm of the time derivative over the last step
    /// (of `Δu + f(u)` for the initial sample).
    pub l2_ut: f64,
    pub nonlocal_i: f64,
    pub dt_used: f64,
    pub probe_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimOutcome {
    Converged { steady: Field, t_reached: f64 },
    /// `by_dt_collapse` is set when the step controller fell below `dt_min`
    /// before the threshold was crossed.
    Quenched { t_quench: f64, peak_node: usize, by_dt_collapse: bool },
    TimedOut { final_field: Field },
}

impl SimOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            SimOutcome::Converged { .. } => "converged",
            SimOutcome::Quenched { .. } => "quenched",
            SimOutcome::TimedOut { .. } => "timed_out",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field,
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub outcome: SimOutcome,
    pub samples: Vec<TrajectorySample>,
    pub snapshots: Vec<Snapshot>,
    /// Last state with max u below the quench threshold.
    pub last_state: Field,
    pub t_end: f64,
    pub steps: usize,
}

/// One IMEX step: `u⁺ = (I − dt Δ_h)⁻¹ (u + dt f(u))`.
pub fn step(grid: &Grid, params: &Params, u: &[f64], dt: f64, picard: bool) -> Result<Field> {
    grid.check_field(u)?;
    let peak = u.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |b, (k, v)| if v > b.1 { (k, v) } else { b });
    if peak.1 >= 1.0 - params.quench_eps {
        return Err(MemsError::Singular { max_u: peak.1, node: peak.0 });
    }
    let explicit = |f: &[f64]| -> Vec<f64> { u.iter().zip(f).map(|(a, b)| a + dt * b).collect() };
    let f = reaction(grid, u, params, false)?;
    let mut next = implicit_solve(grid, dt, &explicit(&f))?;
    if picard {
        let f = reaction(grid, &next, params, false)?;
        next = implicit_solve(grid, dt, &explicit(&f))?;
    }
    Ok(next)
}

fn sample(cfg: &SimConfig, u: &[f64], t: f64, l2_ut: f64, dt: f64) -> Option<TrajectorySample> {
    let eval = reaction_eval(&cfg.grid, u, &cfg.params, false).ok()?;
    let energy = energy_with_integral(&cfg.grid, u, &cfg.params, eval.integral).ok()?;
    Some(TrajectorySample {
        t,
        max_u: u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        energy,
        l2_ut,
        nonlocal_i: eval.integral,
        dt_used: dt,
        probe_value: u[cfg.probe],
    })
}

fn initial_rate(cfg: &SimConfig) -> Result<f64> {
    let lap = laplacian_apply(&cfg.grid, &cfg.u0)?;
    let f = reaction(&cfg.grid, &cfg.u0, &cfg.params, false)?;
    let mut ut: Vec<f64> = lap.iter().zip(f.iter()).map(|(a, b)| a + b).collect();
    for (v, &inside) in ut.iter_mut().zip(cfg.grid.interior_mask()) {
        if !inside {
            *v = 0.0;
        }
    }
    Ok(weighted_norm(&cfg.grid, &ut))
}

/// Integrates until the run converges, quenches, or reaches `t_max`.
pub fn run(cfg: &SimConfig) -> Result<SimRun> {
    cfg.validate()?;
    let grid = &*cfg.grid;
    let eps = cfg.params.quench_eps;
    let time_eps = 1e-12 * cfg.t_max.abs().max(1.0);

    let mut snap_times: Vec<f64> = cfg
        .snapshot_times
        .iter()
        .copied()
        .filter(|&s| s >= cfg.t_start - time_eps && s <= cfg.t_max + time_eps)
        .collect();
    snap_times.sort_by(f64::total_cmp);
    snap_times.dedup();
    let mut next_snap = 0;

    let mut u = cfg.u0.clone();
    let mut t = cfg.t_start;
    let mut samples = Vec::new();
    let mut snapshots = Vec::new();
    if let Some(s) = sample(cfg, &u, t, initial_rate(cfg)?, 0.0) {
        samples.push(s);
    }
    while next_snap < snap_times.len() && snap_times[next_snap] <= t + time_eps {
        snapshots.push(Snapshot { t, field: u.clone() });
        next_snap += 1;
    }

    let mut steps = 0usize;
    let mut streak = 0usize;
    let mut steady_at: Option<f64> = None;
    let mut dt_ramp = cfg.dt_init;

    let finish = |outcome, samples, snapshots, last_state, t_end, steps| {
        Ok(SimRun { outcome, samples, snapshots, last_state, t_end, steps })
    };

    loop {
        let peak_node = u.argmax();
        let max_u = u[peak_node];
        if max_u >= 1.0 - eps {
            return finish(
                SimOutcome::Quenched { t_quench: t, peak_node, by_dt_collapse: false },
                samples,
                snapshots,
                u,
                t,
                steps,
            );
        }
        if t >= cfg.t_max - time_eps {
            let outcome = match steady_at {
                Some(t_reached) => SimOutcome::Converged { steady: u.clone(), t_reached },
                None => SimOutcome::TimedOut { final_field: u.clone() },
            };
            return finish(outcome, samples, snapshots, u, t, steps);
        }

        let gap = 1.0 - max_u;
        let requested = cfg.c_adapt * gap * gap;
        if requested < cfg.dt_min {
            return finish(
                SimOutcome::Quenched { t_quench: t, peak_node, by_dt_collapse: true },
                samples,
                snapshots,
                u,
                t,
                steps,
            );
        }
        let mut dt = requested.min(cfg.dt_max).min(dt_ramp);
        dt_ramp = (2.0 * dt).min(cfg.dt_max);
        dt = dt.min(cfg.t_max - t);
        let mut hits_snapshot = false;
        if next_snap < snap_times.len() && snap_times[next_snap] - t <= dt + time_eps {
            dt = snap_times[next_snap] - t;
            hits_snapshot = true;
        }
        if dt <= 0.0 {
            // snapshot time coincides with t up to rounding
            snapshots.push(Snapshot { t, field: u.clone() });
            next_snap += 1;
            continue;
        }

        let next = match step(grid, &cfg.params, &u, dt, cfg.picard) {
            Ok(next) if next.is_finite() => next,
            Ok(_) | Err(MemsError::Singular { .. }) => {
                return finish(
                    SimOutcome::Quenched { t_quench: t + dt, peak_node, by_dt_collapse: false },
                    samples,
                    snapshots,
                    u,
                    t,
                    steps,
                );
            }
            Err(e) => return Err(e),
        };

        let rate = next.max_abs_diff(&u) / dt;
        let ut: Vec<f64> = next.iter().zip(u.iter()).map(|(a, b)| (a - b) / dt).collect();
        let l2_ut = weighted_norm(grid, &ut);
        t = if hits_snapshot { snap_times[next_snap] } else { t + dt };
        steps += 1;
        u = next;

        if hits_snapshot {
            snapshots.push(Snapshot { t, field: u.clone() });
            next_snap += 1;
        }
        streak = if rate < cfg.steady_tol { streak + 1 } else { 0 };
        let steady_now = streak >= STEADY_STREAK;
        if steady_now && steady_at.is_none() {
            steady_at = Some(t);
        }
        let stopping = steady_now && cfg.stop_at_steady;
        let crossing = u.max() >= 1.0 - eps;
        let at_end = t >= cfg.t_max - time_eps;
        if steps % cfg.record_every == 0 || hits_snapshot || stopping || crossing || at_end {
            if let Some(s) = sample(cfg, &u, t, l2_ut, dt) {
                samples.push(s);
            }
        }
        if stopping {
            return finish(
                SimOutcome::Converged { steady: u.clone(), t_reached: t },
                samples,
                snapshots,
                u,
                t,
                steps,
            );
        }
    }
}

/// A named scenario.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub config: SimConfig,
}

pub const PRESET_NAMES: [&str; 4] = ["1d-unit", "disk-radial", "disk-cartesian", "square-unit"];

fn integer_times(t_max: f64) -> Vec<f64> {
    (0..=t_max as usize).map(|t| t as f64).collect()
}

pub fn preset(name: &str) -> Result<Preset> {
    let (domain, n, lambda, t_max, description) = match name {
        "1d-unit" => (Domain::Interval { length: 1.0 }, 201, 8.53, 10.0, "unit interval, u0 = 0"),
        "disk-radial" => (Domain::RadialDisk { radius: 1.0 }, 201, 22.0, 20.0, "radially symmetric unit disk, u0 = 0"),
        "disk-cartesian" => (
            Domain::Disk { radius: 1.0 },
            61,
            20.0,
            20.0,
            "full unit disk, u0 = 100(1-x²-y²)³x²y²",
        ),
        "square-unit" => (Domain::Rectangle { lx: 1.0, ly: 1.0 }, 41, 10.0, 10.0, "unit square, u0 = 0"),
        other => return Err(MemsError::UnknownPreset(other.to_string())),
    };
    let grid = Arc::new(build_grid(domain, n)?);
    let mut config = SimConfig::new(grid, Params::with_lambda(lambda));
    config.t_max = t_max;
    config.snapshot_times = integer_times(t_max);
    if name == "disk-cartesian" {
        config.u0 = Field::from_fn_dirichlet(&config.grid, |x, y| {
            let s = 1.0 - x * x - y * y;
            100.0 * s * s * s * x * x * y * y
        });
        config.snapshot_times = vec![0.0, 5.0, 20.0];
    }
    Ok(Preset { name: PRESET_NAMES.iter().find(|&&p| p == name).copied().unwrap_or("custom"), description, config })
}

pub fn presets() -> Vec<Preset> {
    PRESET_NAMES.iter().map(|name| preset(name).expect("built-in preset")).collect()
}
