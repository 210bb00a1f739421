//! Browser bindings: time integration, steady-branch continuation and the
//! nonexistence bound, sized for interactive use.

use std::sync::Arc;

use mems_core::{
    build_grid, continuation, nonexistence_bound, run, Domain, Field, NewtonOptions, Params, SimConfig, SimOutcome,
};
use wasm_bindgen::prelude::*;

const MAX_NODES_1D: usize = 801;
const MAX_NODES_2D: usize = 81;
const MAX_HORIZON: f64 = 200.0;

fn domain(kind: &str, size: f64) -> Result<Domain, String> {
    let d = match kind {
        "interval" => Domain::Interval { length: size },
        "radial-disk" => Domain::RadialDisk { radius: size },
        "square" => Domain::Rectangle { lx: size, ly: size },
        "disk" => Domain::Disk { radius: size },
        other => return Err(format!("unknown domain '{other}'")),
    };
    d.validate().map_err(|e| e.to_string())?;
    Ok(d)
}

fn grid(kind: &str, size: f64, n: usize) -> Result<Arc<mems_core::Grid>, String> {
    let d = domain(kind, size)?;
    let cap = if d.axes() == 2 { MAX_NODES_2D } else { MAX_NODES_1D };
    if n > cap {
        return Err(format!("at most {cap} nodes per axis on this domain"));
    }
    build_grid(d, n).map(Arc::new).map_err(|e| e.to_string())
}

/// Time series at the probe node plus the final profile.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    probe: Vec<f64>,
    max_u: Vec<f64>,
    energy: Vec<f64>,
    coords: Vec<f64>,
    profile: Vec<f64>,
    side: usize,
    outcome: String,
    t_end: f64,
}

#[wasm_bindgen]
impl Trajectory {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn probe(&self) -> Vec<f64> {
        self.probe.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn max_u(&self) -> Vec<f64> {
        self.max_u.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn energy(&self) -> Vec<f64> {
        self.energy.clone()
    }
    /// Node coordinates along the first axis.
    #[wasm_bindgen(getter)]
    pub fn coords(&self) -> Vec<f64> {
        self.coords.clone()
    }
    /// Final field, row-major when `side > 0`.
    #[wasm_bindgen(getter)]
    pub fn profile(&self) -> Vec<f64> {
        self.profile.clone()
    }
    /// Nodes per row of a 2D profile, 0 for 1D and radial profiles.
    #[wasm_bindgen(getter)]
    pub fn side(&self) -> usize {
        self.side
    }
    #[wasm_bindgen(getter)]
    pub fn outcome(&self) -> String {
        self.outcome.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn t_end(&self) -> f64 {
        self.t_end
    }
}

pub fn simulate_native(kind: &str, size: f64, n: usize, lambda: f64, t_max: f64, bump: bool) -> Result<Trajectory, String> {
    if !(t_max > 0.0 && t_max <= MAX_HORIZON) {
        return Err(format!("t_max must lie in (0, {MAX_HORIZON}]"));
    }
    let grid = grid(kind, size, n)?;
    let mut cfg = SimConfig::new(grid.clone(), Params::with_lambda(lambda));
    cfg.t_max = t_max;
    cfg.record_every = 1;
    if bump {
        cfg.u0 = Field::from_fn_dirichlet(&grid, |x, y| {
            let s = (1.0 - x * x - y * y).max(0.0);
            100.0 * s * s * s * x * x * y * y
        });
    }
    let r = run(&cfg).map_err(|e| e.to_string())?;
    let outcome = match r.outcome {
        SimOutcome::Converged { t_reached, .. } => format!("converged (steady by t = {t_reached:.3})"),
        SimOutcome::Quenched { t_quench, .. } => format!("quenched at t = {t_quench:.4}"),
        SimOutcome::TimedOut { .. } => format!("still moving at t = {:.3}", r.t_end),
    };
    let side = if grid.y_axis().is_empty() { 0 } else { grid.n() };
    Ok(Trajectory {
        times: r.samples.iter().map(|s| s.t).collect(),
        probe: r.samples.iter().map(|s| s.probe_value).collect(),
        max_u: r.samples.iter().map(|s| s.max_u).collect(),
        energy: r.samples.iter().map(|s| s.energy).collect(),
        coords: grid.x_axis().to_vec(),
        profile: r.last_state.into_values(),
        side,
        outcome,
        t_end: r.t_end,
    })
}

/// Integrates from zero data (or the off-centre bump with `bump = true`)
/// up to `t_max`.
#[wasm_bindgen]
pub fn simulate(kind: &str, size: f64, n: usize, lambda: f64, t_max: f64, bump: bool) -> Result<Trajectory, JsError> {
    simulate_native(kind, size, n, lambda, t_max, bump).map_err(|e| JsError::new(&e))
}

/// Minimal steady branch sampled at evenly spaced voltages.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Branch {
    lambdas: Vec<f64>,
    max_phi: Vec<f64>,
    fold: f64,
    coords: Vec<f64>,
    profile: Vec<f64>,
    side: usize,
}

#[wasm_bindgen]
impl Branch {
    #[wasm_bindgen(getter)]
    pub fn lambdas(&self) -> Vec<f64> {
        self.lambdas.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn max_phi(&self) -> Vec<f64> {
        self.max_phi.clone()
    }
    /// Fold estimate, NaN when every target was reached.
    #[wasm_bindgen(getter)]
    pub fn fold(&self) -> f64 {
        self.fold
    }
    #[wasm_bindgen(getter)]
    pub fn coords(&self) -> Vec<f64> {
        self.coords.clone()
    }
    /// Last steady state reached.
    #[wasm_bindgen(getter)]
    pub fn profile(&self) -> Vec<f64> {
        self.profile.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn side(&self) -> usize {
        self.side
    }
}

pub fn steady_branch_native(kind: &str, size: f64, n: usize, lambda_max: f64, count: usize) -> Result<Branch, String> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) || count == 0 || count > 400 {
        return Err("need lambda_max > 0 and 1..=400 samples".into());
    }
    let grid = grid(kind, size, n)?;
    let targets: Vec<f64> = (1..=count).map(|k| lambda_max * k as f64 / count as f64).collect();
    let c = continuation(&grid, &targets, &Params::default(), &NewtonOptions::default());
    let profile = c.points.last().map(|p| p.phi.values().to_vec()).unwrap_or_else(|| vec![0.0; grid.len()]);
    Ok(Branch {
        lambdas: c.points.iter().map(|p| p.lambda).collect(),
        max_phi: c.points.iter().map(|p| p.max_phi).collect(),
        fold: c.fold_estimate.unwrap_or(f64::NAN),
        coords: grid.x_axis().to_vec(),
        profile,
        side: if grid.y_axis().is_empty() { 0 } else { grid.n() },
    })
}

/// Continues the minimal branch from λ = 0 up to `lambda_max`.
#[wasm_bindgen]
pub fn steady_branch(kind: &str, size: f64, n: usize, lambda_max: f64, count: usize) -> Result<Branch, JsError> {
    steady_branch_native(kind, size, n, lambda_max, count).map_err(|e| JsError::new(&e))
}

pub fn bound_native(kind: &str, size: f64, beta: Option<f64>) -> Result<f64, String> {
    nonexistence_bound(domain(kind, size)?, beta).map_err(|e| e.to_string())
}

/// Voltage above which no steady state exists. `beta ≤ 0` means "derive it"
/// (disks only).
#[wasm_bindgen]
pub fn bound(kind: &str, size: f64, beta: f64) -> Result<f64, JsError> {
    bound_native(kind, size, (beta > 0.0).then_some(beta)).map_err(|e| JsError::new(&e))
}
