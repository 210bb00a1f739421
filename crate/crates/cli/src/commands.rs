use std::fmt::Write as _;
use std::process::ExitCode;

use anyhow::anyhow;
use mems_core::diagnostics::DISTANCE_FLOOR;
use mems_core::{
    bisect_lambda_star, continuation, default_fit_window, fit_decay, l2_distance, nonexistence_bound, presets as
    core_presets, BisectOptions, DecayEstimate, DecayModel, MemsError, ModelSelection, SimOutcome,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Config, FitModel};
use crate::output::{profile_csv, resolve_out_dir, trajectory_csv, Artifacts, SWEEP_HEADER};
use crate::Common;

/// Error plus the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration, usage or output location: exit 1.
    Config(anyhow::Error),
    /// The computation itself failed: exit 3.
    Numerical(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Numerical(e) => e,
        }
    }
}

impl From<MemsError> for Failure {
    fn from(e: MemsError) -> Self {
        match e {
            MemsError::InvalidParams(_)
            | MemsError::InvalidGrid(_)
            | MemsError::UnsupportedDomain(_)
            | MemsError::UnknownPreset(_)
            | MemsError::BoundaryViolation { .. } => Failure::Config(e.into()),
            _ => Failure::Numerical(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<MemsError>() {
            Ok(m) => m.into(),
            Err(e) => Failure::Config(e),
        }
    }
}

type Outcome = Result<ExitCode, Failure>;

fn artifacts(common: &Common) -> Result<Artifacts, Failure> {
    Ok(Artifacts::new(resolve_out_dir(common.out.as_deref()))?)
}

pub fn run(common: &Common) -> Outcome {
    let cfg = common.resolve()?;
    let sim = cfg.sim_config()?;
    let mut out = artifacts(common)?;
    let r = mems_core::run(&sim)?;

    out.write("trajectory.csv", &trajectory_csv(&r.samples))?;
    let mut snapshot_times = Vec::new();
    for (i, s) in r.snapshots.iter().enumerate() {
        out.write(&format!("snapshots/snapshot_{i:04}.csv"), &profile_csv(&sim.grid, &s.field))?;
        snapshot_times.push(s.t);
    }
    out.write("final.csv", &profile_csv(&sim.grid, &r.last_state))?;

    let mut result = json!({
        "outcome": r.outcome.label(),
        "t_end": r.t_end,
        "steps": r.steps,
        "max_u": r.last_state.max(),
        "snapshot_times": snapshot_times,
    });
    let quenched = match &r.outcome {
        SimOutcome::Converged { t_reached, .. } => {
            result["t_reached"] = json!(t_reached);
            println!("converged: steady by t = {t_reached}, max u = {}", r.last_state.max());
            false
        }
        SimOutcome::Quenched { t_quench, peak_node, by_dt_collapse } => {
            let [x, y] = sim.grid.coords(*peak_node);
            result["t_quench"] = json!(t_quench);
            result["peak_node"] = json!(peak_node);
            result["peak_location"] = json!([x, y]);
            result["by_dt_collapse"] = json!(by_dt_collapse);
            println!("quenched: t = {t_quench} at node {peak_node}{}", if *by_dt_collapse { " (dt collapse)" } else { "" });
            true
        }
        SimOutcome::TimedOut { .. } => {
            println!("timed out at t = {}, max u = {}", r.t_end, r.last_state.max());
            false
        }
    };
    out.finish("run", &cfg, result)?;
    Ok(if quenched { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Failure::Config(anyhow!("cannot start {jobs} worker threads: {e}")))
}

pub fn sweep(common: &Common, cfg: Config) -> Outcome {
    let mut sim = cfg.sim_config()?;
    sim.snapshot_times.clear();
    if cfg.sweep.lambdas.is_empty() {
        return Err(Failure::Config(anyhow!("sweep.lambdas is empty")));
    }
    for &l in &cfg.sweep.lambdas {
        sim.with_lambda(l).validate()?;
    }
    let mut out = artifacts(common)?;
    let runs = pool(cfg.search.jobs)?
        .install(|| cfg.sweep.lambdas.par_iter().map(|&l| mems_core::run(&sim.with_lambda(l))).collect::<Vec<_>>());

    let mut csv = format!("{SWEEP_HEADER}\n");
    let mut table = Vec::new();
    for (&lambda, r) in cfg.sweep.lambdas.iter().zip(runs) {
        let r = r?;
        for s in &r.samples {
            writeln!(csv, "{lambda},{},{}", s.t, s.probe_value).unwrap();
        }
        let t_terminal = match &r.outcome {
            SimOutcome::Converged { t_reached, .. } => *t_reached,
            SimOutcome::Quenched { t_quench, .. } => *t_quench,
            SimOutcome::TimedOut { .. } => r.t_end,
        };
        println!("lambda = {lambda}: {} at t = {t_terminal}", r.outcome.label());
        table.push(json!({ "lambda": lambda, "outcome": r.outcome.label(), "t_terminal": t_terminal }));
    }
    out.write("sweep.csv", &csv)?;
    out.finish("sweep", &cfg, json!({ "runs": table }))?;
    Ok(ExitCode::SUCCESS)
}

pub fn bisect(common: &Common, cfg: Config) -> Outcome {
    let sim = cfg.sim_config()?;
    let mut out = artifacts(common)?;
    let s = &cfg.search;
    let opts = BisectOptions { tol: s.tol, max_extension: s.max_extension, jobs: s.jobs };
    let r = bisect_lambda_star(&sim, s.lo, s.hi, &opts)?;

    out.write("interval.csv", &format!("lo,hi\n{},{}\n", r.lo, r.hi))?;
    let mut history = String::from("lambda,verdict,t_terminal,t_max_used\n");
    for c in &r.history {
        writeln!(history, "{},{},{},{}", c.lambda, c.verdict.label(), c.t_terminal, c.t_max_used).unwrap();
    }
    out.write("bisect_history.csv", &history)?;
    println!("critical voltage in ({}, {}) after {} classifications", r.lo, r.hi, r.history.len());
    if !r.monotonicity_violations.is_empty() {
        eprintln!("warning: non-monotone verdicts {:?}", r.monotonicity_violations);
    }
    out.finish(
        "bisect",
        &cfg,
        json!({
            "lo": r.lo,
            "hi": r.hi,
            "classifications": r.history.len(),
            "monotonicity_violations": r.monotonicity_violations,
        }),
    )?;
    Ok(ExitCode::SUCCESS)
}

pub fn steady(common: &Common, cfg: Config) -> Outcome {
    let sim = cfg.sim_config()?;
    let targets = if cfg.newton.targets.is_empty() { vec![cfg.equation.lambda] } else { cfg.newton.targets.clone() };
    if targets.windows(2).any(|w| w[1] < w[0]) || targets.iter().any(|&t| !(t >= 0.0)) {
        return Err(Failure::Config(anyhow!("continuation targets must be nonnegative and increasing")));
    }
    let mut out = artifacts(common)?;
    let branch = continuation(&sim.grid, &targets, &sim.params, &cfg.newton_options());

    let mut csv = String::from("lambda,max_phi,newton_iters,residual_norm\n");
    for (i, p) in branch.points.iter().enumerate() {
        writeln!(csv, "{},{},{},{}", p.lambda, p.max_phi, p.newton_iters, p.residual_norm).unwrap();
        out.write(&format!("steady/phi_{i:04}.csv"), &profile_csv(&sim.grid, &p.phi))?;
    }
    out.write("branch.csv", &csv)?;
    if let Some(last) = branch.points.last() {
        out.write("steady.csv", &profile_csv(&sim.grid, &last.phi))?;
        println!("steady state at lambda = {}: max phi = {}, {} Newton steps", last.lambda, last.max_phi, last.newton_iters);
    }
    for (t, e) in &branch.failures {
        println!("no minimal steady state reached at lambda = {t}: {e}");
    }
    if let Some(f) = branch.fold_estimate {
        println!("fold estimate: {f}");
    }
    let failures: Vec<_> = branch.failures.iter().map(|(t, e)| json!({ "lambda": t, "error": e.to_string() })).collect();
    out.finish(
        "steady",
        &cfg,
        json!({
            "points": branch.points.len(),
            "fold_estimate": branch.fold_estimate,
            "monotone": branch.monotone,
            "failures": failures,
        }),
    )?;
    if branch.points.is_empty() {
        return Err(Failure::Numerical(anyhow!("no continuation target was reached")));
    }
    Ok(ExitCode::SUCCESS)
}

/// Spacing of the fields kept for the decay record.
const RATE_SAMPLE_SPACING: f64 = 0.1;

pub fn rate(common: &Common, cfg: Config) -> Outcome {
    let mut sim = cfg.sim_config()?;
    sim.t_max = cfg.rate.t_max;
    sim.stop_at_steady = false;
    let count = (cfg.rate.t_max / RATE_SAMPLE_SPACING).floor() as usize;
    sim.snapshot_times = (0..=count).map(|k| k as f64 * RATE_SAMPLE_SPACING).collect();
    sim.validate()?;
    let mut out = artifacts(common)?;

    let branch = continuation(&sim.grid, &[sim.params.lambda], &sim.params, &cfg.newton_options());
    let Some(phi) = branch.points.last() else {
        let reason = branch.failures.first().map(|(_, e)| e.to_string()).unwrap_or_default();
        return Err(Failure::Numerical(anyhow!("no steady state at lambda = {}: {reason}", sim.params.lambda)));
    };
    let r = mems_core::run(&sim)?;
    if let SimOutcome::Quenched { t_quench, .. } = r.outcome {
        return Err(Failure::Numerical(anyhow!("the trajectory quenched at t = {t_quench}; nothing to fit")));
    }
    let distances: Vec<(f64, f64)> = r
        .snapshots
        .iter()
        .map(|s| Ok((s.t, l2_distance(&sim.grid, &phi.phi, &s.field)?)))
        .collect::<Result<_, MemsError>>()?;
    let mut csv = String::from("t,distance\n");
    for (t, d) in &distances {
        writeln!(csv, "{t},{d}").unwrap();
    }
    out.write("decay.csv", &csv)?;

    let window: Vec<(f64, f64)> = match (cfg.rate.window_start, cfg.rate.window_end) {
        (None, None) => default_fit_window(&distances),
        (a, b) => distances
            .iter()
            .copied()
            .filter(|&(t, d)| {
                t >= a.unwrap_or(f64::NEG_INFINITY) - 1e-9 && t <= b.unwrap_or(f64::INFINITY) + 1e-9 && d > DISTANCE_FLOOR
            })
            .collect(),
    };
    let selection = match cfg.rate.model {
        FitModel::Auto => ModelSelection::Auto,
        FitModel::Exponential => ModelSelection::Exponential,
        FitModel::Algebraic => ModelSelection::Algebraic,
    };
    let result = match fit_decay(&window, selection)? {
        DecayEstimate::ExactlyConverged => {
            println!("the trajectory sits exactly on the steady state");
            json!({ "exactly_converged": true })
        }
        DecayEstimate::Fitted(fit) => {
            let model = match fit.model {
                DecayModel::Exponential { rate, amplitude } => {
                    println!("exponential decay: rate {rate}, r^2 = {}", fit.r_squared);
                    json!({ "kind": "exponential", "rate": rate, "amplitude": amplitude })
                }
                DecayModel::Algebraic { exponent, amplitude } => {
                    println!("algebraic decay: exponent {exponent}, r^2 = {}", fit.r_squared);
                    json!({ "kind": "algebraic", "exponent": exponent, "amplitude": amplitude })
                }
            };
            json!({
                "model": model,
                "r_squared": fit.r_squared,
                "window": [fit.window.0, fit.window.1],
                "theta_implied": fit.theta_implied,
                "samples": window.len(),
            })
        }
    };
    out.finish("rate", &cfg, result)?;
    Ok(ExitCode::SUCCESS)
}

pub fn bound(common: &Common, cfg: Config) -> Outcome {
    let domain = cfg.domain.domain();
    let value = nonexistence_bound(domain, cfg.bound.beta)?;
    let out = artifacts(common)?;
    println!("{value}");
    out.finish("bound", &cfg, json!({ "bound": value, "measure": domain.measure() }))?;
    Ok(ExitCode::SUCCESS)
}

pub fn presets(dump: Option<&str>) -> Outcome {
    match dump {
        Some(name) => print!("{}", Config::from_preset(name)?.to_toml()),
        None => {
            for p in core_presets() {
                println!("{:<16}{}", p.name, p.description);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
