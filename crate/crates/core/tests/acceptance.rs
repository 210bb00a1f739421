//! Acceptance suite: one PASS/FAIL line per criterion, followed by the
//! measured values. Exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use mems_core::diagnostics::DISTANCE_FLOOR;
use mems_core::steady::linearized_solve;
use mems_core::{
    bisect_lambda_star, build_grid, classify, classify_extended, continuation, fit_decay, l2_distance,
    laplacian_apply, newton_solve, nonexistence_bound, preset, quadrature, reaction, reaction_jacobian, run,
    BisectOptions, DecayEstimate, DecayModel, Domain, Field, Grid, ModelSelection, NewtonOptions, Params,
    SimConfig, SimOutcome, Verdict,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { pass: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.pass &= ok;
        self.details.push(format!("{} {what}", if ok { "ok  " } else { "FAIL" }));
    }
}

fn scenario(name: &str) -> SimConfig {
    preset(name).expect("preset").config
}

fn outcome_str(o: &SimOutcome) -> String {
    match o {
        SimOutcome::Converged { t_reached, .. } => format!("converged at t={t_reached:.4}"),
        SimOutcome::Quenched { t_quench, by_dt_collapse, .. } => {
            format!("quenched at t={t_quench:.4}{}", if *by_dt_collapse { " (dt collapse)" } else { "" })
        }
        SimOutcome::TimedOut { .. } => "timed out".into(),
    }
}

fn quench_time(o: &SimOutcome) -> Option<f64> {
    match o {
        SimOutcome::Quenched { t_quench, .. } => Some(*t_quench),
        _ => None,
    }
}

fn one_d_dichotomy() -> Outcome {
    let mut out = Outcome::new();
    let base = scenario("1d-unit");
    let mut c = base.with_lambda(8.53);
    c.t_max = 10.0;
    let start = Instant::now();
    let r = run(&c).unwrap();
    out.check(
        matches!(r.outcome, SimOutcome::Converged { .. }),
        format!("lambda=8.53, n=201, t_max=10: {} ({:.2}s)", outcome_str(&r.outcome), start.elapsed().as_secs_f64()),
    );
    if let Some(last) = r.samples.last() {
        out.details.push(format!("     final sup-norm rate proxy: l2_ut={:.3e}", last.l2_ut));
    }
    let mut c = base.with_lambda(8.54);
    c.t_max = 10.0;
    let start = Instant::now();
    let r = run(&c).unwrap();
    out.check(
        quench_time(&r.outcome).is_some_and(|t| t <= 10.0),
        format!("lambda=8.54, n=201, t_max=10: {} ({:.2}s)", outcome_str(&r.outcome), start.elapsed().as_secs_f64()),
    );
    c.t_max = 40.0;
    let r = run(&c).unwrap();
    out.details.push(format!("     lambda=8.54 continued to t=40: {}", outcome_str(&r.outcome)));
    let mut c = base.with_lambda(8.53);
    c.t_max = 80.0;
    let r = run(&c).unwrap();
    out.details.push(format!("     lambda=8.53 continued to t=80: {}", outcome_str(&r.outcome)));
    out
}

fn one_d_bracket() -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    let r = bisect_lambda_star(&scenario("1d-unit"), 8.0, 9.0, &BisectOptions { tol: 0.05, ..Default::default() })
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let slack = 0.07;
    out.check(r.hi - r.lo <= 0.05, format!("width {:.4} <= 0.05", r.hi - r.lo));
    out.check(
        r.lo - slack <= 8.533 && 8.533 <= r.hi + slack,
        format!("bracket ({}, {}) contains 8.533 within +-{slack}", r.lo, r.hi),
    );
    out.check(secs <= 60.0, format!("runtime {secs:.2}s <= 60s"));
    out.check(r.monotonicity_violations.is_empty(), format!("monotonicity violations: {:?}", r.monotonicity_violations));
    out
}

fn radial_disk() -> Outcome {
    let mut out = Outcome::new();
    let base = scenario("disk-radial");
    let mut c = base.with_lambda(22.0);
    c.t_max = 20.0;
    let r = run(&c).unwrap();
    out.check(matches!(r.outcome, SimOutcome::Converged { .. }), format!("lambda=22, t_max=20: {}", outcome_str(&r.outcome)));
    let r = classify(22.5, &base);
    out.check(r.verdict == Verdict::Quenched, format!("lambda=22.5: {} at t={:.4}", r.verdict.label(), r.t_terminal));
    let b = bisect_lambda_star(&base, 15.0, 34.0, &BisectOptions { tol: 0.5, ..Default::default() }).unwrap();
    out.check(
        b.lo >= 21.5 && b.hi <= 23.5,
        format!("bisect (15, 34) tol 0.5 -> ({}, {}) within (21.5, 23.5)", b.lo, b.hi),
    );
    let fold = continuation(
        &base.grid,
        &(1..=30).map(f64::from).collect::<Vec<_>>(),
        &Params::default(),
        &NewtonOptions::default(),
    )
    .fold_estimate;
    out.details.push(format!("     steady-branch fold on this grid: {fold:?}"));
    out
}

fn square() -> Outcome {
    let mut out = Outcome::new();
    let base = scenario("square-unit");
    let mut c = base.with_lambda(10.0);
    c.t_max = 10.0;
    let r = run(&c).unwrap();
    out.check(matches!(r.outcome, SimOutcome::Converged { .. }), format!("lambda=10, t_max=10: {}", outcome_str(&r.outcome)));
    let r = run(&base.with_lambda(16.0)).unwrap();
    out.check(
        quench_time(&r.outcome).is_some_and(|t| t < 1.0),
        format!("lambda=16: {} (t_quench < 1)", outcome_str(&r.outcome)),
    );
    let b = bisect_lambda_star(&base, 10.0, 16.0, &BisectOptions { tol: 0.5, ..Default::default() }).unwrap();
    out.check(
        b.lo >= 12.5 && b.hi <= 14.5,
        format!("bisect (10, 16) tol 0.5 -> ({}, {}) within (12.5, 14.5)", b.lo, b.hi),
    );
    out
}

fn non_radial_disk() -> Outcome {
    let mut out = Outcome::new();
    let base = scenario("disk-cartesian");
    out.details.push(format!("     max u0 = {:.4}", base.u0.max()));
    let c = classify_extended(20.0, &base, 8);
    out.check(
        c.verdict == Verdict::Converged,
        format!("lambda=20: {} at t={:.4} (horizon {})", c.verdict.label(), c.t_terminal, c.t_max_used),
    );
    out
}

const ENERGY_SLACK: f64 = 1e-6;
const IDENTITY_TOL: f64 = 0.10;
/// Steps whose energy change is this close to roundoff are not compared.
const IDENTITY_FLOOR: f64 = 1e-9;
const IDENTITY_HORIZON: f64 = 2.0;

fn energy_lyapunov() -> Outcome {
    let mut out = Outcome::new();
    for name in ["1d-unit", "disk-radial", "disk-cartesian", "square-unit"] {
        let mut c = scenario(name);
        c.record_every = 1;
        c.snapshot_times.clear();
        let mut r = run(&c).unwrap();
        if matches!(r.outcome, SimOutcome::Quenched { .. }) {
            out.details.push(format!(
                "     {name} at lambda={}: {}, checked at lambda={} instead",
                c.params.lambda,
                outcome_str(&r.outcome),
                0.9 * c.params.lambda
            ));
            c.params.lambda *= 0.9;
            r = run(&c).unwrap();
        }
        let worst = r
            .samples
            .windows(2)
            .map(|w| (w[1].energy - w[0].energy) / (1.0 + w[0].energy.abs()))
            .fold(f64::NEG_INFINITY, f64::max);
        out.check(
            worst <= ENERGY_SLACK,
            format!("{name} ({}): max relative energy increase {worst:.3e} <= {ENERGY_SLACK:e}", outcome_str(&r.outcome)),
        );

        let mut c = c.clone();
        c.dt_max = 1e-3;
        c.t_max = IDENTITY_HORIZON;
        c.stop_at_steady = false;
        let r = run(&c).unwrap();
        let mut worst = 0.0f64;
        let mut compared = 0;
        for w in r.samples.windows(2) {
            let dt = w[1].t - w[0].t;
            let dissipation = w[1].l2_ut * w[1].l2_ut;
            if dt > 1e-3 * (1.0 + 1e-9) || dissipation * dt <= IDENTITY_FLOOR * (1.0 + w[0].energy.abs()) {
                continue;
            }
            let decay = -(w[1].energy - w[0].energy) / dt;
            worst = worst.max((decay - dissipation).abs() / dissipation);
            compared += 1;
        }
        out.check(
            compared > 0 && worst <= IDENTITY_TOL,
            format!("{name}: -dE/dt vs |u_t|^2 over {compared} steps with dt <= 1e-3, worst relative gap {worst:.3e}"),
        );
    }
    out
}

fn interval_config(lambda: f64) -> SimConfig {
    scenario("1d-unit").with_lambda(lambda)
}

fn steady_dynamic_equivalence() -> Outcome {
    let mut out = Outcome::new();
    for lambda in [4.0, 6.0, 8.0] {
        let mut c = interval_config(lambda);
        c.t_max = 50.0;
        c.stop_at_steady = false;
        c.snapshot_times.clear();
        let r = run(&c).unwrap();
        let phi = newton_solve(&c.grid, &Field::zeros(&c.grid), &c.params, &NewtonOptions::default()).unwrap();
        let d = l2_distance(&c.grid, &phi.phi, &r.last_state).unwrap();
        out.check(d <= 1e-4, format!("lambda={lambda}: ||phi - u(50)|| = {d:.3e} <= 1e-4 (t_end={})", r.t_end));
    }
    out
}

fn exponential_decay() -> Outcome {
    let mut out = Outcome::new();
    let mut c = interval_config(8.0);
    c.t_max = 30.0;
    c.stop_at_steady = false;
    c.record_every = 1;
    c.snapshot_times = (0..=300).map(|k| f64::from(k) * 0.1).collect();
    let r = run(&c).unwrap();
    let phi = newton_solve(&c.grid, &Field::zeros(&c.grid), &c.params, &NewtonOptions::default()).unwrap();
    let samples: Vec<(f64, f64)> = r
        .snapshots
        .iter()
        .filter(|s| s.t >= 5.0 - 1e-9 && s.t <= 30.0 + 1e-9)
        .map(|s| (s.t, l2_distance(&c.grid, &phi.phi, &s.field).unwrap()))
        .filter(|&(_, d)| d > DISTANCE_FLOOR)
        .collect();
    let span = samples.first().zip(samples.last()).map(|(a, b)| (a.0, b.0));
    match fit_decay(&samples, ModelSelection::Auto) {
        Ok(DecayEstimate::Fitted(fit)) => {
            let exp = matches!(fit.model, DecayModel::Exponential { .. });
            out.check(exp, format!("selected model {:?} over {span:?} ({} samples)", fit.model, samples.len()));
            out.check(fit.r_squared >= 0.99, format!("r^2 = {:.6} >= 0.99", fit.r_squared));
        }
        other => out.check(false, format!("fit failed: {other:?}")),
    }
    out
}

fn lambda_monotonicity() -> Outcome {
    let mut out = Outcome::new();
    let mut values = Vec::new();
    for lambda in 3..=8 {
        let mut c = interval_config(f64::from(lambda));
        c.t_max = 10.0;
        c.stop_at_steady = false;
        c.snapshot_times.clear();
        let r = run(&c).unwrap();
        let mid = c.grid.nearest_node(0.5, 0.0);
        values.push(r.last_state[mid]);
    }
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    out.check(increasing, format!("u(0.5, 10) for lambda=3..8: {values:.6?}"));
    out
}

fn random_interior(grid: &Grid, rng: &mut ChaCha8Rng, amp: f64) -> Field {
    let mut f = Field::new((0..grid.len()).map(|_| rng.gen_range(-1.0..1.0) * amp).collect());
    f.zero_boundary(grid);
    f
}

fn smooth_psi(grid: &Grid, rng: &mut ChaCha8Rng) -> Field {
    let (a, b, k) = (rng.gen_range(0.1..0.8), rng.gen_range(-0.1..0.1), rng.gen_range(2..5) as f64);
    let mut f = Field::from_fn_dirichlet(grid, |x, _| a * (PI * x).sin() + b * (k * PI * x).sin());
    let m = f.max();
    if m > 0.8 {
        f.iter_mut().for_each(|v| *v *= 0.8 / m);
    }
    f
}

fn jacobian_correctness() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = build_grid(Domain::Interval { length: 1.0 }, 101).unwrap();
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let params = Params::with_lambda(rng.gen_range(0.5..9.0));
        let psi = smooth_psi(&grid, &mut rng);
        let w = random_interior(&grid, &mut rng, 1.0);
        let jw = reaction_jacobian(&grid, &psi, &params).unwrap().apply(&grid, &w).unwrap();
        let shifted = |s: f64| Field::new(psi.iter().zip(w.iter()).map(|(p, d)| p + s * d).collect());
        let fp = reaction(&grid, &shifted(eps), &params, false).unwrap();
        let fm = reaction(&grid, &shifted(-eps), &params, false).unwrap();
        let num = jw
            .iter()
            .zip(fp.iter().zip(fm.iter()))
            .map(|(j, (p, m))| (j - (p - m) / (2.0 * eps)).abs())
            .fold(0.0, f64::max);
        let den = jw.iter().map(|v| v.abs()).fold(0.0, f64::max);
        worst = worst.max(num / den);
    }
    out.check(worst <= 1e-6, format!("20 directional derivatives, worst relative error {worst:.3e} <= 1e-6"));

    let mut worst = 0.0f64;
    for n in [9, 33, 64] {
        let grid = build_grid(Domain::Interval { length: 1.0 }, n).unwrap();
        let params = Params::with_lambda(rng.gen_range(1.0..8.0));
        let psi = smooth_psi(&grid, &mut rng);
        let rhs = random_interior(&grid, &mut rng, 1.0);
        let x = linearized_solve(&grid, &psi, &params, &rhs).unwrap();
        let dense = dense_linearization(&grid, &psi, &params);
        let oracle = dense.lu().solve(&DVector::from_column_slice(&rhs)).expect("dense oracle");
        let err = x.iter().zip(oracle.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = oracle.iter().map(|v| v.abs()).fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    out.check(worst <= 1e-8, format!("Sherman-Morrison vs dense LU (n = 9, 33, 64): worst relative error {worst:.3e} <= 1e-8"));
    out
}

/// Dense `−Δ_h − J(ψ)` assembled column by column from the operators
/// themselves, with identity rows on the boundary.
fn dense_linearization(grid: &Grid, psi: &Field, params: &Params) -> DMatrix<f64> {
    let n = grid.len();
    let jac = reaction_jacobian(grid, psi, params).unwrap();
    let mut m = DMatrix::zeros(n, n);
    for col in 0..n {
        let mut e = Field::new(vec![0.0; n]);
        e[col] = 1.0;
        if !grid.is_interior(col) {
            m[(col, col)] = 1.0;
            continue;
        }
        let lap = laplacian_apply(grid, &e).unwrap();
        let j = jac.apply(grid, &e).unwrap();
        for row in 0..n {
            if grid.is_interior(row) {
                m[(row, col)] = -lap[row] - j[row];
            }
        }
    }
    m
}

fn quadrature_and_laplacian() -> Outcome {
    let mut out = Outcome::new();
    let f = |x: f64, _: f64| x * (1.0 - x);
    let err_at = |n: usize| {
        let g = build_grid(Domain::Interval { length: 1.0 }, n).unwrap();
        (quadrature(&g, &Field::from_fn(&g, f)).unwrap() - 1.0 / 6.0).abs()
    };
    let e101 = err_at(101);
    out.check(e101 <= 1e-4, format!("x(1-x) at n=101: error {e101:.3e} <= 1e-4"));
    let ratios: Vec<f64> = [(51, 101), (101, 201), (201, 401)].iter().map(|&(a, b)| err_at(a) / err_at(b)).collect();
    out.check(
        ratios.iter().all(|r| (r - 4.0).abs() < 0.1),
        format!("error ratio under halving h: {ratios:.4?} (second order -> 4)"),
    );
    let e1001 = err_at(1001);
    out.check((e101 / e1001 - 100.0).abs() < 1.0, format!("n=101 vs n=1001 error ratio {:.3} (expect 100)", e101 / e1001));

    let mut worst = 0.0f64;
    for n in [5, 11, 40, 101] {
        let g = build_grid(Domain::Interval { length: 1.0 }, n).unwrap();
        let lap = laplacian_apply(&g, &Field::from_fn(&g, f)).unwrap();
        let h2 = g.h() * g.h();
        worst = worst.max((0..g.len()).filter(|&k| g.is_interior(k)).map(|k| h2 * (lap[k] + 2.0).abs()).fold(0.0, f64::max));
        let g = build_grid(Domain::RadialDisk { radius: 1.0 }, n).unwrap();
        let lap = laplacian_apply(&g, &Field::from_fn(&g, |r, _| 1.0 - r * r)).unwrap();
        let h2 = g.h() * g.h();
        worst = worst.max((0..g.len()).filter(|&k| g.is_interior(k)).map(|k| h2 * (lap[k] + 4.0).abs()).fold(0.0, f64::max));
        let g = build_grid(Domain::Rectangle { lx: 1.0, ly: 1.0 }, n.min(41)).unwrap();
        let u = Field::from_fn(&g, |x, y| x * (1.0 - x) * y * (1.0 - y));
        let lap = laplacian_apply(&g, &u).unwrap();
        let h2 = g.h() * g.h();
        worst = worst.max(
            (0..g.len())
                .filter(|&k| g.is_interior(k))
                .map(|k| {
                    let [x, y] = g.coords(k);
                    h2 * (lap[k] + 2.0 * x * (1.0 - x) + 2.0 * y * (1.0 - y)).abs()
                })
                .fold(0.0, f64::max),
        );
    }
    out.check(worst <= 1e-12, format!("h^2-scaled Laplacian error on quadratics (interval, radial, square): {worst:.3e} <= 1e-12"));

    let mut worst = 0.0f64;
    for n in [3, 4, 7, 50, 201] {
        for d in [
            Domain::Interval { length: 2.5 },
            Domain::RadialDisk { radius: 0.7 },
            Domain::Rectangle { lx: 1.0, ly: 3.0 },
            Domain::Disk { radius: 1.3 },
        ] {
            let g = build_grid(d, n).unwrap();
            let s: f64 = g.quad_weights().iter().sum();
            worst = worst.max((s - d.measure()).abs() / d.measure());
        }
    }
    out.check(worst <= 1e-10, format!("weights sum to the measure on every domain: worst relative gap {worst:.3e}"));
    out
}

fn bound_consistency() -> Outcome {
    let mut out = Outcome::new();
    let bound = nonexistence_bound(Domain::RadialDisk { radius: 1.0 }, None).unwrap();
    let expected = 4.0 * (1.0 + PI).powi(4) / (2.0 * PI);
    out.check((bound - expected).abs() <= 1e-12 * expected, format!("bound = {bound:.6} (closed form {expected:.6})"));
    let c = classify(1.1 * bound, &scenario("disk-radial"));
    out.check(c.verdict == Verdict::Quenched, format!("lambda = 1.1 x bound = {:.4}: {} at t={:.5}", 1.1 * bound, c.verdict.label(), c.t_terminal));
    out
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1d dichotomy at lambda 8.53 / 8.54", one_d_dichotomy),
        ("1d critical bracket", one_d_bracket),
        ("radial disk dichotomy and bracket", radial_disk),
        ("square dichotomy and bracket", square),
        ("non-radial disk datum converges at lambda 20", non_radial_disk),
        ("energy is a Lyapunov functional", energy_lyapunov),
        ("steady state equals long-time limit", steady_dynamic_equivalence),
        ("exponential decay at lambda 8", exponential_decay),
        ("midpoint value increases with lambda", lambda_monotonicity),
        ("jacobian and rank-one solve", jacobian_correctness),
        ("quadrature and laplacian oracles", quadrature_and_laplacian),
        ("nonexistence bound consistency", bound_consistency),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, criterion) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = criterion();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {name} [{:.1}s]", start.elapsed().as_secs_f64());
        for d in &outcome.details {
            println!("       {d}");
        }
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
