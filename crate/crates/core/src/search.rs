//! Convergence/quench classification of a voltage and bisection of the
//! critical voltage.

use crate::error::{MemsError, Result};
use crate::integrator::{run, SimConfig, SimOutcome, TrajectorySample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    Quenched,
    /// `t_max` was reached with neither criterion firing, or the run failed.
    Undetermined,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Quenched => "quenched",
            Verdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaClassification {
    pub lambda: f64,
    pub verdict: Verdict,
    pub t_terminal: f64,
    pub evidence: Option<TrajectorySample>,
    /// Set when the simulation itself failed.
    pub reason: Option<String>,
    /// Final horizon of the run(s) behind this verdict.
    pub t_max_used: f64,
}

/// Runs the scenario once at `lambda`.
pub fn classify(lambda: f64, scenario: &SimConfig) -> LambdaClassification {
    classify_extended(lambda, scenario, 1)
}

/// Like [`classify`], but an undetermined run is resumed from its final
/// state with the horizon doubled, up to `max_factor × t_max`.
pub fn classify_extended(lambda: f64, scenario: &SimConfig, max_factor: u32) -> LambdaClassification {
    let mut cfg = scenario.with_lambda(lambda);
    cfg.snapshot_times.clear();
    cfg.record_every = usize::MAX;
    let horizon_cap = scenario.t_max * f64::from(max_factor.max(1));
    loop {
        let result = match run(&cfg) {
            Ok(r) => r,
            Err(e) => {
                return LambdaClassification {
                    lambda,
                    verdict: Verdict::Undetermined,
                    t_terminal: cfg.t_start,
                    evidence: None,
                    reason: Some(e.to_string()),
                    t_max_used: cfg.t_max,
                }
            }
        };
        let evidence = result.samples.last().copied();
        let (verdict, t_terminal) = match &result.outcome {
            SimOutcome::Converged { t_reached, .. } => (Verdict::Converged, *t_reached),
            SimOutcome::Quenched { t_quench, .. } => (Verdict::Quenched, *t_quench),
            SimOutcome::TimedOut { .. } => (Verdict::Undetermined, result.t_end),
        };
        if verdict != Verdict::Undetermined || cfg.t_max >= horizon_cap * (1.0 - 1e-12) {
            return LambdaClassification { lambda, verdict, t_terminal, evidence, reason: None, t_max_used: cfg.t_max };
        }
        cfg.u0 = result.last_state;
        cfg.t_start = result.t_end;
        cfg.t_max = (2.0 * cfg.t_max).min(horizon_cap);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectOptions {
    pub tol: f64,
    /// Horizon cap for undetermined runs, as a multiple of the scenario's `t_max`.
    pub max_extension: u32,
    /// Voltages classified concurrently per round; 1 is plain bisection.
    pub jobs: usize,
}

impl Default for BisectOptions {
    fn default() -> Self {
        Self { tol: 0.05, max_extension: 8, jobs: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct BisectResult {
    pub lo: f64,
    pub hi: f64,
    /// Every classification in evaluation order (bracket ends first).
    pub history: Vec<LambdaClassification>,
    /// Pairs `(converged λ, quenched λ)` with the converged one above.
    pub monotonicity_violations: Vec<(f64, f64)>,
}

/// Undetermined after the extension cap counts as converged.
fn settles(c: &LambdaClassification) -> bool {
    c.verdict != Verdict::Quenched
}

fn classify_batch(lambdas: &[f64], scenario: &SimConfig, opts: &BisectOptions) -> Vec<LambdaClassification> {
    if lambdas.len() == 1 || opts.jobs <= 1 {
        return lambdas.iter().map(|&l| classify_extended(l, scenario, opts.max_extension)).collect();
    }
    let work = || {
        use rayon::prelude::*;
        lambdas
            .par_iter()
            .map(|&l| classify_extended(l, scenario, opts.max_extension))
            .collect::<Vec<_>>()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    }
}

/// Shrinks `[lo, hi]` around the critical voltage until `hi − lo ≤ tol`.
pub fn bisect_lambda_star(scenario: &SimConfig, lo: f64, hi: f64, opts: &BisectOptions) -> Result<BisectResult> {
    if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
        return Err(MemsError::InvalidBracket(format!("need 0 <= lo < hi, got ({lo}, {hi})")));
    }
    if !(opts.tol > 0.0) {
        return Err(MemsError::InvalidBracket(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let ends = classify_batch(&[lo, hi], scenario, opts);
    if !settles(&ends[0]) {
        return Err(MemsError::InvalidBracket(format!("lower end {lo} quenches")));
    }
    if ends[1].verdict != Verdict::Quenched {
        return Err(MemsError::InvalidBracket(format!("upper end {hi} is {}", ends[1].verdict.label())));
    }
    let mut history = ends;
    let (mut lo, mut hi) = (lo, hi);
    let k = opts.jobs.max(1);
    while hi - lo > opts.tol {
        let probes: Vec<f64> = (1..=k).map(|i| lo + (hi - lo) * i as f64 / (k + 1) as f64).collect();
        let verdicts = classify_batch(&probes, scenario, opts);
        let first_quench = verdicts.iter().position(|c| !settles(c));
        let new_hi = first_quench.map(|i| probes[i]).unwrap_or(hi);
        let new_lo = verdicts
            .iter()
            .zip(&probes)
            .filter(|(c, &p)| settles(c) && p < new_hi)
            .map(|(_, &p)| p)
            .fold(lo, f64::max);
        history.extend(verdicts);
        lo = new_lo;
        hi = new_hi;
    }
    let mut violations = Vec::new();
    for c in history.iter().filter(|c| settles(c)) {
        for q in history.iter().filter(|q| !settles(q)) {
            if c.lambda > q.lambda {
                violations.push((c.lambda, q.lambda));
            }
        }
    }
    Ok(BisectResult { lo, hi, history, monotonicity_violations: violations })
}
