//! Steady states `−Δφ = f(φ)` by damped Newton, and continuation of the
//! minimal branch in λ.
//!
//! The Newton matrix is `−Δ_h − D + a·(w∘b)ᵀ`, where `D`, `a`, `b` come from
//! [`reaction_jacobian`]. The banded part `−Δ_h − D` is factored with
//! partial pivoting (it turns indefinite on the upper part of the local
//! branch) and the rank-one coupling is folded in with Sherman–Morrison.

use crate::diagnostics::weighted_norm;
use crate::error::{MemsError, Result};
use crate::grid::{laplacian_apply, Field, Grid};
use crate::linalg::{sherman_morrison_solve, BandedMatrix};
use crate::nonlocal::{reaction, reaction_jacobian, Params};

/// Trial iterates must keep `max φ` below `1 − MAX_PHI_MARGIN`.
pub const MAX_PHI_MARGIN: f64 = 1e-6;

/// Continuation stops refining a failed λ-step below this size.
pub const LAMBDA_STEP_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Target for the quadrature-weighted L² residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Smallest damping factor tried before giving up.
    pub damping_floor: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 50, damping_floor: 2f64.powi(-20) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub lambda: f64,
    pub phi: Field,
    pub max_phi: f64,
    pub newton_iters: usize,
    pub residual_norm: f64,
    /// Weighted residual norm before each Newton step, then the final one.
    pub residual_history: Vec<f64>,
}

/// `−Δ_h φ − f(φ)` at interior nodes, zero on the boundary.
pub fn residual(grid: &Grid, phi: &[f64], params: &Params) -> Result<Field> {
    let lap = laplacian_apply(grid, phi)?;
    let f = reaction(grid, phi, params, false)?;
    let mut r: Vec<f64> = lap.iter().zip(f.iter()).map(|(l, fv)| -l - fv).collect();
    for (v, &inside) in r.iter_mut().zip(grid.interior_mask()) {
        if !inside {
            *v = 0.0;
        }
    }
    Ok(Field::new(r))
}

/// Solves the linearised steady problem `(−Δ_h − J(ψ)) x = rhs`, with `x`
/// pinned to zero at Dirichlet nodes.
pub fn linearized_solve(grid: &Grid, psi: &[f64], params: &Params, rhs: &[f64]) -> Result<Field> {
    grid.check_field(rhs)?;
    let jac = reaction_jacobian(grid, psi, params)?;
    let n = grid.len();
    let band = grid.bandwidth();
    let mut m = BandedMatrix::zeros(n, band, band);
    let lap = grid.laplacian_rows();
    for k in 0..n {
        if !grid.is_interior(k) {
            m.add(k, k, 1.0);
            continue;
        }
        for (c, a) in lap.row(k) {
            if grid.is_interior(c) {
                m.add(k, c, -a);
            }
        }
        m.add(k, k, -jac.diag[k]);
    }
    let lu = m.factor()?;
    let mut b = rhs.to_vec();
    let mut left = jac.left.into_values();
    for k in 0..n {
        if !grid.is_interior(k) {
            b[k] = 0.0;
            left[k] = 0.0;
        }
    }
    let weighted_right: Vec<f64> = jac.right.iter().zip(grid.quad_weights()).map(|(r, w)| r * w).collect();
    let x = sherman_morrison_solve(|v| lu.solve(v), &left, &weighted_right, &b)?;
    Ok(Field::new(x))
}

fn residual_norm(grid: &Grid, phi: &[f64], params: &Params) -> Result<(Field, f64)> {
    let r = residual(grid, phi, params)?;
    let norm = weighted_norm(grid, &r);
    Ok((r, norm))
}

/// Damped Newton from `phi0`.
pub fn newton_solve(grid: &Grid, phi0: &Field, params: &Params, opts: &NewtonOptions) -> Result<BranchPoint> {
    params.validate()?;
    grid.check_boundary(phi0)?;
    if phi0.max() >= 1.0 {
        return Err(MemsError::Singular { max_u: phi0.max(), node: phi0.argmax() });
    }
    let mut phi = phi0.clone();
    let (mut r, mut norm) = residual_norm(grid, &phi, params)?;
    let mut history = vec![norm];
    let mut iters = 0;
    while norm > opts.tol {
        if iters >= opts.max_iters {
            return Err(MemsError::NoConvergence { residual: norm, iters });
        }
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = linearized_solve(grid, &phi, params, &neg_r)?;
        let mut damping = 1.0;
        loop {
            if damping < opts.damping_floor {
                return Err(MemsError::StepCollapse { residual: norm });
            }
            let trial = Field::new(phi.iter().zip(delta.iter()).map(|(p, d)| p + damping * d).collect());
            if trial.max() < 1.0 - MAX_PHI_MARGIN {
                if let Ok((tr, tn)) = residual_norm(grid, &trial, params) {
                    if tn < norm {
                        phi = trial;
                        r = tr;
                        norm = tn;
                        break;
                    }
                }
            }
            damping *= 0.5;
        }
        iters += 1;
        history.push(norm);
    }
    Ok(BranchPoint {
        lambda: params.lambda,
        max_phi: phi.max(),
        phi,
        newton_iters: iters,
        residual_norm: norm,
        residual_history: history,
    })
}

#[derive(Debug, Clone)]
pub struct Continuation {
    /// Solutions at the requested targets that were reached.
    pub points: Vec<BranchPoint>,
    /// Largest λ solved before the step size fell below [`LAMBDA_STEP_FLOOR`].
    pub fold_estimate: Option<f64>,
    /// Targets that could not be reached, with the error that stopped them.
    pub failures: Vec<(f64, MemsError)>,
    /// Whether successive branch points are pointwise nondecreasing.
    pub monotone: bool,
}

/// Walks the minimal branch through increasing `targets`, warm-starting
/// each solve from the previous one.
pub fn continuation(grid: &Grid, targets: &[f64], template: &Params, opts: &NewtonOptions) -> Continuation {
    let mut points: Vec<BranchPoint> = Vec::new();
    let mut failures = Vec::new();
    let mut fold_estimate = None;
    let mut current_lambda = 0.0;
    let mut current_phi = Field::zeros(grid);

    let mut idx = 0;
    'targets: while idx < targets.len() {
        let target = targets[idx];
        let mut step = target - current_lambda;
        loop {
            let lambda = if step >= target - current_lambda { target } else { current_lambda + step };
            let params = Params { lambda, ..*template };
            match newton_solve(grid, &current_phi, &params, opts) {
                Ok(point) => {
                    current_lambda = lambda;
                    current_phi = point.phi.clone();
                    if lambda == target {
                        points.push(point);
                        idx += 1;
                        continue 'targets;
                    }
                    step = target - current_lambda;
                }
                Err(err) => {
                    step *= 0.5;
                    if step.abs() < LAMBDA_STEP_FLOOR {
                        fold_estimate = Some(current_lambda);
                        failures.extend(targets[idx..].iter().map(|&t| (t, err.clone())));
                        break 'targets;
                    }
                }
            }
        }
    }
    let monotone = points
        .windows(2)
        .all(|w| w[0].phi.iter().zip(w[1].phi.iter()).all(|(a, b)| *b >= *a - 1e-10));
    Continuation { points, fold_estimate, failures, monotone }
}
