//! Right-hand side of the nonlocal MEMS equation
//!
//! ```text
//! f(u) = λ / ((1 − u)² (1 + α ∫_Ω 1/(1 − u) dx)²)
//! ```
//!
//! together with its truncated variant (1/(1−u) capped at 1/δ) and the
//! derivative of `f` as a diagonal-plus-rank-one operator.

use crate::error::{MemsError, Result};
use crate::grid::{weighted_sum, Field, Grid};

/// Scalar parameters of the equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Applied voltage λ ≥ 0.
    pub lambda: f64,
    /// Series-capacitance coupling α > 0.
    pub alpha: f64,
    /// Truncation level δ ∈ (0, 1/2).
    pub delta_trunc: f64,
    /// Quench threshold: the run stops once max u ≥ 1 − quench_eps.
    pub quench_eps: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self { lambda: 0.0, alpha: 1.0, delta_trunc: 0.05, quench_eps: 1e-2 }
    }
}

impl Params {
    pub fn with_lambda(lambda: f64) -> Self {
        Self { lambda, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MemsError::InvalidParams(msg));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be a finite value >= 0, got {}", self.lambda));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.delta_trunc > 0.0 && self.delta_trunc < 0.5) {
            return bad(format!("delta_trunc must lie in (0, 1/2), got {}", self.delta_trunc));
        }
        if !(self.quench_eps > 0.0 && self.quench_eps < 1.0) {
            return bad(format!("quench_eps must lie in (0, 1), got {}", self.quench_eps));
        }
        Ok(())
    }
}

/// `1/(1 − v)` for `v ≤ 1 − δ`, else `1/δ`.
pub fn g_trunc(v: f64, delta: f64) -> f64 {
    if v <= 1.0 - delta {
        1.0 / (1.0 - v)
    } else {
        1.0 / delta
    }
}

/// Pointwise `1/(1 − u)` (or its truncation). Errors when an untruncated
/// evaluation meets `u ≥ 1`.
fn reciprocal_gap(u: &[f64], params: &Params, truncated: bool) -> Result<Vec<f64>> {
    if truncated {
        return Ok(u.iter().map(|&v| g_trunc(v, params.delta_trunc)).collect());
    }
    u.iter()
        .enumerate()
        .map(|(k, &v)| {
            if v < 1.0 {
                Ok(1.0 / (1.0 - v))
            } else {
                Err(MemsError::Singular { max_u: v, node: k })
            }
        })
        .collect()
}

/// `I = ∫_Ω g(u) dx` by the grid quadrature.
pub fn nonlocal_integral(grid: &Grid, u: &[f64], params: &Params, truncated: bool) -> Result<f64> {
    grid.check_field(u)?;
    let g = reciprocal_gap(u, params, truncated)?;
    Ok(weighted_sum(grid, &g))
}

/// Reaction values plus the nonlocal integral they share.
#[derive(Debug, Clone)]
pub struct ReactionEval {
    pub values: Field,
    pub integral: f64,
}

pub fn reaction_eval(grid: &Grid, u: &[f64], params: &Params, truncated: bool) -> Result<ReactionEval> {
    grid.check_field(u)?;
    let g = reciprocal_gap(u, params, truncated)?;
    let integral = weighted_sum(grid, &g);
    let denom = 1.0 + params.alpha * integral;
    let scale = params.lambda / (denom * denom);
    let values = g.iter().map(|gi| scale * gi * gi).collect();
    Ok(ReactionEval { values: Field::new(values), integral })
}

/// `f(u) = λ g(u)² / (1 + α I)²` at every node.
pub fn reaction(grid: &Grid, u: &[f64], params: &Params, truncated: bool) -> Result<Field> {
    reaction_eval(grid, u, params, truncated).map(|r| r.values)
}

/// Derivative of the reaction at ψ:
/// `w ↦ diag·w − left·⟨right, w⟩`, where `⟨·,·⟩` is the grid quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneJacobian {
    pub diag: Field,
    pub left: Field,
    pub right: Field,
}

impl RankOneJacobian {
    pub fn apply(&self, grid: &Grid, w: &[f64]) -> Result<Field> {
        grid.check_field(w)?;
        let rw: Vec<f64> = self.right.iter().zip(w).map(|(r, x)| r * x).collect();
        let coupling = weighted_sum(grid, &rw);
        Ok(Field::new(
            self.diag
                .iter()
                .zip(self.left.iter())
                .zip(w)
                .map(|((d, l), x)| d * x - l * coupling)
                .collect(),
        ))
    }
}

pub fn reaction_jacobian(grid: &Grid, psi: &[f64], params: &Params) -> Result<RankOneJacobian> {
    grid.check_field(psi)?;
    let g = reciprocal_gap(psi, params, false)?;
    let denom = 1.0 + params.alpha * weighted_sum(grid, &g);
    let lambda = params.lambda;
    let d2 = denom * denom;
    let d3 = d2 * denom;
    let diag = g.iter().map(|gi| 2.0 * lambda * gi * gi * gi / d2).collect();
    let left = g.iter().map(|gi| 2.0 * params.alpha * lambda * gi * gi / d3).collect();
    let right = g.iter().map(|gi| gi * gi).collect();
    Ok(RankOneJacobian { diag: Field::new(diag), left: Field::new(left), right: Field::new(right) })
}
