//! Energy functional, weighted norms, decay-rate fitting, and the
//! star-shaped-domain nonexistence bound.

use std::f64::consts::PI;

use crate::error::{MemsError, Result};
use crate::grid::{weighted_sum, Domain, Grid};
use crate::nonlocal::{nonlocal_integral, Params};

/// Distances at or below this are treated as floating-point noise when
/// choosing a fit window.
pub const DISTANCE_FLOOR: f64 = 1e-12;

/// ½∫|∇u|² with forward differences on cells.
pub fn dirichlet_energy(grid: &Grid, u: &[f64]) -> Result<f64> {
    grid.check_field(u)?;
    let n = grid.n();
    let sq = |a: f64, b: f64, h: f64| {
        let d = (b - a) / h;
        d * d
    };
    let value = match grid.domain() {
        Domain::Interval { .. } => {
            let h = grid.h();
            (0..n - 1).map(|i| sq(u[i], u[i + 1], h) * h).sum::<f64>()
        }
        Domain::RadialDisk { .. } => {
            let (h, r) = (grid.h(), grid.x_axis());
            (0..n - 1)
                .map(|i| 2.0 * PI * 0.5 * (r[i] + r[i + 1]) * sq(u[i], u[i + 1], h) * h)
                .sum::<f64>()
        }
        Domain::Rectangle { .. } | Domain::Disk { .. } => {
            let [hx, hy] = grid.spacing();
            // cell area matching the interior quadrature weight (rescaled on the disk)
            let area = match grid.domain() {
                Domain::Disk { .. } => grid
                    .quad_weights()
                    .iter()
                    .copied()
                    .find(|&w| w > 0.0)
                    .unwrap_or(hx * hy),
                _ => hx * hy,
            };
            let mut s = 0.0;
            for j in 0..n {
                for i in 0..n {
                    let k = j * n + i;
                    if i + 1 < n {
                        s += sq(u[k], u[k + 1], hx) * area;
                    }
                    if j + 1 < n {
                        s += sq(u[k], u[k + n], hy) * area;
                    }
                }
            }
            s
        }
    };
    Ok(0.5 * value)
}

/// `E(u) = ½∫|∇u|² + λ / (α (1 + α ∫ 1/(1−u)))`, which reduces to
/// `½∫|∇u|² + λ/(1 + ∫1/(1−u))` at α = 1.
pub fn energy(grid: &Grid, u: &[f64], params: &Params) -> Result<f64> {
    let integral = nonlocal_integral(grid, u, params, false)?;
    Ok(energy_with_integral(grid, u, params, integral)?)
}

pub(crate) fn energy_with_integral(grid: &Grid, u: &[f64], params: &Params, integral: f64) -> Result<f64> {
    let a = params.alpha;
    Ok(dirichlet_energy(grid, u)? + params.lambda / (a * (1.0 + a * integral)))
}

/// `sqrt(Σ wᵢ (aᵢ − bᵢ)²)`
pub fn l2_distance(grid: &Grid, a: &[f64], b: &[f64]) -> Result<f64> {
    grid.check_field(a)?;
    grid.check_field(b)?;
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    Ok(weighted_sum(grid, &sq).sqrt())
}

pub(crate) fn weighted_norm(grid: &Grid, a: &[f64]) -> f64 {
    let sq: Vec<f64> = a.iter().map(|x| x * x).collect();
    weighted_sum(grid, &sq).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayModel {
    /// `d(t) ≈ amplitude · e^{−rate·t}`
    Exponential { rate: f64, amplitude: f64 },
    /// `d(t) ≈ amplitude · (1 + t)^{−exponent}`
    Algebraic { exponent: f64, amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSelection {
    Auto,
    Exponential,
    Algebraic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub model: DecayModel,
    pub r_squared: f64,
    pub window: (f64, f64),
    /// Łojasiewicz exponent consistent with the fit: 1/2 for exponential
    /// decay, otherwise θ with θ/(1 − 2θ) = exponent.
    pub theta_implied: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayEstimate {
    Fitted(DecayFit),
    /// Every distance was exactly zero.
    ExactlyConverged,
}

struct LineFit {
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 0.0 };
    LineFit { slope, intercept, r_squared }
}

/// Fits exponential and/or algebraic decay to `(t, distance)` samples by
/// least squares in log space. Needs at least 10 positive distances.
pub fn fit_decay(samples: &[(f64, f64)], selection: ModelSelection) -> Result<DecayEstimate> {
    if !samples.is_empty() && samples.iter().all(|&(_, d)| d == 0.0) {
        return Ok(DecayEstimate::ExactlyConverged);
    }
    let usable: Vec<(f64, f64)> = samples.iter().copied().filter(|&(t, d)| d > 0.0 && t.is_finite()).collect();
    if usable.len() < 10 {
        return Err(MemsError::InsufficientData(format!(
            "need 10 samples with positive distance, got {}",
            usable.len()
        )));
    }
    let window = (usable[0].0, usable[usable.len() - 1].0);
    let logs: Vec<f64> = usable.iter().map(|&(_, d)| d.ln()).collect();

    let exp_fit = {
        let ts: Vec<f64> = usable.iter().map(|&(t, _)| t).collect();
        let fit = least_squares(&ts, &logs);
        (fit.slope < 0.0).then(|| DecayFit {
            model: DecayModel::Exponential { rate: -fit.slope, amplitude: fit.intercept.exp() },
            r_squared: fit.r_squared,
            window,
            theta_implied: 0.5,
        })
    };
    let alg_fit = if usable.iter().all(|&(t, _)| t > -1.0) {
        let ls: Vec<f64> = usable.iter().map(|&(t, _)| (1.0 + t).ln()).collect();
        let fit = least_squares(&ls, &logs);
        (fit.slope < 0.0).then(|| {
            let p = -fit.slope;
            DecayFit {
                model: DecayModel::Algebraic { exponent: p, amplitude: fit.intercept.exp() },
                r_squared: fit.r_squared,
                window,
                theta_implied: p / (1.0 + 2.0 * p),
            }
        })
    } else {
        None
    };

    let chosen = match selection {
        ModelSelection::Exponential => exp_fit,
        ModelSelection::Algebraic => alg_fit,
        ModelSelection::Auto => match (exp_fit, alg_fit) {
            (Some(e), Some(a)) => Some(if a.r_squared > e.r_squared { a } else { e }),
            (e, a) => e.or(a),
        },
    };
    chosen.map(DecayEstimate::Fitted).ok_or(MemsError::NoDecay)
}

/// Default fit window: the last 60% of the samples whose distance exceeds
/// [`DISTANCE_FLOOR`].
pub fn default_fit_window(samples: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let above: Vec<(f64, f64)> = samples.iter().copied().filter(|&(_, d)| d > DISTANCE_FLOOR).collect();
    let skip = above.len() - (above.len() * 3).div_ceil(5);
    above[skip..].to_vec()
}

/// Star-shape constant for a disk: ν(x)·x = R on the boundary circle of
/// length 2πR, so β = 1/(2π) for every radius.
fn disk_beta() -> f64 {
    1.0 / (2.0 * PI)
}

/// Voltage above which no steady state exists on a strictly star-shaped
/// 2D domain: `N (1 + |Ω|)⁴ / (2 β |Ω|²)`.
///
/// `beta = None` is accepted for disks, where the star-shape constant is
/// known in closed form; other domains need it supplied.
pub fn nonexistence_bound(domain: Domain, beta: Option<f64>) -> Result<f64> {
    domain.validate().map_err(|e| MemsError::UnsupportedDomain(e.to_string()))?;
    let dim = domain.dimension();
    if dim < 2 {
        return Err(MemsError::UnsupportedDomain(format!(
            "the nonexistence bound needs dimension >= 2, {domain:?} is 1D"
        )));
    }
    let beta = match (beta, domain) {
        (Some(b), _) if b > 0.0 && b.is_finite() => b,
        (Some(b), _) => return Err(MemsError::InvalidParams(format!("beta must be > 0, got {b}"))),
        (None, Domain::RadialDisk { .. } | Domain::Disk { .. }) => disk_beta(),
        (None, _) => {
            return Err(MemsError::InvalidParams(format!(
                "beta must be supplied for {domain:?}"
            )))
        }
    };
    let m = domain.measure();
    Ok(dim as f64 * (1.0 + m).powi(4) / (2.0 * beta * m * m))
}
