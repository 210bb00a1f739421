//! Geometry descriptors, their uniform finite-difference grids, and the
//! discrete operators built on them (Laplacian, quadrature, backward-Euler
//! diffusion solve).
//!
//! Node ordering: 1D grids are indexed left to right (radius outward for
//! [`Domain::RadialDisk`]); 2D grids are row-major with `k = j·n + i`, where
//! `i` indexes x and `j` indexes y.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use crate::error::{MemsError, Result};
use crate::linalg::{conjugate_gradient, solve_tridiagonal, SparseRows};

/// Relative residual target for the 2D diffusion solve. Two orders below
/// 1e-10 so that the solution itself is accurate to ~1e-9 on stiff grids.
pub const CG_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval { length: f64 },
    /// Radially symmetric solutions on a 2D disk; the coordinate is r ∈ [0, radius].
    RadialDisk { radius: f64 },
    /// `[0, lx] × [0, ly]`.
    Rectangle { lx: f64, ly: f64 },
    /// Full 2D disk centred at the origin, discretised on the embedded square
    /// `[-radius, radius]²` with a staircase Dirichlet boundary.
    Disk { radius: f64 },
}

impl Domain {
    /// |Ω|
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { length } => length,
            Domain::RadialDisk { radius } | Domain::Disk { radius } => PI * radius * radius,
            Domain::Rectangle { lx, ly } => lx * ly,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Number of stored grid axes (a radial grid is 2D geometry on a 1D axis).
    pub fn axes(&self) -> usize {
        match self {
            Domain::Interval { .. } | Domain::RadialDisk { .. } => 1,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let good = match *self {
            Domain::Interval { length } => ok(length),
            Domain::RadialDisk { radius } | Domain::Disk { radius } => ok(radius),
            Domain::Rectangle { lx, ly } => ok(lx) && ok(ly),
        };
        if good {
            Ok(())
        } else {
            Err(MemsError::InvalidGrid(format!("nonpositive geometry in {self:?}")))
        }
    }
}

/// Nodal values of a scalar on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Grid, v: f64) -> Self {
        Self { values: vec![v; grid.len()] }
    }

    /// Samples `f(x, y)` at every node (`y = 0` on 1D grids).
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            values: (0..grid.len())
                .map(|k| {
                    let [x, y] = grid.coords(k);
                    f(x, y)
                })
                .collect(),
        }
    }

    /// Same as [`Field::from_fn`] but zeroes every Dirichlet node.
    pub fn from_fn_dirichlet(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut field = Self::from_fn(grid, f);
        field.zero_boundary(grid);
        field
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
            .0
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn zero_boundary(&mut self, grid: &Grid) {
        for (v, &inside) in self.values.iter_mut().zip(&grid.interior) {
            if !inside {
                *v = 0.0;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// A uniform grid over a [`Domain`]. Immutable once built.
#[derive(Debug, Clone)]
pub struct Grid {
    domain: Domain,
    n: usize,
    spacing: [f64; 2],
    axes: [Vec<f64>; 2],
    interior: Vec<bool>,
    weights: Vec<f64>,
    laplacian: SparseRows,
}

impl Grid {
    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Node count per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    /// Spacing along x (or r) and y; `hy` is 0 on 1D grids.
    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn h(&self) -> f64 {
        self.spacing[0]
    }

    /// Coordinates of the first axis (x or r).
    pub fn x_axis(&self) -> &[f64] {
        &self.axes[0]
    }

    /// Coordinates of the second axis; empty on 1D grids.
    pub fn y_axis(&self) -> &[f64] {
        &self.axes[1]
    }

    pub fn coords(&self, k: usize) -> [f64; 2] {
        if self.axes[1].is_empty() {
            [self.axes[0][k], 0.0]
        } else {
            [self.axes[0][k % self.n], self.axes[1][k / self.n]]
        }
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior
    }

    pub fn is_interior(&self, k: usize) -> bool {
        self.interior[k]
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Discrete Laplacian rows; boundary rows are empty.
    pub fn laplacian_rows(&self) -> &SparseRows {
        &self.laplacian
    }

    /// Half-bandwidth of the Laplacian in the node ordering.
    pub fn bandwidth(&self) -> usize {
        if self.axes[1].is_empty() {
            1
        } else {
            self.n
        }
    }

    /// Node nearest to `(x, y)`.
    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        let nearest = |axis: &[f64], v: f64| {
            axis.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        let i = nearest(&self.axes[0], x);
        if self.axes[1].is_empty() {
            i
        } else {
            nearest(&self.axes[1], y) * self.n + i
        }
    }

    /// Where the solution peaks for zero initial data: the midpoint of an
    /// interval, the centre of a disk, the centre of a rectangle.
    pub fn default_probe(&self) -> usize {
        match self.domain {
            Domain::Interval { length } => self.nearest_node(0.5 * length, 0.0),
            Domain::RadialDisk { .. } => 0,
            Domain::Rectangle { lx, ly } => self.nearest_node(0.5 * lx, 0.5 * ly),
            Domain::Disk { .. } => self.nearest_node(0.0, 0.0),
        }
    }

    pub fn check_field(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(MemsError::GridMismatch { expected: self.len(), found: f.len() });
        }
        Ok(())
    }

    pub fn check_boundary(&self, f: &[f64]) -> Result<()> {
        self.check_field(f)?;
        match f.iter().zip(&self.interior).position(|(&v, &inside)| !inside && v != 0.0) {
            Some(node) => Err(MemsError::BoundaryViolation { node, value: f[node] }),
            None => Ok(()),
        }
    }
}

fn trapezoid_factor(i: usize, n: usize) -> f64 {
    if i == 0 || i == n - 1 {
        0.5
    } else {
        1.0
    }
}

fn uniform_axis(start: f64, end: f64, n: usize) -> Vec<f64> {
    let h = (end - start) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { end } else { start + i as f64 * h }).collect()
}

/// Builds the uniform grid with `n` nodes per axis.
pub fn build_grid(domain: Domain, n: usize) -> Result<Grid> {
    domain.validate()?;
    if n < 3 {
        return Err(MemsError::InvalidGrid(format!("need at least 3 nodes per axis, got {n}")));
    }
    let grid = match domain {
        Domain::Interval { length } => {
            let h = length / (n - 1) as f64;
            let x = uniform_axis(0.0, length, n);
            let interior: Vec<bool> = (0..n).map(|i| i > 0 && i < n - 1).collect();
            let weights = (0..n).map(|i| trapezoid_factor(i, n) * h).collect();
            let c = 1.0 / (h * h);
            let rows = (0..n)
                .map(|i| {
                    if interior[i] {
                        vec![(i - 1, c), (i, -2.0 * c), (i + 1, c)]
                    } else {
                        Vec::new()
                    }
                })
                .collect();
            Grid {
                domain,
                n,
                spacing: [h, 0.0],
                axes: [x, Vec::new()],
                interior,
                weights,
                laplacian: SparseRows::from_rows(rows),
            }
        }
        Domain::RadialDisk { radius } => {
            let h = radius / (n - 1) as f64;
            let r = uniform_axis(0.0, radius, n);
            let interior: Vec<bool> = (0..n).map(|i| i < n - 1).collect();
            let weights = (0..n).map(|i| 2.0 * PI * r[i] * trapezoid_factor(i, n) * h).collect();
            let c = 1.0 / (h * h);
            let rows = (0..n)
                .map(|i| {
                    if i == 0 {
                        // Δu(0) = 2 u_rr(0) with u_r(0) = 0
                        vec![(0, -4.0 * c), (1, 4.0 * c)]
                    } else if i < n - 1 {
                        let a = 1.0 / (2.0 * r[i] * h);
                        vec![(i - 1, c - a), (i, -2.0 * c), (i + 1, c + a)]
                    } else {
                        Vec::new()
                    }
                })
                .collect();
            Grid {
                domain,
                n,
                spacing: [h, 0.0],
                axes: [r, Vec::new()],
                interior,
                weights,
                laplacian: SparseRows::from_rows(rows),
            }
        }
        Domain::Rectangle { lx, ly } => {
            let (hx, hy) = (lx / (n - 1) as f64, ly / (n - 1) as f64);
            let x = uniform_axis(0.0, lx, n);
            let y = uniform_axis(0.0, ly, n);
            let mut interior = vec![false; n * n];
            let mut weights = vec![0.0; n * n];
            for j in 0..n {
                for i in 0..n {
                    let k = j * n + i;
                    interior[k] = i > 0 && i < n - 1 && j > 0 && j < n - 1;
                    weights[k] = trapezoid_factor(i, n) * trapezoid_factor(j, n) * hx * hy;
                }
            }
            let laplacian = five_point(n, hx, hy, &interior);
            Grid { domain, n, spacing: [hx, hy], axes: [x, y], interior, weights, laplacian }
        }
        Domain::Disk { radius } => {
            let h = 2.0 * radius / (n - 1) as f64;
            let axis = uniform_axis(-radius, radius, n);
            let limit = radius * radius * (1.0 - 1e-12);
            let mut interior = vec![false; n * n];
            for j in 0..n {
                for i in 0..n {
                    interior[j * n + i] = axis[i] * axis[i] + axis[j] * axis[j] < limit;
                }
            }
            let count = interior.iter().filter(|&&b| b).count();
            if count == 0 {
                return Err(MemsError::InvalidGrid("disk grid has no interior nodes".into()));
            }
            // Equal cell weights rescaled so the staircase disk has the exact area.
            let cell = domain.measure() / count as f64;
            let weights = interior.iter().map(|&b| if b { cell } else { 0.0 }).collect();
            let laplacian = five_point(n, h, h, &interior);
            Grid { domain, n, spacing: [h, h], axes: [axis.clone(), axis], interior, weights, laplacian }
        }
    };
    Ok(grid)
}

fn five_point(n: usize, hx: f64, hy: f64, interior: &[bool]) -> SparseRows {
    let (cx, cy) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let rows = (0..n * n)
        .map(|k| {
            if !interior[k] {
                return Vec::new();
            }
            // interior nodes never sit on the outer ring, so all neighbours exist
            vec![(k - n, cy), (k - 1, cx), (k, -2.0 * (cx + cy)), (k + 1, cx), (k + n, cy)]
        })
        .collect();
    SparseRows::from_rows(rows)
}

/// `Σ wᵢ fᵢ`
pub fn quadrature(grid: &Grid, f: &[f64]) -> Result<f64> {
    grid.check_field(f)?;
    Ok(weighted_sum(grid, f))
}

pub(crate) fn weighted_sum(grid: &Grid, f: &[f64]) -> f64 {
    grid.weights.iter().zip(f).map(|(w, v)| w * v).sum()
}

/// Applies the Laplacian stencil at interior nodes using whatever values
/// the field holds at Dirichlet nodes. Boundary entries of the result are 0.
pub fn laplacian_stencil(grid: &Grid, f: &[f64]) -> Result<Field> {
    grid.check_field(f)?;
    Ok(Field::new((0..grid.len()).map(|k| grid.laplacian.row_dot(k, f)).collect()))
}

/// Δ_h f for a field satisfying the homogeneous Dirichlet condition.
pub fn laplacian_apply(grid: &Grid, f: &[f64]) -> Result<Field> {
    grid.check_boundary(f)?;
    laplacian_stencil(grid, f)
}

/// Solves `(I − dt·Δ_h) u = rhs` with Dirichlet nodes pinned to 0.
pub fn implicit_solve(grid: &Grid, dt: f64, rhs: &[f64]) -> Result<Field> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(MemsError::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    grid.check_field(rhs)?;
    let lap = &grid.laplacian;
    let mut u = vec![0.0; grid.len()];
    if grid.domain.axes() == 1 {
        // interior nodes form one contiguous run in 1D
        let idx: Vec<usize> = (0..grid.len()).filter(|&k| grid.interior[k]).collect();
        let first = idx[0];
        let m = idx.len();
        let (mut lower, mut diag, mut upper) = (vec![0.0; m], vec![1.0; m], vec![0.0; m]);
        for (row, &k) in idx.iter().enumerate() {
            for (c, a) in lap.row(k) {
                if !grid.interior[c] {
                    continue;
                }
                if c == k {
                    diag[row] -= dt * a;
                } else if c + 1 == k {
                    lower[row] = -dt * a;
                } else {
                    upper[row] = -dt * a;
                }
            }
        }
        let b: Vec<f64> = idx.iter().map(|&k| rhs[k]).collect();
        let x = solve_tridiagonal(&lower, &diag, &upper, &b)?;
        u[first..first + m].copy_from_slice(&x);
    } else {
        let mut b = rhs.to_vec();
        for (v, &inside) in b.iter_mut().zip(&grid.interior) {
            if !inside {
                *v = 0.0;
            }
        }
        let apply = |x: &[f64], out: &mut [f64]| {
            for k in 0..x.len() {
                out[k] = if grid.interior[k] {
                    x[k] - dt * lap.row(k).filter(|&(c, _)| grid.interior[c]).map(|(c, a)| a * x[c]).sum::<f64>()
                } else {
                    x[k]
                };
            }
        };
        u = conjugate_gradient(apply, &b, CG_REL_TOL, 20 * grid.len() + 100)?;
    }
    Ok(Field::new(u))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval(n: usize) -> Grid {
        build_grid(Domain::Interval { length: 1.0 }, n).unwrap()
    }

    #[test]
    fn interval_nodes_and_weights() {
        let g = unit_interval(5);
        assert_eq!(g.x_axis(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.quad_weights(), &[0.125, 0.25, 0.25, 0.25, 0.125]);
        assert_eq!(g.interior_mask(), &[false, true, true, true, false]);
    }

    #[test]
    fn rejects_small_n_and_bad_geometry() {
        assert!(matches!(build_grid(Domain::Interval { length: 1.0 }, 2), Err(MemsError::InvalidGrid(_))));
        assert!(matches!(build_grid(Domain::RadialDisk { radius: -1.0 }, 10), Err(MemsError::InvalidGrid(_))));
        assert!(matches!(build_grid(Domain::Rectangle { lx: 1.0, ly: 0.0 }, 10), Err(MemsError::InvalidGrid(_))));
    }

    #[test]
    fn weights_sum_to_measure() {
        let cases = [
            Domain::Interval { length: 2.5 },
            Domain::RadialDisk { radius: 1.0 },
            Domain::RadialDisk { radius: 0.7 },
            Domain::Rectangle { lx: 1.0, ly: 1.0 },
            Domain::Rectangle { lx: 2.0, ly: 0.5 },
            Domain::Disk { radius: 1.0 },
        ];
        for d in cases {
            for n in [3, 4, 11, 50] {
                let g = build_grid(d, n).unwrap();
                let s: f64 = g.quad_weights().iter().sum();
                assert!((s - d.measure()).abs() <= 1e-10 * d.measure(), "{d:?} n={n}: {s}");
                assert!(g.quad_weights().iter().all(|&w| w >= 0.0));
            }
        }
    }

    #[test]
    fn radial_centre_is_interior() {
        let g = build_grid(Domain::RadialDisk { radius: 1.0 }, 6).unwrap();
        assert!(g.is_interior(0));
        assert!(!g.is_interior(5));
    }

    #[test]
    fn quadrature_of_constant() {
        let g = unit_interval(17);
        assert_eq!(quadrature(&g, &Field::constant(&g, 1.0)).unwrap(), 1.0);
        let d = build_grid(Domain::RadialDisk { radius: 1.0 }, 33).unwrap();
        assert!((quadrature(&d, &Field::constant(&d, 1.0)).unwrap() - PI).abs() < 1e-10);
    }

    #[test]
    fn quadrature_rejects_wrong_length() {
        let g = unit_interval(5);
        assert_eq!(
            quadrature(&g, &[1.0; 4]).unwrap_err(),
            MemsError::GridMismatch { expected: 5, found: 4 }
        );
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let g = build_grid(Domain::Rectangle { lx: 1.0, ly: 1.0 }, 7).unwrap();
        let lap = laplacian_apply(&g, &Field::zeros(&g)).unwrap();
        assert!(lap.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_exact_on_interval_quadratic() {
        let g = unit_interval(11);
        let f = Field::from_fn(&g, |x, _| x * (1.0 - x));
        let lap = laplacian_apply(&g, &f).unwrap();
        for k in 1..10 {
            assert!((lap[k] + 2.0).abs() < 1e-11, "{}", lap[k]);
        }
    }

    #[test]
    fn laplacian_exact_on_rectangle_quadratic() {
        // x(1-x) + y(1-y) is nonzero on the boundary, so use the raw stencil
        let g = build_grid(Domain::Rectangle { lx: 1.0, ly: 1.0 }, 11).unwrap();
        let f = Field::from_fn(&g, |x, y| x * (1.0 - x) + y * (1.0 - y));
        assert!(matches!(laplacian_apply(&g, &f), Err(MemsError::BoundaryViolation { .. })));
        let lap = laplacian_stencil(&g, &f).unwrap();
        for k in 0..g.len() {
            if g.is_interior(k) {
                assert!((lap[k] + 4.0).abs() < 1e-11, "{}", lap[k]);
            }
        }
    }

    #[test]
    fn radial_laplacian_exact_on_quadratic() {
        // Δ(1 - r²) = -4 in 2D, including the centre row
        let g = build_grid(Domain::RadialDisk { radius: 1.0 }, 9).unwrap();
        let f = Field::from_fn(&g, |r, _| 1.0 - r * r);
        let lap = laplacian_apply(&g, &f).unwrap();
        for k in 0..8 {
            assert!((lap[k] + 4.0).abs() < 1e-11, "node {k}: {}", lap[k]);
        }
    }

    #[test]
    fn laplacian_rejects_boundary_violation() {
        let g = unit_interval(5);
        let err = laplacian_apply(&g, &[0.0, 0.1, 0.2, 0.1, 0.3]).unwrap_err();
        assert_eq!(err, MemsError::BoundaryViolation { node: 4, value: 0.3 });
    }

    #[test]
    fn implicit_solve_zero_rhs() {
        for d in [Domain::Interval { length: 1.0 }, Domain::Rectangle { lx: 1.0, ly: 1.0 }] {
            let g = build_grid(d, 9).unwrap();
            let u = implicit_solve(&g, 0.1, &Field::zeros(&g)).unwrap();
            assert!(u.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn implicit_solve_rejects_nonpositive_dt() {
        let g = unit_interval(5);
        assert!(matches!(implicit_solve(&g, 0.0, &[0.0; 5]), Err(MemsError::InvalidParams(_))));
    }

    #[test]
    fn implicit_solve_small_dt_is_near_identity() {
        let g = unit_interval(21);
        let rhs = Field::from_fn_dirichlet(&g, |x, _| (PI * x).sin());
        let dt = 1e-7;
        let u = implicit_solve(&g, dt, &rhs).unwrap();
        // exact decay factor for this eigenvector is 1/(1 + dt·μ) with μ ≤ 4/h²
        assert!(u.max_abs_diff(&rhs) <= dt * 4.0 * 400.0);
    }

    #[test]
    fn disk_grid_staircase() {
        let g = build_grid(Domain::Disk { radius: 1.0 }, 21).unwrap();
        let centre = g.nearest_node(0.0, 0.0);
        assert_eq!(g.coords(centre), [0.0, 0.0]);
        assert!(g.is_interior(centre));
        assert!(!g.is_interior(g.nearest_node(1.0, 0.0)));
        assert!(!g.is_interior(g.nearest_node(0.9, 0.9)));
    }
}
