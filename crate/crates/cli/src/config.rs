//! TOML run configuration. Every key has a default, so a file only needs the
//! values it changes.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use mems_core::{build_grid, preset, Domain, Field, NewtonOptions, Params, SimConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Interval,
    RadialDisk,
    Rectangle,
    /// Full 2D disk on an embedded square grid.
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InitialData {
    Zero,
    /// `100 (1 − x² − y²)³ x² y²`, clipped to zero outside the unit disk.
    DiskBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    Auto,
    Exponential,
    Algebraic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub kind: DomainKind,
    pub length: f64,
    pub radius: f64,
    pub lx: f64,
    pub ly: f64,
    /// Nodes per axis.
    pub n: usize,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self { kind: DomainKind::Interval, length: 1.0, radius: 1.0, lx: 1.0, ly: 1.0, n: 201 }
    }
}

impl DomainSection {
    pub fn domain(&self) -> Domain {
        match self.kind {
            DomainKind::Interval => Domain::Interval { length: self.length },
            DomainKind::RadialDisk => Domain::RadialDisk { radius: self.radius },
            DomainKind::Rectangle => Domain::Rectangle { lx: self.lx, ly: self.ly },
            DomainKind::Disk => Domain::Disk { radius: self.radius },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquationSection {
    pub lambda: f64,
    pub alpha: f64,
    pub delta_trunc: f64,
    pub quench_eps: f64,
}

impl Default for EquationSection {
    fn default() -> Self {
        let p = Params::default();
        Self { lambda: 8.53, alpha: p.alpha, delta_trunc: p.delta_trunc, quench_eps: p.quench_eps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub t_max: f64,
    pub dt_init: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub steady_tol: f64,
    pub c_adapt: f64,
    pub picard: bool,
    pub record_every: usize,
    pub stop_at_steady: bool,
    pub snapshot_times: Vec<f64>,
    pub initial: InitialData,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            t_max: 10.0,
            dt_init: 1e-4,
            dt_max: 1e-2,
            dt_min: 1e-10,
            steady_tol: 1e-8,
            c_adapt: 0.1,
            picard: false,
            record_every: 10,
            stop_at_steady: true,
            snapshot_times: (0..=10).map(f64::from).collect(),
            initial: InitialData::Zero,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSection {
    pub tol: f64,
    pub max_iters: usize,
    pub damping_floor: f64,
    /// Continuation targets for `steady`; empty means just `equation.lambda`.
    pub targets: Vec<f64>,
}

impl Default for NewtonSection {
    fn default() -> Self {
        let o = NewtonOptions::default();
        Self { tol: o.tol, max_iters: o.max_iters, damping_floor: o.damping_floor, targets: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    pub max_extension: u32,
    /// Simulations run concurrently by `sweep` and `bisect`.
    pub jobs: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self { lo: 8.0, hi: 9.0, tol: 0.05, max_extension: 8, jobs: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub lambdas: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { lambdas: vec![8.0, 8.1, 8.2, 8.3, 8.4, 8.5, 8.6, 8.7, 8.8, 8.9, 9.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSection {
    pub t_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_end: Option<f64>,
    pub model: FitModel,
}

impl Default for RateSection {
    fn default() -> Self {
        Self { t_max: 30.0, window_start: None, window_end: None, model: FitModel::Auto }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub domain: DomainSection,
    pub equation: EquationSection,
    pub integrator: IntegratorSection,
    pub probe: ProbeSection,
    pub newton: NewtonSection,
    pub search: SearchSection,
    pub sweep: SweepSection,
    pub rate: RateSection,
    pub bound: BoundSection,
}

fn steps(from: f64, to: f64, by: f64) -> Vec<f64> {
    let count = ((to - from) / by).round() as usize;
    // rounded so that 8.1 stays 8.1 rather than 8.100000000000001
    (0..=count).map(|k| ((from + k as f64 * by) * 1e6).round() / 1e6).collect()
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Configuration equivalent to a built-in scenario, with search
    /// brackets and sweep lists suited to it.
    pub fn from_preset(name: &str) -> Result<Self> {
        let p = preset(name)?;
        let c = &p.config;
        let mut cfg = Config::default();
        cfg.domain = match c.grid.domain() {
            Domain::Interval { length } => DomainSection { kind: DomainKind::Interval, length, ..cfg.domain },
            Domain::RadialDisk { radius } => DomainSection { kind: DomainKind::RadialDisk, radius, ..cfg.domain },
            Domain::Rectangle { lx, ly } => DomainSection { kind: DomainKind::Rectangle, lx, ly, ..cfg.domain },
            Domain::Disk { radius } => DomainSection { kind: DomainKind::Disk, radius, ..cfg.domain },
        };
        cfg.domain.n = c.grid.n();
        cfg.equation.lambda = c.params.lambda;
        cfg.integrator.t_max = c.t_max;
        cfg.integrator.snapshot_times = c.snapshot_times.clone();
        if c.u0.iter().any(|&v| v != 0.0) {
            cfg.integrator.initial = InitialData::DiskBump;
        }
        let (lo, hi, tol, sweep) = match name {
            "1d-unit" => (8.0, 9.0, 0.05, steps(8.0, 9.0, 0.1)),
            "disk-radial" => (15.0, 34.0, 0.5, steps(20.0, 23.0, 0.5)),
            "disk-cartesian" => (15.0, 34.0, 0.5, steps(18.0, 24.0, 1.0)),
            _ => (10.0, 16.0, 0.5, steps(12.0, 16.0, 0.5)),
        };
        cfg.search = SearchSection { lo, hi, tol, ..cfg.search };
        cfg.sweep.lambdas = sweep;
        Ok(cfg)
    }

    pub fn params(&self) -> Params {
        let e = &self.equation;
        Params { lambda: e.lambda, alpha: e.alpha, delta_trunc: e.delta_trunc, quench_eps: e.quench_eps }
    }

    pub fn newton_options(&self) -> NewtonOptions {
        let n = &self.newton;
        NewtonOptions { tol: n.tol, max_iters: n.max_iters, damping_floor: n.damping_floor }
    }

    /// Builds and validates the simulation this configuration describes.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let domain = self.domain.domain();
        let grid = Arc::new(build_grid(domain, self.domain.n)?);
        let mut c = SimConfig::new(grid, self.params());
        let i = &self.integrator;
        c.t_max = i.t_max;
        c.dt_init = i.dt_init;
        c.dt_max = i.dt_max;
        c.dt_min = i.dt_min;
        c.steady_tol = i.steady_tol;
        c.c_adapt = i.c_adapt;
        c.picard = i.picard;
        c.record_every = i.record_every;
        c.stop_at_steady = i.stop_at_steady;
        c.snapshot_times = i.snapshot_times.clone();
        c.u0 = match i.initial {
            InitialData::Zero => Field::zeros(&c.grid),
            InitialData::DiskBump => {
                if self.domain.kind != DomainKind::Disk {
                    bail!("integrator.initial = \"disk-bump\" needs domain.kind = \"disk\"");
                }
                Field::from_fn_dirichlet(&c.grid, |x, y| {
                    let s = 1.0 - x * x - y * y;
                    if s > 0.0 {
                        100.0 * s * s * s * x * x * y * y
                    } else {
                        0.0
                    }
                })
            }
        };
        if let (Some(x), y) = (self.probe.x, self.probe.y) {
            c.probe = c.grid.nearest_node(x, y.unwrap_or(0.0));
        }
        c.validate()?;
        Ok(c)
    }
}
