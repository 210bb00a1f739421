//! CSV writers and the per-command `summary.json` manifest. Floats go out
//! through `Display`, which prints the shortest string that round-trips.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use mems_core::{Grid, TrajectorySample};
use serde::Serialize;

use crate::config::Config;

pub const TRAJECTORY_HEADER: &str = "t,max_u,energy,l2_ut,nonlocal_I,dt";
pub const PROFILE_1D_HEADER: &str = "x,u";
pub const PROFILE_2D_HEADER: &str = "x,y,u";
pub const SWEEP_HEADER: &str = "lambda,t,probe_value";

pub const OUT_DIR_ENV: &str = "MEMS_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "mems-out";

pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
    }
}

pub fn trajectory_csv(samples: &[TrajectorySample]) -> String {
    let mut s = format!("{TRAJECTORY_HEADER}\n");
    for p in samples {
        writeln!(s, "{},{},{},{},{},{}", p.t, p.max_u, p.energy, p.l2_ut, p.nonlocal_i, p.dt_used).unwrap();
    }
    s
}

/// `x,u` on 1D and radial grids, `x,y,u` on 2D grids.
pub fn profile_csv(grid: &Grid, values: &[f64]) -> String {
    let two_d = grid.domain().dimension() == 2 && !grid.y_axis().is_empty();
    let mut s = format!("{}\n", if two_d { PROFILE_2D_HEADER } else { PROFILE_1D_HEADER });
    for (k, v) in values.iter().enumerate() {
        let [x, y] = grid.coords(k);
        if two_d {
            writeln!(s, "{x},{y},{v}").unwrap();
        } else {
            writeln!(s, "{x},{v}").unwrap();
        }
    }
    s
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Config,
    pub artifacts: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
    pub version: String,
    pub result: serde_json::Value,
}

/// Collects artifacts written into one output directory.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
    started: Instant,
}

impl Artifacts {
    pub fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { dir, written: Vec::new(), started: Instant::now() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes `summary.json` and returns its path.
    pub fn finish(mut self, command: &str, config: &Config, result: serde_json::Value) -> Result<PathBuf> {
        let path = self.dir.join("summary.json");
        self.written.push(path.clone());
        let manifest = RunManifest {
            command: command.to_string(),
            config: config.clone(),
            artifacts: self.written,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            result,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mems_core::{build_grid, Domain};

    #[test]
    fn headers_and_shortest_floats() {
        let g = build_grid(Domain::Interval { length: 1.0 }, 3).unwrap();
        assert_eq!(profile_csv(&g, &[0.0, 0.1, 0.0]), "x,u\n0,0\n0.5,0.1\n1,0\n");
        let g = build_grid(Domain::Rectangle { lx: 1.0, ly: 2.0 }, 3).unwrap();
        let csv = profile_csv(&g, &vec![0.0; 9]);
        assert!(csv.starts_with("x,y,u\n0,0,0\n0.5,0,0\n"));
        assert_eq!(csv.lines().count(), 10);
        assert_eq!(trajectory_csv(&[]), "t,max_u,energy,l2_ut,nonlocal_I,dt\n");
    }
}
