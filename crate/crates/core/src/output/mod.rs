//! Artifacts on disk: CSV grids with a JSON sidecar, JSON reports, SVG heatmaps.
//!
//! Every write goes to a temporary file in the destination directory and is
//! renamed into place.

pub mod svg;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::GammaConfig;
use crate::densities::{DensityInstance, InstanceDoc};
use crate::error::{Result, TdError};
use crate::geometry::RayCoord;
use crate::transport::RayProfile;

pub use svg::{render_heatmap, render_heatmap_file};

pub const GRID_COLUMNS: [&str; 7] = ["x1", "x2", "t", "a", "sigma", "du", "dsdx2"];

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| TdError::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    atomic_write(path, s.as_bytes())
}

/// One evaluation point. `du` holds the potential `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub x1: f64,
    pub x2: f64,
    pub t: f64,
    pub a: f64,
    pub sigma: f64,
    pub du: f64,
    pub dsdx2: f64,
}

impl GridRow {
    pub fn field(&self, name: &str) -> Option<f64> {
        Some(match name {
            "x1" => self.x1,
            "x2" => self.x2,
            "t" => self.t,
            "a" => self.a,
            "sigma" => self.sigma,
            "du" | "u" => self.du,
            "dsdx2" => self.dsdx2,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub version: String,
    pub config: GammaConfig,
    pub instance: InstanceDoc,
    pub columns: Vec<String>,
    /// Samples per axis of the cell-centred `(t, a)` lattice.
    pub grid: usize,
    pub rows: usize,
    pub quadrature: String,
    /// Samples on the degenerate ray `a = 0`, where `σ` is a one-sided limit.
    pub degenerate_ray_samples: usize,
}

/// `σ`, `u` and `∂x2σ` on the lattice `t, a ∈ {(k + ½)/n}`, so all `n²` points
/// are interior. Rows are ordered by `a`, then `t`.
pub fn eval_grid(inst: &DensityInstance, n: usize) -> Result<(Vec<GridRow>, GridMeta)> {
    if n == 0 {
        return Err(TdError::InvalidParameter("grid must have at least one point per axis".into()));
    }
    let per_ray: Vec<Vec<GridRow>> = (0..n)
        .into_par_iter()
        .map(|j| -> Result<Vec<GridRow>> {
            let profile = RayProfile::new(lattice_node(0, j, n).a, inst, inst.cfg.quad_tol)?;
            (0..n)
                .map(|i| {
                    let e = profile.eval(lattice_node(i, j, n).t)?;
                    Ok(GridRow {
                        x1: e.point.x1,
                        x2: e.point.x2,
                        t: e.ray.t,
                        a: e.ray.a,
                        sigma: e.sigma,
                        du: e.u,
                        dsdx2: e.dsigma_dx2,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<GridRow> = per_ray.into_iter().flatten().collect();
    let meta = GridMeta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: inst.cfg,
        instance: inst.to_doc(),
        columns: GRID_COLUMNS.iter().map(|s| s.to_string()).collect(),
        grid: n,
        rows: rows.len(),
        quadrature: format!("adaptive Gauss-Kronrod 7/15, abs tol {:e}, per-ray cumulative panels", inst.cfg.quad_tol),
        degenerate_ray_samples: rows.iter().filter(|r| r.a == 0.0).count(),
    };
    Ok((rows, meta))
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut s = GRID_COLUMNS.join(",");
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{},{}", r.x1, r.x2, r.t, r.a, r.sigma, r.du, r.dsdx2);
    }
    s
}

/// Writes the CSV and its sidecar `<path>.json`.
pub fn write_grid(path: &Path, rows: &[GridRow], meta: &GridMeta) -> Result<()> {
    atomic_write(path, grid_csv(rows).as_bytes())?;
    write_json(&sidecar_path(path), meta)
}

pub fn read_grid_csv(path: &Path) -> Result<Vec<GridRow>> {
    let schema = |message: String| TdError::Schema {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| schema("file is empty".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != GRID_COLUMNS {
        return Err(schema(format!("expected header {}, found {header}", GRID_COLUMNS.join(","))));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, line)| {
            let v: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| schema(format!("line {}: {e}", k + 2)))?;
            if v.len() != GRID_COLUMNS.len() {
                return Err(schema(format!("line {}: expected {} fields, found {}", k + 2, GRID_COLUMNS.len(), v.len())));
            }
            Ok(GridRow {
                x1: v[0],
                x2: v[1],
                t: v[2],
                a: v[3],
                sigma: v[4],
                du: v[5],
                dsdx2: v[6],
            })
        })
        .collect()
}

/// Envelope for every JSON report: the command, the exact configuration and the result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub command: String,
    pub version: String,
    pub config: GammaConfig,
    pub instance: InstanceDoc,
    pub result: T,
}

impl<T> Report<T> {
    pub fn new(command: &str, inst: &DensityInstance, result: T) -> Self {
        Report {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: inst.cfg,
            instance: inst.to_doc(),
            result,
        }
    }
}

/// Ray coordinate of the lattice node `(i, j)` used by [`eval_grid`].
pub fn lattice_node(i: usize, j: usize, n: usize) -> RayCoord {
    RayCoord::new((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64)
}
