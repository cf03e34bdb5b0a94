//! Parallel parameter sweeps with a deterministic, resumable CSV.

use crate::config::{Backend, SweepConfig};
use crate::error::{config, CliError, Result};
use crate::output::{fmt_f64, parse_f64, sidecar_path, write_atomic, Provenance};
use rayon::prelude::*;
use spinsq_core::lindblad::{
    brute_force_liouvillian, build_liouvillian_collective, build_liouvillian_independent, default_time_cap,
    steady_state, Basis, SteadyOptions, SteadyState,
};
use spinsq_core::meanfield::{self, BlochVector, ModelParams, Stability};
use spinsq_core::observables::{bloch_from_rho, xi2_from_rho};
use spinsq_core::{fluctuations, Error as CoreError};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

pub const COLUMNS: [&str; 20] = [
    "index", "param", "value", "model", "backend", "n_atoms", "vx", "vy", "omega", "gamma_c", "gamma_i", "bloch_x",
    "bloch_y", "bloch_z", "xi2", "residual", "method", "converged", "status", "wall_ms",
];

/// One grid point. Bloch components are normalized by `j = N/2` (unit length
/// for the mean-field backends); `bloch_z` is `⟨Jz⟩/j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub index: usize,
    pub param: String,
    pub value: f64,
    pub params: ModelParams,
    pub backend: Backend,
    pub bloch: [f64; 3],
    /// `inf` when the mean spin vanishes, `NaN` when the backend has no ξ².
    pub xi2: f64,
    pub residual: f64,
    pub method: String,
    pub converged: bool,
    pub status: String,
    pub wall_ms: f64,
    /// Exit code class of a failed point, 0 when it succeeded.
    pub exit_code: i32,
}

impl Row {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn record(&self) -> Vec<String> {
        let p = &self.params;
        vec![
            self.index.to_string(),
            self.param.clone(),
            fmt_f64(self.value),
            p.model.to_string(),
            self.backend.to_string(),
            p.n_atoms.to_string(),
            fmt_f64(p.vx),
            fmt_f64(p.vy),
            fmt_f64(p.omega),
            fmt_f64(p.gamma_c),
            fmt_f64(p.gamma_i),
            fmt_f64(self.bloch[0]),
            fmt_f64(self.bloch[1]),
            fmt_f64(self.bloch[2]),
            fmt_f64(self.xi2),
            fmt_f64(self.residual),
            self.method.clone(),
            self.converged.to_string(),
            self.status.clone(),
            format!("{:.3}", self.wall_ms),
        ]
    }

    fn from_record(r: &csv::StringRecord) -> Option<Row> {
        if r.len() != COLUMNS.len() {
            return None;
        }
        let f = |i: usize| parse_f64(&r[i]);
        Some(Row {
            index: r[0].parse().ok()?,
            param: r[1].to_string(),
            value: f(2)?,
            params: ModelParams {
                model: r[3].parse().ok()?,
                n_atoms: r[5].parse().ok()?,
                vx: f(6)?,
                vy: f(7)?,
                omega: f(8)?,
                gamma_c: f(9)?,
                gamma_i: f(10)?,
            },
            backend: r[4].parse().ok()?,
            bloch: [f(11)?, f(12)?, f(13)?],
            xi2: f(14)?,
            residual: f(15)?,
            method: r[16].to_string(),
            converged: r[17].parse().ok()?,
            status: r[18].to_string(),
            wall_ms: f(19)?,
            exit_code: 0,
        })
    }
}

struct Point {
    bloch: [f64; 3],
    xi2: f64,
    residual: f64,
    method: String,
}

fn meanfield_point(cfg: &SweepConfig, p: &ModelParams) -> Result<Point> {
    let reports = meanfield::fixed_points(p)?;
    if let Some(fp) = reports.iter().find(|r| r.classification == Stability::Stable) {
        let s = fp.point;
        return Ok(Point {
            bloch: s.to_array(),
            xi2: f64::NAN,
            residual: meanfield::rhs(p, s).norm(),
            method: "fixed_point".into(),
        });
    }
    // No attractor: report the orbit average from a point just off the south pole.
    let g = p.gamma();
    let t_end = cfg.t_max.unwrap_or(if g > 0.0 { 500.0 / g } else { 500.0 });
    let (dx, dy) = (0.05, 0.03);
    let init = BlochVector::new(dx, dy, -(1.0 - dx * dx - dy * dy).sqrt());
    let traj = meanfield::integrate(p, init, t_end, cfg.tol)?;
    let avg = meanfield::time_average(&traj, 0.5)?;
    Ok(Point { bloch: avg.to_array(), xi2: f64::NAN, residual: f64::NAN, method: "time_average".into() })
}

fn fluctuation_point(p: &ModelParams) -> Result<Point> {
    let angles = fluctuations::steady_angles(p)?;
    let xi2 = fluctuations::xi2_analytic(p)?;
    Ok(Point { bloch: angles.unit_vector(), xi2, residual: f64::NAN, method: "gaussian".into() })
}

/// Exact steady state on the configured backend (dicke, perm or brute).
pub fn solve_exact(cfg: &SweepConfig, p: &ModelParams, n: usize) -> Result<SteadyState> {
    let liou = match cfg.backend {
        Backend::Dicke => build_liouvillian_collective(&Basis::dicke(n)?, p)?,
        Backend::Perm => build_liouvillian_independent(&Basis::perm(n)?, p)?,
        Backend::Brute => brute_force_liouvillian(n, p)?,
        b => return Err(config(format!("{b} is not an exact backend"))),
    };
    let opts = SteadyOptions { method: cfg.method, t_max: cfg.t_max, ode_tol: cfg.tol, ..Default::default() };
    Ok(steady_state(&liou, &opts)?)
}

fn exact_point(cfg: &SweepConfig, p: &ModelParams, n: usize) -> Result<Point> {
    let ss = solve_exact(cfg, p, n)?;
    let (bloch, _) = bloch_from_rho(&ss.rho);
    let xi2 = match xi2_from_rho(&ss.rho) {
        Ok(r) => r.xi2,
        Err(CoreError::Degenerate(_)) => f64::INFINITY,
        Err(e) => return Err(e.into()),
    };
    Ok(Point { bloch: bloch.to_array(), xi2, residual: ss.residual, method: ss.method.to_string() })
}

/// Evaluates one grid point; failures are recorded in the row, not returned.
pub fn evaluate_point(cfg: &SweepConfig, index: usize, value: f64) -> Row {
    let start = Instant::now();
    let param = cfg.sweep.as_ref().map(|s| s.param.to_string()).unwrap_or_else(|| "none".into());
    let resolved = cfg.point(value);
    let (params, n) = match &resolved {
        Ok(pn) => *pn,
        Err(_) => (
            ModelParams { model: cfg.model, vx: cfg.vx, vy: cfg.vy.unwrap_or(0.0), omega: cfg.omega, gamma_i: 0.0, gamma_c: 0.0, n_atoms: cfg.n_atoms },
            cfg.n_atoms,
        ),
    };
    let params = params.with_n_atoms(n);
    let result = resolved.and_then(|_| match cfg.backend {
        Backend::Meanfield => meanfield_point(cfg, &params),
        Backend::Fluctuations => fluctuation_point(&params),
        _ => exact_point(cfg, &params, n),
    });
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok(pt) => Row {
            index,
            param,
            value,
            params,
            backend: cfg.backend,
            bloch: pt.bloch,
            xi2: pt.xi2,
            residual: pt.residual,
            method: pt.method,
            converged: true,
            status: "ok".into(),
            wall_ms,
            exit_code: 0,
        },
        Err(e) => Row {
            index,
            param,
            value,
            params,
            backend: cfg.backend,
            bloch: [f64::NAN; 3],
            xi2: f64::NAN,
            residual: match &e {
                CliError::Core(CoreError::NotConverged { residual, .. }) => *residual,
                _ => f64::NAN,
            },
            method: cfg.method.to_string(),
            converged: false,
            status: format!("error: {e}").replace(['\n', '\r'], " "),
            wall_ms,
            exit_code: e.exit_code(),
        },
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub rows: Vec<Row>,
    /// Rows taken from an earlier partial run.
    pub reused: usize,
}

impl SweepOutcome {
    /// 0 if every point succeeded, else the largest per-point exit code.
    pub fn exit_code(&self) -> i32 {
        self.rows.iter().map(|r| r.exit_code).max().unwrap_or(0)
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| config(format!("cannot start {workers} workers: {e}")))
}

/// Runs the grid on `cfg.workers` threads. Rows come back in grid order
/// regardless of the worker count.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    run_with_existing(cfg, BTreeMap::new())
}

fn run_with_existing(cfg: &SweepConfig, mut done: BTreeMap<usize, Row>) -> Result<SweepOutcome> {
    cfg.validate()?;
    let grid = cfg.grid();
    let todo: Vec<usize> = (0..grid.len()).filter(|i| !done.contains_key(i)).collect();
    let reused = done.len();
    let fresh: Vec<Row> = pool(cfg.workers)?.install(|| todo.par_iter().map(|&i| evaluate_point(cfg, i, grid[i])).collect());
    for r in fresh {
        done.insert(r.index, r);
    }
    Ok(SweepOutcome { rows: done.into_values().collect(), reused })
}

pub fn write_rows(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut rd = csv::Reader::from_path(path)?;
    if rd.headers()?.iter().ne(COLUMNS) {
        return Err(config(format!("{} was not written by this tool", path.display())));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        rows.push(Row::from_record(&rec).ok_or_else(|| config(format!("malformed row in {}", path.display())))?);
    }
    Ok(rows)
}

/// Runs the sweep into `out`, keeping successful rows already present there
/// whose grid value and parameters match. Writes the CSV and its sidecar.
pub fn run_sweep_to(cfg: &SweepConfig, out: &Path, command: &str) -> Result<SweepOutcome> {
    cfg.validate()?;
    let grid = cfg.grid();
    let mut done = BTreeMap::new();
    if out.exists() {
        for r in read_rows(out)? {
            let Some(&v) = grid.get(r.index) else { continue };
            let same_value = r.value.to_bits() == v.to_bits();
            let same_params = cfg.point(v).map(|(p, n)| p.with_n_atoms(n) == r.params).unwrap_or(false);
            if r.is_ok() && same_value && same_params && r.backend == cfg.backend {
                done.insert(r.index, r);
            }
        }
    }
    let outcome = run_with_existing(cfg, done)?;
    write_rows(out, &outcome.rows)?;
    let mut prov = Provenance::new(command, cfg);
    prov.tolerances.insert("ode_tol".into(), cfg.tol);
    prov.tolerances.insert("residual_tol".into(), SteadyOptions::default().residual_tol);
    if let Some(t) = cfg.t_max {
        prov.tolerances.insert("t_max".into(), t);
    } else if let Ok((p, _)) = cfg.point(grid.first().copied().unwrap_or(f64::NAN)) {
        prov.tolerances.insert("t_max_default".into(), default_time_cap(&p));
    }
    prov.notes.insert("points".into(), grid.len().to_string());
    prov.notes.insert("reused".into(), outcome.reused.to_string());
    prov.write(&sidecar_path(out))?;
    Ok(outcome)
}
