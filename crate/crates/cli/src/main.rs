use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use spinsq_cli::budget::{budget, BudgetInput, ScalingLaw};
use spinsq_cli::config::{Backend, SweepConfig};
use spinsq_cli::error::{CliError, Result, EXIT_NUMERICAL};
use spinsq_cli::fit::{exponent_sensitivity, fit_powerlaw, PowerLawFit};
use spinsq_cli::optimize::min_xi2_over_omega;
use spinsq_cli::oracle::oracle_check;
use spinsq_cli::output::{fmt_f64, write_atomic};
use spinsq_cli::sweep::{run_sweep, run_sweep_to, solve_exact, write_rows};
use spinsq_core::fluctuations::{self, ClosedForm};
use spinsq_core::lindblad::io::{save_density, Header};
use spinsq_core::lindblad::SteadyOptions;
use spinsq_core::meanfield::{self, BlochVector};
use spinsq_core::observables::{wigner, xi2_from_rho, WignerGrid};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "spinsq", version, about = "Steady-state spin squeezing of dissipative collective spin models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mean-field fixed points, and optionally a trajectory.
    Meanfield {
        #[command(flatten)]
        common: Common,
        /// Integrate from near the south pole up to this time.
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Gaussian-fluctuation steady state and ξ².
    Fluct {
        #[command(flatten)]
        common: Common,
    },
    /// Exact steady state on the dicke, perm or brute backend.
    Steady {
        #[command(flatten)]
        common: Common,
    },
    /// Parameter sweep to CSV with a JSON sidecar.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Spin Wigner function of the exact steady state.
    Wigner {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 91)]
        n_theta: usize,
        #[arg(long, default_value_t = 181)]
        n_phi: usize,
        /// Rescale to a unit maximum.
        #[arg(long)]
        plot: bool,
    },
    /// Power-law fit of ξ²_min(N).
    Fit(FitArgs),
    /// Squeezing budget with weak independent decay.
    Budget(BudgetArgs),
    /// Compare the reduced backends with the full space.
    OracleCheck {
        #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        sets: usize,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 4.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-8)]
        threshold: f64,
    },
}

/// Shared model and run flags. Each one overrides the config file.
#[derive(Args, Default)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    n_atoms: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    gamma_c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma_i: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    vx: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    vy: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    omega: Option<f64>,
    /// `param:lo:hi:points`
    #[arg(long)]
    sweep: Option<String>,
    /// Steady-state method: auto, exact, null_space or time_march.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Accepted for scripts; every computation is already deterministic.
    #[arg(long)]
    seedless: bool,
}

impl Common {
    fn resolve(&self) -> Result<SweepConfig> {
        let mut cfg = match &self.config {
            Some(path) => SweepConfig::from_text(&std::fs::read_to_string(path)?)?,
            None => SweepConfig::default(),
        };
        let s = |v: &Option<f64>| v.map(|x| x.to_string());
        let overrides = [
            ("model", self.model.clone()),
            ("backend", self.backend.clone()),
            ("n_atoms", self.n_atoms.map(|n| n.to_string())),
            ("gamma_c", s(&self.gamma_c)),
            ("gamma_i", s(&self.gamma_i)),
            ("vx", s(&self.vx)),
            ("vy", s(&self.vy)),
            ("omega", s(&self.omega)),
            ("sweep", self.sweep.clone()),
            ("method", self.method.clone()),
            ("tol", s(&self.tol)),
            ("t_max", s(&self.t_max)),
            ("workers", self.workers.map(|n| n.to_string())),
        ];
        for (k, v) in overrides {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitArgs {
    /// CSV with columns `n,xi2`.
    #[arg(long, conflicts_with = "n_list")]
    input: Option<PathBuf>,
    /// Compute ξ²_min over Ω for these N on the dicke backend.
    #[arg(long, value_delimiter = ',')]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    vx: f64,
    /// Write the fit as JSON, readable by `budget --law`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long)]
    n_atoms: f64,
    #[arg(long)]
    cooperativity: f64,
    /// Independent decay rate in rad/s.
    #[arg(long, conflicts_with = "gamma_i_hz", required_unless_present = "gamma_i_hz")]
    gamma_i: Option<f64>,
    /// Independent decay rate in Hz (multiplied by 2π).
    #[arg(long)]
    gamma_i_hz: Option<f64>,
    /// Strong `Vx ≫ γc` interaction.
    #[arg(long)]
    large_vx: bool,
    /// Fit JSON from `spinsq fit --out`, replacing the default law.
    #[arg(long)]
    law: Option<PathBuf>,
}

fn print_json(v: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn single_point(cfg: &SweepConfig) -> Result<(spinsq_core::meanfield::ModelParams, usize)> {
    let v = cfg.grid().first().copied().unwrap_or(f64::NAN);
    let (p, n) = cfg.point(v)?;
    Ok((p.with_n_atoms(n), n))
}

fn run(cli: Cli, command: &str) -> Result<i32> {
    match cli.cmd {
        Cmd::Meanfield { common, t_end } => {
            let cfg = common.resolve()?;
            let (p, _) = single_point(&cfg)?;
            let fps = meanfield::fixed_points(&p)?;
            let mut report = json!({ "params": p, "fixed_points": fps });
            if let Some(t) = t_end {
                let (dx, dy) = (0.05, 0.03);
                let init = BlochVector::new(dx, dy, -(1.0 - dx * dx - dy * dy).sqrt());
                let traj = meanfield::integrate(&p, init, t, cfg.tol)?;
                report["time_average"] = json!(meanfield::time_average(&traj, 0.5)?);
                if let Some(out) = &cfg.out {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["t", "x", "y", "z"])?;
                    for (t, s) in traj.times.iter().zip(&traj.states) {
                        w.write_record([fmt_f64(*t), fmt_f64(s.x), fmt_f64(s.y), fmt_f64(s.z)])?;
                    }
                    write_atomic(out, &w.into_inner().map_err(|e| CliError::Io(e.into_error()))?)?;
                }
            }
            print_json(&report)?;
        }
        Cmd::Fluct { common } => {
            let cfg = common.resolve()?;
            let (p, _) = single_point(&cfg)?;
            let angles = fluctuations::steady_angles(&p)?;
            let mut report = json!({
                "params": p,
                "bloch": angles.unit_vector(),
                "moments": fluctuations::moment_steady_state(&p)?,
                "xi2": fluctuations::xi2_analytic(&p)?,
            });
            let forms = [("paramagnet", ClosedForm::Paramagnet), ("driven", ClosedForm::Driven)];
            for (name, form) in forms {
                if let Ok(v) = fluctuations::xi2_closed_form(form, &p) {
                    report[format!("xi2_closed_{name}")] = json!(v);
                }
            }
            print_json(&report)?;
        }
        Cmd::Steady { common } => {
            let cfg = common.resolve()?;
            let (p, n) = single_point(&cfg)?;
            let ss = solve_exact(&cfg, &p, n)?;
            let sq = xi2_from_rho(&ss.rho);
            print_json(&json!({
                "params": p,
                "method": ss.method.to_string(),
                "residual": ss.residual,
                "t_reached": ss.t_reached,
                "bloch": spinsq_core::observables::bloch_from_rho(&ss.rho).0,
                "xi2": sq.as_ref().map(|r| r.xi2).unwrap_or(f64::INFINITY),
                "squeezing": sq.ok(),
            }))?;
            if let Some(out) = &cfg.out {
                let mut h = Header::for_basis(ss.rho.basis());
                h.params = Some(p);
                h.tolerances.insert("residual".into(), ss.residual);
                h.metadata.insert("method".into(), ss.method.to_string());
                save_density(out, &ss.rho, &h)?;
            }
        }
        Cmd::Sweep { common } => {
            let cfg = common.resolve()?;
            let outcome = match &cfg.out {
                Some(out) => run_sweep_to(&cfg, out, command)?,
                None => {
                    let o = run_sweep(&cfg)?;
                    let tmp = std::env::temp_dir().join(format!("spinsq-sweep-{}.csv", std::process::id()));
                    write_rows(&tmp, &o.rows)?;
                    print!("{}", std::fs::read_to_string(&tmp)?);
                    std::fs::remove_file(&tmp)?;
                    o
                }
            };
            let failed = outcome.rows.iter().filter(|r| !r.is_ok()).count();
            eprintln!("{} points, {} reused, {} failed", outcome.rows.len(), outcome.reused, failed);
            return Ok(outcome.exit_code());
        }
        Cmd::Wigner { common, n_theta, n_phi, plot } => {
            let cfg = common.resolve()?;
            if matches!(cfg.backend, Backend::Meanfield | Backend::Fluctuations) {
                return Err(CliError::Config("wigner needs an exact backend".into()));
            }
            let (p, n) = single_point(&cfg)?;
            let ss = solve_exact(&cfg, &p, n)?;
            let (th, ph) = WignerGrid::angles(n_theta, n_phi);
            let mut grid = wigner(&ss.rho, &th, &ph)?;
            if plot {
                grid = grid.for_plot();
            }
            if let Some(out) = &cfg.out {
                let mut buf = Vec::new();
                grid.write_csv(&mut buf)?;
                write_atomic(out, &buf)?;
            }
            let mut peaks = grid.local_maxima();
            peaks.truncate(8);
            print_json(&json!({ "params": p, "max": grid.max(), "min": grid.min(), "peaks": peaks }))?;
        }
        Cmd::Fit(args) => {
            let mut minima = Vec::new();
            let points: Vec<(f64, f64)> = if let Some(path) = &args.input {
                let mut rd = csv::Reader::from_path(path)?;
                let mut pts = Vec::new();
                for rec in rd.records() {
                    let rec = rec?;
                    let num = |i: usize| rec.get(i).and_then(|s| s.trim().parse::<f64>().ok());
                    match (num(0), num(1)) {
                        (Some(n), Some(x)) => pts.push((n, x)),
                        _ => return Err(CliError::Config(format!("bad row in {}", path.display()))),
                    }
                }
                pts
            } else {
                let opts = SteadyOptions::default();
                for &n in &args.n_list {
                    let m = min_xi2_over_omega(n, args.vx, &opts)?;
                    eprintln!("N = {n}: Ω* = {:.4}, ξ²_min = {:.6}", m.omega, m.xi2);
                    minima.push(m);
                }
                minima.iter().map(|m| (m.n_atoms as f64, m.xi2)).collect()
            };
            let fit = fit_powerlaw(&points)?;
            let sens = exponent_sensitivity(&points)?;
            let report = json!({ "fit": fit, "sensitivity": sens, "points": points, "minima": minima });
            if let Some(out) = &args.out {
                write_atomic(out, serde_json::to_string_pretty(&report)?.as_bytes())?;
            }
            print_json(&report)?;
        }
        Cmd::Budget(args) => {
            let law = match &args.law {
                Some(path) => {
                    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                    let fit: PowerLawFit = serde_json::from_value(v.get("fit").cloned().unwrap_or(v))?;
                    ScalingLaw::from(fit)
                }
                None => ScalingLaw::DEFAULT,
            };
            let gamma_i = args.gamma_i.unwrap_or_else(|| 2.0 * std::f64::consts::PI * args.gamma_i_hz.unwrap_or(0.0));
            let r = budget(BudgetInput {
                n_atoms: args.n_atoms,
                cooperativity: args.cooperativity,
                gamma_i,
                large_vx: args.large_vx,
                law,
            })?;
            if r.regime_warning {
                eprintln!("warning: γi·τ = {:.3} exceeds 0.1; independent decay is not weak", r.gamma_i_tau);
            }
            eprintln!(
                "γc = 2π × {:.4e} Hz, Ωc = 2π × {:.4e} Hz, τ = {:.4e} s, ξ²₀ = {:.4}, ξ²_total = {:.4}",
                r.gamma_c_hz, r.omega_c_hz, r.tau, r.xi2_0, r.xi2_total
            );
            print_json(&r)?;
        }
        Cmd::OracleCheck { n_list, sets, samples, t_end, threshold } => {
            let r = oracle_check(&n_list, sets, samples, t_end)?;
            print_json(&r)?;
            if !(r.max_distance < threshold) {
                eprintln!("max trace distance {:e} exceeds {threshold:e}", r.max_distance);
                return Ok(EXIT_NUMERICAL);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let command = std::env::args().collect::<Vec<_>>().join(" ");
    match run(Cli::parse(), &command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
