//! Run configuration: a flat `key = value` file, overridable by CLI flags.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! model   = collective_xy        # independent_xy | collective_xy | driven | general
//! backend = dicke                # meanfield | fluctuations | dicke | perm | brute
//! n_atoms = 100
//! vx = 0.4
//! sweep = vx:0:1:21              # param:lo:hi:points
//! ```
//!
//! Keys may use `-` or `_`. Values run to the end of the line or to a `#`.

use crate::error::{config, Result};
use serde::{Deserialize, Serialize};
use spinsq_core::lindblad::SteadyMethod;
use spinsq_core::meanfield::{Model, ModelParams};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Meanfield,
    Fluctuations,
    Dicke,
    Perm,
    Brute,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Meanfield => "meanfield",
            Backend::Fluctuations => "fluctuations",
            Backend::Dicke => "dicke",
            Backend::Perm => "perm",
            Backend::Brute => "brute",
        })
    }
}

impl FromStr for Backend {
    type Err = crate::CliError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "meanfield" | "mean-field" | "mf" => Backend::Meanfield,
            "fluctuations" | "fluct" | "hp" => Backend::Fluctuations,
            "dicke" => Backend::Dicke,
            "perm" => Backend::Perm,
            "brute" | "full" => Backend::Brute,
            other => return Err(config(format!("unknown backend '{other}'"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Vx,
    Vy,
    Omega,
    GammaC,
    GammaI,
    NAtoms,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Vx => "vx",
            SweepParam::Vy => "vy",
            SweepParam::Omega => "omega",
            SweepParam::GammaC => "gamma_c",
            SweepParam::GammaI => "gamma_i",
            SweepParam::NAtoms => "n_atoms",
        })
    }
}

impl FromStr for SweepParam {
    type Err = crate::CliError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.replace('-', "_").as_str() {
            "v" | "vx" => SweepParam::Vx,
            "vy" => SweepParam::Vy,
            "omega" => SweepParam::Omega,
            "gamma_c" => SweepParam::GammaC,
            "gamma_i" => SweepParam::GammaI,
            "n" | "n_atoms" => SweepParam::NAtoms,
            other => return Err(config(format!("cannot sweep '{other}'"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub grid: Vec<f64>,
}

impl FromStr for SweepSpec {
    type Err = crate::CliError;
    /// `param:lo:hi:points`, points evenly spaced with both ends included.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [p, lo, hi, steps] = parts[..] else {
            return Err(config(format!("sweep '{s}' is not param:lo:hi:points")));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| config(format!("bad number '{x}' in sweep")));
        let (lo, hi) = (num(lo)?, num(hi)?);
        let steps: usize = steps.trim().parse().map_err(|_| config(format!("bad point count '{steps}'")))?;
        let grid = match steps {
            0 => Vec::new(),
            1 => vec![lo],
            k => (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect(),
        };
        Ok(SweepSpec { param: p.trim().parse()?, grid })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub model: Model,
    pub backend: Backend,
    pub n_atoms: usize,
    pub vx: f64,
    /// Defaults to `−vx` for the XY models and 0 otherwise.
    pub vy: Option<f64>,
    pub omega: f64,
    /// Defaults to 1 unless the model has independent decay only.
    pub gamma_c: Option<f64>,
    /// Defaults to 1 for the independent-decay model, else 0.
    pub gamma_i: Option<f64>,
    pub sweep: Option<SweepSpec>,
    pub tol: f64,
    pub t_max: Option<f64>,
    pub method: SteadyMethod,
    pub out: Option<PathBuf>,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            model: Model::CollectiveXy,
            backend: Backend::Dicke,
            n_atoms: 10,
            vx: 0.0,
            vy: None,
            omega: 0.0,
            gamma_c: None,
            gamma_i: None,
            sweep: None,
            tol: 1e-10,
            t_max: None,
            method: SteadyMethod::Auto,
            out: None,
            workers: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| config(format!("bad value '{v}' for {key}")))
}

impl SweepConfig {
    /// Sets one key; used for both file entries and flag overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "model" => self.model = v.parse().map_err(|_| config(format!("unknown model '{v}'")))?,
            "backend" => self.backend = v.parse()?,
            "n_atoms" | "n" => self.n_atoms = parse(&key, v)?,
            "vx" | "v" => self.vx = parse(&key, v)?,
            "vy" => self.vy = Some(parse(&key, v)?),
            "omega" => self.omega = parse(&key, v)?,
            "gamma_c" => self.gamma_c = Some(parse(&key, v)?),
            "gamma_i" => self.gamma_i = Some(parse(&key, v)?),
            "sweep" => self.sweep = Some(v.parse()?),
            "tol" => self.tol = parse(&key, v)?,
            "t_max" => self.t_max = Some(parse(&key, v)?),
            "method" => self.method = v.parse().map_err(|_| config(format!("unknown method '{v}'")))?,
            "out" => self.out = Some(PathBuf::from(v)),
            "workers" => self.workers = parse(&key, v)?,
            other => return Err(config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = SweepConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(config(format!("line {}: expected key = value", no + 1)));
            };
            cfg.set(k, v).map_err(|e| config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(cfg)
    }

    pub fn grid(&self) -> Vec<f64> {
        self.sweep.as_ref().map(|s| s.grid.clone()).unwrap_or_else(|| vec![f64::NAN])
    }

    /// Model parameters and atom number at one grid value (`NaN` = no sweep).
    pub fn point(&self, value: f64) -> Result<(ModelParams, usize)> {
        let mut c = self.clone();
        let mut n = self.n_atoms;
        if let Some(s) = &self.sweep {
            if !value.is_nan() {
                match s.param {
                    SweepParam::Vx => c.vx = value,
                    SweepParam::Vy => c.vy = Some(value),
                    SweepParam::Omega => c.omega = value,
                    SweepParam::GammaC => c.gamma_c = Some(value),
                    SweepParam::GammaI => c.gamma_i = Some(value),
                    SweepParam::NAtoms => {
                        if value < 1.0 || value.fract() != 0.0 {
                            return Err(config(format!("n_atoms must be a positive integer, got {value}")));
                        }
                        n = value as usize;
                    }
                }
            }
        }
        let xy = matches!(c.model, Model::IndependentXy | Model::CollectiveXy);
        let gamma_c = c.gamma_c.unwrap_or(if c.model == Model::IndependentXy { 0.0 } else { 1.0 });
        let gamma_i = c.gamma_i.unwrap_or(if c.model == Model::IndependentXy { 1.0 } else { 0.0 });
        let p = ModelParams {
            model: c.model,
            vx: c.vx,
            vy: c.vy.unwrap_or(if xy { -c.vx } else { 0.0 }),
            omega: c.omega,
            gamma_i,
            gamma_c,
            n_atoms: n,
        };
        p.validate()?;
        Ok((p, n))
    }

    /// Checks everything that does not need a solve.
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.sweep {
            if s.grid.windows(2).any(|w| !(w[1] > w[0]) && !(w[1] < w[0]))
                || (s.grid.len() > 2 && s.grid.windows(3).any(|w| (w[1] - w[0]).signum() != (w[2] - w[1]).signum()))
            {
                return Err(config("sweep grid must be strictly monotone"));
            }
        }
        if self.workers == 0 {
            return Err(config("workers must be at least 1"));
        }
        if !(self.tol >= 1e-13 && self.tol <= 1e-6) {
            return Err(config("tol must lie in [1e-13, 1e-6]"));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(config("t_max must be positive"));
            }
        }
        for v in self.grid() {
            let (p, n) = self.point(v)?;
            match self.backend {
                Backend::Perm if p.gamma_c != 0.0 => return Err(config("perm backend requires gamma_c = 0")),
                Backend::Dicke | Backend::Fluctuations if p.gamma_i != 0.0 => {
                    return Err(config(format!("{} backend requires gamma_i = 0", self.backend)))
                }
                Backend::Brute if n > spinsq_core::lindblad::FULL_MAX_ATOMS => {
                    return Err(config("brute backend supports n_atoms ≤ 8"))
                }
                _ => {}
            }
            if n == 0 {
                return Err(config("n_atoms must be at least 1"));
            }
        }
        Ok(())
    }
}
