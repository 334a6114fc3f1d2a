//! Flat run configuration. Every key doubles as a `--flag`; flags win.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use pathcalc_core::dupire::FdConfig;
use pathcalc_core::frechet::RampFamily;
use pathcalc_core::functional::{parse_functional, SharedFunctional};
use pathcalc_core::sfde::SfdeModel;
use pathcalc_core::TimeGrid;
use serde::Deserialize;

use crate::UsageError;

type Result<T> = std::result::Result<T, UsageError>;

#[derive(Debug, Clone, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Random seed; required by every command that draws noise.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid steps N.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Horizon T.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Monte Carlo paths, or random test paths for `coherence`.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Functional id, or a comma list for `coherence`.
    #[arg(long)]
    pub functional: Option<String>,
    /// Built-in model id.
    #[arg(long)]
    pub model: Option<String>,
    /// Evaluation time; the path is stopped there.
    #[arg(long)]
    pub t: Option<f64>,
    /// Path CSV (`t,x_1,...`), with optional `.json` sidecar.
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// Vertical bump size.
    #[arg(long)]
    pub h: Option<f64>,
    /// Horizontal extension length.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Richardson levels (1 to 3).
    #[arg(long)]
    pub richardson: Option<usize>,
    /// Ramp parameters, e.g. `8,16,32,64`.
    #[arg(long)]
    pub ramps: Option<String>,
    /// Initial value, comma separated per coordinate.
    #[arg(long)]
    pub x0: Option<String>,
    /// Grid sizes for `verify-ito`, e.g. `256,1024,4096`.
    #[arg(long)]
    pub resolutions: Option<String>,
    /// Generator epsilons as fractions of the horizon.
    #[arg(long)]
    pub epsilons: Option<String>,
    /// `realized` or `dt`.
    #[arg(long)]
    pub qv: Option<String>,
    /// `polynomial` or `linear`.
    #[arg(long)]
    pub extrapolation: Option<String>,
    /// Report directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Acceptance manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Acceptance criteria to run, e.g. `1,2,8`.
    #[arg(long)]
    pub only: Option<String>,
}

macro_rules! merge {
    ($a:ident, $b:ident; $($f:ident),*) => {
        RunConfig { $($f: $a.$f.or($b.$f)),* }
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
    }

    /// Keys set here win over `fallback`.
    pub fn or(self, fallback: RunConfig) -> RunConfig {
        let (a, b) = (self, fallback);
        merge!(a, b; seed, steps, horizon, paths, functional, model, t, path, h, eps, richardson, ramps, x0,
            resolutions, epsilons, qv, extrapolation, out, manifest, only)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| UsageError("this command draws random numbers and needs --seed".into()))
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon.unwrap_or(1.0), self.steps.unwrap_or(256)).map_err(usage)
    }

    pub fn functional(&self) -> Result<SharedFunctional> {
        let id = self.functional.as_deref().ok_or_else(|| UsageError("missing --functional".into()))?;
        parse_functional(id).map_err(usage)
    }

    pub fn functionals(&self) -> Result<Option<Vec<SharedFunctional>>> {
        match &self.functional {
            None => Ok(None),
            Some(list) => {
                list.split(',').map(|id| parse_functional(id.trim()).map_err(usage)).collect::<Result<_>>().map(Some)
            }
        }
    }

    pub fn model(&self, default: &str) -> Result<SfdeModel> {
        SfdeModel::builtin(self.model.as_deref().unwrap_or(default), self.horizon.unwrap_or(1.0)).map_err(usage)
    }

    pub fn fd(&self) -> Result<FdConfig> {
        let mut cfg = FdConfig::default();
        if let Some(h) = self.h {
            cfg = cfg.with_h(h);
        }
        if let Some(e) = self.eps {
            cfg = cfg.with_eps(e);
        }
        if let Some(r) = self.richardson {
            cfg = cfg.with_richardson(r);
        }
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }

    pub fn ramps(&self) -> Result<RampFamily> {
        match &self.ramps {
            Some(s) => RampFamily::parse(s).map_err(usage),
            None => Ok(RampFamily::default()),
        }
    }

    pub fn x0(&self, dim: usize) -> Result<Vec<f64>> {
        let v = match &self.x0 {
            Some(s) => parse_list::<f64>("x0", s)?,
            None => vec![1.0; dim],
        };
        if v.len() != dim {
            return Err(UsageError(format!("x0 has {} coordinates, model has {dim}", v.len())));
        }
        Ok(v)
    }

    pub fn only(&self) -> Result<Vec<usize>> {
        self.only.as_deref().map(|s| parse_list("only", s)).unwrap_or(Ok(Vec::new()))
    }
}

pub fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',').map(|x| x.trim().parse::<T>().map_err(|e| UsageError(format!("{key}: '{x}': {e}")))).collect()
}

pub fn usage(e: impl std::fmt::Display) -> UsageError {
    UsageError(e.to_string())
}
