//! Experiment configuration, loadable from `key = value` files.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rgn_core::rgn::{LsSolver, RgnConfig};
use rgn_core::{Error, Result, Shape, Truncation, TuckerRank};
use serde::{Deserialize, Serialize};

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
        #[serde(rename_all = "kebab-case")]
        pub enum $name {
            $($variant),+
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::InvalidArgument(format!(
                        concat!("unknown ", stringify!($name), " {:?}"),
                        other
                    ))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self {
                    $($name::$variant => $text),+
                })
            }
        }
    };
}

keyword_enum!(Problem {
    Regression => "regression",
    Rank1 => "rank1",
    Completion => "completion",
    Svd => "svd",
});

keyword_enum!(Init {
    Spectral => "spectral",
    Random => "random",
});

keyword_enum!(Solver {
    Rgn => "rgn",
    Iht => "iht",
});

keyword_enum!(Scaling {
    Paper7 => "paper7",
    Paper41 => "paper41",
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: Problem,
    /// Mode sizes `p_1, ..., p_d`.
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    /// Sample size; for completion, the number of observed entries.
    pub n: Option<usize>,
    /// Completion sampling fraction, used when `n` is absent.
    pub rho: Option<f64>,
    pub sigma: f64,
    /// Smallest mode-wise singular value of the signal (svd only).
    pub lambda_min: Option<f64>,
    pub init: Init,
    pub solver: Solver,
    /// IHT step size; defaults to `1 / (n * entry variance)`.
    pub step: Option<f64>,
    pub seed: u64,
    pub trials: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub retraction: String,
    pub ls_solver: String,
    pub scaling: Scaling,
    pub workers: usize,
    pub record_timing: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let rgn = RgnConfig::default();
        ExperimentConfig {
            problem: Problem::Regression,
            dims: vec![30, 30, 30],
            ranks: vec![3, 3, 3],
            n: None,
            rho: None,
            sigma: 0.0,
            lambda_min: None,
            init: Init::Spectral,
            solver: Solver::Rgn,
            step: None,
            seed: 0,
            trials: 1,
            max_iter: rgn.max_iter,
            tol: rgn.rel_rmse_tol,
            retraction: rgn.retraction.to_string(),
            ls_solver: rgn.ls_solver.to_string(),
            scaling: Scaling::Paper7,
            workers: 1,
            record_timing: true,
            out: None,
        }
    }
}

/// Parses `30` or `30,40,50`; a single value is repeated `order` times.
pub fn parse_dims_list(s: &str, order: usize) -> Result<Vec<usize>> {
    let parts = s
        .split([',', 'x', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|e| Error::InvalidArgument(format!("bad size {t:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    match parts.len() {
        0 => Err(Error::InvalidArgument("empty size list".into())),
        1 => Ok(vec![parts[0]; order]),
        _ => Ok(parts),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::InvalidArgument(format!("bad value {value:?} for {key}: {e}")))
}

impl ExperimentConfig {
    /// Sets one option by its flag name (`lambda-min` and `lambda_min` are
    /// both accepted).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let order = self.dims.len().max(1);
        match key.trim().replace('_', "-").as_str() {
            "problem" => self.problem = value.parse()?,
            "p" | "dims" => self.dims = parse_dims_list(value, order)?,
            "r" | "ranks" => self.ranks = parse_dims_list(value, order)?,
            "order" => {
                let d: usize = parse_num(key, value)?;
                if self.dims.iter().all(|&p| p == self.dims[0]) {
                    self.dims = vec![self.dims[0]; d];
                }
                if self.ranks.iter().all(|&r| r == self.ranks[0]) {
                    self.ranks = vec![self.ranks[0]; d];
                }
            }
            "n" => self.n = Some(parse_num(key, value)?),
            "rho" => self.rho = Some(parse_num(key, value)?),
            "sigma" => self.sigma = parse_num(key, value)?,
            "lambda-min" => self.lambda_min = Some(parse_num(key, value)?),
            "init" => self.init = value.parse()?,
            "solver" => self.solver = value.parse()?,
            "step" => self.step = Some(parse_num(key, value)?),
            "seed" => self.seed = parse_num(key, value)?,
            "trials" => self.trials = parse_num(key, value)?,
            "max-iter" => self.max_iter = parse_num(key, value)?,
            "tol" => self.tol = parse_num(key, value)?,
            "retraction" => self.retraction = value.parse::<Truncation>()?.to_string(),
            "ls-solver" => self.ls_solver = value.parse::<LsSolver>()?.to_string(),
            "scaling" => self.scaling = value.parse()?,
            "workers" => self.workers = parse_num(key, value)?,
            "record-timing" => self.record_timing = parse_num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(Error::InvalidArgument(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are
    /// ignored; an optional `[section]` header is skipped.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`, found {raw:?}", lineno + 1))
            })?;
            let value = value.trim().trim_matches('"');
            self.set(key, value)
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn shape(&self) -> Result<Shape> {
        Shape::new(self.dims.clone())
    }

    pub fn rank(&self) -> Result<TuckerRank> {
        TuckerRank::new(self.ranks.clone())
    }

    pub fn rgn_config(&self) -> Result<RgnConfig> {
        let cfg = RgnConfig {
            max_iter: self.max_iter,
            rel_rmse_tol: self.tol,
            retraction: self.retraction.parse()?,
            ls_solver: self.ls_solver.parse()?,
            record_timing: self.record_timing,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of measurements implied by the configuration.
    pub fn sample_size(&self) -> Result<usize> {
        let shape = self.shape()?;
        match self.problem {
            Problem::Svd => Ok(shape.size()),
            Problem::Completion => match (self.n, self.rho) {
                (Some(n), _) => Ok(n),
                (None, Some(rho)) => Ok((rho * shape.size() as f64).round() as usize),
                (None, None) => Err(Error::InvalidArgument(
                    "completion needs --n or --rho".into(),
                )),
            },
            Problem::Regression | Problem::Rank1 => self
                .n
                .ok_or_else(|| Error::InvalidArgument("--n is required".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.shape()?;
        let rank = self.rank()?;
        rank.check(&shape)?;
        self.rgn_config()?;
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be at least 1".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidArgument("sigma must be nonnegative".into()));
        }
        if let Some(step) = self.step {
            if !(step > 0.0) {
                return Err(Error::InvalidArgument("step must be positive".into()));
            }
        }
        let n = self.sample_size()?;
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be positive".into()));
        }
        match self.problem {
            Problem::Completion => {
                if n > shape.size() {
                    return Err(Error::InvalidArgument(format!(
                        "cannot observe {n} distinct entries of a {shape} tensor"
                    )));
                }
                if let Some(rho) = self.rho {
                    if !(rho > 0.0 && rho <= 1.0) {
                        return Err(Error::InvalidArgument("rho must lie in (0, 1]".into()));
                    }
                }
            }
            Problem::Svd => {
                if !self.lambda_min.is_some_and(|l| l > 0.0) {
                    return Err(Error::InvalidArgument("svd needs a positive --lambda-min".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
