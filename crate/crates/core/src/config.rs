//! Run configuration: defaults, an optional `key = value` file, then flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limitshape::LimitConfig;
use crate::patterns::RankConfig;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "PATDENS_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl Format {
    /// Guess from a file extension.
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()? {
            "json" => Some(Format::Json),
            "csv" => Some(Format::Csv),
            "svg" => Some(Format::Svg),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub quad_abs: f64,
    pub quad_rel: f64,
    pub newton_tol: f64,
    /// Residual evaluations the limit-shape solver may spend.
    pub newton_evaluations: usize,
    pub svd_threshold: f64,
    pub fd_step: f64,
    /// Grid for the constant and interval computations.
    pub grid: usize,
    /// Output grid for limit shapes.
    pub shape_grid: usize,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let limit = LimitConfig::default();
        let rank = RankConfig::default();
        RunConfig {
            seed: 7,
            threads: None,
            quad_abs: limit.quad_abs,
            quad_rel: limit.quad_rel,
            newton_tol: limit.newton_tol,
            newton_evaluations: limit.max_evaluations,
            svd_threshold: rank.rank_tol,
            fd_step: rank.fd_step,
            grid: 1000,
            shape_grid: 2000,
            out: None,
            format: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("quad_abs", self.quad_abs),
            ("quad_rel", self.quad_rel),
            ("newton_tol", self.newton_tol),
            ("svd_threshold", self.svd_threshold),
            ("fd_step", self.fd_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.grid == 0 || self.shape_grid == 0 {
            return Err(Error::invalid("grid sizes must be positive"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be positive"));
        }
        Ok(())
    }

    /// Thread count from the config, else from [`THREADS_ENV`].
    pub fn thread_count(&self) -> Result<Option<usize>> {
        if self.threads.is_some() {
            return Ok(self.threads);
        }
        match std::env::var(THREADS_ENV) {
            Ok(s) => match s.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(Some(n)),
                _ => Err(Error::invalid(format!("{THREADS_ENV}={s} is not a positive integer"))),
            },
            Err(_) => Ok(None),
        }
    }

    pub fn limit_config(&self) -> LimitConfig {
        LimitConfig {
            quad_abs: self.quad_abs,
            quad_rel: self.quad_rel,
            newton_tol: self.newton_tol,
            max_evaluations: self.newton_evaluations,
            ..LimitConfig::default()
        }
    }

    pub fn rank_config(&self, fixed_length: bool) -> RankConfig {
        RankConfig {
            fd_step: self.fd_step,
            rank_tol: self.svd_threshold,
            fixed_length,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults() {
        let cfg = RunConfig::parse("seed = 3\nnewton_tol = 1e-10\nformat = \"csv\"\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.newton_tol, 1e-10);
        assert_eq!(cfg.format, Some(Format::Csv));
        assert_eq!(cfg.grid, 1000);
        assert!(RunConfig::parse("quad_abs = -1.0").is_err());
        assert!(RunConfig::parse("bogus = 1").is_err());
    }
}
