//! Flat key-value run configuration.
//!
//! The format is one `key = value` pair per line with `#` comments. Unknown
//! keys are errors, every precondition is validated before any compute, and
//! identical configs drive byte-identical outputs downstream.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::Error;
use crate::grid::{Grid, GridKind};
use crate::model::{DomainParams, MarketParams, RegularizationParams};
use crate::stepper::SolverOptions;

/// Everything a run needs; defaults describe the nonlinear benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub market: MarketParams,
    pub domain: DomainParams,
    pub reg: RegularizationParams,
    /// Node count of the spatial grid.
    pub nx: usize,
    pub grid: GridKind,
    pub solver: SolverOptions,
    /// Strictly decreasing viscosities for the sweep subcommand.
    pub eps_list: Vec<f64>,
    /// Half-range of the plotted ODE solution.
    pub psi_a_max: f64,
    /// Sample count for the ODE plot and certification.
    pub psi_n: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            market: MarketParams {
                sigma: 0.2,
                r: 0.1,
                q: 0.0,
                a: 0.02,
                strike: 1.0,
                horizon: 0.5,
            },
            domain: DomainParams { b: 4.0 },
            reg: RegularizationParams::coupled(0.05),
            nx: 801,
            grid: GridKind::Graded { ratio: 1.05 },
            solver: SolverOptions::default(),
            eps_list: vec![0.2, 0.1, 0.05, 0.025],
            psi_a_max: 50.0,
            psi_n: 1001,
            out_dir: None,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, Error> {
    value
        .parse::<f64>()
        .map_err(|_| Error::config(key, format!("not a number: `{value}`")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize, Error> {
    value
        .parse::<usize>()
        .map_err(|_| Error::config(key, format!("not a nonnegative integer: `{value}`")))
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses and validates a config document.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut cfg = RunConfig::default();
        let mut smoothing_width_set = false;
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(
                    line,
                    format!("line {}: expected `key = value`", lineno + 1),
                ));
            };
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::config(key, "duplicate key"));
            }
            match key {
                "sigma" => cfg.market.sigma = parse_f64(key, value)?,
                "r" => cfg.market.r = parse_f64(key, value)?,
                "q" => cfg.market.q = parse_f64(key, value)?,
                "a" => cfg.market.a = parse_f64(key, value)?,
                "K" => cfg.market.strike = parse_f64(key, value)?,
                "T" => cfg.market.horizon = parse_f64(key, value)?,
                "b" => cfg.domain.b = parse_f64(key, value)?,
                "eps" => cfg.reg.eps = parse_f64(key, value)?,
                "smoothing_width" => {
                    cfg.reg.smoothing_width = parse_f64(key, value)?;
                    smoothing_width_set = true;
                }
                "nx" => cfg.nx = parse_usize(key, value)?,
                "nt" => cfg.solver.nt = parse_usize(key, value)?,
                "grid" => {
                    cfg.grid = match value {
                        "uniform" => GridKind::Uniform,
                        "graded" => match cfg.grid {
                            GridKind::Graded { ratio } => GridKind::Graded { ratio },
                            GridKind::Uniform => GridKind::Graded { ratio: 1.05 },
                        },
                        other => {
                            return Err(Error::config(
                                key,
                                format!("expected `uniform` or `graded`, got `{other}`"),
                            ))
                        }
                    }
                }
                "grade_ratio" => {
                    let ratio = parse_f64(key, value)?;
                    if let GridKind::Graded { .. } = cfg.grid {
                        cfg.grid = GridKind::Graded { ratio };
                    } else {
                        cfg.grid = GridKind::Graded { ratio };
                    }
                }
                "tol_newton" => cfg.solver.tol_newton = parse_f64(key, value)?,
                "max_iter" => cfg.solver.max_iter = parse_usize(key, value)?,
                "dt_out" => cfg.solver.dt_out = parse_f64(key, value)?,
                "eps_list" => {
                    cfg.eps_list = value
                        .split(',')
                        .map(|v| parse_f64(key, v.trim()))
                        .collect::<Result<Vec<_>, _>>()?;
                }
                "psi_a_max" => cfg.psi_a_max = parse_f64(key, value)?,
                "psi_n" => cfg.psi_n = parse_usize(key, value)?,
                "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
                unknown => {
                    return Err(Error::config(unknown, "unknown key"));
                }
            }
        }
        if !smoothing_width_set {
            cfg.reg.smoothing_width = cfg.reg.eps;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every module-level precondition.
    pub fn validate(&self) -> Result<(), Error> {
        self.market.validate()?;
        self.domain.validate(&self.market)?;
        self.reg.validate(&self.market, &self.domain)?;
        if self.nx < 8 {
            return Err(Error::config("nx", format!("need at least 8 nodes, got {}", self.nx)));
        }
        if self.solver.nt == 0 {
            return Err(Error::config("nt", "must be >= 1"));
        }
        if !(self.solver.tol_newton > 0.0) {
            return Err(Error::config(
                "tol_newton",
                format!("must be > 0, got {}", self.solver.tol_newton),
            ));
        }
        if self.solver.max_iter < 2 {
            return Err(Error::config(
                "max_iter",
                format!("must be >= 2, got {}", self.solver.max_iter),
            ));
        }
        if !(self.solver.dt_out > 0.0) {
            return Err(Error::config(
                "dt_out",
                format!("must be > 0, got {}", self.solver.dt_out),
            ));
        }
        if let GridKind::Graded { ratio } = self.grid {
            if !(ratio > 1.0 && ratio <= 2.0) {
                return Err(Error::config(
                    "grade_ratio",
                    format!("must lie in (1, 2], got {ratio}"),
                ));
            }
        }
        if self.eps_list.is_empty() {
            return Err(Error::config("eps_list", "must not be empty"));
        }
        if self.eps_list.iter().any(|&e| !(e > 0.0 && e < self.market.strike)) {
            return Err(Error::config(
                "eps_list",
                "every entry must satisfy 0 < eps < K",
            ));
        }
        if !self.eps_list.windows(2).all(|w| w[1] < w[0]) {
            return Err(Error::config("eps_list", "entries must be strictly decreasing"));
        }
        if !(self.psi_a_max > 0.0) {
            return Err(Error::config(
                "psi_a_max",
                format!("must be > 0, got {}", self.psi_a_max),
            ));
        }
        if self.psi_n < 2 {
            return Err(Error::config("psi_n", format!("must be >= 2, got {}", self.psi_n)));
        }
        Ok(())
    }

    /// Builds the configured spatial grid.
    pub fn build_grid(&self) -> Result<Grid, Error> {
        match self.grid {
            GridKind::Uniform => Grid::uniform(self.nx, self.domain.b),
            GridKind::Graded { ratio } => Grid::graded(
                self.nx,
                self.domain.b,
                self.market.strike,
                self.reg.smoothing_width,
                ratio,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_document() {
        let text = "\
# benchmark
sigma = 0.2
r = 0.1
q = 0.0
a = 0.02
K = 1.0
T = 0.5
b = 4.0
eps = 0.05
nx = 801
nt = 500
grid = uniform
tol_newton = 1e-10
max_iter = 20
dt_out = 0.02
eps_list = 0.2, 0.1, 0.05, 0.025
psi_a_max = 50
psi_n = 1001
out_dir = out
";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.market.sigma, 0.2);
        assert_eq!(cfg.grid, GridKind::Uniform);
        assert_eq!(cfg.eps_list, vec![0.2, 0.1, 0.05, 0.025]);
        assert_eq!(cfg.reg.smoothing_width, cfg.reg.eps);
        assert_eq!(cfg.out_dir.as_deref(), Some(Path::new("out")));
    }

    #[test]
    fn unknown_key_is_an_error_naming_it() {
        let err = RunConfig::parse("sigmaa = 0.2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sigmaa"), "{msg}");
    }

    #[test]
    fn invalid_values_name_their_key() {
        for (text, key) in [
            ("sigma = 0\n", "sigma"),
            ("K = -1\n", "K"),
            ("eps = 2\n", "eps"), // eps >= K
            ("b = 0.5\n", "b"),   // b <= K
            ("nt = 0\n", "nt"),
            ("eps_list = 0.1, 0.2\n", "eps_list"),
            ("grade_ratio = 1.0\n", "grade_ratio"),
            ("sigma = abc\n", "sigma"),
        ] {
            let err = RunConfig::parse(text).unwrap_err();
            assert!(err.to_string().contains(key), "{text}: {err}");
        }
    }

    #[test]
    fn duplicate_key_rejected() {
        assert!(RunConfig::parse("sigma = 0.2\nsigma = 0.3\n").is_err());
    }

    #[test]
    fn zero_horizon_is_allowed() {
        let cfg = RunConfig::parse("T = 0\n").unwrap();
        assert_eq!(cfg.market.horizon, 0.0);
    }

    #[test]
    fn smoothing_width_decouples_on_request() {
        let cfg = RunConfig::parse("eps = 0.01\nsmoothing_width = 0.1\n").unwrap();
        assert_eq!(cfg.reg.eps, 0.01);
        assert_eq!(cfg.reg.smoothing_width, 0.1);
    }

    #[test]
    fn default_grid_is_graded_and_builds() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.grid, GridKind::Graded { ratio: 1.05 });
        let g = cfg.build_grid().unwrap();
        assert_eq!(g.len(), cfg.nx);
    }
}
