//! Flat TOML experiment configuration.
//!
//! Every key except `schema_version` is optional and falls back to the
//! defaults of the selected experiment:
//!
//! ```toml
//! schema_version = 1
//! experiment = "grid"            # toy | grid | stability | single | bounds
//! master_seed = 0
//! samples = 30
//! methods = ["ssvd", "xdiag", "lor_then_d", "d_then_lor", "sketchlord"]
//! recoveries = ["singlepass", "compact", "oversampled"]
//! budgets = [90]                 # total MVPs per run, multiples of 6
//! matrices = ["exp(0.5)", "poly(2)", "noise(0.01)"]
//! N = 500
//! k = 5
//! xi = [0, 0.1, 1, 10]
//! allow_large = false            # required for N > 500
//! allow_nonstandard = false      # decay parameters outside the nine families
//! stability = [[1, 0.0125, 0.95]] # (eta, lambda, mu) triples
//! k_max = 200                    # bounds only
//! eta = 1.0
//! lambda = 0.0125
//! mu = 0.95
//! momentum = "nesterov"          # or "heavy_ball"
//! ema_decay = 0.9
//! ema_tol = 1e-5
//! warmup = 10
//! max_iters = 5000
//! output = "results.csv"
//! trace = "trace.csv"            # single only
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use sketchlord::{width_for_budget, AdmmConfig, Family, Method, Momentum, Recovery, SynthSpec};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Largest `N` accepted without `allow_large`.
pub const DESK_MAX_N: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Toy,
    Grid,
    Stability,
    Single,
    Bounds,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Toy => "toy",
            Experiment::Grid => "grid",
            Experiment::Stability => "stability",
            Experiment::Single => "single",
            Experiment::Bounds => "bounds",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub schema_version: u32,
    pub experiment: Option<Experiment>,
    pub master_seed: Option<u64>,
    pub samples: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub recoveries: Option<Vec<String>>,
    pub budgets: Option<Vec<usize>>,
    pub matrices: Option<Vec<String>>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub xi: Option<Vec<f64>>,
    pub allow_large: Option<bool>,
    pub allow_nonstandard: Option<bool>,
    pub stability: Option<Vec<[f64; 3]>>,
    pub k_max: Option<usize>,
    pub eta: Option<f64>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub momentum: Option<Momentum>,
    pub ema_decay: Option<f64>,
    pub ema_tol: Option<f64>,
    pub warmup: Option<usize>,
    pub max_iters: Option<usize>,
    pub output: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                raw.schema_version
            )));
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Configuration used when no file is given.
    pub fn empty() -> Self {
        RawConfig {
            schema_version: SCHEMA_VERSION,
            ..Default::default()
        }
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub master_seed: u64,
    pub samples: usize,
    pub methods: Vec<Method>,
    pub recoveries: Vec<Recovery>,
    pub budgets: Vec<usize>,
    pub matrices: Vec<(Family, f64)>,
    pub n: usize,
    pub k: usize,
    pub xi: Vec<f64>,
    pub allow_nonstandard: bool,
    pub stability: Vec<[f64; 3]>,
    pub k_max: usize,
    pub admm: AdmmConfig,
    pub output: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

/// Rows of the hyperparameter stability table: `(eta, lambda, mu)`.
pub const STABILITY_CONFIGS: [[f64; 3]; 14] = [
    [1.0, 0.05, 0.95],
    [0.5, 0.05, 0.95],
    [0.25, 0.05, 0.95],
    [0.125, 0.05, 0.95],
    [1.0, 0.2, 0.95],
    [1.0, 0.1, 0.95],
    [1.0, 0.025, 0.95],
    [1.0, 0.0125, 0.95],
    [0.5, 0.025, 0.95],
    [0.25, 0.0125, 0.95],
    [0.5, 0.025, 0.99],
    [0.25, 0.0125, 0.99],
    [0.5, 0.025, 0.5],
    [0.25, 0.0125, 0.5],
];

fn all_families() -> Vec<(Family, f64)> {
    [Family::Exp, Family::Poly, Family::Noise]
        .into_iter()
        .flat_map(|f| f.standard_params().map(|t| (f, t)))
        .collect()
}

/// Parses `exp(0.5)`-style matrix names.
pub fn parse_matrix(s: &str) -> Result<(Family, f64), CliError> {
    let bad = || CliError::Config(format!("matrix '{s}' is not of the form family(t)"));
    let (name, rest) = s.trim().split_once('(').ok_or_else(bad)?;
    let t = rest.strip_suffix(')').ok_or_else(bad)?;
    let family = Family::from_str(name)?;
    let t: f64 = t.trim().parse().map_err(|_| bad())?;
    Ok((family, t))
}

fn parse_all<T: FromStr<Err = sketchlord::LordError>>(items: &[String]) -> Result<Vec<T>, CliError> {
    items.iter().map(|s| s.parse().map_err(CliError::from)).collect()
}

fn non_empty<T>(name: &str, v: Vec<T>) -> Result<Vec<T>, CliError> {
    if v.is_empty() {
        return Err(CliError::Config(format!("{name} must not be empty")));
    }
    Ok(v)
}

impl ExperimentConfig {
    /// Applies the defaults of `experiment` and validates the result.
    pub fn resolve(raw: RawConfig, experiment: Experiment) -> Result<Self, CliError> {
        if let Some(declared) = raw.experiment {
            if declared != experiment {
                return Err(CliError::Config(format!(
                    "config declares experiment '{declared}' but '{experiment}' was requested"
                )));
            }
        }
        let mut cfg = Self::defaults(experiment);
        cfg.master_seed = raw.master_seed.unwrap_or(cfg.master_seed);
        cfg.samples = raw.samples.unwrap_or(cfg.samples);
        if let Some(m) = &raw.methods {
            cfg.methods = parse_all(m)?;
        }
        if let Some(r) = &raw.recoveries {
            cfg.recoveries = parse_all(r)?;
        }
        if let Some(m) = &raw.matrices {
            cfg.matrices = m.iter().map(|s| parse_matrix(s)).collect::<Result<_, _>>()?;
        }
        cfg.budgets = raw.budgets.unwrap_or(cfg.budgets);
        cfg.n = raw.n.unwrap_or(cfg.n);
        cfg.k = raw.k.unwrap_or(cfg.k);
        cfg.xi = raw.xi.unwrap_or(cfg.xi);
        cfg.allow_nonstandard = raw.allow_nonstandard.unwrap_or(false);
        cfg.stability = raw.stability.unwrap_or(cfg.stability);
        cfg.k_max = raw.k_max.unwrap_or(cfg.n);
        cfg.output = raw.output;
        cfg.trace = raw.trace;

        let a = &mut cfg.admm;
        a.eta = raw.eta.unwrap_or(a.eta);
        a.lambda = raw.lambda.unwrap_or(a.lambda);
        a.mu = raw.mu.unwrap_or(a.mu);
        a.momentum = raw.momentum.unwrap_or(a.momentum);
        a.ema_decay = raw.ema_decay.unwrap_or(a.ema_decay);
        a.ema_tol = raw.ema_tol.unwrap_or(a.ema_tol);
        a.warmup = raw.warmup.unwrap_or(a.warmup);
        a.max_iters = raw.max_iters.unwrap_or(a.max_iters);

        cfg.validate(raw.allow_large.unwrap_or(false))?;
        Ok(cfg)
    }

    pub fn defaults(experiment: Experiment) -> Self {
        let mut cfg = ExperimentConfig {
            experiment,
            master_seed: 0,
            samples: 30,
            methods: Method::ALL.to_vec(),
            recoveries: Recovery::ALL.to_vec(),
            budgets: vec![90],
            matrices: all_families(),
            n: 500,
            k: 5,
            xi: vec![0.0, 0.1, 1.0, 10.0],
            allow_nonstandard: false,
            stability: Vec::new(),
            k_max: 500,
            admm: AdmmConfig::default(),
            output: None,
            trace: None,
        };
        match experiment {
            Experiment::Grid => {}
            Experiment::Toy => {
                cfg.n = 200;
                cfg.budgets = (2..=20).map(|i| 6 * i).collect();
                cfg.matrices.clear();
                cfg.xi.clear();
            }
            Experiment::Stability => {
                cfg.samples = 10;
                cfg.methods = vec![Method::Sketchlord];
                cfg.recoveries = vec![Recovery::Compact];
                cfg.matrices = vec![(Family::Exp, 0.5)];
                cfg.xi = vec![1.0];
                cfg.stability = STABILITY_CONFIGS.to_vec();
            }
            Experiment::Single => {
                cfg.samples = 1;
                cfg.methods = vec![Method::Sketchlord];
                cfg.recoveries = vec![Recovery::Compact];
                cfg.matrices = vec![(Family::Exp, 0.5)];
                cfg.xi = vec![1.0];
            }
            Experiment::Bounds => {
                cfg.n = 200;
                cfg.k_max = 200;
            }
        }
        cfg
    }

    fn validate(&self, allow_large: bool) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.experiment == Experiment::Bounds {
            if self.n < 2 {
                return bad(format!("bounds need N >= 2, got {}", self.n));
            }
            if self.k_max == 0 || self.k_max > self.n {
                return bad(format!("k_max must lie in 1..=N, got {}", self.k_max));
            }
            return Ok(());
        }
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if self.n > DESK_MAX_N && !allow_large {
            return bad(format!("N = {} exceeds {DESK_MAX_N}; set allow_large = true", self.n));
        }
        non_empty("methods", self.methods.clone())?;
        non_empty("recoveries", self.recoveries.clone())?;
        non_empty("budgets", self.budgets.clone())?;
        for &b in &self.budgets {
            if b == 0 || b % 6 != 0 {
                return bad(format!("budget {b} is not a positive multiple of 6"));
            }
            for &m in &self.methods {
                for &r in &self.recoveries {
                    width_for_budget(m, r, b)?;
                }
            }
        }
        self.admm.validate()?;
        if self.experiment == Experiment::Toy {
            if self.n == 0 {
                return bad("N must be positive".into());
            }
            return Ok(());
        }
        non_empty("matrices", self.matrices.clone())?;
        non_empty("xi", self.xi.clone())?;
        for &(family, t) in &self.matrices {
            for &xi in &self.xi {
                self.synth_spec(family, t, xi, 0).validate()?;
            }
        }
        match self.experiment {
            Experiment::Stability => {
                non_empty("stability", self.stability.clone())?;
                for &[eta, lambda, mu] in &self.stability {
                    self.admm.clone().with_step(eta, lambda, mu).validate()?;
                }
            }
            Experiment::Single => {
                let one = [
                    ("matrices", self.matrices.len()),
                    ("xi", self.xi.len()),
                    ("budgets", self.budgets.len()),
                    ("methods", self.methods.len()),
                    ("recoveries", self.recoveries.len()),
                ];
                for (name, len) in one {
                    if len != 1 {
                        return bad(format!("single runs need exactly one entry in {name}, got {len}"));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn synth_spec(&self, family: Family, t: f64, xi: f64, seed: u64) -> SynthSpec {
        let mut spec = SynthSpec::new(family, t, self.n, self.k, xi, seed);
        spec.allow_nonstandard = self.allow_nonstandard;
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str, e: Experiment) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::resolve(RawConfig::parse(text)?, e)
    }

    #[test]
    fn schema_version_is_mandatory() {
        assert!(matches!(RawConfig::parse("samples = 3"), Err(CliError::Config(_))));
        assert!(matches!(RawConfig::parse("schema_version = 2"), Err(CliError::Config(_))));
        assert!(RawConfig::parse("schema_version = 1").is_ok());
    }

    #[test]
    fn unknown_keys_and_names_are_config_errors() {
        assert!(resolve("schema_version = 1\nbogus = 1", Experiment::Grid).is_err());
        let e = resolve("schema_version = 1\nmethods = [\"magic\"]", Experiment::Grid).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(resolve("schema_version = 1\nmatrices = [\"exp 0.5\"]", Experiment::Grid).is_err());
    }

    #[test]
    fn default_grid_has_the_full_cross_product() {
        let cfg = resolve("schema_version = 1", Experiment::Grid).unwrap();
        let cells = cfg.matrices.len() * cfg.xi.len() * cfg.samples;
        let rows = cells * cfg.methods.len() * cfg.recoveries.len() * cfg.budgets.len();
        assert_eq!(cfg.matrices.len(), 9);
        assert_eq!(rows, 16_200);
    }

    #[test]
    fn budgets_must_be_multiples_of_six() {
        assert!(resolve("schema_version = 1\nbudgets = [100]", Experiment::Grid).is_err());
        assert!(resolve("schema_version = 1\nbudgets = [0]", Experiment::Toy).is_err());
        assert!(resolve("schema_version = 1\nbudgets = [12]\nrecoveries = [\"compact\"]", Experiment::Toy).is_ok());
    }

    #[test]
    fn large_sizes_need_opt_in() {
        assert!(resolve("schema_version = 1\nN = 1000\nk = 10", Experiment::Grid).is_err());
        assert!(resolve("schema_version = 1\nN = 1000\nk = 10\nallow_large = true", Experiment::Grid).is_ok());
    }

    #[test]
    fn experiment_must_match() {
        assert!(resolve("schema_version = 1\nexperiment = \"toy\"", Experiment::Grid).is_err());
        assert!(resolve("schema_version = 1\nexperiment = \"toy\"", Experiment::Toy).is_ok());
    }

    #[test]
    fn single_needs_one_of_each() {
        let two = "schema_version = 1\nmethods = [\"ssvd\", \"xdiag\"]";
        assert!(resolve(two, Experiment::Single).is_err());
        assert!(resolve("schema_version = 1", Experiment::Single).is_ok());
    }

    #[test]
    fn admm_keys_are_applied_and_checked() {
        let cfg = resolve("schema_version = 1\neta = 0.5\nmomentum = \"heavy_ball\"", Experiment::Single).unwrap();
        assert_eq!(cfg.admm.eta, 0.5);
        assert_eq!(cfg.admm.momentum, Momentum::HeavyBall);
        assert!(resolve("schema_version = 1\nmu = 1.5", Experiment::Single).is_err());
        assert!(resolve("schema_version = 1\nstability = [[3, 0.1, 0.9]]", Experiment::Stability).is_err());
    }

    #[test]
    fn matrix_names_parse() {
        assert_eq!(parse_matrix("exp(0.5)").unwrap(), (Family::Exp, 0.5));
        assert_eq!(parse_matrix(" poly( 2 ) ").unwrap(), (Family::Poly, 2.0));
        assert!(parse_matrix("wave(1)").is_err());
        assert!(resolve("schema_version = 1\nmatrices = [\"exp(0.3)\"]", Experiment::Grid).is_err());
        let ok = "schema_version = 1\nmatrices = [\"exp(0.3)\"]\nallow_nonstandard = true";
        assert!(resolve(ok, Experiment::Grid).is_ok());
    }

    #[test]
    fn bounds_limits() {
        assert!(resolve("schema_version = 1\nN = 1", Experiment::Bounds).is_err());
        assert!(resolve("schema_version = 1\nN = 10\nk_max = 11", Experiment::Bounds).is_err());
        assert_eq!(resolve("schema_version = 1\nN = 10", Experiment::Bounds).unwrap().k_max, 10);
    }
}
