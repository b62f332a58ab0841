//! Flat `key = value` run configuration.
//!
//! Resolution order, later wins: built-in defaults, `--config FILE`, the
//! output-directory environment variable, then `--key value` flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{NsCoefficients, PolarConfig, PolarMethod};
use crate::orthogonalize::ResidualMode;
use crate::problems::{NoiseKind, NoiseModel};

/// Overrides `output_dir` unless a `--output-dir` flag is given.
pub const OUTPUT_DIR_ENV: &str = "LOWRANK_BENCH_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    Timing,
    Robustness,
    Regression,
    Invariants,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::Timing,
        Experiment::Robustness,
        Experiment::Regression,
        Experiment::Invariants,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Timing => "timing",
            Self::Robustness => "robustness",
            Self::Regression => "regression",
            Self::Invariants => "invariants",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    ExactSvd,
    NewtonSchulz,
    GaussianSketch,
    ColumnSelect,
    PowerIteration,
    TruncatedSvd,
    LrMuon,
    Muon,
    Sgdm,
    AdamW,
    LrGd,
    SafeguardedGd,
}

impl Method {
    pub const ALL: [Method; 12] = [
        Method::ExactSvd,
        Method::NewtonSchulz,
        Method::GaussianSketch,
        Method::ColumnSelect,
        Method::PowerIteration,
        Method::TruncatedSvd,
        Method::LrMuon,
        Method::Muon,
        Method::Sgdm,
        Method::AdamW,
        Method::LrGd,
        Method::SafeguardedGd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ExactSvd => "exact-svd",
            Self::NewtonSchulz => "newton-schulz",
            Self::GaussianSketch => "gaussian-sketch",
            Self::ColumnSelect => "column-select",
            Self::PowerIteration => "power-iteration",
            Self::TruncatedSvd => "truncated-svd",
            Self::LrMuon => "lr-muon",
            Self::Muon => "muon",
            Self::Sgdm => "sgdm",
            Self::AdamW => "adamw",
            Self::LrGd => "lr-gd",
            Self::SafeguardedGd => "safeguarded-gd",
        }
    }

    /// Methods that compute a matrix sign (timing study).
    pub fn is_orthogonalizer(self) -> bool {
        matches!(
            self,
            Self::ExactSvd
                | Self::NewtonSchulz
                | Self::GaussianSketch
                | Self::ColumnSelect
                | Self::PowerIteration
                | Self::TruncatedSvd
        )
    }

    /// Methods that run an optimization loop (regression study).
    pub fn is_optimizer(self) -> bool {
        !self.is_orthogonalizer()
    }

    /// Randomized sketches sized by the rank rule.
    pub fn is_sketch(self) -> bool {
        matches!(
            self,
            Self::GaussianSketch | Self::ColumnSelect | Self::PowerIteration | Self::TruncatedSvd
        )
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMode {
    Fixed,
    Safeguarded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualChoice {
    /// Exact nuclear norm up to `AUTO_EXACT_MAX_DIM`, Frobenius bound above.
    Auto,
    Exact,
    Frobenius,
}

/// Largest `min(m, n)` for which `ResidualChoice::Auto` pays for an SVD.
pub const AUTO_EXACT_MAX_DIM: usize = 512;

impl ResidualChoice {
    pub fn resolve(self, min_dim: usize) -> ResidualMode {
        match self {
            Self::Exact => ResidualMode::ExactNuclear,
            Self::Frobenius => ResidualMode::FrobeniusUpperBound,
            Self::Auto if min_dim <= AUTO_EXACT_MAX_DIM => ResidualMode::ExactNuclear,
            Self::Auto => ResidualMode::FrobeniusUpperBound,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// `None` picks the per-experiment default.
    pub dims: Option<Vec<usize>>,
    /// Explicit sketch rank; otherwise `round(rank_frac * n)`.
    pub rank: Option<usize>,
    pub rank_frac: f64,
    pub methods: Option<Vec<Method>>,
    pub iters: usize,
    pub seeds: Vec<u64>,
    pub alpha: f64,
    pub noise: NoiseModel,
    pub lr_scale: f64,
    pub output_dir: PathBuf,

    // Regression instance and optimizers.
    pub p: usize,
    pub sv_base: f64,
    pub noise_scale: f64,
    pub rank_mode: RankMode,
    pub polar: PolarMethod,
    pub ns_steps: usize,
    pub ns_coeffs: NsCoefficients,
    pub residual: ResidualChoice,
    pub power_q: usize,
    pub sgdm_lr: f64,
    pub momentum: f64,
    pub adamw_lr: f64,
    pub weight_decay: f64,

    // Timing.
    pub reps: usize,
    pub warmup: usize,

    // Robustness.
    pub noise_vars: Vec<f64>,
    pub bases: usize,
    pub trials: usize,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            dims: None,
            rank: None,
            rank_frac: 0.1,
            methods: None,
            iters: 2000,
            seeds: vec![0],
            alpha: 2.0,
            noise: NoiseModel::none(),
            lr_scale: 1.0,
            output_dir: PathBuf::from("bench-out"),
            p: 20,
            sv_base: 1.2,
            noise_scale: 1e-3,
            rank_mode: RankMode::Safeguarded,
            polar: PolarMethod::ExactSvd,
            ns_steps: 5,
            ns_coeffs: NsCoefficients::CONVERGENT,
            residual: ResidualChoice::Auto,
            power_q: 2,
            sgdm_lr: 1e-3,
            momentum: 0.9,
            adamw_lr: 1e-3,
            weight_decay: 0.0,
            reps: 10,
            warmup: 1,
            noise_vars: vec![0.1, 1.0, 10.0],
            bases: 5,
            trials: 30,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.dims.clone().unwrap_or_else(|| match self.experiment {
            Experiment::Timing => vec![256, 512, 1024, 2048],
            Experiment::Robustness => vec![500],
            Experiment::Regression | Experiment::Invariants => vec![200],
        })
    }

    pub fn methods(&self) -> Vec<Method> {
        self.methods.clone().unwrap_or_else(|| match self.experiment {
            Experiment::Timing => vec![
                Method::ExactSvd,
                Method::NewtonSchulz,
                Method::GaussianSketch,
                Method::ColumnSelect,
                Method::PowerIteration,
                Method::TruncatedSvd,
            ],
            Experiment::Robustness => vec![Method::NewtonSchulz, Method::GaussianSketch],
            Experiment::Regression | Experiment::Invariants => {
                vec![Method::LrMuon, Method::Muon, Method::Sgdm, Method::AdamW]
            }
        })
    }

    /// Sketch rank for an `n`-sized problem, at least 1 and at most `n`.
    pub fn rank_for(&self, n: usize) -> usize {
        let r = self
            .rank
            .unwrap_or_else(|| (self.rank_frac * n as f64).round() as usize);
        r.clamp(1, n.max(1))
    }

    /// Polar step used by sketches and Muon in optimization runs.
    pub fn polar_config(&self) -> PolarConfig {
        PolarConfig {
            method: self.polar,
            ns_steps: self.ns_steps,
            coefficients: self.ns_coeffs,
            ..PolarConfig::default()
        }
    }

    /// The Newton-Schulz configuration used by timing and robustness.
    pub fn ns_config(&self) -> PolarConfig {
        PolarConfig {
            method: PolarMethod::NewtonSchulz,
            ns_steps: self.ns_steps,
            coefficients: self.ns_coeffs,
            ..PolarConfig::default()
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "experiment" => self.experiment = value.parse()?,
            "dims" => self.dims = Some(parse_list(&key, value)?),
            "rank" => self.rank = Some(parse(&key, value)?),
            "rank_frac" => self.rank_frac = parse(&key, value)?,
            "methods" => {
                self.methods = Some(
                    split_list(value)
                        .map(str::parse)
                        .collect::<Result<Vec<Method>>>()?,
                )
            }
            "iters" => self.iters = parse(&key, value)?,
            "seed" | "seeds" => self.seeds = parse_list(&key, value)?,
            "alpha" => self.alpha = parse(&key, value)?,
            "noise_kind" => {
                self.noise.kind = match value {
                    "none" => NoiseKind::None,
                    "gaussian" => NoiseKind::GaussianFrobenius,
                    "heavy-tail" => NoiseKind::HeavyTailPareto,
                    _ => return Err(bad(&key, value)),
                }
            }
            "noise_sigma" => self.noise.sigma = parse(&key, value)?,
            "lr_scale" => self.lr_scale = parse(&key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "p" => self.p = parse(&key, value)?,
            "sv_base" => self.sv_base = parse(&key, value)?,
            "noise_scale" => self.noise_scale = parse(&key, value)?,
            "rank_mode" => {
                self.rank_mode = match value {
                    "fixed" => RankMode::Fixed,
                    "safeguarded" => RankMode::Safeguarded,
                    _ => return Err(bad(&key, value)),
                }
            }
            "polar" => {
                self.polar = match value {
                    "exact" | "exact-svd" => PolarMethod::ExactSvd,
                    "newton-schulz" | "ns" => PolarMethod::NewtonSchulz,
                    _ => return Err(bad(&key, value)),
                }
            }
            "ns_steps" => self.ns_steps = parse(&key, value)?,
            "ns_coeffs" => {
                self.ns_coeffs = match value {
                    "convergent" => NsCoefficients::CONVERGENT,
                    "muon" => NsCoefficients::MUON,
                    _ => return Err(bad(&key, value)),
                }
            }
            "residual" => {
                self.residual = match value {
                    "auto" => ResidualChoice::Auto,
                    "exact" => ResidualChoice::Exact,
                    "frobenius" => ResidualChoice::Frobenius,
                    _ => return Err(bad(&key, value)),
                }
            }
            "power_q" => self.power_q = parse(&key, value)?,
            "sgdm_lr" => self.sgdm_lr = parse(&key, value)?,
            "momentum" => self.momentum = parse(&key, value)?,
            "adamw_lr" => self.adamw_lr = parse(&key, value)?,
            "weight_decay" => self.weight_decay = parse(&key, value)?,
            "reps" => self.reps = parse(&key, value)?,
            "warmup" => self.warmup = parse(&key, value)?,
            "noise_vars" => self.noise_vars = parse_list(&key, value)?,
            "bases" => self.bases = parse(&key, value)?,
            "trials" => self.trials = parse(&key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Apply a `key = value` file. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Build from CLI arguments (without the program name):
    /// `<experiment> [--config FILE] [--key value ...]`.
    pub fn from_args<I, S>(args: I, env_output_dir: Option<String>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let args: Vec<String> = args.into_iter().map(|s| s.as_ref().to_string()).collect();
        let (first, rest) = args
            .split_first()
            .ok_or_else(|| Error::Config("missing experiment name".into()))?;
        let experiment: Experiment = first.parse()?;
        let mut flags = Vec::new();
        let mut config_file = None;
        let mut it = rest.iter();
        while let Some(flag) = it.next() {
            let key = flag
                .strip_prefix("--")
                .ok_or_else(|| Error::Config(format!("expected --key, got '{flag}'")))?;
            let (key, value) = match key.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| Error::Config(format!("--{key} needs a value")))?;
                    (key.to_string(), v.clone())
                }
            };
            if key == "config" {
                config_file = Some(PathBuf::from(value));
            } else {
                flags.push((key, value));
            }
        }
        let mut cfg = Self::new(experiment);
        if let Some(path) = config_file {
            cfg.apply_file(&path)?;
            cfg.experiment = experiment;
        }
        if let Some(dir) = env_output_dir.filter(|d| !d.is_empty()) {
            cfg.output_dir = PathBuf::from(dir);
        }
        for (k, v) in flags {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims();
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Config("dims must be a nonempty list of positive sizes".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if !(self.rank_frac > 0.0 && self.rank_frac <= 1.0) {
            return Err(Error::Config(format!("rank_frac must lie in (0, 1], got {}", self.rank_frac)));
        }
        if self.rank == Some(0) {
            return Err(Error::Config("rank must be positive".into()));
        }
        if !(self.lr_scale > 0.0 && self.lr_scale.is_finite()) {
            return Err(Error::Config(format!("lr_scale must be positive, got {}", self.lr_scale)));
        }
        let methods = self.methods();
        if methods.is_empty() {
            return Err(Error::Config("methods must be nonempty".into()));
        }
        match self.experiment {
            Experiment::Timing => {
                if let Some(m) = methods.iter().find(|m| !m.is_orthogonalizer()) {
                    return Err(Error::Config(format!("'{m}' is not an orthogonalization method")));
                }
                if self.reps == 0 {
                    return Err(Error::Config("reps must be positive".into()));
                }
            }
            Experiment::Regression => {
                if let Some(m) = methods.iter().find(|m| !m.is_optimizer()) {
                    return Err(Error::Config(format!("'{m}' is not an optimizer")));
                }
                if self.iters == 0 {
                    return Err(Error::Config("iters must be at least 1".into()));
                }
                if let Some(&n) = dims.iter().find(|&&n| n < self.p) {
                    return Err(Error::Config(format!("p = {} exceeds n = {n}", self.p)));
                }
                crate::optimizers::check_alpha(self.alpha)
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
            Experiment::Robustness => {
                if self.noise_vars.is_empty() || self.noise_vars.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::Config("noise_vars must be a nonempty list of variances >= 0".into()));
                }
                if self.bases == 0 || self.trials < 2 {
                    return Err(Error::Config("need bases >= 1 and trials >= 2".into()));
                }
            }
            Experiment::Invariants => {}
        }
        Ok(())
    }

    /// Every key with its effective value, in a stable order, as parseable
    /// `key = value` pairs.
    pub fn echo(&self) -> Vec<(String, String)> {
        let list = |v: &[String]| v.join(",");
        let noise_kind = match self.noise.kind {
            NoiseKind::None => "none",
            NoiseKind::GaussianFrobenius => "gaussian",
            NoiseKind::HeavyTailPareto => "heavy-tail",
        };
        let pairs: Vec<(&str, String)> = vec![
            ("experiment", self.experiment.to_string()),
            ("dims", list(&self.dims().iter().map(|d| d.to_string()).collect::<Vec<_>>())),
            (
                "rank",
                self.rank.map_or_else(|| "auto".to_string(), |r| r.to_string()),
            ),
            ("rank_frac", self.rank_frac.to_string()),
            ("methods", list(&self.methods().iter().map(|m| m.to_string()).collect::<Vec<_>>())),
            ("iters", self.iters.to_string()),
            ("seeds", list(&self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>())),
            ("alpha", self.alpha.to_string()),
            ("noise_kind", noise_kind.to_string()),
            ("noise_sigma", self.noise.sigma.to_string()),
            ("lr_scale", self.lr_scale.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("p", self.p.to_string()),
            ("sv_base", self.sv_base.to_string()),
            ("noise_scale", self.noise_scale.to_string()),
            (
                "rank_mode",
                match self.rank_mode {
                    RankMode::Fixed => "fixed",
                    RankMode::Safeguarded => "safeguarded",
                }
                .to_string(),
            ),
            (
                "polar",
                match self.polar {
                    PolarMethod::ExactSvd => "exact",
                    PolarMethod::NewtonSchulz => "newton-schulz",
                }
                .to_string(),
            ),
            ("ns_steps", self.ns_steps.to_string()),
            (
                "ns_coeffs",
                if self.ns_coeffs == NsCoefficients::MUON {
                    "muon"
                } else {
                    "convergent"
                }
                .to_string(),
            ),
            (
                "residual",
                match self.residual {
                    ResidualChoice::Auto => "auto",
                    ResidualChoice::Exact => "exact",
                    ResidualChoice::Frobenius => "frobenius",
                }
                .to_string(),
            ),
            ("power_q", self.power_q.to_string()),
            ("sgdm_lr", self.sgdm_lr.to_string()),
            ("momentum", self.momentum.to_string()),
            ("adamw_lr", self.adamw_lr.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("reps", self.reps.to_string()),
            ("warmup", self.warmup.to_string()),
            ("noise_vars", list(&self.noise_vars.iter().map(|v| v.to_string()).collect::<Vec<_>>())),
            ("bases", self.bases.to_string()),
            ("trials", self.trials.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.echo()
            .into_iter()
            .filter(|(k, v)| !(k == "rank" && v == "auto"))
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value '{value}' for {key}"))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    split_list(value).map(|v| parse(key, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_only_is_runnable() {
        for e in Experiment::ALL {
            RunConfig::new(e).validate().unwrap();
            RunConfig::from_args([e.name()], None).unwrap();
        }
    }

    #[test]
    fn flags_override_file_and_env() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\ndims = 64, 128\niters = 7\noutput_dir = from-file\n").unwrap();
        let cfg = RunConfig::from_args(
            [
                "regression",
                "--config",
                path.to_str().unwrap(),
                "--iters",
                "9",
                "--seed=4",
            ],
            Some("from-env".into()),
        )
        .unwrap();
        assert_eq!(cfg.dims(), vec![64, 128]);
        assert_eq!(cfg.iters, 9);
        assert_eq!(cfg.seeds, vec![4]);
        assert_eq!(cfg.output_dir, PathBuf::from("from-env"));

        let cfg = RunConfig::from_args(["timing", "--output-dir", "flag"], Some("env".into())).unwrap();
        assert_eq!(cfg.output_dir, PathBuf::from("flag"));
    }

    #[test]
    fn unknown_names_are_errors() {
        assert!(matches!(
            RunConfig::from_args(["timing", "--methods", "gaussian-sketch,bogus"], None),
            Err(Error::UnknownMethod(_))
        ));
        assert!(matches!(RunConfig::from_args(["nope"], None), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::from_args(["timing", "--colour", "red"], None),
            Err(Error::Config(_))
        ));
        assert!(RunConfig::from_args(["timing", "--methods", "sgdm"], None).is_err());
        assert!(RunConfig::from_args(["regression", "--dims", "10", "--p", "20"], None).is_err());
    }

    #[test]
    fn echo_roundtrips_through_text() {
        let mut cfg = RunConfig::new(Experiment::Regression);
        cfg.set("rank", "7").unwrap();
        cfg.set("noise_kind", "heavy-tail").unwrap();
        cfg.set("ns_coeffs", "muon").unwrap();
        let mut back = RunConfig::new(Experiment::Timing);
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back.echo(), cfg.echo());
    }

    #[test]
    fn rank_rule() {
        let mut cfg = RunConfig::new(Experiment::Timing);
        assert_eq!(cfg.rank_for(2048), 205);
        assert_eq!(cfg.rank_for(3), 1);
        cfg.rank = Some(50);
        assert_eq!(cfg.rank_for(20), 20);
    }
}
