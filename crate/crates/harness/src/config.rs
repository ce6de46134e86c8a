//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, list values are
//! comma-separated. Keys may be written with `-` or `_`. Unknown keys are
//! rejected.
//!
//! ```text
//! experiment = sweep
//! n_list = 10, 50, 100
//! m_list = 200, 500, 1000
//! seed_list = 0,1,2,3,4
//! methods = gd, polyak, nesterov
//! init = random
//! output = out/sweep_random
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use accelwf::solvers::Method;

use crate::error::{io, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Run,
    Sweep,
    HeadToHead,
    Slopes,
    Loo,
    Oracle,
    Cdp,
    Concentration,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Run,
        Experiment::Sweep,
        Experiment::HeadToHead,
        Experiment::Slopes,
        Experiment::Loo,
        Experiment::Oracle,
        Experiment::Cdp,
        Experiment::Concentration,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Run => "run",
            Experiment::Sweep => "sweep",
            Experiment::HeadToHead => "headtohead",
            Experiment::Slopes => "slopes",
            Experiment::Loo => "loo",
            Experiment::Oracle => "oracle",
            Experiment::Cdp => "cdp",
            Experiment::Concentration => "concentration",
        }
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitMode {
    Spectral,
    Random,
}

impl InitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InitMode::Spectral => "spectral",
            InitMode::Random => "random",
        }
    }
}

impl FromStr for InitMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(InitMode::Spectral),
            "random" => Ok(InitMode::Random),
            _ => Err(HarnessError::Config(format!("unknown init mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n_list: Vec<usize>,
    /// Empty means `m = round(10 n log n)` for each `n`.
    pub m_list: Vec<usize>,
    pub seed_list: Vec<u64>,
    pub methods: Vec<Method>,
    pub init: InitMode,
    pub eta: Option<f64>,
    pub beta: Option<f64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub output: Option<PathBuf>,
    /// Quadratic oracle curvatures.
    pub mu: f64,
    pub smoothness: f64,
    pub steps: usize,
    /// Coded diffraction: mask count, iterations and optional input image.
    pub masks: usize,
    pub iters: usize,
    pub image: Option<PathBuf>,
}

const KEYS: [&str; 17] = [
    "experiment",
    "n_list",
    "m_list",
    "seed_list",
    "methods",
    "init",
    "eta",
    "beta",
    "tol",
    "max_iters",
    "output",
    "mu",
    "smoothness",
    "steps",
    "masks",
    "iters",
    "image",
];

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            n_list: vec![100],
            m_list: Vec::new(),
            seed_list: vec![0],
            methods: Method::ALL.to_vec(),
            init: InitMode::Spectral,
            eta: None,
            beta: None,
            tol: None,
            max_iters: None,
            output: None,
            mu: 1.0,
            smoothness: 100.0,
            steps: 10_000,
            masks: 12,
            iters: 140,
            image: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut experiment = None;
        let mut settings = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().replace('-', "_");
            if key == "experiment" {
                experiment = Some(value.trim().parse()?);
            } else {
                settings.push((key, value.trim().to_string()));
            }
        }
        let experiment =
            experiment.ok_or_else(|| HarnessError::Config("missing 'experiment' key".into()))?;
        let mut cfg = Self::new(experiment);
        for (k, v) in settings {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        Self::parse(&text)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let bad = |what: &str| HarnessError::Config(format!("{key}: invalid {what} '{value}'"));
        match key.as_str() {
            "experiment" => self.experiment = value.parse()?,
            "n_list" => self.n_list = list(value).map_err(|_| bad("list"))?,
            "m_list" => self.m_list = list(value).map_err(|_| bad("list"))?,
            "seed_list" => self.seed_list = list(value).map_err(|_| bad("list"))?,
            "methods" => self.methods = list(value).map_err(|_| bad("method list"))?,
            "init" => self.init = value.parse()?,
            "eta" => self.eta = Some(value.parse().map_err(|_| bad("number"))?),
            "beta" => self.beta = Some(value.parse().map_err(|_| bad("number"))?),
            "tol" => self.tol = Some(value.parse().map_err(|_| bad("number"))?),
            "max_iters" => self.max_iters = Some(value.parse().map_err(|_| bad("count"))?),
            "output" => self.output = Some(PathBuf::from(value)),
            "mu" => self.mu = value.parse().map_err(|_| bad("number"))?,
            "smoothness" => self.smoothness = value.parse().map_err(|_| bad("number"))?,
            "steps" => self.steps = value.parse().map_err(|_| bad("count"))?,
            "masks" => self.masks = value.parse().map_err(|_| bad("count"))?,
            "iters" => self.iters = value.parse().map_err(|_| bad("count"))?,
            "image" => self.image = Some(PathBuf::from(value)),
            _ => {
                return Err(HarnessError::Config(format!(
                    "unknown key '{key}' (known: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str| Err(HarnessError::Config(format!("{name} must not be empty")));
        if self.n_list.is_empty() {
            return empty("n_list");
        }
        if self.seed_list.is_empty() {
            return empty("seed_list");
        }
        if self.methods.is_empty() {
            return empty("methods");
        }
        if !self.m_list.is_empty()
            && self.m_list.len() != 1
            && self.experiment == Experiment::Slopes
            && self.m_list.len() != self.n_list.len()
        {
            return Err(HarnessError::Config(
                "m_list must have one entry or one per n".into(),
            ));
        }
        Ok(())
    }

    /// `m` for the `index`-th entry of `n_list`: the paired `m_list` entry,
    /// the single `m_list` entry, or `round(10 n log n)`.
    pub fn m_for(&self, index: usize) -> usize {
        match self.m_list.len() {
            0 => theory_m(self.n_list[index]),
            1 => self.m_list[0],
            _ => self.m_list[index.min(self.m_list.len() - 1)],
        }
    }

    pub fn output_or(&self, default: &str) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from(default))
    }
}

/// `round(10 · n · log n)`.
pub fn theory_m(n: usize) -> usize {
    (10.0 * n as f64 * (n as f64).ln()).round() as usize
}

fn list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, ()> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| ()))
        .collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Canonical form: every key in a fixed order, unset options omitted.
impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "experiment = {}", self.experiment.as_str())?;
        writeln!(f, "n_list = {}", join(&self.n_list))?;
        if !self.m_list.is_empty() {
            writeln!(f, "m_list = {}", join(&self.m_list))?;
        }
        writeln!(f, "seed_list = {}", join(&self.seed_list))?;
        writeln!(f, "methods = {}", join(&self.methods))?;
        writeln!(f, "init = {}", self.init.as_str())?;
        if let Some(v) = self.eta {
            writeln!(f, "eta = {v:?}")?;
        }
        if let Some(v) = self.beta {
            writeln!(f, "beta = {v:?}")?;
        }
        if let Some(v) = self.tol {
            writeln!(f, "tol = {v:?}")?;
        }
        if let Some(v) = self.max_iters {
            writeln!(f, "max_iters = {v}")?;
        }
        if let Some(p) = &self.output {
            writeln!(f, "output = {}", p.display())?;
        }
        writeln!(f, "mu = {:?}", self.mu)?;
        writeln!(f, "smoothness = {:?}", self.smoothness)?;
        writeln!(f, "steps = {}", self.steps)?;
        writeln!(f, "masks = {}", self.masks)?;
        writeln!(f, "iters = {}", self.iters)?;
        if let Some(p) = &self.image {
            writeln!(f, "image = {}", p.display())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_comments_and_dashes() {
        let cfg = ExperimentConfig::parse(
            "# grid\nexperiment = sweep\nn-list = 10, 50 ,100\nm_list=200,500\nseed_list = 3\nmethods = gd,hb\ninit = random # unit sphere\ntol = 1e-6\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::Sweep);
        assert_eq!(cfg.n_list, vec![10, 50, 100]);
        assert_eq!(cfg.m_list, vec![200, 500]);
        assert_eq!(cfg.seed_list, vec![3]);
        assert_eq!(cfg.methods, vec![Method::GradientDescent, Method::Polyak]);
        assert_eq!(cfg.init, InitMode::Random);
        assert_eq!(cfg.tol, Some(1e-6));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("n_list = 1").is_err());
        assert!(ExperimentConfig::parse("experiment = fly").is_err());
        assert!(ExperimentConfig::parse("experiment = run\ncolour = red").is_err());
        assert!(ExperimentConfig::parse("experiment = run\nn_list = a,b").is_err());
        assert!(ExperimentConfig::parse("experiment = run\njust words").is_err());
        let mut cfg = ExperimentConfig::parse("experiment = run\nn_list =").unwrap();
        assert!(cfg.validate().is_err());
        cfg.n_list = vec![4];
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn theory_sample_sizes() {
        assert_eq!(theory_m(64), 2662);
        assert_eq!(theory_m(16), 444);
        let cfg = ExperimentConfig::parse("experiment = slopes\nn_list = 16,64").unwrap();
        assert_eq!((cfg.m_for(0), cfg.m_for(1)), (444, 2662));
    }
}
