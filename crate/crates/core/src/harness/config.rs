use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::constraints::{ConvexSet, ProxParams};
use crate::error::{Error, Result};
use crate::samplers::{CentralSampler, GuardMode, NoiseMode, SamplerConfig};
use crate::topology::GraphKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Sample1d,
    Blr2d,
    Logreg,
    ValidateNetwork,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sample1d => "sample-1d",
            Experiment::Blr2d => "blr",
            Experiment::Logreg => "logreg",
            Experiment::ValidateNetwork => "validate-network",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    Box,
    L2,
    L1,
}

impl FromStr for SetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(SetKind::Box),
            "l2" | "l2-ball" => Ok(SetKind::L2),
            "l1" | "l1-ball" => Ok(SetKind::L1),
            other => Err(Error::InvalidConfig(format!(
                "unknown set '{other}' (expected box|l2|l1)"
            ))),
        }
    }
}

impl fmt::Display for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetKind::Box => "box",
            SetKind::L2 => "l2",
            SetKind::L1 => "l1",
        })
    }
}

/// `--sampler`: the centralized comparator arm, or `depsgld` for none.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparatorKind {
    None,
    Psgld,
    Pla,
    ProjectedLmc,
    Sgld,
}

impl ComparatorKind {
    pub fn sampler(self, n_agents: usize) -> Option<CentralSampler> {
        match self {
            ComparatorKind::None => None,
            ComparatorKind::Psgld => Some(CentralSampler::Psgld),
            ComparatorKind::Pla => Some(CentralSampler::Pla { n_agents }),
            ComparatorKind::ProjectedLmc => Some(CentralSampler::ProjectedLmc),
            ComparatorKind::Sgld => Some(CentralSampler::Sgld),
        }
    }
}

impl FromStr for ComparatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depsgld" | "none" => Ok(ComparatorKind::None),
            "psgld" => Ok(ComparatorKind::Psgld),
            "pla" => Ok(ComparatorKind::Pla),
            "plmc" | "projected-lmc" => Ok(ComparatorKind::ProjectedLmc),
            "sgld" => Ok(ComparatorKind::Sgld),
            other => Err(Error::InvalidConfig(format!(
                "unknown sampler '{other}' (expected depsgld|psgld|pla|plmc|sgld)"
            ))),
        }
    }
}

impl fmt::Display for ComparatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComparatorKind::None => "depsgld",
            ComparatorKind::Psgld => "psgld",
            ComparatorKind::Pla => "pla",
            ComparatorKind::ProjectedLmc => "plmc",
            ComparatorKind::Sgld => "sgld",
        })
    }
}

/// Fully resolved settings of one experiment command.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// `None` runs all four topologies in order.
    pub topology: Option<GraphKind>,
    pub n_agents: usize,
    pub delta: Option<f64>,
    pub sampler: SamplerConfig,
    pub comparator: ComparatorKind,
    pub guard: GuardMode,
    pub set: SetKind,
    /// `None` derives the radius from the data (`0.8 ‖β̂‖`).
    pub radius: Option<f64>,
    pub bounds: (f64, f64),
    pub n_samples: usize,
    pub data: PathBuf,
    pub standardize: bool,
    /// `None` uses half the iterations.
    pub burnin: Option<usize>,
    pub thin: usize,
    pub predictive: bool,
    pub test_frac: Option<f64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub mu: Option<f64>,
    pub l_smooth: Option<f64>,
}

const KEYS: &[&str] = &[
    "topology",
    "agents",
    "delta",
    "set",
    "radius",
    "bounds",
    "gamma",
    "eta",
    "iters",
    "chains",
    "batch",
    "seed",
    "record-every",
    "sampler",
    "init",
    "stepsize-guard",
    "n-samples",
    "data",
    "standardize",
    "burnin",
    "thin",
    "predictive",
    "test-frac",
    "out",
    "threads",
    "mu",
    "lsmooth",
];

fn bad(key: &str, value: &str, expected: &str) -> Error {
    Error::InvalidConfig(format!("{key}: cannot parse '{value}' as {expected}"))
}

fn parse_num<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, expected))
}

fn parse_auto<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<Option<T>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_num(key, value, expected).map(Some)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, value, "a boolean")),
    }
}

fn show<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref()
        .map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            topology: None,
            n_agents: 30,
            delta: None,
            sampler: SamplerConfig::default(),
            comparator: ComparatorKind::Psgld,
            guard: GuardMode::Strict,
            set: SetKind::Box,
            radius: None,
            bounds: (-1.0, 1.0),
            n_samples: 10_000,
            data: PathBuf::from("data/wdbc.data"),
            standardize: true,
            burnin: None,
            thin: 10,
            predictive: false,
            test_frac: None,
            out: None,
            threads: None,
            mu: None,
            l_smooth: None,
        };
        match experiment {
            Experiment::Sample1d | Experiment::ValidateNetwork => base,
            Experiment::Blr2d => Self {
                n_agents: 20,
                set: SetKind::L2,
                sampler: SamplerConfig {
                    eta: 5e-4,
                    gamma: 5e-5,
                    iterations: 500,
                    batch: 100,
                    n_chains: 300,
                    ..SamplerConfig::default()
                },
                ..base
            },
            Experiment::Logreg => Self {
                n_agents: 5,
                set: SetKind::L2,
                sampler: SamplerConfig {
                    eta: 0.005,
                    gamma: 0.16,
                    iterations: 1000,
                    batch: 10,
                    n_chains: 1000,
                    ..SamplerConfig::default()
                },
                ..base
            },
        }
    }

    /// Defaults, then `key=value` lines from `file`, then `overrides`.
    pub fn resolve(
        experiment: Experiment,
        file: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut cfg = Self::defaults(experiment);
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (key, value) in parse_kv(&text, path)? {
                cfg.set(&key, &value)?;
            }
        }
        for (key, value) in overrides {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let s = &mut self.sampler;
        match key.as_str() {
            "topology" => {
                self.topology = match value {
                    "all" => None,
                    v => Some(
                        v.parse()
                            .map_err(|e: Error| Error::InvalidConfig(e.to_string()))?,
                    ),
                }
            }
            "agents" => self.n_agents = parse_num(&key, value, "an agent count")?,
            "delta" => self.delta = parse_auto(&key, value, "a number")?,
            "set" => self.set = value.parse()?,
            "radius" => self.radius = parse_auto(&key, value, "a number")?,
            "bounds" => {
                let (lo, hi) = value
                    .split_once(',')
                    .ok_or_else(|| bad(&key, value, "'lower,upper'"))?;
                self.bounds = (
                    parse_num(&key, lo.trim(), "'lower,upper'")?,
                    parse_num(&key, hi.trim(), "'lower,upper'")?,
                );
            }
            "gamma" => s.gamma = parse_num(&key, value, "a number")?,
            "eta" => s.eta = parse_num(&key, value, "a number")?,
            "iters" => s.iterations = parse_num(&key, value, "an iteration count")?,
            "chains" => s.n_chains = parse_num(&key, value, "a chain count")?,
            "batch" => s.batch = parse_num(&key, value, "a batch size")?,
            "seed" => s.seed = parse_num(&key, value, "an unsigned integer")?,
            "record-every" => s.record_every = parse_num(&key, value, "a positive integer")?,
            "init" => {
                s.init = value
                    .parse()
                    .map_err(|e: Error| Error::InvalidConfig(e.to_string()))?
            }
            "sampler" => self.comparator = value.parse()?,
            "stepsize-guard" => {
                self.guard = value
                    .parse()
                    .map_err(|e: Error| Error::InvalidConfig(e.to_string()))?
            }
            "n-samples" => self.n_samples = parse_num(&key, value, "a sample count")?,
            "data" => self.data = PathBuf::from(value),
            "standardize" => self.standardize = parse_bool(&key, value)?,
            "burnin" => self.burnin = parse_auto(&key, value, "an iteration count")?,
            "thin" => self.thin = parse_num(&key, value, "a positive integer")?,
            "predictive" => self.predictive = parse_bool(&key, value)?,
            "test-frac" => self.test_frac = parse_auto(&key, value, "a fraction")?,
            "out" => self.out = (value != "none").then(|| PathBuf::from(value)),
            "threads" => self.threads = parse_auto(&key, value, "a thread count")?,
            "mu" => self.mu = parse_auto(&key, value, "a number")?,
            "lsmooth" => self.l_smooth = parse_auto(&key, value, "a number")?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown configuration key '{other}'"
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| match e {
            Error::InvalidArgument(m) => Error::InvalidConfig(m),
            other => other,
        };
        self.sampler.validate().map_err(cfg_err)?;
        ProxParams::new(self.sampler.gamma).map_err(cfg_err)?;
        if self.n_agents == 0 {
            return Err(Error::InvalidConfig("agents must be at least 1".into()));
        }
        for kind in self.topologies() {
            if self.n_agents < kind.min_agents() {
                return Err(Error::InvalidConfig(format!(
                    "{kind} topology needs at least {} agents, got {}",
                    kind.min_agents(),
                    self.n_agents
                )));
            }
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "radius must be positive, got {r}"
                )));
            }
        }
        if !(self.bounds.1 > self.bounds.0) {
            return Err(Error::InvalidConfig(format!(
                "bounds must satisfy lower < upper, got {},{}",
                self.bounds.0, self.bounds.1
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be positive".into()));
        }
        if let Some(b) = self.burnin {
            if b > self.sampler.iterations {
                return Err(Error::InvalidConfig(format!(
                    "burnin {b} exceeds the {} iterations",
                    self.sampler.iterations
                )));
            }
        }
        if let Some(f) = self.test_frac {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "test-frac must lie in (0, 1), got {f}"
                )));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be positive".into()));
        }
        if self.experiment == Experiment::Sample1d && self.n_samples == 0 {
            return Err(Error::InvalidConfig("n-samples must be positive".into()));
        }
        if self.sampler.noise != NoiseMode::Gaussian {
            return Err(Error::InvalidConfig(
                "experiments always use Gaussian noise".into(),
            ));
        }
        Ok(())
    }

    pub fn topologies(&self) -> Vec<GraphKind> {
        match self.topology {
            Some(k) => vec![k],
            None => GraphKind::ALL.to_vec(),
        }
    }

    pub fn burnin(&self) -> usize {
        self.burnin.unwrap_or(self.sampler.iterations / 2)
    }

    /// Constraint set of dimension `dim`; `auto_radius` fills in when no
    /// radius was configured.
    pub fn constraint_set(&self, dim: usize, auto_radius: Option<f64>) -> Result<ConvexSet> {
        let radius = || {
            self.radius
                .or(auto_radius)
                .ok_or_else(|| Error::InvalidConfig(format!("the {} set needs a radius", self.set)))
        };
        match self.set {
            SetKind::Box => {
                ConvexSet::interval_box(vec![self.bounds.0; dim], vec![self.bounds.1; dim])
            }
            SetKind::L2 => ConvexSet::l2_ball(dim, radius()?),
            SetKind::L1 => ConvexSet::l1_ball(dim, radius()?),
        }
    }

    /// Resolved settings as `key = value` lines, readable by [`Self::resolve`].
    pub fn echo(&self) -> String {
        let s = &self.sampler;
        let mut out = String::new();
        let _ = writeln!(out, "# experiment = {}", self.experiment);
        let values: Vec<String> = vec![
            self.topology
                .map_or_else(|| "all".into(), |k| k.to_string()),
            self.n_agents.to_string(),
            show(&self.delta),
            self.set.to_string(),
            show(&self.radius),
            format!("{},{}", self.bounds.0, self.bounds.1),
            s.gamma.to_string(),
            s.eta.to_string(),
            s.iterations.to_string(),
            s.n_chains.to_string(),
            s.batch.to_string(),
            s.seed.to_string(),
            s.record_every.to_string(),
            self.comparator.to_string(),
            s.init.to_string(),
            self.guard.to_string(),
            self.n_samples.to_string(),
            self.data.display().to_string(),
            self.standardize.to_string(),
            show(&self.burnin),
            self.thin.to_string(),
            self.predictive.to_string(),
            show(&self.test_frac),
            self.out
                .as_ref()
                .map_or_else(|| "none".into(), |p| p.display().to_string()),
            show(&self.threads),
            show(&self.mu),
            show(&self.l_smooth),
        ];
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: format!("expected key = value, got '{line}'"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
