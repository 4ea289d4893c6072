//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; see [`ExperimentConfig::KEYS`] for the full list.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::agent::LearnerConfig;
use crate::envs::EnvPreset;
use crate::error::{Error, Result};
use crate::risk::{EpsilonSchedule, RiskLevel, RiskSchedule, DEFAULT_SCHEDULE_STEPS};

/// Static and scheduled risk policies compared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RiskMode {
    StaticAverse,
    StaticNeutral,
    StaticSeeking,
    SchedAverse,
    SchedNeutral,
}

impl RiskMode {
    pub const ALL: [RiskMode; 5] = [
        RiskMode::StaticAverse,
        RiskMode::StaticNeutral,
        RiskMode::StaticSeeking,
        RiskMode::SchedAverse,
        RiskMode::SchedNeutral,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RiskMode::StaticAverse => "static-averse",
            RiskMode::StaticNeutral => "static-neutral",
            RiskMode::StaticSeeking => "static-seeking",
            RiskMode::SchedAverse => "sched-averse",
            RiskMode::SchedNeutral => "sched-neutral",
        }
    }

    pub fn target(self) -> RiskLevel {
        match self {
            RiskMode::StaticAverse | RiskMode::SchedAverse => RiskLevel::Averse,
            RiskMode::StaticNeutral | RiskMode::SchedNeutral => RiskLevel::Neutral,
            RiskMode::StaticSeeking => RiskLevel::Seeking,
        }
    }

    pub fn is_scheduled(self) -> bool {
        matches!(self, RiskMode::SchedAverse | RiskMode::SchedNeutral)
    }
}

impl fmt::Display for RiskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RiskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RiskMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown risk mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvPreset,
    pub risk_mode: RiskMode,
    /// Risk schedule horizon `S`.
    pub schedule_steps: u64,
    /// Fraction of `S` spent decaying `α` when `β` also moves.
    pub phase_split: f64,
    pub epsilon: EpsilonSchedule<f64>,
    pub learner: LearnerConfig<f64>,
    /// Learning rate decays linearly from `learner.lr` to `lr_end` over
    /// `lr_decay_steps`.
    pub lr_end: f64,
    pub lr_decay_steps: u64,
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    /// Write one quantile-table checkpoint per seed next to the CSV.
    pub checkpoints: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let learner = LearnerConfig::default();
        Self {
            env: EnvPreset::Bandit,
            risk_mode: RiskMode::SchedAverse,
            schedule_steps: DEFAULT_SCHEDULE_STEPS,
            phase_split: 0.5,
            epsilon: EpsilonSchedule::default(),
            lr_end: learner.lr,
            lr_decay_steps: 0,
            learner,
            total_steps: 100_000,
            eval_interval: 5_000,
            eval_episodes: 20,
            seeds: (0..5).collect(),
            out_dir: None,
            checkpoints: true,
        }
    }
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 21] = [
        "env",
        "risk_mode",
        "schedule_steps",
        "phase_split",
        "eps_start",
        "eps_end",
        "eps_steps",
        "gamma",
        "lr",
        "lr_end",
        "lr_decay_steps",
        "quantiles",
        "kappa",
        "initial_value",
        "bootstrap",
        "total_steps",
        "eval_interval",
        "eval_episodes",
        "seeds",
        "out",
        "checkpoints",
    ];

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Sets one key; used by the file parser and by command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            value
                .parse()
                .map_err(|e| Error::Config(format!("{key}: cannot parse `{value}`: {e}")))
        }
        let eps = self.epsilon;
        match key {
            "env" => self.env = value.parse()?,
            "risk_mode" => self.risk_mode = value.parse()?,
            "schedule_steps" => self.schedule_steps = num(key, value)?,
            "phase_split" => self.phase_split = num(key, value)?,
            "eps_start" => {
                self.epsilon = EpsilonSchedule::new(num(key, value)?, eps.eps_end(), eps.eps_steps())?
            }
            "eps_end" => {
                self.epsilon = EpsilonSchedule::new(eps.eps_start(), num(key, value)?, eps.eps_steps())?
            }
            "eps_steps" => {
                self.epsilon = EpsilonSchedule::new(eps.eps_start(), eps.eps_end(), num(key, value)?)?
            }
            "gamma" => self.learner.gamma = num(key, value)?,
            "lr" => self.learner.lr = num(key, value)?,
            "lr_end" => self.lr_end = num(key, value)?,
            "lr_decay_steps" => self.lr_decay_steps = num(key, value)?,
            "quantiles" => self.learner.quantiles = num(key, value)?,
            "kappa" => self.learner.kappa = num(key, value)?,
            "initial_value" => self.learner.initial_value = num(key, value)?,
            "bootstrap" => self.learner.bootstrap = value.parse()?,
            "total_steps" => self.total_steps = num(key, value)?,
            "eval_interval" => self.eval_interval = num(key, value)?,
            "eval_episodes" => self.eval_episodes = num(key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "out" => self.out_dir = Some(PathBuf::from(value)),
            "checkpoints" => self.checkpoints = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        self.learner.validate()?;
        self.risk_schedule()?;
        if !(self.lr_end >= 0.0 && self.lr_end.is_finite()) {
            return bad("lr_end must be finite and >= 0");
        }
        if self.total_steps == 0 {
            return bad("total_steps must be positive");
        }
        if self.eval_interval == 0 || self.eval_interval > self.total_steps {
            return bad("eval_interval must lie in [1, total_steps]");
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive");
        }
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty");
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return bad("seeds must be distinct");
        }
        Ok(())
    }

    pub fn risk_schedule(&self) -> Result<RiskSchedule<f64>> {
        if self.risk_mode.is_scheduled() {
            RiskSchedule::scheduled_with_split(self.risk_mode.target(), self.schedule_steps, self.phase_split)
        } else {
            Ok(RiskSchedule::fixed(self.risk_mode.target()))
        }
    }

    /// `key = value` lines that reproduce this config.
    pub fn to_kv_string(&self) -> String {
        let seeds = self
            .seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(",");
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("env", self.env.to_string());
        put("risk_mode", self.risk_mode.to_string());
        put("schedule_steps", self.schedule_steps.to_string());
        put("phase_split", self.phase_split.to_string());
        put("eps_start", self.epsilon.eps_start().to_string());
        put("eps_end", self.epsilon.eps_end().to_string());
        put("eps_steps", self.epsilon.eps_steps().to_string());
        put("gamma", self.learner.gamma.to_string());
        put("lr", self.learner.lr.to_string());
        put("lr_end", self.lr_end.to_string());
        put("lr_decay_steps", self.lr_decay_steps.to_string());
        put("quantiles", self.learner.quantiles.to_string());
        put("kappa", self.learner.kappa.to_string());
        put("initial_value", self.learner.initial_value.to_string());
        put("bootstrap", self.learner.bootstrap.to_string());
        put("total_steps", self.total_steps.to_string());
        put("eval_interval", self.eval_interval.to_string());
        put("eval_episodes", self.eval_episodes.to_string());
        put("seeds", seeds);
        if let Some(out) = &self.out_dir {
            put("out", out.display().to_string());
        }
        put("checkpoints", self.checkpoints.to_string());
        s
    }
}

/// `0,3,7` or a half-open range `0..10`.
fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let err = || Error::Config(format!("seeds: cannot parse `{value}`"));
    if let Some((a, b)) = value.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| err())?;
        let b: u64 = b.trim().parse().map_err(|_| err())?;
        return Ok((a..b).collect());
    }
    value
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| err()))
        .collect()
}
