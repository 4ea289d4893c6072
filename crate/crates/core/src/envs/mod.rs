//! Desk-scale environments for the risk experiments.

mod bandit;
mod battle;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

pub use bandit::{DiscreteDistribution, VarianceBandit};
pub use battle::{BattleAction, BattlePreset, RewardWeights, TeamBattleEnv, TraceRecord, Unit, UnitSpec};

use crate::agent::StateKey;
use crate::error::{Error, Result};

/// Per-step behavioral metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepMetrics {
    /// Hit points removed from enemies this step.
    pub damage_dealt: f64,
    /// Sum of agent displacements this step.
    pub travel_distance: f64,
    /// Return accumulated so far in the episode, including this step.
    pub episode_return: f64,
    /// Set on the step that wins the episode.
    pub win: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub metrics: StepMetrics,
    /// The episode ended by reaching an absorbing state.
    pub terminal: bool,
    /// The episode was cut off by its step limit.
    pub truncated: bool,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// Cooperative multi-agent environment with discrete actions and
/// tabular observations.
pub trait Environment {
    fn n_agents(&self) -> usize;

    fn n_actions(&self) -> usize;

    /// Deterministic reset: the initial layout depends only on `seed`.
    fn reset(&mut self, seed: u64) -> Vec<StateKey>;

    fn observe(&self, agent: usize) -> StateKey;

    fn observe_all(&self) -> Vec<StateKey> {
        (0..self.n_agents()).map(|i| self.observe(i)).collect()
    }

    /// Never empty.
    fn legal_actions(&self, agent: usize) -> Vec<usize>;

    /// Whether the agent still takes part (a dead unit does not).
    fn is_active(&self, _agent: usize) -> bool {
        true
    }

    fn step<R: Rng + ?Sized>(&mut self, joint_action: &[usize], rng: &mut R) -> Result<StepOutcome>;
}

/// Named environment presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvPreset {
    Bandit,
    FocusFire,
    Kiting,
}

impl EnvPreset {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvPreset::Bandit => "bandit",
            EnvPreset::FocusFire => "focusfire",
            EnvPreset::Kiting => "kiting",
        }
    }

    pub fn build(self) -> EnvInstance {
        match self {
            EnvPreset::Bandit => EnvInstance::Bandit(VarianceBandit::default()),
            EnvPreset::FocusFire => EnvInstance::Battle(TeamBattleEnv::new(BattlePreset::focusfire())),
            EnvPreset::Kiting => EnvInstance::Battle(TeamBattleEnv::new(BattlePreset::kiting())),
        }
    }
}

impl fmt::Display for EnvPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bandit" => Ok(EnvPreset::Bandit),
            "focusfire" => Ok(EnvPreset::FocusFire),
            "kiting" => Ok(EnvPreset::Kiting),
            other => Err(Error::Config(format!("unknown env preset `{other}`"))),
        }
    }
}

/// Static dispatch over the available environments.
#[derive(Debug, Clone)]
pub enum EnvInstance {
    Bandit(VarianceBandit),
    Battle(TeamBattleEnv),
}

impl Environment for EnvInstance {
    fn n_agents(&self) -> usize {
        match self {
            EnvInstance::Bandit(e) => e.n_agents(),
            EnvInstance::Battle(e) => e.n_agents(),
        }
    }

    fn n_actions(&self) -> usize {
        match self {
            EnvInstance::Bandit(e) => e.n_actions(),
            EnvInstance::Battle(e) => e.n_actions(),
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<StateKey> {
        match self {
            EnvInstance::Bandit(e) => e.reset(seed),
            EnvInstance::Battle(e) => e.reset(seed),
        }
    }

    fn observe(&self, agent: usize) -> StateKey {
        match self {
            EnvInstance::Bandit(e) => e.observe(agent),
            EnvInstance::Battle(e) => e.observe(agent),
        }
    }

    fn legal_actions(&self, agent: usize) -> Vec<usize> {
        match self {
            EnvInstance::Bandit(e) => e.legal_actions(agent),
            EnvInstance::Battle(e) => e.legal_actions(agent),
        }
    }

    fn is_active(&self, agent: usize) -> bool {
        match self {
            EnvInstance::Bandit(e) => e.is_active(agent),
            EnvInstance::Battle(e) => e.is_active(agent),
        }
    }

    fn step<R: Rng + ?Sized>(&mut self, joint_action: &[usize], rng: &mut R) -> Result<StepOutcome> {
        match self {
            EnvInstance::Bandit(e) => e.step(joint_action, rng),
            EnvInstance::Battle(e) => e.step(joint_action, rng),
        }
    }
}
