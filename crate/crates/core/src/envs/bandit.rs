use rand::Rng;

use super::{Environment, StepMetrics, StepOutcome};
use crate::agent::StateKey;
use crate::dist::{midpoint_fractions, QuantileDistribution};
use crate::error::{Error, Result};

/// Finite distribution over real outcomes, stored sorted by value.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    outcomes: Vec<(f64, f64)>,
}

impl DiscreteDistribution {
    /// `outcomes` are `(value, probability)` pairs; probabilities must be
    /// non-negative and sum to one.
    pub fn new(mut outcomes: Vec<(f64, f64)>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::InvalidEnv("arm has no outcomes".into()));
        }
        if outcomes
            .iter()
            .any(|&(v, p)| !v.is_finite() || !(0.0..=1.0).contains(&p))
        {
            return Err(Error::InvalidEnv("arm outcome not finite or probability outside [0, 1]".into()));
        }
        let total: f64 = outcomes.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidEnv(format!("arm probabilities sum to {total}")));
        }
        outcomes.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { outcomes })
    }

    pub fn outcomes(&self) -> &[(f64, f64)] {
        &self.outcomes
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().map(|&(v, p)| v * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.outcomes.iter().map(|&(v, p)| p * (v - m).powi(2)).sum()
    }

    /// `inf { y : τ <= F(y) }`.
    pub fn quantile(&self, tau: f64) -> f64 {
        let mut cdf = 0.0;
        for &(v, p) in &self.outcomes {
            cdf += p;
            if tau <= cdf + 1e-12 {
                return v;
            }
        }
        self.outcomes.last().expect("non-empty").0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let mut cdf = 0.0;
        for &(v, p) in &self.outcomes {
            cdf += p;
            if u < cdf {
                return v;
            }
        }
        self.outcomes.last().expect("non-empty").0
    }
}

/// Single-state, single-step bandit whose arms differ in reward variance.
///
/// The default instance has a safe arm paying 0.5 surely and a risky arm
/// paying 0 or 1 with equal probability.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceBandit {
    arms: Vec<DiscreteDistribution>,
    episode_return: f64,
}

impl VarianceBandit {
    pub const SAFE_ARM: usize = 0;
    pub const RISKY_ARM: usize = 1;

    pub fn new(arms: Vec<DiscreteDistribution>) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::InvalidEnv("bandit needs at least one arm".into()));
        }
        Ok(Self {
            arms,
            episode_return: 0.0,
        })
    }

    pub fn arms(&self) -> &[DiscreteDistribution] {
        &self.arms
    }

    /// Pulls `arm`; every pull ends the episode.
    pub fn bandit_step<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<(f64, bool)> {
        let dist = self.arms.get(arm).ok_or(Error::InvalidAction {
            action: arm,
            n_actions: self.arms.len(),
        })?;
        Ok((dist.sample(rng), true))
    }

    /// Exact quantile representation of an arm at the `n` midpoint fractions.
    pub fn true_quantiles(&self, arm: usize, n: usize) -> Result<QuantileDistribution<f64>> {
        let dist = self.arms.get(arm).ok_or(Error::InvalidAction {
            action: arm,
            n_actions: self.arms.len(),
        })?;
        QuantileDistribution::new(midpoint_fractions::<f64>(n).into_iter().map(|t| dist.quantile(t)).collect())
    }
}

impl Default for VarianceBandit {
    fn default() -> Self {
        Self::new(vec![
            DiscreteDistribution::new(vec![(0.5, 1.0)]).unwrap(),
            DiscreteDistribution::new(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap(),
        ])
        .unwrap()
    }
}

impl Environment for VarianceBandit {
    fn n_agents(&self) -> usize {
        1
    }

    fn n_actions(&self) -> usize {
        self.arms.len()
    }

    fn reset(&mut self, _seed: u64) -> Vec<StateKey> {
        self.episode_return = 0.0;
        vec![StateKey::default()]
    }

    fn observe(&self, _agent: usize) -> StateKey {
        StateKey::default()
    }

    fn legal_actions(&self, _agent: usize) -> Vec<usize> {
        (0..self.arms.len()).collect()
    }

    /// A pull counts as a win when it pays a strictly positive reward.
    fn step<R: Rng + ?Sized>(&mut self, joint_action: &[usize], rng: &mut R) -> Result<StepOutcome> {
        let &[arm] = joint_action else {
            return Err(Error::InvalidEnv(format!(
                "bandit takes one action, got {}",
                joint_action.len()
            )));
        };
        let (reward, terminal) = self.bandit_step(arm, rng)?;
        self.episode_return += reward;
        Ok(StepOutcome {
            reward,
            metrics: StepMetrics {
                damage_dealt: 0.0,
                travel_distance: 0.0,
                episode_return: self.episode_return,
                win: reward > 0.0,
            },
            terminal,
            truncated: false,
        })
    }
}
