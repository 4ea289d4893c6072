//! Joint return distributions for cooperative agents via mean-shape
//! decomposition, and an enumeration check of the individual-global-max
//! (IGM) property.
//!
//! The joint distribution is split into a mean part, mixed from per-agent
//! expectations by `ψ`, and a zero-mean shape part, mixed from per-agent
//! centered quantiles by `Φ`:
//!
//! ```text
//! Z_joint = ψ(E[Z_1], ..., E[Z_M]) + Φ(Z_1 - E[Z_1], ..., Z_M - E[Z_M])
//! ```
//!
//! Here `ψ` is the sum and `Φ` sums centered quantiles index by index
//! (comonotonic sum), so `E[Z_joint] = Σ E[Z_i]` and IGM holds.

use crate::agent::{LearnerConfig, QuantileTable, StateKey};
use crate::dist::QuantileDistribution;
use crate::error::{Error, Result};
use crate::risk::{argmax_legal, RiskInterval};
use crate::scalar::Scalar;

/// Default cap on the number of joint actions [`igm_check`] enumerates.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Mixer for the mean part of the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanMixer {
    #[default]
    Additive,
}

impl MeanMixer {
    fn mix<T: Scalar>(self, means: &[T]) -> T {
        match self {
            MeanMixer::Additive => means.iter().fold(T::zero(), |acc, &m| acc + m),
        }
    }
}

/// Per-agent distributions at the agents' chosen actions.
#[derive(Debug, Clone, PartialEq)]
pub struct JointFactorization<T> {
    pub agent_dists: Vec<QuantileDistribution<T>>,
    pub psi: MeanMixer,
}

impl<T: Scalar> JointFactorization<T> {
    pub fn new(agent_dists: Vec<QuantileDistribution<T>>) -> Result<Self> {
        let first = agent_dists.first().ok_or(Error::EmptyDistribution)?.len();
        if let Some(bad) = agent_dists.iter().find(|d| d.len() != first) {
            return Err(Error::QuantileCountMismatch {
                left: first,
                right: bad.len(),
            });
        }
        Ok(Self {
            agent_dists,
            psi: MeanMixer::Additive,
        })
    }

    pub fn mean_shape_compose(&self) -> Result<QuantileDistribution<T>> {
        compose(self.agent_dists.iter(), self.psi)
    }
}

fn compose<'a, T, I>(dists: I, psi: MeanMixer) -> Result<QuantileDistribution<T>>
where
    T: Scalar,
    I: Iterator<Item = &'a QuantileDistribution<T>> + Clone,
{
    let n = dists.clone().next().ok_or(Error::EmptyDistribution)?.len();
    let means: Vec<T> = dists.clone().map(|d| d.expectation()).collect();
    let z_mean = psi.mix(&means);
    let mut shape = vec![T::zero(); n];
    for (d, &mean) in dists.zip(&means) {
        if d.len() != n {
            return Err(Error::QuantileCountMismatch { left: n, right: d.len() });
        }
        for (s, &v) in shape.iter_mut().zip(d.values()) {
            *s = *s + (v - mean);
        }
    }
    QuantileDistribution::from_unsorted(shape.into_iter().map(|s| z_mean + s).collect())
}

/// Composes the joint distribution of `agent_dists` with additive `ψ`.
pub fn mean_shape_compose<T: Scalar>(agent_dists: &[QuantileDistribution<T>]) -> Result<QuantileDistribution<T>> {
    compose(agent_dists.iter(), MeanMixer::Additive)
}

/// Checks that the greedy joint action over the composed joint distribution
/// equals the tuple of per-agent greedy actions.
///
/// `per_agent[i][a]` is agent `i`'s return distribution for action `a`.
pub fn igm_check<T: Scalar>(per_agent: &[Vec<QuantileDistribution<T>>], cap: u128) -> Result<bool> {
    Ok(joint_argmax(per_agent, cap)? == individual_argmax(per_agent)?)
}

/// Per-agent expectation-greedy actions, ties to the lowest index.
pub fn individual_argmax<T: Scalar>(per_agent: &[Vec<QuantileDistribution<T>>]) -> Result<Vec<usize>> {
    per_agent
        .iter()
        .map(|dists| {
            let legal: Vec<usize> = (0..dists.len()).collect();
            argmax_legal(&legal, |a| dists[a].expectation())
        })
        .collect()
}

/// Joint greedy action by exhaustive enumeration; ties go to the
/// lexicographically lowest joint action.
pub fn joint_argmax<T: Scalar>(per_agent: &[Vec<QuantileDistribution<T>>], cap: u128) -> Result<Vec<usize>> {
    if per_agent.is_empty() {
        return Err(Error::NoLegalActions);
    }
    if per_agent.iter().any(Vec::is_empty) {
        return Err(Error::NoLegalActions);
    }
    let size = per_agent
        .iter()
        .try_fold(1u128, |acc, d| acc.checked_mul(d.len() as u128))
        .unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::JointSpaceTooLarge { size, cap });
    }

    let mut joint = vec![0usize; per_agent.len()];
    let mut best: Option<(Vec<usize>, T)> = None;
    loop {
        let value = compose(joint.iter().zip(per_agent).map(|(&a, d)| &d[a]), MeanMixer::Additive)?
            .expectation();
        // Enumeration is lexicographic, so strict improvement keeps the lowest tie.
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((joint.clone(), value));
        }
        // Odometer increment, last agent fastest.
        let mut i = joint.len();
        loop {
            if i == 0 {
                return Ok(best.expect("at least one joint action").0);
            }
            i -= 1;
            joint[i] += 1;
            if joint[i] < per_agent[i].len() {
                break;
            }
            joint[i] = 0;
        }
    }
}

/// One joint step of the agents active in `s` and in `s'`.
///
/// Agents can drop out between the two (a unit dies), so the current and
/// next rosters may differ in length.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTransition<T> {
    /// `(observation, action)` for each active agent at `s`.
    pub current: Vec<(StateKey, usize)>,
    /// `(observation, legal actions)` for each active agent at `s'`.
    pub next: Vec<(StateKey, Vec<usize>)>,
    pub reward: T,
    pub terminal: bool,
}

/// Quantile-regression TD step on the composed joint distribution of
/// agents sharing one table.
///
/// The joint target is `r + γ Z_joint(s', a*)` with each agent's `a*` greedy
/// under `bootstrap`. Under additive composition `∂Z_joint,k / ∂θ_i,k = 1`, so
/// every agent's entry receives the joint gradient. Returns the joint loss.
pub fn joint_qr_update<T: Scalar>(
    table: &mut QuantileTable<T>,
    tr: &JointTransition<T>,
    cfg: &LearnerConfig<T>,
    bootstrap: &RiskInterval<T>,
) -> Result<T> {
    if tr.current.is_empty() {
        return Err(Error::NoLegalActions);
    }
    for &(_, action) in &tr.current {
        if action >= table.n_actions() {
            return Err(Error::InvalidAction {
                action,
                n_actions: table.n_actions(),
            });
        }
    }
    let joint = compose(
        tr.current.iter().map(|(s, a)| table.get(s, *a)),
        MeanMixer::Additive,
    )?;

    let targets: Vec<T> = if tr.terminal {
        vec![tr.reward]
    } else {
        if tr.next.is_empty() {
            return Err(Error::NoLegalActions);
        }
        let next_actions = tr
            .next
            .iter()
            .map(|(s, legal)| table.greedy_action(s, legal, bootstrap))
            .collect::<Result<Vec<_>>>()?;
        let next = compose(
            tr.next
                .iter()
                .zip(&next_actions)
                .map(|((s, _), &a)| table.get(s, a)),
            MeanMixer::Additive,
        )?;
        next.values().iter().map(|&z| tr.reward + cfg.gamma * z).collect()
    };

    let (loss, grad) = joint.quantile_huber_loss(&targets, cfg.kappa)?;

    // Agents sharing an entry accumulate their gradients before one step.
    let mut touched: Vec<(&StateKey, usize, usize)> = Vec::with_capacity(tr.current.len());
    for (state, action) in &tr.current {
        match touched.iter_mut().find(|(k, a, _)| *k == state && a == action) {
            Some(entry) => entry.2 += 1,
            None => touched.push((state, *action, 1)),
        }
    }
    for (state, action, count) in touched {
        let step = cfg.lr * T::from_count(count);
        table.entry_mut(state, action).descend(&grad, step);
    }
    Ok(loss)
}
