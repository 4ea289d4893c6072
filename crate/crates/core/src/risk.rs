//! Risk intervals, risk and epsilon schedules, and risk-conditioned
//! epsilon-greedy action selection.
//!
//! An action is scored by the mean of its return quantile function over a
//! fraction interval `[α, β]`: `[0, 0.25]` is risk-averse, `[0, 1]` is
//! risk-neutral and `[0.75, 1]` is risk-seeking. A [`RiskSchedule`] moves the
//! interval linearly from the seeking level toward a target level, the same
//! way epsilon is annealed in epsilon-greedy exploration.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::dist::QuantileDistribution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default risk schedule horizon, in training steps.
pub const DEFAULT_SCHEDULE_STEPS: u64 = 10_000;

/// Schedule horizons explored by the experiment sweeps.
pub const SCHEDULE_STEP_GRID: [u64; 3] = [10_000, 25_000, 50_000];

/// Sub-interval `[α, β]` of `[0, 1]` from which quantile fractions are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskInterval<T> {
    alpha: T,
    beta: T,
}

impl<T: Scalar> RiskInterval<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        if alpha >= T::zero() && alpha < beta && beta <= T::one() {
            Ok(Self { alpha, beta })
        } else {
            Err(Error::InvalidInterval {
                alpha: alpha.to_f64().unwrap_or(f64::NAN),
                beta: beta.to_f64().unwrap_or(f64::NAN),
            })
        }
    }

    /// `[0, 1]`.
    pub fn full() -> Self {
        Self {
            alpha: T::zero(),
            beta: T::one(),
        }
    }

    #[inline]
    pub fn alpha(&self) -> T {
        self.alpha
    }

    #[inline]
    pub fn beta(&self) -> T {
        self.beta
    }

    #[inline]
    pub fn width(&self) -> T {
        self.beta - self.alpha
    }
}

impl<T: fmt::Display> fmt::Display for RiskInterval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.alpha, self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RiskLevel {
    Averse,
    Neutral,
    /// Experimental: static risk-seeking training is known to perform poorly.
    Seeking,
}

impl RiskLevel {
    pub fn interval<T: Scalar>(self) -> RiskInterval<T> {
        let (a, b) = match self {
            RiskLevel::Averse => (0.0, 0.25),
            RiskLevel::Neutral => (0.0, 1.0),
            RiskLevel::Seeking => (0.75, 1.0),
        };
        RiskInterval {
            alpha: T::lit(a),
            beta: T::lit(b),
        }
    }

    pub fn profile<T: Scalar>(self) -> RiskProfile<T> {
        RiskProfile {
            kind: self,
            interval: self.interval(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RiskLevel::Averse => "averse",
            RiskLevel::Neutral => "neutral",
            RiskLevel::Seeking => "seeking",
        }
    }
}

impl fmt::Display for RiskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RiskLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "averse" => Ok(RiskLevel::Averse),
            "neutral" => Ok(RiskLevel::Neutral),
            "seeking" => Ok(RiskLevel::Seeking),
            other => Err(Error::Config(format!("unknown risk level `{other}`"))),
        }
    }
}

/// A named risk level together with its fraction interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskProfile<T> {
    pub kind: RiskLevel,
    pub interval: RiskInterval<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    Static,
    Scheduled,
}

/// Time-indexed risk interval.
///
/// In scheduled mode the interval starts at the seeking level. `α` decays
/// linearly to the target `α`; once it arrives, `β` decays linearly to the
/// target `β`. When both endpoints move (seeking to averse) the `α` phase
/// takes `phase_split · S` steps and the `β` phase the remainder. After `S`
/// steps the target interval is held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskSchedule<T> {
    start: RiskInterval<T>,
    target: RiskProfile<T>,
    total_steps: u64,
    phase_split: T,
    mode: ScheduleMode,
}

impl<T: Scalar> RiskSchedule<T> {
    /// A schedule that always returns the target interval.
    pub fn fixed(target: RiskLevel) -> Self {
        Self {
            start: target.interval(),
            target: target.profile(),
            total_steps: 0,
            phase_split: T::half(),
            mode: ScheduleMode::Static,
        }
    }

    /// Seeking-to-`target` schedule over `total_steps` with an even phase split.
    pub fn scheduled(target: RiskLevel, total_steps: u64) -> Result<Self> {
        Self::scheduled_with_split(target, total_steps, T::half())
    }

    pub fn scheduled_with_split(target: RiskLevel, total_steps: u64, phase_split: T) -> Result<Self> {
        if total_steps == 0 {
            return Err(Error::InvalidSchedule(
                "scheduled risk needs a positive step count".into(),
            ));
        }
        if !(phase_split > T::zero() && phase_split < T::one()) {
            return Err(Error::InvalidSchedule(format!(
                "phase split must lie in (0, 1), got {phase_split}"
            )));
        }
        Ok(Self {
            start: RiskLevel::Seeking.interval(),
            target: target.profile(),
            total_steps,
            phase_split,
            mode: ScheduleMode::Scheduled,
        })
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn target(&self) -> RiskProfile<T> {
        self.target
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn interval_at_step(&self, t: u64) -> RiskInterval<T> {
        let target = self.target.interval;
        if self.mode == ScheduleMode::Static || t >= self.total_steps {
            return target;
        }
        let total = T::from_u64(self.total_steps).expect("step count fits scalar");
        let t = T::from_u64(t).expect("step fits scalar");
        let beta_moves = self.start.beta != target.beta;
        let alpha_steps = if beta_moves {
            total * self.phase_split
        } else {
            total
        };

        if t < alpha_steps {
            let frac = t / alpha_steps;
            RiskInterval {
                alpha: lerp(self.start.alpha, target.alpha, frac),
                beta: self.start.beta,
            }
        } else {
            let frac = (t - alpha_steps) / (total - alpha_steps);
            RiskInterval {
                alpha: target.alpha,
                beta: lerp(self.start.beta, target.beta, frac),
            }
        }
    }
}

/// Linear epsilon decay from `eps_start` to `eps_end` over `eps_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule<T> {
    eps_start: T,
    eps_end: T,
    eps_steps: u64,
}

impl<T: Scalar> EpsilonSchedule<T> {
    pub fn new(eps_start: T, eps_end: T, eps_steps: u64) -> Result<Self> {
        if !(eps_start <= T::one() && eps_start >= eps_end && eps_end >= T::zero()) {
            return Err(Error::InvalidSchedule(format!(
                "epsilon must satisfy 1 >= start >= end >= 0, got start={eps_start} end={eps_end}"
            )));
        }
        Ok(Self {
            eps_start,
            eps_end,
            eps_steps,
        })
    }

    pub fn constant(eps: T) -> Result<Self> {
        Self::new(eps, eps, 0)
    }

    pub fn eps_start(&self) -> T {
        self.eps_start
    }

    pub fn eps_end(&self) -> T {
        self.eps_end
    }

    pub fn eps_steps(&self) -> u64 {
        self.eps_steps
    }

    pub fn epsilon_at_step(&self, t: u64) -> T {
        if t >= self.eps_steps {
            return self.eps_end;
        }
        let frac = T::from_u64(t).expect("step fits scalar")
            / T::from_u64(self.eps_steps).expect("step count fits scalar");
        lerp(self.eps_start, self.eps_end, frac)
    }
}

impl<T: Scalar> Default for EpsilonSchedule<T> {
    fn default() -> Self {
        Self {
            eps_start: T::one(),
            eps_end: T::lit(0.05),
            eps_steps: 50_000,
        }
    }
}

#[inline]
fn lerp<T: Scalar>(from: T, to: T, frac: T) -> T {
    from + (to - from) * frac
}

/// Index among `legal` maximizing `score`; ties go to the lowest action index.
pub fn argmax_legal<T, F>(legal: &[usize], mut score: F) -> Result<usize>
where
    T: Scalar,
    F: FnMut(usize) -> T,
{
    let mut best: Option<(usize, T)> = None;
    for &a in legal {
        let s = score(a);
        best = match best {
            Some((ba, bs)) if bs > s || (bs == s && ba < a) => Some((ba, bs)),
            _ => Some((a, s)),
        };
    }
    best.map(|(a, _)| a).ok_or(Error::NoLegalActions)
}

/// Risk-conditioned epsilon-greedy choice over actions whose return
/// distributions are produced by `dist_of`.
pub fn select_action_by<'a, T, F, R>(
    dist_of: F,
    legal: &[usize],
    interval: &RiskInterval<T>,
    epsilon: T,
    rng: &mut R,
) -> Result<usize>
where
    T: Scalar,
    F: Fn(usize) -> &'a QuantileDistribution<T>,
    R: Rng + ?Sized,
{
    if legal.is_empty() {
        return Err(Error::NoLegalActions);
    }
    if !(epsilon >= T::zero() && epsilon <= T::one()) {
        return Err(Error::InvalidEpsilon(epsilon.to_f64().unwrap_or(f64::NAN)));
    }
    if epsilon > T::zero() && T::lit(rng.gen::<f64>()) < epsilon {
        return Ok(legal[rng.gen_range(0..legal.len())]);
    }
    argmax_legal(legal, |a| dist_of(a).interval_expectation(interval))
}

/// [`select_action_by`] over a slice of per-action distributions.
pub fn select_action<T: Scalar, R: Rng + ?Sized>(
    dists: &[QuantileDistribution<T>],
    legal: &[usize],
    interval: &RiskInterval<T>,
    epsilon: T,
    rng: &mut R,
) -> Result<usize> {
    if let Some(&action) = legal.iter().find(|&&a| a >= dists.len()) {
        return Err(Error::InvalidAction {
            action,
            n_actions: dists.len(),
        });
    }
    select_action_by(|a| &dists[a], legal, interval, epsilon, rng)
}
