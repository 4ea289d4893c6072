//! Distributional reinforcement learning with quantile-represented returns,
//! risk-interval action selection and risk scheduling.
//!
//! The math modules ([`dist`], [`risk`], [`agent`], [`marl`]) are generic
//! over the [`Scalar`] type; the aliases below fix it to `f64`, which is what
//! the environments and the experiment harness use.

pub mod agent;
pub mod dist;
pub mod envs;
pub mod error;
pub mod harness;
pub mod marl;
pub mod risk;
mod scalar;

pub use agent::{Bootstrap, LearnerConfig, LearningRate, QuantileTable, StateKey, Transition};
pub use dist::{Fraction, QuantileDistribution};
pub use error::{Error, Result};
pub use marl::{igm_check, mean_shape_compose, JointFactorization, JointTransition};
pub use risk::{select_action, EpsilonSchedule, RiskInterval, RiskLevel, RiskProfile, RiskSchedule};
pub use scalar::Scalar;

pub type Dist = QuantileDistribution<f64>;
pub type Dist32 = QuantileDistribution<f32>;
pub type Interval = RiskInterval<f64>;
pub type Interval32 = RiskInterval<f32>;
pub type Schedule = RiskSchedule<f64>;
pub type Epsilon = EpsilonSchedule<f64>;
pub type Table = QuantileTable<f64>;
pub type Learner = LearnerConfig<f64>;
