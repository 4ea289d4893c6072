//! Tabular quantile-regression TD learner.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::dist::{QuantileDistribution, DEFAULT_KAPPA, DEFAULT_QUANTILES};
use crate::error::{Error, Result};
use crate::risk::{argmax_legal, select_action_by, RiskInterval};
use crate::scalar::Scalar;

const CHECKPOINT_MAGIC: &str = "riskrl-quantile-table v1";

/// Discrete state identifier: a short vector of integer features.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct StateKey(pub Vec<i32>);

impl StateKey {
    pub fn new(features: Vec<i32>) -> Self {
        Self(features)
    }

    pub fn features(&self) -> &[i32] {
        &self.0
    }
}

impl From<Vec<i32>> for StateKey {
    fn from(v: Vec<i32>) -> Self {
        Self(v)
    }
}

/// `.` for the empty key, otherwise comma-separated features.
impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str(".");
        }
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

impl FromStr for StateKey {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "." {
            return Ok(Self::default());
        }
        s.split(',')
            .map(str::parse)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub state: StateKey,
    pub action: usize,
    pub reward: T,
    pub next_state: StateKey,
    pub next_legal: Vec<usize>,
    pub terminal: bool,
}

/// Which action the distributional Bellman target bootstraps through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bootstrap {
    /// Greedy under the plain expectation, whatever the behavior interval.
    Neutral,
    /// Greedy under the current behavior risk interval.
    Behavior,
}

impl FromStr for Bootstrap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neutral" => Ok(Bootstrap::Neutral),
            "behavior" => Ok(Bootstrap::Behavior),
            other => Err(Error::Config(format!("unknown bootstrap rule `{other}`"))),
        }
    }
}

impl fmt::Display for Bootstrap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bootstrap::Neutral => "neutral",
            Bootstrap::Behavior => "behavior",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig<T> {
    /// Discount in `[0, 1]`.
    pub gamma: T,
    /// Step size for one quantile-Huber gradient step.
    pub lr: T,
    pub quantiles: usize,
    pub kappa: T,
    /// Value of every quantile in entries that were never updated.
    pub initial_value: T,
    pub bootstrap: Bootstrap,
}

impl<T: Scalar> LearnerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidLearnerConfig(msg));
        if !(self.gamma >= T::zero() && self.gamma <= T::one()) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.lr >= T::zero() && self.lr.is_finite()) {
            return bad(format!("learning rate must be finite and >= 0, got {}", self.lr));
        }
        if self.quantiles == 0 {
            return bad("quantile count must be positive".into());
        }
        if !(self.kappa > T::zero()) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if !self.initial_value.is_finite() {
            return bad("initial value must be finite".into());
        }
        Ok(())
    }

    /// Copy of this config with a different step size.
    pub fn with_lr(mut self, lr: T) -> Self {
        self.lr = lr;
        self
    }
}

impl<T: Scalar> Default for LearnerConfig<T> {
    fn default() -> Self {
        Self {
            gamma: T::lit(0.99),
            lr: T::lit(0.05),
            quantiles: DEFAULT_QUANTILES,
            kappa: T::lit(DEFAULT_KAPPA),
            initial_value: T::zero(),
            bootstrap: Bootstrap::Neutral,
        }
    }
}

/// Linearly decaying learning rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRate<T> {
    pub start: T,
    pub end: T,
    pub steps: u64,
}

impl<T: Scalar> LearningRate<T> {
    pub fn constant(lr: T) -> Self {
        Self {
            start: lr,
            end: lr,
            steps: 0,
        }
    }

    pub fn at(&self, t: u64) -> T {
        if t >= self.steps {
            return self.end;
        }
        let frac = T::from_u64(t).unwrap() / T::from_u64(self.steps).unwrap();
        self.start + (self.end - self.start) * frac
    }
}

/// Per-(state, action) quantile distributions.
///
/// Rows are created lazily; a missing entry reads as the constant
/// distribution at `initial_value`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTable<T> {
    n_actions: usize,
    default_dist: QuantileDistribution<T>,
    entries: HashMap<StateKey, Vec<QuantileDistribution<T>>>,
}

impl<T: Scalar> QuantileTable<T> {
    pub fn new(n_actions: usize, quantiles: usize, initial_value: T) -> Result<Self> {
        if n_actions == 0 {
            return Err(Error::InvalidLearnerConfig(
                "table needs at least one action".into(),
            ));
        }
        if !initial_value.is_finite() {
            return Err(Error::InvalidLearnerConfig(
                "initial value must be finite".into(),
            ));
        }
        Ok(Self {
            n_actions,
            default_dist: QuantileDistribution::constant(initial_value, quantiles)?,
            entries: HashMap::new(),
        })
    }

    pub fn from_config(n_actions: usize, cfg: &LearnerConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Self::new(n_actions, cfg.quantiles, cfg.initial_value)
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn quantiles(&self) -> usize {
        self.default_dist.len()
    }

    pub fn initial_value(&self) -> T {
        self.default_dist.values()[0]
    }

    /// Number of states with stored rows.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, state: &StateKey, action: usize) -> &QuantileDistribution<T> {
        assert!(action < self.n_actions, "action {action} out of range");
        self.entries
            .get(state)
            .map_or(&self.default_dist, |row| &row[action])
    }

    pub(crate) fn entry_mut(&mut self, state: &StateKey, action: usize) -> &mut QuantileDistribution<T> {
        if !self.entries.contains_key(state) {
            self.entries
                .insert(state.clone(), vec![self.default_dist.clone(); self.n_actions]);
        }
        &mut self.entries.get_mut(state).expect("row just inserted")[action]
    }

    /// Overwrites one entry; the distribution must have the table's `N`.
    pub fn set(&mut self, state: &StateKey, action: usize, dist: QuantileDistribution<T>) -> Result<()> {
        self.check_action(action)?;
        if dist.len() != self.quantiles() {
            return Err(Error::QuantileCountMismatch {
                left: self.quantiles(),
                right: dist.len(),
            });
        }
        *self.entry_mut(state, action) = dist;
        Ok(())
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action < self.n_actions {
            Ok(())
        } else {
            Err(Error::InvalidAction {
                action,
                n_actions: self.n_actions,
            })
        }
    }

    fn check_legal(&self, legal: &[usize]) -> Result<()> {
        if legal.is_empty() {
            return Err(Error::NoLegalActions);
        }
        legal.iter().try_for_each(|&a| self.check_action(a))
    }

    /// Risk-neutral greedy action, used to build bootstrap targets.
    pub fn greedy_target_action(&self, state: &StateKey, legal: &[usize]) -> Result<usize> {
        self.check_legal(legal)?;
        argmax_legal(legal, |a| self.get(state, a).expectation())
    }

    /// Greedy action under an arbitrary risk interval.
    pub fn greedy_action(&self, state: &StateKey, legal: &[usize], interval: &RiskInterval<T>) -> Result<usize> {
        self.check_legal(legal)?;
        argmax_legal(legal, |a| self.get(state, a).interval_expectation(interval))
    }

    /// Behavior policy: risk-conditioned epsilon-greedy over the legal actions.
    pub fn act<R: Rng + ?Sized>(
        &self,
        state: &StateKey,
        legal: &[usize],
        interval: &RiskInterval<T>,
        epsilon: T,
        rng: &mut R,
    ) -> Result<usize> {
        self.check_legal(legal)?;
        select_action_by(|a| self.get(state, a), legal, interval, epsilon, rng)
    }

    /// One quantile-regression TD step toward `r + γ Z(s', a*)`, with `a*`
    /// the risk-neutral greedy action at `s'`. Returns the loss before the step.
    pub fn qr_update(&mut self, tr: &Transition<T>, cfg: &LearnerConfig<T>) -> Result<T> {
        self.qr_update_toward(tr, cfg, &RiskInterval::full())
    }

    /// Like [`Self::qr_update`] but the bootstrap action is greedy under
    /// `bootstrap` instead of the full interval.
    pub fn qr_update_toward(
        &mut self,
        tr: &Transition<T>,
        cfg: &LearnerConfig<T>,
        bootstrap: &RiskInterval<T>,
    ) -> Result<T> {
        self.check_action(tr.action)?;
        let targets = self.bellman_targets(&tr.next_state, &tr.next_legal, tr.reward, tr.terminal, cfg.gamma, bootstrap)?;
        let dist = self.entry_mut(&tr.state, tr.action);
        let (loss, grad) = dist.quantile_huber_loss(&targets, cfg.kappa)?;
        dist.descend(&grad, cfg.lr);
        Ok(loss)
    }

    pub(crate) fn bellman_targets(
        &self,
        next_state: &StateKey,
        next_legal: &[usize],
        reward: T,
        terminal: bool,
        gamma: T,
        bootstrap: &RiskInterval<T>,
    ) -> Result<Vec<T>> {
        if terminal {
            return Ok(vec![reward]);
        }
        let next = self.greedy_action(next_state, next_legal, bootstrap)?;
        Ok(self
            .get(next_state, next)
            .values()
            .iter()
            .map(|&z| reward + gamma * z)
            .collect())
    }

    /// Writes the line-oriented checkpoint format; rows are sorted by state.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        writeln!(w, "actions {}", self.n_actions)?;
        writeln!(w, "quantiles {}", self.quantiles())?;
        writeln!(w, "initial {}", self.initial_value())?;
        let mut states: Vec<_> = self.entries.keys().collect();
        states.sort();
        for state in states {
            for (action, dist) in self.entries[state].iter().enumerate() {
                write!(w, "{state} {action}")?;
                for v in dist.values() {
                    write!(w, " {v}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let bad = |line: usize, reason: String| Error::Checkpoint { line, reason };
        let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next_line = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((n, Err(e))) => Err(bad(n, e.to_string())),
                None => Err(bad(0, format!("missing {what}"))),
            }
        };

        let (n, magic) = next_line("header")?;
        if magic.trim() != CHECKPOINT_MAGIC {
            return Err(bad(n, format!("expected `{CHECKPOINT_MAGIC}`")));
        }
        let mut header = |key: &str| -> Result<String> {
            let (n, l) = next_line(key)?;
            l.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(|v| v.trim().to_string())
                .ok_or_else(|| bad(n, format!("expected `{key} <value>`")))
        };
        let n_actions: usize = header("actions")?
            .parse()
            .map_err(|e| bad(2, format!("actions: {e}")))?;
        let quantiles: usize = header("quantiles")?
            .parse()
            .map_err(|e| bad(3, format!("quantiles: {e}")))?;
        let initial = parse_scalar::<T>(&header("initial")?).map_err(|e| bad(4, e))?;
        let mut table = Self::new(n_actions, quantiles, initial).map_err(|e| bad(4, e.to_string()))?;

        for (n, line) in lines {
            let line = line.map_err(|e| bad(n, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_ascii_whitespace();
            let state: StateKey = fields
                .next()
                .unwrap()
                .parse()
                .map_err(|e| bad(n, format!("state key: {e}")))?;
            let action: usize = fields
                .next()
                .ok_or_else(|| bad(n, "missing action".into()))?
                .parse()
                .map_err(|e| bad(n, format!("action: {e}")))?;
            let values = fields
                .map(|f| parse_scalar::<T>(f).map_err(|e| bad(n, e)))
                .collect::<Result<Vec<_>>>()?;
            let dist = QuantileDistribution::new(values).map_err(|e| bad(n, e.to_string()))?;
            table.set(&state, action, dist).map_err(|e| bad(n, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

fn parse_scalar<T: Scalar>(s: &str) -> std::result::Result<T, String> {
    let v: f64 = s.parse().map_err(|e| format!("`{s}`: {e}"))?;
    T::from_f64(v).ok_or_else(|| format!("`{s}` not representable"))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::risk::RiskLevel;

    fn key(v: &[i32]) -> StateKey {
        StateKey(v.to_vec())
    }

    fn cfg(gamma: f64, lr: f64) -> LearnerConfig<f64> {
        LearnerConfig {
            gamma,
            lr,
            ..LearnerConfig::default()
        }
    }

    fn terminal(state: StateKey, action: usize, reward: f64) -> Transition<f64> {
        Transition {
            state: state.clone(),
            action,
            reward,
            next_state: state,
            next_legal: vec![],
            terminal: true,
        }
    }

    #[test]
    fn state_key_text_form() {
        assert_eq!(key(&[]).to_string(), ".");
        assert_eq!(key(&[1, -2, 3]).to_string(), "1,-2,3");
        assert_eq!("1,-2,3".parse::<StateKey>().unwrap(), key(&[1, -2, 3]));
        assert_eq!(".".parse::<StateKey>().unwrap(), key(&[]));
    }

    #[test]
    fn greedy_target_examples() {
        let mut t = QuantileTable::new(2, 2, 0.0).unwrap();
        let s = key(&[0]);
        assert_eq!(t.greedy_target_action(&s, &[0, 1]).unwrap(), 0);
        assert_eq!(t.greedy_target_action(&s, &[1]).unwrap(), 1);
        t.set(&s, 0, QuantileDistribution::new(vec![1.0, 1.0]).unwrap()).unwrap();
        t.set(&s, 1, QuantileDistribution::new(vec![0.0, 3.0]).unwrap()).unwrap();
        assert_eq!(t.greedy_target_action(&s, &[0, 1]).unwrap(), 1);
        assert!(matches!(t.greedy_target_action(&s, &[]), Err(Error::NoLegalActions)));
        assert!(matches!(
            t.greedy_target_action(&s, &[0, 2]),
            Err(Error::InvalidAction { action: 2, .. })
        ));
    }

    #[test]
    fn act_follows_risk_interval() {
        let mut t = QuantileTable::new(2, 4, 0.0).unwrap();
        let s = key(&[]);
        t.set(&s, 0, QuantileDistribution::new(vec![1.0; 4]).unwrap()).unwrap();
        t.set(&s, 1, QuantileDistribution::new(vec![0.0, 0.0, 4.0, 4.0]).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let averse = RiskLevel::Averse.interval();
        let seeking = RiskLevel::Seeking.interval();
        assert_eq!(t.act(&s, &[0, 1], &averse, 0.0, &mut rng).unwrap(), 0);
        assert_eq!(t.act(&s, &[0, 1], &seeking, 0.0, &mut rng).unwrap(), 1);
    }

    #[test]
    fn terminal_reward_fixed_point() {
        let mut t = QuantileTable::new(1, 8, 0.0).unwrap();
        let s = key(&[]);
        let c = LearnerConfig { kappa: 0.01, ..cfg(0.9, 0.05) };
        for _ in 0..10_000 {
            t.qr_update(&terminal(s.clone(), 0, 2.0), &c).unwrap();
        }
        for &v in t.get(&s, 0).values() {
            assert!((v - 2.0).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn two_step_chain_converges_to_discounted_return() {
        let (r1, r2, gamma) = (1.0, 3.0, 0.9);
        let mut t = QuantileTable::new(1, 8, 0.0).unwrap();
        let (s0, s1) = (key(&[0]), key(&[1]));
        let first = Transition {
            state: s0.clone(),
            action: 0,
            reward: r1,
            next_state: s1.clone(),
            next_legal: vec![0],
            terminal: false,
        };
        let second = terminal(s1.clone(), 0, r2);
        let lr = LearningRate {
            start: 0.5,
            end: 0.01,
            steps: 50_000,
        };
        for i in 0..50_000 {
            let c = cfg(gamma, lr.at(i));
            t.qr_update(&first, &c).unwrap();
            t.qr_update(&second, &c).unwrap();
        }
        for &v in t.get(&s0, 0).values() {
            assert!((v - (r1 + gamma * r2)).abs() < 1e-2, "{v}");
        }
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut t = QuantileTable::new(2, 3, 0.0).unwrap();
        let s = key(&[4]);
        t.set(&s, 1, QuantileDistribution::new(vec![-1.0, 0.5, 2.0]).unwrap()).unwrap();
        let before = t.clone();
        let tr = Transition {
            state: s.clone(),
            action: 1,
            reward: 10.0,
            next_state: s,
            next_legal: vec![0, 1],
            terminal: false,
        };
        t.qr_update(&tr, &cfg(0.9, 0.0)).unwrap();
        assert_eq!(t, before);
    }

    #[test]
    fn high_target_raises_every_quantile() {
        let mut t = QuantileTable::new(1, 4, 0.0).unwrap();
        let s = key(&[]);
        t.set(&s, 0, QuantileDistribution::new(vec![-1.0, 0.0, 0.5, 1.0]).unwrap()).unwrap();
        let before = t.get(&s, 0).clone();
        t.qr_update(&terminal(s.clone(), 0, 5.0), &cfg(0.9, 0.01)).unwrap();
        for (a, b) in before.values().iter().zip(t.get(&s, 0).values()) {
            assert!(b > a);
        }
    }

    #[test]
    fn missing_next_legal_is_rejected() {
        let mut t = QuantileTable::new(1, 2, 0.0).unwrap();
        let tr = Transition {
            state: key(&[]),
            action: 0,
            reward: 1.0,
            next_state: key(&[1]),
            next_legal: vec![],
            terminal: false,
        };
        assert!(matches!(t.qr_update(&tr, &cfg(0.9, 0.1)), Err(Error::NoLegalActions)));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut t = QuantileTable::new(3, 4, 0.25).unwrap();
        let odd = QuantileDistribution::from_unsorted(vec![-0.1, 1.0 / 3.0, 2.5e-17, 7.0]).unwrap();
        t.set(&key(&[1, -2]), 2, odd).unwrap();
        t.set(&key(&[]), 0, QuantileDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap()).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = QuantileTable::<f64>::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        let err = QuantileTable::<f64>::read_from("not a table\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Checkpoint { line: 1, .. }));
        let text = format!("{CHECKPOINT_MAGIC}\nactions 2\nquantiles 2\ninitial 0\n. 0 1.0\n");
        let err = QuantileTable::<f64>::read_from(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Checkpoint { line: 5, .. }));
    }
}
