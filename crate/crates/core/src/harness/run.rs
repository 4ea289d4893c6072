use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, RiskMode};
use crate::agent::{Bootstrap, LearningRate, QuantileTable, StateKey};
use crate::envs::{EnvInstance, EnvPreset, Environment};
use crate::error::{Error, Result};
use crate::marl::{joint_qr_update, JointTransition};
use crate::risk::RiskInterval;

pub const RESULTS_FILE: &str = "results.csv";
pub const META_FILE: &str = "run_meta.txt";
pub const CHECKPOINT_DIR: &str = "checkpoints";

pub const CSV_HEADER: [&str; 11] = [
    "env",
    "risk_mode",
    "seed",
    "train_step",
    "mean_return",
    "win_rate",
    "damage_per_step",
    "travel_per_step",
    "alpha",
    "beta",
    "epsilon",
];

/// One evaluation point of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub env: EnvPreset,
    pub risk_mode: RiskMode,
    pub seed: u64,
    pub train_step: u64,
    pub mean_return: f64,
    pub win_rate: f64,
    pub damage_per_step: f64,
    pub travel_per_step: f64,
    /// Training-time interval and ε at `train_step`.
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl EvalRow {
    pub fn to_record(&self) -> [String; 11] {
        [
            self.env.to_string(),
            self.risk_mode.to_string(),
            self.seed.to_string(),
            self.train_step.to_string(),
            self.mean_return.to_string(),
            self.win_rate.to_string(),
            self.damage_per_step.to_string(),
            self.travel_per_step.to_string(),
            self.alpha.to_string(),
            self.beta.to_string(),
            self.epsilon.to_string(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Ordered by `(seed, train_step)`.
    pub rows: Vec<EvalRow>,
    /// Final table per seed, in seed order.
    pub tables: Vec<(u64, QuantileTable<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalStats {
    pub mean_return: f64,
    pub win_rate: f64,
    pub damage_per_step: f64,
    pub travel_per_step: f64,
}

/// Trains every seed in parallel on the configured preset; writes nothing.
pub fn train(cfg: &ExperimentConfig) -> Result<RunResult> {
    train_on(cfg, &cfg.env.build())
}

/// Like [`train`] but on clones of `proto`, e.g. a battle with custom
/// constants. Rows still carry `cfg.env` as their label.
pub fn train_on(cfg: &ExperimentConfig, proto: &EnvInstance) -> Result<RunResult> {
    cfg.validate()?;
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| train_seed(cfg, proto, seed).map(|(rows, table)| (seed, rows, table)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut tables = Vec::new();
    for (seed, r, t) in per_seed {
        rows.extend(r);
        tables.push((seed, t));
    }
    rows.sort_by_key(|r| (r.seed, r.train_step));
    tables.sort_by_key(|&(seed, _)| seed);
    Ok(RunResult { rows, tables })
}

/// Trains, then writes the CSV, a metadata file and optional checkpoints
/// under `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    let out = cfg
        .out_dir
        .as_deref()
        .ok_or_else(|| Error::Config("no output directory configured".into()))?;
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let result = train(cfg)?;
    write_results_csv(&out.join(RESULTS_FILE), &result.rows)?;
    write_meta(&out.join(META_FILE), cfg)?;
    if cfg.checkpoints {
        let dir = out.join(CHECKPOINT_DIR);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (seed, table) in &result.tables {
            table.save(checkpoint_path(out, *seed))?;
        }
    }
    Ok(result)
}

pub fn checkpoint_path(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(CHECKPOINT_DIR).join(format!("seed-{seed}.qtable"))
}

pub fn write_results_csv(path: &Path, rows: &[EvalRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(CSV_HEADER).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(row.to_record()).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_meta(path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let text = format!(
        "# evaluation: epsilon = 0, greedy under the target risk interval {}, \
         {} episodes per evaluation point\n\
         # alpha/beta/epsilon columns are the training-time values at train_step\n{}",
        cfg.risk_mode.target().interval::<f64>(),
        cfg.eval_episodes,
        cfg.to_kv_string()
    );
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Derives an independent stream for a seed and a purpose.
fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

fn train_seed(cfg: &ExperimentConfig, proto: &EnvInstance, seed: u64) -> Result<(Vec<EvalRow>, QuantileTable<f64>)> {
    let schedule = cfg.risk_schedule()?;
    let target = cfg.risk_mode.target().interval::<f64>();
    let lr = LearningRate {
        start: cfg.learner.lr,
        end: if cfg.lr_decay_steps == 0 { cfg.learner.lr } else { cfg.lr_end },
        steps: cfg.lr_decay_steps,
    };
    let mut env = proto.clone();
    let mut table = QuantileTable::from_config(env.n_actions(), &cfg.learner)?;
    let mut rng = stream(seed, 1);
    let mut learner_cfg = cfg.learner;
    let mut rows = Vec::new();

    let mut obs = env.reset(rng.gen());
    for t in 0..cfg.total_steps {
        let interval = schedule.interval_at_step(t);
        let eps = cfg.epsilon.epsilon_at_step(t);

        let mut joint = Vec::with_capacity(env.n_agents());
        let mut current = Vec::new();
        for (i, key) in obs.iter().enumerate() {
            let legal = env.legal_actions(i);
            if env.is_active(i) {
                let a = table.act(key, &legal, &interval, eps, &mut rng)?;
                current.push((key.clone(), a));
                joint.push(a);
            } else {
                joint.push(legal[0]);
            }
        }

        let outcome = env.step(&joint, &mut rng)?;
        let next_obs = env.observe_all();
        let next: Vec<(StateKey, Vec<usize>)> = (0..env.n_agents())
            .filter(|&i| env.is_active(i))
            .map(|i| (next_obs[i].clone(), env.legal_actions(i)))
            .collect();
        // A wipe-out is terminal, so `next` is only consulted when non-empty.
        let tr = JointTransition {
            current,
            next,
            reward: outcome.reward,
            terminal: outcome.terminal,
        };
        let bootstrap = match cfg.learner.bootstrap {
            Bootstrap::Neutral => RiskInterval::full(),
            Bootstrap::Behavior => interval,
        };
        learner_cfg.lr = lr.at(t);
        joint_qr_update(&mut table, &tr, &learner_cfg, &bootstrap)?;

        obs = if outcome.done() { env.reset(rng.gen()) } else { next_obs };

        let done_steps = t + 1;
        if done_steps % cfg.eval_interval == 0 {
            let stats = evaluate(&table, proto, &target, cfg.eval_episodes, seed)?;
            let logged = schedule.interval_at_step(done_steps);
            rows.push(EvalRow {
                env: cfg.env,
                risk_mode: cfg.risk_mode,
                seed,
                train_step: done_steps,
                mean_return: stats.mean_return,
                win_rate: stats.win_rate,
                damage_per_step: stats.damage_per_step,
                travel_per_step: stats.travel_per_step,
                alpha: logged.alpha(),
                beta: logged.beta(),
                epsilon: cfg.epsilon.epsilon_at_step(done_steps),
            });
        }
    }
    Ok((rows, table))
}

/// Greedy (ε = 0) rollouts under `interval`. The same `seed` always replays
/// the same episode layouts and dice, so evaluation points of one run are
/// compared on identical episodes.
pub fn evaluate(
    table: &QuantileTable<f64>,
    proto: &EnvInstance,
    interval: &RiskInterval<f64>,
    episodes: usize,
    seed: u64,
) -> Result<EvalStats> {
    let mut env = proto.clone();
    let mut rng = stream(seed, 2);
    let mut total_return = 0.0;
    let mut wins = 0usize;
    let mut damage = 0.0;
    let mut travel = 0.0;
    let mut steps = 0u64;
    for _ in 0..episodes {
        let mut obs = env.reset(rng.gen());
        loop {
            let joint = greedy_joint(table, &env, &obs, interval)?;
            let outcome = env.step(&joint, &mut rng)?;
            steps += 1;
            damage += outcome.metrics.damage_dealt;
            travel += outcome.metrics.travel_distance;
            if outcome.done() {
                total_return += outcome.metrics.episode_return;
                wins += usize::from(outcome.metrics.win);
                break;
            }
            obs = env.observe_all();
        }
    }
    let n = episodes as f64;
    let steps = steps.max(1) as f64;
    Ok(EvalStats {
        mean_return: total_return / n,
        win_rate: wins as f64 / n,
        damage_per_step: damage / steps,
        travel_per_step: travel / steps,
    })
}

pub(crate) fn greedy_joint(
    table: &QuantileTable<f64>,
    env: &EnvInstance,
    obs: &[StateKey],
    interval: &RiskInterval<f64>,
) -> Result<Vec<usize>> {
    obs.iter()
        .enumerate()
        .map(|(i, key)| {
            let legal = env.legal_actions(i);
            if env.is_active(i) {
                table.greedy_action(key, &legal, interval)
            } else {
                Ok(legal[0])
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::VarianceBandit;

    fn bandit_cfg(mode: RiskMode) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            env: EnvPreset::Bandit,
            risk_mode: mode,
            schedule_steps: 500,
            total_steps: 2_000,
            eval_interval: 500,
            eval_episodes: 10,
            seeds: vec![3, 1],
            ..Default::default()
        };
        cfg.set("eps_steps", "1000").unwrap();
        cfg.learner.lr = 0.5;
        cfg.lr_end = 0.05;
        cfg.lr_decay_steps = cfg.total_steps;
        cfg
    }

    #[test]
    fn rows_sorted_and_schedules_logged() {
        let cfg = bandit_cfg(RiskMode::SchedAverse);
        let res = train(&cfg).unwrap();
        assert_eq!(res.rows.len(), 8);
        let keys: Vec<_> = res.rows.iter().map(|r| (r.seed, r.train_step)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        let schedule = cfg.risk_schedule().unwrap();
        for r in &res.rows {
            let i = schedule.interval_at_step(r.train_step);
            assert_eq!((r.alpha, r.beta), (i.alpha(), i.beta()));
            assert_eq!(r.epsilon, cfg.epsilon.epsilon_at_step(r.train_step));
            assert!((0.0..=1.0).contains(&r.win_rate));
        }
        assert_eq!(res.tables.iter().map(|t| t.0).collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn single_eval_row_when_interval_equals_total() {
        let mut cfg = bandit_cfg(RiskMode::StaticNeutral);
        cfg.eval_interval = cfg.total_steps;
        let res = train(&cfg).unwrap();
        assert_eq!(res.rows.len(), cfg.seeds.len());
    }

    #[test]
    fn averse_bandit_prefers_safe_arm() {
        let cfg = bandit_cfg(RiskMode::SchedAverse);
        let res = train(&cfg).unwrap();
        let averse = RiskMode::SchedAverse.target().interval();
        for (_, table) in &res.tables {
            let a = table.greedy_action(&StateKey::default(), &[0, 1], &averse).unwrap();
            assert_eq!(a, VarianceBandit::SAFE_ARM);
        }
    }

    #[test]
    fn invalid_config_rejected_before_training() {
        let mut cfg = bandit_cfg(RiskMode::StaticAverse);
        cfg.seeds.clear();
        assert!(train(&cfg).is_err());
        let cfg = bandit_cfg(RiskMode::StaticAverse);
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    }
}
