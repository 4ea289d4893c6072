use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::run::greedy_joint;
use crate::agent::QuantileTable;
use crate::envs::{EnvInstance, EnvPreset, Environment};
use crate::error::{Error, Result};
use crate::risk::RiskInterval;

/// Replays one greedy episode and writes one line per step. Battle presets
/// print the full unit layout; returns the episode return.
pub fn demo_episode<W: Write>(
    table: &QuantileTable<f64>,
    preset: EnvPreset,
    interval: &RiskInterval<f64>,
    seed: u64,
    mut out: W,
) -> Result<f64> {
    let mut env = preset.build();
    if table.n_actions() != env.n_actions() {
        return Err(Error::InvalidEnv(format!(
            "checkpoint has {} actions, {preset} needs {}",
            table.n_actions(),
            env.n_actions()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = env.reset(seed);
    let io = |e| Error::io("<output>", e);
    let mut step = 0u32;
    loop {
        let joint = greedy_joint(table, &env, &obs, interval)?;
        let outcome = env.step(&joint, &mut rng)?;
        step += 1;
        match &env {
            EnvInstance::Battle(b) => {
                let trace = b.last_trace().expect("trace after step");
                writeln!(out, "{trace} return={}", outcome.metrics.episode_return).map_err(io)?;
            }
            EnvInstance::Bandit(_) => {
                writeln!(
                    out,
                    "step={step} actions={joint:?} reward={} return={}",
                    outcome.reward, outcome.metrics.episode_return
                )
                .map_err(io)?;
            }
        }
        if outcome.done() {
            let end = if outcome.metrics.win {
                "win"
            } else if outcome.truncated {
                "truncated"
            } else {
                "loss"
            };
            writeln!(out, "episode end: {end} after {step} steps, return {}", outcome.metrics.episode_return)
                .map_err(io)?;
            return Ok(outcome.metrics.episode_return);
        }
        obs = env.observe_all();
    }
}
