//! Small cooperative gridworld battle: learning agents against scripted
//! enemies.
//!
//! Each step resolves in three phases. Enemies first commit to an intent
//! from the pre-move layout: attack the nearest agent already in range, or
//! (with probability `enemy_move_prob`) step toward the nearest agent in
//! sight. Then agents move in index order, followed by enemies. Finally
//! attacks land: agent attacks resolve in index order against the nearest
//! living enemy in range, and each committed enemy attack hits its target
//! with probability `enemy_hit_prob` if the target is still in range.
//! Enemy attacks use the roster alive at the start of the attack phase, so
//! both sides strike simultaneously.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Environment, StepMetrics, StepOutcome};
use crate::agent::StateKey;
use crate::error::{Error, Result};

type Pos = (i32, i32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BattleAction {
    Up,
    Down,
    Left,
    Right,
    Stay,
    /// Attack the nearest living enemy in range.
    Attack,
}

impl BattleAction {
    pub const ALL: [BattleAction; 6] = [
        BattleAction::Up,
        BattleAction::Down,
        BattleAction::Left,
        BattleAction::Right,
        BattleAction::Stay,
        BattleAction::Attack,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    fn delta(self) -> Option<Pos> {
        match self {
            BattleAction::Up => Some((0, 1)),
            BattleAction::Down => Some((0, -1)),
            BattleAction::Left => Some((-1, 0)),
            BattleAction::Right => Some((1, 0)),
            BattleAction::Stay | BattleAction::Attack => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitSpec {
    pub hp: u32,
    /// Manhattan attack range.
    pub range: u32,
    pub damage: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    /// Per hit point removed from enemies.
    pub damage_dealt: f64,
    /// Per enemy killed.
    pub kill: f64,
    /// Per hit point lost by agents.
    pub damage_taken: f64,
    /// Once, when the last enemy dies.
    pub win: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BattlePreset {
    pub name: String,
    pub width: i32,
    pub height: i32,
    pub agent: UnitSpec,
    pub agent_spawns: Vec<Pos>,
    pub enemy: UnitSpec,
    pub n_enemies: usize,
    /// Inclusive corners of the enemy spawn rectangle; cells are resampled
    /// on every reset.
    pub enemy_spawn_zone: (Pos, Pos),
    pub enemy_move_prob: f64,
    /// Manhattan distance within which enemies pursue agents.
    pub enemy_sight: u32,
    pub enemy_hit_prob: f64,
    pub max_steps: u32,
    pub rewards: RewardWeights,
    /// Relative enemy offsets in observations are clipped to this magnitude.
    pub obs_clip: i32,
    pub hp_buckets: u32,
}

impl BattlePreset {
    /// Three melee agents against two slow, tanky enemies. Killing one enemy
    /// quickly halves incoming damage, so concentrated attacks win.
    pub fn focusfire() -> Self {
        Self {
            name: "focusfire".into(),
            width: 5,
            height: 5,
            agent: UnitSpec {
                hp: 6,
                range: 1,
                damage: 1,
            },
            agent_spawns: vec![(1, 0), (2, 0), (3, 0)],
            enemy: UnitSpec {
                hp: 6,
                range: 1,
                damage: 1,
            },
            n_enemies: 2,
            enemy_spawn_zone: ((0, 3), (4, 4)),
            enemy_move_prob: 0.5,
            enemy_sight: 10,
            enemy_hit_prob: 0.75,
            max_steps: 40,
            rewards: RewardWeights {
                damage_dealt: 1.0,
                kill: 2.0,
                damage_taken: 0.5,
                win: 5.0,
            },
            obs_clip: 3,
            hp_buckets: 3,
        }
    }

    /// Two ranged agents against one fast melee enemy. Enemies commit to an
    /// attack before agents move, so an agent that steps out of reach dodges
    /// the blow; alternating retreat and attack deals damage without taking any.
    /// Standing still costs more than it deals: each landed blow is worth -2.
    pub fn kiting() -> Self {
        Self {
            name: "kiting".into(),
            width: 6,
            height: 6,
            agent: UnitSpec {
                hp: 4,
                range: 2,
                damage: 1,
            },
            agent_spawns: vec![(1, 0), (4, 0)],
            enemy: UnitSpec {
                hp: 12,
                range: 1,
                damage: 2,
            },
            n_enemies: 1,
            enemy_spawn_zone: ((0, 4), (5, 5)),
            enemy_move_prob: 1.0,
            enemy_sight: 12,
            enemy_hit_prob: 0.8,
            max_steps: 40,
            rewards: RewardWeights {
                damage_dealt: 1.0,
                kill: 2.0,
                damage_taken: 1.0,
                win: 5.0,
            },
            obs_clip: 3,
            hp_buckets: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidEnv(format!("{}: {m}", self.name)));
        if self.width <= 0 || self.height <= 0 {
            return bad("grid must be non-empty".into());
        }
        if self.agent_spawns.is_empty() || self.n_enemies == 0 {
            return bad("need at least one agent and one enemy".into());
        }
        if self.agent.hp == 0 || self.enemy.hp == 0 {
            return bad("units need positive hp".into());
        }
        let on_grid = |p: Pos| p.0 >= 0 && p.1 >= 0 && p.0 < self.width && p.1 < self.height;
        for (i, &p) in self.agent_spawns.iter().enumerate() {
            if !on_grid(p) {
                return bad(format!("agent spawn {p:?} off grid"));
            }
            if self.agent_spawns[..i].contains(&p) {
                return bad(format!("duplicate agent spawn {p:?}"));
            }
        }
        let ((x0, y0), (x1, y1)) = self.enemy_spawn_zone;
        if !on_grid((x0, y0)) || !on_grid((x1, y1)) || x0 > x1 || y0 > y1 {
            return bad("enemy spawn zone must be an on-grid rectangle".into());
        }
        if self.spawn_cells().len() < self.n_enemies {
            return bad("enemy spawn zone too small".into());
        }
        for p in [self.enemy_move_prob, self.enemy_hit_prob] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("probability {p} outside [0, 1]"));
            }
        }
        if self.max_steps == 0 || self.obs_clip <= 0 || self.hp_buckets == 0 {
            return bad("max_steps, obs_clip and hp_buckets must be positive".into());
        }
        Ok(())
    }

    fn spawn_cells(&self) -> Vec<Pos> {
        let ((x0, y0), (x1, y1)) = self.enemy_spawn_zone;
        (y0..=y1)
            .flat_map(|y| (x0..=x1).map(move |x| (x, y)))
            .filter(|p| !self.agent_spawns.contains(p))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unit {
    pub pos: Pos,
    pub hp: u32,
}

impl Unit {
    pub fn alive(&self) -> bool {
        self.hp > 0
    }
}

/// One step of an episode trace, printed as a single line.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: u32,
    pub actions: Vec<usize>,
    pub reward: f64,
    pub damage_dealt: f64,
    pub travel_distance: f64,
    pub agents: Vec<Unit>,
    pub enemies: Vec<Unit>,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let units = |us: &[Unit]| {
            us.iter()
                .map(|u| format!("{},{}:{}", u.pos.0, u.pos.1, u.hp))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let actions = self
            .actions
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(",");
        write!(
            f,
            "step={} actions={} reward={} damage={} travel={} agents=[{}] enemies=[{}]",
            self.step,
            actions,
            self.reward,
            self.damage_dealt,
            self.travel_distance,
            units(&self.agents),
            units(&self.enemies)
        )
    }
}

#[derive(Debug, Clone)]
pub struct TeamBattleEnv {
    preset: BattlePreset,
    agents: Vec<Unit>,
    enemies: Vec<Unit>,
    t: u32,
    episode_return: f64,
    illegal_actions: u64,
    last_trace: Option<TraceRecord>,
}

const DEAD_KEY: i32 = -1;

impl TeamBattleEnv {
    /// Panics if the preset is invalid; use [`BattlePreset::validate`] first
    /// for user-supplied presets.
    pub fn new(preset: BattlePreset) -> Self {
        preset.validate().expect("valid battle preset");
        let mut env = Self {
            agents: Vec::new(),
            enemies: Vec::new(),
            t: 0,
            episode_return: 0.0,
            illegal_actions: 0,
            last_trace: None,
            preset,
        };
        env.reset(0);
        env
    }

    /// Places units explicitly instead of sampling a layout.
    pub fn with_layout(preset: BattlePreset, agents: Vec<Unit>, enemies: Vec<Unit>) -> Result<Self> {
        preset.validate()?;
        if agents.len() != preset.agent_spawns.len() {
            return Err(Error::InvalidEnv(format!(
                "layout has {} agents, preset expects {}",
                agents.len(),
                preset.agent_spawns.len()
            )));
        }
        let mut env = Self::new(preset);
        for u in agents.iter().chain(&enemies) {
            if !env.on_grid(u.pos) {
                return Err(Error::InvalidEnv(format!("unit at {:?} off grid", u.pos)));
            }
        }
        env.agents = agents;
        env.enemies = enemies;
        Ok(env)
    }

    pub fn preset(&self) -> &BattlePreset {
        &self.preset
    }

    pub fn agents(&self) -> &[Unit] {
        &self.agents
    }

    pub fn enemies(&self) -> &[Unit] {
        &self.enemies
    }

    pub fn steps_taken(&self) -> u32 {
        self.t
    }

    /// Count of actions that were illegal when submitted and replaced by `Stay`.
    pub fn illegal_actions(&self) -> u64 {
        self.illegal_actions
    }

    pub fn last_trace(&self) -> Option<&TraceRecord> {
        self.last_trace.as_ref()
    }

    fn on_grid(&self, p: Pos) -> bool {
        p.0 >= 0 && p.1 >= 0 && p.0 < self.preset.width && p.1 < self.preset.height
    }

    fn occupied(&self, p: Pos) -> bool {
        self.agents
            .iter()
            .chain(&self.enemies)
            .any(|u| u.alive() && u.pos == p)
    }

    fn free(&self, p: Pos) -> bool {
        self.on_grid(p) && !self.occupied(p)
    }

    fn hp_bucket(&self, hp: u32, max: u32) -> i32 {
        let b = self.preset.hp_buckets;
        ((hp * b).div_ceil(max)) as i32
    }

    /// Nearest living unit in `units` within `range` of `from`; ties go to
    /// the lowest hp, then the lowest index.
    fn nearest_in_range(units: &[Unit], from: Pos, range: u32) -> Option<usize> {
        units
            .iter()
            .enumerate()
            .filter(|(_, u)| u.alive() && manhattan(u.pos, from) <= range)
            .min_by_key(|&(i, u)| (manhattan(u.pos, from), u.hp, i))
            .map(|(i, _)| i)
    }

    fn move_allowed(&self, agent: usize, action: BattleAction) -> bool {
        let u = self.agents[agent];
        match action.delta() {
            Some((dx, dy)) => self.free((u.pos.0 + dx, u.pos.1 + dy)),
            None => true,
        }
    }

    fn is_legal(&self, agent: usize, action: BattleAction) -> bool {
        let u = self.agents[agent];
        if !u.alive() {
            return action == BattleAction::Stay;
        }
        match action {
            BattleAction::Stay => true,
            BattleAction::Attack => {
                Self::nearest_in_range(&self.enemies, u.pos, self.preset.agent.range).is_some()
            }
            mv => self.move_allowed(agent, mv),
        }
    }

    /// Step that brings `from` closer to `to`, trying the longer axis first.
    fn pursuit_step(&self, from: Pos, to: Pos) -> Option<Pos> {
        let (dx, dy) = (to.0 - from.0, to.1 - from.1);
        let horizontal = (from.0 + dx.signum(), from.1);
        let vertical = (from.0, from.1 + dy.signum());
        let order = if dx.abs() >= dy.abs() {
            [(dx != 0, horizontal), (dy != 0, vertical)]
        } else {
            [(dy != 0, vertical), (dx != 0, horizontal)]
        };
        order
            .into_iter()
            .find(|&(useful, p)| useful && self.free(p))
            .map(|(_, p)| p)
    }
}

fn manhattan(a: Pos, b: Pos) -> u32 {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

enum Intent {
    Idle,
    Attack(usize),
    Pursue(usize),
}

impl Environment for TeamBattleEnv {
    fn n_agents(&self) -> usize {
        self.preset.agent_spawns.len()
    }

    fn n_actions(&self) -> usize {
        BattleAction::ALL.len()
    }

    fn reset(&mut self, seed: u64) -> Vec<StateKey> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cells = self.preset.spawn_cells();
        cells.shuffle(&mut rng);
        self.agents = self
            .preset
            .agent_spawns
            .iter()
            .map(|&pos| Unit {
                pos,
                hp: self.preset.agent.hp,
            })
            .collect();
        self.enemies = cells[..self.preset.n_enemies]
            .iter()
            .map(|&pos| Unit {
                pos,
                hp: self.preset.enemy.hp,
            })
            .collect();
        self.t = 0;
        self.episode_return = 0.0;
        self.last_trace = None;
        self.observe_all()
    }

    /// `[blocked-move mask, own hp bucket, (dx, dy, hp bucket) per enemy]`;
    /// dead enemies appear as `(clip + 1, clip + 1, 0)`, a dead agent as `[-1]`.
    fn observe(&self, agent: usize) -> StateKey {
        let me = self.agents[agent];
        if !me.alive() {
            return StateKey(vec![DEAD_KEY]);
        }
        let clip = self.preset.obs_clip;
        let mut mask = 0;
        for (bit, action) in BattleAction::ALL[..4].iter().enumerate() {
            if !self.move_allowed(agent, *action) {
                mask |= 1 << bit;
            }
        }
        let mut key = Vec::with_capacity(2 + 3 * self.enemies.len());
        key.push(mask);
        key.push(self.hp_bucket(me.hp, self.preset.agent.hp));
        for e in &self.enemies {
            if e.alive() {
                key.push((e.pos.0 - me.pos.0).clamp(-clip, clip));
                key.push((e.pos.1 - me.pos.1).clamp(-clip, clip));
                key.push(self.hp_bucket(e.hp, self.preset.enemy.hp));
            } else {
                key.extend([clip + 1, clip + 1, 0]);
            }
        }
        StateKey(key)
    }

    fn legal_actions(&self, agent: usize) -> Vec<usize> {
        BattleAction::ALL
            .iter()
            .filter(|&&a| self.is_legal(agent, a))
            .map(|&a| a.index())
            .collect()
    }

    fn is_active(&self, agent: usize) -> bool {
        self.agents[agent].alive()
    }

    fn step<R: Rng + ?Sized>(&mut self, joint_action: &[usize], rng: &mut R) -> Result<StepOutcome> {
        if joint_action.len() != self.agents.len() {
            return Err(Error::InvalidEnv(format!(
                "expected {} actions, got {}",
                self.agents.len(),
                joint_action.len()
            )));
        }
        let mut actions = Vec::with_capacity(joint_action.len());
        for (i, &a) in joint_action.iter().enumerate() {
            let action = BattleAction::from_index(a).ok_or(Error::InvalidAction {
                action: a,
                n_actions: BattleAction::ALL.len(),
            })?;
            if self.is_legal(i, action) {
                actions.push(action);
            } else {
                self.illegal_actions += 1;
                actions.push(BattleAction::Stay);
            }
        }

        let p = self.preset.clone();

        // Enemy intents from the pre-move layout.
        let intents: Vec<Intent> = self
            .enemies
            .iter()
            .map(|e| {
                if !e.alive() {
                    return Intent::Idle;
                }
                if let Some(target) = Self::nearest_in_range(&self.agents, e.pos, p.enemy.range) {
                    return Intent::Attack(target);
                }
                if p.enemy_move_prob > 0.0 && rng.gen::<f64>() < p.enemy_move_prob {
                    if let Some(target) = Self::nearest_in_range(&self.agents, e.pos, p.enemy_sight) {
                        return Intent::Pursue(target);
                    }
                }
                Intent::Idle
            })
            .collect();

        // Movement: agents, then enemies, in index order.
        let mut travel = 0.0;
        for (i, action) in actions.iter().enumerate() {
            if let Some((dx, dy)) = action.delta() {
                let u = self.agents[i];
                let to = (u.pos.0 + dx, u.pos.1 + dy);
                if self.free(to) {
                    self.agents[i].pos = to;
                    travel += 1.0;
                }
            }
        }
        for (j, intent) in intents.iter().enumerate() {
            if let Intent::Pursue(target) = *intent {
                let to = self.agents[target].pos;
                if let Some(next) = self.pursuit_step(self.enemies[j].pos, to) {
                    self.enemies[j].pos = next;
                }
            }
        }

        // Attacks. Enemy blows are rolled against the pre-attack roster.
        let mut enemy_hits = vec![0u32; self.agents.len()];
        for (j, intent) in intents.iter().enumerate() {
            if let Intent::Attack(target) = *intent {
                let a = self.agents[target];
                if a.alive()
                    && manhattan(a.pos, self.enemies[j].pos) <= p.enemy.range
                    && rng.gen::<f64>() < p.enemy_hit_prob
                {
                    enemy_hits[target] += p.enemy.damage;
                }
            }
        }
        let mut dealt = 0u32;
        let mut kills = 0u32;
        for (i, action) in actions.iter().enumerate() {
            if *action != BattleAction::Attack || !self.agents[i].alive() {
                continue;
            }
            if let Some(j) = Self::nearest_in_range(&self.enemies, self.agents[i].pos, p.agent.range) {
                let hit = p.agent.damage.min(self.enemies[j].hp);
                self.enemies[j].hp -= hit;
                dealt += hit;
                if self.enemies[j].hp == 0 {
                    kills += 1;
                }
            }
        }
        let mut taken = 0u32;
        for (a, dmg) in self.agents.iter_mut().zip(enemy_hits) {
            let hit = dmg.min(a.hp);
            a.hp -= hit;
            taken += hit;
        }

        self.t += 1;
        let win = self.enemies.iter().all(|e| !e.alive());
        let lost = self.agents.iter().all(|a| !a.alive());
        let w = p.rewards;
        let mut reward = w.damage_dealt * f64::from(dealt) + w.kill * f64::from(kills)
            - w.damage_taken * f64::from(taken);
        if win {
            reward += w.win;
        }
        self.episode_return += reward;
        let terminal = win || lost;

        self.last_trace = Some(TraceRecord {
            step: self.t,
            actions: actions.iter().map(|a| a.index()).collect(),
            reward,
            damage_dealt: f64::from(dealt),
            travel_distance: travel,
            agents: self.agents.clone(),
            enemies: self.enemies.clone(),
        });

        Ok(StepOutcome {
            reward,
            metrics: StepMetrics {
                damage_dealt: f64::from(dealt),
                travel_distance: travel,
                episode_return: self.episode_return,
                win,
            },
            terminal,
            truncated: !terminal && self.t >= p.max_steps,
        })
    }
}
