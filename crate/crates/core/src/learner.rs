//! The Nash-Q loop over augmented states: each agent keeps Q-tables for
//! both agents, selects actions epsilon-greedily from the stage-game
//! equilibrium of its own tables, and backs values up through the
//! equilibrium value at the successor state.

use crate::equilibrium::{self, StageGame};
use crate::grid::Action;
use crate::product::{AugState, ProductGame, StepOutcome};
use rand::Rng;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum AgentId {
    Ego,
    Adv,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum AlphaMode {
    /// Fixed learning rate.
    Constant(f64),
    /// `1/n` where `n` counts visits of the (state, joint action) pair.
    VisitCount,
}

#[derive(Clone, Debug)]
pub struct LearnParams {
    pub gamma: f64,
    pub epsilon: f64,
    pub alpha_mode: AlphaMode,
    pub eplength: u32,
    pub q0: f64,
    /// An episode ends early once either agent's step reward reaches this
    /// threshold (task completion). `None` disables early termination.
    pub completion_reward: Option<f64>,
}

impl Default for LearnParams {
    fn default() -> LearnParams {
        LearnParams {
            gamma: 0.9,
            epsilon: 0.25,
            alpha_mode: AlphaMode::VisitCount,
            eplength: 200,
            q0: 0.0,
            completion_reward: Some(1.0),
        }
    }
}

#[derive(Error, Debug, PartialEq)]
pub enum LearnError {
    #[error("gamma must be in (0, 1], got {0}")]
    BadGamma(f64),
    #[error("epsilon must be in [0, 1], got {0}")]
    BadEpsilon(f64),
    #[error("constant learning rate must be in [0, 1], got {0}")]
    BadAlpha(f64),
    #[error("evaluation needs at least one episode")]
    ZeroEvalEpisodes,
}

impl LearnParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(LearnError::BadGamma(self.gamma));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(LearnError::BadEpsilon(self.epsilon));
        }
        if let AlphaMode::Constant(a) = self.alpha_mode {
            if !(0.0..=1.0).contains(&a) {
                return Err(LearnError::BadAlpha(a));
            }
        }
        Ok(())
    }
}

/// One Q-table: `(state key, ego action, adv action) -> value`, with
/// missing entries reading as the initial value `q0`.
#[derive(Clone, Debug)]
pub struct QTable {
    map: HashMap<u64, Vec<f64>>,
    n_ego: usize,
    n_adv: usize,
    q0: f64,
}

impl QTable {
    pub fn new(n_ego: usize, n_adv: usize, q0: f64) -> QTable {
        QTable { map: HashMap::new(), n_ego, n_adv, q0 }
    }

    pub fn get(&self, key: u64, a_ego: usize, a_adv: usize) -> f64 {
        self.map
            .get(&key)
            .map(|m| m[a_ego * self.n_adv + a_adv])
            .unwrap_or(self.q0)
    }

    pub fn set(&mut self, key: u64, a_ego: usize, a_adv: usize, value: f64) {
        let n_adv = self.n_adv;
        self.entry(key)[a_ego * n_adv + a_adv] = value;
    }

    fn entry(&mut self, key: u64) -> &mut Vec<f64> {
        let size = self.n_ego * self.n_adv;
        let q0 = self.q0;
        self.map.entry(key).or_insert_with(|| vec![q0; size])
    }

    /// Flat action-payoff matrix at a state (row = ego action).
    pub fn matrix(&self, key: u64) -> Vec<f64> {
        match self.map.get(&key) {
            Some(m) => m.clone(),
            None => vec![self.q0; self.n_ego * self.n_adv],
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = u64> + '_ {
        self.map.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_ego, self.n_adv)
    }

    /// Largest absolute entry, for range checks during long runs.
    pub fn max_abs(&self) -> f64 {
        self.map
            .values()
            .flat_map(|m| m.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// The two Q-tables one agent maintains: its estimate of the ego agent's
/// Q-function and of the adversary's.
#[derive(Clone, Debug)]
pub struct AgentStore {
    pub q_ego: QTable,
    pub q_adv: QTable,
}

impl AgentStore {
    pub fn new(n_ego: usize, n_adv: usize, q0: f64) -> AgentStore {
        AgentStore { q_ego: QTable::new(n_ego, n_adv, q0), q_adv: QTable::new(n_ego, n_adv, q0) }
    }

    /// The stage game at a state: ego's estimated payoffs as the row
    /// player's matrix, the adversary's as the column player's.
    pub fn stage_game(&self, key: u64) -> StageGame {
        let (m, n) = (self.q_ego.n_ego, self.q_ego.n_adv);
        StageGame::from_flat(m, n, &self.q_ego.matrix(key), &self.q_adv.matrix(key))
            .expect("table dimensions are consistent")
    }
}

/// All four Q-tables: each agent's pair of estimates.
#[derive(Clone, Debug)]
pub struct QStore {
    pub ego: AgentStore,
    pub adv: AgentStore,
}

impl QStore {
    pub fn new(n_ego: usize, n_adv: usize, q0: f64) -> QStore {
        QStore {
            ego: AgentStore::new(n_ego, n_adv, q0),
            adv: AgentStore::new(n_ego, n_adv, q0),
        }
    }

    pub fn agent(&self, id: AgentId) -> &AgentStore {
        match id {
            AgentId::Ego => &self.ego,
            AgentId::Adv => &self.adv,
        }
    }
}

/// Per-(state, joint action) visit counts backing the `1/n` learning-rate
/// schedule. Each learning agent owns one.
#[derive(Clone, Debug, Default)]
pub struct VisitCounter {
    map: HashMap<u64, u32>,
}

impl VisitCounter {
    pub fn new() -> VisitCounter {
        VisitCounter::default()
    }

    fn pack(key: u64, a_ego: usize, a_adv: usize) -> u64 {
        (key << 6) | ((a_ego as u64) << 3) | a_adv as u64
    }

    pub fn count(&self, key: u64, a_ego: usize, a_adv: usize) -> u32 {
        self.map.get(&Self::pack(key, a_ego, a_adv)).copied().unwrap_or(0)
    }

    /// Record a visit and return the learning rate for it.
    pub fn alpha(&mut self, key: u64, a_ego: usize, a_adv: usize, mode: AlphaMode) -> f64 {
        let n = self.map.entry(Self::pack(key, a_ego, a_adv)).or_insert(0);
        *n += 1;
        match mode {
            AlphaMode::Constant(a) => a,
            AlphaMode::VisitCount => 1.0 / *n as f64,
        }
    }
}

/// Visit counters for both learning agents.
#[derive(Clone, Debug, Default)]
pub struct Counters {
    pub ego: VisitCounter,
    pub adv: VisitCounter,
}

/// The environment surface the learner drives. Implementations may carry
/// per-episode observer state (the event bit vector of the augmented-state
/// baseline), so episodes are explicitly delimited.
pub trait TrainEnv {
    fn begin_episode(&mut self, rng: &mut dyn rand::RngCore) -> AugState;
    fn step(
        &mut self,
        aug: &AugState,
        a_ego: Action,
        a_adv: Action,
        rng: &mut dyn rand::RngCore,
    ) -> StepOutcome;
    /// Table key for a state under this environment's state abstraction.
    fn key(&self, aug: &AugState) -> u64;
    fn actions(&self) -> &[Action];
}

/// The canonical environment: full augmented-state keys.
pub struct QrmSgEnv<'a> {
    game: &'a ProductGame,
}

impl<'a> QrmSgEnv<'a> {
    pub fn new(game: &'a ProductGame) -> QrmSgEnv<'a> {
        QrmSgEnv { game }
    }
}

impl TrainEnv for QrmSgEnv<'_> {
    fn begin_episode(&mut self, rng: &mut dyn rand::RngCore) -> AugState {
        self.game.reset(rng)
    }

    fn step(
        &mut self,
        aug: &AugState,
        a_ego: Action,
        a_adv: Action,
        rng: &mut dyn rand::RngCore,
    ) -> StepOutcome {
        self.game.step(aug, a_ego, a_adv, rng)
    }

    fn key(&self, aug: &AugState) -> u64 {
        self.game.encode_aug(aug)
    }

    fn actions(&self) -> &[Action] {
        self.game.actions()
    }
}

/// Epsilon-greedy equilibrium action selection: with probability epsilon a
/// uniform random action; otherwise solve the agent's own stage game and
/// take the most likely action of the agent's own equilibrium strategy
/// (ties to the lowest index).
pub fn select_action(
    agent: AgentId,
    store: &AgentStore,
    key: u64,
    epsilon: f64,
    rng: &mut dyn rand::RngCore,
) -> usize {
    let (n_ego, n_adv) = store.q_ego.dims();
    let own = match agent {
        AgentId::Ego => n_ego,
        AgentId::Adv => n_adv,
    };
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return rng.random_range(0..own);
    }
    let profile = equilibrium::solve(&store.stage_game(key));
    match agent {
        AgentId::Ego => profile.argmax_row(),
        AgentId::Adv => profile.argmax_col(),
    }
}

/// Equilibrium value backup at a successor state: solve the agent's stage
/// game there once and evaluate both of its tables under that profile.
pub fn nash_backup(store: &AgentStore, next_key: u64) -> (f64, f64) {
    let game = store.stage_game(next_key);
    let profile = equilibrium::solve(&game);
    let (m, n) = store.q_ego.dims();
    let qbar_ego = equilibrium::nash_value(m, n, game.a_flat(), &profile);
    let qbar_adv = equilibrium::nash_value(m, n, game.b_flat(), &profile);
    (qbar_ego, qbar_adv)
}

/// The Nash-Q update for one learning agent: both of its tables move toward
/// `r + gamma * qbar(next)` at the visited (state, joint action) entry, and
/// only there.
#[allow(clippy::too_many_arguments)]
pub fn q_update(
    store: &mut AgentStore,
    counter: &mut VisitCounter,
    key: u64,
    a_ego: usize,
    a_adv: usize,
    r_ego: f64,
    r_adv: f64,
    next_key: u64,
    params: &LearnParams,
) {
    let (qbar_ego, qbar_adv) = nash_backup(store, next_key);
    let alpha = counter.alpha(key, a_ego, a_adv, params.alpha_mode);
    let idx = a_ego * store.q_ego.n_adv + a_adv;
    let e = &mut store.q_ego.entry(key)[idx];
    *e = (1.0 - alpha) * *e + alpha * (r_ego + params.gamma * qbar_ego);
    let e = &mut store.q_adv.entry(key)[idx];
    *e = (1.0 - alpha) * *e + alpha * (r_adv + params.gamma * qbar_adv);
}

/// What one training episode produced.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct EpisodeRecord {
    pub steps: u32,
    pub reward_ego: f64,
    pub reward_adv: f64,
    pub completed: bool,
}

/// Stage games sampled during learning, for later classification of how
/// often the convergence assumptions held.
#[derive(Clone, Debug)]
pub struct StageLog {
    pub games: Vec<StageGame>,
    stride: u32,
    countdown: u32,
    cap: usize,
}

impl StageLog {
    pub fn new(stride: u32, cap: usize) -> StageLog {
        StageLog { games: Vec::new(), stride: stride.max(1), countdown: 0, cap }
    }

    fn observe(&mut self, store: &AgentStore, key: u64) {
        if self.games.len() >= self.cap {
            return;
        }
        if self.countdown == 0 {
            self.games.push(store.stage_game(key));
            self.countdown = self.stride;
        }
        self.countdown -= 1;
    }
}

fn completed(out: &StepOutcome, params: &LearnParams) -> bool {
    match params.completion_reward {
        Some(c) => out.r_ego >= c || out.r_adv >= c,
        None => false,
    }
}

/// One training episode: both agents select actions from their own stores,
/// the environment steps, and both agents update their tables, until the
/// episode length is exhausted or a task completes.
pub fn run_episode(
    env: &mut impl TrainEnv,
    qs: &mut QStore,
    counters: &mut Counters,
    params: &LearnParams,
    mut log: Option<&mut StageLog>,
    rng: &mut impl Rng,
) -> EpisodeRecord {
    let mut record = EpisodeRecord::default();
    let mut aug = env.begin_episode(rng);
    let actions = env.actions().to_vec();
    for _ in 0..params.eplength {
        let key = env.key(&aug);
        let ae = select_action(AgentId::Ego, &qs.ego, key, params.epsilon, rng);
        let aa = select_action(AgentId::Adv, &qs.adv, key, params.epsilon, rng);
        let out = env.step(&aug, actions[ae], actions[aa], rng);
        let next_key = env.key(&out.next);
        q_update(&mut qs.ego, &mut counters.ego, key, ae, aa, out.r_ego, out.r_adv, next_key, params);
        q_update(&mut qs.adv, &mut counters.adv, key, ae, aa, out.r_ego, out.r_adv, next_key, params);
        if let Some(l) = log.as_deref_mut() {
            l.observe(&qs.ego, next_key);
        }
        record.steps += 1;
        record.reward_ego += out.r_ego;
        record.reward_adv += out.r_adv;
        aug = out.next;
        if completed(&out, params) {
            record.completed = true;
            break;
        }
    }
    record
}

/// Greedy rollouts without learning: epsilon forced to zero, stores
/// untouched. Returns the per-agent mean cumulative episodic reward.
pub fn evaluate(
    env: &mut impl TrainEnv,
    qs: &QStore,
    n_episodes: u32,
    params: &LearnParams,
    rng: &mut impl Rng,
) -> Result<(f64, f64), LearnError> {
    if n_episodes == 0 {
        return Err(LearnError::ZeroEvalEpisodes);
    }
    let actions = env.actions().to_vec();
    let mut total = (0.0, 0.0);
    for _ in 0..n_episodes {
        let mut aug = env.begin_episode(rng);
        for _ in 0..params.eplength {
            let key = env.key(&aug);
            let ae = select_action(AgentId::Ego, &qs.ego, key, 0.0, rng);
            let aa = select_action(AgentId::Adv, &qs.adv, key, 0.0, rng);
            let out = env.step(&aug, actions[ae], actions[aa], rng);
            total.0 += out.r_ego;
            total.1 += out.r_adv;
            aug = out.next;
            if completed(&out, params) {
                break;
            }
        }
    }
    Ok((total.0 / n_episodes as f64, total.1 / n_episodes as f64))
}

/// Training cadence: how long to train and how often to pause and measure.
#[derive(Clone, Debug)]
pub struct TrainSchedule {
    pub episodes: u32,
    pub eval_every: u32,
    pub eval_episodes: u32,
    /// Per-episode multiplicative epsilon decay with a floor.
    pub epsilon_decay: Option<(f64, f64)>,
}

/// One evaluation pause: mean greedy episodic rewards after `episode`
/// training episodes.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub episode: u32,
    pub ego: f64,
    pub adv: f64,
}

#[derive(Debug)]
pub struct TrainResult {
    pub checkpoints: Vec<Checkpoint>,
    pub store: QStore,
    pub counters: Counters,
    pub stage_log: StageLog,
}

/// Full training run: train `episodes` episodes, pausing every `eval_every`
/// to run greedy evaluations, all on one random stream.
pub fn train(
    env: &mut impl TrainEnv,
    params: &LearnParams,
    schedule: &TrainSchedule,
    rng: &mut impl Rng,
) -> Result<TrainResult, LearnError> {
    params.validate()?;
    let probe_actions = env.actions().len();
    let mut qs = QStore::new(probe_actions, probe_actions, params.q0);
    let mut counters = Counters::default();
    let mut stage_log = StageLog::new(997, 4000);
    let mut epsilon = params.epsilon;
    let mut checkpoints = Vec::new();
    for episode in 1..=schedule.episodes {
        let ep_params = LearnParams { epsilon, ..params.clone() };
        run_episode(env, &mut qs, &mut counters, &ep_params, Some(&mut stage_log), rng);
        if let Some((rate, floor)) = schedule.epsilon_decay {
            epsilon = (epsilon * rate).max(floor);
        }
        if schedule.eval_every > 0 && episode % schedule.eval_every == 0 {
            let (ego, adv) = evaluate(env, &qs, schedule.eval_episodes, params, rng)?;
            checkpoints.push(Checkpoint { episode, ego, adv });
        }
    }
    Ok(TrainResult { checkpoints, store: qs, counters, stage_log })
}
