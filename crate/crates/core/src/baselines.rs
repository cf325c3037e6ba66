//! Nash-Q baselines for learning-curve comparison. Both reuse the learner's
//! selection and update machinery unchanged; only the state key differs:
//! the plain baseline keys on the agents' grid state alone, the
//! augmented-state baseline appends a bit per proposition recording whether
//! the event has been seen during the episode.

use crate::grid::Action;
use crate::learner::{train, LearnError, LearnParams, TrainEnv, TrainResult, TrainSchedule};
use crate::product::{encode_grid, AugState, ProductGame, StepOutcome};
use rand::Rng;

/// Environment keyed on the bare grid state. The machines still produce the
/// rewards; the learner just cannot see their states.
pub struct GridStateEnv<'a> {
    game: &'a ProductGame,
}

impl<'a> GridStateEnv<'a> {
    pub fn new(game: &'a ProductGame) -> GridStateEnv<'a> {
        GridStateEnv { game }
    }
}

impl TrainEnv for GridStateEnv<'_> {
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
        encode_grid(self.game.cfg(), &aug.grid)
    }

    fn actions(&self) -> &[Action] {
        self.game.actions()
    }
}

/// Environment keyed on (grid state, events-encountered bit vector). Bits
/// latch when their event first occurs and clear at episode reset.
pub struct EventBitsEnv<'a> {
    game: &'a ProductGame,
    bits: u32,
}

impl<'a> EventBitsEnv<'a> {
    pub fn new(game: &'a ProductGame) -> EventBitsEnv<'a> {
        EventBitsEnv { game, bits: 0 }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }
}

impl TrainEnv for EventBitsEnv<'_> {
    fn begin_episode(&mut self, rng: &mut dyn rand::RngCore) -> AugState {
        self.bits = 0;
        self.game.reset(rng)
    }

    fn step(
        &mut self,
        aug: &AugState,
        a_ego: Action,
        a_adv: Action,
        rng: &mut dyn rand::RngCore,
    ) -> StepOutcome {
        let out = self.game.step(aug, a_ego, a_adv, rng);
        self.bits |= out.label.0;
        out
    }

    fn key(&self, aug: &AugState) -> u64 {
        encode_grid(self.game.cfg(), &aug.grid) | ((self.bits as u64) << 34)
    }

    fn actions(&self) -> &[Action] {
        self.game.actions()
    }
}

/// Train the plain Nash-Q baseline (state = agents' locations).
pub fn nash_q_train(
    game: &ProductGame,
    params: &LearnParams,
    schedule: &TrainSchedule,
    rng: &mut impl Rng,
) -> Result<TrainResult, LearnError> {
    train(&mut GridStateEnv::new(game), params, schedule, rng)
}

/// Train the augmented-state baseline (state = locations + event bits).
pub fn nash_qas_train(
    game: &ProductGame,
    params: &LearnParams,
    schedule: &TrainSchedule,
    rng: &mut impl Rng,
) -> Result<TrainResult, LearnError> {
    train(&mut EventBitsEnv::new(game), params, schedule, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cell, GridConfig};
    use crate::learner::QrmSgEnv;
    use crate::machine::parse_rm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_props() -> &'static str {
        "props: EgoAtHome AdvAtHome EgoMeetAdv EgoAtAdvHome AdvAtEgoHome"
    }

    // Tag game: capturing is rewarded every time it happens, so the reward
    // is already Markovian in the grid state.
    fn markovian_game() -> ProductGame {
        let cfg = GridConfig {
            width: 3,
            height: 3,
            ego_start: Cell::new(0, 0),
            adv_starts: vec![Cell::new(2, 2)],
            ego_home: Cell::new(0, 2),
            adv_home: Cell::new(2, 0),
            slip_rate: 0.01,
            capture_distance: 1.0,
            actions: Action::FOUR.to_vec(),
            slip_includes_intended: false,
            ego_home_destructible: false,
            adv_home_destructible: false,
        };
        let ego = parse_rm(&format!(
            "states: m0\ninitial: m0\n{}\nedge: m0 -> m0 on EgoMeetAdv reward 1\n",
            all_props()
        ))
        .unwrap();
        let adv = parse_rm(&format!(
            "states: m0\ninitial: m0\n{}\nedge: m0 -> m0 on EgoMeetAdv reward -1\n",
            all_props()
        ))
        .unwrap();
        ProductGame::new(cfg, ego, adv).unwrap()
    }

    fn schedule() -> TrainSchedule {
        TrainSchedule { episodes: 30, eval_every: 10, eval_episodes: 2, epsilon_decay: None }
    }

    #[test]
    fn same_seed_gives_identical_curves() {
        let game = markovian_game();
        let params = LearnParams { eplength: 20, ..LearnParams::default() };
        let a = nash_q_train(&game, &params, &schedule(), &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let b = nash_q_train(&game, &params, &schedule(), &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        assert_eq!(a.checkpoints, b.checkpoints);
    }

    #[test]
    fn one_stage_task_makes_all_algorithms_agree() {
        // with single-state machines the augmentation adds nothing, and the
        // event bits never survive past the completing step, so all three
        // algorithms see the same effective state space
        let game = markovian_game();
        let params = LearnParams { eplength: 20, ..LearnParams::default() };
        let qrm = {
            let mut env = QrmSgEnv::new(&game);
            train(&mut env, &params, &schedule(), &mut ChaCha8Rng::seed_from_u64(11)).unwrap()
        };
        let nq = nash_q_train(&game, &params, &schedule(), &mut ChaCha8Rng::seed_from_u64(11))
            .unwrap();
        let nqas = nash_qas_train(&game, &params, &schedule(), &mut ChaCha8Rng::seed_from_u64(11))
            .unwrap();
        assert_eq!(qrm.checkpoints, nq.checkpoints);
        assert_eq!(qrm.checkpoints, nqas.checkpoints);
    }

    #[test]
    fn event_bits_latch_until_reset() {
        let game = markovian_game();
        let mut env = EventBitsEnv::new(&game);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut aug = env.begin_episode(&mut rng);
        assert_eq!(env.bits(), 0);
        let mut seen = 0u32;
        for _ in 0..200 {
            let out = env.step(&aug, Action::Right, Action::Left, &mut rng);
            seen |= out.label.0;
            assert_eq!(env.bits(), seen, "bits accumulate monotonically");
            aug = out.next;
        }
        assert_ne!(env.bits(), 0, "walking towards each other must meet");
        env.begin_episode(&mut rng);
        assert_eq!(env.bits(), 0, "reset clears the bits");
    }
}
