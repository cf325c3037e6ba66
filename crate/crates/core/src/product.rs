//! The product game: the grid game composed with both agents' reward
//! machines. States carry the grid state plus each machine's current state,
//! which makes the step rewards Markovian; the product is realized lazily
//! as step-function composition rather than as an enumerated table.

use crate::grid::{self, Action, GridConfig, GridState, GAME_PROPS};
use crate::machine::{Label, RewardMachine, RmState};
use rand::Rng;
use thiserror::Error;

/// Grid state augmented with both machines' states.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub struct AugState {
    pub grid: GridState,
    pub v_ego: RmState,
    pub v_adv: RmState,
}

/// Result of one product-game step. The label is in the game's proposition
/// ordering ([`GAME_PROPS`]).
#[derive(Copy, Clone, Debug)]
pub struct StepOutcome {
    pub next: AugState,
    pub r_ego: f64,
    pub r_adv: f64,
    pub label: Label,
}

#[derive(Error, Debug, PartialEq)]
pub enum ProductError {
    #[error("{agent} machine proposition set differs from the game's: missing {missing:?}, unknown {unknown:?}")]
    PropMismatch { agent: &'static str, missing: Vec<String>, unknown: Vec<String> },
    #[error(transparent)]
    Grid(#[from] grid::GridError),
}

// Game-order bit -> machine-order bit, built once per machine.
fn game_remap(agent: &'static str, rm: &RewardMachine) -> Result<[u8; GAME_PROPS.len()], ProductError> {
    let mut remap = [0u8; GAME_PROPS.len()];
    let mut missing = Vec::new();
    for (g, name) in GAME_PROPS.iter().enumerate() {
        match rm.prop_index(name) {
            Some(i) => remap[g] = i as u8,
            None => missing.push(name.to_string()),
        }
    }
    let unknown: Vec<String> = rm
        .prop_names()
        .iter()
        .filter(|p| !GAME_PROPS.contains(&p.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() || !unknown.is_empty() {
        return Err(ProductError::PropMismatch { agent, missing, unknown });
    }
    Ok(remap)
}

fn remap_label(label: Label, remap: &[u8; GAME_PROPS.len()]) -> Label {
    let mut out = Label::EMPTY;
    for (g, &m) in remap.iter().enumerate() {
        if label.contains(g) {
            out = out.with(m as usize);
        }
    }
    out
}

/// The composed game. Stateless apart from its immutable parts; concurrent
/// independent rollouts each bring their own random source.
#[derive(Clone, Debug)]
pub struct ProductGame {
    cfg: GridConfig,
    rm_ego: RewardMachine,
    rm_adv: RewardMachine,
    remap_ego: [u8; GAME_PROPS.len()],
    remap_adv: [u8; GAME_PROPS.len()],
}

impl ProductGame {
    /// Compose a grid game with both machines. Both machines must declare
    /// exactly the game's proposition vocabulary (they observe the same
    /// events).
    pub fn new(
        cfg: GridConfig,
        rm_ego: RewardMachine,
        rm_adv: RewardMachine,
    ) -> Result<ProductGame, ProductError> {
        cfg.validate()?;
        let remap_ego = game_remap("ego", &rm_ego)?;
        let remap_adv = game_remap("adv", &rm_adv)?;
        Ok(ProductGame { cfg, rm_ego, rm_adv, remap_ego, remap_adv })
    }

    pub fn cfg(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn rm_ego(&self) -> &RewardMachine {
        &self.rm_ego
    }

    pub fn rm_adv(&self) -> &RewardMachine {
        &self.rm_adv
    }

    pub fn actions(&self) -> &[Action] {
        &self.cfg.actions
    }

    /// Initial augmented state: grid reset composed with both machines'
    /// initial states.
    pub fn reset(&self, rng: &mut (impl Rng + ?Sized)) -> AugState {
        AugState {
            grid: grid::reset(&self.cfg, rng),
            v_ego: self.rm_ego.initial(),
            v_adv: self.rm_adv.initial(),
        }
    }

    /// One product step: sample the grid transition, label it, advance both
    /// machines on the shared label and emit their rewards.
    pub fn step(
        &self,
        aug: &AugState,
        a_ego: Action,
        a_adv: Action,
        rng: &mut (impl Rng + ?Sized),
    ) -> StepOutcome {
        let next_grid = grid::step(&self.cfg, aug.grid, a_ego, a_adv, rng);
        let label = grid::label(&self.cfg, aug.grid, a_ego, a_adv, next_grid);
        let (v_ego, r_ego) = self.rm_ego.step(aug.v_ego, remap_label(label, &self.remap_ego));
        let (v_adv, r_adv) = self.rm_adv.step(aug.v_adv, remap_label(label, &self.remap_adv));
        StepOutcome { next: AugState { grid: next_grid, v_ego, v_adv }, r_ego, r_adv, label }
    }

    /// Compact table key for an augmented state.
    pub fn encode_aug(&self, aug: &AugState) -> u64 {
        encode_grid(&self.cfg, &aug.grid)
            | ((aug.v_ego.0 as u64) << 40)
            | ((aug.v_adv.0 as u64) << 48)
    }
}

/// Compact table key for a bare grid state (used by the baselines).
pub fn encode_grid(cfg: &GridConfig, s: &GridState) -> u64 {
    let pos = |c: grid::Cell| (c.y as u64) * cfg.width as u64 + c.x as u64;
    pos(s.ego_pos)
        | (pos(s.adv_pos) << 16)
        | ((s.ego_home_destroyed as u64) << 32)
        | ((s.adv_home_destroyed as u64) << 33)
}

/// First divergence found by [`check_markovian_equivalence`].
#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    pub trajectory: usize,
    pub step: usize,
    pub agent: &'static str,
    pub stepwise: f64,
    pub replayed: f64,
}

/// Simulate random-action trajectories two ways — stepwise product rewards
/// versus replaying the recorded label sequence through the given machines
/// at the end — and verify the reward sequences agree elementwise. The
/// oracle machines are normally the game's own; passing modified copies
/// checks that the test itself can detect divergence.
pub fn check_markovian_equivalence(
    game: &ProductGame,
    oracle_ego: &RewardMachine,
    oracle_adv: &RewardMachine,
    n_trajectories: usize,
    horizon: usize,
    rng: &mut (impl Rng + ?Sized),
) -> Result<(), Divergence> {
    let remap_ego = game_remap("ego", oracle_ego)
        .expect("oracle machine must use the game propositions");
    let remap_adv = game_remap("adv", oracle_adv)
        .expect("oracle machine must use the game propositions");
    let actions = game.actions();
    let mut labels = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    for trajectory in 0..n_trajectories {
        labels.clear();
        rewards.clear();
        let mut aug = game.reset(rng);
        for _ in 0..horizon {
            let a_ego = actions[rng.random_range(0..actions.len())];
            let a_adv = actions[rng.random_range(0..actions.len())];
            let out = game.step(&aug, a_ego, a_adv, rng);
            labels.push(out.label);
            rewards.push((out.r_ego, out.r_adv));
            aug = out.next;
        }
        let ego_labels: Vec<Label> =
            labels.iter().map(|&l| remap_label(l, &remap_ego)).collect();
        let adv_labels: Vec<Label> =
            labels.iter().map(|&l| remap_label(l, &remap_adv)).collect();
        let replay_ego = oracle_ego.run(&ego_labels);
        let replay_adv = oracle_adv.run(&adv_labels);
        for (step, (&(r_e, r_a), (&p_e, &p_a))) in
            rewards.iter().zip(replay_ego.iter().zip(&replay_adv)).enumerate()
        {
            if r_e != p_e {
                return Err(Divergence {
                    trajectory,
                    step,
                    agent: "ego",
                    stepwise: r_e,
                    replayed: p_e,
                });
            }
            if r_a != p_a {
                return Err(Divergence {
                    trajectory,
                    step,
                    agent: "adv",
                    stepwise: r_a,
                    replayed: p_a,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;
    use crate::machine::parse_rm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const CAPTURE_EGO: &str =
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/rm/capture_ego.rm"));
    const CAPTURE_ADV: &str =
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/rm/capture_adv.rm"));
    const CASE1_MAP: &str =
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/maps/case1.map"));

    fn capture_game() -> ProductGame {
        let cfg = grid::parse_map(CASE1_MAP).unwrap();
        ProductGame::new(cfg, parse_rm(CAPTURE_EGO).unwrap(), parse_rm(CAPTURE_ADV).unwrap())
            .unwrap()
    }

    #[test]
    fn reset_composes_initials() {
        let game = capture_game();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let aug = game.reset(&mut rng);
        assert_eq!(aug.grid.ego_pos, game.cfg().ego_start);
        assert_eq!(aug.v_ego, game.rm_ego().initial());
        assert_eq!(aug.v_adv, game.rm_adv().initial());
    }

    #[test]
    fn reset_varies_grid_but_not_machine_states() {
        let cfg = {
            let mut c = grid::parse_map(CASE1_MAP).unwrap();
            c.adv_starts = vec![Cell::new(0, 5), Cell::new(5, 5)];
            c
        };
        let game =
            ProductGame::new(cfg, parse_rm(CAPTURE_EGO).unwrap(), parse_rm(CAPTURE_ADV).unwrap())
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..50 {
            let aug = game.reset(&mut rng);
            assert_eq!(aug.v_ego, game.rm_ego().initial());
            assert_eq!(aug.v_adv, game.rm_adv().initial());
            seen.insert(aug.grid.adv_pos);
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn rejects_mismatched_propositions() {
        let cfg = grid::parse_map(CASE1_MAP).unwrap();
        let foo = parse_rm(
            "states: s\ninitial: s\nprops: Foo\nedge: s -> s on Foo reward 1\n",
        )
        .unwrap();
        let err = ProductGame::new(cfg, foo, parse_rm(CAPTURE_ADV).unwrap()).unwrap_err();
        match err {
            ProductError::PropMismatch { agent, missing, unknown } => {
                assert_eq!(agent, "ego");
                assert_eq!(missing.len(), GAME_PROPS.len());
                assert_eq!(unknown, vec!["Foo".to_string()]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn step_advances_machines_on_events() {
        let game = capture_game();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // ego is one step right of its home; stepping left lands on it
        let mut aug = game.reset(&mut rng);
        assert_eq!(aug.grid.ego_pos, Cell::new(1, 0));
        let mut no_slip = game.clone();
        no_slip.cfg.slip_rate = 0.0;

        let out = no_slip.step(&aug, Action::Left, Action::Stay, &mut rng);
        assert!(out.label.contains(grid::P_EGO_AT_HOME));
        assert_eq!(no_slip.rm_ego().state_name(out.next.v_ego), "v1");
        assert_eq!(out.r_ego, 0.0);
        assert_eq!(out.r_adv, 0.0);

        // empowered ego meets the adversary: +1 / -1
        aug = out.next;
        aug.grid.adv_pos = Cell::new(0, 1); // adjacent to ego at (0, 0)
        let out = no_slip.step(&aug, Action::Stay, Action::Down, &mut rng);
        assert!(out.label.contains(grid::P_EGO_MEET_ADV));
        assert_eq!(out.r_ego, 1.0);
        assert_eq!(out.r_adv, -1.0);
        assert_eq!(no_slip.rm_ego().state_name(out.next.v_ego), "vend");

        // an empty label leaves both machines in place with zero reward
        let quiet = AugState {
            grid: GridState {
                ego_pos: Cell::new(3, 3),
                adv_pos: Cell::new(0, 5),
                ego_home_destroyed: false,
                adv_home_destroyed: false,
            },
            v_ego: no_slip.rm_ego().initial(),
            v_adv: no_slip.rm_adv().initial(),
        };
        let out = no_slip.step(&quiet, Action::Up, Action::Up, &mut rng);
        assert_eq!(out.label, Label::EMPTY);
        assert_eq!(out.next.v_ego, quiet.v_ego);
        assert_eq!(out.next.v_adv, quiet.v_adv);
        assert_eq!((out.r_ego, out.r_adv), (0.0, 0.0));
    }

    #[test]
    fn markovian_equivalence_holds() {
        let game = capture_game();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let result = check_markovian_equivalence(
            &game,
            game.rm_ego(),
            game.rm_adv(),
            500,
            60,
            &mut rng,
        );
        assert_eq!(result, Ok(()));
    }

    #[test]
    fn zero_horizon_is_vacuous() {
        let game = capture_game();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(
            check_markovian_equivalence(&game, game.rm_ego(), game.rm_adv(), 10, 0, &mut rng),
            Ok(())
        );
    }

    #[test]
    fn corrupted_oracle_is_detected() {
        let game = capture_game();
        // same structure but the capture reward rewired to 5
        let corrupted = parse_rm(&CAPTURE_EGO.replace("reward 1", "reward 5")).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let err = check_markovian_equivalence(&game, &corrupted, game.rm_adv(), 2000, 80, &mut rng)
            .unwrap_err();
        assert_eq!(err.agent, "ego");
        assert_eq!(err.stepwise, 1.0);
        assert_eq!(err.replayed, 5.0);
    }

    #[test]
    fn aug_keys_are_injective_over_reachable_states() {
        let game = capture_game();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut seen: std::collections::HashMap<u64, AugState> = Default::default();
        let mut aug = game.reset(&mut rng);
        for _ in 0..20_000 {
            let key = game.encode_aug(&aug);
            if let Some(prev) = seen.insert(key, aug) {
                assert_eq!(prev, aug, "key collision");
            }
            let a = game.actions()[rng.random_range(0..game.actions().len())];
            let b = game.actions()[rng.random_range(0..game.actions().len())];
            aug = game.step(&aug, a, b, &mut rng).next;
        }
    }
}
