use qrmsg_core::harness::{build_game, load_config};
use qrmsg_core::learner::{run_episode, Counters, LearnParams, QStore, QrmSgEnv};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

fn main() {
    let cfg_path = std::env::args().nth(1).unwrap();
    let episodes: u32 = std::env::args().nth(2).unwrap().parse().unwrap();
    let cfg = load_config(Path::new(&cfg_path)).unwrap();
    let game = build_game(&cfg).unwrap();
    let mut env = QrmSgEnv::new(&game);
    let mut qs = QStore::new(4, 4, cfg.q0);
    let mut counters = Counters::default();
    let params = cfg.learn_params();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut ego_wins, mut adv_wins, mut steps) = (0u32, 0u32, 0u64);
    for ep in 1..=episodes {
        let rec = run_episode(&mut env, &mut qs, &mut counters, &params, None, &mut rng);
        if rec.reward_ego >= 1.0 { ego_wins += 1; }
        if rec.reward_adv >= 1.0 { adv_wins += 1; }
        steps += rec.steps as u64;
        if ep % 500 == 0 {
            println!(
                "ep {ep}: ego_wins {ego_wins} adv_wins {adv_wins} mean_len {:.0} keys {}",
                steps as f64 / 500.0, qs.ego.q_ego.len()
            );
            ego_wins = 0; adv_wins = 0; steps = 0;
        }
    }
}
