//! Experiment orchestration: config files, per-seed training runs with a
//! fixed evaluation cadence, convergence summaries, curve smoothing, and
//! CSV/plot-data emission.

use crate::analysis::{assumption3_stats, Assumption3Stats};
use crate::baselines::{GridStateEnv, EventBitsEnv};
use crate::grid::{self, Action, GridConfig};
use crate::learner::{
    self, AgentId, AlphaMode, LearnParams, QrmSgEnv, TrainResult, TrainSchedule,
};
use crate::machine::{parse_rm, RewardMachine};
use crate::product::ProductGame;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Ego evaluation reward that counts as solving the task.
pub const CONVERGENCE_THRESHOLD: f64 = 0.95;
/// Consecutive checkpoints the threshold must hold for.
pub const CONVERGENCE_SUSTAIN: usize = 20;

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum Algorithm {
    QrmSg,
    NashQ,
    NashQas,
}

impl Algorithm {
    pub fn parse(s: &str) -> Option<Algorithm> {
        match s {
            "qrm-sg" => Some(Algorithm::QrmSg),
            "nash-q" => Some(Algorithm::NashQ),
            "nash-qas" => Some(Algorithm::NashQas),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::QrmSg => "qrm-sg",
            Algorithm::NashQ => "nash-q",
            Algorithm::NashQas => "nash-qas",
        })
    }
}

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {msg}")]
    Invalid { path: PathBuf, msg: String },
}

/// Everything one experiment needs, as read from a `key = value` file.
/// Paths are resolved relative to the config file's directory.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub map: PathBuf,
    pub rm_ego: PathBuf,
    pub rm_adv: PathBuf,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub episodes: u32,
    pub eval_every: u32,
    pub eval_episodes: u32,
    pub gamma: f64,
    pub epsilon: f64,
    pub epsilon_decay: Option<f64>,
    pub epsilon_floor: f64,
    pub alpha: AlphaMode,
    pub eplength: u32,
    pub q0: f64,
    pub completion_reward: Option<f64>,
    pub smoothing_window: usize,
    pub slip_rate: f64,
    pub capture_distance: f64,
    pub allow_stay: bool,
    pub slip_includes_intended: bool,
    pub ego_home_destructible: bool,
    pub adv_home_destructible: bool,
}

impl Default for ExperimentConfig {
    fn default() -> ExperimentConfig {
        ExperimentConfig {
            map: PathBuf::new(),
            rm_ego: PathBuf::new(),
            rm_adv: PathBuf::new(),
            algorithm: Algorithm::QrmSg,
            seeds: vec![1],
            episodes: 16_000,
            eval_every: 80,
            eval_episodes: 10,
            gamma: 0.9,
            epsilon: 0.25,
            epsilon_decay: None,
            epsilon_floor: 0.05,
            alpha: AlphaMode::VisitCount,
            eplength: 200,
            q0: 0.0,
            completion_reward: Some(1.0),
            smoothing_window: 6,
            slip_rate: 0.005,
            capture_distance: 2.0,
            allow_stay: false,
            slip_includes_intended: false,
            ego_home_destructible: false,
            adv_home_destructible: false,
        }
    }
}

impl ExperimentConfig {
    pub fn learn_params(&self) -> LearnParams {
        LearnParams {
            gamma: self.gamma,
            epsilon: self.epsilon,
            alpha_mode: self.alpha,
            eplength: self.eplength,
            q0: self.q0,
            completion_reward: self.completion_reward,
        }
    }

    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule {
            episodes: self.episodes,
            eval_every: self.eval_every,
            eval_episodes: self.eval_episodes,
            epsilon_decay: self.epsilon_decay.map(|rate| (rate, self.epsilon_floor)),
        }
    }

    fn validate(&self, path: &Path) -> Result<(), ConfigError> {
        let fail = |msg: String| ConfigError::Invalid { path: path.to_path_buf(), msg };
        if self.episodes == 0 {
            return Err(fail("episodes must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(fail("eval_every must be positive".into()));
        }
        if self.eval_episodes == 0 {
            return Err(fail("eval_episodes must be positive".into()));
        }
        if self.smoothing_window == 0 {
            return Err(fail("smoothing_window must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(fail("seeds must be nonempty".into()));
        }
        for p in [&self.map, &self.rm_ego, &self.rm_adv] {
            if !p.is_file() {
                return Err(fail(format!("referenced file {} does not exist", p.display())));
            }
        }
        self.learn_params().validate().map_err(|e| fail(e.to_string()))?;
        Ok(())
    }
}

/// Parse and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut cfg = ExperimentConfig::default();
    let mut saw = std::collections::HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| ConfigError::Parse {
            path: path.to_path_buf(),
            line: lineno,
            msg,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        if !saw.insert(key.to_string()) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        let bad = |what: &str| err(format!("invalid {what} `{value}`"));
        match key {
            "map" => cfg.map = dir.join(value),
            "rm_ego" => cfg.rm_ego = dir.join(value),
            "rm_adv" => cfg.rm_adv = dir.join(value),
            "algorithm" => {
                cfg.algorithm =
                    Algorithm::parse(value).ok_or_else(|| bad("algorithm"))?;
            }
            "seeds" => {
                cfg.seeds = value
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<u64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("seed list"))?;
            }
            "episodes" => cfg.episodes = value.parse().map_err(|_| bad("episodes"))?,
            "eval_every" => cfg.eval_every = value.parse().map_err(|_| bad("eval_every"))?,
            "eval_episodes" => {
                cfg.eval_episodes = value.parse().map_err(|_| bad("eval_episodes"))?;
            }
            "gamma" => cfg.gamma = value.parse().map_err(|_| bad("gamma"))?,
            "epsilon" => cfg.epsilon = value.parse().map_err(|_| bad("epsilon"))?,
            "epsilon_decay" => {
                cfg.epsilon_decay = match value {
                    "none" => None,
                    v => Some(v.parse().map_err(|_| bad("epsilon_decay"))?),
                };
            }
            "epsilon_floor" => {
                cfg.epsilon_floor = value.parse().map_err(|_| bad("epsilon_floor"))?;
            }
            "alpha" => {
                cfg.alpha = match value {
                    "visit-count" => AlphaMode::VisitCount,
                    v => AlphaMode::Constant(v.parse().map_err(|_| bad("alpha"))?),
                };
            }
            "eplength" => cfg.eplength = value.parse().map_err(|_| bad("eplength"))?,
            "q0" => cfg.q0 = value.parse().map_err(|_| bad("q0"))?,
            "completion_reward" => {
                cfg.completion_reward = match value {
                    "none" => None,
                    v => Some(v.parse().map_err(|_| bad("completion_reward"))?),
                };
            }
            "smoothing_window" => {
                cfg.smoothing_window = value.parse().map_err(|_| bad("smoothing_window"))?;
            }
            "slip_rate" => cfg.slip_rate = value.parse().map_err(|_| bad("slip_rate"))?,
            "capture_distance" => {
                cfg.capture_distance = value.parse().map_err(|_| bad("capture_distance"))?;
            }
            "allow_stay" => cfg.allow_stay = value.parse().map_err(|_| bad("allow_stay"))?,
            "slip_includes_intended" => {
                cfg.slip_includes_intended =
                    value.parse().map_err(|_| bad("slip_includes_intended"))?;
            }
            "ego_home_destructible" => {
                cfg.ego_home_destructible =
                    value.parse().map_err(|_| bad("ego_home_destructible"))?;
            }
            "adv_home_destructible" => {
                cfg.adv_home_destructible =
                    value.parse().map_err(|_| bad("adv_home_destructible"))?;
            }
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    cfg.validate(path)?;
    Ok(cfg)
}

#[derive(Error, Debug)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Asset { path: PathBuf, msg: String },
    #[error(transparent)]
    Learn(#[from] learner::LearnError),
}

fn read_asset(path: &Path) -> Result<String, RunError> {
    std::fs::read_to_string(path)
        .map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

/// Build the product game an experiment config describes.
pub fn build_game(cfg: &ExperimentConfig) -> Result<ProductGame, RunError> {
    let asset_err = |path: &Path, msg: String| RunError::Asset { path: path.to_path_buf(), msg };
    let mut grid_cfg: GridConfig = grid::parse_map(&read_asset(&cfg.map)?)
        .map_err(|e| asset_err(&cfg.map, e.to_string()))?;
    grid_cfg.slip_rate = cfg.slip_rate;
    grid_cfg.capture_distance = cfg.capture_distance;
    grid_cfg.actions =
        if cfg.allow_stay { Action::FIVE.to_vec() } else { Action::FOUR.to_vec() };
    grid_cfg.slip_includes_intended = cfg.slip_includes_intended;
    grid_cfg.ego_home_destructible = cfg.ego_home_destructible;
    grid_cfg.adv_home_destructible = cfg.adv_home_destructible;
    grid_cfg.validate().map_err(|e| asset_err(&cfg.map, e.to_string()))?;
    let rm_ego: RewardMachine = parse_rm(&read_asset(&cfg.rm_ego)?)
        .map_err(|e| asset_err(&cfg.rm_ego, e.to_string()))?;
    let rm_adv = parse_rm(&read_asset(&cfg.rm_adv)?)
        .map_err(|e| asset_err(&cfg.rm_adv, e.to_string()))?;
    ProductGame::new(grid_cfg, rm_ego, rm_adv)
        .map_err(|e| asset_err(&cfg.map, e.to_string()))
}

/// One evaluation checkpoint of one agent's curve.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub episode: u32,
    pub agent: AgentId,
    pub reward: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct SeedSummary {
    pub seed: u64,
    /// Episode of the first checkpoint from which the ego evaluation reward
    /// stayed at or above the threshold for the full sustain window.
    pub convergence_episode: Option<u32>,
    pub assumption3: Assumption3Stats,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentResult {
    pub points: Vec<CurvePoint>,
    pub summaries: Vec<SeedSummary>,
}

impl ExperimentResult {
    /// The (episode, reward) ego curve of one seed, checkpoint order.
    pub fn ego_curve(&self, seed: u64) -> Vec<(u32, f64)> {
        self.points
            .iter()
            .filter(|p| p.seed == seed && p.agent == AgentId::Ego)
            .map(|p| (p.episode, p.reward))
            .collect()
    }

    pub fn adv_curve(&self, seed: u64) -> Vec<(u32, f64)> {
        self.points
            .iter()
            .filter(|p| p.seed == seed && p.agent == AgentId::Adv)
            .map(|p| (p.episode, p.reward))
            .collect()
    }

    pub fn summary(&self, seed: u64) -> Option<&SeedSummary> {
        self.summaries.iter().find(|s| s.seed == seed)
    }
}

/// First episode from which `threshold` holds for `sustain` consecutive
/// checkpoints of the curve, if it ever does.
pub fn convergence_episode(
    curve: &[(u32, f64)],
    threshold: f64,
    sustain: usize,
) -> Option<u32> {
    if sustain == 0 || curve.len() < sustain {
        return None;
    }
    'outer: for start in 0..=(curve.len() - sustain) {
        for (_, reward) in &curve[start..start + sustain] {
            if *reward < threshold {
                continue 'outer;
            }
        }
        return Some(curve[start].0);
    }
    None
}

fn train_one(
    game: &ProductGame,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<TrainResult, learner::LearnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = cfg.learn_params();
    let schedule = cfg.schedule();
    match cfg.algorithm {
        Algorithm::QrmSg => {
            learner::train(&mut QrmSgEnv::new(game), &params, &schedule, &mut rng)
        }
        Algorithm::NashQ => {
            learner::train(&mut GridStateEnv::new(game), &params, &schedule, &mut rng)
        }
        Algorithm::NashQas => {
            learner::train(&mut EventBitsEnv::new(game), &params, &schedule, &mut rng)
        }
    }
}

/// Run the experiment: train every seed (seeds fan out across worker
/// threads), evaluate on the configured cadence, and assemble curve points
/// ordered by (seed, episode).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, RunError> {
    let game = build_game(cfg)?;
    let mut ordered_seeds = cfg.seeds.clone();
    ordered_seeds.sort_unstable();
    ordered_seeds.dedup();

    let mut slots: Vec<Option<Result<TrainResult, learner::LearnError>>> =
        (0..ordered_seeds.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (slot, &seed) in slots.iter_mut().zip(&ordered_seeds) {
            let game = &game;
            scope.spawn(move || {
                *slot = Some(train_one(game, cfg, seed));
            });
        }
    });

    let mut result = ExperimentResult::default();
    for (slot, seed) in slots.into_iter().zip(ordered_seeds) {
        let run = slot.expect("worker finished")?;
        let curve: Vec<(u32, f64)> =
            run.checkpoints.iter().map(|c| (c.episode, c.ego)).collect();
        result.summaries.push(SeedSummary {
            seed,
            convergence_episode: convergence_episode(
                &curve,
                CONVERGENCE_THRESHOLD,
                CONVERGENCE_SUSTAIN,
            ),
            assumption3: assumption3_stats(&run.stage_log.games),
        });
        for c in run.checkpoints {
            result.points.push(CurvePoint {
                episode: c.episode,
                agent: AgentId::Ego,
                reward: c.ego,
                seed,
            });
            result.points.push(CurvePoint {
                episode: c.episode,
                agent: AgentId::Adv,
                reward: c.adv,
                seed,
            });
        }
    }
    Ok(result)
}

/// The four exploration settings compared in the epsilon study, as
/// (label, config) pairs derived from a base config.
pub fn epsilon_study_configs(base: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
    let mut out = Vec::new();
    for eps in [0.05, 0.25, 0.90] {
        let mut cfg = base.clone();
        cfg.epsilon = eps;
        cfg.epsilon_decay = None;
        out.push((format!("eps{eps}"), cfg));
    }
    let mut decay = base.clone();
    decay.epsilon = 0.90;
    decay.epsilon_decay = Some(0.9986);
    decay.epsilon_floor = 0.05;
    out.push(("decay".into(), decay));
    out
}

/// Run the epsilon study on a base config: the same experiment with
/// epsilon 0.05, 0.25, 0.90 and the decaying schedule.
pub fn epsilon_study(
    base: &ExperimentConfig,
) -> Result<Vec<(String, ExperimentResult)>, RunError> {
    epsilon_study_configs(base)
        .into_iter()
        .map(|(label, cfg)| run_experiment(&cfg).map(|r| (label, r)))
        .collect()
}

/// Trailing rolling mean; the first `window - 1` points average over the
/// available prefix.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / window.min(i + 1) as f64);
    }
    out
}

fn agent_name(a: AgentId) -> &'static str {
    match a {
        AgentId::Ego => "ego",
        AgentId::Adv => "adv",
    }
}

/// Render curve points as CSV with header `episode,agent,reward,seed`.
pub fn emit_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("episode,agent,reward,seed\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.episode,
            agent_name(p.agent),
            p.reward,
            p.seed
        ));
    }
    out
}

/// Parse the CSV format produced by [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<CurvePoint>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some("episode,agent,reward,seed") => {}
        other => return Err(format!("bad header {other:?}")),
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(format!("line {}: expected 4 fields", i + 2));
        }
        let agent = match fields[1] {
            "ego" => AgentId::Ego,
            "adv" => AgentId::Adv,
            other => return Err(format!("line {}: bad agent `{other}`", i + 2)),
        };
        points.push(CurvePoint {
            episode: fields[0].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
            agent,
            reward: fields[2].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
            seed: fields[3].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
        });
    }
    Ok(points)
}

/// Render curves as gnuplot-style whitespace columns, one block per seed:
/// `episode ego adv`.
pub fn emit_plotdata(points: &[CurvePoint]) -> String {
    let mut seeds: Vec<u64> = points.iter().map(|p| p.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let mut out = String::new();
    for seed in seeds {
        out.push_str(&format!("# seed {seed}\n# episode ego adv\n"));
        let mut episodes: Vec<u32> = points
            .iter()
            .filter(|p| p.seed == seed)
            .map(|p| p.episode)
            .collect();
        episodes.sort_unstable();
        episodes.dedup();
        for e in episodes {
            let find = |agent: AgentId| {
                points
                    .iter()
                    .find(|p| p.seed == seed && p.episode == e && p.agent == agent)
                    .map(|p| p.reward)
                    .unwrap_or(f64::NAN)
            };
            out.push_str(&format!("{e} {} {}\n", find(AgentId::Ego), find(AgentId::Adv)));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn configs_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
    }

    fn write_temp(name: &str, content: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("qrmsg-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn loads_the_shipped_case_configs() {
        let cfg = load_config(&configs_dir().join("case1.cfg")).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::QrmSg);
        assert_eq!(cfg.eval_every, 80);
        assert_eq!(cfg.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.smoothing_window, 6, "defaults apply for omitted keys");
        for name in ["case2.cfg", "case3.cfg", "grid12.cfg", "smoke.cfg"] {
            load_config(&configs_dir().join(name)).unwrap();
            }
    }

    #[test]
    fn shipped_games_build() {
        for name in ["case1.cfg", "case2.cfg", "case3.cfg", "grid12.cfg"] {
            let cfg = load_config(&configs_dir().join(name)).unwrap();
            build_game(&cfg).unwrap();
        }
    }

    #[test]
    fn config_errors() {
        let maps = configs_dir().join("maps/case1.map");
        let rm = configs_dir().join("rm/task1_ego.rm");
        let base = format!(
            "map = {}\nrm_ego = {}\nrm_adv = {}\n",
            maps.display(),
            rm.display(),
            rm.display()
        );
        let bad = write_temp("bad_eval.cfg", &format!("{base}eval_every = 0\n"));
        assert!(matches!(load_config(&bad), Err(ConfigError::Invalid { .. })));

        let unknown = write_temp("unknown.cfg", &format!("{base}frobnicate = 3\n"));
        let err = load_config(&unknown).unwrap_err();
        assert!(err.to_string().contains("unknown key"), "{err}");

        let mistyped = write_temp("mistyped.cfg", &format!("{base}episodes = soon\n"));
        assert!(matches!(load_config(&mistyped), Err(ConfigError::Parse { line: 4, .. })));

        assert!(matches!(
            load_config(Path::new("/nonexistent/nowhere.cfg")),
            Err(ConfigError::Io { .. })
        ));

        let missing_asset = write_temp(
            "missing_asset.cfg",
            "map = gone.map\nrm_ego = gone.rm\nrm_adv = gone.rm\n",
        );
        assert!(matches!(load_config(&missing_asset), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn smoothing_examples() {
        assert_eq!(smooth(&[3.0, 1.0, 4.0], 1), vec![3.0, 1.0, 4.0]);
        assert_eq!(smooth(&[2.0; 5], 3), vec![2.0; 5]);
        let curve = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let smoothed = smooth(&curve, 3);
        let expected = [0.0, 0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (a, b) in smoothed.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip_and_shapes() {
        assert_eq!(emit_csv(&[]), "episode,agent,reward,seed\n");
        let points = vec![
            CurvePoint { episode: 80, agent: AgentId::Ego, reward: 0.5, seed: 3 },
            CurvePoint { episode: 80, agent: AgentId::Adv, reward: -0.25, seed: 3 },
        ];
        let csv = emit_csv(&points);
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(parse_csv(&csv).unwrap(), points);
    }

    #[test]
    fn plotdata_has_one_block_per_seed() {
        let points = vec![
            CurvePoint { episode: 80, agent: AgentId::Ego, reward: 1.0, seed: 1 },
            CurvePoint { episode: 80, agent: AgentId::Adv, reward: 0.0, seed: 1 },
            CurvePoint { episode: 80, agent: AgentId::Ego, reward: 0.5, seed: 2 },
            CurvePoint { episode: 80, agent: AgentId::Adv, reward: 0.5, seed: 2 },
        ];
        let out = emit_plotdata(&points);
        assert_eq!(out.matches("# seed").count(), 2);
        assert!(out.contains("80 1 0\n"));
        assert!(out.contains("80 0.5 0.5\n"));
    }

    #[test]
    fn convergence_detection() {
        let curve: Vec<(u32, f64)> =
            (1..=30).map(|i| (i * 80, if i >= 8 { 1.0 } else { 0.0 })).collect();
        assert_eq!(convergence_episode(&curve, 0.95, 20), Some(640));
        assert_eq!(convergence_episode(&curve, 0.95, 40), None);
        let never: Vec<(u32, f64)> = (1..=30).map(|i| (i * 80, 0.5)).collect();
        assert_eq!(convergence_episode(&never, 0.95, 20), None);
    }

    #[test]
    fn epsilon_study_variants() {
        let mut base = ExperimentConfig::default();
        base.epsilon = 0.25;
        let variants = epsilon_study_configs(&base);
        assert_eq!(variants.len(), 4);
        assert_eq!(variants[0].1.epsilon, 0.05);
        assert_eq!(variants[3].1.epsilon, 0.90);
        assert_eq!(variants[3].1.epsilon_decay, Some(0.9986));
        // the decay schedule reaches its floor exactly
        let mut eps = 0.90f64;
        for _ in 0..10_000 {
            eps = (eps * 0.9986).max(0.05);
        }
        assert_eq!(eps, 0.05);
    }

    #[test]
    fn experiments_are_deterministic() {
        let mut cfg = load_config(&configs_dir().join("smoke.cfg")).unwrap();
        cfg.seeds = vec![1, 2];
        cfg.episodes = 40;
        cfg.eval_every = 20;
        cfg.eval_episodes = 2;
        cfg.eplength = 25;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(emit_csv(&a.points), emit_csv(&b.points));
        assert_eq!(a.points.len(), 2 * 2 * 2, "2 seeds x 2 checkpoints x 2 agents");
        // seed order in the file does not matter
        cfg.seeds = vec![2, 1];
        let c = run_experiment(&cfg).unwrap();
        assert_eq!(emit_csv(&a.points), emit_csv(&c.points));
    }

    proptest! {
        #[test]
        fn raising_rewards_never_delays_convergence(
            rewards in proptest::collection::vec(0.0f64..1.2, 25..60),
            boosts in proptest::collection::vec(0.0f64..0.5, 60),
        ) {
            let curve: Vec<(u32, f64)> = rewards
                .iter()
                .enumerate()
                .map(|(i, &r)| ((i as u32 + 1) * 80, r))
                .collect();
            let boosted: Vec<(u32, f64)> = curve
                .iter()
                .zip(&boosts)
                .map(|(&(e, r), &b)| (e, r + b))
                .collect();
            let before = convergence_episode(&curve, 0.95, 20);
            let after = convergence_episode(&boosted, 0.95, 20);
            match (before, after) {
                (Some(b), Some(a)) => prop_assert!(a <= b),
                (Some(_), None) => prop_assert!(false, "boost lost convergence"),
                _ => {}
            }
        }

        #[test]
        fn csv_round_trips(
            entries in proptest::collection::vec(
                (1u32..100, any::<bool>(), -2.0f64..2.0, 0u64..10), 0..30),
        ) {
            let points: Vec<CurvePoint> = entries
                .into_iter()
                .map(|(episode, ego, reward, seed)| CurvePoint {
                    episode: episode * 80,
                    agent: if ego { AgentId::Ego } else { AgentId::Adv },
                    reward,
                    seed,
                })
                .collect();
            prop_assert_eq!(parse_csv(&emit_csv(&points)).unwrap(), points);
        }
    }
}
