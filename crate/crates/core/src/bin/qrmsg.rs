//! Command-line front end: train and evaluate the learners on configured
//! experiments, solve bimatrix games from matrix files, run the theory
//! probes, and lint machine/map/config files.

use anyhow::Context;
use clap::{Parser, Subcommand};
use qrmsg_core::analysis::{contraction_trials, GameFamily};
use qrmsg_core::equilibrium::{
    classify_point, is_epsilon_nash, lemke_howson, nash_value, StageGame,
};
use qrmsg_core::harness::{
    self, build_game, emit_csv, emit_plotdata, load_config, Algorithm, ExperimentConfig,
};
use qrmsg_core::learner::{self, QrmSgEnv};
use qrmsg_core::machine::parse_rm;
use qrmsg_core::{baselines, grid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qrmsg", version, about = "Nash-Q learning over reward-machine games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train per a config file and write the evaluation curves as CSV.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed list (repeatable).
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        /// Override the config's episode budget.
        #[arg(long)]
        episodes: Option<u32>,
        /// Override the config's algorithm (qrm-sg, nash-q, nash-qas).
        #[arg(long = "algo")]
        algorithm: Option<String>,
        /// CSV output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write smoothed gnuplot-style columns here.
        #[arg(long)]
        plotdata: Option<PathBuf>,
    },
    /// Train one seed quietly, then report the final greedy performance.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Seed to train and evaluate (default: the config's first seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<u32>,
        /// Number of greedy evaluation episodes.
        #[arg(long)]
        eval_episodes: Option<u32>,
    },
    /// Solve a bimatrix game given as a matrix file.
    SolveGame {
        /// File: first line `m n`, then m rows of the row player's payoffs,
        /// then m rows of the column player's.
        matrix: PathBuf,
        /// Label dropped first by the pivoting solver (1..=m+n).
        #[arg(long, default_value_t = 1)]
        label: usize,
    },
    /// Run the contraction probes on random zero-sum and identical-interest
    /// stage games.
    CheckTheory {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 4)]
        dims: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write per-trial rows `trial,family,dims,violation` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check reward machine, map and config files.
    Validate {
        #[arg(long = "rm")]
        rms: Vec<PathBuf>,
        #[arg(long = "map")]
        maps: Vec<PathBuf>,
        #[arg(long = "config")]
        configs: Vec<PathBuf>,
    },
}

// Exit codes: 0 success, 1 validation error, 2 runtime failure.
enum CliError {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    fn report(self) -> ExitCode {
        match self {
            CliError::Validation(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
            CliError::Runtime(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        }
    }
}

fn validation<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Validation(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}

fn apply_overrides(
    cfg: &mut ExperimentConfig,
    seeds: &[u64],
    episodes: Option<u32>,
    algorithm: Option<&str>,
) -> Result<(), CliError> {
    if !seeds.is_empty() {
        cfg.seeds = seeds.to_vec();
    }
    if let Some(e) = episodes {
        if e == 0 {
            return Err(validation(anyhow::anyhow!("episodes must be positive")));
        }
        cfg.episodes = e;
    }
    if let Some(a) = algorithm {
        cfg.algorithm = Algorithm::parse(a)
            .ok_or_else(|| validation(anyhow::anyhow!("unknown algorithm `{a}`")))?;
    }
    Ok(())
}

fn write_or_print(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, content)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(runtime),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config, seeds, episodes, algorithm, out, plotdata } => {
            let mut cfg = load_config(&config).map_err(validation)?;
            apply_overrides(&mut cfg, &seeds, episodes, algorithm.as_deref())?;
            let result = harness::run_experiment(&cfg).map_err(runtime)?;
            for s in &result.summaries {
                let conv = match s.convergence_episode {
                    Some(e) => format!("converged at episode {e}"),
                    None => "did not converge".into(),
                };
                let a3 = &s.assumption3;
                eprintln!(
                    "seed {}: {conv}; stage games sampled {}: global {:.3} saddle {:.3} neither {:.3}",
                    s.seed, a3.total, a3.global_optimum, a3.saddle_point, a3.neither
                );
            }
            write_or_print(out.as_deref(), &emit_csv(&result.points))?;
            if let Some(p) = plotdata {
                let smoothed = smooth_points(&result, cfg.smoothing_window);
                write_or_print(Some(&p), &emit_plotdata(&smoothed))?;
            }
            Ok(())
        }
        Command::Eval { config, seed, episodes, eval_episodes } => {
            let mut cfg = load_config(&config).map_err(validation)?;
            apply_overrides(&mut cfg, &[], episodes, None)?;
            let seed = seed.unwrap_or(cfg.seeds[0]);
            if let Some(n) = eval_episodes {
                if n == 0 {
                    return Err(validation(anyhow::anyhow!(
                        "eval_episodes must be positive"
                    )));
                }
                cfg.eval_episodes = n;
            }
            let game = build_game(&cfg).map_err(validation)?;
            let params = cfg.learn_params();
            // eval_every 0 trains straight through without pausing to measure
            let schedule = learner::TrainSchedule { eval_every: 0, ..cfg.schedule() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let result = match cfg.algorithm {
                Algorithm::QrmSg => {
                    learner::train(&mut QrmSgEnv::new(&game), &params, &schedule, &mut rng)
                }
                Algorithm::NashQ => {
                    baselines::nash_q_train(&game, &params, &schedule, &mut rng)
                }
                Algorithm::NashQas => {
                    baselines::nash_qas_train(&game, &params, &schedule, &mut rng)
                }
            }
            .map_err(runtime)?;
            let (ego, adv) = match cfg.algorithm {
                Algorithm::QrmSg => learner::evaluate(
                    &mut QrmSgEnv::new(&game),
                    &result.store,
                    cfg.eval_episodes,
                    &params,
                    &mut rng,
                ),
                Algorithm::NashQ => learner::evaluate(
                    &mut baselines::GridStateEnv::new(&game),
                    &result.store,
                    cfg.eval_episodes,
                    &params,
                    &mut rng,
                ),
                Algorithm::NashQas => learner::evaluate(
                    &mut baselines::EventBitsEnv::new(&game),
                    &result.store,
                    cfg.eval_episodes,
                    &params,
                    &mut rng,
                ),
            }
            .map_err(runtime)?;
            println!("seed {seed} episodes {} algorithm {}", cfg.episodes, cfg.algorithm);
            println!("ego {ego}");
            println!("adv {adv}");
            Ok(())
        }
        Command::SolveGame { matrix, label } => {
            let text = std::fs::read_to_string(&matrix)
                .with_context(|| format!("reading {}", matrix.display()))
                .map_err(validation)?;
            let game = parse_matrix_file(&text).map_err(validation)?;
            let profile = lemke_howson(&game, label).map_err(runtime)?;
            let (m, n) = (game.rows(), game.cols());
            println!("x {}", join(&profile.x));
            println!("y {}", join(&profile.y));
            println!("payoff_row {}", nash_value(m, n, game.a_flat(), &profile));
            println!("payoff_col {}", nash_value(m, n, game.b_flat(), &profile));
            println!("epsilon_nash_1e-8 {}", is_epsilon_nash(&game, &profile, 1e-8));
            println!("classification {:?}", classify_point(&game, &profile));
            Ok(())
        }
        Command::CheckTheory { trials, dims, seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut rows = String::from("trial,family,dims,violation\n");
            let mut worst = f64::NEG_INFINITY;
            for family in [GameFamily::ZeroSum, GameFamily::IdenticalInterest] {
                let name = match family {
                    GameFamily::ZeroSum => "zero-sum",
                    GameFamily::IdenticalInterest => "identical-interest",
                };
                let samples = contraction_trials(trials, family, dims, &mut rng);
                let max = samples.iter().fold(f64::NEG_INFINITY, |a, t| a.max(t.violation));
                worst = worst.max(max);
                for (i, t) in samples.iter().enumerate() {
                    rows.push_str(&format!(
                        "{i},{name},{}x{},{}\n",
                        t.rows, t.cols, t.violation
                    ));
                }
                println!("{name}: {trials} trials, max violation {max:.3e}");
            }
            if let Some(p) = out {
                write_or_print(Some(&p), &rows)?;
            }
            if worst > 1e-9 {
                return Err(CliError::Runtime(anyhow::anyhow!(
                    "contraction bound violated by {worst:.3e}"
                )));
            }
            println!("contraction bound holds (tolerance 1e-9)");
            Ok(())
        }
        Command::Validate { rms, maps, configs } => {
            if rms.is_empty() && maps.is_empty() && configs.is_empty() {
                return Err(validation(anyhow::anyhow!(
                    "nothing to validate; pass --rm, --map or --config"
                )));
            }
            for p in &rms {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))
                    .map_err(validation)?;
                let rm = parse_rm(&text)
                    .with_context(|| format!("{}", p.display()))
                    .map_err(validation)?;
                println!(
                    "{}: ok ({} states, {} propositions, deterministic)",
                    p.display(),
                    rm.state_count(),
                    rm.prop_names().len()
                );
            }
            for p in &maps {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))
                    .map_err(validation)?;
                let cfg = grid::parse_map(&text)
                    .with_context(|| format!("{}", p.display()))
                    .map_err(validation)?;
                println!(
                    "{}: ok ({}x{}, {} adversary start(s))",
                    p.display(),
                    cfg.width,
                    cfg.height,
                    cfg.adv_starts.len()
                );
            }
            for p in &configs {
                let cfg = load_config(p).map_err(validation)?;
                build_game(&cfg).map_err(validation)?;
                println!("{}: ok (algorithm {}, {} seed(s))", p.display(), cfg.algorithm, cfg.seeds.len());
            }
            Ok(())
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn smooth_points(
    result: &harness::ExperimentResult,
    window: usize,
) -> Vec<harness::CurvePoint> {
    let mut out = Vec::with_capacity(result.points.len());
    let mut seeds: Vec<u64> = result.points.iter().map(|p| p.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    for seed in seeds {
        for (agent, curve) in [
            (learner::AgentId::Ego, result.ego_curve(seed)),
            (learner::AgentId::Adv, result.adv_curve(seed)),
        ] {
            let values: Vec<f64> = curve.iter().map(|&(_, r)| r).collect();
            for (&(episode, _), reward) in
                curve.iter().zip(harness::smooth(&values, window))
            {
                out.push(harness::CurvePoint { episode, agent, reward, seed });
            }
        }
    }
    out
}

fn parse_matrix_file(text: &str) -> anyhow::Result<StageGame> {
    let mut numbers = text
        .split('#')
        .next()
        .unwrap_or("")
        .lines()
        .flat_map(|l| l.split('#').next().unwrap_or("").split_whitespace());
    let mut next = |what: &str| -> anyhow::Result<f64> {
        numbers
            .next()
            .with_context(|| format!("matrix file ended before {what}"))?
            .parse::<f64>()
            .with_context(|| format!("bad number in {what}"))
    };
    let m = next("header")? as usize;
    let n = next("header")? as usize;
    anyhow::ensure!(m >= 1 && n >= 1, "dimensions must be at least 1x1");
    let mut read_matrix = |name: &str| -> anyhow::Result<Vec<f64>> {
        (0..m * n).map(|_| next(name)).collect()
    };
    let a = read_matrix("row player matrix")?;
    let b = read_matrix("column player matrix")?;
    StageGame::from_flat(m, n, &a, &b).map_err(|e| anyhow::anyhow!(e))
}
