//! Instrumentation for the convergence theory: the max-norm distance
//! between Q-function pairs, the one-step backup operator, empirical
//! contraction probes over game families where the required stage-game
//! structure holds, and classification statistics for sampled stage games.

use crate::equilibrium::{self, NashProfile, PointClass, StageGame};
use crate::learner::{nash_backup, AgentId, AgentStore, QTable};
use rand::Rng;

/// Where the max-norm distance between two stores is attained.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct DistanceWitness {
    pub table: AgentId,
    pub key: u64,
    pub a_ego: usize,
    pub a_adv: usize,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct QDistanceReport {
    pub distance: f64,
    pub witness: Option<DistanceWitness>,
}

fn table_distance(a: &QTable, b: &QTable, id: AgentId, best: &mut QDistanceReport) {
    let (n_ego, n_adv) = a.dims();
    let keys: std::collections::BTreeSet<u64> = a.keys().chain(b.keys()).collect();
    for key in keys {
        for i in 0..n_ego {
            for j in 0..n_adv {
                let d = (a.get(key, i, j) - b.get(key, i, j)).abs();
                if d > best.distance {
                    best.distance = d;
                    best.witness =
                        Some(DistanceWitness { table: id, key, a_ego: i, a_adv: j });
                }
            }
        }
    }
}

/// Max over both tables, all states and all joint actions of the absolute
/// Q-value difference. Missing entries read as each table's initial value.
pub fn q_distance(a: &AgentStore, b: &AgentStore) -> QDistanceReport {
    let mut report = QDistanceReport { distance: 0.0, witness: None };
    table_distance(&a.q_ego, &b.q_ego, AgentId::Ego, &mut report);
    table_distance(&a.q_adv, &b.q_adv, AgentId::Adv, &mut report);
    report
}

/// The one-step backup target `r + gamma * qbar(next)` for both of an
/// agent's tables: what a learning-rate-one update would write.
pub fn apply_f(
    store: &AgentStore,
    r_ego: f64,
    r_adv: f64,
    next_key: u64,
    gamma: f64,
) -> (f64, f64) {
    let (qbar_ego, qbar_adv) = nash_backup(store, next_key);
    (r_ego + gamma * qbar_ego, r_adv + gamma * qbar_adv)
}

/// Stage-game families on which the backup operator provably contracts.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum GameFamily {
    /// Both agents share one payoff matrix; the global optimum is its
    /// maximum entry.
    IdenticalInterest,
    /// The adversary's payoffs are the negated ego payoffs; every
    /// equilibrium is a saddle point.
    ZeroSum,
}

/// One Q-table pair (both agents' payoffs at a single state) drawn from a
/// family.
#[derive(Clone, Debug)]
pub struct FamilyGame {
    pub game: StageGame,
    pub family: GameFamily,
}

impl FamilyGame {
    pub fn sample(
        family: GameFamily,
        m: usize,
        n: usize,
        rng: &mut (impl Rng + ?Sized),
    ) -> FamilyGame {
        let a: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = match family {
            GameFamily::IdenticalInterest => a.clone(),
            GameFamily::ZeroSum => a.iter().map(|v| -v).collect(),
        };
        FamilyGame { game: StageGame::from_flat(m, n, &a, &b).unwrap(), family }
    }

    /// The equilibrium of the appropriate type: the entrywise maximum for
    /// identical-interest games, a pivoting solution (necessarily a saddle)
    /// for zero-sum games.
    pub fn equilibrium(&self) -> NashProfile {
        match self.family {
            GameFamily::IdenticalInterest => {
                let (m, n) = (self.game.rows(), self.game.cols());
                let mut best = (0, 0);
                for i in 0..m {
                    for j in 0..n {
                        if self.game.a(i, j) > self.game.a(best.0, best.1) {
                            best = (i, j);
                        }
                    }
                }
                NashProfile::pure(m, best.0, n, best.1)
            }
            GameFamily::ZeroSum => equilibrium::solve(&self.game),
        }
    }
}

/// Backup-difference bound violation for one pair of same-shape games:
/// `max_agent |pi q pi - pi' q' pi'| - max_agent ||q - q'||_inf`. The
/// contraction property makes this nonpositive up to solver precision.
pub fn contraction_violation(p: &FamilyGame, q: &FamilyGame) -> f64 {
    let (m, n) = (p.game.rows(), p.game.cols());
    assert_eq!((m, n), (q.game.rows(), q.game.cols()), "pairs must share a shape");
    let ep = p.equilibrium();
    let eq = q.equilibrium();
    let mut value_gap = 0.0f64;
    for (pm, qm) in [
        (p.game.a_flat(), q.game.a_flat()),
        (p.game.b_flat(), q.game.b_flat()),
    ] {
        let vp = equilibrium::nash_value(m, n, pm, &ep);
        let vq = equilibrium::nash_value(m, n, qm, &eq);
        value_gap = value_gap.max((vp - vq).abs());
    }
    let mut distance = 0.0f64;
    for (pm, qm) in [
        (p.game.a_flat(), q.game.a_flat()),
        (p.game.b_flat(), q.game.b_flat()),
    ] {
        for (a, b) in pm.iter().zip(qm) {
            distance = distance.max((a - b).abs());
        }
    }
    value_gap - distance
}

/// One measured pair in a contraction probe.
#[derive(Copy, Clone, Debug)]
pub struct ContractionTrial {
    pub family: GameFamily,
    pub rows: usize,
    pub cols: usize,
    pub violation: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ContractionReport {
    pub trials: usize,
    pub max_violation: f64,
}

/// Sample pairs of random stage games within a family and measure the
/// backup-difference bound violation of each pair. General-sum games are
/// deliberately excluded: the bound only holds where the stage games have
/// the required structure.
pub fn contraction_trials(
    n_trials: usize,
    family: GameFamily,
    max_dim: usize,
    rng: &mut (impl Rng + ?Sized),
) -> Vec<ContractionTrial> {
    let mut out = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let m = rng.random_range(2..=max_dim.max(2));
        let n = rng.random_range(2..=max_dim.max(2));
        let p = FamilyGame::sample(family, m, n, rng);
        let q = FamilyGame::sample(family, m, n, rng);
        out.push(ContractionTrial {
            family,
            rows: m,
            cols: n,
            violation: contraction_violation(&p, &q),
        });
    }
    out
}

/// The worst violation over sampled pairs; see [`contraction_trials`].
pub fn contraction_probe(
    n_trials: usize,
    family: GameFamily,
    max_dim: usize,
    rng: &mut (impl Rng + ?Sized),
) -> ContractionReport {
    let max_violation = contraction_trials(n_trials, family, max_dim, rng)
        .iter()
        .fold(f64::NEG_INFINITY, |acc, t| acc.max(t.violation));
    ContractionReport { trials: n_trials, max_violation }
}

/// How often sampled stage games had the structure the convergence theorem
/// assumes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assumption3Stats {
    pub total: usize,
    pub global_optimum: f64,
    pub saddle_point: f64,
    pub neither: f64,
    pub empty: bool,
}

/// Whether a stage game possesses a global optimal point or a saddle point
/// at all. A global optimal point exists exactly when some joint action
/// attains the maximum entry of both payoff matrices (and such a point is
/// automatically an equilibrium); saddle existence is decided by
/// classifying the game's extreme equilibria. Games too large to enumerate
/// fall back to classifying the profile the solver would use.
pub fn classify_game(g: &StageGame) -> PointClass {
    let tol = 1e-9;
    let (m, n) = (g.rows(), g.cols());
    let max_a = g.a_flat().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let max_b = g.b_flat().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for i in 0..m {
        for j in 0..n {
            if g.a(i, j) >= max_a - tol && g.b(i, j) >= max_b - tol {
                return PointClass::GlobalOptimum;
            }
        }
    }
    match equilibrium::support_enumeration(g) {
        Ok(all) => {
            if all
                .iter()
                .any(|p| equilibrium::classify_point(g, p) == PointClass::SaddlePoint)
            {
                PointClass::SaddlePoint
            } else {
                PointClass::Neither
            }
        }
        Err(_) => equilibrium::classify_point(g, &equilibrium::solve(g)),
    }
}

/// Classify each logged stage game per [`classify_game`].
pub fn assumption3_stats(log: &[StageGame]) -> Assumption3Stats {
    if log.is_empty() {
        return Assumption3Stats { empty: true, ..Default::default() };
    }
    let mut counts = [0usize; 3];
    for g in log {
        let idx = match classify_game(g) {
            PointClass::GlobalOptimum => 0,
            PointClass::SaddlePoint => 1,
            PointClass::Neither => 2,
        };
        counts[idx] += 1;
    }
    let total = log.len();
    Assumption3Stats {
        total,
        global_optimum: counts[0] as f64 / total as f64,
        saddle_point: counts[1] as f64 / total as f64,
        neither: counts[2] as f64 / total as f64,
        empty: false,
    }
}
