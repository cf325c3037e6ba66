//! Nash-Q learning for two-player general-sum stochastic games whose tasks
//! are given as reward machines.
//!
//! The pieces, bottom to top:
//!
//! - [`machine`]: reward machines (deterministic Mealy machines over
//!   proposition sets) with a small text format.
//! - [`grid`]: the labeled two-player grid game — simultaneous moves, slip
//!   noise, power bases, capture events.
//! - [`product`]: the product game over augmented states (grid state plus
//!   both machine states), which makes the rewards Markovian.
//! - [`equilibrium`]: bimatrix stage-game solving — Lemke-Howson pivoting,
//!   support enumeration, equilibrium checks and point classification.
//! - [`learner`]: the Nash-Q loop over the augmented state space: four
//!   Q-tables, epsilon-greedy equilibrium play, equilibrium-value backups.
//! - [`baselines`]: the same loop keyed on raw or event-augmented grid
//!   states, for learning-curve comparison.
//! - [`analysis`]: instrumentation for the convergence theory — Q-table
//!   distance, the one-step backup operator, contraction probes.
//! - [`harness`]: experiment configs, training/evaluation cadence, CSV and
//!   plot-data emission.

pub mod analysis;
pub mod baselines;
pub mod equilibrium;
pub mod grid;
pub mod harness;
pub mod learner;
pub mod machine;
pub mod product;
