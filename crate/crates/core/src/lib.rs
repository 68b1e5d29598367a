//! Finite-horizon two-player stochastic linear-quadratic games in which the
//! state is only observed through a switch that both players must agree to
//! close, at a price.
//!
//! The pipeline is split in two backward passes:
//!
//! 1. [`riccati`] computes the equilibrium feedback gains. They do not depend
//!    on how the switch is operated.
//! 2. [`switching_dp`] runs backward induction over the tree of reachable
//!    predicted error covariances and produces the least-cost equilibrium
//!    switching policy, together with the centralized (welfare) benchmark.
//!
//! [`simulator`] rolls the resulting closed loop forward under seeded noise,
//! and [`cli`] wires everything to CSV artifacts.

pub mod cli;
pub mod estimator;
pub mod linalg;
pub mod model;
pub mod report;
pub mod riccati;
pub mod simulator;
pub mod switching_dp;

pub use estimator::{EstimatorState, Observation};
pub use model::{load_spec, validate_spec, GameSpec, ModelError, Player, ValidatedSpec};
pub use riccati::{solve_riccati, RiccatiError, RiccatiSolution};
pub use simulator::{compare_baselines, monte_carlo, rollout, SimSummary, TrajectoryRecord};
pub use switching_dp::{backward_induction, ObsAge, SwitchPolicy, ValueTables};
