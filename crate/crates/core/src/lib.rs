//! Structured perfect Bayesian equilibria of finite-horizon repeated games
//! with publicly observed actions and static, correlated private types.
//!
//! - [`game_model`]: game description, joint index spaces, file format
//! - [`belief`]: common beliefs, prescriptions, Bayes update
//! - [`stage_solver`]: per-stage agent-form fixed point
//! - [`backward`]: backward recursion (exact memoized or simplex grid)
//! - [`forward`]: equilibrium strategies and beliefs, simulation, exact payoffs
//! - [`verifier`]: best-deviation, one-shot and continuation-identity checks

pub mod backward;
pub mod belief;
pub mod error;
pub mod forward;
pub mod game_model;
pub mod par;
pub mod stage_solver;
pub mod verifier;

pub use backward::{
    solve, BackwardOptions, EquilibriumGenerator, Generator, Mode, SolveOutcome, SolveReport,
};
pub use belief::{Belief, ConditionalBelief, Prescription};
pub use error::SolveError;
pub use forward::EquilibriumPolicy;
pub use game_model::{GameSpec, JointSpace, SpecError};
pub use stage_solver::{SolverConfig, StageSolution, StageStatus};
