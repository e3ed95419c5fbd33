//! Zero-sum matrix-game solving, finite-horizon min-max value iteration,
//! and a scoped general-sum stage solver for the value-iteration baseline.

mod general_sum;
mod simplex;
mod vi;

pub use general_sum::{best_nash_general_sum, StrategicGame};
pub use simplex::{solve_matrix_game, MatrixGame, StageOutcome};
pub use vi::{minmax_value_iteration, MinmaxSolution, ZeroSumGame};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GameSolveError {
    #[error("no equilibrium found by the scoped n-player search")]
    NoEquilibriumFound,
    #[error("linear program did not terminate (internal error)")]
    LpStalled,
}
