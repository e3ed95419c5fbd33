//! PAC verification of candidate joint policies: estimate the model
//! once, build a two-player zero-sum punishment game per agent, solve it
//! by value iteration, and accept the candidate when no agent's optimal
//! deviation beats its on-path score by more than the Nash margin.

mod estimate;
mod joined;
mod pungame;
mod verify;

pub use estimate::{bfs_estimate, formula_k, EstimatedModel};
pub use joined::JoinedPolicy;
pub use pungame::{construct_game, punishment_value, PunishmentGame, PunishmentPlan};
pub use verify::{
    high_nash_search, verify_nash, AgentCheck, SearchOutcome, VerifyError, VerifyParams,
    VerifyReport,
};
