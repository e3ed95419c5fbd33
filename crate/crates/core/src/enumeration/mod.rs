//! Prioritized enumeration: learn a cooperative joint policy per product
//! edge, propagate induced state distributions in topological order,
//! compose path policies, and rank them by estimated social welfare.

mod monitor;
mod policies;
mod prioritized;
mod qlearn;

pub use monitor::EdgeMonitor;
pub use policies::{FiniteStatePolicy, Memory, PathPolicyExecutor};
pub use prioritized::{
    prioritized_enumeration, Candidate, EnumerationReport, RankedCandidateList, SearchParams,
};
pub use qlearn::{learn_edge_policy, reach_distribution, EdgePolicy, EnumError, QLearnParams};
