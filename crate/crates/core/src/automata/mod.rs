//! Compilation of specifications to finite automata and reward machines.
//!
//! `spec_to_dfa` builds, by structural induction, a deterministic and
//! complete automaton accepting exactly the label sequences of satisfying
//! trajectories; `dfa_to_rm` turns it into a reward machine whose total
//! reward on a trajectory is the satisfaction indicator of the
//! all-but-last-state prefix.

mod dfa;
mod rm;

pub use dfa::{complete, determinize, spec_to_dfa, AutomataError, FiniteAutomaton, Guard};
pub use rm::{dfa_to_rm, rm_total_reward, Labeler, RewardMachine};
