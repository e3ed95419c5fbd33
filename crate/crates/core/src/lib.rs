//! Equilibrium search for finite-horizon Markov games where every agent's
//! objective is given as a temporal task specification.
//!
//! The pipeline: parse per-agent specs ([`spec_lang`]), compile them to
//! automata and reward machines ([`automata`]) and to abstract graphs
//! ([`abstract_graph`]), enumerate candidate joint policies in decreasing
//! welfare order by compositional Q-learning over coalition product graphs
//! ([`enumeration`]), then verify each candidate by solving per-agent
//! zero-sum punishment games on an estimated model ([`verification`]).
//! Benchmark environments live in [`markov_game`]; matrix-game and
//! stochastic-game solvers in [`game_solving`]; experiment configuration,
//! baselines and metrics in [`harness`].

pub mod abstract_graph;
pub mod automata;
pub mod enumeration;
pub mod game_solving;
pub mod harness;
pub mod markov_game;
pub mod spec_lang;
pub mod verification;

pub use abstract_graph::{AbstractGraph, ProductGraph, SafeSet};
pub use markov_game::{GameModel, JointAction, PackedState, ScoreReport, Trajectory};
pub use automata::{FiniteAutomaton, Guard, RewardMachine};
pub use spec_lang::{AtomicPredicate, Predicate, PredicateTable, Spec};
pub use verification::{EstimatedModel, JoinedPolicy, PunishmentGame};
