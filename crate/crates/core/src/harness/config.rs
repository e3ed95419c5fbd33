use crate::enumeration::SearchParams;
use crate::markov_game::{gridworld_env, intersection_env, single_lane_env, GameModel};
use crate::spec_lang::{parse_spec, Spec};
use crate::verification::VerifyParams;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Env(#[from] crate::markov_game::EnvConfigError),
    #[error("agent {agent}: {source}")]
    Spec { agent: usize, source: crate::spec_lang::ParseError },
    #[error("unknown benchmark id `{0}`")]
    UnknownBenchmark(String),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    HighNashSearch,
    Nvi,
    Maqrm,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::HighNashSearch => "highnashsearch",
            Algorithm::Nvi => "nvi",
            Algorithm::Maqrm => "maqrm",
        }
    }
}

fn default_p_fail() -> f64 {
    0.05
}

/// Environment selection and parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvSpec {
    SingleLane {
        agents: usize,
        length: u8,
        horizon: usize,
        #[serde(default = "default_p_fail")]
        p_fail: f64,
    },
    Intersection {
        ns_starts: Vec<u8>,
        ew_starts: Vec<u8>,
        horizon: usize,
        #[serde(default = "default_p_fail")]
        p_fail: f64,
    },
    Gridworld {
        size: u8,
        horizon: usize,
        #[serde(default = "default_p_fail")]
        p_fail: f64,
    },
}

/// All tunables of a run; every default follows the shipped benchmark
/// settings so a config only has to override what it changes.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    /// Nash factor for verification
    pub epsilon: f64,
    /// verification precision (margin uses epsilon - delta)
    pub delta: f64,
    /// samples per state-action pair in model estimation
    pub k_samples: u64,
    /// Q-learning steps per product edge
    pub edge_budget: u64,
    /// rollouts per candidate welfare estimate
    pub welfare_samples: usize,
    /// rollouts per on-path score inside verification
    pub jvalue_samples: usize,
    /// rollouts per induced reach distribution
    pub reach_samples: usize,
    /// cap on paths per coalition
    pub path_cap: usize,
    /// Q-learning learning rate
    pub alpha: f64,
    /// Q-learning discount
    pub gamma: f64,
    /// epsilon-greedy exploration rate
    pub epsilon_greedy: f64,
    /// best-response training steps per agent for the equilibrium-gap
    /// metric
    pub epsmin_train_steps: u64,
    /// rollouts for best-response evaluation
    pub epsmin_eval_samples: usize,
    /// training steps for the independent-learner baseline
    pub maqrm_train_steps: u64,
    /// per-run timeout in seconds
    pub timeout_secs: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            epsilon: 0.06,
            delta: 0.01,
            k_samples: 1000,
            edge_budget: 60_000,
            welfare_samples: 1000,
            jvalue_samples: 10_000,
            reach_samples: 300,
            path_cap: 20_000,
            alpha: 0.1,
            gamma: 0.9,
            epsilon_greedy: 0.15,
            epsmin_train_steps: 300_000,
            epsmin_eval_samples: 2000,
            maqrm_train_steps: 4_000_000,
            timeout_secs: 7200,
        }
    }
}

/// A fully-specified run: environment, per-agent specification sources,
/// hyperparameters, algorithm and seed. The `NASHSPEC_SEED` environment
/// variable overrides the configured seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub env: EnvSpec,
    /// one specification source per agent
    pub specs: Vec<String>,
    #[serde(default)]
    pub hyper: HyperParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
}

fn default_algorithm() -> Algorithm {
    Algorithm::HighNashSearch
}

impl ExperimentConfig {
    pub fn build_game(&self) -> Result<GameModel, ConfigError> {
        let env: Arc<dyn crate::markov_game::Env> = match &self.env {
            EnvSpec::SingleLane { agents, length, horizon, p_fail } => {
                Arc::new(single_lane_env(*agents, *length, *horizon, *p_fail)?)
            }
            EnvSpec::Intersection { ns_starts, ew_starts, horizon, p_fail } => {
                Arc::new(intersection_env(ns_starts, ew_starts, *horizon, *p_fail)?)
            }
            EnvSpec::Gridworld { size, horizon, p_fail } => {
                Arc::new(gridworld_env(*size, *horizon, *p_fail)?)
            }
        };
        Ok(GameModel::new(env))
    }

    pub fn parse_specs(&self, game: &GameModel) -> Result<Vec<Spec>, ConfigError> {
        let table = game.env.predicate_table();
        if self.specs.len() != game.num_agents() {
            return Err(ConfigError::Invalid(format!(
                "{} specs for {} agents",
                self.specs.len(),
                game.num_agents()
            )));
        }
        self.specs
            .iter()
            .enumerate()
            .map(|(agent, src)| {
                parse_spec(src, table).map_err(|source| ConfigError::Spec { agent, source })
            })
            .collect()
    }

    pub fn search_params(&self) -> SearchParams {
        SearchParams {
            edge_budget: self.hyper.edge_budget,
            qlearn: crate::enumeration::QLearnParams {
                alpha: self.hyper.alpha,
                gamma: self.hyper.gamma,
                epsilon: self.hyper.epsilon_greedy,
                init: 1.0,
            },
            reach_samples: self.hyper.reach_samples,
            welfare_samples: self.hyper.welfare_samples,
            path_cap: self.hyper.path_cap,
        }
    }

    pub fn verify_params(&self) -> VerifyParams {
        VerifyParams {
            epsilon: self.hyper.epsilon,
            delta: self.hyper.delta,
            k_samples: self.hyper.k_samples,
            jvalue_samples: self.hyper.jvalue_samples,
        }
    }

    /// Configured seed unless `NASHSPEC_SEED` is set.
    pub fn effective_seed(&self) -> u64 {
        std::env::var("NASHSPEC_SEED")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(self.seed)
    }
}

/// Built-in benchmark suite. Each id pairs an environment layout with
/// specification sources and tuned budgets.
pub fn benchmark(id: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut hyper = HyperParams::default();
    let (env, specs): (EnvSpec, Vec<String>) = match id {
        // --- single lane -------------------------------------------------
        "single-lane/phi1" => (
            lane(3, 10, 25),
            svec(&["achieve at_goal_0", "achieve at_goal_1", "achieve at_goal_2"]),
        ),
        "single-lane/phi2" => (
            lane(3, 10, 25),
            svec(&[
                "achieve true",
                "achieve (at_goal_1 and not_at_goal_0)",
                "achieve at_goal_2",
            ]),
        ),
        "single-lane/phi3" => (
            lane(3, 10, 25),
            svec(&[
                "achieve at_goal_0",
                "achieve (at_goal_1 and not_at_goal_0)",
                "achieve at_goal_2",
            ]),
        ),
        "single-lane/phi4" => {
            // a one-hop race: the verifiable one-winner profile exists
            // exactly because a single move step decides the contest
            hyper.k_samples = 1_000_000;
            (
                lane(3, 1, 10),
                svec(&[
                    "achieve (at_goal_0 and not_at_goal_1)",
                    "achieve (at_goal_1 and not_at_goal_0)",
                    "achieve at_goal_2",
                ]),
            )
        }
        "single-lane/phi5" => (
            lane(3, 10, 30),
            svec(&[
                "achieve (at_mid_0 and below_mid_1) ; achieve at_goal_0",
                "achieve (at_goal_1 and not_at_goal_0)",
                "achieve at_goal_2",
            ]),
        ),
        "single-lane/phi6" => (
            lane(3, 10, 30),
            svec(&[
                "achieve (at_mid_0 and below_mid_1) ; achieve at_goal_0",
                "achieve (at_goal_1 and not_at_goal_0)",
                "achieve (at_goal_2 and not_at_goal_0)",
            ]),
        ),
        // --- intersection ------------------------------------------------
        "intersection/phi1" => {
            hyper.k_samples = 20_000;
            (
                EnvSpec::Intersection {
                    ns_starts: vec![3, 3],
                    ew_starts: vec![2],
                    horizon: 10,
                    p_fail: 0.05,
                },
                svec(&[
                    "achieve (crossed_0 and uncrossed_2) ensuring safe_0",
                    "achieve (crossed_1 and uncrossed_2) ensuring safe_1",
                    "achieve (crossed_2 and uncrossed_0 and uncrossed_1) ensuring safe_2",
                ]),
            )
        }
        "intersection/phi2" => {
            hyper.k_samples = 10_000;
            hyper.edge_budget = 100_000;
            (
                EnvSpec::Intersection {
                    ns_starts: vec![3],
                    ew_starts: vec![2, 4, 5],
                    horizon: 14,
                    p_fail: 0.05,
                },
                svec(&[
                    "achieve (crossed_0 and uncrossed_2 and uncrossed_3) ensuring safe_0",
                    "achieve (crossed_1 and uncrossed_0) ensuring safe_1",
                    "achieve (crossed_2 and uncrossed_0) ensuring safe_2",
                    "achieve (crossed_3 and uncrossed_0) ensuring safe_3",
                ]),
            )
        }
        "intersection/phi3" => {
            hyper.k_samples = 10_000;
            hyper.edge_budget = 100_000;
            (
                EnvSpec::Intersection {
                    ns_starts: vec![3],
                    ew_starts: vec![2, 4, 5],
                    horizon: 14,
                    p_fail: 0.05,
                },
                svec(&[
                    "achieve (crossed_0 and uncrossed_2 and uncrossed_3) ensuring safe_0",
                    "achieve (crossed_1 and uncrossed_0) ensuring (safe_1 and gap2_1_2 and gap2_1_3)",
                    "achieve (crossed_2 and uncrossed_0) ensuring safe_2",
                    "achieve (crossed_3 and uncrossed_0) ensuring safe_3",
                ]),
            )
        }
        "intersection/phi4" => {
            hyper.k_samples = 20_000;
            (
                EnvSpec::Intersection {
                    ns_starts: vec![3, 3],
                    ew_starts: vec![3],
                    horizon: 12,
                    p_fail: 0.05,
                },
                svec(&[
                    "achieve (crossed_0 and uncrossed_1 and uncrossed_2) ensuring safe_0",
                    "achieve crossed_1 ensuring safe_1",
                    "achieve (crossed_2 and uncrossed_1) ensuring safe_2",
                ]),
            )
        }
        "intersection/phi5" => {
            // five agents; a long-running configuration
            hyper.k_samples = 5_000;
            hyper.edge_budget = 40_000;
            (
                EnvSpec::Intersection {
                    ns_starts: vec![2, 3],
                    ew_starts: vec![2, 3, 4],
                    horizon: 12,
                    p_fail: 0.05,
                },
                svec(&[
                    "achieve (crossed_0 and uncrossed_2 and uncrossed_3 and uncrossed_4) ensuring safe_0",
                    "achieve (crossed_1 and uncrossed_2 and uncrossed_3 and uncrossed_4) ensuring safe_1",
                    "achieve (crossed_2 and uncrossed_0 and uncrossed_1) ensuring safe_2",
                    "achieve (crossed_3 and uncrossed_0 and uncrossed_1) ensuring safe_3",
                    "achieve (crossed_4 and uncrossed_0 and uncrossed_1) ensuring safe_4",
                ]),
            )
        }
        // --- gridworld ---------------------------------------------------
        "gridworld/phi1" => {
            hyper.edge_budget = 150_000;
            (
                grid(4, 14),
                svec(&[
                    "achieve a0_at_3_3 ensuring apart",
                    "achieve a1_at_0_0 ensuring apart",
                ]),
            )
        }
        "gridworld/phi2" => {
            hyper.edge_budget = 150_000;
            (
                grid(4, 14),
                svec(&[
                    "achieve (a0_at_0_3 or a0_at_3_0) ensuring apart",
                    "achieve (a1_at_0_3 or a1_at_3_0) ensuring apart",
                ]),
            )
        }
        "gridworld/phi3" => {
            hyper.edge_budget = 150_000;
            (
                grid(4, 25),
                svec(&[
                    "(achieve (a0_at_0_3 or a0_at_3_0) ; achieve a0_at_3_3) ensuring apart",
                    "(achieve (a1_at_0_3 or a1_at_3_0) ; achieve a1_at_0_0) ensuring apart",
                ]),
            )
        }
        "gridworld/phi4" => {
            hyper.edge_budget = 150_000;
            (
                grid(4, 34),
                svec(&[
                    "(achieve (a0_at_0_3 or a0_at_3_0) ; achieve a0_at_3_3 ; achieve a0_at_0_0) ensuring apart",
                    "(achieve (a1_at_0_3 or a1_at_3_0) ; achieve a1_at_0_0 ; achieve a1_at_3_3) ensuring apart",
                ]),
            )
        }
        "gridworld/phi5" => {
            hyper.edge_budget = 150_000;
            (
                grid(4, 44),
                svec(&[
                    "(achieve (a0_at_0_3 or a0_at_3_0) ; achieve a0_at_3_3 ; achieve a0_at_0_0 ; achieve a0_at_3_3) ensuring apart",
                    "(achieve (a1_at_0_3 or a1_at_3_0) ; achieve a1_at_0_0 ; achieve a1_at_3_3 ; achieve a1_at_0_0) ensuring apart",
                ]),
            )
        }
        other => return Err(ConfigError::UnknownBenchmark(other.to_string())),
    };
    Ok(ExperimentConfig {
        name: id.to_string(),
        env,
        specs,
        hyper,
        seed: 0,
        algorithm: Algorithm::HighNashSearch,
    })
}

pub fn benchmark_ids() -> Vec<&'static str> {
    vec![
        "single-lane/phi1",
        "single-lane/phi2",
        "single-lane/phi3",
        "single-lane/phi4",
        "single-lane/phi5",
        "single-lane/phi6",
        "intersection/phi1",
        "intersection/phi2",
        "intersection/phi3",
        "intersection/phi4",
        "intersection/phi5",
        "gridworld/phi1",
        "gridworld/phi2",
        "gridworld/phi3",
        "gridworld/phi4",
        "gridworld/phi5",
    ]
}

fn lane(agents: usize, length: u8, horizon: usize) -> EnvSpec {
    EnvSpec::SingleLane { agents, length, horizon, p_fail: 0.05 }
}

fn grid(size: u8, horizon: usize) -> EnvSpec {
    EnvSpec::Gridworld { size, horizon, p_fail: 0.05 }
}

fn svec(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_benchmarks_build_and_parse() {
        for id in benchmark_ids() {
            let cfg = benchmark(id).unwrap();
            let game = cfg.build_game().unwrap_or_else(|e| panic!("{id}: {e}"));
            let specs = cfg.parse_specs(&game).unwrap_or_else(|e| panic!("{id}: {e}"));
            assert_eq!(specs.len(), game.num_agents(), "{id}");
            // specs compile to automata within the state budget
            for s in &specs {
                crate::automata::spec_to_dfa(s).unwrap_or_else(|e| panic!("{id}: {e}"));
            }
        }
        assert!(matches!(
            benchmark("nope"),
            Err(ConfigError::UnknownBenchmark(_))
        ));
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = benchmark("single-lane/phi4").unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.name, cfg.name);
        assert_eq!(back.hyper.k_samples, cfg.hyper.k_samples);
        assert_eq!(back.specs, cfg.specs);
    }
}
