use super::estimate::{bfs_estimate, EstimatedModel};
use super::joined::JoinedPolicy;
use super::pungame::{construct_game, punishment_value, PunishmentPlan};
use crate::automata::{dfa_to_rm, spec_to_dfa, AutomataError, RewardMachine};
use crate::enumeration::{
    prioritized_enumeration, Candidate, EnumerationReport, FiniteStatePolicy, PathPolicyExecutor,
    SearchParams,
};
use crate::game_solving::GameSolveError;
use crate::markov_game::GameModel;
use crate::spec_lang::Spec;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("invalid parameters: require 0 < delta < epsilon, got delta={delta}, epsilon={epsilon}")]
    InvalidParams { epsilon: f64, delta: f64 },
    #[error(transparent)]
    Automata(#[from] AutomataError),
    #[error(transparent)]
    Solve(#[from] GameSolveError),
}

#[derive(Clone, Debug)]
pub struct VerifyParams {
    /// Nash factor
    pub epsilon: f64,
    /// estimation precision folded into the acceptance margin
    pub delta: f64,
    /// samples per state-action pair for model estimation
    pub k_samples: u64,
    /// Monte-Carlo rollouts for each on-path score
    pub jvalue_samples: usize,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams { epsilon: 0.06, delta: 0.01, k_samples: 1000, jvalue_samples: 10_000 }
    }
}

/// Per-agent verification record: on-path score, optimal deviation value
/// on the estimated model, and the margin `J + epsilon - delta - dev`.
#[derive(Clone, Debug)]
pub struct AgentCheck {
    pub agent: usize,
    pub j_value: f64,
    pub dev_value: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub is_nash: bool,
    pub checks: Vec<AgentCheck>,
}

/// Decide whether the candidate extends to an equilibrium by checking,
/// for every agent, that its best deviation against the best punishment
/// (the min-max value of its punishment game on the estimated model)
/// does not beat its on-path score by more than `epsilon - delta`.
/// Returns the report and the punishment plans for all agents.
#[allow(clippy::type_complexity)]
pub fn verify_nash(
    game: &GameModel,
    model: &Arc<EstimatedModel>,
    candidate: &Arc<FiniteStatePolicy>,
    specs: &[Spec],
    machines: &[Arc<RewardMachine>],
    params: &VerifyParams,
    rng: &mut ChaCha8Rng,
) -> Result<(VerifyReport, Vec<Option<Arc<PunishmentPlan>>>), VerifyError> {
    if !(params.delta > 0.0 && params.delta < params.epsilon) {
        return Err(VerifyError::InvalidParams {
            epsilon: params.epsilon,
            delta: params.delta,
        });
    }
    // on-path scores from the true simulator
    let mut exec = PathPolicyExecutor::new(candidate.clone(), game);
    let scores = game.estimate_scores(&mut exec, specs, params.jvalue_samples, rng);

    let mut checks = Vec::new();
    let mut plans: Vec<Option<Arc<PunishmentPlan>>> = vec![None; specs.len()];
    let mut is_nash = true;
    for j in 0..specs.len() {
        let pg = construct_game(game, model, j, &machines[j], candidate);
        let plan = punishment_value(model, pg)?;
        let j_value = scores.per_agent[j];
        let margin = j_value + params.epsilon - params.delta - plan.value;
        let pass = margin >= 0.0;
        is_nash &= pass;
        checks.push(AgentCheck { agent: j, j_value, dev_value: plan.value, margin, pass });
        plans[j] = Some(Arc::new(plan));
    }
    Ok((VerifyReport { is_nash, checks }, plans))
}

/// Everything the search produced, for reporting.
pub struct SearchOutcome {
    pub joined: Option<JoinedPolicy>,
    pub accepted: Option<AcceptedCandidate>,
    pub candidates_checked: usize,
    pub rejected: Vec<VerifyReport>,
    pub enumeration: EnumerationReport,
    pub enumeration_steps: u64,
    pub estimation_steps: u64,
    pub evaluation_steps: u64,
    pub timed_out: bool,
}

pub struct AcceptedCandidate {
    pub policy: Arc<FiniteStatePolicy>,
    pub welfare_estimate: f64,
    pub per_agent: Vec<f64>,
    pub coalition: Vec<usize>,
    pub path: Vec<usize>,
    pub report: VerifyReport,
}

/// End-to-end search: enumerate candidates in decreasing estimated
/// welfare, estimate the model once, and return the first candidate that
/// verifies, joined with its punishment strategies.
pub fn high_nash_search(
    game: &GameModel,
    specs: &[Spec],
    search: &SearchParams,
    verify: &VerifyParams,
    deadline: Option<Instant>,
    rng: &mut ChaCha8Rng,
) -> Result<SearchOutcome, VerifyError> {
    let machines: Vec<Arc<RewardMachine>> = specs
        .iter()
        .map(|s| Ok(Arc::new(dfa_to_rm(&spec_to_dfa(s)?))))
        .collect::<Result<_, AutomataError>>()?;

    let t0 = game.sample_steps();
    let (mut heap, enumeration) = prioritized_enumeration(game, specs, search, rng);
    let enumeration_steps = game.sample_steps() - t0;

    let mut outcome = SearchOutcome {
        joined: None,
        accepted: None,
        candidates_checked: 0,
        rejected: Vec::new(),
        enumeration,
        enumeration_steps,
        estimation_steps: 0,
        evaluation_steps: 0,
        timed_out: false,
    };
    if heap.is_empty() {
        return Ok(outcome);
    }

    // estimated once, reused across all candidates
    let t1 = game.sample_steps();
    let model = Arc::new(bfs_estimate(game, verify.k_samples, rng));
    outcome.estimation_steps = game.sample_steps() - t1;

    let t2 = game.sample_steps();
    while let Some(Candidate { policy, welfare, per_agent, coalition, path }) = heap.pop() {
        if let Some(d) = deadline {
            if Instant::now() >= d {
                outcome.timed_out = true;
                break;
            }
        }
        outcome.candidates_checked += 1;
        let (report, plans) =
            verify_nash(game, &model, &policy, specs, &machines, verify, rng)?;
        if report.is_nash {
            let joined = JoinedPolicy::new(policy.clone(), plans, machines.clone(), game);
            outcome.accepted = Some(AcceptedCandidate {
                policy,
                welfare_estimate: welfare,
                per_agent,
                coalition,
                path,
                report,
            });
            outcome.joined = Some(joined);
            break;
        }
        outcome.rejected.push(report);
    }
    outcome.evaluation_steps = game.sample_steps() - t2;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov_game::{single_lane_env, JointPolicy};
    use rand::SeedableRng;

    fn one_cell_race() -> (GameModel, Vec<Spec>) {
        let game = GameModel::new(Arc::new(single_lane_env(2, 1, 10, 0.05).unwrap()));
        let table = game.env.predicate_table().clone();
        let specs = vec![
            crate::spec_lang::parse_spec("achieve (at_goal_0 and not_at_goal_1)", &table).unwrap(),
            crate::spec_lang::parse_spec("achieve (at_goal_1 and not_at_goal_0)", &table).unwrap(),
        ];
        (game, specs)
    }

    /// The one-winner candidate passes at the default margin (deviation
    /// value just under epsilon - delta) and fails for a tighter margin.
    #[test]
    fn accepts_then_rejects_with_tighter_epsilon() {
        let (game, specs) = one_cell_race();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let search = SearchParams { edge_budget: 15_000, welfare_samples: 400, ..Default::default() };
        let verify = VerifyParams { k_samples: 400_000, jvalue_samples: 2_000, ..Default::default() };
        let outcome =
            high_nash_search(&game, &specs, &search, &verify, None, &mut rng).unwrap();
        let accepted = outcome.accepted.expect("one-winner candidate verifies");
        assert!((accepted.welfare_estimate - 0.5).abs() < 0.05);
        let loser_check = accepted
            .report
            .checks
            .iter()
            .find(|c| c.j_value < 0.5)
            .unwrap();
        assert!(loser_check.dev_value > 0.03 && loser_check.dev_value < 0.05);

        // same candidate, tighter epsilon: the loser's deviation now wins
        let verify_tight = VerifyParams { epsilon: 0.02, ..verify };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let outcome =
            high_nash_search(&game, &specs, &search, &verify_tight, None, &mut rng).unwrap();
        assert!(outcome.accepted.is_none(), "no equilibrium at epsilon=0.02");
        assert!(outcome.candidates_checked >= 2);
    }

    #[test]
    fn invalid_params_rejected() {
        let (game, specs) = one_cell_race();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let search = SearchParams { edge_budget: 1000, welfare_samples: 50, ..Default::default() };
        let bad = VerifyParams { epsilon: 0.05, delta: 0.05, ..Default::default() };
        assert!(matches!(
            high_nash_search(&game, &specs, &search, &bad, None, &mut rng),
            Err(VerifyError::InvalidParams { .. })
        ));
    }

    /// Single agent optimizing its own spec verifies trivially.
    #[test]
    fn single_agent_accepts() {
        let game = GameModel::new(Arc::new(single_lane_env(1, 2, 8, 0.05).unwrap()));
        let table = game.env.predicate_table().clone();
        let specs = vec![crate::spec_lang::parse_spec("achieve at_goal_0", &table).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let search = SearchParams { edge_budget: 20_000, welfare_samples: 300, ..Default::default() };
        let verify = VerifyParams { k_samples: 5_000, jvalue_samples: 2_000, ..Default::default() };
        let outcome =
            high_nash_search(&game, &specs, &search, &verify, None, &mut rng).unwrap();
        let accepted = outcome.accepted.unwrap();
        assert!(accepted.per_agent[0] > 0.99);
        assert!(outcome.joined.is_some());
    }

    /// Joining punishment strategies leaves the on-path distribution
    /// unchanged: scores agree with the bare candidate's.
    #[test]
    fn join_preserves_on_path_value() {
        let (game, specs) = one_cell_race();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let search = SearchParams { edge_budget: 15_000, welfare_samples: 400, ..Default::default() };
        let verify = VerifyParams { k_samples: 400_000, jvalue_samples: 2_000, ..Default::default() };
        let outcome =
            high_nash_search(&game, &specs, &search, &verify, None, &mut rng).unwrap();
        let mut joined = outcome.joined.unwrap();
        let accepted = outcome.accepted.unwrap();
        let joined_scores = game.estimate_scores(&mut joined, &specs, 4_000, &mut rng);
        let mut base_exec = PathPolicyExecutor::new(accepted.policy.clone(), &game);
        let base_scores = game.estimate_scores(&mut base_exec, &specs, 4_000, &mut rng);
        for (a, b) in joined_scores.per_agent.iter().zip(&base_scores.per_agent) {
            let sigma = (0.25f64 / 4000.0).sqrt();
            assert!((a - b).abs() <= 3.0 * sigma + 1e-9, "joined {a} vs base {b}");
        }
        assert_eq!(joined.untracked_fallbacks, 0);
    }

    /// Replaying a deviation: the punishers' actions follow the
    /// minimizer policy of the deviator's punishment game.
    #[test]
    fn punishers_follow_their_plan_after_deviation() {
        let (game, specs) = one_cell_race();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let search = SearchParams { edge_budget: 15_000, welfare_samples: 400, ..Default::default() };
        let verify = VerifyParams { k_samples: 100_000, jvalue_samples: 1_000, ..Default::default() };
        let outcome =
            high_nash_search(&game, &specs, &search, &verify, None, &mut rng).unwrap();
        let mut joined = outcome.joined.unwrap();
        // agent 1 (the held-back loser) deviates by moving at t=0
        joined.reset();
        let mut s = game.initial();
        let mut satisfied_deviator = 0;
        let rollouts = 2000;
        for _ in 0..rollouts {
            joined.reset();
            s = game.initial();
            let mut states = vec![game.decoded(s)];
            for _ in 0..game.horizon() {
                let mut a = joined.act(s, &mut rng);
                a[1] = 1; // deviator always moves
                let s2 = game.step(s, &a, &mut rng);
                joined.note_step(s, &a, s2);
                s = s2;
                states.push(game.decoded(s));
                assert_eq!(joined.currently_punishing(), Some(1));
            }
            if crate::spec_lang::satisfies(&states, &specs[1]) {
                satisfied_deviator += 1;
            }
        }
        let rate = satisfied_deviator as f64 / rollouts as f64;
        // the optimal punisher races too, holding the deviator near its
        // min-max deviation value
        assert!(rate < 0.09, "deviator satisfaction {rate} despite punishment");
        let _ = s;
    }
}
