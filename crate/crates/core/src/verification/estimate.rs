use crate::markov_game::{GameModel, PackedState};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// Transition-probability estimate over the discovered state set.
/// Probability mass on undiscovered successors is zero by construction.
#[derive(Clone, Debug)]
pub struct EstimatedModel {
    pub states: Vec<PackedState>,
    pub index: HashMap<PackedState, usize>,
    pub num_joint_actions: usize,
    /// trans[state][joint action] -> (successor, probability), rows sum to 1
    pub trans: Vec<Vec<Vec<(usize, f64)>>>,
    pub samples_per_pair: u64,
    pub sample_steps: u64,
}

impl EstimatedModel {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }
}

/// Number of samples per state-action pair for the probabilistic
/// accuracy guarantee: `ceil((2 |S|^2 |M|^2 |Q|^2 H^4 / delta^2)
/// ln(2 |S|^2 |A| / p))`. Benchmark runs override this with a fixed
/// count; the formula value is astronomically conservative at desk
/// scale.
pub fn formula_k(
    num_states: u64,
    policy_memory: u64,
    rm_states: u64,
    horizon: u64,
    num_actions: u64,
    delta: f64,
    p: f64,
) -> u64 {
    let s2 = (num_states * num_states) as f64;
    let m2 = (policy_memory * policy_memory) as f64;
    let q2 = (rm_states * rm_states) as f64;
    let h4 = (horizon as f64).powi(4);
    let lead = 2.0 * s2 * m2 * q2 * h4 / (delta * delta);
    let log_term = (2.0 * s2 * num_actions as f64 / p).ln();
    (lead * log_term).ceil() as u64
}

/// Breadth-first model estimation: starting from the initial state,
/// take every joint action `k_samples` times from each discovered state,
/// growing the frontier with newly seen successors. Relies on the
/// simulator's ability to step from any previously observed state.
pub fn bfs_estimate(game: &GameModel, k_samples: u64, rng: &mut ChaCha8Rng) -> EstimatedModel {
    let start_steps = game.sample_steps();
    let na = game.num_joint_actions();
    let mut states = vec![game.initial()];
    let mut index: HashMap<PackedState, usize> = HashMap::from([(game.initial(), 0)]);
    let mut trans: Vec<Vec<Vec<(usize, f64)>>> = Vec::new();
    let mut queue = std::collections::VecDeque::from([0usize]);
    let mut action = Vec::new();
    while let Some(sid) = queue.pop_front() {
        let s = states[sid];
        let mut rows = Vec::with_capacity(na);
        for a in 0..na {
            game.decode_joint(a, &mut action);
            let mut counts: HashMap<usize, u64> = HashMap::new();
            for _ in 0..k_samples {
                let s2 = game.step(s, &action, rng);
                let id = match index.get(&s2) {
                    Some(&id) => id,
                    None => {
                        let id = states.len();
                        states.push(s2);
                        index.insert(s2, id);
                        queue.push_back(id);
                        id
                    }
                };
                *counts.entry(id).or_insert(0) += 1;
            }
            let mut row: Vec<(usize, f64)> = counts
                .into_iter()
                .map(|(id, c)| (id, c as f64 / k_samples as f64))
                .collect();
            row.sort_by_key(|&(id, _)| id);
            rows.push(row);
        }
        debug_assert_eq!(sid, trans.len());
        trans.push(rows);
    }
    EstimatedModel {
        states,
        index,
        num_joint_actions: na,
        trans,
        samples_per_pair: k_samples,
        sample_steps: game.sample_steps() - start_steps,
    }
}
