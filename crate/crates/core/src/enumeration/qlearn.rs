use super::monitor::EdgeMonitor;
use crate::markov_game::{GameModel, PackedState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnumError {
    #[error("edge {edge} never achieved from its initial distribution")]
    ZeroAchievement { edge: usize },
    #[error("vertex has no induced state distribution")]
    EmptyDistribution,
    #[error(transparent)]
    Graph(#[from] crate::abstract_graph::GraphError),
}

/// Empirical state distribution (normalized).
pub type Dist = Vec<(PackedState, f64)>;

pub fn sample_dist(dist: &Dist, rng: &mut ChaCha8Rng) -> PackedState {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for &(s, p) in dist {
        acc += p;
        if x < acc {
            return s;
        }
    }
    dist.last().expect("distribution nonempty").0
}

#[derive(Clone, Debug)]
pub struct QLearnParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// initial Q value; optimistic by default so the greedy sweep visits
    /// untried actions
    pub init: f64,
}

impl Default for QLearnParams {
    fn default() -> Self {
        QLearnParams { alpha: 0.1, gamma: 0.9, epsilon: 0.15, init: 1.0 }
    }
}

/// Deterministic cooperative joint policy for one product edge, extracted
/// greedily from a tabular Q-function over (environment state, monitor
/// state) observations.
pub struct EdgePolicy {
    pub edge: usize,
    greedy: HashMap<u64, u16>,
    pub default_action: u16,
    /// achievement probability estimated from the reach-distribution pass
    pub achieve_prob: f64,
    pub trained_steps: u64,
}

#[inline]
pub(crate) fn obs_key(s: PackedState, monitor_state: u32) -> u64 {
    (s as u64) | ((monitor_state as u64) << 32)
}

impl EdgePolicy {
    pub fn action_id(&self, s: PackedState, monitor_state: u32) -> u16 {
        self.greedy
            .get(&obs_key(s, monitor_state))
            .copied()
            .unwrap_or(self.default_action)
    }

    /// Policy that plays one fixed joint action everywhere.
    pub fn constant(edge: usize, action: u16) -> EdgePolicy {
        EdgePolicy {
            edge,
            greedy: HashMap::new(),
            default_action: action,
            achieve_prob: 0.0,
            trained_steps: 0,
        }
    }
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Learn a joint policy maximizing the probability of achieving `edge`
/// from the start distribution, by episodic Q-learning over joint
/// actions with reward 1 on first achievement. Spends `budget` sample
/// steps.
pub fn learn_edge_policy(
    game: &GameModel,
    monitor: &EdgeMonitor,
    edge: usize,
    start: &Dist,
    budget: u64,
    params: &QLearnParams,
    rng: &mut ChaCha8Rng,
) -> EdgePolicy {
    let na = game.num_joint_actions();
    let mut q: HashMap<u64, Vec<f64>> = HashMap::new();
    let mut steps = 0u64;
    let h = game.horizon();
    let mut decoded = Vec::new();
    let mut action = Vec::new();
    while steps < budget {
        let mut s = sample_dist(start, rng);
        game.env.decode(s, &mut decoded);
        let mut m = monitor.init(&decoded);
        if monitor.achieved(m) {
            // trivially achieved at the segment boundary
            steps += 1;
            continue;
        }
        for _ in 0..h {
            let key = obs_key(s, m);
            let a_id = {
                let qs = q.entry(key).or_insert_with(|| vec![params.init; na]);
                if rng.gen::<f64>() < params.epsilon {
                    rng.gen_range(0..na)
                } else {
                    argmax_first(qs)
                }
            };
            game.decode_joint(a_id, &mut action);
            let s2 = game.step(s, &action, rng);
            steps += 1;
            game.env.decode(s2, &mut decoded);
            let m2 = monitor.step(m, &decoded);
            let achieved = monitor.achieved(m2);
            let target = if achieved {
                1.0
            } else {
                let next_max = q
                    .get(&obs_key(s2, m2))
                    .map(|v| v[argmax_first(v)])
                    .unwrap_or(params.init);
                params.gamma * next_max
            };
            let qs = q.get_mut(&key).expect("entry created above");
            qs[a_id] += params.alpha * (target - qs[a_id]);
            s = s2;
            m = m2;
            if achieved || steps >= budget {
                break;
            }
        }
    }
    let greedy = q
        .into_iter()
        .map(|(key, qs)| (key, argmax_first(&qs) as u16))
        .collect();
    EdgePolicy { edge, greedy, default_action: 0, achieve_prob: 0.0, trained_steps: steps }
}

/// Roll the greedy edge policy out from the start distribution and
/// collect the empirical state distribution at the first achievement
/// index, conditioned on achieving; also returns the achievement
/// probability estimate.
pub fn reach_distribution(
    game: &GameModel,
    monitor: &EdgeMonitor,
    policy: &EdgePolicy,
    start: &Dist,
    num_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Dist, f64), EnumError> {
    let mut counts: HashMap<PackedState, u64> = HashMap::new();
    let mut hits = 0u64;
    let h = game.horizon();
    let mut decoded = Vec::new();
    let mut action = Vec::new();
    for _ in 0..num_samples {
        let mut s = sample_dist(start, rng);
        game.env.decode(s, &mut decoded);
        let mut m = monitor.init(&decoded);
        if monitor.achieved(m) {
            *counts.entry(s).or_insert(0) += 1;
            hits += 1;
            continue;
        }
        for _ in 0..h {
            let a_id = policy.action_id(s, m);
            game.decode_joint(a_id as usize, &mut action);
            let s2 = game.step(s, &action, rng);
            game.env.decode(s2, &mut decoded);
            m = monitor.step(m, &decoded);
            s = s2;
            if monitor.achieved(m) {
                *counts.entry(s).or_insert(0) += 1;
                hits += 1;
                break;
            }
        }
    }
    if hits == 0 {
        return Err(EnumError::ZeroAchievement { edge: policy.edge });
    }
    let mut dist: Dist = counts
        .into_iter()
        .map(|(s, c)| (s, c as f64 / hits as f64))
        .collect();
    dist.sort_by_key(|&(s, _)| s);
    Ok((dist, hits as f64 / num_samples as f64))
}
