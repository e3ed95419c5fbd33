use crate::automata::RewardMachine;
use crate::markov_game::{GameModel, JointPolicy, PackedState};
use crate::spec_lang::{satisfies, Spec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// A frozen joint policy a best-response learner can play against. The
/// digest exposes the policy's internal state so the learner's
/// observations stay Markov (punishment reactions included).
pub trait FrozenOpponent: JointPolicy {
    fn obs_digest(&mut self, s: PackedState) -> u64;
}

#[derive(Clone, Debug)]
pub struct EpsMinParams {
    pub train_steps: u64,
    pub eval_samples: usize,
    pub alpha: f64,
    pub epsilon_greedy: f64,
}

impl Default for EpsMinParams {
    fn default() -> Self {
        EpsMinParams { train_steps: 300_000, eval_samples: 2000, alpha: 0.1, epsilon_greedy: 0.15 }
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

fn mix(s: PackedState, digest: u64, q: usize, t: usize) -> u64 {
    // FNV-style fold of the observation tuple
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for part in [s as u64, digest, q as u64, t as u64] {
        h ^= part;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// Empirical equilibrium gap: for each agent, train a tabular
/// best-response learner against the frozen joint policy (optimistic
/// initialization, undiscounted finite-horizon updates, rewards from the
/// agent's reward machine), evaluate the greedy best response, and
/// return the largest improvement over the on-path score, floored at
/// zero.
pub fn epsilon_min(
    game: &GameModel,
    opponent: &mut dyn FrozenOpponent,
    specs: &[Spec],
    machines: &[std::sync::Arc<RewardMachine>],
    params: &EpsMinParams,
    rng: &mut ChaCha8Rng,
) -> (f64, Vec<f64>) {
    let n = specs.len();
    let h = game.horizon();
    let mut gains = Vec::with_capacity(n);

    // on-path scores under the unperturbed joint policy
    let base = on_path_scores(game, opponent, specs, params.eval_samples, rng);

    for agent in 0..n {
        let rm = &machines[agent];
        let na = game.env.actions_per_agent()[agent] as usize;
        let mut q_table: HashMap<u64, Vec<f64>> = HashMap::new();
        let mut steps = 0u64;
        let mut decoded = Vec::new();
        while steps < params.train_steps {
            opponent.reset();
            let mut s = game.initial();
            let mut q = rm.initial;
            for t in 0..h {
                let digest = opponent.obs_digest(s);
                let obs = mix(s, digest, q, t);
                let a_own = {
                    let qs = q_table.entry(obs).or_insert_with(|| vec![1.0; na]);
                    if rng.gen::<f64>() < params.epsilon_greedy {
                        rng.gen_range(0..na)
                    } else {
                        argmax_first(qs)
                    }
                };
                let mut joint = opponent.act(s, rng);
                joint[agent] = a_own as u8;
                let s2 = game.step(s, &joint, rng);
                opponent.note_step(s, &joint, s2);
                steps += 1;
                game.env.decode(s, &mut decoded);
                let mask = rm.mask_of(&decoded);
                let r = rm.step_reward(mask, q) as f64;
                let q2 = rm.update(mask, q);
                let target = if t + 1 < h {
                    let obs2 = mix(s2, opponent.obs_digest(s2), q2, t + 1);
                    r + q_table.get(&obs2).map(|v| v[argmax_first(v)]).unwrap_or(1.0)
                } else {
                    // settle the machine on the final state exactly
                    game.env.decode(s2, &mut decoded);
                    r + rm.step_reward(rm.mask_of(&decoded), q2) as f64
                };
                let qs = q_table.get_mut(&obs).expect("created above");
                qs[a_own] += params.alpha * (target - qs[a_own]);
                s = s2;
                q = q2;
                if steps >= params.train_steps {
                    break;
                }
            }
        }
        // greedy evaluation of the learned best response
        let mut hits = 0usize;
        for _ in 0..params.eval_samples {
            opponent.reset();
            let mut s = game.initial();
            let mut q = rm.initial;
            let mut states = vec![game.decoded(s)];
            for t in 0..h {
                let digest = opponent.obs_digest(s);
                let obs = mix(s, digest, q, t);
                let a_own = q_table.get(&obs).map(|v| argmax_first(v)).unwrap_or(0);
                let mut joint = opponent.act(s, rng);
                joint[agent] = a_own as u8;
                let s2 = game.step(s, &joint, rng);
                opponent.note_step(s, &joint, s2);
                game.env.decode(s, &mut decoded);
                q = rm.update(rm.mask_of(&decoded), q);
                s = s2;
                states.push(game.decoded(s));
            }
            if satisfies(&states, &specs[agent]) {
                hits += 1;
            }
        }
        let j_br = hits as f64 / params.eval_samples as f64;
        gains.push((j_br - base[agent]).max(0.0));
    }
    let eps = gains.iter().copied().fold(0.0f64, f64::max);
    (eps, gains)
}

fn on_path_scores(
    game: &GameModel,
    policy: &mut dyn FrozenOpponent,
    specs: &[Spec],
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut hits = vec![0usize; specs.len()];
    for _ in 0..samples {
        let traj = game.sample_trajectory(policy, game.initial(), game.horizon(), rng);
        let states = traj.decode(game.env.as_ref());
        for (i, spec) in specs.iter().enumerate() {
            if satisfies(&states, spec) {
                hits[i] += 1;
            }
        }
    }
    hits.iter().map(|&c| c as f64 / samples as f64).collect()
}

// ---------------------------------------------------------------------------
// FrozenOpponent implementations
// ---------------------------------------------------------------------------

impl FrozenOpponent for crate::enumeration::PathPolicyExecutor {
    fn obs_digest(&mut self, s: PackedState) -> u64 {
        let m = self.memory(s);
        ((m.z as u64) << 32) | m.monitor as u64
    }
}

impl FrozenOpponent for crate::verification::JoinedPolicy {
    fn obs_digest(&mut self, s: PackedState) -> u64 {
        self.runtime_digest(s)
    }
}
