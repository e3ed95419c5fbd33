//! Finite-horizon n-agent Markov game interface with resettable
//! simulation, plus the benchmark environments.
//!
//! States are packed into `u32` ids by each environment; predicates read
//! the decoded feature vector. The simulator can be (re)started from any
//! previously observed state, which the model-estimation pass relies on.

mod envs;

pub use envs::{gridworld_env, intersection_env, single_lane_env, EnvConfigError};

use crate::spec_lang::{satisfies, Spec, StateVec};
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub type PackedState = u32;

/// One action index per agent.
pub type JointAction = Vec<u8>;

/// Environment dynamics. `sample` must honor the resettable-simulation
/// contract: it can be called with any state returned before.
pub trait Env: Send + Sync {
    fn name(&self) -> &str;
    fn num_agents(&self) -> usize;
    fn actions_per_agent(&self) -> &[u8];
    fn horizon(&self) -> usize;
    fn initial(&self) -> PackedState;
    fn decode(&self, s: PackedState, out: &mut Vec<u8>);
    fn sample(&self, s: PackedState, action: &[u8], rng: &mut ChaCha8Rng) -> PackedState;
    /// Exact next-state distribution; used by test oracles, never by the
    /// learning or verification paths.
    fn exact_transitions(&self, s: PackedState, action: &[u8]) -> Vec<(PackedState, f64)>;
    fn predicate_table(&self) -> &crate::spec_lang::PredicateTable;
}

/// A joint policy driven against the simulator. Implementations carry
/// their own memory; `note_step` reports the transition actually
/// executed, whose action may differ from the policy's own choice
/// (deviations).
pub trait JointPolicy {
    fn reset(&mut self);
    fn act(&mut self, s: PackedState, rng: &mut ChaCha8Rng) -> JointAction;
    fn note_step(&mut self, s: PackedState, executed: &JointAction, next: PackedState);
}

/// A trajectory of packed states and the joint actions between them.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<PackedState>,
    pub actions: Vec<JointAction>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn decode(&self, env: &dyn Env) -> Vec<StateVec> {
        self.states
            .iter()
            .map(|&s| {
                let mut v = Vec::new();
                env.decode(s, &mut v);
                v
            })
            .collect()
    }
}

/// Per-agent satisfaction estimates and their average.
#[derive(Clone, Debug)]
pub struct ScoreReport {
    pub per_agent: Vec<f64>,
    pub welfare: f64,
    pub samples: usize,
    pub std_error: f64,
}

/// An environment together with a global sample-step counter.
#[derive(Clone)]
pub struct GameModel {
    pub env: Arc<dyn Env>,
    steps: Arc<AtomicU64>,
}

impl GameModel {
    pub fn new(env: Arc<dyn Env>) -> Self {
        GameModel { env, steps: Arc::new(AtomicU64::new(0)) }
    }

    pub fn sample_steps(&self) -> u64 {
        self.steps.load(Ordering::Relaxed)
    }

    pub fn num_agents(&self) -> usize {
        self.env.num_agents()
    }

    pub fn horizon(&self) -> usize {
        self.env.horizon()
    }

    pub fn initial(&self) -> PackedState {
        self.env.initial()
    }

    /// Number of joint actions, and mixed-radix codec between a joint
    /// action id and per-agent action indices.
    pub fn num_joint_actions(&self) -> usize {
        self.env.actions_per_agent().iter().map(|&a| a as usize).product()
    }

    pub fn decode_joint(&self, mut id: usize, out: &mut JointAction) {
        let sizes = self.env.actions_per_agent();
        out.clear();
        out.resize(sizes.len(), 0);
        for i in (0..sizes.len()).rev() {
            out[i] = (id % sizes[i] as usize) as u8;
            id /= sizes[i] as usize;
        }
    }

    pub fn encode_joint(&self, action: &[u8]) -> usize {
        let sizes = self.env.actions_per_agent();
        let mut id = 0usize;
        for (i, &a) in action.iter().enumerate() {
            id = id * sizes[i] as usize + a as usize;
        }
        id
    }

    #[inline]
    pub fn step(&self, s: PackedState, action: &[u8], rng: &mut ChaCha8Rng) -> PackedState {
        self.steps.fetch_add(1, Ordering::Relaxed);
        self.env.sample(s, action, rng)
    }

    pub fn decoded(&self, s: PackedState) -> StateVec {
        let mut v = Vec::new();
        self.env.decode(s, &mut v);
        v
    }

    /// Roll out `policy` for `steps` transitions starting at `from`.
    pub fn sample_trajectory(
        &self,
        policy: &mut dyn JointPolicy,
        from: PackedState,
        steps: usize,
        rng: &mut ChaCha8Rng,
    ) -> Trajectory {
        let mut states = Vec::with_capacity(steps + 1);
        let mut actions = Vec::with_capacity(steps);
        let mut s = from;
        states.push(s);
        policy.reset();
        for _ in 0..steps {
            let a = policy.act(s, rng);
            let s2 = self.step(s, &a, rng);
            policy.note_step(s, &a, s2);
            states.push(s2);
            actions.push(a);
            s = s2;
        }
        Trajectory { states, actions }
    }

    /// Monte-Carlo estimate of each agent's satisfaction probability
    /// over horizon-length rollouts from the initial state.
    pub fn estimate_scores(
        &self,
        policy: &mut dyn JointPolicy,
        specs: &[Spec],
        num_samples: usize,
        rng: &mut ChaCha8Rng,
    ) -> ScoreReport {
        assert!(num_samples >= 1);
        let n = specs.len();
        let mut hits = vec![0usize; n];
        let mut welfare_sq = 0.0f64;
        let mut welfare_sum = 0.0f64;
        for _ in 0..num_samples {
            let traj = self.sample_trajectory(policy, self.initial(), self.horizon(), rng);
            let decoded = traj.decode(self.env.as_ref());
            let mut w = 0.0;
            for (i, spec) in specs.iter().enumerate() {
                if satisfies(&decoded, spec) {
                    hits[i] += 1;
                    w += 1.0;
                }
            }
            w /= n as f64;
            welfare_sum += w;
            welfare_sq += w * w;
        }
        let per_agent: Vec<f64> = hits.iter().map(|&h| h as f64 / num_samples as f64).collect();
        let welfare = welfare_sum / num_samples as f64;
        let var = (welfare_sq / num_samples as f64 - welfare * welfare).max(0.0);
        ScoreReport {
            per_agent,
            welfare,
            samples: num_samples,
            std_error: (var / num_samples as f64).sqrt(),
        }
    }
}

/// Uniformly random policy; handy for tests and fallbacks.
pub struct RandomPolicy {
    pub sizes: Vec<u8>,
}

impl JointPolicy for RandomPolicy {
    fn reset(&mut self) {}
    fn act(&mut self, _s: PackedState, rng: &mut ChaCha8Rng) -> JointAction {
        use rand::Rng;
        self.sizes.iter().map(|&k| rng.gen_range(0..k)).collect()
    }
    fn note_step(&mut self, _s: PackedState, _a: &JointAction, _next: PackedState) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_lang::parse_spec;
    use rand::SeedableRng;

    fn lane(agents: usize, len: u8, h: usize) -> GameModel {
        GameModel::new(Arc::new(single_lane_env(agents, len, h, 0.05).unwrap()))
    }

    #[test]
    fn all_stay_is_identity() {
        let g = lane(3, 5, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s0 = g.initial();
        for _ in 0..50 {
            assert_eq!(g.step(s0, &[0, 0, 0], &mut rng), s0);
        }
        // absorbing goal under MOVE
        let env = &g.env;
        let mut v = Vec::new();
        let mut s = s0;
        for _ in 0..300 {
            s = g.step(s, &[1, 1, 1], &mut rng);
        }
        env.decode(s, &mut v);
        assert_eq!(v, vec![5, 5, 5]);
        for _ in 0..20 {
            assert_eq!(g.step(s, &[1, 1, 1], &mut rng), s);
        }
    }

    #[test]
    fn move_succeeds_with_point_95() {
        let g = lane(1, 3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s0 = g.initial();
        let n = 100_000;
        let mut moved = 0;
        for _ in 0..n {
            if g.step(s0, &[1], &mut rng) != s0 {
                moved += 1;
            }
        }
        let p = moved as f64 / n as f64;
        let sigma = (0.95f64 * 0.05 / n as f64).sqrt();
        assert!((p - 0.95).abs() < 3.0 * sigma, "p = {p}");
        // exact transitions conserve probability
        for (s, a) in [(s0, vec![1u8]), (s0, vec![0u8])] {
            let total: f64 = g.env.exact_transitions(s, &a).iter().map(|&(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_trajectories_are_identical() {
        let g = lane(2, 4, 8);
        let mut p1 = RandomPolicy { sizes: vec![2, 2] };
        let mut rng_a = ChaCha8Rng::seed_from_u64(99);
        let mut rng_b = ChaCha8Rng::seed_from_u64(99);
        let ta = g.sample_trajectory(&mut p1, g.initial(), 8, &mut rng_a);
        let tb = g.sample_trajectory(&mut p1, g.initial(), 8, &mut rng_b);
        assert_eq!(ta.states, tb.states);
        assert_eq!(ta.actions, tb.actions);
        // zero-step trajectory is a single state
        let t0 = g.sample_trajectory(&mut p1, g.initial(), 0, &mut rng_a);
        assert_eq!(t0.states.len(), 1);
        assert!(t0.is_empty());
    }

    #[test]
    fn trivial_scores() {
        let g = lane(2, 3, 6);
        let table = g.env.predicate_table().clone();
        let specs = vec![
            parse_spec("achieve true", &table).unwrap(),
            parse_spec("achieve false", &table).unwrap(),
        ];
        let mut pol = RandomPolicy { sizes: vec![2, 2] };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = g.estimate_scores(&mut pol, &specs, 200, &mut rng);
        assert_eq!(r.per_agent, vec![1.0, 0.0]);
        assert!((r.welfare - 0.5).abs() < 1e-12);
    }

    /// Restarting from an observed state reproduces the conditional
    /// next-state distribution (resettable-simulation contract).
    #[test]
    fn reset_matches_organic_distribution() {
        let g = lane(1, 4, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // organic: two MOVE steps, record second-step outcome when the
        // first move landed at 1
        let s0 = g.initial();
        let mut organic = [0u64; 2];
        let mut via_reset = [0u64; 2];
        let mut mid = None;
        for _ in 0..60_000 {
            let s1 = g.step(s0, &[1], &mut rng);
            if g.decoded(s1)[0] == 1 {
                mid = Some(s1);
                let s2 = g.step(s1, &[1], &mut rng);
                organic[(g.decoded(s2)[0] == 2) as usize] += 1;
            }
        }
        let mid = mid.unwrap();
        for _ in 0..60_000 {
            let s2 = g.step(mid, &[1], &mut rng);
            via_reset[(g.decoded(s2)[0] == 2) as usize] += 1;
        }
        let p_org = organic[1] as f64 / (organic[0] + organic[1]) as f64;
        let p_rst = via_reset[1] as f64 / (via_reset[0] + via_reset[1]) as f64;
        assert!((p_org - p_rst).abs() < 0.01, "{p_org} vs {p_rst}");
    }

    #[test]
    fn gridworld_moves_clip_and_fail() {
        let g = GameModel::new(Arc::new(gridworld_env(4, 12, 0.05).unwrap()));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s0 = g.initial();
        // agent 0 at (0,0): moving down (negative y) keeps it in place
        let mut v = Vec::new();
        g.env.decode(s0, &mut v);
        assert_eq!(v, vec![0, 0, 3, 3]);
        let s = g.step(s0, &[2, 0], &mut rng);
        g.env.decode(s, &mut v);
        assert_eq!(&v[..2], &[0, 0]);
        // stay is identity
        assert_eq!(g.step(s0, &[0, 0], &mut rng), s0);
        // cardinal move succeeds with probability 1 - 0.05
        let mut moved = 0;
        let n = 50_000;
        for _ in 0..n {
            let s = g.step(s0, &[1, 0], &mut rng); // up: y+1
            if s != s0 {
                moved += 1;
            }
        }
        let p = moved as f64 / n as f64;
        let sigma = (0.95f64 * 0.05 / n as f64).sqrt();
        assert!((p - 0.95).abs() < 3.0 * sigma, "p = {p}");
    }

    #[test]
    fn intersection_crossing_and_collision_atoms() {
        let env = intersection_env(&[3, 3], &[2], 10, 0.05).unwrap();
        let g = GameModel::new(Arc::new(env));
        let t = g.env.predicate_table().clone();
        let crossed0 = t.get("crossed_0").unwrap().clone();
        let safe0 = t.get("safe_0").unwrap().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut v = Vec::new();
        g.env.decode(g.initial(), &mut v);
        assert_eq!(v, vec![3, 3, 2]);
        assert!(!crossed0.eval(&v));
        assert!(safe0.eval(&v));
        // both NS cars in the crossing cell: both unsafe; EW car at 1 too
        assert!(!safe0.eval(&[1, 1, 2]));
        assert!(!safe0.eval(&[1, 2, 1]));
        // same non-crossing position is fine; 0-cell sharing is fine
        assert!(safe0.eval(&[3, 3, 2]));
        assert!(safe0.eval(&[0, 0, 0]));
        assert!(crossed0.eval(&[0, 3, 2]));
        // MOVE decrements with probability 0.95, floors at 0
        let s = g.initial();
        let mut hits = 0;
        let n = 50_000;
        for _ in 0..n {
            let s2 = g.step(s, &[1, 0, 0], &mut rng);
            g.env.decode(s2, &mut v);
            if v[0] == 2 {
                hits += 1;
            } else {
                assert_eq!(v[0], 3);
            }
        }
        let p = hits as f64 / n as f64;
        assert!((p - 0.95).abs() < 3.0 * (0.95f64 * 0.05 / n as f64).sqrt());
    }
}
