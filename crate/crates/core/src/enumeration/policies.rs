use super::monitor::EdgeMonitor;
use super::qlearn::EdgePolicy;
use crate::markov_game::{Env, GameModel, JointAction, JointPolicy, PackedState};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Path-policy memory: the index of the current edge along the path plus
/// the packed state of that edge's achievement tracker. `z` equals the
/// path length once every edge has been achieved; the tracker state is
/// then frozen.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Memory {
    pub z: u8,
    pub monitor: u32,
}

/// Deterministic finite-state joint policy executing the edge policies
/// of one product-graph path in order, advancing on first achievement.
pub struct FiniteStatePolicy {
    pub coalition: Vec<usize>,
    /// product edge ids, for reporting
    pub path: Vec<usize>,
    pub policies: Vec<Arc<EdgePolicy>>,
    pub monitors: Vec<Arc<EdgeMonitor>>,
}

impl FiniteStatePolicy {
    pub fn path_len(&self) -> usize {
        self.path.len()
    }

    /// m0: start the first edge's tracker on the initial state, advancing
    /// through any edges already achieved at the boundary.
    pub fn initial_memory(&self, s0: &[u8]) -> Memory {
        let mut z = 0usize;
        let mut m = 0u32;
        while z < self.monitors.len() {
            m = self.monitors[z].init(s0);
            if !self.monitors[z].achieved(m) {
                break;
            }
            z += 1;
        }
        Memory { z: z as u8, monitor: m }
    }

    /// Memory update on observing the next environment state.
    pub fn next_memory(&self, mem: Memory, s_next: &[u8]) -> Memory {
        let mut z = mem.z as usize;
        if z >= self.monitors.len() {
            return mem;
        }
        let mut m = self.monitors[z].step(mem.monitor, s_next);
        while z < self.monitors.len() && self.monitors[z].achieved(m) {
            z += 1;
            if z < self.monitors.len() {
                m = self.monitors[z].init(s_next);
            }
        }
        Memory { z: z as u8, monitor: m }
    }

    /// Output function: the greedy action of the current edge policy
    /// (the last one once the path is complete).
    pub fn action_id(&self, s: PackedState, mem: Memory) -> u16 {
        let idx = (mem.z as usize).min(self.policies.len() - 1);
        self.policies[idx].action_id(s, mem.monitor)
    }
}

/// Drives a [`FiniteStatePolicy`] as a [`JointPolicy`]; memory is
/// initialized lazily from the first observed state.
pub struct PathPolicyExecutor {
    pub policy: Arc<FiniteStatePolicy>,
    env: Arc<dyn Env>,
    sizes: Vec<u8>,
    memory: Option<Memory>,
    scratch: Vec<u8>,
}

impl PathPolicyExecutor {
    pub fn new(policy: Arc<FiniteStatePolicy>, game: &GameModel) -> Self {
        PathPolicyExecutor {
            policy,
            env: game.env.clone(),
            sizes: game.env.actions_per_agent().to_vec(),
            memory: None,
            scratch: Vec::new(),
        }
    }

    pub fn memory(&mut self, s: PackedState) -> Memory {
        match self.memory {
            Some(m) => m,
            None => {
                self.env.decode(s, &mut self.scratch);
                let m = self.policy.initial_memory(&self.scratch);
                self.memory = Some(m);
                m
            }
        }
    }

    fn decode_joint(&self, mut id: usize, out: &mut JointAction) {
        out.clear();
        out.resize(self.sizes.len(), 0);
        for i in (0..self.sizes.len()).rev() {
            out[i] = (id % self.sizes[i] as usize) as u8;
            id /= self.sizes[i] as usize;
        }
    }
}

impl JointPolicy for PathPolicyExecutor {
    fn reset(&mut self) {
        self.memory = None;
    }

    fn act(&mut self, s: PackedState, _rng: &mut ChaCha8Rng) -> JointAction {
        let m = self.memory(s);
        let id = self.policy.action_id(s, m);
        let mut a = JointAction::new();
        self.decode_joint(id as usize, &mut a);
        a
    }

    fn note_step(&mut self, s: PackedState, _executed: &JointAction, next: PackedState) {
        let m = self.memory(s);
        self.env.decode(next, &mut self.scratch);
        self.memory = Some(self.policy.next_memory(m, &self.scratch));
    }
}
