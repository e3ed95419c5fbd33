use super::pungame::PunishmentPlan;
use crate::automata::RewardMachine;
use crate::enumeration::{FiniteStatePolicy, Memory};
use crate::markov_game::{Env, GameModel, JointAction, JointPolicy, PackedState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// The candidate policy joined with punishment strategies: follow the
/// base policy while every agent has followed it; once some agent
/// deviates (earliest deviation, smallest agent index on ties), the
/// others switch to the minimizer policy of that agent's punishment
/// game, replayed by tracking the product state online.
pub struct JoinedPolicy {
    pub base: Arc<FiniteStatePolicy>,
    pub plans: Vec<Option<Arc<PunishmentPlan>>>,
    pub machines: Vec<Arc<RewardMachine>>,
    env: Arc<dyn Env>,
    sizes: Vec<u8>,
    // runtime trace state
    step: usize,
    punishing: Option<usize>,
    mem: Option<Memory>,
    rm_states: Vec<usize>,
    scratch: Vec<u8>,
    /// rollouts that consulted the punisher in an untracked product state
    pub untracked_fallbacks: u64,
}

impl JoinedPolicy {
    pub fn new(
        base: Arc<FiniteStatePolicy>,
        plans: Vec<Option<Arc<PunishmentPlan>>>,
        machines: Vec<Arc<RewardMachine>>,
        game: &GameModel,
    ) -> Self {
        let rm_states = machines.iter().map(|m| m.initial).collect();
        JoinedPolicy {
            base,
            plans,
            machines,
            env: game.env.clone(),
            sizes: game.env.actions_per_agent().to_vec(),
            step: 0,
            punishing: None,
            mem: None,
            rm_states,
            scratch: Vec::new(),
            untracked_fallbacks: 0,
        }
    }

    pub fn currently_punishing(&self) -> Option<usize> {
        self.punishing
    }

    /// Digest of the full runtime state (memory, machine states, step,
    /// punishment mode) for best-response observations.
    pub fn runtime_digest(&mut self, s: PackedState) -> u64 {
        let mem = self.memory(s);
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let parts = [
            ((mem.z as u64) << 32) | mem.monitor as u64,
            self.step as u64,
            self.punishing.map(|j| j as u64 + 1).unwrap_or(0),
        ];
        for part in parts {
            h ^= part;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        for &q in &self.rm_states {
            h ^= q as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        h
    }

    fn memory(&mut self, s: PackedState) -> Memory {
        match self.mem {
            Some(m) => m,
            None => {
                self.env.decode(s, &mut self.scratch);
                let m = self.base.initial_memory(&self.scratch);
                self.mem = Some(m);
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

    fn base_action(&mut self, s: PackedState) -> JointAction {
        let m = self.memory(s);
        let id = self.base.action_id(s, m);
        let mut a = JointAction::new();
        self.decode_joint(id as usize, &mut a);
        a
    }
}

impl JointPolicy for JoinedPolicy {
    fn reset(&mut self) {
        self.step = 0;
        self.punishing = None;
        self.mem = None;
        for (q, m) in self.rm_states.iter_mut().zip(&self.machines) {
            *q = m.initial;
        }
    }

    fn act(&mut self, s: PackedState, rng: &mut ChaCha8Rng) -> JointAction {
        let mut action = self.base_action(s);
        let Some(j) = self.punishing else {
            return action;
        };
        let Some(plan) = self.plans[j].as_ref().map(Arc::clone) else {
            return action;
        };
        let mem = self.memory(s);
        let q = self.rm_states[j];
        let tracked = plan
            .model
            .index
            .get(&s)
            .and_then(|&sid| plan.game.state_id(sid, mem, q, true))
            .filter(|_| self.step < plan.min_policy.len());
        let min_id = match tracked {
            Some(pid) => {
                let dist = &plan.min_policy[self.step][pid];
                sample_index(dist, rng)
            }
            None => {
                self.untracked_fallbacks += 1;
                rng.gen_range(0..plan.game.zs.min_actions)
            }
        };
        let mut others = Vec::new();
        plan.game.decode_min_action(min_id, &mut others);
        let mut oi = 0;
        for (i, slot) in action.iter_mut().enumerate() {
            if i != j {
                *slot = others[oi];
                oi += 1;
            }
        }
        action
    }

    fn note_step(&mut self, s: PackedState, executed: &JointAction, next: PackedState) {
        if self.punishing.is_none() {
            let prescribed = self.base_action(s);
            if let Some(j) = (0..executed.len()).find(|&i| executed[i] != prescribed[i]) {
                self.punishing = Some(j);
            }
        }
        // machine states advance on the pre-state's labels
        self.env.decode(s, &mut self.scratch);
        for (q, m) in self.rm_states.iter_mut().zip(&self.machines) {
            *q = m.update(m.mask_of(&self.scratch), *q);
        }
        let mem = self.memory(s);
        self.env.decode(next, &mut self.scratch);
        self.mem = Some(self.base.next_memory(mem, &self.scratch));
        self.step += 1;
    }
}

fn sample_index(dist: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if x < acc {
            return i;
        }
    }
    dist.len() - 1
}
