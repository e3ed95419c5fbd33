use super::dfa::FiniteAutomaton;
use crate::spec_lang::AtomicPredicate;
use std::collections::HashMap;
use std::sync::Arc;

/// Reward machine compiled from a deterministic complete automaton.
///
/// The update function reads only the state's atom assignment (the joint
/// action argument is ignored). Rewards are +1 on entering the accepting
/// set, -1 on leaving it and 0 otherwise, so the accumulated reward over
/// a trajectory `s_0..s_m` equals the satisfaction indicator of the
/// prefix `s_0..s_{m-1}`.
#[derive(Clone, Debug)]
pub struct RewardMachine {
    pub atoms: Vec<Arc<AtomicPredicate>>,
    pub num_states: usize,
    pub initial: usize,
    pub accepting: Vec<bool>,
    /// dense tables indexed by [rm state][assignment mask]
    trans: Vec<Vec<u16>>,
    reward: Vec<Vec<i8>>,
}

impl RewardMachine {
    pub fn num_assignments(&self) -> usize {
        1usize << self.atoms.len()
    }

    /// delta_u: next machine state given the current state's labels.
    #[inline]
    pub fn update(&self, assignment: u32, q: usize) -> usize {
        self.trans[q][assignment as usize] as usize
    }

    /// delta_r: step reward emitted from `q` on a state with these labels.
    #[inline]
    pub fn step_reward(&self, assignment: u32, q: usize) -> i8 {
        self.reward[q][assignment as usize]
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    /// Assignment mask of a decoded environment state.
    pub fn mask_of(&self, state: &[u8]) -> u32 {
        let mut m = 0;
        for (i, atom) in self.atoms.iter().enumerate() {
            if atom.eval(state) {
                m |= 1 << i;
            }
        }
        m
    }
}

/// Build the reward machine for a deterministic, complete automaton.
pub fn dfa_to_rm(dfa: &FiniteAutomaton) -> RewardMachine {
    assert!(dfa.deterministic, "reward machines require a deterministic automaton");
    let num_masks = dfa.num_assignments();
    let mut trans = vec![vec![0u16; num_masks]; dfa.num_states];
    let mut reward = vec![vec![0i8; num_masks]; dfa.num_states];
    let mut accepting = vec![false; dfa.num_states];
    for (q, acc) in accepting.iter_mut().enumerate() {
        *acc = dfa.accepting.contains(&q);
    }
    for q in 0..dfa.num_states {
        for mask in 0..num_masks as u32 {
            let q2 = dfa.step(q, mask);
            trans[q][mask as usize] = q2 as u16;
            reward[q][mask as usize] = match (accepting[q], accepting[q2]) {
                (false, true) => 1,
                (true, false) => -1,
                _ => 0,
            };
        }
    }
    RewardMachine {
        atoms: dfa.atoms.clone(),
        num_states: dfa.num_states,
        initial: dfa.initial,
        accepting,
        trans,
        reward,
    }
}

/// Memoized environment-state-to-assignment labelling for one machine.
pub struct Labeler {
    cache: HashMap<u32, u32>,
    scratch: Vec<u8>,
}

impl Labeler {
    pub fn new() -> Self {
        Labeler { cache: HashMap::new(), scratch: Vec::new() }
    }

    pub fn mask(
        &mut self,
        rm: &RewardMachine,
        packed: u32,
        decode: impl FnOnce(u32, &mut Vec<u8>),
    ) -> u32 {
        if let Some(&m) = self.cache.get(&packed) {
            return m;
        }
        decode(packed, &mut self.scratch);
        let m = rm.mask_of(&self.scratch);
        self.cache.insert(packed, m);
        m
    }
}

impl Default for Labeler {
    fn default() -> Self {
        Self::new()
    }
}

/// Total reward of the machine on a trajectory given as decoded states.
/// Actions do not influence the result; the update ignores them.
pub fn rm_total_reward(rm: &RewardMachine, states: &[Vec<u8>]) -> i64 {
    assert!(!states.is_empty());
    let mut q = rm.initial;
    let mut total = 0i64;
    for s in &states[..states.len() - 1] {
        let mask = rm.mask_of(s);
        total += rm.step_reward(mask, q) as i64;
        q = rm.update(mask, q);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::spec_to_dfa;
    use crate::spec_lang::{parse_spec, satisfies, PredicateTable};
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeMap;

    fn bit_table() -> PredicateTable {
        let mut t = BTreeMap::new();
        for (i, name) in ["a", "b", "c"].iter().enumerate() {
            t.insert(
                name.to_string(),
                Arc::new(AtomicPredicate::new(name, move |s: &[u8]| s[0] & (1 << i) != 0)),
            );
        }
        PredicateTable::new(t)
    }

    #[test]
    fn reward_is_prefix_indicator() {
        let t = bit_table();
        for src in ["achieve b", "achieve b ensuring c", "achieve a ; achieve b", "achieve true"] {
            let spec = parse_spec(src, &t).unwrap();
            let rm = dfa_to_rm(&spec_to_dfa(&spec).unwrap());
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
            for _ in 0..500 {
                let len = rng.gen_range(2..=7);
                let states: Vec<Vec<u8>> =
                    (0..len).map(|_| vec![rng.gen_range(0..8u8)]).collect();
                let expected = satisfies(&states[..states.len() - 1], &spec) as i64;
                assert_eq!(rm_total_reward(&rm, &states), expected, "spec `{src}`");
            }
        }
    }

    #[test]
    fn plus_minus_cancellation() {
        let t = bit_table();
        // b then leaving b: enter/leave accepting twice, net zero
        let spec = parse_spec("achieve b ensuring b", &t).unwrap();
        let rm = dfa_to_rm(&spec_to_dfa(&spec).unwrap());
        // states: b, not-b, b, not-b  -> run never ends accepting
        let states: Vec<Vec<u8>> = vec![vec![0b010], vec![0], vec![0b010], vec![0]];
        assert_eq!(rm_total_reward(&rm, &states), 0);
        // entering accepting once and staying: total 1
        let spec = parse_spec("achieve b", &t).unwrap();
        let rm = dfa_to_rm(&spec_to_dfa(&spec).unwrap());
        let states: Vec<Vec<u8>> = vec![vec![0], vec![0b010], vec![0], vec![0]];
        assert_eq!(rm_total_reward(&rm, &states), 1);
        // run never touching accepting: all-zero rewards
        let states: Vec<Vec<u8>> = vec![vec![0], vec![0], vec![0]];
        assert_eq!(rm_total_reward(&rm, &states), 0);
    }

    #[test]
    fn rm_size_within_subset_bound() {
        let t = bit_table();
        let spec = parse_spec("(achieve a ; achieve b) or (achieve c ensuring a)", &t).unwrap();
        let nfa_states = 8; // 2 per achieve, composed
        let rm = dfa_to_rm(&spec_to_dfa(&spec).unwrap());
        assert!(rm.num_states <= (1 << nfa_states) + 1);
    }
}
