use crate::spec_lang::{AtomicPredicate, Predicate, Spec};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use thiserror::Error;

/// Hard default on determinization growth; benchmark specs stay far below.
pub const DEFAULT_STATE_CAP: usize = 4096;

#[derive(Debug, Error)]
pub enum AutomataError {
    #[error("state budget exceeded: construction needs more than {cap} states")]
    StateBudgetExceeded { cap: usize },
    #[error("too many atoms for assignment enumeration: {got} (max {max})")]
    TooManyAtoms { got: usize, max: usize },
}

/// Boolean transition guard over indexed atoms. An assignment is a
/// bitmask whose i-th bit is the truth value of atom i.
#[derive(Clone, Debug, PartialEq)]
pub enum Guard {
    True,
    False,
    Atom(usize),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn eval(&self, assignment: u32) -> bool {
        match self {
            Guard::True => true,
            Guard::False => false,
            Guard::Atom(i) => assignment & (1 << i) != 0,
            Guard::Not(g) => !g.eval(assignment),
            Guard::And(l, r) => l.eval(assignment) && r.eval(assignment),
            Guard::Or(l, r) => l.eval(assignment) || r.eval(assignment),
        }
    }

    fn and(self, other: Guard) -> Guard {
        match (&self, &other) {
            (Guard::True, _) => other,
            (_, Guard::True) => self,
            _ => Guard::And(Box::new(self), Box::new(other)),
        }
    }

    /// Disjunctive normal form over explicit satisfying assignments.
    fn from_assignments(masks: &BTreeSet<u32>, num_atoms: usize) -> Guard {
        if masks.len() == (1usize << num_atoms) {
            return Guard::True;
        }
        let mut out: Option<Guard> = None;
        for &m in masks {
            let mut term: Option<Guard> = None;
            for bit in 0..num_atoms {
                let lit = if m & (1 << bit) != 0 {
                    Guard::Atom(bit)
                } else {
                    Guard::Not(Box::new(Guard::Atom(bit)))
                };
                term = Some(match term {
                    None => lit,
                    Some(t) => Guard::And(Box::new(t), Box::new(lit)),
                });
            }
            let term = term.unwrap_or(Guard::True);
            out = Some(match out {
                None => term,
                Some(o) => Guard::Or(Box::new(o), Box::new(term)),
            });
        }
        out.unwrap_or(Guard::False)
    }

    /// Render with atom names for inspection dumps.
    pub fn render(&self, atoms: &[Arc<AtomicPredicate>]) -> String {
        match self {
            Guard::True => "true".into(),
            Guard::False => "false".into(),
            Guard::Atom(i) => atoms[*i].name().to_string(),
            Guard::Not(g) => format!("!{}", g.render(atoms)),
            Guard::And(l, r) => format!("({} & {})", l.render(atoms), r.render(atoms)),
            Guard::Or(l, r) => format!("({} | {})", l.render(atoms), r.render(atoms)),
        }
    }
}

fn pred_to_guard(p: &Predicate, atoms: &[Arc<AtomicPredicate>]) -> Guard {
    match p {
        Predicate::Atom(a) => match a.as_constant() {
            Some(true) => Guard::True,
            Some(false) => Guard::False,
            None => {
                let idx = atoms
                    .iter()
                    .position(|x| x.name() == a.name())
                    .expect("atom missing from alphabet basis");
                Guard::Atom(idx)
            }
        },
        Predicate::And(l, r) => Guard::And(
            Box::new(pred_to_guard(l, atoms)),
            Box::new(pred_to_guard(r, atoms)),
        ),
        Predicate::Or(l, r) => Guard::Or(
            Box::new(pred_to_guard(l, atoms)),
            Box::new(pred_to_guard(r, atoms)),
        ),
    }
}

/// Finite automaton with guard-labelled transitions. The alphabet is the
/// set of assignments over `atoms`; guards are checked semantically by
/// evaluating them on assignments.
#[derive(Clone, Debug)]
pub struct FiniteAutomaton {
    pub atoms: Vec<Arc<AtomicPredicate>>,
    pub num_states: usize,
    /// per source state: (guard, target)
    pub transitions: Vec<Vec<(Guard, usize)>>,
    pub initial: usize,
    pub accepting: BTreeSet<usize>,
    pub deterministic: bool,
}

impl FiniteAutomaton {
    pub fn num_assignments(&self) -> usize {
        1usize << self.atoms.len()
    }

    /// Successor set of `state` under `assignment`.
    pub fn successors(&self, state: usize, assignment: u32) -> Vec<usize> {
        self.transitions[state]
            .iter()
            .filter(|(g, _)| g.eval(assignment))
            .map(|&(_, t)| t)
            .collect()
    }

    /// Word acceptance by subset simulation (valid for NFAs and DFAs).
    pub fn accepts(&self, word: &[u32]) -> bool {
        let mut current: BTreeSet<usize> = BTreeSet::from([self.initial]);
        for &sym in word {
            let mut next = BTreeSet::new();
            for &s in &current {
                next.extend(self.successors(s, sym));
            }
            current = next;
            if current.is_empty() {
                return false;
            }
        }
        current.iter().any(|s| self.accepting.contains(s))
    }

    /// Unique successor for a deterministic complete automaton.
    pub fn step(&self, state: usize, assignment: u32) -> usize {
        debug_assert!(self.deterministic);
        let succ = self.successors(state, assignment);
        debug_assert_eq!(succ.len(), 1, "automaton not deterministic+complete");
        succ[0]
    }
}

const MAX_ATOMS: usize = 16;

/// Compile a specification to a deterministic, complete automaton whose
/// accepted label sequences are exactly those of satisfying trajectories.
pub fn spec_to_dfa(spec: &Spec) -> Result<FiniteAutomaton, AutomataError> {
    spec_to_dfa_capped(spec, DEFAULT_STATE_CAP)
}

pub fn spec_to_dfa_capped(spec: &Spec, cap: usize) -> Result<FiniteAutomaton, AutomataError> {
    let atoms = spec.atoms();
    if atoms.len() > MAX_ATOMS {
        return Err(AutomataError::TooManyAtoms { got: atoms.len(), max: MAX_ATOMS });
    }
    let nfa = build_nfa(spec, &atoms);
    let dfa = determinize_capped(&nfa, cap)?;
    Ok(complete(&dfa))
}

/// Structural induction; the produced automaton may be nondeterministic
/// after the sequencing and choice cases.
fn build_nfa(spec: &Spec, atoms: &[Arc<AtomicPredicate>]) -> FiniteAutomaton {
    match spec {
        Spec::Achieve(b) => {
            let g = pred_to_guard(b, atoms);
            FiniteAutomaton {
                atoms: atoms.to_vec(),
                num_states: 2,
                transitions: vec![
                    vec![(Guard::Not(Box::new(g.clone())), 0), (g, 1)],
                    vec![(Guard::True, 1)],
                ],
                initial: 0,
                accepting: BTreeSet::from([1]),
                deterministic: false,
            }
        }
        Spec::Ensuring(inner, b) => {
            let mut a = build_nfa(inner, atoms);
            let g = pred_to_guard(b, atoms);
            for row in &mut a.transitions {
                for (guard, _) in row.iter_mut() {
                    *guard = std::mem::replace(guard, Guard::True).and(g.clone());
                }
            }
            a
        }
        Spec::Seq(first, second) => {
            let a = build_nfa(first, atoms);
            let b = build_nfa(second, atoms);
            let off = a.num_states;
            let mut transitions = a.transitions.clone();
            // incoming edges to accepting states of the first automaton are
            // duplicated to divert into the second automaton's initial state
            for (src, row) in a.transitions.iter().enumerate() {
                for (g, t) in row {
                    if a.accepting.contains(t) {
                        transitions[src].push((g.clone(), b.initial + off));
                    }
                }
            }
            for row in &b.transitions {
                transitions.push(row.iter().map(|(g, t)| (g.clone(), t + off)).collect());
            }
            FiniteAutomaton {
                atoms: atoms.to_vec(),
                num_states: a.num_states + b.num_states,
                transitions,
                initial: a.initial,
                accepting: b.accepting.iter().map(|t| t + off).collect(),
                deterministic: false,
            }
        }
        Spec::Choice(left, right) => {
            let a = build_nfa(left, atoms);
            let b = build_nfa(right, atoms);
            let off = a.num_states;
            let mut transitions = a.transitions.clone();
            for row in &b.transitions {
                transitions.push(row.iter().map(|(g, t)| (g.clone(), t + off)).collect());
            }
            // the merged initial state also carries the second automaton's
            // initial transitions; the old initial of `b` becomes unreachable
            let b_init_rows: Vec<(Guard, usize)> = b.transitions[b.initial]
                .iter()
                .map(|(g, t)| (g.clone(), t + off))
                .collect();
            transitions[a.initial].extend(b_init_rows);
            let mut accepting: BTreeSet<usize> = a.accepting.clone();
            accepting.extend(b.accepting.iter().map(|t| t + off));
            FiniteAutomaton {
                atoms: atoms.to_vec(),
                num_states: a.num_states + b.num_states,
                transitions,
                initial: a.initial,
                accepting,
                deterministic: false,
            }
        }
    }
}

/// Subset construction over the assignment alphabet.
pub fn determinize(nfa: &FiniteAutomaton) -> Result<FiniteAutomaton, AutomataError> {
    determinize_capped(nfa, DEFAULT_STATE_CAP)
}

pub fn determinize_capped(
    nfa: &FiniteAutomaton,
    cap: usize,
) -> Result<FiniteAutomaton, AutomataError> {
    let num_atoms = nfa.atoms.len();
    if num_atoms > MAX_ATOMS {
        return Err(AutomataError::TooManyAtoms { got: num_atoms, max: MAX_ATOMS });
    }
    let num_masks = 1u32 << num_atoms;

    let mut subset_ids: BTreeMap<BTreeSet<usize>, usize> = BTreeMap::new();
    let mut subsets: Vec<BTreeSet<usize>> = Vec::new();
    let mut table: Vec<Vec<usize>> = Vec::new(); // [subset][mask] -> subset id
    let start: BTreeSet<usize> = BTreeSet::from([nfa.initial]);
    subset_ids.insert(start.clone(), 0);
    subsets.push(start);
    let mut frontier = vec![0usize];
    while let Some(id) = frontier.pop() {
        while table.len() <= id {
            table.push(Vec::new());
        }
        let mut row = Vec::with_capacity(num_masks as usize);
        for mask in 0..num_masks {
            let mut next = BTreeSet::new();
            for &s in &subsets[id] {
                for &(ref g, t) in &nfa.transitions[s] {
                    if g.eval(mask) {
                        next.insert(t);
                    }
                }
            }
            let nid = match subset_ids.get(&next) {
                Some(&n) => n,
                None => {
                    let n = subsets.len();
                    if n >= cap {
                        return Err(AutomataError::StateBudgetExceeded { cap });
                    }
                    subset_ids.insert(next.clone(), n);
                    subsets.push(next);
                    frontier.push(n);
                    n
                }
            };
            row.push(nid);
        }
        table[id] = row;
    }

    // re-compress per-target assignment sets into DNF guards
    let mut transitions: Vec<Vec<(Guard, usize)>> = Vec::with_capacity(subsets.len());
    for row in &table {
        let mut by_target: BTreeMap<usize, BTreeSet<u32>> = BTreeMap::new();
        for (mask, &t) in row.iter().enumerate() {
            by_target.entry(t).or_default().insert(mask as u32);
        }
        transitions.push(
            by_target
                .into_iter()
                .map(|(t, masks)| (Guard::from_assignments(&masks, num_atoms), t))
                .collect(),
        );
    }
    let accepting = subsets
        .iter()
        .enumerate()
        .filter(|(_, sub)| sub.iter().any(|s| nfa.accepting.contains(s)))
        .map(|(i, _)| i)
        .collect();
    Ok(FiniteAutomaton {
        atoms: nfa.atoms.clone(),
        num_states: subsets.len(),
        transitions,
        initial: 0,
        accepting,
        deterministic: true,
    })
}

/// Add a rejecting sink for any (state, assignment) without a successor,
/// so every assignment has exactly one transition from every state.
pub fn complete(dfa: &FiniteAutomaton) -> FiniteAutomaton {
    let num_atoms = dfa.atoms.len();
    let num_masks = 1u32 << num_atoms;
    let mut out = dfa.clone();
    let sink = out.num_states;
    let mut sink_needed = false;
    for s in 0..dfa.num_states {
        let mut missing = BTreeSet::new();
        for mask in 0..num_masks {
            let n = dfa.successors(s, mask).len();
            debug_assert!(n <= 1, "complete() requires a deterministic automaton");
            if n == 0 {
                missing.insert(mask);
            }
        }
        if !missing.is_empty() {
            sink_needed = true;
            out.transitions[s].push((Guard::from_assignments(&missing, num_atoms), sink));
        }
    }
    if sink_needed {
        out.num_states += 1;
        out.transitions.push(vec![(Guard::True, sink)]);
    }
    out.deterministic = true;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_lang::{parse_spec, satisfies, AtomicPredicate, PredicateTable};
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeMap;

    fn bit_table() -> PredicateTable {
        // atoms a,b,c read bits 0,1,2 of a single-feature state
        let mut t = BTreeMap::new();
        for (i, name) in ["a", "b", "c"].iter().enumerate() {
            t.insert(
                name.to_string(),
                Arc::new(AtomicPredicate::new(name, move |s: &[u8]| s[0] & (1 << i) != 0)),
            );
        }
        PredicateTable::new(t)
    }

    /// Label a state (0..8) with its assignment mask over the dfa's atoms.
    fn label(dfa: &FiniteAutomaton, state: u8) -> u32 {
        let mut m = 0;
        for (i, atom) in dfa.atoms.iter().enumerate() {
            if atom.eval(&[state]) {
                m |= 1 << i;
            }
        }
        m
    }

    #[test]
    fn eventually_shape() {
        let t = bit_table();
        let spec = parse_spec("achieve b", &t).unwrap();
        let dfa = spec_to_dfa(&spec).unwrap();
        assert_eq!(dfa.num_states, 2);
        assert_eq!(dfa.accepting.len(), 1);
        // self-loop on not-b at initial, b to accepting, true self-loop there
        let acc = *dfa.accepting.iter().next().unwrap();
        for mask in 0..dfa.num_assignments() as u32 {
            let from_init = dfa.step(dfa.initial, mask);
            let b_holds = mask & 0b001 != 0; // atom order: only `b` appears
            assert_eq!(from_init == acc, b_holds);
            assert_eq!(dfa.step(acc, mask), acc);
        }
    }

    #[test]
    fn always_conjoins_guards() {
        let t = bit_table();
        let plain = spec_to_dfa(&parse_spec("achieve b", &t).unwrap()).unwrap();
        let guarded = spec_to_dfa(&parse_spec("achieve b ensuring c", &t).unwrap()).unwrap();
        // same skeleton plus a sink; acceptance now requires c throughout
        let word_ok: Vec<u32> = [0b01u8, 0b11].iter().map(|&s| label(&guarded, s)).collect();
        // build words over states where c holds: c = bit 2
        let w_good: Vec<u32> = [0b100u8, 0b110].iter().map(|&s| label(&guarded, s)).collect();
        let w_bad: Vec<u32> = [0b000u8, 0b010].iter().map(|&s| label(&guarded, s)).collect();
        assert!(guarded.accepts(&w_good));
        assert!(!guarded.accepts(&w_bad));
        let _ = (plain, word_ok);
    }

    #[test]
    fn determinize_unique_runs_and_empty_nfa() {
        // 2-state NFA with overlapping guards b and b|c
        let t = bit_table();
        let spec = parse_spec("achieve b", &t).unwrap();
        let atoms = spec.atoms();
        let g_b = Guard::Atom(0);
        let g_bc = Guard::Or(Box::new(Guard::Atom(0)), Box::new(Guard::Atom(1)));
        let nfa = FiniteAutomaton {
            atoms: {
                let mut v = atoms;
                v.push(t.get("c").unwrap().clone());
                v
            },
            num_states: 2,
            transitions: vec![vec![(g_b, 0), (g_bc, 1)], vec![(Guard::True, 1)]],
            initial: 0,
            accepting: BTreeSet::from([1]),
            deterministic: false,
        };
        let dfa = determinize(&nfa).unwrap();
        assert!(dfa.deterministic);
        for s in 0..dfa.num_states {
            for mask in 0..4u32 {
                assert_eq!(dfa.successors(s, mask).len(), 1);
            }
        }
        // language preserved on sampled words
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let w: Vec<u32> = (0..rng.gen_range(0..6)).map(|_| rng.gen_range(0..4)).collect();
            assert_eq!(nfa.accepts(&w), dfa.accepts(&w));
        }
        // empty accepting set rejects everything
        let dead = FiniteAutomaton { accepting: BTreeSet::new(), ..nfa.clone() };
        let det = determinize(&dead).unwrap();
        for _ in 0..50 {
            let w: Vec<u32> = (0..rng.gen_range(0..6)).map(|_| rng.gen_range(0..4)).collect();
            assert!(!det.accepts(&w));
        }
    }

    #[test]
    fn completion_adds_sink_only_when_needed() {
        let t = bit_table();
        let dfa = spec_to_dfa(&parse_spec("achieve b", &t).unwrap()).unwrap();
        let completed = complete(&dfa);
        assert_eq!(completed.num_states, dfa.num_states);
        // drop the not-b self-loop: completion must add a sink
        let mut partial = dfa.clone();
        partial.transitions[dfa.initial].retain(|(g, _)| !matches!(g, Guard::Not(_)));
        let fixed = complete(&partial);
        assert_eq!(fixed.num_states, dfa.num_states + 1);
        for s in 0..fixed.num_states {
            for mask in 0..2u32 {
                assert_eq!(fixed.successors(s, mask).len(), 1);
            }
        }
    }

    fn random_spec(rng: &mut impl Rng, t: &PredicateTable, budget: &mut usize) -> crate::Spec {
        use crate::Spec;
        let atoms = ["a", "b", "c"];
        let atom =
            |rng: &mut dyn rand::RngCore| atoms[(rng.next_u32() % 3) as usize].to_string();
        if *budget <= 1 || rng.gen_bool(0.4) {
            *budget = budget.saturating_sub(1);
            return Spec::Achieve(crate::Predicate::Atom(t.get(&atom(rng)).unwrap().clone()));
        }
        *budget -= 1;
        match rng.gen_range(0..4) {
            0 => Spec::Achieve(crate::Predicate::Or(
                Box::new(crate::Predicate::Atom(t.get(&atom(rng)).unwrap().clone())),
                Box::new(crate::Predicate::Atom(t.get(&atom(rng)).unwrap().clone())),
            )),
            1 => Spec::Ensuring(
                Box::new(random_spec(rng, t, budget)),
                crate::Predicate::Atom(t.get(&atom(rng)).unwrap().clone()),
            ),
            2 => Spec::Seq(
                Box::new(random_spec(rng, t, budget)),
                Box::new(random_spec(rng, t, budget)),
            ),
            _ => Spec::Choice(
                Box::new(random_spec(rng, t, budget)),
                Box::new(random_spec(rng, t, budget)),
            ),
        }
    }

    /// Random specs over 3 atoms: DFA acceptance of the label sequence
    /// equals trajectory satisfaction, exhaustively over an 8-state toy
    /// space for all trajectories of length <= 5 (sampled 800 per spec).
    #[test]
    fn acceptance_equals_satisfaction() {
        let t = bit_table();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for round in 0..40 {
            let mut budget = 6usize;
            let spec = random_spec(&mut rng, &t, &mut budget);
            let dfa = spec_to_dfa(&spec).unwrap();
            for _ in 0..800 {
                let len = rng.gen_range(1..=5);
                let states: Vec<Vec<u8>> =
                    (0..len).map(|_| vec![rng.gen_range(0..8u8)]).collect();
                let word: Vec<u32> = states.iter().map(|s| label(&dfa, s[0])).collect();
                let sat = satisfies(&states, &spec);
                assert_eq!(
                    dfa.accepts(&word),
                    sat,
                    "round {round}: spec `{spec}` trajectory {states:?}"
                );
            }
        }
    }
}
