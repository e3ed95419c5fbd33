//! Task specification language: syntax, parsing and trajectory semantics.
//!
//! A specification is built from state predicates with four operators:
//! `achieve b` (eventually reach a `b`-state), `phi ensuring b` (satisfy
//! `phi` while every visited state satisfies `b`), `phi1 ; phi2`
//! (sequencing) and `phi1 or phi2` (choice).

mod ast;
mod parser;

pub use ast::{AtomicPredicate, Predicate, PredicateTable, Spec};
pub use parser::{parse_predicate, parse_spec, ParseError};

/// States are decoded feature vectors; predicates evaluate over them.
pub type StateVec = Vec<u8>;

/// Does the trajectory (given as its state sequence) satisfy `spec`?
///
/// Implements the four satisfaction clauses directly. For a trajectory
/// with states `s_0..s_t`:
/// - `achieve b`: some `i <= t` has `s_i |= b`;
/// - `phi ensuring b`: `phi` holds and every `s_i |= b`;
/// - `phi1 ; phi2`: some `i < t` splits the trajectory into a prefix
///   `s_0..s_i |= phi1` and suffix `s_{i+1}..s_t |= phi2` (false when
///   `t = 0`: there is no admissible split index);
/// - `phi1 or phi2`: disjunction.
pub fn satisfies(states: &[StateVec], spec: &Spec) -> bool {
    if states.is_empty() {
        return false;
    }
    match spec {
        Spec::Achieve(b) => states.iter().any(|s| b.eval(s)),
        Spec::Ensuring(inner, b) => {
            states.iter().all(|s| b.eval(s)) && satisfies(states, inner)
        }
        Spec::Seq(first, second) => {
            let t = states.len() - 1;
            (0..t).any(|i| satisfies(&states[..=i], first) && satisfies(&states[i + 1..], second))
        }
        Spec::Choice(left, right) => satisfies(states, left) || satisfies(states, right),
    }
}

/// Total node count of the specification AST: each operator
/// (`achieve`/`ensuring`/`;`/`or`) counts one, and each predicate node
/// (atom, `and`, `or`) counts one. `Spec::op_count` counts operators only.
pub fn spec_size(spec: &Spec) -> usize {
    match spec {
        Spec::Achieve(b) => 1 + b.size(),
        Spec::Ensuring(inner, b) => 1 + spec_size(inner) + b.size(),
        Spec::Seq(a, b) | Spec::Choice(a, b) => 1 + spec_size(a) + spec_size(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    /// Table over single-feature states: `p_k` holds iff feature 0 == k.
    fn table() -> PredicateTable {
        let mut t = BTreeMap::new();
        for k in 0u8..8 {
            let name = format!("p{k}");
            t.insert(
                name.clone(),
                Arc::new(AtomicPredicate::new(&name, move |s: &[u8]| s[0] == k)),
            );
        }
        PredicateTable::new(t)
    }

    fn st(vals: &[u8]) -> Vec<StateVec> {
        vals.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn achieve_at_first_state() {
        let t = table();
        let spec = parse_spec("achieve p3", &t).unwrap();
        assert!(satisfies(&st(&[3]), &spec));
        assert!(!satisfies(&st(&[1]), &spec));
        assert!(satisfies(&st(&[1, 2, 3]), &spec));
    }

    #[test]
    fn ensuring_requires_all_states() {
        let t = table();
        let spec = parse_spec("achieve p2 ensuring (p1 or p2)", &t).unwrap();
        assert!(satisfies(&st(&[1, 2]), &spec));
        assert!(!satisfies(&st(&[1, 3, 2]), &spec));
        // p never holds at all
        let spec2 = parse_spec("achieve p5 ensuring p1", &t).unwrap();
        assert!(!satisfies(&st(&[1, 1, 1]), &spec2));
    }

    #[test]
    fn seq_needs_strict_split() {
        let t = table();
        let spec = parse_spec("achieve p1 ; achieve p2", &t).unwrap();
        // single state satisfying both parts still fails: no i < 0
        let both = parse_spec("achieve (p1 or p2) ; achieve (p1 or p2)", &t).unwrap();
        assert!(!satisfies(&st(&[1]), &both));
        assert!(satisfies(&st(&[1, 2]), &spec));
        assert!(!satisfies(&st(&[2, 1]), &spec));
        assert!(satisfies(&st(&[0, 1, 0, 2]), &spec));
    }

    /// Seq against exhaustive split enumeration on random trajectories.
    #[test]
    fn seq_matches_quantifier_expansion() {
        use rand::{Rng, SeedableRng};
        let t = table();
        let phi = parse_spec("achieve p1 ; achieve p2", &t).unwrap();
        let (p1, p2) = match &phi {
            Spec::Seq(a, b) => (a.clone(), b.clone()),
            _ => unreachable!(),
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let len = rng.gen_range(1..=6);
            let states: Vec<StateVec> = (0..len).map(|_| vec![rng.gen_range(0..4u8)]).collect();
            let direct = satisfies(&states, &phi);
            let tmax = states.len() - 1;
            let expanded = (0..tmax)
                .any(|i| satisfies(&states[..=i], &p1) && satisfies(&states[i + 1..], &p2));
            assert_eq!(direct, expanded);
        }
    }

    #[test]
    fn achieve_monotone_and_choice_commutative() {
        use rand::{Rng, SeedableRng};
        let t = table();
        let ach = parse_spec("achieve p2", &t).unwrap();
        let c1 = parse_spec("(achieve p1 ; achieve p2) or achieve p3 ensuring p0", &t).unwrap();
        let c2 = parse_spec("(achieve p3 ensuring p0) or (achieve p1 ; achieve p2)", &t).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let len = rng.gen_range(1..=7);
            let states: Vec<StateVec> = (0..len).map(|_| vec![rng.gen_range(0..4u8)]).collect();
            // monotonicity of achieve over prefixes
            let mut seen = false;
            for k in 0..states.len() {
                let now = satisfies(&states[..=k], &ach);
                assert!(!seen || now);
                seen = now;
            }
            assert_eq!(satisfies(&states, &c1), satisfies(&states, &c2));
        }
    }

    #[test]
    fn size_conventions() {
        let t = table();
        let s = parse_spec("achieve p1", &t).unwrap();
        assert_eq!(s.op_count(), 1);
        assert_eq!(spec_size(&s), 2);
        let s = parse_spec("achieve p1 ; achieve p2", &t).unwrap();
        assert_eq!(s.op_count(), 3);
        // fully balanced Seq tree of depth d has 2^d - 1 operator nodes
        fn balanced(d: usize, t: &PredicateTable) -> Spec {
            if d == 1 {
                parse_spec("achieve p1", t).unwrap()
            } else {
                Spec::Seq(Box::new(balanced(d - 1, t)), Box::new(balanced(d - 1, t)))
            }
        }
        for d in 1..=5 {
            assert_eq!(balanced(d, &t).op_count(), (1 << d) - 1);
        }
    }
}
