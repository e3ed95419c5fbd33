use crate::abstract_graph::{PgEdge, ProductGraph, SafeSet};
use crate::spec_lang::Predicate;

/// Online recognizer for "the rollout so far achieves product edge e".
///
/// The offline definition quantifies over witness indices; this tracker
/// refines it to a constant-size state machine per coalition member,
/// packed into a `u32` so path-policy memory stays finite and hashable.
/// Per progressing member: a prefix-safety phase (for the two-phase
/// concatenation sets the split point is chosen online: stay in the
/// first phase while it holds, membership at `k` then only needs the
/// current state in the second phase), plus one bit for "subgoal
/// witnessed with a still-alive tail". Tails that die release the lock;
/// any earlier witness shares the broken suffix so a single lock
/// suffices. Non-progressing members carry one liveness bit.
pub struct EdgeMonitor {
    members: Vec<Member>,
}

struct Member {
    /// progressing members carry prefix/subgoal/tail; others only `hold`
    progressing: Option<Progress>,
    hold: Option<Predicate>,
}

struct Progress {
    prefix: SafeSet,
    subgoal: Predicate,
    tail: Predicate,
    /// witness index must be positive (member not at its own initial)
    needs_positive_index: bool,
}

// per-member nibble: bits 0-1 = phase (0 first-phase/alive, 1 = second
// phase, 2 = dead), bit 2 = locked with live tail
const PHASE_FIRST: u32 = 0;
const PHASE_SECOND: u32 = 1;
const PHASE_DEAD: u32 = 2;
const LOCKED: u32 = 4;

impl EdgeMonitor {
    pub fn from_edge(pg: &ProductGraph, edge: &PgEdge) -> EdgeMonitor {
        let src = &pg.vertices[edge.src];
        let members = pg
            .components
            .iter()
            .enumerate()
            .map(|(i, g)| {
                if let Some(&(_, ei)) = edge.moves.iter().find(|&&(p, _)| p == i) {
                    let ce = &g.edges[ei];
                    Member {
                        progressing: Some(Progress {
                            prefix: ce.safe.clone(),
                            subgoal: g.subgoals[ce.dst].clone(),
                            tail: g.hold_pred(ce.dst),
                            needs_positive_index: src[i] != g.initial,
                        }),
                        hold: None,
                    }
                } else {
                    Member { progressing: None, hold: Some(g.hold_pred(src[i])) }
                }
            })
            .collect();
        EdgeMonitor { members }
    }

    /// State after observing the segment's first state (index 0).
    pub fn init(&self, s: &[u8]) -> u32 {
        let mut m = 0u32;
        for (i, member) in self.members.iter().enumerate() {
            let nib = match member {
                Member { progressing: Some(p), .. } => {
                    let phase = match &p.prefix {
                        SafeSet::Always(b) => {
                            if b.eval(s) {
                                PHASE_FIRST
                            } else {
                                PHASE_DEAD
                            }
                        }
                        SafeSet::Concat(b1, _) => {
                            if b1.eval(s) {
                                PHASE_FIRST
                            } else {
                                PHASE_DEAD
                            }
                        }
                    };
                    let mut nib = phase;
                    // witness at index 0: only Always prefixes can be
                    // members at length zero, and only from the initial
                    let member_now = matches!(p.prefix, SafeSet::Always(_))
                        && phase == PHASE_FIRST;
                    if !p.needs_positive_index
                        && member_now
                        && p.subgoal.eval(s)
                        && p.tail.eval(s)
                    {
                        nib |= LOCKED;
                    }
                    nib
                }
                Member { hold: Some(h), .. } => {
                    if h.eval(s) {
                        PHASE_FIRST
                    } else {
                        PHASE_DEAD
                    }
                }
                _ => unreachable!(),
            };
            m |= nib << (4 * i);
        }
        m
    }

    /// State after observing one more trajectory state (index >= 1).
    pub fn step(&self, m: u32, s: &[u8]) -> u32 {
        let mut out = 0u32;
        for (i, member) in self.members.iter().enumerate() {
            let nib = (m >> (4 * i)) & 0xF;
            let new_nib = match member {
                Member { progressing: Some(p), .. } => {
                    let phase = nib & 0x3;
                    let new_phase = match &p.prefix {
                        SafeSet::Always(b) => {
                            if phase == PHASE_DEAD || !b.eval(s) {
                                PHASE_DEAD
                            } else {
                                PHASE_FIRST
                            }
                        }
                        SafeSet::Concat(b1, b2) => match phase {
                            PHASE_FIRST => {
                                if b1.eval(s) {
                                    PHASE_FIRST
                                } else if b2.eval(s) {
                                    PHASE_SECOND
                                } else {
                                    PHASE_DEAD
                                }
                            }
                            PHASE_SECOND => {
                                if b2.eval(s) {
                                    PHASE_SECOND
                                } else {
                                    PHASE_DEAD
                                }
                            }
                            _ => PHASE_DEAD,
                        },
                    };
                    // prefix membership of the segment up to and incl. s
                    let member_now = match &p.prefix {
                        SafeSet::Always(_) => new_phase == PHASE_FIRST,
                        SafeSet::Concat(_, b2) => {
                            new_phase == PHASE_SECOND
                                || (new_phase == PHASE_FIRST && b2.eval(s))
                        }
                    };
                    let mut locked = nib & LOCKED != 0;
                    if locked && !p.tail.eval(s) {
                        locked = false;
                    }
                    if !locked && member_now && p.subgoal.eval(s) && p.tail.eval(s) {
                        locked = true;
                    }
                    new_phase | if locked { LOCKED } else { 0 }
                }
                Member { hold: Some(h), .. } => {
                    if nib & 0x3 == PHASE_DEAD || !h.eval(s) {
                        PHASE_DEAD
                    } else {
                        PHASE_FIRST
                    }
                }
                _ => unreachable!(),
            };
            out |= new_nib << (4 * i);
        }
        out
    }

    pub fn achieved(&self, m: u32) -> bool {
        self.members.iter().enumerate().all(|(i, member)| {
            let nib = (m >> (4 * i)) & 0xF;
            match member {
                Member { progressing: Some(_), .. } => nib & LOCKED != 0,
                _ => nib & 0x3 != PHASE_DEAD,
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstract_graph::{
        edge_achieved_at, product, spec_to_abstract_graph, AbstractGraph,
    };
    use crate::spec_lang::{parse_spec, AtomicPredicate, PredicateTable, StateVec};
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn bit_table() -> PredicateTable {
        let mut t = BTreeMap::new();
        for (i, name) in ["a", "b", "c", "d"].iter().enumerate() {
            t.insert(
                name.to_string(),
                Arc::new(AtomicPredicate::new(name, move |s: &[u8]| s[0] & (1 << i) != 0)),
            );
        }
        PredicateTable::new(t)
    }

    /// The online tracker agrees with the offline quantifier evaluation
    /// on every prefix of random trajectories, for a variety of edge
    /// shapes (two-phase prefixes, ensuring-constrained, simultaneous
    /// progress, non-progressing members).
    #[test]
    fn online_matches_offline_on_prefixes() {
        let t = bit_table();
        let spec_srcs = [
            "achieve a",
            "achieve b ensuring c",
            "achieve a ; achieve b",
            "(achieve a ; achieve c) ensuring (c or d)",
            "achieve a or achieve d",
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for round in 0..200 {
            let n = rng.gen_range(1..=2);
            let graphs: Vec<Arc<AbstractGraph>> = (0..n)
                .map(|_| {
                    let src = spec_srcs[rng.gen_range(0..spec_srcs.len())];
                    Arc::new(spec_to_abstract_graph(&parse_spec(src, &t).unwrap()))
                })
                .collect();
            let members: Vec<usize> = (0..n).collect();
            let pg = product(&graphs, &members).unwrap();
            for (ei, edge) in pg.edges.iter().enumerate() {
                let monitor = EdgeMonitor::from_edge(&pg, edge);
                for _ in 0..30 {
                    let len = rng.gen_range(1..=6);
                    let states: Vec<StateVec> =
                        (0..len).map(|_| vec![rng.gen_range(0..16u8)]).collect();
                    let mut m = monitor.init(&states[0]);
                    for k in 0..states.len() {
                        if k > 0 {
                            m = monitor.step(m, &states[k]);
                        }
                        let online = monitor.achieved(m);
                        let offline = edge_achieved_at(&states[..=k], &pg, edge);
                        assert_eq!(
                            online, offline,
                            "round {round} edge {ei} k {k} states {states:?}"
                        );
                    }
                }
            }
        }
    }
}
