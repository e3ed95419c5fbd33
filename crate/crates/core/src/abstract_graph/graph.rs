use crate::spec_lang::{Predicate, Spec, StateVec};
use std::collections::{BTreeMap, BTreeSet};

/// Edge-local set of safe trajectory segments. Either "every state
/// satisfies b" or a two-phase concatenation "all-b1 prefix, then all-b2
/// suffix" (both phases nonempty). The two forms are closed under the
/// constructions used here; deeper nesting never arises.
#[derive(Clone, Debug)]
pub enum SafeSet {
    Always(Predicate),
    Concat(Predicate, Predicate),
}

impl SafeSet {
    /// The initial phase of the set, always of the `Always` form.
    pub fn first(&self) -> SafeSet {
        SafeSet::Always(self.first_pred().clone())
    }

    pub fn first_pred(&self) -> &Predicate {
        match self {
            SafeSet::Always(b) => b,
            SafeSet::Concat(b1, _) => b1,
        }
    }

    /// Segment membership, endpoints inclusive.
    pub fn contains(&self, states: &[StateVec]) -> bool {
        match self {
            SafeSet::Always(b) => states.iter().all(|s| b.eval(s)),
            SafeSet::Concat(b1, b2) => {
                if states.len() < 2 {
                    return false;
                }
                // nonempty all-b1 prefix followed by nonempty all-b2 suffix
                (0..states.len() - 1).any(|m| {
                    states[..=m].iter().all(|s| b1.eval(s))
                        && states[m + 1..].iter().all(|s| b2.eval(s))
                })
            }
        }
    }

    fn conjoin(&self, b: &Predicate) -> SafeSet {
        match self {
            SafeSet::Always(c) => SafeSet::Always(c.clone().and(b.clone())),
            SafeSet::Concat(c1, c2) => {
                SafeSet::Concat(c1.clone().and(b.clone()), c2.clone().and(b.clone()))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct AgEdge {
    pub src: usize,
    pub dst: usize,
    pub safe: SafeSet,
}

/// DAG over subgoal regions; see module docs.
#[derive(Clone, Debug)]
pub struct AbstractGraph {
    pub num_vertices: usize,
    pub edges: Vec<AgEdge>,
    pub initial: usize,
    pub finals: BTreeSet<usize>,
    /// subgoal region membership predicate per vertex
    pub subgoals: Vec<Predicate>,
    /// safe set for trailing segments at each final vertex
    pub final_safe: BTreeMap<usize, Predicate>,
}

impl AbstractGraph {
    pub fn outgoing(&self, v: usize) -> impl Iterator<Item = (usize, &AgEdge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.src == v)
    }

    /// Conjunction of `first` predicates over all outgoing edges of `v`;
    /// `true` when there are none.
    pub fn outgoing_first_pred(&self, v: usize) -> Predicate {
        let mut acc: Option<Predicate> = None;
        for (_, e) in self.outgoing(v) {
            let p = e.safe.first_pred().clone();
            acc = Some(match acc {
                None => p,
                Some(a) => a.and(p),
            });
        }
        acc.unwrap_or_else(Predicate::always_true)
    }

    /// Safety a member must maintain while sitting at vertex `v`: the
    /// final safe set when `v` is final, otherwise the `first` phase of
    /// every outgoing edge.
    pub fn hold_pred(&self, v: usize) -> Predicate {
        if self.finals.contains(&v) {
            self.final_safe[&v].clone()
        } else {
            self.outgoing_first_pred(v)
        }
    }

    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg = vec![0usize; self.num_vertices];
        for e in &self.edges {
            indeg[e.dst] += 1;
        }
        let mut queue: Vec<usize> =
            (0..self.num_vertices).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::new();
        while let Some(v) = queue.pop() {
            order.push(v);
            for e in &self.edges {
                if e.src == v {
                    indeg[e.dst] -= 1;
                    if indeg[e.dst] == 0 {
                        queue.push(e.dst);
                    }
                }
            }
        }
        (order.len() == self.num_vertices).then_some(order)
    }
}

/// Build the abstract graph of a specification by structural induction:
/// `achieve b` is a two-vertex graph with a trivially-safe edge into the
/// `b`-region; `ensuring` conjoins its predicate into every edge and
/// final safe set; sequencing stitches the first graph's finals onto the
/// second graph's initial edges with two-phase safe sets; choice merges
/// the initial vertices.
pub fn spec_to_abstract_graph(spec: &Spec) -> AbstractGraph {
    let g = build(spec);
    debug_assert!(g.topological_order().is_some(), "abstract graph must be a DAG");
    debug_assert!(!g.finals.contains(&g.initial));
    debug_assert!(g.edges.iter().all(|e| e.dst != g.initial), "initial has no incoming");
    debug_assert!(
        g.finals.iter().all(|&f| g.outgoing(f).next().is_none()),
        "finals have no outgoing"
    );
    g
}

fn build(spec: &Spec) -> AbstractGraph {
    match spec {
        Spec::Achieve(b) => AbstractGraph {
            num_vertices: 2,
            edges: vec![AgEdge { src: 0, dst: 1, safe: SafeSet::Always(Predicate::always_true()) }],
            initial: 0,
            finals: BTreeSet::from([1]),
            subgoals: vec![Predicate::always_true(), b.clone()],
            final_safe: BTreeMap::from([(1, Predicate::always_true())]),
        },
        Spec::Ensuring(inner, b) => {
            let mut g = build(inner);
            for e in &mut g.edges {
                e.safe = e.safe.conjoin(b);
            }
            for p in g.final_safe.values_mut() {
                *p = p.clone().and(b.clone());
            }
            g
        }
        Spec::Seq(first, second) => {
            let g1 = build(first);
            let g2 = build(second);
            // re-index g2 vertices, dropping its initial
            let map2 = |v: usize| -> usize {
                debug_assert_ne!(v, g2.initial);
                g1.num_vertices + if v > g2.initial { v - 1 } else { v }
            };
            let mut edges = g1.edges.clone();
            for e in &g2.edges {
                if e.src == g2.initial {
                    // bridge: finals of g1 take over the initial edges of g2
                    let first_pred = match &e.safe {
                        SafeSet::Always(c) => c.clone(),
                        SafeSet::Concat(..) => {
                            unreachable!("initial edges are always of the Always form")
                        }
                    };
                    for &f in &g1.finals {
                        edges.push(AgEdge {
                            src: f,
                            dst: map2(e.dst),
                            safe: SafeSet::Concat(g1.final_safe[&f].clone(), first_pred.clone()),
                        });
                    }
                } else {
                    edges.push(AgEdge { src: map2(e.src), dst: map2(e.dst), safe: e.safe.clone() });
                }
            }
            let mut subgoals = g1.subgoals.clone();
            for (v, p) in g2.subgoals.iter().enumerate() {
                if v != g2.initial {
                    debug_assert_eq!(subgoals.len(), map2(v));
                    subgoals.push(p.clone());
                }
            }
            AbstractGraph {
                num_vertices: g1.num_vertices + g2.num_vertices - 1,
                edges,
                initial: g1.initial,
                finals: g2.finals.iter().map(|&f| map2(f)).collect(),
                subgoals,
                final_safe: g2.final_safe.iter().map(|(&f, p)| (map2(f), p.clone())).collect(),
            }
        }
        Spec::Choice(left, right) => {
            let g1 = build(left);
            let g2 = build(right);
            let map2 = |v: usize| -> usize {
                debug_assert_ne!(v, g2.initial);
                g1.num_vertices + if v > g2.initial { v - 1 } else { v }
            };
            let mut edges = g1.edges.clone();
            for e in &g2.edges {
                let src = if e.src == g2.initial { g1.initial } else { map2(e.src) };
                edges.push(AgEdge { src, dst: map2(e.dst), safe: e.safe.clone() });
            }
            let mut subgoals = g1.subgoals.clone();
            for (v, p) in g2.subgoals.iter().enumerate() {
                if v != g2.initial {
                    subgoals.push(p.clone());
                }
            }
            let mut finals: BTreeSet<usize> = g1.finals.clone();
            finals.extend(g2.finals.iter().map(|&f| map2(f)));
            let mut final_safe = g1.final_safe.clone();
            final_safe.extend(g2.final_safe.iter().map(|(&f, p)| (map2(f), p.clone())));
            AbstractGraph {
                num_vertices: g1.num_vertices + g2.num_vertices - 1,
                edges,
                initial: g1.initial,
                finals,
                subgoals,
                final_safe,
            }
        }
    }
}

/// Does the trajectory satisfy the graph? Searches for a path from the
/// initial vertex to a final vertex together with subgoal-hit indices
/// `0 = k_0 <= k_1 < k_2 < ... <= t` such that each traversed segment
/// lies in its edge's safe set and the tail lies in the final vertex's
/// safe set.
pub fn satisfies_graph(states: &[StateVec], g: &AbstractGraph) -> bool {
    if states.is_empty() || !g.subgoals[g.initial].eval(&states[0]) {
        return false;
    }
    let t = states.len() - 1;
    let mut seen = BTreeSet::new();
    search(states, g, g.initial, 0, true, t, &mut seen)
}

fn search(
    states: &[StateVec],
    g: &AbstractGraph,
    vertex: usize,
    k: usize,
    first_hop: bool,
    t: usize,
    dead: &mut BTreeSet<(usize, usize, bool)>,
) -> bool {
    if dead.contains(&(vertex, k, first_hop)) {
        return false;
    }
    if g.finals.contains(&vertex)
        && SafeSet::Always(g.final_safe[&vertex].clone()).contains(&states[k..])
    {
        return true;
    }
    for (_, e) in g.outgoing(vertex) {
        let lo = if first_hop { k } else { k + 1 };
        for k2 in lo..=t {
            if g.subgoals[e.dst].eval(&states[k2]) && e.safe.contains(&states[k..=k2]) {
                if search(states, g, e.dst, k2, false, t, dead) {
                    return true;
                }
            }
        }
    }
    dead.insert((vertex, k, first_hop));
    false
}
