use super::graph::AbstractGraph;
use crate::spec_lang::StateVec;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("coalition must be nonempty")]
    EmptyCoalition,
    #[error("path budget exceeded: more than {cap} initial-to-final paths")]
    PathBudgetExceeded { cap: usize },
    #[error("path does not end in a final product vertex")]
    PathNotFinal,
}

/// Product edge: at least one member moves along a real component edge,
/// the rest stay in place.
#[derive(Clone, Debug)]
pub struct PgEdge {
    pub src: usize,
    pub dst: usize,
    /// (coalition position, component edge index) per progressing member
    pub moves: Vec<(usize, usize)>,
}

impl PgEdge {
    /// Coalition positions of the progressing members.
    pub fn progress(&self) -> Vec<usize> {
        self.moves.iter().map(|&(i, _)| i).collect()
    }
}

/// Asynchronous product of the abstract graphs of a coalition.
#[derive(Clone, Debug)]
pub struct ProductGraph {
    /// global agent ids, ascending
    pub coalition: Vec<usize>,
    pub components: Vec<Arc<AbstractGraph>>,
    /// component vertex tuple per product vertex
    pub vertices: Vec<Vec<usize>>,
    pub initial: usize,
    pub finals: BTreeSet<usize>,
    pub edges: Vec<PgEdge>,
    pub outgoing: Vec<Vec<usize>>,
}

impl ProductGraph {
    pub fn component_vertex(&self, pv: usize, member: usize) -> usize {
        self.vertices[pv][member]
    }

    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg = vec![0usize; self.vertices.len()];
        for e in &self.edges {
            indeg[e.dst] += 1;
        }
        // stable queue so orderings are deterministic
        let mut queue: std::collections::VecDeque<usize> =
            (0..self.vertices.len()).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for (i, e) in self.edges.iter().enumerate() {
                let _ = i;
                if e.src == v {
                    indeg[e.dst] -= 1;
                    if indeg[e.dst] == 0 {
                        queue.push_back(e.dst);
                    }
                }
            }
        }
        (order.len() == self.vertices.len()).then_some(order)
    }
}

/// Build the product graph for the coalition `members` (global agent ids;
/// `graphs[i]` is agent `members[i]`'s abstract graph).
pub fn product(
    graphs: &[Arc<AbstractGraph>],
    members: &[usize],
) -> Result<ProductGraph, GraphError> {
    if members.is_empty() || graphs.is_empty() {
        return Err(GraphError::EmptyCoalition);
    }
    assert_eq!(graphs.len(), members.len());
    let m = graphs.len();

    // enumerate product vertices in mixed-radix order
    let sizes: Vec<usize> = graphs.iter().map(|g| g.num_vertices).collect();
    let total: usize = sizes.iter().product();
    let mut vertices = Vec::with_capacity(total);
    let mut index: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut tuple = vec![0usize; m];
    loop {
        index.insert(tuple.clone(), vertices.len());
        vertices.push(tuple.clone());
        let mut pos = m;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            tuple[pos] += 1;
            if tuple[pos] < sizes[pos] {
                break;
            }
            tuple[pos] = 0;
            if pos == 0 {
                break;
            }
        }
        if tuple.iter().all(|&x| x == 0) {
            break;
        }
    }

    let initial_tuple: Vec<usize> = graphs.iter().map(|g| g.initial).collect();
    let initial = index[&initial_tuple];
    let finals: BTreeSet<usize> = vertices
        .iter()
        .enumerate()
        .filter(|(_, tup)| tup.iter().zip(graphs).all(|(&v, g)| g.finals.contains(&v)))
        .map(|(i, _)| i)
        .collect();

    // per component vertex: choices are "stay" or one of its outgoing edges
    let mut edges = Vec::new();
    for (src, tup) in vertices.iter().enumerate() {
        let options: Vec<Vec<Option<usize>>> = (0..m)
            .map(|i| {
                let mut opts = vec![None]; // stay
                opts.extend(graphs[i].outgoing(tup[i]).map(|(ei, _)| Some(ei)));
                opts
            })
            .collect();
        let mut pick = vec![0usize; m];
        loop {
            let moves: Vec<(usize, usize)> = (0..m)
                .filter_map(|i| options[i][pick[i]].map(|ei| (i, ei)))
                .collect();
            if !moves.is_empty() {
                let mut dst_tup = tup.clone();
                for &(i, ei) in &moves {
                    dst_tup[i] = graphs[i].edges[ei].dst;
                }
                edges.push(PgEdge { src, dst: index[&dst_tup], moves });
            }
            // next pick
            let mut pos = m;
            let mut done = false;
            loop {
                if pos == 0 {
                    done = true;
                    break;
                }
                pos -= 1;
                pick[pos] += 1;
                if pick[pos] < options[pos].len() {
                    break;
                }
                pick[pos] = 0;
                if pos == 0 {
                    done = true;
                    break;
                }
            }
            if done {
                break;
            }
        }
    }

    let mut outgoing = vec![Vec::new(); vertices.len()];
    for (i, e) in edges.iter().enumerate() {
        outgoing[e.src].push(i);
    }
    Ok(ProductGraph {
        coalition: members.to_vec(),
        components: graphs.to_vec(),
        vertices,
        initial,
        finals,
        edges,
        outgoing,
    })
}

/// Does the whole segment `states` achieve product edge `e`? Clause (1)
/// requires every progressing member `i` to have a witness index `k_i`
/// hitting its target subgoal with an edge-safe prefix and a
/// future-safe tail (`k_i > 0` unless the member is still at its own
/// initial vertex); clause (2) requires non-progressing members to hold
/// their future-safety throughout.
pub fn edge_achieved_at(states: &[StateVec], pg: &ProductGraph, edge: &PgEdge) -> bool {
    if states.is_empty() {
        return false;
    }
    let k = states.len() - 1;
    let src_tup = &pg.vertices[edge.src];

    // clause 2: non-progressing members
    for (i, g) in pg.components.iter().enumerate() {
        if edge.moves.iter().any(|&(p, _)| p == i) {
            continue;
        }
        let hold = g.hold_pred(src_tup[i]);
        if !states.iter().all(|s| hold.eval(s)) {
            return false;
        }
    }

    // clause 1: progressing members, independent witness search
    for &(i, ei) in &edge.moves {
        let g = &pg.components[i];
        let ce = &g.edges[ei];
        let target_subgoal = &g.subgoals[ce.dst];
        let tail_pred = g.hold_pred(ce.dst);
        let min_k = if src_tup[i] == g.initial { 0 } else { 1 };
        let mut found = false;
        for ki in min_k..=k {
            if target_subgoal.eval(&states[ki])
                && ce.safe.contains(&states[..=ki])
                && states[ki..].iter().all(|s| tail_pred.eval(s))
            {
                found = true;
                break;
            }
        }
        if !found {
            return false;
        }
    }
    true
}

/// Minimal prefix length achieving the edge, if any: the smallest `k`
/// with `states[0..=k]` achieving `e`.
pub fn achieves_edge(states: &[StateVec], pg: &ProductGraph, edge: &PgEdge) -> Option<usize> {
    (0..states.len()).find(|&k| edge_achieved_at(&states[..=k], pg, edge))
}

/// Does the trajectory achieve the path (edge index list into
/// `pg.edges`)? Requires the path to end in a final product vertex;
/// split indices are weakly increasing and segments share boundary
/// states.
pub fn achieves_path(
    states: &[StateVec],
    pg: &ProductGraph,
    path: &[usize],
) -> Result<bool, GraphError> {
    let end = if let Some(&last) = path.last() {
        pg.edges[last].dst
    } else {
        pg.initial
    };
    if !pg.finals.contains(&end) {
        return Err(GraphError::PathNotFinal);
    }
    if states.is_empty() {
        return Ok(false);
    }
    let t = states.len() - 1;
    Ok(split_search(states, pg, path, 0, 0, t))
}

fn split_search(
    states: &[StateVec],
    pg: &ProductGraph,
    path: &[usize],
    z: usize,
    from: usize,
    t: usize,
) -> bool {
    if z == path.len() {
        // final tail: every member's final safe set
        let end = if let Some(&last) = path.last() {
            pg.edges[last].dst
        } else {
            pg.initial
        };
        let tup = &pg.vertices[end];
        return pg.components.iter().enumerate().all(|(i, g)| {
            let p = &g.final_safe[&tup[i]];
            states[from..].iter().all(|s| p.eval(s))
        });
    }
    let e = &pg.edges[path[z]];
    for next in from..=t {
        if edge_achieved_at(&states[from..=next], pg, e)
            && split_search(states, pg, path, z + 1, next, t)
        {
            return true;
        }
    }
    false
}

/// All initial-to-final paths, as edge index lists, in DFS order.
pub fn enumerate_paths(pg: &ProductGraph, cap: usize) -> Result<Vec<Vec<usize>>, GraphError> {
    let mut out = Vec::new();
    let mut stack = Vec::new();
    dfs_paths(pg, pg.initial, &mut stack, &mut out, cap)?;
    Ok(out)
}

fn dfs_paths(
    pg: &ProductGraph,
    v: usize,
    stack: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
    cap: usize,
) -> Result<(), GraphError> {
    if pg.finals.contains(&v) {
        if out.len() >= cap {
            return Err(GraphError::PathBudgetExceeded { cap });
        }
        out.push(stack.clone());
        return Ok(()); // finals have no outgoing edges
    }
    for &ei in &pg.outgoing[v] {
        stack.push(ei);
        dfs_paths(pg, pg.edges[ei].dst, stack, out, cap)?;
        stack.pop();
    }
    Ok(())
}
