use super::{Env, PackedState};
use crate::spec_lang::{AtomicPredicate, PredicateTable};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvConfigError {
    #[error("invalid environment config: {0}")]
    Invalid(String),
}

fn check(cond: bool, msg: &str) -> Result<(), EnvConfigError> {
    if cond {
        Ok(())
    } else {
        Err(EnvConfigError::Invalid(msg.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Single lane: k agents on a straight track of length l, all starting at 0.
// MOVE advances one cell with success probability 1 - p_fail; the goal cell
// is absorbing. There is no collision notion; competition arises purely from
// ordering predicates.
// ---------------------------------------------------------------------------

pub struct SingleLane {
    agents: usize,
    length: u8,
    horizon: usize,
    p_fail: f64,
    actions: Vec<u8>,
    table: PredicateTable,
    name: String,
}

/// Atoms: `at_goal_i`, `not_at_goal_i`, `at_mid_i` (position >= l/2),
/// `below_mid_i`.
pub fn single_lane_env(
    agents: usize,
    length: u8,
    horizon: usize,
    p_fail: f64,
) -> Result<SingleLane, EnvConfigError> {
    check(agents >= 1 && agents <= 5, "1..=5 agents")?;
    check(length >= 1 && length <= 15, "track length 1..=15")?;
    check((0.0..1.0).contains(&p_fail), "p_fail in [0,1)")?;
    let mid = (length / 2).max(1);
    let mut atoms = BTreeMap::new();
    for i in 0..agents {
        let l = length;
        atoms.insert(
            format!("at_goal_{i}"),
            std::sync::Arc::new(AtomicPredicate::new(&format!("at_goal_{i}"), move |s: &[u8]| {
                s[i] == l
            })),
        );
        atoms.insert(
            format!("not_at_goal_{i}"),
            std::sync::Arc::new(AtomicPredicate::new(
                &format!("not_at_goal_{i}"),
                move |s: &[u8]| s[i] != l,
            )),
        );
        atoms.insert(
            format!("at_mid_{i}"),
            std::sync::Arc::new(AtomicPredicate::new(&format!("at_mid_{i}"), move |s: &[u8]| {
                s[i] >= mid
            })),
        );
        atoms.insert(
            format!("below_mid_{i}"),
            std::sync::Arc::new(AtomicPredicate::new(
                &format!("below_mid_{i}"),
                move |s: &[u8]| s[i] < mid,
            )),
        );
    }
    Ok(SingleLane {
        agents,
        length,
        horizon,
        p_fail,
        actions: vec![2; agents],
        table: PredicateTable::new(atoms),
        name: format!("single-lane(k={agents},l={length})"),
    })
}

impl SingleLane {
    #[inline]
    fn get(&self, s: PackedState, i: usize) -> u8 {
        ((s >> (4 * i)) & 0xF) as u8
    }

    #[inline]
    fn set(&self, s: PackedState, i: usize, v: u8) -> PackedState {
        (s & !(0xF << (4 * i))) | ((v as u32) << (4 * i))
    }
}

impl Env for SingleLane {
    fn name(&self) -> &str {
        &self.name
    }
    fn num_agents(&self) -> usize {
        self.agents
    }
    fn actions_per_agent(&self) -> &[u8] {
        &self.actions
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn initial(&self) -> PackedState {
        0
    }
    fn decode(&self, s: PackedState, out: &mut Vec<u8>) {
        out.clear();
        for i in 0..self.agents {
            out.push(self.get(s, i));
        }
    }
    fn sample(&self, s: PackedState, action: &[u8], rng: &mut ChaCha8Rng) -> PackedState {
        let mut next = s;
        for i in 0..self.agents {
            let pos = self.get(s, i);
            if action[i] == 1 && pos < self.length && rng.gen::<f64>() >= self.p_fail {
                next = self.set(next, i, pos + 1);
            }
        }
        next
    }
    fn exact_transitions(&self, s: PackedState, action: &[u8]) -> Vec<(PackedState, f64)> {
        let mut dist: Vec<(PackedState, f64)> = vec![(s, 1.0)];
        for i in 0..self.agents {
            let pos = self.get(s, i);
            if action[i] == 1 && pos < self.length {
                let mut next = Vec::with_capacity(dist.len() * 2);
                for &(st, p) in &dist {
                    next.push((self.set(st, i, pos + 1), p * (1.0 - self.p_fail)));
                    next.push((st, p * self.p_fail));
                }
                dist = merge(next);
            }
        }
        dist
    }
    fn predicate_table(&self) -> &PredicateTable {
        &self.table
    }
}

// ---------------------------------------------------------------------------
// Intersection: cars on two crossing roads. Positions count down toward 0;
// cell 1 on either axis is the one shared crossing cell, 0 is past it.
// MOVE decrements the position with success probability 1 - p_fail and
// floors at 0. A car is in collision exactly when it occupies the crossing
// cell together with another car; queueing positions (>= 2) and the exit
// cell (0) are per-road and never collide.
// ---------------------------------------------------------------------------

pub struct Intersection {
    starts: Vec<u8>,
    horizon: usize,
    p_fail: f64,
    actions: Vec<u8>,
    table: PredicateTable,
    name: String,
}

/// Atoms per car `i`: `crossed_i` (position 0), `uncrossed_i`, `safe_i`
/// (not in collision), and for same-axis pairs `gap2_i_j` (car j trails
/// car i by at least two cells or has no remaining approach).
pub fn intersection_env(
    ns_starts: &[u8],
    ew_starts: &[u8],
    horizon: usize,
    p_fail: f64,
) -> Result<Intersection, EnvConfigError> {
    let k = ns_starts.len() + ew_starts.len();
    check(k >= 1 && k <= 5, "1..=5 cars")?;
    check(
        ns_starts.iter().chain(ew_starts).all(|&p| (1..=15).contains(&p)),
        "start positions in 1..=15",
    )?;
    let starts: Vec<u8> = ns_starts.iter().chain(ew_starts).copied().collect();
    let ns = ns_starts.len();
    let mut atoms = BTreeMap::new();
    for i in 0..k {
        atoms.insert(
            format!("crossed_{i}"),
            std::sync::Arc::new(AtomicPredicate::new(&format!("crossed_{i}"), move |s: &[u8]| {
                s[i] == 0
            })),
        );
        atoms.insert(
            format!("uncrossed_{i}"),
            std::sync::Arc::new(AtomicPredicate::new(
                &format!("uncrossed_{i}"),
                move |s: &[u8]| s[i] != 0,
            )),
        );
        atoms.insert(
            format!("safe_{i}"),
            std::sync::Arc::new(AtomicPredicate::new(&format!("safe_{i}"), move |s: &[u8]| {
                s[i] != 1 || s.iter().enumerate().all(|(j, &p)| j == i || p != 1)
            })),
        );
    }
    // pairwise spacing atoms within one axis (used by "keep a car length
    // ahead" objectives): j stays at least 2 cells behind i, or i has
    // crossed and j is still at least 2 cells from the exit.
    let axis_of = move |c: usize| usize::from(c >= ns);
    for i in 0..k {
        for j in 0..k {
            if i != j && axis_of(i) == axis_of(j) {
                atoms.insert(
                    format!("gap2_{i}_{j}"),
                    std::sync::Arc::new(AtomicPredicate::new(
                        &format!("gap2_{i}_{j}"),
                        move |s: &[u8]| s[j] as i32 - s[i] as i32 >= 2,
                    )),
                );
            }
        }
    }
    Ok(Intersection {
        starts,
        horizon,
        p_fail,
        actions: vec![2; k],
        table: PredicateTable::new(atoms),
        name: format!("intersection(ns={ns_starts:?},ew={ew_starts:?})"),
    })
}

impl Intersection {
    #[inline]
    fn get(&self, s: PackedState, i: usize) -> u8 {
        ((s >> (4 * i)) & 0xF) as u8
    }
    #[inline]
    fn set(&self, s: PackedState, i: usize, v: u8) -> PackedState {
        (s & !(0xF << (4 * i))) | ((v as u32) << (4 * i))
    }
}

impl Env for Intersection {
    fn name(&self) -> &str {
        &self.name
    }
    fn num_agents(&self) -> usize {
        self.starts.len()
    }
    fn actions_per_agent(&self) -> &[u8] {
        &self.actions
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn initial(&self) -> PackedState {
        let mut s = 0;
        for (i, &p) in self.starts.iter().enumerate() {
            s = self.set(s, i, p);
        }
        s
    }
    fn decode(&self, s: PackedState, out: &mut Vec<u8>) {
        out.clear();
        for i in 0..self.starts.len() {
            out.push(self.get(s, i));
        }
    }
    fn sample(&self, s: PackedState, action: &[u8], rng: &mut ChaCha8Rng) -> PackedState {
        let mut next = s;
        for i in 0..self.starts.len() {
            let pos = self.get(s, i);
            if action[i] == 1 && pos > 0 && rng.gen::<f64>() >= self.p_fail {
                next = self.set(next, i, pos - 1);
            }
        }
        next
    }
    fn exact_transitions(&self, s: PackedState, action: &[u8]) -> Vec<(PackedState, f64)> {
        let mut dist: Vec<(PackedState, f64)> = vec![(s, 1.0)];
        for i in 0..self.starts.len() {
            let pos = self.get(s, i);
            if action[i] == 1 && pos > 0 {
                let mut next = Vec::with_capacity(dist.len() * 2);
                for &(st, p) in &dist {
                    next.push((self.set(st, i, pos - 1), p * (1.0 - self.p_fail)));
                    next.push((st, p * self.p_fail));
                }
                dist = merge(next);
            }
        }
        dist
    }
    fn predicate_table(&self) -> &PredicateTable {
        &self.table
    }
}

// ---------------------------------------------------------------------------
// Gridworld: two agents on a size x size grid, starting at opposite
// corners. Actions: stay, up, down, right, left; moves clip at the
// boundary and fail (stay) with probability p_fail. Collision = sharing
// a cell.
// ---------------------------------------------------------------------------

pub struct GridWorld {
    size: u8,
    horizon: usize,
    p_fail: f64,
    actions: Vec<u8>,
    table: PredicateTable,
    name: String,
}

/// Atoms: `a{i}_at_{x}_{y}` for both agents and every cell, plus `apart`
/// (agents on different cells).
pub fn gridworld_env(size: u8, horizon: usize, p_fail: f64) -> Result<GridWorld, EnvConfigError> {
    check((2..=7).contains(&size), "grid size 2..=7")?;
    check((0.0..1.0).contains(&p_fail), "p_fail in [0,1)")?;
    let mut atoms = BTreeMap::new();
    for agent in 0..2usize {
        for x in 0..size {
            for y in 0..size {
                let name = format!("a{agent}_at_{x}_{y}");
                atoms.insert(
                    name.clone(),
                    std::sync::Arc::new(AtomicPredicate::new(&name, move |s: &[u8]| {
                        s[2 * agent] == x && s[2 * agent + 1] == y
                    })),
                );
            }
        }
    }
    atoms.insert(
        "apart".to_string(),
        std::sync::Arc::new(AtomicPredicate::new("apart", |s: &[u8]| {
            s[0] != s[2] || s[1] != s[3]
        })),
    );
    Ok(GridWorld {
        size,
        horizon,
        p_fail,
        actions: vec![5, 5],
        table: PredicateTable::new(atoms),
        name: format!("gridworld({size}x{size})"),
    })
}

impl GridWorld {
    #[inline]
    fn coord(&self, s: PackedState, idx: usize) -> u8 {
        ((s >> (3 * idx)) & 0x7) as u8
    }
    #[inline]
    fn with_coord(&self, s: PackedState, idx: usize, v: u8) -> PackedState {
        (s & !(0x7 << (3 * idx))) | ((v as u32) << (3 * idx))
    }

    fn apply_move(&self, x: u8, y: u8, action: u8) -> (u8, u8) {
        let max = self.size - 1;
        match action {
            1 => (x, (y + 1).min(max)),          // up
            2 => (x, y.saturating_sub(1)),       // down
            3 => ((x + 1).min(max), y),          // right
            4 => (x.saturating_sub(1), y),       // left
            _ => (x, y),
        }
    }
}

impl Env for GridWorld {
    fn name(&self) -> &str {
        &self.name
    }
    fn num_agents(&self) -> usize {
        2
    }
    fn actions_per_agent(&self) -> &[u8] {
        &self.actions
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn initial(&self) -> PackedState {
        let m = self.size - 1;
        let mut s = 0;
        s = self.with_coord(s, 0, 0);
        s = self.with_coord(s, 1, 0);
        s = self.with_coord(s, 2, m);
        s = self.with_coord(s, 3, m);
        s
    }
    fn decode(&self, s: PackedState, out: &mut Vec<u8>) {
        out.clear();
        for idx in 0..4 {
            out.push(self.coord(s, idx));
        }
    }
    fn sample(&self, s: PackedState, action: &[u8], rng: &mut ChaCha8Rng) -> PackedState {
        let mut next = s;
        for agent in 0..2 {
            if action[agent] != 0 && rng.gen::<f64>() >= self.p_fail {
                let (x, y) = (self.coord(s, 2 * agent), self.coord(s, 2 * agent + 1));
                let (nx, ny) = self.apply_move(x, y, action[agent]);
                next = self.with_coord(next, 2 * agent, nx);
                next = self.with_coord(next, 2 * agent + 1, ny);
            }
        }
        next
    }
    fn exact_transitions(&self, s: PackedState, action: &[u8]) -> Vec<(PackedState, f64)> {
        let mut dist: Vec<(PackedState, f64)> = vec![(s, 1.0)];
        for agent in 0..2 {
            if action[agent] != 0 {
                let (x, y) = (self.coord(s, 2 * agent), self.coord(s, 2 * agent + 1));
                let (nx, ny) = self.apply_move(x, y, action[agent]);
                let mut next = Vec::with_capacity(dist.len() * 2);
                for &(st, p) in &dist {
                    let moved =
                        self.with_coord(self.with_coord(st, 2 * agent, nx), 2 * agent + 1, ny);
                    next.push((moved, p * (1.0 - self.p_fail)));
                    next.push((st, p * self.p_fail));
                }
                dist = merge(next);
            }
        }
        dist
    }
    fn predicate_table(&self) -> &PredicateTable {
        &self.table
    }
}

fn merge(entries: Vec<(PackedState, f64)>) -> Vec<(PackedState, f64)> {
    let mut map: BTreeMap<PackedState, f64> = BTreeMap::new();
    for (s, p) in entries {
        *map.entry(s).or_insert(0.0) += p;
    }
    map.into_iter().collect()
}
