use super::estimate::EstimatedModel;
use crate::automata::RewardMachine;
use crate::enumeration::{FiniteStatePolicy, Memory};
use crate::game_solving::{minmax_value_iteration, GameSolveError, MinmaxSolution, ZeroSumGame};
use crate::markov_game::GameModel;
use std::collections::HashMap;
use std::sync::Arc;

/// Two-player zero-sum game between a deviating agent (maximizer) and
/// the coalition of the others (minimizer), built as the product of the
/// estimated model with the candidate policy's memory, the deviator's
/// reward machine, and a deviation flag. While the flag is down the
/// minimizer's action is ignored and replaced by the candidate policy's
/// prescription; the flag rises the first time the deviator departs from
/// its prescribed action and never falls.
pub struct PunishmentGame {
    pub deviator: usize,
    /// (model state id, policy memory, machine state, deviated)
    pub tuples: Vec<(usize, Memory, usize, bool)>,
    pub index: HashMap<(usize, u64, usize, bool), usize>,
    pub zs: ZeroSumGame,
    /// action sizes of the non-deviating agents, ascending agent order
    pub min_sizes: Vec<u8>,
}

#[inline]
fn mem_key(m: Memory) -> u64 {
    ((m.z as u64) << 32) | m.monitor as u64
}

impl PunishmentGame {
    pub fn state_id(&self, sid: usize, mem: Memory, q: usize, deviated: bool) -> Option<usize> {
        self.index.get(&(sid, mem_key(mem), q, deviated)).copied()
    }

    /// Split a minimizer action id into the non-deviators' actions.
    pub fn decode_min_action(&self, mut id: usize, out: &mut Vec<u8>) {
        out.clear();
        out.resize(self.min_sizes.len(), 0);
        for i in (0..self.min_sizes.len()).rev() {
            out[i] = (id % self.min_sizes[i] as usize) as u8;
            id /= self.min_sizes[i] as usize;
        }
    }
}

/// Build the punishment game for `deviator` against candidate `fsp` on
/// the estimated model. Only states reachable from the initial product
/// state are materialized.
pub fn construct_game(
    game: &GameModel,
    model: &EstimatedModel,
    deviator: usize,
    rm: &RewardMachine,
    fsp: &FiniteStatePolicy,
) -> PunishmentGame {
    let n = game.num_agents();
    let sizes = game.env.actions_per_agent().to_vec();
    let max_actions = sizes[deviator] as usize;
    let min_sizes: Vec<u8> = (0..n).filter(|&i| i != deviator).map(|i| sizes[i]).collect();
    let min_actions: usize = min_sizes.iter().map(|&x| x as usize).product::<usize>().max(1);

    // per model state: decoded features and machine assignment mask
    let decoded: Vec<Vec<u8>> = model.states.iter().map(|&s| game.decoded(s)).collect();
    let masks: Vec<u32> = decoded.iter().map(|d| rm.mask_of(d)).collect();

    let sid0 = model.index[&game.initial()];
    let mem0 = fsp.initial_memory(&decoded[sid0]);
    let init_tuple = (sid0, mem0, rm.initial, false);

    let mut tuples = vec![init_tuple];
    let mut index: HashMap<(usize, u64, usize, bool), usize> =
        HashMap::from([((sid0, mem_key(mem0), rm.initial, false), 0)]);
    let mut trans: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut reward: Vec<f64> = Vec::new();
    let mut frontier = std::collections::VecDeque::from([0usize]);
    let mut joint = Vec::new();

    while let Some(pid) = frontier.pop_front() {
        let (sid, mem, q, deviated) = tuples[pid];
        let q2 = rm.update(masks[sid], q);
        let r = rm.step_reward(masks[sid], q) as f64;
        let prescribed_id = fsp.action_id(model.states[sid], mem) as usize;
        game.decode_joint(prescribed_id, &mut joint);
        let prescribed = joint.clone();

        let mut intern = |tuple: (usize, Memory, usize, bool),
                          tuples: &mut Vec<(usize, Memory, usize, bool)>,
                          frontier: &mut std::collections::VecDeque<usize>|
         -> usize {
            let key = (tuple.0, mem_key(tuple.1), tuple.2, tuple.3);
            match index.get(&key) {
                Some(&id) => id,
                None => {
                    let id = tuples.len();
                    tuples.push(tuple);
                    index.insert(key, id);
                    frontier.push_back(id);
                    id
                }
            }
        };

        for a1 in 0..max_actions {
            if !deviated {
                // minimizer ignored: effective action is the prescription
                // with the deviator's component substituted
                let mut eff = prescribed.clone();
                eff[deviator] = a1 as u8;
                let rises = a1 as u8 != prescribed[deviator];
                let row: Vec<(usize, f64)> = model.trans[sid][game.encode_joint(&eff)]
                    .iter()
                    .map(|&(sid2, p)| {
                        let mem2 = fsp.next_memory(mem, &decoded[sid2]);
                        let t = intern((sid2, mem2, q2, rises), &mut tuples, &mut frontier);
                        (t, p)
                    })
                    .collect();
                for _a2 in 0..min_actions {
                    trans.push(row.clone());
                    reward.push(r);
                }
            } else {
                for a2 in 0..min_actions {
                    let mut others = Vec::new();
                    decode_mixed_radix(a2, &min_sizes, &mut others);
                    let mut eff = Vec::with_capacity(n);
                    let mut oi = 0;
                    for i in 0..n {
                        if i == deviator {
                            eff.push(a1 as u8);
                        } else {
                            eff.push(others[oi]);
                            oi += 1;
                        }
                    }
                    let row: Vec<(usize, f64)> = model.trans[sid][game.encode_joint(&eff)]
                        .iter()
                        .map(|&(sid2, p)| {
                            let mem2 = fsp.next_memory(mem, &decoded[sid2]);
                            let t = intern((sid2, mem2, q2, true), &mut tuples, &mut frontier);
                            (t, p)
                        })
                        .collect();
                    trans.push(row);
                    reward.push(r);
                }
            }
        }
    }

    // size bound: twice (model states) x (memories seen) x (machine states)
    let mems: std::collections::BTreeSet<u64> =
        tuples.iter().map(|&(_, m, _, _)| mem_key(m)).collect();
    debug_assert!(tuples.len() <= 2 * model.num_states() * mems.len() * rm.num_states);

    let zs = ZeroSumGame {
        num_states: tuples.len(),
        max_actions,
        min_actions,
        horizon: game.horizon() + 1,
        initial: 0,
        trans,
        reward,
    };
    PunishmentGame { deviator, tuples, index, zs, min_sizes }
}

fn decode_mixed_radix(mut id: usize, sizes: &[u8], out: &mut Vec<u8>) {
    out.clear();
    out.resize(sizes.len(), 0);
    for i in (0..sizes.len()).rev() {
        out[i] = (id % sizes[i] as usize) as u8;
        id /= sizes[i] as usize;
    }
}

/// Solved punishment game: the deviation value and the minimizer's
/// stage policies, kept alongside the game for online replay.
pub struct PunishmentPlan {
    pub model: Arc<EstimatedModel>,
    pub game: PunishmentGame,
    pub value: f64,
    /// min_policy[t][product state] -> mixed strategy over minimizer ids
    pub min_policy: Vec<Vec<Vec<f64>>>,
}

/// Min-max value of the punishment game by backward induction.
pub fn punishment_value(
    model: &Arc<EstimatedModel>,
    game: PunishmentGame,
) -> Result<PunishmentPlan, GameSolveError> {
    let sol: MinmaxSolution = minmax_value_iteration(&game.zs)?;
    Ok(PunishmentPlan {
        model: model.clone(),
        game,
        value: sol.value,
        min_policy: sol.min_policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstract_graph::{product, spec_to_abstract_graph};
    use crate::automata::{dfa_to_rm, spec_to_dfa};
    use crate::enumeration::{EdgeMonitor, EdgePolicy};
    use crate::markov_game::single_lane_env;
    use crate::spec_lang::parse_spec;
    use crate::verification::bfs_estimate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Candidate on the one-cell lane: agent 0 races, agent 1 holds.
    fn race_candidate(game: &GameModel) -> Arc<FiniteStatePolicy> {
        let table = game.env.predicate_table().clone();
        let spec = parse_spec("achieve (at_goal_0 and not_at_goal_1)", &table).unwrap();
        let g = Arc::new(spec_to_abstract_graph(&spec));
        let pg = Arc::new(product(&[g], &[0]).unwrap());
        let monitor = Arc::new(EdgeMonitor::from_edge(&pg, &pg.edges[0]));
        // constant joint action (MOVE, STAY)
        let aid = game.encode_joint(&[1, 0]) as u16;
        Arc::new(FiniteStatePolicy {
            coalition: vec![0],
            path: vec![0],
            policies: vec![Arc::new(EdgePolicy::constant(0, aid))],
            monitors: vec![monitor],
        })
    }

    fn setup() -> (GameModel, Arc<EstimatedModel>, Arc<FiniteStatePolicy>) {
        let game = GameModel::new(Arc::new(single_lane_env(2, 1, 10, 0.05).unwrap()));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = Arc::new(bfs_estimate(&game, 200_000, &mut rng));
        let fsp = race_candidate(&game);
        (game, model, fsp)
    }

    /// Full product tensor equals an independently built brute-force
    /// product on the hand-checkable two-agent instance, and the
    /// pre-deviation rows ignore the minimizer's action.
    #[test]
    fn product_matches_brute_force() {
        let (game, model, fsp) = setup();
        let table = game.env.predicate_table().clone();
        let spec1 = parse_spec("achieve (at_goal_1 and not_at_goal_0)", &table).unwrap();
        let rm = dfa_to_rm(&spec_to_dfa(&spec1).unwrap());
        let pg = construct_game(&game, &model, 1, &rm, &fsp);

        // brute force: fixpoint over tuples with direct successor logic
        let decoded: Vec<Vec<u8>> = model.states.iter().map(|&s| game.decoded(s)).collect();
        let masks: Vec<u32> = decoded.iter().map(|d| rm.mask_of(d)).collect();
        let sid0 = model.index[&game.initial()];
        let mut expect: std::collections::BTreeMap<
            (usize, u64, usize, bool),
            Vec<Vec<(usize, u64, usize, bool, f64)>>,
        > = std::collections::BTreeMap::new();
        let mut work = vec![(sid0, fsp.initial_memory(&decoded[sid0]), rm.initial, false)];
        let mut seen = std::collections::BTreeSet::new();
        while let Some((sid, mem, q, dev)) = work.pop() {
            if !seen.insert((sid, mem_key(mem), q, dev)) {
                continue;
            }
            let q2 = rm.update(masks[sid], q);
            let mut joint = Vec::new();
            game.decode_joint(fsp.action_id(model.states[sid], mem) as usize, &mut joint);
            let mut rows = Vec::new();
            for a1 in 0..2usize {
                for a2 in 0..2usize {
                    let eff = if dev {
                        vec![a2 as u8, a1 as u8] // deviator is agent 1
                    } else {
                        vec![joint[0], a1 as u8]
                    };
                    let rises = dev || a1 as u8 != joint[1];
                    let mut row = Vec::new();
                    for &(sid2, p) in &model.trans[sid][game.encode_joint(&eff)] {
                        let mem2 = fsp.next_memory(mem, &decoded[sid2]);
                        row.push((sid2, mem_key(mem2), q2, rises, p));
                        work.push((sid2, mem2, q2, rises));
                    }
                    rows.push(row);
                }
            }
            expect.insert((sid, mem_key(mem), q, dev), rows);
        }
        assert_eq!(expect.len(), pg.tuples.len());
        // compare every transition row
        for (pid, &(sid, mem, q, dev)) in pg.tuples.iter().enumerate() {
            let rows = &expect[&(sid, mem_key(mem), q, dev)];
            for a1 in 0..2usize {
                for a2 in 0..2usize {
                    let got = &pg.zs.trans[pg.zs.idx(pid, a1, a2)];
                    let want = &rows[a1 * 2 + a2];
                    assert_eq!(got.len(), want.len());
                    for (g, w) in got.iter().zip(want) {
                        let (sid2, memk2, q2, dev2, p) = *w;
                        let tup = pg.tuples[g.0];
                        assert_eq!((tup.0, mem_key(tup.1), tup.2, tup.3), (sid2, memk2, q2, dev2));
                        assert!((g.1 - p).abs() < 1e-12);
                    }
                    // flag monotonicity: once deviated, successors stay deviated
                    if dev {
                        for g in got {
                            assert!(pg.tuples[g.0].3);
                        }
                    }
                }
            }
            // pre-deviation rows are independent of the minimizer action
            if !dev {
                for a1 in 0..2usize {
                    let first = &pg.zs.trans[pg.zs.idx(pid, a1, 0)];
                    for a2 in 1..2usize {
                        assert_eq!(&pg.zs.trans[pg.zs.idx(pid, a1, a2)], first);
                    }
                }
            }
        }
        // size bound from the product construction
        assert!(pg.tuples.len() <= 2 * model.num_states() * 4 * rm.num_states);
    }

    /// Deviation value of the one-cell race: the deviator wins only by
    /// succeeding on a step where the racing punisher fails, before the
    /// punisher ever succeeds.
    #[test]
    fn race_deviation_value() {
        let (game, model, fsp) = setup();
        let table = game.env.predicate_table().clone();
        let spec1 = parse_spec("achieve (at_goal_1 and not_at_goal_0)", &table).unwrap();
        let rm = dfa_to_rm(&spec_to_dfa(&spec1).unwrap());
        let pg = construct_game(&game, &model, 1, &rm, &fsp);
        let plan = punishment_value(&model, pg).unwrap();
        // closed form: q(1-q) / (1 - (1-q)^2) with q = 0.95, truncated
        // at the horizon (negligible); estimation noise bounded by K
        let q = 0.95;
        let expected = q * (1.0 - q) / (1.0 - (1.0 - q) * (1.0 - q));
        assert!(
            (plan.value - expected).abs() < 0.004,
            "dev {} vs closed form {expected}",
            plan.value
        );
    }

    /// A deviator whose machine can never accept gets deviation value 0.
    #[test]
    fn impossible_goal_has_zero_deviation_value() {
        let (game, model, fsp) = setup();
        let table = game.env.predicate_table().clone();
        let spec1 = parse_spec("achieve false", &table).unwrap();
        let rm = dfa_to_rm(&spec_to_dfa(&spec1).unwrap());
        let pg = construct_game(&game, &model, 1, &rm, &fsp);
        let plan = punishment_value(&model, pg).unwrap();
        assert!(plan.value.abs() < 1e-12);
    }

    /// When the deviator fully controls its goal, punishment cannot
    /// reduce the deviation value below the solo optimum.
    #[test]
    fn solo_goal_deviation_value_is_solo_optimum() {
        let (game, model, fsp) = setup();
        let table = game.env.predicate_table().clone();
        let spec1 = parse_spec("achieve at_goal_1", &table).unwrap();
        let rm = dfa_to_rm(&spec_to_dfa(&spec1).unwrap());
        let pg = construct_game(&game, &model, 1, &rm, &fsp);
        let plan = punishment_value(&model, pg).unwrap();
        // reach one cell in 10 tries at ~0.95 per step
        assert!(plan.value > 0.999, "dev {}", plan.value);
    }
}
