use super::simplex::{solve_matrix_game, MatrixGame, StageOutcome};
use super::GameSolveError;

/// Finite-horizon two-player zero-sum stochastic game with known
/// transition probabilities (typically an estimated model).
#[derive(Clone, Debug)]
pub struct ZeroSumGame {
    pub num_states: usize,
    pub max_actions: usize,
    pub min_actions: usize,
    pub horizon: usize,
    pub initial: usize,
    /// indexed by `s * (max_actions * min_actions) + a1 * min_actions + a2`
    pub trans: Vec<Vec<(usize, f64)>>,
    pub reward: Vec<f64>,
}

impl ZeroSumGame {
    #[inline]
    pub fn idx(&self, s: usize, a1: usize, a2: usize) -> usize {
        s * self.max_actions * self.min_actions + a1 * self.min_actions + a2
    }
}

/// Stage-wise optimal mixed strategies for both players, per (state, step).
pub struct MinmaxSolution {
    pub value: f64,
    /// values[t][s] = optimal value-to-go from state s at step t
    pub values: Vec<Vec<f64>>,
    pub max_policy: Vec<Vec<Vec<f64>>>,
    pub min_policy: Vec<Vec<Vec<f64>>>,
}

/// Backward induction, solving one matrix game per (state, step):
/// V(s, H) = 0 and V(s, t) = minimax over the stage matrix
/// `r(s,a1,a2) + E[V(s', t+1)]`. The returned per-stage mixed strategies
/// attain the minimax value.
pub fn minmax_value_iteration(game: &ZeroSumGame) -> Result<MinmaxSolution, GameSolveError> {
    let h = game.horizon;
    let ns = game.num_states;
    let mut values = vec![vec![0.0f64; ns]; h + 1];
    let mut max_policy = vec![vec![Vec::new(); ns]; h];
    let mut min_policy = vec![vec![Vec::new(); ns]; h];
    let mut stage = vec![vec![0.0f64; game.min_actions]; game.max_actions];
    for t in (0..h).rev() {
        for s in 0..ns {
            for a1 in 0..game.max_actions {
                for a2 in 0..game.min_actions {
                    let idx = game.idx(s, a1, a2);
                    let mut q = game.reward[idx];
                    for &(s2, p) in &game.trans[idx] {
                        q += p * values[t + 1][s2];
                    }
                    stage[a1][a2] = q;
                }
            }
            let out: StageOutcome = solve_matrix_game(&MatrixGame { payoffs: stage.clone() })?;
            values[t][s] = out.value;
            max_policy[t][s] = out.max_strategy;
            min_policy[t][s] = out.min_strategy;
        }
    }
    Ok(MinmaxSolution { value: values[0][game.initial], values, max_policy, min_policy })
}
