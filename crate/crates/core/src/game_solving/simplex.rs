use super::GameSolveError;

/// Two-player zero-sum matrix game; entries are the row (maximizing)
/// player's payoffs.
#[derive(Clone, Debug)]
pub struct MatrixGame {
    pub payoffs: Vec<Vec<f64>>,
}

impl MatrixGame {
    pub fn rows(&self) -> usize {
        self.payoffs.len()
    }
    pub fn cols(&self) -> usize {
        self.payoffs[0].len()
    }
}

/// Minimax value and optimal mixed strategies of a matrix game.
#[derive(Clone, Debug)]
pub struct StageOutcome {
    pub value: f64,
    pub max_strategy: Vec<f64>,
    pub min_strategy: Vec<f64>,
}

impl StageOutcome {
    /// Index of the heaviest pure action, if the strategy is pure up to
    /// tolerance.
    pub fn pure_max(&self) -> Option<usize> {
        self.max_strategy.iter().position(|&p| p >= 1.0 - 1e-9)
    }
}

/// Solve by the standard linear-programming reduction: shift payoffs
/// positive, solve the column player's LP `max sum(y) : A y <= 1` with a
/// dense simplex (Bland's rule), and read the row player's strategy off
/// the duals. Matrices here are small (at most a few dozen actions), so
/// no numerical sophistication is needed.
pub fn solve_matrix_game(game: &MatrixGame) -> Result<StageOutcome, GameSolveError> {
    let m = game.rows();
    let n = game.cols();
    assert!(m >= 1 && n >= 1);

    // fast path: every row constant in the column action (the punishment
    // games hit this on every pre-deviation state)
    if game
        .payoffs
        .iter()
        .all(|row| row.iter().all(|&x| (x - row[0]).abs() < 1e-12))
    {
        let (best, _) = game
            .payoffs
            .iter()
            .enumerate()
            .map(|(i, row)| (i, row[0]))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let mut xs = vec![0.0; m];
        xs[best] = 1.0;
        let mut ys = vec![0.0; n];
        ys[0] = 1.0;
        return Ok(StageOutcome { value: game.payoffs[best][0], max_strategy: xs, min_strategy: ys });
    }

    let min_entry = game
        .payoffs
        .iter()
        .flat_map(|r| r.iter())
        .copied()
        .fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min_entry;

    // tableau for max sum(y) s.t. (A + shift) y <= 1, y >= 0
    let cols = n + m + 1;
    let mut tab = vec![vec![0.0f64; cols]; m + 1];
    for i in 0..m {
        for j in 0..n {
            tab[i][j] = game.payoffs[i][j] + shift;
        }
        tab[i][n + i] = 1.0;
        tab[i][cols - 1] = 1.0;
    }
    for j in 0..n {
        tab[m][j] = -1.0; // cost row for maximization
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let eps = 1e-11;
    let max_iters = 20_000;
    let mut iter = 0;
    loop {
        iter += 1;
        if iter > max_iters {
            return Err(GameSolveError::LpStalled);
        }
        // Bland: entering variable = smallest index with negative cost
        let Some(enter) = (0..cols - 1).find(|&j| tab[m][j] < -eps) else {
            break;
        };
        // ratio test, ties by smallest basis index
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            if tab[i][enter] > eps {
                let ratio = tab[i][cols - 1] / tab[i][enter];
                let better = ratio < best_ratio - eps
                    || (ratio < best_ratio + eps
                        && leave.map_or(true, |l| basis[i] < basis[l]));
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            return Err(GameSolveError::LpStalled); // unbounded: impossible here
        };
        // pivot
        let piv = tab[leave][enter];
        for x in tab[leave].iter_mut() {
            *x /= piv;
        }
        for i in 0..=m {
            if i != leave {
                let f = tab[i][enter];
                if f.abs() > 0.0 {
                    for j in 0..cols {
                        tab[i][j] -= f * tab[leave][j];
                    }
                }
            }
        }
        basis[leave] = enter;
    }

    let objective = tab[m][cols - 1];
    debug_assert!(objective > eps);
    let v_shifted = 1.0 / objective;

    let mut y = vec![0.0f64; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            y[b] = tab[i][cols - 1];
        }
    }
    let mut x = vec![0.0f64; m];
    for i in 0..m {
        x[i] = tab[m][n + i]; // duals from slack reduced costs
    }
    let norm_y: f64 = y.iter().sum();
    let norm_x: f64 = x.iter().sum();
    for yj in &mut y {
        *yj = (*yj / norm_y).max(0.0);
    }
    for xi in &mut x {
        *xi = (*xi / norm_x).max(0.0);
    }
    Ok(StageOutcome { value: v_shifted - shift, max_strategy: x, min_strategy: y })
}
