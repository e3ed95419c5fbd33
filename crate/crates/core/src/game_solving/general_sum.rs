use super::GameSolveError;

/// One-shot n-player game; `payoffs[profile][player]` with profiles in
/// mixed-radix order over `actions`.
#[derive(Clone, Debug)]
pub struct StrategicGame {
    pub actions: Vec<usize>,
    pub payoffs: Vec<Vec<f64>>,
}

impl StrategicGame {
    pub fn num_players(&self) -> usize {
        self.actions.len()
    }

    pub fn profile_id(&self, profile: &[usize]) -> usize {
        let mut id = 0;
        for (i, &a) in profile.iter().enumerate() {
            id = id * self.actions[i] + a;
        }
        id
    }

    pub fn expected_payoffs(&self, strategies: &[Vec<f64>]) -> Vec<f64> {
        let n = self.num_players();
        let mut totals = vec![0.0; n];
        let mut profile = vec![0usize; n];
        loop {
            let mut prob = 1.0;
            for (i, &a) in profile.iter().enumerate() {
                prob *= strategies[i][a];
            }
            if prob > 0.0 {
                let id = self.profile_id(&profile);
                for p in 0..n {
                    totals[p] += prob * self.payoffs[id][p];
                }
            }
            if !next_profile(&mut profile, &self.actions) {
                break;
            }
        }
        totals
    }

    /// Player `p`'s payoff for pure action `a` against the others' mixed
    /// strategies.
    fn response_payoff(&self, strategies: &[Vec<f64>], p: usize, a: usize) -> f64 {
        let n = self.num_players();
        let mut total = 0.0;
        let mut profile = vec![0usize; n];
        loop {
            if profile[p] == a {
                let mut prob = 1.0;
                for (i, &ai) in profile.iter().enumerate() {
                    if i != p {
                        prob *= strategies[i][ai];
                    }
                }
                if prob > 0.0 {
                    total += prob * self.payoffs[self.profile_id(&profile)][p];
                }
            }
            if !next_profile(&mut profile, &self.actions) {
                break;
            }
        }
        total
    }

    /// Largest unilateral improvement any player can gain over the
    /// profile's expected payoffs.
    pub fn exploitability(&self, strategies: &[Vec<f64>]) -> f64 {
        let base = self.expected_payoffs(strategies);
        let mut worst: f64 = 0.0;
        for p in 0..self.num_players() {
            for a in 0..self.actions[p] {
                worst = worst.max(self.response_payoff(strategies, p, a) - base[p]);
            }
        }
        worst
    }
}

fn next_profile(profile: &mut [usize], sizes: &[usize]) -> bool {
    for i in (0..profile.len()).rev() {
        profile[i] += 1;
        if profile[i] < sizes[i] {
            return true;
        }
        profile[i] = 0;
    }
    false
}

/// Find a Nash equilibrium of the one-shot game and, among the
/// equilibria found, return one maximizing the welfare (sum of player
/// values); equal-welfare ties go to the first found (lexicographic
/// search order).
///
/// Scope: exact support enumeration for two players; for more players,
/// pure-profile enumeration followed by a damped best-response heuristic.
/// The n > 2 search is incomplete by design and reports
/// `NoEquilibriumFound` rather than guessing.
pub fn best_nash_general_sum(game: &StrategicGame) -> Result<Vec<Vec<f64>>, GameSolveError> {
    let n = game.num_players();
    match n {
        1 => {
            let best = (0..game.actions[0])
                .max_by(|&a, &b| game.payoffs[a][0].total_cmp(&game.payoffs[b][0]))
                .unwrap();
            let mut s = vec![0.0; game.actions[0]];
            s[best] = 1.0;
            Ok(vec![s])
        }
        2 => Ok(bimatrix_support_enumeration(game)),
        _ => n_player_scoped(game),
    }
}

fn pure_equilibria(game: &StrategicGame) -> Vec<(Vec<Vec<f64>>, f64)> {
    let n = game.num_players();
    let mut found = Vec::new();
    let mut profile = vec![0usize; n];
    loop {
        let id = game.profile_id(&profile);
        let mut is_ne = true;
        'outer: for p in 0..n {
            let own = game.payoffs[id][p];
            let mut alt = profile.clone();
            for a in 0..game.actions[p] {
                if a != profile[p] {
                    alt[p] = a;
                    if game.payoffs[game.profile_id(&alt)][p] > own + 1e-9 {
                        is_ne = false;
                        break 'outer;
                    }
                }
            }
            alt[p] = profile[p];
        }
        if is_ne {
            let welfare: f64 = game.payoffs[id].iter().sum();
            let strategies: Vec<Vec<f64>> = (0..n)
                .map(|p| {
                    let mut s = vec![0.0; game.actions[p]];
                    s[profile[p]] = 1.0;
                    s
                })
                .collect();
            found.push((strategies, welfare));
        }
        if !next_profile(&mut profile, &game.actions) {
            break;
        }
    }
    found
}

fn bimatrix_support_enumeration(game: &StrategicGame) -> Vec<Vec<f64>> {
    let m = game.actions[0];
    let n = game.actions[1];
    let pay = |i: usize, j: usize, p: usize| game.payoffs[i * n + j][p];
    let mut found: Vec<(Vec<Vec<f64>>, f64)> = pure_equilibria(game);

    for k in 2..=m.min(n) {
        for s1 in subsets_of_size(m, k) {
            for s2 in subsets_of_size(n, k) {
                // y makes player 1 indifferent across s1
                let mut a = vec![vec![0.0f64; k + 1]; k + 1];
                let mut b = vec![0.0f64; k + 1];
                for (ri, &i) in s1.iter().enumerate() {
                    for (ci, &j) in s2.iter().enumerate() {
                        a[ri][ci] = pay(i, j, 0);
                    }
                    a[ri][k] = -1.0;
                }
                for ci in 0..k {
                    a[k][ci] = 1.0;
                }
                b[k] = 1.0;
                let Some(sol_y) = solve_linear(a, b) else { continue };
                let (y_s, v1) = (&sol_y[..k], sol_y[k]);
                if y_s.iter().any(|&p| p < -1e-9) {
                    continue;
                }
                // x makes player 2 indifferent across s2
                let mut a = vec![vec![0.0f64; k + 1]; k + 1];
                let mut b = vec![0.0f64; k + 1];
                for (ci, &j) in s2.iter().enumerate() {
                    for (ri, &i) in s1.iter().enumerate() {
                        a[ci][ri] = pay(i, j, 1);
                    }
                    a[ci][k] = -1.0;
                }
                for ri in 0..k {
                    a[k][ri] = 1.0;
                }
                b[k] = 1.0;
                let Some(sol_x) = solve_linear(a, b) else { continue };
                let (x_s, v2) = (&sol_x[..k], sol_x[k]);
                if x_s.iter().any(|&p| p < -1e-9) {
                    continue;
                }
                let mut x = vec![0.0; m];
                let mut y = vec![0.0; n];
                for (ri, &i) in s1.iter().enumerate() {
                    x[i] = x_s[ri].max(0.0);
                }
                for (ci, &j) in s2.iter().enumerate() {
                    y[j] = y_s[ci].max(0.0);
                }
                // no profitable pure deviations outside the supports
                let ok1 = (0..m).all(|i| {
                    let payoff: f64 = (0..n).map(|j| pay(i, j, 0) * y[j]).sum();
                    payoff <= v1 + 1e-9
                });
                let ok2 = (0..n).all(|j| {
                    let payoff: f64 = (0..m).map(|i| pay(i, j, 1) * x[i]).sum();
                    payoff <= v2 + 1e-9
                });
                if ok1 && ok2 {
                    found.push((vec![x, y], v1 + v2));
                }
            }
        }
    }
    // welfare-max, first-found on ties
    let mut best = 0;
    for i in 1..found.len() {
        if found[i].1 > found[best].1 + 1e-12 {
            best = i;
        }
    }
    assert!(!found.is_empty(), "bimatrix games always have an equilibrium in the searched class");
    found.swap_remove(best).0
}

fn n_player_scoped(game: &StrategicGame) -> Result<Vec<Vec<f64>>, GameSolveError> {
    let pures = pure_equilibria(game);
    if !pures.is_empty() {
        let mut best = 0;
        for i in 1..pures.len() {
            if pures[i].1 > pures[best].1 + 1e-12 {
                best = i;
            }
        }
        return Ok(pures.into_iter().nth(best).unwrap().0);
    }
    // damped best-response iteration from the uniform profile
    let n = game.num_players();
    let mut strategies: Vec<Vec<f64>> = (0..n)
        .map(|p| vec![1.0 / game.actions[p] as f64; game.actions[p]])
        .collect();
    let damping = 0.05;
    for _ in 0..5_000 {
        for p in 0..n {
            let payoffs: Vec<f64> = (0..game.actions[p])
                .map(|a| game.response_payoff(&strategies, p, a))
                .collect();
            let best = (0..game.actions[p])
                .max_by(|&a, &b| payoffs[a].total_cmp(&payoffs[b]))
                .unwrap();
            for (a, w) in strategies[p].iter_mut().enumerate() {
                let target = if a == best { 1.0 } else { 0.0 };
                *w += damping * (target - *w);
            }
        }
    }
    if game.exploitability(&strategies) <= 1e-6 {
        Ok(strategies)
    } else {
        Err(GameSolveError::NoEquilibriumFound)
    }
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            rec(i + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub(crate) fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
