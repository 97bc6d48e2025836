//! Minimax LP for the column (minimizing) player, by a dense tableau simplex
//! with Bland's rule.
//!
//! With every payoff shifted to at least 1, the problem
//! `min t  s.t.  M x ≤ t·1, Σx = 1, x ≥ 0` becomes, for `u = x / t`,
//! `max Σu  s.t.  M u ≤ 1, u ≥ 0`, which starts feasible at the origin. A cap
//! `x_c ≤ γ` becomes `u_c − γ·Σu ≤ 0`. Reduced costs of the row slacks at the
//! optimum are the row player's dual weights.

use super::{MatrixGame, MatrixSolution, SolverError};

const EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 20_000;

struct Tableau {
    /// `m` constraint rows then the objective row; each row has `n + m + 1`
    /// entries (structural, slack, right-hand side).
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n: usize,
    m: usize,
}

impl Tableau {
    fn new(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Self {
        let m = a.len();
        let n = c.len();
        let width = n + m + 1;
        let mut t = Vec::with_capacity(m + 1);
        for (i, row) in a.iter().enumerate() {
            let mut r = vec![0.0; width];
            r[..n].copy_from_slice(row);
            r[n + i] = 1.0;
            r[width - 1] = b[i];
            t.push(r);
        }
        let mut obj = vec![0.0; width];
        for j in 0..n {
            obj[j] = -c[j];
        }
        t.push(obj);
        Tableau {
            t,
            basis: (n..n + m).collect(),
            n,
            m,
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Run to optimality. Bland's rule: lowest-index improving column, and
    /// among minimum-ratio rows the lowest basic variable.
    fn solve(&mut self) -> Result<(), SolverError> {
        let last = self.n + self.m;
        for _ in 0..MAX_PIVOTS {
            let obj = &self.t[self.m];
            let Some(col) = (0..last).find(|&j| obj[j] < -EPS) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.t[i][col];
                if a <= EPS {
                    continue;
                }
                let ratio = self.t[i][last] / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - EPS
                            || (ratio <= br + EPS && self.basis[i] < self.basis[bi])
                        {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((row, _)) = best else {
                return Err(SolverError::NumericalError("unbounded LP".into()));
            };
            self.pivot(row, col);
        }
        Err(SolverError::SolverStalled {
            pivots: MAX_PIVOTS,
        })
    }

    fn primal(&self) -> Vec<f64> {
        let last = self.n + self.m;
        let mut u = vec![0.0; self.n];
        for (i, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                u[j] = self.t[i][last].max(0.0);
            }
        }
        u
    }

    fn dual(&self, i: usize) -> f64 {
        self.t[self.m][self.n + i]
    }
}

/// Column mixture and value of `min_x max_r (M x)_r`, plus the raw dual
/// weights of the row constraints.
fn column_lp(game: &MatrixGame, cap: Option<f64>) -> Result<(f64, Vec<f64>, Vec<f64>), SolverError> {
    let rows = game.rows();
    let cols = game.cols();
    let min = game
        .payoff
        .iter()
        .flatten()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min;
    let mut a: Vec<Vec<f64>> = game
        .payoff
        .iter()
        .map(|r| r.iter().map(|v| v + shift).collect())
        .collect();
    let mut b = vec![1.0; rows];
    if let Some(g) = cap.filter(|&g| g < 1.0) {
        for c in 0..cols {
            let mut r = vec![-g; cols];
            r[c] += 1.0;
            a.push(r);
            b.push(0.0);
        }
    }
    let mut tab = Tableau::new(&a, &b, &vec![1.0; cols]);
    tab.solve()?;
    let u = tab.primal();
    let total: f64 = u.iter().sum();
    if !(total > 0.0) {
        return Err(SolverError::NumericalError("degenerate LP optimum".into()));
    }
    let x: Vec<f64> = u.iter().map(|v| v / total).collect();
    let duals: Vec<f64> = (0..rows).map(|i| tab.dual(i)).collect();
    let value = 1.0 / total - shift;
    Ok((value, x, duals))
}

fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    if v.iter().any(|&p| p < -1e-9 || !p.is_finite()) {
        return None;
    }
    let clipped: Vec<f64> = v.iter().map(|p| p.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    if s <= EPS {
        return None;
    }
    Some(clipped.into_iter().map(|p| p / s).collect())
}

/// Lowest-index row maximizing `(M x)_r`.
fn best_row(game: &MatrixGame, x: &[f64]) -> Vec<f64> {
    let payoffs: Vec<f64> = game
        .payoff
        .iter()
        .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect();
    let mut best = 0;
    for (i, &p) in payoffs.iter().enumerate() {
        if p > payoffs[best] + EPS {
            best = i;
        }
    }
    let mut y = vec![0.0; game.rows()];
    y[best] = 1.0;
    y
}

pub fn solve_matrix_game_lp(
    game: &MatrixGame,
    cap: Option<f64>,
) -> Result<MatrixSolution, SolverError> {
    if let Some(g) = cap {
        if !(g > 0.0 && g <= 1.0) {
            return Err(SolverError::InvalidCap(g));
        }
        if g * (game.cols() as f64) < 1.0 - 1e-12 {
            return Err(SolverError::InfeasibleCap {
                cap: g,
                columns: game.cols(),
            });
        }
    }
    let (value, col_mix, duals) = column_lp(game, cap)?;
    let capped = cap.is_some_and(|g| g < 1.0);
    let row_mix = match normalize(&duals) {
        Some(y) if capped || game.row_guarantee(&y) >= value - 1e-9 => y,
        _ if capped => best_row(game, &col_mix),
        _ => {
            // degenerate duals: solve the row player's side directly
            let (neg, y, _) = column_lp(&game.transposed_negated(), None)?;
            debug_assert!((neg + value).abs() < 1e-7);
            y
        }
    };
    Ok(MatrixSolution {
        value,
        col_mix,
        row_mix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn game(rows: Vec<Vec<f64>>) -> MatrixGame {
        MatrixGame::new(rows).unwrap()
    }

    #[test]
    fn matching_pennies() {
        let s = solve_matrix_game_lp(&game(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]), None).unwrap();
        assert!(s.value.abs() < 1e-12);
        assert!((s.col_mix[0] - 0.5).abs() < 1e-12);
        assert!((s.row_mix[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_column() {
        let s = solve_matrix_game_lp(&game(vec![vec![0.3], vec![0.7]]), None).unwrap();
        assert!((s.value - 0.7).abs() < 1e-12);
        assert_eq!(s.col_mix, vec![1.0]);
        assert_eq!(s.row_mix, vec![0.0, 1.0]);
    }

    #[test]
    fn cap_binds() {
        // column 0 dominates; capping it at 0.7 forces weight onto column 1
        let g = game(vec![vec![0.1, 0.9], vec![0.2, 0.8]]);
        let free = solve_matrix_game_lp(&g, None).unwrap();
        assert!((free.value - 0.2).abs() < 1e-12);
        let capped = solve_matrix_game_lp(&g, Some(0.7)).unwrap();
        assert!((capped.col_mix[0] - 0.7).abs() < 1e-12);
        assert!((capped.value - (0.7 * 0.2 + 0.3 * 0.8)).abs() < 1e-12);
        assert!(capped.value >= free.value);
    }

    #[test]
    fn infeasible_cap() {
        let g = game(vec![vec![0.1, 0.9, 0.5], vec![0.2, 0.8, 0.5]]);
        assert!(matches!(
            solve_matrix_game_lp(&g, Some(0.3)),
            Err(SolverError::InfeasibleCap { columns: 3, .. })
        ));
        assert!(solve_matrix_game_lp(&g, Some(1.0 / 3.0)).is_ok());
        assert!(matches!(
            solve_matrix_game_lp(&g, Some(0.0)),
            Err(SolverError::InvalidCap(_))
        ));
    }

    #[test]
    fn degenerate_ties() {
        // identical columns and a saddle shared by several entries
        let g = game(vec![vec![0.5; 6], vec![0.5; 6]]);
        let s = solve_matrix_game_lp(&g, None).unwrap();
        assert!((s.value - 0.5).abs() < 1e-12);
        assert!((s.col_mix.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((s.row_mix.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_rows() {
        // rock-paper-scissors
        let g = game(vec![
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![-1.0, 1.0, 0.0],
        ]);
        let s = solve_matrix_game_lp(&g, None).unwrap();
        assert!(s.value.abs() < 1e-12);
        for p in s.col_mix.iter().chain(&s.row_mix) {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }
}
