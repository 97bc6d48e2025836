//! Exact minimax for two-row games by enumerating supports of size one and
//! two on the column player's side.

use super::{MatrixGame, MatrixSolution, SolverError};

const TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    /// Column indices, ascending; `b == None` for a pure strategy.
    a: usize,
    b: Option<usize>,
    /// Weight on `a`.
    weight: f64,
}

impl Candidate {
    fn support_key(&self) -> (usize, usize) {
        // a lone column sorts before any pair that starts with it
        (self.a, self.b.map_or(0, |b| b + 1))
    }
}

/// Row-player mix on the feasible interval where every column pays at least
/// `value`; returns the lower end.
fn lowest_guaranteeing_y(a: &[f64], b: &[f64], value: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for (&ac, &bc) in a.iter().zip(b) {
        // y·(ac − bc) ≥ value − bc
        let d = ac - bc;
        let r = value - bc;
        if d > TIE {
            lo = lo.max(r / d);
        } else if d < -TIE {
            hi = hi.min(r / d);
        }
    }
    lo.clamp(0.0, 1.0).min(hi.max(0.0))
}

pub fn solve_matrix_game_two_row(game: &MatrixGame) -> Result<MatrixSolution, SolverError> {
    if game.rows() != 2 {
        return Err(SolverError::ShapeError(format!(
            "two-row solver needs 2 rows, got {}",
            game.rows()
        )));
    }
    let a = &game.payoff[0];
    let b = &game.payoff[1];
    let k = a.len();
    let mut best: Option<Candidate> = None;
    let mut consider = |c: Candidate| {
        best = match best {
            None => Some(c),
            Some(cur) => {
                let scale = 1.0f64.max(cur.value.abs());
                if c.value < cur.value - TIE * scale
                    || (c.value <= cur.value + TIE * scale && c.support_key() < cur.support_key())
                {
                    Some(c)
                } else {
                    Some(cur)
                }
            }
        };
    };
    for i in 0..k {
        consider(Candidate {
            value: a[i].max(b[i]),
            a: i,
            b: None,
            weight: 1.0,
        });
    }
    for i in 0..k {
        let di = a[i] - b[i];
        for j in i + 1..k {
            let dj = a[j] - b[j];
            if !((di > 0.0 && dj < 0.0) || (di < 0.0 && dj > 0.0)) {
                continue;
            }
            // weight w on i equalizes the two rows
            let w = dj / (dj - di);
            if !(w > 0.0 && w < 1.0) {
                continue;
            }
            consider(Candidate {
                value: w * a[i] + (1.0 - w) * a[j],
                a: i,
                b: Some(j),
                weight: w,
            });
        }
    }
    let best = best.ok_or_else(|| SolverError::ShapeError("no columns".into()))?;
    let mut col_mix = vec![0.0; k];
    col_mix[best.a] = best.weight;
    let y = match best.b {
        Some(j) => {
            col_mix[j] = 1.0 - best.weight;
            let (i, j) = (best.a, j);
            // crossing point of the two columns' payoff lines in y
            ((b[j] - b[i]) / ((a[i] - b[i]) - (a[j] - b[j]))).clamp(0.0, 1.0)
        }
        None => {
            let i = best.a;
            if a[i] > b[i] {
                1.0
            } else if a[i] < b[i] {
                0.0
            } else {
                lowest_guaranteeing_y(a, b, best.value)
            }
        }
    };
    Ok(MatrixSolution {
        value: best.value,
        col_mix,
        row_mix: vec![y, 1.0 - y],
    })
}
