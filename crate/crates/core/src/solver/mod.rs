//! Equilibrium computation for the at-bat game: per-count matrix games
//! (batter rows maximize OBP, pitcher columns minimize it) combined by value
//! iteration or by a topological sweep over the count lattice.

mod lp;
mod stochastic;
mod two_row;

pub use lp::solve_matrix_game_lp;
pub use stochastic::{
    batter_best_response, exploitability, pitcher_best_response, policy_value, solve_acyclic,
    state_matrix, value_iterate, Exploitability, Solved,
};
pub use two_row::solve_matrix_game_two_row;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Count, GameError, PitcherAction, NUM_COUNTS, NUM_STATES, ON_BASE};
use crate::zones::{PitchType, ZoneId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("bad matrix shape: {0}")]
    ShapeError(String),
    #[error("payoff matrix has a non-finite entry")]
    NonFinite,
    #[error("cap {cap} is infeasible for {columns} actions (cap × actions < 1)")]
    InfeasibleCap { cap: f64, columns: usize },
    #[error("cap must lie in (0, 1], got {0}")]
    InvalidCap(f64),
    #[error("simplex exceeded {pivots} pivots")]
    SolverStalled { pivots: usize },
    #[error("value iteration did not converge in {iterations} sweeps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("numerical failure: {0}")]
    NumericalError(String),
    #[error("LP and two-row solvers disagree at {count}: {lp} vs {two_row}")]
    SolverMismatch { count: String, lp: f64, two_row: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Payoff matrix, row-major. Rows are the maximizer's actions.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    pub payoff: Vec<Vec<f64>>,
}

impl MatrixGame {
    pub fn new(payoff: Vec<Vec<f64>>) -> Result<Self, SolverError> {
        let cols = payoff.first().map_or(0, |r| r.len());
        if payoff.is_empty() || cols == 0 || payoff.iter().any(|r| r.len() != cols) {
            return Err(SolverError::ShapeError("empty or ragged payoff matrix".into()));
        }
        if payoff.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite);
        }
        Ok(MatrixGame { payoff })
    }

    pub fn rows(&self) -> usize {
        self.payoff.len()
    }

    pub fn cols(&self) -> usize {
        self.payoff[0].len()
    }

    /// Worst column payoff against row mix `y`.
    pub fn row_guarantee(&self, y: &[f64]) -> f64 {
        (0..self.cols())
            .map(|c| (0..self.rows()).map(|r| y[r] * self.payoff[r][c]).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    /// Best row payoff against column mix `x`.
    pub fn column_guarantee(&self, x: &[f64]) -> f64 {
        self.payoff
            .iter()
            .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `−Mᵀ`: the row player's problem posed for a minimizing column player.
    pub fn transposed_negated(&self) -> MatrixGame {
        let payoff = (0..self.cols())
            .map(|c| (0..self.rows()).map(|r| -self.payoff[r][c]).collect())
            .collect();
        MatrixGame { payoff }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSolution {
    pub value: f64,
    pub col_mix: Vec<f64>,
    pub row_mix: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    #[default]
    Lp,
    TwoRow,
    CrossCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub cap: Option<f64>,
    pub method: SolverMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-9,
            max_iterations: 10_000,
            cap: None,
            method: SolverMethod::Lp,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, columns: usize) -> Result<(), SolverError> {
        if !(self.tolerance > 0.0) {
            return Err(SolverError::InvalidConfig("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::InvalidConfig("max_iterations must be positive".into()));
        }
        if let Some(g) = self.cap {
            if !(g > 0.0 && g <= 1.0) {
                return Err(SolverError::InvalidCap(g));
            }
            if g * (columns as f64) < 1.0 - 1e-12 {
                return Err(SolverError::InfeasibleCap { cap: g, columns });
            }
        }
        Ok(())
    }
}

/// Solve one state's game with the configured method. A cap always goes
/// through the LP.
pub fn solve_matrix_game(
    game: &MatrixGame,
    config: &SolverConfig,
    label: &str,
) -> Result<MatrixSolution, SolverError> {
    if config.cap.is_some_and(|g| g < 1.0) {
        return solve_matrix_game_lp(game, config.cap);
    }
    match config.method {
        SolverMethod::Lp => solve_matrix_game_lp(game, None),
        SolverMethod::TwoRow => solve_matrix_game_two_row(game),
        SolverMethod::CrossCheck => {
            let lp = solve_matrix_game_lp(game, None)?;
            let tr = solve_matrix_game_two_row(game)?;
            if (lp.value - tr.value).abs() > 1e-8 {
                return Err(SolverError::SolverMismatch {
                    count: label.to_string(),
                    lp: lp.value,
                    two_row: tr.value,
                });
            }
            Ok(tr)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub pitch: PitchType,
    pub zone: ZoneId,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatterPolicy {
    pub swing: f64,
    pub take: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSolution {
    pub value: f64,
    /// Support of the pitcher's mix, in action order.
    pub pitcher_policy: Vec<PolicyEntry>,
    pub batter_policy: BatterPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalValues {
    pub on_base: f64,
    pub out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub counts: BTreeMap<Count, CountSolution>,
    pub terminal_values: TerminalValues,
}

impl EquilibriumSolution {
    pub fn count(&self, c: Count) -> &CountSolution {
        &self.counts[&c]
    }

    pub fn value(&self, c: Count) -> f64 {
        self.counts[&c].value
    }

    /// Values indexed by state: counts, then OnBase = 1, Out = 0.
    pub fn state_values(&self) -> [f64; NUM_STATES] {
        let mut v = [0.0; NUM_STATES];
        for c in Count::all() {
            v[c.index()] = self.value(c);
        }
        v[ON_BASE] = self.terminal_values.on_base;
        v
    }

    /// The pitcher's mix at `c` as a dense vector over `actions`.
    pub fn pitcher_mix(&self, c: Count, actions: &[PitcherAction]) -> Vec<f64> {
        let mut out = vec![0.0; actions.len()];
        for e in &self.counts[&c].pitcher_policy {
            let a = PitcherAction {
                pitch: e.pitch,
                aim: e.zone,
            };
            if let Some(i) = actions.iter().position(|&x| x == a) {
                out[i] += e.prob;
            }
        }
        out
    }

    pub fn batter_mix(&self, c: Count) -> [f64; 2] {
        let b = self.counts[&c].batter_policy;
        [b.swing, b.take]
    }

    pub(crate) fn from_parts(
        actions: &[PitcherAction],
        per_count: Vec<MatrixSolution>,
    ) -> EquilibriumSolution {
        debug_assert_eq!(per_count.len(), NUM_COUNTS);
        let mut counts = BTreeMap::new();
        for (i, s) in per_count.into_iter().enumerate() {
            let x = clean(&s.col_mix);
            let y = clean(&s.row_mix);
            let pitcher_policy = actions
                .iter()
                .zip(&x)
                .filter(|(_, &p)| p > 0.0)
                .map(|(a, &p)| PolicyEntry {
                    pitch: a.pitch,
                    zone: a.aim,
                    prob: p,
                })
                .collect();
            counts.insert(
                Count::from_index(i),
                CountSolution {
                    value: s.value.clamp(0.0, 1.0),
                    pitcher_policy,
                    batter_policy: BatterPolicy {
                        swing: y[0],
                        take: y[1],
                    },
                },
            );
        }
        EquilibriumSolution {
            counts,
            terminal_values: TerminalValues {
                on_base: 1.0,
                out: 0.0,
            },
        }
    }
}

/// Drop round-off mass below 1e-12 and renormalize.
fn clean(p: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = p.iter().map(|&x| if x < 1e-12 { 0.0 } else { x }).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}
