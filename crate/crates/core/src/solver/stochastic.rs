use serde::{Deserialize, Serialize};

use super::{solve_matrix_game, EquilibriumSolution, MatrixGame, MatrixSolution, SolverConfig, SolverError};
use crate::game::{AtBatState, BatterAction, Count, TransitionKernel, NUM_COUNTS, NUM_STATES, ON_BASE};

/// Self-loop mass treated as certain non-termination.
const STUCK: f64 = 1.0 - 1e-12;
const BISECTION_WIDTH: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct Solved {
    pub solution: EquilibriumSolution,
    /// Value-iteration sweeps (1 for the topological solver).
    pub iterations: usize,
    pub matrix_solves: usize,
}

/// Expected continuation value of every (batter action, pitcher action) pair
/// at count `c` under state values `v`.
pub fn state_matrix(c: Count, kernel: &TransitionKernel, v: &[f64; NUM_STATES]) -> MatrixGame {
    let payoff = BatterAction::BOTH
        .iter()
        .map(|&b| {
            (0..kernel.num_actions())
                .map(|a| kernel.row(c, a, b).expectation(v))
                .collect()
        })
        .collect();
    MatrixGame { payoff }
}

fn initial_values() -> [f64; NUM_STATES] {
    let mut v = [0.0; NUM_STATES];
    v[ON_BASE] = 1.0;
    v
}

fn prepare(kernel: &TransitionKernel, config: &SolverConfig) -> Result<(), SolverError> {
    config.validate(kernel.num_actions())?;
    kernel.check_degenerate()?;
    Ok(())
}

/// Jacobi value iteration from zero until successive sweeps differ by at most
/// the tolerance.
pub fn value_iterate(
    kernel: &TransitionKernel,
    config: &SolverConfig,
) -> Result<Solved, SolverError> {
    prepare(kernel, config)?;
    let mut v = initial_values();
    let mut solves = 0;
    let mut residual = f64::INFINITY;
    for sweep in 1..=config.max_iterations {
        let mut next = v;
        let mut sols = Vec::with_capacity(NUM_COUNTS);
        for c in Count::all() {
            let s = solve_matrix_game(&state_matrix(c, kernel, &v), config, &c.label())?;
            solves += 1;
            next[c.index()] = s.value;
            sols.push(s);
        }
        residual = Count::all()
            .map(|c| (next[c.index()] - v[c.index()]).abs())
            .fold(0.0, f64::max);
        v = next;
        if residual <= config.tolerance {
            return Ok(Solved {
                solution: EquilibriumSolution::from_parts(kernel.actions(), sols),
                iterations: sweep,
                matrix_solves: solves,
            });
        }
    }
    Err(SolverError::NoConvergence {
        iterations: config.max_iterations,
        residual,
    })
}

fn has_self_loop(kernel: &TransitionKernel, c: Count) -> bool {
    let me = AtBatState::Count(c);
    (0..kernel.num_actions())
        .any(|a| BatterAction::BOTH.iter().any(|&b| kernel.row(c, a, b).prob(me) > 0.0))
}

/// One pass over counts in reverse topological order. Two-strike counts with
/// foul self-loops solve the scalar fixed point `x = value(M(x))` by
/// bisection; the map is nondecreasing with slope below one.
pub fn solve_acyclic(
    kernel: &TransitionKernel,
    config: &SolverConfig,
) -> Result<Solved, SolverError> {
    prepare(kernel, config)?;
    let mut v = initial_values();
    let mut solves = 0;
    let mut sols: Vec<Option<MatrixSolution>> = vec![None; NUM_COUNTS];
    for c in Count::reverse_topological() {
        let i = c.index();
        let label = c.label();
        if has_self_loop(kernel, c) {
            let mut f = |x: f64, v: &mut [f64; NUM_STATES]| {
                v[i] = x;
                solves += 1;
                solve_matrix_game(&state_matrix(c, kernel, v), config, &label)
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            if f(lo, &mut v)?.value < lo - config.tolerance
                || f(hi, &mut v)?.value > hi + config.tolerance
            {
                return Err(SolverError::NumericalError(format!(
                    "fixed point at {label} not bracketed by [0, 1]"
                )));
            }
            while hi - lo > BISECTION_WIDTH {
                let mid = 0.5 * (lo + hi);
                if f(mid, &mut v)?.value <= mid {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let s = f(0.5 * (lo + hi), &mut v)?;
            v[i] = s.value;
            sols[i] = Some(s);
        } else {
            let s = solve_matrix_game(&state_matrix(c, kernel, &v), config, &label)?;
            solves += 1;
            v[i] = s.value;
            sols[i] = Some(s);
        }
    }
    Ok(Solved {
        solution: EquilibriumSolution::from_parts(
            kernel.actions(),
            sols.into_iter().map(|s| s.expect("every count solved")).collect(),
        ),
        iterations: 1,
        matrix_solves: solves,
    })
}

/// Value of one count when the action is fixed: `c` is the expected value of
/// leaving, `p` the probability of staying.
fn loop_value(c: f64, p: f64) -> f64 {
    if p >= STUCK {
        // the at-bat never ends, so the batter never reaches base
        0.0
    } else {
        c / (1.0 - p)
    }
}

/// Continuation `(c, p)` of a row mixture at count `count`.
fn split(
    kernel: &TransitionKernel,
    count: Count,
    weights: impl Iterator<Item = (usize, BatterAction, f64)>,
    v: &[f64; NUM_STATES],
) -> (f64, f64) {
    let me = AtBatState::Count(count);
    let (mut c, mut p) = (0.0, 0.0);
    for (a, b, w) in weights {
        if w == 0.0 {
            continue;
        }
        let row = kernel.row(count, a, b);
        let stay = row.prob(me);
        p += w * stay;
        c += w * (row.expectation(v) - stay * v[count.index()]);
    }
    (c, p)
}

/// Best-response values for the batter when the pitcher plays the dense mix
/// `pitcher[count]` over the kernel's actions.
pub fn batter_best_response(kernel: &TransitionKernel, pitcher: &[Vec<f64>]) -> [f64; NUM_STATES] {
    let mut v = initial_values();
    for count in Count::reverse_topological() {
        let mix = &pitcher[count.index()];
        v[count.index()] = BatterAction::BOTH
            .iter()
            .map(|&b| {
                let w = mix.iter().enumerate().map(|(a, &x)| (a, b, x));
                let (c, p) = split(kernel, count, w, &v);
                loop_value(c, p)
            })
            .fold(f64::NEG_INFINITY, f64::max);
    }
    v
}

/// Best-response values for the pitcher against batter mixes `[swing, take]`.
pub fn pitcher_best_response(kernel: &TransitionKernel, batter: &[[f64; 2]]) -> [f64; NUM_STATES] {
    let mut v = initial_values();
    for count in Count::reverse_topological() {
        let mix = batter[count.index()];
        v[count.index()] = (0..kernel.num_actions())
            .map(|a| {
                let w = BatterAction::BOTH
                    .iter()
                    .map(|&b| (a, b, mix[b.index()]));
                let (c, p) = split(kernel, count, w, &v);
                loop_value(c, p)
            })
            .fold(f64::INFINITY, f64::min);
    }
    v
}

/// Values when both sides follow fixed stationary mixes.
pub fn policy_value(
    kernel: &TransitionKernel,
    pitcher: &[Vec<f64>],
    batter: &[[f64; 2]],
) -> [f64; NUM_STATES] {
    let mut v = initial_values();
    for count in Count::reverse_topological() {
        let px = &pitcher[count.index()];
        let by = batter[count.index()];
        let w = px.iter().enumerate().flat_map(|(a, &x)| {
            BatterAction::BOTH
                .iter()
                .map(move |&b| (a, b, x * by[b.index()]))
        });
        let (c, p) = split(kernel, count, w, &v);
        v[count.index()] = loop_value(c, p);
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exploitability {
    /// Batter best-response value minus the solution's value at 0-0.
    pub batter_gain: f64,
    /// Solution's value at 0-0 minus the pitcher best-response value.
    pub pitcher_gain: f64,
}

impl Exploitability {
    pub fn max(&self) -> f64 {
        self.batter_gain.max(self.pitcher_gain)
    }
}

pub fn exploitability(kernel: &TransitionKernel, solution: &EquilibriumSolution) -> Exploitability {
    let pitcher: Vec<Vec<f64>> = Count::all()
        .map(|c| solution.pitcher_mix(c, kernel.actions()))
        .collect();
    let batter: Vec<[f64; 2]> = Count::all().map(|c| solution.batter_mix(c)).collect();
    let v0 = solution.value(Count::START);
    Exploitability {
        batter_gain: batter_best_response(kernel, &pitcher)[Count::START.index()] - v0,
        pitcher_gain: v0 - pitcher_best_response(kernel, &batter)[Count::START.index()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{PitcherAction, StateDistribution, OUT};
    use crate::zones::{PitchType, ZoneId};

    fn actions(n: usize) -> Vec<PitcherAction> {
        (0..n)
            .map(|i| PitcherAction {
                pitch: PitchType::FF,
                aim: ZoneId::from_index(i),
            })
            .collect()
    }

    fn dist(entries: &[(AtBatState, f64)]) -> StateDistribution {
        let mut d = StateDistribution::default();
        for &(s, p) in entries {
            d.add(s, p);
        }
        d
    }

    /// Every count: self-loop at two strikes, otherwise straight to terminals.
    fn half_loop_kernel() -> TransitionKernel {
        TransitionKernel::from_fn(actions(2), |c, _, _| {
            Ok(if c.strikes() == 2 {
                dist(&[
                    (AtBatState::Count(c), 0.5),
                    (AtBatState::OnBase, 0.25),
                    (AtBatState::Out, 0.25),
                ])
            } else {
                dist(&[(AtBatState::OnBase, 0.3), (AtBatState::Out, 0.7)])
            })
        })
        .unwrap()
    }

    #[test]
    fn self_loop_fixed_point() {
        let k = half_loop_kernel();
        let cfg = SolverConfig::default();
        let a = value_iterate(&k, &cfg).unwrap().solution;
        let b = solve_acyclic(&k, &cfg).unwrap().solution;
        for c in Count::all().filter(|c| c.strikes() == 2) {
            assert!((a.value(c) - 0.5).abs() <= 1e-9, "{}", a.value(c));
            assert!((b.value(c) - 0.5).abs() <= 1e-9, "{}", b.value(c));
        }
    }

    #[test]
    fn immediate_on_base() {
        let k = TransitionKernel::from_fn(actions(1), |c, _, _| {
            Ok(if c == Count::START {
                StateDistribution::point(AtBatState::OnBase)
            } else {
                StateDistribution::point(AtBatState::Out)
            })
        })
        .unwrap();
        let s = value_iterate(&k, &SolverConfig::default()).unwrap();
        assert_eq!(s.solution.value(Count::START), 1.0);
        assert!(s.iterations <= 2);
    }

    #[test]
    fn pure_dag_needs_twelve_solves() {
        let k = TransitionKernel::from_fn(actions(3), |c, a, b| {
            let p = 0.1 + 0.1 * a as f64 + 0.05 * b.index() as f64 + 0.01 * c.index() as f64;
            Ok(dist(&[(AtBatState::OnBase, p), (AtBatState::Out, 1.0 - p)]))
        })
        .unwrap();
        let cfg = SolverConfig::default();
        let a = solve_acyclic(&k, &cfg).unwrap();
        assert_eq!(a.matrix_solves, 12);
        let b = value_iterate(&k, &cfg).unwrap();
        for c in Count::all() {
            assert!((a.solution.value(c) - b.solution.value(c)).abs() < 1e-12);
        }
    }

    #[test]
    fn state_matrix_entries() {
        let k = TransitionKernel::from_fn(actions(1), |c, _, b| {
            Ok(match (c == Count::START, b) {
                (true, BatterAction::Swing) => StateDistribution::point(AtBatState::OnBase),
                (true, BatterAction::Take) => dist(&[
                    (AtBatState::Count(Count::new(1, 0).unwrap()), 0.5),
                    (AtBatState::Out, 0.5),
                ]),
                _ => StateDistribution::point(AtBatState::Out),
            })
        })
        .unwrap();
        let mut v = initial_values();
        v[Count::new(1, 0).unwrap().index()] = 0.4;
        let m = state_matrix(Count::START, &k, &v);
        assert_eq!(m.payoff[0][0], 1.0);
        assert!((m.payoff[1][0] - 0.2).abs() < 1e-15);
        assert_eq!(v[OUT], 0.0);
    }

    #[test]
    fn hand_built_best_responses() {
        // single live count 0-0; everything else ends immediately in an out
        // swing: action 0 → base 0.6, action 1 → base 0.1
        // take:  action 0 → base 0.2, action 1 → base 0.5
        let k = TransitionKernel::from_fn(actions(2), |c, a, b| {
            if c != Count::START {
                return Ok(StateDistribution::point(AtBatState::Out));
            }
            let p = match (a, b) {
                (0, BatterAction::Swing) => 0.6,
                (1, BatterAction::Swing) => 0.1,
                (0, BatterAction::Take) => 0.2,
                _ => 0.5,
            };
            Ok(dist(&[(AtBatState::OnBase, p), (AtBatState::Out, 1.0 - p)]))
        })
        .unwrap();
        let mut pitcher = vec![vec![1.0, 0.0]; 12];
        pitcher[0] = vec![0.25, 0.75];
        // swing: 0.25·0.6 + 0.75·0.1 = 0.225; take: 0.25·0.2 + 0.75·0.5 = 0.425
        let br = batter_best_response(&k, &pitcher);
        assert!((br[0] - 0.425).abs() < 1e-15);
        let mut batter = vec![[1.0, 0.0]; 12];
        batter[0] = [0.5, 0.5];
        // action 0: 0.4, action 1: 0.3
        let pr = pitcher_best_response(&k, &batter);
        assert!((pr[0] - 0.3).abs() < 1e-15);

        // equilibrium: y·0.6 + (1−y)·0.2 = y·0.1 + (1−y)·0.5 → y = 3/8, v = 0.35
        let s = solve_acyclic(&k, &SolverConfig::default()).unwrap().solution;
        assert!((s.value(Count::START) - 0.35).abs() < 1e-12);
        let e = exploitability(&k, &s);
        assert!(e.batter_gain.abs() < 1e-12 && e.pitcher_gain.abs() < 1e-12);
        let vv = policy_value(&k, &pitcher, &batter);
        assert!((vv[0] - (0.5 * 0.225 + 0.5 * 0.425)).abs() < 1e-15);
    }
}
