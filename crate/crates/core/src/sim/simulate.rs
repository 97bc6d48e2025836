//! Seeded Monte Carlo at-bats.
//!
//! At-bats run in blocks of `BLOCK` on independent ChaCha8 streams: block `k`
//! uses the master seed with stream number `k`, so results do not depend on
//! the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::game::{
    next_state_on_swing_outcome, next_state_on_take, AtBatState, BatterAction, Count,
    MatchupModels, PitcherAction, TransitionKernel, NUM_COUNTS,
};
use crate::outcome::OutcomeDistribution;
use crate::solver::EquilibriumSolution;
use crate::zones::{PitchType, ZoneId, NUM_LOCATIONS, NUM_PITCH_TYPES, NUM_ZONES};

use super::SimError;

pub const PITCH_CAP: usize = 500;
pub const BLOCK: usize = 10_000;

/// Swing probability per (count, pitch type, landing zone), for batters who
/// react to where the pitch arrives.
#[derive(Debug, Clone, PartialEq)]
pub struct SwingTable {
    probs: Vec<f64>,
}

impl SwingTable {
    pub fn from_fn(mut f: impl FnMut(Count, PitchType, ZoneId) -> f64) -> Self {
        let mut probs = vec![0.0; NUM_COUNTS * NUM_PITCH_TYPES * NUM_ZONES];
        for c in Count::all() {
            for p in PitchType::ALL {
                for z in ZoneId::finite() {
                    probs[Self::slot(c, p, z)] = f(c, p, z).clamp(0.0, 1.0);
                }
            }
        }
        SwingTable { probs }
    }

    fn slot(c: Count, p: PitchType, z: ZoneId) -> usize {
        (c.index() * NUM_PITCH_TYPES + p.index()) * NUM_ZONES + z.index()
    }

    /// FAR is never swung at.
    pub fn get(&self, c: Count, p: PitchType, z: ZoneId) -> f64 {
        if z.is_far() {
            0.0
        } else {
            self.probs[Self::slot(c, p, z)]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BatterStrategy {
    /// (swing, take) per count, chosen before the pitch arrives.
    PerCount(Vec<[f64; 2]>),
    Reactive(SwingTable),
}

/// Both players' strategies over a fixed pitcher action list.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub actions: Vec<PitcherAction>,
    /// One mix over `actions` per count.
    pub pitcher: Vec<Vec<f64>>,
    pub batter: BatterStrategy,
}

impl Profile {
    pub fn from_solution(solution: &EquilibriumSolution, actions: &[PitcherAction]) -> Self {
        Profile {
            actions: actions.to_vec(),
            pitcher: Count::all().map(|c| solution.pitcher_mix(c, actions)).collect(),
            batter: BatterStrategy::PerCount(Count::all().map(|c| solution.batter_mix(c)).collect()),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.pitcher.len() != NUM_COUNTS {
            return Err(SimError::IncompletePolicy("pitcher mix per count".into()));
        }
        for (i, mix) in self.pitcher.iter().enumerate() {
            let s: f64 = mix.iter().sum();
            if mix.len() != self.actions.len()
                || mix.iter().any(|p| !(*p >= 0.0))
                || (s - 1.0).abs() > 1e-6
            {
                return Err(SimError::IncompletePolicy(format!(
                    "pitcher mix at {} is not a distribution over {} actions",
                    Count::from_index(i),
                    self.actions.len()
                )));
            }
        }
        if let BatterStrategy::PerCount(b) = &self.batter {
            if b.len() != NUM_COUNTS
                || b.iter()
                    .any(|y| y.iter().any(|p| !(*p >= 0.0)) || (y[0] + y[1] - 1.0).abs() > 1e-6)
            {
                return Err(SimError::IncompletePolicy("batter mix per count".into()));
            }
        }
        Ok(())
    }
}

/// What happens after both players commit.
#[derive(Debug, Clone, Copy)]
pub enum Dynamics<'a> {
    Kernel(&'a TransitionKernel),
    /// Sample landing zone, override and swing outcome explicitly.
    World(&'a MatchupModels),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub start: Count,
    pub n: usize,
    pub on_base: usize,
    pub obp: f64,
    pub standard_error: f64,
    pub mean_pitches: f64,
    /// At-bats aborted at the pitch cap; excluded from the estimate.
    pub cap_exceeded: usize,
    pub flagged: bool,
}

/// Cumulative table for inverse-CDF draws over a sparse support.
#[derive(Debug, Clone)]
struct Sampler {
    items: Vec<(usize, f64)>,
}

impl Sampler {
    fn new(p: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut items: Vec<(usize, f64)> = Vec::new();
        for (i, &w) in p.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                items.push((i, acc));
            }
        }
        if let Some(last) = items.last_mut() {
            last.1 = f64::INFINITY;
        }
        Sampler { items }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        draw_cumulative(&self.items, rng.random())
    }
}

fn draw_cumulative(items: &[(usize, f64)], u: f64) -> usize {
    for &(i, c) in items {
        if u < c {
            return i;
        }
    }
    items.last().map_or(0, |x| x.0)
}

/// Draw from a short dense distribution without building a table.
fn draw_dense(p: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in p.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

struct Prepared<'a> {
    dynamics: Dynamics<'a>,
    profile: &'a Profile,
    pitcher: Vec<Sampler>,
    /// Kernel mode: one sampler per (count, action, batter action).
    rows: Vec<Sampler>,
    /// World mode: landing samplers per action.
    landing: Vec<Sampler>,
}

fn outcome_of(models: &MatchupModels, c: Count, a: PitcherAction, z: ZoneId) -> Result<OutcomeDistribution, SimError> {
    models
        .outcomes
        .get(c, a.pitch, z)
        .copied()
        .ok_or_else(|| SimError::IncompletePolicy(format!("no outcome model for {} at {} in {}", a.pitch, z, c)))
}

impl<'a> Prepared<'a> {
    fn new(dynamics: Dynamics<'a>, profile: &'a Profile) -> Result<Self, SimError> {
        profile.validate()?;
        let pitcher = profile.pitcher.iter().map(|m| Sampler::new(m)).collect();
        let mut rows = Vec::new();
        let mut landing = Vec::new();
        match dynamics {
            Dynamics::Kernel(k) => {
                if k.actions() != profile.actions.as_slice() {
                    return Err(SimError::IncompletePolicy(
                        "profile actions differ from the kernel's".into(),
                    ));
                }
                if matches!(profile.batter, BatterStrategy::Reactive(_)) {
                    return Err(SimError::IncompletePolicy(
                        "a reactive batter needs world dynamics".into(),
                    ));
                }
                for c in Count::all() {
                    for a in 0..k.num_actions() {
                        for b in BatterAction::BOTH {
                            rows.push(Sampler::new(&k.row(c, a, b).0));
                        }
                    }
                }
            }
            Dynamics::World(m) => {
                for a in &profile.actions {
                    let row: &[f64; NUM_LOCATIONS] = m.aim.get(a.pitch, a.aim).ok_or_else(|| {
                        SimError::IncompletePolicy(format!("no control row for {} at {}", a.pitch, a.aim))
                    })?;
                    landing.push(Sampler::new(row));
                }
                if m.overrides.len() != NUM_COUNTS {
                    return Err(SimError::IncompletePolicy("patience overrides per count".into()));
                }
            }
        }
        Ok(Prepared {
            dynamics,
            profile,
            pitcher,
            rows,
            landing,
        })
    }

    fn batter_swings(&self, c: Count, a: PitcherAction, z: ZoneId, rng: &mut ChaCha8Rng) -> bool {
        match &self.profile.batter {
            BatterStrategy::PerCount(y) => rng.random::<f64>() < y[c.index()][0],
            BatterStrategy::Reactive(t) => rng.random::<f64>() < t.get(c, a.pitch, z),
        }
    }

    fn step(&self, c: Count, rng: &mut ChaCha8Rng) -> Result<AtBatState, SimError> {
        let ai = self.pitcher[c.index()].draw(rng);
        let action = self.profile.actions[ai];
        match self.dynamics {
            Dynamics::Kernel(k) => {
                let BatterStrategy::PerCount(y) = &self.profile.batter else {
                    unreachable!("checked in new")
                };
                let b = if rng.random::<f64>() < y[c.index()][0] { 0 } else { 1 };
                let idx = (c.index() * k.num_actions() + ai) * 2 + b;
                Ok(AtBatState::from_index(self.rows[idx].draw(rng)))
            }
            Dynamics::World(m) => {
                let loc = ZoneId::from_index(self.landing[ai].draw(rng));
                let swings = self.batter_swings(c, action, loc, rng);
                let forced = loc.is_far()
                    || (loc.is_ball() && m.override_for(c).forced_take(action.pitch, loc));
                if !swings || forced {
                    return Ok(next_state_on_take(c, loc.is_strike()));
                }
                let d = outcome_of(m, c, action, loc)?;
                let o = draw_dense(&d.to_array(), rng);
                Ok(next_state_on_swing_outcome(c, crate::game::SwingOutcome::ALL[o]))
            }
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    completed: usize,
    on_base: usize,
    pitches: usize,
    capped: usize,
}

fn run_block(
    prep: &Prepared,
    start: Count,
    n: usize,
    seed: u64,
    block: u64,
) -> Result<Tally, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    let mut t = Tally::default();
    'atbat: for _ in 0..n {
        let mut c = start;
        for pitch in 1..=PITCH_CAP {
            match prep.step(c, &mut rng)? {
                AtBatState::Count(next) => c = next,
                end => {
                    t.completed += 1;
                    t.pitches += pitch;
                    if end == AtBatState::OnBase {
                        t.on_base += 1;
                    }
                    continue 'atbat;
                }
            }
        }
        t.capped += 1;
    }
    Ok(t)
}

pub fn simulate(
    dynamics: Dynamics,
    profile: &Profile,
    start: Count,
    n: usize,
    seed: u64,
) -> Result<SimulationResult, SimError> {
    if n == 0 {
        return Err(SimError::InvalidArgument("n must be at least 1".into()));
    }
    let prep = Prepared::new(dynamics, profile)?;
    let blocks = n.div_ceil(BLOCK);
    let tallies: Vec<Tally> = (0..blocks)
        .into_par_iter()
        .map(|k| {
            let size = BLOCK.min(n - k * BLOCK);
            run_block(&prep, start, size, seed, k as u64)
        })
        .collect::<Result<_, _>>()?;
    let mut t = Tally::default();
    for b in tallies {
        t.completed += b.completed;
        t.on_base += b.on_base;
        t.pitches += b.pitches;
        t.capped += b.capped;
    }
    let m = t.completed.max(1) as f64;
    let obp = if t.completed == 0 { 0.0 } else { t.on_base as f64 / m };
    Ok(SimulationResult {
        start,
        n,
        on_base: t.on_base,
        obp,
        standard_error: (obp * (1.0 - obp) / m).sqrt(),
        mean_pitches: t.pitches as f64 / m,
        cap_exceeded: t.capped,
        flagged: t.capped > 0,
    })
}

/// One result per starting count, each on its own derived seed.
pub fn simulate_all_counts(
    dynamics: Dynamics,
    profile: &Profile,
    n: usize,
    seed: u64,
) -> Result<Vec<SimulationResult>, SimError> {
    Count::all()
        .map(|c| simulate(dynamics, profile, c, n, super::derive_seed(seed, &format!("start {c}"))))
        .collect()
}
