//! The at-bat as a stochastic game: counts, terminal states, joint actions,
//! count dynamics and the composition of control, swing-outcome and patience
//! models into a transition kernel.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::AimDistribution;
use crate::outcome::OutcomeDistribution;
use crate::patience::PatienceOverride;
use crate::zones::{PitchType, ZoneId, NUM_LOCATIONS, NUM_PITCH_TYPES, NUM_ZONES};

pub const NUM_COUNTS: usize = 12;
pub const NUM_STATES: usize = NUM_COUNTS + 2;
pub const ON_BASE: usize = NUM_COUNTS;
pub const OUT: usize = NUM_COUNTS + 1;

/// Mass threshold above which a two-strike self-loop is treated as certain.
pub const DEGENERATE_SELF_LOOP: f64 = 1.0 - 1e-9;
const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("control row for {pitch} aimed at {aim} is not a distribution (sum {sum})")]
    MalformedControl { pitch: PitchType, aim: ZoneId, sum: f64 },
    #[error("outcome distribution for {pitch} at {zone} in count {count} is not a simplex")]
    MalformedOutcome {
        pitch: PitchType,
        zone: ZoneId,
        count: Count,
    },
    #[error("missing model input: {0}")]
    MissingInput(String),
    #[error("degenerate game: the batter can foul forever at count {0}")]
    DegenerateGame(Count),
    #[error("invalid count {balls}-{strikes}")]
    InvalidCount { balls: i64, strikes: i64 },
    #[error("kernel row {0} violates count reachability")]
    Unreachable(String),
    #[error("malformed kernel document: {0}")]
    MalformedKernel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Count {
    balls: u8,
    strikes: u8,
}

impl Count {
    pub const START: Count = Count {
        balls: 0,
        strikes: 0,
    };

    pub fn new(balls: u8, strikes: u8) -> Result<Self, GameError> {
        if balls <= 3 && strikes <= 2 {
            Ok(Count { balls, strikes })
        } else {
            Err(GameError::InvalidCount {
                balls: balls as i64,
                strikes: strikes as i64,
            })
        }
    }

    pub fn balls(self) -> u8 {
        self.balls
    }

    pub fn strikes(self) -> u8 {
        self.strikes
    }

    pub fn index(self) -> usize {
        self.balls as usize * 3 + self.strikes as usize
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < NUM_COUNTS);
        Count {
            balls: (i / 3) as u8,
            strikes: (i % 3) as u8,
        }
    }

    /// All 12 counts in index order (0-0, 0-1, 0-2, 1-0, ...).
    pub fn all() -> impl Iterator<Item = Count> {
        (0..NUM_COUNTS).map(Count::from_index)
    }

    /// Counts ordered so every successor is visited before its predecessors.
    pub fn reverse_topological() -> Vec<Count> {
        let mut counts: Vec<Count> = Count::all().collect();
        counts.sort_by_key(|c| {
            std::cmp::Reverse((c.balls + c.strikes, c.strikes))
        });
        counts
    }

    pub fn label(self) -> String {
        format!("{}-{}", self.balls, self.strikes)
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.balls, self.strikes)
    }
}

impl FromStr for Count {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GameError::InvalidCount {
            balls: -1,
            strikes: -1,
        };
        let (b, k) = s.trim().split_once('-').ok_or_else(bad)?;
        let balls: u8 = b.parse().map_err(|_| bad())?;
        let strikes: u8 = k.parse().map_err(|_| bad())?;
        Count::new(balls, strikes)
    }
}

impl Serialize for Count {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Count {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtBatState {
    Count(Count),
    OnBase,
    Out,
}

impl AtBatState {
    pub fn index(self) -> usize {
        match self {
            AtBatState::Count(c) => c.index(),
            AtBatState::OnBase => ON_BASE,
            AtBatState::Out => OUT,
        }
    }

    pub fn from_index(i: usize) -> Self {
        match i {
            ON_BASE => AtBatState::OnBase,
            OUT => AtBatState::Out,
            _ => AtBatState::Count(Count::from_index(i)),
        }
    }

    pub fn is_terminal(self) -> bool {
        !matches!(self, AtBatState::Count(_))
    }

    pub fn label(self) -> String {
        match self {
            AtBatState::Count(c) => c.label(),
            AtBatState::OnBase => "on_base".into(),
            AtBatState::Out => "out".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PitcherAction {
    pub pitch: PitchType,
    pub aim: ZoneId,
}

impl PitcherAction {
    /// All 102 actions for the given pitch types, pitch-major then zone.
    pub fn all_for(pitches: &[PitchType]) -> Vec<PitcherAction> {
        let mut pitches = pitches.to_vec();
        pitches.sort();
        pitches.dedup();
        pitches
            .into_iter()
            .flat_map(|pitch| ZoneId::finite().map(move |aim| PitcherAction { pitch, aim }))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatterAction {
    Swing,
    Take,
}

impl BatterAction {
    pub const BOTH: [BatterAction; 2] = [BatterAction::Swing, BatterAction::Take];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwingOutcome {
    Strike,
    Foul,
    Hit,
    Out,
}

impl SwingOutcome {
    pub const ALL: [SwingOutcome; 4] = [
        SwingOutcome::Strike,
        SwingOutcome::Foul,
        SwingOutcome::Hit,
        SwingOutcome::Out,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Observed result of a single pitch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PitchLabel {
    CalledStrike,
    Ball,
    Whiff,
    Foul,
    Hit,
    OutInPlay,
}

impl PitchLabel {
    pub const ALL: [PitchLabel; 6] = [
        PitchLabel::CalledStrike,
        PitchLabel::Ball,
        PitchLabel::Whiff,
        PitchLabel::Foul,
        PitchLabel::Hit,
        PitchLabel::OutInPlay,
    ];

    pub fn is_swing(self) -> bool {
        matches!(
            self,
            PitchLabel::Whiff | PitchLabel::Foul | PitchLabel::Hit | PitchLabel::OutInPlay
        )
    }

    pub fn swing_outcome(self) -> Option<SwingOutcome> {
        match self {
            PitchLabel::Whiff => Some(SwingOutcome::Strike),
            PitchLabel::Foul => Some(SwingOutcome::Foul),
            PitchLabel::Hit => Some(SwingOutcome::Hit),
            PitchLabel::OutInPlay => Some(SwingOutcome::Out),
            _ => None,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            PitchLabel::CalledStrike => "called_strike",
            PitchLabel::Ball => "ball",
            PitchLabel::Whiff => "whiff",
            PitchLabel::Foul => "foul",
            PitchLabel::Hit => "hit",
            PitchLabel::OutInPlay => "out_in_play",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|l| l.code() == s)
    }
}

pub fn next_state_on_take(c: Count, in_strike_zone: bool) -> AtBatState {
    if in_strike_zone {
        if c.strikes == 2 {
            AtBatState::Out
        } else {
            AtBatState::Count(Count {
                balls: c.balls,
                strikes: c.strikes + 1,
            })
        }
    } else if c.balls == 3 {
        AtBatState::OnBase
    } else {
        AtBatState::Count(Count {
            balls: c.balls + 1,
            strikes: c.strikes,
        })
    }
}

pub fn next_state_on_swing_outcome(c: Count, outcome: SwingOutcome) -> AtBatState {
    match outcome {
        SwingOutcome::Strike => next_state_on_take(c, true),
        SwingOutcome::Foul => AtBatState::Count(Count {
            balls: c.balls,
            strikes: (c.strikes + 1).min(2),
        }),
        SwingOutcome::Hit => AtBatState::OnBase,
        SwingOutcome::Out => AtBatState::Out,
    }
}

/// Count transition for an observed pitch label.
pub fn next_state_on_label(c: Count, label: PitchLabel) -> AtBatState {
    match label {
        PitchLabel::CalledStrike => next_state_on_take(c, true),
        PitchLabel::Ball => next_state_on_take(c, false),
        other => next_state_on_swing_outcome(c, other.swing_outcome().expect("swing label")),
    }
}

/// Probability vector over the 14 at-bat states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution(pub [f64; NUM_STATES]);

impl Default for StateDistribution {
    fn default() -> Self {
        StateDistribution([0.0; NUM_STATES])
    }
}

impl StateDistribution {
    pub fn point(state: AtBatState) -> Self {
        let mut d = Self::default();
        d.0[state.index()] = 1.0;
        d
    }

    pub fn prob(&self, state: AtBatState) -> f64 {
        self.0[state.index()]
    }

    pub fn add(&mut self, state: AtBatState, mass: f64) {
        self.0[state.index()] += mass;
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.0.iter().all(|&p| p >= -tol) && (self.total() - 1.0).abs() <= tol
    }

    pub fn expectation(&self, values: &[f64; NUM_STATES]) -> f64 {
        self.0.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    /// States with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (AtBatState, f64)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| (AtBatState::from_index(i), p))
    }
}

/// Swing-outcome distributions for every (count, pitch type, finite zone).
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable {
    cells: Vec<Option<OutcomeDistribution>>,
}

impl Default for OutcomeTable {
    fn default() -> Self {
        Self::new()
    }
}

impl OutcomeTable {
    pub fn new() -> Self {
        OutcomeTable {
            cells: vec![None; NUM_COUNTS * NUM_PITCH_TYPES * NUM_ZONES],
        }
    }

    fn slot(count: Count, pitch: PitchType, zone: ZoneId) -> usize {
        (count.index() * NUM_PITCH_TYPES + pitch.index()) * NUM_ZONES + zone.index()
    }

    /// Fill every cell for the given pitch types from a function.
    pub fn from_fn(
        pitches: &[PitchType],
        mut f: impl FnMut(PitchType, ZoneId, Count) -> OutcomeDistribution,
    ) -> Self {
        let mut t = Self::new();
        for count in Count::all() {
            for &pitch in pitches {
                for zone in ZoneId::finite() {
                    t.set(count, pitch, zone, f(pitch, zone, count));
                }
            }
        }
        t
    }

    pub fn set(&mut self, count: Count, pitch: PitchType, zone: ZoneId, d: OutcomeDistribution) {
        assert!(!zone.is_far(), "FAR has no swing outcomes");
        self.cells[Self::slot(count, pitch, zone)] = Some(d);
    }

    pub fn get(&self, count: Count, pitch: PitchType, zone: ZoneId) -> Option<&OutcomeDistribution> {
        if zone.is_far() {
            return None;
        }
        self.cells[Self::slot(count, pitch, zone)].as_ref()
    }
}

/// Everything needed to build the transition kernel of one matchup.
#[derive(Debug, Clone)]
pub struct MatchupModels {
    pub pitch_types: Vec<PitchType>,
    pub aim: AimDistribution,
    pub outcomes: OutcomeTable,
    /// One override set per count, in count index order.
    pub overrides: Vec<PatienceOverride>,
}

impl MatchupModels {
    pub fn actions(&self) -> Vec<PitcherAction> {
        PitcherAction::all_for(&self.pitch_types)
    }

    pub fn override_for(&self, count: Count) -> &PatienceOverride {
        &self.overrides[count.index()]
    }
}

/// Transition distribution of one (count, pitcher action, batter action).
///
/// Mass is summed over the 18 landing locations. A take, a FAR landing or a
/// forced take in a ball zone resolves as a called pitch; otherwise the swing
/// outcome distribution at the landing zone drives the next state.
pub fn build_row(
    count: Count,
    action: PitcherAction,
    batter: BatterAction,
    control: &[f64; NUM_LOCATIONS],
    outcome: &dyn Fn(PitchType, ZoneId, Count) -> Option<OutcomeDistribution>,
    patience: &PatienceOverride,
) -> Result<StateDistribution, GameError> {
    let sum: f64 = control.iter().sum();
    if control.iter().any(|&p| !(p >= -1e-12) || !p.is_finite()) || (sum - 1.0).abs() > 1e-6 {
        return Err(GameError::MalformedControl {
            pitch: action.pitch,
            aim: action.aim,
            sum,
        });
    }
    let mut row = StateDistribution::default();
    for loc in ZoneId::locations() {
        let w = control[loc.index()].max(0.0);
        if w == 0.0 {
            continue;
        }
        let called = batter == BatterAction::Take
            || loc.is_far()
            || (loc.is_ball() && patience.forced_take(action.pitch, loc));
        if called {
            row.add(next_state_on_take(count, loc.is_strike()), w);
            continue;
        }
        let d = outcome(action.pitch, loc, count).ok_or_else(|| {
            GameError::MissingInput(format!(
                "no outcome distribution for {} at {} in {}",
                action.pitch, loc, count
            ))
        })?;
        if !d.is_valid(1e-9) {
            return Err(GameError::MalformedOutcome {
                pitch: action.pitch,
                zone: loc,
                count,
            });
        }
        for o in SwingOutcome::ALL {
            row.add(next_state_on_swing_outcome(count, o), w * d.prob(o));
        }
    }
    Ok(row)
}

/// Rows for every (count, pitcher action, batter action). The action list is
/// shared by all counts; row order is count-major, then action, then batter
/// action (swing before take).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    actions: Vec<PitcherAction>,
    rows: Vec<StateDistribution>,
}

impl TransitionKernel {
    /// Assemble a kernel from rows produced by `f(count, action_index, batter)`.
    pub fn from_fn(
        actions: Vec<PitcherAction>,
        mut f: impl FnMut(Count, usize, BatterAction) -> Result<StateDistribution, GameError>,
    ) -> Result<Self, GameError> {
        let mut rows = Vec::with_capacity(NUM_COUNTS * actions.len() * 2);
        for count in Count::all() {
            for a in 0..actions.len() {
                for b in BatterAction::BOTH {
                    rows.push(f(count, a, b)?);
                }
            }
        }
        let kernel = TransitionKernel { actions, rows };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn actions(&self) -> &[PitcherAction] {
        &self.actions
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn action_index(&self, action: PitcherAction) -> Option<usize> {
        self.actions.iter().position(|&a| a == action)
    }

    pub fn row(&self, count: Count, action: usize, batter: BatterAction) -> &StateDistribution {
        &self.rows[(count.index() * self.actions.len() + action) * 2 + batter.index()]
    }

    pub fn rows(&self) -> impl Iterator<Item = (Count, usize, BatterAction, &StateDistribution)> {
        let n = self.actions.len();
        self.rows.iter().enumerate().map(move |(i, r)| {
            let b = if i % 2 == 0 {
                BatterAction::Swing
            } else {
                BatterAction::Take
            };
            (Count::from_index(i / 2 / n), (i / 2) % n, b, r)
        })
    }

    /// Normalization and one-step reachability of every row.
    pub fn validate(&self) -> Result<(), GameError> {
        if self.actions.is_empty() {
            return Err(GameError::MissingInput("kernel has no pitcher actions".into()));
        }
        for (count, a, b, row) in self.rows() {
            let label = || format!("{count}/{}/{:?}", a, b);
            if !row.is_normalized(ROW_TOLERANCE) {
                return Err(GameError::Unreachable(format!("{} not normalized", label())));
            }
            for (state, _) in row.support() {
                if !is_one_step_reachable(count, state) {
                    return Err(GameError::Unreachable(format!(
                        "{} reaches {}",
                        label(),
                        state.label()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fails when some two-strike count lets the batter loop on fouls with
    /// certainty against every pitcher action.
    pub fn check_degenerate(&self) -> Result<(), GameError> {
        for count in Count::all().filter(|c| c.strikes == 2) {
            let me = AtBatState::Count(count);
            for b in BatterAction::BOTH {
                let all_loop = (0..self.actions.len())
                    .all(|a| self.row(count, a, b).prob(me) >= DEGENERATE_SELF_LOOP);
                if all_loop {
                    return Err(GameError::DegenerateGame(count));
                }
            }
        }
        Ok(())
    }

    /// Keyed document form: `"<count>|<pitch>|<aim>|<swing|take>"` → 14 probabilities
    /// ordered as the 12 counts by index, then on-base, then out.
    pub fn to_document(&self) -> KernelDocument {
        let mut rows = BTreeMap::new();
        for (count, a, b, row) in self.rows() {
            let act = self.actions[a];
            let key = format!(
                "{}|{}|{}|{}",
                count,
                act.pitch,
                act.aim,
                if b == BatterAction::Swing { "swing" } else { "take" }
            );
            rows.insert(key, row.0.to_vec());
        }
        KernelDocument {
            states: (0..NUM_STATES).map(|i| AtBatState::from_index(i).label()).collect(),
            actions: self.actions.clone(),
            rows,
        }
    }

    pub fn from_document(doc: &KernelDocument) -> Result<Self, GameError> {
        let actions = doc.actions.clone();
        Self::from_fn(actions.clone(), |count, a, b| {
            let act = actions[a];
            let key = format!(
                "{}|{}|{}|{}",
                count,
                act.pitch,
                act.aim,
                if b == BatterAction::Swing { "swing" } else { "take" }
            );
            let v = doc
                .rows
                .get(&key)
                .ok_or_else(|| GameError::MalformedKernel(format!("missing row {key}")))?;
            let arr: [f64; NUM_STATES] = v
                .as_slice()
                .try_into()
                .map_err(|_| GameError::MalformedKernel(format!("row {key} has wrong length")))?;
            Ok(StateDistribution(arr))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDocument {
    pub states: Vec<String>,
    pub actions: Vec<PitcherAction>,
    pub rows: BTreeMap<String, Vec<f64>>,
}

/// Whether `to` can follow `from` in a single pitch.
pub fn is_one_step_reachable(from: Count, to: AtBatState) -> bool {
    match to {
        AtBatState::OnBase | AtBatState::Out => true,
        AtBatState::Count(c) => {
            (c.balls == from.balls + 1 && c.strikes == from.strikes)
                || (c.balls == from.balls && c.strikes == from.strikes + 1)
                || (c == from && from.strikes == 2)
        }
    }
}

pub fn build_kernel(models: &MatchupModels) -> Result<TransitionKernel, GameError> {
    if models.pitch_types.is_empty() {
        return Err(GameError::MissingInput("no pitch types".into()));
    }
    if models.overrides.len() != NUM_COUNTS {
        return Err(GameError::MissingInput(format!(
            "expected {NUM_COUNTS} patience overrides, got {}",
            models.overrides.len()
        )));
    }
    let actions = models.actions();
    let outcome = |p: PitchType, z: ZoneId, c: Count| models.outcomes.get(c, p, z).copied();
    let kernel = TransitionKernel::from_fn(actions.clone(), |count, a, b| {
        let act = actions[a];
        let control = models.aim.get(act.pitch, act.aim).ok_or_else(|| {
            GameError::MissingInput(format!("no control row for {} at {}", act.pitch, act.aim))
        })?;
        build_row(count, act, b, control, &outcome, models.override_for(count))
    })?;
    kernel.check_degenerate()?;
    Ok(kernel)
}

/// One entry of the exported count-machine table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub count: Count,
    pub event: PitchLabel,
    pub next: String,
}

/// Every (count, observed event) → next state, for clients that replay at-bats.
pub fn transition_table() -> Vec<TransitionEntry> {
    Count::all()
        .flat_map(|count| {
            PitchLabel::ALL.into_iter().map(move |event| TransitionEntry {
                count,
                event,
                next: next_state_on_label(count, event).label(),
            })
        })
        .collect()
}
