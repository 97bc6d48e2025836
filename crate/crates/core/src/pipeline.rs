//! Store-backed workflow: ingest → train → solve → simulate / compare.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{AppConfig, OutcomeKind, SolveAlgorithm};
use crate::control::{
    prune_refit, train_control_regressor, AimDistribution, ControlError, ControlRegressor,
    ControlSource, FittedControl, GaussianControl, MIN_FIT_POINTS,
};
use crate::features::{
    build_batter_tensor, build_pitcher_tensor, BatterTensor, HistoryRecord, PitcherTensor,
    PlayerHistory,
};
use crate::game::{build_kernel, Count, MatchupModels, OutcomeTable};
use crate::ingest::{ingest, player_ids, split_players, IngestReport, PitchRecord};
use crate::outcome::{
    evaluate, train_empirical, train_softmax, Evaluation, OutcomeModel, OutcomePredictor,
    SwingDataset, SwingSample,
};
use crate::patience::{train_patience, PatienceClassifier, PatienceDataset, PatienceSample};
use crate::sim::{
    compare_obp, estimate_behavioral, simulate_all_counts, ComparisonTable, Dynamics, Profile,
    Roster, SimulationResult, Tier,
};
use crate::solver::{solve_acyclic, value_iterate, EquilibriumSolution, SolverConfig, SolverError};
use crate::store::{encode_id, fingerprint, Store, StoreError};
use crate::zones::{build_pitch_tensor, PitchType, ZoneId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AppError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Internal(String),
}

impl AppError {
    pub fn code(&self) -> &'static str {
        match self {
            AppError::Validation(_) => "validation_error",
            AppError::NotFound(_) => "not_found",
            AppError::Internal(_) => "internal_error",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation(_) | AppError::NotFound(_) => 1,
            AppError::Internal(_) => 2,
        }
    }
}

impl From<StoreError> for AppError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => AppError::NotFound(e.to_string()),
            StoreError::IncompatibleStore { .. } | StoreError::InvalidKey(_) => {
                AppError::Validation(e.to_string())
            }
            _ => AppError::Internal(e.to_string()),
        }
    }
}

impl From<SolverError> for AppError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidCap(_)
            | SolverError::InfeasibleCap { .. }
            | SolverError::InvalidConfig(_) => AppError::Validation(e.to_string()),
            _ => AppError::Internal(e.to_string()),
        }
    }
}

fn internal(e: impl std::fmt::Display) -> AppError {
    AppError::Internal(e.to_string())
}

fn invalid(e: impl std::fmt::Display) -> AppError {
    AppError::Validation(e.to_string())
}

const RECORDS: &str = "data/records";
const INGEST_REPORT: &str = "data/ingest_report";
const ROSTER: &str = "data/roster";
const PLAYERS: &str = "players";
const TRAINING: &str = "training";
const OUTCOME_MODEL: &str = "outcome/model";
const OUTCOME_EVAL: &str = "outcome/evaluation";
const PATIENCE_MODEL: &str = "patience/model";
const REGRESSOR: &str = "control/regressor";
/// Directories that depend on the ingested data.
const ARTIFACT_DIRS: [&str; 10] = [
    "data",
    "control",
    "tensors",
    "outcome",
    "patience",
    "solutions",
    "simulations",
    "comparisons",
    "players.json",
    "training.json",
];

fn pitcher_key(kind: &str, id: &str) -> String {
    format!("{kind}/{}", encode_id(id))
}

pub fn matchup_key(kind: &str, pitcher: &str, batter: &str) -> String {
    format!("{kind}/{}_{}", encode_id(pitcher), encode_id(batter))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub data_fingerprint: String,
    pub report: IngestReport,
    pub pitchers: usize,
    pub batters: usize,
}

/// Parse CSVs into a fresh store. Earlier artifacts under the store root are
/// removed, since they describe other data.
pub fn run_ingest(
    config: &AppConfig,
    paths: &[impl AsRef<Path>],
    roster: Option<&Roster>,
) -> Result<IngestSummary, AppError> {
    let (records, report) = ingest(paths, &config.mapping).map_err(invalid)?;
    if records.is_empty() {
        return Err(AppError::Validation("no usable records in input".into()));
    }
    for entry in ARTIFACT_DIRS {
        let p = config.store.join(entry);
        let res = if p.is_dir() {
            std::fs::remove_dir_all(&p)
        } else if p.is_file() {
            std::fs::remove_file(&p)
        } else {
            Ok(())
        };
        res.map_err(|e| internal(format!("cannot clear {}: {e}", p.display())))?;
    }
    let fp = fingerprint(&records);
    let store = Store::create(&config.store, &fp)?;
    store.write(RECORDS, &records)?;
    store.write(INGEST_REPORT, &report)?;
    if let Some(r) = roster {
        store.write(ROSTER, r)?;
    }
    let (p, b) = player_ids(&records);
    Ok(IngestSummary {
        data_fingerprint: fp,
        report,
        pitchers: p.len(),
        batters: b.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitcherInfo {
    pub id: String,
    pub tier: Option<Tier>,
    pub pitches: usize,
    pub control: BTreeMap<PitchType, ControlSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatterInfo {
    pub id: String,
    pub tier: Option<Tier>,
    pub pitches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPlayer {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Players {
    pub pitchers: Vec<PitcherInfo>,
    pub batters: Vec<BatterInfo>,
    pub skipped: Vec<SkippedPlayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub records: usize,
    pub train_records: usize,
    pub test_records: usize,
    pub dropped_records: usize,
    pub outcome_model: OutcomeKind,
    pub outcome_train_swings: usize,
    pub evaluation: Option<Evaluation>,
    pub patience_cell_models: usize,
    pub control_regressor_types: Vec<PitchType>,
    pub pitchers: usize,
    pub batters: usize,
    pub skipped: Vec<SkippedPlayer>,
}

/// Fewest pitches of a type, absolute and as a share, for it to count as part
/// of a pitcher's repertoire.
const REPERTOIRE_MIN: usize = 5;
const REPERTOIRE_SHARE: f64 = 0.02;

fn history(records: &[&PitchRecord]) -> PlayerHistory {
    PlayerHistory::new(
        records
            .iter()
            .map(|r| HistoryRecord {
                pitch: r.pitch_type,
                coords: r.coords,
                swung: r.swung,
                label: r.label,
                velocity: r.velocity,
            })
            .collect(),
    )
}

pub fn run_train(config: &AppConfig) -> Result<TrainSummary, AppError> {
    let store = Store::open(&config.store)?;
    let records: Vec<PitchRecord> = store.read(RECORDS)?;
    let roster: Option<Roster> = match store.read(ROSTER) {
        Ok(r) => Some(r),
        Err(StoreError::NotFound(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let grid = &config.grid;

    let (train, test, dropped) = match config.split.test_fraction {
        Some(f) => {
            let s = split_players(&records, f, config.split.seed).map_err(invalid)?;
            (s.train, s.test, s.dropped)
        }
        None => (records.clone(), Vec::new(), 0),
    };
    if train.is_empty() {
        return Err(AppError::Validation("the player split left no training records".into()));
    }

    let mut by_pitcher: BTreeMap<&str, Vec<&PitchRecord>> = BTreeMap::new();
    let mut by_batter: BTreeMap<&str, Vec<&PitchRecord>> = BTreeMap::new();
    for r in &records {
        by_pitcher.entry(&r.pitcher_id).or_default().push(r);
        by_batter.entry(&r.batter_id).or_default().push(r);
    }
    let mut skipped = Vec::new();
    let mut pitcher_tensors: BTreeMap<&str, PitcherTensor> = BTreeMap::new();
    for (&id, recs) in &by_pitcher {
        match build_pitcher_tensor(&history(recs), grid) {
            Ok(t) => {
                pitcher_tensors.insert(id, t);
            }
            Err(e) => skipped.push(SkippedPlayer {
                id: id.to_string(),
                reason: e.to_string(),
            }),
        }
    }
    let mut batter_tensors: BTreeMap<&str, BatterTensor> = BTreeMap::new();
    for (&id, recs) in &by_batter {
        match build_batter_tensor(&history(recs), grid) {
            Ok(t) => {
                batter_tensors.insert(id, t);
            }
            Err(e) => skipped.push(SkippedPlayer {
                id: id.to_string(),
                reason: e.to_string(),
            }),
        }
    }

    // outcome model on the training side, evaluated on the held-out side
    let p_index: BTreeMap<&str, usize> = pitcher_tensors.keys().enumerate().map(|(i, &k)| (k, i)).collect();
    let b_index: BTreeMap<&str, usize> = batter_tensors.keys().enumerate().map(|(i, &k)| (k, i)).collect();
    let swings = |recs: &[PitchRecord]| -> Vec<SwingSample> {
        recs.iter()
            .filter_map(|r| {
                let outcome = r.label.swing_outcome()?;
                let zone = grid.zone_of(r.coords).ok()?;
                if zone.is_far() {
                    return None;
                }
                Some(SwingSample {
                    pitcher: *p_index.get(r.pitcher_id.as_str())?,
                    batter: *b_index.get(r.batter_id.as_str())?,
                    pitch: r.pitch_type,
                    zone,
                    count: r.count,
                    outcome,
                })
            })
            .collect()
    };
    let dataset = |samples| SwingDataset {
        pitchers: pitcher_tensors.values().cloned().collect(),
        batters: batter_tensors.values().cloned().collect(),
        samples,
    };
    let train_swings = dataset(swings(&train));
    let test_swings = dataset(swings(&test));
    let outcome = match config.outcome.kind {
        OutcomeKind::Empirical => OutcomeModel::Empirical(
            train_empirical(&train_swings.samples, config.outcome.alpha).map_err(invalid)?,
        ),
        OutcomeKind::Softmax => OutcomeModel::Softmax(
            train_softmax(&train_swings, config.outcome.softmax)
                .map_err(invalid)?
                .model,
        ),
    };
    let evaluation = if test_swings.samples.is_empty() {
        None
    } else {
        Some(evaluate(&outcome, &test_swings).map_err(internal)?)
    };

    let patience_samples: Vec<PatienceSample> = train
        .iter()
        .filter_map(|r| {
            let zone = grid.zone_of(r.coords).ok()?;
            if !zone.is_borderline() {
                return None;
            }
            Some(PatienceSample {
                batter: *b_index.get(r.batter_id.as_str())?,
                pitch: r.pitch_type,
                zone,
                count: r.count,
                swung: r.swung,
            })
        })
        .collect();
    let patience = train_patience(
        &PatienceDataset {
            batters: batter_tensors.values().cloned().collect(),
            samples: patience_samples,
        },
        config.patience,
    )
    .map_err(invalid)?;

    // control: empirical 3-0 fits, then a regressor over them, then a pooled fit
    let three_oh = Count::new(3, 0).expect("valid count");
    let keep = config.control.keep_fraction;
    let mut repertoires: BTreeMap<&str, Vec<PitchType>> = BTreeMap::new();
    let mut empirical: BTreeMap<(&str, PitchType), GaussianControl> = BTreeMap::new();
    let mut pooled_points: BTreeMap<PitchType, Vec<_>> = BTreeMap::new();
    for (&id, recs) in &by_pitcher {
        if !pitcher_tensors.contains_key(id) {
            continue;
        }
        let mut per_type: BTreeMap<PitchType, usize> = BTreeMap::new();
        for r in recs {
            *per_type.entry(r.pitch_type).or_default() += 1;
        }
        let min = REPERTOIRE_MIN.max((REPERTOIRE_SHARE * recs.len() as f64).ceil() as usize);
        let repertoire: Vec<PitchType> = per_type
            .into_iter()
            .filter(|&(_, n)| n >= min)
            .map(|(p, _)| p)
            .collect();
        for &pitch in &repertoire {
            let points: Vec<_> = recs
                .iter()
                .filter(|r| r.count == three_oh && r.pitch_type == pitch)
                .map(|r| r.coords)
                .collect();
            pooled_points.entry(pitch).or_default().extend(points.iter().copied());
            if points.len() >= MIN_FIT_POINTS {
                match prune_refit(&points, keep) {
                    Ok(g) => {
                        empirical.insert((id, pitch), g);
                    }
                    Err(ControlError::DegenerateCloud) => {}
                    Err(e) => return Err(internal(e)),
                }
            }
        }
        repertoires.insert(id, repertoire);
    }
    let pairs: Vec<(PitchType, &PitcherTensor, GaussianControl)> = empirical
        .iter()
        .map(|(&(id, pitch), &g)| (pitch, &pitcher_tensors[id], g))
        .collect();
    let regressor: Option<ControlRegressor> =
        train_control_regressor(&pairs, config.control.ridge_lambda, config.control.min_variance).ok();
    let mut pooled: BTreeMap<PitchType, GaussianControl> = BTreeMap::new();
    for (pitch, pts) in &pooled_points {
        if pts.len() >= MIN_FIT_POINTS {
            if let Ok(g) = prune_refit(pts, keep) {
                pooled.insert(*pitch, g);
            }
        }
    }

    // everything fitted; write it out
    for dir in ["solutions", "simulations", "comparisons", "control", "tensors"] {
        let p = config.store.join(dir);
        if p.is_dir() {
            std::fs::remove_dir_all(&p).map_err(internal)?;
        }
    }
    let tier_of = |list: Option<&Vec<crate::sim::RosterEntry>>, id: &str| {
        list.and_then(|l| l.iter().find(|e| e.id == id)).map(|e| e.tier)
    };
    let mut players = Players::default();
    for (&id, repertoire) in &repertoires {
        let mut controls: BTreeMap<PitchType, FittedControl> = BTreeMap::new();
        for &pitch in repertoire {
            let fitted = if let Some(&g) = empirical.get(&(id, pitch)) {
                Some(FittedControl {
                    params: g,
                    source: ControlSource::Empirical,
                })
            } else if let Some(g) = regressor.as_ref().and_then(|r| r.predict(pitch, &pitcher_tensors[id])) {
                Some(FittedControl {
                    params: g,
                    source: ControlSource::Regressed,
                })
            } else {
                pooled.get(&pitch).map(|&g| FittedControl {
                    params: g,
                    source: ControlSource::Pooled,
                })
            };
            if let Some(f) = fitted {
                controls.insert(pitch, f);
            }
        }
        if controls.is_empty() {
            skipped.push(SkippedPlayer {
                id: id.to_string(),
                reason: "no pitch type has a control model".into(),
            });
            continue;
        }
        store.write(&pitcher_key("control", id), &controls)?;
        store.write(&pitcher_key("tensors/pitchers", id), &pitcher_tensors[id])?;
        players.pitchers.push(PitcherInfo {
            id: id.to_string(),
            tier: tier_of(roster.as_ref().map(|r| &r.pitchers), id),
            pitches: by_pitcher[id].len(),
            control: controls.iter().map(|(&p, f)| (p, f.source)).collect(),
        });
    }
    for (&id, t) in &batter_tensors {
        store.write(&pitcher_key("tensors/batters", id), t)?;
        players.batters.push(BatterInfo {
            id: id.to_string(),
            tier: tier_of(roster.as_ref().map(|r| &r.batters), id),
            pitches: by_batter[id].len(),
        });
    }
    skipped.sort_by(|a, b| a.id.cmp(&b.id));
    players.skipped = skipped.clone();
    if let Some(r) = &regressor {
        store.write(REGRESSOR, r)?;
    }
    store.write(OUTCOME_MODEL, &outcome)?;
    if let Some(e) = &evaluation {
        store.write(OUTCOME_EVAL, e)?;
    }
    store.write(PATIENCE_MODEL, &patience)?;
    store.write(PLAYERS, &players)?;
    let summary = TrainSummary {
        records: records.len(),
        train_records: train.len(),
        test_records: test.len(),
        dropped_records: dropped,
        outcome_model: config.outcome.kind,
        outcome_train_swings: train_swings.samples.len(),
        evaluation,
        patience_cell_models: patience.cells.values().map(|m| m.len()).sum(),
        control_regressor_types: regressor
            .as_ref()
            .map(|r| r.models.keys().copied().collect())
            .unwrap_or_default(),
        pitchers: players.pitchers.len(),
        batters: players.batters.len(),
        skipped,
    };
    store.write(TRAINING, &summary)?;
    Ok(summary)
}

/// Everything a solve needs, loaded once from a trained store.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub store: Store,
    pub players: Players,
    pub outcome: OutcomeModel,
    pub patience: PatienceClassifier,
    pitcher_tensors: BTreeMap<String, PitcherTensor>,
    batter_tensors: BTreeMap<String, BatterTensor>,
    controls: BTreeMap<String, BTreeMap<PitchType, FittedControl>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOverrides {
    pub excluded_pitch_types: Vec<PitchType>,
    pub threshold: Option<f64>,
    pub cap: Option<f64>,
    pub variance_scale: Option<f64>,
}

impl SolveOverrides {
    pub fn is_empty(&self) -> bool {
        *self == SolveOverrides::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRequest {
    pub pitcher_id: String,
    pub batter_id: String,
    #[serde(default)]
    pub overrides: SolveOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub data_fingerprint: String,
    pub outcome_model: String,
    pub control: BTreeMap<PitchType, ControlSource>,
    pub pitch_types: Vec<PitchType>,
    pub threshold: f64,
    pub cap: Option<f64>,
    pub variance_scale: f64,
    /// Borderline (pitch, zone) cells forced to a take, per count.
    pub forced_takes: BTreeMap<Count, usize>,
    pub algorithm: SolveAlgorithm,
}

/// The stored form of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub pitcher_id: String,
    pub batter_id: String,
    pub solution: EquilibriumSolution,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResponse {
    pub pitcher_id: String,
    pub batter_id: String,
    pub solution: EquilibriumSolution,
    pub provenance: Provenance,
    pub solve_wall_ms: f64,
}

impl SolveResponse {
    pub fn document(&self) -> SolutionDocument {
        SolutionDocument {
            pitcher_id: self.pitcher_id.clone(),
            batter_id: self.batter_id.clone(),
            solution: self.solution.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

impl TrainedModels {
    pub fn load(store_root: &Path) -> Result<Self, AppError> {
        let store = Store::open(store_root)?;
        let players: Players = store.read(PLAYERS).map_err(|e| match e {
            StoreError::NotFound(_) => AppError::NotFound("store has no trained models; run train first".into()),
            e => e.into(),
        })?;
        let outcome = store.read(OUTCOME_MODEL)?;
        let patience = store.read(PATIENCE_MODEL)?;
        let mut pitcher_tensors = BTreeMap::new();
        let mut controls = BTreeMap::new();
        for p in &players.pitchers {
            pitcher_tensors.insert(p.id.clone(), store.read(&pitcher_key("tensors/pitchers", &p.id))?);
            controls.insert(p.id.clone(), store.read(&pitcher_key("control", &p.id))?);
        }
        let mut batter_tensors = BTreeMap::new();
        for b in &players.batters {
            batter_tensors.insert(b.id.clone(), store.read(&pitcher_key("tensors/batters", &b.id))?);
        }
        Ok(TrainedModels {
            store,
            players,
            outcome,
            patience,
            pitcher_tensors,
            batter_tensors,
            controls,
        })
    }

    pub fn has_pitcher(&self, id: &str) -> bool {
        self.controls.contains_key(id)
    }

    pub fn has_batter(&self, id: &str) -> bool {
        self.batter_tensors.contains_key(id)
    }

    /// Kernel inputs for a matchup under `overrides`.
    pub fn matchup_models(
        &self,
        config: &AppConfig,
        req: &SolveRequest,
    ) -> Result<(MatchupModels, Provenance), AppError> {
        let o = &req.overrides;
        let controls = self.controls.get(&req.pitcher_id).ok_or_else(|| {
            AppError::Validation(format!("unknown pitcher {:?}", req.pitcher_id))
        })?;
        let bt = self.batter_tensors.get(&req.batter_id).ok_or_else(|| {
            AppError::Validation(format!("unknown batter {:?}", req.batter_id))
        })?;
        let pt = &self.pitcher_tensors[&req.pitcher_id];
        let threshold = o.threshold.unwrap_or(config.patience.threshold);
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(AppError::Validation(format!("threshold must lie in (0, 1), got {threshold}")));
        }
        let scale = o.variance_scale.unwrap_or(1.0);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(AppError::Validation(format!("variance_scale must be positive, got {scale}")));
        }
        let kept: BTreeMap<PitchType, GaussianControl> = controls
            .iter()
            .filter(|(p, _)| !o.excluded_pitch_types.contains(p))
            .map(|(&p, f)| (p, f.params.scaled(scale)))
            .collect();
        if kept.is_empty() {
            return Err(AppError::Validation(
                "no pitch types remain after exclusion".into(),
            ));
        }
        let grid = &config.grid;
        let pitch_types: Vec<PitchType> = kept.keys().copied().collect();
        let aim = AimDistribution::from_controls(&kept, grid).map_err(internal)?;
        let mut tensors = BTreeMap::new();
        for &p in &pitch_types {
            for z in ZoneId::finite() {
                tensors.insert((p, z), build_pitch_tensor(grid, p, z).map_err(internal)?);
            }
        }
        let mut failure = None;
        let outcomes = OutcomeTable::from_fn(&pitch_types, |p, z, c| {
            match self.outcome.predict(pt, bt, &tensors[&(p, z)], c) {
                Ok(d) => d,
                Err(e) => {
                    failure.get_or_insert(e);
                    crate::outcome::OutcomeDistribution::uniform()
                }
            }
        });
        if let Some(e) = failure {
            return Err(internal(e));
        }
        let overrides = self.patience.build_overrides(bt, threshold).map_err(internal)?;
        let forced_takes = Count::all()
            .map(|c| {
                let n = overrides[c.index()]
                    .forced_zones()
                    .iter()
                    .filter(|(p, _)| pitch_types.contains(p))
                    .count();
                (c, n)
            })
            .collect();
        let provenance = Provenance {
            data_fingerprint: self.store.data_fingerprint().to_string(),
            outcome_model: match self.outcome {
                OutcomeModel::Empirical(_) => "empirical".into(),
                OutcomeModel::Softmax(_) => "softmax".into(),
            },
            control: controls
                .iter()
                .filter(|(p, _)| kept.contains_key(p))
                .map(|(&p, f)| (p, f.source))
                .collect(),
            pitch_types: pitch_types.clone(),
            threshold,
            cap: o.cap.or(config.solver.cap),
            variance_scale: scale,
            forced_takes,
            algorithm: config.algorithm,
        };
        Ok((
            MatchupModels {
                pitch_types,
                aim,
                outcomes,
                overrides,
            },
            provenance,
        ))
    }

    pub fn solve(&self, config: &AppConfig, req: &SolveRequest) -> Result<SolveResponse, AppError> {
        let start = Instant::now();
        let (models, provenance) = self.matchup_models(config, req)?;
        let kernel = build_kernel(&models).map_err(internal)?;
        let solver = SolverConfig {
            cap: provenance.cap,
            ..config.solver
        };
        solver.validate(kernel.num_actions())?;
        let solved = match config.algorithm {
            SolveAlgorithm::Acyclic => solve_acyclic(&kernel, &solver)?,
            SolveAlgorithm::ValueIteration => value_iterate(&kernel, &solver)?,
        };
        Ok(SolveResponse {
            pitcher_id: req.pitcher_id.clone(),
            batter_id: req.batter_id.clone(),
            solution: solved.solution,
            provenance,
            solve_wall_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    pub fn persist(&self, response: &SolveResponse) -> Result<(), AppError> {
        let key = matchup_key("solutions", &response.pitcher_id, &response.batter_id);
        self.store.write(&key, &response.document())?;
        Ok(())
    }

    pub fn stored_solution(&self, pitcher: &str, batter: &str) -> Result<SolutionDocument, AppError> {
        Ok(self.store.read(&matchup_key("solutions", pitcher, batter))?)
    }

    /// The stored baseline solution, solving and storing it if absent.
    pub fn baseline(&self, config: &AppConfig, pitcher: &str, batter: &str) -> Result<SolutionDocument, AppError> {
        match self.stored_solution(pitcher, batter) {
            Ok(d) => Ok(d),
            Err(AppError::NotFound(_)) => {
                let r = self.solve(
                    config,
                    &SolveRequest {
                        pitcher_id: pitcher.into(),
                        batter_id: batter.into(),
                        overrides: SolveOverrides::default(),
                    },
                )?;
                self.persist(&r)?;
                Ok(r.document())
            }
            Err(e) => Err(e),
        }
    }

    pub fn records(&self) -> Result<Vec<PitchRecord>, AppError> {
        Ok(self.store.read(RECORDS)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationDocument {
    pub pitcher_id: String,
    pub batter_id: String,
    pub seed: u64,
    pub results: Vec<SimulationResult>,
}

fn baseline_request(pitcher: &str, batter: &str) -> SolveRequest {
    SolveRequest {
        pitcher_id: pitcher.into(),
        batter_id: batter.into(),
        overrides: SolveOverrides::default(),
    }
}

/// Equilibrium play from every count under the fitted models.
pub fn run_simulate(
    models: &TrainedModels,
    config: &AppConfig,
    pitcher: &str,
    batter: &str,
) -> Result<SimulationDocument, AppError> {
    let doc = models.baseline(config, pitcher, batter)?;
    let (world, _) = models.matchup_models(config, &baseline_request(pitcher, batter))?;
    let profile = Profile::from_solution(&doc.solution, &world.actions());
    let results = simulate_all_counts(
        Dynamics::World(&world),
        &profile,
        config.simulation.at_bats,
        config.simulation.seed,
    )
    .map_err(internal)?;
    let out = SimulationDocument {
        pitcher_id: pitcher.into(),
        batter_id: batter.into(),
        seed: config.simulation.seed,
        results,
    };
    models.store.write(&matchup_key("simulations", pitcher, batter), &out)?;
    Ok(out)
}

/// Equilibrium against behavioral play. The pitcher's behavior comes from
/// his own pitches, the batter's from his own plate appearances.
pub fn run_compare(
    models: &TrainedModels,
    config: &AppConfig,
    pitcher: &str,
    batter: &str,
) -> Result<ComparisonTable, AppError> {
    let doc = models.baseline(config, pitcher, batter)?;
    let (world, _) = models.matchup_models(config, &baseline_request(pitcher, batter))?;
    let records = models.records()?;
    let alpha = config.simulation.behavioral_alpha;
    let of_pitcher: Vec<PitchRecord> = records.iter().filter(|r| r.pitcher_id == pitcher).cloned().collect();
    let of_batter: Vec<PitchRecord> = records.iter().filter(|r| r.batter_id == batter).cloned().collect();
    let bp = estimate_behavioral(&of_pitcher, &config.grid, alpha).map_err(invalid)?;
    let bb = estimate_behavioral(&of_batter, &config.grid, alpha).map_err(invalid)?;
    let behavioral = bp.with_batter_of(&bb);
    let table = compare_obp(
        &world,
        &doc.solution,
        &behavioral,
        config.simulation.at_bats,
        config.simulation.seed,
    )
    .map_err(internal)?;
    models.store.write(&matchup_key("comparisons", pitcher, batter), &table)?;
    Ok(table)
}

/// Ids in the store, for error messages and listings.
pub fn known_ids(players: &Players) -> (BTreeSet<String>, BTreeSet<String>) {
    (
        players.pitchers.iter().map(|p| p.id.clone()).collect(),
        players.batters.iter().map(|b| b.id.clone()).collect(),
    )
}
