//! Player tensors: per-cell, per-pitch-type summaries of a pitcher's or a
//! batter's history, shaped (5, 5, 12) with two interleaved slices per pitch
//! type.
//!
//! Pitcher slices are (throw frequency, mean velocity in mph); batter slices
//! are (swing frequency, batting average on balls in play). Statistics of a
//! multi-cell zone are shared by all of its cells, with frequencies split
//! evenly. Pitches landing in FAR are left out.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::PitchLabel;
use crate::zones::{
    PitchType, PlateCoords, ZoneGrid, ZoneId, GRID_SIZE, NUM_CELLS, NUM_PITCH_TYPES, NUM_ZONES,
};

pub const PLAYER_SLICES: usize = 2 * NUM_PITCH_TYPES;
pub const PLAYER_TENSOR_LEN: usize = NUM_CELLS * PLAYER_SLICES;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("history has no pitches inside the grid")]
    EmptyHistory,
    #[error("tensor shape mismatch: expected {expected} values, got {got}")]
    ShapeError { expected: usize, got: usize },
    #[error("invalid history record: {0}")]
    InvalidRecord(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub pitch: PitchType,
    pub coords: PlateCoords,
    pub swung: bool,
    pub label: PitchLabel,
    pub velocity: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlayerHistory {
    pub records: Vec<HistoryRecord>,
}

impl PlayerHistory {
    pub fn new(records: Vec<HistoryRecord>) -> Self {
        Self { records }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorDocument {
    shape: [usize; 3],
    slices: Vec<String>,
    values: Vec<f64>,
}

fn slice_names(a: &str, b: &str) -> Vec<String> {
    PitchType::ALL
        .iter()
        .flat_map(|p| [format!("{p}:{a}"), format!("{p}:{b}")])
        .collect()
}

macro_rules! player_tensor {
    ($name:ident, $first:literal, $second:literal) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = "TensorDocument", into = "TensorDocument")]
        pub struct $name {
            values: Vec<f64>,
        }

        impl $name {
            pub fn from_flat(values: Vec<f64>) -> Result<Self, FeatureError> {
                if values.len() != PLAYER_TENSOR_LEN {
                    return Err(FeatureError::ShapeError {
                        expected: PLAYER_TENSOR_LEN,
                        got: values.len(),
                    });
                }
                Ok(Self { values })
            }

            pub fn zeros() -> Self {
                Self {
                    values: vec![0.0; PLAYER_TENSOR_LEN],
                }
            }

            /// Flat values, index `(row * 5 + col) * 12 + slice`.
            pub fn values(&self) -> &[f64] {
                &self.values
            }

            pub fn get(&self, row: usize, col: usize, slice: usize) -> f64 {
                self.values[(row * GRID_SIZE + col) * PLAYER_SLICES + slice]
            }

            fn set(&mut self, row: usize, col: usize, slice: usize, v: f64) {
                self.values[(row * GRID_SIZE + col) * PLAYER_SLICES + slice] = v;
            }

            pub fn slice_names() -> Vec<String> {
                slice_names($first, $second)
            }
        }

        impl TryFrom<TensorDocument> for $name {
            type Error = FeatureError;
            fn try_from(doc: TensorDocument) -> Result<Self, FeatureError> {
                if doc.shape != [GRID_SIZE, GRID_SIZE, PLAYER_SLICES] {
                    return Err(FeatureError::ShapeError {
                        expected: PLAYER_TENSOR_LEN,
                        got: doc.shape.iter().product(),
                    });
                }
                Self::from_flat(doc.values)
            }
        }

        impl From<$name> for TensorDocument {
            fn from(t: $name) -> TensorDocument {
                TensorDocument {
                    shape: [GRID_SIZE, GRID_SIZE, PLAYER_SLICES],
                    slices: $name::slice_names(),
                    values: t.values,
                }
            }
        }
    };
}

player_tensor!(PitcherTensor, "frequency", "velocity_mph");
player_tensor!(BatterTensor, "swing_frequency", "batting_average");

impl PitcherTensor {
    pub fn frequency(&self, row: usize, col: usize, pitch: PitchType) -> f64 {
        self.get(row, col, 2 * pitch.index())
    }

    pub fn velocity(&self, row: usize, col: usize, pitch: PitchType) -> f64 {
        self.get(row, col, 2 * pitch.index() + 1)
    }

    pub fn total_frequency(&self) -> f64 {
        self.values
            .chunks(PLAYER_SLICES)
            .map(|cell| (0..NUM_PITCH_TYPES).map(|p| cell[2 * p]).sum::<f64>())
            .sum()
    }
}

impl BatterTensor {
    pub fn swing_frequency(&self, row: usize, col: usize, pitch: PitchType) -> f64 {
        self.get(row, col, 2 * pitch.index())
    }

    pub fn batting_average(&self, row: usize, col: usize, pitch: PitchType) -> f64 {
        self.get(row, col, 2 * pitch.index() + 1)
    }
}

fn zoned<'a>(
    h: &'a PlayerHistory,
    grid: &'a ZoneGrid,
) -> Result<Vec<(&'a HistoryRecord, ZoneId)>, FeatureError> {
    let mut out = Vec::with_capacity(h.records.len());
    for r in &h.records {
        let zone = grid
            .zone_of(r.coords)
            .map_err(|e| FeatureError::InvalidRecord(e.to_string()))?;
        if !zone.is_far() {
            out.push((r, zone));
        }
    }
    if out.is_empty() {
        return Err(FeatureError::EmptyHistory);
    }
    Ok(out)
}

pub fn build_pitcher_tensor(
    h: &PlayerHistory,
    grid: &ZoneGrid,
) -> Result<PitcherTensor, FeatureError> {
    let usable = zoned(h, grid)?;
    let total = usable.len() as f64;
    let mut count = [[0usize; NUM_ZONES]; NUM_PITCH_TYPES];
    let mut vel_sum = [[0.0f64; NUM_ZONES]; NUM_PITCH_TYPES];
    let mut vel_n = [[0usize; NUM_ZONES]; NUM_PITCH_TYPES];
    for (r, zone) in &usable {
        let (p, z) = (r.pitch.index(), zone.index());
        count[p][z] += 1;
        if let Some(v) = r.velocity.filter(|v| v.is_finite()) {
            vel_sum[p][z] += v;
            vel_n[p][z] += 1;
        }
    }
    let mut t = PitcherTensor::zeros();
    for zone in ZoneId::finite() {
        let cells = grid.cells_of(zone);
        let share = cells.len() as f64;
        for pitch in PitchType::ALL {
            let (p, z) = (pitch.index(), zone.index());
            if count[p][z] == 0 {
                continue;
            }
            let freq = count[p][z] as f64 / total / share;
            let vel = if vel_n[p][z] > 0 {
                vel_sum[p][z] / vel_n[p][z] as f64
            } else {
                0.0
            };
            for &(r, c) in &cells {
                t.set(r, c, 2 * p, freq);
                t.set(r, c, 2 * p + 1, vel.max(0.0));
            }
        }
    }
    Ok(t)
}

pub fn build_batter_tensor(
    h: &PlayerHistory,
    grid: &ZoneGrid,
) -> Result<BatterTensor, FeatureError> {
    let usable = zoned(h, grid)?;
    let mut seen = [[0usize; NUM_ZONES]; NUM_PITCH_TYPES];
    let mut swings = [[0usize; NUM_ZONES]; NUM_PITCH_TYPES];
    let mut hits = [[0usize; NUM_ZONES]; NUM_PITCH_TYPES];
    let mut in_play = [[0usize; NUM_ZONES]; NUM_PITCH_TYPES];
    for (r, zone) in &usable {
        let (p, z) = (r.pitch.index(), zone.index());
        seen[p][z] += 1;
        if r.swung {
            swings[p][z] += 1;
            match r.label {
                PitchLabel::Hit => {
                    hits[p][z] += 1;
                    in_play[p][z] += 1;
                }
                PitchLabel::OutInPlay => in_play[p][z] += 1,
                _ => {}
            }
        }
    }
    let mut t = BatterTensor::zeros();
    for zone in ZoneId::finite() {
        for pitch in PitchType::ALL {
            let (p, z) = (pitch.index(), zone.index());
            if seen[p][z] == 0 {
                continue;
            }
            let swing = swings[p][z] as f64 / seen[p][z] as f64;
            let avg = if in_play[p][z] > 0 {
                hits[p][z] as f64 / in_play[p][z] as f64
            } else {
                0.0
            };
            for (r, c) in grid.cells_of(zone) {
                t.set(r, c, 2 * p, swing);
                t.set(r, c, 2 * p + 1, avg);
            }
        }
    }
    Ok(t)
}
