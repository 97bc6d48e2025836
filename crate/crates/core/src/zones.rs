//! Pitch-location geometry: the 5×5 cell grid around the strike zone, the 17
//! aggregate zones, the FAR catch-all, pitch types and one-hot pitch tensors.
//!
//! Coordinates are in feet from the catcher's view: `x` is horizontal with
//! the origin at the plate center and positive to the catcher's right, `z` is
//! height above the ground. Grid rows run 0 (top) to 4 (bottom), columns 0
//! (left) to 4 (right). Cells are half-open, closed on their minimum edge.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

pub const GRID_SIZE: usize = 5;
pub const NUM_CELLS: usize = GRID_SIZE * GRID_SIZE;
/// Finite zones 0..=16.
pub const NUM_ZONES: usize = 17;
/// Finite zones plus FAR.
pub const NUM_LOCATIONS: usize = NUM_ZONES + 1;
pub const NUM_PITCH_TYPES: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZoneError {
    #[error("plate coordinates must be finite, got ({x}, {z})")]
    InvalidCoords { x: f64, z: f64 },
    #[error("the FAR region has no grid cells and cannot be encoded")]
    FarNotEncodable,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unknown pitch type code {0:?}")]
    UnknownPitchType(String),
    #[error("zone id {0} out of range")]
    InvalidZone(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateCoords {
    pub x: f64,
    pub z: f64,
}

impl PlateCoords {
    pub fn new(x: f64, z: f64) -> Result<Self, ZoneError> {
        if x.is_finite() && z.is_finite() {
            Ok(Self { x, z })
        } else {
            Err(ZoneError::InvalidCoords { x, z })
        }
    }
}

/// A finite zone `0..=16` or the FAR region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ZoneId(u8);

impl ZoneId {
    pub const FAR: ZoneId = ZoneId(NUM_ZONES as u8);

    pub fn new(id: u8) -> Result<Self, ZoneError> {
        if (id as usize) < NUM_ZONES {
            Ok(ZoneId(id))
        } else {
            Err(ZoneError::InvalidZone(id as i64))
        }
    }

    /// Zone from a location index in `0..NUM_LOCATIONS` (17 = FAR).
    pub fn from_index(index: usize) -> Self {
        assert!(index < NUM_LOCATIONS, "location index {index} out of range");
        ZoneId(index as u8)
    }

    /// Location index; FAR maps to 17.
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_far(self) -> bool {
        self == Self::FAR
    }

    pub fn is_strike(self) -> bool {
        self.0 < 9
    }

    pub fn is_ball(self) -> bool {
        !self.is_strike()
    }

    /// Ball zone with grid cells (9..=16).
    pub fn is_borderline(self) -> bool {
        (9..17).contains(&self.0)
    }

    /// The 17 finite zones in id order.
    pub fn finite() -> impl Iterator<Item = ZoneId> {
        (0..NUM_ZONES as u8).map(ZoneId)
    }

    /// All 18 landing locations, FAR last.
    pub fn locations() -> impl Iterator<Item = ZoneId> {
        (0..NUM_LOCATIONS as u8).map(ZoneId)
    }

    /// The 8 finite ball zones.
    pub fn borderline() -> impl Iterator<Item = ZoneId> {
        (9..NUM_ZONES as u8).map(ZoneId)
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_far() {
            f.write_str("FAR")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for ZoneId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_far() {
            s.serialize_str("FAR")
        } else {
            s.serialize_u8(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ZoneId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct ZoneVisitor;
        impl Visitor<'_> for ZoneVisitor {
            type Value = ZoneId;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a zone id 0..=16 or \"FAR\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ZoneId, E> {
                if v < NUM_ZONES as u64 {
                    Ok(ZoneId(v as u8))
                } else {
                    Err(E::custom(format!("zone id {v} out of range")))
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ZoneId, E> {
                if v < 0 {
                    return Err(E::custom(format!("zone id {v} out of range")));
                }
                self.visit_u64(v as u64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<ZoneId, E> {
                if v.eq_ignore_ascii_case("far") {
                    Ok(ZoneId::FAR)
                } else if let Ok(n) = v.parse::<u64>() {
                    // map keys arrive as strings
                    self.visit_u64(n)
                } else {
                    Err(E::custom(format!("unknown zone {v:?}")))
                }
            }
        }
        d.deserialize_any(ZoneVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PitchType {
    FF,
    FT,
    FC,
    SL,
    CU,
    CH,
}

impl PitchType {
    pub const ALL: [PitchType; NUM_PITCH_TYPES] = [
        PitchType::FF,
        PitchType::FT,
        PitchType::FC,
        PitchType::SL,
        PitchType::CU,
        PitchType::CH,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn code(self) -> &'static str {
        match self {
            PitchType::FF => "FF",
            PitchType::FT => "FT",
            PitchType::FC => "FC",
            PitchType::SL => "SL",
            PitchType::CU => "CU",
            PitchType::CH => "CH",
        }
    }
}

impl fmt::Display for PitchType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for PitchType {
    type Err = ZoneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|p| p.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ZoneError::UnknownPitchType(s.to_string()))
    }
}

/// Common pitch-tracking codes folded onto the six canonical types.
pub fn default_pitch_aliases() -> std::collections::BTreeMap<String, PitchType> {
    [
        ("SI", PitchType::FT),
        ("FA", PitchType::FF),
        ("KC", PitchType::CU),
        ("CS", PitchType::CU),
        ("FS", PitchType::CH),
        ("SC", PitchType::CH),
        ("ST", PitchType::SL),
        ("SV", PitchType::SL),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Cell → zone table, indexed `[row][col]`.
const CELL_ZONES: [[u8; GRID_SIZE]; GRID_SIZE] = [
    [10, 10, 9, 12, 12],
    [10, 0, 1, 2, 12],
    [11, 3, 4, 5, 14],
    [13, 6, 7, 8, 15],
    [13, 13, 16, 15, 15],
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub z0: f64,
    pub z1: f64,
}

impl Rect {
    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.z0 + self.z1))
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.x0 && x < self.x1 && z >= self.z0 && z < self.z1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneGrid {
    pub strike_x_min: f64,
    pub strike_x_max: f64,
    pub strike_z_min: f64,
    pub strike_z_max: f64,
    pub band: f64,
}

impl Default for ZoneGrid {
    fn default() -> Self {
        default_grid()
    }
}

/// Canonical grid: 17-inch plate plus a ball radius per side, 1.5–3.5 ft
/// vertical zone, 0.4 ft peripheral band.
pub fn default_grid() -> ZoneGrid {
    ZoneGrid {
        strike_x_min: -0.83,
        strike_x_max: 0.83,
        strike_z_min: 1.5,
        strike_z_max: 3.5,
        band: 0.4,
    }
}

impl ZoneGrid {
    pub fn new(
        strike_x_min: f64,
        strike_x_max: f64,
        strike_z_min: f64,
        strike_z_max: f64,
        band: f64,
    ) -> Result<Self, ZoneError> {
        let grid = ZoneGrid {
            strike_x_min,
            strike_x_max,
            strike_z_min,
            strike_z_max,
            band,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), ZoneError> {
        let all = [
            self.strike_x_min,
            self.strike_x_max,
            self.strike_z_min,
            self.strike_z_max,
            self.band,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ZoneError::InvalidGrid("non-finite constant".into()));
        }
        if self.strike_x_max <= self.strike_x_min || self.strike_z_max <= self.strike_z_min {
            return Err(ZoneError::InvalidGrid("empty strike zone".into()));
        }
        if self.band <= 0.0 {
            return Err(ZoneError::InvalidGrid("band must be positive".into()));
        }
        Ok(())
    }

    /// Column edges, left to right (6 values).
    fn x_edges(&self) -> [f64; GRID_SIZE + 1] {
        let w = (self.strike_x_max - self.strike_x_min) / 3.0;
        [
            self.strike_x_min - self.band,
            self.strike_x_min,
            self.strike_x_min + w,
            self.strike_x_min + 2.0 * w,
            self.strike_x_max,
            self.strike_x_max + self.band,
        ]
    }

    /// Row edges, top to bottom (6 values, decreasing).
    fn z_edges(&self) -> [f64; GRID_SIZE + 1] {
        let h = (self.strike_z_max - self.strike_z_min) / 3.0;
        [
            self.strike_z_max + self.band,
            self.strike_z_max,
            self.strike_z_max - h,
            self.strike_z_max - 2.0 * h,
            self.strike_z_min,
            self.strike_z_min - self.band,
        ]
    }

    /// The whole gridded rectangle.
    pub fn bounds(&self) -> Rect {
        Rect {
            x0: self.strike_x_min - self.band,
            x1: self.strike_x_max + self.band,
            z0: self.strike_z_min - self.band,
            z1: self.strike_z_max + self.band,
        }
    }

    pub fn cell_rect(&self, row: usize, col: usize) -> Rect {
        let xe = self.x_edges();
        let ze = self.z_edges();
        Rect {
            x0: xe[col],
            x1: xe[col + 1],
            z0: ze[row + 1],
            z1: ze[row],
        }
    }

    pub fn cell_zone(&self, row: usize, col: usize) -> ZoneId {
        ZoneId(CELL_ZONES[row][col])
    }

    /// Member cells of a finite zone, row-major order.
    pub fn cells_of(&self, zone: ZoneId) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(3);
        for (r, row) in CELL_ZONES.iter().enumerate() {
            for (c, &z) in row.iter().enumerate() {
                if z == zone.0 {
                    out.push((r, c));
                }
            }
        }
        out
    }

    /// Mean of member-cell centers. For the L-shaped corner zones this point
    /// can fall outside the zone itself.
    pub fn centroid(&self, zone: ZoneId) -> Result<(f64, f64), ZoneError> {
        if zone.is_far() {
            return Err(ZoneError::FarNotEncodable);
        }
        let cells = self.cells_of(zone);
        let n = cells.len() as f64;
        let (sx, sz) = cells.iter().fold((0.0, 0.0), |(sx, sz), &(r, c)| {
            let (x, z) = self.cell_rect(r, c).center();
            (sx + x, sz + z)
        });
        Ok((sx / n, sz / n))
    }

    /// Grid cell containing the point, if any.
    pub fn cell_of(&self, x: f64, z: f64) -> Option<(usize, usize)> {
        let xe = self.x_edges();
        let ze = self.z_edges();
        if !(x >= xe[0] && x < xe[GRID_SIZE]) || !(z >= ze[GRID_SIZE] && z < ze[0]) {
            return None;
        }
        let col = (0..GRID_SIZE).find(|&c| x < xe[c + 1])?;
        // rows are stored top-down, so row r spans [ze[r+1], ze[r])
        let row = (0..GRID_SIZE).find(|&r| z >= ze[r + 1])?;
        Some((row, col))
    }

    pub fn zone_of(&self, p: PlateCoords) -> Result<ZoneId, ZoneError> {
        if !p.x.is_finite() || !p.z.is_finite() {
            return Err(ZoneError::InvalidCoords { x: p.x, z: p.z });
        }
        Ok(match self.cell_of(p.x, p.z) {
            Some((r, c)) => self.cell_zone(r, c),
            None => ZoneId::FAR,
        })
    }

    /// Nearest finite zone: the point is clamped into the grid first.
    pub fn nearest_zone(&self, p: PlateCoords) -> ZoneId {
        let b = self.bounds();
        let eps = 1e-9;
        let x = p.x.clamp(b.x0, b.x1 - eps);
        let z = p.z.clamp(b.z0, b.z1 - eps);
        match self.cell_of(x, z) {
            Some((r, c)) => self.cell_zone(r, c),
            None => ZoneId(4),
        }
    }
}

/// One-hot (5,5,6) encoding of a pitch type thrown to a zone.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchTensor {
    pitch: PitchType,
    zone: ZoneId,
    values: Vec<f64>,
}

pub const PITCH_TENSOR_LEN: usize = NUM_CELLS * NUM_PITCH_TYPES;

impl PitchTensor {
    pub fn pitch(&self) -> PitchType {
        self.pitch
    }

    pub fn zone(&self) -> ZoneId {
        self.zone
    }

    /// Flat values, index `(row * 5 + col) * 6 + pitch_index`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize, pitch: PitchType) -> f64 {
        self.values[(row * GRID_SIZE + col) * NUM_PITCH_TYPES + pitch.index()]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn build_pitch_tensor(
    grid: &ZoneGrid,
    pitch: PitchType,
    zone: ZoneId,
) -> Result<PitchTensor, ZoneError> {
    if zone.is_far() {
        return Err(ZoneError::FarNotEncodable);
    }
    let mut values = vec![0.0; PITCH_TENSOR_LEN];
    for (r, c) in grid.cells_of(zone) {
        values[(r * GRID_SIZE + c) * NUM_PITCH_TYPES + pitch.index()] = 1.0;
    }
    Ok(PitchTensor {
        pitch,
        zone,
        values,
    })
}
