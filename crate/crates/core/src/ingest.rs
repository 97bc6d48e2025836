//! Pitch-level CSV ingestion, export, and player-disjoint splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::game::{Count, PitchLabel};
use crate::zones::{default_pitch_aliases, PitchType, PlateCoords};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("cannot read {path}: {message}")]
    IoError { path: String, message: String },
    #[error("invalid test fraction {0}; must lie in (0, 1)")]
    InvalidFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchRecord {
    pub pitcher_id: String,
    pub batter_id: String,
    pub pitch_type: PitchType,
    pub coords: PlateCoords,
    pub count: Count,
    pub swung: bool,
    pub label: PitchLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<f64>,
}

/// Source column names plus translation tables for label and pitch codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub pitcher: String,
    pub batter: String,
    pub pitch_type: String,
    pub plate_x: String,
    pub plate_z: String,
    pub balls: String,
    pub strikes: String,
    pub label: String,
    /// Optional; when absent the swing flag is implied by the label.
    pub swung: Option<String>,
    pub velocity: Option<String>,
    /// Raw label code → canonical label; matched case-insensitively.
    pub label_codes: BTreeMap<String, PitchLabel>,
    /// Extra pitch codes folded onto the canonical six.
    pub pitch_aliases: BTreeMap<String, PitchType>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        let mut label_codes: BTreeMap<String, PitchLabel> = PitchLabel::ALL
            .iter()
            .map(|l| (l.code().to_string(), *l))
            .collect();
        for (code, label) in [
            ("swinging_strike", PitchLabel::Whiff),
            ("swinging_strike_blocked", PitchLabel::Whiff),
            ("foul_tip", PitchLabel::Whiff),
            ("blocked_ball", PitchLabel::Ball),
            ("foul_bunt", PitchLabel::Foul),
        ] {
            label_codes.insert(code.to_string(), label);
        }
        ColumnMapping {
            pitcher: "pitcher".into(),
            batter: "batter".into(),
            pitch_type: "pitch_type".into(),
            plate_x: "plate_x".into(),
            plate_z: "plate_z".into(),
            balls: "balls".into(),
            strikes: "strikes".into(),
            label: "description".into(),
            swung: Some("swung".into()),
            velocity: Some("velocity".into()),
            label_codes,
            pitch_aliases: default_pitch_aliases(),
        }
    }
}

impl ColumnMapping {
    pub fn from_json_file(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::IoError {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text)
            .map_err(|e| IngestError::SchemaError(format!("mapping {}: {e}", path.display())))
    }

    fn label(&self, raw: &str) -> Option<PitchLabel> {
        let key = raw.trim();
        self.label_codes
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(key))
            .map(|(_, &l)| l)
    }

    fn pitch(&self, raw: &str) -> Option<PitchType> {
        let key = raw.trim();
        key.parse().ok().or_else(|| {
            self.pitch_aliases
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(key))
                .map(|(_, &p)| p)
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub accepted: usize,
    /// Reject reason → row count.
    pub rejected: BTreeMap<String, usize>,
    /// Label codes missing from the mapping, with their row counts.
    pub unknown_label_codes: BTreeMap<String, usize>,
}

impl IngestReport {
    fn reject(&mut self, reason: &str) {
        *self.rejected.entry(reason.to_string()).or_default() += 1;
    }

    pub fn rejected_total(&self) -> usize {
        self.rejected.values().sum()
    }
}

struct Columns {
    pitcher: usize,
    batter: usize,
    pitch_type: usize,
    plate_x: usize,
    plate_z: usize,
    balls: usize,
    strikes: usize,
    label: usize,
    swung: Option<usize>,
    velocity: Option<usize>,
}

fn resolve(headers: &csv::StringRecord, mapping: &ColumnMapping) -> Result<Columns, IngestError> {
    let find = |name: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::SchemaError(format!("missing mapped column {name:?}")))
    };
    Ok(Columns {
        pitcher: find(&mapping.pitcher)?,
        batter: find(&mapping.batter)?,
        pitch_type: find(&mapping.pitch_type)?,
        plate_x: find(&mapping.plate_x)?,
        plate_z: find(&mapping.plate_z)?,
        balls: find(&mapping.balls)?,
        strikes: find(&mapping.strikes)?,
        label: find(&mapping.label)?,
        swung: mapping.swung.as_deref().map(find).transpose()?,
        velocity: mapping.velocity.as_deref().map(find).transpose()?,
    })
}

fn parse_flag(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" | "t" => Some(true),
        "0" | "false" | "no" | "n" | "f" => Some(false),
        _ => None,
    }
}

fn parse_row(
    row: &csv::StringRecord,
    cols: &Columns,
    mapping: &ColumnMapping,
    report: &mut IngestReport,
) -> Result<PitchRecord, &'static str> {
    let get = |i: usize| row.get(i).unwrap_or("").trim();
    let pitcher_id = get(cols.pitcher);
    let batter_id = get(cols.batter);
    if pitcher_id.is_empty() || batter_id.is_empty() {
        return Err("missing_player");
    }
    let x = get(cols.plate_x).parse::<f64>();
    let z = get(cols.plate_z).parse::<f64>();
    let coords = match (x, z) {
        (Ok(x), Ok(z)) => PlateCoords::new(x, z).map_err(|_| "bad_coords")?,
        _ => return Err("bad_coords"),
    };
    let pitch_type = mapping.pitch(get(cols.pitch_type)).ok_or("unknown_pitch_type")?;
    let balls = get(cols.balls).parse::<u8>().map_err(|_| "bad_count")?;
    let strikes = get(cols.strikes).parse::<u8>().map_err(|_| "bad_count")?;
    let count = Count::new(balls, strikes).map_err(|_| "bad_count")?;
    let raw_label = get(cols.label);
    let Some(label) = mapping.label(raw_label) else {
        *report
            .unknown_label_codes
            .entry(raw_label.to_string())
            .or_default() += 1;
        return Err("unknown_label");
    };
    let swung = match cols.swung {
        Some(i) if !get(i).is_empty() => {
            let s = parse_flag(get(i)).ok_or("bad_swung")?;
            if s != label.is_swing() {
                return Err("inconsistent_label");
            }
            s
        }
        _ => label.is_swing(),
    };
    let velocity = match cols.velocity.map(get) {
        None | Some("") => None,
        Some(v) => match v.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Some(v),
            _ => return Err("bad_velocity"),
        },
    };
    Ok(PitchRecord {
        pitcher_id: pitcher_id.to_string(),
        batter_id: batter_id.to_string(),
        pitch_type,
        coords,
        count,
        swung,
        label,
        velocity,
    })
}

/// Parse one CSV stream, appending to `records` and `report`.
pub fn ingest_reader<R: Read>(
    reader: R,
    mapping: &ColumnMapping,
    records: &mut Vec<PitchRecord>,
    report: &mut IngestReport,
) -> Result<(), IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::SchemaError(format!("unreadable header: {e}")))?
        .clone();
    let cols = resolve(&headers, mapping)?;
    for row in rdr.records() {
        report.rows += 1;
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                report.reject("malformed_row");
                continue;
            }
        };
        match parse_row(&row, &cols, mapping, report) {
            Ok(r) => {
                report.accepted += 1;
                records.push(r);
            }
            Err(reason) => report.reject(reason),
        }
    }
    Ok(())
}

/// Records from every file, in file order then row order.
pub fn ingest(
    paths: &[impl AsRef<Path>],
    mapping: &ColumnMapping,
) -> Result<(Vec<PitchRecord>, IngestReport), IngestError> {
    let mut records = Vec::new();
    let mut report = IngestReport::default();
    for p in paths {
        let p = p.as_ref();
        let f = File::open(p).map_err(|e| IngestError::IoError {
            path: p.display().to_string(),
            message: e.to_string(),
        })?;
        ingest_reader(f, mapping, &mut records, &mut report)?;
    }
    Ok((records, report))
}

pub const EXPORT_HEADER: [&str; 10] = [
    "pitcher",
    "batter",
    "pitch_type",
    "plate_x",
    "plate_z",
    "balls",
    "strikes",
    "description",
    "swung",
    "velocity",
];

/// Write records in the default mapping's layout.
pub fn export_csv<W: Write>(records: &[PitchRecord], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EXPORT_HEADER)?;
    for r in records {
        let velocity = r.velocity.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            r.pitcher_id.as_str(),
            r.batter_id.as_str(),
            r.pitch_type.code(),
            &r.coords.x.to_string(),
            &r.coords.z.to_string(),
            &r.count.balls().to_string(),
            &r.count.strikes().to_string(),
            r.label.code(),
            if r.swung { "1" } else { "0" },
            &velocity,
        ])?;
    }
    w.flush()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlayerSplit {
    pub train: Vec<PitchRecord>,
    pub test: Vec<PitchRecord>,
    /// Records whose pitcher and batter fell on different sides.
    pub dropped: usize,
}

fn on_test_side(role: &str, id: &str, test_fraction: f64, seed: u64) -> bool {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(role.as_bytes());
    h.update([0]);
    h.update(id.as_bytes());
    let digest = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    let u = (u64::from_le_bytes(b) >> 11) as f64 / (1u64 << 53) as f64;
    u < test_fraction
}

/// Partition pitchers and batters by a seeded hash. A record is kept only if
/// its pitcher and batter land on the same side.
pub fn split_players(
    records: &[PitchRecord],
    test_fraction: f64,
    seed: u64,
) -> Result<PlayerSplit, IngestError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(IngestError::InvalidFraction(test_fraction));
    }
    let mut out = PlayerSplit::default();
    for r in records {
        let p = on_test_side("pitcher", &r.pitcher_id, test_fraction, seed);
        let b = on_test_side("batter", &r.batter_id, test_fraction, seed);
        match (p, b) {
            (true, true) => out.test.push(r.clone()),
            (false, false) => out.train.push(r.clone()),
            _ => out.dropped += 1,
        }
    }
    Ok(out)
}

pub fn player_ids(records: &[PitchRecord]) -> (BTreeSet<String>, BTreeSet<String>) {
    let pitchers = records.iter().map(|r| r.pitcher_id.clone()).collect();
    let batters = records.iter().map(|r| r.batter_id.clone()).collect();
    (pitchers, batters)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "pitcher,batter,pitch_type,plate_x,plate_z,balls,strikes,description,swung,velocity\n";

    fn run(body: &str) -> (Vec<PitchRecord>, IngestReport) {
        let mut records = Vec::new();
        let mut report = IngestReport::default();
        let text = format!("{HEADER}{body}");
        ingest_reader(text.as_bytes(), &ColumnMapping::default(), &mut records, &mut report)
            .unwrap();
        (records, report)
    }

    #[test]
    fn nan_coordinate_rejected() {
        let (recs, rep) = run("P1,B1,FF,0.1,2.5,0,0,ball,0,95\n\
             P1,B1,FF,NaN,2.5,1,0,ball,0,95\n\
             P1,B1,SL,-0.4,1.9,1,0,whiff,1,85\n");
        assert_eq!(recs.len(), 2);
        assert_eq!(rep.rejected, BTreeMap::from([("bad_coords".to_string(), 1)]));
        assert_eq!(rep.rows, 3);
    }

    #[test]
    fn foul_without_swing_is_inconsistent() {
        let (recs, rep) = run("P1,B1,FF,0.1,2.5,0,0,foul,0,95\n");
        assert!(recs.is_empty());
        assert_eq!(rep.rejected["inconsistent_label"], 1);
    }

    #[test]
    fn unknown_codes_are_enumerated() {
        let (_, rep) = run("P1,B1,KN,0.1,2.5,0,0,ball,0,\n\
             P1,B1,FF,0.1,2.5,0,0,pitchout,0,\n\
             P1,B1,FF,0.1,2.5,4,0,ball,0,\n");
        assert_eq!(rep.rejected["unknown_pitch_type"], 1);
        assert_eq!(rep.rejected["unknown_label"], 1);
        assert_eq!(rep.rejected["bad_count"], 1);
        assert_eq!(rep.unknown_label_codes["pitchout"], 1);
    }

    #[test]
    fn aliases_and_optional_columns() {
        let (recs, rep) = run("P1,B1,SI,0.1,2.5,0,0,swinging_strike,,\n");
        assert_eq!(rep.accepted, 1);
        assert_eq!(recs[0].pitch_type, PitchType::FT);
        assert_eq!(recs[0].label, PitchLabel::Whiff);
        assert!(recs[0].swung);
        assert_eq!(recs[0].velocity, None);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let mut records = Vec::new();
        let mut report = IngestReport::default();
        let err = ingest_reader(
            "pitcher,batter\nP1,B1\n".as_bytes(),
            &ColumnMapping::default(),
            &mut records,
            &mut report,
        );
        assert!(matches!(err, Err(IngestError::SchemaError(_))));
    }

    #[test]
    fn export_round_trip_is_byte_stable() {
        let (recs, _) = run("P1,B1,FF,0.123456789012345,2.5,0,0,ball,0,95.25\n\
             P 2,\"B,3\",CU,-1e-7,3.75,3,2,hit,1,\n");
        let mut buf = Vec::new();
        export_csv(&recs, &mut buf).unwrap();
        let mut again = Vec::new();
        let mut rep = IngestReport::default();
        ingest_reader(buf.as_slice(), &ColumnMapping::default(), &mut again, &mut rep).unwrap();
        assert_eq!(again, recs);
        let mut buf2 = Vec::new();
        export_csv(&again, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    fn synthetic(n_players: usize) -> Vec<PitchRecord> {
        let mut out = Vec::new();
        for p in 0..n_players {
            for b in 0..n_players {
                out.push(PitchRecord {
                    pitcher_id: format!("P{p}"),
                    batter_id: format!("B{b}"),
                    pitch_type: PitchType::FF,
                    coords: PlateCoords::new(0.0, 2.5).unwrap(),
                    count: Count::START,
                    swung: false,
                    label: PitchLabel::Ball,
                    velocity: None,
                });
            }
        }
        out
    }

    #[test]
    fn split_is_player_disjoint() {
        let recs = synthetic(100);
        let s = split_players(&recs, 0.2, 7).unwrap();
        let (tp, tb) = player_ids(&s.train);
        let (sp, sb) = player_ids(&s.test);
        assert!(tp.is_disjoint(&sp));
        assert!(tb.is_disjoint(&sb));
        assert_eq!(s.dropped, recs.len() - s.train.len() - s.test.len());
        assert!(!s.test.is_empty() && !s.train.is_empty());
        assert_eq!(split_players(&recs, 0.2, 7).unwrap(), s);
    }

    #[test]
    fn single_matchup_lands_on_one_side() {
        let recs = synthetic(1);
        let s = split_players(&recs, 0.5, 3).unwrap();
        assert!(s.train.len() == 1 || s.test.len() == 1 || s.dropped == 1);
        assert!(split_players(&recs, 1.0, 3).is_err());
    }
}
