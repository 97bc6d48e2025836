use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{OutcomeDistribution, OutcomeError, OutcomePredictor, SwingSample};
use crate::features::{BatterTensor, PitcherTensor};
use crate::game::{Count, NUM_COUNTS};
use crate::zones::{PitchTensor, PitchType, ZoneId, NUM_PITCH_TYPES, NUM_ZONES};

/// Outcome frequencies smoothed up the backoff chain
/// (type, zone, count) → (type, zone) → zone → global.
///
/// Each level returns `(n_ω + α·backoff_ω) / (n + α)`; the global level backs
/// off to uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TableDocument", try_from = "TableDocument")]
pub struct EmpiricalOutcomeTable {
    alpha: f64,
    counts: Vec<[u64; 4]>,
}

fn key(pitch: PitchType, zone: ZoneId, count: Count) -> usize {
    (pitch.index() * NUM_ZONES + zone.index()) * NUM_COUNTS + count.index()
}

fn smooth(n: &[u64; 4], alpha: f64, backoff: [f64; 4]) -> [f64; 4] {
    let total: u64 = n.iter().sum();
    if total == 0 {
        return backoff;
    }
    let denom = total as f64 + alpha;
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = (n[k] as f64 + alpha * backoff[k]) / denom;
    }
    out
}

fn add(acc: &mut [u64; 4], n: &[u64; 4]) {
    for k in 0..4 {
        acc[k] += n[k];
    }
}

pub fn train_empirical(
    samples: &[SwingSample],
    alpha: f64,
) -> Result<EmpiricalOutcomeTable, OutcomeError> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(OutcomeError::InvalidHyperparameter(format!("alpha = {alpha}")));
    }
    if samples.is_empty() {
        return Err(OutcomeError::EmptyTrainingSet);
    }
    let mut counts = vec![[0u64; 4]; NUM_PITCH_TYPES * NUM_ZONES * NUM_COUNTS];
    for s in samples {
        if s.zone.is_far() {
            continue;
        }
        counts[key(s.pitch, s.zone, s.count)][s.outcome.index()] += 1;
    }
    Ok(EmpiricalOutcomeTable { alpha, counts })
}

impl EmpiricalOutcomeTable {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        EmpiricalOutcomeTable {
            alpha,
            counts: self.counts.clone(),
        }
    }

    pub fn raw_count(&self, pitch: PitchType, zone: ZoneId, count: Count) -> [u64; 4] {
        self.counts[key(pitch, zone, count)]
    }

    pub fn global(&self) -> [f64; 4] {
        let mut n = [0u64; 4];
        for c in &self.counts {
            add(&mut n, c);
        }
        smooth(&n, self.alpha, [0.25; 4])
    }

    pub fn zone_level(&self, zone: ZoneId) -> [f64; 4] {
        let mut n = [0u64; 4];
        for pitch in PitchType::ALL {
            for count in Count::all() {
                add(&mut n, &self.counts[key(pitch, zone, count)]);
            }
        }
        smooth(&n, self.alpha, self.global())
    }

    pub fn type_zone_level(&self, pitch: PitchType, zone: ZoneId) -> [f64; 4] {
        let mut n = [0u64; 4];
        for count in Count::all() {
            add(&mut n, &self.counts[key(pitch, zone, count)]);
        }
        smooth(&n, self.alpha, self.zone_level(zone))
    }

    pub fn query(&self, pitch: PitchType, zone: ZoneId, count: Count) -> OutcomeDistribution {
        if zone.is_far() {
            // never swung at; the global level is the only defined answer
            return OutcomeDistribution::from_raw_unchecked(self.global());
        }
        let p = smooth(
            &self.counts[key(pitch, zone, count)],
            self.alpha,
            self.type_zone_level(pitch, zone),
        );
        OutcomeDistribution::from_raw_unchecked(p)
    }
}

impl OutcomePredictor for EmpiricalOutcomeTable {
    fn predict(
        &self,
        _pitcher: &PitcherTensor,
        _batter: &BatterTensor,
        pitch: &PitchTensor,
        count: Count,
    ) -> Result<OutcomeDistribution, OutcomeError> {
        Ok(self.query(pitch.pitch(), pitch.zone(), count))
    }
}

#[derive(Serialize, Deserialize)]
struct TableDocument {
    alpha: f64,
    /// pitch → zone → count → [strike, foul, hit, out]; zero cells omitted.
    counts: BTreeMap<PitchType, BTreeMap<String, BTreeMap<Count, [u64; 4]>>>,
}

impl From<EmpiricalOutcomeTable> for TableDocument {
    fn from(t: EmpiricalOutcomeTable) -> Self {
        let mut counts: BTreeMap<PitchType, BTreeMap<String, BTreeMap<Count, [u64; 4]>>> =
            BTreeMap::new();
        for pitch in PitchType::ALL {
            for zone in ZoneId::finite() {
                for count in Count::all() {
                    let n = t.counts[key(pitch, zone, count)];
                    if n.iter().any(|&v| v > 0) {
                        counts
                            .entry(pitch)
                            .or_default()
                            .entry(zone.to_string())
                            .or_default()
                            .insert(count, n);
                    }
                }
            }
        }
        TableDocument {
            alpha: t.alpha,
            counts,
        }
    }
}

impl TryFrom<TableDocument> for EmpiricalOutcomeTable {
    type Error = String;
    fn try_from(doc: TableDocument) -> Result<Self, String> {
        if !(doc.alpha >= 0.0) || !doc.alpha.is_finite() {
            return Err(format!("invalid alpha {}", doc.alpha));
        }
        let mut counts = vec![[0u64; 4]; NUM_PITCH_TYPES * NUM_ZONES * NUM_COUNTS];
        for (pitch, zones) in doc.counts {
            for (zone, by_count) in zones {
                let z: u8 = zone.parse().map_err(|_| format!("bad zone {zone:?}"))?;
                let zone = ZoneId::new(z).map_err(|e| e.to_string())?;
                if zone.is_far() {
                    return Err("FAR has no outcome counts".into());
                }
                for (count, n) in by_count {
                    counts[key(pitch, zone, count)] = n;
                }
            }
        }
        Ok(EmpiricalOutcomeTable {
            alpha: doc.alpha,
            counts,
        })
    }
}
