//! Frequency estimates of how pitchers and batters actually play.
//!
//! The pitcher's aim is unobservable, so the landing zone stands in for it;
//! FAR landings are attributed to the nearest zone. Per-count estimates are
//! smoothed toward the all-count pool with weight `alpha`, and swing rates of
//! the pool toward the overall swing rate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::game::{Count, PitcherAction, NUM_COUNTS};
use crate::ingest::PitchRecord;
use crate::solver::PolicyEntry;
use crate::zones::{PitchType, ZoneGrid, ZoneId, NUM_PITCH_TYPES, NUM_ZONES};

use super::simulate::SwingTable;
use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralPolicy {
    pub alpha: f64,
    /// Observed (pitch, zone) mix per count, in (pitch, zone) order.
    pub pitcher: BTreeMap<Count, Vec<PolicyEntry>>,
    /// Swing probability per count and pitch type, indexed by zone 0..=16.
    pub swing: BTreeMap<Count, BTreeMap<PitchType, Vec<f64>>>,
}

const SLOTS: usize = NUM_PITCH_TYPES * NUM_ZONES;

fn slot(p: PitchType, z: ZoneId) -> usize {
    p.index() * NUM_ZONES + z.index()
}

pub fn estimate_behavioral(
    records: &[PitchRecord],
    grid: &ZoneGrid,
    alpha: f64,
) -> Result<BehavioralPolicy, SimError> {
    if records.is_empty() {
        return Err(SimError::EmptyTrainingSet);
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(SimError::InvalidArgument(format!("alpha must be non-negative, got {alpha}")));
    }
    let mut thrown = vec![[0.0f64; SLOTS]; NUM_COUNTS];
    let mut seen = vec![[0.0f64; SLOTS]; NUM_COUNTS];
    let mut swung = vec![[0.0f64; SLOTS]; NUM_COUNTS];
    for r in records {
        let landed = grid.zone_of(r.coords).unwrap_or(ZoneId::FAR);
        let c = r.count.index();
        let aim = if landed.is_far() { grid.nearest_zone(r.coords) } else { landed };
        thrown[c][slot(r.pitch_type, aim)] += 1.0;
        if !landed.is_far() {
            let s = slot(r.pitch_type, landed);
            seen[c][s] += 1.0;
            if r.swung {
                swung[c][s] += 1.0;
            }
        }
    }
    let sum_over = |t: &[[f64; SLOTS]]| -> [f64; SLOTS] {
        let mut out = [0.0; SLOTS];
        for row in t {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    };
    let thrown_all = sum_over(&thrown);
    let seen_all = sum_over(&seen);
    let swung_all = sum_over(&swung);
    let n_all: f64 = thrown_all.iter().sum();
    let pooled_mix: Vec<f64> = thrown_all.iter().map(|v| v / n_all).collect();

    let seen_total: f64 = seen_all.iter().sum();
    let global_swing = if seen_total > 0.0 {
        swung_all.iter().sum::<f64>() / seen_total
    } else {
        0.0
    };
    let smooth = |k: f64, n: f64, prior: f64| {
        if n + alpha > 0.0 {
            (k + alpha * prior) / (n + alpha)
        } else {
            prior
        }
    };
    let pooled_swing: Vec<f64> = (0..SLOTS)
        .map(|s| smooth(swung_all[s], seen_all[s], global_swing))
        .collect();

    let mut pitcher = BTreeMap::new();
    let mut swing = BTreeMap::new();
    for count in Count::all() {
        let c = count.index();
        let n: f64 = thrown[c].iter().sum();
        let mut entries = Vec::new();
        for pitch in PitchType::ALL {
            for zone in ZoneId::finite() {
                let s = slot(pitch, zone);
                let p = smooth(thrown[c][s], n, pooled_mix[s]);
                if p > 0.0 {
                    entries.push(PolicyEntry { pitch, zone, prob: p });
                }
            }
        }
        pitcher.insert(count, entries);
        let mut by_pitch = BTreeMap::new();
        for pitch in PitchType::ALL {
            let row: Vec<f64> = ZoneId::finite()
                .map(|zone| {
                    let s = slot(pitch, zone);
                    smooth(swung[c][s], seen[c][s], pooled_swing[s])
                })
                .collect();
            by_pitch.insert(pitch, row);
        }
        swing.insert(count, by_pitch);
    }
    Ok(BehavioralPolicy {
        alpha,
        pitcher,
        swing,
    })
}

impl BehavioralPolicy {
    pub fn swing_probability(&self, count: Count, pitch: PitchType, zone: ZoneId) -> f64 {
        if zone.is_far() {
            return 0.0;
        }
        self.swing[&count][&pitch][zone.index()]
    }

    /// The pitcher mix at each count as a dense vector over `actions`. Mass on
    /// actions outside the list is dropped and the rest renormalized.
    pub fn pitcher_mixes(&self, actions: &[PitcherAction]) -> Result<Vec<Vec<f64>>, SimError> {
        Count::all()
            .map(|count| {
                let mut mix = vec![0.0; actions.len()];
                for e in &self.pitcher[&count] {
                    let a = PitcherAction {
                        pitch: e.pitch,
                        aim: e.zone,
                    };
                    if let Some(i) = actions.iter().position(|&x| x == a) {
                        mix[i] += e.prob;
                    }
                }
                let total: f64 = mix.iter().sum();
                if !(total > 0.0) {
                    return Err(SimError::IncompletePolicy(format!(
                        "behavioral pitcher at {count} uses none of the available actions"
                    )));
                }
                Ok(mix.into_iter().map(|p| p / total).collect())
            })
            .collect()
    }

    pub fn swing_table(&self) -> SwingTable {
        SwingTable::from_fn(|c, p, z| self.swing_probability(c, p, z))
    }

    /// Pitcher side from `self`, batter side from `batter`.
    pub fn with_batter_of(&self, batter: &BehavioralPolicy) -> BehavioralPolicy {
        BehavioralPolicy {
            alpha: self.alpha,
            pitcher: self.pitcher.clone(),
            swing: batter.swing.clone(),
        }
    }
}
