//! Batter patience G: swing probability at borderline ball zones, and the
//! obvious-take override derived from it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{BatterTensor, PLAYER_TENSOR_LEN};
use crate::game::Count;
use crate::zones::{PitchType, ZoneId, NUM_PITCH_TYPES};

pub const DEFAULT_THRESHOLD: f64 = 0.8;
pub const MIN_CELL_RECORDS: usize = 30;
const NUM_BORDERLINE: usize = 8;
const FIRST_BORDERLINE: usize = 9;
const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatienceError {
    #[error("no out-of-zone training records")]
    EmptyTrainingSet,
    #[error("zone {0} is not a borderline ball zone")]
    NotBorderline(ZoneId),
    #[error("threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("sample references unknown batter index {0}")]
    BadBatterIndex(usize),
}

fn borderline_slot(zone: ZoneId) -> Result<usize, PatienceError> {
    if zone.is_borderline() {
        Ok(zone.index() - FIRST_BORDERLINE)
    } else {
        Err(PatienceError::NotBorderline(zone))
    }
}

/// Per-(pitch, borderline zone) forced-take flags for one batter and count.
/// FAR is always forced; strike zones never are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatienceOverride {
    pub threshold: f64,
    forced: [[bool; NUM_BORDERLINE]; NUM_PITCH_TYPES],
}

impl PatienceOverride {
    pub fn none(threshold: f64) -> Self {
        PatienceOverride {
            threshold,
            forced: [[false; NUM_BORDERLINE]; NUM_PITCH_TYPES],
        }
    }

    /// Panics on a zone that is not borderline.
    pub fn set_forced(&mut self, pitch: PitchType, zone: ZoneId, forced: bool) {
        let slot = borderline_slot(zone).expect("borderline zone");
        self.forced[pitch.index()][slot] = forced;
    }

    pub fn forced_take(&self, pitch: PitchType, zone: ZoneId) -> bool {
        if zone.is_far() {
            return true;
        }
        match borderline_slot(zone) {
            Ok(slot) => self.forced[pitch.index()][slot],
            Err(_) => false,
        }
    }

    pub fn forced_zones(&self) -> Vec<(PitchType, ZoneId)> {
        let mut out = Vec::new();
        for pitch in PitchType::ALL {
            for zone in ZoneId::borderline() {
                if self.forced_take(pitch, zone) {
                    out.push((pitch, zone));
                }
            }
        }
        out
    }
}

/// Forced take iff the take probability `1 - p_swing` reaches `threshold`.
pub fn is_forced_take(p_swing: f64, threshold: f64) -> bool {
    1.0 - p_swing >= threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatienceConfig {
    pub threshold: f64,
    pub min_cell_records: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for PatienceConfig {
    fn default() -> Self {
        PatienceConfig {
            threshold: DEFAULT_THRESHOLD,
            min_cell_records: MIN_CELL_RECORDS,
            learning_rate: 0.05,
            epochs: 400,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// One out-of-zone pitch and whether the batter swung.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatienceSample {
    pub batter: usize,
    pub pitch: PitchType,
    pub zone: ZoneId,
    pub count: Count,
    pub swung: bool,
}

#[derive(Debug, Clone, Default)]
pub struct PatienceDataset {
    pub batters: Vec<BatterTensor>,
    pub samples: Vec<PatienceSample>,
}

/// Aggregated rows sharing one feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticExample {
    pub features: Vec<f64>,
    pub weight: f64,
    pub positives: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic regression on standardized inputs; `params` holds the weights
/// followed by the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub params: Vec<f64>,
    pub l2: f64,
}

impl LogisticModel {
    pub fn zeros(mean: Vec<f64>, scale: Vec<f64>, l2: f64) -> Self {
        let n = mean.len();
        LogisticModel {
            mean,
            scale,
            params: vec![0.0; n + 1],
            l2,
        }
    }

    fn standardized(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) * s)
            .collect()
    }

    fn logit_std(&self, z: &[f64]) -> f64 {
        let n = self.mean.len();
        self.params[n] + self.params[..n].iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit_std(&self.standardized(x)))
    }

    /// Weighted mean cross-entropy plus `l2/2 · |w|²` (intercept unpenalized)
    /// and its gradient.
    pub fn loss_and_gradient(&self, examples: &[LogisticExample]) -> (f64, Vec<f64>) {
        let std: Vec<Vec<f64>> = examples.iter().map(|e| self.standardized(&e.features)).collect();
        self.loss_grad_std(examples, &std)
    }

    fn loss_grad_std(&self, examples: &[LogisticExample], std: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let n = self.mean.len();
        let total: f64 = examples.iter().map(|e| e.weight).sum();
        let mut grad = vec![0.0; n + 1];
        let mut loss = 0.0;
        for (e, z) in examples.iter().zip(std) {
            let s = self.logit_std(z);
            let neg = e.weight - e.positives;
            loss += e.positives * softplus(-s) + neg * softplus(s);
            let g = (e.weight * sigmoid(s) - e.positives) / total;
            for (gi, zi) in grad[..n].iter_mut().zip(z) {
                *gi += g * zi;
            }
            grad[n] += g;
        }
        loss /= total;
        for i in 0..n {
            loss += 0.5 * self.l2 * self.params[i] * self.params[i];
            grad[i] += self.l2 * self.params[i];
        }
        (loss, grad)
    }

    /// Full-batch Adam from the zero initialization.
    pub fn fit(
        examples: &[LogisticExample],
        l2: f64,
        learning_rate: f64,
        epochs: usize,
    ) -> LogisticModel {
        let dim = examples[0].features.len();
        let total: f64 = examples.iter().map(|e| e.weight).sum();
        let mut mean = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for e in examples {
            for (k, &v) in e.features.iter().enumerate() {
                mean[k] += e.weight * v / total;
                sq[k] += e.weight * v * v / total;
            }
        }
        let scale = mean
            .iter()
            .zip(&sq)
            .map(|(m, s)| {
                let sd = (s - m * m).max(0.0).sqrt();
                if sd > STD_FLOOR {
                    1.0 / sd
                } else {
                    0.0
                }
            })
            .collect();
        let mut model = LogisticModel::zeros(mean, scale, l2);
        let std: Vec<Vec<f64>> = examples.iter().map(|e| model.standardized(&e.features)).collect();
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let mut m1 = vec![0.0; dim + 1];
        let mut m2 = vec![0.0; dim + 1];
        for t in 1..=epochs {
            let (_, g) = model.loss_grad_std(examples, &std);
            let c1 = 1.0 - f64::powi(b1, t as i32);
            let c2 = 1.0 - f64::powi(b2, t as i32);
            for i in 0..=dim {
                m1[i] = b1 * m1[i] + (1.0 - b1) * g[i];
                m2[i] = b2 * m2[i] + (1.0 - b2) * g[i] * g[i];
                model.params[i] -= learning_rate * (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
            }
        }
        model
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatienceClassifier {
    pub config: PatienceConfig,
    /// Keyed by pitch code then zone; cells below the record minimum are
    /// absent and use `global`.
    pub cells: BTreeMap<PitchType, BTreeMap<ZoneId, LogisticModel>>,
    /// Trained on every borderline record with a zone one-hot appended.
    pub global: LogisticModel,
}

fn cell_features(batter: &BatterTensor, count: Count) -> Vec<f64> {
    let mut f = Vec::with_capacity(PLAYER_TENSOR_LEN + 2 + NUM_BORDERLINE);
    f.extend_from_slice(batter.values());
    f.push(count.balls() as f64);
    f.push(count.strikes() as f64);
    f
}

fn global_features(batter: &BatterTensor, count: Count, slot: usize) -> Vec<f64> {
    let mut f = cell_features(batter, count);
    for k in 0..NUM_BORDERLINE {
        f.push(if k == slot { 1.0 } else { 0.0 });
    }
    f
}

/// Group samples with identical features so each gradient step touches every
/// distinct (batter, count[, zone]) once.
fn aggregate(
    data: &PatienceDataset,
    samples: &[&PatienceSample],
    global: bool,
) -> Vec<LogisticExample> {
    let mut groups: BTreeMap<(usize, usize, usize), (f64, f64)> = BTreeMap::new();
    for s in samples {
        let slot = if global {
            borderline_slot(s.zone).unwrap_or(0)
        } else {
            0
        };
        let g = groups.entry((s.batter, s.count.index(), slot)).or_insert((0.0, 0.0));
        g.0 += 1.0;
        if s.swung {
            g.1 += 1.0;
        }
    }
    groups
        .into_iter()
        .map(|((b, c, slot), (weight, positives))| {
            let count = Count::from_index(c);
            let features = if global {
                global_features(&data.batters[b], count, slot)
            } else {
                cell_features(&data.batters[b], count)
            };
            LogisticExample {
                features,
                weight,
                positives,
            }
        })
        .collect()
}

pub fn train_patience(
    data: &PatienceDataset,
    config: PatienceConfig,
) -> Result<PatienceClassifier, PatienceError> {
    if !(config.threshold > 0.0 && config.threshold < 1.0) {
        return Err(PatienceError::InvalidThreshold(config.threshold));
    }
    if !(config.learning_rate > 0.0) || !(config.l2 >= 0.0) {
        return Err(PatienceError::InvalidHyperparameter(
            "learning_rate must be positive and l2 non-negative".into(),
        ));
    }
    for s in &data.samples {
        if s.batter >= data.batters.len() {
            return Err(PatienceError::BadBatterIndex(s.batter));
        }
    }
    let usable: Vec<&PatienceSample> = data
        .samples
        .iter()
        .filter(|s| s.zone.is_borderline())
        .collect();
    if usable.is_empty() {
        return Err(PatienceError::EmptyTrainingSet);
    }
    let global = LogisticModel::fit(
        &aggregate(data, &usable, true),
        config.l2,
        config.learning_rate,
        config.epochs,
    );
    let mut cells: BTreeMap<PitchType, BTreeMap<ZoneId, LogisticModel>> = BTreeMap::new();
    for pitch in PitchType::ALL {
        for zone in ZoneId::borderline() {
            let in_cell: Vec<&PatienceSample> = usable
                .iter()
                .copied()
                .filter(|s| s.pitch == pitch && s.zone == zone)
                .collect();
            if in_cell.len() < config.min_cell_records {
                continue;
            }
            let model = LogisticModel::fit(
                &aggregate(data, &in_cell, false),
                config.l2,
                config.learning_rate,
                config.epochs,
            );
            cells.entry(pitch).or_default().insert(zone, model);
        }
    }
    Ok(PatienceClassifier {
        config,
        cells,
        global,
    })
}

impl PatienceClassifier {
    pub fn has_cell_model(&self, pitch: PitchType, zone: ZoneId) -> bool {
        self.cells.get(&pitch).is_some_and(|m| m.contains_key(&zone))
    }

    pub fn swing_probability(
        &self,
        batter: &BatterTensor,
        pitch: PitchType,
        zone: ZoneId,
        count: Count,
    ) -> Result<f64, PatienceError> {
        let slot = borderline_slot(zone)?;
        match self.cells.get(&pitch).and_then(|m| m.get(&zone)) {
            Some(m) => Ok(m.probability(&cell_features(batter, count))),
            None => Ok(self
                .global
                .probability(&global_features(batter, count, slot))),
        }
    }

    pub fn build_override(
        &self,
        batter: &BatterTensor,
        count: Count,
        threshold: f64,
    ) -> Result<PatienceOverride, PatienceError> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(PatienceError::InvalidThreshold(threshold));
        }
        let mut out = PatienceOverride::none(threshold);
        for pitch in PitchType::ALL {
            for zone in ZoneId::borderline() {
                let p = self.swing_probability(batter, pitch, zone, count)?;
                out.set_forced(pitch, zone, is_forced_take(p, threshold));
            }
        }
        Ok(out)
    }

    /// One override per count, in count-index order.
    pub fn build_overrides(
        &self,
        batter: &BatterTensor,
        threshold: f64,
    ) -> Result<Vec<PatienceOverride>, PatienceError> {
        Count::all()
            .map(|c| self.build_override(batter, c, threshold))
            .collect()
    }
}
