//! Swing-outcome distribution D_ω: probabilities of a whiff strike, foul,
//! hit and in-play out conditional on the batter swinging.

mod empirical;
mod softmax;

pub use empirical::{train_empirical, EmpiricalOutcomeTable};
pub use softmax::{train_softmax, LateFusionSoftmax, SoftmaxConfig, TrainedSoftmax};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{BatterTensor, PitcherTensor};
use crate::game::{Count, SwingOutcome, NUM_COUNTS};
use crate::zones::{PitchTensor, PitchType, ZoneId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OutcomeError {
    #[error("no training records")]
    EmptyTrainingSet,
    #[error("need at least {needed} training records, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("training diverged in epoch {epoch} (non-finite loss); lower the learning rate")]
    DivergedTraining { epoch: usize },
    #[error("tensor shape mismatch: expected {expected} values, got {got}")]
    ShapeError { expected: usize, got: usize },
    #[error("probabilities {0:?} are not a distribution")]
    InvalidDistribution([f64; 4]),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("sample references unknown player index {0}")]
    BadPlayerIndex(usize),
}

/// Probabilities over the four swing outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub p_strike: f64,
    pub p_foul: f64,
    pub p_hit: f64,
    pub p_out: f64,
}

impl OutcomeDistribution {
    pub fn new(p_strike: f64, p_foul: f64, p_hit: f64, p_out: f64) -> Result<Self, OutcomeError> {
        let d = Self::from_raw_unchecked([p_strike, p_foul, p_hit, p_out]);
        if !d.is_valid(1e-9) {
            return Err(OutcomeError::InvalidDistribution(d.to_array()));
        }
        Ok(d)
    }

    pub fn from_array(p: [f64; 4]) -> Result<Self, OutcomeError> {
        Self::new(p[0], p[1], p[2], p[3])
    }

    /// No validation; for tests that need malformed input.
    pub fn from_raw_unchecked(p: [f64; 4]) -> Self {
        OutcomeDistribution {
            p_strike: p[0],
            p_foul: p[1],
            p_hit: p[2],
            p_out: p[3],
        }
    }

    pub fn uniform() -> Self {
        Self::from_raw_unchecked([0.25; 4])
    }

    pub fn point(o: SwingOutcome) -> Self {
        let mut p = [0.0; 4];
        p[o.index()] = 1.0;
        Self::from_raw_unchecked(p)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.p_strike, self.p_foul, self.p_hit, self.p_out]
    }

    pub fn prob(&self, o: SwingOutcome) -> f64 {
        self.to_array()[o.index()]
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let a = self.to_array();
        a.iter().all(|p| p.is_finite() && *p >= 0.0) && (a.iter().sum::<f64>() - 1.0).abs() <= tol
    }
}

/// Anything that maps (pitcher, batter, pitch, count) to a swing-outcome
/// distribution.
pub trait OutcomePredictor: Send + Sync {
    fn predict(
        &self,
        pitcher: &PitcherTensor,
        batter: &BatterTensor,
        pitch: &PitchTensor,
        count: Count,
    ) -> Result<OutcomeDistribution, OutcomeError>;
}

/// One observed swing. Players are indices into the owning dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingSample {
    pub pitcher: usize,
    pub batter: usize,
    pub pitch: PitchType,
    pub zone: ZoneId,
    pub count: Count,
    pub outcome: SwingOutcome,
}

#[derive(Debug, Clone, Default)]
pub struct SwingDataset {
    pub pitchers: Vec<PitcherTensor>,
    pub batters: Vec<BatterTensor>,
    pub samples: Vec<SwingSample>,
}

impl SwingDataset {
    pub fn validate(&self) -> Result<(), OutcomeError> {
        for s in &self.samples {
            if s.pitcher >= self.pitchers.len() {
                return Err(OutcomeError::BadPlayerIndex(s.pitcher));
            }
            if s.batter >= self.batters.len() {
                return Err(OutcomeError::BadPlayerIndex(s.batter));
            }
        }
        Ok(())
    }

    /// Same players, a subset of samples.
    pub fn subset(&self, keep: impl Fn(usize, &SwingSample) -> bool) -> SwingDataset {
        SwingDataset {
            pitchers: self.pitchers.clone(),
            batters: self.batters.clone(),
            samples: self
                .samples
                .iter()
                .enumerate()
                .filter(|(i, s)| keep(*i, s))
                .map(|(_, s)| *s)
                .collect(),
        }
    }
}

/// A trained D_ω of either kind, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeModel {
    Empirical(EmpiricalOutcomeTable),
    Softmax(LateFusionSoftmax),
}

impl OutcomePredictor for OutcomeModel {
    fn predict(
        &self,
        pitcher: &PitcherTensor,
        batter: &BatterTensor,
        pitch: &PitchTensor,
        count: Count,
    ) -> Result<OutcomeDistribution, OutcomeError> {
        match self {
            OutcomeModel::Empirical(m) => m.predict(pitcher, batter, pitch, count),
            OutcomeModel::Softmax(m) => m.predict(pitcher, batter, pitch, count),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub count: Count,
    pub in_zone: bool,
    pub n: usize,
    pub predicted: [f64; 4],
    pub empirical: [f64; 4],
}

impl CalibrationRow {
    pub fn max_abs_gap(&self) -> f64 {
        self.predicted
            .iter()
            .zip(&self.empirical)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n: usize,
    pub log_loss: f64,
    /// Non-empty (count, in-zone) buckets, count-major.
    pub calibration: Vec<CalibrationRow>,
}

/// Mean negative log-likelihood and per-bucket calibration on held-out swings.
pub fn evaluate(
    model: &dyn OutcomePredictor,
    data: &SwingDataset,
) -> Result<Evaluation, OutcomeError> {
    if data.samples.is_empty() {
        return Err(OutcomeError::EmptyTrainingSet);
    }
    data.validate()?;
    let mut pred = vec![[0.0; 4]; NUM_COUNTS * 2];
    let mut emp = vec![[0.0; 4]; NUM_COUNTS * 2];
    let mut n = vec![0usize; NUM_COUNTS * 2];
    let mut nll = 0.0;
    for s in &data.samples {
        let tensor = softmax::pitch_tensor(s.pitch, s.zone)?;
        let d = model.predict(&data.pitchers[s.pitcher], &data.batters[s.batter], &tensor, s.count)?;
        let p = d.prob(s.outcome);
        nll -= p.max(1e-300).ln();
        let b = s.count.index() * 2 + usize::from(s.zone.is_strike());
        n[b] += 1;
        for (acc, v) in pred[b].iter_mut().zip(d.to_array()) {
            *acc += v;
        }
        emp[b][s.outcome.index()] += 1.0;
    }
    let mut calibration = Vec::new();
    for count in Count::all() {
        for in_zone in [false, true] {
            let b = count.index() * 2 + usize::from(in_zone);
            if n[b] == 0 {
                continue;
            }
            let k = n[b] as f64;
            calibration.push(CalibrationRow {
                count,
                in_zone,
                n: n[b],
                predicted: pred[b].map(|v| v / k),
                empirical: emp[b].map(|v| v / k),
            });
        }
    }
    Ok(Evaluation {
        n: data.samples.len(),
        log_loss: nll / data.samples.len() as f64,
        calibration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(OutcomeDistribution);

    impl OutcomePredictor for Fixed {
        fn predict(
            &self,
            _: &PitcherTensor,
            _: &BatterTensor,
            _: &PitchTensor,
            _: Count,
        ) -> Result<OutcomeDistribution, OutcomeError> {
            Ok(self.0)
        }
    }

    fn data(outcome: SwingOutcome, n: usize) -> SwingDataset {
        SwingDataset {
            pitchers: vec![PitcherTensor::zeros()],
            batters: vec![BatterTensor::zeros()],
            samples: (0..n)
                .map(|i| SwingSample {
                    pitcher: 0,
                    batter: 0,
                    pitch: PitchType::FF,
                    zone: ZoneId::new((i % 17) as u8).unwrap(),
                    count: Count::from_index(i % 12),
                    outcome,
                })
                .collect(),
        }
    }

    #[test]
    fn validation() {
        assert!(OutcomeDistribution::new(0.25, 0.25, 0.25, 0.25).is_ok());
        assert!(OutcomeDistribution::new(0.5, 0.5, 0.5, 0.0).is_err());
        assert!(OutcomeDistribution::new(-0.1, 0.6, 0.25, 0.25).is_err());
        assert!(OutcomeDistribution::new(f64::NAN, 0.5, 0.25, 0.25).is_err());
        assert_eq!(OutcomeDistribution::point(SwingOutcome::Hit).p_hit, 1.0);
    }

    #[test]
    fn perfect_model_has_zero_loss() {
        let m = Fixed(OutcomeDistribution::point(SwingOutcome::Foul));
        let e = evaluate(&m, &data(SwingOutcome::Foul, 50)).unwrap();
        assert_eq!(e.log_loss, 0.0);
        assert!(e.calibration.iter().all(|r| r.max_abs_gap() == 0.0));
    }

    #[test]
    fn uniform_model_loss_is_ln4() {
        let m = Fixed(OutcomeDistribution::uniform());
        let e = evaluate(&m, &data(SwingOutcome::Out, 40)).unwrap();
        assert!((e.log_loss - 4f64.ln()).abs() < 1e-12);
        assert_eq!(e.calibration.iter().map(|r| r.n).sum::<usize>(), 40);
    }

    #[test]
    fn empty_input_rejected() {
        let m = Fixed(OutcomeDistribution::uniform());
        assert_eq!(
            evaluate(&m, &data(SwingOutcome::Out, 0)),
            Err(OutcomeError::EmptyTrainingSet)
        );
    }
}
