//! Pitcher control: a per-pitch-type Gaussian aiming-error model.
//!
//! Parameters are identified from 3-0 pitches, where a pitcher is assumed to
//! aim at a habitual strike target. The least likely fraction of points under
//! a first maximum-likelihood fit is pruned and the Gaussian refit. Pitchers
//! with too few 3-0 pitches of a type fall back to a ridge regression from the
//! pitcher tensor. For a given aim, only the covariance is carried over: the
//! Gaussian is re-centered on the aim zone's centroid and integrated over the
//! grid cells.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{PitcherTensor, PLAYER_TENSOR_LEN};
use crate::quadrature::Bivariate;
use crate::zones::{
    PitchType, PlateCoords, ZoneGrid, ZoneId, GRID_SIZE, NUM_LOCATIONS, NUM_PITCH_TYPES, NUM_ZONES,
};

/// Fits need strictly more than this many points.
pub const MIN_FIT_POINTS: usize = 11;
pub const DEFAULT_KEEP_FRACTION: f64 = 0.95;
pub const MIN_REGRESSION_PITCHERS: usize = 20;
pub const DEFAULT_MIN_VARIANCE: f64 = 0.05;
const CELL_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("point cloud has a singular covariance")]
    DegenerateCloud,
    #[error("keep fraction must lie in (0, 1], got {0}")]
    InvalidKeepFraction(f64),
    #[error("Gaussian is not positive definite")]
    NotPositiveDefinite,
    #[error("cannot aim at the FAR region")]
    FarAim,
    #[error("quadrature did not reach tolerance in cell ({row}, {col})")]
    QuadratureError { row: usize, col: usize },
    #[error("no control model for {0}: too few 3-0 pitches and no trained regressor")]
    NoControlModel(PitchType),
    #[error("need at least {needed} training pitchers for {pitch}, got {got}")]
    InsufficientTrainingSet {
        pitch: PitchType,
        needed: usize,
        got: usize,
    },
    #[error("invalid regularization weight {0}")]
    InvalidLambda(f64),
}

/// Mean and covariance of a pitcher's location error for one pitch type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 5]", try_from = "[f64; 5]")]
pub struct GaussianControl {
    pub mu_x: f64,
    pub mu_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov_xy: f64,
}

impl From<GaussianControl> for [f64; 5] {
    fn from(g: GaussianControl) -> Self {
        g.to_array()
    }
}

impl TryFrom<[f64; 5]> for GaussianControl {
    type Error = ControlError;
    fn try_from(a: [f64; 5]) -> Result<Self, ControlError> {
        let g = GaussianControl::from_array(a);
        g.validate()?;
        Ok(g)
    }
}

impl GaussianControl {
    pub fn from_array(a: [f64; 5]) -> Self {
        GaussianControl {
            mu_x: a[0],
            mu_y: a[1],
            var_x: a[2],
            var_y: a[3],
            cov_xy: a[4],
        }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.mu_x, self.mu_y, self.var_x, self.var_y, self.cov_xy]
    }

    pub fn isotropic(var: f64) -> Self {
        GaussianControl {
            mu_x: 0.0,
            mu_y: 0.0,
            var_x: var,
            var_y: var,
            cov_xy: 0.0,
        }
    }

    /// Generalized variance.
    pub fn det(&self) -> f64 {
        self.var_x * self.var_y - self.cov_xy * self.cov_xy
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let finite = self.to_array().iter().all(|v| v.is_finite());
        if !finite || self.var_x <= 0.0 || self.var_y <= 0.0 || self.det() <= 0.0 {
            return Err(ControlError::NotPositiveDefinite);
        }
        Ok(())
    }

    /// Squared Mahalanobis distance; larger means less likely.
    pub fn mahalanobis2(&self, p: PlateCoords) -> f64 {
        let dx = p.x - self.mu_x;
        let dy = p.z - self.mu_y;
        (self.var_y * dx * dx - 2.0 * self.cov_xy * dx * dy + self.var_x * dy * dy) / self.det()
    }

    /// Covariance multiplied by `factor`, mean unchanged.
    pub fn scaled(&self, factor: f64) -> Self {
        GaussianControl {
            var_x: self.var_x * factor,
            var_y: self.var_y * factor,
            cov_xy: self.cov_xy * factor,
            ..*self
        }
    }
}

/// Maximum-likelihood Gaussian (1/n covariance).
pub fn fit_gaussian(points: &[PlateCoords]) -> Result<GaussianControl, ControlError> {
    if points.len() < MIN_FIT_POINTS {
        return Err(ControlError::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let my = points.iter().map(|p| p.z).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p.x - mx;
        let dy = p.z - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let g = GaussianControl {
        mu_x: mx,
        mu_y: my,
        var_x: sxx / n,
        var_y: syy / n,
        cov_xy: sxy / n,
    };
    let scale = g.var_x * g.var_y;
    if !(scale > 0.0) || g.det() <= 1e-12 * scale {
        return Err(ControlError::DegenerateCloud);
    }
    Ok(g)
}

/// Fit, drop the `floor((1 - keep_fraction) * n)` least likely points (ties
/// dropped in input order), and refit on the rest.
pub fn prune_refit(
    points: &[PlateCoords],
    keep_fraction: f64,
) -> Result<GaussianControl, ControlError> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(ControlError::InvalidKeepFraction(keep_fraction));
    }
    let first = fit_gaussian(points)?;
    let n = points.len();
    let drop = (((1.0 - keep_fraction) * n as f64) + 1e-9).floor() as usize;
    if drop == 0 {
        return Ok(first);
    }
    let d2: Vec<f64> = points.iter().map(|&p| first.mahalanobis2(p)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // least likely first; stable sort keeps earlier indices first among ties
    order.sort_by(|&a, &b| d2[b].total_cmp(&d2[a]));
    let mut dropped = vec![false; n];
    for &i in &order[..drop] {
        dropped[i] = true;
    }
    let kept: Vec<PlateCoords> = points
        .iter()
        .zip(&dropped)
        .filter(|(_, &d)| !d)
        .map(|(&p, _)| p)
        .collect();
    fit_gaussian(&kept)
}

/// Landing distribution over the 17 zones and FAR (index 17) for a pitch
/// aimed at `aim`. The fitted mean is discarded; the Gaussian is centered on
/// the aim zone's centroid.
pub fn aim_distribution(
    g: &GaussianControl,
    grid: &ZoneGrid,
    aim: ZoneId,
) -> Result<[f64; NUM_LOCATIONS], ControlError> {
    if aim.is_far() {
        return Err(ControlError::FarAim);
    }
    g.validate()?;
    let (cx, cz) = grid.centroid(aim).map_err(|_| ControlError::FarAim)?;
    let density = Bivariate {
        mx: cx,
        mz: cz,
        vx: g.var_x,
        vz: g.var_y,
        c: g.cov_xy,
    };
    let mut out = [0.0; NUM_LOCATIONS];
    for row in 0..GRID_SIZE {
        for col in 0..GRID_SIZE {
            let mass = density
                .mass(&grid.cell_rect(row, col), CELL_TOLERANCE)
                .ok_or(ControlError::QuadratureError { row, col })?;
            out[grid.cell_zone(row, col).index()] += mass.max(0.0);
        }
    }
    let inside: f64 = out[..NUM_ZONES].iter().sum();
    if inside > 1.0 {
        for v in &mut out[..NUM_ZONES] {
            *v /= inside;
        }
        out[ZoneId::FAR.index()] = 0.0;
    } else {
        out[ZoneId::FAR.index()] = 1.0 - inside;
    }
    Ok(out)
}

/// Landing distributions keyed by (pitch type, aim zone).
#[derive(Debug, Clone, PartialEq)]
pub struct AimDistribution {
    rows: Vec<Option<[f64; NUM_LOCATIONS]>>,
}

impl Default for AimDistribution {
    fn default() -> Self {
        Self::new()
    }
}

impl AimDistribution {
    pub fn new() -> Self {
        AimDistribution {
            rows: vec![None; NUM_PITCH_TYPES * NUM_ZONES],
        }
    }

    pub fn set(&mut self, pitch: PitchType, aim: ZoneId, row: [f64; NUM_LOCATIONS]) {
        assert!(!aim.is_far());
        self.rows[pitch.index() * NUM_ZONES + aim.index()] = Some(row);
    }

    pub fn get(&self, pitch: PitchType, aim: ZoneId) -> Option<&[f64; NUM_LOCATIONS]> {
        if aim.is_far() {
            return None;
        }
        self.rows[pitch.index() * NUM_ZONES + aim.index()].as_ref()
    }

    /// Quadrature rows for every aim of every pitch type in `controls`.
    pub fn from_controls(
        controls: &BTreeMap<PitchType, GaussianControl>,
        grid: &ZoneGrid,
    ) -> Result<Self, ControlError> {
        let mut out = Self::new();
        for (&pitch, g) in controls {
            for aim in ZoneId::finite() {
                out.set(pitch, aim, aim_distribution(g, grid, aim)?);
            }
        }
        Ok(out)
    }

    /// Every row mixed with a point mass on FAR of weight `far_weight`.
    pub fn with_far_mixture(mut self, far_weight: f64) -> Self {
        for row in self.rows.iter_mut().flatten() {
            for v in row.iter_mut() {
                *v *= 1.0 - far_weight;
            }
            row[ZoneId::FAR.index()] += far_weight;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlSource {
    Empirical,
    Regressed,
    /// League-wide fit of the pitch type, when neither of the above exists.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedControl {
    pub params: GaussianControl,
    pub source: ControlSource,
}

/// Ridge map from one flattened pitcher tensor to the five Gaussian
/// parameters, with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub n_train: usize,
    pub feature_mean: Vec<f64>,
    pub target_mean: [f64; 5],
    /// Row-major `PLAYER_TENSOR_LEN × 5`.
    pub weights: Vec<f64>,
}

impl RidgeModel {
    pub fn fit(features: &[&[f64]], targets: &[[f64; 5]], lambda: f64) -> Self {
        let n = features.len();
        let p = PLAYER_TENSOR_LEN;
        let mut feature_mean = vec![0.0; p];
        for f in features {
            for (m, v) in feature_mean.iter_mut().zip(f.iter()) {
                *m += v / n as f64;
            }
        }
        let mut target_mean = [0.0; 5];
        for t in targets {
            for k in 0..5 {
                target_mean[k] += t[k] / n as f64;
            }
        }
        let x = DMatrix::from_fn(n, p, |i, j| features[i][j] - feature_mean[j]);
        let y = DMatrix::from_fn(n, 5, |i, k| targets[i][k] - target_mean[k]);
        let svd = x.svd(true, true);
        let u = svd.u.expect("u requested");
        let v_t = svd.v_t.expect("v_t requested");
        let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let uty = u.transpose() * &y;
        let mut scaled = uty.clone();
        for (i, &s) in svd.singular_values.iter().enumerate() {
            let factor = if s <= 1e-10 * s_max.max(1e-300) {
                0.0
            } else {
                s / (s * s + lambda)
            };
            for k in 0..5 {
                scaled[(i, k)] *= factor;
            }
        }
        let w = v_t.transpose() * scaled;
        let mut weights = vec![0.0; p * 5];
        for j in 0..p {
            for k in 0..5 {
                weights[j * 5 + k] = w[(j, k)];
            }
        }
        RidgeModel {
            n_train: n,
            feature_mean,
            target_mean,
            weights,
        }
    }

    pub fn predict_raw(&self, features: &[f64]) -> [f64; 5] {
        let mut out = self.target_mean;
        for (j, (&f, &m)) in features.iter().zip(&self.feature_mean).enumerate() {
            let d = f - m;
            if d != 0.0 {
                for k in 0..5 {
                    out[k] += d * self.weights[j * 5 + k];
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRegressor {
    pub lambda: f64,
    pub min_variance: f64,
    pub models: BTreeMap<PitchType, RidgeModel>,
}

impl ControlRegressor {
    pub fn predict(&self, pitch: PitchType, tensor: &PitcherTensor) -> Option<GaussianControl> {
        let raw = self.models.get(&pitch)?.predict_raw(tensor.values());
        let var_x = raw[2].max(self.min_variance);
        let var_y = raw[3].max(self.min_variance);
        let bound = 0.99 * (var_x * var_y).sqrt();
        Some(GaussianControl {
            mu_x: raw[0],
            mu_y: raw[1],
            var_x,
            var_y,
            cov_xy: raw[4].clamp(-bound, bound),
        })
    }
}

/// Train one ridge model for a single pitch type.
pub fn train_ridge_for_type(
    pitch: PitchType,
    pairs: &[(&PitcherTensor, GaussianControl)],
    lambda: f64,
) -> Result<RidgeModel, ControlError> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(ControlError::InvalidLambda(lambda));
    }
    if pairs.len() < MIN_REGRESSION_PITCHERS {
        return Err(ControlError::InsufficientTrainingSet {
            pitch,
            needed: MIN_REGRESSION_PITCHERS,
            got: pairs.len(),
        });
    }
    let features: Vec<&[f64]> = pairs.iter().map(|(t, _)| t.values()).collect();
    let targets: Vec<[f64; 5]> = pairs.iter().map(|(_, g)| g.to_array()).collect();
    Ok(RidgeModel::fit(&features, &targets, lambda))
}

/// Regressor over every pitch type with enough training pitchers. Fails only
/// when no pitch type qualifies.
pub fn train_control_regressor(
    pairs: &[(PitchType, &PitcherTensor, GaussianControl)],
    lambda: f64,
    min_variance: f64,
) -> Result<ControlRegressor, ControlError> {
    let mut by_type: BTreeMap<PitchType, Vec<(&PitcherTensor, GaussianControl)>> = BTreeMap::new();
    for &(p, t, g) in pairs {
        by_type.entry(p).or_default().push((t, g));
    }
    let mut models = BTreeMap::new();
    let mut last_err = ControlError::InsufficientTrainingSet {
        pitch: PitchType::FF,
        needed: MIN_REGRESSION_PITCHERS,
        got: 0,
    };
    for (pitch, items) in &by_type {
        match train_ridge_for_type(*pitch, items, lambda) {
            Ok(m) => {
                models.insert(*pitch, m);
            }
            Err(e @ ControlError::InsufficientTrainingSet { .. }) => last_err = e,
            Err(e) => return Err(e),
        }
    }
    if models.is_empty() {
        return Err(last_err);
    }
    Ok(ControlRegressor {
        lambda,
        min_variance,
        models,
    })
}

/// Per-pitch-type control for one pitcher: pruned empirical fits where there
/// are more than 10 3-0 pitches of the type, regressor predictions otherwise.
pub fn fit_control_for_pitcher(
    three_oh: &[(PitchType, PlateCoords)],
    repertoire: &[PitchType],
    tensor: &PitcherTensor,
    regressor: Option<&ControlRegressor>,
    keep_fraction: f64,
) -> Result<BTreeMap<PitchType, FittedControl>, ControlError> {
    let mut out = BTreeMap::new();
    for &pitch in repertoire {
        let points: Vec<PlateCoords> = three_oh
            .iter()
            .filter(|(p, _)| *p == pitch)
            .map(|&(_, c)| c)
            .collect();
        let empirical = if points.len() >= MIN_FIT_POINTS {
            match prune_refit(&points, keep_fraction) {
                Ok(g) => Some(g),
                Err(ControlError::DegenerateCloud) | Err(ControlError::InsufficientData { .. }) => {
                    None
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let fitted = match empirical {
            Some(params) => FittedControl {
                params,
                source: ControlSource::Empirical,
            },
            None => {
                let params = regressor
                    .and_then(|r| r.predict(pitch, tensor))
                    .ok_or(ControlError::NoControlModel(pitch))?;
                FittedControl {
                    params,
                    source: ControlSource::Regressed,
                }
            }
        };
        out.insert(pitch, fitted);
    }
    Ok(out)
}
