//! Late-fusion softmax: separate linear embeddings of the pitcher, batter and
//! pitch tensors, concatenated with the raw (balls, strikes) pair and mapped
//! to four logits by one affine head.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{OutcomeDistribution, OutcomeError, OutcomePredictor, SwingDataset};
use crate::features::{BatterTensor, PitcherTensor, PLAYER_TENSOR_LEN};
use crate::game::Count;
use crate::zones::{
    build_pitch_tensor, default_grid, PitchTensor, PitchType, ZoneId, NUM_PITCH_TYPES, NUM_ZONES,
    PITCH_TENSOR_LEN,
};

pub const MIN_SOFTMAX_RECORDS: usize = 100;
const STD_FLOOR: f64 = 1e-8;
const P: usize = PLAYER_TENSOR_LEN;
const X: usize = PITCH_TENSOR_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftmaxConfig {
    pub embed_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        SoftmaxConfig {
            embed_dim: 16,
            learning_rate: 0.05,
            epochs: 20,
            batch_size: 64,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl SoftmaxConfig {
    pub fn validate(&self) -> Result<(), OutcomeError> {
        let bad = |m: &str| Err(OutcomeError::InvalidHyperparameter(m.to_string()));
        if self.embed_dim == 0 {
            return bad("embed_dim must be positive");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.l2 >= 0.0) || !self.l2.is_finite() {
            return bad("l2 must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    d: usize,
}

impl Layout {
    fn wp(&self) -> usize {
        0
    }
    fn wb(&self) -> usize {
        self.d * P
    }
    fn wx(&self) -> usize {
        2 * self.d * P
    }
    fn hidden(&self) -> usize {
        3 * self.d + 2
    }
    fn head(&self) -> usize {
        self.wx() + self.d * X
    }
    fn bias(&self) -> usize {
        self.head() + 4 * self.hidden()
    }
    fn len(&self) -> usize {
        self.bias() + 4
    }
}

/// Nonzero cells of every (pitch, zone) pitch tensor. The cell-to-zone map is
/// the same for any grid geometry.
fn pitch_cells(pitch: PitchType, zone: ZoneId) -> &'static [usize] {
    static CELLS: OnceLock<Vec<Vec<usize>>> = OnceLock::new();
    let all = CELLS.get_or_init(|| {
        let grid = default_grid();
        let mut out = Vec::with_capacity(NUM_PITCH_TYPES * NUM_ZONES);
        for p in PitchType::ALL {
            for z in ZoneId::finite() {
                let t = build_pitch_tensor(&grid, p, z).expect("finite zone");
                out.push(
                    t.values()
                        .iter()
                        .enumerate()
                        .filter(|(_, &v)| v != 0.0)
                        .map(|(i, _)| i)
                        .collect(),
                );
            }
        }
        out
    });
    &all[pitch.index() * NUM_ZONES + zone.index()]
}

pub(super) fn pitch_tensor(pitch: PitchType, zone: ZoneId) -> Result<PitchTensor, OutcomeError> {
    build_pitch_tensor(&default_grid(), pitch, zone).map_err(|_| OutcomeError::ShapeError {
        expected: PITCH_TENSOR_LEN,
        got: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SoftmaxDocument", try_from = "SoftmaxDocument")]
pub struct LateFusionSoftmax {
    config: SoftmaxConfig,
    pitcher_mean: Vec<f64>,
    pitcher_scale: Vec<f64>,
    batter_mean: Vec<f64>,
    batter_scale: Vec<f64>,
    params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSoftmax {
    pub model: LateFusionSoftmax,
    /// Mean training cross-entropy per epoch.
    pub loss_trace: Vec<f64>,
}

/// Dense standardized player vectors plus sparse pitch cells.
struct Input<'a> {
    p: &'a [f64],
    b: &'a [f64],
    x: &'a [usize],
    c: [f64; 2],
}

fn standardize(v: &[f64], mean: &[f64], scale: &[f64]) -> Vec<f64> {
    v.iter()
        .zip(mean)
        .zip(scale)
        .map(|((v, m), s)| (v - m) * s)
        .collect()
}

fn moments(rows: impl Iterator<Item = (usize, f64)>, vectors: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; P];
    let mut sq = vec![0.0; P];
    let mut total = 0.0;
    for (i, w) in rows {
        total += w;
        for (k, &v) in vectors[i].iter().enumerate() {
            mean[k] += w * v;
            sq[k] += w * v * v;
        }
    }
    let scale = mean
        .iter_mut()
        .zip(&sq)
        .map(|(m, s)| {
            *m /= total;
            let var = (s / total - *m * *m).max(0.0);
            let sd = var.sqrt();
            if sd > STD_FLOOR {
                1.0 / sd
            } else {
                0.0
            }
        })
        .collect();
    (mean, scale)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn log_softmax(z: &[f64; 4]) -> [f64; 4] {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.map(|v| v - lse)
}

impl LateFusionSoftmax {
    fn layout(&self) -> Layout {
        Layout {
            d: self.config.embed_dim,
        }
    }

    pub fn config(&self) -> &SoftmaxConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn hidden(&self, inp: &Input) -> Vec<f64> {
        let l = self.layout();
        let d = l.d;
        let mut h = vec![0.0; l.hidden()];
        for j in 0..d {
            let wp = &self.params[l.wp() + j * P..l.wp() + (j + 1) * P];
            let wb = &self.params[l.wb() + j * P..l.wb() + (j + 1) * P];
            h[j] = wp.iter().zip(inp.p).map(|(a, b)| a * b).sum();
            h[d + j] = wb.iter().zip(inp.b).map(|(a, b)| a * b).sum();
            let wx = l.wx() + j * X;
            h[2 * d + j] = inp.x.iter().map(|&k| self.params[wx + k]).sum();
        }
        h[3 * d] = inp.c[0];
        h[3 * d + 1] = inp.c[1];
        h
    }

    fn logits(&self, h: &[f64]) -> [f64; 4] {
        let l = self.layout();
        let n = l.hidden();
        let mut z = [0.0; 4];
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &self.params[l.head() + k * n..l.head() + (k + 1) * n];
            *zk = self.params[l.bias() + k] + row.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
        }
        z
    }

    /// Cross-entropy of one sample; accumulates its gradient into `grad`.
    fn accumulate(&self, inp: &Input, y: usize, grad: &mut [f64], weight: f64) -> f64 {
        let l = self.layout();
        let d = l.d;
        let n = l.hidden();
        let h = self.hidden(inp);
        let ls = log_softmax(&self.logits(&h));
        let mut delta = ls.map(f64::exp);
        delta[y] -= 1.0;
        let mut dh = vec![0.0; n];
        for k in 0..4 {
            let g = delta[k] * weight;
            grad[l.bias() + k] += g;
            let base = l.head() + k * n;
            for i in 0..n {
                grad[base + i] += g * h[i];
                dh[i] += g * self.params[base + i];
            }
        }
        for j in 0..d {
            let (gp, gb, gx) = (dh[j], dh[d + j], dh[2 * d + j]);
            let wp = l.wp() + j * P;
            let wb = l.wb() + j * P;
            for k in 0..P {
                grad[wp + k] += gp * inp.p[k];
                grad[wb + k] += gb * inp.b[k];
            }
            let wx = l.wx() + j * X;
            for &k in inp.x {
                grad[wx + k] += gx;
            }
        }
        -ls[y]
    }

    fn l2_term(&self, grad: Option<&mut [f64]>) -> f64 {
        let l = self.layout();
        let lam = self.config.l2;
        let w = &self.params[..l.bias()];
        if let Some(g) = grad {
            for (gi, wi) in g[..l.bias()].iter_mut().zip(w) {
                *gi += lam * wi;
            }
        }
        0.5 * lam * w.iter().map(|v| v * v).sum::<f64>()
    }

    /// Mean cross-entropy plus the L2 penalty over the given samples, and its
    /// gradient with respect to `params()`.
    pub fn loss_and_gradient(&self, data: &SwingDataset, indices: &[usize]) -> (f64, Vec<f64>) {
        let ps: Vec<Vec<f64>> = data
            .pitchers
            .iter()
            .map(|t| standardize(t.values(), &self.pitcher_mean, &self.pitcher_scale))
            .collect();
        let bs: Vec<Vec<f64>> = data
            .batters
            .iter()
            .map(|t| standardize(t.values(), &self.batter_mean, &self.batter_scale))
            .collect();
        let mut grad = vec![0.0; self.params.len()];
        let w = 1.0 / indices.len() as f64;
        let mut loss = 0.0;
        for &i in indices {
            let s = &data.samples[i];
            let inp = Input {
                p: &ps[s.pitcher],
                b: &bs[s.batter],
                x: pitch_cells(s.pitch, s.zone),
                c: [s.count.balls() as f64, s.count.strikes() as f64],
            };
            loss += w * self.accumulate(&inp, s.outcome.index(), &mut grad, w);
        }
        loss += self.l2_term(Some(&mut grad));
        (loss, grad)
    }

    fn check_shapes(&self) -> Result<(), String> {
        let l = self.layout();
        if self.params.len() != l.len() {
            return Err(format!(
                "expected {} parameters, got {}",
                l.len(),
                self.params.len()
            ));
        }
        for v in [
            &self.pitcher_mean,
            &self.pitcher_scale,
            &self.batter_mean,
            &self.batter_scale,
        ] {
            if v.len() != P {
                return Err(format!("expected {P} standardization values, got {}", v.len()));
            }
        }
        Ok(())
    }
}

impl OutcomePredictor for LateFusionSoftmax {
    fn predict(
        &self,
        pitcher: &PitcherTensor,
        batter: &BatterTensor,
        pitch: &PitchTensor,
        count: Count,
    ) -> Result<OutcomeDistribution, OutcomeError> {
        for len in [pitcher.values().len(), batter.values().len()] {
            if len != P {
                return Err(OutcomeError::ShapeError {
                    expected: P,
                    got: len,
                });
            }
        }
        if pitch.values().len() != X {
            return Err(OutcomeError::ShapeError {
                expected: X,
                got: pitch.values().len(),
            });
        }
        let p = standardize(pitcher.values(), &self.pitcher_mean, &self.pitcher_scale);
        let b = standardize(batter.values(), &self.batter_mean, &self.batter_scale);
        let l = self.layout();
        let mut h = self.hidden(&Input {
            p: &p,
            b: &b,
            x: &[],
            c: [count.balls() as f64, count.strikes() as f64],
        });
        // dense pitch embedding, so arbitrary tensor values are honored
        for j in 0..l.d {
            let wx = &self.params[l.wx() + j * X..l.wx() + (j + 1) * X];
            h[2 * l.d + j] = wx.iter().zip(pitch.values()).map(|(a, b)| a * b).sum();
        }
        let probs = log_softmax(&self.logits(&h)).map(f64::exp);
        let total: f64 = probs.iter().sum();
        Ok(OutcomeDistribution::from_raw_unchecked(probs.map(|v| v / total)))
    }
}

pub fn train_softmax(
    data: &SwingDataset,
    config: SoftmaxConfig,
) -> Result<TrainedSoftmax, OutcomeError> {
    config.validate()?;
    data.validate()?;
    let usable: Vec<usize> = (0..data.samples.len())
        .filter(|&i| !data.samples[i].zone.is_far())
        .collect();
    if usable.len() < MIN_SOFTMAX_RECORDS {
        return Err(OutcomeError::InsufficientData {
            needed: MIN_SOFTMAX_RECORDS,
            got: usable.len(),
        });
    }
    let pv: Vec<&[f64]> = data.pitchers.iter().map(|t| t.values()).collect();
    let bv: Vec<&[f64]> = data.batters.iter().map(|t| t.values()).collect();
    let mut pw = vec![0.0; pv.len()];
    let mut bw = vec![0.0; bv.len()];
    for &i in &usable {
        pw[data.samples[i].pitcher] += 1.0;
        bw[data.samples[i].batter] += 1.0;
    }
    let (pitcher_mean, pitcher_scale) = moments(pw.iter().copied().enumerate(), &pv);
    let (batter_mean, batter_scale) = moments(bw.iter().copied().enumerate(), &bv);

    let layout = Layout {
        d: config.embed_dim,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = vec![0.0; layout.len()];
    // small random embeddings, zero head: predictions start uniform
    let player_sd = 1.0 / (P as f64).sqrt();
    for v in &mut params[layout.wp()..layout.wx()] {
        *v = player_sd * gauss(&mut rng);
    }
    for v in &mut params[layout.wx()..layout.head()] {
        *v = 0.5 * gauss(&mut rng);
    }
    let mut model = LateFusionSoftmax {
        config,
        pitcher_mean,
        pitcher_scale,
        batter_mean,
        batter_scale,
        params,
    };

    let ps: Vec<Vec<f64>> = pv
        .iter()
        .map(|v| standardize(v, &model.pitcher_mean, &model.pitcher_scale))
        .collect();
    let bs: Vec<Vec<f64>> = bv
        .iter()
        .map(|v| standardize(v, &model.batter_mean, &model.batter_scale))
        .collect();

    let mut order = usable;
    let mut grad = vec![0.0; model.params.len()];
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let w = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &data.samples[i];
                let inp = Input {
                    p: &ps[s.pitcher],
                    b: &bs[s.batter],
                    x: pitch_cells(s.pitch, s.zone),
                    c: [s.count.balls() as f64, s.count.strikes() as f64],
                };
                epoch_loss += model.accumulate(&inp, s.outcome.index(), &mut grad, w);
            }
            model.l2_term(Some(&mut grad));
            let lr = config.learning_rate;
            for (p, g) in model.params.iter_mut().zip(&grad) {
                *p -= lr * g;
            }
            if !epoch_loss.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
                return Err(OutcomeError::DivergedTraining { epoch });
            }
        }
        loss_trace.push(epoch_loss / order.len() as f64);
    }
    Ok(TrainedSoftmax { model, loss_trace })
}

#[derive(Serialize, Deserialize)]
struct SoftmaxDocument {
    hyperparameters: SoftmaxConfig,
    /// Block name → [rows, cols] in `params`, in storage order.
    shapes: BTreeMap<String, [usize; 2]>,
    pitcher_mean: Vec<f64>,
    pitcher_scale: Vec<f64>,
    batter_mean: Vec<f64>,
    batter_scale: Vec<f64>,
    params: Vec<f64>,
}

fn shapes(d: usize) -> BTreeMap<String, [usize; 2]> {
    [
        ("0_pitcher_embedding", [d, P]),
        ("1_batter_embedding", [d, P]),
        ("2_pitch_embedding", [d, X]),
        ("3_head", [4, 3 * d + 2]),
        ("4_bias", [4, 1]),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

impl From<LateFusionSoftmax> for SoftmaxDocument {
    fn from(m: LateFusionSoftmax) -> Self {
        SoftmaxDocument {
            hyperparameters: m.config,
            shapes: shapes(m.config.embed_dim),
            pitcher_mean: m.pitcher_mean,
            pitcher_scale: m.pitcher_scale,
            batter_mean: m.batter_mean,
            batter_scale: m.batter_scale,
            params: m.params,
        }
    }
}

impl TryFrom<SoftmaxDocument> for LateFusionSoftmax {
    type Error = String;
    fn try_from(doc: SoftmaxDocument) -> Result<Self, String> {
        if doc.shapes != shapes(doc.hyperparameters.embed_dim) {
            return Err("softmax shape metadata does not match embed_dim".into());
        }
        let m = LateFusionSoftmax {
            config: doc.hyperparameters,
            pitcher_mean: doc.pitcher_mean,
            pitcher_scale: doc.pitcher_scale,
            batter_mean: doc.batter_mean,
            batter_scale: doc.batter_scale,
            params: doc.params,
        };
        m.check_shapes()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::SwingSample;
    use crate::game::SwingOutcome;
    use rand::Rng;

    fn random_dataset(n: usize, seed: u64) -> SwingDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensor = || -> Vec<f64> { (0..P).map(|_| rng.random::<f64>()).collect() };
        let pitchers = (0..5)
            .map(|_| PitcherTensor::from_flat(tensor()).unwrap())
            .collect();
        let batters = (0..5)
            .map(|_| BatterTensor::from_flat(tensor()).unwrap())
            .collect();
        let samples = (0..n)
            .map(|_| SwingSample {
                pitcher: rng.random_range(0..5),
                batter: rng.random_range(0..5),
                pitch: PitchType::from_index(rng.random_range(0..6)),
                zone: ZoneId::from_index(rng.random_range(0..17)),
                count: Count::from_index(rng.random_range(0..12)),
                outcome: SwingOutcome::ALL[rng.random_range(0..4)],
            })
            .collect();
        SwingDataset {
            pitchers,
            batters,
            samples,
        }
    }

    #[test]
    fn zero_epochs_is_uniform() {
        let data = random_dataset(200, 1);
        let cfg = SoftmaxConfig {
            epochs: 0,
            ..Default::default()
        };
        let m = train_softmax(&data, cfg).unwrap().model;
        let t = pitch_tensor(PitchType::SL, ZoneId::new(12).unwrap()).unwrap();
        let d = m
            .predict(&data.pitchers[0], &data.batters[1], &t, Count::new(2, 1).unwrap())
            .unwrap();
        assert_eq!(d.to_array(), [0.25; 4]);
    }

    #[test]
    fn too_few_records() {
        let data = random_dataset(99, 1);
        assert!(matches!(
            train_softmax(&data, SoftmaxConfig::default()),
            Err(OutcomeError::InsufficientData { got: 99, .. })
        ));
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let data = random_dataset(200, 2);
        let cfg = SoftmaxConfig {
            learning_rate: 1e6,
            ..Default::default()
        };
        assert!(matches!(
            train_softmax(&data, cfg),
            Err(OutcomeError::DivergedTraining { .. })
        ));
    }

    #[test]
    fn training_is_deterministic_and_lowers_loss() {
        let data = random_dataset(500, 3);
        let cfg = SoftmaxConfig {
            epochs: 5,
            seed: 9,
            ..Default::default()
        };
        let a = train_softmax(&data, cfg).unwrap();
        let b = train_softmax(&data, cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.loss_trace.last().unwrap() <= &a.loss_trace[0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = random_dataset(300, 4);
        let cfg = SoftmaxConfig {
            epochs: 2,
            l2: 1e-3,
            ..Default::default()
        };
        let mut m = train_softmax(&data, cfg).unwrap().model;
        let idx: Vec<usize> = (0..64).collect();
        let (_, grad) = m.loss_and_gradient(&data, &idx);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for _ in 0..10 {
            let k = rng.random_range(0..grad.len());
            let orig = m.params[k];
            m.params_mut()[k] = orig + h;
            let up = m.loss_and_gradient(&data, &idx).0;
            m.params_mut()[k] = orig - h;
            let down = m.loss_and_gradient(&data, &idx).0;
            m.params_mut()[k] = orig;
            let num = (up - down) / (2.0 * h);
            let rel = (num - grad[k]).abs() / num.abs().max(grad[k].abs()).max(1e-7);
            assert!(rel <= 1e-4, "coord {k}: {num} vs {}", grad[k]);
        }
    }

    #[test]
    fn serde_round_trip_and_shape_check() {
        let data = random_dataset(150, 6);
        let cfg = SoftmaxConfig {
            epochs: 1,
            embed_dim: 3,
            ..Default::default()
        };
        let m = train_softmax(&data, cfg).unwrap().model;
        let json = serde_json::to_string(&m).unwrap();
        let back: LateFusionSoftmax = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["params"].as_array_mut().unwrap().pop();
        assert!(serde_json::from_value::<LateFusionSoftmax>(v).is_err());
    }
}
