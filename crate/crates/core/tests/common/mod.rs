//! Oracles and generators shared by the integration tests. Nothing here
//! calls into the solver; the checks are independent recomputations.
#![allow(dead_code)]

use atbat::control::{AimDistribution, GaussianControl};
use atbat::game::{build_kernel, Count, MatchupModels, OutcomeTable, TransitionKernel};
use atbat::outcome::OutcomeDistribution;
use atbat::patience::PatienceOverride;
use atbat::zones::{PitchType, PlateCoords, ZoneGrid, ZoneId, NUM_LOCATIONS};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random point in the simplex with occasional near-zero coordinates.
pub fn random_simplex<const N: usize>(rng: &mut ChaCha8Rng) -> [f64; N] {
    let mut w = [0.0; N];
    for v in &mut w {
        let e: f64 = -rng.random::<f64>().max(1e-300).ln();
        *v = if rng.random::<f64>() < 0.1 { e * 1e-3 } else { e };
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Random matchup: landing rows, outcome distributions and forced takes all
/// drawn independently. `count_independent` reuses one outcome per cell.
pub fn random_models(rng: &mut ChaCha8Rng, types: usize, count_independent: bool) -> MatchupModels {
    let pitch_types: Vec<PitchType> = PitchType::ALL[..types].to_vec();
    let mut aim = AimDistribution::new();
    for &p in &pitch_types {
        for z in ZoneId::finite() {
            let mut row: [f64; NUM_LOCATIONS] = random_simplex(rng);
            // most mass near the aim, like a real pitcher
            let boost = rng.random_range(0.5..4.0);
            row[z.index()] += boost;
            let s: f64 = row.iter().sum();
            aim.set(p, z, row.map(|v| v / s));
        }
    }
    let mut fixed = std::collections::BTreeMap::new();
    for &p in &pitch_types {
        for z in ZoneId::finite() {
            fixed.insert((p, z), random_simplex::<4>(rng));
        }
    }
    let mut per_count = std::collections::BTreeMap::new();
    for c in Count::all() {
        for &p in &pitch_types {
            for z in ZoneId::finite() {
                per_count.insert((c, p, z), random_simplex::<4>(rng));
            }
        }
    }
    let outcomes = OutcomeTable::from_fn(&pitch_types, |p, z, c| {
        let a = if count_independent { fixed[&(p, z)] } else { per_count[&(c, p, z)] };
        OutcomeDistribution::from_array(a).unwrap()
    });
    let overrides = Count::all()
        .map(|_| {
            let mut o = PatienceOverride::none(0.8);
            for &p in &pitch_types {
                for z in ZoneId::borderline() {
                    o.set_forced(p, z, rng.random::<f64>() < 0.3);
                }
            }
            o
        })
        .collect();
    MatchupModels {
        pitch_types,
        aim,
        outcomes,
        overrides,
    }
}

pub fn random_kernel(rng: &mut ChaCha8Rng) -> TransitionKernel {
    let types = rng.random_range(1..=3);
    build_kernel(&random_models(rng, types, false)).unwrap()
}

/// Maximin value of a 2-row game by scanning the row mix on a 1e-3 grid and
/// then refining around the best point.
pub fn brute_force_two_row(payoff: &[Vec<f64>]) -> (f64, f64) {
    assert_eq!(payoff.len(), 2);
    let guarantee = |p: f64| {
        payoff[0]
            .iter()
            .zip(&payoff[1])
            .map(|(a, b)| p * a + (1.0 - p) * b)
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..=1000 {
        let p = i as f64 / 1000.0;
        let g = guarantee(p);
        if g > best.0 {
            best = (g, p);
        }
    }
    let mut step = 1e-3;
    for _ in 0..6 {
        let center = best.1;
        for i in -20..=20 {
            let p = (center + i as f64 * step / 10.0).clamp(0.0, 1.0);
            let g = guarantee(p);
            if g > best.0 {
                best = (g, p);
            }
        }
        step /= 10.0;
    }
    best
}

/// Row payoffs of a column mix and the guarantee of a row mix, computed directly.
pub fn best_row_payoff(payoff: &[Vec<f64>], col_mix: &[f64]) -> f64 {
    payoff
        .iter()
        .map(|r| r.iter().zip(col_mix).map(|(a, x)| a * x).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn worst_col_payoff(payoff: &[Vec<f64>], row_mix: &[f64]) -> f64 {
    (0..payoff[0].len())
        .map(|j| payoff.iter().zip(row_mix).map(|(r, y)| r[j] * y).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Landing frequencies of `n` draws from `g` centered on the aim's centroid.
pub fn monte_carlo_landing(
    g: &GaussianControl,
    grid: &ZoneGrid,
    aim: ZoneId,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> [f64; NUM_LOCATIONS] {
    let (cx, cz) = grid.centroid(aim).unwrap();
    // Cholesky of the covariance
    let l11 = g.var_x.sqrt();
    let l21 = g.cov_xy / l11;
    let l22 = (g.var_y - l21 * l21).sqrt();
    let mut counts = [0usize; NUM_LOCATIONS];
    for _ in 0..n {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        let x = cx + l11 * a;
        let z = cz + l21 * a + l22 * b;
        let zone = PlateCoords::new(x, z)
            .ok()
            .and_then(|p| grid.zone_of(p).ok())
            .unwrap_or(ZoneId::FAR);
        counts[zone.index()] += 1;
    }
    counts.map(|c| c as f64 / n as f64)
}

/// Sample variance of coordinates (1/n), an oracle for the fitted Gaussian.
pub fn sample_moments(points: &[PlateCoords]) -> [f64; 5] {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let mz = points.iter().map(|p| p.z).sum::<f64>() / n;
    let vx = points.iter().map(|p| (p.x - mx).powi(2)).sum::<f64>() / n;
    let vz = points.iter().map(|p| (p.z - mz).powi(2)).sum::<f64>() / n;
    let c = points.iter().map(|p| (p.x - mx) * (p.z - mz)).sum::<f64>() / n;
    [mx, mz, vx, vz, c]
}

/// Entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|v| -v * v.ln()).sum()
}

/// A trained store under `dir` built from a synthetic cohort.
pub fn trained_store(dir: &std::path::Path, spec: &atbat::sim::CohortSpec) -> atbat::config::AppConfig {
    use atbat::config::AppConfig;
    use atbat::pipeline::{run_ingest, run_train};
    let (world, records) = atbat::sim::generate_world(spec).unwrap();
    let csv = dir.join("pitches.csv");
    let mut f = std::fs::File::create(&csv).unwrap();
    atbat::ingest::export_csv(&records, &mut f).unwrap();
    let config = AppConfig {
        store: dir.join("store"),
        ..AppConfig::default()
    };
    run_ingest(&config, &[&csv], Some(&world.roster())).unwrap();
    run_train(&config).unwrap();
    config
}

pub fn small_spec(seed: u64) -> atbat::sim::CohortSpec {
    use atbat::sim::{CohortSpec, TierCounts};
    CohortSpec {
        seed,
        pitchers: TierCounts { strong: 1, average: 1, weak: 1 },
        batters: TierCounts { strong: 1, average: 0, weak: 1 },
        at_bats_per_matchup: 150,
        ..CohortSpec::default()
    }
}
