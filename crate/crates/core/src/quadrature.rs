//! Tensor-product Gauss–Legendre integration of bivariate normal densities
//! over axis-aligned rectangles.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::zones::Rect;

const LOW_ORDER: usize = 10;
const HIGH_ORDER: usize = 20;
const MAX_DEPTH: u32 = 14;
/// Half-width of the integration window, in marginal standard deviations.
const WINDOW_SDS: f64 = 9.0;
/// Initial piece size, in marginal standard deviations.
const PIECE_SDS: f64 = 3.0;

/// Nodes and weights on [-1, 1] by Newton iteration on the Legendre
/// recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let prev = z;
            z = prev - p1 / pp;
            if (z - prev).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule(order: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static LOW: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static HIGH: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match order {
        LOW_ORDER => LOW.get_or_init(|| gauss_legendre(LOW_ORDER)),
        HIGH_ORDER => HIGH.get_or_init(|| gauss_legendre(HIGH_ORDER)),
        _ => unreachable!(),
    }
}

/// Bivariate normal density with mean `(mx, mz)` and covariance
/// `[[vx, c], [c, vz]]`.
#[derive(Debug, Clone, Copy)]
pub struct Bivariate {
    pub mx: f64,
    pub mz: f64,
    pub vx: f64,
    pub vz: f64,
    pub c: f64,
}

impl Bivariate {
    fn det(&self) -> f64 {
        self.vx * self.vz - self.c * self.c
    }

    pub fn density(&self, x: f64, z: f64) -> f64 {
        let det = self.det();
        let dx = x - self.mx;
        let dz = z - self.mz;
        let q = (self.vz * dx * dx - 2.0 * self.c * dx * dz + self.vx * dz * dz) / det;
        (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
    }

    fn fixed(&self, r: &Rect, order: usize) -> f64 {
        let (nodes, weights) = rule(order);
        let hx = 0.5 * (r.x1 - r.x0);
        let cx = 0.5 * (r.x1 + r.x0);
        let hz = 0.5 * (r.z1 - r.z0);
        let cz = 0.5 * (r.z1 + r.z0);
        let mut sum = 0.0;
        for (i, &u) in nodes.iter().enumerate() {
            let x = cx + hx * u;
            let mut inner = 0.0;
            for (j, &v) in nodes.iter().enumerate() {
                inner += weights[j] * self.density(x, cz + hz * v);
            }
            sum += weights[i] * inner;
        }
        sum * hx * hz
    }

    fn adaptive(&self, r: Rect, tol: f64, depth: u32) -> Option<f64> {
        let lo = self.fixed(&r, LOW_ORDER);
        let hi = self.fixed(&r, HIGH_ORDER);
        if (hi - lo).abs() <= tol {
            return Some(hi);
        }
        if depth >= MAX_DEPTH {
            return None;
        }
        let (mx, mz) = r.center();
        let quads = [
            Rect { x0: r.x0, x1: mx, z0: r.z0, z1: mz },
            Rect { x0: mx, x1: r.x1, z0: r.z0, z1: mz },
            Rect { x0: r.x0, x1: mx, z0: mz, z1: r.z1 },
            Rect { x0: mx, x1: r.x1, z0: mz, z1: r.z1 },
        ];
        let mut total = 0.0;
        for q in quads {
            total += self.adaptive(q, tol / 2.0, depth + 1)?;
        }
        Some(total)
    }

    /// Probability mass inside `r` with absolute error target `tol`.
    ///
    /// Integration is restricted to a ±9σ window around the mean (mass outside
    /// is below 1e-18) and starts from pieces no wider than 3σ per axis.
    /// Returns `None` when the adaptive refinement cannot meet `tol`.
    pub fn mass(&self, r: &Rect, tol: f64) -> Option<f64> {
        let sx = self.vx.sqrt();
        let sz = self.vz.sqrt();
        let w = Rect {
            x0: r.x0.max(self.mx - WINDOW_SDS * sx),
            x1: r.x1.min(self.mx + WINDOW_SDS * sx),
            z0: r.z0.max(self.mz - WINDOW_SDS * sz),
            z1: r.z1.min(self.mz + WINDOW_SDS * sz),
        };
        if w.x0 >= w.x1 || w.z0 >= w.z1 {
            return Some(0.0);
        }
        let nx = ((w.x1 - w.x0) / (PIECE_SDS * sx)).ceil().max(1.0) as usize;
        let nz = ((w.z1 - w.z0) / (PIECE_SDS * sz)).ceil().max(1.0) as usize;
        let piece_tol = tol / (nx * nz) as f64;
        let dx = (w.x1 - w.x0) / nx as f64;
        let dz = (w.z1 - w.z0) / nz as f64;
        let mut total = 0.0;
        for i in 0..nx {
            for j in 0..nz {
                let piece = Rect {
                    x0: w.x0 + i as f64 * dx,
                    x1: if i + 1 == nx { w.x1 } else { w.x0 + (i + 1) as f64 * dx },
                    z0: w.z0 + j as f64 * dz,
                    z1: if j + 1 == nz { w.z1 } else { w.z0 + (j + 1) as f64 * dz },
                };
                total += self.adaptive(piece, piece_tol, 0)?;
            }
        }
        Some(total)
    }
}
