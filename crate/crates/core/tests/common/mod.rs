#![allow(dead_code)]

use std::f64::consts::PI;

use fch::{GridField, SpectralGrid, TimeMesh};
use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * u
}

/// Nodal values i.i.d. in `[-amp, amp]`; every mode including Nyquist is
/// excited.
pub fn rough_field(grid: &SpectralGrid, rng: &mut ChaCha8Rng, amp: f64) -> GridField {
    let n = grid.modes() * grid.modes();
    let values = (0..n).map(|_| uniform(rng, -amp, amp)).collect();
    GridField::from_values(grid, values).unwrap()
}

pub fn mean_zero_field(grid: &SpectralGrid, rng: &mut ChaCha8Rng) -> GridField {
    let f = rough_field(grid, rng, 1.0);
    let mean = f.mean();
    f.map(|v| v - mean)
}

/// Random trigonometric polynomial with wavenumbers `|p|, |q| <= kmax`.
pub fn smooth_field(grid: &SpectralGrid, rng: &mut ChaCha8Rng, kmax: i64, amp: f64) -> GridField {
    let nu = grid.nu();
    let mut terms = Vec::new();
    for p in -kmax..=kmax {
        for q in -kmax..=kmax {
            terms.push((p as f64, q as f64, uniform(rng, -1.0, 1.0), uniform(rng, 0.0, 2.0 * PI)));
        }
    }
    let scale = amp / terms.len() as f64;
    grid.sample(|x, y| {
        terms
            .iter()
            .map(|(p, q, a, s)| a * (nu * (p * x + q * y) + s).cos())
            .sum::<f64>()
            * scale
    })
}

/// Mesh with ratios drawn from `[r_lo, r_hi]`, first step 1.
pub fn ratio_mesh(rng: &mut ChaCha8Rng, n: usize, r_lo: f64, r_hi: f64) -> TimeMesh {
    let mut steps = vec![1.0];
    for _ in 1..n {
        let r = uniform(rng, r_lo, r_hi);
        steps.push(steps.last().unwrap() * r);
    }
    TimeMesh::from_steps(&steps).unwrap()
}

/// Dense `(-Delta_h)^gamma` on an `m x m` grid built from the DFT sum
/// `(1/M^2) sum_{p,q} lambda^gamma cos(nu h (p di + q dj))`.
pub fn dense_frac_laplacian(m: usize, l: f64, gamma: f64) -> DMatrix<f64> {
    let n = m * m;
    let nu = 2.0 * PI / l;
    let h = l / m as f64;
    let half = (m / 2) as i64;
    let mut kernel = vec![0.0; n];
    for di in 0..m {
        for dj in 0..m {
            let mut s = 0.0;
            for p in -half..half {
                for q in -half..half {
                    let lam = nu * nu * (p * p + q * q) as f64;
                    if lam == 0.0 {
                        continue;
                    }
                    let phase = nu * h * (p as f64 * di as f64 + q as f64 * dj as f64);
                    s += lam.powf(gamma) * phase.cos();
                }
            }
            kernel[di * m + dj] = s / n as f64;
        }
    }
    DMatrix::from_fn(n, n, |a, b| {
        let (ia, ja) = (a / m, a % m);
        let (ib, jb) = (b / m, b % m);
        let di = (ia + m - ib) % m;
        let dj = (ja + m - jb) % m;
        kernel[di * m + dj]
    })
}

/// Newton solver for `c phi + kappa A_alpha (eps^2 A_1 phi + phi^3 - phi) = rhs`.
pub struct DenseModel {
    pub a_alpha: DMatrix<f64>,
    pub a_one: DMatrix<f64>,
    pub epsilon: f64,
    pub kappa: f64,
}

impl DenseModel {
    pub fn new(m: usize, l: f64, alpha: f64, epsilon: f64, kappa: f64) -> Self {
        DenseModel {
            a_alpha: dense_frac_laplacian(m, l, alpha),
            a_one: dense_frac_laplacian(m, l, 1.0),
            epsilon,
            kappa,
        }
    }

    pub fn mu(&self, phi: &DVector<f64>) -> DVector<f64> {
        let cubic = phi.map(|v| v * v * v - v);
        &self.a_one * phi * (self.epsilon * self.epsilon) + cubic
    }

    /// `kappa A_alpha mu(phi)`.
    pub fn flux(&self, phi: &DVector<f64>) -> DVector<f64> {
        &self.a_alpha * self.mu(phi) * self.kappa
    }

    pub fn solve(&self, c: f64, rhs: &DVector<f64>, guess: &DVector<f64>) -> DVector<f64> {
        let n = rhs.len();
        let eps2 = self.epsilon * self.epsilon;
        let mut phi = guess.clone();
        for _ in 0..50 {
            let residual = &phi * c + self.flux(&phi) - rhs;
            if residual.amax() < 1e-14 * (1.0 + rhs.amax()) {
                break;
            }
            let slope = DMatrix::from_diagonal(&phi.map(|v| 3.0 * v * v - 1.0));
            let jac = DMatrix::identity(n, n) * c + &self.a_alpha * (&self.a_one * eps2 + slope) * self.kappa;
            let delta = jac.lu().solve(&residual).expect("singular Jacobian");
            phi -= delta;
        }
        phi
    }

    /// One BDF2 level with step `tau` and ratio `r` from `prev2`, `prev`.
    pub fn bdf2(&self, prev2: &DVector<f64>, prev: &DVector<f64>, tau: f64, r: f64) -> DVector<f64> {
        let c0 = (1.0 + 2.0 * r) / (tau * (1.0 + r));
        let c1 = -r * r / (tau * (1.0 + r));
        let rhs = prev * c0 - (prev - prev2) * c1;
        self.solve(c0, &rhs, prev)
    }

    /// Trapezoidal half step followed by a BDF2 stage with ratio 1.
    pub fn trbdf2(&self, phi0: &DVector<f64>, tau: f64) -> DVector<f64> {
        let half = 0.5 * tau;
        // (phi - phi0) / half = -(flux(phi) + flux(phi0)) / 2
        let c = 2.0 / half;
        let rhs = phi0 * c - self.flux(phi0);
        let mid = self.solve(c, &rhs, phi0);
        self.bdf2(phi0, &mid, half, 1.0)
    }
}

pub fn to_vector(f: &GridField) -> DVector<f64> {
    DVector::from_column_slice(f.values())
}

pub fn max_gap(f: &GridField, v: &DVector<f64>) -> f64 {
    f.values()
        .iter()
        .zip(v.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
