//! Adaptive step selection and seeded random meshes / initial fields.
//!
//! Random numbers come from ChaCha8 seeded with `ChaCha8Rng::seed_from_u64`.
//! A uniform variate is built from the top 53 bits of `next_u64()`:
//! `u = (x >> 11) * 2^-53` on `[0, 1)`, or `((x >> 11) + 0.5) * 2^-53` on
//! the open interval `(0, 1)`. Both are platform-independent.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm_l2, GridField, SpectralGrid};
use crate::kernels::TimeMesh;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveConfig {
    pub rho: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub r_user: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            rho: 100.0,
            tau_min: 1e-4,
            tau_max: 1e-1,
            r_user: 4.0,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_min > 0.0 && self.tau_min <= self.tau_max && self.tau_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < tau_min <= tau_max, got [{}, {}]",
                self.tau_min, self.tau_max
            )));
        }
        if !(self.rho > 0.0) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.r_user > 0.0) {
            return Err(Error::Config(format!("r_user must be positive, got {}", self.r_user)));
        }
        Ok(())
    }
}

/// `tau_ada = max(tau_min, tau_max / sqrt(1 + rho ||d_tau phi||^2))` from the
/// squared discrete L2 norm of the difference quotient.
pub fn adaptive_step_from_rate(rate_sq: f64, cfg: &AdaptiveConfig) -> f64 {
    cfg.tau_min.max(cfg.tau_max / (1.0 + cfg.rho * rate_sq).sqrt())
}

/// `tau_{n+1} = min(tau_ada, r_user tau_n)`.
pub fn next_step(phi_n: &GridField, phi_nm1: &GridField, tau_n: f64, cfg: &AdaptiveConfig) -> f64 {
    let rate = norm_l2(&phi_n.sub(phi_nm1)) / tau_n;
    adaptive_step_from_rate(rate * rate, cfg).min(cfg.r_user * tau_n)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on `[0, 1)`.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `(0, 1)`.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// `tau_k = T sigma_k / S` with `sigma_k ~ U(0, 1)` and `S = sum sigma_k`;
/// roundoff is folded into the last step so the steps sum to `T`.
pub fn random_mesh(n: usize, horizon: f64, seed: u64) -> Result<TimeMesh> {
    if n < 2 {
        return Err(Error::Config(format!("random mesh needs N >= 2, got {n}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
    }
    let mut g = rng(seed);
    let sigma: Vec<f64> = (0..n).map(|_| open_unit(&mut g)).collect();
    let total: f64 = sigma.iter().sum();
    let mut steps: Vec<f64> = sigma.iter().map(|s| horizon * s / total).collect();
    let head: f64 = steps[..n - 1].iter().sum();
    steps[n - 1] = horizon - head;
    TimeMesh::from_steps(&steps)
}

/// I.i.d. uniform nodal values in `[lo, hi]`.
pub fn random_initial_field(grid: &SpectralGrid, lo: f64, hi: f64, seed: u64) -> Result<GridField> {
    if !(lo < hi) {
        return Err(Error::Config(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    let mut g = rng(seed);
    let n = grid.modes() * grid.modes();
    let values = (0..n).map(|_| lo + (hi - lo) * unit(&mut g)).collect();
    GridField::from_values(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quiescent_solution_takes_maximal_step() {
        let g = SpectralGrid::new(8, 2.0 * PI).unwrap();
        let phi = g.constant(0.2);
        let cfg = AdaptiveConfig::default();
        assert_eq!(next_step(&phi, &phi, 1.0, &cfg), cfg.tau_max);
        assert_eq!(next_step(&phi, &phi, 0.01, &cfg), 0.04);
    }

    #[test]
    fn formula_values() {
        let cfg = AdaptiveConfig::default();
        let tau = adaptive_step_from_rate(99.0, &cfg);
        assert!((tau - 0.1 / 9901f64.sqrt()).abs() < 1e-18);
        assert!((tau - 1.005e-3).abs() < 1e-6);
        assert_eq!(adaptive_step_from_rate(1e30, &cfg), cfg.tau_min);
    }

    #[test]
    fn fast_change_hits_floor() {
        let g = SpectralGrid::new(8, 2.0 * PI).unwrap();
        let a = g.sample(|x, _| x.sin());
        let b = a.scale(-1.0);
        let cfg = AdaptiveConfig::default();
        assert_eq!(next_step(&a, &b, 1e-3, &cfg), cfg.tau_min);
        assert_eq!(next_step(&a, &b, 1e-6, &cfg), 4e-6);
    }

    #[test]
    fn random_mesh_sums_to_horizon() {
        for (n, t, seed) in [(2, 1.0, 0), (64, 1.0, 7), (1000, 3.5, 42)] {
            let mesh = random_mesh(n, t, seed).unwrap();
            assert_eq!(mesh.len(), n);
            let sum: f64 = mesh.steps().iter().sum();
            assert!((sum - t).abs() <= 1e-12 * t);
            assert!(mesh.steps().iter().all(|&s| s > 0.0));
        }
        assert!(random_mesh(1, 1.0, 0).is_err());
        assert!(random_mesh(4, -1.0, 0).is_err());
    }

    #[test]
    fn random_mesh_is_deterministic() {
        let a = random_mesh(64, 1.0, 123).unwrap();
        let b = random_mesh(64, 1.0, 123).unwrap();
        assert_eq!(a.steps(), b.steps());
        let c = random_mesh(64, 1.0, 124).unwrap();
        assert_ne!(a.steps(), c.steps());
        assert!(a.max_ratio() > 1.0);
    }

    #[test]
    fn random_field_bounds_and_determinism() {
        let g = SpectralGrid::new(32, 2.0 * PI).unwrap();
        let f = random_initial_field(&g, -0.1, 0.1, 9).unwrap();
        assert!(f.values().iter().all(|&v| (-0.1..=0.1).contains(&v)));
        assert_eq!(f, random_initial_field(&g, -0.1, 0.1, 9).unwrap());
        assert!(random_initial_field(&g, 0.1, 0.1, 9).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AdaptiveConfig::default().validate().is_ok());
        let bad = AdaptiveConfig {
            tau_min: 1.0,
            tau_max: 0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
