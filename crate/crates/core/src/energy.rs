//! Discrete free energy, modified energy and dissipation bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridField, SpectralGrid, MEAN_ZERO_TOLERANCE};
use crate::kernels::max_stable_step;
use crate::stepper::{ModelParams, Stepper};

/// Relative slack allowed before a modified-energy increase is flagged.
pub const DISSIPATION_TOLERANCE: f64 = 1e-10;

/// `<F(phi), 1>` with `F(phi) = (phi^2 - 1)^2 / 4`.
fn potential_energy(phi: &GridField) -> f64 {
    let h = phi.length() / phi.modes() as f64;
    h * h * phi
        .values()
        .iter()
        .map(|&p| {
            let w = p * p - 1.0;
            0.25 * w * w
        })
        .sum::<f64>()
}

/// `E[phi] = eps^2/2 ||grad_h phi||^2 + <F(phi), 1>`, gradient term through
/// the coefficient sum.
pub fn discrete_energy(grid: &SpectralGrid, phi: &GridField, params: &ModelParams) -> Result<f64> {
    let eps2 = params.epsilon * params.epsilon;
    Ok(0.5 * eps2 * grid.gradient_norm_sq(phi)? + potential_energy(phi))
}

/// Same energy with the gradient evaluated on the grid.
pub fn discrete_energy_physical(
    grid: &SpectralGrid,
    phi: &GridField,
    params: &ModelParams,
) -> Result<f64> {
    let eps2 = params.epsilon * params.epsilon;
    Ok(0.5 * eps2 * grid.gradient_norm_sq_physical(phi)? + potential_energy(phi))
}

/// `sqrt(r) tau_{k+1} / (2 kappa (1 + r))` with `r = tau_{k+1} / tau_k`.
pub fn modified_energy_coefficient(tau_k: f64, tau_kp1: f64, kappa: f64) -> f64 {
    if tau_kp1 <= 0.0 {
        return 0.0;
    }
    let r = tau_kp1 / tau_k;
    r.sqrt() * tau_kp1 / (2.0 * kappa * (1.0 + r))
}

/// `||(phi_k - phi_{k-1}) / tau_k||_{-alpha}^2`.
///
/// The increment is mean-zero up to the roundoff of the two levels, so the
/// mean check is scaled by the levels' magnitude rather than the increment's.
pub fn increment_hneg_sq(
    grid: &SpectralGrid,
    phi_k: &GridField,
    phi_km1: &GridField,
    tau_k: f64,
    alpha: f64,
) -> Result<f64> {
    let diff = phi_k.sub(phi_km1);
    let mean = diff.mean();
    let tolerance = MEAN_ZERO_TOLERANCE * phi_k.max_abs().max(phi_km1.max_abs());
    if mean.abs() > tolerance {
        return Err(Error::NonZeroMean { mean, tolerance });
    }
    let norm = grid.norm_hneg_unchecked(&diff, alpha)? / tau_k;
    Ok(norm * norm)
}

/// `E[phi_k] + coefficient ||d_tau phi_k||_{-alpha}^2`. Pass `tau_kp1 = 0`
/// at the last level.
pub fn modified_energy(
    grid: &SpectralGrid,
    phi_k: &GridField,
    phi_km1: &GridField,
    tau_k: f64,
    tau_kp1: f64,
    params: &ModelParams,
) -> Result<f64> {
    let energy = discrete_energy(grid, phi_k, params)?;
    let coefficient = modified_energy_coefficient(tau_k, tau_kp1, params.kappa);
    if coefficient == 0.0 {
        return Ok(energy);
    }
    let inc = increment_hneg_sq(grid, phi_k, phi_km1, tau_k, params.alpha)?;
    Ok(energy + coefficient * inc)
}

/// Continuous-style dissipation rate `kappa ||(-Delta_h)^{alpha/2} mu||^2`.
pub fn dissipation_rate(stepper: &Stepper, phi: &GridField) -> Result<f64> {
    let mu = stepper.chemical_potential(phi)?;
    let norm = stepper.grid().norm_frac(&mu, 0.5 * stepper.params().alpha)?;
    Ok(stepper.params().kappa * norm * norm)
}

/// Whether `tau_n` satisfies the energy step restriction for ratios
/// `r_n`, `r_{n+1}`.
pub fn restriction_holds(tau_n: f64, r_n: f64, r_next: f64, params: &ModelParams, nu: f64) -> bool {
    let bound = max_stable_step(r_n, r_next, params.epsilon, params.kappa, nu, params.alpha);
    tau_n <= bound * (1.0 + 1e-12)
}

/// Per-level diagnostics of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub step_index: usize,
    pub t: f64,
    /// `tau_n` (0 at level 0).
    pub tau: f64,
    /// `r_n` (0 at levels 0 and 1).
    pub ratio: f64,
    pub mass: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "E_mod")]
    pub modified_energy: f64,
    pub iterations: usize,
    pub restriction_satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DissipationFlag {
    pub step_index: usize,
    /// `E_mod[n] - E_mod[n-1]`.
    pub increase: f64,
    pub restriction_satisfied: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DissipationReport {
    /// Number of `n - 1 -> n` transitions checked (`n >= 2`).
    pub checked: usize,
    pub flags: Vec<DissipationFlag>,
    /// Largest `|mass_n - mass_0| / max(|mass_0|, 1)`.
    pub max_mass_drift: f64,
}

impl DissipationReport {
    pub fn is_monotone(&self) -> bool {
        self.flags.is_empty()
    }

    /// Flags raised at steps that satisfied the restriction.
    pub fn unexplained(&self) -> impl Iterator<Item = &DissipationFlag> {
        self.flags.iter().filter(|f| f.restriction_satisfied)
    }
}

/// Flags every level `n >= 2` whose modified energy rose above the previous
/// one by more than [`DISSIPATION_TOLERANCE`] relative.
pub fn dissipation_check(records: &[EnergyReport]) -> DissipationReport {
    let mut report = DissipationReport::default();
    let Some(first) = records.first() else {
        return report;
    };
    let m0 = first.mass;
    for rec in records {
        let drift = (rec.mass - m0).abs() / m0.abs().max(1.0);
        report.max_mass_drift = report.max_mass_drift.max(drift);
    }
    for pair in records.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        if cur.step_index < 2 {
            continue;
        }
        report.checked += 1;
        let slack = DISSIPATION_TOLERANCE * (1.0 + prev.modified_energy.abs());
        if cur.modified_energy > prev.modified_energy + slack {
            report.flags.push(DissipationFlag {
                step_index: cur.step_index,
                increase: cur.modified_energy - prev.modified_energy,
                restriction_satisfied: cur.restriction_satisfied,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup(m: usize) -> (SpectralGrid, ModelParams) {
        let p = ModelParams {
            alpha: 0.5,
            epsilon: 0.1f64.sqrt(),
            kappa: 1.0,
            length: 2.0 * PI,
            modes: m,
        };
        (p.grid().unwrap(), p)
    }

    #[test]
    fn energy_of_constants() {
        let (g, p) = setup(16);
        assert!(discrete_energy(&g, &g.constant(1.0), &p).unwrap().abs() < 1e-14);
        let e0 = discrete_energy(&g, &g.zeros(), &p).unwrap();
        assert!((e0 - 0.25 * 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn energy_of_sin_product_matches_direct_sum() {
        let (g, p) = setup(32);
        let phi = g.sample(|x, y| x.sin() * y.sin());
        // gradient part: ||grad||^2 = 2 * ||phi||^2 = 2 pi^2
        let h = g.spacing();
        let mut pot = 0.0;
        for i in 0..32 {
            for j in 0..32 {
                let v = (i as f64 * h).sin() * (j as f64 * h).sin();
                pot += 0.25 * (v * v - 1.0).powi(2);
            }
        }
        let expected = 0.05 * 2.0 * PI * PI + h * h * pot;
        let e = discrete_energy(&g, &phi, &p).unwrap();
        assert!((e - expected).abs() < 1e-12 * expected);
        let e_phys = discrete_energy_physical(&g, &phi, &p).unwrap();
        assert!((e - e_phys).abs() < 1e-10 * e);
    }

    #[test]
    fn modified_energy_edge_cases() {
        let (g, p) = setup(16);
        let phi = g.sample(|x, y| 0.3 * x.cos() * (2.0 * y).sin());
        let e = discrete_energy(&g, &phi, &p).unwrap();
        assert_eq!(modified_energy(&g, &phi, &phi, 0.1, 0.1, &p).unwrap(), e);
        let prev = phi.scale(0.9);
        assert_eq!(modified_energy(&g, &phi, &prev, 0.1, 0.0, &p).unwrap(), e);
        let small = modified_energy(&g, &phi, &prev, 0.1, 1e-12, &p).unwrap();
        assert!((small - e).abs() < 1e-10);
        assert!(modified_energy(&g, &phi, &prev, 0.1, 0.05, &p).unwrap() >= e);
        let coefficient = modified_energy_coefficient(0.2, 0.2, 2.0);
        assert!((coefficient - 0.2 / 8.0).abs() < 1e-16);
    }

    #[test]
    fn modified_energy_rejects_mass_changing_increment() {
        let (g, p) = setup(16);
        let phi = g.constant(0.5);
        let prev = g.constant(0.4);
        assert!(matches!(
            modified_energy(&g, &phi, &prev, 0.1, 0.1, &p),
            Err(Error::NonZeroMean { .. })
        ));
    }

    fn record(step_index: usize, e_mod: f64, ok: bool) -> EnergyReport {
        EnergyReport {
            step_index,
            t: step_index as f64,
            tau: 1.0,
            ratio: 1.0,
            mass: 2.0,
            energy: e_mod,
            modified_energy: e_mod,
            iterations: 1,
            restriction_satisfied: ok,
        }
    }

    #[test]
    fn dissipation_flags() {
        let flat: Vec<_> = (0..5).map(|k| record(k, 1.0, true)).collect();
        let rep = dissipation_check(&flat);
        assert!(rep.is_monotone());
        assert_eq!(rep.checked, 3);
        assert_eq!(rep.max_mass_drift, 0.0);

        let bumpy = vec![
            record(0, 5.0, true),
            record(1, 6.0, true),
            record(2, 4.0, true),
            record(3, 4.5, false),
            record(4, 4.0, true),
        ];
        let rep = dissipation_check(&bumpy);
        assert_eq!(rep.flags.len(), 1);
        assert_eq!(rep.flags[0].step_index, 3);
        assert!(!rep.flags[0].restriction_satisfied);
        assert_eq!(rep.unexplained().count(), 0);
    }
}
