//! Variable-step BDF2 convolution kernels, their discrete orthogonal
//! convolution (DOC) kernels, and the step-size restrictions that keep the
//! scheme solvable and energy-dissipative.
//!
//! Levels are 1-based throughout: `tau(k)` is the step from `t_{k-1}` to
//! `t_k`, and BDF2 kernels exist for levels `n >= 2`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridField;

/// Largest admissible adjacent step ratio for the DOC kernel theory.
pub const R_USER_DEFAULT: f64 = 4.864;

/// Nonuniform time mesh `0 = t_0 < t_1 < ... < t_N`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeMesh {
    tau: Vec<f64>,
    t: Vec<f64>,
    r: Vec<f64>,
}

impl TimeMesh {
    pub fn new() -> Self {
        TimeMesh {
            tau: Vec::new(),
            t: vec![0.0],
            r: Vec::new(),
        }
    }

    pub fn from_steps(steps: &[f64]) -> Result<Self> {
        let mut mesh = TimeMesh::new();
        for &s in steps {
            mesh.push(s)?;
        }
        Ok(mesh)
    }

    pub fn uniform(n: usize, tau: f64) -> Result<Self> {
        Self::from_steps(&vec![tau; n])
    }

    /// Appends a step of size `tau`.
    pub fn push(&mut self, tau: f64) -> Result<()> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Config(format!("time steps must be positive, got {tau}")));
        }
        let ratio = match self.tau.last() {
            Some(prev) => tau / prev,
            None => 0.0,
        };
        let last_t = *self.t.last().expect("t_0 present");
        let next_t = last_t + tau;
        if next_t <= last_t {
            return Err(Error::Config(format!(
                "step {tau:e} too small to advance time {last_t:e}"
            )));
        }
        self.tau.push(tau);
        self.t.push(next_t);
        self.r.push(ratio);
        Ok(())
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn steps(&self) -> &[f64] {
        &self.tau
    }

    /// `tau_k`, `1 <= k <= N`.
    pub fn tau(&self, k: usize) -> f64 {
        self.tau[k - 1]
    }

    /// `r_k = tau_k / tau_{k-1}`, with `r_1 = 0`.
    pub fn ratio(&self, k: usize) -> f64 {
        self.r[k - 1]
    }

    /// `t_k`, `0 <= k <= N`.
    pub fn time(&self, k: usize) -> f64 {
        self.t[k]
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn max_step(&self) -> f64 {
        self.tau.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest `r_k` over `k >= 2`.
    pub fn max_ratio(&self) -> f64 {
        self.r.iter().skip(1).cloned().fold(0.0, f64::max)
    }

    /// The first `n` steps.
    pub fn prefix(&self, n: usize) -> TimeMesh {
        TimeMesh {
            tau: self.tau[..n].to_vec(),
            t: self.t[..=n].to_vec(),
            r: self.r[..n].to_vec(),
        }
    }

    /// Whether every ratio `r_k`, `k >= 2`, lies in `(0, r_user]`.
    pub fn is_admissible(&self, r_user: f64) -> bool {
        self.r.iter().skip(1).all(|&r| r > 0.0 && r <= r_user)
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n < 2 || n > self.len() {
            return Err(Error::IndexOutOfRange {
                index: n,
                valid: format!("2..={}", self.len()),
            });
        }
        Ok(())
    }
}

/// `(b_0^{(n)}, b_1^{(n)})` for level `n >= 2`.
pub fn bdf2_kernels(mesh: &TimeMesh, n: usize) -> Result<(f64, f64)> {
    mesh.check_level(n)?;
    Ok(kernel_pair(mesh.tau(n), mesh.ratio(n)))
}

/// Closed-form BDF2 kernels for step `tau` and ratio `r`.
pub fn kernel_pair(tau: f64, r: f64) -> (f64, f64) {
    let b0 = (1.0 + 2.0 * r) / (tau * (1.0 + r));
    let b1 = -r * r / (tau * (1.0 + r));
    (b0, b1)
}

/// `D_2 v^n` for scalar data `v[0..=n]`.
pub fn bdf2_apply_scalar(mesh: &TimeMesh, n: usize, v: &[f64]) -> Result<f64> {
    let (b0, b1) = bdf2_kernels(mesh, n)?;
    if v.len() <= n {
        return Err(Error::InsufficientHistory {
            level: n,
            needed: n + 1,
            available: v.len(),
        });
    }
    Ok(b0 * (v[n] - v[n - 1]) + b1 * (v[n - 1] - v[n - 2]))
}

/// `D_2 v^n` for grid data `v[0..=n]`.
pub fn bdf2_apply(mesh: &TimeMesh, n: usize, v: &[GridField]) -> Result<GridField> {
    let (b0, b1) = bdf2_kernels(mesh, n)?;
    if v.len() <= n {
        return Err(Error::InsufficientHistory {
            level: n,
            needed: n + 1,
            available: v.len(),
        });
    }
    let d1 = v[n].sub(&v[n - 1]);
    let d0 = v[n - 1].sub(&v[n - 2]);
    Ok(d1.lin_comb(b0, &d0, b1))
}

/// DOC kernels `theta_{n-j}^{(n)}` for `j = 2..=n` (entry `j - 2`), from
/// the running-product closed form.
pub fn doc_kernels(mesh: &TimeMesh, n: usize) -> Result<Vec<f64>> {
    mesh.check_level(n)?;
    let mut row = vec![0.0; n - 1];
    let mut product = 1.0;
    for j in (2..=n).rev() {
        let (b0, _) = kernel_pair(mesh.tau(j), mesh.ratio(j));
        row[j - 2] = product / b0;
        let r = mesh.ratio(j);
        product *= r * r / (1.0 + 2.0 * r);
    }
    Ok(row)
}

/// DOC kernels from the defining backward recursion. Kept as an
/// independent cross-check of [`doc_kernels`].
pub fn doc_kernels_recursive(mesh: &TimeMesh, n: usize) -> Result<Vec<f64>> {
    mesh.check_level(n)?;
    let mut row = vec![0.0; n - 1];
    let (b0n, _) = kernel_pair(mesh.tau(n), mesh.ratio(n));
    row[n - 2] = 1.0 / b0n;
    for k in (2..n).rev() {
        // only b_1^{(k+1)} is nonzero among b_{j-k}^{(j)}, j > k
        let mut acc = 0.0;
        for j in (k + 1)..=n {
            let b = match j - k {
                0 => kernel_pair(mesh.tau(j), mesh.ratio(j)).0,
                1 => kernel_pair(mesh.tau(j), mesh.ratio(j)).1,
                _ => 0.0,
            };
            acc += row[j - 2] * b;
        }
        let (b0k, _) = kernel_pair(mesh.tau(k), mesh.ratio(k));
        row[k - 2] = -acc / b0k;
    }
    Ok(row)
}

/// `max_k |sum_{j=k}^n theta_{n-j}^{(n)} b_{j-k}^{(j)} - delta_{nk}|` for the
/// supplied DOC row (entry `j - 2`).
pub fn orthogonality_residual_of(mesh: &TimeMesh, n: usize, theta: &[f64]) -> Result<f64> {
    mesh.check_level(n)?;
    if theta.len() != n - 1 {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            found: format!("{} DOC entries", theta.len()),
        });
    }
    let mut worst = 0.0f64;
    for k in 2..=n {
        let (b0k, _) = kernel_pair(mesh.tau(k), mesh.ratio(k));
        let mut sum = theta[k - 2] * b0k;
        if k < n {
            let (_, b1) = kernel_pair(mesh.tau(k + 1), mesh.ratio(k + 1));
            sum += theta[k - 1] * b1;
        }
        let delta = if k == n { 1.0 } else { 0.0 };
        worst = worst.max((sum - delta).abs());
    }
    Ok(worst)
}

pub fn orthogonality_residual(mesh: &TimeMesh, n: usize) -> Result<f64> {
    let theta = doc_kernels(mesh, n)?;
    orthogonality_residual_of(mesh, n, &theta)
}

/// `R(z, s) = (2 + 4z - z^{3/2}) / (1 + z) - s^{3/2} / (1 + s)`.
pub fn ratio_function(z: f64, s: f64) -> f64 {
    (2.0 + 4.0 * z - z.powf(1.5)) / (1.0 + z) - s.powf(1.5) / (1.0 + s)
}

/// `4 eps^2 / (kappa nu^{2 alpha - 2})`, the common prefactor of both step
/// restrictions.
pub fn restriction_scale(epsilon: f64, kappa: f64, nu: f64, alpha: f64) -> f64 {
    4.0 * epsilon * epsilon / (kappa * nu.powf(2.0 * alpha - 2.0))
}

/// Step bound guaranteeing unique solvability at a level with ratio `r_n`.
pub fn solvability_step(r_n: f64, epsilon: f64, kappa: f64, nu: f64, alpha: f64) -> f64 {
    restriction_scale(epsilon, kappa, nu, alpha) * (1.0 + 2.0 * r_n) / (1.0 + r_n)
}

/// Step bound for the modified energy to dissipate at a level with ratios
/// `r_n` and `r_{n+1}`.
pub fn max_stable_step(r_n: f64, r_next: f64, epsilon: f64, kappa: f64, nu: f64, alpha: f64) -> f64 {
    let shape = ((1.0 + 2.0 * r_n) / (1.0 + r_n)).min(ratio_function(r_n, r_next));
    restriction_scale(epsilon, kappa, nu, alpha) * shape
}

/// How the driver treats the energy step restriction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RestrictionMode {
    /// Shrink steps so the restriction holds.
    Enforce,
    /// Log violations and proceed.
    #[default]
    Warn,
    Off,
}

impl std::str::FromStr for RestrictionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "enforce" => Ok(RestrictionMode::Enforce),
            "warn" => Ok(RestrictionMode::Warn),
            "off" => Ok(RestrictionMode::Off),
            other => Err(Error::Config(format!("unknown restriction mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for RestrictionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RestrictionMode::Enforce => "enforce",
            RestrictionMode::Warn => "warn",
            RestrictionMode::Off => "off",
        })
    }
}

/// Largest step `tau <= proposal` after a step `tau_prev` that satisfies the
/// energy restriction with ratio `tau / tau_prev` for any following ratio up
/// to `r_user`. `tau_prev = None` is the first step (`r_1 = 0`).
pub fn clamp_to_restriction(
    proposal: f64,
    tau_prev: Option<f64>,
    r_user: f64,
    scale: f64,
) -> f64 {
    let bound = |tau: f64| {
        let z = tau_prev.map_or(0.0, |p| tau / p);
        scale * ((1.0 + 2.0 * z) / (1.0 + z)).min(ratio_function(z, r_user))
    };
    if proposal <= bound(proposal) {
        return proposal;
    }
    // bound(tau) - tau is decreasing in tau where it matters; bisect for the
    // crossing on (0, proposal)
    let mut lo = 0.0;
    let mut hi = proposal;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= bound(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * proposal {
            break;
        }
    }
    lo
}

/// BDF2 and DOC kernel tables for a mesh prefix.
///
/// `b0`/`b1` are stored for every level; DOC rows are produced on demand.
/// [`KernelSet::extended`] builds the table for a longer mesh, reusing the
/// shared prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSet {
    steps: Vec<f64>,
    b0: Vec<f64>,
    b1: Vec<f64>,
}

impl KernelSet {
    pub fn new(mesh: &TimeMesh) -> Self {
        let mut set = KernelSet {
            steps: Vec::new(),
            b0: Vec::new(),
            b1: Vec::new(),
        };
        set.append_from(mesh, 0);
        set
    }

    fn append_from(&mut self, mesh: &TimeMesh, start: usize) {
        for k in (start + 1)..=mesh.len() {
            self.steps.push(mesh.tau(k));
            // r_1 = 0 gives the one-step pair (1/tau_1, 0) at level 1
            let (b0, b1) = kernel_pair(mesh.tau(k), mesh.ratio(k));
            self.b0.push(b0);
            self.b1.push(b1);
        }
    }

    /// Kernel table for `mesh`. The prefix shared with `self` is reused;
    /// a mesh that diverges from the cached prefix is rebuilt from scratch.
    pub fn extended(&self, mesh: &TimeMesh) -> KernelSet {
        let shared = self.steps.len() <= mesh.len()
            && self.steps.iter().zip(mesh.steps()).all(|(a, b)| a == b);
        if !shared {
            return KernelSet::new(mesh);
        }
        let mut next = self.clone();
        next.append_from(mesh, self.steps.len());
        next
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn b0(&self, n: usize) -> Result<f64> {
        self.check(n)?;
        Ok(self.b0[n - 1])
    }

    pub fn b1(&self, n: usize) -> Result<f64> {
        self.check(n)?;
        Ok(self.b1[n - 1])
    }

    /// DOC row `theta_{n-j}^{(n)}`, `j = 2..=n`.
    pub fn theta_row(&self, n: usize) -> Result<Vec<f64>> {
        self.check(n)?;
        let mut row = vec![0.0; n - 1];
        let mut product = 1.0;
        for j in (2..=n).rev() {
            row[j - 2] = product / self.b0[j - 1];
            let r = self.steps[j - 1] / self.steps[j - 2];
            product *= r * r / (1.0 + 2.0 * r);
        }
        Ok(row)
    }

    fn check(&self, n: usize) -> Result<()> {
        if n < 2 || n > self.steps.len() {
            return Err(Error::IndexOutOfRange {
                index: n,
                valid: format!("2..={}", self.steps.len()),
            });
        }
        Ok(())
    }
}

/// Dense diagnostics of `Theta = Theta_2 + Theta_2^T`.
#[derive(Clone, Debug, Serialize)]
pub struct ThetaReport {
    pub n: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Smallest eigenvalue after symmetric scaling by the diagonal; its sign
    /// decides `positive_definite`.
    pub min_scaled_eigenvalue: f64,
    /// `max |B_2 Theta_2 - I|`.
    pub inverse_residual: f64,
    pub positive_definite: bool,
    /// Whether all ratios satisfy `0 < r_k <= 4.864`.
    pub admissible: bool,
}

/// Largest level accepted by [`theta_matrix_checks`].
pub const THETA_CHECK_MAX_LEVEL: usize = 64;

pub fn theta_matrix_checks(mesh: &TimeMesh, n: usize) -> Result<ThetaReport> {
    mesh.check_level(n)?;
    if n > THETA_CHECK_MAX_LEVEL {
        return Err(Error::IndexOutOfRange {
            index: n,
            valid: format!("2..={THETA_CHECK_MAX_LEVEL}"),
        });
    }
    let size = n - 1;
    let mut b2 = DMatrix::<f64>::zeros(size, size);
    let mut theta2 = DMatrix::<f64>::zeros(size, size);
    for k in 2..=n {
        let (b0, b1) = kernel_pair(mesh.tau(k), mesh.ratio(k));
        b2[(k - 2, k - 2)] = b0;
        if k >= 3 {
            b2[(k - 2, k - 3)] = b1;
        }
        let row = doc_kernels(mesh, k)?;
        for (j, value) in row.into_iter().enumerate() {
            theta2[(k - 2, j)] = value;
        }
    }
    let product = &b2 * &theta2;
    let identity = DMatrix::<f64>::identity(size, size);
    let inverse_residual = (product - identity).abs().max();
    let sym = &theta2 + theta2.transpose();
    let eig = SymmetricEigen::new(sym.clone());
    let min_eigenvalue = eig.eigenvalues.min();
    let max_eigenvalue = eig.eigenvalues.max();
    // D^{-1/2} Theta D^{-1/2} with D = diag(Theta) > 0 has the same inertia
    // and an O(1) spectrum even when the steps span many decades
    let d = sym.diagonal().map(|v| 1.0 / v.sqrt());
    let scaled = DMatrix::from_fn(size, size, |i, j| sym[(i, j)] * d[i] * d[j]);
    let min_scaled_eigenvalue = SymmetricEigen::new(scaled).eigenvalues.min();
    Ok(ThetaReport {
        n,
        min_eigenvalue,
        max_eigenvalue,
        min_scaled_eigenvalue,
        inverse_residual,
        positive_definite: min_scaled_eigenvalue > 0.0,
        admissible: mesh.prefix(n).is_admissible(R_USER_DEFAULT),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(steps: &[f64]) -> TimeMesh {
        TimeMesh::from_steps(steps).unwrap()
    }

    #[test]
    fn mesh_bookkeeping() {
        let m = mesh(&[0.5, 1.0, 0.25]);
        assert_eq!(m.len(), 3);
        assert_eq!(m.ratio(1), 0.0);
        assert_eq!(m.ratio(2), 2.0);
        assert_eq!(m.ratio(3), 0.25);
        assert_eq!(m.time(3), 1.75);
        assert_eq!(m.max_ratio(), 2.0);
        assert!(TimeMesh::from_steps(&[1.0, 0.0]).is_err());
        assert!(TimeMesh::from_steps(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn uniform_kernels() {
        let m = TimeMesh::uniform(4, 1.0).unwrap();
        let (b0, b1) = bdf2_kernels(&m, 3).unwrap();
        assert!((b0 - 1.5).abs() < 1e-15);
        assert!((b1 + 0.5).abs() < 1e-15);
    }

    #[test]
    fn kernels_for_ratio_two() {
        let m = mesh(&[1.0, 2.0]);
        let (b0, b1) = bdf2_kernels(&m, 2).unwrap();
        assert!((b0 - 5.0 / 6.0).abs() < 1e-15);
        assert!((b1 + 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_index_errors() {
        let m = mesh(&[1.0, 1.0]);
        assert!(bdf2_kernels(&m, 1).is_err());
        assert!(bdf2_kernels(&m, 3).is_err());
        assert!(doc_kernels(&m, 5).is_err());
        assert!(matches!(
            bdf2_apply_scalar(&m, 2, &[0.0, 1.0]),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn bdf2_annihilates_constants_and_is_exact_on_linears() {
        let m = mesh(&[0.1, 0.3, 0.05, 0.2]);
        let constant = [2.0; 5];
        let linear: Vec<f64> = m.times().to_vec();
        for n in 2..=4 {
            assert_eq!(bdf2_apply_scalar(&m, n, &constant).unwrap(), 0.0);
            assert!((bdf2_apply_scalar(&m, n, &linear).unwrap() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn bdf2_exact_on_quadratics_for_uniform_steps() {
        let m = TimeMesh::uniform(6, 0.1).unwrap();
        let quad: Vec<f64> = m.times().iter().map(|t| t * t).collect();
        for n in 2..=6 {
            let d = bdf2_apply_scalar(&m, n, &quad).unwrap();
            assert!((d - 2.0 * m.time(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_doc_kernels() {
        let m = TimeMesh::uniform(8, 1.0).unwrap();
        let row = doc_kernels(&m, 8).unwrap();
        for j in 2..=8 {
            let expected = 2.0 / 3.0 * (1.0f64 / 3.0).powi((8 - j) as i32);
            assert!((row[j - 2] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn doc_base_case() {
        let m = mesh(&[0.3, 0.5]);
        let r = 0.5 / 0.3;
        let row = doc_kernels(&m, 2).unwrap();
        assert!((row[0] - 0.5 * (1.0 + r) / (1.0 + 2.0 * r)).abs() < 1e-15);
    }

    #[test]
    fn uniform_orthogonality_by_hand() {
        let m = TimeMesh::uniform(3, 1.0).unwrap();
        let row = doc_kernels(&m, 3).unwrap();
        let (theta1, theta0) = (row[0], row[1]);
        assert!((theta0 * 1.5 - 1.0).abs() < 1e-15);
        assert!((theta1 * 1.5 + theta0 * -0.5).abs() < 1e-15);
        assert!(orthogonality_residual(&m, 3).unwrap() < 1e-15);
    }

    #[test]
    fn orthogonality_detects_perturbation() {
        let m = mesh(&[0.1, 0.2, 0.15, 0.3, 0.1]);
        let mut row = doc_kernels(&m, 5).unwrap();
        let last = row.len() - 1;
        row[last] *= 1.01;
        let res = orthogonality_residual_of(&m, 5, &row).unwrap();
        assert!((res - 0.01).abs() < 1e-12, "residual {res}");
    }

    #[test]
    fn ratio_function_values() {
        assert!((ratio_function(1.0, 1.0) - 2.0).abs() < 1e-15);
        let expected = 2.0 - 4.864f64.powf(1.5) / 5.864;
        assert!((ratio_function(0.0, 4.864) - expected).abs() < 1e-15);
        assert!((ratio_function(0.0, 4.864) - 0.1707).abs() < 1e-4);
    }

    #[test]
    fn stable_step_values() {
        let eps = 0.1f64.sqrt();
        let v = max_stable_step(1.0, 1.0, eps, 1.0, 1.0, 0.3);
        assert!((v - 0.6).abs() < 1e-14);
        let s = solvability_step(1.0, eps, 1.0, 1.0, 0.3);
        assert!((s - 0.4 * 1.5).abs() < 1e-14);
        // unit wavenumber removes alpha dependence
        assert_eq!(
            max_stable_step(2.0, 0.5, eps, 1.0, 1.0, 0.2),
            max_stable_step(2.0, 0.5, eps, 1.0, 1.0, 0.9)
        );
        assert_ne!(
            max_stable_step(2.0, 0.5, eps, 1.0, 2.0, 0.2),
            max_stable_step(2.0, 0.5, eps, 1.0, 2.0, 0.9)
        );
    }

    #[test]
    fn clamp_respects_restriction() {
        let scale = 0.04;
        let tau = clamp_to_restriction(0.1, Some(0.01), 4.0, scale);
        let z = tau / 0.01;
        let bound = scale * ((1.0 + 2.0 * z) / (1.0 + z)).min(ratio_function(z, 4.0));
        assert!(tau <= bound * (1.0 + 1e-12));
        assert!(tau > 0.9 * bound);
        assert_eq!(clamp_to_restriction(1e-3, Some(1e-3), 4.0, scale), 1e-3);
        let first = clamp_to_restriction(1.0, None, 4.0, scale);
        assert!((first - scale * ratio_function(0.0, 4.0)).abs() < 1e-12);
    }

    #[test]
    fn kernel_set_extension_reuses_prefix() {
        let m3 = mesh(&[0.1, 0.2, 0.1]);
        let mut m5 = m3.clone();
        m5.push(0.3).unwrap();
        m5.push(0.05).unwrap();
        let k3 = KernelSet::new(&m3);
        let k5 = k3.extended(&m5);
        assert_eq!(k5, KernelSet::new(&m5));
        assert_eq!(k3.len(), 3);
        assert!(k3.b0(4).is_err());
        assert_eq!(k5.theta_row(5).unwrap(), doc_kernels(&m5, 5).unwrap());
        let other = mesh(&[0.2, 0.2, 0.2, 0.2]);
        assert_eq!(k5.extended(&other), KernelSet::new(&other));
    }

    #[test]
    fn theta_report_for_uniform_mesh() {
        let m = TimeMesh::uniform(10, 0.1).unwrap();
        let rep = theta_matrix_checks(&m, 10).unwrap();
        assert!(rep.positive_definite && rep.admissible);
        assert!(rep.inverse_residual < 1e-12);
        let long = TimeMesh::uniform(70, 0.1).unwrap();
        assert!(theta_matrix_checks(&long, 65).is_err());
    }

    #[test]
    fn theta_report_outside_hypothesis_still_runs() {
        let m = mesh(&[0.1, 0.1, 0.6, 0.3, 0.3, 0.3]);
        let rep = theta_matrix_checks(&m, 6).unwrap();
        assert!(!rep.admissible);
        assert!(rep.min_eigenvalue.is_finite());
    }

    #[test]
    fn restriction_mode_parsing() {
        assert_eq!("Enforce".parse::<RestrictionMode>().unwrap(), RestrictionMode::Enforce);
        assert_eq!("off".parse::<RestrictionMode>().unwrap(), RestrictionMode::Off);
        assert!("sometimes".parse::<RestrictionMode>().is_err());
        assert_eq!(RestrictionMode::default(), RestrictionMode::Warn);
    }
}
