//! Periodic grid, Fourier pseudo-spectral transforms and the discrete
//! operators built on them.
//!
//! Grid functions live on the nodes `x_h = (i h, j h)`, `h = L / M`, and are
//! stored row-major with the x-index `i` slow. Spectral coefficients are the
//! coefficients of the interpolating trigonometric polynomial, i.e. the DFT
//! scaled by `1 / M^2`, stored in FFT order so that storage index `k` holds
//! mode `k` for `k < M/2` and mode `k - M` otherwise. The modes covered are
//! exactly `[-M/2, M/2 - 1]` in each direction.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative size of the mean below which a field counts as mean-zero.
pub const MEAN_ZERO_TOLERANCE: f64 = 1e-10;

/// Imaginary residual above which an inverse transform is rejected.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Signed Fourier mode stored at FFT index `k`.
#[inline]
pub fn mode_of_index(k: usize, m: usize) -> i64 {
    if k < m / 2 {
        k as i64
    } else {
        k as i64 - m as i64
    }
}

/// FFT storage index of signed mode `mode`, if it is in `[-M/2, M/2 - 1]`.
#[inline]
pub fn index_of_mode(mode: i64, m: usize) -> Option<usize> {
    let half = (m / 2) as i64;
    if mode < -half || mode >= half {
        return None;
    }
    Some(if mode >= 0 {
        mode as usize
    } else {
        (mode + m as i64) as usize
    })
}

/// Square periodic grid `(0, L)^2` with `M` nodes per direction and cached
/// transform plans.
#[derive(Clone)]
pub struct SpectralGrid {
    m: usize,
    l: f64,
    nu: f64,
    lambda: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("m", &self.m)
            .field("l", &self.l)
            .field("nu", &self.nu)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(m: usize, l: f64) -> Result<Self> {
        if m < 4 || m % 2 != 0 {
            return Err(Error::Config(format!(
                "M must be even and at least 4, got {m}"
            )));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Config(format!("L must be positive, got {l}")));
        }
        let nu = 2.0 * PI / l;
        let mut lambda = vec![0.0; m * m];
        for a in 0..m {
            let p = mode_of_index(a, m) as f64;
            for b in 0..m {
                let q = mode_of_index(b, m) as f64;
                lambda[a * m + b] = nu * nu * (p * p + q * q);
            }
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let ifft = planner.plan_fft_inverse(m);
        Ok(SpectralGrid {
            m,
            l,
            nu,
            lambda,
            fft,
            ifft,
        })
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn length(&self) -> f64 {
        self.l
    }

    /// Fundamental wavenumber `2 pi / L`.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn spacing(&self) -> f64 {
        self.l / self.m as f64
    }

    /// `|Omega_h| = L^2`.
    pub fn area(&self) -> f64 {
        self.l * self.l
    }

    /// Eigenvalue table `nu^2 (m^2 + n^2)` in FFT storage order.
    pub fn lambda_table(&self) -> &[f64] {
        &self.lambda
    }

    /// `lambda_{m,n}` for signed modes.
    pub fn lambda(&self, p: i64, q: i64) -> Option<f64> {
        let a = index_of_mode(p, self.m)?;
        let b = index_of_mode(q, self.m)?;
        Some(self.lambda[a * self.m + b])
    }

    /// `lambda^gamma` table with the mean mode set to zero.
    pub fn lambda_powers(&self, gamma: f64) -> Vec<f64> {
        self.lambda
            .iter()
            .map(|&lam| if lam > 0.0 { lam.powf(gamma) } else { 0.0 })
            .collect()
    }

    pub fn zeros(&self) -> GridField {
        GridField::constant(self, 0.0)
    }

    pub fn constant(&self, c: f64) -> GridField {
        GridField::constant(self, c)
    }

    /// Samples `f(x, y)` at the grid nodes.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> GridField {
        GridField::from_fn(self, f)
    }

    fn check_field(&self, f: &GridField) -> Result<()> {
        if f.m != self.m || f.values.len() != self.m * self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: format!("{}x{}", f.m, f.m),
            });
        }
        Ok(())
    }

    fn check_spectral(&self, f: &SpectralField) -> Result<()> {
        if f.m != self.m || f.coeffs.len() != self.m * self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: format!("{}x{} spectral", f.m, f.m),
            });
        }
        Ok(())
    }

    fn fft_2d(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        // rows (y direction), then columns via transpose
        plan.process_with_scratch(data, &mut scratch);
        transpose_square(data, m);
        plan.process_with_scratch(data, &mut scratch);
        transpose_square(data, m);
    }

    /// Pseudo-spectral coefficients of `f`: `f(x_h) = sum c_{m,n} e^{i nu (m x + n y)}`.
    pub fn forward(&self, f: &GridField) -> Result<SpectralField> {
        self.check_field(f)?;
        let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_2d(&mut data, &self.fft);
        let scale = 1.0 / (self.m * self.m) as f64;
        for c in &mut data {
            *c *= scale;
        }
        Ok(SpectralField {
            m: self.m,
            coeffs: data,
        })
    }

    /// Evaluates the trigonometric polynomial at the nodes, keeping the
    /// complex values.
    pub fn inverse_complex(&self, f: &SpectralField) -> Result<Vec<Complex64>> {
        self.check_spectral(f)?;
        let mut data = f.coeffs.clone();
        self.fft_2d(&mut data, &self.ifft);
        Ok(data)
    }

    /// Inverse transform to a real grid function. Fails with
    /// [`Error::NonHermitian`] if the evaluation has a non-negligible
    /// imaginary part.
    pub fn inverse(&self, f: &SpectralField) -> Result<GridField> {
        let data = self.inverse_complex(f)?;
        let mut im_max = 0.0f64;
        let mut re_max = 0.0f64;
        for c in &data {
            im_max = im_max.max(c.im.abs());
            re_max = re_max.max(c.re.abs());
        }
        if im_max > HERMITIAN_TOLERANCE * (1.0 + re_max) {
            return Err(Error::NonHermitian { residual: im_max });
        }
        Ok(GridField {
            m: self.m,
            l: self.l,
            values: data.into_iter().map(|c| c.re).collect(),
        })
    }

    /// Multiplies every coefficient by `symbol[k]` and transforms back.
    pub fn apply_symbol(&self, f: &GridField, symbol: &[f64]) -> Result<GridField> {
        let mut spec = self.forward(f)?;
        spec.scale_by(symbol);
        self.inverse(&spec)
    }

    /// `(-Delta_h)^gamma f`; the mean mode is annihilated.
    pub fn frac_laplacian(&self, f: &GridField, gamma: f64) -> Result<GridField> {
        if !(gamma > 0.0) {
            return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
        }
        self.apply_symbol(f, &self.lambda_powers(gamma))
    }

    /// `(-Delta_h)^{-gamma} f`, defined on mean-zero fields only.
    pub fn inv_frac_laplacian(&self, f: &GridField, gamma: f64) -> Result<GridField> {
        if !(gamma > 0.0) {
            return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
        }
        self.check_field(f)?;
        check_mean_zero(f)?;
        self.apply_symbol(f, &self.lambda_powers(-gamma))
    }

    /// Spectral gradient `(D_x f, D_y f)`. The Nyquist mode of the
    /// differentiated direction has no real derivative and is dropped.
    pub fn gradient(&self, f: &GridField) -> Result<(GridField, GridField)> {
        let spec = self.forward(f)?;
        let m = self.m;
        let mut dx = spec.clone();
        let mut dy = spec;
        for a in 0..m {
            let p = mode_of_index(a, m);
            for b in 0..m {
                let q = mode_of_index(b, m);
                let k = a * m + b;
                let kx = if 2 * p == -(m as i64) { 0.0 } else { self.nu * p as f64 };
                let ky = if 2 * q == -(m as i64) { 0.0 } else { self.nu * q as f64 };
                dx.coeffs[k] *= Complex64::new(0.0, kx);
                dy.coeffs[k] *= Complex64::new(0.0, ky);
            }
        }
        Ok((self.inverse(&dx)?, self.inverse(&dy)?))
    }

    /// `||grad_h f||^2` through the coefficient sum `L^2 sum lambda |c|^2`.
    pub fn gradient_norm_sq(&self, f: &GridField) -> Result<f64> {
        let spec = self.forward(f)?;
        Ok(self.area() * weighted_power(&spec, &self.lambda))
    }

    /// `||grad_h f||^2` evaluated on the grid from the complex derivative
    /// fields `D_x f`, `D_y f` (Nyquist modes kept, so the values can be
    /// complex).
    pub fn gradient_norm_sq_physical(&self, f: &GridField) -> Result<f64> {
        let spec = self.forward(f)?;
        let m = self.m;
        let mut dx = spec.clone();
        let mut dy = spec;
        for a in 0..m {
            let p = mode_of_index(a, m) as f64;
            for b in 0..m {
                let q = mode_of_index(b, m) as f64;
                let k = a * m + b;
                dx.coeffs[k] *= Complex64::new(0.0, self.nu * p);
                dy.coeffs[k] *= Complex64::new(0.0, self.nu * q);
            }
        }
        let gx = self.inverse_complex(&dx)?;
        let gy = self.inverse_complex(&dy)?;
        let h2 = self.spacing() * self.spacing();
        Ok(h2 * gx.iter().zip(&gy).map(|(x, y)| x.norm_sqr() + y.norm_sqr()).sum::<f64>())
    }

    /// `||f||_{-gamma}`, defined on mean-zero fields only.
    pub fn norm_hneg(&self, f: &GridField, gamma: f64) -> Result<f64> {
        self.check_field(f)?;
        check_mean_zero(f)?;
        self.norm_hneg_unchecked(f, gamma)
    }

    /// `||f||_{-gamma}` with the mean mode dropped without a check.
    pub(crate) fn norm_hneg_unchecked(&self, f: &GridField, gamma: f64) -> Result<f64> {
        let spec = self.forward(f)?;
        let w = self.lambda_powers(-gamma);
        Ok((self.area() * weighted_power(&spec, &w)).max(0.0).sqrt())
    }

    /// `||(-Delta_h)^{gamma} f||` via the coefficient sum.
    pub fn norm_frac(&self, f: &GridField, gamma: f64) -> Result<f64> {
        let spec = self.forward(f)?;
        let w = self.lambda_powers(2.0 * gamma);
        Ok((self.area() * weighted_power(&spec, &w)).max(0.0).sqrt())
    }
}

/// `sum_k w_k |c_k|^2`.
fn weighted_power(spec: &SpectralField, weights: &[f64]) -> f64 {
    spec.coeffs
        .iter()
        .zip(weights)
        .map(|(c, w)| w * c.norm_sqr())
        .sum()
}

fn transpose_square(data: &mut [Complex64], m: usize) {
    for a in 0..m {
        for b in (a + 1)..m {
            data.swap(a * m + b, b * m + a);
        }
    }
}

fn check_mean_zero(f: &GridField) -> Result<()> {
    let mean = f.mean();
    let tolerance = MEAN_ZERO_TOLERANCE * f.max_abs();
    if mean.abs() > tolerance {
        return Err(Error::NonZeroMean { mean, tolerance });
    }
    Ok(())
}

/// Real samples on the `M x M` periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    m: usize,
    l: f64,
    values: Vec<f64>,
}

impl GridField {
    pub fn constant(grid: &SpectralGrid, c: f64) -> Self {
        GridField {
            m: grid.m,
            l: grid.l,
            values: vec![c; grid.m * grid.m],
        }
    }

    pub fn from_fn(grid: &SpectralGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let h = grid.spacing();
        let m = grid.m;
        let mut values = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                values.push(f(i as f64 * h, j as f64 * h));
            }
        }
        GridField { m, l: grid.l, values }
    }

    /// Wraps row-major values; `values.len()` must equal `M^2` of `grid`.
    pub fn from_values(grid: &SpectralGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.m * grid.m {
            return Err(Error::DimensionMismatch {
                expected: grid.m,
                found: format!("{} values", values.len()),
            });
        }
        Ok(GridField {
            m: grid.m,
            l: grid.l,
            values,
        })
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn length(&self) -> f64 {
        self.l
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Arithmetic mean of the nodal values.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Discrete mass `<f, 1>`.
    pub fn mass(&self) -> f64 {
        let h = self.l / self.m as f64;
        h * h * self.values.iter().sum::<f64>()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            m: self.m,
            l: self.l,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &GridField, b: f64) -> GridField {
        debug_assert_eq!(self.m, other.m);
        GridField {
            m: self.m,
            l: self.l,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn sub(&self, other: &GridField) -> GridField {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> GridField {
        self.map(|v| a * v)
    }

    /// `max |self - other|`.
    pub fn max_diff(&self, other: &GridField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
    }
}

/// Discrete inner product `h^2 sum f w`.
pub fn inner(f: &GridField, w: &GridField) -> f64 {
    let h = f.l / f.m as f64;
    h * h * f.values.iter().zip(&w.values).map(|(a, b)| a * b).sum::<f64>()
}

pub fn norm_l2(f: &GridField) -> f64 {
    inner(f, f).sqrt()
}

/// `(h^2 sum |f|^q)^{1/q}`.
pub fn norm_lq(f: &GridField, q: f64) -> f64 {
    let h = f.l / f.m as f64;
    (h * h * f.values.iter().map(|v| v.abs().powf(q)).sum::<f64>()).powf(1.0 / q)
}

/// Complex coefficients over the modes `[-M/2, M/2 - 1]^2`, FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    m: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(m: usize) -> Self {
        SpectralField {
            m,
            coeffs: vec![Complex64::default(); m * m],
        }
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of signed mode `(p, q)`.
    pub fn coeff(&self, p: i64, q: i64) -> Option<Complex64> {
        let a = index_of_mode(p, self.m)?;
        let b = index_of_mode(q, self.m)?;
        Some(self.coeffs[a * self.m + b])
    }

    pub fn set_coeff(&mut self, p: i64, q: i64, value: Complex64) -> Option<()> {
        let a = index_of_mode(p, self.m)?;
        let b = index_of_mode(q, self.m)?;
        self.coeffs[a * self.m + b] = value;
        Some(())
    }

    pub fn scale_by(&mut self, symbol: &[f64]) {
        for (c, s) in self.coeffs.iter_mut().zip(symbol) {
            *c *= *s;
        }
    }

    /// `max |c(-p,-q) - conj c(p,q)|` over modes whose negation is in range.
    pub fn hermitian_residual(&self) -> f64 {
        let m = self.m;
        let mut worst = 0.0f64;
        for a in 0..m {
            let p = mode_of_index(a, m);
            for b in 0..m {
                let q = mode_of_index(b, m);
                if let Some(partner) = self.coeff(-p, -q) {
                    let c = self.coeffs[a * m + b];
                    worst = worst.max((partner - c.conj()).norm());
                }
            }
        }
        worst
    }
}
