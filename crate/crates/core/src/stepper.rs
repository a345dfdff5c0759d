//! One implicit step of the variable-step BDF2 scheme
//!
//! ```text
//! D_2 phi^n = -kappa (-Delta_h)^alpha mu^n,   mu^n = eps^2 (-Delta_h) phi^n + F'(phi^n)
//! ```
//!
//! with `F'(phi) = phi^3 - phi`, plus the TR-BDF2 start-up for level 1.
//! Every implicit stage has the form `b0 phi + kappa (-Delta_h)^alpha mu(phi) = rhs`
//! and is solved by a fixed-point iteration whose linear part is diagonal
//! in Fourier space.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridField, SpectralGrid};
use crate::kernels::{kernel_pair, TimeMesh};

/// Physical and discretization parameters of the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Fractional order, `0 < alpha <= 1`.
    pub alpha: f64,
    /// Interface width.
    pub epsilon: f64,
    /// Mobility.
    pub kappa: f64,
    /// Domain edge length.
    #[serde(rename = "L")]
    pub length: f64,
    /// Grid nodes per direction.
    #[serde(rename = "M")]
    pub modes: usize,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::Config(format!("L must be positive, got {}", self.length)));
        }
        if self.modes < 4 || self.modes % 2 != 0 {
            return Err(Error::Config(format!("M must be even and >= 4, got {}", self.modes)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<SpectralGrid> {
        self.validate()?;
        SpectralGrid::new(self.modes, self.length)
    }
}

/// Settings of the nonlinear fixed-point solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NonlinearSolveConfig {
    /// Successive-iterate max-norm tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Share of the `eps^2 (-Delta_h)^{1+alpha}` term kept in the implicit
    /// operator; the rest is lagged with the cubic term.
    pub implicit_fraction: f64,
    /// Linear stabilization `S`: `S (-Delta_h)^alpha` is added to the
    /// implicit operator and `S phi` subtracted from the lagged `F'(phi)`.
    /// The converged solution does not depend on it; `S = 1` puts the lagged
    /// slope `F'' - S` in `[-2, 1]` for `|phi| <= 1`.
    pub stabilization: f64,
}

impl Default for NonlinearSolveConfig {
    fn default() -> Self {
        NonlinearSolveConfig {
            tol: 1e-12,
            max_iter: 500,
            implicit_fraction: 1.0,
            stabilization: 1.0,
        }
    }
}

impl NonlinearSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.implicit_fraction) {
            return Err(Error::Config(format!(
                "implicit_fraction must lie in [0, 1], got {}",
                self.implicit_fraction
            )));
        }
        if !(self.stabilization >= 0.0) {
            return Err(Error::Config(format!(
                "stabilization must be nonnegative, got {}",
                self.stabilization
            )));
        }
        Ok(())
    }
}

/// The two most recent levels and the mesh that produced them.
#[derive(Clone, Debug)]
pub struct SolverState {
    /// `phi^{n-1}`.
    pub phi_prev: GridField,
    /// `phi^{n-2}`; absent before the first step.
    pub phi_prev2: Option<GridField>,
    /// Mesh up to level `n - 1`.
    pub mesh: TimeMesh,
}

impl SolverState {
    pub fn initial(phi0: GridField) -> Self {
        SolverState {
            phi_prev: phi0,
            phi_prev2: None,
            mesh: TimeMesh::new(),
        }
    }

    /// Index of `phi_prev`.
    pub fn level(&self) -> usize {
        self.mesh.len()
    }

    pub fn time(&self) -> f64 {
        self.mesh.time(self.mesh.len())
    }

    /// Records the level produced by a step of size `tau`.
    pub fn advance(&mut self, phi_next: GridField, tau: f64) -> Result<()> {
        self.mesh.push(tau)?;
        let prev = std::mem::replace(&mut self.phi_prev, phi_next);
        self.phi_prev2 = Some(prev);
        Ok(())
    }
}

/// Result of a fixed-point solve.
#[derive(Clone, Debug)]
pub struct FixedPointOutcome {
    pub phi: GridField,
    pub iterations: usize,
    /// Successive-iterate max-norm differences, one per iteration.
    pub residuals: Vec<f64>,
}

/// Implicit stepper for one parameter set on one grid.
#[derive(Clone, Debug)]
pub struct Stepper {
    grid: SpectralGrid,
    params: ModelParams,
    solve: NonlinearSolveConfig,
    lam_alpha: Vec<f64>,
    lam_one_alpha: Vec<f64>,
}

const DIVERGENCE_LIMIT: f64 = 1e8;

impl Stepper {
    pub fn new(params: ModelParams, solve: NonlinearSolveConfig) -> Result<Self> {
        solve.validate()?;
        let grid = params.grid()?;
        let lam_alpha = grid.lambda_powers(params.alpha);
        let lam_one_alpha = grid.lambda_powers(1.0 + params.alpha);
        Ok(Stepper {
            grid,
            params,
            solve,
            lam_alpha,
            lam_one_alpha,
        })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn solve_config(&self) -> &NonlinearSolveConfig {
        &self.solve
    }

    /// `mu = eps^2 (-Delta_h) phi + phi^3 - phi`.
    pub fn chemical_potential(&self, phi: &GridField) -> Result<GridField> {
        let lap = self.grid.frac_laplacian(phi, 1.0)?;
        let eps2 = self.params.epsilon * self.params.epsilon;
        Ok(lap.lin_comb(eps2, &phi.map(|p| p * p * p - p), 1.0))
    }

    /// `b0 phi + kappa (-Delta_h)^alpha mu(phi)`.
    pub fn implicit_operator(&self, phi: &GridField, b0: f64) -> Result<GridField> {
        let mu = self.chemical_potential(phi)?;
        let flux = self.grid.apply_symbol(&mu, &self.lam_alpha)?;
        Ok(phi.lin_comb(b0, &flux, self.params.kappa))
    }

    /// `max |b0 phi + kappa (-Delta_h)^alpha mu(phi) - rhs|`.
    pub fn defect(&self, phi: &GridField, rhs: &GridField, b0: f64) -> Result<f64> {
        Ok(self.implicit_operator(phi, b0)?.max_diff(rhs))
    }

    /// Solves `b0 phi + kappa (-Delta_h)^alpha mu(phi) = rhs` starting from
    /// `guess`.
    pub fn fixed_point_iterate(
        &self,
        guess: &GridField,
        rhs: &GridField,
        b0: f64,
    ) -> Result<FixedPointOutcome> {
        if !(b0 > 0.0) {
            return Err(Error::Config(format!("b0 must be positive, got {b0}")));
        }
        let kappa = self.params.kappa;
        let eps2 = self.params.epsilon * self.params.epsilon;
        let theta = self.solve.implicit_fraction;
        let stab = self.solve.stabilization;
        let n = self.lam_alpha.len();

        let rhs_hat = self.grid.forward(rhs)?;
        let mut denom = Vec::with_capacity(n);
        // coefficient of the lagged linear part: kappa((1-theta) eps^2 lam^{1+a} - S lam^a)
        let mut lagged = Vec::with_capacity(n);
        for k in 0..n {
            denom.push(b0 + kappa * (theta * eps2 * self.lam_one_alpha[k] + stab * self.lam_alpha[k]));
            lagged.push(kappa * ((1.0 - theta) * eps2 * self.lam_one_alpha[k] - stab * self.lam_alpha[k]));
        }
        let needs_linear_lag = lagged.iter().any(|&c| c != 0.0);

        let mut phi = guess.clone();
        let mut phi_hat = if needs_linear_lag {
            Some(self.grid.forward(&phi)?)
        } else {
            None
        };
        let mut residuals = Vec::new();
        for iteration in 1..=self.solve.max_iter {
            let cubic = phi.map(|p| p * p * p - p);
            let cubic_hat = self.grid.forward(&cubic)?;
            let mut next_hat = rhs_hat.clone();
            {
                let out = next_hat.coeffs_mut();
                let nl = cubic_hat.coeffs();
                for k in 0..n {
                    let mut explicit = kappa * self.lam_alpha[k] * nl[k];
                    if let Some(ph) = &phi_hat {
                        explicit += lagged[k] * ph.coeffs()[k];
                    }
                    out[k] = (out[k] - explicit) / Complex64::new(denom[k], 0.0);
                }
            }
            let next = self.grid.inverse(&next_hat)?;
            let residual = next.max_diff(&phi);
            residuals.push(residual);
            phi = next;
            if phi_hat.is_some() {
                phi_hat = Some(next_hat);
            }
            if residual <= self.solve.tol {
                return Ok(FixedPointOutcome {
                    phi,
                    iterations: iteration,
                    residuals,
                });
            }
            if !residual.is_finite() || residual > DIVERGENCE_LIMIT {
                return Err(Error::NonConvergence {
                    iterations: iteration,
                    residual,
                });
            }
        }
        Err(Error::NonConvergence {
            iterations: self.solve.max_iter,
            residual: residuals.last().copied().unwrap_or(f64::NAN),
        })
    }

    /// Right-hand side of the BDF2 stage: `b0 phi^{n-1} - b1 (phi^{n-1} - phi^{n-2})`.
    pub fn bdf2_rhs(prev: &GridField, prev2: &GridField, b0: f64, b1: f64) -> GridField {
        let diff = prev.sub(prev2);
        prev.lin_comb(b0, &diff, -b1)
    }

    /// Level `n = state.level() + 1 >= 2` with step `tau_n`.
    pub fn bdf2_step(&self, state: &SolverState, tau_n: f64) -> Result<(GridField, usize)> {
        let level = state.level() + 1;
        let prev2 = match (&state.phi_prev2, level >= 2) {
            (Some(p), true) => p,
            _ => {
                return Err(Error::InsufficientHistory {
                    level,
                    needed: 2,
                    available: state.level() + 1,
                })
            }
        };
        let tau_prev = state.mesh.tau(state.level());
        let ratio = tau_n / tau_prev;
        let (b0, b1) = kernel_pair(tau_n, ratio);
        let rhs = Self::bdf2_rhs(&state.phi_prev, prev2, b0, b1);
        let extrapolation = ratio.min(1.0);
        let guess = state
            .phi_prev
            .lin_comb(1.0 + extrapolation, prev2, -extrapolation);
        let out = self.fixed_point_iterate(&guess, &rhs, b0)?;
        Ok((out.phi, out.iterations))
    }

    /// Level 1 from `phi0`: a trapezoidal stage to `tau_1 / 2`, then a BDF2
    /// stage with two equal half steps.
    pub fn trbdf2_first_step(&self, phi0: &GridField, tau_1: f64) -> Result<(GridField, usize)> {
        if !(tau_1 > 0.0) {
            return Err(Error::Config(format!("tau_1 must be positive, got {tau_1}")));
        }
        let half = 0.5 * tau_1;
        // (phi - phi0) / half = -kappa (-Delta)^alpha (mu(phi) + mu(phi0)) / 2
        let b0_tr = 2.0 / half;
        let mu0 = self.chemical_potential(phi0)?;
        let flux0 = self.grid.apply_symbol(&mu0, &self.lam_alpha)?;
        let rhs_tr = phi0.lin_comb(b0_tr, &flux0, -self.params.kappa);
        let stage = self.fixed_point_iterate(phi0, &rhs_tr, b0_tr)?;

        let (b0, b1) = kernel_pair(half, 1.0);
        let rhs = Self::bdf2_rhs(&stage.phi, phi0, b0, b1);
        let guess = stage.phi.lin_comb(2.0, phi0, -1.0);
        let out = self.fixed_point_iterate(&guess, &rhs, b0)?;
        Ok((out.phi, stage.iterations + out.iterations))
    }

    /// Advances `state` by one level: TR-BDF2 at level 1, BDF2 afterwards.
    pub fn step(&self, state: &SolverState, tau: f64) -> Result<(GridField, usize)> {
        if state.level() == 0 {
            self.trbdf2_first_step(&state.phi_prev, tau)
        } else {
            self.bdf2_step(state, tau)
        }
    }
}
