//! Variational denoisers sharing one convergence contract: iterate from
//! `J⁰ = I` until `‖J^{k+1} − J^k‖_∞ < tol` or `max_iter` is reached.

mod energy;
mod fixed_point;
mod tvl1;

pub use energy::{
    el_residual_mld, fixed_point_residual, gaussian_energy, mld_energy, second_variation_check,
    smoothed_tv, stencil_coefficients, stencil_divergence, tv_l1_energy, StencilCoefficients,
};
pub use fixed_point::{denoise_mld_gaussian, denoise_mld_gg, DataTerm, GaussianData, GgData};
pub use tvl1::denoise_tvl1;

use crate::error::{Error, Result};
use crate::image::Image;

/// Iterates whose ∞-norm exceeds this are treated as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Regularization weight α.
    pub alpha: f64,
    /// Sub-relaxation β in [0, 1).
    pub beta: f64,
    /// ∞-norm step tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Smoothing ε in `√(|G|² + ε²)`.
    pub grad_eps: f64,
    /// Record the energy every `trace_every` iterations (0 disables).
    pub trace_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 0.5,
            beta: 0.5,
            tol: 1e-5,
            max_iter: 5000,
            grad_eps: 1e-8,
            trace_every: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        SolverConfig {
            alpha,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in [0, 1), got {}",
                self.beta
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        if !(self.grad_eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grad_eps must be positive, got {}",
                self.grad_eps
            )));
        }
        Ok(())
    }
}

/// Denoised image plus convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseResult {
    pub image: Image,
    pub iterations: usize,
    pub final_step_inf_norm: f64,
    pub final_energy: f64,
    pub converged: bool,
    /// The iterate blew past [`DIVERGENCE_BOUND`] or went non-finite; `image`
    /// then holds the last finite iterate.
    pub diverged: bool,
    /// `(iteration, energy)` samples when tracing is enabled.
    pub energy_trace: Vec<(usize, f64)>,
}

pub(crate) fn check_input(i: &Image, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if !i.is_finite() {
        return Err(Error::NonFinite);
    }
    if i.width() < 3 || i.height() < 3 {
        return Err(Error::TooSmall {
            width: i.width(),
            height: i.height(),
            min: 3,
        });
    }
    Ok(())
}

/// Which denoiser to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    MldGg,
    Tvl1,
    MldGaussian,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::MldGg => "mld_gg",
            Method::Tvl1 => "tvl1",
            Method::MldGaussian => "mld_gaussian",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mld_gg" => Ok(Method::MldGg),
            "tvl1" => Ok(Method::Tvl1),
            "mld_gaussian" => Ok(Method::MldGaussian),
            other => Err(Error::Parse(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
