//! Sub-relaxed fixed-point iteration for the smooth data terms:
//!
//! `J^{n+1} = β J^n + (1 − β) (D(I, J^n) + α f^n) / (α s^n)`
//!
//! where `D` is the data-term derivative `dF/dJ` and `f`, `s` are the
//! half-pixel stencil sums of [`super::stencil_coefficients`]. Every pixel
//! reads only the previous iterate (Jacobi order).

use super::energy::{Conductances, GgTerm};
use super::{
    check_input, gaussian_energy, mld_energy, DenoiseResult, SolverConfig, DIVERGENCE_BOUND,
};
use crate::error::Result;
use crate::image::Image;
use crate::noise::{GGParams, GaussianParams};
use crate::par;

/// A differentiable data term of the form `Σ φ(I, J)`.
pub trait DataTerm: Sync {
    /// `∂φ/∂J` at one pixel.
    fn derivative(&self, i: f64, j: f64) -> f64;

    /// Full energy including the smoothed TV term.
    fn energy(&self, i: &Image, j: &Image, alpha: f64, grad_eps: f64) -> Result<f64>;
}

/// Negative log-likelihood of log-compressed generalized-gamma noise.
#[derive(Debug, Clone, Copy)]
pub struct GgData {
    params: GGParams,
    term: GgTerm,
}

impl GgData {
    pub fn new(params: GGParams) -> Self {
        GgData {
            params,
            term: GgTerm::new(&params),
        }
    }
}

impl DataTerm for GgData {
    #[inline]
    fn derivative(&self, i: f64, j: f64) -> f64 {
        self.term.derivative(i - j)
    }

    fn energy(&self, i: &Image, j: &Image, alpha: f64, grad_eps: f64) -> Result<f64> {
        mld_energy(i, j, &self.params, alpha, grad_eps)
    }
}

/// `(I − J − μ)²`, the Gaussian-noise data term.
#[derive(Debug, Clone, Copy)]
pub struct GaussianData {
    params: GaussianParams,
}

impl GaussianData {
    pub fn new(params: GaussianParams) -> Self {
        GaussianData { params }
    }
}

impl DataTerm for GaussianData {
    #[inline]
    fn derivative(&self, i: f64, j: f64) -> f64 {
        -2.0 * (i - j - self.params.mu())
    }

    fn energy(&self, i: &Image, j: &Image, alpha: f64, grad_eps: f64) -> Result<f64> {
        gaussian_energy(i, j, &self.params, alpha, grad_eps)
    }
}

/// MLD denoising under log-compressed generalized-gamma speckle.
pub fn denoise_mld_gg(i: &Image, p: &GGParams, cfg: &SolverConfig) -> Result<DenoiseResult> {
    fixed_point(i, &GgData::new(*p), cfg)
}

/// MLD denoising under additive Gaussian noise; `μ = 0` is the ROF model with
/// a TV regularizer.
pub fn denoise_mld_gaussian(
    i: &Image,
    p: &GaussianParams,
    cfg: &SolverConfig,
) -> Result<DenoiseResult> {
    fixed_point(i, &GaussianData::new(*p), cfg)
}

/// Runs the fixed-point scheme for any smooth data term.
pub fn fixed_point<D: DataTerm>(i: &Image, data: &D, cfg: &SolverConfig) -> Result<DenoiseResult> {
    check_input(i, cfg)?;
    let (w, h) = (i.width(), i.height());
    let (alpha, beta) = (cfg.alpha, cfg.beta);

    let mut cur = i.clone();
    let mut next = vec![0.0; w * h];
    let mut cond = Conductances::new(w, h);
    let mut trace = Vec::new();
    let mut step = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut diverged = false;

    if cfg.trace_every > 0 {
        trace.push((0, data.energy(i, &cur, alpha, cfg.grad_eps)?));
    }

    while iterations < cfg.max_iter {
        cond.update(&cur, cfg.grad_eps);
        {
            let src = cur.data();
            let obs = i.data();
            let cond = &cond;
            par::fill_rows(&mut next, w, |y, row| {
                let (obs, old) = (&obs[y * w..(y + 1) * w], &src[y * w..(y + 1) * w]);
                let mut sw = vec![0.0; w];
                cond.row_sums(src, y, row, &mut sw);
                // row holds Σ c_e J_nb; with f = −Σ c_e J_nb and s = −Σ c_e the
                // update (D + αf)/(αs) is (Σ c_e J_nb − D/α)/Σ c_e
                for x in 0..w {
                    let d = data.derivative(obs[x], old[x]);
                    let update = (row[x] - d / alpha) / sw[x];
                    row[x] = beta * old[x] + (1.0 - beta) * update;
                }
            });
        }
        iterations += 1;

        let mut max_step = 0.0f64;
        let mut max_abs = 0.0f64;
        let mut finite = true;
        for (a, b) in next.iter().zip(cur.data()) {
            finite &= a.is_finite();
            max_step = max_step.max((a - b).abs());
            max_abs = max_abs.max(a.abs());
        }
        if !finite || max_abs > DIVERGENCE_BOUND {
            diverged = true;
            break;
        }
        step = max_step;
        std::mem::swap(cur.data_vec_mut(), &mut next);

        if cfg.trace_every > 0 && iterations % cfg.trace_every == 0 {
            trace.push((iterations, data.energy(i, &cur, alpha, cfg.grad_eps)?));
        }
        if step < cfg.tol {
            converged = true;
            break;
        }
    }

    let final_energy = data.energy(i, &cur, alpha, cfg.grad_eps)?;
    Ok(DenoiseResult {
        image: cur,
        iterations,
        final_step_inf_norm: step,
        final_energy,
        converged,
        diverged,
        energy_trace: trace,
    })
}
