//! Generalized-gamma speckle: densities, sampling, log-compression and the
//! maximum-likelihood data terms.

use libm::lgamma as ln_gamma;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::par;

/// Exponents above this are clamped before `exp` in the data terms.
pub const EXP_CLAMP: f64 = 700.0;

/// Default floor used by [`log_compress`].
pub const DEFAULT_LOG_FLOOR: f64 = 1e-6;

const SAMPLE_BLOCK: usize = 4096;

/// Generalized-gamma shape/scale triple `(γ, ν, δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GGParams {
    gamma: f64,
    nu: f64,
    delta: f64,
}

impl GGParams {
    pub fn new(gamma: f64, nu: f64, delta: f64) -> Result<Self> {
        for (name, v) in [("gamma", gamma), ("nu", nu), ("delta", delta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(GGParams { gamma, nu, delta })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `δ^γ`.
    pub fn delta_pow_gamma(&self) -> f64 {
        self.delta.powf(self.gamma)
    }

    /// `E[ε] = δ Γ(ν + 1/γ) / Γ(ν)`.
    pub fn mean(&self) -> f64 {
        self.delta * (ln_gamma(self.nu + 1.0 / self.gamma) - ln_gamma(self.nu)).exp()
    }

    /// Maximizer of the per-pixel data term and mode of the log-compressed
    /// density: `ln δ + ln ν / γ`.
    pub fn log_mode(&self) -> f64 {
        self.delta.ln() + self.nu.ln() / self.gamma
    }
}

/// Mean and standard deviation of additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    mu: f64,
    sigma: f64,
}

impl GaussianParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mu must be finite, got {mu}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(GaussianParams { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Seed for every random draw in the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

impl Seed {
    /// RNG for one independent stream. Streams let row- or block-partitioned
    /// generation give the same result serially and in parallel.
    pub fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }
}

/// Generalized-gamma density `γ/(δ^{γν} Γ(ν)) ε^{γν-1} exp(-(ε/δ)^γ)`.
pub fn gg_pdf(eps: f64, p: &GGParams) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("gg_pdf needs eps > 0, got {eps}")));
    }
    let (g, n, d) = (p.gamma, p.nu, p.delta);
    let log = g.ln() - g * n * d.ln() - ln_gamma(n) + (g * n - 1.0) * eps.ln() - (eps / d).powf(g);
    Ok(log.exp())
}

/// Density of `ln ε` for generalized-gamma `ε`.
pub fn log_gg_pdf(eps_tilde: f64, p: &GGParams) -> f64 {
    let t = p.gamma * (eps_tilde - p.delta.ln());
    let log = p.gamma.ln() - ln_gamma(p.nu) + p.nu * t - t.exp();
    if log.is_nan() {
        return 0.0;
    }
    log.exp()
}

/// Gamma(shape, 1) variate by Marsaglia and Tsang's squeeze method, returned
/// as its natural logarithm. Shapes below one use the `U^{1/shape}` boost,
/// applied in the log domain so tiny variates never underflow to zero.
pub fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    let (a, boost) = if shape < 1.0 {
        let u: f64 = rng.random::<f64>();
        // (0, 1]: avoid ln(0)
        (shape + 1.0, (1.0 - u).ln() / shape)
    } else {
        (shape, 0.0)
    };
    let d = a - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.random::<f64>();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return (d * v).ln() + boost;
        }
    }
}

/// Draws one log-compressed noise value `ln ε = ln δ + ln(W)/γ`, `W ~ Gamma(ν, 1)`.
pub fn sample_log_gg_one<R: Rng + ?Sized>(p: &GGParams, rng: &mut R) -> f64 {
    p.delta.ln() + sample_log_gamma(p.nu, rng) / p.gamma
}

/// `n` generalized-gamma variates `ε = δ W^{1/γ}`.
pub fn sample_gg(p: &GGParams, n: usize, seed: Seed) -> Vec<f64> {
    sample_log_gg(p, n, seed)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// `n` log-compressed variates `ln ε`, generated in fixed blocks with one RNG
/// stream per block.
pub fn sample_log_gg(p: &GGParams, n: usize, seed: Seed) -> Vec<f64> {
    let blocks = n.div_ceil(SAMPLE_BLOCK);
    let parts = par::map_indexed(blocks, |b| {
        let mut rng = seed.stream(b as u64);
        let len = SAMPLE_BLOCK.min(n - b * SAMPLE_BLOCK);
        (0..len)
            .map(|_| sample_log_gg_one(p, &mut rng))
            .collect::<Vec<_>>()
    });
    parts.into_iter().flatten().collect()
}

/// Log-compressed noise field with one RNG stream per row.
pub fn log_noise_field(width: usize, height: usize, p: &GGParams, seed: Seed) -> Result<Image> {
    let mut data = vec![0.0; width * height];
    par::fill_rows(&mut data, width, |y, row| {
        let mut rng = seed.stream(y as u64);
        for v in row.iter_mut() {
            *v = sample_log_gg_one(p, &mut rng);
        }
    });
    Image::new(width, height, data)
}

/// Multiplicative speckle `u = v ε` with i.i.d. generalized-gamma `ε`.
pub fn apply_speckle(v: &Image, p: &GGParams, seed: Seed) -> Result<Image> {
    if let Some(bad) = v.data().iter().find(|&&x| !(x >= 0.0)) {
        return Err(Error::Domain(format!(
            "speckle needs non-negative pixels, found {bad}"
        )));
    }
    let noise = log_noise_field(v.width(), v.height(), p, seed)?;
    v.zip_map(&noise, |a, e| a * e.exp())
}

/// Pixel-wise `ln(max(u, floor))`.
pub fn log_compress(u: &Image, floor: f64) -> Result<Image> {
    if !(floor > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "log floor must be positive, got {floor}"
        )));
    }
    Ok(u.map(|v| v.max(floor).ln()))
}

/// Per-pixel GG log-likelihood (constant dropped) at residual `Δ = I - J`.
#[inline]
pub fn gg_likelihood(delta_ij: f64, p: &GGParams, inv_delta_pow_gamma: f64) -> f64 {
    p.gamma * p.nu * delta_ij - inv_delta_pow_gamma * (p.gamma * delta_ij).min(EXP_CLAMP).exp()
}

/// Sum over pixels of `γν(I-J) - e^{γ(I-J)}/δ^γ`.
pub fn mld_data_term_gg(i: &Image, j: &Image, p: &GGParams) -> Result<f64> {
    i.check_same_shape(j)?;
    let inv = 1.0 / p.delta_pow_gamma();
    Ok(i.data()
        .iter()
        .zip(j.data())
        .map(|(a, b)| gg_likelihood(a - b, p, inv))
        .sum())
}

/// `-Σ (I - J - μ)²`.
pub fn mld_data_term_gaussian(i: &Image, j: &Image, p: &GaussianParams) -> Result<f64> {
    i.check_same_shape(j)?;
    Ok(-i
        .data()
        .iter()
        .zip(j.data())
        .map(|(a, b)| {
            let r = a - b - p.mu;
            r * r
        })
        .sum::<f64>())
}
