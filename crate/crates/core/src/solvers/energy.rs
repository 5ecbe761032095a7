//! Discrete energies, their gradients, and the fixed-point stencil terms.

use crate::error::Result;
use crate::image::Image;
use crate::noise::{gg_likelihood, GGParams, GaussianParams, EXP_CLAMP};
use crate::par;

/// Forward-difference gradient at pixel `(x, y)`; zero across the replicated
/// boundary.
#[inline]
fn forward_gradient(j: &Image, x: usize, y: usize) -> (f64, f64) {
    let c = j.get(x, y);
    let gx = if x + 1 < j.width() {
        (j.get(x + 1, y) - c) / j.dx()
    } else {
        0.0
    };
    let gy = if y + 1 < j.height() {
        (j.get(x, y + 1) - c) / j.dy()
    } else {
        0.0
    };
    (gx, gy)
}

/// `Σ √(|∇J|² + ε²)` with forward differences.
pub fn smoothed_tv(j: &Image, grad_eps: f64) -> f64 {
    let eps2 = grad_eps * grad_eps;
    par::sum_rows(j.height(), |y| {
        (0..j.width())
            .map(|x| {
                let (gx, gy) = forward_gradient(j, x, y);
                (gx * gx + gy * gy + eps2).sqrt()
            })
            .sum()
    })
}

fn row_sum(i: &Image, j: &Image, f: impl Fn(f64, f64) -> f64 + Sync + Send) -> f64 {
    let w = i.width();
    par::sum_rows(i.height(), |y| {
        let (a, b) = (&i.data()[y * w..(y + 1) * w], &j.data()[y * w..(y + 1) * w]);
        a.iter().zip(b).map(|(&u, &v)| f(u, v)).sum()
    })
}

/// `Σ [−γν(I−J) + e^{γ(I−J)}/δ^γ + α √(|∇J|² + ε²)]`.
pub fn mld_energy(i: &Image, j: &Image, p: &GGParams, alpha: f64, grad_eps: f64) -> Result<f64> {
    i.check_same_shape(j)?;
    let inv = 1.0 / p.delta_pow_gamma();
    let data = row_sum(i, j, |a, b| -gg_likelihood(a - b, p, inv));
    Ok(data + alpha * smoothed_tv(j, grad_eps))
}

/// `Σ [(I − J − μ)² + α √(|∇J|² + ε²)]`.
pub fn gaussian_energy(
    i: &Image,
    j: &Image,
    p: &GaussianParams,
    alpha: f64,
    grad_eps: f64,
) -> Result<f64> {
    i.check_same_shape(j)?;
    let mu = p.mu();
    let data = row_sum(i, j, |a, b| {
        let r = a - b - mu;
        r * r
    });
    Ok(data + alpha * smoothed_tv(j, grad_eps))
}

/// `Σ [|I − J| + α |∇J|]`, unsmoothed.
pub fn tv_l1_energy(i: &Image, j: &Image, alpha: f64) -> Result<f64> {
    i.check_same_shape(j)?;
    let data = row_sum(i, j, |a, b| (a - b).abs());
    let tv = par::sum_rows(j.height(), |y| {
        (0..j.width())
            .map(|x| {
                let (gx, gy) = forward_gradient(j, x, y);
                gx.hypot(gy)
            })
            .sum()
    });
    Ok(data + alpha * tv)
}

/// Exact gradient of [`mld_energy`] with respect to every pixel: the discrete
/// Euler–Lagrange residual `γν − (γ/δ^γ) e^{γ(I−J)} − α div(∇J/|∇J|)`.
pub fn el_residual_mld(
    i: &Image,
    j: &Image,
    p: &GGParams,
    alpha: f64,
    grad_eps: f64,
) -> Result<Image> {
    i.check_same_shape(j)?;
    let (w, h) = (j.width(), j.height());
    let eps2 = grad_eps * grad_eps;
    // q = ∇J / |∇J|_ε per pixel
    let mut qx = vec![0.0; w * h];
    let mut qy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (gx, gy) = forward_gradient(j, x, y);
            let m = (gx * gx + gy * gy + eps2).sqrt();
            qx[y * w + x] = gx / m;
            qy[y * w + x] = gy / m;
        }
    }
    let gg = GgTerm::new(p);
    let (dx, dy) = (j.dx(), j.dy());
    let mut out = vec![0.0; w * h];
    par::fill_rows(&mut out, w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let k = y * w + x;
            // adjoint of the forward difference, zero flux on the boundary
            let mut tv = 0.0;
            if x + 1 < w {
                tv -= qx[k] / dx;
            }
            if x > 0 {
                tv += qx[k - 1] / dx;
            }
            if y + 1 < h {
                tv -= qy[k] / dy;
            }
            if y > 0 {
                tv += qy[k - w] / dy;
            }
            *o = gg.derivative(i.data()[k] - j.data()[k]) + alpha * tv;
        }
    });
    Ok(j.with_data(out))
}

/// `dF/dJ` of the GG data term as a function of `Δ = I − J`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GgTerm {
    gamma_nu: f64,
    gamma: f64,
    gamma_over_dg: f64,
}

impl GgTerm {
    pub(crate) fn new(p: &GGParams) -> Self {
        GgTerm {
            gamma_nu: p.gamma() * p.nu(),
            gamma: p.gamma(),
            gamma_over_dg: p.gamma() / p.delta_pow_gamma(),
        }
    }

    #[inline]
    pub(crate) fn derivative(&self, delta_ij: f64) -> f64 {
        self.gamma_nu - self.gamma_over_dg * (self.gamma * delta_ij).min(EXP_CLAMP).exp()
    }
}

/// Edge conductances `1/(Δ √(|G|² + ε²))` of the half-pixel gradients, in a
/// padded layout so the pixel update needs no boundary branches.
///
/// `cx` has `width + 1` entries per row: entry `x + 1` is the edge
/// `(x+½, y)`, and entries `0` and `width` are the zero-flux ghost edges.
/// `cy` has `height + 1` rows of `width`: row `y + 1` is the edge `(x, y+½)`,
/// and rows `0` and `height` are zero.
#[derive(Debug, Clone)]
pub(crate) struct Conductances {
    w: usize,
    h: usize,
    pub(crate) cx: Vec<f64>,
    pub(crate) cy: Vec<f64>,
}

impl Conductances {
    pub(crate) fn new(w: usize, h: usize) -> Self {
        Conductances {
            w,
            h,
            cx: vec![0.0; (w + 1) * h],
            cy: vec![0.0; w * (h + 1)],
        }
    }

    pub(crate) fn update(&mut self, j: &Image, grad_eps: f64) {
        let (w, h) = (self.w, self.h);
        let src = j.data();
        let (inv_dx, inv_dy) = (1.0 / j.dx(), 1.0 / j.dy());
        let (qx, qy) = (0.25 * inv_dx, 0.25 * inv_dy);
        let eps2 = grad_eps * grad_eps;
        par::fill_rows(&mut self.cx, w + 1, |y, row| {
            let cur = &src[y * w..(y + 1) * w];
            let up = &src[y.saturating_sub(1) * w..][..w];
            let down = &src[(y + 1).min(h - 1) * w..][..w];
            row[0] = 0.0;
            row[w] = 0.0;
            let n = w - 1;
            let (c0, c1) = (&cur[..n], &cur[1..]);
            let (u0, u1) = (&up[..n], &up[1..]);
            let (d0, d1) = (&down[..n], &down[1..]);
            let out = &mut row[1..w];
            for x in 0..n {
                let normal = (c1[x] - c0[x]) * inv_dx;
                let cross = (d1[x] + d0[x] - u1[x] - u0[x]) * qy;
                out[x] = inv_dx / (normal * normal + cross * cross + eps2).sqrt();
            }
        });
        par::fill_rows(&mut self.cy, w, |yy, row| {
            if yy == 0 || yy == h {
                row.fill(0.0);
                return;
            }
            let y = yy - 1;
            let cur = &src[y * w..(y + 1) * w];
            let down = &src[(y + 1) * w..(y + 2) * w];
            let cond = |x: usize, xm: usize, xp: usize| {
                let cross = (down[xp] + cur[xp] - down[xm] - cur[xm]) * qx;
                let normal = (down[x] - cur[x]) * inv_dy;
                inv_dy / (cross * cross + normal * normal + eps2).sqrt()
            };
            row[0] = cond(0, 0, 1.min(w - 1));
            if w > 1 {
                row[w - 1] = cond(w - 1, w - 2, w - 1);
            }
            if w > 2 {
                let n = w - 2;
                let (cm, c, cp) = (&cur[..n], &cur[1..n + 1], &cur[2..]);
                let (dm, d, dp) = (&down[..n], &down[1..n + 1], &down[2..]);
                let out = &mut row[1..n + 1];
                for x in 0..n {
                    let cross = (dp[x] + cp[x] - dm[x] - cm[x]) * qx;
                    let normal = (d[x] - c[x]) * inv_dy;
                    out[x] = inv_dy / (cross * cross + normal * normal + eps2).sqrt();
                }
            }
        });
    }

    /// Writes `Σ c_e J_nb` and `Σ c_e` over the four edges of every pixel in
    /// row `y`.
    pub(crate) fn row_sums(&self, src: &[f64], y: usize, swj: &mut [f64], sw: &mut [f64]) {
        let (w, h) = (self.w, self.h);
        let cx = &self.cx[y * (w + 1)..(y + 1) * (w + 1)];
        let top = &self.cy[y * w..(y + 1) * w];
        let bottom = &self.cy[(y + 1) * w..(y + 2) * w];
        let cur = &src[y * w..(y + 1) * w];
        let up = &src[y.saturating_sub(1) * w..][..w];
        let down = &src[(y + 1).min(h - 1) * w..][..w];
        let (swj, sw) = (&mut swj[..w], &mut sw[..w]);
        // the ghost conductances at both ends are zero, so clamped neighbours
        // contribute nothing
        let (left, right) = (&cx[..w], &cx[1..]);
        for x in [0, w - 1] {
            let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
            swj[x] = left[x] * cur[xm] + right[x] * cur[xp] + top[x] * up[x] + bottom[x] * down[x];
            sw[x] = left[x] + right[x] + top[x] + bottom[x];
        }
        if w > 2 {
            let n = w - 2;
            let (l, r) = (&left[1..n + 1], &right[1..n + 1]);
            let (t, b) = (&top[1..n + 1], &bottom[1..n + 1]);
            let (jm, jp) = (&cur[..n], &cur[2..]);
            let (ju, jd) = (&up[1..n + 1], &down[1..n + 1]);
            let (oj, os) = (&mut swj[1..n + 1], &mut sw[1..n + 1]);
            for x in 0..n {
                oj[x] = l[x] * jm[x] + r[x] * jp[x] + t[x] * ju[x] + b[x] * jd[x];
                os[x] = l[x] + r[x] + t[x] + b[x];
            }
        }
    }
}

/// The `f` and `s` fields of the fixed-point update.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilCoefficients {
    pub f: Image,
    pub s: Image,
}

/// `f = −Σ J_nb/(Δ|G_e|)`, `s = −Σ 1/(Δ|G_e|)` over the four pixel edges.
/// Edges against the replicated boundary carry no flux and are omitted.
pub fn stencil_coefficients(j: &Image, grad_eps: f64) -> Result<StencilCoefficients> {
    let (w, h) = (j.width(), j.height());
    j.half_pixel_gradients()?;
    let mut c = Conductances::new(w, h);
    c.update(j, grad_eps);
    let mut f = vec![0.0; w * h];
    let mut s = vec![0.0; w * h];
    for y in 0..h {
        let (fr, sr) = (&mut f[y * w..(y + 1) * w], &mut s[y * w..(y + 1) * w]);
        c.row_sums(j.data(), y, fr, sr);
        fr.iter_mut().chain(sr.iter_mut()).for_each(|v| *v = -*v);
    }
    Ok(StencilCoefficients {
        f: j.with_data(f),
        s: j.with_data(s),
    })
}

/// Flux form `Σ_e (J_nb − J) / (Δ |G_e|)` of `div(∇J/|∇J|)` on the
/// half-pixel stencil, computed edge by edge.
pub fn stencil_divergence(j: &Image, grad_eps: f64) -> Result<Image> {
    let g = j.half_pixel_gradients()?;
    let (w, h) = (j.width(), j.height());
    let eps2 = grad_eps * grad_eps;
    let mag = |v: [f64; 2]| (v[0] * v[0] + v[1] * v[1] + eps2).sqrt();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let c = j.get(x, y);
            let mut acc = 0.0;
            if x + 1 < w {
                acc += (j.get(x + 1, y) - c) / mag(g.x_edge(x, y)) / j.dx();
            }
            if x > 0 {
                acc -= (c - j.get(x - 1, y)) / mag(g.x_edge(x - 1, y)) / j.dx();
            }
            if y + 1 < h {
                acc += (j.get(x, y + 1) - c) / mag(g.y_edge(x, y)) / j.dy();
            }
            if y > 0 {
                acc -= (c - j.get(x, y - 1)) / mag(g.y_edge(x, y - 1)) / j.dy();
            }
            out[y * w + x] = acc;
        }
    }
    Ok(j.with_data(out))
}

/// Residual of the fixed-point equation, `γν − (γ/δ^γ)e^{γ(I−J)} − α(−f + sJ)`.
/// It vanishes exactly at a fixed point of the MLD iteration.
pub fn fixed_point_residual(
    i: &Image,
    j: &Image,
    p: &GGParams,
    alpha: f64,
    grad_eps: f64,
) -> Result<Image> {
    i.check_same_shape(j)?;
    let StencilCoefficients { f, s } = stencil_coefficients(j, grad_eps)?;
    let gg = GgTerm::new(p);
    let out = (0..j.len())
        .map(|k| {
            let div = -f.data()[k] + s.data()[k] * j.data()[k];
            gg.derivative(i.data()[k] - j.data()[k]) - alpha * div
        })
        .collect();
    Ok(j.with_data(out))
}

/// Second directional difference `[F(J+τη) − 2F(J) + F(J−τη)]/τ²` of the
/// smoothed MLD energy at `τ = 1e-4`.
pub fn second_variation_check(
    i: &Image,
    j: &Image,
    eta: &Image,
    p: &GGParams,
    alpha: f64,
    grad_eps: f64,
) -> Result<f64> {
    const TAU: f64 = 1e-4;
    i.check_same_shape(j)?;
    j.check_same_shape(eta)?;
    if eta.data().iter().all(|&v| v == 0.0) {
        return Err(crate::error::Error::InvalidParameter(
            "perturbation must not be identically zero".into(),
        ));
    }
    let plus = j.zip_map(eta, |a, e| a + TAU * e)?;
    let minus = j.zip_map(eta, |a, e| a - TAU * e)?;
    let f = |x: &Image| mld_energy(i, x, p, alpha, grad_eps);
    Ok((f(&plus)? - 2.0 * f(j)? + f(&minus)?) / (TAU * TAU))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(g: f64, n: f64, d: f64) -> GGParams {
        GGParams::new(g, n, d).unwrap()
    }

    fn noise_image(w: usize, h: usize, seed: u64) -> Image {
        let v = crate::noise::sample_gg(&p(1.0, 1.0, 1.0), w * h, crate::noise::Seed(seed));
        Image::new(w, h, v).unwrap()
    }

    #[test]
    fn energy_of_constant() {
        let i = Image::filled(5, 4, 0.3).unwrap();
        let e = mld_energy(&i, &i, &p(1.0, 1.0, 1.0), 0.7, 1e-3).unwrap();
        assert_relative_eq!(e, 20.0 * (1.0 + 0.7 * 1e-3), max_relative = 1e-14);
    }

    #[test]
    fn energy_matches_naive_loop() {
        let i = noise_image(4, 4, 1);
        let j = noise_image(4, 4, 2);
        let q = p(1.5, 0.8, 1.2);
        let (alpha, eps) = (0.4, 1e-3);
        let mut naive = 0.0;
        for y in 0..4 {
            for x in 0..4 {
                let d = i.get(x, y) - j.get(x, y);
                naive +=
                    -q.gamma() * q.nu() * d + (q.gamma() * d).exp() / q.delta().powf(q.gamma());
                let gx = if x < 3 {
                    j.get(x + 1, y) - j.get(x, y)
                } else {
                    0.0
                };
                let gy = if y < 3 {
                    j.get(x, y + 1) - j.get(x, y)
                } else {
                    0.0
                };
                naive += alpha * (gx * gx + gy * gy + eps * eps).sqrt();
            }
        }
        let e = mld_energy(&i, &j, &q, alpha, eps).unwrap();
        assert_relative_eq!(e, naive, max_relative = 1e-12);
    }

    #[test]
    fn residual_zero_at_neutral_constant() {
        let i = Image::filled(5, 5, 0.5).unwrap();
        let one = p(1.0, 1.0, 1.0);
        let r = el_residual_mld(&i, &i, &one, 0.5, 1e-8).unwrap();
        assert!(r.data().iter().all(|v| v.abs() < 1e-15));
        let r = fixed_point_residual(&i, &i, &one, 0.5, 1e-8).unwrap();
        assert!(r.data().iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn divergence_identity() {
        for seed in 0..5 {
            let j = noise_image(7, 6, seed);
            let StencilCoefficients { f, s } = stencil_coefficients(&j, 1e-3).unwrap();
            let direct = stencil_divergence(&j, 1e-3).unwrap();
            for k in 0..j.len() {
                let split = -f.data()[k] + s.data()[k] * j.data()[k];
                let scale = f.data()[k].abs().max(1.0);
                assert!((split - direct.data()[k]).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn second_variation_rejects_zero_direction() {
        let i = Image::filled(4, 4, 0.1).unwrap();
        let zero = Image::filled(4, 4, 0.0).unwrap();
        assert!(second_variation_check(&i, &i, &zero, &p(1.0, 1.0, 1.0), 0.5, 1e-8).is_err());
    }

    #[test]
    fn tv_l1_energy_of_identity() {
        let i = Image::filled(4, 4, 0.2).unwrap();
        assert_eq!(tv_l1_energy(&i, &i, 0.3).unwrap(), 0.0);
    }
}
