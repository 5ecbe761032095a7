//! Independent numeric oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use speckle_mld::noise::{apply_speckle, log_compress, log_gg_pdf, sample_log_gg};
use speckle_mld::phantom::{default_phantom_spec, generate_phantom};
use speckle_mld::{GGParams, Image, Seed, SolverConfig};

/// Lanczos log-gamma (g = 7, 9 terms), ~1e-15 relative for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (k, c) in C.iter().enumerate().skip(1) {
        a += c / (x + k as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cf(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cf(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let (mut term, mut sum, mut ap) = (1.0 / a, 1.0 / a, a);
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

// modified Lentz
fn gamma_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// CDF of `ln W` for `W ~ Gamma(a, 1)`.
pub fn log_gamma_cdf(a: f64, u: f64) -> f64 {
    gamma_p(a, u.exp())
}

/// Inverts [`log_gamma_cdf`] by bisection.
pub fn log_gamma_quantile(a: f64, q: f64) -> f64 {
    let (mut lo, mut hi) = (-2000.0_f64, 10.0_f64);
    while log_gamma_cdf(a, hi) < q {
        hi += 10.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_gamma_cdf(a, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Closed-form log-GG density written out independently.
pub fn log_gg_density(x: f64, g: f64, n: f64, d: f64) -> f64 {
    let t = g * (x - d.ln());
    (g.ln() - ln_gamma(n) + n * t - t.exp()).exp()
}

/// `{0.1, 0.316, 1, 3.16, 10}³`.
pub fn log_grid_triples() -> Vec<(f64, f64, f64)> {
    let v: Vec<f64> = (0..5).map(|k| 10f64.powf(-1.0 + 0.5 * k as f64)).collect();
    let mut out = Vec::new();
    for &g in &v {
        for &n in &v {
            for &d in &v {
                out.push((g, n, d));
            }
        }
    }
    out
}

pub fn gg(g: f64, n: f64, d: f64) -> GGParams {
    GGParams::new(g, n, d).unwrap()
}

/// Deterministic pseudo-random image from a tiny LCG, independent of the
/// crate's RNG plumbing.
pub fn lcg_image(w: usize, h: usize, seed: u64, lo: f64, hi: f64) -> Image {
    let mut s = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    let data = (0..w * h)
        .map(|_| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let u = (s >> 11) as f64 / (1u64 << 53) as f64;
            lo + (hi - lo) * u
        })
        .collect();
    Image::new(w, h, data).unwrap()
}

fn fwd(j: &[f64], w: usize, h: usize, x: usize, y: usize) -> (f64, f64) {
    let c = j[y * w + x];
    let gx = if x + 1 < w { j[y * w + x + 1] - c } else { 0.0 };
    let gy = if y + 1 < h {
        j[(y + 1) * w + x] - c
    } else {
        0.0
    };
    (gx, gy)
}

/// Forward-difference smoothed TV, unit spacing.
pub fn naive_tv(j: &[f64], w: usize, h: usize, eps: f64) -> f64 {
    let mut s = 0.0;
    for y in 0..h {
        for x in 0..w {
            let (gx, gy) = fwd(j, w, h, x, y);
            s += (gx * gx + gy * gy + eps * eps).sqrt();
        }
    }
    s
}

/// Double-loop MLD energy, unit spacing.
pub fn naive_mld_energy(
    i: &[f64],
    j: &[f64],
    w: usize,
    h: usize,
    p: (f64, f64, f64),
    alpha: f64,
    eps: f64,
) -> f64 {
    let (g, n, d) = p;
    let mut s = 0.0;
    for y in 0..h {
        for x in 0..w {
            let r = i[y * w + x] - j[y * w + x];
            s += -g * n * r + (g * r).exp() / d.powf(g);
        }
    }
    s + alpha * naive_tv(j, w, h, eps)
}

/// `Σ (I − J)² + α Σ √(|∇J|² + ε²)`, unit spacing.
pub fn rof_energy(i: &[f64], j: &[f64], w: usize, h: usize, alpha: f64, eps: f64) -> f64 {
    let data: f64 = i.iter().zip(j).map(|(a, b)| (a - b) * (a - b)).sum();
    data + alpha * naive_tv(j, w, h, eps)
}

/// Minimizes [`rof_energy`] by cyclic coordinate descent with golden-section
/// line searches on each convex one-dimensional slice.
pub fn rof_coordinate_descent(
    i: &[f64],
    w: usize,
    h: usize,
    alpha: f64,
    eps: f64,
) -> (Vec<f64>, f64) {
    let mut j = i.to_vec();
    let mut e = rof_energy(i, &j, w, h, alpha, eps);
    let (lo, hi) = i
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    for _sweep in 0..2000 {
        for k in 0..w * h {
            let local = |v: f64, j: &mut Vec<f64>| {
                j[k] = v;
                local_energy(i, j, w, h, k, alpha, eps)
            };
            let (mut a, mut b) = (lo - 1.0, hi + 1.0);
            let r = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - r * (b - a);
            let mut d = a + r * (b - a);
            let mut fc = local(c, &mut j);
            let mut fd = local(d, &mut j);
            while b - a > 1e-13 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - r * (b - a);
                    fc = local(c, &mut j);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + r * (b - a);
                    fd = local(d, &mut j);
                }
            }
            j[k] = 0.5 * (a + b);
        }
        let e_new = rof_energy(i, &j, w, h, alpha, eps);
        if e - e_new < 1e-14 * e.abs() {
            e = e_new;
            break;
        }
        e = e_new;
    }
    (j, e)
}

// terms of the ROF energy that involve pixel k
fn local_energy(i: &[f64], j: &[f64], w: usize, h: usize, k: usize, alpha: f64, eps: f64) -> f64 {
    let (x, y) = (k % w, k / w);
    let r = i[k] - j[k];
    let mut s = r * r;
    let mut tv = |x: usize, y: usize| {
        let (gx, gy) = fwd(j, w, h, x, y);
        s += alpha * (gx * gx + gy * gy + eps * eps).sqrt();
    };
    tv(x, y);
    if x > 0 {
        tv(x - 1, y);
    }
    if y > 0 {
        tv(x, y - 1);
    }
    s
}

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut v = x.to_vec();
    (0..x.len())
        .map(|k| {
            let x0 = v[k];
            v[k] = x0 + step;
            let fp = f(&v);
            v[k] = x0 - step;
            let fm = f(&v);
            v[k] = x0;
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

pub const LOG_FLOOR: f64 = 1e-6;

/// Canonical phantom at `size` with log-domain speckle: returns
/// `(ln reference, ln speckled)`.
pub fn noisy_phantom(size: usize, p: &GGParams, seed: u64) -> (Image, Image) {
    let ph = generate_phantom(&default_phantom_spec().with_size(size)).unwrap();
    let speckled = apply_speckle(&ph.cartesian, p, Seed(seed)).unwrap();
    (
        log_compress(&ph.cartesian, LOG_FLOOR).unwrap(),
        log_compress(&speckled, LOG_FLOOR).unwrap(),
    )
}

pub const PEAKED_TRIPLE: (f64, f64, f64) = (12.75, 0.014, 1.53);

/// Simpson integral of `log_gg_pdf` over a window holding all but a negligible tail.
pub fn normalization(g: f64, n: f64, d: f64) -> f64 {
    let p = gg(g, n, d);
    let t_lo = -(40.0 / n + 40.0);
    let t_hi = (50.0 * n + 50.0).ln();
    let (a, b) = (d.ln() + t_lo / g, d.ln() + t_hi / g);
    simpson(|x| log_gg_pdf(x, &p), a, b, 200_000)
}

pub fn gg_mean(g: f64, n: f64, d: f64) -> f64 {
    d * (ln_gamma(n + 1.0 / g) - ln_gamma(n)).exp()
}

/// Chi-square statistic over 100 equiprobable bins of `ln W`, returning the
/// upper-tail p-value.
pub fn chi_square_p(g: f64, n: f64, d: f64, seed: u64) -> f64 {
    const BINS: usize = 100;
    let edges: Vec<f64> = (1..BINS)
        .map(|k| log_gamma_quantile(n, k as f64 / BINS as f64))
        .collect();
    let s = sample_log_gg(&gg(g, n, d), 1_000_000, Seed(seed));
    let mut counts = [0usize; BINS];
    for x in &s {
        let u = g * (x - d.ln());
        counts[edges.partition_point(|&e| e < u)] += 1;
    }
    let expected = s.len() as f64 / BINS as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    gamma_q((BINS - 1) as f64 / 2.0, chi2 / 2.0)
}

/// Settings the acceptance runs use for the GG solver: enough damping for the
/// exponential data term and a smoothing ε that keeps flat regions from
/// stalling the fixed point.
pub fn mld_cfg(alpha: f64) -> SolverConfig {
    SolverConfig {
        alpha,
        beta: 0.7,
        grad_eps: 3e-2,
        max_iter: 2000,
        ..Default::default()
    }
}

/// Smoothing that makes the flat-image fixed point exact to within the step tolerance.
pub fn constant_image_eps(g: f64, n: f64, alpha: f64, beta: f64) -> f64 {
    alpha / ((1.0 - beta) * g * g * n)
}
