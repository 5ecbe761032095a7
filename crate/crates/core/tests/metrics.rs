mod common;

use common::lcg_image;
use proptest::prelude::*;
use speckle_mld::metrics::*;
use speckle_mld::{Error, Image};

fn naive_laplacian(img: &Image) -> Vec<f64> {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let at = |x: isize, y: isize| img.get(x.clamp(0, w - 1) as usize, y.clamp(0, h - 1) as usize);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            out.push(at(x + 1, y) + at(x - 1, y) + at(x, y + 1) + at(x, y - 1) - 4.0 * at(x, y));
        }
    }
    out
}

fn naive_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

/// Direct 2D DFT low-pass keeping signed frequencies `|k| <= n/4` per axis.
fn naive_lowpass(img: &Image) -> Vec<f64> {
    use std::f64::consts::TAU;
    let (w, h) = (img.width(), img.height());
    let signed = |k: usize, n: usize| {
        if k <= n / 2 {
            k as isize
        } else {
            k as isize - n as isize
        }
    };
    let mut spec = vec![(0.0, 0.0); w * h];
    for v in 0..h {
        for u in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let ph =
                        -TAU * (u as f64 * x as f64 / w as f64 + v as f64 * y as f64 / h as f64);
                    re += img.get(x, y) * ph.cos();
                    im += img.get(x, y) * ph.sin();
                }
            }
            let keep =
                signed(u, w).abs() <= (w / 4) as isize && signed(v, h).abs() <= (h / 4) as isize;
            spec[v * w + u] = if keep { (re, im) } else { (0.0, 0.0) };
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut re = 0.0;
            for v in 0..h {
                for u in 0..w {
                    let ph =
                        TAU * (u as f64 * x as f64 / w as f64 + v as f64 * y as f64 / h as f64);
                    let (a, b) = spec[v * w + u];
                    re += a * ph.cos() - b * ph.sin();
                }
            }
            out[y * w + x] = re / (w * h) as f64;
        }
    }
    out
}

#[test]
fn eps_b_examples() {
    let r = lcg_image(6, 5, 1, 0.1, 1.0);
    assert_eq!(eps_b(&r, &r).unwrap(), 0.0);
    assert!((eps_b(&r, &r.map(|v| 2.0 * v)).unwrap() - 1.0).abs() < 1e-15);
    let ones = Image::filled(2, 2, 1.0).unwrap();
    let j = Image::new(2, 2, vec![1.0, 1.0, 1.0, 0.0]).unwrap();
    assert!((eps_b(&ones, &j).unwrap() - 0.5).abs() < 1e-15);
    let zero = Image::filled(2, 2, 0.0).unwrap();
    assert!(matches!(eps_b(&zero, &j), Err(Error::UndefinedMetric(_))));
    assert!(eps_b(&ones, &Image::filled(3, 2, 1.0).unwrap()).is_err());
}

#[test]
fn eps_d_examples() {
    let r = lcg_image(6, 5, 2, 0.1, 1.0);
    assert_eq!(eps_d(&r, &r).unwrap(), 0.0);
    assert!(eps_d(&r, &r.map(|v| v + 3.0)).unwrap() < 1e-14);
    let a = Image::new(2, 1, vec![1.0, -1.0]).unwrap();
    let z = Image::filled(2, 1, 0.0).unwrap();
    assert!((eps_d(&a, &z).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn eps_e_examples() {
    let r = lcg_image(7, 7, 3, 0.0, 1.0);
    assert!((eps_e(&r, &r, false).unwrap() - 1.0).abs() < 1e-14);
    assert!((eps_e(&r, &r.map(|v| -v), false).unwrap() + 1.0).abs() < 1e-14);
    let flat = Image::filled(7, 7, 0.4).unwrap();
    assert!(matches!(
        eps_e(&r, &flat, false),
        Err(Error::UndefinedMetric(_))
    ));

    // single spike: Laplacian is −4 at the centre and 1 at the four neighbours
    let mut spike = Image::filled(3, 3, 0.0).unwrap();
    spike.data_mut()[4] = 1.0;
    let lit = eps_e(&spike, &spike, true).unwrap();
    let want = (256.0 + 4.0) / 20.0;
    assert!((lit - want).abs() < 1e-12, "{lit}");
    assert!((lit - 1.0).abs() > 1.0);
}

#[test]
fn metrics_match_naive_oracles() {
    for seed in 0..5 {
        let r = lcg_image(9, 6, seed, 0.0, 1.0);
        let j = lcg_image(9, 6, seed + 10, 0.0, 1.0);
        let (a, b) = (r.data(), j.data());
        let n = a.len() as f64;
        let eb = (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
            / a.iter().map(|x| x * x).sum::<f64>())
        .sqrt();
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let md = d.iter().sum::<f64>() / n;
        let ed = (d.iter().map(|v| (v - md).powi(2)).sum::<f64>() / n).sqrt();
        let (lr, lj) = (naive_laplacian(&r), naive_laplacian(&j));
        let num: f64 = lr.iter().zip(&lj).map(|(x, y)| x * y).sum();
        let nr = lr.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nj = lj.iter().map(|x| x * x).sum::<f64>().sqrt();
        let ee = num / (nr * nj);
        assert!((eps_b(&r, &j).unwrap() - eb).abs() < 1e-13);
        assert!((eps_d(&r, &j).unwrap() - ed).abs() < 1e-13);
        assert!((eps_e(&r, &j, false).unwrap() - ee).abs() < 1e-13);
        assert!((pearson(&r, &j).unwrap() - naive_pearson(a, b)).abs() < 1e-13);
    }
}

#[test]
fn lowpass_matches_direct_dft() {
    for (w, h) in [(8, 8), (7, 10), (12, 5)] {
        let img = lcg_image(w, h, (w * h) as u64, -1.0, 1.0);
        let got = lowpass(&img);
        let want = naive_lowpass(&img);
        for (a, b) in got.data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{w}x{h}: {a} vs {b}");
        }
    }
}

#[test]
fn pearson_lowpass_examples() {
    // band-limited input is its own low-pass
    let img = lowpass(&lcg_image(16, 16, 4, 0.0, 1.0));
    assert!((pearson_lowpass(&img, &img).unwrap() - 1.0).abs() < 1e-10);
    let noisy = lcg_image(16, 16, 5, 0.0, 1.0);
    let il = lowpass(&noisy);
    assert!((pearson_lowpass(&noisy, &il.map(|v| v + 2.5)).unwrap() - 1.0).abs() < 1e-12);
    let flat = Image::filled(16, 16, 1.0).unwrap();
    assert!(matches!(
        pearson_lowpass(&noisy, &flat),
        Err(Error::UndefinedMetric(_))
    ));
}

#[test]
fn csv_row_uses_twelve_significant_digits() {
    let m = MetricsReport {
        eps_b: 0.1,
        eps_d: 1.0 / 3.0,
        eps_e: -2.5e-7,
        pearson_lowpass: None,
    };
    let row = metrics_csv_row("f0", &m);
    assert_eq!(
        row,
        "f0,1.00000000000e-1,3.33333333333e-1,-2.50000000000e-7,"
    );
    assert_eq!(
        METRICS_CSV_HEADER.split(',').count(),
        row.split(',').count()
    );
    for field in row.split(',').skip(1).filter(|f| !f.is_empty()) {
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eps_b_is_linear_in_step(seed in any::<u64>(), t in -3.0f64..3.0) {
        let r = lcg_image(6, 6, seed, 0.1, 1.0);
        let j = lcg_image(6, 6, seed ^ 0xabc, 0.0, 1.0);
        let base = eps_b(&r, &j).unwrap();
        let moved = r.zip_map(&j, |a, b| a + t * (b - a)).unwrap();
        prop_assert!((eps_b(&r, &moved).unwrap() - t.abs() * base).abs() < 1e-12);
    }

    #[test]
    fn eps_d_ignores_offsets(seed in any::<u64>(), c in -10.0f64..10.0) {
        let r = lcg_image(6, 6, seed, 0.0, 1.0);
        let j = lcg_image(6, 6, seed ^ 1, 0.0, 1.0);
        let a = eps_d(&r, &j).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((eps_d(&r, &j.map(|v| v + c)).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn eps_e_scale_free_and_bounded(seed in any::<u64>(), s in 0.01f64..100.0, u in 0.01f64..100.0) {
        let r = lcg_image(6, 6, seed, 0.0, 1.0);
        let j = lcg_image(6, 6, seed ^ 2, 0.0, 1.0);
        let e = eps_e(&r, &j, false).unwrap();
        prop_assert!((-1.0..=1.0).contains(&e));
        let scaled = eps_e(&r.map(|v| s * v), &j.map(|v| u * v), false).unwrap();
        prop_assert!((scaled - e).abs() < 1e-12);
    }

    #[test]
    fn pearson_lowpass_affine_invariant(seed in any::<u64>(), a in 0.01f64..50.0, b in -50.0f64..50.0) {
        let i = lcg_image(8, 8, seed, 0.0, 1.0);
        let j = lcg_image(8, 8, seed ^ 3, 0.0, 1.0);
        let p = pearson_lowpass(&i, &j).unwrap();
        prop_assert!(p.abs() <= 1.0);
        prop_assert!((pearson_lowpass(&i, &j.map(|v| a * v + b)).unwrap() - p).abs() < 1e-10);
    }
}
