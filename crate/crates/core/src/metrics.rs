//! Error functions against a noiseless reference and the low-pass Pearson
//! correlation used when no reference exists.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image::Image;

/// Band kept by [`lowpass`]: signed frequency indices with `|k| <= n / 4` on
/// each axis, i.e. the lower half of the band up to Nyquist.
pub const LOWPASS_BAND: &str = "centered-square |k|<=N/4 per axis";

/// All four metrics for one image pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub eps_b: f64,
    pub eps_d: f64,
    pub eps_e: f64,
    pub pearson_lowpass: Option<f64>,
}

/// Normalized L2 bias `√(Σ(ref − J)² / Σ ref²)`.
pub fn eps_b(reference: &Image, j: &Image) -> Result<f64> {
    reference.check_same_shape(j)?;
    let den: f64 = reference.data().iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::UndefinedMetric(
            "eps_b needs a nonzero reference".into(),
        ));
    }
    let num: f64 = reference
        .data()
        .iter()
        .zip(j.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((num / den).sqrt())
}

/// Population standard deviation of `ref − J`.
pub fn eps_d(reference: &Image, j: &Image) -> Result<f64> {
    reference.check_same_shape(j)?;
    let n = reference.len() as f64;
    let diff: Vec<f64> = reference
        .data()
        .iter()
        .zip(j.data())
        .map(|(a, b)| a - b)
        .collect();
    let mu = diff.iter().sum::<f64>() / n;
    Ok((diff.iter().map(|d| (d - mu) * (d - mu)).sum::<f64>() / n).sqrt())
}

/// Edge-pattern correlation of the Laplacians.
///
/// The default form is the normalized correlation
/// `Σ ΔrefΔJ / (√ΣΔref² √ΣΔJ²)`, which lies in [−1, 1] and equals one for a
/// perfect recovery. `literal = true` squares the numerator product,
/// `Σ (ΔrefΔJ)² / (√ΣΔref² √ΣΔJ²)`, which is not scale-free.
pub fn eps_e(reference: &Image, j: &Image, literal: bool) -> Result<f64> {
    reference.check_same_shape(j)?;
    let lr = reference.laplacian()?;
    let lj = j.laplacian()?;
    let srr: f64 = lr.data().iter().map(|v| v * v).sum();
    let sjj: f64 = lj.data().iter().map(|v| v * v).sum();
    if srr == 0.0 || sjj == 0.0 {
        return Err(Error::UndefinedMetric(
            "eps_e is undefined for a flat image (zero Laplacian)".into(),
        ));
    }
    let num: f64 = lr
        .data()
        .iter()
        .zip(lj.data())
        .map(|(a, b)| if literal { (a * b) * (a * b) } else { a * b })
        .sum();
    Ok(num / (srr.sqrt() * sjj.sqrt()))
}

/// Signed frequency index for DFT bin `k` of an `n`-point transform.
fn signed_freq(k: usize, n: usize) -> isize {
    if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}

/// Zeroes the upper half of the spectrum (see [`LOWPASS_BAND`]) and returns
/// the real part of the inverse transform.
pub fn lowpass(img: &Image) -> Image {
    let (w, h) = (img.width(), img.height());
    let mut buf: Vec<Complex64> = img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    let (fw, fh) = (planner.plan_fft_forward(w), planner.plan_fft_forward(h));
    let (iw, ih) = (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h));

    fw.process(&mut buf);
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    transform_columns(&mut buf, w, h, &mut col, |c| fh.process(c));

    let (kx_max, ky_max) = ((w / 4) as isize, (h / 4) as isize);
    for y in 0..h {
        let keep_y = signed_freq(y, h).abs() <= ky_max;
        for x in 0..w {
            if !(keep_y && signed_freq(x, w).abs() <= kx_max) {
                buf[y * w + x] = Complex64::new(0.0, 0.0);
            }
        }
    }

    transform_columns(&mut buf, w, h, &mut col, |c| ih.process(c));
    iw.process(&mut buf);
    let scale = 1.0 / (w * h) as f64;
    img.with_data(buf.iter().map(|c| c.re * scale).collect())
}

fn transform_columns(
    buf: &mut [Complex64],
    w: usize,
    h: usize,
    col: &mut [Complex64],
    mut f: impl FnMut(&mut [Complex64]),
) {
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        f(col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
}

/// Pearson correlation coefficient over all pixels.
pub fn pearson(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_shape(b)?;
    let n = a.len() as f64;
    let (ma, mb) = (a.mean(), b.mean());
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.data().iter().zip(b.data()) {
        let (da, db) = (x - ma, y - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    // variance at rounding level counts as constant
    let floor = |m: f64| n * (1e-13 * m.abs().max(1.0)).powi(2);
    if saa <= floor(ma) || sbb <= floor(mb) {
        return Err(Error::UndefinedMetric(
            "pearson needs non-constant images".into(),
        ));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation between the low-passed observation `I_l` and `J`.
pub fn pearson_lowpass(i: &Image, j: &Image) -> Result<f64> {
    i.check_same_shape(j)?;
    pearson(&lowpass(i), j)
}

pub fn metrics_report(reference: &Image, j: &Image, literal_eps_e: bool) -> Result<MetricsReport> {
    Ok(MetricsReport {
        eps_b: eps_b(reference, j)?,
        eps_d: eps_d(reference, j)?,
        eps_e: eps_e(reference, j, literal_eps_e)?,
        pearson_lowpass: None,
    })
}

/// Twelve significant digits in scientific notation.
pub fn fmt_sig12(v: f64) -> String {
    format!("{v:.11e}")
}

pub const METRICS_CSV_HEADER: &str = "frame_id,eps_b,eps_d,eps_e,pearson_lowpass";

/// `frame_id,eps_b,eps_d,eps_e,pearson_lowpass`; a missing correlation is an
/// empty field.
pub fn metrics_csv_row(frame_id: &str, m: &MetricsReport) -> String {
    format!(
        "{},{},{},{},{}",
        frame_id,
        fmt_sig12(m.eps_b),
        fmt_sig12(m.eps_d),
        fmt_sig12(m.eps_e),
        m.pearson_lowpass.map(fmt_sig12).unwrap_or_default()
    )
}
