//! Dense 2D scalar fields and the finite-difference stencils shared by the
//! solvers and metrics.
//!
//! Images are row-major with a top-left origin: pixel `(x, y)` lives at
//! `data[y * width + x]`. Boundaries use one layer of edge replication, the
//! discrete form of a zero normal derivative.

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    dx: f64,
    dy: f64,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage("zero-sized image".into()));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "data length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Image {
            width,
            height,
            dx: 1.0,
            dy: 1.0,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Sets the grid spacing. Both spacings must be positive and finite.
    pub fn with_spacing(mut self, dx: f64, dy: f64) -> Result<Self> {
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid spacing must be positive, got ({dx}, {dy})"
            )));
        }
        self.dx = dx;
        self.dy = dy;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    /// Pixel count, |Ω|.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn data_vec_mut(&mut self) -> &mut Vec<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Reads with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ))
        }
    }

    /// New image with the same shape and spacing and the given data.
    pub fn with_data(&self, data: Vec<f64>) -> Image {
        assert_eq!(data.len(), self.data.len());
        Image {
            width: self.width,
            height: self.height,
            dx: self.dx,
            dy: self.dy,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Result<Image> {
        self.check_same_shape(other)?;
        Ok(self.with_data(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute pixel difference.
    pub fn max_abs_diff(&self, other: &Image) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Affine map of the intensities onto [0, 1]. Constant images map to zeros.
    pub fn normalize(&self) -> Image {
        let (lo, hi) = (self.min(), self.max());
        let span = hi - lo;
        if span <= 0.0 || !span.is_finite() {
            return self.map(|_| 0.0);
        }
        self.map(|v| ((v - lo) / span).clamp(0.0, 1.0))
    }

    fn require_stencil(&self) -> Result<()> {
        if self.width < 3 || self.height < 3 {
            return Err(Error::TooSmall {
                width: self.width,
                height: self.height,
                min: 3,
            });
        }
        Ok(())
    }

    /// Five-point Laplacian with edge-replicated boundaries.
    pub fn laplacian(&self) -> Result<Image> {
        self.require_stencil()?;
        let (w, h) = (self.width, self.height);
        let (idx2, idy2) = (1.0 / (self.dx * self.dx), 1.0 / (self.dy * self.dy));
        let mut out = vec![0.0; w * h];
        par::fill_rows(&mut out, w, |y, row| {
            let yi = y as isize;
            for (x, o) in row.iter_mut().enumerate() {
                let xi = x as isize;
                let c = self.get(x, y);
                let lxx = self.get_clamped(xi + 1, yi) + self.get_clamped(xi - 1, yi) - 2.0 * c;
                let lyy = self.get_clamped(xi, yi + 1) + self.get_clamped(xi, yi - 1) - 2.0 * c;
                *o = lxx * idx2 + lyy * idy2;
            }
        });
        Ok(self.with_data(out))
    }

    /// Gradient estimates on the pixel edges, `G_{x+½,y}` and `G_{x,y+½}`.
    pub fn half_pixel_gradients(&self) -> Result<HalfPixelGradients> {
        self.require_stencil()?;
        let (w, h) = (self.width, self.height);
        let mut gx = Vec::with_capacity((w - 1) * h);
        for y in 0..h {
            for x in 0..w - 1 {
                gx.push(self.edge_gradient_x(x, y));
            }
        }
        let mut gy = Vec::with_capacity(w * (h - 1));
        for y in 0..h - 1 {
            for x in 0..w {
                gy.push(self.edge_gradient_y(x, y));
            }
        }
        Ok(HalfPixelGradients {
            width: w,
            height: h,
            gx,
            gy,
        })
    }

    /// `G_{x+½,y}` for `0 <= x < width - 1`.
    #[inline]
    pub fn edge_gradient_x(&self, x: usize, y: usize) -> [f64; 2] {
        let (xi, yi) = (x as isize, y as isize);
        let normal = (self.get(x + 1, y) - self.get(x, y)) / self.dx;
        let cross = (self.get_clamped(xi + 1, yi + 1) + self.get_clamped(xi, yi + 1)
            - self.get_clamped(xi + 1, yi - 1)
            - self.get_clamped(xi, yi - 1))
            / (4.0 * self.dy);
        [normal, cross]
    }

    /// `G_{x,y+½}` for `0 <= y < height - 1`.
    #[inline]
    pub fn edge_gradient_y(&self, x: usize, y: usize) -> [f64; 2] {
        let (xi, yi) = (x as isize, y as isize);
        let cross = (self.get_clamped(xi + 1, yi + 1) + self.get_clamped(xi + 1, yi)
            - self.get_clamped(xi - 1, yi + 1)
            - self.get_clamped(xi - 1, yi))
            / (4.0 * self.dx);
        let normal = (self.get(x, y + 1) - self.get(x, y)) / self.dy;
        [cross, normal]
    }
}

/// Gradient vectors on the interior pixel edges.
///
/// `gx` holds `G_{x+½,y}` for `x in 0..width-1` (row-major, `width - 1` per
/// row); `gy` holds `G_{x,y+½}` for `y in 0..height-1` (`width` per row).
/// Boundary edges against the replicated ghost layer carry zero flux and are
/// not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfPixelGradients {
    width: usize,
    height: usize,
    gx: Vec<[f64; 2]>,
    gy: Vec<[f64; 2]>,
}

impl HalfPixelGradients {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `G_{x+½,y}`.
    pub fn x_edge(&self, x: usize, y: usize) -> [f64; 2] {
        self.gx[y * (self.width - 1) + x]
    }

    /// `G_{x,y+½}`.
    pub fn y_edge(&self, x: usize, y: usize) -> [f64; 2] {
        self.gy[y * self.width + x]
    }

    pub fn x_edges(&self) -> &[[f64; 2]] {
        &self.gx
    }

    pub fn y_edges(&self) -> &[[f64; 2]] {
        &self.gy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize, a: f64, b: f64) -> Image {
        Image::from_fn(w, h, |x, y| a * x as f64 + b * y as f64).unwrap()
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::new(0, 2, vec![]).is_err());
        assert!(Image::filled(2, 2, 0.0)
            .unwrap()
            .with_spacing(0.0, 1.0)
            .is_err());
    }

    #[test]
    fn normalize_examples() {
        let a = Image::new(3, 1, vec![0.0, 0.5, 1.0]).unwrap().normalize();
        assert_eq!(a.data(), &[0.0, 0.5, 1.0]);
        let b = Image::new(2, 1, vec![2.0, 4.0]).unwrap().normalize();
        assert_eq!(b.data(), &[0.0, 1.0]);
        let c = Image::new(3, 1, vec![5.0; 3]).unwrap().normalize();
        assert_eq!(c.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_is_idempotent() {
        let img = Image::from_fn(5, 4, |x, y| ((x * 7 + y * 3) % 5) as f64 - 1.3).unwrap();
        let once = img.normalize();
        assert_eq!(once, once.normalize());
        assert!(once.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn laplacian_constant_and_quadratic() {
        let c = Image::filled(5, 5, 0.7).unwrap().laplacian().unwrap();
        assert!(c.data().iter().all(|&v| v == 0.0));

        let q = Image::from_fn(6, 5, |x, _| (x * x) as f64)
            .unwrap()
            .laplacian()
            .unwrap();
        for y in 0..5 {
            for x in 1..5 {
                assert_eq!(q.get(x, y), 2.0);
            }
        }
    }

    #[test]
    fn laplacian_of_spike() {
        let mut d = vec![0.0; 9];
        d[4] = 1.0;
        let l = Image::new(3, 3, d).unwrap().laplacian().unwrap();
        assert_eq!(l.get(1, 1), -4.0);
        for (x, y) in [(1, 0), (0, 1), (2, 1), (1, 2)] {
            assert_eq!(l.get(x, y), 1.0);
        }
        for (x, y) in [(0, 0), (2, 0), (0, 2), (2, 2)] {
            assert_eq!(l.get(x, y), 0.0);
        }
    }

    #[test]
    fn laplacian_annihilates_affine_interior() {
        let l = ramp(7, 6, 0.3, -1.7).laplacian().unwrap();
        for y in 1..5 {
            for x in 1..6 {
                assert!(l.get(x, y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn too_small_for_stencils() {
        let img = Image::filled(2, 5, 0.0).unwrap();
        assert!(matches!(img.laplacian(), Err(Error::TooSmall { .. })));
        assert!(matches!(
            img.half_pixel_gradients(),
            Err(Error::TooSmall { .. })
        ));
    }

    #[test]
    fn gradients_of_constant_are_zero() {
        let g = Image::filled(4, 4, 3.0)
            .unwrap()
            .half_pixel_gradients()
            .unwrap();
        assert!(g
            .x_edges()
            .iter()
            .chain(g.y_edges())
            .all(|v| *v == [0.0, 0.0]));
    }

    #[test]
    fn gradients_of_ramps() {
        let g = ramp(5, 5, 1.0, 0.0).half_pixel_gradients().unwrap();
        for y in 0..5 {
            for x in 0..4 {
                assert_eq!(g.x_edge(x, y), [1.0, 0.0]);
            }
        }
        let g = ramp(5, 5, 0.0, 1.0).half_pixel_gradients().unwrap();
        for y in 1..4 {
            for x in 0..4 {
                assert_eq!(g.x_edge(x, y), [0.0, 1.0]);
            }
        }
        let (a, b) = (0.25, -2.0);
        let img = ramp(6, 7, a, b).with_spacing(0.5, 2.0).unwrap();
        let g = img.half_pixel_gradients().unwrap();
        for y in 1..6 {
            for x in 1..5 {
                let ex = g.x_edge(x, y);
                let ey = g.y_edge(x, y);
                assert!((ex[0] - a / 0.5).abs() < 1e-12 && (ex[1] - b / 2.0).abs() < 1e-12);
                assert!((ey[0] - a / 0.5).abs() < 1e-12 && (ey[1] - b / 2.0).abs() < 1e-12);
            }
        }
    }
}
