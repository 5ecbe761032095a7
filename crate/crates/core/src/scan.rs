//! Polar (transducer-native) ↔ cartesian scan conversion with bilinear
//! interpolation.
//!
//! A polar image has one row per angle `θ_i = 2π i / rows` and one column per
//! radius `r_j = (j + ½) extent / cols`. Angles grow from +x towards +y, with
//! image rows running downwards.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::image::Image;

/// Centre of the scan in pixel coordinates, where pixel `(x, y)` covers
/// `[x, x+1) × [y, y+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanGeometry {
    pub center: (f64, f64),
    /// Radius in cartesian pixels covered by the last polar column.
    pub radial_extent: f64,
}

impl ScanGeometry {
    /// Scan centred on a `size × size` image, reaching its inscribed circle.
    pub fn centered(size: usize) -> Self {
        let half = size as f64 / 2.0;
        ScanGeometry {
            center: (half, half),
            radial_extent: half,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.radial_extent > 0.0 && self.radial_extent.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "radial extent must be positive, got {}",
                self.radial_extent
            )));
        }
        Ok(())
    }
}

/// Resamples a polar image onto a `width × height` cartesian grid. Pixels
/// beyond the radial extent are zero.
pub fn polar_to_cartesian(
    polar: &Image,
    width: usize,
    height: usize,
    geom: &ScanGeometry,
) -> Result<Image> {
    geom.validate()?;
    let (na, nr) = (polar.height(), polar.width());
    let (cx, cy) = geom.center;
    Image::from_fn(width, height, |x, y| {
        let dx = x as f64 + 0.5 - cx;
        let dy = y as f64 + 0.5 - cy;
        let r = dx.hypot(dy);
        if r > geom.radial_extent {
            return 0.0;
        }
        let theta = dy.atan2(dx).rem_euclid(TAU);
        let a = theta / TAU * na as f64;
        let b = (r / geom.radial_extent * nr as f64 - 0.5).clamp(0.0, (nr - 1) as f64);
        let (a0, ta) = (a.floor(), a - a.floor());
        let i0 = (a0 as usize) % na;
        let i1 = (i0 + 1) % na;
        let j0 = (b.floor() as usize).min(nr - 1);
        let j1 = (j0 + 1).min(nr - 1);
        let tb = b - j0 as f64;
        let top = polar.get(j0, i0) * (1.0 - tb) + polar.get(j1, i0) * tb;
        let bot = polar.get(j0, i1) * (1.0 - tb) + polar.get(j1, i1) * tb;
        top * (1.0 - ta) + bot * ta
    })
}

/// Samples a cartesian image on an `angles × radii` polar grid.
pub fn cartesian_to_polar(
    img: &Image,
    angles: usize,
    radii: usize,
    geom: &ScanGeometry,
) -> Result<Image> {
    geom.validate()?;
    let (cx, cy) = geom.center;
    Image::from_fn(radii, angles, |j, i| {
        let theta = TAU * i as f64 / angles as f64;
        let r = (j as f64 + 0.5) / radii as f64 * geom.radial_extent;
        bilinear(img, cx + r * theta.cos() - 0.5, cy + r * theta.sin() - 0.5)
    })
}

/// Bilinear sample at continuous pixel-index coordinates, clamped to the grid.
fn bilinear(img: &Image, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (img.width() - 1) as f64);
    let y = y.clamp(0.0, (img.height() - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = (
        (x0 + 1).min(img.width() - 1),
        (y0 + 1).min(img.height() - 1),
    );
    let (tx, ty) = (x - x0 as f64, y - y0 as f64);
    let top = img.get(x0, y0) * (1.0 - tx) + img.get(x1, y0) * tx;
    let bot = img.get(x0, y1) * (1.0 - tx) + img.get(x1, y1) * tx;
    top * (1.0 - ty) + bot * ty
}
