//! Piecewise-constant vessel cross-section phantom.
//!
//! Geometry is expressed in units of the half-size `R = size / 2` around the
//! image centre: concentric intima and adventitia rings, an eccentric lumen
//! disc, and an optional calcium arc inset in the intima. Each pixel is
//! classified analytically at its centre, in both the cartesian grid and the
//! polar (angle × radius) grid, so neither rendering depends on the other.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalciumArc {
    /// Start and end angles in degrees, measured from +x towards +y (image
    /// rows grow downwards).
    pub start_deg: f64,
    pub end_deg: f64,
    /// Inner and outer radius as fractions of the half-size.
    pub inner: f64,
    pub outer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intensities {
    pub lumen: f64,
    pub intima: f64,
    pub calcium: f64,
    pub adventitia: f64,
    pub background: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    /// Cartesian pixels per side.
    pub size: usize,
    pub lumen_radius: f64,
    pub intima_outer_radius: f64,
    pub adventitia_outer_radius: f64,
    pub calcium: Option<CalciumArc>,
    pub intensities: Intensities,
    /// Offset of the lumen centre along +x, as a fraction of the half-size.
    pub eccentricity: f64,
    pub polar_angles: usize,
    pub polar_radii: usize,
}

/// Tissue class of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tissue {
    Lumen,
    Intima,
    Calcium,
    Adventitia,
    Background,
}

/// The canonical phantom used throughout the tests and experiments.
pub fn default_phantom_spec() -> PhantomSpec {
    PhantomSpec {
        size: 512,
        lumen_radius: 0.28,
        intima_outer_radius: 0.55,
        adventitia_outer_radius: 0.8,
        calcium: Some(CalciumArc {
            start_deg: 200.0,
            end_deg: 260.0,
            inner: 0.36,
            outer: 0.5,
        }),
        intensities: Intensities {
            lumen: 0.10,
            intima: 0.45,
            calcium: 0.95,
            adventitia: 0.30,
            background: 0.05,
        },
        eccentricity: 0.06,
        polar_angles: 256,
        polar_radii: 256,
    }
}

impl PhantomSpec {
    /// Same geometry at another cartesian size.
    pub fn with_size(&self, size: usize) -> PhantomSpec {
        PhantomSpec {
            size,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.size < 3 || self.polar_angles < 3 || self.polar_radii < 3 {
            return bad("phantom grids need at least 3 samples per axis".into());
        }
        let (l, i, a) = (
            self.lumen_radius,
            self.intima_outer_radius,
            self.adventitia_outer_radius,
        );
        if !(0.0 < l && l < i && i < a && a <= 1.0) {
            return bad(format!(
                "radii must satisfy 0 < lumen < intima < adventitia <= 1, got {l}, {i}, {a}"
            ));
        }
        if !(self.eccentricity.abs() + l < i) {
            return bad("eccentric lumen must stay inside the intima".into());
        }
        let t = &self.intensities;
        for (name, v) in [
            ("lumen", t.lumen),
            ("intima", t.intima),
            ("calcium", t.calcium),
            ("adventitia", t.adventitia),
            ("background", t.background),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} intensity {v} outside [0, 1]"));
            }
        }
        if !(t.calcium > t.intima && t.intima > t.lumen) {
            return bad("intensities must satisfy calcium > intima > lumen".into());
        }
        if let Some(c) = &self.calcium {
            if !(c.inner < c.outer && c.outer <= i) {
                return bad("calcium arc must lie inside the intima".into());
            }
            if !(c.inner > self.eccentricity.abs() + l) {
                return bad("calcium arc must not overlap the lumen".into());
            }
            if !(c.end_deg > c.start_deg && c.end_deg - c.start_deg < 360.0) {
                return bad("calcium arc needs start < end within one turn".into());
            }
        }
        Ok(())
    }

    /// Classifies a point given in half-size units relative to the centre.
    pub fn tissue_at(&self, u: f64, v: f64) -> Tissue {
        let r = u.hypot(v);
        if r > self.adventitia_outer_radius {
            return Tissue::Background;
        }
        if (u - self.eccentricity).hypot(v) < self.lumen_radius {
            return Tissue::Lumen;
        }
        if let Some(c) = &self.calcium {
            if r >= c.inner && r <= c.outer && angle_in_arc(v.atan2(u), c) {
                return Tissue::Calcium;
            }
        }
        if r <= self.intima_outer_radius {
            Tissue::Intima
        } else {
            Tissue::Adventitia
        }
    }

    pub fn intensity(&self, t: Tissue) -> f64 {
        let i = &self.intensities;
        match t {
            Tissue::Lumen => i.lumen,
            Tissue::Intima => i.intima,
            Tissue::Calcium => i.calcium,
            Tissue::Adventitia => i.adventitia,
            Tissue::Background => i.background,
        }
    }

    /// Half-size in pixels.
    pub fn half_size(&self) -> f64 {
        self.size as f64 / 2.0
    }

    /// Serializes to flat `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.kv_pairs() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    fn kv_pairs(&self) -> Vec<(&'static str, String)> {
        let t = &self.intensities;
        let mut v = vec![
            ("size", self.size.to_string()),
            ("lumen_radius", self.lumen_radius.to_string()),
            ("intima_outer_radius", self.intima_outer_radius.to_string()),
            (
                "adventitia_outer_radius",
                self.adventitia_outer_radius.to_string(),
            ),
            ("eccentricity", self.eccentricity.to_string()),
            ("intensity.lumen", t.lumen.to_string()),
            ("intensity.intima", t.intima.to_string()),
            ("intensity.calcium", t.calcium.to_string()),
            ("intensity.adventitia", t.adventitia.to_string()),
            ("intensity.background", t.background.to_string()),
            ("polar_angles", self.polar_angles.to_string()),
            ("polar_radii", self.polar_radii.to_string()),
        ];
        if let Some(c) = &self.calcium {
            v.push(("calcium.start_deg", c.start_deg.to_string()));
            v.push(("calcium.end_deg", c.end_deg.to_string()));
            v.push(("calcium.inner", c.inner.to_string()));
            v.push(("calcium.outer", c.outer.to_string()));
        } else {
            v.push(("calcium", "none".to_string()));
        }
        v
    }

    /// Parses `key=value` lines; missing keys keep the default spec's values
    /// and a spec without any `calcium.*` key has no calcium arc only when
    /// `calcium=none` is given.
    pub fn from_kv(text: &str) -> Result<PhantomSpec> {
        let map = crate::kv::parse(text)?;
        let mut spec = default_phantom_spec();
        let num = |k: &str| -> Result<Option<f64>> {
            map.get(k)
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("{k}: '{s}' is not a number")))
                })
                .transpose()
        };
        let int = |k: &str| -> Result<Option<usize>> {
            map.get(k)
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("{k}: '{s}' is not an integer")))
                })
                .transpose()
        };
        if let Some(v) = int("size")? {
            spec.size = v;
        }
        if let Some(v) = int("polar_angles")? {
            spec.polar_angles = v;
        }
        if let Some(v) = int("polar_radii")? {
            spec.polar_radii = v;
        }
        let fields: [(&str, &mut f64); 9] = [
            ("lumen_radius", &mut spec.lumen_radius),
            ("intima_outer_radius", &mut spec.intima_outer_radius),
            ("adventitia_outer_radius", &mut spec.adventitia_outer_radius),
            ("eccentricity", &mut spec.eccentricity),
            ("intensity.lumen", &mut spec.intensities.lumen),
            ("intensity.intima", &mut spec.intensities.intima),
            ("intensity.calcium", &mut spec.intensities.calcium),
            ("intensity.adventitia", &mut spec.intensities.adventitia),
            ("intensity.background", &mut spec.intensities.background),
        ];
        for (k, slot) in fields {
            if let Some(v) = num(k)? {
                *slot = v;
            }
        }
        if map.get("calcium").map(String::as_str) == Some("none") {
            spec.calcium = None;
        } else if let Some(c) = spec.calcium.as_mut() {
            for (k, slot) in [
                ("calcium.start_deg", &mut c.start_deg),
                ("calcium.end_deg", &mut c.end_deg),
                ("calcium.inner", &mut c.inner),
                ("calcium.outer", &mut c.outer),
            ] {
                if let Some(v) = num(k)? {
                    *slot = v;
                }
            }
        }
        for k in map.keys() {
            let known = spec.kv_pairs().iter().any(|(name, _)| name == k) || k == "calcium";
            if !known {
                return Err(Error::Parse(format!("unknown phantom key '{k}'")));
            }
        }
        Ok(spec)
    }
}

fn angle_in_arc(theta: f64, c: &CalciumArc) -> bool {
    let start = c.start_deg.to_radians().rem_euclid(TAU);
    let span = (c.end_deg - c.start_deg).to_radians();
    (theta - start).rem_euclid(TAU) <= span
}

/// Cartesian and polar renderings of a phantom.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub cartesian: Image,
    /// Rows index angle `θ_i = 2π i / n_angles`; columns index radius
    /// `r_j = (j + ½) / n_radii` in half-size units.
    pub polar: Image,
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let n = spec.size;
    let half = spec.half_size();
    let cartesian = Image::from_fn(n, n, |x, y| {
        let u = (x as f64 + 0.5 - half) / half;
        let v = (y as f64 + 0.5 - half) / half;
        spec.intensity(spec.tissue_at(u, v))
    })?;
    let (na, nr) = (spec.polar_angles, spec.polar_radii);
    let polar = Image::from_fn(nr, na, |j, i| {
        let theta = TAU * i as f64 / na as f64;
        let r = (j as f64 + 0.5) / nr as f64;
        spec.intensity(spec.tissue_at(r * theta.cos(), r * theta.sin()))
    })?;
    Ok(Phantom { cartesian, polar })
}

/// Distinct intensity levels of an image, sorted.
pub fn intensity_levels(img: &Image) -> Vec<f64> {
    let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
    for &v in img.data() {
        counts.insert(v.to_bits(), v);
    }
    let mut levels: Vec<f64> = counts.into_values().collect();
    levels.sort_by(f64::total_cmp);
    levels
}
