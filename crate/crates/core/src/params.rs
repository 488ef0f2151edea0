//! Physical constants, coordinate geometry and waveguide phase bookkeeping.
//!
//! Powers are configured in dBm and converted to watts here. Distances are in
//! meters and all geometry lives in a right-handed frame whose x-y plane holds
//! the users; waveguides run parallel to the x axis at height `d`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Tolerance used when deciding whether a point lies on a waveguide.
const ON_WAVEGUIDE_TOL: f64 = 1e-9;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Carrier, noise and waveguide parameters shared by every scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    pub carrier_frequency_hz: f64,
    pub noise_power_dbm: f64,
    /// Height `d` of every waveguide (and of the conventional antenna).
    pub waveguide_height_m: f64,
    /// Effective refractive index of the dielectric waveguide.
    pub refractive_index: f64,
    /// Minimum spacing between neighbouring pinching antennas.
    pub guard_distance_m: f64,
}

impl Default for PhysicalParams {
    /// 28 GHz carrier, -90 dBm noise, d = 3 m, n_eff = 1.4, guard = lambda/2.
    fn default() -> Self {
        let carrier_frequency_hz = 28e9;
        Self {
            carrier_frequency_hz,
            noise_power_dbm: -90.0,
            waveguide_height_m: 3.0,
            refractive_index: 1.4,
            guard_distance_m: SPEED_OF_LIGHT / carrier_frequency_hz / 2.0,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("carrier_frequency_hz", self.carrier_frequency_hz),
            ("waveguide_height_m", self.waveguide_height_m),
            ("refractive_index", self.refractive_index),
            ("guard_distance_m", self.guard_distance_m),
        ];
        for (name, value) in checks {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::ParameterDomain(format!(
                    "{name} must be finite and positive, got {value}"
                )));
            }
        }
        if !self.noise_power_dbm.is_finite() {
            return Err(Error::ParameterDomain(format!(
                "noise_power_dbm must be finite, got {}",
                self.noise_power_dbm
            )));
        }
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedConstants> {
        derive_constants(self)
    }
}

/// Quantities derived once from [`PhysicalParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Free-space wavelength c / f_c.
    pub wavelength: f64,
    /// Guided wavelength inside the waveguide, wavelength / n_eff.
    pub guided_wavelength: f64,
    /// Free-space path-loss constant c^2 / (16 pi^2 f_c^2), in m^2.
    pub eta: f64,
    pub noise_power_w: f64,
    pub height: f64,
    pub guard_distance: f64,
}

impl DerivedConstants {
    /// Received SNR scale eta * P / sigma^2 for a transmit power in watts.
    pub fn snr_scale(&self, power_w: f64) -> f64 {
        self.eta * power_w / self.noise_power_w
    }
}

pub fn derive_constants(params: &PhysicalParams) -> Result<DerivedConstants> {
    params.validate()?;
    let f = params.carrier_frequency_hz;
    let wavelength = SPEED_OF_LIGHT / f;
    Ok(DerivedConstants {
        wavelength,
        guided_wavelength: wavelength / params.refractive_index,
        eta: SPEED_OF_LIGHT * SPEED_OF_LIGHT / (16.0 * PI * PI * f * f),
        noise_power_w: dbm_to_watts(params.noise_power_dbm),
        height: params.waveguide_height_m,
        guard_distance: params.guard_distance_m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

pub fn distance(a: Point3, b: Point3) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// A straight dielectric waveguide parallel to the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waveguide {
    pub y_offset_m: f64,
    pub height_m: f64,
    pub x_min_m: f64,
    pub x_max_m: f64,
    pub feed_point: Point3,
}

impl Waveguide {
    /// Waveguide over `[x_min, x_max]` fed from its left end.
    pub fn new(y_offset_m: f64, height_m: f64, x_min_m: f64, x_max_m: f64) -> Result<Self> {
        Self::with_feed_x(y_offset_m, height_m, x_min_m, x_max_m, x_min_m)
    }

    pub fn with_feed_x(
        y_offset_m: f64,
        height_m: f64,
        x_min_m: f64,
        x_max_m: f64,
        feed_x_m: f64,
    ) -> Result<Self> {
        if !(x_min_m < x_max_m) {
            return Err(Error::Geometry(format!(
                "waveguide span must satisfy x_min < x_max, got [{x_min_m}, {x_max_m}]"
            )));
        }
        if !(height_m > 0.0) || !y_offset_m.is_finite() {
            return Err(Error::Geometry(format!(
                "invalid waveguide placement y = {y_offset_m}, height = {height_m}"
            )));
        }
        if !(x_min_m..=x_max_m).contains(&feed_x_m) {
            return Err(Error::Geometry(format!(
                "feed point x = {feed_x_m} lies outside the span [{x_min_m}, {x_max_m}]"
            )));
        }
        Ok(Self {
            y_offset_m,
            height_m,
            x_min_m,
            x_max_m,
            feed_point: Point3::new(feed_x_m, y_offset_m, height_m),
        })
    }

    /// Same waveguide, fed from a different point along its span.
    pub fn refed(&self, feed_x_m: f64) -> Result<Self> {
        Self::with_feed_x(self.y_offset_m, self.height_m, self.x_min_m, self.x_max_m, feed_x_m)
    }

    pub fn point_at(&self, x: f64) -> Point3 {
        Point3::new(x, self.y_offset_m, self.height_m)
    }

    pub fn contains(&self, p: Point3) -> bool {
        (p.y - self.y_offset_m).abs() <= ON_WAVEGUIDE_TOL
            && (p.z - self.height_m).abs() <= ON_WAVEGUIDE_TOL
            && p.x >= self.x_min_m - ON_WAVEGUIDE_TOL
            && p.x <= self.x_max_m + ON_WAVEGUIDE_TOL
    }

    /// The point of the waveguide closest to `user`.
    pub fn closest_point(&self, user: Point3) -> Point3 {
        self.point_at(user.x.clamp(self.x_min_m, self.x_max_m))
    }

    /// Phase accumulated by the guided wave from the feed to `antenna`.
    pub fn phase_to(&self, antenna: Point3, guided_wavelength: f64) -> Result<f64> {
        if !self.contains(antenna) {
            return Err(Error::Geometry(format!(
                "antenna ({}, {}, {}) is not on the waveguide y = {}, z = {}, x in [{}, {}]",
                antenna.x,
                antenna.y,
                antenna.z,
                self.y_offset_m,
                self.height_m,
                self.x_min_m,
                self.x_max_m
            )));
        }
        Ok(waveguide_phase(self.feed_point, antenna, guided_wavelength))
    }
}

/// theta = 2 pi |feed - antenna| / lambda_g. The caller guarantees both points
/// are on the same waveguide; [`Waveguide::phase_to`] is the checked form.
pub fn waveguide_phase(feed: Point3, antenna: Point3, guided_wavelength: f64) -> f64 {
    2.0 * PI * distance(feed, antenna) / guided_wavelength
}

/// Axis-aligned rectangle in the user plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn centered(center: Point3, side_x: f64, side_y: f64) -> Self {
        Self {
            x_min: center.x - side_x / 2.0,
            x_max: center.x + side_x / 2.0,
            y_min: center.y - side_y / 2.0,
            y_max: center.y + side_y / 2.0,
        }
    }

    pub fn center(&self) -> Point3 {
        Point3::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
            0.0,
        )
    }

    pub fn contains(&self, p: Point3) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }
}

/// Where users are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Deployment {
    /// One square region.
    Square { center: Point3, side_m: f64 },
    /// One rectangle; `side_x_m` runs along the waveguide.
    Rectangle {
        center: Point3,
        side_x_m: f64,
        side_y_m: f64,
    },
    /// One square area per NOMA user, listed weakest user first.
    NomaAreas { centers: Vec<Point3>, side_m: f64 },
    /// A square cut by two waveguides at y = +-side/3; region 0 is the upper
    /// strip y in [side/3, side/2], region 1 the lower strip.
    SplitSquare { center: Point3, side_m: f64 },
}

impl Deployment {
    pub fn square(side_m: f64) -> Self {
        Deployment::Square {
            center: Point3::default(),
            side_m,
        }
    }

    pub fn noma_pair(area1_center: Point3, area2_center: Point3, side_m: f64) -> Self {
        Deployment::NomaAreas {
            centers: vec![area1_center, area2_center],
            side_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Geometry(format!("{name} must be positive, got {v}")))
            }
        };
        let planar = |c: &Point3| {
            if c.is_finite() && c.z == 0.0 {
                Ok(())
            } else {
                Err(Error::Geometry(format!(
                    "region centers must be finite and lie in z = 0, got {c:?}"
                )))
            }
        };
        match self {
            Deployment::Square { center, side_m } | Deployment::SplitSquare { center, side_m } => {
                planar(center)?;
                positive("side_m", *side_m)
            }
            Deployment::Rectangle {
                center,
                side_x_m,
                side_y_m,
            } => {
                planar(center)?;
                positive("side_x_m", *side_x_m)?;
                positive("side_y_m", *side_y_m)
            }
            Deployment::NomaAreas { centers, side_m } => {
                if centers.is_empty() {
                    return Err(Error::Geometry("noma_areas needs at least one area".into()));
                }
                centers.iter().try_for_each(planar)?;
                positive("side_m", *side_m)
            }
        }
    }

    pub fn num_regions(&self) -> usize {
        match self {
            Deployment::Square { .. } | Deployment::Rectangle { .. } => 1,
            Deployment::SplitSquare { .. } => 2,
            Deployment::NomaAreas { centers, .. } => centers.len(),
        }
    }

    pub fn region(&self, index: usize) -> Result<Region> {
        let n = self.num_regions();
        if index >= n {
            return Err(Error::Geometry(format!(
                "region index {index} out of range for a deployment with {n} region(s)"
            )));
        }
        Ok(match self {
            Deployment::Square { center, side_m } => Region::centered(*center, *side_m, *side_m),
            Deployment::Rectangle {
                center,
                side_x_m,
                side_y_m,
            } => Region::centered(*center, *side_x_m, *side_y_m),
            Deployment::NomaAreas { centers, side_m } => {
                Region::centered(centers[index], *side_m, *side_m)
            }
            Deployment::SplitSquare { center, side_m } => {
                let (lo, hi) = (side_m / 3.0, side_m / 2.0);
                let (y_min, y_max) = if index == 0 { (lo, hi) } else { (-hi, -lo) };
                Region {
                    x_min: center.x - side_m / 2.0,
                    x_max: center.x + side_m / 2.0,
                    y_min: center.y + y_min,
                    y_max: center.y + y_max,
                }
            }
        })
    }

    /// x-extent covered by the union of all regions.
    pub fn x_extent(&self) -> (f64, f64) {
        (0..self.num_regions())
            .filter_map(|i| self.region(i).ok())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.x_min), hi.max(r.x_max))
            })
    }

    /// Waveguide at `y_offset` spanning the deployment's x-extent, fed from the
    /// left end.
    pub fn default_waveguide(&self, y_offset_m: f64, height_m: f64) -> Result<Waveguide> {
        let (lo, hi) = self.x_extent();
        Waveguide::new(y_offset_m, height_m, lo, hi)
    }
}
