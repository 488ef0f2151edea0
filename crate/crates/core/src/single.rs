//! One conventional antenna against one pinching antenna on one waveguide.
//!
//! Users are uniform in a square of side `D` centred at the origin; the
//! waveguide runs along the x axis at height `d`, and the conventional antenna
//! sits at `(0, 0, d)`. With per-user power `P` the ergodic expressions depend
//! only on `D`, `d` and the SNR scale `gamma = eta * P / sigma^2`.

use std::f64::consts::LOG2_E;

use crate::error::{Error, Result};
use crate::params::{distance, dbm_to_watts, PhysicalParams, Point3};

/// Below this argument the g3/g4/g5 helpers switch to their Maclaurin series.
const SERIES_CUTOFF: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrOperatingPoint {
    pub transmit_power_dbm: f64,
    pub params: PhysicalParams,
    pub num_users: usize,
    pub region_side_m: f64,
}

impl SnrOperatingPoint {
    pub fn new(
        transmit_power_dbm: f64,
        params: PhysicalParams,
        num_users: usize,
        region_side_m: f64,
    ) -> Result<Self> {
        if num_users == 0 {
            return Err(Error::ParameterDomain("num_users must be at least 1".into()));
        }
        if !(region_side_m > 0.0 && region_side_m.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "region side must be positive, got {region_side_m}"
            )));
        }
        params.validate()?;
        Ok(Self {
            transmit_power_dbm,
            params,
            num_users,
            region_side_m,
        })
    }

    /// gamma = eta * P / sigma^2.
    pub fn gamma(&self) -> f64 {
        let c = self
            .params
            .derive()
            .expect("parameters were validated on construction");
        c.snr_scale(dbm_to_watts(self.transmit_power_dbm))
    }

    pub fn height(&self) -> f64 {
        self.params.waveguide_height_m
    }
}

fn tdma_rate(gamma: f64, dist_sq: f64, num_users: usize) -> f64 {
    (gamma / dist_sq).ln_1p() * LOG2_E / num_users as f64
}

/// Rate of a user served by a fixed antenna in its TDMA slot.
pub fn rate_conventional_instant(
    user: Point3,
    antenna: Point3,
    power_w: f64,
    num_users: usize,
    params: &PhysicalParams,
) -> Result<f64> {
    let c = params.derive()?;
    let r = distance(user, antenna);
    if !(r > 0.0) {
        return Err(Error::ParameterDomain(
            "antenna coincides with the user".into(),
        ));
    }
    Ok(tdma_rate(c.snr_scale(power_w), r * r, num_users))
}

/// Rate of a user served by a pinching antenna moved to the waveguide point
/// `(x_m, 0, d)` closest to it.
pub fn rate_pinching_instant(
    user: Point3,
    power_w: f64,
    num_users: usize,
    params: &PhysicalParams,
) -> Result<f64> {
    let c = params.derive()?;
    let d = params.waveguide_height_m;
    Ok(tdma_rate(c.snr_scale(power_w), d * d + user.y * user.y, num_users))
}

/// g(a) = integral of log2(y^2 + a) over y in [0, D/2].
pub fn g_closed(a: f64, side: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::ParameterDomain(format!("g(a) needs a > 0, got {a}")));
    }
    let half = side / 2.0;
    let root = a.sqrt();
    Ok(half * (half * half + a).log2() - LOG2_E * side
        + 2.0 * LOG2_E * root * (half / root).atan())
}

/// g2(a) = integral of ln(z + a) over z in [0, D^2/4].
pub fn g2_closed(a: f64, side: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::ParameterDomain(format!("g2(a) needs a > 0, got {a}")));
    }
    let q = side * side / 4.0;
    Ok(q * (q + a).ln() - q + a * (q / a).ln_1p())
}

/// Closed-form ergodic sum rate of the single pinching antenna, written as
/// the four log/arctan terms.
pub fn pinching_ergodic(side: f64, height: f64, gamma: f64) -> f64 {
    let q = side * side / 4.0;
    let a = height * height + gamma;
    let ra = a.sqrt();
    let k = 4.0 / side * LOG2_E;
    (q + a).log2() + k * ra * (side / (2.0 * ra)).atan()
        - (q + height * height).log2()
        - k * height * (side / (2.0 * height)).atan()
}

/// High-SNR form of [`pinching_ergodic`]; the arctan term of the signal part
/// collapses to `2 log2(e)`.
pub fn pinching_ergodic_highsnr(side: f64, height: f64, gamma: f64) -> f64 {
    let q = side * side / 4.0;
    let d2 = height * height;
    (q + d2 + gamma).log2() + 2.0 * LOG2_E
        - (q + d2).log2()
        - 4.0 / side * LOG2_E * height * (side / (2.0 * height)).atan()
}

/// Disc-relaxation upper bound on the conventional antenna's ergodic rate.
pub fn conventional_bound(side: f64, height: f64, gamma: f64) -> f64 {
    let d2 = height * height;
    let hi = g2_closed(d2 + gamma, side).expect("d^2 + gamma > 0");
    let lo = g2_closed(d2, side).expect("d^2 > 0");
    4.0 / (side * side) * LOG2_E * (hi - lo)
}

pub fn conventional_bound_highsnr(side: f64, height: f64, gamma: f64) -> f64 {
    let q = side * side / 4.0;
    let d2 = height * height;
    (q + d2 + gamma).log2() + LOG2_E
        - (q + d2).log2()
        - d2 / q * ((q + d2) / d2).log2()
}

pub fn ergodic_sum_rate_pinching(op: &SnrOperatingPoint) -> f64 {
    pinching_ergodic(op.region_side_m, op.height(), op.gamma())
}

/// The same rate through the g-function route, (2/D)(g(d^2 + gamma) - g(d^2)).
pub fn ergodic_sum_rate_pinching_via_g(op: &SnrOperatingPoint) -> f64 {
    let (side, d2) = (op.region_side_m, op.height() * op.height());
    let hi = g_closed(d2 + op.gamma(), side).expect("positive argument");
    let lo = g_closed(d2, side).expect("positive argument");
    2.0 / side * (hi - lo)
}

pub fn ergodic_sum_rate_pinching_highsnr(op: &SnrOperatingPoint) -> f64 {
    pinching_ergodic_highsnr(op.region_side_m, op.height(), op.gamma())
}

pub fn ergodic_sum_rate_conventional_bound(op: &SnrOperatingPoint) -> f64 {
    conventional_bound(op.region_side_m, op.height(), op.gamma())
}

pub fn ergodic_sum_rate_conventional_bound_highsnr(op: &SnrOperatingPoint) -> f64 {
    conventional_bound_highsnr(op.region_side_m, op.height(), op.gamma())
}

/// g3(x) = log2(e) - (2/x) log2(e) atan(x) + log2(1 + x^2) / x^2, with g3(0) = 0.
pub fn g3(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        return LOG2_E * (x2 / 6.0 - x2 * x2 / 15.0);
    }
    LOG2_E - 2.0 / x * LOG2_E * x.atan() + (x * x).ln_1p() * LOG2_E / (x * x)
}

/// g4(x) = log2(e) atan(x) - log2(1 + x^2) / x; g3'(x) = 2 g4(x) / x^2.
pub fn g4(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x3 = x * x * x;
        return LOG2_E * (x3 / 6.0 - 2.0 * x3 * x * x / 15.0);
    }
    LOG2_E * x.atan() - (x * x).ln_1p() * LOG2_E / x
}

/// g5(x) = log2(1 + x^2) - log2(e) x^2 / (1 + x^2); g4'(x) = g5(x) / x^2.
pub fn g5(x: f64) -> f64 {
    let x2 = x * x;
    if x.abs() < SERIES_CUTOFF {
        return LOG2_E * (x2 * x2 / 2.0 - 2.0 * x2 * x2 * x2 / 3.0);
    }
    x2.ln_1p() * LOG2_E - LOG2_E * x2 / (1.0 + x2)
}

/// High-SNR gap between the pinching rate and the conventional bound,
/// g3(D / 2d).
pub fn rate_gap_highsnr(side: f64, height: f64) -> Result<f64> {
    if !(side > 0.0 && height > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "gap needs D > 0 and d > 0, got D = {side}, d = {height}"
        )));
    }
    Ok(g3(side / (2.0 * height)))
}
