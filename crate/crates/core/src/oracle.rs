//! Independent numerical references used by the test suites and by
//! `pinchsim validate`. Nothing in here calls the closed-form code it checks.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::params::{DerivedConstants, Point3};

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`, halving intervals at most `max_depth` times.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    refine(&f, a, b, fa, fm, fb, whole, tol, max_depth)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Default settings for checking the closed-form integrals.
pub const QUAD_TOL: f64 = 1e-12;
pub const QUAD_DEPTH: u32 = 40;

/// Quadrature of the integral of log2(y^2 + a) for y in [0, D/2].
pub fn g_by_quadrature(a: f64, side: f64) -> f64 {
    adaptive_simpson(|y| (y * y + a).log2(), 0.0, side / 2.0, QUAD_TOL, QUAD_DEPTH)
}

/// Quadrature of the integral of ln(z + a) for z in [0, D^2/4].
pub fn g2_by_quadrature(a: f64, side: f64) -> f64 {
    adaptive_simpson(|z| (z + a).ln(), 0.0, side * side / 4.0, QUAD_TOL, QUAD_DEPTH)
}

/// Channel re-summed term by term from raw coordinates, with the phase
/// evaluated directly in radians.
pub fn brute_force_channel(user: Point3, antennas: &[Point3], feed: Point3, c: &DerivedConstants) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for p in antennas {
        let r = ((user.x - p.x).powi(2) + (user.y - p.y).powi(2) + (user.z - p.z).powi(2)).sqrt();
        let s = ((p.x - feed.x).powi(2) + (p.y - feed.y).powi(2) + (p.z - feed.z).powi(2)).sqrt();
        let phase = -2.0 * PI * (r / c.wavelength + s / c.guided_wavelength);
        acc += Complex64::new(phase.cos(), phase.sin()) * c.eta.sqrt() / r;
    }
    acc
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}
