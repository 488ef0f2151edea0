//! Two users served by two waveguides, one pinching antenna each: a 2x2 MISO
//! interference channel whose channel matrix moves with the antennas.

use std::f64::consts::LOG2_E;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::propagation_phasor;
use crate::error::{Error, Result};
use crate::params::{distance, DerivedConstants, Point3, Waveguide};

/// Relative residual below which two channel vectors count as collinear.
const COLLINEAR_TOL: f64 = 1e-12;

type Vec2 = [Complex64; 2];

fn dot(a: &Vec2, b: &Vec2) -> Complex64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

fn norm_sqr(a: &Vec2) -> f64 {
    a[0].norm_sqr() + a[1].norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisoScenario {
    pub users: [Point3; 2],
    /// `None` models two fixed conventional antennas without any waveguide phase.
    pub waveguides: Option<[Waveguide; 2]>,
    /// Antenna k radiates from waveguide k.
    pub antennas: [Point3; 2],
    /// Transmit SNR P / sigma^2.
    pub rho: f64,
}

impl MisoScenario {
    pub fn new(users: [Point3; 2], waveguides: [Waveguide; 2], antennas: [Point3; 2], rho: f64) -> Result<Self> {
        for k in 0..2 {
            if !waveguides[k].contains(antennas[k]) {
                return Err(Error::Geometry(format!("antenna {} is not on waveguide {}", k + 1, k + 1)));
            }
        }
        Self::checked(users, Some(waveguides), antennas, rho)
    }

    pub fn conventional(users: [Point3; 2], antennas: [Point3; 2], rho: f64) -> Result<Self> {
        Self::checked(users, None, antennas, rho)
    }

    fn checked(users: [Point3; 2], waveguides: Option<[Waveguide; 2]>, antennas: [Point3; 2], rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::ParameterDomain(format!("rho must be positive, got {rho}")));
        }
        for u in &users {
            for a in &antennas {
                if distance(*u, *a) == 0.0 {
                    return Err(Error::ParameterDomain("user coincides with an antenna".into()));
                }
            }
        }
        Ok(Self {
            users,
            waveguides,
            antennas,
            rho,
        })
    }

    /// The same users and waveguides with antennas at `x1` on waveguide 1 and
    /// `x2` on waveguide 2.
    pub fn with_antenna_x(&self, x1: f64, x2: f64) -> Result<Self> {
        let wgs = self.waveguides.ok_or_else(|| {
            Error::Config("antenna positions can only move along a waveguide".into())
        })?;
        Self::new(self.users, wgs, [wgs[0].point_at(x1), wgs[1].point_at(x2)], self.rho)
    }

    /// Waveguide points closest to each user: antenna m above user m on waveguide m.
    pub fn at_closest_points(users: [Point3; 2], waveguides: [Waveguide; 2], rho: f64) -> Result<Self> {
        let antennas = [waveguides[0].closest_point(users[0]), waveguides[1].closest_point(users[1])];
        Self::new(users, waveguides, antennas, rho)
    }

    fn guided_length(&self, k: usize) -> f64 {
        match &self.waveguides {
            Some(w) => distance(w[k].feed_point, self.antennas[k]),
            None => 0.0,
        }
    }
}

/// `h[m][k]`: channel from antenna k to user m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMatrix {
    pub h: [Vec2; 2],
}

impl ChannelMatrix {
    pub fn user(&self, m: usize) -> &Vec2 {
        &self.h[m]
    }

    pub fn gain(&self, m: usize) -> f64 {
        norm_sqr(&self.h[m])
    }
}

/// Column m is the beamforming vector of user m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamformingMatrix {
    columns: [Vec2; 2],
}

impl BeamformingMatrix {
    pub fn from_columns(columns: [Vec2; 2]) -> Result<Self> {
        for (m, c) in columns.iter().enumerate() {
            let n = norm_sqr(c).sqrt();
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::ParameterDomain(format!(
                    "beamforming column {} has norm {n}, expected 1",
                    m + 1
                )));
            }
        }
        Ok(Self { columns })
    }

    pub fn column(&self, m: usize) -> &Vec2 {
        &self.columns[m]
    }
}

pub fn channel_matrix(s: &MisoScenario, c: &DerivedConstants) -> ChannelMatrix {
    let mut h = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (m, row) in h.iter_mut().enumerate() {
        for (k, entry) in row.iter_mut().enumerate() {
            let r = distance(s.users[m], s.antennas[k]);
            *entry = propagation_phasor(r, s.guided_length(k), c) * (c.eta.sqrt() / r);
        }
    }
    ChannelMatrix { h }
}

pub fn sinr(h: &ChannelMatrix, p: &BeamformingMatrix, rho: f64) -> [f64; 2] {
    let f = |m: usize| {
        let i = 1 - m;
        let signal = dot(&h.h[m], &p.columns[m]).norm_sqr();
        let interference = dot(&h.h[m], &p.columns[i]).norm_sqr();
        rho * signal / (rho * interference + 1.0)
    };
    [f(0), f(1)]
}

pub fn rate_from_sinr(sinr: f64) -> f64 {
    sinr.ln_1p() * LOG2_E
}

pub fn mrc_beamformer(h: &ChannelMatrix) -> Result<BeamformingMatrix> {
    let mut columns = h.h;
    for (m, col) in columns.iter_mut().enumerate() {
        let n = norm_sqr(col).sqrt();
        if n == 0.0 {
            return Err(Error::Degenerate(format!("channel of user {} is zero", m + 1)));
        }
        col[0] /= n;
        col[1] /= n;
    }
    Ok(BeamformingMatrix { columns })
}

fn project_out(v: &Vec2, u: &Vec2) -> Vec2 {
    let uu = norm_sqr(u);
    let coef = dot(u, v) / uu;
    [v[0] - coef * u[0], v[1] - coef * u[1]]
}

/// Zero-forcing: each column is the own channel with the other user's
/// direction projected out, normalised and rotated so that h_m^H p_m > 0.
pub fn zf_beamformer(h: &ChannelMatrix) -> Result<BeamformingMatrix> {
    let mut columns = [[Complex64::new(0.0, 0.0); 2]; 2];
    for m in 0..2 {
        let own = &h.h[m];
        let other = &h.h[1 - m];
        if norm_sqr(own) == 0.0 || norm_sqr(other) == 0.0 {
            return Err(Error::Degenerate("zero channel vector".into()));
        }
        // A second pass removes what rounding left of the other direction.
        let v = project_out(&project_out(own, other), other);
        let n = norm_sqr(&v).sqrt();
        if n <= COLLINEAR_TOL * norm_sqr(own).sqrt() {
            return Err(Error::Singular);
        }
        let mut v = [v[0] / n, v[1] / n];
        let s = dot(own, &v);
        let rot = s.conj() / s.norm();
        v[0] *= rot;
        v[1] *= rot;
        columns[m] = v;
    }
    Ok(BeamformingMatrix { columns })
}

/// rho |h_m|^2 for each user.
pub fn sinr_upper_bound(h: &ChannelMatrix, rho: f64) -> [f64; 2] {
    [rho * h.gain(0), rho * h.gain(1)]
}

/// Beamformer built from the geometry: each coefficient undoes the phase and
/// weights by inverse distance, then normalises per user.
pub fn phase_matched_beamformer(s: &MisoScenario, c: &DerivedConstants) -> BeamformingMatrix {
    let mut columns = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (m, col) in columns.iter_mut().enumerate() {
        let r = [distance(s.users[m], s.antennas[0]), distance(s.users[m], s.antennas[1])];
        let norm = (r[0].powi(-2) + r[1].powi(-2)).powf(-0.5);
        for k in 0..2 {
            col[k] = propagation_phasor(r[k], s.guided_length(k), c) * (norm / r[k]);
        }
    }
    BeamformingMatrix { columns }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthogonalityResidual {
    /// h_1^H p_2 under the phase-matched beamformer.
    pub cross_12: Complex64,
    /// h_2^H p_1 under the phase-matched beamformer.
    pub cross_21: Complex64,
    /// Distance in metres of r11 - r21 - r12 + r22 from the nearest odd
    /// multiple of lambda / 2.
    pub constraint1: f64,
    /// |r11 r21 / (r12 r22) - 1|.
    pub constraint2: f64,
}

pub fn orthogonality_residual(s: &MisoScenario, c: &DerivedConstants) -> OrthogonalityResidual {
    let h = channel_matrix(s, c);
    let p = phase_matched_beamformer(s, c);
    let r = |m: usize, k: usize| distance(s.users[m], s.antennas[k]);
    let length = r(0, 0) - r(1, 0) - r(0, 1) + r(1, 1);
    let half = c.wavelength / 2.0;
    let odd = 2.0 * ((length / half - 1.0) / 2.0).round() + 1.0;
    OrthogonalityResidual {
        cross_12: dot(&h.h[0], &p.columns[1]),
        cross_21: dot(&h.h[1], &p.columns[0]),
        constraint1: (length - odd * half).abs(),
        constraint2: (r(0, 0) * r(1, 0) / (r(0, 1) * r(1, 1)) - 1.0).abs(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricPlacement {
    pub delta: f64,
    pub antennas: [Point3; 2],
    /// Odd k with f(x1 + delta) = k lambda / 4.
    pub k: i64,
}

/// Path difference from an antenna at `x` on the upper waveguide to the two
/// users on the x axis.
pub fn symmetric_path_difference(x: f64, x1: f64, x2: f64, side: f64, height: f64) -> f64 {
    let c2 = side * side / 9.0 + height * height;
    ((x - x1).powi(2) + c2).sqrt() - ((x - x2).powi(2) + c2).sqrt()
}

/// Users at (x1, 0, 0) and (x2, 0, 0), waveguides at y = +-D/3. Places the
/// antennas at (x1 + delta, D/3, d) and (x2 - delta, -D/3, d) with the
/// smallest delta that makes the path difference an odd multiple of lambda/4.
pub fn symmetric_feasible_placement(
    x1: f64,
    x2: f64,
    side: f64,
    height: f64,
    c: &DerivedConstants,
) -> Result<SymmetricPlacement> {
    if !(x1 < x2) || !(side > 0.0) || !(height > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "need x1 < x2 and positive D, d; got x1 = {x1}, x2 = {x2}, D = {side}, d = {height}"
        )));
    }
    let f = |x: f64| symmetric_path_difference(x, x1, x2, side, height);
    let mid = 0.5 * (x1 + x2);
    let low = f(x1);
    let quarter = c.wavelength / 4.0;
    if -low < 2.0 * quarter {
        return Err(Error::Infeasible { low, high: 0.0 });
    }
    let mut k = (low / quarter).ceil() as i64;
    if k % 2 == 0 {
        k += 1;
    }
    let target = k as f64 * quarter;
    let (mut lo, mut hi) = (x1, mid);
    loop {
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            break;
        }
        if f(m) < target {
            lo = m;
        } else {
            hi = m;
        }
    }
    let x = if (f(lo) - target).abs() <= (f(hi) - target).abs() { lo } else { hi };
    let delta = x - x1;
    Ok(SymmetricPlacement {
        delta,
        antennas: [
            Point3::new(x1 + delta, side / 3.0, height),
            Point3::new(x2 - delta, -side / 3.0, height),
        ],
        k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOutcome {
    pub indices: (usize, usize),
    pub scenario: MisoScenario,
    pub beamformer: BeamformingMatrix,
    pub sinr: [f64; 2],
}

impl SearchOutcome {
    pub fn min_sinr(&self) -> f64 {
        self.sinr[0].min(self.sinr[1])
    }
}

#[derive(Clone, Copy)]
struct Cell {
    min: f64,
    n1: usize,
    n2: usize,
}

fn better(a: Cell, b: Cell) -> Cell {
    match a.min.total_cmp(&b.min) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if (a.n1, a.n2) <= (b.n1, b.n2) {
                a
            } else {
                b
            }
        }
    }
}

/// Exhaustive max-min search over antenna positions `grid1` x `grid2` with
/// zero-forcing in every cell. Singular cells are skipped; ties go to the
/// lexicographically smallest index pair.
pub fn algorithm1_search(
    template: &MisoScenario,
    grid1: &[f64],
    grid2: &[f64],
    c: &DerivedConstants,
) -> Result<SearchOutcome> {
    let wgs = template
        .waveguides
        .ok_or_else(|| Error::Config("antenna search needs waveguides".into()))?;
    if grid1.is_empty() || grid2.is_empty() {
        return Err(Error::ParameterDomain("search grids must be nonempty".into()));
    }
    for (k, grid) in [grid1, grid2].into_iter().enumerate() {
        if let Some(x) = grid.iter().find(|&&x| !wgs[k].contains(wgs[k].point_at(x))) {
            return Err(Error::Geometry(format!("grid point x = {x} is off waveguide {}", k + 1)));
        }
    }
    let eval = |n1: usize, n2: usize| -> Option<f64> {
        let s = template.with_antenna_x(grid1[n1], grid2[n2]).ok()?;
        let h = channel_matrix(&s, c);
        let p = zf_beamformer(&h).ok()?;
        let v = sinr(&h, &p, template.rho);
        Some(v[0].min(v[1]))
    };
    let best = (0..grid1.len())
        .into_par_iter()
        .filter_map(|n1| {
            (0..grid2.len())
                .filter_map(|n2| eval(n1, n2).map(|min| Cell { min, n1, n2 }))
                .reduce(better)
        })
        .reduce_with(better)
        .ok_or(Error::SearchFailure)?;

    let scenario = template.with_antenna_x(grid1[best.n1], grid2[best.n2])?;
    let h = channel_matrix(&scenario, c);
    let beamformer = zf_beamformer(&h)?;
    Ok(SearchOutcome {
        indices: (best.n1, best.n2),
        scenario,
        beamformer,
        sinr: sinr(&h, &beamformer, template.rho),
    })
}

/// Grid `center + i step`, |i step| <= half_width, restricted to the waveguide span.
pub fn window_grid(center: f64, half_width: f64, step: f64, wg: &Waveguide) -> Vec<f64> {
    let n = (half_width / step + 1e-9).floor() as i64;
    (-n..=n)
        .map(|i| center + i as f64 * step)
        .filter(|&x| x >= wg.x_min_m && x <= wg.x_max_m)
        .collect()
}

/// Uniform grid over the whole waveguide span with spacing at most `step`.
pub fn span_grid(wg: &Waveguide, step: f64) -> Vec<f64> {
    let len = wg.x_max_m - wg.x_min_m;
    let n = (len / step).ceil().max(1.0) as usize;
    (0..=n).map(|i| wg.x_min_m + len * i as f64 / n as f64).collect()
}

/// Full-span search: a coarse pass over both waveguides, then a fine pass
/// in a window around the coarse winner.
pub fn two_stage_search(
    template: &MisoScenario,
    coarse_step: f64,
    fine_step: f64,
    fine_half_width: f64,
    c: &DerivedConstants,
) -> Result<SearchOutcome> {
    let wgs = template
        .waveguides
        .ok_or_else(|| Error::Config("antenna search needs waveguides".into()))?;
    let g1 = span_grid(&wgs[0], coarse_step);
    let g2 = span_grid(&wgs[1], coarse_step);
    let coarse = algorithm1_search(template, &g1, &g2, c)?;
    let f1 = window_grid(g1[coarse.indices.0], fine_half_width, fine_step, &wgs[0]);
    let f2 = window_grid(g2[coarse.indices.1], fine_half_width, fine_step, &wgs[1]);
    let fine = algorithm1_search(template, &f1, &f2, c)?;
    Ok(if fine.min_sinr() >= coarse.min_sinr() { fine } else { coarse })
}
