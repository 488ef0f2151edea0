//! Several pinching antennas on one waveguide: the spherical-wave effective
//! channel, OMA antenna placement, and power-domain NOMA with SIC.

use std::f64::consts::{LOG2_E, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{distance, DerivedConstants, Point3, Waveguide};
use crate::single::pinching_ergodic_highsnr;

/// Phase tolerance a placed antenna must meet, in radians.
pub const PLACEMENT_PHASE_TOL: f64 = 1e-6;
const BISECTION_TOL_M: f64 = 1e-12;
const SPACING_SLACK: f64 = 1e-12;

/// Antennas on a single waveguide, in activation order.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaArray {
    positions: Vec<Point3>,
    waveguide: Waveguide,
}

impl AntennaArray {
    /// Checks that every antenna is on `waveguide` and that consecutive
    /// antennas are at least `guard_distance` apart.
    pub fn new(waveguide: Waveguide, positions: Vec<Point3>, guard_distance: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::ParameterDomain("antenna array is empty".into()));
        }
        if let Some(p) = positions.iter().find(|p| !waveguide.contains(**p)) {
            return Err(Error::Geometry(format!(
                "antenna at ({}, {}, {}) is not on the waveguide",
                p.x, p.y, p.z
            )));
        }
        for w in positions.windows(2) {
            let gap = distance(w[0], w[1]);
            if gap < guard_distance * (1.0 - SPACING_SLACK) {
                return Err(Error::Geometry(format!(
                    "antennas {gap:.3e} m apart violate the guard distance {guard_distance:.3e} m"
                )));
            }
        }
        Ok(Self {
            positions,
            waveguide,
        })
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn waveguide(&self) -> &Waveguide {
        &self.waveguide
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

fn turn_phasor(turns: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * (turns - turns.round()))
}

/// Free-space times in-waveguide phase factor. The two factors are kept
/// separate so a feed-point move rescales every user's entry for an antenna
/// by the identical unit phasor.
pub(crate) fn propagation_phasor(path_m: f64, guided_m: f64, c: &DerivedConstants) -> Complex64 {
    turn_phasor(path_m / c.wavelength) * turn_phasor(guided_m / c.guided_wavelength)
}

fn phasor_sum(user: Point3, positions: &[Point3], wg: &Waveguide, c: &DerivedConstants) -> Complex64 {
    positions
        .iter()
        .map(|&p| {
            let r = distance(user, p);
            let s = distance(wg.feed_point, p);
            propagation_phasor(r, s, c) * (c.eta.sqrt() / r)
        })
        .sum()
}

/// Effective channel h_m: sum over antennas of sqrt(eta) e^{-j(2 pi r/lambda + theta_n)} / r.
pub fn effective_channel(user: Point3, array: &AntennaArray, c: &DerivedConstants) -> Result<Complex64> {
    if array.positions.iter().any(|&p| distance(user, p) == 0.0) {
        return Err(Error::ParameterDomain("user coincides with an antenna".into()));
    }
    Ok(phasor_sum(user, &array.positions, &array.waveguide, c))
}

/// OMA rate with the waveguide power split equally over the N antennas.
pub fn rate_oma_array(
    user: Point3,
    array: &AntennaArray,
    power_w: f64,
    num_users: usize,
    c: &DerivedConstants,
) -> Result<f64> {
    let h = effective_channel(user, array, c)?;
    let snr = h.norm_sqr() * power_w / (array.len() as f64 * c.noise_power_w);
    Ok(snr.ln_1p() * LOG2_E / num_users as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmaBound {
    /// Rate with every antenna phase-aligned at its true distance.
    pub aligned: f64,
    /// Rate with all N antennas collapsed onto the closest waveguide point.
    pub clustered: f64,
}

pub fn rate_oma_bound(
    user: Point3,
    array: &AntennaArray,
    power_w: f64,
    num_users: usize,
    c: &DerivedConstants,
) -> Result<OmaBound> {
    let n = array.len() as f64;
    let amp: f64 = array
        .positions
        .iter()
        .map(|&p| c.eta.sqrt() / distance(user, p))
        .sum();
    let aligned = (power_w / (n * c.noise_power_w) * amp * amp).ln_1p() * LOG2_E;
    let closest = distance(user, array.waveguide.closest_point(user));
    let clustered = (n * power_w * c.eta / (c.noise_power_w * closest * closest)).ln_1p() * LOG2_E;
    let m = num_users as f64;
    Ok(OmaBound {
        aligned: aligned / m,
        clustered: clustered / m,
    })
}

/// Total phase, in turns, seen by `user` through an antenna at `x`.
fn phase_turns(user: Point3, wg: &Waveguide, x: f64, c: &DerivedConstants) -> f64 {
    let p = wg.point_at(x);
    distance(user, p) / c.wavelength + (x - wg.feed_point.x).abs() / c.guided_wavelength
}

/// Residual of the alignment condition at `x`, wrapped into (-pi, pi].
pub fn alignment_residual(user: Point3, wg: &Waveguide, x: f64, c: &DerivedConstants) -> f64 {
    let t = phase_turns(user, wg, x, c);
    2.0 * PI * (t - t.round())
}

/// First `x` in `[start, wg.x_max]` where the antenna's total phase is a whole
/// number of turns.
fn first_aligned_point(user: Point3, wg: &Waveguide, start: f64, c: &DerivedConstants) -> Option<f64> {
    let end = wg.x_max_m;
    if start > end {
        return None;
    }
    // The phase is monotone between breakpoints (the user's x and the feed)
    // for n_eff > 1; steps of lambda_g / 8 keep each bracket within one turn.
    let step = c.guided_wavelength / 8.0;
    let mut breaks: Vec<f64> = [user.x, wg.feed_point.x]
        .into_iter()
        .filter(|&b| b > start && b < end)
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.push(end);

    let turns = |x: f64| phase_turns(user, wg, x, c);
    let mut a = start;
    let mut ta = turns(a);
    if ta == ta.round() {
        return Some(a);
    }
    for piece_end in breaks {
        while a < piece_end {
            let b = (a + step).min(piece_end);
            let tb = turns(b);
            let target = if tb >= ta { ta.ceil() } else { ta.floor() };
            if (tb >= ta && target <= tb) || (tb < ta && target >= tb) {
                return Some(bisect_turns(&turns, a, b, target));
            }
            a = b;
            ta = tb;
        }
    }
    None
}

fn bisect_turns<F: Fn(f64) -> f64>(turns: &F, mut lo: f64, mut hi: f64, target: f64) -> f64 {
    let f_lo = turns(lo) - target;
    if f_lo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        if hi - lo <= BISECTION_TOL_M {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = turns(mid) - target;
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Successive placement: the first antenna is the first phase-aligned point
/// at or beyond the waveguide point closest to `user`; each further antenna is
/// the first aligned point at least one guard distance past its predecessor.
pub fn place_antennas_oma(
    user: Point3,
    num_antennas: usize,
    waveguide: &Waveguide,
    c: &DerivedConstants,
) -> Result<AntennaArray> {
    if num_antennas == 0 {
        return Err(Error::ParameterDomain("need at least one antenna".into()));
    }
    let mut positions = Vec::with_capacity(num_antennas);
    let mut start = waveguide.closest_point(user).x;
    while positions.len() < num_antennas {
        match first_aligned_point(user, waveguide, start, c) {
            Some(x) => {
                positions.push(waveguide.point_at(x));
                start = x + c.guard_distance;
            }
            None => {
                return Err(Error::Capacity {
                    requested: num_antennas,
                    feasible: positions.len(),
                })
            }
        }
    }
    AntennaArray::new(*waveguide, positions, c.guard_distance)
}

/// Power-domain NOMA coefficients, weakest user first.
#[derive(Debug, Clone, PartialEq)]
pub struct NomaAllocation {
    alphas: Vec<f64>,
}

impl NomaAllocation {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() || alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::ParameterDomain(format!(
                "power coefficients must be nonnegative, got {alphas:?}"
            )));
        }
        let total: f64 = alphas.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::ParameterDomain(format!(
                "power coefficients must sum to 1, got {total}"
            )));
        }
        Ok(Self { alphas })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

/// alpha_m = b_m / M^2 with odd weights b = [2M-1, ..., 3, 1].
pub fn build_noma_coefficients(num_users: usize) -> Result<NomaAllocation> {
    if num_users == 0 {
        return Err(Error::ParameterDomain("need at least one user".into()));
    }
    let total = (num_users * num_users) as f64;
    let alphas = (1..=num_users)
        .map(|m| (2 * (num_users - m) + 1) as f64 / total)
        .collect();
    NomaAllocation::new(alphas)
}

/// Power radiated by each of the M antennas when the waveguide carries `power_w`.
pub fn per_antenna_powers(power_w: f64, num_antennas: usize) -> Vec<f64> {
    vec![power_w / num_antennas as f64; num_antennas]
}

#[derive(Debug, Clone, PartialEq)]
pub struct NomaOutcome {
    /// Achievable rate of each user, in the caller's user order.
    pub rates: Vec<f64>,
    /// User indices from weakest to strongest channel, i.e. the SIC order.
    pub decode_order: Vec<usize>,
    /// |h_m|^2 of each user, in the caller's order.
    pub gains: Vec<f64>,
}

impl NomaOutcome {
    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// NOMA rates with one antenna at the waveguide point closest to each user
/// and SIC in ascending channel-gain order. `alloc` is indexed by rank
/// (weakest first); users are relabelled if the given order is not ascending.
pub fn noma_rates(
    users: &[Point3],
    waveguide: &Waveguide,
    alloc: &NomaAllocation,
    power_w: f64,
    c: &DerivedConstants,
) -> Result<NomaOutcome> {
    let m = users.len();
    if alloc.len() != m {
        return Err(Error::Shape {
            expected: m,
            got: alloc.len(),
        });
    }
    let positions: Vec<Point3> = users.iter().map(|&u| waveguide.closest_point(u)).collect();
    let gains: Vec<f64> = users
        .iter()
        .map(|&u| phasor_sum(u, &positions, waveguide, c).norm_sqr())
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| gains[a].total_cmp(&gains[b]).then(a.cmp(&b)));

    let per_antenna = power_w / m as f64;
    let alphas = alloc.alphas();
    // tail[k] = sum of alphas of ranks after k.
    let mut tail = vec![0.0; m];
    for k in (0..m.saturating_sub(1)).rev() {
        tail[k] = tail[k + 1] + alphas[k + 1];
    }
    let mut rates = vec![0.0; m];
    for (rank, &user) in order.iter().enumerate() {
        let rate = order[rank..]
            .iter()
            .map(|&decoder| {
                let g = gains[decoder] * per_antenna;
                let sinr = g * alphas[rank] / (g * tail[rank] + c.noise_power_w);
                sinr.ln_1p() * LOG2_E
            })
            .fold(f64::INFINITY, f64::min);
        rates[user] = rate;
    }
    Ok(NomaOutcome {
        rates,
        decode_order: order,
        gains,
    })
}

/// High-SNR ergodic NOMA sum rate for two users in far-apart areas: the weak
/// user saturates at -log2(alpha_2), the strong user follows the single
/// antenna high-SNR form at power P alpha_2 / N.
pub fn noma_ergodic_sum_highsnr(
    side: f64,
    height: f64,
    power_w: f64,
    num_antennas: usize,
    alpha2: f64,
    c: &DerivedConstants,
) -> Result<f64> {
    if !(alpha2 > 0.0 && alpha2 < 1.0) {
        return Err(Error::ParameterDomain(format!(
            "alpha_2 must lie in (0, 1), got {alpha2}"
        )));
    }
    let gamma = c.snr_scale(power_w) * alpha2 / num_antennas as f64;
    Ok(-alpha2.log2() + pinching_ergodic_highsnr(side, height, gamma))
}

/// High-SNR NOMA minus OMA sum-rate gap for M = N = 2 with OMA slot power 2P:
/// log2(dist1 / dist2) - 3.
pub fn noma_oma_gap_highsnr(dist1: f64, dist2: f64) -> Result<f64> {
    if !(dist1 > 0.0 && dist2 > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "distances must be positive, got {dist1} and {dist2}"
        )));
    }
    Ok((dist1 / dist2).log2() - 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::brute_force_channel;
    use crate::params::PhysicalParams;
    use crate::single::rate_pinching_instant;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn consts() -> DerivedConstants {
        PhysicalParams::default().derive().unwrap()
    }

    fn wg10() -> Waveguide {
        Waveguide::new(0.0, 3.0, -5.0, 5.0).unwrap()
    }

    #[test]
    fn channel_of_single_aligned_antenna() {
        let c = consts();
        let user = Point3::default();
        let wg = wg10();
        let start = wg.closest_point(user).x;
        let x = first_aligned_point(user, &wg, start, &c).unwrap();
        let arr = AntennaArray::new(wg, vec![wg.point_at(x)], c.guard_distance).unwrap();
        let h = effective_channel(user, &arr, &c).unwrap();
        let r = distance(user, wg.point_at(x));
        assert!((h.re - c.eta.sqrt() / r).abs() < 1e-9 * h.norm());
        assert!(h.im.abs() < 1e-6 * h.norm());
        assert!((r - 3.0).abs() < 1e-4);
    }

    #[test]
    fn channel_matches_brute_force_and_triangle_inequality() {
        let c = consts();
        let wg = wg10();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let user = Point3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 0.0);
            let mut xs: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            xs.sort_by(f64::total_cmp);
            let pos: Vec<Point3> = xs.iter().map(|&x| wg.point_at(x)).collect();
            let Ok(arr) = AntennaArray::new(wg, pos.clone(), c.guard_distance) else {
                continue;
            };
            let h = effective_channel(user, &arr, &c).unwrap();
            let b = brute_force_channel(user, &pos, wg.feed_point, &c);
            // The brute-force route evaluates sin/cos at ~1e3 rad, so its own
            // rounding sits near 1e-13 relative.
            assert!((h - b).norm() < 1e-12 * h.norm().max(b.norm()) + 1e-14 * pos.len() as f64);
            let cap: f64 = pos.iter().map(|&p| c.eta.sqrt() / distance(user, p)).sum();
            assert!(h.norm() <= cap * (1.0 + 1e-12));
        }
    }

    #[test]
    fn empty_array_rejected() {
        assert!(AntennaArray::new(wg10(), vec![], 1e-3).is_err());
        let wg = wg10();
        assert!(AntennaArray::new(wg, vec![wg.point_at(0.0), wg.point_at(1e-4)], 5e-3).is_err());
    }

    #[test]
    fn single_antenna_oma_reduces_to_pinching_rate() {
        let c = consts();
        let p = PhysicalParams::default();
        let wg = wg10();
        let user = Point3::new(1.3, 2.0, 0.0);
        let arr = place_antennas_oma(user, 1, &wg, &c).unwrap();
        let oma = rate_oma_array(user, &arr, 1.0, 3, &c).unwrap();
        let bound = rate_oma_bound(user, &arr, 1.0, 3, &c).unwrap();
        let pin = rate_pinching_instant(user, 1.0, 3, &p).unwrap();
        assert!((oma - bound.aligned).abs() < 1e-9);
        // The aligned antenna is within one guided wavelength of the closest point.
        assert!((arr.positions()[0].x - 1.3).abs() < c.guided_wavelength);
        assert!((oma - pin).abs() < 1e-6);
        assert!((bound.clustered - pin).abs() < 1e-12);
    }

    #[test]
    fn clustered_bound_example() {
        // user (0, 4, 0), d = 3, N = 4, M = 1, eta P / sigma^2 = 25 -> log2(5).
        let c = consts();
        let wg = wg10();
        let user = Point3::new(0.0, 4.0, 0.0);
        let arr = place_antennas_oma(user, 4, &wg, &c).unwrap();
        let power = 25.0 * c.noise_power_w / c.eta;
        let b = rate_oma_bound(user, &arr, power, 1, &c).unwrap();
        assert!((b.clustered - 5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn equal_distance_aligned_rate() {
        // Two antennas symmetric about the user's closest point share a distance;
        // when both are phase aligned the rate is log2(1 + N eta P / (r^2 sigma^2)).
        let c = consts();
        let wg = Waveguide::with_feed_x(0.0, 3.0, -5.0, 5.0, 0.0).unwrap();
        let user = Point3::new(0.0, 1.0, 0.0);
        // Search x > 0 for an aligned point; the mirror image -x shares both
        // the free-space and in-waveguide path lengths.
        let x = first_aligned_point(user, &wg, 0.01, &c).unwrap();
        let arr = AntennaArray::new(wg, vec![wg.point_at(-x), wg.point_at(x)], c.guard_distance)
            .unwrap();
        let r = distance(user, wg.point_at(x));
        let gamma = c.snr_scale(1.0);
        let expected = (2.0 * gamma / (r * r)).ln_1p() * LOG2_E;
        let got = rate_oma_array(user, &arr, 1.0, 1, &c).unwrap();
        assert!((got - expected).abs() < 1e-9);
    }

    #[test]
    fn misaligned_pair_falls_below_bound() {
        let c = consts();
        let wg = wg10();
        let user = Point3::new(0.0, 2.0, 0.0);
        let x1 = first_aligned_point(user, &wg, 0.0, &c).unwrap();
        // Find a second point whose phase sits half a turn from alignment.
        let mut x2 = x1 + c.guard_distance;
        while alignment_residual(user, &wg, x2, &c).abs() < PI - 0.05 {
            x2 += c.guided_wavelength / 400.0;
        }
        let arr = AntennaArray::new(wg, vec![wg.point_at(x1), wg.point_at(x2)], c.guard_distance)
            .unwrap();
        let oma = rate_oma_array(user, &arr, 1.0, 1, &c).unwrap();
        let b = rate_oma_bound(user, &arr, 1.0, 1, &c).unwrap();
        assert!(oma < b.aligned - 1.0, "{oma} vs {}", b.aligned);
    }

    #[test]
    fn placement_meets_phase_and_spacing_contract() {
        let c = consts();
        let wg = wg10();
        let user = Point3::new(-2.0, 3.0, 0.0);
        let arr = place_antennas_oma(user, 8, &wg, &c).unwrap();
        assert_eq!(arr.len(), 8);
        for p in arr.positions() {
            assert!(alignment_residual(user, &wg, p.x, &c).abs() < PLACEMENT_PHASE_TOL);
        }
        assert!(arr.positions()[0].x >= -2.0);
        for w in arr.positions().windows(2) {
            assert!(w[1].x - w[0].x >= c.wavelength / 2.0 * (1.0 - 1e-12));
        }
        let oma = rate_oma_array(user, &arr, 1.0, 1, &c).unwrap();
        let b = rate_oma_bound(user, &arr, 1.0, 1, &c).unwrap();
        assert!((oma - b.aligned).abs() < 1e-6);
    }

    #[test]
    fn placement_reports_capacity() {
        let c = consts();
        let wg = wg10();
        let user = Point3::new(4.99, 0.0, 0.0);
        match place_antennas_oma(user, 8, &wg, &c) {
            Err(Error::Capacity { requested, feasible }) => {
                assert_eq!(requested, 8);
                assert!(feasible < 8);
                assert!(place_antennas_oma(user, feasible.max(1), &wg, &c).is_ok() || feasible == 0);
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn placement_with_any_feed_reaches_its_bound() {
        let c = consts();
        let user = Point3::new(0.7, -1.5, 0.0);
        for feed in [-5.0, -1.0, 0.7, 0.71, 3.0, 5.0] {
            let wg = Waveguide::with_feed_x(0.0, 3.0, -5.0, 5.0, feed).unwrap();
            let arr = place_antennas_oma(user, 4, &wg, &c).unwrap();
            let oma = rate_oma_array(user, &arr, 1.0, 1, &c).unwrap();
            let b = rate_oma_bound(user, &arr, 1.0, 1, &c).unwrap();
            assert!((oma - b.aligned).abs() < 1e-6, "feed {feed}");
        }
    }

    #[test]
    fn noma_coefficients() {
        assert_eq!(build_noma_coefficients(1).unwrap().alphas(), &[1.0]);
        assert_eq!(build_noma_coefficients(2).unwrap().alphas(), &[0.75, 0.25]);
        let five = build_noma_coefficients(5).unwrap();
        let expected = [9.0, 7.0, 5.0, 3.0, 1.0].map(|b| b / 25.0);
        assert_eq!(five.alphas(), &expected);
        for m in 1..=32 {
            let a = build_noma_coefficients(m).unwrap();
            assert!(a.alphas().windows(2).all(|w| w[0] > w[1]));
        }
        assert!(NomaAllocation::new(vec![0.5, 0.4]).is_err());
        assert!(NomaAllocation::new(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn single_user_noma_is_oma() {
        let c = consts();
        let wg = wg10();
        let user = Point3::new(1.0, 2.0, 0.0);
        let out = noma_rates(&[user], &wg, &NomaAllocation::new(vec![1.0]).unwrap(), 1.0, &c).unwrap();
        let arr = AntennaArray::new(wg, vec![wg.closest_point(user)], c.guard_distance).unwrap();
        let oma = rate_oma_array(user, &arr, 1.0, 1, &c).unwrap();
        assert!((out.rates[0] - oma).abs() < 1e-12);
        assert!(noma_rates(&[user], &wg, &build_noma_coefficients(2).unwrap(), 1.0, &c).is_err());
    }

    #[test]
    fn strong_user_rate_has_no_residual_interference() {
        let c = consts();
        let wg = Waveguide::new(0.0, 3.0, -11.0, 21.0).unwrap();
        let weak = Point3::new(20.3, 19.6, 0.0);
        let strong = Point3::new(-10.4, 0.5, 0.0);
        let alloc = build_noma_coefficients(2).unwrap();
        let out = noma_rates(&[weak, strong], &wg, &alloc, 10.0, &c).unwrap();
        assert_eq!(out.decode_order, vec![0, 1]);
        let expected = (out.gains[1] * 5.0 * 0.25 / c.noise_power_w).ln_1p() * LOG2_E;
        assert!((out.rates[1] - expected).abs() < 1e-12);
        // SIC consistency: the weak user's rate is the min over both decoders.
        let r = |g: f64| (g * 5.0 * 0.75 / (g * 5.0 * 0.25 + c.noise_power_w)).ln_1p() * LOG2_E;
        assert!(out.rates[0] <= r(out.gains[0]) + 1e-15);
        assert!(out.rates[0] <= r(out.gains[1]) + 1e-15);
        // Reversed input order gives the same per-user rates.
        let rev = noma_rates(&[strong, weak], &wg, &alloc, 10.0, &c).unwrap();
        assert_eq!(rev.decode_order, vec![1, 0]);
        assert!((rev.rates[0] - out.rates[1]).abs() < 1e-12);
    }

    #[test]
    fn degenerate_allocation_reproduces_single_user_rate() {
        let c = consts();
        let wg = Waveguide::new(0.0, 3.0, -11.0, 21.0).unwrap();
        let users = [Point3::new(20.0, 20.0, 0.0), Point3::new(-10.0, 0.3, 0.0)];
        let alloc = NomaAllocation::new(vec![0.0, 1.0]).unwrap();
        let out = noma_rates(&users, &wg, &alloc, 4.0, &c).unwrap();
        let pos: Vec<Point3> = users.iter().map(|&u| wg.closest_point(u)).collect();
        let arr = AntennaArray::new(wg, pos, c.guard_distance).unwrap();
        let oma = rate_oma_array(users[1], &arr, 4.0, 1, &c).unwrap();
        assert!((out.rates[1] - oma).abs() < 1e-12);
        assert_eq!(out.rates[0], 0.0);
        let p = per_antenna_powers(4.0, 2);
        assert_eq!(p.iter().sum::<f64>(), 4.0);
    }

    #[test]
    fn highsnr_noma_components() {
        let c = consts();
        let power = 10.0;
        let full = noma_ergodic_sum_highsnr(2.0, 3.0, power, 2, 0.25, &c).unwrap();
        let strong = pinching_ergodic_highsnr(2.0, 3.0, c.snr_scale(power) * 0.25 / 2.0);
        assert!((full - 2.0 - strong).abs() < 1e-12);
        let near_one = noma_ergodic_sum_highsnr(2.0, 3.0, power, 2, 1.0 - 1e-12, &c).unwrap();
        let strong1 = pinching_ergodic_highsnr(2.0, 3.0, c.snr_scale(power) * (1.0 - 1e-12) / 2.0);
        assert!((near_one - strong1).abs() < 1e-9);
        assert!(noma_ergodic_sum_highsnr(2.0, 3.0, power, 2, 1.0, &c).is_err());
        assert!(noma_ergodic_sum_highsnr(2.0, 3.0, power, 2, 0.0, &c).is_err());
    }

    #[test]
    fn gap_formula_examples() {
        assert!(noma_oma_gap_highsnr(8.0, 1.0).unwrap().abs() < 1e-15);
        assert!((noma_oma_gap_highsnr(64.0, 1.0).unwrap() - 3.0).abs() < 1e-15);
        assert!(noma_oma_gap_highsnr(0.0, 1.0).is_err());
    }
}
