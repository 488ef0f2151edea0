//! Self-checks run by `pinchsim validate`: closed forms against quadrature
//! and Monte Carlo, channels against brute-force sums, beamformers against
//! the single-user bound, and the geometric placement solvers.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::array::{effective_channel, place_antennas_oma, rate_oma_array, rate_oma_bound, AntennaArray};
use crate::error::Result;
use crate::harness::{run_sweep, trial_rng, Scheme, TrialPlan};
use crate::miso::{
    algorithm1_search, channel_matrix, mrc_beamformer, orthogonality_residual, phase_matched_beamformer,
    rate_from_sinr, sinr, sinr_upper_bound, symmetric_feasible_placement, window_grid, zf_beamformer,
    ChannelMatrix, MisoScenario,
};
use crate::oracle::{brute_force_channel, g2_by_quadrature, g_by_quadrature};
use crate::params::{dbm_to_watts, Deployment, PhysicalParams, Point3, Waveguide};
use crate::single::{
    conventional_bound_highsnr, g2_closed, g3, g4, g5, g_closed, pinching_ergodic, pinching_ergodic_highsnr,
    rate_gap_highsnr, SnrOperatingPoint, ergodic_sum_rate_pinching_via_g,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `residual <= tolerance`; NaN never passes.
    fn at_most(name: &'static str, residual: f64, tolerance: f64) -> Self {
        Self {
            name,
            residual,
            tolerance,
            passed: residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<36} residual {:.3e}  tolerance {:.3e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.residual,
                c.tolerance
            )?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Monte Carlo trials behind the ergodic-rate check.
    pub mc_trials: u64,
    /// Random draws for the randomized checks.
    pub draws: u64,
    /// Multiplies eta on the closed-form side of the Monte Carlo check only.
    /// Anything but 1 is fault injection.
    pub eta_scale: f64,
    pub workers: Option<usize>,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            mc_trials: 1_000_000,
            draws: 1000,
            eta_scale: 1.0,
            workers: None,
        }
    }
}

pub fn run_validation(opts: &ValidateOptions) -> Result<ValidationReport> {
    let mut r = ValidationReport::default();
    g_family(opts, &mut r);
    ergodic_rate(opts, &mut r)?;
    channels(opts, &mut r)?;
    miso(opts, &mut r)?;
    symmetric(&mut r)?;
    Ok(r)
}

fn g_family(opts: &ValidateOptions, r: &mut ValidationReport) {
    let mut rng = trial_rng(opts.seed, 0);
    let (mut eg, mut eg2) = (0.0f64, 0.0f64);
    for _ in 0..opts.draws {
        let a = 10f64.powf(rng.gen_range(-2.0..4.0));
        let side = rng.gen_range(0.5..50.0);
        let g = g_closed(a, side).map_or(f64::NAN, |v| (v - g_by_quadrature(a, side)).abs());
        let g2 = g2_closed(a, side).map_or(f64::NAN, |v| (v - g2_by_quadrature(a, side)).abs());
        eg = nan_max(eg, g);
        eg2 = nan_max(eg2, g2);
    }
    r.checks.push(Check::at_most("g closed form vs quadrature", eg, 1e-9));
    r.checks.push(Check::at_most("g2 closed form vs quadrature", eg2, 1e-9));

    // Shape of g3, g4, g5: nonnegative and nondecreasing on (0, 100].
    let xs: Vec<f64> = (1..=1000).map(|i| 0.1 * i as f64).collect();
    let mut worst = 0.0f64;
    for g in [g3 as fn(f64) -> f64, g4, g5] {
        let v: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
        worst = worst.max(v.iter().map(|&y| -y).fold(0.0, f64::max));
        worst = worst.max(v.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max));
    }
    r.checks.push(Check::at_most("g3/g4/g5 sign and monotonicity", worst, 0.0));

    let h = 3.0;
    let gamma = 1e9;
    let mut gap = 0.0f64;
    let mut drop = 0.0f64;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=1000 {
        let ratio = 0.1 * (1000f64).powf(i as f64 / 1000.0);
        let side = ratio * h;
        let g = rate_gap_highsnr(side, h).unwrap_or(f64::NAN);
        let diff = pinching_ergodic_highsnr(side, h, gamma) - conventional_bound_highsnr(side, h, gamma);
        gap = nan_max(gap, (g - diff).abs());
        drop = nan_max(drop, (prev - g).max(-g));
        prev = g;
    }
    r.checks.push(Check::at_most("high-SNR gap equals g3(D/2d)", gap, 1e-10));
    r.checks.push(Check::at_most("high-SNR gap nonnegative, nondecreasing", drop, 0.0));
}

fn ergodic_rate(opts: &ValidateOptions, r: &mut ValidationReport) -> Result<()> {
    let params = PhysicalParams::default();
    let side = 10.0;
    let p_dbm = 30.0;
    let sweep = run_sweep(&TrialPlan {
        seed: opts.seed,
        num_trials: opts.mc_trials,
        deployment: Deployment::square(side),
        scheme: Scheme::Pinching1,
        sweep_dbm: vec![p_dbm],
        params,
        waveguide_overhang_m: 0.0,
        workers: opts.workers,
    })?;
    let mc = sweep.stats[0][0];
    let op = SnrOperatingPoint::new(p_dbm, params, 1, side)?;
    let closed = pinching_ergodic(side, params.waveguide_height_m, op.gamma() * opts.eta_scale);
    let tol = (3.0 * mc.stderr).min(5e-3 * closed);
    r.checks.push(Check::at_most("ergodic rate vs Monte Carlo", (mc.mean - closed).abs(), tol));

    let mut route = 0.0f64;
    for p in [0.0, 15.0, 30.0, 45.0] {
        for s in [1.0, 10.0, 50.0] {
            let op = SnrOperatingPoint::new(p, params, 1, s)?;
            let a = pinching_ergodic(s, op.height(), op.gamma());
            route = route.max((a - ergodic_sum_rate_pinching_via_g(&op)).abs());
        }
    }
    r.checks.push(Check::at_most("ergodic rate vs integral route", route, 1e-9));
    Ok(())
}

fn channels(opts: &ValidateOptions, r: &mut ValidationReport) -> Result<()> {
    let c = PhysicalParams::default().derive()?;
    let wg = Waveguide::new(0.0, c.height, -5.5, 5.5)?;
    let mut rng = trial_rng(opts.seed, 1);
    let mut sum_err = 0.0f64;
    for _ in 0..opts.draws {
        let user = Point3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 0.0);
        let mut xs: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.5..5.5)).collect();
        xs.sort_by(f64::total_cmp);
        let pos: Vec<Point3> = xs.iter().map(|&x| wg.point_at(x)).collect();
        let Ok(arr) = AntennaArray::new(wg, pos.clone(), c.guard_distance) else {
            continue;
        };
        let h = effective_channel(user, &arr, &c)?;
        let b = brute_force_channel(user, &pos, wg.feed_point, &c);
        sum_err = sum_err.max((h - b).norm() / h.norm().max(b.norm()));
    }
    r.checks.push(Check::at_most("channel vs brute-force sum", sum_err, 1e-10));

    let power = dbm_to_watts(30.0);
    let mut bound = 0.0f64;
    let mut clustered = 0.0f64;
    let draws = (opts.draws / 4).max(1);
    for n in [1, 2, 4, 8] {
        for _ in 0..draws {
            let user = Point3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 0.0);
            let arr = place_antennas_oma(user, n, &wg, &c)?;
            let rate = rate_oma_array(user, &arr, power, 1, &c)?;
            let b = rate_oma_bound(user, &arr, power, 1, &c)?;
            bound = bound.max((rate - b.aligned).abs());
            clustered = clustered.max((rate - b.clustered).abs() / b.clustered);
        }
    }
    r.checks.push(Check::at_most("placed array meets aligned bound", bound, 1e-6));
    r.checks.push(Check::at_most("placed array near clustered bound", clustered, 1e-2));
    Ok(())
}

fn miso(opts: &ValidateOptions, r: &mut ValidationReport) -> Result<()> {
    let c = PhysicalParams::default().derive()?;
    let side = 20.0;
    let wgs = [
        Waveguide::new(side / 3.0, c.height, -side / 2.0, side / 2.0)?,
        Waveguide::new(-side / 3.0, c.height, -side / 2.0, side / 2.0)?,
    ];
    let rho = dbm_to_watts(10.0) / c.noise_power_w;
    let mut rng = trial_rng(opts.seed, 2);
    let (mut dominance, mut cross, mut pm) = (0.0f64, 0.0f64, 0.0f64);
    let instances = opts.draws * 10;
    for i in 0..instances {
        let mut user = || Point3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), 0.0);
        let users = [user(), user()];
        let x = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
        let s = MisoScenario::new(users, wgs, [wgs[0].point_at(x[0]), wgs[1].point_at(x[1])], rho)?;
        let h = channel_matrix(&s, &c);
        let ub = sinr_upper_bound(&h, rho);
        let mut beams = vec![mrc_beamformer(&h)?, phase_matched_beamformer(&s, &c)];
        if let Ok(zf) = zf_beamformer(&h) {
            for m in 0..2 {
                let own = dot(h.user(m), zf.column(m)).norm_sqr();
                let leak = dot(h.user(m), zf.column(1 - m)).norm_sqr();
                cross = cross.max(leak / own);
            }
            beams.push(zf);
        }
        // The exhaustive search is costly, so only a subset runs it.
        if i % 100 == 0 {
            let step = c.wavelength / 4.0;
            let g1 = window_grid(s.antennas[0].x, c.wavelength, step, &wgs[0]);
            let g2 = window_grid(s.antennas[1].x, c.wavelength, step, &wgs[1]);
            let found = algorithm1_search(&s, &g1, &g2, &c)?;
            let moved = sinr_upper_bound(&channel_matrix(&found.scenario, &c), rho);
            dominance = dominance.max(excess(found.sinr, moved));
        }
        for b in &beams {
            dominance = dominance.max(excess(sinr(&h, b, rho), ub));
        }
        let mrc = mrc_beamformer(&h)?;
        let phm = phase_matched_beamformer(&s, &c);
        for m in 0..2 {
            pm = pm.max((dot(mrc.column(m), phm.column(m)).norm() - 1.0).abs());
        }
    }
    r.checks.push(Check::at_most("beamformers below single-user bound", dominance, 1e-12));
    r.checks.push(Check::at_most("zero-forcing cross terms", cross, 1e-12));
    r.checks.push(Check::at_most("phase-matched equals MRC", pm, 1e-12));
    Ok(())
}

fn symmetric(r: &mut ValidationReport) -> Result<()> {
    let c = PhysicalParams::default().derive()?;
    let (x1, x2, side) = (-5.0, 5.0, 20.0);
    let sp = symmetric_feasible_placement(x1, x2, side, c.height, &c)?;
    let wgs = [
        Waveguide::new(side / 3.0, c.height, -side / 2.0, side / 2.0)?,
        Waveguide::new(-side / 3.0, c.height, -side / 2.0, side / 2.0)?,
    ];
    let rho = dbm_to_watts(10.0) / c.noise_power_w;
    let users = [Point3::new(x1, 0.0, 0.0), Point3::new(x2, 0.0, 0.0)];
    let s = MisoScenario::new(users, wgs, sp.antennas, rho)?;
    let res = orthogonality_residual(&s, &c);
    r.checks.push(Check::at_most("symmetric placement constraint 1", res.constraint1, 1e-10));
    r.checks.push(Check::at_most("symmetric placement constraint 2", res.constraint2, 1e-10));
    let h = channel_matrix(&s, &c);
    let zf = sinr(&h, &zf_beamformer(&h)?, rho);
    let ub = sinr_upper_bound(&h, rho);
    let min = |v: [f64; 2]| rate_from_sinr(v[0]).min(rate_from_sinr(v[1]));
    r.checks.push(Check::at_most("symmetric placement reaches bound", (min(ub) - min(zf)).abs(), 1e-3));
    r.checks.push(Check::at_most(
        "symmetric placement interference (dB)",
        interference_db(&h, &phase_matched_beamformer(&s, &c)),
        -100.0,
    ));
    Ok(())
}

/// Worst interference-to-signal power ratio in dB under beamformer `p`.
pub fn interference_db(h: &ChannelMatrix, p: &crate::miso::BeamformingMatrix) -> f64 {
    (0..2)
        .map(|m| {
            let own = dot(h.user(m), p.column(m)).norm_sqr();
            let leak = dot(h.user(m), p.column(1 - m)).norm_sqr();
            10.0 * (leak / own).log10()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn dot(a: &[Complex64; 2], b: &[Complex64; 2]) -> Complex64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

/// Largest relative amount by which `v` exceeds `bound`.
fn excess(v: [f64; 2], bound: [f64; 2]) -> f64 {
    (0..2).map(|m| (v[m] - bound[m]) / bound[m]).fold(0.0, f64::max)
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}
