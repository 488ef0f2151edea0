//! Seeded Monte Carlo engine. Every trial owns an independent ChaCha8 stream
//! selected by its index, so results do not depend on how trials are spread
//! over worker threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{
    build_noma_coefficients, noma_oma_gap_highsnr, noma_rates, place_antennas_oma, rate_oma_array,
    rate_oma_bound, NomaAllocation,
};
use crate::error::{Error, Result};
use crate::miso::{
    algorithm1_search, channel_matrix, mrc_beamformer, rate_from_sinr, sinr, sinr_upper_bound,
    two_stage_search, window_grid, zf_beamformer, MisoScenario,
};
use crate::oracle::CompensatedSum;
use crate::params::{dbm_to_watts, distance, DerivedConstants, Deployment, PhysicalParams, Point3, Waveguide};

/// Trials per reduction block. Fixed so the summation tree never depends on
/// the worker count.
const BLOCK: u64 = 256;

/// Environment variable capping the worker count; 0 or unset means automatic.
pub const WORKERS_ENV: &str = "PINCHSIM_WORKERS";

/// Where the two MISO antennas sit when no search is run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MisoAntennas {
    /// Fixed antennas at (+-lambda/4, 0, d) without waveguides.
    Conventional,
    /// Pinching antennas at the waveguide points closest to their users.
    Closest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SearchDomain {
    /// Windows of +-half_width around each closest point, in wavelengths.
    Local {
        half_width_wavelengths: f64,
        step_wavelengths: f64,
    },
    /// Whole waveguides: coarse grid, then a fine grid around the coarse winner.
    Full {
        coarse_step_wavelengths: f64,
        fine_step_wavelengths: f64,
        fine_half_width_wavelengths: f64,
    },
}

impl SearchDomain {
    pub fn local_default() -> Self {
        SearchDomain::Local {
            half_width_wavelengths: 10.0,
            step_wavelengths: 0.1,
        }
    }

    pub fn full_default() -> Self {
        SearchDomain::Full {
            coarse_step_wavelengths: 1.0,
            fine_step_wavelengths: 0.05,
            fine_half_width_wavelengths: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scheme {
    /// One fixed antenna at height d above the region center.
    Conventional,
    #[serde(rename = "pinching-1")]
    Pinching1,
    #[serde(rename = "pinching-n-oma")]
    PinchingNOma { num_antennas: usize },
    /// One antenna per user at its closest point; `alphas` defaults to the
    /// odd-weight allocation.
    Noma {
        #[serde(default)]
        alphas: Option<Vec<f64>>,
    },
    MisoMrc { antennas: MisoAntennas },
    MisoZf { antennas: MisoAntennas },
    MisoBound { antennas: MisoAntennas },
    MisoSearch { domain: SearchDomain },
}

impl Scheme {
    /// Metric names, in the order of the values a trial produces.
    pub fn metrics(&self, deployment: &Deployment) -> Vec<String> {
        match self {
            Scheme::Conventional | Scheme::Pinching1 => vec!["sum_rate".into()],
            Scheme::PinchingNOma { .. } => {
                vec!["sum_rate".into(), "aligned_bound".into(), "clustered_bound".into()]
            }
            Scheme::Noma { .. } => {
                let m = deployment.num_regions();
                let mut v = vec!["sum_rate".into()];
                v.extend((1..=m).map(|i| format!("rate_{i}")));
                v.extend([
                    "oma_sum_rate".into(),
                    "gap".into(),
                ]);
                if m == 2 {
                    v.push("gap_highsnr".into());
                }
                v.extend([
                    "single_sum_rate".into(),
                    "conventional_sum_rate".into(),
                ]);
                v.extend((1..=m).map(|i| format!("single_rate_{i}")));
                v
            }
            Scheme::MisoMrc { .. }
            | Scheme::MisoZf { .. }
            | Scheme::MisoBound { .. }
            | Scheme::MisoSearch { .. } => {
                vec!["sum_rate".into(), "rate_1".into(), "rate_2".into(), "min_rate".into()]
            }
        }
    }

    fn check_deployment(&self, deployment: &Deployment) -> Result<()> {
        let ok = match self {
            Scheme::Conventional | Scheme::Pinching1 | Scheme::PinchingNOma { .. } => matches!(
                deployment,
                Deployment::Square { .. } | Deployment::Rectangle { .. }
            ),
            Scheme::Noma { .. } => matches!(deployment, Deployment::NomaAreas { .. }),
            _ => matches!(
                deployment,
                Deployment::Square { .. } | Deployment::SplitSquare { .. }
            ),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "scheme {self:?} cannot run on deployment {deployment:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    pub seed: u64,
    pub num_trials: u64,
    pub deployment: Deployment,
    pub scheme: Scheme,
    pub sweep_dbm: Vec<f64>,
    pub params: PhysicalParams,
    /// Extra waveguide length past each end of the deployment, single-waveguide schemes.
    pub waveguide_overhang_m: f64,
    /// Worker threads; `None` reads the environment, 0 means automatic.
    pub workers: Option<usize>,
}

impl TrialPlan {
    pub fn validate(&self) -> Result<()> {
        if self.num_trials == 0 {
            return Err(Error::Config("num_trials must be at least 1".into()));
        }
        if self.sweep_dbm.is_empty() {
            return Err(Error::Config("power sweep is empty".into()));
        }
        if self.sweep_dbm.iter().any(|p| !p.is_finite())
            || self.sweep_dbm.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config(format!(
                "power sweep must be finite and strictly increasing, got {:?}",
                self.sweep_dbm
            )));
        }
        if !(self.waveguide_overhang_m >= 0.0 && self.waveguide_overhang_m.is_finite()) {
            return Err(Error::Config("waveguide_overhang_m must be nonnegative".into()));
        }
        self.params.validate()?;
        self.deployment.validate()?;
        self.scheme.check_deployment(&self.deployment)?;
        match &self.scheme {
            Scheme::PinchingNOma { num_antennas: 0 } => {
                Err(Error::Config("num_antennas must be at least 1".into()))
            }
            Scheme::Noma { alphas: Some(a) } => {
                let m = self.deployment.num_regions();
                if a.len() != m {
                    return Err(Error::Config(format!(
                        "alphas has {} entries for {m} users",
                        a.len()
                    )));
                }
                NomaAllocation::new(a.clone()).map(|_| ())
            }
            Scheme::MisoSearch { domain } => {
                let steps = match *domain {
                    SearchDomain::Local {
                        half_width_wavelengths,
                        step_wavelengths,
                    } => [half_width_wavelengths, step_wavelengths, 1.0],
                    SearchDomain::Full {
                        coarse_step_wavelengths,
                        fine_step_wavelengths,
                        fine_half_width_wavelengths,
                    } => [coarse_step_wavelengths, fine_step_wavelengths, fine_half_width_wavelengths],
                };
                if steps.iter().all(|s| s.is_finite() && *s > 0.0) {
                    Ok(())
                } else {
                    Err(Error::Config(format!("search steps must be positive: {domain:?}")))
                }
            }
            _ => Ok(()),
        }
    }
}

/// Uniform point in region `region_index`, in the plane z = 0.
pub fn sample_user<R: Rng>(deployment: &Deployment, region_index: usize, rng: &mut R) -> Result<Point3> {
    let r = deployment.region(region_index)?;
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    Ok(Point3::new(
        r.x_min + (r.x_max - r.x_min) * u,
        r.y_min + (r.y_max - r.y_min) * v,
        0.0,
    ))
}

/// RNG for trial `trial`: the base seed picks the key, the trial index the stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

/// Running sums for one metric at one power point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
    n: u64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.sum.add(x);
        self.sum_sq.add(x * x);
        self.n += 1;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
        self.n += other.n;
    }

    pub fn stat(&self) -> Stat {
        let n = self.n as f64;
        let mean = self.sum.value() / n;
        let stderr = if self.n > 1 {
            let var = ((self.sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Stat {
            mean,
            stderr,
            n: self.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub powers_dbm: Vec<f64>,
    pub metrics: Vec<String>,
    /// `stats[power][metric]`.
    pub stats: Vec<Vec<Stat>>,
}

impl SweepResult {
    pub fn metric_index(&self, name: &str) -> Option<usize> {
        self.metrics.iter().position(|m| m == name)
    }

    pub fn get(&self, power: usize, name: &str) -> Option<Stat> {
        self.metric_index(name).map(|i| self.stats[power][i])
    }
}

/// Everything a trial needs that does not change between trials.
struct Context {
    consts: DerivedConstants,
    deployment: Deployment,
    scheme: Scheme,
    powers_w: Vec<f64>,
    waveguide: Option<Waveguide>,
    miso_waveguides: Option<[Waveguide; 2]>,
    allocation: Option<NomaAllocation>,
}

impl Context {
    fn new(plan: &TrialPlan) -> Result<Self> {
        let consts = plan.params.derive()?;
        let height = plan.params.waveguide_height_m;
        let (lo, hi) = plan.deployment.x_extent();
        let single = matches!(
            plan.scheme,
            Scheme::PinchingNOma { .. } | Scheme::Noma { .. }
        );
        let waveguide = if single {
            Some(Waveguide::new(
                0.0,
                height,
                lo - plan.waveguide_overhang_m,
                hi + plan.waveguide_overhang_m,
            )?)
        } else {
            None
        };
        let miso_waveguides = match &plan.deployment {
            Deployment::Square { center, side_m } | Deployment::SplitSquare { center, side_m } => {
                let y = side_m / 3.0;
                Some([
                    Waveguide::new(center.y + y, height, lo, hi)?,
                    Waveguide::new(center.y - y, height, lo, hi)?,
                ])
            }
            _ => None,
        };
        let allocation = match &plan.scheme {
            Scheme::Noma { alphas: Some(a) } => Some(NomaAllocation::new(a.clone())?),
            Scheme::Noma { alphas: None } => Some(build_noma_coefficients(plan.deployment.num_regions())?),
            _ => None,
        };
        Ok(Self {
            consts,
            deployment: plan.deployment.clone(),
            scheme: plan.scheme.clone(),
            powers_w: plan.sweep_dbm.iter().map(|&p| dbm_to_watts(p)).collect(),
            waveguide,
            miso_waveguides,
            allocation,
        })
    }

    fn region_center(&self) -> Result<Point3> {
        Ok(self.deployment.region(0)?.center())
    }

    /// Fills `out[power * metrics + metric]` for one trial.
    fn run_trial(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> Result<()> {
        let c = &self.consts;
        let p = &self.powers_w;
        match &self.scheme {
            Scheme::Conventional => {
                let user = sample_user(&self.deployment, 0, rng)?;
                let ctr = self.region_center()?;
                let antenna = Point3::new(ctr.x, ctr.y, c.height);
                for (i, &pw) in p.iter().enumerate() {
                    out[i] = snr_rate(c.eta * pw / (c.noise_power_w * sq_dist(user, antenna)));
                }
            }
            Scheme::Pinching1 => {
                let user = sample_user(&self.deployment, 0, rng)?;
                let ctr = self.region_center()?;
                let d2 = (user.y - ctr.y).powi(2) + c.height * c.height;
                for (i, &pw) in p.iter().enumerate() {
                    out[i] = snr_rate(c.eta * pw / (c.noise_power_w * d2));
                }
            }
            Scheme::PinchingNOma { num_antennas } => {
                let user = sample_user(&self.deployment, 0, rng)?;
                let wg = self.waveguide.expect("single-waveguide scheme");
                let arr = place_antennas_oma(user, *num_antennas, &wg, c)?;
                for (i, &pw) in p.iter().enumerate() {
                    let b = rate_oma_bound(user, &arr, pw, 1, c)?;
                    out[3 * i] = rate_oma_array(user, &arr, pw, 1, c)?;
                    out[3 * i + 1] = b.aligned;
                    out[3 * i + 2] = b.clustered;
                }
            }
            Scheme::Noma { .. } => self.noma_trial(rng, out)?,
            Scheme::MisoMrc { antennas } | Scheme::MisoZf { antennas } | Scheme::MisoBound { antennas } => {
                let users = self.miso_users(rng)?;
                let s = self.miso_scenario(users, *antennas)?;
                let h = channel_matrix(&s, c);
                let bf = match &self.scheme {
                    Scheme::MisoMrc { .. } => Some(mrc_beamformer(&h)?),
                    Scheme::MisoZf { .. } => Some(zf_beamformer(&h)?),
                    _ => None,
                };
                for (i, &pw) in p.iter().enumerate() {
                    let rho = pw / c.noise_power_w;
                    let v = match &bf {
                        Some(b) => sinr(&h, b, rho),
                        None => sinr_upper_bound(&h, rho),
                    };
                    write_miso(&mut out[4 * i..4 * i + 4], v);
                }
            }
            Scheme::MisoSearch { domain } => {
                let users = self.miso_users(rng)?;
                let template = self.miso_scenario(users, MisoAntennas::Closest)?;
                let found = search(&template, domain, c)?;
                // Zero-forcing SINR is linear in rho, so one search serves every power point.
                let h = channel_matrix(&found.scenario, c);
                let unit = sinr(&h, &found.beamformer, 1.0);
                for (i, &pw) in p.iter().enumerate() {
                    let rho = pw / c.noise_power_w;
                    write_miso(&mut out[4 * i..4 * i + 4], [unit[0] * rho, unit[1] * rho]);
                }
            }
        }
        Ok(())
    }

    fn noma_trial(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> Result<()> {
        let c = &self.consts;
        let m = self.deployment.num_regions();
        let users = (0..m)
            .map(|i| sample_user(&self.deployment, i, rng))
            .collect::<Result<Vec<_>>>()?;
        let wg = self.waveguide.expect("single-waveguide scheme");
        let alloc = self.allocation.as_ref().expect("noma allocation");
        let arrays = users
            .iter()
            .map(|&u| place_antennas_oma(u, m, &wg, c))
            .collect::<Result<Vec<_>>>()?;
        let conv = Point3::new(0.0, 0.0, c.height);
        let slot = m as f64;
        let mut vals = Vec::with_capacity(2 * m + 6);
        for (i, &pw) in self.powers_w.iter().enumerate() {
            let noma = noma_rates(&users, &wg, alloc, pw, c)?;
            let by_rank: Vec<usize> = noma.decode_order.clone();
            // OMA slots carry M P so both access schemes spend the same energy.
            let oma_power = slot * pw;
            let mut oma = 0.0;
            let mut conventional = 0.0;
            let mut single = vec![0.0; m];
            for (k, &u) in users.iter().enumerate() {
                oma += rate_oma_array(u, &arrays[k], oma_power, m, c)?;
                let near = sq_dist(u, wg.closest_point(u));
                single[k] = snr_rate(c.eta * oma_power / (c.noise_power_w * near)) / slot;
                conventional += snr_rate(c.eta * oma_power / (c.noise_power_w * sq_dist(u, conv))) / slot;
            }
            vals.clear();
            vals.push(noma.sum_rate());
            // Reported by channel rank so rate_1 is always the weaker user.
            vals.extend(by_rank.iter().map(|&u| noma.rates[u]));
            vals.push(oma);
            vals.push(noma.sum_rate() - oma);
            if m == 2 {
                let dist = |u: Point3| distance(u, wg.closest_point(u));
                vals.push(noma_oma_gap_highsnr(dist(users[by_rank[0]]), dist(users[by_rank[1]]))?);
            }
            vals.push(single.iter().sum());
            vals.push(conventional);
            vals.extend(by_rank.iter().map(|&u| single[u]));
            out[vals.len() * i..vals.len() * (i + 1)].copy_from_slice(&vals);
        }
        Ok(())
    }

    fn miso_users(&self, rng: &mut ChaCha8Rng) -> Result<[Point3; 2]> {
        let second = if self.deployment.num_regions() == 2 { 1 } else { 0 };
        Ok([
            sample_user(&self.deployment, 0, rng)?,
            sample_user(&self.deployment, second, rng)?,
        ])
    }

    fn miso_scenario(&self, users: [Point3; 2], antennas: MisoAntennas) -> Result<MisoScenario> {
        let c = &self.consts;
        match antennas {
            MisoAntennas::Conventional => {
                let q = c.wavelength / 4.0;
                MisoScenario::conventional(
                    users,
                    [Point3::new(q, 0.0, c.height), Point3::new(-q, 0.0, c.height)],
                    1.0,
                )
            }
            MisoAntennas::Closest => {
                let wgs = self
                    .miso_waveguides
                    .ok_or_else(|| Error::Config("MISO schemes need a square deployment".into()))?;
                MisoScenario::at_closest_points(users, wgs, 1.0)
            }
        }
    }
}

fn search(template: &MisoScenario, domain: &SearchDomain, c: &DerivedConstants) -> Result<crate::miso::SearchOutcome> {
    let wgs = template
        .waveguides
        .ok_or_else(|| Error::Config("antenna search needs waveguides".into()))?;
    let lam = c.wavelength;
    match *domain {
        SearchDomain::Local {
            half_width_wavelengths,
            step_wavelengths,
        } => {
            let g1 = window_grid(template.antennas[0].x, half_width_wavelengths * lam, step_wavelengths * lam, &wgs[0]);
            let g2 = window_grid(template.antennas[1].x, half_width_wavelengths * lam, step_wavelengths * lam, &wgs[1]);
            algorithm1_search(template, &g1, &g2, c)
        }
        SearchDomain::Full {
            coarse_step_wavelengths,
            fine_step_wavelengths,
            fine_half_width_wavelengths,
        } => two_stage_search(
            template,
            coarse_step_wavelengths * lam,
            fine_step_wavelengths * lam,
            fine_half_width_wavelengths * lam,
            c,
        ),
    }
}

fn write_miso(out: &mut [f64], v: [f64; 2]) {
    let r1 = rate_from_sinr(v[0]);
    let r2 = rate_from_sinr(v[1]);
    out[0] = r1 + r2;
    out[1] = r1;
    out[2] = r2;
    out[3] = r1.min(r2);
}

fn snr_rate(snr: f64) -> f64 {
    snr.ln_1p() * std::f64::consts::LOG2_E
}

fn sq_dist(a: Point3, b: Point3) -> f64 {
    (a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)
}

/// Worker count from the plan, else from `PINCHSIM_WORKERS`; 0 lets rayon decide.
pub fn resolve_workers(explicit: Option<usize>) -> usize {
    explicit.unwrap_or_else(|| {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(0)
    })
}

/// Runs every trial of `plan` and averages each metric per power point.
/// Single-region OMA schemes draw one user per trial and report the sum-rate
/// estimator log2(1 + SNR), whose mean is the ergodic sum rate for any M.
pub fn run_sweep(plan: &TrialPlan) -> Result<SweepResult> {
    plan.validate()?;
    let ctx = Context::new(plan)?;
    let metrics = plan.scheme.metrics(&plan.deployment);
    let width = metrics.len() * plan.sweep_dbm.len();
    let blocks = plan.num_trials.div_ceil(BLOCK);

    let run_block = |b: u64| -> Result<Vec<Accumulator>> {
        let mut acc = vec![Accumulator::default(); width];
        let mut buf = vec![0.0; width];
        let end = ((b + 1) * BLOCK).min(plan.num_trials);
        for t in b * BLOCK..end {
            let mut rng = trial_rng(plan.seed, t);
            ctx.run_trial(&mut rng, &mut buf)?;
            for (a, &x) in acc.iter_mut().zip(&buf) {
                a.push(x);
            }
        }
        Ok(acc)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(plan.workers))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let partials: Vec<Result<Vec<Accumulator>>> =
        pool.install(|| (0..blocks).into_par_iter().map(run_block).collect());

    let mut total = vec![Accumulator::default(); width];
    for part in partials {
        for (t, p) in total.iter_mut().zip(&part?) {
            t.merge(p);
        }
    }
    let m = metrics.len();
    let stats = (0..plan.sweep_dbm.len())
        .map(|i| total[i * m..(i + 1) * m].iter().map(Accumulator::stat).collect())
        .collect();
    Ok(SweepResult {
        powers_dbm: plan.sweep_dbm.clone(),
        metrics,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::single::{ergodic_sum_rate_pinching, rate_pinching_instant, SnrOperatingPoint};
    use proptest::prelude::*;
    use rand::Rng;

    fn plan(scheme: Scheme, deployment: Deployment, trials: u64) -> TrialPlan {
        TrialPlan {
            seed: 7,
            num_trials: trials,
            deployment,
            scheme,
            sweep_dbm: vec![0.0, 20.0, 40.0],
            params: PhysicalParams::default(),
            waveguide_overhang_m: 0.5,
            workers: Some(2),
        }
    }

    #[test]
    fn square_samples_stay_inside() {
        let d = Deployment::square(10.0);
        let mut rng = trial_rng(1, 0);
        for _ in 0..10_000 {
            let u = sample_user(&d, 0, &mut rng).unwrap();
            assert!(u.x.abs() <= 5.0 && u.y.abs() <= 5.0 && u.z == 0.0);
        }
        assert!(sample_user(&d, 1, &mut rng).is_err());
    }

    #[test]
    fn sample_mean_converges_to_center() {
        let d = Deployment::Square { center: Point3::new(3.0, -2.0, 0.0), side_m: 4.0 };
        let mut rng = trial_rng(2, 0);
        let n = 1_000_000;
        let (mut sx, mut sy) = (CompensatedSum::default(), CompensatedSum::default());
        for _ in 0..n {
            let u = sample_user(&d, 0, &mut rng).unwrap();
            sx.add(u.x);
            sy.add(u.y);
        }
        let sigma = 4.0 / 12f64.sqrt();
        let tol = 3.0 * sigma / (n as f64).sqrt();
        assert!((sx.value() / n as f64 - 3.0).abs() < tol);
        assert!((sy.value() / n as f64 + 2.0).abs() < tol);
    }

    #[test]
    fn streams_are_reproducible_and_equidistributed() {
        let a: Vec<f64> = (0..5).map(|_| trial_rng(9, 4).gen()).collect();
        let b: Vec<f64> = (0..5).map(|_| trial_rng(9, 4).gen()).collect();
        assert_eq!(a, b);
        // First draw of 10^4 streams, chi-square over 10 bins (9 dof, 0.1% critical value 27.9).
        let mut bins = [0u32; 10];
        for t in 0..10_000 {
            let x: f64 = trial_rng(9, t).gen();
            bins[(x * 10.0) as usize] += 1;
        }
        let chi2: f64 = bins.iter().map(|&o| (o as f64 - 1000.0).powi(2) / 1000.0).sum();
        assert!(chi2 < 27.9, "{chi2}");
    }

    #[test]
    fn single_trial_mean_is_that_trial() {
        let p = plan(Scheme::Pinching1, Deployment::square(10.0), 1);
        let r = run_sweep(&p).unwrap();
        let mut rng = trial_rng(7, 0);
        let u = sample_user(&p.deployment, 0, &mut rng).unwrap();
        let expected = rate_pinching_instant(u, dbm_to_watts(20.0), 1, &p.params).unwrap();
        assert_eq!(r.stats[1][0].mean, expected);
        assert_eq!(r.stats[1][0].n, 1);
        assert_eq!(r.stats[1][0].stderr, 0.0);
    }

    #[test]
    fn pinching_mean_tracks_closed_form() {
        let mut p = plan(Scheme::Pinching1, Deployment::square(10.0), 100_000);
        p.sweep_dbm = vec![30.0];
        let r = run_sweep(&p).unwrap();
        let op = SnrOperatingPoint::new(30.0, PhysicalParams::default(), 1, 10.0).unwrap();
        let exact = ergodic_sum_rate_pinching(&op);
        let s = r.stats[0][0];
        assert!((s.mean - exact).abs() < 4.0 * s.stderr, "{} vs {exact}", s.mean);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut p = plan(Scheme::PinchingNOma { num_antennas: 2 }, Deployment::square(10.0), 700);
        p.workers = Some(1);
        let a = run_sweep(&p).unwrap();
        p.workers = Some(5);
        let b = run_sweep(&p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mismatched_scheme_is_a_config_error() {
        let p = plan(Scheme::MisoZf { antennas: MisoAntennas::Closest }, Deployment::noma_pair(Point3::new(20.0, 20.0, 0.0), Point3::new(-10.0, 0.0, 0.0), 2.0), 1);
        assert!(matches!(run_sweep(&p), Err(Error::Config(_))));
        let mut q = plan(Scheme::Pinching1, Deployment::square(10.0), 1);
        q.sweep_dbm = vec![10.0, 5.0];
        assert!(matches!(run_sweep(&q), Err(Error::Config(_))));
        q.sweep_dbm = vec![];
        assert!(run_sweep(&q).is_err());
        q.sweep_dbm = vec![1.0];
        q.num_trials = 0;
        assert!(run_sweep(&q).is_err());
    }

    #[test]
    fn noma_metrics_are_consistent() {
        let d = Deployment::noma_pair(Point3::new(20.0, 20.0, 0.0), Point3::new(-10.0, 0.0, 0.0), 2.0);
        let p = plan(Scheme::Noma { alphas: None }, d.clone(), 50);
        let r = run_sweep(&p).unwrap();
        let names = Scheme::Noma { alphas: None }.metrics(&d);
        assert_eq!(r.metrics, names);
        for i in 0..3 {
            let sum = r.get(i, "sum_rate").unwrap().mean;
            let parts = r.get(i, "rate_1").unwrap().mean + r.get(i, "rate_2").unwrap().mean;
            assert!((sum - parts).abs() < 1e-9);
            let gap = r.get(i, "gap").unwrap().mean;
            assert!((gap - (sum - r.get(i, "oma_sum_rate").unwrap().mean)).abs() < 1e-9);
        }
    }

    #[test]
    fn miso_orderings_per_power() {
        let d = Deployment::SplitSquare { center: Point3::default(), side_m: 20.0 };
        let run = |s: Scheme| {
            let mut p = plan(s, d.clone(), 20);
            p.sweep_dbm = vec![10.0];
            run_sweep(&p).unwrap().stats[0][3].mean
        };
        let zf = run(Scheme::MisoZf { antennas: MisoAntennas::Closest });
        let bound = run(Scheme::MisoBound { antennas: MisoAntennas::Closest });
        let conv = run(Scheme::MisoBound { antennas: MisoAntennas::Conventional });
        assert!(zf <= bound + 1e-12);
        assert!(conv < bound);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn merging_is_associative(xs in proptest::collection::vec(-1e3f64..1e3, 3..60), cut1 in 0usize..20, cut2 in 0usize..20) {
            let n = xs.len();
            let (a, b) = (cut1.min(n), (cut1 + cut2).min(n));
            let acc = |s: &[f64]| { let mut a = Accumulator::default(); s.iter().for_each(|&x| a.push(x)); a };
            let (p, q, r) = (acc(&xs[..a]), acc(&xs[a..b]), acc(&xs[b..]));
            let mut left = p; left.merge(&q); left.merge(&r);
            let mut qr = q; qr.merge(&r);
            let mut right = p; right.merge(&qr);
            let (l, rr) = (left.stat(), right.stat());
            prop_assert!((l.mean - rr.mean).abs() <= 1e-12 * l.mean.abs().max(1.0));
            prop_assert!((l.stderr - rr.stderr).abs() <= 1e-12 * l.stderr.max(1.0));
            prop_assert_eq!(l.n, n as u64);
        }
    }
}
