//! Drivers that turn a scenario configuration into a result table, one per
//! figure or table of results.

use rayon::prelude::*;

use crate::config::{FigureConfig, ScenarioConfig};
use crate::error::{Error, Result};
use crate::harness::{
    run_sweep, sample_user, trial_rng, MisoAntennas, Scheme, SearchDomain, SweepResult, TrialPlan,
};
use crate::miso::{
    algorithm1_search, channel_matrix, mrc_beamformer, rate_from_sinr, sinr, sinr_upper_bound,
    window_grid, zf_beamformer, MisoScenario,
};
use crate::params::{dbm_to_watts, DerivedConstants, Deployment, Point3, Waveguide};
use crate::single::{
    conventional_bound, pinching_ergodic, pinching_ergodic_highsnr, SnrOperatingPoint,
};
use crate::table::{ResultTable, Row};

/// Slack allowed when checking the rate ordering of the table1 modes.
pub const ORDERING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOutput {
    pub table: ResultTable,
    /// Broken ordering checks, one message each; only table1 produces any.
    pub violations: Vec<String>,
}

/// Provenance lines written above the CSV header.
pub fn provenance(cfg: &ScenarioConfig) -> Vec<(String, String)> {
    vec![
        ("pinchsim_version".into(), env!("CARGO_PKG_VERSION").into()),
        ("subcommand".into(), cfg.figure.name().into()),
        ("config_sha256".into(), cfg.digest()),
        ("seed".into(), cfg.seed.to_string()),
        ("config".into(), cfg.to_json()),
    ]
}

/// Renders the full CSV document for a finished run.
pub fn render_csv(cfg: &ScenarioConfig, out: &FigureOutput) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    crate::table::write_csv(&mut buf, &provenance(cfg), &out.table)?;
    Ok(buf)
}

pub fn run_figure(cfg: &ScenarioConfig, workers: Option<usize>) -> Result<FigureOutput> {
    cfg.validate()?;
    let d = Driver { cfg, workers };
    match &cfg.figure {
        FigureConfig::Fig4(f) => d.fig4(&f.sides_m, f.analytical),
        FigureConfig::Fig5(f) => d.fig5(f.side_m, &f.lengths_m, f.analytical),
        FigureConfig::Fig6(f) => d.fig6(f.side_m, &f.antenna_counts, f.waveguide_overhang_m),
        FigureConfig::Fig7(f) => d.fig7(f),
        FigureConfig::Fig8(f) => d.fig8(f),
        FigureConfig::Gap(f) => d.gap(f),
        FigureConfig::Fig9(f) => d.fig9(f.side_m, &f.local_search, f.full_search.as_ref()),
        FigureConfig::Fig10(f) => d.fig10(f),
        FigureConfig::Table1(f) => d.table1(f),
    }
}

struct Driver<'a> {
    cfg: &'a ScenarioConfig,
    workers: Option<usize>,
}

impl Driver<'_> {
    fn consts(&self) -> Result<DerivedConstants> {
        self.cfg.physical.derive()
    }

    fn sweep(&self, deployment: Deployment, scheme: Scheme, overhang: f64) -> Result<SweepResult> {
        run_sweep(&TrialPlan {
            seed: self.cfg.seed,
            num_trials: self.cfg.trials(),
            deployment,
            scheme,
            sweep_dbm: self.cfg.sweep(),
            params: self.cfg.physical,
            waveguide_overhang_m: overhang,
            workers: self.workers,
        })
    }

    fn fig4(&self, sides: &[f64], analytical: bool) -> Result<FigureOutput> {
        let mut t = ResultTable::new(&["side_m"]);
        for &side in sides {
            let dep = Deployment::square(side);
            let conv = self.sweep(dep.clone(), Scheme::Conventional, 0.0)?;
            let pin = self.sweep(dep, Scheme::Pinching1, 0.0)?;
            push_metric(&mut t, "conventional-sim", &conv, "sum_rate", &[side]);
            push_metric(&mut t, "pinching-1-sim", &pin, "sum_rate", &[side]);
            if analytical {
                let h = self.cfg.physical.waveguide_height_m;
                self.push_analytical(&mut t, "pinching-1-analytical", side, &[side], |g| {
                    pinching_ergodic(side, h, g)
                })?;
                self.push_analytical(&mut t, "pinching-1-highsnr", side, &[side], |g| {
                    pinching_ergodic_highsnr(side, h, g)
                })?;
                self.push_analytical(&mut t, "conventional-bound", side, &[side], |g| {
                    conventional_bound(side, h, g)
                })?;
            }
        }
        Ok(plain(t))
    }

    fn fig5(&self, side: f64, lengths: &[f64], analytical: bool) -> Result<FigureOutput> {
        let mut t = ResultTable::new(&["side_m", "length_m"]);
        let h = self.cfg.physical.waveguide_height_m;
        for &len in lengths {
            let dep = Deployment::Rectangle {
                center: Point3::default(),
                side_x_m: len,
                side_y_m: side,
            };
            let conv = self.sweep(dep.clone(), Scheme::Conventional, 0.0)?;
            let pin = self.sweep(dep, Scheme::Pinching1, 0.0)?;
            push_metric(&mut t, "conventional-sim", &conv, "sum_rate", &[side, len]);
            push_metric(&mut t, "pinching-1-sim", &pin, "sum_rate", &[side, len]);
            if analytical {
                // The pinching rate depends only on the offset across the waveguide.
                self.push_analytical(&mut t, "pinching-1-analytical", side, &[side, len], |g| {
                    pinching_ergodic(side, h, g)
                })?;
            }
        }
        Ok(plain(t))
    }

    fn push_analytical(
        &self,
        t: &mut ResultTable,
        scheme: &str,
        side: f64,
        extras: &[f64],
        rate: impl Fn(f64) -> f64,
    ) -> Result<()> {
        for p in self.cfg.sweep() {
            let op = SnrOperatingPoint::new(p, self.cfg.physical, 1, side)?;
            t.push(Row {
                scheme: scheme.into(),
                power_dbm: p,
                mean_rate: rate(op.gamma()),
                stderr: 0.0,
                n_trials: 0,
                extras: extras.to_vec(),
            });
        }
        Ok(())
    }

    fn fig6(&self, side: f64, counts: &[usize], overhang: f64) -> Result<FigureOutput> {
        let mut t = ResultTable::new(&["num_antennas"]);
        let dep = Deployment::square(side);
        for &n in counts {
            let r = self.sweep(dep.clone(), Scheme::PinchingNOma { num_antennas: n }, overhang)?;
            let x = [n as f64];
            push_metric(&mut t, "pinching-n-oma", &r, "sum_rate", &x);
            push_metric(&mut t, "aligned-bound", &r, "aligned_bound", &x);
            push_metric(&mut t, "clustered-bound", &r, "clustered_bound", &x);
        }
        let conv = self.sweep(dep, Scheme::Conventional, 0.0)?;
        push_metric(&mut t, "conventional", &conv, "sum_rate", &[1.0]);
        Ok(plain(t))
    }

    fn fig7(&self, f: &crate::config::Fig7) -> Result<FigureOutput> {
        let mut t = ResultTable::new(&["num_users"]);
        for &m in &f.user_counts {
            let dep = noma_areas(m, f.area_spacing_m, f.strong_center_x_m, f.side_m)?;
            let r = self.sweep(dep, Scheme::Noma { alphas: None }, f.waveguide_overhang_m)?;
            let x = [m as f64];
            push_metric(&mut t, "noma", &r, "sum_rate", &x);
            push_metric(&mut t, "oma", &r, "oma_sum_rate", &x);
            push_metric(&mut t, "single", &r, "single_sum_rate", &x);
            push_metric(&mut t, "conventional", &r, "conventional_sum_rate", &x);
        }
        Ok(plain(t))
    }

    fn fig8(&self, f: &crate::config::Fig8) -> Result<FigureOutput> {
        let mut t = ResultTable::new(&["user"]);
        let dep = noma_areas(2, f.area_spacing_m, f.strong_center_x_m, f.side_m)?;
        let r = self.sweep(dep, Scheme::Noma { alphas: None }, f.waveguide_overhang_m)?;
        push_metric(&mut t, "noma", &r, "rate_1", &[1.0]);
        push_metric(&mut t, "noma", &r, "rate_2", &[2.0]);
        push_metric(&mut t, "single", &r, "single_rate_1", &[1.0]);
        push_metric(&mut t, "single", &r, "single_rate_2", &[2.0]);
        let alloc = crate::array::build_noma_coefficients(2)?;
        let a = alloc.alphas();
        let ceiling = (1.0 + a[0] / a[1]).log2();
        for p in self.cfg.sweep() {
            t.push(Row {
                scheme: "weak-ceiling".into(),
                power_dbm: p,
                mean_rate: ceiling,
                stderr: 0.0,
                n_trials: 0,
                extras: vec![1.0],
            });
        }
        Ok(plain(t))
    }

    fn gap(&self, f: &crate::config::Gap) -> Result<FigureOutput> {
        let mut t = ResultTable::new(&["d1_m", "d2_m"]);
        for &d1 in &f.d1_m {
            let dep = Deployment::noma_pair(Point3::new(d1, d1, 0.0), Point3::new(-f.d2_m, 0.0, 0.0), f.side_m);
            let r = self.sweep(dep, Scheme::Noma { alphas: None }, f.waveguide_overhang_m)?;
            let x = [d1, f.d2_m];
            push_metric(&mut t, "gap-sim", &r, "gap", &x);
            push_metric(&mut t, "gap-analytical", &r, "gap_highsnr", &x);
        }
        Ok(plain(t))
    }

    fn fig9(&self, side: f64, local: &SearchDomain, full: Option<&SearchDomain>) -> Result<FigureOutput> {
        let mut t = ResultTable::new(&["min_rate"]);
        let dep = Deployment::SplitSquare {
            center: Point3::default(),
            side_m: side,
        };
        let add = |t: &mut ResultTable, name: &str, scheme: Scheme| -> Result<()> {
            let r = self.sweep(dep.clone(), scheme, 0.0)?;
            let k = r.metric_index("min_rate").expect("miso metric");
            for (i, &p) in r.powers_dbm.iter().enumerate() {
                let s = r.stats[i][0];
                t.push(Row {
                    scheme: name.into(),
                    power_dbm: p,
                    mean_rate: s.mean,
                    stderr: s.stderr,
                    n_trials: s.n,
                    extras: vec![r.stats[i][k].mean],
                });
            }
            Ok(())
        };
        for (prefix, antennas) in [("conventional", MisoAntennas::Conventional), ("pinching", MisoAntennas::Closest)] {
            add(&mut t, &format!("{prefix}-mrc"), Scheme::MisoMrc { antennas })?;
            add(&mut t, &format!("{prefix}-zf"), Scheme::MisoZf { antennas })?;
            add(&mut t, &format!("{prefix}-bound"), Scheme::MisoBound { antennas })?;
        }
        add(&mut t, "search-local", Scheme::MisoSearch { domain: *local })?;
        if let Some(domain) = full {
            add(&mut t, "search-full", Scheme::MisoSearch { domain: *domain })?;
        }
        Ok(plain(t))
    }

    /// Users of realization `r`, both dropped in the square, and the scenario
    /// with antennas at their closest waveguide points.
    fn square_realization(&self, side: f64, power_dbm: f64, r: u64) -> Result<MisoScenario> {
        let c = self.consts()?;
        let dep = Deployment::square(side);
        let mut rng = trial_rng(self.cfg.seed, r);
        let users = [sample_user(&dep, 0, &mut rng)?, sample_user(&dep, 0, &mut rng)?];
        let h = self.cfg.physical.waveguide_height_m;
        let wgs = [
            Waveguide::new(side / 3.0, h, -side / 2.0, side / 2.0)?,
            Waveguide::new(-side / 3.0, h, -side / 2.0, side / 2.0)?,
        ];
        MisoScenario::at_closest_points(users, wgs, dbm_to_watts(power_dbm) / c.noise_power_w)
    }

    fn fig10(&self, f: &crate::config::Fig10) -> Result<FigureOutput> {
        let c = self.consts()?;
        let s = self.square_realization(f.side_m, f.power_dbm, f.realization)?;
        let wgs = s.waveguides.expect("pinching scenario");
        let lam = c.wavelength;
        let g1 = window_grid(s.antennas[0].x, f.half_width_wavelengths * lam, f.step_wavelengths * lam, &wgs[0]);
        let g2 = window_grid(s.antennas[1].x, f.half_width_wavelengths * lam, f.step_wavelengths * lam, &wgs[1]);
        let mut t = ResultTable::new(&["delta1_m", "delta2_m", "sinr_min"]);
        for &x1 in &g1 {
            for &x2 in &g2 {
                let cell = s.with_antenna_x(x1, x2)?;
                let h = channel_matrix(&cell, &c);
                // Collinear channels leave zero-forcing nothing to work with.
                let v = zf_beamformer(&h).map(|p| sinr(&h, &p, s.rho)).unwrap_or([0.0, 0.0]);
                let min = v[0].min(v[1]);
                t.push(Row {
                    scheme: "zf".into(),
                    power_dbm: f.power_dbm,
                    mean_rate: rate_from_sinr(min),
                    stderr: 0.0,
                    n_trials: 1,
                    extras: vec![x1 - s.antennas[0].x, x2 - s.antennas[1].x, min],
                });
            }
        }
        Ok(plain(t))
    }

    fn table1(&self, f: &crate::config::Table1) -> Result<FigureOutput> {
        let c = self.consts()?;
        let n = self.cfg.trials();
        let lam = c.wavelength;
        let (half, step) = match f.search {
            SearchDomain::Local {
                half_width_wavelengths,
                step_wavelengths,
            } => (half_width_wavelengths * lam, step_wavelengths * lam),
            SearchDomain::Full { .. } => {
                return Err(Error::Config("at `figure.search`: table1 uses a local search window".into()))
            }
        };
        let one = |r: u64| -> Result<[[f64; 2]; 5]> {
            let s = self.square_realization(f.side_m, f.power_dbm, r)?;
            let wgs = s.waveguides.expect("pinching scenario");
            let h = channel_matrix(&s, &c);
            let g1 = window_grid(s.antennas[0].x, half, step, &wgs[0]);
            let g2 = window_grid(s.antennas[1].x, half, step, &wgs[1]);
            let found = algorithm1_search(&s, &g1, &g2, &c)?;
            let moved = channel_matrix(&found.scenario, &c);
            Ok([
                sinr(&h, &mrc_beamformer(&h)?, s.rho),
                sinr(&h, &zf_beamformer(&h)?, s.rho),
                found.sinr,
                sinr_upper_bound(&h, s.rho),
                sinr_upper_bound(&moved, s.rho),
            ])
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(crate::harness::resolve_workers(self.workers))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        let all: Vec<Result<[[f64; 2]; 5]>> = pool.install(|| (0..n).into_par_iter().map(one).collect());

        let modes = ["mrc", "zf", "proposed", "bound", "bound-at-proposed"];
        let mut t = ResultTable::new(&["realization", "r1", "r2", "r_min"]);
        let mut violations = Vec::new();
        for (r, res) in all.into_iter().enumerate() {
            let sinrs = res?;
            let mut mins = [0.0; 5];
            for (k, v) in sinrs.iter().enumerate() {
                let (r1, r2) = (rate_from_sinr(v[0]), rate_from_sinr(v[1]));
                mins[k] = r1.min(r2);
                t.push(Row {
                    scheme: modes[k].into(),
                    power_dbm: f.power_dbm,
                    mean_rate: r1 + r2,
                    stderr: 0.0,
                    n_trials: 1,
                    extras: vec![r as f64, r1, r2, mins[k]],
                });
            }
            for (lo, hi) in [(0, 1), (1, 2), (2, 3)] {
                if mins[lo] > mins[hi] + ORDERING_TOL {
                    violations.push(format!(
                        "realization {r}: {} min rate {} exceeds {} min rate {}",
                        modes[lo], mins[lo], modes[hi], mins[hi]
                    ));
                }
            }
        }
        Ok(FigureOutput { table: t, violations })
    }
}

/// NOMA areas listed weakest first: A_m at ((M - m) s, (M - m) s, 0) for
/// m < M and A_M at (strong_x, 0, 0).
pub fn noma_areas(m: usize, spacing: f64, strong_x: f64, side: f64) -> Result<Deployment> {
    if m == 0 {
        return Err(Error::Config("NOMA needs at least one user".into()));
    }
    let mut centers: Vec<Point3> = (1..m)
        .map(|i| {
            let off = (m - i) as f64 * spacing;
            Point3::new(off, off, 0.0)
        })
        .collect();
    centers.push(Point3::new(strong_x, 0.0, 0.0));
    Ok(Deployment::NomaAreas { centers, side_m: side })
}

fn plain(table: ResultTable) -> FigureOutput {
    FigureOutput {
        table,
        violations: Vec::new(),
    }
}

fn push_metric(t: &mut ResultTable, scheme: &str, r: &SweepResult, metric: &str, extras: &[f64]) {
    let k = r.metric_index(metric).expect("metric produced by the scheme");
    for (i, &p) in r.powers_dbm.iter().enumerate() {
        let s = r.stats[i][k];
        t.push(Row {
            scheme: scheme.into(),
            power_dbm: p,
            mean_rate: s.mean,
            stderr: s.stderr,
            n_trials: s.n,
            extras: extras.to_vec(),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Fig10, Fig4, Fig6, Gap, Table1};

    fn small(figure: FigureConfig, trials: u64) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::for_figure(figure);
        cfg.trials = Some(trials);
        cfg.sweep_dbm = Some(vec![10.0, 40.0]);
        cfg
    }

    #[test]
    fn fig4_rows_and_ordering() {
        let cfg = small(FigureConfig::Fig4(Fig4::default()), 2000);
        let out = run_figure(&cfg, Some(2)).unwrap();
        assert_eq!(out.table.rows.len(), 3 * 5 * 2);
        for side in [10.0, 20.0, 30.0] {
            let get = |name: &str| {
                out.table
                    .rows_for(name)
                    .filter(|r| r.extras[0] == side)
                    .map(|r| r.mean_rate)
                    .collect::<Vec<_>>()
            };
            let (sim, ana, conv) = (get("pinching-1-sim"), get("pinching-1-analytical"), get("conventional-sim"));
            for i in 0..2 {
                assert!((sim[i] - ana[i]).abs() < 0.05 * ana[i].max(0.1), "{side} {sim:?} {ana:?}");
                assert!(sim[i] > conv[i]);
            }
        }
    }

    #[test]
    fn fig6_more_antennas_help() {
        let mut f = Fig6::default();
        f.antenna_counts = vec![1, 4];
        let cfg = small(FigureConfig::Fig6(f), 300);
        let out = run_figure(&cfg, None).unwrap();
        let rate = |n: f64| {
            out.table
                .rows_for("pinching-n-oma")
                .find(|r| r.extras[0] == n && r.power_dbm == 40.0)
                .unwrap()
                .mean_rate
        };
        assert!((rate(4.0) - rate(1.0) - 2.0).abs() < 0.1);
    }

    #[test]
    fn gap_rows_track_closed_form() {
        let mut f = Gap::default();
        f.d1_m = vec![20.0];
        let mut cfg = small(FigureConfig::Gap(f), 500);
        cfg.sweep_dbm = Some(vec![50.0]);
        let out = run_figure(&cfg, None).unwrap();
        let sim = out.table.rows_for("gap-sim").next().unwrap().mean_rate;
        let ana = out.table.rows_for("gap-analytical").next().unwrap().mean_rate;
        assert!((sim - ana).abs() < 0.05, "{sim} {ana}");
    }

    #[test]
    fn fig10_grid_is_centred_on_closest_points() {
        let mut f = Fig10::default();
        f.half_width_wavelengths = 1.0;
        let cfg = small(FigureConfig::Fig10(f), 1);
        let out = run_figure(&cfg, None).unwrap();
        assert_eq!(out.table.rows.len(), 25);
        let mid = &out.table.rows[12];
        assert!(mid.extras[0].abs() < 1e-12 && mid.extras[1].abs() < 1e-12);
    }

    #[test]
    fn table1_modes_per_realization() {
        let mut f = Table1::default();
        f.realizations = 3;
        f.search = SearchDomain::Local {
            half_width_wavelengths: 1.0,
            step_wavelengths: 0.25,
        };
        let cfg = ScenarioConfig::for_figure(FigureConfig::Table1(f));
        let out = run_figure(&cfg, None).unwrap();
        assert_eq!(out.table.rows.len(), 15);
        for r in 0..3 {
            let m = |mode: &str| {
                out.table
                    .rows_for(mode)
                    .find(|row| row.extras[0] == r as f64)
                    .unwrap()
                    .extras[3]
            };
            assert!(m("mrc") <= m("zf") + ORDERING_TOL);
            assert!(m("zf") <= m("proposed") + ORDERING_TOL);
            assert!(m("proposed") <= m("bound-at-proposed") + ORDERING_TOL);
        }
    }

    #[test]
    fn noma_area_layout() {
        let d = noma_areas(3, 20.0, -10.0, 2.0).unwrap();
        match d {
            Deployment::NomaAreas { centers, .. } => {
                assert_eq!(centers[0], Point3::new(40.0, 40.0, 0.0));
                assert_eq!(centers[1], Point3::new(20.0, 20.0, 0.0));
                assert_eq!(centers[2], Point3::new(-10.0, 0.0, 0.0));
            }
            other => panic!("{other:?}"),
        }
    }
}
