//! JSON scenario configuration. Every field has a default taken from the
//! reference scenario, so an empty `figure` section runs the standard setup.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::SearchDomain;
use crate::params::PhysicalParams;

pub const SCHEMA_VERSION: u32 = 1;

/// Name of the only supported generator: ChaCha8, keyed by the seed, one
/// stream per trial.
pub const RNG_NAME: &str = "chacha8";

fn default_seed() -> u64 {
    1
}

fn default_rng() -> String {
    RNG_NAME.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default = "default_rng")]
    pub rng: String,
    #[serde(default)]
    pub physical: PhysicalParams,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Monte Carlo trials; the figure's default when absent.
    #[serde(default)]
    pub trials: Option<u64>,
    /// Transmit powers in dBm; 0 to 50 in 5 dB steps when absent.
    #[serde(default)]
    pub sweep_dbm: Option<Vec<f64>>,
    #[serde(default)]
    pub output: Option<String>,
    pub figure: FigureConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FigureConfig {
    Fig4(Fig4),
    Fig5(Fig5),
    Fig6(Fig6),
    Fig7(Fig7),
    Fig8(Fig8),
    Gap(Gap),
    Fig9(Fig9),
    Fig10(Fig10),
    Table1(Table1),
}

/// Single pinching antenna vs a fixed antenna, users in a D x D square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig4 {
    pub sides_m: Vec<f64>,
    pub analytical: bool,
}

impl Default for Fig4 {
    fn default() -> Self {
        Self {
            sides_m: vec![10.0, 20.0, 30.0],
            analytical: true,
        }
    }
}

/// Users in a rectangle: `side_m` across the waveguide, `lengths_m` along it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig5 {
    pub side_m: f64,
    pub lengths_m: Vec<f64>,
    pub analytical: bool,
}

impl Default for Fig5 {
    fn default() -> Self {
        Self {
            side_m: 10.0,
            lengths_m: vec![10.0, 20.0, 40.0],
            analytical: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig6 {
    pub side_m: f64,
    pub antenna_counts: Vec<usize>,
    pub waveguide_overhang_m: f64,
}

impl Default for Fig6 {
    fn default() -> Self {
        Self {
            side_m: 10.0,
            antenna_counts: vec![1, 2, 4, 8],
            waveguide_overhang_m: 0.5,
        }
    }
}

/// NOMA areas: A_M centred at (strong_center_x_m, 0, 0), A_m for m < M at
/// ((M - m) s, (M - m) s, 0) with s = `area_spacing_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig7 {
    pub user_counts: Vec<usize>,
    pub side_m: f64,
    pub area_spacing_m: f64,
    pub strong_center_x_m: f64,
    pub waveguide_overhang_m: f64,
}

impl Default for Fig7 {
    fn default() -> Self {
        Self {
            user_counts: vec![2, 5],
            side_m: 2.0,
            area_spacing_m: 20.0,
            strong_center_x_m: -10.0,
            waveguide_overhang_m: 0.5,
        }
    }
}

/// Individual NOMA rates, two users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig8 {
    pub side_m: f64,
    pub area_spacing_m: f64,
    pub strong_center_x_m: f64,
    pub waveguide_overhang_m: f64,
}

impl Default for Fig8 {
    fn default() -> Self {
        Self {
            side_m: 2.0,
            area_spacing_m: 20.0,
            strong_center_x_m: -10.0,
            waveguide_overhang_m: 0.5,
        }
    }
}

/// NOMA minus OMA sum rate; weak area at (D1, D1, 0), strong at (-D2, 0, 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gap {
    pub d1_m: Vec<f64>,
    pub d2_m: f64,
    pub side_m: f64,
    pub waveguide_overhang_m: f64,
}

impl Default for Gap {
    fn default() -> Self {
        Self {
            d1_m: vec![10.0, 20.0, 40.0],
            d2_m: 10.0,
            side_m: 2.0,
            waveguide_overhang_m: 0.5,
        }
    }
}

/// Two waveguides at y = +-D/3; U1 in the upper strip, U2 in the lower.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig9 {
    pub side_m: f64,
    pub local_search: SearchDomain,
    /// Whole-waveguide search; slow, so off unless given.
    pub full_search: Option<SearchDomain>,
}

impl Default for Fig9 {
    fn default() -> Self {
        Self {
            side_m: 20.0,
            local_search: SearchDomain::local_default(),
            full_search: None,
        }
    }
}

/// min-SINR map over antenna offsets for one seeded realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig10 {
    pub side_m: f64,
    pub power_dbm: f64,
    pub realization: u64,
    pub half_width_wavelengths: f64,
    pub step_wavelengths: f64,
}

impl Default for Fig10 {
    fn default() -> Self {
        Self {
            side_m: 20.0,
            power_dbm: 10.0,
            realization: 0,
            half_width_wavelengths: 10.0,
            step_wavelengths: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table1 {
    pub side_m: f64,
    pub power_dbm: f64,
    pub realizations: u64,
    pub search: SearchDomain,
}

impl Default for Table1 {
    fn default() -> Self {
        Self {
            side_m: 20.0,
            power_dbm: 10.0,
            realizations: 100,
            search: SearchDomain::local_default(),
        }
    }
}

impl FigureConfig {
    pub fn name(&self) -> &'static str {
        match self {
            FigureConfig::Fig4(_) => "fig4",
            FigureConfig::Fig5(_) => "fig5",
            FigureConfig::Fig6(_) => "fig6",
            FigureConfig::Fig7(_) => "fig7",
            FigureConfig::Fig8(_) => "fig8",
            FigureConfig::Gap(_) => "gap",
            FigureConfig::Fig9(_) => "fig9",
            FigureConfig::Fig10(_) => "fig10",
            FigureConfig::Table1(_) => "table1",
        }
    }

    pub fn default_for(name: &str) -> Option<Self> {
        Some(match name {
            "fig4" => FigureConfig::Fig4(Fig4::default()),
            "fig5" => FigureConfig::Fig5(Fig5::default()),
            "fig6" => FigureConfig::Fig6(Fig6::default()),
            "fig7" => FigureConfig::Fig7(Fig7::default()),
            "fig8" => FigureConfig::Fig8(Fig8::default()),
            "gap" => FigureConfig::Gap(Gap::default()),
            "fig9" => FigureConfig::Fig9(Fig9::default()),
            "fig10" => FigureConfig::Fig10(Fig10::default()),
            "table1" => FigureConfig::Table1(Table1::default()),
            _ => return None,
        })
    }

    fn default_trials(&self) -> u64 {
        match self {
            FigureConfig::Fig6(_) => 20_000,
            FigureConfig::Fig9(_) => 1_000,
            FigureConfig::Fig10(_) => 1,
            FigureConfig::Table1(t) => t.realizations,
            _ => 100_000,
        }
    }
}

pub fn default_sweep() -> Vec<f64> {
    (0..=10).map(|i| 5.0 * i as f64).collect()
}

impl ScenarioConfig {
    /// Configuration with every default filled in for `figure`.
    pub fn for_figure(figure: FigureConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            rng: default_rng(),
            physical: PhysicalParams::default(),
            seed: default_seed(),
            trials: None,
            sweep_dbm: None,
            output: None,
            figure,
        }
        .resolved()
    }

    /// Parses JSON, reporting the key path of the first failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg.resolved())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "at `schema_version`: unsupported version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.rng != RNG_NAME {
            return Err(Error::Config(format!(
                "at `rng`: unsupported generator {:?}, expected {RNG_NAME:?}",
                self.rng
            )));
        }
        if self.trials == Some(0) {
            return Err(Error::Config("at `trials`: must be at least 1".into()));
        }
        self.physical
            .validate()
            .map_err(|e| Error::Config(format!("at `physical`: {e}")))
    }

    /// Fills optional fields with the figure defaults.
    pub fn resolved(mut self) -> Self {
        if self.trials.is_none() {
            self.trials = Some(self.figure.default_trials());
        }
        if self.sweep_dbm.is_none() {
            self.sweep_dbm = Some(default_sweep());
        }
        self
    }

    pub fn trials(&self) -> u64 {
        self.trials.unwrap_or_else(|| self.figure.default_trials())
    }

    pub fn sweep(&self) -> Vec<f64> {
        self.sweep_dbm.clone().unwrap_or_else(default_sweep)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved configuration's compact JSON.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_json().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ScenarioConfig::from_json(r#"{"schema_version": 1, "figure": {"kind": "fig4"}}"#).unwrap();
        assert_eq!(cfg.figure, FigureConfig::Fig4(Fig4::default()));
        assert_eq!(cfg.trials, Some(100_000));
        assert_eq!(cfg.sweep().len(), 11);
        assert_eq!(cfg.physical, PhysicalParams::default());
        assert_eq!(cfg, ScenarioConfig::for_figure(FigureConfig::Fig4(Fig4::default())));
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let cfg = ScenarioConfig::from_json(
            r#"{"schema_version": 1, "physical": {"noise_power_dbm": -80},
                "figure": {"kind": "fig6", "antenna_counts": [1, 3]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.physical.noise_power_dbm, -80.0);
        assert_eq!(cfg.physical.carrier_frequency_hz, 28e9);
        match cfg.figure {
            FigureConfig::Fig6(f) => {
                assert_eq!(f.antenna_counts, vec![1, 3]);
                assert_eq!(f.side_m, 10.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let err = ScenarioConfig::from_json(
            r#"{"schema_version": 1, "figure": {"kind": "fig9", "local_search": {"kind": "local", "half_width_wavelengths": 1, "step_wavelengths": 0.1, "stride": 2}}}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("figure"), "{msg}");
        assert!(msg.contains("stride"), "{msg}");
        let err = ScenarioConfig::from_json(r#"{"schema_version": 1, "physical": {"height": 3}, "figure": {"kind": "fig4"}}"#).unwrap_err();
        assert!(err.to_string().contains("physical"), "{err}");
        let err = ScenarioConfig::from_json(r#"{"schema_version": 1, "extra": 0, "figure": {"kind": "fig4"}}"#).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn version_and_generator_checked() {
        assert!(ScenarioConfig::from_json(r#"{"schema_version": 2, "figure": {"kind": "fig4"}}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"schema_version": 1, "rng": "pcg", "figure": {"kind": "fig4"}}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"schema_version": 1, "trials": 0, "figure": {"kind": "fig4"}}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"schema_version": 1, "figure": {"kind": "fig99"}}"#).is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = ScenarioConfig::for_figure(FigureConfig::default_for("gap").unwrap());
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 2;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
        let back = ScenarioConfig::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }
}
