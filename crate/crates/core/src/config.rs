//! Run configuration: strict JSON schema with defaults for the reference apparatus.
//!
//! Lengths are meters (`*_m` keys) and wavelengths nanometers (`*_nm` keys);
//! both are converted once here.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{
    default_betas, Efficiencies, NetworkSpec, NoiseModel, PipelineConfig, SpectralParams,
};
use crate::network::{Geometry, NetworkElement, SourceParams, WRatios};
use crate::tomography::PHASE_SETTINGS;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable consulted for the seed when a config does not set one.
pub const SEED_ENV: &str = "WSTATE_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    pub pair_probability: f64,
    pub beta_phase_rad: f64,
    pub max_pairs: u8,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            pair_probability: 0.02,
            beta_phase_rad: 0.0,
            max_pairs: 2,
        }
    }
}

/// Either three reflectances for the standard topology or an explicit element list.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reflectances: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<NetworkElement>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub l_j_m: f64,
    pub l_jp_m: f64,
    pub l_k_m: f64,
    pub l_l_m: f64,
    pub l_m_m: f64,
    pub l_n_m: f64,
    pub l_r_m: f64,
    pub l_b_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    pub lambda_b_nm: f64,
    pub lambda_r_nm: f64,
    pub bandwidth_b_nm: f64,
    pub bandwidth_r_nm: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        let s = SpectralParams::default();
        SpectralConfig {
            lambda_b_nm: s.lambda_b_nm,
            lambda_r_nm: s.lambda_r_nm,
            bandwidth_b_nm: s.bandwidth_b_nm,
            bandwidth_r_nm: s.bandwidth_r_nm,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub accidental_floor: f64,
    pub car_target: Option<f64>,
    pub phase_jitter_rad: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EfficiencyConfig {
    pub blue: f64,
    pub red: f64,
}

impl Default for EfficiencyConfig {
    fn default() -> Self {
        EfficiencyConfig { blue: 1.0, red: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerScanConfig {
    pub betas: Vec<f64>,
    /// Count budget at the largest β; `null` fits analytic probabilities.
    pub shots: Option<u64>,
}

impl Default for PowerScanConfig {
    fn default() -> Self {
        PowerScanConfig {
            betas: default_betas(),
            shots: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub report: Option<String>,
    pub plot_dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub source: SourceConfig,
    pub network: NetworkConfig,
    pub geometry: GeometryConfig,
    pub spectral: SpectralConfig,
    pub noise: NoiseConfig,
    pub efficiency: EfficiencyConfig,
    /// Coincidences per setting; `null` uses expected probabilities.
    pub shots: Option<u64>,
    pub phase_settings: Vec<[f64; 2]>,
    pub forced_zero_tol: f64,
    pub power_scan: PowerScanConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: None,
            source: SourceConfig::default(),
            network: NetworkConfig::default(),
            geometry: GeometryConfig::default(),
            spectral: SpectralConfig::default(),
            noise: NoiseConfig::default(),
            efficiency: EfficiencyConfig::default(),
            shots: None,
            phase_settings: PHASE_SETTINGS.iter().map(|&(r, b)| [r, b]).collect(),
            forced_zero_tol: crate::detection::NOISY_ZERO_TOL,
            power_scan: PowerScanConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

impl RunConfig {
    /// Parses and validates; errors name the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." { "config".to_string() } else { path };
            config_err(&key, e.into_inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        crate::report::to_sorted_json(self).expect("config serializes")
    }

    pub fn spectral(&self) -> SpectralParams {
        SpectralParams {
            lambda_b_nm: self.spectral.lambda_b_nm,
            lambda_r_nm: self.spectral.lambda_r_nm,
            bandwidth_b_nm: self.spectral.bandwidth_b_nm,
            bandwidth_r_nm: self.spectral.bandwidth_r_nm,
        }
    }

    pub fn geometry(&self) -> Geometry {
        let g = &self.geometry;
        let k = self.spectral().wavevectors();
        Geometry {
            l_j: g.l_j_m,
            l_jp: g.l_jp_m,
            l_k: g.l_k_m,
            l_l: g.l_l_m,
            l_m: g.l_m_m,
            l_n: g.l_n_m,
            l_r: g.l_r_m,
            l_b: g.l_b_m,
            ..Geometry::zero(k)
        }
    }

    pub fn source(&self) -> SourceParams {
        let beta = Complex64::from_polar(self.source.pair_probability.sqrt(), self.source.beta_phase_rad);
        SourceParams {
            beta,
            max_pairs: self.source.max_pairs,
        }
    }

    pub fn network(&self) -> NetworkSpec {
        match (&self.network.reflectances, &self.network.elements) {
            (_, Some(els)) => NetworkSpec::Elements(els.clone()),
            (Some([a, b, c]), None) => NetworkSpec::Ratios(WRatios { bs1: *a, bs2: *b, bs3: *c }),
            (None, None) => NetworkSpec::Ratios(WRatios::exact()),
        }
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            accidental_floor: self.noise.accidental_floor,
            car_target: self.noise.car_target,
            phase_jitter_rad: self.noise.phase_jitter_rad,
        }
    }

    pub fn efficiency(&self) -> Efficiencies {
        Efficiencies {
            blue: self.efficiency.blue,
            red: self.efficiency.red,
        }
    }

    /// The config's seed, else `default_seed`.
    pub fn resolved_seed(&self, default_seed: u64) -> u64 {
        self.seed.unwrap_or(default_seed)
    }

    pub fn pipeline(&self, default_seed: u64) -> PipelineConfig {
        PipelineConfig {
            source: self.source(),
            network: self.network(),
            geometry: self.geometry(),
            noise: self.noise(),
            shots: self.shots,
            phase_settings: self.phase_settings.iter().map(|p| (p[0], p[1])).collect(),
            seed: self.resolved_seed(default_seed),
            forced_zero_tol: self.forced_zero_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let p = self.source.pair_probability;
        if !(0.0..crate::network::MAX_PAIR_PROBABILITY).contains(&p) {
            return Err(config_err("source.pair_probability", format!("{p} outside [0, 0.2)")));
        }
        if self.source.max_pairs > 2 {
            return Err(config_err("source.max_pairs", "at most 2"));
        }
        if self.network.reflectances.is_some() && self.network.elements.is_some() {
            return Err(config_err("network", "give either reflectances or elements, not both"));
        }
        if let Some(r) = &self.network.reflectances {
            for (i, v) in r.iter().enumerate() {
                if !(0.0..=1.0).contains(v) {
                    return Err(config_err(&format!("network.reflectances[{i}]"), format!("reflectance {v} outside [0, 1]")));
                }
            }
        }
        if let Some(els) = &self.network.elements {
            for (i, el) in els.iter().enumerate() {
                if let NetworkElement::Beamsplitter { reflectance, .. } = el {
                    if !(0.0..=1.0).contains(reflectance) {
                        return Err(config_err(
                            &format!("network.elements[{i}].reflectance"),
                            format!("reflectance {reflectance} outside [0, 1]"),
                        ));
                    }
                }
            }
        }
        let g = &self.geometry;
        for (key, v) in [
            ("l_j_m", g.l_j_m),
            ("l_jp_m", g.l_jp_m),
            ("l_k_m", g.l_k_m),
            ("l_l_m", g.l_l_m),
            ("l_m_m", g.l_m_m),
            ("l_n_m", g.l_n_m),
            ("l_r_m", g.l_r_m),
            ("l_b_m", g.l_b_m),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_err(&format!("geometry.{key}"), format!("length {v} must be finite and >= 0")));
            }
        }
        self.spectral().validate().map_err(|e| config_err("spectral", e))?;
        if self.spectral.lambda_b_nm == self.spectral.lambda_r_nm {
            return Err(config_err("spectral", "blue and red wavelengths coincide"));
        }
        self.noise().validate().map_err(|e| config_err("noise", e))?;
        self.efficiency().validate().map_err(|e| config_err("efficiency", e))?;
        if self.shots == Some(0) {
            return Err(config_err("shots", "must be > 0 or null"));
        }
        if !(self.forced_zero_tol >= 0.0) {
            return Err(config_err("forced_zero_tol", "must be >= 0"));
        }
        if self.power_scan.shots == Some(0) {
            return Err(config_err("power_scan.shots", "must be > 0 or null"));
        }
        for (i, b) in self.power_scan.betas.iter().enumerate() {
            if !(*b > 0.0 && b * b < crate::network::MAX_PAIR_PROBABILITY) {
                return Err(config_err(&format!("power_scan.betas[{i}]"), format!("beta {b} outside (0, sqrt(0.2))")));
            }
        }
        for (i, p) in self.phase_settings.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(config_err(&format!("phase_settings[{i}]"), "phases must be finite"));
            }
        }
        Ok(())
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_json(r#"{"seed": 5}"#).unwrap();
        assert_eq!(cfg.seed, Some(5));
        match cfg.network() {
            NetworkSpec::Ratios(r) => {
                assert_eq!(r.bs1, 0.25);
                assert_eq!(r.bs2, 1.0 / 3.0);
                assert_eq!(r.bs3, 0.5);
            }
            other => panic!("unexpected network {other:?}"),
        }
        assert_eq!(cfg.spectral.lambda_b_nm, 694.0);
        assert_eq!(cfg.spectral.bandwidth_r_nm, 4.3);
        assert!((cfg.source().pair_probability() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn reflectance_out_of_range_names_key() {
        let err = RunConfig::from_json(r#"{"network": {"reflectances": [1.5, 0.33, 0.5]}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("reflectance"), "{msg}");
        assert!(msg.contains("network.reflectances[0]"), "{msg}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = RunConfig::from_json(r#"{"polarization": "H"}"#).unwrap_err();
        assert!(err.to_string().contains("polarization"), "{err}");
        let nested = RunConfig::from_json(r#"{"noise": {"polarization": 1}}"#).unwrap_err();
        assert!(nested.to_string().contains("polarization"), "{nested}");
    }

    #[test]
    fn wrong_type_names_key_and_type() {
        let err = RunConfig::from_json(r#"{"source": {"pair_probability": "high"}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("source.pair_probability"), "{msg}");
        assert!(msg.contains("f64"), "{msg}");
    }

    #[test]
    fn emitted_config_parses_back() {
        let mut cfg = RunConfig::from_json(r#"{"seed": 11, "shots": 1000, "noise": {"car_target": 30}}"#).unwrap();
        cfg.geometry.l_m_m = 1.25e-6;
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
