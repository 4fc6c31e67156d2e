//! Run configuration: one JSON document, frequencies in MHz, times in ns.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sqisw_core::dynamics::{
    mhz_to_rad_per_ns, NOMINAL_COUPLING_MHZ, NOMINAL_DETUNING_OFF_MHZ, NOMINAL_PI_PULSE_NS,
    NOMINAL_QUBIT_FREQ_MHZ,
};
use sqisw_core::{DeviceParams, Experiment, MeasurementModel, NoiseModel, PulseMode, Shots};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub device: DeviceConfig,
    /// `null` or absent for a noiseless device.
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    /// `null` or absent for ideal readout.
    #[serde(default)]
    pub measurement: Option<MeasurementModel>,
    #[serde(default)]
    pub shots: ShotsSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub flags: Flags,
    /// Length of one microwave pulse layer when `flags.finite_pulse` is set.
    #[serde(default = "default_pulse_ns")]
    pub pulse_ns: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            device: DeviceConfig::default(),
            noise: None,
            measurement: None,
            shots: ShotsSpec::default(),
            seed: 0,
            output: None,
            flags: Flags::default(),
            pulse_ns: default_pulse_ns(),
        }
    }
}

fn default_pulse_ns() -> f64 {
    NOMINAL_PI_PULSE_NS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    #[serde(default = "default_g")]
    pub g_mhz: f64,
    #[serde(default = "default_delta_off")]
    pub delta_off_mhz: f64,
    #[serde(default = "default_qubit_freq")]
    pub qubit_freq_mhz: f64,
}

fn default_g() -> f64 {
    NOMINAL_COUPLING_MHZ
}

fn default_delta_off() -> f64 {
    NOMINAL_DETUNING_OFF_MHZ
}

fn default_qubit_freq() -> f64 {
    NOMINAL_QUBIT_FREQ_MHZ
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            g_mhz: default_g(),
            delta_off_mhz: default_delta_off(),
            qubit_freq_mhz: default_qubit_freq(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub t1a_ns: f64,
    pub t1b_ns: f64,
    pub t2a_ns: f64,
    pub t2b_ns: f64,
    #[serde(default)]
    pub corr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    #[serde(default = "yes")]
    pub calibrate: bool,
    #[serde(default)]
    pub project_physical: bool,
    #[serde(default)]
    pub finite_pulse: bool,
}

fn yes() -> bool {
    true
}

impl Default for Flags {
    fn default() -> Self {
        Self {
            calibrate: true,
            project_physical: false,
            finite_pulse: false,
        }
    }
}

/// A positive shot count or the string "exact".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShotsSpec {
    Count(u32),
    Word(String),
}

impl Default for ShotsSpec {
    fn default() -> Self {
        ShotsSpec::Word("exact".into())
    }
}

impl ShotsSpec {
    pub fn parse(s: &str) -> Result<Self, String> {
        if s == "exact" {
            return Ok(ShotsSpec::Word(s.into()));
        }
        s.parse::<u32>()
            .map(ShotsSpec::Count)
            .map_err(|_| format!("shots must be a positive integer or \"exact\", got '{s}'"))
    }

    pub fn resolve(&self) -> Result<Shots, CliError> {
        match self {
            ShotsSpec::Count(0) => Err(CliError::config("shots must be positive")),
            ShotsSpec::Count(n) => Ok(Shots::Count(*n)),
            ShotsSpec::Word(w) if w == "exact" => Ok(Shots::Exact),
            ShotsSpec::Word(w) => Err(CliError::config(format!(
                "shots must be a count or \"exact\", got '{w}'"
            ))),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<ShotsSpec>,
    pub calibrate: Option<bool>,
    pub project_physical: bool,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(shots) = &o.shots {
            self.shots = shots.clone();
        }
        if let Some(cal) = o.calibrate {
            self.flags.calibrate = cal;
        }
        if o.project_physical {
            self.flags.project_physical = true;
        }
        if let Some(out) = &o.out {
            self.output = Some(out.clone());
        }
    }

    pub fn device(&self) -> Result<DeviceParams, CliError> {
        let d = &self.device;
        Ok(DeviceParams::new(
            mhz_to_rad_per_ns(d.g_mhz),
            mhz_to_rad_per_ns(d.delta_off_mhz),
            mhz_to_rad_per_ns(d.qubit_freq_mhz),
        )?)
    }

    pub fn noise(&self) -> Result<NoiseModel, CliError> {
        match self.noise {
            None => Ok(NoiseModel::noiseless()),
            Some(n) => Ok(NoiseModel::new(
                n.t1a_ns, n.t1b_ns, n.t2a_ns, n.t2b_ns, n.corr,
            )?),
        }
    }

    pub fn readout(&self) -> Result<MeasurementModel, CliError> {
        let m = self.measurement.unwrap_or_else(MeasurementModel::ideal);
        m.validate()?;
        Ok(m)
    }

    pub fn pulse_mode(&self) -> Result<PulseMode, CliError> {
        if !(self.pulse_ns.is_finite() && self.pulse_ns >= 0.0) {
            return Err(CliError::config(format!(
                "pulse_ns must be non-negative, got {}",
                self.pulse_ns
            )));
        }
        Ok(if self.flags.finite_pulse {
            PulseMode::Finite {
                duration: self.pulse_ns,
            }
        } else {
            PulseMode::Instantaneous
        })
    }

    /// Validates everything and builds the simulation settings.
    pub fn resolve(&self) -> Result<Experiment, CliError> {
        Ok(Experiment {
            params: self.device()?,
            noise: self.noise()?,
            readout: self.readout()?,
            shots: self.shots.resolve()?,
            seed: self.seed,
            mode: self.pulse_mode()?,
            project_physical: self.flags.project_physical,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_nominal_device_without_noise() {
        let cfg = RunConfig::from_json("{}").unwrap();
        let exp = cfg.resolve().unwrap();
        assert_eq!(exp.params.g, DeviceParams::nominal().g);
        assert!(exp.noise.is_noiseless());
        assert_eq!(exp.shots, Shots::Exact);
        assert!(cfg.flags.calibrate);
    }

    #[test]
    fn full_document_parses() {
        let text = r#"{
            "device": {"g_mhz": 11, "delta_off_mhz": 200, "qubit_freq_mhz": 5500},
            "noise": {"t1a_ns": 400, "t1b_ns": 400, "t2a_ns": 120, "t2b_ns": 120, "corr": 0.25},
            "measurement": {"f0a": 0.95, "f1a": 0.95, "f0b": 0.93, "f1b": 0.93, "xab": 0.117, "xba": 0.117},
            "shots": 1200,
            "seed": 42,
            "output": "out.json",
            "flags": {"calibrate": false, "project_physical": true, "finite_pulse": true},
            "pulse_ns": 16
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let exp = cfg.resolve().unwrap();
        assert_eq!(exp.shots, Shots::Count(1200));
        assert_eq!(exp.readout, MeasurementModel::nominal());
        assert_eq!(exp.mode, PulseMode::Finite { duration: 16.0 });
        assert_eq!(exp.noise.corr, 0.25);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"sedd": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"device": {"g": 11}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"measurement": {"f0a": 1, "f1a": 1, "f0b": 1, "f1b": 1, "xab": 0, "xba": 0, "z": 0}}"#).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_json(r#"{"shots": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"shots": "many"}"#).is_err());
        assert!(RunConfig::from_json(
            r#"{"noise": {"t1a_ns": 100, "t1b_ns": 100, "t2a_ns": 300, "t2b_ns": 100}}"#
        )
        .is_err());
        assert!(RunConfig::from_json(r#"{"device": {"g_mhz": -1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"pulse_ns": -1}"#).is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = RunConfig::from_json(r#"{"seed": 1, "shots": 10}"#).unwrap();
        cfg.apply(&Overrides {
            seed: Some(9),
            shots: Some(ShotsSpec::parse("exact").unwrap()),
            calibrate: Some(false),
            project_physical: true,
            out: None,
        });
        let exp = cfg.resolve().unwrap();
        assert_eq!((exp.seed, exp.shots), (9, Shots::Exact));
        assert!(!cfg.flags.calibrate && exp.project_physical);
    }
}
