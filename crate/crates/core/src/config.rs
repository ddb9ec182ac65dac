//! Scenario configuration files.
//!
//! A scenario is a TOML document with one table per element plus the forcing
//! specification. Frequencies are given in Hz here and converted to rad/s
//! exactly once, in [`ScenarioConfig::scenario`]. Angles are in radians,
//! times in seconds, everything else per-unit.
//!
//! ```toml
//! [forcing]
//! frequency_hz = 0.5
//! amp_r = 0.01
//! amp_i = 0.01
//! phase_r = 0.6283185307179586
//! phase_i = 0.0
//! v_r0 = 1.0
//! v_i0 = 0.0
//! duration = 80.0        # forced span after onset
//! # step, ramp, pre_window are optional
//!
//! [generator]
//! e_prime = 1.1
//! xd_prime = 0.3
//! inertia = 4.0
//! damping = 10.0
//! p_gen = 0.5
//!
//! [impedance]            # or resistance/reactance
//! conductance = 1.0
//! susceptance = -0.5
//!
//! [power_load]
//! p = 0.8
//! q = 0.2
//!
//! [output]               # optional
//! timeseries = "test1.csv"
//!
//! [window]               # optional; default is the second half of the run
//! periods = 20
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::def::{DefOptions, DEFAULT_PRE_WINDOW};
use crate::element::{ImpedanceLoad, MachineParams};
use crate::hz_to_rad;
use crate::sim::{default_step, ForcingSpec, PowerSetpoint, Scenario};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    pub frequency_hz: f64,
    pub amp_r: f64,
    pub amp_i: f64,
    pub phase_r: f64,
    pub phase_i: f64,
    pub v_r0: f64,
    pub v_i0: f64,
    pub duration: f64,
    pub step: Option<f64>,
    pub ramp: Option<f64>,
    pub pre_window: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub e_prime: f64,
    pub xd_prime: f64,
    pub inertia: f64,
    pub damping: f64,
    pub p_gen: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ImpedanceSection {
    pub conductance: Option<f64>,
    pub susceptance: Option<f64>,
    pub resistance: Option<f64>,
    pub reactance: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PowerLoadSection {
    pub p: f64,
    pub q: f64,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub timeseries: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    /// Averaging window in whole forcing periods.
    pub periods: Option<u32>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub forcing: ForcingSection,
    pub generator: GeneratorSection,
    pub impedance: ImpedanceSection,
    pub power_load: PowerLoadSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub window: WindowSection,
}

impl std::str::FromStr for ScenarioConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse().map_err(|e| match e {
            ConfigError::Parse(msg) => ConfigError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn impedance_load(&self) -> Result<ImpedanceLoad, ConfigError> {
        let z = &self.impedance;
        match (z.conductance, z.susceptance, z.resistance, z.reactance) {
            (Some(g), Some(b), None, None) => Ok(ImpedanceLoad::new(g, b)),
            (None, None, Some(r), Some(x)) => {
                ImpedanceLoad::from_impedance(r, x).map_err(|e| ConfigError::Invalid(e.to_string()))
            }
            _ => Err(ConfigError::Invalid(
                "[impedance] needs either conductance+susceptance or resistance+reactance".into(),
            )),
        }
    }

    /// Builds and validates the simulation scenario.
    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let f = &self.forcing;
        if !(f.frequency_hz > 0.0) || !f.frequency_hz.is_finite() {
            return Err(ConfigError::Invalid(format!(
                "forcing.frequency_hz must be positive, got {}",
                f.frequency_hz
            )));
        }
        let omega = hz_to_rad(f.frequency_hz);
        let period = 1.0 / f.frequency_hz;
        let forcing = ForcingSpec {
            omega,
            amp_r: f.amp_r,
            amp_i: f.amp_i,
            theta_r: f.phase_r,
            theta_i: f.phase_i,
            v_r0: f.v_r0,
            v_i0: f.v_i0,
            duration: f.duration,
            step: f.step.unwrap_or_else(|| default_step(omega)),
            ramp: f.ramp.unwrap_or(2.0 * period),
            pre_window: f.pre_window.unwrap_or(DEFAULT_PRE_WINDOW),
        };
        let g = &self.generator;
        let scenario = Scenario {
            forcing,
            machine: MachineParams {
                e_prime: g.e_prime,
                xd_prime: g.xd_prime,
                inertia_m: g.inertia,
                damping: g.damping,
            },
            p_gen: g.p_gen,
            impedance: self.impedance_load()?,
            power_load: PowerSetpoint {
                p: self.power_load.p,
                q: self.power_load.q,
            },
        };
        let invalid = |e: crate::Error| ConfigError::Invalid(e.to_string());
        forcing.validate().map_err(invalid)?;
        scenario.generator_equilibrium().map_err(invalid)?;
        scenario.power_operating_point().map_err(invalid)?;
        Ok(scenario)
    }

    /// DEF options for traces of this scenario.
    pub fn def_options(&self, scenario: &Scenario) -> DefOptions {
        let period = scenario.forcing.period();
        DefOptions {
            pre_window: scenario.forcing.pre_window,
            period: Some(period),
            window: self.window.periods.map(|n| n as f64 * period),
        }
    }
}
