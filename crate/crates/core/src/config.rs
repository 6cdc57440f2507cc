//! TOML run configuration.
//!
//! Every physical key carries its unit in the name. Unknown keys are
//! rejected. An annotated example lives in `configs/run.toml` at the workspace
//! root.

use serde::Deserialize;

use crate::coupled_mode::{ComplexIndex, CouplerSpec};
use crate::error::{Error, Result};
use crate::experiment_sim::{linspace, Configuration, ExperimentConfig, Splitter};
use crate::fitting::FitOptions;
use crate::fock_interference::OverlapModel;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub coupler: Option<CouplerSection>,
    pub experiment: Option<ExperimentSection>,
    pub overlap: Option<OverlapSection>,
    pub fit: Option<FitSection>,
}

/// Supermode index as `{ real, loss }` or as a literal `{ real, imag }`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub real: f64,
    pub loss: Option<f64>,
    pub imag: Option<f64>,
}

impl IndexEntry {
    pub fn to_index(&self) -> Result<ComplexIndex> {
        match (self.loss, self.imag) {
            (Some(_), Some(_)) => Err(Error::invalid(
                "config",
                "give either `loss` or `imag` for an index, not both",
            )),
            (Some(loss), None) => ComplexIndex::new(self.real, loss),
            (None, Some(imag)) => ComplexIndex::from_literal(self.real, imag),
            (None, None) => ComplexIndex::lossless(self.real),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplerSection {
    pub wavelength_um: f64,
    pub length_um: Option<f64>,
    pub n_symmetric: IndexEntry,
    pub n_antisymmetric: IndexEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfigurationName {
    Standard,
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitterName {
    Ideal,
    Coupler,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_configuration")]
    pub configuration: ConfigurationName,
    #[serde(default = "default_splitter")]
    pub splitter: SplitterName,
    #[serde(default = "default_pair_rate")]
    pub pair_rate_hz: f64,
    #[serde(default = "default_efficiency")]
    pub efficiency_arm1: f64,
    #[serde(default = "default_efficiency")]
    pub efficiency_arm2: f64,
    #[serde(default = "default_integration")]
    pub integration_time_s: f64,
    #[serde(default = "default_visibility")]
    pub visibility_cap: f64,
    #[serde(default)]
    pub background_rate_hz: f64,
    #[serde(default)]
    pub rng_seed: u64,
    pub stage_positions_um: Option<Vec<f64>>,
    pub stage_start_um: Option<f64>,
    pub stage_stop_um: Option<f64>,
    pub stage_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapSection {
    pub coherence_length_um: f64,
    #[serde(default)]
    pub center_offset_um: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub max_iterations: Option<usize>,
    pub initial_damping: Option<f64>,
    pub cost_tolerance: Option<f64>,
}

fn default_configuration() -> ConfigurationName {
    ConfigurationName::Standard
}
fn default_splitter() -> SplitterName {
    SplitterName::Ideal
}
fn default_pair_rate() -> f64 {
    7000.0
}
fn default_efficiency() -> f64 {
    0.3
}
fn default_integration() -> f64 {
    1.0
}
fn default_visibility() -> f64 {
    1.0
}

const DEFAULT_STAGE_START_UM: f64 = -500.0;
const DEFAULT_STAGE_STOP_UM: f64 = 500.0;
const DEFAULT_STAGE_POINTS: usize = 61;

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid("config", e.to_string().trim_end().to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn coupler_section(&self) -> Result<&CouplerSection> {
        self.coupler
            .as_ref()
            .ok_or_else(|| Error::invalid("config", "missing [coupler] section"))
    }

    /// `(n_symmetric, n_antisymmetric, wavelength_um)`.
    pub fn coupler_indices(&self) -> Result<(ComplexIndex, ComplexIndex, f64)> {
        let c = self.coupler_section()?;
        let n1 = c.n_symmetric.to_index()?;
        let n2 = c.n_antisymmetric.to_index()?;
        if !(c.wavelength_um.is_finite() && c.wavelength_um > 0.0) {
            return Err(Error::invalid("config", "coupler.wavelength_um must be > 0"));
        }
        Ok((n1, n2, c.wavelength_um))
    }

    pub fn coupler_spec(&self) -> Result<CouplerSpec> {
        let (n1, n2, wavelength) = self.coupler_indices()?;
        let length = self
            .coupler_section()?
            .length_um
            .ok_or_else(|| Error::invalid("config", "coupler.length_um is required here"))?;
        CouplerSpec::new(n1, n2, wavelength, length)
    }

    /// Experiment description; `seed_override` replaces the configured seed.
    pub fn experiment_config(&self, seed_override: Option<u64>) -> Result<ExperimentConfig> {
        let e = self
            .experiment
            .as_ref()
            .ok_or_else(|| Error::invalid("config", "missing [experiment] section"))?;
        let o = self
            .overlap
            .as_ref()
            .ok_or_else(|| Error::invalid("config", "missing [overlap] section"))?;
        let stage_positions_um = match (&e.stage_positions_um, e.stage_start_um, e.stage_stop_um, e.stage_points) {
            (Some(list), None, None, None) => list.clone(),
            (Some(_), ..) => {
                return Err(Error::invalid(
                    "config",
                    "stage_positions_um cannot be combined with stage_start_um/stage_stop_um/stage_points",
                ))
            }
            (None, start, stop, points) => linspace(
                start.unwrap_or(DEFAULT_STAGE_START_UM),
                stop.unwrap_or(DEFAULT_STAGE_STOP_UM),
                points.unwrap_or(DEFAULT_STAGE_POINTS),
            ),
        };
        let splitter = match e.splitter {
            SplitterName::Ideal => Splitter::Ideal,
            SplitterName::Coupler => Splitter::Coupler(self.coupler_spec()?),
        };
        let config = ExperimentConfig {
            pair_rate_hz: e.pair_rate_hz,
            efficiency_arm1: e.efficiency_arm1,
            efficiency_arm2: e.efficiency_arm2,
            integration_time_s: e.integration_time_s,
            stage_positions_um,
            configuration: match e.configuration {
                ConfigurationName::Standard => Configuration::StandardHom,
                ConfigurationName::Modified => Configuration::Modified,
            },
            splitter,
            overlap: OverlapModel::new(o.coherence_length_um, o.center_offset_um)?,
            visibility_cap: e.visibility_cap,
            background_rate_hz: e.background_rate_hz,
            rng_seed: seed_override.unwrap_or(e.rng_seed),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn fit_options(&self) -> Result<FitOptions> {
        let mut opts = FitOptions::default();
        if let Some(f) = &self.fit {
            if let Some(n) = f.max_iterations {
                opts.max_iterations = n;
            }
            if let Some(d) = f.initial_damping {
                opts.initial_damping = d;
            }
            if let Some(t) = f.cost_tolerance {
                opts.cost_tolerance = t;
            }
        }
        if opts.max_iterations == 0
            || !(opts.initial_damping > 0.0 && opts.initial_damping.is_finite())
            || !(opts.cost_tolerance >= 0.0 && opts.cost_tolerance.is_finite())
        {
            return Err(Error::invalid("config", "fit options out of range"));
        }
        Ok(opts)
    }
}
