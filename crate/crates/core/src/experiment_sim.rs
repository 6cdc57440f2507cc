//! Synthetic coincidence-count scans versus delay-stage position.
//!
//! Each stage position gets its own ChaCha8 stream: the generator is seeded
//! with `rng_seed` through `SeedableRng::seed_from_u64` and the stream id is
//! set to the point index. Counts are Poisson draws (`rand_distr::Poisson`)
//! around the expected rate times the integration time. Because every point
//! owns its stream, parallel and sequential runs give identical datasets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::coupled_mode::{coupler_coefficients, CouplerSpec, ScatteringAmplitudes};
use crate::error::{Error, Result};
use crate::fock_interference::{
    hom_coincidence_probability, modified_coincidence_probability, OverlapModel,
};

/// Largest expected count per point the simulator accepts.
pub const MAX_EXPECTED_COUNTS: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Configuration {
    /// Coincidences between the two coupler outputs (dip).
    StandardHom,
    /// Coincidences behind a 50/50 splitter on one output (peak).
    Modified,
}

/// The interfering beam splitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Splitter {
    /// Lossless, exactly balanced splitter.
    Ideal,
    Coupler(CouplerSpec),
}

impl Splitter {
    pub fn amplitudes(&self) -> Result<ScatteringAmplitudes> {
        match self {
            Splitter::Ideal => Ok(ScatteringAmplitudes::ideal_5050()),
            Splitter::Coupler(spec) => coupler_coefficients(spec),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub pair_rate_hz: f64,
    pub efficiency_arm1: f64,
    pub efficiency_arm2: f64,
    pub integration_time_s: f64,
    pub stage_positions_um: Vec<f64>,
    pub configuration: Configuration,
    pub splitter: Splitter,
    pub overlap: OverlapModel,
    /// Multiplies the overlap before it enters the interference term.
    pub visibility_cap: f64,
    /// Additive accidental/dark coincidence rate.
    pub background_rate_hz: f64,
    pub rng_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pair_rate_hz: 7000.0,
            efficiency_arm1: 0.3,
            efficiency_arm2: 0.3,
            integration_time_s: 1.0,
            stage_positions_um: linspace(-500.0, 500.0, 61),
            configuration: Configuration::StandardHom,
            splitter: Splitter::Ideal,
            overlap: OverlapModel {
                coherence_length_um: 162.6,
                center_offset_um: 0.0,
            },
            visibility_cap: 1.0,
            background_rate_hz: 0.0,
            rng_seed: 0,
        }
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let span = stop - start;
            let last = (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { stop } else { start + span * i as f64 / last })
                .collect()
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("experiment config", reason));
        if !(self.pair_rate_hz.is_finite() && self.pair_rate_hz > 0.0) {
            return bad(format!("pair_rate_hz must be > 0, got {}", self.pair_rate_hz));
        }
        for (name, eta) in [
            ("efficiency_arm1", self.efficiency_arm1),
            ("efficiency_arm2", self.efficiency_arm2),
        ] {
            if !(0.0..=1.0).contains(&eta) {
                return bad(format!("{name} must lie in [0, 1], got {eta}"));
            }
        }
        if !(self.integration_time_s.is_finite() && self.integration_time_s > 0.0) {
            return bad(format!(
                "integration_time_s must be > 0, got {}",
                self.integration_time_s
            ));
        }
        if self.stage_positions_um.is_empty() {
            return bad("stage_positions_um is empty".into());
        }
        if self.stage_positions_um.iter().any(|p| !p.is_finite()) {
            return bad("stage_positions_um contains a non-finite value".into());
        }
        if self.stage_positions_um.windows(2).any(|w| w[1] <= w[0]) {
            return bad("stage_positions_um must be strictly increasing".into());
        }
        if !(0.0..=1.0).contains(&self.visibility_cap) {
            return bad(format!(
                "visibility_cap must lie in [0, 1], got {}",
                self.visibility_cap
            ));
        }
        if !(self.background_rate_hz.is_finite() && self.background_rate_hz >= 0.0) {
            return bad(format!(
                "background_rate_hz must be >= 0, got {}",
                self.background_rate_hz
            ));
        }
        self.overlap.validate()?;
        if let Splitter::Coupler(spec) = &self.splitter {
            spec.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceRecord {
    pub stage_position_um: f64,
    pub counts: u64,
    pub integration_time_s: f64,
}

/// Expected coincidence rate (Hz) at one stage position.
pub fn expected_coincidence_rate(config: &ExperimentConfig, stage_position_um: f64) -> Result<f64> {
    config.validate()?;
    let amps = config.splitter.amplitudes()?;
    Ok(rate_with(config, &amps, stage_position_um))
}

fn rate_with(config: &ExperimentConfig, amps: &ScatteringAmplitudes, position_um: f64) -> f64 {
    let x = config
        .overlap
        .overlap(position_um)
        .scaled(config.visibility_cap)
        .expect("visibility_cap validated to [0, 1]");
    let p = match config.configuration {
        Configuration::StandardHom => hom_coincidence_probability(amps, x),
        Configuration::Modified => modified_coincidence_probability(amps, x),
    };
    config.pair_rate_hz * config.efficiency_arm1 * config.efficiency_arm2 * p
        + config.background_rate_hz
}

/// Random stream for point `index` of a run seeded with `seed`.
pub fn point_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_counts(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let poisson = Poisson::new(mean).expect("mean is positive and below the overflow limit");
    poisson.sample(rng) as u64
}

/// Simulates one scan, evaluating points in parallel.
pub fn simulate(config: &ExperimentConfig) -> Result<Vec<CoincidenceRecord>> {
    let means = expected_counts(config)?;
    Ok(means
        .par_iter()
        .enumerate()
        .map(|(i, &(pos, mean))| record(config, i, pos, mean))
        .collect())
}

/// Same dataset as [`simulate`], computed on the calling thread.
pub fn simulate_sequential(config: &ExperimentConfig) -> Result<Vec<CoincidenceRecord>> {
    let means = expected_counts(config)?;
    Ok(means
        .iter()
        .enumerate()
        .map(|(i, &(pos, mean))| record(config, i, pos, mean))
        .collect())
}

fn record(config: &ExperimentConfig, index: usize, position: f64, mean: f64) -> CoincidenceRecord {
    let mut rng = point_rng(config.rng_seed, index as u64);
    CoincidenceRecord {
        stage_position_um: position,
        counts: draw_counts(mean, &mut rng),
        integration_time_s: config.integration_time_s,
    }
}

fn expected_counts(config: &ExperimentConfig) -> Result<Vec<(f64, f64)>> {
    config.validate()?;
    let amps = config.splitter.amplitudes()?;
    config
        .stage_positions_um
        .iter()
        .map(|&pos| {
            let mean = rate_with(config, &amps, pos) * config.integration_time_s;
            if !(mean <= MAX_EXPECTED_COUNTS) {
                return Err(Error::MeanOverflow {
                    position_um: pos,
                    mean,
                });
            }
            Ok((pos, mean))
        })
        .collect()
}
