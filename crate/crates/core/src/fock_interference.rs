//! Two-photon states behind a (possibly lossy) 2x2 coupler.
//!
//! One photon enters each input port. Events in which a photon is lost are
//! discarded, leaving the unnormalised state
//! `sqrt(2) r t |2,0> + sqrt(2) r t |0,2> + (r^2 + t^2) |1,1>`.
//!
//! Partial distinguishability is described by a scalar overlap `x` in
//! `[0, 1]` that weights only the two-photon interference cross-term:
//! `x = 0` is classical routing of labelled photons, `x = 1` is the fully
//! bosonic state above.

use num_complex::Complex64;

use crate::coupled_mode::ScatteringAmplitudes;
use crate::error::{Error, Result};

/// Post-selected output amplitudes for the `|1,1>` input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhotonOutput {
    pub amp_20: Complex64,
    pub amp_02: Complex64,
    pub amp_11: Complex64,
}

impl TwoPhotonOutput {
    pub fn norm_sqr(&self) -> f64 {
        self.amp_20.norm_sqr() + self.amp_02.norm_sqr() + self.amp_11.norm_sqr()
    }

    /// Probability of both photons in the same output port, given that
    /// both survive.
    pub fn bunching_probability(&self) -> Result<f64> {
        let norm = self.checked_norm()?;
        Ok((self.amp_20.norm_sqr() + self.amp_02.norm_sqr()) / norm)
    }

    /// Probability of one photon per output port, given that both survive.
    pub fn coincidence_probability(&self) -> Result<f64> {
        let norm = self.checked_norm()?;
        Ok(self.amp_11.norm_sqr() / norm)
    }

    fn checked_norm(&self) -> Result<f64> {
        let norm = self.norm_sqr();
        if norm > 0.0 && norm.is_finite() {
            Ok(norm)
        } else {
            Err(Error::NoPostSelectedEvents)
        }
    }
}

pub fn scatter_two_photons(amps: &ScatteringAmplitudes) -> Result<TwoPhotonOutput> {
    let ScatteringAmplitudes { r, t } = *amps;
    if r == Complex64::new(0.0, 0.0) && t == Complex64::new(0.0, 0.0) {
        return Err(Error::NoPostSelectedEvents);
    }
    let bunched = std::f64::consts::SQRT_2 * r * t;
    Ok(TwoPhotonOutput {
        amp_20: bunched,
        amp_02: bunched,
        amp_11: r * r + t * t,
    })
}

/// Temporal/spectral overlap of the two photons, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Overlap(f64);

impl Overlap {
    pub const NONE: Overlap = Overlap(0.0);
    pub const FULL: Overlap = Overlap(1.0);

    pub fn new(x: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&x) {
            Ok(Overlap(x))
        } else {
            Err(Error::invalid("overlap", format!("{x} is outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Overlap reduced by a visibility factor in `[0, 1]`.
    pub fn scaled(self, visibility: f64) -> Result<Self> {
        Overlap::new(self.0 * visibility)
    }
}

/// Absolute probabilities (not post-selected) of the three two-photon
/// outcomes at overlap `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeProbabilities {
    pub both_port1: f64,
    pub both_port2: f64,
    pub coincidence: f64,
}

impl OutcomeProbabilities {
    pub fn total(&self) -> f64 {
        self.both_port1 + self.both_port2 + self.coincidence
    }
}

pub fn outcome_probabilities(amps: &ScatteringAmplitudes, x: Overlap) -> OutcomeProbabilities {
    let same = (amps.r * amps.t).norm_sqr() * (1.0 + x.value());
    OutcomeProbabilities {
        both_port1: same,
        both_port2: same,
        coincidence: hom_coincidence_probability(amps, x),
    }
}

/// Probability that the photons leave through different ports:
/// `|r|^4 + |t|^4 + 2 x Re(r^2 conj(t^2))`.
pub fn hom_coincidence_probability(amps: &ScatteringAmplitudes, x: Overlap) -> f64 {
    let ScatteringAmplitudes { r, t } = *amps;
    let (r2, t2) = (r * r, t * t);
    let cross = (r2 * t2.conj()).re;
    let p = r2.norm_sqr() + t2.norm_sqr() + 2.0 * x.value() * cross;
    // Rounding can leave -1e-17 at a perfect dip.
    p.max(0.0)
}

/// Twofold coincidence probability in the modified interferometer: both
/// photons leave through port 2, then split at a lossless 50/50 splitter.
pub fn modified_coincidence_probability(amps: &ScatteringAmplitudes, x: Overlap) -> f64 {
    0.5 * (amps.r * amps.t).norm_sqr() * (1.0 + x.value())
}

/// Gaussian overlap envelope versus delay-stage position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapModel {
    pub coherence_length_um: f64,
    pub center_offset_um: f64,
}

impl OverlapModel {
    pub fn new(coherence_length_um: f64, center_offset_um: f64) -> Result<Self> {
        let model = OverlapModel {
            coherence_length_um,
            center_offset_um,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coherence_length_um.is_finite() && self.coherence_length_um > 0.0) {
            return Err(Error::invalid(
                "overlap model",
                format!(
                    "coherence_length_um must be finite and > 0, got {}",
                    self.coherence_length_um
                ),
            ));
        }
        if !self.center_offset_um.is_finite() {
            return Err(Error::invalid("overlap model", "center_offset_um must be finite"));
        }
        Ok(())
    }

    /// `exp(-((position - center) / L_c)^2)`.
    pub fn overlap(&self, stage_position_um: f64) -> Overlap {
        let u = (stage_position_um - self.center_offset_um) / self.coherence_length_um;
        Overlap((-u * u).exp())
    }
}
