//! Lossy directional coupler described by its two supermodes.
//!
//! Inside the coupling section light travels as a superposition of a
//! symmetric supermode (index `n1`) and an anti-symmetric supermode
//! (index `n2`). After a length `L` each supermode has picked up the
//! complex factor `e_j = exp(i Re(n_j) k0 L) exp(-loss_j k0 L)`, and the
//! bar/cross amplitudes of the coupler are
//!
//! ```text
//! r = (e1 + e2) / 2,    t = (e1 - e2) / 2.
//! ```
//!
//! Equivalently `r = f/2 (g + 1)` and `t = f/2 (g - 1)` with
//! `f = e2` and `g = e1 / e2`. When the two supermodes decay at different
//! rates the resulting 2x2 matrix is not unitary, and the post-selected
//! bunching probability drops from 1 towards the classical value 1/2.
//!
//! All lengths are in micrometres and `k0` is in rad/um.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Relative balance `||r| - |t|| / max(|r|, |t|)` accepted as a 50/50 split.
pub const BALANCE_TOLERANCE: f64 = 1e-9;

/// Effective index of a coupler supermode.
///
/// The loss part is stored as a nonnegative extinction coefficient: the
/// mode amplitude decays as `exp(-loss_part * k0 * L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexIndex {
    real_part: f64,
    loss_part: f64,
}

impl ComplexIndex {
    pub fn new(real_part: f64, loss_part: f64) -> Result<Self> {
        if !(real_part.is_finite() && real_part > 0.0) {
            return Err(Error::invalid(
                "effective index",
                format!("real part must be finite and > 0, got {real_part}"),
            ));
        }
        if !(loss_part.is_finite() && loss_part >= 0.0) {
            return Err(Error::invalid(
                "effective index",
                format!("loss part must be finite and >= 0, got {loss_part}"),
            ));
        }
        Ok(ComplexIndex {
            real_part,
            loss_part,
        })
    }

    pub fn lossless(real_part: f64) -> Result<Self> {
        Self::new(real_part, 0.0)
    }

    /// Builds an index from a literal complex value `real + i*imag`.
    ///
    /// Indices of lossy modes are commonly quoted as `n' - i n''`. Either
    /// sign of the imaginary part is read as a loss of magnitude `|imag|`;
    /// a negative literal is normalised with a warning so the caller knows
    /// the sign was dropped.
    pub fn from_literal(real_part: f64, imag_part: f64) -> Result<Self> {
        if imag_part < 0.0 {
            log::warn!(
                "effective index {real_part}{imag_part:+}i: negative imaginary part read as loss {}",
                imag_part.abs()
            );
        }
        Self::new(real_part, imag_part.abs())
    }

    pub fn real_part(&self) -> f64 {
        self.real_part
    }

    pub fn loss_part(&self) -> f64 {
        self.loss_part
    }

    /// Same real part, different loss.
    pub fn with_loss(self, loss_part: f64) -> Result<Self> {
        Self::new(self.real_part, loss_part)
    }

    /// Complex amplitude factor accumulated over `length_um` at wavenumber `k0`.
    fn propagation_factor(&self, k0: f64, length_um: f64) -> Complex64 {
        let kl = k0 * length_um;
        Complex64::from_polar((-self.loss_part * kl).exp(), self.real_part * kl)
    }
}

/// Directional coupler geometry: two supermode indices, the vacuum
/// wavelength and the coupling length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplerSpec {
    pub n_symmetric: ComplexIndex,
    pub n_antisymmetric: ComplexIndex,
    pub wavelength_um: f64,
    pub length_um: f64,
}

impl CouplerSpec {
    pub fn new(
        n_symmetric: ComplexIndex,
        n_antisymmetric: ComplexIndex,
        wavelength_um: f64,
        length_um: f64,
    ) -> Result<Self> {
        let spec = CouplerSpec {
            n_symmetric,
            n_antisymmetric,
            wavelength_um,
            length_um,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        validate_wavelength(self.wavelength_um)?;
        if !(self.length_um.is_finite() && self.length_um >= 0.0) {
            return Err(Error::invalid(
                "coupler",
                format!("length_um must be finite and >= 0, got {}", self.length_um),
            ));
        }
        // Indices may have been built field-by-field; re-check them.
        ComplexIndex::new(self.n_symmetric.real_part, self.n_symmetric.loss_part)?;
        ComplexIndex::new(self.n_antisymmetric.real_part, self.n_antisymmetric.loss_part)?;
        Ok(())
    }

    /// Vacuum wavenumber in rad/um.
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.wavelength_um
    }

    /// `Re(n1 - n2)`, which sets the beat length.
    pub fn beat_index(&self) -> f64 {
        self.n_symmetric.real_part - self.n_antisymmetric.real_part
    }

    /// `loss1 - loss2`; nonzero values make the coupler non-unitary.
    pub fn differential_loss(&self) -> f64 {
        self.n_symmetric.loss_part - self.n_antisymmetric.loss_part
    }

    /// Same coupler at another length.
    pub fn at_length(&self, length_um: f64) -> Result<Self> {
        Self::new(
            self.n_symmetric,
            self.n_antisymmetric,
            self.wavelength_um,
            length_um,
        )
    }
}

fn validate_wavelength(wavelength_um: f64) -> Result<()> {
    if !(wavelength_um.is_finite() && wavelength_um > 0.0) {
        return Err(Error::invalid(
            "coupler",
            format!("wavelength_um must be finite and > 0, got {wavelength_um}"),
        ));
    }
    Ok(())
}

/// Bar (`r`) and cross (`t`) amplitudes of a symmetric 2x2 coupler,
/// `b1† = r a1† + t a2†`, `b2† = t a1† + r a2†`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringAmplitudes {
    pub r: Complex64,
    pub t: Complex64,
}

impl ScatteringAmplitudes {
    pub fn new(r: Complex64, t: Complex64) -> Self {
        ScatteringAmplitudes { r, t }
    }

    /// Zero-length coupler: everything stays in its input guide.
    pub fn identity() -> Self {
        ScatteringAmplitudes::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    /// Lossless balanced splitter, `r = 1/sqrt(2)`, `t = i/sqrt(2)`.
    pub fn ideal_5050() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        ScatteringAmplitudes::new(Complex64::new(a, 0.0), Complex64::new(0.0, a))
    }

    /// Multiplies both amplitudes by a common complex factor.
    pub fn scaled(&self, factor: Complex64) -> Self {
        ScatteringAmplitudes::new(self.r * factor, self.t * factor)
    }

    /// `||r| - |t|| / max(|r|, |t|)`; 0 for a perfectly balanced split.
    pub fn imbalance(&self) -> f64 {
        let (a, b) = (self.r.norm(), self.t.norm());
        let m = a.max(b);
        if m == 0.0 {
            0.0
        } else {
            (a - b).abs() / m
        }
    }

    pub fn is_balanced(&self, tolerance: f64) -> bool {
        self.imbalance() <= tolerance
    }
}

/// Evaluates the lossy coupler amplitudes for `spec`.
pub fn coupler_coefficients(spec: &CouplerSpec) -> Result<ScatteringAmplitudes> {
    spec.validate()?;
    let k0 = spec.k0();
    let kl = k0 * spec.length_um;
    // f: common factor carried by the anti-symmetric mode.
    let f = spec.n_antisymmetric.propagation_factor(k0, spec.length_um);
    // g: symmetric mode relative to the anti-symmetric one.
    let g = Complex64::from_polar(
        (-spec.differential_loss() * kl).exp(),
        spec.beat_index() * kl,
    );
    let half_f = f * 0.5;
    Ok(ScatteringAmplitudes::new(
        half_f * (g + 1.0),
        half_f * (g - 1.0),
    ))
}

/// Post-selected probability that both photons leave through the same
/// port: `P = 4|rt|^2 / (4|rt|^2 + |r^2 + t^2|^2)`.
pub fn bunching_probability(amps: &ScatteringAmplitudes) -> Result<f64> {
    let ScatteringAmplitudes { r, t } = *amps;
    let same_port = 4.0 * (r * t).norm_sqr();
    let split = (r * r + t * t).norm_sqr();
    let total = same_port + split;
    if total == 0.0 || !total.is_finite() {
        return Err(Error::NoPostSelectedEvents);
    }
    Ok(same_port / total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingRatio {
    pub reflectance: f64,
    pub transmittance: f64,
    pub throughput: f64,
}

pub fn splitting_ratio(amps: &ScatteringAmplitudes) -> SplittingRatio {
    let reflectance = amps.r.norm_sqr();
    let transmittance = amps.t.norm_sqr();
    SplittingRatio {
        reflectance,
        transmittance,
        throughput: reflectance + transmittance,
    }
}

/// Coupling lengths in `(0, max_length_um]` giving `|r| = |t|`.
///
/// Balance requires `cos(Re(dn) k0 L) = 0` regardless of the loss parts,
/// so the lengths are `L_m = (2m + 1) lambda / (4 |Re(dn)|)`.
pub fn find_5050_lengths(
    n1: ComplexIndex,
    n2: ComplexIndex,
    wavelength_um: f64,
    max_length_um: f64,
) -> Result<Vec<f64>> {
    validate_wavelength(wavelength_um)?;
    if !(max_length_um.is_finite() && max_length_um > 0.0) {
        return Err(Error::invalid(
            "search range",
            format!("max_length_um must be finite and > 0, got {max_length_um}"),
        ));
    }
    let beat = (n1.real_part() - n2.real_part()).abs();
    if beat == 0.0 {
        return Err(Error::NoModeBeating);
    }
    let quarter_beat = wavelength_um / (4.0 * beat);
    let lengths: Vec<f64> = (0u64..)
        .map(|m| (2 * m + 1) as f64 * quarter_beat)
        .take_while(|&l| l <= max_length_um)
        .collect();
    debug_assert!(lengths.iter().all(|&l| {
        let spec = CouplerSpec::new(n1, n2, wavelength_um, l).expect("validated above");
        coupler_coefficients(&spec)
            .map(|a| a.is_balanced(BALANCE_TOLERANCE))
            .unwrap_or(false)
    }));
    Ok(lengths)
}

/// First `count` balanced-split lengths.
pub fn first_5050_lengths(
    n1: ComplexIndex,
    n2: ComplexIndex,
    wavelength_um: f64,
    count: usize,
) -> Result<Vec<f64>> {
    validate_wavelength(wavelength_um)?;
    let beat = (n1.real_part() - n2.real_part()).abs();
    if beat == 0.0 {
        return Err(Error::NoModeBeating);
    }
    let quarter_beat = wavelength_um / (4.0 * beat);
    Ok((0..count)
        .map(|m| (2 * m + 1) as f64 * quarter_beat)
        .collect())
}

/// One row of a length sweep. `bunching` is `None` when no two-photon
/// events survive at that length (both amplitudes underflow to zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub length_um: f64,
    pub ratio: SplittingRatio,
    pub bunching: Option<f64>,
}

/// Evaluates the coupler and its bunching probability at every length,
/// in input order.
pub fn sweep_bunching_vs_length(
    n1: ComplexIndex,
    n2: ComplexIndex,
    wavelength_um: f64,
    lengths_um: &[f64],
) -> Result<Vec<SweepPoint>> {
    if lengths_um.is_empty() {
        return Err(Error::invalid("sweep", "no lengths given"));
    }
    let specs = lengths_um
        .iter()
        .map(|&l| CouplerSpec::new(n1, n2, wavelength_um, l))
        .collect::<Result<Vec<_>>>()?;
    Ok(specs
        .par_iter()
        .map(|spec| {
            let amps = coupler_coefficients(spec).expect("spec validated");
            SweepPoint {
                length_um: spec.length_um,
                ratio: splitting_ratio(&amps),
                bunching: bunching_probability(&amps).ok(),
            }
        })
        .collect())
}
