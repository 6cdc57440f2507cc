//! Dip/peak fits of coincidence scans.
//!
//! The model is `C [1 -/+ V exp(-((x - x0) / L_c)^2)]`, a dip for the
//! standard interferometer and a peak for the modified one. Parameters are
//! found by Levenberg-Marquardt on Poisson-weighted residuals
//! `(y - m) / sqrt(max(y, 1))`, with a central-difference Jacobian.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::experiment_sim::CoincidenceRecord;

const MIN_POINTS: usize = 5;
const MAX_VISIBILITY: f64 = 1.2;
const MIN_BASELINE: f64 = 1e-12;
const MIN_COHERENCE_LENGTH: f64 = 1e-9;
const MAX_DAMPING: f64 = 1e16;
const GRADIENT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Dip,
    Peak,
}

impl Polarity {
    fn sign(self) -> f64 {
        match self {
            Polarity::Dip => -1.0,
            Polarity::Peak => 1.0,
        }
    }
}

/// Gaussian dip or peak on a constant baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipModel {
    pub baseline: f64,
    pub visibility: f64,
    pub coherence_length_um: f64,
    pub center_um: f64,
    pub polarity: Polarity,
}

impl DipModel {
    pub fn eval(&self, position_um: f64) -> f64 {
        let u = (position_um - self.center_um) / self.coherence_length_um;
        self.baseline * (1.0 + self.polarity.sign() * self.visibility * (-u * u).exp())
    }

    /// Analytic derivatives with respect to `[C, V, L_c, center]`.
    pub fn gradient(&self, position_um: f64) -> [f64; 4] {
        let s = self.polarity.sign();
        let lc = self.coherence_length_um;
        let u = (position_um - self.center_um) / lc;
        let e = (-u * u).exp();
        let feature = self.baseline * s * self.visibility * e;
        [
            1.0 + s * self.visibility * e,
            self.baseline * s * e,
            feature * 2.0 * u * u / lc,
            feature * 2.0 * u / lc,
        ]
    }

    pub fn params(&self) -> [f64; 4] {
        [
            self.baseline,
            self.visibility,
            self.coherence_length_um,
            self.center_um,
        ]
    }

    pub fn with_params(&self, p: [f64; 4]) -> Self {
        DipModel {
            baseline: p[0],
            visibility: p[1],
            coherence_length_um: p[2],
            center_um: p[3],
            polarity: self.polarity,
        }
    }

    /// Largest and smallest values of the curve, `(c_max, c_min)`.
    pub fn extremes(&self) -> (f64, f64) {
        let feature = self.baseline * (1.0 + self.polarity.sign() * self.visibility);
        match self.polarity {
            Polarity::Dip => (self.baseline, feature),
            Polarity::Peak => (feature, self.baseline),
        }
    }

    fn clamped(&self) -> Self {
        DipModel {
            baseline: self.baseline.max(MIN_BASELINE),
            visibility: self.visibility.clamp(0.0, MAX_VISIBILITY),
            coherence_length_um: self.coherence_length_um.max(MIN_COHERENCE_LENGTH),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub initial_damping: f64,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub cost_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            initial_damping: 1e-3,
            cost_tolerance: 1e-10,
        }
    }
}

/// One-sigma parameter uncertainties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamErrors {
    pub baseline: f64,
    pub visibility: f64,
    pub coherence_length_um: f64,
    pub center_um: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub model: DipModel,
    pub std_errors: ParamErrors,
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub value: f64,
    pub std_error: f64,
}

/// `V1 = (c_max - c_min) / c_max`, the contrast of a dip.
pub fn visibility_v1(c_max: f64, c_min: f64) -> Result<f64> {
    if !(c_max > 0.0) {
        return Err(Error::invalid("visibility", "c_max must be > 0"));
    }
    if !(c_min >= 0.0 && c_min <= c_max) {
        return Err(Error::invalid("visibility", "need 0 <= c_min <= c_max"));
    }
    Ok((c_max - c_min) / c_max)
}

/// `V2 = (c_max - c_min) / c_min`, the contrast of a peak.
pub fn visibility_v2(c_max: f64, c_min: f64) -> Result<f64> {
    if !(c_min > 0.0) {
        return Err(Error::invalid("visibility", "c_min must be > 0"));
    }
    if !(c_max >= c_min) {
        return Err(Error::invalid("visibility", "need c_max >= c_min"));
    }
    Ok((c_max - c_min) / c_min)
}

pub fn coherence_length_from_fit(result: &FitResult) -> Measurement {
    Measurement {
        value: result.model.coherence_length_um,
        std_error: result.std_errors.coherence_length_um,
    }
}

pub fn visibility_from_fit(result: &FitResult) -> Measurement {
    Measurement {
        value: result.model.visibility,
        std_error: result.std_errors.visibility,
    }
}

/// Fits a scan of coincidence records. Counts are rescaled to the first
/// record's integration time when the times differ.
pub fn fit_dip(
    records: &[CoincidenceRecord],
    polarity: Polarity,
    options: &FitOptions,
) -> Result<FitResult> {
    if records
        .iter()
        .any(|r| !(r.integration_time_s.is_finite() && r.integration_time_s > 0.0))
    {
        return Err(Error::invalid("dataset", "integration times must be > 0"));
    }
    let reference = records.first().map_or(1.0, |r| r.integration_time_s);
    let positions: Vec<f64> = records.iter().map(|r| r.stage_position_um).collect();
    let counts: Vec<f64> = records
        .iter()
        .map(|r| r.counts as f64 * reference / r.integration_time_s)
        .collect();
    fit_curve(&positions, &counts, polarity, options)
}

/// Fits counts (not necessarily integer) sampled at `positions`.
pub fn fit_curve(
    positions: &[f64],
    counts: &[f64],
    polarity: Polarity,
    options: &FitOptions,
) -> Result<FitResult> {
    if positions.len() != counts.len() {
        return Err(Error::invalid("dataset", "positions and counts differ in length"));
    }
    if positions.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_POINTS} points, got {}",
            positions.len()
        )));
    }
    if positions.iter().chain(counts).any(|v| !v.is_finite()) || counts.iter().any(|&c| c < 0.0) {
        return Err(Error::invalid("dataset", "values must be finite, counts >= 0"));
    }
    let initial = initial_guess(positions, counts, polarity)?;
    let problem = Problem::new(positions, counts);
    Ok(problem.solve(initial, options))
}

/// Starting point for the solver: baseline from the outer 20% of points,
/// center at the extremum, visibility from the extremum depth, and
/// coherence length from the half-width at half-depth.
pub fn initial_guess(positions: &[f64], counts: &[f64], polarity: Polarity) -> Result<DipModel> {
    let n = positions.len();
    if n < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_POINTS} points, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]));
    let xs: Vec<f64> = order.iter().map(|&i| positions[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| counts[i]).collect();

    let (lo, hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    if lo == hi {
        return Err(Error::NoInterferenceFeature);
    }

    let per_side = ((n as f64 * 0.1).round() as usize).max(1);
    let outer = ys[..per_side].iter().chain(&ys[n - per_side..]);
    let baseline = outer.sum::<f64>() / (2 * per_side) as f64;

    let ext = match polarity {
        Polarity::Dip => argext(&ys, |a, b| a < b),
        Polarity::Peak => argext(&ys, |a, b| a > b),
    };
    let depth = (ys[ext] - baseline).abs();
    if !(baseline > 0.0 && depth > 0.0) {
        return Err(Error::NoInterferenceFeature);
    }
    let visibility = (depth / baseline).clamp(0.0, 1.0);

    let half = 0.5 * depth;
    let inside = |i: usize| (ys[i] - baseline).abs() >= half;
    let crossing = |i_in: usize, i_out: usize| {
        // Linear interpolation of the half-depth crossing between two samples.
        let (d_in, d_out) = ((ys[i_in] - baseline).abs(), (ys[i_out] - baseline).abs());
        let frac = if d_in == d_out { 0.5 } else { (d_in - half) / (d_in - d_out) };
        (xs[i_in] + frac * (xs[i_out] - xs[i_in]) - xs[ext]).abs()
    };
    let mut widths = Vec::with_capacity(2);
    if let Some(i) = (0..ext).rev().find(|&i| !inside(i)) {
        widths.push(crossing(i + 1, i));
    }
    if let Some(i) = (ext + 1..n).find(|&i| !inside(i)) {
        widths.push(crossing(i - 1, i));
    }
    let span = xs[n - 1] - xs[0];
    let hwhm = if widths.is_empty() {
        span / 4.0
    } else {
        widths.iter().sum::<f64>() / widths.len() as f64
    };
    let mut coherence_length = hwhm / std::f64::consts::LN_2.sqrt();
    if !(coherence_length > 0.0) {
        coherence_length = (span / 4.0).max(MIN_COHERENCE_LENGTH);
    }

    Ok(DipModel {
        baseline,
        visibility,
        coherence_length_um: coherence_length,
        center_um: xs[ext],
        polarity,
    })
}

fn argext(ys: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &y) in ys.iter().enumerate().skip(1) {
        if better(y, ys[best]) {
            best = i;
        }
    }
    best
}

/// Weighted least-squares problem over a fixed dataset.
pub struct Problem<'a> {
    positions: &'a [f64],
    counts: &'a [f64],
    weights: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(positions: &'a [f64], counts: &'a [f64]) -> Self {
        let weights = counts.iter().map(|&c| 1.0 / c.max(1.0).sqrt()).collect();
        Problem {
            positions,
            counts,
            weights,
        }
    }

    pub fn residuals(&self, model: &DipModel) -> Vec<f64> {
        self.positions
            .iter()
            .zip(self.counts)
            .zip(&self.weights)
            .map(|((&x, &y), &w)| (y - model.eval(x)) * w)
            .collect()
    }

    fn cost(&self, model: &DipModel) -> f64 {
        0.5 * self.residuals(model).iter().map(|r| r * r).sum::<f64>()
    }

    /// Central-difference Jacobian of the weighted residuals, one row per
    /// data point, columns `[C, V, L_c, center]`.
    pub fn jacobian(&self, model: &DipModel) -> Vec<[f64; 4]> {
        let p = model.params();
        let scales = [
            p[0].abs().max(MIN_BASELINE),
            p[1].abs().max(0.1),
            p[2].abs().max(MIN_COHERENCE_LENGTH),
            p[2].abs().max(MIN_COHERENCE_LENGTH),
        ];
        let step = f64::EPSILON.cbrt();
        let mut jac = vec![[0.0; 4]; self.positions.len()];
        for j in 0..4 {
            let h = step * scales[j];
            let (mut plus, mut minus) = (p, p);
            plus[j] += h;
            minus[j] -= h;
            let (mp, mm) = (model.with_params(plus), model.with_params(minus));
            let width = plus[j] - minus[j];
            for (row, (&x, &w)) in jac.iter_mut().zip(self.positions.iter().zip(&self.weights)) {
                // Residual is (y - m) w, so its derivative is -w dm/dp.
                row[j] = -w * (mp.eval(x) - mm.eval(x)) / width;
            }
        }
        jac
    }

    fn normal_equations(&self, model: &DipModel) -> (Matrix4<f64>, Vector4<f64>, Vec<f64>) {
        let jac = self.jacobian(model);
        let res = self.residuals(model);
        let mut a = Matrix4::zeros();
        let mut g = Vector4::zeros();
        for (row, &r) in jac.iter().zip(&res) {
            let v = Vector4::from(*row);
            a += v * v.transpose();
            g += v * r;
        }
        (a, g, res)
    }

    pub fn solve(&self, initial: DipModel, options: &FitOptions) -> FitResult {
        let mut model = initial.clamped();
        let mut cost = self.cost(&model);
        let mut damping = options.initial_damping;
        let mut iterations = 0;
        let mut stalled = false;

        while iterations < options.max_iterations {
            if cost == 0.0 {
                stalled = true;
                break;
            }
            iterations += 1;
            let (a, g, _) = self.normal_equations(&model);
            let max_diag = (0..4).map(|j| a[(j, j)]).fold(0.0, f64::max);
            let floor = 1e-12 * max_diag.max(f64::MIN_POSITIVE);

            let mut accepted = None;
            while damping <= MAX_DAMPING {
                let mut m = a;
                for j in 0..4 {
                    m[(j, j)] += damping * a[(j, j)].max(floor);
                }
                let step = m
                    .cholesky()
                    .map(|c| c.solve(&(-g)))
                    .or_else(|| m.lu().solve(&(-g)));
                if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
                    let p = model.params();
                    let trial = model
                        .with_params([p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]])
                        .clamped();
                    let trial_cost = self.cost(&trial);
                    if trial_cost < cost {
                        damping /= 10.0;
                        accepted = Some((trial, trial_cost));
                        break;
                    }
                }
                damping *= 10.0;
            }

            match accepted {
                Some((trial, trial_cost)) => {
                    let rel = (cost - trial_cost) / cost;
                    model = trial;
                    cost = trial_cost;
                    if rel < options.cost_tolerance {
                        stalled = true;
                        break;
                    }
                }
                None => {
                    stalled = true;
                    break;
                }
            }
        }

        let (a, g, res) = self.normal_equations(&model);
        let converged = stalled && self.gradient_small(&model, &a, &g, &res);
        let n = self.positions.len();
        let rss = 2.0 * cost;
        let dof = n.saturating_sub(4).max(1) as f64;
        let cov = a.try_inverse().map(|inv| inv * (rss / dof));
        let err = |j: usize| cov.map_or(f64::NAN, |c| c[(j, j)].max(0.0).sqrt());
        FitResult {
            model,
            std_errors: ParamErrors {
                baseline: err(0),
                visibility: err(1),
                coherence_length_um: err(2),
                center_um: err(3),
            },
            rss,
            iterations,
            converged,
            n_points: n,
        }
    }

    /// Projected, scale-free gradient test. Components pushing against an
    /// active bound are ignored.
    fn gradient_small(&self, model: &DipModel, a: &Matrix4<f64>, g: &Vector4<f64>, res: &[f64]) -> bool {
        let res_norm = res.iter().map(|r| r * r).sum::<f64>().sqrt();
        let data_norm = self
            .counts
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| (y * w).powi(2))
            .sum::<f64>()
            .sqrt();
        if res_norm <= 1e-10 * data_norm {
            return true;
        }
        let p = model.params();
        let at_lower = [p[0] <= MIN_BASELINE, p[1] <= 0.0, p[2] <= MIN_COHERENCE_LENGTH, false];
        let at_upper = [false, p[1] >= MAX_VISIBILITY, false, false];
        (0..4).all(|j| {
            // Descent direction is -g.
            if (at_lower[j] && g[j] > 0.0) || (at_upper[j] && g[j] < 0.0) {
                return true;
            }
            let scale = a[(j, j)].sqrt() * res_norm;
            scale == 0.0 || g[j].abs() <= GRADIENT_TOLERANCE * scale
        })
    }
}
