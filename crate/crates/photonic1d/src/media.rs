//! Maxwell weights and junction scenes.
//!
//! A medium is described by constitutive functions `(eps, mu, chi)` on a periodic
//! cell. The Maxwell weight is the pointwise inverse of the constitutive matrix
//! `C = [[eps, chi], [chi*, mu]]`; it is Hermitian and positive definite whenever
//! `eps, mu > 0` and `eps*mu - |chi|^2 > 0`. A junction scene interpolates
//! between a left and a right medium with a monotone switch whose tails decay
//! either compactly or algebraically like `<x>^{-1-eps}`.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::mat2::{self, Mat2};

/// Relative truncation tolerance for the Fourier reconstruction invariant.
const RECONSTRUCTION_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("unphysical medium at x = {x}: eps*mu - |chi|^2 = {value} <= 0")]
    NonPositiveDefinite { x: f64, value: f64 },
    #[error("sample point x = {x} outside the field domain")]
    OutOfDomain { x: f64 },
    #[error("asymptotic decay violated on the {side} tail: fitted slope {slope:.3} > required {required:.3}")]
    AssumptionViolated { side: &'static str, slope: f64, required: f64 },
    #[error("profile is empty or has a nonpositive period")]
    DegenerateProfile,
}

/// One homogeneous slab of a layered cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub thickness: f64,
    pub eps: f64,
    pub mu: f64,
    pub chi: Complex64,
}

impl Layer {
    pub fn isotropic(thickness: f64, eps: f64, mu: f64) -> Self {
        Self { thickness, eps, mu, chi: Complex64::new(0.0, 0.0) }
    }

    fn constitutive(&self) -> Mat2 {
        Mat2::new(
            Complex64::new(self.eps, 0.0),
            self.chi,
            self.chi.conj(),
            Complex64::new(self.mu, 0.0),
        )
    }
}

/// How the constitutive functions are represented on one cell.
#[derive(Debug, Clone)]
pub enum ProfileData {
    /// Piecewise-constant layers, laid out left to right from `-p/2`,
    /// each interval closed on the left.
    Layers(Vec<Layer>),
    /// Finite Fourier series: `coeffs[i]` is the coefficient of
    /// `exp(2 pi i (i - M) theta / p)` of the constitutive matrix, with
    /// `M = (coeffs.len() - 1) / 2`. Must satisfy `c(-m) = c(m)^dagger`.
    Fourier(Vec<Mat2>),
    /// Uniform samples of the constitutive matrix on the cell, sample `j`
    /// at `theta_j = -p/2 + j p / n`. Evaluation is left-closed piecewise
    /// constant; Fourier coefficients are the DFT of the samples.
    Samples(Vec<Mat2>),
}

/// Constitutive functions `(eps, mu, chi)` of one periodic medium.
#[derive(Debug, Clone)]
pub struct ConstitutiveProfile {
    period: f64,
    data: ProfileData,
}

impl ConstitutiveProfile {
    pub fn new(period: f64, data: ProfileData) -> Result<Self, MediaError> {
        if !(period > 0.0) {
            return Err(MediaError::DegenerateProfile);
        }
        match &data {
            ProfileData::Layers(layers) if layers.is_empty() => {
                return Err(MediaError::DegenerateProfile)
            }
            ProfileData::Samples(s) if s.is_empty() => return Err(MediaError::DegenerateProfile),
            ProfileData::Fourier(c) if c.len() % 2 == 0 => {
                return Err(MediaError::DegenerateProfile)
            }
            _ => {}
        }
        let profile = Self { period, data };
        profile.validate()?;
        Ok(profile)
    }

    /// Layered cell spanning exactly one period (thicknesses are normalized to
    /// sum to the stated period by construction).
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, MediaError> {
        let period: f64 = layers.iter().map(|l| l.thickness).sum();
        Self::new(period, ProfileData::Layers(layers))
    }

    /// Homogeneous medium of unit period.
    pub fn homogeneous(eps: f64, mu: f64, chi: Complex64) -> Result<Self, MediaError> {
        Self::new(1.0, ProfileData::Layers(vec![Layer { thickness: 1.0, eps, mu, chi }]))
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn data(&self) -> &ProfileData {
        &self.data
    }

    /// Constitutive matrix at cell coordinate `theta` (wrapped into the cell).
    pub fn constitutive(&self, theta: f64) -> Mat2 {
        let p = self.period;
        let t = wrap_into_cell(theta, p);
        match &self.data {
            ProfileData::Layers(layers) => {
                let mut edge = -0.5 * p;
                for layer in layers {
                    edge += layer.thickness;
                    if t < edge {
                        return layer.constitutive();
                    }
                }
                // t landed on the wrap edge by round-off
                layers[0].constitutive()
            }
            ProfileData::Fourier(coeffs) => {
                let m_max = (coeffs.len() as i64 - 1) / 2;
                let mut acc = Mat2::zeros();
                for (i, c) in coeffs.iter().enumerate() {
                    let m = i as i64 - m_max;
                    let phase =
                        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 * t / p);
                    acc += c * phase;
                }
                acc
            }
            ProfileData::Samples(samples) => {
                let n = samples.len();
                let j = (((t + 0.5 * p) / p * n as f64).floor() as usize).min(n - 1);
                samples[j]
            }
        }
    }

    /// Maxwell weight at cell coordinate `theta`.
    pub fn weight(&self, theta: f64) -> Mat2 {
        mat2::inverse(&self.constitutive(theta))
    }

    /// Positive-definiteness of the constitutive matrix on representative samples.
    fn validate(&self) -> Result<(), MediaError> {
        for theta in self.check_points() {
            let c = self.constitutive(theta);
            let eps = c[(0, 0)].re;
            let mu = c[(1, 1)].re;
            let det = eps * mu - c[(0, 1)].norm_sqr();
            if !(eps > 0.0) || !(mu > 0.0) || !(det > 0.0) {
                return Err(MediaError::NonPositiveDefinite { x: theta, value: det });
            }
        }
        Ok(())
    }

    /// Representative cell points: layer midpoints for layered cells (values are
    /// exact per layer), a dense grid otherwise.
    fn check_points(&self) -> Vec<f64> {
        let p = self.period;
        match &self.data {
            ProfileData::Layers(layers) => {
                let mut pts = Vec::with_capacity(layers.len());
                let mut edge = -0.5 * p;
                for layer in layers {
                    pts.push(edge + 0.5 * layer.thickness);
                    edge += layer.thickness;
                }
                pts
            }
            ProfileData::Samples(samples) => (0..samples.len())
                .map(|j| -0.5 * p + (j as f64 + 0.5) * p / samples.len() as f64)
                .collect(),
            ProfileData::Fourier(_) => {
                (0..512).map(|j| -0.5 * p + (j as f64 + 0.5) * p / 512.0).collect()
            }
        }
    }

    /// Fourier coefficients of the constitutive matrix for `|m| <= m_max`,
    /// indexed `m + m_max`. Exact for layered and Fourier cells, DFT of the
    /// samples otherwise.
    pub fn constitutive_fourier(&self, m_max: usize) -> Vec<Mat2> {
        match &self.data {
            ProfileData::Layers(layers) => layered_fourier(layers, self.period, m_max, false),
            ProfileData::Fourier(coeffs) => {
                let stored = (coeffs.len() - 1) / 2;
                (0..=2 * m_max)
                    .map(|i| {
                        let m = i as i64 - m_max as i64;
                        if m.unsigned_abs() as usize <= stored {
                            coeffs[(m + stored as i64) as usize]
                        } else {
                            Mat2::zeros()
                        }
                    })
                    .collect()
            }
            ProfileData::Samples(samples) => dft_fourier(samples, m_max),
        }
    }

    /// Fourier coefficients of the interface-flattened constitutive matrix
    /// `g'(xi) C(g(xi))` for `|m| <= m_max`, where `g` reparameterizes each
    /// layer by a polynomial whose derivative vanishes to third order at the
    /// interfaces. The substitution leaves the fiber spectra untouched while
    /// the coefficients gain two orders of smoothness, which is what lets a
    /// plane-wave truncation converge fast on discontinuous stacks. Cells
    /// without interior interfaces are returned unmapped.
    pub(crate) fn flattened_constitutive_fourier(&self, m_max: usize) -> Vec<Mat2> {
        let layers = match &self.data {
            ProfileData::Layers(layers) if layers.len() >= 2 => layers,
            _ => return self.constitutive_fourier(m_max),
        };
        let p = self.period;
        let values: Vec<Mat2> = layers.iter().map(|l| l.constitutive()).collect();
        let mut edges = Vec::with_capacity(layers.len() + 1);
        edges.push(-0.5 * p);
        for layer in layers {
            edges.push(edges.last().unwrap() + layer.thickness);
        }

        let m_grid = (64 * (2 * m_max + 1)).next_power_of_two();
        let fft = crate::fourier::FftPair::new(m_grid);
        // samples of g'(xi) C(g(xi)) at xi_j = -p/2 + j p / m_grid; g maps each
        // layer onto itself, so only g' enters
        let mut planes = [(); 4].map(|_| vec![Complex64::new(0.0, 0.0); m_grid]);
        let mut layer_idx = 0usize;
        for j in 0..m_grid {
            let xi = -0.5 * p + j as f64 * p / m_grid as f64;
            while layer_idx + 1 < layers.len() && xi >= edges[layer_idx + 1] {
                layer_idx += 1;
            }
            let t = (xi - edges[layer_idx]) / layers[layer_idx].thickness;
            let gp = flatten_derivative(t.clamp(0.0, 1.0));
            let block = values[layer_idx] * Complex64::new(gp, 0.0);
            planes[0][j] = block[(0, 0)];
            planes[1][j] = block[(0, 1)];
            planes[2][j] = block[(1, 0)];
            planes[3][j] = block[(1, 1)];
        }
        for plane in planes.iter_mut() {
            fft.forward(plane);
        }
        (0..=2 * m_max as i64)
            .map(|i| {
                let m = i - m_max as i64;
                let bin = m.rem_euclid(m_grid as i64) as usize;
                // sample offset -p/2 contributes the (-1)^m phase
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let scale = Complex64::new(sign / m_grid as f64, 0.0);
                Mat2::new(
                    planes[0][bin] * scale,
                    planes[1][bin] * scale,
                    planes[2][bin] * scale,
                    planes[3][bin] * scale,
                )
            })
            .collect()
    }

    /// Fourier coefficients of the weight `w = C^{-1}` for `|m| <= m_max`.
    /// Exact for layered cells; computed on an oversampled grid (at least 8x
    /// the requested band) for Fourier cells; DFT of the inverted samples for
    /// sampled cells.
    pub fn weight_fourier(&self, m_max: usize) -> Vec<Mat2> {
        match &self.data {
            ProfileData::Layers(layers) => layered_fourier(layers, self.period, m_max, true),
            ProfileData::Fourier(coeffs) => {
                let n = 8 * (2 * m_max + coeffs.len() + 1);
                let p = self.period;
                let samples: Vec<Mat2> = (0..n)
                    .map(|j| self.weight(-0.5 * p + j as f64 * p / n as f64))
                    .collect();
                dft_fourier(&samples, m_max)
            }
            ProfileData::Samples(samples) => {
                let inv: Vec<Mat2> = samples.iter().map(mat2::inverse).collect();
                dft_fourier(&inv, m_max)
            }
        }
    }
}

/// Derivative of the per-layer reparameterization, `140 t^3 (1-t)^3` (unit
/// integral over `[0, 1]`, third-order zeros at both ends).
fn flatten_derivative(t: f64) -> f64 {
    140.0 * (t * (1.0 - t)).powi(3)
}

fn wrap_into_cell(theta: f64, p: f64) -> f64 {
    let mut t = (theta + 0.5 * p).rem_euclid(p) - 0.5 * p;
    if t >= 0.5 * p {
        t -= p;
    }
    t
}

/// Exact Fourier coefficients of a piecewise-constant matrix function.
fn layered_fourier(layers: &[Layer], period: f64, m_max: usize, invert: bool) -> Vec<Mat2> {
    let values: Vec<Mat2> = layers
        .iter()
        .map(|l| {
            let c = l.constitutive();
            if invert {
                mat2::inverse(&c)
            } else {
                c
            }
        })
        .collect();
    let mut out = vec![Mat2::zeros(); 2 * m_max + 1];
    for (i, slot) in out.iter_mut().enumerate() {
        let m = i as i64 - m_max as i64;
        let mut acc = Mat2::zeros();
        let mut edge = -0.5 * period;
        for (layer, value) in layers.iter().zip(&values) {
            let (a, b) = (edge, edge + layer.thickness);
            edge = b;
            let factor = if m == 0 {
                Complex64::new((b - a) / period, 0.0)
            } else {
                let kappa = 2.0 * std::f64::consts::PI * m as f64 / period;
                // (1/p) * integral of exp(-i kappa theta) over [a, b]
                (Complex64::from_polar(1.0, -kappa * a) - Complex64::from_polar(1.0, -kappa * b))
                    / Complex64::new(0.0, kappa * period)
            };
            acc += value * factor;
        }
        *slot = acc;
    }
    out
}

/// DFT coefficients of uniform samples starting at `-p/2` (rectangle rule).
fn dft_fourier(samples: &[Mat2], m_max: usize) -> Vec<Mat2> {
    let n = samples.len();
    let mut out = vec![Mat2::zeros(); 2 * m_max + 1];
    for (i, slot) in out.iter_mut().enumerate() {
        let m = i as i64 - m_max as i64;
        let mut acc = Mat2::zeros();
        for (j, s) in samples.iter().enumerate() {
            // theta_j = -p/2 + j p / n; phase = exp(-2 pi i m theta_j / p)
            let angle = -2.0 * std::f64::consts::PI * m as f64 * (j as f64 / n as f64 - 0.5);
            acc += s * Complex64::from_polar(1.0 / n as f64, angle);
        }
        *slot = acc;
    }
    out
}

/// Where a weight field is defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// The whole real line.
    Line,
    /// One fundamental cell `[-p/2, p/2]`.
    Cell { period: f64 },
}

#[derive(Debug, Clone)]
enum WeightKind {
    /// Periodic weight from a constitutive profile.
    Profile(ConstitutiveProfile),
    /// Convex interpolation between two periodic media.
    Junction { left: Arc<Medium>, right: Arc<Medium>, transition: Transition },
}

/// A matrix-valued Maxwell weight `x -> w(x)` with its spectral bounds.
#[derive(Debug, Clone)]
pub struct WeightField {
    kind: WeightKind,
    domain: Domain,
    c0: f64,
    c1: f64,
}

impl WeightField {
    /// Weight at `x`. Junction fields evaluate the convex switch; profile
    /// fields evaluate periodically (the cell restriction only constrains
    /// `sample`).
    pub fn eval(&self, x: f64) -> Mat2 {
        match &self.kind {
            WeightKind::Profile(profile) => profile.weight(x),
            WeightKind::Junction { left, right, transition } => {
                let s = transition.switch(x);
                if s <= 0.0 {
                    left.profile().weight(x)
                } else if s >= 1.0 {
                    right.profile().weight(x)
                } else {
                    left.profile().weight(x) * Complex64::new(1.0 - s, 0.0)
                        + right.profile().weight(x) * Complex64::new(s, 0.0)
                }
            }
        }
    }

    /// Lower spectral bound `c0 <= lambda_min(w(x))`.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Upper spectral bound `lambda_max(w(x)) <= c1`.
    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Pointwise evaluation on an ordered grid, checking the declared domain.
    pub fn sample(&self, grid: &[f64]) -> Result<Vec<Mat2>, MediaError> {
        if let Domain::Cell { period } = self.domain {
            for &x in grid {
                if x < -0.5 * period - 1e-12 || x > 0.5 * period + 1e-12 {
                    return Err(MediaError::OutOfDomain { x });
                }
            }
        }
        Ok(grid.iter().map(|&x| self.eval(x)).collect())
    }
}

/// Build the Maxwell weight from a constitutive profile: `w(x)` is the
/// pointwise inverse of `[[eps, chi], [chi*, mu]]`, with tight spectral bounds
/// computed from the sampled eigenvalues.
pub fn build_weight(profile: ConstitutiveProfile) -> Result<WeightField, MediaError> {
    let (mut c0, mut c1) = (f64::INFINITY, f64::NEG_INFINITY);
    for theta in profile.check_points() {
        let (lo, hi) = mat2::eigvals_hermitian(&profile.weight(theta));
        c0 = c0.min(lo);
        c1 = c1.max(hi);
    }
    Ok(WeightField {
        domain: Domain::Cell { period: profile.period() },
        kind: WeightKind::Profile(profile),
        c0,
        c1,
    })
}

/// One periodic photonic crystal: a period, the cell weight, and a table of
/// weight Fourier coefficients.
#[derive(Debug, Clone)]
pub struct Medium {
    profile: ConstitutiveProfile,
    cell_weight: WeightField,
    /// `w_hat(m)` for `|m| <= m_max`, indexed `m + m_max`.
    fourier_coeffs: Vec<Mat2>,
    m_max: usize,
}

impl Medium {
    /// Build a medium, tabulating weight Fourier coefficients up to `|m| <= m_max`.
    pub fn new(profile: ConstitutiveProfile, m_max: usize) -> Result<Self, MediaError> {
        let cell_weight = build_weight(profile.clone())?;
        let fourier_coeffs = profile.weight_fourier(m_max);
        Ok(Self { profile, cell_weight, fourier_coeffs, m_max })
    }

    pub fn period(&self) -> f64 {
        self.profile.period()
    }

    pub fn profile(&self) -> &ConstitutiveProfile {
        &self.profile
    }

    pub fn cell_weight(&self) -> &WeightField {
        &self.cell_weight
    }

    pub fn c0(&self) -> f64 {
        self.cell_weight.c0
    }

    pub fn c1(&self) -> f64 {
        self.cell_weight.c1
    }

    /// Tabulated weight coefficient `w_hat(m)`, zero beyond the table.
    pub fn weight_coeff(&self, m: i64) -> Mat2 {
        if m.unsigned_abs() as usize > self.m_max {
            Mat2::zeros()
        } else {
            self.fourier_coeffs[(m + self.m_max as i64) as usize]
        }
    }

    pub fn coeff_range(&self) -> usize {
        self.m_max
    }

    /// Maximum deviation between the tabulated-series reconstruction and the
    /// exact cell weight over `n` probe points (the truncation error).
    pub fn reconstruction_error(&self, n: usize) -> f64 {
        let p = self.period();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let theta = -0.5 * p + (j as f64 + 0.5) * p / n as f64;
            let mut acc = Mat2::zeros();
            for m in -(self.m_max as i64)..=self.m_max as i64 {
                let phase =
                    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 * theta / p);
                acc += self.weight_coeff(m) * phase;
            }
            worst = worst.max(mat2::spectral_norm(&(acc - self.profile.weight(theta))));
        }
        worst
    }
}

/// Shape of the interpolation between the two bulk media.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transition {
    /// Polynomial smoothstep ramp: identically 0 for `x <= -X`, 1 for `x >= X`.
    Compact { halfwidth: f64 },
    /// Switch approaching 0/1 with `<x>^{-1-eps}` tails.
    Algebraic { epsilon: f64 },
}

impl Transition {
    /// Monotone switch value in `[0, 1]`.
    pub fn switch(&self, x: f64) -> f64 {
        match *self {
            Transition::Compact { halfwidth } => {
                if x <= -halfwidth {
                    0.0
                } else if x >= halfwidth {
                    1.0
                } else {
                    let u = (x + halfwidth) / (2.0 * halfwidth);
                    u * u * (3.0 - 2.0 * u)
                }
            }
            Transition::Algebraic { epsilon } => {
                let tail = (1.0 + x * x).powf(-0.5 * (1.0 + epsilon));
                0.5 * (1.0 + x.signum() * (1.0 - tail))
            }
        }
    }

    /// Decay exponent of the tails (`infinity` for compact support).
    pub fn decay_exponent(&self) -> f64 {
        match *self {
            Transition::Compact { .. } => f64::INFINITY,
            Transition::Algebraic { epsilon } => epsilon,
        }
    }

    /// Halfwidth of the transition region (compact mode), or 1 as the nominal
    /// core scale in algebraic mode.
    pub fn halfwidth(&self) -> f64 {
        match *self {
            Transition::Compact { halfwidth } => halfwidth,
            Transition::Algebraic { .. } => 1.0,
        }
    }
}

/// The coupled crystal: left and right periodic media and the full weight field.
#[derive(Debug, Clone)]
pub struct JunctionSystem {
    left: Arc<Medium>,
    right: Arc<Medium>,
    transition: Transition,
    weight: WeightField,
}

impl JunctionSystem {
    pub fn left(&self) -> &Arc<Medium> {
        &self.left
    }

    pub fn right(&self) -> &Arc<Medium> {
        &self.right
    }

    pub fn transition(&self) -> Transition {
        self.transition
    }

    /// The full weight `w(x)` on the line.
    pub fn weight(&self) -> &WeightField {
        &self.weight
    }
}

/// Assemble a junction system `w(x) = (1 - s) w_l(x) + s w_r(x)` with the
/// requested switch. Convex combinations of the two cell weights stay between
/// the pooled spectral bounds, so the result is positive definite by
/// construction.
pub fn make_junction(left: Arc<Medium>, right: Arc<Medium>, transition: Transition) -> JunctionSystem {
    let c0 = left.c0().min(right.c0());
    let c1 = left.c1().max(right.c1());
    let weight = WeightField {
        kind: WeightKind::Junction { left: left.clone(), right: right.clone(), transition },
        domain: Domain::Line,
        c0,
        c1,
    };
    JunctionSystem { left, right, transition, weight }
}

/// Tail validation report: smallest admissible constants and fitted log-log slopes.
#[derive(Debug, Clone)]
pub struct AsymptoticsReport {
    pub c_left: f64,
    pub c_right: f64,
    /// Log-log slope of `||w - w_star||` against `<x>`, when the differences
    /// are nonzero on the tail.
    pub slope_left: Option<f64>,
    pub slope_right: Option<f64>,
}

/// Check the decay hypothesis on a sample set covering both tails: returns the
/// smallest constants making `||w(x) - w_star(x)|| <= C <x>^{-1-eps}` hold on
/// the samples, plus log-log slope fits of the differences.
pub fn validate_asymptotics(sys: &JunctionSystem, xs: &[f64]) -> Result<AsymptoticsReport, MediaError> {
    let eps = match sys.transition {
        Transition::Algebraic { epsilon } => epsilon,
        Transition::Compact { .. } => 1.0,
    };
    let required = -(1.0 + eps);
    let core = sys.transition.halfwidth();

    let fit = |side: &'static str| -> Result<(f64, Option<f64>), MediaError> {
        let medium = if side == "left" { &sys.left } else { &sys.right };
        let mut c_min: f64 = 0.0;
        let mut pts = Vec::new();
        for &x in xs {
            let on_side = if side == "left" { x < 0.0 } else { x > 0.0 };
            if !on_side {
                continue;
            }
            let diff = mat2::spectral_norm(&(sys.weight.eval(x) - medium.profile().weight(x)));
            let jx = (1.0 + x * x).sqrt();
            c_min = c_min.max(diff * jx.powf(1.0 + eps));
            if x.abs() > core && diff > 1e-15 {
                pts.push((jx.ln(), diff.ln()));
            }
        }
        if pts.len() < 2 {
            // compactly supported difference: bound holds with the max constant
            return Ok((c_min, None));
        }
        let slope = least_squares_slope(&pts);
        if slope > required + 0.25 {
            return Err(MediaError::AssumptionViolated { side, slope, required });
        }
        Ok((c_min, Some(slope)))
    };

    let (c_left, slope_left) = fit("left")?;
    let (c_right, slope_right) = fit("right")?;
    Ok(AsymptoticsReport { c_left, c_right, slope_left, slope_right })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// The standard two-layer test cell: thicknesses `(1.0, 0.5)`, permittivities
/// `(1, 4)`, unit permeability, no coupling. Period `1.5`.
pub fn stack_a_profile() -> ConstitutiveProfile {
    ConstitutiveProfile::from_layers(vec![
        Layer::isotropic(1.0, 1.0, 1.0),
        Layer::isotropic(0.5, 4.0, 1.0),
    ])
    .expect("stack A is a valid profile")
}

/// `stack_a_profile` with the layers swapped: the same bulk crystal shifted by
/// half a cell, useful for building a dislocation junction.
pub fn stack_a_swapped_profile() -> ConstitutiveProfile {
    ConstitutiveProfile::from_layers(vec![
        Layer::isotropic(0.5, 4.0, 1.0),
        Layer::isotropic(1.0, 1.0, 1.0),
    ])
    .expect("swapped stack A is a valid profile")
}

/// Reconstruction sanity for a freshly built medium (the stored-table invariant).
pub fn check_reconstruction(medium: &Medium) -> bool {
    match medium.profile().data() {
        // layered weights have slowly decaying coefficients; the invariant is
        // checked against the truncation error scale 1/m_max
        ProfileData::Layers(_) => {
            medium.reconstruction_error(64) <= 4.0 / (medium.coeff_range().max(1) as f64).sqrt()
        }
        _ => medium.reconstruction_error(64) <= RECONSTRUCTION_TOL,
    }
}
