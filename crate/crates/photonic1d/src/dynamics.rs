//! Real-space discretization and norm-conserving time evolution.
//!
//! States are pairs of complex fields sampled on a uniform grid over a circle
//! of circumference `2L` (the spectral derivative makes the domain periodic;
//! the wrap seam acts as a second junction, so runs budget their time and an
//! alarm fires if weighted mass reaches the outer region). The Hamiltonian is
//! `M_h = W_h D_h` with `W_h` the pointwise 2x2 weight and `D_h` the exact
//! Fourier derivative in the off-diagonal blocks; it is self-adjoint in the
//! weighted product `<a, b> = h sum a_i^dagger w(x_i)^{-1} b_i`, which the
//! Crank-Nicolson stepper conserves to solver tolerance.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::bloch::{bloch_analyze, bloch_synthesize, BlochBasis, BlochError, BlochExpansion};
use crate::fourier::{wavenumbers, FftPair};
use crate::mat2::{self, Mat2};
use crate::media::{JunctionSystem, Medium};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("domain of length {domain} is not commensurate with the cell of period {period}")]
    IncommensurateDomain { domain: f64, period: f64 },
    #[error("linear solver stalled at step {step}: relative residual {residual:.2e}")]
    SolverDivergence { step: usize, residual: f64 },
    #[error("weighted mass fraction {fraction:.2e} in the outer domain exceeds the alarm {threshold:.2e}")]
    BoundaryContamination { fraction: f64, threshold: f64 },
    #[error("states live in different weight contexts")]
    ContextMismatch,
    #[error("wavepacket window violated: {0}")]
    WindowViolation(String),
    #[error(transparent)]
    Bloch(#[from] BlochError),
}

/// Uniform periodic grid on `[-L, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    half_length: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(half_length: f64, n_points: usize) -> Self {
        assert!(half_length > 0.0 && n_points >= 8 && n_points % 2 == 0);
        Self { half_length, n_points }
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Circumference `2L`.
    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn h(&self) -> f64 {
        self.length() / self.n_points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.h()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// `(n_cells, points_per_cell)` when the domain holds an integer number of
    /// cells of `period` with integer points per cell.
    pub fn cells_of(&self, period: f64) -> Option<(usize, usize)> {
        let cells = self.length() / period;
        let cells_round = cells.round();
        if cells_round < 1.0 || (cells - cells_round).abs() > 1e-9 * cells_round {
            return None;
        }
        let n_cells = cells_round as usize;
        if self.n_points % n_cells != 0 {
            return None;
        }
        Some((n_cells, self.n_points / n_cells))
    }
}

static CONTEXT_IDS: AtomicU64 = AtomicU64::new(1);

/// Sampled weight field on a grid, defining the weighted inner product. Each
/// context carries a unique id; inner products between states of different
/// contexts are refused rather than silently mixed.
#[derive(Debug)]
pub struct WeightContext {
    id: u64,
    grid: Grid,
    w: Vec<Mat2>,
    w_inv: Vec<Mat2>,
    c0: f64,
    c1: f64,
}

impl WeightContext {
    fn from_samples(grid: Grid, w: Vec<Mat2>, c0: f64, c1: f64) -> Arc<Self> {
        let w_inv = w.iter().map(mat2::inverse).collect();
        Arc::new(Self { id: CONTEXT_IDS.fetch_add(1, Ordering::Relaxed), grid, w, w_inv, c0, c1 })
    }

    /// Identity weight (the flat product).
    pub fn flat(grid: Grid) -> Arc<Self> {
        let w = vec![Mat2::identity(); grid.n_points()];
        Self::from_samples(grid, w, 1.0, 1.0)
    }

    /// Periodic extension of a medium's cell weight.
    pub fn for_medium(grid: Grid, medium: &Medium) -> Arc<Self> {
        let w = grid.xs().iter().map(|&x| medium.profile().weight(x)).collect();
        Self::from_samples(grid, w, medium.c0(), medium.c1())
    }

    /// The full junction weight.
    pub fn for_junction(grid: Grid, sys: &JunctionSystem) -> Arc<Self> {
        let field = sys.weight();
        let w = grid.xs().iter().map(|&x| field.eval(x)).collect();
        Self::from_samples(grid, w, field.c0(), field.c1())
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weight_at(&self, i: usize) -> Mat2 {
        self.w[i]
    }

    pub fn inv_weight_at(&self, i: usize) -> Mat2 {
        self.w_inv[i]
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }
}

/// A two-component field on the grid with its weight context.
#[derive(Debug, Clone)]
pub struct StateVector {
    context: Arc<WeightContext>,
    pub phi_e: Vec<Complex64>,
    pub phi_h: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(context: Arc<WeightContext>) -> Self {
        let n = context.grid().n_points();
        Self { context, phi_e: vec![Complex64::default(); n], phi_h: vec![Complex64::default(); n] }
    }

    pub fn context(&self) -> &Arc<WeightContext> {
        &self.context
    }

    pub fn grid(&self) -> &Grid {
        self.context.grid()
    }

    /// Same field values in another weight context on the same grid (the
    /// junction map and its adjoint move states between spaces this way).
    pub fn with_context(&self, context: Arc<WeightContext>) -> Result<Self, DynamicsError> {
        if context.grid().n_points() != self.grid().n_points()
            || (context.grid().length() - self.grid().length()).abs() > 1e-12
        {
            return Err(DynamicsError::ContextMismatch);
        }
        Ok(Self { context, phi_e: self.phi_e.clone(), phi_h: self.phi_h.clone() })
    }

    pub fn weighted_norm(&self) -> f64 {
        weighted_inner(self, self).expect("same context").re.max(0.0).sqrt()
    }

    pub fn scale(&mut self, factor: Complex64) {
        for v in self.phi_e.iter_mut().chain(self.phi_h.iter_mut()) {
            *v *= factor;
        }
    }

    /// `self += factor * other` (same context required).
    pub fn axpy(&mut self, factor: Complex64, other: &Self) -> Result<(), DynamicsError> {
        if self.context.id() != other.context.id() {
            return Err(DynamicsError::ContextMismatch);
        }
        for i in 0..self.phi_e.len() {
            self.phi_e[i] += factor * other.phi_e[i];
            self.phi_h[i] += factor * other.phi_h[i];
        }
        Ok(())
    }

    /// Weighted mass fraction in the outer `zone` of the domain (for the
    /// boundary alarm; `zone = 0.05` means the outermost 5 percent).
    pub fn boundary_fraction(&self, zone: f64) -> f64 {
        let grid = self.grid();
        let cut = (1.0 - zone) * grid.half_length();
        let mut outer = 0.0;
        let mut total = 0.0;
        for i in 0..grid.n_points() {
            let d = local_density(self, i);
            total += d;
            if grid.x(i).abs() >= cut {
                outer += d;
            }
        }
        if total > 0.0 {
            outer / total
        } else {
            0.0
        }
    }
}

/// Pointwise weighted density `phi_i^dagger w_i^{-1} phi_i` (without the `h`).
fn local_density(s: &StateVector, i: usize) -> f64 {
    let u = nalgebra::Vector2::new(s.phi_e[i], s.phi_h[i]);
    (u.adjoint() * s.context.inv_weight_at(i) * u)[(0, 0)].re
}

/// The weighted inner product `h sum_i <a_i, w(x_i)^{-1} b_i>`, conjugate
/// linear in the first argument.
pub fn weighted_inner(a: &StateVector, b: &StateVector) -> Result<Complex64, DynamicsError> {
    if a.context.id() != b.context.id() {
        return Err(DynamicsError::ContextMismatch);
    }
    let mut acc = Complex64::default();
    for i in 0..a.phi_e.len() {
        let u = nalgebra::Vector2::new(a.phi_e[i], a.phi_h[i]);
        let v = nalgebra::Vector2::new(b.phi_e[i], b.phi_h[i]);
        acc += (u.adjoint() * a.context.inv_weight_at(i) * v)[(0, 0)];
    }
    Ok(acc * Complex64::new(a.grid().h(), 0.0))
}

/// Mean position `<psi, Q psi>_w / ||psi||^2` (position on the covering
/// interval `[-L, L)`, meaningful while the state stays away from the seam).
pub fn position_mean(s: &StateVector) -> f64 {
    let grid = s.grid();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..grid.n_points() {
        let d = local_density(s, i);
        num += grid.x(i) * d;
        den += d;
    }
    num / den
}

/// The discretized Hamiltonian `M_h = W_h D_h` with spectral derivative.
pub struct DiscreteOperator {
    context: Arc<WeightContext>,
    fft: FftPair,
    kappa: Vec<f64>,
}

impl DiscreteOperator {
    pub fn from_context(context: Arc<WeightContext>) -> Self {
        let grid = context.grid();
        let kappa = wavenumbers(grid.n_points(), grid.length());
        let fft = FftPair::new(grid.n_points());
        Self { context, fft, kappa }
    }

    /// Full Hamiltonian of a junction scene.
    pub fn for_junction(grid: Grid, sys: &JunctionSystem) -> Self {
        Self::from_context(WeightContext::for_junction(grid, sys))
    }

    /// Periodic Hamiltonian of one medium; the grid must be commensurate.
    pub fn for_medium(grid: Grid, medium: &Medium) -> Result<Self, DynamicsError> {
        grid.cells_of(medium.period()).ok_or(DynamicsError::IncommensurateDomain {
            domain: grid.length(),
            period: medium.period(),
        })?;
        Ok(Self::from_context(WeightContext::for_medium(grid, medium)))
    }

    pub fn context(&self) -> &Arc<WeightContext> {
        &self.context
    }

    /// Spectral derivative `P = -i d/dx` in place.
    fn derivative(&self, data: &mut [Complex64]) {
        self.fft.forward(data);
        for (v, &k) in data.iter_mut().zip(&self.kappa) {
            *v *= k;
        }
        self.fft.inverse(data);
    }

    /// `out = M_h inp` on raw component slices.
    fn apply_raw(
        &self,
        in_e: &[Complex64],
        in_h: &[Complex64],
        out_e: &mut Vec<Complex64>,
        out_h: &mut Vec<Complex64>,
    ) {
        out_e.clear();
        out_e.extend_from_slice(in_h);
        out_h.clear();
        out_h.extend_from_slice(in_e);
        self.derivative(out_e); // P phi_h
        self.derivative(out_h); // P phi_e
        for i in 0..in_e.len() {
            let w = self.context.weight_at(i);
            let de = out_e[i];
            let dh = out_h[i];
            out_e[i] = w[(0, 0)] * de + w[(0, 1)] * dh;
            out_h[i] = w[(1, 0)] * de + w[(1, 1)] * dh;
        }
    }

    /// `M_h psi`. The state must carry this operator's context.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector, DynamicsError> {
        if state.context.id() != self.context.id() {
            return Err(DynamicsError::ContextMismatch);
        }
        let mut out = StateVector::zeros(self.context.clone());
        let (mut oe, mut oh) = (Vec::new(), Vec::new());
        self.apply_raw(&state.phi_e, &state.phi_h, &mut oe, &mut oh);
        out.phi_e = oe;
        out.phi_h = oh;
        Ok(out)
    }
}

/// Mean energy `<psi, M psi>_w / ||psi||^2`.
pub fn energy_mean(state: &StateVector, op: &DiscreteOperator) -> Result<f64, DynamicsError> {
    let m_psi = op.apply(state)?;
    let num = weighted_inner(state, &m_psi)?.re;
    let den = weighted_inner(state, state)?.re;
    Ok(num / den)
}

/// Time stepping knobs.
#[derive(Debug, Clone)]
pub struct PropagatorConfig {
    pub dt: f64,
    /// Relative residual target of the inner solver.
    pub solver_tol: f64,
    pub max_solver_iters: usize,
    /// Weighted-mass fraction in the outer 5 percent that trips the alarm.
    pub boundary_alarm: f64,
}

impl PropagatorConfig {
    /// Default step for a resolved top frequency: `dt = 0.05 / max_lambda`.
    pub fn for_max_frequency(max_lambda: f64) -> Self {
        Self { dt: 0.05 / max_lambda.max(1e-12), ..Self::default() }
    }
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self { dt: 0.01, solver_tol: 1e-13, max_solver_iters: 64, boundary_alarm: 1e-3 }
    }
}

/// Fraction of the domain counted as "outer" by the boundary alarm.
pub const ALARM_ZONE: f64 = 0.05;

/// Crank-Nicolson evolution by time `t` (any sign): each step solves
/// `(I + i dt/2 M) psi_new = (I - i dt/2 M) psi` with conjugate gradients on
/// the normal equations in the weighted product. The operator `I + (dt/2)^2
/// M^2` is Hermitian positive definite there and extremely well conditioned on
/// the occupied modes, so a handful of iterations reaches round-off; each
/// solve is warm-started from the current state.
pub fn propagate_full(
    state: &StateVector,
    op: &DiscreteOperator,
    t: f64,
    cfg: &PropagatorConfig,
) -> Result<StateVector, DynamicsError> {
    if state.context.id() != op.context.id() {
        return Err(DynamicsError::ContextMismatch);
    }
    let n_steps = (t.abs() / cfg.dt).round().max(1.0) as usize;
    let dt = t / n_steps as f64;
    let alpha = 0.5 * dt;

    let n = state.phi_e.len();
    let h = state.grid().h();
    let winv: Vec<Mat2> = (0..n).map(|i| state.context.inv_weight_at(i)).collect();
    let wdot = |ae: &[Complex64], ah: &[Complex64], be: &[Complex64], bh: &[Complex64]| {
        let mut acc = Complex64::default();
        for i in 0..n {
            let wi = &winv[i];
            let we = wi[(0, 0)] * be[i] + wi[(0, 1)] * bh[i];
            let wh = wi[(1, 0)] * be[i] + wi[(1, 1)] * bh[i];
            acc += ae[i].conj() * we + ah[i].conj() * wh;
        }
        acc * h
    };

    let mut psi_e = state.phi_e.clone();
    let mut psi_h = state.phi_h.clone();
    // scratch buffers
    let (mut t1e, mut t1h) = (Vec::new(), Vec::new());
    let (mut t2e, mut t2h) = (Vec::new(), Vec::new());

    // normal operator N x = x + alpha^2 M (M x), written into (out_e, out_h)
    macro_rules! normal_apply {
        ($xe:expr, $xh:expr, $oe:expr, $oh:expr) => {{
            op.apply_raw($xe, $xh, &mut t1e, &mut t1h);
            op.apply_raw(&t1e, &t1h, &mut t2e, &mut t2h);
            $oe.clear();
            $oh.clear();
            for i in 0..n {
                $oe.push($xe[i] + alpha * alpha * t2e[i]);
                $oh.push($xh[i] + alpha * alpha * t2h[i]);
            }
        }};
    }

    let mut rhs_e = vec![Complex64::default(); n];
    let mut rhs_h = vec![Complex64::default(); n];
    let (mut r_e, mut r_h) = (vec![Complex64::default(); n], vec![Complex64::default(); n]);
    let (mut p_e, mut p_h) = (vec![Complex64::default(); n], vec![Complex64::default(); n]);
    let (mut np_e, mut np_h) = (Vec::new(), Vec::new());

    for step in 0..n_steps {
        // rhs = (I - i alpha M)^2 psi = psi - 2 i alpha M psi - alpha^2 M^2 psi
        op.apply_raw(&psi_e, &psi_h, &mut t1e, &mut t1h);
        op.apply_raw(&t1e, &t1h, &mut t2e, &mut t2h);
        let two_i_alpha = Complex64::new(0.0, 2.0 * alpha);
        for i in 0..n {
            rhs_e[i] = psi_e[i] - two_i_alpha * t1e[i] - alpha * alpha * t2e[i];
            rhs_h[i] = psi_h[i] - two_i_alpha * t1h[i] - alpha * alpha * t2h[i];
        }
        let rhs_norm = wdot(&rhs_e, &rhs_h, &rhs_e, &rhs_h).re.sqrt();

        // CG on N x = rhs, warm start x = psi
        normal_apply!(&psi_e, &psi_h, np_e, np_h);
        for i in 0..n {
            r_e[i] = rhs_e[i] - np_e[i];
            r_h[i] = rhs_h[i] - np_h[i];
            p_e[i] = r_e[i];
            p_h[i] = r_h[i];
        }
        let mut rz = wdot(&r_e, &r_h, &r_e, &r_h).re;
        let target = (cfg.solver_tol * rhs_norm).max(1e-300);
        let mut converged = rz.sqrt() <= target;
        let mut iters = 0;
        while !converged && iters < cfg.max_solver_iters {
            normal_apply!(&p_e, &p_h, np_e, np_h);
            let denom = wdot(&p_e, &p_h, &np_e, &np_h).re;
            let a = rz / denom;
            for i in 0..n {
                psi_e[i] += a * p_e[i];
                psi_h[i] += a * p_h[i];
                r_e[i] -= a * np_e[i];
                r_h[i] -= a * np_h[i];
            }
            let rz_new = wdot(&r_e, &r_h, &r_e, &r_h).re;
            converged = rz_new.sqrt() <= target;
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p_e[i] = r_e[i] + beta * p_e[i];
                p_h[i] = r_h[i] + beta * p_h[i];
            }
            iters += 1;
        }
        if !converged {
            return Err(DynamicsError::SolverDivergence {
                step,
                residual: rz.sqrt() / rhs_norm.max(1e-300),
            });
        }
    }

    let mut out = StateVector::zeros(op.context.clone());
    out.phi_e = psi_e;
    out.phi_h = psi_h;
    let fraction = out.boundary_fraction(ALARM_ZONE);
    if fraction > cfg.boundary_alarm {
        return Err(DynamicsError::BoundaryContamination {
            fraction,
            threshold: cfg.boundary_alarm,
        });
    }
    Ok(out)
}

/// Exact evolution of the discretized periodic Hamiltonian through the Bloch
/// eigenbasis; unitary to round-off, no time-step error.
pub fn propagate_free(
    state: &StateVector,
    basis: &BlochBasis,
    t: f64,
) -> Result<StateVector, DynamicsError> {
    if state.grid().n_points() != basis.context().grid().n_points() {
        return Err(DynamicsError::ContextMismatch);
    }
    Ok(basis.evolve(state, t))
}

/// Wavepacket construction parameters.
#[derive(Debug, Clone)]
pub struct WavepacketSpec {
    pub band: i32,
    pub k0: f64,
    pub sigma_k: f64,
    /// Required sign of the group velocity over the support (+1 or -1).
    pub velocity_sign: f64,
    /// Energy window the packet must live in.
    pub window: (f64, f64),
    /// Desired center position (a lattice translation phase).
    pub center: f64,
}

/// Diagnostics of a constructed packet.
#[derive(Debug, Clone)]
pub struct WavepacketReport {
    pub mean_energy: f64,
    pub mean_velocity: f64,
    /// Coefficient mass with band energy outside the window (after truncation).
    pub leakage: f64,
    /// Number of fibers carrying the packet.
    pub support: usize,
}

/// Build a normalized Gaussian packet on one labeled band: coefficients
/// `exp(-(k - k0)^2 / (2 sigma_k^2))` truncated at `4 sigma_k` (distances on
/// the circle), with the translation phase `exp(-i k x0)`. Fails if the band
/// energy leaves the window on the support, or if the group velocity changes
/// sign or loses the requested sign there (which happens exactly when the
/// support crosses a threshold).
pub fn make_wavepacket(
    basis: &BlochBasis,
    spec: &WavepacketSpec,
) -> Result<(StateVector, WavepacketReport), DynamicsError> {
    let band = basis
        .band(spec.band)
        .ok_or_else(|| DynamicsError::WindowViolation(format!("no band labeled {}", spec.band)))?;
    let zone = 2.0 * std::f64::consts::PI / basis.period();
    let wrap = |d: f64| {
        let mut x = d.rem_euclid(zone);
        if x > 0.5 * zone {
            x -= zone;
        }
        x
    };
    let probe = bloch_analyze(basis, &StateVector::zeros(basis.context().clone()))?;
    let mut expansion = BlochExpansion::zero_like(&probe);
    let slot = expansion.labels.iter().position(|&l| l == spec.band).unwrap();

    let mut support = 0usize;
    let mut mean_energy = 0.0;
    let mut mean_velocity = 0.0;
    let mut mass = 0.0;
    let mut leakage = 0.0;
    for (j, &k) in basis.momenta().iter().enumerate() {
        let d = wrap(k - spec.k0);
        if d.abs() > 4.0 * spec.sigma_k {
            continue;
        }
        let (lambda, velocity) = basis.band_sample(band, j);
        if velocity * spec.velocity_sign <= 0.0 {
            return Err(DynamicsError::WindowViolation(format!(
                "group velocity {velocity:.3e} at k = {k:.4} loses the requested sign \
                 (support touches a threshold)"
            )));
        }
        let g = (-d * d / (2.0 * spec.sigma_k * spec.sigma_k)).exp();
        let phase = Complex64::from_polar(g, -k * spec.center);
        expansion.coeffs[slot][j] = phase;
        support += 1;
        let m = g * g;
        mass += m;
        mean_energy += m * lambda;
        mean_velocity += m * velocity;
        if lambda < spec.window.0 || lambda > spec.window.1 {
            leakage += m;
        }
    }
    if support < 3 {
        return Err(DynamicsError::WindowViolation(
            "support holds fewer than 3 fibers; widen sigma_k or the domain".into(),
        ));
    }
    if leakage > 0.0 {
        return Err(DynamicsError::WindowViolation(format!(
            "band energy leaves the window on the support (mass fraction {:.2e})",
            leakage / mass
        )));
    }
    mean_energy /= mass;
    mean_velocity /= mass;

    let mut state = bloch_synthesize(basis, &expansion)?;
    let norm = state.weighted_norm();
    state.scale(Complex64::new(1.0 / norm, 0.0));
    Ok((state, WavepacketReport { mean_energy, mean_velocity, leakage, support }))
}
