//! Transfer-matrix reference for piecewise-constant media without coupling.
//!
//! For `chi = 0` the field pair `(phi_E, phi_H)` propagates across one layer
//! of index `n = sqrt(eps mu)` and admittance `q = sqrt(eps/mu)` by a unimodular
//! 2x2 matrix; the trace of the one-period product gives the dispersion relation
//! `cos(k p) = tr T(lambda) / 2`. Everything here is closed-form and independent
//! of the plane-wave machinery, which makes it usable as a cross-check.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("lambda = {lambda} lies in a spectral gap of the incident side")]
    GapOnEitherSide { lambda: f64 },
    #[error("stack layers must have positive thickness, permittivity, and permeability")]
    InvalidStack,
}

/// One layer of a chi = 0 stack.
#[derive(Debug, Clone, Copy)]
pub struct StackLayer {
    pub thickness: f64,
    pub eps: f64,
    pub mu: f64,
}

impl StackLayer {
    /// Refractive index `sqrt(eps mu)`.
    pub fn index(&self) -> f64 {
        (self.eps * self.mu).sqrt()
    }

    /// Admittance `sqrt(eps / mu)`.
    pub fn admittance(&self) -> f64 {
        (self.eps / self.mu).sqrt()
    }
}

/// A periodic layered stack with `chi = 0`.
#[derive(Debug, Clone)]
pub struct LayerStack {
    layers: Vec<StackLayer>,
    period: f64,
}

impl LayerStack {
    pub fn new(layers: Vec<StackLayer>) -> Result<Self, OracleError> {
        if layers.is_empty()
            || layers.iter().any(|l| l.thickness <= 0.0 || l.eps <= 0.0 || l.mu <= 0.0)
        {
            return Err(OracleError::InvalidStack);
        }
        let period = layers.iter().map(|l| l.thickness).sum();
        Ok(Self { layers, period })
    }

    /// The standard test cell: d = (1.0, 0.5), eps = (1, 4), mu = 1.
    pub fn stack_a() -> Self {
        Self::new(vec![
            StackLayer { thickness: 1.0, eps: 1.0, mu: 1.0 },
            StackLayer { thickness: 0.5, eps: 4.0, mu: 1.0 },
        ])
        .expect("stack A is valid")
    }

    /// Homogeneous medium as a single-layer stack.
    pub fn uniform(eps: f64, mu: f64, period: f64) -> Self {
        Self::new(vec![StackLayer { thickness: period, eps, mu }]).expect("uniform stack")
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn layers(&self) -> &[StackLayer] {
        &self.layers
    }
}

/// 2x2 complex matrix propagating `(phi_E, phi_H)` across one period.
#[derive(Debug, Clone, Copy)]
pub struct TransferMatrix {
    pub m: [[Complex64; 2]; 2],
}

impl TransferMatrix {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self { m: [[one, zero], [zero, one]] }
    }

    pub fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    fn mul(&self, rhs: &Self) -> Self {
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = self.m[i][0] * rhs.m[0][j] + self.m[i][1] * rhs.m[1][j];
            }
        }
        Self { m: out }
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }
}

/// Propagation matrix of a single homogeneous layer at frequency `lambda`:
/// `[[cos d, i sin d / q], [i q sin d, cos d]]` with `d = lambda n thickness`.
fn layer_matrix(layer: &StackLayer, lambda: f64) -> TransferMatrix {
    let delta = lambda * layer.index() * layer.thickness;
    let q = layer.admittance();
    let (s, c) = delta.sin_cos();
    TransferMatrix {
        m: [
            [Complex64::new(c, 0.0), Complex64::new(0.0, s / q)],
            [Complex64::new(0.0, q * s), Complex64::new(c, 0.0)],
        ],
    }
}

/// Monodromy of one period: the product of the layer matrices, mapping field
/// values at the left cell edge to the right cell edge (the first layer acts
/// first, i.e. sits rightmost in the product).
pub fn layer_monodromy(stack: &LayerStack, lambda: f64) -> TransferMatrix {
    let mut acc = TransferMatrix::identity();
    for layer in stack.layers() {
        acc = layer_matrix(layer, lambda).mul(&acc);
    }
    acc
}

/// Classification of a frequency by the one-period trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dispersion {
    /// Propagating: quasi-momentum `k in [0, pi/p]` (the `+-k` branch pair).
    Band { k: f64 },
    /// Evanescent: magnitude of the decaying Bloch multiplier per period, < 1.
    Gap { decay: f64 },
}

/// Dispersion at `lambda`: band with `k = arccos(tr T / 2) / p`, or gap with
/// the decaying Bloch factor `|c| - sqrt(c^2 - 1)`.
pub fn dispersion_oracle(stack: &LayerStack, lambda: f64) -> Dispersion {
    let c = 0.5 * layer_monodromy(stack, lambda).trace().re;
    if c.abs() <= 1.0 {
        Dispersion::Band { k: c.acos() / stack.period() }
    } else {
        let a = c.abs();
        Dispersion::Gap { decay: a - (a * a - 1.0).sqrt() }
    }
}

/// A band-edge (or band-tangency) frequency.
#[derive(Debug, Clone, Copy)]
pub struct GapEdge {
    pub lambda: f64,
    /// `false` for a genuine crossing of `|tr T / 2| = 1` (open gap edge),
    /// `true` for a tangency (touching bands, zero-width gap).
    pub tangency: bool,
}

/// Frequencies in `window` where `|tr T(lambda) / 2| = 1`, found by a dense
/// scan of `g = |c| - 1` with bisection refinement of sign crossings to 1e-10.
/// Local maxima of `g` that reach zero without crossing are flagged tangencies.
pub fn gap_edges(stack: &LayerStack, window: (f64, f64), scan_points: usize) -> Vec<GapEdge> {
    let (a, b) = window;
    let n = scan_points.max(64);
    let g = |lambda: f64| 0.5 * layer_monodromy(stack, lambda).trace().re.abs() - 1.0;
    let step = (b - a) / n as f64;
    let mut edges: Vec<GapEdge> = Vec::new();
    let mut prev_x = a;
    let mut prev_g = g(a);
    for i in 1..=n {
        let x = a + i as f64 * step;
        let gx = g(x);
        if prev_g == 0.0 {
            edges.push(GapEdge { lambda: prev_x, tangency: false });
        } else if prev_g * gx < 0.0 {
            let (mut lo, mut hi) = (prev_x, x);
            let mut glo = prev_g;
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                let gm = g(mid);
                if glo * gm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            edges.push(GapEdge { lambda: 0.5 * (lo + hi), tangency: false });
        }
        prev_x = x;
        prev_g = gx;
    }
    // tangencies: local maxima of g reaching 0 from below without sign change
    for i in 1..n {
        let x0 = a + (i - 1) as f64 * step;
        let x1 = a + i as f64 * step;
        let x2 = a + (i + 1) as f64 * step;
        let (g0, g1, g2) = (g(x0), g(x1), g(x2));
        // the grid maximum sits O(step^2) below an exact touching point, so
        // pre-filter loosely and let the refinement decide
        if g1 >= g0 && g1 >= g2 && g1 < 0.0 && g1 > -1e-3 {
            let lam = golden_max(&g, x0, x2);
            if g(lam) > -1e-10 && !edges.iter().any(|e| (e.lambda - lam).abs() < 10.0 * step) {
                edges.push(GapEdge { lambda: lam, tangency: true });
            }
        }
    }
    edges.sort_by(|p, q| p.lambda.partial_cmp(&q.lambda).unwrap());
    edges.dedup_by(|p, q| (p.lambda - q.lambda).abs() < 1e-9);
    edges
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// One side of a single-interface scattering problem.
#[derive(Debug, Clone)]
pub enum ScatterSide {
    Uniform { eps: f64, mu: f64 },
    Stack(LayerStack),
}

/// Rightward and leftward propagating (or decaying) mode of one side,
/// normalized with unit E-component where possible.
struct SideModes {
    /// (phi_E, phi_H) of the mode carrying flux to the right (or decaying to the right).
    forward: [Complex64; 2],
    /// Mode carrying flux to the left (or decaying to the left).
    backward: [Complex64; 2],
    /// Rightward energy flux `Re(phi_E^* phi_H)` of `forward` (0 in a gap).
    forward_flux: f64,
    /// Decaying Bloch multiplier magnitude when the side is gapped.
    decay: Option<f64>,
}

fn side_modes(side: &ScatterSide, lambda: f64) -> SideModes {
    match side {
        ScatterSide::Uniform { eps, mu } => {
            let q = (eps / mu).sqrt();
            let one = Complex64::new(1.0, 0.0);
            SideModes {
                forward: [one, Complex64::new(q, 0.0)],
                backward: [one, Complex64::new(-q, 0.0)],
                forward_flux: q,
                decay: None,
            }
        }
        ScatterSide::Stack(stack) => {
            let t = layer_monodromy(stack, lambda);
            // eigenvalues of the unimodular monodromy: e^{+-ikp} or real pair
            let c = 0.5 * t.trace();
            let disc = (c * c - Complex64::new(1.0, 0.0)).sqrt();
            let (m1, m2) = (c + disc, c - disc);
            let eigvec = |m: Complex64| -> [Complex64; 2] {
                // (T - m) v = 0; use the larger row for stability
                let r1 = [t.m[0][0] - m, t.m[0][1]];
                let r2 = [t.m[1][0], t.m[1][1] - m];
                let n1 = r1[0].norm_sqr() + r1[1].norm_sqr();
                let n2 = r2[0].norm_sqr() + r2[1].norm_sqr();
                let v = if n1 >= n2 { [r1[1], -r1[0]] } else { [r2[1], -r2[0]] };
                let scale = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
                [v[0] / scale, v[1] / scale]
            };
            let flux = |v: &[Complex64; 2]| (v[0].conj() * v[1]).re;
            let in_band = c.re.abs() <= 1.0 && c.im.abs() < 1e-12;
            if in_band {
                let (v1, v2) = (eigvec(m1), eigvec(m2));
                let (f1, f2) = (flux(&v1), flux(&v2));
                // pick by sign of the carried flux
                let (fw, bw, ffw) = if f1 >= f2 { (v1, v2, f1) } else { (v2, v1, f2) };
                SideModes { forward: fw, backward: bw, forward_flux: ffw, decay: None }
            } else {
                // gap: real multipliers, one decaying to the right (|m| < 1)
                let (md, mg) = if m1.norm() < m2.norm() { (m1, m2) } else { (m2, m1) };
                SideModes {
                    forward: eigvec(md),
                    backward: eigvec(mg),
                    forward_flux: 0.0,
                    decay: Some(md.norm()),
                }
            }
        }
    }
}

/// Result of the single-interface match at `x = 0`.
#[derive(Debug, Clone)]
pub struct OracleScatter {
    pub r: Complex64,
    pub t: Complex64,
    pub reflection: f64,
    pub transmission: f64,
    /// `|R + T - 1|`, zero when both sides propagate.
    pub flux_defect: f64,
    /// Decaying Bloch factor of the transmitted side when it is gapped.
    pub transmitted_decay: Option<f64>,
}

/// Match Bloch or plane-wave solutions across a single interface at `x = 0`
/// by continuity of `(phi_E, phi_H)`. Requires `lambda` inside a band of the
/// incident (left) side; a gapped right side yields total reflection with the
/// decaying Bloch factor reported.
pub fn oracle_scatter(
    left: &ScatterSide,
    right: &ScatterSide,
    lambda: f64,
) -> Result<OracleScatter, OracleError> {
    let lm = side_modes(left, lambda);
    if lm.decay.is_some() || lm.forward_flux <= 0.0 {
        return Err(OracleError::GapOnEitherSide { lambda });
    }
    let rm = side_modes(right, lambda);
    // incident + r * backward = t * forward_right at x = 0 (both components)
    // solve [backward_left, -forward_right] [r, t]^T = -incident
    let a = [[lm.backward[0], -rm.forward[0]], [lm.backward[1], -rm.forward[1]]];
    let rhs = [-lm.forward[0], -lm.forward[1]];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let r = (rhs[0] * a[1][1] - a[0][1] * rhs[1]) / det;
    let t = (a[0][0] * rhs[1] - rhs[0] * a[1][0]) / det;
    let reflection = r.norm_sqr(); // same medium, same flux scale
    let transmission = t.norm_sqr() * rm.forward_flux / lm.forward_flux;
    let flux_defect = (reflection + transmission - 1.0).abs();
    Ok(OracleScatter {
        r,
        t,
        reflection,
        transmission,
        flux_defect,
        transmitted_decay: rm.decay,
    })
}

/// Closed-form gap edges of stack A in `(0, pi)`: `arcsin(2 sqrt(2) / 3)` and
/// `pi - arcsin(2 sqrt(2) / 3)`.
pub fn stack_a_gap_edges() -> (f64, f64) {
    let s = (2.0 * 2.0_f64.sqrt() / 3.0).asin();
    (s, std::f64::consts::PI - s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_free_layer_is_rotation() {
        let stack = LayerStack::uniform(1.0, 1.0, 1.0);
        let lambda = 0.7;
        let t = layer_monodromy(&stack, lambda);
        assert!((t.m[0][0].re - lambda.cos()).abs() < 1e-15);
        assert!((t.m[0][1].im - lambda.sin()).abs() < 1e-15);
        assert!((t.m[1][0].im - lambda.sin()).abs() < 1e-15);
    }

    #[test]
    fn zero_frequency_monodromy_is_identity() {
        let t = layer_monodromy(&LayerStack::stack_a(), 0.0);
        assert!((t.m[0][0].re - 1.0).abs() < 1e-15 && t.m[0][1].norm() < 1e-15);
        assert!((t.m[1][1].re - 1.0).abs() < 1e-15 && t.m[1][0].norm() < 1e-15);
    }

    #[test]
    fn stack_a_trace_closed_form() {
        // c(lambda) = 1 - (9/4) sin^2(lambda)
        let stack = LayerStack::stack_a();
        for lambda in [0.3, 0.9, 1.2309594, 1.7, 2.5] {
            let c = 0.5 * layer_monodromy(&stack, lambda).trace().re;
            let closed = 1.0 - 2.25 * lambda.sin().powi(2);
            assert!((c - closed).abs() < 1e-12, "lambda = {lambda}");
        }
        // gap edge: trace = -2 at the first gap edge
        let (e1, _) = stack_a_gap_edges();
        let tr = layer_monodromy(&stack, e1).trace().re;
        assert!((tr + 2.0).abs() < 1e-9);
    }

    #[test]
    fn unimodular_for_random_frequencies() {
        let stack = LayerStack::stack_a();
        for i in 0..200 {
            let lambda = 0.013 + 0.02 * i as f64;
            let d = layer_monodromy(&stack, lambda).det();
            assert!((d - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn long_wavelength_effective_index() {
        // k ~ sqrt(2) lambda for stack A as lambda -> 0
        let stack = LayerStack::stack_a();
        let lambda = 1e-4;
        match dispersion_oracle(&stack, lambda) {
            Dispersion::Band { k } => {
                assert!((k / lambda - 2f64.sqrt()).abs() < 1e-4);
            }
            _ => panic!("long wavelength must propagate"),
        }
    }

    #[test]
    fn gap_interior_detected() {
        match dispersion_oracle(&LayerStack::stack_a(), 1.5) {
            Dispersion::Gap { decay } => assert!(decay > 0.0 && decay < 1.0),
            _ => panic!("lambda = 1.5 lies in the first gap"),
        }
    }

    #[test]
    fn stack_a_gap_edges_found() {
        let edges = gap_edges(&LayerStack::stack_a(), (0.5, 2.5), 4000);
        let crossing: Vec<f64> =
            edges.iter().filter(|e| !e.tangency).map(|e| e.lambda).collect();
        let (e1, e2) = stack_a_gap_edges();
        assert_eq!(crossing.len(), 2, "edges: {crossing:?}");
        assert!((crossing[0] - e1).abs() < 1e-9);
        assert!((crossing[1] - e2).abs() < 1e-9);
    }

    #[test]
    fn homogeneous_stack_reports_only_tangencies() {
        let edges = gap_edges(&LayerStack::uniform(1.0, 1.0, 1.0), (0.5, 7.0), 4000);
        assert!(!edges.is_empty());
        assert!(edges.iter().all(|e| e.tangency));
        // tangency points sit at lambda p in pi Z
        for e in &edges {
            let m = e.lambda / std::f64::consts::PI;
            assert!((m - m.round()).abs() < 1e-4, "lambda = {}", e.lambda);
        }
    }

    #[test]
    fn thickness_scaling_halves_gap_edges() {
        let doubled = LayerStack::new(vec![
            StackLayer { thickness: 2.0, eps: 1.0, mu: 1.0 },
            StackLayer { thickness: 1.0, eps: 4.0, mu: 1.0 },
        ])
        .unwrap();
        let base = gap_edges(&LayerStack::stack_a(), (0.5, 2.5), 4000);
        let scaled = gap_edges(&doubled, (0.25, 1.25), 4000);
        let b: Vec<f64> = base.iter().filter(|e| !e.tangency).map(|e| e.lambda).collect();
        let s: Vec<f64> = scaled.iter().filter(|e| !e.tangency).map(|e| e.lambda).collect();
        assert_eq!(b.len(), s.len());
        for (x, y) in b.iter().zip(&s) {
            assert!((x - 2.0 * y).abs() < 1e-8);
        }
    }

    #[test]
    fn identical_sides_pass_through() {
        let side = ScatterSide::Uniform { eps: 1.0, mu: 1.0 };
        let out = oracle_scatter(&side, &side, 0.8).unwrap();
        assert!(out.r.norm() < 1e-14);
        assert!((out.t - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn fresnel_normal_incidence() {
        let left = ScatterSide::Uniform { eps: 1.0, mu: 1.0 };
        let right = ScatterSide::Uniform { eps: 4.0, mu: 1.0 };
        let out = oracle_scatter(&left, &right, 1.0).unwrap();
        assert!((out.reflection - 1.0 / 9.0).abs() < 1e-12);
        assert!((out.transmission - 8.0 / 9.0).abs() < 1e-12);
        assert!(out.flux_defect < 1e-12);
    }

    #[test]
    fn reciprocity_of_transmission() {
        let a = ScatterSide::Stack(LayerStack::stack_a());
        let b = ScatterSide::Uniform { eps: 2.0, mu: 1.0 };
        let lambda = 0.8; // in a band of both
        let ab = oracle_scatter(&a, &b, lambda).unwrap();
        let ba = oracle_scatter(&b, &a, lambda).unwrap();
        assert!((ab.transmission - ba.transmission).abs() < 1e-10);
        assert!(ab.flux_defect < 1e-10 && ba.flux_defect < 1e-10);
    }

    #[test]
    fn gap_on_the_transmitted_side_reflects_totally() {
        let left = ScatterSide::Uniform { eps: 1.0, mu: 1.0 };
        let right = ScatterSide::Stack(LayerStack::stack_a());
        let out = oracle_scatter(&left, &right, 1.5).unwrap();
        assert!((out.reflection - 1.0).abs() < 1e-10);
        assert!(out.transmission.abs() < 1e-12);
        let decay = out.transmitted_decay.unwrap();
        assert!(decay > 0.0 && decay < 1.0);
    }

    #[test]
    fn gap_on_the_incident_side_is_an_error() {
        let left = ScatterSide::Stack(LayerStack::stack_a());
        let right = ScatterSide::Uniform { eps: 1.0, mu: 1.0 };
        assert!(matches!(
            oracle_scatter(&left, &right, 1.5),
            Err(OracleError::GapOnEitherSide { .. })
        ));
    }
}
