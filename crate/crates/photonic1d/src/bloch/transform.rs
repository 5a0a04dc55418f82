//! Discrete Bloch transform on commensurate grids.
//!
//! A periodic medium on a circle of `n_cells` cells block-diagonalizes the
//! discretized Hamiltonian into `n_cells` fibers indexed by the quasi-momenta
//! `k_j = 2 pi j / (n_cells p)` folded into the zone. Each fiber is a dense
//! `2 n_pc`-dimensional problem over one cell whose derivative carries the
//! canonical wavenumbers of the full grid (so the decomposition is exactly
//! similar to the real-space operator, not just approximately), reduced to a
//! Hermitian matrix by the pointwise Cholesky factor of the cell weight.
//! Analysis and synthesis are exact mutual inverses up to round-off, and the
//! coefficient l2 norm equals the weighted norm of the state (Parseval).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::BlochError;
use crate::dynamics::{StateVector, WeightContext};
use crate::fourier::{bin_frequencies, FftPair};
use crate::linalg;
use crate::mat2;
use crate::media::Medium;

/// One fiber of the grid-exact Bloch decomposition.
#[derive(Debug, Clone)]
pub struct GridFiber {
    pub k: f64,
    /// Eigenvalues ascending.
    pub values: Vec<f64>,
    /// Hellmann-Feynman velocities (gauge-fixed in degenerate clusters).
    pub velocities: Vec<f64>,
    /// Flat-orthonormal reduced eigenvectors (columns).
    vectors: DMatrix<Complex64>,
}

/// Reference to one labeled band of the grid decomposition.
#[derive(Debug, Clone, Copy)]
pub struct GridBandRef {
    pub label: i32,
    /// Slot index into the per-fiber column maps.
    slot: usize,
}

/// The grid-exact Bloch eigenbasis of one periodic medium on a commensurate
/// grid, with bands labeled by eigenvector continuity across the fibers.
pub struct BlochBasis {
    context: Arc<WeightContext>,
    period: f64,
    n_cells: usize,
    n_pc: usize,
    /// Fibers in ascending-k order.
    fibers: Vec<GridFiber>,
    /// Ascending fiber momenta.
    k_sorted: Vec<f64>,
    /// `cols[j][slot]` is the eigencolumn of band `slot` in fiber `j`.
    cols: Vec<Vec<usize>>,
    /// Signed band label per slot (by value at the largest k).
    labels: Vec<i32>,
    /// Pointwise Cholesky factors `g_m` with `w(theta_m) = g g^dagger`.
    g: Vec<mat2::Mat2>,
    g_inv: Vec<mat2::Mat2>,
    cell_fft: FftPair,
    /// Map from ascending order to DFT bin order of the fibers.
    bin_of_sorted: Vec<usize>,
}

impl BlochBasis {
    /// Build the basis of `medium` on the grid of `context`; the grid must
    /// hold an integer number of cells with an integer number of points each.
    pub fn new(context: Arc<WeightContext>, medium: &Medium) -> Result<Self, BlochError> {
        let grid = context.grid().clone();
        let period = medium.period();
        let (n_cells, n_pc) = grid.cells_of(period).ok_or(BlochError::IncommensurateDomain {
            domain: grid.length(),
            period,
        })?;
        let dim = 2 * n_pc;

        // pointwise factors of the first cell's weight samples
        let mut g = Vec::with_capacity(n_pc);
        let mut g_inv = Vec::with_capacity(n_pc);
        for m in 0..n_pc {
            let w = context.weight_at(m);
            let gm = mat2::cholesky(&w);
            g_inv.push(mat2::inverse(&gm));
            g.push(gm);
        }

        let swap = mat2::Mat2::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        );
        // velocity form, shared by all fibers: block-diagonal g^dagger swap g
        let mut vform = DMatrix::zeros(dim, dim);
        for m in 0..n_pc {
            let block = g[m].adjoint() * swap * g[m];
            for a in 0..2 {
                for b in 0..2 {
                    vform[(2 * m + a, 2 * m + b)] = block[(a, b)];
                }
            }
        }

        let n_x = n_cells * n_pc;
        let length = grid.length();
        let cell_bins = bin_frequencies(n_pc);
        let fiber_bins = bin_frequencies(n_cells);
        let cell_fft = FftPair::new(n_pc);

        // degeneracy tolerance from the resolved spectral width
        let kappa_max = std::f64::consts::PI / grid.h();
        let deg_tol = 1e-8 * kappa_max * context.c1().sqrt() + 1e-14;

        let mut fibers_by_bin: Vec<GridFiber> = Vec::with_capacity(n_cells);
        for &j in &fiber_bins {
            let k_j = 2.0 * std::f64::consts::PI * j as f64 / length;
            // canonical wavenumbers of the full grid folded into this fiber
            let kappas: Vec<f64> = cell_bins
                .iter()
                .map(|&m| {
                    let q = j + n_cells as i64 * m;
                    let half = n_x as i64 / 2;
                    let q_c = (q + half).rem_euclid(n_x as i64) - half;
                    2.0 * std::f64::consts::PI * q_c as f64 / length
                })
                .collect();
            // cell-space derivative: Toeplitz with this wavenumber symbol
            let mut symbol: Vec<Complex64> =
                kappas.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            cell_fft.inverse(&mut symbol); // t_d = (1/n) sum_m kappa_m e^{2 pi i m d / n}
            let mut hmat = DMatrix::zeros(dim, dim);
            for row in 0..n_pc {
                for col in 0..n_pc {
                    let d = (row as i64 - col as i64).rem_euclid(n_pc as i64) as usize;
                    let block = g[row].adjoint() * swap * g[col] * symbol[d];
                    for a in 0..2 {
                        for b in 0..2 {
                            hmat[(2 * row + a, 2 * col + b)] = block[(a, b)];
                        }
                    }
                }
            }
            let sym = (&hmat + hmat.adjoint()) * Complex64::new(0.5, 0.0);
            let (values, mut vectors) = linalg::eigh_ascending(&sym);
            let velocities = linalg::cluster_form_values(&vform, &values, &mut vectors, deg_tol);
            fibers_by_bin.push(GridFiber { k: k_j, values, velocities, vectors });
        }

        // ascending-k view and continuity labeling across fibers
        let mut order: Vec<usize> = (0..n_cells).collect();
        order.sort_by(|&a, &b| fibers_by_bin[a].k.partial_cmp(&fibers_by_bin[b].k).unwrap());
        let fibers: Vec<GridFiber> = order.iter().map(|&i| fibers_by_bin[i].clone()).collect();
        let k_sorted: Vec<f64> = fibers.iter().map(|f| f.k).collect();
        let bin_of_sorted = order;

        let mut cols: Vec<Vec<usize>> = Vec::with_capacity(n_cells);
        cols.push((0..dim).collect());
        for j in 1..n_cells {
            let prev = &fibers[j - 1];
            let next = &fibers[j];
            let prev_cols = cols[j - 1].clone();
            let mut assignment = vec![usize::MAX; dim];
            let mut taken = vec![false; dim];
            let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(dim * dim);
            for (slot, &pc) in prev_cols.iter().enumerate() {
                let pv = prev.vectors.column(pc);
                for nc in 0..dim {
                    let ov = pv.dotc(&next.vectors.column(nc)).norm();
                    pairs.push((ov, slot, nc));
                }
            }
            pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let mut filled = 0usize;
            for (_, slot, nc) in pairs {
                if assignment[slot] == usize::MAX && !taken[nc] {
                    assignment[slot] = nc;
                    taken[nc] = true;
                    filled += 1;
                    if filled == dim {
                        break;
                    }
                }
            }
            cols.push(assignment);
        }

        // continuity gauge: parallel-transport the eigenvector phases along
        // each band so synthesized superpositions have well-defined envelopes
        let mut fibers = fibers;
        for j in 1..n_cells {
            for slot in 0..dim {
                let prev = fibers[j - 1].vectors.column(cols[j - 1][slot]).clone_owned();
                let col = cols[j][slot];
                let ov = prev.dotc(&fibers[j].vectors.column(col).clone_owned());
                if ov.norm() > 1e-12 {
                    let rot = ov.conj() / ov.norm();
                    let rotated = fibers[j].vectors.column(col) * rot;
                    fibers[j].vectors.set_column(col, &rotated);
                }
            }
        }

        // labels from the values at the largest k
        let last = n_cells - 1;
        let end_vals: Vec<f64> =
            (0..dim).map(|slot| fibers[last].values[cols[last][slot]]).collect();
        let mut slot_order: Vec<usize> = (0..dim).collect();
        slot_order.sort_by(|&a, &b| end_vals[a].partial_cmp(&end_vals[b]).unwrap());
        let n_neg = end_vals.iter().filter(|&&v| v < 0.0).count();
        let mut labels = vec![0i32; dim];
        for (rank, &slot) in slot_order.iter().enumerate() {
            labels[slot] =
                if rank < n_neg { rank as i32 - n_neg as i32 } else { (rank - n_neg) as i32 + 1 };
        }

        Ok(Self {
            context,
            period,
            n_cells,
            n_pc,
            fibers,
            k_sorted,
            cols,
            labels,
            g,
            g_inv,
            cell_fft: FftPair::new(n_cells),
            bin_of_sorted,
        })
    }

    pub fn context(&self) -> &Arc<WeightContext> {
        &self.context
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Ascending fiber momenta.
    pub fn momenta(&self) -> &[f64] {
        &self.k_sorted
    }

    pub fn fiber(&self, j: usize) -> &GridFiber {
        &self.fibers[j]
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn band(&self, label: i32) -> Option<GridBandRef> {
        self.labels.iter().position(|&l| l == label).map(|slot| GridBandRef { label, slot })
    }

    /// Value and velocity of a labeled band in fiber `j`.
    pub fn band_sample(&self, band: GridBandRef, j: usize) -> (f64, f64) {
        let col = self.cols[j][band.slot];
        (self.fibers[j].values[col], self.fibers[j].velocities[col])
    }

    /// Largest |velocity| over all fibers and branches.
    pub fn max_velocity(&self) -> f64 {
        self.fibers
            .iter()
            .flat_map(|f| f.velocities.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Largest |eigenvalue| resolved on the grid.
    pub fn max_frequency(&self) -> f64 {
        self.fibers
            .iter()
            .flat_map(|f| f.values.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Fold the state into per-fiber reduced vectors, ascending-k order. The
    /// squared l2 norm over all fibers divided by `n_cells` equals the squared
    /// weighted norm of the state.
    fn fold(&self, state: &StateVector) -> Vec<DVector<Complex64>> {
        let grid = self.context.grid();
        let scale = grid.h().sqrt();
        let n_cells = self.n_cells;
        let n_pc = self.n_pc;
        let fiber_bins = bin_frequencies(n_cells);
        let mut per_bin: Vec<DVector<Complex64>> =
            (0..n_cells).map(|_| DVector::zeros(2 * n_pc)).collect();
        let mut buf_e = vec![Complex64::default(); n_cells];
        let mut buf_h = vec![Complex64::default(); n_cells];
        for m in 0..n_pc {
            for c in 0..n_cells {
                let i = c * n_pc + m;
                buf_e[c] = state.phi_e[i];
                buf_h[c] = state.phi_h[i];
            }
            self.cell_fft.forward(&mut buf_e);
            self.cell_fft.forward(&mut buf_h);
            let x0 = grid.x(m);
            for (bin, &fiber_bin) in fiber_bins.iter().enumerate() {
                let k_j = 2.0 * std::f64::consts::PI * fiber_bin as f64 / grid.length();
                let phase = Complex64::from_polar(scale, -k_j * x0);
                // reduced coordinates sqrt(h) g^{-1} u
                let u = nalgebra::Vector2::new(buf_e[bin] * phase, buf_h[bin] * phase);
                let v = self.g_inv[m] * u;
                per_bin[bin][2 * m] = v[0];
                per_bin[bin][2 * m + 1] = v[1];
            }
        }
        self.bin_of_sorted.iter().map(|&bin| per_bin[bin].clone()).collect()
    }

    /// Inverse of `fold`.
    fn unfold(&self, per_fiber: &[DVector<Complex64>]) -> StateVector {
        let grid = self.context.grid();
        let scale = 1.0 / grid.h().sqrt();
        let n_cells = self.n_cells;
        let n_pc = self.n_pc;
        let fiber_bins = bin_frequencies(n_cells);
        let mut per_bin: Vec<&DVector<Complex64>> = vec![&per_fiber[0]; n_cells];
        for (sorted, &bin) in self.bin_of_sorted.iter().enumerate() {
            per_bin[bin] = &per_fiber[sorted];
        }
        let mut state = StateVector::zeros(self.context.clone());
        let mut buf_e = vec![Complex64::default(); n_cells];
        let mut buf_h = vec![Complex64::default(); n_cells];
        for m in 0..n_pc {
            let x0 = grid.x(m);
            for (bin, &fiber_bin) in fiber_bins.iter().enumerate() {
                let k_j = 2.0 * std::f64::consts::PI * fiber_bin as f64 / grid.length();
                let phase = Complex64::from_polar(scale, k_j * x0);
                let v = nalgebra::Vector2::new(per_bin[bin][2 * m], per_bin[bin][2 * m + 1]);
                let u = self.g[m] * v;
                buf_e[bin] = u[0] * phase;
                buf_h[bin] = u[1] * phase;
            }
            // normalized inverse DFT supplies the 1/n_cells of the inversion formula
            self.cell_fft.inverse(&mut buf_e);
            self.cell_fft.inverse(&mut buf_h);
            for c in 0..n_cells {
                let i = c * n_pc + m;
                state.phi_e[i] = buf_e[c];
                state.phi_h[i] = buf_h[c];
            }
        }
        state
    }

    /// Exact evolution of the discretized periodic Hamiltonian: fold, rotate
    /// each eigencoefficient by `exp(-i lambda t)`, unfold.
    pub fn evolve(&self, state: &StateVector, t: f64) -> StateVector {
        let folded = self.fold(state);
        let rotated: Vec<DVector<Complex64>> = folded
            .iter()
            .zip(&self.fibers)
            .map(|(v, fiber)| {
                let coeff = fiber.vectors.adjoint() * v;
                let mut back: DVector<Complex64> = DVector::zeros(v.len());
                for (n, &lam) in fiber.values.iter().enumerate() {
                    let ph = Complex64::from_polar(1.0, -lam * t);
                    back += fiber.vectors.column(n) * (coeff[n] * ph);
                }
                back
            })
            .collect();
        self.unfold(&rotated)
    }
}

/// Band-resolved expansion coefficients `c_n(k_j)`.
#[derive(Debug, Clone)]
pub struct BlochExpansion {
    /// Ascending fiber momenta.
    pub momenta: Vec<f64>,
    /// Band labels, one per slot.
    pub labels: Vec<i32>,
    /// `coeffs[slot][j]`, normalized so the squared l2 norm equals the squared
    /// weighted norm of the state.
    pub coeffs: Vec<Vec<Complex64>>,
}

impl BlochExpansion {
    pub fn total_mass(&self) -> f64 {
        self.coeffs.iter().flatten().map(|c| c.norm_sqr()).sum()
    }

    pub fn band_mass(&self, label: i32) -> f64 {
        self.labels
            .iter()
            .position(|&l| l == label)
            .map(|slot| self.coeffs[slot].iter().map(|c| c.norm_sqr()).sum())
            .unwrap_or(0.0)
    }

    pub fn coeff(&self, label: i32, j: usize) -> Complex64 {
        self.labels
            .iter()
            .position(|&l| l == label)
            .map(|slot| self.coeffs[slot][j])
            .unwrap_or_default()
    }

    pub fn zero_like(other: &BlochExpansion) -> Self {
        Self {
            momenta: other.momenta.clone(),
            labels: other.labels.clone(),
            coeffs: vec![vec![Complex64::default(); other.momenta.len()]; other.labels.len()],
        }
    }
}

/// Project a state onto the labeled eigenbasis: `c_n(k_j) = <u_n, U_j>_h /
/// sqrt(n_cells)` in the weighted cell product. The state must live on the
/// basis grid (its weight context may differ, e.g. a junction state analyzed
/// against one bulk).
pub fn bloch_analyze(
    basis: &BlochBasis,
    state: &StateVector,
) -> Result<BlochExpansion, BlochError> {
    if state.grid().n_points() != basis.context.grid().n_points()
        || (state.grid().length() - basis.context.grid().length()).abs() > 1e-12
    {
        return Err(BlochError::IncommensurateDomain {
            domain: state.grid().length(),
            period: basis.period,
        });
    }
    let folded = basis.fold(state);
    let norm = 1.0 / (basis.n_cells as f64).sqrt();
    let dim = 2 * basis.n_pc;
    let mut coeffs = vec![vec![Complex64::default(); basis.n_cells]; dim];
    for (j, v) in folded.iter().enumerate() {
        let c = basis.fibers[j].vectors.adjoint() * v;
        for (slot, row) in coeffs.iter_mut().enumerate() {
            let col = basis.cols[j][slot];
            row[j] = c[col] * norm;
        }
    }
    Ok(BlochExpansion { momenta: basis.k_sorted.clone(), labels: basis.labels.clone(), coeffs })
}

/// Superpose eigenmodes with the given coefficients (inverse of
/// [`bloch_analyze`] on the commensurate grid).
pub fn bloch_synthesize(
    basis: &BlochBasis,
    expansion: &BlochExpansion,
) -> Result<StateVector, BlochError> {
    if expansion.momenta.len() != basis.n_cells || expansion.labels.len() != 2 * basis.n_pc {
        return Err(BlochError::IncommensurateDomain {
            domain: expansion.momenta.len() as f64,
            period: basis.n_cells as f64,
        });
    }
    let scale = (basis.n_cells as f64).sqrt();
    let dim = 2 * basis.n_pc;
    let per_fiber: Vec<DVector<Complex64>> = (0..basis.n_cells)
        .map(|j| {
            let mut v = DVector::zeros(dim);
            for slot in 0..dim {
                let c = expansion.coeffs[slot][j];
                if c != Complex64::default() {
                    let col = basis.cols[j][slot];
                    v += basis.fibers[j].vectors.column(col) * (c * scale);
                }
            }
            v
        })
        .collect();
    Ok(basis.unfold(&per_fiber))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{weighted_inner, Grid};
    use crate::media::{stack_a_profile, ConstitutiveProfile, Medium};
    use rand::{Rng, SeedableRng};

    fn identity_medium() -> Medium {
        Medium::new(
            ConstitutiveProfile::homogeneous(1.0, 1.0, Complex64::new(0.0, 0.0)).unwrap(),
            4,
        )
        .unwrap()
    }

    fn random_state(context: &Arc<WeightContext>, seed: u64) -> StateVector {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut s = StateVector::zeros(context.clone());
        for i in 0..context.grid().n_points() {
            s.phi_e[i] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            s.phi_h[i] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        s
    }

    #[test]
    fn identity_fiber_velocities_are_unit() {
        let grid = Grid::new(8.0, 128); // 16 cells of 8 points
        let medium = identity_medium();
        let ctx = WeightContext::for_medium(grid.clone(), &medium);
        let basis = BlochBasis::new(ctx, &medium).unwrap();
        for fiber in &basis.fibers {
            for v in &fiber.velocities {
                assert!((v.abs() - 1.0).abs() < 1e-9, "velocity {v}");
            }
        }
    }

    #[test]
    fn parseval_and_roundtrip_on_random_states() {
        let grid = Grid::new(12.0, 256); // 16 cells of period 1.5
        let medium = Medium::new(stack_a_profile(), 8).unwrap();
        let ctx = WeightContext::for_medium(grid.clone(), &medium);
        let basis = BlochBasis::new(ctx.clone(), &medium).unwrap();
        for seed in 0..3u64 {
            let state = random_state(&ctx, seed);
            let expansion = bloch_analyze(&basis, &state).unwrap();
            let mass = expansion.total_mass();
            let norm2 = weighted_inner(&state, &state).unwrap().re;
            assert!((mass - norm2).abs() < 1e-10 * norm2, "parseval: {mass} vs {norm2}");
            let back = bloch_synthesize(&basis, &expansion).unwrap();
            let mut diff = 0.0f64;
            for i in 0..grid.n_points() {
                diff = diff.max((back.phi_e[i] - state.phi_e[i]).norm());
                diff = diff.max((back.phi_h[i] - state.phi_h[i]).norm());
            }
            assert!(diff < 1e-10, "roundtrip error {diff}");
        }
    }

    #[test]
    fn single_mode_roundtrip_is_unit() {
        let grid = Grid::new(12.0, 256);
        let medium = Medium::new(stack_a_profile(), 8).unwrap();
        let ctx = WeightContext::for_medium(grid.clone(), &medium);
        let basis = BlochBasis::new(ctx, &medium).unwrap();
        let probe =
            bloch_analyze(&basis, &StateVector::zeros(basis.context().clone())).unwrap();
        let mut expansion = BlochExpansion::zero_like(&probe);
        let slot = expansion.labels.iter().position(|&l| l == 1).unwrap();
        expansion.coeffs[slot][5] = Complex64::new(1.0, 0.0);
        let state = bloch_synthesize(&basis, &expansion).unwrap();
        let norm2 = weighted_inner(&state, &state).unwrap().re;
        assert!((norm2 - 1.0).abs() < 1e-10);
        let back = bloch_analyze(&basis, &state).unwrap();
        assert!((back.coeff(1, 5).norm() - 1.0).abs() < 1e-10);
        assert!((back.total_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_state_has_zero_coefficients() {
        let grid = Grid::new(6.0, 128);
        let medium = Medium::new(stack_a_profile(), 8).unwrap();
        let ctx = WeightContext::for_medium(grid.clone(), &medium);
        let basis = BlochBasis::new(ctx.clone(), &medium).unwrap();
        let expansion = bloch_analyze(&basis, &StateVector::zeros(ctx)).unwrap();
        assert_eq!(expansion.total_mass(), 0.0);
    }

    #[test]
    fn incommensurate_domain_rejected() {
        let grid = Grid::new(5.0, 128); // length 10 is not a multiple of 1.5
        let medium = Medium::new(stack_a_profile(), 8).unwrap();
        let ctx = WeightContext::for_medium(grid.clone(), &medium);
        assert!(matches!(
            BlochBasis::new(ctx, &medium),
            Err(BlochError::IncommensurateDomain { .. })
        ));
    }

    #[test]
    fn free_evolution_is_exactly_unitary() {
        let grid = Grid::new(12.0, 256);
        let medium = Medium::new(stack_a_profile(), 8).unwrap();
        let ctx = WeightContext::for_medium(grid.clone(), &medium);
        let basis = BlochBasis::new(ctx.clone(), &medium).unwrap();
        let state = random_state(&ctx, 7);
        let n0 = weighted_inner(&state, &state).unwrap().re;
        let evolved = basis.evolve(&state, 37.5);
        let n1 = weighted_inner(&evolved, &evolved).unwrap().re;
        assert!((n0 - n1).abs() < 1e-10 * n0);
        // t = 0 is the identity up to the analysis/synthesis roundtrip
        let same = basis.evolve(&state, 0.0);
        for i in 0..grid.n_points() {
            assert!((same.phi_e[i] - state.phi_e[i]).norm() < 1e-10);
        }
    }
}
