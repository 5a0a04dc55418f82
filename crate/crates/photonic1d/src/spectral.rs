//! Spectral bookkeeping for the periodic media and the coupled system:
//! thresholds (critical values of the bands), band/gap interval assembly,
//! commutator (Mourre) constants on threshold-free windows, and the
//! imaginary-momentum certificate ruling out flat bands. Interface-state
//! search for junction scenes lives here too, on top of the real-space
//! discretization.

use serde::Serialize;
use thiserror::Error;

use crate::bloch::{BandStructure, BlochError};
use crate::linalg;
use crate::media::Medium;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("spectrum reports cover different windows: {0:?} vs {1:?}")]
    WindowMismatch((f64, f64), (f64, f64)),
    #[error("window [{a}, {b}] touches the threshold {threshold} (margin {margin:.1e})")]
    WindowTouchesThreshold { a: f64, b: f64, threshold: f64, margin: f64 },
    #[error("fiber at i rho = i{rho} is numerically singular")]
    SingularFiber { rho: f64 },
    #[error("window [{a}, {b}] does not lie in a common spectral gap")]
    NoCommonGap { a: f64, b: f64 },
    #[error("eigenvalue iteration failed to converge: {0}")]
    ConvergenceFailure(String),
    #[error(transparent)]
    Bloch(#[from] BlochError),
}

/// Default margin around thresholds for window-validity checks (ten times the
/// threshold root tolerance).
pub const THRESHOLD_MARGIN: f64 = 1e-8;

/// Default root tolerance on |lambda'| at a reported threshold.
pub const THRESHOLD_TOL: f64 = 1e-9;

/// One critical value of a band.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThresholdEntry {
    pub lambda: f64,
    pub band: i32,
    pub k: f64,
    /// |lambda''| at the critical point, from a 5-point stencil.
    pub curvature: f64,
}

/// The critical values of the tracked bands, sorted by energy.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdSet {
    pub entries: Vec<ThresholdEntry>,
    pub tol: f64,
}

impl ThresholdSet {
    /// Distance from the interval `[a, b]` to the nearest threshold
    /// (zero if one lies inside).
    pub fn distance_to(&self, a: f64, b: f64) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                if e.lambda < a {
                    a - e.lambda
                } else if e.lambda > b {
                    e.lambda - b
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Threshold values inside `[a, b]`.
    pub fn inside(&self, a: f64, b: f64) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).filter(|l| (a..=b).contains(l)).collect()
    }
}

/// Locate the zeros of the group velocity of every tracked band: bracketed
/// sign changes on the grid are refined by bisection until the k-bracket is
/// below 1e-10, and the zone center and zone edges are probed directly (the
/// symmetry-forced extrema produce no sign change to bracket).
pub fn find_thresholds(bs: &BandStructure, tol: f64) -> Result<ThresholdSet, SpectralError> {
    let kgrid = bs.kgrid();
    let edge = std::f64::consts::PI / bs.family().period();
    let mut entries: Vec<ThresholdEntry> = Vec::new();

    // thresholds form a set of energies: symmetric partners attain the same
    // value at mirrored (band, k) pairs and are recorded once
    let mut push = |entries: &mut Vec<ThresholdEntry>, lambda: f64, band: i32, k: f64, curvature: f64| {
        let dup = entries.iter().any(|e: &ThresholdEntry| (e.lambda - lambda).abs() < 1e-8);
        if !dup {
            entries.push(ThresholdEntry { lambda, band, k, curvature });
        }
    };

    for band in bs.bands() {
        // interior sign changes of the velocity
        for i in 1..kgrid.len() {
            let (va, vb) = (band.velocities[i - 1], band.velocities[i]);
            if va == 0.0 || va * vb >= 0.0 {
                continue;
            }
            let (mut lo, mut hi) = (kgrid[i - 1], kgrid[i]);
            let mut v_lo = va;
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                let vm = bs.eval_band(band.label, mid)?.velocity;
                if v_lo * vm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    v_lo = vm;
                }
            }
            let k_root = 0.5 * (lo + hi);
            let sample = bs.eval_band(band.label, k_root)?;
            if sample.velocity.abs() < tol {
                let curv = band_curvature(bs, band.label, k_root)?;
                push(&mut entries, sample.lambda, band.label, k_root, curv);
            }
        }
        // symmetry-forced candidates: zone center and both zone edges
        for k_probe in [0.0, -edge, edge] {
            let idx = kgrid
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - k_probe).abs().partial_cmp(&(b.1 - k_probe).abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            let (lambda, velocity) = if (kgrid[idx] - k_probe).abs() < 1e-12 {
                (band.values[idx], band.velocities[idx])
            } else {
                let s = bs.eval_band(band.label, k_probe)?;
                (s.lambda, s.velocity)
            };
            if velocity.abs() < tol {
                let curv = band_curvature(bs, band.label, k_probe)?;
                push(&mut entries, lambda, band.label, k_probe, curv);
            }
        }
    }
    entries.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
    Ok(ThresholdSet { entries, tol })
}

/// |lambda''| from a centered 5-point stencil of branch-resolved evaluations.
fn band_curvature(bs: &BandStructure, label: i32, k: f64) -> Result<f64, SpectralError> {
    let h = 1e-3;
    let f = |dk: f64| bs.eval_band(label, k + dk).map(|s| s.lambda);
    let (m2, m1, p1, p2) = (f(-2.0 * h)?, f(-h)?, f(h)?, f(2.0 * h)?);
    let lam0 = bs.eval_band(label, k)?.lambda;
    let second = (-m2 + 16.0 * m1 - 30.0 * lam0 + 16.0 * p1 - p2) / (12.0 * h * h);
    Ok(second.abs())
}

/// Band intervals of one medium on a spectral window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MediumSpectrum {
    pub window: (f64, f64),
    /// Merged band intervals clipped to the window.
    pub bands: Vec<(f64, f64)>,
    /// Gaps: the complement of the bands within the window.
    pub gaps: Vec<(f64, f64)>,
}

/// Endpoint merge tolerance for interval bookkeeping.
const INTERVAL_TOL: f64 = 1e-9;

/// Per-band ranges `[min_k lambda, max_k lambda]`, sharpened by the refined
/// threshold values (band extrema are critical values), merged and clipped to
/// the window.
pub fn spectrum_of_medium(
    bs: &BandStructure,
    thresholds: &ThresholdSet,
    window: (f64, f64),
) -> MediumSpectrum {
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for band in bs.bands() {
        let mut lo = band.min();
        let mut hi = band.max();
        for e in &thresholds.entries {
            if e.band == band.label {
                lo = lo.min(e.lambda);
                hi = hi.max(e.lambda);
            }
        }
        intervals.push((lo, hi));
    }
    let bands = merge_clip(&intervals, window);
    let gaps = complement(&bands, window);
    MediumSpectrum { window, bands, gaps }
}

fn merge_clip(intervals: &[(f64, f64)], window: (f64, f64)) -> Vec<(f64, f64)> {
    let mut clipped: Vec<(f64, f64)> = intervals
        .iter()
        .filter_map(|&(a, b)| {
            let lo = a.max(window.0);
            let hi = b.min(window.1);
            (hi > lo).then_some((lo, hi))
        })
        .collect();
    clipped.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for iv in clipped {
        match merged.last_mut() {
            Some(last) if iv.0 <= last.1 + INTERVAL_TOL => last.1 = last.1.max(iv.1),
            _ => merged.push(iv),
        }
    }
    merged
}

fn complement(bands: &[(f64, f64)], window: (f64, f64)) -> Vec<(f64, f64)> {
    let mut gaps = Vec::new();
    let mut cursor = window.0;
    for &(a, b) in bands {
        if a > cursor + INTERVAL_TOL {
            gaps.push((cursor, a));
        }
        cursor = cursor.max(b);
    }
    if window.1 > cursor + INTERVAL_TOL {
        gaps.push((cursor, window.1));
    }
    gaps
}

/// Essential spectrum of the coupled system: the union of the two bulk
/// spectra, plus the common gaps where junction-localized eigenvalues may sit.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub window: (f64, f64),
    pub left: MediumSpectrum,
    pub right: MediumSpectrum,
    /// Essential spectrum of the coupled operator: union of the bulk spectra.
    pub union_bands: Vec<(f64, f64)>,
    /// Intersection of the two gap sets.
    pub common_gaps: Vec<(f64, f64)>,
}

pub fn essential_spectrum_union(
    left: MediumSpectrum,
    right: MediumSpectrum,
) -> Result<SpectrumReport, SpectralError> {
    if (left.window.0 - right.window.0).abs() > 1e-12
        || (left.window.1 - right.window.1).abs() > 1e-12
    {
        return Err(SpectralError::WindowMismatch(left.window, right.window));
    }
    let window = left.window;
    let mut all = left.bands.clone();
    all.extend(right.bands.iter().cloned());
    let union_bands = merge_clip(&all, window);
    let common_gaps = complement(&union_bands, window);
    Ok(SpectrumReport { window, left, right, union_bands, common_gaps })
}

/// Commutator constant of a threshold-free window.
#[derive(Debug, Clone, Serialize)]
pub struct MourreReport {
    pub a: f64,
    pub b: f64,
    /// Bands whose range meets the window.
    pub bands: Vec<i32>,
    /// `min |lambda'_n(k)|^2` over band points inside the window.
    pub c_i: f64,
    pub band_min: i32,
    pub k_min: f64,
}

/// The commutator lower bound `c_I = min |lambda'_n(k)|^2` over all tracked
/// band points with `lambda_n(k)` in the window. Grid candidates are refined:
/// window-boundary crossings by bisection on `lambda`, interior velocity
/// minima by golden-section. Errors if the window comes within `margin` of a
/// threshold (the positivity hypothesis fails there).
pub fn mourre_constant(
    bs: &BandStructure,
    thresholds: &ThresholdSet,
    window: (f64, f64),
    margin: f64,
) -> Result<MourreReport, SpectralError> {
    let (a, b) = window;
    assert!(a < b, "window must be nonempty");
    if thresholds.distance_to(a, b) < margin {
        let threshold = thresholds
            .entries
            .iter()
            .min_by(|x, y| {
                let dx = (if x.lambda < a { a - x.lambda } else { x.lambda - b }).max(0.0);
                let dy = (if y.lambda < a { a - y.lambda } else { y.lambda - b }).max(0.0);
                dx.partial_cmp(&dy).unwrap()
            })
            .map(|e| e.lambda)
            .unwrap_or(f64::NAN);
        return Err(SpectralError::WindowTouchesThreshold { a, b, threshold, margin });
    }

    let kgrid = bs.kgrid();
    let mut best: Option<(f64, i32, f64)> = None; // (|v|^2, band, k)
    let mut bands_in = Vec::new();
    fn consider(v2: f64, band: i32, k: f64, best: &mut Option<(f64, i32, f64)>) {
        if best.map_or(true, |(cur, _, _)| v2 < cur) {
            *best = Some((v2, band, k));
        }
    }

    for band in bs.bands() {
        let inside: Vec<usize> =
            (0..kgrid.len()).filter(|&i| (a..=b).contains(&band.values[i])).collect();
        let crosses = (0..kgrid.len() - 1).any(|i| {
            let (x, y) = (band.values[i], band.values[i + 1]);
            (x - a) * (y - a) < 0.0 || (x - b) * (y - b) < 0.0
        });
        if inside.is_empty() && !crosses {
            continue;
        }
        bands_in.push(band.label);

        for &i in &inside {
            consider(band.velocities[i].powi(2), band.label, kgrid[i], &mut best);
        }
        // boundary crossings: solve lambda(k) = a or b, evaluate |v|^2 there
        for i in 0..kgrid.len() - 1 {
            for boundary in [a, b] {
                let (fa, fb) = (band.values[i] - boundary, band.values[i + 1] - boundary);
                if fa == 0.0 || fa * fb >= 0.0 {
                    continue;
                }
                let (mut lo, mut hi) = (kgrid[i], kgrid[i + 1]);
                let mut f_lo = fa;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let fm = bs.eval_band(band.label, mid)?.lambda - boundary;
                    if f_lo * fm <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        f_lo = fm;
                    }
                    if hi - lo < 1e-12 {
                        break;
                    }
                }
                let k_star = 0.5 * (lo + hi);
                let v = bs.eval_band(band.label, k_star)?.velocity;
                consider(v * v, band.label, k_star, &mut best);
            }
        }
        // interior minima of |v|^2 among in-window grid points
        for w in inside.windows(3) {
            let (i0, i1, i2) = (w[0], w[1], w[2]);
            if i1 != i0 + 1 || i2 != i1 + 1 {
                continue;
            }
            let g = |i: usize| band.velocities[i].powi(2);
            if g(i1) <= g(i0) && g(i1) <= g(i2) {
                let (mut lo, mut hi) = (kgrid[i0], kgrid[i2]);
                let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
                let mut x1 = hi - inv_phi * (hi - lo);
                let mut x2 = lo + inv_phi * (hi - lo);
                let mut f1 = bs.eval_band(band.label, x1)?.velocity.powi(2);
                let mut f2 = bs.eval_band(band.label, x2)?.velocity.powi(2);
                for _ in 0..60 {
                    if f1 > f2 {
                        lo = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = lo + inv_phi * (hi - lo);
                        f2 = bs.eval_band(band.label, x2)?.velocity.powi(2);
                    } else {
                        hi = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = hi - inv_phi * (hi - lo);
                        f1 = bs.eval_band(band.label, x1)?.velocity.powi(2);
                    }
                    if hi - lo < 1e-10 {
                        break;
                    }
                }
                let k_star = 0.5 * (lo + hi);
                let s = bs.eval_band(band.label, k_star)?;
                if (a..=b).contains(&s.lambda) {
                    consider(s.velocity.powi(2), band.label, k_star, &mut best);
                }
            }
        }
    }

    let (c_i, band_min, k_min) = best.ok_or(SpectralError::ConvergenceFailure(
        "no band point falls inside the window".into(),
    ))?;
    Ok(MourreReport { a, b, bands: bands_in, c_i, band_min, k_min })
}

/// The imaginary-momentum certificate: resolvent norms of the fiber at
/// `k = i rho` and their log-log decay.
#[derive(Debug, Clone, Serialize)]
pub struct FlatBandCertificate {
    pub rho: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

impl FlatBandCertificate {
    pub fn strictly_decreasing(&self) -> bool {
        self.norms.windows(2).all(|w| w[1] < w[0])
    }
}

/// Assemble the fiber at imaginary quasi-momentum `i rho` (in physical
/// coordinates) and report `||M(i rho)^{-1}||` in the weighted geometry,
/// i.e. the reciprocal smallest singular value of `S^dagger (D(0) + i rho
/// (dD/dk)) S`, together with a least-squares log-log fit. Decay of these
/// norms rules out flat bands.
pub fn flat_band_certificate(
    medium: &Medium,
    n_modes: usize,
    rhos: &[f64],
) -> Result<FlatBandCertificate, SpectralError> {
    assert!(
        rhos.windows(2).all(|w| w[0] < w[1]) && rhos.first().is_some_and(|r| *r > 0.0),
        "rho samples must be positive increasing"
    );
    let family = crate::bloch::FiberFamily::physical(medium, n_modes)?;
    let mut norms = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let b = family.reduced_matrix_imag(rho);
        let sigma_min = linalg::smallest_singular_value(&b);
        if sigma_min <= f64::EPSILON * linalg::largest_singular_value(&b) {
            return Err(SpectralError::SingularFiber { rho });
        }
        norms.push(1.0 / sigma_min);
    }
    let pts: Vec<(f64, f64)> = rhos.iter().zip(&norms).map(|(r, n)| (r.ln(), n.ln())).collect();
    let (slope, intercept) = least_squares(&pts);
    Ok(FlatBandCertificate { rho: rhos.to_vec(), norms, slope, intercept })
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope, (sy - slope * sx) / n)
}
