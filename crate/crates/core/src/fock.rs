//! Fock-basis spectra of the quartic family.
//!
//! The Hamiltonian is represented in the number basis of a reference
//! harmonic oscillator with basis frequency `ω_b`. `q` is tridiagonal with
//! `⟨n−1|q|n⟩ = √(ħn/(2ω_b))`; `q²`, `q⁴`, `p²` are formed as products in a
//! padded basis (size + 8) and truncated back so every retained entry is
//! exact. `H` then has bandwidth 4 and commutes with parity, so the even and
//! odd Fock sectors are diagonalized separately and merged; eigenvectors
//! carry exact zeros on the opposite-parity components.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::model::SystemParams;
use crate::{Error, Result};

const PAD: usize = 8;
/// Basis growth used by the convergence count in [`eigensolve`].
const CONVERGENCE_STEP: usize = 50;

/// Truncated Fock basis: dimension and reference frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub size: usize,
    pub omega_b: f64,
}

impl BasisSpec {
    pub fn new(size: usize, omega_b: f64) -> Result<Self> {
        if size < 8 {
            return Err(Error::Usage(format!("basis size must be at least 8, got {size}")));
        }
        if !(omega_b.is_finite() && omega_b > 0.0) {
            return Err(Error::Usage(format!("basis frequency must be positive, got {omega_b}")));
        }
        Ok(Self { size, omega_b })
    }

    /// Basis at the default frequency [`default_omega`] for these parameters.
    pub fn with_default_omega(size: usize, params: &SystemParams) -> Result<Self> {
        Self::new(size, default_omega(params))
    }
}

/// Default basis frequency. For `k ≥ 0` this is the positive root of
/// `ω³ − kω − λħ/4 = 0` (the variational optimum of a Gaussian ground
/// state); for `k < 0` it is the small-oscillation frequency `√(−2k)` at
/// the well minima. Any positive frequency yields the same converged
/// spectrum; this choice just keeps the required basis size small.
pub fn default_omega(params: &SystemParams) -> f64 {
    let k = params.k;
    if k < 0.0 {
        return (-2.0 * k).sqrt();
    }
    let c = params.lambda * params.hbar / 4.0;
    let f = |w: f64| w * w * w - k * w - c;
    // Root lies above both √k and c^(1/3); expand to bracket, then bisect
    // with Newton polish.
    let mut lo = k.sqrt().max(c.cbrt());
    let mut hi = lo.max(1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    if f(lo) > 0.0 {
        lo = 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mut w = 0.5 * (lo + hi);
    for _ in 0..4 {
        w -= f(w) / (3.0 * w * w - k);
    }
    w
}

/// Position/momentum operator blocks on the truncated basis, all exact.
#[derive(Debug, Clone)]
pub struct Operators {
    pub q: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    pub q4: DMatrix<f64>,
    pub p2: DMatrix<f64>,
}

/// Builds `q`, `q²`, `q⁴`, `p²` on the truncated basis. Products are taken
/// in the padded basis so every retained entry agrees with the infinite
/// matrix product.
pub fn build_operators(basis: &BasisSpec, params: &SystemParams) -> Operators {
    let n = basis.size;
    let np = n + PAD;
    let scale_q = (params.hbar / (2.0 * basis.omega_b)).sqrt();
    let scale_p = (params.hbar * basis.omega_b / 2.0).sqrt();

    let mut q = DMatrix::<f64>::zeros(np, np);
    // K with p = iK: K is real antisymmetric.
    let mut kmat = DMatrix::<f64>::zeros(np, np);
    for m in 1..np {
        let r = (m as f64).sqrt();
        q[(m - 1, m)] = scale_q * r;
        q[(m, m - 1)] = scale_q * r;
        kmat[(m, m - 1)] = scale_p * r;
        kmat[(m - 1, m)] = -scale_p * r;
    }

    let q2 = &q * &q;
    let q4 = &q2 * &q2;
    let p2 = -(&kmat * &kmat);

    let trunc = |m: &DMatrix<f64>| m.view((0, 0), (n, n)).into_owned();
    Operators { q: trunc(&q), q2: trunc(&q2), q4: trunc(&q4), p2: trunc(&p2) }
}

/// `H = p²/2 + (k/2) q² + (λ/24) q⁴` on the truncated basis; symmetric with
/// bandwidth 4.
pub fn build_hamiltonian(basis: &BasisSpec, params: &SystemParams) -> DMatrix<f64> {
    let ops = build_operators(basis, params);
    0.5 * &ops.p2 + (0.5 * params.k) * &ops.q2 + (params.lambda / 24.0) * &ops.q4
}

/// Parity sector of an eigenvector (which Fock sublattice it lives on).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

/// Spectrum of one diagonalization: energies ascending, eigenvector columns
/// orthonormal, and the number of leading eigenvalues that are stable
/// against growing the basis.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub energies: Vec<f64>,
    /// Column `m` is the eigenvector of `energies[m]` in the Fock basis.
    pub vectors: DMatrix<f64>,
    pub parities: Vec<Parity>,
    pub n_converged: usize,
}

/// Knobs for [`eigensolve`]: relative eigenvalue tolerance for the
/// convergence count, and how many converged states the caller requires.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tolerance: f64,
    pub requested: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tolerance: 1e-9, requested: 0 }
    }
}

fn solve_sorted(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>, Vec<Parity>) {
    let n = h.nrows();
    let n_even = n.div_ceil(2);
    let n_odd = n / 2;

    let mut he = DMatrix::<f64>::zeros(n_even, n_even);
    for a in 0..n_even {
        for b in 0..n_even {
            he[(a, b)] = h[(2 * a, 2 * b)];
        }
    }
    let mut ho = DMatrix::<f64>::zeros(n_odd, n_odd);
    for a in 0..n_odd {
        for b in 0..n_odd {
            ho[(a, b)] = h[(2 * a + 1, 2 * b + 1)];
        }
    }

    let ee = SymmetricEigen::new(he);
    let eo = SymmetricEigen::new(ho);

    let mut order: Vec<(f64, Parity, usize)> = Vec::with_capacity(n);
    for i in 0..n_even {
        order.push((ee.eigenvalues[i], Parity::Even, i));
    }
    for i in 0..n_odd {
        order.push((eo.eigenvalues[i], Parity::Odd, i));
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut energies = Vec::with_capacity(n);
    let mut parities = Vec::with_capacity(n);
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, (e, par, idx)) in order.into_iter().enumerate() {
        energies.push(e);
        parities.push(par);
        let (block, offset) = match par {
            Parity::Even => (&ee.eigenvectors, 0),
            Parity::Odd => (&eo.eigenvectors, 1),
        };
        for a in 0..block.nrows() {
            vectors[(2 * a + offset, col)] = block[(a, idx)];
        }
        canonicalize_sign(&mut vectors, col);
    }
    (energies, vectors, parities)
}

/// Fixes the sign so the largest-|component| entry is positive (first such
/// entry on ties).
fn canonicalize_sign(vectors: &mut DMatrix<f64>, col: usize) {
    let mut best = 0;
    let mut best_abs = 0.0;
    for i in 0..vectors.nrows() {
        let a = vectors[(i, col)].abs();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if vectors[(best, col)] < 0.0 {
        for i in 0..vectors.nrows() {
            vectors[(i, col)] = -vectors[(i, col)];
        }
    }
}

/// Diagonalizes `h` (which must be `build_hamiltonian(basis, params)`), then
/// repeats at `size + 50` with the same `ω_b` and counts the leading
/// eigenvalues whose relative change is below `tolerance`. Errors if fewer
/// than `requested` states are converged.
pub fn eigensolve(
    h: &DMatrix<f64>,
    basis: &BasisSpec,
    params: &SystemParams,
    opts: &SolveOptions,
) -> Result<SpectralResult> {
    if h.nrows() != basis.size || h.ncols() != basis.size {
        return Err(Error::Usage(format!(
            "hamiltonian is {}x{} but basis size is {}",
            h.nrows(),
            h.ncols(),
            basis.size
        )));
    }
    let (energies, vectors, parities) = solve_sorted(h);

    let big = BasisSpec { size: basis.size + CONVERGENCE_STEP, omega_b: basis.omega_b };
    let h_big = build_hamiltonian(&big, params);
    let (energies_big, _, _) = solve_sorted(&h_big);

    // Relative change with a floor of ħω_b so an accidental zero eigenvalue
    // cannot wreck the count.
    let floor = params.hbar * basis.omega_b;
    let mut n_converged = 0;
    for m in 0..energies.len() {
        let scale = energies_big[m].abs().max(floor);
        if (energies[m] - energies_big[m]).abs() < opts.tolerance * scale {
            n_converged = m + 1;
        } else {
            break;
        }
    }

    if n_converged < opts.requested {
        return Err(Error::Convergence(format!(
            "only {} of {} requested eigenvalues converged at basis size {} (tol {:.1e})",
            n_converged, opts.requested, basis.size, opts.tolerance
        )));
    }

    Ok(SpectralResult { energies, vectors, parities, n_converged })
}

/// Convenience driver: grows the basis geometrically from `start_size` until
/// `requested` states converge or `max_size` is exceeded.
pub fn converged_spectrum(
    params: &SystemParams,
    start_size: usize,
    max_size: usize,
    opts: &SolveOptions,
) -> Result<(BasisSpec, SpectralResult)> {
    let mut size = start_size.max(8);
    loop {
        let basis = BasisSpec::with_default_omega(size, params)?;
        let h = build_hamiltonian(&basis, params);
        match eigensolve(&h, &basis, params, opts) {
            Ok(res) => return Ok((basis, res)),
            Err(Error::Convergence(msg)) => {
                if size >= max_size {
                    return Err(Error::Convergence(format!(
                        "basis cap {max_size} reached: {msg}"
                    )));
                }
                size = (size * 3 / 2).min(max_size);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Gap below which a neighboring pair counts as a quasi-degenerate doublet,
/// relative to the first even-sector excitation `E₂ − E₀`.
pub const DOUBLET_GAP_FRACTION: f64 = 1e-6;

/// Indices `m` such that `(E_m, E_{m+1})` form a quasi-degenerate doublet.
pub fn doublet_indices(energies: &[f64]) -> Vec<usize> {
    if energies.len() < 3 {
        return Vec::new();
    }
    let scale = (energies[2] - energies[0]).abs();
    (0..energies.len() - 1)
        .filter(|&m| (energies[m + 1] - energies[m]).abs() < DOUBLET_GAP_FRACTION * scale)
        .collect()
}

/// Ground-state probability density `|Ψ₀(q)|²` on the given grid, using the
/// stable normalized Hermite-function recurrence
/// `φ_{l+1}(ξ) = √(2/(l+1)) ξ φ_l − √(l/(l+1)) φ_{l−1}`.
///
/// Errors if the trapezoid normalization over the grid differs from 1 by
/// more than 1e−6 (grid too short or too coarse).
pub fn ground_density(
    result: &SpectralResult,
    basis: &BasisSpec,
    params: &SystemParams,
    q_grid: &[f64],
) -> Result<Vec<f64>> {
    if q_grid.len() < 2 {
        return Err(Error::Grid("density grid needs at least two points".into()));
    }
    let n = basis.size;
    let coeff = result.vectors.column(0);
    let a = (basis.omega_b / params.hbar).sqrt();
    let norm0 = (basis.omega_b / (std::f64::consts::PI * params.hbar)).powf(0.25);

    let mut density = Vec::with_capacity(q_grid.len());
    for &q in q_grid {
        let xi = a * q;
        let mut phi_prev = 0.0;
        let mut phi = norm0 * (-0.5 * xi * xi).exp();
        let mut psi = coeff[0] * phi;
        for l in 0..n - 1 {
            let lf = l as f64;
            let next = (2.0 / (lf + 1.0)).sqrt() * xi * phi - (lf / (lf + 1.0)).sqrt() * phi_prev;
            phi_prev = phi;
            phi = next;
            psi += coeff[l + 1] * phi;
        }
        density.push(psi * psi);
    }

    let mut mass = 0.0;
    for i in 0..q_grid.len() - 1 {
        mass += 0.5 * (density[i] + density[i + 1]) * (q_grid[i + 1] - q_grid[i]);
    }
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::Grid(format!(
            "density grid captures mass {mass:.9}, expected 1 within 1e-6"
        )));
    }
    Ok(density)
}

/// Local maxima of a sampled density, with 3-point quadratic refinement of
/// each location. Maxima below 10⁻⁶ of the global peak are dropped: the
/// far tail of a truncated-basis density carries noise-level wiggles that
/// would otherwise register as structure.
pub fn density_maxima(q_grid: &[f64], density: &[f64]) -> Vec<f64> {
    let peak = density.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-6 * peak;
    let mut out = Vec::new();
    for i in 1..density.len() - 1 {
        if density[i] > floor && density[i] > density[i - 1] && density[i] > density[i + 1] {
            let h = q_grid[i + 1] - q_grid[i];
            let denom = density[i - 1] - 2.0 * density[i] + density[i + 1];
            let shift = if denom != 0.0 {
                0.5 * h * (density[i - 1] - density[i + 1]) / denom
            } else {
                0.0
            };
            out.push(q_grid[i] + shift);
        }
    }
    out
}

/// Result of [`bimodality_scan`]: the first scanned `k` at which the ground
/// density developed two maxima, and the first at which the central density
/// fell an order of magnitude below the peak (wells effectively
/// separated).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BimodalityOnsets {
    pub two_maxima_k: Option<f64>,
    pub separated_k: Option<f64>,
}

/// Central-dip fraction defining "separated" wells: the midpoint density
/// has dropped an order of magnitude below the peaks.
pub const SEPARATION_DIP: f64 = 0.1;

/// Scans `k` downward from `k_start` to `k_end` (step `−|k_step|`) at fixed
/// `lambda`, watching the ground density for the onset of bimodality.
pub fn bimodality_scan(
    lambda: f64,
    hbar: f64,
    k_start: f64,
    k_end: f64,
    k_step: f64,
    basis_size: usize,
) -> Result<BimodalityOnsets> {
    if k_end >= k_start {
        return Err(Error::Usage("bimodality scan requires k_end < k_start".into()));
    }
    let step = k_step.abs();
    if step <= 0.0 || !step.is_finite() {
        return Err(Error::Usage("bimodality scan requires a positive k step".into()));
    }

    let mut onsets = BimodalityOnsets { two_maxima_k: None, separated_k: None };
    let n_steps = ((k_start - k_end) / step).round() as usize;
    for i in 0..=n_steps {
        let k = k_start - i as f64 * step;
        let params = SystemParams::with_hbar(k, lambda, hbar)?;
        let (basis, result) =
            converged_spectrum(&params, basis_size, basis_size * 4, &SolveOptions {
                requested: 1,
                ..Default::default()
            })?;
        let halfwidth = well_extent(&params, &basis);
        let q_grid: Vec<f64> =
            (0..2001).map(|j| -halfwidth + j as f64 * (2.0 * halfwidth / 2000.0)).collect();
        let density = ground_density(&result, &basis, &params, &q_grid)?;

        let maxima = density_maxima(&q_grid, &density);
        if onsets.two_maxima_k.is_none() && maxima.len() >= 2 {
            onsets.two_maxima_k = Some(k);
        }
        let peak = density.iter().cloned().fold(0.0, f64::max);
        let center = density[q_grid.len() / 2];
        if onsets.separated_k.is_none() && center < SEPARATION_DIP * peak {
            onsets.separated_k = Some(k);
        }
        if onsets.two_maxima_k.is_some() && onsets.separated_k.is_some() {
            break;
        }
    }
    Ok(onsets)
}

/// Half-width of a q-grid that safely contains the ground-state mass.
pub fn well_extent(params: &SystemParams, basis: &BasisSpec) -> f64 {
    let core = if params.k < 0.0 { (-6.0 * params.k / params.lambda).sqrt() } else { 0.0 };
    core + 8.0 * (params.hbar / basis.omega_b).sqrt()
}
