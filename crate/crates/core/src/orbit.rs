//! Bound classical orbits, action-angle data, and the classical metric
//! tensor from time averages.
//!
//! For a bound orbit at energy `E` the turning points solve `V(q) = E`; with
//! `u = q²` this is a quadratic whose roots are taken in the cancellation-free
//! arrangement. The action and period integrals use the substitution
//! `q = c + r sin θ`, under which `E − V = (r cos θ)² h(q)` with `h` smooth
//! and positive, so the full-circle trapezoid rule converges spectrally:
//! `I = (1/2π) ∮ r² cos²θ √(2h) dθ`, `T = ∮ dθ/√(2h)`.
//!
//! `orbit_fourier` integrates Hamilton's equations over one period with an
//! adaptive Dormand–Prince 5(4) stepper landing exactly on `2^s` uniform
//! sample times, assigns angles `φ = ωt − π/2` (origin at the lower turning
//! point, so `q ∝ sin φ` at leading order), and extracts
//! `β_i^{(m)} = ⟨O_i e^{−imφ}⟩` by direct DFT. The classical metric is
//! `g_ij = Σ_{m≥1} 2 Re[β_i^{(m)} β_j^{(m)*}]/(mω)²`.

use num_complex::Complex64;

use crate::model::{SystemParams, Well};
use crate::qmt::MetricValue;
use crate::{Error, Result};

/// Default number of harmonics kept in Fourier extraction.
pub const DEFAULT_M_MAX: usize = 32;
/// Default log₂ of the per-period sample count.
pub const DEFAULT_LOG2_SAMPLES: u32 = 12;
/// Allowed relative energy drift per period for the orbit integrator.
pub const ENERGY_DRIFT_TOL: f64 = 1e-10;

/// `λ·u` values at the two quadratic roots of `V(q) = E` in `u = q²`,
/// arranged so neither expression cancels catastrophically anywhere in the
/// admissible energy range.
fn v_roots(params: &SystemParams, energy: f64) -> (f64, f64) {
    let k = params.k;
    let lam = params.lambda;
    let d = (0.25 * k * k + lam * energy / 6.0).sqrt();
    if k >= 0.0 {
        // E > 0: v₊ via the rationalized form, v₋ directly.
        (-12.0 * (0.5 * k + d), 2.0 * lam * energy / (d + 0.5 * k))
    } else {
        // −3k²/2λ < E < 0: both roots positive.
        (-2.0 * lam * energy / (d - 0.5 * k), 12.0 * (-0.5 * k + d))
    }
}

fn check_bound_energy(params: &SystemParams, energy: f64, well: Option<Well>) -> Result<()> {
    if params.k >= 0.0 {
        if energy <= 0.0 {
            return Err(Error::Domain(format!(
                "bound orbit for k ≥ 0 requires E > 0, got {energy}"
            )));
        }
        return Ok(());
    }
    if well.is_none() {
        return Err(Error::Usage("double well requires a well selector for k < 0".into()));
    }
    let barrier = params.barrier_height()?;
    if energy >= 0.0 || energy <= -barrier {
        return Err(Error::Domain(format!(
            "single-well orbit requires −{barrier} < E < 0, got {energy}"
        )));
    }
    Ok(())
}

/// Turning points `(q_lo, q_hi)` of the bound orbit at energy `E`. For
/// `k < 0` the `well` selector picks the branch strictly inside one well;
/// it is ignored for `k ≥ 0`. Closed-form roots polished by Newton to
/// 1e−12 relative.
pub fn turning_points(
    params: &SystemParams,
    energy: f64,
    well: Option<Well>,
) -> Result<(f64, f64)> {
    check_bound_energy(params, energy, well)?;
    let (v_lo, v_hi) = v_roots(params, energy);
    let polish = |mut x: f64| {
        for _ in 0..3 {
            let f = params.potential(x) - energy;
            let df = params.potential_deriv(x);
            if df != 0.0 {
                let step = f / df;
                if step.abs() <= 1e-6 * x.abs().max(1.0) {
                    x -= step;
                }
            }
        }
        x
    };
    if params.k >= 0.0 {
        let qp = polish((v_hi / params.lambda).sqrt());
        Ok((-qp, qp))
    } else {
        let q_inner = polish((v_lo / params.lambda).sqrt());
        let q_outer = polish((v_hi / params.lambda).sqrt());
        match well.unwrap() {
            Well::Right => Ok((q_inner, q_outer)),
            Well::Left => Ok((-q_outer, -q_inner)),
        }
    }
}

/// Smooth positive factor with `E − V(q) = (q − a)(b − q)·h(q)` on the
/// orbit interval `[a, b]`.
fn smooth_factor(params: &SystemParams, energy: f64, q: f64) -> f64 {
    let (v_lo, v_hi) = v_roots(params, energy);
    let lam = params.lambda;
    if params.k >= 0.0 {
        (lam * q * q - v_lo) / 24.0
    } else {
        let q_lo = (v_lo / lam).sqrt();
        let q_hi = (v_hi / lam).sqrt();
        // Same expression serves both wells: |q| + q_lo, |q| + q_hi.
        (lam / 24.0) * (q.abs() + q_lo) * (q.abs() + q_hi)
    }
}

/// Spectrally convergent full-circle trapezoid quadrature of a smooth
/// 2π-periodic integrand.
fn periodic_quadrature<F: Fn(f64) -> f64>(f: F) -> Result<f64> {
    let mut n = 64usize;
    let mut prev = f64::NAN;
    let mut stable = 0;
    loop {
        let dt = std::f64::consts::TAU / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            acc += f(i as f64 * dt);
        }
        let val = acc * dt;
        if prev.is_finite() {
            if (val - prev).abs() <= 1e-13 * val.abs().max(1e-300) {
                stable += 1;
                if stable >= 2 {
                    return Ok(val);
                }
            } else {
                stable = 0;
            }
        }
        prev = val;
        if n >= 1 << 16 {
            return Err(Error::Convergence(
                "periodic quadrature did not stabilize at 65536 nodes".into(),
            ));
        }
        n *= 2;
    }
}

/// Action `I(E) = (1/π) ∫ √(2(E − V)) dq` over the bound orbit.
pub fn action_of_energy(params: &SystemParams, energy: f64, well: Option<Well>) -> Result<f64> {
    let (a, b) = turning_points(params, energy, well)?;
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    periodic_quadrature(|theta| {
        let q = c + r * theta.sin();
        let cos = theta.cos();
        r * r * cos * cos * (2.0 * smooth_factor(params, energy, q)).sqrt()
    })
    .map(|v| v / std::f64::consts::TAU)
}

/// Period `T(E) = 2 ∫ dq / √(2(E − V))` over the bound orbit.
pub fn period_of_energy(params: &SystemParams, energy: f64, well: Option<Well>) -> Result<f64> {
    let (a, b) = turning_points(params, energy, well)?;
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    periodic_quadrature(|theta| {
        let q = c + r * theta.sin();
        1.0 / (2.0 * smooth_factor(params, energy, q)).sqrt()
    })
}

/// Inverts `I(E)` by bracketed Newton iteration (using `dI/dE = 1/ω`) to
/// 1e−13 relative in `E`.
pub fn energy_of_action(params: &SystemParams, action: f64, well: Option<Well>) -> Result<f64> {
    if !(action.is_finite() && action > 0.0) {
        return Err(Error::Domain(format!("action must be positive, got {action}")));
    }
    let (mut lo, mut hi) = if params.k >= 0.0 {
        let mut hi = (params.k.max(0.0).sqrt() * action).max(action).max(1e-12);
        let mut grow = 0;
        while action_of_energy(params, hi, well)? < action {
            hi *= 2.0;
            grow += 1;
            if grow > 200 {
                return Err(Error::Convergence("bracket expansion failed".into()));
            }
        }
        (0.0, hi)
    } else {
        let barrier = params.barrier_height()?;
        let hi = -barrier * 1e-9;
        if action_of_energy(params, hi, well)? < action {
            return Err(Error::Domain(format!(
                "action {action} exceeds the bound-orbit range of this well"
            )));
        }
        (-barrier, hi)
    };

    // Initial guess: harmonic about the relevant minimum.
    let (omega0, floor) = if params.k >= 0.0 {
        (params.k.max(0.0).sqrt(), 0.0)
    } else {
        ((-2.0 * params.k).sqrt(), -params.barrier_height()?)
    };
    let mut e = (floor + omega0 * action).clamp(
        lo + 0.25 * (hi - lo).min(1e-3 * (hi - lo)),
        hi - 1e-6 * (hi - lo),
    );
    let scale = (hi - lo).abs().max(action);

    for _ in 0..200 {
        let i_here = action_of_energy(params, e, well)?;
        if i_here < action {
            lo = e;
        } else {
            hi = e;
        }
        let omega = std::f64::consts::TAU / period_of_energy(params, e, well)?;
        let step = (i_here - action) * omega;
        let mut next = e - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let delta = (next - e).abs();
        e = next;
        if delta <= 1e-13 * e.abs().max(1e-3 * scale) {
            return Ok(e);
        }
    }
    Err(Error::Convergence(format!("energy_of_action stalled at E = {e}")))
}

/// `ω(I) = 2π / T(E(I))`.
pub fn omega_of_action(params: &SystemParams, action: f64, well: Option<Well>) -> Result<f64> {
    let e = energy_of_action(params, action, well)?;
    Ok(std::f64::consts::TAU / period_of_energy(params, e, well)?)
}

/// One integrated bound orbit sampled at uniform angle.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub energy: f64,
    pub action: f64,
    pub period: f64,
    pub omega: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    /// Position at angles `φ_j = −π/2 + 2πj/n`.
    pub q: Vec<f64>,
    /// Momentum at the same angles.
    pub p: Vec<f64>,
}

/// Fourier data of the deformation functions along one orbit:
/// `beta1[m] = ⟨(q²/2) e^{−imφ}⟩`, `beta2[m] = ⟨(q⁴/24) e^{−imφ}⟩` for
/// `m = 0..=m_max`.
#[derive(Debug, Clone)]
pub struct FourierData {
    pub action: f64,
    pub energy: f64,
    pub omega: f64,
    pub beta1: Vec<Complex64>,
    pub beta2: Vec<Complex64>,
}

const DP_C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

struct Dp45<'a> {
    params: &'a SystemParams,
    atol_q: f64,
    atol_p: f64,
    rtol: f64,
}

impl Dp45<'_> {
    fn rhs(&self, y: [f64; 2]) -> [f64; 2] {
        [y[1], -self.params.potential_deriv(y[0])]
    }

    /// One accepted adaptive step from `y` of at most `h_max`; returns
    /// `(y_next, h_taken, h_proposed_next)`.
    fn step(&self, y: [f64; 2], h_try: f64, h_max: f64) -> Result<([f64; 2], f64, f64)> {
        let mut h = h_try.min(h_max);
        for _ in 0..60 {
            let mut k = [[0.0f64; 2]; 7];
            k[0] = self.rhs(y);
            for stage in 0..6 {
                let mut ys = y;
                for comp in 0..2 {
                    let mut acc = 0.0;
                    for prev in 0..=stage {
                        acc += DP_A[stage][prev] * k[prev][comp];
                    }
                    ys[comp] += h * acc;
                }
                let _ = DP_C; // stage times unused: autonomous system
                k[stage + 1] = self.rhs(ys);
            }
            let y5 = {
                let mut out = y;
                for comp in 0..2 {
                    let mut acc = 0.0;
                    for stage in 0..6 {
                        acc += DP_A[5][stage] * k[stage][comp];
                    }
                    out[comp] += h * acc;
                }
                out
            };
            let mut err: f64 = 0.0;
            for comp in 0..2 {
                let mut e = 0.0;
                for stage in 0..7 {
                    e += DP_E[stage] * k[stage][comp];
                }
                e *= h;
                let atol = if comp == 0 { self.atol_q } else { self.atol_p };
                let sc = atol + self.rtol * y[comp].abs().max(y5[comp].abs());
                err = err.max((e / sc).abs());
            }
            if err <= 1.0 {
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                return Ok((y5, h, (h * grow).min(h_max)));
            }
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < 1e-16 * h_max {
                break;
            }
        }
        Err(Error::Convergence("orbit integrator step size collapsed".into()))
    }
}

/// Integrates one period of the orbit with action `I`, samples it at
/// `2^log2_samples` uniform angles, and extracts the Fourier coefficients of
/// `O₁ = q²/2` and `O₂ = q⁴/24` for `m = 0..=m_max`.
pub fn orbit_fourier(
    params: &SystemParams,
    action: f64,
    well: Option<Well>,
    m_max: usize,
    log2_samples: u32,
) -> Result<(Orbit, FourierData)> {
    if !(8..=16).contains(&log2_samples) {
        return Err(Error::Usage(format!(
            "log2_samples must lie in 8..=16, got {log2_samples}"
        )));
    }
    let n = 1usize << log2_samples;
    if m_max + 1 > n / 8 {
        return Err(Error::Usage(format!(
            "m_max = {m_max} too large for {n} samples (aliasing)"
        )));
    }

    let energy = energy_of_action(params, action, well)?;
    let (a, b) = turning_points(params, energy, well)?;
    let period = period_of_energy(params, energy, well)?;
    let omega = std::f64::consts::TAU / period;

    let q_scale = a.abs().max(b.abs());
    let p_scale = (2.0 * (energy - params.potential(0.5 * (a + b)))).abs().sqrt().max(1e-12);
    let stepper = Dp45 { params, atol_q: 1e-13 * q_scale, atol_p: 1e-13 * p_scale, rtol: 1e-12 };

    let dt = period / n as f64;
    let mut q = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    let mut y = [a, 0.0];
    let mut t = 0.0;
    let mut h_prop = dt;
    q.push(y[0]);
    p.push(y[1]);
    let e_tol = ENERGY_DRIFT_TOL * energy.abs().max(1.0);
    for j in 1..=n {
        let target = j as f64 * dt;
        while t < target - 1e-14 * period {
            let (y_next, h_taken, h_next) = stepper.step(y, h_prop, target - t)?;
            y = y_next;
            t += h_taken;
            h_prop = h_next;
        }
        let drift = (0.5 * y[1] * y[1] + params.potential(y[0]) - energy).abs();
        if drift > e_tol {
            return Err(Error::Convergence(format!(
                "energy drift {drift:.3e} exceeds {e_tol:.3e} during orbit integration"
            )));
        }
        if j < n {
            q.push(y[0]);
            p.push(y[1]);
        }
    }
    // Period closure: the integrated orbit must return to the lower turning
    // point; failure means T and the flow disagree.
    if (y[0] - a).abs() > 1e-7 * (b - a) || y[1].abs() > 1e-7 * p_scale {
        return Err(Error::Convergence(format!(
            "orbit failed to close after one period: Δq = {:.3e}, p = {:.3e}",
            y[0] - a,
            y[1]
        )));
    }

    let mut beta1 = Vec::with_capacity(m_max + 1);
    let mut beta2 = Vec::with_capacity(m_max + 1);
    let o1: Vec<f64> = q.iter().map(|&x| 0.5 * x * x).collect();
    let o2: Vec<f64> = q.iter().map(|&x| x.powi(4) / 24.0).collect();
    for m in 0..=m_max {
        let mut acc1 = Complex64::new(0.0, 0.0);
        let mut acc2 = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let phi = -std::f64::consts::FRAC_PI_2 + std::f64::consts::TAU * j as f64 / n as f64;
            let w = Complex64::from_polar(1.0, -(m as f64) * phi);
            acc1 += w * o1[j];
            acc2 += w * o2[j];
        }
        beta1.push(acc1 / n as f64);
        beta2.push(acc2 / n as f64);
    }

    Ok((
        Orbit { energy, action, period, omega, q_lo: a, q_hi: b, q, p },
        FourierData { action, energy, omega, beta1, beta2 },
    ))
}

/// Classical metric with a spectral-tail diagnostic (size of the last kept
/// harmonic relative to the first meaningful one).
#[derive(Debug, Clone)]
pub struct CmtReport {
    pub metric: MetricValue,
    pub tail: f64,
}

/// `g_ij = Σ_{m=1}^{M} 2 Re[β_i^{(m)} β_j^{(m)*}]/(m ω)²`.
pub fn cmt_numeric(fd: &FourierData) -> CmtReport {
    let mut metric = MetricValue::ZERO;
    let m_max = fd.beta1.len() - 1;
    for m in 1..=m_max {
        let w = 1.0 / (m as f64 * fd.omega).powi(2);
        let b1 = fd.beta1[m];
        let b2 = fd.beta2[m];
        metric.g11 += 2.0 * (b1 * b1.conj()).re * w;
        metric.g12 += 2.0 * (b1 * b2.conj()).re * w;
        metric.g22 += 2.0 * (b2 * b2.conj()).re * w;
    }
    let tail = if m_max >= 2 {
        let r1 = safe_ratio(fd.beta1[m_max].norm(), fd.beta1[2].norm());
        let r2 = safe_ratio(fd.beta2[m_max].norm(), fd.beta2[2].norm());
        r1.max(r2)
    } else {
        0.0
    };
    CmtReport { metric, tail }
}

fn safe_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_limit_action_and_period() {
        let params = SystemParams::new(1.0, 1e-12).unwrap();
        let (a, b) = turning_points(&params, 0.5, None).unwrap();
        assert_relative_eq!(a, -1.0, max_relative = 1e-9);
        assert_relative_eq!(b, 1.0, max_relative = 1e-9);
        assert_relative_eq!(action_of_energy(&params, 0.5, None).unwrap(), 0.5, max_relative = 1e-10);
        assert_relative_eq!(
            period_of_energy(&params, 0.5, None).unwrap(),
            std::f64::consts::TAU,
            max_relative = 1e-10
        );
    }

    #[test]
    fn first_order_frequency_shift() {
        // E(I) = √k·I + λI²/(16k) + O(λ²), ω = √k + λI/(8k) + O(λ²).
        let params = SystemParams::new(1.0, 0.2).unwrap();
        let e = energy_of_action(&params, 0.5, None).unwrap();
        assert_relative_eq!(e, 0.503125, max_relative = 2e-4);
        let w = omega_of_action(&params, 0.5, None).unwrap();
        assert_relative_eq!(w, 1.0125, max_relative = 5e-4);
    }

    #[test]
    fn action_energy_round_trip() {
        for (k, lam, well) in
            [(1.0, 0.3, None), (0.0, 0.5, None), (-1.0, 0.2, Some(Well::Right))]
        {
            let params = SystemParams::new(k, lam).unwrap();
            let e = energy_of_action(&params, 0.37, well).unwrap();
            let i_back = action_of_energy(&params, e, well).unwrap();
            assert_relative_eq!(i_back, 0.37, max_relative = 1e-12);
        }
    }

    #[test]
    fn omega_equals_de_di() {
        for (k, lam, well) in [(1.0, 0.2, None), (-1.0, 0.2, Some(Well::Left))] {
            let params = SystemParams::new(k, lam).unwrap();
            let h = 1e-5;
            let ep = energy_of_action(&params, 0.5 + h, well).unwrap();
            let em = energy_of_action(&params, 0.5 - h, well).unwrap();
            let w = omega_of_action(&params, 0.5, well).unwrap();
            assert_relative_eq!((ep - em) / (2.0 * h), w, max_relative = 1e-6);
        }
    }

    #[test]
    fn double_well_energy_window_enforced() {
        let params = SystemParams::new(-1.0, 0.2).unwrap();
        assert!(turning_points(&params, -8.0, Some(Well::Left)).is_err());
        assert!(turning_points(&params, 0.1, Some(Well::Left)).is_err());
        assert!(turning_points(&params, -1.0, None).is_err());
        let (a, b) = turning_points(&params, -1.0, Some(Well::Right)).unwrap();
        assert!(0.0 < a && a < 30.0f64.sqrt() && 30.0f64.sqrt() < b);
        let (al, bl) = turning_points(&params, -1.0, Some(Well::Left)).unwrap();
        assert_relative_eq!(al, -b, max_relative = 1e-14);
        assert_relative_eq!(bl, -a, max_relative = 1e-14);
    }

    #[test]
    fn harmonic_fourier_coefficients() {
        let params = SystemParams::new(1.0, 1e-10).unwrap();
        let (orbit, fd) = orbit_fourier(&params, 0.5, None, 8, 10).unwrap();
        assert_relative_eq!(orbit.omega, 1.0, max_relative = 1e-8);
        // q²/2 = (I/ω)(1 − cos 2φ)/2: β₁⁰ = I/2ω, β₁² = −I/4ω.
        assert_relative_eq!(fd.beta1[0].re, 0.25, max_relative = 1e-7);
        assert_relative_eq!(fd.beta1[2].re, -0.125, max_relative = 1e-7);
        // q⁴/24: β₂⁰ = I²/16, β₂² = −I²/24, β₂⁴ = I²/96 at k = 1.
        assert_relative_eq!(fd.beta2[0].re, 0.25 / 16.0, max_relative = 1e-6);
        assert_relative_eq!(fd.beta2[2].re, -0.25 / 24.0, max_relative = 1e-6);
        assert_relative_eq!(fd.beta2[4].re, 0.25 / 96.0, max_relative = 1e-6);
        for m in [1usize, 3, 5] {
            assert!(fd.beta1[m].norm() < 1e-10);
        }
        // Harmonic-limit metric: g11 = I²/(32k²)·(2/…) — direct value.
        let cmt = cmt_numeric(&fd).metric;
        assert_relative_eq!(cmt.g11, 2.0 * 0.125 * 0.125 / 4.0, max_relative = 1e-7);
    }

    #[test]
    fn even_odd_harmonics_real_imaginary() {
        let params = SystemParams::new(-1.0, 0.2).unwrap();
        let (_, fd) = orbit_fourier(&params, 0.5, Some(Well::Right), 12, 12).unwrap();
        let scale = fd.beta1.iter().map(|b| b.norm()).fold(0.0f64, f64::max);
        for m in 0..=12 {
            let b = fd.beta1[m];
            if m % 2 == 0 {
                assert!(b.im.abs() < 1e-9 * scale, "even m={m} should be real: {b}");
            } else {
                assert!(b.re.abs() < 1e-9 * scale, "odd m={m} should be imaginary: {b}");
            }
        }
        // Leading odd harmonic of q²/2 is positive imaginary for the left
        // well convention mirror: right well has negative-imaginary β₁⁽¹⁾.
        assert!(fd.beta1[1].im < 0.0);
    }

    #[test]
    fn left_right_wells_agree() {
        let params = SystemParams::new(-1.0, 0.2).unwrap();
        let (_, fl) = orbit_fourier(&params, 0.5, Some(Well::Left), 16, 12).unwrap();
        let (_, fr) = orbit_fourier(&params, 0.5, Some(Well::Right), 16, 12).unwrap();
        let ml = cmt_numeric(&fl).metric;
        let mr = cmt_numeric(&fr).metric;
        assert_relative_eq!(ml.g11, mr.g11, max_relative = 1e-10);
        assert_relative_eq!(ml.g12, mr.g12, max_relative = 1e-10);
        assert_relative_eq!(ml.g22, mr.g22, max_relative = 1e-10);
    }

    #[test]
    fn angle_origin_shift_leaves_metric_invariant() {
        let params = SystemParams::new(1.0, 0.3).unwrap();
        let (_, fd) = orbit_fourier(&params, 0.5, None, 16, 12).unwrap();
        let base = cmt_numeric(&fd).metric;
        let delta = 0.618;
        let shifted = FourierData {
            beta1: fd
                .beta1
                .iter()
                .enumerate()
                .map(|(m, b)| b * Complex64::from_polar(1.0, -(m as f64) * delta))
                .collect(),
            beta2: fd
                .beta2
                .iter()
                .enumerate()
                .map(|(m, b)| b * Complex64::from_polar(1.0, -(m as f64) * delta))
                .collect(),
            ..fd
        };
        let moved = cmt_numeric(&shifted).metric;
        assert_relative_eq!(base.g11, moved.g11, max_relative = 1e-14);
        assert_relative_eq!(base.g12, moved.g12, max_relative = 1e-14);
        assert_relative_eq!(base.g22, moved.g22, max_relative = 1e-14);
    }

    #[test]
    fn negative_harmonics_are_conjugates() {
        let params = SystemParams::new(-0.8, 0.25).unwrap();
        let (orbit, fd) = orbit_fourier(&params, 0.4, Some(Well::Right), 10, 12).unwrap();
        // Recompute β₁ at m = −3 directly from the samples.
        let n = orbit.q.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let phi = -std::f64::consts::FRAC_PI_2 + std::f64::consts::TAU * j as f64 / n as f64;
            acc += Complex64::from_polar(1.0, 3.0 * phi) * (0.5 * orbit.q[j] * orbit.q[j]);
        }
        let minus3 = acc / n as f64;
        let diff = (minus3 - fd.beta1[3].conj()).norm();
        assert!(diff <= 1e-10 * fd.beta1[3].norm().max(1e-30));
    }

    #[test]
    fn fourier_tail_is_negligible_at_defaults() {
        let params = SystemParams::new(1.0, 0.05).unwrap();
        let (_, fd) =
            orbit_fourier(&params, 0.5, None, DEFAULT_M_MAX, DEFAULT_LOG2_SAMPLES).unwrap();
        let report = cmt_numeric(&fd);
        assert!(report.tail < 1e-10, "tail {} too large", report.tail);
    }
}
