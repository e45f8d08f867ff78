//! Ground-state quantum metric tensor over the parameter plane `(k, λ)`.
//!
//! With `Ô₁ = ∂H/∂k = q²/2` and `Ô₂ = ∂H/∂λ = q⁴/24`, the metric is the
//! second-order perturbative sum
//! `g_ij = Σ_{m≥1} B_i^{(m)} B_j^{(m)} / (E_m − E₀)²`,
//! `B_i^{(m)} = ⟨Ψ₀|Ô_i|Ψ_m⟩`,
//! which is cross-checked against the overlap (finite-difference) form
//! `g_ij = Re(⟨∂_iΨ₀|∂_jΨ₀⟩ − ⟨∂_iΨ₀|Ψ₀⟩⟨Ψ₀|∂_jΨ₀⟩)`.
//! The Hamiltonian family is real, so all matrix elements are real and the
//! antisymmetric (Berry curvature) part vanishes identically.

use serde::{Deserialize, Serialize};

use crate::fock::{build_hamiltonian, eigensolve, BasisSpec, Operators, SolveOptions, SpectralResult};
use crate::model::SystemParams;
use crate::{Error, Result};

/// Default number of excited states kept in the perturbative sum.
pub const DEFAULT_M_MAX: usize = 60;

/// Transition data feeding the perturbative sum: for `m = 1..=m_max`,
/// `b1[m−1] = ⟨Ψ₀|q²/2|Ψ_m⟩`, `b2[m−1] = ⟨Ψ₀|q⁴/24|Ψ_m⟩`, and
/// `gaps[m−1] = E_m − E₀`.
#[derive(Debug, Clone)]
pub struct TransitionData {
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub gaps: Vec<f64>,
}

/// One symmetric 2×2 metric value at a parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
}

impl MetricValue {
    pub const ZERO: MetricValue = MetricValue { g11: 0.0, g12: 0.0, g22: 0.0 };

    pub fn det(&self) -> f64 {
        self.g11 * self.g22 - self.g12 * self.g12
    }
}

/// Perturbative-sum output: the metric, the per-`m` contributions
/// `G^{(m)}_ij = B_i^{(m)} B_j^{(m)}/(E_m−E₀)²`, and a truncation-tail
/// diagnostic (largest ratio of the last nonzero contribution to the
/// accumulated component).
#[derive(Debug, Clone)]
pub struct QmtReport {
    pub metric: MetricValue,
    pub terms: Vec<MetricValue>,
    pub tail: f64,
}

/// Extracts `B_1`, `B_2` and gaps for `m = 1..=m_max` from a solved
/// spectrum. Requires `m_max < n_converged`. Eigenvector signs are
/// re-canonicalized here (largest-|component| entry positive), so the output
/// is invariant under arbitrary sign flips of the input columns.
pub fn transition_elements(
    spectrum: &SpectralResult,
    ops: &Operators,
    m_max: usize,
) -> Result<TransitionData> {
    if spectrum.n_converged <= m_max {
        return Err(Error::Convergence(format!(
            "transition sum needs {} converged states, have {}",
            m_max + 1,
            spectrum.n_converged
        )));
    }
    let sign = |m: usize| -> f64 {
        let col = spectrum.vectors.column(m);
        let mut best = 0;
        let mut best_abs = 0.0;
        for i in 0..col.len() {
            let a = col[i].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if col[best] < 0.0 {
            -1.0
        } else {
            1.0
        }
    };

    let v0 = spectrum.vectors.column(0).into_owned() * sign(0);
    let o1_v0 = (&ops.q2 * &v0) * 0.5;
    let o2_v0 = (&ops.q4 * &v0) * (1.0 / 24.0);

    let mut b1 = Vec::with_capacity(m_max);
    let mut b2 = Vec::with_capacity(m_max);
    let mut gaps = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let s = sign(m);
        let vm = spectrum.vectors.column(m);
        b1.push(s * vm.dot(&o1_v0));
        b2.push(s * vm.dot(&o2_v0));
        gaps.push(spectrum.energies[m] - spectrum.energies[0]);
    }
    Ok(TransitionData { b1, b2, gaps })
}

/// Accumulates the perturbative sum from transition data.
pub fn qmt_sum(data: &TransitionData) -> QmtReport {
    let mut metric = MetricValue::ZERO;
    let mut terms = Vec::with_capacity(data.gaps.len());
    for m in 0..data.gaps.len() {
        let w = 1.0 / (data.gaps[m] * data.gaps[m]);
        let t = MetricValue {
            g11: data.b1[m] * data.b1[m] * w,
            g12: data.b1[m] * data.b2[m] * w,
            g22: data.b2[m] * data.b2[m] * w,
        };
        metric.g11 += t.g11;
        metric.g12 += t.g12;
        metric.g22 += t.g22;
        terms.push(t);
    }

    let tail = terms
        .iter()
        .rev()
        .find(|t| t.g11 != 0.0 || t.g12 != 0.0 || t.g22 != 0.0)
        .map(|last| {
            let mut r: f64 = 0.0;
            for (num, den) in
                [(last.g11, metric.g11), (last.g12, metric.g12), (last.g22, metric.g22)]
            {
                if den != 0.0 {
                    r = r.max((num / den).abs());
                }
            }
            r
        })
        .unwrap_or(0.0);

    QmtReport { metric, terms, tail }
}

/// One-call convenience: solve at `basis`, form transitions, sum.
pub fn qmt_at(params: &SystemParams, basis: &BasisSpec, m_max: usize) -> Result<QmtReport> {
    let h = build_hamiltonian(basis, params);
    let spectrum = eigensolve(
        &h,
        basis,
        params,
        &SolveOptions { requested: m_max + 1, ..Default::default() },
    )?;
    let ops = crate::fock::build_operators(basis, params);
    let data = transition_elements(&spectrum, &ops, m_max)?;
    Ok(qmt_sum(&data))
}

/// Overlap (finite-difference) evaluation of the metric with central
/// differences of step `delta` in both `k` and `λ`, all four displaced
/// ground states expanded in the *same* basis. Displaced states are
/// sign-aligned to the central one through their overlap; an overlap below
/// 0.9 aborts (basis inadequate or state crossing).
pub fn qmt_provost_fd(
    params: &SystemParams,
    basis: &BasisSpec,
    delta: f64,
) -> Result<MetricValue> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Usage(format!("finite-difference step must be positive, got {delta}")));
    }
    if params.lambda - delta <= 0.0 {
        return Err(Error::Domain(format!(
            "finite-difference step {} reaches non-positive lambda",
            delta
        )));
    }

    let ground = |p: &SystemParams| -> Result<nalgebra::DVector<f64>> {
        let h = build_hamiltonian(basis, p);
        let res = eigensolve(&h, basis, p, &SolveOptions { requested: 1, ..Default::default() })?;
        Ok(res.vectors.column(0).into_owned())
    };

    let center = ground(params)?;
    let aligned = |p: SystemParams| -> Result<nalgebra::DVector<f64>> {
        let v = ground(&p)?;
        let ov = v.dot(&center);
        if ov.abs() < 0.9 {
            return Err(Error::Convergence(format!(
                "ground-state overlap {ov:.3} under displacement; basis inadequate or state crossing"
            )));
        }
        Ok(if ov < 0.0 { -v } else { v })
    };

    let kp = aligned(SystemParams { k: params.k + delta, ..*params })?;
    let km = aligned(SystemParams { k: params.k - delta, ..*params })?;
    let lp = aligned(SystemParams { lambda: params.lambda + delta, ..*params })?;
    let lm = aligned(SystemParams { lambda: params.lambda - delta, ..*params })?;

    let dk = (kp - km) / (2.0 * delta);
    let dl = (lp - lm) / (2.0 * delta);

    let dk0 = dk.dot(&center);
    let dl0 = dl.dot(&center);
    Ok(MetricValue {
        g11: dk.dot(&dk) - dk0 * dk0,
        g12: dk.dot(&dl) - dk0 * dl0,
        g22: dl.dot(&dl) - dl0 * dl0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::build_operators;
    use approx::assert_relative_eq;

    fn solve(params: &SystemParams, n: usize, m_max: usize) -> (BasisSpec, SpectralResult, Operators) {
        let basis = BasisSpec::with_default_omega(n, params).unwrap();
        let h = build_hamiltonian(&basis, params);
        let res = eigensolve(
            &h,
            &basis,
            params,
            &SolveOptions { requested: m_max + 1, ..Default::default() },
        )
        .unwrap();
        let ops = build_operators(&basis, params);
        (basis, res, ops)
    }

    #[test]
    fn harmonic_limit_transition_elements() {
        let params = SystemParams::new(1.0, 1e-9).unwrap();
        let (_, res, ops) = solve(&params, 80, 8);
        let td = transition_elements(&res, &ops, 8).unwrap();
        // ⟨0|q²/2|2⟩ = √2/4, ⟨0|q⁴/24|2⟩ = √2/16, ⟨0|q⁴/24|4⟩ = √6/48 at ω=1.
        assert_relative_eq!(td.b1[1], 2.0f64.sqrt() / 4.0, max_relative = 1e-6);
        assert_relative_eq!(td.b2[1], 2.0f64.sqrt() / 16.0, max_relative = 1e-6);
        assert_relative_eq!(td.b2[3], 6.0f64.sqrt() / 48.0, max_relative = 1e-6);
        // Parity selection: odd-m elements vanish identically.
        assert_eq!(td.b1[0], 0.0);
        assert_eq!(td.b2[2], 0.0);
    }

    #[test]
    fn harmonic_limit_metric_closed_form() {
        let params = SystemParams::new(1.0, 1e-9).unwrap();
        let (_, res, ops) = solve(&params, 80, 20);
        let report = qmt_sum(&transition_elements(&res, &ops, 20).unwrap());
        assert_relative_eq!(report.metric.g11, 1.0 / 32.0, max_relative = 1e-6);
        assert_relative_eq!(report.metric.g12, 1.0 / 128.0, max_relative = 1e-6);
        assert_relative_eq!(report.metric.g22, 13.0 / 6144.0, max_relative = 1e-6);
        assert_relative_eq!(report.metric.det(), 1.0 / 196608.0, max_relative = 1e-5);
        assert!(report.tail < 1e-12);
    }

    #[test]
    fn gauge_invariance_under_sign_flips() {
        let params = SystemParams::new(0.7, 0.3).unwrap();
        let (_, mut res, ops) = solve(&params, 100, 12);
        let base = qmt_sum(&transition_elements(&res, &ops, 12).unwrap());
        // Flip a deterministic batch of eigenvector signs; outputs must be
        // bitwise identical since the convention re-fixes them.
        for m in [0usize, 1, 2, 5, 9] {
            let flipped = -res.vectors.column(m).into_owned();
            res.vectors.set_column(m, &flipped);
        }
        let flipped = qmt_sum(&transition_elements(&res, &ops, 12).unwrap());
        assert_eq!(base.metric, flipped.metric);
    }

    #[test]
    fn perturbative_sum_matches_overlap_form() {
        let params = SystemParams::new(1.0, 0.1).unwrap();
        let basis = BasisSpec::with_default_omega(110, &params).unwrap();
        let sum = qmt_at(&params, &basis, 40).unwrap().metric;
        let fd = qmt_provost_fd(&params, &basis, 1e-3).unwrap();
        assert_relative_eq!(sum.g11, fd.g11, max_relative = 1e-6);
        assert_relative_eq!(sum.g12, fd.g12, max_relative = 1e-6);
        assert_relative_eq!(sum.g22, fd.g22, max_relative = 1e-6);
    }

    #[test]
    fn overlap_form_converges_quadratically() {
        let params = SystemParams::new(1.0, 0.1).unwrap();
        let basis = BasisSpec::with_default_omega(110, &params).unwrap();
        let exact = qmt_at(&params, &basis, 40).unwrap().metric;
        let coarse = qmt_provost_fd(&params, &basis, 2e-3).unwrap();
        let fine = qmt_provost_fd(&params, &basis, 1e-3).unwrap();
        // Halving δ should shrink the error by ~4 (allow 2.5 for noise).
        for (c, f, e) in [
            (coarse.g11, fine.g11, exact.g11),
            (coarse.g22, fine.g22, exact.g22),
        ] {
            let ec = (c - e).abs();
            let ef = (f - e).abs();
            assert!(ec > 2.5 * ef, "expected O(δ²): coarse err {ec:.3e}, fine err {ef:.3e}");
        }
    }
}
