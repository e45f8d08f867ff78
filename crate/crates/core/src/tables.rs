//! Pinned perturbative-series coefficients and their evaluators.
//!
//! The numbers live in `data/coefficients.txt`, embedded at compile time.
//! They cover the weak-coupling expansions of the quantum metric (`a`),
//! the classical metric on both sides of `k = 0` (`b`, `c`), the scalar
//! curvature (`d`, `h`, `l`), and the action-identification ladder `f`
//! that maps classical action powers onto multiples of `ħ`.  The low
//! orders of `b` and `c` are independently reproduced by the canonical
//! perturbation expansion in [`crate::cpt`], which is what the tests here
//! lean on.

use std::sync::OnceLock;

use crate::cpt::{Branch, CmtSeries};
use crate::model::SystemParams;
use crate::qmt::MetricValue;
use crate::{Error, Result};

/// Highest ladder index provided by the `f` table.
pub const F_LADDER_TOP: usize = 14;

/// Parsed coefficient tables. Metric rows are indexed `[g11, g12, g22]`,
/// each a vector over the expansion order α starting at 0.
#[derive(Debug, Clone)]
pub struct SeriesTables {
    /// Quantum metric, `k > 0`.
    pub a: [Vec<f64>; 3],
    /// Classical metric, `k > 0`.
    pub b: [Vec<f64>; 3],
    /// Classical metric, `k < 0`; rows are ragged.
    pub c: [Vec<f64>; 3],
    /// Quantum curvature, `k > 0`.
    pub d: Vec<f64>,
    /// Classical curvature, `k > 0` (action-identified form).
    pub h: Vec<f64>,
    /// Classical curvature, `k < 0`.
    pub l: Vec<f64>,
    /// Action-identification ladder, padded so `f[p]` is the factor for
    /// `I^p`; index 0 is unused.
    pub f: Vec<f64>,
}

/// The embedded tables, parsed once.
pub fn builtin() -> &'static SeriesTables {
    static TABLES: OnceLock<SeriesTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        parse(include_str!("../data/coefficients.txt")).expect("embedded coefficient tables")
    })
}

fn parse(text: &str) -> Result<SeriesTables> {
    use std::collections::BTreeMap;

    let mut rows: BTreeMap<(String, String), BTreeMap<usize, f64>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| {
            Error::Domain(format!("coefficient table line {}: {what}: {raw:?}", idx + 1))
        };
        let mut fields = line.split_whitespace();
        let kind = fields.next().ok_or_else(|| bad("missing kind"))?;
        let comp = fields.next().ok_or_else(|| bad("missing component"))?;
        let alpha: usize =
            fields.next().ok_or_else(|| bad("missing order"))?.parse().map_err(|_| bad("bad order"))?;
        let value: f64 =
            fields.next().ok_or_else(|| bad("missing value"))?.parse().map_err(|_| bad("bad value"))?;
        if fields.next().is_some() {
            return Err(bad("trailing fields"));
        }
        if rows.entry((kind.into(), comp.into())).or_default().insert(alpha, value).is_some() {
            return Err(bad("duplicate entry"));
        }
    }

    let take = |kind: &str, comp: &str, first: usize| -> Result<Vec<f64>> {
        let row = rows
            .get(&(kind.to_string(), comp.to_string()))
            .ok_or_else(|| Error::Domain(format!("coefficient table {kind} {comp} missing")))?;
        let mut out = Vec::with_capacity(row.len());
        for (expected, (&alpha, &value)) in row.iter().enumerate() {
            if alpha != first + expected {
                return Err(Error::Domain(format!(
                    "coefficient table {kind} {comp}: orders must be contiguous from {first}"
                )));
            }
            out.push(value);
        }
        Ok(out)
    };

    let metric = |kind: &str| -> Result<[Vec<f64>; 3]> {
        Ok([take(kind, "11", 0)?, take(kind, "12", 0)?, take(kind, "22", 0)?])
    };

    let f_raw = take("f", "-", 1)?;
    let mut f = vec![0.0; f_raw.len() + 1];
    f[1..].copy_from_slice(&f_raw);

    Ok(SeriesTables {
        a: metric("a")?,
        b: metric("b")?,
        c: metric("c")?,
        d: take("d", "-", 0)?,
        h: take("h", "-", 0)?,
        l: take("l", "-", 0)?,
        f,
    })
}

/// `Σ_α coeffs[α]·x^α` by Horner's rule.
fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Magnitude of the final retained term of `Σ_α coeffs[α]·x^α`.
fn last_term(coeffs: &[f64], x: f64) -> f64 {
    match coeffs.last() {
        Some(&c) => (c * x.powi(coeffs.len() as i32 - 1)).abs(),
        None => 0.0,
    }
}

/// A truncated metric series value together with the magnitude of the last
/// retained term of each component, for gating comparisons.
#[derive(Debug, Clone, Copy)]
pub struct SeriesMetric {
    pub metric: MetricValue,
    pub last_term: MetricValue,
}

impl SeriesMetric {
    /// Worst relative size of the final retained term across components;
    /// components that vanish contribute their absolute last term instead.
    pub fn tail(&self) -> f64 {
        let pairs = [
            (self.last_term.g11, self.metric.g11),
            (self.last_term.g12, self.metric.g12),
            (self.last_term.g22, self.metric.g22),
        ];
        pairs
            .iter()
            .map(|&(t, v)| if v.abs() > 0.0 { (t / v).abs() } else { t.abs() })
            .fold(0.0, f64::max)
    }
}

/// A truncated scalar series value with its last retained term.
#[derive(Debug, Clone, Copy)]
pub struct SeriesScalar {
    pub value: f64,
    pub last_term: f64,
}

/// Quantum metric from the pinned series; valid for `k > 0` and small
/// `ħλ/k^{3/2}`.
pub fn qmt_metric_series(params: &SystemParams, t: &SeriesTables) -> Result<SeriesMetric> {
    let k = params.k;
    if !(k > 0.0) {
        return Err(Error::Domain(format!("quantum metric series requires k > 0, got k = {k}")));
    }
    let hbar = params.hbar;
    let x = hbar * params.lambda / k.powf(1.5);
    let pref = [1.0 / (k * k), hbar / k.powf(2.5), hbar * hbar / (k * k * k)];
    // Alternating signs: Σ (−1)^α a_α x^α = horner(a, −x).
    Ok(SeriesMetric {
        metric: MetricValue {
            g11: horner(&t.a[0], -x) * pref[0],
            g12: horner(&t.a[1], -x) * pref[1],
            g22: horner(&t.a[2], -x) * pref[2],
        },
        last_term: MetricValue {
            g11: last_term(&t.a[0], x) * pref[0],
            g12: last_term(&t.a[1], x) * pref[1],
            g22: last_term(&t.a[2], x) * pref[2],
        },
    })
}

/// How to substitute action powers when evaluating a classical series.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    /// Plain classical evaluation at the given action.
    Literal(f64),
    /// Replace each `I^p` by `(f_p·ħ)^p` using the pinned ladder, which
    /// makes the classical metric directly comparable to the quantum one.
    Quantized,
}

/// Evaluates a coefficient-row series under an action mode together with
/// the magnitude of the final retained term of each component. `ladder` is
/// consulted only in quantized mode.
pub fn eval_with_tail(
    series: &CmtSeries,
    params: &SystemParams,
    mode: ActionMode,
    ladder: &[f64],
) -> Result<SeriesMetric> {
    // Rows with everything but the top coefficient zeroed evaluate to the
    // final retained term of each component, reusing the same machinery.
    let top_only = |row: &[f64]| {
        let mut out = vec![0.0; row.len()];
        if let (Some(slot), Some(&c)) = (out.last_mut(), row.last()) {
            *slot = c;
        }
        out
    };
    let tops = CmtSeries::from_rows(
        series.branch,
        top_only(&series.c11),
        top_only(&series.c12),
        top_only(&series.c22),
    );
    let (metric, last) = match mode {
        ActionMode::Literal(action) => {
            (series.eval(params, action)?, tops.eval(params, action)?)
        }
        ActionMode::Quantized => {
            (series.eval_quantized(params, ladder)?, tops.eval_quantized(params, ladder)?)
        }
    };
    Ok(SeriesMetric {
        metric,
        last_term: MetricValue { g11: last.g11.abs(), g12: last.g12.abs(), g22: last.g22.abs() },
    })
}

/// Classical metric from the pinned series (`b` for `k > 0`, `c` for
/// `k < 0`).
pub fn cmt_metric_series(
    params: &SystemParams,
    mode: ActionMode,
    t: &SeriesTables,
) -> Result<SeriesMetric> {
    let branch = Branch::for_k(params.k)?;
    let rows = match branch {
        Branch::SingleWell => &t.b,
        Branch::DoubleWell => &t.c,
    };
    let series = CmtSeries::from_rows(branch, rows[0].clone(), rows[1].clone(), rows[2].clone());
    eval_with_tail(&series, params, mode, &t.f)
}

/// Which curvature series to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureFamily {
    /// Curvature of the quantum metric.
    Quantum,
    /// Curvature of the classical metric in action-identified form.
    Classical,
}

/// Scalar curvature from the pinned series. Quantum is available for
/// `k > 0` only; classical covers both signs of `k`.
pub fn curvature_series(
    params: &SystemParams,
    family: CurvatureFamily,
    t: &SeriesTables,
) -> Result<SeriesScalar> {
    let k = params.k;
    if k == 0.0 {
        return Err(Error::Domain("curvature series requires k ≠ 0".into()));
    }
    let x = params.hbar * params.lambda / k.abs().powf(1.5);
    if k > 0.0 {
        let coeffs = match family {
            CurvatureFamily::Quantum => &t.d,
            CurvatureFamily::Classical => &t.h,
        };
        // Σ (−1)^{α+1} c_α x^α = −horner(c, −x).
        Ok(SeriesScalar { value: -horner(coeffs, -x), last_term: last_term(coeffs, x) })
    } else {
        match family {
            CurvatureFamily::Quantum => Err(Error::Domain(
                "no quantum curvature series for k < 0; use the grid evaluation".into(),
            )),
            CurvatureFamily::Classical => {
                Ok(SeriesScalar { value: horner(&t.l, x), last_term: last_term(&t.l, x) })
            }
        }
    }
}

/// Refits the action-identification ladder from the `a` and `b` tables.
///
/// Matching `ħ²·(quantum metric)` against the classical metric term by
/// term forces `I^p = (f_p ħ)^p` with `p = 2+α, 3+α, 4+α` for the three
/// components; each component that reaches power `p` contributes the
/// candidate `(a_α/b_α)^{1/p}` and the ladder entry is their mean.
/// `f₁ = 1/2` is fixed by the harmonic ground state. The result is
/// padded like [`SeriesTables::f`].
pub fn fit_f_ladder(t: &SeriesTables) -> Vec<f64> {
    let mut out = vec![0.0; F_LADDER_TOP + 1];
    out[1] = 0.5;
    for (p, slot) in out.iter_mut().enumerate().skip(2) {
        let mut sum = 0.0;
        let mut count = 0u32;
        for (comp, base) in [(0usize, 2usize), (1, 3), (2, 4)] {
            if p < base {
                continue;
            }
            let alpha = p - base;
            if alpha >= t.a[comp].len() || alpha >= t.b[comp].len() {
                continue;
            }
            let ratio = t.a[comp][alpha] / t.b[comp][alpha];
            if ratio > 0.0 {
                sum += ratio.powf(1.0 / p as f64);
                count += 1;
            }
        }
        if count > 0 {
            *slot = sum / count as f64;
        }
    }
    out
}

// Ground-state correction polynomials in u = √k·q²/ħ: order n contributes
// (−x)^n · P_n(u)/den with x = ħλ/k^{3/2}; coefficients ascend in u.
const GROUND_CORRECTIONS: [(&[f64], f64); 4] = [
    (&[0.0, 3.0, 1.0], 96.0),
    (&[0.0, 252.0, 93.0, 26.0, 3.0], 55_296.0),
    (&[0.0, 7992.0, 2916.0, 813.0, 141.0, 17.0, 1.0], 5_308_416.0),
    (
        &[0.0, 4_447_440.0, 1_599_552.0, 443_064.0, 82_755.0, 11_748.0, 1_198.0, 84.0, 3.0],
        6_115_295_232.0,
    ),
];

/// Unnormalized fourth-order perturbative ground-state amplitude for
/// `k > 0`.
pub fn ground_amplitude(params: &SystemParams, q: f64) -> Result<f64> {
    let k = params.k;
    if !(k > 0.0) {
        return Err(Error::Domain(format!(
            "perturbative ground state requires k > 0, got k = {k}"
        )));
    }
    let u = k.sqrt() * q * q / params.hbar;
    let x = params.hbar * params.lambda / k.powf(1.5);
    let mut poly = 1.0;
    let mut sign_x = 1.0;
    for (coeffs, den) in GROUND_CORRECTIONS {
        sign_x *= -x;
        poly += sign_x * horner(coeffs, u) / den;
    }
    Ok((-0.5 * u).exp() * poly)
}

/// Normalized perturbative ground-state density on an ascending grid.
pub fn ground_density(params: &SystemParams, q_grid: &[f64]) -> Result<Vec<f64>> {
    if q_grid.len() < 2 || q_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Grid("density grid must be ascending with at least 2 points".into()));
    }
    let mut density: Vec<f64> = Vec::with_capacity(q_grid.len());
    for &q in q_grid {
        let amp = ground_amplitude(params, q)?;
        density.push(amp * amp);
    }
    let mut mass = 0.0;
    for i in 1..q_grid.len() {
        mass += 0.5 * (density[i] + density[i - 1]) * (q_grid[i] - q_grid[i - 1]);
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::Grid(format!("perturbative density mass {mass} is unusable")));
    }
    for d in &mut density {
        *d /= mass;
    }
    Ok(density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpt::cmt_series;
    use crate::fock::{converged_spectrum, ground_density as spectral_density, SolveOptions};
    use crate::qmt::qmt_at;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn tables_parse_with_expected_shapes() {
        let t = builtin();
        for comp in 0..3 {
            assert_eq!(t.a[comp].len(), 11);
            assert_eq!(t.b[comp].len(), 11);
        }
        assert_eq!(t.c[0].len(), 7);
        assert_eq!(t.c[1].len(), 8);
        assert_eq!(t.c[2].len(), 9);
        assert_eq!(t.d.len(), 9);
        assert_eq!(t.h.len(), 9);
        assert_eq!(t.l.len(), 4);
        assert_eq!(t.f.len(), F_LADDER_TOP + 1);
    }

    #[test]
    fn leading_orders_are_exact_harmonic_values() {
        let t = builtin();
        // Quantum and classical leading metric coefficients close in
        // rational form.
        assert_relative_eq!(t.a[0][0], 1.0 / 32.0, max_relative = 1e-12);
        assert_relative_eq!(t.a[1][0], 1.0 / 128.0, max_relative = 1e-12);
        assert_relative_eq!(t.a[2][0], 13.0 / 6144.0, max_relative = 5e-5);
        assert_relative_eq!(t.b[0][0], 1.0 / 32.0, max_relative = 1e-12);
        assert_relative_eq!(t.b[1][0], 1.0 / 192.0, max_relative = 5e-5);
        assert_relative_eq!(t.b[2][0], 65.0 / 73728.0, max_relative = 5e-5);
        // Double-well leading coefficient is 3/√2 for every component.
        for comp in 0..3 {
            assert_relative_eq!(t.c[comp][0], 3.0 / 2.0_f64.sqrt(), max_relative = 5e-5);
        }
        assert_eq!(t.l[0], -4.0);
        assert_eq!(t.l[1], 0.0);
        assert_eq!(t.d[0], 28.0);
    }

    #[test]
    fn classical_tables_match_canonical_expansion() {
        // Single well: the order-10 canonical expansion pins every row.
        let single = cmt_series(Branch::SingleWell, 10).unwrap();
        let t = builtin();
        for comp in 0..3 {
            let collected = [&single.c11, &single.c12, &single.c22][comp];
            for alpha in 0..=10 {
                assert_relative_eq!(collected[alpha], t.b[comp][alpha], max_relative = 5e-4);
            }
        }
        // Double well: order 5 certifies α ≤ 2.
        let double = cmt_series(Branch::DoubleWell, 5).unwrap();
        for comp in 0..3 {
            let collected = [&double.c11, &double.c12, &double.c22][comp];
            for alpha in 0..=2 {
                if t.c[comp][alpha] == 0.0 {
                    assert_abs_diff_eq!(collected[alpha], 0.0, epsilon = 1e-12);
                } else {
                    assert_relative_eq!(collected[alpha], t.c[comp][alpha], max_relative = 1e-4);
                }
            }
        }
    }

    #[test]
    fn refit_ladder_matches_pinned_values() {
        let t = builtin();
        let fit = fit_f_ladder(t);
        assert_abs_diff_eq!(fit[2], 1.0, epsilon = 1e-6);
        for p in 1..=F_LADDER_TOP {
            assert_abs_diff_eq!(fit[p], t.f[p], epsilon = 5e-4);
        }
    }

    #[test]
    fn quantum_series_matches_spectral_sum() {
        let params = SystemParams::new(1.0, 0.2).unwrap();
        let opts = SolveOptions { requested: 61, ..Default::default() };
        let (basis, _) = converged_spectrum(&params, 120, 400, &opts).unwrap();
        let report = qmt_at(&params, &basis, 60).unwrap();
        let series = qmt_metric_series(&params, builtin()).unwrap();
        assert_relative_eq!(series.metric.g11, report.metric.g11, max_relative = 1e-3);
        assert_relative_eq!(series.metric.g12, report.metric.g12, max_relative = 1e-3);
        assert_relative_eq!(series.metric.g22, report.metric.g22, max_relative = 1e-3);
        // x = 0.2 sits well inside the series radius; the truncation
        // diagnostic must reflect that.
        assert!(series.tail() < 1e-5, "tail {}", series.tail());
    }

    #[test]
    fn leading_prefactor_scales_as_inverse_k_squared() {
        // With λ negligible only α = 0 survives, so doubling k must divide
        // g11 by exactly 4.
        let t = builtin();
        let a = qmt_metric_series(&SystemParams::new(1.0, 1e-300).unwrap(), t).unwrap();
        let b = qmt_metric_series(&SystemParams::new(2.0, 1e-300).unwrap(), t).unwrap();
        assert_eq!(b.metric.g11, a.metric.g11 / 4.0);
    }

    #[test]
    fn classical_series_agrees_with_expansion_evaluator() {
        let t = builtin();
        // k > 0, weak coupling, literal action.
        let params = SystemParams::new(1.0, 0.05).unwrap();
        let series = cmt_metric_series(&params, ActionMode::Literal(0.5), t).unwrap();
        let expansion = cmt_series(Branch::SingleWell, 10).unwrap();
        let reference = expansion.eval(&params, 0.5).unwrap();
        assert_relative_eq!(series.metric.g11, reference.g11, max_relative = 2e-4);
        assert_relative_eq!(series.metric.g12, reference.g12, max_relative = 2e-4);
        assert_relative_eq!(series.metric.g22, reference.g22, max_relative = 2e-4);
        assert!(series.tail() < 1e-6);
    }

    #[test]
    fn quantized_mode_uses_the_ladder() {
        let t = builtin();
        let params = SystemParams::new(1.0, 1e-9).unwrap();
        let q = cmt_metric_series(&params, ActionMode::Quantized, t).unwrap();
        // At λ→0 only α = 0 survives: g11 → b₀·(f₂ħ)² = 1/32 and
        // g12 → f₃³/192.
        assert_relative_eq!(q.metric.g11, 1.0 / 32.0, max_relative = 1e-6);
        assert_relative_eq!(q.metric.g12, 1.1447_f64.powi(3) / 192.0, max_relative = 1e-4);
    }

    #[test]
    fn curvature_series_limits() {
        let t = builtin();
        let weak = SystemParams::new(1.0, 1e-10).unwrap();
        let r_q = curvature_series(&weak, CurvatureFamily::Quantum, t).unwrap();
        assert_abs_diff_eq!(r_q.value, -28.0, epsilon = 1e-6);
        let r_cl = curvature_series(&weak, CurvatureFamily::Classical, t).unwrap();
        assert_abs_diff_eq!(r_cl.value, -21.1866, epsilon = 1e-4);
        let double = SystemParams::new(-1.0, 1e-10).unwrap();
        let r_dw = curvature_series(&double, CurvatureFamily::Classical, t).unwrap();
        assert_abs_diff_eq!(r_dw.value, -4.0, epsilon = 1e-6);
        assert!(curvature_series(&double, CurvatureFamily::Quantum, t).is_err());
    }

    #[test]
    fn perturbative_density_matches_spectral_density() {
        let params = SystemParams::new(1.0, 0.1).unwrap();
        let (basis, spectrum) =
            converged_spectrum(&params, 60, 400, &SolveOptions::default()).unwrap();
        let grid: Vec<f64> = (0..801).map(|i| -4.0 + 8.0 * i as f64 / 800.0).collect();
        let reference = spectral_density(&spectrum, &basis, &params, &grid).unwrap();
        let series = ground_density(&params, &grid).unwrap();
        let sup = series
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(sup < 1e-3, "sup-norm difference {sup}");
    }
}
