//! Canonical perturbation theory for the oscillator in action-angle form,
//! carried out in exact rational arithmetic.
//!
//! With `(φ₀, J)` the action-angle pair of the harmonic part and the
//! anharmonicity ordered by a small parameter ε, a mixed generating function
//! `S(φ₀, I) = I φ₀ + Σ_μ ε^μ W_μ(I, φ₀)` maps to a new pair `(φ, I)` with
//! `J = I + Σ ε^μ ∂W_μ/∂φ₀` and `φ = φ₀ + Σ ε^μ ∂W_μ/∂I`, such that the
//! Hamiltonian depends on `I` alone. Order by order,
//!
//! ```text
//! Φ_μ = Σ_{ν=1}^{μ} Σ_{j≥0} (1/j!) ∂_I^j H_ν · Σ_{μ₁+…+μ_j = μ−ν, μᵢ≥1} Π_i ∂W_{μᵢ}/∂φ₀,
//! E_μ = ⟨Φ_μ⟩,   ∂W_μ/∂φ₀ = (E_μ − Φ_μ)/ω₀,
//! ```
//!
//! which keeps every `W_μ` free of secular terms. Two branches share the
//! engine: `k > 0` expands around the single well in ε = λ; `k < 0` expands
//! around one minimum of the double well in ε = λ' = √λ, where the cubic
//! and quartic terms of the shifted potential enter at first and second
//! order respectively.
//!
//! The Fourier data of an observable `O(q)` with respect to the *new* angle
//! follow from `β^(m) = ⟨D·O·e^{−imΔ} e^{−imφ₀}⟩` with `Δ = Σ ε^μ ∂W_μ/∂I`
//! and the Jacobian `D = ∂φ/∂φ₀`; assembling `Σ_m 2 Re[β_i β_j*]/(mω)²`
//! and collecting powers yields the classical metric coefficient tables.

pub mod series;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::model::SystemParams;
use crate::qmt::MetricValue;
use crate::{Error, Result};
use series::{rat, EvalCtx, Mono, Phase, Term, TermDisplay, TrigSeries};

/// Default expansion order for `k > 0`.
pub const DEFAULT_ORDER_SINGLE: usize = 4;
/// Default expansion order for `k < 0`.
pub const DEFAULT_ORDER_DOUBLE: usize = 6;

/// Which perturbative family the expansion is built around.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `k > 0`: quartic correction to the single harmonic well, ε = λ.
    SingleWell,
    /// `k < 0`: oscillation about one minimum of the double well, ε = √λ.
    /// Observables use the left-well convention `q = Q − s`,
    /// `s = √6·|k|^(1/2)/ε`; the metric is well-independent.
    DoubleWell,
}

impl Branch {
    /// Selects the branch for the sign of `k`.
    pub fn for_k(k: f64) -> Result<Branch> {
        if k > 0.0 {
            Ok(Branch::SingleWell)
        } else if k < 0.0 {
            Ok(Branch::DoubleWell)
        } else {
            Err(Error::Domain("perturbative branches require k != 0".into()))
        }
    }

    pub fn default_order(&self) -> usize {
        match self {
            Branch::SingleWell => DEFAULT_ORDER_SINGLE,
            Branch::DoubleWell => DEFAULT_ORDER_DOUBLE,
        }
    }

    /// Expansion parameter at physical couplings.
    pub fn eps_value(&self, params: &SystemParams) -> f64 {
        match self {
            Branch::SingleWell => params.lambda,
            Branch::DoubleWell => params.lambda.sqrt(),
        }
    }

    fn check_k(&self, k: f64) -> Result<()> {
        match self {
            Branch::SingleWell if k > 0.0 => Ok(()),
            Branch::DoubleWell if k < 0.0 => Ok(()),
            Branch::SingleWell => Err(Error::Domain(format!(
                "single-well expansion requires k > 0, got {k}"
            ))),
            Branch::DoubleWell => Err(Error::Domain(format!(
                "double-well expansion requires k < 0, got {k}"
            ))),
        }
    }

    /// Harmonic frequency monomial: `√k` or `√2·√|k|`.
    fn omega0(&self) -> Mono {
        match self {
            Branch::SingleWell => Mono { k_quarter: 2, ..Mono::ONE },
            Branch::DoubleWell => Mono { k_quarter: 2, two_quarter: 2, ..Mono::ONE },
        }
    }

    /// Harmonic coordinate `Q = √(2I/ω₀)·sin φ₀` as a series term.
    fn coordinate(&self) -> TrigSeries {
        let mono = match self {
            Branch::SingleWell => Mono { i_half: 1, k_quarter: -1, two_quarter: 2, ..Mono::ONE },
            Branch::DoubleWell => Mono { i_half: 1, k_quarter: -1, two_quarter: 1, ..Mono::ONE },
        };
        TrigSeries::from_term(Term::new(1, Phase::Sin, mono), BigRational::one())
    }

    /// Perturbation terms `H_ν`, each carrying its own ε^ν.
    fn perturbation(&self) -> Vec<TrigSeries> {
        let q = self.coordinate();
        let q2 = q.mul(&q, series::NO_CAP);
        let q4 = q2.mul(&q2, series::NO_CAP);
        match self {
            Branch::SingleWell => {
                // H₁ = ε·Q⁴/24
                vec![q4.scale_mono(&Mono { eps: 1, ..Mono::ONE }, &rat(1, 24))]
            }
            Branch::DoubleWell => {
                // H₁ = −ε·|k|^(1/2)·Q³/√6, H₂ = ε²·Q⁴/24
                let q3 = q2.mul(&q, series::NO_CAP);
                let cubic_mono =
                    Mono { eps: 1, k_quarter: 2, two_quarter: 2, three_half: 1, ..Mono::ONE };
                vec![
                    q3.scale_mono(&cubic_mono, &rat(-1, 6)),
                    q4.scale_mono(&Mono { eps: 2, ..Mono::ONE }, &rat(1, 24)),
                ]
            }
        }
    }

    /// Unperturbed energy `ω₀·I`, plus the well depth `−(3/2)k²/λ` for the
    /// double well so that energies match the `V(0) = 0` convention.
    fn base_energy(&self) -> TrigSeries {
        let mut mono = self.omega0();
        mono.i_half = 2;
        let mut e0 = TrigSeries::constant(mono, BigRational::one());
        if let Branch::DoubleWell = self {
            e0.add_assign(&TrigSeries::constant(
                Mono { eps: -2, k_quarter: 8, ..Mono::ONE },
                rat(-3, 2),
            ));
        }
        e0
    }

    /// Deformation observable in the oscillation coordinate: `O₁ = q²/2`
    /// couples to `k`, `O₂ = q⁴/24` couples to `λ`. For the double well,
    /// `q = Q − s` (left well).
    fn observable(&self, obs: Observable) -> TrigSeries {
        let q = match self {
            Branch::SingleWell => self.coordinate(),
            Branch::DoubleWell => {
                let shift = TrigSeries::constant(
                    Mono { eps: -1, k_quarter: 2, two_quarter: 2, three_half: 1, ..Mono::ONE },
                    BigRational::one(),
                );
                self.coordinate().sub(&shift)
            }
        };
        let q2 = q.mul(&q, series::NO_CAP);
        match obs {
            Observable::KCoupling => q2.scale_rat(&rat(1, 2)),
            Observable::LambdaCoupling => {
                q2.mul(&q2, series::NO_CAP).scale_rat(&rat(1, 24))
            }
        }
    }
}

/// The two deformation operators whose Fourier data feed the metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// `∂H/∂k = q²/2`.
    KCoupling,
    /// `∂H/∂λ = q⁴/24`.
    LambdaCoupling,
}

/// Complex angle-free series (real and imaginary parts).
#[derive(Debug, Clone)]
pub struct ComplexSeries {
    pub re: TrigSeries,
    pub im: TrigSeries,
}

impl ComplexSeries {
    fn zero() -> ComplexSeries {
        ComplexSeries { re: TrigSeries::zero(), im: TrigSeries::zero() }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn eval(&self, ctx: &EvalCtx) -> Complex64 {
        Complex64::new(self.re.eval(ctx), self.im.eval(ctx))
    }
}

fn factorial(j: usize) -> BigRational {
    let mut f = BigInt::one();
    for i in 2..=j {
        f *= BigInt::from(i);
    }
    BigRational::from_integer(f)
}

/// The solved expansion: generators, energies, and derived series.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub branch: Branch,
    pub order: usize,
    /// `W_μ` for μ = 1..=order.
    pub w: Vec<TrigSeries>,
    /// `∂W_μ/∂φ₀`, kept alongside for reuse.
    pub w_prime: Vec<TrigSeries>,
    /// `E_μ` for μ = 0..=order; `E_0` is the harmonic term.
    pub energy: Vec<TrigSeries>,
}

/// `Σ over ordered compositions of `total` into `j` parts ≥ 1 of
/// `Π ∂W_{μᵢ}/∂φ₀``.
fn composition_sum(w_prime: &[TrigSeries], j: usize, total: usize, cap: i32) -> TrigSeries {
    debug_assert!(j >= 1 && total >= j);
    // level[t] = sum over compositions of t+1 into `level` parts
    let mut level: Vec<TrigSeries> = (1..=total).map(|t| w_prime[t - 1].clone()).collect();
    for _ in 2..=j {
        let mut next: Vec<TrigSeries> = vec![TrigSeries::zero(); total];
        for t in 1..=total {
            let mut acc = TrigSeries::zero();
            for first in 1..t {
                acc.add_assign(&w_prime[first - 1].mul(&level[t - first - 1], cap));
            }
            next[t - 1] = acc;
        }
        level = next;
    }
    level[total - 1].clone()
}

impl Expansion {
    /// Solves the expansion to the given order.
    pub fn new(branch: Branch, order: usize) -> Result<Self> {
        let cap = order as i32;
        let h = branch.perturbation();
        let omega0 = branch.omega0();
        let (omega0_inv, omega0_inv_factor) = omega0.inv();

        let mut w: Vec<TrigSeries> = Vec::with_capacity(order);
        let mut w_prime: Vec<TrigSeries> = Vec::with_capacity(order);
        let mut energy = vec![branch.base_energy()];

        for mu in 1..=order {
            let mut phi_mu = TrigSeries::zero();
            for nu in 1..=mu.min(h.len()) {
                let rem = mu - nu;
                if rem == 0 {
                    phi_mu.add_assign(&h[nu - 1]);
                    continue;
                }
                let mut deriv = h[nu - 1].clone();
                for j in 1..=rem {
                    deriv = deriv.di();
                    if deriv.is_zero() {
                        break;
                    }
                    let products = composition_sum(&w_prime, j, rem, cap);
                    if products.is_zero() {
                        continue;
                    }
                    let inv_fact = factorial(j).recip();
                    phi_mu.add_assign(&deriv.mul(&products, cap).scale_rat(&inv_fact));
                }
            }
            let e_mu = phi_mu.average();
            let wp = e_mu.sub(&phi_mu).scale_mono(&omega0_inv, &omega0_inv_factor);
            let w_mu = wp.anti_dphi()?;
            debug_assert!(
                w_mu.iter().all(|(t, _)| t.mono.eps as usize == mu),
                "generator terms at order {mu} must carry eps^{mu}"
            );
            w.push(w_mu);
            w_prime.push(wp);
            energy.push(e_mu);
        }

        Ok(Expansion { branch, order, w, w_prime, energy })
    }

    fn cap(&self) -> i32 {
        self.order as i32
    }

    /// Full energy series `E(I) = Σ E_μ`.
    pub fn energy_series(&self) -> TrigSeries {
        let mut total = TrigSeries::zero();
        for e in &self.energy {
            total.add_assign(e);
        }
        total
    }

    /// Frequency series `ω(I) = dE/dI`.
    pub fn omega_series(&self) -> TrigSeries {
        self.energy_series().di()
    }

    /// `1/ω²` as a series: `ω₀⁻²·Σ_j (−1)^j (j+1) u^j` with
    /// `u = (ω − ω₀)/ω₀`.
    pub fn inv_omega_sq_series(&self) -> TrigSeries {
        let omega0 = self.branch.omega0();
        let (inv, inv_factor) = omega0.inv();
        let mut u = TrigSeries::zero();
        for e in &self.energy[1..] {
            u.add_assign(&e.di().scale_mono(&inv, &inv_factor));
        }
        let mut acc = TrigSeries::zero();
        let mut u_pow = TrigSeries::one();
        let mut j = 0i64;
        loop {
            let sign = if j % 2 == 0 { 1 } else { -1 };
            acc.add_assign(&u_pow.scale_rat(&rat(sign * (j + 1), 1)));
            u_pow = u_pow.mul(&u, self.cap());
            if u_pow.is_zero() {
                break;
            }
            j += 1;
        }
        let sq_factor = &inv_factor * &inv_factor;
        let (inv_sq, fold) = inv.mul(&inv);
        acc.scale_mono(&inv_sq, &(sq_factor * fold))
    }

    fn ctx(&self, params: &SystemParams, action: f64, phi0: f64) -> Result<EvalCtx> {
        self.branch.check_k(params.k)?;
        if !(action.is_finite() && action > 0.0) {
            return Err(Error::Domain(format!("action must be positive, got {action}")));
        }
        Ok(EvalCtx {
            action,
            eps: self.branch.eps_value(params),
            abs_k: params.k.abs(),
            phi0,
        })
    }

    /// Energy at physical parameters (same zero of energy as the potential).
    pub fn eval_energy(&self, params: &SystemParams, action: f64) -> Result<f64> {
        Ok(self.energy_series().eval(&self.ctx(params, action, 0.0)?))
    }

    /// Frequency at physical parameters.
    pub fn eval_omega(&self, params: &SystemParams, action: f64) -> Result<f64> {
        Ok(self.omega_series().eval(&self.ctx(params, action, 0.0)?))
    }

    /// Taylor composition `S(J, φ₀)|_{J = I + t(I, φ₀)} = Σ_j ∂_I^j S · t^j/j!`;
    /// terminates because `t` is at least first order in ε.
    fn action_taylor_shift(&self, s: &TrigSeries, t: &TrigSeries) -> TrigSeries {
        let cap = self.cap();
        let mut acc = s.clone();
        let mut deriv = s.clone();
        let mut t_pow = TrigSeries::one();
        for j in 1..=self.order {
            deriv = deriv.di();
            t_pow = t_pow.mul(t, cap);
            if deriv.is_zero() || t_pow.is_zero() {
                break;
            }
            acc.add_assign(&deriv.mul(&t_pow, cap).scale_rat(&factorial(j).recip()));
        }
        acc
    }

    /// Fourier coefficients `β^(m)` of an observable with respect to the new
    /// angle, for m = 0 up to the largest harmonic the expansion populates.
    /// The observable, native to the old pair `(J, φ₀)`, is composed with
    /// `J = I + Σ ∂W_μ/∂φ₀` before averaging.
    pub fn beta(&self, obs: Observable) -> Result<Vec<ComplexSeries>> {
        let cap = self.cap();
        let mut wp_total = TrigSeries::zero();
        for wp in &self.w_prime {
            wp_total.add_assign(wp);
        }
        let o = self
            .action_taylor_shift(&self.branch.observable(obs).truncate_eps(cap), &wp_total);

        // D = ∂φ/∂φ₀, Δ = φ − φ₀.
        let mut d = TrigSeries::one();
        for wp in &self.w_prime {
            d.add_assign(&wp.di());
        }
        let mut delta = TrigSeries::zero();
        for w in &self.w {
            delta.add_assign(&w.di());
        }

        // DO·Δ^j for j = 0.. until the ε cap empties the power.
        let d_o = d.mul(&o, cap);
        let mut layers = vec![d_o.clone()];
        let mut delta_pow = TrigSeries::one();
        loop {
            delta_pow = delta_pow.mul(&delta, cap);
            if delta_pow.is_zero() {
                break;
            }
            layers.push(d_o.mul(&delta_pow, cap));
        }

        let m_hi = layers.iter().map(TrigSeries::max_harmonic).max().unwrap_or(0);
        let mut out = Vec::with_capacity(m_hi as usize + 1);

        // β⁰ is the plain angle average of D·O.
        out.push(ComplexSeries { re: layers[0].coeff_cos(0), im: TrigSeries::zero() });

        for m in 1..=m_hi {
            let mut beta = ComplexSeries::zero();
            for (j, layer) in layers.iter().enumerate() {
                let a = layer.coeff_cos(m);
                let b = layer.coeff_sin(m);
                if a.is_zero() && b.is_zero() {
                    continue;
                }
                // (−im)^j/j! · (a/2 − i b/2), with the (−i)^j cycle.
                let scale = BigRational::from_integer(BigInt::from(m).pow(j as u32))
                    / factorial(j)
                    / rat(2, 1);
                let a_s = a.scale_rat(&scale);
                let b_s = b.scale_rat(&scale);
                match j % 4 {
                    0 => {
                        beta.re.add_assign(&a_s);
                        beta.im.add_assign(&b_s.neg());
                    }
                    1 => {
                        beta.re.add_assign(&b_s.neg());
                        beta.im.add_assign(&a_s.neg());
                    }
                    2 => {
                        beta.re.add_assign(&a_s.neg());
                        beta.im.add_assign(&b_s);
                    }
                    _ => {
                        beta.re.add_assign(&b_s);
                        beta.im.add_assign(&a_s);
                    }
                }
            }
            out.push(beta);
        }
        Ok(out)
    }

    /// Poisson-bracket defect `{φ, I} − 1` of the truncated transformation,
    /// expressed in the old pair by series inversion of `J = I + ∂W/∂φ₀`.
    /// An exactly empty result certifies canonicality through `order`.
    pub fn canonical_defect(&self) -> Result<TrigSeries> {
        let cap = self.cap();
        let mut wp_total = TrigSeries::zero();
        for wp in &self.w_prime {
            wp_total.add_assign(wp);
        }
        let mut delta = TrigSeries::zero();
        for w in &self.w {
            delta.add_assign(&w.di());
        }

        // Invert I = J − W'(I): V_{n+1} = −W'(J + V_n); gains one order per pass.
        let mut v = TrigSeries::zero();
        for _ in 0..=self.order {
            v = self.action_taylor_shift(&wp_total, &v).neg();
        }
        let fixed = self.action_taylor_shift(&wp_total, &v).neg();
        if fixed != v {
            return Err(Error::Convergence(
                "action inversion did not reach a fixed point".into(),
            ));
        }

        let delta_v = self.action_taylor_shift(&delta, &v);
        // {φ, I} = (1 + ∂Δ/∂φ₀)(1 + ∂V/∂J) − ∂Δ/∂J·∂V/∂φ₀ at I = J + V.
        let one = TrigSeries::one();
        let term1 = one.add(&delta_v.dphi()).mul(&one.add(&v.di()), cap);
        let term2 = delta_v.di().mul(&v.dphi(), cap);
        Ok(term1.sub(&term2).sub(&one))
    }

    /// Human-readable dump of the expansion.
    pub fn dump(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let (name, eps) = match self.branch {
            Branch::SingleWell => ("single well (k > 0)", "eps = lambda"),
            Branch::DoubleWell => ("double well (k < 0, left-well convention)", "eps = sqrt(lambda)"),
        };
        let _ = writeln!(out, "branch: {name}, order: {}, {eps}", self.order);
        let series_block = |out: &mut String, label: String, s: &TrigSeries| {
            let _ = writeln!(out, "{label}:");
            if s.is_zero() {
                let _ = writeln!(out, "  0");
            }
            for (t, c) in s.iter() {
                let _ = writeln!(out, "  {}", TermDisplay { term: t, coeff: c });
            }
        };
        for (mu, e) in self.energy.iter().enumerate() {
            series_block(&mut out, format!("E[{mu}]"), e);
        }
        for (idx, w) in self.w.iter().enumerate() {
            series_block(&mut out, format!("W[{}]", idx + 1), w);
        }
        series_block(&mut out, "omega".into(), &self.omega_series());
        out
    }
}

/// Largest series order α with no truncation-induced error, given that the
/// generators are exact through ε^order. For the double well the observables
/// carry negative ε powers (the well shift is `∝ 1/ε`), which costs orders.
pub fn trusted_alpha(branch: Branch, order: usize) -> usize {
    match branch {
        Branch::SingleWell => order,
        Branch::DoubleWell => order.saturating_sub(1) / 2,
    }
}

/// Collected classical-metric series: `g_ij` as coefficient tables over the
/// dimensionless coupling `x = I·λ/|k|^(3/2)`.
///
/// Single well: `g11 = (I²/k²)·Σ_α (−1)^α c11[α] x^α`, `g12` with `I³/k^(5/2)`,
/// `g22` with `I⁴/k³`. Double well: `g11 = (I/(λ√|k|))·Σ_α c11[α] x^α`,
/// `g12` with `I√|k|/λ²`, `g22` with `I|k|^(3/2)/λ³`, no sign alternation.
#[derive(Debug, Clone)]
pub struct CmtSeries {
    pub branch: Branch,
    pub order: usize,
    /// Coefficients are kept only through this α.
    pub trusted_alpha: usize,
    pub c11: Vec<f64>,
    pub c12: Vec<f64>,
    pub c22: Vec<f64>,
}

/// Pattern data per component: base power of I (in halves), base power of
/// |k| (in quarters, stepping −6 per α), and base ε power (single well:
/// α-th term carries ε^α; double well: ε^(2α + eps_base)).
fn component_pattern(branch: Branch, comp: usize) -> (i16, i16, i16) {
    match branch {
        Branch::SingleWell => ([4, 6, 8][comp], [-8, -10, -12][comp], 0),
        Branch::DoubleWell => (2, [-2, 2, 6][comp], [-2, -4, -6][comp]),
    }
}

fn collect_component(
    g: &TrigSeries,
    branch: Branch,
    comp: usize,
    trusted: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; trusted + 1];
    let (i_base, k_base, eps_base) = component_pattern(branch, comp);
    for (t, c) in g.iter() {
        assert!(t.m == 0, "assembled metric series must be angle-free");
        let alpha = match branch {
            Branch::SingleWell => t.mono.eps as i64,
            Branch::DoubleWell => {
                let rel = t.mono.eps as i64 - eps_base as i64;
                assert!(rel % 2 == 0, "double-well metric eps must step by 2 from the base");
                rel / 2
            }
        };
        assert!(alpha >= 0, "metric series must not have negative-order terms");
        let alpha = alpha as usize;
        if alpha > trusted {
            continue;
        }
        assert_eq!(t.mono.i_half as i64, i_base as i64 + 2 * alpha as i64, "action power off-pattern");
        assert_eq!(t.mono.k_quarter as i64, k_base as i64 - 6 * alpha as i64, "k power off-pattern");
        let radical = 2f64.powf(t.mono.two_quarter as f64 / 4.0)
            * 3f64.powf(t.mono.three_half as f64 / 2.0);
        let sign = match branch {
            Branch::SingleWell if alpha % 2 == 1 => -1.0,
            _ => 1.0,
        };
        out[alpha] += sign * c.to_f64().unwrap_or(f64::NAN) * radical;
    }
    out
}

/// Builds the expansion and assembles the collected metric series.
pub fn cmt_series(branch: Branch, order: usize) -> Result<CmtSeries> {
    if order < 1 {
        return Err(Error::Usage("metric assembly needs order >= 1".into()));
    }
    let exp = Expansion::new(branch, order)?;
    let cap = order as i32;
    let b1 = exp.beta(Observable::KCoupling)?;
    let b2 = exp.beta(Observable::LambdaCoupling)?;
    let inv_w2 = exp.inv_omega_sq_series();

    let mut g = [TrigSeries::zero(), TrigSeries::zero(), TrigSeries::zero()];
    let m_hi = b1.len().max(b2.len()) - 1;
    for m in 1..=m_hi {
        let pairs: [(&[ComplexSeries], &[ComplexSeries]); 3] = [(&b1, &b1), (&b1, &b2), (&b2, &b2)];
        for (comp, (x, y)) in pairs.into_iter().enumerate() {
            if m >= x.len() || m >= y.len() {
                continue;
            }
            let (bx, by) = (&x[m], &y[m]);
            if bx.is_zero() || by.is_zero() {
                continue;
            }
            // 2·Re[β_i β_j*] = 2(re·re + im·im)
            let mut re_part = bx.re.mul(&by.re, cap);
            re_part.add_assign(&bx.im.mul(&by.im, cap));
            let weighted = re_part.scale_rat(&rat(2, (m * m) as i64));
            g[comp].add_assign(&weighted.mul(&inv_w2, cap));
        }
    }

    let trusted = trusted_alpha(branch, order);
    Ok(CmtSeries {
        branch,
        order,
        trusted_alpha: trusted,
        c11: collect_component(&g[0], branch, 0, trusted),
        c12: collect_component(&g[1], branch, 1, trusted),
        c22: collect_component(&g[2], branch, 2, trusted),
    })
}

impl CmtSeries {
    /// Wraps externally pinned coefficient rows in the evaluator; rows may
    /// have different lengths (the double-well tables do).
    pub fn from_rows(branch: Branch, c11: Vec<f64>, c12: Vec<f64>, c22: Vec<f64>) -> CmtSeries {
        let trusted = c11.len().max(c12.len()).max(c22.len()).saturating_sub(1);
        CmtSeries { branch, order: trusted, trusted_alpha: trusted, c11, c12, c22 }
    }

    /// Evaluates the metric at physical parameters with a literal action.
    pub fn eval(&self, params: &SystemParams, action: f64) -> Result<MetricValue> {
        self.eval_impl(params, |p| action.powi(p as i32))
    }

    /// Evaluates with per-term quantized actions `I^p → (f_p·ħ)^p`;
    /// `f[p]` indexes the ladder (entry 0 unused).
    pub fn eval_quantized(&self, params: &SystemParams, f: &[f64]) -> Result<MetricValue> {
        let p_max = self.max_action_power();
        if f.len() <= p_max {
            return Err(Error::Usage(format!(
                "quantized evaluation needs f-ladder entries through p = {p_max}, got {}",
                f.len().saturating_sub(1)
            )));
        }
        let hbar = params.hbar;
        self.eval_impl(params, |p| (f[p] * hbar).powi(p as i32))
    }

    /// Largest action power the trusted coefficients multiply.
    pub fn max_action_power(&self) -> usize {
        let base = match self.branch {
            Branch::SingleWell => 4,
            Branch::DoubleWell => 1,
        };
        base + self.trusted_alpha
    }

    fn eval_impl(&self, params: &SystemParams, action_pow: impl Fn(usize) -> f64) -> Result<MetricValue> {
        match self.branch {
            Branch::SingleWell if params.k <= 0.0 => {
                return Err(Error::Domain(format!(
                    "single-well series requires k > 0, got {}",
                    params.k
                )))
            }
            Branch::DoubleWell if params.k >= 0.0 => {
                return Err(Error::Domain(format!(
                    "double-well series requires k < 0, got {}",
                    params.k
                )))
            }
            _ => {}
        }
        let abs_k = params.k.abs();
        let lambda = params.lambda;
        let p_bases: [usize; 3] = match self.branch {
            Branch::SingleWell => [2, 3, 4],
            Branch::DoubleWell => [1, 1, 1],
        };
        let tables: [&Vec<f64>; 3] = [&self.c11, &self.c12, &self.c22];
        let mut vals = [0.0f64; 3];
        for comp in 0..3 {
            let (_, k_base, eps_base) = component_pattern(self.branch, comp);
            let mut acc = 0.0;
            for (alpha, &coeff) in tables[comp].iter().enumerate() {
                if coeff == 0.0 {
                    continue;
                }
                let sign = match self.branch {
                    Branch::SingleWell if alpha % 2 == 1 => -1.0,
                    _ => 1.0,
                };
                // λ carries ε² for the double well, so the physical power is
                // α + eps_base/2 there and α for the single well.
                let lam_pow = match self.branch {
                    Branch::SingleWell => lambda.powi(alpha as i32),
                    Branch::DoubleWell => lambda.powi(alpha as i32 + eps_base as i32 / 2),
                };
                let k_pow = abs_k.powf((k_base as f64 - 6.0 * alpha as f64) / 4.0);
                acc += sign * coeff * action_pow(p_bases[comp] + alpha) * lam_pow * k_pow;
            }
            vals[comp] = acc;
        }
        Ok(MetricValue { g11: vals[0], g12: vals[1], g22: vals[2] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit;
    use approx::assert_relative_eq;

    fn mono(i_half: i16, eps: i16, k_quarter: i16, two: u8, three: u8) -> Mono {
        Mono { i_half, eps, k_quarter, two_quarter: two, three_half: three }
    }

    fn coeff(s: &TrigSeries, m: u32, phase: Phase, mono: Mono) -> BigRational {
        s.coefficient(&Term::new(m, phase, mono))
    }

    #[test]
    fn generators_single_well_exact() {
        let exp = Expansion::new(Branch::SingleWell, 2).unwrap();
        // W₁ = I²λ/k^(3/2)·(sin2φ₀/24 − sin4φ₀/192)
        let m1 = mono(4, 1, -6, 0, 0);
        assert_eq!(coeff(&exp.w[0], 2, Phase::Sin, m1), rat(1, 24));
        assert_eq!(coeff(&exp.w[0], 4, Phase::Sin, m1), rat(-1, 192));
        assert_eq!(exp.w[0].len(), 2);
        // W₂ = I³λ²/k³·(−384sin2 + 132sin4 − 32sin6 + 3sin8)/55296
        let m2 = mono(6, 2, -12, 0, 0);
        assert_eq!(coeff(&exp.w[1], 2, Phase::Sin, m2), rat(-384, 55296));
        assert_eq!(coeff(&exp.w[1], 4, Phase::Sin, m2), rat(132, 55296));
        assert_eq!(coeff(&exp.w[1], 6, Phase::Sin, m2), rat(-32, 55296));
        assert_eq!(coeff(&exp.w[1], 8, Phase::Sin, m2), rat(3, 55296));
        assert_eq!(exp.w[1].len(), 4);
        // E₁ = λI²/(16k)
        assert_eq!(coeff(&exp.energy[1], 0, Phase::Cos, mono(4, 1, -4, 0, 0)), rat(1, 16));
        assert_eq!(exp.energy[1].len(), 1);
    }

    #[test]
    fn generators_double_well_exact() {
        let exp = Expansion::new(Branch::DoubleWell, 2).unwrap();
        // W₁ = √3·2^(3/4)/72·I^(3/2)|k|^(−3/4)·(−9cosφ₀ + cos3φ₀)
        let m1 = mono(3, 1, -3, 3, 1);
        assert_eq!(coeff(&exp.w[0], 1, Phase::Cos, m1), rat(-1, 8));
        assert_eq!(coeff(&exp.w[0], 3, Phase::Cos, m1), rat(1, 72));
        assert_eq!(exp.w[0].len(), 2);
        // W₂ = −√2·I²|k|^(−3/2)/768·(37sin2 − 8sin4 + sin6)
        let m2 = mono(4, 2, -6, 2, 0);
        assert_eq!(coeff(&exp.w[1], 2, Phase::Sin, m2), rat(-37, 768));
        assert_eq!(coeff(&exp.w[1], 4, Phase::Sin, m2), rat(1, 96));
        assert_eq!(coeff(&exp.w[1], 6, Phase::Sin, m2), rat(-1, 768));
        assert_eq!(exp.w[1].len(), 3);
        // E₁ = 0: odd perturbation averages away.
        assert!(exp.energy[1].is_zero());
    }

    #[test]
    fn beta_single_well_exact() {
        let exp = Expansion::new(Branch::SingleWell, 2).unwrap();
        let b1 = exp.beta(Observable::KCoupling).unwrap();
        let b2 = exp.beta(Observable::LambdaCoupling).unwrap();
        // β₁⁰ = I/(2√k) − I²λ/(16k²) + 85·I³λ²/(4608k^(7/2))
        assert_eq!(coeff(&b1[0].re, 0, Phase::Cos, mono(2, 0, -2, 0, 0)), rat(1, 2));
        assert_eq!(coeff(&b1[0].re, 0, Phase::Cos, mono(4, 1, -8, 0, 0)), rat(-1, 16));
        assert_eq!(coeff(&b1[0].re, 0, Phase::Cos, mono(6, 2, -14, 0, 0)), rat(85, 4608));
        // β₁² = −I/(4√k) + 5I²λ/(192k²); β₁⁴ = I²λ/(192k²) + O(λ²)
        assert_eq!(coeff(&b1[2].re, 0, Phase::Cos, mono(2, 0, -2, 0, 0)), rat(-1, 4));
        assert_eq!(coeff(&b1[2].re, 0, Phase::Cos, mono(4, 1, -8, 0, 0)), rat(5, 192));
        assert_eq!(coeff(&b1[4].re, 0, Phase::Cos, mono(4, 1, -8, 0, 0)), rat(1, 192));
        // β₂⁰ = I²/(16k) − 17I³λ/(1152k^(5/2)); β₂² = −I²/(24k) + 7I³λ/(768k^(5/2));
        // β₂⁴ = I²/(96k) + O(λ)
        assert_eq!(coeff(&b2[0].re, 0, Phase::Cos, mono(4, 0, -4, 0, 0)), rat(1, 16));
        assert_eq!(coeff(&b2[0].re, 0, Phase::Cos, mono(6, 1, -10, 0, 0)), rat(-17, 1152));
        assert_eq!(coeff(&b2[2].re, 0, Phase::Cos, mono(4, 0, -4, 0, 0)), rat(-1, 24));
        assert_eq!(coeff(&b2[2].re, 0, Phase::Cos, mono(6, 1, -10, 0, 0)), rat(7, 768));
        assert_eq!(coeff(&b2[4].re, 0, Phase::Cos, mono(4, 0, -4, 0, 0)), rat(1, 96));
        // Single-well observables are even: no odd harmonics, no imaginary parts.
        for b in [&b1, &b2] {
            for (m, c) in b.iter().enumerate() {
                assert!(c.im.is_zero(), "m = {m} should be purely real");
                if m % 2 == 1 {
                    assert!(c.re.is_zero(), "odd m = {m} should vanish");
                }
            }
        }
    }

    #[test]
    fn beta_double_well_leading_terms() {
        let exp = Expansion::new(Branch::DoubleWell, 3).unwrap();
        let b1 = exp.beta(Observable::KCoupling).unwrap();
        let b2 = exp.beta(Observable::LambdaCoupling).unwrap();
        // β₁⁽¹⁾ = (1/2)·2^(3/4)·√3·√I·|k|^(1/4)/ε·i ≈ 1.45648·i·√(I|k|^(1/2))/ε
        assert_eq!(coeff(&b1[1].im, 0, Phase::Cos, mono(1, -1, 1, 3, 1)), rat(1, 2));
        assert!(b1[1].re.is_zero());
        // β₂⁽¹⁾ leading: same radical with |k|^(5/4)/ε³.
        assert_eq!(coeff(&b2[1].im, 0, Phase::Cos, mono(1, -3, 5, 3, 1)), rat(1, 2));
        // Sub-leading ε⁻¹ piece of β₂⁽¹⁾ sums to ≈ −0.300383·I^(3/2)|k|^(−1/4).
        let ctx = EvalCtx { action: 1.0, eps: 1.0, abs_k: 1.0, phi0: 0.0 };
        let mut sub = 0.0;
        for (t, c) in b2[1].im.iter() {
            if t.mono.eps == -1 && t.mono.i_half == 3 {
                sub += TrigSeries::from_term(*t, c.clone()).eval(&ctx);
            }
        }
        assert_relative_eq!(sub, -0.300383, max_relative = 2e-5);
        // Even harmonics real, odd imaginary.
        for b in [&b1, &b2] {
            for (m, c) in b.iter().enumerate() {
                if m % 2 == 0 {
                    assert!(c.im.is_zero(), "even m = {m} must be real");
                } else {
                    assert!(c.re.is_zero(), "odd m = {m} must be imaginary");
                }
            }
        }
    }

    #[test]
    fn canonical_transformation_is_symplectic() {
        for (branch, order) in [(Branch::SingleWell, 5), (Branch::DoubleWell, 5)] {
            let exp = Expansion::new(branch, order).unwrap();
            let defect = exp.canonical_defect().unwrap();
            assert!(defect.is_zero(), "bracket defect {defect} at order {order}");
        }
    }

    #[test]
    fn metric_series_single_well_coefficients() {
        let series = cmt_series(Branch::SingleWell, 3).unwrap();
        assert_eq!(series.trusted_alpha, 3);
        // Harmonic row: 1/32, 1/192, 65/73728.
        assert_relative_eq!(series.c11[0], 1.0 / 32.0, max_relative = 1e-13);
        assert_relative_eq!(series.c12[0], 1.0 / 192.0, max_relative = 1e-13);
        assert_relative_eq!(series.c22[0], 65.0 / 73728.0, max_relative = 1e-13);
        // First correction to g11: 11/768.
        assert_relative_eq!(series.c11[1], 11.0 / 768.0, max_relative = 1e-12);
    }

    #[test]
    fn metric_series_double_well_coefficients() {
        let series = cmt_series(Branch::DoubleWell, 5).unwrap();
        assert_eq!(series.trusted_alpha, 2);
        let c0 = 3.0 / 2f64.sqrt();
        assert_relative_eq!(series.c11[0], c0, max_relative = 1e-13);
        assert_relative_eq!(series.c12[0], c0, max_relative = 1e-13);
        assert_relative_eq!(series.c22[0], c0, max_relative = 1e-13);
        assert_relative_eq!(series.c11[1], 0.40625, max_relative = 1e-12);
        assert_relative_eq!(series.c12[1], 0.1875, max_relative = 1e-12);
        assert_eq!(series.c22[1], 0.0);
        assert_relative_eq!(series.c11[2], 0.17678, max_relative = 1e-4);
        assert_relative_eq!(series.c12[2], 0.098823, max_relative = 1e-4);
        assert_relative_eq!(series.c22[2], 0.044399, max_relative = 1e-4);
    }

    #[test]
    fn frequency_and_energy_match_orbit_integrals() {
        let single = Expansion::new(Branch::SingleWell, 6).unwrap();
        let params = SystemParams::new(1.3, 0.02).unwrap();
        let e_numeric = orbit::energy_of_action(&params, 0.4, None).unwrap();
        let w_numeric = orbit::omega_of_action(&params, 0.4, None).unwrap();
        assert_relative_eq!(single.eval_energy(&params, 0.4).unwrap(), e_numeric, max_relative = 1e-9);
        assert_relative_eq!(single.eval_omega(&params, 0.4).unwrap(), w_numeric, max_relative = 1e-9);

        let double = Expansion::new(Branch::DoubleWell, 6).unwrap();
        let params = SystemParams::new(-1.0, 0.01).unwrap();
        let well = Some(crate::model::Well::Left);
        let e_numeric = orbit::energy_of_action(&params, 0.3, well).unwrap();
        let w_numeric = orbit::omega_of_action(&params, 0.3, well).unwrap();
        assert_relative_eq!(double.eval_energy(&params, 0.3).unwrap(), e_numeric, max_relative = 1e-5);
        assert_relative_eq!(double.eval_omega(&params, 0.3).unwrap(), w_numeric, max_relative = 1e-5);
    }

    #[test]
    fn metric_series_matches_orbit_metric() {
        let series = cmt_series(Branch::SingleWell, 6).unwrap();
        let params = SystemParams::new(1.3, 0.02).unwrap();
        let (_, fd) = orbit::orbit_fourier(&params, 0.4, None, 32, 12).unwrap();
        let numeric = orbit::cmt_numeric(&fd).metric;
        let m = series.eval(&params, 0.4).unwrap();
        assert_relative_eq!(m.g11, numeric.g11, max_relative = 1e-9);
        assert_relative_eq!(m.g12, numeric.g12, max_relative = 1e-9);
        assert_relative_eq!(m.g22, numeric.g22, max_relative = 1e-9);

        let series = cmt_series(Branch::DoubleWell, 6).unwrap();
        let params = SystemParams::new(-1.0, 0.01).unwrap();
        let (_, fd) =
            orbit::orbit_fourier(&params, 0.3, Some(crate::model::Well::Right), 32, 12).unwrap();
        let numeric = orbit::cmt_numeric(&fd).metric;
        let m = series.eval(&params, 0.3).unwrap();
        assert_relative_eq!(m.g11, numeric.g11, max_relative = 1e-7);
        assert_relative_eq!(m.g12, numeric.g12, max_relative = 1e-7);
        assert_relative_eq!(m.g22, numeric.g22, max_relative = 1e-7);
    }

    #[test]
    fn quantized_evaluation_replaces_action_powers() {
        let series = cmt_series(Branch::SingleWell, 1).unwrap();
        let params = SystemParams::new(1.0, 1e-9).unwrap();
        // With f_p ≡ 1 and ħ = 1 the harmonic row gives g11 = 1/32 at I = 1.
        let f = vec![1.0; series.max_action_power() + 1];
        let m = series.eval_quantized(&params, &f).unwrap();
        assert_relative_eq!(m.g11, 1.0 / 32.0, max_relative = 1e-6);
        // Short ladders are rejected.
        assert!(series.eval_quantized(&params, &[1.0, 1.0]).is_err());
    }
}
