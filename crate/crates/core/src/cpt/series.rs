//! Exact trigonometric series over monomials in the action, the expansion
//! parameter, and `|k|`, with quarter-power radical bookkeeping.
//!
//! Every quantity in the canonical perturbation expansion of the oscillator
//! is a finite sum of terms
//! `r · 2^(t/4) · 3^(s/2) · I^(i/2) · ε^e · |k|^(q/4) · {cos, sin}(m φ₀)`
//! with rational `r`. The types here close that family under ring
//! operations, `∂/∂φ₀`, `∂/∂I`, antidifferentiation, and angle averaging,
//! so the expansion is carried to any order without rounding.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::{Error, Result};

/// Convenience exact rational.
pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn int_pow(base: u64, exp: i32) -> BigRational {
    let p = BigInt::from(base).pow(exp.unsigned_abs());
    if exp >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}

/// Folds the integer parts of radical exponents into a rational factor,
/// leaving `2^(t/4)` with `t ∈ 0..4` and `3^(s/2)` with `s ∈ 0..2`.
fn norm_radicals(two: i32, three: i32) -> (u8, u8, BigRational) {
    let t = two.rem_euclid(4);
    let s = three.rem_euclid(2);
    let factor = int_pow(2, (two - t) / 4) * int_pow(3, (three - s) / 2);
    (t as u8, s as u8, factor)
}

/// Coefficient monomial `I^(i_half/2) · ε^eps · |k|^(k_quarter/4) ·
/// 2^(two_quarter/4) · 3^(three_half/2)`. The radical exponents stay
/// normalized; their integer parts live in the rational coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Mono {
    pub i_half: i16,
    pub eps: i16,
    pub k_quarter: i16,
    pub two_quarter: u8,
    pub three_half: u8,
}

impl Mono {
    pub const ONE: Mono = Mono {
        i_half: 0,
        eps: 0,
        k_quarter: 0,
        two_quarter: 0,
        three_half: 0,
    };

    /// Product with radical normalization; the returned rational absorbs
    /// any whole powers of 2 and 3 that split off.
    pub fn mul(&self, other: &Mono) -> (Mono, BigRational) {
        let (two, three, factor) = norm_radicals(
            self.two_quarter as i32 + other.two_quarter as i32,
            self.three_half as i32 + other.three_half as i32,
        );
        (
            Mono {
                i_half: self.i_half + other.i_half,
                eps: self.eps + other.eps,
                k_quarter: self.k_quarter + other.k_quarter,
                two_quarter: two,
                three_half: three,
            },
            factor,
        )
    }

    /// Multiplicative inverse as a (monomial, rational factor) pair.
    pub fn inv(&self) -> (Mono, BigRational) {
        let (two, three, factor) =
            norm_radicals(-(self.two_quarter as i32), -(self.three_half as i32));
        (
            Mono {
                i_half: -self.i_half,
                eps: -self.eps,
                k_quarter: -self.k_quarter,
                two_quarter: two,
                three_half: three,
            },
            factor,
        )
    }

    fn value(&self, ctx: &EvalCtx) -> f64 {
        ctx.action.powf(self.i_half as f64 / 2.0)
            * ctx.eps.powi(self.eps as i32)
            * ctx.abs_k.powf(self.k_quarter as f64 / 4.0)
            * 2f64.powf(self.two_quarter as f64 / 4.0)
            * 3f64.powf(self.three_half as f64 / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Cos,
    Sin,
}

/// One structural term `mono · phase(m φ₀)`; `m = 0` terms are always `Cos`
/// (constants in the angle).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub m: u32,
    pub phase: Phase,
    pub mono: Mono,
}

impl Term {
    pub fn new(m: u32, phase: Phase, mono: Mono) -> Term {
        Term { m, phase, mono }
    }
}

/// Evaluation point for a series.
#[derive(Debug, Clone, Copy)]
pub struct EvalCtx {
    pub action: f64,
    pub eps: f64,
    pub abs_k: f64,
    pub phi0: f64,
}

/// Cap value that disables ε-truncation in products.
pub const NO_CAP: i32 = i32::MAX;

/// Finite trigonometric series with exact coefficients. Invariants: no zero
/// coefficients are stored and `m = 0` terms are `Cos` only.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrigSeries {
    terms: BTreeMap<Term, BigRational>,
}

impl TrigSeries {
    pub fn zero() -> TrigSeries {
        TrigSeries::default()
    }

    pub fn one() -> TrigSeries {
        TrigSeries::constant(Mono::ONE, BigRational::one())
    }

    pub fn constant(mono: Mono, coeff: BigRational) -> TrigSeries {
        TrigSeries::from_term(Term::new(0, Phase::Cos, mono), coeff)
    }

    pub fn from_term(term: Term, coeff: BigRational) -> TrigSeries {
        let mut s = TrigSeries::zero();
        s.insert_add(term, coeff);
        s
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Term, &BigRational)> {
        self.terms.iter()
    }

    /// Coefficient of an exact structural term (zero if absent).
    pub fn coefficient(&self, term: &Term) -> BigRational {
        self.terms.get(term).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Largest harmonic present.
    pub fn max_harmonic(&self) -> u32 {
        self.terms.keys().next_back().map_or(0, |t| t.m)
    }

    fn insert_add(&mut self, term: Term, coeff: BigRational) {
        if coeff.is_zero() || (term.m == 0 && term.phase == Phase::Sin) {
            return;
        }
        let entry = self.terms.entry(term).or_insert_with(BigRational::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&term);
        }
    }

    /// Signed-harmonic insert: `cos(−x) = cos x`, `sin(−x) = −sin x`,
    /// `sin 0 = 0`.
    fn insert_signed(&mut self, m: i64, phase: Phase, mono: Mono, coeff: BigRational) {
        let (m, coeff) = if m < 0 {
            match phase {
                Phase::Cos => (-m, coeff),
                Phase::Sin => (-m, -coeff),
            }
        } else {
            (m, coeff)
        };
        self.insert_add(Term::new(m as u32, phase, mono), coeff);
    }

    pub fn add_assign(&mut self, other: &TrigSeries) {
        for (t, c) in &other.terms {
            self.insert_add(*t, c.clone());
        }
    }

    pub fn add(&self, other: &TrigSeries) -> TrigSeries {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn sub(&self, other: &TrigSeries) -> TrigSeries {
        let mut out = self.clone();
        for (t, c) in &other.terms {
            out.insert_add(*t, -c.clone());
        }
        out
    }

    pub fn neg(&self) -> TrigSeries {
        let mut out = TrigSeries::zero();
        for (t, c) in &self.terms {
            out.insert_add(*t, -c.clone());
        }
        out
    }

    pub fn scale_rat(&self, factor: &BigRational) -> TrigSeries {
        let mut out = TrigSeries::zero();
        if factor.is_zero() {
            return out;
        }
        for (t, c) in &self.terms {
            out.insert_add(*t, c * factor);
        }
        out
    }

    /// Multiplies every term by `mono · factor`.
    pub fn scale_mono(&self, mono: &Mono, factor: &BigRational) -> TrigSeries {
        let mut out = TrigSeries::zero();
        for (t, c) in &self.terms {
            let (m, fold) = t.mono.mul(mono);
            out.insert_add(Term::new(t.m, t.phase, m), c * factor * fold);
        }
        out
    }

    /// Product with the trigonometric product-to-sum rules; terms whose
    /// ε power would exceed `eps_cap` are dropped.
    pub fn mul(&self, other: &TrigSeries, eps_cap: i32) -> TrigSeries {
        let mut out = TrigSeries::zero();
        let half = rat(1, 2);
        for (ta, ca) in &self.terms {
            for (tb, cb) in &other.terms {
                let (mono, fold) = ta.mono.mul(&tb.mono);
                if (mono.eps as i32) > eps_cap {
                    continue;
                }
                let c = ca * cb * &fold * &half;
                let (ma, mb) = (ta.m as i64, tb.m as i64);
                match (ta.phase, tb.phase) {
                    (Phase::Cos, Phase::Cos) => {
                        // cos a · cos b = ½cos(a−b) + ½cos(a+b)
                        out.insert_signed(ma - mb, Phase::Cos, mono, c.clone());
                        out.insert_signed(ma + mb, Phase::Cos, mono, c);
                    }
                    (Phase::Sin, Phase::Sin) => {
                        // sin a · sin b = ½cos(a−b) − ½cos(a+b)
                        out.insert_signed(ma - mb, Phase::Cos, mono, c.clone());
                        out.insert_signed(ma + mb, Phase::Cos, mono, -c);
                    }
                    (Phase::Sin, Phase::Cos) => {
                        // sin a · cos b = ½sin(a+b) + ½sin(a−b)
                        out.insert_signed(ma + mb, Phase::Sin, mono, c.clone());
                        out.insert_signed(ma - mb, Phase::Sin, mono, c);
                    }
                    (Phase::Cos, Phase::Sin) => {
                        // cos a · sin b = ½sin(a+b) − ½sin(a−b)
                        out.insert_signed(ma + mb, Phase::Sin, mono, c.clone());
                        out.insert_signed(mb - ma, Phase::Sin, mono, c);
                    }
                }
            }
        }
        out
    }

    /// Drops terms with ε power above `eps_cap`.
    pub fn truncate_eps(&self, eps_cap: i32) -> TrigSeries {
        let mut out = TrigSeries::zero();
        for (t, c) in &self.terms {
            if (t.mono.eps as i32) <= eps_cap {
                out.insert_add(*t, c.clone());
            }
        }
        out
    }

    /// `∂/∂φ₀`.
    pub fn dphi(&self) -> TrigSeries {
        let mut out = TrigSeries::zero();
        for (t, c) in &self.terms {
            if t.m == 0 {
                continue;
            }
            let m = BigRational::from_integer(BigInt::from(t.m));
            match t.phase {
                Phase::Cos => out.insert_add(Term::new(t.m, Phase::Sin, t.mono), -(c * &m)),
                Phase::Sin => out.insert_add(Term::new(t.m, Phase::Cos, t.mono), c * &m),
            }
        }
        out
    }

    /// Zero-average primitive in φ₀. Fails on a nonzero angle average,
    /// whose primitive would be secular.
    pub fn anti_dphi(&self) -> Result<TrigSeries> {
        let mut out = TrigSeries::zero();
        for (t, c) in &self.terms {
            if t.m == 0 {
                return Err(Error::Domain(
                    "antiderivative in the angle requires a zero-average series".into(),
                ));
            }
            let inv_m = BigRational::new(BigInt::one(), BigInt::from(t.m));
            match t.phase {
                Phase::Cos => out.insert_add(Term::new(t.m, Phase::Sin, t.mono), c * &inv_m),
                Phase::Sin => out.insert_add(Term::new(t.m, Phase::Cos, t.mono), -(c * &inv_m)),
            }
        }
        Ok(out)
    }

    /// `∂/∂I` on half-integer action powers.
    pub fn di(&self) -> TrigSeries {
        let mut out = TrigSeries::zero();
        for (t, c) in &self.terms {
            if t.mono.i_half == 0 {
                continue;
            }
            let mut mono = t.mono;
            let factor = rat(mono.i_half as i64, 2);
            mono.i_half -= 2;
            out.insert_add(Term::new(t.m, t.phase, mono), c * factor);
        }
        out
    }

    /// Angle average: the `m = 0` part.
    pub fn average(&self) -> TrigSeries {
        let mut out = TrigSeries::zero();
        for (t, c) in &self.terms {
            if t.m == 0 {
                out.insert_add(*t, c.clone());
            }
        }
        out
    }

    /// Coefficient series of `cos(m φ₀)` (an angle-free series).
    pub fn coeff_cos(&self, m: u32) -> TrigSeries {
        let mut out = TrigSeries::zero();
        for (t, c) in &self.terms {
            if t.m == m && t.phase == Phase::Cos {
                out.insert_add(Term::new(0, Phase::Cos, t.mono), c.clone());
            }
        }
        out
    }

    /// Coefficient series of `sin(m φ₀)`.
    pub fn coeff_sin(&self, m: u32) -> TrigSeries {
        let mut out = TrigSeries::zero();
        for (t, c) in &self.terms {
            if t.m == m && t.phase == Phase::Sin {
                out.insert_add(Term::new(0, Phase::Cos, t.mono), c.clone());
            }
        }
        out
    }

    pub fn eval(&self, ctx: &EvalCtx) -> f64 {
        let mut acc = 0.0;
        for (t, c) in &self.terms {
            let trig = match t.phase {
                Phase::Cos => (t.m as f64 * ctx.phi0).cos(),
                Phase::Sin => (t.m as f64 * ctx.phi0).sin(),
            };
            acc += c.to_f64().unwrap_or(f64::NAN) * t.mono.value(ctx) * trig;
        }
        acc
    }
}

fn fmt_pow(f: &mut fmt::Formatter<'_>, base: &str, num: i32, den: i32) -> fmt::Result {
    let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1);
    let (n, d) = (num / g as i32, den / g as i32);
    if n == 1 && d == 1 {
        write!(f, "·{base}")
    } else if d == 1 && n >= 0 {
        write!(f, "·{base}^{n}")
    } else if d == 1 {
        write!(f, "·{base}^({n})")
    } else {
        write!(f, "·{base}^({n}/{d})")
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Renders one term as `(coeff)·2^(t/4)·3^(s/2)·I^(i/2)·eps^e·|k|^(q/4)·trig`.
pub struct TermDisplay<'a> {
    pub term: &'a Term,
    pub coeff: &'a BigRational,
}

impl fmt::Display for TermDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.coeff)?;
        let m = self.term.mono;
        if m.two_quarter != 0 {
            fmt_pow(f, "2", m.two_quarter as i32, 4)?;
        }
        if m.three_half != 0 {
            fmt_pow(f, "3", m.three_half as i32, 2)?;
        }
        if m.i_half != 0 {
            fmt_pow(f, "I", m.i_half as i32, 2)?;
        }
        if m.eps != 0 {
            fmt_pow(f, "eps", m.eps as i32, 1)?;
        }
        if m.k_quarter != 0 {
            fmt_pow(f, "|k|", m.k_quarter as i32, 4)?;
        }
        if self.term.m > 0 {
            let name = match self.term.phase {
                Phase::Cos => "cos",
                Phase::Sin => "sin",
            };
            if self.term.m == 1 {
                write!(f, "·{name}(phi0)")?;
            } else {
                write!(f, "·{name}({}·phi0)", self.term.m)?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for TrigSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (t, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", TermDisplay { term: t, coeff: c })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mono(i_half: i16, eps: i16, k_quarter: i16, two: u8, three: u8) -> Mono {
        Mono { i_half, eps, k_quarter, two_quarter: two, three_half: three }
    }

    #[test]
    fn radical_folding() {
        let a = mono(0, 0, 0, 3, 1);
        let (prod, factor) = a.mul(&a);
        // 2^(3/4)·2^(3/4) = 2·2^(1/2); 3^(1/2)·3^(1/2) = 3.
        assert_eq!(prod.two_quarter, 2);
        assert_eq!(prod.three_half, 0);
        assert_eq!(factor, rat(6, 1));
        let (inv, inv_factor) = a.inv();
        // (2^(3/4)·3^(1/2))⁻¹ = 2^(1/4)·3^(1/2)/6.
        assert_eq!(inv.two_quarter, 1);
        assert_eq!(inv.three_half, 1);
        assert_eq!(inv_factor, rat(1, 6));
    }

    #[test]
    fn sin_squared_identity() {
        let s = TrigSeries::from_term(Term::new(1, Phase::Sin, Mono::ONE), rat(1, 1));
        let sq = s.mul(&s, NO_CAP);
        // sin² = ½ − ½cos 2φ₀
        assert_eq!(sq.coefficient(&Term::new(0, Phase::Cos, Mono::ONE)), rat(1, 2));
        assert_eq!(sq.coefficient(&Term::new(2, Phase::Cos, Mono::ONE)), rat(-1, 2));
        assert_eq!(sq.len(), 2);
    }

    #[test]
    fn derivative_and_primitive_round_trip() {
        let mut s = TrigSeries::zero();
        s.insert_add(Term::new(2, Phase::Sin, mono(3, 1, -2, 1, 0)), rat(5, 7));
        s.insert_add(Term::new(5, Phase::Cos, mono(2, 0, 4, 0, 1)), rat(-3, 2));
        assert_eq!(s.dphi().anti_dphi().unwrap(), s);
        // d/dI of I^(3/2) → (3/2)·I^(1/2); back-check by one more derivative.
        let di = s.di();
        assert_eq!(
            di.coefficient(&Term::new(2, Phase::Sin, mono(1, 1, -2, 1, 0))),
            rat(15, 14)
        );
    }

    #[test]
    fn average_requires_no_secular_term() {
        let s = TrigSeries::constant(Mono::ONE, rat(1, 1));
        assert!(s.anti_dphi().is_err());
    }

    fn arb_mono() -> impl Strategy<Value = Mono> {
        (-4i16..=4, -2i16..=2, -4i16..=4, 0u8..4, 0u8..2)
            .prop_map(|(i, e, k, t, s)| mono(i, e, k, t, s))
    }

    fn arb_series() -> impl Strategy<Value = TrigSeries> {
        proptest::collection::vec(
            (0u32..=3, prop::bool::ANY, arb_mono(), -6i64..=6, 1i64..=4),
            1..4,
        )
        .prop_map(|terms| {
            let mut s = TrigSeries::zero();
            for (m, is_sin, mono, num, den) in terms {
                let phase = if is_sin { Phase::Sin } else { Phase::Cos };
                s.insert_add(Term::new(m, phase, mono), rat(num, den));
            }
            s
        })
    }

    proptest::proptest! {
        #[test]
        fn product_matches_pointwise_values(a in arb_series(), b in arb_series()) {
            let ctx = EvalCtx { action: 1.3, eps: 0.7, abs_k: 1.9, phi0: 0.83 };
            let lhs = a.mul(&b, NO_CAP).eval(&ctx);
            let rhs = a.eval(&ctx) * b.eval(&ctx);
            let scale = 1.0f64.max(a.eval(&ctx).abs()) * 1.0f64.max(b.eval(&ctx).abs());
            prop_assert!((lhs - rhs).abs() <= 1e-9 * scale);
        }

        #[test]
        fn dphi_matches_finite_difference(a in arb_series()) {
            let h = 1e-6;
            let at = |phi0: f64| a.eval(&EvalCtx { action: 1.1, eps: 0.9, abs_k: 1.4, phi0 });
            let numeric = (at(0.37 + h) - at(0.37 - h)) / (2.0 * h);
            let exact = a.dphi().eval(&EvalCtx { action: 1.1, eps: 0.9, abs_k: 1.4, phi0: 0.37 });
            prop_assert!((numeric - exact).abs() <= 1e-5 * (1.0 + exact.abs()));
        }
    }
}
