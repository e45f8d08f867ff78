//! System definition: parameters, potential, and stationary points of
//! `H = p²/2 + (k/2) q² + (λ/24) q⁴` with unit mass.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn default_hbar() -> f64 {
    1.0
}

/// Parameters of the oscillator family. `lambda > 0` always; `k` may take
/// either sign (`k < 0` is the double well); `hbar > 0`. Mass is fixed to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub k: f64,
    pub lambda: f64,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
}

impl SystemParams {
    pub fn new(k: f64, lambda: f64) -> Result<Self> {
        Self::with_hbar(k, lambda, 1.0)
    }

    pub fn with_hbar(k: f64, lambda: f64, hbar: f64) -> Result<Self> {
        if !k.is_finite() || !lambda.is_finite() || !hbar.is_finite() {
            return Err(Error::Domain("non-finite system parameter".into()));
        }
        if lambda <= 0.0 {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        if hbar <= 0.0 {
            return Err(Error::Domain(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { k, lambda, hbar })
    }

    /// Validates an already-constructed value (e.g. after deserialization).
    pub fn validate(&self) -> Result<()> {
        Self::with_hbar(self.k, self.lambda, self.hbar).map(|_| ())
    }

    /// `V(q) = (k/2) q² + (λ/24) q⁴`.
    pub fn potential(&self, q: f64) -> f64 {
        0.5 * self.k * q * q + self.lambda / 24.0 * q.powi(4)
    }

    /// `V'(q) = k q + (λ/6) q³`.
    pub fn potential_deriv(&self, q: f64) -> f64 {
        self.k * q + self.lambda / 6.0 * q * q * q
    }

    /// Location of the right-hand well minimum, `√(−6k/λ)`. Domain error for
    /// `k ≥ 0` where the origin is the only stationary point.
    pub fn well_minimum(&self) -> Result<f64> {
        if self.k >= 0.0 {
            return Err(Error::Domain("well minimum requires k < 0".into()));
        }
        Ok((-6.0 * self.k / self.lambda).sqrt())
    }

    /// `V(0) − V(q*) = 3k²/(2λ)` for `k < 0`; domain error otherwise.
    pub fn barrier_height(&self) -> Result<f64> {
        if self.k >= 0.0 {
            return Err(Error::Domain("barrier height requires k < 0".into()));
        }
        Ok(1.5 * self.k * self.k / self.lambda)
    }

    /// Stationary points of the flow, innermost classification per point.
    /// One center at the origin for `k ≥ 0`; two centers at `±√(−6k/λ)`
    /// separated by a hyperbolic point at the origin for `k < 0`.
    pub fn fixed_points(&self) -> Vec<FixedPoint> {
        if self.k >= 0.0 {
            vec![FixedPoint { q: 0.0, p: 0.0, kind: StabilityKind::Center }]
        } else {
            let qs = (-6.0 * self.k / self.lambda).sqrt();
            vec![
                FixedPoint { q: -qs, p: 0.0, kind: StabilityKind::Center },
                FixedPoint { q: 0.0, p: 0.0, kind: StabilityKind::Hyperbolic },
                FixedPoint { q: qs, p: 0.0, kind: StabilityKind::Center },
            ]
        }
    }
}

/// Linear stability of a stationary point of the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityKind {
    Center,
    Hyperbolic,
}

/// A stationary point `(q, p = 0)` of the Hamiltonian flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub q: f64,
    pub p: f64,
    pub kind: StabilityKind,
}

/// Which well a bound double-well orbit lives in (`k < 0` only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Well {
    Left,
    Right,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn potential_at_reference_point() {
        let p = SystemParams::new(1.0, 0.2).unwrap();
        assert_relative_eq!(p.potential(2.0), 2.0 + 2.0 / 15.0, max_relative = 1e-15);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(SystemParams::new(1.0, 0.0).is_err());
        assert!(SystemParams::new(1.0, -0.1).is_err());
        assert!(SystemParams::with_hbar(1.0, 0.2, 0.0).is_err());
        assert!(SystemParams::new(f64::NAN, 0.2).is_err());
    }

    #[test]
    fn single_well_has_one_center() {
        let p = SystemParams::new(1.0, 0.2).unwrap();
        let fps = p.fixed_points();
        assert_eq!(fps.len(), 1);
        assert_eq!(fps[0].kind, StabilityKind::Center);
        assert_eq!(fps[0].q, 0.0);
        assert!(p.barrier_height().is_err());
    }

    #[test]
    fn double_well_geometry() {
        let p = SystemParams::new(-1.0, 0.2).unwrap();
        let fps = p.fixed_points();
        assert_eq!(fps.len(), 3);
        assert_relative_eq!(fps[2].q, 30.0f64.sqrt(), max_relative = 1e-15);
        assert_eq!(fps[1].kind, StabilityKind::Hyperbolic);
        assert_relative_eq!(p.barrier_height().unwrap(), 7.5, max_relative = 1e-15);
        // Minima sit a barrier depth below the origin.
        let qs = p.well_minimum().unwrap();
        assert_relative_eq!(p.potential(qs), -7.5, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn potential_is_even(k in -5.0f64..5.0, lam in 1e-3f64..5.0, q in -10.0f64..10.0) {
            let p = SystemParams::new(k, lam).unwrap();
            prop_assert!((p.potential(q) - p.potential(-q)).abs() <= 1e-12 * (1.0 + p.potential(q).abs()));
        }

        #[test]
        fn gradient_vanishes_at_fixed_points(k in -5.0f64..5.0, lam in 1e-3f64..5.0) {
            let p = SystemParams::new(k, lam).unwrap();
            for fp in p.fixed_points() {
                prop_assert!(p.potential_deriv(fp.q).abs() < 1e-9);
            }
        }
    }
}
