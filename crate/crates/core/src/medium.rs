//! The two-phase medium: piecewise-constant diffusivity and density on
//! each side of the interface at the origin.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MediumError {
    #[error("medium coefficient {field} must be strictly positive and finite, got {value}")]
    InvalidCoefficient { field: &'static str, value: f64 },
}

/// Piecewise-constant medium `(a1, a2, rho1, rho2)` with the derived
/// reflection weight `beta` and the ratio condition flag.
///
/// `beta = (rho2*sqrt(a2) - rho1*sqrt(a1)) / (rho2*sqrt(a2) + rho1*sqrt(a1))`,
/// so `-1 < beta < 1` for any valid coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    a1: f64,
    a2: f64,
    rho1: f64,
    rho2: f64,
    beta: f64,
    satisfies_crhoa: bool,
}

impl Medium {
    pub fn new(a1: f64, a2: f64, rho1: f64, rho2: f64) -> Result<Self, MediumError> {
        for (field, value) in [("a1", a1), ("a2", a2), ("rho1", rho1), ("rho2", rho2)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(MediumError::InvalidCoefficient { field, value });
            }
        }
        let right = rho2 * a2.sqrt();
        let left = rho1 * a1.sqrt();
        let beta = (right - left) / (right + left);
        let satisfies_crhoa = (a1.sqrt() / a2.sqrt()).max(1.0) <= rho2 / rho1;
        Ok(Medium {
            a1,
            a2,
            rho1,
            rho2,
            beta,
            satisfies_crhoa,
        })
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }

    /// Reflection weight at the interface.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Whether `max(1, sqrt(a1/a2)) <= rho2/rho1` holds. The distributional
    /// limit theorems for the piecewise medium are stated under this ratio
    /// condition.
    pub fn satisfies_crhoa(&self) -> bool {
        self.satisfies_crhoa
    }

    /// Diffusivity seen at position `z` (left value on the interface).
    pub fn diffusivity(&self, z: f64) -> f64 {
        if z <= 0.0 {
            self.a1
        } else {
            self.a2
        }
    }

    /// The coordinate change `f(z) = z/sqrt(a1)` for `z <= 0`, `z/sqrt(a2)`
    /// for `z > 0`; continuous, strictly increasing, `f(0) = 0`.
    pub fn coord_map(&self, z: f64) -> f64 {
        if z <= 0.0 {
            z / self.a1.sqrt()
        } else {
            z / self.a2.sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_medium_has_zero_beta() {
        let m = Medium::new(1.0, 1.0, 2.0, 2.0).unwrap();
        assert_eq!(m.beta(), 0.0);
        assert!(m.satisfies_crhoa());
    }

    #[test]
    fn beta_direct_arithmetic() {
        let m = Medium::new(1.0, 4.0, 1.0, 1.0).unwrap();
        assert!((m.beta() - 1.0 / 3.0).abs() < 1e-15);

        let m = Medium::new(4.0, 1.0, 1.0, 1.0).unwrap();
        assert!((m.beta() + 1.0 / 3.0).abs() < 1e-15);
        // needs rho2/rho1 >= 2 here
        assert!(!m.satisfies_crhoa());
    }

    #[test]
    fn invalid_coefficients_name_the_field() {
        let err = Medium::new(1.0, -4.0, 1.0, 1.0).unwrap_err();
        assert_eq!(
            err,
            MediumError::InvalidCoefficient {
                field: "a2",
                value: -4.0
            }
        );
        assert!(Medium::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(Medium::new(1.0, 1.0, f64::NAN, 1.0).is_err());
        assert!(Medium::new(1.0, 1.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn coord_map_examples() {
        let m = Medium::new(4.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(m.coord_map(-2.0), -1.0);
        assert_eq!(m.coord_map(0.0), 0.0);
        let id = Medium::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(id.coord_map(3.7), 3.7);
    }

    proptest! {
        #[test]
        fn beta_strictly_inside_unit_interval(
            a1 in 1e-3..1e3f64, a2 in 1e-3..1e3f64,
            r1 in 1e-3..1e3f64, r2 in 1e-3..1e3f64,
        ) {
            let m = Medium::new(a1, a2, r1, r2).unwrap();
            prop_assert!(m.beta() > -1.0 && m.beta() < 1.0);
        }

        // Lipschitz sandwich for the coordinate map:
        // min(a1,a2)^{-1/2} |y-x| <= |f(y)-f(x)| <= max(a1,a2)^{-1/2} |y-x|
        #[test]
        fn coord_map_lipschitz_sandwich(
            a1 in 0.1..10.0f64, a2 in 0.1..10.0f64,
            x in -5.0..5.0f64, y in -5.0..5.0f64,
        ) {
            let m = Medium::new(a1, a2, 1.0, 1.0).unwrap();
            let df = (m.coord_map(y) - m.coord_map(x)).abs();
            let lo = (1.0 / a1.sqrt()).min(1.0 / a2.sqrt()) * (y - x).abs();
            let hi = (1.0 / a1.sqrt()).max(1.0 / a2.sqrt()) * (y - x).abs();
            prop_assert!(df >= lo - 1e-12 * (1.0 + hi));
            prop_assert!(df <= hi + 1e-12 * (1.0 + hi));
        }
    }
}
