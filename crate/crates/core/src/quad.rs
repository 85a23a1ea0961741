//! Globally adaptive Gauss-Kronrod (G7/K15) quadrature with the usual
//! QUADPACK error rescaling. Segments are refined worst-first until the
//! summed error estimate meets the requested tolerance.

use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;
use thiserror::Error;

/// Kronrod-15 abscissae on [0,1] side of the symmetric rule.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("quadrature did not converge: estimate {estimate}, error bound {error_bound}, requested {requested}")]
    DidNotConverge {
        estimate: f64,
        error_bound: f64,
        requested: f64,
    },
    #[error("integrand returned a non-finite value near {at}")]
    NonFiniteIntegrand { at: f64 },
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
}

/// Tolerances and budget for the quadrature-backed operations.
/// `time_substitution` requests the `u = v^2` change of variables in time
/// integrals so the kernel's `u^{-1/2}` singularity becomes analytic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub time_substitution: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 2048,
            time_substitution: true,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), QuadError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(QuadError::InvalidSpec(format!(
                "tolerances must be positive, got rel {}, abs {}",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_subdivisions < 64 {
            return Err(QuadError::InvalidSpec(format!(
                "max_subdivisions must be at least 64, got {}",
                self.max_subdivisions
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error_bound: f64,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadError::NonFiniteIntegrand { at: center });
    }

    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut res_abs = kronrod.abs();
    let mut fv = [0.0f64; 15];
    fv[7] = fc;

    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        if !f1.is_finite() {
            return Err(QuadError::NonFiniteIntegrand { at: center - dx });
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFiniteIntegrand { at: center + dx });
        }
        fv[j] = f1;
        fv[14 - j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }

    let value = kronrod * half;
    let err = rescale_error(
        (kronrod - gauss) * half,
        res_abs * half.abs(),
        res_asc * half.abs(),
    );
    Ok(Segment {
        a,
        b,
        value,
        error: err,
    })
}

/// Integrate `f` over `[a, b]` to the tolerances in `spec`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Quadrature, QuadError> {
    integrate_segmented(f, &[a, b], spec)
}

/// Integrate with caller-supplied initial breakpoints (useful when the
/// integrand has known feature scales, e.g. an interface or a boundary
/// layer). `points` must be sorted ascending with at least two entries.
pub fn integrate_segmented<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Result<Quadrature, QuadError> {
    spec.validate()?;
    assert!(points.len() >= 2, "need at least two breakpoints");

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let seg = gk15(&f, w[0], w[1])?;
        total += seg.value;
        total_err += seg.error;
        heap.push(seg);
    }

    let mut splits = 0usize;
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= tol {
            return Ok(Quadrature {
                value: total,
                error_bound: total_err,
            });
        }
        if splits >= spec.max_subdivisions {
            return Err(QuadError::DidNotConverge {
                estimate: total,
                error_bound: total_err,
                requested: tol,
            });
        }
        let worst = heap.pop().expect("heap cannot be empty while error > 0");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval at machine resolution; accept what we have.
            heap.push(worst);
            return Ok(Quadrature {
                value: total,
                error_bound: total_err,
            });
        }
        total -= worst.value;
        total_err -= worst.error;
        let left = gk15(&f, worst.a, mid)?;
        let right = gk15(&f, mid, worst.b)?;
        total += left.value + right.value;
        total_err += left.error + right.error;
        heap.push(left);
        heap.push(right);
        splits += 1;
    }
}

/// Expectation of `f` under the standard normal law, by quadrature over
/// [-12, 12] (the omitted tails are below 1e-30 for bounded `f`).
pub fn gaussian_expectation<F: Fn(f64) -> f64>(
    f: F,
    spec: &QuadratureSpec,
) -> Result<f64, QuadError> {
    let density = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let q = integrate_segmented(|z| f(z) * density(z), &[-12.0, -3.0, 0.0, 3.0, 12.0], spec)?;
    Ok(q.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let spec = QuadratureSpec::default();
        let q = integrate(|x| 3.0 * x * x, 0.0, 2.0, &spec).unwrap();
        assert!((q.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_total_mass() {
        let spec = QuadratureSpec::default();
        let q = integrate(
            |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            -40.0,
            40.0,
            &spec,
        )
        .unwrap();
        assert!((q.value - 1.0).abs() < 1e-10, "got {}", q.value);
    }

    #[test]
    fn sqrt_singularity_via_substitution() {
        // int_0^1 u^{-1/2} du = 2, computed as int_0^1 2 dv after u = v^2.
        let spec = QuadratureSpec::default();
        let q = integrate(|v| 2.0 * (v * v).powf(-0.5) * v, 1e-300, 1.0, &spec).unwrap();
        assert!((q.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn nonconvergence_carries_estimate() {
        let spec = QuadratureSpec {
            rel_tol: 1e-15,
            abs_tol: 1e-300,
            max_subdivisions: 64,
            time_substitution: true,
        };
        // Genuinely singular integrand (not integrable to that tolerance
        // with 64 splits): int_0^1 x^{-1/2} without substitution.
        let err = integrate(
            |x| if x > 0.0 { x.powf(-0.5) } else { 0.0 },
            0.0,
            1.0,
            &spec,
        )
        .unwrap_err();
        match err {
            QuadError::DidNotConverge {
                estimate,
                error_bound,
                ..
            } => {
                assert!((estimate - 2.0).abs() < 1e-3, "estimate {estimate}");
                assert!(error_bound > 0.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn spec_validation() {
        let spec = QuadratureSpec {
            max_subdivisions: 16,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
        let spec = QuadratureSpec {
            rel_tol: 0.0,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn gaussian_expectation_of_cos() {
        // E cos(Z) = exp(-1/2), frozen from the analytic value.
        let spec = QuadratureSpec::default();
        let v = gaussian_expectation(|z| z.cos(), &spec).unwrap();
        assert!((v - 0.6065306597126334236038).abs() < 1e-10);
    }
}
