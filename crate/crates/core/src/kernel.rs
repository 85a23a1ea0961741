//! The explicit fundamental solution of the piecewise-constant
//! divergence-form heat operator, together with the closed-form auxiliary
//! integrals used by the covariance layer.
//!
//! For a medium `(a1, a2, rho1, rho2)` the kernel is
//!
//! ```text
//! G(u,x,z) = (2*pi*u)^{-1/2} [ a1^{-1/2} A⁻(u,x,z) 1_{z<=0}
//!                            + a2^{-1/2} A⁺(u,x,z) 1_{z>0} ],
//! A∓(u,x,z) = E⁻(u,x,z) ∓ beta E⁺(u,x,z),
//! E⁻ = exp(-(f(z)-f(x))²/2u),  E⁺ = exp(-(|f(z)|+|f(x)|)²/2u),
//! ```
//!
//! with `f` the diffusivity-scaled coordinate map. All evaluators are pure
//! functions of their arguments; nothing here caches.

use crate::medium::Medium;
use crate::quad::{self, QuadError, QuadratureSpec};
use crate::special::erfc;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("time argument must be strictly positive, got {t}")]
    NonPositiveTime { t: f64 },
}

/// Standard heat kernel `(2*pi*t)^{-1/2} exp(-x²/2t)`.
pub fn heat_kernel(t: f64, x: f64) -> Result<f64, KernelError> {
    if t <= 0.0 {
        return Err(KernelError::NonPositiveTime { t });
    }
    Ok((-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt())
}

/// Closed form of `∫ exp(-(v-y)²/2u) exp(-(v-x)²/2u) dv` over the line:
/// `sqrt(pi*u) * exp(-(y-x)²/4u)`.
pub fn gaussian_product_integral(x: f64, y: f64, u: f64) -> Result<f64, KernelError> {
    if u <= 0.0 {
        return Err(KernelError::NonPositiveTime { t: u });
    }
    Ok((PI * u).sqrt() * (-(y - x) * (y - x) / (4.0 * u)).exp())
}

/// Closed form of `∫_0^t (2*pi*u)^{-1} * gaussian_product_integral(x,y,u) du`:
/// `sqrt(t/pi) exp(-d²/4t) - (d/2) erfc(d/(2 sqrt t))` with `d = |y-x|`.
///
/// The integral is even in `y-x`, so it is evaluated at `|y-x|`; the odd
/// extension is never needed by the covariance combinations that use it.
pub fn gaussian_product_time_integral(x: f64, y: f64, t: f64) -> Result<f64, KernelError> {
    if t <= 0.0 {
        return Err(KernelError::NonPositiveTime { t });
    }
    let d = (y - x).abs();
    Ok((t / PI).sqrt() * (-d * d / (4.0 * t)).exp() - 0.5 * d * erfc(d / (2.0 * t.sqrt())))
}

/// Evaluator contract for a fundamental solution `(u, x, z) -> G(u,x,z)`.
///
/// Implementations must be deterministic, pure and finite for `u > 0`. The
/// optional hooks let the covariance layer pick specialized fast paths;
/// the default answers keep arbitrary user kernels working through plain
/// quadrature.
pub trait Kernel: Sync {
    fn eval(&self, u: f64, x: f64, z: f64) -> f64;

    /// Closed form of `∫ G(u,x,z) G(u,y,z) dz` if one is available.
    fn slice_product(&self, _u: f64, _x: f64, _y: f64) -> Option<f64> {
        None
    }

    /// Half-width of a z-window outside which `G(u,x,·)` is negligible.
    fn support_radius(&self, u: f64) -> f64 {
        12.0 * u.sqrt().max(1e-8)
    }

    /// The underlying medium for the shipped piecewise-constant kernel.
    fn as_piecewise(&self) -> Option<&Medium> {
        None
    }

    /// Stable identity string for disk caching; `None` disables caching.
    fn cache_token(&self) -> Option<String> {
        None
    }
}

/// Adapter turning a closure into a [`Kernel`].
pub struct FnKernel<F>(pub F);

impl<F: Fn(f64, f64, f64) -> f64 + Sync> Kernel for FnKernel<F> {
    fn eval(&self, u: f64, x: f64, z: f64) -> f64 {
        (self.0)(u, x, z)
    }
}

/// The explicit kernel of the piecewise-constant operator.
#[derive(Debug, Clone, Copy)]
pub struct PiecewiseKernel {
    medium: Medium,
}

impl PiecewiseKernel {
    pub fn new(medium: Medium) -> Self {
        PiecewiseKernel { medium }
    }

    pub fn medium(&self) -> &Medium {
        &self.medium
    }

    pub fn e_minus(&self, u: f64, x: f64, z: f64) -> Result<f64, KernelError> {
        if u <= 0.0 {
            return Err(KernelError::NonPositiveTime { t: u });
        }
        let d = self.medium.coord_map(z) - self.medium.coord_map(x);
        Ok((-d * d / (2.0 * u)).exp())
    }

    pub fn e_plus(&self, u: f64, x: f64, z: f64) -> Result<f64, KernelError> {
        if u <= 0.0 {
            return Err(KernelError::NonPositiveTime { t: u });
        }
        let s = self.medium.coord_map(z).abs() + self.medium.coord_map(x).abs();
        Ok((-s * s / (2.0 * u)).exp())
    }

    /// `G(u,x,z)`; the interface point `z = 0` takes the left branch.
    pub fn green(&self, u: f64, x: f64, z: f64) -> Result<f64, KernelError> {
        if u <= 0.0 {
            return Err(KernelError::NonPositiveTime { t: u });
        }
        Ok(self.green_raw(u, x, z))
    }

    pub(crate) fn green_raw(&self, u: f64, x: f64, z: f64) -> f64 {
        let m = &self.medium;
        let fx = m.coord_map(x);
        let fz = m.coord_map(z);
        let em = (-(fz - fx) * (fz - fx) / (2.0 * u)).exp();
        let s = fz.abs() + fx.abs();
        let ep = (-s * s / (2.0 * u)).exp();
        let mu = 1.0 / (2.0 * PI * u).sqrt();
        if z <= 0.0 {
            mu * (em - m.beta() * ep) / m.a1().sqrt()
        } else {
            mu * (em + m.beta() * ep) / m.a2().sqrt()
        }
    }

    /// Closed form of `∫_R G(u,x,z) G(u,y,z) dz`.
    ///
    /// Splitting at the interface and substituting `w = f(z)` turns each
    /// half-line integral into Gaussian-product integrals over half-lines,
    /// which evaluate to erfc terms.
    pub(crate) fn slice_product_raw(&self, u: f64, x: f64, y: f64) -> f64 {
        let m = &self.medium;
        let beta = m.beta();
        let fx = m.coord_map(x);
        let fy = m.coord_map(y);
        let (ax, ay) = (fx.abs(), fy.abs());
        let inv2su = 0.5 / u.sqrt();
        let bump = |a: f64, b: f64| (-(a - b) * (a - b) / (4.0 * u)).exp();
        // ∫_{-inf}^0 and ∫_0^{inf} of exp(-(w-a)²/2u) exp(-(w-b)²/2u) dw,
        // up to the common factor sqrt(pi*u)/2.
        let jm = |a: f64, b: f64| bump(a, b) * erfc((a + b) * inv2su);
        let jp = |a: f64, b: f64| bump(a, b) * erfc(-(a + b) * inv2su);
        let im = jm(fx, fy) - beta * jm(fx, ay) - beta * jm(ax, fy) + beta * beta * jm(ax, ay);
        let ip = jp(fx, fy) + beta * jp(fx, -ay) + beta * jp(-ax, fy) + beta * beta * jp(-ax, -ay);
        (im / m.a1().sqrt() + ip / m.a2().sqrt()) / (4.0 * (PI * u).sqrt())
    }

    /// `∫ G(u,x,z) dz` by adaptive quadrature over the truncated window
    /// `[x - 12 sqrt(u amax), x + 12 sqrt(u amax)]`; the Gaussian mass
    /// beyond is below 1e-30.
    pub fn mass(&self, u: f64, x: f64, spec: &QuadratureSpec) -> Result<f64, QuadError> {
        let amax = self.medium.a1().max(self.medium.a2());
        let r = 12.0 * (u * amax).sqrt();
        let (lo, hi) = (x - r, x + r);
        let mut points = vec![lo];
        if lo < 0.0 && hi > 0.0 {
            points.push(0.0);
        }
        points.push(x.clamp(lo, hi));
        points.push(hi);
        points.sort_by(f64::total_cmp);
        points.dedup();
        Ok(quad::integrate_segmented(|z| self.green_raw(u, x, z), &points, spec)?.value)
    }

    /// Smallest `C1` over a trial `C2` sweep with
    /// `G(t,x,y) <= C1 (2 pi t)^{-1/2} exp(-C2 (x-y)²/t)` on the given grid;
    /// larger `C2` wins ties.
    pub fn gaussian_bound_fit(&self, t_grid: &[f64], xy_grid: &[f64]) -> GaussianBoundFit {
        assert!(
            !t_grid.is_empty() && !xy_grid.is_empty(),
            "grids must be nonempty"
        );
        assert!(t_grid.iter().all(|&t| t > 0.0), "times must be positive");
        let amax = self.medium.a1().max(self.medium.a2());
        let sweep = [0.5, 0.4, 0.3, 0.25, 0.2, 0.15, 0.1, 0.05];
        let mut best: Option<GaussianBoundFit> = None;
        for &c in sweep.iter() {
            let c2 = c / amax;
            let mut c1 = 0.0f64;
            for &t in t_grid {
                for &x in xy_grid {
                    for &y in xy_grid {
                        let d2 = (x - y) * (x - y);
                        let ratio =
                            self.green_raw(t, x, y) * (2.0 * PI * t).sqrt() * (c2 * d2 / t).exp();
                        c1 = c1.max(ratio);
                    }
                }
            }
            match &best {
                Some(b) if c1 >= b.c1 * (1.0 - 1e-12) => {}
                _ => best = Some(GaussianBoundFit { c1, c2 }),
            }
        }
        best.expect("sweep is nonempty")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GaussianBoundFit {
    pub c1: f64,
    pub c2: f64,
}

impl Kernel for PiecewiseKernel {
    fn eval(&self, u: f64, x: f64, z: f64) -> f64 {
        self.green_raw(u, x, z)
    }

    fn slice_product(&self, u: f64, x: f64, y: f64) -> Option<f64> {
        Some(self.slice_product_raw(u, x, y))
    }

    fn support_radius(&self, u: f64) -> f64 {
        12.0 * (u * self.medium.a1().max(self.medium.a2())).sqrt()
    }

    fn as_piecewise(&self) -> Option<&Medium> {
        Some(&self.medium)
    }

    fn cache_token(&self) -> Option<String> {
        let m = &self.medium;
        Some(format!(
            "piecewise:a1={:.17e},a2={:.17e},rho1={:.17e},rho2={:.17e}",
            m.a1(),
            m.a2(),
            m.rho1(),
            m.rho2()
        ))
    }
}
