//! Limiting forward cumulant function `V`, its correction `H`, the
//! saddlepoint `u*(k)` and the decay rate function `V*(k)`.
//!
//! With `p(u) = kappa - rho xi u` and `d(u) = sqrt(p(u)^2 + u(1-u) xi^2)`
//! (principal branch, `Re d >= 0`):
//!
//! ```text
//! V(u) = mu/2 (p(u) - d(u)),
//! H(u) = V(u) v e^{-kappa t} / (kappa theta - 2 beta_t V(u))
//!        - mu log[(kappa theta - 2 beta_t V(u)) / (kappa theta (1 - gamma(u)))],
//! gamma(u) = (p(u) - d(u)) / (p(u) + d(u)).
//! ```
//!
//! `V` is strictly convex and essentially smooth on `(u_-, u_+)` with
//! `V(0) = 0`, and `V(1) = 0` iff `rho <= kappa/xi`. Derivatives are closed
//! form: writing `D = d^2` (a quadratic in `u`), the combination
//! `N = 2 D D'' - D'^2` is constant and equals `-xi^2 eta^2`, which gives
//! `d'' = N / (4 d^3)` and `d''' = -3 N D' / (8 d^5)`.

use num_complex::Complex64;

use crate::context::{Endpoint, ForwardContext, Regime};
use crate::error::{Error, Result};

/// Value and first three derivatives of the limiting cumulant function at a
/// point strictly inside `(u_-, u_+)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VDerivs {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl ForwardContext {
    fn p_of(&self, u: f64) -> f64 {
        self.params().kappa - self.params().rho * self.params().xi * u
    }

    /// Radicand `D(u) = p(u)^2 + u(1-u) xi^2` and its first derivative.
    fn radicand(&self, u: f64) -> (f64, f64) {
        let (kappa, xi, rho) = (self.params().kappa, self.params().xi, self.params().rho);
        let p = kappa - rho * xi * u;
        let d = p * p + u * (1.0 - u) * xi * xi;
        let d1 = -2.0 * rho * xi * p + (1.0 - 2.0 * u) * xi * xi;
        (d, d1)
    }

    /// `d(u)` and `gamma(u)` on the complex plane, square root taken with
    /// `Re d >= 0`.
    pub fn d_gamma(&self, u: Complex64) -> (Complex64, Complex64) {
        let (kappa, xi, rho) = (self.params().kappa, self.params().xi, self.params().rho);
        let p = Complex64::new(kappa, 0.0) - rho * xi * u;
        let mut d = (p * p + u * (Complex64::new(1.0, 0.0) - u) * xi * xi).sqrt();
        if d.re < 0.0 {
            d = -d;
        }
        (d, (p - d) / (p + d))
    }

    /// `V(u)` on the closure of `[u_-, u_+]` (the radicand is non-negative
    /// exactly there).
    pub fn v(&self, u: f64) -> Result<f64> {
        let (radicand, _) = self.radicand(u);
        if radicand < 0.0 {
            return Err(Error::Domain("V(u) requires u in [u_-, u_+]"));
        }
        Ok(0.5 * self.mu() * (self.p_of(u) - radicand.sqrt()))
    }

    /// `V` with its first three derivatives; `u` must lie strictly inside
    /// `(u_-, u_+)`.
    pub fn v_derivs(&self, u: f64) -> Result<VDerivs> {
        let (u_minus, u_plus) = self.u_bounds();
        if !(u > u_minus && u < u_plus) {
            return Err(Error::Domain("V derivatives require u in (u_-, u_+)"));
        }
        let (rho, xi) = (self.params().rho, self.params().xi);
        let (big_d, big_d1) = self.radicand(u);
        let n = -xi * xi * self.eta() * self.eta();
        let d = big_d.sqrt();
        let d1 = big_d1 / (2.0 * d);
        let d2 = n / (4.0 * d * big_d);
        let d3 = -3.0 * n * big_d1 / (8.0 * d * big_d * big_d);
        let half_mu = 0.5 * self.mu();
        Ok(VDerivs {
            v: half_mu * (self.p_of(u) - d),
            d1: half_mu * (-rho * xi - d1),
            d2: -half_mu * d2,
            d3: -half_mu * d3,
        })
    }

    /// `kappa theta - 2 beta_t V(u)`, the denominator of the correction `H`;
    /// positive on the interior of the limiting domain and vanishing at the
    /// critical moments `u*+-`.
    pub fn h_denominator(&self, u: f64) -> Result<f64> {
        Ok(self.params().kappa * self.params().theta - 2.0 * self.beta_t() * self.v(u)?)
    }

    /// Correction term `H(u)`.
    ///
    /// The log argument is evaluated in the grouping
    /// `(kappa theta - 2 beta_t V) (p + d) / (2 d kappa theta)` which is
    /// algebraically `den / (kappa theta (1 - gamma))` without the removable
    /// singularity of `gamma` at `p + d = 0`.
    pub fn h(&self, u: f64) -> Result<f64> {
        let (kappa, theta) = (self.params().kappa, self.params().theta);
        let v0 = self.params().v;
        let value = self.v(u)?;
        let den = kappa * theta - 2.0 * self.beta_t() * value;
        if den <= 0.0 {
            return Err(Error::Domain(
                "H(u) requires kappa theta - 2 beta_t V(u) > 0",
            ));
        }
        let (radicand, _) = self.radicand(u);
        let d = radicand.sqrt();
        let p = self.p_of(u);
        let log_arg = den * (p + d) / (2.0 * d * kappa * theta);
        if !(log_arg > 0.0) {
            return Err(Error::Domain("H(u) log argument must be positive"));
        }
        Ok(value * v0 / (self.exp_kt() * den) - self.mu() * log_arg.ln())
    }

    /// Derivative `H'(u)`, in closed form:
    ///
    /// ```text
    /// H' = v e^{-kt} kappa theta V' / den^2 + 2 mu beta_t V' / den
    ///      - mu (p' d - p d') / (d (p + d)),
    /// ```
    ///
    /// where the last term is `mu gamma' / (1 - gamma)`.
    pub fn h_prime(&self, u: f64) -> Result<f64> {
        let (kappa, theta, xi, rho) = (
            self.params().kappa,
            self.params().theta,
            self.params().xi,
            self.params().rho,
        );
        let v0 = self.params().v;
        let vd = self.v_derivs(u)?;
        let den = kappa * theta - 2.0 * self.beta_t() * vd.v;
        if den <= 0.0 {
            return Err(Error::Domain(
                "H'(u) requires kappa theta - 2 beta_t V(u) > 0",
            ));
        }
        let (radicand, radicand1) = self.radicand(u);
        let d = radicand.sqrt();
        let p = self.p_of(u);
        if d == 0.0 || p + d == 0.0 {
            return Err(Error::Domain("H'(u) undefined at the explosion boundary"));
        }
        let d1 = radicand1 / (2.0 * d);
        let p1 = -rho * xi;
        let gamma_term = (p1 * d - p * d1) / (d * (p + d));
        Ok(v0 / self.exp_kt() * kappa * theta * vd.d1 / (den * den)
            + 2.0 * self.mu() * self.beta_t() * vd.d1 / den
            - self.mu() * gamma_term)
    }

    /// Unique solution of `V'(u) = k` in `(u_-, u_+)`, in closed form.
    pub fn saddle_point(&self, k: f64) -> f64 {
        let (kappa, theta, xi, rho) = (
            self.params().kappa,
            self.params().theta,
            self.params().xi,
            self.params().rho,
        );
        let quad =
            k * k * xi * xi + 2.0 * k * kappa * theta * rho * xi + kappa * kappa * theta * theta;
        (xi - 2.0 * kappa * rho + (kappa * theta * rho + k * xi) * self.eta() / quad.sqrt())
            / (2.0 * xi * (1.0 - rho * rho))
    }

    /// `W(k, u) = u k - V(u)`, the quantity maximised by the rate function.
    pub fn legendre_candidate(&self, k: f64, u: f64) -> Result<f64> {
        Ok(u * k - self.v(u)?)
    }

    /// Decay rate function `V*(k) = sup { u k - V(u) : u in D_infinity }`.
    ///
    /// Piecewise per regime: the supremum sits at the interior saddlepoint
    /// `u*(k)` while `V'` reaches `k` inside the domain, and saturates at the
    /// relevant domain endpoint (`u*+-` or `1`) beyond, where `V*` becomes
    /// affine in `k`.
    pub fn rate_function(&self, k: f64) -> f64 {
        let w = |u: f64| u * k - self.v(u).expect("rate-function node inside [u_-, u_+]");
        let interior = |k: f64| w(self.saddle_point(k));
        match self.regime() {
            Regime::R1 => interior(k),
            Regime::R2 => {
                let us = self.u_star_plus().expect("u*+ finite in R2");
                let kc = self
                    .strike_at_upper_critical()
                    .expect("critical strike in R2");
                if k <= kc {
                    interior(k)
                } else {
                    w(us)
                }
            }
            Regime::R3a => {
                let us = self.u_star_minus().expect("u*- finite in R3");
                let kc = self
                    .strike_at_lower_critical()
                    .expect("critical strike in R3");
                if k < kc {
                    w(us)
                } else {
                    interior(k)
                }
            }
            Regime::R3b => {
                let us = self.u_star_minus().expect("u*- finite in R3");
                let kc = self
                    .strike_at_lower_critical()
                    .expect("critical strike in R3");
                let k1 = self.strike_at_one();
                if k < kc {
                    w(us)
                } else if k <= k1 {
                    interior(k)
                } else {
                    w(1.0)
                }
            }
            Regime::R4 => {
                if k <= self.strike_at_one() {
                    interior(k)
                } else {
                    w(1.0)
                }
            }
        }
    }

    /// True when the strike `k` matches `V'(a)` for the endpoint `a` within
    /// the given absolute tolerance.
    pub(crate) fn matches_endpoint_strike(&self, k: f64, a: Endpoint, tol: f64) -> bool {
        let target = match a {
            Endpoint::Zero => self.strike_at_zero(),
            Endpoint::One => self.strike_at_one(),
        };
        target.is_finite() && (k - target).abs() <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::HestonParams;
    use approx::assert_relative_eq;

    fn ctx(v: f64, theta: f64, kappa: f64, xi: f64, rho: f64, t: f64) -> ForwardContext {
        ForwardContext::build(HestonParams::new(v, theta, kappa, xi, rho).unwrap(), t).unwrap()
    }

    fn p2() -> ForwardContext {
        ctx(0.07, 0.07, 1.5, 0.65, -0.8, 1.0)
    }

    #[test]
    fn d_gamma_at_zero_and_boundary() {
        let c = p2();
        let (d, g) = c.d_gamma(Complex64::new(0.0, 0.0));
        assert_relative_eq!(d.re, c.params().kappa, epsilon = 1e-14);
        assert_eq!(d.im, 0.0);
        assert_relative_eq!(g.norm(), 0.0, epsilon = 1e-14);
        // d vanishes at the explosion bounds.
        let up = c.u_bounds().1;
        let (d, _) = c.d_gamma(Complex64::new(up, 0.0));
        assert!(d.norm() < 1e-6, "d(u_+) = {d}");
    }

    #[test]
    fn d_matches_independent_radicand_evaluation() {
        // Second evaluation path for d(5): plain arithmetic on the radicand.
        let c = p2();
        let p = c.params();
        let u = 5.0;
        let expected = ((p.kappa - p.rho * p.xi * u).powi(2) + u * (1.0 - u) * p.xi * p.xi).sqrt();
        let (d, _) = c.d_gamma(Complex64::new(u, 0.0));
        assert_relative_eq!(d.re, expected, epsilon = 1e-15);
    }

    #[test]
    fn d_real_positive_inside_bounds() {
        let c = p2();
        let (um, up) = c.u_bounds();
        for i in 1..200 {
            let u = um + (up - um) * i as f64 / 200.0;
            let (d, _) = c.d_gamma(Complex64::new(u, 0.0));
            assert!(d.im.abs() < 1e-12 && d.re > 0.0, "d({u}) = {d}");
        }
    }

    #[test]
    fn v_vanishes_at_zero_and_one() {
        let c = p2();
        assert_relative_eq!(c.v(0.0).unwrap(), 0.0, epsilon = 1e-15);
        // rho <= kappa/xi here, so V(1) = 0 as well.
        assert_relative_eq!(c.v(1.0).unwrap(), 0.0, epsilon = 1e-15);
        // Large correlation: V(1) < 0.
        let c4 = ctx(0.07, 0.07, 0.1, 0.6, 0.5, 0.0);
        assert!(c4.v(1.0).unwrap() < 0.0);
    }

    #[test]
    fn v_rejects_points_outside_real_branch() {
        let c = p2();
        let (um, up) = c.u_bounds();
        assert!(c.v(um - 0.01).is_err());
        assert!(c.v(up + 0.01).is_err());
        assert!(c.v_derivs(up).is_err());
    }

    #[test]
    fn analytic_first_derivative_matches_complex_step() {
        let c = p2();
        let h = 1e-100;
        for &u in &[-0.9, -0.3, 0.0, 0.4, 1.0, 2.0, 5.0, 9.0] {
            let vd = c.v_derivs(u).unwrap();
            let (d, _) = c.d_gamma(Complex64::new(u, h));
            let v_cs = 0.5
                * c.mu()
                * (Complex64::new(c.params().kappa, 0.0)
                    - c.params().rho * c.params().xi * Complex64::new(u, h)
                    - d);
            assert_relative_eq!(vd.d1, v_cs.im / h, max_relative = 1e-12);
        }
    }

    #[test]
    fn higher_derivatives_match_finite_differences_of_complex_step() {
        let c = p2();
        // First derivative via complex step is exact to machine precision;
        // difference it for the oracle of V'' and V'''.
        let d1_cs = |u: f64| {
            let h = 1e-100;
            let (d, _) = c.d_gamma(Complex64::new(u, h));
            let v_cs = 0.5
                * c.mu()
                * (Complex64::new(c.params().kappa, 0.0)
                    - c.params().rho * c.params().xi * Complex64::new(u, h)
                    - d);
            v_cs.im / h
        };
        // Fourth-order central stencils on the machine-exact V'.
        let h = 1e-3;
        for &u in &[-0.7, 0.2, 1.3, 2.0, 4.5] {
            let vd = c.v_derivs(u).unwrap();
            let d2 = (d1_cs(u - 2.0 * h) - 8.0 * d1_cs(u - h) + 8.0 * d1_cs(u + h)
                - d1_cs(u + 2.0 * h))
                / (12.0 * h);
            let d3 = (-d1_cs(u - 2.0 * h) + 16.0 * d1_cs(u - h) - 30.0 * d1_cs(u)
                + 16.0 * d1_cs(u + h)
                - d1_cs(u + 2.0 * h))
                / (12.0 * h * h);
            assert_relative_eq!(vd.d2, d2, max_relative = 1e-9);
            assert_relative_eq!(vd.d3, d3, max_relative = 1e-7);
        }
    }

    #[test]
    fn strike_at_zero_is_minus_half_theta() {
        let c = p2();
        assert_relative_eq!(
            c.v_derivs(0.0).unwrap().d1,
            -0.5 * c.params().theta,
            epsilon = 1e-14
        );
        assert_relative_eq!(c.strike_at_zero(), -0.035, epsilon = 1e-15);
    }

    #[test]
    fn h_vanishes_at_zero() {
        let c = p2();
        assert_relative_eq!(c.h(0.0).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn h_prime_sign_at_endpoints() {
        // H'(0) = 0 iff v = theta.
        let c = p2();
        assert!(c.h_prime(0.0).unwrap().abs() < 1e-15);
        let low = ctx(0.05, 0.07, 1.5, 0.65, -0.8, 1.0);
        assert!(low.h_prime(0.0).unwrap() > 0.0);
        let high = ctx(0.09, 0.07, 1.5, 0.65, -0.8, 1.0);
        assert!(high.h_prime(0.0).unwrap() < 0.0);
        // H'(1) > 0 iff v/theta > Upsilon(1).
        let u1 = c.upsilon(Endpoint::One).unwrap();
        assert!(u1 < 1.0 && c.h_prime(1.0).unwrap() > 0.0);
    }

    #[test]
    fn h_prime_matches_central_difference() {
        let c = p2();
        let h = 1e-6;
        for &u in &[-0.8, -0.2, 0.3, 0.9, 2.0, 5.0] {
            let fd = (c.h(u + h).unwrap() - c.h(u - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(c.h_prime(u).unwrap(), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn h_denominator_vanishes_at_upper_critical_moment() {
        let c = p2();
        let us = c.u_star_plus().unwrap();
        assert!(c.h_denominator(us).unwrap().abs() < 1e-12);
        assert!(c.h(us - 1e-6).is_ok());
        assert!(c.h(us + 1e-6).is_err());
    }

    #[test]
    fn saddle_point_solves_first_order_condition() {
        let c = p2();
        for &k in &[-0.5, c.strike_at_zero(), 0.0, 0.2, 1.0] {
            let us = c.saddle_point(k);
            let vd = c.v_derivs(us).unwrap();
            assert!((vd.d1 - k).abs() < 1e-9, "residual at k={k}: {}", vd.d1 - k);
        }
        assert!(c.saddle_point(c.strike_at_zero()).abs() < 1e-12);
        assert!((c.saddle_point(c.strike_at_one()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_function_basics() {
        let c = p2();
        assert!(c.rate_function(c.strike_at_zero()).abs() < 1e-14);
        // Affine with slope u*+ beyond the critical strike in R2.
        let kc = c.strike_at_upper_critical().unwrap();
        let us = c.u_star_plus().unwrap();
        let slope = (c.rate_function(kc + 1.0) - c.rate_function(kc + 0.5)) / 0.5;
        assert_relative_eq!(slope, us, epsilon = 1e-10);
    }

    #[test]
    fn rate_function_matches_grid_supremum() {
        let c = p2();
        let d = c.d_infinity();
        let inset = 1e-9;
        let (lo, hi) = (d.lo + inset, d.hi - inset);
        let n = 1_000_000usize;
        for &k in &[-0.5, 0.0, 0.1, 1.0] {
            let mut sup = f64::NEG_INFINITY;
            for i in 0..=n {
                let u = lo + (hi - lo) * i as f64 / n as f64;
                sup = sup.max(u * k - c.v(u).unwrap());
            }
            let exact = c.rate_function(k);
            assert!(
                exact >= sup - 1e-12 && exact - sup < 1e-6,
                "k={k}: exact={exact} sup={sup}"
            );
        }
    }
}
