//! Exact reference engine for forward-start calls.
//!
//! The finite-maturity forward cumulant generating function follows from the
//! tower property:
//!
//! ```text
//! tau Lambda(u) = A(u,tau) + B(u,tau) v e^{-kappa t} / (1 - 2 beta_t B(u,tau))
//!                 - mu log(1 - 2 beta_t B(u,tau)),
//! ```
//!
//! with `A`, `B` the usual affine coefficients in the branch-stable grouping
//! (`e^{-d tau}` throughout). Prices come from contour integration of
//! `exp(tau Lambda)` against the call kernel `1 / (z (z - 1))` along
//! `Re z = damping`; crossing the kernel poles at `z = 0, 1` toggles the
//! residue terms `1` and `-e^{k tau}`, so any damping inside the effective
//! domain and off `{0, 1}` prices the same call.

use num_complex::Complex64;

use crate::context::{Endpoint, ForwardContext, Regime};
use crate::error::{Error, Result};
use crate::price::bs_call_price;
use crate::quad::integrate;
use crate::roots::brent;
use crate::TRANSITION_STRIKE_TOL;

/// Numerical controls for the reference pricer.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingConfig {
    /// Contour abscissa; `None` selects a regime-aware default (see
    /// [`forward_call_fourier`]).
    pub damping: Option<f64>,
    /// Relative quadrature tolerance.
    pub quad_rel_tol: f64,
    /// Absolute quadrature tolerance; also the tail cut-off per truncation
    /// segment.
    pub quad_abs_tol: f64,
    /// Subdivision budget per truncation segment.
    pub max_subdivisions: usize,
    /// Length of the first truncation segment; subsequent segments double.
    pub truncation_step: f64,
    /// Maximum number of truncation segments.
    pub max_segments: u32,
    /// Volatility bracket for implied-volatility inversion.
    pub iv_bracket: (f64, f64),
    /// Implied-volatility tolerance.
    pub iv_tol: f64,
    /// Residual tolerance of the finite-maturity saddlepoint equation.
    pub saddle_tol: f64,
    /// Monte Carlo oracle: number of paths.
    pub mc_paths: u64,
    /// Monte Carlo oracle: time steps over the full horizon `t + tau`.
    pub mc_steps: u32,
}

impl Default for PricingConfig {
    fn default() -> Self {
        Self {
            damping: None,
            quad_rel_tol: 1e-10,
            quad_abs_tol: 1e-12,
            max_subdivisions: 400,
            truncation_step: 8.0,
            max_segments: 64,
            iv_bracket: (1e-6, 5.0),
            iv_tol: 1e-12,
            saddle_tol: 1e-12,
            mc_paths: 1_000_000,
            mc_steps: 500,
        }
    }
}

fn lmgf_raw(ctx: &ForwardContext, u: Complex64, tau: f64) -> Complex64 {
    let p = ctx.params();
    let (kappa, xi) = (p.kappa, p.xi);
    let pc = Complex64::new(kappa, 0.0) - p.rho * xi * u;
    let mut d = (pc * pc + u * (Complex64::new(1.0, 0.0) - u) * xi * xi).sqrt();
    if d.re < 0.0 {
        d = -d;
    }
    let emdt = (-d * tau).exp();
    // den = (p + d) - (p - d) e^{-d tau}; the grouping
    // (1 - gamma e^{-d tau}) / (1 - gamma) multiplied through by (p + d),
    // finite even where gamma itself blows up (p + d = 0).
    let den = pc + d - (pc - d) * emdt;
    let a = 0.5 * ctx.mu() * ((pc - d) * tau - 2.0 * (den / (2.0 * d)).ln());
    // B = (p - d)(1 - e^{-d tau}) / (xi^2 (1 - gamma e^{-d tau}));
    // with p^2 - d^2 = -u (1 - u) xi^2 this is the xi-free form below.
    let b = -u * (Complex64::new(1.0, 0.0) - u) * (Complex64::new(1.0, 0.0) - emdt) / den;
    let w = Complex64::new(1.0, 0.0) - 2.0 * ctx.beta_t() * b;
    (a + b * p.v / ctx.exp_kt() / w - ctx.mu() * w.ln()) / tau
}

/// Re-normalised forward cumulant generating function
/// `Lambda(u) = log E exp(u (X_{t+tau} - X_t)) / tau`.
///
/// For real `u` the value is real inside the effective domain; a complex or
/// non-finite result flags `Re(u)` outside it.
pub fn forward_lmgf(ctx: &ForwardContext, u: Complex64, tau: f64) -> Result<Complex64> {
    if !(tau > 0.0) {
        return Err(Error::Domain("tau must be positive"));
    }
    let lam = lmgf_raw(ctx, u, tau);
    if !lam.re.is_finite() || !lam.im.is_finite() {
        return Err(Error::Domain(
            "cumulant function exploded: Re(u) outside the effective domain",
        ));
    }
    if u.im == 0.0 && lam.im != 0.0 {
        return Err(Error::Domain(
            "cumulant function complex at real u: outside the effective domain",
        ));
    }
    Ok(lam)
}

/// Default contour for a strike `e^{k tau}`: inside `(1, U)` for `k >= 0`
/// when the upper domain endpoint `U` exceeds one, inside `(0, 1)` when it
/// does not, and inside `(L, 0)` for `k < 0`; endpoints inset by 5% of the
/// interval width.
pub fn default_damping(ctx: &ForwardContext, k: f64) -> f64 {
    let d = ctx.d_infinity();
    if k >= 0.0 {
        if d.hi > 1.0 + 1e-9 {
            let width = d.hi - 1.0;
            0.5 * (1.0 + d.hi - 0.05 * width)
        } else {
            0.5
        }
    } else {
        let width = -d.lo;
        0.5 * (d.lo + 0.05 * width)
    }
}

/// Forward-start call price `E (e^{X_{t+tau} - X_t} - e^{k tau})^+` by
/// damped Fourier inversion with adaptive Gauss-Kronrod quadrature and
/// doubling truncation.
pub fn forward_call_fourier(
    ctx: &ForwardContext,
    k: f64,
    tau: f64,
    cfg: &PricingConfig,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Domain("tau must be positive"));
    }
    let c = cfg.damping.unwrap_or_else(|| default_damping(ctx, k));
    let d = ctx.d_infinity();
    if !(c > d.lo && c < d.hi) || c == 0.0 || c == 1.0 {
        return Err(Error::Domain(
            "no valid damping inside the effective domain off {0, 1}",
        ));
    }
    // Validate the contour abscissa before integrating.
    forward_lmgf(ctx, Complex64::new(c, 0.0), tau)?;

    let base = if c > 1.0 {
        0.0
    } else if c > 0.0 {
        1.0
    } else {
        1.0 - (k * tau).exp()
    };
    let integrand = |y: f64| {
        let z = Complex64::new(c, y);
        let lam = lmgf_raw(ctx, z, tau);
        let val = (tau * lam + k * tau * (Complex64::new(1.0, 0.0) - z)).exp() / (z * (z - 1.0));
        val.re
    };

    let mut total = 0.0;
    let mut y0 = 0.0;
    let mut seg = cfg.truncation_step;
    let mut converged = false;
    for i in 0..cfg.max_segments {
        let (val, _err) = integrate(
            integrand,
            y0,
            y0 + seg,
            cfg.quad_rel_tol,
            0.25 * cfg.quad_abs_tol,
            cfg.max_subdivisions,
        )?;
        total += val;
        y0 += seg;
        if val.abs() < cfg.quad_abs_tol && i > 0 {
            converged = true;
            break;
        }
        seg *= 2.0;
    }
    if !converged {
        return Err(Error::Convergence(
            "Fourier tail did not fall below the truncation tolerance",
        ));
    }
    let price = base + total / core::f64::consts::PI;
    if !price.is_finite() {
        return Err(Error::Convergence("Fourier price is not finite"));
    }
    Ok(price)
}

/// Black-Scholes call on a unit forward with absolute log-strike
/// `log_strike`, zero rates.
pub fn bs_price(log_strike: f64, tau: f64, sigma: f64) -> f64 {
    bs_call_price(log_strike, tau, sigma)
}

/// Inverts [`bs_price`] over the configured volatility bracket.
///
/// The price must lie strictly inside the static no-arbitrage band
/// `(max(1 - e^{log_strike}, 0), 1)`.
pub fn implied_vol(price: f64, log_strike: f64, tau: f64, cfg: &PricingConfig) -> Result<f64> {
    let lower = (1.0 - log_strike.exp()).max(0.0);
    if !(price > lower && price < 1.0) {
        return Err(Error::Domain("price outside the no-arbitrage band"));
    }
    let (lo, hi) = cfg.iv_bracket;
    brent(
        |sigma| bs_price(log_strike, tau, sigma) - price,
        lo,
        hi,
        cfg.iv_tol,
        200,
    )
}

fn saddle_residual(ctx: &ForwardContext, u: f64, tau: f64, k: f64) -> Result<f64> {
    Ok(ctx.v_derivs(u)?.d1 + ctx.h_prime(u)? / tau - k)
}

/// Solves the finite-maturity saddlepoint equation
/// `V'(u) + H'(u)/tau = k` by bracketed iteration.
///
/// Bracket selection per regime (`g` below is the residual):
/// - toward an exploding upper node `b` (`u*+` in R2 for `k >= V'(u*+)`,
///   `1` in R3b/R4 for `k >= V'(1)`): `g -> +infinity` at `b^-` and
///   `g(0) < 0`, so the root is bracketed by `[0, b)`;
/// - mirrored toward `u*-` in R3a/R3b for `k <= V'(u*-)`;
/// - at the kink strikes `V'(0)`/`V'(1)` (non-degenerate): a shrinking
///   window around the limit point.
pub fn numeric_saddlepoint(
    ctx: &ForwardContext,
    k: f64,
    tau: f64,
    cfg: &PricingConfig,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Domain("tau must be positive"));
    }
    let g = |u: f64| saddle_residual(ctx, u, tau, k);
    let regime = ctx.regime();

    let root = if regime == Regime::R2
        && ctx
            .strike_at_upper_critical()
            .is_some_and(|kc| k >= kc - TRANSITION_STRIKE_TOL)
    {
        solve_toward_upper(g, ctx.u_star_plus().expect("finite u*+ in R2"))?
    } else if matches!(regime, Regime::R3a | Regime::R3b)
        && ctx
            .strike_at_lower_critical()
            .is_some_and(|kc| k <= kc + TRANSITION_STRIKE_TOL)
    {
        solve_toward_lower(g, ctx.u_star_minus().expect("finite u*- in R3"))?
    } else if matches!(regime, Regime::R3b | Regime::R4)
        && k >= ctx.strike_at_one() - TRANSITION_STRIKE_TOL
    {
        solve_toward_upper(g, 1.0)?
    } else if let Some(a) = [Endpoint::Zero, Endpoint::One]
        .into_iter()
        .find(|&a| ctx.matches_endpoint_strike(k, a, TRANSITION_STRIKE_TOL))
    {
        if ctx.is_degenerate(a) {
            return Err(Error::Degenerate(
                "saddlepoint fixed at V'(a) when v = theta Upsilon(a)",
            ));
        }
        solve_near_point(g, a.as_f64())?
    } else {
        return Err(Error::Domain("no bracket for this regime/strike pair"));
    };

    let residual = saddle_residual(ctx, root, tau, k)?;
    // Best achievable residual is limited by cancellation in g itself.
    let floor = 64.0
        * f64::EPSILON
        * (k.abs() + ctx.v_derivs(root)?.d1.abs() + ctx.h_prime(root)?.abs() / tau);
    if residual.abs() <= cfg.saddle_tol.max(floor) {
        Ok(root)
    } else {
        Err(Error::Convergence("saddlepoint residual above tolerance"))
    }
}

fn solve_toward_upper<G: Fn(f64) -> Result<f64>>(g: G, boundary: f64) -> Result<f64> {
    let lo = 0.0;
    if !(g(lo)? < 0.0) {
        return Err(Error::Convergence("saddle bracket lost at u = 0"));
    }
    // The residual explodes to +infinity at the node; walk the upper end in
    // until it flips sign, starting 1e-10 of the scale away.
    let mut inset = 1e-10 * boundary.abs().max(1.0);
    let mut hi = boundary - inset;
    for _ in 0..60 {
        match g(hi) {
            Ok(v) if v > 0.0 => {
                return brent(|u| g(u).unwrap_or(f64::NAN), lo, hi, 1e-15, 200)
                    .map_err(|_| Error::Convergence("saddle iteration failed"));
            }
            _ => {
                inset *= 0.25;
                hi = boundary - inset;
            }
        }
    }
    Err(Error::Convergence(
        "could not bracket the saddle against the upper node",
    ))
}

fn solve_toward_lower<G: Fn(f64) -> Result<f64>>(g: G, boundary: f64) -> Result<f64> {
    let hi = 0.0;
    if !(g(hi)? > 0.0) {
        return Err(Error::Convergence("saddle bracket lost at u = 0"));
    }
    let mut inset = 1e-10 * boundary.abs().max(1.0);
    let mut lo = boundary + inset;
    for _ in 0..60 {
        match g(lo) {
            Ok(v) if v < 0.0 => {
                return brent(|u| g(u).unwrap_or(f64::NAN), lo, hi, 1e-15, 200)
                    .map_err(|_| Error::Convergence("saddle iteration failed"));
            }
            _ => {
                inset *= 0.25;
                lo = boundary + inset;
            }
        }
    }
    Err(Error::Convergence(
        "could not bracket the saddle against the lower node",
    ))
}

fn solve_near_point<G: Fn(f64) -> Result<f64>>(g: G, a: f64) -> Result<f64> {
    let mut w = 0.4;
    for _ in 0..40 {
        let lo = a - w;
        let hi = a + w;
        match (g(lo), g(hi)) {
            (Ok(glo), Ok(ghi)) if glo < 0.0 && ghi > 0.0 => {
                return brent(|u| g(u).unwrap_or(f64::NAN), lo, hi, 1e-15, 200)
                    .map_err(|_| Error::Convergence("saddle iteration failed"));
            }
            _ => w *= 0.5,
        }
    }
    Err(Error::Convergence(
        "could not bracket the saddle near the kink point",
    ))
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
    fn lmgf_martingale_identities() {
        let c = p2();
        for tau in [1.0, 5.0, 20.0] {
            let l0 = forward_lmgf(&c, Complex64::new(0.0, 0.0), tau).unwrap();
            let l1 = forward_lmgf(&c, Complex64::new(1.0, 0.0), tau).unwrap();
            assert!(l0.norm() < 1e-14);
            assert!(l1.norm() < 1e-14, "Lambda(1) = {l1} at tau = {tau}");
        }
        // Also with rho > kappa/xi, where gamma blows up at u = 1.
        let c4 = ctx(0.07, 0.07, 0.1, 0.6, 0.5, 0.0);
        let l1 = forward_lmgf(&c4, Complex64::new(1.0, 0.0), 5.0).unwrap();
        assert!(l1.norm() < 1e-14);
    }

    #[test]
    fn lmgf_is_hermitian() {
        let c = p2();
        for &(re, im) in &[(0.5, 1.3), (2.0, 11.0), (-0.4, 3.7)] {
            let plus = forward_lmgf(&c, Complex64::new(re, im), 5.0).unwrap();
            let minus = forward_lmgf(&c, Complex64::new(re, -im), 5.0).unwrap();
            assert_relative_eq!(plus.re, minus.re, epsilon = 1e-14);
            assert_relative_eq!(plus.im, -minus.im, epsilon = 1e-14);
        }
    }

    #[test]
    fn lmgf_flags_points_outside_the_domain() {
        let c = p2();
        // Far beyond the long-run domain the affine ODE explodes before tau.
        let bad = forward_lmgf(&c, Complex64::new(13.0, 0.0), 50.0);
        assert!(bad.is_err());
    }

    #[test]
    fn lmgf_matches_limit_plus_correction() {
        let c = p2();
        for &u in &[-0.5, 0.5, 2.0, 5.0] {
            let tau = 30.0;
            let lam = forward_lmgf(&c, Complex64::new(u, 0.0), tau).unwrap().re;
            let approx_val = c.v(u).unwrap() + c.h(u).unwrap() / tau;
            assert_relative_eq!(lam, approx_val, max_relative = 1e-8);
        }
    }

    #[test]
    fn deep_itm_fourier_price_hits_forward_parity() {
        let c = p2();
        let cfg = PricingConfig::default();
        let price = forward_call_fourier(&c, -2.0, 5.0, &cfg).unwrap();
        assert_relative_eq!(price, 1.0 - (-10.0f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn fourier_price_agrees_across_contours() {
        // The same price must come out of all three contour classes.
        let c = p2();
        let k = 0.05;
        let tau = 5.0;
        let base = forward_call_fourier(&c, k, tau, &PricingConfig::default()).unwrap();
        for damping in [0.5, -0.4, 3.0] {
            let cfg = PricingConfig {
                damping: Some(damping),
                ..PricingConfig::default()
            };
            let price = forward_call_fourier(&c, k, tau, &cfg).unwrap();
            assert_relative_eq!(price, base, epsilon = 1e-9);
        }
    }

    #[test]
    fn fourier_rejects_damping_on_poles_or_outside_domain() {
        let c = p2();
        for damping in [0.0, 1.0, 20.0, -5.0] {
            let cfg = PricingConfig {
                damping: Some(damping),
                ..PricingConfig::default()
            };
            assert!(
                forward_call_fourier(&c, 0.1, 5.0, &cfg).is_err(),
                "damping {damping}"
            );
        }
    }

    #[test]
    fn critical_strike_price_is_finite_and_in_band() {
        // Strike e^{k tau} ~ 2.39 at tau = 5 for the asymmetric set.
        let c = p2();
        let kc = c.strike_at_upper_critical().unwrap();
        assert_relative_eq!((kc * 5.0).exp(), 2.39, epsilon = 2e-2);
        let price = forward_call_fourier(&c, kc, 5.0, &PricingConfig::default()).unwrap();
        assert!(price > 0.0 && price < 1.0);
    }

    #[test]
    fn implied_vol_round_trip_and_atm_identity() {
        let cfg = PricingConfig::default();
        let (k, tau, sigma) = (0.1, 5.0, 0.2);
        let price = bs_price(k, tau, sigma);
        let ivol = implied_vol(price, k, tau, &cfg).unwrap();
        assert_relative_eq!(ivol, sigma, epsilon = 1e-10);
        // ATM-forward: C = N(s/2) - N(-s/2) with s = sigma sqrt(tau).
        let s = sigma * tau.sqrt();
        assert_relative_eq!(
            bs_price(0.0, tau, sigma),
            crate::special::norm_cdf(0.5 * s) - crate::special::norm_cdf(-0.5 * s),
            epsilon = 1e-15
        );
    }

    #[test]
    fn implied_vol_boundary_behaviour() {
        let cfg = PricingConfig::default();
        // Volatility decreases monotonically as the price slides toward the
        // intrinsic floor.
        let k = 0.2;
        let lo = implied_vol(1e-9, k, 1.0, &cfg).unwrap();
        let mid = implied_vol(1e-6, k, 1.0, &cfg).unwrap();
        let hi = implied_vol(1e-3, k, 1.0, &cfg).unwrap();
        assert!(lo < mid && mid < hi && lo < 0.05);
        // The band itself is excluded.
        assert!(implied_vol(0.0, k, 1.0, &cfg).is_err());
        assert!(implied_vol(1.0, k, 1.0, &cfg).is_err());
        let itm = -0.5f64;
        assert!(implied_vol((1.0 - itm.exp()) - 1e-12, itm, 1.0, &cfg).is_err());
    }

    #[test]
    fn numeric_saddlepoint_r2_behaviour() {
        let c = p2();
        let cfg = PricingConfig::default();
        let kc = c.strike_at_upper_critical().unwrap();
        let k = kc + 0.5;
        let us = c.u_star_plus().unwrap();
        // Monotone in tau toward u*+ from below.
        let mut last = 0.0;
        for tau in [5.0, 25.0, 125.0] {
            let u = numeric_saddlepoint(&c, k, tau, &cfg).unwrap();
            assert!(u > last && u < us);
            last = u;
        }
    }

    #[test]
    fn numeric_saddlepoint_kink_behaviour() {
        // v < theta: the saddle at k = V'(0) sits below zero and matches the
        // leading term of its expansion.
        let c = ctx(0.05, 0.07, 1.5, 0.34, -0.25, 1.0);
        let cfg = PricingConfig::default();
        let k0 = c.strike_at_zero();
        let p = c.params();
        let eta2 = c.eta() * c.eta();
        let alpha0 = 2.0 * p.kappa * (p.v - p.theta) / (c.exp_kt() * p.theta * eta2);
        for tau in [100.0, 400.0] {
            let u = numeric_saddlepoint(&c, k0, tau, &cfg).unwrap();
            assert!(u < 0.0);
            assert_relative_eq!(u, alpha0 / tau, max_relative = 0.05);
        }
    }

    #[test]
    fn numeric_saddlepoint_unit_node_in_large_correlation() {
        let c = ctx(0.07, 0.07, 0.1, 0.6, 0.5, 0.0);
        let cfg = PricingConfig::default();
        let k = c.strike_at_one() + 0.3;
        let u = numeric_saddlepoint(&c, k, 100.0, &cfg).unwrap();
        let expected = 1.0 - c.mu() / ((k - c.strike_at_one()) * 100.0);
        assert_relative_eq!(u, expected, max_relative = 1e-3);
    }

    #[test]
    fn numeric_saddlepoint_rejects_uncovered_strikes() {
        let c = p2();
        let cfg = PricingConfig::default();
        // Interior strike away from any covered case.
        assert!(matches!(
            numeric_saddlepoint(&c, 0.05, 10.0, &cfg),
            Err(Error::Domain(_))
        ));
        // Degenerate kink (v = theta here): the saddle is pinned.
        assert!(matches!(
            numeric_saddlepoint(&c, c.strike_at_zero(), 10.0, &cfg),
            Err(Error::Degenerate(_))
        ));
    }
}
