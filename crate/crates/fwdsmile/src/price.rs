//! Large-maturity forward-start call price expansion.
//!
//! For every regime and log-strike `k` the price of the forward-start call
//! with strike `e^{k tau}` expands as
//!
//! ```text
//! I(k, tau, V'(0), V'(1), 1{kappa < rho xi})
//!   + phi(k, t) / tau^alpha * exp(-tau (V*(k) - k) + psi(k, t) tau^gamma)
//!   * (1 + O(tau^-beta)),
//! ```
//!
//! where the exponents `(alpha, beta, gamma)` and the pair `(phi, psi)` are
//! bundled per regime/strike-region combination. The seven combinations are
//! tagged `H0`, `HTilde+-`, `H+-`, `H1`, `H2`:
//!
//! | tag   | alpha       | beta | gamma | psi        | where                                   |
//! |-------|-------------|------|-------|------------|-----------------------------------------|
//! | H0    | 1/2         | 1    | 0     | 0          | strictly convex rate-function region    |
//! | HT+-  | mu/3 - 1/2  | 1/3  | 1/3   | c0~+-      | exactly at the critical strike V'(u*+-) |
//! | H+-   | mu/2 - 3/4  | 1/2  | 1/2   | c0+-       | beyond the critical strike              |
//! | H1    | -mu/2       | 1/2  | 0     | 0          | at V'(1), large-correlation regimes     |
//! | H2    | -mu         | 1    | 0     | 0          | beyond V'(1), large-correlation regimes |

use crate::context::{Endpoint, ForwardContext, Regime};
use crate::error::{Error, Result};
use crate::special::{gamma as gamma_fn, norm_cdf};
use crate::TRANSITION_STRIKE_TOL;

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

/// Which of the two critical moments `u*+-` a coefficient family refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    fn u_star(self, ctx: &ForwardContext) -> Result<f64> {
        let us = match self {
            Side::Upper => ctx.u_star_plus(),
            Side::Lower => ctx.u_star_minus(),
        };
        match us {
            Some(u) if u.is_finite() => Ok(u),
            _ => Err(Error::Domain(
                "critical moment u* is not finite in this regime",
            )),
        }
    }
}

/// Expansion-combination tag per the regime/strike table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinationTag {
    H0,
    HTildePlus,
    HTildeMinus,
    HPlus,
    HMinus,
    H1,
    H2,
}

impl core::fmt::Display for CombinationTag {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            CombinationTag::H0 => "H0",
            CombinationTag::HTildePlus => "Htilde+",
            CombinationTag::HTildeMinus => "Htilde-",
            CombinationTag::HPlus => "H+",
            CombinationTag::HMinus => "H-",
            CombinationTag::H1 => "H1",
            CombinationTag::H2 => "H2",
        };
        f.write_str(s)
    }
}

/// Fully evaluated combination at a strike: exponents plus prefactor `phi`
/// and correction coefficient `psi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinationSpec {
    pub tag: CombinationTag,
    /// Power of `1/tau` multiplying the prefactor.
    pub alpha: f64,
    /// Remainder order: the expansion is exact up to `O(tau^-beta)` relative.
    pub beta: f64,
    /// Power of `tau` in the sub-exponential correction `psi tau^gamma`.
    pub gamma: f64,
    pub phi: f64,
    pub psi: f64,
}

/// Exponent triple `(alpha, beta, gamma)` for a tag; `mu = 2 kappa theta / xi^2`.
pub fn exponents(tag: CombinationTag, mu: f64) -> (f64, f64, f64) {
    match tag {
        CombinationTag::H0 => (0.5, 1.0, 0.0),
        CombinationTag::HTildePlus | CombinationTag::HTildeMinus => {
            (mu / 3.0 - 0.5, 1.0 / 3.0, 1.0 / 3.0)
        }
        CombinationTag::HPlus | CombinationTag::HMinus => (mu / 2.0 - 0.75, 0.5, 0.5),
        CombinationTag::H1 => (-mu / 2.0, 0.5, 0.0),
        CombinationTag::H2 => (-mu, 1.0, 0.0),
    }
}

/// Resolves the combination in force at log-strike `k`.
///
/// Transition strikes are matched with absolute tolerance
/// [`TRANSITION_STRIKE_TOL`]. Under `H0`, landing on `V'(a)` for `a` in
/// `{0, 1}` is rejected when the degeneracy `v = theta Upsilon(a)` holds.
pub fn combination_for_strike(ctx: &ForwardContext, k: f64) -> Result<CombinationTag> {
    let tol = TRANSITION_STRIKE_TOL;
    let tag = match ctx.regime() {
        Regime::R1 => CombinationTag::H0,
        Regime::R2 => {
            let kc = ctx
                .strike_at_upper_critical()
                .ok_or(Error::Domain("upper critical strike missing in R2"))?;
            if (k - kc).abs() <= tol {
                CombinationTag::HTildePlus
            } else if k < kc {
                CombinationTag::H0
            } else {
                CombinationTag::HPlus
            }
        }
        Regime::R3a | Regime::R3b => {
            let kc = ctx
                .strike_at_lower_critical()
                .ok_or(Error::Domain("lower critical strike missing in R3"))?;
            if (k - kc).abs() <= tol {
                CombinationTag::HTildeMinus
            } else if k < kc {
                CombinationTag::HMinus
            } else if ctx.regime() == Regime::R3a {
                CombinationTag::H0
            } else {
                let k1 = ctx.strike_at_one();
                if (k - k1).abs() <= tol {
                    CombinationTag::H1
                } else if k < k1 {
                    CombinationTag::H0
                } else {
                    CombinationTag::H2
                }
            }
        }
        Regime::R4 => {
            let k1 = ctx.strike_at_one();
            if (k - k1).abs() <= tol {
                CombinationTag::H1
            } else if k < k1 {
                CombinationTag::H0
            } else {
                CombinationTag::H2
            }
        }
    };
    if tag == CombinationTag::H0 {
        for a in [Endpoint::Zero, Endpoint::One] {
            if ctx.matches_endpoint_strike(k, a, tol) && ctx.is_degenerate(a) {
                return Err(Error::Degenerate(
                    "expansion excluded at V'(a) when v = theta Upsilon(a)",
                ));
            }
        }
    }
    Ok(tag)
}

/// Coefficient family behind `H+-` (strikes strictly beyond the critical
/// strike `V'(u*+-)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub zeta2: f64,
    pub e0: f64,
    pub e1: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub phi: f64,
}

/// Evaluates the `H+-` coefficients at `k`.
///
/// Requires the regime to admit the finite critical moment on `side` and
/// `k` to lie strictly beyond `V'(u*side)`; otherwise the variance
/// `zeta^2(k)` loses positivity and the call fails with a domain error.
pub fn power_coeffs(ctx: &ForwardContext, k: f64, side: Side) -> Result<PowerCoeffs> {
    let us = side.u_star(ctx)?;
    let vd = ctx.v_derivs(us)?;
    let p = ctx.params();
    let beta_t = ctx.beta_t();
    let exp_mkt = 1.0 / ctx.exp_kt();
    let dk = k - vd.d1;
    let radicand = vd.d1 * dk * dk * dk / (p.kappa * p.theta * p.v * exp_mkt);
    if !(radicand > 0.0) || beta_t == 0.0 {
        return Err(Error::Domain(
            "strike on the wrong side of the critical strike",
        ));
    }
    let zeta2 = 4.0 * beta_t * radicand.sqrt();
    let a1 = match side {
        Side::Upper => -2.0 * dk.abs() / zeta2,
        Side::Lower => 2.0 * dk.abs() / zeta2,
    };
    let a2 = p.mu() * exp_mkt / (16.0 * beta_t * beta_t)
        * (p.xi * p.xi * p.v * vd.d2 - 8.0 * beta_t * beta_t * ctx.exp_kt() * vd.d1 * dk)
        / (vd.d1 * dk * dk);
    let e0 = -2.0 * beta_t * a1 * vd.d1;
    let e1 = -beta_t * (vd.d2 * a1 * a1 + 2.0 * vd.d1 * a2);
    let c0 = -2.0 * a1 * dk;
    let (_, gamma_us) = ctx.d_gamma(num_complex::Complex64::new(us, 0.0));
    let c2 = (p.kappa * p.theta * (1.0 - gamma_us.re) / e0).powf(p.mu());
    let c1 = p.v * exp_mkt * (a1 * vd.d1 / e0 - p.kappa * p.theta * e1 / (2.0 * e0 * e0 * beta_t))
        - a2 * dk
        + 0.5 * a1 * a1 * vd.d2;
    let phi = c2 * c1.exp() / (zeta2.sqrt() * us * (us - 1.0) * TWO_PI.sqrt());
    Ok(PowerCoeffs {
        a1,
        a2,
        zeta2,
        e0,
        e1,
        c0,
        c1,
        c2,
        phi,
    })
}

/// Coefficient family behind `HTilde+-` (exactly at the critical strike).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TildeCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub e0: f64,
    pub e1: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub phi: f64,
}

pub fn tilde_coeffs(ctx: &ForwardContext, side: Side) -> Result<TildeCoeffs> {
    let us = side.u_star(ctx)?;
    let vd = ctx.v_derivs(us)?;
    let p = ctx.params();
    let beta_t = ctx.beta_t();
    if beta_t == 0.0 {
        return Err(Error::Domain("critical-strike coefficients require t > 0"));
    }
    let exp_mkt = 1.0 / ctx.exp_kt();
    let cube = exp_mkt * p.kappa * p.theta * p.v / (4.0 * vd.d1 * vd.d2 * beta_t * beta_t);
    let magnitude = cube.abs().powf(1.0 / 3.0);
    let a1 = match side {
        Side::Upper => -magnitude,
        Side::Lower => magnitude,
    };
    let a2 = -(p.kappa * p.theta * exp_mkt).powf(2.0 / 3.0)
        / (12.0 * p.xi * p.xi * p.v.powf(1.0 / 3.0) * beta_t.powf(4.0 / 3.0))
        * (16.0 * vd.d1 * vd.d2 * beta_t * beta_t * ctx.exp_kt() + p.xi * p.xi * p.v * vd.d3)
        / (2f64.powf(1.0 / 3.0) * vd.d1.abs().powf(2.0 / 3.0) * vd.d2.powf(5.0 / 3.0));
    let e0 = -2.0 * beta_t * a1 * vd.d1;
    let e1 = -beta_t * (vd.d2 * a1 * a1 + 2.0 * vd.d1 * a2);
    let c0 = 1.5 * a1 * a1 * vd.d2;
    let (_, gamma_us) = ctx.d_gamma(num_complex::Complex64::new(us, 0.0));
    let c2 = (p.kappa * p.theta * (1.0 - gamma_us.re) / e0).powf(p.mu());
    let c1 = p.v * exp_mkt * (a1 * vd.d1 / e0 - p.kappa * p.theta * e1 / (2.0 * e0 * e0 * beta_t))
        + a1 * a2 * vd.d2
        + a1 * a1 * a1 * vd.d3 / 6.0;
    let phi = c2 * c1.exp() / (us * (us - 1.0) * (6.0 * core::f64::consts::PI * vd.d2).sqrt());
    Ok(TildeCoeffs {
        a1,
        a2,
        e0,
        e1,
        c0,
        c1,
        c2,
        phi,
    })
}

/// Coefficients behind `H1`/`H2` (large-correlation regimes at and beyond
/// `V'(1)`): the constant `g0` and the prefactors `phi1`, `phi2(k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitBoundaryCoeffs {
    pub g0: f64,
    pub phi1: f64,
    /// `phi2` evaluated at the requested strike, when `k > V'(1)` was given.
    pub phi2: Option<f64>,
}

pub fn unit_boundary_coeffs(ctx: &ForwardContext, k: Option<f64>) -> Result<UnitBoundaryCoeffs> {
    if !matches!(ctx.regime(), Regime::R3b | Regime::R4) {
        return Err(Error::Domain(
            "unit-boundary coefficients require rho > kappa/xi",
        ));
    }
    let p = ctx.params();
    let v1 = ctx.v(1.0)?;
    let den = p.kappa * p.theta - 2.0 * ctx.beta_t() * v1;
    if !(den > 0.0) {
        return Err(Error::Domain(
            "kappa theta - 2 beta_t V(1) must be positive",
        ));
    }
    let g0 = p.v * v1 / (ctx.exp_kt() * den);
    let kre = (p.kappa - p.rho * p.xi) * (p.kappa - p.rho * p.xi);
    let mu = p.mu();
    let vpp1 = ctx.v_derivs(1.0)?.d2;
    let phi1 = -g0.exp() / (2.0 * gamma_fn(1.0 + 0.5 * mu))
        * (mu * kre * (2.0 * vpp1).sqrt() / den).powf(mu);
    let phi2 = match k {
        Some(k) => {
            let k1 = ctx.strike_at_one();
            if !(k > k1) {
                return Err(Error::Domain("phi2 requires k > V'(1)"));
            }
            Some(-g0.exp() / gamma_fn(1.0 + mu) * (2.0 * mu * kre * (k - k1) / den).powf(mu))
        }
        None => None,
    };
    Ok(UnitBoundaryCoeffs { g0, phi1, phi2 })
}

/// Prefactor of the `H0` combination.
///
/// Generic strikes use `exp(H(u*(k))) / (u*(u*-1) sqrt(2 pi V''))`; at the
/// kink strikes `V'(0)` and `V'(1)` (matched within the transition
/// tolerance) the factor collapses to the boundary branch built from
/// `V'''`, `H'` and the sign of `k`.
pub fn phi0(ctx: &ForwardContext, k: f64) -> Result<f64> {
    let us = ctx.saddle_point(k);
    let vd = ctx.v_derivs(us)?;
    let prefactor = 1.0 / (TWO_PI * vd.d2).sqrt();
    for a in [Endpoint::Zero, Endpoint::One] {
        if ctx.matches_endpoint_strike(k, a, TRANSITION_STRIKE_TOL) {
            if ctx.is_degenerate(a) {
                return Err(Error::Degenerate(
                    "phi0 excluded at V'(a) when v = theta Upsilon(a)",
                ));
            }
            let sgn = if k >= 0.0 { 1.0 } else { -1.0 };
            let hp = ctx.h_prime(a.as_f64())?;
            let vda = ctx.v_derivs(a.as_f64())?;
            return Ok(prefactor * (-1.0 - sgn * (vda.d3 / (6.0 * vda.d2) - hp)));
        }
    }
    Ok(prefactor * ctx.h(us)?.exp() / (us * (us - 1.0)))
}

/// Intrinsic part of the large-maturity price:
///
/// ```text
/// I(k, tau, a, b, c) = (1 - e^{k tau}) 1{k<a} + 1{a<k<b} + c 1{b<=k}
///                      + (1-c)/2 1{k=b} + (1 - e^{k tau}/2) 1{k=a}
/// ```
///
/// Boundary cases use exact equality.
pub fn intrinsic(k: f64, tau: f64, a: f64, b: f64, c: f64) -> f64 {
    if k < a {
        1.0 - (k * tau).exp()
    } else if k == a {
        1.0 - 0.5 * (k * tau).exp()
    } else if k < b {
        1.0
    } else if k == b {
        0.5 * (1.0 + c)
    } else {
        c
    }
}

/// Decomposed asymptotic forward-start call price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionResult {
    pub tag: CombinationTag,
    /// Value of the intrinsic function `I`.
    pub intrinsic: f64,
    /// Exponential decay rate `V*(k) - k`.
    pub rate: f64,
    /// Sub-exponential correction `psi tau^gamma`.
    pub correction: f64,
    /// `log(|phi| / tau^alpha)`.
    pub log_prefactor: f64,
    /// Sign of the prefactor `phi` (`+1` or `-1`).
    pub prefactor_sign: f64,
    /// Assembled price `intrinsic + sign * exp(log_prefactor - tau rate + correction)`.
    pub price: f64,
    /// Relative remainder order `beta`.
    pub remainder_order: f64,
}

impl ExpansionResult {
    /// Leading-order price: intrinsic plus the bare exponential
    /// `sign(phi) e^{-tau (V*(k) - k)}`, without prefactor or correction.
    pub fn leading_order_price(&self, tau: f64) -> f64 {
        self.intrinsic + self.prefactor_sign * (-tau * self.rate).exp()
    }
}

/// Evaluates the combination in force at `k`: tag, exponent triple, and the
/// prefactor/correction pair `(phi, psi)`.
pub fn combination_spec(ctx: &ForwardContext, k: f64) -> Result<CombinationSpec> {
    let tag = combination_for_strike(ctx, k)?;
    let (alpha, beta, gamma) = exponents(tag, ctx.mu());
    let (phi, psi) = match tag {
        CombinationTag::H0 => (phi0(ctx, k)?, 0.0),
        CombinationTag::HPlus => {
            let c = power_coeffs(ctx, k, Side::Upper)?;
            (c.phi, c.c0)
        }
        CombinationTag::HMinus => {
            let c = power_coeffs(ctx, k, Side::Lower)?;
            (c.phi, c.c0)
        }
        CombinationTag::HTildePlus => {
            let c = tilde_coeffs(ctx, Side::Upper)?;
            (c.phi, c.c0)
        }
        CombinationTag::HTildeMinus => {
            let c = tilde_coeffs(ctx, Side::Lower)?;
            (c.phi, c.c0)
        }
        CombinationTag::H1 => (unit_boundary_coeffs(ctx, None)?.phi1, 0.0),
        CombinationTag::H2 => (
            unit_boundary_coeffs(ctx, Some(k))?
                .phi2
                .expect("phi2 requested"),
            0.0,
        ),
    };
    Ok(CombinationSpec {
        tag,
        alpha,
        beta,
        gamma,
        phi,
        psi,
    })
}

/// Assembles the full price expansion at `(k, tau)`.
///
/// The exponential factor is put together in log space so that the `H+-`
/// correction `psi tau^gamma` (with `psi > 0`) cannot overflow before being
/// offset by the decay term.
pub fn forward_call_asymptotic(ctx: &ForwardContext, k: f64, tau: f64) -> Result<ExpansionResult> {
    if !(tau > 0.0) {
        return Err(Error::Domain("tau must be positive"));
    }
    let CombinationSpec {
        tag,
        alpha,
        beta,
        gamma,
        phi,
        psi,
    } = combination_spec(ctx, k)?;

    // Snap k to the transition strike for the indicator comparisons when the
    // combination matched it within tolerance, so the intrinsic branch and
    // the prefactor branch stay mutually consistent.
    let k0 = ctx.strike_at_zero();
    let k1 = ctx.strike_at_one();
    let k_ind = if ctx.matches_endpoint_strike(k, Endpoint::Zero, TRANSITION_STRIKE_TOL) {
        k0
    } else if ctx.matches_endpoint_strike(k, Endpoint::One, TRANSITION_STRIKE_TOL) {
        k1
    } else {
        k
    };
    let c_ind = if ctx.params().kappa < ctx.params().rho * ctx.params().xi {
        1.0
    } else {
        0.0
    };
    let intrinsic_value = {
        // Evaluate I at the actual k but with the snapped indicator role.
        if k_ind < k0 {
            1.0 - (k * tau).exp()
        } else if k_ind == k0 {
            1.0 - 0.5 * (k * tau).exp()
        } else if k_ind < k1 {
            1.0
        } else if k_ind == k1 {
            0.5 * (1.0 + c_ind)
        } else {
            c_ind
        }
    };

    let rate = ctx.rate_function(k) - k;
    let correction = psi * tau.powf(gamma);
    let log_prefactor = phi.abs().ln() - alpha * tau.ln();
    let prefactor_sign = if phi >= 0.0 { 1.0 } else { -1.0 };
    let price = intrinsic_value + prefactor_sign * (log_prefactor - tau * rate + correction).exp();
    Ok(ExpansionResult {
        tag,
        intrinsic: intrinsic_value,
        rate,
        correction,
        log_prefactor,
        prefactor_sign,
        price,
        remainder_order: beta,
    })
}

/// Black-Scholes analogue of the price expansion, for total variance
/// `Sigma^2 = a + b/tau`:
///
/// ```text
/// I(k, tau, -a/2, a/2, 0) + phi_bs(k, a, b) / sqrt(tau)
///   * exp(-tau (V*_bs(k, a) - k)) (1 + O(1/tau)),
/// ```
///
/// with `V*_bs(k, a) = (k + a/2)^2 / (2a)`.
pub fn bs_call_expansion(k: f64, tau: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(a + b / tau > 0.0) || !(tau > 0.0) {
        return Err(Error::Domain(
            "BS expansion requires a > 0 and a + b/tau > 0",
        ));
    }
    let phi = if k.abs() == 0.5 * a {
        (b - 2.0) / (2.0 * (2.0 * a * core::f64::consts::PI).sqrt())
    } else {
        4.0 * a.powf(1.5) / ((4.0 * k * k - a * a) * TWO_PI.sqrt())
            * (b * (k * k / (2.0 * a * a) - 0.125)).exp()
    };
    let rate = (k + 0.5 * a) * (k + 0.5 * a) / (2.0 * a) - k;
    Ok(intrinsic(k, tau, -0.5 * a, 0.5 * a, 0.0) + phi / tau.sqrt() * (-tau * rate).exp())
}

/// Closed-form Black-Scholes call on a unit forward with log-strike
/// `log_strike` and volatility `sigma` (zero rates). Used here as the
/// comparison oracle for [`bs_call_expansion`]; the pricer module re-exports
/// it for implied-volatility inversion.
pub(crate) fn bs_call_price(log_strike: f64, tau: f64, sigma: f64) -> f64 {
    let st = sigma * tau.sqrt();
    if st <= 0.0 {
        return (1.0 - log_strike.exp()).max(0.0);
    }
    let d_plus = -log_strike / st + 0.5 * st;
    let d_minus = d_plus - st;
    norm_cdf(d_plus) - log_strike.exp() * norm_cdf(d_minus)
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

    fn p3() -> ForwardContext {
        ctx(0.07, 0.07, 1.5, 0.34, -0.25, 1.0)
    }

    fn p4() -> ForwardContext {
        ctx(0.07, 0.07, 0.1, 0.6, 0.5, 0.0)
    }

    #[test]
    fn exponent_table() {
        let mu = 0.8;
        assert_eq!(exponents(CombinationTag::H0, mu), (0.5, 1.0, 0.0));
        assert_eq!(
            exponents(CombinationTag::HTildePlus, mu),
            (mu / 3.0 - 0.5, 1.0 / 3.0, 1.0 / 3.0)
        );
        assert_eq!(
            exponents(CombinationTag::HMinus, mu),
            (mu / 2.0 - 0.75, 0.5, 0.5)
        );
        assert_eq!(exponents(CombinationTag::H1, mu), (-mu / 2.0, 0.5, 0.0));
        assert_eq!(exponents(CombinationTag::H2, mu), (-mu, 1.0, 0.0));
    }

    #[test]
    fn combination_spec_has_zero_correction_off_the_power_regions() {
        // psi = 0 under H0, H1 and H2; positive under H+- and HTilde+-.
        let c = p2();
        let kc = c.strike_at_upper_critical().unwrap();
        assert_eq!(combination_spec(&c, 0.0).unwrap().psi, 0.0);
        assert!(combination_spec(&c, kc).unwrap().psi > 0.0);
        assert!(combination_spec(&c, kc + 0.4).unwrap().psi > 0.0);
        let c4 = p4();
        let k1 = c4.strike_at_one();
        assert_eq!(combination_spec(&c4, k1).unwrap().psi, 0.0);
        assert_eq!(combination_spec(&c4, k1 + 0.2).unwrap().psi, 0.0);
    }

    #[test]
    fn combination_selection_per_regime() {
        assert_eq!(
            combination_for_strike(&p3(), -5.0).unwrap(),
            CombinationTag::H0
        );
        assert_eq!(
            combination_for_strike(&p3(), 5.0).unwrap(),
            CombinationTag::H0
        );
        let c = p2();
        let kc = c.strike_at_upper_critical().unwrap();
        assert_eq!(
            combination_for_strike(&c, kc - 0.1).unwrap(),
            CombinationTag::H0
        );
        assert_eq!(
            combination_for_strike(&c, kc).unwrap(),
            CombinationTag::HTildePlus
        );
        assert_eq!(
            combination_for_strike(&c, kc + 0.1).unwrap(),
            CombinationTag::HPlus
        );
        let c = p4();
        let k1 = c.strike_at_one();
        assert_eq!(
            combination_for_strike(&c, k1 - 0.01).unwrap(),
            CombinationTag::H0
        );
        assert_eq!(combination_for_strike(&c, k1).unwrap(), CombinationTag::H1);
        assert_eq!(
            combination_for_strike(&c, k1 + 0.3).unwrap(),
            CombinationTag::H2
        );
        let c3 = ctx(0.07, 0.07, 1.5, 0.65, 0.75, 3.0);
        let km = c3.strike_at_lower_critical().unwrap();
        assert_eq!(
            combination_for_strike(&c3, km - 0.2).unwrap(),
            CombinationTag::HMinus
        );
        assert_eq!(
            combination_for_strike(&c3, km).unwrap(),
            CombinationTag::HTildeMinus
        );
        assert_eq!(
            combination_for_strike(&c3, km + 0.2).unwrap(),
            CombinationTag::H0
        );
    }

    #[test]
    fn degenerate_strike_is_excluded() {
        // v = theta makes V'(0) degenerate under H0.
        let c = p3();
        let k0 = c.strike_at_zero();
        assert!(matches!(
            combination_for_strike(&c, k0),
            Err(Error::Degenerate(_))
        ));
        // A nearby strike is fine.
        assert!(combination_for_strike(&c, k0 + 1e-6).is_ok());
        // And a non-degenerate context accepts the kink strike.
        let c2 = ctx(0.05, 0.07, 1.5, 0.34, -0.25, 1.0);
        assert!(combination_for_strike(&c2, c2.strike_at_zero()).is_ok());
    }

    #[test]
    fn power_coeffs_signs_and_consistency() {
        let c = p2();
        let kc = c.strike_at_upper_critical().unwrap();
        let k = 2.0 * kc;
        let pc = power_coeffs(&c, k, Side::Upper).unwrap();
        assert!(pc.zeta2 > 0.0 && pc.c0 > 0.0 && pc.c2 > 0.0);
        assert!(pc.a1 < 0.0);
        for x in [pc.a1, pc.a2, pc.e0, pc.e1, pc.c1, pc.phi] {
            assert!(x.is_finite());
        }
        // e0 cross-check from parts.
        let us = c.u_star_plus().unwrap();
        let vp = c.v_derivs(us).unwrap().d1;
        assert_relative_eq!(pc.e0, -2.0 * c.beta_t() * pc.a1 * vp, epsilon = 1e-12);
        // Wrong side of the critical strike fails.
        assert!(power_coeffs(&c, kc - 0.1, Side::Upper).is_err());
    }

    #[test]
    fn power_coeffs_diverge_at_the_critical_strike() {
        let c = p2();
        let kc = c.strike_at_upper_critical().unwrap();
        let near = power_coeffs(&c, kc + 1e-6, Side::Upper).unwrap();
        let far = power_coeffs(&c, kc + 1e-2, Side::Upper).unwrap();
        // |a1| ~ (k - V'(u*+))^{-1/2}: four decades in dk give two in a1.
        assert!(near.a1.abs() > 90.0 * far.a1.abs());
        assert!(near.zeta2 < 1e-4 * far.zeta2);
    }

    #[test]
    fn tilde_coeffs_signs_and_consistency() {
        let c = p2();
        let tc = tilde_coeffs(&c, Side::Upper).unwrap();
        assert!(tc.a1 < 0.0);
        assert!(tc.c0 > 0.0);
        let us = c.u_star_plus().unwrap();
        let vp = c.v_derivs(us).unwrap().d1;
        assert_relative_eq!(tc.e0, -2.0 * c.beta_t() * tc.a1 * vp, epsilon = 1e-12);
    }

    #[test]
    fn unit_boundary_coeffs_signs() {
        let c = p4();
        let k1 = c.strike_at_one();
        let ub = unit_boundary_coeffs(&c, Some(k1 + 0.1)).unwrap();
        assert!(ub.phi1 < 0.0);
        assert!(ub.phi2.unwrap() < 0.0);
        // t = 0 => beta_t = 0 => g0 = v V(1) / (kappa theta).
        let p = c.params();
        let expected = p.v * c.v(1.0).unwrap() / (p.kappa * p.theta);
        assert_relative_eq!(ub.g0, expected, epsilon = 1e-14);
        // Outside the large-correlation regimes the family is undefined.
        assert!(unit_boundary_coeffs(&p3(), None).is_err());
    }

    #[test]
    fn phi0_branches() {
        let c = p3();
        let value = phi0(&c, 0.1).unwrap();
        let us = c.saddle_point(0.1);
        assert!(value.is_finite());
        assert_eq!(value > 0.0, us * (us - 1.0) > 0.0);
        // Degenerate kink rejected (v = theta here).
        assert!(phi0(&c, c.strike_at_zero()).is_err());
        // Non-degenerate kink: boundary branch agrees with a recomputation.
        let c2 = ctx(0.05, 0.07, 1.5, 0.34, -0.25, 1.0);
        let k1 = c2.strike_at_one();
        let got = phi0(&c2, k1).unwrap();
        let vd = c2.v_derivs(1.0).unwrap();
        let hp = c2.h_prime(1.0).unwrap();
        let expected = (-1.0 - (vd.d3 / (6.0 * vd.d2) - hp)) / (TWO_PI * vd.d2).sqrt();
        assert_relative_eq!(got, expected, epsilon = 1e-12);
    }

    #[test]
    fn phi0_blows_up_towards_the_kink() {
        let c = ctx(0.05, 0.07, 1.5, 0.34, -0.25, 1.0);
        let k0 = c.strike_at_zero();
        // Generic branch near V'(0): u*(k) -> 0 in the denominator.
        let near = phi0(&c, k0 + 1e-7).unwrap();
        let far = phi0(&c, k0 + 1e-2).unwrap();
        assert!(near.abs() > 1e3 * far.abs());
    }

    #[test]
    fn intrinsic_piecewise_values() {
        let (a, b, tau) = (-0.05, 0.1, 7.0);
        assert_relative_eq!(intrinsic(-0.2, tau, a, b, 0.3), 1.0 - (-0.2f64 * tau).exp());
        assert_relative_eq!(intrinsic(a, tau, a, b, 0.3), 1.0 - 0.5 * (a * tau).exp());
        assert_eq!(intrinsic(0.0, tau, a, b, 0.3), 1.0);
        assert_relative_eq!(intrinsic(b, tau, a, b, 0.3), 0.5 * 1.3);
        assert_relative_eq!(intrinsic(b, tau, a, b, 1.0), 1.0);
        assert_eq!(intrinsic(0.5, tau, a, b, 0.3), 0.3);
    }

    #[test]
    fn deep_itm_price_is_intrinsic_plus_small_term() {
        let c = p3();
        let res = forward_call_asymptotic(&c, -2.0, 10.0).unwrap();
        assert!(res.rate > 0.0);
        assert_relative_eq!(res.price, 1.0 - (-20.0f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn large_correlation_prices_decay_to_one() {
        let c = p4();
        let k = c.strike_at_one() + 0.1;
        let mut last = 0.0;
        for tau in [10.0, 20.0, 40.0, 80.0, 160.0, 320.0] {
            let res = forward_call_asymptotic(&c, k, tau).unwrap();
            assert_eq!(res.tag, CombinationTag::H2);
            assert!(res.price < 1.0 && res.price > last);
            last = res.price;
        }
        assert!(last > 0.8);
    }

    #[test]
    fn bs_expansion_boundary_branch_and_rate() {
        let (a, b) = (0.04, 0.3);
        // k = a/2 uses the boundary prefactor.
        let tau = 50.0;
        let k = 0.5 * a;
        let phi = (b - 2.0) / (2.0 * (2.0 * a * core::f64::consts::PI).sqrt());
        let expected = intrinsic(k, tau, -0.5 * a, 0.5 * a, 0.0) + phi / tau.sqrt();
        assert_relative_eq!(
            bs_call_expansion(k, tau, a, b).unwrap(),
            expected,
            epsilon = 1e-14
        );
        // V*_bs(k, a) - k = (k - a/2)^2 / (2a) >= 0, zero only at k = a/2.
        for &k in &[-0.3, -0.02, 0.0, 0.02, 0.3] {
            let rate = (k + 0.5 * a) * (k + 0.5 * a) / (2.0 * a) - k;
            assert!(rate >= -1e-15);
            if k != 0.5 * a {
                assert!(rate > 0.0);
            }
        }
        assert!(bs_call_expansion(0.0, tau, -0.1, 0.0).is_err());
        assert!(bs_call_expansion(0.0, 1.0, 0.04, -0.05).is_err());
    }

    #[test]
    fn bs_expansion_converges_to_black_scholes() {
        // Relative error decays like 1/tau: each tau-doubling should cut it
        // roughly in half.
        let (a, b, k): (f64, f64, f64) = (0.09, 0.0, 0.15);
        let mut last_rel = f64::INFINITY;
        for tau in [100.0, 200.0, 400.0, 800.0, 1600.0] {
            let exact = bs_call_price(k * tau, tau, a.sqrt());
            let asym = bs_call_expansion(k, tau, a, b).unwrap();
            let rel = ((asym - exact) / exact).abs();
            assert!(
                rel < 0.65 * last_rel,
                "tau={tau}: rel={rel} last={last_rel}"
            );
            last_rel = rel;
        }
        assert!(
            last_rel < 1e-2,
            "rel error at the largest maturity: {last_rel}"
        );
    }
}
