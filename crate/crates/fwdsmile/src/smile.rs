//! Large-maturity forward implied-variance expansion and its SVI limit.
//!
//! The squared forward smile at log-strike `k tau` expands as
//! `sigma^2 = v0(k) + v1(k) tau^-lambda + remainder`, with the zeroth order
//!
//! ```text
//! v0(k) = 2 (2 V*(k) - k + 2 Z(k) sqrt(V*(k) (V*(k) - k))),
//! ```
//!
//! `Z` the root-selector (`+1` between the kink strikes, `-1` to the left,
//! `sgn(rho xi - kappa)` to the right), and the first-order coefficient and
//! exponent bundled per combination `P0`/`PTilde+-`/`P+-`/`P1` the same way
//! the price expansion bundles `H0`/`HTilde+-`/`H+-`/`H1`/`H2`.
//!
//! The pointwise `tau -> infinity` limit of the squared smile is an extended
//! SVI parametrisation in every regime; `svi_limit_params` returns the exact
//! parameter set for the region containing `k`.

use crate::context::{Endpoint, ForwardContext, Regime};
use crate::error::{Error, Result};
use crate::price::{power_coeffs, tilde_coeffs, Side};
use crate::TRANSITION_STRIKE_TOL;

/// First-order combination tag of the smile expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmileCombination {
    P0,
    PTildePlus,
    PTildeMinus,
    PPlus,
    PMinus,
    P1,
}

impl core::fmt::Display for SmileCombination {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            SmileCombination::P0 => "P0",
            SmileCombination::PTildePlus => "Ptilde+",
            SmileCombination::PTildeMinus => "Ptilde-",
            SmileCombination::PPlus => "P+",
            SmileCombination::PMinus => "P-",
            SmileCombination::P1 => "P1",
        };
        f.write_str(s)
    }
}

/// Order class of the neglected remainder, reported verbatim (the theory
/// provides no constants).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemainderClass {
    /// `O(tau^{-2 lambda})`.
    BigOTwoLambda,
    /// `o(tau^{-lambda})`.
    SmallOLambda,
    /// `o(1)`.
    SmallOOne,
}

impl core::fmt::Display for RemainderClass {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            RemainderClass::BigOTwoLambda => "O(tau^-2lambda)",
            RemainderClass::SmallOLambda => "o(tau^-lambda)",
            RemainderClass::SmallOOne => "o(1)",
        };
        f.write_str(s)
    }
}

/// First-order expansion data at a strike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrder {
    pub combination: SmileCombination,
    pub v1: f64,
    pub lambda: f64,
    pub remainder: RemainderClass,
}

/// One evaluated point of the asymptotic forward smile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmilePoint {
    /// Log-strike per unit maturity (the actual log-strike is `k tau`).
    pub k: f64,
    pub tau: f64,
    /// Zeroth-order squared-volatility level.
    pub v0: f64,
    /// First-order coefficient.
    pub v1: f64,
    /// Correction exponent: the first-order term is `v1 tau^-lambda`.
    pub lambda: f64,
    pub remainder: RemainderClass,
}

impl SmilePoint {
    /// Squared forward implied volatility through first order.
    pub fn sigma_squared(&self) -> f64 {
        self.v0 + self.v1 * self.tau.powf(-self.lambda)
    }
}

/// Root selector of the zeroth-order formula; `sgn(0) = +1`.
fn zed(ctx: &ForwardContext, k: f64) -> f64 {
    let k0 = ctx.strike_at_zero();
    let k1 = ctx.strike_at_one();
    if k < k0 {
        -1.0
    } else if k <= k1 {
        1.0
    } else {
        let p = ctx.params();
        if p.rho * p.xi - p.kappa >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Zeroth-order squared forward smile; continuous and strictly positive on
/// the whole strike line.
pub fn v0_infinity(ctx: &ForwardContext, k: f64) -> f64 {
    let vs = ctx.rate_function(k);
    let radicand = (vs * (vs - k)).max(0.0);
    2.0 * (2.0 * vs - k + 2.0 * zed(ctx, k) * radicand.sqrt())
}

fn smile_combination(ctx: &ForwardContext, k: f64) -> Result<SmileCombination> {
    let tol = TRANSITION_STRIKE_TOL;
    Ok(match ctx.regime() {
        Regime::R1 => SmileCombination::P0,
        Regime::R2 => {
            let kc = ctx
                .strike_at_upper_critical()
                .ok_or(Error::Domain("upper critical strike missing in R2"))?;
            if (k - kc).abs() <= tol {
                SmileCombination::PTildePlus
            } else if k < kc {
                SmileCombination::P0
            } else {
                SmileCombination::PPlus
            }
        }
        Regime::R3a | Regime::R3b => {
            let kc = ctx
                .strike_at_lower_critical()
                .ok_or(Error::Domain("lower critical strike missing in R3"))?;
            if (k - kc).abs() <= tol {
                SmileCombination::PTildeMinus
            } else if k < kc {
                SmileCombination::PMinus
            } else if ctx.regime() == Regime::R3a || k < ctx.strike_at_one() - tol {
                SmileCombination::P0
            } else {
                SmileCombination::P1
            }
        }
        Regime::R4 => {
            if k < ctx.strike_at_one() - tol {
                SmileCombination::P0
            } else {
                SmileCombination::P1
            }
        }
    })
}

/// First-order coefficient, exponent and remainder class at `k`.
///
/// Off the kink strikes the coefficient is `8 v0^2 chi / (4k^2 - v0^2)` with
/// `chi` the combination-specific constant; at `V'(0)`/`V'(1)` (under `P0`)
/// the dedicated branch built from `V''`, `V'''` and `H'` applies, excluded
/// when `v = theta Upsilon(a)`.
pub fn v1_infinity(ctx: &ForwardContext, k: f64) -> Result<FirstOrder> {
    let comb = smile_combination(ctx, k)?;
    let v0 = v0_infinity(ctx, k);
    let make = |v1: f64, lambda: f64, remainder: RemainderClass| FirstOrder {
        combination: comb,
        v1,
        lambda,
        remainder,
    };
    let generic = |chi: f64| -> Result<f64> {
        let den = 4.0 * k * k - v0 * v0;
        if den == 0.0 {
            return Err(Error::Domain("first-order smile undefined where v0 = 2|k|"));
        }
        Ok(8.0 * v0 * v0 * chi / den)
    };
    match comb {
        SmileCombination::P1 => Ok(make(0.0, 0.0, RemainderClass::SmallOOne)),
        SmileCombination::P0 => {
            for a in [Endpoint::Zero, Endpoint::One] {
                if ctx.matches_endpoint_strike(k, a, TRANSITION_STRIKE_TOL) {
                    if ctx.is_degenerate(a) {
                        return Err(Error::Degenerate(
                            "first-order smile excluded at V'(a) when v = theta Upsilon(a)",
                        ));
                    }
                    let u = a.as_f64();
                    let vd = ctx.v_derivs(u)?;
                    let hp = ctx.h_prime(u)?;
                    let sgn = if k >= 0.0 { 1.0 } else { -1.0 };
                    let v1 = 2.0
                        * (1.0 - (v0 / vd.d2).sqrt() * (1.0 + sgn * (vd.d3 / (6.0 * vd.d2) - hp)));
                    return Ok(make(v1, 1.0, RemainderClass::BigOTwoLambda));
                }
            }
            let us = ctx.saddle_point(k);
            let vd = ctx.v_derivs(us)?;
            let chi = ctx.h(us)?
                + ((4.0 * k * k - v0 * v0) / (4.0 * (us - 1.0) * us * v0.powf(1.5) * vd.d2.sqrt()))
                    .ln();
            Ok(make(generic(chi)?, 1.0, RemainderClass::BigOTwoLambda))
        }
        SmileCombination::PPlus | SmileCombination::PMinus => {
            let side = if comb == SmileCombination::PPlus {
                Side::Upper
            } else {
                Side::Lower
            };
            let chi = power_coeffs(ctx, k, side)?.c0;
            let remainder = if (ctx.mu() - 0.5).abs() <= 1e-12 {
                RemainderClass::BigOTwoLambda
            } else {
                RemainderClass::SmallOLambda
            };
            Ok(make(generic(chi)?, 0.5, remainder))
        }
        SmileCombination::PTildePlus | SmileCombination::PTildeMinus => {
            let side = if comb == SmileCombination::PTildePlus {
                Side::Upper
            } else {
                Side::Lower
            };
            let chi = tilde_coeffs(ctx, side)?.c0;
            Ok(make(generic(chi)?, 2.0 / 3.0, RemainderClass::SmallOLambda))
        }
    }
}

/// Forward smile through first order at `(k, tau)`.
pub fn forward_smile_asymptotic(ctx: &ForwardContext, k: f64, tau: f64) -> Result<SmilePoint> {
    if !(tau > 0.0) {
        return Err(Error::Domain("tau must be positive"));
    }
    let first = v1_infinity(ctx, k)?;
    Ok(SmilePoint {
        k,
        tau,
        v0: v0_infinity(ctx, k),
        v1: first.v1,
        lambda: first.lambda,
        remainder: first.remainder,
    })
}

/// Extended SVI parameter set: the limiting squared smile is
///
/// ```text
/// sigma^2(k) = a + b (r (k - m) + i0 sqrt(i1 (k-m)^2 + i2 (k-m) + i0 s^2)).
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SviParams {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub m: f64,
    pub s: f64,
    pub i0: f64,
    pub i1: f64,
    pub i2: f64,
}

/// Which SVI parameter family covers the strike region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SviRegion {
    S0,
    SPlus,
    SMinus,
    S1,
}

impl core::fmt::Display for SviRegion {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            SviRegion::S0 => "S0",
            SviRegion::SPlus => "S+",
            SviRegion::SMinus => "S-",
            SviRegion::S1 => "S1",
        };
        f.write_str(s)
    }
}

/// Evaluates the extended SVI formula.
pub fn svi_total_variance(k: f64, p: &SviParams) -> f64 {
    let km = k - p.m;
    p.a + p.b * (p.r * km + p.i0 * (p.i1 * km * km + p.i2 * km + p.i0 * p.s * p.s).sqrt())
}

fn s0_params(ctx: &ForwardContext) -> SviParams {
    let p = ctx.params();
    let base = 2.0 * p.kappa - p.rho * p.xi;
    let one_m_rho2 = 1.0 - p.rho * p.rho;
    let omega1 = 2.0 * ctx.mu() / one_m_rho2 * (ctx.eta() - base);
    let omega2 = p.xi / (p.kappa * p.theta);
    SviParams {
        a: 0.5 * omega1 * one_m_rho2,
        b: 0.5 * omega1 * omega2,
        r: p.rho,
        m: -p.rho / omega2,
        s: one_m_rho2.sqrt() / omega2,
        i0: 1.0,
        i1: 1.0,
        i2: 0.0,
    }
}

fn s_side_params(ctx: &ForwardContext, side: Side) -> Result<SviParams> {
    let us = match side {
        Side::Upper => ctx.u_star_plus(),
        Side::Lower => ctx.u_star_minus(),
    };
    let us = match us {
        Some(u) if u.is_finite() => u,
        _ => {
            return Err(Error::Domain(
                "saturated SVI region needs a finite critical moment",
            ))
        }
    };
    let p = ctx.params();
    let a = p.kappa * p.theta / (2.0 * (us - 1.0) * us * ctx.beta_t());
    let b = 4.0 * ((us - 1.0) * us).sqrt();
    Ok(SviParams {
        a,
        b,
        r: 2.0 * (2.0 * us - 1.0) / b,
        m: (us - 0.5) * a,
        s: 0.5 * a,
        i0: -1.0,
        i1: 1.0,
        i2: 0.0,
    })
}

fn s1_params(ctx: &ForwardContext) -> SviParams {
    let p = ctx.params();
    let m = ctx.mu() * (p.kappa - p.rho * p.xi);
    SviParams {
        a: -2.0 * m,
        b: 4.0 * (-m).sqrt(),
        r: 0.5 / (-m).sqrt(),
        m,
        s: 0.0,
        i0: 1.0,
        i1: 0.0,
        i2: 1.0,
    }
}

/// SVI parameters of the region containing `k`, per regime.
pub fn svi_limit_params(ctx: &ForwardContext, k: f64) -> Result<(SviRegion, SviParams)> {
    let tol = TRANSITION_STRIKE_TOL;
    let region = match ctx.regime() {
        Regime::R1 => SviRegion::S0,
        Regime::R2 => {
            let kc = ctx
                .strike_at_upper_critical()
                .ok_or(Error::Domain("upper critical strike missing in R2"))?;
            if k < kc {
                SviRegion::S0
            } else {
                SviRegion::SPlus
            }
        }
        Regime::R3a => {
            let kc = ctx
                .strike_at_lower_critical()
                .ok_or(Error::Domain("lower critical strike missing in R3"))?;
            if k <= kc {
                SviRegion::SMinus
            } else {
                SviRegion::S0
            }
        }
        Regime::R3b => {
            let kc = ctx
                .strike_at_lower_critical()
                .ok_or(Error::Domain("lower critical strike missing in R3"))?;
            if k <= kc {
                SviRegion::SMinus
            } else if k < ctx.strike_at_one() {
                SviRegion::S0
            } else {
                SviRegion::S1
            }
        }
        Regime::R4 => {
            if k < ctx.strike_at_one() {
                SviRegion::S0
            } else {
                SviRegion::S1
            }
        }
    };
    if region == SviRegion::S0 {
        for a in [Endpoint::Zero, Endpoint::One] {
            if ctx.matches_endpoint_strike(k, a, tol) && ctx.is_degenerate(a) {
                return Err(Error::Degenerate(
                    "SVI limit excluded at V'(a) when v = theta Upsilon(a)",
                ));
            }
        }
    }
    let params = match region {
        SviRegion::S0 => s0_params(ctx),
        SviRegion::SPlus => s_side_params(ctx, Side::Upper)?,
        SviRegion::SMinus => s_side_params(ctx, Side::Lower)?,
        SviRegion::S1 => s1_params(ctx),
    };
    Ok((region, params))
}
