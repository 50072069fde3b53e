use core::fmt;

use crate::error::{Error, Result};
use crate::params::HestonParams;
use crate::DEGENERACY_REL_TOL;

/// Large-maturity correlation regime of the forward log-return.
///
/// The regime is decided by the correlation relative to `rho_-`, `rho_+`
/// (both functions of `kappa`, `xi` and the forward date `t`) and to
/// `kappa/xi`:
///
/// - `R1` good correlation: `rho_- <= rho <= min(rho_+, kappa/xi)`;
/// - `R2` asymmetric negative correlation: `rho < rho_-`, `t > 0`;
/// - `R3a`/`R3b` asymmetric positive correlation: `rho_+ < rho < 1`, `t > 0`,
///   split at `kappa/xi`;
/// - `R4` large correlation: `kappa/xi < rho <= min(rho_+, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    R1,
    R2,
    R3a,
    R3b,
    R4,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::R1 => "R1",
            Regime::R2 => "R2",
            Regime::R3a => "R3a",
            Regime::R3b => "R3b",
            Regime::R4 => "R4",
        };
        f.write_str(s)
    }
}

/// A real interval with per-endpoint open/closed flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl DomainInterval {
    pub fn contains(&self, u: f64) -> bool {
        let above = if self.lo_closed {
            u >= self.lo
        } else {
            u > self.lo
        };
        let below = if self.hi_closed {
            u <= self.hi
        } else {
            u < self.hi
        };
        above && below
    }

    /// True strictly inside the interval.
    pub fn contains_interior(&self, u: f64) -> bool {
        u > self.lo && u < self.hi
    }
}

impl fmt::Display for DomainInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lo = if self.lo_closed { '[' } else { '(' };
        let hi = if self.hi_closed { ']' } else { ')' };
        write!(f, "{lo}{}, {}{hi}", self.lo, self.hi)
    }
}

/// The two distinguished arguments `u = 0` and `u = 1` of the limiting
/// cumulant function; the strikes `V'(0)` and `V'(1)` mark the kinks of the
/// intrinsic value and carry special expansion branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Zero,
    One,
}

impl Endpoint {
    pub fn as_f64(self) -> f64 {
        match self {
            Endpoint::Zero => 0.0,
            Endpoint::One => 1.0,
        }
    }
}

/// Heston parameters bound to a forward-start date, with every derived
/// regime constant precomputed.
///
/// Instances are immutable after [`ForwardContext::build`] and safe to share
/// across threads; all methods are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardContext {
    params: HestonParams,
    t: f64,
    mu: f64,
    beta_t: f64,
    exp_kt: f64,
    rho_minus: f64,
    rho_plus: f64,
    eta: f64,
    nu: Option<f64>,
    u_minus: f64,
    u_plus: f64,
    u_star_minus: Option<f64>,
    u_star_plus: Option<f64>,
    regime: Regime,
    d_infinity: DomainInterval,
}

impl ForwardContext {
    /// Classifies the regime and derives all constants for `(params, t)`.
    ///
    /// At `t = 0` the critical moments `u*+-` degenerate to `+-infinity`;
    /// they are stored with that convention. For correlations strictly
    /// between `rho_-` and `rho_+` (always the case at `t = 0`) the
    /// auxiliary square root `nu` has no real value and `u*+-` are absent.
    pub fn build(params: HestonParams, t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidParam {
                name: "t",
                value: t,
            });
        }
        let HestonParams {
            theta: _,
            kappa,
            xi,
            rho,
            ..
        } = params;
        let mu = params.mu();
        let exp_kt = (kappa * t).exp();
        let beta_t = xi * xi / (4.0 * kappa) * (1.0 - 1.0 / exp_kt);

        let root = (16.0 * kappa * kappa * exp_kt * exp_kt
            + xi * xi * (1.0 - exp_kt) * (1.0 - exp_kt))
            .sqrt();
        let scale = 1.0 / (8.0 * kappa * exp_kt * exp_kt);
        let rho_minus = scale * (xi * (exp_kt * exp_kt - 1.0) - (exp_kt + 1.0) * root);
        let rho_plus = scale * (xi * (exp_kt * exp_kt - 1.0) + (exp_kt + 1.0) * root);

        let eta = (xi * xi * (1.0 - rho * rho) + (2.0 * kappa - rho * xi).powi(2)).sqrt();
        let denom_u = 2.0 * xi * (1.0 - rho * rho);
        let u_minus = (xi - 2.0 * kappa * rho - eta) / denom_u;
        let u_plus = (xi - 2.0 * kappa * rho + eta) / denom_u;

        let (nu, u_star_minus, u_star_plus) = if t == 0.0 {
            (None, Some(f64::NEG_INFINITY), Some(f64::INFINITY))
        } else {
            let psi = xi * (exp_kt - 1.0) - 4.0 * kappa * rho * exp_kt;
            let nu_sq = psi * psi - 16.0 * kappa * kappa * exp_kt;
            if nu_sq >= 0.0 {
                let nu = nu_sq.sqrt();
                let denom = 2.0 * xi * (exp_kt - 1.0);
                (Some(nu), Some((psi - nu) / denom), Some((psi + nu) / denom))
            } else {
                (None, None, None)
            }
        };

        let cutoff = kappa / xi;
        let regime = if rho >= rho_minus && rho <= rho_plus.min(cutoff) {
            Regime::R1
        } else if t > 0.0 && rho < rho_minus {
            Regime::R2
        } else if t > 0.0 && rho > rho_plus && rho < 1.0 {
            if rho <= cutoff {
                Regime::R3a
            } else {
                Regime::R3b
            }
        } else if cutoff < rho && rho <= rho_plus.min(1.0) {
            Regime::R4
        } else {
            return Err(Error::Internal("regime classification not total"));
        };

        let d_infinity = match regime {
            Regime::R1 => DomainInterval {
                lo: u_minus,
                hi: u_plus,
                lo_closed: true,
                hi_closed: true,
            },
            Regime::R2 => DomainInterval {
                lo: u_minus,
                hi: u_star_plus.expect("u*+ finite in R2"),
                lo_closed: true,
                hi_closed: false,
            },
            Regime::R3a => DomainInterval {
                lo: u_star_minus.expect("u*- finite in R3"),
                hi: u_plus,
                lo_closed: false,
                hi_closed: true,
            },
            Regime::R3b => DomainInterval {
                lo: u_star_minus.expect("u*- finite in R3"),
                hi: 1.0,
                lo_closed: false,
                hi_closed: true,
            },
            Regime::R4 => DomainInterval {
                lo: u_minus,
                hi: 1.0,
                lo_closed: false,
                hi_closed: true,
            },
        };

        Ok(Self {
            params,
            t,
            mu,
            beta_t,
            exp_kt,
            rho_minus,
            rho_plus,
            eta,
            nu,
            u_minus,
            u_plus,
            u_star_minus,
            u_star_plus,
            regime,
            d_infinity,
        })
    }

    pub fn params(&self) -> &HestonParams {
        &self.params
    }

    /// Forward-start date.
    pub fn t(&self) -> f64 {
        self.t
    }

    /// `mu = 2 kappa theta / xi^2`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `beta_t = xi^2 (1 - e^{-kappa t}) / (4 kappa)`; zero at `t = 0`.
    pub fn beta_t(&self) -> f64 {
        self.beta_t
    }

    /// Cached `e^{kappa t}`.
    pub fn exp_kt(&self) -> f64 {
        self.exp_kt
    }

    /// Correlation thresholds `(rho_-, rho_+)`; equal to `(-1, 1)` iff `t = 0`.
    pub fn rho_bounds(&self) -> (f64, f64) {
        (self.rho_minus, self.rho_plus)
    }

    /// `eta = sqrt(xi^2 (1 - rho^2) + (2 kappa - rho xi)^2)`.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// The auxiliary root `nu`, real only for `rho` outside `(rho_-, rho_+)`
    /// with `t > 0`.
    pub fn nu(&self) -> Result<f64> {
        self.nu.ok_or(Error::Internal(
            "nu is undefined for rho strictly inside (rho_-, rho_+)",
        ))
    }

    /// Explosion bounds `(u_-, u_+)` of the limiting cumulant function:
    /// `u_- < 0` and `u_+ >= 1` with equality iff `rho = kappa/xi`.
    pub fn u_bounds(&self) -> (f64, f64) {
        (self.u_minus, self.u_plus)
    }

    /// Lower critical moment `u*-`; `-infinity` at `t = 0`, absent when `nu`
    /// is undefined.
    pub fn u_star_minus(&self) -> Option<f64> {
        self.u_star_minus
    }

    /// Upper critical moment `u*+`; `+infinity` at `t = 0`, absent when `nu`
    /// is undefined.
    pub fn u_star_plus(&self) -> Option<f64> {
        self.u_star_plus
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Limiting effective domain of the forward cumulant function.
    pub fn d_infinity(&self) -> DomainInterval {
        self.d_infinity
    }

    /// The strike `V'(0) = -theta/2`, left kink of the intrinsic value.
    pub fn strike_at_zero(&self) -> f64 {
        -0.5 * self.params.theta
    }

    /// The strike `V'(1)`, right kink of the intrinsic value;
    /// `+infinity` when `rho = kappa/xi` (where `u_+ = 1` and `V` is steep
    /// at the boundary).
    pub fn strike_at_one(&self) -> f64 {
        if self.u_plus > 1.0 {
            self.v_derivs(1.0).expect("1 interior when u_+ > 1").d1
        } else {
            f64::INFINITY
        }
    }

    /// The critical strike `V'(u*+)` (finite upper critical moment only).
    pub fn strike_at_upper_critical(&self) -> Option<f64> {
        let us = self.u_star_plus?;
        if us.is_finite() {
            Some(self.v_derivs(us).expect("u*+ interior").d1)
        } else {
            None
        }
    }

    /// The critical strike `V'(u*-)` (finite lower critical moment only).
    pub fn strike_at_lower_critical(&self) -> Option<f64> {
        let us = self.u_star_minus?;
        if us.is_finite() {
            Some(self.v_derivs(us).expect("u*- interior").d1)
        } else {
            None
        }
    }

    /// `Upsilon(a)` for `a` in `{0, 1}`: `Upsilon(0) = 1` and
    /// `Upsilon(1) = 1 + rho xi e^{kappa t} / (kappa - rho xi)`.
    ///
    /// Fails for `a = 1` when `kappa = rho xi` exactly.
    pub fn upsilon(&self, a: Endpoint) -> Result<f64> {
        match a {
            Endpoint::Zero => Ok(1.0),
            Endpoint::One => {
                let HestonParams { kappa, xi, rho, .. } = self.params;
                if kappa == rho * xi {
                    return Err(Error::Domain("Upsilon(1) undefined at kappa = rho xi"));
                }
                Ok(1.0 + rho * xi * self.exp_kt / (kappa - rho * xi))
            }
        }
    }

    /// True when `v = theta * Upsilon(a)` to within [`DEGENERACY_REL_TOL`];
    /// the expansion branch at the strike `V'(a)` is excluded in that case.
    pub fn is_degenerate(&self, a: Endpoint) -> bool {
        match self.upsilon(a) {
            Ok(upsilon) => {
                let target = self.params.theta * upsilon;
                (self.params.v - target).abs()
                    <= DEGENERACY_REL_TOL * self.params.v.abs().max(target.abs())
            }
            Err(_) => false,
        }
    }
}
