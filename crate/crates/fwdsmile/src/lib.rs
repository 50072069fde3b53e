//! Large-maturity asymptotics of the Heston forward volatility smile.
//!
//! The crate models forward-start call options on the return
//! `exp(X_{t+tau} - X_t)` under the Heston stochastic-volatility model and
//! provides, for each correlation regime:
//!
//! - the limiting cumulant function `V`, its finite-maturity correction `H`,
//!   the saddlepoint `u*(k)` and the decay rate function `V*(k)`
//!   ([`ForwardContext`]),
//! - asymptotic forward-start call prices assembled from per-regime
//!   prefactor/exponent combinations ([`price`]),
//! - zeroth- and first-order forward implied-variance expansions together
//!   with their exact extended-SVI limits ([`smile`]),
//! - an exact reference engine: the finite-maturity forward cumulant
//!   generating function, a damped Fourier pricer, Black-Scholes pricing
//!   with implied-volatility inversion, and a numeric finite-maturity
//!   saddlepoint solver ([`pricer`]).
//!
//! Everything is pure scalar math on `f64`/`Complex64`; the crate is
//! `no_std`-compatible (`alloc` is used by the adaptive quadrature).
//! File formats, CSV reports and the command-line front end live in the
//! companion `fwdsmile-cli` crate.
//!
//! ```
//! use fwdsmile::{ForwardContext, HestonParams, Regime};
//!
//! let params = HestonParams::new(0.07, 0.07, 1.5, 0.65, -0.8)?;
//! let ctx = ForwardContext::build(params, 1.0)?;
//! assert_eq!(ctx.regime(), Regime::R2);
//!
//! // Zeroth- and first-order forward smile at k = 0.05, tau = 5.
//! let point = fwdsmile::smile::forward_smile_asymptotic(&ctx, 0.05, 5.0)?;
//! assert!(point.sigma_squared() > 0.0);
//!
//! // Exact forward-start call price for the same cell.
//! let cfg = fwdsmile::pricer::PricingConfig::default();
//! let price = fwdsmile::pricer::forward_call_fourier(&ctx, 0.05, 5.0, &cfg)?;
//! assert!(price > 0.0 && price < 1.0);
//! # Ok::<(), fwdsmile::Error>(())
//! ```

#![cfg_attr(not(test), no_std)]
// Guards written as `!(x > 0.0)` are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod context;
mod error;
mod limit;
mod params;
mod quad;
mod roots;
mod special;

pub mod price;
pub mod pricer;
pub mod smile;

pub use context::{DomainInterval, Endpoint, ForwardContext, Regime};
pub use error::{Error, Result};
pub use limit::VDerivs;
pub use params::HestonParams;

/// Absolute tolerance used to match a strike against a transition strike
/// (`V'(0)`, `V'(1)`, `V'(u*+-)`). Callers wanting the boundary combination
/// must land on the transition strike to within this tolerance.
pub const TRANSITION_STRIKE_TOL: f64 = 1e-12;

/// Relative tolerance for the degeneracy test `v = theta * Upsilon(a)`.
pub const DEGENERACY_REL_TOL: f64 = 1e-12;
