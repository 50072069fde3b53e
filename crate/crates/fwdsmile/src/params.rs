use crate::error::{Error, Result};

/// Heston model parameters.
///
/// The log-price and its instantaneous variance follow
///
/// ```text
/// dX = -V/2 dt + sqrt(V) dW,        X_0 = 0,
/// dV = kappa (theta - V) dt + xi sqrt(V) dZ,   V_0 = v,
/// d<W,Z> = rho dt.
/// ```
///
/// The Feller condition `2 kappa theta >= xi^2` is *not* required anywhere
/// in this crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    /// Initial variance `v > 0`.
    pub v: f64,
    /// Long-run variance level `theta > 0`.
    pub theta: f64,
    /// Mean-reversion speed `kappa > 0`.
    pub kappa: f64,
    /// Volatility of variance `xi > 0`.
    pub xi: f64,
    /// Spot/variance correlation, `|rho| < 1`.
    pub rho: f64,
}

impl HestonParams {
    pub fn new(v: f64, theta: f64, kappa: f64, xi: f64, rho: f64) -> Result<Self> {
        let check = |name: &'static str, value: f64, ok: bool| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParam { name, value })
            }
        };
        check("v", v, v > 0.0)?;
        check("theta", theta, theta > 0.0)?;
        check("kappa", kappa, kappa > 0.0)?;
        check("xi", xi, xi > 0.0)?;
        check("rho", rho, rho.abs() < 1.0)?;
        Ok(Self {
            v,
            theta,
            kappa,
            xi,
            rho,
        })
    }

    /// `mu = 2 kappa theta / xi^2`; finite and positive for valid parameters.
    pub fn mu(&self) -> f64 {
        2.0 * self.kappa * self.theta / (self.xi * self.xi)
    }
}
