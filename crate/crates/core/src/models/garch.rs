use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normally distributed additive jumps arriving at rate `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JumpParams {
    /// Jumps per year.
    pub lambda: f64,
    /// Mean jump size, currency/MWh.
    pub mu_y: f64,
    /// Jump-size standard deviation, currency/MWh.
    pub sigma_y: f64,
}

impl JumpParams {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("jump intensity must be >= 0"));
        }
        if !(self.sigma_y.is_finite() && self.sigma_y >= 0.0) || !self.mu_y.is_finite() {
            return Err(Error::invalid("jump size parameters must be finite, sigma_y >= 0"));
        }
        Ok(())
    }
}

fn default_rho() -> f64 {
    0.9
}

/// Level AR(1) with GARCH(1,1) innovations and additive jumps:
///
/// ```text
/// S_t = mu + rho (S_{t-1} - mu) + e_t + J_t,   e_t ~ N(0, h_t)
/// h_t = omega + alpha1 e_{t-1}^2 + beta1 h_{t-1}
/// ```
///
/// The recursion runs once per simulation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchJumpParams {
    pub mu: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    pub omega: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub jumps: JumpParams,
}

impl GarchJumpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::invalid("omega must be > 0"));
        }
        if !(self.alpha1 >= 0.0 && self.beta1 >= 0.0) {
            return Err(Error::invalid("alpha1 and beta1 must be >= 0"));
        }
        if self.alpha1 + self.beta1 >= 1.0 {
            return Err(Error::StationarityViolated(self.alpha1 + self.beta1));
        }
        if !(self.rho.abs() < 1.0) || !self.mu.is_finite() {
            return Err(Error::invalid("rho must lie in (-1, 1)"));
        }
        self.jumps.validate()
    }

    /// Unconditional innovation variance `omega / (1 - alpha1 - beta1)`.
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha1 - self.beta1)
    }
}
