use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `dS = kappa (theta - S) dt + sigma dW`, time in years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OUParams {
    /// Mean-reversion speed, 1/year.
    pub kappa: f64,
    /// Long-run mean, currency/MWh.
    pub theta: f64,
    /// Diffusion volatility, currency/MWh per sqrt(year).
    pub sigma: f64,
}

impl OUParams {
    pub fn new(kappa: f64, theta: f64, sigma: f64) -> Result<Self> {
        let p = Self { kappa, theta, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::invalid(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !self.theta.is_finite() {
            return Err(Error::invalid("theta must be finite"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Variance of the stationary law, `sigma^2 / (2 kappa)`.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.kappa)
    }
}

/// Exact Gaussian transition moments after time `t` starting from `s0`.
pub fn ou_mean_var(p: &OUParams, s0: f64, t: f64) -> (f64, f64) {
    let decay = (-p.kappa * t).exp();
    let mean = s0 * decay + p.theta * (1.0 - decay);
    let var = p.sigma * p.sigma * -(-2.0 * p.kappa * t).exp_m1() / (2.0 * p.kappa);
    (mean, var)
}

/// One exact transition of size `dt` driven by a standard normal draw.
pub fn ou_step_exact(p: &OUParams, s: f64, dt: f64, noise: f64) -> f64 {
    OuStep::new(p, dt).apply(s, noise)
}

/// Precomputed coefficients of the exact transition for a fixed `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct OuStep {
    decay: f64,
    level: f64,
    sd: f64,
}

impl OuStep {
    pub(crate) fn new(p: &OUParams, dt: f64) -> Self {
        let (level, var) = ou_mean_var(p, 0.0, dt);
        Self {
            decay: (-p.kappa * dt).exp(),
            level,
            sd: var.sqrt(),
        }
    }

    #[inline]
    pub(crate) fn apply(&self, s: f64, z: f64) -> f64 {
        s * self.decay + self.level + self.sd * z
    }
}

/// Map a fitted AR(1) `S_t = mu + phi1 S_{t-1} + e_t`, `sd(e) = sigma_prime`,
/// sampled every `dt` years, onto the OU process with the same transition law.
pub fn ar1_to_ou(mu: f64, phi1: f64, sigma_prime: f64, dt: f64) -> Result<OUParams> {
    if !(phi1 > 0.0 && phi1 < 1.0) {
        return Err(Error::PhiOutOfRange(phi1));
    }
    if !(dt > 0.0) || !(sigma_prime >= 0.0) {
        return Err(Error::invalid("dt must be > 0 and sigma' >= 0"));
    }
    let ln_phi = phi1.ln();
    let kappa = -ln_phi / dt;
    let theta = mu / (1.0 - phi1);
    let sigma = sigma_prime / dt.sqrt() * (2.0 * ln_phi / (phi1 * phi1 - 1.0)).sqrt();
    OUParams::new(kappa, theta, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_at_zero_and_infinity() {
        let p = OUParams::new(2.0, 100.0, 40.0).unwrap();
        assert_eq!(ou_mean_var(&p, 60.0, 0.0), (60.0, 0.0));
        let (m, v) = ou_mean_var(&p, 60.0, 1e6);
        assert!((m - 100.0).abs() / 100.0 < 1e-9);
        assert!((v - 400.0).abs() / 400.0 < 1e-9);
    }

    #[test]
    fn moments_reference_case() {
        // 60 e^-1 + 100 (1 - e^-1); 1600 (1 - e^-2) / 4
        let p = OUParams::new(2.0, 100.0, 40.0).unwrap();
        let (m, v) = ou_mean_var(&p, 60.0, 0.5);
        assert!((m - 85.284_822_353_142_3).abs() < 1e-10);
        assert!((v - 345.865_886_705_354_9).abs() < 1e-9);
    }

    #[test]
    fn exact_step_cases() {
        let p = OUParams::new(3.0, 100.0, 0.0).unwrap();
        assert_eq!(ou_step_exact(&p, 100.0, 0.01, 1.7), 100.0);
        let dt = 2f64.ln() / 3.0;
        assert!((ou_step_exact(&p, 0.0, dt, 0.0) - 50.0).abs() < 1e-12);
        let q = OUParams::new(2.0, 100.0, 40.0).unwrap();
        assert_eq!(ou_step_exact(&q, 60.0, 0.5, 0.0), ou_mean_var(&q, 60.0, 0.5).0);
    }

    #[test]
    fn composed_steps_telescope() {
        // n exact steps of dt reproduce the moments at n*dt
        let p = OUParams::new(2.0, 100.0, 40.0).unwrap();
        let (dt, n) = (1.0 / 8760.0, 8760);
        let step = OuStep::new(&p, dt);
        let (mut mean, mut var) = (60.0, 0.0);
        for _ in 0..n {
            mean = step.apply(mean, 0.0);
            var = var * step.decay * step.decay + step.sd * step.sd;
        }
        let (m, v) = ou_mean_var(&p, 60.0, n as f64 * dt);
        assert!((mean - m).abs() < 1e-10);
        assert!((var - v).abs() < 1e-10);
    }

    #[test]
    fn ar1_mapping() {
        let target = 42.0;
        let phi = (-1f64).exp();
        let p = ar1_to_ou(target * (1.0 - phi), phi, 1.0, 1.0).unwrap();
        assert!((p.kappa - 1.0).abs() < 1e-14);
        assert!((p.theta - target).abs() < 1e-12);

        let p = ar1_to_ou(4.189, 0.9, 10.0, 1.0).unwrap();
        assert!((p.kappa - 0.105_360_515_657_826_3).abs() < 1e-12);
        assert!((p.theta - 41.89).abs() < 1e-9);
        // sqrt(2 * 0.1053605 / 0.19) * 10
        assert!((p.sigma - 10.531_182_552_572_46).abs() < 1e-9);

        assert!(matches!(ar1_to_ou(0.0, 1.0, 1.0, 1.0), Err(Error::PhiOutOfRange(_))));
        assert!(matches!(ar1_to_ou(0.0, -0.2, 1.0, 1.0), Err(Error::PhiOutOfRange(_))));
    }

    #[test]
    fn ar1_mapping_inverts_exact_discretization() {
        let p = OUParams::new(264.94, 41.89, 531.05).unwrap();
        let dt = 1.0 / 8760.0;
        let step = OuStep::new(&p, dt);
        let back = ar1_to_ou(step.level, step.decay, step.sd, dt).unwrap();
        assert!((back.kappa - p.kappa).abs() / p.kappa < 1e-10);
        assert!((back.theta - p.theta).abs() / p.theta < 1e-10);
        assert!((back.sigma - p.sigma).abs() / p.sigma < 1e-10);
    }
}
