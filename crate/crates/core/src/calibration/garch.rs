//! Level AR(1) with GARCH(1,1) innovations, fitted after jump removal.

use serde::{Deserialize, Serialize};

use super::optim::{minimize, Lbfgs};
use super::{ar_wls, detect_and_fit_jumps, FitReport};
use crate::error::{Error, Result};
use crate::market_data::PriceSeries;
use crate::models::{GarchJumpParams, ModelSpec};
use crate::numeric;

const MAX_PERSISTENCE: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GarchFitOptions {
    pub jump_threshold: f64,
    /// Keep `alpha1 = beta1 = 0` unless the two GARCH terms lower the BIC.
    pub bic_gate: bool,
}

impl Default for GarchFitOptions {
    fn default() -> Self {
        Self {
            jump_threshold: 4.0,
            bic_gate: true,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, Copy)]
struct Raw {
    mu: f64,
    rho: f64,
    omega: f64,
    alpha: f64,
    beta: f64,
}

impl Raw {
    fn from_x(x: &[f64]) -> Self {
        let persist = MAX_PERSISTENCE * sigmoid(x[3]);
        let split = sigmoid(x[4]);
        Self {
            mu: x[0],
            rho: x[1].tanh(),
            omega: x[2].exp(),
            alpha: persist * split,
            beta: persist * (1.0 - split),
        }
    }

    fn to_x(self) -> Vec<f64> {
        let persist = (self.alpha + self.beta) / MAX_PERSISTENCE;
        vec![
            self.mu,
            self.rho.atanh(),
            self.omega.ln(),
            logit(persist),
            logit(self.alpha / (self.alpha + self.beta)),
        ]
    }
}

/// Gaussian log-likelihood of `z_1..z_{n-1}` given `z_0`; the variance
/// recursion starts at its unconditional level.
fn loglik(z: &[f64], p: Raw) -> f64 {
    let hbar = p.omega / (1.0 - p.alpha - p.beta);
    let (mut h, mut e2) = (hbar, hbar);
    let mut acc = 0.0;
    for t in 1..z.len() {
        h = p.omega + p.alpha * e2 + p.beta * h;
        let e = z[t] - p.mu - p.rho * (z[t - 1] - p.mu);
        acc += h.ln() + e * e / h;
        e2 = e * e;
    }
    -0.5 * (acc + (z.len() - 1) as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Removes jumps, then fits `(mu, rho, omega, alpha1, beta1)` by
/// quasi-Newton maximum likelihood with stationarity built into the
/// parameterisation.
pub fn fit_garch_jump(s: &PriceSeries, opts: GarchFitOptions) -> Result<(GarchJumpParams, FitReport)> {
    if s.len() < 500 {
        return Err(Error::TooFewPoints {
            needed: 500,
            have: s.len(),
        });
    }
    let jf = detect_and_fit_jumps(s, opts.jump_threshold)?;
    let x = jf.cleaned.values();
    let (m, var) = numeric::mean_var(x);
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let sd = var.sqrt();
    let z: Vec<f64> = x.iter().map(|v| (v - m) / sd).collect();
    let n = (z.len() - 1) as f64;

    let ar = ar_wls(&z, 1, 1, None)?;
    let rho0 = ar.phi[0].clamp(-0.99, 0.99);
    let mu0 = if rho0 < 0.99 { ar.mu / (1.0 - rho0) } else { 0.0 };
    let restricted = Raw {
        mu: mu0,
        rho: ar.phi[0],
        omega: ar.sigma2,
        alpha: 0.0,
        beta: 0.0,
    };
    let ll0 = loglik(&z, restricted);

    let objective = |x: &[f64]| -loglik(&z, Raw::from_x(x)) / n;
    let mut best: Option<(f64, Raw, Vec<f64>, usize, bool)> = None;
    for (a, b) in [(0.05, 0.90), (0.10, 0.80), (0.20, 0.50), (0.02, 0.20)] {
        let start = Raw {
            mu: mu0,
            rho: rho0,
            omega: ar.sigma2 * (1.0 - a - b),
            alpha: a,
            beta: b,
        };
        let Ok(min) = minimize(objective, start.to_x(), Lbfgs::default()) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| min.f < b.0) {
            let trace = min.trace.iter().map(|f| -f * n).collect();
            best = Some((min.f, Raw::from_x(&min.x), trace, min.iterations, min.converged));
        }
    }
    let (f, mut raw, trace, iterations, converged) = best.ok_or_else(|| Error::OptimizerDiverged("no GARCH start converged".into()))?;
    let mut ll = -f * n;
    let lr = 2.0 * (ll - ll0);
    let garch_terms = !opts.bic_gate || lr > 2.0 * n.ln();
    if !garch_terms {
        raw = restricted;
        ll = ll0;
    }
    if !(raw.rho.abs() < 1.0) {
        return Err(Error::NonStationarySeries(raw.rho));
    }

    let params = GarchJumpParams {
        mu: m + sd * raw.mu,
        rho: raw.rho,
        omega: raw.omega * var,
        alpha1: raw.alpha,
        beta1: raw.beta,
        jumps: jf.params,
    };
    params.validate()?;
    let loglik_levels = ll - n * sd.ln();
    let mut report = FitReport::new(
        Some(ModelSpec::GarchJump { garch: params }),
        loglik_levels,
        8,
        n as usize,
    )
    .with("lr_statistic", lr)
    .with("garch_terms", if garch_terms { 1.0 } else { 0.0 })
    .with("persistence", params.alpha1 + params.beta1)
    .with("optimizer_iterations", iterations as f64)
    .with("optimizer_converged", if converged { 1.0 } else { 0.0 })
    .with("jumps_flagged", jf.flagged.len() as f64);
    if garch_terms {
        report.loglik_trace = trace;
    }
    Ok((params, report))
}
