//! Parameter estimation for every model family.

mod garch;
mod kmeans;
mod msar;
pub(crate) mod optim;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market_data::PriceSeries;
use crate::models::{ar1_to_ou, JumpParams, ModelSpec, OUParams};
use crate::numeric::{self, norm_cdf};

pub use garch::{fit_garch_jump, GarchFitOptions};
pub use kmeans::{kmeans_regime_count, ElbowReport, KMeansOptions};
pub use msar::{fit_msar, fit_regime_ou, hamilton_filter, simulate_msar, FilterState, MsArFitOptions};

/// Outcome of one maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub model: Option<ModelSpec>,
    pub loglik: f64,
    pub n_params: usize,
    pub n_obs: usize,
    /// `n_params * ln(n_obs) - 2 * loglik`.
    pub bic: f64,
    pub diagnostics: BTreeMap<String, f64>,
    /// Objective after each accepted optimizer step, when one was used.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub loglik_trace: Vec<f64>,
}

impl FitReport {
    pub fn new(model: Option<ModelSpec>, loglik: f64, n_params: usize, n_obs: usize) -> Self {
        Self {
            model,
            loglik,
            n_params,
            n_obs,
            bic: bic(loglik, n_params, n_obs),
            diagnostics: BTreeMap::new(),
            loglik_trace: Vec::new(),
        }
    }

    pub(crate) fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

pub fn bic(loglik: f64, n_params: usize, n_obs: usize) -> f64 {
    n_params as f64 * (n_obs as f64).ln() - 2.0 * loglik
}

/// Least-squares AR(p) fit.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ArFit {
    pub mu: f64,
    pub phi: Vec<f64>,
    /// Maximum-likelihood innovation variance (RSS / n).
    pub sigma2: f64,
    /// Conditional Gaussian log-likelihood.
    pub loglik: f64,
    /// Effective number of observations (sum of weights).
    pub n: f64,
}

/// Weighted least squares of `x_t` on `(1, x_{t-1}, .., x_{t-p})` for
/// `t >= start`; `weights[t - start]` defaults to 1.
pub(crate) fn ar_wls(x: &[f64], p: usize, start: usize, weights: Option<&[f64]>) -> Result<ArFit> {
    let start = start.max(p);
    if x.len() <= start + p + 1 {
        return Err(Error::TooFewPoints {
            needed: start + p + 2,
            have: x.len(),
        });
    }
    let w = |t: usize| weights.map_or(1.0, |w| w[t - start]);
    let mut sw = 0.0;
    let mut mean = vec![0.0; p + 1];
    for t in start..x.len() {
        let wt = w(t);
        sw += wt;
        mean[0] += wt * x[t];
        for k in 1..=p {
            mean[k] += wt * x[t - k];
        }
    }
    if !(sw > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    mean.iter_mut().for_each(|m| *m /= sw);

    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for t in start..x.len() {
        let wt = w(t);
        if wt == 0.0 {
            continue;
        }
        let y = x[t] - mean[0];
        for a in 0..p {
            let xa = x[t - a - 1] - mean[a + 1];
            xty[a] += wt * xa * y;
            for b in 0..=a {
                xtx[a][b] += wt * xa * (x[t - b - 1] - mean[b + 1]);
            }
        }
    }
    for a in 0..p {
        for b in a + 1..p {
            xtx[a][b] = xtx[b][a];
        }
    }
    let phi = if p == 0 {
        Vec::new()
    } else {
        numeric::solve(&xtx, &xty).ok_or(Error::DegenerateVariance)?
    };
    let mu = mean[0] - (0..p).map(|k| phi[k] * mean[k + 1]).sum::<f64>();

    let mut rss = 0.0;
    for t in start..x.len() {
        let e = x[t] - mu - (0..p).map(|k| phi[k] * x[t - k - 1]).sum::<f64>();
        rss += w(t) * e * e;
    }
    let sigma2 = rss / sw;
    let loglik = -0.5 * sw * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    Ok(ArFit {
        mu,
        phi,
        sigma2,
        loglik,
        n: sw,
    })
}

fn ou_from_ar1(fit: &ArFit, dt: f64, scale: f64) -> Result<OUParams> {
    let phi = fit.phi[0];
    if phi >= 1.0 {
        return Err(Error::NonStationarySeries(phi));
    }
    if !(fit.sigma2 > 1e-14 * scale) {
        return Err(Error::DegenerateVariance);
    }
    ar1_to_ou(fit.mu, phi, fit.sigma2.sqrt(), dt)
}

/// Exact-transition OU maximum likelihood via the AR(1) sufficient
/// statistics; `kappa` and `sigma` are per year at the series resolution.
pub fn fit_ou_mle(s: &PriceSeries) -> Result<(OUParams, FitReport)> {
    if s.len() < 100 {
        return Err(Error::TooFewPoints {
            needed: 100,
            have: s.len(),
        });
    }
    let (_, var) = numeric::mean_var(s.values());
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let fit = ar_wls(s.values(), 1, 1, None)?;
    let ou = ou_from_ar1(&fit, s.dt_years(), var)?;
    let report = FitReport::new(Some(ModelSpec::Ou { ou }), fit.loglik, 3, fit.n as usize)
        .with("phi1", fit.phi[0])
        .with("sigma_prime", fit.sigma2.sqrt())
        .with("dt_years", s.dt_years())
        .with("half_life_hours", std::f64::consts::LN_2 / ou.kappa * numeric::HOURS_PER_YEAR);
    Ok((ou, report))
}

/// Flagged jumps and the series with the jump component removed.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpFit {
    pub params: JumpParams,
    pub cleaned: PriceSeries,
    /// Indices `t` whose increment `x_t - x_{t-1}` was flagged.
    pub flagged: Vec<usize>,
    /// MAD-scaled increment standard deviation.
    pub robust_sigma: f64,
    /// Jumps per year a Gaussian series would produce at this threshold.
    pub false_positive_lambda: f64,
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Flags increments beyond `threshold_sigmas` robust standard deviations.
///
/// The cleaned series subtracts a jump component that decays at the
/// series' AR(1) rate, so the level reverts the way an OU path would.
pub fn detect_and_fit_jumps(s: &PriceSeries, threshold_sigmas: f64) -> Result<JumpFit> {
    if !(threshold_sigmas >= 2.0) {
        return Err(Error::invalid("jump threshold must be >= 2 sigmas"));
    }
    let x = s.values();
    if x.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            have: x.len(),
        });
    }
    let d: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let med = median(&d);
    let abs_dev: Vec<f64> = d.iter().map(|v| (v - med).abs()).collect();
    let mut robust_sigma = 1.4826 * median(&abs_dev);
    if robust_sigma == 0.0 {
        robust_sigma = numeric::sample_sd(&d);
    }
    let cut = threshold_sigmas * robust_sigma;
    let flagged: Vec<usize> = (0..d.len())
        .filter(|&i| abs_dev[i] > cut)
        .map(|i| i + 1)
        .collect();

    let dt = s.dt_years();
    let horizon = d.len() as f64 * dt;
    let sizes: Vec<f64> = flagged.iter().map(|&t| d[t - 1] - med).collect();
    let params = if sizes.is_empty() {
        JumpParams::none()
    } else {
        JumpParams {
            lambda: sizes.len() as f64 / horizon,
            mu_y: numeric::mean(&sizes),
            sigma_y: if sizes.len() > 1 { numeric::sample_sd(&sizes) } else { 0.0 },
        }
    };

    let cleaned = if flagged.is_empty() {
        s.clone()
    } else {
        let phi = ar_wls(x, 1, 1, None).map(|f| f.phi[0].clamp(0.0, 1.0)).unwrap_or(1.0);
        let mut jump = 0.0;
        let mut next = flagged.iter().peekable();
        let values = x
            .iter()
            .enumerate()
            .map(|(t, v)| {
                jump *= phi;
                if next.peek() == Some(&&t) {
                    next.next();
                    jump += d[t - 1] - med;
                }
                v - jump
            })
            .collect();
        s.with_values(values)?
    };
    Ok(JumpFit {
        params,
        cleaned,
        flagged,
        robust_sigma,
        false_positive_lambda: 2.0 * (1.0 - norm_cdf(threshold_sigmas)) / dt,
    })
}

/// OU on the jump-cleaned series plus the detected jump law.
pub fn fit_ou_jump(s: &PriceSeries, threshold_sigmas: f64) -> Result<(ModelSpec, FitReport)> {
    let jf = detect_and_fit_jumps(s, threshold_sigmas)?;
    let (ou, base) = fit_ou_mle(&jf.cleaned)?;
    let model = ModelSpec::OuJump { ou, jumps: jf.params };
    let mut report = FitReport::new(Some(model.clone()), base.loglik, 6, base.n_obs)
        .with("jumps_flagged", jf.flagged.len() as f64)
        .with("robust_sigma", jf.robust_sigma)
        .with("false_positive_lambda", jf.false_positive_lambda)
        .with("threshold_sigmas", threshold_sigmas);
    report.diagnostics.extend(base.diagnostics);
    Ok((model, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagBic {
    pub p: usize,
    pub loglik: f64,
    pub bic: f64,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagScan {
    pub rows: Vec<LagBic>,
    pub best_p: usize,
}

/// Gaussian AR(p) fits for `p = 1..=p_max` on a common sample.
pub fn bic_lag_scan(s: &PriceSeries, p_max: usize) -> Result<LagScan> {
    if p_max < 1 {
        return Err(Error::invalid("p_max must be >= 1"));
    }
    let x = s.values();
    let mut rows = Vec::with_capacity(p_max);
    for p in 1..=p_max {
        let fit = ar_wls(x, p, p_max, None)?;
        rows.push(LagBic {
            p,
            loglik: fit.loglik,
            bic: bic(fit.loglik, p + 2, fit.n as usize),
            phi: fit.phi,
        });
    }
    let best_p = rows
        .iter()
        .min_by(|a, b| a.bic.total_cmp(&b.bic))
        .map(|r| r.p)
        .unwrap();
    Ok(LagScan { rows, best_p })
}

#[cfg(test)]
pub(crate) mod testdata {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use crate::models::{ou_step_exact, OUParams};

    pub fn ou_path(p: &OUParams, s0: f64, dt: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = s0;
        (0..n)
            .map(|_| {
                let out = s;
                let z: f64 = StandardNormal.sample(&mut rng);
                s = ou_step_exact(p, s, dt, z);
                out
            })
            .collect()
    }

    pub fn ar_path(mu: f64, phi: &[f64], sd: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![mu / (1.0 - phi.iter().sum::<f64>()); phi.len()];
        for _ in 0..n + 500 {
            let z: f64 = StandardNormal.sample(&mut rng);
            let t = x.len();
            let v = mu + phi.iter().enumerate().map(|(k, f)| f * x[t - k - 1]).sum::<f64>() + sd * z;
            x.push(v);
        }
        x.split_off(x.len() - n)
    }
}

#[cfg(test)]
mod tests {
    use super::testdata::*;
    use super::*;

    const HOUR: f64 = 1.0 / 8760.0;

    #[test]
    fn ou_recovery_five_years_hourly() {
        let p = OUParams::new(2.0, 100.0, 40.0).unwrap();
        let x = ou_path(&p, 100.0, HOUR, 5 * 8760, 11);
        let (fit, report) = fit_ou_mle(&PriceSeries::hourly(x).unwrap()).unwrap();
        // at H = 5y: sd(kappa) ~ sqrt(2 kappa / H) = 0.89, sd(theta) ~ sigma / (kappa sqrt H) = 8.9
        assert!((fit.sigma / 40.0 - 1.0).abs() < 0.05, "{fit:?}");
        assert!((fit.kappa - 2.0).abs() < 3.0 * 0.89, "{fit:?}");
        assert!((fit.theta - 100.0).abs() < 3.0 * 8.9, "{fit:?}");
        assert!((report.bic - (3.0 * (report.n_obs as f64).ln() - 2.0 * report.loglik)).abs() < 1e-9);
    }

    #[test]
    fn ou_recovery_fast_reversion() {
        let p = OUParams::new(300.0, 50.0, 500.0).unwrap();
        let x = ou_path(&p, 50.0, HOUR, 100_000, 5);
        let (fit, _) = fit_ou_mle(&PriceSeries::hourly(x.clone()).unwrap()).unwrap();
        for (a, b) in [(fit.kappa, 300.0), (fit.theta, 50.0), (fit.sigma, 500.0)] {
            assert!((a / b - 1.0).abs() < 0.05, "{fit:?}");
        }
        let (m, v) = numeric::mean_var(&x);
        let phi = (-300.0 * HOUR).exp();
        let se = (v / x.len() as f64 * (1.0 + phi) / (1.0 - phi)).sqrt();
        assert!((fit.theta - m).abs() < 2.0 * se);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let s = PriceSeries::hourly(vec![42.0; 200]).unwrap();
        assert!(matches!(fit_ou_mle(&s), Err(Error::DegenerateVariance)));
    }

    #[test]
    fn random_walk_is_non_stationary() {
        let mut x = vec![0.0];
        for i in 1..1000 {
            x.push(x[i - 1] + if (i * 7919) % 13 < 6 { 1.0 } else { -0.9 } + 0.01 * i as f64);
        }
        let s = PriceSeries::hourly(x).unwrap();
        assert!(matches!(fit_ou_mle(&s), Err(Error::NonStationarySeries(_)) | Err(Error::PhiOutOfRange(_))));
    }

    #[test]
    fn short_series_rejected() {
        let s = PriceSeries::hourly((0..50).map(|i| i as f64).collect()).unwrap();
        assert!(matches!(fit_ou_mle(&s), Err(Error::TooFewPoints { .. })));
    }

    fn plant_jumps(x: &mut [f64], every: usize, size: f64, phi: f64) {
        let mut j = 0.0;
        for (t, v) in x.iter_mut().enumerate() {
            j *= phi;
            if t > 0 && t % every == 0 {
                j += size;
            }
            *v += j;
        }
    }

    #[test]
    fn planted_jumps_recovered() {
        let p = OUParams::new(2.0, 100.0, 40.0).unwrap();
        let years = 5;
        let mut x = ou_path(&p, 100.0, HOUR, years * 8760, 3);
        // 20 jumps a year of size 200
        plant_jumps(&mut x, 438, 200.0, (-2.0 * HOUR).exp());
        let jf = detect_and_fit_jumps(&PriceSeries::hourly(x).unwrap(), 4.0).unwrap();
        assert!((jf.params.lambda / 20.0 - 1.0).abs() < 0.25, "{:?}", jf.params);
        assert!((jf.params.mu_y / 200.0 - 1.0).abs() < 0.15, "{:?}", jf.params);
    }

    #[test]
    fn pure_ou_false_positives_near_gaussian_rate() {
        let p = OUParams::new(2.0, 100.0, 40.0).unwrap();
        let x = ou_path(&p, 100.0, HOUR, 10 * 8760, 9);
        let jf = detect_and_fit_jumps(&PriceSeries::hourly(x).unwrap(), 4.0).unwrap();
        // 2 (1 - Phi(4)) * 8760 = 0.555 per year
        assert!((jf.false_positive_lambda - 0.5549).abs() < 1e-3);
        assert!(jf.params.lambda < 3.0, "{}", jf.params.lambda);
    }

    #[test]
    fn infinite_threshold_is_a_no_op() {
        let p = OUParams::new(2.0, 100.0, 40.0).unwrap();
        let mut x = ou_path(&p, 100.0, HOUR, 2000, 1);
        plant_jumps(&mut x, 300, 500.0, 0.99);
        let s = PriceSeries::hourly(x).unwrap();
        let jf = detect_and_fit_jumps(&s, f64::INFINITY).unwrap();
        assert_eq!(jf.params.lambda, 0.0);
        assert_eq!(jf.cleaned, s);
        assert!(detect_and_fit_jumps(&s, 1.5).is_err());
    }

    #[test]
    fn bic_picks_second_order() {
        let x = ar_path(5.0, &[1.2, -0.4], 1.0, 20_000, 4);
        let scan = bic_lag_scan(&PriceSeries::hourly(x).unwrap(), 5).unwrap();
        assert_eq!(scan.best_p, 2);
        assert!(scan.rows[0].bic - scan.rows[1].bic > 100.0);
    }

    #[test]
    fn bic_white_noise_reports_first_order() {
        let x = ar_path(3.0, &[0.0], 1.0, 5_000, 8);
        let scan = bic_lag_scan(&PriceSeries::hourly(x).unwrap(), 4).unwrap();
        assert_eq!(scan.best_p, 1);
        assert!(scan.rows[0].phi[0].abs() < 0.05);
    }

    #[test]
    fn weighted_least_squares_matches_subset() {
        let x = ar_path(1.0, &[0.5], 1.0, 400, 2);
        let w: Vec<f64> = (1..x.len()).map(|t| if t % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let a = ar_wls(&x, 1, 1, Some(&w)).unwrap();
        assert!((a.n - w.iter().sum::<f64>()).abs() < 1e-12);
        assert!((a.phi[0] - 0.5).abs() < 0.2);
    }
}
