//! Reliability-option premium as a discounted strip of European calls.
//!
//! Time is in years. The premium is reported per MW: each delivery step of
//! length `dt` years contributes `e^{-r u} (S_u - K)^+ * (dt * 8760)` with the
//! payoff in currency/MWh and the step expressed in hours.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ou_mean_var, ModelSpec, OUParams, SimState, Stepper};
use crate::models::path_rng;
use crate::numeric::{self, norm_cdf, norm_pdf, HOURS_PER_YEAR};

fn default_dt() -> f64 {
    1.0 / HOURS_PER_YEAR
}

fn default_q() -> f64 {
    1.0
}

/// Contract parameters of the option strip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractTerms {
    /// Preparation horizon before delivery starts, years.
    #[serde(rename = "T")]
    pub t: f64,
    /// Delivery period, years.
    pub tau: f64,
    /// Delivery sampling step, years.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Strike, currency/MWh.
    #[serde(rename = "K")]
    pub k: f64,
    /// Optional per-step strike schedule over the delivery grid; overrides `K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_schedule: Option<Vec<f64>>,
    /// Continuously compounded risk-free rate, per year.
    pub r: f64,
    /// Contracted capacity, MW.
    #[serde(rename = "Q", default = "default_q")]
    pub q: f64,
    /// Steps over `[0, T]`; defaults to `T / dt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_steps: Option<usize>,
}

impl ContractTerms {
    pub fn new(t: f64, tau: f64, dt: f64, k: f64, r: f64) -> Result<Self> {
        let terms = Self {
            t,
            tau,
            dt,
            k,
            k_schedule: None,
            r,
            q: 1.0,
            pre_steps: None,
        };
        terms.validate()?;
        Ok(terms)
    }

    pub fn with_strike(&self, k: f64) -> Self {
        Self {
            k,
            k_schedule: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m.to_string()));
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return bad("T must be >= 0");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be > 0");
        }
        if !(self.dt > 0.0 && self.dt <= self.tau) {
            return bad("dt must be > 0 and no longer than tau");
        }
        if !self.k.is_finite() {
            return bad("K must be finite");
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return bad("r must be >= 0");
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return bad("Q must be > 0");
        }
        if let Some(s) = &self.k_schedule {
            if s.len() != self.delivery_steps() + 1 || s.iter().any(|k| !k.is_finite()) {
                return bad("K schedule must hold one finite strike per delivery point");
            }
        }
        if self.pre_steps == Some(0) && self.t > 0.0 {
            return bad("pre_steps must be positive when T > 0");
        }
        Ok(())
    }

    /// Number of delivery intervals `N`; the grid has `N + 1` points.
    pub fn delivery_steps(&self) -> usize {
        ((self.tau / self.dt).round() as usize).max(1)
    }

    fn delivery_dt(&self) -> f64 {
        self.tau / self.delivery_steps() as f64
    }

    /// Delivery times `u_k = T + k * tau / N`, `k = 0..=N`.
    pub fn delivery_times(&self) -> Vec<f64> {
        let h = self.delivery_dt();
        (0..=self.delivery_steps())
            .map(|k| self.t + k as f64 * h)
            .collect()
    }

    /// `e^{-r u_k} * step_hours` for each delivery point.
    pub fn delivery_weights(&self) -> Vec<f64> {
        let hours = self.delivery_dt() * HOURS_PER_YEAR;
        self.delivery_times()
            .into_iter()
            .map(|u| discount_factor(self.r, u) * hours)
            .collect()
    }

    pub fn pre_step_count(&self) -> usize {
        if self.t == 0.0 {
            return 0;
        }
        self.pre_steps
            .unwrap_or_else(|| ((self.t / self.dt).round() as usize).max(1))
    }

    fn pre_dt(&self) -> f64 {
        match self.pre_step_count() {
            0 => 0.0,
            n => self.t / n as f64,
        }
    }

    /// Weights for the pre-delivery points `t_j = j T / N_pre`, `j < N_pre`.
    pub fn pre_weights(&self) -> Vec<f64> {
        let h = self.pre_dt();
        (0..self.pre_step_count())
            .map(|j| discount_factor(self.r, j as f64 * h) * h * HOURS_PER_YEAR)
            .collect()
    }

    fn strike_at(&self, k: usize) -> f64 {
        match &self.k_schedule {
            Some(s) => s[k],
            None => self.k,
        }
    }
}

/// `e^{-r t}`.
pub fn discount_factor(r: f64, t: f64) -> f64 {
    (-r * t).exp()
}

/// Monte Carlo premium estimate, per MW scaled by `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiumResult {
    pub premium: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub payoff_mean: f64,
    pub payoff_p5: f64,
    pub payoff_p95: f64,
    pub seed: u64,
}

impl PremiumResult {
    fn from_payoffs(payoffs: &[f64], q: f64, seed: u64) -> Self {
        let mean = numeric::mean(payoffs);
        let se = numeric::sample_sd(payoffs) / (payoffs.len() as f64).sqrt();
        let mut sorted = payoffs.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            premium: q * mean,
            std_error: q * se,
            n_paths: payoffs.len(),
            payoff_mean: mean,
            payoff_p5: crate::risk::quantile_sorted(&sorted, 0.05),
            payoff_p95: crate::risk::quantile_sorted(&sorted, 0.95),
            seed,
        }
    }
}

/// Per-path discounted sums from one strip simulation (all per MW).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PathTotals {
    /// Energy revenue over `[0, T)`.
    pub pre_energy: f64,
    /// `[checkpoint][strike]` discounted call payoffs.
    pub payoff: Vec<Vec<f64>>,
    /// `[checkpoint][strike]` discounted capped revenue `min(S, K)`.
    pub capped: Vec<Vec<f64>>,
    /// `[checkpoint]` discounted uncapped delivery revenue.
    pub energy: Vec<f64>,
    /// Delivery steps with `S > K` for the first strike.
    pub exceed: u64,
}

/// Strikes evaluated on shared paths. Each entry may carry a schedule.
pub(crate) struct StripRequest<'a> {
    pub terms: &'a ContractTerms,
    /// Alternative constant strikes; `None` means use `terms` as given.
    pub strikes: Option<&'a [f64]>,
    /// Delivery indices (inclusive) at which partial sums are recorded.
    pub checkpoints: Vec<usize>,
}

pub(crate) fn simulate_strip(
    model: &ModelSpec,
    s0: f64,
    r0: Option<usize>,
    req: &StripRequest<'_>,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<PathTotals>> {
    let terms = req.terms;
    terms.validate()?;
    model.validate()?;
    if n_paths < 2 {
        return Err(Error::invalid("need at least two paths"));
    }
    if model.is_regime_switching() && r0.is_none() {
        return Err(Error::RegimeRequired);
    }
    let n_delivery = terms.delivery_steps();
    if req.checkpoints.iter().any(|&c| c > n_delivery) {
        return Err(Error::invalid("checkpoint beyond the delivery grid"));
    }
    let pre = if terms.pre_step_count() > 0 {
        Some(Stepper::new(model, terms.pre_dt())?)
    } else {
        None
    };
    let delivery = Stepper::new(model, terms.delivery_dt())?;
    let init = delivery.initial_state(model, s0, r0)?;
    let pre_w = terms.pre_weights();
    let w = terms.delivery_weights();
    let n_strikes = req.strikes.map_or(1, |s| s.len());
    let strike = |i: usize, k: usize| match req.strikes {
        Some(s) => s[i],
        None => terms.strike_at(k),
    };

    let run_path = |p: usize| -> PathTotals {
        let mut rng = path_rng(seed, p as u64);
        let mut st: SimState = init;
        let mut pre_energy = 0.0;
        if let Some(step) = &pre {
            for wj in &pre_w {
                pre_energy += wj * st.price;
                step.advance(&mut st, &mut rng);
            }
        }
        let mut payoff = vec![0.0; n_strikes];
        let mut capped = vec![0.0; n_strikes];
        let mut energy = 0.0;
        let mut out = PathTotals {
            pre_energy,
            payoff: Vec::with_capacity(req.checkpoints.len()),
            capped: Vec::with_capacity(req.checkpoints.len()),
            energy: Vec::with_capacity(req.checkpoints.len()),
            exceed: 0,
        };
        let mut next_ckpt = 0;
        for (k, wk) in w.iter().enumerate() {
            if k > 0 {
                advance(&delivery, &mut st, &mut rng);
            }
            let s = st.price;
            energy += wk * s;
            if s > strike(0, k) {
                out.exceed += 1;
            }
            for i in 0..n_strikes {
                let kk = strike(i, k);
                payoff[i] += wk * (s - kk).max(0.0);
                capped[i] += wk * s.min(kk);
            }
            while next_ckpt < req.checkpoints.len() && req.checkpoints[next_ckpt] == k {
                out.payoff.push(payoff.clone());
                out.capped.push(capped.clone());
                out.energy.push(energy);
                next_ckpt += 1;
            }
        }
        out
    };
    Ok((0..n_paths).into_par_iter().map(run_path).collect())
}

#[inline]
fn advance<R: Rng>(step: &Stepper, st: &mut SimState, rng: &mut R) {
    step.advance(st, rng);
}

/// Monte Carlo price of the strip for `terms`.
pub fn mc_capacity_premium(
    model: &ModelSpec,
    s0: f64,
    r0: Option<usize>,
    terms: &ContractTerms,
    n_paths: usize,
    seed: u64,
) -> Result<PremiumResult> {
    let req = StripRequest {
        terms,
        strikes: None,
        checkpoints: vec![terms.delivery_steps()],
    };
    let paths = simulate_strip(model, s0, r0, &req, n_paths, seed)?;
    let payoffs: Vec<f64> = paths.iter().map(|p| p.payoff[0][0]).collect();
    Ok(PremiumResult::from_payoffs(&payoffs, terms.q, seed))
}

/// Premia for several constant strikes on one set of paths (common random
/// numbers); identical to pricing each strike separately with the same seed.
pub fn mc_capacity_premium_strikes(
    model: &ModelSpec,
    s0: f64,
    r0: Option<usize>,
    terms: &ContractTerms,
    strikes: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<PremiumResult>> {
    if strikes.is_empty() || strikes.iter().any(|k| !k.is_finite()) {
        return Err(Error::invalid("strikes must be finite and non-empty"));
    }
    let req = StripRequest {
        terms,
        strikes: Some(strikes),
        checkpoints: vec![terms.delivery_steps()],
    };
    let paths = simulate_strip(model, s0, r0, &req, n_paths, seed)?;
    Ok((0..strikes.len())
        .map(|i| {
            let payoffs: Vec<f64> = paths.iter().map(|p| p.payoff[0][i]).collect();
            PremiumResult::from_payoffs(&payoffs, terms.q, seed)
        })
        .collect())
}

/// Closed-form strip value for a jump-free single-regime OU process,
/// on the same delivery grid as the simulation.
pub fn ou_strip_closed_form(p: &OUParams, s0: f64, terms: &ContractTerms) -> Result<f64> {
    p.validate()?;
    terms.validate()?;
    let w = terms.delivery_weights();
    let total: Vec<f64> = terms
        .delivery_times()
        .iter()
        .zip(&w)
        .enumerate()
        .map(|(k, (&u, wk))| {
            let (mu, var) = ou_mean_var(p, s0, u);
            wk * gaussian_call(mu, var.sqrt(), terms.strike_at(k))
        })
        .collect();
    Ok(terms.q * numeric::pairwise_sum(&total))
}

/// `E[(X - K)^+]` for `X ~ N(mu, sd^2)`.
pub fn gaussian_call(mu: f64, sd: f64, k: f64) -> f64 {
    if sd <= 0.0 {
        return (mu - k).max(0.0);
    }
    let d = (mu - k) / sd;
    (mu - k) * norm_cdf(d) + sd * norm_pdf(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelizeMode {
    /// Equal payments at the start of each delivery year.
    StartOfYear,
    /// Constant rate paid continuously over the delivery period.
    Continuous,
}

/// Constant annual payment with the same present value as `premium`.
pub fn levelize_annual(premium: f64, r: f64, tau: f64, mode: LevelizeMode) -> Result<f64> {
    if !(tau > 0.0) || !(r >= 0.0) {
        return Err(Error::invalid("tau must be > 0 and r >= 0"));
    }
    match mode {
        LevelizeMode::StartOfYear => {
            if tau < 1.0 {
                return Err(Error::invalid("start-of-year levelization needs tau >= 1"));
            }
            let years = (tau - 1e-9).ceil() as u32;
            let annuity: f64 = (0..years).map(|n| discount_factor(r, n as f64)).sum();
            Ok(premium / annuity)
        }
        LevelizeMode::Continuous => {
            if r == 0.0 {
                return Ok(premium / tau);
            }
            Ok(premium * r / -(-r * tau).exp_m1())
        }
    }
}

/// Parameter axes for a one-at-a-time sensitivity sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub tau: Vec<f64>,
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    pub r: Vec<f64>,
    #[serde(rename = "T")]
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: &'static str,
    pub value: f64,
    pub premium: f64,
    pub std_error: f64,
    pub levelized: f64,
    /// Undiscounted premium per delivery year, `C / tau`.
    pub per_year: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityFlag {
    pub parameter: &'static str,
    pub quantity: &'static str,
    pub expected: &'static str,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub flags: Vec<MonotonicityFlag>,
}

impl SweepTable {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["parameter", "value", "premium", "std_error", "levelized", "per_year"])?;
        for r in &self.rows {
            w.write_record([
                r.parameter.to_string(),
                format!("{}", r.value),
                format!("{}", r.premium),
                format!("{}", r.std_error),
                format!("{}", r.levelized),
                format!("{}", r.per_year),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

fn count_violations(values: &[f64], expected: &str) -> usize {
    values
        .windows(2)
        .filter(|w| match expected {
            "non_increasing" => w[1] > w[0],
            "non_decreasing" => w[1] < w[0],
            "decreasing" => w[1] >= w[0],
            _ => false,
        })
        .count()
}

/// Premium and start-of-year levelized premium along each axis of `grid`,
/// holding the other terms at `base`. Every point reuses `seed`.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_sweep(
    model: &ModelSpec,
    s0: f64,
    r0: Option<usize>,
    base: &ContractTerms,
    grid: &SweepGrid,
    n_paths: usize,
    seed: u64,
) -> Result<SweepTable> {
    base.validate()?;
    let level = |c: f64, r: f64, tau: f64| levelize_annual(c, r, tau, LevelizeMode::StartOfYear);
    let mut rows = Vec::new();
    let mut flags = Vec::new();

    if !grid.k.is_empty() {
        let res = mc_capacity_premium_strikes(model, s0, r0, base, &grid.k, n_paths, seed)?;
        for (k, p) in grid.k.iter().zip(&res) {
            rows.push(SweepRow {
                parameter: "K",
                value: *k,
                premium: p.premium,
                std_error: p.std_error,
                levelized: level(p.premium, base.r, base.tau)?,
                per_year: p.premium / base.tau,
            });
        }
        let prem: Vec<f64> = res.iter().map(|p| p.premium).collect();
        flags.push(MonotonicityFlag {
            parameter: "K",
            quantity: "premium",
            expected: "non_increasing",
            violations: count_violations(&prem, "non_increasing"),
        });
    }

    if !grid.tau.is_empty() {
        // every tau's delivery grid is a prefix of the longest one
        let tau_max = grid.tau.iter().cloned().fold(f64::NAN, f64::max);
        let long = ContractTerms {
            tau: tau_max,
            k_schedule: None,
            ..base.clone()
        };
        long.validate()?;
        let h = long.tau / long.delivery_steps() as f64;
        let ckpts: Vec<usize> = grid.tau.iter().map(|t| (t / h).round() as usize).collect();
        let mut sorted_ckpts = ckpts.clone();
        sorted_ckpts.sort_unstable();
        sorted_ckpts.dedup();
        let req = StripRequest {
            terms: &long,
            strikes: None,
            checkpoints: sorted_ckpts.clone(),
        };
        let paths = simulate_strip(model, s0, r0, &req, n_paths, seed)?;
        let mut prem = Vec::new();
        let mut lev = Vec::new();
        let mut per_year = Vec::new();
        for (tau, c) in grid.tau.iter().zip(&ckpts) {
            let idx = sorted_ckpts.binary_search(c).unwrap();
            let payoffs: Vec<f64> = paths.iter().map(|p| p.payoff[idx][0]).collect();
            let res = PremiumResult::from_payoffs(&payoffs, base.q, seed);
            let l = level(res.premium, base.r, *tau)?;
            rows.push(SweepRow {
                parameter: "tau",
                value: *tau,
                premium: res.premium,
                std_error: res.std_error,
                levelized: l,
                per_year: res.premium / tau,
            });
            prem.push(res.premium);
            lev.push(l);
            per_year.push(res.premium / tau);
        }
        flags.push(MonotonicityFlag {
            parameter: "tau",
            quantity: "premium",
            expected: "non_decreasing",
            violations: count_violations(&prem, "non_decreasing"),
        });
        flags.push(MonotonicityFlag {
            parameter: "tau",
            quantity: "levelized",
            expected: "decreasing",
            violations: count_violations(&lev, "decreasing"),
        });
        flags.push(MonotonicityFlag {
            parameter: "tau",
            quantity: "per_year",
            expected: "decreasing",
            violations: count_violations(&per_year, "decreasing"),
        });
    }

    if !grid.r.is_empty() {
        let mut prem = Vec::new();
        for r in &grid.r {
            let terms = ContractTerms { r: *r, ..base.clone() };
            let res = mc_capacity_premium(model, s0, r0, &terms, n_paths, seed)?;
            rows.push(SweepRow {
                parameter: "r",
                value: *r,
                premium: res.premium,
                std_error: res.std_error,
                levelized: level(res.premium, *r, base.tau)?,
                per_year: res.premium / base.tau,
            });
            prem.push(res.premium);
        }
        flags.push(MonotonicityFlag {
            parameter: "r",
            quantity: "premium",
            expected: "non_increasing",
            violations: count_violations(&prem, "non_increasing"),
        });
    }

    for t in &grid.t {
        let terms = ContractTerms {
            t: *t,
            pre_steps: None,
            ..base.clone()
        };
        let res = mc_capacity_premium(model, s0, r0, &terms, n_paths, seed)?;
        rows.push(SweepRow {
            parameter: "T",
            value: *t,
            premium: res.premium,
            std_error: res.std_error,
            levelized: level(res.premium, base.r, base.tau)?,
            per_year: res.premium / base.tau,
        });
    }
    Ok(SweepTable { rows, flags })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou_model(kappa: f64, theta: f64, sigma: f64) -> ModelSpec {
        ModelSpec::Ou {
            ou: OUParams::new(kappa, theta, sigma).unwrap(),
        }
    }

    fn short_terms(k: f64) -> ContractTerms {
        // daily steps keep unit tests quick
        ContractTerms::new(0.5, 1.0, 1.0 / 365.0, k, 0.03).unwrap()
    }

    #[test]
    fn discount_examples() {
        assert_eq!(discount_factor(0.05, 0.0), 1.0);
        assert_eq!(discount_factor(0.0, 17.0), 1.0);
        assert!((discount_factor(0.0264, 6.0) - 0.853_508_310_354_570_1).abs() < 1e-15);
    }

    #[test]
    fn levelize_examples() {
        assert!((levelize_annual(600.0, 0.0, 6.0, LevelizeMode::StartOfYear).unwrap() - 100.0).abs() < 1e-12);
        let a = levelize_annual(294_775.92, 0.0264, 6.0, LevelizeMode::StartOfYear).unwrap();
        assert!((a - 52_428.0).abs() / 52_428.0 < 5e-3, "{a}");
        let c = levelize_annual(294_775.92, 0.0264, 6.0, LevelizeMode::Continuous).unwrap();
        assert!((c - a).abs() / a < 0.03);
        assert!(levelize_annual(1.0, 0.01, 0.5, LevelizeMode::StartOfYear).is_err());
        assert!((levelize_annual(6.0, 0.0, 3.0, LevelizeMode::Continuous).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn worthless_option() {
        let m = ou_model(2.0, 100.0, 40.0);
        let res = mc_capacity_premium(&m, 60.0, None, &short_terms(1e9), 64, 7).unwrap();
        assert_eq!(res.premium, 0.0);
        assert_eq!(res.std_error, 0.0);
    }

    #[test]
    fn deterministic_payoffs() {
        let m = ou_model(2.0, 100.0, 0.0);
        let res = mc_capacity_premium(&m, 50.0, None, &short_terms(120.0), 8, 1).unwrap();
        assert_eq!(res.premium, 0.0);

        // theta - K = 20, started at theta
        let terms = short_terms(80.0);
        let res = mc_capacity_premium(&m, 100.0, None, &terms, 8, 1).unwrap();
        let expect: f64 = terms.delivery_weights().iter().sum::<f64>() * 20.0;
        assert!((res.premium - expect).abs() < 1e-9 * expect);
        let cf = ou_strip_closed_form(&OUParams::new(2.0, 100.0, 0.0).unwrap(), 100.0, &terms).unwrap();
        assert!((cf - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn at_the_money_closed_form() {
        let p = OUParams::new(2.0, 100.0, 40.0).unwrap();
        let terms = short_terms(100.0);
        let expect: f64 = terms
            .delivery_times()
            .iter()
            .zip(terms.delivery_weights())
            .map(|(&u, w)| w * ou_mean_var(&p, 100.0, u).1.sqrt() * 0.398_942_280_401_432_7)
            .sum();
        let got = ou_strip_closed_form(&p, 100.0, &terms).unwrap();
        assert!((got - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn linear_in_capacity() {
        let m = ou_model(2.0, 100.0, 40.0);
        let one = short_terms(110.0);
        let three = ContractTerms { q: 3.0, ..one.clone() };
        let a = mc_capacity_premium(&m, 60.0, None, &one, 200, 11).unwrap();
        let b = mc_capacity_premium(&m, 60.0, None, &three, 200, 11).unwrap();
        assert_eq!(b.premium, 3.0 * a.premium);
        assert_eq!(b.std_error, 3.0 * a.std_error);
    }

    #[test]
    fn regime_model_needs_initial_regime() {
        let m = ModelSpec::MrsmOu {
            regimes: crate::models::RegimeModel::new(
                vec![OUParams::new(2.0, 100.0, 40.0).unwrap()],
                crate::models::TransitionMatrix::identity(1),
            )
            .unwrap(),
        };
        assert!(matches!(
            mc_capacity_premium(&m, 60.0, None, &short_terms(100.0), 10, 1),
            Err(Error::RegimeRequired)
        ));
    }

    #[test]
    fn multi_strike_matches_single_runs() {
        let m = ou_model(2.0, 100.0, 40.0);
        let terms = short_terms(100.0);
        let multi = mc_capacity_premium_strikes(&m, 60.0, None, &terms, &[90.0, 110.0], 100, 5).unwrap();
        let single = mc_capacity_premium(&m, 60.0, None, &terms.with_strike(110.0), 100, 5).unwrap();
        assert_eq!(multi[1], single);
    }

    #[test]
    fn capped_plus_payoff_reconstructs_energy() {
        let m = ou_model(2.0, 100.0, 40.0);
        let terms = short_terms(105.0);
        let req = StripRequest {
            terms: &terms,
            strikes: None,
            checkpoints: vec![terms.delivery_steps()],
        };
        for p in simulate_strip(&m, 60.0, None, &req, 50, 3).unwrap() {
            let lhs = p.capped[0][0] + p.payoff[0][0];
            assert!((lhs - p.energy[0]).abs() <= 1e-12 * p.energy[0].abs().max(1.0));
        }
    }

    #[test]
    fn strike_schedule_equal_to_constant() {
        let m = ou_model(2.0, 100.0, 40.0);
        let terms = short_terms(100.0);
        let sched = ContractTerms {
            k_schedule: Some(vec![100.0; terms.delivery_steps() + 1]),
            ..terms.clone()
        };
        let a = mc_capacity_premium(&m, 60.0, None, &terms, 40, 9).unwrap();
        let b = mc_capacity_premium(&m, 60.0, None, &sched, 40, 9).unwrap();
        assert_eq!(a, b);
        let bad = ContractTerms {
            k_schedule: Some(vec![100.0; 3]),
            ..terms
        };
        assert!(bad.validate().is_err());
    }
}
