//! Cost recovery: present value of costs and revenues, NetCONE, the
//! break-even contract duration, and capacity-auction vs reliability-option
//! payment streams.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::numeric::{self, HOURS_PER_YEAR};
use crate::pricing::{discount_factor, simulate_strip, ContractTerms, StripRequest};

/// Fixed-cost inputs of a new entrant, all per MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    /// Overnight capital cost paid at t = 0, currency/MW.
    pub capex: f64,
    /// Fixed O&M, currency/MW-year.
    pub om: f64,
    /// Annualised total fixed cost, currency/MW-year.
    pub cone: Option<f64>,
    /// Ancillary-services revenue, currency/MW-year.
    pub as_revenue: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            capex: 0.0,
            om: 0.0,
            cone: None,
            as_revenue: 0.0,
        }
    }
}

impl CostModel {
    pub fn new(capex: f64, om: f64) -> Result<Self> {
        let c = Self {
            capex,
            om,
            ..Default::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.capex, self.om, self.as_revenue, self.cone.unwrap_or(0.0)];
        if fields.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("cost inputs must be finite and >= 0"));
        }
        if let Some(cone) = self.cone {
            if cone < self.om {
                return Err(Error::invalid("CONE must be at least the O&M cost"));
            }
        }
        Ok(())
    }

    fn has_decomposition(&self) -> bool {
        self.capex > 0.0 || self.om > 0.0
    }
}

fn grid(horizon: f64, dt: f64) -> Result<(usize, f64)> {
    if !(horizon > 0.0) || !(dt > 0.0) {
        return Err(Error::invalid("horizon and dt must be > 0"));
    }
    let n = ((horizon / dt).round() as usize).max(1);
    Ok((n, horizon / n as f64))
}

/// `sum_{t in (0, H]} e^{-rt} dt` on a right-endpoint grid, in years.
pub fn annuity(horizon: f64, r: f64, dt: f64) -> Result<f64> {
    let (n, h) = grid(horizon, dt)?;
    let terms: Vec<f64> = (1..=n)
        .map(|j| discount_factor(r, j as f64 * h) * h)
        .collect();
    Ok(numeric::pairwise_sum(&terms))
}

/// Present value of fixed costs over `(0, horizon]`.
///
/// Uses `capex + om * annuity` when CapEx/O&M are given and `cone * annuity`
/// otherwise; when both are present they must agree within 1%.
pub fn pv_cost(c: &CostModel, horizon: f64, r: f64, dt: f64) -> Result<f64> {
    c.validate()?;
    let a = annuity(horizon, r, dt)?;
    let decomposed = c.capex + c.om * a;
    match c.cone {
        Some(cone) if c.has_decomposition() => {
            let implied = cone * a;
            if (implied - decomposed).abs() > 0.01 * decomposed {
                return Err(Error::InconsistentCostInputs {
                    cone: implied,
                    implied: decomposed,
                });
            }
            Ok(decomposed)
        }
        Some(cone) => Ok(cone * a),
        None => Ok(decomposed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevenueMode {
    EnergyOnly,
    Ro,
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    fn of(xs: &[f64]) -> Self {
        Self {
            value: numeric::mean(xs),
            std_error: numeric::sample_sd(xs) / (xs.len() as f64).sqrt(),
        }
    }
}

/// Discounted revenue components per MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueDecomposition {
    pub mode: RevenueMode,
    /// Free energy sales over `[0, T)`.
    pub r1: Estimate,
    /// Capped sales `min(S, K)` over the delivery window.
    pub r2: Estimate,
    /// Option premium.
    pub premium: Estimate,
    /// Uncapped energy over `[0, T + tau]`.
    pub energy_only: Estimate,
    /// `r1 + r2 + premium` in RO mode, `energy_only` otherwise.
    pub total: Estimate,
}

/// Revenue decomposition on one set of simulated paths.
///
/// Per path, `r1 + r2 + premium` equals the uncapped energy revenue up to
/// rounding because `min(S, K) + (S - K)^+ = S`.
#[allow(clippy::too_many_arguments)]
pub fn pv_revenue(
    model: &ModelSpec,
    s0: f64,
    r0: Option<usize>,
    terms: &ContractTerms,
    mode: RevenueMode,
    n_paths: usize,
    seed: u64,
) -> Result<RevenueDecomposition> {
    let req = StripRequest {
        terms,
        strikes: None,
        checkpoints: vec![terms.delivery_steps()],
    };
    let paths = simulate_strip(model, s0, r0, &req, n_paths, seed)?;
    let col = |f: &dyn Fn(&crate::pricing::PathTotals) -> f64| -> Vec<f64> {
        paths.iter().map(|p| f(p) * terms.q).collect()
    };
    let r1 = col(&|p| p.pre_energy);
    let r2 = col(&|p| p.capped[0][0]);
    let c = col(&|p| p.payoff[0][0]);
    let energy = col(&|p| p.pre_energy + p.energy[0]);
    let ro_total: Vec<f64> = r1.iter().zip(&r2).zip(&c).map(|((a, b), c)| a + b + c).collect();
    Ok(RevenueDecomposition {
        mode,
        r1: Estimate::of(&r1),
        r2: Estimate::of(&r2),
        premium: Estimate::of(&c),
        energy_only: Estimate::of(&energy),
        total: match mode {
            RevenueMode::Ro => Estimate::of(&ro_total),
            RevenueMode::EnergyOnly => Estimate::of(&energy),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetCone {
    pub net_cone: f64,
    /// Market revenue alone covers CONE; `net_cone` is floored at zero.
    pub merchant_viable: bool,
}

/// `CONE - E[energy + AS revenue]`, floored at zero.
pub fn net_cone(c: &CostModel, expected_market_rev: f64) -> Result<NetCone> {
    c.validate()?;
    let cone = c
        .cone
        .ok_or_else(|| Error::invalid("NetCONE needs `cone`"))?;
    let raw = cone - expected_market_rev - c.as_revenue;
    Ok(NetCone {
        net_cone: raw.max(0.0),
        merchant_viable: raw < 0.0,
    })
}

/// Premium against the cost side: `PV(CONE over [0, T+tau]) - R1 - R2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PremiumNetConeCheck {
    pub premium: Estimate,
    pub pv_cone: f64,
    pub implied_premium: f64,
    /// `premium - implied_premium`.
    pub residual: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn premium_vs_net_cone(
    model: &ModelSpec,
    s0: f64,
    r0: Option<usize>,
    terms: &ContractTerms,
    cost: &CostModel,
    n_paths: usize,
    seed: u64,
) -> Result<PremiumNetConeCheck> {
    let rev = pv_revenue(model, s0, r0, terms, RevenueMode::Ro, n_paths, seed)?;
    let pv_cone = pv_cost(cost, terms.t + terms.tau, terms.r, terms.dt)? * terms.q;
    let implied = pv_cone - rev.r1.value - rev.r2.value;
    Ok(PremiumNetConeCheck {
        premium: rev.premium,
        pv_cone,
        implied_premium: implied,
        residual: rev.premium.value - implied,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingPoint {
    pub tau: u32,
    pub pv_revenue: f64,
    pub pv_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Breakeven {
    pub tau_star: u32,
    pub curve: Vec<CrossingPoint>,
}

/// PV revenue and cost for each integer `tau` in `1..=tau_max`, with
/// horizon `T + tau` and model-implied `E[S_t]` on a right-endpoint grid.
pub fn breakeven_curve(
    model: &ModelSpec,
    s0: f64,
    cost: &CostModel,
    t: f64,
    r: f64,
    dt: f64,
    tau_max: u32,
) -> Result<Vec<CrossingPoint>> {
    cost.validate()?;
    model.validate()?;
    if tau_max < 1 || !(t >= 0.0) || !(r >= 0.0) || !(dt > 0.0) {
        return Err(Error::invalid("need tau_max >= 1, T >= 0, r >= 0, dt > 0"));
    }
    let horizon = t + tau_max as f64;
    let (n, h) = grid(horizon, dt)?;
    let mut rev_cum = Vec::with_capacity(n + 1);
    let mut ann_cum = Vec::with_capacity(n + 1);
    rev_cum.push(0.0);
    ann_cum.push(0.0);
    let (mut rev, mut ann) = (0.0, 0.0);
    for j in 1..=n {
        let tj = j as f64 * h;
        let df = discount_factor(r, tj);
        rev += df * model.expected_price(s0, tj, h)? * h * HOURS_PER_YEAR;
        ann += df * h;
        rev_cum.push(rev);
        ann_cum.push(ann);
    }
    Ok((1..=tau_max)
        .map(|tau| {
            let idx = (((t + tau as f64) / h).round() as usize).min(n);
            CrossingPoint {
                tau,
                pv_revenue: rev_cum[idx] + cost.as_revenue * ann_cum[idx],
                pv_cost: cost.capex + cost.om * ann_cum[idx],
            }
        })
        .collect())
}

/// Smallest integer `tau` whose discounted expected revenue covers CapEx
/// plus discounted O&M over `[0, T + tau]`.
pub fn breakeven_duration(
    model: &ModelSpec,
    s0: f64,
    cost: &CostModel,
    t: f64,
    r: f64,
    dt: f64,
    tau_max: u32,
) -> Result<Breakeven> {
    let curve = breakeven_curve(model, s0, cost, t, r, dt, tau_max)?;
    let hit = curve
        .iter()
        .find(|p| p.pv_revenue >= p.pv_cost * (1.0 - 1e-12))
        .map(|p| p.tau);
    match hit {
        Some(tau_star) => Ok(Breakeven { tau_star, curve }),
        None => {
            let last = curve.last().unwrap();
            Err(Error::NoBreakEven {
                tau_max,
                gap: last.pv_cost - last.pv_revenue,
            })
        }
    }
}

/// One mechanism's payments per MW, in expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaymentStreams {
    pub capacity_leg: f64,
    pub energy_leg: f64,
    pub total: f64,
}

impl PaymentStreams {
    fn new(capacity_leg: f64, energy_leg: f64) -> Self {
        Self {
            capacity_leg,
            energy_leg,
            total: capacity_leg + energy_leg,
        }
    }
}

/// Capacity auction vs reliability option with the premium set to `M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrmComparison {
    pub capacity_payment: f64,
    pub ca: PaymentStreams,
    pub ro: PaymentStreams,
    pub ca_expected: Estimate,
    pub ro_expected: Estimate,
    /// `E[CA] - E[RO]` with its standard error (paired per path).
    pub difference: Estimate,
    /// Fraction of delivery steps with `S > K` across all paths.
    pub prob_exceed: f64,
    /// Fraction of paths with `RO <= CA`.
    pub pathwise_dominance: f64,
    /// Paths with exactly equal payments.
    pub equal_paths: usize,
    /// CA pays more than RO by at least three standard errors.
    pub over_compensation: bool,
    pub n_paths: usize,
    pub seed: u64,
}

/// Payment streams per MW with full dispatch `q_t = Q` in both legs:
/// CA gets `M Q` plus uncapped energy, RO gets `M Q` plus energy capped
/// at `K` during delivery.
#[allow(clippy::too_many_arguments)]
pub fn compare_crm(
    model: &ModelSpec,
    s0: f64,
    r0: Option<usize>,
    terms: &ContractTerms,
    capacity_payment: f64,
    n_paths: usize,
    seed: u64,
) -> Result<CrmComparison> {
    if !(capacity_payment.is_finite() && capacity_payment >= 0.0) {
        return Err(Error::invalid("capacity payment must be >= 0"));
    }
    let req = StripRequest {
        terms,
        strikes: None,
        checkpoints: vec![terms.delivery_steps()],
    };
    let paths = simulate_strip(model, s0, r0, &req, n_paths, seed)?;
    let q = terms.q;
    let ca: Vec<f64> = paths
        .iter()
        .map(|p| capacity_payment * q + q * (p.pre_energy + p.energy[0]))
        .collect();
    let ro: Vec<f64> = paths
        .iter()
        .map(|p| capacity_payment * q + q * (p.pre_energy + p.capped[0][0]))
        .collect();
    let diff: Vec<f64> = ca.iter().zip(&ro).map(|(a, b)| a - b).collect();
    let dominated = ca.iter().zip(&ro).filter(|(a, b)| b <= a).count();
    let equal = ca.iter().zip(&ro).filter(|(a, b)| a == b).count();
    let exceed: u64 = paths.iter().map(|p| p.exceed).sum();
    let steps = (terms.delivery_steps() + 1) as f64 * n_paths as f64;
    let difference = Estimate::of(&diff);
    let ca_energy: Vec<f64> = paths.iter().map(|p| q * (p.pre_energy + p.energy[0])).collect();
    let ro_energy: Vec<f64> = paths.iter().map(|p| q * (p.pre_energy + p.capped[0][0])).collect();
    Ok(CrmComparison {
        capacity_payment,
        ca: PaymentStreams::new(capacity_payment * q, numeric::mean(&ca_energy)),
        ro: PaymentStreams::new(capacity_payment * q, numeric::mean(&ro_energy)),
        ca_expected: Estimate::of(&ca),
        ro_expected: Estimate::of(&ro),
        difference,
        prob_exceed: exceed as f64 / steps,
        pathwise_dominance: dominated as f64 / n_paths as f64,
        equal_paths: equal,
        over_compensation: difference.value > 3.0 * difference.std_error && difference.value > 0.0,
        n_paths,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::OUParams;

    fn ou(theta: f64, sigma: f64) -> ModelSpec {
        ModelSpec::Ou {
            ou: OUParams::new(50.0, theta, sigma).unwrap(),
        }
    }

    #[test]
    fn pv_cost_examples() {
        let c = CostModel::new(1000.0, 10.0).unwrap();
        assert!((pv_cost(&c, 5.0, 0.0, 1.0 / 8760.0).unwrap() - 1050.0).abs() < 1e-8);

        let c = CostModel::new(0.0, 1.0).unwrap();
        let continuous = (1.0 - (-0.5f64).exp()) / 0.05;
        let got = pv_cost(&c, 10.0, 0.05, 1e-5).unwrap();
        assert!((got - 7.869_386_805_747_332).abs() < 1e-4);
        assert!((got - continuous).abs() < 1e-4);
    }

    #[test]
    fn pv_cost_cone_consistency() {
        let a = annuity(10.0, 0.05, 1.0 / 8760.0).unwrap();
        let ok = CostModel {
            capex: 1000.0,
            om: 10.0,
            cone: Some((1000.0 + 10.0 * a) / a),
            as_revenue: 0.0,
        };
        assert!(pv_cost(&ok, 10.0, 0.05, 1.0 / 8760.0).is_ok());
        let bad = CostModel {
            cone: Some(2.0 * (1000.0 + 10.0 * a) / a),
            ..ok.clone()
        };
        assert!(matches!(
            pv_cost(&bad, 10.0, 0.05, 1.0 / 8760.0),
            Err(Error::InconsistentCostInputs { .. })
        ));
        let only_cone = CostModel {
            capex: 0.0,
            om: 0.0,
            cone: Some(100.0),
            as_revenue: 0.0,
        };
        assert!((pv_cost(&only_cone, 10.0, 0.05, 1.0 / 8760.0).unwrap() - 100.0 * a).abs() < 1e-9);
    }

    #[test]
    fn net_cone_examples() {
        let c = CostModel {
            cone: Some(100_000.0),
            om: 50_000.0,
            ..Default::default()
        };
        assert_eq!(net_cone(&c, 0.0).unwrap().net_cone, 100_000.0);
        assert_eq!(net_cone(&c, 100_000.0).unwrap().net_cone, 0.0);
        let over = net_cone(&c, 120_000.0).unwrap();
        assert_eq!(over.net_cone, 0.0);
        assert!(over.merchant_viable);
        let a = net_cone(&c, 10_000.0).unwrap().net_cone;
        let b = net_cone(&c, 10_001.0).unwrap().net_cone;
        assert_eq!(a - b, 1.0);
        assert!(net_cone(&CostModel::default(), 1.0).is_err());
    }

    #[test]
    fn zero_capex_breaks_even_immediately() {
        // E[S] equals O&M expressed per MWh
        let om = 52_000.0;
        let m = ModelSpec::Ou {
            ou: OUParams::new(10.0, om / HOURS_PER_YEAR, 0.0).unwrap(),
        };
        let c = CostModel::new(0.0, om).unwrap();
        let b = breakeven_duration(&m, om / HOURS_PER_YEAR, &c, 1.0, 0.03, 1.0 / 8760.0, 10).unwrap();
        assert_eq!(b.tau_star, 1);
    }

    #[test]
    fn no_break_even_reports_gap() {
        let c = CostModel::new(1e12, 0.0).unwrap();
        let err = breakeven_duration(&ou(50.0, 0.0), 50.0, &c, 1.0, 0.03, 1.0 / 365.0, 3).unwrap_err();
        assert!(matches!(err, Error::NoBreakEven { tau_max: 3, gap } if gap > 0.0));
    }

    #[test]
    fn breakeven_viability_is_monotone() {
        let c = CostModel::new(1_000_000.0, 20_000.0).unwrap();
        let curve = breakeven_curve(&ou(60.0, 10.0), 60.0, &c, 1.0, 0.03, 1.0 / 365.0, 20).unwrap();
        let first = curve.iter().position(|p| p.pv_revenue >= p.pv_cost).unwrap();
        assert!(curve[first..].iter().all(|p| p.pv_revenue >= p.pv_cost));
    }

    #[test]
    fn revenue_identity_per_seed() {
        let terms = ContractTerms::new(0.5, 1.0, 1.0 / 365.0, 55.0, 0.03).unwrap();
        let d = pv_revenue(&ou(50.0, 30.0), 40.0, None, &terms, RevenueMode::Ro, 64, 3).unwrap();
        let lhs = d.r1.value + d.r2.value + d.premium.value;
        assert!((lhs - d.energy_only.value).abs() < 1e-9 * d.energy_only.value);
        assert!((d.total.value - lhs).abs() < 1e-9 * lhs);
    }

    #[test]
    fn crm_uncapped_strike_gives_equal_streams() {
        let terms = ContractTerms::new(0.5, 1.0, 1.0 / 365.0, 1e12, 0.03).unwrap();
        let r = compare_crm(&ou(50.0, 30.0), 40.0, None, &terms, 1000.0, 32, 1).unwrap();
        assert_eq!(r.equal_paths, 32);
        assert_eq!(r.difference.value, 0.0);
        assert!(!r.over_compensation);
    }

}
