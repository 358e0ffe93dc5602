//! Empirical quantiles, CVaR, expected energy unserved and CVaR-based strikes.
//!
//! Quantile convention: for sorted `x[0..n]` and `h = (n - 1) * alpha`,
//! `q = x[floor h] + frac(h) * (x[floor h + 1] - x[floor h])`. The tail set
//! for CVaR is every value `>= q`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;
use crate::pricing::ContractTerms;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleUnit {
    #[default]
    Price,
    Energy,
}

/// Non-empty collection of finite draws, kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    sorted: Vec<f64>,
    unit: SampleUnit,
}

impl Sample {
    pub fn new(values: Vec<f64>, unit: SampleUnit) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample values must be finite"));
        }
        let mut sorted = values;
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted, unit })
    }

    pub fn prices(values: Vec<f64>) -> Result<Self> {
        Self::new(values, SampleUnit::Price)
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn unit(&self) -> SampleUnit {
        self.unit
    }

    pub fn mean(&self) -> f64 {
        numeric::mean(&self.sorted)
    }

    pub fn max(&self) -> f64 {
        *self.sorted.last().unwrap()
    }

    /// `a + b * x` for every draw; `b` must be positive so order is kept.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::invalid("affine scale must be positive"));
        }
        Ok(Self {
            sorted: self.sorted.iter().map(|x| a + b * x).collect(),
            unit: SampleUnit::Price,
        })
    }
}

fn check_alpha_open(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

pub(crate) fn quantile_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * alpha;
    let lo = (h.floor() as usize).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 || sorted[hi] == sorted[lo] {
        return sorted[lo];
    }
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub(crate) fn cvar_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let q = quantile_sorted(sorted, alpha);
    let start = sorted.partition_point(|&x| x < q);
    numeric::mean(&sorted[start..])
}

/// Empirical `alpha`-quantile with linear interpolation.
pub fn quantile(x: &Sample, alpha: f64) -> Result<f64> {
    check_alpha_open(alpha)?;
    Ok(quantile_sorted(&x.sorted, alpha))
}

/// Mean of the draws at or above the `alpha`-quantile; `alpha = 0` gives
/// the sample mean.
pub fn cvar(x: &Sample, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(x.mean());
    }
    Ok(cvar_sorted(&x.sorted, alpha))
}

/// Demand and generation per step, MWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortfallSeries {
    pub demand: Vec<f64>,
    pub generation: Vec<f64>,
}

impl ShortfallSeries {
    pub fn new(demand: Vec<f64>, generation: Vec<f64>) -> Result<Self> {
        if demand.is_empty() {
            return Err(Error::EmptySeries);
        }
        if demand.len() != generation.len() {
            return Err(Error::invalid("demand and generation must be aligned"));
        }
        if demand.iter().chain(&generation).any(|v| !v.is_finite()) {
            return Err(Error::invalid("shortfall inputs must be finite"));
        }
        Ok(Self { demand, generation })
    }

    /// `Z_t = D_t - G_t`.
    pub fn net(&self) -> Vec<f64> {
        self.demand
            .iter()
            .zip(&self.generation)
            .map(|(d, g)| d - g)
            .collect()
    }

    /// `[Z_t]^+`.
    pub fn positive_part(&self) -> Vec<f64> {
        self.net().into_iter().map(|z| z.max(0.0)).collect()
    }

    /// Read `(timestamp, demand, generation)` rows.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.into()))
        };
        let (d_idx, g_idx) = (col("demand")?, col("generation")?);
        let mut demand = Vec::new();
        let mut generation = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok());
            if let (Some(d), Some(g)) = (parse(d_idx), parse(g_idx)) {
                demand.push(d);
                generation.push(g);
            }
        }
        Self::new(demand, generation)
    }
}

/// Summed positive shortfall of one scenario.
pub fn eeu(z: &ShortfallSeries) -> f64 {
    numeric::pairwise_sum(&z.positive_part())
}

/// Mean over scenarios of summed positive shortfall.
pub fn eeu_scenarios(scenarios: &[ShortfallSeries]) -> Result<f64> {
    if scenarios.is_empty() {
        return Err(Error::EmptySeries);
    }
    let totals: Vec<f64> = scenarios.iter().map(eeu).collect();
    Ok(numeric::mean(&totals))
}

/// Strike at the `alpha`-quantile of historical prices.
pub fn strike_from_alpha(prices: &Sample, alpha: f64) -> Result<f64> {
    quantile(prices, alpha)
}

/// `(1 - alpha) (CVaR_alpha - q_alpha)`: the expected call payoff per unit
/// time when the strike is the `alpha`-quantile.
pub fn premium_term_via_cvar(prices: &Sample, alpha: f64) -> Result<f64> {
    check_alpha_open(alpha)?;
    Ok((1.0 - alpha) * (cvar(prices, alpha)? - quantile(prices, alpha)?))
}

/// Affine scarcity pricing `phi(z) = base + voll * z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScarcityMap {
    pub base: f64,
    pub voll: f64,
}

impl ScarcityMap {
    pub fn new(base: f64, voll: f64) -> Result<Self> {
        if !(voll > 0.0 && voll.is_finite()) || !base.is_finite() {
            return Err(Error::invalid("VOLL must be positive and base finite"));
        }
        Ok(Self { base, voll })
    }

    pub fn price(&self, z: f64) -> f64 {
        self.base + self.voll * z
    }
}

/// Premium per MW computed from the shortfall side: the per-step term
/// `voll (1 - alpha) (CVaR(z+) - z_alpha)` accrued over the delivery grid.
pub fn shortfall_premium(
    z_plus: &Sample,
    map: &ScarcityMap,
    alpha: f64,
    terms: &ContractTerms,
) -> Result<f64> {
    if z_plus.sorted[0] < 0.0 {
        return Err(Error::invalid("shortfall sample must be non-negative"));
    }
    terms.validate()?;
    let per_step = map.voll * premium_term_via_cvar(z_plus, alpha)?;
    let weight: f64 = terms.delivery_weights().iter().sum();
    Ok(per_step * weight * terms.q)
}

/// Summary written by the `strike` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub alpha: f64,
    pub quantile: f64,
    pub cvar: f64,
    pub eeu: Option<f64>,
    pub strike: f64,
    pub premium_term: f64,
}

pub fn risk_report(prices: &Sample, alpha: f64, shortfall: Option<&ShortfallSeries>) -> Result<RiskReport> {
    let q = quantile(prices, alpha)?;
    Ok(RiskReport {
        alpha,
        quantile: q,
        cvar: cvar(prices, alpha)?,
        eeu: shortfall.map(eeu),
        strike: q,
        premium_term: premium_term_via_cvar(prices, alpha)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: Vec<f64>) -> Sample {
        Sample::prices(v).unwrap()
    }

    #[test]
    fn quantile_examples() {
        let x = s((1..=100).map(f64::from).collect());
        assert_eq!(quantile(&x, 0.5).unwrap(), 50.5);
        assert!((quantile(&x, 1.0 - 1e-12).unwrap() - 100.0).abs() < 1e-9);
        let c = s(vec![7.0; 13]);
        for a in [0.01, 0.5, 0.99] {
            assert_eq!(quantile(&c, a).unwrap(), 7.0);
        }
        assert!(quantile(&x, 0.0).is_err());
        assert!(quantile(&x, 1.0).is_err());
    }

    #[test]
    fn cvar_limits() {
        let x = s(vec![3.0, -1.0, 8.0, 2.5, 4.0]);
        assert_eq!(cvar(&x, 0.0).unwrap(), x.mean());
        assert_eq!(cvar(&x, 0.81).unwrap(), 8.0);
        assert!(cvar(&x, 1.0).is_err());
    }

    #[test]
    fn eeu_examples() {
        let z = ShortfallSeries::new(vec![1.0, 2.0], vec![3.0, 2.0]).unwrap();
        assert_eq!(eeu(&z), 0.0);
        let z = ShortfallSeries::new(vec![10.0, 5.0, 1.0], vec![5.0, 9.0, 2.0]).unwrap();
        assert_eq!(eeu(&z), 5.0);
        let scen = vec![
            z.clone(),
            ShortfallSeries::new(vec![4.0, 4.0], vec![1.0, 0.0]).unwrap(),
        ];
        assert_eq!(eeu_scenarios(&scen).unwrap(), (5.0 + 7.0) / 2.0);
    }

    #[test]
    fn premium_term_zero_for_constant() {
        assert_eq!(premium_term_via_cvar(&s(vec![42.0; 50]), 0.95).unwrap(), 0.0);
    }

    #[test]
    fn shortfall_premium_linear_in_voll() {
        let z = Sample::new(vec![0.0, 0.0, 1.0, 3.0, 0.5, 7.0, 0.0, 2.0], SampleUnit::Energy).unwrap();
        let terms = ContractTerms::new(0.0, 1.0, 1.0 / 8760.0, 100.0, 0.03).unwrap();
        let one = shortfall_premium(&z, &ScarcityMap::new(10.0, 1000.0).unwrap(), 0.9, &terms).unwrap();
        let two = shortfall_premium(&z, &ScarcityMap::new(10.0, 2000.0).unwrap(), 0.9, &terms).unwrap();
        assert!(one > 0.0);
        assert_eq!(two, 2.0 * one);
        let zero = Sample::new(vec![0.0; 20], SampleUnit::Energy).unwrap();
        assert_eq!(
            shortfall_premium(&zero, &ScarcityMap::new(10.0, 1000.0).unwrap(), 0.9, &terms).unwrap(),
            0.0
        );
    }

    proptest! {
        #[test]
        fn cvar_monotone_and_dominates_quantile(
            v in prop::collection::vec(-1e3f64..1e3, 2..200),
            a in 0.01f64..0.98,
            da in 0.0f64..0.01,
        ) {
            let x = s(v);
            let c1 = cvar(&x, a).unwrap();
            let c2 = cvar(&x, a + da).unwrap();
            prop_assert!(c2 >= c1 - 1e-9);
            prop_assert!(c1 >= quantile(&x, a).unwrap() - 1e-9);
        }

        #[test]
        fn cvar_translation_and_scaling(
            v in prop::collection::vec(-1e3f64..1e3, 2..200),
            a in 0.01f64..0.98,
            c in -100f64..100.0,
            b in 0.1f64..10.0,
        ) {
            let x = s(v.clone());
            let base = cvar(&x, a).unwrap();
            let shifted = cvar(&s(v.iter().map(|y| y + c).collect()), a).unwrap();
            let scaled = cvar(&s(v.iter().map(|y| y * b).collect()), a).unwrap();
            prop_assert!((shifted - (base + c)).abs() < 1e-8 * (1.0 + base.abs() + c.abs()));
            prop_assert!((scaled - b * base).abs() < 1e-8 * (1.0 + (b * base).abs()));
        }

        #[test]
        fn payoff_identity_is_exact_with_realized_alpha(
            v in prop::collection::hash_set(-1000i64..1000, 2..200),
            a in 0.05f64..0.95,
        ) {
            // tie-free sample: mean((S-K)+) = (1 - a_hat)(CVaR - K)
            let x = s(v.into_iter().map(|i| i as f64 * 0.37).collect());
            let k = quantile(&x, a).unwrap();
            let n = x.len() as f64;
            let payoff = x.sorted().iter().map(|p| (p - k).max(0.0)).sum::<f64>() / n;
            let tail = x.sorted().iter().filter(|p| **p >= k).count() as f64;
            let a_hat = 1.0 - tail / n;
            let rhs = (1.0 - a_hat) * (cvar(&x, a).unwrap() - k);
            prop_assert!((payoff - rhs).abs() < 1e-9 * (1.0 + payoff.abs()));
        }
    }
}
