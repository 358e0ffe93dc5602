//! Synthetic price fixtures.
//!
//! The German day-ahead series used in the calibration study cannot be
//! downloaded here, so a stand-in is generated from the published
//! per-regime OU parameters and a hand-picked hourly transition matrix.

use crate::error::Result;
use crate::market_data::PriceSeries;
use crate::models::{simulate_mrsm_ou, OUParams, RegimeModel, TransitionMatrix};
use crate::numeric::HOURS_PER_YEAR;

/// Per-regime OU parameters (low, medium, high), annualised.
pub fn germany_regime_params() -> [OUParams; 3] {
    [
        OUParams { kappa: 264.94, theta: 41.89, sigma: 531.05 },
        OUParams { kappa: 324.25, theta: 115.66, sigma: 1730.65 },
        OUParams { kappa: 320.45, theta: 301.45, sigma: 3897.34 },
    ]
}

/// Hourly birth-death chain with stationary occupancy close to
/// (0.80, 0.17, 0.03) and mean sojourns of roughly 1450, 200 and 100 hours.
pub fn germany_planted_transition() -> TransitionMatrix {
    let (up_lo, down_md, up_md, down_hi) = (0.000_687, 0.003_235, 0.001_765, 0.01);
    TransitionMatrix::new(vec![
        vec![1.0 - up_lo, up_lo, 0.0],
        vec![down_md, 1.0 - down_md - up_md, up_md],
        vec![0.0, down_hi, 1.0 - down_hi],
    ])
    .expect("planted matrix is stochastic")
}

pub fn germany_planted_model() -> RegimeModel {
    RegimeModel::new(germany_regime_params().to_vec(), germany_planted_transition())
        .expect("planted model is valid")
}

/// `hours` hourly prices from the planted model, starting 2019-01-01 in the
/// low regime at its long-run level. Returns the series and the true regimes.
pub fn germany_proxy(hours: usize, seed: u64) -> Result<(PriceSeries, Vec<u8>)> {
    let m = germany_planted_model();
    let dt = 1.0 / HOURS_PER_YEAR;
    let s0 = m.per_regime[0].theta;
    let batch = simulate_mrsm_ou(&m, s0, 0, (hours - 1) as f64 * dt, dt, 1, seed)?;
    let series = PriceSeries::hourly(batch.path(0).to_vec())?;
    let regimes = batch.regime_path(0).unwrap_or(&[]).to_vec();
    Ok((series, regimes))
}
