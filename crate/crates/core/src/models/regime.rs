use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, Matrix};

use super::ou::OUParams;

/// Row-stochastic matrix of regime transition probabilities per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct TransitionMatrix(Matrix);

impl TryFrom<Matrix> for TransitionMatrix {
    type Error = Error;

    fn try_from(rows: Matrix) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<TransitionMatrix> for Matrix {
    fn from(t: TransitionMatrix) -> Matrix {
        t.0
    }
}

impl TransitionMatrix {
    pub fn new(rows: Matrix) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("transition matrix is empty"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid("transition matrix must be square"));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(format!("row {i} has entries outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self(rows))
    }

    /// Clip to `[0, 1]` and renormalise rows; the nearest-stochastic
    /// projection used after estimation or matrix roots.
    pub fn project(mut rows: Matrix) -> Result<Self> {
        for row in rows.iter_mut() {
            row.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
            let sum: f64 = row.iter().sum();
            if !(sum > 0.0) {
                return Err(Error::invalid("transition row with zero mass"));
            }
            row.iter_mut().for_each(|p| *p /= sum);
        }
        Self::new(rows)
    }

    pub fn identity(n: usize) -> Self {
        Self(numeric::identity(n))
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn rows(&self) -> &Matrix {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    /// Transition matrix over `ratio` steps: a matrix power for integer
    /// ratios, otherwise `exp(ratio * log P)` projected back onto the simplex.
    pub fn rescaled(&self, ratio: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(Error::invalid("step ratio must be positive"));
        }
        let rounded = ratio.round();
        if (ratio - rounded).abs() < 1e-9 && rounded >= 1.0 {
            if rounded == 1.0 {
                return Ok(self.clone());
            }
            return Self::project(numeric::mat_pow(&self.0, rounded as u64));
        }
        let log = numeric::mat_log(&self.0)
            .ok_or_else(|| Error::invalid("transition matrix has no real logarithm"))?;
        let scaled: Matrix = log
            .iter()
            .map(|r| r.iter().map(|v| v * ratio).collect())
            .collect();
        Self::project(numeric::mat_exp(&scaled))
    }

    pub(crate) fn cumulative(&self) -> Vec<Vec<f64>> {
        self.0
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    fn is_irreducible(&self) -> bool {
        let n = self.n();
        let reach = |start: usize, forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let p = if forward { self.0[i][j] } else { self.0[j][i] };
                    if p > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.iter().all(|&s| s)
        };
        reach(0, true) && reach(0, false)
    }
}

/// Inverse-CDF draw of the next regime from row `r` given `u` in `[0, 1)`.
pub fn sample_next_regime(r: usize, transition: &TransitionMatrix, u: f64) -> usize {
    let row = &transition.0[r];
    let mut acc = 0.0;
    for (j, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    row.len() - 1
}

#[inline]
pub(crate) fn sample_cumulative(cum: &[f64], u: f64) -> usize {
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

/// Stationary distribution by repeated squaring of the transition matrix.
///
/// Fails with [`Error::NotConverged`] if the rows of `P^(2^k)` do not
/// collapse onto one vector, which happens for reducible or periodic chains.
pub fn markov_stationary(p: &TransitionMatrix) -> Result<Vec<f64>> {
    const MAX_SQUARINGS: usize = 64;
    let n = p.n();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    if !p.is_irreducible() {
        return Err(Error::NotConverged(0));
    }
    let mut m = p.0.clone();
    for k in 1..=MAX_SQUARINGS {
        let next = numeric::mat_mul(&m, &m);
        let spread = (0..n)
            .map(|j| {
                let (lo, hi) = next
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                        (lo.min(r[j]), hi.max(r[j]))
                    });
                hi - lo
            })
            .fold(0.0, f64::max);
        m = next;
        if spread < 1e-12 {
            let mut pi: Vec<f64> = (0..n)
                .map(|j| m.iter().map(|r| r[j]).sum::<f64>() / n as f64)
                .collect();
            // one polishing step of pi P
            pi = (0..n)
                .map(|j| (0..n).map(|i| pi[i] * p.0[i][j]).sum())
                .collect();
            let total: f64 = pi.iter().sum();
            return Ok(pi.into_iter().map(|x| x / total).collect());
        }
        if k == MAX_SQUARINGS {
            break;
        }
    }
    Err(Error::NotConverged(MAX_SQUARINGS))
}

fn default_transition_dt() -> f64 {
    1.0 / numeric::HOURS_PER_YEAR
}

/// Markov regime-switching OU model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeModel {
    pub per_regime: Vec<OUParams>,
    pub transition: TransitionMatrix,
    pub initial_regime_dist: Vec<f64>,
    /// Step (years) over which `transition` applies.
    #[serde(default = "default_transition_dt")]
    pub transition_dt: f64,
}

impl RegimeModel {
    pub fn new(per_regime: Vec<OUParams>, transition: TransitionMatrix) -> Result<Self> {
        let initial = markov_stationary(&transition)
            .unwrap_or_else(|_| vec![1.0 / transition.n() as f64; transition.n()]);
        let m = Self {
            per_regime,
            transition,
            initial_regime_dist: initial,
            transition_dt: default_transition_dt(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n_regimes(&self) -> usize {
        self.per_regime.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_regime.is_empty() || self.per_regime.len() != self.transition.n() {
            return Err(Error::invalid("per-regime parameters must match transition size"));
        }
        self.per_regime.iter().try_for_each(OUParams::validate)?;
        if self.initial_regime_dist.len() != self.n_regimes()
            || (self.initial_regime_dist.iter().sum::<f64>() - 1.0).abs() > 1e-9
            || self.initial_regime_dist.iter().any(|p| *p < 0.0)
        {
            return Err(Error::invalid("initial regime distribution is not a probability vector"));
        }
        if !(self.transition_dt > 0.0) {
            return Err(Error::invalid("transition_dt must be positive"));
        }
        Ok(())
    }
}

/// One regime of a Markov-switching autoregression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArRegime {
    /// Intercept.
    pub mu: f64,
    /// AR coefficients, lag 1 first.
    pub phi: Vec<f64>,
    /// Innovation variance.
    pub sigma2: f64,
}

impl ArRegime {
    /// Unconditional mean `mu / (1 - sum phi)`, if the lag polynomial allows it.
    pub fn long_run_mean(&self) -> f64 {
        self.mu / (1.0 - self.phi.iter().sum::<f64>())
    }
}

/// `S_t = mu_r + sum_k phi_{k,r} S_{t-k} + e_t`, `e_t ~ N(0, sigma2_r)`,
/// with `r` following a Markov chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsArParams {
    pub regimes: Vec<ArRegime>,
    pub transition: TransitionMatrix,
    pub order: usize,
}

impl MsArParams {
    pub fn new(regimes: Vec<ArRegime>, transition: TransitionMatrix) -> Result<Self> {
        let order = regimes.first().map(|r| r.phi.len()).unwrap_or(0);
        let m = Self {
            regimes,
            transition,
            order,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n_regimes(&self) -> usize {
        self.regimes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() || self.regimes.len() != self.transition.n() {
            return Err(Error::invalid("regime count must match transition size"));
        }
        for r in &self.regimes {
            if r.phi.len() != self.order {
                return Err(Error::invalid("every regime needs `order` AR coefficients"));
            }
            if !(r.sigma2 > 0.0 && r.sigma2.is_finite()) {
                return Err(Error::invalid("innovation variance must be > 0"));
            }
            if !r.mu.is_finite() || r.phi.iter().any(|p| !p.is_finite()) {
                return Err(Error::invalid("non-finite AR parameter"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> TransitionMatrix {
        TransitionMatrix::new(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap()
    }

    #[test]
    fn inverse_cdf_boundaries() {
        let t = TransitionMatrix::new(vec![vec![0.3, 0.7], vec![0.5, 0.5]]).unwrap();
        assert_eq!(sample_next_regime(0, &t, 0.29), 0);
        assert_eq!(sample_next_regime(0, &t, 0.31), 1);
        let id = TransitionMatrix::identity(3);
        for r in 0..3 {
            for u in [0.0, 0.5, 0.999_999] {
                assert_eq!(sample_next_regime(r, &id, u), r);
            }
        }
    }

    #[test]
    fn stationary_examples() {
        let pi = markov_stationary(&two_state()).unwrap();
        assert!((pi[0] - 5.0 / 6.0).abs() < 1e-12);
        assert!((pi[1] - 1.0 / 6.0).abs() < 1e-12);

        assert!(matches!(
            markov_stationary(&TransitionMatrix::identity(2)),
            Err(Error::NotConverged(_))
        ));

        let ds = TransitionMatrix::new(vec![
            vec![0.2, 0.5, 0.3],
            vec![0.3, 0.2, 0.5],
            vec![0.5, 0.3, 0.2],
        ])
        .unwrap();
        for p in markov_stationary(&ds).unwrap() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }

        let periodic = TransitionMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(markov_stationary(&periodic).is_err());
    }

    #[test]
    fn persistent_chain_converges() {
        let t = TransitionMatrix::new(vec![vec![0.9999, 0.0001], vec![0.0003, 0.9997]]).unwrap();
        let pi = markov_stationary(&t).unwrap();
        assert!((pi[0] - 0.75).abs() < 1e-10);
    }

    #[test]
    fn rescaling_power_and_root() {
        let t = two_state();
        let sq = t.rescaled(2.0).unwrap();
        assert!((sq.get(0, 0) - 0.86).abs() < 1e-14);
        let root = t.rescaled(0.5).unwrap();
        let back = root.rescaled(2.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((back.get(i, j) - t.get(i, j)).abs() < 1e-9);
            }
        }
        assert!(t.rescaled(1.0).unwrap() == t);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(TransitionMatrix::new(vec![vec![0.5, 0.4], vec![0.5, 0.5]]).is_err());
        assert!(TransitionMatrix::new(vec![vec![1.2, -0.2], vec![0.5, 0.5]]).is_err());
        let json = "[[0.5,0.5],[0.1,0.8]]";
        assert!(serde_json::from_str::<TransitionMatrix>(json).is_err());
    }
}
