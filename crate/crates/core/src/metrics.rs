//! Tail-sensitive distances between an empirical and a simulated price
//! distribution, and model ranking by them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::{quantile_sorted, Sample};

/// Floor applied to simulated bin masses before taking logs.
pub const MASS_FLOOR: f64 = 1e-12;
const MAX_BINS: usize = 5000;
const GRID_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub alpha_tail: f64,
    pub kl_weight: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            alpha_tail: 0.95,
            kl_weight: 5.0,
        }
    }
}

/// Empirical and simulated bin masses on shared edges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramPair {
    pub edges: Vec<f64>,
    pub p_mass: Vec<f64>,
    pub s_mass: Vec<f64>,
    pub tail_start: f64,
}

fn merged(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn masses(sorted: &[f64], lo: f64, width: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0usize; bins];
    for &x in sorted {
        let k = (((x - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = sorted.len() as f64;
    counts.iter().map(|&c| c as f64 / n).collect()
}

/// Freedman–Diaconis bins on the pooled sample, capped at 5000 bins.
pub fn histogram_pair(emp: &Sample, sim: &Sample, alpha_tail: f64) -> Result<HistogramPair> {
    check_alpha(alpha_tail)?;
    let pooled = merged(emp.sorted(), sim.sorted());
    let lo = pooled[0];
    let hi = *pooled.last().unwrap();
    let range = hi - lo;
    let iqr = quantile_sorted(&pooled, 0.75) - quantile_sorted(&pooled, 0.25);
    let bins = if range == 0.0 {
        1
    } else {
        let fd = 2.0 * iqr / (pooled.len() as f64).cbrt();
        if fd > 0.0 {
            ((range / fd).ceil() as usize).clamp(1, MAX_BINS)
        } else {
            ((pooled.len() as f64).sqrt().ceil() as usize).clamp(1, MAX_BINS)
        }
    };
    let width = if range == 0.0 { 1.0 } else { range / bins as f64 };
    let edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
    Ok(HistogramPair {
        edges,
        p_mass: masses(emp.sorted(), lo, width, bins),
        s_mass: masses(sim.sorted(), lo, width, bins),
        tail_start: quantile_sorted(emp.sorted(), alpha_tail),
    })
}

fn check_alpha(alpha_tail: f64) -> Result<()> {
    if !(alpha_tail > 0.0 && alpha_tail < 1.0) {
        return Err(Error::invalid("alpha_tail must lie in (0, 1)"));
    }
    Ok(())
}

impl HistogramPair {
    /// `sum_b w_b [P ln(P/S) - P + S]` with `S` floored at `MASS_FLOOR`.
    ///
    /// Each bin term is non-negative, and with `w = 1` the sum is the plain
    /// KL divergence up to the mass floor.
    pub fn weighted_kl(&self, weight: f64) -> f64 {
        let mut acc = 0.0;
        for b in 0..self.p_mass.len() {
            let p = self.p_mass[b];
            let raw = self.s_mass[b];
            let w = if self.edges[b + 1] > self.tail_start { weight } else { 1.0 };
            let term = if p > 0.0 {
                let s = raw.max(MASS_FLOOR);
                p * (p / s).ln() - p + s
            } else {
                raw
            };
            acc += w * term.max(0.0);
        }
        acc
    }

    /// Plain `sum_{P>0} P ln(P/S)`.
    pub fn kl(&self) -> f64 {
        self.p_mass
            .iter()
            .zip(&self.s_mass)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, s)| p * (p / s.max(MASS_FLOOR)).ln())
            .sum()
    }
}

/// Right-tail weighted KL of `emp` against `sim`; tail bins start at the
/// empirical `alpha_tail` quantile.
pub fn weighted_kl_right(emp: &Sample, sim: &Sample, alpha_tail: f64, weight: f64) -> Result<f64> {
    if !(weight >= 1.0 && weight.is_finite()) {
        return Err(Error::invalid("tail weight must be >= 1"));
    }
    Ok(histogram_pair(emp, sim, alpha_tail)?.weighted_kl(weight))
}

/// `int_{alpha}^{1} |q_u(emp) - q_u(sim)| du`, trapezoidal on 1000 points.
pub fn tail_wasserstein(emp: &Sample, sim: &Sample, alpha_tail: f64) -> Result<f64> {
    check_alpha(alpha_tail)?;
    let h = (1.0 - alpha_tail) / (GRID_POINTS - 1) as f64;
    let gap = |i: usize| {
        let u = if i == GRID_POINTS - 1 { 1.0 } else { alpha_tail + i as f64 * h };
        (quantile_sorted(emp.sorted(), u) - quantile_sorted(sim.sorted(), u)).abs()
    };
    let mut acc = 0.5 * (gap(0) + gap(GRID_POINTS - 1));
    for i in 1..GRID_POINTS - 1 {
        acc += gap(i);
    }
    Ok(acc * h)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub name: String,
    /// `None` marks a metric that is not applicable to this candidate.
    pub weighted_kl: Option<f64>,
    pub tail_wasserstein: Option<f64>,
    pub rank: usize,
    pub winner: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRanking {
    pub alpha_tail: f64,
    pub kl_weight: f64,
    pub candidates: Vec<CandidateScore>,
}

impl ModelRanking {
    pub fn winner(&self) -> &CandidateScore {
        self.candidates.iter().find(|c| c.winner).unwrap()
    }
}

fn finite(v: Result<f64>) -> Option<f64> {
    v.ok().filter(|x| x.is_finite())
}

/// Scores every candidate; ranks by tail Wasserstein, ties broken by
/// weighted KL. Candidates keep their input order in the report.
pub fn model_select(emp: &Sample, candidates: &[(String, Sample)], opts: MetricOptions) -> Result<ModelRanking> {
    if candidates.len() < 2 {
        return Err(Error::invalid("model selection needs at least two candidates"));
    }
    check_alpha(opts.alpha_tail)?;
    let mut scores: Vec<CandidateScore> = candidates
        .iter()
        .map(|(name, s)| CandidateScore {
            name: name.clone(),
            weighted_kl: finite(weighted_kl_right(emp, s, opts.alpha_tail, opts.kl_weight)),
            tail_wasserstein: finite(tail_wasserstein(emp, s, opts.alpha_tail)),
            rank: 0,
            winner: false,
        })
        .collect();
    let key = |v: Option<f64>| v.unwrap_or(f64::INFINITY);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        key(scores[a].tail_wasserstein)
            .total_cmp(&key(scores[b].tail_wasserstein))
            .then(key(scores[a].weighted_kl).total_cmp(&key(scores[b].weighted_kl)))
    });
    for (rank, &i) in order.iter().enumerate() {
        scores[i].rank = rank + 1;
    }
    scores[order[0]].winner = true;
    Ok(ModelRanking {
        alpha_tail: opts.alpha_tail,
        kl_weight: opts.kl_weight,
        candidates: scores,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn sample(v: Vec<f64>) -> Sample {
        Sample::prices(v).unwrap()
    }

    #[test]
    fn identical_samples_score_zero() {
        let a = sample(normals(10_000, 1));
        assert_eq!(weighted_kl_right(&a, &a, 0.95, 5.0).unwrap(), 0.0);
        assert_eq!(tail_wasserstein(&a, &a, 0.95).unwrap(), 0.0);
    }

    #[test]
    fn unit_weight_is_plain_kl() {
        let a = sample(normals(20_000, 1));
        let b = sample(normals(20_000, 2).iter().map(|v| 0.3 + 1.2 * v).collect());
        let h = histogram_pair(&a, &b, 0.95).unwrap();
        assert!((h.weighted_kl(1.0) - h.kl()).abs() < 1e-8);
        assert!((h.p_mass.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!((h.s_mass.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(h.edges.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn truncated_tail_is_punished_by_the_weight() {
        let emp = normals(1_000_000, 3);
        let q = quantile_sorted(sample(emp.clone()).sorted(), 0.95);
        let sim: Vec<f64> = normals(1_000_000, 4).into_iter().filter(|v| *v <= q).collect();
        let (a, b) = (sample(emp), sample(sim));
        let weighted = weighted_kl_right(&a, &b, 0.95, 5.0).unwrap();
        let plain = weighted_kl_right(&a, &b, 0.95, 1.0).unwrap();
        assert!(weighted > plain && plain > 0.0);
    }

    #[test]
    fn shift_moves_tail_wasserstein_by_c_times_tail_mass() {
        let a = normals(5_000, 5);
        let b: Vec<f64> = a.iter().map(|v| v + 2.5).collect();
        let w = tail_wasserstein(&sample(a), &sample(b), 0.95).unwrap();
        assert!((w - 2.5 * 0.05).abs() < 1e-12);
    }

    #[test]
    fn perfect_candidate_wins() {
        let emp = normals(5_000, 6);
        let cands = vec![
            ("wide".to_string(), sample(emp.iter().map(|v| 2.0 * v).collect())),
            ("same".to_string(), sample(emp.clone())),
            ("shifted".to_string(), sample(emp.iter().map(|v| v + 1.0).collect())),
        ];
        let r = model_select(&sample(emp), &cands, MetricOptions::default()).unwrap();
        let w = r.winner();
        assert_eq!(w.name, "same");
        assert_eq!(w.weighted_kl, Some(0.0));
        assert_eq!(w.tail_wasserstein, Some(0.0));
    }

    #[test]
    fn ranking_survives_common_rescaling() {
        let emp = normals(5_000, 7);
        let build = |b: f64| {
            let t = |v: &f64| 10.0 + b * v;
            let e: Vec<f64> = emp.iter().map(t).collect();
            let c = vec![
                ("a".to_string(), sample(normals(5_000, 8).iter().map(|v| t(&(1.5 * v))).collect())),
                ("b".to_string(), sample(normals(5_000, 9).iter().map(|v| t(&(v + 0.2))).collect())),
                ("c".to_string(), sample(normals(5_000, 10).iter().map(t).collect())),
            ];
            model_select(&sample(e), &c, MetricOptions::default()).unwrap()
        };
        let (r1, r2) = (build(1.0), build(2.0));
        let ranks = |r: &ModelRanking| r.candidates.iter().map(|c| c.rank).collect::<Vec<_>>();
        assert_eq!(ranks(&r1), ranks(&r2));
        for (c1, c2) in r1.candidates.iter().zip(&r2.candidates) {
            let (w1, w2) = (c1.tail_wasserstein.unwrap(), c2.tail_wasserstein.unwrap());
            assert!((w2 - 2.0 * w1).abs() < 1e-9 * w2.max(1.0));
        }
    }

    #[test]
    fn needs_two_candidates() {
        let a = sample(vec![1.0, 2.0]);
        assert!(model_select(&a, &[("x".into(), a.clone())], MetricOptions::default()).is_err());
    }

    proptest! {
        #[test]
        fn metrics_are_non_negative_and_order_free(
            a in prop::collection::vec(-100.0f64..100.0, 5..200),
            b in prop::collection::vec(-100.0f64..100.0, 5..200),
            w in 1.0f64..10.0,
        ) {
            let (sa, sb) = (sample(a.clone()), sample(b.clone()));
            let kl = weighted_kl_right(&sa, &sb, 0.9, w).unwrap();
            let tw = tail_wasserstein(&sa, &sb, 0.9).unwrap();
            prop_assert!(kl >= 0.0 && tw >= 0.0);
            let mut ra = a.clone();
            ra.reverse();
            prop_assert_eq!(tw, tail_wasserstein(&sample(ra.clone()), &sb, 0.9).unwrap());
            prop_assert_eq!(kl, weighted_kl_right(&sample(ra), &sb, 0.9, w).unwrap());
        }

        #[test]
        fn weighted_kl_monotone_in_weight(
            a in prop::collection::vec(0.0f64..50.0, 10..200),
            b in prop::collection::vec(0.0f64..50.0, 10..200),
            w1 in 1.0f64..5.0,
            dw in 0.0f64..5.0,
        ) {
            let h = histogram_pair(&sample(a), &sample(b), 0.9).unwrap();
            prop_assert!(h.weighted_kl(w1 + dw) >= h.weighted_kl(w1));
        }

        #[test]
        fn tail_wasserstein_triangle(
            a in prop::collection::vec(-10.0f64..10.0, 5..100),
            b in prop::collection::vec(-10.0f64..10.0, 5..100),
            c in prop::collection::vec(-10.0f64..10.0, 5..100),
        ) {
            let (sa, sb, sc) = (sample(a), sample(b), sample(c));
            let ac = tail_wasserstein(&sa, &sc, 0.95).unwrap();
            let ab = tail_wasserstein(&sa, &sb, 0.95).unwrap();
            let bc = tail_wasserstein(&sb, &sc, 0.95).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }
    }
}
