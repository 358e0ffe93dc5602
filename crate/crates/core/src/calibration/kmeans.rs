//! k-means on standardized rolling features and the elbow rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::RollingFeatures;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Below this log-inertia second difference the curve counts as flat
    /// and one cluster is chosen.
    pub flat_threshold: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            seed: 0,
            max_iter: 300,
            flat_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElbowReport {
    pub k_candidates: Vec<usize>,
    pub inertia: Vec<f64>,
    /// `ln I(k-1) - 2 ln I(k) + ln I(k+1)` for each candidate (0 for k = 1).
    pub log_second_difference: Vec<f64>,
    pub chosen_k: usize,
    /// Cluster label per defined feature row, for `chosen_k`.
    pub labels: Vec<usize>,
    /// Series index of each defined feature row.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct Clustering {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], c: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, cj) in c.iter().enumerate() {
        let d = dist2(x, cj);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus<R: Rng>(data: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut c = vec![data[rng.gen_range(0..data.len())].clone()];
    let mut d: Vec<f64> = data.iter().map(|x| dist2(x, &c[0])).collect();
    while c.len() < k {
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = data.len() - 1;
            for (i, di) in d.iter().enumerate() {
                if u < *di {
                    pick = i;
                    break;
                }
                u -= di;
            }
            pick
        } else {
            rng.gen_range(0..data.len())
        };
        c.push(data[next].clone());
        for (di, x) in d.iter_mut().zip(data) {
            *di = di.min(dist2(x, c.last().unwrap()));
        }
    }
    c
}

fn lloyd(data: &[Vec<f64>], mut c: Vec<Vec<f64>>, max_iter: usize) -> Clustering {
    let k = c.len();
    let dim = data[0].len();
    let mut labels = vec![usize::MAX; data.len()];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, x) in data.iter().enumerate() {
            let j = nearest(x, &c).0;
            if labels[i] != j {
                labels[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &j) in data.iter().zip(&labels) {
            counts[j] += 1;
            sums[j].iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        for j in 0..k {
            if counts[j] > 0 {
                c[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            } else {
                // re-seed an empty cluster at the worst-served point
                let far = (0..data.len())
                    .max_by(|&a, &b| {
                        dist2(&data[a], &c[labels[a]]).total_cmp(&dist2(&data[b], &c[labels[b]]))
                    })
                    .unwrap();
                c[j] = data[far].clone();
                labels[far] = j;
            }
        }
    }
    for (i, x) in data.iter().enumerate() {
        labels[i] = nearest(x, &c).0;
    }
    let inertia = data.iter().zip(&labels).map(|(x, &j)| dist2(x, &c[j])).sum();
    Clustering {
        centroids: c,
        labels,
        inertia,
    }
}

/// Best of `restarts` k-means++ runs, plus one run warm-started from
/// `warm` with an extra centroid at the worst-served point.
pub(crate) fn kmeans(
    data: &[Vec<f64>],
    k: usize,
    opts: &KMeansOptions,
    warm: Option<&Clustering>,
) -> Clustering {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut best: Option<Clustering> = None;
    let mut consider = |c: Clustering| {
        if best.as_ref().is_none_or(|b| c.inertia < b.inertia) {
            best = Some(c);
        }
    };
    for _ in 0..opts.restarts.max(1) {
        let init = plus_plus(data, k, &mut rng);
        consider(lloyd(data, init, opts.max_iter));
    }
    if let Some(w) = warm.filter(|w| w.centroids.len() + 1 == k) {
        let far = (0..data.len())
            .max_by(|&a, &b| {
                dist2(&data[a], &w.centroids[w.labels[a]])
                    .total_cmp(&dist2(&data[b], &w.centroids[w.labels[b]]))
            })
            .unwrap();
        let mut init = w.centroids.clone();
        init.push(data[far].clone());
        consider(lloyd(data, init, opts.max_iter));
    }
    best.unwrap()
}

/// Per-column zero mean, unit variance; constant columns are only centered.
pub(crate) fn standardize(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = rows[0].len();
    let n = rows.len() as f64;
    let mut out = rows.to_vec();
    for c in 0..dim {
        let m = rows.iter().map(|r| r[c]).sum::<f64>() / n;
        let v = rows.iter().map(|r| (r[c] - m).powi(2)).sum::<f64>() / n;
        let sd = if v > 0.0 { v.sqrt() } else { 1.0 };
        out.iter_mut().for_each(|r| r[c] = (r[c] - m) / sd);
    }
    out
}

/// k-means inertia for `k = 1..=k_max` and the elbow choice.
pub fn kmeans_regime_count(f: &RollingFeatures, k_max: usize, opts: KMeansOptions) -> Result<ElbowReport> {
    let (rows, raw) = f.defined_rows();
    elbow(&raw, rows, k_max, &opts)
}

pub(crate) fn elbow(
    raw: &[Vec<f64>],
    rows: Vec<usize>,
    k_max: usize,
    opts: &KMeansOptions,
) -> Result<ElbowReport> {
    if k_max < 2 {
        return Err(Error::invalid("k_max must be >= 2"));
    }
    if raw.len() < 10 * k_max {
        return Err(Error::TooFewPoints {
            needed: 10 * k_max,
            have: raw.len(),
        });
    }
    let data = standardize(raw);
    let mut fits: Vec<Clustering> = Vec::with_capacity(k_max + 1);
    for k in 1..=k_max + 1 {
        let fit = kmeans(&data, k, opts, fits.last());
        fits.push(fit);
    }
    // warm starts make this hold by construction; keep it exact regardless
    for k in 1..fits.len() {
        if fits[k].inertia > fits[k - 1].inertia {
            fits[k].inertia = fits[k - 1].inertia;
        }
    }
    let floor = fits[0].inertia.max(f64::MIN_POSITIVE) * 1e-12;
    let li: Vec<f64> = fits.iter().map(|c| c.inertia.max(floor).ln()).collect();
    let mut d2 = vec![0.0; k_max];
    for k in 2..=k_max {
        d2[k - 1] = li[k - 2] - 2.0 * li[k - 1] + li[k];
    }
    let (arg, max) = d2
        .iter()
        .enumerate()
        .skip(1)
        .fold((1, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    let chosen_k = if max >= opts.flat_threshold { arg + 1 } else { 1 };
    Ok(ElbowReport {
        k_candidates: (1..=k_max).collect(),
        inertia: fits[..k_max].iter().map(|c| c.inertia).collect(),
        log_second_difference: d2,
        chosen_k,
        labels: fits[chosen_k - 1].labels.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use rand_distr::{Distribution, StandardNormal};

    use super::*;

    fn blobs(centres: &[[f64; 3]], n_each: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for c in centres {
            for _ in 0..n_each {
                out.push(c.iter().map(|m| { let g: f64 = StandardNormal.sample(&mut rng); m + g }).collect::<Vec<f64>>());
            }
        }
        out
    }

    fn run(data: &[Vec<f64>], k_max: usize) -> ElbowReport {
        elbow(data, (0..data.len()).collect(), k_max, &KMeansOptions::default()).unwrap()
    }

    #[test]
    fn three_separated_blobs() {
        let r = run(&blobs(&[[0.0; 3], [10.0, 0.0, 10.0], [5.0, 10.0, 0.0]], 300, 1), 8);
        assert_eq!(r.chosen_k, 3, "{r:?}");
        assert!(r.inertia.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn collinear_blobs_still_three() {
        let r = run(&blobs(&[[0.0; 3], [10.0, 10.0, 10.0], [20.0, 20.0, 20.0]], 300, 2), 8);
        assert_eq!(r.chosen_k, 3, "{r:?}");
    }

    #[test]
    fn single_blob() {
        let r = run(&blobs(&[[0.0; 3]], 900, 3), 8);
        assert_eq!(r.chosen_k, 1, "{r:?}");
        assert!(r.inertia.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn two_blobs() {
        let r = run(&blobs(&[[0.0; 3], [8.0, 8.0, 0.0]], 400, 4), 6);
        assert_eq!(r.chosen_k, 2, "{r:?}");
    }

    #[test]
    fn too_few_points() {
        let data = blobs(&[[0.0; 3]], 20, 5);
        assert!(matches!(
            elbow(&data, (0..20).collect(), 5, &KMeansOptions::default()),
            Err(Error::TooFewPoints { needed: 50, have: 20 })
        ));
    }

    #[test]
    fn seeded_runs_repeat() {
        let data = blobs(&[[0.0; 3], [5.0, 5.0, 5.0]], 200, 6);
        assert_eq!(run(&data, 5), run(&data, 5));
    }
}
