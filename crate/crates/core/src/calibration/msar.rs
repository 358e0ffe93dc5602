//! Markov-switching AR(p): Hamilton filter, maximum likelihood, and the
//! per-regime OU refit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, KMeansOptions};
use super::optim::{minimize, Lbfgs};
use super::{ar_wls, ou_from_ar1, FitReport};
use crate::error::{Error, Result};
use crate::market_data::PriceSeries;
use crate::models::{ArRegime, MsArParams, OUParams, RegimeModel, TransitionMatrix};
use crate::numeric::{self, Matrix};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Filtered and one-step predicted regime probabilities.
///
/// Rows are indexed by observation. The first `order` rows have no
/// likelihood contribution and carry the initial distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterState {
    pub filtered: Vec<Vec<f64>>,
    pub predicted: Vec<Vec<f64>>,
    pub loglik: f64,
    pub regime_path: Vec<usize>,
    pub order: usize,
}

#[derive(Debug, Clone)]
struct Theta {
    mu: Vec<f64>,
    phi: Vec<Vec<f64>>,
    sigma2: Vec<f64>,
    pi: Matrix,
}

impl Theta {
    fn from_params(p: &MsArParams) -> Self {
        Self {
            mu: p.regimes.iter().map(|r| r.mu).collect(),
            phi: p.regimes.iter().map(|r| r.phi.clone()).collect(),
            sigma2: p.regimes.iter().map(|r| r.sigma2).collect(),
            pi: p.transition.rows().clone(),
        }
    }

    fn r(&self) -> usize {
        self.mu.len()
    }

    fn order(&self) -> usize {
        self.phi[0].len()
    }
}

fn stationary(pi: &Matrix) -> Vec<f64> {
    let r = pi.len();
    let uniform = vec![1.0 / r as f64; r];
    if r == 1 {
        return uniform;
    }
    // (P^T - I) x = 0 with the last equation replaced by sum(x) = 1
    let mut a = vec![vec![0.0; r]; r];
    for i in 0..r {
        for j in 0..r {
            a[i][j] = pi[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    a[r - 1] = vec![1.0; r];
    let mut b = vec![0.0; r];
    b[r - 1] = 1.0;
    match numeric::solve(&a, &b) {
        Some(x) if x.iter().all(|v| *v >= -1e-12) => {
            let x: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
            let s: f64 = x.iter().sum();
            x.iter().map(|v| v / s).collect()
        }
        _ => uniform,
    }
}

/// Flat `(n - p) x R` filter output.
struct Pass {
    filtered: Vec<f64>,
    predicted: Vec<f64>,
    loglik: f64,
}

fn forward(x: &[f64], th: &Theta) -> Result<Pass> {
    let (r, p) = (th.r(), th.order());
    let rows = x.len() - p;
    let mut filtered = vec![0.0; rows * r];
    let mut predicted = vec![0.0; rows * r];
    let half_log_var: Vec<f64> = th.sigma2.iter().map(|s| 0.5 * (LN_2PI + s.ln())).collect();
    let mut pred = stationary(&th.pi);
    let mut a = vec![0.0; r];
    let mut loglik = 0.0;
    for row in 0..rows {
        let t = row + p;
        let mut top = f64::NEG_INFINITY;
        for j in 0..r {
            let mean = th.mu[j] + (0..p).map(|k| th.phi[j][k] * x[t - k - 1]).sum::<f64>();
            let e = x[t] - mean;
            a[j] = pred[j].ln() - half_log_var[j] - 0.5 * e * e / th.sigma2[j];
            top = top.max(a[j]);
        }
        if !top.is_finite() {
            return Err(Error::ZeroLikelihood(t));
        }
        let sum: f64 = a.iter().map(|v| (v - top).exp()).sum();
        let lse = top + sum.ln();
        loglik += lse;
        let f = &mut filtered[row * r..(row + 1) * r];
        for j in 0..r {
            f[j] = (a[j] - lse).exp();
        }
        predicted[row * r..(row + 1) * r].copy_from_slice(&pred);
        for j in 0..r {
            pred[j] = (0..r).map(|i| f[i] * th.pi[i][j]).sum();
        }
    }
    Ok(Pass {
        filtered,
        predicted,
        loglik,
    })
}

fn loglik_only(x: &[f64], th: &Theta) -> f64 {
    forward(x, th).map_or(f64::NEG_INFINITY, |p| p.loglik)
}

fn expand(pass: &Pass, th: &Theta, n: usize) -> FilterState {
    let (r, p) = (th.r(), th.order());
    let init = stationary(&th.pi);
    let mut filtered = vec![init.clone(); p];
    let mut predicted = vec![init; p];
    filtered.extend(pass.filtered.chunks(r).map(|c| c.to_vec()));
    predicted.extend(pass.predicted.chunks(r).map(|c| c.to_vec()));
    let regime_path = filtered
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(j, _)| j)
                .unwrap()
        })
        .collect();
    debug_assert_eq!(filtered.len(), n);
    FilterState {
        filtered,
        predicted,
        loglik: pass.loglik,
        regime_path,
        order: p,
    }
}

/// Hamilton's forward recursion in the log domain.
pub fn hamilton_filter(s: &PriceSeries, p: &MsArParams) -> Result<FilterState> {
    p.validate()?;
    let x = s.values();
    if x.len() <= p.order {
        return Err(Error::TooFewPoints {
            needed: p.order + 1,
            have: x.len(),
        });
    }
    let th = Theta::from_params(p);
    let pass = forward(x, &th)?;
    Ok(expand(&pass, &th, x.len()))
}

/// Kim smoother: smoothed marginals and summed pairwise transition mass.
fn smooth(pass: &Pass, th: &Theta) -> (Vec<f64>, Matrix) {
    let r = th.r();
    let rows = pass.filtered.len() / r;
    let mut sm = pass.filtered.clone();
    let mut joint = vec![vec![0.0; r]; r];
    let mut ratio = vec![0.0; r];
    for row in (0..rows.saturating_sub(1)).rev() {
        for j in 0..r {
            let pr = pass.predicted[(row + 1) * r + j];
            ratio[j] = if pr > 0.0 { sm[(row + 1) * r + j] / pr } else { 0.0 };
        }
        for i in 0..r {
            let fi = pass.filtered[row * r + i];
            let mut acc = 0.0;
            for j in 0..r {
                let v = fi * th.pi[i][j] * ratio[j];
                joint[i][j] += v;
                acc += v;
            }
            sm[row * r + i] = acc;
        }
    }
    (sm, joint)
}

fn m_step(x: &[f64], th: &Theta, sm: &[f64], joint: &Matrix, var_floor: f64) -> Theta {
    let (r, p) = (th.r(), th.order());
    let mut next = th.clone();
    for j in 0..r {
        let w: Vec<f64> = sm.chunks(r).map(|c| c[j]).collect();
        if let Ok(fit) = ar_wls(x, p, p, Some(&w)) {
            if fit.sigma2.is_finite() && fit.phi.iter().all(|v| v.is_finite()) {
                next.mu[j] = fit.mu;
                next.phi[j] = fit.phi;
                next.sigma2[j] = fit.sigma2.max(var_floor);
            }
        }
        let total: f64 = joint[j].iter().sum();
        if total > 0.0 {
            next.pi[j] = joint[j].iter().map(|v| v / total).collect();
        }
    }
    next
}

/// EM until the log-likelihood gain falls below `tol` relative, or it
/// stops increasing.
fn em(x: &[f64], mut th: Theta, iters: usize, tol: f64, var_floor: f64) -> Result<(Theta, f64, Vec<f64>)> {
    let mut pass = forward(x, &th)?;
    let mut trace = vec![pass.loglik];
    for _ in 0..iters {
        let (sm, joint) = smooth(&pass, &th);
        let cand = m_step(x, &th, &sm, &joint, var_floor);
        let Ok(next) = forward(x, &cand) else { break };
        let gain = next.loglik - pass.loglik;
        if !(gain > 0.0) {
            break;
        }
        th = cand;
        pass = next;
        trace.push(pass.loglik);
        if gain < tol * (1.0 + pass.loglik.abs()) {
            break;
        }
    }
    Ok((th, pass.loglik, trace))
}

fn occupancy(pass: &Pass, r: usize) -> Vec<f64> {
    let rows = (pass.filtered.len() / r) as f64;
    (0..r)
        .map(|j| pass.filtered.chunks(r).map(|c| c[j]).sum::<f64>() / rows)
        .collect()
}

fn pack(th: &Theta) -> Vec<f64> {
    let mut v = Vec::new();
    for j in 0..th.r() {
        v.push(th.mu[j]);
        v.extend(&th.phi[j]);
        v.push(th.sigma2[j].ln());
    }
    let r = th.r();
    for row in &th.pi {
        let last = row[r - 1].max(1e-300);
        for &pij in &row[..r - 1] {
            v.push((pij.max(1e-300) / last).ln());
        }
    }
    v
}

fn unpack(v: &[f64], r: usize, p: usize) -> Theta {
    let mut it = v.iter().copied();
    let mut th = Theta {
        mu: vec![0.0; r],
        phi: vec![vec![0.0; p]; r],
        sigma2: vec![0.0; r],
        pi: vec![vec![0.0; r]; r],
    };
    for j in 0..r {
        th.mu[j] = it.next().unwrap();
        for k in 0..p {
            th.phi[j][k] = it.next().unwrap();
        }
        th.sigma2[j] = it.next().unwrap().exp();
    }
    for i in 0..r {
        let mut logits: Vec<f64> = (0..r - 1).map(|_| it.next().unwrap()).collect();
        logits.push(0.0);
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let s: f64 = e.iter().sum();
        th.pi[i] = e.iter().map(|v| v / s).collect();
    }
    th
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MsArFitOptions {
    pub n_starts: usize,
    pub seed: u64,
    /// EM iterations spent on every start before the best one is refined.
    pub screen_iters: usize,
    pub max_em_iters: usize,
    /// Finish with L-BFGS on the filter likelihood.
    pub polish: bool,
    pub polish_iters: usize,
}

impl Default for MsArFitOptions {
    fn default() -> Self {
        Self {
            n_starts: 10,
            seed: 0,
            screen_iters: 30,
            max_em_iters: 1000,
            polish: true,
            polish_iters: 200,
        }
    }
}

fn start_from_labels(z: &[f64], p: usize, labels: &[usize], r: usize, global: &super::ArFit) -> Theta {
    let mut th = Theta {
        mu: vec![global.mu; r],
        phi: vec![global.phi.clone(); r],
        sigma2: vec![global.sigma2; r],
        pi: vec![vec![0.0; r]; r],
    };
    for j in 0..r {
        let w: Vec<f64> = (p..z.len()).map(|t| if labels[t] == j { 1.0 } else { 0.0 }).collect();
        let members = w.iter().sum::<f64>();
        if members > (4 * (p + 2)) as f64 {
            if let Ok(fit) = ar_wls(z, p, p, Some(&w)) {
                if fit.sigma2 > 0.0 {
                    th.mu[j] = fit.mu;
                    th.phi[j] = fit.phi;
                    th.sigma2[j] = fit.sigma2;
                    continue;
                }
            }
        }
        // fall back to the global slope with this cluster's level
        let level = z
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l == j)
            .map(|(v, _)| *v)
            .sum::<f64>()
            / members.max(1.0);
        th.mu[j] = level * (1.0 - global.phi.iter().sum::<f64>());
    }
    let mut counts = vec![vec![1.0; r]; r];
    for t in 1..labels.len() {
        counts[labels[t - 1]][labels[t]] += 1.0;
    }
    for i in 0..r {
        let s: f64 = counts[i].iter().sum();
        th.pi[i] = counts[i].iter().map(|c| c / s).collect();
    }
    th
}

fn sorted_labels(z: &[f64], rows: &[Vec<f64>], r: usize, opts: &KMeansOptions) -> Vec<usize> {
    let fit = kmeans(rows, r, opts, None);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| fit.centroids[a][0].total_cmp(&fit.centroids[b][0]));
    let mut rank = vec![0; r];
    for (pos, &j) in order.iter().enumerate() {
        rank[j] = pos;
    }
    let _ = z;
    fit.labels.iter().map(|&l| rank[l]).collect()
}

fn starts(z: &[f64], p: usize, r: usize, n_starts: usize, seed: u64) -> Result<Vec<Theta>> {
    let global = ar_wls(z, p, p, None)?;
    let km = KMeansOptions {
        restarts: 3,
        seed,
        ..Default::default()
    };
    let mut out = Vec::new();
    // cluster on the level
    let level: Vec<Vec<f64>> = z.iter().map(|v| vec![*v]).collect();
    out.push(start_from_labels(z, p, &sorted_labels(z, &level, r, &km), r, &global));
    // cluster on level and local move size
    let moves: Vec<Vec<f64>> = (0..z.len())
        .map(|t| {
            let d = if t == 0 { 0.0 } else { (z[t] - z[t - 1]).abs() };
            vec![z[t], d]
        })
        .collect();
    let moves = super::kmeans::standardize(&moves);
    out.push(start_from_labels(z, p, &sorted_labels(z, &moves, r, &km), r, &global));
    // quantile bands of the level
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..r).map(|j| sorted[j * sorted.len() / r]).collect();
    let bands: Vec<usize> = z.iter().map(|v| cuts.iter().filter(|c| v >= c).count()).collect();
    out.push(start_from_labels(z, p, &bands, r, &global));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = out[0].clone();
    while out.len() < n_starts.max(1) {
        let mut th = base.clone();
        for j in 0..r {
            let g: f64 = rng.sample(StandardNormal);
            th.mu[j] += 0.5 * g * th.sigma2[j].sqrt();
            let h: f64 = rng.sample(StandardNormal);
            th.sigma2[j] *= (0.7 * h).exp();
            let stay = rng.gen_range(0.8..0.995);
            th.pi[j] = (0..r)
                .map(|k| if k == j { stay } else { (1.0 - stay) / (r - 1).max(1) as f64 })
                .collect();
        }
        out.push(th);
    }
    out.truncate(n_starts.max(1));
    Ok(out)
}

fn to_levels(th: &Theta, m: f64, sd: f64) -> Theta {
    let mut out = th.clone();
    for j in 0..th.r() {
        let sum_phi: f64 = th.phi[j].iter().sum();
        out.mu[j] = m * (1.0 - sum_phi) + sd * th.mu[j];
        out.sigma2[j] = th.sigma2[j] * sd * sd;
    }
    out
}

/// Multi-start maximum likelihood for an `r`-regime MS-AR(`p`).
///
/// Each start runs a few EM sweeps; the best continues EM to convergence
/// and is finished with L-BFGS on the filter likelihood. Regimes come back
/// sorted by their probability-weighted mean level.
pub fn fit_msar(
    s: &PriceSeries,
    r: usize,
    p: usize,
    opts: MsArFitOptions,
) -> Result<(MsArParams, FilterState, FitReport)> {
    if r < 1 || !(1..=4).contains(&p) {
        return Err(Error::invalid("need R >= 1 and 1 <= p <= 4"));
    }
    let x = s.values();
    let needed = 50 * r * (p + 2);
    if x.len() < needed {
        return Err(Error::TooFewPoints {
            needed,
            have: x.len(),
        });
    }
    let (m, var) = numeric::mean_var(x);
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let sd = var.sqrt();
    let z: Vec<f64> = x.iter().map(|v| (v - m) / sd).collect();
    let var_floor = 1e-8;

    let (best, trace) = if r == 1 {
        let fit = ar_wls(&z, p, p, None)?;
        let th = Theta {
            mu: vec![fit.mu],
            phi: vec![fit.phi],
            sigma2: vec![fit.sigma2],
            pi: vec![vec![1.0]],
        };
        (th, Vec::new())
    } else {
        let mut screened: Vec<(f64, Theta)> = Vec::new();
        let mut degenerate = None;
        for th in starts(&z, p, r, opts.n_starts, opts.seed)? {
            let Ok((th, ll, _)) = em(&z, th, opts.screen_iters, 1e-10, var_floor) else {
                continue;
            };
            let occ = occupancy(&forward(&z, &th)?, r);
            if let Some((j, o)) = occ.iter().enumerate().find(|(_, o)| **o < 0.01) {
                degenerate = Some((j, *o));
                continue;
            }
            screened.push((ll, th));
        }
        let Some((_, th)) = screened.into_iter().max_by(|a, b| a.0.total_cmp(&b.0)) else {
            return Err(match degenerate {
                Some((regime, occupancy)) => Error::LabelDegeneracy { regime, occupancy },
                None => Error::OptimizerDiverged("no MS-AR start produced a finite likelihood".into()),
            });
        };
        let (mut th, mut ll, mut trace) = em(&z, th, opts.max_em_iters, 1e-12, var_floor)?;
        if opts.polish {
            let n = (z.len() - p) as f64;
            let f = |v: &[f64]| -loglik_only(&z, &unpack(v, r, p)) / n;
            let lb = Lbfgs {
                max_iter: opts.polish_iters,
                ..Default::default()
            };
            if let Ok(min) = minimize(f, pack(&th), lb) {
                let cand = unpack(&min.x, r, p);
                let cand_ll = loglik_only(&z, &cand);
                if cand_ll >= ll {
                    trace.extend(min.trace.iter().skip(1).map(|v| -v * n));
                    th = cand;
                    ll = cand_ll;
                }
            }
        }
        let _ = ll;
        (th, trace)
    };

    // sort regimes by weighted mean level
    let pass = forward(&z, &best)?;
    let (sm, _) = smooth(&pass, &best);
    let mut key: Vec<(f64, usize)> = (0..r)
        .map(|j| {
            let (mut num, mut den) = (0.0, 0.0);
            for (row, c) in sm.chunks(r).enumerate() {
                num += c[j] * z[row + p];
                den += c[j];
            }
            (num / den.max(1e-300), j)
        })
        .collect();
    key.sort_by(|a, b| a.0.total_cmp(&b.0));
    let perm: Vec<usize> = key.iter().map(|k| k.1).collect();
    let occ = occupancy(&pass, r);
    if let Some((pos, &j)) = perm.iter().enumerate().find(|(_, &j)| occ[j] < 0.01) {
        return Err(Error::LabelDegeneracy {
            regime: pos,
            occupancy: occ[j],
        });
    }
    let lev = to_levels(&best, m, sd);
    let regimes = perm
        .iter()
        .map(|&j| ArRegime {
            mu: lev.mu[j],
            phi: lev.phi[j].clone(),
            sigma2: lev.sigma2[j],
        })
        .collect();
    let rows: Matrix = perm
        .iter()
        .map(|&i| perm.iter().map(|&j| lev.pi[i][j]).collect())
        .collect();
    let params = MsArParams::new(regimes, TransitionMatrix::project(rows)?)?;
    let state = hamilton_filter(s, &params)?;
    let n_obs = x.len() - p;
    let n_params = r * (p + 2) + r * (r - 1);
    let mut report = FitReport::new(None, state.loglik, n_params, n_obs)
        .with("regimes", r as f64)
        .with("order", p as f64);
    for (pos, &j) in perm.iter().enumerate() {
        report = report.with(&format!("occupancy_{pos}"), occ[j]);
    }
    report.loglik_trace = trace.iter().map(|v| v - n_obs as f64 * sd.ln()).collect();
    Ok((params, state, report))
}

/// Per-regime OU fits on the argmax regime path.
///
/// Only transitions that stay inside one regime enter that regime's AR(1)
/// fit. The transition matrix comes from path counts with +1 smoothing and
/// is expressed per observation step.
pub fn fit_regime_ou(s: &PriceSeries, f: &FilterState) -> Result<RegimeModel> {
    let x = s.values();
    if f.regime_path.len() != x.len() {
        return Err(Error::invalid("filter state does not match the series"));
    }
    let r = f.filtered.first().map_or(0, |row| row.len());
    if r == 0 {
        return Err(Error::EmptySeries);
    }
    let labels = &f.regime_path;
    let (_, var) = numeric::mean_var(x);
    let dt = s.dt_years();
    let mut fits: Vec<OUParams> = Vec::with_capacity(r);
    for j in 0..r {
        let points = labels.iter().filter(|l| **l == j).count();
        if points < 200 {
            return Err(Error::RegimeTooSmall { regime: j, points });
        }
        let w: Vec<f64> = (1..x.len())
            .map(|t| if labels[t] == j && labels[t - 1] == j { 1.0 } else { 0.0 })
            .collect();
        let fit = ar_wls(x, 1, 1, Some(&w))?;
        fits.push(ou_from_ar1(&fit, dt, var)?);
    }
    let mut counts = vec![vec![1.0; r]; r];
    for t in 1..labels.len() {
        counts[labels[t - 1]][labels[t]] += 1.0;
    }
    let mut perm: Vec<usize> = (0..r).collect();
    perm.sort_by(|&a, &b| fits[a].theta.total_cmp(&fits[b].theta));
    let per_regime = perm.iter().map(|&j| fits[j]).collect();
    let rows: Matrix = perm
        .iter()
        .map(|&i| {
            let s: f64 = counts[i].iter().sum();
            perm.iter().map(|&j| counts[i][j] / s).collect()
        })
        .collect();
    let mut model = RegimeModel::new(per_regime, TransitionMatrix::project(rows)?)?;
    model.transition_dt = dt;
    model.validate()?;
    Ok(model)
}

/// Simulate an MS-AR path; returns values and the true regime path.
pub fn simulate_msar(p: &MsArParams, n: usize, r0: usize, seed: u64) -> Result<(Vec<f64>, Vec<usize>)> {
    p.validate()?;
    if r0 >= p.n_regimes() {
        return Err(Error::invalid("initial regime out of range"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = p.order;
    let start = p.regimes[r0].long_run_mean();
    let start = if start.is_finite() { start } else { p.regimes[r0].mu };
    let mut x = vec![start; order];
    let mut states = vec![r0; order];
    let mut reg = r0;
    while x.len() < n {
        let u: f64 = rng.gen();
        reg = crate::models::sample_next_regime(reg, &p.transition, u);
        let z: f64 = rng.sample(StandardNormal);
        let a = &p.regimes[reg];
        let t = x.len();
        let v = a.mu + (0..order).map(|k| a.phi[k] * x[t - k - 1]).sum::<f64>() + a.sigma2.sqrt() * z;
        x.push(v);
        states.push(reg);
    }
    x.truncate(n);
    states.truncate(n);
    Ok((x, states))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_regime(mu: (f64, f64), s2: (f64, f64), stay: f64) -> MsArParams {
        MsArParams::new(
            vec![
                ArRegime { mu: mu.0, phi: vec![0.9], sigma2: s2.0 },
                ArRegime { mu: mu.1, phi: vec![0.9], sigma2: s2.1 },
            ],
            TransitionMatrix::new(vec![vec![stay, 1.0 - stay], vec![1.0 - stay, stay]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn rows_normalised() {
        let p = two_regime((0.0, 50.0), (1.0, 25.0), 0.98);
        let (x, _) = simulate_msar(&p, 3000, 0, 1).unwrap();
        let f = hamilton_filter(&PriceSeries::hourly(x).unwrap(), &p).unwrap();
        for (a, b) in f.filtered.iter().zip(&f.predicted) {
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
        assert!(f.loglik.is_finite());
    }

    #[test]
    fn single_regime_matches_ar_loglik() {
        let x = super::super::testdata::ar_path(2.0, &[0.6, 0.2], 1.5, 2000, 3);
        let fit = ar_wls(&x, 2, 2, None).unwrap();
        let p = MsArParams::new(
            vec![ArRegime { mu: fit.mu, phi: fit.phi.clone(), sigma2: fit.sigma2 }],
            TransitionMatrix::identity(1),
        )
        .unwrap();
        let f = hamilton_filter(&PriceSeries::hourly(x).unwrap(), &p).unwrap();
        assert!((f.loglik - fit.loglik).abs() < 1e-8 * fit.loglik.abs());
        assert!(f.filtered.iter().all(|r| r == &vec![1.0]));
    }

    #[test]
    fn identical_regimes_keep_the_prior() {
        let p = two_regime((1.0, 1.0), (2.0, 2.0), 0.9);
        let x = super::super::testdata::ar_path(1.0, &[0.9], 2f64.sqrt(), 500, 5);
        let f = hamilton_filter(&PriceSeries::hourly(x).unwrap(), &p).unwrap();
        for (a, b) in f.filtered.iter().zip(&f.predicted) {
            assert!((a[0] - 0.5).abs() < 1e-12 && (b[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn em_and_polish_recover_two_regimes() {
        let truth = two_regime((0.0, 50.0), (1.0, 25.0), 0.98);
        let (x, states) = simulate_msar(&truth, 20_000, 0, 7).unwrap();
        let s = PriceSeries::hourly(x).unwrap();
        let opts = MsArFitOptions { n_starts: 4, ..Default::default() };
        let (p, f, rep) = fit_msar(&s, 2, 1, opts).unwrap();
        let hits = f.regime_path.iter().zip(&states).filter(|(a, b)| a == b).count();
        assert!(hits as f64 / states.len() as f64 > 0.9);
        assert!((p.regimes[1].mu / 50.0 - 1.0).abs() < 0.15, "{p:?}");
        assert!((p.regimes[1].sigma2 / 25.0 - 1.0).abs() < 0.15, "{p:?}");
        assert!(rep.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert!((rep.bic - (rep.n_params as f64 * (rep.n_obs as f64).ln() - 2.0 * rep.loglik)).abs() < 1e-6);
    }

    #[test]
    fn one_regime_is_least_squares() {
        let x = super::super::testdata::ar_path(3.0, &[0.5, 0.3], 2.0, 3000, 9);
        let ols = ar_wls(&x, 2, 2, None).unwrap();
        let (p, f, _) = fit_msar(&PriceSeries::hourly(x).unwrap(), 1, 2, MsArFitOptions::default()).unwrap();
        let r = &p.regimes[0];
        assert!((r.mu - ols.mu).abs() < 1e-6);
        assert!((r.phi[0] - ols.phi[0]).abs() < 1e-6 && (r.phi[1] - ols.phi[1]).abs() < 1e-6);
        assert!((r.sigma2 - ols.sigma2).abs() < 1e-6 * ols.sigma2);
        assert!(f.regime_path.iter().all(|&j| j == 0));
    }

    #[test]
    fn regime_ou_single_regime_equals_plain_fit() {
        let p = OUParams::new(300.0, 50.0, 500.0).unwrap();
        let x = super::super::testdata::ou_path(&p, 50.0, 1.0 / 8760.0, 5000, 2);
        let s = PriceSeries::hourly(x).unwrap();
        let state = FilterState {
            filtered: vec![vec![1.0]; s.len()],
            predicted: vec![vec![1.0]; s.len()],
            loglik: 0.0,
            regime_path: vec![0; s.len()],
            order: 1,
        };
        let m = fit_regime_ou(&s, &state).unwrap();
        let (plain, _) = super::super::fit_ou_mle(&s).unwrap();
        assert_eq!(m.per_regime[0], plain);
    }

    #[test]
    fn small_regime_is_rejected() {
        let s = PriceSeries::hourly((0..1000).map(|i| (i as f64 * 0.37).sin() * 10.0 + 50.0).collect()).unwrap();
        let mut path = vec![0; 1000];
        path[500..600].iter_mut().for_each(|v| *v = 1);
        let state = FilterState {
            filtered: vec![vec![0.5, 0.5]; 1000],
            predicted: vec![vec![0.5, 0.5]; 1000],
            loglik: 0.0,
            regime_path: path,
            order: 1,
        };
        assert!(matches!(
            fit_regime_ou(&s, &state),
            Err(Error::RegimeTooSmall { regime: 1, points: 100 })
        ));
    }
}
