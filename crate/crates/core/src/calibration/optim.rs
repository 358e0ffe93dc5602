//! Limited-memory BFGS on numerical gradients.
//!
//! Every accepted iterate satisfies an Armijo decrease, so the objective
//! trace is monotone.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Lbfgs {
    pub max_iter: usize,
    /// Stop when `|f_k - f_{k+1}| < f_tol * (1 + |f_k|)`.
    pub f_tol: f64,
    /// Stop when the largest gradient entry is below this.
    pub g_tol: f64,
    pub memory: usize,
}

impl Default for Lbfgs {
    fn default() -> Self {
        Self {
            max_iter: 500,
            f_tol: 1e-12,
            g_tol: 1e-8,
            memory: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting at `f(x0)`.
    pub trace: Vec<f64>,
}

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

pub(crate) fn gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-5 * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let up = eval(f, &xp);
            xp[i] = x[i] - h;
            let dn = eval(f, &xp);
            xp[i] = x[i];
            if up.is_finite() && dn.is_finite() {
                (up - dn) / (2.0 * h)
            } else {
                0.0
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn direction(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter().map(|v| -v).collect()
}

pub(crate) fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: Vec<f64>, opts: Lbfgs) -> Result<Minimum> {
    let mut x = x0;
    let mut fx = eval(&f, &x);
    if !fx.is_finite() {
        return Err(Error::OptimizerDiverged("objective not finite at the start".into()));
    }
    let mut g = gradient(&f, &x);
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut trace = vec![fx];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if g.iter().all(|v| v.abs() < opts.g_tol) {
            converged = true;
            break;
        }
        let mut d = direction(&g, &mem);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            mem.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let mut step = if mem.is_empty() {
            1.0 / d.iter().map(|v| v.abs()).fold(1.0, f64::max)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..50 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let fn_ = eval(&f, &xn);
            if fn_ <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fn_));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_)) = accepted else {
            if mem.is_empty() {
                converged = true;
                break;
            }
            mem.clear();
            continue;
        };
        iterations += 1;
        let gn = gradient(&f, &xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if mem.len() == opts.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let df = fx - fn_;
        x = xn;
        g = gn;
        fx = fn_;
        trace.push(fx);
        if df < opts.f_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
    }
    Ok(Minimum {
        x,
        f: fx,
        iterations,
        converged,
        trace,
    })
}
