//! Small numerical helpers shared across modules.

use libm::erfc;

pub const HOURS_PER_YEAR: f64 = 8760.0;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Pairwise summation. The result depends only on the order of `xs`,
/// never on how the values were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Mean and population variance (1/N).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (m, pairwise_sum(&dev) / xs.len() as f64)
}

/// Sample standard deviation with the (N-1) denominator.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let (_, var) = mean_var(xs);
    (var * xs.len() as f64 / (xs.len() - 1) as f64).sqrt()
}

/// Numerically stable `ln(sum(exp(xs)))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Dense row-major square matrix, used for regime transition algebra.
pub type Matrix = Vec<Vec<f64>>;

pub fn identity(n: usize) -> Matrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b[0].len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for (k, bk) in b.iter().enumerate() {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i][j] += aik * bk[j];
            }
        }
    }
    out
}

pub fn mat_pow(a: &Matrix, mut e: u64) -> Matrix {
    let mut base = a.clone();
    let mut acc = identity(a.len());
    while e > 0 {
        if e & 1 == 1 {
            acc = mat_mul(&acc, &base);
        }
        base = mat_mul(&base, &base);
        e >>= 1;
    }
    acc
}

fn mat_add_scaled(a: &Matrix, b: &Matrix, s: f64) -> Matrix {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + s * y).collect())
        .collect()
}

fn mat_norm_inf(a: &Matrix) -> f64 {
    a.iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix logarithm by inverse scaling and squaring: repeated square roots
/// (Denman–Beavers) until close to the identity, then the Mercator series.
pub fn mat_log(a: &Matrix) -> Option<Matrix> {
    let n = a.len();
    let id = identity(n);
    let mut x = a.clone();
    let mut squarings = 0u32;
    while mat_norm_inf(&mat_add_scaled(&x, &id, -1.0)) > 0.25 {
        x = mat_sqrt(&x)?;
        squarings += 1;
        if squarings > 40 {
            return None;
        }
    }
    let d = mat_add_scaled(&x, &id, -1.0);
    let mut term = d.clone();
    let mut acc = d.clone();
    for k in 2..60 {
        term = mat_mul(&term, &d);
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        acc = mat_add_scaled(&acc, &term, sign / k as f64);
        if mat_norm_inf(&term) / (k as f64) < 1e-17 {
            break;
        }
    }
    let scale = 2f64.powi(squarings as i32);
    Some(acc.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect())
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn mat_exp(a: &Matrix) -> Matrix {
    let n = a.len();
    let norm = mat_norm_inf(a);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 2f64.powi(-(s as i32));
    let x: Matrix = a
        .iter()
        .map(|r| r.iter().map(|v| v * scale).collect())
        .collect();
    let mut term = identity(n);
    let mut acc = identity(n);
    for k in 1..30 {
        term = mat_mul(&term, &x);
        term.iter_mut()
            .for_each(|r| r.iter_mut().for_each(|v| *v /= k as f64));
        acc = mat_add_scaled(&acc, &term, 1.0);
        if mat_norm_inf(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        acc = mat_mul(&acc, &acc);
    }
    acc
}

fn mat_sqrt(a: &Matrix) -> Option<Matrix> {
    let mut y = a.clone();
    let mut z = identity(a.len());
    for _ in 0..100 {
        let yi = mat_inv(&y)?;
        let zi = mat_inv(&z)?;
        let y_next = mat_add_scaled(&y, &zi, 1.0)
            .into_iter()
            .map(|r| r.into_iter().map(|v| 0.5 * v).collect())
            .collect::<Matrix>();
        let z_next = mat_add_scaled(&z, &yi, 1.0)
            .into_iter()
            .map(|r| r.into_iter().map(|v| 0.5 * v).collect())
            .collect::<Matrix>();
        let delta = mat_norm_inf(&mat_add_scaled(&y_next, &y, -1.0));
        y = y_next;
        z = z_next;
        if delta < 1e-15 {
            return Some(y);
        }
    }
    Some(y)
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn mat_inv(a: &Matrix) -> Option<Matrix> {
    let n = a.len();
    let mut m: Matrix = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        let p = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= p);
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    m[i].iter_mut()
                        .zip(&pivot_row)
                        .for_each(|(v, pv)| *v -= f * pv);
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Solve the symmetric positive (semi)definite system `a x = b` by Gaussian
/// elimination with partial pivoting. Used for small least-squares problems.
pub fn solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let inv = mat_inv(a)?;
    Some(
        inv.iter()
            .map(|r| r.iter().zip(b).map(|(x, y)| x * y).sum())
            .collect(),
    )
}
