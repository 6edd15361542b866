//! Small numeric helpers shared across modules.

use alloc::vec::Vec;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    sqrt(norm_sq(v))
}

#[inline]
pub fn diff_norm_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trapezoid weights for `n_intervals` equal intervals of width `h`.
pub fn trapezoid_weights(n_intervals: usize, h: f64) -> Vec<f64> {
    let mut w = alloc::vec![h; n_intervals + 1];
    if n_intervals == 0 {
        w[0] = 0.0;
    } else {
        w[0] = 0.5 * h;
        w[n_intervals] = 0.5 * h;
    }
    w
}

/// Trapezoid rule for samples `f` on a uniform grid of step `h`.
pub fn trapezoid(f: &[f64], h: f64) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => h * (f[1..n - 1].iter().sum::<f64>() + 0.5 * (f[0] + f[n - 1])),
    }
}

/// Largest singular value of a row-major `rows × cols` matrix.
///
/// Power iteration on `MᵀM`; matrices here are tiny (d, m ≤ a handful).
pub fn operator_norm(m: &[f64], rows: usize, cols: usize) -> f64 {
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    if rows == 1 || cols == 1 {
        return norm(m);
    }
    let frob = norm(m);
    if frob == 0.0 {
        return 0.0;
    }
    let mut v = alloc::vec![1.0 / sqrt(cols as f64); cols];
    // break symmetry so v is not orthogonal to the top singular vector
    for (i, x) in v.iter_mut().enumerate() {
        *x += 1e-3 * (i as f64 + 1.0);
    }
    let mut mv = alloc::vec![0.0; rows];
    let mut est = 0.0;
    for _ in 0..500 {
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        for (r, out) in mv.iter_mut().enumerate() {
            *out = dot(&m[r * cols..(r + 1) * cols], &v);
        }
        let mut next = alloc::vec![0.0; cols];
        for (r, &a) in mv.iter().enumerate() {
            for c in 0..cols {
                next[c] += m[r * cols + c] * a;
            }
        }
        let new_est = norm(&mv);
        v = next;
        if (new_est - est).abs() <= 1e-15 * new_est {
            est = new_est;
            break;
        }
        est = new_est;
    }
    est
}

pub fn is_near_integer(x: f64, rel: f64) -> Option<usize> {
    if !x.is_finite() || x < -0.5 {
        return None;
    }
    let r = libm::round(x);
    if (x - r).abs() <= rel * r.abs().max(1.0) {
        Some(r as usize)
    } else {
        None
    }
}
