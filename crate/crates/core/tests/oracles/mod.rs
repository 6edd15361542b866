//! Independent reference evaluators shared by integration tests and the
//! acceptance runner. Everything here works on plain nested vectors and
//! direct loops, without the library's layouts or shortcuts.

#![allow(dead_code)]

/// Points of a path as `points[i][c]`.
pub type Points = Vec<Vec<f64>>;

pub fn points(values: &[f64], dim: usize) -> Points {
    values.chunks(dim).map(|c| c.to_vec()).collect()
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for c in 0..x.len() {
        s += (x[c] - y[c]).powi(2);
    }
    s.sqrt()
}

/// Trapezoid on `n + 1` equally spaced samples, written out term by term.
fn trapezoid(f: &[f64], h: f64) -> f64 {
    let n = f.len() - 1;
    let mut s = 0.0;
    for (j, v) in f.iter().enumerate() {
        let w = if j == 0 || j == n { 0.5 } else { 1.0 };
        s += w * v;
    }
    s * h
}

pub fn sup_segment(a: &Points, b: &Points) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.len() {
        m = m.max(dist(&a[j], &b[j]));
    }
    m
}

pub fn l2_segment(a: &Points, b: &Points, dt: f64, tau: f64) -> f64 {
    let sq: Vec<f64> = (0..a.len()).map(|j| dist(&a[j], &b[j]).powi(2)).collect();
    (trapezoid(&sq, dt) / tau).sqrt()
}

pub fn l2_tilde_segment(a: &Points, b: &Points, dt: f64, tau: f64) -> f64 {
    let end = dist(a.last().unwrap(), b.last().unwrap());
    (end * end + l2_segment(a, b, dt, tau).powi(2)).sqrt()
}

fn window(p: &Points, k: usize, n: usize) -> Points {
    p[k..=k + n].to_vec()
}

/// `sup_t e^{-λt} ‖ξ_t - η_t‖_∞` with the supremum over every window.
pub fn sup_path_weighted(a: &Points, b: &Points, n: usize, dt: f64, lambda: f64) -> f64 {
    let steps = a.len() - 1 - n;
    let mut best: f64 = 0.0;
    for k in 0..=steps {
        let wa = window(a, k, n);
        let wb = window(b, k, n);
        let mut m: f64 = 0.0;
        for j in 0..=n {
            m = m.max(dist(&wa[j], &wb[j]));
        }
        best = best.max((-lambda * k as f64 * dt).exp() * m);
    }
    best
}

pub fn sup_path(a: &Points, b: &Points, n: usize, dt: f64) -> f64 {
    sup_path_weighted(a, b, n, dt, 0.0)
}

/// `(∫_0^T e^{-λt} ρ₂(ξ_t, η_t)² dt)^{1/2}` with every window's `ρ₂`
/// recomputed from scratch.
pub fn l2_path_weighted(a: &Points, b: &Points, n: usize, dt: f64, lambda: f64) -> f64 {
    let tau = n as f64 * dt;
    let steps = a.len() - 1 - n;
    let f: Vec<f64> = (0..=steps)
        .map(|k| {
            let r = l2_segment(&window(a, k, n), &window(b, k, n), dt, tau);
            (-lambda * k as f64 * dt).exp() * r * r
        })
        .collect();
    trapezoid(&f, dt).sqrt()
}

// ---------------------------------------------------------------------------
// constants, re-derived from the Gronwall and optimization steps

/// Minimizer of a convex function on `(lo, hi)` by golden-section search.
pub fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    f(0.5 * (a + b)).min(fc).min(fd)
}

/// `α(T)` with the exponent weight `e2` on `λ₂` (16 or 4).
pub fn alpha(t: f64, kappa: f64, l1: f64, l2: f64, l3: f64, e2: f64) -> f64 {
    let q = (1.0 - kappa).powi(2);
    let p = (1.0 + kappa).powi(2);
    let l1p = if l1 > 0.0 { l1 } else { 0.0 };
    // Gronwall route at ε = 1/2, δ = λ₁⁺ + (1-κ)²/(2T)
    let eps = 0.5;
    let delta = l1p + q / (2.0 * t);
    let excess = if delta - l1 > 0.0 { delta - l1 } else { 0.0 };
    let quarter_e2 = e2 / 4.0;
    let gron = l3 * p * ((eps * excess + quarter_e2 * l2) * t / (eps * (1.0 - eps) * q)).exp()
        / (delta * q * (1.0 - eps));
    // dissipative route, optimized over ε
    let diss = if l1p > 0.0 {
        let f = |e: f64| {
            let a = if l2 == 0.0 { 0.0 } else { 16.0 * l2 / (e * (1.0 - e) * l1p) };
            l3 * p / (l1p * q) * (a + 1.0 / (1.0 - e))
        };
        if l2 == 0.0 {
            // infimum at ε → 0
            l3 * p / (l1p * q)
        } else {
            golden_min(f, 1e-15, 1.0 - 1e-15)
        }
    } else {
        f64::INFINITY
    };
    2.0 * gron.min(diss)
}

pub fn beta(t: f64, kappa: f64, l1: f64, l2: f64) -> f64 {
    let q = (1.0 - kappa).powi(2);
    let p = (1.0 + kappa).powi(2);
    let l1p = if l1 > 0.0 { l1 } else { 0.0 };
    let l1m = if l1 < 0.0 { -l1 } else { 0.0 };
    let eps = 0.5;
    let gron = 1.0 + p / ((1.0 - eps) * q) * ((eps * l1m + 4.0 * l2) * t / (eps * (1.0 - eps) * q)).exp();
    let diss = if l1p > 0.0 {
        let f = |e: f64| {
            let a = if l2 == 0.0 { 0.0 } else { 4.0 * l2 / (e * (1.0 - e) * l1p) };
            1.0 + p / q * (1.0 / (1.0 - e) + a)
        };
        if l2 == 0.0 {
            1.0 + p / q
        } else {
            golden_min(f, 1e-15, 1.0 - 1e-15)
        }
    } else {
        f64::INFINITY
    };
    gron.min(diss)
}

pub fn c_lambda(lambda: f64, k: f64, k1: f64, k2: f64, l3: f64) -> f64 {
    let num = (2.0 + 2.0 * k + k * k).powi(2);
    let den = if lambda == 0.0 {
        (k1 - k2).powi(2)
    } else {
        (k1 - k2 + lambda * (1.0 - k).powi(2)).powi(2)
    };
    l3 * num / den
}

// ---------------------------------------------------------------------------
// transport

/// `min over permutations of mean c[i][σ(i)]`, by enumeration (Heap's algorithm).
pub fn brute_force_assignment(c: &[Vec<f64>]) -> f64 {
    let n = c.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| c[i][j]).sum::<f64>();
    let mut best = cost(&perm);
    let mut counters = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            best = best.min(cost(&perm));
            counters[i] += 1;
            i = 0;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    best / n as f64
}
