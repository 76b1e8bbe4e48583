//! One-dimensional quadrature on sampled data.

use crate::scalar::{lit, Real};

/// Three-point Gauss–Legendre abscissae/weights on [0, 1].
fn gauss3<T: Real>() -> [(T, T); 3] {
    let d = lit::<T>(0.6).sqrt() / lit(2.0);
    let half = lit::<T>(0.5);
    [
        (half - d, lit(5.0 / 18.0)),
        (half, lit(8.0 / 18.0)),
        (half + d, lit(5.0 / 18.0)),
    ]
}

fn lagrange_eval<T: Real>(xs: &[T], fs: &[T], x: T) -> T {
    let mut acc = T::zero();
    for (i, (&xi, &fi)) in xs.iter().zip(fs).enumerate() {
        let mut w = T::one();
        for (j, &xj) in xs.iter().enumerate() {
            if i != j {
                w = w * (x - xj) / (xi - xj);
            }
        }
        acc += w * fi;
    }
    acc
}

/// Stencil of (up to) four nodes around interval `[i, i+1]`.
fn stencil(i: usize, n: usize) -> std::ops::Range<usize> {
    if n < 4 {
        return 0..n;
    }
    let start = i.saturating_sub(1).min(n - 4);
    start..start + 4
}

/// Integral of `f` over each interval `[x_i, x_{i+1}]` using the local cubic
/// interpolant (fourth order overall on smooth data).
pub fn interval_integrals<T: Real>(x: &[T], f: &[T]) -> Vec<T> {
    assert_eq!(x.len(), f.len());
    let n = x.len();
    if n < 2 {
        return Vec::new();
    }
    let g = gauss3::<T>();
    (0..n - 1)
        .map(|i| {
            let s = stencil(i, n);
            let (xs, fs) = (&x[s.clone()], &f[s]);
            let h = x[i + 1] - x[i];
            g.iter()
                .map(|&(t, w)| w * lagrange_eval(xs, fs, x[i] + t * h))
                .sum::<T>()
                * h
        })
        .collect()
}

/// Running integral `F_i = int_{x_0}^{x_i} f`.
pub fn cumulative<T: Real>(x: &[T], f: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = T::zero();
    out.push(acc);
    for piece in interval_integrals(x, f) {
        acc += piece;
        out.push(acc);
    }
    out
}

pub fn integrate<T: Real>(x: &[T], f: &[T]) -> T {
    interval_integrals(x, f).into_iter().sum()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre<T: Real>(n: usize) -> Vec<(T, T)> {
    let mut out = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((lit(x), lit(2.0 / ((1.0 - x * x) * dp * dp))));
    }
    out.reverse();
    out
}

/// Weights of the derivative at `x0` of the Lagrange interpolant through `xs`.
pub fn derivative_weights<T: Real>(xs: &[T], x0: T) -> Vec<T> {
    let m = xs.len();
    (0..m)
        .map(|i| {
            // d/dx prod_{j != i} (x - x_j)/(x_i - x_j) at x0
            let mut denom = T::one();
            for j in 0..m {
                if j != i {
                    denom = denom * (xs[i] - xs[j]);
                }
            }
            let mut num = T::zero();
            for k in 0..m {
                if k == i {
                    continue;
                }
                let mut prod = T::one();
                for j in 0..m {
                    if j != i && j != k {
                        prod = prod * (x0 - xs[j]);
                    }
                }
                num += prod;
            }
            num / denom
        })
        .collect()
}
