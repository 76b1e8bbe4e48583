use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fft3::Fft3;
use crate::geometry::{linalg::*, MetricChart, SYM_PAIRS};
use crate::scalar::{lit, Real};

/// Spatial derivative used by every operator on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Fourier pseudo-spectral derivative with the Nyquist mode removed.
    Spectral,
    /// Fourth-order central difference `(8(u₊₁-u₋₁) - (u₊₂-u₋₂))/12h`.
    FourthOrder,
}

/// Metric data sampled on a periodic `n³` grid, shared by all fields on it.
pub struct GridGeometry<T: Real> {
    chart: Arc<MetricChart<T>>,
    n: usize,
    h: Vec3<T>,
    scheme: Scheme,
    sqrt_g: Vec<T>,
    ginv: [Vec<T>; 6],
    /// `√g g^{ij}` in `SYM_PAIRS` order
    a: [Vec<T>; 6],
    weights: Vec<T>,
    fft: Fft3<T>,
    dsym: [Vec<T>; 3],
    mean_a: [T; 3],
    /// all off-diagonal `a` vanish
    diagonal: bool,
}

impl<T: Real> std::fmt::Debug for GridGeometry<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridGeometry")
            .field("chart", &self.chart.name())
            .field("n", &self.n)
            .field("scheme", &self.scheme)
            .finish()
    }
}

pub(crate) fn pair_index(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        _ => 5,
    }
}

impl<T: Real> GridGeometry<T> {
    pub fn new(chart: Arc<MetricChart<T>>, n: usize, scheme: Scheme) -> Result<Arc<Self>> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::ResolutionTooCoarse(format!("grid size must be even and >= 8, got {n}")));
        }
        let box_lengths = chart.box_lengths();
        let h = [
            box_lengths[0] / T::from_usize_lossy(n),
            box_lengths[1] / T::from_usize_lossy(n),
            box_lengths[2] / T::from_usize_lossy(n),
        ];
        let total = n * n * n;
        let cell = h[0] * h[1] * h[2];
        let mut sqrt_g = Vec::with_capacity(total);
        let mut ginv: [Vec<T>; 6] = Default::default();
        let mut a: [Vec<T>; 6] = Default::default();
        for idx in 0..total {
            let x = node_coords(n, &h, idx);
            let g = chart.metric(&x);
            let d = det3(&g);
            let inv = inverse3(&g).ok_or(Error::SingularMetric(
                x[0].to_f64_lossy(),
                x[1].to_f64_lossy(),
                x[2].to_f64_lossy(),
            ))?;
            let sg = d.sqrt();
            sqrt_g.push(sg);
            for (c, (p, q)) in SYM_PAIRS.iter().enumerate() {
                ginv[c].push(inv[*p][*q]);
                a[c].push(sg * inv[*p][*q]);
            }
        }
        let weights = sqrt_g.iter().map(|s| *s * cell).collect();
        let two_pi = lit::<T>(2.0) * T::PI();
        let fft = Fft3::new(n);
        let dsym = [0, 1, 2].map(|ax| {
            (0..n)
                .map(|m| {
                    if 2 * m == n {
                        return T::zero();
                    }
                    let k = two_pi * T::lit(fft.wavenumber(m) as f64) / box_lengths[ax];
                    match scheme {
                        Scheme::Spectral => k,
                        Scheme::FourthOrder => {
                            let th = k * h[ax];
                            (lit::<T>(8.0) * th.sin() - (lit::<T>(2.0) * th).sin()) / (lit::<T>(6.0) * h[ax])
                        }
                    }
                })
                .collect()
        });
        let nt = T::from_usize_lossy(total);
        let mean_a = [0, 3, 5].map(|c| a[c].iter().copied().sum::<T>() / nt);
        let diagonal = [1, 2, 4].iter().all(|c| a[*c].iter().all(|v| *v == T::zero()));
        Ok(Arc::new(Self { chart, n, h, scheme, sqrt_g, ginv, a, weights, fft, dsym, mean_a, diagonal }))
    }

    pub fn chart(&self) -> &Arc<MetricChart<T>> {
        &self.chart
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> Vec3<T> {
        self.h
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn sqrt_g(&self) -> &[T] {
        &self.sqrt_g
    }

    /// Quadrature weights `√g h₁h₂h₃`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn inverse_metric(&self, idx: usize) -> Mat3<T> {
        let mut m = zero3();
        for (c, (p, q)) in SYM_PAIRS.iter().enumerate() {
            m[*p][*q] = self.ginv[c][idx];
            m[*q][*p] = self.ginv[c][idx];
        }
        m
    }

    pub fn node(&self, idx: usize) -> Vec3<T> {
        node_coords(self.n, &self.h, idx)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    pub fn ijk(&self, idx: usize) -> (usize, usize, usize) {
        (idx % self.n, (idx / self.n) % self.n, idx / (self.n * self.n))
    }

    /// Same grid and chart (by identity or by name, parameters, size and scheme).
    pub fn compatible(&self, other: &Self) -> bool {
        std::ptr::eq(self, other)
            || (self.n == other.n
                && self.scheme == other.scheme
                && self.chart.name() == other.chart.name()
                && self.chart.params() == other.chart.params()
                && self.chart.box_lengths() == other.chart.box_lengths())
    }

    fn complex_from(values: &[T]) -> Vec<Complex<T>> {
        values.iter().map(|v| Complex::new(*v, T::zero())).collect()
    }

    /// Derivatives `(D₁u, D₂u, D₃u)`.
    pub fn gradient(&self, u: &[T]) -> [Vec<T>; 3] {
        let n = self.n;
        let mut spec = Self::complex_from(u);
        self.fft.forward(&mut spec);
        let mut third = vec![Complex::new(T::zero(), T::zero()); spec.len()];
        let mut idx = 0;
        for k in 0..n {
            let s3 = self.dsym[2][k];
            for j in 0..n {
                let s2 = self.dsym[1][j];
                for i in 0..n {
                    let s1 = self.dsym[0][i];
                    let z = spec[idx];
                    third[idx] = Complex::new(-s3 * z.im, s3 * z.re);
                    // i s1 z + i (i s2 z)
                    spec[idx] = Complex::new(-s1 * z.im - s2 * z.re, s1 * z.re - s2 * z.im);
                    idx += 1;
                }
            }
        }
        self.fft.inverse(&mut spec);
        self.fft.inverse(&mut third);
        [
            spec.iter().map(|z| z.re).collect(),
            spec.iter().map(|z| z.im).collect(),
            third.iter().map(|z| z.re).collect(),
        ]
    }

    /// `Σ_i D_i f_i`
    pub fn divergence(&self, f: &[Vec<T>; 3]) -> Vec<T> {
        let n = self.n;
        let mut packed: Vec<Complex<T>> = f[0].iter().zip(&f[1]).map(|(a, b)| Complex::new(*a, *b)).collect();
        let mut out = Self::complex_from(&f[2]);
        self.fft.forward(&mut packed);
        self.fft.forward(&mut out);
        let half = lit::<T>(0.5);
        let mut idx = 0;
        for k in 0..n {
            let s3 = self.dsym[2][k];
            let nk = (n - k) % n;
            for j in 0..n {
                let s2 = self.dsym[1][j];
                let nj = (n - j) % n;
                let base = n * (nj + n * nk);
                for i in 0..n {
                    let s1 = self.dsym[0][i];
                    let a = packed[idx];
                    let b = packed[base + (n - i) % n].conj();
                    let f1 = (a + b) * half;
                    let d = (a - b) * half; // = i f̂2
                    let f2 = Complex::new(d.im, -d.re);
                    let sum = f1 * s1 + f2 * s2 + out[idx] * s3;
                    out[idx] = Complex::new(-sum.im, sum.re);
                    idx += 1;
                }
            }
        }
        self.fft.inverse(&mut out);
        out.into_iter().map(|z| z.re).collect()
    }

    /// `g^{ij} ∂_i u ∂_j v` pointwise from precomputed gradients.
    pub fn metric_contract(&self, du: &[Vec<T>; 3], dv: &[Vec<T>; 3]) -> Vec<T> {
        (0..self.len())
            .map(|idx| {
                let mut acc = T::zero();
                for i in 0..3 {
                    for j in 0..3 {
                        acc += self.ginv[pair_index(i, j)][idx] * du[i][idx] * dv[j][idx];
                    }
                }
                acc
            })
            .collect()
    }

    /// `Σ_ij D_i(√g g^{ij} D_j u)`
    pub fn weighted_laplacian(&self, u: &[T]) -> Vec<T> {
        let [mut d0, mut d1, mut d2] = self.gradient(u);
        let a = &self.a;
        if self.diagonal {
            for idx in 0..self.len() {
                d0[idx] = a[0][idx] * d0[idx];
                d1[idx] = a[3][idx] * d1[idx];
                d2[idx] = a[5][idx] * d2[idx];
            }
        } else {
            for idx in 0..self.len() {
                let (g0, g1, g2) = (d0[idx], d1[idx], d2[idx]);
                d0[idx] = a[0][idx] * g0 + a[1][idx] * g1 + a[2][idx] * g2;
                d1[idx] = a[1][idx] * g0 + a[3][idx] * g1 + a[4][idx] * g2;
                d2[idx] = a[2][idx] * g0 + a[4][idx] * g1 + a[5][idx] * g2;
            }
        }
        self.divergence(&[d0, d1, d2])
    }

    /// Applies the inverse of the constant-coefficient surrogate
    /// `h³(κ Σ ā_ii |D̂_i|² + c̄)` of the matrix form.
    pub(crate) fn flat_inverse(&self, kappa: T, c_bar: T, r: &[T]) -> Vec<T> {
        let n = self.n;
        let cell = self.h[0] * self.h[1] * self.h[2];
        let mut spec = Self::complex_from(r);
        self.fft.forward(&mut spec);
        for (idx, z) in spec.iter_mut().enumerate() {
            let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
            let sym = kappa
                * (self.mean_a[0] * self.dsym[0][i] * self.dsym[0][i]
                    + self.mean_a[1] * self.dsym[1][j] * self.dsym[1][j]
                    + self.mean_a[2] * self.dsym[2][k] * self.dsym[2][k])
                + c_bar;
            *z = *z / (sym * cell);
        }
        self.fft.inverse(&mut spec);
        spec.into_iter().map(|z| z.re).collect()
    }

    /// Symbol of the derivative along `axis` at index `m` (`D̂ = i·symbol`).
    pub fn derivative_symbol(&self, axis: usize, m: usize) -> T {
        self.dsym[axis][m]
    }
}

fn node_coords<T: Real>(n: usize, h: &Vec3<T>, idx: usize) -> Vec3<T> {
    let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
    [h[0] * T::from_usize_lossy(i), h[1] * T::from_usize_lossy(j), h[2] * T::from_usize_lossy(k)]
}
