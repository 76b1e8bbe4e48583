//! Metric families: closed-form built-ins and periodic spline tables.

use std::sync::Arc;

use num_complex::Complex;

use super::linalg::{zero3, Mat3, Vec3};
use crate::error::{Error, Result};
use crate::fft3::Fft3;
use crate::scalar::{lit, Real};

/// Metric with first and second partial derivatives at a point.
/// `dg[l] = ∂_l g`, `d2g[l][m] = ∂_l ∂_m g`.
#[derive(Clone, Copy, Debug)]
pub struct MetricJet<T> {
    pub g: Mat3<T>,
    pub dg: [Mat3<T>; 3],
    pub d2g: [[Mat3<T>; 3]; 3],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump<T> {
    pub amplitude: T,
    pub center: Vec3<T>,
}

#[derive(Clone, Debug)]
pub enum MetricFamily<T: Real> {
    Flat,
    /// `g = e^{2φ}δ`, `φ = δ Σ_b a_b f(x - c_b)`
    Conformal { delta: T, kappa: T, bumps: Vec<Bump<T>> },
    /// `g = diag(1 + δ h_i)`
    DiagonalWarp { delta: T },
    Table(Arc<CoefficientTable<T>>),
}

/// Symmetric index pairs in storage order.
pub const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

fn wavenumbers<T: Real>(box_lengths: &Vec3<T>) -> Vec3<T> {
    let two_pi = lit::<T>(2.0) * T::PI();
    [two_pi / box_lengths[0], two_pi / box_lengths[1], two_pi / box_lengths[2]]
}

/// Bump profile `F(s) = (e^{κ(s+3)} - 1)/(e^{6κ} - 1)` on `s ∈ [-3, 3]`
/// and its first two derivatives; `κ = 0` is the cosine limit `(s+3)/6`.
fn bump_shape<T: Real>(kappa: T, s: T) -> (T, T, T) {
    if kappa == T::zero() {
        return ((s + lit(3.0)) / lit(6.0), T::one() / lit(6.0), T::zero());
    }
    let denom = (lit::<T>(6.0) * kappa).exp_m1();
    let e = (kappa * (s + lit(3.0))).exp();
    ((kappa * (s + lit(3.0))).exp_m1() / denom, kappa * e / denom, kappa * kappa * e / denom)
}

/// `(φ, ∇φ, ∇²φ)` of a conformal family.
pub fn conformal_potential<T: Real>(
    delta: T,
    kappa: T,
    bumps: &[Bump<T>],
    x: &Vec3<T>,
    box_lengths: &Vec3<T>,
) -> (T, Vec3<T>, Mat3<T>) {
    let k = wavenumbers(box_lengths);
    let mut phi = T::zero();
    let mut grad = [T::zero(); 3];
    let mut hess = zero3();
    for b in bumps {
        let mut s = T::zero();
        let mut ds = [T::zero(); 3];
        let mut dds = [T::zero(); 3];
        for i in 0..3 {
            let arg = k[i] * (x[i] - b.center[i]);
            let (sn, cs) = arg.sin_cos();
            s += cs;
            ds[i] = -k[i] * sn;
            dds[i] = -k[i] * k[i] * cs;
        }
        let (f, f1, f2) = bump_shape(kappa, s);
        let w = delta * b.amplitude;
        phi += w * f;
        for i in 0..3 {
            grad[i] += w * f1 * ds[i];
            for j in 0..3 {
                let mut h = f2 * ds[i] * ds[j];
                if i == j {
                    h += f1 * dds[i];
                }
                hess[i][j] += w * h;
            }
        }
    }
    (phi, grad, hess)
}

/// Smooth periodic warp functions `h_i` with first and second derivatives.
fn warp_functions<T: Real>(x: &Vec3<T>, box_lengths: &Vec3<T>) -> [(T, Vec3<T>, Mat3<T>); 3] {
    let k = wavenumbers(box_lengths);
    let half = lit::<T>(0.5);
    let mut out = [(T::zero(), [T::zero(); 3], zero3()); 3];
    for (i, slot) in out.iter_mut().enumerate() {
        let (a_ax, b_ax) = ((i + 1) % 3, (i + 2) % 3);
        let (sa, ca) = (k[a_ax] * x[a_ax]).sin_cos();
        let (sb, cb) = (k[b_ax] * x[b_ax]).sin_cos();
        let (si, ci) = (k[i] * x[i]).sin_cos();
        let h = sa * cb + half * ci;
        let mut d = [T::zero(); 3];
        d[i] = -half * k[i] * si;
        d[a_ax] = k[a_ax] * ca * cb;
        d[b_ax] = -k[b_ax] * sa * sb;
        let mut dd = zero3();
        dd[i][i] = -half * k[i] * k[i] * ci;
        dd[a_ax][a_ax] = -k[a_ax] * k[a_ax] * sa * cb;
        dd[b_ax][b_ax] = -k[b_ax] * k[b_ax] * sa * cb;
        dd[a_ax][b_ax] = -k[a_ax] * k[b_ax] * ca * sb;
        dd[b_ax][a_ax] = dd[a_ax][b_ax];
        *slot = (h, d, dd);
    }
    out
}

impl<T: Real> MetricFamily<T> {
    pub fn metric(&self, x: &Vec3<T>, box_lengths: &Vec3<T>) -> Mat3<T> {
        match self {
            MetricFamily::Flat => super::linalg::identity3(),
            MetricFamily::Conformal { delta, kappa, bumps } => {
                let (phi, _, _) = conformal_potential(*delta, *kappa, bumps, x, box_lengths);
                let e = (lit::<T>(2.0) * phi).exp();
                let mut g = zero3();
                for (i, row) in g.iter_mut().enumerate() {
                    row[i] = e;
                }
                g
            }
            MetricFamily::DiagonalWarp { delta } => {
                let h = warp_functions(x, box_lengths);
                let mut g = zero3();
                for i in 0..3 {
                    g[i][i] = T::one() + *delta * h[i].0;
                }
                g
            }
            MetricFamily::Table(t) => t.jet(x).g,
        }
    }

    /// Closed-form jet; `None` for families without one.
    pub fn analytic_jet(&self, x: &Vec3<T>, box_lengths: &Vec3<T>) -> Option<MetricJet<T>> {
        let mut jet = MetricJet { g: zero3(), dg: [zero3(); 3], d2g: [[zero3(); 3]; 3] };
        match self {
            MetricFamily::Flat => {
                jet.g = super::linalg::identity3();
            }
            MetricFamily::Conformal { delta, kappa, bumps } => {
                let (phi, grad, hess) = conformal_potential(*delta, *kappa, bumps, x, box_lengths);
                let two = lit::<T>(2.0);
                let e = (two * phi).exp();
                for d in 0..3 {
                    jet.g[d][d] = e;
                    for l in 0..3 {
                        jet.dg[l][d][d] = two * grad[l] * e;
                        for m in 0..3 {
                            jet.d2g[l][m][d][d] = (lit::<T>(4.0) * grad[l] * grad[m] + two * hess[l][m]) * e;
                        }
                    }
                }
            }
            MetricFamily::DiagonalWarp { delta } => {
                let h = warp_functions(x, box_lengths);
                for d in 0..3 {
                    jet.g[d][d] = T::one() + *delta * h[d].0;
                    for l in 0..3 {
                        jet.dg[l][d][d] = *delta * h[d].1[l];
                        for m in 0..3 {
                            jet.d2g[l][m][d][d] = *delta * h[d].2[l][m];
                        }
                    }
                }
            }
            MetricFamily::Table(t) => return Some(t.jet(x)),
        }
        Some(jet)
    }
}

/// A metric given by nodal coefficients on a periodic `n³` grid, evaluated
/// through periodic cubic B-spline interpolation (C² everywhere).
#[derive(Clone, Debug)]
pub struct CoefficientTable<T> {
    n: usize,
    box_lengths: Vec3<T>,
    nodal: [Vec<T>; 6],
    spline: [Vec<T>; 6],
}

impl<T: Real> CoefficientTable<T> {
    /// `nodal[c][i + n(j + n k)]` holds component `SYM_PAIRS[c]` at node `(i, j, k)`.
    pub fn new(n: usize, box_lengths: Vec3<T>, nodal: [Vec<T>; 6]) -> Result<Self> {
        if n < 4 {
            return Err(Error::BadParams(format!("coefficient table needs n >= 4, got {n}")));
        }
        if nodal.iter().any(|c| c.len() != n * n * n) {
            return Err(Error::ShapeMismatch(format!("coefficient table columns must have n³ = {} entries", n * n * n)));
        }
        if nodal.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::BadParams("coefficient table contains non-finite entries".into()));
        }
        let fft = Fft3::<T>::new(n);
        let symbol: Vec<T> = (0..n)
            .map(|m| {
                let th = lit::<T>(2.0) * T::PI() * T::from_usize_lossy(m) / T::from_usize_lossy(n);
                (lit::<T>(4.0) + lit::<T>(2.0) * th.cos()) / lit(6.0)
            })
            .collect();
        let spline = nodal.clone().map(|col| {
            let mut buf: Vec<Complex<T>> = col.iter().map(|v| Complex::new(*v, T::zero())).collect();
            fft.forward(&mut buf);
            for (idx, z) in buf.iter_mut().enumerate() {
                let (a, b, c) = (idx % n, (idx / n) % n, idx / (n * n));
                *z = *z / (symbol[a] * symbol[b] * symbol[c]);
            }
            fft.inverse(&mut buf);
            buf.into_iter().map(|z| z.re).collect::<Vec<T>>()
        });
        Ok(Self { n, box_lengths, nodal, spline })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_lengths(&self) -> Vec3<T> {
        self.box_lengths
    }

    pub fn nodal(&self) -> &[Vec<T>; 6] {
        &self.nodal
    }

    /// Samples a family on the `n³` node grid.
    pub fn sample(family: &MetricFamily<T>, n: usize, box_lengths: Vec3<T>) -> Result<Self> {
        let mut nodal: [Vec<T>; 6] = Default::default();
        for col in nodal.iter_mut() {
            col.reserve(n * n * n);
        }
        for idx in 0..n * n * n {
            let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
            let x = [
                box_lengths[0] * T::from_usize_lossy(i) / T::from_usize_lossy(n),
                box_lengths[1] * T::from_usize_lossy(j) / T::from_usize_lossy(n),
                box_lengths[2] * T::from_usize_lossy(k) / T::from_usize_lossy(n),
            ];
            let g = family.metric(&x, &box_lengths);
            for (c, (a, b)) in SYM_PAIRS.iter().enumerate() {
                nodal[c].push(g[*a][*b]);
            }
        }
        Self::new(n, box_lengths, nodal)
    }

    pub fn jet(&self, x: &Vec3<T>) -> MetricJet<T> {
        let n = self.n;
        let mut base = [0usize; 3];
        let mut w = [[T::zero(); 4]; 3];
        let mut dw = [[T::zero(); 4]; 3];
        let mut ddw = [[T::zero(); 4]; 3];
        let mut inv_h = [T::zero(); 3];
        let sixth = T::one() / lit(6.0);
        let half = lit::<T>(0.5);
        for ax in 0..3 {
            let h = self.box_lengths[ax] / T::from_usize_lossy(n);
            inv_h[ax] = T::one() / h;
            let s = x[ax] / h;
            let fl = s.floor();
            let t = s - fl;
            let cell = fl.to_i64().unwrap_or(0).rem_euclid(n as i64) as usize;
            base[ax] = cell;
            let u = T::one() - t;
            let t2 = t * t;
            let t3 = t2 * t;
            w[ax] = [
                u * u * u * sixth,
                (lit::<T>(3.0) * t3 - lit::<T>(6.0) * t2 + lit(4.0)) * sixth,
                (-lit::<T>(3.0) * t3 + lit::<T>(3.0) * t2 + lit::<T>(3.0) * t + T::one()) * sixth,
                t3 * sixth,
            ];
            dw[ax] = [
                -u * u * half,
                (lit::<T>(3.0) * t2 - lit::<T>(4.0) * t) * half,
                (-lit::<T>(3.0) * t2 + lit::<T>(2.0) * t + T::one()) * half,
                t2 * half,
            ];
            ddw[ax] = [u, lit::<T>(3.0) * t - lit(2.0), -lit::<T>(3.0) * t + T::one(), t];
        }
        let mut jet = MetricJet { g: zero3(), dg: [zero3(); 3], d2g: [[zero3(); 3]; 3] };
        // accumulate value, gradient and Hessian of each component
        let mut acc = [[T::zero(); 10]; 6];
        for c in 0..4 {
            let kk = (base[2] + n + c - 1) % n;
            for b in 0..4 {
                let jj = (base[1] + n + b - 1) % n;
                for a in 0..4 {
                    let ii = (base[0] + n + a - 1) % n;
                    let idx = ii + n * (jj + n * kk);
                    let basis = [
                        w[0][a] * w[1][b] * w[2][c],
                        dw[0][a] * w[1][b] * w[2][c] * inv_h[0],
                        w[0][a] * dw[1][b] * w[2][c] * inv_h[1],
                        w[0][a] * w[1][b] * dw[2][c] * inv_h[2],
                        ddw[0][a] * w[1][b] * w[2][c] * inv_h[0] * inv_h[0],
                        dw[0][a] * dw[1][b] * w[2][c] * inv_h[0] * inv_h[1],
                        dw[0][a] * w[1][b] * dw[2][c] * inv_h[0] * inv_h[2],
                        w[0][a] * ddw[1][b] * w[2][c] * inv_h[1] * inv_h[1],
                        w[0][a] * dw[1][b] * dw[2][c] * inv_h[1] * inv_h[2],
                        w[0][a] * w[1][b] * ddw[2][c] * inv_h[2] * inv_h[2],
                    ];
                    for comp in 0..6 {
                        let coef = self.spline[comp][idx];
                        for (slot, bv) in acc[comp].iter_mut().zip(basis.iter()) {
                            *slot += coef * *bv;
                        }
                    }
                }
            }
        }
        for (comp, (p, q)) in SYM_PAIRS.iter().enumerate() {
            let a = &acc[comp];
            let set = |m: &mut Mat3<T>, v: T| {
                m[*p][*q] = v;
                m[*q][*p] = v;
            };
            set(&mut jet.g, a[0]);
            for l in 0..3 {
                set(&mut jet.dg[l], a[1 + l]);
            }
            let hess_idx = [[4, 5, 6], [5, 7, 8], [6, 8, 9]];
            for l in 0..3 {
                for m in 0..3 {
                    set(&mut jet.d2g[l][m], a[hess_idx[l][m]]);
                }
            }
        }
        jet
    }

    /// CSV with header `# n=<n> eps=0 chart=table box=<L>` and rows
    /// `i j k x y z g11 g12 g13 g22 g23 g33`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let n = self.n;
        let mut out = String::new();
        let _ = writeln!(out, "# n={} eps=0 chart=table box={:e}", n, self.box_lengths[0]);
        for idx in 0..n * n * n {
            let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
            let h = self.box_lengths[0] / T::from_usize_lossy(n);
            let _ = write!(
                out,
                "{} {} {} {:e} {:e} {:e}",
                i,
                j,
                k,
                h * T::from_usize_lossy(i),
                h * T::from_usize_lossy(j),
                h * T::from_usize_lossy(k)
            );
            for c in 0..6 {
                let _ = write!(out, " {:e}", self.nodal[c][idx]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| perr(1, "header", "empty table"))?;
        let header = header.strip_prefix('#').ok_or_else(|| perr(1, "header", "missing `#` header"))?;
        let mut n = None;
        let mut box_len = None;
        for tok in header.split_whitespace() {
            if let Some((k, v)) = tok.split_once('=') {
                match k {
                    "n" => n = Some(v.parse::<usize>().map_err(|e| perr(1, "n", &e.to_string()))?),
                    "box" => box_len = Some(v.parse::<f64>().map_err(|e| perr(1, "box", &e.to_string()))?),
                    _ => {}
                }
            }
        }
        let n = n.ok_or_else(|| perr(1, "n", "missing"))?;
        let mut nodal: [Vec<T>; 6] = Default::default();
        for col in nodal.iter_mut() {
            *col = vec![T::nan(); n * n * n];
        }
        let mut spacing = None;
        for (lineno, line) in lines {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 12 {
                return Err(perr(lineno, "row", &format!("expected 12 columns, found {}", cols.len())));
            }
            let mut ijk = [0usize; 3];
            for a in 0..3 {
                ijk[a] = cols[a].parse().map_err(|e: std::num::ParseIntError| perr(lineno, "index", &e.to_string()))?;
                if ijk[a] >= n {
                    return Err(perr(lineno, "index", "index out of range"));
                }
            }
            if ijk[0] == 1 && spacing.is_none() {
                spacing = Some(cols[3].parse::<f64>().map_err(|e| perr(lineno, "x", &e.to_string()))?);
            }
            let idx = ijk[0] + n * (ijk[1] + n * ijk[2]);
            for c in 0..6 {
                let v: f64 = cols[6 + c].parse().map_err(|e| perr(lineno, "g", &format!("{e}")))?;
                nodal[c][idx] = T::lit(v);
            }
        }
        if nodal.iter().flatten().any(|v| v.is_nan()) {
            return Err(perr(0, "row", "table does not cover every node"));
        }
        let l = match (box_len, spacing) {
            (Some(b), _) => b,
            (None, Some(h)) => h * n as f64,
            _ => return Err(perr(0, "box", "cannot infer box length")),
        };
        Self::new(n, [T::lit(l); 3], nodal)
    }
}

fn perr(line: usize, field: &str, msg: &str) -> Error {
    Error::ParseError { line, field: field.into(), message: msg.into() }
}
