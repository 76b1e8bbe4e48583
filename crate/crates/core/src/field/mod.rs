//! Fields on the periodic grid, ε-weighted norms, elliptic solves and the
//! electrostatic maps `Ψ`, `Ψ'`.

mod grid;
mod system;

use std::fmt::Write as _;
use std::sync::Arc;

pub use grid::{GridGeometry, Scheme};
pub use system::{g_nonlinearity, solve_psi, solve_psi_prime, SystemKind, SystemParams, PSI_BOUND_TOL};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scalar::{lit, Real};

/// A real scalar field on a grid, optionally tagged with the ε it was built for.
#[derive(Clone, Debug)]
pub struct GridField<T: Real> {
    geom: Arc<GridGeometry<T>>,
    values: Vec<T>,
    eps: Option<T>,
}

impl<T: Real> GridField<T> {
    pub fn new(geom: Arc<GridGeometry<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != geom.len() {
            return Err(Error::ShapeMismatch(format!("field has {} values, grid has {}", values.len(), geom.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("field values must be finite".into()));
        }
        Ok(Self { geom, values, eps: None })
    }

    pub(crate) fn from_vec(geom: &Arc<GridGeometry<T>>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), geom.len());
        Self { geom: geom.clone(), values, eps: None }
    }

    pub fn zeros(geom: &Arc<GridGeometry<T>>) -> Self {
        Self::from_vec(geom, vec![T::zero(); geom.len()])
    }

    pub fn constant(geom: &Arc<GridGeometry<T>>, c: T) -> Self {
        Self::from_vec(geom, vec![c; geom.len()])
    }

    pub fn from_fn(geom: &Arc<GridGeometry<T>>, f: impl Fn(Vec3<T>) -> T) -> Self {
        let values = (0..geom.len()).map(|idx| f(geom.node(idx))).collect();
        Self::from_vec(geom, values)
    }

    pub fn with_eps(mut self, eps: T) -> Self {
        self.eps = Some(eps);
        self
    }

    pub fn eps(&self) -> Option<T> {
        self.eps
    }

    pub fn geometry(&self) -> &Arc<GridGeometry<T>> {
        &self.geom
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.geom.compatible(&other.geom) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "fields live on different grids ({} n={} vs {} n={})",
                self.geom.chart().name(),
                self.geom.n(),
                other.geom.chart().name(),
                other.geom.n()
            )))
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_vec(&self.geom, self.values.iter().map(|v| f(*v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self::from_vec(&self.geom, self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect()))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s·other`
    pub fn axpy(&self, s: T, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `∫ u dμ_g`
    pub fn integral(&self) -> T {
        self.values.iter().zip(self.geom.weights()).map(|(u, w)| *u * *w).sum()
    }

    /// `∫ u v dμ_g`
    pub fn l2_dot(&self, other: &Self) -> Result<T> {
        self.check_compatible(other)?;
        Ok(self.values.iter().zip(&other.values).zip(self.geom.weights()).map(|((a, b), w)| *a * *b * *w).sum())
    }

    pub fn l2_norm(&self) -> T {
        self.l2_dot(self).unwrap_or(T::zero()).sqrt()
    }

    /// `∫ g^{ij} ∂_i u ∂_j u dμ_g`
    pub fn dirichlet(&self) -> T {
        let du = self.geom.gradient(&self.values);
        let dens = self.geom.metric_contract(&du, &du);
        dens.iter().zip(self.geom.weights()).map(|(d, w)| *d * *w).sum()
    }

    /// `(∫|∇_g u|² + u² dμ_g)^{1/2}`
    pub fn h1_norm(&self) -> T {
        (self.dirichlet() + self.l2_dot(self).unwrap_or(T::zero())).sqrt()
    }

    /// Field export: header `# n=<n> eps=<eps> chart=<name>`, rows `i j k x y z value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let eps = self.eps.map(|e| format!("{e:e}")).unwrap_or_else(|| "none".into());
        let _ = writeln!(out, "# n={} eps={} chart={}", self.geom.n(), eps, self.geom.chart().name());
        for (idx, v) in self.values.iter().enumerate() {
            let (i, j, k) = self.geom.ijk(idx);
            let x = self.geom.node(idx);
            let _ = writeln!(out, "{} {} {} {:e} {:e} {:e} {:e}", i, j, k, x[0], x[1], x[2], v);
        }
        out
    }

    /// Reads the export layout back onto `geom`.
    pub fn from_csv(geom: &Arc<GridGeometry<T>>, text: &str) -> Result<Self> {
        let perr = |line: usize, field: &str, message: String| Error::ParseError { line, field: field.into(), message };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| perr(1, "header", "empty file".into()))?;
        let header = header.strip_prefix('#').ok_or_else(|| perr(1, "header", "missing `#`".into()))?;
        let mut eps = None;
        for tok in header.split_whitespace() {
            match tok.split_once('=') {
                Some(("n", v)) => {
                    let n: usize = v.parse().map_err(|e| perr(1, "n", format!("{e}")))?;
                    if n != geom.n() {
                        return Err(Error::ShapeMismatch(format!("file has n={n}, grid has n={}", geom.n())));
                    }
                }
                Some(("eps", v)) if v != "none" => {
                    eps = Some(T::lit(v.parse::<f64>().map_err(|e| perr(1, "eps", format!("{e}")))?));
                }
                _ => {}
            }
        }
        let mut values = vec![T::nan(); geom.len()];
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 7 {
                return Err(perr(lineno + 1, "row", format!("expected 7 columns, found {}", cols.len())));
            }
            let mut ijk = [0usize; 3];
            for a in 0..3 {
                ijk[a] = cols[a].parse().map_err(|e| perr(lineno + 1, "index", format!("{e}")))?;
            }
            if ijk.iter().any(|v| *v >= geom.n()) {
                return Err(perr(lineno + 1, "index", "index out of range".into()));
            }
            let v: f64 = cols[6].parse().map_err(|e| perr(lineno + 1, "value", format!("{e}")))?;
            values[geom.index(ijk[0], ijk[1], ijk[2])] = T::lit(v);
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(perr(0, "row", "file does not cover every node".into()));
        }
        let mut f = Self::new(geom.clone(), values)?;
        f.eps = eps;
        Ok(f)
    }
}

/// `-κ Δ_g + c + V` on a grid. Its matrix form
/// `B = h³[κ DᵀaD + diag(√g(c+V))]` is symmetric; `A = diag(√g h³)⁻¹ B`.
#[derive(Clone, Debug)]
pub struct EllipticOperator<'a, T: Real> {
    pub kappa: T,
    pub c: T,
    pub potential: Option<&'a [T]>,
}

impl<'a, T: Real> EllipticOperator<'a, T> {
    pub fn new(kappa: T, c: T, potential: Option<&'a [T]>) -> Self {
        Self { kappa, c, potential }
    }

    /// Matrix form `B u`.
    pub fn apply_matrix(&self, geom: &GridGeometry<T>, u: &[T]) -> Vec<T> {
        let lap = geom.weighted_laplacian(u);
        let h = geom.spacing();
        let cell = h[0] * h[1] * h[2];
        let sg = geom.sqrt_g();
        (0..u.len())
            .map(|i| {
                let v = self.potential.map_or(T::zero(), |p| p[i]);
                cell * (-self.kappa * lap[i] + sg[i] * (self.c + v) * u[i])
            })
            .collect()
    }

    /// Pointwise form `A u = -κΔ_g u + (c+V)u`.
    pub fn apply(&self, u: &GridField<T>) -> GridField<T> {
        let b = self.apply_matrix(&u.geom, &u.values);
        let w = u.geom.weights();
        GridField::from_vec(&u.geom, b.iter().zip(w).map(|(b, w)| *b / *w).collect())
    }

    fn mean_zero_order(&self, geom: &GridGeometry<T>) -> T {
        let sg = geom.sqrt_g();
        let total: T = (0..sg.len()).map(|i| sg[i] * (self.c + self.potential.map_or(T::zero(), |p| p[i]))).sum();
        total / T::from_usize_lossy(sg.len())
    }

    pub(crate) fn preconditioner<'g>(&self, geom: &'g GridGeometry<T>) -> impl Fn(&[T]) -> Vec<T> + 'g {
        let c_bar = self.mean_zero_order(geom).max(T::min_positive_value());
        let kappa = self.kappa;
        move |r: &[T]| geom.flat_inverse(kappa, c_bar, r)
    }
}

/// `-ε²Δ_g u + λu + V u`
pub fn apply_schrodinger_op<T: Real>(u: &GridField<T>, eps: T, lambda: T, potential: Option<&GridField<T>>) -> Result<GridField<T>> {
    if let Some(p) = potential {
        u.check_compatible(p)?;
    }
    Ok(EllipticOperator::new(eps * eps, lambda, potential.map(|p| p.values())).apply(u))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
}

pub const DEFAULT_SOLVE_TOL: f64 = 1e-10;
pub const MAX_CG_ITERATIONS: usize = 2000;

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Preconditioned conjugate gradients on `B x = b` (Euclidean form).
pub(crate) fn pcg<T: Real>(
    apply: impl Fn(&[T]) -> Vec<T>,
    precond: impl Fn(&[T]) -> Vec<T>,
    b: &[T],
    x0: Option<Vec<T>>,
    tol: T,
    max_iter: usize,
) -> Result<(Vec<T>, SolveReport)> {
    let bnorm = dot(b, b).sqrt();
    if bnorm == T::zero() {
        return Ok((vec![T::zero(); b.len()], SolveReport { iterations: 0, residual: 0.0 }));
    }
    let mut x = x0.unwrap_or_else(|| vec![T::zero(); b.len()]);
    let ax = apply(&x);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    for it in 0..max_iter {
        if rel <= tol {
            return Ok((x, SolveReport { iterations: it, residual: rel.to_f64_lossy() }));
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::NoConvergence(format!("operator not positive definite (pᵀAp = {pap})")));
        }
        let alpha = rz / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            return Ok((x, SolveReport { iterations: it + 1, residual: rel.to_f64_lossy() }));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::MaxIterations { iterations: max_iter, residual: rel.to_f64_lossy() })
}

/// Solves `A u = f` for the symmetric positive definite operator `op`.
pub fn solve_spd<T: Real>(op: &EllipticOperator<'_, T>, rhs: &GridField<T>, tol: T) -> Result<(GridField<T>, SolveReport)> {
    let geom = rhs.geometry();
    let b: Vec<T> = rhs.values().iter().zip(geom.weights()).map(|(f, w)| *f * *w).collect();
    let (x, rep) = pcg(|u| op.apply_matrix(geom, u), op.preconditioner(geom), &b, None, tol, MAX_CG_ITERATIONS)?;
    Ok((GridField::from_vec(geom, x), rep))
}

/// `i*_ε(v)`: the solution of `-ε²Δ_g u + λu = v`.
pub fn adjoint_istar<T: Real>(v: &GridField<T>, eps: T, lambda: T) -> Result<GridField<T>> {
    adjoint_istar_tol(v, eps, lambda, lit(DEFAULT_SOLVE_TOL))
}

/// [`adjoint_istar`] with an explicit relative residual tolerance.
pub fn adjoint_istar_tol<T: Real>(v: &GridField<T>, eps: T, lambda: T, tol: T) -> Result<GridField<T>> {
    let op = EllipticOperator::new(eps * eps, lambda, None);
    Ok(solve_spd(&op, v, tol)?.0.with_eps(eps))
}

/// `⟨u, v⟩_ε = ε⁻³(ε²∫g^{ij}∂_iu∂_jv + λ∫uv) dμ_g`
pub fn inner_product_eps<T: Real>(u: &GridField<T>, v: &GridField<T>, eps: T, lambda: T) -> Result<T> {
    u.check_compatible(v)?;
    let b = EllipticOperator::new(eps * eps, lambda, None).apply_matrix(u.geometry(), v.values());
    Ok(dot(u.values(), &b) / eps.powi(3))
}

pub fn norm_eps<T: Real>(u: &GridField<T>, eps: T, lambda: T) -> T {
    inner_product_eps(u, u, eps, lambda).unwrap_or(T::zero()).max(T::zero()).sqrt()
}

/// `(ε⁻³ ∫|u|^s dμ_g)^{1/s}`
pub fn lq_norm_eps<T: Real>(u: &GridField<T>, s: T, eps: T) -> Result<T> {
    if !(s >= T::one()) {
        return Err(Error::ValidationError(format!("norm exponent must be >= 1, got {s}")));
    }
    let total: T = u.values().iter().zip(u.geometry().weights()).map(|(v, w)| v.abs().powf(s) * *w).sum();
    Ok((total / eps.powi(3)).powf(T::one() / s))
}

#[cfg(test)]
mod tests;
