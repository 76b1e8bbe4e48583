//! Lyapunov–Schmidt reduction: kernel projections, the operators `L`, `N`,
//! `S`, `R`, the fixed point `φ_{ε,ξ}` and the reduced energy `Ĩ_ε(ξ)`.
//!
//! Everything is assembled in the symmetric matrix form `B = h³(-ε²Δ_g + λ)`
//! of the ε-inner product, `⟨u, v⟩_ε = uᵀBv / ε³`. With `M = diag(√g h³)`,
//! `i*_ε[v] = B⁻¹Mv`, and the equation `L x = Π⊥ i*[F] + ...` becomes the
//! projected symmetric system `Q H Q x = Q(...)` with `H = B - M f'(W)` and `Q`
//! the Euclidean projector removing `span{BZ^i}`.

mod fit;
mod search;

pub use fit::{fit_expansion, fit_expansion_from_samples, ExpansionFit, MIN_CURVATURE_SPREAD, MIN_EPS_LEVELS, MIN_XI_POINTS};
pub use search::{
    find_concentration_points, compass_search, geodesic_distance, scalar_curvature_extrema, ConcentrationReport,
    ConcentrationTrack, CurvatureCritical, CurvatureLandscape, ExtremumKind, LocatedPoint, SeedKind, SearchConfig, SearchLevel,
    SearchObjective,
};

use std::sync::Arc;

use crate::ansatz::{
    build_ansatz_from, energy_parts, gradient_i, nonlinearity_f, nonlinearity_f_prime, AnsatzOptions, EnergyParts,
    NormalCoordinates, PeakAnsatz,
};
use crate::error::{Error, Result};
use crate::field::{adjoint_istar_tol, dot, g_nonlinearity, solve_psi, EllipticOperator, GridField, GridGeometry, SystemParams};
use crate::geometry::linalg::*;
use crate::radial::RadialProfile;
use crate::scalar::{lit, Real};

/// Gram matrices with a larger condition number are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e8;
/// Allowed relative leakage of an input into `K_{ε,ξ}`.
pub const ORTHOGONALITY_TOL: f64 = 1e-6;
pub const MAX_MINRES_ITERATIONS: usize = 3000;
/// Relative residual of the `i*_ε` solves inside the reduction.
pub const ISTAR_TOL: f64 = 1e-13;

/// Precomputed data for one `(ε, ξ)`.
pub struct KernelContext<'a, T: Real> {
    pub ansatz: &'a PeakAnsatz<T>,
    pub params: SystemParams<T>,
    geom: Arc<GridGeometry<T>>,
    eps: T,
    lambda: T,
    /// `BZ^i`
    bz: [Vec<T>; 3],
    gram_inv: Mat3<T>,
    /// `((BZ)ᵀBZ)⁻¹`
    euclid_inv: Mat3<T>,
    /// `M f'(W)` per node
    mfp: Vec<T>,
    /// `‖Z^i‖_ε`
    z_norms: [T; 3],
}

fn cond_sym<T: Real>(m: &Mat3<T>) -> T {
    let ev = sym_eigenvalues(m);
    let lo = ev[0].abs().min(ev[1].abs()).min(ev[2].abs());
    let hi = ev[0].abs().max(ev[1].abs()).max(ev[2].abs());
    if lo == T::zero() {
        T::infinity()
    } else {
        hi / lo
    }
}

impl<'a, T: Real> KernelContext<'a, T> {
    pub fn new(ansatz: &'a PeakAnsatz<T>, params: &SystemParams<T>) -> Result<Self> {
        let geom = ansatz.w.geometry().clone();
        let eps = ansatz.eps;
        let lambda = params.lambda();
        let op = EllipticOperator::new(eps * eps, lambda, None);
        let bz = [0, 1, 2].map(|i| op.apply_matrix(&geom, ansatz.z[i].values()));
        let e3 = eps.powi(3);
        let mut gram = zero3();
        let mut euclid = zero3();
        for i in 0..3 {
            for j in 0..3 {
                gram[i][j] = dot(ansatz.z[i].values(), &bz[j]) / e3;
                euclid[i][j] = dot(&bz[i], &bz[j]);
            }
        }
        let cond = cond_sym(&gram);
        if !(cond <= lit(MAX_GRAM_CONDITION)) {
            return Err(Error::SingularGram(cond.to_f64_lossy()));
        }
        let gram_inv = inverse3(&gram).ok_or(Error::SingularGram(f64::INFINITY))?;
        let euclid_inv = inverse3(&euclid).ok_or(Error::SingularGram(f64::INFINITY))?;
        let fp = nonlinearity_f_prime(&ansatz.w, params.p_exp);
        let mfp = fp.values().iter().zip(geom.weights()).map(|(f, w)| *f * *w).collect();
        let z_norms = [0, 1, 2].map(|i| gram[i][i].max(T::zero()).sqrt());
        Ok(Self { ansatz, params: *params, geom, eps, lambda, bz, gram_inv, euclid_inv, mfp, z_norms })
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    fn op(&self) -> EllipticOperator<'static, T> {
        EllipticOperator::new(self.eps * self.eps, self.lambda, None)
    }

    fn field(&self, v: Vec<T>) -> GridField<T> {
        GridField::new(self.geom.clone(), v).expect("finite values").with_eps(self.eps)
    }

    pub fn apply_b(&self, u: &[T]) -> Vec<T> {
        self.op().apply_matrix(&self.geom, u)
    }

    pub fn norm(&self, u: &[T]) -> T {
        (dot(u, &self.apply_b(u)) / self.eps.powi(3)).max(T::zero()).sqrt()
    }

    /// `⟨u, Z^i⟩_ε`
    pub fn kernel_products(&self, u: &[T]) -> Vec3<T> {
        let e3 = self.eps.powi(3);
        [0, 1, 2].map(|i| dot(u, &self.bz[i]) / e3)
    }

    /// Largest `|⟨u,Z^i⟩_ε| / (‖u‖_ε ‖Z^i‖_ε)`.
    pub fn orthogonality_defect(&self, u: &[T]) -> T {
        let nu = self.norm(u);
        if nu == T::zero() {
            return T::zero();
        }
        let p = self.kernel_products(u);
        (0..3).map(|i| p[i].abs() / (nu * self.z_norms[i])).fold(T::zero(), T::max)
    }

    fn check_orthogonal(&self, u: &[T]) -> Result<()> {
        let d = self.orthogonality_defect(u);
        if d > lit(ORTHOGONALITY_TOL) {
            return Err(Error::NotOrthogonal(d.to_f64_lossy()));
        }
        Ok(())
    }

    /// Coefficients `c` with `Σ c_j ⟨Z^j, Z^i⟩_ε = ⟨u, Z^i⟩_ε`.
    pub fn kernel_coefficients(&self, u: &[T]) -> Vec3<T> {
        mat_vec(&self.gram_inv, &self.kernel_products(u))
    }

    /// `Π⊥ u = u - Σ c_j Z^j`
    pub fn project_perp(&self, u: &[T]) -> (Vec3<T>, Vec<T>) {
        let c = self.kernel_coefficients(u);
        let mut out = u.to_vec();
        for j in 0..3 {
            let zj = self.ansatz.z[j].values();
            for (o, z) in out.iter_mut().zip(zj) {
                *o -= c[j] * *z;
            }
        }
        (c, out)
    }

    /// Euclidean projector `Q` removing `span{BZ^i}`.
    fn q(&self, v: &mut [T]) {
        let p = [0, 1, 2].map(|i| dot(v, &self.bz[i]));
        let c = mat_vec(&self.euclid_inv, &p);
        for j in 0..3 {
            for (o, y) in v.iter_mut().zip(&self.bz[j]) {
                *o -= c[j] * *y;
            }
        }
    }

    /// `H x = B x - M f'(W) x`
    fn apply_h(&self, x: &[T]) -> Vec<T> {
        let mut out = self.apply_b(x);
        for i in 0..out.len() {
            out[i] -= self.mfp[i] * x[i];
        }
        out
    }

    /// `i*_ε[v]`, solved close to round-off so that `L`, `N`, `S` are linear
    /// in their sources to working precision.
    pub fn istar(&self, v: &[T]) -> Result<Vec<T>> {
        let tol = lit::<T>(ISTAR_TOL).max(T::EPS * lit(1000.0));
        Ok(adjoint_istar_tol(&self.field(v.to_vec()), self.eps, self.lambda, tol)?.into_values())
    }

    /// `L φ = Π⊥{φ - i*[f'(W)φ]}`
    pub fn apply_l(&self, phi: &[T]) -> Result<Vec<T>> {
        self.check_orthogonal(phi)?;
        let fp = nonlinearity_f_prime(&self.ansatz.w, self.params.p_exp);
        let src: Vec<T> = phi.iter().zip(fp.values()).map(|(a, b)| *a * *b).collect();
        let is = self.istar(&src)?;
        let diff: Vec<T> = phi.iter().zip(&is).map(|(a, b)| *a - *b).collect();
        Ok(self.project_perp(&diff).1)
    }

    /// Solves `Q H Q x = Q b` for `x ∈ range(Q)` by preconditioned MINRES.
    fn solve_projected(&self, b: Vec<T>, x0: Option<Vec<T>>, tol: T) -> Result<(Vec<T>, usize)> {
        let mut b = b;
        self.q(&mut b);
        let apply = |x: &[T]| {
            let mut y = self.apply_h(x);
            self.q(&mut y);
            y
        };
        let pre = self.op().preconditioner(&self.geom);
        let precond = |r: &[T]| {
            let mut r = r.to_vec();
            self.q(&mut r);
            let mut z = pre(&r);
            self.q(&mut z);
            z
        };
        let x0 = x0.map(|mut x| {
            self.q(&mut x);
            x
        });
        let (mut x, its) = minres(apply, precond, &b, x0, tol, MAX_MINRES_ITERATIONS)?;
        self.q(&mut x);
        Ok((x, its))
    }

    /// `x` in `K⊥` with `L x = rhs`.
    pub fn solve_l_inverse(&self, rhs: &[T], tol: T) -> Result<Vec<T>> {
        self.check_orthogonal(rhs)?;
        let b = self.apply_b(rhs);
        let (x, _) = self.solve_projected(b, None, tol)?;
        Ok(self.make_orthogonal(x))
    }

    /// Removes the round-off component along `K` left by the Euclidean projector.
    fn make_orthogonal(&self, x: Vec<T>) -> Vec<T> {
        self.project_perp(&x).1
    }

    /// `R = Π⊥{i*[f(W)] - W}`
    pub fn residual_r(&self) -> Result<Vec<T>> {
        let f = nonlinearity_f(&self.ansatz.w, self.params.p_exp);
        let is = self.istar(f.values())?;
        let diff: Vec<T> = is.iter().zip(self.ansatz.w.values()).map(|(a, b)| *a - *b).collect();
        Ok(self.project_perp(&diff).1)
    }

    /// `N(φ) = Π⊥ i*[f(W+φ) - f(W) - f'(W)φ]`
    pub fn term_n(&self, phi: &[T]) -> Result<Vec<T>> {
        let p = self.params.p_exp;
        let w = self.ansatz.w.values();
        let u = self.field(w.iter().zip(phi).map(|(a, b)| *a + *b).collect());
        let fu = nonlinearity_f(&u, p);
        let fw = nonlinearity_f(&self.ansatz.w, p);
        let fp = nonlinearity_f_prime(&self.ansatz.w, p);
        let src: Vec<T> = (0..w.len()).map(|i| fu.values()[i] - fw.values()[i] - fp.values()[i] * phi[i]).collect();
        Ok(self.project_perp(&self.istar(&src)?).1)
    }

    /// `S(φ) = Π⊥ i*[w·g(W+φ)]`, `w = ω²` (KGM) or `ω` (SM).
    pub fn term_s(&self, phi: &[T]) -> Result<Vec<T>> {
        if self.params.omega == T::zero() {
            return Ok(vec![T::zero(); phi.len()]);
        }
        let w = self.ansatz.w.values();
        let u = self.field(w.iter().zip(phi).map(|(a, b)| *a + *b).collect());
        let psi = solve_psi(&u, &self.params)?;
        let g = g_nonlinearity(&u, &psi, &self.params)?.scale(self.params.coupling_weight());
        Ok(self.project_perp(&self.istar(g.values())?).1)
    }

    /// Right-hand side `M[f(W+φ) - f'(W)φ + w·g(W+φ)] - BW` of the matrix form.
    fn fixed_point_rhs(&self, phi: &[T]) -> Result<Vec<T>> {
        let p = self.params.p_exp;
        let w = self.ansatz.w.values();
        let u = self.field(w.iter().zip(phi).map(|(a, b)| *a + *b).collect());
        let fu = nonlinearity_f(&u, p);
        let mut src = fu.into_values();
        if self.params.omega != T::zero() {
            let psi = solve_psi(&u, &self.params)?;
            let g = g_nonlinearity(&u, &psi, &self.params)?;
            let cw = self.params.coupling_weight();
            for (s, gv) in src.iter_mut().zip(g.values()) {
                *s += cw * *gv;
            }
        }
        let weights = self.geom.weights();
        let bw = self.apply_b(w);
        Ok((0..w.len())
            .map(|i| weights[i] * src[i] - self.mfp[i] * phi[i] - bw[i])
            .collect())
    }
}

/// Fixed-point controls for [`solve_phi`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiOptions<T> {
    /// Stop when `‖φ_{k+1} - φ_k‖_ε ≤ tol · ‖R‖_ε`.
    pub tol: T,
    pub max_iter: usize,
    /// Relative tolerance of each linear solve.
    pub inner_tol: T,
}

impl<T: Real> Default for PhiOptions<T> {
    fn default() -> Self {
        Self { tol: lit(1e-9), max_iter: 50, inner_tol: lit(1e-11) }
    }
}

#[derive(Clone, Debug)]
pub struct PhiSolution<T: Real> {
    pub phi: GridField<T>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖φ_{k+1} - φ_k‖_ε` per iteration
    pub increments: Vec<T>,
    pub residual_norm: T,
    pub linear_iterations: Vec<usize>,
}

impl<T: Real> PhiSolution<T> {
    /// `increments[k+1] / increments[k]`
    pub fn contraction_ratios(&self) -> Vec<T> {
        self.increments.windows(2).map(|w| if w[0] > T::zero() { w[1] / w[0] } else { T::zero() }).collect()
    }
}

/// Fails after three consecutive growing increments.
#[derive(Default)]
struct ContractionMonitor<T> {
    last: Option<T>,
    growth: usize,
}

impl<T: Real> ContractionMonitor<T> {
    fn push(&mut self, inc: T) -> Result<()> {
        if let Some(prev) = self.last {
            if inc > prev {
                self.growth += 1;
                if self.growth >= 3 {
                    return Err(Error::NoContraction((inc / prev).to_f64_lossy()));
                }
            } else {
                self.growth = 0;
            }
        }
        self.last = Some(inc);
        Ok(())
    }
}

/// Iterates `φ_{k+1} = L⁻¹(N(φ_k) + S(φ_k) + R)` from `φ₀ = 0`.
pub fn solve_phi<T: Real>(ctx: &KernelContext<'_, T>, options: &PhiOptions<T>) -> Result<PhiSolution<T>> {
    let len = ctx.geom.len();
    let r_norm = ctx.norm(&ctx.residual_r()?);
    let threshold = options.tol * r_norm.max(T::min_positive_value());
    let mut phi = vec![T::zero(); len];
    let mut increments = Vec::new();
    let mut linear_iterations = Vec::new();
    let mut monitor = ContractionMonitor::default();
    let mut converged = false;
    for _ in 0..options.max_iter {
        let rhs = ctx.fixed_point_rhs(&phi)?;
        let (next, its) = ctx.solve_projected(rhs, Some(phi.clone()), options.inner_tol)?;
        linear_iterations.push(its);
        let next = ctx.make_orthogonal(next);
        let delta: Vec<T> = next.iter().zip(&phi).map(|(a, b)| *a - *b).collect();
        let inc = ctx.norm(&delta);
        monitor.push(inc)?;
        increments.push(inc);
        phi = next;
        if inc <= threshold {
            converged = true;
            break;
        }
    }
    Ok(PhiSolution {
        phi: ctx.field(phi),
        iterations: increments.len(),
        converged,
        increments,
        residual_norm: r_norm,
        linear_iterations,
    })
}

/// Preconditioned MINRES for symmetric (possibly indefinite) systems with a
/// symmetric positive definite preconditioner. Stops on the preconditioned
/// relative residual.
pub(crate) fn minres<T: Real>(
    apply: impl Fn(&[T]) -> Vec<T>,
    precond: impl Fn(&[T]) -> Vec<T>,
    b: &[T],
    x0: Option<Vec<T>>,
    tol: T,
    max_iter: usize,
) -> Result<(Vec<T>, usize)> {
    let n = b.len();
    let mut x = x0.unwrap_or_else(|| vec![T::zero(); n]);
    let ax = apply(&x);
    let mut r1: Vec<T> = b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
    let bref = {
        let z = precond(b);
        dot(b, &z).max(T::zero()).sqrt()
    };
    let mut y = precond(&r1);
    let beta1 = dot(&r1, &y);
    if !(beta1 >= T::zero()) {
        return Err(Error::NoConvergence("preconditioner is not positive definite".into()));
    }
    let beta1 = beta1.sqrt();
    if beta1 == T::zero() || beta1 <= tol * bref {
        return Ok((x, 0));
    }
    let mut r2 = r1.clone();
    let mut oldb = T::zero();
    let mut beta = beta1;
    let mut dbar = T::zero();
    let mut epsln = T::zero();
    let mut phibar = beta1;
    let mut cs = -T::one();
    let mut sn = T::zero();
    let mut w = vec![T::zero(); n];
    let mut w2 = vec![T::zero(); n];
    for itn in 1..=max_iter {
        let s = T::one() / beta;
        let v: Vec<T> = y.iter().map(|e| *e * s).collect();
        y = apply(&v);
        if itn >= 2 {
            let f = beta / oldb;
            for (yi, ri) in y.iter_mut().zip(&r1) {
                *yi -= f * *ri;
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for (yi, ri) in y.iter_mut().zip(&r2) {
            *yi -= f * *ri;
        }
        r1 = std::mem::replace(&mut r2, y);
        y = precond(&r2);
        oldb = beta;
        let bb = dot(&r2, &y);
        if !(bb >= T::zero()) {
            return Err(Error::NoConvergence("preconditioner is not positive definite".into()));
        }
        beta = bb.sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(T::EPS);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar = sn * phibar;
        let denom = T::one() / gamma;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        if phibar <= tol * bref || beta == T::zero() {
            return Ok((x, itn));
        }
    }
    Err(Error::MaxIterations { iterations: max_iter, residual: (phibar / bref).to_f64_lossy() })
}

/// One point of the reduced-energy landscape.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ReducedSample<T> {
    pub xi: Vec3<T>,
    pub eps: T,
    pub i_tilde: T,
    pub i_of_w: T,
    pub parts_tilde: EnergyParts<T>,
    pub parts_w: EnergyParts<T>,
    pub phi_norm: T,
    pub residual_norm: T,
    pub s_norm: T,
    pub iterations: usize,
    pub converged: bool,
    pub contraction_ratios: Vec<T>,
    pub orthogonality: T,
    /// `‖Π gradient_I(W+φ)‖_ε`, the component left for the reduced equation.
    pub kernel_residual: T,
    /// `‖Π⊥ gradient_I(W+φ)‖_ε`
    pub perp_residual: T,
    pub scalar_curvature: T,
}

/// Full reduction at `(ξ, ε)` given precomputed normal coordinates around `ξ`.
pub fn reduced_energy_from<T: Real>(
    coords: &Arc<NormalCoordinates<T>>,
    eps: T,
    params: &SystemParams<T>,
    profile: &RadialProfile<T>,
    ansatz_options: &AnsatzOptions<T>,
    options: &PhiOptions<T>,
) -> Result<ReducedSample<T>> {
    let ansatz = build_ansatz_from(coords, eps, profile, ansatz_options)?;
    let ctx = KernelContext::new(&ansatz, params)?;
    let sol = solve_phi(&ctx, options)?;
    let u = ansatz.w.add(&sol.phi)?;
    let parts_w = energy_parts(&ansatz.w, eps, params)?;
    let parts_tilde = energy_parts(&u, eps, params)?;
    let grad = gradient_i(&u, eps, params)?;
    let (_, grad_perp) = ctx.project_perp(grad.values());
    let grad_par: Vec<T> = grad.values().iter().zip(&grad_perp).map(|(a, b)| *a - *b).collect();
    let s = ctx.term_s(sol.phi.values())?;
    let chart = coords.geometry().chart();
    Ok(ReducedSample {
        xi: coords.xi(),
        eps,
        i_tilde: parts_tilde.i,
        i_of_w: parts_w.i,
        parts_tilde,
        parts_w,
        phi_norm: ctx.norm(sol.phi.values()),
        residual_norm: sol.residual_norm,
        s_norm: ctx.norm(&s),
        iterations: sol.iterations,
        converged: sol.converged,
        contraction_ratios: sol.contraction_ratios(),
        orthogonality: ctx.orthogonality_defect(sol.phi.values()),
        kernel_residual: ctx.norm(&grad_par),
        perp_residual: ctx.norm(&grad_perp),
        scalar_curvature: chart.scalar_curvature(&coords.xi())?,
    })
}

/// [`reduced_energy_from`] computing the normal coordinates first.
pub fn reduced_energy<T: Real>(
    geom: &Arc<GridGeometry<T>>,
    xi: &Vec3<T>,
    eps: T,
    params: &SystemParams<T>,
    profile: &RadialProfile<T>,
    ansatz_options: &AnsatzOptions<T>,
    options: &PhiOptions<T>,
) -> Result<ReducedSample<T>> {
    let coords = Arc::new(NormalCoordinates::compute(geom, xi)?);
    reduced_energy_from(&coords, eps, params, profile, ansatz_options, options)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(a: &[Vec<f64>]) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
        move |x| a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    #[test]
    fn minres_solves_indefinite_system() {
        let a = vec![
            vec![4.0, 1.0, 0.0, 0.0],
            vec![1.0, -3.0, 1.0, 0.0],
            vec![0.0, 1.0, 2.0, 0.5],
            vec![0.0, 0.0, 0.5, -1.0],
        ];
        let b = [1.0, 2.0, -1.0, 0.5];
        let (x, its) = minres(dense(&a), |r| r.to_vec(), &b, None, 1e-13, 50).unwrap();
        let ax = dense(&a)(&x);
        assert!(ax.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-11), "{ax:?}");
        assert!(its <= 4);
        let diag = |r: &[f64]| r.iter().zip([4.0, 3.0, 2.0, 1.0]).map(|(v, d)| v / d).collect::<Vec<_>>();
        let (y, _) = minres(dense(&a), diag, &b, Some(vec![1.0; 4]), 1e-13, 50).unwrap();
        assert!(y.iter().zip(&x).all(|(p, q)| (p - q).abs() < 1e-10));
        let (z, its) = minres(dense(&a), |r| r.to_vec(), &[0.0; 4], None, 1e-12, 50).unwrap();
        assert_eq!((z, its), (vec![0.0; 4], 0));
    }

    #[test]
    fn minres_reports_iteration_limit_and_bad_preconditioner() {
        let n = 40;
        let a: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { (i + 1) as f64 } else { 0.0 }).collect()).collect();
        let b = vec![1.0; n];
        let err = minres(dense(&a), |r| r.to_vec(), &b, None, 1e-14, 3).unwrap_err();
        assert!(matches!(err, Error::MaxIterations { iterations: 3, .. }), "{err}");
        let err = minres(dense(&a), |r| r.iter().map(|v| -v).collect(), &b, None, 1e-14, 3).unwrap_err();
        assert!(matches!(err, Error::NoConvergence(_)), "{err}");
    }

    #[test]
    fn contraction_monitor_trips_on_third_growth() {
        let mut m = ContractionMonitor::default();
        for v in [1.0, 2.0, 1.5, 3.0, 4.0] {
            m.push(v).unwrap();
        }
        assert!(matches!(m.push(5.0), Err(Error::NoContraction(_))));
        let mut m = ContractionMonitor::default();
        for v in [1.0, 0.5, 0.6, 0.3, 0.4, 0.45, 0.2] {
            m.push(v).unwrap();
        }
    }
}
