use std::sync::Arc;

use super::family::{conformal_potential, Bump, CoefficientTable, MetricFamily, MetricJet};
use super::linalg::*;
use crate::error::{Error, Result};
use crate::ode::{self, StepControl};
use crate::scalar::{lit, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode<T> {
    Analytic,
    /// Fourth-order central differences with the given step.
    FiniteDifference(T),
}

/// `Γ[k][i][j] = Γ^k_ij`
pub type Christoffel<T> = [[[T; 3]; 3]; 3];

/// A periodic chart `[0, L₁)×[0, L₂)×[0, L₃)` carrying a smooth metric.
#[derive(Clone, Debug)]
pub struct MetricChart<T: Real> {
    name: String,
    params: Vec<T>,
    box_lengths: Vec3<T>,
    family: MetricFamily<T>,
    derivative_mode: DerivativeMode<T>,
    cutoff_radius: T,
    geodesic_tol: T,
    min_eigenvalue: T,
}

/// Largest admissible cutoff radius as a fraction of the shortest box side.
pub const MAX_CUTOFF_FRACTION: f64 = 0.45;
pub const DEFAULT_TWO_BUMP_KAPPA: f64 = 1.5;
pub const SECOND_BUMP_AMPLITUDE: f64 = 0.6;

pub const BUILTIN_METRICS: [&str; 4] = ["flat", "conformal_bump", "conformal_two_bumps", "diagonal_warp"];

/// Built-in metric by name on a cubic cell of side `box_length`.
pub fn builtin_metric<T: Real>(name: &str, params: &[T], box_length: T) -> Result<MetricChart<T>> {
    if !(box_length > T::zero()) || !box_length.is_finite() {
        return Err(Error::BadParams(format!("box length must be positive, got {box_length}")));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::BadParams("parameters must be finite".into()));
    }
    let l = box_length;
    let arity = |lo: usize, hi: usize| -> Result<()> {
        if params.len() < lo || params.len() > hi {
            Err(Error::BadParams(format!("`{name}` takes {lo}..={hi} parameters, got {}", params.len())))
        } else {
            Ok(())
        }
    };
    let family = match name {
        "flat" => {
            arity(0, 0)?;
            MetricFamily::Flat
        }
        "conformal_bump" | "conformal_two_bumps" => {
            arity(1, 2)?;
            let delta = params[0];
            let default_kappa = if name == "conformal_bump" { 0.0 } else { DEFAULT_TWO_BUMP_KAPPA };
            let kappa = params.get(1).copied().unwrap_or(lit(default_kappa));
            if kappa < T::zero() {
                return Err(Error::BadParams(format!("bump sharpness must be >= 0, got {kappa}")));
            }
            if delta.abs() > lit(2.0) {
                return Err(Error::BadParams(format!("|delta| <= 2 required, got {delta}")));
            }
            let bumps = if name == "conformal_bump" {
                vec![Bump { amplitude: T::one(), center: [l * lit(0.5); 3] }]
            } else {
                vec![
                    Bump { amplitude: T::one(), center: [l * lit(0.25); 3] },
                    Bump { amplitude: lit(SECOND_BUMP_AMPLITUDE), center: [l * lit(0.75); 3] },
                ]
            };
            MetricFamily::Conformal { delta, kappa, bumps }
        }
        "diagonal_warp" => {
            arity(1, 1)?;
            let delta = params[0];
            if delta.abs() * lit(1.5) >= T::one() - lit(1e-6) {
                return Err(Error::BadParams(format!("diagonal_warp needs |delta| < 2/3, got {delta}")));
            }
            MetricFamily::DiagonalWarp { delta }
        }
        other => return Err(Error::UnknownMetric(other.to_string())),
    };
    MetricChart::new(name.to_string(), params.to_vec(), [l; 3], family)
}

impl<T: Real> MetricChart<T> {
    fn new(name: String, params: Vec<T>, box_lengths: Vec3<T>, family: MetricFamily<T>) -> Result<Self> {
        let mut chart = Self {
            name,
            params,
            box_lengths,
            family,
            derivative_mode: DerivativeMode::Analytic,
            cutoff_radius: min3(&box_lengths) / lit(4.0),
            geodesic_tol: lit::<T>(1e-11).max(T::EPS * lit(100.0)),
            min_eigenvalue: T::zero(),
        };
        chart.min_eigenvalue = chart.sample_min_eigenvalue()?;
        Ok(chart)
    }

    /// Chart from a nodal coefficient table.
    pub fn from_table(name: &str, table: CoefficientTable<T>) -> Result<Self> {
        let box_lengths = table.box_lengths();
        Self::new(name.to_string(), Vec::new(), box_lengths, MetricFamily::Table(Arc::new(table)))
    }

    fn sample_min_eigenvalue(&self) -> Result<T> {
        let m = 12;
        let mut lo = T::infinity();
        for idx in 0..m * m * m {
            let (i, j, k) = (idx % m, (idx / m) % m, idx / (m * m));
            let x = [
                self.box_lengths[0] * (T::from_usize_lossy(i) + lit(0.37)) / T::from_usize_lossy(m),
                self.box_lengths[1] * (T::from_usize_lossy(j) + lit(0.21)) / T::from_usize_lossy(m),
                self.box_lengths[2] * (T::from_usize_lossy(k) + lit(0.53)) / T::from_usize_lossy(m),
            ];
            let ev = sym_eigenvalues(&self.metric(&x))[0];
            if !(ev >= lit(1e-6)) {
                return Err(Error::SingularMetric(x[0].to_f64_lossy(), x[1].to_f64_lossy(), x[2].to_f64_lossy()));
            }
            lo = lo.min(ev);
        }
        Ok(lo)
    }

    pub fn with_cutoff_radius(mut self, r: T) -> Result<Self> {
        let max = min3(&self.box_lengths) * lit(MAX_CUTOFF_FRACTION);
        if !(r > T::zero() && r <= max) {
            return Err(Error::BadParams(format!("cutoff radius must lie in (0, {max}], got {r}")));
        }
        self.cutoff_radius = r;
        Ok(self)
    }

    pub fn with_derivative_mode(mut self, mode: DerivativeMode<T>) -> Result<Self> {
        if let DerivativeMode::FiniteDifference(h) = mode {
            if !(h > T::zero()) {
                return Err(Error::BadParams(format!("finite-difference step must be positive, got {h}")));
            }
        }
        self.derivative_mode = mode;
        Ok(self)
    }

    pub fn with_geodesic_tol(mut self, tol: T) -> Self {
        self.geodesic_tol = tol;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn box_lengths(&self) -> Vec3<T> {
        self.box_lengths
    }

    pub fn family(&self) -> &MetricFamily<T> {
        &self.family
    }

    pub fn derivative_mode(&self) -> DerivativeMode<T> {
        self.derivative_mode
    }

    pub fn cutoff_radius(&self) -> T {
        self.cutoff_radius
    }

    /// Smallest metric eigenvalue over the construction sample.
    pub fn min_eigenvalue(&self) -> T {
        self.min_eigenvalue
    }

    pub fn is_flat(&self) -> bool {
        match &self.family {
            MetricFamily::Flat => true,
            MetricFamily::Conformal { delta, .. } | MetricFamily::DiagonalWarp { delta } => *delta == T::zero(),
            MetricFamily::Table(_) => false,
        }
    }

    pub fn wrap(&self, x: &Vec3<T>) -> Vec3<T> {
        let mut out = *x;
        for a in 0..3 {
            let l = self.box_lengths[a];
            out[a] = x[a] - l * (x[a] / l).floor();
            if out[a] >= l {
                out[a] = out[a] - l;
            }
        }
        out
    }

    /// Shortest periodic representative of `x - xi`.
    pub fn periodic_displacement(&self, xi: &Vec3<T>, x: &Vec3<T>) -> Vec3<T> {
        let mut d = [T::zero(); 3];
        for a in 0..3 {
            let l = self.box_lengths[a];
            let raw = x[a] - xi[a];
            d[a] = raw - l * (raw / l).round();
        }
        d
    }

    pub fn metric(&self, x: &Vec3<T>) -> Mat3<T> {
        self.family.metric(x, &self.box_lengths)
    }

    pub fn jet(&self, x: &Vec3<T>) -> MetricJet<T> {
        match self.derivative_mode {
            DerivativeMode::Analytic => self
                .family
                .analytic_jet(x, &self.box_lengths)
                .unwrap_or_else(|| self.fd_jet(x, min3(&self.box_lengths) * lit(1e-3))),
            DerivativeMode::FiniteDifference(h) => self.fd_jet(x, h),
        }
    }

    fn fd_jet(&self, x: &Vec3<T>, h: T) -> MetricJet<T> {
        let at = |off: &[(usize, T)]| {
            let mut y = *x;
            for (ax, s) in off {
                y[*ax] += *s;
            }
            self.metric(&y)
        };
        let c1 = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
        let c2 = [(-2.0, -1.0 / 12.0), (-1.0, 16.0 / 12.0), (0.0, -30.0 / 12.0), (1.0, 16.0 / 12.0), (2.0, -1.0 / 12.0)];
        let mut jet = MetricJet { g: self.metric(x), dg: [zero3(); 3], d2g: [[zero3(); 3]; 3] };
        let add = |acc: &mut Mat3<T>, m: &Mat3<T>, w: T| {
            for i in 0..3 {
                for j in 0..3 {
                    acc[i][j] += w * m[i][j];
                }
            }
        };
        for l in 0..3 {
            for (s, w) in c1 {
                add(&mut jet.dg[l], &at(&[(l, lit::<T>(s) * h)]), lit::<T>(w) / h);
            }
            for (s, w) in c2 {
                add(&mut jet.d2g[l][l], &at(&[(l, lit::<T>(s) * h)]), lit::<T>(w) / (h * h));
            }
            for m in (l + 1)..3 {
                let mut mixed = zero3();
                for (s1, w1) in c1 {
                    for (s2, w2) in c1 {
                        let pt = at(&[(l, lit::<T>(s1) * h), (m, lit::<T>(s2) * h)]);
                        add(&mut mixed, &pt, lit::<T>(w1 * w2) / (h * h));
                    }
                }
                jet.d2g[l][m] = mixed;
                jet.d2g[m][l] = mixed;
            }
        }
        jet
    }

    fn singular(&self, x: &Vec3<T>) -> Error {
        Error::SingularMetric(x[0].to_f64_lossy(), x[1].to_f64_lossy(), x[2].to_f64_lossy())
    }

    fn conformal_fast_path(&self) -> Option<(T, T, &[Bump<T>])> {
        match (&self.family, self.derivative_mode) {
            (MetricFamily::Conformal { delta, kappa, bumps }, DerivativeMode::Analytic) => Some((*delta, *kappa, bumps)),
            _ => None,
        }
    }

    pub fn christoffel(&self, x: &Vec3<T>) -> Result<Christoffel<T>> {
        Ok(self.christoffel_and_derivative(x, false)?.0)
    }

    /// `Γ^k_ij` and, when requested, `∂_l Γ^k_ij` stored as `[l][k][i][j]`.
    pub fn christoffel_and_derivative(&self, x: &Vec3<T>, with_derivative: bool) -> Result<(Christoffel<T>, [Christoffel<T>; 3])> {
        let mut gam = [[[T::zero(); 3]; 3]; 3];
        let mut dgam = [[[[T::zero(); 3]; 3]; 3]; 3];
        if let Some((delta, kappa, bumps)) = self.conformal_fast_path() {
            // Γ^k_ij = δ_ik ∂_jφ + δ_jk ∂_iφ - δ_ij ∂_kφ
            let (_, grad, hess) = conformal_potential(delta, kappa, bumps, x, &self.box_lengths);
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        let mut v = T::zero();
                        if i == k {
                            v += grad[j];
                        }
                        if j == k {
                            v += grad[i];
                        }
                        if i == j {
                            v -= grad[k];
                        }
                        gam[k][i][j] = v;
                        if with_derivative {
                            for l in 0..3 {
                                let mut d = T::zero();
                                if i == k {
                                    d += hess[l][j];
                                }
                                if j == k {
                                    d += hess[l][i];
                                }
                                if i == j {
                                    d -= hess[l][k];
                                }
                                dgam[l][k][i][j] = d;
                            }
                        }
                    }
                }
            }
            return Ok((gam, dgam));
        }
        let jet = self.jet(x);
        let ginv = inverse3(&jet.g).ok_or_else(|| self.singular(x))?;
        // first kind: Γ_{m,ij} = ½(∂_i g_jm + ∂_j g_im - ∂_m g_ij)
        let half = lit::<T>(0.5);
        let mut first = [[[T::zero(); 3]; 3]; 3];
        for m in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    first[m][i][j] = half * (jet.dg[i][j][m] + jet.dg[j][i][m] - jet.dg[m][i][j]);
                }
            }
        }
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    gam[k][i][j] = (0..3).map(|m| ginv[k][m] * first[m][i][j]).sum();
                }
            }
        }
        if with_derivative {
            for l in 0..3 {
                // ∂_l g^{km} = -g^{ka} ∂_l g_ab g^{bm}
                let dginv = mat_mul(&mat_mul(&ginv, &jet.dg[l]), &ginv);
                for k in 0..3 {
                    for i in 0..3 {
                        for j in 0..3 {
                            let mut acc = T::zero();
                            for m in 0..3 {
                                let dfirst = half * (jet.d2g[l][i][j][m] + jet.d2g[l][j][i][m] - jet.d2g[l][m][i][j]);
                                acc += ginv[k][m] * dfirst - dginv[k][m] * first[m][i][j];
                            }
                            dgam[l][k][i][j] = acc;
                        }
                    }
                }
            }
        }
        Ok((gam, dgam))
    }

    /// Ricci tensor `R_ij = ∂_k Γ^k_ij - ∂_j Γ^k_ik + Γ^k_kl Γ^l_ij - Γ^k_jl Γ^l_ik`.
    pub fn ricci(&self, x: &Vec3<T>) -> Result<Mat3<T>> {
        let (g, dg) = self.christoffel_and_derivative(x, true)?;
        let mut ric = zero3();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = T::zero();
                for k in 0..3 {
                    acc += dg[k][k][i][j] - dg[j][k][i][k];
                    for l in 0..3 {
                        acc += g[k][k][l] * g[l][i][j] - g[k][j][l] * g[l][i][k];
                    }
                }
                ric[i][j] = acc;
            }
        }
        Ok(ric)
    }

    pub fn scalar_curvature(&self, x: &Vec3<T>) -> Result<T> {
        let ric = self.ricci(x)?;
        let ginv = inverse3(&self.metric(x)).ok_or_else(|| self.singular(x))?;
        let mut s = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                s += ginv[i][j] * ric[i][j];
            }
        }
        Ok(s)
    }

    /// Closed-form scalar curvature of a conformal family,
    /// `S = e^{-2φ}(-4Δφ - 2|∇φ|²)`; `None` for other families.
    pub fn conformal_scalar_curvature(&self, x: &Vec3<T>) -> Option<T> {
        match &self.family {
            MetricFamily::Conformal { delta, kappa, bumps } => {
                let (phi, grad, hess) = conformal_potential(*delta, *kappa, bumps, x, &self.box_lengths);
                let lap = hess[0][0] + hess[1][1] + hess[2][2];
                Some((-lit::<T>(2.0) * phi).exp() * (-lit::<T>(4.0) * lap - lit::<T>(2.0) * dot3(&grad, &grad)))
            }
            MetricFamily::Flat => Some(T::zero()),
            _ => None,
        }
    }

    /// Centres of the conformal bumps, if any.
    pub fn bump_centers(&self) -> Vec<Vec3<T>> {
        match &self.family {
            MetricFamily::Conformal { bumps, .. } => bumps.iter().map(|b| b.center).collect(),
            _ => Vec::new(),
        }
    }

    /// Central-difference gradient of `S_g`.
    pub fn scalar_curvature_gradient(&self, x: &Vec3<T>) -> Result<Vec3<T>> {
        let h = min3(&self.box_lengths) * lit(1e-4);
        let mut grad = [T::zero(); 3];
        for a in 0..3 {
            let mut p = *x;
            let mut m = *x;
            p[a] += h;
            m[a] -= h;
            grad[a] = (self.scalar_curvature(&p)? - self.scalar_curvature(&m)?) / (lit::<T>(2.0) * h);
        }
        Ok(grad)
    }

    fn geodesic_control(&self) -> StepControl<T> {
        let mut ctl = StepControl::new(self.geodesic_tol);
        ctl.max_steps = 20_000;
        ctl
    }

    fn acceleration(&self, x: &Vec3<T>, v: &Vec3<T>) -> Vec3<T> {
        match self.christoffel(x) {
            Ok(g) => {
                let mut a = [T::zero(); 3];
                for k in 0..3 {
                    a[k] = -bilinear(&g[k], v, v);
                }
                a
            }
            Err(_) => [T::nan(); 3],
        }
    }

    /// Integrates the geodesic from `(xi, v)` over time `t`; returns the
    /// unwrapped end point and velocity.
    pub fn geodesic_flow(&self, xi: &Vec3<T>, v: &Vec3<T>, t: T) -> Result<(Vec3<T>, Vec3<T>)> {
        let y0 = [xi[0], xi[1], xi[2], v[0], v[1], v[2]];
        let rhs = |_t: T, y: &[T; 6]| {
            let a = self.acceleration(&[y[0], y[1], y[2]], &[y[3], y[4], y[5]]);
            [y[3], y[4], y[5], a[0], a[1], a[2]]
        };
        let h0 = lit::<T>(0.25) * min3(&self.box_lengths) / (norm3(v) + T::min_positive_value());
        let (y, _) = ode::integrate(rhs, T::zero(), y0, t, h0.min(t.abs().max(T::min_positive_value())), &self.geodesic_control())
            .map_err(|e| Error::StepFailure(format!("geodesic at t = {}: {}", e.t, e.reason)))?;
        Ok(([y[0], y[1], y[2]], [y[3], y[4], y[5]]))
    }

    /// `exp_ξ(v)`, wrapped into the cell.
    pub fn exp_map(&self, xi: &Vec3<T>, v: &Vec3<T>) -> Result<Vec3<T>> {
        if v.iter().all(|c| *c == T::zero()) {
            return Ok(self.wrap(xi));
        }
        Ok(self.wrap(&self.geodesic_flow(xi, v, T::one())?.0))
    }

    /// Unwrapped `exp_ξ(v)` together with its differential `d exp_ξ|_v`.
    pub fn exp_with_differential(&self, xi: &Vec3<T>, v: &Vec3<T>) -> Result<(Vec3<T>, Mat3<T>)> {
        let (x, _, j, _) = self.variational_flow(xi, v, T::one())?;
        Ok((x, j))
    }

    /// Geodesic with its Jacobi matrices `J = ∂x/∂v₀`, `K = ∂ẋ/∂v₀` at time `t`.
    pub fn variational_flow(&self, xi: &Vec3<T>, v: &Vec3<T>, t: T) -> Result<(Vec3<T>, Vec3<T>, Mat3<T>, Mat3<T>)> {
        let mut y0 = [T::zero(); 24];
        y0[..3].copy_from_slice(xi);
        y0[3..6].copy_from_slice(v);
        for a in 0..3 {
            y0[15 + 3 * a + a] = T::one();
        }
        let (y, _) = self.variational_step(y0, T::zero(), t)?;
        Ok(unpack_variational(&y))
    }

    fn variational_step(&self, y0: [T; 24], t0: T, t1: T) -> Result<([T; 24], T)> {
        let rhs = |_t: T, y: &[T; 24]| {
            let x = [y[0], y[1], y[2]];
            let v = [y[3], y[4], y[5]];
            let mut out = [T::zero(); 24];
            let Ok((g, dg)) = self.christoffel_and_derivative(&x, true) else {
                return [T::nan(); 24];
            };
            out[0] = v[0];
            out[1] = v[1];
            out[2] = v[2];
            for k in 0..3 {
                out[3 + k] = -bilinear(&g[k], &v, &v);
            }
            // J' = K, K'^k_a = -∂_l Γ^k_ij J^l_a v^i v^j - 2 Γ^k_ij v^i K^j_a
            for idx in 0..9 {
                out[6 + idx] = y[15 + idx];
            }
            let mut dgvv = [[T::zero(); 3]; 3]; // [k][l]
            for l in 0..3 {
                for k in 0..3 {
                    dgvv[k][l] = bilinear(&dg[l][k], &v, &v);
                }
            }
            let mut gv = [[T::zero(); 3]; 3]; // [k][j] = Γ^k_ij v^i
            for k in 0..3 {
                for j in 0..3 {
                    gv[k][j] = (0..3).map(|i| g[k][i][j] * v[i]).sum();
                }
            }
            for k in 0..3 {
                for a in 0..3 {
                    let mut acc = T::zero();
                    for l in 0..3 {
                        acc -= dgvv[k][l] * y[6 + 3 * l + a];
                        acc -= lit::<T>(2.0) * gv[k][l] * y[15 + 3 * l + a];
                    }
                    out[15 + 3 * k + a] = acc;
                }
            }
            out
        };
        let speed = norm3(&[y0[3], y0[4], y0[5]]);
        let h0 = (lit::<T>(0.25) * min3(&self.box_lengths) / (speed + T::min_positive_value())).min((t1 - t0).abs().max(T::min_positive_value()));
        ode::integrate(rhs, t0, y0, t1, h0, &self.geodesic_control())
            .map_err(|e| Error::StepFailure(format!("geodesic variation at t = {}: {}", e.t, e.reason)))
    }

    /// Samples the geodesic from `(xi, u)` together with `d exp_ξ|_{t u}` at the
    /// increasing times `ts` (all positive). Used for radial sweeps in normal
    /// coordinates.
    pub fn radial_sweep(&self, xi: &Vec3<T>, u: &Vec3<T>, ts: &[T]) -> Result<Vec<(Vec3<T>, Mat3<T>)>> {
        let mut y = [T::zero(); 24];
        y[..3].copy_from_slice(xi);
        y[3..6].copy_from_slice(u);
        for a in 0..3 {
            y[15 + 3 * a + a] = T::one();
        }
        let mut t = T::zero();
        let mut out = Vec::with_capacity(ts.len());
        for &tn in ts {
            if tn > t {
                y = self.variational_step(y, t, tn)?.0;
                t = tn;
            }
            let (x, _, j, _) = unpack_variational(&y);
            let mut d = j;
            if tn > T::zero() {
                for row in d.iter_mut() {
                    for c in row.iter_mut() {
                        *c = *c / tn;
                    }
                }
            } else {
                d = identity3();
            }
            out.push((x, d));
        }
        Ok(out)
    }

    /// `exp_ξ⁻¹(x)` in coordinate components by Newton iteration on the exponential map.
    pub fn log_map(&self, xi: &Vec3<T>, x: &Vec3<T>) -> Result<Vec3<T>> {
        self.log_map_from(xi, x, self.periodic_displacement(xi, x))
    }

    /// Newton iteration from an explicit initial velocity.
    pub fn log_map_from(&self, xi: &Vec3<T>, x: &Vec3<T>, guess: Vec3<T>) -> Result<Vec3<T>> {
        let g0 = self.metric(xi);
        let radius = self.cutoff_radius;
        let outside = || Error::OutsideBall { radius: radius.to_f64_lossy() };
        let target = self.periodic_displacement(xi, x);
        if target.iter().all(|c| *c == T::zero()) {
            return Ok([T::zero(); 3]);
        }
        let tol = self.geodesic_tol * lit(10.0) * (T::one() + min3(&self.box_lengths));
        let mut v = guess;
        let residual = |end: &Vec3<T>| -> Vec3<T> {
            // end point relative to ξ, compared with the target displacement
            let mut r = [T::zero(); 3];
            for a in 0..3 {
                let l = self.box_lengths[a];
                let raw = end[a] - xi[a] - target[a];
                r[a] = raw - l * (raw / l).round();
            }
            r
        };
        let (mut end, mut jac) = self.exp_with_differential(xi, &v)?;
        let mut res = residual(&end);
        let mut res_norm = norm3(&res);
        for _ in 0..40 {
            if res_norm <= tol {
                if bilinear(&g0, &v, &v).sqrt() > radius * (T::one() + lit(1e-9)) {
                    return Err(outside());
                }
                return Ok(v);
            }
            let inv = inverse3(&jac).ok_or_else(outside)?;
            let step = mat_vec(&inv, &res);
            let mut scale = T::one();
            let mut accepted = false;
            for _ in 0..8 {
                let trial = [v[0] - scale * step[0], v[1] - scale * step[1], v[2] - scale * step[2]];
                if bilinear(&g0, &trial, &trial).sqrt() > radius * lit(2.0) {
                    scale = scale * lit(0.5);
                    continue;
                }
                let (e, j) = self.exp_with_differential(xi, &trial)?;
                let r = residual(&e);
                let rn = norm3(&r);
                if rn < res_norm || rn <= tol {
                    v = trial;
                    end = e;
                    jac = j;
                    res = r;
                    res_norm = rn;
                    accepted = true;
                    break;
                }
                scale = scale * lit(0.5);
            }
            if !accepted {
                if res_norm <= tol * lit(100.0) {
                    break;
                }
                return Err(Error::NoConvergence(format!("log map stalled at residual {:e}", res_norm.to_f64_lossy())));
            }
        }
        let _ = end;
        if res_norm > tol * lit(100.0) {
            return Err(Error::NoConvergence(format!("log map residual {:e} after 40 Newton steps", res_norm.to_f64_lossy())));
        }
        if bilinear(&g0, &v, &v).sqrt() > radius * (T::one() + lit(1e-9)) {
            return Err(outside());
        }
        Ok(v)
    }

    /// Riemannian distance `|log_ξ x|_{g(ξ)}` inside the cutoff ball.
    pub fn distance(&self, xi: &Vec3<T>, x: &Vec3<T>) -> Result<T> {
        let v = self.log_map(xi, x)?;
        Ok(bilinear(&self.metric(xi), &v, &v).sqrt())
    }

    /// Gram–Schmidt of the coordinate basis in `g(ξ)`, `e₁` first.
    pub fn normal_frame(&self, xi: &Vec3<T>) -> Result<NormalFrame<T>> {
        let g = self.metric(xi);
        let mut e = [[T::zero(); 3]; 3];
        for a in 0..3 {
            let mut v = [T::zero(); 3];
            v[a] = T::one();
            for b in 0..a {
                let proj = bilinear(&g, &v, &e[b]);
                for c in 0..3 {
                    v[c] -= proj * e[b][c];
                }
            }
            let nrm = bilinear(&g, &v, &v);
            if !(nrm > T::zero()) {
                return Err(self.singular(xi));
            }
            let nrm = nrm.sqrt();
            for c in 0..3 {
                e[a][c] = v[c] / nrm;
            }
        }
        Ok(NormalFrame { base: self.wrap(xi), e, g0: g })
    }

    /// Metric of normal coordinates `g_ξ(z)` and `|g_ξ(z)|^{1/2}`.
    pub fn metric_in_normal_coords(&self, frame: &NormalFrame<T>, z: &Vec3<T>) -> Result<(Mat3<T>, T)> {
        let v = frame.to_coordinates(z);
        let (x, j) = self.exp_with_differential(&frame.base, &v)?;
        Ok(self.pullback(&x, &j, frame))
    }

    /// `g(x)(J e_a, J e_b)` for the differential `J` of the exponential map.
    pub fn pullback(&self, x: &Vec3<T>, j: &Mat3<T>, frame: &NormalFrame<T>) -> (Mat3<T>, T) {
        let gx = self.metric(x);
        let cols: [Vec3<T>; 3] = [mat_vec(j, &frame.e[0]), mat_vec(j, &frame.e[1]), mat_vec(j, &frame.e[2])];
        let mut out = zero3();
        for a in 0..3 {
            for b in 0..3 {
                out[a][b] = bilinear(&gx, &cols[a], &cols[b]);
            }
        }
        let d = det3(&out).max(T::zero()).sqrt();
        (out, d)
    }
}

fn unpack_variational<T: Real>(y: &[T; 24]) -> (Vec3<T>, Vec3<T>, Mat3<T>, Mat3<T>) {
    let mut j = zero3();
    let mut k = zero3();
    for r in 0..3 {
        for c in 0..3 {
            j[r][c] = y[6 + 3 * r + c];
            k[r][c] = y[15 + 3 * r + c];
        }
    }
    ([y[0], y[1], y[2]], [y[3], y[4], y[5]], j, k)
}

/// A `g(ξ)`-orthonormal frame at `ξ`; `e[a]` holds coordinate components.
#[derive(Clone, Copy, Debug)]
pub struct NormalFrame<T> {
    pub base: Vec3<T>,
    pub e: [Vec3<T>; 3],
    pub g0: Mat3<T>,
}

impl<T: Real> NormalFrame<T> {
    /// `Σ_a z_a e_a`
    pub fn to_coordinates(&self, z: &Vec3<T>) -> Vec3<T> {
        let mut v = [T::zero(); 3];
        for a in 0..3 {
            for c in 0..3 {
                v[c] += z[a] * self.e[a][c];
            }
        }
        v
    }

    /// Frame components `z_a = g(ξ)(v, e_a)`.
    pub fn to_frame(&self, v: &Vec3<T>) -> Vec3<T> {
        [bilinear(&self.g0, v, &self.e[0]), bilinear(&self.g0, v, &self.e[1]), bilinear(&self.g0, v, &self.e[2])]
    }

    pub fn orthonormality_defect(&self) -> T {
        let mut worst = T::zero();
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { T::one() } else { T::zero() };
                worst = worst.max((bilinear(&self.g0, &self.e[a], &self.e[b]) - want).abs());
            }
        }
        worst
    }
}
