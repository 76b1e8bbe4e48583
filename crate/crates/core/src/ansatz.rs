//! Peak ansatz `W_{ε,ξ}`, kernel fields `Z^i_{ε,ξ}` and the energy functionals.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{
    adjoint_istar, dot, g_nonlinearity, solve_psi, EllipticOperator, GridField, GridGeometry, SystemKind, SystemParams,
};
use crate::geometry::linalg::*;
use crate::geometry::{cutoff_chi, cutoff_chi_jet, MetricChart, NormalFrame};
use crate::quadrature::gauss_legendre;
use crate::radial::RadialProfile;
use crate::scalar::{lit, Real};

/// Default grid points per unit of ε required by [`build_ansatz`].
pub const DEFAULT_POINTS_PER_EPS: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnsatzOptions<T> {
    /// Minimum of `ε / h` over the three axes.
    pub points_per_eps: T,
}

impl<T: Real> Default for AnsatzOptions<T> {
    fn default() -> Self {
        Self { points_per_eps: lit(DEFAULT_POINTS_PER_EPS) }
    }
}

/// Integrator tolerance for the per-node logarithms.
pub const LOG_MAP_ODE_TOL: f64 = 1e-10;

/// Normal coordinates `z = log_ξ(x)` (frame components) of every grid node in
/// the cutoff ball around `ξ`. Independent of ε, so one set serves a whole ε sweep.
#[derive(Clone, Debug)]
pub struct NormalCoordinates<T: Real> {
    geom: Arc<GridGeometry<T>>,
    xi: Vec3<T>,
    frame: NormalFrame<T>,
    nodes: Vec<usize>,
    z: Vec<Vec3<T>>,
}

impl<T: Real> NormalCoordinates<T> {
    pub fn compute(geom: &Arc<GridGeometry<T>>, xi: &Vec3<T>) -> Result<Self> {
        let chart = &geom.chart().as_ref().clone().with_geodesic_tol(lit::<T>(LOG_MAP_ODE_TOL).max(T::EPS * lit(100.0)));
        let xi = chart.wrap(xi);
        let frame = chart.normal_frame(&xi)?;
        let r = chart.cutoff_radius();
        let reach = r / chart.min_eigenvalue().sqrt() * lit(1.02);
        let n = geom.n();
        let h = geom.spacing();
        let mut solved: Vec<Option<(Vec3<T>, Mat3<T>)>> = vec![None; geom.len()];
        let mut nodes = Vec::new();
        let mut z = Vec::new();
        let newton_tol = lit::<T>(1e-9) * (T::one() + reach);
        // geodesics of a flat chart are straight lines
        let flat = chart.is_flat();
        for idx in 0..geom.len() {
            let x = geom.node(idx);
            let disp = chart.periodic_displacement(&xi, &x);
            if norm3(&disp) > reach {
                continue;
            }
            if flat {
                let zf = frame.to_frame(&disp);
                if norm3(&zf) < r {
                    nodes.push(idx);
                    z.push(zf);
                }
                continue;
            }
            let (i, j, k) = geom.ijk(idx);
            let neighbours = [
                (geom.index((i + n - 1) % n, j, k), 0),
                (geom.index(i, (j + n - 1) % n, k), 1),
                (geom.index(i, j, (k + n - 1) % n), 2),
            ];
            let line: Vec<Vec3<T>> = (1..=3)
                .map_while(|s| if i >= s { solved[geom.index(i - s, j, k)].map(|(v, _)| v) } else { None })
                .collect();
            // cubic extrapolation along the row, else v_nb + (d exp)⁻¹ Δx
            let guess = if line.len() == 3 {
                Some([0, 1, 2].map(|c| lit::<T>(3.0) * (line[0][c] - line[1][c]) + line[2][c]))
            } else {
                None
            };
            let guess = guess.or_else(|| neighbours.iter().find_map(|(nb, axis)| {
                solved[*nb].map(|(v, jinv)| {
                    let mut out = v;
                    for c in 0..3 {
                        out[c] += jinv[c][*axis] * h[*axis];
                    }
                    out
                })
            }));
            let found = match guess {
                Some(g) => continued_log(chart, &xi, &disp, g, newton_tol)?,
                None => None,
            };
            let (v, jinv) = match found {
                Some(pair) => pair,
                None => {
                    let v = match chart.log_map_from(&xi, &x, disp) {
                        Ok(v) => v,
                        Err(Error::OutsideBall { .. }) => continue,
                        Err(Error::NoConvergence(_)) if bilinear(&frame.g0, &disp, &disp).sqrt() > lit::<T>(0.8) * r => {
                            continue
                        }
                        Err(e) => return Err(e),
                    };
                    let (_, jac) = chart.exp_with_differential(&xi, &v)?;
                    (v, inverse3(&jac).unwrap_or_else(identity3))
                }
            };
            if bilinear(&frame.g0, &v, &v).sqrt() > r * lit(1.5) {
                continue;
            }
            solved[idx] = Some((v, jinv));
            let zf = frame.to_frame(&v);
            if norm3(&zf) < r {
                nodes.push(idx);
                z.push(zf);
            }
        }
        Ok(Self { geom: geom.clone(), xi, frame, nodes, z })
    }

    pub fn xi(&self) -> Vec3<T> {
        self.xi
    }

    pub fn frame(&self) -> &NormalFrame<T> {
        &self.frame
    }

    pub fn geometry(&self) -> &Arc<GridGeometry<T>> {
        &self.geom
    }

    /// Grid indices inside the ball, ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn coords(&self) -> &[Vec3<T>] {
        &self.z
    }
}

/// `W_{ε,ξ}` with its kernel fields.
#[derive(Clone, Debug)]
pub struct PeakAnsatz<T: Real> {
    pub eps: T,
    pub xi: Vec3<T>,
    pub frame: NormalFrame<T>,
    pub w: GridField<T>,
    pub z: [GridField<T>; 3],
    pub coords: Arc<NormalCoordinates<T>>,
}

/// Newton on `exp_ξ(v) = ξ + target` from a close guess. Returns `None` when
/// the iteration does not settle within a few steps, leaving the caller to
/// fall back on the damped solver.
fn continued_log<T: Real>(
    chart: &MetricChart<T>,
    xi: &Vec3<T>,
    target: &Vec3<T>,
    guess: Vec3<T>,
    tol: T,
) -> Result<Option<(Vec3<T>, Mat3<T>)>> {
    let box_lengths = chart.box_lengths();
    let mut v = guess;
    for _ in 0..4 {
        let (end, jac) = match chart.exp_with_differential(xi, &v) {
            Ok(pair) => pair,
            Err(_) => return Ok(None),
        };
        let mut res = [T::zero(); 3];
        for a in 0..3 {
            let l = box_lengths[a];
            let raw = end[a] - xi[a] - target[a];
            res[a] = raw - l * (raw / l).round();
        }
        let jinv = match inverse3(&jac) {
            Some(m) => m,
            None => return Ok(None),
        };
        let step = mat_vec(&jinv, &res);
        for a in 0..3 {
            v[a] -= step[a];
        }
        // quadratic convergence: the error after this step is O(|step|²)
        let s = norm3(&step);
        if s * s <= tol || norm3(&res) <= tol * lit(1e-3) {
            return Ok(Some((v, jinv)));
        }
    }
    Ok(None)
}

fn check_scale<T: Real>(geom: &GridGeometry<T>, eps: T, options: &AnsatzOptions<T>) -> Result<()> {
    let r = geom.chart().cutoff_radius();
    if !(eps > T::zero()) || eps > r / lit(4.0) {
        return Err(Error::ValidationError(format!("eps = {eps} must lie in (0, r/4] with r = {r}")));
    }
    let h = geom.spacing();
    let hmax = h[0].max(h[1]).max(h[2]);
    if eps / hmax < options.points_per_eps {
        return Err(Error::ResolutionTooCoarse(format!(
            "eps/h = {} is below the required {} points per eps",
            eps / hmax,
            options.points_per_eps
        )));
    }
    Ok(())
}

pub fn build_ansatz<T: Real>(
    geom: &Arc<GridGeometry<T>>,
    xi: &Vec3<T>,
    eps: T,
    profile: &RadialProfile<T>,
    options: &AnsatzOptions<T>,
) -> Result<PeakAnsatz<T>> {
    check_scale(geom, eps, options)?;
    let coords = Arc::new(NormalCoordinates::compute(geom, xi)?);
    build_ansatz_from(&coords, eps, profile, options)
}

/// [`build_ansatz`] reusing precomputed normal coordinates.
pub fn build_ansatz_from<T: Real>(
    coords: &Arc<NormalCoordinates<T>>,
    eps: T,
    profile: &RadialProfile<T>,
    options: &AnsatzOptions<T>,
) -> Result<PeakAnsatz<T>> {
    let geom = coords.geometry();
    check_scale(geom, eps, options)?;
    let r = geom.chart().cutoff_radius();
    let len = geom.len();
    let mut w = vec![T::zero(); len];
    let mut z: [Vec<T>; 3] = [vec![T::zero(); len], vec![T::zero(); len], vec![T::zero(); len]];
    for (idx, zc) in coords.nodes.iter().zip(&coords.z) {
        let rho = norm3(zc);
        let chi = cutoff_chi(r, rho);
        let s = rho / eps;
        w[*idx] = profile.eval(s) * chi;
        if rho > T::zero() {
            let du = profile.eval_derivative(s) * chi / rho;
            for a in 0..3 {
                z[a][*idx] = du * zc[a];
            }
        }
    }
    let [z0, z1, z2] = z;
    Ok(PeakAnsatz {
        eps,
        xi: coords.xi,
        frame: coords.frame,
        w: GridField::new(geom.clone(), w)?.with_eps(eps),
        z: [
            GridField::new(geom.clone(), z0)?.with_eps(eps),
            GridField::new(geom.clone(), z1)?.with_eps(eps),
            GridField::new(geom.clone(), z2)?.with_eps(eps),
        ],
        coords: coords.clone(),
    })
}

impl<T: Real> PeakAnsatz<T> {
    /// `⟨Z^i, Z^j⟩_ε`
    pub fn gram(&self, lambda: T) -> Mat3<T> {
        let op = EllipticOperator::new(self.eps * self.eps, lambda, None);
        let geom = self.w.geometry();
        let bz: Vec<Vec<T>> = self.z.iter().map(|f| op.apply_matrix(geom, f.values())).collect();
        let e3 = self.eps.powi(3);
        let mut m = zero3();
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = dot(self.z[i].values(), &bz[j]) / e3;
            }
        }
        m
    }

    /// Largest `|G_ij| / √(G_ii G_jj)` for `i ≠ j`.
    pub fn gram_leakage(&self, lambda: T) -> T {
        let g = self.gram(lambda);
        let mut worst = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    worst = worst.max(g[i][j].abs() / (g[i][i] * g[j][j]).sqrt());
                }
            }
        }
        worst
    }
}

/// `(u⁺)^{p-1}`
pub fn nonlinearity_f<T: Real>(u: &GridField<T>, p_exp: T) -> GridField<T> {
    let e = p_exp - T::one();
    u.map(|v| if v > T::zero() { v.powf(e) } else { T::zero() })
}

/// `(p-1)(u⁺)^{p-2}`
pub fn nonlinearity_f_prime<T: Real>(u: &GridField<T>, p_exp: T) -> GridField<T> {
    let e = p_exp - lit(2.0);
    let c = p_exp - T::one();
    u.map(|v| if v > T::zero() { c * v.powf(e) } else { T::zero() })
}

/// `ε⁻³∫[½ε²|∇_g u|² + (λ/2)u² - (1/p)(u⁺)^p] dμ_g`
pub fn energy_j<T: Real>(u: &GridField<T>, eps: T, params: &SystemParams<T>) -> Result<T> {
    let geom = u.geometry();
    let bu = EllipticOperator::new(eps * eps, params.lambda(), None).apply_matrix(geom, u.values());
    let quad = dot(u.values(), &bu);
    let p = params.p_exp;
    let pot: T = u
        .values()
        .iter()
        .zip(geom.weights())
        .map(|(v, w)| if *v > T::zero() { v.powf(p) * *w } else { T::zero() })
        .sum();
    Ok((lit::<T>(0.5) * quad - pot / p) / eps.powi(3))
}

/// Both normalizations of the field energy.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct FieldEnergy<T> {
    /// `ε⁻³ q ∫Ψ(u)u² dμ_g`
    pub q_weighted: T,
    /// `ε⁻³ ∫Ψ(u)u² dμ_g`
    pub unweighted: T,
}

pub fn energy_g<T: Real>(u: &GridField<T>, eps: T, params: &SystemParams<T>) -> Result<FieldEnergy<T>> {
    let psi = solve_psi(u, params)?;
    Ok(field_energy_with(u, &psi, eps, params))
}

fn field_energy_with<T: Real>(u: &GridField<T>, psi: &GridField<T>, eps: T, params: &SystemParams<T>) -> FieldEnergy<T> {
    let w = u.geometry().weights();
    let total: T = (0..w.len()).map(|i| psi.values()[i] * u.values()[i] * u.values()[i] * w[i]).sum();
    let unweighted = total / eps.powi(3);
    FieldEnergy { q_weighted: params.q * unweighted, unweighted }
}

/// Coefficient of `G_ε` (the `q`-weighted form) in `I_ε`: `ω²/2` (KGM), `ω/(4q)` (SM).
pub fn coupling_coefficient<T: Real>(params: &SystemParams<T>) -> T {
    match params.kind {
        SystemKind::Kgm => params.omega * params.omega / lit(2.0),
        SystemKind::Sm => params.omega / (lit::<T>(4.0) * params.q),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct EnergyParts<T> {
    pub j: T,
    pub g: FieldEnergy<T>,
    pub i: T,
}

pub fn energy_parts<T: Real>(u: &GridField<T>, eps: T, params: &SystemParams<T>) -> Result<EnergyParts<T>> {
    let j = energy_j(u, eps, params)?;
    let g = if params.omega == T::zero() {
        FieldEnergy { q_weighted: T::zero(), unweighted: T::zero() }
    } else {
        energy_g(u, eps, params)?
    };
    Ok(EnergyParts { j, g, i: j + coupling_coefficient(params) * g.q_weighted })
}

/// `I_ε = J_ε + (ω²/2)G_ε` (KGM) or `J_ε + (ω/4q)G_ε` (SM).
pub fn energy_i<T: Real>(u: &GridField<T>, eps: T, params: &SystemParams<T>) -> Result<T> {
    Ok(energy_parts(u, eps, params)?.i)
}

/// `u - i*_ε[f(u) + w·g(u)]`, the `⟨·,·⟩_ε`-gradient of `I_ε`.
pub fn gradient_i<T: Real>(u: &GridField<T>, eps: T, params: &SystemParams<T>) -> Result<GridField<T>> {
    let mut src = nonlinearity_f(u, params.p_exp);
    if params.omega != T::zero() {
        let psi = solve_psi(u, params)?;
        let g = g_nonlinearity(u, &psi, params)?;
        src = src.axpy(params.coupling_weight(), &g)?;
    }
    let v = adjoint_istar(&src, eps, params.lambda())?;
    Ok(u.sub(&v)?.with_eps(eps))
}

/// Angular and radial resolution of [`energy_j_radial`].
#[derive(Clone, Copy, Debug)]
pub struct RadialQuadrature {
    pub polar: usize,
    pub azimuthal: usize,
    /// Gauss panels per unit of `|z|/ε`.
    pub panels_per_unit: usize,
}

impl Default for RadialQuadrature {
    fn default() -> Self {
        Self { polar: 8, azimuthal: 16, panels_per_unit: 4 }
    }
}

/// `J_ε(W_{ε,ξ})` computed in normal coordinates:
/// `∫[½|∂_ρ w|² + (λ/2)w² - w^p/p] |g_ξ(εy)|^{1/2} dy` with `w(y) = U(|y|)χ_r(ε|y|)`.
pub fn energy_j_radial<T: Real>(
    chart: &MetricChart<T>,
    xi: &Vec3<T>,
    eps: T,
    profile: &RadialProfile<T>,
    lambda: T,
    p_exp: T,
    quad: RadialQuadrature,
) -> Result<T> {
    let frame = chart.normal_frame(xi)?;
    let r = chart.cutoff_radius();
    let rho_max = r / eps;
    let panels = ((rho_max.to_f64_lossy() * quad.panels_per_unit as f64).ceil() as usize).max(1);
    let gl4 = gauss_legendre::<T>(4);
    let width = rho_max / T::from_usize_lossy(panels);
    let half = lit::<T>(0.5);
    let mut rho_nodes = Vec::with_capacity(4 * panels);
    let mut rho_weights = Vec::with_capacity(4 * panels);
    for k in 0..panels {
        let a = width * T::from_usize_lossy(k);
        for (x, w) in &gl4 {
            rho_nodes.push(a + width * half * (*x + T::one()));
            rho_weights.push(width * half * *w);
        }
    }
    let radial: Vec<T> = rho_nodes
        .iter()
        .map(|rho| {
            let (chi, dchi, _) = cutoff_chi_jet(r, eps * *rho);
            let u = profile.eval(*rho);
            let w = u * chi;
            let dw = profile.eval_derivative(*rho) * chi + u * dchi * eps;
            let pos = if w > T::zero() { w.powf(p_exp) } else { T::zero() };
            (half * dw * dw + half * lambda * w * w - pos / p_exp) * *rho * *rho
        })
        .collect();
    let ts: Vec<T> = rho_nodes.iter().map(|rho| eps * *rho).collect();
    let polar = gauss_legendre::<T>(quad.polar);
    let dphi = lit::<T>(2.0) * T::PI() / T::from_usize_lossy(quad.azimuthal);
    let mut total = T::zero();
    for (ct, wt) in &polar {
        let st = (T::one() - *ct * *ct).max(T::zero()).sqrt();
        for m in 0..quad.azimuthal {
            let ph = dphi * T::from_usize_lossy(m);
            let dir = frame.to_coordinates(&[st * ph.cos(), st * ph.sin(), *ct]);
            let sweep = chart.radial_sweep(&frame.base, &dir, &ts)?;
            let mut line = T::zero();
            for (i, (x, jac)) in sweep.iter().enumerate() {
                let (_, vol) = chart.pullback(x, jac, &frame);
                line += rho_weights[i] * radial[i] * vol;
            }
            total += *wt * dphi * line;
        }
    }
    Ok(total)
}
