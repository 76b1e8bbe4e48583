//! Critical points of `S_g` and of the reduced energy, and their pairing.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::ansatz::{build_ansatz_from, energy_i, AnsatzOptions, NormalCoordinates};
use crate::error::{Error, Result};
use crate::field::{GridGeometry, SystemParams};
use crate::geometry::linalg::*;
use crate::geometry::MetricChart;
use crate::radial::RadialProfile;
use crate::scalar::{lit, Real};

use super::{reduced_energy_from, PhiOptions, ReducedSample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Minimum,
    Maximum,
    Saddle,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CurvatureCritical<T> {
    pub point: Vec3<T>,
    pub value: T,
    pub kind: ExtremumKind,
    pub hessian_eigenvalues: [T; 3],
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CurvatureLandscape<T> {
    /// `|∇S_g|` stayed below the flatness threshold at every start.
    pub degenerate: bool,
    pub max_gradient: T,
    pub points: Vec<CurvatureCritical<T>>,
}

impl<T: Real> CurvatureLandscape<T> {
    pub fn of_kind(&self, kind: ExtremumKind) -> impl Iterator<Item = (usize, &CurvatureCritical<T>)> {
        self.points.iter().enumerate().filter(move |(_, p)| p.kind == kind)
    }
}

/// Gradient flow plus Newton polish on `±S_g` from a periodic lattice of starts.
pub fn scalar_curvature_extrema<T: Real>(
    chart: &MetricChart<T>,
    starts_per_axis: usize,
    flat_tol: T,
) -> Result<CurvatureLandscape<T>> {
    let l = chart.box_lengths();
    let m = starts_per_axis.max(1);
    let mut starts = Vec::with_capacity(m * m * m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let frac = |c: usize| (T::from_usize_lossy(c) + lit(0.5)) / T::from_usize_lossy(m);
                starts.push([l[0] * frac(i), l[1] * frac(j), l[2] * frac(k)]);
            }
        }
    }
    let mut max_gradient = T::zero();
    for s in &starts {
        max_gradient = max_gradient.max(norm3(&chart.scalar_curvature_gradient(s)?));
    }
    if max_gradient < flat_tol {
        return Ok(CurvatureLandscape { degenerate: true, max_gradient, points: Vec::new() });
    }
    let grad_tol = lit::<T>(1e-7) * max_gradient;
    let merge = min3(&l) * lit(1e-3);
    let mut points: Vec<CurvatureCritical<T>> = Vec::new();
    for sign in [T::one(), -T::one()] {
        for s in &starts {
            let Some(x) = climb(chart, s, sign, grad_tol)? else { continue };
            if points.iter().any(|p| norm3(&chart.periodic_displacement(&p.point, &x)) < merge) {
                continue;
            }
            let hess = curvature_hessian(chart, &x)?;
            let ev = sym_eigenvalues(&hess);
            let scale = ev.iter().fold(T::zero(), |a, e| a.max(e.abs()));
            let tiny = lit::<T>(1e-6) * scale;
            let kind = if ev.iter().all(|e| *e < -tiny) {
                ExtremumKind::Maximum
            } else if ev.iter().all(|e| *e > tiny) {
                ExtremumKind::Minimum
            } else {
                ExtremumKind::Saddle
            };
            points.push(CurvatureCritical { point: x, value: chart.scalar_curvature(&x)?, kind, hessian_eigenvalues: ev });
        }
    }
    points.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap_or(std::cmp::Ordering::Equal));
    Ok(CurvatureLandscape { degenerate: false, max_gradient, points })
}

fn curvature_hessian<T: Real>(chart: &MetricChart<T>, x: &Vec3<T>) -> Result<Mat3<T>> {
    let h = min3(&chart.box_lengths()) * lit(1e-3);
    let mut hess = zero3();
    for a in 0..3 {
        let (mut p, mut m) = (*x, *x);
        p[a] += h;
        m[a] -= h;
        let (gp, gm) = (chart.scalar_curvature_gradient(&p)?, chart.scalar_curvature_gradient(&m)?);
        for b in 0..3 {
            hess[b][a] = (gp[b] - gm[b]) / (lit::<T>(2.0) * h);
        }
    }
    for a in 0..3 {
        for b in 0..a {
            let s = (hess[a][b] + hess[b][a]) * lit(0.5);
            hess[a][b] = s;
            hess[b][a] = s;
        }
    }
    Ok(hess)
}

/// Ascent (`sign = 1`) or descent (`sign = -1`) on `S_g` with adaptive steps,
/// finished by Newton steps. `None` if the flow stalls away from a critical point.
fn climb<T: Real>(chart: &MetricChart<T>, start: &Vec3<T>, sign: T, grad_tol: T) -> Result<Option<Vec3<T>>> {
    let mut x = *start;
    let mut f = sign * chart.scalar_curvature(&x)?;
    let mut g = chart.scalar_curvature_gradient(&x)?.map(|v| sign * v);
    let mut t = min3(&chart.box_lengths()) * lit(0.01) / norm3(&g).max(T::EPS);
    for _ in 0..5000 {
        let gn = norm3(&g);
        if gn < grad_tol {
            return Ok(Some(chart.wrap(&x)));
        }
        let trial = [0, 1, 2].map(|a| x[a] + t * g[a]);
        let ft = sign * chart.scalar_curvature(&trial)?;
        if ft > f {
            x = trial;
            f = ft;
            g = chart.scalar_curvature_gradient(&x)?.map(|v| sign * v);
            t = t * lit(1.5);
        } else {
            t = t * lit(0.5);
            if t * gn < T::EPS * min3(&chart.box_lengths()) {
                break;
            }
        }
        if gn < grad_tol * lit(1e3) {
            // Newton polish
            let hess = curvature_hessian(chart, &x)?;
            if let Some(inv) = inverse3(&hess) {
                let step = mat_vec(&inv, &g.map(|v| sign * v));
                let trial = [0, 1, 2].map(|a| x[a] - step[a]);
                let gt = chart.scalar_curvature_gradient(&trial)?;
                if norm3(&gt) < gn {
                    x = trial;
                    f = sign * chart.scalar_curvature(&x)?;
                    g = gt.map(|v| sign * v);
                }
            }
        }
    }
    if norm3(&g) < grad_tol * lit(10.0) {
        return Ok(Some(chart.wrap(&x)));
    }
    Ok(None)
}

/// Function minimized during the `ξ` search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchObjective {
    /// `I_ε(W_{ε,ξ})`
    AnsatzEnergy,
    /// `Ĩ_ε(ξ)`
    ReducedEnergy,
}

#[derive(Clone, Debug)]
pub struct SearchConfig<T> {
    /// Coarse lattice points per axis at the largest ε.
    pub coarse_points: usize,
    pub objective: SearchObjective,
    /// Objective evaluations per ε level.
    pub max_evals: usize,
    pub max_candidates: usize,
    /// Starts per axis for the `S_g` flows.
    pub curvature_starts: usize,
    /// `|∇S_g|` below this everywhere means a degenerate landscape.
    pub flat_tol: T,
    /// Compute `Ĩ_ε` at the located point of the smallest ε.
    pub reduced_at_finest: bool,
    /// Sub-box `[lo, hi]` to search instead of the whole cell.
    pub region: Option<(Vec3<T>, Vec3<T>)>,
    pub ansatz: AnsatzOptions<T>,
    pub phi: PhiOptions<T>,
}

impl<T: Real> Default for SearchConfig<T> {
    fn default() -> Self {
        Self {
            coarse_points: 4,
            objective: SearchObjective::AnsatzEnergy,
            max_evals: 60,
            max_candidates: 4,
            curvature_starts: 6,
            flat_tol: lit(1e-8),
            reduced_at_finest: true,
            region: None,
            ansatz: AnsatzOptions::default(),
            phi: PhiOptions::default(),
        }
    }
}

/// One ε of the search with its grid.
#[derive(Clone, Debug)]
pub struct SearchLevel<T: Real> {
    pub eps: T,
    pub geom: Arc<GridGeometry<T>>,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct LocatedPoint<T> {
    pub eps: T,
    pub xi: Vec3<T>,
    pub objective: T,
    pub evaluations: usize,
    /// Distance `d_g` to the paired `S_g` critical point.
    pub distance: Option<T>,
    /// Grid spacing of this level.
    pub spacing: T,
}

/// Origin of a track's starting point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedKind {
    /// Extremum of the coarse objective lattice.
    Lattice,
    /// `S_g` maximum not covered by a lattice extremum.
    Curvature,
}

/// A critical point of `Ĩ_ε` followed across ε.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ConcentrationTrack<T> {
    pub kind: ExtremumKind,
    pub seed: SeedKind,
    pub points: Vec<LocatedPoint<T>>,
    /// Index into the landscape's critical points.
    pub partner: Option<usize>,
    pub partner_point: Option<Vec3<T>>,
    pub reduced: Option<ReducedSample<T>>,
}

impl<T: Real> ConcentrationTrack<T> {
    /// `d_g` non-increasing as ε decreases, up to `slack`.
    pub fn distances_non_increasing(&self, slack: T) -> bool {
        let d: Vec<T> = self.points.iter().filter_map(|p| p.distance).collect();
        d.len() == self.points.len() && d.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ConcentrationReport<T> {
    /// "degenerate landscape" when `S_g` has no usable critical points.
    pub status: String,
    pub curvature: CurvatureLandscape<T>,
    /// Sign of `c₃` used to decide which `Ĩ_ε` extrema pair with `S_g` maxima.
    pub c3_sign: i8,
    pub tracks: Vec<ConcentrationTrack<T>>,
}

impl<T: Real> ConcentrationReport<T> {
    pub fn is_degenerate(&self) -> bool {
        self.curvature.degenerate
    }
}

/// Riemannian distance, or the metric length of the periodic displacement
/// when the logarithm is unavailable.
pub fn geodesic_distance<T: Real>(chart: &MetricChart<T>, a: &Vec3<T>, b: &Vec3<T>) -> T {
    let d = chart.periodic_displacement(a, b);
    if norm3(&d) == T::zero() {
        return T::zero();
    }
    match chart.distance(a, b) {
        Ok(v) => v,
        Err(_) => {
            let mid = [0, 1, 2].map(|c| a[c] + d[c] * lit(0.5));
            bilinear(&chart.metric(&mid), &d, &d).sqrt()
        }
    }
}

fn objective_value<T: Real>(
    level: &SearchLevel<T>,
    xi: &Vec3<T>,
    params: &SystemParams<T>,
    profile: &RadialProfile<T>,
    config: &SearchConfig<T>,
) -> Result<T> {
    let coords = Arc::new(NormalCoordinates::compute(&level.geom, xi)?);
    match config.objective {
        SearchObjective::AnsatzEnergy => {
            let a = build_ansatz_from(&coords, level.eps, profile, &config.ansatz)?;
            energy_i(&a.w, level.eps, params)
        }
        SearchObjective::ReducedEnergy => {
            Ok(reduced_energy_from(&coords, level.eps, params, profile, &config.ansatz, &config.phi)?.i_tilde)
        }
    }
}

/// Node-lattice compass search started at the node nearest `start`, with an
/// initial stride of `stride` nodes. The objective is only sampled at grid
/// nodes; a per-axis parabola through the final neighbours gives a sub-cell
/// offset. Returns `(ξ, f at the best node, evaluations)`.
pub fn compass_search<T: Real>(
    geom: &GridGeometry<T>,
    mut f: impl FnMut(&Vec3<T>) -> Result<T>,
    start: &Vec3<T>,
    stride: usize,
    max_evals: usize,
) -> Result<(Vec3<T>, T, usize)> {
    let n = geom.n() as i64;
    let h = geom.spacing();
    let chart = geom.chart();
    let w = chart.wrap(start);
    let mut c = [0, 1, 2].map(|a| (w[a] / h[a]).round().to_f64_lossy() as i64);
    let node = |c: &[i64; 3]| [0, 1, 2].map(|a| h[a] * T::from_usize_lossy(c[a].rem_euclid(n) as usize));
    let key = |c: &[i64; 3]| c.map(|v| v.rem_euclid(n));
    let mut seen: BTreeMap<[i64; 3], T> = BTreeMap::new();
    let mut eval = |c: &[i64; 3], seen: &mut BTreeMap<[i64; 3], T>| -> Result<T> {
        if let Some(v) = seen.get(&key(c)) {
            return Ok(*v);
        }
        let v = f(&node(c))?;
        seen.insert(key(c), v);
        Ok(v)
    };
    let mut fc = eval(&c, &mut seen)?;
    let mut s = stride.max(1) as i64;
    loop {
        let mut best: Option<([i64; 3], T)> = None;
        for a in 0..3 {
            for d in [-s, s] {
                if seen.len() >= max_evals {
                    break;
                }
                let mut t = c;
                t[a] += d;
                let v = eval(&t, &mut seen)?;
                if v < fc && best.map_or(true, |(_, b)| v < b) {
                    best = Some((t, v));
                }
            }
        }
        match best {
            Some((t, v)) => {
                c = t;
                fc = v;
            }
            None if s > 1 => s /= 2,
            None => break,
        }
        if seen.len() >= max_evals {
            break;
        }
    }
    let mut x = node(&c);
    for a in 0..3 {
        let (mut lo, mut hi) = (c, c);
        lo[a] -= 1;
        hi[a] += 1;
        if let (Some(fl), Some(fh)) = (seen.get(&key(&lo)), seen.get(&key(&hi))) {
            let curv = *fl - lit::<T>(2.0) * fc + *fh;
            if curv > T::zero() {
                let off = ((*fl - *fh) / (lit::<T>(2.0) * curv)).max(lit(-0.5)).min(lit(0.5));
                x[a] += off * h[a];
            }
        }
    }
    Ok((chart.wrap(&x), fc, seen.len()))
}

fn lattice<T: Real>(chart: &MetricChart<T>, config: &SearchConfig<T>) -> (Vec<Vec3<T>>, usize, bool) {
    let m = config.coarse_points.max(2);
    let (lo, hi, periodic) = match config.region {
        Some((lo, hi)) => (lo, hi, false),
        None => ([T::zero(); 3], chart.box_lengths(), true),
    };
    let mut pts = Vec::with_capacity(m * m * m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let at = |a: usize, c: usize| {
                    let frac = (T::from_usize_lossy(c) + lit(0.5)) / T::from_usize_lossy(m);
                    lo[a] + (hi[a] - lo[a]) * frac
                };
                pts.push([at(0, i), at(1, j), at(2, k)]);
            }
        }
    }
    (pts, m, periodic)
}

/// Lattice indices whose value beats all 26 neighbours (a strict-interior test
/// on a sub-box region).
fn lattice_extrema<T: Real>(values: &[T], m: usize, periodic: bool) -> Vec<usize> {
    let idx = |i: usize, j: usize, k: usize| (i * m + j) * m + k;
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let v = values[idx(i, j, k)];
                let mut is_min = true;
                'nb: for di in [-1i64, 0, 1] {
                    for dj in [-1i64, 0, 1] {
                        for dk in [-1i64, 0, 1] {
                            if di == 0 && dj == 0 && dk == 0 {
                                continue;
                            }
                            let c = [i as i64 + di, j as i64 + dj, k as i64 + dk];
                            let c = if periodic {
                                c.map(|x| x.rem_euclid(m as i64))
                            } else if c.iter().any(|x| *x < 0 || *x >= m as i64) {
                                is_min = false;
                                break 'nb;
                            } else {
                                c
                            };
                            if values[idx(c[0] as usize, c[1] as usize, c[2] as usize)] < v {
                                is_min = false;
                                break 'nb;
                            }
                        }
                    }
                }
                if is_min {
                    out.push(idx(i, j, k));
                }
            }
        }
    }
    out
}

/// Locates the `Ĩ_ε` extrema that pair with the maxima of `S_g`, following
/// them from the largest to the smallest ε. `levels` must be ordered by
/// decreasing ε and share one chart.
pub fn find_concentration_points<T: Real>(
    levels: &[SearchLevel<T>],
    params: &SystemParams<T>,
    profile: &RadialProfile<T>,
    c3_sign: i8,
    config: &SearchConfig<T>,
) -> Result<ConcentrationReport<T>> {
    let first = levels.first().ok_or_else(|| Error::ValidationError("no eps levels to search".into()))?;
    if levels.windows(2).any(|w| !(w[1].eps < w[0].eps)) {
        return Err(Error::ValidationError("search levels must have strictly decreasing eps".into()));
    }
    let chart = first.geom.chart().clone();
    let curvature = scalar_curvature_extrema(&chart, config.curvature_starts, config.flat_tol)?;
    if curvature.degenerate {
        return Ok(ConcentrationReport {
            status: "degenerate landscape".into(),
            curvature,
            c3_sign,
            tracks: Vec::new(),
        });
    }
    // c₃ > 0: Ĩ ≈ c − c₃Sε², so S maxima are Ĩ minima
    let kind = if c3_sign >= 0 { ExtremumKind::Minimum } else { ExtremumKind::Maximum };
    let sign = if kind == ExtremumKind::Minimum { T::one() } else { -T::one() };
    let (pts, m, periodic) = lattice(&chart, config);
    let mut values = Vec::with_capacity(pts.len());
    for p in &pts {
        values.push(sign * objective_value(first, p, params, profile, config)?);
    }
    let l = chart.box_lengths();
    let coarse_step = match config.region {
        Some((lo, hi)) => (0..3).map(|a| (hi[a] - lo[a]) / T::from_usize_lossy(m)).fold(T::infinity(), T::min),
        None => min3(&l) / T::from_usize_lossy(m),
    };
    let mut order = lattice_extrema(&values, m, periodic);
    order.sort_by(|a, b| values[*a].partial_cmp(&values[*b]).unwrap_or(std::cmp::Ordering::Equal));
    // tied lattice cells around one basin collapse to the first; S_g maxima the
    // lattice missed are appended as seeds
    let near = |a: &Vec3<T>, b: &Vec3<T>| norm3(&chart.periodic_displacement(a, b)) < coarse_step * lit(1.75);
    let mut cands: Vec<(Vec3<T>, SeedKind)> = Vec::new();
    for c in order {
        if !cands.iter().any(|(p, _)| near(p, &pts[c])) {
            cands.push((pts[c], SeedKind::Lattice));
        }
    }
    let mut maxima: Vec<&CurvatureCritical<T>> = curvature.of_kind(ExtremumKind::Maximum).map(|(_, p)| p).collect();
    maxima.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap_or(std::cmp::Ordering::Equal));
    for p in maxima {
        let inside_region = config.region.map_or(true, |(lo, hi)| (0..3).all(|a| p.point[a] >= lo[a] && p.point[a] <= hi[a]));
        if inside_region && !cands.iter().any(|(c, _)| near(c, &p.point)) {
            cands.push((p.point, SeedKind::Curvature));
        }
    }
    cands.truncate(config.max_candidates);
    if cands.is_empty() {
        return Err(Error::NoCriticalPoint("no interior lattice extremum of the reduced energy".into()));
    }
    let inside = |x: &Vec3<T>| match config.region {
        Some((lo, hi)) => (0..3).all(|a| x[a] >= lo[a] && x[a] <= hi[a]),
        None => true,
    };
    let mut tracks: Vec<ConcentrationTrack<T>> = Vec::new();
    let mut first_points: Vec<Vec3<T>> = Vec::new();
    'cand: for (start, seed) in cands {
        let mut x = start;
        let mut located = Vec::new();
        let mut step = coarse_step * lit(0.5);
        for (li, level) in levels.iter().enumerate() {
            let h = level.geom.spacing();
            let hmin = h[0].min(h[1]).min(h[2]);
            let stride = (step / hmin).round().to_f64_lossy().max(1.0) as usize;
            let (xn, fx, evals) = compass_search(
                &level.geom,
                |y| Ok(sign * objective_value(level, y, params, profile, config)?),
                &x,
                stride,
                config.max_evals,
            )?;
            if !inside(&xn) {
                continue 'cand;
            }
            if li == 0 {
                // several lattice cells may drain into one basin
                if first_points.iter().any(|p| norm3(&chart.periodic_displacement(p, &xn)) < hmin * lit(2.0)) {
                    continue 'cand;
                }
                first_points.push(xn);
            }
            x = xn;
            located.push(LocatedPoint { eps: level.eps, xi: x, objective: sign * fx, evaluations: evals, distance: None, spacing: hmin });
            step = hmin * lit(2.0);
        }
        let last = located.last().expect("at least one level").xi;
        let finest_h = located.last().expect("at least one level").spacing;
        if tracks.iter().any(|t| {
            let p = t.points.last().expect("tracks are non-empty").xi;
            norm3(&chart.periodic_displacement(&p, &last)) < finest_h * lit(2.0)
        }) {
            continue;
        }
        tracks.push(ConcentrationTrack { kind, seed, points: located, partner: None, partner_point: None, reduced: None });
    }
    if tracks.is_empty() {
        return Err(Error::NoCriticalPoint("every refinement left the searched region".into()));
    }
    for t in tracks.iter_mut() {
        let last = t.points.last().expect("tracks are non-empty").xi;
        let partner = curvature
            .of_kind(ExtremumKind::Maximum)
            .map(|(i, p)| (i, geodesic_distance(&chart, &p.point, &last)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        if let Some((i, _)) = partner {
            let target = curvature.points[i].point;
            t.partner = Some(i);
            t.partner_point = Some(target);
            for p in t.points.iter_mut() {
                p.distance = Some(geodesic_distance(&chart, &target, &p.xi));
            }
        }
    }
    // one track per S maximum: keep the best objective value
    let mut kept: Vec<ConcentrationTrack<T>> = Vec::new();
    for t in tracks {
        let better = |a: &ConcentrationTrack<T>, b: &ConcentrationTrack<T>| {
            sign * a.points.last().expect("non-empty").objective < sign * b.points.last().expect("non-empty").objective
        };
        match kept.iter().position(|k| k.partner.is_some() && k.partner == t.partner) {
            Some(i) => {
                if better(&t, &kept[i]) {
                    kept[i] = t;
                }
            }
            None => kept.push(t),
        }
    }
    if config.reduced_at_finest {
        let level = levels.last().expect("non-empty");
        for t in kept.iter_mut() {
            let xi = t.points.last().expect("non-empty").xi;
            let coords = Arc::new(NormalCoordinates::compute(&level.geom, &xi)?);
            t.reduced = Some(reduced_energy_from(&coords, level.eps, params, profile, &config.ansatz, &config.phi)?);
        }
    }
    Ok(ConcentrationReport { status: "ok".into(), curvature, c3_sign, tracks: kept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builtin_metric;

    #[test]
    fn compass_search_recovers_quadratic_minimum() {
        let chart = Arc::new(builtin_metric::<f64>("flat", &[], 2.0).unwrap());
        let geom = GridGeometry::new(chart, 32, crate::field::Scheme::Spectral).unwrap();
        let target = [1.03, 0.51, 1.49];
        let f = |x: &Vec3<f64>| Ok((x[0] - target[0]).powi(2) + 2.0 * (x[1] - target[1]).powi(2) + 0.5 * (x[2] - target[2]).powi(2));
        let (x, _, evals) = compass_search(&geom, f, &[0.2, 1.8, 0.4], 8, 500).unwrap();
        assert!((0..3).all(|a| (x[a] - target[a]).abs() < 1e-9), "{x:?}");
        assert!(evals < 120, "{evals}");
        let (_, _, capped) = compass_search(&geom, f, &[0.2, 1.8, 0.4], 8, 10).unwrap();
        assert!(capped <= 10);
    }

    #[test]
    fn lattice_extrema_periodic_and_interior() {
        let m = 3;
        let mut v = vec![1.0; 27];
        v[0] = 0.0;
        assert_eq!(lattice_extrema(&v, m, true), vec![0]);
        assert!(lattice_extrema(&v, m, false).is_empty());
        v[0] = 1.0;
        v[13] = 0.0;
        assert_eq!(lattice_extrema(&v, m, false), vec![13]);
    }

    #[test]
    fn bump_curvature_maximum_is_the_apex() {
        let chart = builtin_metric::<f64>("conformal_bump", &[0.1], 2.7).unwrap();
        let land = scalar_curvature_extrema(&chart, 4, 1e-8).unwrap();
        assert!(!land.degenerate);
        let maxima: Vec<_> = land.of_kind(ExtremumKind::Maximum).collect();
        assert_eq!(maxima.len(), 1);
        let p = maxima[0].1.point;
        assert!(p.iter().all(|c| (c - 1.35).abs() < 1e-5), "{p:?}");
        assert!(land.of_kind(ExtremumKind::Minimum).count() >= 1);
    }

    #[test]
    fn two_bumps_have_two_maxima_and_flat_is_degenerate() {
        let chart = builtin_metric::<f64>("conformal_two_bumps", &[0.1], 2.7).unwrap();
        let land = scalar_curvature_extrema(&chart, 6, 1e-8).unwrap();
        let mut all: Vec<_> = land.of_kind(ExtremumKind::Maximum).map(|(_, p)| (p.value, p.point)).collect();
        all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        // periodic overlap of the tails adds shallow secondary maxima
        assert!(all.len() >= 2 && all[2..].iter().all(|(v, _)| *v < 0.05 * all[1].0), "{all:?}");
        let maxima: Vec<_> = all[..2].iter().map(|(_, p)| *p).collect();
        for c in chart.bump_centers() {
            assert!(maxima.iter().any(|m| norm3(&chart.periodic_displacement(m, &c)) < 1e-4), "{maxima:?}");
        }
        let flat = builtin_metric::<f64>("flat", &[], 2.7).unwrap();
        let land = scalar_curvature_extrema(&flat, 3, 1e-8).unwrap();
        assert!(land.degenerate && land.points.is_empty());
    }
}
