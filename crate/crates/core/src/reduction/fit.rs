//! Least-squares fit of `Ĩ_ε(ξ) ≈ c₁ + c₂ε² − c₃S_g(ξ)ε²`.

use crate::error::{Error, Result};
use crate::geometry::linalg::*;
use crate::scalar::{lit, Real};

use super::ReducedSample;

/// Smallest accepted spread `max S − min S` of the design.
pub const MIN_CURVATURE_SPREAD: f64 = 1e-8;
pub const MIN_EPS_LEVELS: usize = 3;
pub const MIN_XI_POINTS: usize = 4;

#[derive(Clone, Debug, serde::Serialize)]
pub struct ExpansionFit<T> {
    pub xis: Vec<Vec3<T>>,
    pub eps: Vec<T>,
    pub c1: T,
    pub c2: T,
    pub c3: T,
    /// Standard errors of `(c1, c2, c3)`.
    pub stderr: [T; 3],
    /// Per-sample residuals in input order.
    pub residuals: Vec<T>,
    /// Root-mean-square residual of each `ξ`, aligned with `xis`.
    pub per_xi_rms: Vec<T>,
    pub rms: T,
    /// `S` value used for each `ξ`, aligned with `xis`.
    pub s_values: Vec<T>,
}

impl<T: Real> ExpansionFit<T> {
    /// `|c₃|·max|S|·max ε²` against three residual RMS (or `1e-12|c₁|` when the fit is exact).
    pub fn c3_below_noise(&self) -> bool {
        let smax = self.s_values.iter().fold(T::zero(), |m, s| m.max(s.abs()));
        let emax = self.eps.iter().fold(T::zero(), |m, e| m.max(*e));
        let signal = self.c3.abs() * smax * emax * emax;
        signal <= lit::<T>(3.0) * self.rms.max(lit::<T>(1e-12) * self.c1.abs())
    }
}

fn distinct<T: Real>(values: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for v in values {
        if !out.iter().any(|u| (*u - v).abs() <= lit::<T>(1e-12) * v.abs().max(T::one())) {
            out.push(v);
        }
    }
    out
}

/// Fits the expansion over the samples; `s_values[k]` is the curvature used
/// for sample `k` (normally `samples[k].scalar_curvature`).
pub fn fit_expansion<T: Real>(samples: &[ReducedSample<T>], s_values: &[T]) -> Result<ExpansionFit<T>> {
    if s_values.len() != samples.len() {
        return Err(Error::ShapeMismatch(format!("{} samples but {} S values", samples.len(), s_values.len())));
    }
    let eps = distinct(samples.iter().map(|s| s.eps));
    if eps.len() < MIN_EPS_LEVELS {
        return Err(Error::ValidationError(format!("need at least {MIN_EPS_LEVELS} eps values, got {}", eps.len())));
    }
    let mut xis: Vec<Vec3<T>> = Vec::new();
    let mut xi_index = Vec::with_capacity(samples.len());
    let mut s_of_xi: Vec<T> = Vec::new();
    for (s, sv) in samples.iter().zip(s_values) {
        let close = |x: &Vec3<T>| (0..3).all(|a| (x[a] - s.xi[a]).abs() <= lit::<T>(1e-12) * (T::one() + s.xi[a].abs()));
        match xis.iter().position(close) {
            Some(k) => xi_index.push(k),
            None => {
                xis.push(s.xi);
                s_of_xi.push(*sv);
                xi_index.push(xis.len() - 1);
            }
        }
    }
    if xis.len() < MIN_XI_POINTS {
        return Err(Error::ValidationError(format!("need at least {MIN_XI_POINTS} xi points, got {}", xis.len())));
    }
    let smin = s_values.iter().fold(T::infinity(), |m, s| m.min(*s));
    let smax = s_values.iter().fold(T::neg_infinity(), |m, s| m.max(*s));
    if !(smax - smin >= lit(MIN_CURVATURE_SPREAD)) {
        return Err(Error::DegenerateDesign(format!("scalar curvature spread {} is below {MIN_CURVATURE_SPREAD}", smax - smin)));
    }
    // columns 1, ε², −Sε², scaled to unit norm before the normal equations
    let rows: Vec<[T; 3]> =
        samples.iter().zip(s_values).map(|(s, sv)| [T::one(), s.eps * s.eps, -*sv * s.eps * s.eps]).collect();
    let y: Vec<T> = samples.iter().map(|s| s.i_tilde).collect();
    let scale = [0, 1, 2].map(|c| rows.iter().map(|r| r[c] * r[c]).sum::<T>().sqrt());
    let mut ata = zero3();
    let mut aty = [T::zero(); 3];
    for (r, yi) in rows.iter().zip(&y) {
        for i in 0..3 {
            aty[i] += r[i] / scale[i] * *yi;
            for j in 0..3 {
                ata[i][j] += r[i] / scale[i] * r[j] / scale[j];
            }
        }
    }
    let inv = inverse3(&ata).ok_or_else(|| Error::DegenerateDesign("singular normal equations".into()))?;
    let z = mat_vec(&inv, &aty);
    let c = [0, 1, 2].map(|i| z[i] / scale[i]);
    let residuals: Vec<T> = rows.iter().zip(&y).map(|(r, yi)| *yi - (c[0] * r[0] + c[1] * r[1] + c[2] * r[2])).collect();
    let m = samples.len();
    let ss: T = residuals.iter().map(|r| *r * *r).sum();
    let dof = T::from_usize_lossy(m.saturating_sub(3).max(1));
    let sigma2 = ss / dof;
    let stderr = [0, 1, 2].map(|i| (sigma2 * inv[i][i]).max(T::zero()).sqrt() / scale[i]);
    let mut per_xi = vec![(T::zero(), 0usize); xis.len()];
    for (k, r) in xi_index.iter().zip(&residuals) {
        per_xi[*k].0 += *r * *r;
        per_xi[*k].1 += 1;
    }
    Ok(ExpansionFit {
        xis,
        eps,
        c1: c[0],
        c2: c[1],
        c3: c[2],
        stderr,
        residuals,
        per_xi_rms: per_xi.iter().map(|(s, n)| (*s / T::from_usize_lossy(*n)).sqrt()).collect(),
        rms: (ss / T::from_usize_lossy(m)).sqrt(),
        s_values: s_of_xi,
    })
}

/// Fit with each sample's own `S_g(ξ)`.
pub fn fit_expansion_from_samples<T: Real>(samples: &[ReducedSample<T>]) -> Result<ExpansionFit<T>> {
    let s: Vec<T> = samples.iter().map(|s| s.scalar_curvature).collect();
    fit_expansion(samples, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{EnergyParts, FieldEnergy};

    fn sample(xi: Vec3<f64>, eps: f64, i: f64, s: f64) -> ReducedSample<f64> {
        let parts = EnergyParts { j: i, g: FieldEnergy { q_weighted: 0.0, unweighted: 0.0 }, i };
        ReducedSample {
            xi,
            eps,
            i_tilde: i,
            i_of_w: i,
            parts_tilde: parts,
            parts_w: parts,
            phi_norm: 0.0,
            residual_norm: 0.0,
            s_norm: 0.0,
            iterations: 0,
            converged: true,
            contraction_ratios: vec![],
            orthogonality: 0.0,
            kernel_residual: 0.0,
            perp_residual: 0.0,
            scalar_curvature: s,
        }
    }

    fn design(f: impl Fn(f64, f64) -> f64, s: &[f64]) -> Vec<ReducedSample<f64>> {
        let mut out = Vec::new();
        for eps in [0.3, 0.2, 0.15, 0.1] {
            for (k, sv) in s.iter().enumerate() {
                out.push(sample([k as f64, 0.0, 0.0], eps, f(eps, *sv), *sv));
            }
        }
        out
    }

    #[test]
    fn recovers_exact_coefficients() {
        let s = [-1.0, 0.5, 2.0, 3.5, 0.0];
        let samples = design(|e, s| 16.0 + 4.0 * e * e - 2.1 * s * e * e, &s);
        let fit = fit_expansion_from_samples(&samples).unwrap();
        assert!((fit.c1 - 16.0).abs() < 1e-12 && (fit.c2 - 4.0).abs() < 1e-10 && (fit.c3 - 2.1).abs() < 1e-10);
        assert!(fit.rms < 1e-12 && fit.residuals.len() == 20 && fit.xis.len() == 5 && fit.eps.len() == 4);
        assert_eq!(fit.s_values, s.to_vec());
    }

    #[test]
    fn balanced_design_ignores_eps_only_errors() {
        let s = [-1.0, 0.5, 2.0, 3.5];
        let samples = design(|e, s| 16.0 + 4.0 * e * e - 2.1 * s * e * e + 7.0 * e.powi(3) + 0.01 * e.sin(), &s);
        let fit = fit_expansion_from_samples(&samples).unwrap();
        assert!((fit.c3 - 2.1).abs() < 1e-9, "{}", fit.c3);
    }

    #[test]
    fn flat_landscape_is_degenerate_and_null_fit_is_noise() {
        let samples = design(|e, _| 16.0 + 4.0 * e * e, &[0.0; 5]);
        assert!(matches!(fit_expansion_from_samples(&samples), Err(Error::DegenerateDesign(_))));
        let pseudo: Vec<f64> = samples.iter().map(|s| [-1.0, 0.5, 2.0, 3.5, 0.0][s.xi[0] as usize]).collect();
        let fit = fit_expansion(&samples, &pseudo).unwrap();
        assert!(fit.c3_below_noise(), "{}", fit.c3);
        let curved = design(|e, s| 16.0 + 4.0 * e * e - 2.1 * s * e * e, &[-1.0, 0.5, 2.0, 3.5]);
        assert!(!fit_expansion_from_samples(&curved).unwrap().c3_below_noise());
    }

    #[test]
    fn too_few_levels_or_points() {
        let few_eps: Vec<_> = design(|e, s| e + s, &[0.0, 1.0, 2.0, 3.0]).into_iter().filter(|s| s.eps > 0.12).take(8).collect();
        assert!(matches!(fit_expansion_from_samples(&few_eps), Err(Error::ValidationError(_))));
        let few_xi = design(|e, s| e + s, &[0.0, 1.0, 2.0]);
        assert!(matches!(fit_expansion_from_samples(&few_xi), Err(Error::ValidationError(_))));
        assert!(matches!(fit_expansion(&few_xi, &[1.0]), Err(Error::ShapeMismatch(_))));
    }
}
