#![allow(dead_code)]

pub mod oracles;

use std::sync::Arc;

use concentrator::ansatz::NormalCoordinates;
use concentrator::field::{GridField, GridGeometry, Scheme, SystemParams};
use concentrator::geometry::builtin_metric;
use concentrator::radial::ProfileSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn grid(name: &str, params: &[f64], box_length: f64, r: f64, n: usize) -> Arc<GridGeometry<f64>> {
    let chart = builtin_metric(name, params, box_length).unwrap().with_cutoff_radius(r).unwrap();
    GridGeometry::new(Arc::new(chart), n, Scheme::Spectral).unwrap()
}

pub fn coords(geom: &Arc<GridGeometry<f64>>, xi: [f64; 3]) -> Arc<NormalCoordinates<f64>> {
    Arc::new(NormalCoordinates::compute(geom, &xi).unwrap())
}

pub fn kgm() -> SystemParams<f64> {
    SystemParams::kgm(1.0, 1.0, 0.5, 4.0).unwrap()
}

pub fn sm() -> SystemParams<f64> {
    SystemParams::sm(1.0, 0.5, 4.0).unwrap()
}

pub fn profiles(params: &SystemParams<f64>) -> ProfileSet<f64> {
    ProfileSet::compute(params.lambda(), params.p_exp, params.q).unwrap()
}

/// Sum of a few random low Fourier modes.
pub fn random_smooth(geom: &Arc<GridGeometry<f64>>, seed: u64) -> GridField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = geom.chart().box_lengths();
    let modes: Vec<([f64; 3], f64, f64)> = (0..6)
        .map(|_| {
            let m = [0, 1, 2].map(|a| rng.gen_range(-3..=3) as f64 * 2.0 * std::f64::consts::PI / l[a]);
            (m, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.28))
        })
        .collect();
    GridField::from_fn(geom, |x| modes.iter().map(|(m, a, ph)| a * (m[0] * x[0] + m[1] * x[1] + m[2] * x[2] + ph).cos()).sum())
}

/// Random smooth field times a Gaussian of width `width` at `center`.
pub fn random_localized(geom: &Arc<GridGeometry<f64>>, seed: u64, center: [f64; 3], width: f64) -> GridField<f64> {
    let base = random_smooth(geom, seed);
    let chart = geom.chart().clone();
    let env = GridField::from_fn(geom, |x| {
        let d = chart.periodic_displacement(&center, &x);
        (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (2.0 * width * width)).exp()
    });
    base.zip_map(&env, |a, b| a * b).unwrap()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
