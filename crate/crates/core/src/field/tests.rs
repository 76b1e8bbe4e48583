use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::builtin_metric;

const L: f64 = 2.7;

fn geom(name: &str, params: &[f64], n: usize, scheme: Scheme) -> Arc<GridGeometry<f64>> {
    let chart = Arc::new(builtin_metric(name, params, L).unwrap());
    GridGeometry::new(chart, n, scheme).unwrap()
}

fn random_smooth(g: &Arc<GridGeometry<f64>>, seed: u64) -> GridField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = 2.0 * std::f64::consts::PI / L;
    let modes: Vec<([f64; 3], f64, f64)> = (0..6)
        .map(|_| {
            let m = [rng.gen_range(-3..=3) as f64, rng.gen_range(-3..=3) as f64, rng.gen_range(-3..=3) as f64];
            (m, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.28))
        })
        .collect();
    GridField::from_fn(g, |x| {
        modes.iter().map(|(m, a, ph)| a * (k * (m[0] * x[0] + m[1] * x[1] + m[2] * x[2]) + ph).cos()).sum()
    })
}

#[test]
fn plane_wave_eigenrelation() {
    let k = 2.0 * std::f64::consts::PI / L;
    let (eps, lambda) = (0.3, 0.7);
    let mut errs = Vec::new();
    for (n, scheme) in [(16, Scheme::Spectral), (16, Scheme::FourthOrder), (32, Scheme::FourthOrder)] {
        let g = geom("flat", &[], n, scheme);
        let u = GridField::from_fn(&g, |x| (k * (2.0 * x[0] + x[1] - x[2])).cos());
        let au = apply_schrodinger_op(&u, eps, lambda, None).unwrap();
        let factor = eps * eps * k * k * 6.0 + lambda;
        let err = au.sub(&u.scale(factor)).unwrap().max_abs();
        errs.push(err);
    }
    assert!(errs[0] < 1e-11, "spectral {}", errs[0]);
    let order = (errs[1] / errs[2]).log2();
    assert!(order > 3.8, "fourth-order rate {order}");
}

#[test]
fn constant_maps_to_lambda_times_constant() {
    let g = geom("conformal_bump", &[0.1], 16, Scheme::Spectral);
    let u = GridField::constant(&g, 2.5);
    let au = apply_schrodinger_op(&u, 0.2, 0.75, None).unwrap();
    assert!(au.values().iter().all(|v| (v - 1.875).abs() < 1e-11));
}

#[test]
fn operator_is_self_adjoint_in_dmu_pairing() {
    for scheme in [Scheme::Spectral, Scheme::FourthOrder] {
        let g = geom("diagonal_warp", &[0.3], 16, scheme);
        let u = random_smooth(&g, 1);
        let v = random_smooth(&g, 2);
        let pot = random_smooth(&g, 3).map(|x| x * x);
        let au = apply_schrodinger_op(&u, 0.3, 1.0, Some(&pot)).unwrap();
        let av = apply_schrodinger_op(&v, 0.3, 1.0, Some(&pot)).unwrap();
        let (a, b) = (au.l2_dot(&v).unwrap(), u.l2_dot(&av).unwrap());
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()), "{a} vs {b}");
    }
}

#[test]
fn spd_solve_recovers_field_and_zero() {
    let g = geom("conformal_bump", &[0.2], 16, Scheme::Spectral);
    let u = random_smooth(&g, 4);
    let pot = u.map(|x| 2.0 * x * x);
    let op = EllipticOperator::new(0.04, 0.75, Some(pot.values()));
    let f = op.apply(&u);
    let (back, rep) = solve_spd(&op, &f, 1e-12).unwrap();
    assert!(back.sub(&u).unwrap().max_abs() < 1e-9 * u.max_abs(), "{rep:?}");
    let (zero, rep0) = solve_spd(&op, &GridField::zeros(&g), 1e-10).unwrap();
    assert_eq!(zero.max_abs(), 0.0);
    assert_eq!(rep0.iterations, 0);
}

#[test]
fn flat_solve_matches_symbol_inverse() {
    let g = geom("flat", &[], 16, Scheme::Spectral);
    let k = 2.0 * std::f64::consts::PI / L;
    let f = GridField::from_fn(&g, |x| (k * x[0]).sin() + 0.5 * (k * (x[1] + 2.0 * x[2])).cos());
    let u = adjoint_istar(&f, 0.2, 0.75).unwrap();
    let exact = GridField::from_fn(&g, |x| {
        (k * x[0]).sin() / (0.04 * k * k + 0.75) + 0.5 * (k * (x[1] + 2.0 * x[2])).cos() / (0.04 * 5.0 * k * k + 0.75)
    });
    assert!(u.sub(&exact).unwrap().max_abs() < 1e-9);
}

#[test]
fn istar_defining_identity() {
    let g = geom("conformal_bump", &[0.1], 16, Scheme::Spectral);
    let (eps, lambda) = (0.3, 0.75);
    for seed in 0..3 {
        let v = random_smooth(&g, 10 + seed);
        let phi = v.axpy(0.5, &random_smooth(&g, 20 + seed)).unwrap();
        let u = adjoint_istar(&v, eps, lambda).unwrap();
        let lhs = inner_product_eps(&u, &phi, eps, lambda).unwrap();
        let rhs = v.l2_dot(&phi).unwrap() / eps.powi(3);
        assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1e-300), "{lhs} vs {rhs}");
    }
    assert_eq!(adjoint_istar(&GridField::zeros(&g), eps, lambda).unwrap().max_abs(), 0.0);
}

#[test]
fn inner_product_basics() {
    let g = geom("conformal_bump", &[0.1], 16, Scheme::Spectral);
    let (u, v, w) = (random_smooth(&g, 5), random_smooth(&g, 6), random_smooth(&g, 7));
    let lhs = inner_product_eps(&u.add(&w).unwrap(), &v, 0.2, 1.0).unwrap();
    let rhs = inner_product_eps(&u, &v, 0.2, 1.0).unwrap() + inner_product_eps(&w, &v, 0.2, 1.0).unwrap();
    assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    assert_eq!(inner_product_eps(&GridField::zeros(&g), &v, 0.2, 1.0).unwrap(), 0.0);
    let other = geom("flat", &[], 16, Scheme::Spectral);
    assert!(matches!(inner_product_eps(&u, &GridField::zeros(&other), 0.2, 1.0), Err(crate::Error::ShapeMismatch(_))));
}

#[test]
fn lq_norm_of_constant_and_monotonicity() {
    let g = geom("flat", &[], 8, Scheme::Spectral);
    let c = 1.7;
    let eps = 0.25;
    let s = 3.0;
    let val = lq_norm_eps(&GridField::constant(&g, c), s, eps).unwrap();
    let vol = L * L * L;
    assert!((val - c * (vol / eps.powi(3)).powf(1.0 / s)).abs() < 1e-12 * val);
    let u = random_smooth(&g, 8);
    let v = u.map(|x| 1.5 * x);
    assert!(lq_norm_eps(&u, 4.0, eps).unwrap() <= lq_norm_eps(&v, 4.0, eps).unwrap());
}

#[test]
fn psi_constant_closed_form_and_zero() {
    let g = geom("flat", &[], 8, Scheme::Spectral);
    let params = SystemParams::kgm(1.0, 1.3, 0.5, 4.0).unwrap();
    let c = 0.8;
    let psi = solve_psi(&GridField::constant(&g, c), &params).unwrap();
    let want = 1.3 * c * c / (1.0 + 1.3 * 1.3 * c * c);
    assert!(psi.values().iter().all(|v| (v - want).abs() < 1e-8));
    let gz = g_nonlinearity(&GridField::constant(&g, c), &psi, &params).unwrap();
    let want_g = (1.3 * 1.3 * want * want - 2.0 * 1.3 * want) * c;
    assert!(gz.values().iter().all(|v| (v - want_g).abs() < 1e-8));
    assert!(solve_psi(&GridField::zeros(&g), &params).unwrap().max_abs() == 0.0);
}

#[test]
fn psi_prime_matches_finite_differences() {
    for params in [SystemParams::kgm(1.0, 1.0, 0.5, 4.0).unwrap(), SystemParams::sm(1.0, 0.5, 4.0).unwrap()] {
        let g = geom("conformal_bump", &[0.1], 16, Scheme::Spectral);
        let u = random_smooth(&g, 30).map(|x| x.abs() + 0.1);
        let h = random_smooth(&g, 31);
        let psi = solve_psi(&u, &params).unwrap();
        let v = solve_psi_prime(&u, &h, &psi, &params).unwrap();
        let mut errs = Vec::new();
        for t in [1e-2, 1e-3, 1e-4] {
            let pt = solve_psi(&u.axpy(t, &h).unwrap(), &params).unwrap();
            let fd = pt.sub(&psi).unwrap().scale(1.0 / t);
            errs.push(fd.sub(&v).unwrap().l2_norm());
        }
        assert!(errs[0] / errs[1] > 7.0 && errs[1] / errs[2] > 7.0, "{errs:?}");
        let zero = solve_psi_prime(&GridField::zeros(&g), &h, &GridField::zeros(&g), &params).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }
}

#[test]
fn params_validation() {
    assert!(SystemParams::kgm(1.0, 1.0, 1.0, 4.0).unwrap_err().to_string().contains("lambda must be positive"));
    assert!(SystemParams::kgm(1.0, 1.0, 0.5, 6.0).unwrap_err().to_string().contains("subcritical exponent required"));
    assert!(SystemParams::kgm(1.0, 0.0, 0.5, 4.0).is_err());
    assert!(SystemParams::new(SystemKind::Sm, 2.0, 1.0, 0.5, 4.0).is_err());
    let s = SystemParams::sm(1.0, 0.5, 4.0).unwrap();
    assert_eq!(s.lambda(), 1.0);
    assert_eq!(s.coupling_weight(), 0.5);
}

#[test]
fn csv_round_trip() {
    let g = geom("flat", &[], 8, Scheme::Spectral);
    let u = random_smooth(&g, 9).with_eps(0.1);
    let text = u.to_csv();
    assert!(text.starts_with("# n=8 eps=1e-1 chart=flat"));
    let back = GridField::from_csv(&g, &text).unwrap();
    assert_eq!(back.values(), u.values());
    assert_eq!(back.eps(), Some(0.1));
}

#[test]
fn f32_fields_work() {
    let chart = Arc::new(builtin_metric::<f32>("conformal_bump", &[0.1], 2.7).unwrap());
    let g = GridGeometry::new(chart, 8, Scheme::Spectral).unwrap();
    let f = GridField::from_fn(&g, |x| (x[0]).sin() + 1.0);
    let op = EllipticOperator::new(0.09f32, 1.0, None);
    let (u, _) = solve_spd(&op, &f, 1e-5).unwrap();
    let res = op.apply(&u).sub(&f).unwrap().max_abs();
    assert!(res < 1e-3, "{res}");
}
