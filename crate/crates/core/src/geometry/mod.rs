//! Riemannian metrics on periodic 3D charts: curvature, geodesics, normal
//! coordinates and the cutoff `χ_r`.

mod chart;
mod cutoff;
mod family;
pub mod linalg;

pub use chart::{
    builtin_metric, Christoffel, DerivativeMode, MetricChart, NormalFrame, BUILTIN_METRICS, DEFAULT_TWO_BUMP_KAPPA,
    MAX_CUTOFF_FRACTION, SECOND_BUMP_AMPLITUDE,
};
pub use cutoff::{cutoff_chi, cutoff_chi_jet, cutoff_curvature_bound, cutoff_slope_bound};
pub use family::{conformal_potential, Bump, CoefficientTable, MetricFamily, MetricJet, SYM_PAIRS};
pub use linalg::{Mat3, Vec3};

#[cfg(test)]
mod tests {
    use super::linalg::*;
    use super::*;

    const L: f64 = 2.7;

    fn bump(delta: f64) -> MetricChart<f64> {
        builtin_metric("conformal_bump", &[delta], L).unwrap()
    }

    #[test]
    fn registry_errors() {
        assert!(matches!(builtin_metric::<f64>("sphere", &[], L), Err(crate::Error::UnknownMetric(_))));
        assert!(matches!(builtin_metric::<f64>("flat", &[1.0], L), Err(crate::Error::BadParams(_))));
        assert!(matches!(builtin_metric::<f64>("diagonal_warp", &[0.9], L), Err(crate::Error::BadParams(_))));
        assert!(matches!(builtin_metric::<f64>("conformal_bump", &[], L), Err(crate::Error::BadParams(_))));
    }

    #[test]
    fn flat_chart_has_no_curvature() {
        let c = builtin_metric::<f64>("flat", &[], L).unwrap();
        let x = [0.3, 1.1, 2.0];
        assert!(c.christoffel(&x).unwrap().iter().flatten().flatten().all(|v| *v == 0.0));
        assert!(c.scalar_curvature(&x).unwrap().abs() < 1e-10);
    }

    #[test]
    fn zero_delta_bump_is_flat() {
        let c = bump(0.0);
        let x = [0.4, 0.9, 2.2];
        assert_eq!(c.metric(&x), identity3::<f64>());
        assert!(c.scalar_curvature(&x).unwrap().abs() < 1e-14);
    }

    #[test]
    fn conformal_christoffel_and_curvature_match_closed_form() {
        let c = bump(0.1);
        let general = c.clone().with_derivative_mode(DerivativeMode::FiniteDifference(1e-4)).unwrap();
        let x = [0.7, 1.9, 1.2];
        let (_, grad, _) = conformal_potential(0.1, 0.0, &[Bump { amplitude: 1.0, center: [L / 2.0; 3] }], &x, &[L; 3]);
        let fast = c.christoffel(&x).unwrap();
        let fd = general.christoffel(&x).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                    let want = d(i, k) * grad[j] + d(j, k) * grad[i] - d(i, j) * grad[k];
                    assert!((fast[k][i][j] - want).abs() < 1e-14);
                    assert!((fd[k][i][j] - want).abs() < 1e-8);
                    assert_eq!(fd[k][i][j], fd[k][j][i]);
                }
            }
        }
        let s_exact = c.conformal_scalar_curvature(&x).unwrap();
        assert!((c.scalar_curvature(&x).unwrap() - s_exact).abs() < 1e-12 * s_exact.abs().max(1.0));
        let s_fd = general.scalar_curvature(&x).unwrap();
        assert!((s_fd - s_exact).abs() < 1e-4 * s_exact.abs(), "{s_fd} vs {s_exact}");
    }

    #[test]
    fn general_path_agrees_with_conformal_fast_path() {
        // the table family goes through the generic Christoffel formula
        let c = bump(0.1);
        let table = CoefficientTable::sample(c.family(), 32, [L; 3]).unwrap();
        let t = MetricChart::from_table("table", table).unwrap();
        let x = [1.3, 1.4, 1.2];
        let s = c.scalar_curvature(&x).unwrap();
        let st = t.scalar_curvature(&x).unwrap();
        assert!((s - st).abs() < 2e-3 * s.abs(), "{s} vs {st}");
    }

    #[test]
    fn periodicity_of_builtins() {
        for name in BUILTIN_METRICS {
            let params: Vec<f64> = if name == "flat" { vec![] } else { vec![0.1] };
            let c = builtin_metric(name, &params, L).unwrap();
            for &(y, z) in &[(0.3, 1.7), (2.2, 0.1)] {
                let a = c.metric(&[0.0, y, z]);
                let b = c.metric(&[L, y, z]);
                for i in 0..3 {
                    for j in 0..3 {
                        assert!((a[i][j] - b[i][j]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn exp_and_log_on_flat_chart() {
        let c = builtin_metric::<f64>("flat", &[], L).unwrap();
        let xi = [2.5, 0.1, 1.0];
        let v = [0.4, -0.3, 0.2];
        let x = c.exp_map(&xi, &v).unwrap();
        let want = c.wrap(&[2.9, -0.2, 1.2]);
        for a in 0..3 {
            assert!((x[a] - want[a]).abs() < 1e-10);
        }
        let back = c.log_map(&xi, &x).unwrap();
        for a in 0..3 {
            assert!((back[a] - v[a]).abs() < 1e-10);
        }
        assert_eq!(c.log_map(&xi, &xi).unwrap(), [0.0; 3]);
        assert_eq!(c.exp_map(&xi, &[0.0; 3]).unwrap(), xi);
    }

    #[test]
    fn exp_log_round_trip_on_bump() {
        let c = bump(0.1);
        let xi = [1.2, 1.5, 1.1];
        let mut state = 17u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..20 {
            let v = [rnd() * 0.3, rnd() * 0.3, rnd() * 0.3];
            let x = c.exp_map(&xi, &v).unwrap();
            let back = c.log_map(&xi, &x).unwrap();
            let again = c.exp_map(&xi, &back).unwrap();
            let d = c.periodic_displacement(&x, &again);
            assert!(norm3(&d) < 1e-8);
        }
    }

    #[test]
    fn geodesic_speed_is_conserved() {
        let c = bump(0.15);
        let xi = [1.0, 1.3, 0.9];
        let v = [0.5, 0.2, -0.1];
        let speed0 = bilinear(&c.metric(&xi), &v, &v).sqrt();
        for t in [0.3, 0.7, 1.0] {
            let (x, vel) = c.geodesic_flow(&xi, &v, t).unwrap();
            let s = bilinear(&c.metric(&x), &vel, &vel).sqrt();
            assert!((s - speed0).abs() < 1e-8 * speed0);
        }
    }

    #[test]
    fn normal_frame_and_normal_metric_at_origin() {
        let c = builtin_metric("diagonal_warp", &[0.2], L).unwrap();
        let xi = [0.5, 1.0, 2.0];
        let f = c.normal_frame(&xi).unwrap();
        assert!(f.orthonormality_defect() < 1e-10);
        let (g, rd) = c.metric_in_normal_coords(&f, &[0.0; 3]).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert!((g[a][b] - if a == b { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
        assert!((rd - 1.0).abs() < 1e-8);
        let h = 1e-3;
        for k in 0..3 {
            let mut zp = [0.0; 3];
            zp[k] = h;
            let mut zm = [0.0; 3];
            zm[k] = -h;
            let gp = c.metric_in_normal_coords(&f, &zp).unwrap().0;
            let gm = c.metric_in_normal_coords(&f, &zm).unwrap().0;
            for a in 0..3 {
                for b in 0..3 {
                    assert!(((gp[a][b] - gm[a][b]) / (2.0 * h)).abs() < 1e-4);
                }
            }
        }
    }

    #[test]
    fn f32_chart_evaluates() {
        let c = builtin_metric::<f32>("conformal_bump", &[0.1], 2.7).unwrap();
        let s = c.scalar_curvature(&[1.35, 1.35, 1.35]).unwrap();
        let s64 = bump(0.1).scalar_curvature(&[1.35, 1.35, 1.35]).unwrap();
        assert!(((s as f64) - s64).abs() < 1e-4 * s64.abs());
    }
}
