mod common;

use std::sync::Arc;

use common::*;
use concentrator::ansatz::*;
use concentrator::field::{GridGeometry, SystemParams};
use concentrator::reduction::*;
use concentrator::Error;

const LOOSE: AnsatzOptions<f64> = AnsatzOptions { points_per_eps: 1.0 };
const CENTER: [f64; 3] = [0.9; 3];

fn bump_grid(n: usize) -> Arc<GridGeometry<f64>> {
    grid("conformal_bump", &[0.1], 1.8, 0.8, n)
}

fn perp_unit(ctx: &KernelContext<'_, f64>, seed: u64, width: f64) -> Vec<f64> {
    let geom = ctx.ansatz.w.geometry();
    let raw = random_localized(geom, seed, CENTER, width);
    let (_, p) = ctx.project_perp(raw.values());
    let n = ctx.norm(&p);
    p.iter().map(|v| v / n).collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

#[test]
fn kernel_projection_properties() {
    let params = kgm();
    let prof = profiles(&params);
    let g = bump_grid(48);
    let a = build_ansatz(&g, &[0.85, 0.9, 0.95], 0.15, &prof.ground, &AnsatzOptions::default()).unwrap();
    let ctx = KernelContext::new(&a, &params).unwrap();
    let (c, perp) = ctx.project_perp(a.z[0].values());
    assert!((c[0] - 1.0).abs() < 1e-10 && c[1].abs() < 1e-10 && c[2].abs() < 1e-10, "{c:?}");
    assert!(ctx.norm(&perp) < 1e-10 * ctx.norm(a.z[0].values()));
    let u = random_localized(&g, 1, CENTER, 0.3);
    let (_, up) = ctx.project_perp(u.values());
    let (c2, upp) = ctx.project_perp(&up);
    assert!(c2.iter().all(|v| v.abs() < 1e-10), "{c2:?}");
    assert!(sub(&up, &upp).iter().all(|v| v.abs() < 1e-12));
    assert!(ctx.orthogonality_defect(&up) < 1e-12);
    assert!(a.gram_leakage(params.lambda()) < 0.05);
}

#[test]
fn degenerate_kernel_is_rejected() {
    let params = kgm();
    let prof = profiles(&params);
    let g = bump_grid(32);
    let mut a = build_ansatz(&g, &CENTER, 0.2, &prof.ground, &LOOSE).unwrap();
    a.z[1] = a.z[0].clone();
    assert!(matches!(KernelContext::new(&a, &params), Err(Error::SingularGram(_))));
}

#[test]
fn linearized_operator_basics_and_inverse() {
    let params = kgm();
    let prof = profiles(&params);
    let g = bump_grid(48);
    let a = build_ansatz(&g, &CENTER, 0.15, &prof.ground, &AnsatzOptions::default()).unwrap();
    let ctx = KernelContext::new(&a, &params).unwrap();
    let zero = vec![0.0; g.len()];
    assert!(ctx.apply_l(&zero).unwrap().iter().all(|v| *v == 0.0));
    assert!(ctx.solve_l_inverse(&zero, 1e-10).unwrap().iter().all(|v| *v == 0.0));
    let (u, v) = (perp_unit(&ctx, 2, 0.3), perp_unit(&ctx, 3, 0.3));
    let combo: Vec<f64> = u.iter().zip(&v).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
    let lhs = ctx.apply_l(&combo).unwrap();
    let (lu, lv) = (ctx.apply_l(&u).unwrap(), ctx.apply_l(&v).unwrap());
    let rhs: Vec<f64> = lu.iter().zip(&lv).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
    assert!(ctx.norm(&sub(&lhs, &rhs)) < 1e-12 * ctx.norm(&rhs).max(1.0));
    assert!(matches!(ctx.apply_l(a.z[2].values()), Err(Error::NotOrthogonal(_))));
    assert!(matches!(ctx.solve_l_inverse(a.z[1].values(), 1e-10), Err(Error::NotOrthogonal(_))));

    // random samples only bound c from above; inverse iteration finds the
    // smallest |eigenvalue| of the self-adjoint L on K⊥
    let mut c = f64::INFINITY;
    for seed in 10..20 {
        let phi = perp_unit(&ctx, seed, 0.3);
        c = c.min(ctx.norm(&ctx.apply_l(&phi).unwrap()));
    }
    let mut y = perp_unit(&ctx, 40, 0.3);
    for _ in 0..8 {
        let x = ctx.solve_l_inverse(&y, 1e-11).unwrap();
        let nx = ctx.norm(&x);
        c = c.min(1.0 / nx);
        y = scaled(&x, 1.0 / nx);
    }
    assert!(c > 0.0);
    for seed in 30..33 {
        let rhs = perp_unit(&ctx, seed, 0.3);
        let x = ctx.solve_l_inverse(&rhs, 1e-11).unwrap();
        assert!(ctx.orthogonality_defect(&x) < 1e-10);
        let back = ctx.apply_l(&x).unwrap();
        assert!(ctx.norm(&sub(&back, &rhs)) < 1e-8, "round trip {}", ctx.norm(&sub(&back, &rhs)));
        assert!(ctx.norm(&x) <= (1.0 + 1e-6) / c, "{} vs 1/{c}", ctx.norm(&x));
    }
}

#[test]
fn coercivity_constant_is_stable_in_eps() {
    let params = kgm();
    let prof = profiles(&params);
    let g = bump_grid(48);
    let nc = coords(&g, CENTER);
    let mut cs = Vec::new();
    for eps in [0.2, 0.15, 0.1] {
        let a = build_ansatz_from(&nc, eps, &prof.ground, &LOOSE).unwrap();
        let ctx = KernelContext::new(&a, &params).unwrap();
        let c = (0..50)
            .map(|seed| ctx.norm(&ctx.apply_l(&perp_unit(&ctx, 1000 + seed, 2.0 * eps)).unwrap()))
            .fold(f64::INFINITY, f64::min);
        cs.push(c);
    }
    let mean = cs.iter().sum::<f64>() / 3.0;
    assert!(cs.iter().all(|c| *c > 0.0 && (c - mean).abs() <= 0.3 * mean), "{cs:?}");
}

#[test]
fn nonlinear_terms_scaling_and_lipschitz() {
    let g = bump_grid(48);
    let nc = coords(&g, CENTER);
    for params in [kgm(), sm()] {
        let prof = profiles(&params);
        let mut lip_n = Vec::new();
        let mut lip_s = Vec::new();
        for eps in [0.2, 0.15, 0.1] {
            let a = build_ansatz_from(&nc, eps, &prof.ground, &LOOSE).unwrap();
            let ctx = KernelContext::new(&a, &params).unwrap();
            let zero = vec![0.0; g.len()];
            assert!(ctx.term_n(&zero).unwrap().iter().all(|v| *v == 0.0));
            let dir = perp_unit(&ctx, 7, 2.0 * eps);
            if eps == 0.15 {
                let ts = [0.1, 0.03, 0.01];
                let ns: Vec<f64> = ts.iter().map(|t| ctx.norm(&ctx.term_n(&scaled(&dir, *t)).unwrap())).collect();
                assert!(loglog_slope(&ts, &ns) >= 1.9, "{ns:?}");
            }
            // two points of the ball ‖φ‖ ≤ ε²
            let other = perp_unit(&ctx, 8, 2.0 * eps);
            let (p1, p2) = (scaled(&dir, eps * eps), scaled(&other, 0.5 * eps * eps));
            let dist = ctx.norm(&sub(&p1, &p2));
            let dn = sub(&ctx.term_n(&p1).unwrap(), &ctx.term_n(&p2).unwrap());
            let ds = sub(&ctx.term_s(&p1).unwrap(), &ctx.term_s(&p2).unwrap());
            lip_n.push(ctx.norm(&dn) / dist);
            lip_s.push(ctx.norm(&ds) / dist);
        }
        assert!(lip_n[0] > lip_n[1] && lip_n[1] > lip_n[2], "{lip_n:?}");
        assert!(lip_s[0] > lip_s[1] && lip_s[1] > lip_s[2], "{lip_s:?}");
    }
    let plain = SystemParams::kgm(0.75, 1.0, 0.0, 4.0).unwrap();
    let prof = profiles(&plain);
    let a = build_ansatz_from(&nc, 0.15, &prof.ground, &LOOSE).unwrap();
    let ctx = KernelContext::new(&a, &plain).unwrap();
    let phi = perp_unit(&ctx, 9, 0.3);
    assert!(ctx.term_s(&phi).unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn fixed_point_solution_invariants() {
    let g = bump_grid(48);
    let nc = coords(&g, CENTER);
    for params in [kgm(), sm()] {
        let prof = profiles(&params);
        let eps = 0.15;
        let a = build_ansatz_from(&nc, eps, &prof.ground, &LOOSE).unwrap();
        let ctx = KernelContext::new(&a, &params).unwrap();
        let opts = PhiOptions::default();
        let sol = solve_phi(&ctx, &opts).unwrap();
        assert!(sol.converged);
        let phi = sol.phi.values();
        assert!(ctx.orthogonality_defect(phi) < 1e-8);
        assert!(sol.contraction_ratios().iter().skip(1).all(|r| *r < 1.0), "{:?}", sol.contraction_ratios());
        let tol = opts.tol * sol.residual_norm;
        let lhs = ctx.apply_l(phi).unwrap();
        let rhs: Vec<f64> = {
            let (n, s, r) = (ctx.term_n(phi).unwrap(), ctx.term_s(phi).unwrap(), ctx.residual_r().unwrap());
            (0..phi.len()).map(|i| n[i] + s[i] + r[i]).collect()
        };
        let defect = ctx.norm(&sub(&lhs, &rhs));
        assert!(defect <= 10.0 * tol, "{defect} vs {tol}");
        let u = a.w.add(&sol.phi).unwrap();
        let grad = gradient_i(&u, eps, &params).unwrap();
        let (_, gp) = ctx.project_perp(grad.values());
        assert!(ctx.norm(&gp) <= 10.0 * tol, "{} vs {tol}", ctx.norm(&gp));
        let wmax = a.w.max_abs();
        assert!(a.w.values().iter().zip(u.values()).all(|(w, v)| *w <= 0.1 * wmax || *v > 0.0));
        assert!(ctx.orthogonality_defect(&ctx.residual_r().unwrap()) < 1e-8);
    }
}

#[test]
fn reduced_energy_special_cases() {
    let flat = grid("flat", &[], 1.8, 0.8, 48);
    let h = flat.spacing()[0];
    let params = kgm();
    let prof = profiles(&params);
    let opts = PhiOptions::default();
    let samples: Vec<ReducedSample<f64>> = [[0.9; 3], [0.9 + 4.0 * h, 0.9 - 2.0 * h, 0.9 + 7.0 * h]]
        .iter()
        .map(|xi| reduced_energy(&flat, xi, 0.2, &params, &prof.ground, &LOOSE, &opts).unwrap())
        .collect();
    let rel = (samples[0].i_tilde - samples[1].i_tilde).abs() / samples[0].i_tilde.abs();
    assert!(rel < 1e-6, "{rel}");
    assert_eq!(samples[0].scalar_curvature, 0.0);

    let plain = SystemParams::kgm(0.75, 1.0, 0.0, 4.0).unwrap();
    let s = reduced_energy(&bump_grid(48), &CENTER, 0.2, &plain, &prof.ground, &LOOSE, &opts).unwrap();
    assert_eq!(s.parts_tilde.g.q_weighted, 0.0);
    assert_eq!(s.i_tilde, s.parts_tilde.j);
    assert_eq!(s.s_norm, 0.0);
}

#[test]
fn ansatz_derivative_in_xi_matches_kernel_field() {
    let params = kgm();
    let prof = profiles(&params);
    let g = bump_grid(64);
    let eps = 0.1;
    let a = build_ansatz(&g, &CENTER, eps, &prof.ground, &AnsatzOptions::default()).unwrap();
    for axis in 0..3 {
        let mut e = [0.0; 3];
        e[axis] = 1.0;
        let dir = a.frame.to_coordinates(&e);
        let t = 1e-3;
        let shifted = |s: f64| {
            let xi = [0, 1, 2].map(|c| CENTER[c] + s * dir[c]);
            build_ansatz(&g, &xi, eps, &prof.ground, &AnsatzOptions::default()).unwrap().w
        };
        let fd = shifted(t).sub(&shifted(-t)).unwrap().scale(0.5 / t);
        let lead = a.z[axis].scale(-1.0 / eps);
        let err = fd.sub(&lead).unwrap().l2_norm() / lead.l2_norm();
        assert!(err < 0.05, "axis {axis}: {err}");
    }
}
