mod common;

use std::sync::OnceLock;

use common::oracles::{monte_carlo_alpha, shooting_u0, tensor_integral};
use concentrator::radial::{
    constant_alpha, constant_beta, constant_c, solve_gamma, solve_ground_state, ProfileSet, RadialProfile, TailKind,
};

const TOL: f64 = 1e-10;

fn reference() -> &'static ProfileSet<f64> {
    static SET: OnceLock<ProfileSet<f64>> = OnceLock::new();
    SET.get_or_init(|| ProfileSet::compute(0.75, 4.0, 1.0).unwrap())
}

#[test]
fn peak_matches_independent_shooting() {
    for &(lambda, p) in &[(1.0, 4.0), (0.75, 4.0), (1.0, 3.0)] {
        let u = solve_ground_state(lambda, p, TOL).unwrap();
        let coarse = shooting_u0(lambda, p, 1e-3);
        let fine = shooting_u0(lambda, p, 5e-4);
        assert!((coarse - fine).abs() < 1e-9 * fine, "oracle not converged: {coarse} vs {fine}");
        let rel = (u.values()[0] - fine).abs() / fine;
        assert!(rel < 1e-7, "lambda {lambda} p {p}: U(0) {} vs oracle {fine}", u.values()[0]);
    }
}

#[test]
fn residual_positivity_monotonicity_and_scaling() {
    for &p in &[3.0, 4.0, 5.0] {
        let unit = solve_ground_state(1.0, p, TOL).unwrap();
        for &lambda in &[0.5, 1.0, 2.0] {
            let u = solve_ground_state(lambda, p, TOL).unwrap();
            assert!(u.ground_state_residual() <= 1e-8, "residual {} at lambda {lambda} p {p}", u.ground_state_residual());
            assert!(u.values().iter().all(|v| *v > 0.0));
            assert!(u.dvalues().iter().all(|d| *d <= 0.0));

            let amp = lambda.powf(1.0 / (p - 2.0));
            let peak = u.values()[0];
            for (r, v) in u.nodes().iter().zip(u.values()) {
                if *v < 1e-6 * peak {
                    break;
                }
                let scaled = amp * unit.eval(lambda.sqrt() * r);
                assert!((v - scaled).abs() <= 1e-6 * v, "scaling at r {r}: {v} vs {scaled}");
            }

            // log-slope of r·U over the last decade of values
            let last = *u.values().last().unwrap();
            let pts: Vec<(f64, f64)> = u
                .nodes()
                .iter()
                .zip(u.values())
                .filter(|(_, v)| **v < 10.0 * last && **v > 0.0)
                .map(|(r, v)| (*r, (r * v).ln()))
                .collect();
            let n = pts.len() as f64;
            let (mx, my) = pts.iter().fold((0.0, 0.0), |a, (x, y)| (a.0 + x / n, a.1 + y / n));
            let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
                / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
            assert!((-slope / lambda.sqrt() - 1.0).abs() < 0.05, "decay {slope} at lambda {lambda}");
        }
    }
}

#[test]
fn gamma_far_field_and_poisson_residual() {
    let set = reference();
    let (u, g) = (&set.ground, &set.gamma);
    assert!(g.poisson_residual(u, 1.0) < 1e-8);
    let charge = set.constants.mass_u2 / (4.0 * std::f64::consts::PI);
    let r = g.r_max();
    assert!((r * g.eval(r) / charge - 1.0).abs() < 0.01);
    assert!(g.values().iter().all(|v| *v > 0.0));

    let zero = solve_gamma(u, 0.0).unwrap();
    assert!(zero.values().iter().chain(zero.dvalues()).all(|v| *v == 0.0));
}

#[test]
fn energy_constant_against_tensor_quadrature() {
    let set = reference();
    let u = &set.ground;
    let (lambda, p) = (u.lambda(), u.p_exp());
    let c = constant_c(u);
    let tensor = tensor_integral(u, 14.0, 28, |_, v, d| 0.5 * d * d + 0.5 * lambda * v * v - v.powf(p) / p);
    assert!((tensor - c.functional_sign).abs() < 1e-5 * c.functional_sign.abs(), "{tensor} vs {}", c.functional_sign);
    assert!((c.functional_sign - c.lemma_sign - lambda * set.constants.mass_u2).abs() < 1e-12 * c.functional_sign);
    assert!((c.functional_sign - 16.3655).abs() < 1e-3);
}

#[test]
fn alpha_against_monte_carlo() {
    let u = &reference().ground;
    let alpha = constant_alpha(u);
    let (mc, se) = monte_carlo_alpha(u, 10_000_000, 1.5, 7);
    assert!(se < 0.003 * alpha, "standard error {se}");
    assert!((mc - alpha).abs() < 0.01 * alpha, "{mc} vs {alpha}");
}

#[test]
fn alpha_of_gaussian_profile() {
    let nodes: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.003).collect();
    let values: Vec<f64> = nodes.iter().map(|r| (-r * r / 2.0).exp()).collect();
    let dvalues: Vec<f64> = nodes.iter().map(|r| -r * (-r * r / 2.0).exp()).collect();
    let u = RadialProfile::from_samples(1.0, 4.0, nodes, values, dvalues, TailKind::Exponential).unwrap();
    let exact = 3.0 * std::f64::consts::PI.powf(1.5) / 4.0;
    assert!((constant_alpha(&u) / exact - 1.0).abs() < 1e-6);
}

#[test]
fn beta_routes_agree_and_scale_with_q() {
    let set = reference();
    let one = constant_beta(&set.ground, &set.gamma, 1.0).unwrap();
    assert!(one.relative_gap() < 1e-6);
    let gamma2 = solve_gamma(&set.ground, 2.0).unwrap();
    let two = constant_beta(&set.ground, &gamma2, 2.0).unwrap();
    assert!((two.direct / one.direct - 2.0).abs() < 1e-12);
    assert!((set.constants.beta - 35.651).abs() < 1e-2);
}

#[test]
fn evaluation_at_ends_and_tail() {
    let u = &reference().ground;
    let r_max = u.r_max();
    let last = *u.values().last().unwrap();
    assert_eq!(u.eval(0.0), u.values()[0]);
    assert!((u.eval(r_max) - last).abs() <= 1e-14 * last.max(1e-300));
    assert!((u.tail().value(r_max) - last).abs() < 1e-8 * last);
    assert!((u.tail().derivative(r_max) / u.dvalues().last().unwrap() - 1.0).abs() < 1e-6);
    let far = u.eval(2.0 * r_max);
    assert!(far > 0.0 && far < last);
}
