//! Reference computations that share no code with the library.

use concentrator::radial::RadialProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// RK4 for `U'' + (2/r)U' - λU + U^{p-1} = 0` from a series start at `r0`.
/// Returns +1 if U crosses zero, -1 if U turns upward while positive.
fn shoot_once(u0: f64, lambda: f64, p: f64, h: f64, r_end: f64) -> i32 {
    let r0 = 1e-3;
    let c = (lambda * u0 - u0.powf(p - 1.0)) / 6.0;
    let mut r = r0;
    let mut y = [u0 + c * r0 * r0, 2.0 * c * r0];
    let rhs = |r: f64, y: [f64; 2]| [y[1], -2.0 / r * y[1] + lambda * y[0] - y[0].max(0.0).powf(p - 1.0)];
    while r < r_end {
        let k1 = rhs(r, y);
        let k2 = rhs(r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
        let k3 = rhs(r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
        let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        r += h;
        if y[0] < 0.0 {
            return 1;
        }
        if y[1] > 0.0 {
            return -1;
        }
    }
    0
}

/// Bisection on `U(0)` with fixed-step RK4.
pub fn shooting_u0(lambda: f64, p: f64, h: f64) -> f64 {
    let mut lo = (lambda * p / 2.0).powf(1.0 / (p - 2.0)) * 1.0001;
    let mut hi = lo * 2.0;
    while shoot_once(hi, lambda, p, h, 40.0) < 0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        match shoot_once(mid, lambda, p, h, 40.0) {
            1 => hi = mid,
            -1 => lo = mid,
            _ => break,
        }
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn gauss_legendre_6() -> ([f64; 6], [f64; 6]) {
    (
        [-0.932469514203152, -0.661209386466265, -0.238619186083197, 0.238619186083197, 0.661209386466265, 0.932469514203152],
        [0.171324492379170, 0.360761573048139, 0.467913934550612, 0.467913934550612, 0.360761573048139, 0.171324492379170],
    )
}

/// `∫_{R³} f(|z|, U, U')` on an octant tensor grid of composite 6-point Gauss rules.
pub fn tensor_integral(u: &RadialProfile<f64>, extent: f64, panels: usize, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre_6();
    let width = extent / panels as f64;
    let mut pts = Vec::with_capacity(panels * 6);
    for k in 0..panels {
        for i in 0..6 {
            pts.push((width * (k as f64 + 0.5 + 0.5 * x[i]), 0.5 * width * w[i]));
        }
    }
    let mut total = 0.0;
    for &(a, wa) in &pts {
        for &(b, wb) in &pts {
            let mut row = 0.0;
            for &(c, wc) in &pts {
                let r = (a * a + b * b + c * c).sqrt();
                row += wc * f(r, u.eval(r), u.eval_derivative(r));
            }
            total += wa * wb * row;
        }
    }
    8.0 * total
}

/// Monte-Carlo estimate of `∫(U'(|z|)/|z|)² z₁⁴ dz`, sampling `z` from an
/// isotropic Gaussian of standard deviation `sigma`.
pub fn monte_carlo_alpha(u: &RadialProfile<f64>, samples: usize, sigma: f64, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(1.5);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        let z: [f64; 3] = [0, 1, 2].map(|_| {
            // Box-Muller
            let (a, b): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
            sigma * (-2.0 * a.ln()).sqrt() * (std::f64::consts::TAU * b).cos()
        });
        let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        let r = r2.sqrt();
        let d = u.eval_derivative(r);
        let density = (-r2 / (2.0 * sigma * sigma)).exp() / norm;
        let v = d * d / r2 * z[0].powi(4) / density;
        sum += v;
        sum2 += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    (mean, ((sum2 / n - mean * mean) / n).sqrt())
}
