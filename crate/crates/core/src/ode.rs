//! Adaptive Dormand–Prince 5(4) integration for small fixed-size systems.

use crate::scalar::{lit, Real};

#[derive(Clone, Copy, Debug)]
pub struct StepControl<T> {
    pub rtol: T,
    pub atol: T,
    pub h_min: T,
    pub max_steps: usize,
}

impl<T: Real> StepControl<T> {
    pub fn new(tol: T) -> Self {
        Self { rtol: tol, atol: tol, h_min: lit(1e-14), max_steps: 100_000 }
    }
}

#[derive(Debug)]
pub struct OdeFailure {
    pub t: f64,
    pub reason: &'static str,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<T: Real, const N: usize>(y: &[T; N], terms: &[(f64, &[T; N])], h: T) -> [T; N] {
    let mut out = *y;
    for (c, k) in terms {
        let c = lit::<T>(*c) * h;
        for i in 0..N {
            out[i] += c * k[i];
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction) and returns
/// the end state together with the last accepted step size.
pub fn integrate<T, F, const N: usize>(
    mut f: F,
    t0: T,
    y0: [T; N],
    t1: T,
    h_guess: T,
    ctl: &StepControl<T>,
) -> Result<([T; N], T), OdeFailure>
where
    T: Real,
    F: FnMut(T, &[T; N]) -> [T; N],
{
    let span = t1 - t0;
    if span == T::zero() {
        return Ok((y0, h_guess));
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = h_guess.abs().min(span.abs()).max(ctl.h_min);
    let mut k1 = f(t, &y);
    let mut steps = 0usize;
    loop {
        if steps >= ctl.max_steps {
            return Err(OdeFailure { t: t.to_f64_lossy(), reason: "step budget exhausted" });
        }
        steps += 1;
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        let hs = if last { remaining } else { h } * dir;

        let k2 = f(t + lit::<T>(C2) * hs, &axpy(&y, &[(A21, &k1)], hs));
        let k3 = f(t + lit::<T>(C3) * hs, &axpy(&y, &[(A31, &k1), (A32, &k2)], hs));
        let k4 = f(t + lit::<T>(C4) * hs, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], hs));
        let k5 = f(
            t + lit::<T>(C5) * hs,
            &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], hs),
        );
        let k6 = f(
            t + hs,
            &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], hs),
        );
        let y_new = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], hs);
        let k7 = f(t + hs, &y_new);

        let mut err = T::zero();
        for i in 0..N {
            let e = hs
                * (lit::<T>(E1) * k1[i]
                    + lit::<T>(E3) * k3[i]
                    + lit::<T>(E4) * k4[i]
                    + lit::<T>(E5) * k5[i]
                    + lit::<T>(E6) * k6[i]
                    + lit::<T>(E7) * k7[i]);
            let sc = ctl.atol + ctl.rtol * y[i].abs().max(y_new[i].abs());
            let r = e / sc;
            err += r * r;
        }
        err = (err / T::from_usize_lossy(N)).sqrt();
        if !err.is_finite() {
            if h <= ctl.h_min {
                return Err(OdeFailure { t: t.to_f64_lossy(), reason: "non-finite state" });
            }
            h = (h * lit(0.25)).max(ctl.h_min);
            continue;
        }
        if err <= T::one() {
            t = if last { t1 } else { t + hs };
            y = y_new;
            k1 = k7;
            let fac = if err == T::zero() {
                lit(5.0)
            } else {
                (lit::<T>(0.9) * err.powf(lit(-0.2))).min(lit(5.0)).max(lit(0.2))
            };
            if last {
                return Ok((y, h));
            }
            h = h * fac;
        } else {
            if h <= ctl.h_min {
                return Err(OdeFailure { t: t.to_f64_lossy(), reason: "step size underflow" });
            }
            let fac = (lit::<T>(0.9) * err.powf(lit(-0.2))).max(lit(0.1));
            h = (h * fac).max(ctl.h_min);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_one_period() {
        let ctl = StepControl::new(1e-12);
        let (y, _) = integrate(
            |_t, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            2.0 * std::f64::consts::PI,
            0.1,
            &ctl,
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
    }

    #[test]
    fn backwards_integration() {
        let ctl = StepControl::new(1e-12);
        let (y, _) = integrate(|_t, y: &[f64; 1]| [y[0]], 1.0, [1.0], 0.0, 0.1, &ctl).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-10);
    }
}
