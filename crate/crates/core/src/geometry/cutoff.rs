//! Radial cutoff `χ_r`: one on `[0, r/2]`, zero on `[r, ∞)`, quintic smoothstep between.

use crate::scalar::{lit, Real};

/// `(χ, χ', χ'')` at distance `s`.
pub fn cutoff_chi_jet<T: Real>(r: T, s: T) -> (T, T, T) {
    let half = r * lit(0.5);
    if s <= half {
        return (T::one(), T::zero(), T::zero());
    }
    if s >= r {
        return (T::zero(), T::zero(), T::zero());
    }
    let t = (s - half) / half;
    let t2 = t * t;
    let one_minus = T::one() - t;
    let step = t2 * t * (lit::<T>(10.0) - lit::<T>(15.0) * t + lit::<T>(6.0) * t2);
    let dstep = lit::<T>(30.0) * t2 * one_minus * one_minus;
    let ddstep = lit::<T>(60.0) * t * one_minus * (T::one() - lit::<T>(2.0) * t);
    let inv = T::one() / half;
    (T::one() - step, -dstep * inv, -ddstep * inv * inv)
}

pub fn cutoff_chi<T: Real>(r: T, s: T) -> T {
    cutoff_chi_jet(r, s).0
}

/// Sharp bound on `|χ'|` for this profile: `(15/8)(2/r)`.
pub fn cutoff_slope_bound<T: Real>(r: T) -> T {
    lit::<T>(15.0 / 8.0) * lit::<T>(2.0) / r
}

/// Sharp bound on `|χ''|`: `(10/√3)(2/r)²`.
pub fn cutoff_curvature_bound<T: Real>(r: T) -> T {
    lit::<T>(10.0 / 3f64.sqrt()) * lit::<T>(4.0) / (r * r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_support_and_bounds() {
        let r = 0.8f64;
        assert_eq!(cutoff_chi(r, r / 4.0), 1.0);
        assert_eq!(cutoff_chi(r, 2.0 * r), 0.0);
        let mut max_d1 = 0.0f64;
        let mut max_d2 = 0.0f64;
        let mut prev = 1.0;
        for i in 0..=20_000 {
            let s = 1.2 * r * i as f64 / 20_000.0;
            let (c, d1, d2) = cutoff_chi_jet(r, s);
            assert!(c <= prev + 1e-15, "monotone");
            prev = c;
            max_d1 = max_d1.max(d1.abs());
            max_d2 = max_d2.max(d2.abs());
        }
        assert!(max_d1 <= cutoff_slope_bound(r) * (1.0 + 1e-12));
        assert!(max_d2 <= cutoff_curvature_bound(r) * (1.0 + 1e-12));
        // the bound is attained: no C¹ cutoff with this plateau can reach 2/r
        assert!(max_d1 > 2.0 / r);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let r = 1.0f64;
        for &s in &[0.55, 0.7, 0.9] {
            let h = 1e-6;
            let (_, d1, d2) = cutoff_chi_jet(r, s);
            let fd1 = (cutoff_chi(r, s + h) - cutoff_chi(r, s - h)) / (2.0 * h);
            let fd2 = (cutoff_chi_jet(r, s + h).1 - cutoff_chi_jet(r, s - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-7);
            assert!((d2 - fd2).abs() < 1e-5);
        }
    }
}
