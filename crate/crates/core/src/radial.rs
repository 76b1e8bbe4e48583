//! Radial limit problems on R³: the ground state `U` of
//! `-ΔU + λU = U^{p-1}`, its Newtonian field `γ` with `-Δγ = qU²`, and the
//! universal constants `C`, `α`, `β` obtained from them by radial quadrature.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ode::{self, StepControl};
use crate::quadrature;
use crate::scalar::{lit, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailKind {
    Exponential,
    Algebraic,
}

/// Continuation of a profile beyond its last node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tail<T> {
    /// `A e^{-k r} / r`
    Exponential { amplitude: T, rate: T },
    /// `c / r`
    Algebraic { coefficient: T },
    Zero,
}

impl<T: Real> Tail<T> {
    pub fn kind(&self) -> Option<TailKind> {
        match self {
            Tail::Exponential { .. } => Some(TailKind::Exponential),
            Tail::Algebraic { .. } => Some(TailKind::Algebraic),
            Tail::Zero => None,
        }
    }

    pub fn value(&self, r: T) -> T {
        match *self {
            Tail::Exponential { amplitude, rate } => amplitude * (-rate * r).exp() / r,
            Tail::Algebraic { coefficient } => coefficient / r,
            Tail::Zero => T::zero(),
        }
    }

    pub fn derivative(&self, r: T) -> T {
        match *self {
            Tail::Exponential { amplitude, rate } => {
                -amplitude * (-rate * r).exp() * (rate * r + T::one()) / (r * r)
            }
            Tail::Algebraic { coefficient } => -coefficient / (r * r),
            Tail::Zero => T::zero(),
        }
    }
}

/// A radial function sampled on `[0, r_max]` with a fitted far-field tail.
#[derive(Clone, Debug)]
pub struct RadialProfile<T> {
    lambda: T,
    p_exp: T,
    nodes: Vec<T>,
    values: Vec<T>,
    dvalues: Vec<T>,
    tail: Tail<T>,
}

impl<T: Real> RadialProfile<T> {
    /// Builds a profile from samples and fits the requested tail on the last
    /// tenth of the nodes. A profile that vanishes there gets a zero tail.
    pub fn from_samples(
        lambda: T,
        p_exp: T,
        nodes: Vec<T>,
        values: Vec<T>,
        dvalues: Vec<T>,
        tail_kind: TailKind,
    ) -> Result<Self> {
        if nodes.len() < 8 || nodes.len() != values.len() || nodes.len() != dvalues.len() {
            return Err(Error::ShapeMismatch(format!(
                "profile needs >= 8 nodes with matching samples (nodes {}, values {}, dvalues {})",
                nodes.len(),
                values.len(),
                dvalues.len()
            )));
        }
        if nodes[0] != T::zero() || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::ShapeMismatch("nodes must start at 0 and increase strictly".into()));
        }
        if values.iter().chain(&dvalues).any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("profile samples must be finite".into()));
        }
        let tail = fit_tail(&nodes, &values, tail_kind);
        Ok(Self { lambda, p_exp, nodes, values, dvalues, tail })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn p_exp(&self) -> T {
        self.p_exp
    }

    pub fn r_max(&self) -> T {
        *self.nodes.last().expect("non-empty")
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dvalues(&self) -> &[T] {
        &self.dvalues
    }

    pub fn tail(&self) -> Tail<T> {
        self.tail
    }

    /// Index `i` with `nodes[i] <= r < nodes[i+1]`, clamped to the last interval.
    fn interval(&self, r: T) -> usize {
        let i = self.nodes.partition_point(|&x| x <= r);
        i.saturating_sub(1).min(self.nodes.len() - 2)
    }

    /// Profile value at radius `r >= 0`: cubic Hermite interpolation inside
    /// `[0, r_max]` (with Fritsch–Carlson slope limiting when the data is
    /// monotone on the interval), tail formula beyond.
    pub fn eval(&self, r: T) -> T {
        let r = r.abs();
        if r > self.r_max() {
            return self.tail.value(r);
        }
        let i = self.interval(r);
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let h = x1 - x0;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (mut m0, mut m1) = (self.dvalues[i] * h, self.dvalues[i + 1] * h);
        let delta = y1 - y0;
        if delta != T::zero() && m0 * delta >= T::zero() && m1 * delta >= T::zero() {
            let a = m0 / delta;
            let b = m1 / delta;
            let s = a * a + b * b;
            if s > lit(9.0) {
                let tau = lit::<T>(3.0) / s.sqrt();
                m0 = m0 * tau;
                m1 = m1 * tau;
            }
        }
        let t = (r - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = three * t2 - two * t3;
        let h11 = t3 - t2;
        h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
    }

    /// Radial derivative at `r`: cubic Lagrange interpolation of the
    /// derivative samples, tail formula beyond `r_max`.
    pub fn eval_derivative(&self, r: T) -> T {
        let r = r.abs();
        if r > self.r_max() {
            return self.tail.derivative(r);
        }
        let n = self.nodes.len();
        let i = self.interval(r);
        let start = i.saturating_sub(1).min(n - 4);
        let xs = &self.nodes[start..start + 4];
        let fs = &self.dvalues[start..start + 4];
        let mut acc = T::zero();
        for a in 0..4 {
            let mut w = T::one();
            for b in 0..4 {
                if a != b {
                    w = w * (r - xs[b]) / (xs[a] - xs[b]);
                }
            }
            acc += w * fs[a];
        }
        acc
    }

    /// `U''` at the nodes by a 15-point differentiation of the `U'` samples,
    /// mirrored oddly across the origin.
    pub fn second_derivatives(&self) -> Vec<T> {
        const HALF: usize = 7;
        let n = self.nodes.len();
        let width = (2 * HALF + 1).min(n);
        (0..n)
            .map(|i| {
                let (xs, ds): (Vec<T>, Vec<T>) = if i >= HALF {
                    let start = (i - HALF).min(n - width);
                    (self.nodes[start..start + width].to_vec(), self.dvalues[start..start + width].to_vec())
                } else {
                    (0..width)
                        .map(|k| {
                            let j = i as isize - HALF as isize + k as isize;
                            let a = j.unsigned_abs();
                            if j < 0 {
                                (-self.nodes[a], -self.dvalues[a])
                            } else {
                                (self.nodes[a], self.dvalues[a])
                            }
                        })
                        .unzip()
                };
                let w = quadrature::derivative_weights(&xs, self.nodes[i]);
                w.iter().zip(&ds).map(|(w, d)| *w * *d).sum()
            })
            .collect()
    }

    /// Max over interior nodes of `|-U'' - 2U'/r + λU - (U⁺)^{p-1}|`,
    /// relative to `U(0)`.
    pub fn ground_state_residual(&self) -> T {
        let u0 = self.values[0].abs().max(T::min_positive_value());
        let d2 = self.second_derivatives();
        let pm1 = self.p_exp - T::one();
        let n = self.nodes.len();
        (2..n - 2)
            .map(|i| {
                let (r, u, du) = (self.nodes[i], self.values[i], self.dvalues[i]);
                let res = -d2[i] - lit::<T>(2.0) * du / r + self.lambda * u - u.max(T::zero()).powf(pm1);
                res.abs() / u0
            })
            .fold(T::zero(), T::max)
    }

    /// Max over interior nodes of `|-γ'' - 2γ'/r - q U²|`, relative to `γ(0)`.
    pub fn poisson_residual(&self, source: &RadialProfile<T>, q: T) -> T {
        let scale = self.values[0].abs().max(T::min_positive_value());
        let d2 = self.second_derivatives();
        let n = self.nodes.len();
        (2..n - 2)
            .map(|i| {
                let r = self.nodes[i];
                let u = source.eval(r);
                let res = -d2[i] - lit::<T>(2.0) * self.dvalues[i] / r - q * u * u;
                res.abs() / scale
            })
            .fold(T::zero(), T::max)
    }
}

fn fit_tail<T: Real>(nodes: &[T], values: &[T], kind: TailKind) -> Tail<T> {
    let n = nodes.len();
    let start = n - (n / 10).max(4);
    let window = start..n;
    let r_last = nodes[n - 1];
    let v_last = values[n - 1];
    if values[window.clone()].iter().all(|v| *v == T::zero()) {
        return Tail::Zero;
    }
    match kind {
        TailKind::Algebraic => Tail::Algebraic { coefficient: r_last * v_last },
        TailKind::Exponential => {
            if values[window.clone()].iter().any(|v| *v <= T::zero()) {
                return Tail::Zero;
            }
            // least squares of ln(r U) = ln A - k r
            let m = T::from_usize_lossy(window.len());
            let (mut sx, mut sy, mut sxx, mut sxy) = (T::zero(), T::zero(), T::zero(), T::zero());
            for i in window {
                let x = nodes[i];
                let y = (nodes[i] * values[i]).ln();
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
            }
            let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
            let rate = -slope;
            // amplitude pinned by continuity at r_max
            let amplitude = v_last * r_last * (rate * r_last).exp();
            Tail::Exponential { amplitude, rate }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shot {
    /// crossed zero while decreasing: U(0) too large
    SignChange,
    /// turned upward while positive: U(0) too small
    Turned,
    Undecided,
}

struct Trajectory<T> {
    values: Vec<T>,
    dvalues: Vec<T>,
    outcome: Shot,
}

fn positive_power<T: Real>(u: T, e: T) -> T {
    if u > T::zero() {
        u.powf(e)
    } else {
        T::zero()
    }
}

/// Shoots `U(0) = s` on the node grid `k h` until the trajectory is classified.
fn shoot<T: Real>(s: T, lambda: T, p_exp: T, h: T, n_max: usize, ctl: &StepControl<T>) -> Result<Trajectory<T>> {
    let pm1 = p_exp - T::one();
    let rhs = |r: T, y: &[T; 2]| -> [T; 2] {
        [y[1], -lit::<T>(2.0) * y[1] / r + lambda * y[0] - positive_power(y[0], pm1)]
    };
    // series start: U = s + c2 r² + c4 r⁴ + c6 r⁶
    let f1 = lambda - pm1 * s.powf(p_exp - lit(2.0));
    let f2 = -pm1 * (p_exp - lit(2.0)) * s.powf(p_exp - lit(3.0));
    let c2 = (lambda * s - s.powf(pm1)) / lit(6.0);
    let c4 = c2 * f1 / lit(20.0);
    let c6 = (f1 * c4 + lit::<T>(0.5) * f2 * c2 * c2) / lit(42.0);
    // the series is used only on [0, h/16]; its truncation error there is ~1e-15
    let r_s = h / lit(16.0);
    let r2 = r_s * r_s;
    let start = [
        s + r2 * (c2 + r2 * (c4 + r2 * c6)),
        r_s * (lit::<T>(2.0) * c2 + r2 * (lit::<T>(4.0) * c4 + r2 * lit::<T>(6.0) * c6)),
    ];
    let (mut y, _) = ode::integrate(rhs, r_s, start, h, r_s, ctl)
        .map_err(|e| Error::NoConvergence(format!("ground-state start at r = {}: {}", e.t, e.reason)))?;
    let mut values = vec![s, y[0]];
    let mut dvalues = vec![T::zero(), y[1]];
    let mut step = h;
    let mut outcome = Shot::Undecided;
    for k in 1..n_max {
        let r0 = h * T::from_usize_lossy(k);
        let (next, last) = ode::integrate(rhs, r0, y, r0 + h, step, ctl)
            .map_err(|e| Error::NoConvergence(format!("ground-state shooting at r = {}: {}", e.t, e.reason)))?;
        step = last;
        y = next;
        values.push(y[0]);
        dvalues.push(y[1]);
        if y[0] < T::zero() {
            outcome = Shot::SignChange;
            break;
        }
        if y[1] > T::zero() {
            outcome = Shot::Turned;
            break;
        }
    }
    Ok(Trajectory { values, dvalues, outcome })
}

/// Values and derivatives on nodes `k h`, `k = from..=to`, integrated inward
/// from `A e^{-√λ r}/r` at the outermost node.
fn inward_tail<T: Real>(
    amplitude: T,
    lambda: T,
    p_exp: T,
    h: T,
    from: usize,
    to: usize,
    ctl: &StepControl<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let pm1 = p_exp - T::one();
    let rhs = |r: T, y: &[T; 2]| -> [T; 2] {
        [y[1], -lit::<T>(2.0) * y[1] / r + lambda * y[0] - positive_power(y[0], pm1)]
    };
    let k = lambda.sqrt();
    let r_end = h * T::from_usize_lossy(to);
    let v = amplitude * (-k * r_end).exp() / r_end;
    let mut y = [v, -(k + T::one() / r_end) * v];
    let mut values = vec![T::zero(); to - from + 1];
    let mut dvalues = values.clone();
    values[to - from] = y[0];
    dvalues[to - from] = y[1];
    let mut step = h;
    for i in (from..to).rev() {
        let r1 = h * T::from_usize_lossy(i + 1);
        let (next, last) = ode::integrate(rhs, r1, y, r1 - h, step, ctl)
            .map_err(|e| Error::NoConvergence(format!("inward tail at r = {}: {}", e.t, e.reason)))?;
        step = last;
        y = next;
        values[i - from] = y[0];
        dvalues[i - from] = y[1];
    }
    Ok((values, dvalues))
}

/// Positive radial ground state of `-U'' - (2/r)U' + λU = U^{p-1}` on R³.
///
/// `U(0)` is bracketed by bisection between trajectories that turn upward
/// while positive and trajectories that change sign. The shooting solution is
/// kept while both bracket ends agree; past that point the decaying branch
/// is integrated inward from a Yukawa tail `A e^{-√λ r}/r` placed where
/// `U/U(0) < 1e-10`.
pub fn solve_ground_state<T: Real>(lambda: T, p_exp: T, tol: T) -> Result<RadialProfile<T>> {
    let p64 = p_exp.to_f64_lossy();
    if !(p64 > 2.0 && p64 < 6.0) {
        return Err(Error::NonSubcriticalExponent(p64));
    }
    if !(lambda > T::zero()) {
        return Err(Error::NonPositiveLambda(lambda.to_f64_lossy()));
    }
    let sqrt_l = lambda.sqrt();
    let h = lit::<T>(0.005) / sqrt_l;
    let n_max = (lit::<T>(60.0) / (sqrt_l * h)).to_usize().unwrap_or(12_000);
    let ctl = StepControl::new((tol * lit(1e-3)).max(T::EPS * lit(16.0)));

    let equilibrium = lambda.powf(T::one() / (p_exp - lit(2.0)));
    let mut lo = equilibrium * lit(1.0001);
    let first = shoot(lo, lambda, p_exp, h, n_max, &ctl)?;
    if first.outcome != Shot::Turned {
        return Err(Error::BracketFailure { ceiling: lo.to_f64_lossy() });
    }
    let ceiling = equilibrium * lit(1e8);
    let mut hi = lo * lit(2.0);
    loop {
        if shoot(hi, lambda, p_exp, h, n_max, &ctl)?.outcome == Shot::SignChange {
            break;
        }
        lo = hi;
        hi = hi * lit(2.0);
        if hi > ceiling {
            return Err(Error::BracketFailure { ceiling: ceiling.to_f64_lossy() });
        }
    }
    for _ in 0..200 {
        let mid = (lo + hi) / lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(mid, lambda, p_exp, h, n_max, &ctl)?.outcome {
            Shot::SignChange => hi = mid,
            Shot::Turned => lo = mid,
            Shot::Undecided => {
                lo = mid;
                hi = mid;
                break;
            }
        }
    }
    let a = shoot(lo, lambda, p_exp, h, n_max, &ctl)?;
    let b = shoot(hi, lambda, p_exp, h, n_max, &ctl)?;
    let s = (lo + hi) / lit(2.0);

    // trusted prefix: both ends agree and stay monotone decreasing
    let common = a.values.len().min(b.values.len()) - 1;
    let agree = lit::<T>(1e-9).max(T::EPS * lit(100.0));
    let mut trusted = 0;
    for i in 1..common {
        let (ua, ub) = (a.values[i], b.values[i]);
        let mid = (ua + ub) / lit(2.0);
        if mid <= T::zero() || (ua - ub).abs() > agree * mid || a.dvalues[i] >= T::zero() {
            break;
        }
        trusted = i;
        if mid < lit::<T>(1e-6) * s {
            break;
        }
    }
    if trusted < 40 {
        return Err(Error::NoConvergence("shooting bracket never resolved the decay".into()));
    }
    let mut nodes: Vec<T> = (0..=trusted).map(|i| h * T::from_usize_lossy(i)).collect();
    let mut values: Vec<T> = (0..=trusted).map(|i| (a.values[i] + b.values[i]) / lit(2.0)).collect();
    let mut dvalues: Vec<T> = (0..=trusted).map(|i| (a.dvalues[i] + b.dvalues[i]) / lit(2.0)).collect();

    // Past the trusted prefix the decaying branch is integrated inward from
    // Yukawa data far out, where it is stable, and scaled to match U there.
    let (r_j, u_j) = (nodes[trusted], values[trusted]);
    let target = lit::<T>(0.5e-10) * s;
    let mut amplitude = u_j * r_j * (sqrt_l * r_j).exp();
    let mut k_end = trusted + 1;
    while amplitude * (-sqrt_l * h * T::from_usize_lossy(k_end)).exp() / (h * T::from_usize_lossy(k_end)) >= target
        && k_end < 4 * n_max
    {
        k_end += 1;
    }
    let mut inward = inward_tail(amplitude, lambda, p_exp, h, trusted, k_end, &ctl)?;
    for _ in 0..20 {
        let ratio = u_j / inward.0[0];
        if (ratio - T::one()).abs() < T::EPS * lit(4.0) {
            break;
        }
        amplitude = amplitude * ratio;
        inward = inward_tail(amplitude, lambda, p_exp, h, trusted, k_end, &ctl)?;
    }
    for k in trusted + 1..=k_end {
        nodes.push(h * T::from_usize_lossy(k));
        values.push(inward.0[k - trusted]);
        dvalues.push(inward.1[k - trusted]);
    }
    RadialProfile::from_samples(lambda, p_exp, nodes, values, dvalues, TailKind::Exponential)
}

/// Running integral of radial samples by 12-point Lagrange stencils, extended
/// across the origin with the given parity so the first intervals keep full order.
fn reflected_cumulative<T: Real>(r: &[T], f: &[T], parity: T) -> Vec<T> {
    const W: usize = 12;
    let n = r.len();
    let at = |j: isize| -> (T, T) {
        let a = j.unsigned_abs();
        if j < 0 {
            (-r[a], parity * f[a])
        } else {
            (r[a], f[a])
        }
    };
    let gl = quadrature::gauss_legendre::<T>(7);
    let mut out = Vec::with_capacity(n);
    let mut acc = T::zero();
    out.push(acc);
    for i in 0..n - 1 {
        let start = (i as isize - (W as isize / 2 - 1)).min(n as isize - W as isize);
        let (xs, fs): (Vec<T>, Vec<T>) = (start..start + W as isize).map(at).unzip();
        let (a, b) = (r[i], r[i + 1]);
        let half = (b - a) / lit(2.0);
        let mid = (a + b) / lit(2.0);
        let piece: T = gl
            .iter()
            .map(|&(t, w)| {
                let x = mid + half * t;
                let mut acc = T::zero();
                for (k, (&xk, &fk)) in xs.iter().zip(&fs).enumerate() {
                    let mut l = T::one();
                    for (m, &xm) in xs.iter().enumerate() {
                        if m != k {
                            l = l * (x - xm) / (xk - xm);
                        }
                    }
                    acc += l * fk;
                }
                w * acc
            })
            .sum();
        acc += piece * half;
        out.push(acc);
    }
    out
}

/// Radial solution of `-Δγ = qU²` through its Newtonian representation
/// `γ(r) = (q/r)∫₀^r s²U² ds + q∫_r^∞ sU² ds`.
pub fn solve_gamma<T: Real>(u: &RadialProfile<T>, q: T) -> Result<RadialProfile<T>> {
    if !(q >= T::zero()) {
        return Err(Error::ValidationError(format!("q must be nonnegative, got {q}")));
    }
    let r = u.nodes();
    let u2: Vec<T> = u.values().iter().map(|v| *v * *v).collect();
    let f_mass: Vec<T> = r.iter().zip(&u2).map(|(r, u2)| *r * *r * *u2).collect();
    let f_first: Vec<T> = r.iter().zip(&u2).map(|(r, u2)| *r * *u2).collect();
    let mass = reflected_cumulative(r, &f_mass, T::one());
    let first = reflected_cumulative(r, &f_first, -T::one());
    let (mass_tail, first_tail) = exponential_tail_moments(u);
    let first_total = *first.last().expect("nodes") + first_tail;

    let mut values = Vec::with_capacity(r.len());
    let mut dvalues = Vec::with_capacity(r.len());
    for i in 0..r.len() {
        let ri = r[i];
        let outer = q * (first_total - first[i]);
        if i == 0 {
            values.push(outer);
            dvalues.push(T::zero());
        } else {
            values.push(q * mass[i] / ri + outer);
            dvalues.push(-q * mass[i] / (ri * ri));
        }
    }
    let mut profile = RadialProfile::from_samples(
        u.lambda(),
        u.p_exp(),
        r.to_vec(),
        values,
        dvalues,
        TailKind::Algebraic,
    )?;
    if q > T::zero() {
        // far field fixed by the total mass rather than the last sample
        let total_mass = *mass.last().expect("nodes") + mass_tail;
        profile.tail = Tail::Algebraic { coefficient: q * total_mass };
    }
    Ok(profile)
}

/// `(∫_{R}^∞ s²U² ds, ∫_{R}^∞ sU² ds)` from the exponential tail of `U`.
fn exponential_tail_moments<T: Real>(u: &RadialProfile<T>) -> (T, T) {
    match u.tail() {
        Tail::Exponential { amplitude, rate } => {
            let big_r = u.r_max();
            let a2 = amplitude * amplitude;
            let decay = (-lit::<T>(2.0) * rate * big_r).exp();
            let two_k = lit::<T>(2.0) * rate;
            // E1(x) ~ e^{-x}/x for large x
            (a2 * decay / two_k, a2 * decay / (two_k * big_r))
        }
        _ => (T::zero(), T::zero()),
    }
}

fn four_pi<T: Real>() -> T {
    lit::<T>(4.0) * T::PI()
}

/// `4π ∫₀^{r_max} f(r) r² dr`
fn radial_integral<T: Real>(u: &RadialProfile<T>, f: impl Fn(usize) -> T) -> T {
    let r = u.nodes();
    let samples: Vec<T> = (0..r.len()).map(|i| f(i) * r[i] * r[i]).collect();
    four_pi::<T>() * quadrature::integrate(r, &samples)
}

/// The energy constant in both sign conventions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyConstant<T> {
    /// `½∫|∇U|² + (λ/2)∫U² - (1/p)∫U^p`, the sign of the functional `J_ε`.
    pub functional_sign: T,
    /// `½∫|∇U|² - (λ/2)∫U² - (1/p)∫U^p`, as printed with the energy lemma.
    pub lemma_sign: T,
}

pub fn constant_c<T: Real>(u: &RadialProfile<T>) -> EnergyConstant<T> {
    let grad = radial_integral(u, |i| u.dvalues()[i] * u.dvalues()[i]);
    let mass = radial_integral(u, |i| u.values()[i] * u.values()[i]);
    let power = radial_integral(u, |i| positive_power(u.values()[i], u.p_exp()));
    let half = lit::<T>(0.5);
    let lam = u.lambda();
    EnergyConstant {
        functional_sign: half * grad + half * lam * mass - power / u.p_exp(),
        lemma_sign: half * grad - half * lam * mass - power / u.p_exp(),
    }
}

/// `α = ∫(U'(|z|)/|z|)² z₁⁴ dz = (4π/5)∫₀^∞ U'(r)² r⁴ dr`.
pub fn constant_alpha<T: Real>(u: &RadialProfile<T>) -> T {
    radial_integral(u, |i| {
        let r = u.nodes()[i];
        u.dvalues()[i] * u.dvalues()[i] * r * r
    }) / lit(5.0)
}

/// Both quadrature routes to `β`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaRoutes<T> {
    /// `∫γU²`
    pub direct: T,
    /// `(1/q)∫|∇γ|²`
    pub gradient: T,
}

impl<T: Real> BetaRoutes<T> {
    pub fn relative_gap(&self) -> T {
        let scale = self.direct.abs().max(self.gradient.abs());
        if scale == T::zero() {
            T::zero()
        } else {
            (self.direct - self.gradient).abs() / scale
        }
    }
}

/// Allowed relative gap between the two β routes (raised to `1000·EPS` in low precision).
pub const GREEN_IDENTITY_TOL: f64 = 1e-6;

/// `β = ∫γU² = (1/q)∫|∇γ|²`, checked against each other.
pub fn constant_beta<T: Real>(u: &RadialProfile<T>, gamma: &RadialProfile<T>, q: T) -> Result<BetaRoutes<T>> {
    if u.nodes().len() != gamma.nodes().len() || u.nodes().iter().zip(gamma.nodes()).any(|(a, b)| a != b) {
        return Err(Error::ShapeMismatch("U and gamma must share radial nodes".into()));
    }
    let direct = radial_integral(u, |i| gamma.values()[i] * u.values()[i] * u.values()[i]);
    if q == T::zero() {
        return Ok(BetaRoutes { direct, gradient: T::zero() });
    }
    let inner = radial_integral(gamma, |i| gamma.dvalues()[i] * gamma.dvalues()[i]);
    // γ' = -c/r² past r_max
    let far = match gamma.tail() {
        Tail::Algebraic { coefficient } => four_pi::<T>() * coefficient * coefficient / gamma.r_max(),
        _ => T::zero(),
    };
    let routes = BetaRoutes { direct, gradient: (inner + far) / q };
    if routes.relative_gap() > lit::<T>(GREEN_IDENTITY_TOL).max(T::EPS * lit(1000.0)) {
        return Err(Error::GreenIdentityViolation {
            direct: routes.direct.to_f64_lossy(),
            gradient: routes.gradient.to_f64_lossy(),
        });
    }
    Ok(routes)
}

/// How the constants were integrated.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct QuadratureProvenance {
    pub rule: &'static str,
    pub nodes: usize,
    pub r_max: f64,
    pub node_spacing: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniversalConstants<T> {
    pub c_energy: T,
    pub c_energy_lemma_sign: T,
    pub alpha: T,
    pub beta: T,
    pub beta_gradient: T,
    pub mass_u2: T,
    pub grad_u2: T,
    pub power_p: T,
    pub q: T,
    pub provenance: QuadratureProvenance,
}

pub fn universal_constants<T: Real>(
    u: &RadialProfile<T>,
    gamma: &RadialProfile<T>,
    q: T,
) -> Result<UniversalConstants<T>> {
    let c = constant_c(u);
    let beta = constant_beta(u, gamma, q)?;
    Ok(UniversalConstants {
        c_energy: c.functional_sign,
        c_energy_lemma_sign: c.lemma_sign,
        alpha: constant_alpha(u),
        beta: beta.direct,
        beta_gradient: beta.gradient,
        mass_u2: radial_integral(u, |i| u.values()[i] * u.values()[i]),
        grad_u2: radial_integral(u, |i| u.dvalues()[i] * u.dvalues()[i]),
        power_p: radial_integral(u, |i| positive_power(u.values()[i], u.p_exp())),
        q,
        provenance: QuadratureProvenance {
            rule: "piecewise-cubic Gauss-Legendre on radial nodes, 4*pi*int f r^2 dr",
            nodes: u.nodes().len(),
            r_max: u.r_max().to_f64_lossy(),
            node_spacing: (u.nodes()[1] - u.nodes()[0]).to_f64_lossy(),
        },
    })
}

/// Ground state, its field and the derived constants for one `(λ, p, q)`.
#[derive(Clone, Debug)]
pub struct ProfileSet<T> {
    pub ground: RadialProfile<T>,
    pub gamma: RadialProfile<T>,
    pub constants: UniversalConstants<T>,
}

pub const DEFAULT_SHOOTING_TOL: f64 = 1e-10;

impl<T: Real> ProfileSet<T> {
    pub fn compute(lambda: T, p_exp: T, q: T) -> Result<Self> {
        let ground = solve_ground_state(lambda, p_exp, lit(DEFAULT_SHOOTING_TOL))?;
        Self::from_ground(ground, q)
    }

    pub fn from_ground(ground: RadialProfile<T>, q: T) -> Result<Self> {
        let gamma = solve_gamma(&ground, q)?;
        let constants = universal_constants(&ground, &gamma, q)?;
        Ok(Self { ground, gamma, constants })
    }

    pub fn q(&self) -> T {
        self.constants.q
    }

    /// Serializes to the versioned plain-text cache layout.
    pub fn to_cache_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#version 1");
        let _ = writeln!(out, "#lambda {:e}", self.ground.lambda());
        let _ = writeln!(out, "#p {:e}", self.ground.p_exp());
        let _ = writeln!(out, "#q {:e}", self.q());
        for i in 0..self.ground.nodes().len() {
            let _ = writeln!(
                out,
                "{:e} {:e} {:e} {:e}",
                self.ground.nodes()[i],
                self.ground.values()[i],
                self.ground.dvalues()[i],
                self.gamma.values()[i]
            );
        }
        out
    }

    /// Parses the cache layout; `γ` is rebuilt from `U` and checked against
    /// the stored column.
    pub fn from_cache_str(text: &str) -> Result<Self> {
        let mut header: [Option<T>; 3] = [None; 3];
        let mut version_seen = false;
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        let mut dvalues = Vec::new();
        let mut gamma_col = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let perr = |field: &str, message: String| Error::ParseError { line: lineno, field: field.into(), message };
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.splitn(2, ' ');
                let key = it.next().unwrap_or("");
                let val = it.next().unwrap_or("").trim();
                let slot = match key {
                    "version" => {
                        if val != "1" {
                            return Err(perr("version", format!("unsupported version `{val}`")));
                        }
                        version_seen = true;
                        continue;
                    }
                    "lambda" => 0,
                    "p" => 1,
                    "q" => 2,
                    other => return Err(perr(other, "unknown header".into())),
                };
                let v: f64 = val.parse().map_err(|e| perr(key, format!("{e}")))?;
                header[slot] = Some(T::lit(v));
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(' ').collect();
            if cols.len() != 4 {
                return Err(perr("row", format!("expected 4 columns, found {}", cols.len())));
            }
            let names = ["r", "U", "dU", "gamma"];
            let mut parsed = [T::zero(); 4];
            for (k, c) in cols.iter().enumerate() {
                let v: f64 = c.parse().map_err(|e| perr(names[k], format!("{e}")))?;
                parsed[k] = T::lit(v);
            }
            nodes.push(parsed[0]);
            values.push(parsed[1]);
            dvalues.push(parsed[2]);
            gamma_col.push(parsed[3]);
        }
        if !version_seen {
            return Err(Error::ParseError { line: 1, field: "version".into(), message: "missing #version".into() });
        }
        let missing = |f: &str| Error::ParseError { line: 0, field: f.into(), message: "missing header".into() };
        let lambda = header[0].ok_or_else(|| missing("lambda"))?;
        let p_exp = header[1].ok_or_else(|| missing("p"))?;
        let q = header[2].ok_or_else(|| missing("q"))?;
        let ground = RadialProfile::from_samples(lambda, p_exp, nodes, values, dvalues, TailKind::Exponential)?;
        let set = Self::from_ground(ground, q)?;
        let scale = set.gamma.values()[0].abs().max(T::min_positive_value());
        for (i, (a, b)) in set.gamma.values().iter().zip(&gamma_col).enumerate() {
            if (*a - *b).abs() > lit::<T>(1e-9) * scale {
                return Err(Error::ParseError {
                    line: i + 5,
                    field: "gamma".into(),
                    message: "stored field disagrees with the recomputed one".into(),
                });
            }
        }
        Ok(set)
    }

    pub fn write_cache(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_cache_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_cache(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_cache_str(&text)
    }

    /// File name used inside a cache directory for `(λ, p, q)`.
    pub fn cache_file_name(lambda: T, p_exp: T, q: T) -> String {
        format!("profile_l{:e}_p{:e}_q{:e}.txt", lambda, p_exp, q)
    }

    /// Loads the profile from `dir` when present, otherwise computes and stores it.
    pub fn load_or_compute(dir: Option<&Path>, lambda: T, p_exp: T, q: T) -> Result<Self> {
        let Some(dir) = dir else {
            return Self::compute(lambda, p_exp, q);
        };
        let path = dir.join(Self::cache_file_name(lambda, p_exp, q));
        if path.exists() {
            if let Ok(set) = Self::read_cache(&path) {
                return Ok(set);
            }
        }
        let set = Self::compute(lambda, p_exp, q)?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        set.write_cache(&path)?;
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(solve_ground_state(0.0, 4.0, 1e-10), Err(Error::NonPositiveLambda(_))));
        assert!(matches!(solve_ground_state(1.0, 6.0, 1e-10), Err(Error::NonSubcriticalExponent(_))));
        assert!(matches!(solve_ground_state(1.0, 2.0, 1e-10), Err(Error::NonSubcriticalExponent(_))));
    }

    #[test]
    fn ground_state_basic_shape() {
        let u = solve_ground_state(1.0f64, 4.0, 1e-10).unwrap();
        assert!(u.values().iter().all(|v| *v > 0.0));
        assert!(u.dvalues()[1..].iter().all(|d| *d <= 0.0));
        assert!(u.values().last().unwrap() / u.values()[0] < 1e-10);
        assert!(u.ground_state_residual() < 1e-8, "{}", u.ground_state_residual());
        match u.tail() {
            Tail::Exponential { rate, .. } => assert!((rate - 1.0).abs() < 0.05),
            other => panic!("unexpected tail {other:?}"),
        }
    }

    #[test]
    fn eval_endpoints_and_tail() {
        let u = solve_ground_state(1.0f64, 4.0, 1e-10).unwrap();
        assert_eq!(u.eval(0.0), u.values()[0]);
        let rm = u.r_max();
        assert!((u.eval(rm) - u.values().last().unwrap()).abs() <= 1e-12 * u.values().last().unwrap());
        let far = u.eval(2.0 * rm);
        assert!(far > 0.0 && far < *u.values().last().unwrap());
        // continuity across r_max
        let inside = u.eval(rm * (1.0 - 1e-12));
        let outside = u.eval(rm * (1.0 + 1e-12));
        assert!((inside - outside).abs() <= 1e-8 * inside);
    }

    #[test]
    fn zero_profile_gives_zero_constants() {
        let nodes: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let zeros = vec![0.0; 100];
        let u = RadialProfile::from_samples(1.0, 4.0, nodes, zeros.clone(), zeros, TailKind::Exponential).unwrap();
        assert_eq!(u.tail(), Tail::Zero);
        let c = constant_c(&u);
        assert_eq!(c.functional_sign, 0.0);
        assert_eq!(constant_alpha(&u), 0.0);
        let g = solve_gamma(&u, 1.0).unwrap();
        assert_eq!(constant_beta(&u, &g, 1.0).unwrap().direct, 0.0);
    }

    #[test]
    fn gamma_vanishes_for_zero_charge() {
        let u = solve_ground_state(1.0f64, 4.0, 1e-10).unwrap();
        let g = solve_gamma(&u, 0.0).unwrap();
        assert!(g.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cache_round_trip_is_exact() {
        let set = ProfileSet::compute(1.0f64, 4.0, 1.0).unwrap();
        let back = ProfileSet::<f64>::from_cache_str(&set.to_cache_string()).unwrap();
        let (a, b) = (&set.constants, &back.constants);
        for (x, y) in [(a.c_energy, b.c_energy), (a.alpha, b.alpha), (a.beta, b.beta)] {
            assert!((x - y).abs() <= 1e-12 * x.abs());
        }
    }

    #[test]
    fn cache_rejects_garbage() {
        let err = ProfileSet::<f64>::from_cache_str("#version 1\n#lambda x\n").unwrap_err();
        assert!(matches!(err, Error::ParseError { line: 2, .. }));
    }

    #[test]
    fn f32_ground_state_is_usable() {
        let u = solve_ground_state(1.0f32, 4.0, 1e-5).unwrap();
        let u64 = solve_ground_state(1.0f64, 4.0, 1e-10).unwrap();
        assert!((u.values()[0] as f64 - u64.values()[0]).abs() < 1e-3 * u64.values()[0]);
    }
}
