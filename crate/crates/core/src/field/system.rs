use super::{solve_spd, EllipticOperator, GridField, DEFAULT_SOLVE_TOL};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SystemKind {
    #[serde(rename = "KGM")]
    Kgm,
    #[serde(rename = "SM")]
    Sm,
}

/// Problem constants; `λ = a - ω²` for KGM and `λ = 1` for SM.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams<T> {
    pub kind: SystemKind,
    pub a: T,
    pub q: T,
    pub omega: T,
    pub p_exp: T,
}

impl<T: Real> SystemParams<T> {
    pub fn new(kind: SystemKind, a: T, q: T, omega: T, p_exp: T) -> Result<Self> {
        let s = Self { kind, a, q, omega, p_exp };
        s.validate()?;
        Ok(s)
    }

    pub fn kgm(a: T, q: T, omega: T, p_exp: T) -> Result<Self> {
        Self::new(SystemKind::Kgm, a, q, omega, p_exp)
    }

    pub fn sm(q: T, omega: T, p_exp: T) -> Result<Self> {
        Self::new(SystemKind::Sm, T::one(), q, omega, p_exp)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p_exp.to_f64_lossy();
        if !(p > 2.0 && p < 6.0) {
            return Err(Error::ValidationError(format!("subcritical exponent required: 2 < p < 6, got p = {p}")));
        }
        if !(self.q > T::zero()) {
            return Err(Error::ValidationError(format!("q must be positive, got {}", self.q)));
        }
        if !self.omega.is_finite() {
            return Err(Error::ValidationError("omega must be finite".into()));
        }
        match self.kind {
            SystemKind::Kgm => {
                if !(self.a > T::zero()) {
                    return Err(Error::ValidationError(format!("a must be positive, got {}", self.a)));
                }
                if !(self.lambda() > T::zero()) {
                    return Err(Error::ValidationError(format!(
                        "lambda must be positive: omega^2 = {} >= a = {}",
                        self.omega * self.omega,
                        self.a
                    )));
                }
            }
            SystemKind::Sm => {
                if self.a != T::one() {
                    return Err(Error::ValidationError(format!("SM system fixes a = 1, got {}", self.a)));
                }
            }
        }
        Ok(())
    }

    pub fn lambda(&self) -> T {
        match self.kind {
            SystemKind::Kgm => self.a - self.omega * self.omega,
            SystemKind::Sm => T::one(),
        }
    }

    /// Weight of the coupling term: `ω²` (KGM) or `ω` (SM).
    pub fn coupling_weight(&self) -> T {
        match self.kind {
            SystemKind::Kgm => self.omega * self.omega,
            SystemKind::Sm => self.omega,
        }
    }
}

/// Allowed excursion of `Ψ` outside `[0, 1/q]`.
pub const PSI_BOUND_TOL: f64 = 1e-8;

/// KGM: `-Δ_gΨ + Ψ + q²u²Ψ = qu²`; SM: `-Δ_g v + v = qu²`.
pub fn solve_psi<T: Real>(u: &GridField<T>, params: &SystemParams<T>) -> Result<GridField<T>> {
    let q = params.q;
    let u2: Vec<T> = u.values().iter().map(|v| *v * *v).collect();
    let rhs = GridField::from_vec(u.geometry(), u2.iter().map(|s| q * *s).collect());
    let psi = match params.kind {
        SystemKind::Kgm => {
            let pot: Vec<T> = u2.iter().map(|s| q * q * *s).collect();
            let op = EllipticOperator::new(T::one(), T::one(), Some(&pot));
            solve_spd(&op, &rhs, lit(DEFAULT_SOLVE_TOL))?.0
        }
        SystemKind::Sm => solve_spd(&EllipticOperator::new(T::one(), T::one(), None), &rhs, lit(DEFAULT_SOLVE_TOL))?.0,
    };
    let tol = lit::<T>(PSI_BOUND_TOL);
    let upper = match params.kind {
        SystemKind::Kgm => T::one() / q,
        SystemKind::Sm => T::infinity(),
    };
    for (node, v) in psi.values().iter().enumerate() {
        let excess = (-*v).max(*v - upper);
        if excess > tol {
            return Err(Error::BoundViolation { node, excess: excess.to_f64_lossy() });
        }
    }
    Ok(psi)
}

/// `Ψ'(u)[h]`: KGM `-ΔV + V + q²u²V = 2qu(1-qΨ)h`; SM `-ΔV + V = 2quh`.
pub fn solve_psi_prime<T: Real>(
    u: &GridField<T>,
    h: &GridField<T>,
    psi_u: &GridField<T>,
    params: &SystemParams<T>,
) -> Result<GridField<T>> {
    u.check_compatible(h)?;
    u.check_compatible(psi_u)?;
    let q = params.q;
    let two = lit::<T>(2.0);
    match params.kind {
        SystemKind::Kgm => {
            let pot: Vec<T> = u.values().iter().map(|v| q * q * *v * *v).collect();
            let rhs: Vec<T> = (0..u.values().len())
                .map(|i| two * q * u.values()[i] * (T::one() - q * psi_u.values()[i]) * h.values()[i])
                .collect();
            let op = EllipticOperator::new(T::one(), T::one(), Some(&pot));
            Ok(solve_spd(&op, &GridField::from_vec(u.geometry(), rhs), lit(DEFAULT_SOLVE_TOL))?.0)
        }
        SystemKind::Sm => {
            let rhs: Vec<T> = u.values().iter().zip(h.values()).map(|(a, b)| two * q * *a * *b).collect();
            let op = EllipticOperator::new(T::one(), T::one(), None);
            Ok(solve_spd(&op, &GridField::from_vec(u.geometry(), rhs), lit(DEFAULT_SOLVE_TOL))?.0)
        }
    }
}

/// KGM `(q²Ψ² - 2qΨ)u`; SM `-Ψu`.
pub fn g_nonlinearity<T: Real>(u: &GridField<T>, psi_u: &GridField<T>, params: &SystemParams<T>) -> Result<GridField<T>> {
    let q = params.q;
    match params.kind {
        SystemKind::Kgm => u.zip_map(psi_u, |u, p| (q * q * p * p - lit::<T>(2.0) * q * p) * u),
        SystemKind::Sm => u.zip_map(psi_u, |u, p| -p * u),
    }
}
