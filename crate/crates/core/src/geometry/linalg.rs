//! Fixed-size 3×3 helpers.

use crate::scalar::{lit, Real};

pub type Vec3<T> = [T; 3];
pub type Mat3<T> = [[T; 3]; 3];

pub fn zero3<T: Real>() -> Mat3<T> {
    [[T::zero(); 3]; 3]
}

pub fn identity3<T: Real>() -> Mat3<T> {
    let mut m = zero3();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

pub fn det3<T: Real>(m: &Mat3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn inverse3<T: Real>(m: &Mat3<T>) -> Option<Mat3<T>> {
    let d = det3(m);
    if d == T::zero() || !d.is_finite() {
        return None;
    }
    let mut inv = zero3();
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let (c, e) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[a][c] * m[b][e] - m[a][e] * m[b][c]) / d;
        }
    }
    Some(inv)
}

pub fn mat_vec<T: Real>(m: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = zero3();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn transpose3<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    let mut out = zero3();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// `uᵀ m v`
pub fn bilinear<T: Real>(m: &Mat3<T>, u: &Vec3<T>, v: &Vec3<T>) -> T {
    let mv = mat_vec(m, v);
    u[0] * mv[0] + u[1] * mv[1] + u[2] * mv[2]
}

pub fn dot3<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn min3<T: Real>(v: &Vec3<T>) -> T {
    v[0].min(v[1]).min(v[2])
}

pub fn norm3<T: Real>(a: &Vec3<T>) -> T {
    dot3(a, a).sqrt()
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues<T: Real>(m: &Mat3<T>) -> [T; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    if p1 == T::zero() {
        let mut d = [m[0][0], m[1][1], m[2][2]];
        d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        return d;
    }
    let three = lit::<T>(3.0);
    let q = (m[0][0] + m[1][1] + m[2][2]) / three;
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + lit::<T>(2.0) * p1;
    let p = (p2 / lit(6.0)).sqrt();
    let mut b = *m;
    for (i, row) in b.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (*x - if i == j { q } else { T::zero() }) / p;
        }
    }
    let r = (det3(&b) / lit(2.0)).max(-T::one()).min(T::one());
    let phi = r.acos() / three;
    let two_pi_3 = lit::<T>(2.0) * T::PI() / three;
    let e1 = q + lit::<T>(2.0) * p * phi.cos();
    let e3 = q + lit::<T>(2.0) * p * (phi + two_pi_3).cos();
    let e2 = three * q - e1 - e3;
    [e3, e2, e1]
}
