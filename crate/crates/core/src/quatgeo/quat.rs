use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Pauli matrices.
pub fn sigma1() -> Mat2 {
    Mat2::new(C64::ZERO, C64::ONE, C64::ONE, C64::ZERO)
}

pub fn sigma2() -> Mat2 {
    Mat2::new(C64::ZERO, -I, I, C64::ZERO)
}

pub fn sigma3() -> Mat2 {
    Mat2::new(C64::ONE, C64::ZERO, C64::ZERO, -C64::ONE)
}

/// Real quaternion q0 + q1 i + q2 j + q3 k.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quaternion {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl Quaternion {
    pub const ONE: Self = Self::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Self = Self::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Self = Self::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Self = Self::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Self { q0, q1, q2, q3 }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q0, self.q1, self.q2, self.q3]
    }

    pub fn real(self) -> f64 {
        self.q0
    }

    pub fn imag(self) -> ImVec3 {
        ImVec3::new(self.q1, self.q2, self.q3)
    }

    pub fn conj(self) -> Self {
        Self::new(self.q0, -self.q1, -self.q2, -self.q3)
    }

    pub fn norm_sqr(self) -> f64 {
        self.q0 * self.q0 + self.q1 * self.q1 + self.q2 * self.q2 + self.q3 * self.q3
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// conj(q)/|q|^2, or `None` below the immersion guard.
    pub fn inverse(self) -> Option<Self> {
        let n2 = self.norm_sqr();
        if n2.sqrt() <= INVERSE_GUARD {
            return None;
        }
        Some(self.conj() * (1.0 / n2))
    }

    pub fn dot(self, o: Self) -> f64 {
        self.q0 * o.q0 + self.q1 * o.q1 + self.q2 * o.q2 + self.q3 * o.q3
    }

    /// Image under 1 -> Id, i -> -i sigma1, j -> -i sigma2, k -> -i sigma3.
    pub fn to_matrix(self) -> Mat2 {
        Mat2::new(
            C64::new(self.q0, -self.q3),
            C64::new(-self.q2, -self.q1),
            C64::new(self.q2, -self.q1),
            C64::new(self.q0, self.q3),
        )
    }

    /// Projection of a 2x2 complex matrix onto the real quaternion subalgebra.
    pub fn from_matrix(m: &Mat2) -> Self {
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        Self::new(
            0.5 * (a.re + d.re),
            -0.5 * (b.im + c.im),
            0.5 * (c.re - b.re),
            0.5 * (d.im - a.im),
        )
    }

    /// Distance of a matrix from the quaternion subalgebra.
    pub fn matrix_defect(m: &Mat2) -> f64 {
        (Self::from_matrix(m).to_matrix() - m).norm()
    }
}

/// Smallest quaternion norm accepted by [`Quaternion::inverse`].
pub const INVERSE_GUARD: f64 = 1e-8;

pub fn qmul(a: Quaternion, b: Quaternion) -> Quaternion {
    Quaternion::new(
        a.q0 * b.q0 - a.q1 * b.q1 - a.q2 * b.q2 - a.q3 * b.q3,
        a.q0 * b.q1 + a.q1 * b.q0 + a.q2 * b.q3 - a.q3 * b.q2,
        a.q0 * b.q2 - a.q1 * b.q3 + a.q2 * b.q0 + a.q3 * b.q1,
        a.q0 * b.q3 + a.q1 * b.q2 - a.q2 * b.q1 + a.q3 * b.q0,
    )
}

impl Mul for Quaternion {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        qmul(self, o)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.q0 * s, self.q1 * s, self.q2 * s, self.q3 * s)
    }
}

impl Add for Quaternion {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.q0 + o.q0, self.q1 + o.q1, self.q2 + o.q2, self.q3 + o.q3)
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Quaternion {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.q0 - o.q0, self.q1 - o.q1, self.q2 - o.q2, self.q3 - o.q3)
    }
}

impl Neg for Quaternion {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl From<ImVec3> for Quaternion {
    fn from(v: ImVec3) -> Self {
        Self::new(0.0, v.x1, v.x2, v.x3)
    }
}

impl From<f64> for Quaternion {
    fn from(s: f64) -> Self {
        Self::new(s, 0.0, 0.0, 0.0)
    }
}

/// Vector of R^3 read as the imaginary quaternion -i (x1 sigma1 + x2 sigma2 + x3 sigma3).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImVec3 {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl ImVec3 {
    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x1 * o.x1 + self.x2 * o.x2 + self.x3 * o.x3
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.x2 * o.x3 - self.x3 * o.x2,
            self.x3 * o.x1 - self.x1 * o.x3,
            self.x1 * o.x2 - self.x2 * o.x1,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn to_matrix(self) -> Mat2 {
        Quaternion::from(self).to_matrix()
    }

    /// Reads the traceless anti-Hermitian part of `m`.
    pub fn from_matrix(m: &Mat2) -> Self {
        Quaternion::from_matrix(m).imag()
    }
}

/// <X,Y> = -1/2 tr(XY) on the matrix images.
pub fn scalar_product(x: ImVec3, y: ImVec3) -> f64 {
    -0.5 * (x.to_matrix() * y.to_matrix()).trace().re
}

impl Add for ImVec3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x1 + o.x1, self.x2 + o.x2, self.x3 + o.x3)
    }
}

impl AddAssign for ImVec3 {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for ImVec3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x1 - o.x1, self.x2 - o.x2, self.x3 - o.x3)
    }
}

impl Mul<f64> for ImVec3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x1 * s, self.x2 * s, self.x3 * s)
    }
}

impl Neg for ImVec3 {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

/// Inverse of a 2x2 complex matrix; `None` when singular.
pub fn inv2(m: &Mat2) -> Option<Mat2> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if det.norm() == 0.0 || !det.is_finite() {
        return None;
    }
    Some(Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

pub fn det2(m: &Mat2) -> C64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// exp(a X) for X with X^2 = c Id (traceless 2x2), computed in closed form.
pub fn expm2(m: &Mat2) -> Mat2 {
    let half_tr = (m[(0, 0)] + m[(1, 1)]) * 0.5;
    let n = m - Mat2::identity() * half_tr;
    let d2 = -det2(&n);
    let s = d2.sqrt();
    let (c, sinc) = if s.norm() < 1e-8 {
        (C64::ONE + d2 * 0.5, C64::ONE + d2 / 6.0)
    } else {
        (s.cosh(), s.sinh() / s)
    };
    (Mat2::identity() * c + n * sinc) * half_tr.exp()
}
