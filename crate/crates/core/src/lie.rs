//! Quaternions, the Lie algebra `su(2) = Im H = R^3` and its bi-invariant inner product.
//!
//! Conventions: the bracket is the quaternion commutator `[u, v] = uv - vu`, so
//! `[i, j] = 2k`, and `Q` is the Euclidean dot product on `(x, y, z)`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|g| - 1` accepted for group elements.
pub const UNIT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2], s[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn pure(v: AlgebraVector) -> Self {
        Self::new(0.0, v.0.x, v.0.y, v.0.z)
    }

    pub fn imaginary(self) -> AlgebraVector {
        AlgebraVector::new(self.x, self.y, self.z)
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_squared(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn normalize(self) -> Self {
        self.scale(1.0 / self.norm())
    }

    pub fn dot(self, other: Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn inverse(self) -> Self {
        self.conj().scale(1.0 / self.norm_squared())
    }

    /// Matrix of `p -> self * p` acting on `(w, x, y, z)` coordinates.
    pub fn left_matrix(self) -> nalgebra::Matrix4<f64> {
        let Quaternion { w, x, y, z } = self;
        nalgebra::Matrix4::new(
            w, -x, -y, -z, //
            x, w, -z, y, //
            y, z, w, -x, //
            z, -y, x, w,
        )
    }

    /// Matrix of `p -> p * self` acting on `(w, x, y, z)` coordinates.
    pub fn right_matrix(self) -> nalgebra::Matrix4<f64> {
        let Quaternion { w, x, y, z } = self;
        nalgebra::Matrix4::new(
            w, -x, -y, -z, //
            x, w, z, -y, //
            y, -z, w, x, //
            z, y, -x, w,
        )
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, r: Quaternion) -> Quaternion {
        Quaternion::new(
            self.w * r.w - self.x * r.x - self.y * r.y - self.z * r.z,
            self.w * r.x + self.x * r.w + self.y * r.z - self.z * r.y,
            self.w * r.y - self.x * r.z + self.y * r.w + self.z * r.x,
            self.w * r.z + self.x * r.y - self.y * r.x + self.z * r.w,
        )
    }
}

impl Add for Quaternion {
    type Output = Quaternion;

    fn add(self, r: Quaternion) -> Quaternion {
        Quaternion::new(self.w + r.w, self.x + r.x, self.y + r.y, self.z + r.z)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;

    fn sub(self, r: Quaternion) -> Quaternion {
        Quaternion::new(self.w - r.w, self.x - r.x, self.y - r.y, self.z - r.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        self.scale(-1.0)
    }
}

/// Element of the Lie algebra, identified with `span{i, j, k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgebraVector(pub Vector3<f64>);

impl AlgebraVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }

    /// The i-th basis element (0 -> i, 1 -> j, 2 -> k).
    pub fn basis(index: usize) -> Self {
        let mut v = Vector3::zeros();
        v[index] = 1.0;
        Self(v)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self(v)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0 * s)
    }
}

impl Add for AlgebraVector {
    type Output = AlgebraVector;

    fn add(self, r: AlgebraVector) -> AlgebraVector {
        AlgebraVector(self.0 + r.0)
    }
}

impl Sub for AlgebraVector {
    type Output = AlgebraVector;

    fn sub(self, r: AlgebraVector) -> AlgebraVector {
        AlgebraVector(self.0 - r.0)
    }
}

impl Neg for AlgebraVector {
    type Output = AlgebraVector;

    fn neg(self) -> AlgebraVector {
        AlgebraVector(-self.0)
    }
}

/// Quaternion commutator `uv - vu`; equals `2 (u x v)`.
pub fn bracket(u: AlgebraVector, v: AlgebraVector) -> AlgebraVector {
    let (qu, qv) = (Quaternion::pure(u), Quaternion::pure(v));
    (qu * qv - qv * qu).imaginary()
}

/// Matrix of `v -> [u, v]`.
pub fn ad_matrix(u: AlgebraVector) -> Matrix3<f64> {
    let u = u.0 * 2.0;
    Matrix3::new(0.0, -u.z, u.y, u.z, 0.0, -u.x, -u.y, u.x, 0.0)
}

/// Group exponential `cos|u| + (u/|u|) sin|u|`.
pub fn group_exp(u: AlgebraVector) -> Quaternion {
    let theta = u.norm();
    if theta < 1e-300 {
        return Quaternion::ONE;
    }
    let s = theta.sin() / theta;
    Quaternion::new(theta.cos(), u.0.x * s, u.0.y * s, u.0.z * s)
}

/// `Ad_g v = g v g^{-1}`.
pub fn adjoint(g: Quaternion, v: AlgebraVector) -> Result<AlgebraVector> {
    if !g.is_unit() {
        return Err(Error::NotNormalized(g.norm()));
    }
    Ok((g * Quaternion::pure(v) * g.conj()).imaginary())
}

/// The bi-invariant inner product `Q`.
pub fn q_inner(u: AlgebraVector, v: AlgebraVector) -> f64 {
    u.0.dot(&v.0)
}
