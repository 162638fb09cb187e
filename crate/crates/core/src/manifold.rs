//! Products of round spheres embedded in Euclidean space, and orthographic charts.
//!
//! Tangent vectors are stored ambiently. A [`Chart`] centered at `p` maps
//! `x -> r (p + E x) / |p + E x|` per sphere factor, where `E` is an orthonormal
//! basis of the tangent space at `p`; its differential at the center is `E`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Embedding tolerance for points.
pub const EMBEDDING_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereFactor {
    /// First ambient coordinate of this factor.
    pub offset: usize,
    /// Number of ambient coordinates (sphere dimension + 1).
    pub ambient_dim: usize,
    pub radius: f64,
}

impl SphereFactor {
    pub fn dim(&self) -> usize {
        self.ambient_dim - 1
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.ambient_dim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereProduct {
    factors: Vec<SphereFactor>,
    ambient_dim: usize,
    dim: usize,
}

impl SphereProduct {
    /// `specs` lists `(sphere dimension, radius)` per factor.
    pub fn new(specs: &[(usize, f64)]) -> Self {
        let mut offset = 0;
        let mut factors = Vec::with_capacity(specs.len());
        for &(d, radius) in specs {
            factors.push(SphereFactor { offset, ambient_dim: d + 1, radius });
            offset += d + 1;
        }
        let dim = factors.iter().map(SphereFactor::dim).sum();
        Self { factors, ambient_dim: offset, dim }
    }

    pub fn unit_sphere(d: usize) -> Self {
        Self::new(&[(d, 1.0)])
    }

    pub fn factors(&self) -> &[SphereFactor] {
        &self.factors
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest per-factor violation of `|p_f| = r_f`.
    pub fn constraint_residual(&self, p: &Vector) -> f64 {
        self.factors
            .iter()
            .map(|f| (p.rows(f.offset, f.ambient_dim).norm() - f.radius).abs())
            .fold(0.0, f64::max)
    }

    pub fn check_point(&self, p: &Vector) -> Result<()> {
        if p.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim, got: p.len() });
        }
        let r = self.constraint_residual(p);
        if r > EMBEDDING_TOLERANCE {
            return Err(Error::OffManifold(r));
        }
        Ok(())
    }

    /// Radial normalization per factor.
    pub fn retract(&self, p: &Vector) -> Vector {
        let mut q = p.clone();
        for f in &self.factors {
            let n = p.rows(f.offset, f.ambient_dim).norm();
            q.rows_mut(f.offset, f.ambient_dim).scale_mut(f.radius / n);
        }
        q
    }

    /// Euclidean projection of an ambient vector onto `T_p`.
    pub fn project_tangent(&self, p: &Vector, v: &Vector) -> Vector {
        let mut w = v.clone();
        for f in &self.factors {
            let pf = p.rows(f.offset, f.ambient_dim);
            let nsq = pf.norm_squared();
            let c = pf.dot(&v.rows(f.offset, f.ambient_dim)) / nsq;
            let mut wf = w.rows_mut(f.offset, f.ambient_dim);
            wf -= pf * c;
        }
        w
    }

    /// Size of the normal component of `v` at `p`.
    pub fn normal_component(&self, p: &Vector, v: &Vector) -> f64 {
        (v - self.project_tangent(p, v)).norm()
    }

    pub fn check_tangent(&self, p: &Vector, v: &Vector, tol: f64) -> Result<()> {
        if v.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim, got: v.len() });
        }
        let n = self.normal_component(p, v);
        if n > tol * v.norm().max(1.0) {
            return Err(Error::NotTangent(n));
        }
        Ok(())
    }

    /// Orthonormal basis of `T_p` as columns of an `ambient_dim x dim` matrix.
    pub fn tangent_basis(&self, p: &Vector) -> Matrix {
        let mut e = Matrix::zeros(self.ambient_dim, self.dim);
        let mut col = 0;
        for f in &self.factors {
            let m = f.ambient_dim;
            let u = p.rows(f.offset, m) / p.rows(f.offset, m).norm();
            // Householder reflector sending e_j to sign * u; its other columns span u^perp.
            let (j, _) = u.iter().enumerate().fold((0, 0.0), |acc, (i, &x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
            let s = if u[j] >= 0.0 { 1.0 } else { -1.0 };
            let mut w = u.clone_owned();
            w[j] -= s;
            let wn = w.norm_squared();
            for c in 0..m {
                if c == j {
                    continue;
                }
                let mut basis = DVector::zeros(m);
                basis[c] = 1.0;
                if wn > 0.0 {
                    let coef = 2.0 * w[c] / wn;
                    basis -= &w * coef;
                }
                e.view_mut((f.offset, col), (m, 1)).copy_from(&basis);
                col += 1;
            }
        }
        e
    }

    /// Uniform random point (normalized Gaussians per factor).
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let g = Vector::from_fn(self.ambient_dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        self.retract(&g)
    }

    /// Random tangent vector with i.i.d. Gaussian coordinates in an orthonormal tangent frame.
    pub fn random_tangent<R: Rng + ?Sized>(&self, rng: &mut R, p: &Vector) -> Vector {
        let g = Vector::from_fn(self.ambient_dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        self.project_tangent(p, &g)
    }

    /// The ambient correction `-(p_f / r_f^2) <w_f, z_f>` per factor, i.e. the normal part of
    /// `d/dt` of a tangent field along a curve with velocity `w`.
    pub fn normal_correction(&self, p: &Vector, w: &Vector, z: &Vector) -> Vector {
        let mut out = Vector::zeros(self.ambient_dim);
        for f in &self.factors {
            let r = f.range();
            let c = w.rows(f.offset, f.ambient_dim).dot(&z.rows(f.offset, f.ambient_dim)) / (f.radius * f.radius);
            for i in r {
                out[i] = -p[i] * c;
            }
        }
        out
    }
}

/// Orthographic chart centered at a point.
#[derive(Debug, Clone)]
pub struct Chart {
    center: Vector,
    basis: Matrix,
    manifold: SphereProduct,
}

impl Chart {
    pub fn new(manifold: &SphereProduct, center: &Vector) -> Self {
        Self { center: center.clone(), basis: manifold.tangent_basis(center), manifold: manifold.clone() }
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    /// Differential at the center (orthonormal columns).
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn manifold(&self) -> &SphereProduct {
        &self.manifold
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim()
    }

    pub fn point(&self, x: &Vector) -> Vector {
        let y = &self.center + &self.basis * x;
        self.manifold.retract(&y)
    }

    /// `d(phi)_x` as an `ambient_dim x dim` matrix.
    pub fn jacobian(&self, x: &Vector) -> Matrix {
        let y = &self.center + &self.basis * x;
        let mut j = Matrix::zeros(self.manifold.ambient_dim(), self.dim());
        for f in self.manifold.factors() {
            let m = f.ambient_dim;
            let yf = y.rows(f.offset, m);
            let n = yf.norm();
            let yh = yf / n;
            let ef = self.basis.rows(f.offset, m);
            // r (I - yh yh^T) E_f / |y_f|
            let proj = &ef - &yh * (yh.transpose() * &ef);
            j.rows_mut(f.offset, m).copy_from(&(proj * (f.radius / n)));
        }
        j
    }

    /// Chart coordinates of a tangent vector at the center.
    pub fn coords(&self, v: &Vector) -> Vector {
        self.basis.transpose() * v
    }

    pub fn ambient(&self, c: &Vector) -> Vector {
        &self.basis * c
    }

    /// Chart coordinates of a point in the chart domain.
    pub fn inverse(&self, q: &Vector) -> Vector {
        let mut y = Vector::zeros(self.manifold.ambient_dim());
        for f in self.manifold.factors() {
            let pf = self.center.rows(f.offset, f.ambient_dim);
            let qf = q.rows(f.offset, f.ambient_dim);
            let alpha = f.radius * f.radius / pf.dot(&qf);
            y.rows_mut(f.offset, f.ambient_dim).copy_from(&(qf * alpha - pf));
        }
        self.basis.transpose() * y
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn tangent_basis_is_orthonormal_and_tangent() {
        let m = SphereProduct::new(&[(3, 1.0), (2, 0.5)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = m.random_point(&mut rng);
            assert!(m.constraint_residual(&p) < 1e-14);
            let e = m.tangent_basis(&p);
            assert!((e.transpose() * &e - Matrix::identity(5, 5)).norm() < 1e-13);
            for c in 0..5 {
                assert!(m.normal_component(&p, &e.column(c).into_owned()) < 1e-14);
            }
        }
    }

    #[test]
    fn chart_jacobian_matches_finite_differences() {
        let m = SphereProduct::new(&[(3, 1.0), (4, 0.5)]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = m.random_point(&mut rng);
        let chart = Chart::new(&m, &p);
        let x = Vector::from_fn(7, |i, _| 0.01 * (i as f64 - 3.0));
        let j = chart.jacobian(&x);
        let h = 1e-6;
        for i in 0..7 {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (chart.point(&xp) - chart.point(&xm)) / (2.0 * h);
            assert!((fd - j.column(i)).norm() < 1e-8);
        }
        assert!((chart.jacobian(&Vector::zeros(7)) - chart.basis()).norm() < 1e-15);
        let q = chart.point(&x);
        assert!((chart.inverse(&q) - &x).norm() < 1e-13);
    }

    #[test]
    fn normal_correction_is_derivative_of_jacobian() {
        let m = SphereProduct::new(&[(2, 2.0), (3, 1.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = m.random_point(&mut rng);
        let chart = Chart::new(&m, &p);
        let v = Vector::from_vec(vec![0.3, -0.2, 0.5, 0.1, 0.7]);
        let c = Vector::from_vec(vec![-0.4, 0.9, 0.2, 0.3, -0.1]);
        let h = 1e-6;
        let dj = (chart.jacobian(&(&v * h)) - chart.jacobian(&(&v * -h))) / (2.0 * h);
        let expected = m.normal_correction(&p, &chart.ambient(&v), &chart.ambient(&c));
        assert!((dj * &c - expected).norm() < 1e-8);
    }
}
