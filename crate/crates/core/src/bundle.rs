//! Concrete principal `S^3`-bundles: the quaternionic Hopf fibration and two trivial products.
//!
//! All shipped actions are linear in ambient coordinates, so action vectors at `p`
//! are the columns of an `N x 3` matrix `K(p)` with `U*(p) = K(p) u`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{AlgebraVector, Quaternion};
use crate::manifold::{Matrix, SphereProduct, Vector};
use crate::metric::MetricField;

/// Smallest orbit Gram eigenvalue accepted as a free action.
pub const FREENESS_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BundleKind {
    Hopf,
    Trivial3x2,
    Trivial3x4,
}

impl BundleKind {
    pub const ALL: [BundleKind; 3] = [BundleKind::Hopf, BundleKind::Trivial3x2, BundleKind::Trivial3x4];

    pub fn name(self) -> &'static str {
        match self {
            BundleKind::Hopf => "hopf",
            BundleKind::Trivial3x2 => "trivial3x2",
            BundleKind::Trivial3x4 => "trivial3x4",
        }
    }
}

impl fmt::Display for BundleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BundleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hopf" => Ok(BundleKind::Hopf),
            "trivial3x2" => Ok(BundleKind::Trivial3x2),
            "trivial3x4" => Ok(BundleKind::Trivial3x4),
            _ => Err(Error::UnknownBundle(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    kind: BundleKind,
    total: SphereProduct,
    base: SphereProduct,
}

impl Bundle {
    /// The Hopf map `(p1, p2) -> (|p1|^2 - |p2|^2, 2 conj(p1) p2) / 2` is a Riemannian
    /// submersion from the unit `S^7` onto the 4-sphere of radius 1/2.
    pub fn new(kind: BundleKind) -> Self {
        let (total, base) = match kind {
            BundleKind::Hopf => (SphereProduct::unit_sphere(7), SphereProduct::new(&[(4, 0.5)])),
            BundleKind::Trivial3x2 => (SphereProduct::new(&[(3, 1.0), (2, 1.0)]), SphereProduct::unit_sphere(2)),
            BundleKind::Trivial3x4 => (SphereProduct::new(&[(3, 1.0), (4, 1.0)]), SphereProduct::unit_sphere(4)),
        };
        Self { kind, total, base }
    }

    pub fn hopf() -> Self {
        Self::new(BundleKind::Hopf)
    }

    pub fn trivial3x2() -> Self {
        Self::new(BundleKind::Trivial3x2)
    }

    pub fn trivial3x4() -> Self {
        Self::new(BundleKind::Trivial3x4)
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(Self::new(name.parse()?))
    }

    pub fn kind(&self) -> BundleKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn total(&self) -> &SphereProduct {
        &self.total
    }

    pub fn base(&self) -> &SphereProduct {
        &self.base
    }

    pub fn total_dim(&self) -> usize {
        self.total.dim()
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn is_trivial(&self) -> bool {
        self.kind != BundleKind::Hopf
    }

    /// Constant sectional curvature of the round base.
    pub fn base_curvature(&self) -> f64 {
        let r = self.base.factors()[0].radius;
        1.0 / (r * r)
    }

    /// A fixed point of the total space: `(1, 0)` for Hopf, `(1, e_0)` for products.
    pub fn basepoint(&self) -> Vector {
        let mut p = Vector::zeros(self.total.ambient_dim());
        for f in self.total.factors() {
            p[f.offset] = f.radius;
        }
        p
    }

    /// Ambient matrix of `p -> g p`.
    pub fn group_matrix(&self, g: Quaternion) -> Matrix {
        let n = self.total.ambient_dim();
        let mut m = Matrix::identity(n, n);
        let l = g.left_matrix();
        m.view_mut((0, 0), (4, 4)).copy_from(&l);
        if self.kind == BundleKind::Hopf {
            m.view_mut((4, 4), (4, 4)).copy_from(&l);
        }
        m
    }

    pub fn act(&self, g: Quaternion, p: &Vector) -> Result<Vector> {
        if !g.is_unit() {
            return Err(Error::NotNormalized(g.norm()));
        }
        self.total.check_point(p)?;
        Ok(self.group_matrix(g) * p)
    }

    /// `N x 3` matrix whose columns are the action vectors of `i, j, k` at `p`.
    /// Defined for any ambient `p` since the action is linear.
    pub fn action_matrix(&self, p: &Vector) -> Matrix {
        let n = self.total.ambient_dim();
        let mut k = Matrix::zeros(n, 3);
        let blocks: &[usize] = if self.kind == BundleKind::Hopf { &[0, 4] } else { &[0] };
        for a in 0..3 {
            let e = Quaternion::pure(AlgebraVector::basis(a));
            for &o in blocks {
                let q = e * Quaternion::from_slice(&p.as_slice()[o..o + 4]);
                for (i, c) in q.to_array().into_iter().enumerate() {
                    k[(o + i, a)] = c;
                }
            }
        }
        k
    }

    /// `d/dt exp(tu) p` at `t = 0`.
    pub fn action_vector(&self, p: &Vector, u: AlgebraVector) -> Result<Vector> {
        self.total.check_point(p)?;
        Ok(self.action_matrix(p) * Vector::from_column_slice(u.0.as_slice()))
    }

    pub fn projection(&self, p: &Vector) -> Vector {
        match self.kind {
            BundleKind::Hopf => {
                let p1 = Quaternion::from_slice(&p.as_slice()[0..4]);
                let p2 = Quaternion::from_slice(&p.as_slice()[4..8]);
                let z = p1.conj() * p2;
                Vector::from_vec(vec![0.5 * (p1.norm_squared() - p2.norm_squared()), z.w, z.x, z.y, z.z])
            }
            _ => p.rows(4, self.base.ambient_dim()).into_owned(),
        }
    }

    /// Differential of [`Bundle::projection`] as a `base_ambient x N` matrix.
    pub fn projection_differential(&self, p: &Vector) -> Matrix {
        let n = self.total.ambient_dim();
        let nb = self.base.ambient_dim();
        let mut d = Matrix::zeros(nb, n);
        match self.kind {
            BundleKind::Hopf => {
                let p1 = Quaternion::from_slice(&p.as_slice()[0..4]);
                let p2 = Quaternion::from_slice(&p.as_slice()[4..8]);
                for i in 0..4 {
                    d[(0, i)] = p.as_slice()[i];
                    d[(0, 4 + i)] = -p.as_slice()[4 + i];
                }
                // X1 -> conj(X1) p2 and X2 -> conj(p1) X2
                let conj = nalgebra::Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, -1.0, -1.0, -1.0));
                d.view_mut((1, 0), (4, 4)).copy_from(&(p2.right_matrix() * conj));
                d.view_mut((1, 4), (4, 4)).copy_from(&p1.conj().left_matrix());
            }
            _ => {
                for i in 0..nb {
                    d[(i, 4 + i)] = 1.0;
                }
            }
        }
        d
    }

    pub fn vertical_projector(&self, metric: &dyn MetricField, p: &Vector) -> Result<Matrix> {
        Ok(self.splitting(metric, p)?.vertical_projector())
    }

    pub fn horizontal_projector(&self, metric: &dyn MetricField, p: &Vector) -> Result<Matrix> {
        Ok(self.splitting(metric, p)?.horizontal_projector())
    }

    /// Horizontal vector at `p` projecting to `base_vector` at `base_point`.
    pub fn horizontal_lift(
        &self,
        metric: &dyn MetricField,
        base_point: &Vector,
        base_vector: &Vector,
        p: &Vector,
    ) -> Result<Vector> {
        let nb = self.base.ambient_dim();
        if base_vector.len() != nb {
            return Err(Error::DimensionMismatch { expected: nb, got: base_vector.len() });
        }
        if base_point.len() != nb {
            return Err(Error::DimensionMismatch { expected: nb, got: base_point.len() });
        }
        let b = self.projection(p);
        let off = (&b - base_point).norm();
        if off > 1e-8 {
            return Err(Error::InvalidParameter(format!("p does not lie over the base point (distance {off:.3e})")));
        }
        Ok(self.splitting(metric, p)?.lift(self, base_vector))
    }

    /// Orthogonal splitting of `T_p` into vertical and horizontal parts for `metric`.
    pub fn splitting(&self, metric: &dyn MetricField, p: &Vector) -> Result<Splitting> {
        Splitting::new(self, &metric.matrix(p), p)
    }
}

/// Vertical/horizontal decomposition at a point for a fixed metric matrix.
#[derive(Debug, Clone)]
pub struct Splitting {
    point: Vector,
    metric: Matrix,
    action: Matrix,
    orbit: Matrix3<f64>,
    orbit_inv: Matrix3<f64>,
    horizontal: Matrix,
    vertical: Matrix,
}

impl Splitting {
    pub fn new(bundle: &Bundle, metric: &Matrix, p: &Vector) -> Result<Self> {
        let total = bundle.total();
        let e = total.tangent_basis(p);
        let k = bundle.action_matrix(p);
        let mk = metric * &k;
        let kmk = k.transpose() * &mk;
        let orbit = Matrix3::from_fn(|i, j| 0.5 * (kmk[(i, j)] + kmk[(j, i)]));
        let eig = orbit.symmetric_eigenvalues();
        let lo = eig.min();
        if lo <= FREENESS_TOLERANCE {
            return Err(Error::ActionNotFree(lo));
        }
        let orbit_inv = orbit.try_inverse().ok_or(Error::ActionNotFree(lo))?;

        // Horizontal chart directions: null space of (M K)^T E.
        let n = total.dim();
        let b = e.transpose() * &mk;
        let bbt = &b * b.transpose();
        let se = bbt.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
        let hdim = n - 3;
        let mut w = Matrix::zeros(n, hdim);
        for (c, &i) in order.iter().take(hdim).enumerate() {
            w.set_column(c, &se.eigenvectors.column(i));
        }
        let h0 = &e * w;
        let horizontal = orthonormalize(metric, &h0)?;
        let vertical = orthonormalize(metric, &k)?;
        Ok(Self { point: p.clone(), metric: metric.clone(), action: k, orbit, orbit_inv, horizontal, vertical })
    }

    pub fn point(&self) -> &Vector {
        &self.point
    }

    pub fn metric(&self) -> &Matrix {
        &self.metric
    }

    /// Columns are `i*, j*, k*`.
    pub fn action(&self) -> &Matrix {
        &self.action
    }

    /// Orbit tensor `P` with `g(U*, V*) = Q(PU, V)`.
    pub fn orbit_tensor(&self) -> &Matrix3<f64> {
        &self.orbit
    }

    pub fn orbit_inverse(&self) -> &Matrix3<f64> {
        &self.orbit_inv
    }

    /// Metric-orthonormal basis of the horizontal space (columns).
    pub fn horizontal_basis(&self) -> &Matrix {
        &self.horizontal
    }

    /// Metric-orthonormal basis of the vertical space (columns).
    pub fn vertical_basis(&self) -> &Matrix {
        &self.vertical
    }

    pub fn inner(&self, x: &Vector, y: &Vector) -> f64 {
        (x.transpose() * &self.metric * y)[0]
    }

    pub fn norm(&self, x: &Vector) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    pub fn action_vector(&self, u: &Vector3<f64>) -> Vector {
        &self.action * Vector::from_column_slice(u.as_slice())
    }

    /// Algebra element `u` with `u*` equal to the vertical part of `v`.
    pub fn algebra_coords(&self, v: &Vector) -> Vector3<f64> {
        let r = self.action.transpose() * (&self.metric * v);
        self.orbit_inv * Vector3::new(r[0], r[1], r[2])
    }

    pub fn vertical(&self, v: &Vector) -> Vector {
        self.action_vector(&self.algebra_coords(v))
    }

    pub fn horizontal(&self, v: &Vector) -> Vector {
        v - self.vertical(v)
    }

    pub fn vertical_projector(&self) -> Matrix {
        let oi = Matrix::from_column_slice(3, 3, self.orbit_inv.as_slice());
        &self.action * oi * self.action.transpose() * &self.metric
    }

    /// Complement of the vertical projector on the tangent space at the point.
    pub fn horizontal_projector(&self) -> Matrix {
        &self.horizontal * self.horizontal.transpose() * &self.metric
    }

    /// Horizontal lift of a base vector given in ambient base coordinates.
    pub fn lift(&self, bundle: &Bundle, base_vector: &Vector) -> Vector {
        let d = bundle.projection_differential(&self.point) * &self.horizontal;
        let rhs = d.transpose() * base_vector;
        let gram = d.transpose() * &d;
        let c = gram.cholesky().map(|ch| ch.solve(&rhs)).unwrap_or_else(|| rhs.clone());
        &self.horizontal * c
    }
}

/// Gram-Schmidt of the columns of `v` in the inner product `m`.
pub fn orthonormalize(m: &Matrix, v: &Matrix) -> Result<Matrix> {
    let mut out = v.clone();
    for c in 0..v.ncols() {
        let mut x = v.column(c).into_owned();
        for _ in 0..2 {
            for d in 0..c {
                let e = out.column(d).into_owned();
                let coef = (e.transpose() * m * &x)[0];
                x -= e * coef;
            }
        }
        let n2 = (x.transpose() * m * &x)[0];
        if n2 <= 1e-24 {
            return Err(Error::SingularMetric(n2));
        }
        out.set_column(c, &(x / n2.sqrt()));
    }
    Ok(out)
}
