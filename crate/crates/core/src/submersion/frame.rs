//! O'Neill tensors at a point, computed from one finite-difference stencil.
//!
//! `A` comes from the connection forms `θ_a = g(·, e_a*)`: for horizontal `X, Y`,
//! `g(A_X Y, e_a*) = -dθ_a(X, Y) / 2`. `S` comes from the horizontal part `σ` of
//! the symmetrized derivative of action fields: `g(S_X U*, W*) = g(X, σ(U*, W*))`.

use nalgebra::Vector3;

use crate::bundle::{Bundle, Splitting};
use crate::error::Result;
use crate::manifold::{Matrix, Vector};
use crate::metric::MetricField;
use crate::riemann::{ChartSample, EngineConfig, LocalGeometry};

#[derive(Debug, Clone)]
pub struct SubmersionFrame {
    pub geo: LocalGeometry,
    pub split: Splitting,
    /// `dθ_a` in chart coordinates, one antisymmetric matrix per algebra basis element.
    dtheta: [Matrix; 3],
    /// `σ(e_a*, e_b*)`, ambient and horizontal.
    sigma: [[Vector; 3]; 3],
}

fn theta(bundle: &Bundle, s: &ChartSample) -> Matrix {
    s.jacobian.transpose() * &s.metric * bundle.action_matrix(&s.q)
}

fn action_coords(bundle: &Bundle, s: &ChartSample) -> Matrix {
    let j = &s.jacobian;
    let jtj = j.transpose() * j;
    let rhs = j.transpose() * bundle.action_matrix(&s.q);
    jtj.cholesky().expect("chart differential has full rank").solve(&rhs)
}

impl SubmersionFrame {
    pub fn new(bundle: &Bundle, metric: &dyn MetricField, q: &Vector, cfg: &EngineConfig) -> Result<Self> {
        Self::from_geometry(bundle, LocalGeometry::new(metric, q, cfg)?)
    }

    pub fn from_geometry(bundle: &Bundle, geo: LocalGeometry) -> Result<Self> {
        let split = Splitting::new(bundle, geo.metric_matrix(), geo.point())?;
        let n = geo.chart.dim();

        let dth = geo.stencil.derivative(|s| theta(bundle, s));
        let dtheta = std::array::from_fn(|a| {
            Matrix::from_fn(n, n, |i, j| dth[i][(j, a)] - dth[j][(i, a)])
        });

        let kc = action_coords(bundle, &geo.stencil.center);
        let dk = geo.stencil.derivative(|s| action_coords(bundle, s));
        let nabla = |a: usize, b: usize| -> Vector {
            let ua = kc.column(a).into_owned();
            let ub = kc.column(b).into_owned();
            let mut d = geo.gamma.contract(&ua, &ub);
            for i in 0..n {
                d += dk[i].column(b) * ua[i];
            }
            geo.ambient(&d)
        };
        let mut raw: [[Vector; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| Vector::zeros(0)));
        for a in 0..3 {
            for b in 0..3 {
                raw[a][b] = nabla(a, b);
            }
        }
        let sigma = std::array::from_fn(|a| std::array::from_fn(|b| split.horizontal(&((&raw[a][b] + &raw[b][a]) * 0.5))));
        Ok(Self { geo, split, dtheta, sigma })
    }

    pub fn point(&self) -> &Vector {
        self.geo.point()
    }

    pub fn inner(&self, x: &Vector, y: &Vector) -> f64 {
        self.split.inner(x, y)
    }

    pub fn norm(&self, x: &Vector) -> f64 {
        self.split.norm(x)
    }

    pub fn horizontal(&self, v: &Vector) -> Vector {
        self.split.horizontal(v)
    }

    pub fn vertical(&self, v: &Vector) -> Vector {
        self.split.vertical(v)
    }

    /// `dθ_u(X, Y)` for `u` in the algebra.
    fn dtheta_u(&self, u: &Vector3<f64>, x: &Vector, y: &Vector) -> f64 {
        let (xc, yc) = (self.geo.coords(x), self.geo.coords(y));
        (0..3).map(|a| u[a] * (xc.transpose() * &self.dtheta[a] * &yc)[0]).sum()
    }

    /// `(dθ_a(X, Y))_a` for arbitrary tangent `X, Y`.
    pub fn dtheta(&self, x: &Vector, y: &Vector) -> Vector3<f64> {
        let (xc, yc) = (self.geo.coords(x), self.geo.coords(y));
        Vector3::from_fn(|a, _| (xc.transpose() * &self.dtheta[a] * &yc)[0])
    }

    /// Algebra element `w` with `A_X Y = w*`, for horizontal `X, Y`.
    pub fn a_algebra(&self, x: &Vector, y: &Vector) -> Vector3<f64> {
        let r = Vector3::from_fn(|a, _| -0.5 * self.dtheta_u(&Vector3::ith(a, 1.0), x, y));
        self.split.orbit_inverse() * r
    }

    /// `A_X Y` for horizontal `X, Y`.
    pub fn a(&self, x: &Vector, y: &Vector) -> Vector {
        self.split.action_vector(&self.a_algebra(x, y))
    }

    /// `A*_X ξ`, defined by `g(A*_X ξ, Y) = g(A_X Y, ξ)` for horizontal `Y`.
    pub fn a_star(&self, x: &Vector, xi: &Vector) -> Vector {
        let u = self.split.algebra_coords(xi);
        let h = self.split.horizontal_basis();
        let mut out = Vector::zeros(x.len());
        for j in 0..h.ncols() {
            let hj = h.column(j).into_owned();
            out += &hj * (-0.5 * self.dtheta_u(&u, x, &hj));
        }
        out
    }

    /// `σ(U*, W*)`: horizontal part of the symmetrized covariant derivative of action fields.
    pub fn sigma(&self, u: &Vector3<f64>, w: &Vector3<f64>) -> Vector {
        let mut out = Vector::zeros(self.point().len());
        for a in 0..3 {
            for b in 0..3 {
                let c = u[a] * w[b];
                if c != 0.0 {
                    out += &self.sigma[a][b] * c;
                }
            }
        }
        out
    }

    /// Second fundamental form of vertical vectors, `σ(V1, V2)`.
    pub fn second_fundamental_form(&self, v1: &Vector, v2: &Vector) -> Vector {
        self.sigma(&self.split.algebra_coords(v1), &self.split.algebra_coords(v2))
    }

    /// `S_X ξ`, vertical, with `g(S_X ξ, η) = g(X, σ(ξ, η))`.
    pub fn s(&self, x: &Vector, xi: &Vector) -> Vector {
        let u = self.split.algebra_coords(xi);
        let r = Vector3::from_fn(|b, _| self.inner(x, &self.sigma(&u, &Vector3::ith(b, 1.0))));
        self.split.action_vector(&(self.split.orbit_inverse() * r))
    }

    /// Frobenius norm of `S` over orthonormal horizontal and vertical bases.
    pub fn s_norm(&self) -> f64 {
        let h = self.split.horizontal_basis();
        let v = self.split.vertical_basis();
        let mut total = 0.0;
        for i in 0..h.ncols() {
            for a in 0..v.ncols() {
                let s = self.s(&h.column(i).into_owned(), &v.column(a).into_owned());
                total += self.inner(&s, &s);
            }
        }
        total.sqrt()
    }

    /// O'Neill's `A_E F = A_{E^h} F^h - A*_{E^h} F^v` for arbitrary tangent `E, F`.
    pub fn a_general(&self, e: &Vector, f: &Vector) -> Vector {
        let eh = self.horizontal(e);
        let fh = self.horizontal(f);
        let fv = self.vertical(f);
        self.a(&eh, &fh) - self.a_star(&eh, &fv)
    }

    /// Matrix of `ω_V(X, Y) = g(A_X Y, V)` on the orthonormal horizontal basis.
    pub fn omega(&self, v: &Vector) -> Matrix {
        let u = self.split.algebra_coords(v);
        let h = self.split.horizontal_basis();
        let k = h.ncols();
        Matrix::from_fn(k, k, |i, j| -0.5 * self.dtheta_u(&u, &h.column(i).into_owned(), &h.column(j).into_owned()))
    }
}
