//! Finite-difference Christoffel symbols and curvature in charts centered at the
//! evaluation point.
//!
//! Curvature convention: `R(X,Y)Z = ∇_X∇_Y Z - ∇_Y∇_X Z - ∇_[X,Y] Z`,
//! `R(X,Y,Z,W) = g(R(X,Y)Z, W)`, so round spheres have `R(X,Y,Y,X) > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Chart, Matrix, Vector};
use crate::metric::MetricField;

/// Planes with Gram determinant below this are refused by reduced sectional curvature.
pub const DEGENERATE_PLANE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub fd_step_first: f64,
    pub fd_step_second: f64,
    pub rk4_steps_per_unit: usize,
    pub richardson: bool,
    pub proj_stabilize: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { fd_step_first: 1e-4, fd_step_second: 1e-3, rk4_steps_per_unit: 2000, richardson: false, proj_stabilize: true }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fd_step_first > 0.0 && self.fd_step_second > 0.0) {
            return Err(Error::Config("finite-difference steps must be positive".into()));
        }
        if self.rk4_steps_per_unit < 2 {
            return Err(Error::TooFewSteps(self.rk4_steps_per_unit));
        }
        Ok(())
    }

    /// Number of RK4 steps for a time span, at least 2.
    pub fn steps_for(&self, span: f64) -> usize {
        ((span.abs() * self.rk4_steps_per_unit as f64).ceil() as usize).max(2)
    }
}

/// `Γ^k_ij` in chart coordinates, symmetric in `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.data[(k * self.n + i) * self.n + j] = v;
    }

    /// `Γ(v, w)^k = Γ^k_ij v^i w^j`.
    pub fn contract(&self, v: &Vector, w: &Vector) -> Vector {
        let n = self.n;
        Vector::from_fn(n, |k, _| {
            let block = &self.data[k * n * n..(k + 1) * n * n];
            let mut s = 0.0;
            for i in 0..n {
                let row = &block[i * n..(i + 1) * n];
                let mut t = 0.0;
                for j in 0..n {
                    t += row[j] * w[j];
                }
                s += v[i] * t;
            }
            s
        })
    }

    fn combine(&self, other: &Christoffel, a: f64, b: f64) -> Christoffel {
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        Christoffel { n: self.n, data }
    }

    /// Largest `|Γ^k_ij - Γ^k_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for k in 0..self.n {
            for i in 0..self.n {
                for j in 0..self.n {
                    m = m.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Point, chart differential and ambient metric at one chart location.
#[derive(Debug, Clone)]
pub struct ChartSample {
    pub q: Vector,
    pub jacobian: Matrix,
    pub metric: Matrix,
}

impl ChartSample {
    pub fn new(chart: &Chart, metric: &dyn MetricField, x: &Vector) -> Self {
        let q = chart.point(x);
        let jacobian = chart.jacobian(x);
        let m = metric.matrix(&q);
        Self { q, jacobian, metric: m }
    }

    /// Pulled-back metric `J^T M J`.
    pub fn gram(&self) -> Matrix {
        let g = self.jacobian.transpose() * &self.metric * &self.jacobian;
        (&g + g.transpose()) * 0.5
    }
}

/// Central-difference stencil `x = ±h e_i` around a chart point.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub h: f64,
    pub center: ChartSample,
    pub plus: Vec<ChartSample>,
    pub minus: Vec<ChartSample>,
}

impl Stencil {
    pub fn new(chart: &Chart, metric: &dyn MetricField, x: &Vector, h: f64) -> Self {
        let n = chart.dim();
        let center = ChartSample::new(chart, metric, x);
        let mut plus = Vec::with_capacity(n);
        let mut minus = Vec::with_capacity(n);
        for i in 0..n {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            plus.push(ChartSample::new(chart, metric, &xp));
            minus.push(ChartSample::new(chart, metric, &xm));
        }
        Self { h, center, plus, minus }
    }

    /// Central difference of a quantity evaluated on every stencil sample.
    pub fn derivative<F>(&self, f: F) -> Vec<Matrix>
    where
        F: Fn(&ChartSample) -> Matrix,
    {
        self.plus.iter().zip(&self.minus).map(|(p, m)| (f(p) - f(m)) / (2.0 * self.h)).collect()
    }
}

fn inverse_gram(g: &Matrix) -> Result<Matrix> {
    let eig = g.symmetric_eigenvalues();
    let lo = eig.min();
    if !(lo > 1e-14 * eig.max().max(1.0)) {
        return Err(Error::SingularMetric(lo));
    }
    g.clone().try_inverse().ok_or(Error::SingularMetric(lo))
}

fn christoffel_from(g_inv: &Matrix, dg: &[Matrix]) -> Christoffel {
    let n = g_inv.nrows();
    let mut gamma = Christoffel::zeros(n);
    // first kind: [ij, l] = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    let mut first = vec![0.0; n * n * n];
    for i in 0..n {
        for j in i..n {
            for l in 0..n {
                let v = 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                first[(i * n + j) * n + l] = v;
                first[(j * n + i) * n + l] = v;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += g_inv[(k, l)] * first[(i * n + j) * n + l];
                }
                gamma.set(k, i, j, s);
                gamma.set(k, j, i, s);
            }
        }
    }
    gamma
}

/// Christoffel symbols and metric at a chart point, from one stencil of metric samples.
fn christoffel_at(chart: &Chart, metric: &dyn MetricField, x: &Vector, h: f64) -> Result<(Stencil, Matrix, Matrix, Christoffel)> {
    let stencil = Stencil::new(chart, metric, x, h);
    let g = stencil.center.gram();
    let g_inv = inverse_gram(&g)?;
    let dg = stencil.derivative(ChartSample::gram);
    let gamma = christoffel_from(&g_inv, &dg);
    Ok((stencil, g, g_inv, gamma))
}

/// Metric, Christoffel symbols and stencil samples in a chart centered at a point.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub chart: Chart,
    pub g: Matrix,
    pub g_inv: Matrix,
    pub gamma: Christoffel,
    pub stencil: Stencil,
}

impl LocalGeometry {
    pub fn new(metric: &dyn MetricField, q: &Vector, cfg: &EngineConfig) -> Result<Self> {
        let manifold = metric.manifold();
        manifold.check_point(q)?;
        let chart = Chart::new(manifold, q);
        let x0 = Vector::zeros(chart.dim());
        let (stencil, g, g_inv, gamma) = christoffel_at(&chart, metric, &x0, cfg.fd_step_first)?;
        Ok(Self { chart, g, g_inv, gamma, stencil })
    }

    pub fn point(&self) -> &Vector {
        self.chart.center()
    }

    pub fn coords(&self, v: &Vector) -> Vector {
        self.chart.coords(v)
    }

    pub fn ambient(&self, c: &Vector) -> Vector {
        self.chart.ambient(c)
    }

    /// Ambient metric matrix at the center.
    pub fn metric_matrix(&self) -> &Matrix {
        &self.stencil.center.metric
    }

    pub fn inner(&self, x: &Vector, y: &Vector) -> f64 {
        (x.transpose() * self.metric_matrix() * y)[0]
    }

    pub fn norm(&self, x: &Vector) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    /// `Γ(v, w)` for ambient tangent vectors, returned ambiently.
    pub fn gamma_ambient(&self, v: &Vector, w: &Vector) -> Vector {
        self.ambient(&self.gamma.contract(&self.coords(v), &self.coords(w)))
    }
}

pub fn christoffel(metric: &dyn MetricField, p: &Vector, cfg: &EngineConfig) -> Result<Christoffel> {
    Ok(LocalGeometry::new(metric, p, cfg)?.gamma)
}

/// Riemann tensor `R^l_ijk` in the chart centered at a point.
#[derive(Debug, Clone)]
pub struct CurvatureTensor {
    chart: Chart,
    g: Matrix,
    n: usize,
    /// index `((l * n + i) * n + j) * n + k`
    data: Vec<f64>,
}

impl CurvatureTensor {
    pub fn new(metric: &dyn MetricField, p: &Vector, cfg: &EngineConfig) -> Result<Self> {
        let manifold = metric.manifold();
        manifold.check_point(p)?;
        let chart = Chart::new(manifold, p);
        let n = chart.dim();
        let x0 = Vector::zeros(n);
        let (_, g, _, gamma) = christoffel_at(&chart, metric, &x0, cfg.fd_step_first)?;
        let d = if cfg.richardson {
            let coarse = gamma_derivatives(&chart, metric, cfg.fd_step_first, cfg.fd_step_second)?;
            let fine = gamma_derivatives(&chart, metric, cfg.fd_step_first, 0.5 * cfg.fd_step_second)?;
            fine.iter().zip(&coarse).map(|(f, c)| f.combine(c, 4.0 / 3.0, -1.0 / 3.0)).collect()
        } else {
            gamma_derivatives(&chart, metric, cfg.fd_step_first, cfg.fd_step_second)?
        };
        let mut data = vec![0.0; n * n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = d[i].get(l, j, k) - d[j].get(l, i, k);
                        for m in 0..n {
                            v += gamma.get(l, i, m) * gamma.get(m, j, k) - gamma.get(l, j, m) * gamma.get(m, i, k);
                        }
                        data[((l * n + i) * n + j) * n + k] = v;
                    }
                }
            }
        }
        Ok(Self { chart, g, n, data })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn component(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        self.data[((l * self.n + i) * self.n + j) * self.n + k]
    }

    /// `R(X,Y)Z` for ambient tangent vectors.
    pub fn operator(&self, x: &Vector, y: &Vector, z: &Vector) -> Vector {
        let (xc, yc, zc) = (self.chart.coords(x), self.chart.coords(y), self.chart.coords(z));
        let n = self.n;
        let out = Vector::from_fn(n, |l, _| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let c = xc[i] * yc[j];
                    if c == 0.0 {
                        continue;
                    }
                    for k in 0..n {
                        s += c * zc[k] * self.component(l, i, j, k);
                    }
                }
            }
            s
        });
        self.chart.ambient(&out)
    }

    /// `R(X,Y,Z,W) = g(R(X,Y)Z, W)`.
    pub fn eval(&self, x: &Vector, y: &Vector, z: &Vector, w: &Vector) -> f64 {
        let r = self.chart.coords(&self.operator(x, y, z));
        let wc = self.chart.coords(w);
        (r.transpose() * &self.g * wc)[0]
    }

    pub fn inner(&self, x: &Vector, y: &Vector) -> f64 {
        (self.chart.coords(x).transpose() * &self.g * self.chart.coords(y))[0]
    }

    pub fn sectional(&self, x: &Vector, y: &Vector, reduced: bool) -> Result<f64> {
        let k = self.eval(x, y, y, x);
        if !reduced {
            return Ok(k);
        }
        let det = self.inner(x, x) * self.inner(y, y) - self.inner(x, y).powi(2);
        if det < DEGENERATE_PLANE {
            return Err(Error::DegeneratePlane(det));
        }
        Ok(k / det)
    }
}

/// `∂_i Γ` at the chart center by central differences with step `h2`.
fn gamma_derivatives(chart: &Chart, metric: &dyn MetricField, h1: f64, h2: f64) -> Result<Vec<Christoffel>> {
    let n = chart.dim();
    (0..n)
        .map(|i| {
            let mut xp = Vector::zeros(n);
            xp[i] = h2;
            let xm = -&xp;
            let (_, _, _, gp) = christoffel_at(chart, metric, &xp, h1)?;
            let (_, _, _, gm) = christoffel_at(chart, metric, &xm, h1)?;
            Ok(gp.combine(&gm, 0.5 / h2, -0.5 / h2))
        })
        .collect()
}

/// `R(X,Y)Z` at `p`.
pub fn riemann(metric: &dyn MetricField, p: &Vector, x: &Vector, y: &Vector, z: &Vector, cfg: &EngineConfig) -> Result<Vector> {
    Ok(CurvatureTensor::new(metric, p, cfg)?.operator(x, y, z))
}

pub fn sectional(metric: &dyn MetricField, p: &Vector, x: &Vector, y: &Vector, reduced: bool, cfg: &EngineConfig) -> Result<f64> {
    let tensor = CurvatureTensor::new(metric, p, cfg)?;
    tensor.sectional(x, y, reduced)
}

/// `R(J, w) w` by directional differences of `Γ` along `J` and `w` only.
pub fn jacobi_operator(metric: &dyn MetricField, geo: &LocalGeometry, j: &Vector, w: &Vector, cfg: &EngineConfig) -> Result<Vector> {
    let jc = geo.coords(j);
    let wc = geo.coords(w);
    let directional = |dir: &Vector, a: &Vector, b: &Vector| -> Result<Vector> {
        let norm = dir.norm();
        if norm == 0.0 {
            return Ok(Vector::zeros(a.len()));
        }
        let h = cfg.fd_step_second / norm;
        let (_, _, _, gp) = christoffel_at(&geo.chart, metric, &(dir * h), cfg.fd_step_first)?;
        let (_, _, _, gm) = christoffel_at(&geo.chart, metric, &(dir * -h), cfg.fd_step_first)?;
        Ok((gp.contract(a, b) - gm.contract(a, b)) / (2.0 * h))
    };
    let g = &geo.gamma;
    let r = directional(&jc, &wc, &wc)? - directional(&wc, &jc, &wc)? + g.contract(&jc, &g.contract(&wc, &wc))
        - g.contract(&wc, &g.contract(&jc, &wc));
    Ok(geo.ambient(&r))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::manifold::SphereProduct;
    use crate::metric::InducedMetric;

    fn cfg() -> EngineConfig {
        EngineConfig::default()
    }

    #[test]
    fn christoffel_vanishes_at_chart_center_of_round_sphere() {
        let m = InducedMetric::new(SphereProduct::unit_sphere(2));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = m.manifold().random_point(&mut rng);
        let gamma = christoffel(&m, &p, &cfg()).unwrap();
        assert!(gamma.max_abs() < 1e-9);
        assert!(gamma.asymmetry() < 1e-12);
    }

    #[test]
    fn christoffel_off_center_is_symmetric() {
        let m = InducedMetric::new(SphereProduct::new(&[(3, 1.0), (2, 0.7)]));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = m.manifold().random_point(&mut rng);
        let chart = Chart::new(m.manifold(), &p);
        let x = Vector::from_fn(5, |i, _| 0.05 * (i as f64 + 1.0));
        let (_, _, _, gamma) = christoffel_at(&chart, &m, &x, 1e-4).unwrap();
        assert!(gamma.max_abs() > 1e-3);
        assert!(gamma.asymmetry() < 1e-12);
    }

    #[test]
    fn round_sphere_curvature_is_constant() {
        let m = InducedMetric::new(SphereProduct::unit_sphere(7));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let p = m.manifold().random_point(&mut rng);
            let t = CurvatureTensor::new(&m, &p, &cfg()).unwrap();
            let x = m.manifold().random_tangent(&mut rng, &p);
            let y = m.manifold().random_tangent(&mut rng, &p);
            let expected = x.norm_squared() * y.norm_squared() - x.dot(&y).powi(2);
            assert!((t.eval(&x, &y, &y, &x) - expected).abs() < 1e-4 * expected.max(1.0));
            let k = t.sectional(&x, &y, true).unwrap();
            assert!((k - 1.0).abs() < 1e-5);
            let k2 = t.sectional(&x, &(&y * 2.0), false).unwrap();
            assert!((k2 - 4.0 * t.sectional(&x, &y, false).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn radius_scales_curvature() {
        let m = InducedMetric::new(SphereProduct::new(&[(4, 0.5)]));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = m.manifold().random_point(&mut rng);
        let x = m.manifold().random_tangent(&mut rng, &p);
        let y = m.manifold().random_tangent(&mut rng, &p);
        let k = sectional(&m, &p, &x, &y, true, &cfg()).unwrap();
        assert!((k - 4.0).abs() < 4e-5);
    }

    #[test]
    fn product_factor_planes_are_flat_and_symmetries_hold() {
        let m = InducedMetric::new(SphereProduct::new(&[(3, 1.0), (2, 1.0)]));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = m.manifold().random_point(&mut rng);
        let t = CurvatureTensor::new(&m, &p, &cfg()).unwrap();
        let mut x = m.manifold().random_tangent(&mut rng, &p);
        x.rows_mut(4, 3).fill(0.0);
        let mut y = m.manifold().random_tangent(&mut rng, &p);
        y.rows_mut(0, 4).fill(0.0);
        assert!(t.eval(&x, &y, &y, &x).abs() < 1e-6);
        let v: Vec<Vector> = (0..4).map(|_| m.manifold().random_tangent(&mut rng, &p)).collect();
        let r = |a: usize, b: usize, c: usize, d: usize| t.eval(&v[a], &v[b], &v[c], &v[d]);
        assert!((r(0, 1, 2, 3) + r(1, 0, 2, 3)).abs() < 1e-6);
        assert!((r(0, 1, 2, 3) + r(0, 1, 3, 2)).abs() < 1e-6);
        assert!((r(0, 1, 2, 3) - r(2, 3, 0, 1)).abs() < 1e-6);
        assert!((r(0, 1, 2, 3) + r(1, 2, 0, 3) + r(2, 0, 1, 3)).abs() < 1e-6);
    }

    #[test]
    fn parallel_vectors_are_a_degenerate_plane() {
        let m = InducedMetric::new(SphereProduct::unit_sphere(4));
        let p = Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let x = Vector::from_vec(vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        let y = &x * 3.0;
        assert!(matches!(sectional(&m, &p, &x, &y, true, &cfg()), Err(Error::DegeneratePlane(_))));
        assert!(sectional(&m, &p, &x, &y, false, &cfg()).unwrap().abs() < 1e-8);
    }

    #[test]
    fn richardson_sharpens_round_sphere() {
        let m = InducedMetric::new(SphereProduct::unit_sphere(4));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = m.manifold().random_point(&mut rng);
        let x = m.manifold().random_tangent(&mut rng, &p);
        let y = m.manifold().random_tangent(&mut rng, &p);
        let plain = (sectional(&m, &p, &x, &y, true, &cfg()).unwrap() - 1.0).abs();
        let c = EngineConfig { richardson: true, ..cfg() };
        let sharp = (sectional(&m, &p, &x, &y, true, &c).unwrap() - 1.0).abs();
        assert!(plain < 1e-5);
        assert!(sharp < 1e-6);
        assert!(sharp < plain);
    }

    #[test]
    fn jacobi_operator_matches_full_tensor() {
        let m = InducedMetric::new(SphereProduct::new(&[(3, 1.0), (2, 0.5)]));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = m.manifold().random_point(&mut rng);
        let geo = LocalGeometry::new(&m, &p, &cfg()).unwrap();
        let t = CurvatureTensor::new(&m, &p, &cfg()).unwrap();
        let j = m.manifold().random_tangent(&mut rng, &p);
        let w = m.manifold().random_tangent(&mut rng, &p);
        let a = jacobi_operator(&m, &geo, &j, &w, &cfg()).unwrap();
        let b = t.operator(&j, &w, &w);
        assert!((&a - &b).norm() < 1e-5 * b.norm());
    }
}
