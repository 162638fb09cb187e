//! O'Neill tensors of the bundle projection and the predicates built on them:
//! fatness, the kernel of `A_X`, `∇A`, and the CDR margin.

pub mod frame;
pub mod identities;
pub mod warping;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use frame::SubmersionFrame;
pub use identities::{
    check_basic_astar, check_corollary_flat, check_good_triple, check_k_identity, check_theorem_tapp, dual_inv_check,
    good_triple_mismatch, wnn_residual, wnn_terms, CorollaryResiduals, TappResiduals, WnnTerms,
};
pub use warping::{warped_sectional, PlaneKind, WarpFormula};

use crate::bundle::{Bundle, Splitting};
use crate::error::{Error, Result};
use crate::lie::AlgebraVector;
use crate::manifold::{Chart, Matrix, Vector};
use crate::metric::{InducedMetric, MetricField};
use crate::ode::{integrate, FieldSystem};
use crate::riemann::{CurvatureTensor, EngineConfig, LocalGeometry};

/// `ε_fat`: smallest `|det ω_V|` counted as nondegenerate.
pub const FAT_EPSILON: f64 = 1e-8;
/// Singular values below this fraction of the largest one span `ker A_X`.
pub const KERNEL_THRESHOLD: f64 = 1e-6;
/// Identity checks that need totally geodesic fibers are skipped above this `|S|`.
pub const TOTALLY_GEODESIC_TOLERANCE: f64 = 1e-4;
/// Step of the two-sided geodesic used for covariant derivatives along curves.
pub const COVARIANT_STEP: f64 = 5e-3;

/// Horizontal `X, Y` and vertical `V`, mutually orthonormal at `p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertizontalFrame {
    pub p: Vector,
    pub x: Vector,
    pub y: Vector,
    pub v: Vector,
    pub u: Option<AlgebraVector>,
}

impl VertizontalFrame {
    pub fn new(bundle: &Bundle, metric: &dyn MetricField, p: Vector, x: Vector, y: Vector, v: Vector) -> Result<Self> {
        let split = bundle.splitting(metric, &p)?;
        require_horizontal(&split, &x)?;
        require_horizontal(&split, &y)?;
        require_vertical(&split, &v)?;
        let vecs = [&x, &y, &v];
        let mut dev: f64 = 0.0;
        for (i, a) in vecs.iter().enumerate() {
            for (j, b) in vecs.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((split.inner(a, b) - target).abs());
            }
        }
        if dev > 1e-10 {
            return Err(Error::NotOrthonormal(dev));
        }
        let u = Some(AlgebraVector(split.algebra_coords(&v)));
        Ok(Self { p, x, y, v, u })
    }

    /// Random point, random orthonormal horizontal pair and random unit vertical vector.
    pub fn random<R: Rng + ?Sized>(bundle: &Bundle, metric: &dyn MetricField, rng: &mut R) -> Result<Self> {
        let p = bundle.total().random_point(rng);
        let split = bundle.splitting(metric, &p)?;
        let (x, y) = random_horizontal_pair(&split, rng)?;
        let v = random_unit_vertical(&split, rng);
        Self::new(bundle, metric, p, x, y, v)
    }
}

fn gaussian_combination<R: Rng + ?Sized>(basis: &Matrix, rng: &mut R) -> Vector {
    let c = Vector::from_fn(basis.ncols(), |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    basis * c
}

/// g-orthonormal pair of random horizontal vectors at the splitting's point.
pub fn random_horizontal_pair<R: Rng + ?Sized>(split: &Splitting, rng: &mut R) -> Result<(Vector, Vector)> {
    let h = split.horizontal_basis();
    let raw = Matrix::from_columns(&[gaussian_combination(h, rng), gaussian_combination(h, rng)]);
    let on = crate::bundle::orthonormalize(split.metric(), &raw)?;
    Ok((on.column(0).into_owned(), on.column(1).into_owned()))
}

pub fn random_unit_horizontal<R: Rng + ?Sized>(split: &Splitting, rng: &mut R) -> Vector {
    let x = gaussian_combination(split.horizontal_basis(), rng);
    let n = split.norm(&x);
    x / n
}

pub fn random_unit_vertical<R: Rng + ?Sized>(split: &Splitting, rng: &mut R) -> Vector {
    let v = gaussian_combination(split.vertical_basis(), rng);
    let n = split.norm(&v);
    v / n
}

pub(crate) fn require_horizontal(split: &Splitting, x: &Vector) -> Result<()> {
    let vert = split.norm(&split.vertical(x));
    if vert > 1e-8 * split.norm(x).max(1.0) {
        return Err(Error::VectorNotHorizontal(vert));
    }
    Ok(())
}

pub(crate) fn require_vertical(split: &Splitting, v: &Vector) -> Result<()> {
    let hor = split.norm(&split.horizontal(v));
    if hor > 1e-8 * split.norm(v).max(1.0) {
        return Err(Error::VectorNotVertical(hor));
    }
    Ok(())
}

/// Chart components of a tangent vector `w` at a point `q` of the chart domain.
pub(crate) fn chart_components(chart: &Chart, q: &Vector, w: &Vector) -> Vector {
    let x = chart.inverse(q);
    let j = chart.jacobian(&x);
    let rhs = j.transpose() * w;
    (j.transpose() * &j).cholesky().expect("chart differential has full rank").solve(&rhs)
}

/// Value of a field and the point it sits at.
pub(crate) struct Sample {
    pub point: Vector,
    pub velocity: Vector,
    pub fields: Vec<Vector>,
}

/// Integrates `system` along the geodesic of `v` over `[-delta, delta]` and returns the
/// two end samples with velocities oriented forward.
pub(crate) fn two_sided<S: FieldSystem>(
    metric: &dyn MetricField,
    bundle: Option<&Bundle>,
    system: &S,
    p: &Vector,
    v: &Vector,
    fields: &[Vector],
    delta: f64,
    cfg: &EngineConfig,
) -> Result<[Sample; 2]> {
    let steps = cfg.steps_for(delta).max(8);
    let run = |dir: f64| -> Result<Sample> {
        let (curve, f) = integrate(metric, bundle, system, p, &(v * dir), fields, delta, steps, cfg)?;
        Ok(Sample {
            point: curve.end().clone(),
            velocity: curve.velocities.last().expect("curve nodes") * dir,
            fields: f.into_iter().map(|mut vals| vals.pop().expect("field nodes")).collect(),
        })
    };
    Ok([run(-1.0)?, run(1.0)?])
}

/// `∇_ċ W` at the center of `geo` from values of `W` at `c(±delta)` and at the center.
pub(crate) fn covariant_fd(geo: &LocalGeometry, velocity: &Vector, minus: (&Vector, &Vector), plus: (&Vector, &Vector), center: &Vector, delta: f64) -> Vector {
    let wp = chart_components(&geo.chart, plus.0, plus.1);
    let wm = chart_components(&geo.chart, minus.0, minus.1);
    let d = (wp - wm) / (2.0 * delta) + geo.gamma.contract(&geo.coords(velocity), &geo.coords(center));
    geo.ambient(&d)
}

/// Horizontal lift at `q` of the base vector `b`, projected to the tangent space over `q`.
pub(crate) fn basic_extension(bundle: &Bundle, metric: &dyn MetricField, b: &Vector, q: &Vector) -> Result<Vector> {
    let base_point = bundle.projection(q);
    let bq = bundle.base().project_tangent(&base_point, b);
    Ok(bundle.splitting(metric, q)?.lift(bundle, &bq))
}

/// `A_X Y = ½ [X̃, Ỹ]^v` from a central-difference Lie bracket of basic extensions.
pub fn a_tensor(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, x: &Vector, y: &Vector, cfg: &EngineConfig) -> Result<Vector> {
    let split = bundle.splitting(metric, p)?;
    require_horizontal(&split, x)?;
    require_horizontal(&split, y)?;
    let dpi = bundle.projection_differential(p);
    let (bx, by) = (&dpi * x, &dpi * y);
    let chart = Chart::new(bundle.total(), p);
    let field_coords = |b: &Vector, c: &Vector| -> Result<Vector> {
        let q = chart.point(c);
        let w = basic_extension(bundle, metric, b, &q)?;
        Ok(chart_components(&chart, &q, &w))
    };
    // D_{dir} F at the chart center
    let directional = |b: &Vector, dir: &Vector| -> Result<Vector> {
        let n = dir.norm();
        if n == 0.0 {
            return Ok(Vector::zeros(dir.len()));
        }
        let h = cfg.fd_step_first / n;
        Ok((field_coords(b, &(dir * h))? - field_coords(b, &(dir * -h))?) / (2.0 * h))
    };
    let (xc, yc) = (chart.coords(x), chart.coords(y));
    let bracket = directional(&by, &xc)? - directional(&bx, &yc)?;
    Ok(split.vertical(&chart.ambient(&bracket)) * 0.5)
}

/// `A*_X V`, the dual of [`a_tensor`] over a g-orthonormal horizontal basis.
pub fn a_star(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, x: &Vector, v: &Vector, cfg: &EngineConfig) -> Result<Vector> {
    let split = bundle.splitting(metric, p)?;
    require_horizontal(&split, x)?;
    require_vertical(&split, v)?;
    let h = split.horizontal_basis();
    let mut out = Vector::zeros(p.len());
    for j in 0..h.ncols() {
        let hj = h.column(j).into_owned();
        let a = a_tensor(bundle, metric, p, x, &hj, cfg)?;
        out += hj * split.inner(&a, v);
    }
    Ok(out)
}

/// `S_X V`, the second fundamental form of the fibers.
pub fn s_tensor(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, x: &Vector, v: &Vector, cfg: &EngineConfig) -> Result<Vector> {
    let frame = SubmersionFrame::new(bundle, metric, p, cfg)?;
    require_horizontal(&frame.split, x)?;
    require_vertical(&frame.split, v)?;
    Ok(frame.s(x, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FatnessVerdict {
    Fat,
    Degenerate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FatnessCertificate {
    pub p: Vector,
    pub v: Vector,
    /// `ω_V(X, Y) = g(A_X Y, V)` on a g-orthonormal basis of the horizontal space.
    pub omega_matrix: Matrix,
    pub min_abs_det: f64,
    pub verdict: FatnessVerdict,
}

pub fn fatness_from_frame(frame: &SubmersionFrame, v: &Vector) -> Result<FatnessCertificate> {
    require_vertical(&frame.split, v)?;
    if frame.norm(v) == 0.0 {
        return Err(Error::InvalidParameter("fatness needs a nonzero vertical vector".into()));
    }
    let omega = frame.omega(v);
    let omega = (&omega - omega.transpose()) * 0.5;
    let det = if omega.nrows() % 2 == 1 { 0.0 } else { omega.determinant().abs() };
    let verdict = if omega.nrows() % 2 == 0 && det > FAT_EPSILON { FatnessVerdict::Fat } else { FatnessVerdict::Degenerate };
    Ok(FatnessCertificate { p: frame.point().clone(), v: v.clone(), omega_matrix: omega, min_abs_det: det, verdict })
}

pub fn fatness_check(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, v: &Vector, cfg: &EngineConfig) -> Result<FatnessCertificate> {
    fatness_from_frame(&SubmersionFrame::new(bundle, metric, p, cfg)?, v)
}

/// g-orthonormal basis (columns) of `ker A_X` inside the horizontal space.
pub fn kernel_from_frame(frame: &SubmersionFrame, x: &Vector) -> Result<Matrix> {
    require_horizontal(&frame.split, x)?;
    let h = frame.split.horizontal_basis();
    let k = h.ncols();
    let p = frame.split.orbit_tensor();
    let chol = p.cholesky().ok_or(Error::ActionNotFree(p.symmetric_eigenvalues().min()))?;
    let lt = chol.l().transpose();
    // |A_X (H c)|_g = |L^T W c| with W the algebra image of the basis
    let mut b = Matrix::zeros(3, k);
    for j in 0..k {
        let w = lt * frame.a_algebra(x, &h.column(j).into_owned());
        b.set_column(j, &Vector::from_column_slice(w.as_slice()));
    }
    let btb = b.transpose() * &b;
    let eig = btb.symmetric_eigen();
    let smax = eig.eigenvalues.max().max(0.0).sqrt();
    let cols: Vec<Vector> = (0..k)
        .filter(|&i| smax < 1e-9 || eig.eigenvalues[i].max(0.0).sqrt() <= KERNEL_THRESHOLD * smax)
        .map(|i| h * eig.eigenvectors.column(i))
        .collect();
    if cols.is_empty() {
        return Ok(Matrix::zeros(x.len(), 0));
    }
    Ok(Matrix::from_columns(&cols))
}

pub fn kernel_a_x(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, x: &Vector, cfg: &EngineConfig) -> Result<Matrix> {
    kernel_from_frame(&SubmersionFrame::new(bundle, metric, p, cfg)?, x)
}

/// `(∇_X A)_X Y` from two independent paths.
#[derive(Debug, Clone)]
pub struct NablaA {
    /// Vertical part of the derivative of `A_ċ Y` along the geodesic of `X` with `Y` parallel.
    pub value: Vector,
    /// Vertical vector with `g(·, V) = R(Y, X, X, V)`, valid for totally geodesic fibers.
    pub oracle: Vector,
    pub residual: f64,
}

/// `(∇_X A)_X Y`, with the curvature cross-check computed from `tensor` when given.
pub fn nabla_a_with(
    bundle: &Bundle,
    metric: &dyn MetricField,
    frame: &SubmersionFrame,
    tensor: Option<&CurvatureTensor>,
    x: &Vector,
    y: &Vector,
    cfg: &EngineConfig,
) -> Result<NablaA> {
    require_horizontal(&frame.split, x)?;
    require_horizontal(&frame.split, y)?;
    let p = frame.point();
    let delta = COVARIANT_STEP;
    let ends = two_sided(metric, None, &crate::ode::Parallel, p, x, &[y.clone()], delta, cfg)?;
    let at = |s: &Sample| -> Result<Vector> {
        let f = SubmersionFrame::new(bundle, metric, &s.point, cfg)?;
        Ok(f.a_general(&s.velocity, &s.fields[0]))
    };
    let (wm, wp) = (at(&ends[0])?, at(&ends[1])?);
    let w0 = frame.a_general(x, y);
    let full = covariant_fd(&frame.geo, x, (&ends[0].point, &wm), (&ends[1].point, &wp), &w0, delta);
    let value = frame.vertical(&full);
    let owned;
    let tensor = match tensor {
        Some(t) => t,
        None => {
            owned = CurvatureTensor::new(metric, p, cfg)?;
            &owned
        }
    };
    let vb = frame.split.vertical_basis();
    let mut oracle = Vector::zeros(p.len());
    for a in 0..vb.ncols() {
        let va = vb.column(a).into_owned();
        oracle += &va * tensor.eval(y, x, x, &va);
    }
    let residual = frame.norm(&(&value - &oracle));
    Ok(NablaA { value, oracle, residual })
}

pub fn nabla_a(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, x: &Vector, y: &Vector, cfg: &EngineConfig) -> Result<NablaA> {
    let frame = SubmersionFrame::new(bundle, metric, p, cfg)?;
    nabla_a_with(bundle, metric, &frame, None, x, y, cfg)
}

/// Per-frame data of the CDR inequality, evaluated for any algebra direction `u`.
#[derive(Debug, Clone, Copy)]
pub struct CdrData {
    pub base_curvature: f64,
    /// Quadratic form `u -> |A*_X u*|²`.
    pub astar_gram: Matrix3<f64>,
    /// Linear form `u -> g(u*, (∇_X A)_X Y)`.
    pub nabla_dual: Vector3<f64>,
}

impl CdrData {
    pub fn from_frame(bundle: &Bundle, metric: &dyn MetricField, frame: &SubmersionFrame, base_curvature: f64, x: &Vector, y: &Vector, cfg: &EngineConfig) -> Result<Self> {
        let h = frame.split.horizontal_basis();
        // rows: algebra directions, columns: horizontal basis; entries g(A_X H_j, e_a*)
        let mut m = Matrix::zeros(3, h.ncols());
        for a in 0..3 {
            let ea = frame.split.action_vector(&Vector3::ith(a, 1.0));
            let s = frame.a_star(x, &ea);
            for j in 0..h.ncols() {
                m[(a, j)] = frame.inner(&s, &h.column(j).into_owned());
            }
        }
        let mmt = &m * m.transpose();
        let astar_gram = Matrix3::from_fn(|i, j| mmt[(i, j)]);
        let nabla = nabla_a_with(bundle, metric, frame, None, x, y, cfg)?;
        let kv = frame.split.action().transpose() * (frame.split.metric() * &nabla.value);
        let nabla_dual = Vector3::new(kv[0], kv[1], kv[2]);
        Ok(Self { base_curvature, astar_gram, nabla_dual })
    }

    pub fn margin(&self, u: &Vector3<f64>) -> f64 {
        self.base_curvature * (u.transpose() * self.astar_gram * u)[0] - self.nabla_dual.dot(u).powi(2)
    }
}

/// `K_B |A*_X u*|² - g(u*, (∇_X A)_X Y)²`.
pub fn cdr_margin(
    bundle: &Bundle,
    metric: &dyn MetricField,
    base_curvature: f64,
    p: &Vector,
    x: &Vector,
    y: &Vector,
    u: &AlgebraVector,
    cfg: &EngineConfig,
) -> Result<f64> {
    let frame = SubmersionFrame::new(bundle, metric, p, cfg)?;
    Ok(CdrData::from_frame(bundle, metric, &frame, base_curvature, x, y, cfg)?.margin(&u.0))
}

/// CDR margin in terms of the curvature form `Ω = -2A` and a base orthonormal basis.
pub fn cdr_original_margin(
    bundle: &Bundle,
    metric: &dyn MetricField,
    p: &Vector,
    x: &Vector,
    y: &Vector,
    u: &AlgebraVector,
    base_basis: &[Vector],
    cfg: &EngineConfig,
) -> Result<f64> {
    let base = bundle.base();
    let bp = bundle.projection(p);
    if base_basis.len() != base.dim() {
        return Err(Error::DimensionMismatch { expected: base.dim(), got: base_basis.len() });
    }
    let mut dev: f64 = 0.0;
    for (i, a) in base_basis.iter().enumerate() {
        dev = dev.max(base.normal_component(&bp, a).abs());
        for (j, b) in base_basis.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((a.dot(b) - target).abs());
        }
    }
    if dev > 1e-8 {
        return Err(Error::NotOrthonormal(dev));
    }
    let frame = SubmersionFrame::new(bundle, metric, p, cfg)?;
    require_horizontal(&frame.split, x)?;
    require_horizontal(&frame.split, y)?;
    let dpi = bundle.projection_differential(p);
    let base_tensor = CurvatureTensor::new(&InducedMetric::new(base.clone()), &bp, cfg)?;
    let (bx, by) = (&dpi * x, &dpi * y);
    let rh = base_tensor.eval(&bx, &by, &by, &bx);
    let omega_sq: f64 = base_basis
        .iter()
        .map(|xk| {
            let lift = frame.split.lift(bundle, xk);
            (-2.0 * frame.a_algebra(x, &lift)).dot(&u.0).powi(2)
        })
        .sum();
    let nabla = nabla_a_with(bundle, metric, &frame, None, x, y, cfg)?;
    let nabla_omega = -2.0 * frame.split.algebra_coords(&nabla.value);
    Ok(rh * omega_sq - nabla_omega.dot(&u.0).powi(2))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::metric::{MetricDescriptor, SharedMetric};

    fn setup(bundle: &str, metric: &str) -> (Bundle, SharedMetric) {
        let b = Bundle::from_name(bundle).unwrap();
        let m = metric.parse::<MetricDescriptor>().unwrap().build(&b).unwrap();
        (b, m)
    }

    fn cfg() -> EngineConfig {
        EngineConfig::default()
    }

    #[test]
    fn a_vanishes_on_trivial_bundles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for name in ["trivial3x2", "trivial3x4"] {
            let (b, m) = setup(name, "reference");
            for _ in 0..5 {
                let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
                assert!(a_tensor(&b, m.as_ref(), &f.p, &f.x, &f.y, &cfg()).unwrap().norm() < 1e-10);
                assert!(a_star(&b, m.as_ref(), &f.p, &f.x, &f.v, &cfg()).unwrap().norm() < 1e-10);
                assert!(s_tensor(&b, m.as_ref(), &f.p, &f.x, &f.v, &cfg()).unwrap().norm() < 1e-10);
            }
        }
    }

    #[test]
    fn a_is_antisymmetric() {
        let (b, m) = setup("hopf", "cheeger(1)");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
            let xy = a_tensor(&b, m.as_ref(), &f.p, &f.x, &f.y, &cfg()).unwrap();
            let yx = a_tensor(&b, m.as_ref(), &f.p, &f.y, &f.x, &cfg()).unwrap();
            assert!((&xy + &yx).norm() < 1e-8);
            assert!(a_tensor(&b, m.as_ref(), &f.p, &f.x, &f.x, &cfg()).unwrap().norm() < 1e-8);
        }
    }

    #[test]
    fn bracket_and_connection_form_schemes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (bundle, metric) in [("hopf", "reference"), ("hopf", "warped(2)"), ("hopf", "regularized(3, warped(2))")] {
            let (b, m) = setup(bundle, metric);
            for _ in 0..4 {
                let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
                let frame = SubmersionFrame::new(&b, m.as_ref(), &f.p, &cfg()).unwrap();
                let bracket = a_tensor(&b, m.as_ref(), &f.p, &f.x, &f.y, &cfg()).unwrap();
                let form = frame.a(&f.x, &f.y);
                assert!(frame.norm(&(bracket - form)) < 1e-6, "{metric}");
            }
        }
    }

    #[test]
    fn a_star_is_dual_to_a() {
        let (b, m) = setup("hopf", "warped(2)");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
            let s = a_star(&b, m.as_ref(), &f.p, &f.x, &f.v, &cfg()).unwrap();
            let a = a_tensor(&b, m.as_ref(), &f.p, &f.x, &f.y, &cfg()).unwrap();
            assert!((m.inner(&f.p, &s, &f.y) - m.inner(&f.p, &a, &f.v)).abs() < 1e-8);
        }
    }

    #[test]
    fn horizontal_curvature_satisfies_oneill_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for metric in ["reference", "cheeger(1)", "warped(2)"] {
            let (b, m) = setup("hopf", metric);
            let base = InducedMetric::new(b.base().clone());
            for _ in 0..3 {
                let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
                let frame = SubmersionFrame::new(&b, m.as_ref(), &f.p, &cfg()).unwrap();
                let k = CurvatureTensor::new(m.as_ref(), &f.p, &cfg()).unwrap().eval(&f.x, &f.y, &f.y, &f.x);
                let a = frame.a(&f.x, &f.y);
                let dpi = b.projection_differential(&f.p);
                let (bx, by) = (&dpi * &f.x, &dpi * &f.y);
                let kb = CurvatureTensor::new(&base, &b.projection(&f.p), &cfg()).unwrap().eval(&bx, &by, &by, &bx);
                assert!((kb - k - 3.0 * frame.inner(&a, &a)).abs() < 1e-4, "{metric}: {kb} vs {k}");
            }
        }
    }

    #[test]
    fn hopf_fibers_are_totally_geodesic() {
        let (b, m) = setup("hopf", "reference");
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let p = b.total().random_point(&mut rng);
            assert!(SubmersionFrame::new(&b, m.as_ref(), &p, &cfg()).unwrap().s_norm() < 1e-6);
        }
        let (b, m) = setup("hopf", "warped(2)");
        let p = b.total().random_point(&mut rng);
        assert!(SubmersionFrame::new(&b, m.as_ref(), &p, &cfg()).unwrap().s_norm() > 1e-3);
    }

    #[test]
    fn fatness_separates_hopf_from_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (b, m) = setup("hopf", "reference");
        for _ in 0..100 {
            let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
            let c = fatness_check(&b, m.as_ref(), &f.p, &f.v, &cfg()).unwrap();
            assert_eq!(c.verdict, FatnessVerdict::Fat);
            assert!(c.min_abs_det >= 0.5);
            assert!((&c.omega_matrix + c.omega_matrix.transpose()).abs().max() < 1e-10);
            assert!(a_star(&b, m.as_ref(), &f.p, &f.x, &f.v, &cfg()).unwrap().norm() > 0.5);
        }
        for name in ["trivial3x2", "trivial3x4"] {
            let (b, m) = setup(name, "reference");
            let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
            let c = fatness_check(&b, m.as_ref(), &f.p, &f.v, &cfg()).unwrap();
            assert_eq!(c.verdict, FatnessVerdict::Degenerate);
            assert_eq!(c.omega_matrix.abs().max(), 0.0);
        }
    }

    #[test]
    fn omega_vanishes_on_double_dual() {
        let (b, m) = setup("hopf", "warped(2)");
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
            let frame = SubmersionFrame::new(&b, m.as_ref(), &f.p, &cfg()).unwrap();
            let w = frame.a_star(&f.x, &f.v);
            let z = frame.a_star(&w, &f.v);
            assert!(frame.inner(&frame.a(&f.x, &z), &f.v).abs() < 1e-8);
        }
    }

    #[test]
    fn kernel_of_a_x() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (b, m) = setup("hopf", "reference");
        for _ in 0..10 {
            let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
            let ker = kernel_a_x(&b, m.as_ref(), &f.p, &f.x, &cfg()).unwrap();
            assert_eq!(ker.ncols(), 1);
            let c = (ker.transpose() * m.matrix(&f.p) * &f.x)[0];
            assert!((c.abs() - 1.0).abs() < 1e-8);
        }
        let (b, m) = setup("trivial3x4", "reference");
        let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
        assert_eq!(kernel_a_x(&b, m.as_ref(), &f.p, &f.x, &cfg()).unwrap().ncols(), 4);
    }

    #[test]
    fn nabla_a_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for metric in ["reference", "cheeger(1)"] {
            let (b, m) = setup("hopf", metric);
            for _ in 0..3 {
                let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
                let n = nabla_a(&b, m.as_ref(), &f.p, &f.x, &f.y, &cfg()).unwrap();
                assert!(n.residual < 1e-3, "{metric}: {}", n.residual);
                if metric == "reference" {
                    assert!(n.value.norm() < 1e-3);
                }
            }
        }
        let (b, m) = setup("trivial3x2", "reference");
        let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
        assert_eq!(nabla_a(&b, m.as_ref(), &f.p, &f.x, &f.y, &cfg()).unwrap().value.norm(), 0.0);
    }

    #[test]
    fn cdr_margin_dichotomy_and_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (b, m) = setup("hopf", "reference");
        for _ in 0..5 {
            let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
            let u = f.u.unwrap();
            let one = cdr_margin(&b, m.as_ref(), b.base_curvature(), &f.p, &f.x, &f.y, &u, &cfg()).unwrap();
            let two = cdr_margin(&b, m.as_ref(), b.base_curvature(), &f.p, &f.x, &f.y, &u.scale(2.0), &cfg()).unwrap();
            assert!(one > 0.0);
            assert!((two - 4.0 * one).abs() < 1e-10 * two.abs().max(1.0));
        }
        let (b, m) = setup("trivial3x2", "reference");
        let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
        assert_eq!(cdr_margin(&b, m.as_ref(), 1.0, &f.p, &f.x, &f.y, &f.u.unwrap(), &cfg()).unwrap(), 0.0);
    }

    fn base_basis(b: &Bundle, p: &Vector, rotation: Option<&Matrix>) -> Vec<Vector> {
        let e = b.base().tangent_basis(&b.projection(p));
        let e = match rotation {
            Some(r) => e * r,
            None => e,
        };
        (0..e.ncols()).map(|i| e.column(i).into_owned()).collect()
    }

    #[test]
    fn original_cdr_margin_is_four_times_margin() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (b, m) = setup("hopf", "reference");
        for _ in 0..3 {
            let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
            let u = f.u.unwrap();
            let margin = cdr_margin(&b, m.as_ref(), b.base_curvature(), &f.p, &f.x, &f.y, &u, &cfg()).unwrap();
            let orig = cdr_original_margin(&b, m.as_ref(), &f.p, &f.x, &f.y, &u, &base_basis(&b, &f.p, None), &cfg()).unwrap();
            assert!((orig - 4.0 * margin).abs() < 1e-6 * margin.abs().max(1.0) * 20.0, "{orig} vs {margin}");
            let raw = Matrix::from_fn(4, 4, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let q = raw.qr().q();
            let rebased = cdr_original_margin(&b, m.as_ref(), &f.p, &f.x, &f.y, &u, &base_basis(&b, &f.p, Some(&q)), &cfg()).unwrap();
            assert!((rebased - orig).abs() < 1e-9 * orig.abs().max(1.0));
        }
        let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
        let mut basis = base_basis(&b, &f.p, None);
        basis[0] *= 2.0;
        assert!(matches!(
            cdr_original_margin(&b, m.as_ref(), &f.p, &f.x, &f.y, &f.u.unwrap(), &basis, &cfg()),
            Err(Error::NotOrthonormal(_))
        ));
        let (b, m) = setup("trivial3x4", "reference");
        let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
        let orig = cdr_original_margin(&b, m.as_ref(), &f.p, &f.x, &f.y, &f.u.unwrap(), &base_basis(&b, &f.p, None), &cfg()).unwrap();
        assert_eq!(orig, 0.0);
    }

    #[test]
    fn inputs_of_the_wrong_type_are_rejected() {
        let (b, m) = setup("hopf", "reference");
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
        assert!(matches!(a_tensor(&b, m.as_ref(), &f.p, &f.v, &f.y, &cfg()), Err(Error::VectorNotHorizontal(_))));
        assert!(matches!(a_star(&b, m.as_ref(), &f.p, &f.x, &f.y, &cfg()), Err(Error::VectorNotVertical(_))));
        assert!(matches!(
            VertizontalFrame::new(&b, m.as_ref(), f.p.clone(), f.x.clone(), f.x.clone(), f.v.clone()),
            Err(Error::NotOrthonormal(_))
        ));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]

        #[test]
        fn tensor_invariants_on_random_frames(seed in proptest::prelude::any::<u64>(), c in 0.1f64..5.0) {
            let (b, m) = setup("hopf", "cheeger(2)");
            let f = VertizontalFrame::random(&b, m.as_ref(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let frame = SubmersionFrame::new(&b, m.as_ref(), &f.p, &cfg()).unwrap();
            let (xy, yx) = (frame.a(&f.x, &f.y), frame.a(&f.y, &f.x));
            proptest::prop_assert!(frame.norm(&(&xy + &yx)) < 1e-12);
            let dual = frame.inner(&frame.a_star(&f.x, &f.v), &f.y) - frame.inner(&xy, &f.v);
            proptest::prop_assert!(dual.abs() < 1e-10);
            let data = CdrData::from_frame(&b, m.as_ref(), &frame, b.base_curvature(), &f.x, &f.y, &cfg()).unwrap();
            let u = f.u.unwrap().0;
            let (one, scaled) = (data.margin(&u), data.margin(&(u * c)));
            proptest::prop_assert!((scaled - c * c * one).abs() <= 1e-10 * scaled.abs().max(1.0));
        }
    }
}
