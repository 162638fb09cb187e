//! Cheeger deformation tensor algebra: the orbit tensor `P`, `P_t = P(1 + tP)⁻¹`, the
//! operator `C_t`, the metrics `g_t` and `g̃_t = t g_t|_V + g|_H`, and the closed-form
//! deformed curvature `κ_t`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::bundle::{Bundle, Splitting};
use crate::error::{Error, Result};
use crate::lie::{bracket, AlgebraVector};
use crate::manifold::{Chart, Matrix, Vector};
use crate::metric::{DeformedMetric, MetricField, SharedMetric, VerticalLaw};
use crate::riemann::{CurvatureTensor, EngineConfig, LocalGeometry};
use crate::submersion::{basic_extension, chart_components, require_horizontal, SubmersionFrame};

/// Symmetric positive definite `P` on the algebra with `g(U*, V*) = Q(PU, V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitTensor {
    pub matrix: Matrix3<f64>,
}

impl OrbitTensor {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        let sym = (matrix + matrix.transpose()) * 0.5;
        let lo = sym.symmetric_eigenvalues().min();
        if !(lo > 0.0) {
            return Err(Error::ActionNotFree(lo));
        }
        Ok(Self { matrix: sym })
    }

    pub fn eigenvalues(&self) -> Vector3<f64> {
        self.matrix.symmetric_eigenvalues()
    }

    /// `f(P)` through the eigendecomposition.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> Matrix3<f64> {
        let eig = self.matrix.symmetric_eigen();
        let d = Matrix3::from_diagonal(&eig.eigenvalues.map(f));
        eig.eigenvectors * d * eig.eigenvectors.transpose()
    }
}

pub fn orbit_tensor(bundle: &Bundle, metric: &dyn MetricField, p: &Vector) -> Result<OrbitTensor> {
    OrbitTensor::new(*bundle.splitting(metric, p)?.orbit_tensor())
}

/// `P_t = P(1 + tP)⁻¹`.
pub fn p_t(p: &OrbitTensor, t: f64) -> Result<OrbitTensor> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("P_t needs t >= 0, got {t}")));
    }
    OrbitTensor::new(p.apply_fn(|l| l / (1.0 + t * l)))
}

/// `X̄ = X + U*` with `X` horizontal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeformedDecomposition {
    pub x: Vector,
    pub u: AlgebraVector,
}

impl DeformedDecomposition {
    pub fn new(split: &Splitting, xbar: &Vector) -> Self {
        let u = split.algebra_coords(xbar);
        Self { x: xbar - split.action_vector(&u), u: AlgebraVector(u) }
    }

    pub fn reconstruct(&self, split: &Splitting) -> Vector {
        &self.x + split.action_vector(&self.u.0)
    }
}

pub fn decompose(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, xbar: &Vector) -> Result<DeformedDecomposition> {
    Ok(DeformedDecomposition::new(&bundle.splitting(metric, p)?, xbar))
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("Cheeger deformation needs t >= 0, got {t}")));
    }
    Ok(())
}

fn c_t_with(split: &Splitting, xbar: &Vector, t: f64, inverse: bool) -> Vector {
    let d = DeformedDecomposition::new(split, xbar);
    let p = split.orbit_tensor();
    let m = Matrix3::identity() + p * t;
    let u = if inverse { m * d.u.0 } else { m.try_inverse().expect("1 + tP is invertible") * d.u.0 };
    d.x + split.action_vector(&u)
}

/// `C_t(X + U*) = X + ((1 + tP)⁻¹ U)*`.
pub fn c_t(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, xbar: &Vector, t: f64) -> Result<Vector> {
    check_t(t)?;
    Ok(c_t_with(&bundle.splitting(metric, p)?, xbar, t, false))
}

/// `C_t⁻¹(X + U*) = X + ((1 + tP) U)*`.
pub fn c_t_inverse(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, xbar: &Vector, t: f64) -> Result<Vector> {
    check_t(t)?;
    Ok(c_t_with(&bundle.splitting(metric, p)?, xbar, t, true))
}

/// `g_t` with `g_t(X̄, Ȳ) = g(C_t X̄, Ȳ)`; the reference metric itself at `t = 0`.
pub fn metric_gt(bundle: &Bundle, metric: SharedMetric, t: f64) -> Result<SharedMetric> {
    check_t(t)?;
    if t == 0.0 {
        return Ok(metric);
    }
    DeformedMetric::shared(bundle, metric, VerticalLaw::Cheeger(t))
}

/// `g̃_t = t g_t|_V + g|_H`.
pub fn regularized_metric(bundle: &Bundle, metric: SharedMetric, t: f64) -> Result<SharedMetric> {
    DeformedMetric::shared(bundle, metric, VerticalLaw::Regularized(t))
}

/// Vertical part of `∇_X̄ Ȳ` as an algebra element, with `Ȳ` extended as a basic field plus
/// the action field of a fixed algebra element.
pub fn vertical_derivative(bundle: &Bundle, metric: &dyn MetricField, geo: &LocalGeometry, xbar: &Vector, ybar: &Vector, cfg: &EngineConfig) -> Result<Vector3<f64>> {
    let p = geo.point();
    let split = bundle.splitting(metric, p)?;
    let dy = DeformedDecomposition::new(&split, ybar);
    let by = bundle.projection_differential(p) * &dy.x;
    let uy = Vector::from_column_slice(dy.u.0.as_slice());
    let chart: &Chart = &geo.chart;
    let field = |c: &Vector| -> Result<Vector> {
        let q = chart.point(c);
        let w = basic_extension(bundle, metric, &by, &q)? + bundle.action_matrix(&q) * &uy;
        Ok(chart_components(chart, &q, &w))
    };
    let xc = geo.coords(xbar);
    let n = xc.norm();
    let mut d = geo.gamma.contract(&xc, &geo.coords(ybar));
    if n > 0.0 {
        let h = cfg.fd_step_first / n;
        d += (field(&(&xc * h))? - field(&(&xc * -h))?) / (2.0 * h);
    }
    Ok(split.algebra_coords(&geo.ambient(&d)))
}

/// Pieces of the closed-form deformed curvature at one pair `(X̄, Ȳ)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KappaTerms {
    /// Unnormalized `R_g(X̄, Ȳ, Ȳ, X̄)` from the finite-difference oracle.
    pub kappa0: f64,
    /// `(t³/4) |[PU, PV]|²_Q`
    pub bracket_term: f64,
    pub z_t: f64,
}

impl KappaTerms {
    pub fn kappa(&self) -> f64 {
        self.kappa0 + self.bracket_term + self.z_t
    }
}

/// How `P ∇^v_X̄ Ȳ` enters `z_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerticalTerm {
    /// `Q(P ∇^v_X̄ Ȳ, Z) = -½ dθ_Z(X̄, Ȳ)` with `θ_Z = g(·, Z*)`; tensorial in `X̄, Ȳ`.
    #[default]
    ConnectionForm,
    /// `∇^v_X̄ Ȳ` with `Ȳ` extended as basic field plus action field; agrees with the
    /// connection form where `P` is constant.
    Extension,
}

/// Evaluates `κ₀`, the bracket term and `z_t` for every `t` in `ts` with one curvature tensor.
pub fn kappa_terms(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, xbar: &Vector, ybar: &Vector, ts: &[f64], cfg: &EngineConfig) -> Result<Vec<KappaTerms>> {
    kappa_terms_with(bundle, metric, p, xbar, ybar, ts, VerticalTerm::default(), cfg)
}

#[allow(clippy::too_many_arguments)]
pub fn kappa_terms_with(
    bundle: &Bundle,
    metric: &dyn MetricField,
    p: &Vector,
    xbar: &Vector,
    ybar: &Vector,
    ts: &[f64],
    vertical: VerticalTerm,
    cfg: &EngineConfig,
) -> Result<Vec<KappaTerms>> {
    for &t in ts {
        check_t(t)?;
    }
    let tensor = CurvatureTensor::new(metric, p, cfg)?;
    let kappa0 = tensor.eval(xbar, ybar, ybar, xbar);
    let frame = SubmersionFrame::new(bundle, metric, p, cfg)?;
    let split = &frame.split;
    let pm = OrbitTensor::new(*split.orbit_tensor())?;
    let pw = match vertical {
        VerticalTerm::ConnectionForm => frame.dtheta(xbar, ybar) * -0.5,
        VerticalTerm::Extension => pm.matrix * vertical_derivative(bundle, metric, &frame.geo, xbar, ybar, cfg)?,
    };
    let u = split.algebra_coords(xbar);
    let v = split.algebra_coords(ybar);
    let br = bracket(AlgebraVector(pm.matrix * u), AlgebraVector(pm.matrix * v)).0;
    Ok(ts
        .iter()
        .map(|&t| {
            let root = pm.apply_fn(|l| 1.0 / (1.0 + t * l).sqrt());
            let z = root * (pw - br * (0.5 * t));
            KappaTerms { kappa0, bracket_term: 0.25 * t.powi(3) * br.norm_squared(), z_t: 3.0 * t * z.norm_squared() }
        })
        .collect())
}

/// `κ_t(X̄, Ȳ) = κ₀ + (t³/4)|[PU, PV]|²_Q + z_t`, equal to `R_{g_t}(C_t⁻¹X̄, C_t⁻¹Ȳ, C_t⁻¹Ȳ, C_t⁻¹X̄)`.
pub fn kappa_t(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, xbar: &Vector, ybar: &Vector, t: f64, cfg: &EngineConfig) -> Result<f64> {
    Ok(kappa_terms(bundle, metric, p, xbar, ybar, &[t], cfg)?[0].kappa())
}

/// `z_t = 3t |(1 + tP)^{-1/2} (P ∇^v_X̄ Ȳ - (t/2)[PU, PV])|²_Q`.
pub fn z_t_term(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, xbar: &Vector, ybar: &Vector, t: f64, cfg: &EngineConfig) -> Result<f64> {
    Ok(kappa_terms(bundle, metric, p, xbar, ybar, &[t], cfg)?[0].z_t)
}

/// Linear map between g-orthonormal bases of the vertical and horizontal spaces.
#[derive(Debug, Clone)]
pub struct LinearMap {
    /// Columns: orthonormal basis of the domain.
    pub domain: Matrix,
    /// Columns: orthonormal basis of the codomain.
    pub codomain: Matrix,
    pub matrix: Matrix,
}

impl LinearMap {
    pub fn apply(&self, metric_matrix: &Matrix, v: &Vector) -> Vector {
        let c = self.domain.transpose() * metric_matrix * v;
        &self.codomain * (&self.matrix * c)
    }

    pub fn singular_values(&self) -> Vector {
        self.matrix.clone().singular_values()
    }

    pub fn min_singular_value(&self) -> f64 {
        self.singular_values().min()
    }
}

/// `V -> A*_X (P⁻¹ V)`, the `t -> ∞` limit of the dual tensor of `g̃_t`.
pub fn limit_dual_a(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, x: &Vector, cfg: &EngineConfig) -> Result<LinearMap> {
    let frame = SubmersionFrame::new(bundle, metric, p, cfg)?;
    require_horizontal(&frame.split, x)?;
    let (vb, hb) = (frame.split.vertical_basis().clone(), frame.split.horizontal_basis().clone());
    let pinv = frame.split.orbit_inverse();
    let mut matrix = Matrix::zeros(hb.ncols(), vb.ncols());
    for a in 0..vb.ncols() {
        let v = vb.column(a).into_owned();
        let w = frame.split.action_vector(&(pinv * frame.split.algebra_coords(&v)));
        let img = frame.a_star(x, &w);
        let c = hb.transpose() * frame.split.metric() * img;
        matrix.set_column(a, &c);
    }
    Ok(LinearMap { domain: vb, codomain: hb, matrix })
}

/// `K_g(X,Y) + 3t|(1+tP)^{-1/2} P A_XY|²_Q + 3 g((1+tP)⁻¹ A_XY, A_XY)`, the curvature of the
/// base metric induced by `g̃_t` on the plane of horizontal `X, Y`.
pub fn base_curvature_family(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, x: &Vector, y: &Vector, t: f64, cfg: &EngineConfig) -> Result<f64> {
    check_t(t)?;
    let frame = SubmersionFrame::new(bundle, metric, p, cfg)?;
    require_horizontal(&frame.split, x)?;
    require_horizontal(&frame.split, y)?;
    let kg = CurvatureTensor::new(metric, p, cfg)?.eval(x, y, y, x);
    let w = frame.a_algebra(x, y);
    let pm = OrbitTensor::new(*frame.split.orbit_tensor())?;
    let root = pm.apply_fn(|l| 1.0 / (1.0 + t * l).sqrt());
    let first = (root * pm.matrix * w).norm_squared();
    let second = w.dot(&(pm.apply_fn(|l| l / (1.0 + t * l)) * w));
    Ok(kg + 3.0 * t * first + 3.0 * second)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::metric::{InducedMetric, MetricDescriptor};
    use crate::submersion::VertizontalFrame;

    fn setup(bundle: &str, metric: &str) -> (Bundle, SharedMetric) {
        let b = Bundle::from_name(bundle).unwrap();
        let m = metric.parse::<MetricDescriptor>().unwrap().build(&b).unwrap();
        (b, m)
    }

    fn cfg() -> EngineConfig {
        EngineConfig::default()
    }

    fn random_tangent(b: &Bundle, p: &Vector, rng: &mut ChaCha8Rng) -> Vector {
        let e = b.total().tangent_basis(p);
        let c = Vector::from_fn(e.ncols(), |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        e * c
    }

    /// Deformed curvature evaluated directly on `g_t` by finite differences.
    fn oracle(b: &Bundle, m: &SharedMetric, p: &Vector, xbar: &Vector, ybar: &Vector, t: f64) -> f64 {
        let gt = metric_gt(b, m.clone(), t).unwrap();
        let (x, y) = (c_t_inverse(b, m.as_ref(), p, xbar, t).unwrap(), c_t_inverse(b, m.as_ref(), p, ybar, t).unwrap());
        CurvatureTensor::new(gt.as_ref(), p, &cfg()).unwrap().eval(&x, &y, &y, &x)
    }

    #[test]
    fn orbit_tensor_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (bundle, metric, c) in [("hopf", "reference", 1.0), ("trivial3x2", "reference", 1.0), ("hopf", "vscale(3)", 3.0)] {
            let (b, m) = setup(bundle, metric);
            let p = b.total().random_point(&mut rng);
            let pm = orbit_tensor(&b, m.as_ref(), &p).unwrap();
            assert!((pm.matrix - Matrix3::identity() * c).abs().max() < 1e-12, "{bundle} {metric}");
        }
        assert!(matches!(OrbitTensor::new(Matrix3::zeros()), Err(Error::ActionNotFree(_))));
    }

    #[test]
    fn p_t_examples() {
        let id = OrbitTensor::new(Matrix3::identity()).unwrap();
        assert_eq!(p_t(&id, 0.0).unwrap(), id);
        for t in [0.5, 1.0, 10.0] {
            assert!((p_t(&id, t).unwrap().matrix - Matrix3::identity() / (1.0 + t)).abs().max() < 1e-14);
        }
        let diag = OrbitTensor::new(Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 4.0))).unwrap();
        let e = p_t(&diag, 1.0).unwrap().eigenvalues();
        let mut e: Vec<f64> = e.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        for (got, want) in e.iter().zip([0.5, 2.0 / 3.0, 0.8]) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!(p_t(&id, -1.0).is_err());
    }

    #[test]
    fn c_t_acts_on_vertical_part_only() {
        let (b, m) = setup("hopf", "warped(2)");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
        assert!((c_t(&b, m.as_ref(), &f.p, &f.x, 5.0).unwrap() - &f.x).norm() < 1e-12);
        let split = b.splitting(m.as_ref(), &f.p).unwrap();
        let u = Vector3::new(0.3, -1.0, 0.5);
        let pm = *split.orbit_tensor();
        let want = split.action_vector(&((Matrix3::identity() + pm * 2.0).try_inverse().unwrap() * u));
        assert!((c_t(&b, m.as_ref(), &f.p, &split.action_vector(&u), 2.0).unwrap() - want).norm() < 1e-12);
        let xbar = &f.x + split.action_vector(&u);
        let d = decompose(&b, m.as_ref(), &f.p, &xbar).unwrap();
        assert!((d.x - &f.x).norm() < 1e-12);
        assert!((d.u.0 - u).norm() < 1e-12);
        assert!(c_t(&b, m.as_ref(), &f.p, &xbar, -0.1).is_err());
    }

    #[test]
    fn deformed_metric_matches_c_t() {
        let (b, m) = setup("hopf", "warped(2)");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = b.total().random_point(&mut rng);
        assert!(Arc::ptr_eq(&metric_gt(&b, m.clone(), 0.0).unwrap(), &m));
        let gt = metric_gt(&b, m.clone(), 1.5).unwrap();
        for _ in 0..5 {
            let (a, c) = (random_tangent(&b, &p, &mut rng), random_tangent(&b, &p, &mut rng));
            let via_c = m.inner(&p, &c_t(&b, m.as_ref(), &p, &a, 1.5).unwrap(), &c);
            assert!((gt.inner(&p, &a, &c) - via_c).abs() < 1e-10);
        }
    }

    #[test]
    fn regularized_metric_on_round_hopf() {
        let (b, m) = setup("hopf", "reference");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
        let split = b.splitting(m.as_ref(), &f.p).unwrap();
        let u = Vector3::new(1.0, 2.0, -0.5);
        let us = split.action_vector(&u);
        for t in [0.5, 2.0, 100.0] {
            let r = regularized_metric(&b, m.clone(), t).unwrap();
            assert!((r.inner(&f.p, &us, &us) - t / (1.0 + t) * u.norm_squared()).abs() < 1e-10);
            assert!((r.inner(&f.p, &f.x, &f.x) - 1.0).abs() < 1e-12);
            assert!(r.inner(&f.p, &f.x, &us).abs() < 1e-12);
        }
        assert!(regularized_metric(&b, m, 0.0).is_err());
    }

    #[test]
    fn kappa_at_zero_is_the_original_curvature() {
        let (b, m) = setup("hopf", "cheeger(1)");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = b.total().random_point(&mut rng);
        let (x, y) = (random_tangent(&b, &p, &mut rng), random_tangent(&b, &p, &mut rng));
        let terms = kappa_terms(&b, m.as_ref(), &p, &x, &y, &[0.0], &cfg()).unwrap()[0];
        assert_eq!(terms.kappa(), terms.kappa0);
        assert!((terms.kappa0 - CurvatureTensor::new(m.as_ref(), &p, &cfg()).unwrap().eval(&x, &y, &y, &x)).abs() < 1e-12);
    }

    #[test]
    fn horizontal_planes_on_round_hopf() {
        let (b, m) = setup("hopf", "reference");
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
        let frame = SubmersionFrame::new(&b, m.as_ref(), &f.p, &cfg()).unwrap();
        let a = frame.a(&f.x, &f.y);
        let a2 = frame.inner(&a, &a);
        for t in [0.1, 1.0, 10.0] {
            let terms = kappa_terms(&b, m.as_ref(), &f.p, &f.x, &f.y, &[t], &cfg()).unwrap()[0];
            assert!(terms.bracket_term < 1e-20);
            assert!((terms.z_t - 3.0 * t / (1.0 + t) * a2).abs() < 1e-8);
        }
    }

    #[test]
    fn closed_form_matches_deformed_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for metric in ["reference", "warped(2)"] {
            let (b, m) = setup("hopf", metric);
            for _ in 0..3 {
                let p = b.total().random_point(&mut rng);
                let (x, y) = (random_tangent(&b, &p, &mut rng), random_tangent(&b, &p, &mut rng));
                let ts = [0.1, 1.0, 10.0];
                let terms = kappa_terms(&b, m.as_ref(), &p, &x, &y, &ts, &cfg()).unwrap();
                for (k, &t) in terms.iter().zip(&ts) {
                    let o = oracle(&b, &m, &p, &x, &y, t);
                    assert!((k.kappa() - o).abs() <= 1e-3 * o.abs().max(1.0), "{metric} t={t}: {} vs {o}", k.kappa());
                }
            }
        }
    }

    #[test]
    fn vertical_term_conventions_agree_for_constant_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (bundle, metric) in [("hopf", "reference"), ("hopf", "vscale(2)"), ("trivial3x4", "reference")] {
            let (b, m) = setup(bundle, metric);
            let p = b.total().random_point(&mut rng);
            let (x, y) = (random_tangent(&b, &p, &mut rng), random_tangent(&b, &p, &mut rng));
            let a = kappa_terms_with(&b, m.as_ref(), &p, &x, &y, &[1.0], VerticalTerm::ConnectionForm, &cfg()).unwrap()[0];
            let e = kappa_terms_with(&b, m.as_ref(), &p, &x, &y, &[1.0], VerticalTerm::Extension, &cfg()).unwrap()[0];
            assert!((a.z_t - e.z_t).abs() < 1e-5 * a.z_t.abs().max(1.0), "{bundle} {metric}");
        }
    }

    #[test]
    fn limit_dual_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (b, m) = setup("hopf", "reference");
        let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
        let map = limit_dual_a(&b, m.as_ref(), &f.p, &f.x, &cfg()).unwrap();
        let frame = SubmersionFrame::new(&b, m.as_ref(), &f.p, &cfg()).unwrap();
        assert!((map.apply(frame.split.metric(), &f.v) - frame.a_star(&f.x, &f.v)).norm() < 1e-10);
        assert!(map.min_singular_value() > 0.5);
        let (b, m) = setup("trivial3x2", "reference");
        let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
        assert_eq!(limit_dual_a(&b, m.as_ref(), &f.p, &f.x, &cfg()).unwrap().singular_values().max(), 0.0);
    }

    #[test]
    fn base_family_is_the_base_curvature() {
        let (b, m) = setup("hopf", "warped(2)");
        let base = InducedMetric::new(b.base().clone());
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f = VertizontalFrame::random(&b, m.as_ref(), &mut rng).unwrap();
        let dpi = b.projection_differential(&f.p);
        let (bx, by) = (&dpi * &f.x, &dpi * &f.y);
        let kb = CurvatureTensor::new(&base, &b.projection(&f.p), &cfg()).unwrap().eval(&bx, &by, &by, &bx);
        for t in [0.0, 1.0, 10.0, 1e3] {
            let k = base_curvature_family(&b, m.as_ref(), &f.p, &f.x, &f.y, t, &cfg()).unwrap();
            assert!((k - kb).abs() < 1e-4, "t={t}: {k} vs {kb}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn c_t_is_self_adjoint_and_invertible(seed in any::<u64>(), t in 0.0f64..20.0) {
            let (b, m) = setup("hopf", "warped(2)");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = b.total().random_point(&mut rng);
            let (x, y) = (random_tangent(&b, &p, &mut rng), random_tangent(&b, &p, &mut rng));
            let cx = c_t(&b, m.as_ref(), &p, &x, t).unwrap();
            let cy = c_t(&b, m.as_ref(), &p, &y, t).unwrap();
            let scale = x.norm() * y.norm();
            prop_assert!((m.inner(&p, &cx, &y) - m.inner(&p, &x, &cy)).abs() < 1e-10 * scale.max(1.0));
            let back = c_t_inverse(&b, m.as_ref(), &p, &cx, t).unwrap();
            prop_assert!((back - &x).norm() < 1e-10 * x.norm().max(1.0));
        }

        #[test]
        fn p_t_is_positive_and_bounded(d in prop::array::uniform3(0.01f64..10.0), t in 0.0f64..100.0) {
            let p = OrbitTensor::new(Matrix3::from_diagonal(&Vector3::from(d))).unwrap();
            let e = p_t(&p, t).unwrap().eigenvalues();
            for l in e.iter() {
                prop_assert!(*l > 0.0);
                prop_assert!(t == 0.0 || *l < 1.0 / t + 1e-12);
            }
        }

        #[test]
        fn deformation_never_lowers_curvature(seed in any::<u64>(), t in 0.0f64..50.0) {
            let (b, m) = setup("hopf", "warped(2)");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = b.total().random_point(&mut rng);
            let (x, y) = (random_tangent(&b, &p, &mut rng), random_tangent(&b, &p, &mut rng));
            let k = kappa_terms(&b, m.as_ref(), &p, &x, &y, &[t], &cfg()).unwrap()[0];
            prop_assert!(k.kappa() - k.kappa0 >= -1e-8);
        }
    }
}
