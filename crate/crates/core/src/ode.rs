//! Fixed-step RK4 integration of geodesics together with fields along them.
//!
//! The state lives in ambient coordinates. Each right-hand side evaluation retracts
//! the point, builds the chart centered there (where the chart differential is the
//! orthonormal tangent basis `E`) and uses
//!
//! ```text
//! q' = w
//! w' = E(-Γ(w, w)) + n(w, w)
//! Z' = E(F - Γ(w, Z)) + n(w, Z)      for a field with ∇_w Z = F
//! ```
//!
//! where `n(w, z) = -Σ_f p_f <w_f, z_f> / r_f^2` is the normal part coming from the sphere
//! factors.

use serde::{Deserialize, Serialize};

use crate::bundle::{Bundle, Splitting};
use crate::error::{Error, Result};
use crate::manifold::{SphereProduct, Vector};
use crate::metric::MetricField;
use crate::riemann::{jacobi_operator, EngineConfig, LocalGeometry};
use crate::submersion::frame::SubmersionFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Parallel,
    Holonomy,
    DualHolonomy,
    Basic,
    Jacobi,
}

/// Geodesic sampled at every integration node.
#[derive(Debug, Clone)]
pub struct Curve {
    pub times: Vec<f64>,
    pub points: Vec<Vector>,
    pub velocities: Vec<Vector>,
}

impl Curve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> &Vector {
        &self.points[0]
    }

    pub fn end(&self) -> &Vector {
        self.points.last().expect("curve has at least one node")
    }

    pub fn initial_velocity(&self) -> &Vector {
        &self.velocities[0]
    }

    pub fn span(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times[0]
    }

    pub fn steps(&self) -> usize {
        self.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone)]
pub struct FieldAlongCurve {
    pub kind: FieldKind,
    pub curve: Curve,
    pub values: Vec<Vector>,
    /// Covariant derivative along the curve, recorded for Jacobi fields.
    pub derivatives: Option<Vec<Vector>>,
}

impl FieldAlongCurve {
    pub fn norms(&self, metric: &dyn MetricField) -> Vec<f64> {
        self.curve.points.iter().zip(&self.values).map(|(q, v)| metric.norm(q, v)).collect()
    }
}

/// Everything a field system sees at one right-hand side evaluation.
pub struct Evaluation<'a> {
    pub geo: &'a LocalGeometry,
    pub frame: Option<&'a SubmersionFrame>,
    pub velocity: &'a Vector,
}

/// Covariant derivatives `∇_ċ Z_i` for a family of fields carried along a geodesic.
pub trait FieldSystem {
    fn needs_frame(&self) -> bool {
        false
    }

    fn derivatives(&self, eval: &Evaluation<'_>, fields: &[Vector]) -> Result<Vec<Vector>>;

    /// Called after each step with the new point; may re-project fields.
    fn stabilize(&self, _split: &Splitting, _fields: &mut [Vector]) {}
}

/// Parallel fields: `∇_ċ Z = 0`.
pub struct Parallel;

impl FieldSystem for Parallel {
    fn derivatives(&self, eval: &Evaluation<'_>, fields: &[Vector]) -> Result<Vec<Vector>> {
        Ok(fields.iter().map(|_| Vector::zeros(eval.velocity.len())).collect())
    }
}

struct Integrator<'a> {
    metric: &'a dyn MetricField,
    bundle: Option<&'a Bundle>,
    cfg: &'a EngineConfig,
}

struct Stage {
    dq: Vector,
    dw: Vector,
    dz: Vec<Vector>,
}

impl Integrator<'_> {
    fn manifold(&self) -> &SphereProduct {
        self.metric.manifold()
    }

    fn frame(&self, geo: LocalGeometry) -> Result<(Option<SubmersionFrame>, Option<LocalGeometry>)> {
        match self.bundle {
            Some(b) => Ok((Some(SubmersionFrame::from_geometry(b, geo)?), None)),
            None => Ok((None, Some(geo))),
        }
    }

    fn rhs<S: FieldSystem>(&self, system: &S, q: &Vector, w: &Vector, z: &[Vector]) -> Result<Stage> {
        let m = self.manifold();
        let qh = m.retract(q);
        let w = m.project_tangent(&qh, w);
        let z: Vec<Vector> = z.iter().map(|v| m.project_tangent(&qh, v)).collect();
        let geo = LocalGeometry::new(self.metric, &qh, self.cfg)?;
        let (frame, plain) = if system.needs_frame() { self.frame(geo)? } else { (None, Some(geo)) };
        let geo = frame.as_ref().map(|f| &f.geo).or(plain.as_ref()).expect("geometry present");
        let eval = Evaluation { geo, frame: frame.as_ref(), velocity: &w };
        let f = system.derivatives(&eval, &z)?;
        let wc = geo.coords(&w);
        let dw = geo.ambient(&-geo.gamma.contract(&wc, &wc)) + m.normal_correction(&qh, &w, &w);
        let dz = z
            .iter()
            .zip(&f)
            .map(|(zi, fi)| {
                let zc = geo.coords(zi);
                geo.ambient(&(geo.coords(fi) - geo.gamma.contract(&wc, &zc))) + m.normal_correction(&qh, &w, zi)
            })
            .collect();
        Ok(Stage { dq: w.clone(), dw, dz })
    }

    fn run<S: FieldSystem>(&self, system: &S, p: &Vector, v: &Vector, z0: &[Vector], span: f64, steps: usize) -> Result<(Curve, Vec<Vec<Vector>>)> {
        if steps < 2 {
            return Err(Error::TooFewSteps(steps));
        }
        let m = self.manifold();
        m.check_point(p)?;
        m.check_tangent(p, v, 1e-8)?;
        for z in z0 {
            m.check_tangent(p, z, 1e-8)?;
        }
        let dt = span / steps as f64;
        let mut q = p.clone();
        let mut w = v.clone();
        let mut z: Vec<Vector> = z0.to_vec();
        let mut curve = Curve { times: vec![0.0], points: vec![q.clone()], velocities: vec![w.clone()] };
        let mut fields: Vec<Vec<Vector>> = z.iter().map(|zi| vec![zi.clone()]).collect();
        let axpy = |x: &Vector, k: &Vector, h: f64| x + k * h;
        for step in 1..=steps {
            let k1 = self.rhs(system, &q, &w, &z)?;
            let z2: Vec<Vector> = z.iter().zip(&k1.dz).map(|(a, b)| axpy(a, b, 0.5 * dt)).collect();
            let k2 = self.rhs(system, &axpy(&q, &k1.dq, 0.5 * dt), &axpy(&w, &k1.dw, 0.5 * dt), &z2)?;
            let z3: Vec<Vector> = z.iter().zip(&k2.dz).map(|(a, b)| axpy(a, b, 0.5 * dt)).collect();
            let k3 = self.rhs(system, &axpy(&q, &k2.dq, 0.5 * dt), &axpy(&w, &k2.dw, 0.5 * dt), &z3)?;
            let z4: Vec<Vector> = z.iter().zip(&k3.dz).map(|(a, b)| axpy(a, b, dt)).collect();
            let k4 = self.rhs(system, &axpy(&q, &k3.dq, dt), &axpy(&w, &k3.dw, dt), &z4)?;
            let comb = |x: &Vector, a: &Vector, b: &Vector, c: &Vector, d: &Vector| x + (a + b * 2.0 + c * 2.0 + d) * (dt / 6.0);
            q = m.retract(&comb(&q, &k1.dq, &k2.dq, &k3.dq, &k4.dq));
            w = m.project_tangent(&q, &comb(&w, &k1.dw, &k2.dw, &k3.dw, &k4.dw));
            for (i, zi) in z.iter_mut().enumerate() {
                *zi = m.project_tangent(&q, &comb(zi, &k1.dz[i], &k2.dz[i], &k3.dz[i], &k4.dz[i]));
            }
            if self.cfg.proj_stabilize && system.needs_frame() && !z.is_empty() {
                let split = self.bundle.expect("frame systems carry a bundle").splitting(self.metric, &q)?;
                system.stabilize(&split, &mut z);
            }
            curve.times.push(step as f64 * dt);
            curve.points.push(q.clone());
            curve.velocities.push(w.clone());
            for (i, zi) in z.iter().enumerate() {
                fields[i].push(zi.clone());
            }
        }
        Ok((curve, fields))
    }
}

/// Integrates a geodesic and the fields of `system` jointly.
pub fn integrate<S: FieldSystem>(
    metric: &dyn MetricField,
    bundle: Option<&Bundle>,
    system: &S,
    p: &Vector,
    v: &Vector,
    fields: &[Vector],
    span: f64,
    steps: usize,
    cfg: &EngineConfig,
) -> Result<(Curve, Vec<Vec<Vector>>)> {
    if system.needs_frame() && bundle.is_none() {
        return Err(Error::Config("field system needs bundle data".into()));
    }
    Integrator { metric, bundle, cfg }.run(system, p, v, fields, span, steps)
}

pub fn geodesic(metric: &dyn MetricField, p: &Vector, v: &Vector, span: f64, steps: usize, cfg: &EngineConfig) -> Result<Curve> {
    Ok(integrate(metric, None, &Parallel, p, v, &[], span, steps, cfg)?.0)
}

/// Transports `w0` along a geodesic, re-integrating the geodesic from its initial data.
pub fn parallel_transport(metric: &dyn MetricField, curve: &Curve, w0: &Vector, cfg: &EngineConfig) -> Result<FieldAlongCurve> {
    let (curve, mut f) = integrate(metric, None, &Parallel, curve.start(), curve.initial_velocity(), &[w0.clone()], curve.span(), curve.steps(), cfg)?;
    Ok(FieldAlongCurve { kind: FieldKind::Parallel, curve, values: f.remove(0), derivatives: None })
}

/// Vertical fields with `∇_ċ ξ = -A*_ċ ξ + sign S_ċ ξ` (holonomy: `sign = -1`, dual: `+1`).
pub struct HolonomySystem {
    pub sign: f64,
}

impl FieldSystem for HolonomySystem {
    fn needs_frame(&self) -> bool {
        true
    }

    fn derivatives(&self, eval: &Evaluation<'_>, fields: &[Vector]) -> Result<Vec<Vector>> {
        let frame = eval.frame.expect("frame requested");
        let x = frame.horizontal(eval.velocity);
        Ok(fields
            .iter()
            .map(|xi| {
                let xi = frame.vertical(xi);
                -frame.a_star(&x, &xi) + frame.s(&x, &xi) * self.sign
            })
            .collect())
    }

    fn stabilize(&self, split: &Splitting, fields: &mut [Vector]) {
        for z in fields.iter_mut() {
            *z = split.vertical(z);
        }
    }
}

/// Horizontal fields along a vertical geodesic with `∇_γ' X = -A*_X γ' - S_X γ'`.
pub struct BasicSystem;

impl FieldSystem for BasicSystem {
    fn needs_frame(&self) -> bool {
        true
    }

    fn derivatives(&self, eval: &Evaluation<'_>, fields: &[Vector]) -> Result<Vec<Vector>> {
        let frame = eval.frame.expect("frame requested");
        let v = frame.vertical(eval.velocity);
        Ok(fields
            .iter()
            .map(|x| {
                let x = frame.horizontal(x);
                -frame.a_star(&x, &v) - frame.s(&x, &v)
            })
            .collect())
    }

    fn stabilize(&self, split: &Splitting, fields: &mut [Vector]) {
        for z in fields.iter_mut() {
            *z = split.horizontal(z);
        }
    }
}

/// Pairs `(J, J')` with `∇J = J'` and `∇J' = -R(J, ċ)ċ`.
pub struct JacobiSystem<'a> {
    pub metric: &'a dyn MetricField,
    pub cfg: &'a EngineConfig,
}

impl FieldSystem for JacobiSystem<'_> {
    fn derivatives(&self, eval: &Evaluation<'_>, fields: &[Vector]) -> Result<Vec<Vector>> {
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            out.push(pair[1].clone());
            out.push(-jacobi_operator(self.metric, eval.geo, &pair[0], eval.velocity, self.cfg)?);
        }
        Ok(out)
    }
}

/// Vertical speed of a curve's initial velocity relative to its size.
fn check_horizontal(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, v: &Vector) -> Result<()> {
    let s = bundle.splitting(metric, p)?;
    let vert = s.norm(&s.vertical(v));
    if vert > 1e-6 * s.norm(v).max(1.0) {
        return Err(Error::NotHorizontal(vert));
    }
    Ok(())
}

fn check_vertical(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, v: &Vector) -> Result<()> {
    let s = bundle.splitting(metric, p)?;
    let hor = s.norm(&s.horizontal(v));
    if hor > 1e-6 * s.norm(v).max(1.0) {
        return Err(Error::NotVertical(hor));
    }
    Ok(())
}

fn vertical_field(
    bundle: &Bundle,
    metric: &dyn MetricField,
    geodesic: &Curve,
    xi0: &Vector,
    sign: f64,
    kind: FieldKind,
    cfg: &EngineConfig,
) -> Result<FieldAlongCurve> {
    let (p, v) = (geodesic.start(), geodesic.initial_velocity());
    check_horizontal(bundle, metric, p, v)?;
    let s = bundle.splitting(metric, p)?;
    let h = s.norm(&s.horizontal(xi0));
    if h > 1e-8 * s.norm(xi0).max(1.0) {
        return Err(Error::VectorNotVertical(h));
    }
    let sys = HolonomySystem { sign };
    let (curve, mut f) = integrate(metric, Some(bundle), &sys, p, v, &[xi0.clone()], geodesic.span(), geodesic.steps(), cfg)?;
    Ok(FieldAlongCurve { kind, curve, values: f.remove(0), derivatives: None })
}

pub fn holonomy_field(bundle: &Bundle, metric: &dyn MetricField, geodesic: &Curve, xi0: &Vector, cfg: &EngineConfig) -> Result<FieldAlongCurve> {
    vertical_field(bundle, metric, geodesic, xi0, -1.0, FieldKind::Holonomy, cfg)
}

pub fn dual_holonomy_field(bundle: &Bundle, metric: &dyn MetricField, geodesic: &Curve, nu0: &Vector, cfg: &EngineConfig) -> Result<FieldAlongCurve> {
    vertical_field(bundle, metric, geodesic, nu0, 1.0, FieldKind::DualHolonomy, cfg)
}

pub fn basic_field(bundle: &Bundle, metric: &dyn MetricField, geodesic: &Curve, x0: &Vector, cfg: &EngineConfig) -> Result<FieldAlongCurve> {
    let (p, v) = (geodesic.start(), geodesic.initial_velocity());
    check_vertical(bundle, metric, p, v)?;
    let s = bundle.splitting(metric, p)?;
    let vert = s.norm(&s.vertical(x0));
    if vert > 1e-8 * s.norm(x0).max(1.0) {
        return Err(Error::VectorNotHorizontal(vert));
    }
    let (curve, mut f) = integrate(metric, Some(bundle), &BasicSystem, p, v, &[x0.clone()], geodesic.span(), geodesic.steps(), cfg)?;
    Ok(FieldAlongCurve { kind: FieldKind::Basic, curve, values: f.remove(0), derivatives: None })
}

pub fn jacobi_field(metric: &dyn MetricField, geodesic: &Curve, j0: &Vector, jprime0: &Vector, cfg: &EngineConfig) -> Result<FieldAlongCurve> {
    let sys = JacobiSystem { metric, cfg };
    let (curve, mut f) = integrate(
        metric,
        None,
        &sys,
        geodesic.start(),
        geodesic.initial_velocity(),
        &[j0.clone(), jprime0.clone()],
        geodesic.span(),
        geodesic.steps(),
        cfg,
    )?;
    let derivatives = f.pop();
    Ok(FieldAlongCurve { kind: FieldKind::Jacobi, curve, values: f.pop().expect("jacobi values"), derivatives })
}
