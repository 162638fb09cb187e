//! Identities along curves: basicness of `A*_X V`, the good-triple curvature identities,
//! the `K` identity for dual holonomy fields, dual-holonomy invariance, doubly ruled
//! surfaces and the WNN inequality.

use serde::{Deserialize, Serialize};

use super::{
    basic_extension, covariant_fd, fatness_from_frame, kernel_from_frame, require_horizontal, require_vertical, two_sided,
    FatnessVerdict, SubmersionFrame, VertizontalFrame, TOTALLY_GEODESIC_TOLERANCE,
};
use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::manifold::{Matrix, Vector};
use crate::metric::MetricField;
use crate::ode::{geodesic, integrate, jacobi_field, BasicSystem, HolonomySystem, Parallel};
use crate::riemann::{CurvatureTensor, EngineConfig};

/// Fails with `HypothesisViolated` unless the fibers are totally geodesic at the frame's point.
pub fn require_totally_geodesic(frame: &SubmersionFrame) -> Result<f64> {
    let s = frame.s_norm();
    if s > TOTALLY_GEODESIC_TOLERANCE {
        return Err(Error::HypothesisViolated(format!("fibers are not totally geodesic (|S| = {s:.3e})")));
    }
    Ok(s)
}

/// Individual terms of the WNN inequality at `(p, X, V)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WnnTerms {
    /// `τ |X|² |A*_X V|²`
    pub lhs: f64,
    /// `<(∇_X A*)_X V + A*_X S_X V, A*_X V>` with `∇A*` evaluated tensorially.
    pub rhs: f64,
    pub residual: f64,
    /// `½ X|A*_X ξ|² + 2 <A*_X S_X V, A*_X V>` along the holonomy field `ξ` of `V`.
    pub holonomy_rhs: f64,
    pub holonomy_residual: f64,
}

pub fn wnn_terms(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, x: &Vector, v: &Vector, tau: f64, cfg: &EngineConfig) -> Result<WnnTerms> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("WNN needs tau > 0, got {tau}")));
    }
    let frame = SubmersionFrame::new(bundle, metric, p, cfg)?;
    require_horizontal(&frame.split, x)?;
    require_vertical(&frame.split, v)?;
    let delta = super::COVARIANT_STEP;
    let a0 = frame.a_star(x, v);
    let as0 = frame.a_star(x, &frame.s(x, v));

    // tensorial: vertical part of a parallel field as the extension of V
    let par = two_sided(metric, None, &Parallel, p, x, &[v.clone()], delta, cfg)?;
    let mut z = Vec::with_capacity(2);
    let mut xi = Vec::with_capacity(2);
    for s in &par {
        let f = SubmersionFrame::new(bundle, metric, &s.point, cfg)?;
        let e = f.vertical(&s.fields[0]);
        z.push(f.a_star(&f.horizontal(&s.velocity), &e));
        xi.push(e);
    }
    let dz = covariant_fd(&frame.geo, x, (&par[0].point, &z[0]), (&par[1].point, &z[1]), &a0, delta);
    let dxi = covariant_fd(&frame.geo, x, (&par[0].point, &xi[0]), (&par[1].point, &xi[1]), v, delta);
    let nabla_astar = dz - frame.a_star(x, &frame.vertical(&dxi));
    let rhs = frame.inner(&(nabla_astar + &as0), &a0);

    // holonomy extension: derivative of |A*_ċ ξ|² along the geodesic
    let hol = two_sided(metric, Some(bundle), &HolonomySystem { sign: -1.0 }, p, x, &[v.clone()], delta, cfg)?;
    let mut sq = [0.0; 2];
    for (i, s) in hol.iter().enumerate() {
        let f = SubmersionFrame::new(bundle, metric, &s.point, cfg)?;
        let w = f.a_star(&f.horizontal(&s.velocity), &f.vertical(&s.fields[0]));
        sq[i] = f.inner(&w, &w);
    }
    let holonomy_rhs = 0.5 * (sq[1] - sq[0]) / (2.0 * delta) + 2.0 * frame.inner(&as0, &a0);

    let lhs = tau * frame.inner(x, x) * frame.inner(&a0, &a0);
    Ok(WnnTerms { lhs, rhs, residual: lhs - rhs, holonomy_rhs, holonomy_residual: (rhs - holonomy_rhs).abs() })
}

/// `τ|X|²|A*_X V|² - <(∇_X A*)_X V + A*_X S_X V, A*_X V>`; WNN holds where this is nonnegative.
pub fn wnn_residual(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, x: &Vector, v: &Vector, tau: f64, cfg: &EngineConfig) -> Result<f64> {
    Ok(wnn_terms(bundle, metric, p, x, v, tau, cfg)?.residual)
}

/// Max over the vertical geodesic of `|∇_γ' (A*_X γ') + A*_{A*_X γ'} γ'|` with `X` basic.
pub fn check_basic_astar(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, x: &Vector, v: &Vector, span: f64, cfg: &EngineConfig) -> Result<f64> {
    let frame = SubmersionFrame::new(bundle, metric, p, cfg)?;
    require_horizontal(&frame.split, x)?;
    require_vertical(&frame.split, v)?;
    require_totally_geodesic(&frame)?;
    let steps = cfg.steps_for(span).max(40);
    let (curve, fields) = integrate(metric, Some(bundle), &BasicSystem, p, v, &[x.clone()], span, steps, cfg)?;
    let dt = span / steps as f64;
    let k = ((2e-3 / dt).round() as usize).clamp(1, steps / 4);
    let z_at = |i: usize| -> Result<(SubmersionFrame, Vector)> {
        let f = SubmersionFrame::new(bundle, metric, &curve.points[i], cfg)?;
        let z = f.a_star(&f.horizontal(&fields[0][i]), &f.vertical(&curve.velocities[i]));
        Ok((f, z))
    };
    let nodes = 20;
    let mut worst: f64 = 0.0;
    for n in 0..=nodes {
        let i = k + n * (steps - 2 * k) / nodes;
        let (f, z) = z_at(i)?;
        let (_, zm) = z_at(i - k)?;
        let (_, zp) = z_at(i + k)?;
        let vel = &curve.velocities[i];
        let dz = covariant_fd(&f.geo, vel, (&curve.points[i - k], &zm), (&curve.points[i + k], &zp), &z, k as f64 * dt);
        let target = -f.a_star(&z, &f.vertical(vel));
        worst = worst.max(f.norm(&(dz - target)));
    }
    Ok(worst)
}

/// Residuals of the three curvature identities satisfied by a good triple.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TappResiduals {
    /// `|R(X, A*_X V, A*_X V, V)|`
    pub r1: f64,
    /// `|R(X, V, A*_X V, Y) - <∇_X A*_Y V, A*_X V>|`
    pub r2: f64,
    /// `|R(X, V, A*_X V, X)|`, only when `ω_V` is nondegenerate.
    pub r3: Option<f64>,
}

pub fn check_theorem_tapp(bundle: &Bundle, metric: &dyn MetricField, frame: &VertizontalFrame, cfg: &EngineConfig) -> Result<TappResiduals> {
    let (p, x, y, v) = (&frame.p, &frame.x, &frame.y, &frame.v);
    let sf = SubmersionFrame::new(bundle, metric, p, cfg)?;
    require_totally_geodesic(&sf)?;
    let tensor = CurvatureTensor::new(metric, p, cfg)?;
    let w = sf.a_star(x, v);
    let r1 = tensor.eval(x, &w, &w, v).abs();

    // Y basic, V extended as the dual holonomy field along the geodesic of X
    let delta = super::COVARIANT_STEP;
    let by = bundle.projection_differential(p) * y;
    let ends = two_sided(metric, Some(bundle), &HolonomySystem { sign: 1.0 }, p, x, &[v.clone()], delta, cfg)?;
    let mut z = Vec::with_capacity(2);
    for s in &ends {
        let f = SubmersionFrame::new(bundle, metric, &s.point, cfg)?;
        let ys = basic_extension(bundle, metric, &by, &s.point)?;
        z.push(f.a_star(&ys, &f.vertical(&s.fields[0])));
    }
    let dz = covariant_fd(&sf.geo, x, (&ends[0].point, &z[0]), (&ends[1].point, &z[1]), &sf.a_star(y, v), delta);
    let r2 = (tensor.eval(x, v, &w, y) - sf.inner(&dz, &w)).abs();

    let fat = fatness_from_frame(&sf, v)?.verdict == FatnessVerdict::Fat;
    let r3 = fat.then(|| tensor.eval(x, v, &w, x).abs());
    Ok(TappResiduals { r1, r2, r3 })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorollaryResiduals {
    /// Max of `|R(X, Y, Y, V)|` over an orthonormal basis of `ker A_X`.
    pub kernel: f64,
    /// `|R(X, Y, Y, V)|` for the frame's `Y`, only when `ω_V` is nondegenerate.
    pub basic: Option<f64>,
}

pub fn check_corollary_flat(bundle: &Bundle, metric: &dyn MetricField, frame: &VertizontalFrame, cfg: &EngineConfig) -> Result<CorollaryResiduals> {
    let (p, x, y, v) = (&frame.p, &frame.x, &frame.y, &frame.v);
    let sf = SubmersionFrame::new(bundle, metric, p, cfg)?;
    require_totally_geodesic(&sf)?;
    let tensor = CurvatureTensor::new(metric, p, cfg)?;
    let ker = kernel_from_frame(&sf, x)?;
    let kernel = (0..ker.ncols())
        .map(|j| {
            let k = ker.column(j).into_owned();
            tensor.eval(x, &k, &k, v).abs()
        })
        .fold(0.0, f64::max);
    let fat = fatness_from_frame(&sf, v)?.verdict == FatnessVerdict::Fat;
    let basic = fat.then(|| tensor.eval(x, y, y, v).abs());
    Ok(CorollaryResiduals { kernel, basic })
}

/// Max over interior nodes of `|K(ċ, ν) - (½(|ν|²)'' - 3|S_ċ ν|² + |A*_ċ ν|²)|` for the dual
/// holonomy field `ν` along the geodesic of `X`, with `K` unnormalized.
pub fn check_k_identity(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, x: &Vector, v: &Vector, span: f64, cfg: &EngineConfig) -> Result<f64> {
    let split = bundle.splitting(metric, p)?;
    require_horizontal(&split, x)?;
    require_vertical(&split, v)?;
    let steps = cfg.steps_for(span).max(40);
    let (curve, fields) = integrate(metric, Some(bundle), &HolonomySystem { sign: 1.0 }, p, x, &[v.clone()], span, steps, cfg)?;
    let nu = &fields[0];
    let dt = span / steps as f64;
    let k = ((1e-2 / dt).round() as usize).clamp(1, steps / 4);
    let sq: Vec<f64> = curve.points.iter().zip(nu).map(|(q, n)| metric.inner(q, n, n)).collect();
    let nodes = 10;
    let mut worst: f64 = 0.0;
    for n in 0..=nodes {
        let i = k + n * (steps - 2 * k) / nodes;
        let (q, vel) = (&curve.points[i], &curve.velocities[i]);
        let f = SubmersionFrame::new(bundle, metric, q, cfg)?;
        let tensor = CurvatureTensor::new(metric, q, cfg)?;
        let ni = f.vertical(&nu[i]);
        let xh = f.horizontal(vel);
        let lhs = tensor.eval(vel, &ni, &ni, vel);
        let h = k as f64 * dt;
        let second = (sq[i + k] - 2.0 * sq[i] + sq[i - k]) / (h * h);
        let s = f.s(&xh, &ni);
        let a = f.a_star(&xh, &ni);
        let rhs = 0.5 * second - 3.0 * f.inner(&s, &s) + f.inner(&a, &a);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

fn check_adapted(bundle: &Bundle, m1: &dyn MetricField, m2: &dyn MetricField, q: &Vector) -> Result<()> {
    let s1 = bundle.splitting(m1, q)?;
    let (g1, g2) = (m1.matrix(q), m2.matrix(q));
    let h = s1.horizontal_basis();
    let k = s1.action();
    let dh = (h.transpose() * (&g2 - &g1) * h).abs().max();
    let cross = (h.transpose() * &g2 * k).abs().max();
    if dh > 1e-8 || cross > 1e-8 {
        return Err(Error::NotAdapted(format!("horizontal mismatch {dh:.3e}, vertical-horizontal coupling {cross:.3e}")));
    }
    Ok(())
}

/// `P` with `m2(ξ, η) = m1(Pξ, η)` on the vertical space at `q`.
fn relative_orbit(bundle: &Bundle, m1: &dyn MetricField, m2: &dyn MetricField, q: &Vector) -> Result<Matrix> {
    let (s1, s2) = (bundle.splitting(m1, q)?, bundle.splitting(m2, q)?);
    let rel = s1.orbit_inverse() * s2.orbit_tensor();
    let rel = Matrix::from_fn(3, 3, |i, j| rel[(i, j)]);
    let k = s1.action();
    let pinv = s1.orbit_inverse();
    let pinv = Matrix::from_fn(3, 3, |i, j| pinv[(i, j)]);
    Ok(k * rel * pinv * k.transpose() * s1.metric())
}

/// Max over the geodesic of the difference between `A†_ċ ν'` (dual tensor of `m2`) and
/// `A*_ċ ν` (of `m1`), where `ν'` starts at `nu0` and `ν` at `P nu0`.
pub fn dual_inv_check(bundle: &Bundle, m1: &dyn MetricField, m2: &dyn MetricField, p: &Vector, x: &Vector, nu0: &Vector, span: f64, cfg: &EngineConfig) -> Result<f64> {
    let steps = cfg.steps_for(span).max(40);
    let c2 = geodesic(m2, p, x, span, steps, cfg)?;
    for i in [0, steps / 2, steps] {
        check_adapted(bundle, m1, m2, &c2.points[i])?;
    }
    let split = bundle.splitting(m2, p)?;
    require_horizontal(&split, x)?;
    require_vertical(&split, nu0)?;
    let nu_start = relative_orbit(bundle, m1, m2, p)? * nu0;
    let (c1, f1) = integrate(m1, Some(bundle), &HolonomySystem { sign: 1.0 }, p, x, &[nu_start], span, steps, cfg)?;
    let (c2, f2) = integrate(m2, Some(bundle), &HolonomySystem { sign: 1.0 }, p, x, &[nu0.clone()], span, steps, cfg)?;
    let nodes = 20;
    let mut worst: f64 = 0.0;
    for n in 0..=nodes {
        let i = n * steps / nodes;
        let a = SubmersionFrame::new(bundle, m1, &c1.points[i], cfg)?;
        let b = SubmersionFrame::new(bundle, m2, &c2.points[i], cfg)?;
        let lhs = b.a_star(&b.horizontal(&c2.velocities[i]), &b.vertical(&f2[0][i]));
        let rhs = a.a_star(&a.horizontal(&c1.velocities[i]), &a.vertical(&f1[0][i]));
        worst = worst.max(a.norm(&(lhs - rhs)));
    }
    Ok(worst)
}

/// Grid size per direction of the doubly ruled surface comparison.
pub const GOOD_TRIPLE_GRID: usize = 32;

/// Max ambient distance between `exp_{c(t)}(s V(t))` and `exp_{γ(s)}(t X(s))` over the grid,
/// where `V(t), X(s)` are the Jacobi fields with common initial derivative `a_init`.
pub fn good_triple_mismatch(metric: &dyn MetricField, p: &Vector, x: &Vector, v: &Vector, a_init: &Vector, s_max: f64, t_max: f64, cfg: &EngineConfig) -> Result<f64> {
    let cells = GOOD_TRIPLE_GRID - 1;
    let per_cell = |span: f64| cfg.steps_for(span).div_ceil(cells).max(1);
    let (ks, kt) = (per_cell(s_max), per_cell(t_max));
    let (ns, nt) = (cells * ks, cells * kt);
    let c = geodesic(metric, p, x, t_max, nt, cfg)?;
    let gamma = geodesic(metric, p, v, s_max, ns, cfg)?;
    let v_t = jacobi_field(metric, &c, v, a_init, cfg)?;
    let x_s = jacobi_field(metric, &gamma, x, a_init, cfg)?;
    // f1[j][i] = f(s_i, t_j) along the s-geodesics, f2[i][j] along the t-geodesics
    let mut f1 = Vec::with_capacity(GOOD_TRIPLE_GRID);
    for j in 0..GOOD_TRIPLE_GRID {
        let idx = j * kt;
        let g = geodesic(metric, &c.points[idx], &v_t.values[idx], s_max, ns, cfg)?;
        f1.push((0..GOOD_TRIPLE_GRID).map(|i| g.points[i * ks].clone()).collect::<Vec<_>>());
    }
    let mut worst: f64 = 0.0;
    for i in 0..GOOD_TRIPLE_GRID {
        let idx = i * ks;
        let g = geodesic(metric, &gamma.points[idx], &x_s.values[idx], t_max, nt, cfg)?;
        for (j, row) in f1.iter().enumerate() {
            worst = worst.max((&row[i] - &g.points[j * kt]).norm());
        }
    }
    Ok(worst)
}

/// Doubly ruled surface mismatch for the triple `{X, V, -A*_X V}`.
pub fn check_good_triple(bundle: &Bundle, metric: &dyn MetricField, p: &Vector, x: &Vector, v: &Vector, s_max: f64, t_max: f64, cfg: &EngineConfig) -> Result<f64> {
    let frame = SubmersionFrame::new(bundle, metric, p, cfg)?;
    require_horizontal(&frame.split, x)?;
    require_vertical(&frame.split, v)?;
    let a_init = -frame.a_star(x, v);
    good_triple_mismatch(metric, p, x, v, &a_init, s_max, t_max, cfg)
}
