//! Sectional curvature of a vertical warping `g̃ = g|_H + h⁻¹ g|_V` by a basic function `h`,
//! expressed through quantities of `g`. All curvatures are unnormalized:
//! `K(a, b) = R(a, b, b, a)` for the given vectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{require_horizontal, require_vertical, SubmersionFrame};
use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::lie::Quaternion;
use crate::manifold::Vector;
use crate::metric::MetricField;
use crate::riemann::{CurvatureTensor, EngineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneKind {
    Hh,
    Vv,
    Vh,
}

impl PlaneKind {
    pub const ALL: [PlaneKind; 3] = [PlaneKind::Hh, PlaneKind::Vv, PlaneKind::Vh];

    pub fn name(self) -> &'static str {
        match self {
            PlaneKind::Hh => "hh",
            PlaneKind::Vv => "vv",
            PlaneKind::Vh => "vh",
        }
    }
}

impl fmt::Display for PlaneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlaneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlaneKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown plane kind `{s}`")))
    }
}

/// Which power of `h` multiplies `dh(X)²` in the vertizontal formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpFormula {
    /// `-¼ (-2 Hess h(X,X) + 3 dh(X)²) h⁻² |V|²`, as usually printed.
    Published,
    /// `-¼ (-2 Hess h(X,X) h⁻² + 3 dh(X)² h⁻³) |V|²`, matching the warped-product formula.
    #[default]
    Corrected,
}

const DH_STEP: f64 = 1e-4;
const HESS_STEP: f64 = 1e-3;

fn check_basic(bundle: &Bundle, h: &dyn Fn(&Vector) -> f64, p: &Vector) -> Result<f64> {
    let h0 = h(p);
    let probes = [
        Quaternion::new(0.0, 1.0, 0.0, 0.0),
        Quaternion::new(0.5, 0.5, -0.5, 0.5),
        Quaternion::new(0.6, 0.0, 0.0, 0.8),
        Quaternion::new(0.0, 0.0, 0.8, -0.6),
    ];
    let mut var: f64 = 0.0;
    for g in probes {
        var = var.max((h(&bundle.act(g, p)?) - h0).abs());
    }
    if var > 1e-8 {
        return Err(Error::NotBasic(var));
    }
    if !(h0 > 0.0) {
        return Err(Error::InvalidParameter(format!("warping function must be positive, got {h0}")));
    }
    Ok(h0)
}

/// Evaluates the curvature of the warped metric on the plane spanned by `a, b`:
/// `hh` takes two horizontal vectors, `vv` two g-orthogonal vertical vectors, `vh` a
/// horizontal then a vertical vector.
pub fn warped_sectional(
    bundle: &Bundle,
    metric: &dyn MetricField,
    h: &dyn Fn(&Vector) -> f64,
    p: &Vector,
    plane: PlaneKind,
    a: &Vector,
    b: &Vector,
    formula: WarpFormula,
    cfg: &EngineConfig,
) -> Result<f64> {
    let h0 = check_basic(bundle, h, p)?;
    let frame = SubmersionFrame::new(bundle, metric, p, cfg)?;
    let tensor = CurvatureTensor::new(metric, p, cfg)?;
    let geo = &frame.geo;
    let chart = &geo.chart;
    let n = chart.dim();
    let at = |c: &Vector| h(&chart.point(c));
    let dh = Vector::from_fn(n, |i, _| {
        let e = Vector::from_fn(n, |j, _| if i == j { DH_STEP } else { 0.0 });
        (at(&e) - at(&-&e)) / (2.0 * DH_STEP)
    });
    let dh_of = |x: &Vector| dh.dot(&geo.coords(x));
    let hi = 1.0 / h0;
    match plane {
        PlaneKind::Hh => {
            require_horizontal(&frame.split, a)?;
            require_horizontal(&frame.split, b)?;
            let gram = frame.inner(a, a) * frame.inner(b, b) - frame.inner(a, b).powi(2);
            let kb = bundle.base_curvature() * gram;
            Ok((1.0 - hi) * kb + hi * tensor.eval(a, b, b, a))
        }
        PlaneKind::Vv => {
            require_vertical(&frame.split, a)?;
            require_vertical(&frame.split, b)?;
            let (na, nb) = (frame.inner(a, a), frame.inner(b, b));
            let cross = frame.inner(a, b);
            if cross.abs() > 1e-8 * (na * nb).sqrt().max(1e-300) {
                return Err(Error::InvalidParameter(format!("vertical vectors are not orthogonal (g = {cross:.3e})")));
            }
            let kg = tensor.eval(a, b, b, a);
            let (saa, sbb, sab) = (
                frame.second_fundamental_form(a, a),
                frame.second_fundamental_form(b, b),
                frame.second_fundamental_form(a, b),
            );
            let kf = kg + frame.inner(&saa, &sbb) - frame.inner(&sab, &sab);
            let grad_sq = (dh.transpose() * &geo.g_inv * &dh)[0];
            Ok((hi - hi * hi) * kf + hi * hi * kg - 0.25 * hi.powi(4) * na * nb * grad_sq
                - 0.5 * hi.powi(3) * dh_of(&saa) * nb
                - 0.5 * hi.powi(3) * dh_of(&sbb) * na)
        }
        PlaneKind::Vh => {
            let (x, v) = (a, b);
            require_horizontal(&frame.split, x)?;
            require_vertical(&frame.split, v)?;
            let xc = geo.coords(x);
            let step = HESS_STEP / xc.norm().max(1e-300);
            let second = (at(&(&xc * step)) - 2.0 * h0 + at(&(&xc * -step))) / (step * step);
            let hess = second - dh.dot(&geo.gamma.contract(&xc, &xc));
            let dhx = dh_of(x);
            let astar = frame.a_star(x, v);
            let s = frame.s(x, v);
            let nv = frame.inner(v, v);
            let derivative_terms = match formula {
                WarpFormula::Published => (-2.0 * hess + 3.0 * dhx * dhx) * hi * hi,
                WarpFormula::Corrected => -2.0 * hess * hi * hi + 3.0 * dhx * dhx * hi.powi(3),
            };
            Ok(tensor.eval(x, v, v, x) * hi - hi * (1.0 - hi) * frame.inner(&astar, &astar) - hi * hi * dhx * frame.inner(&s, v)
                - 0.25 * derivative_terms * nv)
        }
    }
}
