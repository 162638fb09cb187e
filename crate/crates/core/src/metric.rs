//! Metric fields on sphere products and vertical deformations of bundle metrics.
//!
//! A metric is an ambient symmetric matrix `M(q)`; only its restriction to the
//! tangent space at `q` is meaningful. Deformations keep the horizontal space and
//! horizontal block of a base metric and replace the orbit tensor `P` by a new one.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::manifold::{Matrix, SphereProduct, Vector};

pub trait MetricField: Send + Sync {
    fn manifold(&self) -> &SphereProduct;

    /// Ambient bilinear form at `q`. Need not be a point of the manifold exactly:
    /// finite-difference stencils evaluate it on chart images only.
    fn matrix(&self, q: &Vector) -> Matrix;

    fn descriptor(&self) -> MetricDescriptor;

    fn inner(&self, q: &Vector, x: &Vector, y: &Vector) -> f64 {
        (x.transpose() * self.matrix(q) * y)[0]
    }

    fn norm(&self, q: &Vector, x: &Vector) -> f64 {
        self.inner(q, x, x).max(0.0).sqrt()
    }
}

pub type SharedMetric = Arc<dyn MetricField>;

/// Metric induced from the Euclidean ambient space.
#[derive(Debug, Clone)]
pub struct InducedMetric {
    manifold: SphereProduct,
}

impl InducedMetric {
    pub fn new(manifold: SphereProduct) -> Self {
        Self { manifold }
    }

    pub fn shared(manifold: SphereProduct) -> SharedMetric {
        Arc::new(Self::new(manifold))
    }
}

impl MetricField for InducedMetric {
    fn manifold(&self) -> &SphereProduct {
        &self.manifold
    }

    fn matrix(&self, q: &Vector) -> Matrix {
        Matrix::identity(q.len(), q.len())
    }

    fn descriptor(&self) -> MetricDescriptor {
        MetricDescriptor::Reference
    }
}

/// Basic function `h = offset + slope * b_0`, where `b_0` is the first ambient
/// coordinate of the base point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicFunction {
    pub offset: f64,
    pub slope: f64,
}

impl BasicFunction {
    pub fn constant(c: f64) -> Self {
        Self { offset: c, slope: 0.0 }
    }

    pub fn value(&self, bundle: &Bundle, q: &Vector) -> f64 {
        self.offset + self.slope * bundle.projection(q)[0]
    }
}

/// How the orbit tensor of the base metric is replaced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VerticalLaw {
    /// `P -> P (1 + tP)^-1`
    Cheeger(f64),
    /// `P -> tP (1 + tP)^-1`
    Regularized(f64),
    /// `P -> cP`
    Scale(f64),
    /// `P -> P / h`
    Warp(BasicFunction),
}

impl VerticalLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            VerticalLaw::Cheeger(t) if !(t >= 0.0 && t.is_finite()) => {
                Err(Error::InvalidParameter(format!("Cheeger deformation needs t >= 0, got {t}")))
            }
            VerticalLaw::Regularized(t) if !(t > 0.0 && t.is_finite()) => {
                Err(Error::InvalidParameter(format!("regularized metric needs t > 0, got {t}")))
            }
            VerticalLaw::Scale(c) if !(c > 0.0 && c.is_finite()) => {
                Err(Error::InvalidParameter(format!("vertical scale must be positive, got {c}")))
            }
            VerticalLaw::Warp(h) if !(h.offset - h.slope.abs() > 0.0) => {
                Err(Error::InvalidParameter(format!("warping function {h:?} is not positive on the base")))
            }
            _ => Ok(()),
        }
    }

    fn apply(&self, bundle: &Bundle, q: &Vector, p: &Matrix3<f64>) -> Matrix3<f64> {
        let id = Matrix3::identity();
        match *self {
            VerticalLaw::Cheeger(t) => p * (id + p * t).try_inverse().unwrap_or(id),
            VerticalLaw::Regularized(t) => p * (id + p * t).try_inverse().unwrap_or(id) * t,
            VerticalLaw::Scale(c) => p * c,
            VerticalLaw::Warp(h) => p / h.value(bundle, q),
        }
    }
}

/// Base metric with its vertical block changed by a [`VerticalLaw`].
#[derive(Clone)]
pub struct DeformedMetric {
    bundle: Bundle,
    base: SharedMetric,
    law: VerticalLaw,
}

impl DeformedMetric {
    pub fn new(bundle: &Bundle, base: SharedMetric, law: VerticalLaw) -> Result<Self> {
        law.validate()?;
        Ok(Self { bundle: bundle.clone(), base, law })
    }

    pub fn shared(bundle: &Bundle, base: SharedMetric, law: VerticalLaw) -> Result<SharedMetric> {
        Ok(Arc::new(Self::new(bundle, base, law)?))
    }

    pub fn law(&self) -> VerticalLaw {
        self.law
    }

    pub fn base(&self) -> &SharedMetric {
        &self.base
    }
}

impl MetricField for DeformedMetric {
    fn manifold(&self) -> &SphereProduct {
        self.bundle.total()
    }

    fn matrix(&self, q: &Vector) -> Matrix {
        // M = M0 + M0 K P^-1 (P' - P) P^-1 K^T M0 with P = K^T M0 K.
        let m0 = self.base.matrix(q);
        let k = self.bundle.action_matrix(q);
        let mk = &m0 * &k;
        let kmk = k.transpose() * &mk;
        let p = Matrix3::from_fn(|i, j| 0.5 * (kmk[(i, j)] + kmk[(j, i)]));
        let Some(pinv) = p.try_inverse() else {
            return m0;
        };
        let d = pinv * (self.law.apply(&self.bundle, q, &p) - p) * pinv;
        let dd = Matrix::from_fn(3, 3, |i, j| d[(i, j)]);
        let mut m = m0 + &mk * dd * mk.transpose();
        m = (&m + m.transpose()) * 0.5;
        m
    }

    fn descriptor(&self) -> MetricDescriptor {
        let base = Box::new(self.base.descriptor());
        match self.law {
            VerticalLaw::Cheeger(t) => MetricDescriptor::Cheeger { t, base },
            VerticalLaw::Regularized(t) => MetricDescriptor::Regularized { t, base },
            VerticalLaw::Scale(c) => MetricDescriptor::VerticalScale { c, base },
            VerticalLaw::Warp(h) => MetricDescriptor::Warped { offset: h.offset, slope: h.slope, base },
        }
    }
}

/// Textual description of a metric on a bundle, e.g. `regularized(100, warped(2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum MetricDescriptor {
    Reference,
    Cheeger { t: f64, base: Box<MetricDescriptor> },
    Regularized { t: f64, base: Box<MetricDescriptor> },
    VerticalScale { c: f64, base: Box<MetricDescriptor> },
    Warped { offset: f64, slope: f64, base: Box<MetricDescriptor> },
}

impl MetricDescriptor {
    pub fn build(&self, bundle: &Bundle) -> Result<SharedMetric> {
        let wrap = |base: &MetricDescriptor, law| DeformedMetric::shared(bundle, base.build(bundle)?, law);
        match self {
            MetricDescriptor::Reference => Ok(InducedMetric::shared(bundle.total().clone())),
            MetricDescriptor::Cheeger { t, base } => wrap(base, VerticalLaw::Cheeger(*t)),
            MetricDescriptor::Regularized { t, base } => wrap(base, VerticalLaw::Regularized(*t)),
            MetricDescriptor::VerticalScale { c, base } => wrap(base, VerticalLaw::Scale(*c)),
            MetricDescriptor::Warped { offset, slope, base } => {
                wrap(base, VerticalLaw::Warp(BasicFunction { offset: *offset, slope: *slope }))
            }
        }
    }

    /// Same descriptor with every Cheeger/regularization parameter replaced by `t`.
    pub fn with_t(&self, t: f64) -> MetricDescriptor {
        match self {
            MetricDescriptor::Cheeger { base, .. } => MetricDescriptor::Cheeger { t, base: base.clone() },
            MetricDescriptor::Regularized { base, .. } => MetricDescriptor::Regularized { t, base: base.clone() },
            other => other.clone(),
        }
    }

    pub fn has_t(&self) -> bool {
        matches!(self, MetricDescriptor::Cheeger { .. } | MetricDescriptor::Regularized { .. })
    }

    fn parse_expr(s: &str) -> Result<MetricDescriptor> {
        let err = || Error::InvalidMetric(s.to_string());
        let s = s.trim();
        if s == "reference" || s == "round" {
            return Ok(MetricDescriptor::Reference);
        }
        let open = s.find('(').ok_or_else(err)?;
        if !s.ends_with(')') {
            return Err(err());
        }
        let name = s[..open].trim();
        let args = split_args(&s[open + 1..s.len() - 1]).ok_or_else(err)?;
        let num = |a: &str| a.trim().parse::<f64>().map_err(|_| err());
        let base = |i: usize| -> Result<Box<MetricDescriptor>> {
            match args.get(i) {
                Some(a) => Ok(Box::new(Self::parse_expr(a)?)),
                None => Ok(Box::new(MetricDescriptor::Reference)),
            }
        };
        let d = match (name, args.len()) {
            ("cheeger", 1 | 2) => MetricDescriptor::Cheeger { t: num(&args[0])?, base: base(1)? },
            ("regularized", 1 | 2) => MetricDescriptor::Regularized { t: num(&args[0])?, base: base(1)? },
            ("vscale", 1 | 2) => MetricDescriptor::VerticalScale { c: num(&args[0])?, base: base(1)? },
            ("warped", 1) => MetricDescriptor::Warped { offset: num(&args[0])?, slope: 1.0, base: Box::new(MetricDescriptor::Reference) },
            ("warped", 2) => MetricDescriptor::Warped { offset: num(&args[0])?, slope: num(&args[1])?, base: Box::new(MetricDescriptor::Reference) },
            _ => return Err(err()),
        };
        Ok(d)
    }
}

/// Splits a comma list at nesting depth zero.
fn split_args(s: &str) -> Option<Vec<String>> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        if depth < 0 {
            return None;
        }
        cur.push(ch);
    }
    if depth != 0 || cur.trim().is_empty() {
        return None;
    }
    out.push(cur);
    Some(out)
}

impl FromStr for MetricDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_expr(&s.to_ascii_lowercase())
    }
}

impl fmt::Display for MetricDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = |base: &MetricDescriptor| match base {
            MetricDescriptor::Reference => String::new(),
            b => format!(", {b}"),
        };
        match self {
            MetricDescriptor::Reference => write!(f, "reference"),
            MetricDescriptor::Cheeger { t, base } => write!(f, "cheeger({t}{})", suffix(base)),
            MetricDescriptor::Regularized { t, base } => write!(f, "regularized({t}{})", suffix(base)),
            MetricDescriptor::VerticalScale { c, base } => write!(f, "vscale({c}{})", suffix(base)),
            MetricDescriptor::Warped { offset, slope, .. } => write!(f, "warped({offset}, {slope})"),
        }
    }
}

impl From<MetricDescriptor> for String {
    fn from(d: MetricDescriptor) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for MetricDescriptor {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn descriptor_round_trip() {
        for s in ["reference", "cheeger(1)", "regularized(100, warped(2, 1))", "vscale(0.5)", "warped(3, 0.5)"] {
            let d: MetricDescriptor = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert_eq!("warped(2)".parse::<MetricDescriptor>().unwrap().to_string(), "warped(2, 1)");
        for bad in ["", "cheeger", "cheeger(x)", "foo(1)", "cheeger(1", "warped()"] {
            assert!(bad.parse::<MetricDescriptor>().is_err(), "{bad}");
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let b = Bundle::hopf();
        for d in ["cheeger(-1)", "regularized(0)", "vscale(0)", "warped(0.5, 1)"] {
            let d: MetricDescriptor = d.parse().unwrap();
            assert!(matches!(d.build(&b), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn deformation_replaces_orbit_tensor_only() {
        let b = Bundle::hopf();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = InducedMetric::shared(b.total().clone());
        let gt = DeformedMetric::new(&b, g.clone(), VerticalLaw::Cheeger(1.0)).unwrap();
        let warped = DeformedMetric::shared(&b, g.clone(), VerticalLaw::Warp(BasicFunction { offset: 2.0, slope: 1.0 })).unwrap();
        let reg = DeformedMetric::new(&b, warped.clone(), VerticalLaw::Regularized(4.0)).unwrap();
        for _ in 0..20 {
            let q = b.total().random_point(&mut rng);
            let s0 = b.splitting(g.as_ref(), &q).unwrap();
            let st = b.splitting(&gt, &q).unwrap();
            assert!((st.orbit_tensor() - Matrix3::identity() * 0.5).norm() < 1e-12);
            let x = s0.horizontal(&b.total().random_tangent(&mut rng, &q));
            let y = s0.horizontal(&b.total().random_tangent(&mut rng, &q));
            let u = s0.action_vector(&Vector3::new(0.3, -0.2, 0.9));
            assert!((gt.inner(&q, &x, &y) - x.dot(&y)).abs() < 1e-12);
            assert!(gt.inner(&q, &x, &u).abs() < 1e-12);
            let h = 2.0 + b.projection(&q)[0];
            let sw = b.splitting(warped.as_ref(), &q).unwrap();
            assert!((sw.orbit_tensor() - Matrix3::identity() / h).norm() < 1e-12);
            let sr = b.splitting(&reg, &q).unwrap();
            let expected = 4.0 / h / (1.0 + 4.0 / h);
            assert!((sr.orbit_tensor() - Matrix3::identity() * expected).norm() < 1e-12);
            assert!((reg.inner(&q, &x, &y) - x.dot(&y)).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_matrix_is_symmetric_positive_on_tangent_space() {
        let b = Bundle::trivial3x4();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m: MetricDescriptor = "cheeger(3)".parse().unwrap();
        let metric = m.build(&b).unwrap();
        for _ in 0..20 {
            let q = b.total().random_point(&mut rng);
            let mm = metric.matrix(&q);
            assert!((&mm - mm.transpose()).norm() < 1e-12);
            let e = b.total().tangent_basis(&q);
            let g = e.transpose() * mm * e;
            assert!(g.symmetric_eigenvalues().min() > 0.0);
        }
    }
}
