//! Closed-form geometry of the ambient space S²×S².
//!
//! Points are pairs of unit vectors in R³, tangents are pairs of vectors
//! orthogonal to the respective factor points. The metric, the product
//! structure `P`, the complex structures `J1`, `J2`, the curvature tensor,
//! geodesics and parallel transport all have exact closed forms here; no
//! finite differences enter this module.

use nalgebra::Vector3;

use crate::{GeomError, Result};

/// Tolerance for the exact (closed-form) invariants of this module.
pub const EXACT_TOL: f64 = 1e-12;

/// A point of S²×S²: a pair of unit 3-vectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmbientPoint {
    pub p: Vector3<f64>,
    pub q: Vector3<f64>,
}

impl AmbientPoint {
    /// Builds a point, checking both factors are unit within `EXACT_TOL`.
    pub fn new(p: Vector3<f64>, q: Vector3<f64>) -> Result<Self> {
        if (p.norm() - 1.0).abs() > EXACT_TOL || (q.norm() - 1.0).abs() > EXACT_TOL {
            return Err(GeomError::Usage(format!(
                "factors must be unit vectors: |p| = {}, |q| = {}",
                p.norm(),
                q.norm()
            )));
        }
        Ok(Self { p, q })
    }

    /// Builds a point, renormalizing both factors.
    pub fn project(p: Vector3<f64>, q: Vector3<f64>) -> Self {
        Self {
            p: p.normalize(),
            q: q.normalize(),
        }
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.p - other.p).norm() <= tol && (self.q - other.q).norm() <= tol
    }
}

/// A tangent vector of S²×S² at a base point.
///
/// Constructors re-project each factor onto the tangent plane of its base
/// (`v ← v - (v·p)p`), so arithmetic never drifts off the tangent space.
#[derive(Clone, Copy, Debug)]
pub struct AmbientTangent {
    pub base: AmbientPoint,
    pub v: Vector3<f64>,
    pub w: Vector3<f64>,
}

impl AmbientTangent {
    pub fn new(base: AmbientPoint, v: Vector3<f64>, w: Vector3<f64>) -> Self {
        Self {
            base,
            v: v - base.p * v.dot(&base.p),
            w: w - base.q * w.dot(&base.q),
        }
    }

    pub fn zero(base: AmbientPoint) -> Self {
        Self {
            base,
            v: Vector3::zeros(),
            w: Vector3::zeros(),
        }
    }

    /// Raw inner product, no base-point check. See [`metric_g`] for the
    /// checked operation.
    pub fn dot(&self, other: &Self) -> f64 {
        self.v.dot(&other.v) + self.w.dot(&other.w)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            base: self.base,
            v: self.v * s,
            w: self.w * s,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            base: self.base,
            v: self.v + other.v,
            w: self.w + other.w,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            base: self.base,
            v: self.v - other.v,
            w: self.w - other.w,
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn normalize(&self) -> Self {
        self.scale(1.0 / self.norm())
    }

    /// The tangent as a flat 6-vector `(v, w)`; used for sign conventions.
    pub fn flat(&self) -> [f64; 6] {
        [self.v.x, self.v.y, self.v.z, self.w.x, self.w.y, self.w.z]
    }
}

fn same_base(a: &AmbientTangent, b: &AmbientTangent) -> Result<()> {
    if a.base.approx_eq(&b.base, 1e-9) {
        Ok(())
    } else {
        Err(GeomError::Usage(
            "tangent vectors have mismatched base points".into(),
        ))
    }
}

/// Product metric `g(Y,Z) = v_Y·v_Z + w_Y·w_Z`.
pub fn metric_g(y: &AmbientTangent, z: &AmbientTangent) -> Result<f64> {
    same_base(y, z)?;
    Ok(y.dot(z))
}

/// Product structure `P(v,w) = (v,-w)`.
pub fn product_p(y: &AmbientTangent) -> AmbientTangent {
    AmbientTangent {
        base: y.base,
        v: y.v,
        w: -y.w,
    }
}

/// Which complex structure of the Kähler pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JWhich {
    J1,
    J2,
}

/// Complex structures `J1(v,w) = (p∧v, q∧w)`, `J2(v,w) = (p∧v, -(q∧w))`.
pub fn complex_j(which: JWhich, y: &AmbientTangent) -> AmbientTangent {
    let jv = y.base.p.cross(&y.v);
    let jw = y.base.q.cross(&y.w);
    AmbientTangent {
        base: y.base,
        v: jv,
        w: match which {
            JWhich::J1 => jw,
            JWhich::J2 => -jw,
        },
    }
}

/// Curvature tensor of the product metric,
/// `R̄(U,Y,Z,W) = ½{g(Y,Z)g(U,W) - g(U,Z)g(Y,W) + g(PY,Z)g(PU,W) - g(PU,Z)g(PY,W)}`.
pub fn ambient_r(
    u: &AmbientTangent,
    y: &AmbientTangent,
    z: &AmbientTangent,
    w: &AmbientTangent,
) -> Result<f64> {
    same_base(u, y)?;
    same_base(u, z)?;
    same_base(u, w)?;
    let pu = product_p(u);
    let py = product_p(y);
    Ok(0.5
        * (y.dot(z) * u.dot(w) - u.dot(z) * y.dot(w) + py.dot(z) * pu.dot(w)
            - pu.dot(z) * py.dot(w)))
}

fn factor_exp(p: Vector3<f64>, v: Vector3<f64>, t: f64) -> Vector3<f64> {
    let s = v.norm();
    if s < 1e-300 {
        return p;
    }
    let theta = s * t;
    p * theta.cos() + v / s * theta.sin()
}

/// Exponential map: great-circle motion in each factor.
///
/// `dir` need not be unit; arc length scales with its g-norm.
pub fn geodesic_exp(start: &AmbientPoint, dir: &AmbientTangent, t: f64) -> AmbientPoint {
    AmbientPoint {
        p: factor_exp(start.p, dir.v, t),
        q: factor_exp(start.q, dir.w, t),
    }
}

/// A unit-speed geodesic of S²×S².
#[derive(Clone, Copy, Debug)]
pub struct Geodesic {
    pub start: AmbientPoint,
    pub direction: AmbientTangent,
}

impl Geodesic {
    /// Checks that the direction has g-norm 1 within `EXACT_TOL`.
    pub fn new(start: AmbientPoint, direction: AmbientTangent) -> Result<Self> {
        if (direction.norm() - 1.0).abs() > EXACT_TOL {
            return Err(GeomError::Usage(format!(
                "geodesic direction must have unit g-norm, got {}",
                direction.norm()
            )));
        }
        Ok(Self { start, direction })
    }

    pub fn at(&self, t: f64) -> AmbientPoint {
        geodesic_exp(&self.start, &self.direction, t)
    }

    /// Velocity `γ'(t)`.
    pub fn velocity(&self, t: f64) -> AmbientTangent {
        let base = self.at(t);
        AmbientTangent {
            base,
            v: factor_velocity(self.start.p, self.direction.v, t),
            w: factor_velocity(self.start.q, self.direction.w, t),
        }
    }
}

fn factor_velocity(p: Vector3<f64>, v: Vector3<f64>, t: f64) -> Vector3<f64> {
    let s = v.norm();
    if s < 1e-300 {
        return Vector3::zeros();
    }
    let theta = s * t;
    (-p * theta.sin() + v / s * theta.cos()) * s
}

/// Transports a tangent in one sphere factor along the great circle through
/// `p` with velocity `v`: rotation in the span of `{p, v̂}`, identity on the
/// orthogonal complement. Exact.
fn factor_transport(p: Vector3<f64>, v: Vector3<f64>, u: Vector3<f64>, t: f64) -> Vector3<f64> {
    let s = v.norm();
    if s < 1e-300 {
        return u;
    }
    let vh = v / s;
    let n = p.cross(&vh);
    let theta = s * t;
    let vh_t = -p * theta.sin() + vh * theta.cos();
    vh_t * u.dot(&vh) + n * u.dot(&n)
}

/// Parallel transport of `y0` (based at `geo.start`) along `geo` to time `t`.
pub fn transport_frame(geo: &Geodesic, y0: &AmbientTangent, t: f64) -> Result<AmbientTangent> {
    same_base(y0, &AmbientTangent::zero(geo.start))?;
    let base = geo.at(t);
    Ok(AmbientTangent {
        base,
        v: factor_transport(geo.start.p, geo.direction.v, y0.v, t),
        w: factor_transport(geo.start.q, geo.direction.w, y0.w, t),
    })
}
