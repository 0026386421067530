//! Implicit curves, closest-point projection and reference curvature.

pub mod cut;
pub mod quadrature;

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::mesh::Point;

pub use cut::{
    cut_element_exact, cut_mesh, piecewise_linear_reconstruction, Backend, CutElement, CutMesh,
    CutQuadrature, Segment,
};

/// Gradients smaller than this are treated as singular.
pub const MIN_GRADIENT_NORM: f64 = 1e-10;

const PROJECTION_MAX_ITERATIONS: usize = 50;

/// A user supplied level set function with its first and second derivatives.
pub trait ImplicitFunction: Send + Sync {
    fn value(&self, x: Point) -> f64;
    fn gradient(&self, x: Point) -> Vector2<f64>;
    fn hessian(&self, x: Point) -> Matrix2<f64>;
}

#[derive(Clone)]
pub enum CurveKind {
    /// Signed distance `|x - center| - radius`.
    Circle {
        center: Point,
        radius: f64,
    },
    /// `(x - cx)^2 / a2 + (y - cy)^2 / b2 - level`.
    Ellipse {
        center: Point,
        a2: f64,
        b2: f64,
        level: f64,
    },
    /// `a x + b y + c`.
    Line {
        a: f64,
        b: f64,
        c: f64,
    },
    Analytic(Arc<dyn ImplicitFunction>),
}

impl fmt::Debug for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Circle { center, radius } => {
                write!(f, "Circle({}, {}; r={radius})", center.x, center.y)
            }
            Self::Ellipse {
                center,
                a2,
                b2,
                level,
            } => {
                write!(
                    f,
                    "Ellipse(({}, {}); a2={a2}, b2={b2}, level={level})",
                    center.x, center.y
                )
            }
            Self::Line { a, b, c } => write!(f, "Line({a}, {b}, {c})"),
            Self::Analytic(_) => write!(f, "Analytic"),
        }
    }
}

/// Closed-form parametrization of a curve, used by the exact cut backend.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Parametrization {
    Circle { center: Point, radius: f64 },
    Ellipse { center: Point, a: f64, b: f64 },
    Line { origin: Point, direction: Point },
}

impl Parametrization {
    pub(crate) fn point(&self, t: f64) -> Point {
        match *self {
            Self::Circle { center, radius } => center + radius * Point::new(t.cos(), t.sin()),
            Self::Ellipse { center, a, b } => center + Point::new(a * t.cos(), b * t.sin()),
            Self::Line { origin, direction } => origin + t * direction,
        }
    }

    pub(crate) fn speed(&self, t: f64) -> f64 {
        match *self {
            Self::Circle { radius, .. } => radius,
            Self::Ellipse { a, b, .. } => {
                (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt()
            }
            Self::Line { .. } => 1.0,
        }
    }

    /// Parameter of a point known to lie on the curve.
    pub(crate) fn parameter_of(&self, x: Point) -> f64 {
        match *self {
            Self::Circle { center, .. } => {
                let d = x - center;
                d.y.atan2(d.x).rem_euclid(TAU)
            }
            Self::Ellipse { center, a, b } => {
                let d = x - center;
                (d.y / b).atan2(d.x / a).rem_euclid(TAU)
            }
            Self::Line { origin, direction } => (x - origin).dot(&direction),
        }
    }

    pub(crate) fn is_closed(&self) -> bool {
        !matches!(self, Self::Line { .. })
    }
}

#[derive(Debug, Clone)]
pub struct LevelSetGeometry {
    pub kind: CurveKind,
}

impl LevelSetGeometry {
    pub fn circle(center: Point, radius: f64) -> Self {
        Self {
            kind: CurveKind::Circle { center, radius },
        }
    }

    pub fn unit_circle() -> Self {
        Self::circle(Point::zeros(), 1.0)
    }

    pub fn ellipse(center: Point, a2: f64, b2: f64, level: f64) -> Self {
        Self {
            kind: CurveKind::Ellipse {
                center,
                a2,
                b2,
                level,
            },
        }
    }

    /// `x^2 / 0.64 + y^2 - 0.25`, semi-axes 0.4 and 0.5.
    pub fn reference_ellipse() -> Self {
        Self::ellipse(Point::zeros(), 0.64, 1.0, 0.25)
    }

    pub fn line(a: f64, b: f64, c: f64) -> Self {
        Self {
            kind: CurveKind::Line { a, b, c },
        }
    }

    pub fn analytic(f: Arc<dyn ImplicitFunction>) -> Self {
        Self {
            kind: CurveKind::Analytic(f),
        }
    }

    /// Parses `circle` (unit circle), `circle:cx,cy,r`, `ellipse`, `ellipse:a2,b2,level` or `line:a,b,c`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, args) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (spec.trim(), None),
        };
        let numbers = |args: Option<&str>, count: usize| -> Result<Vec<f64>> {
            let args = args.ok_or_else(|| {
                Error::InvalidInput(format!("geometry '{spec}' needs {count} parameters"))
            })?;
            let v = args
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidInput(format!("geometry '{spec}': {e}")))?;
            if v.len() != count || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "geometry '{spec}' needs {count} finite parameters"
                )));
            }
            Ok(v)
        };
        let geom = match name {
            "circle" if args.is_none() => Self::unit_circle(),
            "circle" => {
                let v = numbers(args, 3)?;
                if v[2] <= 0.0 {
                    return Err(Error::InvalidInput("circle radius must be positive".into()));
                }
                Self::circle(Point::new(v[0], v[1]), v[2])
            }
            "ellipse" if args.is_none() => Self::reference_ellipse(),
            "ellipse" => {
                let v = numbers(args, 3)?;
                if v.iter().any(|&x| x <= 0.0) {
                    return Err(Error::InvalidInput(
                        "ellipse parameters must be positive".into(),
                    ));
                }
                Self::ellipse(Point::zeros(), v[0], v[1], v[2])
            }
            "line" => {
                let v = numbers(args, 3)?;
                if v[0] == 0.0 && v[1] == 0.0 {
                    return Err(Error::InvalidInput("line normal must be nonzero".into()));
                }
                Self::line(v[0], v[1], v[2])
            }
            _ => return Err(Error::InvalidInput(format!("unknown geometry '{spec}'"))),
        };
        Ok(geom)
    }

    pub fn phi(&self, x: Point) -> f64 {
        match &self.kind {
            CurveKind::Circle { center, radius } => (x - center).norm() - radius,
            CurveKind::Ellipse {
                center,
                a2,
                b2,
                level,
            } => {
                let d = x - center;
                d.x * d.x / a2 + d.y * d.y / b2 - level
            }
            CurveKind::Line { a, b, c } => a * x.x + b * x.y + c,
            CurveKind::Analytic(f) => f.value(x),
        }
    }

    pub fn grad_phi(&self, x: Point) -> Vector2<f64> {
        match &self.kind {
            CurveKind::Circle { center, .. } => {
                let d = x - center;
                let r = d.norm();
                if r == 0.0 {
                    Vector2::zeros()
                } else {
                    d / r
                }
            }
            CurveKind::Ellipse { center, a2, b2, .. } => {
                let d = x - center;
                Vector2::new(2.0 * d.x / a2, 2.0 * d.y / b2)
            }
            CurveKind::Line { a, b, .. } => Vector2::new(*a, *b),
            CurveKind::Analytic(f) => f.gradient(x),
        }
    }

    pub fn hess_phi(&self, x: Point) -> Matrix2<f64> {
        match &self.kind {
            CurveKind::Circle { center, .. } => {
                let d = x - center;
                let r = d.norm();
                if r == 0.0 {
                    return Matrix2::zeros();
                }
                let n = d / r;
                (Matrix2::identity() - n * n.transpose()) / r
            }
            CurveKind::Ellipse { a2, b2, .. } => Matrix2::new(2.0 / a2, 0.0, 0.0, 2.0 / b2),
            CurveKind::Line { .. } => Matrix2::zeros(),
            CurveKind::Analytic(f) => f.hessian(x),
        }
    }

    /// `grad phi / |grad phi|`.
    pub fn normal(&self, x: Point) -> Result<Vector2<f64>> {
        let g = self.grad_phi(x);
        let norm = g.norm();
        if norm < MIN_GRADIENT_NORM {
            return Err(Error::SingularGeometry(norm));
        }
        Ok(g / norm)
    }

    /// True when `phi` is a signed distance function.
    pub fn is_signed_distance(&self) -> bool {
        match &self.kind {
            CurveKind::Circle { .. } => true,
            CurveKind::Line { a, b, .. } => (a.hypot(*b) - 1.0).abs() < 1e-15,
            _ => false,
        }
    }

    pub(crate) fn parametrization(&self) -> Option<Parametrization> {
        match &self.kind {
            CurveKind::Circle { center, radius } => Some(Parametrization::Circle {
                center: *center,
                radius: *radius,
            }),
            CurveKind::Ellipse {
                center,
                a2,
                b2,
                level,
            } => Some(Parametrization::Ellipse {
                center: *center,
                a: (a2 * level).sqrt(),
                b: (b2 * level).sqrt(),
            }),
            CurveKind::Line { a, b, c } => {
                let g2 = a * a + b * b;
                let g = g2.sqrt();
                Some(Parametrization::Line {
                    origin: Point::new(-c * a / g2, -c * b / g2),
                    direction: Point::new(-b / g, a / g),
                })
            }
            CurveKind::Analytic(_) => None,
        }
    }

    /// Closest point `p(x)` on the zero level set.
    pub fn closest_point(&self, x: Point) -> Result<Point> {
        match &self.kind {
            CurveKind::Circle { center, radius } => {
                let d = x - center;
                let r = d.norm();
                if r == 0.0 {
                    return Err(Error::ProjectionFailure { x: x.x, y: x.y });
                }
                Ok(center + d * (radius / r))
            }
            CurveKind::Line { a, b, c } => {
                let g = Vector2::new(*a, *b);
                Ok(x - (a * x.x + b * x.y + c) / g.norm_squared() * g)
            }
            _ => self.project_newton(x),
        }
    }

    /// Newton iteration on `phi(y) = 0`, `(x - y) x grad phi(y) = 0`, started
    /// from the foot of a gradient projection.
    fn project_newton(&self, x: Point) -> Result<Point> {
        let fail = || Error::ProjectionFailure { x: x.x, y: x.y };
        let scale = 1.0 + x.norm();
        let mut y = x;
        let mut iterations = 0;
        // predictor: move along the gradient until close to the curve
        while iterations < PROJECTION_MAX_ITERATIONS {
            iterations += 1;
            let g = self.grad_phi(y);
            let g2 = g.norm_squared();
            if g2 < MIN_GRADIENT_NORM * MIN_GRADIENT_NORM {
                return Err(fail());
            }
            let step = self.phi(y) / g2 * g;
            y -= step;
            if step.norm() < 1e-6 * scale {
                break;
            }
        }
        while iterations < PROJECTION_MAX_ITERATIONS {
            iterations += 1;
            let g = self.grad_phi(y);
            let hs = self.hess_phi(y);
            let r = x - y;
            let f = Vector2::new(self.phi(y), r.x * g.y - r.y * g.x);
            let jac = Matrix2::new(
                g.x,
                g.y,
                -g.y + r.x * hs[(1, 0)] - r.y * hs[(0, 0)],
                g.x + r.x * hs[(1, 1)] - r.y * hs[(0, 1)],
            );
            let delta = jac.lu().solve(&f).ok_or_else(fail)?;
            y -= delta;
            if !y.iter().all(|v| v.is_finite()) {
                return Err(fail());
            }
            if delta.norm() <= 1e-15 * scale {
                break;
            }
        }
        if iterations >= PROJECTION_MAX_ITERATIONS && self.phi(y).abs() > 1e-12 {
            return Err(fail());
        }
        Ok(y)
    }

    /// Closest-point extension `u^e(x) = u(p(x))`.
    pub fn extend_scalar(&self, u: impl Fn(Point) -> f64, x: Point) -> Result<f64> {
        Ok(u(self.closest_point(x)?))
    }

    /// `-(div n) n` with `n = grad phi / |grad phi|`.
    pub fn exact_mean_curvature_vector(&self, x: Point) -> Result<Vector2<f64>> {
        let g = self.grad_phi(x);
        let norm = g.norm();
        if norm < MIN_GRADIENT_NORM {
            return Err(Error::SingularGeometry(norm));
        }
        let hs = self.hess_phi(x);
        let div_n = (hs.trace() * norm * norm - (g.transpose() * hs * g)[(0, 0)]) / norm.powi(3);
        Ok(-div_n * g / norm)
    }
}
