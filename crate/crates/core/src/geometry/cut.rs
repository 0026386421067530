//! Quadrature on the pieces `K = T ∩ Γ_h` of the discrete curve.
//!
//! Two realizations of `Γ_h` are provided. The exact backend integrates over
//! the zero level set itself: closed-form curves are split at their edge
//! crossings in parameter space, generic level sets are traced by a height
//! function over the chord between the two crossings. The piecewise-linear
//! backend uses the zero set of the nodal interpolant of `phi`.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::Vector2;

use super::quadrature::gauss_on_interval;
use super::{CurveKind, LevelSetGeometry, Parametrization};
use crate::error::{Error, Result};
use crate::mesh::{ActiveMesh, BackgroundMesh, Point};

/// How the discrete curve `Γ_h` is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Quadrature on the exact zero level set.
    Exact,
    /// Zero set of the piecewise-linear nodal interpolant of `phi`.
    PiecewiseLinear,
}

/// Quadrature data of one cut element.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CutElement {
    /// Background triangle id.
    pub triangle: usize,
    pub nodes: Vec<Point>,
    /// Arc-length weights.
    pub weights: Vec<f64>,
    pub normals: Vec<Vector2<f64>>,
    pub tangents: Vec<Vector2<f64>>,
}

impl CutElement {
    fn new(triangle: usize) -> Self {
        Self {
            triangle,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Length of the intersection.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn push(&mut self, node: Point, weight: f64, normal: Vector2<f64>) {
        self.nodes.push(node);
        self.weights.push(weight);
        self.normals.push(normal);
        self.tangents.push(Vector2::new(-normal.y, normal.x));
    }
}

/// Per-element curve quadrature, aligned with [`ActiveMesh::elements`].
#[derive(Debug, Clone, Default)]
pub struct CutQuadrature {
    pub elements: Vec<CutElement>,
}

impl CutQuadrature {
    pub fn total_measure(&self) -> f64 {
        self.elements.iter().map(CutElement::measure).sum()
    }

    pub fn num_nodes(&self) -> usize {
        self.elements.iter().map(CutElement::len).sum()
    }
}

/// Straight piece of the piecewise-linear reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub triangle: usize,
    pub a: Point,
    pub b: Point,
    pub normal: Vector2<f64>,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }
}

/// Active mesh together with the curve quadrature that defines it.
#[derive(Debug, Clone)]
pub struct CutMesh {
    pub active: Arc<ActiveMesh>,
    pub quadrature: CutQuadrature,
    /// Reconstructed segments (piecewise-linear backend only).
    pub segments: Vec<Segment>,
    pub backend: Backend,
}

impl CutMesh {
    pub fn h(&self) -> f64 {
        self.active.h()
    }
}

/// Pieces shorter than this multiple of `h` (touching at a vertex) are dropped.
pub const MIN_PIECE_LENGTH: f64 = 1e-10;

/// Cuts every background triangle and keeps those with an intersection of
/// positive length.
pub fn cut_mesh(
    bg: Arc<BackgroundMesh>,
    geom: &LevelSetGeometry,
    backend: Backend,
    gauss: usize,
) -> Result<CutMesh> {
    if gauss == 0 {
        return Err(Error::InvalidInput(
            "curve quadrature needs at least one point".into(),
        ));
    }
    let (cuts, segments) = match backend {
        Backend::Exact => {
            let mut cuts = Vec::new();
            for t in 0..bg.num_triangles() {
                if let Some(c) = cut_element_exact(geom, &bg, t, gauss)? {
                    cuts.push(c);
                }
            }
            (cuts, Vec::new())
        }
        Backend::PiecewiseLinear => piecewise_linear_reconstruction(&bg, geom, gauss)?,
    };
    let min_measure = MIN_PIECE_LENGTH * bg.h;
    let cuts: Vec<CutElement> = cuts
        .into_iter()
        .filter(|c| c.measure() > min_measure)
        .collect();
    let active = ActiveMesh::new(bg, cuts.iter().map(|c| c.triangle))?;
    // cuts were produced in increasing triangle order, matching the active list
    debug_assert!(cuts
        .iter()
        .zip(&active.elements)
        .all(|(c, &t)| c.triangle == t));
    Ok(CutMesh {
        active: Arc::new(active),
        quadrature: CutQuadrature { elements: cuts },
        segments,
        backend,
    })
}

fn barycentric(tri: &[Point; 3], x: Point) -> [f64; 3] {
    let cross = |u: Point, v: Point| u.x * v.y - u.y * v.x;
    let total = cross(tri[1] - tri[0], tri[2] - tri[0]);
    let l1 = cross(x - tri[0], tri[2] - tri[0]) / total;
    let l2 = cross(tri[1] - tri[0], x - tri[0]) / total;
    [1.0 - l1 - l2, l1, l2]
}

fn contains(tri: &[Point; 3], x: Point) -> bool {
    barycentric(tri, x).iter().all(|&l| l >= 0.0)
}

/// Real roots in `[0, 1]` of `a s^2 + b s + c`.
fn unit_interval_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    const TOL: f64 = 1e-14;
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    let mut roots = Vec::with_capacity(2);
    if a.abs() <= 1e-15 * scale {
        if b != 0.0 {
            roots.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Vec::new();
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q != 0.0 {
            roots.push(q / a);
            roots.push(c / q);
        } else {
            roots.push(0.0);
        }
    }
    roots
        .into_iter()
        .filter(|s| (-TOL..=1.0 + TOL).contains(s))
        .map(|s| s.clamp(0.0, 1.0))
        .collect()
}

/// Intersections of the segment `p -> q` with a closed-form curve, as segment parameters.
fn edge_roots(geom: &LevelSetGeometry, p: Point, q: Point) -> Vec<f64> {
    let e = q - p;
    match &geom.kind {
        CurveKind::Circle { center, radius } => {
            let d = p - center;
            unit_interval_roots(
                e.norm_squared(),
                2.0 * d.dot(&e),
                d.norm_squared() - radius * radius,
            )
        }
        CurveKind::Ellipse {
            center,
            a2,
            b2,
            level,
        } => {
            let d = p - center;
            unit_interval_roots(
                e.x * e.x / a2 + e.y * e.y / b2,
                2.0 * (d.x * e.x / a2 + d.y * e.y / b2),
                d.x * d.x / a2 + d.y * d.y / b2 - level,
            )
        }
        CurveKind::Line { .. } => unit_interval_roots(0.0, geom.grad_phi(p).dot(&e), geom.phi(p)),
        CurveKind::Analytic(_) => unreachable!("analytic curves have no closed-form edge roots"),
    }
}

/// Quadrature on `T ∩ {phi = 0}` for background triangle `t`, or `None`
/// when the intersection is empty.
pub fn cut_element_exact(
    geom: &LevelSetGeometry,
    bg: &BackgroundMesh,
    t: usize,
    gauss: usize,
) -> Result<Option<CutElement>> {
    match geom.parametrization() {
        Some(param) => cut_parametric(geom, param, bg, t, gauss),
        None => cut_traced(geom, bg, t, gauss),
    }
}

fn cut_parametric(
    geom: &LevelSetGeometry,
    param: Parametrization,
    bg: &BackgroundMesh,
    t: usize,
    gauss: usize,
) -> Result<Option<CutElement>> {
    let tri = bg.triangle_points(t);
    let mut params = Vec::new();
    for k in 0..3 {
        let (p, q) = (tri[k], tri[(k + 1) % 3]);
        for s in edge_roots(geom, p, q) {
            params.push(param.parameter_of(p + s * (q - p)));
        }
    }

    let mut intervals = Vec::new();
    if params.is_empty() {
        // a closed curve may lie entirely inside the element
        if param.is_closed() && contains(&tri, param.point(0.0)) {
            intervals.push((0.0, TAU));
        }
    } else {
        params.sort_by(f64::total_cmp);
        let mut candidates: Vec<(f64, f64)> = params.windows(2).map(|w| (w[0], w[1])).collect();
        if param.is_closed() {
            candidates.push((params[params.len() - 1], params[0] + TAU));
        }
        for (a, b) in candidates {
            if b - a <= 1e-14 * (1.0 + a.abs()) {
                continue;
            }
            if contains(&tri, param.point(0.5 * (a + b))) {
                intervals.push((a, b));
            }
        }
    }
    if intervals.is_empty() {
        return Ok(None);
    }

    let mut cut = CutElement::new(t);
    for (a, b) in intervals {
        for (s, w) in gauss_on_interval(gauss, a, b) {
            let x = param.point(s);
            cut.push(x, w * param.speed(s), geom.normal(x)?);
        }
    }
    Ok(Some(cut))
}

/// Generic level sets: locate the two boundary crossings by bisection and
/// integrate over the arc written as a height function above their chord.
fn cut_traced(
    geom: &LevelSetGeometry,
    bg: &BackgroundMesh,
    t: usize,
    gauss: usize,
) -> Result<Option<CutElement>> {
    const SAMPLES: usize = 8;
    let snap = 1e-12 * bg.h;
    let value = |x: Point| {
        let v = geom.phi(x);
        if v.abs() < snap {
            snap
        } else {
            v
        }
    };

    let tri = bg.triangle_points(t);
    let mut crossings = Vec::new();
    for k in 0..3 {
        let (p, q) = (tri[k], tri[(k + 1) % 3]);
        let at = |s: f64| p + s * (q - p);
        let mut s0 = 0.0;
        let mut v0 = value(p);
        for i in 1..=SAMPLES {
            let s1 = i as f64 / SAMPLES as f64;
            let v1 = value(at(s1));
            if (v0 > 0.0) != (v1 > 0.0) {
                let (mut lo, mut hi, vlo) = (s0, s1, v0);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if (value(at(mid)) > 0.0) == (vlo > 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                crossings.push(at(0.5 * (lo + hi)));
            }
            s0 = s1;
            v0 = v1;
        }
    }

    match crossings.len() {
        0 => return Ok(None),
        2 => {}
        n if n > 2 => {
            return Err(Error::MultipleComponentCut {
                element: t,
                crossings: n,
            })
        }
        n => {
            return Err(Error::DegenerateCut {
                element: t,
                reason: format!("{n} boundary crossing(s)"),
            });
        }
    }

    let (a, b) = (crossings[0], crossings[1]);
    let chord = b - a;
    if chord.norm() == 0.0 {
        return Ok(None);
    }
    let lift = Vector2::new(-chord.y, chord.x).normalize();
    let degenerate = |reason: &str| Error::DegenerateCut {
        element: t,
        reason: reason.to_string(),
    };

    let mut cut = CutElement::new(t);
    let mut height = 0.0;
    for (s, w) in gauss_on_interval(gauss, 0.0, 1.0) {
        let base = a + s * chord;
        let mut converged = false;
        for _ in 0..50 {
            let x = base + height * lift;
            let slope = geom.grad_phi(x).dot(&lift);
            if slope.abs() < super::MIN_GRADIENT_NORM {
                return Err(degenerate("curve is tangent to the lifting direction"));
            }
            let step = geom.phi(x) / slope;
            height -= step;
            if step.abs() <= 1e-15 * (1.0 + height.abs()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(degenerate("height function did not converge"));
        }
        let x = base + height * lift;
        let g = geom.grad_phi(x);
        let dheight = -g.dot(&chord) / g.dot(&lift);
        let speed = (chord + dheight * lift).norm();
        cut.push(x, w * speed, geom.normal(x)?);
    }
    Ok(Some(cut))
}

/// Zero set of the nodal interpolant of `phi`: at most one segment per
/// triangle, with a constant normal. Nodal values below `1e-12 h` in
/// magnitude are snapped to `+1e-12 h`.
pub fn piecewise_linear_reconstruction(
    bg: &BackgroundMesh,
    geom: &LevelSetGeometry,
    gauss: usize,
) -> Result<(Vec<CutElement>, Vec<Segment>)> {
    let snap = 1e-12 * bg.h;
    let nodal: Vec<f64> = bg
        .vertices
        .iter()
        .map(|&x| {
            let v = geom.phi(x);
            if v.abs() < snap {
                snap
            } else {
                v
            }
        })
        .collect();

    let mut cuts = Vec::new();
    let mut segments = Vec::new();
    for (t, tri) in bg.triangles.iter().enumerate() {
        let vals = tri.map(|v| nodal[v]);
        let positive = vals.iter().filter(|&&v| v > 0.0).count();
        if positive == 0 || positive == 3 {
            continue;
        }
        let pts = bg.triangle_points(t);
        let mut ends = Vec::with_capacity(2);
        for k in 0..3 {
            let (i, j) = (k, (k + 1) % 3);
            if (vals[i] > 0.0) != (vals[j] > 0.0) {
                let s = vals[i] / (vals[i] - vals[j]);
                ends.push(pts[i] + s * (pts[j] - pts[i]));
            }
        }
        debug_assert_eq!(ends.len(), 2);

        // gradient of the linear interpolant
        let (e1, e2) = (pts[1] - pts[0], pts[2] - pts[0]);
        let det = e1.x * e2.y - e1.y * e2.x;
        let (d1, d2) = (vals[1] - vals[0], vals[2] - vals[0]);
        let grad = Vector2::new(d1 * e2.y - d2 * e1.y, -d1 * e2.x + d2 * e1.x) / det;
        let normal = grad.normalize();

        let seg = Segment {
            triangle: t,
            a: ends[0],
            b: ends[1],
            normal,
        };
        let mut cut = CutElement::new(t);
        let len = seg.length();
        for (s, w) in gauss_on_interval(gauss, 0.0, 1.0) {
            cut.push(seg.a + s * (seg.b - seg.a), w * len, normal);
        }
        segments.push(seg);
        cuts.push(cut);
    }
    Ok((cuts, segments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ImplicitFunction;
    use crate::mesh::{build_background_mesh, BoundingBox};
    use nalgebra::Matrix2;

    fn mesh(n: usize) -> Arc<BackgroundMesh> {
        Arc::new(
            build_background_mesh(BoundingBox::centered_square(1.5), n, Point::zeros()).unwrap(),
        )
    }

    /// Length of the unit circle inside a triangle by midpoint sampling of the
    /// angle against the triangle indicator.
    fn arc_length_oracle(tri: &[Point; 3]) -> f64 {
        let samples = 400_000;
        let mut inside = 0usize;
        for k in 0..samples {
            let t = TAU * (k as f64 + 0.5) / samples as f64;
            if contains(tri, Point::new(t.cos(), t.sin())) {
                inside += 1;
            }
        }
        TAU * inside as f64 / samples as f64
    }

    #[test]
    fn arc_length_in_single_triangle() {
        let tri = [
            Point::new(0.9, -0.2),
            Point::new(1.2, -0.2),
            Point::new(0.9, 0.3),
        ];
        let bg = BackgroundMesh_from(tri);
        let cut = cut_element_exact(&LevelSetGeometry::unit_circle(), &bg, 0, 6)
            .unwrap()
            .unwrap();
        // the arc runs from where the circle leaves through the hypotenuse
        // (above) to where it leaves through the bottom edge y = -0.2
        let t_bottom = (-0.2f64).asin();
        // hypotenuse through (1.2, -0.2) and (0.9, 0.3): (x - 0.9) / 0.3 + (y + 0.2) / 0.5 = 1
        let f = |t: f64| (t.cos() - 0.9) / 0.3 + (t.sin() + 0.2) / 0.5 - 1.0;
        let (mut lo, mut hi) = (0.0, 0.9f64.acos());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let exact = 0.5 * (lo + hi) - t_bottom;
        assert!(
            (cut.measure() - exact).abs() < 1e-12,
            "{} vs {exact}",
            cut.measure()
        );
        assert!((cut.measure() - arc_length_oracle(&tri)).abs() < 1e-4);
    }

    #[allow(non_snake_case)]
    fn BackgroundMesh_from(tri: [Point; 3]) -> BackgroundMesh {
        let mut m =
            build_background_mesh(BoundingBox::centered_square(1.0), 1, Point::zeros()).unwrap();
        m.vertices = tri.to_vec();
        m.triangles = vec![[0, 1, 2]];
        m
    }

    #[test]
    fn circumference_is_exact() {
        for n in [6, 12, 25] {
            let cm =
                cut_mesh(mesh(n), &LevelSetGeometry::unit_circle(), Backend::Exact, 4).unwrap();
            assert!((cm.quadrature.total_measure() - TAU).abs() < 1e-10);
            for el in &cm.quadrature.elements {
                assert!(el.weights.iter().all(|&w| w > 0.0));
                for ((x, n), t) in el.nodes.iter().zip(&el.normals).zip(&el.tangents) {
                    assert!(LevelSetGeometry::unit_circle().phi(*x).abs() < 1e-10);
                    assert!((n.norm() - 1.0).abs() < 1e-12);
                    assert!(n.dot(t).abs() < 1e-12);
                    assert!((n - x / x.norm()).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn ellipse_perimeter() {
        // Ramanujan's second approximation is accurate to ~1e-10 for this aspect ratio
        let (a, b) = (0.4f64, 0.5f64);
        let hh = ((a - b) / (a + b)).powi(2);
        let perimeter =
            std::f64::consts::PI * (a + b) * (1.0 + 3.0 * hh / (10.0 + (4.0 - 3.0 * hh).sqrt()));
        let cm = cut_mesh(
            mesh(24),
            &LevelSetGeometry::reference_ellipse(),
            Backend::Exact,
            8,
        )
        .unwrap();
        assert!((cm.quadrature.total_measure() - perimeter).abs() < 1e-9);
    }

    #[test]
    fn straight_cut_is_exact_for_any_rule() {
        let g = LevelSetGeometry::line(1.0, 0.3, -0.25);
        let one = cut_mesh(mesh(5), &g, Backend::Exact, 1).unwrap();
        let eight = cut_mesh(mesh(5), &g, Backend::Exact, 8).unwrap();
        for (a, b) in one
            .quadrature
            .elements
            .iter()
            .zip(&eight.quadrature.elements)
        {
            assert!((a.measure() - b.measure()).abs() < 1e-14);
        }
    }

    #[test]
    fn piecewise_linear_line_is_exact() {
        let g = LevelSetGeometry::line(1.0, 0.0, -0.25);
        let cm = cut_mesh(mesh(6), &g, Backend::PiecewiseLinear, 2).unwrap();
        assert!((cm.quadrature.total_measure() - 3.0).abs() < 1e-12);
        assert_eq!(cm.segments.len(), cm.active.len());
    }

    #[test]
    fn piecewise_linear_circle_converges_at_second_order() {
        let mut defects = Vec::new();
        for n in [6, 12, 24, 48] {
            let cm = cut_mesh(
                mesh(n),
                &LevelSetGeometry::unit_circle(),
                Backend::PiecewiseLinear,
                2,
            )
            .unwrap();
            let len = cm.quadrature.total_measure();
            assert!(len < TAU);
            defects.push(TAU - len);
        }
        for w in defects.windows(2).skip(1) {
            let rate = (w[0] / w[1]).log2();
            assert!((rate - 2.0).abs() < 0.1, "rate {rate}");
        }
    }

    #[test]
    fn uniform_sign_triangle_has_no_segment() {
        let g = LevelSetGeometry::circle(Point::zeros(), 0.1);
        let bg = BackgroundMesh_from([
            Point::new(1.0, 1.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 2.0),
        ]);
        let (cuts, segs) = piecewise_linear_reconstruction(&bg, &g, 2).unwrap();
        assert!(cuts.is_empty() && segs.is_empty());
    }

    #[test]
    fn tiny_circle_inside_one_triangle() {
        let bg = mesh(4);
        let tri = bg.triangle_points(9);
        let centroid = (tri[0] + tri[1] + tri[2]) / 3.0;
        let g = LevelSetGeometry::circle(centroid, 0.01);
        let cm = cut_mesh(bg, &g, Backend::Exact, 8).unwrap();
        assert_eq!(cm.active.elements, vec![9]);
        assert!(cm.active.faces.is_empty());
        assert!((cm.quadrature.total_measure() - TAU * 0.01).abs() < 1e-14);
    }

    #[test]
    fn distant_circle_is_rejected() {
        let g = LevelSetGeometry::circle(Point::zeros(), 10.0);
        assert!(matches!(
            cut_mesh(mesh(4), &g, Backend::Exact, 4),
            Err(Error::EmptyActiveMesh)
        ));
    }

    /// Brute-force activity: sample each triangle densely and look for a sign change.
    fn active_by_sampling(bg: &BackgroundMesh, g: &LevelSetGeometry) -> Vec<usize> {
        let m = 60;
        (0..bg.num_triangles())
            .filter(|&t| {
                let [a, b, c] = bg.triangle_points(t);
                let (mut pos, mut neg) = (false, false);
                // strictly interior lattice points, so touching at a vertex does not count
                for i in 1..m {
                    for j in 1..m - i {
                        let x =
                            a + (b - a) * (i as f64 / m as f64) + (c - a) * (j as f64 / m as f64);
                        let v = g.phi(x);
                        pos |= v > 0.0;
                        neg |= v < 0.0;
                    }
                }
                pos && neg
            })
            .collect()
    }

    #[test]
    fn active_set_matches_sampling_oracle() {
        let g = LevelSetGeometry::unit_circle();
        let bg = mesh(6);
        let cm = cut_mesh(bg.clone(), &g, Backend::Exact, 4).unwrap();
        let oracle = active_by_sampling(&bg, &g);
        assert_eq!(cm.active.elements, oracle);
        let oracle_faces = bg
            .edges
            .iter()
            .filter(|e| e.is_interior() && e.triangles.iter().all(|t| oracle.contains(t)))
            .count();
        assert_eq!(cm.active.faces.len(), oracle_faces);
    }

    struct Wavy;

    impl ImplicitFunction for Wavy {
        fn value(&self, x: Point) -> f64 {
            x.norm_squared() - 1.0 + 0.05 * (3.0 * x.x).sin()
        }
        fn gradient(&self, x: Point) -> Vector2<f64> {
            Vector2::new(2.0 * x.x + 0.15 * (3.0 * x.x).cos(), 2.0 * x.y)
        }
        fn hessian(&self, x: Point) -> Matrix2<f64> {
            Matrix2::new(2.0 - 0.45 * (3.0 * x.x).sin(), 0.0, 0.0, 2.0)
        }
    }

    #[test]
    fn traced_cut_agrees_with_parametric_on_circle() {
        struct Circle;
        impl ImplicitFunction for Circle {
            fn value(&self, x: Point) -> f64 {
                x.norm() - 1.0
            }
            fn gradient(&self, x: Point) -> Vector2<f64> {
                x / x.norm()
            }
            fn hessian(&self, x: Point) -> Matrix2<f64> {
                let n = x / x.norm();
                (Matrix2::identity() - n * n.transpose()) / x.norm()
            }
        }
        let g = LevelSetGeometry::analytic(Arc::new(Circle));
        let cm = cut_mesh(mesh(12), &g, Backend::Exact, 8).unwrap();
        assert!((cm.quadrature.total_measure() - TAU).abs() < 1e-9);
        let reference = cut_mesh(
            mesh(12),
            &LevelSetGeometry::unit_circle(),
            Backend::Exact,
            8,
        )
        .unwrap();
        assert_eq!(cm.active.elements, reference.active.elements);
    }

    #[test]
    fn traced_cut_of_perturbed_circle() {
        let g = LevelSetGeometry::analytic(Arc::new(Wavy));
        let coarse = cut_mesh(mesh(24), &g, Backend::Exact, 8)
            .unwrap()
            .quadrature
            .total_measure();
        let fine = cut_mesh(mesh(48), &g, Backend::Exact, 8)
            .unwrap()
            .quadrature
            .total_measure();
        assert!((coarse - fine).abs() < 1e-9);
    }

    #[test]
    fn traced_cut_rejects_multiple_components() {
        // a thin horizontal band crossing one triangle twice
        struct Band;
        impl ImplicitFunction for Band {
            fn value(&self, x: Point) -> f64 {
                (x.y - 0.5).powi(2) - 0.01
            }
            fn gradient(&self, x: Point) -> Vector2<f64> {
                Vector2::new(0.0, 2.0 * (x.y - 0.5))
            }
            fn hessian(&self, _: Point) -> Matrix2<f64> {
                Matrix2::new(0.0, 0.0, 0.0, 2.0)
            }
        }
        let g = LevelSetGeometry::analytic(Arc::new(Band));
        let bg = BackgroundMesh_from([
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ]);
        assert!(matches!(
            cut_element_exact(&g, &bg, 0, 4),
            Err(Error::MultipleComponentCut { crossings: 4, .. })
        ));
    }
}
