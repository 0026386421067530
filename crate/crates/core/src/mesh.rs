//! Structured background triangulation and the active (cut) submesh.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Axis-aligned rectangle `[min.x, max.x] x [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    /// The square `[-half, half]^2`.
    pub fn centered_square(half: f64) -> Self {
        Self::new(Point::new(-half, -half), Point::new(half, half))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Vertex ids, lower id first.
    pub vertices: [usize; 2],
    /// Incident triangles: one for boundary edges, two for interior edges.
    pub triangles: Vec<usize>,
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        self.triangles.len() == 2
    }
}

/// Uniform triangulation of a rectangle: `n x n` cells, each split along the
/// same diagonal.
#[derive(Debug, Clone)]
pub struct BackgroundMesh {
    pub vertices: Vec<Point>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Local edge `k` of a triangle joins its vertices `k` and `(k + 1) % 3`.
    pub triangle_edges: Vec<[usize; 3]>,
    /// Axis spacing of the grid.
    pub h: f64,
    pub n: usize,
    pub shift: Point,
    pub bbox: BoundingBox,
    edge_lookup: HashMap<(usize, usize), usize>,
}

impl BackgroundMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Twice the signed area of triangle `t`.
    pub fn signed_area2(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        let (u, v) = (b - a, c - a);
        u.x * v.y - u.y * v.x
    }

    pub fn area(&self, t: usize) -> f64 {
        0.5 * self.signed_area2(t).abs()
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        (b - a).norm().max((c - b).norm()).max((a - c).norm())
    }

    /// Id of the edge joining two vertices, if it exists.
    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&(a.min(b), a.max(b))).copied()
    }
}

pub fn build_background_mesh(bbox: BoundingBox, n: usize, shift: Point) -> Result<BackgroundMesh> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "number of subdivisions must be at least 1".into(),
        ));
    }
    let (w, hgt) = (bbox.width(), bbox.height());
    if !(w > 0.0 && hgt > 0.0 && w.is_finite() && hgt.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "degenerate bounding box {w} x {hgt}"
        )));
    }
    let (hx, hy) = (w / n as f64, hgt / n as f64);

    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = bbox.min.x + i as f64 * hx;
            let y = bbox.min.y + j as f64 * hy;
            vertices.push(Point::new(x, y) + shift);
        }
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;

    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }

    let mut edges: Vec<Edge> = Vec::new();
    let mut edge_lookup = HashMap::new();
    let mut triangle_edges = Vec::with_capacity(triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        let mut local = [0; 3];
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let id = *edge_lookup.entry(key).or_insert_with(|| {
                edges.push(Edge {
                    vertices: [key.0, key.1],
                    triangles: Vec::with_capacity(2),
                });
                edges.len() - 1
            });
            edges[id].triangles.push(t);
            local[k] = id;
        }
        triangle_edges.push(local);
    }

    Ok(BackgroundMesh {
        vertices,
        triangles,
        edges,
        triangle_edges,
        h: hx,
        n,
        shift,
        bbox,
        edge_lookup,
    })
}

/// A face shared by two active elements.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorFace {
    pub edge: usize,
    /// Background triangle ids, lower id first.
    pub triangles: [usize; 2],
    /// Positions of the two triangles in [`ActiveMesh::elements`].
    pub elements: [usize; 2],
    /// Unit normal pointing from `triangles[0]` into `triangles[1]`.
    pub normal: Point,
}

/// The background elements cut by the discrete curve.
#[derive(Debug, Clone)]
pub struct ActiveMesh {
    pub background: Arc<BackgroundMesh>,
    /// Sorted background triangle ids.
    pub elements: Vec<usize>,
    pub faces: Vec<InteriorFace>,
    element_index: HashMap<usize, usize>,
}

impl ActiveMesh {
    /// Builds the active mesh from a set of cut triangles. Duplicates are
    /// ignored and the order of `triangles` does not matter.
    pub fn new(
        background: Arc<BackgroundMesh>,
        triangles: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let mut elements: Vec<usize> = triangles.into_iter().collect();
        elements.sort_unstable();
        elements.dedup();
        if elements.is_empty() {
            return Err(Error::EmptyActiveMesh);
        }
        if let Some(&t) = elements.iter().find(|&&t| t >= background.num_triangles()) {
            return Err(Error::InvalidInput(format!("triangle id {t} out of range")));
        }
        let element_index: HashMap<usize, usize> =
            elements.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let faces = interior_faces(&background, &elements, &element_index);
        Ok(Self {
            background,
            elements,
            faces,
            element_index,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Position of a background triangle in the active list.
    pub fn local_index(&self, triangle: usize) -> Option<usize> {
        self.element_index.get(&triangle).copied()
    }

    pub fn h(&self) -> f64 {
        self.background.h
    }
}

fn interior_faces(
    bg: &BackgroundMesh,
    elements: &[usize],
    index: &HashMap<usize, usize>,
) -> Vec<InteriorFace> {
    let mut edge_ids: Vec<usize> = elements
        .iter()
        .flat_map(|&t| bg.triangle_edges[t])
        .collect();
    edge_ids.sort_unstable();
    edge_ids.dedup();

    let mut faces = Vec::new();
    for e in edge_ids {
        let edge = &bg.edges[e];
        if !edge.is_interior() {
            continue;
        }
        let (t0, t1) = (
            edge.triangles[0].min(edge.triangles[1]),
            edge.triangles[0].max(edge.triangles[1]),
        );
        let (Some(&i0), Some(&i1)) = (index.get(&t0), index.get(&t1)) else {
            continue;
        };
        let [a, b] = edge.vertices;
        let tangent = bg.vertices[b] - bg.vertices[a];
        let mut normal = Point::new(tangent.y, -tangent.x).normalize();
        // orient from t0 towards t1: the vertex of t1 off the edge lies on the positive side
        let off = bg.triangles[t1]
            .iter()
            .copied()
            .find(|&v| v != a && v != b)
            .expect("triangle has a third vertex");
        if normal.dot(&(bg.vertices[off] - bg.vertices[a])) < 0.0 {
            normal = -normal;
        }
        faces.push(InteriorFace {
            edge: e,
            triangles: [t0, t1],
            elements: [i0, i1],
            normal,
        });
    }
    faces
}
