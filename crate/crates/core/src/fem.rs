//! Lagrange elements of degree 1 to 3 on triangles and the finite element
//! space on the active mesh.
//!
//! Shape functions are stored as monomial coefficient tables in reference
//! coordinates. The tables, and the tables of every partial derivative up to
//! the element degree, are computed once per degree in exact rational
//! arithmetic and only then rounded to `f64`.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::mesh::{ActiveMesh, InteriorFace, Point};

pub const MAX_DEGREE: usize = 3;

static DIRECTION_NORMALIZATIONS: AtomicUsize = AtomicUsize::new(0);

/// Number of non-unit directions passed to [`directional_derivative`] so far.
pub fn direction_normalizations() -> usize {
    DIRECTION_NORMALIZATIONS.load(Ordering::Relaxed)
}

type Rational = Ratio<i128>;

/// Index of the partial `d^{dx+dy} / dx^dx dy^dy` in a derivative table.
fn partial_index(dx: usize, dy: usize) -> usize {
    let j = dx + dy;
    j * (j + 1) / 2 + dy
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    degree: usize,
    /// Barycentric lattice coordinates `(l0, l1, l2)`, summing to the degree.
    lattice: Vec<[usize; 3]>,
    nodes: Vec<Point>,
    /// Monomial exponents `(a, b)` for `x^a y^b`.
    monomials: Vec<(usize, usize)>,
    /// `partials[partial_index(dx, dy)][shape][monomial]`.
    partials: Vec<Vec<Vec<f64>>>,
}

impl LagrangeBasis {
    /// Equispaced Lagrange basis on the reference triangle `(0,0), (1,0), (0,1)`.
    pub fn new(degree: usize) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&degree) {
            return Err(Error::InvalidInput(format!(
                "polynomial degree must be 1..={MAX_DEGREE}, got {degree}"
            )));
        }
        let p = degree;
        let mut lattice = Vec::new();
        for j in 0..=p {
            for i in 0..=p - j {
                lattice.push([p - i - j, i, j]);
            }
        }
        let monomials: Vec<(usize, usize)> = (0..=p)
            .flat_map(|total| (0..=total).map(move |b| (total - b, b)))
            .collect();
        let n = lattice.len();

        let rational_nodes: Vec<(Rational, Rational)> = lattice
            .iter()
            .map(|l| {
                (
                    Rational::new(l[1] as i128, p as i128),
                    Rational::new(l[2] as i128, p as i128),
                )
            })
            .collect();
        let pow = |x: Rational, k: usize| (0..k).fold(Rational::from_integer(1), |acc, _| acc * x);
        let vandermonde: Vec<Vec<Rational>> = rational_nodes
            .iter()
            .map(|&(x, y)| {
                monomials
                    .iter()
                    .map(|&(a, b)| pow(x, a) * pow(y, b))
                    .collect()
            })
            .collect();
        // columns of the inverse are the shape function coefficients
        let inverse = invert_rational(vandermonde);
        let shapes: Vec<Vec<Rational>> = (0..n)
            .map(|k| (0..n).map(|m| inverse[m][k]).collect())
            .collect();

        let mono_index: BTreeMap<(usize, usize), usize> =
            monomials.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        let num_partials = (p + 1) * (p + 2) / 2;
        let mut partials = vec![Vec::new(); num_partials];
        for j in 0..=p {
            for dy in 0..=j {
                let dx = j - dy;
                let table = shapes
                    .iter()
                    .map(|coeffs| {
                        let mut out = vec![0.0; n];
                        for (m, &(a, b)) in monomials.iter().enumerate() {
                            if a < dx || b < dy || coeffs[m] == Rational::from_integer(0) {
                                continue;
                            }
                            let factor = ((a - dx + 1)..=a).product::<usize>()
                                * ((b - dy + 1)..=b).product::<usize>();
                            let c = coeffs[m] * Rational::from_integer(factor as i128);
                            out[mono_index[&(a - dx, b - dy)]] =
                                *c.numer() as f64 / *c.denom() as f64;
                        }
                        out
                    })
                    .collect();
                partials[partial_index(dx, dy)] = table;
            }
        }

        let nodes = lattice
            .iter()
            .map(|l| Point::new(l[1] as f64 / p as f64, l[2] as f64 / p as f64))
            .collect();
        Ok(Self {
            degree,
            lattice,
            nodes,
            monomials,
            partials,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Reference coordinates of the nodes.
    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn lattice(&self) -> &[[usize; 3]] {
        &self.lattice
    }

    fn monomial_values(&self, xi: Point) -> Vec<f64> {
        self.monomials
            .iter()
            .map(|&(a, b)| xi.x.powi(a as i32) * xi.y.powi(b as i32))
            .collect()
    }

    /// Partial `d^{dx+dy} / dx^dx dy^dy` of every shape function at `xi`.
    pub fn partial(&self, xi: Point, dx: usize, dy: usize) -> Vec<f64> {
        if dx + dy > self.degree {
            return vec![0.0; self.len()];
        }
        let mono = self.monomial_values(xi);
        self.partials[partial_index(dx, dy)]
            .iter()
            .map(|c| c.iter().zip(&mono).map(|(c, m)| c * m).sum())
            .collect()
    }

    /// `j`-th derivative tensors at `xi`: for each shape function the `j + 1`
    /// distinct partials `d^j / dx^(j-k) dy^k`, `k = 0..=j`. Orders above the
    /// degree give zeros.
    pub fn eval(&self, xi: Point, j: usize) -> Vec<Vec<f64>> {
        let per_partial: Vec<Vec<f64>> = (0..=j).map(|k| self.partial(xi, j - k, k)).collect();
        (0..self.len())
            .map(|s| per_partial.iter().map(|v| v[s]).collect())
            .collect()
    }

    /// `j`-th derivative of every shape function along the reference vector `b`.
    pub fn directional(&self, xi: Point, b: Vector2<f64>, j: usize) -> Vec<f64> {
        if j == 0 {
            return self.partial(xi, 0, 0);
        }
        let mut out = vec![0.0; self.len()];
        if j > self.degree {
            return out;
        }
        for k in 0..=j {
            let weight = binomial(j, k) * b.x.powi((j - k) as i32) * b.y.powi(k as i32);
            if weight == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.partial(xi, j - k, k)) {
                *o += weight * v;
            }
        }
        out
    }
}

/// Gauss-Jordan inversion in exact arithmetic; the matrix must be invertible.
fn invert_rational(mut a: Vec<Vec<Rational>>) -> Vec<Vec<Rational>> {
    let n = a.len();
    let zero = Rational::from_integer(0);
    let mut inv: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Rational::from_integer((i == j) as i128))
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| a[r][col] != zero)
            .expect("Vandermonde matrix is invertible");
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for k in 0..n {
            a[col][k] /= d;
            inv[col][k] /= d;
        }
        for r in 0..n {
            if r != col && a[r][col] != zero {
                let f = a[r][col];
                for k in 0..n {
                    let (ak, ik) = (a[col][k], inv[col][k]);
                    a[r][k] -= f * ak;
                    inv[r][k] -= f * ik;
                }
            }
        }
    }
    inv
}

/// Affine map `x = origin + J xi` of a triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub origin: Point,
    pub jacobian: Matrix2<f64>,
    pub inverse: Matrix2<f64>,
    pub det: f64,
}

impl ElementMap {
    pub fn new(vertices: [Point; 3]) -> Self {
        let jacobian =
            Matrix2::from_columns(&[vertices[1] - vertices[0], vertices[2] - vertices[0]]);
        let det = jacobian.determinant();
        let inverse = jacobian.try_inverse().expect("nondegenerate triangle");
        Self {
            origin: vertices[0],
            jacobian,
            inverse,
            det,
        }
    }

    pub fn to_reference(&self, x: Point) -> Point {
        self.inverse * (x - self.origin)
    }

    pub fn to_physical(&self, xi: Point) -> Point {
        self.origin + self.jacobian * xi
    }

    /// Reference vector corresponding to the physical direction `a`.
    pub fn reference_direction(&self, a: Vector2<f64>) -> Vector2<f64> {
        self.inverse * a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Entity {
    Vertex(usize),
    Edge(usize),
    Interior(usize),
}

/// Continuous Lagrange space on the active mesh. No mean-value constraint is
/// imposed here; it enters the linear algebra as a functional.
#[derive(Debug, Clone)]
pub struct FiniteElementSpace {
    pub mesh: Arc<ActiveMesh>,
    pub basis: Arc<LagrangeBasis>,
    element_dofs: Vec<Vec<usize>>,
    maps: Vec<ElementMap>,
    dof_points: Vec<Point>,
}

impl FiniteElementSpace {
    pub fn new(mesh: Arc<ActiveMesh>, degree: usize) -> Result<Self> {
        let basis = Arc::new(LagrangeBasis::new(degree)?);
        let bg = &mesh.background;
        let p = degree;

        let mut keys = Vec::with_capacity(mesh.len());
        for &t in &mesh.elements {
            let verts = bg.triangles[t];
            let local: Vec<(Entity, usize)> = basis
                .lattice()
                .iter()
                .map(|l| {
                    let nonzero: Vec<usize> = (0..3).filter(|&i| l[i] > 0).collect();
                    match nonzero.len() {
                        1 => (Entity::Vertex(verts[nonzero[0]]), 0),
                        2 => {
                            let (i, j) = (nonzero[0], nonzero[1]);
                            let edge = bg
                                .edge_between(verts[i], verts[j])
                                .expect("triangle edge exists");
                            // position counted from the lower vertex id
                            let steps = if verts[i] < verts[j] { l[j] } else { l[i] };
                            (Entity::Edge(edge), steps - 1)
                        }
                        _ => (Entity::Interior(t), 0),
                    }
                })
                .collect();
            keys.push(local);
        }

        let mut numbering: BTreeMap<(Entity, usize), usize> = BTreeMap::new();
        for k in keys.iter().flatten() {
            numbering.insert(*k, 0);
        }
        for (i, v) in numbering.values_mut().enumerate() {
            *v = i;
        }
        let element_dofs: Vec<Vec<usize>> = keys
            .iter()
            .map(|local| local.iter().map(|k| numbering[k]).collect())
            .collect();
        let maps: Vec<ElementMap> = mesh
            .elements
            .iter()
            .map(|&t| ElementMap::new(bg.triangle_points(t)))
            .collect();

        let mut dof_points = vec![Point::zeros(); numbering.len()];
        for (e, dofs) in element_dofs.iter().enumerate() {
            for (&d, xi) in dofs.iter().zip(basis.nodes()) {
                dof_points[d] = maps[e].to_physical(*xi);
            }
        }
        debug_assert!(p <= MAX_DEGREE);
        Ok(Self {
            mesh,
            basis,
            element_dofs,
            maps,
            dof_points,
        })
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn ndofs(&self) -> usize {
        self.dof_points.len()
    }

    pub fn num_elements(&self) -> usize {
        self.element_dofs.len()
    }

    pub fn h(&self) -> f64 {
        self.mesh.h()
    }

    /// Global dofs of active element `e` (index into `mesh.elements`).
    pub fn element_dofs(&self, e: usize) -> &[usize] {
        &self.element_dofs[e]
    }

    pub fn element_map(&self, e: usize) -> &ElementMap {
        &self.maps[e]
    }

    /// Physical coordinates of the Lagrange nodes.
    pub fn dof_points(&self) -> &[Point] {
        &self.dof_points
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.dof_points.iter().map(|&x| f(x)).collect()
    }

    pub fn shape_values(&self, e: usize, x: Point) -> Vec<f64> {
        self.basis.partial(self.maps[e].to_reference(x), 0, 0)
    }

    pub fn shape_gradients(&self, e: usize, x: Point) -> Vec<Vector2<f64>> {
        let map = &self.maps[e];
        let xi = map.to_reference(x);
        let dx = self.basis.partial(xi, 1, 0);
        let dy = self.basis.partial(xi, 0, 1);
        let inv_t = map.inverse.transpose();
        dx.iter()
            .zip(&dy)
            .map(|(&a, &b)| inv_t * Vector2::new(a, b))
            .collect()
    }

    /// `D^j_a` of every shape function of element `e` at `x`, for a unit direction `a`.
    pub fn shape_directional(&self, e: usize, x: Point, a: Vector2<f64>, j: usize) -> Vec<f64> {
        let map = &self.maps[e];
        self.basis
            .directional(map.to_reference(x), map.reference_direction(a), j)
    }

    fn gather(&self, e: usize, coeffs: &[f64], values: &[f64]) -> f64 {
        self.element_dofs[e]
            .iter()
            .zip(values)
            .map(|(&d, v)| coeffs[d] * v)
            .sum()
    }

    pub fn evaluate(&self, coeffs: &[f64], e: usize, x: Point) -> f64 {
        self.gather(e, coeffs, &self.shape_values(e, x))
    }

    pub fn gradient(&self, coeffs: &[f64], e: usize, x: Point) -> Vector2<f64> {
        self.element_dofs[e]
            .iter()
            .zip(self.shape_gradients(e, x))
            .map(|(&d, g)| coeffs[d] * g)
            .sum()
    }
}

/// Reference-coordinate derivative tables of the basis (see [`LagrangeBasis::eval`]).
pub fn eval_basis(basis: &LagrangeBasis, xi: Point, j: usize) -> Vec<Vec<f64>> {
    basis.eval(xi, j)
}

/// `D^j_a v` at `x` in element `e`. A non-unit `a` is normalized and counted.
pub fn directional_derivative(
    space: &FiniteElementSpace,
    coeffs: &[f64],
    e: usize,
    x: Point,
    a: Vector2<f64>,
    j: usize,
) -> f64 {
    let norm = a.norm();
    let a = if (norm - 1.0).abs() > 1e-12 {
        DIRECTION_NORMALIZATIONS.fetch_add(1, Ordering::Relaxed);
        log::warn!("directional derivative along non-unit vector (|a| = {norm}), normalizing");
        a / norm
    } else {
        a
    };
    space.gather(e, coeffs, &space.shape_directional(e, x, a, j))
}

/// `D^j_{n_F} v` from the higher-id neighbour minus the same from the lower-id one.
pub fn face_jump(
    space: &FiniteElementSpace,
    coeffs: &[f64],
    face: &InteriorFace,
    x: Point,
    j: usize,
) -> f64 {
    let [lo, hi] = face.elements;
    directional_derivative(space, coeffs, hi, x, face.normal, j)
        - directional_derivative(space, coeffs, lo, x, face.normal, j)
}

/// `(I - n n^T) grad v` at `x` in element `e`.
pub fn tangential_gradient(
    space: &FiniteElementSpace,
    coeffs: &[f64],
    e: usize,
    x: Point,
    normal: Vector2<f64>,
) -> Vector2<f64> {
    let g = space.gradient(coeffs, e, x);
    g - normal * normal.dot(&g)
}
