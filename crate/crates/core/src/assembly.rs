//! Bilinear and linear forms on the active mesh.
//!
//! Every matrix is built from element (or face) matrices whose upper triangle
//! is computed and mirrored. Element matrices are evaluated in parallel and
//! inserted in element order, so the result is bitwise symmetric and does not
//! depend on the number of threads.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::FiniteElementSpace;
use crate::geometry::quadrature::{gauss_on_interval, triangle_rule_for_degree};
use crate::geometry::{cut_mesh, Backend, CutMesh, CutQuadrature, LevelSetGeometry};
use crate::mesh::{BackgroundMesh, Point};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Face jumps plus normal derivatives on the curve.
    Proposed,
    /// First-order face jumps only.
    PureFace,
    /// `c_T h^alpha (n . grad w, n . grad v)` over the active triangles.
    NormalGradient,
    /// `c_T h (grad w, grad v)` over the active triangles.
    FullGradient,
    None,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Proposed,
        Variant::PureFace,
        Variant::NormalGradient,
        Variant::FullGradient,
        Variant::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Proposed => "proposed",
            Variant::PureFace => "pure_face",
            Variant::NormalGradient => "normal_gradient",
            Variant::FullGradient => "full_gradient",
            Variant::None => "none",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Variant::Proposed),
            "face" | "pure_face" => Ok(Variant::PureFace),
            "normalgrad" | "normal_gradient" => Ok(Variant::NormalGradient),
            "fullgrad" | "full_gradient" => Ok(Variant::FullGradient),
            "none" => Ok(Variant::None),
            other => Err(Error::InvalidInput(format!(
                "unknown stabilization '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizationConfig {
    pub variant: Variant,
    pub gamma: f64,
    /// `c_{F,j}`, `j = 1..=p`.
    pub c_f: Vec<f64>,
    /// `c_{Gamma,j}`, `j = 1..=p`.
    pub c_gamma: Vec<f64>,
    pub alpha: f64,
    pub c_t: f64,
    /// Codimension of the curve; the face term carries `h^{1 - cd}`.
    pub cd: u32,
}

impl Default for StabilizationConfig {
    fn default() -> Self {
        Self {
            variant: Variant::None,
            gamma: 1.0,
            c_f: Vec::new(),
            c_gamma: Vec::new(),
            alpha: 1.0,
            c_t: 0.1,
            cd: 1,
        }
    }
}

impl StabilizationConfig {
    pub fn proposed(gamma: f64, c_f: Vec<f64>, c_gamma: Vec<f64>) -> Self {
        Self {
            variant: Variant::Proposed,
            gamma,
            c_f,
            c_gamma,
            ..Self::default()
        }
    }

    /// `gamma = 1`, `c_{F,j} = c_{Gamma,j} = c0 * ratio^{-j}`.
    pub fn geometric(p: usize, c0: f64, ratio: f64) -> Self {
        let c: Vec<f64> = (1..=p).map(|j| c0 * ratio.powi(-(j as i32))).collect();
        Self::proposed(1.0, c.clone(), c)
    }

    /// Constants of the Laplace-Beltrami study: `2.5 * 10^{-j}`.
    pub fn laplace_beltrami(p: usize) -> Self {
        Self::geometric(p, 2.5, 10.0)
    }

    /// Constants of the mass matrix study: `0.03 * 20^{-j}`.
    pub fn mass(p: usize) -> Self {
        Self::geometric(p, 0.03, 20.0)
    }

    /// First-order face jumps with constant `c` and no `h` weight.
    pub fn pure_face(c: f64) -> Self {
        Self {
            variant: Variant::PureFace,
            gamma: 0.0,
            c_f: vec![c],
            ..Self::default()
        }
    }

    pub fn normal_gradient(c_t: f64, alpha: f64) -> Self {
        Self {
            variant: Variant::NormalGradient,
            c_t,
            alpha,
            ..Self::default()
        }
    }

    pub fn full_gradient(c: f64) -> Self {
        Self {
            variant: Variant::FullGradient,
            c_t: c,
            ..Self::default()
        }
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.cd < 1 {
            return Err(Error::InvalidInput("codimension must be at least 1".into()));
        }
        let constants = self.c_f.iter().chain(&self.c_gamma).chain([&self.c_t]);
        if constants.clone().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidInput(
                "stabilization constants must be finite and nonnegative".into(),
            ));
        }
        if !self.gamma.is_finite() || !self.alpha.is_finite() {
            return Err(Error::InvalidInput("gamma and alpha must be finite".into()));
        }
        match self.variant {
            Variant::Proposed if self.c_f.len() < p || self.c_gamma.len() < p => Err(Error::InvalidInput(format!(
                "the proposed stabilization needs {p} face and {p} surface constants, got {} and {}",
                self.c_f.len(),
                self.c_gamma.len()
            ))),
            Variant::PureFace if self.c_f.is_empty() => Err(Error::InvalidInput("pure face stabilization needs c_F".into())),
            _ => {
                if self.variant == Variant::Proposed && !(0.0..=1.0).contains(&self.gamma) {
                    log::warn!("gamma = {} lies outside [0, 1]", self.gamma);
                }
                Ok(())
            }
        }
    }

    /// The configuration actually assembled: the pure face variant becomes the
    /// proposed one with `gamma = 0`, `c_Gamma = 0` and `c_F = (c, 0, ..., 0)`.
    pub fn effective(&self, p: usize) -> Self {
        match self.variant {
            Variant::PureFace => {
                let mut c_f = vec![0.0; p];
                c_f[0] = self.c_f.first().copied().unwrap_or(0.0);
                Self {
                    variant: Variant::Proposed,
                    gamma: 0.0,
                    c_f,
                    c_gamma: vec![0.0; p],
                    ..self.clone()
                }
            }
            _ => self.clone(),
        }
    }

    /// Every stabilization constant multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        Self {
            c_f: self.c_f.iter().map(|c| c * t).collect(),
            c_gamma: self.c_gamma.iter().map(|c| c * t).collect(),
            c_t: self.c_t * t,
            ..self.clone()
        }
    }
}

/// Matrix, right-hand side and mean-value functional of one discrete problem.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// `w_i = int_{Gamma_h} phi_i`, present when the mean-zero constraint applies.
    pub constraint_weights: Option<Vec<f64>>,
    pub h: f64,
    pub p: usize,
    pub config: StabilizationConfig,
}

/// Cut mesh, finite element space and geometry of one refinement level.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub geometry: LevelSetGeometry,
    pub cut: CutMesh,
    pub space: FiniteElementSpace,
}

impl Discretization {
    pub fn new(
        geometry: LevelSetGeometry,
        bg: Arc<BackgroundMesh>,
        p: usize,
        backend: Backend,
        gauss: usize,
    ) -> Result<Self> {
        let cut = cut_mesh(bg, &geometry, backend, gauss)?;
        let space = FiniteElementSpace::new(cut.active.clone(), p)?;
        Ok(Self {
            geometry,
            cut,
            space,
        })
    }

    pub fn h(&self) -> f64 {
        self.space.h()
    }

    pub fn p(&self) -> usize {
        self.space.degree()
    }

    pub fn ndofs(&self) -> usize {
        self.space.ndofs()
    }

    pub fn quadrature(&self) -> &CutQuadrature {
        &self.cut.quadrature
    }
}

/// Symmetric local matrix on a list of distinct global dofs.
struct Local {
    dofs: Vec<usize>,
    values: Vec<f64>,
}

impl Local {
    fn new(dofs: Vec<usize>) -> Self {
        let n = dofs.len();
        Self {
            dofs,
            values: vec![0.0; n * n],
        }
    }

    /// Adds `weight * v v^T` to the upper triangle.
    fn add_outer(&mut self, v: &[f64], weight: f64) {
        let n = self.dofs.len();
        for a in 0..n {
            let wa = weight * v[a];
            for b in a..n {
                self.values[a * n + b] += wa * v[b];
            }
        }
    }

    /// Adds `weight * (g_a . g_b)` to the upper triangle.
    fn add_gram(&mut self, g: &[Vector2<f64>], weight: f64) {
        let n = self.dofs.len();
        for a in 0..n {
            for b in a..n {
                self.values[a * n + b] += weight * g[a].dot(&g[b]);
            }
        }
    }

    fn mirror(mut self) -> Self {
        let n = self.dofs.len();
        for a in 0..n {
            for b in 0..a {
                self.values[a * n + b] = self.values[b * n + a];
            }
        }
        self
    }
}

fn collect(n: usize, locals: Vec<Local>) -> CsrMatrix {
    let mut t = Vec::with_capacity(locals.iter().map(|l| l.values.len()).sum());
    for local in locals {
        let local = local.mirror();
        let m = local.dofs.len();
        for (a, &i) in local.dofs.iter().enumerate() {
            for (b, &j) in local.dofs.iter().enumerate() {
                t.push((i, j, local.values[a * m + b]));
            }
        }
    }
    CsrMatrix::from_triplets(n, &t).expect("dofs are in range")
}

fn element_loop<F>(space: &FiniteElementSpace, f: F) -> Result<CsrMatrix>
where
    F: Fn(usize) -> Result<Local> + Sync + Send,
{
    let locals = (0..space.num_elements())
        .into_par_iter()
        .map(f)
        .collect::<Result<Vec<_>>>()?;
    Ok(collect(space.ndofs(), locals))
}

/// `a_h(w, v) = (P grad w, P grad v)_{Gamma_h}` with the per-node normals.
pub fn assemble_ah(space: &FiniteElementSpace, quad: &CutQuadrature) -> CsrMatrix {
    element_loop(space, |e| {
        let mut local = Local::new(space.element_dofs(e).to_vec());
        let cut = &quad.elements[e];
        for q in 0..cut.len() {
            let n = cut.normals[q];
            let g: Vec<Vector2<f64>> = space
                .shape_gradients(e, cut.nodes[q])
                .into_iter()
                .map(|g| g - n * n.dot(&g))
                .collect();
            local.add_gram(&g, cut.weights[q]);
        }
        Ok(local)
    })
    .expect("infallible")
}

/// `(w, v)_{Gamma_h}`.
pub fn assemble_mass(space: &FiniteElementSpace, quad: &CutQuadrature) -> CsrMatrix {
    element_loop(space, |e| {
        let mut local = Local::new(space.element_dofs(e).to_vec());
        let cut = &quad.elements[e];
        for q in 0..cut.len() {
            local.add_outer(&space.shape_values(e, cut.nodes[q]), cut.weights[q]);
        }
        Ok(local)
    })
    .expect("infallible")
}

/// `(w, v)` over the full active triangles.
pub fn assemble_bulk_mass(space: &FiniteElementSpace) -> CsrMatrix {
    let rule = triangle_rule_for_degree(2 * space.degree());
    element_loop(space, |e| {
        let mut local = Local::new(space.element_dofs(e).to_vec());
        let map = space.element_map(e);
        for (xi, w) in &rule {
            local.add_outer(&space.basis.partial(*xi, 0, 0), w * map.det.abs());
        }
        Ok(local)
    })
    .expect("infallible")
}

/// `h^{2(j - 1 + gamma)}`.
fn order_weight(h: f64, j: usize, gamma: f64) -> f64 {
    h.powf(2.0 * (j as f64 - 1.0 + gamma))
}

/// Face part of the proposed stabilization:
/// `sum_j c_{F,j} h^{2(j-1+gamma)} h^{1-cd} ([D^j_{n_F} w], [D^j_{n_F} v])_F` over interior faces.
pub fn assemble_sh_face(space: &FiniteElementSpace, config: &StabilizationConfig) -> CsrMatrix {
    let p = space.degree();
    let config = config.effective(p);
    let h = space.h();
    let mesh = &space.mesh;
    let bg = &mesh.background;
    let rule = gauss_on_interval(2 * p, 0.0, 1.0);
    let locals: Vec<Local> = mesh
        .faces
        .par_iter()
        .map(|face| {
            let [lo, hi] = face.elements;
            let mut dofs: Vec<usize> = space
                .element_dofs(lo)
                .iter()
                .chain(space.element_dofs(hi))
                .copied()
                .collect();
            dofs.sort_unstable();
            dofs.dedup();
            let slot = |d: usize| {
                dofs.binary_search(&d)
                    .expect("dof belongs to the face patch")
            };
            let (lo_slots, hi_slots): (Vec<usize>, Vec<usize>) = (
                space.element_dofs(lo).iter().map(|&d| slot(d)).collect(),
                space.element_dofs(hi).iter().map(|&d| slot(d)).collect(),
            );
            let mut local = Local::new(dofs.clone());
            let [a, b] = bg.edges[face.edge].vertices;
            let (xa, xb) = (bg.vertices[a], bg.vertices[b]);
            let length = (xb - xa).norm();
            for j in 1..=p {
                let c = config.c_f.get(j - 1).copied().unwrap_or(0.0);
                if c == 0.0 {
                    continue;
                }
                let scale = c * order_weight(h, j, config.gamma) * h.powi(1 - config.cd as i32);
                for &(s, w) in &rule {
                    let x = xa + s * (xb - xa);
                    let mut jump = vec![0.0; dofs.len()];
                    for (&k, v) in
                        hi_slots
                            .iter()
                            .zip(space.shape_directional(hi, x, face.normal, j))
                    {
                        jump[k] += v;
                    }
                    for (&k, v) in
                        lo_slots
                            .iter()
                            .zip(space.shape_directional(lo, x, face.normal, j))
                    {
                        jump[k] -= v;
                    }
                    local.add_outer(&jump, scale * w * length);
                }
            }
            local
        })
        .collect();
    collect(space.ndofs(), locals)
}

/// Surface part of the proposed stabilization:
/// `sum_j c_{Gamma,j} h^{2(j-1+gamma)} (D^j_{n_h} w, D^j_{n_h} v)_{Gamma_h}`.
pub fn assemble_sh_surface(
    space: &FiniteElementSpace,
    quad: &CutQuadrature,
    config: &StabilizationConfig,
) -> CsrMatrix {
    let p = space.degree();
    let config = config.effective(p);
    let h = space.h();
    element_loop(space, |e| {
        let mut local = Local::new(space.element_dofs(e).to_vec());
        let cut = &quad.elements[e];
        for j in 1..=p {
            let c = config.c_gamma.get(j - 1).copied().unwrap_or(0.0);
            if c == 0.0 {
                continue;
            }
            let scale = c * order_weight(h, j, config.gamma);
            for q in 0..cut.len() {
                local.add_outer(
                    &space.shape_directional(e, cut.nodes[q], cut.normals[q], j),
                    scale * cut.weights[q],
                );
            }
        }
        Ok(local)
    })
    .expect("infallible")
}

/// Element-volume stabilizations over the active triangles: the normal
/// gradient variant with `n = grad phi / |grad phi|` at the bulk points, or
/// the full gradient variant.
pub fn assemble_variant(
    space: &FiniteElementSpace,
    geom: &LevelSetGeometry,
    config: &StabilizationConfig,
) -> Result<CsrMatrix> {
    let h = space.h();
    let scale = match config.variant {
        Variant::NormalGradient => config.c_t * h.powf(config.alpha),
        Variant::FullGradient => config.c_t * h,
        other => {
            return Err(Error::InvalidInput(format!(
                "{other} is not an element-volume stabilization"
            )))
        }
    };
    let rule = triangle_rule_for_degree(2 * space.degree());
    element_loop(space, |e| {
        let mut local = Local::new(space.element_dofs(e).to_vec());
        let map = space.element_map(e);
        for (xi, w) in &rule {
            let x = map.to_physical(*xi);
            let g = space.shape_gradients(e, x);
            let weight = scale * w * map.det.abs();
            match config.variant {
                Variant::NormalGradient => {
                    let n = geom.normal(x)?;
                    let dn: Vec<f64> = g.iter().map(|g| n.dot(g)).collect();
                    local.add_outer(&dn, weight);
                }
                _ => local.add_gram(&g, weight),
            }
        }
        Ok(local)
    })
}

/// `s_h` for any variant.
pub fn assemble_stabilization(
    space: &FiniteElementSpace,
    quad: &CutQuadrature,
    geom: &LevelSetGeometry,
    config: &StabilizationConfig,
) -> Result<CsrMatrix> {
    config.validate(space.degree())?;
    match config.variant {
        Variant::Proposed | Variant::PureFace => {
            Ok(assemble_sh_face(space, config).add(&assemble_sh_surface(space, quad, config)))
        }
        Variant::NormalGradient | Variant::FullGradient => assemble_variant(space, geom, config),
        Variant::None => Ok(CsrMatrix::zeros(space.ndofs())),
    }
}

/// `b_i = (f_h, phi_i)_{Gamma_h}` with `f_h = f o p`.
pub fn assemble_load<F>(
    space: &FiniteElementSpace,
    quad: &CutQuadrature,
    geom: &LevelSetGeometry,
    f: F,
) -> Result<Vec<f64>>
where
    F: Fn(Point) -> f64 + Sync,
{
    let contributions = (0..space.num_elements())
        .into_par_iter()
        .map(|e| {
            let cut = &quad.elements[e];
            let mut local = vec![0.0; space.element_dofs(e).len()];
            for q in 0..cut.len() {
                let fq = f(geom.closest_point(cut.nodes[q])?);
                for (l, v) in local.iter_mut().zip(space.shape_values(e, cut.nodes[q])) {
                    *l += cut.weights[q] * fq * v;
                }
            }
            Ok(local)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut b = vec![0.0; space.ndofs()];
    for (e, local) in contributions.iter().enumerate() {
        for (&d, v) in space.element_dofs(e).iter().zip(local) {
            b[d] += v;
        }
    }
    Ok(b)
}

/// `w_i = int_{Gamma_h} phi_i`.
pub fn assemble_constraint_weights(space: &FiniteElementSpace, quad: &CutQuadrature) -> Vec<f64> {
    let mut w = vec![0.0; space.ndofs()];
    for (e, cut) in quad.elements.iter().enumerate() {
        for q in 0..cut.len() {
            for (&d, v) in space
                .element_dofs(e)
                .iter()
                .zip(space.shape_values(e, cut.nodes[q]))
            {
                w[d] += cut.weights[q] * v;
            }
        }
    }
    w
}

/// `a_h + s_h` with load `f` and the mean-zero constraint.
pub fn assemble_laplace_beltrami<F>(
    disc: &Discretization,
    config: &StabilizationConfig,
    f: F,
) -> Result<AssembledSystem>
where
    F: Fn(Point) -> f64 + Sync,
{
    let (space, quad) = (&disc.space, disc.quadrature());
    let matrix = assemble_ah(space, quad).add(&assemble_stabilization(
        space,
        quad,
        &disc.geometry,
        config,
    )?);
    Ok(AssembledSystem {
        matrix,
        rhs: assemble_load(space, quad, &disc.geometry, f)?,
        constraint_weights: Some(assemble_constraint_weights(space, quad)),
        h: disc.h(),
        p: disc.p(),
        config: config.clone(),
    })
}

/// `(u, v)_{Gamma_h} + s_h(u, v) = (f_h, v)_{Gamma_h}`, no constraint.
pub fn assemble_mass_problem<F>(
    disc: &Discretization,
    config: &StabilizationConfig,
    f: F,
) -> Result<AssembledSystem>
where
    F: Fn(Point) -> f64 + Sync,
{
    let (space, quad) = (&disc.space, disc.quadrature());
    let matrix = assemble_mass(space, quad).add(&assemble_stabilization(
        space,
        quad,
        &disc.geometry,
        config,
    )?);
    Ok(AssembledSystem {
        matrix,
        rhs: assemble_load(space, quad, &disc.geometry, f)?,
        constraint_weights: None,
        h: disc.h(),
        p: disc.p(),
        config: config.clone(),
    })
}

/// Discrete mean curvature vector `H_h`:
/// `(H_h, v) + s_h(H_h, v) = -(grad_{Gamma_h} x, grad_{Gamma_h} v)` for both
/// components. Unknowns are ordered component by component (`2 N` in total)
/// and the matrix is block diagonal.
pub fn assemble_mean_curvature_system(
    space: &FiniteElementSpace,
    quad: &CutQuadrature,
    geom: &LevelSetGeometry,
    config: &StabilizationConfig,
) -> Result<AssembledSystem> {
    if space.degree() != 1 {
        return Err(Error::InvalidInput(
            "the mean curvature system uses linear elements".into(),
        ));
    }
    let n = space.ndofs();
    let block = assemble_mass(space, quad).add(&assemble_stabilization(space, quad, geom, config)?);
    let t: Vec<_> = block
        .triplets()
        .chain(block.triplets().map(|(i, j, v)| (i + n, j + n, v)))
        .collect();
    let matrix = CsrMatrix::from_triplets(2 * n, &t)?;

    let mut rhs = vec![0.0; 2 * n];
    for (e, cut) in quad.elements.iter().enumerate() {
        for q in 0..cut.len() {
            let nq = cut.normals[q];
            for (&d, g) in space
                .element_dofs(e)
                .iter()
                .zip(space.shape_gradients(e, cut.nodes[q]))
            {
                // row k of P = I - n n^T paired with grad phi
                let pg = g - nq * nq.dot(&g);
                rhs[d] -= cut.weights[q] * pg.x;
                rhs[d + n] -= cut.weights[q] * pg.y;
            }
        }
    }
    Ok(AssembledSystem {
        matrix,
        rhs,
        constraint_weights: None,
        h: space.h(),
        p: 1,
        config: config.clone(),
    })
}
