//! Error norms on the discrete curve, convergence rates and empirical
//! constants of the Poincaré and inverse inequalities.

use nalgebra::Vector2;
use serde::Serialize;

use crate::error::Result;
use crate::fem::FiniteElementSpace;
use crate::geometry::{CutQuadrature, LevelSetGeometry};
use crate::mesh::Point;
use crate::solver::pencil_lambda_max;
use crate::sparse::CsrMatrix;

/// `||u^e - u_h||_{L^2(Gamma_h)}` with `u^e = u o p`.
pub fn error_l2_gammah(
    space: &FiniteElementSpace,
    quad: &CutQuadrature,
    coeffs: &[f64],
    geom: &LevelSetGeometry,
    u: impl Fn(Point) -> f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for (e, cut) in quad.elements.iter().enumerate() {
        for q in 0..cut.len() {
            let x = cut.nodes[q];
            let diff = u(geom.closest_point(x)?) - space.evaluate(coeffs, e, x);
            sum += cut.weights[q] * diff * diff;
        }
    }
    Ok(sum.sqrt())
}

/// `||P_h grad(u^e - u_h)||_{L^2(Gamma_h)}`; `grad_ue` is the gradient of the extension.
pub fn error_h1_gammah(
    space: &FiniteElementSpace,
    quad: &CutQuadrature,
    coeffs: &[f64],
    grad_ue: impl Fn(Point) -> Vector2<f64>,
) -> f64 {
    let mut sum = 0.0;
    for (e, cut) in quad.elements.iter().enumerate() {
        for q in 0..cut.len() {
            let x = cut.nodes[q];
            let n = cut.normals[q];
            let d = grad_ue(x) - space.gradient(coeffs, e, x);
            let t = d - n * n.dot(&d);
            sum += cut.weights[q] * t.norm_squared();
        }
    }
    sum.sqrt()
}

/// `log(e_k / e_{k+1}) / log(h_k / h_{k+1})` for consecutive levels.
pub fn eoc(h: &[f64], errors: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(errors.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Smallest `C` with `||v||^2_{T_h} <= C h (||v||^2_{a_h} + ||v||^2_{s_h})` on
/// `{v . w = 0}`: the largest eigenvalue of the pencil `(M, h A)`.
pub fn empirical_poincare_constant(
    bulk_mass: &CsrMatrix,
    a: &CsrMatrix,
    w: &[f64],
    h: f64,
) -> Result<f64> {
    pencil_lambda_max(bulk_mass, &a.scale(h), Some(w))
}

/// Smallest `C` with `||v||^2_{s_h} <= C h^{-(cd+2)} ||v||^2_{T_h}`: the largest
/// eigenvalue of the pencil `(S, h^{-(cd+2)} M)`.
pub fn empirical_inverse_constant(
    s: &CsrMatrix,
    bulk_mass: &CsrMatrix,
    h: f64,
    cd: u32,
) -> Result<f64> {
    pencil_lambda_max(s, &bulk_mass.scale(h.powi(-(cd as i32 + 2))), None)
}

/// Quantities of one refinement level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    /// Subdivisions per axis of the background mesh.
    pub n: usize,
    pub h: f64,
    pub ndof: usize,
    pub l2_error: Option<f64>,
    pub h1_error: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa_diag_scaled: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub levels: Vec<LevelRecord>,
}

impl ConvergenceRecord {
    pub fn push(&mut self, level: LevelRecord) {
        if let Some(last) = self.levels.last() {
            debug_assert!(level.h < last.h, "levels must be refined");
        }
        self.levels.push(level);
    }

    fn rates(&self, error: impl Fn(&LevelRecord) -> Option<f64>) -> Vec<Option<f64>> {
        self.levels
            .windows(2)
            .map(|w| match (error(&w[0]), error(&w[1])) {
                (Some(a), Some(b)) if a > 0.0 && b > 0.0 => {
                    Some(eoc(&[w[0].h, w[1].h], &[a, b])[0])
                }
                _ => None,
            })
            .collect()
    }

    /// Rate between level `k` and `k + 1`.
    pub fn eoc_l2(&self) -> Vec<Option<f64>> {
        self.rates(|l| l.l2_error)
    }

    pub fn eoc_h1(&self) -> Vec<Option<f64>> {
        self.rates(|l| l.h1_error)
    }
}
