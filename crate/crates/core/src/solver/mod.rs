//! Linear solves with an optional mean-value constraint, spectral condition
//! numbers on the constrained subspace, and diagonal scaling.
//!
//! The constraint `v . w = 0` is imposed with a Lagrange multiplier for
//! solves and by Householder deflation for eigenvalue problems.

mod dense;
mod lanczos;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub use dense::{deflate, dense_extreme_eigenvalues, pencil_lambda_max};
pub use lanczos::lanczos_extreme_eigenvalues;

/// Largest system solved by sparse LU; larger ones use preconditioned CG.
pub const DIRECT_SOLVE_LIMIT: usize = 20_000;
/// Largest system handled by the dense eigensolver.
pub const DENSE_EIGEN_LIMIT: usize = 3000;
/// `lambda_min / lambda_max` below this is reported as numerically singular.
pub const SINGULAR_RATIO: f64 = 1e-14;
pub const CG_TOLERANCE: f64 = 1e-12;

/// `A u = b`, optionally restricted to `{u : u . w = 0}`.
#[derive(Debug, Clone, Copy)]
pub struct ConstrainedSystem<'a> {
    pub a: &'a CsrMatrix,
    pub b: &'a [f64],
    pub w: Option<&'a [f64]>,
}

impl<'a> ConstrainedSystem<'a> {
    pub fn new(a: &'a CsrMatrix, b: &'a [f64], w: Option<&'a [f64]>) -> Result<Self> {
        let n = a.dim();
        if b.len() != n || w.is_some_and(|w| w.len() != n) {
            return Err(Error::InvalidInput("system dimensions do not agree".into()));
        }
        if w.is_some_and(|w| w.iter().all(|&x| x == 0.0)) {
            return Err(Error::InvalidInput("constraint weights vanish".into()));
        }
        Ok(Self { a, b, w })
    }
}

/// Sparse LU of `A` or of the saddle matrix `[A w; w^T 0]`.
pub struct Factorization {
    n: usize,
    constrained: bool,
    lu: Lu<usize, f64>,
}

impl Factorization {
    pub fn new(a: &CsrMatrix, w: Option<&[f64]>) -> Result<Self> {
        let n = a.dim();
        let mut t: Vec<Triplet<usize, usize, f64>> = a
            .triplets()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        if let Some(w) = w {
            for (i, &wi) in w.iter().enumerate() {
                if wi != 0.0 {
                    t.push(Triplet::new(i, n, wi));
                    t.push(Triplet::new(n, i, wi));
                }
            }
        }
        let m = n + w.is_some() as usize;
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(m, m, &t)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self {
            n,
            constrained: w.is_some(),
            lu,
        })
    }

    /// The `u` block of the solution for right-hand side `(b, 0)`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = self.n + self.constrained as usize;
        let rhs = Col::<f64>::from_fn(m, |i| if i < self.n { b[i] } else { 0.0 });
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[i]).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the `w` component: `v - (v.w / w.w) w`.
pub(crate) fn project_out(v: &mut [f64], w: &[f64], ww: f64) {
    let c = dot(v, w) / ww;
    for (x, wi) in v.iter_mut().zip(w) {
        *x -= c * wi;
    }
}

pub fn solve(system: &ConstrainedSystem) -> Result<Vec<f64>> {
    if system.a.dim() <= DIRECT_SOLVE_LIMIT {
        let f = Factorization::new(system.a, system.w)?;
        let u = f.solve(system.b);
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Factorization("non-finite solution".into()));
        }
        Ok(u)
    } else {
        solve_pcg(system)
    }
}

/// Jacobi-preconditioned CG on `{u . w = 0}` with the symmetric
/// preconditioner `P D^{-1} P`.
pub fn solve_pcg(system: &ConstrainedSystem) -> Result<Vec<f64>> {
    let a = system.a;
    let n = a.dim();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let ww = system.w.map(|w| dot(w, w));
    let project = |v: &mut [f64]| {
        if let (Some(w), Some(ww)) = (system.w, ww) {
            project_out(v, w, ww);
        }
    };
    let precondition = |r: &[f64]| {
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
        project(&mut z);
        z
    };

    let mut r = system.b.to_vec();
    project(&mut r);
    let b_norm = norm(&r);
    let mut u = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(u);
    }
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let window = 5 * n.max(1);
    let mut checkpoint = b_norm;
    // Lanczos coefficients for the stagnation diagnostic
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    for it in 1.. {
        let q = a.mul_vec(&p);
        let pq = dot(&p, &q);
        let alpha = rz / pq;
        for i in 0..n {
            u[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        project(&mut r);
        let res = norm(&r);
        if res <= CG_TOLERANCE * b_norm {
            return Ok(u);
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        alphas.push(alpha);
        betas.push(beta);
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        if it % window == 0 {
            if res > 0.1 * checkpoint {
                return Err(Error::Conditioning {
                    iterations: it,
                    kappa_estimate: cg_kappa_estimate(&alphas, &betas),
                });
            }
            checkpoint = res;
        }
    }
    unreachable!("the iteration either converges or stagnates")
}

/// Condition estimate from the CG Lanczos tridiagonal.
fn cg_kappa_estimate(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len().min(200);
    let t = Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            1.0 / alphas[i]
                + if i > 0 {
                    betas[i - 1] / alphas[i - 1]
                } else {
                    0.0
                }
        } else if i == j + 1 || j == i + 1 {
            let m = i.min(j);
            -betas[m].sqrt() / alphas[m]
        } else {
            0.0
        }
    });
    match t.self_adjoint_eigenvalues(Side::Lower) {
        Ok(ev) if !ev.is_empty() && ev[0] > 0.0 => ev[ev.len() - 1] / ev[0],
        _ => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenBackend {
    /// Dense up to [`DENSE_EIGEN_LIMIT`], Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

/// `(lambda_min, lambda_max)` of `A` on `{v . w = 0}`.
pub fn extreme_eigenvalues(
    a: &CsrMatrix,
    w: Option<&[f64]>,
    backend: EigenBackend,
) -> Result<(f64, f64)> {
    let dense = match backend {
        EigenBackend::Auto => a.dim() <= DENSE_EIGEN_LIMIT,
        EigenBackend::Dense => true,
        EigenBackend::Lanczos => false,
    };
    if dense {
        dense_extreme_eigenvalues(&a.to_dense(), w)
    } else {
        lanczos_extreme_eigenvalues(a, w)
    }
}

pub fn condition_number(a: &CsrMatrix, w: Option<&[f64]>) -> Result<f64> {
    condition_number_with(a, w, EigenBackend::Auto)
}

/// Spectral condition number on `{v . w = 0}`; a smallest eigenvalue below
/// `1e-14 lambda_max` gives [`Error::NumericallySingular`].
pub fn condition_number_with(
    a: &CsrMatrix,
    w: Option<&[f64]>,
    backend: EigenBackend,
) -> Result<f64> {
    let (lambda_min, lambda_max) = extreme_eigenvalues(a, w, backend)?;
    if !(lambda_min > SINGULAR_RATIO * lambda_max) {
        return Err(Error::NumericallySingular {
            lambda_min,
            lambda_max,
        });
    }
    Ok(lambda_max / lambda_min)
}

/// `D^{-1/2} A D^{-1/2}` with `D = diag(A)`.
pub fn diagonal_scaling(a: &CsrMatrix) -> Result<CsrMatrix> {
    Ok(a.scale_symmetric(&inverse_sqrt_diagonal(a)?))
}

/// `D^{-1/2}`, the factor used by [`diagonal_scaling`].
pub fn inverse_sqrt_diagonal(a: &CsrMatrix) -> Result<Vec<f64>> {
    a.diagonal()
        .iter()
        .enumerate()
        .map(|(row, &value)| {
            if value > 0.0 {
                Ok(1.0 / value.sqrt())
            } else {
                Err(Error::NonPositiveDiagonal { row, value })
            }
        })
        .collect()
}

/// Condition number of the diagonally scaled matrix on the image of the
/// constrained subspace, `{y : y . D^{-1/2} w = 0}`.
pub fn scaled_condition_number(a: &CsrMatrix, w: Option<&[f64]>) -> Result<f64> {
    let s = inverse_sqrt_diagonal(a)?;
    let scaled = a.scale_symmetric(&s);
    let ws: Option<Vec<f64>> = w.map(|w| w.iter().zip(&s).map(|(w, s)| w * s).collect());
    condition_number(&scaled, ws.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> CsrMatrix {
        CsrMatrix::from_diagonal(d)
    }

    /// 1D Laplacian with Neumann ends: singular with the constant null vector.
    fn neumann_laplacian(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.extend([
                (i, i, 1.0),
                (i + 1, i + 1, 1.0),
                (i, i + 1, -1.0),
                (i + 1, i, -1.0),
            ]);
        }
        CsrMatrix::from_triplets(n, &t).unwrap()
    }

    #[test]
    fn identity_solves() {
        let a = CsrMatrix::identity(5);
        let b = [1.0, 0.0, 0.0, 0.0, 0.0];
        let u = solve(&ConstrainedSystem::new(&a, &b, None).unwrap()).unwrap();
        assert_eq!(u, b.to_vec());
        let w = [1.0; 5];
        let u = solve(&ConstrainedSystem::new(&a, &b, Some(&w)).unwrap()).unwrap();
        for (i, ui) in u.iter().enumerate() {
            let expected = if i == 0 { 0.8 } else { -0.2 };
            assert!((ui - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn pcg_matches_direct_on_singular_operator() {
        let n = 40;
        let a = neumann_laplacian(n).add(&diag(&vec![0.0; n]));
        let b: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let w: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
        let sys = ConstrainedSystem::new(&a, &b, Some(&w)).unwrap();
        let direct = solve(&sys).unwrap();
        let cg = solve_pcg(&sys).unwrap();
        for (x, y) in direct.iter().zip(&cg) {
            assert!((x - y).abs() < 1e-8 * (1.0 + x.abs()));
        }
        assert!(dot(&direct, &w).abs() <= 1e-10 * norm(&direct) * norm(&w));
    }

    #[test]
    fn condition_number_examples() {
        assert!((condition_number(&diag(&[1.0, 4.0]), None).unwrap() - 4.0).abs() < 1e-12);
        let w = [0.3, -1.0, 2.0, 0.5];
        assert!((condition_number(&CsrMatrix::identity(4), Some(&w)).unwrap() - 1.0).abs() < 1e-12);
        // Neumann Laplacian on the mean-zero subspace: 4 sin^2(pi (n-1) / 2n) / 4 sin^2(pi / 2n)
        let n = 30;
        let ones = vec![1.0; n];
        let k = condition_number(&neumann_laplacian(n), Some(&ones)).unwrap();
        let s = |k: f64| (std::f64::consts::PI * k / (2.0 * n as f64)).sin().powi(2);
        assert!((k - s((n - 1) as f64) / s(1.0)).abs() < 1e-9 * k);
        assert!(matches!(
            condition_number(&neumann_laplacian(n), None),
            Err(Error::NumericallySingular { .. })
        ));
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let n = 120;
        let mut t: Vec<(usize, usize, f64)> = neumann_laplacian(n).triplets().collect();
        for i in 0..n {
            t.push((i, i, 0.01 * (1.0 + (i % 7) as f64)));
        }
        let a = CsrMatrix::from_triplets(n, &t).unwrap();
        let w: Vec<f64> = (0..n).map(|i| 1.0 + (i % 3) as f64).collect();
        for w in [None, Some(w.as_slice())] {
            let d = condition_number_with(&a, w, EigenBackend::Dense).unwrap();
            let l = condition_number_with(&a, w, EigenBackend::Lanczos).unwrap();
            assert!((d - l).abs() < 1e-5 * d, "{d} vs {l}");
        }
    }

    #[test]
    fn diagonal_scaling_examples() {
        let s = diagonal_scaling(&diag(&[4.0, 9.0])).unwrap();
        assert_eq!(s, CsrMatrix::identity(2));
        let a = neumann_laplacian(6).add(&diag(&[0.5, 1.0, 2.0, 3.0, 4.0, 5.0]));
        let once = diagonal_scaling(&a).unwrap();
        let twice = diagonal_scaling(&once).unwrap();
        for (x, y) in once.triplets().zip(twice.triplets()) {
            assert!((x.2 - y.2).abs() < 1e-14);
        }
        assert!(matches!(
            diagonal_scaling(&diag(&[1.0, 0.0])),
            Err(Error::NonPositiveDiagonal { row: 1, .. })
        ));
    }

    #[test]
    fn condition_number_is_permutation_and_scale_invariant() {
        let n = 25;
        let a = neumann_laplacian(n).add(&diag(
            &(0..n).map(|i| 0.1 * (i % 4) as f64).collect::<Vec<_>>(),
        ));
        let w: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        let k = condition_number(&a, Some(&w)).unwrap();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7) % n).collect();
        let mut wp = vec![0.0; n];
        for i in 0..n {
            wp[perm[i]] = w[i];
        }
        let kp = condition_number(&a.permute_symmetric(&perm), Some(&wp)).unwrap();
        assert!((k - kp).abs() < 1e-9 * k);
        for c in [1e-3, 1e3] {
            assert!((condition_number(&a.scale(c), Some(&w)).unwrap() - k).abs() < 1e-9 * k);
        }
    }
}
