use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, norm, project_out, Factorization};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

const SEED: u64 = 0x5eed;
const MAX_STEPS: usize = 600;
const RESIDUAL_TOL: f64 = 1e-8;

/// Largest eigenvalue of a symmetric operator on the subspace orthogonal to
/// `w`, by Lanczos with full reorthogonalization.
fn largest_eigenvalue(op: impl Fn(&[f64]) -> Vec<f64>, n: usize, w: Option<&[f64]>) -> Result<f64> {
    let ww = w.map(|w| dot(w, w));
    let project = |v: &mut [f64]| {
        if let (Some(w), Some(ww)) = (w, ww) {
            project_out(v, w, ww);
        }
    };
    let dim = n - w.is_some() as usize;
    if dim == 0 {
        return Err(Error::InvalidInput("empty subspace".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    project(&mut q);
    let qn = norm(&q);
    q.iter_mut().for_each(|x| *x /= qn);

    let mut basis: Vec<Vec<f64>> = vec![q];
    let (mut alphas, mut betas): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut theta = f64::NAN;
    for k in 0..MAX_STEPS.min(dim) {
        let mut v = op(&basis[k]);
        project(&mut v);
        let alpha = dot(&v, &basis[k]);
        alphas.push(alpha);
        // two passes of Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = norm(&v);

        let m = alphas.len();
        let t = Mat::<f64>::from_fn(m, m, |i, j| {
            if i == j {
                alphas[i]
            } else if i == j + 1 {
                betas[j]
            } else if j == i + 1 {
                betas[i]
            } else {
                0.0
            }
        });
        let eig = t
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let s = eig.S();
        theta = s[m - 1];
        let last_component = eig.U()[(m - 1, m - 1)];
        let exhausted = m == dim || beta <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE);
        if exhausted || (beta * last_component).abs() <= RESIDUAL_TOL * theta.abs() {
            return Ok(theta);
        }
        betas.push(beta);
        basis.push(v.iter().map(|x| x / beta).collect());
    }
    log::warn!("Lanczos reached {MAX_STEPS} steps without meeting the residual tolerance");
    Ok(theta)
}

/// `(lambda_min, lambda_max)` of `A` on `{v . w = 0}`: Lanczos for the largest
/// eigenvalue, shift-invert Lanczos (through the saddle-point factorization)
/// for the smallest.
pub fn lanczos_extreme_eigenvalues(a: &CsrMatrix, w: Option<&[f64]>) -> Result<(f64, f64)> {
    let n = a.dim();
    let lambda_max = largest_eigenvalue(|v| a.mul_vec(v), n, w)?;
    let lambda_min = match Factorization::new(a, w) {
        Ok(f) => {
            let inv_max = largest_eigenvalue(|v| f.solve(v), n, w)?;
            if inv_max.is_finite() && inv_max > 0.0 {
                1.0 / inv_max
            } else {
                0.0
            }
        }
        Err(_) => 0.0,
    };
    Ok((lambda_min, lambda_max))
}
