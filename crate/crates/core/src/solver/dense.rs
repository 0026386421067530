use faer::{Mat, Side};

use super::SINGULAR_RATIO;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Restriction of the symmetric matrix `a` to `{v . w = 0}` in the
/// orthonormal basis given by columns `1..n` of the Householder reflector
/// that maps `w` to a multiple of `e_0`. Returns `a` unchanged without `w`.
pub fn deflate(a: &Mat<f64>, w: Option<&[f64]>) -> Mat<f64> {
    let Some(w) = w else {
        return a.clone();
    };
    let n = a.nrows();
    let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut u: Vec<f64> = w.iter().map(|x| x / wn).collect();
    u[0] += if u[0] >= 0.0 { 1.0 } else { -1.0 };
    let c = 2.0 / u.iter().map(|x| x * x).sum::<f64>();
    let au: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)] * u[j]).sum())
        .collect();
    let uau: f64 = u.iter().zip(&au).map(|(x, y)| x * y).sum();
    Mat::from_fn(n - 1, n - 1, |i, j| {
        let (i, j) = (i + 1, j + 1);
        a[(i, j)] - c * u[i] * au[j] - c * au[i] * u[j] + c * c * uau * u[i] * u[j]
    })
}

fn eigenvalues(a: &Mat<f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Factorization(format!("eigensolver: {e:?}")))
}

/// `(lambda_min, lambda_max)` on `{v . w = 0}` by a dense symmetric eigensolver.
pub fn dense_extreme_eigenvalues(a: &Mat<f64>, w: Option<&[f64]>) -> Result<(f64, f64)> {
    let ev = eigenvalues(&deflate(a, w))?;
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(Error::InvalidInput("empty matrix".into())),
    }
}

/// Largest `lambda` with `X v = lambda Y v` on `{v . w = 0}`; `Y` must be
/// positive definite there.
pub fn pencil_lambda_max(x: &CsrMatrix, y: &CsrMatrix, w: Option<&[f64]>) -> Result<f64> {
    let xd = deflate(&x.to_dense(), w);
    let yd = deflate(&y.to_dense(), w);
    let llt = match yd.llt(Side::Lower) {
        Ok(llt) => llt,
        Err(_) => {
            let ev = eigenvalues(&yd)?;
            return Err(Error::NumericallySingular {
                lambda_min: ev[0],
                lambda_max: ev[ev.len() - 1],
            });
        }
    };
    let l = llt.L();
    // C = L^{-1} X L^{-T}
    let mut t = xd;
    l.solve_lower_triangular_in_place(&mut t);
    let mut c = t.transpose().to_owned();
    l.solve_lower_triangular_in_place(&mut c);
    let ev = eigenvalues(&c)?;
    let diag_min = (0..yd.nrows())
        .map(|i| l[(i, i)])
        .fold(f64::INFINITY, f64::min);
    let diag_max = (0..yd.nrows()).map(|i| l[(i, i)]).fold(0.0, f64::max);
    if diag_min * diag_min < SINGULAR_RATIO * diag_max * diag_max {
        log::warn!("pencil denominator is nearly singular");
    }
    Ok(ev[ev.len() - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deflation_keeps_the_orthogonal_spectrum() {
        // A = diag(1, 2, 3), w = e_2: remaining eigenvalues 1 and 2
        let a = Mat::from_fn(3, 3, |i, j| if i == j { (i + 1) as f64 } else { 0.0 });
        let (lo, hi) = dense_extreme_eigenvalues(&a, Some(&[0.0, 0.0, 2.0])).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 2.0).abs() < 1e-14);
        // w = (1, 1, 0) removes the (1, 1, 0) direction of diag(1, 1, 5)
        let b = Mat::from_fn(3, 3, |i, j| if i == j { [1.0, 1.0, 5.0][i] } else { 0.0 });
        let (lo, hi) = dense_extreme_eigenvalues(&b, Some(&[1.0, 1.0, 0.0])).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 5.0).abs() < 1e-14);
    }

    #[test]
    fn pencil_of_diagonal_matrices() {
        let x = CsrMatrix::from_diagonal(&[2.0, 3.0, 12.0]);
        let y = CsrMatrix::from_diagonal(&[1.0, 1.0, 4.0]);
        assert!((pencil_lambda_max(&x, &y, None).unwrap() - 3.0).abs() < 1e-14);
        assert!((pencil_lambda_max(&x, &y, Some(&[0.0, 1.0, 0.0])).unwrap() - 3.0).abs() < 1e-14);
        assert!((pencil_lambda_max(&x, &y, Some(&[0.0, 0.0, 1.0])).unwrap() - 3.0).abs() < 1e-14);
        assert!((pencil_lambda_max(&x, &y, Some(&[0.0, 1.0, 1e-30])).unwrap() - 3.0).abs() < 1e-12);
        let singular = CsrMatrix::from_diagonal(&[1.0, 0.0, -1.0]);
        assert!(matches!(
            pencil_lambda_max(&x, &singular, None),
            Err(Error::NumericallySingular { .. })
        ));
    }
}
