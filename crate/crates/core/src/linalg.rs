//! Dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Pivoted Cholesky sweep that only checks positive semi-definiteness.
///
/// A pivot below `-rel_tol * trace` is reported as failure; pivots in
/// `[-tol, tol]` are treated as zero (rank deficiency is allowed).
pub fn check_psd(m: &DMatrix<f64>, rel_tol: f64) -> Result<()> {
    let n = m.nrows();
    let trace: f64 = (0..n).map(|i| m[(i, i)]).sum();
    let tol = rel_tol * trace.abs().max(f64::MIN_POSITIVE);
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (piv, &best) = perm[k..]
            .iter()
            .enumerate()
            .max_by(|(_, &i), (_, &j)| a[(i, i)].total_cmp(&a[(j, j)]))
            .map(|(p, i)| (p + k, i))
            .unwrap();
        let d = a[(best, best)];
        if d < -tol {
            return Err(Error::NotPositiveDefinite { pivot: best, value: d });
        }
        perm.swap(k, piv);
        if d <= tol {
            // all remaining pivots are (numerically) zero; off-diagonals must vanish too
            for &i in &perm[k..] {
                for &j in &perm[k..] {
                    if i != j && a[(i, j)].abs() > tol.sqrt() * (1.0 + tol.sqrt()) {
                        let v = a[(i, i)].min(a[(j, j)]) - a[(i, j)].abs();
                        return Err(Error::NotPositiveDefinite { pivot: i, value: v });
                    }
                }
            }
            return Ok(());
        }
        let rest: Vec<usize> = perm[k + 1..].to_vec();
        for &i in &rest {
            let lik = a[(i, best)] / d;
            for &j in &rest {
                a[(i, j)] -= lik * a[(best, j)];
            }
        }
    }
    Ok(())
}

/// Lower Cholesky factor, retrying once with `1e-10 * trace` on the diagonal.
pub fn cholesky_jitter(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    if let Some(c) = m.clone().cholesky() {
        return Ok(c.l());
    }
    let n = m.nrows();
    let trace: f64 = (0..n).map(|i| m[(i, i)]).sum();
    let jitter = 1e-10 * trace.abs().max(1e-300);
    let bumped = m + DMatrix::identity(n, n) * jitter;
    bumped
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Numerical("covariance factorization failed after jitter".into()))
}

/// Square-root factor `B` with `B B^T = m` for a PSD matrix that may be
/// singular: Cholesky with jitter, falling back to a clipped eigen-decomposition.
pub fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Ok(DMatrix::zeros(m.nrows(), m.ncols()));
    }
    if let Ok(l) = cholesky_jitter(m) {
        return Ok(l);
    }
    let eig = m.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if min < -1e-8 * scale * m.nrows() as f64 {
        let pivot = eig.eigenvalues.iter().position(|v| *v == min).unwrap_or(0);
        return Err(Error::NotPositiveDefinite { pivot, value: min });
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Draws `L z` with `z` standard normal.
pub fn correlated_normal<R: Rng + ?Sized>(lower: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let n = lower.nrows();
    let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    lower * z
}

/// Symmetric positive-definite inverse and log-determinant.
pub fn spd_inverse_logdet(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("matrix is singular or not positive definite".into()))?;
    let l = chol.l();
    let logdet = 2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>();
    Ok((chol.inverse(), logdet))
}
