//! Symmetric eigendecomposition and the power method for the top eigenpair.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::SpectraError;

const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues in nonincreasing order with matching orthonormal eigenvectors
/// as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&self.values));
        &self.vectors * lambda * self.vectors.transpose()
    }
}

fn check_symmetric(p: &DMatrix<f64>) -> Result<(), SpectraError> {
    let (rows, cols) = p.shape();
    if rows != cols {
        return Err(SpectraError::NotSquare { rows, cols });
    }
    let scale = p.amax();
    if !scale.is_finite() {
        return Err(SpectraError::NotSymmetric);
    }
    for i in 0..rows {
        for j in (i + 1)..rows {
            if (p[(i, j)] - p[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(SpectraError::NotSymmetric);
            }
        }
    }
    Ok(())
}

/// Full decomposition by Householder tridiagonalization and implicit
/// symmetric QR.
pub fn eigen_sym(p: &DMatrix<f64>) -> Result<SymEigen, SpectraError> {
    check_symmetric(p)?;
    let n = p.nrows();
    if n == 0 {
        return Ok(SymEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(p.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(SymEigen { values, vectors })
}

/// Eigenvalues only, nonincreasing.
pub fn eigenvalues_sym(p: &DMatrix<f64>) -> Result<Vec<f64>, SpectraError> {
    check_symmetric(p)?;
    let mut v: Vec<f64> = p.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

const RESTART_SEED: u64 = 0x5eed_0f70_9e16;

fn power_run(
    p: &DMatrix<f64>,
    start: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Option<(f64, DVector<f64>)> {
    let mut v = start.normalize();
    let mut pv = p * &v;
    for _ in 0..max_iter {
        let lambda = v.dot(&pv);
        let norm = pv.norm();
        if norm == 0.0 {
            // v lies in the null space; only a zero matrix keeps us here.
            return (p.amax() == 0.0).then_some((0.0, v));
        }
        let residual = (&pv - &v * lambda).norm();
        if residual <= tol * lambda.abs() {
            return Some((lambda, v));
        }
        v = pv / norm;
        pv = p * &v;
    }
    None
}

/// Top eigenpair of a symmetric positive semidefinite matrix.
///
/// Two power iterations are run, one from the normalized all-ones vector and
/// one from a fixed pseudo-random vector, and the larger Rayleigh quotient is
/// kept. Each stops once `‖Pv − λv‖ ≤ tol·λ`. When the top eigenvalue is
/// repeated any unit vector of the top eigenspace may be returned.
pub fn largest_eigenvalue(
    p: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, DVector<f64>), SpectraError> {
    check_symmetric(p)?;
    assert!(tol > 0.0, "power iteration tolerance must be positive");
    let n = p.nrows();
    if n == 0 {
        return Err(SpectraError::NotSquare { rows: 0, cols: 0 });
    }
    let ones = DVector::from_element(n, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    let random = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));

    let first = power_run(p, ones, tol, max_iter).ok_or(SpectraError::NoConvergence(max_iter))?;
    let second =
        power_run(p, random, tol, max_iter).ok_or(SpectraError::NoConvergence(max_iter))?;
    Ok(if second.0 > first.0 { second } else { first })
}

/// Top eigenvalue via the power method, falling back to the full solver when
/// the power method does not converge.
pub fn top_eigenvalue(p: &DMatrix<f64>) -> Result<f64, SpectraError> {
    match largest_eigenvalue(p, 1e-11, 200) {
        Ok((v, _)) => Ok(v),
        Err(SpectraError::NoConvergence(_)) => Ok(eigenvalues_sym(p)?[0]),
        Err(e) => Err(e),
    }
}
