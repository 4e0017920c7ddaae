//! The `N × T` data matrix and the four matrix statistics built from it:
//! the sample covariance `S`, the centered covariance `S°`, the sample
//! correlation `C` and the noncentered correlation `C̃`.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("data matrix needs at least 1 row and 2 columns, got {n}x{t}")]
    TooSmall { n: usize, t: usize },
    #[error("data matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("row {0} has zero sample variance")]
    ConstantRow(usize),
    #[error("row {0} is the zero vector")]
    ZeroRow(usize),
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("power iteration did not converge in {0} iterations")]
    NoConvergence(usize),
}

/// Variables in rows, observations in columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self, SpectraError> {
        let (n, t) = values.shape();
        if n < 1 || t < 2 {
            return Err(SpectraError::TooSmall { n, t });
        }
        for col in 0..t {
            for row in 0..n {
                if !values[(row, col)].is_finite() {
                    return Err(SpectraError::NonFinite { row, col });
                }
            }
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpectraError> {
        let n = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(SpectraError::TooSmall { n, t: 0 });
        }
        Self::new(DMatrix::from_fn(n, t, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn t(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, SpectraError> {
        Self::new(self.values.select_rows(rows))
    }

    /// `X − X̄`: each row minus its own mean.
    pub fn centered(&self) -> DMatrix<f64> {
        let mut c = self.values.clone();
        for mut row in c.row_iter_mut() {
            let mean = row.mean();
            row.add_scalar_mut(-mean);
        }
        c
    }

    /// `Y`: centered rows scaled to unit Euclidean norm, so `C = Y Yᵀ`.
    pub fn normalized_rows(&self) -> Result<DMatrix<f64>, SpectraError> {
        let mut y = self.centered();
        for (i, mut row) in y.row_iter_mut().enumerate() {
            let norm = row.norm();
            let scale = self.values.row(i).amax();
            // A row is constant when centering leaves only round-off behind.
            if norm == 0.0 || norm <= 1e-14 * scale * (self.t() as f64).sqrt() {
                return Err(SpectraError::ConstantRow(i));
            }
            row /= norm;
        }
        Ok(y)
    }

    /// `E = T^{-1/2}(X − X̄)`, so `S° = E Eᵀ`.
    pub fn centered_scaled(&self) -> DMatrix<f64> {
        self.centered() / (self.t() as f64).sqrt()
    }

    /// `Ỹ`: raw rows scaled to unit norm, so `C̃ = Ỹ Ỹᵀ`.
    pub fn unit_rows(&self) -> Result<DMatrix<f64>, SpectraError> {
        let mut y = self.values.clone();
        for (i, mut row) in y.row_iter_mut().enumerate() {
            let norm = row.norm();
            if norm == 0.0 {
                return Err(SpectraError::ZeroRow(i));
            }
            row /= norm;
        }
        Ok(y)
    }
}

fn gram(a: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let mut g = a * a.transpose();
    if scale != 1.0 {
        g *= scale;
    }
    symmetrize(&mut g);
    g
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `S = T⁻¹ X Xᵀ`.
pub fn sample_covariance(x: &DataMatrix) -> DMatrix<f64> {
    gram(x.values(), 1.0 / x.t() as f64)
}

/// `S° = T⁻¹ (X − X̄)(X − X̄)ᵀ`.
pub fn centered_covariance(x: &DataMatrix) -> DMatrix<f64> {
    gram(&x.centered(), 1.0 / x.t() as f64)
}

/// `C = Y Yᵀ`, unit diagonal.
pub fn correlation(x: &DataMatrix) -> Result<DMatrix<f64>, SpectraError> {
    let mut c = gram(&x.normalized_rows()?, 1.0);
    for i in 0..c.nrows() {
        c[(i, i)] = 1.0;
        for j in 0..c.ncols() {
            c[(i, j)] = c[(i, j)].clamp(-1.0, 1.0);
        }
    }
    Ok(c)
}

/// `C̃ = Ỹ Ỹᵀ`, rows scaled by `1/‖x_i‖` without centering.
pub fn noncentered_correlation(x: &DataMatrix) -> Result<DMatrix<f64>, SpectraError> {
    let mut c = gram(&x.unit_rows()?, 1.0);
    for i in 0..c.nrows() {
        c[(i, i)] = 1.0;
    }
    Ok(c)
}
