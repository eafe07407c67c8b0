//! Linear least squares via SVD.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquaresFit {
    pub coefficients: Vec<f64>,
    /// RMS residual, ‖Ac − b‖ / √rows.
    pub residual_norm: f64,
    /// Ratio of extreme singular values of the column-scaled basis.
    pub condition_estimate: f64,
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LsqError {
    #[error("basis is rank deficient (condition estimate {condition:e})")]
    RankDeficient { condition: f64 },
    #[error("need at least as many rows ({rows}) as columns ({cols})")]
    Underdetermined { rows: usize, cols: usize },
    #[error("basis and observations disagree in length")]
    ShapeMismatch,
}

pub fn linear_lsq(basis: &DMatrix<f64>, observations: &[f64]) -> Result<LeastSquaresFit, LsqError> {
    let (rows, cols) = basis.shape();
    if observations.len() != rows {
        return Err(LsqError::ShapeMismatch);
    }
    if rows < cols {
        return Err(LsqError::Underdetermined { rows, cols });
    }
    // Column equilibration so the condition estimate reflects the basis
    // geometry rather than the scale of individual columns.
    let scales: Vec<f64> = (0..cols)
        .map(|j| {
            let n = basis.column(j).norm();
            if n > 0.0 { n } else { 1.0 }
        })
        .collect();
    let mut a = basis.clone();
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let b = DVector::from_column_slice(observations);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(smin > smax * 1e-13 * rows.max(cols) as f64) {
        return Err(LsqError::RankDeficient { condition });
    }
    let x = svd.solve(&b, 0.0).map_err(|_| LsqError::RankDeficient { condition })?;
    let resid = &a * &x - &b;
    let coefficients: Vec<f64> = x.iter().zip(&scales).map(|(c, s)| c / s).collect();
    Ok(LeastSquaresFit { coefficients, residual_norm: resid.norm() / (rows as f64).sqrt(), condition_estimate: condition })
}
