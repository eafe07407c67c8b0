//! Forward sensitivity (variational) equations.
//!
//! The augmented state is `[y, S]` where `S = ∂y/∂p` is stored column-major,
//! one column of length `n` per parameter, and obeys `S' = J_y S + J_p`.

use nalgebra::DMatrix;

pub struct VariationalSystem<F, J> {
    pub n: usize,
    pub n_params: usize,
    pub rhs: F,
    /// Returns (J_y, J_p) with shapes n×n and n×n_params.
    pub jacobians: J,
}

impl<F, J> VariationalSystem<F, J>
where
    F: Fn(f64, &[f64], &mut [f64]),
    J: Fn(f64, &[f64]) -> (DMatrix<f64>, DMatrix<f64>),
{
    pub fn new(n: usize, n_params: usize, rhs: F, jacobians: J) -> Self {
        VariationalSystem { n, n_params, rhs, jacobians }
    }

    pub fn augmented_dim(&self) -> usize {
        self.n * (1 + self.n_params)
    }

    pub fn eval(&self, t: f64, z: &[f64], dz: &mut [f64]) {
        let n = self.n;
        let (y, s) = z.split_at(n);
        let (dy, ds) = dz.split_at_mut(n);
        (self.rhs)(t, y, dy);
        let (jy, jp) = (self.jacobians)(t, y);
        for p in 0..self.n_params {
            let col = &s[p * n..(p + 1) * n];
            for i in 0..n {
                let mut acc = jp[(i, p)];
                for k in 0..n {
                    acc += jy[(i, k)] * col[k];
                }
                ds[p * n + i] = acc;
            }
        }
    }

    /// Extracts ∂y_i/∂p_j as an n×n_params matrix from an augmented state.
    pub fn sensitivity_matrix(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, self.n_params, |i, p| z[n + p * n + i])
    }
}
