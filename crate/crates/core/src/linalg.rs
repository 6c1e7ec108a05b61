//! Full-row-rank linear maps `T : R^n -> R^m` and the pieces of their
//! pseudoinverse needed to describe inverse images `T^-1{y}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{dot, norm};

/// Singular values at or below this are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct LinearSurjection {
    matrix: DMatrix<f64>,
    pinv: DMatrix<f64>,
    sigma_min: f64,
    sigma_max: f64,
    kernel: Vec<Vec<f64>>,
}

/// `{"matrix": [[...], ...]}`, one inner array per row.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDocument {
    pub matrix: Vec<Vec<f64>>,
}

impl LinearSurjection {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::Config("matrix has no rows".into()));
        }
        let n = rows[0].len();
        if n == 0 {
            return Err(Error::Config("matrix has no columns".into()));
        }
        for r in rows {
            if r.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    found: r.len(),
                });
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("matrix has a non-finite entry".into()));
            }
        }
        if m > n {
            return Err(Error::RankDeficient { sigma_min: 0.0 });
        }
        let matrix = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
        let svd = matrix.clone().svd(true, true);
        let sigma_min = svd.singular_values.min();
        let sigma_max = svd.singular_values.max();
        if !(sigma_min > RANK_TOL) {
            return Err(Error::RankDeficient { sigma_min });
        }
        let pinv = svd
            .pseudo_inverse(RANK_TOL)
            .map_err(|e| Error::Config(e.to_string()))?;
        let kernel = kernel_basis(rows, n);
        Ok(LinearSurjection {
            matrix,
            pinv,
            sigma_min,
            sigma_max,
            kernel,
        })
    }

    pub fn from_document(doc: &MatrixDocument) -> Result<Self> {
        Self::from_rows(&doc.matrix)
    }

    pub fn identity(m: usize) -> Self {
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::from_rows(&rows).expect("identity has full rank")
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.matrix.nrows())
            .map(|i| self.matrix.row(i).iter().copied().collect())
            .collect()
    }

    pub fn to_document(&self) -> MatrixDocument {
        MatrixDocument { matrix: self.rows() }
    }

    /// Codomain dimension `m`.
    pub fn codomain_dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Domain dimension `n`.
    pub fn domain_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// Orthonormal basis of `ker T` (`n - m` vectors).
    pub fn kernel_basis(&self) -> &[Vec<f64>] {
        &self.kernel
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.domain_dim() {
            return Err(Error::Shape {
                expected: self.domain_dim(),
                found: x.len(),
            });
        }
        Ok((&self.matrix * DVector::from_column_slice(x))
            .iter()
            .copied()
            .collect())
    }

    /// Minimum-norm solution `T^+ y` of `T x = y`.
    pub fn min_norm_solution(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.codomain_dim() {
            return Err(Error::Shape {
                expected: self.codomain_dim(),
                found: y.len(),
            });
        }
        Ok((&self.pinv * DVector::from_column_slice(y))
            .iter()
            .copied()
            .collect())
    }
}

/// Completes an orthonormal basis of the row space to one of `R^n` by
/// greedily adding the standard basis vector with the largest residual,
/// and returns the added vectors.
fn kernel_basis(rows: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for r in rows {
        if let Some(v) = orthonormalize(r.clone(), &basis) {
            basis.push(v);
        }
    }
    let row_rank = basis.len();
    while basis.len() < n {
        let candidate = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                residual(e, &basis)
            })
            .max_by(|a, b| norm(a).total_cmp(&norm(b)))
            .expect("n > 0");
        match orthonormalize(candidate, &basis) {
            Some(v) => basis.push(v),
            None => break,
        }
    }
    basis.split_off(row_rank)
}

fn residual(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Vec<f64> {
    // two passes of modified Gram-Schmidt
    for _ in 0..2 {
        for u in basis {
            let c = dot(u, &v);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= c * ui;
            }
        }
    }
    v
}

fn orthonormalize(v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let r = residual(v, basis);
    let len = norm(&r);
    (len > 1e-10).then(|| r.iter().map(|x| x / len).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_map() {
        let t = LinearSurjection::from_rows(&[vec![1.0, 1.0]]).unwrap();
        assert!((t.sigma_min() - 2f64.sqrt()).abs() < 1e-14);
        let x = t.min_norm_solution(&[1.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
        let k = t.kernel_basis();
        assert_eq!(k.len(), 1);
        assert!(dot(&k[0], &[1.0, 1.0]).abs() < 1e-15);
        assert!((norm(&k[0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_has_trivial_kernel() {
        let t = LinearSurjection::identity(2);
        assert!(t.kernel_basis().is_empty());
        assert_eq!(t.sigma_min(), 1.0);
    }

    #[test]
    fn rank_deficiency_detected() {
        assert!(matches!(
            LinearSurjection::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]),
            Err(Error::RankDeficient { .. })
        ));
        assert!(matches!(
            LinearSurjection::from_rows(&[vec![1.0], vec![1.0]]),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn kernel_is_orthonormal_and_annihilated() {
        let rows = vec![vec![1.0, 2.0, 0.5, -1.0], vec![0.3, -0.7, 2.0, 1.0]];
        let t = LinearSurjection::from_rows(&rows).unwrap();
        let k = t.kernel_basis();
        assert_eq!(k.len(), 2);
        for (i, u) in k.iter().enumerate() {
            for r in &rows {
                assert!(dot(r, u).abs() < 1e-12);
            }
            for (j, v) in k.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((dot(u, v) - target).abs() < 1e-12);
            }
        }
        let y = [0.4, -1.3];
        let x = t.min_norm_solution(&y).unwrap();
        let tx = t.apply(&x).unwrap();
        assert!((tx[0] - y[0]).abs() < 1e-12 && (tx[1] - y[1]).abs() < 1e-12);
        for u in k {
            assert!(dot(u, &x).abs() < 1e-12);
        }
    }
}
