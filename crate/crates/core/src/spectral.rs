//! Symmetric eigendecomposition and the spectral functions built on it.
//!
//! Eigenvalues with `|λ| ≤ rank_tolerance · max|λ|` are treated as exact
//! zeros: Laplacians always have a kernel that round-off smears into tiny
//! nonzero values, and the pseudoinverse must not blow those up.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;
const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Eigendecomposition `Q diag(λ) Qᵀ` of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralOperator {
    eigenvalues: Vector,
    eigenvectors: Matrix,
    rank_tolerance: f64,
}

/// Decomposes a symmetric matrix.
pub fn decompose(a: &Matrix, rank_tolerance: f64) -> Result<SpectralOperator> {
    SpectralOperator::new(a, rank_tolerance)
}

impl SpectralOperator {
    pub fn new(a: &Matrix, rank_tolerance: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare { rows: a.nrows(), cols: a.ncols() });
        }
        if !(rank_tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("rank_tolerance must be positive, got {rank_tolerance}")));
        }
        let n = a.nrows();
        let scale = a.amax().max(1.0);
        for r in 0..n {
            for c in 0..n {
                if !a[(r, c)].is_finite() {
                    return Err(Error::NonFinite { row: r, col: c });
                }
            }
        }
        for r in 0..n {
            for c in r + 1..n {
                let gap = (a[(r, c)] - a[(c, r)]).abs();
                if gap > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::NotSymmetric { row: r, col: c, gap });
                }
            }
        }
        if n == 0 {
            return Ok(Self { eigenvalues: Vector::zeros(0), eigenvectors: Matrix::zeros(0, 0), rank_tolerance });
        }

        let eig = SymmetricEigen::new(symmetrize(a));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let eigenvalues = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut eigenvectors = Matrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Ok(Self { eigenvalues, eigenvectors, rank_tolerance })
    }

    /// Wraps an existing decomposition. `eigenvectors` must be orthonormal.
    pub fn from_parts(eigenvalues: Vector, eigenvectors: Matrix, rank_tolerance: f64) -> Self {
        assert_eq!(eigenvalues.len(), eigenvectors.ncols());
        Self { eigenvalues, eigenvectors, rank_tolerance }
    }

    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &Vector {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    /// Absolute threshold below which an eigenvalue counts as zero.
    pub fn cutoff(&self) -> f64 {
        self.rank_tolerance * self.eigenvalues.amax()
    }

    pub fn is_null(&self, lambda: f64) -> bool {
        lambda.abs() <= self.cutoff()
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| !self.is_null(l)).count()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sum of eigenvalues, null ones excluded.
    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().filter(|&&l| !self.is_null(l)).sum()
    }

    /// `Q diag(λ) Qᵀ`.
    pub fn matrix(&self) -> Matrix {
        self.apply(|l| l)
    }

    /// `Q diag(f(λ)) Qᵀ`, with `f` only evaluated on non-null eigenvalues.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.size();
        let mut scaled = self.eigenvectors.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let v = if self.is_null(l) { 0.0 } else { f(l) };
            scaled.column_mut(j).scale_mut(v);
        }
        let mut out = Matrix::zeros(n, n);
        out.gemm(1.0, &scaled, &self.eigenvectors.transpose(), 0.0);
        symmetrize(&out)
    }

    /// Moore-Penrose pseudoinverse.
    pub fn pinv(&self) -> Matrix {
        self.apply(|l| 1.0 / l)
    }

    fn check_psd(&self) -> Result<()> {
        let cutoff = self.cutoff();
        match self.eigenvalues.iter().find(|&&l| l < -cutoff) {
            Some(&value) => Err(Error::NegativeEigenvalue { value, tolerance: cutoff }),
            None => Ok(()),
        }
    }

    /// Principal square root; negative eigenvalues within tolerance are clamped.
    pub fn sqrt_psd(&self) -> Result<Matrix> {
        self.check_psd()?;
        Ok(self.apply(|l| l.max(0.0).sqrt()))
    }

    /// `(A†)^{1/2}`: `λ ↦ λ^{-1/2}` on the non-null spectrum.
    pub fn pinv_sqrt(&self) -> Result<Matrix> {
        self.check_psd()?;
        Ok(self.apply(|l| if l > 0.0 { 1.0 / l.sqrt() } else { 0.0 }))
    }

    /// Sum of `√λ` over the clamped non-null spectrum.
    pub fn trace_sqrt(&self) -> Result<f64> {
        self.check_psd()?;
        Ok(self.eigenvalues.iter().filter(|&&l| !self.is_null(l)).map(|&l| l.max(0.0).sqrt()).sum())
    }

    /// Spectral decomposition of `A†`, sharing the eigenvectors.
    pub fn pinv_operator(&self) -> SpectralOperator {
        let values = self.eigenvalues.map(|l| if self.is_null(l) { 0.0 } else { 1.0 / l });
        // keep the ascending order
        let n = self.size();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let eigenvalues = Vector::from_iterator(n, order.iter().map(|&i| values[i]));
        let mut eigenvectors = Matrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &self.eigenvectors.column(src));
        }
        SpectralOperator { eigenvalues, eigenvectors, rank_tolerance: self.rank_tolerance }
    }

    /// Embeds the operator in a larger space padded with null directions.
    pub fn padded(&self, size: usize) -> SpectralOperator {
        let n = self.size();
        assert!(size >= n);
        let mut eigenvalues = Vector::zeros(size);
        let mut eigenvectors = Matrix::zeros(size, size);
        // zero eigenvalues first for the new coordinates, then the old spectrum
        for j in 0..size - n {
            eigenvectors[(n + j, j)] = 1.0;
        }
        for j in 0..n {
            eigenvalues[size - n + j] = self.eigenvalues[j];
            eigenvectors.view_mut((0, size - n + j), (n, 1)).copy_from(&self.eigenvectors.column(j));
        }
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&i, &j| eigenvalues[i].total_cmp(&eigenvalues[j]));
        let sorted_values = Vector::from_iterator(size, order.iter().map(|&i| eigenvalues[i]));
        let mut sorted_vectors = Matrix::zeros(size, size);
        for (dst, &src) in order.iter().enumerate() {
            sorted_vectors.set_column(dst, &eigenvectors.column(src));
        }
        SpectralOperator { eigenvalues: sorted_values, eigenvectors: sorted_vectors, rank_tolerance: self.rank_tolerance }
    }
}
