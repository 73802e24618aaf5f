//! Gaussian signal distributions `N(0, Δ†)` and their closed-form transport.

use rand_distr::{Distribution, StandardNormal};

use super::discrete::DiscreteMeasure;
use crate::complex::CwComplex;
use crate::error::{Error, Result};
use crate::spectral::{decompose, symmetrize, SpectralOperator, DEFAULT_RANK_TOLERANCE};
use crate::{rng, Matrix};

/// Zero-mean Gaussian over k-cochains with covariance `Δ_k†`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSignal {
    covariance: SpectralOperator,
    source_degree: usize,
}

impl GaussianSignal {
    /// Signal of `c` at degree `k`, using the symmetric representative of `Δ_k`.
    pub fn from_complex(c: &CwComplex, k: usize) -> Result<Self> {
        let lap = decompose(&c.symmetric_representative(k)?, DEFAULT_RANK_TOLERANCE)?;
        Ok(Self { covariance: lap.pinv_operator(), source_degree: k })
    }

    /// As [`GaussianSignal::from_complex`], zero-padded to `size` cells.
    /// Padded coordinates behave like isolated cells and carry no variance.
    pub fn from_complex_padded(c: &CwComplex, k: usize, size: usize) -> Result<Self> {
        let s = Self::from_complex(c, k)?;
        if size < s.dim() {
            return Err(Error::InvalidArgument(format!("cannot pad {} cells down to {size}", s.dim())));
        }
        Ok(Self { covariance: s.covariance.padded(size), source_degree: k })
    }

    /// Signal with an explicit symmetric PSD covariance.
    pub fn from_covariance(cov: &Matrix) -> Result<Self> {
        let covariance = decompose(cov, DEFAULT_RANK_TOLERANCE)?;
        let cutoff = covariance.cutoff();
        if let Some(&value) = covariance.eigenvalues().iter().find(|&&l| l < -cutoff) {
            return Err(Error::NegativeEigenvalue { value, tolerance: cutoff });
        }
        Ok(Self { covariance, source_degree: 0 })
    }

    pub fn covariance(&self) -> &SpectralOperator {
        &self.covariance
    }

    pub fn covariance_matrix(&self) -> Matrix {
        self.covariance.matrix()
    }

    pub fn source_degree(&self) -> usize {
        self.source_degree
    }

    pub fn dim(&self) -> usize {
        self.covariance.size()
    }

    /// `Q diag(√λ)`, so that `x = factor · z` has the signal's law.
    pub fn sampling_factor(&self) -> Matrix {
        let mut f = self.covariance.eigenvectors().clone();
        for (j, &l) in self.covariance.eigenvalues().iter().enumerate() {
            let s = if self.covariance.is_null(l) { 0.0 } else { l.max(0.0).sqrt() };
            f.column_mut(j).scale_mut(s);
        }
        f
    }
}

fn check_sizes(a: &GaussianSignal, b: &GaussianSignal) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(())
}

/// `Tr(A + B) − 2 Tr √(A^{1/2} B A^{1/2})`, clamped at zero.
pub fn w2_squared_closed_form(a: &GaussianSignal, b: &GaussianSignal) -> Result<f64> {
    check_sizes(a, b)?;
    let a_half = a.covariance.sqrt_psd()?;
    let b_mat = b.covariance.matrix();
    let cross = decompose(&symmetrize(&(&a_half * b_mat * &a_half)), DEFAULT_RANK_TOLERANCE)?;
    let value = a.covariance.trace() + b.covariance.trace() - 2.0 * cross.trace_sqrt()?;
    Ok(value.max(0.0))
}

/// Wasserstein-2 distance between the two signals (the square root of the
/// Bures expression).
pub fn w2_closed_form(a: &GaussianSignal, b: &GaussianSignal) -> Result<f64> {
    Ok(w2_squared_closed_form(a, b)?.sqrt())
}

/// Matrix of the optimal linear map pushing `a` onto `b`:
/// `A^{†/2} (A^{1/2} B A^{1/2})^{1/2} A^{†/2}`.
///
/// On the support of `A` this is the Monge map between the two Gaussians;
/// directions in the kernel of `A` carry no mass and are sent to zero.
pub fn optimal_map(a: &GaussianSignal, b: &GaussianSignal) -> Result<Matrix> {
    check_sizes(a, b)?;
    let a_half = a.covariance.sqrt_psd()?;
    let a_half_pinv = a.covariance.pinv_sqrt()?;
    let b_mat = b.covariance.matrix();
    let cross = decompose(&symmetrize(&(&a_half * b_mat * &a_half)), DEFAULT_RANK_TOLERANCE)?;
    let middle = cross.sqrt_psd()?;
    Ok(symmetrize(&(&a_half_pinv * middle * &a_half_pinv)))
}

/// Draws `n` i.i.d. samples `Q diag(√λ) z`, `z ~ N(0, I)`, with uniform masses.
pub fn sample(g: &GaussianSignal, n: usize, seed: u64) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let z = standard_normal(n, g.dim(), seed);
    let points = z * g.sampling_factor().transpose();
    DiscreteMeasure::uniform(points)
}

/// `n × d` matrix of standard normal draws.
pub(crate) fn standard_normal(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = rng::stream(seed, 7);
    // fill row by row so a prefix of rows does not depend on n
    let mut z = Matrix::zeros(n, d);
    for i in 0..n {
        for k in 0..d {
            z[(i, k)] = StandardNormal.sample(&mut rng);
        }
    }
    z
}

/// Monte Carlo check of a transport map: Frobenius distance between the
/// second-moment matrix of `T x` (`x` drawn from `a`) and the covariance of `b`.
pub fn pushforward_check(a: &GaussianSignal, b: &GaussianSignal, map: &Matrix, n_samples: usize, seed: u64) -> Result<f64> {
    check_sizes(a, b)?;
    let x = sample(a, n_samples, seed)?;
    let y = x.points() * map.transpose();
    let empirical = (y.transpose() * &y) / n_samples as f64;
    Ok((empirical - b.covariance_matrix()).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p2() -> GaussianSignal {
        GaussianSignal::from_complex(&CwComplex::path(2), 0).unwrap()
    }

    fn p2_heavy() -> GaussianSignal {
        GaussianSignal::from_complex(&CwComplex::path(2).with_weights(1, vec![4.0]), 0).unwrap()
    }

    fn isolated() -> GaussianSignal {
        GaussianSignal::from_complex(&CwComplex::isolated(2), 0).unwrap()
    }

    #[test]
    fn signal_covariances() {
        let expected = Matrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]);
        assert_abs_diff_eq!(p2().covariance_matrix(), expected, epsilon = 1e-14);
        assert_eq!(isolated().covariance_matrix(), Matrix::zeros(2, 2));
        let heavy = p2_heavy();
        assert_abs_diff_eq!(heavy.covariance().max_eigenvalue(), 0.125, epsilon = 1e-14);
        let v = heavy.covariance().eigenvectors().column(1).into_owned();
        assert_abs_diff_eq!((v[0] + v[1]).abs(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn w2_examples() {
        assert!(w2_closed_form(&p2(), &p2()).unwrap() < 1e-7);
        assert_abs_diff_eq!(w2_closed_form(&p2(), &isolated()).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);
        let expected = 0.5f64.sqrt() - 0.125f64.sqrt();
        assert_abs_diff_eq!(w2_closed_form(&p2(), &p2_heavy()).unwrap(), expected, epsilon = 1e-8);
        assert_abs_diff_eq!(expected, 0.353553, epsilon = 1e-6);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let three = GaussianSignal::from_complex(&CwComplex::path(3), 0).unwrap();
        assert!(matches!(w2_closed_form(&p2(), &three), Err(Error::DimensionMismatch { left: 2, right: 3 })));
        assert!(optimal_map(&p2(), &three).is_err());
        let padded = GaussianSignal::from_complex_padded(&CwComplex::path(2), 0, 3).unwrap();
        let isolated3 = GaussianSignal::from_complex(&CwComplex::isolated(3), 0).unwrap();
        assert_abs_diff_eq!(w2_closed_form(&padded, &isolated3).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);
        assert!(GaussianSignal::from_complex_padded(&CwComplex::path(3), 0, 2).is_err());
    }

    #[test]
    fn optimal_map_examples() {
        let a = p2();
        let t = optimal_map(&a, &a).unwrap();
        let proj = Matrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert_abs_diff_eq!(t, proj, epsilon = 1e-12);

        let t = optimal_map(&a, &p2_heavy()).unwrap();
        assert_abs_diff_eq!(t, proj * 0.5, epsilon = 1e-12);

        assert_abs_diff_eq!(optimal_map(&a, &isolated()).unwrap(), Matrix::zeros(2, 2), epsilon = 1e-15);
    }

    #[test]
    fn pushforward_of_zero_map_is_exact() {
        let t = optimal_map(&p2(), &isolated()).unwrap();
        assert_eq!(pushforward_check(&p2(), &isolated(), &t, 100, 3).unwrap(), 0.0);
    }

    #[test]
    fn sampling_contract() {
        let zero = sample(&isolated(), 5, 1).unwrap();
        assert!(zero.points().iter().all(|&x| x == 0.0));
        assert_eq!(sample(&p2(), 10, 9).unwrap(), sample(&p2(), 10, 9).unwrap());
        assert_ne!(sample(&p2(), 10, 9).unwrap(), sample(&p2(), 10, 10).unwrap());
        assert!(sample(&p2(), 0, 1).is_err());
        // mass stays off the constant vector (the kernel of Δ_0)
        let s = sample(&p2(), 50, 2).unwrap();
        for i in 0..50 {
            assert_abs_diff_eq!(s.points()[(i, 0)] + s.points()[(i, 1)], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_covariance_sampling() {
        let g = GaussianSignal::from_covariance(&Matrix::identity(3, 3)).unwrap();
        let s = sample(&g, 100_000, 4).unwrap();
        let cov = s.points().transpose() * s.points() / 100_000.0;
        assert!((cov - Matrix::identity(3, 3)).norm() < 0.05);
        assert!(GaussianSignal::from_covariance(&Matrix::from_row_slice(1, 1, &[-1.0])).is_err());
    }
}
