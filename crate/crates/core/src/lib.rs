//! Optimal transport between weighted CW complexes.
//!
//! A finite CW complex is represented combinatorially by its signed incidence
//! matrices and positive cell weights. Each complex induces a zero-mean
//! Gaussian signal distribution whose covariance is the pseudoinverse of a
//! Hodge Laplacian, and the complexes are compared through those
//! distributions:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`complex`] | data model, validation, JSON format, Hodge Laplacians, random generator |
//! | [`spectral`] | symmetric eigendecomposition, pseudoinverse, PSD square roots |
//! | [`transport`] | closed-form Gaussian W2, optimal linear map, sampling, discrete OT solvers |
//! | [`fgw`] | fused Gromov-Wasserstein between complexes, conditional-gradient solver |
//! | [`kernels`] | exponential OT kernels, PSD bandwidth search, spectral truncation |
//! | [`gp`] | Gaussian-process regression over complexes, marginal likelihood, training loop |
//! | [`experiment`] | dataset generation and the end-to-end kernel comparison |
//!
//! ```
//! use cellot::complex::CwComplex;
//! use cellot::transport::{GaussianSignal, w2_closed_form};
//!
//! let path = CwComplex::path(2);
//! let isolated = CwComplex::isolated(2);
//! let a = GaussianSignal::from_complex(&path, 0).unwrap();
//! let b = GaussianSignal::from_complex(&isolated, 0).unwrap();
//! let d = w2_closed_form(&a, &b).unwrap();
//! assert!((d - 0.5f64.sqrt()).abs() < 1e-12);
//! ```

// `!(x > 0.0)` is used throughout so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complex;
pub mod error;
pub mod experiment;
pub mod fgw;
pub mod gp;
pub mod io;
pub mod kernels;
pub mod rng;
pub mod spectral;
pub mod transport;

pub use complex::{Chain, Cochain, CwComplex, GeneratorSpec, IncidenceMatrix, Violation, WeightLaw};
pub use error::{Error, Result};
pub use fgw::{FgwInstance, FgwOptions, FgwResult};
pub use gp::{Bandwidth, FitConfig, GpModel, Theta};
pub use kernels::{DistanceCache, DistanceKind, DistanceSpec, ExponentConvention, GramModel, KernelSpec};
pub use spectral::SpectralOperator;
pub use transport::{DiscreteMeasure, GaussianSignal, Solver, TransportPlan};

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense real vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
