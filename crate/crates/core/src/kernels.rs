//! Exponential optimal-transport kernels over complexes.
//!
//! Pairwise distances (Gaussian W_p or fused Gromov-Wasserstein) are turned
//! into a Gram matrix `exp(-d^2 / 2σ^2)` (or `exp(-d / 2σ^2)` under
//! [`ExponentConvention::Linear`]). Neither distance is guaranteed to give a
//! positive semidefinite Gram matrix, so [`sigma_psd_search`] shrinks the
//! bandwidth until it is, and [`truncate_and_features`] keeps the strictly
//! positive part of the spectrum as an explicit finite feature map.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::CwComplex;
use crate::error::{Error, Result};
use crate::fgw::{build_instance_with, fgw_solve, FgwOptions, Histogram};
use crate::spectral::{decompose, DEFAULT_RANK_TOLERANCE};
use crate::transport::{cost_matrix, sample, solve, w2_closed_form, wp_empirical, GaussianSignal, Solver, TransportPlan};
use crate::{io, rng, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Wasserstein,
    Fgw,
}

/// How a pair of complexes is compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSpec {
    pub kind: DistanceKind,
    pub p: f64,
    /// Structure/feature trade-off, FGW only.
    pub alpha: f64,
    pub degree: usize,
    /// Zero-pad smaller Laplacians to the largest size in the set.
    pub pad: bool,
    /// Sample size for empirical W_p when `p != 2`.
    pub samples: usize,
    pub seed: u64,
    pub histogram: Histogram,
    pub fgw: FgwOptions,
    /// Linear OT backend for empirical W_p.
    pub solver: Solver,
}

impl Default for DistanceSpec {
    fn default() -> Self {
        Self {
            kind: DistanceKind::Wasserstein,
            p: 2.0,
            alpha: 0.5,
            degree: 0,
            pad: false,
            samples: 500,
            seed: 0,
            histogram: Histogram::Uniform,
            fgw: FgwOptions::default(),
            solver: Solver::Exact,
        }
    }
}

impl DistanceSpec {
    pub fn wasserstein(p: f64, degree: usize) -> Self {
        Self { kind: DistanceKind::Wasserstein, p, degree, ..Self::default() }
    }

    pub fn fgw(alpha: f64, p: f64, degree: usize) -> Self {
        Self { kind: DistanceKind::Fgw, alpha, p, degree, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidArgument(format!("p must be at least 1, got {}", self.p)));
        }
        if self.kind == DistanceKind::Fgw && !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.kind == DistanceKind::Wasserstein && self.p != 2.0 && self.samples == 0 {
            return Err(Error::InvalidArgument("empirical W_p needs at least one sample".into()));
        }
        Ok(())
    }

    /// Canonical string identifying the spec inside cache keys.
    pub fn key(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

/// Exponent applied to the distance inside the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExponentConvention {
    /// `exp(-d^2 / 2σ^2)`.
    #[default]
    Squared,
    /// `exp(-d / 2σ^2)`.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub distance: DistanceSpec,
    pub sigma: f64,
    pub convention: ExponentConvention,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        self.distance.validate()?;
        check_sigma(self.sigma)
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    a: String,
    b: String,
    spec: String,
    /// IEEE-754 bits, so reloaded values are bit-identical.
    bits: u64,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    entries: Vec<CacheEntry>,
}

type CacheKey = (String, String, String);

/// Content-addressed distance cache keyed by `(hash, hash, spec)`.
///
/// Safe for concurrent use; inserting the same key twice keeps the first value.
#[derive(Debug, Default)]
pub struct DistanceCache {
    entries: Mutex<HashMap<CacheKey, f64>>,
    path: Option<PathBuf>,
}

impl DistanceCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Cache persisted as `distances.json` under `dir`; loads existing entries.
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join("distances.json");
        let mut entries = HashMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|source| Error::Io { path: path.clone(), source })?;
            let file: CacheFile =
                serde_json::from_str(&text).map_err(|source| Error::Json { path: path.clone(), source })?;
            for e in file.entries {
                entries.insert((e.a, e.b, e.spec), f64::from_bits(e.bits));
            }
        }
        Ok(Self { entries: Mutex::new(entries), path: Some(path) })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, a: &str, b: &str, spec: &str) -> Option<f64> {
        let key = canonical_key(a, b, spec);
        self.entries.lock().expect("cache lock").get(&key).copied()
    }

    pub fn insert(&self, a: &str, b: &str, spec: &str, value: f64) {
        let key = canonical_key(a, b, spec);
        self.entries.lock().expect("cache lock").entry(key).or_insert(value);
    }

    /// Writes the cache back to disk; a no-op for in-memory caches.
    pub fn save(&self) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
        }
        let map = self.entries.lock().expect("cache lock");
        let mut entries: Vec<CacheEntry> = map
            .iter()
            .map(|((a, b, spec), v)| CacheEntry { a: a.clone(), b: b.clone(), spec: spec.clone(), bits: v.to_bits() })
            .collect();
        entries.sort_by(|x, y| (&x.a, &x.b, &x.spec).cmp(&(&y.a, &y.b, &y.spec)));
        let text = serde_json::to_string(&CacheFile { entries }).expect("cache serializes");
        io::write_atomic(path, text.as_bytes())
    }
}

fn canonical_key(a: &str, b: &str, spec: &str) -> CacheKey {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    (a.to_owned(), b.to_owned(), spec.to_owned())
}

/// Per-item data prepared once before the pairwise loop.
enum Prepared {
    Signal(GaussianSignal),
    Complex(CwComplex),
}

fn prepare(items: &[CwComplex], spec: &DistanceSpec) -> Result<Vec<Prepared>> {
    match spec.kind {
        DistanceKind::Fgw => Ok(items.iter().cloned().map(Prepared::Complex).collect()),
        DistanceKind::Wasserstein => {
            let signals = items
                .iter()
                .map(|c| GaussianSignal::from_complex(c, spec.degree))
                .collect::<Result<Vec<_>>>()?;
            let size = signals.iter().map(|s| s.dim()).max().unwrap_or(0);
            if spec.pad {
                items
                    .iter()
                    .map(|c| GaussianSignal::from_complex_padded(c, spec.degree, size).map(Prepared::Signal))
                    .collect()
            } else {
                if let Some(s) = signals.iter().find(|s| s.dim() != signals[0].dim()) {
                    return Err(Error::DimensionMismatch { left: signals[0].dim(), right: s.dim() });
                }
                Ok(signals.into_iter().map(Prepared::Signal).collect())
            }
        }
    }
}

fn evaluate(a: &Prepared, b: &Prepared, spec: &DistanceSpec) -> Result<f64> {
    match (a, b) {
        (Prepared::Signal(x), Prepared::Signal(y)) => {
            if spec.p == 2.0 {
                w2_closed_form(x, y)
            } else {
                wp_empirical(x, y, spec.p, spec.samples, spec.seed, &spec.solver)
            }
        }
        (Prepared::Complex(x), Prepared::Complex(y)) => {
            let inst = build_instance_with(x, y, spec.degree, spec.alpha, spec.p, spec.histogram)?;
            Ok(fgw_solve(&inst, &spec.fgw)?.objective)
        }
        _ => unreachable!("items are prepared uniformly"),
    }
}

/// Distance between two complexes under `spec`.
pub fn distance(a: &CwComplex, b: &CwComplex, spec: &DistanceSpec) -> Result<f64> {
    spec.validate()?;
    let prepared = prepare(&[a.clone(), b.clone()], spec)?;
    evaluate(&prepared[0], &prepared[1], spec)
}

/// [`distance`] together with a coupling: the cell coupling for FGW, the
/// coupling of `spec.samples` drawn signals for W_p.
pub fn distance_with_plan(a: &CwComplex, b: &CwComplex, spec: &DistanceSpec) -> Result<(f64, TransportPlan)> {
    spec.validate()?;
    let prepared = prepare(&[a.clone(), b.clone()], spec)?;
    match (&prepared[0], &prepared[1]) {
        (Prepared::Signal(x), Prepared::Signal(y)) => {
            let value = evaluate(&prepared[0], &prepared[1], spec)?;
            let mu = sample(x, spec.samples, rng::mix(spec.seed, 1))?;
            let nu = sample(y, spec.samples, rng::mix(spec.seed, 2))?;
            let plan = solve(mu.masses(), nu.masses(), &cost_matrix(&mu, &nu, spec.p)?, &spec.solver)?;
            Ok((value, plan))
        }
        (Prepared::Complex(x), Prepared::Complex(y)) => {
            let inst = build_instance_with(x, y, spec.degree, spec.alpha, spec.p, spec.histogram)?;
            let r = fgw_solve(&inst, &spec.fgw)?;
            Ok((r.objective, r.plan))
        }
        _ => unreachable!("items are prepared uniformly"),
    }
}

/// Evaluates `(i, j)` index pairs of `items`, each in content-hash order.
fn evaluate_pairs(
    items: &[CwComplex],
    pairs: &[(usize, usize)],
    spec: &DistanceSpec,
    cache: Option<&DistanceCache>,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let prepared = prepare(items, spec)?;
    let hashes: Vec<String> = items.iter().map(|c| c.content_hash()).collect();
    let key = spec.key();
    pairs
        .par_iter()
        .map(|&(i, j)| {
            if hashes[i] == hashes[j] {
                return Ok(0.0);
            }
            let (i, j) = if hashes[i] <= hashes[j] { (i, j) } else { (j, i) };
            if let Some(v) = cache.and_then(|c| c.get(&hashes[i], &hashes[j], &key)) {
                return Ok(v);
            }
            let v = evaluate(&prepared[i], &prepared[j], spec)?;
            if let Some(c) = cache {
                c.insert(&hashes[i], &hashes[j], &key, v);
            }
            Ok(v)
        })
        .collect()
}

/// Symmetric `N × N` distance matrix with zero diagonal.
///
/// Each unordered pair is evaluated once, in content-hash order, so the
/// result does not depend on the order of `items` and cache hits are
/// bit-identical to fresh evaluations.
pub fn pairwise_distance(items: &[CwComplex], spec: &DistanceSpec, cache: Option<&DistanceCache>) -> Result<Matrix> {
    let n = items.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values = evaluate_pairs(items, &pairs, spec, cache)?;
    let mut d = Matrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(values) {
        d[(i, j)] = v;
        d[(j, i)] = v;
    }
    Ok(d)
}

/// `M × N` distances from each query to each item.
pub fn cross_distance(
    queries: &[CwComplex],
    items: &[CwComplex],
    spec: &DistanceSpec,
    cache: Option<&DistanceCache>,
) -> Result<Matrix> {
    let (m, n) = (queries.len(), items.len());
    let all: Vec<CwComplex> = queries.iter().chain(items).cloned().collect();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, m + j))).collect();
    let values = evaluate_pairs(&all, &pairs, spec, cache)?;
    Ok(Matrix::from_row_iterator(m, n, values))
}

fn kernel_value(x: f64, scale: f64, convention: ExponentConvention) -> f64 {
    match convention {
        ExponentConvention::Squared => (-x * x / scale).exp(),
        ExponentConvention::Linear => (-x / scale).exp(),
    }
}

fn check_distances<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if let Some(&x) = values.into_iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidArgument(format!("distances must be nonnegative and finite, found {x}")));
    }
    Ok(())
}

/// Entrywise exponential kernel of a distance matrix.
pub fn gram(d: &Matrix, sigma: f64, convention: ExponentConvention) -> Result<Matrix> {
    check_sigma(sigma)?;
    if !d.is_square() {
        return Err(Error::NotSquare { rows: d.nrows(), cols: d.ncols() });
    }
    check_distances(d.iter())?;
    let scale = 2.0 * sigma * sigma;
    Ok(d.map(|x| kernel_value(x, scale, convention)))
}

/// Kernel vector of a new item given its distances to the training items.
pub fn kernel_vector(distances: &Vector, sigma: f64, convention: ExponentConvention) -> Result<Vector> {
    check_sigma(sigma)?;
    check_distances(distances.iter())?;
    let scale = 2.0 * sigma * sigma;
    Ok(distances.map(|x| kernel_value(x, scale, convention)))
}

pub fn min_eigenvalue(k: &Matrix) -> Result<f64> {
    Ok(decompose(k, DEFAULT_RANK_TOLERANCE)?.min_eigenvalue())
}

/// Median of the strictly positive off-diagonal distances, or 1 if there are none.
pub fn median_heuristic(d: &Matrix) -> f64 {
    let n = d.nrows();
    let mut values: Vec<f64> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| d[(i, j)]).filter(|&x| x > 0.0).collect();
    if values.is_empty() {
        return 1.0;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Bandwidth that puts the median positive distance at exponent `-1/2`:
/// the median itself for [`ExponentConvention::Squared`], its square root for
/// [`ExponentConvention::Linear`].
pub fn default_sigma(d: &Matrix, convention: ExponentConvention) -> f64 {
    let m = median_heuristic(d);
    match convention {
        ExponentConvention::Squared => m,
        ExponentConvention::Linear => m.sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdSearch {
    /// First bandwidth tried; [`default_sigma`] when absent.
    pub sigma0: Option<f64>,
    pub shrink: f64,
    pub max_steps: usize,
    /// Relative tolerance on the minimum eigenvalue.
    pub tol: f64,
    pub convention: ExponentConvention,
}

impl Default for PsdSearch {
    fn default() -> Self {
        Self { sigma0: None, shrink: 0.5, max_steps: 60, tol: 1e-10, convention: ExponentConvention::Squared }
    }
}

/// True when `λ_min(K) ≥ -tol · λ_max(K)`.
pub fn is_psd(k: &Matrix, tol: f64) -> Result<bool> {
    let op = decompose(k, DEFAULT_RANK_TOLERANCE)?;
    Ok(op.min_eigenvalue() >= -tol * op.max_eigenvalue().abs())
}

/// Largest `σ0 · shrink^t`, `t < max_steps`, whose Gram matrix is PSD.
pub fn sigma_psd_search(d: &Matrix, opts: &PsdSearch) -> Result<f64> {
    let sigma0 = opts.sigma0.unwrap_or_else(|| default_sigma(d, opts.convention));
    check_sigma(sigma0)?;
    if !(opts.shrink > 0.0 && opts.shrink < 1.0) {
        return Err(Error::InvalidArgument(format!("shrink must lie in (0, 1), got {}", opts.shrink)));
    }
    let mut sigma = sigma0;
    for _ in 0..opts.max_steps {
        if is_psd(&gram(d, sigma, opts.convention)?, opts.tol)? {
            return Ok(sigma);
        }
        sigma *= opts.shrink;
    }
    Err(Error::BandwidthSearchExhausted { sigma0, steps: opts.max_steps })
}

/// Spectrally truncated Gram matrix with its Wasserstein feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramModel {
    /// The untruncated Gram matrix.
    pub gram: Matrix,
    /// Leading eigenvalues, descending.
    pub eigenvalues: Vector,
    /// Matching unit eigenvectors as columns.
    pub eigenvectors: Matrix,
    /// In-sample features, `N × ℓ`.
    pub features: Matrix,
}

impl GramModel {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn len(&self) -> usize {
        self.gram.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `K^ℓ = Σ λ v vᵀ` over the kept eigenpairs.
    pub fn truncated(&self) -> Matrix {
        &self.features * self.features.transpose()
    }

    /// Features of a new item from its kernel vector against the training items:
    /// `φ_l = v_lᵀ k_x / √λ_l`.
    pub fn embed(&self, k_x: &Vector) -> Result<Vector> {
        if k_x.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "kernel vector has {} entries, expected {}",
                k_x.len(),
                self.len()
            )));
        }
        let proj = self.eigenvectors.tr_mul(k_x);
        Ok(proj.zip_map(&self.eigenvalues, |x, l| x / l.sqrt()))
    }

    pub fn gram_csv(&self, ids: &[String]) -> String {
        io::matrix_csv(ids, ids, &self.gram)
    }

    pub fn features_csv(&self, ids: &[String]) -> String {
        io::matrix_csv(ids, &io::indexed_ids("phi", self.rank()), &self.features)
    }
}

/// Number of eigenvalues above `1e-10 · max|λ|`.
pub fn positive_rank(k: &Matrix) -> Result<usize> {
    let op = decompose(k, DEFAULT_RANK_TOLERANCE)?;
    Ok(op.eigenvalues().iter().filter(|&&l| l > op.cutoff()).count())
}

/// Number of eigenvalues above both `1e-10 · max|λ|` and `|λ_min|`.
///
/// The most negative eigenvalue bounds how far `K` is from a PSD matrix, so
/// directions weaker than it are not resolved by the kernel. For a PSD `K`
/// this equals [`positive_rank`].
pub fn stable_rank(k: &Matrix) -> Result<usize> {
    let op = decompose(k, DEFAULT_RANK_TOLERANCE)?;
    let floor = op.eigenvalues().iter().fold(0.0f64, |m, &l| m.max(-l)).max(op.cutoff());
    Ok(op.eigenvalues().iter().filter(|&&l| l > floor).count())
}

/// Keeps the `ell` largest strictly positive eigenpairs of `K` (all of them by default).
pub fn truncate_and_features(k: &Matrix, ell: Option<usize>) -> Result<GramModel> {
    let op = decompose(k, DEFAULT_RANK_TOLERANCE)?;
    let n = op.size();
    let available = op.eigenvalues().iter().filter(|&&l| l > op.cutoff()).count();
    let ell = ell.unwrap_or(available);
    if ell > available {
        return Err(Error::RankTooLarge { requested: ell, available });
    }
    // ascending storage: the largest ell sit at the end
    let order: Vec<usize> = (n - ell..n).rev().collect();
    let eigenvalues = Vector::from_iterator(ell, order.iter().map(|&j| op.eigenvalues()[j]));
    let eigenvectors = Matrix::from_fn(n, ell, |i, c| op.eigenvectors()[(i, order[c])]);
    let features = Matrix::from_fn(n, ell, |i, c| eigenvectors[(i, c)] * eigenvalues[c].sqrt());
    Ok(GramModel { gram: k.clone(), eigenvalues, eigenvectors, features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_by_two(d: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[0.0, d, d, 0.0])
    }

    #[test]
    fn identical_items_give_zero_distances() {
        let items = vec![CwComplex::path(3); 4];
        let d = pairwise_distance(&items, &DistanceSpec::wasserstein(2.0, 0), None).unwrap();
        assert_eq!(d, Matrix::zeros(4, 4));
    }

    #[test]
    fn path_versus_isolated() {
        let items = vec![CwComplex::path(2), CwComplex::isolated(2)];
        let d = pairwise_distance(&items, &DistanceSpec::wasserstein(2.0, 0), None).unwrap();
        assert_abs_diff_eq!(d[(0, 1)], 0.5f64.sqrt(), epsilon = 1e-12);
        assert_eq!(d[(0, 1)], d[(1, 0)]);
    }

    #[test]
    fn size_mismatch_needs_padding() {
        let items = vec![CwComplex::path(2), CwComplex::isolated(3)];
        let spec = DistanceSpec::wasserstein(2.0, 0);
        assert!(matches!(pairwise_distance(&items, &spec, None), Err(Error::DimensionMismatch { .. })));
        let padded = DistanceSpec { pad: true, ..spec };
        let d = pairwise_distance(&items, &padded, None).unwrap();
        assert_abs_diff_eq!(d[(0, 1)], 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn cache_hits_are_bit_identical() {
        let spec = DistanceSpec::fgw(0.5, 2.0, 0);
        let items: Vec<CwComplex> = (0..4)
            .map(|s| CwComplex::random(s, &crate::complex::GeneratorSpec { n_vertices: 5, ..Default::default() }).unwrap())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let cache = DistanceCache::open(dir.path()).unwrap();
        let first = pairwise_distance(&items, &spec, Some(&cache)).unwrap();
        assert_eq!(cache.len(), 6);
        cache.save().unwrap();
        let reloaded = DistanceCache::open(dir.path()).unwrap();
        assert_eq!(reloaded.len(), 6);
        let second = pairwise_distance(&items, &spec, Some(&reloaded)).unwrap();
        assert_eq!(first, second);
        // item order does not change any entry
        let reversed: Vec<CwComplex> = items.iter().rev().cloned().collect();
        let third = pairwise_distance(&reversed, &spec, None).unwrap();
        assert_eq!(third[(0, 1)], first[(3, 2)]);
        let cross = cross_distance(&items[..1], &items, &spec, None).unwrap();
        assert_eq!(cross.row(0), first.row(0));
    }

    #[test]
    fn gram_examples() {
        assert_eq!(gram(&Matrix::zeros(3, 3), 1.0, ExponentConvention::Squared).unwrap(), Matrix::from_element(3, 3, 1.0));
        let k = gram(&two_by_two(1.0), 1.0, ExponentConvention::Squared).unwrap();
        assert_abs_diff_eq!(k[(0, 1)], 0.606531, epsilon = 1e-6);
        let k = gram(&two_by_two(1.0), 1e-6, ExponentConvention::Squared).unwrap();
        assert_abs_diff_eq!(k, Matrix::identity(2, 2), epsilon = 1e-9);
        let k = gram(&two_by_two(4.0), 1.0, ExponentConvention::Linear).unwrap();
        assert_abs_diff_eq!(k[(0, 1)], (-2.0f64).exp(), epsilon = 1e-15);
        assert!(gram(&two_by_two(-1.0), 1.0, ExponentConvention::Squared).is_err());
        assert!(gram(&two_by_two(1.0), 0.0, ExponentConvention::Squared).is_err());
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert_abs_diff_eq!(min_eigenvalue(&Matrix::identity(3, 3)).unwrap(), 1.0, epsilon = 1e-14);
        let k = gram(&two_by_two(1.0), 1.0, ExponentConvention::Squared).unwrap();
        assert_abs_diff_eq!(min_eigenvalue(&k).unwrap(), 1.0 - (-0.5f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(min_eigenvalue(&Matrix::from_element(3, 3, 1.0)).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn psd_search_examples() {
        let opts = PsdSearch { sigma0: Some(3.0), ..Default::default() };
        assert_eq!(sigma_psd_search(&two_by_two(1.7), &opts).unwrap(), 3.0);
        assert_eq!(sigma_psd_search(&Matrix::zeros(4, 4), &opts).unwrap(), 3.0);
        assert_eq!(median_heuristic(&Matrix::zeros(4, 4)), 1.0);
        let d = Matrix::from_row_slice(3, 3, &[0.0, 1.0, 4.0, 1.0, 0.0, 9.0, 4.0, 9.0, 0.0]);
        assert_eq!(default_sigma(&d, ExponentConvention::Squared), 4.0);
        assert_eq!(default_sigma(&d, ExponentConvention::Linear), 2.0);
        let exhausted = PsdSearch { max_steps: 0, ..opts };
        assert!(matches!(sigma_psd_search(&two_by_two(1.0), &exhausted), Err(Error::BandwidthSearchExhausted { .. })));
    }

    #[test]
    fn psd_search_on_non_euclidean_distances() {
        use rand::Rng;
        let mut rng = crate::rng::stream(11, 0);
        let n = 20;
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let x = rng.random_range(0.5..3.0);
                d[(i, j)] = x;
                d[(j, i)] = x;
            }
        }
        let sigma = sigma_psd_search(&d, &PsdSearch::default()).unwrap();
        let k = gram(&d, sigma, ExponentConvention::Squared).unwrap();
        let op = decompose(&k, DEFAULT_RANK_TOLERANCE).unwrap();
        assert!(op.min_eigenvalue() >= -1e-10 * op.max_eigenvalue());
    }

    #[test]
    fn truncation_examples() {
        let ones = Matrix::from_element(3, 3, 1.0);
        let m = truncate_and_features(&ones, None).unwrap();
        assert_eq!(m.rank(), 1);
        assert_abs_diff_eq!(m.eigenvalues[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.truncated(), ones, epsilon = 1e-12);
        assert!(matches!(truncate_and_features(&ones, Some(2)), Err(Error::RankTooLarge { requested: 2, available: 1 })));

        // eigenvalues (2, 1, -0.5) in a fixed rotated frame
        let (c, s) = (0.6f64, 0.8f64);
        let q = Matrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let k = &q * Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 1.0, -0.5])) * q.transpose();
        let m = truncate_and_features(&k, None).unwrap();
        assert_eq!(m.rank(), 2);
        assert!(min_eigenvalue(&m.truncated()).unwrap() >= -1e-12);
        let expected = q.columns(0, 2) * Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 1.0])) * q.columns(0, 2).transpose();
        assert_abs_diff_eq!(m.truncated(), expected, epsilon = 1e-12);
    }

    #[test]
    fn embedding_a_training_item_reproduces_its_features() {
        let d = Matrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 1.5, 2.0, 1.5, 0.0]);
        let k = gram(&d, 1.0, ExponentConvention::Squared).unwrap();
        let m = truncate_and_features(&k, None).unwrap();
        for i in 0..3 {
            let phi = m.embed(&k.column(i).into_owned()).unwrap();
            assert_abs_diff_eq!(phi, m.features.row(i).transpose(), epsilon = 1e-10);
        }
        assert!(m.embed(&Vector::zeros(2)).is_err());
    }

    #[test]
    fn csv_export_round_trips() {
        let k = gram(&two_by_two(1.0), 1.0, ExponentConvention::Squared).unwrap();
        let m = truncate_and_features(&k, None).unwrap();
        let ids = io::indexed_ids("x", 2);
        let (rows, cols, parsed) = io::parse_matrix_csv(&m.gram_csv(&ids)).unwrap();
        assert_eq!((rows, cols), (ids.clone(), ids.clone()));
        assert_eq!(parsed, m.gram);
        let (_, _, f) = io::parse_matrix_csv(&m.features_csv(&ids)).unwrap();
        assert_eq!(f, m.features);
    }

    #[test]
    fn stable_rank_drops_directions_below_the_negative_floor() {
        // eigenvalues 3, 1, 0.2, -0.5 in a rotated basis
        let q = crate::spectral::SpectralOperator::new(
            &Matrix::from_fn(4, 4, |i, j| ((i * j + i + j) as f64).sin() + if i == j { 3.0 } else { 0.0 }),
            1e-10,
        )
        .unwrap();
        let v = q.eigenvectors();
        let k = v * Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 1.0, 0.2, -0.5])) * v.transpose();
        let k = (&k + k.transpose()) * 0.5;
        assert_eq!(positive_rank(&k).unwrap(), 3);
        assert_eq!(stable_rank(&k).unwrap(), 2);
        let psd = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 1e-3, 0.0]));
        assert_eq!(stable_rank(&psd).unwrap(), positive_rank(&psd).unwrap());
    }

    fn distance_matrix(n: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(0.0f64..4.0, n * (n - 1) / 2).prop_map(move |v| {
            let mut d = Matrix::zeros(n, n);
            let mut it = v.into_iter();
            for i in 0..n {
                for j in i + 1..n {
                    let x = it.next().unwrap();
                    d[(i, j)] = x;
                    d[(j, i)] = x;
                }
            }
            d
        })
    }

    proptest! {
        #[test]
        fn gram_has_unit_diagonal_and_bounded_entries(d in distance_matrix(6), sigma in 0.05f64..5.0) {
            let k = gram(&d, sigma, ExponentConvention::Squared).unwrap();
            for i in 0..6 {
                prop_assert_eq!(k[(i, i)], 1.0);
                for j in 0..6 {
                    prop_assert!(k[(i, j)] >= 0.0 && k[(i, j)] <= 1.0);
                    if d[(i, j)] > d[(0, 1)] {
                        prop_assert!(k[(i, j)] <= k[(0, 1)]);
                    }
                }
            }
        }

        #[test]
        fn truncation_error_shrinks_with_rank(d in distance_matrix(7), sigma in 0.2f64..3.0) {
            let k = gram(&d, sigma, ExponentConvention::Squared).unwrap();
            let full = truncate_and_features(&k, None).unwrap();
            let mut previous = f64::INFINITY;
            for ell in 1..=full.rank() {
                let m = truncate_and_features(&k, Some(ell)).unwrap();
                let t = m.truncated();
                let op = decompose(&t, DEFAULT_RANK_TOLERANCE).unwrap();
                prop_assert!(op.min_eigenvalue() >= -1e-10 * op.max_eigenvalue().abs().max(1.0));
                let err = (&k - &t).norm();
                prop_assert!(err <= previous + 1e-12);
                previous = err;
            }
        }
    }
}
