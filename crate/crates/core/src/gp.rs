//! Gaussian-process regression of transport maps between complexes.
//!
//! Each training pair `(X_1, X_2)` contributes points `(X_1, μ) ↦ ν`, where
//! `μ ~ N(0, Δ_{X_1}†)` and `ν = T μ` is its image under the optimal linear map
//! towards `N(0, Δ_{X_2}†)`. The covariance between two points is
//!
//! ```text
//! k((x, μ), (x', μ')) = (Σ_l w_l φ_l(x) φ_l(x')) · μᵀμ'
//! ```
//!
//! with `φ` the Wasserstein (or FGW) features of the complexes, so the latent
//! function is linear in `μ` with a coefficient matrix that varies smoothly
//! over complexes. Every output coordinate is an independent GP sharing this
//! covariance, a constant mean and a noise variance.
//!
//! Hyperparameters live in one flat vector `θ = (m, log σ_n², log s, log w_1..w_ℓ)`,
//! where `s` scales the PSD bandwidth of the complex kernel.

use nalgebra::Cholesky;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::complex::CwComplex;
use crate::error::{Error, Result};
use crate::kernels::{
    cross_distance, default_sigma, gram, kernel_vector, pairwise_distance, positive_rank, stable_rank, sigma_psd_search, truncate_and_features,
    DistanceCache, GramModel, KernelSpec, PsdSearch,
};
use crate::transport::{optimal_map, sample, GaussianSignal};
use crate::{rng, Matrix, Vector};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// Escalating jitter attempts, starting at `1e-8 · mean(diag)`.
const JITTER_STEPS: usize = 8;
/// Step for the central difference in the log bandwidth scale.
const SCALE_STEP: f64 = 1e-4;

/// One source/target pair together with the complex the kernel compares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    /// Complex fed to the distance (the source, possibly carrying cell features).
    pub item: CwComplex,
    pub source: CwComplex,
    pub target: CwComplex,
}

/// Flat hyperparameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta(pub Vector);

impl Theta {
    pub const MEAN: usize = 0;
    pub const LOG_NOISE: usize = 1;
    pub const LOG_SCALE: usize = 2;
    pub const WEIGHTS: usize = 3;

    pub fn new(mean: f64, noise_variance: f64, scale: f64, weights: &[f64]) -> Self {
        let mut v = vec![mean, noise_variance.ln(), scale.ln()];
        v.extend(weights.iter().map(|w| w.ln()));
        Theta(Vector::from_vec(v))
    }

    /// Standard normal draw for a kernel of rank `ell`.
    pub fn random(ell: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, 31);
        Theta(Vector::from_fn(Self::WEIGHTS + ell, |_, _| StandardNormal.sample(&mut r)))
    }

    pub fn mean(&self) -> f64 {
        self.0[Self::MEAN]
    }

    pub fn noise_variance(&self) -> f64 {
        self.0[Self::LOG_NOISE].exp()
    }

    pub fn scale(&self) -> f64 {
        self.0[Self::LOG_SCALE].exp()
    }

    pub fn rank(&self) -> usize {
        self.0.len() - Self::WEIGHTS
    }

    pub fn weights(&self) -> Vector {
        self.0.rows(Self::WEIGHTS, self.rank()).map(f64::exp)
    }
}

/// Adds escalating diagonal jitter only when the plain factorization fails.
fn factor(a: &Matrix) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok(c);
    }
    let n = a.nrows();
    let base = 1e-8 * (a.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    for t in 0..JITTER_STEPS {
        let jitter = base * 10f64.powi(t as i32);
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(b) {
            return Ok(c);
        }
    }
    Err(Error::NotPositiveDefinite)
}

fn check_noise(noise_variance: f64) -> Result<()> {
    if !(noise_variance > 0.0) || !noise_variance.is_finite() {
        return Err(Error::InvalidArgument(format!("noise variance must be positive, got {noise_variance}")));
    }
    Ok(())
}

/// Exact log marginal likelihood of independent GPs, one per target column,
/// sharing the covariance `kernel + σ_n² I` and a constant mean.
pub fn log_marginal_likelihood(kernel: &Matrix, noise_variance: f64, mean: f64, targets: &Matrix) -> Result<f64> {
    Ok(Evidence::new(kernel, noise_variance, mean, targets)?.value)
}

/// Factorized evidence, reused by the gradient.
struct Evidence {
    value: f64,
    chol: Cholesky<f64, nalgebra::Dyn>,
    /// `A⁻¹ (Y − m)`, one column per output.
    alpha: Matrix,
}

impl Evidence {
    fn new(kernel: &Matrix, noise_variance: f64, mean: f64, targets: &Matrix) -> Result<Self> {
        check_noise(noise_variance)?;
        let n = kernel.nrows();
        if targets.nrows() != n {
            return Err(Error::InvalidArgument(format!("{} targets for {n} inputs", targets.nrows())));
        }
        let mut a = kernel.clone();
        for i in 0..n {
            a[(i, i)] += noise_variance;
        }
        let chol = factor(&a)?;
        let residual = targets.map(|y| y - mean);
        let alpha = chol.solve(&residual);
        let outputs = targets.ncols() as f64;
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let quad = residual.dot(&alpha);
        let value = -0.5 * quad - 0.5 * outputs * log_det - 0.5 * outputs * n as f64 * LN_2PI;
        Ok(Self { value, chol, alpha })
    }

    /// `Σ_c α_c α_cᵀ − C A⁻¹`; the gradient is `½ tr(W ∂A)`.
    fn weight_matrix(&self, outputs: usize) -> Matrix {
        &self.alpha * self.alpha.transpose() - self.chol.inverse() * outputs as f64
    }
}

/// Sampled points of a set of pairs: one row per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    /// Pair index of every point.
    pub pair: Vec<usize>,
    pub inputs: Matrix,
    pub targets: Matrix,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.pair.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pair.is_empty()
    }
}

/// Source signals and optimal maps of a list of pairs, padded to one size.
#[derive(Debug, Clone)]
pub struct PreparedPairs {
    sources: Vec<GaussianSignal>,
    maps: Vec<Matrix>,
}

impl PreparedPairs {
    pub fn new(pairs: &[TrainingPair], degree: usize, size: usize) -> Result<Self> {
        let mut sources = Vec::with_capacity(pairs.len());
        let mut maps = Vec::with_capacity(pairs.len());
        for p in pairs {
            let src = GaussianSignal::from_complex_padded(&p.source, degree, size)?;
            let tgt = GaussianSignal::from_complex_padded(&p.target, degree, size)?;
            maps.push(optimal_map(&src, &tgt)?);
            sources.push(src);
        }
        Ok(Self { sources, maps })
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Draws `s` inputs per pair and maps them to their targets.
    pub fn draw(&self, s: usize, seed: u64) -> Result<Batch> {
        let d = self.sources.first().map_or(0, |x| x.dim());
        let n = s * self.len();
        let mut inputs = Matrix::zeros(n, d);
        let mut targets = Matrix::zeros(n, d);
        let mut pair = Vec::with_capacity(n);
        for (i, (src, map)) in self.sources.iter().zip(&self.maps).enumerate() {
            let mu = sample(src, s, rng::mix(seed, i as u64))?;
            let nu = mu.points() * map.transpose();
            for r in 0..s {
                inputs.row_mut(i * s + r).copy_from(&mu.points().row(r));
                targets.row_mut(i * s + r).copy_from(&nu.row(r));
                pair.push(i);
            }
        }
        Ok(Batch { pair, inputs, targets })
    }
}

/// Complex features of the training pairs at one bandwidth, zero-padded to rank `ell`.
fn features_at(d_train: &Matrix, spec: &KernelSpec, sigma: f64, ell: usize) -> Result<GramModel> {
    let k = gram(d_train, sigma, spec.convention)?;
    let available = positive_rank(&k)?;
    truncate_and_features(&k, Some(ell.min(available)))
}

/// Point covariance `(F diag(w) Fᵀ) ∘ (M Mᵀ)` between two point sets.
fn point_kernel(fa: &Matrix, ma: &Matrix, fb: &Matrix, mb: &Matrix, weights: &Vector) -> Matrix {
    let weighted = Matrix::from_fn(fa.nrows(), fa.ncols(), |i, l| fa[(i, l)] * weights[l]);
    (weighted * fb.transpose()).component_mul(&(ma * mb.transpose()))
}

/// Features of each point, `n × ell` (columns past the model rank are zero).
fn point_features(model: &GramModel, pair: &[usize], ell: usize) -> Matrix {
    Matrix::from_fn(pair.len(), ell, |p, l| if l < model.rank() { model.features[(pair[p], l)] } else { 0.0 })
}

/// Training data and fixed settings of the objective.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    /// Distances between the training items.
    pub d_train: &'a Matrix,
    pub spec: &'a KernelSpec,
    /// Bandwidth at scale 1.
    pub base_sigma: f64,
}

impl Problem<'_> {
    fn sigma(&self, theta: &Theta) -> f64 {
        self.base_sigma * theta.scale()
    }

    fn evidence(&self, theta: &Theta, batch: &Batch) -> Result<(Evidence, GramModel, Matrix)> {
        let ell = theta.rank();
        let model = features_at(self.d_train, self.spec, self.sigma(theta), ell)?;
        let f = point_features(&model, &batch.pair, ell);
        let k = point_kernel(&f, &batch.inputs, &f, &batch.inputs, &theta.weights());
        let ev = Evidence::new(&k, theta.noise_variance(), theta.mean(), &batch.targets)?;
        Ok((ev, model, f))
    }

    /// Log marginal likelihood of `batch` under `theta`.
    pub fn mll(&self, theta: &Theta, batch: &Batch) -> Result<f64> {
        Ok(self.evidence(theta, batch)?.0.value)
    }

    /// Log marginal likelihood and its gradient in `θ`.
    ///
    /// Analytic in the mean, noise and feature weights; central differences in
    /// the bandwidth scale, which changes the feature map itself.
    pub fn mll_gradient(&self, theta: &Theta, batch: &Batch) -> Result<(f64, Vector)> {
        let (ev, _, f) = self.evidence(theta, batch)?;
        let outputs = batch.targets.ncols();
        let w = ev.weight_matrix(outputs);
        let mut grad = Vector::zeros(theta.0.len());
        grad[Theta::MEAN] = ev.alpha.sum();
        grad[Theta::LOG_NOISE] = 0.5 * theta.noise_variance() * w.trace();
        let h = w.component_mul(&(&batch.inputs * batch.inputs.transpose()));
        let weights = theta.weights();
        for l in 0..theta.rank() {
            let col = f.column(l);
            grad[Theta::WEIGHTS + l] = 0.5 * weights[l] * col.dot(&(&h * col));
        }
        let shifted = |delta: f64| {
            let mut t = theta.clone();
            t.0[Theta::LOG_SCALE] += delta;
            self.mll(&t, batch)
        };
        grad[Theta::LOG_SCALE] = (shifted(SCALE_STEP)? - shifted(-SCALE_STEP)?) / (2.0 * SCALE_STEP);
        Ok((ev.value, grad))
    }
}

/// How the base bandwidth is chosen before training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// [`default_sigma`] of the training distances; negative Gram
    /// eigenvalues are dropped by the feature truncation.
    Median,
    /// Largest bandwidth on the [`PsdSearch`] ladder with a PSD Gram matrix.
    PsdSearch,
    Fixed(f64),
}

/// Training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    /// Samples drawn per pair and epoch.
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Upper bound on the number of complex features.
    pub max_rank: Option<usize>,
    /// Starting hyperparameters; standard normal draws when absent.
    pub init: Option<Theta>,
    /// Bandwidth at scale 1.
    pub bandwidth: Bandwidth,
    pub psd: PsdSearch,
    pub degree: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch: 8,
            learning_rate: 1e-2,
            seed: 0,
            max_rank: None,
            init: None,
            bandwidth: Bandwidth::Median,
            psd: PsdSearch::default(),
            degree: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Per-epoch record, the data of a training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub noise: f64,
}

/// Held-out pairs and their distances to the training items (`test × train`).
#[derive(Debug, Clone)]
pub struct TestSet<'a> {
    pub pairs: &'a [TrainingPair],
    pub d_test_train: &'a Matrix,
}

/// Fitted Gaussian process, self-contained for prediction and checkpointing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    /// Distance and convention; `sigma` is the fitted bandwidth.
    pub kernel: KernelSpec,
    pub base_sigma: f64,
    pub theta: Theta,
    /// Complex features at the fitted bandwidth.
    pub features: GramModel,
    /// Training items as seen by the distance.
    pub items: Vec<CwComplex>,
    /// Cochain size of the signals.
    pub size: usize,
    pub degree: usize,
    pub train: Batch,
}

/// Predictive mean and variance of every target coordinate at sampled inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub inputs: Matrix,
    pub mean: Matrix,
    /// Variance of the latent function value, per point. Includes the part of
    /// the complex kernel the truncated features do not capture.
    pub variance: Vector,
}

impl GpModel {
    /// The training kernel matrix over points, without noise.
    pub fn point_gram(&self) -> Matrix {
        let f = point_features(&self.features, &self.train.pair, self.theta.rank());
        point_kernel(&f, &self.train.inputs, &f, &self.train.inputs, &self.theta.weights())
    }

    /// Log marginal likelihood of the training points.
    pub fn mll(&self) -> Result<f64> {
        log_marginal_likelihood(&self.point_gram(), self.theta.noise_variance(), self.theta.mean(), &self.train.targets)
    }

    /// Posterior at inputs `mu` of complexes with the given feature rows.
    fn posterior(&self, features: &Matrix, mu: &Matrix) -> Result<Prediction> {
        let ell = self.theta.rank();
        let weights = self.theta.weights();
        let f_train = point_features(&self.features, &self.train.pair, ell);
        let k = point_kernel(&f_train, &self.train.inputs, &f_train, &self.train.inputs, &weights);
        let ev = Evidence::new(&k, self.theta.noise_variance(), self.theta.mean(), &self.train.targets)?;
        let cross = point_kernel(features, mu, &f_train, &self.train.inputs, &weights);
        let mean = (&cross * &ev.alpha).add_scalar(self.theta.mean());
        let solved = ev.chol.solve(&cross.transpose());
        let mean_weight = weights.mean();
        let variance = Vector::from_fn(mu.nrows(), |p, _| {
            let phi = features.row(p);
            // the part of k(x, x) = 1 the features miss acts as an independent component
            let residual = (1.0 - phi.norm_squared()).max(0.0);
            let explained: f64 = (0..ell).map(|l| weights[l] * phi[l] * phi[l]).sum();
            let prior = (explained + mean_weight * residual) * mu.row(p).norm_squared();
            (prior - cross.row(p).dot(&solved.column(p).transpose())).max(0.0)
        });
        Ok(Prediction { inputs: mu.clone(), mean, variance })
    }

    /// Embeds complexes from their distances to the training items (`m × N`).
    fn embed(&self, distances: &Matrix) -> Result<Matrix> {
        let ell = self.theta.rank();
        let mut out = Matrix::zeros(distances.nrows(), ell);
        for r in 0..distances.nrows() {
            let kx = kernel_vector(&distances.row(r).transpose(), self.kernel.sigma, self.kernel.convention)?;
            let phi = self.features.embed(&kx)?;
            out.row_mut(r).columns_mut(0, phi.len()).copy_from(&phi.transpose());
        }
        Ok(out)
    }

    /// Predictive distribution of the transported signal of a new complex.
    ///
    /// `item` is compared with the training items; inputs are drawn from the
    /// signal of `source`.
    pub fn predict(&self, item: &CwComplex, source: &CwComplex, n_samples: usize, seed: u64) -> Result<Prediction> {
        let src = GaussianSignal::from_complex_padded(source, self.degree, self.size)?;
        let mu = sample(&src, n_samples, seed)?;
        let d = cross_distance(std::slice::from_ref(item), &self.items, &self.kernel.distance, None)?;
        let phi = self.embed(&d)?;
        let features = Matrix::from_fn(n_samples, phi.ncols(), |_, l| phi[(0, l)]);
        self.posterior(&features, mu.points())
    }

    /// Mean negative log predictive density per point of a held-out batch,
    /// summed over output coordinates.
    pub fn test_loss(&self, d_test_train: &Matrix, batch: &Batch) -> Result<f64> {
        let phi = self.embed(d_test_train)?;
        let features = Matrix::from_fn(batch.len(), phi.ncols(), |p, l| phi[(batch.pair[p], l)]);
        let pred = self.posterior(&features, &batch.inputs)?;
        let noise = self.theta.noise_variance();
        let mut total = 0.0;
        for p in 0..batch.len() {
            let var = pred.variance[p] + noise;
            for c in 0..batch.targets.ncols() {
                let r = batch.targets[(p, c)] - pred.mean[(p, c)];
                total += 0.5 * (LN_2PI + var.ln() + r * r / var);
            }
        }
        Ok(total / batch.len() as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Result of [`fit`]: hyperparameters, fitted model and complex Gram matrix.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub theta: Theta,
    pub model: GpModel,
    /// Complex kernel matrix at the fitted bandwidth.
    pub gram: Matrix,
    pub history: Vec<EpochRecord>,
}

const EVAL_SALT: u64 = 0xe7a1;
const TEST_SALT: u64 = 0x7e57;
const EPOCH_SALT: u64 = 0xe90c;

fn signal_size(pairs: &[TrainingPair], degree: usize) -> Result<usize> {
    let mut size = 0;
    for p in pairs {
        for c in [&p.source, &p.target] {
            if degree > c.dimension() {
                return Err(Error::DegreeOutOfRange { degree, dimension: c.dimension() });
            }
            size = size.max(c.cells(degree));
        }
    }
    Ok(size)
}

/// Trains on `pairs`, computing their distances first.
pub fn fit(pairs: &[TrainingPair], spec: &KernelSpec, config: &FitConfig, cache: Option<&DistanceCache>) -> Result<FitOutput> {
    let items: Vec<CwComplex> = pairs.iter().map(|p| p.item.clone()).collect();
    let d = pairwise_distance(&items, &spec.distance, cache)?;
    fit_with_distances(pairs, &d, None, spec, config)
}

/// Gradient descent on `J = −MLL / n`.
///
/// Every epoch draws a fresh batch for the gradient step. Reported losses use
/// batches drawn once, so the curve reflects the parameters rather than the
/// sampling noise.
pub fn fit_with_distances(
    pairs: &[TrainingPair],
    d_train: &Matrix,
    test: Option<TestSet<'_>>,
    spec: &KernelSpec,
    config: &FitConfig,
) -> Result<FitOutput> {
    config.validate()?;
    spec.distance.validate()?;
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no training pairs".into()));
    }
    let mut all = pairs.to_vec();
    if let Some(t) = &test {
        all.extend_from_slice(t.pairs);
    }
    let size = signal_size(&all, config.degree)?;
    let prepared = PreparedPairs::new(pairs, config.degree, size)?;
    let base_sigma = match config.bandwidth {
        Bandwidth::Fixed(s) => s,
        Bandwidth::Median => default_sigma(d_train, spec.convention),
        Bandwidth::PsdSearch => sigma_psd_search(d_train, &PsdSearch { convention: spec.convention, ..config.psd })?,
    };
    let mut spec = spec.clone();
    spec.sigma = base_sigma;
    spec.validate()?;

    let available = stable_rank(&gram(d_train, base_sigma, spec.convention)?)?;
    let ell = config.max_rank.map_or(available, |r| r.min(available));
    let mut theta = match &config.init {
        Some(t) if t.rank() != ell => {
            return Err(Error::InvalidArgument(format!("initial theta has rank {}, the kernel has {ell}", t.rank())))
        }
        Some(t) => t.clone(),
        None => Theta::random(ell, config.seed),
    };
    let problem = Problem { d_train, spec: &spec, base_sigma };

    let eval_batch = prepared.draw(config.batch, rng::mix(config.seed, EVAL_SALT))?;
    let test_data = match &test {
        Some(t) => {
            let tp = PreparedPairs::new(t.pairs, config.degree, size)?;
            Some((tp.draw(config.batch, rng::mix(config.seed, TEST_SALT))?, t.d_test_train))
        }
        None => None,
    };

    let items: Vec<CwComplex> = pairs.iter().map(|p| p.item.clone()).collect();
    let build = |theta: &Theta| -> Result<GpModel> {
        let sigma = base_sigma * theta.scale();
        let features = features_at(d_train, &spec, sigma, theta.rank())?;
        let mut kernel = spec.clone();
        kernel.sigma = sigma;
        Ok(GpModel {
            kernel,
            base_sigma,
            theta: theta.clone(),
            features,
            items: items.clone(),
            size,
            degree: config.degree,
            train: eval_batch.clone(),
        })
    };

    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let batch = prepared.draw(config.batch, rng::mix(config.seed, EPOCH_SALT + epoch as u64))?;
        let n = batch.len() as f64;
        let (value, grad) = problem.mll_gradient(&theta, &batch)?;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { epoch, value: -value / n });
        }
        // J = −MLL / n
        theta.0 += grad * (config.learning_rate / n);
        let model = build(&theta)?;
        let train_loss = -model.mll()? / eval_batch.len() as f64;
        let test_loss = match &test_data {
            Some((tb, d)) => Some(model.test_loss(d, tb)?),
            None => None,
        };
        if !train_loss.is_finite() || test_loss.is_some_and(|t| !t.is_finite()) {
            return Err(Error::Diverged { epoch, value: train_loss });
        }
        history.push(EpochRecord { epoch, train_loss, test_loss, noise: theta.noise_variance() });
    }
    let model = build(&theta)?;
    let gram = model.features.gram.clone();
    Ok(FitOutput { theta, model, gram, history })
}

/// Loss curve as CSV: `epoch,train_loss,test_loss,noise`.
pub fn loss_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,test_loss,noise\n");
    for r in history {
        let test = r.test_loss.map_or(String::new(), |t| t.to_string());
        out.push_str(&format!("{},{},{},{}\n", r.epoch, r.train_loss, test, r.noise));
    }
    out
}

/// Parses [`loss_csv`] output.
pub fn parse_loss_csv(text: &str) -> Result<Vec<EpochRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some("epoch,train_loss,test_loss,noise") {
        return Err(Error::Parse("unexpected loss CSV header".into()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("expected 4 fields in {line:?}")));
            }
            Ok(EpochRecord {
                epoch: f[0].parse().map_err(|e| Error::Parse(format!("{:?}: {e}", f[0])))?,
                train_loss: num(f[1])?,
                test_loss: if f[2].is_empty() { None } else { Some(num(f[2])?) },
                noise: num(f[3])?,
            })
        })
        .collect()
}
