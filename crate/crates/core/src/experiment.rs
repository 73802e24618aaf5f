//! Randomized kernel comparison: dataset generation and end-to-end runs.
//!
//! Every dataset item is a graph `x`, a vector of positive vertex features `w`
//! and a target `y`, which is `x` carrying `w` as its vertex weights. The
//! graphs are independent rewirings of one random base graph, so vertex labels
//! mean the same thing across items. The Wasserstein kernel compares the plain sources `x`;
//! the FGW kernel compares `x` with its features attached, so it sees the
//! information that decides the targets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::complex::{CwComplex, GeneratorSpec, WeightLaw};
use crate::error::{Error, Result};
use crate::gp::{fit_with_distances, GpModel, loss_csv, EpochRecord, FitConfig, TestSet, TrainingPair};
use crate::kernels::{pairwise_distance, DistanceCache, DistanceKind, DistanceSpec, ExponentConvention, KernelSpec};
use crate::{io, rng, Matrix};

/// Floor added to `|z|` so every feature is a valid cell weight.
const FEATURE_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n: usize,
    pub n_vertices: usize,
    /// Edge density of the base graph.
    pub edge_prob: f64,
    /// Probability that an item toggles a vertex pair of the base graph.
    pub rewire_prob: f64,
    /// Training fraction; the first `⌈split · n⌉` shuffled ids train.
    pub split: f64,
    /// Number of shared feature profiles; each item perturbs one of them.
    pub prototypes: usize,
    /// Standard deviation of the per-item feature perturbation.
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { n: 200, n_vertices: 8, edge_prob: 0.5, rewire_prob: 0.1, split: 0.7, prototypes: 4, feature_noise: 0.1, seed: 0 }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n_vertices == 0 || self.prototypes == 0 {
            return Err(Error::InvalidArgument("dataset needs at least 2 items, 1 vertex and 1 prototype".into()));
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return Err(Error::InvalidArgument(format!("feature noise must be finite and nonnegative, got {}", self.feature_noise)));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::InvalidArgument(format!("split must lie in (0, 1), got {}", self.split)));
        }
        for (name, p) in [("edge", self.edge_prob), ("rewire", self.rewire_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} probability must lie in [0, 1], got {p}")));
            }
        }
        let train = self.train_size();
        if train == self.n {
            return Err(Error::InvalidArgument(format!("split {} leaves no test items out of {}", self.split, self.n)));
        }
        Ok(())
    }

    pub fn train_size(&self) -> usize {
        (self.split * self.n as f64).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub id: String,
    pub seed: u64,
    pub x: CwComplex,
    /// Vertex features.
    pub features: Vec<f64>,
    pub y: CwComplex,
}

impl Item {
    /// `x` with its features attached as vertex weights.
    pub fn featured(&self) -> CwComplex {
        self.x.clone().with_weights(0, self.features.clone())
    }

    /// The complex the given distance compares.
    pub fn kernel_view(&self, kind: DistanceKind) -> CwComplex {
        match kind {
            DistanceKind::Wasserstein => self.x.clone(),
            DistanceKind::Fgw => self.featured(),
        }
    }

    pub fn pair(&self, kind: DistanceKind) -> TrainingPair {
        TrainingPair { item: self.kernel_view(kind), source: self.x.clone(), target: self.y.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub items: Vec<Item>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded dataset; identical for identical configs.
pub fn generate(config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    let spec = GeneratorSpec {
        n_vertices: config.n_vertices,
        edge_prob: config.edge_prob,
        fill_prob: 0.0,
        weight_law: WeightLaw::Unit,
    };
    let n = config.n_vertices;
    let mut base_rng = rng::stream(config.seed, 45);
    let base: Vec<bool> = (0..n * n).map(|_| base_rng.random::<f64>() < config.edge_prob).collect();
    let mut proto_rng = rng::stream(config.seed, 47);
    let profiles: Vec<Vec<f64>> =
        (0..config.prototypes).map(|_| (0..n).map(|_| StandardNormal.sample(&mut proto_rng)).collect()).collect();
    let mut items = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let seed = rng::mix(config.seed, i as u64);
        let mut r = rng::stream(seed, 0);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if base[a * n + b] != (r.random::<f64>() < config.rewire_prob) {
                    edges.push((a, b));
                }
            }
        }
        let x = CwComplex::from_edges(n, &edges, &spec, &mut r);
        let profile = &profiles[r.random_range(0..config.prototypes)];
        let features: Vec<f64> = profile
            .iter()
            .map(|&c| {
                let z: f64 = StandardNormal.sample(&mut r);
                (c + config.feature_noise * z).abs() + FEATURE_FLOOR
            })
            .collect();
        let y = x.clone().with_weights(0, features.clone());
        items.push(Item { id: format!("{i:04}"), seed, x, features, y });
    }
    let mut order: Vec<usize> = (0..config.n).collect();
    order.shuffle(&mut rng::stream(config.seed, 43));
    let (train, test) = order.split_at(config.train_size());
    let (mut train, mut test) = (train.to_vec(), test.to_vec());
    train.sort_unstable();
    test.sort_unstable();
    Ok(Dataset { config: config.clone(), items, train, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestItem {
    id: String,
    seed: u64,
    x: String,
    y: String,
    features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    config: DatasetConfig,
    train: Vec<String>,
    test: Vec<String>,
    items: Vec<ManifestItem>,
}

/// Output files as `(relative path, contents)`, written only once complete.
type Files = Vec<(PathBuf, Vec<u8>)>;

/// Writes all files atomically; on failure removes the ones already written.
fn write_all(dir: &Path, files: &Files) -> Result<()> {
    let mut written = Vec::new();
    for (rel, bytes) in files {
        let path = dir.join(rel);
        let result = path
            .parent()
            .map_or(Ok(()), |p| std::fs::create_dir_all(p).map_err(|source| Error::Io { path: p.to_path_buf(), source }))
            .and_then(|_| io::write_atomic(&path, bytes));
        if let Err(e) = result {
            for p in written {
                let _ = std::fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    Ok(())
}

impl Dataset {
    fn files(&self) -> Files {
        let mut files = Files::new();
        let mut items = Vec::with_capacity(self.items.len());
        for it in &self.items {
            let (x, y) = (format!("x_{}.json", it.id), format!("y_{}.json", it.id));
            files.push((PathBuf::from(&x), it.x.to_json().into_bytes()));
            files.push((PathBuf::from(&y), it.y.to_json().into_bytes()));
            items.push(ManifestItem { id: it.id.clone(), seed: it.seed, x, y, features: it.features.clone() });
        }
        let ids = |v: &[usize]| v.iter().map(|&i| self.items[i].id.clone()).collect();
        let manifest = Manifest { config: self.config.clone(), train: ids(&self.train), test: ids(&self.test), items };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        files.push((PathBuf::from("manifest.json"), text.into_bytes()));
        files
    }

    /// Writes `x_*.json`, `y_*.json` and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_all(dir, &self.files())
    }

    /// Reads a dataset written by [`Dataset::write`].
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|source| Error::Io { path: path.clone(), source })?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json { path, source })?;
        let mut items = Vec::with_capacity(manifest.items.len());
        let mut index = BTreeMap::new();
        for m in manifest.items {
            let x = CwComplex::read(&dir.join(&m.x))?;
            let y = CwComplex::read(&dir.join(&m.y))?;
            if m.features.len() != x.cells(0) {
                return Err(Error::Parse(format!("item {}: {} features for {} vertices", m.id, m.features.len(), x.cells(0))));
            }
            index.insert(m.id.clone(), items.len());
            items.push(Item { id: m.id, seed: m.seed, x, features: m.features, y });
        }
        let lookup = |ids: &[String]| {
            ids.iter()
                .map(|id| index.get(id).copied().ok_or_else(|| Error::Parse(format!("unknown item id {id}"))))
                .collect::<Result<Vec<usize>>>()
        };
        Ok(Dataset { config: manifest.config, train: lookup(&manifest.train)?, test: lookup(&manifest.test)?, items })
    }
}

/// Settings of one training run on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub kind: DistanceKind,
    pub p: f64,
    pub alpha: f64,
    pub degree: usize,
    pub convention: ExponentConvention,
    pub fit: FitConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kind: DistanceKind::Wasserstein,
            p: 2.0,
            alpha: 0.5,
            degree: 0,
            convention: ExponentConvention::Squared,
            fit: FitConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn distance_spec(&self) -> DistanceSpec {
        let mut spec = match self.kind {
            DistanceKind::Wasserstein => DistanceSpec::wasserstein(self.p, self.degree),
            DistanceKind::Fgw => DistanceSpec::fgw(self.alpha, self.p, self.degree),
        };
        // one vertex set per dataset; padding only matters for degree > 0
        spec.pad = true;
        spec.seed = self.fit.seed;
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub kind: DistanceKind,
    pub sigma: f64,
    pub rank: usize,
    pub final_train_loss: f64,
    pub final_test_loss: f64,
    pub history: Vec<EpochRecord>,
}

/// Output of one run: summary plus the Gram matrix over training items.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub gram: Matrix,
    pub train_ids: Vec<String>,
    pub model: GpModel,
}

/// Fits the GP for one kernel and evaluates it on the held-out items.
pub fn run(dataset: &Dataset, config: &RunConfig, cache: Option<&DistanceCache>) -> Result<RunOutput> {
    let spec = config.distance_spec();
    let order: Vec<usize> = dataset.train.iter().chain(&dataset.test).copied().collect();
    let views: Vec<CwComplex> = order.iter().map(|&i| dataset.items[i].kernel_view(config.kind)).collect();
    let d = pairwise_distance(&views, &spec, cache)?;
    let m = dataset.train.len();
    let d_train = d.view((0, 0), (m, m)).into_owned();
    let d_test = d.view((m, 0), (order.len() - m, m)).into_owned();
    let train: Vec<TrainingPair> = dataset.train.iter().map(|&i| dataset.items[i].pair(config.kind)).collect();
    let test: Vec<TrainingPair> = dataset.test.iter().map(|&i| dataset.items[i].pair(config.kind)).collect();
    let kernel = KernelSpec { distance: spec, sigma: 1.0, convention: config.convention };
    let fit_config = FitConfig { degree: config.degree, ..config.fit.clone() };
    let out = fit_with_distances(&train, &d_train, Some(TestSet { pairs: &test, d_test_train: &d_test }), &kernel, &fit_config)?;
    let last = out.history.last().expect("at least one epoch");
    let summary = RunSummary {
        kind: config.kind,
        sigma: out.model.kernel.sigma,
        rank: out.theta.rank(),
        final_train_loss: last.train_loss,
        final_test_loss: last.test_loss.expect("test set supplied"),
        history: out.history.clone(),
    };
    let train_ids = dataset.train.iter().map(|&i| dataset.items[i].id.clone()).collect();
    Ok(RunOutput { summary, gram: out.gram, train_ids, model: out.model })
}

fn kind_name(kind: DistanceKind) -> &'static str {
    match kind {
        DistanceKind::Wasserstein => "w",
        DistanceKind::Fgw => "fgw",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub dataset: DatasetConfig,
    pub runs: Vec<RunSummary>,
    /// With both kernels: whether FGW reached the lower test loss.
    pub fgw_better: Option<bool>,
}

/// Runs every kernel in `kinds` on the same dataset and writes, under `out`,
/// `summary.json` and per kernel `<kind>/loss.csv` and `<kind>/gram.csv`.
/// Nothing is left behind when a run fails.
pub fn run_experiment(
    dataset: &Dataset,
    base: &RunConfig,
    kinds: &[DistanceKind],
    out: Option<&Path>,
    cache: Option<&DistanceCache>,
) -> Result<ExperimentSummary> {
    let mut files = Files::new();
    let mut runs = Vec::new();
    for &kind in kinds {
        let r = run(dataset, &RunConfig { kind, ..base.clone() }, cache)?;
        let name = kind_name(kind);
        files.push((Path::new(name).join("loss.csv"), loss_csv(&r.summary.history).into_bytes()));
        files.push((Path::new(name).join("gram.csv"), io::matrix_csv(&r.train_ids, &r.train_ids, &r.gram).into_bytes()));
        runs.push(r.summary);
    }
    let loss = |k| runs.iter().find(|r| r.kind == k).map(|r| r.final_test_loss);
    let fgw_better = match (loss(DistanceKind::Fgw), loss(DistanceKind::Wasserstein)) {
        (Some(f), Some(w)) => Some(f < w),
        _ => None,
    };
    let summary = ExperimentSummary { dataset: dataset.config.clone(), runs, fgw_better };
    if let Some(dir) = out {
        files.push((PathBuf::from("summary.json"), serde_json::to_string_pretty(&summary).expect("summary serializes").into_bytes()));
        write_all(dir, &files)?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_valid() {
        let config = DatasetConfig { n: 4, seed: 1, ..Default::default() };
        let a = generate(&config).unwrap();
        assert_eq!(a, generate(&config).unwrap());
        assert_eq!(a.train.len(), 3);
        assert_eq!(a.test.len(), 1);
        for it in &a.items {
            assert!(it.x.validate().is_empty() && it.y.validate().is_empty());
            assert!(it.featured().validate().is_empty());
            assert!(it.features.iter().all(|&w| w >= FEATURE_FLOOR));
        }
        assert_ne!(a, generate(&DatasetConfig { seed: 2, ..config }).unwrap());
    }

    #[test]
    fn split_rounds_up() {
        for (n, train) in [(10, 7), (11, 8), (200, 140), (3, 3)] {
            let c = DatasetConfig { n, ..Default::default() };
            assert_eq!(c.train_size(), train);
        }
        assert!(generate(&DatasetConfig { n: 3, ..Default::default() }).is_err());
    }

    #[test]
    fn dataset_round_trips_through_files() {
        let d = generate(&DatasetConfig { n: 5, seed: 3, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.write(dir.path()).unwrap();
        assert_eq!(Dataset::read(dir.path()).unwrap(), d);
        let first = std::fs::read(dir.path().join("manifest.json")).unwrap();
        d.write(dir.path()).unwrap();
        assert_eq!(std::fs::read(dir.path().join("manifest.json")).unwrap(), first);
    }

    #[test]
    fn small_experiment_writes_every_output() {
        let d = generate(&DatasetConfig { n: 12, n_vertices: 5, seed: 4, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let base = RunConfig { fit: FitConfig { epochs: 3, ..Default::default() }, ..Default::default() };
        let s = run_experiment(&d, &base, &[DistanceKind::Wasserstein, DistanceKind::Fgw], Some(dir.path()), None).unwrap();
        assert_eq!(s.runs.len(), 2);
        assert!(s.fgw_better.is_some());
        for kind in ["w", "fgw"] {
            let loss = std::fs::read_to_string(dir.path().join(kind).join("loss.csv")).unwrap();
            assert_eq!(crate::gp::parse_loss_csv(&loss).unwrap().len(), 3);
            let (rows, _, g) = io::parse_matrix_csv(&std::fs::read_to_string(dir.path().join(kind).join("gram.csv")).unwrap()).unwrap();
            assert_eq!(rows.len(), 9);
            assert_eq!(g.nrows(), 9);
        }
        let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
        let parsed: ExperimentSummary = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, s);
    }

    #[test]
    fn failed_runs_leave_no_files() {
        let d = generate(&DatasetConfig { n: 6, n_vertices: 4, seed: 5, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let base = RunConfig { p: 0.5, ..Default::default() };
        assert!(run_experiment(&d, &base, &[DistanceKind::Wasserstein], Some(dir.path()), None).is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
