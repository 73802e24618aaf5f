//! Finite weighted CW complexes.
//!
//! A complex of dimension `n` is stored as its cell counts `N_0..=N_n`, the
//! signed incidence matrices `B_1..=B_n` (`B_k` is `N_{k-1} x N_k`, column `j`
//! holding the boundary of the `j`-th k-cell as a (k-1)-chain) and one
//! strictly positive weight per cell.
//!
//! The weighted Hodge Laplacian on k-cochains is
//!
//! ```text
//! Δ_k = B_kᵀ W_{k-1}⁻¹ B_k W_k + W_k⁻¹ B_{k+1} W_{k+1} B_{k+1}ᵀ
//! ```
//!
//! with the missing terms at `k = 0` and `k = n` dropped. It is self-adjoint
//! for the weighted inner product but not symmetric as a matrix, so all
//! spectral work goes through [`CwComplex::symmetric_representative`], the
//! same operator written in a weighted-orthonormal basis.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::{io, rng, Matrix};

/// Dense integer incidence matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IncidenceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IncidenceMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0; rows * cols] }
    }

    /// Builds from `(row, col, coefficient)` triplets; repeated positions add up.
    pub fn from_triplets(rows: usize, cols: usize, entries: &[(usize, usize, i64)]) -> Result<Self> {
        let mut m = Self::zeros(rows, cols);
        for &(r, c, v) in entries {
            if r >= rows || c >= cols {
                return Err(Error::Parse(format!(
                    "incidence entry ({r}, {c}) outside a {rows}x{cols} matrix"
                )));
            }
            m.data[r * cols + c] += v;
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged incidence rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.data[row * self.cols + col]
    }

    /// Nonzero entries ordered by `(col, row)`.
    pub fn triplets(&self) -> Vec<(usize, usize, i64)> {
        let mut out = Vec::new();
        for c in 0..self.cols {
            for r in 0..self.rows {
                let v = self.get(r, c);
                if v != 0 {
                    out.push((r, c, v));
                }
            }
        }
        out
    }

    /// Exact integer product; `None` on shape mismatch.
    pub fn mul(&self, rhs: &IncidenceMatrix) -> Option<IncidenceMatrix> {
        if self.cols != rhs.rows {
            return None;
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.get(k, j);
                }
            }
        }
        Some(out)
    }

    pub fn to_real(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |r, c| self.get(r, c) as f64)
    }
}

/// Integer combination of k-cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub degree: usize,
    pub coefficients: Vec<i64>,
}

impl Chain {
    pub fn new(degree: usize, coefficients: Vec<i64>) -> Self {
        Self { degree, coefficients }
    }

    /// The elementary chain `1·e_cell`.
    pub fn cell(degree: usize, len: usize, cell: usize) -> Self {
        let mut coefficients = vec![0; len];
        coefficients[cell] = 1;
        Self { degree, coefficients }
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&c| c == 0)
    }
}

/// Real-valued signal on k-cells, stored in the dual basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    pub degree: usize,
    pub values: Vec<f64>,
}

impl Cochain {
    pub fn new(degree: usize, values: Vec<f64>) -> Self {
        Self { degree, values }
    }

    /// Evaluates the cochain on a chain of the same degree.
    pub fn evaluate(&self, chain: &Chain) -> Result<f64> {
        if chain.degree != self.degree || chain.coefficients.len() != self.values.len() {
            return Err(Error::ChainLength {
                degree: self.degree,
                expected: self.values.len(),
                found: chain.coefficients.len(),
            });
        }
        Ok(chain.coefficients.iter().zip(&self.values).map(|(&c, v)| c as f64 * v).sum())
    }
}

/// One failed invariant, as reported by [`CwComplex::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    CellCountLength { expected: usize, found: usize },
    BoundaryCount { expected: usize, found: usize },
    BoundaryShape { k: usize, expected: (usize, usize), found: (usize, usize) },
    WeightCount { expected: usize, found: usize },
    WeightLength { k: usize, expected: usize, found: usize },
    NonPositiveWeight { k: usize, cell: usize, value: f64 },
    BoundaryOfBoundary { k: usize, row: usize, col: usize, value: i64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CellCountLength { expected, found } => {
                write!(f, "cell_counts has {found} entries, expected {expected}")
            }
            Violation::BoundaryCount { expected, found } => {
                write!(f, "{found} boundary matrices given, expected {expected}")
            }
            Violation::BoundaryShape { k, expected, found } => write!(
                f,
                "B_{k} is {}x{}, expected {}x{}",
                found.0, found.1, expected.0, expected.1
            ),
            Violation::WeightCount { expected, found } => {
                write!(f, "{found} weight vectors given, expected {expected}")
            }
            Violation::WeightLength { k, expected, found } => {
                write!(f, "w^{k} has {found} entries, expected {expected}")
            }
            Violation::NonPositiveWeight { k, cell, value } => {
                write!(f, "weight of {k}-cell {cell} is {value}, must be > 0")
            }
            Violation::BoundaryOfBoundary { k, row, col, value } => {
                write!(f, "(B_{k} B_{}) [{row},{col}] = {value}, must be 0", k + 1)
            }
        }
    }
}

/// Finite weighted CW complex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ComplexFile", try_from = "ComplexFile")]
pub struct CwComplex {
    dimension: usize,
    cell_counts: Vec<usize>,
    /// `boundaries[k - 1]` is `B_k`.
    boundaries: Vec<IncidenceMatrix>,
    weights: Vec<Vec<f64>>,
}

impl CwComplex {
    /// Stores the parts without checking them; see [`CwComplex::validate`].
    pub fn from_parts(
        dimension: usize,
        cell_counts: Vec<usize>,
        boundaries: Vec<IncidenceMatrix>,
        weights: Vec<Vec<f64>>,
    ) -> Self {
        Self { dimension, cell_counts, boundaries, weights }
    }

    /// Like [`CwComplex::from_parts`] but rejects invalid input.
    pub fn new(
        dimension: usize,
        cell_counts: Vec<usize>,
        boundaries: Vec<IncidenceMatrix>,
        weights: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let c = Self::from_parts(dimension, cell_counts, boundaries, weights);
        c.ensure_valid()?;
        Ok(c)
    }

    /// `n` vertices and no higher cells, unit weights.
    pub fn isolated(n: usize) -> Self {
        Self::from_parts(0, vec![n], Vec::new(), vec![vec![1.0; n]])
    }

    /// Path graph on `n ≥ 2` vertices with edge `i` oriented so that
    /// `∂e_i = v_i - v_{i+1}`; unit weights.
    pub fn path(n: usize) -> Self {
        assert!(n >= 2, "a path needs two vertices");
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Self::graph(n, &edges)
    }

    /// 1-complex from an edge list; edge `(i, j)` gets `+1` at `i` and `-1` at `j`.
    pub fn graph(n_vertices: usize, edges: &[(usize, usize)]) -> Self {
        let mut b1 = IncidenceMatrix::zeros(n_vertices, edges.len());
        for (e, &(i, j)) in edges.iter().enumerate() {
            b1.data[i * edges.len() + e] += 1;
            b1.data[j * edges.len() + e] -= 1;
        }
        Self::from_parts(
            1,
            vec![n_vertices, edges.len()],
            vec![b1],
            vec![vec![1.0; n_vertices], vec![1.0; edges.len()]],
        )
    }

    /// Same complex with the weights of degree `k` replaced.
    pub fn with_weights(mut self, k: usize, weights: Vec<f64>) -> Self {
        self.weights[k] = weights;
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn cell_counts(&self) -> &[usize] {
        &self.cell_counts
    }

    /// Number of k-cells; zero above the top dimension.
    pub fn cells(&self, k: usize) -> usize {
        self.cell_counts.get(k).copied().unwrap_or(0)
    }

    /// `B_k` for `1 ≤ k ≤ n`.
    pub fn boundary(&self, k: usize) -> Option<&IncidenceMatrix> {
        if k == 0 {
            None
        } else {
            self.boundaries.get(k - 1)
        }
    }

    pub fn weights(&self, k: usize) -> &[f64] {
        &self.weights[k]
    }

    /// Lists every violated invariant. An empty list means the complex is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.dimension;
        let mut out = Vec::new();
        if self.cell_counts.len() != n + 1 {
            out.push(Violation::CellCountLength { expected: n + 1, found: self.cell_counts.len() });
        }
        if self.boundaries.len() != n {
            out.push(Violation::BoundaryCount { expected: n, found: self.boundaries.len() });
        }
        if self.weights.len() != n + 1 {
            out.push(Violation::WeightCount { expected: n + 1, found: self.weights.len() });
        }
        if !out.is_empty() {
            return out;
        }

        let mut shapes_ok = true;
        for (idx, b) in self.boundaries.iter().enumerate() {
            let k = idx + 1;
            let expected = (self.cell_counts[k - 1], self.cell_counts[k]);
            if (b.rows, b.cols) != expected {
                shapes_ok = false;
                out.push(Violation::BoundaryShape { k, expected, found: (b.rows, b.cols) });
            }
        }
        for (k, w) in self.weights.iter().enumerate() {
            if w.len() != self.cell_counts[k] {
                out.push(Violation::WeightLength { k, expected: self.cell_counts[k], found: w.len() });
            }
            for (cell, &value) in w.iter().enumerate() {
                // NaN fails this comparison too
                if !(value > 0.0 && value.is_finite()) {
                    out.push(Violation::NonPositiveWeight { k, cell, value });
                }
            }
        }
        if shapes_ok {
            for k in 1..n {
                let prod = self.boundaries[k - 1]
                    .mul(&self.boundaries[k])
                    .expect("shapes checked");
                for r in 0..prod.rows {
                    for c in 0..prod.cols {
                        let value = prod.get(r, c);
                        if value != 0 {
                            out.push(Violation::BoundaryOfBoundary { k, row: r, col: c, value });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidComplex(v))
        }
    }

    fn check_degree(&self, k: usize) -> Result<()> {
        if k > self.dimension {
            Err(Error::DegreeOutOfRange { degree: k, dimension: self.dimension })
        } else {
            Ok(())
        }
    }

    /// Applies `∂_k` to a k-chain.
    pub fn boundary_apply(&self, chain: &Chain) -> Result<Chain> {
        let k = chain.degree;
        if k == 0 || k > self.dimension {
            return Err(Error::DegreeOutOfRange { degree: k, dimension: self.dimension });
        }
        let b = &self.boundaries[k - 1];
        if chain.coefficients.len() != b.cols {
            return Err(Error::ChainLength { degree: k, expected: b.cols, found: chain.coefficients.len() });
        }
        let coefficients = (0..b.rows)
            .map(|r| (0..b.cols).map(|c| b.get(r, c) * chain.coefficients[c]).sum())
            .collect();
        Ok(Chain { degree: k - 1, coefficients })
    }

    /// Matrix of the weighted Hodge Laplacian `Δ_k` acting on k-cochains.
    pub fn hodge_laplacian(&self, k: usize) -> Result<Matrix> {
        self.check_degree(k)?;
        self.ensure_valid()?;
        let nk = self.cell_counts[k];
        let wk = &self.weights[k];
        let mut lap = Matrix::zeros(nk, nk);

        if k >= 1 {
            // B_kᵀ W_{k-1}⁻¹ B_k W_k
            let b = self.boundaries[k - 1].to_real();
            let w_down = &self.weights[k - 1];
            let scaled = Matrix::from_fn(b.nrows(), b.ncols(), |r, c| b[(r, c)] / w_down[r]);
            let mut term = b.transpose() * scaled;
            for c in 0..nk {
                term.column_mut(c).scale_mut(wk[c]);
            }
            lap += term;
        }
        if k < self.dimension {
            // W_k⁻¹ B_{k+1} W_{k+1} B_{k+1}ᵀ
            let b = self.boundaries[k].to_real();
            let w_up = &self.weights[k + 1];
            let scaled = Matrix::from_fn(b.nrows(), b.ncols(), |r, c| b[(r, c)] * w_up[c]);
            let mut term = scaled * b.transpose();
            for r in 0..nk {
                term.row_mut(r).scale_mut(1.0 / wk[r]);
            }
            lap += term;
        }
        Ok(lap)
    }

    /// `W_k^{1/2} Δ_k W_k^{-1/2}`, symmetrized exactly. Similar to `Δ_k`.
    pub fn symmetric_representative(&self, k: usize) -> Result<Matrix> {
        let mut m = self.hodge_laplacian(k)?;
        let w = &self.weights[k];
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                m[(r, c)] *= (w[r] / w[c]).sqrt();
            }
        }
        Ok(crate::spectral::symmetrize(&m))
    }

    /// Content hash of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(&ComplexFile::from(self)).expect("complex serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ComplexFile::from(self)).expect("complex serializes")
    }

    /// Parses the JSON complex format. Shapes are checked, invariants are not.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ComplexFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_complex()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
        let file: ComplexFile =
            serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })?;
        file.into_complex()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_json().as_bytes())
    }

    /// Random complex: Erdős–Rényi 1-skeleton with each triangle filled as a
    /// 2-cell with probability `fill_prob`.
    pub fn random(seed: u64, spec: &GeneratorSpec) -> Result<Self> {
        spec.check()?;
        let mut rng = rng::stream(seed, 0);
        let n = spec.n_vertices;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < spec.edge_prob {
                    edges.push((i, j));
                }
            }
        }
        Ok(Self::from_edges(n, &edges, spec, &mut rng))
    }

    /// Builds a complex on a given 1-skeleton, filling triangles and drawing
    /// weights as [`CwComplex::random`] does.
    pub fn from_edges<R: Rng>(n: usize, edges: &[(usize, usize)], spec: &GeneratorSpec, rng: &mut R) -> Self {
        let edge_set: BTreeSet<(usize, usize)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        let edges: Vec<(usize, usize)> = edge_set.iter().copied().collect();
        let edge_index = |a: usize, b: usize| edges.binary_search(&(a, b)).ok();

        let mut triangles = Vec::new();
        for &(a, b) in &edges {
            for c in b + 1..n {
                if let (Some(_), Some(_)) = (edge_index(a, c), edge_index(b, c)) {
                    if rng.random::<f64>() < spec.fill_prob {
                        triangles.push((a, b, c));
                    }
                }
            }
        }

        let mut b1 = IncidenceMatrix::zeros(n, edges.len());
        for (e, &(i, j)) in edges.iter().enumerate() {
            b1.data[i * edges.len() + e] = 1;
            b1.data[j * edges.len() + e] = -1;
        }
        let mut cell_counts = vec![n, edges.len()];
        let mut boundaries = vec![b1];
        if !triangles.is_empty() {
            // ∂[a,b,c] = [a,b] + [b,c] - [a,c]
            let mut b2 = IncidenceMatrix::zeros(edges.len(), triangles.len());
            for (t, &(a, b, c)) in triangles.iter().enumerate() {
                let cols = triangles.len();
                b2.data[edge_index(a, b).unwrap() * cols + t] = 1;
                b2.data[edge_index(b, c).unwrap() * cols + t] = 1;
                b2.data[edge_index(a, c).unwrap() * cols + t] = -1;
            }
            cell_counts.push(triangles.len());
            boundaries.push(b2);
        }
        let weights = cell_counts
            .iter()
            .map(|&count| (0..count).map(|_| spec.weight_law.sample(rng)).collect())
            .collect();
        let dimension = cell_counts.len() - 1;
        Self::from_parts(dimension, cell_counts, boundaries, weights)
    }
}

/// Distribution of generated cell weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum WeightLaw {
    Unit,
    /// `|z| + floor` with `z` standard normal.
    AbsGaussian { floor: f64 },
}

impl Default for WeightLaw {
    fn default() -> Self {
        WeightLaw::AbsGaussian { floor: 0.1 }
    }
}

impl WeightLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            WeightLaw::Unit => 1.0,
            WeightLaw::AbsGaussian { floor } => {
                let z: f64 = rng.sample(StandardNormal);
                z.abs() + floor
            }
        }
    }
}

/// Parameters of the random complex generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_vertices: usize,
    pub edge_prob: f64,
    pub fill_prob: f64,
    #[serde(default)]
    pub weight_law: WeightLaw,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self { n_vertices: 8, edge_prob: 0.5, fill_prob: 0.5, weight_law: WeightLaw::default() }
    }
}

impl GeneratorSpec {
    fn check(&self) -> Result<()> {
        if self.n_vertices == 0 {
            return Err(Error::InvalidArgument("n_vertices must be at least 1".into()));
        }
        for (name, p) in [("edge_prob", self.edge_prob), ("fill_prob", self.fill_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        if let WeightLaw::AbsGaussian { floor } = self.weight_law {
            if !(floor > 0.0) {
                return Err(Error::InvalidArgument("weight floor must be positive".into()));
            }
        }
        Ok(())
    }
}

/// On-disk JSON layout.
#[derive(Debug, Serialize, Deserialize)]
struct ComplexFile {
    dimension: usize,
    cells: Vec<usize>,
    boundaries: Vec<BoundaryFile>,
    weights: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BoundaryFile {
    k: usize,
    entries: Vec<(usize, usize, i64)>,
}

impl From<&CwComplex> for ComplexFile {
    fn from(c: &CwComplex) -> Self {
        let boundaries = c
            .boundaries
            .iter()
            .enumerate()
            .map(|(idx, b)| BoundaryFile { k: idx + 1, entries: b.triplets() })
            .collect();
        ComplexFile {
            dimension: c.dimension,
            cells: c.cell_counts.clone(),
            boundaries,
            weights: c.weights.clone(),
        }
    }
}

impl From<CwComplex> for ComplexFile {
    fn from(c: CwComplex) -> Self {
        ComplexFile::from(&c)
    }
}

impl TryFrom<ComplexFile> for CwComplex {
    type Error = Error;

    fn try_from(file: ComplexFile) -> Result<Self> {
        file.into_complex()
    }
}

impl ComplexFile {
    fn into_complex(self) -> Result<CwComplex> {
        if self.cells.len() != self.dimension + 1 {
            return Err(Error::Parse(format!(
                "dimension {} needs {} cell counts, found {}",
                self.dimension,
                self.dimension + 1,
                self.cells.len()
            )));
        }
        let mut boundaries: Vec<Option<IncidenceMatrix>> = vec![None; self.dimension];
        for b in self.boundaries {
            if b.k == 0 || b.k > self.dimension {
                return Err(Error::Parse(format!("boundary degree {} out of range", b.k)));
            }
            let slot = &mut boundaries[b.k - 1];
            if slot.is_some() {
                return Err(Error::Parse(format!("boundary B_{} given twice", b.k)));
            }
            *slot = Some(IncidenceMatrix::from_triplets(self.cells[b.k - 1], self.cells[b.k], &b.entries)?);
        }
        // absent B_k means no incidences
        let boundaries = boundaries
            .into_iter()
            .enumerate()
            .map(|(idx, b)| b.unwrap_or_else(|| IncidenceMatrix::zeros(self.cells[idx], self.cells[idx + 1])))
            .collect();
        Ok(CwComplex::from_parts(self.dimension, self.cells, boundaries, self.weights))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn filled_triangle() -> CwComplex {
        // edges: 01, 02, 12; ∂t = [0,1] + [1,2] - [0,2]
        let b1 = IncidenceMatrix::from_rows(&[vec![1, 1, 0], vec![-1, 0, 1], vec![0, -1, -1]]);
        let b2 = IncidenceMatrix::from_rows(&[vec![1], vec![-1], vec![1]]);
        CwComplex::new(2, vec![3, 3, 1], vec![b1, b2], vec![vec![1.0; 3], vec![1.0; 3], vec![1.0]]).unwrap()
    }

    #[test]
    fn validate_reports_nothing_for_valid_complexes() {
        assert!(CwComplex::isolated(1).validate().is_empty());
        assert!(CwComplex::path(2).validate().is_empty());
        assert!(filled_triangle().validate().is_empty());
    }

    #[test]
    fn validate_names_zero_weight() {
        let c = CwComplex::path(2).with_weights(0, vec![1.0, 0.0]);
        let v = c.validate();
        assert_eq!(v, vec![Violation::NonPositiveWeight { k: 0, cell: 1, value: 0.0 }]);
        assert!(v[0].to_string().contains("0-cell 1"));
    }

    #[test]
    fn validate_catches_nonvanishing_boundary_composition() {
        let b1 = IncidenceMatrix::from_rows(&[vec![1, 1, 0], vec![-1, 0, 1], vec![0, -1, -1]]);
        let b2 = IncidenceMatrix::from_rows(&[vec![1], vec![1], vec![1]]);
        let c = CwComplex::from_parts(2, vec![3, 3, 1], vec![b1, b2], vec![vec![1.0; 3], vec![1.0; 3], vec![1.0]]);
        let v = c.validate();
        assert!(!v.is_empty());
        assert!(v.iter().all(|x| matches!(x, Violation::BoundaryOfBoundary { k: 1, .. })));
        assert!(matches!(c.hodge_laplacian(0), Err(Error::InvalidComplex(_))));
    }

    #[test]
    fn validate_catches_bad_shapes() {
        let c = CwComplex::from_parts(1, vec![2, 1], vec![IncidenceMatrix::zeros(3, 1)], vec![vec![1.0; 2], vec![1.0]]);
        assert!(matches!(c.validate()[0], Violation::BoundaryShape { k: 1, .. }));
        let c = CwComplex::from_parts(1, vec![2], vec![], vec![vec![1.0; 2]]);
        assert!(!c.validate().is_empty());
    }

    #[test]
    fn boundary_of_edge() {
        let c = CwComplex::path(2);
        let out = c.boundary_apply(&Chain::cell(1, 1, 0)).unwrap();
        assert_eq!(out, Chain::new(0, vec![1, -1]));
        let zero = c.boundary_apply(&Chain::new(1, vec![0])).unwrap();
        assert!(zero.is_zero());
        assert!(c.boundary_apply(&Chain::new(0, vec![1, 0])).is_err());
        assert!(c.boundary_apply(&Chain::new(2, vec![1])).is_err());
        assert!(c.boundary_apply(&Chain::new(1, vec![1, 1])).is_err());
    }

    #[test]
    fn boundary_of_boundary_vanishes() {
        let c = filled_triangle();
        let once = c.boundary_apply(&Chain::cell(2, 1, 0)).unwrap();
        assert_eq!(once.coefficients, vec![1, -1, 1]);
        let twice = c.boundary_apply(&once).unwrap();
        assert!(twice.is_zero());
    }

    #[test]
    fn cochain_pairs_with_chain() {
        let f = Cochain::new(1, vec![2.0, -1.0, 0.5]);
        let chain = Chain::new(1, vec![1, -1, 2]);
        assert_abs_diff_eq!(f.evaluate(&chain).unwrap(), 4.0);
        assert!(f.evaluate(&Chain::new(1, vec![1])).is_err());
    }

    #[test]
    fn laplacian_examples() {
        let p2 = CwComplex::path(2);
        assert_eq!(p2.hodge_laplacian(0).unwrap(), Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));

        assert_eq!(CwComplex::isolated(2).hodge_laplacian(0).unwrap(), Matrix::zeros(2, 2));

        let heavy = CwComplex::path(2).with_weights(1, vec![4.0]);
        let expected = Matrix::from_row_slice(2, 2, &[4.0, -4.0, -4.0, 4.0]);
        assert_eq!(heavy.hodge_laplacian(0).unwrap(), expected);
        assert_eq!(heavy.symmetric_representative(0).unwrap(), expected);

        assert!(p2.hodge_laplacian(2).is_err());
    }

    #[test]
    fn edge_laplacian_of_path() {
        // k = 1 at the top dimension keeps only the down term B_1ᵀ B_1
        let p3 = CwComplex::path(3);
        let l1 = p3.hodge_laplacian(1).unwrap();
        assert_eq!(l1, Matrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]));
    }

    #[test]
    fn weighted_vertex_representative() {
        let c = CwComplex::path(2).with_weights(0, vec![1.0, 4.0]);
        let lap = c.hodge_laplacian(0).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[1.0, -1.0, -0.25, 0.25]);
        assert_abs_diff_eq!(lap, expected, epsilon = 1e-15);
        let sym = c.symmetric_representative(0).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 0.25]);
        assert_abs_diff_eq!(sym, expected, epsilon = 1e-15);
    }

    #[test]
    fn identity_weights_representative_is_laplacian() {
        let c = filled_triangle();
        for k in 0..=2 {
            assert_eq!(c.symmetric_representative(k).unwrap(), c.hodge_laplacian(k).unwrap());
        }
    }

    #[test]
    fn generator_contract() {
        let spec = GeneratorSpec { n_vertices: 6, edge_prob: 0.0, ..GeneratorSpec::default() };
        let c = CwComplex::random(3, &spec).unwrap();
        assert_eq!(c.cells(1), 0);
        assert_eq!(c.hodge_laplacian(0).unwrap(), Matrix::zeros(6, 6));

        let spec = GeneratorSpec::default();
        assert_eq!(CwComplex::random(7, &spec).unwrap(), CwComplex::random(7, &spec).unwrap());
        assert!(CwComplex::random(7, &spec).unwrap().validate().is_empty());

        let dense = GeneratorSpec { n_vertices: 5, edge_prob: 1.0, fill_prob: 1.0, weight_law: WeightLaw::Unit };
        let c = CwComplex::random(0, &dense).unwrap();
        assert_eq!(c.cell_counts(), &[5, 10, 10]);
        assert!(c.validate().is_empty());
        assert!(c.weights(2).iter().all(|&w| w == 1.0));

        let bad = GeneratorSpec { edge_prob: 1.5, ..GeneratorSpec::default() };
        assert!(CwComplex::random(0, &bad).is_err());
        let bad = GeneratorSpec { n_vertices: 0, ..GeneratorSpec::default() };
        assert!(CwComplex::random(0, &bad).is_err());
    }

    #[test]
    fn generated_weights_respect_floor() {
        let spec = GeneratorSpec { n_vertices: 10, edge_prob: 0.6, fill_prob: 0.5, ..Default::default() };
        let c = CwComplex::random(11, &spec).unwrap();
        for k in 0..=c.dimension() {
            assert!(c.weights(k).iter().all(|&w| w >= 0.1));
        }
    }

    #[test]
    fn json_format_is_canonical() {
        let c = filled_triangle();
        let text = c.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["dimension"], 2);
        assert_eq!(v["cells"], serde_json::json!([3, 3, 1]));
        assert_eq!(v["boundaries"][0]["k"], 1);
        assert_eq!(v["boundaries"][0]["entries"][0], serde_json::json!([0, 0, 1]));
        assert_eq!(v["boundaries"][1]["entries"], serde_json::json!([[0, 0, 1], [1, 0, -1], [2, 0, 1]]));
        assert_eq!(CwComplex::from_json(&text).unwrap(), c);
    }

    #[test]
    fn parse_accepts_general_coefficients_and_missing_boundaries() {
        let text = r#"{"dimension": 1, "cells": [2, 1], "boundaries": [{"k": 1, "entries": [[0, 0, 2], [1, 0, -2]]}], "weights": [[1, 1], [1]]}"#;
        let c = CwComplex::from_json(text).unwrap();
        assert_eq!(c.boundary(1).unwrap().get(0, 0), 2);
        assert_eq!(c.hodge_laplacian(0).unwrap()[(0, 0)], 4.0);

        let text = r#"{"dimension": 1, "cells": [2, 1], "boundaries": [], "weights": [[1, 1], [1]]}"#;
        assert_eq!(CwComplex::from_json(text).unwrap().hodge_laplacian(0).unwrap(), Matrix::zeros(2, 2));

        let text = r#"{"dimension": 1, "cells": [2, 1], "boundaries": [{"k": 1, "entries": [[5, 0, 1]]}], "weights": [[1, 1], [1]]}"#;
        assert!(CwComplex::from_json(text).is_err());
        let text = r#"{"dimension": 2, "cells": [2, 1], "boundaries": [], "weights": []}"#;
        assert!(CwComplex::from_json(text).is_err());
    }
}
