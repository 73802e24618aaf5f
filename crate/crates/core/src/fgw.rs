//! Fused Gromov-Wasserstein between CW complexes.
//!
//! Cells of degree `k` are the support. The feature term compares scalar cell
//! weights across the two complexes, the structure term compares entries of
//! the two Hodge Laplacians:
//!
//! ```text
//! E(π) = Σ_{i,j,k,l} [(1−α) |w¹_i − w²_j|^p + α |C1(i,k) − C2(j,l)|^p] π_ij π_kl
//!      = (1−α) ⟨M^p, π⟩ + α ⟨L^p ⊗ π, π⟩
//! ```
//!
//! minimized over couplings of the cell histograms `h`, `g` by conditional
//! gradient (Frank-Wolfe) with an exact line search. The problem is
//! non-convex; the solver returns a stationary value.

use serde::{Deserialize, Serialize};

use crate::complex::CwComplex;
use crate::error::{Error, Result};
use crate::transport::{solve, solve_exact, Solver, TransportPlan};
use crate::{Matrix, Vector};

/// Largest side for the explicit 4-tensor path (`p ≠ 2`).
pub const TENSOR_SIZE_LIMIT: usize = 30;
const MARGINAL_TOLERANCE: f64 = 1e-6;

/// Histogram placed on the k-cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Histogram {
    #[default]
    Uniform,
    /// Cell weights normalized to the simplex.
    CellWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FgwInstance {
    /// `M_ij = d(w¹_i, w²_j)` (not yet raised to `p`).
    pub feature_cost: Matrix,
    pub structure_source: Matrix,
    pub structure_target: Matrix,
    pub h: Vector,
    pub g: Vector,
    pub alpha: f64,
    pub p: f64,
}

impl FgwInstance {
    pub fn new(
        feature_cost: Matrix,
        structure_source: Matrix,
        structure_target: Matrix,
        h: Vector,
        g: Vector,
        alpha: f64,
        p: f64,
    ) -> Result<Self> {
        let (n, m) = (h.len(), g.len());
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("FGW needs at least one cell on each side".into()));
        }
        if (feature_cost.nrows(), feature_cost.ncols()) != (n, m) {
            return Err(Error::InvalidArgument(format!(
                "feature cost is {}x{}, histograms are {n} and {m}",
                feature_cost.nrows(),
                feature_cost.ncols()
            )));
        }
        if structure_source.shape() != (n, n) || structure_target.shape() != (m, m) {
            return Err(Error::InvalidArgument("structure matrices must match the histograms".into()));
        }
        if feature_cost.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidArgument("feature cost must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("alpha = {alpha} is not in [0, 1]")));
        }
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidArgument(format!("p must be at least 1, got {p}")));
        }
        for v in [&h, &g] {
            if v.iter().any(|&x| !(x >= 0.0)) || (v.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidMeasure("histograms must lie on the simplex".into()));
            }
        }
        if p != 2.0 && n.max(m) > TENSOR_SIZE_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "p = {p} needs the explicit tensor, limited to {TENSOR_SIZE_LIMIT} cells per side"
            )));
        }
        Ok(Self { feature_cost, structure_source, structure_target, h, g, alpha, p })
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(
            self.feature_cost.clone(),
            self.structure_source.clone(),
            self.structure_target.clone(),
            self.h.clone(),
            self.g.clone(),
            alpha,
            self.p,
        )
    }

    fn powered_features(&self) -> Matrix {
        let p = self.p;
        self.feature_cost.map(|x| if p == 2.0 { x * x } else { x.powf(p) })
    }

    /// `(L^p ⊗ x)_ij = Σ_kl |C1(i,k) − C2(j,l)|^p x_kl`, for any `x` (not only couplings).
    pub fn tensor_apply(&self, x: &Matrix) -> Matrix {
        let c1 = &self.structure_source;
        let c2 = &self.structure_target;
        let (n, m) = (c1.nrows(), c2.nrows());
        if self.p == 2.0 {
            let rows = x.column_sum();
            let cols = x.row_sum().transpose();
            let c1sq = c1.component_mul(c1);
            let c2sq = c2.component_mul(c2);
            let a = &c1sq * rows;
            let b = &c2sq * cols;
            let cross = c1 * x * c2.transpose();
            Matrix::from_fn(n, m, |i, j| a[i] + b[j] - 2.0 * cross[(i, j)])
        } else {
            let p = self.p;
            Matrix::from_fn(n, m, |i, j| {
                let mut acc = 0.0;
                for k in 0..n {
                    for l in 0..m {
                        let xv = x[(k, l)];
                        if xv != 0.0 {
                            acc += (c1[(i, k)] - c2[(j, l)]).abs().powf(p) * xv;
                        }
                    }
                }
                acc
            })
        }
    }

    fn value(&self, mp: &Matrix, pi: &Matrix) -> f64 {
        let linear = if self.alpha < 1.0 { (1.0 - self.alpha) * mp.dot(pi) } else { 0.0 };
        let quadratic = if self.alpha > 0.0 { self.alpha * self.tensor_apply(pi).dot(pi) } else { 0.0 };
        linear + quadratic
    }
}

/// Feature-distance matrix between the k-cell weights of two complexes.
pub fn feature_cost(c1: &CwComplex, c2: &CwComplex, k: usize) -> Matrix {
    let (w1, w2) = (c1.weights(k), c2.weights(k));
    Matrix::from_fn(w1.len(), w2.len(), |i, j| (w1[i] - w2[j]).abs())
}

fn histogram(c: &CwComplex, k: usize, kind: Histogram) -> Vector {
    let w = c.weights(k);
    match kind {
        Histogram::Uniform => Vector::from_element(w.len(), 1.0 / w.len() as f64),
        Histogram::CellWeights => {
            let total: f64 = w.iter().sum();
            Vector::from_iterator(w.len(), w.iter().map(|x| x / total))
        }
    }
}

/// FGW problem between the k-cells of two complexes with uniform histograms.
pub fn build_instance(c1: &CwComplex, c2: &CwComplex, k: usize, alpha: f64, p: f64) -> Result<FgwInstance> {
    build_instance_with(c1, c2, k, alpha, p, Histogram::Uniform)
}

pub fn build_instance_with(
    c1: &CwComplex,
    c2: &CwComplex,
    k: usize,
    alpha: f64,
    p: f64,
    hist: Histogram,
) -> Result<FgwInstance> {
    for c in [c1, c2] {
        if k > c.dimension() || c.cells(k) == 0 {
            return Err(Error::InvalidArgument(format!("complex has no {k}-cells")));
        }
    }
    FgwInstance::new(
        feature_cost(c1, c2, k),
        c1.symmetric_representative(k)?,
        c2.symmetric_representative(k)?,
        histogram(c1, k, hist),
        histogram(c2, k, hist),
        alpha,
        p,
    )
}

/// `E(π)` for a coupling of `(h, g)`.
pub fn fgw_objective(inst: &FgwInstance, pi: &Matrix) -> Result<f64> {
    if pi.shape() != inst.feature_cost.shape() {
        return Err(Error::InvalidArgument("coupling shape does not match the instance".into()));
    }
    let err = crate::transport::TransportPlan::new(pi.clone(), 0.0, inst.h.clone(), inst.g.clone()).marginal_error();
    if err > MARGINAL_TOLERANCE || pi.iter().any(|&x| x < -MARGINAL_TOLERANCE) {
        return Err(Error::MarginalViolation(err));
    }
    Ok(inst.value(&inst.powered_features(), pi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FgwOptions {
    pub max_iters: usize,
    /// Stop when the relative objective decrease falls below this.
    pub tol: f64,
    /// Linear OT backend for the direction-finding step.
    pub inner: Solver,
}

impl Default for FgwOptions {
    fn default() -> Self {
        Self { max_iters: 200, tol: 1e-9, inner: Solver::Exact }
    }
}

#[derive(Debug, Clone)]
pub struct FgwResult {
    pub plan: TransportPlan,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Conditional-gradient solve started from `h gᵀ`.
pub fn fgw_solve(inst: &FgwInstance, opts: &FgwOptions) -> Result<FgwResult> {
    fgw_solve_from(inst, &(&inst.h * inst.g.transpose()), opts)
}

/// Conditional-gradient solve from a given feasible coupling.
pub fn fgw_solve_from(inst: &FgwInstance, start: &Matrix, opts: &FgwOptions) -> Result<FgwResult> {
    let mp = inst.powered_features();
    let alpha = inst.alpha;
    let mut pi = start.clone();
    let mut objective = fgw_objective(inst, &pi)?;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let lpi = if alpha > 0.0 { inst.tensor_apply(&pi) } else { Matrix::zeros(pi.nrows(), pi.ncols()) };
        let grad = &mp * (1.0 - alpha) + &lpi * (2.0 * alpha);
        let vertex = solve(&inst.h, &inst.g, &grad, &opts.inner)?.coupling;
        let dir = vertex - &pi;

        // E(π + τΔ) = E(π) + τ b + τ² a
        let a = if alpha > 0.0 { alpha * inst.tensor_apply(&dir).dot(&dir) } else { 0.0 };
        let b = (1.0 - alpha) * mp.dot(&dir) + 2.0 * alpha * lpi.dot(&dir);
        let scale = objective.abs().max(1e-300);
        // a zero gap on a concave direction is a maximum, not a minimum
        if -b <= opts.tol * scale && a + b >= -opts.tol * scale {
            converged = true;
            break;
        }
        let tau = if a > 0.0 {
            (-b / (2.0 * a)).clamp(0.0, 1.0)
        } else if a + b < 0.0 {
            1.0
        } else {
            0.0
        };
        if tau == 0.0 {
            converged = true;
            break;
        }
        pi += dir * tau;
        let next = inst.value(&mp, &pi);
        let decrease = objective - next;
        objective = next;
        if decrease.abs() <= opts.tol * objective.abs().max(1e-300) {
            converged = true;
            break;
        }
    }

    pi.apply(|x| *x = x.max(0.0));
    Ok(FgwResult {
        plan: TransportPlan::new(pi, objective, inst.h.clone(), inst.g.clone()),
        objective,
        iterations,
        converged,
    })
}

/// Endpoint comparison along an `α` ladder.
#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    /// `(α, FGW objective)` for `α = 0`, the ladder, and `α = 1`.
    pub ladder: Vec<(f64, f64)>,
    /// Linear OT value on `M^p`.
    pub feature_wasserstein: f64,
    /// `|FGW_{p,0} − feature_wasserstein|`.
    pub alpha0_gap: f64,
    /// Pure structure (GW) value with the feature term removed.
    pub gromov_wasserstein: f64,
    /// `|FGW_{p,1} − gromov_wasserstein|`.
    pub alpha1_gap: f64,
}

pub fn fgw_limit_check(inst: &FgwInstance, alpha_ladder: &[f64], opts: &FgwOptions) -> Result<LimitReport> {
    if let Some(a) = alpha_ladder.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::InvalidArgument(format!("ladder value {a} is not in (0, 1)")));
    }
    let mut ladder = Vec::with_capacity(alpha_ladder.len() + 2);
    for &alpha in std::iter::once(&0.0).chain(alpha_ladder).chain(std::iter::once(&1.0)) {
        ladder.push((alpha, fgw_solve(&inst.with_alpha(alpha)?, opts)?.objective));
    }
    let feature_wasserstein = solve_exact(&inst.h, &inst.g, &inst.powered_features())?.cost;
    let structure_only = FgwInstance::new(
        Matrix::zeros(inst.h.len(), inst.g.len()),
        inst.structure_source.clone(),
        inst.structure_target.clone(),
        inst.h.clone(),
        inst.g.clone(),
        1.0,
        inst.p,
    )?;
    let gromov_wasserstein = fgw_solve(&structure_only, opts)?.objective;
    let first = ladder.first().expect("ladder has endpoints").1;
    let last = ladder.last().expect("ladder has endpoints").1;
    Ok(LimitReport {
        alpha0_gap: (first - feature_wasserstein).abs(),
        alpha1_gap: (last - gromov_wasserstein).abs(),
        ladder,
        feature_wasserstein,
        gromov_wasserstein,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn instance_examples() {
        let p2 = CwComplex::path(2);
        let inst = build_instance(&p2, &p2, 0, 0.5, 2.0).unwrap();
        assert_eq!(inst.feature_cost, Matrix::zeros(2, 2));

        let a = CwComplex::path(2).with_weights(0, vec![1.0, 2.0]);
        let b = CwComplex::path(2).with_weights(0, vec![1.0, 3.0]);
        let inst = build_instance(&a, &b, 0, 0.5, 2.0).unwrap();
        assert_eq!(inst.feature_cost, Matrix::from_row_slice(2, 2, &[0.0, 2.0, 1.0, 1.0]));

        assert!(build_instance(&p2, &CwComplex::isolated(2), 1, 0.5, 2.0).is_err());
        assert!(build_instance(&p2, &p2, 0, 1.5, 2.0).is_err());
    }

    #[test]
    fn cell_weight_histograms() {
        let a = CwComplex::path(2).with_weights(0, vec![1.0, 3.0]);
        let inst = build_instance_with(&a, &a, 0, 0.5, 2.0, Histogram::CellWeights).unwrap();
        assert_abs_diff_eq!(inst.h.as_slice(), &[0.25, 0.75][..]);
    }

    #[test]
    fn identical_complexes_have_zero_objective_at_identity() {
        let c = CwComplex::path(3).with_weights(0, vec![0.5, 1.0, 2.0]);
        let inst = build_instance(&c, &c, 0, 0.5, 2.0).unwrap();
        let id = Matrix::identity(3, 3) / 3.0;
        assert_eq!(fgw_objective(&inst, &id).unwrap(), 0.0);
        let r = fgw_solve(&inst, &FgwOptions::default()).unwrap();
        assert!(r.objective < 1e-12);
        assert!(r.plan.marginal_error() < 1e-9);
    }

    #[test]
    fn constant_objective_instance() {
        let inst = build_instance(&CwComplex::path(2), &CwComplex::isolated(2), 0, 1.0, 1.0).unwrap();
        let swap = Matrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        let id = Matrix::identity(2, 2) * 0.5;
        assert_abs_diff_eq!(fgw_objective(&inst, &swap).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fgw_objective(&inst, &id).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fgw_solve(&inst, &FgwOptions::default()).unwrap().objective, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn alpha_zero_is_linear() {
        let a = CwComplex::path(2).with_weights(0, vec![1.0, 2.0]);
        let b = CwComplex::path(2).with_weights(0, vec![1.0, 3.0]);
        let inst = build_instance(&a, &b, 0, 0.0, 2.0).unwrap();
        let pi = Matrix::from_row_slice(2, 2, &[0.3, 0.2, 0.2, 0.3]);
        let expected = inst.feature_cost.map(|x| x * x).dot(&pi);
        assert_eq!(fgw_objective(&inst, &pi).unwrap(), expected);
    }

    #[test]
    fn factorized_and_explicit_tensor_agree() {
        let a = CwComplex::path(3).with_weights(0, vec![0.5, 1.0, 2.0]);
        let b = CwComplex::graph(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        let inst = build_instance(&a, &b, 0, 0.7, 2.0).unwrap();
        let x = Matrix::from_fn(3, 4, |i, j| ((i * 4 + j) as f64 * 0.37).sin());
        let fast = inst.tensor_apply(&x);
        let (c1, c2) = (&inst.structure_source, &inst.structure_target);
        let slow = Matrix::from_fn(3, 4, |i, j| {
            let mut acc = 0.0;
            for k in 0..3 {
                for l in 0..4 {
                    acc += (c1[(i, k)] - c2[(j, l)]).powi(2) * x[(k, l)];
                }
            }
            acc
        });
        assert_abs_diff_eq!(fast, slow, epsilon = 1e-12);
    }

    #[test]
    fn objective_rejects_infeasible_coupling() {
        let inst = build_instance(&CwComplex::path(2), &CwComplex::path(2), 0, 0.5, 2.0).unwrap();
        let bad = Matrix::from_row_slice(2, 2, &[0.5, 0.5, 0.0, 0.0]);
        assert!(matches!(fgw_objective(&inst, &bad), Err(Error::MarginalViolation(_))));
    }

    #[test]
    fn leaves_a_stationary_maximum() {
        // the product coupling has a constant gradient here, yet both permutations score 0
        let c = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let half = Vector::from_element(2, 0.5);
        let inst = FgwInstance::new(Matrix::zeros(2, 2), c.clone(), c, half.clone(), half, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(fgw_objective(&inst, &(&inst.h * inst.g.transpose())).unwrap(), 0.5, epsilon = 1e-15);
        assert!(fgw_solve(&inst, &FgwOptions::default()).unwrap().objective < 1e-12);
    }

    #[test]
    fn explicit_tensor_is_size_limited() {
        let big = CwComplex::isolated(TENSOR_SIZE_LIMIT + 1);
        assert!(build_instance(&big, &big, 0, 0.5, 1.0).is_err());
        assert!(build_instance(&big, &big, 0, 0.5, 2.0).is_ok());
    }

    #[test]
    fn limit_report_endpoints() {
        let a = CwComplex::path(3).with_weights(0, vec![0.5, 1.0, 2.0]);
        let b = CwComplex::graph(3, &[(0, 1), (1, 2), (0, 2)]).with_weights(0, vec![1.5, 0.2, 1.0]);
        let inst = build_instance(&a, &b, 0, 0.5, 2.0).unwrap();
        let report = fgw_limit_check(&inst, &[0.25, 0.5, 0.75], &FgwOptions::default()).unwrap();
        assert!(report.alpha0_gap <= 1e-8);
        assert!(report.alpha1_gap <= 1e-8);
        assert_eq!(report.ladder.len(), 5);
        assert!(report.ladder.iter().all(|(_, v)| v.is_finite()));
        assert!(fgw_limit_check(&inst, &[1.0], &FgwOptions::default()).is_err());
    }
}
