use serde::{Deserialize, Serialize};

use super::assignment::assignment;
use super::gaussian::{sample, GaussianSignal};
use super::simplex::transport_simplex;
use super::sinkhorn::{sinkhorn_costs, SinkhornOptions};
use crate::error::{Error, Result};
use crate::{rng, Matrix, Vector};

/// Above this many cells (`n·m`) [`Solver::Auto`] switches to Sinkhorn.
pub const EXACT_SIZE_LIMIT: usize = 10_000;

const MASS_TOLERANCE: f64 = 1e-12;

/// Weighted point cloud; masses sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    /// One point per row.
    points: Matrix,
    masses: Vector,
}

impl DiscreteMeasure {
    /// Normalizes `masses` to the simplex. Rejects negative, non-finite or all-zero masses.
    pub fn new(points: Matrix, masses: Vector) -> Result<Self> {
        if points.nrows() != masses.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} points but {} masses",
                points.nrows(),
                masses.len()
            )));
        }
        if points.nrows() == 0 {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        if masses.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure("masses must be finite and nonnegative".into()));
        }
        let total = masses.sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("total mass is zero".into()));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite support point".into()));
        }
        let masses = if (total - 1.0).abs() <= MASS_TOLERANCE { masses } else { masses / total };
        Ok(Self { points, masses })
    }

    pub fn uniform(points: Matrix) -> Result<Self> {
        let n = points.nrows();
        Self::new(points, Vector::from_element(n, 1.0 / n.max(1) as f64))
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn masses(&self) -> &Vector {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

/// Coupling with its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub coupling: Matrix,
    pub cost: f64,
    pub source: Vector,
    pub target: Vector,
}

impl TransportPlan {
    pub fn new(coupling: Matrix, cost: f64, source: Vector, target: Vector) -> Self {
        Self { coupling, cost, source, target }
    }

    /// Largest absolute deviation of the plan's row/column sums from the marginals.
    pub fn marginal_error(&self) -> f64 {
        marginal_error(&self.coupling, &self.source, &self.target)
    }

    /// `cost^{1/p}`.
    pub fn wasserstein(&self, p: f64) -> f64 {
        self.cost.max(0.0).powf(1.0 / p)
    }
}

pub(crate) fn marginal_error(pi: &Matrix, h: &Vector, g: &Vector) -> f64 {
    let rows = pi.column_sum();
    let cols = pi.row_sum().transpose();
    (rows - h).amax().max((cols - g).amax())
}

/// Discrete OT backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum Solver {
    /// Transportation simplex, or Hungarian assignment for uniform square problems.
    Exact,
    Sinkhorn(SinkhornOptions),
    /// Exact up to [`EXACT_SIZE_LIMIT`] cells, Sinkhorn with `ε = 0.01 · mean cost` above.
    #[default]
    Auto,
}

/// `[‖x_i − y_j‖^p]`.
pub fn cost_matrix(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<Matrix> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { left: mu.dim(), right: nu.dim() });
    }
    let (x, y) = (mu.points(), nu.points());
    Ok(Matrix::from_fn(mu.len(), nu.len(), |i, j| {
        let d2: f64 = (0..x.ncols()).map(|k| (x[(i, k)] - y[(j, k)]).powi(2)).sum();
        if p == 2.0 {
            d2
        } else {
            d2.sqrt().powf(p)
        }
    }))
}

fn check_marginals(h: &Vector, g: &Vector, cost: &Matrix) -> Result<()> {
    if (cost.nrows(), cost.ncols()) != (h.len(), g.len()) {
        return Err(Error::InvalidArgument(format!(
            "cost is {}x{} but marginals have lengths {} and {}",
            cost.nrows(),
            cost.ncols(),
            h.len(),
            g.len()
        )));
    }
    let (sh, sg) = (h.sum(), g.sum());
    if !(sh > 0.0) || !(sg > 0.0) {
        return Err(Error::InvalidMeasure("total mass is zero".into()));
    }
    if h.iter().chain(g.iter()).any(|&w| !(w >= 0.0)) {
        return Err(Error::InvalidMeasure("masses must be nonnegative".into()));
    }
    if (sh - sg).abs() > 1e-9 * sh.max(sg) {
        return Err(Error::InvalidMeasure(format!("marginal totals differ: {sh} vs {sg}")));
    }
    Ok(())
}

fn is_uniform(v: &Vector) -> bool {
    let w = 1.0 / v.len() as f64;
    v.iter().all(|&m| (m - w).abs() <= MASS_TOLERANCE)
}

/// Exact Kantorovich solution for an explicit cost matrix.
pub fn solve_exact(h: &Vector, g: &Vector, cost: &Matrix) -> Result<TransportPlan> {
    check_marginals(h, g, cost)?;
    let n = h.len();
    let coupling = if n == g.len() && n > 64 && is_uniform(h) && is_uniform(g) {
        let perm = assignment(cost);
        let mut pi = Matrix::zeros(n, n);
        for (i, &j) in perm.iter().enumerate() {
            pi[(i, j)] = 1.0 / n as f64;
        }
        pi
    } else {
        let scale = h.sum() / g.sum();
        let demand: Vec<f64> = g.iter().map(|x| x * scale).collect();
        transport_simplex(h.as_slice(), &demand, cost)
    };
    let total = coupling.component_mul(cost).sum();
    Ok(TransportPlan::new(coupling, total, h.clone(), g.clone()))
}

/// Solves with the chosen backend.
pub fn solve(h: &Vector, g: &Vector, cost: &Matrix, solver: &Solver) -> Result<TransportPlan> {
    match solver {
        Solver::Exact => solve_exact(h, g, cost),
        Solver::Sinkhorn(opts) => {
            check_marginals(h, g, cost)?;
            Ok(sinkhorn_costs(h, g, cost, opts)?.plan)
        }
        Solver::Auto => {
            if h.len() * g.len() <= EXACT_SIZE_LIMIT {
                solve_exact(h, g, cost)
            } else {
                check_marginals(h, g, cost)?;
                let mean = cost.mean().max(f64::MIN_POSITIVE);
                let opts = SinkhornOptions { epsilon: 1e-2 * mean, max_iters: 5_000, tol: 1e-6 };
                Ok(sinkhorn_costs(h, g, cost, &opts)?.plan)
            }
        }
    }
}

/// Exact OT between two discrete measures with cost `d(x, y)^p`, `p ≥ 1`.
pub fn ot_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<TransportPlan> {
    check_p(p)?;
    let cost = cost_matrix(mu, nu, p)?;
    solve_exact(mu.masses(), nu.masses(), &cost)
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("p must be at least 1, got {p}")));
    }
    Ok(())
}

/// Sample-based Wasserstein-p between two Gaussian signals.
///
/// Draws `n_samples` points from each signal (independent streams derived
/// from `seed`) and returns `cost^{1/p}` of the discrete problem.
pub fn wp_empirical(
    a: &GaussianSignal,
    b: &GaussianSignal,
    p: f64,
    n_samples: usize,
    seed: u64,
    solver: &Solver,
) -> Result<f64> {
    check_p(p)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    let mu = sample(a, n_samples, rng::mix(seed, 1))?;
    let nu = sample(b, n_samples, rng::mix(seed, 2))?;
    let cost = cost_matrix(&mu, &nu, p)?;
    let plan = solve(mu.masses(), nu.masses(), &cost, solver)?;
    Ok(plan.wasserstein(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(points: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::uniform(Matrix::from_column_slice(points.len(), 1, points)).unwrap()
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let mu = line(&[0.0, 1.0, 5.0]);
        let plan = ot_exact(&mu, &mu, 2.0).unwrap();
        assert_abs_diff_eq!(plan.cost, 0.0);
        assert!(plan.marginal_error() < 1e-12);
    }

    #[test]
    fn monotone_matching_on_the_line() {
        let plan = ot_exact(&line(&[0.0, 1.0]), &line(&[2.0, 3.0]), 2.0).unwrap();
        assert_abs_diff_eq!(plan.cost, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(plan.coupling, Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]), epsilon = 1e-15);
    }

    #[test]
    fn single_points() {
        let x = DiscreteMeasure::uniform(Matrix::from_row_slice(1, 2, &[0.0, 0.0])).unwrap();
        let y = DiscreteMeasure::uniform(Matrix::from_row_slice(1, 2, &[3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(ot_exact(&x, &y, 1.0).unwrap().cost, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ot_exact(&x, &y, 3.0).unwrap().cost, 125.0, epsilon = 1e-9);
    }

    #[test]
    fn measure_validation() {
        let pts = Matrix::zeros(2, 1);
        assert!(DiscreteMeasure::new(pts.clone(), Vector::zeros(2)).is_err());
        assert!(DiscreteMeasure::new(pts.clone(), Vector::from_vec(vec![-1.0, 2.0])).is_err());
        assert!(DiscreteMeasure::new(pts.clone(), Vector::from_vec(vec![1.0])).is_err());
        let m = DiscreteMeasure::new(pts, Vector::from_vec(vec![1.0, 3.0])).unwrap();
        assert_abs_diff_eq!(m.masses().as_slice(), &[0.25, 0.75][..]);
        assert!(ot_exact(&line(&[0.0]), &line(&[1.0]), 0.5).is_err());
        let wide = DiscreteMeasure::uniform(Matrix::zeros(1, 2)).unwrap();
        assert!(matches!(ot_exact(&line(&[0.0]), &wide, 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn solve_rejects_zero_mass() {
        let z = Vector::zeros(2);
        assert!(solve_exact(&z, &z, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn large_uniform_problems_use_assignment() {
        let n = 80;
        let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let ys: Vec<f64> = (0..n).map(|i| (n - 1 - i) as f64 + 0.5).collect();
        let plan = ot_exact(&line(&xs), &line(&ys), 2.0).unwrap();
        assert_abs_diff_eq!(plan.cost, 0.25, epsilon = 1e-10);
        assert!(plan.marginal_error() < 1e-12);
    }

    #[test]
    fn auto_switches_to_sinkhorn_above_limit() {
        let n = 120;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let mu = line(&xs);
        let cost = cost_matrix(&mu, &mu, 2.0).unwrap();
        let plan = solve(mu.masses(), mu.masses(), &cost, &Solver::Auto).unwrap();
        // entropic plan spreads mass off the diagonal
        assert!(plan.coupling[(0, 1)] > 0.0);
        assert!(plan.marginal_error() < 1e-4);
    }
}
