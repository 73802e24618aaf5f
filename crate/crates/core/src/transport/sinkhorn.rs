//! Entropic optimal transport, log-domain Sinkhorn iterations.

use serde::{Deserialize, Serialize};

use super::discrete::{DiscreteMeasure, TransportPlan};
use crate::error::{Error, Result};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornOptions {
    /// Entropic regularization, in cost units.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Target L1 violation of the row marginal.
    pub tol: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { epsilon: 1e-2, max_iters: 10_000, tol: 1e-9 }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornReport {
    pub plan: TransportPlan,
    pub iterations: usize,
    /// L1 marginal violation at exit.
    pub marginal_error: f64,
    pub converged: bool,
}

/// Entropic OT between two discrete measures with cost `d(x, y)^p`.
pub fn sinkhorn(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, opts: &SinkhornOptions) -> Result<SinkhornReport> {
    let cost = super::discrete::cost_matrix(mu, nu, p)?;
    sinkhorn_costs(mu.masses(), nu.masses(), &cost, opts)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn on an explicit cost matrix.
///
/// Non-convergence is reported in the result, not raised.
pub fn sinkhorn_costs(h: &Vector, g: &Vector, cost: &Matrix, opts: &SinkhornOptions) -> Result<SinkhornReport> {
    if !(opts.epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", opts.epsilon)));
    }
    let (n, m) = (h.len(), g.len());
    assert_eq!((cost.nrows(), cost.ncols()), (n, m));
    let eps = opts.epsilon;
    let log_h: Vec<f64> = h.iter().map(|x| x.ln()).collect();
    let log_g: Vec<f64> = g.iter().map(|x| x.ln()).collect();
    // potentials are kept in units of ε; column-major: kc.column(j) runs over i, kr.column(i) over j
    let kc = cost.map(|c| -c / eps);
    let kr = kc.transpose();
    let mut f = vec![0.0; n];
    let mut gp = vec![0.0; m];

    let mut iterations = 0;
    let mut marginal_error = f64::INFINITY;
    while iterations < opts.max_iters {
        iterations += 1;
        for i in 0..n {
            let lse = log_sum_exp(kr.column(i).iter().zip(&gp).map(|(k, gj)| gj + k));
            f[i] = if log_h[i] == f64::NEG_INFINITY { f64::NEG_INFINITY } else { log_h[i] - lse };
        }
        for j in 0..m {
            let lse = log_sum_exp(kc.column(j).iter().zip(&f).map(|(k, fi)| fi + k));
            gp[j] = if log_g[j] == f64::NEG_INFINITY { f64::NEG_INFINITY } else { log_g[j] - lse };
        }
        // columns are exact after the g-update; measure the rows
        if iterations % 5 == 0 || iterations == opts.max_iters {
            marginal_error = (0..n)
                .map(|i| {
                    let row_mass: f64 = kr.column(i).iter().zip(&gp).map(|(k, gj)| (f[i] + gj + k).exp()).sum();
                    (row_mass - h[i]).abs()
                })
                .sum();
            if marginal_error <= opts.tol {
                break;
            }
        }
    }

    let coupling = Matrix::from_fn(n, m, |i, j| {
        let v = (f[i] + gp[j] + kc[(i, j)]).exp();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    });
    let total_cost = coupling.component_mul(cost).sum();
    Ok(SinkhornReport {
        plan: TransportPlan::new(coupling, total_cost, h.clone(), g.clone()),
        iterations,
        marginal_error,
        converged: marginal_error <= opts.tol,
    })
}
