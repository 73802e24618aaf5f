//! Distances and maps between complexes.
//!
//! Two routes are provided. The closed form treats each complex as the
//! Gaussian `N(0, Δ†)` and uses the Bures formula for Wasserstein-2; the
//! discrete route samples both signals and solves the Kantorovich problem
//! between the empirical measures, exactly (transportation simplex,
//! Hungarian assignment) or with entropic regularization (Sinkhorn).

mod assignment;
mod discrete;
mod gaussian;
mod simplex;
mod sinkhorn;

pub use assignment::assignment;
pub use discrete::{
    cost_matrix, ot_exact, solve, solve_exact, wp_empirical, DiscreteMeasure, Solver, TransportPlan,
    EXACT_SIZE_LIMIT,
};
pub use gaussian::{
    optimal_map, pushforward_check, sample, w2_closed_form, w2_squared_closed_form, GaussianSignal,
};
pub use simplex::transport_simplex;
pub use sinkhorn::{sinkhorn, sinkhorn_costs, SinkhornOptions, SinkhornReport};
