//! Dense linear assignment.
//!
//! An epsilon-scaled auction produces near-optimal column prices, rows are
//! greedily matched to their cheapest reduced-cost column, and the remaining
//! rows are placed by Dijkstra-style shortest augmenting paths
//! (Jonker-Volgenant). The auction only warms up the duals, so the result is
//! an exact optimum for any real costs.

use crate::Matrix;

const UNASSIGNED: usize = usize::MAX;
/// Price reduction factor between auction phases.
const SCALING: f64 = 6.0;
/// Last auction epsilon relative to the cost range.
const FINAL_EPSILON: f64 = 1e-7;

/// Returns `col_of_row` minimizing `Σ cost[i, col_of_row[i]]` for a square cost.
pub fn assignment(cost: &Matrix) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    if n == 0 {
        return Vec::new();
    }
    // row-major copy
    let c: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| cost[(i, j)])).collect();
    let prices = auction_prices(&c, n);
    shortest_paths(&c, n, prices.into_iter().map(|p| -p).collect())
}

/// Forward auction with epsilon scaling; returns the final column prices.
fn auction_prices(c: &[f64], n: usize) -> Vec<f64> {
    let (lo, hi) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let range = hi - lo;
    let mut prices = vec![0.0f64; n];
    if !(range > 0.0) || n == 1 {
        return prices;
    }
    let target = range * FINAL_EPSILON;
    let mut eps = range / 4.0;
    let mut owner = vec![UNASSIGNED; n];
    let mut col_of = vec![UNASSIGNED; n];
    // bidding wars only slow the warm start, never break correctness
    let bid_budget = 64 * n;
    loop {
        owner.fill(UNASSIGNED);
        col_of.fill(UNASSIGNED);
        let mut queue: Vec<usize> = (0..n).rev().collect();
        let mut bids = 0;
        while let Some(i) = queue.pop() {
            if bids == bid_budget {
                break;
            }
            bids += 1;
            let row = &c[i * n..(i + 1) * n];
            let (mut j1, mut w1, mut w2) = (0, f64::INFINITY, f64::INFINITY);
            for (j, (&cij, &pj)) in row.iter().zip(&prices).enumerate() {
                let w = cij + pj;
                if w < w2 {
                    if w < w1 {
                        w2 = w1;
                        w1 = w;
                        j1 = j;
                    } else {
                        w2 = w;
                    }
                }
            }
            prices[j1] += w2 - w1 + eps;
            let previous = owner[j1];
            owner[j1] = i;
            col_of[i] = j1;
            if previous != UNASSIGNED {
                col_of[previous] = UNASSIGNED;
                queue.push(previous);
            }
        }
        if eps <= target {
            return prices;
        }
        eps = (eps / SCALING).max(target);
    }
}

/// Exact assignment from column potentials `v` (reduced cost `c_ij - v_j`).
// `up` moves inside `for k in up..n` on purpose; the scan range is fixed at entry
#[allow(clippy::mut_range_bound)]
fn shortest_paths(c: &[f64], n: usize, mut v: Vec<f64>) -> Vec<usize> {
    let at = |i: usize, j: usize| c[i * n + j];
    let mut row_sol = vec![UNASSIGNED; n];
    let mut col_sol = vec![UNASSIGNED; n];

    // greedy: a row keeps its cheapest column when nobody holds it yet
    let mut free = Vec::new();
    for i in 0..n {
        let mut best = 0;
        let mut min = f64::INFINITY;
        for j in 0..n {
            let h = at(i, j) - v[j];
            if h < min {
                min = h;
                best = j;
            }
        }
        if col_sol[best] == UNASSIGNED {
            col_sol[best] = i;
            row_sol[i] = best;
        } else {
            free.push(i);
        }
    }

    let mut d = vec![0.0f64; n];
    let mut pred = vec![0usize; n];
    let mut col_list: Vec<usize> = (0..n).collect();
    for &free_row in &free {
        for j in 0..n {
            d[j] = at(free_row, j) - v[j];
            pred[j] = free_row;
            col_list[j] = j;
        }
        // col_list[..low] scanned, col_list[low..up] at distance `min`
        let mut low = 0usize;
        let mut up = 0usize;
        let mut last = 0usize;
        let mut min = 0.0f64;
        let end_of_path;
        'search: loop {
            if up == low {
                last = low;
                min = d[col_list[up]];
                up += 1;
                for k in up..n {
                    let j = col_list[k];
                    let h = d[j];
                    if h <= min {
                        if h < min {
                            up = low;
                            min = h;
                        }
                        col_list[k] = col_list[up];
                        col_list[up] = j;
                        up += 1;
                    }
                }
                for k in low..up {
                    if col_sol[col_list[k]] == UNASSIGNED {
                        end_of_path = col_list[k];
                        break 'search;
                    }
                }
            }
            let j1 = col_list[low];
            low += 1;
            let i = col_sol[j1];
            let h = at(i, j1) - v[j1] - min;
            for k in up..n {
                let j = col_list[k];
                let v2 = at(i, j) - v[j] - h;
                if v2 < d[j] {
                    pred[j] = i;
                    if v2 == min {
                        if col_sol[j] == UNASSIGNED {
                            end_of_path = j;
                            break 'search;
                        }
                        col_list[k] = col_list[up];
                        col_list[up] = j;
                        up += 1;
                    }
                    d[j] = v2;
                }
            }
        }
        for &j in &col_list[..last] {
            v[j] += d[j] - min;
        }
        let mut j = end_of_path;
        loop {
            let i = pred[j];
            col_sol[j] = i;
            j = std::mem::replace(&mut row_sol[i], j);
            if i == free_row {
                break;
            }
        }
    }
    row_sol
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute_force(cost: &Matrix) -> f64 {
        fn rec(cost: &Matrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            let n = cost.nrows();
            if row == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(cost, row + 1, used, acc + cost[(row, j)], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost.nrows()], 0.0, &mut best);
        best
    }

    fn check_permutation(a: &[usize]) {
        let mut seen = a.to_vec();
        seen.sort();
        assert_eq!(seen, (0..a.len()).collect::<Vec<_>>());
    }

    fn total(c: &Matrix, a: &[usize]) -> f64 {
        a.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum()
    }

    #[test]
    fn matches_enumeration() {
        let mut rng = crate::rng::stream(5, 0);
        for n in 1..=7 {
            for _ in 0..20 {
                let c = Matrix::from_fn(n, n, |_, _| rng.random::<f64>() * 10.0);
                let a = assignment(&c);
                check_permutation(&a);
                assert!((total(&c, &a) - brute_force(&c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn handles_ties_and_integer_costs() {
        let mut rng = crate::rng::stream(6, 0);
        for n in 2..=7 {
            for _ in 0..20 {
                let c = Matrix::from_fn(n, n, |_, _| rng.random_range(0..3) as f64);
                let a = assignment(&c);
                check_permutation(&a);
                assert_eq!(total(&c, &a), brute_force(&c));
            }
        }
        let flat = Matrix::from_element(5, 5, 1.0);
        check_permutation(&assignment(&flat));
    }

    #[test]
    fn agrees_with_transportation_simplex() {
        let mut rng = crate::rng::stream(8, 0);
        for n in [10, 25, 40, 120] {
            let c = Matrix::from_fn(n, n, |_, _| rng.random::<f64>());
            let a = assignment(&c);
            check_permutation(&a);
            let w = vec![1.0 / n as f64; n];
            let lp = super::super::simplex::transport_simplex(&w, &w, &c).component_mul(&c).sum();
            assert!((total(&c, &a) / n as f64 - lp).abs() < 1e-12);
        }
    }
}
