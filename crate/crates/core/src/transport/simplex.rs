//! Transportation simplex (network simplex on the complete bipartite graph).
//!
//! The basis is a spanning tree of `n + m - 1` cells, started from the
//! north-west corner rule. Entering cells are priced with the most negative
//! reduced cost, ties broken by lowest row-major index; after a run of
//! degenerate pivots the rule switches to Bland's (first negative cell) so
//! the method cannot cycle.

use std::collections::VecDeque;

use crate::Matrix;

const DEGENERATE_RUN_BEFORE_BLAND: usize = 50;

/// Exact minimizer of `⟨π, cost⟩` over couplings of `supply` and `demand`.
///
/// Both marginals must be nonnegative with equal totals; the caller checks that.
pub fn transport_simplex(supply: &[f64], demand: &[f64], cost: &Matrix) -> Matrix {
    let n = supply.len();
    let m = demand.len();
    assert_eq!((cost.nrows(), cost.ncols()), (n, m));
    let mut flow = Matrix::zeros(n, m);
    if n == 0 || m == 0 {
        return flow;
    }

    let mut basic = vec![false; n * m];
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(n + m - 1);
    {
        let mut ra = supply.to_vec();
        let mut rb = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let q = ra[i].min(rb[j]).max(0.0);
            flow[(i, j)] = q;
            ra[i] -= q;
            rb[j] -= q;
            basic[i * m + j] = true;
            basis.push((i, j));
            if i == n - 1 && j == m - 1 {
                break;
            }
            if i == n - 1 {
                j += 1;
            } else if j == m - 1 || ra[i] <= rb[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let scale = cost.amax().max(1.0);
    let eps = 1e-12 * scale;
    let max_pivots = 1_000 + 20 * n * m;
    let mut degenerate_run = 0;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n + m];
    let mut parent = vec![usize::MAX; n + m];

    for _ in 0..max_pivots {
        for a in adj.iter_mut() {
            a.clear();
        }
        for (idx, &(i, j)) in basis.iter().enumerate() {
            adj[i].push((n + j, idx));
            adj[n + j].push((i, idx));
        }

        // potentials: u_i + v_j = c_ij on the tree, u_0 = 0
        let mut known = vec![false; n + m];
        let mut queue = VecDeque::from([0usize]);
        known[0] = true;
        u[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &(next, _) in &adj[node] {
                if known[next] {
                    continue;
                }
                if node < n {
                    v[next - n] = cost[(node, next - n)] - u[node];
                } else {
                    u[next] = cost[(next, node - n)] - v[node - n];
                }
                known[next] = true;
                queue.push_back(next);
            }
        }

        let bland = degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND;
        let mut entering = None;
        let mut best = -eps;
        'pricing: for i in 0..n {
            for j in 0..m {
                if basic[i * m + j] {
                    continue;
                }
                let r = cost[(i, j)] - u[i] - v[j];
                if r < best {
                    entering = Some((i, j));
                    if bland {
                        break 'pricing;
                    }
                    best = r;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            break;
        };

        // tree path from row ei to column ej
        parent.fill(usize::MAX);
        let mut parent_edge = vec![usize::MAX; n + m];
        parent[ei] = ei;
        let mut queue = VecDeque::from([ei]);
        while let Some(node) = queue.pop_front() {
            if node == n + ej {
                break;
            }
            for &(next, idx) in &adj[node] {
                if parent[next] == usize::MAX {
                    parent[next] = node;
                    parent_edge[next] = idx;
                    queue.push_back(next);
                }
            }
        }
        let mut path_edges = Vec::new();
        let mut node = n + ej;
        while node != ei {
            path_edges.push(parent_edge[node]);
            node = parent[node];
        }
        path_edges.reverse();
        // path_edges[0] touches row ei: signs alternate -, +, -, ..., ending with -

        let mut theta = f64::INFINITY;
        let mut leaving: Option<usize> = None;
        for (pos, &idx) in path_edges.iter().enumerate() {
            if pos % 2 == 0 {
                let (i, j) = basis[idx];
                let x = flow[(i, j)];
                let better = match leaving {
                    None => true,
                    Some(l) => {
                        let (li, lj) = basis[l];
                        x < theta || (x == theta && (i, j) < (li, lj))
                    }
                };
                if better {
                    theta = x;
                    leaving = Some(idx);
                }
            }
        }
        let leaving = leaving.expect("cycle has a backward cell");
        let theta = theta.max(0.0);

        flow[(ei, ej)] += theta;
        for (pos, &idx) in path_edges.iter().enumerate() {
            let (i, j) = basis[idx];
            if pos % 2 == 0 {
                flow[(i, j)] -= theta;
            } else {
                flow[(i, j)] += theta;
            }
        }
        let (li, lj) = basis[leaving];
        flow[(li, lj)] = 0.0;
        basic[li * m + lj] = false;
        basic[ei * m + ej] = true;
        basis[leaving] = (ei, ej);

        if theta <= eps {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
    }

    flow.apply(|x| *x = x.max(0.0));
    flow
}
