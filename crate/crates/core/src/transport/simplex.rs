//! Transportation simplex (MODI / stepping-stone) on a dense cost matrix.
//!
//! The basis is a spanning tree of the bipartite graph rows ∪ columns with
//! `m + n − 1` cells. Entering cells are chosen by the most negative reduced
//! cost; after a run of degenerate pivots the solver falls back to Bland's
//! smallest-index rule until a pivot makes progress, which rules out cycling.

use std::collections::VecDeque;

use crate::error::{Error, Result};

const DEGENERATE_RUN_LIMIT: usize = 32;

/// Optimal primal/dual pair of a balanced transportation problem.
#[derive(Debug, Clone)]
pub(crate) struct TransportSolution {
    pub cost: f64,
    /// Basic cells `(row, col, flow)`.
    pub basis: Vec<(usize, usize, f64)>,
    pub row_potential: Vec<f64>,
    pub col_potential: Vec<f64>,
    /// Most negative reduced cost at termination (≥ −tolerance).
    pub min_reduced_cost: f64,
}

impl TransportSolution {
    #[cfg(test)]
    pub fn dual_value(&self, supply: &[f64], demand: &[f64]) -> f64 {
        let a: f64 = supply.iter().zip(&self.row_potential).map(|(s, u)| s * u).sum();
        let b: f64 = demand.iter().zip(&self.col_potential).map(|(d, v)| d * v).sum();
        a + b
    }
}

struct Tree {
    m: usize,
    n: usize,
    /// adjacency over nodes `0..m` (rows) and `m..m+n` (columns): (neighbor, cell index)
    adj: Vec<Vec<(usize, usize)>>,
}

impl Tree {
    fn build(m: usize, n: usize, basis: &[(usize, usize, f64)]) -> Self {
        let mut adj = vec![Vec::new(); m + n];
        for (k, &(i, j, _)) in basis.iter().enumerate() {
            adj[i].push((m + j, k));
            adj[m + j].push((i, k));
        }
        Tree { m, n, adj }
    }

    fn potentials(&self, basis: &[(usize, usize, f64)], cost: &dyn Fn(usize, usize) -> f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (m, n) = (self.m, self.n);
        let mut pot = vec![f64::NAN; m + n];
        let mut seen = vec![false; m + n];
        pot[0] = 0.0;
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(a) = queue.pop_front() {
            for &(b, k) in &self.adj[a] {
                if seen[b] {
                    continue;
                }
                let (i, j, _) = basis[k];
                let c = cost(i, j);
                // u_i + v_j = c_ij
                pot[b] = c - pot[a];
                seen[b] = true;
                queue.push_back(b);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Numerical("transport basis is not a spanning tree".into()));
        }
        Ok((pot[..m].to_vec(), pot[m..].to_vec()))
    }

    /// Cells along the tree path from `from` to `to`, in order.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; total];
        let mut seen = vec![false; total];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(a) = queue.pop_front() {
            if a == to {
                break;
            }
            for &(b, k) in &self.adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    parent[b] = Some((a, k));
                    queue.push_back(b);
                }
            }
        }
        let mut cells = Vec::new();
        let mut cur = to;
        while cur != from {
            let (prev, k) = parent[cur].expect("tree path exists");
            cells.push(k);
            cur = prev;
        }
        cells.reverse();
        cells
    }
}

fn northwest_corner(supply: &[f64], demand: &[f64]) -> Vec<(usize, usize, f64)> {
    let (m, n) = (supply.len(), demand.len());
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let mut basis = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let amt = s[i].min(d[j]).max(0.0);
        basis.push((i, j, amt));
        s[i] -= amt;
        d[j] -= amt;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || s[i] <= d[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    basis
}

/// Solves `min Σ c_ij x_ij` subject to row sums `supply`, column sums `demand`, `x ≥ 0`.
///
/// Masses must be positive and have (nearly) equal totals.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> Result<TransportSolution> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("empty transport problem".into()));
    }
    let mut cmax: f64 = 0.0;
    for i in 0..m {
        for j in 0..n {
            cmax = cmax.max(cost(i, j).abs());
        }
    }
    let tol = 1e-12 * cmax.max(1.0);

    let mut basis = northwest_corner(supply, demand);
    let max_iter = 50 * (m + n) * (m + n) + 1000;
    let mut degenerate_run = 0usize;

    for _ in 0..max_iter {
        let tree = Tree::build(m, n, &basis);
        let (u, v) = tree.potentials(&basis, cost)?;

        let bland = degenerate_run >= DEGENERATE_RUN_LIMIT;
        let mut in_basis = vec![false; m * n];
        for &(i, j, _) in &basis {
            in_basis[i * n + j] = true;
        }
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -tol;
        let mut min_rc = 0.0f64;
        'scan: for i in 0..m {
            for j in 0..n {
                if in_basis[i * n + j] {
                    continue;
                }
                let rc = cost(i, j) - u[i] - v[j];
                min_rc = min_rc.min(rc);
                if rc < best {
                    entering = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = rc;
                }
            }
        }

        let Some((ei, ej)) = entering else {
            let value = basis.iter().map(|&(i, j, f)| f * cost(i, j)).sum();
            return Ok(TransportSolution {
                cost: value,
                basis,
                row_potential: u,
                col_potential: v,
                min_reduced_cost: min_rc,
            });
        };

        // cycle: entering (+), then path cells from row ei to column ej alternate −, +, −, ...
        let path = tree.path(ei, m + ej);
        let mut leave_pos = None;
        let mut theta = f64::INFINITY;
        let mut leave_key = usize::MAX;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let (i, j, f) = basis[k];
                let key = i * n + j;
                if f < theta || (f == theta && key < leave_key) {
                    theta = f;
                    leave_pos = Some(k);
                    leave_key = key;
                }
            }
        }
        let leave = leave_pos.ok_or_else(|| Error::Numerical("empty pivot cycle".into()))?;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis[k].2 = (basis[k].2 - theta).max(0.0);
            } else {
                basis[k].2 += theta;
            }
        }
        basis[leave] = (ei, ej, theta);
        if theta > 0.0 {
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }
    }
    Err(Error::Numerical("transport simplex did not converge".into()))
}
