//! Exact discrete optimal transport by the transportation simplex (network
//! simplex on the bipartite supply/demand graph).

use std::collections::VecDeque;

use nalgebra::DMatrix;

use super::ORACLE_MASS_TOL;
use crate::data::check_histogram;
use crate::error::{Error, Result};

/// Largest support size accepted by [`exact_ot`].
pub const MAX_OT_SIZE: usize = 512;

/// Consecutive zero-step pivots after which entering-cell choice switches
/// from Dantzig's rule to the first improving cell.
const DEGENERATE_SWITCH: usize = 50;

/// Cost `Σ Φ_ij C_ij` of an explicit transport plan.
pub fn transport_cost(c: &DMatrix<f64>, plan: &DMatrix<f64>) -> f64 {
    c.component_mul(plan).sum()
}

/// Optimal objective `min_Φ ⟨Φ, C⟩` over plans with marginals `mu` and `nu`.
pub fn exact_ot(c: &DMatrix<f64>, mu: &[f64], nu: &[f64]) -> Result<f64> {
    let (p, q) = c.shape();
    if mu.len() != p || nu.len() != q {
        return Err(Error::Dimension(format!(
            "cost is {p}x{q} but marginals have lengths {} and {}",
            mu.len(),
            nu.len()
        )));
    }
    if p > MAX_OT_SIZE || q > MAX_OT_SIZE {
        return Err(Error::Parameter(format!(
            "OT oracle is limited to {MAX_OT_SIZE} points, got {p}x{q}"
        )));
    }
    if c.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::Domain("cost matrix must be finite and nonnegative".into()));
    }
    check_histogram(mu, ORACLE_MASS_TOL).map_err(|e| Error::Domain(format!("infeasible marginal mu: {e}")))?;
    check_histogram(nu, ORACLE_MASS_TOL).map_err(|e| Error::Domain(format!("infeasible marginal nu: {e}")))?;

    // Zero-mass points never carry flow.
    let rows: Vec<usize> = (0..p).filter(|&i| mu[i] > 0.0).collect();
    let cols: Vec<usize> = (0..q).filter(|&j| nu[j] > 0.0).collect();
    let supply: Vec<f64> = rows.iter().map(|&i| mu[i]).collect();
    let scale = supply.iter().sum::<f64>() / cols.iter().map(|&j| nu[j]).sum::<f64>();
    let demand: Vec<f64> = cols.iter().map(|&j| nu[j] * scale).collect();
    let cost = DMatrix::from_fn(rows.len(), cols.len(), |a, b| c[(rows[a], cols[b])]);
    Ok(TransportSimplex::new(cost, supply, demand).solve()?.objective)
}

struct Solution {
    objective: f64,
}

struct TransportSimplex {
    cost: DMatrix<f64>,
    p: usize,
    q: usize,
    /// Basic cells `(row, col, flow)`; always `p + q − 1` of them, forming a spanning tree.
    basis: Vec<(usize, usize, f64)>,
}

impl TransportSimplex {
    /// North-west corner start.
    fn new(cost: DMatrix<f64>, mut supply: Vec<f64>, mut demand: Vec<f64>) -> Self {
        let (p, q) = cost.shape();
        let mut basis = Vec::with_capacity(p + q - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let f = supply[i].min(demand[j]).max(0.0);
            supply[i] -= f;
            demand[j] -= f;
            basis.push((i, j, f));
            if i == p - 1 && j == q - 1 {
                break;
            }
            if j == q - 1 || (i < p - 1 && supply[i] <= demand[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { cost, p, q, basis }
    }

    /// Tree adjacency: node `i` is row `i`, node `p + j` is column `j`.
    /// Entries are `(neighbor, basis index)`.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.p + self.q];
        for (b, &(i, j, _)) in self.basis.iter().enumerate() {
            adj[i].push((self.p + j, b));
            adj[self.p + j].push((i, b));
        }
        adj
    }

    /// Dual potentials with `u_0 = 0` and `u_i + v_j = c_ij` on basic cells.
    fn potentials(&self, adj: &[Vec<(usize, usize)>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut pot = vec![f64::NAN; self.p + self.q];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0]);
        while let Some(v) = queue.pop_front() {
            for &(u, b) in &adj[v] {
                if pot[u].is_nan() {
                    let (i, j, _) = self.basis[b];
                    pot[u] = self.cost[(i, j)] - pot[v];
                    queue.push_back(u);
                }
            }
        }
        if pot.iter().any(|x| x.is_nan()) {
            return Err(Error::Internal("transport basis is not a spanning tree".into()));
        }
        let v = pot.split_off(self.p);
        Ok((pot, v))
    }

    /// Basis indices along the tree path from row `i` to column `j`.
    fn path(&self, adj: &[Vec<(usize, usize)>], i: usize, j: usize) -> Vec<usize> {
        let n = self.p + self.q;
        let mut via: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[i] = true;
        let mut queue = VecDeque::from([i]);
        let target = self.p + j;
        while let Some(v) = queue.pop_front() {
            if v == target {
                break;
            }
            for &(u, b) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    via[u] = Some((v, b));
                    queue.push_back(u);
                }
            }
        }
        let mut edges = Vec::new();
        let mut v = target;
        while let Some((prev, b)) = via[v] {
            edges.push(b);
            v = prev;
        }
        edges.reverse();
        edges
    }

    fn solve(mut self) -> Result<Solution> {
        let cmax = self.cost.iter().copied().fold(0.0, f64::max);
        let tol = 1e-13 * cmax.max(1.0);
        let cap = 50 * (self.p + self.q).pow(2) + 1000;
        let mut degenerate_run = 0;
        for _ in 0..cap {
            let adj = self.adjacency();
            let (u, v) = self.potentials(&adj)?;

            let mut entering: Option<(usize, usize, f64)> = None;
            'scan: for (i, &ui) in u.iter().enumerate() {
                for (j, &vj) in v.iter().enumerate() {
                    let r = self.cost[(i, j)] - ui - vj;
                    if r < -tol && entering.is_none_or(|(_, _, best)| r < best) {
                        entering = Some((i, j, r));
                        if degenerate_run >= DEGENERATE_SWITCH {
                            break 'scan;
                        }
                    }
                }
            }
            let Some((ei, ej, _)) = entering else {
                let objective = self.basis.iter().map(|&(i, j, f)| f * self.cost[(i, j)]).sum();
                return Ok(Solution { objective });
            };

            // Path edges alternate −, +, −, ... starting from the entering row.
            let path = self.path(&adj, ei, ej);
            let (theta, leave) = path
                .iter()
                .step_by(2)
                .map(|&b| (self.basis[b].2, b))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .ok_or_else(|| Error::Internal("empty pivot cycle".into()))?;
            for (k, &b) in path.iter().enumerate() {
                if k % 2 == 0 {
                    self.basis[b].2 -= theta;
                } else {
                    self.basis[b].2 += theta;
                }
            }
            self.basis[leave] = (ei, ej, theta);
            degenerate_run = if theta > 0.0 { 0 } else { degenerate_run + 1 };
        }
        Err(Error::Numerical("transportation simplex hit its iteration cap".into()))
    }
}
