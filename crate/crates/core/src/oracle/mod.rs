//! Slow, independent references used to check the fast paths.
//!
//! Nothing here is called by the production pipeline. The OT solver and the
//! general-tree code share no code with [`crate::twd`] or [`crate::tree`], so
//! agreement between them is evidence rather than tautology.

mod frechet;
mod ot;

pub use frechet::{frechet_mean_numeric, golden_section_min, FrechetConstraint};
pub use ot::{exact_ot, transport_cost, MAX_OT_SIZE};

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::data::check_histogram;
use crate::error::{Error, Result};
use crate::newick::{parse_newick, NewickNode, NewickTree};
use crate::tree::WeightedBinaryTree;

/// Tolerance on the unit mass of oracle inputs.
pub const ORACLE_MASS_TOL: f64 = 1e-9;

/// Rooted tree of arbitrary degree; distributions may live on any node.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralTree {
    parent: Vec<Option<usize>>,
    /// Weight of the edge to the parent (0 at the root).
    weight: Vec<f64>,
    children: Vec<Vec<usize>>,
    names: Vec<Option<String>>,
    root: usize,
    /// Children before parents.
    postorder: Vec<usize>,
    depth: Vec<usize>,
}

impl GeneralTree {
    /// Builds from parent links and parent-edge weights.
    pub fn from_parents(parent: Vec<Option<usize>>, weight: Vec<f64>) -> Result<Self> {
        let n = parent.len();
        if n == 0 || weight.len() != n {
            return Err(Error::Dimension(format!(
                "{n} parent links and {} weights",
                weight.len()
            )));
        }
        let roots: Vec<usize> = (0..n).filter(|&v| parent[v].is_none()).collect();
        let [root] = roots[..] else {
            return Err(Error::Domain(format!("expected one root, found {}", roots.len())));
        };
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n {
                    return Err(Error::Domain(format!("node {v} has parent {p} out of range")));
                }
                children[p].push(v);
            }
            let w = weight[v];
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Domain(format!("node {v} has edge weight {w}")));
            }
        }
        let mut weight = weight;
        weight[root] = 0.0;

        let mut order = Vec::with_capacity(n);
        let mut depth = vec![0; n];
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in &children[v] {
                depth[c] = depth[v] + 1;
                queue.push_back(c);
            }
        }
        if order.len() != n {
            return Err(Error::Domain("tree is disconnected or cyclic".into()));
        }
        order.reverse();
        Ok(Self {
            parent,
            weight,
            children,
            names: vec![None; n],
            root,
            postorder: order,
            depth,
        })
    }

    /// Builds from undirected weighted edges, oriented away from `root`.
    pub fn from_edges(n: usize, root: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if root >= n {
            return Err(Error::Parameter(format!("root {root} out of range")));
        }
        if edges.len() + 1 != n {
            return Err(Error::Domain(format!(
                "{} edges for {n} nodes; a tree has {}",
                edges.len(),
                n.saturating_sub(1)
            )));
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::Domain(format!("bad edge ({a}, {b})")));
            }
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        let mut parent = vec![None; n];
        let mut weight = vec![0.0; n];
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &(u, w) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    parent[u] = Some(v);
                    weight[u] = w;
                    queue.push_back(u);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Domain("edges do not connect all nodes".into()));
        }
        Self::from_parents(parent, weight)
    }

    /// Same tree as a leaf-only binary tree, with identical node ids.
    pub fn from_binary(t: &WeightedBinaryTree) -> Self {
        let parent = t.nodes().iter().map(|n| n.parent).collect();
        let weight = t.nodes().iter().map(|n| n.parent_edge_weight).collect();
        let mut g = Self::from_parents(parent, weight).expect("binary trees are valid general trees");
        for (j, name) in t.leaf_names().iter().enumerate() {
            g.names[j] = Some(name.clone());
        }
        g
    }

    pub fn with_names(mut self, names: Vec<Option<String>>) -> Result<Self> {
        if names.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} names for {} nodes",
                names.len(),
                self.len()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn weight(&self, v: usize) -> f64 {
        self.weight[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn name(&self, v: usize) -> Option<&str> {
        self.names[v].as_deref()
    }

    pub fn names(&self) -> &[Option<String>] {
        &self.names
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.children[v].is_empty()).collect()
    }

    pub fn postorder(&self) -> &[usize] {
        &self.postorder
    }

    /// All pairwise path lengths, by a breadth-first sweep from every node.
    pub fn distance_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut adj = vec![Vec::new(); n];
        for v in 0..n {
            if let Some(p) = self.parent[v] {
                adj[v].push((p, self.weight[v]));
                adj[p].push((v, self.weight[v]));
            }
        }
        let mut d = DMatrix::zeros(n, n);
        for s in 0..n {
            let mut seen = vec![false; n];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &(u, w) in &adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        d[(s, u)] = d[(s, v)] + w;
                        queue.push_back(u);
                    }
                }
            }
        }
        d
    }

    pub fn to_newick(&self) -> String {
        let nodes = (0..self.len())
            .map(|v| NewickNode {
                name: self.names[v].clone(),
                length: self.parent[v].map(|_| self.weight[v]),
                children: self.children[v].clone(),
            })
            .collect();
        NewickTree { nodes, root: self.root }.write()
    }

    /// Parses Newick; node ids follow the order of appearance. Missing
    /// branch lengths read as 0.
    pub fn from_newick(text: &str) -> Result<Self> {
        let nw = parse_newick(text)?;
        let parent = nw.parents();
        let weight = nw.nodes.iter().map(|n| n.length.unwrap_or(0.0)).collect();
        let names = nw.nodes.iter().map(|n| n.name.clone()).collect();
        Self::from_parents(parent, weight)?.with_names(names)
    }
}

fn check_node_distribution(t: &GeneralTree, mu: &[f64], name: &str) -> Result<()> {
    if mu.len() != t.len() {
        return Err(Error::Dimension(format!(
            "distribution {name} has length {}, tree has {} nodes",
            mu.len(),
            t.len()
        )));
    }
    check_histogram(mu, ORACLE_MASS_TOL).map_err(|e| Error::Domain(format!("distribution {name}: {e}")))
}

/// Tree-Wasserstein distance with mass allowed on every node:
/// `Σ_v ω_v |Σ_{u in subtree(v)} (μ(u) − ν(u))|`.
pub fn tw_reference(t: &GeneralTree, mu: &[f64], nu: &[f64]) -> Result<f64> {
    check_node_distribution(t, mu, "mu")?;
    check_node_distribution(t, nu, "nu")?;
    let mut subtree: Vec<f64> = mu.iter().zip(nu).map(|(a, b)| a - b).collect();
    let mut total = 0.0;
    for &v in &t.postorder {
        if let Some(p) = t.parent[v] {
            total += t.weight[v] * subtree[v].abs();
            subtree[p] += subtree[v];
        }
    }
    Ok(total)
}

/// Unique path length between two nodes via an LCA walk.
pub fn tree_shortest_path(t: &GeneralTree, u: usize, v: usize) -> Result<f64> {
    let n = t.len();
    if u >= n || v >= n {
        return Err(Error::Parameter(format!(
            "node index out of range ({u}, {v}) for {n} nodes"
        )));
    }
    let (mut a, mut b) = (u, v);
    let mut d = 0.0;
    while t.depth[a] > t.depth[b] {
        d += t.weight[a];
        a = t.parent[a].expect("deeper node has a parent");
    }
    while t.depth[b] > t.depth[a] {
        d += t.weight[b];
        b = t.parent[b].expect("deeper node has a parent");
    }
    while a != b {
        d += t.weight[a] + t.weight[b];
        a = t.parent[a].expect("non-root");
        b = t.parent[b].expect("non-root");
    }
    Ok(d)
}

/// `½ (d(j, r) + d(j', r) − d(j, j'))`.
pub fn gromov_product(t: &GeneralTree, j: usize, jp: usize, r: usize) -> Result<f64> {
    let djr = tree_shortest_path(t, j, r)?;
    let djpr = tree_shortest_path(t, jp, r)?;
    let djjp = tree_shortest_path(t, j, jp)?;
    Ok(0.5 * (djr + djpr - djjp))
}
