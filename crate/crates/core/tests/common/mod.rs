#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use latent_twd::oracle::GeneralTree;
use latent_twd::tree::WeightedBinaryTree;
use nalgebra::DMatrix;
use rand::Rng;

/// Random rooted tree on `n` nodes: node `v > 0` hangs off a uniformly
/// chosen earlier node, edge weights uniform in `[0.05, 2)`.
pub fn random_general_tree<R: Rng>(n: usize, rng: &mut R) -> GeneralTree {
    let parent = (0..n).map(|v| (v > 0).then(|| rng.random_range(0..v))).collect();
    let weight = (0..n)
        .map(|v| if v == 0 { 0.0 } else { rng.random_range(0.05..2.0) })
        .collect();
    GeneralTree::from_parents(parent, weight).unwrap()
}

/// Random distribution over `n` points with some exact zeros.
pub fn sparse_histogram<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut h: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
        .collect();
    if h.iter().all(|&v| v == 0.0) {
        h[rng.random_range(0..n)] = 1.0;
    }
    let s: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= s);
    h
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// All-pairs shortest paths by Dijkstra on an undirected weighted edge list.
pub fn dijkstra_all(n: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b, w) in edges {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    let mut d = DMatrix::from_element(n, n, f64::INFINITY);
    for s in 0..n {
        let mut heap = BinaryHeap::from([Entry(0.0, s)]);
        d[(s, s)] = 0.0;
        while let Some(Entry(du, u)) = heap.pop() {
            if du > d[(s, u)] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = du + w;
                if nd < d[(s, v)] {
                    d[(s, v)] = nd;
                    heap.push(Entry(nd, v));
                }
            }
        }
    }
    d
}

pub fn general_edges(t: &GeneralTree) -> Vec<(usize, usize, f64)> {
    (0..t.len())
        .filter_map(|v| t.parent(v).map(|p| (v, p, t.weight(v))))
        .collect()
}

pub fn binary_edges(t: &WeightedBinaryTree) -> Vec<(usize, usize, f64)> {
    t.nodes()
        .iter()
        .enumerate()
        .filter_map(|(v, n)| n.parent.map(|p| (v, p, n.parent_edge_weight)))
        .collect()
}

/// Leaf names under each child of the root, each sorted.
pub fn root_split(t: &WeightedBinaryTree) -> Vec<Vec<String>> {
    let ch = t.node(t.root()).children.expect("root is internal");
    let mut out: Vec<Vec<String>> = ch
        .iter()
        .map(|&c| {
            let mut names: Vec<String> = t.leaves_under(c).iter().map(|&j| t.leaf_names()[j].clone()).collect();
            names.sort();
            names
        })
        .collect();
    out.sort();
    out
}
