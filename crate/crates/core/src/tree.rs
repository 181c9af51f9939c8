//! Rooted weighted binary trees over the feature set, and their decoding from
//! a multi-scale hyperbolic embedding.
//!
//! Node ids `0..m` are the leaves (leaf `j` is feature `j`); ids `m..2m-1` are
//! internal. Decoding sweeps feature pairs in increasing order of a depth key
//! and merges components the way single linkage does, so the last node
//! created is the root.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hyperbolic::{hd_lca_depth, product_manifold_distance, MultiScaleEmbedding};
use crate::newick::{parse_newick, NewickNode, NewickTree};

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub children: Option<[usize; 2]>,
    /// Length of the edge to the parent; 0 at the root.
    pub parent_edge_weight: f64,
    pub height: f64,
}

impl TreeNode {
    fn leaf() -> Self {
        Self {
            parent: None,
            children: None,
            parent_edge_weight: 0.0,
            height: 0.0,
        }
    }
}

/// Rooted binary tree with `m` feature leaves and `2m − 1` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBinaryTree {
    num_leaves: usize,
    nodes: Vec<TreeNode>,
    root: usize,
    leaf_names: Vec<String>,
    /// Children before parents.
    postorder: Vec<usize>,
    /// Edge count from the root.
    depth: Vec<usize>,
    flat: FlatPostorder,
}

/// Post-order copy of the parent links and edge weights, laid out so a
/// bottom-up sweep reads memory sequentially. The root is the last slot.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FlatPostorder {
    /// Slot of each slot's parent.
    pub parent: Vec<usize>,
    pub weight: Vec<f64>,
    /// Slot of leaf `j`.
    pub leaf_slot: Vec<usize>,
}

impl WeightedBinaryTree {
    /// Validates and indexes a node list. Leaves must be ids `0..num_leaves`.
    pub fn from_nodes(num_leaves: usize, nodes: Vec<TreeNode>, leaf_names: Vec<String>) -> Result<Self> {
        let m = num_leaves;
        if m < 2 {
            return Err(Error::Dimension(format!(
                "a binary tree needs at least 2 leaves, got {m}"
            )));
        }
        if nodes.len() != 2 * m - 1 {
            return Err(Error::Domain(format!(
                "{} nodes for {m} leaves, expected {}",
                nodes.len(),
                2 * m - 1
            )));
        }
        if leaf_names.len() != m {
            return Err(Error::Dimension(format!(
                "{} leaf names for {m} leaves",
                leaf_names.len()
            )));
        }
        let roots: Vec<usize> = (0..nodes.len()).filter(|&v| nodes[v].parent.is_none()).collect();
        let [root] = roots[..] else {
            return Err(Error::Domain(format!("expected one root, found {}", roots.len())));
        };
        for (v, node) in nodes.iter().enumerate() {
            match (v < m, node.children) {
                (true, Some(_)) => return Err(Error::Domain(format!("leaf {v} has children"))),
                (false, None) => return Err(Error::Domain(format!("internal node {v} has no children"))),
                (false, Some(ch)) => {
                    for c in ch {
                        if c >= nodes.len() || nodes[c].parent != Some(v) {
                            return Err(Error::Domain(format!("child link {v} -> {c} is inconsistent")));
                        }
                    }
                    if ch[0] == ch[1] {
                        return Err(Error::Domain(format!("node {v} has a repeated child")));
                    }
                }
                (true, None) => {}
            }
            let w = node.parent_edge_weight;
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Domain(format!("node {v} has edge weight {w}")));
            }
            if let Some(p) = node.parent {
                if p >= nodes.len() || !nodes[p].children.is_some_and(|c| c.contains(&v)) {
                    return Err(Error::Domain(format!("parent link {v} -> {p} is inconsistent")));
                }
                if nodes[p].height < node.height {
                    return Err(Error::Domain(format!(
                        "height decreases from node {v} to its parent {p}"
                    )));
                }
            }
        }
        if nodes[root].parent_edge_weight != 0.0 {
            return Err(Error::Domain("root edge weight must be 0".into()));
        }
        if (0..m).any(|j| nodes[j].height != 0.0) {
            return Err(Error::Domain("leaf heights must be 0".into()));
        }

        // Iterative DFS from the root yields a preorder; reverse it.
        let mut preorder = Vec::with_capacity(nodes.len());
        let mut depth = vec![0usize; nodes.len()];
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            preorder.push(v);
            if preorder.len() > nodes.len() {
                return Err(Error::Domain("cycle in tree".into()));
            }
            if let Some(ch) = nodes[v].children {
                for c in ch {
                    depth[c] = depth[v] + 1;
                    stack.push(c);
                }
            }
        }
        if preorder.len() != nodes.len() {
            return Err(Error::Domain("tree is not connected".into()));
        }
        preorder.reverse();
        let mut slot = vec![0; nodes.len()];
        for (i, &v) in preorder.iter().enumerate() {
            slot[v] = i;
        }
        let flat = FlatPostorder {
            parent: preorder
                .iter()
                .map(|&v| nodes[v].parent.map_or(slot[v], |p| slot[p]))
                .collect(),
            weight: preorder.iter().map(|&v| nodes[v].parent_edge_weight).collect(),
            leaf_slot: slot[..m].to_vec(),
        };
        Ok(Self {
            num_leaves: m,
            nodes,
            root,
            leaf_names,
            postorder: preorder,
            depth,
            flat,
        })
    }

    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, v: usize) -> &TreeNode {
        &self.nodes[v]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn leaf_names(&self) -> &[String] {
        &self.leaf_names
    }

    /// Node ids with every child listed before its parent.
    pub fn postorder(&self) -> &[usize] {
        &self.postorder
    }

    pub(crate) fn flat(&self) -> &FlatPostorder {
        &self.flat
    }

    /// Number of edges between `v` and the root.
    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn with_leaf_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_leaves {
            return Err(Error::Dimension(format!(
                "{} names for {} leaves",
                names.len(),
                self.num_leaves
            )));
        }
        self.leaf_names = names;
        Ok(self)
    }

    /// Lowest common ancestor of two nodes.
    pub fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.nodes[a].parent.expect("non-root has parent");
        }
        while self.depth[b] > self.depth[a] {
            b = self.nodes[b].parent.expect("non-root has parent");
        }
        while a != b {
            a = self.nodes[a].parent.expect("non-root has parent");
            b = self.nodes[b].parent.expect("non-root has parent");
        }
        a
    }

    /// Path length from `v` up to the root.
    pub fn root_distance(&self, mut v: usize) -> f64 {
        let mut d = 0.0;
        while let Some(p) = self.nodes[v].parent {
            d += self.nodes[v].parent_edge_weight;
            v = p;
        }
        d
    }

    /// Leaves below (or equal to) `v`, ascending.
    pub fn leaves_under(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            match self.nodes[u].children {
                Some(ch) => stack.extend(ch),
                None => out.push(u),
            }
        }
        out.sort_unstable();
        out
    }

    /// The clusters (leaf sets, by name) of all internal nodes, sorted.
    /// Two trees are isomorphic as leaf-labelled trees iff these agree.
    pub fn clusters(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = (self.num_leaves..self.nodes.len())
            .map(|v| {
                let mut names: Vec<String> = self
                    .leaves_under(v)
                    .into_iter()
                    .map(|j| self.leaf_names[j].clone())
                    .collect();
                names.sort();
                names
            })
            .collect();
        out.sort();
        out
    }

    /// Relabels leaves so that leaf `i` carries `order[i]`.
    pub fn reorder_leaves(&self, order: &[String]) -> Result<Self> {
        let m = self.num_leaves;
        if order.len() != m {
            return Err(Error::Dimension(format!(
                "tree has {m} leaves, data has {} features",
                order.len()
            )));
        }
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        for (old, name) in self.leaf_names.iter().enumerate() {
            let pos = order
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Dimension(format!("tree leaf {name:?} is not a data feature")))?;
            if new_id.contains(&pos) {
                return Err(Error::Dimension(format!("duplicate leaf name {name:?}")));
            }
            new_id[old] = pos;
        }
        for (v, id) in new_id.iter_mut().enumerate().skip(m) {
            *id = v;
        }
        let mut nodes = vec![TreeNode::leaf(); self.nodes.len()];
        for (old, node) in self.nodes.iter().enumerate() {
            nodes[new_id[old]] = TreeNode {
                parent: node.parent.map(|p| new_id[p]),
                children: node.children.map(|c| c.map(|x| new_id[x])),
                ..node.clone()
            };
        }
        Self::from_nodes(m, nodes, order.to_vec())
    }

    pub fn to_newick(&self) -> String {
        self.to_newick_tree().write()
    }

    fn to_newick_tree(&self) -> NewickTree {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(v, n)| NewickNode {
                name: (v < self.num_leaves).then(|| self.leaf_names[v].clone()),
                length: n.parent.map(|_| n.parent_edge_weight),
                children: n.children.map(|c| c.to_vec()).unwrap_or_default(),
            })
            .collect();
        NewickTree { nodes, root: self.root }
    }

    /// Parses a strictly binary Newick tree. Leaves are numbered in order of
    /// appearance; a missing branch length reads as 0; internal labels and
    /// the root length are ignored.
    pub fn from_newick(text: &str) -> Result<Self> {
        let nw = parse_newick(text)?;
        let leaves = nw.leaves();
        let m = leaves.len();
        let mut id = vec![usize::MAX; nw.nodes.len()];
        for (j, &v) in leaves.iter().enumerate() {
            id[v] = j;
        }
        let mut next = m;
        for (v, n) in nw.nodes.iter().enumerate() {
            if !n.children.is_empty() {
                if n.children.len() != 2 {
                    return Err(Error::Domain(format!(
                        "newick node {v} has {} children; tree must be binary",
                        n.children.len()
                    )));
                }
                id[v] = next;
                next += 1;
            }
        }
        let parents = nw.parents();
        let mut nodes = vec![TreeNode::leaf(); nw.nodes.len()];
        let mut names = vec![String::new(); m];
        for (v, n) in nw.nodes.iter().enumerate() {
            let w = if parents[v].is_some() {
                n.length.unwrap_or(0.0)
            } else {
                0.0
            };
            if w < 0.0 {
                return Err(Error::Domain(format!("negative branch length {w}")));
            }
            nodes[id[v]] = TreeNode {
                parent: parents[v].map(|p| id[p]),
                children: (n.children.len() == 2).then(|| [id[n.children[0]], id[n.children[1]]]),
                parent_edge_weight: w,
                height: 0.0,
            };
            if id[v] < m {
                names[id[v]] = n.name.clone().unwrap_or_else(|| format!("f{}", id[v] + 1));
            }
        }
        // Heights: longest path down to a leaf, filled children-first.
        let mut preorder = Vec::with_capacity(nodes.len());
        let mut stack = vec![id[nw.root]];
        while let Some(v) = stack.pop() {
            preorder.push(v);
            if let Some(ch) = nodes[v].children {
                stack.extend(ch);
            }
        }
        for &v in preorder.iter().rev() {
            if let Some(ch) = nodes[v].children {
                nodes[v].height = ch
                    .iter()
                    .map(|&c| nodes[c].height + nodes[c].parent_edge_weight)
                    .fold(0.0, f64::max);
            }
        }
        Self::from_nodes(m, nodes, names)
    }
}

/// Path length between two leaves (or any two nodes).
///
/// The second half of the path is accumulated top-down so the result is
/// bit-identical to a shortest-path search started at `j`.
pub fn tree_metric(t: &WeightedBinaryTree, j: usize, jp: usize) -> Result<f64> {
    let n = t.num_nodes();
    if j >= n || jp >= n {
        return Err(Error::Parameter(format!(
            "node index out of range ({j}, {jp}) for {n} nodes"
        )));
    }
    let lca = t.lca(j, jp);
    let mut dist = 0.0;
    let mut v = j;
    while v != lca {
        dist += t.nodes[v].parent_edge_weight;
        v = t.nodes[v].parent.expect("below lca");
    }
    let mut down = Vec::new();
    let mut v = jp;
    while v != lca {
        down.push(t.nodes[v].parent_edge_weight);
        v = t.nodes[v].parent.expect("below lca");
    }
    for w in down.into_iter().rev() {
        dist += w;
    }
    Ok(dist)
}

/// One merge performed while decoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub node: usize,
    pub pair: (usize, usize),
    pub key: f64,
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns the new representative.
    pub fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        ra
    }
}

/// Generic pair-sweep decoder.
///
/// Pairs are visited in ascending `key`, ties broken by `(j, j')`. Each merge
/// creates a node at height `merge_height(j, j')`, raised if needed to the
/// taller child so that edge weights stay nonnegative.
pub fn decode_by_pairs(
    m: usize,
    key: impl Fn(usize, usize) -> f64,
    merge_height: impl Fn(usize, usize) -> f64,
) -> Result<(WeightedBinaryTree, Vec<Merge>)> {
    if m < 2 {
        return Err(Error::Dimension(format!(
            "need at least 2 features to decode a tree, got {m}"
        )));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(m * (m - 1) / 2);
    for j in 0..m {
        for jp in j + 1..m {
            let k = key(j, jp);
            if k.is_nan() {
                return Err(Error::Numerical(format!("NaN depth for pair ({j}, {jp})")));
            }
            pairs.push((k, j, jp));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut nodes: Vec<TreeNode> = (0..m).map(|_| TreeNode::leaf()).collect();
    let mut uf = UnionFind::new(m);
    // Top tree node of each component, indexed by representative.
    let mut top: Vec<usize> = (0..m).collect();
    let mut merges = Vec::with_capacity(m - 1);
    for (k, j, jp) in pairs {
        let (rj, rjp) = (uf.find(j), uf.find(jp));
        if rj == rjp {
            continue;
        }
        let (a, b) = (top[rj], top[rjp]);
        let id = nodes.len();
        let h = merge_height(j, jp).max(nodes[a].height).max(nodes[b].height);
        if !h.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite merge height for pair ({j}, {jp})"
            )));
        }
        for c in [a, b] {
            nodes[c].parent = Some(id);
            nodes[c].parent_edge_weight = h - nodes[c].height;
        }
        nodes.push(TreeNode {
            parent: None,
            children: Some([a, b]),
            parent_edge_weight: 0.0,
            height: h,
        });
        let r = uf.union(rj, rjp);
        top[r] = id;
        merges.push(Merge {
            node: id,
            pair: (j, jp),
            key: k,
        });
        if merges.len() == m - 1 {
            break;
        }
    }
    let names = (1..=m).map(|j| format!("f{j}")).collect();
    Ok((WeightedBinaryTree::from_nodes(m, nodes, names)?, merges))
}

/// Decodes the feature tree from HD-LCA depths; merge heights are half the
/// product-manifold distance of the triggering pair.
pub fn decode_tree(emb: &MultiScaleEmbedding) -> Result<WeightedBinaryTree> {
    decode_tree_with_merges(emb).map(|(t, _)| t)
}

pub fn decode_tree_with_merges(emb: &MultiScaleEmbedding) -> Result<(WeightedBinaryTree, Vec<Merge>)> {
    decode_by_pairs(
        emb.num_features(),
        |j, jp| hd_lca_depth(emb, j, jp),
        |j, jp| 0.5 * product_manifold_distance(emb, j, jp),
    )
}

/// Decodes from scale `k` alone: pairs ordered by the scale-`k` LCA
/// projection, heights from the scale-`k` geodesic distance.
pub fn decode_tree_single_scale(emb: &MultiScaleEmbedding, k: usize) -> Result<WeightedBinaryTree> {
    if k > emb.max_scale() {
        return Err(Error::Parameter(format!(
            "scale {k} exceeds the maximum scale {}",
            emb.max_scale()
        )));
    }
    decode_by_pairs(
        emb.num_features(),
        |j, jp| emb.projection(k, j, jp),
        |j, jp| 0.5 * emb.scale_distance(k, j, jp),
    )
    .map(|(t, _)| t)
}

/// Ancestor-or-self indicator `R` and edge weights `α` of a tree.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtreeIndicator {
    /// `(2m − 1) × m`; `r[(v, j)] = 1` iff `v` is `j` or an ancestor of `j`.
    pub r: DMatrix<f64>,
    pub alpha: DVector<f64>,
}

impl SubtreeIndicator {
    /// `‖diag(α) R (x − y)‖₁`.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let m = self.r.ncols();
        if x.len() != m || y.len() != m {
            return Err(Error::Dimension(format!(
                "histograms of length {} and {} for {m} leaves",
                x.len(),
                y.len()
            )));
        }
        let diff = DVector::from_iterator(m, x.iter().zip(y).map(|(a, b)| a - b));
        let mass = &self.r * diff;
        Ok(mass.component_mul(&self.alpha).abs().sum())
    }
}

pub fn subtree_indicator(t: &WeightedBinaryTree) -> SubtreeIndicator {
    let m = t.num_leaves();
    let mut r = DMatrix::zeros(t.num_nodes(), m);
    for j in 0..m {
        let mut v = j;
        loop {
            r[(v, j)] = 1.0;
            match t.nodes[v].parent {
                Some(p) => v = p,
                None => break,
            }
        }
    }
    let alpha = DVector::from_iterator(t.num_nodes(), t.nodes.iter().map(|n| n.parent_edge_weight));
    SubtreeIndicator { r, alpha }
}
