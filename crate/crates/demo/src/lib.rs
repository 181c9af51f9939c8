//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The demo fits a tree to generated produce documents and exposes three
//! views: the decoded tree, the document TWD matrix, and the feature depth
//! matrix. The logic lives in [`Session`] so it can be tested natively.

use latent_twd::hyperbolic::depth_matrix;
use latent_twd::synth::gen_hier_docs;
use latent_twd::{fit_tree, normalize_rows, twd_matrix, DataMatrix, FittedTree, PipelineConfig, WeightedBinaryTree};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LayoutNode {
    pub name: Option<String>,
    pub parent: Option<usize>,
    /// Horizontal slot; leaves sit at 0, 1, ..., internal nodes over their children.
    pub x: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeLayout {
    pub nodes: Vec<LayoutNode>,
    pub root: usize,
    pub epsilon: f64,
    pub newick: String,
}

/// Leaves in depth-first order, internal nodes centred over their children.
pub fn layout(t: &WeightedBinaryTree) -> Vec<LayoutNode> {
    let mut x = vec![0.0; t.num_nodes()];
    let mut next = 0.0;
    let mut stack = vec![(t.root(), false)];
    while let Some((v, done)) = stack.pop() {
        match t.node(v).children {
            None => {
                x[v] = next;
                next += 1.0;
            }
            Some([a, b]) if done => x[v] = (x[a] + x[b]) / 2.0,
            Some([a, b]) => {
                stack.push((v, true));
                stack.push((b, false));
                stack.push((a, false));
            }
        }
    }
    (0..t.num_nodes())
        .map(|v| LayoutNode {
            name: t.leaf_names().get(v).cloned(),
            parent: t.node(v).parent,
            x: x[v],
            height: t.node(v).height,
        })
        .collect()
}

pub struct Session {
    x: DataMatrix,
    labels: Vec<String>,
    fitted: FittedTree,
}

impl Session {
    pub fn new(n: usize, seed: u64, epsilon_factor: f64, max_scale: usize) -> latent_twd::Result<Self> {
        let bundle = gen_hier_docs(n, seed)?;
        let cfg = PipelineConfig {
            epsilon_factor,
            max_scale,
            seed,
            ..Default::default()
        };
        let fitted = fit_tree(&bundle.x, &cfg)?;
        let labels = bundle.labels.map(|l| l.0).unwrap_or_default();
        Ok(Self {
            x: bundle.x,
            labels,
            fitted,
        })
    }

    pub fn tree_layout(&self) -> TreeLayout {
        let t = &self.fitted.tree;
        TreeLayout {
            nodes: layout(t),
            root: t.root(),
            epsilon: self.fitted.operator.epsilon(),
            newick: t.to_newick(),
        }
    }

    /// Document order with label-0 documents first, stable within a label.
    pub fn document_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.x.nrows()).collect();
        order.sort_by_key(|&i| self.labels.get(i).cloned());
        order
    }

    /// Row-major TWD matrix over documents in [`Session::document_order`].
    pub fn twd_heatmap(&self) -> latent_twd::Result<Vec<f64>> {
        let w = twd_matrix(&self.fitted.tree, &normalize_rows(&self.x)?)?;
        let order = self.document_order();
        Ok(order
            .iter()
            .flat_map(|&i| order.iter().map(move |&j| (i, j)))
            .map(|(i, j)| w.get(i, j))
            .collect())
    }

    /// Row-major HD-LCA depths between features.
    pub fn depths(&self) -> Vec<f64> {
        let a = depth_matrix(&self.fitted.embedding);
        a.transpose().iter().copied().collect()
    }
}

fn js_err(e: latent_twd::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    inner: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, seed: u32, epsilon_factor: f64, max_scale: usize) -> Result<Demo, JsError> {
        Session::new(n, seed as u64, epsilon_factor, max_scale)
            .map(|inner| Demo { inner })
            .map_err(js_err)
    }

    /// JSON tree layout: `{nodes: [{name, parent, x, height}], root, epsilon, newick}`.
    #[wasm_bindgen(js_name = treeLayout)]
    pub fn tree_layout(&self) -> Result<String, JsError> {
        serde_json::to_string(&self.inner.tree_layout()).map_err(|e| JsError::new(&e.to_string()))
    }

    #[wasm_bindgen(js_name = twdHeatmap)]
    pub fn twd_heatmap(&self) -> Result<Vec<f64>, JsError> {
        self.inner.twd_heatmap().map_err(js_err)
    }

    /// Labels in heatmap order.
    #[wasm_bindgen(js_name = sortedLabels)]
    pub fn sorted_labels(&self) -> Vec<String> {
        self.inner
            .document_order()
            .into_iter()
            .map(|i| self.inner.labels[i].clone())
            .collect()
    }

    #[wasm_bindgen(js_name = depthMatrix)]
    pub fn depth_matrix(&self) -> Vec<f64> {
        self.inner.depths()
    }

    #[wasm_bindgen(js_name = featureNames)]
    pub fn feature_names(&self) -> Vec<String> {
        self.inner.x.col_ids().to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_places_leaves_on_slots() {
        let s = Session::new(80, 0, 2.0, 7).unwrap();
        let l = s.tree_layout();
        assert_eq!(l.nodes.len(), 15);
        let mut leaf_x: Vec<f64> = l.nodes[..8].iter().map(|n| n.x).collect();
        leaf_x.sort_by(f64::total_cmp);
        assert_eq!(leaf_x, (0..8).map(f64::from).collect::<Vec<_>>());
        for n in &l.nodes {
            if let Some(p) = n.parent {
                assert!(l.nodes[p].height >= n.height);
            }
        }
        assert!(serde_json::to_string(&l).unwrap().contains("\"newick\""));
    }

    #[test]
    fn heatmap_is_symmetric_and_sorted() {
        let s = Session::new(30, 1, 2.0, 5).unwrap();
        let w = s.twd_heatmap().unwrap();
        assert_eq!(w.len(), 900);
        for i in 0..30 {
            assert_eq!(w[i * 30 + i], 0.0);
            for j in 0..30 {
                assert_eq!(w[i * 30 + j], w[j * 30 + i]);
            }
        }
        let labels: Vec<&String> = s.document_order().iter().map(|&i| &s.labels[i]).collect();
        assert!(labels.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn depths_are_symmetric() {
        let s = Session::new(30, 1, 2.0, 5).unwrap();
        let d = s.depths();
        assert_eq!(d.len(), 64);
        assert_eq!(d[1], d[8]);
    }
}
