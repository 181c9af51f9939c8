//! Synthetic data with a known latent feature tree.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{DataMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::oracle::GeneralTree;

/// Rejection attempts allowed per sample.
pub const MAX_REJECTIONS: usize = 1_000_000;

/// Laplacian eigenvalues below this are treated as zero.
pub const PSEUDO_INVERSE_CUTOFF: f64 = 1e-10;

pub const PRODUCE: [&str; 8] = [
    "apple", "orange", "banana", "carrot", "beetroot", "kale", "spinach", "lettuce",
];

/// Observations plus the tree that generated them.
#[derive(Debug, Clone)]
pub struct SyntheticBundle {
    pub x: DataMatrix,
    pub labels: Option<LabelVector>,
    pub truth: GeneralTree,
    /// Node of `truth` that carries feature `j`.
    pub feature_nodes: Vec<usize>,
}

impl SyntheticBundle {
    /// Lifts a feature histogram onto the nodes of `truth`.
    pub fn to_node_distribution(&self, h: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.truth.len()];
        for (j, &v) in self.feature_nodes.iter().enumerate() {
            out[v] = h[j];
        }
        out
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 samples, got {n}")));
    }
    Ok(())
}

/// One draw of the produce cascade, before any rejection.
pub fn sample_produce_cascade<R: Rng + ?Sized>(rng: &mut R) -> [bool; 8] {
    let mut coin = || rng.random_bool(0.5);
    let mut x = [false; 8];
    if coin() {
        for item in &mut x[0..3] {
            *item = coin();
        }
    }
    if coin() {
        let green_leaf = coin();
        let root = coin();
        if root {
            for item in &mut x[3..5] {
                *item = coin();
            }
        }
        if green_leaf {
            for item in &mut x[5..8] {
                *item = coin();
            }
        }
    }
    x
}

/// The produce category tree: produce → {fruit, vegetable}, vegetable →
/// {root vegetable, green leaf}, items below their category. Unit edges.
pub fn produce_tree() -> GeneralTree {
    // 0 produce, 1 fruit, 2 vegetable, 3 root_vegetable, 4 green_leaf, 5.. items
    let parent = vec![
        None,
        Some(0),
        Some(0),
        Some(2),
        Some(2),
        Some(1),
        Some(1),
        Some(1),
        Some(3),
        Some(3),
        Some(4),
        Some(4),
        Some(4),
    ];
    let mut names: Vec<Option<String>> = ["produce", "fruit", "vegetable", "root_vegetable", "green_leaf"]
        .iter()
        .map(|s| Some(s.to_string()))
        .collect();
    names.extend(PRODUCE.iter().map(|s| Some(s.to_string())));
    GeneralTree::from_parents(parent, vec![1.0; 13])
        .and_then(|t| t.with_names(names))
        .expect("static tree is valid")
}

/// Binary produce documents. All-zero draws are redrawn; the label is `1`
/// when any fruit is present and `0` otherwise.
pub fn gen_hier_docs(n: usize, seed: u64) -> Result<SyntheticBundle> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut attempts = 0;
        let x = loop {
            let x = sample_produce_cascade(&mut rng);
            if x.iter().any(|&b| b) {
                break x;
            }
            attempts += 1;
            if attempts >= MAX_REJECTIONS {
                return Err(Error::Numerical("produce sampler rejected too many draws".into()));
            }
        };
        labels.push(if x[0..3].iter().any(|&b| b) { "1" } else { "0" });
        rows.push(x.map(|b| if b { 1.0 } else { 0.0 }).to_vec());
    }
    let values = DMatrix::from_fn(n, 8, |i, j| rows[i][j]);
    let row_ids = (1..=n).map(|i| format!("doc{i}")).collect();
    let col_ids = PRODUCE.iter().map(|s| s.to_string()).collect();
    Ok(SyntheticBundle {
        x: DataMatrix::with_ids(values, row_ids, col_ids)?,
        labels: Some(labels.into_iter().collect()),
        truth: produce_tree(),
        feature_nodes: (5..13).collect(),
    })
}

/// Complete binary tree with `levels` levels in heap order (node `i` has
/// children `2i+1`, `2i+2`), unit edges, nodes named `v1..`.
pub fn balanced_binary_tree(levels: u32) -> GeneralTree {
    let n = (1usize << levels) - 1;
    let parent = (0..n).map(|i| (i > 0).then(|| (i - 1) / 2)).collect();
    let names = (1..=n).map(|i| Some(format!("v{i}"))).collect();
    GeneralTree::from_parents(parent, vec![1.0; n])
        .and_then(|t| t.with_names(names))
        .expect("static tree is valid")
}

/// Combinatorial Laplacian `D − A` of a weighted tree.
pub fn tree_laplacian(t: &GeneralTree) -> DMatrix<f64> {
    let n = t.len();
    let mut l = DMatrix::zeros(n, n);
    for v in 0..n {
        if let Some(p) = t.parent(v) {
            let w = t.weight(v);
            l[(v, p)] -= w;
            l[(p, v)] -= w;
            l[(v, v)] += w;
            l[(p, p)] += w;
        }
    }
    l
}

/// Factor `F` with `F Fᵀ = L†`, from the eigenpairs of `L` above the cutoff.
pub fn pseudo_inverse_factor(l: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(l.clone());
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > PSEUDO_INVERSE_CUTOFF)
        .collect();
    let cols: Vec<DVector<f64>> = keep
        .iter()
        .map(|&i| eig.eigenvectors.column(i) / eig.eigenvalues[i].sqrt())
        .collect();
    DMatrix::from_columns(&cols)
}

/// Gaussian samples on the 15-node, four-level balanced binary tree with
/// mean `5·1` and covariance `L†`; draws with a negative entry are redrawn.
pub fn gen_tree_gaussians(n: usize, seed: u64) -> Result<SyntheticBundle> {
    check_n(n)?;
    let truth = balanced_binary_tree(4);
    let m = truth.len();
    let factor = pseudo_inverse_factor(&tree_laplacian(&truth));
    let r = factor.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = DMatrix::zeros(n, m);
    for i in 0..n {
        let mut attempts = 0;
        loop {
            let z = DVector::from_fn(r, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &factor * z;
            if x.iter().all(|v| *v + 5.0 >= 0.0) {
                for j in 0..m {
                    values[(i, j)] = 5.0 + x[j];
                }
                break;
            }
            attempts += 1;
            if attempts >= MAX_REJECTIONS {
                return Err(Error::Numerical("Gaussian sampler rejected too many draws".into()));
            }
        }
    }
    let row_ids = (1..=n).map(|i| format!("x{i}")).collect();
    let col_ids = (1..=m).map(|j| format!("v{j}")).collect();
    Ok(SyntheticBundle {
        x: DataMatrix::with_ids(values, row_ids, col_ids)?,
        labels: None,
        truth,
        feature_nodes: (0..m).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn produce_shapes() {
        let b = gen_hier_docs(100, 1).unwrap();
        assert_eq!((b.x.nrows(), b.x.ncols()), (100, 8));
        assert_eq!(b.labels.as_ref().unwrap().len(), 100);
        assert_eq!(b.truth.len(), 13);
        assert_eq!(b.truth.leaves(), (5..13).collect::<Vec<_>>());
        for i in 0..100 {
            assert!((0..8).any(|j| b.x.get(i, j) > 0.0));
        }
    }

    #[test]
    fn laplacian_pseudo_inverse() {
        let t = balanced_binary_tree(4);
        assert_eq!(t.len(), 15);
        assert_eq!(t.leaves().len(), 8);
        let l = tree_laplacian(&t);
        let f = pseudo_inverse_factor(&l);
        assert_eq!(f.ncols(), 14);
        let pinv = &f * f.transpose();
        // L L† L = L
        assert!((&l * &pinv * &l - &l).abs().max() < 1e-10);
    }

    #[test]
    fn gaussian_determinism() {
        let a = gen_tree_gaussians(20, 9).unwrap();
        let b = gen_tree_gaussians(20, 9).unwrap();
        assert_eq!(a.x, b.x);
        assert_ne!(a.x, gen_tree_gaussians(20, 10).unwrap().x);
        assert!(a.x.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn too_few_samples() {
        assert!(gen_hier_docs(1, 0).is_err());
        assert!(gen_tree_gaussians(0, 0).is_err());
    }
}
