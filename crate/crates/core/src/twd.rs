//! Tree-Wasserstein distance between feature histograms on a binary tree.
//!
//! `TW(x, y) = Σ_v α_v |Σ_{leaves u under v} (x(u) − y(u))|`, evaluated with a
//! single post-order pass that pushes signed leaf mass up to the root.

use nalgebra::DMatrix;

use crate::data::{check_histogram, HistogramSet};
use crate::error::{Error, Result};
use crate::tree::WeightedBinaryTree;

/// Tolerance on the unit mass of TWD inputs.
pub const INPUT_MASS_TOL: f64 = 1e-9;

/// Symmetric `n × n` matrix of pairwise distances with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrixOut {
    w: DMatrix<f64>,
    ids: Vec<String>,
}

impl DistanceMatrixOut {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        let ids = (1..=w.nrows()).map(|i| format!("s{i}")).collect();
        Self::with_ids(w, ids)
    }

    pub fn with_ids(w: DMatrix<f64>, ids: Vec<String>) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n || ids.len() != n {
            return Err(Error::Dimension(format!(
                "distance matrix {}x{} with {} ids",
                n,
                w.ncols(),
                ids.len()
            )));
        }
        for i in 0..n {
            if w[(i, i)] != 0.0 {
                return Err(Error::Domain(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let (a, b) = (w[(i, j)], w[(j, i)]);
                if !(a >= 0.0 && a.is_finite()) || (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(Error::Domain(format!("entries ({i},{j}) are not a symmetric distance")));
                }
            }
        }
        Ok(Self { w, ids })
    }

    pub fn len(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.w.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Writes a CSV with sample identifiers as header row and first column.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W, comment: Option<&str>) -> std::io::Result<()> {
        crate::data::write_comment(&mut out, comment)?;
        crate::data::write_labeled_table(
            &mut out,
            crate::data::TableFormat::Csv,
            "id",
            &self.ids,
            &self.ids,
            |i, j| self.w[(i, j)],
        )
    }

    /// Reads a square table as written by [`Self::write_csv`].
    pub fn read_csv<R: std::io::Read>(rdr: R) -> Result<Self> {
        let m = crate::data::read_matrix(rdr, crate::data::TableFormat::Csv)?;
        Self::with_ids(m.values().clone(), m.row_ids().to_vec())
    }
}

/// Reusable per-thread buffer for [`twd_pair_with`].
#[derive(Debug, Clone, Default)]
pub struct TwdScratch {
    mass: Vec<f64>,
}

fn check_input(t: &WeightedBinaryTree, x: &[f64], name: &str) -> Result<()> {
    if x.len() != t.num_leaves() {
        return Err(Error::Dimension(format!(
            "histogram {name} has length {}, tree has {} leaves",
            x.len(),
            t.num_leaves()
        )));
    }
    check_histogram(x, INPUT_MASS_TOL).map_err(|e| match e {
        Error::Domain(msg) => Error::Domain(format!("histogram {name}: {msg}")),
        other => other,
    })
}

/// TWD between two leaf histograms in `O(m)`.
pub fn twd_pair(t: &WeightedBinaryTree, x: &[f64], y: &[f64]) -> Result<f64> {
    twd_pair_with(t, x, y, &mut TwdScratch::default())
}

pub fn twd_pair_with(t: &WeightedBinaryTree, x: &[f64], y: &[f64], scratch: &mut TwdScratch) -> Result<f64> {
    check_input(t, x, "x")?;
    check_input(t, y, "y")?;
    Ok(twd_unchecked(t, x, y, scratch))
}

/// The traversal itself; inputs are assumed validated.
pub(crate) fn twd_unchecked(t: &WeightedBinaryTree, x: &[f64], y: &[f64], scratch: &mut TwdScratch) -> f64 {
    let flat = t.flat();
    let mass = &mut scratch.mass;
    mass.clear();
    mass.resize(flat.parent.len(), 0.0);
    for (j, &s) in flat.leaf_slot.iter().enumerate() {
        mass[s] = x[j] - y[j];
    }
    let mut total = 0.0;
    // every slot but the root (last) has a parent further right
    for i in 0..mass.len() - 1 {
        let carried = mass[i];
        total += flat.weight[i] * carried.abs();
        mass[flat.parent[i]] += carried;
    }
    total
}

/// All pairwise TWDs. Rows are computed in parallel when the `parallel`
/// feature is on.
pub fn twd_matrix(t: &WeightedBinaryTree, h: &HistogramSet) -> Result<DistanceMatrixOut> {
    let n = h.len();
    for (i, row) in h.rows().enumerate() {
        check_input(t, row, &i.to_string())?;
    }
    let rows: Vec<Vec<f64>> = map_rows(n, |i| {
        let mut scratch = TwdScratch::default();
        (0..n)
            .map(|j| {
                if j > i {
                    twd_unchecked(t, h.row(i), h.row(j), &mut scratch)
                } else {
                    0.0
                }
            })
            .collect()
    });
    let mut w = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for j in i + 1..n {
            w[(i, j)] = row[j];
            w[(j, i)] = row[j];
        }
    }
    DistanceMatrixOut::new(w)
}

/// `Σ_k TW(x, y, B^k)` over a family of trees on the same leaves.
pub fn tree_sliced_sum(trees: &[WeightedBinaryTree], x: &[f64], y: &[f64]) -> Result<f64> {
    let Some(first) = trees.first() else {
        return Err(Error::Parameter("no trees given".into()));
    };
    if let Some(t) = trees.iter().find(|t| t.num_leaves() != first.num_leaves()) {
        return Err(Error::Dimension(format!(
            "trees with {} and {} leaves",
            first.num_leaves(),
            t.num_leaves()
        )));
    }
    let mut scratch = TwdScratch::default();
    trees.iter().map(|t| twd_pair_with(t, x, y, &mut scratch)).sum()
}

#[cfg(feature = "parallel")]
pub(crate) fn map_rows<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_rows<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}
