//! Tree-Wasserstein distances over a feature hierarchy recovered by
//! hyperbolic diffusion.
//!
//! The pipeline: feature distances ([`diffusion::cosine_distance_matrix`]) →
//! a diffusion operator and its dyadic powers → a multi-scale half-space
//! embedding ([`hyperbolic`]) → a decoded binary tree ([`tree`]) → linear-time
//! TWD between sample histograms ([`twd`]). [`oracle`] holds slow independent
//! references used by the tests.

pub mod data;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod hyperbolic;
pub mod newick;
pub mod oracle;
pub mod synth;
pub mod tree;
pub mod twd;

pub use data::{normalize_rows, DataMatrix, HistogramSet, LabelVector, TableFormat};
pub use error::{Error, Result};
pub use experiments::{fit_tree, FittedTree, PipelineConfig};
pub use tree::{decode_tree, WeightedBinaryTree};
pub use twd::{twd_matrix, twd_pair, DistanceMatrixOut};

/// Crate version, recorded in output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
