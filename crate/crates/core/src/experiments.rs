//! End-to-end pipeline from a data matrix to a decoded feature tree, and the
//! two desk-scale experiments built on it.

use crate::data::{normalize_rows, DataMatrix};
use crate::diffusion::{
    build_diffusion_operator, cosine_distance_matrix, landmark_diffusion, multiscale_densities, DiffusionOperator,
    MultiScaleDensities, DEFAULT_EPSILON_FACTOR,
};
use crate::error::{Error, Result};
use crate::eval::{discrepancy_from_sums, knn_accuracy, KnnReport, DEFAULT_KS, DEFAULT_REPEATS, DEFAULT_SPLIT};
use crate::hyperbolic::{embed, MultiScaleEmbedding};
use crate::oracle::tw_reference;
use crate::synth::{gen_hier_docs, gen_tree_gaussians};
use crate::tree::{decode_tree, decode_tree_single_scale, WeightedBinaryTree};
use crate::twd::{map_rows, twd_matrix, twd_unchecked, TwdScratch};

pub const DEFAULT_MAX_SCALE: usize = 7;
pub const MAX_SCALE_LIMIT: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub epsilon_factor: f64,
    pub max_scale: usize,
    /// Landmark exponent; `None` builds the exact operator.
    pub landmark_tau: Option<f64>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            epsilon_factor: DEFAULT_EPSILON_FACTOR,
            max_scale: DEFAULT_MAX_SCALE,
            landmark_tau: None,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_factor > 0.0 && self.epsilon_factor.is_finite()) {
            return Err(Error::Parameter(format!(
                "epsilon factor must be positive, got {}",
                self.epsilon_factor
            )));
        }
        if self.max_scale > MAX_SCALE_LIMIT {
            return Err(Error::Parameter(format!(
                "max scale {} is outside 0..={MAX_SCALE_LIMIT}",
                self.max_scale
            )));
        }
        if let Some(tau) = self.landmark_tau {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::Parameter(format!("landmark tau {tau} is outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Everything the pipeline computes on the way to the tree.
#[derive(Debug, Clone)]
pub struct FittedTree {
    pub operator: DiffusionOperator,
    pub densities: MultiScaleDensities,
    pub embedding: MultiScaleEmbedding,
    /// Leaves are named after the data matrix columns.
    pub tree: WeightedBinaryTree,
}

impl FittedTree {
    /// Trees decoded from each scale alone, `0..=max_scale`.
    pub fn single_scale_trees(&self) -> Result<Vec<WeightedBinaryTree>> {
        (0..=self.embedding.max_scale())
            .map(|k| self.single_scale_tree(k))
            .collect()
    }

    pub fn single_scale_tree(&self, k: usize) -> Result<WeightedBinaryTree> {
        decode_tree_single_scale(&self.embedding, k)?.with_leaf_names(self.tree.leaf_names().to_vec())
    }
}

/// Cosine feature distances → diffusion operator → dyadic densities →
/// half-space embedding → decoded tree.
pub fn fit_tree(x: &DataMatrix, config: &PipelineConfig) -> Result<FittedTree> {
    config.validate()?;
    let operator = match config.landmark_tau {
        Some(tau) => landmark_diffusion(x, tau, config.epsilon_factor, config.seed)?,
        None => build_diffusion_operator(&cosine_distance_matrix(x)?, config.epsilon_factor)?,
    };
    let densities = multiscale_densities(&operator, config.max_scale);
    let embedding = embed(&densities)?;
    let tree = decode_tree(&embedding)?.with_leaf_names(x.col_ids().to_vec())?;
    Ok(FittedTree {
        operator,
        densities,
        embedding,
        tree,
    })
}

/// kNN classification of `n` produce documents under the decoded-tree TWD.
pub fn synthetic_docs(n: usize, repeats: usize, config: &PipelineConfig) -> Result<KnnReport> {
    let bundle = gen_hier_docs(n, config.seed)?;
    let fitted = fit_tree(&bundle.x, config)?;
    let h = normalize_rows(&bundle.x)?;
    let w = twd_matrix(&fitted.tree, &h)?;
    let labels = bundle.labels.expect("produce documents are labeled");
    knn_accuracy(&w, &labels, &DEFAULT_KS, DEFAULT_SPLIT, repeats, config.seed)
}

pub fn synthetic_docs_default(seed: u64) -> Result<KnnReport> {
    synthetic_docs(
        100,
        DEFAULT_REPEATS,
        &PipelineConfig {
            seed,
            ..Default::default()
        },
    )
}

/// Normalized Frobenius discrepancy between the decoded-tree TWD and the
/// reference TW on the true 15-node tree, for `n` Gaussian tree samples.
pub fn toy_discrepancy(n: usize, config: &PipelineConfig) -> Result<f64> {
    let bundle = gen_tree_gaussians(n, config.seed)?;
    let fitted = fit_tree(&bundle.x, config)?;
    let h = normalize_rows(&bundle.x)?;
    let on_nodes: Vec<Vec<f64>> = h.rows().map(|r| bundle.to_node_distribution(r)).collect();
    let truth = &bundle.truth;
    let tree = &fitted.tree;
    // Both distances row by row, reduced on the fly; nothing n × n is held.
    let parts: Vec<Result<(f64, f64)>> = map_rows(n, |i| {
        let mut scratch = TwdScratch::default();
        let (mut diff, mut norm) = (0.0, 0.0);
        for j in i + 1..n {
            let hat = twd_unchecked(tree, h.row(i), h.row(j), &mut scratch);
            let reference = tw_reference(truth, &on_nodes[i], &on_nodes[j])?;
            diff += (hat - reference) * (hat - reference);
            norm += reference * reference;
        }
        Ok((diff, norm))
    });
    let (mut diff, mut norm) = (0.0, 0.0);
    for p in parts {
        let (d, s) = p?;
        diff += d;
        norm += s;
    }
    discrepancy_from_sums(diff, norm)
}

/// Bandwidth factor for the Gaussian tree samples. Their cosine feature
/// distances are small, and at the general default the kernel is nearly flat.
pub const TOY_EPSILON_FACTOR: f64 = 0.1;

pub const TOY_SAMPLE_SIZES: [usize; 8] = [3, 10, 32, 100, 316, 1000, 3162, 10000];

#[derive(Debug, Clone, PartialEq)]
pub struct ToyRow {
    pub n: usize,
    pub per_seed: Vec<f64>,
    pub mean: f64,
}

/// Discrepancy for each `n`, averaged over seeds `seed, seed+1, ...`.
pub fn toy_recovery(sizes: &[usize], seeds: usize, config: &PipelineConfig) -> Result<Vec<ToyRow>> {
    if seeds == 0 {
        return Err(Error::Parameter("need at least one seed".into()));
    }
    sizes
        .iter()
        .map(|&n| {
            let per_seed = (0..seeds as u64)
                .map(|s| {
                    toy_discrepancy(
                        n,
                        &PipelineConfig {
                            seed: config.seed.wrapping_add(s),
                            ..*config
                        },
                    )
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean = per_seed.iter().sum::<f64>() / seeds as f64;
            Ok(ToyRow { n, per_seed, mean })
        })
        .collect()
}

pub fn toy_config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        epsilon_factor: TOY_EPSILON_FACTOR,
        seed,
        ..Default::default()
    }
}
