use std::collections::HashMap;

use latent_twd::data::normalize_rows;
use latent_twd::eval::{frobenius_discrepancy, knn_accuracy, DEFAULT_KS};
use latent_twd::synth::{
    balanced_binary_tree, gen_hier_docs, gen_tree_gaussians, pseudo_inverse_factor, sample_produce_cascade,
    tree_laplacian,
};
use latent_twd::twd::DistanceMatrixOut;
use latent_twd::LabelVector;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact distribution of accepted produce vectors: every one of the 2^12
/// coin outcomes is equally likely, vectors with no item are dropped.
fn accepted_distribution() -> HashMap<[bool; 8], f64> {
    let mut counts: HashMap<[bool; 8], u32> = HashMap::new();
    let mut accepted = 0;
    for bits in 0u32..1 << 12 {
        let c = |i: u32| bits >> i & 1 == 1;
        let (fruit, veg, green, root) = (c(0), c(1), c(2), c(3));
        let x = [
            fruit && c(4),
            fruit && c(5),
            fruit && c(6),
            veg && root && c(7),
            veg && root && c(8),
            veg && green && c(9),
            veg && green && c(10),
            veg && green && c(11),
        ];
        if x.iter().any(|&b| b) {
            accepted += 1;
            *counts.entry(x).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .map(|(x, c)| (x, c as f64 / accepted as f64))
        .collect()
}

#[test]
fn raw_cascade_marginals() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 10_000;
    let (mut apple, mut branch) = (0, 0);
    for _ in 0..n {
        // The first coin of a draw is the fruit branch; a clone replays it.
        branch += rng.clone().random_bool(0.5) as usize;
        apple += sample_produce_cascade(&mut rng)[0] as usize;
    }
    let (apple, branch) = (apple as f64 / n as f64, branch as f64 / n as f64);
    assert!((apple - 0.25).abs() <= 0.03, "P(apple) = {apple}");
    assert!((branch - 0.5).abs() <= 0.05, "P(fruit branch) = {branch}");
}

#[test]
fn accepted_documents_match_enumeration() {
    let exact = accepted_distribution();
    let n = 20_000;
    let b = gen_hier_docs(n, 5).unwrap();
    let x = b.x.values();
    for j in 0..8 {
        let expect: f64 = exact.iter().filter(|(v, _)| v[j]).map(|(_, p)| p).sum();
        let got = x.column(j).sum() / n as f64;
        let sd = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((got - expect).abs() <= 4.0 * sd, "feature {j}: {got} vs {expect}");
    }
    let fruit: f64 = exact
        .iter()
        .filter(|(v, _)| v[0..3].iter().any(|&b| b))
        .map(|(_, p)| p)
        .sum();
    let labels = b.labels.unwrap();
    let got = labels.0.iter().filter(|l| *l == "1").count() as f64 / n as f64;
    assert!(
        (got - fruit).abs() <= 4.0 * (fruit * (1.0 - fruit) / n as f64).sqrt(),
        "{got} vs {fruit}"
    );
    assert!(x.row_iter().all(|r| r.sum() > 0.0));
}

#[test]
fn fruit_indicator_passes_runs_test() {
    let b = gen_hier_docs(2000, 8).unwrap();
    let s: Vec<bool> = b.labels.unwrap().0.iter().map(|l| l == "1").collect();
    let n1 = s.iter().filter(|&&v| v).count() as f64;
    let n0 = s.len() as f64 - n1;
    let runs = 1 + s.windows(2).filter(|w| w[0] != w[1]).count();
    let n = n0 + n1;
    let mean = 2.0 * n0 * n1 / n + 1.0;
    let var = 2.0 * n0 * n1 * (2.0 * n0 * n1 - n) / (n * n * (n - 1.0));
    let z = (runs as f64 - mean) / var.sqrt();
    // two-sided p > 0.01
    assert!(z.abs() < 2.5758, "runs z = {z}");
}

#[test]
fn generators_are_deterministic() {
    assert_eq!(gen_hier_docs(50, 4).unwrap().x, gen_hier_docs(50, 4).unwrap().x);
    assert_ne!(gen_hier_docs(50, 4).unwrap().x, gen_hier_docs(50, 5).unwrap().x);
    assert_eq!(
        gen_tree_gaussians(50, 4).unwrap().x,
        gen_tree_gaussians(50, 4).unwrap().x
    );
}

#[test]
fn gaussian_means_are_five() {
    let b = gen_tree_gaussians(10_000, 2).unwrap();
    for (j, col) in b.x.values().column_iter().enumerate() {
        let mean = col.mean();
        assert!((mean - 5.0).abs() <= 0.2, "feature {j}: mean {mean}");
    }
}

fn sample_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - mean[j]);
    centered.transpose() * centered / (n - 1.0)
}

#[test]
fn gaussian_covariance_approaches_pseudo_inverse() {
    let f = pseudo_inverse_factor(&tree_laplacian(&balanced_binary_tree(4)));
    let target = &f * f.transpose();
    let err = |n: usize| {
        (0..3)
            .map(|s| (sample_covariance(gen_tree_gaussians(n, 100 + s).unwrap().x.values()) - &target).norm())
            .sum::<f64>()
            / 3.0
    };
    let errs: Vec<f64> = [100, 1000, 10_000].iter().map(|&n| err(n)).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn knn_on_random_labels_is_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 200;
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = rng.random();
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    let labels: LabelVector = (0..n).map(|_| if rng.random_bool(0.5) { "a" } else { "b" }).collect();
    let r = knn_accuracy(&DistanceMatrixOut::new(w).unwrap(), &labels, &DEFAULT_KS, 0.7, 5, 3).unwrap();
    for row in &r.rows {
        assert!((row.mean - 0.5).abs() <= 0.1, "k={} mean {}", row.k, row.mean);
    }
}

#[test]
fn frobenius_of_scaled_matrix() {
    let b = gen_hier_docs(40, 1).unwrap();
    let h = normalize_rows(&b.x).unwrap();
    let n = h.len();
    let w = DMatrix::from_fn(n, n, |i, j| {
        h.row(i).iter().zip(h.row(j)).map(|(a, c)| (a - c).abs()).sum::<f64>()
    });
    let truth = DistanceMatrixOut::new(w.clone()).unwrap();
    let hat = DistanceMatrixOut::new(w * 1.1).unwrap();
    let d = frobenius_discrepancy(&hat, &truth).unwrap();
    assert!((d - 0.1).abs() <= 1e-12, "{d}");
}
