//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints its own PASS/FAIL line; exits nonzero on any FAIL.

mod common;

use std::time::{Duration, Instant};

use latent_twd::diffusion::{build_diffusion_operator, cosine_distance_matrix};
use latent_twd::eval::{bench_twd, log_log_slope, random_histogram, random_tree, spearman};
use latent_twd::experiments::{fit_tree, synthetic_docs_default, toy_config, toy_recovery, PipelineConfig};
use latent_twd::hyperbolic::{hd_lca_depth, hyperbolic_lca, HalfSpacePoint};
use latent_twd::oracle::{exact_ot, frechet_mean_numeric, tw_reference, FrechetConstraint};
use latent_twd::synth::gen_hier_docs;
use latent_twd::tree::{subtree_indicator, tree_metric};
use latent_twd::twd::{tree_sliced_sum, twd_pair};
use latent_twd::{normalize_rows, DataMatrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn synthetic_document_classification() -> Outcome {
    let report = synthetic_docs_default(0).unwrap();
    outcome(
        report.best_accuracy_mean >= 0.95,
        format!(
            "best k={} mean accuracy {:.4} ± {:.4} (need >= 0.95)",
            report.best_k, report.best_accuracy_mean, report.best_accuracy_std
        ),
    )
}

fn topology_recovery() -> Outcome {
    let fruit: Vec<String> = ["apple", "banana", "orange"].map(String::from).to_vec();
    let vegetables: Vec<String> = ["beetroot", "carrot", "kale", "lettuce", "spinach"]
        .map(String::from)
        .to_vec();
    let expected = vec![fruit, vegetables];
    let hits = (0..5u64)
        .filter(|&seed| {
            let b = gen_hier_docs(1000, seed).unwrap();
            let f = fit_tree(
                &b.x,
                &PipelineConfig {
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            root_split(&f.tree) == expected
        })
        .count();
    outcome(
        hits >= 4,
        format!("fruit/vegetable split under the root in {hits}/5 seeds (need >= 4)"),
    )
}

fn toy_recovery_trend() -> Outcome {
    let sizes = [10, 100, 1000, 10000];
    let rows = toy_recovery(&sizes, 5, &toy_config(0)).unwrap();
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let halved = means[3] < 0.5 * means[0];
    let default_trend = toy_recovery(&sizes[..3], 5, &PipelineConfig::default()).unwrap();
    outcome(
        decreasing && halved,
        format!(
            "means {:?} at n={sizes:?} (strictly decreasing: {decreasing}, last < half of first: {halved}); \
             at epsilon factor 2 for n<=1000: {:?}",
            means.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>(),
            default_trend
                .iter()
                .map(|r| format!("{:.4}", r.mean))
                .collect::<Vec<_>>()
        ),
    )
}

fn tw_equals_ot() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..=16);
        let t = random_general_tree(n, &mut rng);
        let cost = dijkstra_all(n, &general_edges(&t));
        let mu = sparse_histogram(n, &mut rng);
        let nu = sparse_histogram(n, &mut rng);
        let tw = tw_reference(&t, &mu, &nu).unwrap();
        let ot = exact_ot(&cost, &mu, &nu).unwrap();
        worst = worst.max((tw - ot).abs());
    }
    outcome(
        worst <= 1e-9,
        format!("max |TW - OT| = {worst:.3e} over 200 trees (need <= 1e-9)"),
    )
}

fn closed_form_frechet_means() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_lca: f64 = 0.0;
    for _ in 0..100 {
        let dim = rng.random_range(1..=4);
        let h = rng.random_range(0.1..3.0);
        let horiz = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
        let z1 = HalfSpacePoint::from_parts(&horiz(&mut rng), h).unwrap();
        let z2 = HalfSpacePoint::from_parts(&horiz(&mut rng), h).unwrap();
        let closed = hyperbolic_lca(&z1, &z2).unwrap();
        let numeric = frechet_mean_numeric(&[z1, z2], FrechetConstraint::Free).unwrap();
        for (a, b) in closed.coords().iter().zip(numeric.coords()) {
            worst_lca = worst_lca.max((a - b).abs());
        }
    }

    let mut worst_depth: f64 = 0.0;
    let mut done = 0;
    let mut seed = 0;
    while done < 100 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (n, m) = (rng.random_range(5..30), rng.random_range(3..9));
        let x = DataMatrix::new(DMatrix::from_fn(n, m, |_, _| rng.random_range(0.0..1.0))).unwrap();
        let max_scale = rng.random_range(0..=9);
        let Ok(f) = fit_tree(
            &x,
            &PipelineConfig {
                max_scale,
                ..Default::default()
            },
        ) else {
            continue;
        };
        let j = rng.random_range(0..m);
        let jp = (j + rng.random_range(1..m)) % m;
        let points: Vec<HalfSpacePoint> = (0..=max_scale)
            .map(|k| {
                let mut coords = vec![0.0; m + 1];
                coords[m] = f.embedding.projection(k, j, jp);
                HalfSpacePoint::new(coords).unwrap()
            })
            .collect();
        let numeric = frechet_mean_numeric(&points, FrechetConstraint::VerticalAxis).unwrap();
        worst_depth = worst_depth.max((numeric.height() - hd_lca_depth(&f.embedding, j, jp)).abs());
        done += 1;
    }
    outcome(
        worst_lca <= 1e-6 && worst_depth <= 1e-6,
        format!("max deviation: hyperbolic LCA {worst_lca:.3e}, HD-LCA depth {worst_depth:.3e} (need <= 1e-6)"),
    )
}

fn metric_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut sym, mut self_dist, mut triangle) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    let mut min_distinct = f64::INFINITY;
    for _ in 0..1000 {
        let m = rng.random_range(2..40);
        let t = random_tree(m, &mut rng).unwrap();
        let [x, y, z] = [(); 3].map(|_| random_histogram(m, &mut rng));
        let dxy = twd_pair(&t, &x, &y).unwrap();
        let dyx = twd_pair(&t, &y, &x).unwrap();
        let dxz = twd_pair(&t, &x, &z).unwrap();
        let dyz = twd_pair(&t, &y, &z).unwrap();
        sym = sym.max((dxy - dyx).abs());
        self_dist = self_dist.max(twd_pair(&t, &x, &x).unwrap());
        min_distinct = min_distinct.min(dxy);
        triangle = triangle.max(dxz - dxy - dyz);
    }

    let mut four_point: f64 = 0.0;
    for _ in 0..20 {
        let t = random_tree(10, &mut rng).unwrap();
        let d = |a, b| tree_metric(&t, a, b).unwrap();
        for a in 0..10 {
            for b in a + 1..10 {
                for c in b + 1..10 {
                    for e in c + 1..10 {
                        let mut s = [d(a, b) + d(c, e), d(a, c) + d(b, e), d(a, e) + d(b, c)];
                        s.sort_by(f64::total_cmp);
                        four_point = four_point.max((s[2] - s[1]) / s[2]);
                    }
                }
            }
        }
    }
    let pass = sym <= 1e-12 && self_dist <= 1e-12 && min_distinct > 1e-12 && triangle <= 1e-9 && four_point <= 1e-12;
    outcome(
        pass,
        format!(
            "symmetry {sym:.1e}, d(x,x) {self_dist:.1e}, min d(x,y) {min_distinct:.3e}, \
             triangle excess {triangle:.1e}, four-point gap (relative) {four_point:.1e}"
        ),
    )
}

fn diffusion_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut stochastic, mut semigroup) = (0.0f64, 0.0f64);
    for trial in 0..10 {
        let n = rng.random_range(20..80);
        let x = DMatrix::from_fn(n, 50, |_, _| {
            if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random_range(0.0..1.0)
            }
        });
        let x = DataMatrix::new(x).unwrap();
        let factor = [0.5, 1.0, 2.0, 5.0, 10.0][trial % 5];
        let op = build_diffusion_operator(&cosine_distance_matrix(&x).unwrap(), factor).unwrap();
        for k in 0..=7 {
            let p = op.power((-(k as f64)).exp2());
            for col in p.column_iter() {
                stochastic = stochastic.max((col.sum() - 1.0).abs());
            }
        }
        let half = op.power(0.5);
        semigroup = semigroup.max((&half * &half - op.power(1.0)).abs().max());
    }
    outcome(
        stochastic <= 1e-8 && semigroup <= 1e-8,
        format!("max column-sum error {stochastic:.1e}, max |(P^1/2)^2 - P| {semigroup:.1e} (need <= 1e-8)"),
    )
}

fn matrix_form_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let m = rng.random_range(2..60);
        let t = random_tree(m, &mut rng).unwrap();
        let x = random_histogram(m, &mut rng);
        let y = random_histogram(m, &mut rng);
        let ind = subtree_indicator(&t);
        worst = worst.max((twd_pair(&t, &x, &y).unwrap() - ind.distance(&x, &y).unwrap()).abs());
    }
    outcome(
        worst <= 1e-12,
        format!("max |traversal - matrix form| = {worst:.1e} (need <= 1e-12)"),
    )
}

fn per_pair_linearity() -> Outcome {
    let ms: Vec<usize> = (8..=14).map(|e| 1usize << e).collect();
    let rows = bench_twd(&ms, 64, 9).unwrap();
    let xs: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.median_ns_per_pair).collect();
    let slope = log_log_slope(&xs, &ys);
    outcome(
        (0.8..=1.3).contains(&slope),
        format!(
            "log-log slope {slope:.3} (need in [0.8, 1.3]); ns/pair {:?}",
            ys.iter().map(|y| y.round() as u64).collect::<Vec<_>>()
        ),
    )
}

fn tree_sliced_proxy() -> Outcome {
    let b = gen_hier_docs(200, 0).unwrap();
    let f = fit_tree(&b.x, &PipelineConfig::default()).unwrap();
    let trees = f.single_scale_trees().unwrap();
    let h = normalize_rows(&b.x).unwrap();
    let (mut full, mut sliced) = (Vec::new(), Vec::new());
    for i in 0..h.len() {
        for j in i + 1..h.len() {
            full.push(twd_pair(&f.tree, h.row(i), h.row(j)).unwrap());
            sliced.push(tree_sliced_sum(&trees, h.row(i), h.row(j)).unwrap());
        }
    }
    let rho = spearman(&full, &sliced);
    outcome(
        rho >= 0.9,
        format!("Spearman {rho:.4} over {} pairs (need >= 0.9)", full.len()),
    )
}

/// Name, check and time budget.
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "synthetic document classification",
            synthetic_document_classification,
            Duration::from_secs(30),
        ),
        ("tree topology recovery", topology_recovery, Duration::from_secs(10)),
        ("toy TWD recovery", toy_recovery_trend, Duration::from_secs(300)),
        ("TW equals exact OT on trees", tw_equals_ot, Duration::from_secs(60)),
        (
            "closed-form Frechet means",
            closed_form_frechet_means,
            Duration::from_secs(60),
        ),
        ("metric axioms", metric_axioms, Duration::from_secs(60)),
        ("diffusion correctness", diffusion_correctness, Duration::from_secs(60)),
        (
            "matrix-form equivalence",
            matrix_form_equivalence,
            Duration::from_secs(60),
        ),
        ("per-pair linearity", per_pair_linearity, Duration::from_secs(60)),
        ("tree-sliced proxy", tree_sliced_proxy, Duration::from_secs(60)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let mark = if result.pass { "PASS" } else { "FAIL" };
        let slow = if elapsed > *budget {
            format!(" [over the {budget:?} budget]")
        } else {
            String::new()
        };
        println!(
            "criterion {:>2} {mark}: {name}: {} ({elapsed:.1?}){slow}",
            i + 1,
            result.detail
        );
        if !result.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
