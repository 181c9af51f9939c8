//! kNN evaluation over precomputed distances, the normalized Frobenius
//! discrepancy, and per-pair TWD timing.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::data::{format_f64, LabelVector};
use crate::error::{Error, Result};
use crate::tree::{TreeNode, WeightedBinaryTree};
use crate::twd::{twd_unchecked, DistanceMatrixOut, TwdScratch};

pub const DEFAULT_KS: [usize; 10] = [1, 3, 5, 7, 9, 11, 13, 15, 17, 19];
pub const DEFAULT_SPLIT: f64 = 0.7;
pub const DEFAULT_REPEATS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnRow {
    pub k: usize,
    pub mean: f64,
    /// Sample standard deviation over repeats; 0 for a single repeat.
    pub std: f64,
    pub per_repeat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnReport {
    pub rows: Vec<KnnRow>,
    pub skipped: Vec<String>,
    pub best_k: usize,
    pub best_accuracy_mean: f64,
    pub best_accuracy_std: f64,
    pub split_fraction: f64,
    pub repeat_count: usize,
    pub seed: u64,
}

impl KnnReport {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,mean_accuracy,std_accuracy")?;
        for r in &self.rows {
            writeln!(out, "{},{},{}", r.k, format_f64(r.mean), format_f64(r.std))?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "kNN over {} repeats, train fraction {}, seed {}",
            self.repeat_count, self.split_fraction, self.seed
        );
        for r in &self.rows {
            let _ = writeln!(s, "  k={:<3} accuracy {:.4} ± {:.4}", r.k, r.mean, r.std);
        }
        for note in &self.skipped {
            let _ = writeln!(s, "  skipped: {note}");
        }
        let _ = writeln!(
            s,
            "best k={} accuracy {:.4} ± {:.4}",
            self.best_k, self.best_accuracy_mean, self.best_accuracy_std
        );
        s
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Majority vote among the `k` nearest train samples of `i`. Vote ties go to
/// the class with the smaller summed distance, then the smaller class id.
fn classify(w: &DistanceMatrixOut, class: &[usize], num_classes: usize, train: &[usize], i: usize, k: usize) -> usize {
    let mut order: Vec<usize> = train.to_vec();
    order.sort_by(|&a, &b| w.get(i, a).total_cmp(&w.get(i, b)).then(a.cmp(&b)));
    let mut votes = vec![0usize; num_classes];
    let mut dist = vec![0.0; num_classes];
    for &t in &order[..k] {
        votes[class[t]] += 1;
        dist[class[t]] += w.get(i, t);
    }
    (0..num_classes)
        .filter(|&c| votes[c] > 0)
        .min_by(|&a, &b| {
            votes[b]
                .cmp(&votes[a])
                .then(dist[a].total_cmp(&dist[b]))
                .then(a.cmp(&b))
        })
        .expect("k >= 1")
}

/// Repeated random-split kNN accuracy. Each repeat puts `⌈split·n⌉` samples
/// in the train set; ks that are not smaller than the train set are skipped.
pub fn knn_accuracy(
    w: &DistanceMatrixOut,
    labels: &LabelVector,
    ks: &[usize],
    split: f64,
    repeats: usize,
    seed: u64,
) -> Result<KnnReport> {
    let n = w.len();
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "{n}x{n} distances but {} labels",
            labels.len()
        )));
    }
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::Parameter(format!("split fraction {split} is not in (0, 1)")));
    }
    if repeats == 0 {
        return Err(Error::Parameter("need at least one repeat".into()));
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Parameter("k values must be positive".into()));
    }
    let n_train = (split * n as f64).ceil() as usize;
    if n_train >= n {
        return Err(Error::Parameter(format!(
            "split {split} leaves no test samples out of {n}"
        )));
    }
    let (class, names) = labels.class_ids();

    let mut ks: Vec<usize> = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut skipped = Vec::new();
    ks.retain(|&k| {
        if k >= n_train {
            skipped.push(format!("k={k} is not below the train size {n_train}"));
            false
        } else {
            true
        }
    });
    if ks.is_empty() {
        return Err(Error::Parameter(format!(
            "every k is at least the train size {n_train}"
        )));
    }

    let splits: Vec<Vec<usize>> = (0..repeats)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            perm
        })
        .collect();
    let acc: Vec<Vec<f64>> = crate::twd::map_rows(repeats, |r| {
        let (train, test) = splits[r].split_at(n_train);
        ks.iter()
            .map(|&k| {
                let hits = test
                    .iter()
                    .filter(|&&i| classify(w, &class, names.len(), train, i, k) == class[i])
                    .count();
                hits as f64 / test.len() as f64
            })
            .collect()
    });

    let rows: Vec<KnnRow> = ks
        .iter()
        .enumerate()
        .map(|(ki, &k)| {
            let per_repeat: Vec<f64> = acc.iter().map(|a| a[ki]).collect();
            let (mean, std) = mean_std(&per_repeat);
            KnnRow {
                k,
                mean,
                std,
                per_repeat,
            }
        })
        .collect();
    let best = rows
        .iter()
        .min_by(|a, b| b.mean.total_cmp(&a.mean).then(a.k.cmp(&b.k)))
        .expect("at least one k");
    Ok(KnnReport {
        best_k: best.k,
        best_accuracy_mean: best.mean,
        best_accuracy_std: best.std,
        rows,
        skipped,
        split_fraction: split,
        repeat_count: repeats,
        seed,
    })
}

/// `‖W_hat − W_true‖_F / ‖W_true‖_F`, or 0 when both are zero.
pub fn frobenius_discrepancy(w_hat: &DistanceMatrixOut, w_true: &DistanceMatrixOut) -> Result<f64> {
    if w_hat.len() != w_true.len() {
        return Err(Error::Dimension(format!("{} vs {} samples", w_hat.len(), w_true.len())));
    }
    frobenius_discrepancy_fn(w_hat.len(), |i, j| (w_hat.get(i, j), w_true.get(i, j)))
}

/// Streaming form for symmetric zero-diagonal matrices given entrywise by
/// `entry(i, j) = (hat, true)` on `i < j`; nothing `n × n` is stored.
pub fn frobenius_discrepancy_fn(n: usize, entry: impl Fn(usize, usize) -> (f64, f64) + Sync + Send) -> Result<f64> {
    let parts: Vec<(f64, f64)> = crate::twd::map_rows(n, |i| {
        let (mut diff, mut norm) = (0.0, 0.0);
        for j in i + 1..n {
            let (a, b) = entry(i, j);
            diff += (a - b) * (a - b);
            norm += b * b;
        }
        (diff, norm)
    });
    let (diff, norm) = parts.iter().fold((0.0, 0.0), |(d, s), &(a, b)| (d + a, s + b));
    discrepancy_from_sums(diff, norm)
}

/// `sqrt(Σ (hat − true)² / Σ true²)` from the two accumulated sums.
pub fn discrepancy_from_sums(diff_sq: f64, true_sq: f64) -> Result<f64> {
    if !diff_sq.is_finite() || !true_sq.is_finite() {
        return Err(Error::Numerical("non-finite entry in discrepancy".into()));
    }
    match (diff_sq == 0.0, true_sq == 0.0) {
        (true, _) => Ok(0.0),
        (false, true) => Err(Error::Domain("reference matrix is all zero".into())),
        (false, false) => Ok((diff_sq / true_sq).sqrt()),
    }
}

/// Random binary tree on `m` leaves: random pairwise merges with edge
/// weights uniform in `[0.1, 1)`.
pub fn random_tree<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<WeightedBinaryTree> {
    if m < 2 {
        return Err(Error::Dimension(format!(
            "a binary tree needs at least 2 leaves, got {m}"
        )));
    }
    let mut nodes: Vec<TreeNode> = (0..m)
        .map(|_| TreeNode {
            parent: None,
            children: None,
            parent_edge_weight: 0.0,
            height: 0.0,
        })
        .collect();
    let mut active: Vec<usize> = (0..m).collect();
    while active.len() > 1 {
        let a = active.swap_remove(rng.random_range(0..active.len()));
        let b = active.swap_remove(rng.random_range(0..active.len()));
        let id = nodes.len();
        let mut h: f64 = 0.0;
        for c in [a, b] {
            let w = rng.random_range(0.1..1.0);
            nodes[c].parent = Some(id);
            nodes[c].parent_edge_weight = w;
            h = h.max(nodes[c].height + w);
        }
        nodes.push(TreeNode {
            parent: None,
            children: Some([a, b]),
            parent_edge_weight: 0.0,
            height: h,
        });
        active.push(id);
    }
    let names = (1..=m).map(|j| format!("f{j}")).collect();
    WeightedBinaryTree::from_nodes(m, nodes, names)
}

/// Uniform draw from the probability simplex.
pub fn random_histogram<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    let mut h: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = h.iter().sum();
    for v in &mut h {
        *v /= s;
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub m: usize,
    pub pairs: usize,
    pub median_ns_per_pair: f64,
}

pub fn write_bench_csv<W: std::io::Write>(mut out: W, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(out, "m,pairs,median_ns_per_pair")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.m, r.pairs, format_f64(r.median_ns_per_pair))?;
    }
    Ok(())
}

const BENCH_BATCHES: usize = 15;

/// Median over batches of the per-pair `twd_pair` time on a random tree and
/// `pair_count` random histogram pairs, for each `m`.
pub fn bench_twd(m_values: &[usize], pair_count: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if pair_count == 0 {
        return Err(Error::Parameter("pair count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(m_values.len());
    for &m in m_values {
        let t = random_tree(m, &mut rng)?;
        let hists: Vec<(Vec<f64>, Vec<f64>)> = (0..pair_count)
            .map(|_| (random_histogram(m, &mut rng), random_histogram(m, &mut rng)))
            .collect();
        let mut scratch = TwdScratch::default();
        let mut sink = 0.0;
        // warm-up
        for (x, y) in &hists {
            sink += twd_unchecked(&t, x, y, &mut scratch);
        }
        let mut times: Vec<f64> = (0..BENCH_BATCHES)
            .map(|_| {
                let start = Instant::now();
                for (x, y) in &hists {
                    sink += twd_unchecked(&t, x, y, &mut scratch);
                }
                start.elapsed().as_nanos() as f64 / pair_count as f64
            })
            .collect();
        std::hint::black_box(sink);
        times.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            m,
            pairs: pair_count,
            median_ns_per_pair: times[BENCH_BATCHES / 2],
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Average ranks, with ties sharing the mean rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}
