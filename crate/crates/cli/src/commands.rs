use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use latent_twd::data::{load_labels, load_matrix, load_vector, write_labels, write_matrix, TableFormat};
use latent_twd::diffusion::{
    build_diffusion_operator, cosine_distance_matrix, landmark_diffusion, multiscale_densities,
};
use latent_twd::eval::{bench_twd, knn_accuracy, log_log_slope, write_bench_csv};
use latent_twd::experiments::{synthetic_docs, toy_config, toy_recovery, TOY_SAMPLE_SIZES};
use latent_twd::hyperbolic::embed;
use latent_twd::oracle::{exact_ot, tw_reference, GeneralTree};
use latent_twd::synth::{gen_hier_docs, gen_tree_gaussians};
use latent_twd::{
    decode_tree, normalize_rows, twd_matrix, DataMatrix, DistanceMatrixOut, FittedTree, PipelineConfig,
    WeightedBinaryTree,
};

use crate::config::{describe, resolve, FileConfig};
use crate::output::{read_newick, write_atomic, Header};
use crate::{Cli, Command, FormatArg, OracleCommand, ReproCommand, SynthKind};

/// Accuracy the produce-document experiment is expected to reach.
pub const DOCS_ACCURACY_THRESHOLD: f64 = 0.95;

trait Tag<T> {
    fn tag(self, module: &str) -> Result<T>;
}

impl<T> Tag<T> for latent_twd::Result<T> {
    fn tag(self, module: &str) -> Result<T> {
        self.map_err(|e| anyhow!("{module}: {e}"))
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    if let Some(n) = cli.threads.or(file.threads) {
        if n == 0 {
            bail!("config: --threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("config: thread pool")?;
    }
    match cli.command {
        Command::TreeBuild {
            input,
            output,
            format,
            spectrum,
            pipeline,
        } => {
            let cfg = resolve(&pipeline, &file, PipelineConfig::default())?;
            tree_build(&input, &output, table_format(format, &input), spectrum.as_deref(), &cfg)
        }
        Command::Dist {
            input,
            tree,
            output,
            format,
            single_scale,
            pipeline,
        } => {
            let cfg = resolve(&pipeline, &file, PipelineConfig::default())?;
            dist(
                &input,
                tree.as_deref(),
                &output,
                table_format(format, &input),
                single_scale,
                &cfg,
            )
        }
        Command::Synth {
            kind,
            n,
            seed,
            output_dir,
        } => synth(kind, n, seed, &output_dir),
        Command::EvalKnn {
            dist,
            labels,
            output,
            ks,
            split,
            repeats,
            seed,
        } => eval_knn(&dist, &labels, &output, &ks, split, repeats, seed),
        Command::Oracle(sub) => oracle(sub),
        Command::Repro(ReproCommand::SyntheticDocs {
            n,
            repeats,
            output_dir,
            pipeline,
        }) => {
            let cfg = resolve(&pipeline, &file, PipelineConfig::default())?;
            repro_docs(n, repeats, &output_dir, &cfg)
        }
        Command::Repro(ReproCommand::ToyRecovery {
            sizes,
            seeds,
            output,
            pipeline,
        }) => {
            let cfg = resolve(&pipeline, &file, toy_config(0))?;
            let sizes = sizes.unwrap_or_else(|| TOY_SAMPLE_SIZES.to_vec());
            repro_toy(&sizes, seeds, &output, &cfg)
        }
        Command::Bench {
            sizes,
            pairs,
            seed,
            output,
        } => {
            let sizes = sizes.unwrap_or_else(|| (8..=14).map(|e| 1usize << e).collect());
            bench(&sizes, pairs, seed, &output)
        }
    }
}

fn table_format(arg: Option<FormatArg>, path: &Path) -> TableFormat {
    match arg {
        Some(FormatArg::Csv) => TableFormat::Csv,
        Some(FormatArg::Tsv) => TableFormat::Tsv,
        None => TableFormat::from_path(path),
    }
}

fn load_input(path: &Path, format: TableFormat) -> Result<DataMatrix> {
    load_matrix(path, format).tag("datamodel")
}

/// The pipeline step by step, so a failure names the stage it came from.
fn fit(x: &DataMatrix, cfg: &PipelineConfig) -> Result<FittedTree> {
    let operator = match cfg.landmark_tau {
        Some(tau) => landmark_diffusion(x, tau, cfg.epsilon_factor, cfg.seed),
        None => cosine_distance_matrix(x).and_then(|d| build_diffusion_operator(&d, cfg.epsilon_factor)),
    }
    .tag("diffusion_kernel")?;
    let densities = multiscale_densities(&operator, cfg.max_scale);
    let warnings = densities.warnings();
    if !warnings.is_empty() {
        let worst = warnings.iter().map(|w| w.clamped_mass).fold(0.0, f64::max);
        eprintln!(
            "warning: clamped negative density mass in {} (scale, feature) columns, largest {worst:.3e}",
            warnings.len()
        );
    }
    let embedding = embed(&densities).tag("hyperbolic_geometry")?;
    let tree = decode_tree(&embedding)
        .and_then(|t| t.with_leaf_names(x.col_ids().to_vec()))
        .tag("tree_decode")?;
    eprintln!(
        "epsilon = {:.6e} (factor {}), K_c = {}",
        operator.epsilon(),
        cfg.epsilon_factor,
        cfg.max_scale
    );
    Ok(FittedTree {
        operator,
        densities,
        embedding,
        tree,
    })
}

fn pipeline_header(command: &str, input: &Path, cfg: &PipelineConfig) -> Header {
    Header::new(command)
        .with("config", describe(cfg))
        .with("input", input.display())
}

fn tree_build(
    input: &Path,
    output: &Path,
    format: TableFormat,
    spectrum: Option<&Path>,
    cfg: &PipelineConfig,
) -> Result<()> {
    let x = load_input(input, format)?;
    let fitted = fit(&x, cfg)?;
    let header = pipeline_header("tree-build", input, cfg).with("epsilon", fitted.operator.epsilon());
    write_atomic(output, |out| {
        header.write_to(out)?;
        use std::io::Write;
        writeln!(out, "{}", fitted.tree.to_newick())
    })?;
    if let Some(path) = spectrum {
        write_atomic(path, |out| {
            header.write_to(out)?;
            fitted.operator.write_spectrum(out)
        })?;
    }
    Ok(())
}

fn dist(
    input: &Path,
    tree: Option<&Path>,
    output: &Path,
    format: TableFormat,
    single_scale: Option<usize>,
    cfg: &PipelineConfig,
) -> Result<()> {
    let x = load_input(input, format)?;
    let (t, header) = match (single_scale, tree) {
        (Some(k), _) => {
            if k > cfg.max_scale {
                bail!("config: --single-scale {k} exceeds max scale {}", cfg.max_scale);
            }
            let t = fit(&x, cfg)?.single_scale_tree(k).tag("tree_decode")?;
            (t, pipeline_header("dist", input, cfg).with("single_scale", k))
        }
        (None, Some(path)) => {
            let t = WeightedBinaryTree::from_newick(&read_newick(path)?)
                .and_then(|t| t.reorder_leaves(x.col_ids()))
                .tag("tree_decode")?;
            (t, pipeline_header("dist", input, cfg).with("tree", path.display()))
        }
        (None, None) => bail!("usage: dist needs --tree or --single-scale"),
    };
    let h = normalize_rows(&x).tag("datamodel")?;
    let w = twd_matrix(&t, &h)
        .and_then(|w| DistanceMatrixOut::with_ids(w.matrix().clone(), x.row_ids().to_vec()))
        .tag("tree_wasserstein")?;
    write_atomic(output, |out| w.write_csv(out, Some(&header.text())))
}

fn synth(kind: SynthKind, n: usize, seed: u64, dir: &Path) -> Result<()> {
    let (name, bundle) = match kind {
        SynthKind::HierDocs => ("hier-docs", gen_hier_docs(n, seed)),
        SynthKind::TreeGauss => ("tree-gauss", gen_tree_gaussians(n, seed)),
    };
    let bundle = bundle.tag("synth")?;
    std::fs::create_dir_all(dir).with_context(|| format!("io: creating {}", dir.display()))?;
    let header = Header::new("synth").with("kind", name).with("n", n).with("seed", seed);
    write_atomic(&dir.join("X.csv"), |out| {
        write_matrix(out, &bundle.x, TableFormat::Csv, Some(&header.text()))
    })?;
    if let Some(labels) = &bundle.labels {
        write_atomic(&dir.join("labels.csv"), |out| {
            write_labels(out, labels, bundle.x.row_ids(), Some(&header.text()))
        })?;
    }
    write_atomic(&dir.join("truth.nwk"), |out| {
        header.write_to(out)?;
        use std::io::Write;
        writeln!(out, "{}", bundle.truth.to_newick())
    })
}

fn summary_path(output: &Path) -> PathBuf {
    output.with_extension("txt")
}

fn eval_knn(
    dist: &Path,
    labels: &Path,
    output: &Path,
    ks: &[usize],
    split: f64,
    repeats: usize,
    seed: u64,
) -> Result<()> {
    let file = std::fs::File::open(dist).with_context(|| format!("io: reading {}", dist.display()))?;
    let w = DistanceMatrixOut::read_csv(file).tag("datamodel")?;
    let y = load_labels(labels, TableFormat::from_path(labels)).tag("datamodel")?;
    let report = knn_accuracy(&w, &y, ks, split, repeats, seed).tag("eval")?;
    let header = Header::new("eval-knn")
        .with("dist", dist.display())
        .with("labels", labels.display())
        .with("split", split)
        .with("repeats", repeats)
        .with("seed", seed);
    let summary = report.summary();
    write_atomic(output, |out| {
        header.write_to(out)?;
        report.write_csv(out)
    })?;
    write_atomic(&summary_path(output), |out| {
        header.write_to(out)?;
        out.extend_from_slice(summary.as_bytes());
        Ok(())
    })?;
    print!("{summary}");
    Ok(())
}

fn load_distribution(path: &Path, t: &GeneralTree) -> Result<Vec<f64>> {
    let (vals, names) = load_vector(path, TableFormat::from_path(path)).tag("datamodel")?;
    let Some(names) = names else {
        return Ok(vals);
    };
    let mut out = vec![0.0; t.len()];
    for (name, v) in names.iter().zip(vals) {
        let node = (0..t.len())
            .find(|&u| t.name(u) == Some(name.as_str()))
            .ok_or_else(|| anyhow!("oracle: no tree node named {name:?}"))?;
        out[node] += v;
    }
    Ok(out)
}

fn oracle(sub: OracleCommand) -> Result<()> {
    match sub {
        OracleCommand::Ot { cost, mu, nu } => {
            let c = load_input(&cost, TableFormat::from_path(&cost))?;
            let (mu, _) = load_vector(&mu, TableFormat::from_path(&mu)).tag("datamodel")?;
            let (nu, _) = load_vector(&nu, TableFormat::from_path(&nu)).tag("datamodel")?;
            let v = exact_ot(c.values(), &mu, &nu).tag("oracle")?;
            println!("{v}");
        }
        OracleCommand::TwRef { tree, mu, nu, check_ot } => {
            let t = GeneralTree::from_newick(&read_newick(&tree)?).tag("oracle")?;
            let mu = load_distribution(&mu, &t)?;
            let nu = load_distribution(&nu, &t)?;
            let v = tw_reference(&t, &mu, &nu).tag("oracle")?;
            println!("{v}");
            if check_ot {
                let ot = exact_ot(&t.distance_matrix(), &mu, &nu).tag("oracle")?;
                println!("{ot}");
                eprintln!(
                    "tree TW {v}, OT under path metric {ot}, difference {:.3e}",
                    (v - ot).abs()
                );
            }
        }
    }
    Ok(())
}

fn repro_docs(n: usize, repeats: usize, dir: &Path, cfg: &PipelineConfig) -> Result<()> {
    let report = synthetic_docs(n, repeats, cfg).tag("eval")?;
    std::fs::create_dir_all(dir).with_context(|| format!("io: creating {}", dir.display()))?;
    let header = Header::new("repro synthetic-docs")
        .with("config", describe(cfg))
        .with("n", n)
        .with("repeats", repeats);
    let verdict = if report.best_accuracy_mean >= DOCS_ACCURACY_THRESHOLD {
        "PASS"
    } else {
        "FAIL"
    };
    let mut summary = report.summary();
    summary.push_str(&format!("accuracy >= {DOCS_ACCURACY_THRESHOLD}: {verdict}\n"));
    write_atomic(&dir.join("synthetic_docs_knn.csv"), |out| {
        header.write_to(out)?;
        report.write_csv(out)
    })?;
    write_atomic(&dir.join("synthetic_docs.txt"), |out| {
        header.write_to(out)?;
        out.extend_from_slice(summary.as_bytes());
        Ok(())
    })?;
    print!("{summary}");
    Ok(())
}

fn repro_toy(sizes: &[usize], seeds: usize, output: &Path, cfg: &PipelineConfig) -> Result<()> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let row = toy_recovery(&[n], seeds, cfg).tag("eval")?.remove(0);
        eprintln!("n = {n}: mean discrepancy {:.4}", row.mean);
        rows.push(row);
    }
    let header = Header::new("repro toy-recovery")
        .with("config", describe(cfg))
        .with("seeds", seeds);
    write_atomic(output, |out| {
        use std::io::Write;
        header.write_to(out)?;
        write!(out, "n,mean")?;
        for s in 0..seeds {
            write!(out, ",seed_{}", cfg.seed.wrapping_add(s as u64))?;
        }
        writeln!(out)?;
        for r in &rows {
            write!(out, "{},{}", r.n, latent_twd::data::format_f64(r.mean))?;
            for v in &r.per_seed {
                write!(out, ",{}", latent_twd::data::format_f64(*v))?;
            }
            writeln!(out)?;
        }
        Ok(())
    })
}

fn bench(sizes: &[usize], pairs: usize, seed: u64, output: &Path) -> Result<()> {
    let rows = bench_twd(sizes, pairs, seed).tag("eval")?;
    let header = Header::new("bench")
        .with("pairs", pairs)
        .with("seed", seed)
        .with("note", "timings vary between runs");
    write_atomic(output, |out| {
        header.write_to(out)?;
        write_bench_csv(out, &rows)
    })?;
    if rows.len() >= 2 {
        let m: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
        let t: Vec<f64> = rows.iter().map(|r| r.median_ns_per_pair).collect();
        eprintln!("log-log slope of time vs m: {:.3}", log_log_slope(&m, &t));
    }
    Ok(())
}
