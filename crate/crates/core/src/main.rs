use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use voices::cluster::{cluster, load_labels, save_assignment, Algorithm};
use voices::config::{Config, FileFormat};
use voices::corpus::{join_dataset, load_embeddings, load_item_texts, Dataset, EmbeddingFormat, JoinOptions};
use voices::dimred::{reduce, ReducedMatrix, ReductionMethod};
use voices::report::{build_report, render_svg, render_text};
use voices::sweep::{run_sweep, select_best, SweepLog, TrialResult};
use voices::synthpop::{generate, paper_like_config, read_ground_truth, write_synth, FixtureProfile};
use voices::validate::{render_table, validate, MetricSpace, ValidationReport};
use voices::{Error, ErrorKind, Result};

/// Discover annotator voices: reduce behavioural embeddings, cluster them and
/// validate the clusters against annotator metadata.
#[derive(Parser)]
#[command(name = "voices", version)]
struct Cli {
    /// TOML configuration file (see docs/config.md).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set cluster.k=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic population with planted voices.
    Synth {
        /// Built-in fixture profile (mbic or gwsd).
        #[arg(long)]
        profile: Option<FixtureProfile>,
        #[arg(long)]
        seed: Option<u64>,
        /// Embedding file format: csv or bin.
        #[arg(long, value_parser = parse_format)]
        format: Option<FileFormat>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce an embedding file with the [reduce] settings.
    Reduce {
        #[command(flatten)]
        data: DataArgs,
        /// none, pca or umap.
        #[arg(long, value_parser = parse_method)]
        method: Option<ReductionMethod>,
        #[arg(long)]
        n_components: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output embedding file (.bin selects the binary format).
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster a (reduced) embedding file with the [cluster] settings.
    Cluster {
        /// Matrix to cluster, as written by `reduce`.
        #[arg(long)]
        input: PathBuf,
        /// kmeans, gmm or hdbscan.
        #[arg(long, value_parser = parse_algorithm)]
        algorithm: Option<Algorithm>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output assignment CSV; a `.json` sidecar holds the model detail.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an assignment: silhouette, Davies-Bouldin, purity, voice types.
    Validate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        clustered: ClusteredArgs,
        /// Write the JSON report here; the table always goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search reduction and clustering settings for the best silhouette.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        max_trials: Option<usize>,
        #[arg(long)]
        max_seconds: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from an existing sweep.jsonl in the output directory.
        #[arg(long)]
        resume: bool,
        /// Output directory for the log and the winning files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics table, per-cluster cards and representative rows.
    Report {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        clustered: ClusteredArgs,
        /// Representative rows per cluster.
        #[arg(long)]
        examples: Option<usize>,
        /// Also write scatter.svg of the first two reduced dimensions.
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Input files; each overrides the matching [data] key.
#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// `item_id,text` CSV shown in reports.
    #[arg(long)]
    item_texts: Option<PathBuf>,
    /// Planted labels; adds the adjusted Rand index to reports.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
}

#[derive(Args)]
struct ClusteredArgs {
    /// The matrix that was clustered (output of `reduce`).
    #[arg(long)]
    reduced: PathBuf,
    /// Assignment CSV (output of `cluster`).
    #[arg(long)]
    assignment: PathBuf,
}

fn parse_format(s: &str) -> std::result::Result<FileFormat, String> {
    match s {
        "csv" => Ok(FileFormat::Csv),
        "bin" => Ok(FileFormat::Bin),
        _ => Err(format!("unknown format '{s}' (expected csv or bin)")),
    }
}

fn parse_method(s: &str) -> std::result::Result<ReductionMethod, String> {
    match s {
        "none" => Ok(ReductionMethod::None),
        "pca" => Ok(ReductionMethod::Pca),
        "umap" => Ok(ReductionMethod::Umap),
        _ => Err(format!("unknown method '{s}' (expected none, pca or umap)")),
    }
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    match s {
        "kmeans" => Ok(Algorithm::Kmeans),
        "gmm" => Ok(Algorithm::Gmm),
        "hdbscan" => Ok(Algorithm::Hdbscan),
        _ => Err(format!("unknown algorithm '{s}' (expected kmeans, gmm or hdbscan)")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Degenerate => 3,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = Config::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Synth {
            profile,
            seed,
            format,
            out,
        } => {
            if let Some(p) = profile {
                cfg.synth.profile = p;
            }
            if let Some(s) = seed {
                cfg.synth.seed = s;
            }
            if let Some(f) = format {
                cfg.synth.format = f;
            }
            let synth = match &cfg.synth.custom {
                Some(c) => voices::synthpop::SynthConfig {
                    seed: cfg.synth.seed,
                    ..c.clone()
                },
                None => paper_like_config(cfg.synth.profile, cfg.synth.seed),
            };
            let generated = generate(&synth)?;
            create_dir(&out)?;
            let files = write_synth(&generated, &out, cfg.synth.format.into())?;
            write_text(&out.join("config.toml"), &cfg.to_toml())?;
            println!("embeddings   {}", files.embeddings.display());
            println!("annotations  {}", files.annotations.display());
            println!("metadata     {}", files.metadata.display());
            println!("ground truth {}", files.ground_truth.display());
            Ok(())
        }
        Command::Reduce {
            data,
            method,
            n_components,
            seed,
            out,
        } => {
            data.apply(&mut cfg);
            if let Some(m) = method {
                cfg.reduce.method = m;
            }
            if let Some(n) = n_components {
                cfg.reduce.n_components = n;
            }
            if let Some(s) = seed {
                cfg.reduce.seed = s;
            }
            let path = require(&cfg.data.embeddings, "data.embeddings")?;
            let emb = load_embeddings(path, EmbeddingFormat::from_path(path))?;
            let reduced = reduce(&emb, &cfg.reduce)?;
            reduced.save(&out, EmbeddingFormat::from_path(&out))?;
            println!(
                "reduced {} rows from {} to {} dimensions -> {}",
                emb.rows(),
                emb.dim(),
                reduced.values.cols(),
                out.display()
            );
            Ok(())
        }
        Command::Cluster {
            input,
            algorithm,
            k,
            seed,
            out,
        } => {
            if let Some(a) = algorithm {
                cfg.cluster.algorithm = a;
            }
            if let Some(k) = k {
                cfg.cluster.k = k;
            }
            if let Some(s) = seed {
                cfg.cluster.seed = s;
            }
            let reduced = ReducedMatrix::load(&input)?;
            let assignment = cluster(&reduced.values, &cfg.cluster)?;
            save_assignment(&assignment, &reduced.row_index, &cfg.cluster, &out)?;
            println!(
                "{} clusters, {} noise rows -> {}",
                assignment.n_clusters,
                assignment.noise_count(),
                out.display()
            );
            match assignment.degenerate {
                Some(reason) => Err(Error::Degenerate(format!("degenerate clustering: {reason}"))),
                None => Ok(()),
            }
        }
        Command::Validate {
            data,
            clustered,
            out,
        } => {
            data.apply(&mut cfg);
            let (ds, truth) = load_dataset(&cfg)?;
            let (reduced, labels) = load_clustered(&clustered, &ds)?;
            let report = run_validate(&cfg, &ds, &reduced, &labels, truth.as_deref())?;
            print!("{}", render_table(&[("result", &report)]));
            if let Some(out) = out {
                let body = serde_json::json!({ "config": cfg.to_toml(), "validation": report });
                write_json(&out, &body)?;
            }
            Ok(())
        }
        Command::Sweep {
            data,
            max_trials,
            max_seconds,
            seed,
            resume,
            out,
        } => {
            data.apply(&mut cfg);
            if max_trials.is_some() {
                cfg.sweep.max_trials = max_trials;
            }
            if max_seconds.is_some() {
                cfg.sweep.max_seconds = max_seconds;
            }
            if let Some(s) = seed {
                cfg.sweep.seed = s;
            }
            let (ds, truth) = load_dataset(&cfg)?;
            create_dir(&out)?;
            let log_path = out.join("sweep.jsonl");
            let trials = run_sweep(
                &ds,
                &cfg.sweep,
                SweepLog {
                    path: Some(&log_path),
                    resume,
                },
                truth.as_deref(),
            )?;
            write_text(&out.join("config.toml"), &cfg.to_toml())?;
            write_text(&out.join("summary.txt"), &summary(&trials))?;
            let best = select_best(&trials)?;
            let reduced = reduce(ds.embeddings(), &best.config.reduction)?;
            let assignment = cluster(&reduced.values, &best.config.cluster)?;
            reduced.save(&out.join("best_reduced.csv"), EmbeddingFormat::Csv)?;
            save_assignment(
                &assignment,
                &reduced.row_index,
                &best.config.cluster,
                &out.join("best_assignment.csv"),
            )?;
            print!("{}", summary(&trials));
            println!(
                "best: trial {} ({}), {} clusters -> {}",
                best.trial,
                describe(best),
                best.n_clusters,
                out.display()
            );
            Ok(())
        }
        Command::Report {
            data,
            clustered,
            examples,
            svg,
            out,
        } => {
            data.apply(&mut cfg);
            if let Some(n) = examples {
                cfg.report.examples = n;
            }
            cfg.report.svg |= svg;
            let (ds, truth) = load_dataset(&cfg)?;
            let (reduced, labels) = load_clustered(&clustered, &ds)?;
            let validation = run_validate(&cfg, &ds, &reduced, &labels, truth.as_deref())?;
            let report = build_report(
                &ds,
                &reduced.values,
                &labels,
                validation,
                &cfg.report,
                cfg.to_toml(),
            )?;
            create_dir(&out)?;
            write_json(&out.join("report.json"), &report)?;
            let text = render_text(&report, &cfg.report);
            write_text(&out.join("report.txt"), &text)?;
            if cfg.report.svg {
                write_text(&out.join("scatter.svg"), &render_svg(&reduced.values, &labels)?)?;
            }
            print!("{text}");
            Ok(())
        }
    }
}

impl DataArgs {
    fn apply(self, cfg: &mut Config) {
        let d = &mut cfg.data;
        for (slot, v) in [
            (&mut d.embeddings, self.embeddings),
            (&mut d.annotations, self.annotations),
            (&mut d.metadata, self.metadata),
            (&mut d.item_texts, self.item_texts),
            (&mut d.ground_truth, self.ground_truth),
        ] {
            if v.is_some() {
                *slot = v;
            }
        }
    }
}

fn require<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::InvalidConfig(format!("{key} is required (flag or config)")))
}

fn load_dataset(cfg: &Config) -> Result<(Dataset, Option<Vec<i32>>)> {
    let d = &cfg.data;
    let emb_path = require(&d.embeddings, "data.embeddings")?;
    let emb = load_embeddings(emb_path, EmbeddingFormat::from_path(emb_path))?;
    let opts = JoinOptions {
        strict: d.strict,
        label_set: d.label_set.clone(),
    };
    let mut ds = join_dataset(
        emb,
        require(&d.annotations, "data.annotations")?,
        require(&d.metadata, "data.metadata")?,
        &opts,
    )?;
    if let Some(p) = &d.item_texts {
        ds = ds.with_item_texts(load_item_texts(p)?);
    }
    let truth = match &d.ground_truth {
        Some(p) => Some(read_ground_truth(p, ds.embeddings().row_index())?),
        None => None,
    };
    Ok((ds, truth))
}

fn load_clustered(args: &ClusteredArgs, ds: &Dataset) -> Result<(ReducedMatrix, Vec<i32>)> {
    let reduced = ReducedMatrix::load(&args.reduced)?;
    if reduced.row_index != ds.embeddings().row_index() {
        return Err(Error::Format {
            context: args.reduced.display().to_string(),
            message: "rows do not match the dataset's embedding rows".into(),
        });
    }
    let labels = load_labels(&args.assignment, &reduced.row_index)?;
    let assignment = voices::cluster::assignment_from_labels(&reduced.values, &labels)?;
    Ok((reduced, assignment.labels))
}

fn run_validate(
    cfg: &Config,
    ds: &Dataset,
    reduced: &ReducedMatrix,
    labels: &[i32],
    truth: Option<&[i32]>,
) -> Result<ValidationReport> {
    let space = match cfg.validate.metric_space {
        MetricSpace::Reduced => &reduced.values,
        MetricSpace::Original => ds.embeddings().values(),
    };
    validate(space, labels, ds, &cfg.validate, truth)
}

fn describe(t: &TrialResult) -> String {
    let r = &t.config.reduction;
    let c = &t.config.cluster;
    let red = match r.method {
        ReductionMethod::None => "none".to_string(),
        ReductionMethod::Pca => format!("pca n={}", r.n_components),
        ReductionMethod::Umap => format!(
            "umap n={} nn={} md={:.3}",
            r.n_components, r.umap_neighbors, r.umap_min_dist
        ),
    };
    let clu = match c.algorithm {
        Algorithm::Kmeans => format!("kmeans k={}", c.k),
        Algorithm::Gmm => format!("gmm k={}", c.k),
        Algorithm::Hdbscan => format!(
            "hdbscan mcs={} ms={} eps={:.3}",
            c.hdbscan_min_cluster_size, c.hdbscan_min_samples, c.hdbscan_eps
        ),
    };
    format!("{red}; {clu}")
}

fn summary(trials: &[TrialResult]) -> String {
    let scored: Vec<(String, &ValidationReport)> = trials
        .iter()
        .filter(|t| !t.degenerate)
        .take(10)
        .filter_map(|t| Some((format!("#{} {}", t.trial, describe(t)), t.report.as_ref()?)))
        .collect();
    let rows: Vec<(&str, &ValidationReport)> = scored.iter().map(|(n, r)| (n.as_str(), *r)).collect();
    let degenerate = trials.iter().filter(|t| t.degenerate).count();
    format!(
        "{}{} trials, {} degenerate\n",
        render_table(&rows),
        trials.len(),
        degenerate
    )
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn write_text(p: &Path, text: &str) -> Result<()> {
    fs::write(p, text).map_err(|e| Error::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn write_json<T: serde::Serialize>(p: &Path, v: &T) -> Result<()> {
    let f = File::create(p).map_err(|e| Error::Io {
        path: p.to_path_buf(),
        source: e,
    })?;
    serde_json::to_writer_pretty(BufWriter::new(f), v)?;
    Ok(())
}
