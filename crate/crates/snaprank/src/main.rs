use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use snaprank::bench::{self, BenchError, Provenance};
use snaprank::config::{AppConfig, ConfigError};
use snaprank::eval::{self, EvalError, EvalOptions, RankingMode};
use snaprank::graph::{Graph, GraphError, Snapshot};
use snaprank::io::{self, IoError};
use snaprank::model::{self, PersistError};
use snaprank::tensor::gradcheck;
use snaprank::trainer::{self, RunLogger, TrainError};

#[derive(Parser)]
#[command(
    name = "snaprank",
    version,
    about = "Adversarially trained ranking of anomalous graph snapshots"
)]
struct Cli {
    /// RNG seed (overrides the config file)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

/// Input files shared by every corpus-reading subcommand.
#[derive(Args)]
struct CorpusArgs {
    /// Tab-separated edge list (src, dst, weight, optional timestamp)
    #[arg(long)]
    edges: PathBuf,
    /// Comma-separated attribute matrix, one row per vertex
    #[arg(long)]
    attrs: PathBuf,
    /// Attribute file has a header row
    #[arg(long)]
    header: bool,
    /// Treat edges as undirected
    #[arg(long)]
    undirected: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate raw inputs and write a normalized corpus directory
    Ingest {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Optional snapshot manifest to validate against the graph
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Plant anomalies into a graph and emit a labeled benchmark corpus
    Forge {
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Train on a labeled snapshot manifest; writes checkpoints and metrics
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Rank a snapshot pool with saved model checkpoints
    Rank {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding generator/discriminator checkpoints
        #[arg(long)]
        model: PathBuf,
        /// Rank by discriminator probability instead of generator scores
        #[arg(long)]
        disc_only: bool,
    },
    /// Cross-validated evaluation on a labeled manifest
    Eval {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Ranking cutoffs, comma separated
        #[arg(long, value_delimiter = ',', default_value = "10,20,50")]
        ks: Vec<usize>,
        #[arg(long)]
        disc_only: bool,
    },
    /// Verify every differentiable operation against finite differences
    GradCheck {
        /// Random instances per operation
        #[arg(long, default_value_t = 100)]
        seeds: u64,
    },
}

/// Failures bucketed by exit code: 1 usage, 2 data validation, 3 numeric.
enum AppError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Data(_) => 2,
            AppError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Data(m) | AppError::Numeric(m) => m,
        }
    }
}

impl From<IoError> for AppError {
    fn from(e: IoError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<GraphError> for AppError {
    fn from(e: GraphError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<BenchError> for AppError {
    fn from(e: BenchError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<PersistError> for AppError {
    fn from(e: PersistError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<model::ModelError> for AppError {
    fn from(e: model::ModelError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<TrainError> for AppError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NumericFailure(_) | TrainError::DegenerateDistribution => {
                AppError::Numeric(e.to_string())
            }
            other => AppError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for AppError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Train(t) => t.into(),
            other => AppError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Data(format!("io error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load_config(cli_config: Option<&Path>, seed: Option<u64>) -> Result<AppConfig, AppError> {
    let mut cfg = match cli_config {
        Some(path) => AppConfig::load(path)?,
        None => AppConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.train.seed = seed;
        cfg.injection.seed = seed;
    }
    Ok(cfg)
}

fn load_graph(args: &CorpusArgs) -> Result<Graph, AppError> {
    let edges = io::read_edge_list(&args.edges)?;
    let attrs = io::read_attributes(&args.attrs, args.header)?;
    Ok(Graph::build(&edges, &attrs, !args.undirected)?)
}

fn attr_rows(graph: &Graph) -> Vec<Vec<f64>> {
    graph
        .attrs_flat()
        .chunks(graph.attr_dim().max(1))
        .map(|r| r.to_vec())
        .collect()
}

fn run(cli: Cli) -> Result<(), AppError> {
    let cfg = load_config(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Ingest { corpus, manifest } => {
            let graph = load_graph(&corpus)?;
            let snapshots = match &manifest {
                Some(path) => io::read_manifest(path, &graph)?,
                None => Vec::new(),
            };
            std::fs::create_dir_all(&cli.out)?;
            io::write_edge_list(&cli.out.join("edges.tsv"), graph.edges())?;
            io::write_attributes(&cli.out.join("attrs.csv"), &attr_rows(&graph))?;
            if manifest.is_some() {
                io::write_manifest(&cli.out.join("manifest.jsonl"), &snapshots)?;
            }
            println!(
                "ingested {} vertices, {} edges, {} snapshots -> {}",
                graph.vertex_count(),
                graph.edges().len(),
                snapshots.len(),
                cli.out.display()
            );
            Ok(())
        }
        Command::Forge { corpus } => {
            let graph = load_graph(&corpus)?;
            let labeled = bench::build_injected_corpus(&graph, &cfg.injection)?;
            std::fs::create_dir_all(&cli.out)?;
            io::write_edge_list(&cli.out.join("edges.tsv"), labeled.graph.edges())?;
            io::write_attributes(&cli.out.join("attrs.csv"), &attr_rows(&labeled.graph))?;
            io::write_manifest(&cli.out.join("manifest.jsonl"), &labeled.snapshots)?;
            let origins: HashMap<String, String> = labeled
                .provenance
                .iter()
                .map(|p| {
                    let origin = match p {
                        Provenance::CliqueInjection { .. } => "clique-injection",
                        Provenance::AttributeInjection { .. } => "attribute-injection",
                        Provenance::EdgeCountRule { .. } => "edge-count-rule",
                    };
                    (p.snapshot_id().to_string(), origin.to_string())
                })
                .collect();
            io::write_provenance(&cli.out.join("provenance.jsonl"), &origins)?;
            let positives = labeled
                .snapshots
                .iter()
                .filter(|s| s.label == Some(true))
                .count();
            println!(
                "forged {} snapshots ({} anomalous) -> {}",
                labeled.snapshots.len(),
                positives,
                cli.out.display()
            );
            Ok(())
        }
        Command::Train { corpus, manifest } => {
            let graph = load_graph(&corpus)?;
            let pool = io::read_manifest(&manifest, &graph)?;
            let mut logger = RunLogger::create(&cli.out)?;
            let state =
                trainer::train(&pool, &graph, &cfg.train, &cfg.architecture, Some(&mut logger))?;
            logger.save_final(&state)?;
            println!(
                "trained {} generator / {} discriminator epochs -> {}",
                state.generator_epochs_done,
                state.discriminator_epochs_done,
                cli.out.display()
            );
            Ok(())
        }
        Command::Rank { corpus, manifest, model: model_dir, disc_only } => {
            let graph = load_graph(&corpus)?;
            let pool = io::read_manifest(&manifest, &graph)?;
            let refs: Vec<&Snapshot> = pool.iter().collect();
            let ranking = if disc_only {
                let disc = model::load_model(&model_dir.join("discriminator"))?;
                let mut scored = Vec::with_capacity(refs.len());
                for s in &refs {
                    let p = model::discriminator_probability(&disc, s, graph.is_directed())?;
                    scored.push((s.id.clone(), p));
                }
                eval::rank_by_score(scored)
            } else {
                let generator = model::load_model(&model_dir.join("generator"))?;
                let probs = model::generator_distribution(&generator, &pool, &graph)?;
                eval::rank_by_score(
                    refs.iter()
                        .zip(probs)
                        .map(|(s, p)| (s.id.clone(), p))
                        .collect(),
                )
            };
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("ranking.csv");
            let mut out = String::from("rank,id,score\n");
            for (i, (id, score)) in ranking.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", i + 1, id, score));
            }
            std::fs::write(&path, out)?;
            println!("ranked {} snapshots -> {}", ranking.len(), path.display());
            Ok(())
        }
        Command::Eval { corpus, manifest, folds, ks, disc_only } => {
            if folds == 0 {
                return Err(AppError::Usage("--folds must be at least 1".into()));
            }
            if ks.is_empty() || ks.contains(&0) {
                return Err(AppError::Usage("--ks must list positive cutoffs".into()));
            }
            let graph = load_graph(&corpus)?;
            let pool = io::read_manifest(&manifest, &graph)?;
            let labeled = bench::LabeledCorpus {
                graph,
                snapshots: pool,
                provenance: Vec::new(),
            };
            let opts = EvalOptions {
                ks,
                folds,
                seed: cfg.train.seed,
                mode: if disc_only {
                    RankingMode::DiscriminatorOnly
                } else {
                    RankingMode::Generator
                },
            };
            let report = eval::evaluate(&labeled, &cfg.train, &cfg.architecture, &opts)?;
            eval::write_report(&report, &cli.out)?;
            for s in &report.summary {
                println!(
                    "K={:<4} precision {:.4} ± {:.4}  recall {:.4} ± {:.4}",
                    s.k, s.precision_mean, s.precision_std, s.recall_mean, s.recall_std
                );
            }
            if !report.skipped_folds.is_empty() {
                println!("skipped folds (no positives): {:?}", report.skipped_folds);
            }
            println!("report -> {}", cli.out.display());
            Ok(())
        }
        Command::GradCheck { seeds } => {
            let results = gradcheck::run_suite(seeds);
            let mut worst_by_op: HashMap<&str, f64> = HashMap::new();
            for r in &results {
                let e = worst_by_op.entry(r.op).or_insert(0.0);
                *e = e.max(r.max_rel_error);
            }
            let mut ops: Vec<(&str, f64)> = worst_by_op.into_iter().collect();
            ops.sort_by(|a, b| a.0.cmp(b.0));
            let mut failed = false;
            for (op, err) in ops {
                let ok = err <= gradcheck::REL_TOL;
                failed |= !ok;
                println!(
                    "{:<14} max rel error {:>12.3e}  {}",
                    op,
                    err,
                    if ok { "ok" } else { "FAIL" }
                );
            }
            if failed {
                Err(AppError::Numeric(format!(
                    "gradient check exceeded tolerance {:e}",
                    gradcheck::REL_TOL
                )))
            } else {
                println!("all gradients within {:e} over {seeds} seeds", gradcheck::REL_TOL);
                Ok(())
            }
        }
    }
}
