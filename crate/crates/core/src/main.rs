use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gnn_shs::connectivity::{greedy_top_k, label_top_k, labels_to_string, read_labels};
use gnn_shs::datasets::{load_edge_list, DatasetManifest, DatasetSpec};
use gnn_shs::error::{Result, ShsError};
use gnn_shs::experiment::{
    build_sequence, run_experiment, DynamicsConfig, DynamicsMode, ExperimentConfig,
};
use gnn_shs::features::build_features;
use gnn_shs::harness::{run_bench, Baseline, BenchOptions};
use gnn_shs::model::{train, Model, TrainConfig};

#[derive(Parser)]
#[command(
    name = "gnn-shs",
    version,
    about = "Top-k structural hole spanners in dynamic networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Pa,
    Er,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Deletions,
    Batch,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Greedy,
    OneShot,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic graph as an edge list.
    Generate {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        /// Edge probability (ER only).
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Dataset manifest path; defaults to `<out>.manifest.json`.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Label the top-k spanners of a graph.
    Label {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        /// Use greedy removal instead of one-shot scores.
        #[arg(long)]
        greedy: bool,
    },
    /// Dump node features as CSV.
    Features {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a labeled graph.
    Train {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Model JSON output.
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch CSV log; defaults to `<out>.log.csv`.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 5e-4)]
        weight_decay: f64,
        #[arg(long, default_value_t = 32)]
        hidden: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the model's top-k spanners for a graph.
    Predict {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Benchmark a model against oracle recomputation on snapshots.
    Bench {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Mode::Deletions)]
        mode: Mode,
        #[arg(long)]
        deletions: Option<usize>,
        #[arg(long)]
        insertions: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        #[arg(long, value_enum, default_value_t = BaselineArg::Greedy)]
        baseline: BaselineArg,
        /// Output directory for bench.json and bench.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// generate -> label -> train -> bench from one config file.
    RunExperiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        weight_decay: Option<f64>,
    },
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ShsError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| ShsError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate {
            kind,
            n,
            p,
            seed,
            out,
            manifest,
        } => {
            let spec = match kind {
                Kind::Pa => DatasetSpec::Pa { n, seed },
                Kind::Er => DatasetSpec::Er {
                    n,
                    p: p.ok_or_else(|| ShsError::InvalidConfig("--p is required for er".into()))?,
                    seed,
                },
            };
            let g = spec.build()?;
            write_text(&out, &g.to_edge_list())?;
            let m = DatasetManifest::describe(&spec, &g);
            let manifest = manifest.unwrap_or_else(|| with_suffix(&out, ".manifest.json"));
            write_text(&manifest, &serde_json::to_string_pretty(&m)?)?;
            println!(
                "{}: {} nodes, {} edges -> {}",
                m.name,
                m.nodes,
                m.edges,
                out.display()
            );
        }
        Command::Label {
            graph,
            k,
            out,
            greedy,
        } => {
            let g = load_edge_list(&graph)?;
            let result = if greedy {
                greedy_top_k(&g, k)?
            } else {
                label_top_k(&g, k)?
            };
            write_text(&out, &labels_to_string(&result.labels(g.node_count())))?;
            println!(
                "{} spanners, residual connectivity {} (ordered pairs)",
                result.spanners.len(),
                result.residual_connectivity
            );
        }
        Command::Features { graph, out } => {
            let g = load_edge_list(&graph)?;
            write_text(&out, &build_features(&g).to_csv())?;
        }
        Command::Train {
            graph,
            labels,
            out,
            log,
            epochs,
            lr,
            weight_decay,
            hidden,
            seed,
        } => {
            let g = load_edge_list(&graph)?;
            let labels = read_labels(&labels)?;
            if labels.len() != g.node_count() {
                return Err(ShsError::Parse {
                    path: PathBuf::new(),
                    line: 0,
                    msg: format!("{} labels for {} nodes", labels.len(), g.node_count()),
                });
            }
            let cfg = TrainConfig {
                epochs,
                learning_rate: lr,
                weight_decay,
                hidden,
                seed,
                ..Default::default()
            };
            let outcome = train(&g, &build_features(&g), &labels, &cfg)?;
            write_text(&out, &outcome.model.to_json()?)?;
            let log = log.unwrap_or_else(|| with_suffix(&out, ".log.csv"));
            write_text(&log, &outcome.log.to_csv())?;
            println!(
                "test accuracy {:.4}, spanner F1 {:.4} ({} test nodes)",
                outcome.test.accuracy,
                outcome.test.f1,
                outcome.split.test.len()
            );
        }
        Command::Predict { graph, model, k } => {
            let g = load_edge_list(&graph)?;
            let model = Model::load(&model)?;
            let r = model.predict(&g, k)?;
            let ids: Vec<String> = r.spanners.iter().map(|i| i.to_string()).collect();
            println!("{}", ids.join(" "));
        }
        Command::Bench {
            graph,
            model,
            k,
            mode,
            deletions,
            insertions,
            seed,
            repetitions,
            baseline,
            out,
        } => {
            let g = load_edge_list(&graph)?;
            let model = Model::load(&model)?;
            let dynamics = match mode {
                Mode::Deletions => DynamicsConfig {
                    mode: DynamicsMode::Deletions,
                    deletions: deletions.unwrap_or(50),
                    insertions: 0,
                },
                Mode::Batch => DynamicsConfig {
                    mode: DynamicsMode::Batch,
                    deletions: deletions.unwrap_or(5),
                    insertions: insertions.unwrap_or(5),
                },
            };
            let seq = build_sequence(&g, &dynamics, seed)?;
            let opts = BenchOptions {
                k,
                repetitions,
                baseline: match baseline {
                    BaselineArg::Greedy => Baseline::Greedy,
                    BaselineArg::OneShot => Baseline::OneShot,
                },
            };
            let name = DatasetSpec::File { path: graph }.name();
            let report = run_bench(&name, &seq, &model, &opts)?;
            write_text(&out.join("bench.json"), &report.to_json()?)?;
            write_text(&out.join("bench.csv"), &report.to_csv())?;
            print!("{}", report.summary_table());
        }
        Command::RunExperiment {
            config,
            seed,
            out,
            k,
            epochs,
            lr,
            weight_decay,
        } => {
            let mut overrides = BTreeMap::new();
            let mut put = |key: &str, v: Option<String>| {
                if let Some(v) = v {
                    overrides.insert(key.to_string(), v);
                }
            };
            put("seed", seed.map(|v| v.to_string()));
            put("out", out.map(|v| v.display().to_string()));
            put("k", k.map(|v| v.to_string()));
            put("epochs", epochs.map(|v| v.to_string()));
            put("lr", lr.map(|v| v.to_string()));
            put("weight_decay", weight_decay.map(|v| v.to_string()));
            let cfg = ExperimentConfig::load_with(&config, &overrides)?;
            let outputs = run_experiment(&cfg)?;
            println!(
                "test accuracy {:.4}, spanner F1 {:.4}; artifacts in {}",
                outputs.manifest.test_accuracy,
                outputs.manifest.test_f1,
                cfg.out.display()
            );
            print!("{}", outputs.report.summary_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SHS_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
