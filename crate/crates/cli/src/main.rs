//! `had`: train, score and cross-validate hyperedge anomaly detectors.

mod config;

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use had_core::data::mushroom::convert_uci_mushroom;
use had_core::eval::export_score_scatter;
use had_core::hypergraph::io::read_edge_list_with_lines;
use had_core::{
    evaluate_cv_with, normalize_scores, train_from, CentroidMode, EvalOptions, HadError, Pooling,
    TrainedModel,
};
use serde::Serialize;

use config::RunConfig;

/// Epoch budget of the fixed-centroid variant when the config sets none.
const FIXED_VARIANT_EPOCHS: usize = 1000;

#[derive(Parser)]
#[command(name = "had", version, about = "Hyperedge anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on every inlier hyperedge of the dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score candidate hyperedges with a trained model.
    Score {
        #[arg(long)]
        model: PathBuf,
        /// Candidate edge list, one hyperedge per line.
        #[arg(long)]
        edges: PathBuf,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// k-fold cross-validation.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        variant: Option<Variant>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the configured synthetic dataset as files with a manifest.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert the UCI `agaricus-lepiota.data` file into a dataset directory.
    ConvertMushroom {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Variant {
    /// Max-min pooling, dynamic centroid.
    Had,
    /// Mean pooling, dynamic centroid.
    HadMean,
    /// Max-min pooling, centroid frozen at initialization.
    HadFixed,
}

impl Variant {
    fn name(self) -> &'static str {
        match self {
            Variant::Had => "had",
            Variant::HadMean => "had-mean",
            Variant::HadFixed => "had-fixed",
        }
    }

    fn apply(self, cfg: &mut RunConfig) {
        match self {
            Variant::Had => {
                cfg.model.pooling = Pooling::MaxMin;
                cfg.model.centroid = CentroidMode::Dynamic;
            }
            Variant::HadMean => {
                cfg.model.pooling = Pooling::Mean;
                cfg.model.centroid = CentroidMode::Dynamic;
            }
            Variant::HadFixed => {
                cfg.model.pooling = Pooling::MaxMin;
                cfg.model.centroid = CentroidMode::Fixed;
                cfg.train.fixed_epochs.get_or_insert(FIXED_VARIANT_EPOCHS);
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, seed, out } => cmd_train(&config, seed, out.as_deref()),
        Command::Score { model, edges, out } => cmd_score(&model, &edges, out.as_deref()),
        Command::Eval {
            config,
            variant,
            seed,
            jobs,
            out,
        } => cmd_eval(&config, variant, seed, jobs, out.as_deref()),
        Command::Synth { config, out } => cmd_synth(&config, out.as_deref()),
        Command::ConvertMushroom { input, out } => cmd_convert_mushroom(&input, &out),
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::read(path)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

/// The config as executed, with CLI overrides folded in.
fn persist_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let resolved = RunConfig {
        output_dir: None,
        ..cfg.clone()
    };
    write_text(&dir.join("run_config.toml"), &resolved.to_toml()?)
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    dataset: &'a str,
    num_training_edges: usize,
    epochs: usize,
    termination: had_core::Termination,
    final_loss: f64,
    seed: u64,
}

#[derive(Serialize)]
struct Timing<'a> {
    command: &'a str,
    wall_clock_seconds: f64,
}

fn cmd_train(config_path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let started = Instant::now();
    let cfg = load_config(config_path, seed)?;
    let ds = cfg.load_dataset()?;
    let dir = cfg.output_dir(out, config_path, "train");
    prepare_dir(&dir)?;

    let h = ds.hypergraph.restrict_edges(&ds.inliers())?;
    let mut params = cfg.model.init_parameters(h.feature_dim(), cfg.train.seed)?;
    let (model, record) = train_from(&h, &cfg.model, &cfg.train, &mut params)?;

    model.write_checkpoint(create(&dir.join("model.bin"))?)?;
    params.write_checkpoint(create(&dir.join("params.bin"))?)?;
    record.write_loss_csv(create(&dir.join("losses.csv"))?)?;
    write_json(
        &dir.join("summary.json"),
        &TrainSummary {
            dataset: &ds.name,
            num_training_edges: h.num_edges(),
            epochs: record.epochs,
            termination: record.termination,
            final_loss: record.final_loss(),
            seed: cfg.train.seed,
        },
    )?;
    persist_config(&cfg, &dir)?;
    write_json(
        &dir.join("timing.json"),
        &Timing {
            command: "train",
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    println!(
        "trained {} epochs ({:?}), final loss {:.6e} -> {}",
        record.epochs,
        record.termination,
        record.final_loss(),
        dir.display()
    );
    Ok(())
}

fn cmd_score(model_path: &Path, edges_path: &Path, out: Option<&Path>) -> Result<()> {
    let file = fs::File::open(model_path)
        .with_context(|| format!("opening model {}", model_path.display()))?;
    let model = TrainedModel::read_checkpoint(BufReader::new(file))
        .with_context(|| format!("reading model {}", model_path.display()))?;
    let source = edges_path.display().to_string();
    let file = fs::File::open(edges_path).with_context(|| format!("opening {source}"))?;
    let candidates = read_edge_list_with_lines(BufReader::new(file), &source)?;

    let mut raw = Vec::with_capacity(candidates.len());
    for (line, edge) in &candidates {
        let score = model.score(edge).map_err(|e| match e {
            HadError::NodeIndexOutOfRange {
                node, num_nodes, ..
            } => anyhow::anyhow!(
                "{source}:{line}: node {node} out of range (model has {num_nodes} nodes)"
            ),
            other => anyhow::anyhow!("{source}:{line}: {other}"),
        })?;
        raw.push(score);
    }
    let normalized = normalize_scores(&raw);

    let mut text = String::from("edge_id,score,normalized\n");
    for (i, (r, n)) in raw.iter().zip(&normalized).enumerate() {
        text.push_str(&format!("{i},{r},{n}\n"));
    }
    match out {
        Some(path) => write_text(path, &text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_eval(
    config_path: &Path,
    variant: Option<Variant>,
    seed: Option<u64>,
    jobs: usize,
    out: Option<&Path>,
) -> Result<()> {
    if jobs == 0 {
        bail!("--jobs must be >= 1");
    }
    let started = Instant::now();
    let mut cfg = load_config(config_path, seed)?;
    if let Some(v) = variant {
        v.apply(&mut cfg);
    }
    let ds = cfg.load_dataset()?;
    let leaf = variant.map_or_else(|| "eval".to_string(), |v| format!("eval-{}", v.name()));
    let dir = cfg.output_dir(out, config_path, &leaf);
    prepare_dir(&dir)?;

    let opts = EvalOptions {
        split: cfg.split,
        seed: cfg.train.seed,
        jobs,
    };
    let report = evaluate_cv_with(&ds, &cfg.model, &cfg.train, &opts)?;
    write_text(&dir.join("report.json"), &report.to_json()?)?;
    for details in &report.fold_details {
        let k = details.split.fold_id;
        export_score_scatter(&details.scored, &dir.join(format!("scatter_fold_{k}.csv")))?;
        details
            .record
            .write_loss_csv(create(&dir.join(format!("losses_fold_{k}.csv")))?)?;
    }
    persist_config(&cfg, &dir)?;
    write_json(
        &dir.join("timing.json"),
        &Timing {
            command: "eval",
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    )?;

    for f in &report.folds {
        println!(
            "fold {}: AUROC {:.2}% ({} epochs, {:?})",
            f.fold_id, f.auroc_percent, f.epochs, f.termination
        );
    }
    println!(
        "mean AUROC {:.2}% -> {}",
        report.mean_auroc_percent,
        dir.display()
    );
    Ok(())
}

fn cmd_synth(config_path: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::read(config_path)?;
    if cfg.dataset.synthetic.is_none() {
        bail!(
            "{}: `synth` needs a [dataset.synthetic] table",
            config_path.display()
        );
    }
    let ds = cfg.load_dataset()?;
    let dir = cfg.output_dir(out, config_path, "synth");
    let manifest = ds.export(&dir)?;
    println!("{}", manifest.display());
    Ok(())
}

fn cmd_convert_mushroom(input: &Path, out: &Path) -> Result<()> {
    let file = fs::File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let ds = convert_uci_mushroom(BufReader::new(file), &input.display().to_string())?;
    let manifest = ds.export(out)?;
    println!(
        "{} nodes, {} hyperedges ({} anomalies) -> {}",
        ds.hypergraph.num_nodes(),
        ds.hypergraph.num_edges(),
        ds.anomalies().len(),
        manifest.display()
    );
    Ok(())
}
