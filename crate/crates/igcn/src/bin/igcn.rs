use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use igcn::config::ExperimentConfig;
use igcn::dataset::{write_graphs, DatasetManifest, RawDataset};
use igcn::experiment::{self, test_metrics};
use igcn::formats;
use igcn::gradcheck;
use igcn::igcn_core::model::forward_eval;
use igcn::{model_file, synth, SyntheticSpec};

#[derive(Parser)]
#[command(name = "igcn", version, about = "Integrative GCN experiments on multi-modal graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON input: experiment config, or the spec/manifest named by the command.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the number of runs in the config.
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build (or load) each modality's graph from a dataset manifest and
    /// write edge lists plus threshold reports.
    BuildGraphs(Common),
    /// Generate a synthetic dataset from a spec file.
    Synth(Common),
    /// Train one model on split `seed` and save it with its history.
    Train(Common),
    /// Test a saved model (`--model`), or run the multi-split protocol.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Compare full, no-attention and mlp-head variants on the same splits.
    Ablate(Common),
    /// Rebuild similarity networks for each k in the config and rerun.
    SweepK(Common),
    /// Write per-node attention coefficients of a saved model.
    ExportAttention {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated node ids; default is the correctly predicted test nodes.
        #[arg(long, value_delimiter = ',')]
        nodes: Option<Vec<usize>>,
    },
    /// Finite-difference check of the analytic gradients on random instances.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        instances: usize,
    },
}

fn config_path(common: &Common) -> anyhow::Result<&Path> {
    common
        .config
        .as_deref()
        .context("--config <path> is required for this command")
}

fn experiment_config(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(config_path(common)?)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(runs) = common.runs {
        config.runs = runs;
    }
    config.validate()?;
    Ok(config)
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth(common) => {
            let mut spec = SyntheticSpec::load(config_path(&common)?)?;
            if let Some(seed) = common.seed {
                spec.seed = seed;
            }
            let manifest = synth::write_synthetic(&spec, &common.out_dir)?;
            println!("wrote {}", manifest.display());
        }
        Command::BuildGraphs(common) => {
            let manifest = DatasetManifest::load(config_path(&common)?)?;
            let raw = RawDataset::read(&manifest)?;
            let graphs = raw.graphs(None)?;
            write_graphs(&raw.names, &graphs, &common.out_dir)?;
            for (name, g) in raw.names.iter().zip(&graphs) {
                match g.report {
                    Some(r) => println!(
                        "{name}: epsilon {} avg degree {} ({} edges)",
                        r.epsilon,
                        r.achieved_avg_degree,
                        g.edge_count()
                    ),
                    None => println!("{name}: loaded edge list ({} edges)", g.edge_count()),
                }
            }
        }
        Command::Train(common) => {
            let config = experiment_config(&common)?;
            let raw = RawDataset::read(&config.load_manifest()?)?;
            let graphs = raw.graphs(None)?;
            let tc = config.train_config(0);
            let dataset = raw.assemble(&graphs, raw.split(tc.seed)?)?;
            let outcome = experiment::run_once(&dataset, &tc, 0)?;
            let out = &common.out_dir;
            model_file::save(&out.join("model.bin"), &outcome.params)?;
            experiment::write_history(&outcome.history, &out.join("history.csv"))?;
            experiment::write_metrics(&outcome.test, &out.join("metrics.csv"))?;
            formats::write_split(&out.join("split.csv"), dataset.masks())?;
            println!(
                "best epoch {} of {}; test accuracy {} macro F1 {}",
                outcome.history.best_epoch,
                outcome.history.stopped_at_epoch,
                fmt(outcome.test.accuracy),
                fmt(outcome.test.macro_f1)
            );
        }
        Command::Evaluate { common, model } => {
            let config = experiment_config(&common)?;
            match model {
                Some(path) => {
                    let params = model_file::load(&path)?;
                    let raw = RawDataset::read(&config.load_manifest()?)?;
                    let graphs = raw.graphs(None)?;
                    let dataset = raw.assemble(&graphs, raw.split(config.run_seed(0))?)?;
                    params.check_against(&dataset)?;
                    let preds = forward_eval(&dataset, &params)?.predictions();
                    let report = test_metrics(&dataset, &preds)?;
                    experiment::write_metrics(&report, &common.out_dir.join("evaluation.csv"))?;
                    println!(
                        "test accuracy {} macro F1 {} weighted F1 {} MCC {}",
                        fmt(report.accuracy),
                        fmt(report.macro_f1),
                        fmt(report.weighted_f1),
                        fmt(report.mcc)
                    );
                }
                None => {
                    let outcomes = experiment::run_experiment(&config)?;
                    experiment::write_experiment(&outcomes, &common.out_dir)?;
                    let agg = experiment::aggregate(
                        &outcomes.iter().map(|o| o.test).collect::<Vec<_>>(),
                    );
                    for (i, name) in igcn::igcn_core::MetricsReport::COLUMNS.iter().enumerate() {
                        println!("{name}: {} ± {}", fmt(agg.mean[i]), fmt(agg.std[i]));
                    }
                }
            }
        }
        Command::Ablate(common) => {
            let config = experiment_config(&common)?;
            let report = experiment::ablation_run(&config)?;
            experiment::write_ablation(&report, &common.out_dir)?;
            for (variant, outcomes) in &report.variants {
                let agg =
                    experiment::aggregate(&outcomes.iter().map(|o| o.test).collect::<Vec<_>>());
                println!("{variant}: macro F1 {} ± {}", fmt(agg.mean[1]), fmt(agg.std[1]));
            }
        }
        Command::SweepK(common) => {
            let config = experiment_config(&common)?;
            let report = experiment::k_sweep(&config, &config.k_sweep)?;
            experiment::write_sweep(&report, &common.out_dir)?;
            for p in &report.points {
                let f1 = p.macro_f1();
                println!(
                    "k={}: {} edges, macro F1 {} ± {}",
                    p.k,
                    p.total_edges(),
                    fmt(f1.mean[1]),
                    fmt(f1.std[1])
                );
            }
            let (lo, hi) = report.macro_f1_range();
            println!("macro F1 range across k: {} to {}", fmt(lo), fmt(hi));
        }
        Command::ExportAttention {
            common,
            model,
            nodes,
        } => {
            let config = experiment_config(&common)?;
            let params = model_file::load(&model)?;
            let raw = RawDataset::read(&config.load_manifest()?)?;
            let graphs = raw.graphs(None)?;
            let dataset = raw.assemble(&graphs, raw.split(config.run_seed(0))?)?;
            let rows = experiment::export_attention(&params, &dataset, nodes.as_deref())?;
            let path = common.out_dir.join("attention.csv");
            experiment::write_attention(&rows, &raw.names, &path)?;
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
        Command::Gradcheck { common, instances } => {
            let cases = gradcheck::run_suite(instances, common.seed.unwrap_or(0))?;
            formats::write_table(
                &common.out_dir.join("gradcheck.csv"),
                &gradcheck::HEADER,
                &gradcheck::rows(&cases),
            )?;
            let worst = cases.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
            let failed = cases.iter().filter(|c| !c.passed()).count();
            println!("{} instances, worst relative error {worst:e}", cases.len());
            if failed > 0 {
                bail!("{failed} instances exceed relative error {:e}", gradcheck::TOLERANCE);
            }
        }
    }
    Ok(())
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
