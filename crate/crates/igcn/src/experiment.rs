//! Multi-run experiment protocols and their CSV reports.
//!
//! Runs are independent and execute in parallel; every report lists them in
//! run order, so output does not depend on scheduling.

use std::path::Path;

use igcn_core::model::forward_eval;
use igcn_core::{
    confusion, metrics, train, DenseMatrix, MetricsReport, ModelParams, MultiModalDataset,
    TrainConfig, TrainHistory, Variant,
};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::dataset::{ModalityGraph, RawDataset};
use crate::error::{Error, Result};
use crate::formats::write_table;

/// Outcome of training and testing one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run: usize,
    pub seed: u64,
    pub variant: Variant,
    pub test: MetricsReport,
    pub params: ModelParams,
    pub history: TrainHistory,
    pub test_nodes: Vec<usize>,
    pub labels: Vec<usize>,
    pub predictions: Vec<usize>,
    /// `m × p` attention coefficients of the best parameters.
    pub attention: DenseMatrix,
}

/// Trains on one split and evaluates on its test mask.
pub fn run_once(
    dataset: &MultiModalDataset,
    config: &TrainConfig,
    run: usize,
) -> Result<RunOutcome> {
    let (params, history) = train(dataset, config)?;
    let cache = forward_eval(dataset, &params)?;
    let predictions = cache.predictions();
    let test_nodes = dataset.masks().test.clone();
    let test = test_metrics(dataset, &predictions)?;
    Ok(RunOutcome {
        run,
        seed: config.seed,
        variant: config.variant,
        test,
        params,
        history,
        test_nodes,
        labels: dataset.labels().to_vec(),
        predictions,
        attention: cache.attn_coeffs,
    })
}

pub fn test_metrics(dataset: &MultiModalDataset, predictions: &[usize]) -> Result<MetricsReport> {
    let test = &dataset.masks().test;
    if test.is_empty() {
        return Err(Error::Config("test split is empty".into()));
    }
    let truth: Vec<usize> = test.iter().map(|&j| dataset.labels()[j]).collect();
    let pred: Vec<usize> = test.iter().map(|&j| predictions[j]).collect();
    Ok(metrics(&confusion(&truth, &pred, dataset.num_classes())?)?)
}

/// Runs `config.runs` seeded splits of `variant` on fixed graphs.
pub fn run_protocol(
    raw: &RawDataset,
    graphs: &[ModalityGraph],
    config: &ExperimentConfig,
    variant: Variant,
) -> Result<Vec<RunOutcome>> {
    (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let mut tc = config.train_config(run);
            tc.variant = variant;
            let dataset = raw.assemble(graphs, raw.split(tc.seed)?)?;
            run_once(&dataset, &tc, run)
        })
        .collect()
}

/// Mean and population standard deviation of each metric column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

pub fn aggregate(reports: &[MetricsReport]) -> Aggregate {
    let n = reports.len() as f64;
    let mut mean = [0.0; 4];
    let mut std = [0.0; 4];
    if reports.is_empty() {
        return Aggregate { mean, std };
    }
    for r in reports {
        for (m, v) in mean.iter_mut().zip(r.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    for r in reports {
        for ((s, v), m) in std.iter_mut().zip(r.values()).zip(mean) {
            *s += (v - m) * (v - m);
        }
    }
    std.iter_mut().for_each(|s| *s = (*s / n).sqrt());
    Aggregate { mean, std }
}

fn metric_cells(r: &MetricsReport) -> Vec<String> {
    r.values().iter().map(|v| v.to_string()).collect()
}

const RUN_HEADER: [&str; 9] = [
    "run",
    "seed",
    "variant",
    "best_epoch",
    "stopped_epoch",
    "accuracy",
    "macro_f1",
    "weighted_f1",
    "mcc",
];

fn run_rows(outcomes: &[RunOutcome]) -> Vec<Vec<String>> {
    outcomes
        .iter()
        .map(|o| {
            let mut row = vec![
                o.run.to_string(),
                o.seed.to_string(),
                o.variant.to_string(),
                o.history.best_epoch.to_string(),
                o.history.stopped_at_epoch.to_string(),
            ];
            row.extend(metric_cells(&o.test));
            row
        })
        .collect()
}

fn summary_rows(variant: Variant, outcomes: &[RunOutcome]) -> Vec<Vec<String>> {
    let reports: Vec<_> = outcomes.iter().map(|o| o.test).collect();
    let agg = aggregate(&reports);
    MetricsReport::COLUMNS
        .iter()
        .enumerate()
        .map(|(i, name)| {
            vec![
                variant.to_string(),
                name.to_string(),
                agg.mean[i].to_string(),
                agg.std[i].to_string(),
            ]
        })
        .collect()
}

const SUMMARY_HEADER: [&str; 4] = ["variant", "metric", "mean", "std"];

/// The main protocol: `runs` seeded splits of the configured variant.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunOutcome>> {
    let raw = RawDataset::read(&config.load_manifest()?)?;
    let graphs = raw.graphs(None)?;
    run_protocol(&raw, &graphs, config, config.parsed_variant()?)
}

/// Writes `runs.csv` and `summary.csv`.
pub fn write_experiment(outcomes: &[RunOutcome], dir: &Path) -> Result<()> {
    write_table(&dir.join("runs.csv"), &RUN_HEADER, &run_rows(outcomes))?;
    let variant = outcomes.first().map_or(Variant::Full, |o| o.variant);
    write_table(
        &dir.join("summary.csv"),
        &SUMMARY_HEADER,
        &summary_rows(variant, outcomes),
    )
}

/// Runs of every variant on the same seeds, in the order full,
/// no-attention, mlp-head.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub variants: Vec<(Variant, Vec<RunOutcome>)>,
}

pub const ABLATION_ORDER: [Variant; 3] = [Variant::Full, Variant::NoAttention, Variant::MlpHead];

impl AblationReport {
    pub fn outcomes(&self, variant: Variant) -> &[RunOutcome] {
        self.variants
            .iter()
            .find(|(v, _)| *v == variant)
            .map_or(&[], |(_, o)| o.as_slice())
    }

    /// Per run, whether full's test macro F1 is at least each ablation's.
    pub fn full_at_least_ablations(&self) -> Vec<bool> {
        let full = self.outcomes(Variant::Full);
        let no_att = self.outcomes(Variant::NoAttention);
        let mlp = self.outcomes(Variant::MlpHead);
        full.iter()
            .zip(no_att)
            .zip(mlp)
            .map(|((f, a), m)| f.test.macro_f1 >= a.test.macro_f1 && f.test.macro_f1 >= m.test.macro_f1)
            .collect()
    }
}

pub fn ablation_on(
    raw: &RawDataset,
    graphs: &[ModalityGraph],
    config: &ExperimentConfig,
) -> Result<AblationReport> {
    let variants = ABLATION_ORDER
        .iter()
        .map(|&v| Ok((v, run_protocol(raw, graphs, config, v)?)))
        .collect::<Result<_>>()?;
    Ok(AblationReport { variants })
}

pub fn ablation_run(config: &ExperimentConfig) -> Result<AblationReport> {
    let raw = RawDataset::read(&config.load_manifest()?)?;
    let graphs = raw.graphs(None)?;
    ablation_on(&raw, &graphs, config)
}

/// Writes `ablation.csv` (one macro-F1 row per variant) and
/// `ablation_runs.csv`.
pub fn write_ablation(report: &AblationReport, dir: &Path) -> Result<()> {
    let mut table = Vec::new();
    let mut runs = Vec::new();
    for (variant, outcomes) in &report.variants {
        let agg = aggregate(&outcomes.iter().map(|o| o.test).collect::<Vec<_>>());
        table.push(vec![
            variant.to_string(),
            agg.mean[1].to_string(),
            agg.std[1].to_string(),
            outcomes.len().to_string(),
        ]);
        runs.extend(run_rows(outcomes));
    }
    write_table(
        &dir.join("ablation.csv"),
        &["variant", "macro_f1_mean", "macro_f1_std", "runs"],
        &table,
    )?;
    write_table(&dir.join("ablation_runs.csv"), &RUN_HEADER, &runs)
}

/// One value of k in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub k: f64,
    pub graphs: Vec<ModalityGraph>,
    pub outcomes: Vec<RunOutcome>,
}

impl SweepPoint {
    pub fn total_edges(&self) -> usize {
        self.graphs.iter().map(ModalityGraph::edge_count).sum()
    }

    pub fn macro_f1(&self) -> Aggregate {
        aggregate(&self.outcomes.iter().map(|o| o.test).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub names: Vec<String>,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// Lowest and highest mean macro F1 across k.
    pub fn macro_f1_range(&self) -> (f64, f64) {
        self.points.iter().map(|p| p.macro_f1().mean[1]).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), v| (lo.min(v), hi.max(v)),
        )
    }

    /// Whether every modality's edge count is non-decreasing along the
    /// sweep (in the order the ks were given).
    pub fn edges_non_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| {
            w[0].graphs
                .iter()
                .zip(&w[1].graphs)
                .all(|(a, b)| a.edge_count() <= b.edge_count())
        })
    }
}

/// Rebuilds the similarity networks at each k and runs the configured
/// variant on them. The manifest must not fix any graph.
pub fn k_sweep(config: &ExperimentConfig, ks: &[f64]) -> Result<SweepReport> {
    let manifest = config.load_manifest()?;
    if manifest.has_fixed_graphs() {
        return Err(Error::Config(
            "k sweep needs similarity networks, but the manifest provides edge lists".into(),
        ));
    }
    let raw = RawDataset::read(&manifest)?;
    sweep_on(&raw, config, ks)
}

pub fn sweep_on(raw: &RawDataset, config: &ExperimentConfig, ks: &[f64]) -> Result<SweepReport> {
    let variant = config.parsed_variant()?;
    let points = ks
        .iter()
        .map(|&k| {
            let graphs = raw.graphs(Some(k))?;
            let outcomes = run_protocol(raw, &graphs, config, variant)?;
            Ok(SweepPoint { k, graphs, outcomes })
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport {
        names: raw.names.clone(),
        points,
    })
}

/// Writes `sweep.csv` (macro F1 against k) and `sweep_graphs.csv` (one row
/// per k and modality).
pub fn write_sweep(report: &SweepReport, dir: &Path) -> Result<()> {
    let mut table = Vec::new();
    let mut graph_rows = Vec::new();
    for p in &report.points {
        let f1 = p.macro_f1();
        table.push(vec![
            p.k.to_string(),
            p.total_edges().to_string(),
            f1.mean[1].to_string(),
            f1.std[1].to_string(),
        ]);
        for (name, g) in report.names.iter().zip(&p.graphs) {
            let r = g.report.expect("swept graphs are built");
            graph_rows.push(vec![
                p.k.to_string(),
                name.clone(),
                r.epsilon.to_string(),
                r.achieved_avg_degree.to_string(),
                g.edge_count().to_string(),
            ]);
        }
    }
    write_table(
        &dir.join("sweep.csv"),
        &["k", "total_edges", "macro_f1_mean", "macro_f1_std"],
        &table,
    )?;
    write_table(
        &dir.join("sweep_graphs.csv"),
        &["k", "modality", "epsilon", "achieved_avg_degree", "edges"],
        &graph_rows,
    )
}

/// One exported node.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRow {
    pub node: usize,
    pub truth: usize,
    pub predicted: usize,
    pub coefficients: Vec<f64>,
}

impl AttentionRow {
    pub fn correct(&self) -> bool {
        self.truth == self.predicted
    }
}

/// Attention coefficients of `nodes` from the given predictions and
/// coefficient matrix; all nodes in ascending order when `nodes` is `None`.
pub fn attention_rows(
    labels: &[usize],
    predictions: &[usize],
    coeffs: &DenseMatrix,
    nodes: &[usize],
) -> Vec<AttentionRow> {
    nodes
        .iter()
        .map(|&j| AttentionRow {
            node: j,
            truth: labels[j],
            predicted: predictions[j],
            coefficients: coeffs.row(j).to_vec(),
        })
        .collect()
}

/// Eval-mode attention export. The default subset is the correctly
/// predicted test nodes.
pub fn export_attention(
    params: &ModelParams,
    dataset: &MultiModalDataset,
    nodes: Option<&[usize]>,
) -> Result<Vec<AttentionRow>> {
    params.check_against(dataset)?;
    let cache = forward_eval(dataset, params)?;
    let preds = cache.predictions();
    let labels = dataset.labels();
    let subset: Vec<usize> = match nodes {
        Some(n) => {
            if let Some(&bad) = n.iter().find(|&&j| j >= dataset.num_nodes()) {
                return Err(Error::Config(format!("node {bad} out of range")));
            }
            n.to_vec()
        }
        None => dataset
            .masks()
            .test
            .iter()
            .copied()
            .filter(|&j| preds[j] == labels[j])
            .collect(),
    };
    Ok(attention_rows(labels, &preds, &cache.attn_coeffs, &subset))
}

impl RunOutcome {
    /// Attention rows of the correctly predicted test nodes.
    pub fn correct_test_attention(&self) -> Vec<AttentionRow> {
        let nodes: Vec<usize> = self
            .test_nodes
            .iter()
            .copied()
            .filter(|&j| self.predictions[j] == self.labels[j])
            .collect();
        attention_rows(&self.labels, &self.predictions, &self.attention, &nodes)
    }
}

pub fn write_attention(rows: &[AttentionRow], names: &[String], path: &Path) -> Result<()> {
    let mut header = vec!["node_id", "true_label", "predicted_label", "correct"];
    header.extend(names.iter().map(String::as_str));
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.node.to_string(),
                r.truth.to_string(),
                r.predicted.to_string(),
                u8::from(r.correct()).to_string(),
            ];
            row.extend(r.coefficients.iter().map(|c| c.to_string()));
            row
        })
        .collect();
    write_table(path, &header, &cells)
}

/// Per class, the mean coefficient of `modality_of[class]` over rows whose
/// true label is that class. `None` for classes with no rows.
pub fn mean_attention_by_class(
    rows: &[AttentionRow],
    modality_of: &[usize],
) -> Vec<Option<f64>> {
    modality_of
        .iter()
        .enumerate()
        .map(|(class, &i)| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.truth == class)
                .map(|r| r.coefficients[i])
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

/// Writes the per-epoch history of one training run.
pub fn write_history(history: &TrainHistory, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = history
        .epochs
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.train_accuracy.to_string(),
                e.val_loss.to_string(),
                e.val_macro_f1.to_string(),
                u8::from(e.epoch == history.best_epoch).to_string(),
            ]
        })
        .collect();
    write_table(
        path,
        &["epoch", "train_loss", "train_accuracy", "val_loss", "val_macro_f1", "best"],
        &rows,
    )
}

/// Writes a single metrics row.
pub fn write_metrics(report: &MetricsReport, path: &Path) -> Result<()> {
    write_table(path, &MetricsReport::COLUMNS, &[metric_cells(report)])
}
