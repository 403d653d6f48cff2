use igcn::config::ExperimentConfig;
use igcn::experiment::{
    ablation_on, aggregate, export_attention, run_protocol, sweep_on, write_ablation,
    write_experiment, ABLATION_ORDER,
};
use igcn::igcn_core::Variant;
use igcn::synth::{generate, generate_synthetic, SyntheticSpec};

fn spec(p: usize) -> SyntheticSpec {
    SyntheticSpec {
        num_nodes: 45,
        num_classes: 3,
        num_modalities: p,
        feature_dims: vec![5],
        informative: vec![0, (p - 1).min(1), 0],
        noise_scale: 0.3,
        separation: 1.0,
        seed: 9,
        k: 3.0,
    }
}

fn quick(runs: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new("unused".into());
    c.runs = runs;
    c.train.max_epochs = 40;
    c.train.min_epochs = 10;
    c.train.patience = 5;
    c.train.hidden_width = 8;
    c
}

#[test]
fn single_run_aggregate_has_zero_spread() {
    let raw = generate(&spec(2)).unwrap();
    let graphs = raw.graphs(None).unwrap();
    let out = run_protocol(&raw, &graphs, &quick(1), Variant::Full).unwrap();
    assert_eq!(out.len(), 1);
    let agg = aggregate(&[out[0].test]);
    assert_eq!(agg.mean, out[0].test.values());
    assert_eq!(agg.std, [0.0; 4]);
}

#[test]
fn summary_matches_recomputation_from_runs() {
    let raw = generate(&spec(2)).unwrap();
    let graphs = raw.graphs(None).unwrap();
    let out = run_protocol(&raw, &graphs, &quick(3), Variant::Full).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_experiment(&out, dir.path()).unwrap();

    let mut runs = csv::Reader::from_path(dir.path().join("runs.csv")).unwrap();
    let macro_f1: Vec<f64> = runs
        .records()
        .map(|r| r.unwrap()[6].parse().unwrap())
        .collect();
    assert_eq!(macro_f1.len(), 3);
    let mean = macro_f1.iter().sum::<f64>() / 3.0;
    let std = (macro_f1.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0).sqrt();

    let mut summary = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    let row = summary
        .records()
        .map(|r| r.unwrap())
        .find(|r| &r[1] == "macro_f1")
        .unwrap();
    assert!((row[2].parse::<f64>().unwrap() - mean).abs() < 1e-12);
    assert!((row[3].parse::<f64>().unwrap() - std).abs() < 1e-12);
}

#[test]
fn runs_use_consecutive_seeds() {
    let raw = generate(&spec(2)).unwrap();
    let graphs = raw.graphs(None).unwrap();
    let mut config = quick(3);
    config.seed = 40;
    let out = run_protocol(&raw, &graphs, &config, Variant::Full).unwrap();
    let seeds: Vec<u64> = out.iter().map(|o| o.seed).collect();
    assert_eq!(seeds, [40, 41, 42]);
    assert_ne!(out[0].test_nodes, out[1].test_nodes);
}

#[test]
fn ablation_report_has_three_variant_rows() {
    let raw = generate(&spec(2)).unwrap();
    let graphs = raw.graphs(None).unwrap();
    let report = ablation_on(&raw, &graphs, &quick(2)).unwrap();
    let order: Vec<Variant> = report.variants.iter().map(|v| v.0).collect();
    assert_eq!(order, ABLATION_ORDER);
    let dir = tempfile::tempdir().unwrap();
    write_ablation(&report, dir.path()).unwrap();
    let mut table = csv::Reader::from_path(dir.path().join("ablation.csv")).unwrap();
    let names: Vec<String> = table.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(names, ["full", "no-attention", "mlp-head"]);
    assert_eq!(report.full_at_least_ablations().len(), 2);
}

#[test]
fn single_modality_no_attention_equals_full() {
    let raw = generate(&spec(1)).unwrap();
    let graphs = raw.graphs(None).unwrap();
    let config = quick(1);
    let full = run_protocol(&raw, &graphs, &config, Variant::Full).unwrap();
    let plain = run_protocol(&raw, &graphs, &config, Variant::NoAttention).unwrap();
    assert_eq!(full[0].test, plain[0].test);
    assert_eq!(full[0].predictions, plain[0].predictions);
    assert_eq!(full[0].history.epochs, plain[0].history.epochs);
}

#[test]
fn single_k_sweep_reduces_to_the_protocol() {
    let raw = generate(&spec(2)).unwrap();
    let config = quick(2);
    let sweep = sweep_on(&raw, &config, &[3.0]).unwrap();
    let graphs = raw.graphs(None).unwrap();
    let direct = run_protocol(&raw, &graphs, &config, Variant::Full).unwrap();
    assert_eq!(sweep.points[0].outcomes, direct);
}

#[test]
fn sweep_edges_grow_with_k() {
    let raw = generate(&spec(2)).unwrap();
    let sweep = sweep_on(&raw, &quick(1), &[3.0, 5.0, 7.0, 9.0]).unwrap();
    assert!(sweep.edges_non_decreasing());
    for p in &sweep.points {
        for g in &p.graphs {
            assert!(g.report.unwrap().achieved_avg_degree >= p.k);
        }
    }
    let (lo, hi) = sweep.macro_f1_range();
    assert!(lo <= hi);
}

#[test]
fn attention_rows_sum_to_one() {
    let loaded = generate_synthetic(&spec(3), 1).unwrap();
    let raw = generate(&spec(3)).unwrap();
    let graphs = raw.graphs(None).unwrap();
    let out = run_protocol(&raw, &graphs, &quick(1), Variant::Full).unwrap();
    let all: Vec<usize> = (0..45).collect();
    let rows = export_attention(&out[0].params, &loaded.dataset, Some(&all)).unwrap();
    assert_eq!(rows.len(), 45);
    for r in &rows {
        assert_eq!(r.coefficients.len(), 3);
        assert!((r.coefficients.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert!(export_attention(&out[0].params, &loaded.dataset, Some(&[45])).is_err());
}

#[test]
fn default_export_is_correct_test_nodes() {
    let raw = generate(&spec(1)).unwrap();
    let graphs = raw.graphs(None).unwrap();
    let out = run_protocol(&raw, &graphs, &quick(1), Variant::Full).unwrap();
    let dataset = raw.assemble(&graphs, raw.split(0).unwrap()).unwrap();
    let rows = export_attention(&out[0].params, &dataset, None).unwrap();
    assert_eq!(rows, out[0].correct_test_attention());
    for r in &rows {
        assert!(r.correct());
        assert!(dataset.masks().test.contains(&r.node));
        assert_eq!(r.coefficients, [1.0]);
    }
}
