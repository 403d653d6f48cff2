mod common;

use common::{random_dataset, rng};
use igcn_core::grad::{eval_loss, kink_distance};
use igcn_core::model::forward_eval;
use igcn_core::{
    backward, finite_difference_check, init_params, nudge_off_kinks, DenseMatrix, Variant,
};
use rand::Rng;

const STEP: f64 = 1e-5;

#[test]
fn random_instances_match_central_differences() {
    let mut r = rng(2024);
    for instance in 0..20 {
        let m = r.gen_range(6..=15);
        let p = 1 + instance % 3;
        let dims: Vec<usize> = (0..p).map(|i| 2 + i + r.gen_range(0..4)).collect();
        let classes = r.gen_range(2..=3);
        let hidden = if r.gen_bool(0.5) { 4 } else { 8 };
        let ds = random_dataset(m, &dims, classes, 2.0, &mut r);
        let mut params = init_params(&dims, hidden, classes, instance as u64).unwrap();
        params.attn_bias = r.gen_range(-0.5..0.5);
        let params = nudge_off_kinks(&ds, &params, 1e-3, instance as u64).unwrap();
        let err = finite_difference_check(&ds, &params, &ds.masks().train, STEP).unwrap();
        assert!(err < 1e-4, "instance {instance} (m={m}, p={p}): {err:e}");
    }
}

#[test]
fn ablation_variants_match_central_differences() {
    let mut r = rng(7);
    for variant in [Variant::NoAttention, Variant::MlpHead] {
        for seed in 0..4 {
            let ds = random_dataset(10, &[3, 5], 3, 2.0, &mut r);
            let mut params = init_params(&[3, 5], 4, 3, seed).unwrap();
            params.variant = variant;
            let params = nudge_off_kinks(&ds, &params, 1e-3, seed).unwrap();
            let err = finite_difference_check(&ds, &params, &ds.masks().train, STEP).unwrap();
            assert!(err < 1e-4, "{variant} seed {seed}: {err:e}");
        }
    }
}

#[test]
fn bias_gradient_with_zero_heads() {
    // zero head weights make every logit 0, so the loss is uniform
    let mut r = rng(3);
    let ds = random_dataset(8, &[4, 3], 2, 2.0, &mut r);
    let mut params = init_params(&[4, 3], 4, 2, 1).unwrap();
    for w in &mut params.head_weights {
        w.data_mut().fill(0.0);
    }
    let mask = ds.masks().train.clone();
    let cache = forward_eval(&ds, &params).unwrap();
    let (loss, g) = backward(&ds, &params, &cache, &mask).unwrap();
    assert!((loss - mask.len() as f64 * 2f64.ln()).abs() < 1e-12);

    let mut plus = params.clone();
    plus.attn_bias += STEP;
    let mut minus = params.clone();
    minus.attn_bias -= STEP;
    let numeric =
        (eval_loss(&ds, &plus, &mask).unwrap() - eval_loss(&ds, &minus, &mask).unwrap()) / (2.0 * STEP);
    let denom = g.attn_bias.abs().max(numeric.abs()).max(1e-8);
    assert!((g.attn_bias - numeric).abs() / denom < 1e-6);
}

#[test]
fn smooth_region_is_tight() {
    // positive features and weights keep every ReLU input strictly positive
    let mut r = rng(5);
    let mut ds = random_dataset(9, &[3, 2], 2, 2.0, &mut r);
    ds = {
        let mods = ds
            .modalities()
            .iter()
            .map(|md| {
                let x = md.features().map(|v| v.abs() + 0.1);
                igcn_core::ModalityInput::new(x, md.norm_adj().clone()).unwrap()
            })
            .collect();
        igcn_core::MultiModalDataset::new(mods, ds.labels().to_vec(), 2, ds.masks().clone()).unwrap()
    };
    let mut params = init_params(&[3, 2], 4, 2, 9).unwrap();
    for w in &mut params.gcn_weights {
        *w = w.map(|v| v.abs() + 0.05);
    }
    params.attn_weight = params.attn_weight.map(|v| v.abs() + 0.05);
    // mixed-sign attention scores; if every score sat on one LeakyReLU branch
    // the softmax would be shift invariant and db would be exactly 0
    params.attn_bias = -1.5;
    assert!(kink_distance(&ds, &params).unwrap() > 1e-2);
    let err = finite_difference_check(&ds, &params, &ds.masks().train, STEP).unwrap();
    assert!(err < 1e-6, "{err:e}");
}

#[test]
fn nudged_parameters_clear_kinks() {
    let mut r = rng(8);
    let ds = random_dataset(12, &[4], 3, 3.0, &mut r);
    let mut params = init_params(&[4], 8, 3, 2).unwrap();
    // zero weights put every GCN pre-activation on the kink
    params.gcn_weights[0] = DenseMatrix::zeros(4, 8);
    assert_eq!(kink_distance(&ds, &params).unwrap(), 0.0);
    let nudged = nudge_off_kinks(&ds, &params, 1e-3, 0).unwrap();
    assert!(kink_distance(&ds, &nudged).unwrap() >= 1e-3);
    let err = finite_difference_check(&ds, &nudged, &ds.masks().train, STEP).unwrap();
    assert!(err < 1e-4, "{err:e}");
}

#[test]
fn zero_step_is_rejected() {
    let mut r = rng(1);
    let ds = random_dataset(6, &[2], 2, 1.0, &mut r);
    let params = init_params(&[2], 4, 2, 0).unwrap();
    assert!(finite_difference_check(&ds, &params, &ds.masks().train, 0.0).is_err());
}
