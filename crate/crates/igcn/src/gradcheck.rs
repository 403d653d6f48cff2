//! Seeded finite-difference suite over small random instances.

use igcn_core::rng::seeded;
use igcn_core::{
    build_similarity_network, finite_difference_check, init_params, nudge_off_kinks,
    sym_normalize, DenseMatrix, ModalityInput, MultiModalDataset, SplitMask, Variant,
};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Activations are pushed at least this far from every kink before checking.
pub const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckCase {
    pub index: usize,
    pub nodes: usize,
    pub modalities: usize,
    pub classes: usize,
    pub hidden: usize,
    pub variant: Variant,
    pub max_rel_error: f64,
}

impl GradcheckCase {
    pub fn passed(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

/// Random instance `index`: `6..=15` nodes, `1 + index % 3` modalities,
/// 2 or 3 classes, hidden width 4 or 8.
pub fn random_instance(index: usize, seed: u64) -> Result<(MultiModalDataset, usize)> {
    let mut rng = seeded(seed.wrapping_add(index as u64));
    let m = rng.gen_range(6..=15);
    let p = 1 + index % 3;
    let c = rng.gen_range(2..=3);
    let h = if rng.gen_bool(0.5) { 4 } else { 8 };
    let mut modalities = Vec::with_capacity(p);
    for _ in 0..p {
        let d = rng.gen_range(2..=6);
        let data = (0..m * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = DenseMatrix::from_vec(m, d, data)?;
        let (adj, _) = build_similarity_network(&x, 2.0)?;
        modalities.push(ModalityInput::new(x, sym_normalize(&adj)?)?);
    }
    let mut labels: Vec<usize> = (0..m).map(|j| j % c).collect();
    labels.shuffle(&mut rng);
    // the first node of each class trains, the rest split about evenly
    let mut seen = vec![false; c];
    let (mut train, mut rest) = (Vec::new(), Vec::new());
    for (j, &l) in labels.iter().enumerate() {
        if !std::mem::replace(&mut seen[l], true) || rng.gen_bool(0.4) {
            train.push(j);
        } else {
            rest.push(j);
        }
    }
    let (val, test) = rest.split_at(rest.len() / 2);
    let masks = SplitMask::new(train, val.to_vec(), test.to_vec(), m)?;
    Ok((MultiModalDataset::new(modalities, labels, c, masks)?, h))
}

/// Checks `count` instances, cycling through the variants.
pub fn run_suite(count: usize, seed: u64) -> Result<Vec<GradcheckCase>> {
    (0..count)
        .map(|index| {
            let (ds, h) = random_instance(index, seed)?;
            let variant = [Variant::Full, Variant::NoAttention, Variant::MlpHead][(index / 3) % 3];
            let instance_seed = seed.wrapping_add(index as u64);
            let mut params = init_params(&ds.feature_dims(), h, ds.num_classes(), instance_seed)?;
            params.attn_bias = 0.1;
            params.variant = variant;
            let params = nudge_off_kinks(&ds, &params, KINK_MARGIN, instance_seed)?;
            let err = finite_difference_check(&ds, &params, &ds.masks().train, STEP)?;
            Ok(GradcheckCase {
                index,
                nodes: ds.num_nodes(),
                modalities: ds.num_modalities(),
                classes: ds.num_classes(),
                hidden: h,
                variant,
                max_rel_error: err,
            })
        })
        .collect()
}

pub fn rows(cases: &[GradcheckCase]) -> Vec<Vec<String>> {
    cases
        .iter()
        .map(|c| {
            vec![
                c.index.to_string(),
                c.nodes.to_string(),
                c.modalities.to_string(),
                c.classes.to_string(),
                c.hidden.to_string(),
                c.variant.to_string(),
                c.max_rel_error.to_string(),
                u8::from(c.passed()).to_string(),
            ]
        })
        .collect()
}

pub const HEADER: [&str; 8] = [
    "instance",
    "nodes",
    "modalities",
    "classes",
    "hidden",
    "variant",
    "max_rel_error",
    "passed",
];
