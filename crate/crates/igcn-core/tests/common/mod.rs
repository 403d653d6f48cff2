#![allow(dead_code)]

use igcn_core::graph::build_similarity_network;
use igcn_core::sparse::sym_normalize;
use igcn_core::{DenseMatrix, ModalityInput, MultiModalDataset, SplitMask};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

/// Random multi-modal dataset: features in [-1, 1), similarity networks
/// with average degree `k`, labels cycling through the classes, and roughly
/// half the nodes in the training mask.
pub fn random_dataset(
    m: usize,
    dims: &[usize],
    classes: usize,
    k: f64,
    rng: &mut ChaCha8Rng,
) -> MultiModalDataset {
    let modalities = dims
        .iter()
        .map(|&d| {
            let x = random_matrix(m, d, rng);
            let (adj, _) = build_similarity_network(&x, k).unwrap();
            ModalityInput::new(x, sym_normalize(&adj).unwrap()).unwrap()
        })
        .collect();
    let mut labels: Vec<usize> = (0..m).map(|j| j % classes).collect();
    labels.shuffle(rng);
    // first occurrence of every class goes to train
    let mut train = Vec::new();
    let mut rest = Vec::new();
    let mut seen = vec![false; classes];
    for (j, &l) in labels.iter().enumerate() {
        if !seen[l] || rng.gen_bool(0.4) {
            seen[l] = true;
            train.push(j);
        } else {
            rest.push(j);
        }
    }
    let (val, test) = rest.split_at(rest.len() / 2);
    let masks = SplitMask::new(train, val.to_vec(), test.to_vec(), m).unwrap();
    MultiModalDataset::new(modalities, labels, classes, masks).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
