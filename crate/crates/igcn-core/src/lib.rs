//! Integrative graph convolutional network (IGCN) for multi-modal node
//! classification.
//!
//! This crate is the numerical core: it builds per-modality similarity
//! networks, runs the per-modality GCN encoders, fuses their embeddings with
//! per-node attention, propagates the fused embedding through every
//! similarity network for prediction, and trains the whole model with exact
//! hand-derived gradients and Adam.
//!
//! The crate is `no_std` (it only needs `alloc`). File formats, the
//! experiment harness and the command line live in the companion `igcn`
//! crate.
//!
//! ```
//! use igcn_core::graph::build_similarity_network;
//! use igcn_core::sparse::sym_normalize;
//! use igcn_core::tensor::DenseMatrix;
//!
//! let x = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.9, 0.1], &[0.0, 1.0]]).unwrap();
//! let (adj, report) = build_similarity_network(&x, 1.0).unwrap();
//! assert!(report.achieved_avg_degree >= 1.0);
//! let norm = sym_normalize(&adj).unwrap();
//! assert_eq!(norm.num_nodes(), 3);
//! ```

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod grad;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;
pub mod sparse;
pub mod split;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use grad::{backward, finite_difference_check, nudge_off_kinks, Gradients};
pub use graph::{
    build_similarity_network, cosine_similarity_matrix, select_threshold, SimilarityMatrix,
    ThresholdReport,
};
pub use metrics::{confusion, metrics, ConfusionMatrix, MetricsReport};
pub use model::{
    forward, init_params, masked_cross_entropy, ForwardCache, ModalityInput, Mode, ModelParams,
    MultiModalDataset, SplitMask, Variant,
};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use sparse::{add_self_loops, spmm, sym_normalize, SparseAdjacency};
pub use split::stratified_split;
pub use tensor::DenseMatrix;
pub use train::{train, train_from, EarlyStopping, EpochRecord, TrainConfig, TrainHistory};
