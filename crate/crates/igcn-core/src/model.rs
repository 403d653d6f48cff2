//! The IGCN forward pass.
//!
//! For each modality `i` a single GCN layer produces node embeddings
//! `H_i = ReLU(Â_i X_i W_i)` where `Â_i` is the symmetric-normalized
//! similarity network. Per node, a shared scoring vector `W_a` and bias `b`
//! give one attention logit per modality; a softmax across modalities turns
//! them into coefficients `C`, which weight the embeddings into a fused `Z`.
//! Prediction propagates `Z` through every network again:
//! `Ŷ = Σ_i Â_i Z W̄_i`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{shape_err, Error, Result};
use crate::rng::{seeded, Rng};
use crate::sparse::{spmm, SparseAdjacency};
use crate::tensor::{leaky_relu, log_sum_exp, softmax_in_place, DenseMatrix};

/// Negative-side slope of the attention LeakyReLU.
pub const ATTENTION_SLOPE: f64 = 0.2;

/// Features and normalized similarity network of one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityInput {
    features: DenseMatrix,
    norm_adj: SparseAdjacency,
}

impl ModalityInput {
    pub fn new(features: DenseMatrix, norm_adj: SparseAdjacency) -> Result<Self> {
        if features.rows() != norm_adj.num_nodes() {
            return Err(shape_err(
                "ModalityInput",
                format!(
                    "{} feature rows vs {} graph nodes",
                    features.rows(),
                    norm_adj.num_nodes()
                ),
            ));
        }
        Ok(Self { features, norm_adj })
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn norm_adj(&self) -> &SparseAdjacency {
        &self.norm_adj
    }
}

/// Disjoint train / validation / test node sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitMask {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitMask {
    /// Sorts each set and checks disjointness and range.
    pub fn new(
        mut train: Vec<usize>,
        mut val: Vec<usize>,
        mut test: Vec<usize>,
        num_nodes: usize,
    ) -> Result<Self> {
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        let mut seen = vec![false; num_nodes];
        for &j in train.iter().chain(&val).chain(&test) {
            if j >= num_nodes {
                return Err(Error::InvalidParameter(format!(
                    "split index {j} outside {num_nodes} nodes"
                )));
            }
            if seen[j] {
                return Err(Error::InvalidParameter(format!(
                    "node {j} appears in more than one split"
                )));
            }
            seen[j] = true;
        }
        Ok(Self { train, val, test })
    }

    fn permuted(&self, inverse: &[usize]) -> Self {
        let map = |v: &[usize]| {
            let mut out: Vec<usize> = v.iter().map(|&j| inverse[j]).collect();
            out.sort_unstable();
            out
        };
        Self {
            train: map(&self.train),
            val: map(&self.val),
            test: map(&self.test),
        }
    }
}

/// Aligned modalities over one node set, with shared labels and splits.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiModalDataset {
    modalities: Vec<ModalityInput>,
    labels: Vec<usize>,
    num_classes: usize,
    masks: SplitMask,
}

impl MultiModalDataset {
    pub fn new(
        modalities: Vec<ModalityInput>,
        labels: Vec<usize>,
        num_classes: usize,
        masks: SplitMask,
    ) -> Result<Self> {
        if modalities.is_empty() {
            return Err(Error::Empty("modality list"));
        }
        let m = labels.len();
        for (i, md) in modalities.iter().enumerate() {
            if md.features.rows() != m {
                return Err(shape_err(
                    "MultiModalDataset",
                    format!("modality {i} has {} rows, labels {m}", md.features.rows()),
                ));
            }
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: num_classes,
            });
        }
        let masks = SplitMask::new(masks.train, masks.val, masks.test, m)?;
        let mut present = vec![false; num_classes];
        for &j in &masks.train {
            present[labels[j]] = true;
        }
        if let Some(class) = present.iter().position(|p| !p) {
            return Err(Error::ClassTooSmall {
                class,
                count: 0,
                need: 1,
            });
        }
        Ok(Self {
            modalities,
            labels,
            num_classes,
            masks,
        })
    }

    pub fn modalities(&self) -> &[ModalityInput] {
        &self.modalities
    }

    pub fn num_modalities(&self) -> usize {
        self.modalities.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn masks(&self) -> &SplitMask {
        &self.masks
    }

    pub fn feature_dims(&self) -> Vec<usize> {
        self.modalities.iter().map(|m| m.features.cols()).collect()
    }

    /// Same data under new splits.
    pub fn with_masks(&self, masks: SplitMask) -> Result<Self> {
        Self::new(
            self.modalities.clone(),
            self.labels.clone(),
            self.num_classes,
            masks,
        )
    }

    /// Relabels nodes so that new node `i` is old node `perm[i]`, consistently
    /// across features, graphs, labels and splits.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let m = self.num_nodes();
        let norm_adjs = self
            .modalities
            .iter()
            .map(|md| md.norm_adj.permuted(perm))
            .collect::<Result<Vec<_>>>()?;
        let mut inverse = vec![0; m];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let modalities = self
            .modalities
            .iter()
            .zip(norm_adjs)
            .map(|(md, adj)| {
                let d = md.features.cols();
                let mut data = Vec::with_capacity(m * d);
                for &old in perm {
                    data.extend_from_slice(md.features.row(old));
                }
                ModalityInput::new(DenseMatrix::from_vec(m, d, data)?, adj)
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = perm.iter().map(|&old| self.labels[old]).collect();
        Self::new(
            modalities,
            labels,
            self.num_classes,
            self.masks.permuted(&inverse),
        )
    }
}

/// Architecture variant; the non-full ones are the ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Variant {
    /// Attention fusion and the graph-propagating prediction head.
    #[default]
    Full,
    /// Embeddings averaged with fixed weights `1/p`; `W_a` and `b` unused.
    NoAttention,
    /// Prediction is the single dense map `Z · W̄_0`; no graph propagation.
    MlpHead,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::NoAttention, Variant::MlpHead, Variant::Full];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoAttention => "no-attention",
            Variant::MlpHead => "mlp-head",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(Variant::Full),
            "no-attention" => Some(Variant::NoAttention),
            "mlp-head" => Some(Variant::MlpHead),
            _ => None,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Variant::Full => 0,
            Variant::NoAttention => 1,
            Variant::MlpHead => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Variant::Full),
            1 => Some(Variant::NoAttention),
            2 => Some(Variant::MlpHead),
            _ => None,
        }
    }
}

impl core::fmt::Display for Variant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Every learnable tensor of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `W_i`, one `d_i × h` matrix per modality.
    pub gcn_weights: Vec<DenseMatrix>,
    /// `W_a`, `h × 1`.
    pub attn_weight: DenseMatrix,
    /// `b`.
    pub attn_bias: f64,
    /// `W̄_i`, one `h × c` matrix per modality.
    pub head_weights: Vec<DenseMatrix>,
    pub variant: Variant,
}

impl ModelParams {
    pub fn num_modalities(&self) -> usize {
        self.gcn_weights.len()
    }

    pub fn hidden_width(&self) -> usize {
        self.attn_weight.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.head_weights.first().map_or(0, |w| w.cols())
    }

    /// Parameter buffers in a fixed order: `W_1..W_p`, `W_a`, `b`,
    /// `W̄_1..W̄_p`.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.gcn_weights.iter().map(|w| w.data()).collect();
        out.push(self.attn_weight.data());
        out.push(core::slice::from_ref(&self.attn_bias));
        out.extend(self.head_weights.iter().map(|w| w.data()));
        out
    }

    /// Mutable buffers in the order of [`ModelParams::slices`].
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> =
            self.gcn_weights.iter_mut().map(|w| w.data_mut()).collect();
        out.push(self.attn_weight.data_mut());
        out.push(core::slice::from_mut(&mut self.attn_bias));
        out.extend(self.head_weights.iter_mut().map(|w| w.data_mut()));
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// Checks that the parameter shapes fit `dataset`.
    pub fn check_against(&self, dataset: &MultiModalDataset) -> Result<()> {
        let p = dataset.num_modalities();
        let h = self.hidden_width();
        let c = dataset.num_classes();
        let bad = |detail| Err(shape_err("ModelParams", detail));
        if self.gcn_weights.len() != p || self.head_weights.len() != p {
            return bad(format!(
                "{} gcn / {} head weights for {p} modalities",
                self.gcn_weights.len(),
                self.head_weights.len()
            ));
        }
        if self.attn_weight.cols() != 1 || h == 0 {
            return bad(format!("attention weight {:?}", self.attn_weight.shape()));
        }
        for (i, (w, md)) in self.gcn_weights.iter().zip(dataset.modalities()).enumerate() {
            if w.shape() != (md.features.cols(), h) {
                return bad(format!("W_{i} is {:?}", w.shape()));
            }
        }
        for (i, w) in self.head_weights.iter().enumerate() {
            if w.shape() != (h, c) {
                return bad(format!("head weight {i} is {:?}", w.shape()));
            }
        }
        Ok(())
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    let bound = libm::sqrt(6.0 / (rows + cols) as f64);
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    DenseMatrix::from_vec(rows, cols, data).expect("length matches shape")
}

/// Glorot-uniform weights, zero attention bias, deterministic in `seed`.
pub fn init_params(
    feature_dims: &[usize],
    hidden: usize,
    classes: usize,
    seed: u64,
) -> Result<ModelParams> {
    if hidden == 0 {
        return Err(Error::InvalidParameter("hidden width must be >= 1".into()));
    }
    if classes < 2 {
        return Err(Error::InvalidParameter("need at least 2 classes".into()));
    }
    if feature_dims.is_empty() {
        return Err(Error::Empty("modality list"));
    }
    let mut rng = seeded(seed);
    let gcn_weights = feature_dims
        .iter()
        .map(|&d| glorot(d, hidden, &mut rng))
        .collect();
    let attn_weight = glorot(hidden, 1, &mut rng);
    let head_weights = feature_dims
        .iter()
        .map(|_| glorot(hidden, classes, &mut rng))
        .collect();
    Ok(ModelParams {
        gcn_weights,
        attn_weight,
        attn_bias: 0.0,
        head_weights,
        variant: Variant::Full,
    })
}

/// Whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Inverted dropout at `dropout` on every modality's input features.
    Train { dropout: f64 },
    Eval,
}

/// Every intermediate of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// Per-modality dropout scale factors (`0` or `1/(1-rate)`), if applied.
    pub dropout_masks: Vec<Option<DenseMatrix>>,
    /// `Â_i (X_i ∘ M_i) W_i`.
    pub pre_activations: Vec<DenseMatrix>,
    /// `H_i`.
    pub embeddings: Vec<DenseMatrix>,
    /// `H_i W_a + b` per node and modality (`m × p`), before the LeakyReLU.
    pub attn_scores: DenseMatrix,
    /// LeakyReLU of the scores.
    pub attn_logits: DenseMatrix,
    /// Row-softmax of the logits (`m × p`).
    pub attn_coeffs: DenseMatrix,
    /// `Z`.
    pub fused: DenseMatrix,
    /// `Ŷ`.
    pub logits: DenseMatrix,
}

impl ForwardCache {
    pub fn predictions(&self) -> Vec<usize> {
        self.logits.argmax_rows()
    }
}

fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> DenseMatrix {
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    DenseMatrix::from_vec(rows, cols, data).expect("length matches shape")
}

/// One GCN layer: returns `(Â (X ∘ mask) W, ReLU(·))`.
pub fn gcn_layer_forward(
    modality: &ModalityInput,
    weight: &DenseMatrix,
    dropout_mask: Option<&DenseMatrix>,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let xw = match dropout_mask {
        Some(mask) => modality.features.hadamard(mask)?.matmul(weight)?,
        None => modality.features.matmul(weight)?,
    };
    let pre = spmm(&modality.norm_adj, &xw)?;
    let h = pre.relu();
    Ok((pre, h))
}

/// Attention scores, logits and coefficients for every node and modality.
///
/// Returns `(scores, logits, coeffs)`, each `m × p`.
pub fn attention_coefficients(
    embeddings: &[DenseMatrix],
    attn_weight: &DenseMatrix,
    attn_bias: f64,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    let first = embeddings.first().ok_or(Error::Empty("embedding list"))?;
    let (m, p) = (first.rows(), embeddings.len());
    let mut scores = DenseMatrix::zeros(m, p);
    for (i, h) in embeddings.iter().enumerate() {
        if h.shape() != first.shape() {
            return Err(shape_err(
                "attention_coefficients",
                format!("embedding {i} is {:?}, expected {:?}", h.shape(), first.shape()),
            ));
        }
        let s = h.matmul(attn_weight)?;
        for n in 0..m {
            scores.set(n, i, s.get(n, 0) + attn_bias);
        }
    }
    let logits = scores.map(|v| leaky_relu(v, ATTENTION_SLOPE));
    let mut coeffs = logits.clone();
    for n in 0..m {
        softmax_in_place(coeffs.row_mut(n));
    }
    Ok((scores, logits, coeffs))
}

/// `Z = Σ_i diag(C[:, i]) H_i`.
pub fn fuse_embeddings(embeddings: &[DenseMatrix], coeffs: &DenseMatrix) -> Result<DenseMatrix> {
    let first = embeddings.first().ok_or(Error::Empty("embedding list"))?;
    if coeffs.shape() != (first.rows(), embeddings.len()) {
        return Err(shape_err(
            "fuse_embeddings",
            format!(
                "coefficients {:?} for {} embeddings of {:?}",
                coeffs.shape(),
                embeddings.len(),
                first.shape()
            ),
        ));
    }
    let mut z = DenseMatrix::zeros(first.rows(), first.cols());
    for (i, h) in embeddings.iter().enumerate() {
        z.add_assign(&h.hadamard_broadcast_column(&coeffs.column(i))?)?;
    }
    Ok(z)
}

/// `Ŷ = Σ_i Â_i Z W̄_i` (logits, no softmax).
pub fn prediction_head(
    norm_adjs: &[&SparseAdjacency],
    fused: &DenseMatrix,
    head_weights: &[DenseMatrix],
) -> Result<DenseMatrix> {
    if norm_adjs.is_empty() {
        return Err(Error::Empty("network list"));
    }
    if norm_adjs.len() != head_weights.len() {
        return Err(shape_err(
            "prediction_head",
            format!("{} networks, {} weights", norm_adjs.len(), head_weights.len()),
        ));
    }
    let mut out: Option<DenseMatrix> = None;
    for (adj, w) in norm_adjs.iter().zip(head_weights) {
        let term = spmm(adj, &fused.matmul(w)?)?;
        match out.as_mut() {
            Some(acc) => acc.add_assign(&term)?,
            None => out = Some(term),
        }
    }
    Ok(out.expect("at least one network"))
}

/// Full forward pass. `rng` is only drawn from in [`Mode::Train`] with a
/// positive dropout rate.
pub fn forward(
    dataset: &MultiModalDataset,
    params: &ModelParams,
    mode: Mode,
    rng: &mut Rng,
) -> Result<ForwardCache> {
    params.check_against(dataset)?;
    let m = dataset.num_nodes();
    let p = dataset.num_modalities();
    let rate = match mode {
        Mode::Train { dropout } => {
            if !(0.0..1.0).contains(&dropout) {
                return Err(Error::InvalidParameter(format!(
                    "dropout rate {dropout} outside [0, 1)"
                )));
            }
            dropout
        }
        Mode::Eval => 0.0,
    };

    let mut dropout_masks = Vec::with_capacity(p);
    let mut pre_activations = Vec::with_capacity(p);
    let mut embeddings = Vec::with_capacity(p);
    for (md, w) in dataset.modalities().iter().zip(&params.gcn_weights) {
        let mask = (rate > 0.0)
            .then(|| dropout_mask(md.features.rows(), md.features.cols(), rate, rng));
        let (pre, h) = gcn_layer_forward(md, w, mask.as_ref())?;
        dropout_masks.push(mask);
        pre_activations.push(pre);
        embeddings.push(h);
    }

    let (attn_scores, attn_logits, attn_coeffs) = match params.variant {
        Variant::NoAttention => (
            DenseMatrix::zeros(m, p),
            DenseMatrix::zeros(m, p),
            DenseMatrix::filled(m, p, 1.0 / p as f64),
        ),
        _ => attention_coefficients(&embeddings, &params.attn_weight, params.attn_bias)?,
    };
    let fused = fuse_embeddings(&embeddings, &attn_coeffs)?;

    let logits = match params.variant {
        Variant::MlpHead => fused.matmul(&params.head_weights[0])?,
        _ => {
            let adjs: Vec<&SparseAdjacency> =
                dataset.modalities().iter().map(|md| &md.norm_adj).collect();
            prediction_head(&adjs, &fused, &params.head_weights)?
        }
    };

    Ok(ForwardCache {
        dropout_masks,
        pre_activations,
        embeddings,
        attn_scores,
        attn_logits,
        attn_coeffs,
        fused,
        logits,
    })
}

/// Eval-mode forward pass.
pub fn forward_eval(dataset: &MultiModalDataset, params: &ModelParams) -> Result<ForwardCache> {
    // the stream is never drawn from in eval mode
    forward(dataset, params, Mode::Eval, &mut seeded(0))
}

/// Summed softmax cross-entropy over the nodes in `mask`.
pub fn masked_cross_entropy(logits: &DenseMatrix, labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::Empty("loss mask"));
    }
    if labels.len() != logits.rows() {
        return Err(shape_err(
            "masked_cross_entropy",
            format!("{} labels for {} rows", labels.len(), logits.rows()),
        ));
    }
    let mut loss = 0.0;
    for &j in mask {
        if j >= logits.rows() {
            return Err(Error::InvalidParameter(format!("mask index {j} out of range")));
        }
        let row = logits.row(j);
        let label = labels[j];
        if label >= row.len() {
            return Err(Error::LabelOutOfRange {
                label,
                classes: row.len(),
            });
        }
        loss += log_sum_exp(row) - row[label];
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{add_self_loops, sym_normalize};

    fn dm(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    fn complete_pair() -> SparseAdjacency {
        sym_normalize(
            &add_self_loops(&SparseAdjacency::from_undirected_edges(2, [(0, 1, 1.0)]).unwrap())
                .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn gcn_layer_examples() {
        let md = ModalityInput::new(dm(&[&[1.0, 2.0]]), SparseAdjacency::identity(1)).unwrap();
        let (_, h) = gcn_layer_forward(&md, &dm(&[&[1.0], &[0.0]]), None).unwrap();
        assert_eq!(h, dm(&[&[1.0]]));
        let (pre, h) = gcn_layer_forward(&md, &dm(&[&[-1.0], &[0.0]]), None).unwrap();
        assert_eq!(pre, dm(&[&[-1.0]]));
        assert_eq!(h, dm(&[&[0.0]]));

        let md = ModalityInput::new(dm(&[&[2.0], &[4.0]]), complete_pair()).unwrap();
        let (_, h) = gcn_layer_forward(&md, &dm(&[&[1.0]]), None).unwrap();
        assert_eq!(h, dm(&[&[3.0], &[3.0]]));
    }

    #[test]
    fn gcn_layer_shape_mismatch() {
        let md = ModalityInput::new(dm(&[&[1.0, 2.0]]), SparseAdjacency::identity(1)).unwrap();
        assert!(gcn_layer_forward(&md, &dm(&[&[1.0]]), None).is_err());
        assert!(ModalityInput::new(dm(&[&[1.0]]), SparseAdjacency::identity(2)).is_err());
    }

    #[test]
    fn attention_single_modality_is_one() {
        let h = dm(&[&[1.0, -2.0], &[0.5, 3.0]]);
        let (_, _, c) = attention_coefficients(&[h], &dm(&[&[0.7], &[-0.3]]), 0.1).unwrap();
        assert_eq!(c, DenseMatrix::filled(2, 1, 1.0));
    }

    #[test]
    fn attention_identical_embeddings_split_evenly() {
        let h = dm(&[&[1.0, -2.0], &[0.5, 3.0]]);
        let (_, _, c) =
            attention_coefficients(&[h.clone(), h], &dm(&[&[0.7], &[-0.3]]), 0.1).unwrap();
        assert_eq!(c, DenseMatrix::filled(2, 2, 0.5));
    }

    #[test]
    fn attention_logit_row_one_zero() {
        // scores 1.0 and 0.0 pass through the LeakyReLU unchanged
        let h1 = dm(&[&[1.0]]);
        let h2 = dm(&[&[0.0]]);
        let (_, logits, c) = attention_coefficients(&[h1, h2], &dm(&[&[1.0]]), 0.0).unwrap();
        assert_eq!(logits, dm(&[&[1.0, 0.0]]));
        assert!((c.get(0, 0) - 0.73106).abs() < 1e-5);
        assert!((c.get(0, 1) - 0.26894).abs() < 1e-5);
    }

    #[test]
    fn attention_negative_scores_use_slope() {
        let (s, l, _) = attention_coefficients(&[dm(&[&[-5.0]])], &dm(&[&[1.0]]), 0.0).unwrap();
        assert_eq!(s.get(0, 0), -5.0);
        assert_eq!(l.get(0, 0), -1.0);
    }

    #[test]
    fn attention_rejects_empty_and_ragged() {
        assert!(attention_coefficients(&[], &dm(&[&[1.0]]), 0.0).is_err());
        let r = attention_coefficients(
            &[DenseMatrix::zeros(2, 1), DenseMatrix::zeros(3, 1)],
            &dm(&[&[1.0]]),
            0.0,
        );
        assert!(r.is_err());
    }

    #[test]
    fn fusion_examples() {
        let h = dm(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let z = fuse_embeddings(core::slice::from_ref(&h), &DenseMatrix::filled(2, 1, 1.0)).unwrap();
        assert_eq!(z, h);
        let z = fuse_embeddings(&[h.clone(), h.clone()], &DenseMatrix::filled(2, 2, 0.5)).unwrap();
        assert_eq!(z, h);

        let z = fuse_embeddings(
            &[dm(&[&[4.0, 0.0]]), dm(&[&[0.0, 4.0]])],
            &dm(&[&[0.25, 0.75]]),
        )
        .unwrap();
        assert_eq!(z, dm(&[&[1.0, 3.0]]));
        assert!(fuse_embeddings(&[h], &DenseMatrix::filled(2, 2, 0.5)).is_err());
    }

    #[test]
    fn head_examples() {
        let id = SparseAdjacency::identity(1);
        let z = dm(&[&[1.0, 0.0]]);
        let w = dm(&[&[2.0, 0.0], &[0.0, 3.0]]);
        let y1 = prediction_head(&[&id], &z, core::slice::from_ref(&w)).unwrap();
        assert_eq!(y1, dm(&[&[2.0, 0.0]]));
        let y2 = prediction_head(&[&id, &id], &z, &[w.clone(), w]).unwrap();
        assert_eq!(y2, y1.scale(2.0));

        let pair = complete_pair();
        let y = prediction_head(&[&pair], &dm(&[&[1.0], &[3.0]]), &[dm(&[&[1.0, -1.0]])]).unwrap();
        assert_eq!(y, dm(&[&[2.0, -2.0], &[2.0, -2.0]]));
        assert!(prediction_head(&[], &z, &[]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let labels = [0, 1, 2, 1];
        let uniform = DenseMatrix::filled(4, 3, 0.7);
        let l = masked_cross_entropy(&uniform, &labels, &[0, 1, 3]).unwrap();
        assert!((l - 3.0 * 3f64.ln()).abs() < 1e-12);

        let sat = dm(&[&[1000.0, 0.0, 0.0]]);
        assert!(masked_cross_entropy(&sat, &[0], &[0]).unwrap() < 1e-9);

        let one = dm(&[&[1.0, 0.0]]);
        let l = masked_cross_entropy(&one, &[0], &[0]).unwrap();
        assert!((l - (1.0 + (-1f64).exp()).ln()).abs() < 1e-15);
        assert!((l - 0.313262).abs() < 1e-6);

        assert_eq!(
            masked_cross_entropy(&one, &[0], &[]),
            Err(Error::Empty("loss mask"))
        );
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_params(&[5, 3], 4, 3, 9).unwrap();
        let b = init_params(&[5, 3], 4, 3, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_params(&[5, 3], 4, 3, 10).unwrap());
        assert_eq!(a.attn_weight.shape(), (4, 1));
        assert_eq!(a.attn_bias, 0.0);
        let bound = (6.0f64 / 9.0).sqrt();
        assert!(a.gcn_weights[0].data().iter().all(|v| v.abs() <= bound));
        assert_eq!(a.gcn_weights[1].shape(), (3, 4));
        assert_eq!(a.head_weights[1].shape(), (4, 3));
        assert!(init_params(&[5], 0, 3, 0).is_err());
        assert!(init_params(&[5], 4, 1, 0).is_err());
    }

    #[test]
    fn split_mask_rejects_overlap() {
        assert!(SplitMask::new(vec![0, 1], vec![1], vec![], 3).is_err());
        assert!(SplitMask::new(vec![0], vec![5], vec![], 3).is_err());
        let s = SplitMask::new(vec![2, 0], vec![1], vec![], 3).unwrap();
        assert_eq!(s.train, vec![0, 2]);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(Variant::parse(v.name()), Some(v));
            assert_eq!(Variant::from_code(v.code()), Some(v));
        }
    }
}
