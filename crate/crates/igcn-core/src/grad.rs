//! Exact reverse-mode gradients of the masked cross-entropy loss through the
//! fixed IGCN graph, plus the central-difference checker that validates them.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{shape_err, Error, Result};
use crate::model::{
    forward_eval, masked_cross_entropy, ForwardCache, ModelParams, MultiModalDataset, Variant,
    ATTENTION_SLOPE,
};
use crate::rng::seeded;
use crate::sparse::spmm;
use crate::tensor::{dot, softmax_in_place, DenseMatrix};

/// Gradient of the loss with respect to every entry of [`ModelParams`],
/// shape for shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub gcn_weights: Vec<DenseMatrix>,
    pub attn_weight: DenseMatrix,
    pub attn_bias: f64,
    pub head_weights: Vec<DenseMatrix>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        let z = |w: &DenseMatrix| DenseMatrix::zeros(w.rows(), w.cols());
        Self {
            gcn_weights: params.gcn_weights.iter().map(z).collect(),
            attn_weight: z(&params.attn_weight),
            attn_bias: 0.0,
            head_weights: params.head_weights.iter().map(z).collect(),
        }
    }

    /// Buffers in the order of [`ModelParams::slices`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.gcn_weights.iter().map(|w| w.data()).collect();
        out.push(self.attn_weight.data());
        out.push(core::slice::from_ref(&self.attn_bias));
        out.extend(self.head_weights.iter().map(|w| w.data()));
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// `∂L/∂Ŷ` for the summed softmax cross-entropy: `softmax(ŷ_j) - onehot`
/// on masked rows, zero elsewhere.
fn logits_gradient(logits: &DenseMatrix, labels: &[usize], mask: &[usize]) -> DenseMatrix {
    let mut g = DenseMatrix::zeros(logits.rows(), logits.cols());
    for &j in mask {
        let row = g.row_mut(j);
        row.copy_from_slice(logits.row(j));
        softmax_in_place(row);
        row[labels[j]] -= 1.0;
    }
    g
}

fn check_cache(dataset: &MultiModalDataset, params: &ModelParams, cache: &ForwardCache) -> Result<()> {
    params.check_against(dataset)?;
    let m = dataset.num_nodes();
    let p = dataset.num_modalities();
    let h = params.hidden_width();
    let ok = cache.embeddings.len() == p
        && cache.pre_activations.len() == p
        && cache.dropout_masks.len() == p
        && cache.embeddings.iter().all(|e| e.shape() == (m, h))
        && cache.attn_coeffs.shape() == (m, p)
        && cache.fused.shape() == (m, h)
        && cache.logits.shape() == (m, dataset.num_classes());
    if ok {
        Ok(())
    } else {
        Err(shape_err(
            "backward",
            "forward cache does not match dataset and parameters".into(),
        ))
    }
}

/// Loss over `mask` and its exact gradient, reusing the intermediates and
/// dropout masks recorded in `cache`.
pub fn backward(
    dataset: &MultiModalDataset,
    params: &ModelParams,
    cache: &ForwardCache,
    mask: &[usize],
) -> Result<(f64, Gradients)> {
    check_cache(dataset, params, cache)?;
    let labels = dataset.labels();
    let loss = masked_cross_entropy(&cache.logits, labels, mask)?;
    let mut grads = Gradients::zeros_like(params);
    let p = dataset.num_modalities();
    let m = dataset.num_nodes();

    // prediction head
    let g_logits = logits_gradient(&cache.logits, labels, mask);
    let d_fused = match params.variant {
        Variant::MlpHead => {
            grads.head_weights[0] = cache.fused.t_matmul(&g_logits)?;
            g_logits.matmul_t(&params.head_weights[0])?
        }
        _ => {
            let mut d_fused = DenseMatrix::zeros(m, params.hidden_width());
            for (i, md) in dataset.modalities().iter().enumerate() {
                // Â is symmetric, so Âᵀ G = Â G
                let ag = spmm(md.norm_adj(), &g_logits)?;
                grads.head_weights[i] = cache.fused.t_matmul(&ag)?;
                d_fused.add_assign(&ag.matmul_t(&params.head_weights[i])?)?;
            }
            d_fused
        }
    };

    // fusion: Z = Σ_i diag(C[:, i]) H_i
    let mut d_embed: Vec<DenseMatrix> = (0..p)
        .map(|i| d_fused.hadamard_broadcast_column(&cache.attn_coeffs.column(i)))
        .collect::<Result<_>>()?;

    if params.variant != Variant::NoAttention {
        // dL/dC[n, i] = <dZ[n, :], H_i[n, :]>
        let mut d_coeff = DenseMatrix::zeros(m, p);
        for n in 0..m {
            for i in 0..p {
                d_coeff.set(n, i, dot(d_fused.row(n), cache.embeddings[i].row(n)));
            }
        }
        // softmax Jacobian, then LeakyReLU, into the scores H_i W_a + b
        let mut d_score = DenseMatrix::zeros(m, p);
        for n in 0..m {
            let c = cache.attn_coeffs.row(n);
            let dc = d_coeff.row(n);
            let inner = dot(c, dc);
            for i in 0..p {
                let slope = if cache.attn_scores.get(n, i) > 0.0 {
                    1.0
                } else {
                    ATTENTION_SLOPE
                };
                d_score.set(n, i, c[i] * (dc[i] - inner) * slope);
            }
        }
        let wa = params.attn_weight.data();
        for i in 0..p {
            let ds = d_score.column(i);
            let emb = &cache.embeddings[i];
            for (n, &g) in ds.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grads.attn_bias += g;
                for (k, (&e, &w)) in emb.row(n).iter().zip(wa).enumerate() {
                    grads.attn_weight.data_mut()[k] += g * e;
                    d_embed[i].row_mut(n)[k] += g * w;
                }
            }
        }
    }

    // GCN layers: H = ReLU(Â (X ∘ M) W)
    for (i, md) in dataset.modalities().iter().enumerate() {
        let pre = &cache.pre_activations[i];
        let mut d_pre = d_embed[i].clone();
        for (d, &z) in d_pre.data_mut().iter_mut().zip(pre.data()) {
            if z <= 0.0 {
                *d = 0.0;
            }
        }
        let a_dpre = spmm(md.norm_adj(), &d_pre)?;
        grads.gcn_weights[i] = match &cache.dropout_masks[i] {
            Some(mask) => md.features().hadamard(mask)?.t_matmul(&a_dpre)?,
            None => md.features().t_matmul(&a_dpre)?,
        };
    }

    Ok((loss, grads))
}

/// Eval-mode loss over `mask`.
pub fn eval_loss(dataset: &MultiModalDataset, params: &ModelParams, mask: &[usize]) -> Result<f64> {
    let cache = forward_eval(dataset, params)?;
    masked_cross_entropy(&cache.logits, dataset.labels(), mask)
}

/// Largest relative disagreement between the analytic gradient and central
/// differences `(f(θ+e) - f(θ-e)) / 2e`, over every parameter coordinate.
/// Both sides run in eval mode. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn finite_difference_check(
    dataset: &MultiModalDataset,
    params: &ModelParams,
    mask: &[usize],
    step: f64,
) -> Result<f64> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step {step} must be positive"
        )));
    }
    let cache = forward_eval(dataset, params)?;
    let (_, grads) = backward(dataset, params, &cache, mask)?;
    let analytic = grads.flatten();

    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let mut flat = 0;
    let lens: Vec<usize> = params.slices().iter().map(|s| s.len()).collect();
    for (t, len) in lens.into_iter().enumerate() {
        for k in 0..len {
            let original = probe.slices()[t][k];
            probe.slices_mut()[t][k] = original + step;
            let plus = eval_loss(dataset, &probe, mask)?;
            probe.slices_mut()[t][k] = original - step;
            let minus = eval_loss(dataset, &probe, mask)?;
            probe.slices_mut()[t][k] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[flat];
            let denom = libm::fabs(a).max(libm::fabs(numeric)).max(1e-8);
            worst = worst.max(libm::fabs(a - numeric) / denom);
            flat += 1;
        }
    }
    Ok(worst)
}

/// Smallest distance of any ReLU or LeakyReLU input to its kink at 0, over
/// the eval-mode forward pass. Attention scores are ignored for the
/// no-attention variant.
pub fn kink_distance(dataset: &MultiModalDataset, params: &ModelParams) -> Result<f64> {
    let cache = forward_eval(dataset, params)?;
    let mut d = f64::INFINITY;
    for pre in &cache.pre_activations {
        for &v in pre.data() {
            d = d.min(libm::fabs(v));
        }
    }
    if params.variant != Variant::NoAttention {
        for &v in cache.attn_scores.data() {
            d = d.min(libm::fabs(v));
        }
    }
    Ok(d)
}

/// Randomly jitters every parameter (by up to `margin`, widening after
/// repeated failures) until no activation
/// input lies within `margin` of a kink, so central differences see a
/// smooth function. Deterministic in `seed`.
pub fn nudge_off_kinks(
    dataset: &MultiModalDataset,
    params: &ModelParams,
    margin: f64,
    seed: u64,
) -> Result<ModelParams> {
    const MAX_TRIES: usize = 10_000;
    let mut rng = seeded(seed);
    let mut current = params.clone();
    let mut radius = margin;
    for attempt in 1..=MAX_TRIES {
        if kink_distance(dataset, &current)? >= margin {
            return Ok(current);
        }
        // activations pinned near zero (e.g. zero weights) need wider jitter
        if attempt % 100 == 0 {
            radius *= 2.0;
        }
        current = params.clone();
        for s in current.slices_mut() {
            for v in s.iter_mut() {
                *v += rng.gen_range(-radius..=radius);
            }
        }
    }
    Err(Error::InvalidParameter(format!(
        "could not move activations {margin} away from kinks"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward, init_params, Mode, ModalityInput, SplitMask};
    use crate::sparse::{add_self_loops, sym_normalize, SparseAdjacency};
    use alloc::vec;

    fn tiny_dataset() -> MultiModalDataset {
        let x1 = DenseMatrix::from_rows(&[
            &[1.0, 0.2, 0.5],
            &[0.3, 1.1, 0.4],
            &[0.9, 0.8, 0.1],
            &[0.2, 0.4, 1.3],
        ])
        .unwrap();
        let x2 = DenseMatrix::from_rows(&[&[0.6, 1.0], &[1.2, 0.1], &[0.5, 0.7], &[0.9, 0.3]]).unwrap();
        let g1 = SparseAdjacency::from_undirected_edges(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let g2 = SparseAdjacency::from_undirected_edges(4, [(0, 2, 1.0), (1, 3, 1.0), (0, 3, 1.0)])
            .unwrap();
        let norm = |g: &SparseAdjacency| sym_normalize(&add_self_loops(g).unwrap()).unwrap();
        MultiModalDataset::new(
            vec![
                ModalityInput::new(x1, norm(&g1)).unwrap(),
                ModalityInput::new(x2, norm(&g2)).unwrap(),
            ],
            vec![0, 1, 0, 1],
            2,
            SplitMask::new(vec![0, 1, 2], vec![3], vec![], 4).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn gradients_match_finite_differences_on_tiny_instance() {
        let ds = tiny_dataset();
        for variant in Variant::ALL {
            let mut params = init_params(&ds.feature_dims(), 3, 2, 4).unwrap();
            params.variant = variant;
            params.attn_bias = 0.3;
            let params = nudge_off_kinks(&ds, &params, 1e-3, 1).unwrap();
            let err = finite_difference_check(&ds, &params, &[0, 1, 2, 3], 1e-5).unwrap();
            assert!(err < 1e-5, "{variant}: {err}");
        }
    }

    #[test]
    fn disjoint_masks_add() {
        let ds = tiny_dataset();
        let params = init_params(&ds.feature_dims(), 3, 2, 2).unwrap();
        let cache = forward_eval(&ds, &params).unwrap();
        let (la, ga) = backward(&ds, &params, &cache, &[0, 2]).unwrap();
        let (lb, gb) = backward(&ds, &params, &cache, &[1, 3]).unwrap();
        let (lu, gu) = backward(&ds, &params, &cache, &[0, 1, 2, 3]).unwrap();
        assert!((la + lb - lu).abs() < 1e-12);
        for ((a, b), u) in ga.flatten().iter().zip(gb.flatten()).zip(gu.flatten()) {
            assert!((a + b - u).abs() < 1e-12);
        }
    }

    #[test]
    fn no_attention_leaves_attention_gradients_zero() {
        let ds = tiny_dataset();
        let mut params = init_params(&ds.feature_dims(), 3, 2, 2).unwrap();
        params.variant = Variant::NoAttention;
        let cache = forward_eval(&ds, &params).unwrap();
        let (_, g) = backward(&ds, &params, &cache, &[0, 1]).unwrap();
        assert!(g.attn_weight.data().iter().all(|&v| v == 0.0));
        assert_eq!(g.attn_bias, 0.0);
    }

    #[test]
    fn mlp_head_only_uses_first_head_weight() {
        let ds = tiny_dataset();
        let mut params = init_params(&ds.feature_dims(), 3, 2, 2).unwrap();
        params.variant = Variant::MlpHead;
        let cache = forward_eval(&ds, &params).unwrap();
        let (_, g) = backward(&ds, &params, &cache, &[0, 1]).unwrap();
        assert!(g.head_weights[1].data().iter().all(|&v| v == 0.0));
        assert!(g.head_weights[0].data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn train_mode_gradient_uses_recorded_dropout() {
        let ds = tiny_dataset();
        let params = init_params(&ds.feature_dims(), 3, 2, 3).unwrap();
        let mut rng = seeded(11);
        let cache = forward(&ds, &params, Mode::Train { dropout: 0.5 }, &mut rng).unwrap();
        let (_, g) = backward(&ds, &params, &cache, &[0, 1, 2]).unwrap();
        assert!(g.is_finite());
        // rows of X whose features were all dropped contribute nothing to dW
        let mask = cache.dropout_masks[0].as_ref().unwrap();
        assert!(mask.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn rejects_zero_step_and_mismatched_cache() {
        let ds = tiny_dataset();
        let params = init_params(&ds.feature_dims(), 3, 2, 2).unwrap();
        assert!(finite_difference_check(&ds, &params, &[0], 0.0).is_err());
        let other = init_params(&ds.feature_dims(), 5, 2, 2).unwrap();
        let cache = forward_eval(&ds, &other).unwrap();
        assert!(backward(&ds, &params, &cache, &[0]).is_err());
    }
}
