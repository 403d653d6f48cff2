//! Similarity-network construction.
//!
//! Each modality gets its own graph: nodes are connected when the cosine
//! similarity of their feature rows reaches a threshold `epsilon`, and
//! `epsilon` is chosen as the largest value that gives an average of at least
//! `k` neighbours per node.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sparse::{add_self_loops, SparseAdjacency};
use crate::tensor::{dot, DenseMatrix};

/// Symmetric pairwise cosine similarities with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    size: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Wraps a row-major `size × size` buffer, forcing the diagonal to zero
    /// and checking symmetry and range.
    pub fn from_values(size: usize, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::InvalidParameter(alloc::format!(
                "{} similarity values for size {size}",
                values.len()
            )));
        }
        for q in 0..size {
            values[q * size + q] = 0.0;
            for w in 0..q {
                let v = values[q * size + w];
                if v != values[w * size + q] || !(-1.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParameter(alloc::format!(
                        "similarity ({q},{w}) = {v} is asymmetric or outside [-1,1]"
                    )));
                }
            }
        }
        Ok(Self { size, values })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, q: usize, w: usize) -> f64 {
        self.values[q * self.size + w]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Similarities of all unordered pairs `q < w`.
    pub fn upper_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.size * self.size.saturating_sub(1) / 2);
        for q in 0..self.size {
            for w in q + 1..self.size {
                out.push(self.get(q, w));
            }
        }
        out
    }
}

/// Outcome of threshold selection for one modality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    pub epsilon: f64,
    pub achieved_avg_degree: f64,
    pub requested_k: f64,
}

/// Pairwise cosine similarity of the rows of `x`. Rows with zero norm are
/// given similarity 0 against every other row.
pub fn cosine_similarity_matrix(x: &DenseMatrix) -> Result<SimilarityMatrix> {
    let m = x.rows();
    if m < 2 {
        return Err(Error::TooFewNodes { need: 2, got: m });
    }
    let norms: Vec<f64> = (0..m).map(|r| libm::sqrt(dot(x.row(r), x.row(r)))).collect();
    let mut values = vec![0.0; m * m];
    for q in 0..m {
        for w in q + 1..m {
            let denom = norms[q] * norms[w];
            let s = if denom > 0.0 {
                (dot(x.row(q), x.row(w)) / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            values[q * m + w] = s;
            values[w * m + q] = s;
        }
    }
    Ok(SimilarityMatrix { size: m, values })
}

/// Picks the largest `epsilon` among the observed similarities such that the
/// number of ordered pairs `(q, w), q != w` with similarity `>= epsilon`,
/// divided by `m`, is at least `k`. Every pair tied at `epsilon` is kept.
pub fn select_threshold(s: &SimilarityMatrix, k: f64) -> Result<ThresholdReport> {
    let m = s.size();
    let max_k = m.saturating_sub(1) as f64;
    if !(k > 0.0 && k <= max_k) {
        return Err(Error::KOutOfRange { k, max: max_k });
    }
    let mut pairs = s.upper_values();
    pairs.sort_by(|a, b| b.total_cmp(a));
    let mf = m as f64;
    let mut i = 0;
    while i < pairs.len() {
        let value = pairs[i];
        while i < pairs.len() && pairs[i] == value {
            i += 1;
        }
        // each unordered pair counts twice in the ordered-pair average
        let avg = (2 * i) as f64 / mf;
        if avg >= k {
            return Ok(ThresholdReport {
                epsilon: value,
                achieved_avg_degree: avg,
                requested_k: k,
            });
        }
    }
    unreachable!("k <= m - 1 is always met by the complete graph")
}

/// Binary similarity network with unit self loops.
///
/// Edge `(q, w)` is present iff `q != w` and `cos(x_q, x_w) >= epsilon`. The
/// caller normalizes the result with [`crate::sparse::sym_normalize`].
pub fn build_similarity_network(
    x: &DenseMatrix,
    k: f64,
) -> Result<(SparseAdjacency, ThresholdReport)> {
    let s = cosine_similarity_matrix(x)?;
    let report = select_threshold(&s, k)?;
    let edges = threshold_edges(&s, report.epsilon);
    let adj = SparseAdjacency::from_undirected_edges(s.size(), edges)?;
    Ok((add_self_loops(&adj)?, report))
}

/// Unordered pairs whose similarity reaches `epsilon`, as unit-weight edges.
pub fn threshold_edges(s: &SimilarityMatrix, epsilon: f64) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::new();
    for q in 0..s.size() {
        for w in q + 1..s.size() {
            if s.get(q, w) >= epsilon {
                edges.push((q, w, 1.0));
            }
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim3(a: f64, b: f64, c: f64) -> SimilarityMatrix {
        SimilarityMatrix::from_values(3, vec![0.0, a, b, a, 0.0, c, b, c, 0.0]).unwrap()
    }

    /// Decrement loop from the threshold procedure, with `counter` computed
    /// by direct enumeration.
    fn naive_loop(s: &SimilarityMatrix, k: f64) -> f64 {
        let m = s.size();
        let mut eps = 1.0;
        loop {
            let mut count = 0usize;
            for q in 0..m {
                for w in 0..m {
                    if q != w && s.get(q, w) >= eps {
                        count += 1;
                    }
                }
            }
            if count as f64 / m as f64 >= k {
                return eps;
            }
            eps -= 1e-6;
        }
    }

    #[test]
    fn cosine_examples() {
        let s = cosine_similarity_matrix(
            &DenseMatrix::from_rows(&[&[1.0, 2.0], &[1.0, 2.0]]).unwrap(),
        )
        .unwrap();
        assert!((s.get(0, 1) - 1.0).abs() < 1e-15);

        let s = cosine_similarity_matrix(
            &DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(s.get(0, 1), 0.0);

        let s = cosine_similarity_matrix(
            &DenseMatrix::from_rows(&[&[1.0, 0.0], &[1.0, 1.0]]).unwrap(),
        )
        .unwrap();
        assert!((s.get(0, 1) - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(s.get(0, 0), 0.0);
    }

    #[test]
    fn zero_norm_rows_have_zero_similarity() {
        let s = cosine_similarity_matrix(
            &DenseMatrix::from_rows(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.get(2, 0), 0.0);
    }

    #[test]
    fn cosine_needs_two_rows() {
        assert!(cosine_similarity_matrix(&DenseMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn threshold_three_node_example() {
        let s = sim3(0.9, 0.5, 0.2);
        let r = select_threshold(&s, 2.0).unwrap();
        let oracle = naive_loop(&s, 2.0);
        // the loop lands within one decrement below 0.2
        assert!(oracle <= 0.2 && oracle > 0.2 - 1e-6);
        assert_eq!(r.epsilon, 0.2);
        assert_eq!(r.achieved_avg_degree, 2.0);
        assert_eq!(r.requested_k, 2.0);
    }

    #[test]
    fn threshold_small_k_keeps_strongest_pair() {
        let s = sim3(0.9, 0.5, 0.2);
        let r = select_threshold(&s, 0.5).unwrap();
        assert_eq!(r.epsilon, 0.9);
        assert!((r.achieved_avg_degree - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_full_k_is_minimum() {
        let r = select_threshold(&sim3(0.9, -0.4, 0.2), 2.0).unwrap();
        assert_eq!(r.epsilon, -0.4);
    }

    #[test]
    fn threshold_all_ties_keeps_every_edge() {
        for k in [0.1, 1.0, 1.7, 2.0] {
            let r = select_threshold(&sim3(0.3, 0.3, 0.3), k).unwrap();
            assert_eq!(r.epsilon, 0.3);
            assert_eq!(r.achieved_avg_degree, 2.0);
        }
    }

    #[test]
    fn threshold_rejects_bad_k() {
        let s = sim3(0.9, 0.5, 0.2);
        assert!(select_threshold(&s, 0.0).is_err());
        assert!(select_threshold(&s, 2.5).is_err());
        assert!(select_threshold(&s, f64::NAN).is_err());
    }

    #[test]
    fn build_three_node_example() {
        // rows chosen so the similarities are all distinct
        let x = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.8, 0.6], &[0.0, 1.0]]).unwrap();
        let (adj, r) = build_similarity_network(&x, 2.0).unwrap();
        assert_eq!(r.epsilon, 0.0);
        assert_eq!(adj.nnz(), 9);
        assert!(adj.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn identical_rows_are_linked_first() {
        let x = DenseMatrix::from_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let (adj, r) = build_similarity_network(&x, 0.4).unwrap();
        assert_eq!(r.epsilon, 1.0);
        assert_eq!(adj.off_diagonal_count(), 2);
        assert_eq!(adj.get(2, 3), Some(1.0));
    }
}
