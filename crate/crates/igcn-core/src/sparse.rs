//! Symmetric weighted adjacency in compressed sparse row form.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::tensor::DenseMatrix;

/// Symmetric, non-negative weighted graph over `num_nodes` nodes stored as
/// CSR with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseAdjacency {
    /// Graph with no edges.
    pub fn empty(num_nodes: usize) -> Self {
        Self {
            num_nodes,
            row_offsets: vec![0; num_nodes + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(num_nodes: usize) -> Self {
        Self {
            num_nodes,
            row_offsets: (0..=num_nodes).collect(),
            col_indices: (0..num_nodes).collect(),
            values: vec![1.0; num_nodes],
        }
    }

    /// Builds a graph from undirected edges `(a, b, weight)`.
    ///
    /// Both orientations are stored. Repeated pairs (in either orientation)
    /// keep the largest weight. `a == b` is allowed and produces a diagonal
    /// entry.
    pub fn from_undirected_edges(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut triples: Vec<(usize, usize, f64)> = Vec::new();
        for (a, b, w) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::InvalidStructure(format!(
                    "edge ({a},{b}) outside {num_nodes} nodes"
                )));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidStructure(format!(
                    "edge ({a},{b}) has invalid weight {w}"
                )));
            }
            triples.push((a, b, w));
            if a != b {
                triples.push((b, a, w));
            }
        }
        triples.sort_by_key(|t| (t.0, t.1));
        let mut deduped: Vec<(usize, usize, f64)> = Vec::with_capacity(triples.len());
        for t in triples {
            match deduped.last_mut() {
                Some(last) if last.0 == t.0 && last.1 == t.1 => {
                    if t.2 > last.2 {
                        last.2 = t.2;
                    }
                }
                _ => deduped.push(t),
            }
        }
        Ok(Self::from_sorted_triples(num_nodes, &deduped))
    }

    fn from_sorted_triples(num_nodes: usize, triples: &[(usize, usize, f64)]) -> Self {
        let mut row_offsets = vec![0usize; num_nodes + 1];
        for &(r, _, _) in triples {
            row_offsets[r + 1] += 1;
        }
        for i in 0..num_nodes {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self {
            num_nodes,
            row_offsets,
            col_indices: triples.iter().map(|t| t.1).collect(),
            values: triples.iter().map(|t| t.2).collect(),
        }
    }

    /// Wraps raw CSR arrays after checking every structural invariant.
    pub fn from_csr(
        num_nodes: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let adj = Self {
            num_nodes,
            row_offsets,
            col_indices,
            values,
        };
        adj.validate()?;
        Ok(adj)
    }

    /// Checks CSR consistency, sortedness, non-negativity and symmetry.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidStructure(msg));
        if self.row_offsets.len() != self.num_nodes + 1 || self.row_offsets[0] != 0 {
            return bad(format!("row offsets length {}", self.row_offsets.len()));
        }
        if self.col_indices.len() != self.values.len()
            || *self.row_offsets.last().unwrap() != self.values.len()
        {
            return bad(format!("{} stored values", self.values.len()));
        }
        for r in 0..self.num_nodes {
            let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
            if lo > hi {
                return bad(format!("row {r} offsets decrease"));
            }
            let cols = &self.col_indices[lo..hi];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("row {r} columns unsorted or duplicated"));
            }
            for (&c, &v) in cols.iter().zip(&self.values[lo..hi]) {
                if c >= self.num_nodes {
                    return bad(format!("column {c} out of range"));
                }
                if !(v >= 0.0) || !v.is_finite() {
                    return bad(format!("value {v} at ({r},{c})"));
                }
                if self.get(c, r) != Some(v) {
                    return bad(format!("({r},{c}) has no equal mirror entry"));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values stored in row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).ok().map(|i| vals[i])
    }

    /// Number of stored entries off the diagonal.
    pub fn off_diagonal_count(&self) -> usize {
        (0..self.num_nodes)
            .map(|r| self.row(r).0.iter().filter(|&&c| c != r).count())
            .sum()
    }

    /// Undirected edges `(a, b, w)` with `a < b`, in row order.
    pub fn upper_edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for r in 0..self.num_nodes {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if c > r {
                    out.push((r, c, v));
                }
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.num_nodes)
            .map(|r| self.row(r).1.iter().sum())
            .collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.num_nodes, self.num_nodes);
        for r in 0..self.num_nodes {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out.set(r, c, v);
            }
        }
        out
    }

    /// Applies `perm` (new index `i` takes old node `perm[i]`) to both axes.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_nodes {
            return Err(shape_err(
                "permuted",
                format!("{} indices for {} nodes", perm.len(), self.num_nodes),
            ));
        }
        let mut inverse = vec![usize::MAX; self.num_nodes];
        for (new, &old) in perm.iter().enumerate() {
            if old >= self.num_nodes || inverse[old] != usize::MAX {
                return Err(Error::InvalidParameter(format!(
                    "not a permutation at index {new}"
                )));
            }
            inverse[old] = new;
        }
        let mut triples = Vec::with_capacity(self.nnz());
        for r in 0..self.num_nodes {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                triples.push((inverse[r], inverse[c], v));
            }
        }
        triples.sort_by_key(|t| (t.0, t.1));
        Ok(Self::from_sorted_triples(self.num_nodes, &triples))
    }
}

/// Adds a unit self loop to every node.
///
/// Fails when the input already has a diagonal entry.
pub fn add_self_loops(adj: &SparseAdjacency) -> Result<SparseAdjacency> {
    let n = adj.num_nodes;
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(adj.nnz() + n);
    let mut values = Vec::with_capacity(adj.nnz() + n);
    row_offsets.push(0);
    for r in 0..n {
        let (cols, vals) = adj.row(r);
        let split = cols.partition_point(|&c| c < r);
        if cols.get(split) == Some(&r) {
            return Err(Error::DiagonalPresent(r));
        }
        col_indices.extend_from_slice(&cols[..split]);
        values.extend_from_slice(&vals[..split]);
        col_indices.push(r);
        values.push(1.0);
        col_indices.extend_from_slice(&cols[split..]);
        values.extend_from_slice(&vals[split..]);
        row_offsets.push(col_indices.len());
    }
    Ok(SparseAdjacency {
        num_nodes: n,
        row_offsets,
        col_indices,
        values,
    })
}

/// `D^{-1/2} A D^{-1/2}` with `D` the row sums of `adj`.
pub fn sym_normalize(adj: &SparseAdjacency) -> Result<SparseAdjacency> {
    let deg = adj.row_sums();
    if let Some(r) = deg.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::ZeroDegree(r));
    }
    let mut values = Vec::with_capacity(adj.nnz());
    for r in 0..adj.num_nodes {
        let (cols, vals) = adj.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            // deg[r] * deg[c] commutes exactly, so mirrored entries stay bitwise equal
            values.push(v / libm::sqrt(deg[r] * deg[c]));
        }
    }
    Ok(SparseAdjacency {
        num_nodes: adj.num_nodes,
        row_offsets: adj.row_offsets.clone(),
        col_indices: adj.col_indices.clone(),
        values,
    })
}

/// Sparse-dense product `adj · x`.
pub fn spmm(adj: &SparseAdjacency, x: &DenseMatrix) -> Result<DenseMatrix> {
    if adj.num_nodes != x.rows() {
        return Err(shape_err(
            "spmm",
            format!("{} nodes · {:?}", adj.num_nodes, x.shape()),
        ));
    }
    let n = x.cols();
    let mut out = DenseMatrix::zeros(adj.num_nodes, n);
    for r in 0..adj.num_nodes {
        let (cols, vals) = adj.row(r);
        let out_row = out.row_mut(r);
        for (&c, &v) in cols.iter().zip(vals) {
            for (o, &b) in out_row.iter_mut().zip(x.row(c)) {
                *o += v * b;
            }
        }
    }
    Ok(out)
}
