//! Weight vectors, combinatorial Laplacians and the Cartesian product.
//!
//! Edge weights of an undirected graph on `p` nodes are stored as a vector of
//! length `p(p-1)/2`. With 1-based node indices `i > j` the weight `W_ij`
//! lives at position `l = i - j + (j - 1)(2p - j)/2`, i.e. the strictly lower
//! triangle is read column by column. Every file format in this crate uses
//! the same ordering.
//!
//! A two-way signal `X` of shape `p1 x p2` is vectorized row-major: node
//! `(i1, i2)` of the product graph has index `i1 * p2 + i2` (0-based).

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of unordered node pairs on `p` nodes.
pub fn num_pairs(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// 0-based position of the pair `(i, j)`, `i > j`, in a weight vector over `p` nodes.
#[inline]
pub fn pair_index(p: usize, i: usize, j: usize) -> usize {
    debug_assert!(i > j && i < p);
    // 1-based: l = i - j + (j - 1)(2p - j)/2 with i, j shifted by one.
    (i - j) + j * (2 * p - j - 1) / 2 - 1
}

/// Inverse of [`num_pairs`]; `None` if `len` is not triangular.
pub fn nodes_for_len(len: usize) -> Option<usize> {
    let p = ((1.0 + (1.0 + 8.0 * len as f64).sqrt()) / 2.0).round() as usize;
    (num_pairs(p) == len).then_some(p.max(1))
}

/// Iterates `(l, i, j)` over all pairs `i > j` in storage order.
pub fn pairs(p: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..p).flat_map(move |j| (j + 1..p).map(move |i| (i, j))).enumerate().map(|(l, (i, j))| (l, i, j))
}

/// Nonnegative edge weights of an undirected graph without self-loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights")]
pub struct WeightVector {
    p: usize,
    w: Vec<f64>,
}

#[derive(Deserialize)]
struct RawWeights {
    p: usize,
    w: Vec<f64>,
}

impl TryFrom<RawWeights> for WeightVector {
    type Error = Error;

    fn try_from(raw: RawWeights) -> Result<Self> {
        WeightVector::new(raw.p, raw.w)
    }
}

impl WeightVector {
    pub fn new(p: usize, w: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("graph must have at least one node".into()));
        }
        if w.len() != num_pairs(p) {
            return Err(Error::DimensionMismatch { expected: num_pairs(p), found: w.len() });
        }
        if let Some((index, &value)) = w.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidWeight { index, value });
        }
        Ok(Self { p, w })
    }

    pub fn zeros(p: usize) -> Self {
        Self { p, w: vec![0.0; num_pairs(p)] }
    }

    /// Unit weight on every pair.
    pub fn complete(p: usize) -> Self {
        Self { p, w: vec![1.0; num_pairs(p)] }
    }

    /// Builds from a weight vector whose length determines `p`.
    pub fn from_vec(w: Vec<f64>) -> Result<Self> {
        let p = nodes_for_len(w.len())
            .ok_or_else(|| Error::InvalidParameter(format!("length {} is not of the form p(p-1)/2", w.len())))?;
        Self::new(p, w)
    }

    /// Builds from `(i, j, weight)` triples with 0-based indices. Repeated pairs accumulate.
    pub fn from_edges(p: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut w = vec![0.0; num_pairs(p)];
        for (a, b, weight) in edges {
            let (i, j) = if a > b { (a, b) } else { (b, a) };
            if i == j || i >= p {
                return Err(Error::InvalidParameter(format!("bad edge ({a}, {b}) for p = {p}")));
            }
            w[pair_index(p, i, j)] += weight;
        }
        Self::new(p, w)
    }

    pub fn nodes(&self) -> usize {
        self.p
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Weight between 0-based nodes `i` and `j` (zero on the diagonal).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => self.w[pair_index(self.p, i, j)],
            std::cmp::Ordering::Less => self.w[pair_index(self.p, j, i)],
        }
    }

    /// Nonzero edges as `(i, j, weight)` with 0-based `i > j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        pairs(self.p).filter(|&(l, _, _)| self.w[l] > 0.0).map(|(l, i, j)| (i, j, self.w[l]))
    }

    pub fn edge_count(&self) -> usize {
        self.w.iter().filter(|&&v| v > 0.0).count()
    }

    pub fn total_weight(&self) -> f64 {
        self.w.iter().sum()
    }

    /// Whether the support graph is connected. A single node counts as connected.
    pub fn is_connected(&self) -> bool {
        let p = self.p;
        let mut adj = vec![Vec::new(); p];
        for (i, j, _) in self.edges() {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; p];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == p
    }

    /// Scales every weight by `factor` (must be nonnegative).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.p, self.w.iter().map(|v| v * factor).collect())
    }

    pub fn laplacian(&self) -> Laplacian {
        laplacian_from_weights(self)
    }
}

/// A dense combinatorial graph Laplacian.
#[derive(Debug, Clone)]
pub struct Laplacian(Mat<f64>);

impl Laplacian {
    /// Wraps `m` after checking it with [`validate_laplacian`] at `tol`.
    pub fn try_from_mat(m: Mat<f64>, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        if !validate_laplacian(m.as_ref(), tol) {
            return Err(Error::InvalidParameter("matrix is not a combinatorial Laplacian".into()));
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> MatRef<'_, f64> {
        self.0.as_ref()
    }

    pub fn into_mat(self) -> Mat<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)]).sum()
    }

    /// Recovers the weight vector (off-diagonal negated, clamped at zero).
    pub fn weights(&self) -> WeightVector {
        project_to_laplacian_weights(self.as_mat()).expect("Laplacian is square")
    }

    pub(crate) fn from_mat_unchecked(m: Mat<f64>) -> Self {
        Self(m)
    }
}

/// The linear map from a weight vector to its Laplacian.
pub fn laplacian_from_weights(w: &WeightVector) -> Laplacian {
    let p = w.p;
    let mut m = Mat::<f64>::zeros(p, p);
    for (l, i, j) in pairs(p) {
        let v = w.w[l];
        m[(i, j)] = -v;
        m[(j, i)] = -v;
        m[(i, i)] += v;
        m[(j, j)] += v;
    }
    Laplacian(m)
}

/// Adjoint of [`laplacian_from_weights`]: `[L* Q]_l = Q_ii - Q_ij - Q_ji + Q_jj`.
pub fn adjoint_on_matrix(q: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if q.nrows() != q.ncols() {
        return Err(Error::NotSquare { rows: q.nrows(), cols: q.ncols() });
    }
    let p = q.nrows();
    Ok(pairs(p).map(|(_, i, j)| q[(i, i)] - q[(i, j)] - q[(j, i)] + q[(j, j)]).collect())
}

/// Weight vector of `G1 □ G2` on `p1 * p2` nodes under row-major pairing.
pub fn product_weights(g1: &WeightVector, g2: &WeightVector) -> WeightVector {
    let (p1, p2) = (g1.p, g2.p);
    let p = p1 * p2;
    let mut w = vec![0.0; num_pairs(p)];
    // Copies of G2 inside each row i1.
    for i1 in 0..p1 {
        for (a, b, v) in g2.edges() {
            w[pair_index(p, i1 * p2 + a, i1 * p2 + b)] = v;
        }
    }
    // Copies of G1 across each column i2.
    for (a, b, v) in g1.edges() {
        for i2 in 0..p2 {
            w[pair_index(p, a * p2 + i2, b * p2 + i2)] = v;
        }
    }
    WeightVector { p, w }
}

/// Dense Kronecker sum `A ⊗ I + I ⊗ B`.
pub fn kronecker_sum(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let (p1, p2) = (a.nrows(), b.nrows());
    let mut m = Mat::<f64>::zeros(p1 * p2, p1 * p2);
    for i1 in 0..p1 {
        for j1 in 0..p1 {
            let v = a[(i1, j1)];
            if v != 0.0 {
                for l in 0..p2 {
                    m[(i1 * p2 + l, j1 * p2 + l)] += v;
                }
            }
        }
        for i2 in 0..p2 {
            for j2 in 0..p2 {
                m[(i1 * p2 + i2, i1 * p2 + j2)] += b[(i2, j2)];
            }
        }
    }
    m
}

/// Frobenius norm of a dense matrix.
pub fn frobenius(m: MatRef<'_, f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s.sqrt()
}

/// Checks symmetry, zero row sums and nonpositive off-diagonals within `tol`.
///
/// The tolerance is applied relative to `max(1, ||M||_F)`.
pub fn validate_laplacian(m: MatRef<'_, f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let p = m.nrows();
    let scale = frobenius(m).max(1.0);
    let tol = tol * scale;
    for i in 0..p {
        let mut row = 0.0;
        for j in 0..p {
            let v = m[(i, j)];
            if !v.is_finite() {
                return false;
            }
            row += v;
            if i != j && (v > tol || (v - m[(j, i)]).abs() > tol) {
                return false;
            }
        }
        if row.abs() > tol || m[(i, i)] < -tol {
            return false;
        }
    }
    true
}

/// `w_l = max(0, -M_ij)` for every `i > j`.
pub fn project_to_laplacian_weights(m: MatRef<'_, f64>) -> Result<WeightVector> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let p = m.nrows();
    let w = pairs(p).map(|(_, i, j)| (-m[(i, j)]).max(0.0)).collect();
    WeightVector::new(p, w)
}

/// The Cartesian product `G1 □ G2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductModel {
    pub g1: WeightVector,
    pub g2: WeightVector,
}

impl ProductModel {
    pub fn new(g1: WeightVector, g2: WeightVector) -> Self {
        Self { g1, g2 }
    }

    pub fn p1(&self) -> usize {
        self.g1.nodes()
    }

    pub fn p2(&self) -> usize {
        self.g2.nodes()
    }

    pub fn nodes(&self) -> usize {
        self.p1() * self.p2()
    }

    /// Row-major product index of the 0-based pair `(i1, i2)`.
    pub fn node_index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.p2() + i2
    }

    pub fn product_weights(&self) -> WeightVector {
        product_weights(&self.g1, &self.g2)
    }

    /// Dense `L1 ⊕ L2`.
    pub fn laplacian(&self) -> Laplacian {
        let l1 = self.g1.laplacian();
        let l2 = self.g2.laplacian();
        Laplacian(kronecker_sum(l1.as_mat(), l2.as_mat()))
    }
}
