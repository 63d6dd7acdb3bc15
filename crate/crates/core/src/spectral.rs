//! Factor eigendecompositions and the spectral identities of the Kronecker sum.
//!
//! `L1 ⊕ L2` has eigenvectors `U1 ⊗ U2` and eigenvalues `λ1_i + λ2_j`, so every
//! quantity the solver needs from the product Laplacian (its pseudo
//! log-determinant and the partial traces of its pseudo-inverse) can be read
//! off the two factor decompositions.

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self_adjoint_evd, self_adjoint_evd_scratch, ComputeEigenvectors};
use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef, Par, Side};

use crate::error::{Error, GraphId, Result};
use crate::graph::{kronecker_sum, project_to_laplacian_weights, Laplacian};

/// Relative threshold below which an eigenvalue counts as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigTolerance {
    relative: f64,
}

impl Default for EigTolerance {
    fn default() -> Self {
        Self { relative: 1e-9 }
    }
}

impl EigTolerance {
    pub fn new(relative: f64) -> Result<Self> {
        if relative > 0.0 && relative.is_finite() {
            Ok(Self { relative })
        } else {
            Err(Error::InvalidParameter(format!("zero tolerance must be positive, got {relative}")))
        }
    }

    pub fn relative(&self) -> f64 {
        self.relative
    }

    /// Absolute cut-off for a spectrum whose largest eigenvalue is `lambda_max`.
    pub fn zero_tol(&self, lambda_max: f64) -> f64 {
        self.relative * lambda_max.max(1.0)
    }
}

/// Full eigendecomposition `L = U diag(λ) Uᵀ` of a factor Laplacian, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct FactorEigen {
    vectors: Mat<f64>,
    values: Vec<f64>,
}

impl FactorEigen {
    pub fn vectors(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `U diag(f(λ)) Uᵀ`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Mat<f64> {
        let diag: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        self.reconstruct_with(&diag)
    }

    pub(crate) fn reconstruct_with(&self, diag: &[f64]) -> Mat<f64> {
        let u = self.vectors.as_ref();
        let scaled = Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * diag[j]);
        &scaled * u.transpose()
    }

    /// `U diag(λ) Uᵀ`.
    pub fn reconstruct(&self) -> Mat<f64> {
        self.reconstruct_with(&self.values)
    }
}

/// Symmetric eigendecomposition of a factor Laplacian.
pub fn factor_eigendecomposition(l: &Laplacian) -> Result<FactorEigen> {
    decompose_symmetric(l.as_mat())
}

pub(crate) fn decompose_symmetric(m: MatRef<'_, f64>) -> Result<FactorEigen> {
    let p = m.nrows();
    for j in 0..p {
        for i in 0..p {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite("Laplacian"));
            }
        }
    }
    // Sequential: factors are small and callers parallelize across trials.
    let mut u = Mat::<f64>::zeros(p, p);
    let mut s = Diag::<f64>::zeros(p);
    let scratch = self_adjoint_evd_scratch::<f64>(p, ComputeEigenvectors::Yes, Par::Seq, Default::default());
    self_adjoint_evd(
        m,
        s.as_mut(),
        Some(u.as_mut()),
        Par::Seq,
        MemStack::new(&mut MemBuffer::new(scratch)),
        Default::default(),
    )
    .map_err(|_| Error::DecompositionFailed)?;
    let s = s.column_vector();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    // Round-off can push the null eigenvalue slightly negative.
    let values = order.iter().map(|&k| s[k].max(0.0)).collect();
    let vectors = Mat::from_fn(p, p, |i, j| u[(i, order[j])]);
    Ok(FactorEigen { vectors, values })
}

/// All pairwise sums `λ1_i + λ2_j`, indexed `i * p2 + j`.
pub fn product_spectrum(e1: &FactorEigen, e2: &FactorEigen) -> Vec<f64> {
    e1.values.iter().flat_map(|&a| e2.values.iter().map(move |&b| a + b)).collect()
}

/// Checks that exactly one pairwise eigenvalue sum vanishes and returns the cut-off used.
pub(crate) fn product_zero_tol(e1: &FactorEigen, e2: &FactorEigen, tol: EigTolerance) -> Result<f64> {
    if e1.dim() * e2.dim() < 2 {
        return Err(Error::DisconnectedGraph(GraphId::Product));
    }
    let cut = tol.zero_tol(e1.max_value() + e2.max_value());
    let zeros = e1.values.iter().map(|&a| e2.values.iter().filter(|&&b| a + b <= cut).count()).sum::<usize>();
    if zeros > 1 {
        let which = if e1.dim() > 1 && e1.values[1] <= cut {
            GraphId::First
        } else if e2.dim() > 1 && e2.values[1] <= cut {
            GraphId::Second
        } else {
            GraphId::Product
        };
        return Err(Error::DisconnectedGraph(which));
    }
    Ok(cut)
}

/// `log det†(L1 ⊕ L2)`: the sum of `log(λ1_i + λ2_j)` over the nonzero pairs.
pub fn product_pseudo_logdet(e1: &FactorEigen, e2: &FactorEigen, tol: EigTolerance) -> Result<f64> {
    let cut = product_zero_tol(e1, e2, tol)?;
    Ok(product_spectrum(e1, e2).into_iter().filter(|&v| v > cut).map(f64::ln).sum())
}

/// Partial traces of `(L1 ⊕ L2)†` over each mode, computed on the factor scale.
///
/// `H1 = U1 [Σ_l (Λ1 + λ2_l I)†] U1ᵀ` and symmetrically for `H2`. Only the single
/// zero pair `λ1_0 + λ2_0` is dropped.
pub fn compute_h_matrices(e1: &FactorEigen, e2: &FactorEigen, tol: EigTolerance) -> Result<(Mat<f64>, Mat<f64>)> {
    let cut = product_zero_tol(e1, e2, tol)?;
    let inv = |s: f64| if s > cut { 1.0 / s } else { 0.0 };
    let d1: Vec<f64> = e1.values.iter().map(|&a| e2.values.iter().map(|&b| inv(a + b)).sum()).collect();
    let d2: Vec<f64> = e2.values.iter().map(|&b| e1.values.iter().map(|&a| inv(a + b)).sum()).collect();
    Ok((e1.reconstruct_with(&d1), e2.reconstruct_with(&d2)))
}

/// Reference implementation of the `H` matrices through the dense
/// `p1 p2 x p1 p2` pseudo-inverse `(L + J)⁻¹ - J`, `J = 11ᵀ/p`.
///
/// Cost is cubic in the product size; intended as an oracle.
pub fn naive_h_matrices(l1: &Laplacian, l2: &Laplacian) -> Result<(Mat<f64>, Mat<f64>)> {
    let (p1, p2) = (l1.dim(), l2.dim());
    let p = p1 * p2;
    if p < 2 {
        return Err(Error::DisconnectedGraph(GraphId::Product));
    }
    for (l, id) in [(l1, GraphId::First), (l2, GraphId::Second)] {
        let w = project_to_laplacian_weights(l.as_mat())?;
        if !w.is_connected() {
            return Err(Error::DisconnectedGraph(id));
        }
    }
    let mut m = kronecker_sum(l1.as_mat(), l2.as_mat());
    let j = 1.0 / p as f64;
    for c in 0..p {
        for r in 0..p {
            m[(r, c)] += j;
        }
    }
    let llt = m.llt(Side::Lower).map_err(|_| Error::DisconnectedGraph(GraphId::Product))?;
    let mut pinv = llt.inverse();
    for c in 0..p {
        for r in 0..p {
            pinv[(r, c)] -= j;
        }
    }
    let h1 = Mat::from_fn(p1, p1, |a, b| (0..p2).map(|l| pinv[(a * p2 + l, b * p2 + l)]).sum());
    let h2 = Mat::from_fn(p2, p2, |a, b| (0..p1).map(|l| pinv[(l * p2 + a, l * p2 + b)]).sum());
    Ok((h1, h2))
}
