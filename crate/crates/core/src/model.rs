//! Two-way signals on a product graph: IGMRF sampling and sufficient statistics.

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Laplacian, ProductModel};
use crate::spectral::{factor_eigendecomposition, product_zero_tol, EigTolerance};

/// `n` observations of a `p1 x p2` signal.
///
/// Sample `k` vectorizes row-major: entry `(i1, i2)` maps to `i1 * p2 + i2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet {
    p1: usize,
    p2: usize,
    samples: Vec<Mat<f64>>,
}

impl SignalSet {
    pub fn new(p1: usize, p2: usize, samples: Vec<Mat<f64>>) -> Result<Self> {
        if p1 == 0 || p2 == 0 {
            return Err(Error::InvalidParameter("signal dimensions must be positive".into()));
        }
        for x in &samples {
            if x.nrows() != p1 {
                return Err(Error::DimensionMismatch { expected: p1, found: x.nrows() });
            }
            if x.ncols() != p2 {
                return Err(Error::DimensionMismatch { expected: p2, found: x.ncols() });
            }
            for j in 0..p2 {
                for i in 0..p1 {
                    if !x[(i, j)].is_finite() {
                        return Err(Error::NonFinite("signal"));
                    }
                }
            }
        }
        Ok(Self { p1, p2, samples })
    }

    /// Builds from row-major vectorized samples.
    pub fn from_vectors(p1: usize, p2: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let samples = rows
            .iter()
            .map(|r| {
                if r.len() != p1 * p2 {
                    return Err(Error::DimensionMismatch { expected: p1 * p2, found: r.len() });
                }
                Ok(Mat::from_fn(p1, p2, |i, j| r[i * p2 + j]))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(p1, p2, samples)
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Mat<f64>] {
        &self.samples
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [Mat<f64>] {
        &mut self.samples
    }

    /// Row-major vectorization of sample `k`.
    pub fn vector(&self, k: usize) -> Vec<f64> {
        let x = &self.samples[k];
        (0..self.p1).flat_map(|i| (0..self.p2).map(move |j| x[(i, j)])).collect()
    }

    /// Removes the per-row mean, then the per-column mean, both pooled over samples.
    pub fn center_modes(&self) -> SignalSet {
        let (p1, p2) = (self.p1, self.p2);
        let denom1 = (self.len() * p2).max(1) as f64;
        let row_mean: Vec<f64> = (0..p1)
            .map(|i| self.samples.iter().map(|x| (0..p2).map(|j| x[(i, j)]).sum::<f64>()).sum::<f64>() / denom1)
            .collect();
        let mut samples: Vec<Mat<f64>> =
            self.samples.iter().map(|x| Mat::from_fn(p1, p2, |i, j| x[(i, j)] - row_mean[i])).collect();
        let denom2 = (self.len() * p1).max(1) as f64;
        let col_mean: Vec<f64> = (0..p2)
            .map(|j| samples.iter().map(|x| (0..p1).map(|i| x[(i, j)]).sum::<f64>()).sum::<f64>() / denom2)
            .collect();
        for x in &mut samples {
            for j in 0..p2 {
                for i in 0..p1 {
                    x[(i, j)] -= col_mean[j];
                }
            }
        }
        SignalSet { p1, p2, samples }
    }
}

/// Per-mode sample covariances `S1 = (1/n) Σ X Xᵀ` and `S2 = (1/n) Σ Xᵀ X`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCovariances {
    pub s1: Mat<f64>,
    pub s2: Mat<f64>,
}

impl ModeCovariances {
    pub fn new(s1: Mat<f64>, s2: Mat<f64>) -> Result<Self> {
        for s in [&s1, &s2] {
            if s.nrows() != s.ncols() {
                return Err(Error::NotSquare { rows: s.nrows(), cols: s.ncols() });
            }
        }
        Ok(Self { s1, s2 })
    }

    pub fn p1(&self) -> usize {
        self.s1.nrows()
    }

    pub fn p2(&self) -> usize {
        self.s2.nrows()
    }

    /// `Tr(L1 S1) + Tr(L2 S2)`, equal to `Tr((L1 ⊕ L2) S)`.
    pub fn dirichlet_energy(&self, l1: &Laplacian, l2: &Laplacian) -> f64 {
        trace_of_product(l1.as_mat(), self.s1.as_ref()) + trace_of_product(l2.as_mat(), self.s2.as_ref())
    }
}

/// `Tr(A B)` for square matrices of equal size.
pub fn trace_of_product(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    let p = a.nrows();
    let mut t = 0.0;
    for i in 0..p {
        for k in 0..p {
            t += a[(i, k)] * b[(k, i)];
        }
    }
    t
}

pub fn mode_covariances(signals: &SignalSet) -> Result<ModeCovariances> {
    if signals.is_empty() {
        return Err(Error::EmptySignalSet);
    }
    let (p1, p2) = (signals.p1, signals.p2);
    let mut s1 = Mat::<f64>::zeros(p1, p1);
    let mut s2 = Mat::<f64>::zeros(p2, p2);
    for x in &signals.samples {
        s1 += x * x.transpose();
        s2 += x.transpose() * x;
    }
    let inv_n = 1.0 / signals.len() as f64;
    s1 *= faer::Scale(inv_n);
    s2 *= faer::Scale(inv_n);
    Ok(ModeCovariances { s1, s2 })
}

/// Sample covariance of the row-major vectorized signals (`p1 p2 x p1 p2`).
pub fn full_scm(signals: &SignalSet) -> Result<Mat<f64>> {
    if signals.is_empty() {
        return Err(Error::EmptySignalSet);
    }
    let p = signals.p1 * signals.p2;
    let mut s = Mat::<f64>::zeros(p, p);
    for k in 0..signals.len() {
        let v = signals.vector(k);
        for c in 0..p {
            for r in 0..p {
                s[(r, c)] += v[r] * v[c];
            }
        }
    }
    s *= faer::Scale(1.0 / signals.len() as f64);
    Ok(s)
}

/// Draws `n` samples of `N(0, (L1 ⊕ L2)†)` through the low-pass filter `√(L†)`.
///
/// With `L1 = U1 Λ1 U1ᵀ`, `L2 = U2 Λ2 U2ᵀ`, a sample is `X = U1 (Z ∘ D) U2ᵀ`
/// where `Z` is standard normal and `D_ij = (λ1_i + λ2_j)^{-1/2}`, zero on the
/// null pair. Sample `k` draws from ChaCha8 seeded with `seed` on stream `k`,
/// so output is independent of the thread count.
pub fn sample_igmrf(model: &ProductModel, n: usize, seed: u64) -> Result<SignalSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let e1 = factor_eigendecomposition(&model.g1.laplacian())?;
    let e2 = factor_eigendecomposition(&model.g2.laplacian())?;
    let cut = product_zero_tol(&e1, &e2, EigTolerance::default())?;
    let (p1, p2) = (model.p1(), model.p2());
    let scale = Mat::from_fn(p1, p2, |i, j| {
        let s = e1.values()[i] + e2.values()[j];
        if s > cut {
            s.sqrt().recip()
        } else {
            0.0
        }
    });
    let (u1, u2) = (e1.vectors(), e2.vectors());
    let samples = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let z = Mat::from_fn(p1, p2, |i, j| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * scale[(i, j)]
            });
            u1 * &z * u2.transpose()
        })
        .collect();
    Ok(SignalSet { p1, p2, samples })
}
