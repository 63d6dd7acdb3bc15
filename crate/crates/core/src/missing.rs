//! Joint graph learning and imputation under structural missingness (MWGL-Missing).
//!
//! A node `(i1, i2)` of the product graph is either observed in every sample
//! or in none. Missing entries start from a row/column average and are then
//! refined before every gradient step by one pass of the Tikhonov filters
//! `(βL1 + I)⁻¹` (along mode 1) and `(βL2 + I)⁻¹` (along mode 2) built from the
//! current factor estimates. Observed entries are never touched.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightVector;
use crate::model::{mode_covariances, ModeCovariances, SignalSet};
use crate::solver::{initialize_weights, run_pgd, SolveResult, SolverConfig, Statistics, StatisticsSource};
use crate::spectral::{factor_eigendecomposition, FactorEigen};

/// The set of observed nodes; its complement is missing in every sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    p1: usize,
    p2: usize,
    missing: Vec<bool>,
}

impl ObservationMask {
    /// Builds a mask from 0-based missing pairs.
    pub fn from_missing(p1: usize, p2: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut missing = vec![false; p1 * p2];
        for (i1, i2) in pairs {
            if i1 >= p1 || i2 >= p2 {
                return Err(Error::InvalidMask(format!("pair ({i1}, {i2}) outside {p1}x{p2}")));
            }
            missing[i1 * p2 + i2] = true;
        }
        let mask = Self { p1, p2, missing };
        mask.check()?;
        Ok(mask)
    }

    /// A mask with every node observed.
    pub fn complete(p1: usize, p2: usize) -> Self {
        Self { p1, p2, missing: vec![false; p1 * p2] }
    }

    fn check(&self) -> Result<()> {
        if self.missing.iter().all(|&m| m) {
            return Err(Error::InvalidMask("no observed node".into()));
        }
        let rows_ok = (0..self.p1).all(|i| (0..self.p2).any(|j| !self.is_missing(i, j)));
        let cols_ok = (0..self.p2).all(|j| (0..self.p1).any(|i| !self.is_missing(i, j)));
        if !(rows_ok || cols_ok) {
            return Err(Error::InvalidMask("every row or every column needs at least one observed node".into()));
        }
        Ok(())
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    pub fn is_missing(&self, i1: usize, i2: usize) -> bool {
        self.missing[i1 * self.p2 + i2]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    /// Missing pairs in row-major order, 0-based.
    pub fn missing_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.p1).flat_map(|i| (0..self.p2).map(move |j| (i, j))).filter(|&(i, j)| self.is_missing(i, j)).collect()
    }

    /// Rows without any missing node.
    pub fn clean_rows(&self) -> Vec<usize> {
        (0..self.p1).filter(|&i| (0..self.p2).all(|j| !self.is_missing(i, j))).collect()
    }

    /// Columns without any missing node.
    pub fn clean_cols(&self) -> Vec<usize> {
        (0..self.p2).filter(|&j| (0..self.p1).all(|i| !self.is_missing(i, j))).collect()
    }

    fn check_signals(&self, signals: &SignalSet) -> Result<()> {
        if signals.p1() != self.p1 {
            return Err(Error::DimensionMismatch { expected: self.p1, found: signals.p1() });
        }
        if signals.p2() != self.p2 {
            return Err(Error::DimensionMismatch { expected: self.p2, found: signals.p2() });
        }
        Ok(())
    }
}

/// How [`structural_mask`] lays out missing nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPattern {
    /// Uniformly random nodes, resampled until the mask is valid.
    RandomNodes,
    /// The leading `round(p1 √f) x round(p2 √f)` block.
    Block,
}

/// Parameters of a synthetic structural mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub fraction: f64,
    pub pattern: MaskPattern,
    #[serde(default)]
    pub seed: u64,
}

/// Generates a structural mask removing about `fraction` of the `p1 p2` nodes.
pub fn structural_mask(p1: usize, p2: usize, spec: &MaskSpec) -> Result<ObservationMask> {
    if !(0.0..1.0).contains(&spec.fraction) {
        return Err(Error::InvalidParameter(format!("mask fraction {} not in [0, 1)", spec.fraction)));
    }
    let p = p1 * p2;
    match spec.pattern {
        MaskPattern::RandomNodes => {
            let count = (spec.fraction * p as f64).round() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            for _ in 0..100 {
                let picks = sample(&mut rng, p, count);
                if let Ok(mask) = ObservationMask::from_missing(p1, p2, picks.iter().map(|k| (k / p2, k % p2))) {
                    return Ok(mask);
                }
            }
            Err(Error::InvalidMask("could not draw a valid random mask in 100 attempts".into()))
        }
        MaskPattern::Block => {
            let f = spec.fraction.sqrt();
            let rows = (p1 as f64 * f).round() as usize;
            let cols = (p2 as f64 * f).round() as usize;
            ObservationMask::from_missing(p1, p2, (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))))
        }
    }
}

/// Builds a signal set from vectors that may hold anything (e.g. NaN) at missing nodes.
///
/// Missing positions are zero-filled; observed positions must be finite.
pub fn signals_with_mask(rows: &[Vec<f64>], mask: &ObservationMask) -> Result<SignalSet> {
    let (p1, p2) = (mask.p1, mask.p2);
    let rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            if r.len() != p1 * p2 {
                return Err(Error::DimensionMismatch { expected: p1 * p2, found: r.len() });
            }
            Ok(r.iter().zip(&mask.missing).map(|(&v, &m)| if m { 0.0 } else { v }).collect())
        })
        .collect::<Result<_>>()?;
    SignalSet::from_vectors(p1, p2, &rows)
}

/// Fills each missing node with the mean of the observed nodes sharing its row or column.
pub fn initial_impute(signals: &SignalSet, mask: &ObservationMask) -> Result<SignalSet> {
    mask.check_signals(signals)?;
    let mut neighborhoods = Vec::new();
    for (r1, r2) in mask.missing_pairs() {
        let mut nb: Vec<(usize, usize)> = (0..mask.p2).filter(|&j| !mask.is_missing(r1, j)).map(|j| (r1, j)).collect();
        nb.extend((0..mask.p1).filter(|&i| !mask.is_missing(i, r2)).map(|i| (i, r2)));
        if nb.is_empty() {
            return Err(Error::EmptyNeighborhood { i1: r1, i2: r2 });
        }
        neighborhoods.push(((r1, r2), nb));
    }
    let mut out = signals.clone();
    for x in out.samples_mut() {
        for ((r1, r2), nb) in &neighborhoods {
            x[(*r1, *r2)] = nb.iter().map(|&(i, j)| x[(i, j)]).sum::<f64>() / nb.len() as f64;
        }
    }
    Ok(out)
}

/// Mode covariances restricted to the fully observed columns (for `S1`) and rows (for `S2`).
pub fn masked_mode_covariances(signals: &SignalSet, mask: &ObservationMask) -> Result<ModeCovariances> {
    mask.check_signals(signals)?;
    if !mask.has_missing() {
        return mode_covariances(signals);
    }
    if signals.is_empty() {
        return Err(Error::EmptySignalSet);
    }
    let cols = mask.clean_cols();
    let rows = mask.clean_rows();
    if cols.is_empty() || rows.is_empty() {
        return Err(Error::NoCleanFiber);
    }
    let (p1, p2) = (mask.p1, mask.p2);
    let mut s1 = Mat::<f64>::zeros(p1, p1);
    let mut s2 = Mat::<f64>::zeros(p2, p2);
    for x in signals.samples() {
        let xc = Mat::from_fn(p1, cols.len(), |i, c| x[(i, cols[c])]);
        let xr = Mat::from_fn(rows.len(), p2, |r, j| x[(rows[r], j)]);
        s1 += &xc * xc.transpose();
        s2 += xr.transpose() * &xr;
    }
    let inv_n = faer::Scale(1.0 / signals.len() as f64);
    s1 *= inv_n;
    s2 *= inv_n;
    ModeCovariances::new(s1, s2)
}

/// The pair of low-pass filters `(βL1 + I)⁻¹`, `(βL2 + I)⁻¹`.
struct TikhonovFilters {
    f1: Mat<f64>,
    f2: Mat<f64>,
}

impl TikhonovFilters {
    fn new(e1: &FactorEigen, e2: &FactorEigen, beta: f64) -> Self {
        let f = |v: f64| 1.0 / (beta * v + 1.0);
        Self { f1: e1.spectral_map(f), f2: e2.spectral_map(f) }
    }

    fn filter(&self, x: &Mat<f64>) -> Mat<f64> {
        &self.f1 * x * &self.f2
    }

    /// Filters every sample and writes back only the missing nodes.
    fn apply(&self, signals: &mut SignalSet, mask: &ObservationMask) {
        let missing = mask.missing_pairs();
        for x in signals.samples_mut() {
            let filtered = self.filter(x);
            for &(i, j) in &missing {
                x[(i, j)] = filtered[(i, j)];
            }
        }
    }
}

fn check_factors(p1: usize, p2: usize, g1: &WeightVector, g2: &WeightVector, beta: f64) -> Result<()> {
    if g1.nodes() != p1 {
        return Err(Error::DimensionMismatch { expected: p1, found: g1.nodes() });
    }
    if g2.nodes() != p2 {
        return Err(Error::DimensionMismatch { expected: p2, found: g2.nodes() });
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta = {beta}")));
    }
    Ok(())
}

/// `(βL1 + I)⁻¹ X (βL2 + I)⁻¹` applied to every entry of every sample.
pub fn tikhonov_filter(signals: &SignalSet, g1: &WeightVector, g2: &WeightVector, beta: f64) -> Result<SignalSet> {
    check_factors(signals.p1(), signals.p2(), g1, g2, beta)?;
    let e1 = factor_eigendecomposition(&g1.laplacian())?;
    let e2 = factor_eigendecomposition(&g2.laplacian())?;
    let filters = TikhonovFilters::new(&e1, &e2, beta);
    SignalSet::new(signals.p1(), signals.p2(), signals.samples().iter().map(|x| filters.filter(x)).collect())
}

/// One alternating Tikhonov pass: `X̃ = (βL1 + I)⁻¹ X`, then `X̃ (βL2 + I)⁻¹`,
/// copied into the missing nodes only.
pub fn tikhonov_refine(
    signals: &SignalSet,
    mask: &ObservationMask,
    g1: &WeightVector,
    g2: &WeightVector,
    beta: f64,
) -> Result<SignalSet> {
    mask.check_signals(signals)?;
    check_factors(mask.p1, mask.p2, g1, g2, beta)?;
    let mut out = signals.clone();
    if beta == 0.0 || !mask.has_missing() {
        return Ok(out);
    }
    let e1 = factor_eigendecomposition(&g1.laplacian())?;
    let e2 = factor_eigendecomposition(&g2.laplacian())?;
    TikhonovFilters::new(&e1, &e2, beta).apply(&mut out, mask);
    Ok(out)
}

fn default_beta() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationConfig {
    /// Tikhonov trade-off; larger values smooth harder.
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(flatten)]
    pub solver: SolverConfig,
}

impl Default for ImputationConfig {
    fn default() -> Self {
        Self { beta: default_beta(), solver: SolverConfig::default() }
    }
}

impl ImputationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone)]
pub struct MissingSolveResult {
    pub result: SolveResult,
    pub imputed: SignalSet,
}

/// Imputed samples kept side by side (`p1 x n p2`) and stacked (`n p1 x p2`),
/// so the filter and the covariances are a few large products instead of `n` small ones.
struct ImputingStatistics {
    wide: Mat<f64>,
    tall: Mat<f64>,
    /// Scratch for `tall (βL2 + I)⁻¹`.
    right: Mat<f64>,
    missing: Vec<(usize, usize)>,
    p2: usize,
    beta: f64,
    stats: Statistics,
}

impl ImputingStatistics {
    fn new(signals: &SignalSet, mask: &ObservationMask, beta: f64) -> Result<Self> {
        let (p1, p2, n) = (signals.p1(), signals.p2(), signals.len());
        let mut wide = Mat::<f64>::zeros(p1, n * p2);
        let mut tall = Mat::<f64>::zeros(n * p1, p2);
        for (k, x) in signals.samples().iter().enumerate() {
            wide.as_mut().submatrix_mut(0, k * p2, p1, p2).copy_from(x);
            tall.as_mut().submatrix_mut(k * p1, 0, p1, p2).copy_from(x);
        }
        Ok(Self {
            wide,
            tall,
            right: Mat::zeros(n * p1, p2),
            missing: mask.missing_pairs(),
            p2,
            beta,
            stats: Statistics::new(mode_covariances(signals)?)?,
        })
    }

    fn into_signals(self) -> Result<SignalSet> {
        let (p1, p2) = (self.wide.nrows(), self.p2);
        let n = self.wide.ncols() / p2;
        let samples = (0..n).map(|k| self.wide.as_ref().submatrix(0, k * p2, p1, p2).to_owned()).collect();
        SignalSet::new(p1, p2, samples)
    }
}

impl StatisticsSource for ImputingStatistics {
    fn refresh(&mut self, e1: &FactorEigen, e2: &FactorEigen) -> Result<()> {
        if self.missing.is_empty() || self.beta == 0.0 {
            return Ok(());
        }
        let filters = TikhonovFilters::new(e1, e2, self.beta);
        let (p1, p2) = (self.wide.nrows(), self.p2);
        let n = self.wide.ncols() / p2;
        matmul(self.right.as_mut(), Accum::Replace, &self.tall, &filters.f2, 1.0, Par::Seq);
        // The filters are symmetric, so row i of the first one is its contiguous column i.
        for k in 0..n {
            let rows = k * p1..(k + 1) * p1;
            for &(i, j) in &self.missing {
                let f1 = filters.f1.col_as_slice(i);
                let x = &self.right.col_as_slice(j)[rows.clone()];
                let v: f64 = f1.iter().zip(x).map(|(a, b)| a * b).sum();
                self.wide[(i, k * p2 + j)] = v;
                self.tall[(k * p1 + i, j)] = v;
            }
        }
        let inv_n = 1.0 / n as f64;
        let mut s1 = Mat::<f64>::zeros(p1, p1);
        let mut s2 = Mat::<f64>::zeros(p2, p2);
        matmul(s1.as_mut(), Accum::Replace, &self.wide, self.wide.transpose(), inv_n, Par::Seq);
        matmul(s2.as_mut(), Accum::Replace, self.tall.transpose(), &self.tall, inv_n, Par::Seq);
        self.stats = Statistics::new(ModeCovariances::new(s1, s2)?)?;
        Ok(())
    }

    fn statistics(&self) -> &Statistics {
        &self.stats
    }
}

/// Learns both factors while imputing the missing nodes.
///
/// Initialization uses [`masked_mode_covariances`] (falling back to the
/// covariances of [`initial_impute`] when no clean row or column exists), then
/// each iteration refines the imputation, recomputes `S1`, `S2` and takes one
/// projected gradient step. With nothing missing this is exactly MWGL.
pub fn mwgl_missing_solve(
    signals: &SignalSet,
    mask: &ObservationMask,
    cfg: &ImputationConfig,
) -> Result<MissingSolveResult> {
    mwgl_missing_solve_with_beta(signals, mask, cfg.beta, &cfg.solver, true)
}

pub(crate) fn mwgl_missing_solve_with_beta(
    signals: &SignalSet,
    mask: &ObservationMask,
    beta: f64,
    solver: &SolverConfig,
    check_beta: bool,
) -> Result<MissingSolveResult> {
    if check_beta {
        ImputationConfig { beta, solver: solver.clone() }.validate()?;
    } else {
        solver.validate()?;
    }
    mask.check_signals(signals)?;
    let imputed = initial_impute(signals, mask)?;
    let s0 = match masked_mode_covariances(signals, mask) {
        Ok(s) => s,
        Err(Error::NoCleanFiber) => {
            log::debug!("no clean row/column; initializing from the row/column-mean imputation");
            mode_covariances(&imputed)?
        }
        Err(e) => return Err(e),
    };
    let init = initialize_weights(&s0)?;
    let mut source = ImputingStatistics::new(&imputed, mask, beta)?;
    let result = run_pgd(init, solver, &mut source)?;
    Ok(MissingSolveResult { result, imputed: source.into_signals()? })
}
