//! Penalized maximum-likelihood estimation of the two factor graphs (MWGL).
//!
//! The objective over nonnegative weight vectors `w1`, `w2` is
//!
//! ```text
//! f(w1, w2) = w1ᵀ L*S1 + w2ᵀ L*S2 - log det†(Lw1 ⊕ Lw2) + α1 w1ᵀ1 + α2 w2ᵀ1
//! ```
//!
//! and is minimized by projected gradient descent with a fixed step. The
//! gradient of the log-determinant term is `L*H1` (resp. `L*H2`), where the `H`
//! matrices are the partial traces of `(L1 ⊕ L2)†` and come from the factor
//! eigendecompositions.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, GraphId, Result};
use crate::graph::{adjoint_on_matrix, project_to_laplacian_weights, WeightVector};
use crate::model::{mode_covariances, ModeCovariances, SignalSet};
use crate::spectral::{
    compute_h_matrices, decompose_symmetric, factor_eigendecomposition, product_pseudo_logdet, EigTolerance,
    FactorEigen,
};

/// Consecutive objective increases tolerated before aborting with [`Error::StepTooLarge`].
pub const DIVERGENCE_STREAK: usize = 25;
/// Smallest step the backtracking safety valve will shrink to.
pub const MIN_STEP: f64 = 1e-8;
/// Uniform edge weight added to a disconnected initial factor.
pub const REPAIR_WEIGHT: f64 = 1e-2;

fn default_eta() -> f64 {
    1e-3
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Global sparsity weight.
    #[serde(default)]
    pub alpha: f64,
    /// Overrides the factor-1 penalty (default `p2 * alpha`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    /// Overrides the factor-2 penalty (default `p1 * alpha`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Stop once `max(|Δw1|_∞, |Δw2|_∞) <= tol`.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Halve the step (down to [`MIN_STEP`]) instead of accepting an increase.
    #[serde(default)]
    pub backtracking: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            alpha1: None,
            alpha2: None,
            eta: default_eta(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            backtracking: false,
        }
    }
}

impl SolverConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self { alpha, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v}")));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta", self.eta);
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad("tol", self.tol);
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        for (name, v) in [("alpha", Some(self.alpha)), ("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return bad(name, v);
                }
            }
        }
        Ok(())
    }

    /// Effective `(α1, α2)` for factor sizes `p1`, `p2`.
    pub fn penalties(&self, p1: usize, p2: usize) -> (f64, f64) {
        (self.alpha1.unwrap_or(p2 as f64 * self.alpha), self.alpha2.unwrap_or(p1 as f64 * self.alpha))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub w1: WeightVector,
    pub w2: WeightVector,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Adjoint images `L*S1`, `L*S2` of the mode covariances.
#[derive(Debug, Clone)]
pub(crate) struct Statistics {
    pub lin1: Vec<f64>,
    pub lin2: Vec<f64>,
}

impl Statistics {
    pub fn new(cov: ModeCovariances) -> Result<Self> {
        let lin1 = adjoint_on_matrix(cov.s1.as_ref())?;
        let lin2 = adjoint_on_matrix(cov.s2.as_ref())?;
        Ok(Self { lin1, lin2 })
    }

    /// Change of the data term at `(w1, w2)` when `older` is replaced by `self`.
    fn shift_from(&self, older: &Statistics, w1: &WeightVector, w2: &WeightVector) -> f64 {
        let dot = |w: &[f64], new: &[f64], old: &[f64]| {
            w.iter().zip(new.iter().zip(old)).map(|(w, (a, b))| w * (a - b)).sum::<f64>()
        };
        dot(w1.as_slice(), &self.lin1, &older.lin1) + dot(w2.as_slice(), &self.lin2, &older.lin2)
    }
}

/// Objective value and gradient at one point.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub objective: f64,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
}

fn check_dims(w1: &WeightVector, w2: &WeightVector, s: &ModeCovariances) -> Result<()> {
    if w1.nodes() != s.p1() {
        return Err(Error::DimensionMismatch { expected: s.p1(), found: w1.nodes() });
    }
    if w2.nodes() != s.p2() {
        return Err(Error::DimensionMismatch { expected: s.p2(), found: w2.nodes() });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn decompose_pair(w1: &WeightVector, w2: &WeightVector) -> Result<(FactorEigen, FactorEigen)> {
    Ok((factor_eigendecomposition(&w1.laplacian())?, factor_eigendecomposition(&w2.laplacian())?))
}

pub(crate) fn evaluate(
    w1: &WeightVector,
    w2: &WeightVector,
    e1: &FactorEigen,
    e2: &FactorEigen,
    stats: &Statistics,
    (alpha1, alpha2): (f64, f64),
) -> Result<Evaluation> {
    let tol = EigTolerance::default();
    let logdet = product_pseudo_logdet(e1, e2, tol)?;
    let (h1, h2) = compute_h_matrices(e1, e2, tol)?;
    let objective = dot(w1.as_slice(), &stats.lin1) + dot(w2.as_slice(), &stats.lin2) - logdet
        + alpha1 * w1.total_weight()
        + alpha2 * w2.total_weight();
    let grad = |lin: &[f64], h: &Mat<f64>, alpha: f64| -> Result<Vec<f64>> {
        let lh = adjoint_on_matrix(h.as_ref())?;
        Ok(lin.iter().zip(lh).map(|(s, h)| s - h + alpha).collect())
    };
    Ok(Evaluation { objective, g1: grad(&stats.lin1, &h1, alpha1)?, g2: grad(&stats.lin2, &h2, alpha2)? })
}

fn evaluate_at(w1: &WeightVector, w2: &WeightVector, s: &ModeCovariances, cfg: &SolverConfig) -> Result<Evaluation> {
    check_dims(w1, w2, s)?;
    let stats = Statistics::new(s.clone())?;
    let (e1, e2) = decompose_pair(w1, w2)?;
    evaluate(w1, w2, &e1, &e2, &stats, cfg.penalties(s.p1(), s.p2()))
}

/// Value of the penalized negative log-likelihood.
pub fn objective(w1: &WeightVector, w2: &WeightVector, s: &ModeCovariances, cfg: &SolverConfig) -> Result<f64> {
    Ok(evaluate_at(w1, w2, s, cfg)?.objective)
}

/// Gradients `L*S1 - L*H1 + α1 1` and `L*S2 - L*H2 + α2 1`.
pub fn gradient(
    w1: &WeightVector,
    w2: &WeightVector,
    s: &ModeCovariances,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let ev = evaluate_at(w1, w2, s, cfg)?;
    Ok((ev.g1, ev.g2))
}

fn project_step(w: &WeightVector, g: &[f64], eta: f64) -> (WeightVector, f64) {
    let mut delta = 0.0f64;
    let next: Vec<f64> = w
        .as_slice()
        .iter()
        .zip(g)
        .map(|(&x, &d)| {
            let y = (x - eta * d).max(0.0);
            delta = delta.max((y - x).abs());
            y
        })
        .collect();
    (WeightVector::new(w.nodes(), next).expect("projection keeps weights valid"), delta)
}

/// One projected gradient step `w' = (w - η g)₊` on both factors.
pub fn pgd_step(
    w1: &WeightVector,
    w2: &WeightVector,
    s: &ModeCovariances,
    cfg: &SolverConfig,
) -> Result<(WeightVector, WeightVector)> {
    let ev = evaluate_at(w1, w2, s, cfg)?;
    Ok((project_step(w1, &ev.g1, cfg.eta).0, project_step(w2, &ev.g2, cfg.eta).0))
}

fn initial_factor(s: &Mat<f64>) -> Result<WeightVector> {
    let p = s.nrows();
    if p < 2 {
        return Ok(WeightVector::zeros(p.max(1)));
    }
    let scale = (0..p).map(|i| s[(i, i)]).sum::<f64>() / p as f64;
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut eig = decompose_symmetric(s.as_ref())?;
    if eig.values()[0] < 1e-10 * scale {
        let mut reg = s.clone();
        for i in 0..p {
            reg[(i, i)] += 1e-3 * scale;
        }
        eig = decompose_symmetric(reg.as_ref())?;
    }
    let inverse = eig.spectral_map(|v| 1.0 / v);
    let w = project_to_laplacian_weights(inverse.as_ref())?;
    if w.is_connected() {
        Ok(w)
    } else {
        WeightVector::new(p, w.as_slice().iter().map(|v| v + REPAIR_WEIGHT).collect())
    }
}

/// Starting point from the (regularized) inverse mode covariances.
///
/// Each `Si` is inverted (adding `1e-3 Tr(Si)/pi` to the diagonal when its
/// smallest eigenvalue is below `1e-10 Tr(Si)/pi`), its negative
/// off-diagonals become edge weights, and a disconnected result gets
/// [`REPAIR_WEIGHT`] added to every pair.
pub fn initialize_weights(s: &ModeCovariances) -> Result<(WeightVector, WeightVector)> {
    Ok((initial_factor(&s.s1)?, initial_factor(&s.s2)?))
}

/// Hook letting a caller change the sufficient statistics between iterations.
pub(crate) trait StatisticsSource {
    /// Called at the top of every iteration with the current factor spectra.
    fn refresh(&mut self, e1: &FactorEigen, e2: &FactorEigen) -> Result<()>;
    fn statistics(&self) -> &Statistics;
}

pub(crate) struct FixedStatistics(pub Statistics);

impl StatisticsSource for FixedStatistics {
    fn refresh(&mut self, _: &FactorEigen, _: &FactorEigen) -> Result<()> {
        Ok(())
    }

    fn statistics(&self) -> &Statistics {
        &self.0
    }
}

fn disconnected_factor(err: Error) -> GraphId {
    match err {
        Error::DisconnectedGraph(id) => id,
        _ => GraphId::Product,
    }
}

/// Projected gradient descent driver shared by the complete- and missing-data solvers.
pub(crate) fn run_pgd(
    init: (WeightVector, WeightVector),
    cfg: &SolverConfig,
    source: &mut dyn StatisticsSource,
) -> Result<SolveResult> {
    cfg.validate()?;
    let (mut w1, mut w2) = init;
    let penalties = cfg.penalties(w1.nodes(), w2.nodes());
    let mut eta = cfg.eta;
    let mut trace: Vec<f64> = Vec::new();
    let mut previous: Option<(WeightVector, WeightVector)> = None;
    let mut streak = 0;
    let mut last_stats: Option<Statistics> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let spectra = decompose_pair(&w1, &w2).and_then(|(e1, e2)| {
            crate::spectral::product_zero_tol(&e1, &e2, EigTolerance::default())?;
            Ok((e1, e2))
        });
        let (e1, e2) = match spectra {
            Ok(pair) => pair,
            Err(err @ Error::DisconnectedGraph(_)) => {
                if let (true, Some((p1, p2))) = (cfg.backtracking && eta > MIN_STEP, previous.take()) {
                    w1 = p1;
                    w2 = p2;
                    eta = (eta / 2.0).max(MIN_STEP);
                    continue;
                }
                return Err(Error::DisconnectedIterate { factor: disconnected_factor(err), iteration: iterations - 1 });
            }
            Err(err) => return Err(err),
        };
        source.refresh(&e1, &e2)?;
        let ev = evaluate(&w1, &w2, &e1, &e2, source.statistics(), penalties)?;
        if !ev.objective.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: iterations - 1 });
        }
        if let (Some(&last), Some(older)) = (trace.last(), &last_stats) {
            // Statistics that move between iterations shift the objective; compare against
            // the previous point re-evaluated under the current ones.
            let (p1, p2) = previous.as_ref().map_or((&w1, &w2), |(a, b)| (a, b));
            let last = last + source.statistics().shift_from(older, p1, p2);
            if ev.objective > last + 1e-12 * last.abs().max(1.0) {
                if cfg.backtracking && eta > MIN_STEP {
                    if let Some((p1, p2)) = previous.take() {
                        w1 = p1;
                        w2 = p2;
                        eta = (eta / 2.0).max(MIN_STEP);
                        continue;
                    }
                }
                streak += 1;
                if streak >= DIVERGENCE_STREAK {
                    return Err(Error::StepTooLarge { iteration: iterations - 1, streak });
                }
            } else {
                streak = 0;
            }
        }
        trace.push(ev.objective);
        last_stats = Some(source.statistics().clone());
        let (n1, d1) = project_step(&w1, &ev.g1, eta);
        let (n2, d2) = project_step(&w2, &ev.g2, eta);
        previous = Some((std::mem::replace(&mut w1, n1), std::mem::replace(&mut w2, n2)));
        if d1.max(d2) <= cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("no convergence after {} iterations", cfg.max_iter);
    }
    Ok(SolveResult { w1, w2, objective_trace: trace, iterations, converged })
}

/// Runs MWGL on precomputed mode covariances.
///
/// Without `init` the starting point comes from [`initialize_weights`].
pub fn mwgl_solve(
    s: &ModeCovariances,
    cfg: &SolverConfig,
    init: Option<(WeightVector, WeightVector)>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let init = match init {
        Some(pair) => pair,
        None => initialize_weights(s)?,
    };
    check_dims(&init.0, &init.1, s)?;
    let mut source = FixedStatistics(Statistics::new(s.clone())?);
    run_pgd(init, cfg, &mut source)
}

/// Runs MWGL on raw signals.
pub fn mwgl_solve_signals(
    signals: &SignalSet,
    cfg: &SolverConfig,
    init: Option<(WeightVector, WeightVector)>,
) -> Result<SolveResult> {
    mwgl_solve(&mode_covariances(signals)?, cfg, init)
}
