//! Evaluation: trace-normalized relative error, PR-AUC of edge recovery and
//! the fit of the `c √(log p / (n min(p1, p2)))` consistency rate.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{frobenius, Laplacian, ProductModel, WeightVector};

/// Rescales `L` so that its trace equals `target`.
pub fn trace_normalize(l: &Laplacian, target: f64) -> Result<Laplacian> {
    let tr = l.trace();
    if !(tr > 0.0) {
        return Err(Error::ZeroTrace);
    }
    let scale = target / tr;
    let m = l.as_mat();
    Ok(Laplacian::from_mat_unchecked(Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * scale)))
}

/// `||Ln_hat - Ln_star||_F / ||Ln_star||_F` after normalizing both traces to `target`.
pub fn rel_err(l_hat: &Laplacian, l_star: &Laplacian, target: f64) -> Result<f64> {
    if l_hat.dim() != l_star.dim() {
        return Err(Error::DimensionMismatch { expected: l_star.dim(), found: l_hat.dim() });
    }
    let a = trace_normalize(l_hat, target)?;
    let b = trace_normalize(l_star, target)?;
    let diff = a.as_mat() - b.as_mat();
    Ok(frobenius(diff.as_ref()) / frobenius(b.as_mat()))
}

/// Relative errors of a learned product model against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelErrors {
    /// Product Laplacians normalized to trace `2 p1 p2`.
    pub product: f64,
    /// Factor 1 normalized to trace `p1`.
    pub factor1: f64,
    /// Factor 2 normalized to trace `p2`.
    pub factor2: f64,
}

pub fn model_rel_errors(learned: &ProductModel, truth: &ProductModel) -> Result<RelErrors> {
    let (p1, p2) = (truth.p1() as f64, truth.p2() as f64);
    Ok(RelErrors {
        product: rel_err(&learned.laplacian(), &truth.laplacian(), 2.0 * p1 * p2)?,
        factor1: rel_err(&learned.g1.laplacian(), &truth.g1.laplacian(), p1)?,
        factor2: rel_err(&learned.g2.laplacian(), &truth.g2.laplacian(), p2)?,
    })
}

/// Area under the precision–recall curve of thresholded edge predictions.
///
/// Thresholds run over the distinct scores from high to low; entries tied at a
/// score enter together. The curve starts at recall 0 with the precision of
/// the top-scored group and is integrated with the trapezoid rule in recall.
pub fn pr_auc(w_hat: &WeightVector, w_star: &WeightVector) -> Result<f64> {
    pr_auc_scores(w_hat.as_slice(), w_star.as_slice())
}

/// [`pr_auc`] on raw slices: `truth[l] > 0` marks a true edge.
pub fn pr_auc_scores(scores: &[f64], truth: &[f64]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), found: scores.len() });
    }
    let positives = truth.iter().filter(|&&t| t > 0.0).count();
    if positives == 0 || positives == truth.len() {
        return Err(Error::DegenerateSupport);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut curve: Vec<(f64, f64)> = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let level = scores[order[k]];
        while k < order.len() && scores[order[k]] == level {
            if truth[order[k]] > 0.0 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        curve.push((tp as f64 / positives as f64, tp as f64 / (tp + fp) as f64));
    }
    let mut area = 0.0;
    let (mut r0, mut p0) = (0.0, curve[0].1);
    for &(r, p) in &curve {
        area += (r - r0) * (p + p0) / 2.0;
        r0 = r;
        p0 = p;
    }
    Ok(area)
}

/// One measured error at a sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub rel_err: f64,
}

impl RatePoint {
    /// `√(log p / (n min(p1, p2)))`.
    pub fn rate(&self) -> f64 {
        let p = (self.p1 * self.p2) as f64;
        (p.ln() / (self.n as f64 * self.p1.min(self.p2) as f64)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Least-squares `c` in `rel_err ≈ c · rate`, fitted through the origin.
    pub c: f64,
    /// Centered coefficient of determination of that fit.
    pub r_squared: f64,
    /// OLS slope of `log(rel_err)` against `log(n)`.
    pub slope_log_n: f64,
}

pub fn fit_rate_constant(points: &[RatePoint]) -> Result<RateFit> {
    let mut ns: Vec<usize> = points.iter().map(|p| p.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 2 {
        return Err(Error::InsufficientPoints);
    }
    if let Some(bad) = points.iter().find(|p| !(p.rel_err > 0.0 && p.rel_err.is_finite()) || p.n == 0) {
        return Err(Error::InvalidParameter(format!("rate point {bad:?}")));
    }
    let xs: Vec<f64> = points.iter().map(RatePoint::rate).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.rel_err).collect();
    let c = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
    let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - c * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= f64::EPSILON * mean_y.abs() {
        1.0
    } else {
        0.0
    };

    let lx: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(RateFit { c, r_squared, slope_log_n: sxy / sxx })
}
