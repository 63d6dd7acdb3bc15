//! Seeded synthetic experiments: generate factor graphs and signals, learn,
//! evaluate, and fit the consistency rate across sample sizes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ProductModel;
use crate::io::{self, Evaluation, MetricsRow, RateFitEntry, RateFitFile};
use crate::metrics::{fit_rate_constant, model_rel_errors, pr_auc, RatePoint, RelErrors};
use crate::missing::{mwgl_missing_solve, structural_mask, ImputationConfig, MaskSpec, ObservationMask};
use crate::model::{sample_igmrf, SignalSet};
use crate::solver::{mwgl_solve_signals, SolveResult, SolverConfig};
use crate::synth::{derive_seed, generate_graph, GraphRecipe};

/// One product-graph family: a recipe for each factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub factor1: GraphRecipe,
    pub factor2: GraphRecipe,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub scenarios: Vec<Scenario>,
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Candidate `alpha` values; the best mean product error at `alpha_select_n` wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_select_n: Option<usize>,
    /// Structural missingness applied to every trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl ExperimentManifest {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() || self.n_list.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidParameter("scenarios, n_list and seeds must be nonempty".into()));
        }
        if self.n_list.contains(&0) {
            return Err(Error::InvalidParameter("sample counts must be positive".into()));
        }
        for s in &self.scenarios {
            s.factor1.validate()?;
            s.factor2.validate()?;
        }
        if let Some(grid) = &self.alpha_grid {
            if grid.is_empty() || grid.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                return Err(Error::InvalidParameter("alpha_grid must hold nonnegative values".into()));
            }
        }
        self.solver.validate()?;
        if self.mask.is_some() {
            self.imputation_config(self.solver.alpha).validate()?;
        }
        Ok(())
    }

    /// Sample size used for the alpha search (default: the median of `n_list`).
    pub fn selection_n(&self) -> usize {
        self.alpha_select_n.unwrap_or_else(|| {
            let mut ns = self.n_list.clone();
            ns.sort_unstable();
            ns[ns.len() / 2]
        })
    }

    fn imputation_config(&self, alpha: f64) -> ImputationConfig {
        ImputationConfig { beta: self.beta.unwrap_or(1.0), solver: SolverConfig { alpha, ..self.solver.clone() } }
    }
}

/// Ground-truth factors of realization `seed`.
pub fn trial_model(scenario: &Scenario, seed: u64) -> Result<ProductModel> {
    let r1 = scenario.factor1.with_seed(derive_seed(derive_seed(scenario.factor1.seed, seed), 1));
    let r2 = scenario.factor2.with_seed(derive_seed(derive_seed(scenario.factor2.seed, seed), 2));
    Ok(ProductModel::new(generate_graph(&r1)?, generate_graph(&r2)?))
}

pub fn trial_signal_seed(seed: u64, n: usize) -> u64 {
    derive_seed(derive_seed(seed, 3), n as u64)
}

pub fn trial_signals(model: &ProductModel, n: usize, seed: u64) -> Result<SignalSet> {
    sample_igmrf(model, n, trial_signal_seed(seed, n))
}

pub fn trial_mask(spec: &MaskSpec, p1: usize, p2: usize, seed: u64) -> Result<ObservationMask> {
    structural_mask(p1, p2, &MaskSpec { seed: derive_seed(spec.seed, derive_seed(seed, 4)), ..spec.clone() })
}

/// Everything measured for one `(scenario, n, seed)` trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub truth: ProductModel,
    pub result: SolveResult,
    pub errors: RelErrors,
    pub pr_auc: f64,
    pub wall_ms: u64,
}

impl TrialOutcome {
    pub fn learned(&self) -> ProductModel {
        ProductModel::new(self.result.w1.clone(), self.result.w2.clone())
    }
}

/// Relative errors and product-edge PR-AUC of `learned` against `truth`.
pub fn evaluate(learned: &ProductModel, truth: &ProductModel) -> Result<Evaluation> {
    if (learned.p1(), learned.p2()) != (truth.p1(), truth.p2()) {
        return Err(Error::InvalidParameter(format!(
            "learned model is {}x{}, truth is {}x{}",
            learned.p1(),
            learned.p2(),
            truth.p1(),
            truth.p2()
        )));
    }
    Ok(Evaluation {
        rel_err: model_rel_errors(learned, truth)?,
        pr_auc: pr_auc(&learned.product_weights(), &truth.product_weights())?,
    })
}

pub fn run_trial(
    manifest: &ExperimentManifest,
    scenario: &Scenario,
    n: usize,
    seed: u64,
    alpha: f64,
) -> Result<TrialOutcome> {
    let truth = trial_model(scenario, seed)?;
    let signals = trial_signals(&truth, n, seed)?;
    let start = Instant::now();
    let result = match &manifest.mask {
        None => mwgl_solve_signals(&signals, &SolverConfig { alpha, ..manifest.solver.clone() }, None)?,
        Some(spec) => {
            let mask = trial_mask(spec, truth.p1(), truth.p2(), seed)?;
            mwgl_missing_solve(&signals, &mask, &manifest.imputation_config(alpha))?.result
        }
    };
    let wall_ms = start.elapsed().as_millis() as u64;
    let learned = ProductModel::new(result.w1.clone(), result.w2.clone());
    let eval = evaluate(&learned, &truth)?;
    Ok(TrialOutcome { truth, result, errors: eval.rel_err, pr_auc: eval.pr_auc, wall_ms })
}

/// Mean product relative error of `alpha` over all seeds at sample size `n`.
pub fn mean_error_for_alpha(manifest: &ExperimentManifest, scenario: &Scenario, n: usize, alpha: f64) -> f64 {
    let errs: Vec<f64> = manifest
        .seeds
        .par_iter()
        .filter_map(|&s| run_trial(manifest, scenario, n, s, alpha).ok().map(|t| t.errors.product))
        .collect();
    if errs.is_empty() {
        f64::INFINITY
    } else {
        errs.iter().sum::<f64>() / errs.len() as f64
    }
}

/// Picks `alpha` by grid search at [`ExperimentManifest::selection_n`]; the first
/// minimizer wins ties.
pub fn select_alpha(manifest: &ExperimentManifest, scenario: &Scenario) -> f64 {
    let Some(grid) = &manifest.alpha_grid else {
        return manifest.solver.alpha;
    };
    let n = manifest.selection_n();
    let mut best = (f64::INFINITY, manifest.solver.alpha);
    for &alpha in grid {
        let err = mean_error_for_alpha(manifest, scenario, n, alpha);
        log::info!("{}: alpha {alpha} -> mean rel err {err:.4} at n = {n}", scenario.id);
        if err < best.0 {
            best = (err, alpha);
        }
    }
    best.1
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub rows: Vec<MetricsRow>,
    pub fits: RateFitFile,
}

/// Runs the full `(scenario, n, seed)` sweep on a pool of `jobs` threads.
///
/// Failed trials are listed in the report instead of aborting the sweep. Rows
/// are sorted by `(experiment, n, seed)`.
pub fn run_benchmark(manifest: &ExperimentManifest, jobs: usize) -> Result<BenchmarkReport> {
    manifest.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    pool.install(|| {
        let mut rows = Vec::new();
        let mut failures = Vec::new();
        let mut fits = Vec::new();
        for scenario in &manifest.scenarios {
            let alpha = select_alpha(manifest, scenario);
            let trials: Vec<(usize, u64)> =
                manifest.n_list.iter().flat_map(|&n| manifest.seeds.iter().map(move |&s| (n, s))).collect();
            let outcomes: Vec<_> =
                trials.par_iter().map(|&(n, seed)| (n, seed, run_trial(manifest, scenario, n, seed, alpha))).collect();
            let mut scenario_rows = Vec::new();
            for (n, seed, outcome) in outcomes {
                match outcome {
                    Ok(t) => scenario_rows.push(MetricsRow {
                        experiment: scenario.id.clone(),
                        n,
                        p1: t.truth.p1(),
                        p2: t.truth.p2(),
                        seed,
                        rel_err_product: t.errors.product,
                        rel_err_f1: t.errors.factor1,
                        rel_err_f2: t.errors.factor2,
                        pr_auc: t.pr_auc,
                        iterations: t.result.iterations,
                        wall_ms: t.wall_ms,
                    }),
                    Err(e) => failures.push(format!("{}/{n}/{seed}: {e}", scenario.id)),
                }
            }
            let mean_rel_err = mean_by_n(&scenario_rows, |r| r.rel_err_product);
            let points: Vec<RatePoint> = mean_rel_err
                .iter()
                .map(|&(n, e)| RatePoint { n, p1: scenario_rows[0].p1, p2: scenario_rows[0].p2, rel_err: e })
                .collect();
            match fit_rate_constant(&points) {
                Ok(fit) => fits.push(RateFitEntry { experiment: scenario.id.clone(), alpha, fit, mean_rel_err }),
                Err(e) => failures.push(format!("{}: rate fit: {e}", scenario.id)),
            }
            rows.extend(scenario_rows);
        }
        rows.sort_by(|a, b| (&a.experiment, a.n, a.seed).cmp(&(&b.experiment, b.n, b.seed)));
        Ok(BenchmarkReport { rows, fits: RateFitFile { fits, failures } })
    })
}

/// Averages `field` per sample size, in increasing `n`.
pub fn mean_by_n(rows: &[MetricsRow], field: impl Fn(&MetricsRow) -> f64) -> Vec<(usize, f64)> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let vals: Vec<f64> = rows.iter().filter(|r| r.n == n).map(&field).collect();
            (n, vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

pub fn write_report(dir: &Path, report: &BenchmarkReport) -> Result<()> {
    io::write_metrics(&dir.join("metrics.csv"), &report.rows)?;
    io::write_json(&dir.join("rate_fit.json"), &report.fits)
}

/// Writes factor graphs, product weights, signals (and masks) for every
/// `(scenario, seed, n)` under `out/<scenario>/seed<seed>/`. Returns the files written.
pub fn generate_files(manifest: &ExperimentManifest, out: &Path) -> Result<Vec<PathBuf>> {
    manifest.validate()?;
    let mut written = Vec::new();
    for scenario in &manifest.scenarios {
        for &seed in &manifest.seeds {
            let dir = out.join(&scenario.id).join(format!("seed{seed}"));
            let model = trial_model(scenario, seed)?;
            for (name, w) in [("g1", &model.g1), ("g2", &model.g2), ("product", &model.product_weights())] {
                let path = dir.join(format!("{name}.json"));
                io::write_graph(&path, w)?;
                written.push(path);
            }
            if let Some(spec) = &manifest.mask {
                let path = dir.join("mask.csv");
                io::write_mask(&path, &trial_mask(spec, model.p1(), model.p2(), seed)?)?;
                written.push(path);
            }
            for &n in &manifest.n_list {
                let path = dir.join(format!("signals_n{n}.csv"));
                let signals = trial_signals(&model, n, seed)?;
                io::write_signals(&path, &signals, Some(trial_signal_seed(seed, n)))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
