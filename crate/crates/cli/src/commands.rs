use std::path::{Path, PathBuf};

use mwgl::experiment::{self, ExperimentManifest};
use mwgl::io::{self, Evaluation, LearnReport, LearnRun, ResultFile, RunConfig};
use mwgl::missing::signals_with_mask;
use mwgl::{
    mwgl_missing_solve, mwgl_solve_signals, Error, ImputationConfig, ObservationMask, ProductModel, Result, SignalSet,
    SolveResult, SolverConfig,
};
use rayon::prelude::*;

use crate::{exit_code, LearnArgs};

const NOT_CONVERGED: u8 = 3;

pub fn generate(manifest: &Path, out: Option<&Path>) -> Result<u8> {
    let m: ExperimentManifest = io::read_json(manifest)?;
    let dir = out.unwrap_or(&m.output_dir);
    let files = experiment::generate_files(&m, dir)?;
    println!("wrote {} files under {}", files.len(), dir.display());
    Ok(0)
}

fn load_truth(g1: &Path, g2: &Path) -> Result<ProductModel> {
    Ok(ProductModel::new(io::read_graph(g1)?, io::read_graph(g2)?))
}

fn run_config(args: &LearnArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => io::read_json::<RunConfig>(path)?,
        None => RunConfig { solver: SolverConfig::default(), beta: None },
    };
    let s = &mut cfg.solver;
    if let Some(v) = args.alpha1 {
        s.alpha1 = Some(v);
    }
    if let Some(v) = args.alpha2 {
        s.alpha2 = Some(v);
    }
    if let Some(v) = args.eta {
        s.eta = v;
    }
    if let Some(v) = args.tol {
        s.tol = v;
    }
    if let Some(v) = args.max_iter {
        s.max_iter = v;
    }
    s.backtracking |= args.backtracking;
    if args.beta.is_some() {
        cfg.beta = args.beta;
    }
    Ok(cfg)
}

struct Problem {
    signals: SignalSet,
    mask: Option<ObservationMask>,
}

fn load_problem(args: &LearnArgs) -> Result<Problem> {
    let (manifest, rows) = io::read_signal_rows(&args.signals)?;
    let (p1, p2) = (manifest.p1, manifest.p2);
    let mask = args.mask.as_deref().map(|m| io::read_mask(m, p1, p2)).transpose()?;
    let mut signals = match &mask {
        Some(mask) => signals_with_mask(&rows, mask)?,
        None => SignalSet::from_vectors(p1, p2, &rows)?,
    };
    if args.center_modes {
        // Missing entries are re-imputed by the solver, so only observed values matter here.
        signals = match &mask {
            Some(mask) => mwgl::missing::initial_impute(&signals, mask)?.center_modes(),
            None => signals.center_modes(),
        };
    }
    Ok(Problem { signals, mask })
}

fn solve(problem: &Problem, cfg: &RunConfig, alpha: f64) -> Result<(SolveResult, Option<SignalSet>)> {
    let solver = SolverConfig { alpha, ..cfg.solver.clone() };
    match &problem.mask {
        None => Ok((mwgl_solve_signals(&problem.signals, &solver, None)?, None)),
        Some(mask) => {
            let icfg = ImputationConfig { beta: cfg.beta.unwrap_or(ImputationConfig::default().beta), solver };
            let out = mwgl_missing_solve(&problem.signals, mask, &icfg)?;
            Ok((out.result, Some(out.imputed)))
        }
    }
}

/// Runs every `alpha`; the exit code is the first nonzero one in grid order.
pub fn learn(args: &LearnArgs) -> Result<u8> {
    let cfg = run_config(args)?;
    let problem = load_problem(args)?;
    let truth = match (&args.truth_g1, &args.truth_g2) {
        (Some(g1), Some(g2)) => Some(load_truth(g1, g2)?),
        _ => None,
    };
    let alphas = args.alpha.clone().unwrap_or_else(|| vec![cfg.solver.alpha]);
    if alphas.is_empty() {
        return Err(Error::InvalidParameter("empty alpha grid".into()));
    }
    let single = alphas.len() == 1;
    let name = |stem: &str, k: usize, ext: &str| {
        if single {
            format!("{stem}.{ext}")
        } else {
            format!("{stem}_{k}.{ext}")
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let outcomes: Vec<Result<(SolveResult, Option<SignalSet>)>> =
        pool.install(|| alphas.par_iter().map(|&a| solve(&problem, &cfg, a)).collect());

    let mut runs = Vec::with_capacity(alphas.len());
    let mut code = 0u8;
    for (k, (&alpha, outcome)) in alphas.iter().zip(outcomes).enumerate() {
        let run = match outcome {
            Ok((result, imputed)) => {
                let file = name("result", k, "json");
                let config = RunConfig {
                    solver: SolverConfig { alpha, ..cfg.solver.clone() },
                    beta: problem.mask.as_ref().map(|_| cfg.beta.unwrap_or(ImputationConfig::default().beta)),
                };
                io::write_json(&args.out.join(&file), &ResultFile::new(&result, config))?;
                if let Some(x) = imputed {
                    io::write_signals(&args.out.join(name("imputed", k, "csv")), &x, None)?;
                }
                let evaluation = match &truth {
                    Some(t) => Some(experiment::evaluate(&ProductModel::new(result.w1, result.w2), t)?),
                    None => None,
                };
                if !result.converged && code == 0 {
                    code = NOT_CONVERGED;
                }
                LearnRun {
                    alpha,
                    result: Some(file),
                    error: None,
                    converged: result.converged,
                    iterations: result.iterations,
                    evaluation,
                }
            }
            Err(e) if e.is_io() => return Err(e),
            Err(e) => {
                eprintln!("alpha = {alpha}: {e}");
                if code == 0 {
                    code = exit_code(&e);
                }
                LearnRun {
                    alpha,
                    result: None,
                    error: Some(e.to_string()),
                    converged: false,
                    iterations: 0,
                    evaluation: None,
                }
            }
        };
        println!(
            "alpha = {alpha}: {}",
            match (&run.error, &run.evaluation) {
                (Some(e), _) => format!("failed ({e})"),
                (None, Some(ev)) => format!(
                    "{} after {} iterations, rel err {:.4}, PR-AUC {:.4}",
                    if run.converged { "converged" } else { "stopped" },
                    run.iterations,
                    ev.rel_err.product,
                    ev.pr_auc
                ),
                (None, None) => format!(
                    "{} after {} iterations",
                    if run.converged { "converged" } else { "stopped" },
                    run.iterations
                ),
            }
        );
        runs.push(run);
    }

    let best = runs
        .iter()
        .enumerate()
        .filter_map(|(k, r)| r.evaluation.map(|e| (k, e.rel_err.product)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k);
    if let Some(b) = best {
        println!("best alpha = {} (rel err {:.4})", runs[b].alpha, runs[b].evaluation.unwrap().rel_err.product);
    }
    io::write_json(&args.out.join("report.json"), &LearnReport { runs, best })?;
    Ok(code)
}

pub fn eval(result: &Path, g1: &Path, g2: &Path, out: Option<&Path>) -> Result<u8> {
    let learned = io::read_json::<ResultFile>(result)?.model()?;
    let evaluation: Evaluation = experiment::evaluate(&learned, &load_truth(g1, g2)?)?;
    println!("{}", serde_json::to_string_pretty(&evaluation)?);
    if let Some(path) = out {
        io::write_json(path, &evaluation)?;
    }
    Ok(0)
}

pub fn benchmark(manifest: &Path, out: Option<&Path>, jobs: usize) -> Result<u8> {
    let m: ExperimentManifest = io::read_json(manifest)?;
    let dir: PathBuf = out.map_or_else(|| m.output_dir.clone(), Path::to_path_buf);
    let report = experiment::run_benchmark(&m, jobs)?;
    experiment::write_report(&dir, &report)?;
    for fit in &report.fits.fits {
        println!(
            "{}: alpha = {}, c = {:.4}, r^2 = {:.4}, slope = {:.4}",
            fit.experiment, fit.alpha, fit.fit.c, fit.fit.r_squared, fit.fit.slope_log_n
        );
    }
    for failure in &report.fits.failures {
        eprintln!("failed: {failure}");
    }
    println!("{} trials written to {}", report.rows.len(), dir.display());
    Ok(0)
}

pub fn schema_check(files: &[PathBuf]) -> Result<u8> {
    let mut code = 0;
    for f in files {
        match io::schema_check(f) {
            Ok(kind) => println!("{}: ok ({kind})", f.display()),
            Err(e) => {
                println!("{}: invalid: {e}", f.display());
                if code == 0 {
                    code = if e.is_io() { 5 } else { 2 };
                }
            }
        }
    }
    Ok(code)
}
