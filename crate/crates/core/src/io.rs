//! On-disk formats.
//!
//! | file | layout |
//! |------|--------|
//! | graph JSON | `{"p": int, "w": [..]}` in pair order |
//! | edge list CSV | header `i,j,weight`; 1-based, `i > j`, nonzero weights only |
//! | signal CSV | `n` rows of `p1 p2` values (row-major), no header |
//! | signal manifest | `<stem>.manifest.json`: `{"p1","p2","n","seed"}` |
//! | mask CSV | header `i1,i2`; 1-based missing pairs |
//! | result JSON | `{"w1","w2","objective_trace","iterations","converged","config"}` |
//! | learn report JSON | `{"runs": [..], "best": int?}`, see [`LearnReport`] |
//! | evaluation JSON | `{"rel_err": {..}, "pr_auc": float}` |
//! | metrics CSV | one row per trial, see [`MetricsRow`] |
//! | rate-fit JSON | `{"fits": [..], "failures": [..]}` |

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{nodes_for_len, ProductModel, WeightVector};
use crate::metrics::{RateFit, RelErrors};
use crate::missing::ObservationMask;
use crate::model::SignalSet;
use crate::solver::{SolveResult, SolverConfig};

fn schema_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Schema { path: path.display().to_string(), reason: reason.into() }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = BufReader::new(File::open(path)?);
    serde_json::from_reader(f).map_err(|e| schema_err(path, e.to_string()))
}

pub fn write_graph(path: &Path, w: &WeightVector) -> Result<()> {
    write_json(path, w)
}

pub fn read_graph(path: &Path) -> Result<WeightVector> {
    read_json(path)
}

pub fn write_edge_list(path: &Path, w: &WeightVector) -> Result<()> {
    let mut out = csv::Writer::from_writer(create(path)?);
    out.write_record(["i", "j", "weight"])?;
    for (i, j, v) in w.edges() {
        out.write_record([(i + 1).to_string(), (j + 1).to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_edge_list(path: &Path, p: usize) -> Result<WeightVector> {
    let mut rdr = csv::Reader::from_path(path)?;
    check_header(path, rdr.headers()?, &["i", "j", "weight"])?;
    let mut edges = Vec::new();
    for rec in rdr.deserialize::<(usize, usize, f64)>() {
        let (i, j, v) = rec?;
        if j == 0 || i <= j || i > p {
            return Err(schema_err(path, format!("edge ({i}, {j}) must satisfy p >= i > j >= 1")));
        }
        edges.push((i - 1, j - 1, v));
    }
    WeightVector::from_edges(p, edges)
}

fn check_header(path: &Path, header: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if header.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(schema_err(path, format!("expected header {}", expected.join(","))));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalManifest {
    pub p1: usize,
    pub p2: usize,
    pub n: usize,
    pub seed: Option<u64>,
}

/// `dir/stem.csv` -> `dir/stem.manifest.json`.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.manifest.json"))
}

/// Writes the signal CSV and its manifest next to it.
pub fn write_signals(path: &Path, signals: &SignalSet, seed: Option<u64>) -> Result<()> {
    let mut f = create(path)?;
    for k in 0..signals.len() {
        let row: Vec<String> = signals.vector(k).iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()?;
    let manifest = SignalManifest { p1: signals.p1(), p2: signals.p2(), n: signals.len(), seed };
    write_json(&manifest_path(path), &manifest)
}

/// Reads a signal CSV with its manifest. Empty fields and `NaN` parse as NaN.
pub fn read_signal_rows(path: &Path) -> Result<(SignalManifest, Vec<Vec<f64>>)> {
    let manifest: SignalManifest = read_json(&manifest_path(path))?;
    let width = manifest.p1 * manifest.p2;
    let mut rows = Vec::with_capacity(manifest.n);
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                let t = t.trim();
                if t.is_empty() {
                    Ok(f64::NAN)
                } else {
                    t.parse::<f64>().map_err(|_| schema_err(path, format!("line {}: bad number {t:?}", lineno + 1)))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != width {
            return Err(schema_err(path, format!("line {}: {} columns, expected {width}", lineno + 1, row.len())));
        }
        rows.push(row);
    }
    if rows.len() != manifest.n {
        return Err(schema_err(path, format!("{} rows, manifest says {}", rows.len(), manifest.n)));
    }
    Ok((manifest, rows))
}

pub fn read_signals(path: &Path) -> Result<SignalSet> {
    let (m, rows) = read_signal_rows(path)?;
    SignalSet::from_vectors(m.p1, m.p2, &rows).map_err(|e| schema_err(path, e.to_string()))
}

pub fn write_mask(path: &Path, mask: &ObservationMask) -> Result<()> {
    let mut out = csv::Writer::from_writer(create(path)?);
    out.write_record(["i1", "i2"])?;
    for (i1, i2) in mask.missing_pairs() {
        out.write_record([(i1 + 1).to_string(), (i2 + 1).to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_mask(path: &Path, p1: usize, p2: usize) -> Result<ObservationMask> {
    let mut rdr = csv::Reader::from_path(path)?;
    check_header(path, rdr.headers()?, &["i1", "i2"])?;
    let mut pairs = Vec::new();
    for rec in rdr.deserialize::<(usize, usize)>() {
        let (i1, i2) = rec?;
        if i1 == 0 || i2 == 0 {
            return Err(schema_err(path, "mask indices are 1-based"));
        }
        pairs.push((i1 - 1, i2 - 1));
    }
    ObservationMask::from_missing(p1, p2, pairs)
}

/// Solver settings recorded alongside a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub config: RunConfig,
}

impl ResultFile {
    pub fn new(result: &SolveResult, config: RunConfig) -> Self {
        Self {
            w1: result.w1.as_slice().to_vec(),
            w2: result.w2.as_slice().to_vec(),
            objective_trace: result.objective_trace.clone(),
            iterations: result.iterations,
            converged: result.converged,
            config,
        }
    }

    /// The learned factors; node counts follow from the vector lengths.
    pub fn model(&self) -> Result<ProductModel> {
        Ok(ProductModel::new(WeightVector::from_vec(self.w1.clone())?, WeightVector::from_vec(self.w2.clone())?))
    }
}

/// One `alpha` of a `learn` invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnRun {
    pub alpha: f64,
    /// Result file name, relative to the report; absent when the run failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnReport {
    pub runs: Vec<LearnRun>,
    /// Index into `runs` of the lowest product error; needs ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best: Option<usize>,
}

/// Accuracy of a learned model against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evaluation {
    pub rel_err: RelErrors,
    pub pr_auc: f64,
}

/// One row of the benchmark metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRow {
    pub experiment: String,
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub seed: u64,
    pub rel_err_product: f64,
    pub rel_err_f1: f64,
    pub rel_err_f2: f64,
    pub pr_auc: f64,
    pub iterations: usize,
    pub wall_ms: u64,
}

pub const METRICS_HEADER: [&str; 11] = [
    "experiment",
    "n",
    "p1",
    "p2",
    "seed",
    "rel_err_product",
    "rel_err_f1",
    "rel_err_f2",
    "pr_auc",
    "iterations",
    "wall_ms",
];

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    out.write_record(METRICS_HEADER)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    check_header(path, rdr.headers()?, &METRICS_HEADER)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Rate fit of one experiment family, as written by the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateFitEntry {
    pub experiment: String,
    pub alpha: f64,
    #[serde(flatten)]
    pub fit: RateFit,
    /// Mean product relative error per sample size.
    pub mean_rel_err: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateFitFile {
    pub fits: Vec<RateFitEntry>,
    /// Trials that failed, as `experiment/n/seed: message`.
    pub failures: Vec<String>,
}

/// Which documented format a file matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Graph,
    EdgeList,
    Signals,
    SignalManifest,
    Mask,
    Result,
    Metrics,
    RateFit,
    Experiment,
    LearnReport,
    Evaluation,
}

impl std::fmt::Display for FileKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FileKind::Graph => "graph",
            FileKind::EdgeList => "edge-list",
            FileKind::Signals => "signals",
            FileKind::SignalManifest => "signal-manifest",
            FileKind::Mask => "mask",
            FileKind::Result => "result",
            FileKind::Metrics => "metrics",
            FileKind::RateFit => "rate-fit",
            FileKind::Experiment => "experiment",
            FileKind::LearnReport => "learn-report",
            FileKind::Evaluation => "evaluation",
        };
        f.write_str(s)
    }
}

/// Detects the format of `path` and validates it against that schema.
pub fn schema_check(path: &Path) -> Result<FileKind> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "json" => {
            let value: serde_json::Value = read_json(path)?;
            let obj = value.as_object().ok_or_else(|| schema_err(path, "top level must be an object"))?;
            let has = |k: &str| obj.contains_key(k);
            if has("w1") {
                let r: ResultFile = serde_json::from_value(value).map_err(|e| schema_err(path, e.to_string()))?;
                for w in [&r.w1, &r.w2] {
                    let p = nodes_for_len(w.len())
                        .ok_or_else(|| schema_err(path, "weight vector length is not p(p-1)/2"))?;
                    WeightVector::new(p, w.clone()).map_err(|e| schema_err(path, e.to_string()))?;
                }
                Ok(FileKind::Result)
            } else if has("w") {
                serde_json::from_value::<WeightVector>(value).map_err(|e| schema_err(path, e.to_string()))?;
                Ok(FileKind::Graph)
            } else if has("runs") {
                let r: LearnReport = serde_json::from_value(value).map_err(|e| schema_err(path, e.to_string()))?;
                if r.best.is_some_and(|b| b >= r.runs.len()) {
                    return Err(schema_err(path, "best index out of range"));
                }
                Ok(FileKind::LearnReport)
            } else if has("rel_err") {
                serde_json::from_value::<Evaluation>(value).map_err(|e| schema_err(path, e.to_string()))?;
                Ok(FileKind::Evaluation)
            } else if has("fits") {
                serde_json::from_value::<RateFitFile>(value).map_err(|e| schema_err(path, e.to_string()))?;
                Ok(FileKind::RateFit)
            } else if has("scenarios") {
                let m: crate::experiment::ExperimentManifest =
                    serde_json::from_value(value).map_err(|e| schema_err(path, e.to_string()))?;
                m.validate().map_err(|e| schema_err(path, e.to_string()))?;
                Ok(FileKind::Experiment)
            } else if has("p1") && has("n") {
                serde_json::from_value::<SignalManifest>(value).map_err(|e| schema_err(path, e.to_string()))?;
                Ok(FileKind::SignalManifest)
            } else {
                Err(schema_err(path, "unrecognized JSON document"))
            }
        }
        "csv" => {
            let first = BufReader::new(File::open(path)?).lines().next().transpose()?.unwrap_or_default();
            let header: Vec<&str> = first.split(',').map(str::trim).collect();
            if header == ["i", "j", "weight"] {
                let max = csv::Reader::from_path(path)?
                    .deserialize::<(usize, usize, f64)>()
                    .map(|r| r.map(|(i, _, _)| i))
                    .collect::<std::result::Result<Vec<_>, _>>()?
                    .into_iter()
                    .max()
                    .unwrap_or(1);
                read_edge_list(path, max.max(1))?;
                Ok(FileKind::EdgeList)
            } else if header == ["i1", "i2"] {
                let pairs = csv::Reader::from_path(path)?
                    .deserialize::<(usize, usize)>()
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                if pairs.iter().any(|&(a, b)| a == 0 || b == 0) {
                    return Err(schema_err(path, "mask indices are 1-based"));
                }
                Ok(FileKind::Mask)
            } else if header == METRICS_HEADER {
                read_metrics(path)?;
                Ok(FileKind::Metrics)
            } else {
                read_signal_rows(path)?;
                Ok(FileKind::Signals)
            }
        }
        _ => Err(schema_err(path, "unknown extension (expected .json or .csv)")),
    }
}
