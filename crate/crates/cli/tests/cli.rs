use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn mwgl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwgl")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_manifest(dir: &Path, body: Value) -> PathBuf {
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    path
}

fn toy_manifest(dir: &Path, n_list: &[usize], seeds: &[u64]) -> PathBuf {
    write_manifest(
        dir,
        serde_json::json!({
            "scenarios": [{
                "id": "grid",
                "factor1": {"family": "grid", "rows": 1, "cols": 4},
                "factor2": {"family": "erdos_renyi", "prob": 0.6, "p": 5, "seed": 3}
            }],
            "n_list": n_list,
            "seeds": seeds,
            "solver": {"alpha": 0.0, "eta": 0.01, "tol": 1e-5, "max_iter": 20000}
        }),
    )
}

/// Generates one trial and returns its directory.
fn generated(dir: &Path, n: usize) -> PathBuf {
    let m = toy_manifest(dir, &[n], &[0]);
    let out = dir.join("data");
    assert_eq!(code(&mwgl(&["generate", "-m", s(&m), "-o", s(&out)])), 0);
    out.join("grid").join("seed0")
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let m = toy_manifest(dir.path(), &[10], &[0, 1]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&mwgl(&["generate", "-m", s(&m), "-o", s(&a)])), 0);
    assert_eq!(code(&mwgl(&["generate", "-m", s(&m), "-o", s(&b)])), 0);
    for seed in ["seed0", "seed1"] {
        for f in ["g1.json", "g2.json", "product.json", "signals_n10.csv", "signals_n10.manifest.json"] {
            let pa = a.join("grid").join(seed).join(f);
            assert_eq!(fs::read(&pa).unwrap(), fs::read(b.join("grid").join(seed).join(f)).unwrap(), "{f}");
        }
    }
    let g1 = json(&a.join("grid/seed0/g1.json"));
    assert_eq!(g1["p"], 4);
    let product = json(&a.join("grid/seed0/product.json"));
    assert_eq!(product["p"], 20);
    assert_ne!(fs::read(a.join("grid/seed0/g2.json")).unwrap(), fs::read(a.join("grid/seed1/g2.json")).unwrap());
}

#[test]
fn paper_sized_recipes_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let families = [
        serde_json::json!({"family": "erdos_renyi", "prob": 0.3, "p": 20}),
        serde_json::json!({"family": "barabasi_albert", "m": 1, "p": 25}),
        serde_json::json!({"family": "watts_strogatz", "degree": 2, "rewire": 0.1, "p": 20}),
        serde_json::json!({"family": "grid", "rows": 5, "cols": 5}),
    ];
    let scenarios: Vec<Value> = families
        .iter()
        .enumerate()
        .map(|(k, f)| serde_json::json!({"id": format!("s{k}"), "factor1": families[0], "factor2": f}))
        .collect();
    let m = write_manifest(dir.path(), serde_json::json!({"scenarios": scenarios, "n_list": [10], "seeds": [0]}));
    let out = dir.path().join("out");
    let run = mwgl(&["generate", "-m", s(&m), "-o", s(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    for k in 0..4 {
        assert_eq!(json(&out.join(format!("s{k}/seed0/g1.json")))["p"], 20);
        assert_eq!(json(&out.join(format!("s{k}/seed0/g2.json")))["p"], if k == 0 || k == 2 { 20 } else { 25 });
    }
}

#[test]
fn learn_converges_on_toy_data() {
    let dir = tempfile::tempdir().unwrap();
    let trial = generated(dir.path(), 200);
    let out = dir.path().join("fit");
    let run =
        mwgl(&["learn", "-s", s(&trial.join("signals_n200.csv")), "-o", s(&out), "--eta", "0.01", "--tol", "1e-5"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let result = json(&out.join("result.json"));
    assert_eq!(result["converged"], true);
    assert_eq!(result["w1"].as_array().unwrap().len(), 6);
    assert_eq!(result["w2"].as_array().unwrap().len(), 10);
    assert_eq!(result["config"]["eta"], 0.01);
    let report = json(&out.join("report.json"));
    assert_eq!(report["runs"].as_array().unwrap().len(), 1);
    assert!(report.get("best").is_none());

    let check = mwgl(&["schema-check", s(&out.join("result.json")), s(&out.join("report.json"))]);
    assert_eq!(code(&check), 0, "{}", String::from_utf8_lossy(&check.stdout));

    let ev = mwgl(&[
        "eval",
        "-r",
        s(&out.join("result.json")),
        "--truth-g1",
        s(&trial.join("g1.json")),
        "--truth-g2",
        s(&trial.join("g2.json")),
        "-o",
        s(&dir.path().join("eval.json")),
    ]);
    assert_eq!(code(&ev), 0);
    let e = json(&dir.path().join("eval.json"));
    assert!(e["rel_err"]["product"].as_f64().unwrap() < 1.0);
    assert!(e["pr_auc"].as_f64().unwrap() > 0.0);
    assert_eq!(code(&mwgl(&["schema-check", s(&dir.path().join("eval.json"))])), 0);
}

#[test]
fn alpha_grid_reports_best_run() {
    let dir = tempfile::tempdir().unwrap();
    let trial = generated(dir.path(), 200);
    let out = dir.path().join("grid");
    let run = mwgl(&[
        "learn",
        "-s",
        s(&trial.join("signals_n200.csv")),
        "-o",
        s(&out),
        "--alpha",
        "0,0.001,0.01,0.1",
        "--eta",
        "0.01",
        "--tol",
        "1e-5",
        "--truth-g1",
        s(&trial.join("g1.json")),
        "--truth-g2",
        s(&trial.join("g2.json")),
    ]);
    assert!(code(&run) == 0 || code(&run) == 4, "{}", String::from_utf8_lossy(&run.stderr));
    let report = json(&out.join("report.json"));
    let runs = report["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 4);
    let alphas: Vec<f64> = runs.iter().map(|r| r["alpha"].as_f64().unwrap()).collect();
    assert_eq!(alphas, [0.0, 0.001, 0.01, 0.1]);
    let best = report["best"].as_u64().unwrap() as usize;
    let err = |r: &Value| r["evaluation"]["rel_err"]["product"].as_f64();
    let best_err = err(&runs[best]).unwrap();
    assert!(runs.iter().filter_map(err).all(|e| e >= best_err));
    assert!(out.join("result_0.json").exists() && out.join("result_1.json").exists());
}

#[test]
fn mask_engages_imputation() {
    let dir = tempfile::tempdir().unwrap();
    let trial = generated(dir.path(), 100);
    let mask = dir.path().join("mask.csv");
    fs::write(&mask, "i1,i2\n1,2\n3,5\n").unwrap();
    let out = dir.path().join("fit");
    let run = mwgl(&[
        "learn",
        "-s",
        s(&trial.join("signals_n100.csv")),
        "--mask",
        s(&mask),
        "-o",
        s(&out),
        "--eta",
        "0.01",
        "--tol",
        "1e-5",
        "--beta",
        "0.5",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(json(&out.join("result.json"))["config"]["beta"], 0.5);
    let imputed = out.join("imputed.csv");
    assert!(imputed.exists());
    assert_eq!(code(&mwgl(&["schema-check", s(&imputed), s(&mask)])), 0);

    // Observed entries pass through unchanged.
    let original = fs::read_to_string(trial.join("signals_n100.csv")).unwrap();
    let filled = fs::read_to_string(&imputed).unwrap();
    for (a, b) in original.lines().zip(filled.lines()).take(5) {
        let a: Vec<f64> = a.split(',').map(|v| v.parse().unwrap()).collect();
        let b: Vec<f64> = b.split(',').map(|v| v.parse().unwrap()).collect();
        for (k, (x, y)) in a.iter().zip(&b).enumerate() {
            if k != 1 && k != 14 {
                assert_eq!(x, y);
            }
        }
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let trial = generated(dir.path(), 50);
    let sig = trial.join("signals_n50.csv");
    let out = dir.path().join("x");

    let missing = mwgl(&["learn", "-s", s(&dir.path().join("nope.csv")), "-o", s(&out)]);
    assert_eq!(code(&missing), 5);

    let stopped = mwgl(&["learn", "-s", s(&sig), "-o", s(&out), "--max-iter", "3"]);
    assert_eq!(code(&stopped), 3);
    assert_eq!(json(&out.join("result.json"))["converged"], false);

    let disconnected = mwgl(&["learn", "-s", s(&sig), "-o", s(&out), "--alpha", "1e6"]);
    assert_eq!(code(&disconnected), 4, "{}", String::from_utf8_lossy(&disconnected.stderr));

    let bad = mwgl(&["learn", "-s", s(&sig), "-o", s(&out), "--eta", "-1"]);
    assert_eq!(code(&bad), 2);

    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{\"w\": [1, 2]}").unwrap();
    assert_eq!(code(&mwgl(&["schema-check", s(&garbage)])), 2);
    assert_eq!(code(&mwgl(&["learn"])), 2);
}

fn metrics_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn tiny_benchmark_is_fast_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(
        dir.path(),
        serde_json::json!({
            "scenarios": [{
                "id": "er",
                "factor1": {"family": "erdos_renyi", "prob": 0.5, "p": 4},
                "factor2": {"family": "erdos_renyi", "prob": 0.5, "p": 5, "seed": 1}
            }],
            "n_list": [10, 40],
            "seeds": [0, 1, 2],
            "solver": {"alpha": 0.0, "eta": 0.01, "tol": 1e-5}
        }),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let start = Instant::now();
    let run = mwgl(&["benchmark", "-m", s(&m), "-o", s(&a), "-j", "1"]);
    assert!(start.elapsed().as_secs_f64() < 30.0);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(code(&mwgl(&["benchmark", "-m", s(&m), "-o", s(&b), "-j", "4"])), 0);

    let fit = json(&a.join("rate_fit.json"));
    let entry = &fit["fits"][0];
    for key in ["c", "r_squared", "slope_log_n"] {
        assert!(entry[key].is_number(), "{key}");
    }

    let (ra, rb) = (metrics_rows(&a.join("metrics.csv")), metrics_rows(&b.join("metrics.csv")));
    assert_eq!(ra.len(), 7);
    assert_eq!(ra[0].last().unwrap(), "wall_ms");
    let keys: Vec<(String, usize, u64)> =
        ra[1..].iter().map(|r| (r[0].clone(), r[1].parse().unwrap(), r[4].parse().unwrap())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    for (x, y) in ra.iter().zip(&rb).skip(1) {
        for k in 0..10 {
            match (x[k].parse::<f64>(), y[k].parse::<f64>()) {
                (Ok(u), Ok(v)) => assert!((u - v).abs() <= 1e-10 * u.abs().max(1.0), "{u} vs {v}"),
                _ => assert_eq!(x[k], y[k]),
            }
        }
    }
    for f in ["metrics.csv", "rate_fit.json"] {
        assert_eq!(code(&mwgl(&["schema-check", s(&a.join(f))])), 0, "{f}");
    }
    assert_eq!(code(&mwgl(&["schema-check", s(&m)])), 0);
}
