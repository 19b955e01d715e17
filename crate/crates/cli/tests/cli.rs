use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use tucker_core::harness::{read_samples_csv, write_samples_csv, SAMPLES_HEADER};
use tucker_core::selector::{extract_features, Provenance, TrainingSample};
use tucker_core::tensor::{random_tensor, synth_lowrank, write_dten};
use tucker_core::{
    save_tucker, DenseMatrix, DenseTensor, Distribution, TuckerDecomposition, TuckerMeta,
};

fn tucker(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tucker"))
        .args(args)
        .output()
        .expect("spawn tucker")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_tensor(dir: &TempDir, name: &str, x: &DenseTensor) -> PathBuf {
    let path = dir.path().join(name);
    write_dten(&path, x).unwrap();
    path
}

#[test]
fn decompose_exact_lowrank_reports_small_error() {
    let dir = TempDir::new().unwrap();
    let x = synth_lowrank(&[12, 10, 8], &[3, 4, 2], 1).unwrap();
    let input = write_tensor(&dir, "x.dten", &x);
    let out = dir.path().join("out.tucker");
    let rep = dir.path().join("rep.json");
    let o = tucker(&[
        "decompose",
        "--input",
        p(&input),
        "--ranks",
        "3,4,2",
        "--strategy",
        "costmodel",
        "--output",
        p(&out),
        "--report",
        p(&rep),
        "--with-error",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let r = read_json(&rep);
    assert_eq!(r["schema_version"], 1);
    assert!(r["relative_error"].as_f64().unwrap() <= 1e-8);
    assert_eq!(r["modes"].as_array().unwrap().len(), 3);
    assert!(out.join("meta.json").exists());
}

#[test]
fn decompose_manual_echoes_solvers() {
    let dir = TempDir::new().unwrap();
    let x = random_tensor(&[8, 7, 6], 2, Distribution::Uniform).unwrap();
    let input = write_tensor(&dir, "x.dten", &x);
    let out = dir.path().join("out.tucker");
    let rep = dir.path().join("rep.json");
    let o = tucker(&[
        "decompose",
        "--input",
        p(&input),
        "--ranks",
        "3,3,3",
        "--strategy",
        "manual:e,a,e",
        "--output",
        p(&out),
        "--report",
        p(&rep),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let solvers: Vec<String> = read_json(&rep)["modes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["solver_used"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(solvers, ["EIG", "ALS", "EIG"]);
}

#[test]
fn decompose_rejects_too_many_ranks() {
    let dir = TempDir::new().unwrap();
    let x = random_tensor(&[4, 4, 4], 3, Distribution::Uniform).unwrap();
    let input = write_tensor(&dir, "x.dten", &x);
    let out = dir.path().join("out.tucker");
    let o = tucker(&[
        "decompose",
        "--input",
        p(&input),
        "--ranks",
        "2,2,2,2",
        "--strategy",
        "eig",
        "--output",
        p(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("rank"), "{}", stderr(&o));
}

#[test]
fn decompose_adaptive_without_model_falls_back() {
    let dir = TempDir::new().unwrap();
    let x = random_tensor(&[6, 5, 4], 4, Distribution::Uniform).unwrap();
    let input = write_tensor(&dir, "x.dten", &x);
    let out = dir.path().join("out.tucker");
    let rep = dir.path().join("rep.json");
    let o = tucker(&[
        "decompose",
        "--input",
        p(&input),
        "--ranks",
        "2,2,2",
        "--output",
        p(&out),
        "--report",
        p(&rep),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(&rep);
    assert_eq!(r["strategy"], "costmodel");
    assert!(r["notes"][0].as_str().unwrap().contains("costmodel"));
}

#[test]
fn decompose_missing_input_is_io_error() {
    let dir = TempDir::new().unwrap();
    let o = tucker(&[
        "decompose",
        "--input",
        p(&dir.path().join("nope.dten")),
        "--ranks",
        "1",
        "--strategy",
        "eig",
        "--output",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn decompose_bad_strategy_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let x = random_tensor(&[3, 3], 5, Distribution::Uniform).unwrap();
    let input = write_tensor(&dir, "x.dten", &x);
    let o = tucker(&[
        "decompose",
        "--input",
        p(&input),
        "--ranks",
        "2,2",
        "--strategy",
        "fastest",
        "--output",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 2);
}

fn error_value(o: &Output) -> f64 {
    assert_eq!(code(o), 0, "{}", stderr(o));
    stdout(o).trim().parse().unwrap()
}

#[test]
fn error_full_rank_is_tiny() {
    let dir = TempDir::new().unwrap();
    let x = random_tensor(&[5, 4, 3], 6, Distribution::Uniform).unwrap();
    let input = write_tensor(&dir, "x.dten", &x);
    let out = dir.path().join("out.tucker");
    let o = tucker(&[
        "decompose",
        "--input",
        p(&input),
        "--ranks",
        "5,4,3",
        "--strategy",
        "eig",
        "--output",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let e = error_value(&tucker(&[
        "error",
        "--input",
        p(&input),
        "--decomposition",
        p(&out),
    ]));
    assert!(e <= 1e-12, "{e}");
}

fn save_identity_decomposition(dir: &TempDir, core: DenseTensor) -> PathBuf {
    let dims = core.dims().to_vec();
    let t = TuckerDecomposition {
        factors: dims.iter().map(|&d| DenseMatrix::identity(d)).collect(),
        original_dims: dims,
        core,
    };
    let path = dir.path().join("fixed.tucker");
    save_tucker(&path, &t, &TuckerMeta::new(&t, "fixture", Vec::new())).unwrap();
    path
}

#[test]
fn error_zero_core_prints_one() {
    let dir = TempDir::new().unwrap();
    let x = random_tensor(&[3, 4, 2], 7, Distribution::Uniform).unwrap();
    let input = write_tensor(&dir, "x.dten", &x);
    let dec = save_identity_decomposition(&dir, DenseTensor::zeros(&[3, 4, 2]).unwrap());
    let o = tucker(&["error", "--input", p(&input), "--decomposition", p(&dec)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "1.000000");
}

#[test]
fn error_recovers_injected_perturbation() {
    let dir = TempDir::new().unwrap();
    let eps = 0.0125;
    let x = random_tensor(&[4, 5, 3], 8, Distribution::Normal).unwrap();
    let d = random_tensor(&[4, 5, 3], 9, Distribution::Normal).unwrap();
    // Project the perturbation off X, then scale it so ||D|| / ||X + D|| = eps.
    let dot: f64 = x.data().iter().zip(d.data()).map(|(a, b)| a * b).sum();
    let xx = x.squared_norm();
    let orth: Vec<f64> = x
        .data()
        .iter()
        .zip(d.data())
        .map(|(a, b)| b - dot / xx * a)
        .collect();
    let on = orth.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = eps * x.frobenius_norm() / (1.0 - eps * eps).sqrt() / on;
    let y: Vec<f64> = x
        .data()
        .iter()
        .zip(&orth)
        .map(|(a, b)| a + scale * b)
        .collect();
    let input = write_tensor(&dir, "y.dten", &DenseTensor::new(vec![4, 5, 3], y).unwrap());
    let dec = save_identity_decomposition(&dir, x);
    let e = error_value(&tucker(&[
        "error",
        "--input",
        p(&input),
        "--decomposition",
        p(&dec),
    ]));
    assert!((e - eps).abs() <= 1e-9, "{e}");
}

#[test]
fn error_shape_mismatch_and_missing_files() {
    let dir = TempDir::new().unwrap();
    let x = random_tensor(&[3, 4, 2], 10, Distribution::Uniform).unwrap();
    let input = write_tensor(&dir, "x.dten", &x);
    let dec = save_identity_decomposition(&dir, DenseTensor::zeros(&[3, 4, 3]).unwrap());
    assert_eq!(
        code(&tucker(&[
            "error",
            "--input",
            p(&input),
            "--decomposition",
            p(&dec)
        ])),
        2
    );
    let missing = dir.path().join("missing.tucker");
    assert_eq!(
        code(&tucker(&[
            "error",
            "--input",
            p(&input),
            "--decomposition",
            p(&missing)
        ])),
        3
    );
}

#[test]
fn reconstruct_roundtrip() {
    let dir = TempDir::new().unwrap();
    let x = synth_lowrank(&[6, 5, 4], &[2, 2, 2], 11).unwrap();
    let input = write_tensor(&dir, "x.dten", &x);
    let out = dir.path().join("out.tucker");
    let rec = dir.path().join("rec.dten");
    assert_eq!(
        code(&tucker(&[
            "decompose",
            "--input",
            p(&input),
            "--ranks",
            "2,2,2",
            "--strategy",
            "als",
            "--output",
            p(&out)
        ])),
        0
    );
    let o = tucker(&[
        "reconstruct",
        "--decomposition",
        p(&out),
        "--output",
        p(&rec),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let y = tucker_core::tensor::read_dten(&rec).unwrap();
    assert!(y.max_abs_diff(&x) <= 1e-9 * x.frobenius_norm());
}

#[test]
fn info_ones_fixture() {
    let dir = TempDir::new().unwrap();
    let input = write_tensor(
        &dir,
        "ones.dten",
        &DenseTensor::filled(&[2, 2, 2], 1.0).unwrap(),
    );
    let o = tucker(&["info", "--input", p(&input)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("order: 3"), "{s}");
    assert!(s.contains("dims: 2x2x2"), "{s}");
    assert!(s.contains("bytes: 64"), "{s}");
    assert!(s.contains("frobenius_norm: 2.828427"), "{s}");
}

#[test]
fn info_truncated_file() {
    let dir = TempDir::new().unwrap();
    let input = write_tensor(
        &dir,
        "x.dten",
        &DenseTensor::filled(&[2, 2, 2], 1.0).unwrap(),
    );
    let bytes = std::fs::read(&input).unwrap();
    std::fs::write(&input, &bytes[..bytes.len() - 5]).unwrap();
    let o = tucker(&["info", "--input", p(&input)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("bytes"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn info_order_one() {
    let dir = TempDir::new().unwrap();
    let input = write_tensor(
        &dir,
        "v.dten",
        &DenseTensor::new(vec![3], vec![1.0, 2.0, 2.0]).unwrap(),
    );
    let o = tucker(&["info", "--input", p(&input)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("order: 1"));
    assert!(stdout(&o).contains("frobenius_norm: 3.000000"));
}

fn shape_columns(path: &Path) -> Vec<(String, String, usize, bool, u8)> {
    read_samples_csv(path)
        .unwrap()
        .into_iter()
        .map(|s| {
            let dims = s
                .provenance
                .dims
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("x");
            let ranks = s
                .provenance
                .ranks
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("x");
            (dims, ranks, s.provenance.mode, s.tie, s.label)
        })
        .collect()
}

#[test]
fn gendata_contract_and_reproducibility() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = tucker(&[
            "gendata",
            "--count",
            "50",
            "--dim-range",
            "10:40",
            "--order",
            "3",
            "--seed",
            "5",
            "--out",
            p(out),
            "--repeats",
            "1",
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stdout(&o).is_empty());
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().next().unwrap(), SAMPLES_HEADER.join(","));
    assert!(text.lines().count() > 50);

    let (ra, rb) = (shape_columns(&a), shape_columns(&b));
    assert_eq!(ra.len(), rb.len());
    for (x, y) in ra.iter().zip(&rb) {
        assert_eq!((&x.0, &x.1, x.2), (&y.0, &y.1, y.2));
    }
    // Labels come from wall-clock timings, so only decided rows are compared
    // and a few flips from scheduling noise are tolerated.
    let decided: Vec<_> = ra.iter().zip(&rb).filter(|(x, y)| !x.3 && !y.3).collect();
    let agree = decided.iter().filter(|(x, y)| x.4 == y.4).count();
    assert!(
        agree as f64 >= 0.8 * decided.len() as f64,
        "{agree}/{}",
        decided.len()
    );
}

#[test]
fn gendata_rejects_inverted_range() {
    let dir = TempDir::new().unwrap();
    let o = tucker(&[
        "gendata",
        "--count",
        "5",
        "--dim-range",
        "40:10",
        "--out",
        p(&dir.path().join("s.csv")),
    ]);
    assert_eq!(code(&o), 2);
}

fn sample(i: usize, r: usize, j: usize, label: u8, k: usize) -> TrainingSample {
    let (te, ta) = if label == 0 { (1.0, 2.0) } else { (2.0, 1.0) };
    TrainingSample {
        features: extract_features(i, r, j),
        time_eig: te,
        time_als: ta,
        label,
        tie: false,
        provenance: Provenance {
            dims: vec![i, j],
            ranks: vec![r, 1],
            mode: 0,
            seed: k as u64,
        },
    }
}

/// EIG wins exactly when `I < 50`.
fn separable(n: usize) -> Vec<TrainingSample> {
    (0..n)
        .map(|k| {
            let i = [10, 20, 30, 40, 60, 80, 100, 120][k % 8];
            sample(i, 5, 400, u8::from(i >= 50), k)
        })
        .collect()
}

#[test]
fn train_separable_reaches_full_accuracy() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("s.csv");
    write_samples_csv(&csv, &separable(80)).unwrap();
    let model = dir.path().join("m.json");
    let eval = dir.path().join("e.json");
    let o = tucker(&[
        "train",
        "--samples",
        p(&csv),
        "--split",
        "0.7",
        "--max-depth-grid",
        "1:10",
        "--cv",
        "5",
        "--seed",
        "3",
        "--out",
        p(&model),
        "--eval-report",
        p(&eval),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let e = read_json(&eval);
    assert_eq!(e["accuracy"].as_f64(), Some(1.0));
    assert!(e["mean_regret"].as_f64().is_some());
    assert!(e["max_depth"].as_u64().is_some());
    assert!(model.exists());
}

#[test]
fn train_split_of_ten_rows_evaluates_three() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("s.csv");
    write_samples_csv(&csv, &separable(10)).unwrap();
    let eval = dir.path().join("e.json");
    let o = tucker(&[
        "train",
        "--samples",
        p(&csv),
        "--split",
        "0.7",
        "--cv",
        "2",
        "--out",
        p(&dir.path().join("m.json")),
        "--eval-report",
        p(&eval),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read_json(&eval)["n_test"], 3);
}

#[test]
fn train_single_class_writes_flagged_model() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("s.csv");
    let rows: Vec<_> = (0..12).map(|k| sample(10 + k, 3, 100, 0, k)).collect();
    write_samples_csv(&csv, &rows).unwrap();
    let model = dir.path().join("m.json");
    let o = tucker(&[
        "train",
        "--samples",
        p(&csv),
        "--cv",
        "2",
        "--out",
        p(&model),
    ]);
    assert_eq!(code(&o), 5);
    assert_eq!(read_json(&model)["metadata"]["single_class"], true);
}

#[test]
fn train_missing_csv_is_io_error() {
    let dir = TempDir::new().unwrap();
    let o = tucker(&[
        "train",
        "--samples",
        p(&dir.path().join("none.csv")),
        "--out",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(code(&o), 3);
}

fn bench_spec(dir: &TempDir) -> PathBuf {
    let x = random_tensor(&[20, 18, 16], 12, Distribution::Uniform).unwrap();
    write_tensor(dir, "case.dten", &x);
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"schema_version": 1, "cases": [{"name": "fixture", "ranks": [4, 4, 4], "path": "case.dten"}]}"#,
    )
    .unwrap();
    spec
}

#[test]
fn bench_eig_and_als_rows() {
    let dir = TempDir::new().unwrap();
    let spec = bench_spec(&dir);
    let out = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let o = tucker(&[
        "bench",
        "--tensors",
        p(&spec),
        "--strategies",
        "eig,als",
        "--out",
        p(&out),
        "--csv",
        p(&csv),
        "--repeats",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(&out);
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let errs: Vec<f64> = rows
        .iter()
        .map(|row| row["relative_error"].as_f64().unwrap())
        .collect();
    assert!((errs[0] - errs[1]).abs() <= 0.01, "{errs:?}");
    assert!(rows
        .iter()
        .all(|row| row["total_time"].as_f64().unwrap() > 0.0));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);
}

#[test]
fn bench_adaptive_without_model_notes_fallback() {
    let dir = TempDir::new().unwrap();
    let spec = bench_spec(&dir);
    let out = dir.path().join("r.json");
    let o = tucker(&[
        "bench",
        "--tensors",
        p(&spec),
        "--strategies",
        "adaptive",
        "--out",
        p(&out),
        "--repeats",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let notes = read_json(&out)["notes"].to_string();
    assert!(notes.contains("costmodel"), "{notes}");
}

#[test]
fn bench_empty_strategy_list() {
    let dir = TempDir::new().unwrap();
    let spec = bench_spec(&dir);
    let o = tucker(&[
        "bench",
        "--tensors",
        p(&spec),
        "--strategies",
        "",
        "--out",
        p(&dir.path().join("r.json")),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bench_all_cases_failing_exits_numeric() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"schema_version": 1, "cases": [{"name": "too_big", "ranks": [5, 5], "dims": [4, 4], "kind": "uniform"}]}"#,
    )
    .unwrap();
    let o = tucker(&[
        "bench",
        "--tensors",
        p(&spec),
        "--strategies",
        "als",
        "--out",
        p(&dir.path().join("r.json")),
    ]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn no_subcommand_is_usage_error() {
    assert_eq!(code(&tucker(&[])), 2);
}
