use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fpb_sim::io::{read_counts, read_params};
use fpb_sim::{ErrorModelParams, Weighting};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fpb-sim"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("failed to launch fpb-sim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn shipped() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/measured_counts.csv")
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .take_while(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn field(rows: &[Vec<String>], row: usize, name: &str) -> f64 {
    let col = rows[0]
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    rows[row][col].parse().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn curve_endpoints_and_grid() {
    let o = run(&["curve", "--ideal", "--steps", "30"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[0], ["pe", "renyi_hv", "renyi_da", "renyi_ideal"]);
    assert_eq!(rows.len(), 32);
    assert_eq!(field(&rows, 1, "renyi_ideal"), 0.0);
    assert!((field(&rows, 31, "renyi_ideal") - 1.0).abs() < 1e-5);
    assert!((field(&rows, 31, "pe") - 1.0 / 3.0).abs() < 1e-5);
    for r in 1..rows.len() {
        let ideal = field(&rows, r, "renyi_ideal");
        assert!((field(&rows, r, "renyi_hv") - ideal).abs() < 1e-5);
        assert!((field(&rows, r, "renyi_da") - ideal).abs() < 1e-5);
    }
}

#[test]
fn curve_with_reference_parameters_stays_below_ideal_at_full_information() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.json");
    std::fs::write(
        &params,
        r#"{"d_xi":3,"d_chi":-11,"d_theta_a_h":3.2,"d_theta_a_d":0.9,"d_theta_a_v":-0.7,
            "d_theta_a_a":-2.3,"alpha":12.3,"delta":3.6,"d_theta_b_hv":-1.8,"d_theta_b_da":0}"#,
    )
    .unwrap();
    let o = run(&["--params", p(&params), "curve", "--steps", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    let last = rows.len() - 1;
    assert!(field(&rows, last, "renyi_hv") < 1.0);
    assert!(field(&rows, last, "renyi_da") < 1.0);
    assert!(field(&rows, 1, "renyi_hv") > 0.0);
}

#[test]
fn table_json_output() {
    let o = run(&["table", "--pe", "0.1", "--states", "D", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let row = &doc.as_array().unwrap()[0];
    assert_eq!(row["alice"], "D");
    assert_eq!(row["bob_basis"], "DA");
    let probs: Vec<f64> = row["probs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let want = [0.05, 0.05, 0.167, 0.733];
    for (a, b) in probs.iter().zip(want) {
        assert!((a - b).abs() < 5e-4, "{probs:?}");
    }
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (path, seed) in [(&a, "11"), (&b, "11"), (&c, "12")] {
        let o = run(&[
            "--out",
            p(path),
            "simulate",
            "--pe",
            "0,0.1",
            "--pairs",
            "5000",
            "--seed",
            seed,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (ta, tb, tc) = (
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        std::fs::read(&c).unwrap(),
    );
    assert_eq!(ta, tb);
    assert_ne!(ta, tc);
    let records = read_counts(&a).unwrap();
    assert_eq!(records.len(), 2 * 4 * 2);
    assert!(records.iter().all(|r| r.total() == 5000));
}

#[test]
fn estimate_shipped_counts() {
    let o = run(&["estimate", "--counts", p(&shipped())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut blocks = text.split("\n\n");
    let records = csv_rows(blocks.next().unwrap());
    let summary = csv_rows(blocks.next().unwrap().trim_start());
    assert_eq!(records.len(), 7);
    // A at pe = 0.1
    assert_eq!(records[5][0], "A");
    let want = [0.173, 0.702, 0.083, 0.042];
    for (name, w) in ["p10", "p11", "p01", "p00"].iter().zip(want) {
        assert!((field(&records, 5, name) - w).abs() < 5e-4);
    }
    assert_eq!(summary[0], ["basis", "pe", "renyi", "sifted_error_rate"]);
    assert!((field(&summary, 1, "sifted_error_rate") - 0.05526).abs() < 1e-4);
    let renyi_at_third = field(&summary, 3, "renyi");
    assert!(renyi_at_third > 0.8 && renyi_at_third < 1.0);
}

#[test]
fn estimate_noise_free_counts_recovers_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("nf.csv");
    let o = run(&[
        "--ideal",
        "--out",
        p(&counts),
        "simulate",
        "--pe",
        "0.1",
        "--bob-bases",
        "DA",
        "--states",
        "D,A",
        "--pairs",
        "1000000",
        "--noise-free",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["estimate", "--counts", p(&counts), "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let renyi = doc["summaries"][0]["renyi"].as_f64().unwrap();
    assert!((renyi - 0.480).abs() < 0.002, "{renyi}");
}

#[test]
fn pipeline_closes_at_large_n() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("big.csv");
    let o = run(&[
        "--out",
        p(&counts),
        "simulate",
        "--pe",
        "1/3",
        "--pairs",
        "1000000",
        "--seed",
        "4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = run(&[
        "table", "--pe", "1/3", "--states", "H,V,D,A", "--format", "json",
    ]);
    let model: serde_json::Value = serde_json::from_slice(&model.stdout).unwrap();
    let est = run(&["estimate", "--counts", p(&counts), "--format", "json"]);
    let est: serde_json::Value = serde_json::from_slice(&est.stdout).unwrap();
    let mut compared = 0;
    for m in model.as_array().unwrap() {
        let e = est["records"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["alice"] == m["alice"] && r["bob_basis"] == m["bob_basis"])
            .unwrap();
        for (a, b) in m["probs"]
            .as_array()
            .unwrap()
            .iter()
            .zip(e["probs"].as_array().unwrap())
        {
            assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 0.005);
            compared += 1;
        }
    }
    assert_eq!(compared, 16);
}

#[test]
fn fit_recovers_noise_free_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("design.csv");
    let params = dir.path().join("truth.json");
    let out = dir.path().join("fit.json");
    std::fs::write(
        &params,
        r#"{"d_xi":2,"d_chi":-4,"d_theta_a_h":1,"d_theta_a_d":-1,"d_theta_a_v":0.5,
            "d_theta_a_a":-0.5,"alpha":8,"delta":-3,"d_theta_b_hv":1.5,"d_theta_b_da":-1}"#,
    )
    .unwrap();
    let o = run(&[
        "--params",
        p(&params),
        "--out",
        p(&counts),
        "simulate",
        "--noise-free",
        "--pairs",
        "100000000",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["--out", p(&out), "fit", "--counts", p(&counts)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let fitted = read_params(&out).unwrap().to_degrees();
    let truth = read_params(&params).unwrap().to_degrees();
    for (a, b) in fitted.iter().zip(truth) {
        assert!((a - b).abs() < 0.05, "{fitted:?}");
    }
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(doc["converged"], true);
    assert!(doc["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn fit_on_shipped_counts_warns_about_partial_design() {
    let o = run(&["fit", "--counts", p(&shipped()), "--format", "csv"]);
    let err = stderr(&o);
    assert!(err.contains("24 data values"), "{err}");
    assert!(o.status.code() == Some(0) || o.status.code() == Some(2));
    assert!(stdout(&o).lines().any(|l| l.starts_with("alpha,")));
}

#[test]
fn fit_budget_exhaustion_exits_two() {
    let o = run(&["fit", "--counts", p(&shipped()), "--max-evals", "50"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("did not converge"));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["converged"], false);
}

#[test]
fn parse_errors_report_line_and_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "# comment\nD,DA,0.1,1,2,3,4\nD,DA,0.1,1,2,three,4\n").unwrap();
    let o = run(&["estimate", "--counts", p(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["curve", "--pe-min", "0.9"]).status.code(), Some(1));
    assert_eq!(
        run(&["--ideal", "--params", "x.json", "curve"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["nonsense"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn default_model_is_ideal_and_matches_library_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("s.csv");
    let o = run(&[
        "--out",
        p(&counts),
        "simulate",
        "--pe",
        "0.1",
        "--seed",
        "9",
    ]);
    assert!(o.status.success());
    let recs = read_counts(&counts).unwrap();
    let da: Vec<_> = recs
        .iter()
        .filter(|r| r.is_sifted() && r.bob_basis == fpb_sim::SiftBasis::DA)
        .cloned()
        .collect();
    let lib = fpb_sim::montecarlo::measured_renyi(&da, Weighting::Equal).unwrap();
    let model = fpb_sim::error_model::model_renyi(
        &ErrorModelParams::zero(),
        fpb_sim::SiftBasis::DA,
        &fpb_sim::ProbeConfig::new(0.1).unwrap(),
    )
    .unwrap();
    assert!((lib - model).abs() < 0.03, "{lib} vs {model}");
}
