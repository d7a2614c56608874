use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-damage"))
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn modal_lists_ascending_frequencies() {
    let text = stdout(&run(&["modal", "--model", "canonical", "--count", "16", "--quiet"]));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 16);
    let f: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(f.windows(2).all(|w| w[0] < w[1]));
    assert!((f[0] - 128.2676509794028).abs() < 1e-6);
}

#[test]
fn identify_finds_the_two_damaged_bars() {
    let measured = data("measured_20.txt");
    let text = stdout(&run(&[
        "identify", "--model", "canonical", "--measured", &measured, "--method", "l1_eq", "--m", "9",
        "--quiet",
    ]));
    let finals: Vec<(usize, f64)> = csv_rows(&text)
        .iter()
        .filter(|r| &r[0] == "final")
        .map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    assert_eq!(finals.len(), 20);
    for (element, d) in finals {
        if element == 2 || element == 18 {
            assert!((d - 0.2).abs() < 1e-6);
        } else {
            assert!(d.abs() < 1e-6);
        }
    }
}

#[test]
fn dumped_system_solves_to_the_first_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("system.json");
    let sys = sys.to_str().unwrap();
    let measured = data("measured_20.txt");
    let text = stdout(&run(&[
        "identify", "--model", "canonical", "--measured", &measured, "--method", "l1_eq", "--m", "9",
        "--one-shot", "--dump-system", sys, "--format", "json", "--quiet",
    ]));
    let identify: serde_json::Value = serde_json::from_str(&text).unwrap();
    let text = stdout(&run(&["solve", "--problem", sys, "--method", "l1_eq", "--format", "json", "--quiet"]));
    let solve: serde_json::Value = serde_json::from_str(&text).unwrap();
    let damage = identify["damage"].as_array().unwrap();
    let x = solve["x"].as_array().unwrap();
    for (d, x) in damage.iter().zip(x) {
        assert!((d.as_f64().unwrap() + x.as_f64().unwrap()).abs() < 1e-9);
    }
    assert_eq!(solve["support"], serde_json::json!([2, 18]));
}

#[test]
fn mc_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = data("sweep.json");
    let mut outputs = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.path().join(name);
        stdout(&run(&[
            "mc", "--config", &sweep, "--realizations", "20", "--seed", "42", "--format", "json",
            "--output", path.to_str().unwrap(), "--quiet",
        ]));
        outputs.push(std::fs::read(path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let report: serde_json::Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!(report["seed"], 42);
    assert_eq!(report["cells"].as_array().unwrap().len(), 40);

    let csv_text = stdout(&run(&["mc", "--config", &sweep, "--realizations", "5", "--quiet"]));
    assert!(csv_text.starts_with("method,m,noise_pct,successes,realizations,rate\n"));
    assert_eq!(csv_rows(&csv_text).len(), 40);
}

#[test]
fn model_json_round_trips() {
    let text = stdout(&run(&["model", "--model", "canonical", "--format", "json", "--quiet"]));
    let doc: sparse_damage::fem::ModelDocument = serde_json::from_str(&text).unwrap();
    let shipped = std::fs::read_to_string(data("canonical_truss.json")).unwrap();
    let shipped: sparse_damage::fem::ModelDocument = serde_json::from_str(&shipped).unwrap();
    assert_eq!(doc, shipped);
    let text = stdout(&run(&["model", "--model", &data("canonical_truss.json"), "--quiet"]));
    assert_eq!(csv_rows(&text).len(), 20);
}

#[test]
fn study_emits_bar_chart_rows() {
    let text = stdout(&run(&[
        "study", "--scenario", &data("scenario_20.json"), "--method", "l1_eq", "--m", "9", "--quiet",
    ]));
    assert!(text.starts_with("iteration,element,damage_estimate\n"));
    assert_eq!(csv_rows(&text).len(), 4 * 20);
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["modal", "--model", "canonical", "--count", "3", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["modal", "--model", "/no/such/file.json", "--count", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1);
    let out = run(&["solve", "--problem", &data("sweep.json"), "--method", "l1_eq"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["identify", "--model", "canonical", "--measured", &data("measured_20.txt"), "--method", "l1_ineq", "--m", "9"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, r#"{"rows": 2, "cols": 1, "a": [1.0, 1.0], "b": [1.0, -1.0]}"#).unwrap();
    let out = run(&["solve", "--problem", path.to_str().unwrap(), "--method", "l1_eq"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1);
}
