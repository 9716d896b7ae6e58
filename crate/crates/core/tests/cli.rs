use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_entropy-decay"));
    c.env_remove("ENTROPY_DECAY_OUTPUT_DIR");
    c
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().arg("--output").arg(dir).args(args).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn task_file(dir: &Path, ext: &str) -> std::path::PathBuf {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            p.extension().is_some_and(|e| e == ext)
                && p.file_name().unwrap().to_string_lossy().starts_with("task-")
        })
        .collect();
    files.sort();
    files.remove(0)
}

/// Every float in a report must sit under a `value` next to a `kind`;
/// integers are counts or indices.
fn numbers_are_tagged(v: &Value, tagged: bool, path: &str, bad: &mut Vec<String>) {
    match v {
        Value::Number(n) if n.is_f64() && !tagged => bad.push(path.to_string()),
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                numbers_are_tagged(x, tagged, &format!("{path}[{i}]"), bad);
            }
        }
        Value::Object(map) => {
            let is_tagged = map.contains_key("kind") && map.contains_key("value");
            for (k, x) in map {
                numbers_are_tagged(x, tagged || (is_tagged && k == "value"), &format!("{path}.{k}"), bad);
            }
        }
        _ => {}
    }
}

const EVOLVE_CONFIG: &str = r#"seed = 3

[model]
preset = "poisson"
lambda = 1.0
n_max = 20

[[tasks]]
type = "evolve"
t_max = 2.0
points = 3
f0 = { type = "random" }
"#;

#[test]
fn certify_reports_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["certify", "--model", "poisson:lambda=1,n_max=30"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&task_file(dir.path(), "json"));
    let text = report.to_string();
    assert!(text.contains("theorem1_a"), "{text}");
    let mut found = false;
    let mut stack = vec![&report];
    while let Some(v) = stack.pop() {
        match v {
            Value::Object(m) => {
                if m.get("kind").and_then(Value::as_str) == Some("certified_lower_bound") {
                    assert_eq!(m["value"].as_f64(), Some(1.0));
                    found = true;
                }
                stack.extend(m.values());
            }
            Value::Array(a) => stack.extend(a),
            _ => {}
        }
    }
    assert!(found);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = run_in(dir.path(), &["certify", "--model", "poisson:lambda=-1,n_max=30"]);
    assert_eq!(bad.status.code(), Some(1));
    let unknown = run_in(dir.path(), &["certify", "--model", "nosuch:x=1"]);
    assert_eq!(unknown.status.code(), Some(1));
    let failed = run_in(
        dir.path(),
        &["evolve", "--model", "poisson:lambda=1,n_max=20", "--t-max", "2", "--check", "mlsi=100"],
    );
    assert_eq!(failed.status.code(), Some(2));
    let ok = run_in(
        dir.path(),
        &["evolve", "--model", "poisson:lambda=1,n_max=20", "--t-max", "2", "--check", "mlsi=1"],
    );
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\n\n[model]\npreset = \"poisson\"\nlambda = 1.0\nn_max = 5\ncolour = 3\n\n[[tasks]]\ntype = \"certify\"\n").unwrap();
    let out = run_in(&dir.path().join("out"), &["report", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("colour") && err.contains("line 7"), "{err}");
}

#[test]
fn reports_are_deterministic_and_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, EVOLVE_CONFIG).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run_in(d, &["report", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["manifest.json", "config.toml"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
    let (ja, jb) = (task_file(&a, "json"), task_file(&b, "json"));
    assert_eq!(fs::read(&ja).unwrap(), fs::read(&jb).unwrap());
    assert_eq!(fs::read(task_file(&a, "csv")).unwrap(), fs::read(task_file(&b, "csv")).unwrap());

    let report = json(&ja);
    let mut bad = Vec::new();
    numbers_are_tagged(&report["report"], false, "report", &mut bad);
    assert!(bad.is_empty(), "untagged numbers: {bad:?}");

    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    let sha = manifest["config_sha256"].as_str().unwrap();
    assert_eq!(sha.len(), 64);
    assert!(sha.chars().all(|c| c.is_ascii_hexdigit()));
    assert!(!manifest.to_string().contains("time"));
}

#[test]
fn csv_has_header_and_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, EVOLVE_CONFIG).unwrap();
    let out = run_in(dir.path(), &["report", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(task_file(dir.path(), "csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4, "{csv}");
    let header: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(header, ["t", "entropy", "d_entropy", "d2_entropy"]);
    let ent_col = 1;
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), header.len());
        for cell in &cells {
            let v: f64 = cell.parse().unwrap();
            assert_eq!(format!("{v:.16e}").parse::<f64>().unwrap(), v);
        }
        let e = cells[ent_col];
        let digits = e.trim_start_matches('-').split(['e', 'E']).next().unwrap().replace('.', "");
        let significant = digits.trim_start_matches('0').len();
        assert!(significant >= 15 || e.parse::<f64>().unwrap() == 0.0, "{e}");
    }
}

#[test]
fn constant_initial_function_has_zero_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[model]\npreset = \"two_point\"\nrate = 1.0\n\n[[tasks]]\ntype = \"evolve\"\nt_max = 1.0\npoints = 5\nf0 = { type = \"values\", values = [2.0, 2.0] }\n",
    )
    .unwrap();
    let out = run_in(dir.path(), &["report", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(task_file(dir.path(), "csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    for name in ["entropy", "d_entropy", "d2_entropy"] {
        let col = header.iter().position(|h| *h == name).unwrap();
        for line in csv.lines().skip(1) {
            let v: f64 = line.split(',').nth(col).unwrap().parse().unwrap();
            assert_eq!(v.abs(), 0.0, "{name}: {line}");
        }
    }
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let out = bin()
        .env("ENTROPY_DECAY_OUTPUT_DIR", &target)
        .args(["counterexample", "--c1", "3", "--epsilon", "0.01"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(target.join("manifest.json").exists());
    let flag = dir.path().join("from-flag");
    let out = bin()
        .env("ENTROPY_DECAY_OUTPUT_DIR", &target)
        .arg("--output")
        .arg(&flag)
        .args(["counterexample", "--c1", "3", "--epsilon", "0.01"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(flag.join("manifest.json").exists());
}

#[test]
fn parallel_sweep_matches_serial() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep", "--model", "poisson:lambda=1,n_max=15", "--parameter", "lambda", "--values", "0.5,1,2",
        "--restarts", "4",
    ];
    let (s, p) = (dir.path().join("serial"), dir.path().join("parallel"));
    assert_eq!(run_in(&s, &args).status.code(), Some(0));
    let mut par = args.to_vec();
    par.push("--parallel-sweep");
    assert_eq!(run_in(&p, &par).status.code(), Some(0));
    assert_eq!(fs::read(task_file(&s, "json")).unwrap(), fs::read(task_file(&p, "json")).unwrap());
    assert_eq!(fs::read(task_file(&s, "csv")).unwrap(), fs::read(task_file(&p, "csv")).unwrap());
    let csv = fs::read_to_string(task_file(&s, "csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn two_point_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["estimate", "--model", "two_point:rate=1", "--kind", "mlsi"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(task_file(dir.path(), "json")).unwrap();
    assert!(text.contains("numerical_upper_estimate"));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("estimate"), "{stdout}");
}

#[test]
fn counterexample_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["counterexample", "--c1", "100", "--epsilon", "0.01"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&task_file(dir.path(), "json"));
    assert_eq!(report["task"], "counterexample");
    assert!(report.to_string().contains("closed_form_matches_direct"));
}

#[test]
fn every_task_report_is_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 5] = [
        &["certify", "--model", "linear_zr:a=1/1.2/1.4,particles=3"],
        &["estimate", "--model", "poisson:lambda=1,n_max=12", "--kind", "kappa", "--restarts", "3"],
        &["counterexample", "--c1", "100", "--epsilon", "0.01"],
        &["smooth", "--model", "sine_death:amplitude=0.4,n_max=60", "--n0", "7"],
        &["sweep", "--model", "two_point:rate=1", "--parameter", "rate", "--values", "0.5,2", "--restarts", "2"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let out_dir = dir.path().join(i.to_string());
        let out = run_in(&out_dir, args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let mut bad = Vec::new();
        numbers_are_tagged(&json(&task_file(&out_dir, "json"))["report"], false, "report", &mut bad);
        assert!(bad.is_empty(), "{args:?}: untagged numbers {bad:?}");
    }
}
