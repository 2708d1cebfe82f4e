use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mgoig"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().env("MGOIG_OUT_DIR", dir).args(args).output().unwrap()
}

fn rows(csv_path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(csv_path).unwrap();
    r.records().map(|x| x.unwrap()).collect()
}

fn column(csv_path: &Path, name: &str) -> usize {
    let mut r = csv::Reader::from_path(csv_path).unwrap();
    r.headers().unwrap().iter().position(|h| h == name).unwrap()
}

#[test]
fn transductive_rows_satisfy_bounds() {
    let out = TempDir::new().unwrap();
    let cfg = configs().join("transductive.json");
    let o = run_in(out.path(), &["run", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = out.path().join("transductive.csv");
    let sat = column(&csv, "bound_satisfied");
    let recs = rows(&csv);
    assert!(!recs.is_empty());
    for r in recs.iter().filter(|r| !r[sat].is_empty()) {
        assert_eq!(&r[sat], "true", "{r:?}");
    }
    assert!(out.path().join("transductive.manifest.json").exists());
}

#[test]
fn square_matching_modes() {
    let cfg = configs().join("match-solve.json");
    let o = bin().args(["match", "solve", cfg.to_str().unwrap()]).output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("value: 4 of 4"), "{text}");
    assert!(text.contains("integral: false"), "{text}");
    assert!(text.contains("complete: true"), "{text}");

    let o = bin().args(["--mode", "ceil", "match", "solve", cfg.to_str().unwrap()]).output().unwrap();
    let text = stdout(&o);
    assert!(text.contains("mode: ceil") && text.contains("integral: true"), "{text}");

    let out = TempDir::new().unwrap();
    let o = run_in(out.path(), &["run", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = out.path().join("square.csv");
    let (metric, exact) = (column(&csv, "metric"), column(&csv, "value_exact"));
    let recs = rows(&csv);
    let get = |m: &str| recs.iter().find(|r| &r[metric] == m).map(|r| r[exact].to_string()).unwrap();
    assert_eq!(get("value"), "4");
    assert_eq!(get("integral"), "0");
}

#[test]
fn overlapping_exact_caps_exit_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "tight.json",
        r#"{"experiment":"match-solve","id":"tight","domain":2,
            "hypotheses":{"kind":"explicit","bits":["00","01","10"]},
            "groups":{"kind":"explicit","bits":["10","11"]},"mode":"exact"}"#,
    );
    let o = run_in(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("bound-violated"));
    let csv = dir.path().join("tight.csv");
    let (metric, exact, sat) = (column(&csv, "metric"), column(&csv, "value_exact"), column(&csv, "bound_satisfied"));
    let value = rows(&csv).into_iter().find(|r| &r[metric] == "value").unwrap();
    assert_eq!(&value[exact], "11/6");
    assert_eq!(&value[sat], "false");
}

#[test]
fn empty_grid_is_config_invalid() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bad.json",
        r#"{"experiment":"prediction","domain":3,"hypotheses":{"kind":"thresholds"},
            "groups":{"kind":"full"},"task":{"masses":"uniform","target":"011"},"n_grid":[]}"#,
    );
    let o = run_in(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("config-invalid"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_is_not_a_bound_failure() {
    let o = bin().arg("bogus").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn describe_reports_graph_sizes() {
    let cfg = configs().join("oig-audit.json");
    let o = bin().args(["describe", cfg.to_str().unwrap()]).output().unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("4 vertices, 3 edges, 1 group, d_g=3/4"), "{}", stdout(&o));

    let dir = TempDir::new().unwrap();
    let cube = write(
        &dir,
        "cube.json",
        r#"{"experiment":"oig-audit","domain":3,"hypotheses":{"kind":"full_cube"},"groups":{"kind":"full"}}"#,
    );
    let o = bin().args(["describe", cube.to_str().unwrap()]).output().unwrap();
    assert!(stdout(&o).contains("8 vertices, 12 edges"), "{}", stdout(&o));

    let big = write(
        &dir,
        "big.json",
        r#"{"experiment":"agnostic","domain":4,"hypotheses":{"kind":"thresholds"},
            "groups":{"kind":"full"},"n_grid":[20]}"#,
    );
    let o = bin().args(["describe", big.to_str().unwrap()]).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let all = stdout(&o) + &stderr(&o);
    assert!(all.contains("exceeds the 12-coordinate budget"), "{all}");
}

#[test]
fn same_seed_same_bytes() {
    let cfg = configs().join("agnostic.json");
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let c = TempDir::new().unwrap();
    assert!(run_in(a.path(), &["--jobs", "1", "run", cfg.to_str().unwrap()]).status.success());
    assert!(run_in(b.path(), &["--jobs", "3", "run", cfg.to_str().unwrap()]).status.success());
    assert!(run_in(c.path(), &["--seed", "99", "run", cfg.to_str().unwrap()]).status.success());
    let read = |d: &TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "agnostic.csv"), read(&b, "agnostic.csv"));

    let hash = |d: &TempDir| {
        let v: serde_json::Value = serde_json::from_slice(&read(d, "agnostic.manifest.json")).unwrap();
        v["config_sha256"].as_str().unwrap().to_string()
    };
    assert_eq!(hash(&a), hash(&b));
    assert_ne!(hash(&a), hash(&c));
}

#[test]
fn predict_commands_emit_json() {
    let dir = TempDir::new().unwrap();
    let sample = write(&dir, "s.json", r#"{"points":[0,2],"labels":[0,1]}"#);
    let trans = configs().join("transductive.json");
    let o = bin()
        .args(["predict", "--learner", "mgoig", "--config"])
        .arg(&trans)
        .arg("--sample")
        .arg(&sample)
        .args(["--point", "1"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["point"], 1);
    assert_eq!(v["prob_one"], "1");

    let agn = configs().join("agnostic.json");
    let o = bin()
        .args(["agnostic", "predict", "--config"])
        .arg(&agn)
        .arg("--sample")
        .arg(&sample)
        .args(["--point", "1"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let p = v["prob_one_decimal"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));

    let o = bin()
        .args(["agnostic", "audit", "--config"])
        .arg(&agn)
        .arg("--sample")
        .arg(&sample)
        .args(["--point", "1"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["groups"].as_array().unwrap().iter().all(|g| g.get("phi").is_some()));
}

#[test]
fn bad_sample_is_rejected() {
    let dir = TempDir::new().unwrap();
    let sample = write(&dir, "s.json", r#"{"points":[0,2],"labels":[0,2]}"#);
    let o = bin()
        .args(["agnostic", "predict", "--config"])
        .arg(configs().join("agnostic.json"))
        .arg("--sample")
        .arg(&sample)
        .args(["--point", "1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sample-invalid"));
}

#[test]
fn oig_dump_formats() {
    let cfg = configs().join("oig-audit.json");
    let o = bin().args(["oig", "dump", "--format", "dot", "--config"]).arg(&cfg).output().unwrap();
    let dot = stdout(&o);
    assert!(dot.starts_with("graph oig {"), "{dot}");
    assert_eq!(dot.matches(" -- ").count(), 3);

    let o = bin().args(["oig", "dump", "--config"]).arg(&cfg).output().unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.is_object());
}

#[test]
fn output_field_beats_env() {
    let env_dir = TempDir::new().unwrap();
    let own = TempDir::new().unwrap();
    let body = format!(
        r#"{{"experiment":"oig-audit","id":"placed","domain":3,"hypotheses":{{"kind":"thresholds"}},
            "groups":{{"kind":"full"}},"output":{}}}"#,
        serde_json::to_string(own.path().to_str().unwrap()).unwrap()
    );
    let cfg = write(&own, "c.json", &body);
    let o = run_in(env_dir.path(), &["run", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(own.path().join("placed.csv").exists());
    assert!(!env_dir.path().join("placed.csv").exists());
}
