use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dyadic"));
    c.env_remove("DYADIC_OUT_DIR");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const PETERMICHL_D4: &str = r#"{
    "tree": {"kind": "uniform", "depth": 4, "branching": 2},
    "symbol": {"kind": "petermichl", "alphas": "plus-minus"}
}"#;

#[test]
fn build_uniform_binary_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"tree": {"kind": "uniform", "depth": 3, "branching": 2}}"#,
    );
    let out = dir.path().join("out");
    let o = run("build", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["max_children"], 2);
    assert!((m["haar_c1"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((m["haar_c2"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(m["leaves"], 8);
    assert!(out.join("tree.json").exists() && out.join("haar.json").exists());
}

#[test]
fn build_random_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"tree": {"kind": "random", "seed": 7, "depth": 4, "branching": [2, 3],
                     "weight_law": {"law": "log_uniform", "spread": 4.0}},
            "haar": {"seed": 11}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run("build", &cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(run("build", &cfg, &b, &["--threads", "3"]).status.code(), Some(0));
    for f in ["manifest.json", "tree.json", "haar.json", "config.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m = json(&a.join("manifest.json"));
    assert_eq!(m["seeds"]["tree"], 7);
    assert_eq!(m["seeds"]["haar"], 11);
}

#[test]
fn listed_rule_without_weights_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"tree": {"kind": "uniform", "depth": 2, "branching": 2, "leaf_weight_rule": "listed"}}"#,
    );
    let o = run("build", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("leaf_weight_rule"));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let o = run("certify", &dir.path().join("nope.json"), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn certify_petermichl_passes_with_diagonal_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", PETERMICHL_D4);
    let out = dir.path().join("out");
    let o = run("certify", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("report.json"));
    assert_eq!(r["passed"], true);
    let cubes = r["composition"]["cubes"].as_array().unwrap();
    let interior: Vec<&Value> = cubes.iter().filter(|c| c["has_grandchildren"] == true).collect();
    assert!(!interior.is_empty());
    for c in interior {
        assert!((c["diagonal"].as_f64().unwrap() - 2.0).abs() < 1e-12, "{c}");
        assert!(c["diagonal_spread"].as_f64().unwrap() < 1e-12, "{c}");
    }
    let csv = fs::read_to_string(out.join("verdicts.csv")).unwrap();
    assert!(csv.starts_with("name,passed,enforced,detail\n"));
}

#[test]
fn corrupted_tree_fails_with_ultrametric_witness() {
    let dir = TempDir::new().unwrap();
    // Cube A claims measure 1.5 under a root of measure 1.
    write(
        dir.path(),
        "bad_tree.json",
        r#"{"leaf_weights": [0.25, 0.25, 0.5],
            "structure": [[[], []], []],
            "measures": [1.0, 1.5, 0.25, 0.25, 0.5]}"#,
    );
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"tree": {"kind": "file", "path": "bad_tree.json", "options": {"measures": "trust"}},
            "symbol": {"kind": "petermichl", "alphas": "plus-minus"}}"#,
    );
    let out = dir.path().join("out");
    let o = run("certify", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ultrametric"));
    let r = json(&out.join("report.json"));
    assert_eq!(r["ultrametric"]["holds"], false);
    let w = &r["ultrametric"]["worst"];
    assert!(w["excess"].as_f64().unwrap() > 0.0, "{w}");
}

#[test]
fn sweep_depths_three_to_eight_gives_six_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"tree": {"kind": "uniform", "depth": 3, "branching": 2},
            "symbol": {"kind": "petermichl", "alphas": "plus-minus"},
            "sweep": {"depths": [3, 4, 5, 6, 7, 8]}}"#,
    );
    let out = dir.path().join("out");
    let o = run("sweep", &cfg, &out, &[]);
    // The size constant is not depth-stable, so the sweep verdict fails.
    assert_eq!(o.status.code(), Some(1));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("depth,leaves,status,size_c"));
    let t = json(&out.join("sweep.json"));
    assert_eq!(t["rows"].as_array().unwrap().len(), 6);
}

#[test]
fn sweep_without_section_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", PETERMICHL_D4);
    assert_eq!(run("sweep", &cfg, &dir.path().join("out"), &[]).status.code(), Some(2));
}

fn values(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect()
}

#[test]
fn apply_root_haar_under_petermichl() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"tree": {"kind": "uniform", "depth": 3, "branching": 2},
            "symbol": {"kind": "petermichl", "alphas": "plus-minus"}}"#,
    );
    let input = write(dir.path(), "f.txt", "1\n1\n1\n1\n-1\n-1\n-1\n-1\n");
    let out = dir.path().join("out");
    let o = run("apply", &cfg, &out, &["--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(&out.join("coefficients.json"));
    let detail: Vec<f64> = c["output"]["detail"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(run("build", &cfg, &out, &[]).status.code(), Some(0));
    let haar = json(&out.join("haar.json"));
    let cube_of: Vec<u64> = haar["functions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["cube"].as_u64().unwrap())
        .collect();
    // Preorder ids: the root's children are cubes 1 and 8.
    for (h, &d) in detail.iter().enumerate() {
        let want = match cube_of[h] {
            1 => 1.0,
            8 => -1.0,
            _ => 0.0,
        };
        assert!((d - want).abs() < 1e-12, "h {h} on cube {}: {d}", cube_of[h]);
    }
}

#[test]
fn apply_constant_gives_zero_and_identity_preserves_mean_zero() {
    let dir = TempDir::new().unwrap();
    let pm = write(
        dir.path(),
        "pm.json",
        r#"{"tree": {"kind": "uniform", "depth": 2, "branching": 3},
            "symbol": {"kind": "petermichl", "alphas": "random:4"}}"#,
    );
    let constant = write(dir.path(), "c.txt", &"2.5\n".repeat(9));
    let out = dir.path().join("pm");
    assert_eq!(
        run("apply", &pm, &out, &["--input", constant.to_str().unwrap()]).status.code(),
        Some(0)
    );
    assert!(values(&out.join("output.txt")).iter().all(|v| v.abs() < 1e-12));

    let id = write(
        dir.path(),
        "id.json",
        r#"{"tree": {"kind": "uniform", "depth": 2, "branching": 3}}"#,
    );
    let f = [0.3, -1.2, 0.9, 2.0, -0.5, 0.1, -0.7, 0.4, -1.3];
    let mean = f.iter().sum::<f64>() / 9.0;
    let text: String = f.iter().map(|v| format!("{}\n", v - mean)).collect();
    let input = write(dir.path(), "f.txt", &text);
    let out = dir.path().join("id");
    assert_eq!(
        run("apply", &id, &out, &["--input", input.to_str().unwrap()]).status.code(),
        Some(0)
    );
    for (got, want) in values(&out.join("output.txt")).iter().zip(f) {
        assert!((got - (want - mean)).abs() < 1e-10);
    }
}

#[test]
fn apply_length_mismatch_is_an_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", PETERMICHL_D4);
    let input = write(dir.path(), "f.txt", "1\n2\n3\n");
    let o = run("apply", &cfg, &dir.path().join("out"), &["--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("leaves"));
}

#[test]
fn every_command_is_byte_identical_on_rerun() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"tree": {"kind": "random", "seed": 5, "depth": 4, "branching": [2, 4],
                     "weight_law": {"law": "uniform", "lo": 0.5, "hi": 2.0}},
            "haar": {"seed": 3},
            "symbol": {"kind": "petermichl", "alphas": "random:9"},
            "certify": {"seed": 21, "probe_trials": 40},
            "sweep": {"depths": [2, 3, 4]}}"#,
    );
    let input = write(
        dir.path(),
        "f.txt",
        &(0..256).map(|i| format!("{}\n", (i as f64 * 0.37).sin())).collect::<String>(),
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (cmd, extra) in [
        ("build", vec![]),
        ("certify", vec![]),
        ("sweep", vec![]),
    ] {
        run(cmd, &cfg, &a, &extra);
        let mut more = extra.clone();
        more.extend(["--threads", "2"]);
        run(cmd, &cfg, &b, &more);
    }
    let leaves = json(&a.join("manifest.json"))["leaves"].as_u64().unwrap() as usize;
    let text: String = fs::read_to_string(&input).unwrap().lines().take(leaves).map(|l| format!("{l}\n")).collect();
    fs::write(&input, text).unwrap();
    for out in [&a, &b] {
        let o = run("apply", &cfg, out, &["--input", input.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 10, "{names:?}");
    for f in names {
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_override_is_recorded() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"tree": {"kind": "random", "seed": 5, "depth": 3, "branching": [2, 3]}}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run("build", &cfg, &out, &["--seed-override", "42"]).status.code(), Some(0));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["seeds"], serde_json::json!({"tree": 42, "haar": 42, "certify": 42}));
    let c = json(&out.join("config.json"));
    assert_eq!(c["tree"]["seed"], 42);
    assert_eq!(c["certify"]["seed"], 42);
}

#[test]
fn output_directory_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"tree": {"kind": "uniform", "depth": 2, "branching": 2}}"#,
    );
    let out = dir.path().join("env-out");
    let o = bin()
        .arg("build")
        .arg("--config")
        .arg(&cfg)
        .env("DYADIC_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("manifest.json").exists());
}
