use serde_json::Value;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn jobs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/jobs")
}

fn run(args: &[&str], job: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parastokes"))
        .args(args)
        .arg("--job")
        .arg(job)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn c(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn euler_stokes_entry_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[], &jobs().join("euler.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&dir.path().join("stokes.json"));
    assert_eq!(doc["format_version"], 1);
    let st = &doc["result"]["samples"][0]["points"][0]["stokes"];
    let at0 = st.as_array().unwrap().iter().find(|s| s["angle"].as_f64().unwrap().abs() < 1e-9).unwrap();
    // -2 i pi / t in the basis whose first column carries the factor t
    let (re, im) = c(&at0["matrix"][0][1]);
    assert!(re.abs() < 1e-6 && (im + 2.0 * PI).abs() < 1e-6, "{re} {im}");
    assert!(at0["constancy"].as_f64().unwrap() < 1e-5);
    let csv = std::fs::read_to_string(dir.path().join("stokes.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("z_re,z_im,entry,side,value_re,value_im,err"));
    assert!(csv.contains(",minus,") && csv.contains(",plus,"));
    assert!(dir.path().join("stokes.txt").exists());
}

#[test]
fn sibuya_levels_and_directions() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[], &jobs().join("sibuya.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let doc = read_json(&dir.path().join("analyze.json"));
    for s in doc["result"]["samples"].as_array().unwrap() {
        let p = &s["points"][0];
        assert_eq!(p["point"], "inf");
        assert_eq!(p["levels"], serde_json::json!(["5/2"]));
        let dirs = p["directions"]["directions"].as_array().unwrap();
        assert_eq!(dirs.len(), 10);
        for (k, d) in dirs.iter().enumerate() {
            assert!((d["angle"].as_f64().unwrap() - 2.0 * PI * k as f64 / 5.0).abs() < 1e-9);
        }
    }
}

#[test]
fn level_jump_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let job = jobs().join("level_jump.toml");
    let o = run(&[], &job, dir.path());
    assert_eq!(o.status.code(), Some(4));
    let doc = read_json(&dir.path().join("analyze.json"));
    assert_eq!(doc["result"]["degeneracy"], true);
    let pts: Vec<Value> = doc["result"]["samples"].as_array().unwrap().iter().map(|s| s["points"][0]["levels"].clone()).collect();
    assert_ne!(pts[0], pts[1]);
    assert_eq!(run(&["--force"], &job, dir.path()).status.code(), Some(0));
}

#[test]
fn isomonodromy_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[], &jobs().join("fuchsian.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let doc = read_json(&dir.path().join("isomonodromy.json"));
    assert_eq!(doc["result"]["isomonodromic"], false);
    assert!(doc["result"]["deviation"].as_f64().unwrap() > 0.5);
}

#[test]
fn exit_codes_for_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    };
    let bad_matrix = write("a.toml", "[system]\nmatrix = [\"1\", \"z\"]\n[grid]\nsamples = [[]]\n");
    assert_eq!(run(&["analyze"], &bad_matrix, dir.path()).status.code(), Some(2));
    let bad_syntax = write("b.toml", "[system]\nmatrix = [\"1/(z\"]\n[grid]\nsamples = [[]]\n");
    assert_eq!(run(&["analyze"], &bad_syntax, dir.path()).status.code(), Some(2));
    let no_cmd = write("c.toml", "[system]\nmatrix = [\"1/z\"]\n[grid]\nsamples = [[]]\n");
    assert_eq!(run(&[], &no_cmd, dir.path()).status.code(), Some(2));
    assert_eq!(run(&["analyze"], &dir.path().join("missing.toml"), dir.path()).status.code(), Some(2));
    // truncation too short for the lateral sums to meet their residual check
    let euler = std::fs::read_to_string(jobs().join("euler.toml")).unwrap();
    let short = write("d.toml", &format!("{euler}\n[options]\norder = 4\n"));
    assert_eq!(run(&["stokes"], &short, dir.path()).status.code(), Some(3));
}

#[test]
fn reruns_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let job = jobs().join("euler.toml");
    assert_eq!(run(&["stokes", "--threads", "1"], &job, a.path()).status.code(), Some(0));
    assert_eq!(run(&["stokes", "--threads", "4"], &job, b.path()).status.code(), Some(0));
    for f in ["stokes.json", "stokes.csv", "stokes.txt"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
