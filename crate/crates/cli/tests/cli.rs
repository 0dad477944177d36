use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tate_core::floer::blind;
use tate_core::{BlindedData, ManifoldModel, TateValue};
use tempfile::TempDir;

const MODEL: &str = r#"{"dim":4,"homology":[{"degree":0,"free":1},{"degree":1,"torsion":[[2,1,1],[3,2,1]]},{"degree":2,"free":2}],
 "orbits":[{"length":1,"multiplicity":2,"parity":"bad"},{"length":"5/2","multiplicity":3,"parity":"good"}],"slopes":[2,3]}"#;

fn tatecoh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tatecoh")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn nseries_examples() {
    let out = tatecoh(&["nseries", "multiplicative", "4"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["series"], "4u + 6u^2 + 4u^3 + u^4 + O(u^33)");
    let out = tatecoh(&["nseries", "additive", "7"]);
    assert_eq!(stdout_json(&out)["series"], "7u + O(u^33)");
    let out = tatecoh(&["nseries", "honda:2:1", "2"]);
    let v = stdout_json(&out);
    assert_eq!(v["series"], "v*u^2 + O(u^33)");
    assert_eq!(v["unit_profile"]["valuation"], 2);
    assert_eq!(v["terms"], json!([{"power": 2, "degree": 2, "coefficient": [[1, "1"]], "text": "v"}]));
    let out = tatecoh(&["nseries", "additive", "-3", "--format", "table"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("[-3](u) = -3u"));
}

#[test]
fn tate_modules() {
    let out = tatecoh(&["tate", "bck", "3", "additive"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), r#"{"kind":"zero"}"#);
    let out = tatecoh(&["tate", "orbit", "4", "bad", "honda:2:1"]);
    assert_eq!(stdout_json(&out), json!({"kind": "zero"}));
}

#[test]
fn tate_manifold() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "M.json", MODEL);
    let out = tatecoh(&["tate", "manifold", s(&m), "hfp:2"]);
    assert_eq!(stdout_json(&out), json!({"kind": "zero", "theorem_check": true, "stabilization_level": 1}));
    let hz = tatecoh(&["tate", "manifold", s(&m), "hz"]);
    let hq = tatecoh(&["tate", "manifold", s(&m), "hq"]);
    assert_eq!(hz.stdout, hq.stdout);
    let v = stdout_json(&hz);
    assert_eq!(v["kind"], "laurent_module");
    assert_eq!(v["base"], json!({"kind": "rationals"}));
    assert_eq!(
        v["summands"],
        json!([{"degree": 0, "order": 0}, {"degree": 2, "order": 0}, {"degree": 2, "order": 0}])
    );
    assert_eq!(v["theorem_check"], true);
}

#[test]
fn output_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "M.json", MODEL);
    let args = ["recover", "homology", s(&m), "--primes", "2,3"];
    assert_eq!(tatecoh(&args).stdout, tatecoh(&args).stdout);
    let args = ["tate", "manifold", s(&m), "integral-morava:2:2:3", "--format", "table"];
    assert_eq!(tatecoh(&args).stdout, tatecoh(&args).stdout);
}

#[test]
fn recover_homology_round_trip() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "M.json", MODEL);
    let out = tatecoh(&["recover", "homology", s(&m), "--primes", "2,3", "--kmax", "4"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let model: ManifoldModel = serde_json::from_str(MODEL).unwrap();
    assert_eq!(v["recovered"], serde_json::to_value(model.homology.canonical()).unwrap());
    assert_eq!(v["match"], true);
    let out = tatecoh(&["recover", "homology", s(&m)]);
    assert_eq!(code(&out), 0);
}

#[test]
fn recover_homology_mismatch_exits_one() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "M.json", MODEL);
    let out = tatecoh(&["recover", "homology", s(&m), "--primes", "2"]);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["match"], false);
    assert_eq!(v["diff"][0]["degree"], 1);
}

fn towers() -> BlindedData {
    let model: ManifoldModel = serde_json::from_str(MODEL).unwrap();
    blind(&model, &[2, 3], 3, 32, 24).unwrap()
}

#[test]
fn recover_from_raw_towers() {
    let dir = TempDir::new().unwrap();
    let data = towers();
    let f = write(&dir, "T.json", &serde_json::to_string(&data).unwrap());
    let out = tatecoh(&["recover", "homology", s(&f)]);
    assert_eq!(code(&out), 0);
    let model: ManifoldModel = serde_json::from_str(MODEL).unwrap();
    assert_eq!(stdout_json(&out)["recovered"], serde_json::to_value(model.homology.canonical()).unwrap());
}

#[test]
fn corrupted_towers_exit_six() {
    let dir = TempDir::new().unwrap();
    let mut data = towers();
    if let TateValue::LaurentModule { summands, .. } = &mut data.primes[0].levels[0].value {
        summands.pop();
    }
    let f = write(&dir, "T.json", &serde_json::to_string(&data).unwrap());
    let out = tatecoh(&["recover", "homology", s(&f)]);
    assert_eq!(code(&out), 6);
    assert!(out.stdout.is_empty());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "InconsistentPattern");
}

#[test]
fn single_level_towers_exit_five() {
    let dir = TempDir::new().unwrap();
    let mut data = towers();
    data.primes[0].levels.truncate(1);
    let f = write(&dir, "T.json", &serde_json::to_string(&data).unwrap());
    assert_eq!(code(&tatecoh(&["recover", "homology", s(&f)])), 5);
}

#[test]
fn recover_ku() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "KU.json", r#"{"ku0":{"free":2,"torsion":[[3,1,1]]},"ku1":{"free":1}}"#);
    let out = tatecoh(&["recover", "ku", s(&f)]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        stdout_json(&out)["recovered"],
        json!({"ku0": {"free": 2, "torsion": [[3, 1, 1]]}, "ku1": {"free": 1, "torsion": []}})
    );
    let f = write(&dir, "C.json", r#"{"summands":[{"degree":1,"kind":"zhat"},{"degree":0,"kind":"cyclic","order":4}]}"#);
    let out = tatecoh(&["recover", "ku", s(&f)]);
    assert_eq!(
        stdout_json(&out)["recovered"],
        json!({"ku0": {"free": 0, "torsion": [[2, 2, 1]]}, "ku1": {"free": 1, "torsion": []}})
    );
    let f = write(&dir, "Z.json", r#"{"summands":[{"degree":0,"kind":"z"}]}"#);
    assert_eq!(code(&tatecoh(&["recover", "ku", s(&f)])), 6);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&tatecoh(&["nseries", "bogus", "2"])), 2);
    assert_eq!(code(&tatecoh(&["nseries", "hz"])), 2);
    assert_eq!(code(&tatecoh(&["--format", "xml", "nseries", "hz", "1"])), 2);
    assert_eq!(code(&tatecoh(&["--precision-N", "0", "nseries", "hz", "1"])), 2);
    assert_eq!(code(&tatecoh(&["nseries", "honda:5:2", "5", "--precision-N", "16"])), 3);
    let bad = write(&dir, "odd.json", r#"{"dim":5,"homology":[]}"#);
    assert_eq!(code(&tatecoh(&["tate", "manifold", s(&bad), "hz"])), 4);
    let bad = write(&dir, "junk.json", "not json");
    assert_eq!(code(&tatecoh(&["tate", "manifold", s(&bad), "hz"])), 4);
    assert_eq!(code(&tatecoh(&["tate", "manifold", "/nonexistent/M.json", "hz"])), 4);
    assert_eq!(code(&tatecoh(&["tate", "orbit", "3", "bad", "hz"])), 4);
    let hit = write(
        &dir,
        "hit.json",
        r#"{"dim":2,"homology":[],"orbits":[{"length":2,"multiplicity":1,"parity":"good"}],"slopes":[2]}"#,
    );
    assert_eq!(code(&tatecoh(&["tate", "manifold", s(&hit), "hz"])), 4);
    let m = write(&dir, "M.json", MODEL);
    let out = tatecoh(&["tate", "manifold", s(&m), "ku:2:3", "--precision-N", "1"]);
    assert_eq!(code(&out), 5);
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "UnknownLocalization");
}

#[test]
fn small_truncation_exits_three() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "M.json", r#"{"dim":8,"homology":[{"degree":0,"free":1}]}"#);
    let out = tatecoh(&["recover", "homology", s(&m), "--primes", "2", "--precision-N", "4"]);
    assert_eq!(code(&out), 3);
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "PrecisionExhausted");
}
