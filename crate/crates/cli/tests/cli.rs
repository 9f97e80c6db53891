use serde_json::Value;
use std::path::PathBuf;
use std::process::Command;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> (i32, String, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_rsres")).args(args).output().expect("binary runs");
    let text = String::from_utf8(out.stdout).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap_or(Value::Null);
    (out.status.code().unwrap_or(-1), text, v)
}

#[test]
fn enumerate_n1() {
    let (code, _, v) = run(&["enumerate-rs", "--n", "1"]);
    assert_eq!(code, 0);
    let r = &v["result"];
    assert_eq!(r["count"], 3);
    let labels: Vec<&str> = r["parabolics"].as_array().unwrap().iter().map(|p| p["label"].as_str().unwrap()).collect();
    assert!(labels.contains(&"((2), i0=1)"));
    assert!(labels.contains(&"((1,1), i0=2)"));
    assert!(labels.contains(&"((1,1), i0=1)"));
}

#[test]
fn enumerate_matches_brute_force() {
    for n in 2..=4 {
        let (code, _, v) = run(&["enumerate-rs", "--n", &n.to_string()]);
        assert_eq!(code, 0);
        assert_eq!(v["result"]["count"], v["result"]["brute_force_count"]);
    }
}

#[test]
fn gl1gl2_forms() {
    let (code, _, v) = run(&["pair-forms", "--pair", &data("gl1gl2.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["L_plus"], serde_json::json!(["-(a+c+1/2)"]));
    assert_eq!(v["result"]["L_minus"], serde_json::json!(["a+b-1/2"]));
}

#[test]
fn example_report() {
    let (code, _, v) = run(&["example-gl1gl2"]);
    assert_eq!(code, 0);
    let g = &v["result"]["global"];
    assert_eq!(g["order_independence"], true);
    assert_eq!(g["cl"], "1");
    assert!(g["kernel_residue"]["canonical"].as_str().unwrap().contains("Res*"));
    assert_eq!(v["result"]["local"]["partial_fraction_identity"], true);
    assert_eq!(v["result"]["local"]["value"], "147/136");
}

#[test]
fn reports_are_reproducible() {
    let args = ["pair-residues", "--pair", &data("gl2gl3.json"), "--registry", &data("registry.json"), "--seed", "5"];
    let (c1, t1, v) = run(&args);
    let (c2, t2, _) = run(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(t1, t2);
    assert_eq!(v["seed"], 5);
    assert_eq!(v["input_sha256"].as_str().unwrap().len(), 64);
    assert!(v["versions"]["local_zeta"].is_string());
    let (_, _, w) = run(&["pair-residues", "--pair", &data("gl2gl3.json"), "--registry", &data("registry.json"), "--seed", "6"]);
    assert_ne!(v["input_sha256"], w["input_sha256"]);
}

#[test]
fn validation_exit_codes() {
    let (code, _, v) = run(&["pair-validate", "--pair", &data("bad_k.json")]);
    assert_eq!(code, 2);
    assert_eq!(v["status"], "validation-failure");
    let (code, _, _) = run(&["pair-forms", "--pair", &data("malformed.json")]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["pair-forms"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["pair-residues", "--pair", &data("gl1gl2.json"), "--order", "0,0"]);
    assert_eq!(code, 2);
}

#[test]
fn out_file() {
    let dir = std::env::temp_dir().join(format!("rsres-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let (code, stdout, _) = run(&["pair-criterion", "--pair", &data("gl2gl3.json"), "--registry", &data("registry.json"), "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "pair-criterion");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn weyl_and_criterion() {
    let (code, _, v) = run(&["pair-weyl", "--pair", &data("gl2gl3.json"), "--registry", &data("registry.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["sigma1"]["first_identity"], true);
    let (code, _, v) = run(&["pair-criterion", "--pair", &data("gl2gl3.json"), "--registry", &data("registry.json")]);
    assert_eq!(code, 0);
    assert!(v["result"]["cl"].as_str().unwrap().contains("c1×s"));
}

#[test]
fn local_commands() {
    let (code, _, v) = run(&["local-zeta-gl1gl2"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["point"]["lhs"], "147/136");
    let (code, _, _) = run(&["local-zeta-gl1gl2", "--x", "1/3", "--y", "1/3"]);
    assert_eq!(code, 2);
    let (code, _, v) = run(&["local-partition", "--rank", "3", "--side", "20", "--seed", "2"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["check"]["uncovered"], 0);
    let (code, _, v) = run(&["local-support", "--pair", &data("gl2gl3.json"), "--registry", &data("registry.json"), "--m", "n+1"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["support"][0]["agree"], true);
}

#[test]
fn cones() {
    let (code, _, v) = run(&["cones-ft", "--n", "1", "--samples", "50"]);
    assert_eq!(code, 0);
    assert!(!v["result"]["pairs"].as_array().unwrap().is_empty());
}
