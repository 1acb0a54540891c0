use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_creativity-cert");
const STUB: &str = env!("CARGO_BIN_EXE_scorer-stub");

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn cli(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("CREATIVITY_CERT_SEED")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const E0_DATA: &str = r#"{"creator_id":0,"info":[0],"evaluator_bit":0}
{"creator_id":1,"info":[1],"evaluator_bit":1}
{"creator_id":2,"info":[2],"evaluator_bit":0}
{"creator_id":3,"info":[3],"evaluator_bit":1}
"#;

// point-mass creator (H = 0) and a uniform V=2, T=1 creator (H = ln 2), scored by uniform
const E1_DATA: &str = r#"{"creator_id":0,"info":[0],"creation":[0],"entropy":0.0}
{"creator_id":1,"info":[1],"creation":[1],"entropy":0.6931471805599453}
"#;

#[test]
fn evaluate_e0_half() {
    let d = tempfile::tempdir().unwrap();
    let data = write(&d, "e0.jsonl", E0_DATA);
    let o = cli(&["evaluate", "--dataset", &data, "--mode", "e0"]);
    assert_eq!(code(&o), 0);
    let r = json_out(&o);
    assert_eq!(r["result"]["metric"]["value"], 0.5);
    assert_eq!(r["result"]["metric"]["n"], 4);
    assert_eq!(r["result"]["metric"]["kind"], "E0");
}

#[test]
fn evaluate_e1_two_creators() {
    let d = tempfile::tempdir().unwrap();
    let data = write(&d, "e1.jsonl", E1_DATA);
    let o = cli(&[
        "evaluate", "--dataset", &data, "--mode", "e1", "--scorer", "uniform", "--vocab", "2", "--omega", "0", "--tau", "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = &json_out(&o)["result"]["metric"];
    assert!((m["value"].as_f64().unwrap() - 0.551_265_535_705_152).abs() < 1e-12);
    assert_eq!(m["r_min_used"], 1.0);
    assert!((m["m_observed"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-15);
}

#[test]
fn evaluate_e1_against_world_matches_record_entropies() {
    let d = tempfile::tempdir().unwrap();
    let world = configs().join("worlds/two_deterministic_w1.json");
    let data = write(
        &d,
        "e1.jsonl",
        "{\"creator_id\":0,\"info\":[0],\"creation\":[0,0,0]}\n{\"creator_id\":1,\"info\":[1],\"creation\":[1,1,1]}\n",
    );
    let o = cli(&["evaluate", "--dataset", &data, "--mode", "e1", "--world", s(&world), "--tau", "0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json_out(&o)["result"]["metric"]["value"], 0.0);

    let bad = write(&d, "bad.jsonl", "{\"creator_id\":0,\"info\":[0],\"creation\":[0,0,0],\"entropy\":0.3}\n");
    let o = cli(&["evaluate", "--dataset", &bad, "--mode", "e1", "--world", s(&world)]);
    assert_eq!(code(&o), 2);

    let wrong_info = write(&d, "wi.jsonl", "{\"creator_id\":0,\"info\":[1],\"creation\":[0,0,0]}\n");
    let o = cli(&["evaluate", "--dataset", &wrong_info, "--mode", "e1", "--world", s(&world)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn evaluate_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let empty = write(&d, "empty.jsonl", "\n");
    assert_eq!(code(&cli(&["evaluate", "--dataset", &empty, "--mode", "e0"])), 2);

    let broken = write(&d, "broken.jsonl", "{\"creator_id\":0,\"info\":[0],\"evaluator_bit\":1}\n{oops}\n");
    let o = cli(&["evaluate", "--dataset", &broken, "--mode", "e0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let data = write(&d, "e0.jsonl", E0_DATA);
    let o = cli(&["evaluate", "--dataset", &data, "--mode", "e2"]);
    assert_eq!(code(&o), 2, "prompt missing in e2 mode");

    let no_h = write(&d, "noh.jsonl", "{\"creator_id\":0,\"info\":[0],\"creation\":[0]}\n");
    let o = cli(&["evaluate", "--dataset", &no_h, "--mode", "e1", "--scorer", "uniform", "--vocab", "2", "--omega", "0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("entropy"));

    assert_eq!(code(&cli(&["evaluate", "--mode", "e0"])), 2);
}

#[test]
fn evaluate_then_certify_equals_fused_run() {
    let d = tempfile::tempdir().unwrap();
    let data = write(&d, "e1.jsonl", E1_DATA);
    let base = [
        "evaluate", "--dataset", &data, "--mode", "e1", "--scorer", "uniform", "--vocab", "2", "--omega", "0", "--tau", "1",
    ];
    let cert = ["--certificate", "thm2", "--delta", "0.9", "--t", "0.1", "--m-bound", "1", "--r-min", "1"];

    let report = d.path().join("eval.json");
    let mut args = base.to_vec();
    args.extend(["--out", s(&report)]);
    assert_eq!(code(&cli(&args)), 0);

    let mut args = vec!["certify", "--report", s(&report)];
    args.extend(cert);
    let two_step = cli(&args);

    let mut args = base.to_vec();
    args.extend(cert);
    let fused = cli(&args);

    assert_eq!(code(&two_step), code(&fused));
    let a = json_out(&two_step)["result"]["certificate"].clone();
    let b = json_out(&fused)["result"]["certificate"].clone();
    assert!(a.is_object());
    assert_eq!(a, b);
    // n = 2 is far below the threshold
    assert_eq!(code(&fused), 1);
    assert_eq!(a["certified"], false);
}

#[test]
fn certify_exit_codes() {
    let thm1 = ["--certificate", "thm1", "--delta", "0.1", "--t", "0.05"];
    let mut a = vec!["certify", "--value", "0.05", "--n", "600"];
    a.extend(thm1);
    let o = cli(&a);
    assert_eq!(code(&o), 0);
    let c = &json_out(&o)["result"]["certificate"];
    assert_eq!(c["required_n"], 600);
    assert_eq!(c["margin"], 0);
    assert!((c["threshold"].as_f64().unwrap() - 599.146_454_710_798_2).abs() < 1e-9);

    let mut a = vec!["certify", "--value", "0.05", "--n", "599"];
    a.extend(thm1);
    assert_eq!(code(&cli(&a)), 1);

    // thm2 without M
    let o = cli(&["certify", "--value", "0.1", "--n", "3000", "--certificate", "thm2", "--delta", "0.2", "--t", "0.1"]);
    assert_eq!(code(&o), 2);

    // declared M below the observed NLL
    let o = cli(&[
        "certify", "--value", "0.1", "--n", "3000", "--certificate", "thm2", "--delta", "0.2", "--t", "0.1", "--m-bound", "5",
        "--r-min", "1", "--m-observed", "6",
    ]);
    assert_eq!(code(&o), 3);
    // declared r_min above the observed weight
    let o = cli(&[
        "certify", "--value", "0.1", "--n", "3000", "--certificate", "thm2", "--delta", "0.2", "--t", "0.1", "--m-bound", "5",
        "--r-min", "1", "--r-min-used", "0.5",
    ]);
    assert_eq!(code(&o), 3);

    let o = cli(&["certify", "--value", "0.05", "--n", "600", "--certificate", "thm9", "--delta", "0.1", "--t", "0.05"]);
    assert_eq!(code(&o), 2);
    let o = cli(&["certify", "--value", "0.05", "--n", "600", "--certificate", "thm1", "--delta", "1.5", "--t", "0.05"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn plan_examples() {
    let o = cli(&["plan", "--value", "0.05", "--certificate", "thm1", "--delta", "0.1", "--t", "0.05", "--n-list", "600"]);
    let r = json_out(&o);
    assert_eq!(r["result"]["required_n"], 600);
    let d = r["result"]["achievable_delta"][0]["delta"].as_f64().unwrap();
    assert!(d < 0.1 && d > 0.05);

    let o = cli(&[
        "plan", "--value", "0.1", "--certificate", "thm2", "--delta", "0.2", "--t", "0.1", "--m-bound", "5", "--r-min", "1",
    ]);
    assert_eq!(json_out(&o)["result"]["required_n"], 2879);

    let o = cli(&["plan", "--value", "0.2", "--certificate", "thm1", "--delta", "0.1", "--t", "0.05"]);
    assert_eq!(code(&o), 1, "E >= delta is infeasible");
    let o = cli(&["plan", "--value", "0.1", "--certificate", "cor3", "--delta", "0.2", "--t", "0.1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bound_examples() {
    let o = cli(&[
        "bound", "--train-e", "0.1", "--n", "400", "--delta", "0.5", "--q-provider", "finite-class", "--class-size", "16",
    ]);
    assert_eq!(code(&o), 0);
    let r = json_out(&o);
    assert!((r["result"]["bound"].as_f64().unwrap() - 0.603_933_398_033_761_8).abs() < 1e-12);
    assert!((r["result"]["q_half_delta"].as_f64().unwrap() - 64f64.ln()).abs() < 1e-12);

    let o = cli(&[
        "bound", "--train-e", "0", "--n", "10", "--delta", "0.5", "--q-provider", "info-theoretic", "--mi-pairs", "0:1",
    ]);
    let b = json_out(&o)["result"]["bound"].as_f64().unwrap();
    let q = json_out(&o)["result"]["q_half_delta"].as_f64().unwrap();
    assert!(b >= 0.0 && (b - (q / 2.5).sqrt()).abs() < 1e-12);

    let o = cli(&[
        "bound", "--train-e", "0.1", "--n", "400", "--delta", "0.5", "--q-provider", "finite-class", "--class-size", "16",
        "--unweighted",
    ]);
    assert_eq!(code(&o), 2, "--unweighted needs --r-min");

    let o = cli(&[
        "bound", "--train-e", "0.1", "--n", "400", "--delta", "0.5", "--q-provider", "norm-based", "--b", "1", "--rho", "2",
        "--frobenius", "1.0",
    ]);
    assert_eq!(code(&o), 2, "rho must match the number of frobenius bounds");

    let o = cli(&[
        "bound", "--train-e", "0.1", "--n", "400", "--delta", "0.5", "--q-provider", "finite-class", "--class-size", "16",
        "--exact-gap", "--m-bound", "2", "--r-min", "1",
    ]);
    let g = json_out(&o)["inputs"]["gap_constant"].as_f64().unwrap();
    assert!((g - 2.0 * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn external_scorer_matches_builtin_uniform() {
    let d = tempfile::tempdir().unwrap();
    let data = write(&d, "e1.jsonl", E1_DATA);
    let args = ["evaluate", "--dataset", &data, "--mode", "e1", "--vocab", "2", "--omega", "0", "--tau", "1"];
    let mut a = args.to_vec();
    a.extend(["--scorer", "uniform"]);
    let builtin = json_out(&cli(&a))["result"]["metric"].clone();
    let stub_cmd = format!("{STUB} uniform");
    let mut a = args.to_vec();
    a.extend(["--scorer", "external", "--scorer-cmd", &stub_cmd]);
    let o = cli(&a);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let external = json_out(&o)["result"]["metric"].clone();
    let (x, y) = (builtin["value"].as_f64().unwrap(), external["value"].as_f64().unwrap());
    assert!((x - y).abs() < 1e-12);

    let bad_cmd = format!("{STUB} bad-sum");
    let mut a = args.to_vec();
    a.extend(["--scorer", "external", "--scorer-cmd", &bad_cmd]);
    assert_eq!(code(&cli(&a)), 1);
}

#[test]
fn scorer_check_modes() {
    for (mode, want) in [
        ("uniform", 0),
        ("skewed", 0),
        ("bad-sum", 1),
        ("wrong-id", 1),
        ("wrong-len", 1),
        ("garbage", 1),
        ("silent", 1),
        ("exit", 1),
    ] {
        let o = cli(&["scorer-check", "--vocab", "3", "--timeout-ms", "300", "--", STUB, mode]);
        assert_eq!(code(&o), want, "mode {mode}: {}", String::from_utf8_lossy(&o.stderr));
        let r = json_out(&o);
        assert_eq!(r["result"]["ok"], want == 0);
        if want == 0 {
            assert_eq!(r["result"]["exchanges"], 4);
        }
    }
    let o = cli(&["scorer-check", "--vocab", "3", "--", "/nonexistent/scorer"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_truth_has_no_failures_and_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let cfg = configs().join("coverage_truth.json");
    let a = d.path().join("a.json");
    let b = d.path().join("b.json");
    for out in [&a, &b] {
        let o = cli(&["simulate", "--config", s(&cfg), "--trials", "50", "--seed", "5", "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ra, rb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ra, rb);
    let r: Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(r["result"]["failures"], 0);
    assert_eq!(r["result"]["trials_run"], 50);
    assert_eq!(r["seed"], 5);
    assert_eq!(r["inputs"]["master_seed"], 5);
    assert!(!r["command"].as_str().unwrap().contains("--out"));
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_env_overrides_flag() {
    let cfg = configs().join("marginalization.json");
    let run = |env: Option<&str>, seed: &str| {
        let mut c = Command::new(BIN);
        c.args(["simulate", "--config", s(&cfg), "--trials", "2", "--seed", seed]);
        match env {
            Some(v) => c.env("CREATIVITY_CERT_SEED", v),
            None => c.env_remove("CREATIVITY_CERT_SEED"),
        };
        json_out(&c.output().unwrap())
    };
    let from_env = run(Some("11"), "3");
    assert_eq!(from_env["seed"], 11);
    let from_flag = run(None, "11");
    assert_eq!(from_env["result"], from_flag["result"]);
    assert_ne!(run(None, "3")["result"], from_flag["result"]);

    let mut c = Command::new(BIN);
    c.args(["simulate", "--config", s(&cfg)]).env("CREATIVITY_CERT_SEED", "abc");
    assert_eq!(c.output().unwrap().status.code(), Some(2));
}

#[test]
fn simulate_rejects_bad_config() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(&d, "bad.json", r#"{"experiment":"nonsense"}"#);
    assert_eq!(code(&cli(&["simulate", "--config", &cfg])), 2);
    assert_eq!(code(&cli(&["simulate", "--config", "/nonexistent.json"])), 2);
}
