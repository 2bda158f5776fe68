use std::path::Path;
use std::process::{Command, Output};

use ggratio_core::attack::read_table_two;
use ggratio_core::AttackReport;
use tempfile::TempDir;

fn ggratio(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ggratio"))
        .current_dir(dir)
        .env_remove("GGRATIO_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn keygen_sign_verify_pipeline() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    for (pk, sk, sig) in [("pk.json", "sk.json", "sig.json"), ("pk.bin", "sk.bin", "sig.bin")] {
        assert_eq!(code(&ggratio(d, &["keygen", "table2-col1", "--pk", pk, "--sk", sk])), 0);
        let signed = ggratio(d, &["sign", "table2-col1", "--pk", pk, "--sk", sk, "--message", "hello", "--out", sig]);
        assert_eq!(code(&signed), 0, "{signed:?}");
        let ok = ggratio(d, &["verify", "table2-col1", "--pk", pk, "--sig", sig, "--message", "hello"]);
        assert_eq!((code(&ok), stdout(&ok).trim()), (0, "valid"));
        let bad = ggratio(d, &["verify", "table2-col1", "--pk", pk, "--sig", sig, "--message", "hellp"]);
        assert_eq!((code(&bad), stdout(&bad).trim()), (1, "invalid(hash-mismatch)"));
    }
    std::fs::write(d.join("msg.txt"), b"hello").unwrap();
    let from_file = ggratio(d, &["verify", "table2-col1", "--pk", "pk.json", "--sig", "sig.json", "--message-file", "msg.txt"]);
    assert_eq!(code(&from_file), 0);
}

#[test]
fn malformed_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ggratio(d, &["keygen", "ci-n16", "--pk", "pk.json", "--sk", "sk.json"]);
    ggratio(d, &["sign", "ci-n16", "--pk", "pk.json", "--sk", "sk.json", "--message", "m", "--out", "sig.json"]);
    let text = std::fs::read_to_string(d.join("sig.json")).unwrap();
    std::fs::write(d.join("cut.json"), &text[..text.len() / 2]).unwrap();
    let o = ggratio(d, &["verify", "ci-n16", "--pk", "pk.json", "--sig", "cut.json", "--message", "m"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&ggratio(d, &["verify", "ci-n16", "--pk", "pk.json", "--sig", "none.json", "--message", "m"])), 2);
    assert_eq!(code(&ggratio(d, &["keygen", "no-such-set", "--pk", "a", "--sk", "b"])), 2);
    assert_eq!(code(&ggratio(d, &["stats", "no-such-check"])), 2);
    // a key for one set is not a key for another
    let o = ggratio(d, &["verify", "table2-col1", "--pk", "pk.json", "--sig", "sig.json", "--message", "m"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn non_positive_definite_signing_exits_3() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ggratio(d, &["keygen", "table3-256", "--pk", "pk.bin", "--sk", "sk.bin"]);
    let args = ["sign", "table3-256", "--pk", "pk.bin", "--sk", "sk.bin", "--message", "m", "--out", "sig.bin"];
    let o = ggratio(d, &args);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not positive definite"));
    let mut fallback = args.to_vec();
    fallback.push("--diag-fallback");
    assert_eq!(code(&ggratio(d, &fallback)), 0);
}

#[test]
fn seed_comes_from_flag_or_environment() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let key = |seed: Option<&str>, env: Option<&str>, name: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ggratio"));
        cmd.current_dir(d).env_remove("GGRATIO_SEED");
        if let Some(e) = env {
            cmd.env("GGRATIO_SEED", e);
        }
        cmd.args(["keygen", "ci-n16", "--pk", name, "--sk", "sk.json"]);
        if let Some(s) = seed {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
        std::fs::read(d.join(name)).unwrap()
    };
    let a = key(Some("5"), None, "a.json");
    let b = key(None, Some("5"), "b.json");
    let c = key(Some("6"), None, "c.json");
    let default = key(None, None, "d.json");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(default, key(Some("1"), None, "e.json"));
}

#[test]
fn attack_recovers_ci_key_and_ignores_workers() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let run = |workers: &str, out: &str| {
        let o = ggratio(
            d,
            &["attack", "ci-n16", "--auto-plan", "--known-key", "--quiet", "--workers", workers, "--out", out, "--csv", "row.csv"],
        );
        assert_eq!(code(&o), 0, "{o:?}");
        assert!(stdout(&o).contains("recovered 32/32"));
        let report: AttackReport = serde_json::from_slice(&std::fs::read(d.join(out)).unwrap()).unwrap();
        report
    };
    let one = run("1", "one.json");
    let four = run("4", "four.json");
    assert_eq!(one.recovered, four.recovered);
    assert_eq!(one.signatures_used, four.signatures_used);
    let rows = read_table_two(std::fs::File::open(d.join("row.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].signatures, Some(four.signatures_used));
    assert_eq!(code(&ggratio(d, &["attack", "ci-n16"])), 2);
}

#[test]
fn attack_resumes_from_checkpoint() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let base = ["attack", "ci-n16", "--signatures", "2e6", "--known-key", "--quiet", "--checkpoint", "run.ckpt"];
    let mut first = base.to_vec();
    first.extend(["--out", "first.json"]);
    assert_eq!(code(&ggratio(d, &first)), 0);
    assert!(d.join("run.ckpt").exists());
    let mut again = base.to_vec();
    again.extend(["--resume", "--out", "second.json"]);
    assert_eq!(code(&ggratio(d, &again)), 0);
    let load = |f: &str| -> AttackReport { serde_json::from_slice(&std::fs::read(d.join(f)).unwrap()).unwrap() };
    assert_eq!(load("first.json").without_timing(), load("second.json").without_timing());
    let mut other_seed = again.clone();
    other_seed.extend(["--seed", "99"]);
    assert_eq!(code(&ggratio(d, &other_seed)), 2);
}

#[test]
fn plan_and_params() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = ggratio(d, &["plan", "table2-col1", "--csv", "plan.csv"]);
    assert_eq!(code(&o), 0);
    let rows = read_table_two(std::fs::File::open(d.join("plan.csv")).unwrap()).unwrap();
    assert!((rows[0].inv_p_star_sq / 3.15e6 - 1.0).abs() < 0.1);
    let list = stdout(&ggratio(d, &["params", "list"]));
    for name in ["table2-col1", "table2-col2", "table2-col3", "table3-120", "table3-180", "table3-256", "ci-n16"] {
        assert!(list.contains(name), "{name}");
    }
    // a shown set, renamed, loads back as an override file
    let shown = stdout(&ggratio(d, &["params", "show", "ci-n16"]));
    std::fs::write(d.join("sets.toml"), shown.replace("ci-n16", "mine")).unwrap();
    let list = stdout(&ggratio(d, &["--params-file", "sets.toml", "params", "list"]));
    assert!(list.contains("mine"));
    std::fs::write(d.join("bad.toml"), "[sets.x]\ncolour = 3\n").unwrap();
    assert_eq!(code(&ggratio(d, &["--params-file", "bad.toml", "params", "list"])), 2);
}

#[test]
fn stats_exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = ggratio(d, &["stats", "ratio-cauchy", "--samples", "1e6"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("[PASS] ratio-cauchy central-98% KS"));
    let o = ggratio(d, &["stats", "w-moments", "--samples", "1e6", "--out", "w.json"]);
    assert_eq!(code(&o), 0);
    assert!(d.join("w.json").exists());
    // sigma_u = 0.4 sits on the coarse lattice, so V(2U+C) misses 4 sigma_u^2
    assert_eq!(code(&ggratio(d, &["stats", "w-moments", "table2-col2", "--samples", "1e6"])), 1);
    assert_eq!(code(&ggratio(d, &["stats", "z-variances"])), 2);
    let o = ggratio(d, &["stats", "all", "ci-n16", "--samples", "1e6"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn revised_experiments() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = ggratio(d, &["revised", "norm-bound", "table3-120"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("364940.6") && stdout(&o).contains("invalid"));
    let o = ggratio(d, &["revised", "forge", "table3-120", "--trials", "5", "--csv", "t3.csv"]);
    assert!(stdout(&o).contains("5/5 forgeries hash-consistent"), "{}", stdout(&o));
    let rows = ggratio_core::revised::read_table_three(std::fs::File::open(d.join("t3.csv")).unwrap()).unwrap();
    assert_eq!(rows[0].hash_consistent, Some(5));
    let o = ggratio(d, &["revised", "pd-rate", "table3-256", "--trials", "20"]);
    assert!(stdout(&o).starts_with("table3-256: 0/20 positive definite"), "{}", stdout(&o));
    let o = ggratio(d, &["revised", "invalidity", "table3-180", "--trials", "3"]);
    assert!(stdout(&o).contains("0/3 honest signatures within gamma"));
    assert_eq!(code(&ggratio(d, &["revised", "pd-rate", "ci-n16", "--trials", "2"])), 2);
    assert_eq!(code(&ggratio(d, &["revised", "unknown", "table3-120"])), 2);
}
