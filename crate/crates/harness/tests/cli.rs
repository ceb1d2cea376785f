use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kepler(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_kepler")).args(args).output().expect("run kepler");
    assert_ne!(out.status.code(), Some(3), "internal error: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const GRID: &str = "q2 = [0.0]\nq1 = [-1.0, 0.0]\nm = [0.0, 1.0]\nr = [2.3, 2.51]\npackings = [\"fcc:5\", \"hcp:5\"]\n";

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let expr = dir.path().join("bad.expr");
    let domain = dir.path().join("box.toml");
    std::fs::write(&expr, "(add x0\n").unwrap();
    std::fs::write(&domain, "bounds = [[\"0\", \"1\"]]\n").unwrap();
    let out = kepler(&["prove", s(&expr), s(&domain), "--target", "0"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.expr:2:1"));

    let one = dir.path().join("one.json");
    assert_eq!(code(&kepler(&["gen", "fcc", "1", "-o", s(&one)])), 0);
    assert_eq!(code(&kepler(&["score", s(&one)])), 1);

    let spec = dir.path().join("r3.toml");
    std::fs::write(&spec, "r = [3.0]\npackings = [\"fcc:4\"]\n").unwrap();
    assert_eq!(code(&kepler(&["search", s(&spec)])), 2);

    assert_eq!(code(&kepler(&["score", "no-such-file.json"])), 2);
    assert_eq!(code(&kepler(&["bogus"])), 2);
}

#[test]
fn prove_writes_certificate_or_report() {
    let dir = tempfile::tempdir().unwrap();
    let expr = dir.path().join("delta.expr");
    let domain = dir.path().join("box.toml");
    let cert = dir.path().join("cert.json");
    let report = dir.path().join("report.json");
    std::fs::write(&expr, "; L(x) = x\n(sub (mul 2 x2) (add x0 x1))\n").unwrap();
    std::fs::write(&domain, "bounds = [[\"2\", \"2.51\"], [\"2\", \"2.51\"], [\"2\", \"2.51\"]]\n").unwrap();

    assert_eq!(code(&kepler(&["prove", s(&expr), s(&domain), "--target", "-1.03", "-o", s(&cert)])), 0);
    assert_eq!(code(&kepler(&["replay", s(&expr), s(&cert)])), 0);
    assert_eq!(code(&kepler(&["replay", s(&expr), s(&cert), "--target", "-1.0"])), 1);

    let out = kepler(&["prove", s(&expr), s(&domain), "--target", "-1.01", "--report", s(&report)]);
    assert_eq!(code(&out), 1);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["reason"], "sample_below_target");
    let best = doc["best_value"].as_f64().unwrap();
    assert!((best + 1.02).abs() < 1e-12);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("random.toml");
    std::fs::write(
        &spec,
        "q2 = [-0.5, 0.5]\nq1 = [-1.0, 0.0]\nq0 = [0.0, 3.0]\nm = [0.0, 2.0]\nr = [2.2, 2.6]\n\
         packings = [\"fcc:4\", \"hcp:4\"]\nstrategy = \"random\"\nseed = 17\ncount = 100\n",
    )
    .unwrap();
    for args in [
        vec!["gen", "hcp", "5"],
        vec!["score", "fcc:5", "--json"],
        vec!["score", "hcp:5", "--csv"],
        vec!["cancel-check", "fcc-cell", "--json"],
        vec!["search", s(&spec), "--csv"],
    ] {
        let a = kepler(&args);
        let b = kepler(&args);
        assert_eq!(code(&a), 0, "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn grid_search_table() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("grid.toml");
    std::fs::write(&spec, GRID).unwrap();
    let out = kepler(&["search", s(&spec), "--json"]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["evidence"], "numerical evidence, not a proof");
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    let margin = |row: &Value| row["min_margin_lo"].as_str().unwrap().parse::<f64>().unwrap();
    let zero = rows.iter().filter(|r| r["q1"] == 0.0 && r["m"] == 0.0).collect::<Vec<_>>();
    assert_eq!(zero.len(), 2);
    for row in zero {
        assert!(margin(row) >= -1e-7);
    }
    for w in rows.windows(2) {
        assert!(margin(&w[0]) >= margin(&w[1]));
    }

    let text = kepler(&["search", s(&spec)]);
    assert!(String::from_utf8_lossy(&text.stdout).starts_with("# numerical evidence, not a proof"));
}

#[test]
fn search_rows_match_standalone_scores() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("grid.toml");
    std::fs::write(&spec, GRID).unwrap();
    let doc: Value = serde_json::from_slice(&kepler(&["search", s(&spec), "--json"]).stdout).unwrap();
    for row in doc["rows"].as_array().unwrap() {
        let arg = |k: &str| row[k].as_f64().unwrap().to_string();
        let (q2, q1, q0, m, r) = (arg("q2"), arg("q1"), arg("q0"), arg("m"), arg("r"));
        let mut lowest = f64::INFINITY;
        for packing in ["fcc:5", "hcp:5"] {
            let out = kepler(&[
                "score", packing, "--q2", &q2, "--q1", &q1, "--q0", &q0, "--m", &m, "--r", &r, "--json",
            ]);
            assert_eq!(code(&out), 0);
            let score: Value = serde_json::from_slice(&out.stdout).unwrap();
            for c in score["centers"].as_array().unwrap() {
                let lo: f64 = c["margin_lo"].as_str().unwrap().parse().unwrap();
                let hi: f64 = c["margin_hi"].as_str().unwrap().parse().unwrap();
                assert!(lo <= hi);
                lowest = lowest.min(lo);
            }
        }
        let reported: f64 = row["min_margin_lo"].as_str().unwrap().parse().unwrap();
        assert_eq!(reported, lowest, "{row}");
    }
}

#[test]
fn cancellation_checks() {
    let out = kepler(&["cancel-check", "fcc-cell", "--json"]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["pass"], true);
    assert!(doc["eps_sum"].is_object());

    let out = kepler(&["cancel-check", "fcc:4"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("ε-sum skipped"), "{text}");

    let dir = tempfile::tempdir().unwrap();
    let jittered = dir.path().join("jit.json");
    let gen = kepler(&["gen", "fcc", "--periodic", "--supercell", "2", "--jitter", "0.01", "--seed", "3", "-o", s(&jittered)]);
    assert_eq!(code(&gen), 0);
    assert_eq!(code(&kepler(&["cancel-check", s(&jittered)])), 0);
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "q1 = 0.0\nq0 = 0.0\nm = 0.0\nr = 2.3\n").unwrap();
    let out = kepler(&["--config", s(&cfg), "score", "fcc:5", "--json"]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["params"]["r"], 2.3);
    assert_eq!(doc["params"]["m"], 0.0);

    std::fs::write(&cfg, "nonsense = 1\n").unwrap();
    assert_eq!(code(&kepler(&["--config", s(&cfg), "score", "fcc:5"])), 2);
}
