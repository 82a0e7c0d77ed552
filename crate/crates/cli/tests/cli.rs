//! End-to-end contracts of the `dudley` binary: exit codes, output formats,
//! determinism, config-file precedence and environment overrides.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dudley"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dudley-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir = tmp_dir("det");
    let args = [
        "simulate", "--d", "2", "--seed", "7", "--paths", "5", "--h", "1e-2", "--T", "0.2",
        "--out", "a.csv",
    ];
    let out = run(&args, &dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut args2 = args;
    args2[args.len() - 1] = "b.csv";
    assert!(run(&args2, &dir).status.success());
    let a = std::fs::read(dir.join("a.csv")).unwrap();
    let b = std::fs::read(dir.join("b.csv")).unwrap();
    assert_eq!(a, b, "same seed and config must give identical bytes");
    // header contract: metadata comments then the header row
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# seed=7"));
    assert!(lines.next().unwrap().starts_with("# config_digest="));
    assert!(lines.next().unwrap().starts_with("# version="));
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "path,time,g00,g01,g02,g10,g11,g12,g20,g21,g22,xi0,xi1,xi2,u1,u2,u0,u12,u10,u20"
    );
    // a different seed changes the bytes
    let mut args3 = args;
    args3[4] = "8";
    args3[args.len() - 1] = "c.csv";
    assert!(run(&args3, &dir).status.success());
    let c = std::fs::read(dir.join("c.csv")).unwrap();
    assert_ne!(text.as_bytes(), c.as_slice());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tmp_dir("usage");
    // unparsable flag value
    let out = run(&["simulate", "--h", "banana"], &dir);
    assert_eq!(out.status.code(), Some(2));
    // invalid numeric domain
    let out = run(&["simulate", "--h", "0", "--T", "1"], &dir);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("error:"), "{msg}");
    // missing probe source
    let out = run(&["tangent", "--paths", "10"], &dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_unknown_key_is_named_with_line() {
    let dir = tmp_dir("cfgkey");
    std::fs::write(dir.join("exp.cfg"), "[simulate]\npaths = 3\nfooo = 1\n").unwrap();
    let out = run(&["simulate", "--config", "exp.cfg"], &dir);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 3"), "{msg}");
    assert!(msg.contains("fooo"), "{msg}");
}

#[test]
fn empty_config_with_full_flags_is_valid() {
    let dir = tmp_dir("cfgempty");
    std::fs::write(dir.join("empty.cfg"), "").unwrap();
    let out = run(
        &[
            "simulate",
            "--config",
            "empty.cfg",
            "--d",
            "2",
            "--seed",
            "3",
            "--paths",
            "1",
            "--h",
            "1e-2",
            "--T",
            "0.05",
            "--out",
            "e.csv",
        ],
        &dir,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("e.csv").is_file());
}

#[test]
fn flags_override_config_values() {
    let dir = tmp_dir("cfgover");
    std::fs::write(
        dir.join("exp.cfg"),
        "d = 2\nseed = 5\n[simulate]\npaths = 3\nh = 1e-2\nT = 0.1\n",
    )
    .unwrap();
    // config alone: 3 paths (indices 0..=2)
    let out = run(
        &["simulate", "--config", "exp.cfg", "--out", "from_cfg.csv"],
        &dir,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.join("from_cfg.csv")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("2,")));
    assert!(!text.lines().any(|l| l.starts_with("3,")));
    // the seed comment reflects the file value
    assert!(text.starts_with("# seed=5"));
    // flag overrides the file value
    let out = run(
        &[
            "simulate",
            "--config",
            "exp.cfg",
            "--paths",
            "1",
            "--out",
            "from_flag.csv",
        ],
        &dir,
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.join("from_flag.csv")).unwrap();
    assert!(
        !text.lines().any(|l| l.starts_with("1,")),
        "flag must shrink the path count"
    );
}

#[test]
fn out_dir_env_redirects_relative_paths() {
    let dir = tmp_dir("envdir");
    let sub = dir.join("redirected");
    let out = bin()
        .args([
            "wiener", "--caps", "1,1,1,1", "--lambda", "0.5", "--out", "w.json",
        ])
        .env("DUDLEY_OUT_DIR", &sub)
        .current_dir(&dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(sub.join("w.json").is_file());
    assert!(sub.join("w.csv").is_file());
    assert!(sub.join("w.gp").is_file());
    assert!(!dir.join("w.json").exists());
}

#[test]
fn wiener_verdicts_and_csv_round_trip() {
    let dir = tmp_dir("wiener");
    // constant weighted terms diverge
    let caps = "1e-3,9.765625e-7,9.5367431640625e-10";
    let out = run(
        &[
            "wiener", "--caps", caps, "--lambda", "0.5", "--n-lo", "0", "--out", "w.json",
        ],
        &dir,
    );
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("w.json")).unwrap()).unwrap();
    assert_eq!(doc["report"]["verdict"], "diverges");
    // a capacity-style CSV feeds back in through --capacities
    std::fs::write(
        dir.join("caps.csv"),
        "# seed=0\nn,capacity\n2,0.5\n3,0.0\n4,0.0\n",
    )
    .unwrap();
    let out = run(
        &[
            "wiener",
            "--capacities",
            "caps.csv",
            "--lambda",
            "0.5",
            "--out",
            "w2.json",
        ],
        &dir,
    );
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("w2.json")).unwrap()).unwrap();
    assert_eq!(
        doc["report"]["verdict"], "converges",
        "single early slice converges"
    );
    // the n column sets the offset
    let csv = std::fs::read_to_string(dir.join("w2.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("2,")), "{csv}");
}

#[test]
fn probe_file_contract() {
    let dir = tmp_dir("probes");
    std::fs::write(dir.join("p.csv"), "u1,u2,u0,u12,u10,u20\n0,0,1,0,0,0\n").unwrap();
    let out = run(
        &[
            "tangent", "--probes", "p.csv", "--paths", "200", "--h", "5e-3", "--out", "t.csv",
        ],
        &dir,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.join("t.csv")).unwrap();
    let header = text.lines().nth(3).unwrap();
    assert!(
        header.starts_with("u1,u2,u0,u12,u10,u20,phi,stderr"),
        "{header}"
    );
    // wrong header is a usage error
    std::fs::write(dir.join("bad.csv"), "a,b,c\n1,2,3\n").unwrap();
    let out = run(&["tangent", "--probes", "bad.csv", "--paths", "10"], &dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bch_check_passes_and_writes_report() {
    let dir = tmp_dir("bch");
    let out = run(
        &[
            "bch-check",
            "--pairs",
            "100",
            "--seed",
            "3",
            "--out",
            "bch.json",
        ],
        &dir,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("bch.json")).unwrap()).unwrap();
    assert_eq!(doc["report"]["passed"], true);
    let line = String::from_utf8_lossy(&out.stdout);
    assert!(line.contains("bch-check ok seed=3"), "{line}");
}

#[test]
fn green_guard_trips_exit_2_on_bad_probe() {
    let dir = tmp_dir("greenbad");
    // probe outside the kill ball is a validation error
    let out = run(
        &[
            "green",
            "--probe-axis",
            "--probe-gauge",
            "2.0",
            "--radius",
            "1.0",
            "--paths",
            "10",
            "--h",
            "1e-3",
        ],
        &dir,
    );
    assert_eq!(out.status.code(), Some(2));
}
