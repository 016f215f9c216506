use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hlsdse_core::fixtures;

fn hlsdse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hlsdse")).args(args).output().expect("binary runs")
}

fn design_file(dir: &Path, text: &str, name: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn explore_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let d = design_file(tmp.path(), fixtures::VADD16, "vadd16.json");
    let reference = tmp.path().join("ref.csv");
    let r = hlsdse(&["reference", "--design", s(&d), "--out", s(&reference)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));

    let out = tmp.path().join("run");
    let r = hlsdse(&["explore", "--design", s(&d), "--seed", "4", "--reference", s(&reference), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["evaluations"].as_u64().unwrap() <= 48);
    assert!(summary["adrs"].as_f64().unwrap().is_finite());

    let traj = std::fs::read_to_string(out.join("trajectory.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_str(traj.lines().next().unwrap()).unwrap();
    assert_eq!(header["kind"], "header");
    assert_eq!(header["seed"], 4);

    let adrs = hlsdse(&["adrs", s(&out.join("front.csv")), s(&reference)]);
    assert_eq!(adrs.status.code(), Some(0));
    let printed: f64 = String::from_utf8(adrs.stdout).unwrap().trim().parse().unwrap();
    assert!((printed - summary["adrs"].as_f64().unwrap()).abs() < 1e-6);
}

#[test]
fn nsga2_mode_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = design_file(tmp.path(), fixtures::MAC2D, "mac2d.json");
    let out = tmp.path().join("run");
    let r = hlsdse(&["explore", "--design", s(&d), "--mode", "nsga2", "--generations", "2", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mode"], "nsga2");
    assert!(summary["evaluations"].as_u64().unwrap() <= 36);
}

#[test]
fn space_prune_and_sample_print_json() {
    let tmp = tempfile::tempdir().unwrap();
    let d = design_file(tmp.path(), fixtures::GEMM, "gemm.json");
    let full = hlsdse(&["space", "--design", s(&d)]);
    let pruned = hlsdse(&["prune", "--design", s(&d)]);
    let full: serde_json::Value = serde_json::from_slice(&full.stdout).unwrap();
    let pruned: serde_json::Value = serde_json::from_slice(&pruned.stdout).unwrap();
    assert_eq!(full["cardinality"], "452984832");
    assert_eq!(pruned["cardinality"], "28311552");

    let out = hlsdse(&["sample", "--design", s(&d), "--sampler", "warm", "--n", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<&str> = std::str::from_utf8(&out.stdout).unwrap().lines().collect();
    assert_eq!(lines.len(), 6);
    for l in lines {
        let recs: serde_json::Value = serde_json::from_str(l).unwrap();
        assert_eq!(recs.as_array().unwrap().len(), 6);
    }
}

#[test]
fn emit_tcl_from_records() {
    let tmp = tempfile::tempdir().unwrap();
    let d = design_file(tmp.path(), fixtures::VECTOR_MUL, "vm.json");
    let cfg = design_file(
        tmp.path(),
        r#"[{"name":"mul","pipeline":1,"unroll":2},
            {"name":"A","type":2,"dim":1,"factor":2},
            {"name":"B","type":2,"dim":1,"factor":2},
            {"name":"C","type":2,"dim":1,"factor":2}]"#,
        "cfg.json",
    );
    let r = hlsdse(&["emit-tcl", "--design", s(&d), "--config", s(&cfg), "--clock", "5"]);
    assert_eq!(r.status.code(), Some(0));
    let tcl = String::from_utf8(r.stdout).unwrap();
    assert!(tcl.contains("set_directive_unroll -factor 2 \"vector_mul/mul\""));
    assert!(tcl.contains("create_clock -period 5 -name default"));
}

#[test]
fn exit_codes_distinguish_failures() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(hlsdse(&["explore", "--bogus"]).status.code(), Some(2));
    assert_eq!(hlsdse(&["space", "--design", "/no/such/design.json"]).status.code(), Some(3));

    let bad = design_file(tmp.path(), "latency,util\n100,oops\n", "bad.csv");
    let good = design_file(tmp.path(), "latency,util\n100,0.5\n", "good.csv");
    let r = hlsdse(&["adrs", s(&bad), s(&good)]);
    assert_eq!(r.status.code(), Some(6));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 2"));

    let d = design_file(tmp.path(), fixtures::TINY, "tiny.json");
    let r = hlsdse(&[
        "explore",
        "--design",
        s(&d),
        "--backend",
        "external",
        "--tool",
        "/no/such/vitis_hls",
        "--workdir",
        s(&tmp.path().join("runs")),
        "--out",
        s(&tmp.path().join("out")),
    ]);
    assert_eq!(r.status.code(), Some(4));
    assert!(tmp.path().join("out/trajectory.jsonl").exists());
}
