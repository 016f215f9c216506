#![cfg(unix)]

use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use hlsdse_core::design::{DirectiveConfig, LoopDirective};
use hlsdse_core::fixtures;
use hlsdse_core::qor::{ExternalBackend, QorBackend};

fn stub(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("tool.sh");
    std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn backend(dir: &Path, body: &str) -> ExternalBackend {
    let tool = stub(dir, body);
    ExternalBackend::new(tool.to_str().unwrap(), dir.join("runs")).with_timeout(Duration::from_secs(10))
}

const REPORT: &str = "cat > qor_report.txt <<EOF
latency_cycles=1030
lut=2304
lut_total=230400
ff=4608
ff_total=460800
dsp=17
dsp_total=1728
bram=3
bram_total=312
EOF";

#[test]
fn successful_run_is_parsed() {
    let tmp = tempfile::tempdir().unwrap();
    let b = backend(tmp.path(), REPORT);
    let q = b.evaluate(&fixtures::vector_mul(), &DirectiveConfig::new()).unwrap();
    assert!(q.valid, "{q:?}");
    assert_eq!(q.latency, 1030);
    assert!((q.lut - 0.01).abs() < 1e-12);
    assert!((q.bram - 3.0 / 312.0).abs() < 1e-12);
}

#[test]
fn script_is_written_and_passed() {
    let tmp = tempfile::tempdir().unwrap();
    let b = backend(tmp.path(), &format!("grep -q 'set_directive_pipeline' \"$1\" || exit 3\n{REPORT}"));
    let mut c = DirectiveConfig::new();
    c.set_loop("mul", LoopDirective::new(true, 0));
    assert!(b.evaluate(&fixtures::vector_mul(), &c).unwrap().valid);
    assert!(!b.evaluate(&fixtures::vector_mul(), &DirectiveConfig::new()).unwrap().valid);
}

#[test]
fn nonzero_exit_is_invalid() {
    let tmp = tempfile::tempdir().unwrap();
    let b = backend(tmp.path(), "echo 'ERROR: [HLS 200-70] failed' >&2\nexit 1");
    let q = b.evaluate(&fixtures::vector_mul(), &DirectiveConfig::new()).unwrap();
    assert!(!q.valid);
    assert!(q.note.unwrap().contains("HLS 200-70"));
}

#[test]
fn missing_report_is_invalid() {
    let tmp = tempfile::tempdir().unwrap();
    let b = backend(tmp.path(), "exit 0");
    let q = b.evaluate(&fixtures::vector_mul(), &DirectiveConfig::new()).unwrap();
    assert!(!q.valid);
    assert!(q.note.unwrap().contains("missing report"));
}

#[test]
fn garbled_report_is_invalid() {
    let tmp = tempfile::tempdir().unwrap();
    let b = backend(tmp.path(), "echo 'latency_cycles=lots' > qor_report.txt");
    let q = b.evaluate(&fixtures::vector_mul(), &DirectiveConfig::new()).unwrap();
    assert!(!q.valid);
    assert!(q.note.unwrap().contains("unparseable"));
}

#[test]
fn slow_tool_times_out() {
    let tmp = tempfile::tempdir().unwrap();
    let b = backend(tmp.path(), "sleep 5").with_timeout(Duration::from_millis(200));
    let q = b.evaluate(&fixtures::vector_mul(), &DirectiveConfig::new()).unwrap();
    assert!(!q.valid);
    assert!(q.eval_seconds >= 0.19 && q.eval_seconds < 2.0, "{}", q.eval_seconds);
}

#[test]
fn missing_tool_is_a_transport_error() {
    let tmp = tempfile::tempdir().unwrap();
    let b = ExternalBackend::new("/nonexistent/vitis_hls", tmp.path());
    assert!(b.evaluate(&fixtures::vector_mul(), &DirectiveConfig::new()).is_err());
}

#[test]
fn parallel_batch_keeps_order() {
    let tmp = tempfile::tempdir().unwrap();
    // Latency encodes the unroll factor found in the script.
    let body = "u=$(sed -n 's/.*unroll -factor \\([0-9]*\\).*/\\1/p' \"$1\")\n\
                printf 'latency_cycles=%s\\nlut=1\\nlut_total=10\\nff=1\\nff_total=10\\ndsp=1\\ndsp_total=10\\nbram=1\\nbram_total=10\\n' \"${u:-1}\" > qor_report.txt";
    let mut b = backend(tmp.path(), body);
    b.workers = 3;
    let configs: Vec<DirectiveConfig> = [2u64, 4, 8, 16, 32]
        .iter()
        .map(|&u| {
            let mut c = DirectiveConfig::new();
            c.set_loop("mul", LoopDirective::new(false, u));
            c
        })
        .collect();
    let got: Vec<u64> =
        b.evaluate_batch(&fixtures::vector_mul(), &configs).unwrap().iter().map(|q| q.latency).collect();
    assert_eq!(got, vec![2, 4, 8, 16, 32]);
}
