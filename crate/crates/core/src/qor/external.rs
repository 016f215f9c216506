use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

use super::{BackendError, Capabilities, QoR, QorBackend, Resources, DEFAULT_TIMEOUT_SECS};
use crate::design::{config_hash, emit_tcl, DirectiveConfig, HlsDesign, ProjectSettings};
use crate::pareto::UtilWeights;

/// Overrides the synthesis wall-clock cap, in seconds.
pub const TIMEOUT_ENV: &str = "HLS_DSE_TIMEOUT_SECS";

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    pub latency: u64,
    pub resources: Resources,
}

/// Parses the synthesis report a tool run leaves in its working directory.
pub trait ReportGrammar: Send + Sync {
    /// Report path, relative to the evaluation directory.
    fn report_file(&self) -> &str;
    fn parse(&self, text: &str) -> Result<ParsedReport, String>;
}

/// Flat `key=value` report: `latency_cycles`, the absolute counts `lut`,
/// `ff`, `dsp`, `bram` and their device totals `lut_total` .. `bram_total`.
/// Blank lines and `#` comments are ignored.
#[derive(Debug, Clone)]
pub struct KeyValueReport {
    pub file_name: String,
}

impl Default for KeyValueReport {
    fn default() -> Self {
        Self { file_name: "qor_report.txt".to_string() }
    }
}

impl ReportGrammar for KeyValueReport {
    fn report_file(&self) -> &str {
        &self.file_name
    }

    fn parse(&self, text: &str) -> Result<ParsedReport, String> {
        let mut kv = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
            let v: f64 = v.trim().parse().map_err(|_| format!("line {}: `{}` is not a number", n + 1, v.trim()))?;
            kv.insert(k.trim().to_string(), v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| format!("missing key `{k}`"));
        let ratio = |k: &str| -> Result<f64, String> {
            let total = get(&format!("{k}_total"))?;
            if total <= 0.0 {
                return Err(format!("`{k}_total` must be positive"));
            }
            Ok(get(k)? / total)
        };
        let latency = get("latency_cycles")?;
        if latency < 0.0 {
            return Err("negative latency".into());
        }
        Ok(ParsedReport {
            latency: latency.round() as u64,
            resources: Resources { lut: ratio("lut")?, ff: ratio("ff")?, dsp: ratio("dsp")?, bram: ratio("bram")? },
        })
    }
}

/// Runs `<tool_cmd...> script.tcl` in a per-evaluation directory under
/// `workdir`, with a wall-clock cap.
pub struct ExternalBackend {
    pub tool_cmd: Vec<String>,
    pub workdir: PathBuf,
    pub timeout: Duration,
    pub project: ProjectSettings,
    pub weights: UtilWeights,
    pub grammar: Box<dyn ReportGrammar>,
    /// Concurrent tool processes in a batch.
    pub workers: usize,
}

impl ExternalBackend {
    /// `tool_cmd` is split on whitespace; the cap comes from
    /// `HLS_DSE_TIMEOUT_SECS` when set, else 20 minutes.
    pub fn new(tool_cmd: &str, workdir: impl Into<PathBuf>) -> Self {
        let secs = std::env::var(TIMEOUT_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|s| *s > 0.0)
            .unwrap_or(DEFAULT_TIMEOUT_SECS);
        Self {
            tool_cmd: tool_cmd.split_whitespace().map(String::from).collect(),
            workdir: workdir.into(),
            timeout: Duration::from_secs_f64(secs),
            project: ProjectSettings::default(),
            weights: UtilWeights::default(),
            grammar: Box::new(KeyValueReport::default()),
            workers: 1,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_grammar(mut self, grammar: Box<dyn ReportGrammar>) -> Self {
        self.grammar = grammar;
        self
    }

    fn run(&self, dir: &Path) -> Result<QoR, BackendError> {
        let (program, args) =
            self.tool_cmd.split_first().ok_or_else(|| BackendError::Transport("empty tool command".into()))?;
        let start = Instant::now();
        let mut child = Command::new(program)
            .args(args)
            .arg("script.tcl")
            .current_dir(dir)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| BackendError::Transport(format!("failed to spawn `{program}`: {e}")))?;
        let mut stderr = child.stderr.take();
        let reader = std::thread::spawn(move || {
            let mut buf = String::new();
            if let Some(s) = stderr.as_mut() {
                let _ = s.read_to_string(&mut buf);
            }
            buf
        });
        let status = child.wait_timeout(self.timeout)?;
        let elapsed = start.elapsed().as_secs_f64();
        let Some(status) = status else {
            let _ = child.kill();
            let _ = child.wait();
            // Grandchildren may still hold stderr open, so the reader is detached.
            drop(reader);
            return Ok(QoR::invalid(elapsed, format!("timed out after {:.1}s", self.timeout.as_secs_f64())));
        };
        let err_text = reader.join().unwrap_or_default();
        if !status.success() {
            return Ok(QoR::invalid(elapsed, format!("tool exited with {status}: {}", err_text.trim())));
        }
        let report = dir.join(self.grammar.report_file());
        let text = match std::fs::read_to_string(&report) {
            Ok(t) => t,
            Err(e) => return Ok(QoR::invalid(elapsed, format!("missing report {}: {e}", report.display()))),
        };
        match self.grammar.parse(&text) {
            Ok(r) => Ok(QoR::new(r.latency, r.resources, &self.weights, elapsed)),
            Err(e) => Ok(QoR::invalid(elapsed, format!("unparseable report: {e}"))),
        }
    }
}

impl QorBackend for ExternalBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities { batch: self.workers > 1, introspection: false }
    }

    fn evaluate(&self, design: &HlsDesign, config: &DirectiveConfig) -> Result<QoR, BackendError> {
        let dir = self.workdir.join(format!("eval_{}", config_hash(design, config)));
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("script.tcl"), emit_tcl(design, config, &self.project))?;
        self.run(&dir)
    }

    fn evaluate_batch(&self, design: &HlsDesign, configs: &[DirectiveConfig]) -> Result<Vec<QoR>, BackendError> {
        let workers = self.workers.max(1);
        if workers == 1 {
            return configs.iter().map(|c| self.evaluate(design, c)).collect();
        }
        let mut out = Vec::with_capacity(configs.len());
        for chunk in configs.chunks(workers) {
            let results: Vec<Result<QoR, BackendError>> = std::thread::scope(|s| {
                let handles: Vec<_> = chunk.iter().map(|c| s.spawn(move || self.evaluate(design, c))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(BackendError::Transport("worker panicked".into()))))
                    .collect()
            });
            for r in results {
                out.push(r?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_report() {
        let g = KeyValueReport::default();
        let r = g
            .parse("# synthetic\nlatency_cycles=515\nlut=2304\nlut_total=230400\nff = 4608\nff_total=460800\ndsp=6\ndsp_total=1728\nbram=6\nbram_total=312\n")
            .unwrap();
        assert_eq!(r.latency, 515);
        assert!((r.resources.lut - 0.01).abs() < 1e-12);
        assert!((r.resources.ff - 0.01).abs() < 1e-12);
        assert!(g.parse("latency_cycles=5\n").unwrap_err().contains("lut"));
        assert!(g.parse("latency_cycles five\n").is_err());
    }
}
