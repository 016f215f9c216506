use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{DirectiveConfig, HlsDesign, PartitionType};

/// Vitis HLS project settings used in the script preamble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectSettings {
    /// Defaults to the kernel name.
    #[serde(default)]
    pub project_name: Option<String>,
    /// Defaults to `<kernel>.cpp`, or the design's source path when set.
    #[serde(default)]
    pub source_files: Vec<String>,
    #[serde(default)]
    pub top: Option<String>,
    pub solution: String,
    pub part: String,
    pub clock_period_ns: f64,
}

pub fn project_settings_default() -> ProjectSettings {
    ProjectSettings {
        project_name: None,
        source_files: Vec::new(),
        top: None,
        solution: "solution".to_string(),
        part: "xczu7ev-ffvc1156-2-e".to_string(),
        clock_period_ns: 10.0,
    }
}

impl Default for ProjectSettings {
    fn default() -> Self {
        project_settings_default()
    }
}

fn fmt_period(p: f64) -> String {
    if p.fract() == 0.0 && p.abs() < 1e15 {
        format!("{}", p as i64)
    } else {
        format!("{p}")
    }
}

/// Renders the synthesis script: project setup, solution setup, partition,
/// pipeline and unroll directives (in that order), then `csynth_design`.
/// Off directives produce no lines, and empty sections are skipped.
pub fn emit_tcl(design: &HlsDesign, config: &DirectiveConfig, project: &ProjectSettings) -> String {
    let kernel = design.kernel_name.as_str();
    let project_name = project.project_name.as_deref().unwrap_or(kernel);
    let top = project.top.as_deref().unwrap_or(kernel);
    let files: Vec<String> = if project.source_files.is_empty() {
        match &design.source_path {
            Some(p) => vec![p.display().to_string()],
            None => vec![format!("{kernel}.cpp")],
        }
    } else {
        project.source_files.clone()
    };

    let mut s = String::new();
    s.push_str("# Project Setup\n");
    let _ = writeln!(s, "open_project {project_name}");
    for f in &files {
        let _ = writeln!(s, "add_files {f}");
    }
    let _ = writeln!(s, "set_top {top}");
    s.push('\n');
    s.push_str("# Solution Configuration\n");
    let _ = writeln!(s, "open_solution {}", project.solution);
    let _ = writeln!(s, "set_part {{{}}}", project.part);
    let _ = writeln!(s, "create_clock -period {} -name default", fmt_period(project.clock_period_ns));
    s.push('\n');

    let mut partitions = String::new();
    for a in &design.arrays {
        let d = config.array_directive(&a.name);
        if !d.is_active() {
            continue;
        }
        match d.kind {
            PartitionType::Complete => {
                let _ = writeln!(partitions, "set_directive_array_partition -type complete \\");
            }
            kind => {
                let _ = writeln!(
                    partitions,
                    "set_directive_array_partition -type {} -factor {} \\",
                    kind.tcl_name(),
                    d.factor
                );
            }
        }
        let _ = writeln!(partitions, " -dim {} \"{kernel}\" {}", d.dim, a.name);
    }

    let nodes = design.loop_nodes();
    let mut pipelines = String::new();
    let mut unrolls = String::new();
    for n in &nodes {
        let d = config.loop_directive(&n.info.name);
        if d.pipeline {
            let _ = writeln!(pipelines, "set_directive_pipeline \"{kernel}/{}\"", n.info.name);
        }
        if d.unroll > 1 {
            let _ = writeln!(unrolls, "set_directive_unroll -factor {} \"{kernel}/{}\"", d.unroll, n.info.name);
        }
    }

    for (title, body) in [
        ("# Array Partition Directives", partitions),
        ("# Loop Pipeline Directives", pipelines),
        ("# Loop Unroll Directives", unrolls),
    ] {
        if !body.is_empty() {
            s.push_str(title);
            s.push('\n');
            s.push_str(&body);
            s.push('\n');
        }
    }

    s.push_str("# HLS Synthesis\ncsynth_design\nexit\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{ArrayDirective, LoopDirective};
    use crate::fixtures;

    #[test]
    fn defaults() {
        let p = project_settings_default();
        assert_eq!(p.part, "xczu7ev-ffvc1156-2-e");
        assert_eq!(p.clock_period_ns, 10.0);
        assert_eq!(p.solution, "solution");
    }

    #[test]
    fn empty_config_has_no_directives() {
        let d = fixtures::vector_mul();
        let tcl = emit_tcl(&d, &DirectiveConfig::new(), &ProjectSettings::default());
        assert!(!tcl.contains("set_directive"));
        assert!(tcl.ends_with("csynth_design\nexit\n"));
        assert!(tcl.starts_with("# Project Setup\nopen_project vector_mul\n"));
    }

    #[test]
    fn overrides_appear_verbatim() {
        let d = fixtures::vector_mul();
        let p = ProjectSettings { clock_period_ns: 5.0, part: "xcvu9p-flga2104-2-i".into(), ..Default::default() };
        let tcl = emit_tcl(&d, &DirectiveConfig::new(), &p);
        assert!(tcl.contains("create_clock -period 5 -name default\n"));
        assert!(tcl.contains("set_part {xcvu9p-flga2104-2-i}\n"));
        let p = ProjectSettings { clock_period_ns: 3.33, ..Default::default() };
        assert!(emit_tcl(&d, &DirectiveConfig::new(), &p).contains("-period 3.33 "));
    }

    #[test]
    fn complete_partition_has_no_factor() {
        let d = fixtures::gemm();
        let mut c = DirectiveConfig::new();
        c.set_array("A", ArrayDirective::complete(2));
        let tcl = emit_tcl(&d, &c, &ProjectSettings::default());
        assert!(tcl.contains("set_directive_array_partition -type complete \\\n -dim 2 \"gemm\" A\n"));
        assert!(!tcl.contains("-factor"));
    }

    #[test]
    fn off_loop_contributes_no_lines() {
        let d = fixtures::gemm();
        let mut c = DirectiveConfig::new();
        c.set_loop("k", LoopDirective::new(true, 4));
        let tcl = emit_tcl(&d, &c, &ProjectSettings::default());
        assert_eq!(tcl.matches("set_directive").count(), 2);
        assert!(!tcl.contains("gemm/i"));
        assert!(!tcl.contains("gemm/j"));
    }
}
