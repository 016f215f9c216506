use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BackendError, Capabilities, QoR, QorBackend};
use crate::design::{DirectiveConfig, HlsDesign, LoopInfo, PartitionType};
use crate::pareto::UtilWeights;

/// Constants of the analytical model. Device totals resemble a ZCU106-class part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockModelParams {
    pub ports_per_partition: u64,
    pub pipeline_depth: u64,
    pub dsp_per_parallel_op: f64,
    pub lut_per_parallel_op: f64,
    pub ff_per_pipeline_stage: f64,
    pub dsp_total: f64,
    pub lut_total: f64,
    pub ff_total: f64,
    pub bram_total: f64,
    /// A design with any resource ratio above this fails synthesis.
    pub overmap_threshold: f64,
}

impl Default for MockModelParams {
    fn default() -> Self {
        Self {
            ports_per_partition: 2,
            pipeline_depth: 4,
            dsp_per_parallel_op: 3.0,
            lut_per_parallel_op: 250.0,
            ff_per_pipeline_stage: 120.0,
            dsp_total: 1728.0,
            lut_total: 230400.0,
            ff_total: 460800.0,
            bram_total: 312.0,
            overmap_threshold: 1.2,
        }
    }
}

impl MockModelParams {
    /// A small device on which aggressive parallelism fails synthesis:
    /// 48 DSPs, so roughly 19 parallel operations fit before over-mapping.
    pub fn constrained() -> Self {
        Self { dsp_total: 48.0, lut_total: 8000.0, ff_total: 16000.0, bram_total: 312.0, ..Self::default() }
    }

    /// An 8x device that holds any schedule parallel only below the
    /// outermost loop of a 64^3 nest (4096 operations) but over-maps once
    /// the outermost loop is pipelined or unrolled on top of that.
    pub fn hostile() -> Self {
        Self { dsp_total: 13824.0, lut_total: 1843200.0, ff_total: 3686400.0, bram_total: 2496.0, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Resources {
    pub lut: f64,
    pub ff: f64,
    pub dsp: f64,
    pub bram: f64,
}

impl Resources {
    pub fn max_ratio(&self) -> f64 {
        self.lut.max(self.ff).max(self.dsp).max(self.bram)
    }
}

/// A schedulable unit: a pipelined loop (with everything inside it fully
/// unrolled) or a non-pipelined innermost loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeUnit {
    pub loop_name: String,
    pub pipelined: bool,
    /// Replication of the unit's body per iteration.
    pub replication: u64,
    pub iterations: u64,
    pub ii: u64,
    /// Parallel accesses per iteration, by array.
    pub accesses: BTreeMap<String, u64>,
    /// Arrays whose ports cap the initiation interval above 1.
    pub port_limited: Vec<String>,
    /// Latency of one execution of the unit.
    pub latency: u64,
    /// Latency times the iterations of enclosing non-pipelined loops.
    pub contribution: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockAnalysis {
    pub latency: u64,
    pub resources: Resources,
    pub units: Vec<ComputeUnit>,
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b.max(1))
}

/// Partitions available for accesses along dimension `dim` of `array`.
pub(crate) fn effective_factor(design: &HlsDesign, config: &DirectiveConfig, array: &str, dim: usize) -> u64 {
    let d = config.array_directive(array);
    if !d.is_active() || d.dim != dim {
        return 1;
    }
    match d.kind {
        PartitionType::Complete => design.array(array).and_then(|a| a.dim_size(dim)).unwrap_or(1),
        _ => d.factor.max(1),
    }
}

/// Accesses per iteration of `l` issued by `l` and its subtree when
/// everything below `l` is fully unrolled, scaled by `scale`.
pub(crate) fn collect_accesses(l: &LoopInfo, scale: u64, out: &mut BTreeMap<(String, usize), u64>) {
    for (a, dim) in &l.accessed_arrays {
        *out.entry((a.clone(), *dim)).or_default() += scale;
    }
    for c in &l.children {
        collect_accesses(c, scale.saturating_mul(c.trip_count), out);
    }
}

struct Walker<'a> {
    design: &'a HlsDesign,
    config: &'a DirectiveConfig,
    params: &'a MockModelParams,
    units: Vec<ComputeUnit>,
}

impl Walker<'_> {
    fn unit(&mut self, l: &LoopInfo, outer_iterations: u64) -> u64 {
        let d = self.config.loop_directive(&l.name);
        let u = d.replication();
        let iterations = ceil_div(l.trip_count, u);
        let mut acc = BTreeMap::new();
        if d.pipeline {
            collect_accesses(l, u, &mut acc);
        } else {
            for (a, dim) in &l.accessed_arrays {
                *acc.entry((a.clone(), *dim)).or_default() += u;
            }
        }
        let mut ii = 1;
        let mut port_limited = Vec::new();
        for ((array, dim), &n) in &acc {
            let bw = effective_factor(self.design, self.config, array, *dim) * self.params.ports_per_partition;
            let need = ceil_div(n, bw);
            if need > 1 {
                port_limited.push(array.clone());
            }
            ii = ii.max(need);
        }
        let depth = self.params.pipeline_depth;
        let latency = if d.pipeline { depth + ii * (iterations - 1) } else { iterations * depth };
        let mut accesses = BTreeMap::new();
        for ((a, _), n) in acc {
            *accesses.entry(a).or_default() += n;
        }
        self.units.push(ComputeUnit {
            loop_name: l.name.clone(),
            pipelined: d.pipeline,
            replication: u,
            iterations,
            ii,
            accesses,
            port_limited,
            latency,
            contribution: latency.saturating_mul(outer_iterations),
        });
        latency
    }

    fn latency(&mut self, l: &LoopInfo, outer_iterations: u64) -> u64 {
        let d = self.config.loop_directive(&l.name);
        if d.pipeline || l.is_leaf() {
            return self.unit(l, outer_iterations);
        }
        let iterations = ceil_div(l.trip_count, d.replication());
        let inner = outer_iterations.saturating_mul(iterations);
        let body: u64 = l.children.iter().map(|c| self.latency(c, inner)).sum();
        iterations.saturating_mul(body)
    }
}

fn resources_of(design: &HlsDesign, config: &DirectiveConfig, params: &MockModelParams) -> Resources {
    // (parallel copies, pipeline stages) per innermost loop
    fn leaves(l: &LoopInfo, cfg: &DirectiveConfig, copies: u64, piped: bool, depth: u64, out: &mut Vec<(u64, u64)>) {
        let d = cfg.loop_directive(&l.name);
        let u = if piped { l.trip_count } else { d.replication() };
        let copies = copies.saturating_mul(u);
        let piped_here = piped || d.pipeline;
        if l.is_leaf() {
            out.push((copies, if piped_here { depth } else { 1 }));
        } else {
            for c in &l.children {
                leaves(c, cfg, copies, piped_here, depth, out);
            }
        }
    }
    let mut per_leaf = Vec::new();
    for l in &design.loops {
        leaves(l, config, 1, false, params.pipeline_depth, &mut per_leaf);
    }
    let parallel: f64 = per_leaf.iter().map(|&(c, _)| c as f64).sum();
    let staged: f64 = per_leaf.iter().map(|&(c, s)| c as f64 * s as f64).sum();
    let partitions: f64 = design
        .arrays
        .iter()
        .map(|a| {
            let d = config.array_directive(&a.name);
            if !d.is_active() {
                1.0
            } else if d.kind == PartitionType::Complete {
                a.dim_size(d.dim).unwrap_or(1) as f64
            } else {
                d.factor.max(1) as f64
            }
        })
        .sum();
    Resources {
        lut: parallel * params.lut_per_parallel_op / params.lut_total,
        ff: staged * params.ff_per_pipeline_stage / params.ff_total,
        dsp: parallel * params.dsp_per_parallel_op / params.dsp_total,
        bram: partitions / params.bram_total,
    }
}

/// Full analysis: latency, resource ratios and per-unit detail.
pub fn mock_analysis(design: &HlsDesign, config: &DirectiveConfig, params: &MockModelParams) -> MockAnalysis {
    let mut w = Walker { design, config, params, units: Vec::new() };
    let latency = design.loops.iter().map(|l| w.latency(l, 1)).sum();
    MockAnalysis { latency, resources: resources_of(design, config, params), units: w.units }
}

/// Latency in cycles under the analytical model.
pub fn mock_latency(design: &HlsDesign, config: &DirectiveConfig, params: &MockModelParams) -> u64 {
    mock_analysis(design, config, params).latency
}

/// Uncapped resource ratios under the analytical model.
pub fn mock_resources(design: &HlsDesign, config: &DirectiveConfig, params: &MockModelParams) -> Resources {
    resources_of(design, config, params)
}

/// Deterministic backend over the analytical model.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    pub params: MockModelParams,
    pub weights: UtilWeights,
}

impl MockBackend {
    pub fn new(params: MockModelParams) -> Self {
        Self { params, weights: UtilWeights::default() }
    }
}

impl QorBackend for MockBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities { batch: true, introspection: true }
    }

    fn evaluate(&self, design: &HlsDesign, config: &DirectiveConfig) -> Result<QoR, BackendError> {
        let a = mock_analysis(design, config, &self.params);
        if a.resources.max_ratio() > self.params.overmap_threshold {
            return Ok(QoR::invalid(0.0, format!("over-mapped: max resource ratio {:.3}", a.resources.max_ratio())));
        }
        Ok(QoR::new(a.latency, a.resources, &self.weights, 0.0))
    }

    fn analyze(&self, design: &HlsDesign, config: &DirectiveConfig) -> Option<MockAnalysis> {
        Some(mock_analysis(design, config, &self.params))
    }
}
