//! Command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | usage error (bad flags) |
//! | 3 | configuration error: missing or invalid design, config or parameter |
//! | 4 | backend failure |
//! | 5 | advisor failure |
//! | 6 | malformed input data (front CSV, replay dataset, transcript) |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::advisor::{
    Advisor, ChatTransport, HttpAdvisor, HttpAdvisorConfig, RecordingTransport, ReplayTransport, RuleAdvisor,
    UreqTransport,
};
use crate::design::{config_hash, emit_tcl, DirectiveConfig, FeatureRecord, HlsDesign, ProjectSettings};
use crate::pareto::{adrs, Objectives};
use crate::qor::{BackendError, ExternalBackend, MockBackend, MockModelParams, QorBackend, ReplayBackend};
use crate::sampling::{sample, SamplerKind, SamplerSpec};
use crate::search::{
    baseline_nsga2, evaluations_to_target, explore, BaselineParams, ExploreResult, SearchError, SearchParams,
};
use crate::space::{prune, DesignSpace, PruneRuleSet};
use crate::VERSION;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("advisor error: {0}")]
    Advisor(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Backend(_) => 4,
            CliError::Advisor(_) => 5,
            CliError::Parse(_) => 6,
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Dataset { .. } => CliError::Parse(e.to_string()),
            other => CliError::Backend(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn load_design(path: &Path) -> Result<HlsDesign, CliError> {
    HlsDesign::from_json(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Replay,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSpec {
    pub kind: BackendKind,
    /// Mock model constants.
    pub mock: MockModelParams,
    /// Replay dataset (JSON lines).
    pub replay_path: Option<PathBuf>,
    /// External tool command line; the script path is appended.
    pub tool: Option<String>,
    pub workdir: PathBuf,
    pub timeout_secs: Option<f64>,
    pub workers: usize,
    pub project: ProjectSettings,
}

impl Default for BackendSpec {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            mock: MockModelParams::default(),
            replay_path: None,
            tool: None,
            workdir: PathBuf::from("hls_runs"),
            timeout_secs: None,
            workers: 1,
            project: ProjectSettings::default(),
        }
    }
}

pub fn make_backend(spec: &BackendSpec) -> Result<Box<dyn QorBackend>, CliError> {
    Ok(match spec.kind {
        BackendKind::Mock => Box::new(MockBackend::new(spec.mock.clone())),
        BackendKind::Replay => {
            let path = spec
                .replay_path
                .as_ref()
                .ok_or_else(|| CliError::Config("replay backend needs a dataset path".into()))?;
            Box::new(ReplayBackend::load(path).map_err(|e| match e {
                BackendError::Io(io) => io_err(path, io),
                other => CliError::from(other),
            })?)
        }
        BackendKind::External => {
            let tool =
                spec.tool.as_deref().ok_or_else(|| CliError::Config("external backend needs a tool command".into()))?;
            let mut b = ExternalBackend::new(tool, &spec.workdir);
            if let Some(t) = spec.timeout_secs {
                b = b.with_timeout(Duration::from_secs_f64(t));
            }
            b.project = spec.project.clone();
            b.workers = spec.workers.max(1);
            Box::new(b)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AdvisorKind {
    #[default]
    Rule,
    Http,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AdvisorSpec {
    pub kind: AdvisorKind,
    pub http: Option<HttpAdvisorConfig>,
    /// Append every HTTP exchange to this JSON-lines file.
    pub transcript: Option<PathBuf>,
    /// Answer HTTP requests from a recorded transcript instead of the network.
    pub replay_transcript: Option<PathBuf>,
}

pub fn make_advisor(spec: &AdvisorSpec) -> Result<Box<dyn Advisor>, CliError> {
    if spec.kind == AdvisorKind::Rule {
        return Ok(Box::new(RuleAdvisor));
    }
    let mut cfg = spec.http.clone().unwrap_or_else(HttpAdvisorConfig::from_env);
    if cfg.api_key.is_none() {
        cfg.api_key = HttpAdvisorConfig::from_env().api_key;
    }
    let base: Box<dyn ChatTransport> = match &spec.replay_transcript {
        Some(p) => Box::new(ReplayTransport::load(p).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?),
        None => Box::new(UreqTransport::new(&cfg)),
    };
    let transport: Box<dyn ChatTransport> = match &spec.transcript {
        Some(p) => Box::new(RecordingTransport::new(base, p)),
        None => base,
    };
    Ok(Box::new(HttpAdvisor::with_transport(cfg, transport)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Warm-started adaptive search.
    #[default]
    Adaptive,
    /// Plain NSGA-II seeded by `sampler`.
    Nsga2,
}

/// Everything one experiment needs. Loaded from JSON; flags override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub design: PathBuf,
    pub backend: BackendSpec,
    pub sampler: SamplerSpec,
    pub mode: SearchMode,
    pub search: SearchParams,
    pub baseline: BaselineParams,
    pub advisor: AdvisorSpec,
    pub prune: PruneRuleSet,
    /// Reference front CSV for ADRS reporting.
    pub reference: Option<PathBuf>,
    pub target_adrs: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            design: PathBuf::new(),
            backend: BackendSpec::default(),
            sampler: SamplerSpec::new(SamplerKind::Random, 12, 0),
            mode: SearchMode::Adaptive,
            search: SearchParams::default(),
            baseline: BaselineParams::default(),
            advisor: AdvisorSpec::default(),
            prune: PruneRuleSet::default(),
            reference: None,
            target_adrs: 0.05,
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        serde_json::from_str(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Short hash of the canonical JSON form, embedded in every artifact.
    /// The output directory is left out so a rerun elsewhere matches.
    pub fn hash(&self) -> String {
        let canonical = Self { output_dir: PathBuf::new(), ..self.clone() };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Machine-readable result of `explore`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub mode: SearchMode,
    pub evaluations: usize,
    pub invalid: usize,
    pub budget: usize,
    pub front_size: usize,
    pub pruned_cardinality: String,
    pub adrs: Option<f64>,
    pub target_adrs: Option<f64>,
    pub evaluations_to_target: Option<usize>,
    pub notes: Vec<String>,
}

/// One row of a front file.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontRow {
    pub latency: f64,
    pub util: f64,
    pub config_id: String,
}

/// Front CSV: `# key=value` comment lines, a `latency,util,config_id`
/// header, then one row per point.
pub fn write_front_csv(meta: &[(&str, String)], rows: &[FrontRow]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        let _ = writeln!(s, "# {k}={v}");
    }
    s.push_str("latency,util,config_id\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.9},{}", r.latency, r.util, r.config_id);
    }
    s
}

pub fn parse_front_csv(text: &str) -> Result<Vec<FrontRow>, CliError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("latency") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |k: usize| -> Result<f64, CliError> {
            fields.get(k).and_then(|f| f.parse::<f64>().ok()).filter(|v| v.is_finite()).ok_or_else(|| {
                CliError::Parse(format!("line {}: expected `latency,util[,config_id]`, got `{line}`", i + 1))
            })
        };
        rows.push(FrontRow {
            latency: num(0)?,
            util: num(1)?,
            config_id: fields.get(2).map(|s| s.to_string()).unwrap_or_default(),
        });
    }
    Ok(rows)
}

pub fn read_front(path: &Path) -> Result<Vec<Objectives>, CliError> {
    let rows = parse_front_csv(&read(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Ok(rows.into_iter().map(|r| Objectives::new(r.latency, r.util)).collect())
}

/// ADRS of the explored front file against the reference front file.
pub fn cmd_adrs(explored: &Path, reference: &Path) -> Result<f64, CliError> {
    let e = read_front(explored)?;
    let r = read_front(reference)?;
    adrs(&e, &r).map_err(|err| CliError::Parse(format!("{}: {err}", reference.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    Exhaustive,
    Stratified,
}

/// Outcome of reference-front construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFront {
    pub mode: ReferenceMode,
    pub evaluated: usize,
    pub cardinality: String,
    pub points: Vec<(DirectiveConfig, Objectives)>,
    pub csv: String,
}

/// Evaluates every config of `space` (exhaustive) or `budget` LHS points
/// (stratified) and keeps the rank-1 front.
pub fn cmd_reference(
    design: &HlsDesign,
    space: &DesignSpace,
    backend: &dyn QorBackend,
    mode: ReferenceMode,
    budget: usize,
    seed: u64,
) -> Result<ReferenceFront, CliError> {
    let card = space.cardinality();
    let configs = match mode {
        ReferenceMode::Exhaustive => {
            if card > num_bigint::BigUint::from(budget) {
                return Err(CliError::Config(format!(
                    "exhaustive reference refused: |space| = {card} exceeds the budget of {budget}; use stratified mode"
                )));
            }
            space.enumerate()
        }
        ReferenceMode::Stratified => {
            let spec = SamplerSpec::new(SamplerKind::Lhs, budget.max(1), seed);
            crate::sampling::lhs_sample(space, &spec).map_err(|e| CliError::Config(e.to_string()))?.configs
        }
    };
    let qors = backend.evaluate_batch(design, &configs)?;
    let evals: Vec<(DirectiveConfig, Objectives)> =
        configs.into_iter().zip(qors).filter_map(|(c, q)| q.objectives().map(|o| (c, o))).collect();
    let points = crate::pareto::pareto_front(&evals);
    let rows: Vec<FrontRow> = points
        .iter()
        .map(|(c, o)| FrontRow { latency: o.latency, util: o.util, config_id: config_hash(design, c) })
        .collect();
    let mode_name = match mode {
        ReferenceMode::Exhaustive => "exhaustive",
        ReferenceMode::Stratified => "stratified",
    };
    let evaluated = evals.len();
    let csv = write_front_csv(
        &[
            ("mode", mode_name.to_string()),
            ("seed", seed.to_string()),
            ("cardinality", card.to_string()),
            ("evaluated_valid", evaluated.to_string()),
            ("version", VERSION.to_string()),
        ],
        &rows,
    );
    Ok(ReferenceFront { mode, evaluated, cardinality: card.to_string(), points, csv })
}

/// Builds the pruned space, merging advisor-proposed rules when they apply.
fn pruned_space(
    design: &HlsDesign,
    rules: &PruneRuleSet,
    advisor: &dyn Advisor,
    notes: &mut Vec<String>,
) -> Result<DesignSpace, CliError> {
    let mut rules = rules.clone();
    match advisor.prune_rules(design, &DesignSpace::build(design)) {
        Ok(extra) => rules.custom_rules.extend(extra),
        Err(e) => notes.push(format!("advisor pruning failed ({e}); built-in rules only")),
    }
    prune(&DesignSpace::build(design), design, &rules).map_err(|e| CliError::Config(e.to_string()))
}

/// Artifacts written by [`cmd_explore`].
pub struct ExploreArtifacts {
    pub summary: Summary,
    pub result: ExploreResult,
    pub front_csv: String,
    pub trajectory_jsonl: String,
}

fn render_outputs(cfg: &ExperimentConfig, design: &HlsDesign, result: &ExploreResult, hash: &str) -> (String, String) {
    let rows: Vec<FrontRow> = result
        .front
        .iter()
        .map(|&id| {
            let e = &result.trajectory.entries()[id];
            FrontRow { latency: e.qor.latency as f64, util: e.qor.util, config_id: e.config_hash.clone() }
        })
        .collect();
    let front = write_front_csv(
        &[("seed", cfg.seed.to_string()), ("config_hash", hash.to_string()), ("version", VERSION.to_string())],
        &rows,
    );
    let header = serde_json::json!({
        "kind": "header",
        "seed": cfg.seed,
        "config_hash": hash,
        "version": VERSION,
        "kernel": design.kernel_name,
        "notes": result.trajectory.notes,
    });
    let mut traj = format!("{header}\n");
    let mut buf = Vec::new();
    result.trajectory.write_jsonl(&mut buf).expect("in-memory write");
    traj.push_str(&String::from_utf8(buf).expect("utf-8 json"));
    (front, traj)
}

/// Runs one experiment and writes `trajectory.jsonl`, `front.csv` and
/// `summary.json` to `cfg.output_dir`. On a backend failure the partial
/// trajectory is still written before the error is returned.
pub fn cmd_explore(cfg: &ExperimentConfig) -> Result<ExploreArtifacts, CliError> {
    let design = load_design(&cfg.design)?;
    let backend = make_backend(&cfg.backend)?;
    let advisor = make_advisor(&cfg.advisor)?;
    let mut notes = Vec::new();
    let space = pruned_space(&design, &cfg.prune, advisor.as_ref(), &mut notes)?;
    let hash = cfg.hash();
    let reference = cfg.reference.as_deref().map(read_front).transpose()?;

    let run = match cfg.mode {
        SearchMode::Adaptive => {
            let params = SearchParams { seed: cfg.seed, ..cfg.search.clone() };
            explore(&design, &space, backend.as_ref(), advisor.as_ref(), &params)
        }
        SearchMode::Nsga2 => {
            let spec = SamplerSpec { n: cfg.baseline.n0, seed: cfg.seed, ..cfg.sampler.clone() };
            let init =
                sample(&space, &design, &spec, Some(advisor.as_ref())).map_err(|e| CliError::Config(e.to_string()))?;
            baseline_nsga2(&design, &space, backend.as_ref(), &init.configs, &cfg.baseline, cfg.seed)
        }
    };
    let budget = match cfg.mode {
        SearchMode::Adaptive => cfg.search.budget(),
        SearchMode::Nsga2 => cfg.baseline.budget(),
    };
    let mut result = match run {
        Ok(r) => r,
        Err(SearchError::Backend { source, trajectory }) => {
            let partial = ExploreResult { front: trajectory.front_ids(), trajectory: *trajectory };
            let (_, traj) = render_outputs(cfg, &design, &partial, &hash);
            write(&cfg.output_dir.join("trajectory.jsonl"), &traj)?;
            return Err(CliError::Backend(format!(
                "{source} (partial trajectory of {} evaluations written)",
                partial.trajectory.len()
            )));
        }
        Err(e @ SearchError::Params(_)) | Err(e @ SearchError::Sampling(_)) => {
            return Err(CliError::Config(e.to_string()))
        }
        Err(e) => return Err(CliError::Backend(e.to_string())),
    };
    let mut all_notes = notes;
    all_notes.append(&mut result.trajectory.notes);
    result.trajectory.notes = all_notes;

    let (adrs_value, to_target) = match &reference {
        Some(r) => {
            let a = adrs(&result.front_objectives(), r).map_err(|e| CliError::Parse(e.to_string()))?;
            (Some(a), Some(evaluations_to_target(&result.trajectory, r, cfg.target_adrs, budget)))
        }
        None => (None, None),
    };
    let summary = Summary {
        seed: cfg.seed,
        config_hash: hash.clone(),
        version: VERSION.to_string(),
        mode: cfg.mode,
        evaluations: result.trajectory.len(),
        invalid: result.trajectory.invalid_count(),
        budget,
        front_size: result.front.len(),
        pruned_cardinality: space.cardinality().to_string(),
        adrs: adrs_value,
        target_adrs: reference.as_ref().map(|_| cfg.target_adrs),
        evaluations_to_target: to_target,
        notes: result.trajectory.notes.clone(),
    };
    let (front_csv, trajectory_jsonl) = render_outputs(cfg, &design, &result, &hash);
    write(&cfg.output_dir.join("front.csv"), &front_csv)?;
    write(&cfg.output_dir.join("trajectory.jsonl"), &trajectory_jsonl)?;
    let summary_text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    write(&cfg.output_dir.join("summary.json"), &summary_text)?;
    Ok(ExploreArtifacts { summary, result, front_csv, trajectory_jsonl })
}

#[derive(Debug, Parser)]
#[command(name = "hlsdse", version, about = "Design space exploration for HLS directives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct DesignArg {
    /// Design description (JSON).
    #[arg(long)]
    pub design: PathBuf,
}

#[derive(Debug, Args, Clone, Default)]
pub struct BackendArgs {
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Replay dataset for `--backend replay`.
    #[arg(long)]
    pub replay_data: Option<PathBuf>,
    /// Tool command for `--backend external`.
    #[arg(long)]
    pub tool: Option<String>,
    /// Working directory for external tool runs.
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    /// JSON file with mock model constants.
    #[arg(long)]
    pub mock_params: Option<PathBuf>,
}

impl BackendArgs {
    fn apply(&self, spec: &mut BackendSpec) -> Result<(), CliError> {
        if let Some(k) = self.backend {
            spec.kind = k;
        }
        if let Some(p) = &self.replay_data {
            spec.replay_path = Some(p.clone());
        }
        if let Some(t) = &self.tool {
            spec.tool = Some(t.clone());
        }
        if let Some(w) = &self.workdir {
            spec.workdir = w.clone();
        }
        if let Some(p) = &self.mock_params {
            spec.mock =
                serde_json::from_str(&read(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Random,
    Beta,
    Lhs,
    Warm,
}

impl From<SamplerArg> for SamplerKind {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Random => SamplerKind::Random,
            SamplerArg::Beta => SamplerKind::Beta,
            SamplerArg::Lhs => SamplerKind::Lhs,
            SamplerArg::Warm => SamplerKind::WarmStart,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract a design description from source code with the HTTP advisor.
    Extract {
        /// Kernel source file.
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Print the unpruned design space.
    Space {
        #[command(flatten)]
        design: DesignArg,
    },
    /// Print the pruned design space.
    Prune {
        #[command(flatten)]
        design: DesignArg,
        /// JSON pruning parameters and custom rules.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "rule")]
        advisor: AdvisorKind,
    },
    /// Draw an initial sample and print it as feature-vector JSON lines.
    Sample {
        #[command(flatten)]
        design: DesignArg,
        #[arg(long, value_enum, default_value = "lhs")]
        sampler: SamplerArg,
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "rule")]
        advisor: AdvisorKind,
        /// Sample the unpruned space.
        #[arg(long)]
        no_prune: bool,
    },
    /// Build a reference front by exhaustive or stratified evaluation.
    Reference {
        #[command(flatten)]
        design: DesignArg,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, value_enum, default_value = "exhaustive")]
        mode: ReferenceMode,
        #[arg(long, default_value_t = 5000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Evaluate the unpruned space.
        #[arg(long)]
        no_prune: bool,
    },
    /// Run an exploration experiment.
    Explore {
        /// Experiment config (JSON); flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        design: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, value_enum)]
        sampler: Option<SamplerArg>,
        #[arg(long, value_enum)]
        advisor: Option<AdvisorKind>,
        #[arg(long, value_enum)]
        mode: Option<SearchMode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        i_max: Option<usize>,
        #[arg(long)]
        n0: Option<usize>,
        #[arg(long)]
        pop_size: Option<usize>,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        target_adrs: Option<f64>,
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long)]
        replay_transcript: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the ADRS of an explored front against a reference front.
    Adrs { explored: PathBuf, reference: PathBuf },
    /// Emit the Tcl synthesis script for a configuration.
    EmitTcl {
        #[command(flatten)]
        design: DesignArg,
        /// Feature-vector records (JSON array).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        part: Option<String>,
        #[arg(long)]
        clock: Option<f64>,
    },
}

fn records_json(design: &HlsDesign, c: &DirectiveConfig) -> String {
    serde_json::to_string(&crate::design::encode_feature_vector(design, c).unwrap_or_default()).expect("serializes")
}

/// Executes a parsed command, writing human output to `out`.
pub fn execute(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let mut emit = |s: String| {
        let _ = writeln!(out, "{s}");
    };
    match cli.command {
        Command::Extract { source, out: dest, transcript } => {
            let text = read(&source)?;
            let advisor = make_advisor(&AdvisorSpec { kind: AdvisorKind::Http, transcript, ..Default::default() })?;
            let design = advisor.extract_features(&text).map_err(|e| CliError::Advisor(e.to_string()))?;
            let json = design.to_json();
            match dest {
                Some(p) => write(&p, &(json + "\n"))?,
                None => emit(json),
            }
        }
        Command::Space { design } => {
            let d = load_design(&design.design)?;
            emit(serde_json::to_string_pretty(&DesignSpace::build(&d).to_json()).expect("serializes"));
        }
        Command::Prune { design, rules, advisor } => {
            let d = load_design(&design.design)?;
            let rules: PruneRuleSet = match rules {
                Some(p) => {
                    serde_json::from_str(&read(&p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
                }
                None => PruneRuleSet::default(),
            };
            let adv = make_advisor(&AdvisorSpec { kind: advisor, ..Default::default() })?;
            let mut notes = Vec::new();
            let s = pruned_space(&d, &rules, adv.as_ref(), &mut notes)?;
            for n in notes {
                log::warn!("{n}");
            }
            emit(serde_json::to_string_pretty(&s.to_json()).expect("serializes"));
        }
        Command::Sample { design, sampler, n, seed, alpha, advisor, no_prune } => {
            let d = load_design(&design.design)?;
            let full = DesignSpace::build(&d);
            let s = if no_prune {
                full
            } else {
                prune(&full, &d, &PruneRuleSet::default()).map_err(|e| CliError::Config(e.to_string()))?
            };
            let adv = make_advisor(&AdvisorSpec { kind: advisor, ..Default::default() })?;
            let spec = SamplerSpec { kind: sampler.into(), n, seed, alpha };
            let set = sample(&s, &d, &spec, Some(adv.as_ref())).map_err(|e| CliError::Config(e.to_string()))?;
            if set.short {
                log::warn!("only {} distinct configurations could be drawn", set.configs.len());
            }
            if set.degraded {
                log::warn!("advisor failed; sample drawn by LHS");
            }
            for c in &set.configs {
                emit(records_json(&d, c));
            }
        }
        Command::Reference { design, backend, mode, budget, seed, out: dest, no_prune } => {
            let d = load_design(&design.design)?;
            let mut spec = BackendSpec::default();
            backend.apply(&mut spec)?;
            let b = make_backend(&spec)?;
            let full = DesignSpace::build(&d);
            let s = if no_prune {
                full
            } else {
                prune(&full, &d, &PruneRuleSet::default()).map_err(|e| CliError::Config(e.to_string()))?
            };
            let r = cmd_reference(&d, &s, b.as_ref(), mode, budget, seed)?;
            write(&dest, &r.csv)?;
            emit(format!(
                "{} points from {} valid evaluations (|space| = {})",
                r.points.len(),
                r.evaluated,
                r.cardinality
            ));
        }
        Command::Explore {
            config,
            design,
            backend,
            sampler,
            advisor,
            mode,
            seed,
            i_max,
            n0,
            pop_size,
            generations,
            reference,
            target_adrs,
            transcript,
            replay_transcript,
            out: dest,
        } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(d) = design {
                cfg.design = d;
            }
            if cfg.design.as_os_str().is_empty() {
                return Err(CliError::Config("no design given (--design or config file)".into()));
            }
            backend.apply(&mut cfg.backend)?;
            if let Some(s) = sampler {
                cfg.sampler.kind = s.into();
            }
            if let Some(a) = advisor {
                cfg.advisor.kind = a;
            }
            if let Some(m) = mode {
                cfg.mode = m;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(v) = i_max {
                cfg.search.i_max = v;
            }
            if let Some(v) = n0 {
                cfg.search.n0 = v;
                cfg.baseline.n0 = v;
            }
            if let Some(v) = pop_size {
                cfg.search.pop_size = v;
            }
            if let Some(v) = generations {
                cfg.baseline.generations = v;
            }
            if reference.is_some() {
                cfg.reference = reference;
            }
            if let Some(t) = target_adrs {
                cfg.target_adrs = t;
            }
            if transcript.is_some() {
                cfg.advisor.transcript = transcript;
            }
            if replay_transcript.is_some() {
                cfg.advisor.replay_transcript = replay_transcript;
            }
            if let Some(o) = dest {
                cfg.output_dir = o;
            }
            let a = cmd_explore(&cfg)?;
            emit(serde_json::to_string_pretty(&a.summary).expect("serializes"));
        }
        Command::Adrs { explored, reference } => {
            emit(format!("{:.6}", cmd_adrs(&explored, &reference)?));
        }
        Command::EmitTcl { design, config, part, clock } => {
            let d = load_design(&design.design)?;
            let recs: Vec<FeatureRecord> = serde_json::from_str(&read(&config)?)
                .map_err(|e| CliError::Parse(format!("{}: {e}", config.display())))?;
            let c = DirectiveConfig::from_records(&d, &recs).map_err(|e| CliError::Config(e.to_string()))?;
            let mut project = ProjectSettings::default();
            if let Some(p) = part {
                project.part = p;
            }
            if let Some(c) = clock {
                project.clock_period_ns = c;
            }
            let _ = write!(out, "{}", emit_tcl(&d, &c, &project));
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn front_csv_round_trip() {
        let rows = vec![FrontRow { latency: 100.0, util: 0.5, config_id: "ab".into() }];
        let text = write_front_csv(&[("seed", "1".into())], &rows);
        assert!(text.starts_with("# seed=1\nlatency,util,config_id\n"));
        assert_eq!(parse_front_csv(&text).unwrap(), rows);
    }

    #[test]
    fn malformed_csv_names_line() {
        let err = parse_front_csv("latency,util\n100,0.5\nxx,0.3\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert_eq!(err.exit_code(), 6);
    }

    #[test]
    fn exit_codes_distinct() {
        let codes = [
            CliError::Config(String::new()).exit_code(),
            CliError::Backend(String::new()).exit_code(),
            CliError::Advisor(String::new()).exit_code(),
            CliError::Parse(String::new()).exit_code(),
        ];
        let set: std::collections::HashSet<_> = codes.iter().collect();
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn missing_design_is_config_error() {
        assert_eq!(run(["hlsdse", "explore", "--design", "/nonexistent/d.json"]), 3);
    }
}
