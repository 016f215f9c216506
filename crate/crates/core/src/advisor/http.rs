use std::collections::VecDeque;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{Advisor, AdvisorError, Objective, ParentNote, ReflectRequest, Role};
use crate::design::{encode_feature_vector, DirectiveConfig, FeatureRecord, HlsDesign};
use crate::search::OperatorContext;
use crate::space::{prune, DesignSpace, PruneRuleSet, RuleDescriptor};

pub const ENV_URL: &str = "HLS_DSE_ADVISOR_URL";
pub const ENV_KEY: &str = "HLS_DSE_ADVISOR_KEY";
pub const ENV_MODEL: &str = "HLS_DSE_ADVISOR_MODEL";

const SYSTEM: &str = include_str!("../../prompts/system.txt");
const EXTRACT: &str = include_str!("../../prompts/extract_features.txt");
const PRUNE: &str = include_str!("../../prompts/prune_rules.txt");
const SEED: &str = include_str!("../../prompts/seed_directives.txt");
const REFLECT: &str = include_str!("../../prompts/reflect_trajectory.txt");
const CONVERGENT: &str = include_str!("../../prompts/convergent_hints.txt");
const DIVERGENT: &str = include_str!("../../prompts/divergent_hints.txt");
const REPAIR: &str = include_str!("../../prompts/repair.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpAdvisorConfig {
    /// Chat-completions endpoint URL.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_retries: usize,
    pub timeout_secs: f64,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
}

impl Default for HttpAdvisorConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "default".into(),
            temperature: 0.2,
            max_retries: 3,
            timeout_secs: 60.0,
            api_key: None,
        }
    }
}

impl HttpAdvisorConfig {
    /// Defaults overridden by `HLS_DSE_ADVISOR_URL`, `_KEY` and `_MODEL`.
    pub fn from_env() -> Self {
        let mut c = Self::default();
        if let Ok(v) = std::env::var(ENV_URL) {
            c.endpoint = v;
        }
        if let Ok(v) = std::env::var(ENV_MODEL) {
            c.model = v;
        }
        c.api_key = std::env::var(ENV_KEY).ok().filter(|k| !k.is_empty());
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    fn new(role: &str, content: impl Into<String>) -> Self {
        Self { role: role.into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Failed(String),
}

/// Sends one chat request and returns the assistant text.
pub trait ChatTransport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Blocking HTTP transport for chat-completion endpoints.
pub struct UreqTransport {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
}

impl UreqTransport {
    pub fn new(config: &HttpAdvisorConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs.max(0.001))))
            .build()
            .into();
        Self { agent, endpoint: config.endpoint.clone(), api_key: config.api_key.clone() }
    }
}

impl ChatTransport for UreqTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let resp = req.send_json(request).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            other => TransportError::Failed(other.to_string()),
        })?;
        let body: Value = resp
            .into_body()
            .read_json()
            .map_err(|e| TransportError::Failed(format!("unreadable response body: {e}")))?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(String::from)
            .ok_or_else(|| TransportError::Failed("response has no choices[0].message.content".into()))
    }
}

/// Replies from a fixed script, in order; records every request.
#[derive(Default)]
pub struct ScriptedTransport {
    replies: Mutex<VecDeque<Result<String, TransportError>>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedTransport {
    pub fn new(replies: impl IntoIterator<Item = Result<String, TransportError>>) -> Self {
        Self { replies: Mutex::new(replies.into_iter().collect()), requests: Mutex::default() }
    }

    /// Requests received so far.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().expect("lock").clone()
    }
}

impl ChatTransport for ScriptedTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.requests.lock().expect("lock").push(request.clone());
        self.replies
            .lock()
            .expect("lock")
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::Failed("script exhausted".into())))
    }
}

impl ChatTransport for Box<dyn ChatTransport> {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        (**self).send(request)
    }
}

impl<T: ChatTransport + ?Sized> ChatTransport for std::sync::Arc<T> {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        (**self).send(request)
    }
}

/// One request/response pair of a transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request: ChatRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Wraps a transport and appends every exchange to a JSON-lines file.
pub struct RecordingTransport<T> {
    inner: T,
    path: PathBuf,
    lock: Mutex<()>,
}

impl<T: ChatTransport> RecordingTransport<T> {
    pub fn new(inner: T, path: impl Into<PathBuf>) -> Self {
        Self { inner, path: path.into(), lock: Mutex::new(()) }
    }
}

impl<T: ChatTransport> ChatTransport for RecordingTransport<T> {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let result = self.inner.send(request);
        let entry = TranscriptEntry {
            request: request.clone(),
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(|e| e.to_string()),
        };
        let _guard = self.lock.lock().expect("lock");
        let line = serde_json::to_string(&entry).expect("transcript entry serializes");
        let written = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = written {
            log::warn!("could not append to transcript {}: {e}", self.path.display());
        }
        result
    }
}

/// Replays a recorded transcript in order, ignoring request contents.
pub struct ReplayTransport {
    inner: ScriptedTransport,
}

impl ReplayTransport {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut replies = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: TranscriptEntry = serde_json::from_str(line).map_err(|err| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, format!("transcript line {}: {err}", i + 1))
            })?;
            replies.push(match (e.response, e.error) {
                (Some(r), _) => Ok(r),
                (None, Some(err)) if err.contains("timed out") => Err(TransportError::Timeout),
                (None, err) => Err(TransportError::Failed(err.unwrap_or_default())),
            });
        }
        Ok(Self { inner: ScriptedTransport::new(replies) })
    }
}

impl ChatTransport for ReplayTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.inner.send(request)
    }
}

/// The JSON value inside the first fenced code block of `text`, or the
/// whole text when it is bare JSON.
pub fn extract_json_block(text: &str) -> Result<Value, String> {
    if let Some(start) = text.find("```") {
        let after = &text[start + 3..];
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
        let body = &after[body_start..];
        let end = body.find("```").ok_or("unterminated code fence")?;
        return serde_json::from_str(body[..end].trim()).map_err(|e| format!("invalid JSON in code block: {e}"));
    }
    serde_json::from_str(text.trim()).map_err(|_| "no fenced JSON block found".to_string())
}

fn render(template: &str, vars: &[(&str, String)]) -> String {
    let mut s = template.to_string();
    for (k, v) in vars {
        s = s.replace(&format!("{{{{{k}}}}}"), v);
    }
    s
}

fn typed<T: DeserializeOwned>(v: &Value) -> Result<T, String> {
    serde_json::from_value(v.clone()).map_err(|e| format!("response does not match the schema: {e}"))
}

/// Advisor backed by a chat-completion model.
pub struct HttpAdvisor {
    pub config: HttpAdvisorConfig,
    transport: Box<dyn ChatTransport>,
}

impl HttpAdvisor {
    pub fn new(config: HttpAdvisorConfig) -> Self {
        let transport = Box::new(UreqTransport::new(&config));
        Self { config, transport }
    }

    pub fn with_transport(config: HttpAdvisorConfig, transport: Box<dyn ChatTransport>) -> Self {
        Self { config, transport }
    }

    /// Sends `prompt` and parses the reply with `parse`. Every request,
    /// including repair re-prompts, counts toward `1 + max_retries`.
    fn call<T>(
        &self,
        role: Role,
        prompt: String,
        parse: impl Fn(&Value) -> Result<T, String>,
    ) -> Result<T, AdvisorError> {
        let base = vec![ChatMessage::new("system", SYSTEM), ChatMessage::new("user", prompt)];
        let mut messages = base.clone();
        let attempts = 1 + self.config.max_retries;
        let mut last = String::new();
        for attempt in 0..attempts {
            let req = ChatRequest {
                model: self.config.model.clone(),
                temperature: self.config.temperature,
                messages: messages.clone(),
            };
            match self.transport.send(&req) {
                Ok(text) => match extract_json_block(&text).and_then(|v| parse(&v)) {
                    Ok(out) => return Ok(out),
                    Err(e) => {
                        log::debug!("{role}: attempt {} unusable: {e}", attempt + 1);
                        messages = base.clone();
                        messages.push(ChatMessage::new("assistant", text));
                        messages.push(ChatMessage::new("user", render(REPAIR, &[("error", e.clone())])));
                        last = e;
                    }
                },
                Err(e) => {
                    log::debug!("{role}: attempt {} failed: {e}", attempt + 1);
                    last = e.to_string();
                }
            }
        }
        Err(AdvisorError::Exhausted { role, attempts, last })
    }

    fn configs(design: &HlsDesign, space: &DesignSpace, v: &Value) -> Result<Vec<DirectiveConfig>, String> {
        let sets: Vec<Vec<FeatureRecord>> = typed(v)?;
        sets.iter()
            .map(|recs| {
                DirectiveConfig::from_records(design, recs).map(|c| space.repair(&c)).map_err(|e| e.to_string())
            })
            .collect()
    }

    fn parents_text(ctx: &OperatorContext) -> String {
        let mut s = String::new();
        for p in ctx.parents {
            let recs = encode_feature_vector(ctx.design, &p.config).unwrap_or_default();
            s.push_str(&format!(
                "- {:?}, latency {} cycles, utilization {:.4}: {}\n",
                p.bottleneck,
                p.qor.latency,
                p.qor.util,
                serde_json::to_string(&recs).unwrap_or_default()
            ));
        }
        s
    }

    fn hints(
        &self,
        role: Role,
        template: &str,
        ctx: &OperatorContext,
        count: usize,
    ) -> Result<Vec<DirectiveConfig>, AdvisorError> {
        let prompt = render(
            template,
            &[
                ("design", ctx.design.to_json()),
                ("space", ctx.space.to_json().to_string()),
                ("parents", Self::parents_text(ctx)),
                ("count", count.to_string()),
            ],
        );
        self.call(role, prompt, |v| Self::configs(ctx.design, ctx.space, v))
    }
}

impl Advisor for HttpAdvisor {
    fn name(&self) -> &str {
        "http"
    }

    fn extract_features(&self, source: &str) -> Result<HlsDesign, AdvisorError> {
        if source.trim().is_empty() {
            return Err(AdvisorError::BadRequest { role: Role::ExtractFeatures, reason: "empty source".into() });
        }
        let prompt = render(EXTRACT, &[("source", source.to_string())]);
        self.call(Role::ExtractFeatures, prompt, |v| HlsDesign::from_json(&v.to_string()).map_err(|e| e.to_string()))
    }

    fn prune_rules(&self, design: &HlsDesign, space: &DesignSpace) -> Result<Vec<RuleDescriptor>, AdvisorError> {
        let prompt = render(PRUNE, &[("design", design.to_json()), ("space", space.to_json().to_string())]);
        self.call(Role::PruneRules, prompt, |v| {
            let rules: Vec<RuleDescriptor> = typed(v)?;
            let check = PruneRuleSet { custom_rules: rules.clone(), ..PruneRuleSet::default() };
            prune(space, design, &check).map_err(|e| e.to_string())?;
            Ok(rules)
        })
    }

    fn seed_directives(
        &self,
        design: &HlsDesign,
        space: &DesignSpace,
        objective: Objective,
        count: usize,
    ) -> Result<Vec<DirectiveConfig>, AdvisorError> {
        if count == 0 {
            return Err(AdvisorError::BadRequest { role: Role::SeedDirectives, reason: "count must be >= 1".into() });
        }
        let prompt = render(
            SEED,
            &[
                ("design", design.to_json()),
                ("space", space.to_json().to_string()),
                ("objective", objective.as_str().to_string()),
                ("count", count.to_string()),
            ],
        );
        self.call(Role::SeedDirectives, prompt, |v| Self::configs(design, space, v))
    }

    fn reflect_trajectory(&self, req: &ReflectRequest) -> Result<Vec<ParentNote>, AdvisorError> {
        if req.population.is_empty() {
            return Ok(Vec::new());
        }
        let mut pop = String::new();
        for (i, m) in req.population.iter().enumerate() {
            let recs = encode_feature_vector(req.design, &m.config).unwrap_or_default();
            pop.push_str(&format!(
                "{i}: rank {}, crowding {:.3}, latency {}, util {:.4}, {}\n",
                m.rank,
                m.crowding,
                m.objectives.latency,
                m.objectives.util,
                serde_json::to_string(&recs).unwrap_or_default()
            ));
        }
        let elites: Vec<String> = req
            .elites
            .iter()
            .enumerate()
            .map(|(k, i)| format!("{i} ({})", req.notes.get(k).map(String::as_str).unwrap_or("")))
            .collect();
        let prompt = render(
            REFLECT,
            &[
                ("design", req.design.to_json()),
                ("population", pop),
                ("elites", elites.join(", ")),
                ("history", req.digest.to_string()),
            ],
        );
        self.call(Role::ReflectTrajectory, prompt, typed::<Vec<ParentNote>>)
    }

    fn convergent_hints(&self, ctx: &OperatorContext, count: usize) -> Result<Vec<DirectiveConfig>, AdvisorError> {
        if count == 0 {
            return Ok(Vec::new());
        }
        self.hints(Role::ConvergentHints, CONVERGENT, ctx, count)
    }

    fn divergent_hints(
        &self,
        ctx: &OperatorContext,
        count: usize,
        _seed: u64,
    ) -> Result<Vec<DirectiveConfig>, AdvisorError> {
        if count == 0 {
            return Ok(Vec::new());
        }
        self.hints(Role::DivergentHints, DIVERGENT, ctx, count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::sync::Arc;

    fn advisor(replies: Vec<Result<String, TransportError>>) -> (HttpAdvisor, Arc<ScriptedTransport>) {
        let t = Arc::new(ScriptedTransport::new(replies));
        let cfg = HttpAdvisorConfig { max_retries: 2, ..Default::default() };
        (HttpAdvisor::with_transport(cfg, Box::new(t.clone())), t)
    }

    #[test]
    fn fenced_block() {
        assert_eq!(extract_json_block("Sure:\n```json\n[1, 2]\n```\n").unwrap(), serde_json::json!([1, 2]));
        assert_eq!(extract_json_block("[3]").unwrap(), serde_json::json!([3]));
        assert!(extract_json_block("no json here").is_err());
        assert!(extract_json_block("```json\n[1,\n```").is_err());
    }

    #[test]
    fn extraction_from_stub() {
        let reply = format!("```json\n{}\n```", fixtures::VECTOR_MUL);
        let (a, _) = advisor(vec![Ok(reply)]);
        assert_eq!(a.extract_features("int main() {}").unwrap(), fixtures::vector_mul());
    }

    #[test]
    fn missing_field_is_role_error() {
        let bad = r#"```json
{"kernel":"k","loops":[{"name":"l"}],"arrays":[]}
```"#;
        let (a, t) = advisor(vec![Ok(bad.into()), Ok(bad.into()), Ok(bad.into()), Ok(bad.into())]);
        match a.extract_features("x").unwrap_err() {
            AdvisorError::Exhausted { attempts, last, .. } => {
                assert_eq!(attempts, 3);
                assert!(last.contains("trip_count"), "{last}");
            }
            e => panic!("unexpected {e:?}"),
        }
        assert_eq!(t.requests().len(), 3);
        assert_eq!(t.requests()[1].messages.len(), 4);
    }

    #[test]
    fn repair_then_success() {
        let d = fixtures::vector_mul();
        let s = DesignSpace::build(&d);
        let good = "```json\n[[{\"name\":\"mul\",\"pipeline\":1,\"unroll\":5}]]\n```";
        let (a, t) = advisor(vec![Ok("garbage".into()), Ok(good.into())]);
        let out = a.seed_directives(&d, &s, Objective::Performance, 1).unwrap();
        assert_eq!(out.len(), 1);
        assert!(s.contains(&out[0]));
        assert_eq!(out[0].loop_directive("mul").unroll, 4);
        assert_eq!(t.requests().len(), 2);
    }

    #[test]
    fn timeouts_exhaust_retries() {
        let d = fixtures::vector_mul();
        let s = DesignSpace::build(&d);
        let (a, t) = advisor(vec![Err(TransportError::Timeout); 5]);
        assert!(a.seed_directives(&d, &s, Objective::Balanced, 2).is_err());
        assert_eq!(t.requests().len(), 3);
    }

    #[test]
    fn transcript_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let rec = RecordingTransport::new(
            ScriptedTransport::new(vec![Ok("```json\n[]\n```".to_string()), Err(TransportError::Timeout)]),
            &path,
        );
        let req = ChatRequest { model: "m".into(), temperature: 0.0, messages: vec![] };
        assert!(rec.send(&req).is_ok());
        assert_eq!(rec.send(&req), Err(TransportError::Timeout));
        let replay = ReplayTransport::load(&path).unwrap();
        assert_eq!(replay.send(&req).unwrap(), "```json\n[]\n```");
        assert_eq!(replay.send(&req), Err(TransportError::Timeout));
    }
}
