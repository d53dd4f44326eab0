//! One completion interface over scripted, replayed, recorded and live
//! model backends, with token accounting, an optional budget and retries.

use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::prompt::PromptInstance;
use crate::verify::ResponseCategory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub n_samples: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 100,
            n_samples: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub sent: u64,
    pub received: u64,
    pub calls: u64,
}

impl LedgerSnapshot {
    pub fn total_tokens(&self) -> u64 {
        self.sent + self.received
    }
}

/// Running token and call counts; shared between concurrent runs.
#[derive(Debug, Default)]
pub struct TokenLedger {
    sent: AtomicU64,
    received: AtomicU64,
    calls: AtomicU64,
}

impl TokenLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            sent: self.sent.load(Ordering::SeqCst),
            received: self.received.load(Ordering::SeqCst),
            calls: self.calls.load(Ordering::SeqCst),
        }
    }

    fn charge(&self, sent: u64, received: u64) {
        self.sent.fetch_add(sent, Ordering::SeqCst);
        self.received.fetch_add(received, Ordering::SeqCst);
    }

    fn count_call(&self) {
        self.calls.fetch_add(1, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("token budget exhausted ({used} used of {budget})")]
    BudgetExhausted { used: u64, budget: u64 },
    #[error("scripted responses exhausted")]
    ScriptExhausted,
    #[error("no replay record for prompt key {key}")]
    ReplayKeyMissing { key: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("backend config: {0}")]
    Config(String),
}

impl LlmError {
    fn is_transient(&self) -> bool {
        matches!(self, LlmError::Transient(_))
    }
}

/// Whitespace-token count; good enough for cost accounting.
pub fn estimate_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Replay key: sha256 (hex) of the prompt with whitespace runs collapsed.
pub fn prompt_key(prompt: &str) -> String {
    let normalized = prompt.split_whitespace().collect::<Vec<_>>().join(" ");
    hex::encode(Sha256::digest(normalized.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub texts: Vec<String>,
    /// Provider-reported (prompt, completion) token counts, if any.
    pub usage: Option<(u64, u64)>,
}

pub trait Backend: Send {
    fn generate(&mut self, prompt: &str, params: &GenerationParams) -> Result<Completion, LlmError>;

    /// Whether failures of this backend are worth retrying.
    fn retries(&self) -> bool {
        false
    }
}

/// Returns a fixed response list in order.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    script: VecDeque<String>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self {
            script: responses.into_iter().map(Into::into).collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.script.len()
    }
}

impl Backend for ScriptedBackend {
    fn generate(&mut self, _: &str, params: &GenerationParams) -> Result<Completion, LlmError> {
        let n = params.n_samples.max(1) as usize;
        if self.script.len() < n {
            return Err(LlmError::ScriptExhausted);
        }
        Ok(Completion {
            texts: self.script.drain(..n).collect(),
            usage: None,
        })
    }
}

/// One corpus line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub v: u32,
    pub key: String,
    pub prompt: String,
    pub responses: Vec<String>,
    /// Hand labels, parallel to `responses`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<ResponseCategory>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

impl CorpusRecord {
    pub fn new(prompt: &str, responses: Vec<String>) -> Self {
        Self {
            v: 1,
            key: prompt_key(prompt),
            prompt: prompt.to_string(),
            responses,
            labels: None,
            object: None,
            task: None,
            kind: None,
        }
    }
}

pub fn parse_corpus(text: &str) -> Result<Vec<CorpusRecord>, LlmError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LlmError::Corpus(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>, LlmError> {
    let file = File::open(path).map_err(|e| LlmError::Corpus(format!("{}: {e}", path.display())))?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        text.push_str(&line.map_err(|e| LlmError::Corpus(e.to_string()))?);
        text.push('\n');
    }
    parse_corpus(&text)
}

pub fn write_corpus(path: &Path, records: &[CorpusRecord]) -> Result<(), LlmError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| LlmError::Corpus(e.to_string()))?);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| LlmError::Corpus(e.to_string()))
}

/// Answers from a recorded corpus by prompt key. The first record for a
/// key wins, so replays are deterministic.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    by_key: HashMap<String, Vec<String>>,
}

impl ReplayBackend {
    pub fn new(records: Vec<CorpusRecord>) -> Self {
        let mut by_key = HashMap::new();
        for r in records {
            by_key.entry(r.key).or_insert(r.responses);
        }
        Self { by_key }
    }

    pub fn from_path(path: &Path) -> Result<Self, LlmError> {
        Ok(Self::new(read_corpus(path)?))
    }
}

impl Backend for ReplayBackend {
    fn generate(&mut self, prompt: &str, params: &GenerationParams) -> Result<Completion, LlmError> {
        let key = prompt_key(prompt);
        let stored = self
            .by_key
            .get(&key)
            .ok_or(LlmError::ReplayKeyMissing { key })?;
        let n = (params.n_samples.max(1) as usize).min(stored.len());
        Ok(Completion {
            texts: stored[..n].to_vec(),
            usage: None,
        })
    }
}

/// Passes calls through to `inner` and appends each exchange to a corpus.
pub struct RecordBackend<B> {
    inner: B,
    path: PathBuf,
}

impl<B: Backend> RecordBackend<B> {
    pub fn new(inner: B, path: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            path: path.into(),
        }
    }
}

impl<B: Backend> Backend for RecordBackend<B> {
    fn generate(&mut self, prompt: &str, params: &GenerationParams) -> Result<Completion, LlmError> {
        let c = self.inner.generate(prompt, params)?;
        let line = serde_json::to_string(&CorpusRecord::new(prompt, c.texts.clone()))
            .map_err(|e| LlmError::Corpus(e.to_string()))?;
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| LlmError::Corpus(e.to_string()))?;
        writeln!(f, "{line}").map_err(|e| LlmError::Corpus(e.to_string()))?;
        Ok(c)
    }

    fn retries(&self) -> bool {
        self.inner.retries()
    }
}

/// HTTP completion endpoint speaking a minimal JSON protocol:
/// request `{prompt, temperature, max_tokens, n, model?}`, response
/// `{choices: [{text}], usage?: {prompt_tokens, completion_tokens}}`.
pub struct LiveBackend {
    endpoint: String,
    credential_env: String,
    model: Option<String>,
    agent: ureq::Agent,
}

impl LiveBackend {
    pub fn new(endpoint: &str, credential_env: &str, model: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            endpoint: endpoint.to_string(),
            credential_env: credential_env.to_string(),
            model,
            agent,
        }
    }
}

#[derive(Deserialize)]
struct WireChoice {
    text: String,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

impl Backend for LiveBackend {
    fn generate(&mut self, prompt: &str, params: &GenerationParams) -> Result<Completion, LlmError> {
        let key = std::env::var(&self.credential_env)
            .map_err(|_| LlmError::MissingCredential(self.credential_env.clone()))?;
        let mut body = serde_json::json!({
            "prompt": prompt,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "n": params.n_samples,
        });
        if let Some(m) = &self.model {
            body["model"] = serde_json::Value::String(m.clone());
        }
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(&body)
            .map_err(|e| match e {
                ureq::Error::StatusCode(s) if s == 429 || s >= 500 => {
                    LlmError::Transient(format!("status {s}"))
                }
                ureq::Error::StatusCode(s) => LlmError::Backend(format!("status {s}")),
                ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed => {
                    LlmError::Transient(e.to_string())
                }
                other => LlmError::Backend(other.to_string()),
            })?;
        let wire: WireResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Backend(format!("response body: {e}")))?;
        Ok(Completion {
            texts: wire.choices.into_iter().map(|c| c.text).collect(),
            usage: wire.usage.map(|u| (u.prompt_tokens, u.completion_tokens)),
        })
    }

    fn retries(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    Live,
    Replay,
    Scripted,
    Record,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub mode: BackendMode,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub corpus_path: Option<PathBuf>,
    #[serde(default)]
    pub script: Vec<String>,
    #[serde(default)]
    pub budget_tokens: Option<u64>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Record mode wraps this backend (live or scripted).
    #[serde(default)]
    pub record_inner: Option<BackendMode>,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_retries() -> u32 {
    3
}

impl BackendConfig {
    pub fn scripted<S: Into<String>>(script: impl IntoIterator<Item = S>) -> Self {
        Self {
            mode: BackendMode::Scripted,
            endpoint: None,
            credential_env: None,
            model: None,
            corpus_path: None,
            script: script.into_iter().map(Into::into).collect(),
            budget_tokens: None,
            timeout_ms: default_timeout_ms(),
            max_retries: default_retries(),
            record_inner: None,
        }
    }

    pub fn replay(corpus: impl Into<PathBuf>) -> Self {
        Self {
            mode: BackendMode::Replay,
            corpus_path: Some(corpus.into()),
            ..Self::scripted(Vec::<String>::new())
        }
    }

    fn build_plain(&self, mode: BackendMode) -> Result<Box<dyn Backend>, LlmError> {
        let need = |what: &str| LlmError::Config(format!("{mode:?} mode needs {what}"));
        Ok(match mode {
            BackendMode::Scripted => Box::new(ScriptedBackend::new(self.script.clone())),
            BackendMode::Replay => Box::new(ReplayBackend::from_path(
                self.corpus_path.as_deref().ok_or_else(|| need("corpus_path"))?,
            )?),
            BackendMode::Live => Box::new(LiveBackend::new(
                self.endpoint.as_deref().ok_or_else(|| need("endpoint"))?,
                self.credential_env.as_deref().ok_or_else(|| need("credential_env"))?,
                self.model.clone(),
                Duration::from_millis(self.timeout_ms),
            )),
            BackendMode::Record => return Err(LlmError::Config("record cannot wrap record".into())),
        })
    }

    pub fn build(&self) -> Result<Box<dyn Backend>, LlmError> {
        match self.mode {
            BackendMode::Record => {
                let path = self
                    .corpus_path
                    .clone()
                    .ok_or_else(|| LlmError::Config("record mode needs corpus_path".into()))?;
                let inner = self.build_plain(self.record_inner.unwrap_or(BackendMode::Live))?;
                Ok(Box::new(RecordBackend::new(inner, path)))
            }
            m => self.build_plain(m),
        }
    }
}

impl Backend for Box<dyn Backend> {
    fn generate(&mut self, prompt: &str, params: &GenerationParams) -> Result<Completion, LlmError> {
        (**self).generate(prompt, params)
    }

    fn retries(&self) -> bool {
        (**self).retries()
    }
}

/// The agent's single entry point to a language model.
pub struct LlmGateway {
    backend: Box<dyn Backend>,
    ledger: Arc<TokenLedger>,
    pub budget_tokens: Option<u64>,
    pub max_retries: u32,
    pub backoff_base: Duration,
}

impl LlmGateway {
    pub fn new(backend: Box<dyn Backend>, ledger: Arc<TokenLedger>) -> Self {
        Self {
            backend,
            ledger,
            budget_tokens: None,
            max_retries: default_retries(),
            backoff_base: Duration::from_millis(250),
        }
    }

    pub fn from_config(cfg: &BackendConfig, ledger: Arc<TokenLedger>) -> Result<Self, LlmError> {
        let mut g = Self::new(cfg.build()?, ledger);
        g.budget_tokens = cfg.budget_tokens;
        g.max_retries = cfg.max_retries;
        Ok(g)
    }

    pub fn ledger(&self) -> &Arc<TokenLedger> {
        &self.ledger
    }

    /// `n_samples` completions for the prompt.
    pub fn complete(&mut self, prompt: &PromptInstance) -> Result<Vec<String>, LlmError> {
        self.complete_text(&prompt.text, &prompt.params)
    }

    pub fn complete_text(
        &mut self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<Vec<String>, LlmError> {
        let estimate = estimate_tokens(prompt);
        if let Some(budget) = self.budget_tokens {
            let used = self.ledger.snapshot().total_tokens();
            if used + estimate > budget {
                return Err(LlmError::BudgetExhausted { used, budget });
            }
        }
        self.ledger.count_call();
        let retries = if self.backend.retries() {
            self.max_retries
        } else {
            0
        };
        let mut attempt = 0;
        let completion = loop {
            match self.backend.generate(prompt, params) {
                Ok(c) => break c,
                Err(e) if e.is_transient() && attempt < retries => {
                    log::warn!("completion attempt {} failed: {e}", attempt + 1);
                    std::thread::sleep(self.backoff_base * 2u32.pow(attempt));
                    attempt += 1;
                }
                Err(e) if e.is_transient() => {
                    return Err(LlmError::RetriesExhausted {
                        attempts: attempt + 1,
                        last: e.to_string(),
                    })
                }
                Err(e) => return Err(e),
            }
        };
        let (sent, received) = completion.usage.unwrap_or_else(|| {
            (
                estimate,
                completion.texts.iter().map(|t| estimate_tokens(t)).sum(),
            )
        });
        self.ledger.charge(sent, received);
        Ok(completion.texts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled::GOLDEN_PROMPT;

    fn gateway(b: impl Backend + 'static) -> LlmGateway {
        let mut g = LlmGateway::new(Box::new(b), Arc::new(TokenLedger::new()));
        g.backoff_base = Duration::ZERO;
        g
    }

    #[test]
    fn scripted_in_order_then_exhausted() {
        let mut g = gateway(ScriptedBackend::new(["r1", "r2"]));
        let p = GenerationParams::default();
        assert_eq!(g.complete_text("a", &p).unwrap(), vec!["r1"]);
        assert_eq!(g.complete_text("b", &p).unwrap(), vec!["r2"]);
        assert_eq!(g.complete_text("c", &p), Err(LlmError::ScriptExhausted));
        assert_eq!(g.ledger().snapshot().calls, 3);
    }

    #[test]
    fn zero_budget_fails_without_a_call() {
        let mut g = gateway(ScriptedBackend::new(["r1"]));
        g.budget_tokens = Some(0);
        assert!(matches!(
            g.complete_text("a b", &GenerationParams::default()),
            Err(LlmError::BudgetExhausted { .. })
        ));
        assert_eq!(g.ledger().snapshot(), LedgerSnapshot::default());
    }

    #[test]
    fn ledger_counts_whitespace_tokens() {
        let mut g = gateway(ScriptedBackend::new(["one two three"]));
        g.complete_text("a  b\tc d", &GenerationParams::default()).unwrap();
        assert_eq!(
            g.ledger().snapshot(),
            LedgerSnapshot {
                sent: 4,
                received: 3,
                calls: 1
            }
        );
    }

    #[test]
    fn replay_golden_key() {
        let rec = CorpusRecord::new(
            GOLDEN_PROMPT,
            vec!["The goal is that the mug is in the cupboard.".into()],
        );
        let mut g = gateway(ReplayBackend::new(vec![rec]));
        let p = GenerationParams::default();
        // whitespace drift does not change the key
        let drifted = GOLDEN_PROMPT.replace(". ", ".  ");
        assert_eq!(
            g.complete_text(&drifted, &p).unwrap(),
            vec!["The goal is that the mug is in the cupboard."]
        );
        assert!(matches!(
            g.complete_text("unknown", &p),
            Err(LlmError::ReplayKeyMissing { .. })
        ));
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.ndjson");
        let mut g = gateway(RecordBackend::new(ScriptedBackend::new(["x", "y"]), &path));
        let p = GenerationParams::default();
        g.complete_text("first prompt", &p).unwrap();
        g.complete_text("second prompt", &p).unwrap();
        let mut r = gateway(ReplayBackend::from_path(&path).unwrap());
        assert_eq!(r.complete_text("second prompt", &p).unwrap(), vec!["y"]);
        assert_eq!(r.complete_text("first prompt", &p).unwrap(), vec!["x"]);
    }

    struct Flaky {
        failures: u32,
    }

    impl Backend for Flaky {
        fn generate(&mut self, _: &str, _: &GenerationParams) -> Result<Completion, LlmError> {
            if self.failures > 0 {
                self.failures -= 1;
                return Err(LlmError::Transient("timeout".into()));
            }
            Ok(Completion {
                texts: vec!["ok".into()],
                usage: Some((10, 1)),
            })
        }

        fn retries(&self) -> bool {
            true
        }
    }

    #[test]
    fn transient_failures_retry_then_give_up() {
        let mut g = gateway(Flaky { failures: 2 });
        g.max_retries = 2;
        let p = GenerationParams::default();
        assert_eq!(g.complete_text("a", &p).unwrap(), vec!["ok"]);
        assert_eq!(g.ledger().snapshot().sent, 10);
        let mut g = gateway(Flaky { failures: 5 });
        g.max_retries = 2;
        assert!(matches!(
            g.complete_text("a", &p),
            Err(LlmError::RetriesExhausted { attempts: 3, .. })
        ));
    }

    #[test]
    fn n_samples_take_several() {
        let mut g = gateway(ScriptedBackend::new(["a", "b", "c"]));
        let p = GenerationParams {
            n_samples: 2,
            ..Default::default()
        };
        assert_eq!(g.complete_text("x", &p).unwrap(), vec!["a", "b"]);
        assert_eq!(g.complete_text("x", &p), Err(LlmError::ScriptExhausted));
    }

    #[test]
    fn config_checks_mode_fields() {
        let mut cfg = BackendConfig::scripted(["a"]);
        cfg.mode = BackendMode::Live;
        assert!(matches!(cfg.build(), Err(LlmError::Config(_))));
        let cfg: BackendConfig =
            serde_json::from_str(r#"{"mode":"scripted","script":["a"],"budget_tokens":5}"#).unwrap();
        let g = LlmGateway::from_config(&cfg, Arc::new(TokenLedger::new())).unwrap();
        assert_eq!(g.budget_tokens, Some(5));
    }
}
