//! Completions-style LLM client, cassette record/replay, and judge-vote parsing.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::http::{HttpClient, HttpError};
use crate::sync::Semaphore;

pub const LLM_KEY_ENV: &str = "NOISEFORGE_LLM_KEY";
pub const MAX_TOKENS_CEILING: u32 = 4096;

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("{endpoint}: authentication failed (HTTP {status})")]
    Auth { endpoint: String, status: u16 },
    #[error("{endpoint}: gave up after {attempts} attempts: {last}")]
    Exhausted {
        endpoint: String,
        attempts: u32,
        last: String,
    },
    #[error("{endpoint}: malformed completion response: {message}")]
    Malformed { endpoint: String, message: String },
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("cassette has no entry for key {key}")]
    CassetteMiss { key: String },
    #[error("{path} line {line}: {message}")]
    Cassette {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid LLM parameters: {0}")]
    InvalidParams(String),
    #[error("scripted completer ran out of responses")]
    ScriptExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
}

impl Default for LlmParams {
    fn default() -> Self {
        LlmParams {
            model: "text-davinci-003".into(),
            temperature: 0.7,
            max_tokens: 256,
            stop: None,
        }
    }
}

impl LlmParams {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidParams(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 || self.max_tokens > MAX_TOKENS_CEILING {
            return Err(LlmError::InvalidParams(format!(
                "max_tokens {} outside [1, {MAX_TOKENS_CEILING}]",
                self.max_tokens
            )));
        }
        if self.model.trim().is_empty() {
            return Err(LlmError::InvalidParams("empty model name".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
    #[serde(default)]
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub usage: Option<Usage>,
    pub latency: Duration,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Completion {
            text: text.into(),
            usage: None,
            latency: Duration::ZERO,
        }
    }

    /// True when the provider returned no text at all.
    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }
}

/// Anything that turns a prompt into a completion.
///
/// `attempt` is the 1-based position of this call in a cleaning loop. Providers
/// ignore it; cassettes key on it because retries may resend an identical prompt.
pub trait Completer: Send + Sync {
    fn complete(&self, prompt: &str, params: &LlmParams, attempt: u32) -> Result<Completion, LlmError>;
}

impl<C: Completer + ?Sized> Completer for Arc<C> {
    fn complete(&self, prompt: &str, params: &LlmParams, attempt: u32) -> Result<Completion, LlmError> {
        (**self).complete(prompt, params, attempt)
    }
}

impl<C: Completer + ?Sized> Completer for &C {
    fn complete(&self, prompt: &str, params: &LlmParams, attempt: u32) -> Result<Completion, LlmError> {
        (**self).complete(prompt, params, attempt)
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.0.elapsed()
    }
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d)
    }
}

/// Clock whose `sleep` advances time instantly.
#[derive(Debug, Default)]
pub struct VirtualClock(Mutex<Duration>);

impl VirtualClock {
    pub fn advance(&self, d: Duration) {
        *self.0.lock().unwrap() += d;
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        *self.0.lock().unwrap()
    }
    fn sleep(&self, d: Duration) {
        self.advance(d)
    }
}

/// Sliding-window limiter: at most `per_second` dispatches in any 1 s window.
pub struct RateLimiter {
    per_second: usize,
    clock: Arc<dyn Clock>,
    sent: Mutex<VecDeque<Duration>>,
}

impl fmt::Debug for RateLimiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateLimiter").field("per_second", &self.per_second).finish()
    }
}

impl RateLimiter {
    pub fn new(per_second: usize, clock: Arc<dyn Clock>) -> Self {
        RateLimiter {
            per_second: per_second.max(1),
            clock,
            sent: Mutex::new(VecDeque::new()),
        }
    }

    /// Blocks until a dispatch slot is free, records it, and returns its time.
    pub fn acquire(&self) -> Duration {
        const WINDOW: Duration = Duration::from_secs(1);
        loop {
            let wait = {
                let mut sent = self.sent.lock().unwrap();
                let now = self.clock.now();
                while sent.front().is_some_and(|t| now.saturating_sub(*t) >= WINDOW) {
                    sent.pop_front();
                }
                if sent.len() < self.per_second {
                    sent.push_back(now);
                    return now;
                }
                (sent[0] + WINDOW).saturating_sub(now)
            };
            self.clock.sleep(wait.max(Duration::from_micros(1)));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireFormat {
    /// `POST /v1/completions` with a `prompt` field.
    #[default]
    Completions,
    /// `POST /v1/chat/completions` with a single user message.
    Chat,
}

impl WireFormat {
    fn path(self) -> &'static str {
        match self {
            WireFormat::Completions => "/v1/completions",
            WireFormat::Chat => "/v1/chat/completions",
        }
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct WireChoice {
    text: Option<String>,
    message: Option<WireMessage>,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

pub struct HttpCompleter {
    client: HttpClient,
    wire: WireFormat,
    retry: RetryPolicy,
    limiter: Option<RateLimiter>,
    in_flight: Semaphore,
    clock: Arc<dyn Clock>,
    requests: AtomicUsize,
}

impl fmt::Debug for HttpCompleter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpCompleter")
            .field("client", &self.client)
            .field("wire", &self.wire)
            .field("retry", &self.retry)
            .finish()
    }
}

impl HttpCompleter {
    pub fn new(client: HttpClient) -> Self {
        HttpCompleter {
            client,
            wire: WireFormat::default(),
            retry: RetryPolicy::default(),
            limiter: None,
            in_flight: Semaphore::new(8),
            clock: Arc::new(SystemClock::default()),
            requests: AtomicUsize::new(0),
        }
    }

    pub fn with_wire(mut self, wire: WireFormat) -> Self {
        self.wire = wire;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Clock used for backoff and rate limiting. Set it before
    /// [`with_rate_limit`](Self::with_rate_limit).
    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_rate_limit(mut self, per_second: Option<usize>) -> Self {
        self.limiter = per_second.map(|r| RateLimiter::new(r, self.clock.clone()));
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.in_flight = Semaphore::new(n);
        self
    }

    /// HTTP requests sent so far, retries included.
    pub fn requests_sent(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    fn body(&self, prompt: &str, params: &LlmParams) -> serde_json::Value {
        let mut body = match self.wire {
            WireFormat::Completions => json!({
                "model": params.model,
                "prompt": prompt,
                "temperature": params.temperature,
                "max_tokens": params.max_tokens,
            }),
            WireFormat::Chat => json!({
                "model": params.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": params.temperature,
                "max_tokens": params.max_tokens,
            }),
        };
        if let Some(stop) = &params.stop {
            body["stop"] = json!(stop);
        }
        body
    }

    fn decode(&self, endpoint: &str, text: &str) -> Result<(String, Option<Usage>), LlmError> {
        let malformed = |message: String| LlmError::Malformed {
            endpoint: endpoint.to_string(),
            message,
        };
        let resp: WireResponse = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        let choice = resp
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| malformed("no choices".into()))?;
        let text = match self.wire {
            WireFormat::Completions => choice.text,
            WireFormat::Chat => choice.message.and_then(|m| m.content),
        }
        .ok_or_else(|| malformed("choice has no text".into()))?;
        Ok((text, resp.usage))
    }
}

impl Completer for HttpCompleter {
    fn complete(&self, prompt: &str, params: &LlmParams, _attempt: u32) -> Result<Completion, LlmError> {
        params.validate()?;
        let path = self.wire.path();
        let endpoint = self.client.url(path);
        let body = self.body(prompt, params);
        let mut tries = 0u32;
        loop {
            tries += 1;
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            let started = Instant::now();
            let outcome = {
                let _permit = self.in_flight.acquire();
                self.requests.fetch_add(1, Ordering::SeqCst);
                self.client.post_json_raw(path, &body)
            };
            let transient = match outcome {
                Ok((status, text)) if (200..300).contains(&status) => {
                    let (text, usage) = self.decode(&endpoint, &text)?;
                    if text.is_empty() {
                        log::warn!("{endpoint}: provider returned an empty completion");
                    }
                    return Ok(Completion {
                        text,
                        usage,
                        latency: started.elapsed(),
                    });
                }
                Ok((status @ (401 | 403), _)) => {
                    return Err(LlmError::Auth { endpoint, status });
                }
                Ok((status, text)) if status == 429 || status >= 500 => format!("HTTP {status}: {}", text.trim()),
                Ok((status, text)) => {
                    return Err(HttpError::Status {
                        endpoint,
                        status,
                        body: text.chars().take(500).collect(),
                    }
                    .into());
                }
                Err(e @ (HttpError::Timeout { .. } | HttpError::Transport { .. })) => e.to_string(),
                Err(e) => return Err(e.into()),
            };
            if tries > self.retry.max_retries {
                return Err(LlmError::Exhausted {
                    endpoint,
                    attempts: tries,
                    last: transient,
                });
            }
            let delay = self.retry.delay(tries - 1);
            log::warn!("{endpoint}: attempt {tries} failed ({transient}); retrying in {delay:?}");
            self.clock.sleep(delay);
        }
    }
}

/// Digest identifying one request in a cassette.
pub fn cassette_key(prompt: &str, params: &LlmParams, attempt: u32) -> String {
    let canon = json!({
        "prompt": prompt,
        "model": params.model,
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
        "stop": params.stop,
        "attempt": attempt,
    });
    hex::encode(Sha256::digest(canon.to_string().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub key: String,
    pub prompt: String,
    pub response: String,
}

/// Replays recorded completions; never touches the network.
#[derive(Debug, Default)]
pub struct Cassette {
    entries: HashMap<String, String>,
    misses: AtomicUsize,
}

impl Cassette {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let io = |source| LlmError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::open(path).map_err(io)?;
        let mut entries = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let e: CassetteEntry = serde_json::from_str(&line).map_err(|e| LlmError::Cassette {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.insert(e.key, e.response);
        }
        Ok(Cassette {
            entries,
            misses: AtomicUsize::new(0),
        })
    }

    pub fn from_entries(entries: impl IntoIterator<Item = CassetteEntry>) -> Self {
        Cassette {
            entries: entries.into_iter().map(|e| (e.key, e.response)).collect(),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::SeqCst)
    }
}

impl Completer for Cassette {
    fn complete(&self, prompt: &str, params: &LlmParams, attempt: u32) -> Result<Completion, LlmError> {
        let key = cassette_key(prompt, params, attempt);
        match self.entries.get(&key) {
            Some(r) => Ok(Completion::text(r.clone())),
            None => {
                self.misses.fetch_add(1, Ordering::SeqCst);
                Err(LlmError::CassetteMiss { key })
            }
        }
    }
}

/// Forwards to `inner` and appends every successful exchange to a cassette file.
pub struct Recorder<C> {
    inner: C,
    path: PathBuf,
    out: Mutex<File>,
}

impl<C: Completer> Recorder<C> {
    pub fn new(inner: C, path: &Path) -> Result<Self, LlmError> {
        let out = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| LlmError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        Ok(Recorder {
            inner,
            path: path.to_path_buf(),
            out: Mutex::new(out),
        })
    }
}

impl<C: Completer> Completer for Recorder<C> {
    fn complete(&self, prompt: &str, params: &LlmParams, attempt: u32) -> Result<Completion, LlmError> {
        let c = self.inner.complete(prompt, params, attempt)?;
        let entry = CassetteEntry {
            key: cassette_key(prompt, params, attempt),
            prompt: prompt.to_string(),
            response: c.text.clone(),
        };
        let mut line = serde_json::to_string(&entry).expect("cassette entry serializes");
        line.push('\n');
        let mut f = self.out.lock().unwrap();
        f.write_all(line.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|source| LlmError::Io {
                path: self.path.clone(),
                source,
            })?;
        Ok(c)
    }
}

/// Completer driven by a closure; handy for tests and fixtures.
pub struct FnCompleter<F> {
    f: F,
    calls: AtomicUsize,
}

impl<F> FnCompleter<F>
where
    F: Fn(&str, &LlmParams, u32) -> Result<String, LlmError> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        FnCompleter {
            f,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<F> Completer for FnCompleter<F>
where
    F: Fn(&str, &LlmParams, u32) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, prompt: &str, params: &LlmParams, attempt: u32) -> Result<Completion, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.f)(prompt, params, attempt).map(Completion::text)
    }
}

/// Hands out canned responses in order.
#[derive(Debug, Default)]
pub struct ScriptedCompleter {
    queue: Mutex<VecDeque<String>>,
    calls: AtomicUsize,
}

impl ScriptedCompleter {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedCompleter {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Completer for ScriptedCompleter {
    fn complete(&self, _prompt: &str, _params: &LlmParams, _attempt: u32) -> Result<Completion, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.queue
            .lock()
            .unwrap()
            .pop_front()
            .map(Completion::text)
            .ok_or(LlmError::ScriptExhausted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeVote {
    First,
    Second,
    Tie,
}

impl JudgeVote {
    pub fn as_str(self) -> &'static str {
        match self {
            JudgeVote::First => "first",
            JudgeVote::Second => "second",
            JudgeVote::Tie => "tie",
        }
    }
}

impl fmt::Display for JudgeVote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for JudgeVote {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "first" => Ok(JudgeVote::First),
            "second" => Ok(JudgeVote::Second),
            "tie" => Ok(JudgeVote::Tie),
            other => Err(format!("unknown choice {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unparseable judge output: {raw:?}")]
pub struct JudgeParseError {
    pub raw: String,
}

/// Maps a judge reply of `1`, `2` or `3` to a vote.
pub fn parse_judge(raw: &str) -> Result<JudgeVote, JudgeParseError> {
    let t = raw.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation() || "。．、「」“”".contains(c));
    match t {
        "1" => Ok(JudgeVote::First),
        "2" => Ok(JudgeVote::Second),
        "3" => Ok(JudgeVote::Tie),
        _ => Err(JudgeParseError { raw: raw.to_string() }),
    }
}
