//! Small blocking JSON-over-HTTP client shared by the provider adapters.

use std::fmt;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, thiserror::Error)]
pub enum HttpError {
    #[error("{endpoint}: request timed out")]
    Timeout { endpoint: String },
    #[error("{endpoint}: transport error: {message}")]
    Transport { endpoint: String, message: String },
    #[error("{endpoint}: HTTP {status}: {body}")]
    Status {
        endpoint: String,
        status: u16,
        body: String,
    },
    #[error("{endpoint}: malformed response: {message}")]
    Decode { endpoint: String, message: String },
}

impl HttpError {
    pub fn endpoint(&self) -> &str {
        match self {
            HttpError::Timeout { endpoint }
            | HttpError::Transport { endpoint, .. }
            | HttpError::Status { endpoint, .. }
            | HttpError::Decode { endpoint, .. } => endpoint,
        }
    }
}

/// A base URL plus optional bearer token and a request timeout.
#[derive(Clone)]
pub struct HttpClient {
    base: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpClient")
            .field("base", &self.base)
            .field("token", &self.token.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl HttpClient {
    pub fn new(base: impl Into<String>, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        HttpClient {
            base: base.into().trim_end_matches('/').to_string(),
            token: None,
            agent: ureq::Agent::new_with_config(config),
        }
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token.filter(|t| !t.is_empty());
        self
    }

    /// Reads the bearer token from environment variable `var`, if set.
    pub fn with_token_env(self, var: &str) -> Self {
        let token = std::env::var(var).ok();
        self.with_token(token)
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    fn transport_error(&self, url: &str, e: ureq::Error) -> HttpError {
        match e {
            ureq::Error::Timeout(_) => HttpError::Timeout {
                endpoint: url.to_string(),
            },
            other => HttpError::Transport {
                endpoint: url.to_string(),
                message: other.to_string(),
            },
        }
    }

    /// Posts JSON and returns the raw status and body without interpreting either.
    pub fn post_json_raw<B: Serialize>(&self, path: &str, body: &B) -> Result<(u16, String), HttpError> {
        let url = self.url(path);
        let mut req = self.agent.post(&url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.send_json(body).map_err(|e| self.transport_error(&url, e))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| self.transport_error(&url, e))?;
        Ok((status, text))
    }

    pub fn post_json<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, HttpError> {
        let (status, text) = self.post_json_raw(path, body)?;
        self.decode(path, status, &text)
    }

    pub fn post_form<T: DeserializeOwned>(&self, path: &str, fields: &[(&str, &str)]) -> Result<T, HttpError> {
        let url = self.url(path);
        let mut req = self.agent.post(&url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req
            .send_form(fields.iter().copied())
            .map_err(|e| self.transport_error(&url, e))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| self.transport_error(&url, e))?;
        self.decode(path, status, &text)
    }

    fn decode<T: DeserializeOwned>(&self, path: &str, status: u16, text: &str) -> Result<T, HttpError> {
        let endpoint = self.url(path);
        if !(200..300).contains(&status) {
            return Err(HttpError::Status {
                endpoint,
                status,
                body: text.chars().take(500).collect(),
            });
        }
        serde_json::from_str(text).map_err(|e| HttpError::Decode {
            endpoint,
            message: e.to_string(),
        })
    }
}
