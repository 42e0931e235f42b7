//! Run configuration read from TOML. Endpoints are optional; commands that
//! need one fail when it is missing. Secrets never live here, only the names
//! of the environment variables holding them.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentKind, DEFAULT_ALPHA};
use crate::embed::{GateConfig, EMBED_KEY_ENV};
use crate::llm::{LlmParams, WireFormat, LLM_KEY_ENV};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("no {0} endpoint configured (set it in the config file or pass the flag)")]
    MissingEndpoint(&'static str),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Endpoints {
    pub llm: Option<String>,
    pub llm_wire: WireFormat,
    pub embedding: Option<String>,
    pub grammar: Option<String>,
    pub fill_mask: Option<String>,
    pub tokenizer: Option<String>,
    /// Languages routed to the tokenizer endpoint.
    pub tokenizer_langs: Vec<String>,
    pub timeout_secs: Option<u64>,
    pub rate_limit_per_sec: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Credentials {
    pub llm_key_env: String,
    pub embed_key_env: String,
}

impl Default for Credentials {
    fn default() -> Self {
        Credentials {
            llm_key_env: LLM_KEY_ENV.into(),
            embed_key_env: EMBED_KEY_ENV.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSettings {
    pub alpha: f64,
    pub kinds: Vec<AugmentKind>,
    pub synonyms: Option<PathBuf>,
    pub error_dict: Option<PathBuf>,
}

impl Default for AugmentSettings {
    fn default() -> Self {
        AugmentSettings {
            alpha: DEFAULT_ALPHA,
            kinds: AugmentKind::ALL.to_vec(),
            synonyms: None,
            error_dict: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub parallelism: usize,
    /// Prompt pack root; the bundled packs are used when unset.
    pub pack_dir: Option<PathBuf>,
    /// Language codes accepted in addition to en, fr and ja.
    pub extra_langs: Vec<String>,
    pub endpoints: Endpoints,
    pub credentials: Credentials,
    pub gate: GateConfig,
    pub llm: LlmParams,
    pub augment: AugmentSettings,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            parallelism: 4,
            pack_dir: None,
            extra_langs: Vec::new(),
            endpoints: Endpoints::default(),
            credentials: Credentials::default(),
            gate: GateConfig::default(),
            llm: LlmParams::default(),
            augment: AugmentSettings::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Config = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Config::parse(&text).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    /// `path` when given, defaults otherwise.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or_else(|| Ok(Config::default()), Config::load)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.gate.validate()?;
        self.llm.validate().map_err(|e| e.to_string())?;
        if self.parallelism == 0 {
            return Err("parallelism must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.augment.alpha) {
            return Err(format!("alpha {} outside [0, 1]", self.augment.alpha));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        self.endpoints
            .timeout_secs
            .map_or(crate::http::DEFAULT_TIMEOUT, Duration::from_secs)
    }

    pub fn require<'a>(&self, endpoint: &'a Option<String>, name: &'static str) -> Result<&'a str, ConfigError> {
        endpoint.as_deref().ok_or(ConfigError::MissingEndpoint(name))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
