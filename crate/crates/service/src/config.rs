//! Service configuration: one TOML file plus environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use taskguide_core::engine::EngineConfig;
use taskguide_core::TwinConfig;

use crate::providers::ProviderPolicy;

pub const DEFAULT_MAX_BODY_BYTES: usize = 10 * 1024 * 1024;

pub const ENV_DATA_DIR: &str = "TASKGUIDE_DATA_DIR";
pub const ENV_BIND: &str = "TASKGUIDE_BIND";
pub const ENV_TOKEN: &str = "TASKGUIDE_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatBackend {
    /// Template replies only.
    Scripted,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeechBackend {
    Disabled,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersConfig {
    pub chat: ChatBackend,
    pub stt: SpeechBackend,
    pub tts: SpeechBackend,
    pub voice: String,
    pub chat_policy: ProviderPolicy,
    pub stt_policy: ProviderPolicy,
    pub tts_policy: ProviderPolicy,
}

impl Default for ProvidersConfig {
    fn default() -> Self {
        Self {
            chat: ChatBackend::Scripted,
            stt: SpeechBackend::Mock,
            tts: SpeechBackend::Mock,
            voice: "default".into(),
            chat_policy: ProviderPolicy::default(),
            stt_policy: ProviderPolicy::default(),
            tts_policy: ProviderPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub bind: String,
    pub max_body_bytes: usize,
    /// When set, every request must carry it in `x-taskguide-token` (or
    /// `?token=` for media and streams).
    pub token: Option<String>,
    pub engine: EngineConfig,
    pub twin: TwinConfig,
    pub providers: ProvidersConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            bind: "127.0.0.1:8080".into(),
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            token: None,
            engine: EngineConfig::default(),
            twin: TwinConfig::default(),
            providers: ProvidersConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ServiceConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut config: ServiceConfig = toml::from_str(text).map_err(|source| ConfigError::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        if config.data_dir.is_relative() {
            if let Some(parent) = path.parent() {
                config.data_dir = parent.join(&config.data_dir);
            }
        }
        Ok(config)
    }

    /// Loads `path`, applies environment overrides and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml(&text, path)?;
        config.apply_env(|k| std::env::var(k).ok());
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) {
        if let Some(v) = var(ENV_DATA_DIR) {
            self.data_dir = v.into();
        }
        if let Some(v) = var(ENV_BIND) {
            self.bind = v;
        }
        if let Some(v) = var(ENV_TOKEN) {
            self.token = Some(v).filter(|t| !t.is_empty());
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.twin
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("twin: {e}")))?;
        let p = &self.providers;
        for (name, policy) in [("chat", &p.chat_policy), ("stt", &p.stt_policy), ("tts", &p.tts_policy)] {
            policy
                .validate()
                .map_err(|e| ConfigError::Invalid(format!("providers.{name}_policy: {e}")))?;
        }
        if self.max_body_bytes == 0 {
            return Err(ConfigError::Invalid("max_body_bytes must be positive".into()));
        }
        Ok(())
    }
}
