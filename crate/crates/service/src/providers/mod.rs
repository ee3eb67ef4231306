//! Speech-to-text, text-to-speech and chat-completion backends.
//!
//! Every backend sits behind a trait so sessions can run against the
//! deterministic mocks in [`mock`] or the fault injectors in [`fault`].
//! [`call_with_policy`] adds timeouts and retries with exponential backoff.

pub mod audio;
pub mod fault;
pub mod mock;

use std::future::Future;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use taskguide_core::engine::PromptBundle;
use taskguide_core::TimedSegment;

pub use audio::{AudioBlob, AudioFormat};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("audio rejected: {0}")]
    AudioRejected(String),
    #[error("provider call timed out")]
    Timeout,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl ProviderError {
    /// Whether a retry could succeed.
    pub fn is_transient(&self) -> bool {
        matches!(self, Self::Unavailable(_) | Self::Timeout)
    }
}

#[async_trait]
pub trait SpeechToText: Send + Sync {
    async fn transcribe(&self, audio: &AudioBlob) -> Result<Vec<TimedSegment>, ProviderError>;
}

#[async_trait]
pub trait TextToSpeech: Send + Sync {
    async fn synthesize(&self, text: &str, voice: &str) -> Result<AudioBlob, ProviderError>;
}

#[async_trait]
pub trait ChatProvider: Send + Sync {
    /// Raw provider text for a prompt; parsing is the caller's job.
    async fn complete(&self, prompt: &PromptBundle) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderPolicy {
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_initial_ms: u64,
    pub backoff_multiplier: f64,
}

impl Default for ProviderPolicy {
    fn default() -> Self {
        Self {
            timeout_ms: 20_000,
            max_retries: 2,
            backoff_initial_ms: 200,
            backoff_multiplier: 2.0,
        }
    }
}

impl ProviderPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.timeout_ms == 0 {
            return Err("timeout_ms must be positive".into());
        }
        if !(self.backoff_multiplier.is_finite() && self.backoff_multiplier >= 1.0) {
            return Err("backoff_multiplier must be a finite number >= 1".into());
        }
        Ok(())
    }

    /// Delay before retry `n` (0-based): `initial · multiplier^n`, rounded
    /// to the nearest millisecond.
    pub fn backoff_ms(&self, n: u32) -> u64 {
        let d = self.backoff_initial_ms as f64 * self.backoff_multiplier.powi(n as i32);
        if d >= u64::MAX as f64 {
            u64::MAX
        } else {
            d.round() as u64
        }
    }
}

/// What happened across the attempts of one call.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallReport {
    pub attempts: u32,
    pub delays_ms: Vec<u64>,
    pub errors: Vec<ProviderError>,
}

/// Runs `call` under `policy`: each attempt is bounded by the timeout, and
/// transient failures are retried after the backoff delay until
/// `max_retries` retries have been spent.
pub async fn call_with_policy<T, F, Fut>(
    policy: &ProviderPolicy,
    mut call: F,
) -> (Result<T, ProviderError>, CallReport)
where
    F: FnMut() -> Fut,
    Fut: Future<Output = Result<T, ProviderError>>,
{
    let mut report = CallReport::default();
    let timeout = Duration::from_millis(policy.timeout_ms);
    loop {
        report.attempts += 1;
        let err = match tokio::time::timeout(timeout, call()).await {
            Ok(Ok(v)) => return (Ok(v), report),
            Ok(Err(e)) => e,
            Err(_) => ProviderError::Timeout,
        };
        report.errors.push(err.clone());
        let retries_used = report.attempts - 1;
        if !err.is_transient() || retries_used >= policy.max_retries {
            let err = match err {
                ProviderError::Unavailable(_) | ProviderError::Timeout if policy.max_retries > 0 => {
                    ProviderError::Unavailable(format!("gave up after {} attempts: {err}", report.attempts))
                }
                other => other,
            };
            return (Err(err), report);
        }
        let delay = policy.backoff_ms(retries_used);
        report.delays_ms.push(delay);
        tokio::time::sleep(Duration::from_millis(delay)).await;
    }
}
