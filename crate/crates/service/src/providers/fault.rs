//! Chat providers that misbehave on purpose, for exercising fallbacks.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;

use taskguide_core::engine::PromptBundle;

use super::mock::MockChat;
use super::{ChatProvider, ProviderError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    /// Fail with `Unavailable`.
    Down,
    /// Never answer (until the policy timeout fires).
    Hang,
    /// Answer with text that holds no reply object.
    Garbage(String),
    /// Answer correctly after a delay.
    Delay(u64),
}

/// Consumes one planned fault per call, then behaves like [`MockChat`]
/// (or keeps repeating `steady` if set).
#[derive(Debug, Default)]
pub struct FaultyChat {
    plan: Mutex<VecDeque<Fault>>,
    steady: Option<Fault>,
    calls: AtomicU32,
}

impl FaultyChat {
    pub fn planned(plan: impl IntoIterator<Item = Fault>) -> Self {
        Self {
            plan: Mutex::new(plan.into_iter().collect()),
            ..Self::default()
        }
    }

    pub fn always(fault: Fault) -> Self {
        Self {
            steady: Some(fault),
            ..Self::default()
        }
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl ChatProvider for FaultyChat {
    async fn complete(&self, prompt: &PromptBundle) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let fault = self
            .plan
            .lock()
            .expect("fault plan lock")
            .pop_front()
            .or_else(|| self.steady.clone());
        match fault {
            None => MockChat.complete(prompt).await,
            Some(Fault::Down) => Err(ProviderError::Unavailable("injected outage".into())),
            Some(Fault::Hang) => {
                std::future::pending::<()>().await;
                unreachable!()
            }
            Some(Fault::Garbage(text)) => Ok(text),
            Some(Fault::Delay(ms)) => {
                tokio::time::sleep(Duration::from_millis(ms)).await;
                MockChat.complete(prompt).await
            }
        }
    }
}
