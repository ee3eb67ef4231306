//! The structured reply contract between the engine and a chat provider.

use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::TurnKind;
use crate::transcript::PlaybackWindow;

/// `{"reply": str, "start_ms": int?, "end_ms": int?, "step_done": bool?, "kind": str?}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderReply {
    #[serde(rename = "reply")]
    pub reply_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_ms: Option<u64>,
    #[serde(default)]
    pub step_done: bool,
    #[serde(default, rename = "kind", skip_serializing_if = "Option::is_none")]
    pub kind_hint: Option<TurnKind>,
}

impl ProviderReply {
    pub fn text(reply: impl Into<String>) -> Self {
        Self {
            reply_text: reply.into(),
            start_ms: None,
            end_ms: None,
            step_done: false,
            kind_hint: None,
        }
    }

    pub fn window(&self) -> Option<PlaybackWindow> {
        PlaybackWindow::new(self.start_ms?, self.end_ms?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reply serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplyError {
    #[error("no reply object found in provider output")]
    Unparseable,
}

/// End offset of the balanced `{...}` opening at `open`, skipping braces
/// inside JSON strings.
fn balanced_object_at(raw: &str, open: usize) -> Option<usize> {
    let bytes = raw.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

fn timestamp(v: Option<&Value>) -> Option<u64> {
    v.and_then(Value::as_u64)
}

fn from_object(v: &Value) -> Option<ProviderReply> {
    let obj = v.as_object()?;
    let reply_text = obj.get("reply")?.as_str()?.to_string();
    let mut start_ms = timestamp(obj.get("start_ms"));
    let mut end_ms = timestamp(obj.get("end_ms"));
    match (start_ms, end_ms) {
        (Some(s), Some(e)) if s < e => {}
        _ => {
            start_ms = None;
            end_ms = None;
        }
    }
    let step_done = obj.get("step_done").and_then(Value::as_bool).unwrap_or(false);
    let kind_hint = obj
        .get("kind")
        .and_then(|k| serde_json::from_value::<TurnKind>(k.clone()).ok());
    Some(ProviderReply {
        reply_text,
        start_ms,
        end_ms,
        step_done,
        kind_hint,
    })
}

/// Extracts the first balanced JSON object carrying a string `reply` field.
/// Surrounding prose is ignored. Timestamps that are missing, not
/// non-negative integers, or not strictly ordered are dropped as a pair.
pub fn parse_provider_reply(raw: &str) -> Result<ProviderReply, ReplyError> {
    for (open, _) in raw.match_indices('{') {
        let Some(close) = balanced_object_at(raw, open) else {
            continue;
        };
        let Ok(value) = serde_json::from_str::<Value>(&raw[open..close]) else {
            continue;
        };
        if let Some(reply) = from_object(&value) {
            return Ok(reply);
        }
    }
    Err(ReplyError::Unparseable)
}
