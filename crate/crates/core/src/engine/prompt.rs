//! Prompt assembly for chat providers.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{HistoryEntry, Intent, Session, UserTurn};

pub const SYSTEM_INSTRUCTION: &str = "\
You are a training assistant for a hands-on machine operation task. Your only \
source of knowledge is the expert walkthrough transcript supplied as context: \
a JSON document whose segments carry start_ms and end_ms timestamps into the \
expert's video.

You have three jobs.
1. Guide the trainee through the task one step at a time, in the order of the \
walkthrough. Do not move on to the next step until the trainee confirms that \
the current step is complete.
2. Answer questions by pointing to the transcript segments that cover them, \
and give the start_ms and end_ms of the part of the video that shows it.
3. Help with problems using the troubleshooting advice that appears in the \
transcript.

Never use knowledge from outside the transcript. If the transcript does not \
cover something, say: That isn't covered in the expert walkthrough.

Reply with a single JSON object and nothing else.";

pub const REPLY_SCHEMA: &str = r#"{"reply": "<text shown and spoken to the trainee>", "start_ms": <integer, optional>, "end_ms": <integer, optional>, "step_done": <true when the trainee confirmed the current step, else false>}"#;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_instruction: String,
    /// The transcript's canonical JSON document.
    pub context_transcript: String,
    pub history_excerpt: Vec<HistoryEntry>,
    pub user_text: String,
    pub reply_schema: String,
    /// Rule-based reading of `user_text`, for providers that want it.
    pub intent: Intent,
    pub current_step: usize,
}

pub fn build_prompt(session: &Session, turn: &UserTurn) -> PromptBundle {
    let history = session.history();
    let keep = session.config().history_turns.min(history.len());
    let context = String::from_utf8(session.transcript().to_json()).expect("JSON is UTF-8");
    PromptBundle {
        system_instruction: SYSTEM_INSTRUCTION.into(),
        context_transcript: context,
        history_excerpt: history[history.len() - keep..].to_vec(),
        user_text: turn.text.clone(),
        reply_schema: REPLY_SCHEMA.into(),
        intent: session.classify(&turn.text),
        current_step: session.current_step(),
    }
}
