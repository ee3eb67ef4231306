//! Append-only session event logs and deterministic replay.
//!
//! A log holds everything needed to rebuild a session: the configuration it
//! was created with, each user turn with the provider reply that was used
//! (if any), and every twin request. Replaying a log feeds the recorded
//! replies back through the engine and compares the regenerated assistant
//! turns with the recorded ones.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{
    AssistantTurn, EngineConfig, EngineError, PrefetchedReply, ProviderReply, ScriptedResponder,
    Session, UserTurn,
};
use crate::guide::StepGuide;
use crate::transcript::Transcript;
use crate::twin::{Action, Rejection, TwinConfig, TwinError, TwinState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        seq: u64,
        session_id: String,
        transcript_id: String,
        guide_id: String,
        #[serde(default)]
        twin: Option<TwinConfig>,
        #[serde(default)]
        config: EngineConfig,
        greeting: AssistantTurn,
    },
    Turn {
        seq: u64,
        user: UserTurn,
        #[serde(default)]
        provider_reply: Option<ProviderReply>,
        assistant: AssistantTurn,
    },
    Twin {
        seq: u64,
        advance_ms: u64,
        #[serde(default)]
        action: Option<Action>,
        #[serde(default)]
        rejection: Option<Rejection>,
        clock_ms: u64,
    },
    /// Something worth surfacing that does not change state, such as a
    /// provider failure that fell back to the templates.
    Notice { seq: u64, message: String },
}

impl SessionEvent {
    pub fn seq(&self) -> u64 {
        match self {
            SessionEvent::Created { seq, .. }
            | SessionEvent::Turn { seq, .. }
            | SessionEvent::Twin { seq, .. }
            | SessionEvent::Notice { seq, .. } => *seq,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("log does not start with a created event")]
    MissingCreated,
    #[error("event {seq}: expected sequence number {expected}")]
    Sequence { seq: u64, expected: u64 },
    #[error("event {seq}: twin request on a session without a twin")]
    NoTwin { seq: u64 },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Twin(#[from] TwinError),
}

/// Parses a JSONL log. Blank lines are skipped; a truncated final line (from
/// an interrupted write) is dropped.
pub fn parse_log(text: &str) -> Result<Vec<SessionEvent>, LogError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let mut events = Vec::with_capacity(lines.len());
    let last = lines.len().saturating_sub(1);
    for (i, (n, line)) in lines.iter().enumerate() {
        match serde_json::from_str(line) {
            Ok(e) => events.push(e),
            Err(_) if i == last && !text.ends_with('\n') => break,
            Err(e) => {
                return Err(LogError::Parse {
                    line: n + 1,
                    message: format!("{e}"),
                })
            }
        }
    }
    Ok(events)
}

pub fn write_log(events: &[SessionEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayMode {
    /// Feed the recorded provider replies back in.
    Recorded,
    /// Ignore provider replies and use the templates throughout.
    Scripted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub seq: u64,
    pub recorded: AssistantTurn,
    pub replayed: AssistantTurn,
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub session: Session,
    pub twin: Option<TwinState>,
    /// Sequence number the next event should carry.
    pub next_seq: u64,
    /// Turns whose regenerated reply differs from the recorded one
    /// (media references are not compared).
    pub divergences: Vec<Divergence>,
}

/// The ids a log refers to, read from its created event.
pub fn log_header(events: &[SessionEvent]) -> Option<(&str, &str, &str)> {
    match events.first()? {
        SessionEvent::Created {
            session_id,
            transcript_id,
            guide_id,
            ..
        } => Some((session_id, transcript_id, guide_id)),
        _ => None,
    }
}

fn same_turn(a: &AssistantTurn, b: &AssistantTurn) -> bool {
    a.kind == b.kind && a.text == b.text && a.window == b.window && a.step_index == b.step_index
}

/// Rebuilds a session (and its twin) from a log.
pub fn replay_log(
    events: &[SessionEvent],
    transcript: Arc<Transcript>,
    guide: Arc<StepGuide>,
    mode: ReplayMode,
) -> Result<Replay, LogError> {
    replay_log_with(events, transcript, guide, mode, |_, _, _| {})
}

/// Like [`replay_log`], calling `observe` after each event with the session
/// and twin as they stand once that event has been applied.
pub fn replay_log_with(
    events: &[SessionEvent],
    transcript: Arc<Transcript>,
    guide: Arc<StepGuide>,
    mode: ReplayMode,
    mut observe: impl FnMut(&SessionEvent, &Session, Option<&TwinState>),
) -> Result<Replay, LogError> {
    let Some(SessionEvent::Created {
        seq,
        session_id,
        twin,
        config,
        greeting,
        ..
    }) = events.first()
    else {
        return Err(LogError::MissingCreated);
    };
    if *seq != 0 {
        return Err(LogError::Sequence { seq: *seq, expected: 0 });
    }
    let (mut session, regreeting) = Session::create(session_id.clone(), transcript, guide, config.clone())?;
    let mut divergences = Vec::new();
    if !same_turn(greeting, &regreeting) {
        divergences.push(Divergence {
            seq: 0,
            recorded: greeting.clone(),
            replayed: regreeting,
        });
    }
    session.set_last_audio_ref(greeting.audio_ref.clone());
    let mut twin = match twin {
        Some(c) => Some(TwinState::new(c.clone())?),
        None => None,
    };
    if let Some(id) = twin.as_ref().map(|_| session_id.clone()) {
        session = session.with_twin_binding(id);
    }
    observe(&events[0], &session, twin.as_ref());

    for (expected, event) in (1u64..).zip(&events[1..]) {
        if event.seq() != expected {
            return Err(LogError::Sequence {
                seq: event.seq(),
                expected,
            });
        }
        match event {
            SessionEvent::Created { seq, .. } => {
                return Err(LogError::Sequence {
                    seq: *seq,
                    expected,
                })
            }
            SessionEvent::Turn {
                seq,
                user,
                provider_reply,
                assistant,
            } => {
                let outcome = match mode {
                    ReplayMode::Recorded => {
                        let mut r = PrefetchedReply(provider_reply.clone());
                        session.handle_turn(user.clone(), &mut r, twin.as_ref())?
                    }
                    ReplayMode::Scripted => {
                        session.handle_turn(user.clone(), &mut ScriptedResponder, twin.as_ref())?
                    }
                };
                session.set_last_audio_ref(assistant.audio_ref.clone());
                if !same_turn(assistant, &outcome.assistant) {
                    divergences.push(Divergence {
                        seq: *seq,
                        recorded: assistant.clone(),
                        replayed: outcome.assistant,
                    });
                }
            }
            SessionEvent::Twin {
                seq,
                advance_ms,
                action,
                ..
            } => {
                let state = twin.as_mut().ok_or(LogError::NoTwin { seq: *seq })?;
                *state = state.tick(*advance_ms);
                if let Some(a) = action {
                    if let Ok(next) = state.apply(a) {
                        *state = next;
                    }
                }
            }
            SessionEvent::Notice { .. } => {}
        }
        observe(event, &session, twin.as_ref());
    }
    Ok(Replay {
        session,
        twin,
        next_seq: events.len() as u64,
        divergences,
    })
}
