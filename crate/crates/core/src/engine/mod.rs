//! Training sessions: greeting, step-by-step instruction gated on
//! confirmation, grounded answers and troubleshooting.
//!
//! A [`Session`] owns its transcript and guide and is advanced one user turn
//! at a time with [`Session::handle_turn`]. The wording comes either from a
//! chat provider (through a [`Responder`]) or from the fixed templates in
//! [`templates`]; state transitions are decided here in both cases.

pub mod ground;
pub mod intent;
pub mod log;
pub mod prompt;
pub mod reply;
pub mod templates;

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use ground::{ground_answer, Grounding, GROUND_TOP_K};
pub use intent::{classify_intent, Intent};
pub use prompt::{build_prompt, PromptBundle};
pub use reply::{parse_provider_reply, ProviderReply, ReplyError};

use crate::guide::{GuideError, Step, StepGuide};
use crate::transcript::{PlaybackWindow, Transcript};
use crate::twin::TwinState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Speech,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserTurn {
    pub modality: Modality,
    pub text: String,
    pub received_at_ms: u64,
}

impl UserTurn {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            modality: Modality::Text,
            text: text.into(),
            received_at_ms: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Greeting,
    Instruction,
    Answer,
    Troubleshoot,
    ConfirmationPrompt,
    Completion,
    Clarification,
}

impl TurnKind {
    pub fn requires_window(self) -> bool {
        matches!(self, TurnKind::Instruction | TurnKind::Answer | TurnKind::Troubleshoot)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssistantTurn {
    pub kind: TurnKind,
    pub text: String,
    pub window: Option<PlaybackWindow>,
    pub step_index: usize,
    #[serde(default)]
    pub audio_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum HistoryEntry {
    User(UserTurn),
    Assistant(AssistantTurn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    GreetingSent,
    /// A step is in progress but the last reply was not its instruction
    /// (for example a completion claim the twin did not back up).
    Instructing,
    AwaitingConfirmation,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Turns of history passed to chat providers.
    pub history_turns: usize,
    /// Refuse to advance past a step the bound twin has not completed.
    pub strict_gating: bool,
    /// Allow "go to step N" to jump past the current step.
    pub allow_forward_jumps: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            history_turns: 10,
            strict_gating: true,
            allow_forward_jumps: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("transcript task {transcript:?} does not match guide task {guide:?}")]
    TaskMismatch { transcript: String, guide: String },
    #[error(transparent)]
    Guide(#[from] GuideError),
    #[error("session is completed; only questions and repeats are accepted")]
    SessionCompleted,
    #[error("turn text is empty")]
    EmptyTurn,
}

/// Where a turn's wording came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplySource {
    Scripted,
    Provider,
}

/// Supplies provider wording for a turn. Returning `None` selects the
/// scripted templates.
pub trait Responder {
    fn reply(&mut self, session: &Session, turn: &UserTurn, intent: &Intent) -> Option<ProviderReply>;
}

/// Always defers to the templates.
#[derive(Debug, Default, Clone, Copy)]
pub struct ScriptedResponder;

impl Responder for ScriptedResponder {
    fn reply(&mut self, _: &Session, _: &UserTurn, _: &Intent) -> Option<ProviderReply> {
        None
    }
}

/// A reply fetched ahead of time, e.g. from an async provider call or a log.
#[derive(Debug, Clone)]
pub struct PrefetchedReply(pub Option<ProviderReply>);

impl Responder for PrefetchedReply {
    fn reply(&mut self, _: &Session, _: &UserTurn, _: &Intent) -> Option<ProviderReply> {
        self.0.take()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnOutcome {
    pub assistant: AssistantTurn,
    pub intent: Intent,
    pub source: ReplySource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    id: String,
    transcript: Arc<Transcript>,
    guide: Arc<StepGuide>,
    current_step: usize,
    stage: Stage,
    history: Vec<HistoryEntry>,
    twin_binding: Option<String>,
    config: EngineConfig,
}

/// Serializable view of a session's progress.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub task_id: String,
    pub current_step: usize,
    pub step_count: usize,
    pub stage: Stage,
    pub history: Vec<HistoryEntry>,
    pub twin_binding: Option<String>,
}

impl Session {
    /// Opens a session at step 0 and returns it with the greeting turn.
    pub fn create(
        id: impl Into<String>,
        transcript: Arc<Transcript>,
        guide: Arc<StepGuide>,
        config: EngineConfig,
    ) -> Result<(Session, AssistantTurn), EngineError> {
        if transcript.task_id() != guide.task_id() {
            return Err(EngineError::TaskMismatch {
                transcript: transcript.task_id().into(),
                guide: guide.task_id().into(),
            });
        }
        guide.check_against(&transcript)?;
        let greeting = AssistantTurn {
            kind: TurnKind::Greeting,
            text: templates::greeting(transcript.title(), guide.len()),
            window: None,
            step_index: 0,
            audio_ref: None,
        };
        let session = Session {
            id: id.into(),
            transcript,
            guide,
            current_step: 0,
            stage: Stage::GreetingSent,
            history: alloc::vec![HistoryEntry::Assistant(greeting.clone())],
            twin_binding: None,
            config,
        };
        Ok((session, greeting))
    }

    pub fn with_twin_binding(mut self, twin_id: impl Into<String>) -> Self {
        self.twin_binding = Some(twin_id.into());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn transcript(&self) -> &Arc<Transcript> {
        &self.transcript
    }

    pub fn guide(&self) -> &Arc<StepGuide> {
        &self.guide
    }

    pub fn current_step(&self) -> usize {
        self.current_step
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn twin_binding(&self) -> Option<&str> {
        self.twin_binding.as_deref()
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn is_completed(&self) -> bool {
        self.stage == Stage::Completed
    }

    /// Attaches a media reference (synthesized speech) to the latest
    /// assistant turn.
    pub fn set_last_audio_ref(&mut self, audio_ref: Option<String>) {
        if let Some(HistoryEntry::Assistant(turn)) = self.history.last_mut() {
            turn.audio_ref = audio_ref;
        }
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id.clone(),
            task_id: self.guide.task_id().into(),
            current_step: self.current_step,
            step_count: self.guide.len(),
            stage: self.stage,
            history: self.history.clone(),
            twin_binding: self.twin_binding.clone(),
        }
    }

    pub fn classify(&self, text: &str) -> Intent {
        classify_intent(text, self.guide.len())
    }

    fn step(&self, index: usize) -> &Step {
        &self.guide.steps()[index]
    }

    /// Processes one trainee turn. On error the session is unchanged.
    ///
    /// `twin` is the bound twin's current state, if any; with strict gating
    /// a completion claim for a step the twin has not finished is answered
    /// with a nudge instead of advancing.
    pub fn handle_turn(
        &mut self,
        turn: UserTurn,
        responder: &mut dyn Responder,
        twin: Option<&TwinState>,
    ) -> Result<TurnOutcome, EngineError> {
        if turn.text.trim().is_empty() {
            return Err(EngineError::EmptyTurn);
        }
        let intent = self.classify(&turn.text);
        if self.is_completed() && intent.is_mutating() {
            return Err(EngineError::SessionCompleted);
        }
        let reply = responder.reply(self, &turn, &intent);
        let in_step = matches!(self.stage, Stage::Instructing | Stage::AwaitingConfirmation);
        let effective = match (&intent, &reply) {
            (Intent::Unknown | Intent::Query(_), Some(r)) if r.step_done && in_step => {
                Intent::ConfirmDone
            }
            _ => intent.clone(),
        };

        let scripted = self.scripted_turn(&effective, twin);
        let (assistant, source) = match reply {
            Some(r) => (self.overlay(scripted.turn, &effective, &r), ReplySource::Provider),
            None => (scripted.turn, ReplySource::Scripted),
        };

        self.current_step = scripted.next_step;
        self.stage = scripted.next_stage;
        self.history.push(HistoryEntry::User(turn));
        self.history.push(HistoryEntry::Assistant(assistant.clone()));
        Ok(TurnOutcome {
            assistant,
            intent,
            source,
        })
    }

    fn turn(&self, kind: TurnKind, text: String, window: Option<PlaybackWindow>, step: usize) -> AssistantTurn {
        AssistantTurn {
            kind,
            text,
            window,
            step_index: step,
            audio_ref: None,
        }
    }

    fn present(&self, index: usize) -> Planned {
        let step = self.step(index);
        Planned {
            turn: self.turn(
                TurnKind::Instruction,
                templates::instruction(step, self.guide.len()),
                Some(step.window),
                index,
            ),
            next_step: index,
            next_stage: Stage::AwaitingConfirmation,
        }
    }

    fn completion(&self) -> Planned {
        let n = self.guide.len();
        Planned {
            turn: self.turn(TurnKind::Completion, templates::completion(n), None, n),
            next_step: n,
            next_stage: Stage::Completed,
        }
    }

    fn unchanged(&self, turn: AssistantTurn) -> Planned {
        Planned {
            turn,
            next_step: self.current_step,
            next_stage: self.stage,
        }
    }

    fn grounded(&self, kind: TurnKind, query: &str) -> Planned {
        let turn = match ground_answer(&self.transcript, query) {
            Some(g) => {
                let text = match kind {
                    TurnKind::Troubleshoot => templates::troubleshoot(&g.segments),
                    _ => templates::answer(&g.segments),
                };
                self.turn(kind, text, Some(g.window), self.current_step)
            }
            None => self.turn(
                TurnKind::Clarification,
                templates::NO_MATCH.into(),
                None,
                self.current_step,
            ),
        };
        self.unchanged(turn)
    }

    /// The template response and state transition for `intent`.
    fn scripted_turn(&self, intent: &Intent, twin: Option<&TwinState>) -> Planned {
        let n = self.guide.len();
        match (intent, self.stage) {
            (Intent::Query(q), _) => self.grounded(TurnKind::Answer, q),
            (Intent::Trouble(q), _) => self.grounded(TurnKind::Troubleshoot, q),
            (Intent::Unknown, _) => self.unchanged(self.turn(
                TurnKind::Clarification,
                templates::CLARIFY.into(),
                None,
                self.current_step,
            )),
            (Intent::Repeat, Stage::Completed) => self.completion(),
            (Intent::Repeat, _) => self.present(self.current_step),
            (Intent::StartTask | Intent::ConfirmDone, Stage::GreetingSent) => self.present(0),
            (Intent::StartTask, _) => {
                let step = self.step(self.current_step);
                self.unchanged(self.turn(
                    TurnKind::ConfirmationPrompt,
                    templates::confirmation_prompt(step, n),
                    Some(step.window),
                    self.current_step,
                ))
            }
            (Intent::ConfirmDone, _) => {
                let gated = self.config.strict_gating
                    && twin.is_some_and(|t| t.is_step_complete(self.current_step) == Ok(false));
                if gated {
                    let step = self.step(self.current_step);
                    Planned {
                        turn: self.turn(
                            TurnKind::Troubleshoot,
                            templates::not_finished(step),
                            Some(step.window),
                            self.current_step,
                        ),
                        next_step: self.current_step,
                        next_stage: Stage::Instructing,
                    }
                } else if self.current_step + 1 >= n {
                    self.completion()
                } else {
                    self.present(self.current_step + 1)
                }
            }
            (Intent::GotoStep(target), _) => {
                let ahead = *target > self.current_step && self.stage != Stage::GreetingSent;
                if ahead && !self.config.allow_forward_jumps {
                    self.unchanged(self.turn(
                        TurnKind::Clarification,
                        templates::no_jump(self.current_step),
                        None,
                        self.current_step,
                    ))
                } else {
                    self.present(*target)
                }
            }
        }
    }

    /// Replaces template wording with provider wording, keeping the kind and
    /// transition decided by the engine. Provider windows are clamped to the
    /// transcript; kinds that need a window fall back to the scripted one,
    /// then to the current step's.
    fn overlay(&self, scripted: AssistantTurn, intent: &Intent, reply: &ProviderReply) -> AssistantTurn {
        let duration = self.transcript.duration_ms();
        let provided = reply.window().and_then(|w| w.clamp_to(duration));
        let mut kind = scripted.kind;
        if kind == TurnKind::Clarification && provided.is_some() {
            kind = match (intent, reply.kind_hint) {
                (Intent::Query(_), _) => TurnKind::Answer,
                (Intent::Trouble(_), _) => TurnKind::Troubleshoot,
                (Intent::Unknown, Some(h @ (TurnKind::Answer | TurnKind::Troubleshoot))) => h,
                _ => kind,
            };
        }
        let step_window = self
            .guide
            .step(scripted.step_index.min(self.guide.len() - 1))
            .map(|s| s.window);
        let window = if kind.requires_window() || kind == TurnKind::ConfirmationPrompt {
            provided.or(scripted.window).or(step_window)
        } else {
            None
        };
        let text = if reply.reply_text.trim().is_empty() {
            scripted.text
        } else {
            reply.reply_text.clone()
        };
        AssistantTurn {
            kind,
            text,
            window,
            step_index: scripted.step_index,
            audio_ref: None,
        }
    }
}

struct Planned {
    turn: AssistantTurn,
    next_step: usize,
    next_stage: Stage,
}

/// `(Session, greeting)` for a transcript and its guide.
pub fn create_session(
    id: impl Into<String>,
    transcript: Arc<Transcript>,
    guide: Arc<StepGuide>,
) -> Result<(Session, AssistantTurn), EngineError> {
    Session::create(id, transcript, guide, EngineConfig::default())
}

/// The template response to `intent` in the session's current state, without
/// changing the session.
pub fn scripted_responder(session: &Session, intent: &Intent) -> AssistantTurn {
    session.scripted_turn(intent, None).turn
}

pub fn handle_turn(
    session: &mut Session,
    turn: UserTurn,
    responder: &mut dyn Responder,
) -> Result<AssistantTurn, EngineError> {
    session.handle_turn(turn, responder, None).map(|o| o.assistant)
}
