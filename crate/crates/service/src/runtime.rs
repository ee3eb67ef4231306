//! Live sessions, the turn pipeline and crash recovery, independent of HTTP.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use taskguide_core::engine::log::{parse_log, replay_log_with, LogError, ReplayMode, SessionEvent};
use taskguide_core::engine::{
    build_prompt, parse_provider_reply, AssistantTurn, EngineError, Intent, Modality, PrefetchedReply, ProviderReply,
    ReplySource, Session, SessionSnapshot, UserTurn,
};
use taskguide_core::subtitle::parse_subtitle_with;
use taskguide_core::transcript::TranscriptError;
use taskguide_core::twin::ActionTemplate;
use taskguide_core::{
    parse_transcript_json, segment_into_steps, Action, Phase, Rejection, SegmentationRules, StepGuide, SubtitleFormat,
    Transcript, TwinState,
};

use crate::config::{ChatBackend, ServiceConfig, SpeechBackend};
use crate::providers::mock::{MockChat, MockSpeechToText, MockTextToSpeech};
use crate::providers::{
    call_with_policy, AudioBlob, ChatProvider, ProviderError, ProviderPolicy, SpeechToText, TextToSpeech,
};
use crate::store::{new_id, now_ms, LogAppender, Store, StoreError, StoredArtifact};

const STREAM_CAPACITY: usize = 256;

#[derive(Clone)]
pub struct Providers {
    pub chat: Option<Arc<dyn ChatProvider>>,
    pub chat_policy: ProviderPolicy,
    pub stt: Option<Arc<dyn SpeechToText>>,
    pub stt_policy: ProviderPolicy,
    pub tts: Option<Arc<dyn TextToSpeech>>,
    pub tts_policy: ProviderPolicy,
    pub voice: String,
}

impl Providers {
    pub fn from_config(config: &ServiceConfig) -> Self {
        let p = &config.providers;
        Self {
            chat: match p.chat {
                ChatBackend::Scripted => None,
                ChatBackend::Mock => Some(Arc::new(MockChat)),
            },
            chat_policy: p.chat_policy,
            stt: match p.stt {
                SpeechBackend::Disabled => None,
                SpeechBackend::Mock => Some(Arc::new(MockSpeechToText)),
            },
            stt_policy: p.stt_policy,
            tts: match p.tts {
                SpeechBackend::Disabled => None,
                SpeechBackend::Mock => Some(Arc::new(MockTextToSpeech)),
            },
            tts_policy: p.tts_policy,
            voice: p.voice.clone(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("a turn for this session is still being processed")]
    Busy,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Conflict(String),
    #[error("speech provider: {0}")]
    Speech(ProviderError),
    #[error(transparent)]
    Store(StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound { .. } => ServiceError::NotFound(e.to_string()),
            other => ServiceError::Store(other),
        }
    }
}

/// Twin state as published to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinView {
    pub state: TwinState,
    pub phase: Phase,
    pub legal_actions: Vec<ActionTemplate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<Rejection>,
}

impl TwinView {
    fn new(state: &TwinState, action: Option<Action>, rejection: Option<Rejection>) -> Self {
        Self {
            state: state.clone(),
            phase: state.phase(),
            legal_actions: state.legal_actions(),
            action,
            rejection,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamBody {
    AssistantTurn {
        turn: AssistantTurn,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        user: Option<UserTurn>,
    },
    TwinState(TwinView),
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub body: StreamBody,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnResponse {
    pub seq: u64,
    pub turn: AssistantTurn,
    pub intent: Intent,
    pub source: ReplySource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcription: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    pub session: SessionSnapshot,
    pub transcript_id: String,
    pub guide_id: String,
    pub next_seq: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub twin: Option<TwinView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CreatedSession {
    pub session_id: String,
    pub seq: u64,
    pub greeting: AssistantTurn,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub twin: Option<TwinView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwinResponse {
    pub seq: u64,
    #[serde(flatten)]
    pub view: TwinView,
}

struct Live {
    session: Session,
    twin: Option<TwinState>,
    log: LogAppender,
    next_seq: u64,
}

pub struct SessionSlot {
    transcript_id: String,
    guide_id: String,
    live: tokio::sync::Mutex<Live>,
    backlog: Mutex<Vec<StreamEvent>>,
    tx: broadcast::Sender<StreamEvent>,
}

impl SessionSlot {
    /// Stream events after `after` (all if `None`) plus a receiver for
    /// later ones. Taken under the backlog lock, so nothing falls between
    /// the two.
    pub fn subscribe(&self, after: Option<u64>) -> (Vec<StreamEvent>, broadcast::Receiver<StreamEvent>) {
        let backlog = self.backlog.lock().expect("backlog lock");
        let rx = self.tx.subscribe();
        let events = backlog
            .iter()
            .filter(|e| after.is_none_or(|a| e.seq > a))
            .cloned()
            .collect();
        (events, rx)
    }

    pub fn events_after(&self, after: Option<u64>) -> Vec<StreamEvent> {
        self.subscribe(after).0
    }

    fn publish(&self, event: StreamEvent) {
        let mut backlog = self.backlog.lock().expect("backlog lock");
        backlog.push(event.clone());
        let _ = self.tx.send(event);
    }

    /// Writes `event` to the log, then publishes `body` under the same seq.
    fn commit(&self, live: &mut Live, event: SessionEvent, body: StreamBody) -> Result<u64, ServiceError> {
        debug_assert_eq!(event.seq(), live.next_seq);
        live.log.append(&event)?;
        let seq = live.next_seq;
        live.next_seq += 1;
        self.publish(StreamEvent { seq, body });
        Ok(seq)
    }
}

pub enum TranscriptUpload {
    Json,
    Subtitle {
        format: SubtitleFormat,
        task_id: String,
        language_tag: String,
    },
}

pub struct Service {
    config: ServiceConfig,
    store: Store,
    providers: Providers,
    transcripts: RwLock<HashMap<String, Arc<Transcript>>>,
    guides: RwLock<HashMap<String, (StoredArtifact, Arc<StepGuide>)>>,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
}

impl Service {
    /// Opens the data directory and restores every session from its log.
    pub fn open(config: ServiceConfig, providers: Providers) -> Result<Arc<Self>, ServiceError> {
        let store = Store::open(&config.data_dir)?;
        let service = Arc::new(Self {
            config,
            store,
            providers,
            transcripts: RwLock::default(),
            guides: RwLock::default(),
            sessions: RwLock::default(),
        });
        for id in service.store.session_ids()? {
            match service.restore(&id) {
                Ok(slot) => {
                    service.sessions.write().expect("sessions lock").insert(id, slot);
                }
                Err(e) => tracing::error!(session = %id, error = %e, "could not restore session"),
            }
        }
        Ok(service)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("sessions lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    fn restore(&self, id: &str) -> Result<Arc<SessionSlot>, ServiceError> {
        let text = self.store.read_log(id)?;
        let events = parse_log(&text).map_err(|e| ServiceError::Invalid(e.to_string()))?;
        let Some(SessionEvent::Created {
            transcript_id,
            guide_id,
            ..
        }) = events.first()
        else {
            return Err(ServiceError::Invalid(LogError::MissingCreated.to_string()));
        };
        let transcript = self.transcript(transcript_id)?;
        let guide = self.guide(guide_id)?.1;
        let mut backlog = Vec::with_capacity(events.len());
        let replay = replay_log_with(&events, transcript, guide, ReplayMode::Recorded, |event, _, twin| {
            let body = match event {
                SessionEvent::Created { greeting, .. } => StreamBody::AssistantTurn {
                    turn: greeting.clone(),
                    user: None,
                },
                SessionEvent::Turn { user, assistant, .. } => StreamBody::AssistantTurn {
                    turn: assistant.clone(),
                    user: Some(user.clone()),
                },
                SessionEvent::Twin { action, rejection, .. } => StreamBody::TwinState(TwinView::new(
                    twin.expect("replay checks the twin exists"),
                    action.clone(),
                    *rejection,
                )),
                SessionEvent::Notice { message, .. } => StreamBody::Error {
                    message: message.clone(),
                },
            };
            backlog.push(StreamEvent {
                seq: event.seq(),
                body,
            });
        })
        .map_err(|e| ServiceError::Invalid(e.to_string()))?;
        for d in &replay.divergences {
            tracing::warn!(session = %id, seq = d.seq, "replayed turn differs from the recorded one");
        }
        let log = self.store.reopen_log(id)?;
        let (tx, _) = broadcast::channel(STREAM_CAPACITY);
        Ok(Arc::new(SessionSlot {
            transcript_id: transcript_id.clone(),
            guide_id: guide_id.clone(),
            live: tokio::sync::Mutex::new(Live {
                session: replay.session,
                twin: replay.twin,
                log,
                next_seq: replay.next_seq,
            }),
            backlog: Mutex::new(backlog),
            tx,
        }))
    }

    pub fn ingest_transcript(&self, bytes: &[u8], upload: TranscriptUpload) -> Result<(StoredArtifact, Arc<Transcript>), ServiceError> {
        let t = match upload {
            TranscriptUpload::Json => parse_transcript_json(bytes)?,
            TranscriptUpload::Subtitle {
                format,
                task_id,
                language_tag,
            } => parse_subtitle_with(bytes, format, &task_id, &language_tag)?,
        };
        let meta = self.store.put_transcript(&t)?;
        let t = Arc::new(t);
        self.transcripts
            .write()
            .expect("transcripts lock")
            .insert(meta.id.clone(), t.clone());
        Ok((meta, t))
    }

    pub fn transcript(&self, id: &str) -> Result<Arc<Transcript>, ServiceError> {
        if let Some(t) = self.transcripts.read().expect("transcripts lock").get(id) {
            return Ok(t.clone());
        }
        let t = Arc::new(self.store.transcript(id)?);
        self.transcripts
            .write()
            .expect("transcripts lock")
            .insert(id.to_string(), t.clone());
        Ok(t)
    }

    pub fn compile_guide(&self, transcript_id: &str, rules: &SegmentationRules) -> Result<(StoredArtifact, Arc<StepGuide>), ServiceError> {
        let t = self.transcript(transcript_id)?;
        let g = segment_into_steps(&t, rules).map_err(|e| ServiceError::Invalid(e.to_string()))?;
        let meta = self.store.put_guide(transcript_id, &g)?;
        let g = Arc::new(g);
        self.guides
            .write()
            .expect("guides lock")
            .insert(meta.id.clone(), (meta.clone(), g.clone()));
        Ok((meta, g))
    }

    pub fn guide(&self, id: &str) -> Result<(StoredArtifact, Arc<StepGuide>), ServiceError> {
        if let Some(g) = self.guides.read().expect("guides lock").get(id) {
            return Ok(g.clone());
        }
        let (meta, g) = self.store.guide(id)?;
        let entry = (meta, Arc::new(g));
        self.guides
            .write()
            .expect("guides lock")
            .insert(id.to_string(), entry.clone());
        Ok(entry)
    }

    pub fn put_video(&self, transcript_id: &str, bytes: &[u8], content_type: &str) -> Result<StoredArtifact, ServiceError> {
        self.transcript(transcript_id)?;
        let ext = match content_type.split(';').next().unwrap_or("").trim() {
            "video/mp4" => "mp4",
            "video/webm" => "webm",
            "video/ogg" => "ogv",
            other => return Err(ServiceError::Invalid(format!("unsupported video type {other:?}"))),
        };
        Ok(self.store.put_media(bytes, ext, content_type, Some(transcript_id))?)
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ServiceError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no session with id {id:?}")))
    }

    pub fn stream(&self, id: &str) -> Result<Arc<SessionSlot>, ServiceError> {
        self.slot(id)
    }

    /// Synthesizes speech for `text` and stores it; failures become notices.
    async fn speak(&self, text: &str, notices: &mut Vec<String>) -> Option<String> {
        let tts = self.providers.tts.as_ref()?;
        let voice = self.providers.voice.as_str();
        let (result, _) = call_with_policy(&self.providers.tts_policy, || tts.synthesize(text, voice)).await;
        let blob = match result {
            Ok(b) => b,
            Err(e) => {
                notices.push(format!("speech synthesis failed: {e}"));
                return None;
            }
        };
        match self
            .store
            .put_media(&blob.bytes, blob.format.extension(), blob.format.content_type(), None)
        {
            Ok(meta) => Some(meta.id),
            Err(e) => {
                notices.push(format!("storing synthesized speech failed: {e}"));
                None
            }
        }
    }

    pub async fn create_session(&self, transcript_id: &str, guide_id: &str, with_twin: bool) -> Result<CreatedSession, ServiceError> {
        let transcript = self.transcript(transcript_id)?;
        let (meta, guide) = self.guide(guide_id)?;
        if meta.transcript_id.as_deref() != Some(transcript_id) {
            return Err(ServiceError::Invalid(format!(
                "guide {guide_id:?} was not compiled from transcript {transcript_id:?}"
            )));
        }
        let id = new_id();
        let (session, mut greeting) = Session::create(id.clone(), transcript, guide, self.config.engine.clone())?;
        let mut session = if with_twin { session.with_twin_binding(id.clone()) } else { session };
        let twin = if with_twin {
            Some(TwinState::new(self.config.twin.clone()).map_err(|e| ServiceError::Invalid(e.to_string()))?)
        } else {
            None
        };
        let mut notices = Vec::new();
        greeting.audio_ref = self.speak(&greeting.text, &mut notices).await;
        session.set_last_audio_ref(greeting.audio_ref.clone());

        let log = self.store.create_log(&id)?;
        let (tx, _) = broadcast::channel(STREAM_CAPACITY);
        let slot = Arc::new(SessionSlot {
            transcript_id: transcript_id.into(),
            guide_id: guide_id.into(),
            live: tokio::sync::Mutex::new(Live {
                session,
                twin: twin.clone(),
                log,
                next_seq: 0,
            }),
            backlog: Mutex::default(),
            tx,
        });
        let seq = {
            let mut live = slot.live.lock().await;
            let created = SessionEvent::Created {
                seq: 0,
                session_id: id.clone(),
                transcript_id: transcript_id.into(),
                guide_id: guide_id.into(),
                twin: twin.as_ref().map(|t| t.config.clone()),
                config: self.config.engine.clone(),
                greeting: greeting.clone(),
            };
            let body = StreamBody::AssistantTurn {
                turn: greeting.clone(),
                user: None,
            };
            let seq = slot.commit(&mut live, created, body)?;
            for message in notices {
                let seq = live.next_seq;
                slot.commit(
                    &mut live,
                    SessionEvent::Notice {
                        seq,
                        message: message.clone(),
                    },
                    StreamBody::Error { message },
                )?;
            }
            seq
        };
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(id.clone(), slot);
        Ok(CreatedSession {
            session_id: id,
            seq,
            greeting,
            twin: twin.as_ref().map(|t| TwinView::new(t, None, None)),
        })
    }

    pub async fn session_view(&self, id: &str) -> Result<SessionView, ServiceError> {
        let slot = self.slot(id)?;
        let live = slot.live.lock().await;
        Ok(SessionView {
            session: live.session.snapshot(),
            transcript_id: slot.transcript_id.clone(),
            guide_id: slot.guide_id.clone(),
            next_seq: live.next_seq,
            twin: live.twin.as_ref().map(|t| TwinView::new(t, None, None)),
        })
    }

    pub async fn text_turn(&self, id: &str, text: &str) -> Result<TurnResponse, ServiceError> {
        let slot = self.slot(id)?;
        let mut live = slot.live.try_lock().map_err(|_| ServiceError::Busy)?;
        let user = UserTurn {
            modality: Modality::Text,
            text: text.to_string(),
            received_at_ms: now_ms(),
        };
        self.run_turn(&slot, &mut live, user, None).await
    }

    /// Transcribes `audio`, then runs the transcription as a turn.
    pub async fn audio_turn(&self, id: &str, audio: AudioBlob) -> Result<TurnResponse, ServiceError> {
        let slot = self.slot(id)?;
        let mut live = slot.live.try_lock().map_err(|_| ServiceError::Busy)?;
        let stt = self
            .providers
            .stt
            .as_ref()
            .ok_or_else(|| ServiceError::Invalid("speech input is disabled".into()))?;
        let (result, _) = call_with_policy(&self.providers.stt_policy, || stt.transcribe(&audio)).await;
        let segments = result.map_err(ServiceError::Speech)?;
        let text = segments
            .iter()
            .map(|s| s.text.trim())
            .collect::<Vec<_>>()
            .join(" ");
        let user = UserTurn {
            modality: Modality::Speech,
            text: text.clone(),
            received_at_ms: now_ms(),
        };
        self.run_turn(&slot, &mut live, user, Some(text)).await
    }

    async fn run_turn(
        &self,
        slot: &SessionSlot,
        live: &mut Live,
        user: UserTurn,
        transcription: Option<String>,
    ) -> Result<TurnResponse, ServiceError> {
        if user.text.trim().is_empty() {
            return Err(EngineError::EmptyTurn.into());
        }
        let intent = live.session.classify(&user.text);
        if live.session.is_completed() && intent.is_mutating() {
            return Err(EngineError::SessionCompleted.into());
        }

        let mut notices = Vec::new();
        let reply = match &self.providers.chat {
            Some(chat) => {
                let prompt = build_prompt(&live.session, &user);
                let (result, report) = call_with_policy(&self.providers.chat_policy, || chat.complete(&prompt)).await;
                self.interpret_reply(result, report.attempts, &mut notices)
            }
            None => None,
        };

        let mut next = live.session.clone();
        let outcome = next.handle_turn(user.clone(), &mut PrefetchedReply(reply.clone()), live.twin.as_ref())?;
        let mut assistant = outcome.assistant;
        assistant.audio_ref = self.speak(&assistant.text, &mut notices).await;
        next.set_last_audio_ref(assistant.audio_ref.clone());

        for message in &notices {
            tracing::warn!(session = %next.id(), "{message}");
            let seq = live.next_seq;
            slot.commit(
                live,
                SessionEvent::Notice {
                    seq,
                    message: message.clone(),
                },
                StreamBody::Error {
                    message: message.clone(),
                },
            )?;
        }
        let seq = live.next_seq;
        let event = SessionEvent::Turn {
            seq,
            user: user.clone(),
            provider_reply: reply,
            assistant: assistant.clone(),
        };
        slot.commit(
            live,
            event,
            StreamBody::AssistantTurn {
                turn: assistant.clone(),
                user: Some(user),
            },
        )?;
        live.session = next;
        Ok(TurnResponse {
            seq,
            turn: assistant,
            intent: outcome.intent,
            source: outcome.source,
            transcription,
            notices,
        })
    }

    fn interpret_reply(
        &self,
        result: Result<String, ProviderError>,
        attempts: u32,
        notices: &mut Vec<String>,
    ) -> Option<ProviderReply> {
        match result {
            Ok(raw) => match parse_provider_reply(&raw) {
                Ok(r) => Some(r),
                Err(e) => {
                    notices.push(format!("chat provider reply ignored ({e}); using scripted reply"));
                    None
                }
            },
            Err(e) => {
                notices.push(format!(
                    "chat provider failed after {attempts} attempt(s) ({e}); using scripted reply"
                ));
                None
            }
        }
    }

    /// Advances the session's twin by `advance_ms`, then applies `action`.
    /// A rejected action is reported in the response and leaves the twin as
    /// it was after the advance.
    pub async fn twin_action(&self, id: &str, advance_ms: u64, action: Option<Action>) -> Result<TwinResponse, ServiceError> {
        let slot = self.slot(id)?;
        let mut live = slot.live.lock().await;
        let Some(twin) = live.twin.as_ref() else {
            return Err(ServiceError::Conflict("session has no twin".into()));
        };
        let mut next = twin.tick(advance_ms);
        let mut rejection = None;
        if let Some(a) = &action {
            match next.apply(a) {
                Ok(s) => next = s,
                Err(r) => rejection = Some(r),
            }
        }
        let view = TwinView::new(&next, action.clone(), rejection);
        let seq = live.next_seq;
        let event = SessionEvent::Twin {
            seq,
            advance_ms,
            action,
            rejection,
            clock_ms: next.clock_ms,
        };
        slot.commit(&mut live, event, StreamBody::TwinState(view.clone()))?;
        live.twin = Some(next);
        Ok(TwinResponse { seq, view })
    }
}
