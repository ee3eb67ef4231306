//! Timestamped narration: segments, transcripts and playback windows.
//!
//! A [`Transcript`] can only be obtained through validation, so every value of
//! the type satisfies the ordering and non-overlap invariants. Invalid input is
//! rejected with the first offending segment; nothing is repaired.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Version tag written into every transcript and guide document.
pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimedSegment {
    pub id: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub text: String,
}

impl TimedSegment {
    pub fn new(id: impl Into<String>, start_ms: u64, end_ms: u64, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            start_ms,
            end_ms,
            text: text.into(),
        }
    }

    pub fn window(&self) -> PlaybackWindow {
        PlaybackWindow {
            start_ms: self.start_ms,
            end_ms: self.end_ms,
        }
    }
}

/// A `[start_ms, end_ms)` range of the expert video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlaybackWindow {
    pub start_ms: u64,
    pub end_ms: u64,
}

impl PlaybackWindow {
    /// Returns `None` unless `end_ms > start_ms`.
    pub fn new(start_ms: u64, end_ms: u64) -> Option<Self> {
        (end_ms > start_ms).then_some(Self { start_ms, end_ms })
    }

    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }

    pub fn contains(&self, other: &PlaybackWindow) -> bool {
        self.start_ms <= other.start_ms && other.end_ms <= self.end_ms
    }

    /// Smallest window covering both.
    pub fn hull(&self, other: &PlaybackWindow) -> PlaybackWindow {
        PlaybackWindow {
            start_ms: self.start_ms.min(other.start_ms),
            end_ms: self.end_ms.max(other.end_ms),
        }
    }

    /// Intersects with `[0, duration_ms]`; `None` when nothing non-empty remains.
    pub fn clamp_to(&self, duration_ms: u64) -> Option<PlaybackWindow> {
        PlaybackWindow::new(self.start_ms.min(duration_ms), self.end_ms.min(duration_ms))
    }
}

/// Why a document was rejected after it parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Violation {
    EmptyTranscript,
    EmptyId,
    EmptyText,
    NonPositiveDuration,
    DuplicateId,
    OutOfOrder,
    Overlap,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::EmptyTranscript => "transcript has no segments",
            Violation::EmptyId => "segment id is empty",
            Violation::EmptyText => "segment text is empty",
            Violation::NonPositiveDuration => "segment end_ms is not after start_ms",
            Violation::DuplicateId => "segment id is not unique",
            Violation::OutOfOrder => "segment start_ms is not strictly increasing",
            Violation::Overlap => "segment overlaps the previous segment",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranscriptError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("invariant violation at {}: {reason}", segment.as_deref().unwrap_or("<transcript>"))]
    Invariant {
        segment: Option<String>,
        reason: Violation,
    },
}

impl TranscriptError {
    fn at(segment: &str, reason: Violation) -> Self {
        TranscriptError::Invariant {
            segment: Some(segment.to_owned()),
            reason,
        }
    }

    /// The violation and its segment id, if this is an invariant error.
    pub fn violation(&self) -> Option<(Option<&str>, Violation)> {
        match self {
            TranscriptError::Invariant { segment, reason } => Some((segment.as_deref(), *reason)),
            TranscriptError::Malformed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    task_id: String,
    language_tag: String,
    segments: Vec<TimedSegment>,
    source: Map<String, Value>,
}

impl Transcript {
    pub fn new(
        task_id: impl Into<String>,
        language_tag: impl Into<String>,
        segments: Vec<TimedSegment>,
        source: Map<String, Value>,
    ) -> Result<Self, TranscriptError> {
        validate_segments(&segments)?;
        Ok(Self {
            task_id: task_id.into(),
            language_tag: language_tag.into(),
            segments,
            source,
        })
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn language_tag(&self) -> &str {
        &self.language_tag
    }

    pub fn segments(&self) -> &[TimedSegment] {
        &self.segments
    }

    pub fn source(&self) -> &Map<String, Value> {
        &self.source
    }

    /// End of the last segment.
    pub fn duration_ms(&self) -> u64 {
        self.segments.last().map_or(0, |s| s.end_ms)
    }

    /// Human-readable task name: `source.title` when present, else the task id.
    pub fn title(&self) -> &str {
        self.source
            .get("title")
            .and_then(Value::as_str)
            .filter(|t| !t.trim().is_empty())
            .unwrap_or(&self.task_id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.segments.iter().position(|s| s.id == id)
    }

    pub fn segment(&self, id: &str) -> Option<&TimedSegment> {
        self.segments.iter().find(|s| s.id == id)
    }

    pub fn full_window(&self) -> PlaybackWindow {
        PlaybackWindow {
            start_ms: self.segments[0].start_ms,
            end_ms: self.duration_ms(),
        }
    }

    /// Canonical JSON document.
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(&TranscriptDocRef {
            version: FORMAT_VERSION,
            task_id: &self.task_id,
            language_tag: &self.language_tag,
            segments: &self.segments,
            source: &self.source,
        })
        .expect("transcript serialization is infallible")
    }
}

/// Checks every segment-list invariant, reporting the first violation.
pub fn validate_segments(segments: &[TimedSegment]) -> Result<(), TranscriptError> {
    if segments.is_empty() {
        return Err(TranscriptError::Invariant {
            segment: None,
            reason: Violation::EmptyTranscript,
        });
    }
    let mut seen = BTreeSet::new();
    let mut prev: Option<&TimedSegment> = None;
    for seg in segments {
        if seg.id.is_empty() {
            return Err(TranscriptError::at(&seg.id, Violation::EmptyId));
        }
        if seg.text.trim().is_empty() {
            return Err(TranscriptError::at(&seg.id, Violation::EmptyText));
        }
        if seg.end_ms <= seg.start_ms {
            return Err(TranscriptError::at(&seg.id, Violation::NonPositiveDuration));
        }
        if !seen.insert(seg.id.as_str()) {
            return Err(TranscriptError::at(&seg.id, Violation::DuplicateId));
        }
        if let Some(p) = prev {
            if seg.start_ms <= p.start_ms {
                return Err(TranscriptError::at(&seg.id, Violation::OutOfOrder));
            }
            if seg.start_ms < p.end_ms {
                return Err(TranscriptError::at(&seg.id, Violation::Overlap));
            }
        }
        prev = Some(seg);
    }
    Ok(())
}

#[derive(Serialize)]
struct TranscriptDocRef<'a> {
    version: &'a str,
    task_id: &'a str,
    language_tag: &'a str,
    segments: &'a [TimedSegment],
    source: &'a Map<String, Value>,
}

#[derive(Deserialize)]
struct TranscriptDoc {
    version: String,
    task_id: String,
    language_tag: String,
    segments: Vec<TimedSegment>,
    #[serde(default)]
    source: Map<String, Value>,
}

/// Parses and validates a transcript JSON document.
pub fn parse_transcript_json(bytes: &[u8]) -> Result<Transcript, TranscriptError> {
    let text = core::str::from_utf8(bytes)
        .map_err(|e| TranscriptError::Malformed(e.to_string()))?;
    let doc: TranscriptDoc =
        serde_json::from_str(text).map_err(|e| TranscriptError::Malformed(e.to_string()))?;
    if doc.version != FORMAT_VERSION {
        return Err(TranscriptError::Malformed(alloc::format!(
            "unsupported version {:?}",
            doc.version
        )));
    }
    Transcript::new(doc.task_id, doc.language_tag, doc.segments, doc.source)
}

/// Hull window over the listed segments. Gaps between non-contiguous segments
/// are part of the hull.
pub fn window_for_segments<S: AsRef<str>>(
    transcript: &Transcript,
    ids: &[S],
) -> Result<PlaybackWindow, WindowError> {
    let mut hull: Option<PlaybackWindow> = None;
    for id in ids {
        let id = id.as_ref();
        let seg = transcript
            .segment(id)
            .ok_or_else(|| WindowError::UnknownSegment(id.to_owned()))?;
        let w = seg.window();
        hull = Some(hull.map_or(w, |h| h.hull(&w)));
    }
    hull.ok_or(WindowError::Empty)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WindowError {
    #[error("unknown segment {0}")]
    UnknownSegment(String),
    #[error("no segment ids given")]
    Empty,
}
