//! Task guidance over a narrated expert walkthrough.
//!
//! This crate holds everything that is pure computation: transcript parsing
//! and validation, step compilation, lexical grounding, the juice-mixer twin,
//! and the session engine with its scripted responder. It is `no_std` and only
//! needs an allocator; file and network IO live in the `taskguide` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod engine;
pub mod fixture;
pub mod guide;
pub mod search;
pub mod subtitle;
pub mod trace;
pub mod transcript;
pub mod twin;

pub use guide::{parse_guide_json, segment_into_steps, serialize_guide, SegmentationRules, Step, StepGuide};
pub use search::{find_segments, SegmentMatch};
pub use subtitle::{parse_subtitle, SubtitleFormat};
pub use transcript::{
    parse_transcript_json, window_for_segments, PlaybackWindow, TimedSegment, Transcript, TranscriptError,
};
pub use twin::{Action, Phase, Rejection, TwinConfig, TwinState};
