//! Offline, deterministic providers.
//!
//! Mock audio carries its words in the WAV comment chunk: synthesis writes
//! the text there over silent PCM, transcription reads it back and spreads
//! the words over fixed-length segments.

use async_trait::async_trait;
use serde_json::json;

use taskguide_core::engine::templates::{CLARIFY, NO_MATCH};
use taskguide_core::engine::{ground_answer, Intent, PromptBundle};
use taskguide_core::{parse_transcript_json, TimedSegment};

use super::audio::{silent_wav, AudioBlob, AudioFormat};
use super::{ChatProvider, ProviderError, SpeechToText, TextToSpeech};

pub const SEGMENT_MS: u64 = 3000;
pub const MS_PER_WORD: u64 = 60;
pub const TTS_SAMPLE_RATE_HZ: u32 = 16_000;

#[derive(Debug, Clone, Copy, Default)]
pub struct MockSpeechToText;

/// Splits `text` over `duration_ms` in [`SEGMENT_MS`] slices. Slice `i` of
/// `k` gets words `[i·n/k, (i+1)·n/k)`; slices left without words are
/// dropped.
pub fn split_words(text: &str, duration_ms: u64) -> Vec<TimedSegment> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let k = duration_ms.div_ceil(SEGMENT_MS).max(1) as usize;
    let n = words.len();
    (0..k)
        .filter_map(|i| {
            let chunk = &words[i * n / k..(i + 1) * n / k];
            if chunk.is_empty() {
                return None;
            }
            let start = i as u64 * SEGMENT_MS;
            let end = (start + SEGMENT_MS).min(duration_ms);
            Some(TimedSegment::new(format!("u{i}"), start, end, chunk.join(" ")))
        })
        .collect()
}

#[async_trait]
impl SpeechToText for MockSpeechToText {
    async fn transcribe(&self, audio: &AudioBlob) -> Result<Vec<TimedSegment>, ProviderError> {
        if audio.format != AudioFormat::WavPcm16 {
            return Err(ProviderError::AudioRejected(format!(
                "{} is not supported",
                audio.format.content_type()
            )));
        }
        let text = audio
            .comment()
            .ok_or_else(|| ProviderError::AudioRejected("no sidecar text in the WAV comment chunk".into()))?;
        Ok(split_words(&text, audio.duration_ms))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockTextToSpeech;

#[async_trait]
impl TextToSpeech for MockTextToSpeech {
    async fn synthesize(&self, text: &str, _voice: &str) -> Result<AudioBlob, ProviderError> {
        let words = text.split_whitespace().count() as u64;
        if words == 0 {
            return Err(ProviderError::InvalidInput("text to synthesize is empty".into()));
        }
        let duration_ms = words * MS_PER_WORD;
        Ok(AudioBlob {
            format: AudioFormat::WavPcm16,
            sample_rate_hz: TTS_SAMPLE_RATE_HZ,
            bytes: silent_wav(duration_ms, TTS_SAMPLE_RATE_HZ, text),
            duration_ms,
        })
    }
}

/// Canned replies keyed by the prompt's classified intent. Questions and
/// trouble reports carry the window of the grounded answer.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockChat;

pub fn mock_reply(prompt: &PromptBundle) -> Result<String, ProviderError> {
    let transcript = parse_transcript_json(prompt.context_transcript.as_bytes())
        .map_err(|e| ProviderError::InvalidInput(format!("context is not a transcript: {e}")))?;
    let grounded = |q: &str, lead: &str| match ground_answer(&transcript, q) {
        Some(g) => json!({
            "reply": format!("{lead} {}", g.segments.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ")),
            "start_ms": g.window.start_ms,
            "end_ms": g.window.end_ms,
            "step_done": false,
        }),
        None => json!({"reply": NO_MATCH, "step_done": false}),
    };
    let value = match &prompt.intent {
        Intent::ConfirmDone => json!({"reply": "Well done. Here is the next part.", "step_done": true}),
        Intent::StartTask => json!({"reply": "Let's begin with the first step.", "step_done": false}),
        Intent::Repeat => json!({"reply": "Here is that step again.", "step_done": false}),
        Intent::GotoStep(n) => json!({"reply": format!("Moving to step {}.", n + 1), "step_done": false}),
        Intent::Query(q) => grounded(q, "From the walkthrough:"),
        Intent::Trouble(q) => grounded(q, "The expert suggests:"),
        Intent::Unknown => json!({"reply": CLARIFY, "step_done": false}),
    };
    Ok(value.to_string())
}

#[async_trait]
impl ChatProvider for MockChat {
    async fn complete(&self, prompt: &PromptBundle) -> Result<String, ProviderError> {
        mock_reply(prompt)
    }
}
