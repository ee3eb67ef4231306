//! SRT and WebVTT ingestion.
//!
//! Cue timings become millisecond segments. SRT counters and VTT cue
//! identifiers are kept as segment ids; cues without one get `c<ordinal>`
//! (1-based position in the file). Inline markup such as `<v Speaker>` or
//! `<i>` is stripped and multi-line cue text is joined with single spaces.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Map;

use crate::transcript::{TimedSegment, Transcript, TranscriptError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubtitleFormat {
    Srt,
    Vtt,
}

impl core::str::FromStr for SubtitleFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "srt" => Ok(SubtitleFormat::Srt),
            "vtt" | "webvtt" => Ok(SubtitleFormat::Vtt),
            other => Err(format!("unknown subtitle format {other:?}")),
        }
    }
}

pub const DEFAULT_SUBTITLE_TASK_ID: &str = "subtitle";
pub const DEFAULT_LANGUAGE_TAG: &str = "und";

/// Parses a subtitle file with placeholder task id and language tag.
pub fn parse_subtitle(bytes: &[u8], format: SubtitleFormat) -> Result<Transcript, TranscriptError> {
    parse_subtitle_with(bytes, format, DEFAULT_SUBTITLE_TASK_ID, DEFAULT_LANGUAGE_TAG)
}

pub fn parse_subtitle_with(
    bytes: &[u8],
    format: SubtitleFormat,
    task_id: &str,
    language_tag: &str,
) -> Result<Transcript, TranscriptError> {
    let text = core::str::from_utf8(bytes).map_err(|e| malformed(e.to_string()))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let segments = match format {
        SubtitleFormat::Srt => parse_cues(text, TimecodeStyle::Srt, false)?,
        SubtitleFormat::Vtt => {
            let first = text.lines().next().unwrap_or("");
            let header_ok = first == "WEBVTT"
                || first.starts_with("WEBVTT ")
                || first.starts_with("WEBVTT\t");
            if !header_ok {
                return Err(malformed("missing WEBVTT header".into()));
            }
            parse_cues(text, TimecodeStyle::Vtt, true)?
        }
    };
    Transcript::new(task_id, language_tag, segments, Map::new())
}

#[derive(Clone, Copy)]
enum TimecodeStyle {
    Srt,
    Vtt,
}

fn malformed(msg: String) -> TranscriptError {
    TranscriptError::Malformed(msg)
}

fn parse_cues(
    text: &str,
    style: TimecodeStyle,
    skip_header: bool,
) -> Result<Vec<TimedSegment>, TranscriptError> {
    let normalized = text.replace("\r\n", "\n").replace('\r', "\n");
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in normalized.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(core::mem::take(&mut current));
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        blocks.push(current);
    }

    let mut segments = Vec::new();
    for (i, block) in blocks.iter().enumerate() {
        if skip_header && i == 0 {
            continue;
        }
        if matches!(style, TimecodeStyle::Vtt) {
            let head = block[0];
            if head.starts_with("NOTE") || head == "STYLE" || head == "REGION" {
                continue;
            }
        }
        let timing_at = block
            .iter()
            .position(|l| l.contains("-->"))
            .ok_or_else(|| malformed(format!("cue without timing line: {:?}", block[0])))?;
        if timing_at > 1 {
            return Err(malformed(format!("unexpected lines before timing: {:?}", block[0])));
        }
        let ordinal = segments.len() + 1;
        let id = match timing_at {
            1 => block[0].trim().to_string(),
            _ => format!("c{ordinal}"),
        };
        let (start_ms, end_ms) = parse_timing_line(block[timing_at], style)?;
        if end_ms < start_ms {
            return Err(malformed(format!("cue {id} ends before it starts")));
        }
        let body = block[timing_at + 1..]
            .iter()
            .map(|l| strip_markup(l))
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect::<Vec<_>>()
            .join(" ");
        segments.push(TimedSegment {
            id,
            start_ms,
            end_ms,
            text: body,
        });
    }
    Ok(segments)
}

fn parse_timing_line(line: &str, style: TimecodeStyle) -> Result<(u64, u64), TranscriptError> {
    let (left, right) = line
        .split_once("-->")
        .ok_or_else(|| malformed(format!("bad timing line {line:?}")))?;
    // VTT may append cue settings after the end timecode.
    let right = right.split_whitespace().next().unwrap_or("");
    let start = parse_timecode(left.trim(), style)?;
    let end = parse_timecode(right, style)?;
    Ok((start, end))
}

/// `HH:MM:SS,mmm` for SRT; `MM:SS.mmm` or `HH:MM:SS.mmm` for VTT.
fn parse_timecode(code: &str, style: TimecodeStyle) -> Result<u64, TranscriptError> {
    let bad = || malformed(format!("bad timecode {code:?}"));
    let sep = match style {
        TimecodeStyle::Srt => ',',
        TimecodeStyle::Vtt => '.',
    };
    let (clock, millis) = code.rsplit_once(sep).ok_or_else(bad)?;
    if millis.len() != 3 || !millis.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let parts: Vec<&str> = clock.split(':').collect();
    let (h, m, s) = match (style, parts.as_slice()) {
        (TimecodeStyle::Srt, [h, m, s]) => (*h, *m, *s),
        (TimecodeStyle::Vtt, [h, m, s]) => (*h, *m, *s),
        (TimecodeStyle::Vtt, [m, s]) => ("0", *m, *s),
        _ => return Err(bad()),
    };
    let digits = |s: &str, exact: Option<usize>| -> Result<u64, TranscriptError> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if exact.is_some_and(|n| s.len() != n) {
            return Err(bad());
        }
        s.parse::<u64>().map_err(|_| bad())
    };
    let hours = digits(h, None)?;
    let minutes = digits(m, Some(2))?;
    let seconds = digits(s, Some(2))?;
    if minutes >= 60 || seconds >= 60 {
        return Err(bad());
    }
    let ms = digits(millis, Some(3))?;
    hours
        .checked_mul(3_600_000)
        .and_then(|v| v.checked_add(minutes * 60_000 + seconds * 1000 + ms))
        .ok_or_else(bad)
}

fn strip_markup(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut in_tag = false;
    for c in line.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    out
}
