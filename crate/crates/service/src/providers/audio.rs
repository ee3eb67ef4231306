//! Audio blobs and the small slice of RIFF/WAVE the mock providers need:
//! a PCM16 `fmt ` chunk, a `data` chunk, and a `LIST`/`INFO` chunk whose
//! `ICMT` (comment) entry carries the spoken text.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioFormat {
    WavPcm16,
    WebmOpus,
}

impl AudioFormat {
    pub fn from_content_type(ct: &str) -> Option<Self> {
        let base = ct.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
        match base.as_str() {
            "audio/wav" | "audio/wave" | "audio/x-wav" | "audio/vnd.wave" => Some(Self::WavPcm16),
            "audio/webm" | "audio/ogg" => Some(Self::WebmOpus),
            _ => None,
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            Self::WavPcm16 => "audio/wav",
            Self::WebmOpus => "audio/webm",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Self::WavPcm16 => "wav",
            Self::WebmOpus => "webm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioBlob {
    pub format: AudioFormat,
    pub sample_rate_hz: u32,
    pub bytes: Vec<u8>,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AudioError {
    #[error("audio body is empty")]
    Empty,
    #[error("not a PCM16 WAV file: {0}")]
    BadWav(&'static str),
    #[error("audio has zero duration")]
    ZeroDuration,
}

impl AudioBlob {
    /// Reads format, sample rate and duration from a WAV header.
    pub fn from_wav(bytes: Vec<u8>) -> Result<Self, AudioError> {
        let info = read_wav(&bytes)?;
        if info.duration_ms == 0 {
            return Err(AudioError::ZeroDuration);
        }
        Ok(Self {
            format: AudioFormat::WavPcm16,
            sample_rate_hz: info.sample_rate_hz,
            bytes,
            duration_ms: info.duration_ms,
        })
    }

    /// A blob in a container this crate does not decode; `duration_ms` is
    /// taken on trust from the client.
    pub fn opaque(format: AudioFormat, bytes: Vec<u8>, duration_ms: u64) -> Result<Self, AudioError> {
        if bytes.is_empty() {
            return Err(AudioError::Empty);
        }
        if duration_ms == 0 {
            return Err(AudioError::ZeroDuration);
        }
        Ok(Self {
            format,
            sample_rate_hz: 48_000,
            bytes,
            duration_ms,
        })
    }

    /// The `ICMT` text embedded in a WAV blob.
    pub fn comment(&self) -> Option<String> {
        match self.format {
            AudioFormat::WavPcm16 => read_wav(&self.bytes).ok()?.comment,
            AudioFormat::WebmOpus => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WavInfo {
    pub sample_rate_hz: u32,
    pub channels: u16,
    pub duration_ms: u64,
    pub comment: Option<String>,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Walks the RIFF chunks of a PCM16 WAV file.
pub fn read_wav(bytes: &[u8]) -> Result<WavInfo, AudioError> {
    if bytes.is_empty() {
        return Err(AudioError::Empty);
    }
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::BadWav("missing RIFF/WAVE header"));
    }
    let mut fmt: Option<(u16, u32, u16)> = None;
    let mut data_len: Option<u64> = None;
    let mut comment = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let len = u32_at(bytes, at + 4) as usize;
        let body_start = at + 8;
        let body_end = body_start
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or(AudioError::BadWav("chunk runs past end of file"))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(AudioError::BadWav("short fmt chunk"));
                }
                let (tag, channels, rate, bits) = (u16_at(body, 0), u16_at(body, 2), u32_at(body, 4), u16_at(body, 14));
                if tag != 1 || bits != 16 {
                    return Err(AudioError::BadWav("only 16-bit PCM is supported"));
                }
                if channels == 0 || rate == 0 {
                    return Err(AudioError::BadWav("zero channels or sample rate"));
                }
                fmt = Some((channels, rate, bits));
            }
            b"data" => data_len = Some(len as u64),
            b"LIST" if body.len() >= 4 && &body[0..4] == b"INFO" => {
                comment = info_comment(&body[4..]).or(comment);
            }
            _ => {}
        }
        at = body_end + (len & 1);
    }
    let (channels, rate, _) = fmt.ok_or(AudioError::BadWav("no fmt chunk"))?;
    let data_len = data_len.ok_or(AudioError::BadWav("no data chunk"))?;
    let frames = data_len / (2 * channels as u64);
    Ok(WavInfo {
        sample_rate_hz: rate,
        channels,
        duration_ms: frames * 1000 / rate as u64,
        comment,
    })
}

fn info_comment(mut entries: &[u8]) -> Option<String> {
    while entries.len() >= 8 {
        let id = &entries[0..4];
        let len = u32_at(entries, 4) as usize;
        let body = entries.get(8..8 + len)?;
        if id == b"ICMT" {
            let text = body.split(|&b| b == 0).next().unwrap_or(&[]);
            return String::from_utf8(text.to_vec()).ok();
        }
        let step = 8 + len + (len & 1);
        entries = entries.get(step..)?;
    }
    None
}

fn push_chunk(out: &mut Vec<u8>, id: &[u8; 4], body: &[u8]) {
    out.extend_from_slice(id);
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(body);
    if body.len() % 2 == 1 {
        out.push(0);
    }
}

/// Mono PCM16 silence of `duration_ms`, with `comment` stored as `ICMT`.
pub fn silent_wav(duration_ms: u64, sample_rate_hz: u32, comment: &str) -> Vec<u8> {
    let frames = duration_ms * sample_rate_hz as u64 / 1000;
    let mut fmt = Vec::with_capacity(16);
    fmt.extend_from_slice(&1u16.to_le_bytes());
    fmt.extend_from_slice(&1u16.to_le_bytes());
    fmt.extend_from_slice(&sample_rate_hz.to_le_bytes());
    fmt.extend_from_slice(&(sample_rate_hz * 2).to_le_bytes());
    fmt.extend_from_slice(&2u16.to_le_bytes());
    fmt.extend_from_slice(&16u16.to_le_bytes());

    let mut icmt = comment.as_bytes().to_vec();
    icmt.push(0);
    let mut info = b"INFO".to_vec();
    push_chunk(&mut info, b"ICMT", &icmt);

    let mut body = b"WAVE".to_vec();
    push_chunk(&mut body, b"fmt ", &fmt);
    push_chunk(&mut body, b"LIST", &info);
    push_chunk(&mut body, b"data", &vec![0u8; frames as usize * 2]);

    let mut out = b"RIFF".to_vec();
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(&body);
    out
}
