//! File-backed artifact store.
//!
//! ```text
//! <data_dir>/transcripts/<id>.json   canonical transcript JSON
//! <data_dir>/guides/<id>.json        canonical guide JSON
//! <data_dir>/media/<id>.<ext>        audio replies, expert videos
//! <data_dir>/sessions/<id>.jsonl     append-only session event log
//! ```
//!
//! Every artifact except session logs has a `<id>.meta.json` next to it.
//! Artifacts are written once (to a temporary name, then renamed) and never
//! modified.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use taskguide_core::engine::log::SessionEvent;
use taskguide_core::{parse_guide_json, parse_transcript_json, StepGuide, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Transcript,
    Guide,
    SessionLog,
    Media,
}

impl ArtifactKind {
    fn dir(self) -> &'static str {
        match self {
            Self::Transcript => "transcripts",
            Self::Guide => "guides",
            Self::SessionLog => "sessions",
            Self::Media => "media",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredArtifact {
    pub id: String,
    pub kind: ArtifactKind,
    pub created_at_ms: u64,
    /// Relative to the data directory.
    pub payload_path: String,
    /// For guides and expert videos: the transcript they belong to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_type: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no {kind:?} with id {id:?}")]
    NotFound { kind: ArtifactKind, id: String },
    #[error("{kind:?} {id:?} already exists")]
    Exists { kind: ArtifactKind, id: String },
    #[error("stored {kind:?} {id:?} is corrupt: {reason}")]
    Corrupt {
        kind: ArtifactKind,
        id: String,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

pub fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

/// Ids become file names, so only a conservative alphabet is accepted.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        for kind in [
            ArtifactKind::Transcript,
            ArtifactKind::Guide,
            ArtifactKind::SessionLog,
            ArtifactKind::Media,
        ] {
            fs::create_dir_all(root.join(kind.dir()))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn not_found(kind: ArtifactKind, id: &str) -> StoreError {
        StoreError::NotFound {
            kind,
            id: id.to_string(),
        }
    }

    fn meta_path(&self, kind: ArtifactKind, id: &str) -> PathBuf {
        self.root.join(kind.dir()).join(format!("{id}.meta.json"))
    }

    fn write_new(path: &Path, bytes: &[u8]) -> io::Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(tmp, path)
    }

    fn put(
        &self,
        kind: ArtifactKind,
        id: String,
        ext: &str,
        payload: &[u8],
        transcript_id: Option<String>,
        content_type: Option<String>,
    ) -> Result<StoredArtifact, StoreError> {
        let rel = format!("{}/{id}.{ext}", kind.dir());
        let path = self.root.join(&rel);
        if path.exists() {
            return Err(StoreError::Exists { kind, id });
        }
        Self::write_new(&path, payload)?;
        let meta = StoredArtifact {
            id,
            kind,
            created_at_ms: now_ms(),
            payload_path: rel,
            transcript_id,
            content_type,
        };
        let json = serde_json::to_vec_pretty(&meta).expect("metadata serializes");
        Self::write_new(&self.meta_path(kind, &meta.id), &json)?;
        Ok(meta)
    }

    pub fn meta(&self, kind: ArtifactKind, id: &str) -> Result<StoredArtifact, StoreError> {
        if !valid_id(id) {
            return Err(Self::not_found(kind, id));
        }
        let bytes = match fs::read(self.meta_path(kind, id)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(Self::not_found(kind, id)),
            Err(e) => return Err(e.into()),
        };
        serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
            kind,
            id: id.into(),
            reason: e.to_string(),
        })
    }

    fn payload(&self, kind: ArtifactKind, id: &str) -> Result<(StoredArtifact, Vec<u8>), StoreError> {
        let meta = self.meta(kind, id)?;
        let bytes = fs::read(self.root.join(&meta.payload_path))?;
        Ok((meta, bytes))
    }

    pub fn put_transcript(&self, t: &Transcript) -> Result<StoredArtifact, StoreError> {
        self.put(
            ArtifactKind::Transcript,
            new_id(),
            "json",
            &t.to_json(),
            None,
            Some("application/json".into()),
        )
    }

    pub fn transcript(&self, id: &str) -> Result<Transcript, StoreError> {
        let (_, bytes) = self.payload(ArtifactKind::Transcript, id)?;
        parse_transcript_json(&bytes).map_err(|e| StoreError::Corrupt {
            kind: ArtifactKind::Transcript,
            id: id.into(),
            reason: e.to_string(),
        })
    }

    pub fn put_guide(&self, transcript_id: &str, g: &StepGuide) -> Result<StoredArtifact, StoreError> {
        self.put(
            ArtifactKind::Guide,
            new_id(),
            "json",
            &g.to_json(),
            Some(transcript_id.into()),
            Some("application/json".into()),
        )
    }

    pub fn guide(&self, id: &str) -> Result<(StoredArtifact, StepGuide), StoreError> {
        let (meta, bytes) = self.payload(ArtifactKind::Guide, id)?;
        let g = parse_guide_json(&bytes).map_err(|e| StoreError::Corrupt {
            kind: ArtifactKind::Guide,
            id: id.into(),
            reason: e.to_string(),
        })?;
        Ok((meta, g))
    }

    pub fn put_media(
        &self,
        bytes: &[u8],
        ext: &str,
        content_type: &str,
        transcript_id: Option<&str>,
    ) -> Result<StoredArtifact, StoreError> {
        self.put(
            ArtifactKind::Media,
            new_id(),
            ext,
            bytes,
            transcript_id.map(str::to_string),
            Some(content_type.into()),
        )
    }

    pub fn media_path(&self, id: &str) -> Result<(StoredArtifact, PathBuf), StoreError> {
        let meta = self.meta(ArtifactKind::Media, id)?;
        let path = self.root.join(&meta.payload_path);
        Ok((meta, path))
    }

    /// The most recent expert video stored for a transcript.
    pub fn video_for(&self, transcript_id: &str) -> Result<Option<StoredArtifact>, StoreError> {
        let mut best: Option<StoredArtifact> = None;
        for entry in fs::read_dir(self.root.join(ArtifactKind::Media.dir()))? {
            let name = entry?.file_name();
            let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".meta.json")) else {
                continue;
            };
            let meta = self.meta(ArtifactKind::Media, id)?;
            if meta.transcript_id.as_deref() == Some(transcript_id)
                && best.as_ref().is_none_or(|b| (b.created_at_ms, &b.id) < (meta.created_at_ms, &meta.id))
            {
                best = Some(meta);
            }
        }
        Ok(best)
    }

    pub fn session_log_path(&self, id: &str) -> PathBuf {
        self.root.join(ArtifactKind::SessionLog.dir()).join(format!("{id}.jsonl"))
    }

    /// Creates a new, empty session log.
    pub fn create_log(&self, id: &str) -> Result<LogAppender, StoreError> {
        let path = self.session_log_path(id);
        let file = OpenOptions::new()
            .append(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| match e.kind() {
                io::ErrorKind::AlreadyExists => StoreError::Exists {
                    kind: ArtifactKind::SessionLog,
                    id: id.into(),
                },
                _ => e.into(),
            })?;
        Ok(LogAppender { file })
    }

    /// Reopens an existing log for appending. A torn final line is cut off
    /// first so new events start on a line of their own.
    pub fn reopen_log(&self, id: &str) -> Result<LogAppender, StoreError> {
        let path = self.session_log_path(id);
        let text = fs::read(&path)?;
        if let Some(end) = text.iter().rposition(|&b| b == b'\n') {
            if end + 1 != text.len() {
                OpenOptions::new().write(true).open(&path)?.set_len(end as u64 + 1)?;
            }
        } else if !text.is_empty() {
            OpenOptions::new().write(true).open(&path)?.set_len(0)?;
        }
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok(LogAppender { file })
    }

    pub fn read_log(&self, id: &str) -> Result<String, StoreError> {
        match fs::read_to_string(self.session_log_path(id)) {
            Ok(t) => Ok(t),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(Self::not_found(ArtifactKind::SessionLog, id)),
            Err(e) => Err(e.into()),
        }
    }

    /// Ids of all session logs, sorted.
    pub fn session_ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join(ArtifactKind::SessionLog.dir()))? {
            let name = entry?.file_name();
            if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".jsonl")) {
                ids.push(id.to_string());
            }
        }
        ids.sort();
        Ok(ids)
    }
}

#[derive(Debug)]
pub struct LogAppender {
    file: File,
}

impl LogAppender {
    /// Appends one event as a line and flushes it to disk.
    pub fn append(&mut self, event: &SessionEvent) -> io::Result<()> {
        let mut line = event.to_line();
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()
    }
}
