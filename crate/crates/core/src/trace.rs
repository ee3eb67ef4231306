//! Action traces: JSON lines of `{"at_ms": .., "action": .., "params": {..}}`.
//!
//! Replaying a trace ticks the twin forward to each entry's `at_ms` and then
//! applies the action. Rejected actions are recorded and do not stop replay.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::twin::{Action, Phase, Rejection, TwinConfig, TwinError, TwinState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub at_ms: u64,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: at_ms {at_ms} is before the twin clock {clock_ms}")]
    TimeWentBackwards { line: usize, at_ms: u64, clock_ms: u64 },
    #[error(transparent)]
    Twin(#[from] TwinError),
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceEntry>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| TraceError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub at_ms: u64,
    pub action: Action,
    pub rejection: Option<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub steps: Vec<TraceStep>,
    pub final_state: TwinState,
    pub phase: Phase,
}

pub fn replay_trace(config: TwinConfig, entries: &[TraceEntry]) -> Result<TraceReport, TraceError> {
    let mut state = TwinState::new(config)?;
    let mut steps = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        if entry.at_ms < state.clock_ms {
            return Err(TraceError::TimeWentBackwards {
                line: i + 1,
                at_ms: entry.at_ms,
                clock_ms: state.clock_ms,
            });
        }
        if entry.at_ms > state.clock_ms {
            state = state.tick(entry.at_ms - state.clock_ms);
        }
        let rejection = match state.apply(&entry.action) {
            Ok(next) => {
                state = next;
                None
            }
            Err(r) => Some(r),
        };
        steps.push(TraceStep {
            at_ms: entry.at_ms,
            action: entry.action.clone(),
            rejection,
        });
    }
    let phase = state.phase();
    Ok(TraceReport {
        steps,
        final_state: state,
        phase,
    })
}

/// Renders entries back to JSON lines.
pub fn write_trace(entries: &[TraceEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("trace entries serialize"));
        out.push('\n');
    }
    out
}
