//! Grounding answers in transcript segments.

use alloc::vec::Vec;

use crate::search::{find_segments, SegmentMatch};
use crate::transcript::{PlaybackWindow, TimedSegment, Transcript};

/// Number of ranked segments considered for an answer.
pub const GROUND_TOP_K: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Grounding {
    /// Chosen segments in transcript order.
    pub segments: Vec<TimedSegment>,
    pub window: PlaybackWindow,
}

/// Picks the contiguous run to answer from. The top-k matches are grouped
/// into runs of adjacent transcript positions; the run with the highest mean
/// score wins, then the longer run, then the earlier one.
pub fn select_run(matches: &[SegmentMatch]) -> Vec<SegmentMatch> {
    let mut by_pos: Vec<SegmentMatch> = matches.to_vec();
    by_pos.sort_by_key(|m| m.position);
    let mut runs: Vec<Vec<SegmentMatch>> = Vec::new();
    for m in by_pos {
        match runs.last_mut() {
            Some(run) if run.last().is_some_and(|l| l.position + 1 == m.position) => run.push(m),
            _ => runs.push(alloc::vec![m]),
        }
    }
    let mean = |run: &[SegmentMatch]| run.iter().map(|m| m.score).sum::<f64>() / run.len() as f64;
    let mut best: Option<(f64, Vec<SegmentMatch>)> = None;
    for run in runs {
        let score = mean(&run);
        let better = match &best {
            None => true,
            Some((b, brun)) => score > *b || (score == *b && run.len() > brun.len()),
        };
        if better {
            best = Some((score, run));
        }
    }
    best.map(|(_, r)| r).unwrap_or_default()
}

/// `None` when no segment shares a token with the query.
pub fn ground_answer(transcript: &Transcript, query: &str) -> Option<Grounding> {
    ground_answer_k(transcript, query, GROUND_TOP_K)
}

pub fn ground_answer_k(transcript: &Transcript, query: &str, k: usize) -> Option<Grounding> {
    let matches = find_segments(transcript, query, k);
    let run = select_run(&matches);
    let first = run.first()?;
    let last = run.last()?;
    let segs = &transcript.segments()[first.position..=last.position];
    let window = PlaybackWindow {
        start_ms: segs[0].start_ms,
        end_ms: segs[segs.len() - 1].end_ms,
    };
    Some(Grounding {
        segments: segs.to_vec(),
        window,
    })
}
