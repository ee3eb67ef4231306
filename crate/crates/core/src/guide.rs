//! Compiling a transcript into an ordered, confirmable step guide.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::search::tokenize;
use crate::transcript::{window_for_segments, PlaybackWindow, Transcript, FORMAT_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub id: String,
    pub index: usize,
    pub title: String,
    pub instruction: String,
    pub segment_ids: Vec<String>,
    pub window: PlaybackWindow,
    pub completion_hint: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepGuide {
    task_id: String,
    steps: Vec<Step>,
}

/// A phrase that opens a new step, and the title that step receives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerPhrase {
    pub phrase: String,
    pub title: String,
}

impl MarkerPhrase {
    pub fn new(phrase: &str, title: &str) -> Self {
        Self {
            phrase: phrase.to_owned(),
            title: title.to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationRules {
    pub markers: Vec<MarkerPhrase>,
    /// Also open a step at every segment whose text begins with "step".
    pub step_prefix: bool,
    /// Segment ids that always open a step.
    pub boundaries: Vec<String>,
}

impl Default for SegmentationRules {
    fn default() -> Self {
        Self {
            markers: alloc::vec![
                MarkerPhrase::new("preparation", "Preparation"),
                MarkerPhrase::new("assembly", "Assembly"),
                MarkerPhrase::new("mixing", "Mixing"),
                MarkerPhrase::new("final", "Final Steps"),
            ],
            step_prefix: true,
            boundaries: Vec::new(),
        }
    }
}

impl SegmentationRules {
    /// Only the given explicit boundaries, no phrase matching.
    pub fn explicit<S: Into<String>>(boundaries: impl IntoIterator<Item = S>) -> Self {
        Self {
            markers: Vec::new(),
            step_prefix: false,
            boundaries: boundaries.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GuideError {
    #[error("boundary refers to unknown segment {0}")]
    UnknownBoundary(String),
    #[error("malformed guide document: {0}")]
    Malformed(String),
    #[error("guide invariant violated: {0}")]
    Invariant(String),
    #[error("guide is for task {guide:?} but transcript is {transcript:?}")]
    TaskMismatch { guide: String, transcript: String },
}

/// Token index where `phrase` first occurs as a contiguous token run.
fn phrase_position(text_tokens: &[String], phrase: &str) -> Option<usize> {
    let needle = tokenize(phrase);
    if needle.is_empty() || needle.len() > text_tokens.len() {
        return None;
    }
    text_tokens
        .windows(needle.len())
        .position(|w| w == needle.as_slice())
}

/// Title of the step opened by this segment, if any.
fn marker_title(text: &str, rules: &SegmentationRules) -> Option<Option<String>> {
    let tokens = tokenize(text);
    let best = rules
        .markers
        .iter()
        .filter_map(|m| phrase_position(&tokens, &m.phrase).map(|p| (p, m)))
        .min_by_key(|(p, _)| *p);
    if let Some((_, m)) = best {
        return Some(Some(m.title.clone()));
    }
    if rules.step_prefix && tokens.first().is_some_and(|t| t == "step") {
        return Some(None);
    }
    None
}

/// Splits the transcript into steps. A step opens at segment 0, at every
/// segment matching a marker phrase (case-insensitive, token-aligned) and at
/// every explicit boundary. No match at all yields one step.
pub fn segment_into_steps(
    transcript: &Transcript,
    rules: &SegmentationRules,
) -> Result<StepGuide, GuideError> {
    let explicit: BTreeSet<&str> = rules.boundaries.iter().map(String::as_str).collect();
    for id in &explicit {
        if transcript.segment(id).is_none() {
            return Err(GuideError::UnknownBoundary((*id).to_owned()));
        }
    }

    // (first segment position, marker title)
    let mut starts: Vec<(usize, Option<String>)> = Vec::new();
    for (pos, seg) in transcript.segments().iter().enumerate() {
        let marker = marker_title(&seg.text, rules);
        if pos == 0 || marker.is_some() || explicit.contains(seg.id.as_str()) {
            starts.push((pos, marker.flatten()));
        }
    }

    let segments = transcript.segments();
    let mut steps = Vec::with_capacity(starts.len());
    for (index, (first, title)) in starts.iter().enumerate() {
        let end = starts.get(index + 1).map_or(segments.len(), |(p, _)| *p);
        let owned = &segments[*first..end];
        let segment_ids: Vec<String> = owned.iter().map(|s| s.id.clone()).collect();
        let window = window_for_segments(transcript, &segment_ids)
            .expect("step segments come from the transcript");
        let title = title.clone().unwrap_or_else(|| format!("Step {}", index + 1));
        let instruction = owned
            .iter()
            .map(|s| s.text.trim())
            .collect::<Vec<_>>()
            .join(" ");
        let completion_hint = format!("Say \"done\" once {title} is finished.");
        steps.push(Step {
            id: format!("step-{}", index + 1),
            index,
            title,
            instruction,
            segment_ids,
            window,
            completion_hint,
        });
    }
    Ok(StepGuide {
        task_id: transcript.task_id().to_owned(),
        steps,
    })
}

impl StepGuide {
    /// Builds a guide, checking the structural invariants that do not need
    /// the transcript.
    pub fn new(task_id: impl Into<String>, steps: Vec<Step>) -> Result<Self, GuideError> {
        let guide = Self {
            task_id: task_id.into(),
            steps,
        };
        guide.check_structure()?;
        Ok(guide)
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step(&self, index: usize) -> Option<&Step> {
        self.steps.get(index)
    }

    fn check_structure(&self) -> Result<(), GuideError> {
        let bad = |m: String| Err(GuideError::Invariant(m));
        if self.steps.is_empty() {
            return bad("guide has no steps".into());
        }
        let mut seen = BTreeSet::new();
        for (i, step) in self.steps.iter().enumerate() {
            if step.index != i {
                return bad(format!("step {} has index {}", i, step.index));
            }
            if step.segment_ids.is_empty() {
                return bad(format!("step {} owns no segments", step.id));
            }
            if step.window.end_ms <= step.window.start_ms {
                return bad(format!("step {} has an empty window", step.id));
            }
            for id in &step.segment_ids {
                if !seen.insert(id.as_str()) {
                    return bad(format!("segment {id} is assigned twice"));
                }
            }
            if i > 0 && self.steps[i - 1].window.end_ms > step.window.start_ms {
                return bad(format!("step {} window overlaps its predecessor", step.id));
            }
        }
        Ok(())
    }

    /// Checks that this guide partitions `transcript` in order and that each
    /// window is the hull of its segments.
    pub fn check_against(&self, transcript: &Transcript) -> Result<(), GuideError> {
        if self.task_id != transcript.task_id() {
            return Err(GuideError::TaskMismatch {
                guide: self.task_id.clone(),
                transcript: transcript.task_id().to_owned(),
            });
        }
        let flat: Vec<&str> = self
            .steps
            .iter()
            .flat_map(|s| s.segment_ids.iter().map(String::as_str))
            .collect();
        let expected: Vec<&str> = transcript.segments().iter().map(|s| s.id.as_str()).collect();
        if flat != expected {
            return Err(GuideError::Invariant(
                "steps do not partition the transcript in order".into(),
            ));
        }
        for step in &self.steps {
            let hull = window_for_segments(transcript, &step.segment_ids)
                .map_err(|e| GuideError::Invariant(e.to_string()))?;
            if hull != step.window {
                return Err(GuideError::Invariant(format!(
                    "step {} window is not the hull of its segments",
                    step.id
                )));
            }
        }
        Ok(())
    }

    /// Canonical JSON document.
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(&GuideDocRef {
            version: FORMAT_VERSION,
            task_id: &self.task_id,
            steps: &self.steps,
        })
        .expect("guide serialization is infallible")
    }
}

pub fn serialize_guide(guide: &StepGuide) -> Vec<u8> {
    guide.to_json()
}

pub fn parse_guide_json(bytes: &[u8]) -> Result<StepGuide, GuideError> {
    let doc: GuideDoc =
        serde_json::from_slice(bytes).map_err(|e| GuideError::Malformed(e.to_string()))?;
    if doc.version != FORMAT_VERSION {
        return Err(GuideError::Malformed(format!("unsupported version {:?}", doc.version)));
    }
    StepGuide::new(doc.task_id, doc.steps)
}

#[derive(Serialize)]
struct GuideDocRef<'a> {
    version: &'a str,
    task_id: &'a str,
    steps: &'a [Step],
}

#[derive(Deserialize)]
struct GuideDoc {
    version: String,
    task_id: String,
    steps: Vec<Step>,
}
