//! Fixed wording used by the scripted responder. Every scripted sentence is
//! one of these templates with transcript or guide text spliced in.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::guide::Step;
use crate::transcript::TimedSegment;

pub const NO_MATCH: &str = "That isn't covered in the expert walkthrough.";
pub const CLARIFY: &str = "Sorry, I didn't catch that. Say \"done\" when a step is finished, \"repeat\" to hear it again, or ask a question about the task.";

/// Literal fragments of every template, for auditing generated text.
pub const FRAGMENTS: &[&str] = &[
    "Hi, I'm your assistant for \"",
    "\". I'll guide you through ",
    " steps from the expert walkthrough and answer questions with clips from the expert video. Say \"start\" when you're ready.",
    "Step ",
    " of ",
    ": ",
    ". ",
    " ",
    "Here is what the expert says: ",
    "The expert covers this: ",
    " Watch the clip, then try again.",
    NO_MATCH,
    CLARIFY,
    " (",
    ") doesn't look finished on the mixer yet. ",
    "You're on step ",
    "That was the last step. All ",
    " steps are complete, and you can keep asking questions about the task.",
    "Skipping ahead isn't enabled for this session. Finish step ",
    " first and say \"done\".",
];

pub fn greeting(task_title: &str, step_count: usize) -> String {
    format!(
        "Hi, I'm your assistant for \"{task_title}\". I'll guide you through {step_count} steps from the expert walkthrough and answer questions with clips from the expert video. Say \"start\" when you're ready."
    )
}

pub fn instruction(step: &Step, step_count: usize) -> String {
    format!(
        "Step {} of {}: {}. {} {}",
        step.index + 1,
        step_count,
        step.title,
        step.instruction,
        step.completion_hint
    )
}

fn joined(segments: &[TimedSegment]) -> String {
    segments
        .iter()
        .map(|s| s.text.trim())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn answer(segments: &[TimedSegment]) -> String {
    format!("Here is what the expert says: {}", joined(segments))
}

pub fn troubleshoot(segments: &[TimedSegment]) -> String {
    format!("The expert covers this: {} Watch the clip, then try again.", joined(segments))
}

pub fn not_finished(step: &Step) -> String {
    format!(
        "Step {} ({}) doesn't look finished on the mixer yet. {}",
        step.index + 1,
        step.title,
        step.completion_hint
    )
}

pub fn confirmation_prompt(step: &Step, step_count: usize) -> String {
    format!(
        "You're on step {} of {}: {}. {}",
        step.index + 1,
        step_count,
        step.title,
        step.completion_hint
    )
}

pub fn completion(step_count: usize) -> String {
    format!(
        "That was the last step. All {step_count} steps are complete, and you can keep asking questions about the task."
    )
}

pub fn no_jump(current: usize) -> String {
    format!(
        "Skipping ahead isn't enabled for this session. Finish step {} first and say \"done\".",
        current + 1
    )
}
