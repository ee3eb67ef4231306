//! Rule-based intent classification for trainee input.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "intent", content = "value", rename_all = "snake_case")]
pub enum Intent {
    StartTask,
    ConfirmDone,
    Query(String),
    Trouble(String),
    Repeat,
    /// Zero-based step index, already checked against the guide.
    GotoStep(usize),
    Unknown,
}

impl Intent {
    /// Intents that move the step pointer or stage.
    pub fn is_mutating(&self) -> bool {
        matches!(self, Intent::StartTask | Intent::ConfirmDone | Intent::GotoStep(_))
    }
}

const CONFIRM: &[&str] = &["done", "finished", "next", "completed"];
const CONFIRM_PHRASES: &[&[&str]] = &[&["ok", "next"]];
const TROUBLE: &[&str] = &["stuck", "wrong", "won't", "error", "problem", "help"];
const REPEAT: &[&str] = &["again", "repeat"];
const START: &[&str] = &["start", "begin"];
const INTERROGATIVES: &[&str] = &[
    "what", "which", "how", "why", "where", "when", "who", "whom", "whose", "can", "could",
    "should", "would", "will", "do", "does", "did", "is", "are", "am", "was", "were", "has",
    "have", "may", "shall",
];
const NUMBER_WORDS: &[&str] = &[
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve",
];

/// Lowercase words; apostrophes inside a word are kept so "won't" survives.
fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, out: &mut Vec<String>| {
        let w = cur.trim_matches('\'');
        if !w.is_empty() {
            out.push(w.to_string());
        }
        cur.clear();
    };
    for c in text.chars() {
        let c = if c == '\u{2019}' { '\'' } else { c };
        if c.is_alphanumeric() || c == '\'' {
            cur.extend(c.to_lowercase());
        } else {
            flush(&mut cur, &mut out);
        }
    }
    flush(&mut cur, &mut out);
    out
}

fn has_any(words: &[String], lexicon: &[&str]) -> bool {
    words.iter().any(|w| lexicon.contains(&w.as_str()))
}

fn has_phrase(words: &[String], phrase: &[&str]) -> bool {
    words
        .windows(phrase.len())
        .any(|w| w.iter().zip(phrase).all(|(a, b)| a == b))
}

fn step_number(words: &[String]) -> Option<usize> {
    words.windows(2).find_map(|w| {
        if w[0] != "step" {
            return None;
        }
        w[1].parse::<usize>()
            .ok()
            .or_else(|| NUMBER_WORDS.iter().position(|n| *n == w[1]).map(|i| i + 1))
    })
}

fn is_question(text: &str, words: &[String]) -> bool {
    if text.contains('?') {
        return true;
    }
    words.first().is_some_and(|w| {
        let head = w.split('\'').next().unwrap_or(w);
        INTERROGATIVES.contains(&head)
    })
}

/// Classifies trainee text. Rules are tried in order: confirmation, trouble,
/// repeat, step navigation, start, question; anything else is `Unknown`.
/// "start"/"begin" only count as a start request when the text is not a
/// question, so "how do I start the pump?" stays a query. A step number
/// outside `1..=step_count` is not a navigation request.
pub fn classify_intent(text: &str, step_count: usize) -> Intent {
    let w = words(text);
    if has_any(&w, CONFIRM) || CONFIRM_PHRASES.iter().any(|p| has_phrase(&w, p)) {
        return Intent::ConfirmDone;
    }
    if has_any(&w, TROUBLE) {
        return Intent::Trouble(text.trim().to_string());
    }
    if has_any(&w, REPEAT) {
        return Intent::Repeat;
    }
    if let Some(n) = step_number(&w) {
        if (1..=step_count).contains(&n) {
            return Intent::GotoStep(n - 1);
        }
    }
    let question = is_question(text, &w);
    if has_any(&w, START) && !question {
        return Intent::StartTask;
    }
    if question {
        return Intent::Query(text.trim().to_string());
    }
    Intent::Unknown
}
