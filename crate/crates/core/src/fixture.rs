//! The juice-mixer walkthrough used by the demo, the tests and the CLI.

use crate::transcript::{parse_transcript_json, Transcript};

pub const JUICE_MIXER_JSON: &str = include_str!("../fixtures/juice_mixer.json");

pub fn juice_mixer() -> Transcript {
    parse_transcript_json(JUICE_MIXER_JSON.as_bytes()).expect("bundled fixture is valid")
}
