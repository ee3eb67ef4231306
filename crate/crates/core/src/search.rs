//! Lexical segment retrieval.
//!
//! Text is lowercased and split on every non-alphanumeric character. A segment
//! scores `1 / (1 + df(token))` for each distinct query token it contains,
//! where `df` counts the segments containing the token. Terms are summed in
//! ascending token order so scores are bit-reproducible.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::transcript::Transcript;

/// Lowercased alphanumeric runs of `text`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            tokens.push(core::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMatch {
    pub segment_id: String,
    /// Position of the segment in the transcript.
    pub position: usize,
    pub score: f64,
}

/// Per-transcript token sets and document frequencies.
#[derive(Debug, Clone)]
pub struct LexicalIndex {
    segment_tokens: Vec<BTreeSet<String>>,
    doc_freq: BTreeMap<String, usize>,
}

impl LexicalIndex {
    pub fn new(transcript: &Transcript) -> Self {
        let segment_tokens: Vec<BTreeSet<String>> = transcript
            .segments()
            .iter()
            .map(|s| tokenize(&s.text).into_iter().collect())
            .collect();
        let mut doc_freq = BTreeMap::new();
        for set in &segment_tokens {
            for tok in set {
                *doc_freq.entry(tok.clone()).or_insert(0) += 1;
            }
        }
        Self {
            segment_tokens,
            doc_freq,
        }
    }

    /// Ranked matches, best first; ties go to the earlier segment.
    pub fn search(&self, transcript: &Transcript, query: &str, k: usize) -> Vec<SegmentMatch> {
        let query_tokens: BTreeSet<String> = tokenize(query).into_iter().collect();
        let mut hits: Vec<SegmentMatch> = Vec::new();
        for (position, tokens) in self.segment_tokens.iter().enumerate() {
            let mut score = 0.0f64;
            let mut shared = false;
            for tok in &query_tokens {
                if tokens.contains(tok) {
                    let df = self.doc_freq[tok];
                    score += 1.0 / (1.0 + df as f64);
                    shared = true;
                }
            }
            if shared {
                hits.push(SegmentMatch {
                    segment_id: transcript.segments()[position].id.clone(),
                    position,
                    score,
                });
            }
        }
        // Segments are in start_ms order, so position order is start_ms order.
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.position.cmp(&b.position)));
        hits.truncate(k);
        hits
    }
}

pub fn find_segments(transcript: &Transcript, query: &str, k: usize) -> Vec<SegmentMatch> {
    LexicalIndex::new(transcript).search(transcript, query, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcript::TimedSegment;
    use alloc::vec;

    #[test]
    fn tokenizer_splits_on_punctuation() {
        assert_eq!(tokenize("The pump won't START!"), vec!["the", "pump", "won", "t", "start"]);
        assert_eq!(tokenize("pH-sensor, 2x"), vec!["ph", "sensor", "2x"]);
        assert!(tokenize("?!  ..").is_empty());
    }

    fn sample() -> Transcript {
        Transcript::new(
            "t",
            "en",
            vec![
                TimedSegment::new("a", 0, 10, "attach the lid"),
                TimedSegment::new("b", 10, 20, "attach the sensors"),
                TimedSegment::new("c", 20, 30, "the pump"),
            ],
            Default::default(),
        )
        .unwrap()
    }

    #[test]
    fn rarer_tokens_weigh_more() {
        let t = sample();
        let hits = find_segments(&t, "sensors lid", 5);
        // lid and sensors each occur once; both single-hit segments tie, earlier first.
        assert_eq!(hits[0].segment_id, "a");
        assert_eq!(hits[1].segment_id, "b");
        assert_eq!(hits[0].score, 0.5);
    }

    #[test]
    fn no_overlap_gives_nothing() {
        assert!(find_segments(&sample(), "banana", 3).is_empty());
        assert!(find_segments(&sample(), "the", 0).is_empty());
    }

    #[test]
    fn repeated_query_tokens_count_once() {
        let t = sample();
        assert_eq!(
            find_segments(&t, "pump pump pump", 1)[0].score,
            find_segments(&t, "pump", 1)[0].score
        );
    }
}
