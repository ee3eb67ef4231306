use std::sync::Arc;

use taskguide::providers::audio::{read_wav, AudioBlob, AudioFormat};
use taskguide::providers::fault::{Fault, FaultyChat};
use taskguide::providers::mock::{split_words, MockChat, MockSpeechToText, MockTextToSpeech, SEGMENT_MS};
use taskguide::providers::{call_with_policy, ChatProvider, ProviderError, ProviderPolicy, SpeechToText, TextToSpeech};
use taskguide_core::engine::{build_prompt, create_session, parse_provider_reply, UserTurn};
use taskguide_core::fixture::juice_mixer;
use taskguide_core::{segment_into_steps, SegmentationRules};

#[tokio::test]
async fn synthesis_round_trips_through_transcription() {
    let text = "place the container under the orange spout and start the pump";
    let audio = MockTextToSpeech.synthesize(text, "default").await.unwrap();
    assert_eq!(audio.duration_ms, 11 * 60);
    let info = read_wav(&audio.bytes).unwrap();
    assert_eq!((info.sample_rate_hz, info.channels, info.duration_ms), (16_000, 1, 660));
    let segs = MockSpeechToText.transcribe(&audio).await.unwrap();
    assert_eq!(segs.len(), 1);
    assert_eq!(segs[0].text, text);
    assert_eq!((segs[0].start_ms, segs[0].end_ms), (0, 660));
}

#[tokio::test]
async fn transcription_segments_are_contiguous() {
    let words: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
    let segs = split_words(&words.join(" "), 20_500);
    assert_eq!(segs.len(), 7);
    for pair in segs.windows(2) {
        assert_eq!(pair[0].end_ms, pair[1].start_ms);
    }
    assert_eq!(segs.last().unwrap().end_ms, 20_500);
    assert!(segs.iter().all(|s| s.end_ms - s.start_ms <= SEGMENT_MS));
    let rejoined: Vec<&str> = segs.iter().flat_map(|s| s.text.split(' ')).collect();
    assert_eq!(rejoined, words.iter().map(String::as_str).collect::<Vec<_>>());
}

#[tokio::test]
async fn unsupported_audio_is_rejected() {
    let webm = AudioBlob::opaque(AudioFormat::WebmOpus, vec![0x1a, 0x45, 0xdf, 0xa3], 1200).unwrap();
    let err = MockSpeechToText.transcribe(&webm).await.unwrap_err();
    assert!(matches!(err, ProviderError::AudioRejected(_)));
    assert!(!err.is_transient());
    assert!(matches!(
        MockTextToSpeech.synthesize("  ", "default").await,
        Err(ProviderError::InvalidInput(_))
    ));
}

#[tokio::test]
async fn mock_chat_replies_parse() {
    let t = Arc::new(juice_mixer());
    let g = Arc::new(segment_into_steps(&t, &SegmentationRules::default()).unwrap());
    let (session, _) = create_session("p", t.clone(), g).unwrap();
    for text in ["done", "start", "again", "go to step 3", "which sensors do I attach?", "it's leaking", "hmm"] {
        let prompt = build_prompt(&session, &UserTurn::text(text));
        let raw = MockChat.complete(&prompt).await.unwrap();
        let reply = parse_provider_reply(&raw).unwrap();
        if let (Some(s), Some(e)) = (reply.start_ms, reply.end_ms) {
            assert!(s < e && e <= t.duration_ms(), "{text}: {s}..{e}");
        }
    }
}

#[tokio::test(start_paused = true)]
async fn retries_follow_the_policy() {
    let policy = ProviderPolicy {
        timeout_ms: 1000,
        max_retries: 3,
        backoff_initial_ms: 100,
        backoff_multiplier: 2.0,
    };
    let t = Arc::new(juice_mixer());
    let g = Arc::new(segment_into_steps(&t, &SegmentationRules::default()).unwrap());
    let (session, _) = create_session("p", t, g).unwrap();
    let prompt = build_prompt(&session, &UserTurn::text("done"));

    let chat = FaultyChat::planned([Fault::Down, Fault::Hang]);
    let started = tokio::time::Instant::now();
    let (r, report) = call_with_policy(&policy, || chat.complete(&prompt)).await;
    assert!(r.is_ok());
    assert_eq!(report.attempts, 3);
    assert_eq!(chat.calls(), 3);
    assert_eq!(report.delays_ms, [100, 200]);
    assert_eq!(report.errors[1], ProviderError::Timeout);
    assert_eq!(started.elapsed().as_millis(), 100 + 1000 + 200);

    let chat = FaultyChat::always(Fault::Down);
    let (r, report) = call_with_policy(&policy, || chat.complete(&prompt)).await;
    assert!(matches!(r, Err(ProviderError::Unavailable(m)) if m.contains("4 attempts")));
    assert_eq!(report.delays_ms, [100, 200, 400]);
    assert_eq!(chat.calls(), 4);
}
