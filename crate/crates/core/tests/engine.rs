use std::sync::Arc;

use taskguide_core::engine::log::{replay_log, ReplayMode, SessionEvent};
use taskguide_core::engine::prompt::SYSTEM_INSTRUCTION;
use taskguide_core::engine::templates::{self, FRAGMENTS, NO_MATCH};
use taskguide_core::engine::{
    build_prompt, scripted_responder, EngineConfig, EngineError, Intent, PrefetchedReply, ProviderReply,
    ScriptedResponder, Session, Stage, TurnKind, UserTurn,
};
use taskguide_core::fixture::juice_mixer;
use taskguide_core::twin::{happy_path_for, TwinConfig, TwinState};
use taskguide_core::{segment_into_steps, PlaybackWindow, SegmentationRules, StepGuide, Transcript};

fn fixture() -> (Arc<Transcript>, Arc<StepGuide>) {
    let t = juice_mixer();
    let g = segment_into_steps(&t, &SegmentationRules::default()).unwrap();
    (Arc::new(t), Arc::new(g))
}

fn session(config: EngineConfig) -> Session {
    let (t, g) = fixture();
    Session::create("s", t, g, config).unwrap().0
}

fn say(s: &mut Session, text: &str) -> taskguide_core::engine::AssistantTurn {
    s.handle_turn(UserTurn::text(text), &mut ScriptedResponder, None)
        .unwrap()
        .assistant
}

#[test]
fn greeting_names_the_task_and_has_no_window() {
    let (t, g) = fixture();
    let (s, greeting) = Session::create("s", t, g, EngineConfig::default()).unwrap();
    assert_eq!(greeting.kind, TurnKind::Greeting);
    assert_eq!(greeting.window, None);
    assert!(greeting.text.contains("Juice mixer operation"));
    assert_eq!(s.current_step(), 0);
    assert_eq!(s.stage(), Stage::GreetingSent);
}

#[test]
fn mismatched_task_is_rejected() {
    let (t, _) = fixture();
    let other = Transcript::new("other", "en", t.segments().to_vec(), Default::default()).unwrap();
    let g = segment_into_steps(&other, &SegmentationRules::default()).unwrap();
    let err = Session::create("s", t, Arc::new(g), EngineConfig::default()).unwrap_err();
    assert!(matches!(err, EngineError::TaskMismatch { .. }));
}

#[test]
fn done_advances_to_next_step_window() {
    let (_, g) = fixture();
    let mut s = session(EngineConfig::default());
    say(&mut s, "start");
    assert_eq!(s.stage(), Stage::AwaitingConfirmation);
    let turn = say(&mut s, "done");
    assert_eq!(s.current_step(), 1);
    assert_eq!(turn.kind, TurnKind::Instruction);
    assert_eq!(turn.window, Some(g.steps()[1].window));
}

#[test]
fn sensor_question_points_at_assembly_narration() {
    let (t, g) = fixture();
    let mut s = session(EngineConfig::default());
    let turn = say(&mut s, "which sensors do I attach?");
    assert_eq!(turn.kind, TurnKind::Answer);
    let w = turn.window.unwrap();
    let s5 = t.segment("s5").unwrap().window();
    assert!(w.contains(&s5), "{w:?}");
    assert!(g.steps()[1].window.contains(&w));
    assert_eq!(s.current_step(), 0);
}

#[test]
fn fill_question_stays_inside_preparation() {
    let (_, g) = fixture();
    let mut s = session(EngineConfig::default());
    let turn = say(&mut s, "how do I fill the container");
    assert!(g.steps()[0].window.contains(&turn.window.unwrap()));
}

#[test]
fn unknown_text_is_state_preserving() {
    let mut s = session(EngineConfig::default());
    say(&mut s, "start");
    let before = (s.current_step(), s.stage());
    let turn = say(&mut s, "asdfgh");
    assert_eq!(turn.kind, TurnKind::Clarification);
    assert_eq!(turn.window, None);
    assert_eq!((s.current_step(), s.stage()), before);
}

#[test]
fn uncovered_question_uses_no_match_template() {
    let mut s = session(EngineConfig::default());
    let turn = say(&mut s, "quasar nebula?");
    assert_eq!(turn.kind, TurnKind::Clarification);
    assert_eq!(turn.text, NO_MATCH);
}

#[test]
fn trouble_is_grounded_in_trouble_narration() {
    let (t, _) = fixture();
    let mut s = session(EngineConfig::default());
    let turn = say(&mut s, "the pump won't start");
    assert_eq!(turn.kind, TurnKind::Troubleshoot);
    assert!(turn.window.unwrap().contains(&t.segment("s10").unwrap().window()));
}

#[test]
fn repeat_reissues_the_instruction() {
    let mut s = session(EngineConfig::default());
    say(&mut s, "start");
    let first = say(&mut s, "done");
    say(&mut s, "which sensors do I attach?");
    let again = say(&mut s, "repeat that");
    assert_eq!(again, first);
}

#[test]
fn goto_moves_both_ways_and_can_be_disabled() {
    let (_, g) = fixture();
    let mut s = session(EngineConfig::default());
    say(&mut s, "start");
    let t = say(&mut s, "go to step 3");
    assert_eq!(s.current_step(), 2);
    assert_eq!(t.window, Some(g.steps()[2].window));
    say(&mut s, "step 1");
    assert_eq!(s.current_step(), 0);

    let mut s = session(EngineConfig {
        allow_forward_jumps: false,
        ..EngineConfig::default()
    });
    say(&mut s, "start");
    let t = say(&mut s, "go to step 3");
    assert_eq!(t.kind, TurnKind::Clarification);
    assert_eq!(s.current_step(), 0);
}

#[test]
fn completed_session_accepts_only_non_mutating_turns() {
    let mut s = session(EngineConfig::default());
    say(&mut s, "start");
    for _ in 0..3 {
        say(&mut s, "done");
    }
    let last = say(&mut s, "done");
    assert_eq!(last.kind, TurnKind::Completion);
    assert!(s.is_completed());
    let err = s
        .handle_turn(UserTurn::text("done"), &mut ScriptedResponder, None)
        .unwrap_err();
    assert_eq!(err, EngineError::SessionCompleted);
    assert_eq!(say(&mut s, "which sensors do I attach?").kind, TurnKind::Answer);
    assert_eq!(say(&mut s, "repeat"), last);
    assert_eq!(
        s.handle_turn(UserTurn::text("   "), &mut ScriptedResponder, None),
        Err(EngineError::EmptyTurn)
    );
}

#[test]
fn strict_gating_consults_the_twin() {
    let mut s = session(EngineConfig::default());
    let twin = TwinState::new(TwinConfig::default()).unwrap();
    say(&mut s, "start");
    let nudge = s
        .handle_turn(UserTurn::text("done"), &mut ScriptedResponder, Some(&twin))
        .unwrap()
        .assistant;
    assert_eq!(nudge.kind, TurnKind::Troubleshoot);
    assert_eq!(s.current_step(), 0);
    assert_eq!(s.stage(), Stage::Instructing);

    let mut twin = twin;
    for (dt, a) in happy_path_for(&TwinConfig::default()).into_iter().take(3) {
        twin = twin.tick(dt).apply(&a).unwrap();
    }
    let next = s
        .handle_turn(UserTurn::text("done"), &mut ScriptedResponder, Some(&twin))
        .unwrap()
        .assistant;
    assert_eq!(next.kind, TurnKind::Instruction);
    assert_eq!(s.current_step(), 1);

    let mut loose = session(EngineConfig {
        strict_gating: false,
        ..EngineConfig::default()
    });
    let fresh = TwinState::new(TwinConfig::default()).unwrap();
    say(&mut loose, "start");
    loose
        .handle_turn(UserTurn::text("done"), &mut ScriptedResponder, Some(&fresh))
        .unwrap();
    assert_eq!(loose.current_step(), 1);
}

#[test]
fn provider_wording_and_windows() {
    let (t, g) = fixture();
    let mut s = session(EngineConfig::default());
    say(&mut s, "start");
    // out-of-range window is clamped to the transcript
    let reply = ProviderReply {
        reply_text: "Look at the mixing part".into(),
        start_ms: Some(70_000),
        end_ms: Some(99_000),
        step_done: false,
        kind_hint: None,
    };
    let out = s
        .handle_turn(UserTurn::text("how does mixing work?"), &mut PrefetchedReply(Some(reply)), None)
        .unwrap();
    assert_eq!(out.assistant.text, "Look at the mixing part");
    assert_eq!(out.assistant.window, PlaybackWindow::new(70_000, t.duration_ms()));

    // a reply past the end of the video falls back to the grounded window
    let reply = ProviderReply {
        start_ms: Some(200_000),
        end_ms: Some(300_000),
        ..ProviderReply::text("x")
    };
    let out = s
        .handle_turn(UserTurn::text("how does mixing work?"), &mut PrefetchedReply(Some(reply)), None)
        .unwrap();
    assert!(out.assistant.window.is_some());

    // step_done from the provider advances an ambiguous turn
    let reply = ProviderReply {
        step_done: true,
        ..ProviderReply::text("Great, next step.")
    };
    let out = s
        .handle_turn(UserTurn::text("all good here"), &mut PrefetchedReply(Some(reply)), None)
        .unwrap();
    assert_eq!(out.intent, Intent::Unknown);
    assert_eq!(s.current_step(), 1);
    // instruction without provider window takes the step's
    assert_eq!(out.assistant.window, Some(g.steps()[1].window));
}

#[test]
fn scripted_responder_does_not_mutate() {
    let mut s = session(EngineConfig::default());
    say(&mut s, "start");
    let snap = s.snapshot();
    let t = scripted_responder(&s, &Intent::ConfirmDone);
    assert_eq!(t.step_index, 1);
    assert_eq!(s.snapshot(), snap);
}

#[test]
fn prompt_holds_only_transcript_context() {
    let (t, _) = fixture();
    let mut s = session(EngineConfig::default());
    for text in ["start", "done", "which sensors?", "repeat", "done", "asdf", "done"] {
        say(&mut s, text);
    }
    let p = build_prompt(&s, &UserTurn::text("the pump won't start"));
    assert_eq!(p.context_transcript.as_bytes(), t.to_json().as_slice());
    assert_eq!(p.history_excerpt.len(), 10);
    assert_eq!(p.history_excerpt.last(), s.history().last());
    assert_eq!(p.system_instruction, SYSTEM_INSTRUCTION);
    assert!(p.system_instruction.contains("Do not move on to the next step until the trainee confirms"));
    assert!(p.system_instruction.contains(NO_MATCH));
    assert!(matches!(p.intent, Intent::Trouble(_)));

    let short = session(EngineConfig {
        history_turns: 0,
        ..EngineConfig::default()
    });
    assert!(build_prompt(&short, &UserTurn::text("hi")).history_excerpt.is_empty());
}

/// Removes every template fragment and every transcript/guide string from
/// `text`; whatever is left did not come from an allowed source.
fn residue(text: &str, t: &Transcript, g: &StepGuide) -> String {
    let mut sources: Vec<String> = t.segments().iter().map(|s| s.text.trim().to_string()).collect();
    for step in g.steps() {
        sources.push(step.title.clone());
        sources.push(step.instruction.clone());
        sources.push(step.completion_hint.clone());
    }
    sources.push(t.title().to_string());
    sources.extend(FRAGMENTS.iter().map(|f| f.to_string()));
    sources.sort_by_key(|s| std::cmp::Reverse(s.len()));
    let mut rest = text.to_string();
    for s in &sources {
        if !s.trim().is_empty() {
            rest = rest.replace(s.as_str(), "");
        }
    }
    rest.retain(|c| !c.is_ascii_digit() && !c.is_whitespace());
    rest
}

#[test]
fn scripted_text_is_closed_world() {
    let (t, g) = fixture();
    let mut s = session(EngineConfig::default());
    let mut texts = vec![s.history()[0].clone()];
    let script = [
        "hello", "start", "which sensors do I attach?", "the pump won't start", "done", "repeat",
        "what is a quasar?", "start", "go to step 4", "step 2", "done", "done", "done", "help",
    ];
    for text in script {
        say(&mut s, text);
        texts.push(s.history().last().unwrap().clone());
    }
    let twin = TwinState::new(TwinConfig::default()).unwrap();
    let mut gated = session(EngineConfig::default());
    say(&mut gated, "start");
    gated
        .handle_turn(UserTurn::text("done"), &mut ScriptedResponder, Some(&twin))
        .unwrap();
    texts.push(gated.history().last().unwrap().clone());
    texts.push(taskguide_core::engine::HistoryEntry::Assistant(
        taskguide_core::engine::AssistantTurn {
            kind: TurnKind::Clarification,
            text: templates::no_jump(0),
            window: None,
            step_index: 0,
            audio_ref: None,
        },
    ));
    for entry in texts {
        let taskguide_core::engine::HistoryEntry::Assistant(turn) = entry else {
            panic!("expected assistant entry")
        };
        assert_eq!(residue(&turn.text, &t, &g), "", "{:?}", turn.text);
    }
}

#[test]
fn recorded_log_replays_after_twin_events() {
    let (t, g) = fixture();
    let config = TwinConfig::default();
    let (s, greeting) = Session::create("s", t.clone(), g.clone(), EngineConfig::default()).unwrap();
    let mut s = s.with_twin_binding("s");
    let mut twin = TwinState::new(config.clone()).unwrap();
    let mut events = vec![SessionEvent::Created {
        seq: 0,
        session_id: "s".into(),
        transcript_id: t.task_id().into(),
        guide_id: "g".into(),
        twin: Some(config.clone()),
        config: EngineConfig::default(),
        greeting,
    }];
    let push_turn = |s: &mut Session, twin: &TwinState, events: &mut Vec<SessionEvent>, text: &str| {
        let user = UserTurn::text(text);
        let out = s.handle_turn(user.clone(), &mut ScriptedResponder, Some(twin)).unwrap();
        let seq = events.len() as u64;
        events.push(SessionEvent::Turn {
            seq,
            user,
            provider_reply: None,
            assistant: out.assistant,
        });
    };
    push_turn(&mut s, &twin, &mut events, "start");
    push_turn(&mut s, &twin, &mut events, "done");
    for (dt, a) in happy_path_for(&config).into_iter().take(3) {
        twin = twin.tick(dt);
        let rejection = twin.apply(&a).err();
        if rejection.is_none() {
            twin = twin.apply(&a).unwrap();
        }
        let seq = events.len() as u64;
        events.push(SessionEvent::Twin {
            seq,
            advance_ms: dt,
            action: Some(a),
            rejection,
            clock_ms: twin.clock_ms,
        });
    }
    push_turn(&mut s, &twin, &mut events, "done");
    assert_eq!(s.current_step(), 1);

    let r = replay_log(&events, t, g, ReplayMode::Scripted).unwrap();
    assert!(r.divergences.is_empty());
    assert_eq!(r.session.snapshot(), s.snapshot());
    assert_eq!(r.twin, Some(twin));
}
