//! Round barrier, human agents, failure policies, events and replay through
//! the on-disk format.

use std::thread;
use std::time::Duration;

use netdilemma::agents::AgentSpec;
use netdilemma::game::{Action, GameParams};
use netdilemma::runner::{
    replay, run_experiment, store, EventKind, ExperimentConfig, FailureKind, FailurePolicy, RepetitionStatus,
    RunContext, RunnerError,
};
use netdilemma::topology::{TopologyMode, TopologySpec};

fn config(n: usize, k: usize, mode: TopologyMode, agents: Vec<AgentSpec>, rounds: u32, reps: u32) -> ExperimentConfig {
    ExperimentConfig {
        topology: TopologySpec { n, k, mode },
        params: GameParams::new(4).unwrap(),
        rounds,
        repetitions: reps,
        agents,
        master_seed: 99,
        failure_policy: FailurePolicy::FailRun,
        human_timeout_secs: 5.0,
        shuffle_labels: true,
        stimulus: None,
    }
}

#[test]
fn human_submissions_advance_the_barrier() {
    let mut agents = vec![AgentSpec::tit_for_tat_majority(); 6];
    agents[3] = AgentSpec::human();
    let cfg = config(6, 2, TopologyMode::FixedRing, agents, 3, 1);
    let ctx = RunContext::default();
    let runner = {
        let ctx = ctx.clone();
        thread::spawn(move || run_experiment(&cfg, &ctx).unwrap())
    };
    let choices = [Action::Cooperate, Action::Defect, Action::Cooperate];
    for (i, &choice) in choices.iter().enumerate() {
        let round = i as u32 + 1;
        while ctx.control.humans.pending() != vec![(3, round)] {
            thread::sleep(Duration::from_millis(1));
        }
        assert!(ctx.control.humans.submit(2, choice).is_err());
        assert_eq!(ctx.control.humans.submit(3, choice), Ok(round));
    }
    let result = runner.join().unwrap();
    let rep = &result.repetitions[0];
    assert!(rep.status.is_completed());
    let played: Vec<Action> = rep.records.iter().map(|r| r.actions[3]).collect();
    assert_eq!(played, choices);
    let feedback = ctx.control.humans.snapshot()[&3].last_feedback.clone().unwrap();
    assert!(feedback.starts_with("Last round, you chose C"), "{feedback}");
    let awaiting = rep
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::AwaitingInput { agent: 3, .. }))
        .count();
    assert_eq!(awaiting, 3);
}

#[test]
fn human_timeout_applies_the_failure_policy() {
    let mut agents = vec![AgentSpec::all_c(); 4];
    agents[0] = AgentSpec::human();
    let mut cfg = config(4, 2, TopologyMode::FixedRing, agents.clone(), 2, 1);
    cfg.human_timeout_secs = 0.02;
    cfg.failure_policy = FailurePolicy::Substitute(Action::Defect);
    let result = run_experiment(&cfg, &RunContext::default()).unwrap();
    let rep = &result.repetitions[0];
    assert!(rep.status.is_completed());
    assert!(rep.records.iter().all(|r| r.actions[0] == Action::Defect));
    assert!(rep.events.iter().any(|e| matches!(
        e.kind,
        EventKind::ActionRecorded {
            agent: 0,
            substituted: true,
            ..
        }
    )));

    cfg.failure_policy = FailurePolicy::FailRun;
    let result = run_experiment(&cfg, &RunContext::default()).unwrap();
    assert!(matches!(
        result.repetitions[0].status,
        RepetitionStatus::Failed {
            kind: FailureKind::Timeout,
            round: 1,
            ..
        }
    ));
    assert!(result.repetitions[0].records.is_empty());
}

#[test]
fn abort_releases_a_waiting_human() {
    let mut agents = vec![AgentSpec::all_c(); 4];
    agents[1] = AgentSpec::human();
    let mut cfg = config(4, 2, TopologyMode::FixedRing, agents, 5, 2);
    cfg.human_timeout_secs = 600.0;
    let ctx = RunContext::default();
    let runner = {
        let ctx = ctx.clone();
        thread::spawn(move || run_experiment(&cfg, &ctx).unwrap())
    };
    while ctx.control.humans.pending().is_empty() {
        thread::sleep(Duration::from_millis(1));
    }
    ctx.control.abort();
    let result = runner.join().unwrap();
    for rep in &result.repetitions {
        assert!(matches!(
            rep.status,
            RepetitionStatus::Failed {
                kind: FailureKind::Aborted,
                ..
            }
        ));
    }
    assert!(ctx.events.is_finished());
}

#[test]
fn every_round_emits_a_complete_event_sequence() {
    let cfg = config(8, 4, TopologyMode::WellMixed, vec![AgentSpec::random(0.5); 8], 6, 3);
    let ctx = RunContext::default();
    let result = run_experiment(&cfg, &ctx).unwrap();
    let all = ctx.events.since(0);
    for (i, e) in all.iter().enumerate() {
        assert_eq!(e.seq, i as u64);
    }
    assert!(matches!(all[0].kind, EventKind::ExperimentStarted { repetitions: 3 }));
    for rep in &result.repetitions {
        let mut expected_round = 0;
        let mut recorded = 0;
        for e in &rep.events {
            match e.kind {
                EventKind::RoundStarted { round } => {
                    assert_eq!(round, expected_round + 1);
                    expected_round = round;
                    recorded = 0;
                }
                EventKind::ActionRecorded { round, .. } => {
                    assert_eq!(round, expected_round);
                    recorded += 1;
                }
                EventKind::RoundResolved { round, cooperation, .. } => {
                    assert_eq!(recorded, 8);
                    let record = &rep.records[round as usize - 1];
                    assert_eq!(cooperation, record.cooperation_level());
                }
                _ => {}
            }
        }
        assert_eq!(expected_round, 6);
    }
}

#[test]
fn stored_results_replay_identically() {
    let cfg = config(8, 2, TopologyMode::WellMixed, vec![AgentSpec::fermi_imitate(1.0); 8], 10, 3);
    let result = run_experiment(&cfg, &RunContext::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    store::write_result(dir.path(), &result).unwrap();
    let loaded = store::read_result(dir.path()).unwrap();
    let replayed = replay(&loaded).unwrap();
    for (a, b) in replayed.repetitions.iter().zip(&result.repetitions) {
        assert_eq!(a.records, b.records);
    }

    // Edit one stored action on disk.
    let path = store::repetition_dir(dir.path(), 2).join("records.jsonl");
    let mut records: Vec<netdilemma::game::RoundRecord> = store::read_jsonl(&path).unwrap();
    records[6].actions[4] = records[6].actions[4].flip();
    store::write_jsonl(&path, &records).unwrap();
    let tampered = store::read_result(dir.path()).unwrap();
    match replay(&tampered) {
        Err(RunnerError::Integrity { repetition, round, .. }) => assert_eq!((repetition, round), (2, 7)),
        other => panic!("expected an integrity error, got {other:?}"),
    }
}

#[test]
fn failed_repetitions_are_left_out_of_metrics() {
    let cfg = config(6, 2, TopologyMode::FixedRing, vec![AgentSpec::random(0.5); 6], 4, 3);
    let mut result = run_experiment(&cfg, &RunContext::default()).unwrap();
    let clean = {
        let mut r = result.clone();
        r.repetitions.remove(1);
        netdilemma::metrics::cooperation_series(&r).unwrap()
    };
    result.repetitions[1].records.truncate(2);
    result.repetitions[1].status = RepetitionStatus::Failed {
        kind: FailureKind::Rectification,
        reason: "test".into(),
        round: 3,
    };
    let series = netdilemma::metrics::cooperation_series(&result).unwrap();
    assert_eq!(series, clean);
    assert!(series.points.iter().all(|p| p.runs == 2));
}

#[test]
fn short_replay_traces_are_rejected() {
    let mut agents = vec![AgentSpec::all_c(); 4];
    agents[2] = AgentSpec::replay(vec![Action::Cooperate; 2]);
    // The replay trace is too short for the configured rounds.
    let cfg = config(4, 2, TopologyMode::FixedRing, agents, 3, 1);
    assert_eq!(cfg.validate().unwrap_err().field, "agents[2].trace");
}
