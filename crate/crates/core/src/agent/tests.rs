use std::time::Duration;

use super::*;
use crate::planner::{generate_demonstration, PlannerConfig};
use crate::sim::{reset, ActionOutcome};
use crate::task::{Injection, TaskType};
use crate::testing::{dirty, episode, kitchen, occupied, task};
use crate::world::{AffordanceCategory, ClassKind, LocationId, ObjectId};

const MICROWAVE: ObjectId = ObjectId(3);
const MUG: ObjectId = ObjectId(6);

/// Episode with its static reference plan; the expert cost is left unset.
fn unplanned(task_type: TaskType, object: ClassKind, receptacle: ClassKind, injections: Vec<Injection>) -> EpisodeSpec {
    let scene = kitchen();
    let mut spec = episode(&scene, task(task_type, object, receptacle), injections);
    spec.reference_plan =
        generate_demonstration(&scene, &spec.static_twin(), &PlannerConfig::default()).unwrap().plan.steps;
    spec
}

fn prepared(task_type: TaskType, object: ClassKind, receptacle: ClassKind, injections: Vec<Injection>) -> EpisodeSpec {
    let mut spec = unplanned(task_type, object, receptacle, injections);
    spec.expert_steps = generate_demonstration(&kitchen(), &spec, &PlannerConfig::default()).unwrap().expert_steps;
    spec
}

fn heat_egg(t: u32) -> EpisodeSpec {
    prepared(TaskType::HeatAndPlace, ClassKind::Egg, ClassKind::DiningTable, vec![occupied(MICROWAVE.0, t)])
}

fn long_heat_egg(t: u32) -> EpisodeSpec {
    unplanned(TaskType::HeatAndPlace, ClassKind::Egg, ClassKind::DiningTable, vec![occupied(MICROWAVE.0, t)])
}

fn dirty_mug() -> EpisodeSpec {
    prepared(TaskType::PickAndPlace, ClassKind::Mug, ClassKind::DiningTable, vec![dirty(MUG.0)])
}

fn run(spec: &EpisodeSpec, policy: PolicyKind, reasoner: &mut dyn Reasoner) -> EpisodeRun {
    run_episode(&kitchen(), spec, &AgentConfig::with_policy(policy), reasoner).unwrap()
}

fn actions(r: &EpisodeRun) -> Vec<Action> {
    r.trajectory.iter().map(|t| t.action).collect()
}

fn failures(r: &EpisodeRun) -> usize {
    r.trajectory.iter().filter(|t| !t.outcome.is_ok()).count()
}

#[test]
fn occupied_microwave_is_waited_out() {
    let spec = heat_egg(12);
    let adapt = run(&spec, PolicyKind::Adapt, &mut OracleReasoner);
    assert!(adapt.result.success, "{:?}", actions(&adapt));
    assert_eq!(failures(&adapt), 0);
    let first_wait = adapt.trajectory.iter().position(|t| t.action == Action::Wait).expect("waits");
    let waits = adapt.trajectory.iter().filter(|t| t.action == Action::Wait).count() as u32;
    assert_eq!(waits, 12 - adapt.trajectory[first_wait].t);
    let after = &adapt.trajectory[first_wait + waits as usize];
    assert_eq!(after.outcome, ActionOutcome::Ok);

    let vanilla = run(&spec, PolicyKind::Vanilla, &mut OracleReasoner);
    assert!(!vanilla.result.success);
    assert!(failures(&vanilla) > 0);
}

#[test]
fn dirty_mug_is_cleaned_before_placing() {
    let spec = dirty_mug();
    let adapt = run(&spec, PolicyKind::Adapt, &mut OracleReasoner);
    assert!(adapt.result.success, "{:?}", actions(&adapt));
    assert!(actions(&adapt).contains(&Action::Clean { object: MUG }));
    assert!(actions(&adapt).contains(&Action::Goto { to: LocationId(3) }));
    assert_eq!(adapt.result.abort, AbortCode::None);

    let vanilla = run(&spec, PolicyKind::Vanilla, &mut OracleReasoner);
    assert!(!vanilla.result.success);
    assert!(vanilla.result.gc_satisfied < vanilla.result.gc_total);
}

#[test]
fn static_episodes_run_identically_under_both_policies() {
    for (t, o, r) in [
        (TaskType::PickAndPlace, ClassKind::Mug, ClassKind::DiningTable),
        (TaskType::HeatAndPlace, ClassKind::Egg, ClassKind::DiningTable),
        (TaskType::CleanAndPlace, ClassKind::Plate, ClassKind::CounterTop),
        (TaskType::CoolAndPlace, ClassKind::Egg, ClassKind::DiningTable),
    ] {
        let spec = prepared(t, o, r, Vec::new());
        let vanilla = run(&spec, PolicyKind::Vanilla, &mut OracleReasoner);
        let adapt = run(&spec, PolicyKind::Adapt, &mut OracleReasoner);
        assert!(vanilla.result.success, "{t:?}");
        assert_eq!(vanilla.trajectory, adapt.trajectory, "{t:?}");
        assert_eq!(vanilla.result.agent_steps, spec.expert_steps);
    }
}

#[test]
fn clean_task_does_not_detour_for_its_own_target() {
    let spec = prepared(TaskType::CleanAndPlace, ClassKind::Plate, ClassKind::CounterTop, Vec::new());
    let adapt = run(&spec, PolicyKind::Adapt, &mut OracleReasoner);
    let cleans = actions(&adapt).iter().filter(|a| matches!(a, Action::Clean { .. })).count();
    assert_eq!(cleans, 1);
}

#[test]
fn perfect_noisy_reasoner_matches_oracle() {
    for spec in [heat_egg(9), dirty_mug()] {
        let oracle = run(&spec, PolicyKind::Adapt, &mut OracleReasoner);
        let noisy = run(&spec, PolicyKind::Adapt, &mut NoisyReasoner::new(AccuracyMap::uniform(1.0), 7));
        assert_eq!(oracle.trajectory, noisy.trajectory);
        assert_eq!(noisy.result.reasoner, "noisy@1");
    }
}

#[test]
fn noisy_reasoner_is_calibrated_per_class() {
    let scene = kitchen();
    let spec = long_heat_egg(5000);
    let mut state = reset(&scene, &spec).unwrap();
    state.step(&Action::Goto { to: LocationId(1) });
    let obs = state.observe(false);
    let latent = state.observe(true);
    let mut r = NoisyReasoner::new(AccuracyMap::reference(), 3);
    let n = 10_000;
    let correct = (0..n)
        .filter(|&step| {
            let q = Query {
                episode: "calib",
                step,
                target: MICROWAVE,
                class: ClassKind::Microwave,
                observation: &obs,
                latent: &latent,
            };
            r.reason(&q).unwrap().state == VerdictState::Unavailable(AffordanceCategory::Occupied)
        })
        .count();
    let rate = correct as f64 / f64::from(n);
    assert!((rate - AccuracyMap::MICROWAVE).abs() < 0.01, "{rate}");
}

#[test]
fn noisy_reasoner_is_deterministic_per_key() {
    let scene = kitchen();
    let state = reset(&scene, &dirty_mug()).unwrap();
    let (obs, latent) = (state.observe(false), state.observe(true));
    let q = Query { episode: "e", step: 4, target: MUG, class: ClassKind::Mug, observation: &obs, latent: &latent };
    let mut a = NoisyReasoner::new(AccuracyMap::uniform(0.6), 11);
    let mut b = NoisyReasoner::new(AccuracyMap::uniform(0.6), 11);
    let va: Vec<_> = (0..50).map(|_| a.reason(&q).unwrap()).collect();
    let vb: Vec<_> = (0..50).map(|_| b.reason(&q).unwrap()).collect();
    assert_eq!(va, vb);
    assert!(AccuracyMap::uniform(0.5).validate().is_err());
    assert!(AccuracyMap::uniform(1.2).validate().is_err());
}

#[test]
fn unresolvable_occupancy_aborts_with_resolution_loop() {
    let spec = long_heat_egg(900);
    let mut cfg = AgentConfig::default();
    cfg.adapt.loop_limit = 5;
    let r = run_episode(&kitchen(), &spec, &cfg, &mut OracleReasoner).unwrap();
    assert_eq!(r.result.abort, AbortCode::ResolutionLoop);
    assert!(!r.result.success);
}

#[test]
fn exhausted_budget_aborts() {
    let spec = dirty_mug();
    let cfg = AgentConfig { max_steps: 2, ..AgentConfig::default() };
    let r = run_episode(&kitchen(), &spec, &cfg, &mut OracleReasoner).unwrap();
    assert_eq!(r.result.abort, AbortCode::Budget);
    assert_eq!(r.result.agent_steps, 2);
}

fn external(mode: StubMode, timeout: Duration, share_latent: bool) -> ExternalReasoner {
    let (addr, _) = spawn_tcp_stub(mode).unwrap();
    ExternalReasoner::new(Endpoint::Tcp(addr.to_string()), timeout).sharing_latent(share_latent)
}

#[test]
fn loopback_oracle_stub_matches_in_process_oracle() {
    for spec in [heat_egg(9), dirty_mug()] {
        let oracle = run(&spec, PolicyKind::Adapt, &mut OracleReasoner);
        let mut ext = external(StubMode::Oracle, DEFAULT_TIMEOUT, true);
        let remote = run(&spec, PolicyKind::Adapt, &mut ext);
        assert_eq!(oracle.trajectory, remote.trajectory);
        assert_eq!(oracle.result.success, remote.result.success);
    }
}

#[test]
fn always_available_stub_reduces_to_plan_following() {
    let spec = dirty_mug();
    let vanilla = run(&spec, PolicyKind::Vanilla, &mut OracleReasoner);
    let mut ext = external(StubMode::AlwaysAvailable, DEFAULT_TIMEOUT, false);
    let remote = run(&spec, PolicyKind::Adapt, &mut ext);
    assert_eq!(vanilla.trajectory, remote.trajectory);
}

#[test]
fn malformed_and_silent_reasoners_abort() {
    let spec = dirty_mug();
    let mut bad = external(StubMode::Malformed, DEFAULT_TIMEOUT, false);
    assert_eq!(run(&spec, PolicyKind::Adapt, &mut bad).result.abort, AbortCode::Malformed);
    let mut silent = external(StubMode::Silent, Duration::from_millis(200), false);
    let r = run(&spec, PolicyKind::Adapt, &mut silent);
    assert_eq!(r.result.abort, AbortCode::Timeout);
    assert!(!r.result.success);
}

#[test]
fn parse_response_rejects_invalid_lines() {
    assert!(parse_response(r#"{"v":1,"state":"available","category":null,"confidence":0.9}"#).is_ok());
    for bad in [
        "not json",
        r#"{"v":2,"state":"available","category":null,"confidence":0.9}"#,
        r#"{"v":1,"state":"maybe","category":null,"confidence":0.9}"#,
        r#"{"v":1,"state":"available","category":"dirty","confidence":0.9}"#,
        r#"{"v":1,"state":"unavailable","category":null,"confidence":0.9}"#,
        r#"{"v":1,"state":"available","category":null,"confidence":1.5}"#,
    ] {
        assert!(matches!(parse_response(bad), Err(ReasonerError::MalformedResponse(_))), "{bad}");
    }
}
