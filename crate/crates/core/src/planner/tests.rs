use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::pddl::{applicable, ground, parse_domain, parse_problem, State};
use crate::sim::{replay_plan, ActionOutcome};
use crate::task::TaskType;
use crate::testing::{dirty, episode, kitchen, occupied, task};
use crate::world::ClassKind;

const ROOMS: &str = r#"
(define (domain rooms)
  (:types room ball)
  (:predicates (robot ?r - room) (at ?b - ball ?r - room) (carry ?b - ball) (free)
               (door ?a - room ?b - room) (locked ?r - room) (isClean ?b - ball)
               (cleanable ?b - ball) (isUsed ?b - ball) (isOccupied ?r - room))
  (:action move
    :parameters (?from - room ?to - room)
    :precondition (and (robot ?from) (door ?from ?to) (not (locked ?to)) (not (= ?from ?to)))
    :effect (and (robot ?to) (not (robot ?from))))
  (:action unlock
    :parameters (?from - room ?to - room)
    :precondition (and (robot ?from) (door ?from ?to) (locked ?to))
    :effect (not (locked ?to))
    :cost COST)
  (:action pick
    :parameters (?b - ball ?r - room)
    :precondition (and (robot ?r) (at ?b ?r) (free))
    :effect (and (carry ?b) (not (at ?b ?r)) (not (free))))
  (:action drop
    :parameters (?b - ball ?r - room)
    :precondition (and (robot ?r) (carry ?b))
    :effect (and (at ?b ?r) (free) (not (carry ?b)))))
"#;

/// Random connected instance with at most six objects.
fn random_instance(seed: u64, unit: bool) -> (Domain, Problem) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cost = if unit { 1 } else { rng.gen_range(1..=3) };
    let d = parse_domain(&ROOMS.replace("COST", &cost.to_string())).unwrap();
    let n_rooms = rng.gen_range(2..=3);
    let n_balls = rng.gen_range(1..=6 - n_rooms);
    let rooms: Vec<String> = (0..n_rooms).map(|i| format!("r{i}")).collect();
    let balls: Vec<String> = (0..n_balls).map(|i| format!("b{i}")).collect();
    let mut init = vec!["(free)".to_string(), format!("(robot {})", rooms[0])];
    for i in 1..n_rooms {
        let j = rng.gen_range(0..i);
        init.push(format!("(door {} {})", rooms[i], rooms[j]));
        init.push(format!("(door {} {})", rooms[j], rooms[i]));
        if rng.gen_bool(0.3) {
            init.push(format!("(locked {})", rooms[i]));
        }
    }
    let mut goal = Vec::new();
    for b in &balls {
        init.push(format!("(at {b} {})", rooms.choose(&mut rng).unwrap()));
        if rng.gen_bool(0.7) {
            goal.push(format!("(at {b} {})", rooms.choose(&mut rng).unwrap()));
        }
    }
    if rng.gen_bool(0.4) {
        goal.push(format!("(exists (?r # room) (and (at {} ?r) (not (= ?r {}))))", balls[0], rooms[0]));
    }
    if rng.gen_bool(0.3) {
        goal.push(format!("(robot {})", rooms.choose(&mut rng).unwrap()));
    }
    let text = format!(
        "(define (problem p{seed}) (:domain rooms) (:objects {} - room {} - ball) (:init {}) (:goal (and {})))",
        rooms.join(" "),
        balls.join(" "),
        init.join(" "),
        goal.join(" ")
    );
    let p = parse_problem(&text, &d).unwrap();
    (d, p)
}

/// Dijkstra over explicit fact sets using the reference STRIPS semantics.
fn brute_force_optimum(d: &Domain, p: &Problem) -> Option<u32> {
    let actions = ground(d, p).unwrap();
    let u = Universe::new(d, p);
    let mut best: HashMap<State, u32> = HashMap::new();
    let mut heap = BinaryHeap::new();
    best.insert(p.init.clone(), 0);
    heap.push(Reverse((0u32, p.init.iter().cloned().collect::<Vec<_>>())));
    while let Some(Reverse((g, facts))) = heap.pop() {
        let s: State = facts.into_iter().collect();
        if best[&s] < g {
            continue;
        }
        if goal_satisfied(&p.goal, &s, &u) {
            return Some(g);
        }
        for a in actions.iter().filter(|a| applicable(&s, a)) {
            let n = apply(&s, a).unwrap();
            let ng = g + a.cost;
            if best.get(&n).is_none_or(|&b| ng < b) {
                best.insert(n.clone(), ng);
                heap.push(Reverse((ng, n.into_iter().collect())));
            }
        }
    }
    None
}

#[test]
fn empty_plan_when_init_satisfies_goal() {
    let d = parse_domain(&ROOMS.replace("COST", "1")).unwrap();
    let p = parse_problem(
        "(define (problem p) (:domain rooms) (:objects r0 - room b0 - ball) (:init (robot r0) (at b0 r0)) (:goal (at b0 r0)))",
        &d,
    )
    .unwrap();
    for strategy in [Strategy::Gbfs, Strategy::AStar] {
        let plan = plan(&d, &p, &PlannerConfig { strategy, max_expansions: 10 }).unwrap();
        assert!(plan.is_empty());
        assert_eq!(plan.total_cost, 0);
    }
    let actions = ground(&d, &p).unwrap();
    let task = compile(&d, &p, &actions);
    assert_eq!(h_ff(&task, &task.init), Some(0));
}

#[test]
fn single_achiever_gives_heuristic_one() {
    let d = parse_domain(&ROOMS.replace("COST", "1")).unwrap();
    let p = parse_problem(
        "(define (problem p) (:domain rooms) (:objects r0 - room b0 - ball) (:init (robot r0) (at b0 r0) (free)) (:goal (carry b0)))",
        &d,
    )
    .unwrap();
    let actions = ground(&d, &p).unwrap();
    let task = compile(&d, &p, &actions);
    assert_eq!(h_ff(&task, &task.init), Some(1));
    let unreachable = parse_problem(
        "(define (problem p) (:domain rooms) (:objects r0 - room b0 - ball) (:init (robot r0) (free)) (:goal (carry b0)))",
        &d,
    )
    .unwrap();
    let actions = ground(&d, &unreachable).unwrap();
    let task = compile(&d, &unreachable, &actions);
    assert_eq!(h_ff(&task, &task.init), None);
    assert_eq!(plan(&d, &unreachable, &PlannerConfig::default()), Err(PlanError::Unsolvable));
}

#[test]
fn rpg_levels_are_monotone() {
    let (d, p) = random_instance(7, true);
    let actions = ground(&d, &p).unwrap();
    let task = compile(&d, &p, &actions);
    let rpg = RelaxedPlanningGraph::build(&task, &task.init, &GoalNode::False);
    for (a, act) in task.actions.iter().enumerate() {
        if rpg.action_level[a] == u32::MAX {
            continue;
        }
        for &pre in &act.pre {
            assert!(rpg.fact_level[pre] <= rpg.action_level[a]);
        }
        for &f in &act.add {
            assert!(rpg.fact_level[f] <= rpg.action_level[a] + 1);
        }
    }
}

#[test]
fn h_ff_does_not_exceed_unit_cost_optimum() {
    let mut checked = 0;
    for seed in 0..40 {
        let (d, p) = random_instance(seed, true);
        let Some(opt) = brute_force_optimum(&d, &p) else { continue };
        let actions = ground(&d, &p).unwrap();
        let task = compile(&d, &p, &actions);
        let h = h_ff(&task, &task.init).expect("solvable instance has finite h");
        assert!(h <= opt, "seed {seed}: h_ff {h} > optimum {opt}");
        checked += 1;
        if checked == 10 {
            break;
        }
    }
    assert_eq!(checked, 10);
}

#[test]
fn astar_matches_oracle_and_gbfs_is_valid() {
    let mut solvable = 0;
    for seed in 0..50 {
        let (d, p) = random_instance(1000 + seed, false);
        let oracle = brute_force_optimum(&d, &p);
        let astar = plan(&d, &p, &PlannerConfig { strategy: Strategy::AStar, max_expansions: 100_000 });
        let gbfs = plan(&d, &p, &PlannerConfig { strategy: Strategy::Gbfs, max_expansions: 100_000 });
        match oracle {
            Some(opt) => {
                solvable += 1;
                let astar = astar.unwrap();
                assert_eq!(astar.total_cost, opt, "seed {seed}");
                assert_eq!(validate_plan(&d, &p, &astar), Ok(()));
                assert_eq!(validate_plan(&d, &p, &gbfs.unwrap()), Ok(()));
            }
            None => {
                assert_eq!(astar, Err(PlanError::Unsolvable));
                assert_eq!(gbfs, Err(PlanError::Unsolvable));
            }
        }
    }
    assert!(solvable >= 40, "{solvable}");
}

#[test]
fn budget_is_enforced() {
    let (d, p) = (0..100)
        .map(|s| random_instance(s, true))
        .find(|(d, p)| brute_force_optimum(d, p).is_some_and(|c| c >= 4))
        .unwrap();
    let err = plan(&d, &p, &PlannerConfig { strategy: Strategy::AStar, max_expansions: 1 }).unwrap_err();
    assert_eq!(err, PlanError::Budget { expansions: 1 });
}

#[test]
fn validation_reports_failing_step() {
    let scene = kitchen();
    let spec = episode(&scene, task(TaskType::PickAndPlace, ClassKind::Mug, ClassKind::Cabinet), vec![]);
    let demo = generate_demonstration(&scene, &spec, &PlannerConfig::default()).unwrap();
    let problem = household::build_problem(&scene, initial_view(&scene), &spec.goal).unwrap();
    let d = household::domain();
    assert_eq!(validate_plan(d, &problem, &demo.plan), Ok(()));

    for k in 0..demo.plan.len() {
        let mut steps = demo.plan.steps.clone();
        steps.remove(k);
        let err = validate_plan(d, &problem, &Plan::new(steps)).unwrap_err();
        assert!(err.index() >= k, "deleting step {k} failed at {}", err.index());
    }
    let mut reversed = demo.plan.steps.clone();
    reversed.reverse();
    assert!(validate_plan(d, &problem, &Plan::new(reversed)).is_err());
}

fn labels(plan: &Plan) -> Vec<String> {
    plan.steps.iter().map(PlanStep::label).collect()
}

#[test]
fn dirty_mug_plan_interleaves_cleaning() {
    let scene = kitchen();
    let spec = episode(&scene, task(TaskType::PickAndPlace, ClassKind::Mug, ClassKind::Cabinet), vec![dirty(6)]);
    let demo = generate_demonstration(&scene, &spec, &PlannerConfig::default()).unwrap();
    let l = labels(&demo.plan);
    let clean = l.iter().position(|s| s == "(CleanObject mug1 loc3)").expect("cleans the mug");
    let pick = l.iter().position(|s| s.starts_with("(PickupObject mug1")).unwrap();
    let goto_sink = l.iter().position(|s| s.starts_with("(GotoLocation") && s.ends_with("loc3)")).unwrap();
    let put = l.iter().position(|s| s.starts_with("(PutObject mug1 cabinet1")).unwrap();
    let close = l.iter().rposition(|s| s.starts_with("(CloseObject cabinet1")).unwrap();
    assert!(pick < goto_sink && goto_sink < clean && clean < put && put < close, "{l:?}");

    let (state, outcomes) = replay_plan(&scene, &spec, &demo.plan).unwrap();
    assert!(outcomes.iter().all(|o| *o == ActionOutcome::Ok));
    assert!(state.score_goal().unwrap().success);
    assert_eq!(state.step_count, demo.expert_steps);
}

#[test]
fn occupied_microwave_forces_waits_before_heating() {
    let scene = kitchen();
    let spec =
        episode(&scene, task(TaskType::HeatAndPlace, ClassKind::Egg, ClassKind::CounterTop), vec![occupied(3, 3)]);
    let demo = generate_demonstration(&scene, &spec, &PlannerConfig::default()).unwrap();
    let l = labels(&demo.plan);
    let heat = l.iter().position(|s| s.starts_with("(HeatObject egg1 microwave1")).unwrap();
    let waits = l[..heat].iter().filter(|s| s.starts_with("(Wait")).count();
    assert!(waits >= 3, "{l:?}");

    let (state, outcomes) = replay_plan(&scene, &spec, &demo.plan).unwrap();
    assert_eq!(outcomes[heat], ActionOutcome::Ok);
    assert!(outcomes.iter().all(|o| *o == ActionOutcome::Ok));
    assert!(state.score_goal().unwrap().success);
}

#[test]
fn static_plan_has_no_waits_or_cleaning() {
    let scene = kitchen();
    for (tt, obj, rec) in [
        (TaskType::PickAndPlace, ClassKind::Mug, ClassKind::DiningTable),
        (TaskType::HeatAndPlace, ClassKind::Egg, ClassKind::CounterTop),
        (TaskType::CoolAndPlace, ClassKind::Mug, ClassKind::Cabinet),
    ] {
        let spec = episode(&scene, task(tt, obj, rec), vec![]);
        let demo = generate_demonstration(&scene, &spec, &PlannerConfig::default()).unwrap();
        assert!(!demo.plan.is_empty());
        for s in labels(&demo.plan) {
            assert!(!s.starts_with("(Wait") && !s.starts_with("(CleanObject"), "{s}");
        }
        let (state, _) = replay_plan(&scene, &spec, &demo.plan).unwrap();
        assert!(state.score_goal().unwrap().success);
    }
}

#[test]
fn stack_plan_follows_listing_goal() {
    let scene = kitchen();
    let mut t = task(TaskType::StackAndPlace, ClassKind::Egg, ClassKind::DiningTable);
    t.movable_receptacle = Some(ClassKind::Plate);
    let spec = episode(&scene, t, vec![]);
    let demo = generate_demonstration(&scene, &spec, &PlannerConfig::default()).unwrap();
    let (state, outcomes) = replay_plan(&scene, &spec, &demo.plan).unwrap();
    assert!(outcomes.iter().all(|o| o.is_ok()), "{:?}", labels(&demo.plan));
    let score = state.score_goal().unwrap();
    assert_eq!((score.satisfied, score.total), (3, 3));
}

#[test]
fn absent_goal_object_is_unsolvable() {
    let scene = kitchen();
    let spec = episode(&scene, task(TaskType::PickAndPlace, ClassKind::Potato, ClassKind::Cabinet), vec![]);
    assert_eq!(generate_demonstration(&scene, &spec, &PlannerConfig::default()).unwrap_err(), PlanError::Unsolvable);
}

#[test]
fn planning_is_deterministic_and_json_round_trips() {
    let scene = kitchen();
    let spec = episode(&scene, task(TaskType::CleanAndPlace, ClassKind::Cloth, ClassKind::DiningTable), vec![]);
    let a = generate_demonstration(&scene, &spec, &PlannerConfig::default()).unwrap();
    let b = generate_demonstration(&scene, &spec, &PlannerConfig::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(Plan::from_json(&a.plan.to_json()).unwrap(), a.plan);
    let json: serde_json::Value = serde_json::from_str(&a.plan.to_json()).unwrap();
    let first = &json[0];
    let keys: BTreeSet<&str> = first.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, BTreeSet::from(["action", "args", "cost"]));
}
