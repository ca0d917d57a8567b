use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::planner::{generate_demonstration, PlannerConfig};
use crate::sim::replay_plan;
use crate::task::{Difficulty, Mode, TaskSpec, TaskType};
use crate::testing::{episode, kitchen, task};
use crate::world::{build_scene, AffordanceCategory, ClassKind, ObjectCategory, RoomType, SizeParams};

fn uniform() -> BTreeMap<TaskType, f64> {
    TaskType::ALL.iter().map(|&t| (t, 1.0)).collect()
}

fn default_scene(seed: u64, room: RoomType) -> crate::world::Scene {
    build_scene(seed, room, &SizeParams::default_for(room)).unwrap()
}

#[test]
fn sampled_tasks_reference_present_classes() {
    let scene = kitchen();
    let classes = scene.classes();
    for seed in 0..50 {
        let t = sample_task(&scene, seed, &uniform()).unwrap();
        assert!(classes.contains(&t.target_object) && classes.contains(&t.target_receptacle));
        assert_eq!(t.movable_receptacle.is_some(), t.task_type == TaskType::StackAndPlace);
        if let Some(m) = t.movable_receptacle {
            assert!(classes.contains(&m));
        }
    }
}

#[test]
fn bathrooms_never_get_appliance_tasks() {
    for s in 0..20 {
        let scene = default_scene(s, RoomType::Bathroom);
        for seed in 0..20 {
            let t = sample_task(&scene, seed, &uniform()).unwrap();
            assert!(!matches!(t.task_type, TaskType::HeatAndPlace | TaskType::CoolAndPlace));
        }
    }
}

#[test]
fn uniform_weights_give_uniform_task_types() {
    let scene = default_scene(0, RoomType::Kitchen);
    let mut counts: BTreeMap<TaskType, usize> = BTreeMap::new();
    for seed in 0..1000 {
        *counts.entry(sample_task(&scene, seed, &uniform()).unwrap().task_type).or_default() += 1;
    }
    for t in TaskType::ALL {
        let f = counts.get(&t).copied().unwrap_or(0) as f64 / 1000.0;
        assert!((f - 1.0 / 6.0).abs() <= 0.05, "{t:?}: {f}");
    }
    let mut only_heat = uniform();
    for (t, w) in only_heat.iter_mut() {
        *w = if *t == TaskType::HeatAndPlace { 1.0 } else { 0.0 };
    }
    assert_eq!(sample_task(&scene, 3, &only_heat).unwrap().task_type, TaskType::HeatAndPlace);
}

#[test]
fn empty_scene_has_no_compatible_objects() {
    let mut scene = kitchen();
    scene.objects.retain(|_, o| o.class.is_fixed());
    assert!(matches!(sample_task(&scene, 0, &uniform()), Err(GenError::NoCompatibleObjects(_))));
}

fn heat_egg() -> TaskSpec {
    task(TaskType::HeatAndPlace, ClassKind::Egg, ClassKind::DiningTable)
}

#[test]
fn injections_respect_mode_and_difficulty() {
    let scene = kitchen();
    let spec = episode(&scene, heat_egg(), vec![]);
    let plan = generate_demonstration(&scene, &spec, &PlannerConfig::default()).unwrap().plan;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(inject_affordance(&scene, &plan, Mode::Static, Difficulty::Basic, (5, 30), &mut rng).unwrap().is_empty());

    let relevant = task_relevant_dynamic(&scene, &plan);
    assert_eq!(relevant, vec![crate::world::ObjectId(3)]);
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inj = inject_affordance(&scene, &plan, Mode::Dynamic, Difficulty::Basic, (5, 30), &mut rng).unwrap();
        assert_eq!(inj.len(), 1);
        assert_eq!(inj[0].category, AffordanceCategory::Occupied);
        assert!((5..=30).contains(&inj[0].duration.unwrap()));
    }
    // Heating an egg touches no tableware, so Advanced is impossible here.
    assert!(matches!(
        inject_affordance(&scene, &plan, Mode::Dynamic, Difficulty::Advanced, (5, 30), &mut rng),
        Err(GenError::NoDynamicObject)
    ));

    let mug = episode(&scene, task(TaskType::HeatAndPlace, ClassKind::Mug, ClassKind::DiningTable), vec![]);
    let plan = generate_demonstration(&scene, &mug, &PlannerConfig::default()).unwrap().plan;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inj = inject_affordance(&scene, &plan, Mode::Dynamic, Difficulty::Advanced, (5, 30), &mut rng).unwrap();
        let mut dyn_spec = mug.clone();
        dyn_spec.mode = Mode::Dynamic;
        dyn_spec.difficulty = Difficulty::Advanced;
        dyn_spec.injections = inj.clone();
        assert_eq!(dyn_spec.difficulty_violation(|id| scene.object(id).map(|o| o.class)), None);
        assert_eq!(scene.object(inj[0].object).unwrap().class.category(), ObjectCategory::Appliance);
        assert!(matches!(inj[1].category, AffordanceCategory::Used | AffordanceCategory::Dirty));
    }
}

#[test]
fn instructions_are_templated_and_deterministic() {
    let t = task(TaskType::HeatAndPlace, ClassKind::Egg, ClassKind::CounterTop);
    for k in 3..=6 {
        for seed in 0..10 {
            let a = render_instructions(&t, k, seed);
            assert_eq!(a.len(), k);
            assert!(a.iter().any(|x| x.goal_text == "Microwave an egg and place it on the countertop."));
            let distinct: std::collections::BTreeSet<_> = a.iter().map(|x| &x.goal_text).collect();
            assert_eq!(distinct.len(), k);
            assert_eq!(a, render_instructions(&t, k, seed));
            for x in &a {
                let text = x.goal_text.to_lowercase();
                assert!(!text.contains("dirty") && !text.contains("busy") && !text.contains("occupied"));
                assert!(!x.step_texts.is_empty());
            }
        }
    }
    let cab = render_instructions(&task(TaskType::PickAndPlace, ClassKind::SoapBar, ClassKind::Cabinet), 3, 0);
    assert_eq!(cab[0].goal_text, "Put a soap bar in the cabinet.");
}

fn small_config(n: u32) -> DatasetConfig {
    DatasetConfig { n_scenes_seen: 4, n_scenes_unseen: 2, n_demos: n, seed: 11, ..DatasetConfig::default() }
}

#[test]
fn dataset_respects_mode_split_and_solvability() {
    let cfg = small_config(100);
    let ds = build_dataset(&cfg).unwrap();
    let t = &ds.manifest.totals;
    assert_eq!(t.episodes, 100);
    assert!((45..=55).contains(&t.static_episodes), "{}", t.static_episodes);
    assert_eq!(t.static_episodes + t.dynamic, 100);
    assert_eq!(t.scenes, 6);
    assert_eq!(ds.manifest.cells.iter().map(|c| c.episodes).sum::<usize>(), 100);
    assert!(ds.manifest.seen_scenes.iter().all(|s| !ds.manifest.unseen_scenes.contains(s)));
    for e in &ds.episodes {
        let scene = ds.scene_of(e).unwrap();
        assert_eq!(e.difficulty_violation(|id| scene.object(id).map(|o| o.class)), None, "{}", e.id);
        let unseen = ds.manifest.unseen_scenes.contains(&e.scene_id);
        assert_eq!(unseen, e.scene_split == crate::task::SceneSplit::Unseen);
        assert!((3..=6).contains(&e.annotations.len()));
        let plan = &ds.experts[&e.id];
        assert_eq!(plan.total_cost, e.expert_steps);
        let (end, outcomes) = replay_plan(scene, e, plan).unwrap();
        assert!(outcomes.iter().all(|o| o.is_ok()), "{}", e.id);
        let score = end.score_goal().unwrap();
        assert!(score.success, "{} {:?}", e.id, score);
        assert_eq!(end.step_count, e.expert_steps);
        if e.mode == Mode::Static {
            assert_eq!(plan.steps, e.reference_plan);
        }
    }
}

#[test]
fn dataset_is_deterministic_and_round_trips() {
    let cfg = small_config(16);
    let a = build_dataset(&cfg).unwrap();
    let b = build_dataset(&cfg).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&a, dir.path()).unwrap();
    assert!(dir.path().join("domain.pddl").exists());
    let loaded = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded, a);
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = DatasetConfig { static_fraction: 1.5, ..DatasetConfig::default() };
    assert!(matches!(build_dataset(&cfg), Err(GenError::Config(_))));
    let cfg = DatasetConfig { annotations: (2, 6), ..DatasetConfig::default() };
    assert!(matches!(build_dataset(&cfg), Err(GenError::Config(_))));
}
