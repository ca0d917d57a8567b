//! Hand-built fixtures shared by unit tests.

use std::collections::BTreeMap;

use crate::household;
use crate::task::{Difficulty, EpisodeSpec, Injection, Mode, Partition, SceneSplit, TaskSpec, TaskType};
use crate::world::{
    AffordanceCategory, ClassKind, Edge, LocationGraph, LocationId, LocationNode, ObjectId, ObjectInstance, RoomType,
    Scene,
};

fn inst(id: u32, name: &str, class: ClassKind, loc: u32, inside: Option<u32>) -> ObjectInstance {
    ObjectInstance {
        id: ObjectId(id),
        name: name.to_string(),
        class,
        location: LocationId(loc),
        inside: inside.map(ObjectId),
        open: false,
        clean: true,
        used: false,
        busy_remaining: 0,
        heated: false,
        cooled: false,
        on: false,
    }
}

/// Line of four locations; the sink is at loc3.
///
/// loc0: countertop1 (mug1, egg1, plate1)
/// loc1: cabinet1 (cloth1), microwave1
/// loc2: fridge1, diningtable1
pub fn kitchen() -> Scene {
    let nodes = (0..4).map(|i| LocationNode { id: LocationId(i), sink: i == 3 }).collect();
    let edges = (0..3).map(|i| Edge { a: LocationId(i), b: LocationId(i + 1), cost: 1 }).collect();
    let objects = [
        inst(1, "countertop1", ClassKind::CounterTop, 0, None),
        inst(2, "cabinet1", ClassKind::Cabinet, 1, None),
        inst(3, "microwave1", ClassKind::Microwave, 1, None),
        inst(4, "fridge1", ClassKind::Fridge, 2, None),
        inst(5, "diningtable1", ClassKind::DiningTable, 2, None),
        inst(6, "mug1", ClassKind::Mug, 0, Some(1)),
        inst(7, "egg1", ClassKind::Egg, 0, Some(1)),
        inst(8, "plate1", ClassKind::Plate, 0, Some(1)),
        inst(9, "cloth1", ClassKind::Cloth, 1, Some(2)),
    ];
    Scene {
        id: "fixture-kitchen".into(),
        room_type: RoomType::Kitchen,
        graph: LocationGraph { nodes, edges },
        objects: objects.into_iter().map(|o| (o.id, o)).collect::<BTreeMap<_, _>>(),
        sink_location: LocationId(3),
        agent_start: LocationId(0),
        seed: 0,
    }
}

pub fn task(task_type: TaskType, object: ClassKind, receptacle: ClassKind) -> TaskSpec {
    TaskSpec { task_type, target_object: object, movable_receptacle: None, target_receptacle: receptacle }
}

pub fn episode(scene: &Scene, task: TaskSpec, injections: Vec<Injection>) -> EpisodeSpec {
    let mode = if injections.is_empty() { Mode::Static } else { Mode::Dynamic };
    EpisodeSpec {
        id: "ep-test".into(),
        scene_id: scene.id.clone(),
        goal: household::goal_text(&task),
        task,
        injections,
        mode,
        difficulty: Difficulty::Basic,
        scene_split: SceneSplit::Seen,
        partition: Partition::Test,
        annotations: Vec::new(),
        expert_steps: 0,
        reference_plan: Vec::new(),
    }
}

pub fn dirty(id: u32) -> Injection {
    Injection { object: ObjectId(id), category: AffordanceCategory::Dirty, duration: None }
}

pub fn used(id: u32) -> Injection {
    Injection { object: ObjectId(id), category: AffordanceCategory::Used, duration: None }
}

pub fn occupied(id: u32, t: u32) -> Injection {
    Injection { object: ObjectId(id), category: AffordanceCategory::Occupied, duration: Some(t) }
}
