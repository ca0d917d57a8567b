use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::GenError;
use crate::planner::Plan;
use crate::task::{Difficulty, Injection, Mode, TaskSpec, TaskType};
use crate::world::{AffordanceCategory, ClassKind, ObjectCategory, Scene};

/// Restricts sampling to tasks that exercise an appliance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TaskFilter {
    #[default]
    Any,
    NeedsAppliance,
}

fn involves_appliance(t: &TaskSpec) -> bool {
    t.appliance().is_some() || t.target_receptacle.category() == ObjectCategory::Appliance
}

/// All well-formed task instances for a scene, grouped by type.
pub fn candidate_tasks(scene: &Scene) -> BTreeMap<TaskType, Vec<TaskSpec>> {
    let classes = scene.classes();
    let fixed: Vec<ClassKind> = classes.iter().copied().filter(|c| c.is_fixed()).collect();
    let movable: Vec<ClassKind> = classes.iter().copied().filter(|c| c.is_movable()).collect();
    // Receptacle classes already holding some instance would make the
    // placement trivially true.
    let hosts_of = |c: ClassKind| -> BTreeSet<ClassKind> {
        scene.instances_of(c).filter_map(|o| o.inside.and_then(|h| scene.object(h)).map(|h| h.class)).collect()
    };
    let mut out: BTreeMap<TaskType, Vec<TaskSpec>> = BTreeMap::new();
    for &o in &movable {
        let hosts = hosts_of(o);
        for &r in fixed.iter().filter(|r| !hosts.contains(r)) {
            let t =
                |task_type| TaskSpec { task_type, target_object: o, movable_receptacle: None, target_receptacle: r };
            out.entry(TaskType::PickAndPlace).or_default().push(t(TaskType::PickAndPlace));
            if o.is_cleanable() {
                out.entry(TaskType::CleanAndPlace).or_default().push(t(TaskType::CleanAndPlace));
            }
            if o.is_heatable() && classes.contains(&ClassKind::Microwave) && r != ClassKind::Microwave {
                out.entry(TaskType::HeatAndPlace).or_default().push(t(TaskType::HeatAndPlace));
            }
            if o.is_coolable() && classes.contains(&ClassKind::Fridge) && r != ClassKind::Fridge {
                out.entry(TaskType::CoolAndPlace).or_default().push(t(TaskType::CoolAndPlace));
            }
            if scene.count_of(o) >= 2 {
                out.entry(TaskType::PickTwoAndPlace).or_default().push(t(TaskType::PickTwoAndPlace));
            }
        }
        if o.category() == ObjectCategory::Plain {
            for &m in movable.iter().filter(|m| m.is_receptacle_object()) {
                for &r in fixed.iter().filter(|r| !hosts_of(m).contains(r)) {
                    out.entry(TaskType::StackAndPlace).or_default().push(TaskSpec {
                        task_type: TaskType::StackAndPlace,
                        target_object: o,
                        movable_receptacle: Some(m),
                        target_receptacle: r,
                    });
                }
            }
        }
    }
    out
}

/// Samples a task type by weight among the feasible types, then a uniform
/// instance of that type.
pub fn sample_task_with(
    scene: &Scene,
    rng: &mut ChaCha8Rng,
    weights: &BTreeMap<TaskType, f64>,
    filter: TaskFilter,
) -> Result<TaskSpec, GenError> {
    let mut cands = candidate_tasks(scene);
    if filter == TaskFilter::NeedsAppliance {
        for v in cands.values_mut() {
            v.retain(involves_appliance);
        }
    }
    let types: Vec<(TaskType, f64)> = TaskType::ALL
        .iter()
        .filter(|t| cands.get(t).is_some_and(|v| !v.is_empty()))
        .map(|&t| (t, weights.get(&t).copied().unwrap_or(1.0)))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let total: f64 = types.iter().map(|(_, w)| w).sum();
    if types.is_empty() || total <= 0.0 {
        return Err(GenError::NoCompatibleObjects(scene.id.clone()));
    }
    let mut x = rng.gen::<f64>() * total;
    let mut chosen = types[types.len() - 1].0;
    for &(t, w) in &types {
        if x < w {
            chosen = t;
            break;
        }
        x -= w;
    }
    Ok(cands[&chosen].choose(rng).expect("nonempty candidates").clone())
}

pub fn sample_task(scene: &Scene, seed: u64, weights: &BTreeMap<TaskType, f64>) -> Result<TaskSpec, GenError> {
    use rand::SeedableRng;
    sample_task_with(scene, &mut ChaCha8Rng::seed_from_u64(seed), weights, TaskFilter::Any)
}

/// Dynamic-class objects the static plan touches, minus the ones it
/// already cleans.
pub fn task_relevant_dynamic(scene: &Scene, static_plan: &Plan) -> Vec<crate::world::ObjectId> {
    let names: BTreeSet<&str> = static_plan.steps.iter().flat_map(|s| s.args.iter().map(String::as_str)).collect();
    let cleaned: BTreeSet<&str> = static_plan
        .steps
        .iter()
        .filter(|s| s.action == "CleanObject")
        .filter_map(|s| s.args.first().map(String::as_str))
        .collect();
    scene
        .objects
        .values()
        .filter(|o| o.class.is_dynamic() && names.contains(o.name.as_str()) && !cleaned.contains(o.name.as_str()))
        .map(|o| o.id)
        .collect()
}

/// Chooses violations for an episode. Occupancy durations are drawn from
/// `occupancy` (inclusive).
pub fn inject_affordance(
    scene: &Scene,
    static_plan: &Plan,
    mode: Mode,
    difficulty: Difficulty,
    occupancy: (u32, u32),
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Injection>, GenError> {
    if mode == Mode::Static {
        return Ok(Vec::new());
    }
    let relevant = task_relevant_dynamic(scene, static_plan);
    let inject = |id, rng: &mut ChaCha8Rng| {
        let class = scene.object(id).expect("relevant objects exist").class;
        let category = *class.applicable_categories().choose(rng).expect("dynamic class");
        let duration = (category == AffordanceCategory::Occupied).then(|| rng.gen_range(occupancy.0..=occupancy.1));
        Injection { object: id, category, duration }
    };
    match difficulty {
        Difficulty::Basic => {
            let &id = relevant.choose(rng).ok_or(GenError::NoDynamicObject)?;
            Ok(vec![inject(id, rng)])
        }
        Difficulty::Advanced => {
            let cat = |id| scene.object(id).expect("relevant objects exist").class.category();
            let appliances: Vec<_> =
                relevant.iter().copied().filter(|&i| cat(i) == ObjectCategory::Appliance).collect();
            let items: Vec<_> = relevant
                .iter()
                .copied()
                .filter(|&i| matches!(cat(i), ObjectCategory::Tableware | ObjectCategory::Cloth))
                .collect();
            let (Some(&a), Some(&b)) = (appliances.choose(rng), items.choose(rng)) else {
                return Err(GenError::NoDynamicObject);
            };
            Ok(vec![inject(a, rng), inject(b, rng)])
        }
    }
}
