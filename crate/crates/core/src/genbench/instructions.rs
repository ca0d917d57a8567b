use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::task::{InstructionAnnotation, TaskSpec, TaskType};
use crate::world::ClassKind;

pub const MIN_ANNOTATIONS: usize = 3;
pub const MAX_ANNOTATIONS: usize = 6;

// Placeholders: {a} article, {o} object, {p} preposition, {r} receptacle,
// {m} movable receptacle.
const PICK: [&str; 6] = [
    "Put {a} {o} {p} the {r}.",
    "Place {a} {o} {p} the {r}.",
    "Move {a} {o} to the {r}.",
    "Take {a} {o} and leave it {p} the {r}.",
    "Pick up {a} {o} and set it {p} the {r}.",
    "Bring {a} {o} over to the {r}.",
];
const CLEAN: [&str; 6] = [
    "Clean {a} {o} and put it {p} the {r}.",
    "Wash {a} {o} and place it {p} the {r}.",
    "Rinse {a} {o} in the sink, then put it {p} the {r}.",
    "Put a clean {o} {p} the {r}.",
    "Wash {a} {o} and move it to the {r}.",
    "Clean off {a} {o} and leave it {p} the {r}.",
];
const HEAT: [&str; 6] = [
    "Microwave {a} {o} and place it {p} the {r}.",
    "Heat {a} {o} and put it {p} the {r}.",
    "Warm up {a} {o} in the microwave, then set it {p} the {r}.",
    "Put a heated {o} {p} the {r}.",
    "Cook {a} {o} in the microwave and move it to the {r}.",
    "Heat up {a} {o} and leave it {p} the {r}.",
];
const COOL: [&str; 6] = [
    "Chill {a} {o} and place it {p} the {r}.",
    "Cool {a} {o} in the fridge and put it {p} the {r}.",
    "Put a cold {o} {p} the {r}.",
    "Refrigerate {a} {o}, then set it {p} the {r}.",
    "Cool down {a} {o} and move it to the {r}.",
    "Put {a} {o} in the fridge, then leave it {p} the {r}.",
];
const PICK_TWO: [&str; 6] = [
    "Put two {o}s {p} the {r}.",
    "Place both {o}s {p} the {r}.",
    "Move two {o}s to the {r}.",
    "Collect two {o}s and put them {p} the {r}.",
    "Take a pair of {o}s and set them {p} the {r}.",
    "Bring two {o}s over to the {r}.",
];
const STACK: [&str; 6] = [
    "Put {a} {o} in a {m} and place it {p} the {r}.",
    "Place the {m} with {a} {o} in it {p} the {r}.",
    "Set {a} {o} in a {m}, then move the {m} to the {r}.",
    "Put a {m} holding {a} {o} {p} the {r}.",
    "Load {a} {o} into a {m} and leave it {p} the {r}.",
    "Carry {a} {o} in a {m} to the {r}.",
];

const PICK_VERBS: [&str; 3] = ["Pick up", "Grab", "Take"];
const GO_VERBS: [&str; 3] = ["Go to", "Walk to", "Head to"];
const PUT_VERBS: [&str; 3] = ["Put", "Place", "Set"];

fn templates(t: TaskType) -> &'static [&'static str; 6] {
    match t {
        TaskType::PickAndPlace => &PICK,
        TaskType::CleanAndPlace => &CLEAN,
        TaskType::HeatAndPlace => &HEAT,
        TaskType::CoolAndPlace => &COOL,
        TaskType::PickTwoAndPlace => &PICK_TWO,
        TaskType::StackAndPlace => &STACK,
    }
}

fn preposition(r: ClassKind) -> &'static str {
    if r.is_openable() {
        "in"
    } else {
        "on"
    }
}

fn fill(template: &str, task: &TaskSpec) -> String {
    let o = task.target_object;
    template
        .replace("{a}", o.article())
        .replace("{o}", o.display_name())
        .replace("{p}", preposition(task.target_receptacle))
        .replace("{r}", task.target_receptacle.display_name())
        .replace("{m}", task.movable_receptacle.map_or("container", |m| m.display_name()))
}

fn step_texts(task: &TaskSpec, variant: usize) -> Vec<String> {
    let o = task.target_object.display_name();
    let r = task.target_receptacle.display_name();
    let p = preposition(task.target_receptacle);
    let pick = PICK_VERBS[variant % 3];
    let go = GO_VERBS[variant % 3];
    let put = PUT_VERBS[variant % 3];
    let mut steps = vec![format!("{go} the {o}."), format!("{pick} the {o}.")];
    match task.task_type {
        TaskType::PickAndPlace => {}
        TaskType::CleanAndPlace => {
            steps.push(format!("{go} the sink."));
            steps.push(format!("Wash the {o}."));
        }
        TaskType::HeatAndPlace => {
            steps.push(format!("{go} the microwave."));
            steps.push(format!("Heat the {o} in the microwave."));
        }
        TaskType::CoolAndPlace => {
            steps.push(format!("{go} the fridge."));
            steps.push(format!("Cool the {o} in the fridge."));
        }
        TaskType::PickTwoAndPlace => {
            steps.push(format!("{go} the {r}."));
            steps.push(format!("{put} the {o} {p} the {r}."));
            steps.push(format!("{go} another {o}."));
            steps.push(format!("{pick} the second {o}."));
        }
        TaskType::StackAndPlace => {
            let m = task.movable_receptacle.map_or("container", |m| m.display_name());
            steps.push(format!("{go} the {m}."));
            steps.push(format!("{put} the {o} in the {m}."));
            steps.push(format!("{pick} the {m}."));
            steps.push(format!("{go} the {r}."));
            steps.push(format!("{put} the {m} {p} the {r}."));
            return steps;
        }
    }
    steps.push(format!("{go} the {r}."));
    steps.push(format!("{put} the {o} {p} the {r}."));
    steps
}

/// Renders `k` annotations from distinct templates. The first template of
/// the task type is always included; the rest are chosen by `seed`.
/// Injected violations never influence the text.
pub fn render_instructions(task: &TaskSpec, k: usize, seed: u64) -> Vec<InstructionAnnotation> {
    let k = k.clamp(MIN_ANNOTATIONS, MAX_ANNOTATIONS);
    let mut rest: Vec<usize> = (1..6).collect();
    rest.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen = vec![0];
    chosen.extend(rest.into_iter().take(k - 1));
    let t = templates(task.task_type);
    chosen
        .into_iter()
        .enumerate()
        .map(|(i, idx)| InstructionAnnotation { goal_text: fill(t[idx], task), step_texts: step_texts(task, i) })
        .collect()
}
