//! Task templates and episode specifications shared by the generator, the
//! simulator and the agents.

use serde::{Deserialize, Serialize};

use crate::planner::PlanStep;
use crate::world::{AffordanceCategory, ClassKind, ObjectId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskType {
    PickAndPlace,
    CleanAndPlace,
    HeatAndPlace,
    CoolAndPlace,
    PickTwoAndPlace,
    StackAndPlace,
}

impl TaskType {
    pub const ALL: [TaskType; 6] = [
        TaskType::PickAndPlace,
        TaskType::CleanAndPlace,
        TaskType::HeatAndPlace,
        TaskType::CoolAndPlace,
        TaskType::PickTwoAndPlace,
        TaskType::StackAndPlace,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::PickAndPlace => "PickAndPlace",
            TaskType::CleanAndPlace => "CleanAndPlace",
            TaskType::HeatAndPlace => "HeatAndPlace",
            TaskType::CoolAndPlace => "CoolAndPlace",
            TaskType::PickTwoAndPlace => "PickTwoAndPlace",
            TaskType::StackAndPlace => "StackAndPlace",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_type: TaskType,
    pub target_object: ClassKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub movable_receptacle: Option<ClassKind>,
    pub target_receptacle: ClassKind,
}

impl TaskSpec {
    /// The appliance a heat or cool task must use.
    pub fn appliance(&self) -> Option<ClassKind> {
        match self.task_type {
            TaskType::HeatAndPlace => Some(ClassKind::Microwave),
            TaskType::CoolAndPlace => Some(ClassKind::Fridge),
            _ => None,
        }
    }

    /// Classes whose instances start dirty as part of the task itself.
    pub fn intrinsically_dirty(&self) -> Option<ClassKind> {
        (self.task_type == TaskType::CleanAndPlace).then_some(self.target_object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Basic,
    Advanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SceneSplit {
    Seen,
    Unseen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Partition {
    Train,
    Valid,
    Test,
}

macro_rules! label_impl {
    ($t:ty { $($v:ident => $s:literal),* $(,)? }) => {
        impl $t {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$v => $s),* }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s { $($s => Some(Self::$v),)* _ => None }
            }
        }

        impl std::fmt::Display for $t {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

label_impl!(Mode { Static => "static", Dynamic => "dynamic" });
label_impl!(Difficulty { Basic => "basic", Advanced => "advanced" });
label_impl!(SceneSplit { Seen => "seen", Unseen => "unseen" });
label_impl!(Partition { Train => "train", Valid => "valid", Test => "test" });

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Injection {
    pub object: ObjectId,
    pub category: AffordanceCategory,
    /// Occupancy duration in steps; only for `Occupied`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstructionAnnotation {
    pub goal_text: String,
    pub step_texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub id: String,
    pub scene_id: String,
    pub task: TaskSpec,
    pub injections: Vec<Injection>,
    pub mode: Mode,
    pub difficulty: Difficulty,
    pub scene_split: SceneSplit,
    pub partition: Partition,
    /// PDDL goal formula text.
    pub goal: String,
    pub annotations: Vec<InstructionAnnotation>,
    /// Cost of the expert plan for this episode.
    pub expert_steps: u32,
    /// Expert plan of the static twin, executed literally by plan-following policies.
    pub reference_plan: Vec<PlanStep>,
}

impl EpisodeSpec {
    /// The same episode with every injected violation removed.
    pub fn static_twin(&self) -> EpisodeSpec {
        EpisodeSpec { injections: Vec::new(), ..self.clone() }
    }

    /// Checks the mode and difficulty rules; returns a description of the
    /// first broken rule.
    pub fn difficulty_violation(&self, class_of: impl Fn(ObjectId) -> Option<ClassKind>) -> Option<String> {
        use crate::world::ObjectCategory as C;
        let n = self.injections.len();
        match (self.mode, self.difficulty) {
            (Mode::Static, _) if n > 0 => return Some("static episode has injections".into()),
            (Mode::Dynamic, _) if n == 0 => return Some("dynamic episode without injections".into()),
            (_, Difficulty::Basic) if n > 1 => return Some("basic episode with more than one injection".into()),
            (_, Difficulty::Advanced) if n != 2 => return Some("advanced episode needs exactly two injections".into()),
            _ => {}
        }
        let mut appliance = false;
        let mut container = false;
        for inj in &self.injections {
            let Some(class) = class_of(inj.object) else {
                return Some(format!("injection on unknown object {}", inj.object));
            };
            if !class.applicable_categories().contains(&inj.category) {
                return Some(format!("{} cannot be {}", class.name(), inj.category.as_str()));
            }
            if (inj.category == AffordanceCategory::Occupied) != inj.duration.is_some() {
                return Some("occupancy duration must accompany Occupied only".into());
            }
            match class.category() {
                C::Appliance => appliance = true,
                C::Tableware | C::Cloth => container = true,
                _ => {}
            }
        }
        if self.difficulty == Difficulty::Advanced && !(appliance && container) {
            return Some("advanced episode needs an appliance and a tableware or cloth item".into());
        }
        None
    }
}
