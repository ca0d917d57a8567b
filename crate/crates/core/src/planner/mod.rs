//! Forward-search planning over grounded STRIPS problems, plan validation,
//! and expert demonstrations for episodes.

mod compile;
mod heuristic;
mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::household::{self, AgentView};
use crate::pddl::{self, apply, goal_satisfied, instantiate, Domain, GroundAction, PddlError, Problem, Universe};
use crate::sim::{self, SimError};
use crate::task::EpisodeSpec;
use crate::world::{shortest_path, LocationId, Scene, WorldError};

pub use compile::{compile, CompiledAction, CompiledTask, GoalNode};
pub use heuristic::{h_ff, h_ff_goal, relaxed_plan, RelaxedPlan, RelaxedPlanningGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Greedy best-first on h_ff.
    Gbfs,
    /// A* with h = 0, i.e. cost-optimal uniform-cost search.
    AStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub strategy: Strategy,
    pub max_expansions: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig { strategy: Strategy::Gbfs, max_expansions: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("problem is unsolvable")]
    Unsolvable,
    #[error("search budget exhausted after {expansions} expansions")]
    Budget { expansions: usize },
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// One plan step in its serialized form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanStep {
    pub action: String,
    pub args: Vec<String>,
    pub cost: u32,
}

impl PlanStep {
    pub fn label(&self) -> String {
        if self.args.is_empty() {
            format!("({})", self.action)
        } else {
            format!("({} {})", self.action, self.args.join(" "))
        }
    }
}

impl From<&GroundAction> for PlanStep {
    fn from(a: &GroundAction) -> Self {
        PlanStep { action: a.name.clone(), args: a.args.clone(), cost: a.cost }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    pub total_cost: u32,
}

impl Plan {
    pub fn new(steps: Vec<PlanStep>) -> Self {
        let total_cost = steps.iter().map(|s| s.cost).sum();
        Plan { steps, total_cost }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The list-of-steps JSON form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.steps).expect("plan steps serialize")
    }

    pub fn from_json(text: &str) -> Result<Plan, serde_json::Error> {
        Ok(Plan::new(serde_json::from_str(text)?))
    }
}

/// Plans over an explicit list of ground actions (whose costs may differ
/// from the schema costs).
pub fn plan_actions(
    domain: &Domain,
    problem: &Problem,
    actions: &[GroundAction],
    config: &PlannerConfig,
) -> Result<Plan, PlanError> {
    let task = compile(domain, problem, actions);
    let idx = match config.strategy {
        Strategy::Gbfs => search::gbfs(&task, config.max_expansions)?,
        Strategy::AStar => search::uniform_cost(&task, config.max_expansions)?,
    };
    Ok(Plan::new(idx.into_iter().map(|i| PlanStep::from(&actions[i])).collect()))
}

pub fn plan(domain: &Domain, problem: &Problem, config: &PlannerConfig) -> Result<Plan, PlanError> {
    let actions = pddl::ground(domain, problem)?;
    plan_actions(domain, problem, &actions, config)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationFailure {
    #[error("step {step} `{label}` is invalid: {reason}")]
    Step { step: usize, label: String, reason: String },
    #[error("goal not satisfied after {steps} steps")]
    GoalUnsatisfied { steps: usize },
}

impl ValidationFailure {
    /// Index of the failing step; the plan length when only the goal fails.
    pub fn index(&self) -> usize {
        match self {
            ValidationFailure::Step { step, .. } => *step,
            ValidationFailure::GoalUnsatisfied { steps } => *steps,
        }
    }
}

/// Replays a plan from the initial state.
pub fn validate_plan(domain: &Domain, problem: &Problem, plan: &Plan) -> Result<(), ValidationFailure> {
    let mut state = problem.init.clone();
    for (i, step) in plan.steps.iter().enumerate() {
        let fail = |e: PddlError| ValidationFailure::Step { step: i, label: step.label(), reason: e.to_string() };
        let a = instantiate(domain, problem, &step.action, &step.args).map_err(fail)?;
        state = apply(&state, &a).map_err(fail)?;
    }
    if goal_satisfied(&problem.goal, &state, &Universe::new(domain, problem)) {
        Ok(())
    } else {
        Err(ValidationFailure::GoalUnsatisfied { steps: plan.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub plan: Plan,
    pub expert_steps: u32,
}

fn location_arg(s: &str) -> Option<LocationId> {
    s.strip_prefix("loc").and_then(|n| n.parse().ok()).map(LocationId)
}

/// Grounds the household problem for a scene state, with navigation costs
/// set to shortest-path lengths.
pub fn ground_household(scene: &Scene, problem: &Problem) -> Result<Vec<GroundAction>, PlanError> {
    let mut actions = pddl::ground(household::domain(), problem)?;
    for a in &mut actions {
        if a.name == "GotoLocation" {
            let (Some(from), Some(to)) = (location_arg(&a.args[0]), location_arg(&a.args[1])) else {
                continue;
            };
            a.cost = shortest_path(&scene.graph, from, to)?.max(1);
        }
    }
    Ok(actions)
}

/// Plans the expert demonstration for an episode from its reset state,
/// including injected violations.
pub fn generate_demonstration(
    scene: &Scene,
    spec: &EpisodeSpec,
    config: &PlannerConfig,
) -> Result<Demonstration, PlanError> {
    let state = sim::reset(scene, spec)?;
    let problem = household::build_problem(&state.scene, state.agent_view(), &spec.goal)?;
    let actions = ground_household(&state.scene, &problem)?;
    let plan = plan_actions(household::domain(), &problem, &actions, config)?;
    Ok(Demonstration { expert_steps: plan.total_cost, plan })
}

/// The view used for planning from a fresh episode.
pub fn initial_view(scene: &Scene) -> AgentView {
    AgentView { location: scene.agent_start, holding: None, step: 0 }
}

#[cfg(test)]
mod tests;
