//! Episode state machine: executes high-level actions against a scene with
//! latent preconditions, renders observations and scores goals.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::household::{self, remaining_busy, AgentView};
use crate::pddl::{evaluate, goal_conditions, PddlError, Universe};
use crate::planner::Plan;
use crate::task::EpisodeSpec;
use crate::world::{shortest_path, AffordanceCategory, ClassKind, LocationId, ObjectId, Scene};

pub const DEFAULT_MAX_STEPS: u32 = 1000;
pub const HEAT_COOL_COST: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Goto {
        to: LocationId,
    },
    Pickup {
        object: ObjectId,
    },
    /// `receptacle: None` puts the object down loose at the current location.
    Put {
        object: ObjectId,
        receptacle: Option<ObjectId>,
    },
    Open {
        target: ObjectId,
    },
    Close {
        target: ObjectId,
    },
    ToggleOn {
        target: ObjectId,
    },
    ToggleOff {
        target: ObjectId,
    },
    Clean {
        object: ObjectId,
    },
    Heat {
        object: ObjectId,
        appliance: ObjectId,
    },
    Cool {
        object: ObjectId,
        appliance: ObjectId,
    },
    Wait,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Goto { to } => write!(f, "Goto({to})"),
            Action::Pickup { object } => write!(f, "Pickup({object})"),
            Action::Put { object, receptacle: Some(r) } => write!(f, "Put({object}, {r})"),
            Action::Put { object, receptacle: None } => write!(f, "PutDown({object})"),
            Action::Open { target } => write!(f, "Open({target})"),
            Action::Close { target } => write!(f, "Close({target})"),
            Action::ToggleOn { target } => write!(f, "ToggleOn({target})"),
            Action::ToggleOff { target } => write!(f, "ToggleOff({target})"),
            Action::Clean { object } => write!(f, "Clean({object})"),
            Action::Heat { object, appliance } => write!(f, "Heat({object}, {appliance})"),
            Action::Cool { object, appliance } => write!(f, "Cool({object}, {appliance})"),
            Action::Wait => f.write_str("Wait"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailReason {
    NotVisible,
    PreconditionViolated(AffordanceCategory),
    InvalidTarget,
    BudgetExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionOutcome {
    Ok,
    Failed(FailReason),
}

/// What agents are told about an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Ok,
    Failed,
}

impl ActionOutcome {
    pub fn status(self) -> Status {
        match self {
            ActionOutcome::Ok => Status::Ok,
            ActionOutcome::Failed(_) => Status::Failed,
        }
    }

    pub fn is_ok(self) -> bool {
        self == ActionOutcome::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VisibleObject {
    pub id: ObjectId,
    pub name: String,
    pub class: ClassKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub used: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub busy_remaining: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub location: LocationId,
    pub visible: Vec<VisibleObject>,
    pub holding: Option<VisibleObject>,
}

impl Observation {
    pub fn find(&self, id: ObjectId) -> Option<&VisibleObject> {
        self.visible.iter().find(|v| v.id == id)
    }

    pub fn held(&self) -> Option<ObjectId> {
        self.holding.as_ref().map(|h| h.id)
    }

    /// A visible or held object.
    pub fn lookup(&self, id: ObjectId) -> Option<&VisibleObject> {
        self.find(id).or(self.holding.as_ref().filter(|h| h.id == id))
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("observation serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("episode references unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("episode targets scene `{expected}` but got `{found}`")]
    SceneMismatch { expected: String, found: String },
    #[error("goal cannot be evaluated: {0}")]
    Goal(#[from] PddlError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EpisodeState {
    pub episode_id: String,
    pub scene: Scene,
    pub agent: LocationId,
    pub holding: Option<ObjectId>,
    pub step_count: u32,
    pub max_steps: u32,
    pub rng_seed: u64,
    pub goal: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalScore {
    pub success: bool,
    pub satisfied: u32,
    pub total: u32,
}

pub fn reset(scene: &Scene, spec: &EpisodeSpec) -> Result<EpisodeState, SimError> {
    reset_with_budget(scene, spec, DEFAULT_MAX_STEPS)
}

/// Applies task-intrinsic state and injected violations to a pristine scene.
pub fn reset_with_budget(scene: &Scene, spec: &EpisodeSpec, max_steps: u32) -> Result<EpisodeState, SimError> {
    if scene.id != spec.scene_id {
        return Err(SimError::SceneMismatch { expected: spec.scene_id.clone(), found: scene.id.clone() });
    }
    let mut scene = scene.clone();
    if let Some(class) = spec.task.intrinsically_dirty() {
        for o in scene.objects.values_mut().filter(|o| o.class == class) {
            o.clean = false;
        }
    }
    for inj in &spec.injections {
        let o = scene.objects.get_mut(&inj.object).ok_or(SimError::UnknownObject(inj.object))?;
        match inj.category {
            AffordanceCategory::Dirty => o.clean = false,
            AffordanceCategory::Used => o.used = true,
            AffordanceCategory::Occupied => o.busy_remaining = inj.duration.unwrap_or(0),
        }
    }
    let rng_seed =
        scene.seed ^ u64::from_le_bytes(Sha256::digest(spec.id.as_bytes())[..8].try_into().expect("8 bytes"));
    Ok(EpisodeState {
        episode_id: spec.id.clone(),
        agent: scene.agent_start,
        scene,
        holding: None,
        step_count: 0,
        max_steps,
        rng_seed,
        goal: spec.goal.clone(),
    })
}

impl EpisodeState {
    pub fn agent_view(&self) -> AgentView {
        AgentView { location: self.agent, holding: self.holding, step: self.step_count }
    }

    pub fn budget_exhausted(&self) -> bool {
        self.step_count >= self.max_steps
    }

    /// Occupancy left on an object at the current step.
    pub fn busy(&self, id: ObjectId) -> u32 {
        self.scene.object(id).map_or(0, |o| remaining_busy(o.busy_remaining, self.step_count))
    }

    /// An object is visible when it is at the agent's location and not
    /// enclosed by a closed receptacle. The held object is not listed.
    pub fn is_visible(&self, id: ObjectId) -> bool {
        let Some(o) = self.scene.object(id) else { return false };
        if self.holding == Some(id) || o.location != self.agent {
            return false;
        }
        let mut host = o.inside;
        let mut guard = 0;
        while let Some(h) = host.and_then(|h| self.scene.object(h)) {
            if h.class.is_openable() && !h.open {
                return false;
            }
            host = h.inside;
            guard += 1;
            if guard > self.scene.objects.len() {
                return false;
            }
        }
        true
    }

    pub fn observe(&self, reveal_latent: bool) -> Observation {
        let render = |o: &crate::world::ObjectInstance| VisibleObject {
            id: o.id,
            name: o.name.clone(),
            class: o.class,
            open: o.class.is_openable().then_some(o.open),
            clean: reveal_latent.then_some(o.clean),
            used: reveal_latent.then_some(o.used),
            busy_remaining: reveal_latent.then(|| remaining_busy(o.busy_remaining, self.step_count)),
        };
        let visible = self.scene.objects.values().filter(|o| self.is_visible(o.id)).map(render).collect();
        let holding = self.holding.and_then(|h| self.scene.object(h)).map(render);
        Observation { location: self.agent, visible, holding }
    }

    fn advance(&mut self, cost: u32) {
        self.step_count = (self.step_count + cost).min(self.max_steps);
    }

    /// Moves the held object and anything stacked in it with the agent.
    fn carry(&mut self) {
        let Some(h) = self.holding else { return };
        let loc = self.agent;
        let ids: Vec<ObjectId> =
            self.scene.objects.values().filter(|o| o.id == h || o.inside == Some(h)).map(|o| o.id).collect();
        for id in ids {
            if let Some(o) = self.scene.objects.get_mut(&id) {
                o.location = loc;
            }
        }
    }

    /// Executes one action. Failed actions consume one step and change
    /// nothing else.
    pub fn step(&mut self, action: &Action) -> ActionOutcome {
        if self.budget_exhausted() {
            return ActionOutcome::Failed(FailReason::BudgetExceeded);
        }
        match self.check(action) {
            Ok(cost) => {
                self.execute(action);
                self.advance(cost);
                ActionOutcome::Ok
            }
            Err(reason) => {
                self.advance(1);
                ActionOutcome::Failed(reason)
            }
        }
    }

    fn occupied(&self, id: ObjectId) -> Result<(), FailReason> {
        if self.busy(id) > 0 {
            Err(FailReason::PreconditionViolated(AffordanceCategory::Occupied))
        } else {
            Ok(())
        }
    }

    fn visible_fixed(&self, id: ObjectId) -> Result<&crate::world::ObjectInstance, FailReason> {
        let o = self.scene.object(id).ok_or(FailReason::InvalidTarget)?;
        if !o.class.is_fixed() {
            return Err(FailReason::InvalidTarget);
        }
        if !self.is_visible(id) {
            return Err(FailReason::NotVisible);
        }
        Ok(o)
    }

    fn held(&self, id: ObjectId) -> Result<&crate::world::ObjectInstance, FailReason> {
        if self.holding != Some(id) {
            return Err(FailReason::InvalidTarget);
        }
        self.scene.object(id).ok_or(FailReason::InvalidTarget)
    }

    /// Returns the step cost when the action would succeed.
    fn check(&self, action: &Action) -> Result<u32, FailReason> {
        use FailReason::*;
        match *action {
            Action::Goto { to } => {
                let d = shortest_path(&self.scene.graph, self.agent, to).map_err(|_| InvalidTarget)?;
                Ok(d.max(1))
            }
            Action::Pickup { object } => {
                let o = self.scene.object(object).ok_or(InvalidTarget)?;
                if o.class.is_fixed() || self.holding.is_some() {
                    return Err(InvalidTarget);
                }
                if !self.is_visible(object) {
                    return Err(NotVisible);
                }
                if o.inside.and_then(|h| self.scene.object(h)).is_some_and(|h| h.class.is_movable()) {
                    return Err(InvalidTarget);
                }
                Ok(1)
            }
            Action::Put { object, receptacle } => {
                self.held(object)?;
                let Some(r) = receptacle else { return Ok(1) };
                let host = self.scene.object(r).ok_or(InvalidTarget)?;
                if r == object {
                    return Err(InvalidTarget);
                }
                if !self.is_visible(r) {
                    return Err(NotVisible);
                }
                if host.class.is_fixed() {
                    self.occupied(r)?;
                    if host.class.is_openable() && !host.open {
                        return Err(InvalidTarget);
                    }
                } else {
                    let stacked = host.inside.and_then(|h| self.scene.object(h)).is_some_and(|h| h.class.is_movable());
                    let full = self.scene.objects.values().any(|x| x.inside == Some(r));
                    if !host.class.is_receptacle_object() || stacked || full {
                        return Err(InvalidTarget);
                    }
                    if host.used {
                        return Err(PreconditionViolated(AffordanceCategory::Used));
                    }
                }
                Ok(1)
            }
            Action::Open { target } => {
                let o = self.visible_fixed(target)?;
                if !o.class.is_openable() || o.open {
                    return Err(InvalidTarget);
                }
                self.occupied(target)?;
                Ok(1)
            }
            Action::Close { target } => {
                let o = self.visible_fixed(target)?;
                if !o.class.is_openable() || !o.open {
                    return Err(InvalidTarget);
                }
                Ok(1)
            }
            Action::ToggleOn { target } => {
                let o = self.visible_fixed(target)?;
                if !o.class.is_toggleable() || o.on {
                    return Err(InvalidTarget);
                }
                self.occupied(target)?;
                Ok(1)
            }
            Action::ToggleOff { target } => {
                let o = self.visible_fixed(target)?;
                if !o.class.is_toggleable() || !o.on {
                    return Err(InvalidTarget);
                }
                Ok(1)
            }
            Action::Heat { object, appliance } | Action::Cool { object, appliance } => {
                let heat = matches!(action, Action::Heat { .. });
                let o = self.held(object)?;
                let a = self.visible_fixed(appliance)?;
                let fits = if heat {
                    o.class.is_heatable() && a.class.is_heater()
                } else {
                    o.class.is_coolable() && a.class.is_cooler()
                };
                if !fits {
                    return Err(InvalidTarget);
                }
                self.occupied(appliance)?;
                Ok(HEAT_COOL_COST)
            }
            Action::Clean { object } => {
                let o = self.held(object)?;
                if !o.class.is_cleanable() || self.agent != self.scene.sink_location {
                    return Err(InvalidTarget);
                }
                Ok(1)
            }
            Action::Wait => Ok(1),
        }
    }

    fn execute(&mut self, action: &Action) {
        let agent = self.agent;
        fn obj(s: &mut EpisodeState, id: ObjectId) -> &mut crate::world::ObjectInstance {
            s.scene.objects.get_mut(&id).expect("checked")
        }
        match *action {
            Action::Goto { to } => {
                self.agent = to;
                self.carry();
            }
            Action::Pickup { object } => {
                obj(self, object).inside = None;
                self.holding = Some(object);
            }
            Action::Put { object, receptacle } => {
                let loc = match receptacle {
                    Some(r) => self.scene.object(r).expect("checked").location,
                    None => agent,
                };
                let o = obj(self, object);
                o.inside = receptacle;
                o.location = loc;
                self.holding = None;
                let contained: Vec<ObjectId> =
                    self.scene.objects.values().filter(|x| x.inside == Some(object)).map(|x| x.id).collect();
                for c in contained {
                    obj(self, c).location = loc;
                }
            }
            Action::Open { target } => obj(self, target).open = true,
            Action::Close { target } => obj(self, target).open = false,
            Action::ToggleOn { target } => obj(self, target).on = true,
            Action::ToggleOff { target } => obj(self, target).on = false,
            Action::Heat { object, appliance } => {
                let o = obj(self, object);
                o.heated = true;
                o.cooled = false;
                obj(self, appliance).open = false;
            }
            Action::Cool { object, appliance } => {
                let o = obj(self, object);
                o.cooled = true;
                o.heated = false;
                obj(self, appliance).open = false;
            }
            Action::Clean { object } => {
                let o = obj(self, object);
                o.clean = true;
                o.used = false;
            }
            Action::Wait => {}
        }
    }

    /// Scores the goal on the symbolic projection of the current state.
    pub fn score_goal(&self) -> Result<GoalScore, SimError> {
        let problem = household::build_problem(&self.scene, self.agent_view(), &self.goal)?;
        let universe = Universe::new(household::domain(), &problem);
        let conds = goal_conditions(&problem.goal);
        let satisfied = conds.iter().filter(|c| evaluate(c, &problem.init, &universe)).count() as u32;
        let total = conds.len() as u32;
        Ok(GoalScore { success: satisfied == total, satisfied, total })
    }

    /// Hex digest of the full mutable state, used for frame checks.
    pub fn state_digest(&self) -> String {
        let json = serde_json::to_string(&(&self.scene.objects, self.agent, self.holding)).expect("state serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

/// One line of a trajectory log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: u32,
    pub action: Action,
    pub outcome: ActionOutcome,
    pub observation_digest: String,
}

impl TrajectoryRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("plan step {step} cannot be translated: {source}")]
    Translate { step: usize, source: household::TranslateError },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Executes a plan literally; returns the final state and per-step outcomes.
pub fn replay_plan(
    scene: &Scene,
    spec: &EpisodeSpec,
    plan: &Plan,
) -> Result<(EpisodeState, Vec<ActionOutcome>), ReplayError> {
    let mut state = reset(scene, spec)?;
    let mut outcomes = Vec::with_capacity(plan.len());
    for (i, s) in plan.steps.iter().enumerate() {
        let a = household::to_sim_action(&state.scene, &s.action, &s.args)
            .map_err(|source| ReplayError::Translate { step: i, source })?;
        outcomes.push(state.step(&a));
    }
    Ok((state, outcomes))
}
