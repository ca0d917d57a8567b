use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::reasoner::{Query, Reasoner, ReasonerError, VerdictState};
use crate::sim::{Action, Observation, Status};
use crate::world::{AffordanceCategory, ClassKind, LocationId, ObjectId, Persistence, Scene};

/// What a policy sees at one step.
#[derive(Debug, Clone, Copy)]
pub struct PolicyContext<'a> {
    pub episode: &'a str,
    pub step: u32,
    pub observation: &'a Observation,
    /// Revealed view, forwarded to reasoners only.
    pub latent: &'a Observation,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
    #[error("{action} deferred more than {limit} times")]
    ResolutionLoop { action: Action, limit: u32 },
}

pub trait Policy {
    fn label(&self) -> &'static str;
    /// The next action, or `None` when the policy is finished.
    fn next_action(
        &mut self,
        ctx: &PolicyContext<'_>,
        reasoner: &mut dyn Reasoner,
    ) -> Result<Option<Action>, PolicyError>;
    /// Outcome status of the last emitted action; failure reasons are not
    /// disclosed.
    fn notify(&mut self, status: Status);
}

/// Position in a fixed plan with bounded retries.
#[derive(Debug, Clone)]
pub struct PlanCursor {
    plan: Vec<Action>,
    pos: usize,
    failures: u32,
    retries: u32,
}

impl PlanCursor {
    pub fn new(plan: Vec<Action>, retries: u32) -> Self {
        PlanCursor { plan, pos: 0, failures: 0, retries }
    }

    pub fn current(&self) -> Option<Action> {
        self.plan.get(self.pos).copied()
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> &[Action] {
        &self.plan[self.pos.min(self.plan.len())..]
    }

    pub fn advance(&mut self) {
        self.pos += 1;
        self.failures = 0;
    }

    /// Advances on success, or after `retries` repeated failures.
    pub fn record(&mut self, status: Status) {
        match status {
            Status::Ok => self.advance(),
            Status::Failed => {
                self.failures += 1;
                if self.failures > self.retries {
                    self.advance();
                }
            }
        }
    }
}

/// Executes the static-twin expert plan literally.
#[derive(Debug, Clone)]
pub struct BaselinePolicy {
    cursor: PlanCursor,
}

impl BaselinePolicy {
    pub fn new(plan: Vec<Action>, retries: u32) -> Self {
        BaselinePolicy { cursor: PlanCursor::new(plan, retries) }
    }
}

impl Policy for BaselinePolicy {
    fn label(&self) -> &'static str {
        "vanilla"
    }

    fn next_action(&mut self, _: &PolicyContext<'_>, _: &mut dyn Reasoner) -> Result<Option<Action>, PolicyError> {
        Ok(self.cursor.current())
    }

    fn notify(&mut self, status: Status) {
        self.cursor.record(status);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct AdaptConfig {
    /// Steps between reasoner queries while waiting.
    pub recheck_interval: u32,
    /// Deferrals of one planned action before the episode aborts.
    pub loop_limit: u32,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig { recheck_interval: 1, loop_limit: 100 }
    }
}

/// A planned action held back until its target becomes usable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deferred {
    pub action: Action,
    pub target: ObjectId,
    pub category: AffordanceCategory,
    pub recheck_interval: u32,
    pub inserted_subplan: Vec<Action>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PendingActionMemory {
    pub deferred: Option<Deferred>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Emitted {
    Planned,
    Other,
}

#[derive(Debug, Clone, Default)]
struct Exploration {
    target: Option<ObjectId>,
    exhausted: BTreeSet<LocationId>,
    tried: BTreeSet<ObjectId>,
    reclose: Option<ObjectId>,
}

/// Plan following with affordance checks on dynamic objects: waits out
/// temporary unavailability and splices a cleaning detour for persistent
/// unavailability.
pub struct AdaptPolicy {
    cursor: PlanCursor,
    config: AdaptConfig,
    class_of: BTreeMap<ObjectId, ClassKind>,
    locations: Vec<LocationId>,
    sink: LocationId,
    pub memory: PendingActionMemory,
    subplan: VecDeque<Action>,
    wait_left: u32,
    deferrals: u32,
    deferral_pos: usize,
    last_seen: BTreeMap<ObjectId, LocationId>,
    explore: Exploration,
    emitted: Emitted,
}

/// Objects whose affordance an action depends on, in checking order.
fn critical_objects(a: &Action) -> Vec<ObjectId> {
    match *a {
        Action::Pickup { object } => vec![object],
        Action::Put { object, receptacle: Some(r) } => vec![r, object],
        Action::Open { target } | Action::ToggleOn { target } => vec![target],
        Action::Heat { object, appliance } | Action::Cool { object, appliance } => vec![appliance, object],
        _ => Vec::new(),
    }
}

impl AdaptPolicy {
    pub fn new(scene: &Scene, plan: Vec<Action>, retries: u32, config: AdaptConfig) -> Self {
        AdaptPolicy {
            cursor: PlanCursor::new(plan, retries),
            config,
            class_of: scene.objects.values().map(|o| (o.id, o.class)).collect(),
            locations: scene.graph.ids().collect(),
            sink: scene.sink_location,
            memory: PendingActionMemory::default(),
            subplan: VecDeque::new(),
            wait_left: 0,
            deferrals: 0,
            deferral_pos: usize::MAX,
            last_seen: BTreeMap::new(),
            explore: Exploration::default(),
            emitted: Emitted::Other,
        }
    }

    fn is_dynamic(&self, id: ObjectId) -> bool {
        self.class_of.get(&id).is_some_and(|c| c.is_dynamic())
    }

    /// The remaining plan already cleans `id`, e.g. in a cleaning task.
    fn plan_cleans(&self, id: ObjectId) -> bool {
        self.cursor.remaining().contains(&Action::Clean { object: id })
    }

    fn defer(&mut self, action: Action) -> Result<(), PolicyError> {
        if self.deferral_pos != self.cursor.position() {
            self.deferral_pos = self.cursor.position();
            self.deferrals = 0;
        }
        self.deferrals += 1;
        if self.deferrals > self.config.loop_limit {
            return Err(PolicyError::ResolutionLoop { action, limit: self.config.loop_limit });
        }
        Ok(())
    }

    /// Detour that leaves `target` clean: set down anything else in hand,
    /// take the target to the sink, clean it, come back and restore the
    /// hand so the deferred action can run again.
    fn cleaning_subplan(&self, planned: &Action, target: ObjectId, obs: &Observation) -> Vec<Action> {
        let here = obs.location;
        let held = obs.held();
        let mut plan = Vec::new();
        let mut restore = None;
        if held != Some(target) {
            if let Some(h) = held {
                plan.push(Action::Put { object: h, receptacle: None });
                restore = Some(h);
            }
            plan.push(Action::Pickup { object: target });
        }
        if here != self.sink {
            plan.push(Action::Goto { to: self.sink });
        }
        plan.push(Action::Clean { object: target });
        if here != self.sink {
            plan.push(Action::Goto { to: here });
        }
        let keep_target = held == Some(target) || *planned == Action::Pickup { object: target };
        if !keep_target {
            plan.push(Action::Put { object: target, receptacle: None });
        }
        if let Some(h) = restore {
            plan.push(Action::Pickup { object: h });
        }
        plan
    }

    /// Next step of the search for an object that is out of view: open
    /// closed receptacles here (closing them again if the object is not
    /// inside), then move to where it was last seen or to the next
    /// unexplored location.
    fn explore(&mut self, target: ObjectId, obs: &Observation) -> Option<Action> {
        if self.explore.target != Some(target) {
            self.explore = Exploration { target: Some(target), ..Exploration::default() };
        }
        if let Some(r) = self.explore.reclose.take() {
            return Some(Action::Close { target: r });
        }
        let closed =
            obs.visible.iter().find(|v| v.open == Some(false) && !self.explore.tried.contains(&v.id)).map(|v| v.id);
        if let Some(r) = closed {
            self.explore.tried.insert(r);
            self.explore.reclose = Some(r);
            return Some(Action::Open { target: r });
        }
        self.explore.exhausted.insert(obs.location);
        let remembered = self.last_seen.get(&target).copied().filter(|l| !self.explore.exhausted.contains(l));
        let next = remembered.or_else(|| self.locations.iter().copied().find(|l| !self.explore.exhausted.contains(l)));
        next.map(|to| Action::Goto { to })
    }
}

impl Policy for AdaptPolicy {
    fn label(&self) -> &'static str {
        "adapt"
    }

    fn next_action(
        &mut self,
        ctx: &PolicyContext<'_>,
        reasoner: &mut dyn Reasoner,
    ) -> Result<Option<Action>, PolicyError> {
        let obs = ctx.observation;
        for v in &obs.visible {
            self.last_seen.insert(v.id, obs.location);
        }
        self.emitted = Emitted::Other;
        if let Some(a) = self.subplan.pop_front() {
            return Ok(Some(a));
        }
        if self.wait_left > 0 {
            self.wait_left -= 1;
            return Ok(Some(Action::Wait));
        }
        'plan: while let Some(planned) = self.cursor.current() {
            if let Action::Pickup { object } = planned {
                if obs.held() == Some(object) {
                    self.cursor.advance();
                    continue;
                }
            }
            for target in critical_objects(&planned) {
                if !self.is_dynamic(target) {
                    continue;
                }
                let state = if obs.lookup(target).is_none() {
                    VerdictState::NotVisible
                } else {
                    let class = self.class_of[&target];
                    let query = Query {
                        episode: ctx.episode,
                        step: ctx.step,
                        target,
                        class,
                        observation: obs,
                        latent: ctx.latent,
                    };
                    reasoner.reason(&query)?.state
                };
                match state {
                    VerdictState::Available => {}
                    VerdictState::NotVisible => match self.explore(target, obs) {
                        Some(a) => return Ok(Some(a)),
                        None => {
                            self.cursor.advance();
                            continue 'plan;
                        }
                    },
                    VerdictState::Unavailable(category) => {
                        if category.persistence() == Persistence::Persistent && self.plan_cleans(target) {
                            continue;
                        }
                        self.defer(planned)?;
                        let inserted = match category.persistence() {
                            Persistence::Temporary => {
                                self.wait_left = self.config.recheck_interval.saturating_sub(1);
                                vec![Action::Wait]
                            }
                            Persistence::Persistent => self.cleaning_subplan(&planned, target, obs),
                        };
                        self.memory.deferred = Some(Deferred {
                            action: planned,
                            target,
                            category,
                            recheck_interval: self.config.recheck_interval,
                            inserted_subplan: inserted.clone(),
                        });
                        self.subplan.extend(inserted);
                        return Ok(self.subplan.pop_front());
                    }
                }
            }
            self.memory.deferred = None;
            self.explore = Exploration::default();
            self.emitted = Emitted::Planned;
            return Ok(Some(planned));
        }
        Ok(None)
    }

    fn notify(&mut self, status: Status) {
        if self.emitted == Emitted::Planned {
            self.cursor.record(status);
        }
    }
}
