//! The household PDDL domain, goal templates, and the mapping between
//! simulator state and symbolic facts.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::sync::OnceLock;

use crate::pddl::{self, Atom, Domain, Formula, PddlError, Problem, State};
use crate::sim::Action;
use crate::task::{TaskSpec, TaskType};
use crate::world::{ClassKind, LocationId, ObjectId, Scene};

pub const DOMAIN_PDDL: &str = r#"(define (domain household)
  (:requirements :typing :negative-preconditions)
  (:types location receptacle object otype rtype tick)
  (:predicates
    (atLocation ?l - location)
    (objectAtLocation ?o - object ?l - location)
    (receptacleAtLocation ?r - receptacle ?l - location)
    (inReceptacle ?o - object ?r - receptacle)
    (inReceptacleObject ?o - object ?mo - object)
    (loose ?o - object)
    (emptyObject ?mo - object)
    (holds ?o - object)
    (handEmpty)
    (openable ?r - receptacle)
    (opened ?r - receptacle)
    (accessible ?r - receptacle)
    (toggleable ?r - receptacle)
    (isOn ?r - receptacle)
    (objectType ?o - object ?t - otype)
    (receptacleType ?r - receptacle ?t - rtype)
    (isReceptacleObject ?o - object)
    (cleanable ?o - object)
    (isClean ?o - object)
    (isUsed ?o - object)
    (isOccupied ?r - receptacle)
    (busyFor ?r - receptacle ?k - tick)
    (tickPred ?k - tick ?j - tick)
    (lastTick ?k - tick)
    (heatable ?o - object)
    (coolable ?o - object)
    (heater ?r - receptacle)
    (cooler ?r - receptacle)
    (isHot ?o - object)
    (isCool ?o - object)
    (isSink ?l - location))
  (:action GotoLocation
    :parameters (?from - location ?to - location)
    :precondition (and (atLocation ?from) (not (= ?from ?to)))
    :effect (and (atLocation ?to) (not (atLocation ?from))))
  (:action PickupObject
    :parameters (?o - object ?r - receptacle ?l - location)
    :precondition (and (atLocation ?l) (receptacleAtLocation ?r ?l) (objectAtLocation ?o ?l)
                       (inReceptacle ?o ?r) (accessible ?r) (handEmpty))
    :effect (and (holds ?o) (not (inReceptacle ?o ?r)) (not (objectAtLocation ?o ?l)) (not (handEmpty))))
  (:action PickupLooseObject
    :parameters (?o - object ?l - location)
    :precondition (and (atLocation ?l) (objectAtLocation ?o ?l) (loose ?o) (handEmpty))
    :effect (and (holds ?o) (not (loose ?o)) (not (objectAtLocation ?o ?l)) (not (handEmpty))))
  (:action PutObject
    :parameters (?o - object ?r - receptacle ?l - location)
    :precondition (and (atLocation ?l) (receptacleAtLocation ?r ?l) (holds ?o)
                       (accessible ?r) (not (isOccupied ?r)))
    :effect (and (inReceptacle ?o ?r) (objectAtLocation ?o ?l) (handEmpty) (not (holds ?o))))
  (:action PutObjectInObject
    :parameters (?o - object ?mo - object ?r - receptacle ?l - location)
    :precondition (and (atLocation ?l) (receptacleAtLocation ?r ?l) (holds ?o) (isReceptacleObject ?mo)
                       (not (= ?o ?mo)) (objectAtLocation ?mo ?l) (inReceptacle ?mo ?r) (accessible ?r)
                       (emptyObject ?mo) (not (isUsed ?mo)))
    :effect (and (inReceptacleObject ?o ?mo) (handEmpty) (not (holds ?o)) (not (emptyObject ?mo))))
  (:action PutObjectInLooseObject
    :parameters (?o - object ?mo - object ?l - location)
    :precondition (and (atLocation ?l) (holds ?o) (isReceptacleObject ?mo) (not (= ?o ?mo))
                       (objectAtLocation ?mo ?l) (loose ?mo) (emptyObject ?mo) (not (isUsed ?mo)))
    :effect (and (inReceptacleObject ?o ?mo) (handEmpty) (not (holds ?o)) (not (emptyObject ?mo))))
  (:action PutDown
    :parameters (?o - object ?l - location)
    :precondition (and (atLocation ?l) (holds ?o))
    :effect (and (loose ?o) (objectAtLocation ?o ?l) (handEmpty) (not (holds ?o))))
  (:action OpenObject
    :parameters (?r - receptacle ?l - location)
    :precondition (and (atLocation ?l) (receptacleAtLocation ?r ?l) (openable ?r)
                       (not (opened ?r)) (not (isOccupied ?r)))
    :effect (and (opened ?r) (accessible ?r)))
  (:action CloseObject
    :parameters (?r - receptacle ?l - location)
    :precondition (and (atLocation ?l) (receptacleAtLocation ?r ?l) (openable ?r) (opened ?r))
    :effect (and (not (opened ?r)) (not (accessible ?r))))
  (:action ToggleOnObject
    :parameters (?r - receptacle ?l - location)
    :precondition (and (atLocation ?l) (receptacleAtLocation ?r ?l) (toggleable ?r)
                       (not (isOn ?r)) (not (isOccupied ?r)))
    :effect (isOn ?r))
  (:action ToggleOffObject
    :parameters (?r - receptacle ?l - location)
    :precondition (and (atLocation ?l) (receptacleAtLocation ?r ?l) (toggleable ?r) (isOn ?r))
    :effect (not (isOn ?r)))
  (:action HeatObject
    :parameters (?o - object ?r - receptacle ?l - location)
    :precondition (and (atLocation ?l) (receptacleAtLocation ?r ?l) (heater ?r) (heatable ?o)
                       (holds ?o) (not (isOccupied ?r)))
    :effect (and (isHot ?o) (not (isCool ?o)) (not (opened ?r)) (not (accessible ?r)))
    :cost 4)
  (:action CoolObject
    :parameters (?o - object ?r - receptacle ?l - location)
    :precondition (and (atLocation ?l) (receptacleAtLocation ?r ?l) (cooler ?r) (coolable ?o)
                       (holds ?o) (not (isOccupied ?r)))
    :effect (and (isCool ?o) (not (isHot ?o)) (not (opened ?r)) (not (accessible ?r)))
    :cost 4)
  (:action CleanObject
    :parameters (?o - object ?l - location)
    :precondition (and (atLocation ?l) (isSink ?l) (holds ?o) (cleanable ?o))
    :effect (and (isClean ?o) (not (isUsed ?o))))
  (:action Wait
    :parameters (?r - receptacle ?k - tick ?j - tick)
    :precondition (and (busyFor ?r ?k) (tickPred ?k ?j))
    :effect (and (busyFor ?r ?j) (not (busyFor ?r ?k))))
  (:action WaitFree
    :parameters (?r - receptacle ?k - tick)
    :precondition (and (busyFor ?r ?k) (lastTick ?k))
    :effect (and (not (busyFor ?r ?k)) (not (isOccupied ?r)))))
"#;

/// The parsed household domain.
pub fn domain() -> &'static Domain {
    static DOMAIN: OnceLock<Domain> = OnceLock::new();
    DOMAIN.get_or_init(|| {
        let d = pddl::parse_domain(DOMAIN_PDDL).expect("household domain parses");
        d.check_affordance_predicates().expect("household domain declares dynamic predicates");
        d
    })
}

pub fn type_constant(class: ClassKind) -> String {
    format!("{}Type", class.name())
}

pub fn tick_constant(k: u32) -> String {
    format!("t{k}")
}

/// Agent-side state needed besides the object table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentView {
    pub location: LocationId,
    pub holding: Option<ObjectId>,
    pub step: u32,
}

/// Remaining occupancy at `step`.
pub fn remaining_busy(busy_remaining: u32, step: u32) -> u32 {
    busy_remaining.saturating_sub(step)
}

/// Symbolic projection of a simulator state, including static facts.
pub fn project(scene: &Scene, agent: AgentView) -> State {
    let mut s = State::new();
    let loc = |l: LocationId| l.to_string();
    s.insert(Atom::new("atLocation", &[&loc(agent.location)]));
    if agent.holding.is_none() {
        s.insert(Atom::new("handEmpty", &[]));
    }
    for node in &scene.graph.nodes {
        if node.sink {
            s.insert(Atom::new("isSink", &[&loc(node.id)]));
        }
    }
    let mut max_tick = 0;
    for o in scene.objects.values() {
        let n = o.name.as_str();
        let c = o.class;
        if c.is_fixed() {
            s.insert(Atom::new("receptacleAtLocation", &[n, &loc(o.location)]));
            s.insert(Atom::new("receptacleType", &[n, &type_constant(c)]));
            if c.is_openable() {
                s.insert(Atom::new("openable", &[n]));
                if o.open {
                    s.insert(Atom::new("opened", &[n]));
                }
            }
            if !c.is_openable() || o.open {
                s.insert(Atom::new("accessible", &[n]));
            }
            if c.is_toggleable() {
                s.insert(Atom::new("toggleable", &[n]));
            }
            if o.on {
                s.insert(Atom::new("isOn", &[n]));
            }
            if c.is_heater() {
                s.insert(Atom::new("heater", &[n]));
            }
            if c.is_cooler() {
                s.insert(Atom::new("cooler", &[n]));
            }
            let rem = remaining_busy(o.busy_remaining, agent.step);
            if rem > 0 {
                s.insert(Atom::new("isOccupied", &[n]));
                s.insert(Atom::new("busyFor", &[n, &tick_constant(rem)]));
                max_tick = max_tick.max(rem);
            }
            continue;
        }
        s.insert(Atom::new("objectType", &[n, &type_constant(c)]));
        if c.is_receptacle_object() {
            s.insert(Atom::new("isReceptacleObject", &[n]));
            if !scene.objects.values().any(|x| x.inside == Some(o.id)) {
                s.insert(Atom::new("emptyObject", &[n]));
            }
        }
        if c.is_cleanable() {
            s.insert(Atom::new("cleanable", &[n]));
        }
        if c.is_heatable() {
            s.insert(Atom::new("heatable", &[n]));
        }
        if c.is_coolable() {
            s.insert(Atom::new("coolable", &[n]));
        }
        if o.clean {
            s.insert(Atom::new("isClean", &[n]));
        }
        if o.used {
            s.insert(Atom::new("isUsed", &[n]));
        }
        if o.heated {
            s.insert(Atom::new("isHot", &[n]));
        }
        if o.cooled {
            s.insert(Atom::new("isCool", &[n]));
        }
        if agent.holding == Some(o.id) {
            s.insert(Atom::new("holds", &[n]));
            continue;
        }
        match o.inside.and_then(|h| scene.object(h)) {
            Some(host) if host.class.is_fixed() => {
                s.insert(Atom::new("inReceptacle", &[n, &host.name]));
                s.insert(Atom::new("objectAtLocation", &[n, &loc(o.location)]));
            }
            Some(host) => {
                s.insert(Atom::new("inReceptacleObject", &[n, &host.name]));
            }
            None => {
                s.insert(Atom::new("loose", &[n]));
                s.insert(Atom::new("objectAtLocation", &[n, &loc(o.location)]));
            }
        }
    }
    for k in 1..=max_tick {
        if k == 1 {
            s.insert(Atom::new("lastTick", &[&tick_constant(1)]));
        } else {
            s.insert(Atom::new("tickPred", &[&tick_constant(k), &tick_constant(k - 1)]));
        }
    }
    s
}

fn exists_placed(var: &str, class: ClassKind, recep: ClassKind, extra: &str) -> String {
    format!(
        "(exists (?{var} # object) (and (objectType ?{var} {}){extra} (exists (?r # receptacle) (and (receptacleType ?r {}) (inReceptacle ?{var} ?r)))))",
        type_constant(class),
        type_constant(recep)
    )
}

const ALL_CLOSED: &str = "(forall (?re # receptacle) (not (opened ?re)))";

/// Goal formula text for a task. Each top-level conjunct is one scored
/// condition.
pub fn goal_text(task: &TaskSpec) -> String {
    let o = task.target_object;
    let r = task.target_receptacle;
    let clean = " (cleanable ?o) (isClean ?o) (not (isUsed ?o))";
    let mut conj: Vec<String> = Vec::new();
    match task.task_type {
        TaskType::PickAndPlace | TaskType::CleanAndPlace => {
            conj.push(exists_placed("o", o, r, ""));
            if o.is_cleanable() {
                conj.push(exists_placed("o", o, r, clean));
            }
        }
        TaskType::HeatAndPlace | TaskType::CoolAndPlace => {
            let pred = if task.task_type == TaskType::HeatAndPlace { "isHot" } else { "isCool" };
            conj.push(exists_placed("o", o, r, ""));
            conj.push(exists_placed("o", o, r, &format!(" ({pred} ?o)")));
            if o.is_cleanable() {
                conj.push(exists_placed("o", o, r, clean));
            }
        }
        TaskType::PickTwoAndPlace => {
            let two = |extra: &str| {
                let t = type_constant(o);
                let rt = type_constant(r);
                format!(
                    "(exists (?o # object ?p # object) (and (objectType ?o {t}) (objectType ?p {t}) (not (= ?o ?p)){extra} \
                     (exists (?r # receptacle) (and (receptacleType ?r {rt}) (inReceptacle ?o ?r))) \
                     (exists (?s # receptacle) (and (receptacleType ?s {rt}) (inReceptacle ?p ?s)))))"
                )
            };
            conj.push(two(""));
            if o.is_cleanable() {
                conj.push(two(
                    " (cleanable ?o) (isClean ?o) (not (isUsed ?o)) (cleanable ?p) (isClean ?p) (not (isUsed ?p))",
                ));
            }
        }
        TaskType::StackAndPlace => {
            let m = type_constant(task.movable_receptacle.expect("stack task has a movable receptacle"));
            conj.push(format!(
                "(exists (?mo # object) (and (objectType ?mo {m}) (isReceptacleObject ?mo) (cleanable ?mo) (isClean ?mo) (not (isUsed ?mo))))"
            ));
            conj.push(format!(
                "(exists (?mo # object) (and (objectType ?mo {m}) (exists (?r # receptacle) (and (receptacleType ?r {}) \
                 (exists (?o # object) (and (objectType ?o {}) (inReceptacleObject ?o ?mo) (inReceptacle ?mo ?r)))))))",
                type_constant(r),
                type_constant(o)
            ));
        }
    }
    conj.push(ALL_CLOSED.to_string());
    format!("(and {})", conj.join(" "))
}

/// Renders a problem whose init is the projection of the given state.
pub fn problem_text(scene: &Scene, agent: AgentView, goal: &str) -> String {
    let facts = project(scene, agent);
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {})", scene.id);
    out.push_str("  (:domain household)\n  (:objects");
    for n in &scene.graph.nodes {
        let _ = write!(out, " {}", n.id);
    }
    out.push_str(" - location\n   ");
    let mut recs = Vec::new();
    let mut objs = Vec::new();
    for o in scene.objects.values() {
        if o.class.is_fixed() {
            recs.push(o.name.as_str());
        } else {
            objs.push(o.name.as_str());
        }
    }
    if !recs.is_empty() {
        let _ = write!(out, " {} - receptacle", recs.join(" "));
    }
    if !objs.is_empty() {
        let _ = write!(out, " {} - object", objs.join(" "));
    }
    let (fixed, movable): (Vec<ClassKind>, Vec<ClassKind>) = ClassKind::ALL.iter().partition(|c| c.is_fixed());
    let names = |v: &[ClassKind]| v.iter().map(|&c| type_constant(c)).collect::<Vec<_>>().join(" ");
    let _ = write!(out, "\n    {} - otype {} - rtype", names(&movable), names(&fixed));
    let ticks: BTreeSet<&str> = facts.iter().filter(|a| a.predicate == "busyFor").map(|a| a.args[1].as_str()).collect();
    if !ticks.is_empty() {
        let max: u32 = ticks.iter().map(|t| t[1..].parse::<u32>().expect("tick")).max().unwrap_or(0);
        let all: Vec<String> = (1..=max).map(tick_constant).collect();
        let _ = write!(out, "\n    {} - tick", all.join(" "));
    }
    out.push_str(")\n  (:init");
    for f in &facts {
        let _ = write!(out, "\n    {f}");
    }
    let _ = write!(out, ")\n  (:goal {goal}))\n");
    out
}

pub fn build_problem(scene: &Scene, agent: AgentView, goal: &str) -> Result<Problem, PddlError> {
    pddl::parse_problem(&problem_text(scene, agent, goal), domain())
}

pub fn parse_goal(scene: &Scene, goal: &str) -> Result<Formula, PddlError> {
    let agent = AgentView { location: scene.agent_start, holding: None, step: 0 };
    Ok(build_problem(scene, agent, goal)?.goal)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranslateError {
    #[error("unknown plan action `{0}`")]
    UnknownAction(String),
    #[error("unknown constant `{0}` in plan step")]
    UnknownConstant(String),
    #[error("plan step `{0}` has the wrong number of arguments")]
    Arity(String),
}

fn parse_location(s: &str) -> Option<LocationId> {
    s.strip_prefix("loc").and_then(|n| n.parse().ok()).map(LocationId)
}

/// Maps a plan step to the corresponding simulator action.
pub fn to_sim_action(scene: &Scene, name: &str, args: &[String]) -> Result<Action, TranslateError> {
    let obj = |i: usize| -> Result<ObjectId, TranslateError> {
        let a = args.get(i).ok_or_else(|| TranslateError::Arity(name.to_string()))?;
        scene.by_name(a).map(|o| o.id).ok_or_else(|| TranslateError::UnknownConstant(a.clone()))
    };
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(TranslateError::Arity(name.to_string()))
        }
    };
    Ok(match name {
        "GotoLocation" => {
            arity(2)?;
            let to = parse_location(&args[1]).ok_or_else(|| TranslateError::UnknownConstant(args[1].clone()))?;
            Action::Goto { to }
        }
        "PickupObject" => {
            arity(3)?;
            Action::Pickup { object: obj(0)? }
        }
        "PickupLooseObject" => {
            arity(2)?;
            Action::Pickup { object: obj(0)? }
        }
        "PutObject" | "PutObjectInLooseObject" => {
            arity(3)?;
            Action::Put { object: obj(0)?, receptacle: Some(obj(1)?) }
        }
        "PutObjectInObject" => {
            arity(4)?;
            Action::Put { object: obj(0)?, receptacle: Some(obj(1)?) }
        }
        "PutDown" => {
            arity(2)?;
            Action::Put { object: obj(0)?, receptacle: None }
        }
        "OpenObject" => {
            arity(2)?;
            Action::Open { target: obj(0)? }
        }
        "CloseObject" => {
            arity(2)?;
            Action::Close { target: obj(0)? }
        }
        "ToggleOnObject" => {
            arity(2)?;
            Action::ToggleOn { target: obj(0)? }
        }
        "ToggleOffObject" => {
            arity(2)?;
            Action::ToggleOff { target: obj(0)? }
        }
        "HeatObject" => {
            arity(3)?;
            Action::Heat { object: obj(0)?, appliance: obj(1)? }
        }
        "CoolObject" => {
            arity(3)?;
            Action::Cool { object: obj(0)?, appliance: obj(1)? }
        }
        "CleanObject" => {
            arity(2)?;
            Action::Clean { object: obj(0)? }
        }
        "Wait" => {
            arity(3)?;
            Action::Wait
        }
        "WaitFree" => {
            arity(2)?;
            Action::Wait
        }
        other => return Err(TranslateError::UnknownAction(other.to_string())),
    })
}
