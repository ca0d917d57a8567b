//! A typed-STRIPS subset of PDDL: parsing, printing, grounding and the
//! apply/goal semantics shared by the planner and the simulator.
//!
//! Goals additionally support `exists`, `forall`, `not` and `=`. Variable
//! typing accepts both `?x - type` and `?x # type`.

mod ground;
mod parser;
mod print;
mod semantics;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ground::{ground, ground_with_cap, instantiate, static_predicates, DEFAULT_GROUNDING_CAP};
pub use parser::{parse_domain, parse_problem};
pub use semantics::{applicable, apply, evaluate, goal_conditions, goal_satisfied, Universe};

/// Predicates every household domain must declare.
pub const AFFORDANCE_PREDICATES: [&str; 4] = ["isClean", "cleanable", "isUsed", "isOccupied"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PddlError {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("arity error: {predicate} expects {expected} arguments, got {found}")]
    Arity { predicate: String, expected: usize, found: usize },
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
    #[error("unbound variable `?{0}`")]
    UnboundVariable(String),
    #[error("type mismatch: `{constant}` is not a `{expected}`")]
    TypeMismatch { constant: String, expected: String },
    #[error("invalid schema `{schema}`: {msg}")]
    InvalidSchema { schema: String, msg: String },
    #[error("domain is missing required predicate `{0}`")]
    MissingPredicate(String),
    #[error("grounding produced more than {cap} actions")]
    GroundingExplosion { cap: usize },
    #[error("action {0} is not applicable")]
    NotApplicable(String),
    #[error("unknown action schema `{0}`")]
    UnknownSchema(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypedName {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomPattern {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl AtomPattern {
    pub fn is_equality(&self) -> bool {
        self.predicate == "="
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LiteralPattern {
    pub atom: AtomPattern,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedName>,
    pub preconditions: Vec<LiteralPattern>,
    pub add: Vec<AtomPattern>,
    pub del: Vec<AtomPattern>,
    pub base_cost: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<TypedName>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: String,
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: Vec<TypeDecl>,
    pub predicates: Vec<PredicateDecl>,
    pub schemas: Vec<ActionSchema>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn schema(&self, name: &str) -> Option<&ActionSchema> {
        self.schemas.iter().find(|s| s.name == name)
    }

    pub fn has_type(&self, name: &str) -> bool {
        self.types.iter().any(|t| t.name == name)
    }

    /// True when `ty` equals `ancestor` or inherits from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        let mut cur = Some(ty);
        let mut guard = 0;
        while let Some(t) = cur {
            if t == ancestor {
                return true;
            }
            guard += 1;
            if guard > self.types.len() + 1 {
                return false;
            }
            cur = self.types.iter().find(|d| d.name == t).and_then(|d| d.parent.as_deref());
        }
        false
    }

    /// Checks that the dynamic-state predicates are declared.
    pub fn check_affordance_predicates(&self) -> Result<(), PddlError> {
        for p in AFFORDANCE_PREDICATES {
            if self.predicate(p).is_none() {
                return Err(PddlError::MissingPredicate(p.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Atom(AtomPattern),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Exists(Vec<TypedName>, Box<Formula>),
    Forall(Vec<TypedName>, Box<Formula>),
}

impl Formula {
    pub fn is_trivially_true(&self) -> bool {
        matches!(self, Formula::And(v) if v.is_empty())
    }

    /// Depth-first search for an atom with the given predicate.
    pub fn mentions(&self, predicate: &str) -> bool {
        match self {
            Formula::Atom(a) => a.predicate == predicate,
            Formula::Not(f) | Formula::Exists(_, f) | Formula::Forall(_, f) => f.mentions(predicate),
            Formula::And(v) => v.iter().any(|f| f.mentions(predicate)),
        }
    }
}

/// A ground atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<S: Into<String>>(predicate: S, args: &[&str]) -> Self {
        Atom { predicate: predicate.into(), args: args.iter().map(|s| s.to_string()).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

pub type State = BTreeSet<Atom>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub name: String,
    pub domain: String,
    pub objects: Vec<TypedName>,
    pub init: State,
    pub goal: Formula,
}

impl Problem {
    pub fn object_types(&self) -> BTreeMap<&str, &str> {
        self.objects.iter().map(|o| (o.name.as_str(), o.ty.as_str())).collect()
    }
}

/// A fully instantiated action. Static preconditions are checked during
/// grounding and are not repeated in `pre_pos`/`pre_neg`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre_pos: Vec<Atom>,
    pub pre_neg: Vec<Atom>,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
    pub cost: u32,
}

impl GroundAction {
    pub fn label(&self) -> String {
        if self.args.is_empty() {
            format!("({})", self.name)
        } else {
            format!("({} {})", self.name, self.args.join(" "))
        }
    }
}
