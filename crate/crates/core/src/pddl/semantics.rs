use std::collections::BTreeMap;

use super::{Atom, AtomPattern, Domain, Formula, GroundAction, PddlError, Problem, State, Term};

pub fn applicable(state: &State, action: &GroundAction) -> bool {
    action.pre_pos.iter().all(|a| state.contains(a)) && !action.pre_neg.iter().any(|a| state.contains(a))
}

/// `(state \ del) ∪ add`, or `NotApplicable`.
pub fn apply(state: &State, action: &GroundAction) -> Result<State, PddlError> {
    if !applicable(state, action) {
        return Err(PddlError::NotApplicable(action.label()));
    }
    let mut next = state.clone();
    for d in &action.del {
        next.remove(d);
    }
    next.extend(action.add.iter().cloned());
    Ok(next)
}

/// Typed constants available to quantifiers.
#[derive(Debug, Clone, Default)]
pub struct Universe {
    by_type: BTreeMap<String, Vec<String>>,
}

impl Universe {
    pub fn new(domain: &Domain, problem: &Problem) -> Self {
        let mut objects: Vec<_> = problem.objects.iter().collect();
        objects.sort_by(|a, b| a.name.cmp(&b.name));
        let by_type = domain
            .types
            .iter()
            .map(|t| {
                let members =
                    objects.iter().filter(|o| domain.is_subtype(&o.ty, &t.name)).map(|o| o.name.clone()).collect();
                (t.name.clone(), members)
            })
            .collect();
        Universe { by_type }
    }

    pub fn objects_of(&self, ty: &str) -> &[String] {
        self.by_type.get(ty).map_or(&[], Vec::as_slice)
    }
}

fn ground_atom(p: &AtomPattern, env: &BTreeMap<String, String>) -> Atom {
    Atom {
        predicate: p.predicate.clone(),
        args: p
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => env.get(v).cloned().unwrap_or_else(|| format!("?{v}")),
                Term::Const(c) => c.clone(),
            })
            .collect(),
    }
}

fn eval(f: &Formula, state: &State, u: &Universe, env: &mut BTreeMap<String, String>) -> bool {
    match f {
        Formula::Atom(p) => {
            let a = ground_atom(p, env);
            if p.is_equality() {
                a.args[0] == a.args[1]
            } else {
                state.contains(&a)
            }
        }
        Formula::Not(inner) => !eval(inner, state, u, env),
        Formula::And(items) => items.iter().all(|i| eval(i, state, u, env)),
        Formula::Exists(vars, body) => quantify(vars, 0, body, state, u, env, true),
        Formula::Forall(vars, body) => !quantify(vars, 0, body, state, u, env, false),
    }
}

/// With `want = true` searches for a satisfying binding; with `want = false`
/// searches for a falsifying one.
fn quantify(
    vars: &[super::TypedName],
    i: usize,
    body: &Formula,
    state: &State,
    u: &Universe,
    env: &mut BTreeMap<String, String>,
    want: bool,
) -> bool {
    let Some(v) = vars.get(i) else {
        return eval(body, state, u, env) == want;
    };
    let prev = env.get(&v.name).cloned();
    let mut found = false;
    for c in u.objects_of(&v.ty) {
        env.insert(v.name.clone(), c.clone());
        if quantify(vars, i + 1, body, state, u, env, want) {
            found = true;
            break;
        }
    }
    match prev {
        Some(p) => env.insert(v.name.clone(), p),
        None => env.remove(&v.name),
    };
    found
}

/// Evaluates a closed formula, enumerating quantified variables over `u`.
pub fn evaluate(formula: &Formula, state: &State, u: &Universe) -> bool {
    eval(formula, state, u, &mut BTreeMap::new())
}

pub fn goal_satisfied(goal: &Formula, state: &State, u: &Universe) -> bool {
    evaluate(goal, state, u)
}

/// The top-level conjuncts of a goal, each scored as one condition.
pub fn goal_conditions(goal: &Formula) -> Vec<&Formula> {
    match goal {
        Formula::And(items) => items.iter().flat_map(goal_conditions).collect(),
        other => vec![other],
    }
}
