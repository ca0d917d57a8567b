use std::collections::{BTreeMap, BTreeSet};

use super::{
    ActionSchema, Atom, AtomPattern, Domain, GroundAction, LiteralPattern, PddlError, Problem, State, Term, TypedName,
};

pub const DEFAULT_GROUNDING_CAP: usize = 1_000_000;

/// Predicates that no schema adds or deletes.
pub fn static_predicates(domain: &Domain) -> BTreeSet<String> {
    let fluent: BTreeSet<&str> =
        domain.schemas.iter().flat_map(|s| s.add.iter().chain(&s.del)).map(|a| a.predicate.as_str()).collect();
    domain.predicates.iter().filter(|p| !fluent.contains(p.name.as_str())).map(|p| p.name.clone()).collect()
}

fn bind(pattern: &AtomPattern, env: &BTreeMap<&str, &str>) -> Option<Atom> {
    let mut args = Vec::with_capacity(pattern.args.len());
    for t in &pattern.args {
        match t {
            Term::Var(v) => args.push((*env.get(v.as_str())?).to_string()),
            Term::Const(c) => args.push(c.clone()),
        }
    }
    Some(Atom { predicate: pattern.predicate.clone(), args })
}

/// Checks a static or equality literal once all its variables are bound.
/// Returns `None` while some variable is still free.
fn static_holds(lit: &LiteralPattern, env: &BTreeMap<&str, &str>, init: &State) -> Option<bool> {
    let atom = bind(&lit.atom, env)?;
    let truth = if lit.atom.is_equality() { atom.args[0] == atom.args[1] } else { init.contains(&atom) };
    Some(truth != lit.negated)
}

struct SchemaGrounder<'a> {
    schema: &'a ActionSchema,
    init: &'a State,
    statics: &'a BTreeSet<String>,
    candidates: Vec<Vec<&'a str>>,
    checks_at: Vec<Vec<&'a LiteralPattern>>,
}

impl<'a> SchemaGrounder<'a> {
    fn new(domain: &'a Domain, problem: &'a Problem, schema: &'a ActionSchema, statics: &'a BTreeSet<String>) -> Self {
        let mut objects: Vec<&TypedName> = problem.objects.iter().collect();
        objects.sort_by(|a, b| a.name.cmp(&b.name));
        let candidates = schema
            .params
            .iter()
            .map(|p| objects.iter().filter(|o| domain.is_subtype(&o.ty, &p.ty)).map(|o| o.name.as_str()).collect())
            .collect();
        // Attach each static literal to the parameter index that completes it.
        let position: BTreeMap<&str, usize> =
            schema.params.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
        let mut checks_at: Vec<Vec<&LiteralPattern>> = vec![Vec::new(); schema.params.len() + 1];
        for lit in &schema.preconditions {
            if !(lit.atom.is_equality() || statics.contains(&lit.atom.predicate)) {
                continue;
            }
            let last = lit
                .atom
                .args
                .iter()
                .filter_map(|t| match t {
                    Term::Var(v) => position.get(v.as_str()).copied(),
                    Term::Const(_) => None,
                })
                .max();
            checks_at[last.map_or(0, |i| i + 1)].push(lit);
        }
        SchemaGrounder { schema, init: &problem.init, statics, candidates, checks_at }
    }

    fn run(
        &self,
        depth: usize,
        env: &mut BTreeMap<&'a str, &'a str>,
        out: &mut Vec<GroundAction>,
        cap: usize,
    ) -> Result<(), PddlError> {
        let ok = self.checks_at[depth].iter().all(|l| static_holds(l, env, self.init).unwrap_or(true));
        if !ok {
            return Ok(());
        }
        if depth == self.schema.params.len() {
            if out.len() >= cap {
                return Err(PddlError::GroundingExplosion { cap });
            }
            out.push(build(self.schema, env, self.statics));
            return Ok(());
        }
        let name = self.schema.params[depth].name.as_str();
        for &c in &self.candidates[depth] {
            env.insert(name, c);
            self.run(depth + 1, env, out, cap)?;
        }
        env.remove(name);
        Ok(())
    }
}

fn build(schema: &ActionSchema, env: &BTreeMap<&str, &str>, statics: &BTreeSet<String>) -> GroundAction {
    let mut pre_pos = Vec::new();
    let mut pre_neg = Vec::new();
    for lit in &schema.preconditions {
        if lit.atom.is_equality() || statics.contains(&lit.atom.predicate) {
            continue;
        }
        let a = bind(&lit.atom, env).expect("all parameters bound");
        if lit.negated {
            pre_neg.push(a);
        } else {
            pre_pos.push(a);
        }
    }
    let ground =
        |v: &[AtomPattern]| -> Vec<Atom> { v.iter().map(|p| bind(p, env).expect("all parameters bound")).collect() };
    GroundAction {
        name: schema.name.clone(),
        args: schema.params.iter().map(|p| env[p.name.as_str()].to_string()).collect(),
        pre_pos,
        pre_neg,
        add: ground(&schema.add),
        del: ground(&schema.del),
        cost: schema.base_cost,
    }
}

pub fn ground(domain: &Domain, problem: &Problem) -> Result<Vec<GroundAction>, PddlError> {
    ground_with_cap(domain, problem, DEFAULT_GROUNDING_CAP)
}

/// Enumerates all type-consistent bindings that satisfy the static
/// preconditions, sorted by schema name then arguments.
pub fn ground_with_cap(domain: &Domain, problem: &Problem, cap: usize) -> Result<Vec<GroundAction>, PddlError> {
    let statics = static_predicates(domain);
    let mut schemas: Vec<&ActionSchema> = domain.schemas.iter().collect();
    schemas.sort_by(|a, b| a.name.cmp(&b.name));
    let mut out = Vec::new();
    for schema in schemas {
        let g = SchemaGrounder::new(domain, problem, schema, &statics);
        g.run(0, &mut BTreeMap::new(), &mut out, cap)?;
    }
    Ok(out)
}

/// Instantiates one schema with explicit arguments, checking types and
/// static preconditions.
pub fn instantiate(domain: &Domain, problem: &Problem, name: &str, args: &[String]) -> Result<GroundAction, PddlError> {
    let schema = domain.schema(name).ok_or_else(|| PddlError::UnknownSchema(name.to_string()))?;
    if schema.params.len() != args.len() {
        return Err(PddlError::Arity { predicate: name.to_string(), expected: schema.params.len(), found: args.len() });
    }
    let types = problem.object_types();
    let mut env = BTreeMap::new();
    for (p, a) in schema.params.iter().zip(args) {
        let ty = types.get(a.as_str()).ok_or_else(|| PddlError::UnknownConstant(a.clone()))?;
        if !domain.is_subtype(ty, &p.ty) {
            return Err(PddlError::TypeMismatch { constant: a.clone(), expected: p.ty.clone() });
        }
        env.insert(p.name.as_str(), a.as_str());
    }
    let statics = static_predicates(domain);
    let label = format!("({} {})", name, args.join(" "));
    for lit in &schema.preconditions {
        if (lit.atom.is_equality() || statics.contains(&lit.atom.predicate))
            && !static_holds(lit, &env, &problem.init).unwrap_or(false)
        {
            return Err(PddlError::NotApplicable(label));
        }
    }
    Ok(build(schema, &env, &statics))
}
