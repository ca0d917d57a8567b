//! Compilation of a grounded problem to integer facts. Negated atoms used by
//! preconditions or goals get a complement fact kept in sync by effects.

use std::collections::{BTreeSet, HashMap};

use fixedbitset::FixedBitSet;

use crate::pddl::{static_predicates, Atom, AtomPattern, Domain, Formula, GroundAction, Problem, Term, Universe};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoalNode {
    True,
    False,
    Fact(usize),
    And(Vec<GoalNode>),
    Or(Vec<GoalNode>),
}

impl GoalNode {
    pub fn holds(&self, state: &FixedBitSet) -> bool {
        match self {
            GoalNode::True => true,
            GoalNode::False => false,
            GoalNode::Fact(f) => state.contains(*f),
            GoalNode::And(v) => v.iter().all(|g| g.holds(state)),
            GoalNode::Or(v) => v.iter().any(|g| g.holds(state)),
        }
    }

    fn and(children: Vec<GoalNode>) -> GoalNode {
        let mut kept = Vec::new();
        for c in children {
            match c {
                GoalNode::True => {}
                GoalNode::False => return GoalNode::False,
                GoalNode::And(inner) => kept.extend(inner),
                other => kept.push(other),
            }
        }
        match kept.len() {
            0 => GoalNode::True,
            1 => kept.pop().expect("one child"),
            _ => GoalNode::And(kept),
        }
    }

    fn or(children: Vec<GoalNode>) -> GoalNode {
        let mut kept = Vec::new();
        for c in children {
            match c {
                GoalNode::False => {}
                GoalNode::True => return GoalNode::True,
                GoalNode::Or(inner) => kept.extend(inner),
                other => kept.push(other),
            }
        }
        match kept.len() {
            0 => GoalNode::False,
            1 => kept.pop().expect("one child"),
            _ => GoalNode::Or(kept),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompiledAction {
    pub pre: Vec<usize>,
    pub add: Vec<usize>,
    pub del: Vec<usize>,
    pub cost: u32,
}

/// A problem over integer facts. Action order follows the input order.
#[derive(Debug, Clone)]
pub struct CompiledTask {
    pub facts: Vec<(Atom, bool)>,
    pub actions: Vec<CompiledAction>,
    pub init: FixedBitSet,
    pub goal: GoalNode,
    /// Actions whose preconditions include each fact.
    pub consumers: Vec<Vec<usize>>,
}

impl CompiledTask {
    pub fn applicable(&self, state: &FixedBitSet, a: usize) -> bool {
        self.actions[a].pre.iter().all(|&p| state.contains(p))
    }

    pub fn successor(&self, state: &FixedBitSet, a: usize) -> FixedBitSet {
        let act = &self.actions[a];
        let mut next = state.clone();
        for &d in &act.del {
            next.set(d, false);
        }
        for &f in &act.add {
            next.insert(f);
        }
        next
    }
}

/// Goal tree with atoms not yet mapped to indices.
enum Proto {
    Const(bool),
    Lit(Atom, bool),
    And(Vec<Proto>),
    Or(Vec<Proto>),
}

struct GoalCompiler<'a> {
    universe: &'a Universe,
    statics: &'a BTreeSet<String>,
    init: &'a BTreeSet<Atom>,
}

impl GoalCompiler<'_> {
    fn atom(&self, p: &AtomPattern, env: &HashMap<String, String>) -> Atom {
        Atom {
            predicate: p.predicate.clone(),
            args: p
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => env[v].clone(),
                    Term::Const(c) => c.clone(),
                })
                .collect(),
        }
    }

    fn compile(&self, f: &Formula, negated: bool, env: &mut HashMap<String, String>) -> Proto {
        match f {
            Formula::Atom(p) => {
                let a = self.atom(p, env);
                if p.is_equality() {
                    Proto::Const((a.args[0] == a.args[1]) != negated)
                } else if self.statics.contains(&p.predicate) {
                    Proto::Const(self.init.contains(&a) != negated)
                } else {
                    Proto::Lit(a, negated)
                }
            }
            Formula::Not(inner) => self.compile(inner, !negated, env),
            Formula::And(items) => self.junction(items.iter(), !negated, negated, env),
            Formula::Exists(vars, body) => self.quantifier(vars, body, negated, negated, env),
            Formula::Forall(vars, body) => self.quantifier(vars, body, !negated, negated, env),
        }
    }

    /// `conjunctive` selects And/Or; children are compiled with `negated`.
    fn junction<'f>(
        &self,
        items: impl Iterator<Item = &'f Formula>,
        conjunctive: bool,
        negated: bool,
        env: &mut HashMap<String, String>,
    ) -> Proto {
        let mut kept = Vec::new();
        for item in items {
            match self.compile(item, negated, env) {
                Proto::Const(b) if b == conjunctive => {}
                Proto::Const(b) => return Proto::Const(b),
                other => kept.push(other),
            }
        }
        if kept.is_empty() {
            Proto::Const(conjunctive)
        } else if conjunctive {
            Proto::And(kept)
        } else {
            Proto::Or(kept)
        }
    }

    /// Enumerates bindings, joining them with And when `conjunctive` and
    /// with Or otherwise.
    fn quantifier(
        &self,
        vars: &[crate::pddl::TypedName],
        body: &Formula,
        conjunctive: bool,
        negated: bool,
        env: &mut HashMap<String, String>,
    ) -> Proto {
        let mut kept = Vec::new();
        let mut stack = vec![0usize; vars.len()];
        let pools: Vec<&[String]> = vars.iter().map(|v| self.universe.objects_of(&v.ty)).collect();
        if pools.iter().any(|p| p.is_empty()) {
            return Proto::Const(conjunctive);
        }
        let saved: Vec<Option<String>> = vars.iter().map(|v| env.get(&v.name).cloned()).collect();
        let result = 'outer: loop {
            for (i, v) in vars.iter().enumerate() {
                env.insert(v.name.clone(), pools[i][stack[i]].clone());
            }
            match self.compile(body, negated, env) {
                Proto::Const(b) if b == conjunctive => {}
                Proto::Const(b) => break 'outer Some(Proto::Const(b)),
                other => kept.push(other),
            }
            // Odometer increment, last variable fastest.
            let mut i = vars.len();
            loop {
                if i == 0 {
                    break 'outer None;
                }
                i -= 1;
                stack[i] += 1;
                if stack[i] < pools[i].len() {
                    break;
                }
                stack[i] = 0;
            }
        };
        for (v, s) in vars.iter().zip(saved) {
            match s {
                Some(x) => env.insert(v.name.clone(), x),
                None => env.remove(&v.name),
            };
        }
        if let Some(r) = result {
            return r;
        }
        if kept.is_empty() {
            Proto::Const(conjunctive)
        } else if conjunctive {
            Proto::And(kept)
        } else {
            Proto::Or(kept)
        }
    }
}

fn collect_lits(p: &Proto, out: &mut Vec<(Atom, bool)>) {
    match p {
        Proto::Const(_) => {}
        Proto::Lit(a, n) => out.push((a.clone(), *n)),
        Proto::And(v) | Proto::Or(v) => v.iter().for_each(|c| collect_lits(c, out)),
    }
}

struct FactTable {
    facts: Vec<(Atom, bool)>,
    index: HashMap<(Atom, bool), usize>,
}

impl FactTable {
    fn id(&mut self, atom: &Atom, negated: bool) -> usize {
        if let Some(&i) = self.index.get(&(atom.clone(), negated)) {
            return i;
        }
        let i = self.facts.len();
        self.facts.push((atom.clone(), negated));
        self.index.insert((atom.clone(), negated), i);
        i
    }

    fn get(&self, atom: &Atom, negated: bool) -> Option<usize> {
        self.index.get(&(atom.clone(), negated)).copied()
    }
}

fn finish(p: Proto, table: &FactTable) -> GoalNode {
    match p {
        Proto::Const(true) => GoalNode::True,
        Proto::Const(false) => GoalNode::False,
        Proto::Lit(a, n) => GoalNode::Fact(table.get(&a, n).expect("goal literal registered")),
        Proto::And(v) => GoalNode::and(v.into_iter().map(|c| finish(c, table)).collect()),
        Proto::Or(v) => GoalNode::or(v.into_iter().map(|c| finish(c, table)).collect()),
    }
}

/// Compiles grounded actions and the problem goal. Static goal literals are
/// folded to constants using `init`.
pub fn compile(domain: &Domain, problem: &Problem, actions: &[GroundAction]) -> CompiledTask {
    let statics = static_predicates(domain);
    let universe = Universe::new(domain, problem);
    let gc = GoalCompiler { universe: &universe, statics: &statics, init: &problem.init };
    let proto = gc.compile(&problem.goal, false, &mut HashMap::new());

    let mut negs: BTreeSet<Atom> = BTreeSet::new();
    let mut goal_lits = Vec::new();
    collect_lits(&proto, &mut goal_lits);
    for (a, n) in &goal_lits {
        if *n {
            negs.insert(a.clone());
        }
    }
    for a in actions {
        negs.extend(a.pre_neg.iter().cloned());
    }

    let mut table = FactTable { facts: Vec::new(), index: HashMap::new() };
    for a in &problem.init {
        table.id(a, false);
    }
    for (a, n) in &goal_lits {
        table.id(a, false);
        if *n {
            table.id(a, true);
        }
    }
    for a in &negs {
        table.id(a, false);
        table.id(a, true);
    }
    let mut compiled = Vec::with_capacity(actions.len());
    for act in actions {
        let mut pre: Vec<usize> = act.pre_pos.iter().map(|a| table.id(a, false)).collect();
        pre.extend(act.pre_neg.iter().map(|a| table.id(a, true)));
        let mut add: Vec<usize> = act.add.iter().map(|a| table.id(a, false)).collect();
        let mut del: Vec<usize> = act.del.iter().map(|a| table.id(a, false)).collect();
        for a in &act.add {
            if negs.contains(a) {
                del.push(table.id(a, true));
            }
        }
        for a in &act.del {
            if negs.contains(a) {
                add.push(table.id(a, true));
            }
        }
        pre.sort_unstable();
        pre.dedup();
        compiled.push(CompiledAction { pre, add, del, cost: act.cost });
    }

    let n = table.facts.len();
    let mut init = FixedBitSet::with_capacity(n);
    for (i, (atom, negated)) in table.facts.iter().enumerate() {
        if problem.init.contains(atom) != *negated {
            init.insert(i);
        }
    }
    let mut consumers = vec![Vec::new(); n];
    for (i, a) in compiled.iter().enumerate() {
        for &p in &a.pre {
            consumers[p].push(i);
        }
    }
    let goal = finish(proto, &table);
    CompiledTask { facts: table.facts, actions: compiled, init, goal, consumers }
}
