use std::fmt::{self, Display, Formatter, Write};

use super::{Atom, AtomPattern, Domain, Formula, LiteralPattern, Problem, Term, TypedName};

impl Display for Term {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => f.write_str(c),
        }
    }
}

impl Display for AtomPattern {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_char(')')
    }
}

impl Display for LiteralPattern {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "(not {})", self.atom)
        } else {
            write!(f, "{}", self.atom)
        }
    }
}

impl Display for Atom {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_char(')')
    }
}

fn vars(v: &[TypedName]) -> String {
    v.iter().map(|t| format!("?{} - {}", t.name, t.ty)).collect::<Vec<_>>().join(" ")
}

impl Display for Formula {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(inner) => write!(f, "(not {inner})"),
            Formula::And(items) => {
                f.write_str("(and")?;
                for i in items {
                    write!(f, " {i}")?;
                }
                f.write_char(')')
            }
            Formula::Exists(v, body) => write!(f, "(exists ({}) {body})", vars(v)),
            Formula::Forall(v, body) => write!(f, "(forall ({}) {body})", vars(v)),
        }
    }
}

fn conjunction<T: Display>(items: &[T]) -> String {
    match items {
        [one] => one.to_string(),
        _ => {
            let parts: Vec<String> = items.iter().map(ToString::to_string).collect();
            format!("(and {})", parts.join(" ")).replace("(and )", "(and)")
        }
    }
}

impl Display for Domain {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (domain {})", self.name)?;
        if !self.requirements.is_empty() {
            writeln!(f, "  (:requirements {})", self.requirements.join(" "))?;
        }
        if !self.types.is_empty() {
            f.write_str("  (:types")?;
            for t in &self.types {
                match &t.parent {
                    Some(p) => write!(f, " {} - {p}", t.name)?,
                    None => write!(f, " {}", t.name)?,
                }
            }
            f.write_str(")\n")?;
        }
        f.write_str("  (:predicates")?;
        for p in &self.predicates {
            if p.params.is_empty() {
                write!(f, "\n    ({})", p.name)?;
            } else {
                write!(f, "\n    ({} {})", p.name, vars(&p.params))?;
            }
        }
        f.write_str(")\n")?;
        for s in &self.schemas {
            writeln!(f, "  (:action {}", s.name)?;
            writeln!(f, "    :parameters ({})", vars(&s.params))?;
            writeln!(f, "    :precondition {}", conjunction(&s.preconditions))?;
            let mut eff: Vec<String> = s.add.iter().map(ToString::to_string).collect();
            eff.extend(s.del.iter().map(|d| format!("(not {d})")));
            writeln!(f, "    :effect {}", conjunction(&eff))?;
            if s.base_cost != 1 {
                writeln!(f, "    :cost {}", s.base_cost)?;
            }
            f.write_str("  )\n")?;
        }
        f.write_str(")\n")
    }
}

impl Display for Problem {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (problem {})", self.name)?;
        writeln!(f, "  (:domain {})", self.domain)?;
        f.write_str("  (:objects")?;
        for o in &self.objects {
            write!(f, "\n    {} - {}", o.name, o.ty)?;
        }
        f.write_str(")\n  (:init")?;
        for a in &self.init {
            write!(f, "\n    {a}")?;
        }
        f.write_str(")\n")?;
        writeln!(f, "  (:goal {})", self.goal)?;
        f.write_str(")\n")
    }
}
