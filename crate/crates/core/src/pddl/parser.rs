use std::collections::{BTreeMap, BTreeSet};

use super::{
    ActionSchema, Atom, AtomPattern, Domain, Formula, LiteralPattern, PddlError, PredicateDecl, Problem, Term,
    TypeDecl, TypedName,
};

#[derive(Debug, Clone)]
enum Sexp {
    Sym { text: String, line: usize, col: usize },
    List { items: Vec<Sexp>, line: usize, col: usize },
}

impl Sexp {
    fn pos(&self) -> (usize, usize) {
        match self {
            Sexp::Sym { line, col, .. } | Sexp::List { line, col, .. } => (*line, *col),
        }
    }

    fn sym(&self) -> Option<&str> {
        match self {
            Sexp::Sym { text, .. } => Some(text),
            Sexp::List { .. } => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List { items, .. } => Some(items),
            Sexp::Sym { .. } => None,
        }
    }

    fn head(&self) -> Option<&str> {
        self.list().and_then(|l| l.first()).and_then(Sexp::sym)
    }
}

fn err_at(node: &Sexp, msg: impl Into<String>) -> PddlError {
    let (line, col) = node.pos();
    PddlError::Parse { line, col, msg: msg.into() }
}

fn read(text: &str) -> Result<Sexp, PddlError> {
    let mut stack: Vec<(Vec<Sexp>, usize, usize)> = Vec::new();
    let mut done: Option<Sexp> = None;
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    let mut cur = String::new();
    let mut cur_pos = (0, 0);

    fn flush(cur: &mut String, pos: (usize, usize), stack: &mut [(Vec<Sexp>, usize, usize)]) -> Result<(), PddlError> {
        if cur.is_empty() {
            return Ok(());
        }
        match stack.last_mut() {
            Some(top) => {
                top.0.push(Sexp::Sym { text: std::mem::take(cur), line: pos.0, col: pos.1 });
                Ok(())
            }
            None => {
                Err(PddlError::Parse { line: pos.0, col: pos.1, msg: format!("unexpected token `{cur}` outside list") })
            }
        }
    }

    while let Some(c) = chars.next() {
        let here = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
        match c {
            ';' => {
                flush(&mut cur, cur_pos, &mut stack)?;
                for c2 in chars.by_ref() {
                    if c2 == '\n' {
                        line += 1;
                        col = 1;
                        break;
                    }
                }
            }
            '(' => {
                flush(&mut cur, cur_pos, &mut stack)?;
                if done.is_some() && stack.is_empty() {
                    return Err(PddlError::Parse {
                        line: here.0,
                        col: here.1,
                        msg: "trailing input after top-level form".into(),
                    });
                }
                stack.push((Vec::new(), here.0, here.1));
            }
            ')' => {
                flush(&mut cur, cur_pos, &mut stack)?;
                let (items, l, c0) =
                    stack.pop().ok_or(PddlError::Parse { line: here.0, col: here.1, msg: "unbalanced `)`".into() })?;
                let node = Sexp::List { items, line: l, col: c0 };
                match stack.last_mut() {
                    Some(top) => top.0.push(node),
                    None => done = Some(node),
                }
            }
            c if c.is_whitespace() => flush(&mut cur, cur_pos, &mut stack)?,
            c => {
                if cur.is_empty() {
                    cur_pos = here;
                }
                cur.push(c);
            }
        }
    }
    flush(&mut cur, cur_pos, &mut stack)?;
    if let Some((_, l, c)) = stack.last() {
        return Err(PddlError::Parse { line: *l, col: *c, msg: "unclosed `(`".into() });
    }
    done.ok_or(PddlError::Parse { line, col, msg: "empty input".into() })
}

/// Parses `a b - t c # u` style lists. Names without a type get `None`.
/// Name, declared type and source node of one typed-list entry.
type TypedEntry<'a> = (String, Option<String>, &'a Sexp);

fn typed_list(items: &[Sexp]) -> Result<Vec<TypedEntry<'_>>, PddlError> {
    let mut out: Vec<(String, Option<String>, &Sexp)> = Vec::new();
    let mut pending_from = 0;
    let mut i = 0;
    while i < items.len() {
        let node = &items[i];
        let s = node.sym().ok_or_else(|| err_at(node, "expected a name in typed list"))?;
        if s == "-" || s == "#" {
            let ty_node = items.get(i + 1).ok_or_else(|| err_at(node, "missing type after separator"))?;
            let ty = ty_node.sym().ok_or_else(|| err_at(ty_node, "expected a type name"))?;
            if pending_from == out.len() {
                return Err(err_at(node, "type separator without names"));
            }
            for entry in &mut out[pending_from..] {
                entry.1 = Some(ty.to_string());
            }
            pending_from = out.len();
            i += 2;
        } else {
            out.push((s.to_string(), None, node));
            i += 1;
        }
    }
    Ok(out)
}

fn strip_var<'a>(node: &Sexp, s: &'a str) -> Result<&'a str, PddlError> {
    s.strip_prefix('?').filter(|v| !v.is_empty()).ok_or_else(|| err_at(node, format!("expected a variable, got `{s}`")))
}

fn typed_vars(domain: &Domain, items: &[Sexp]) -> Result<Vec<TypedName>, PddlError> {
    typed_list(items)?
        .into_iter()
        .map(|(name, ty, node)| {
            let var = strip_var(node, &name)?;
            let ty = ty.ok_or_else(|| err_at(node, format!("variable `{name}` has no type")))?;
            if !domain.has_type(&ty) {
                return Err(PddlError::UnknownType(ty));
            }
            Ok(TypedName { name: var.to_string(), ty })
        })
        .collect()
}

fn expect_head<'a>(node: &'a Sexp, head: &str) -> Result<&'a [Sexp], PddlError> {
    match node.list() {
        Some(items) if items.first().and_then(Sexp::sym) == Some(head) => Ok(&items[1..]),
        _ => Err(err_at(node, format!("expected `({head} ...)`"))),
    }
}

fn header_name(node: &Sexp, kind: &str) -> Result<String, PddlError> {
    let rest = expect_head(node, kind)?;
    match rest {
        [n] => n.sym().map(str::to_string).ok_or_else(|| err_at(n, "expected a name")),
        _ => Err(err_at(node, format!("expected `({kind} <name>)`"))),
    }
}

pub fn parse_domain(text: &str) -> Result<Domain, PddlError> {
    let root = read(text)?;
    let items = expect_head(&root, "define")?;
    let (first, sections) = items.split_first().ok_or_else(|| err_at(&root, "empty define"))?;
    let mut domain = Domain {
        name: header_name(first, "domain")?,
        requirements: Vec::new(),
        types: Vec::new(),
        predicates: Vec::new(),
        schemas: Vec::new(),
    };

    let mut action_nodes = Vec::new();
    for sec in sections {
        match sec.head() {
            Some(":requirements") => {
                for r in &sec.list().unwrap()[1..] {
                    domain
                        .requirements
                        .push(r.sym().ok_or_else(|| err_at(r, "expected requirement flag"))?.to_string());
                }
            }
            Some(":types") => {
                let list = typed_list(&sec.list().unwrap()[1..])?;
                for (name, parent, node) in list {
                    if domain.has_type(&name) {
                        return Err(err_at(node, format!("duplicate type `{name}`")));
                    }
                    domain.types.push(TypeDecl { name, parent });
                }
                for t in &domain.types {
                    if let Some(p) = &t.parent {
                        if !domain.has_type(p) {
                            return Err(PddlError::UnknownType(p.clone()));
                        }
                    }
                }
            }
            Some(":predicates") => {
                for p in &sec.list().unwrap()[1..] {
                    let l = p.list().ok_or_else(|| err_at(p, "expected predicate declaration"))?;
                    let name = l.first().and_then(Sexp::sym).ok_or_else(|| err_at(p, "expected predicate name"))?;
                    if domain.predicate(name).is_some() {
                        return Err(err_at(p, format!("duplicate predicate `{name}`")));
                    }
                    let params = typed_vars(&domain, &l[1..])?;
                    domain.predicates.push(PredicateDecl { name: name.to_string(), params });
                }
            }
            Some(":action") => action_nodes.push(sec),
            Some(other) => return Err(err_at(sec, format!("unsupported domain section `{other}`"))),
            None => return Err(err_at(sec, "expected a domain section")),
        }
    }
    for node in action_nodes {
        let schema = parse_action(&domain, node)?;
        if domain.schema(&schema.name).is_some() {
            return Err(err_at(node, format!("duplicate action `{}`", schema.name)));
        }
        domain.schemas.push(schema);
    }
    Ok(domain)
}

fn parse_action(domain: &Domain, node: &Sexp) -> Result<ActionSchema, PddlError> {
    let items = &node.list().unwrap()[1..];
    let name = items.first().and_then(Sexp::sym).ok_or_else(|| err_at(node, "expected action name"))?.to_string();
    let mut params = Vec::new();
    let mut pre = Vec::new();
    let mut eff: Option<&Sexp> = None;
    let mut cost = 1u32;
    let mut i = 1;
    while i < items.len() {
        let key = items[i].sym().ok_or_else(|| err_at(&items[i], "expected action keyword"))?;
        let val = items.get(i + 1).ok_or_else(|| err_at(&items[i], format!("missing value for {key}")))?;
        match key {
            ":parameters" => {
                params = typed_vars(domain, val.list().ok_or_else(|| err_at(val, "expected parameter list"))?)?
            }
            ":precondition" => {
                let scope: BTreeMap<String, String> = params.iter().map(|p| (p.name.clone(), p.ty.clone())).collect();
                pre = literal_conjunction(domain, val, &scope, true)?;
            }
            ":effect" => eff = Some(val),
            ":cost" => {
                cost = val
                    .sym()
                    .and_then(|s| s.parse().ok())
                    .filter(|&c: &u32| c >= 1)
                    .ok_or_else(|| err_at(val, "cost must be a positive integer"))?
            }
            other => return Err(err_at(&items[i], format!("unsupported action keyword `{other}`"))),
        }
        i += 2;
    }
    let scope: BTreeMap<String, String> = params.iter().map(|p| (p.name.clone(), p.ty.clone())).collect();
    let mut add = Vec::new();
    let mut del = Vec::new();
    if let Some(e) = eff {
        for lit in literal_conjunction(domain, e, &scope, false)? {
            if lit.negated {
                del.push(lit.atom);
            } else {
                add.push(lit.atom);
            }
        }
    }
    if let Some(a) = add.iter().find(|a| del.contains(a)) {
        return Err(PddlError::InvalidSchema {
            schema: name,
            msg: format!("`{}` is both added and deleted", a.predicate),
        });
    }
    Ok(ActionSchema { name, params, preconditions: pre, add, del, base_cost: cost })
}

fn literal_conjunction(
    domain: &Domain,
    node: &Sexp,
    scope: &BTreeMap<String, String>,
    allow_eq: bool,
) -> Result<Vec<LiteralPattern>, PddlError> {
    match node.head() {
        Some("and") => node.list().unwrap()[1..].iter().map(|n| literal(domain, n, scope, allow_eq)).collect(),
        _ => Ok(vec![literal(domain, node, scope, allow_eq)?]),
    }
}

fn literal(
    domain: &Domain,
    node: &Sexp,
    scope: &BTreeMap<String, String>,
    allow_eq: bool,
) -> Result<LiteralPattern, PddlError> {
    if node.head() == Some("not") {
        let inner = match node.list().unwrap() {
            [_, inner] => inner,
            _ => return Err(err_at(node, "`not` takes exactly one argument")),
        };
        return Ok(LiteralPattern { atom: atom_pattern(domain, inner, scope, None, allow_eq)?, negated: true });
    }
    Ok(LiteralPattern { atom: atom_pattern(domain, node, scope, None, allow_eq)?, negated: false })
}

fn atom_pattern(
    domain: &Domain,
    node: &Sexp,
    scope: &BTreeMap<String, String>,
    constants: Option<&BTreeMap<String, String>>,
    allow_eq: bool,
) -> Result<AtomPattern, PddlError> {
    let items = node.list().ok_or_else(|| err_at(node, "expected an atom"))?;
    let pred = items.first().and_then(Sexp::sym).ok_or_else(|| err_at(node, "expected predicate name"))?;
    let mut args = Vec::new();
    for a in &items[1..] {
        let s = a.sym().ok_or_else(|| err_at(a, "expected a term"))?;
        if let Some(v) = s.strip_prefix('?') {
            if !scope.contains_key(v) {
                return Err(PddlError::UnboundVariable(v.to_string()));
            }
            args.push(Term::Var(v.to_string()));
        } else {
            match constants {
                Some(c) if c.contains_key(s) => args.push(Term::Const(s.to_string())),
                _ => return Err(PddlError::UnknownConstant(s.to_string())),
            }
        }
    }
    if pred == "=" {
        if !allow_eq {
            return Err(err_at(node, "equality is not allowed here"));
        }
        if args.len() != 2 {
            return Err(PddlError::Arity { predicate: "=".into(), expected: 2, found: args.len() });
        }
        return Ok(AtomPattern { predicate: pred.to_string(), args });
    }
    let decl = domain.predicate(pred).ok_or_else(|| PddlError::UnknownPredicate(pred.to_string()))?;
    if decl.params.len() != args.len() {
        return Err(PddlError::Arity { predicate: pred.to_string(), expected: decl.params.len(), found: args.len() });
    }
    for (term, param) in args.iter().zip(&decl.params) {
        let ty = match term {
            Term::Var(v) => &scope[v],
            Term::Const(c) => &constants.expect("checked above")[c],
        };
        // Variables may be declared with a supertype; only reject disjoint types.
        if !domain.is_subtype(ty, &param.ty) && !domain.is_subtype(&param.ty, ty) {
            let name = match term {
                Term::Var(v) => format!("?{v}"),
                Term::Const(c) => c.clone(),
            };
            return Err(PddlError::TypeMismatch { constant: name, expected: param.ty.clone() });
        }
    }
    Ok(AtomPattern { predicate: pred.to_string(), args })
}

pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem, PddlError> {
    let root = read(text)?;
    let items = expect_head(&root, "define")?;
    let (first, sections) = items.split_first().ok_or_else(|| err_at(&root, "empty define"))?;
    let name = header_name(first, "problem")?;
    let mut dom_name = String::new();
    let mut objects: Vec<TypedName> = Vec::new();
    let mut init_nodes: &[Sexp] = &[];
    let mut goal_node: Option<&Sexp> = None;
    for sec in sections {
        match sec.head() {
            Some(":domain") => dom_name = header_name(sec, ":domain")?,
            Some(":objects") => {
                for (n, ty, node) in typed_list(&sec.list().unwrap()[1..])? {
                    let ty = ty.ok_or_else(|| err_at(node, format!("object `{n}` has no type")))?;
                    if !domain.has_type(&ty) {
                        return Err(PddlError::UnknownType(ty));
                    }
                    if objects.iter().any(|o| o.name == n) {
                        return Err(err_at(node, format!("duplicate object `{n}`")));
                    }
                    objects.push(TypedName { name: n, ty });
                }
            }
            Some(":init") => init_nodes = &sec.list().unwrap()[1..],
            Some(":goal") => match sec.list().unwrap() {
                [_, g] => goal_node = Some(g),
                _ => return Err(err_at(sec, "`:goal` takes exactly one formula")),
            },
            Some(other) => return Err(err_at(sec, format!("unsupported problem section `{other}`"))),
            None => return Err(err_at(sec, "expected a problem section")),
        }
    }
    if dom_name != domain.name {
        return Err(err_at(&root, format!("problem targets domain `{dom_name}`, not `{}`", domain.name)));
    }
    let constants: BTreeMap<String, String> = objects.iter().map(|o| (o.name.clone(), o.ty.clone())).collect();
    let empty = BTreeMap::new();
    let mut init = BTreeSet::new();
    for n in init_nodes {
        let pat = atom_pattern(domain, n, &empty, Some(&constants), false)?;
        // Init facts must respect declared argument types exactly.
        let decl = domain.predicate(&pat.predicate).expect("validated");
        let mut args = Vec::new();
        for (t, p) in pat.args.into_iter().zip(&decl.params) {
            let Term::Const(c) = t else { unreachable!("init has no variables") };
            if !domain.is_subtype(&constants[&c], &p.ty) {
                return Err(PddlError::TypeMismatch { constant: c, expected: p.ty.clone() });
            }
            args.push(c);
        }
        init.insert(Atom { predicate: pat.predicate, args });
    }
    let goal = match goal_node {
        Some(g) => formula(domain, g, &mut BTreeMap::new(), &constants)?,
        None => Formula::And(Vec::new()),
    };
    Ok(Problem { name, domain: dom_name, objects, init, goal })
}

fn formula(
    domain: &Domain,
    node: &Sexp,
    scope: &mut BTreeMap<String, String>,
    constants: &BTreeMap<String, String>,
) -> Result<Formula, PddlError> {
    let items = node.list().ok_or_else(|| err_at(node, "expected a formula"))?;
    match node.head() {
        Some("and") => {
            Ok(Formula::And(items[1..].iter().map(|f| formula(domain, f, scope, constants)).collect::<Result<_, _>>()?))
        }
        Some("not") => match items {
            [_, inner] => Ok(Formula::Not(Box::new(formula(domain, inner, scope, constants)?))),
            _ => Err(err_at(node, "`not` takes exactly one argument")),
        },
        Some(q @ ("exists" | "forall")) => {
            let (vars_node, body) = match items {
                [_, v, b] => (v, b),
                _ => return Err(err_at(node, format!("`{q}` takes a variable list and a body"))),
            };
            let vars =
                typed_vars(domain, vars_node.list().ok_or_else(|| err_at(vars_node, "expected variable list"))?)?;
            let saved: Vec<(String, Option<String>)> =
                vars.iter().map(|v| (v.name.clone(), scope.insert(v.name.clone(), v.ty.clone()))).collect();
            let inner = formula(domain, body, scope, constants);
            for (name, prev) in saved.into_iter().rev() {
                match prev {
                    Some(p) => scope.insert(name, p),
                    None => scope.remove(&name),
                };
            }
            let inner = Box::new(inner?);
            Ok(if q == "exists" { Formula::Exists(vars, inner) } else { Formula::Forall(vars, inner) })
        }
        Some("or" | "imply" | "when") => Err(err_at(node, "disjunctive goals are not supported")),
        _ => {
            let scope_types: BTreeMap<String, String> = scope.clone();
            let pat = atom_pattern(domain, node, &scope_types, Some(constants), true)?;
            Ok(Formula::Atom(pat))
        }
    }
}
