//! Text format for domains and problems.
//!
//! The dialect is a small s-expression language; `;` starts a comment that
//! runs to the end of the line.
//!
//! ```text
//! (domain blockwords
//!   (types block agent)
//!   (predicates (on ?x ?y - block) (holding ?a - agent ?x - block) ...)
//!   (action pickup
//!     :params (?a - agent ?x - block)
//!     :actor ?a
//!     :pre ((on-table ?x) (clear ?x) (handempty ?a))
//!     :add ((holding ?a ?x))
//!     :del ((on-table ?x) (clear ?x) (handempty ?a))
//!     :cost 1)
//!   (mutex (on ?x ?y) :vary ?x))
//!
//! (problem demo
//!   (domain blockwords)
//!   (objects a b - block user agent - agent)
//!   (actors user agent)
//!   (turn-taking)
//!   (init (on-table a) ...)
//!   (goal (on a b))
//!   (hypothesis ab (on a b)))
//! ```
//!
//! `:cost` defaults to 1 and `:params` to the empty list. Problems may omit
//! `actors`, `turn-taking`, `goal`, and `hypothesis`.

use std::fmt::{self, Write as _};

use pretcil_core::blockwords::NamedGoal;
use pretcil_core::domain::{
    self, ActionSchema, AtomPattern, Domain, DomainError, MutexTemplate, PredicateDecl, ProblemDef, Term, TypedVar,
};
use pretcil_core::{Atom, Cost, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelTextError {
    #[error("syntax error at {at}: {message}")]
    Syntax { at: Pos, message: String },
    #[error("{}{error}", at.map(|p| format!("at {p}: ")).unwrap_or_default())]
    Semantic { error: DomainError, at: Option<Pos> },
}

impl ModelTextError {
    fn syntax(at: Pos, message: impl Into<String>) -> Self {
        ModelTextError::Syntax {
            at,
            message: message.into(),
        }
    }

    pub fn position(&self) -> Option<Pos> {
        match self {
            ModelTextError::Syntax { at, .. } => Some(*at),
            ModelTextError::Semantic { at, .. } => *at,
        }
    }
}

#[derive(Clone, Debug)]
enum Sexp {
    Symbol(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Symbol(_, p) | Sexp::List(_, p) => *p,
        }
    }

    fn symbol(&self, what: &str) -> Result<&str, ModelTextError> {
        match self {
            Sexp::Symbol(s, _) => Ok(s),
            Sexp::List(_, p) => Err(ModelTextError::syntax(*p, format!("expected {what}, found a list"))),
        }
    }

    fn list(&self, what: &str) -> Result<&[Sexp], ModelTextError> {
        match self {
            Sexp::List(items, _) => Ok(items),
            Sexp::Symbol(s, p) => Err(ModelTextError::syntax(*p, format!("expected {what}, found `{s}`"))),
        }
    }

    /// Position of the first list headed by `head`, or the first symbol equal to it.
    fn locate(&self, name: &str) -> Option<Pos> {
        match self {
            Sexp::Symbol(s, p) => (s == name).then_some(*p),
            Sexp::List(items, p) => {
                if let Some(Sexp::Symbol(h, _)) = items.first() {
                    if h == name {
                        return Some(*p);
                    }
                }
                items.iter().find_map(|i| i.locate(name))
            }
        }
    }
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl Reader<'_> {
    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.column = 1;
        } else {
            self.pos.column += 1;
        }
        Some(c)
    }

    fn skip_blank(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c == ';' {
                while self.chars.peek().is_some_and(|&c| c != '\n') {
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<Option<Sexp>, ModelTextError> {
        self.skip_blank();
        let start = self.pos;
        match self.chars.peek() {
            None => Ok(None),
            Some(')') => Err(ModelTextError::syntax(start, "unexpected `)`")),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_blank();
                    match self.chars.peek() {
                        None => return Err(ModelTextError::syntax(start, "unclosed `(`")),
                        Some(')') => {
                            self.bump();
                            return Ok(Some(Sexp::List(items, start)));
                        }
                        Some(_) => items.extend(self.read()?),
                    }
                }
            }
            Some(_) => {
                let mut text = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    text.push(c);
                    self.bump();
                }
                Ok(Some(Sexp::Symbol(text, start)))
            }
        }
    }
}

/// Reads exactly one top-level form.
fn read_form(text: &str) -> Result<Sexp, ModelTextError> {
    let mut reader = Reader {
        chars: text.chars().peekable(),
        pos: Pos { line: 1, column: 1 },
    };
    let form = reader
        .read()?
        .ok_or_else(|| ModelTextError::syntax(reader.pos, "empty input"))?;
    if let Some(extra) = reader.read()? {
        return Err(ModelTextError::syntax(extra.pos(), "unexpected content after the top-level form"));
    }
    Ok(form)
}

fn header<'a>(form: &'a Sexp, keyword: &str) -> Result<(&'a str, &'a [Sexp]), ModelTextError> {
    let items = form.list(&format!("`({keyword} ...)`"))?;
    match items {
        [Sexp::Symbol(head, _), name, rest @ ..] if head == keyword => Ok((name.symbol("a name")?, rest)),
        [Sexp::Symbol(head, _), ..] if head == keyword => {
            Err(ModelTextError::syntax(form.pos(), format!("`{keyword}` needs a name")))
        }
        _ => Err(ModelTextError::syntax(form.pos(), format!("expected `({keyword} <name> ...)`"))),
    }
}

fn section(item: &Sexp) -> Result<(&str, &[Sexp]), ModelTextError> {
    match item.list("a section")? {
        [head, rest @ ..] => Ok((head.symbol("a section keyword")?, rest)),
        [] => Err(ModelTextError::syntax(item.pos(), "empty section")),
    }
}

/// `a b - t1 c - t2` style declarations, with each name's position.
fn typed_list(items: &[Sexp]) -> Result<Vec<(String, String, Pos)>, ModelTextError> {
    let mut out = Vec::new();
    let mut pending: Vec<(&str, Pos)> = Vec::new();
    let mut iter = items.iter();
    while let Some(item) = iter.next() {
        let name = item.symbol("a name")?;
        if name == "-" {
            let ty = iter
                .next()
                .ok_or_else(|| ModelTextError::syntax(item.pos(), "`-` must be followed by a type"))?
                .symbol("a type")?;
            if pending.is_empty() {
                return Err(ModelTextError::syntax(item.pos(), "type without names"));
            }
            out.extend(pending.drain(..).map(|(n, p)| (n.to_string(), ty.to_string(), p)));
        } else {
            pending.push((name, item.pos()));
        }
    }
    if let Some((name, at)) = pending.first() {
        return Err(ModelTextError::syntax(*at, format!("`{name}` has no type")));
    }
    Ok(out)
}

fn vars(items: &[Sexp]) -> Result<Vec<TypedVar>, ModelTextError> {
    typed_list(items)?
        .into_iter()
        .map(|(name, ty, at)| {
            if name.starts_with('?') {
                Ok(TypedVar { name, ty })
            } else {
                Err(ModelTextError::syntax(at, format!("variable `{name}` must start with `?`")))
            }
        })
        .collect()
}

fn pattern(item: &Sexp) -> Result<AtomPattern, ModelTextError> {
    match item.list("an atom")? {
        [head, args @ ..] => Ok(AtomPattern {
            predicate: head.symbol("a predicate name")?.to_string(),
            args: args
                .iter()
                .map(|a| {
                    let s = a.symbol("a term")?;
                    Ok(if s.starts_with('?') {
                        Term::Var(s.into())
                    } else {
                        Term::Const(s.into())
                    })
                })
                .collect::<Result<_, ModelTextError>>()?,
        }),
        [] => Err(ModelTextError::syntax(item.pos(), "empty atom")),
    }
}

fn ground_atom(item: &Sexp) -> Result<Atom, ModelTextError> {
    let p = pattern(item)?;
    let args = p
        .args
        .into_iter()
        .map(|t| match t {
            Term::Const(c) => Ok(c),
            Term::Var(v) => Err(ModelTextError::syntax(item.pos(), format!("variable `{v}` in a ground atom"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Atom {
        predicate: p.predicate,
        args,
    })
}

fn action(name: &Sexp, rest: &[Sexp]) -> Result<ActionSchema, ModelTextError> {
    let mut schema = ActionSchema {
        name: name.symbol("an action name")?.to_string(),
        params: Vec::new(),
        actor: None,
        pre: Vec::new(),
        add: Vec::new(),
        del: Vec::new(),
        cost: Cost::UNIT,
    };
    let mut seen: Vec<&str> = Vec::new();
    let mut iter = rest.iter();
    while let Some(key) = iter.next() {
        let k = key.symbol("a `:keyword`")?;
        let value = iter
            .next()
            .ok_or_else(|| ModelTextError::syntax(key.pos(), format!("`{k}` needs a value")))?;
        if seen.contains(&k) {
            return Err(ModelTextError::syntax(key.pos(), format!("duplicate `{k}`")));
        }
        seen.push(k);
        let atoms = |v: &Sexp| v.list("a list of atoms")?.iter().map(pattern).collect::<Result<Vec<_>, _>>();
        match k {
            ":params" => schema.params = vars(value.list("a parameter list")?)?,
            ":actor" => schema.actor = Some(value.symbol("the actor variable")?.to_string()),
            ":pre" => schema.pre = atoms(value)?,
            ":add" => schema.add = atoms(value)?,
            ":del" => schema.del = atoms(value)?,
            ":cost" => {
                let text = value.symbol("a cost")?;
                schema.cost = Cost::parse_decimal(text).ok_or_else(|| {
                    ModelTextError::syntax(value.pos(), format!("bad cost `{text}` (non-negative, at most 3 decimals)"))
                })?;
            }
            other => return Err(ModelTextError::syntax(key.pos(), format!("unknown action field `{other}`"))),
        }
    }
    Ok(schema)
}

fn mutex(rest: &[Sexp], at: Pos) -> Result<MutexTemplate, ModelTextError> {
    match rest {
        [pat, key, vary] if matches!(key, Sexp::Symbol(k, _) if k == ":vary") => Ok(MutexTemplate {
            pattern: pattern(pat)?,
            vary: vary.symbol("a variable")?.to_string(),
        }),
        _ => Err(ModelTextError::syntax(at, "expected `(mutex <atom> :vary ?var)`")),
    }
}

fn semantic(form: &Sexp, error: DomainError) -> ModelTextError {
    let name = match &error {
        DomainError::UndeclaredPredicate(n)
        | DomainError::UndeclaredType(n)
        | DomainError::UndeclaredObject(n)
        | DomainError::Duplicate(n)
        | DomainError::Reserved(n) => Some(n.as_str()),
        DomainError::UndeclaredVariable { var, .. } => Some(var.as_str()),
        DomainError::ArityMismatch { predicate, .. } | DomainError::TypeMismatch { predicate, .. } => {
            Some(predicate.as_str())
        }
        DomainError::BadActor { action, .. } => Some(action.as_str()),
        _ => None,
    };
    // Point at a use rather than the declaration where one exists.
    let at = name.and_then(|n| match form {
        Sexp::List(items, _) => {
            let uses: Vec<Pos> = items
                .iter()
                .filter(|i| !matches!(i, Sexp::List(s, _) if matches!(s.first(), Some(Sexp::Symbol(h, _)) if h == "predicates")))
                .filter_map(|i| i.locate(n))
                .collect();
            uses.into_iter().min().or_else(|| form.locate(n))
        }
        Sexp::Symbol(..) => None,
    });
    ModelTextError::Semantic { error, at }
}

/// Parses and validates a domain.
pub fn parse_domain(text: &str) -> Result<Domain, ModelTextError> {
    let form = read_form(text)?;
    let (name, rest) = header(&form, "domain")?;
    let mut domain = Domain {
        name: name.to_string(),
        ..Domain::default()
    };
    for item in rest {
        let (key, body) = section(item)?;
        match key {
            "types" => {
                for t in body {
                    domain.types.push(t.symbol("a type name")?.to_string());
                }
            }
            "predicates" => {
                for decl in body {
                    let items = decl.list("a predicate declaration")?;
                    let (head, params) = items
                        .split_first()
                        .ok_or_else(|| ModelTextError::syntax(decl.pos(), "empty predicate declaration"))?;
                    domain.predicates.push(PredicateDecl {
                        name: head.symbol("a predicate name")?.to_string(),
                        params: vars(params)?,
                    });
                }
            }
            "action" => {
                let (name, fields) = body
                    .split_first()
                    .ok_or_else(|| ModelTextError::syntax(item.pos(), "action needs a name"))?;
                domain.actions.push(action(name, fields)?);
            }
            "mutex" => domain.mutexes.push(mutex(body, item.pos())?),
            other => return Err(ModelTextError::syntax(item.pos(), format!("unknown domain section `{other}`"))),
        }
    }
    domain.validate().map_err(|e| semantic(&form, e))?;
    Ok(domain)
}

/// Parses a problem. Names are checked against a domain only by [`load`].
pub fn parse_problem(text: &str) -> Result<ProblemDef, ModelTextError> {
    let form = read_form(text)?;
    let (name, rest) = header(&form, "problem")?;
    let mut def = ProblemDef {
        name: name.to_string(),
        ..ProblemDef::default()
    };
    let mut domain_seen = false;
    for item in rest {
        let (key, body) = section(item)?;
        match key {
            "domain" => match body {
                [d] => {
                    def.domain = d.symbol("a domain name")?.to_string();
                    domain_seen = true;
                }
                _ => return Err(ModelTextError::syntax(item.pos(), "expected `(domain <name>)`")),
            },
            "objects" => def.objects.extend(typed_list(body)?.into_iter().map(|(n, t, _)| (n, t))),
            "actors" => {
                for a in body {
                    def.actors.push(a.symbol("an actor name")?.to_string());
                }
            }
            "turn-taking" => {
                if !body.is_empty() {
                    return Err(ModelTextError::syntax(item.pos(), "`turn-taking` takes no arguments"));
                }
                def.turn_taking = true;
            }
            "init" => def.init.extend(body.iter().map(ground_atom).collect::<Result<Vec<_>, _>>()?),
            "goal" => def.goal.extend(body.iter().map(ground_atom).collect::<Result<Vec<_>, _>>()?),
            "hypothesis" => {
                let (name, atoms) = body
                    .split_first()
                    .ok_or_else(|| ModelTextError::syntax(item.pos(), "hypothesis needs a name"))?;
                let name = name.symbol("a hypothesis name")?.to_string();
                if def.hypotheses.iter().any(|(n, _)| *n == name) {
                    return Err(ModelTextError::syntax(item.pos(), format!("duplicate hypothesis `{name}`")));
                }
                let atoms = atoms.iter().map(ground_atom).collect::<Result<Vec<_>, _>>()?;
                def.hypotheses.push((name, atoms));
            }
            other => return Err(ModelTextError::syntax(item.pos(), format!("unknown problem section `{other}`"))),
        }
    }
    if !domain_seen {
        return Err(ModelTextError::syntax(form.pos(), "problem must name its `(domain ...)`"));
    }
    Ok(def)
}

/// Grounds a parsed problem and resolves its hypotheses.
pub fn instantiate(domain: &Domain, def: &ProblemDef) -> Result<(Problem, Vec<NamedGoal>), DomainError> {
    let problem = domain::ground(domain, def)?;
    let goals = def
        .hypotheses
        .iter()
        .map(|(name, atoms)| {
            Ok(NamedGoal {
                name: name.clone(),
                goal: problem.goal_from_atoms(atoms)?,
            })
        })
        .collect::<Result<Vec<_>, DomainError>>()?;
    Ok((problem, goals))
}

/// Parses a domain and a problem and grounds them.
pub fn load(domain_text: &str, problem_text: &str) -> Result<(Problem, Vec<NamedGoal>), ModelTextError> {
    let domain = parse_domain(domain_text)?;
    let def = parse_problem(problem_text)?;
    instantiate(&domain, &def).map_err(|e| {
        // Grounding errors mostly concern the problem text.
        let form = read_form(problem_text).expect("parsed above");
        semantic(&form, e)
    })
}

fn write_typed(out: &mut String, items: impl IntoIterator<Item = (String, String)>) {
    let items: Vec<(String, String)> = items.into_iter().collect();
    let mut first = true;
    let mut i = 0;
    while i < items.len() {
        let ty = &items[i].1;
        let mut j = i;
        while j < items.len() && items[j].1 == *ty {
            if !first {
                out.push(' ');
            }
            first = false;
            out.push_str(&items[j].0);
            j += 1;
        }
        let _ = write!(out, " - {ty}");
        i = j;
    }
}

fn write_pattern(out: &mut String, p: &AtomPattern) {
    out.push('(');
    out.push_str(&p.predicate);
    for a in &p.args {
        let _ = write!(out, " {a}");
    }
    out.push(')');
}

fn write_atom(out: &mut String, a: &Atom) {
    out.push('(');
    out.push_str(&a.predicate);
    for x in &a.args {
        let _ = write!(out, " {x}");
    }
    out.push(')');
}

fn write_patterns(out: &mut String, ps: &[AtomPattern]) {
    out.push('(');
    for (i, p) in ps.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write_pattern(out, p);
    }
    out.push(')');
}

pub fn print_domain(domain: &Domain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(domain {}", domain.name);
    let _ = write!(out, "  (types");
    for t in &domain.types {
        let _ = write!(out, " {t}");
    }
    out.push(')');
    out.push_str("\n  (predicates");
    for p in &domain.predicates {
        let _ = write!(out, "\n    ({}", p.name);
        if !p.params.is_empty() {
            out.push(' ');
            write_typed(&mut out, p.params.iter().map(|v| (v.name.clone(), v.ty.clone())));
        }
        out.push(')');
    }
    out.push(')');
    for a in &domain.actions {
        let _ = write!(out, "\n  (action {}\n    :params (", a.name);
        write_typed(&mut out, a.params.iter().map(|v| (v.name.clone(), v.ty.clone())));
        out.push(')');
        if let Some(actor) = &a.actor {
            let _ = write!(out, "\n    :actor {actor}");
        }
        for (key, list) in [(":pre", &a.pre), (":add", &a.add), (":del", &a.del)] {
            let _ = write!(out, "\n    {key} ");
            write_patterns(&mut out, list);
        }
        let _ = write!(out, "\n    :cost {})", a.cost);
    }
    for m in &domain.mutexes {
        out.push_str("\n  (mutex ");
        write_pattern(&mut out, &m.pattern);
        let _ = write!(out, " :vary {})", m.vary);
    }
    out.push_str(")\n");
    out
}

pub fn print_problem(def: &ProblemDef) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(problem {}", def.name);
    let _ = write!(out, "  (domain {})", def.domain);
    if !def.objects.is_empty() {
        out.push_str("\n  (objects ");
        write_typed(&mut out, def.objects.iter().cloned());
        out.push(')');
    }
    if !def.actors.is_empty() {
        let _ = write!(out, "\n  (actors {})", def.actors.join(" "));
    }
    if def.turn_taking {
        out.push_str("\n  (turn-taking)");
    }
    let atoms_section = |out: &mut String, head: &str, atoms: &[Atom]| {
        let _ = write!(out, "\n  ({head}");
        for a in atoms {
            out.push_str("\n    ");
            write_atom(out, a);
        }
        out.push(')');
    };
    atoms_section(&mut out, "init", &def.init);
    if !def.goal.is_empty() {
        atoms_section(&mut out, "goal", &def.goal);
    }
    for (name, atoms) in &def.hypotheses {
        let _ = write!(out, "\n  (hypothesis {name}");
        for a in atoms {
            out.push(' ');
            write_atom(&mut out, a);
        }
        out.push(')');
    }
    out.push_str(")\n");
    out
}
