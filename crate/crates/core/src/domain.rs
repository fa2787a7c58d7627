//! Lifted domain and problem definitions, and their grounding into a
//! [`Problem`](crate::strips::Problem).
//!
//! Action schemas bind their parameters to pairwise distinct objects. When a
//! problem asks for turn taking, grounding adds `turn(actor)` bookkeeping to
//! every action: each action requires its actor's turn and passes the turn to
//! the next actor in declaration order.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::cost::Cost;
use crate::strips::{
    Atom, AtomId, GoalCondition, GroundAction, ModelError, MutexGroup, Problem, ProblemParts,
    TURN_PREDICATE,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedVar {
    /// Variable name including the leading `?`.
    pub name: String,
    pub ty: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Var(String),
    Const(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) | Term::Const(v) => f.write_str(v),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomPattern {
    pub predicate: String,
    pub args: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<TypedVar>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedVar>,
    /// Parameter naming the acting agent; must be the first parameter.
    pub actor: Option<String>,
    pub pre: Vec<AtomPattern>,
    pub add: Vec<AtomPattern>,
    pub del: Vec<AtomPattern>,
    pub cost: Cost,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MutexTemplate {
    pub pattern: AtomPattern,
    pub vary: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Domain {
    pub name: String,
    pub types: Vec<String>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionSchema>,
    pub mutexes: Vec<MutexTemplate>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ProblemDef {
    pub name: String,
    pub domain: String,
    pub objects: Vec<(String, String)>,
    /// Acting agents, in turn order.
    pub actors: Vec<String>,
    pub turn_taking: bool,
    pub init: Vec<Atom>,
    pub goal: Vec<Atom>,
    /// Named candidate goals.
    pub hypotheses: Vec<(String, Vec<Atom>)>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DomainError {
    #[error("undeclared predicate `{0}`")]
    UndeclaredPredicate(String),
    #[error("predicate `{predicate}` expects {expected} arguments, got {found}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("undeclared variable `{var}` in {context}")]
    UndeclaredVariable { var: String, context: String },
    #[error("undeclared object `{0}`")]
    UndeclaredObject(String),
    #[error("argument `{arg}` of `{predicate}` has type `{found}`, expected `{expected}`")]
    TypeMismatch {
        predicate: String,
        arg: String,
        expected: String,
        found: String,
    },
    #[error("duplicate declaration `{0}`")]
    Duplicate(String),
    #[error("action `{action}`: {reason}")]
    BadActor { action: String, reason: String },
    #[error("mutex template: {0}")]
    BadMutex(String),
    #[error("problem is for domain `{found}`, expected `{expected}`")]
    DomainMismatch { expected: String, found: String },
    #[error("predicate `{0}` is reserved")]
    Reserved(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Checks declarations, arities, variable scoping, and mutex templates.
    pub fn validate(&self) -> Result<(), DomainError> {
        let mut seen = Vec::new();
        for ty in &self.types {
            if seen.contains(&ty) {
                return Err(DomainError::Duplicate(ty.clone()));
            }
            seen.push(ty);
        }
        let mut names: Vec<&str> = Vec::new();
        for pred in &self.predicates {
            if pred.name == TURN_PREDICATE {
                return Err(DomainError::Reserved(pred.name.clone()));
            }
            if names.contains(&pred.name.as_str()) {
                return Err(DomainError::Duplicate(pred.name.clone()));
            }
            names.push(&pred.name);
            for p in &pred.params {
                self.check_type(&p.ty)?;
            }
        }
        let mut action_names: Vec<&str> = Vec::new();
        for action in &self.actions {
            if action_names.contains(&action.name.as_str()) {
                return Err(DomainError::Duplicate(action.name.clone()));
            }
            action_names.push(&action.name);
            for p in &action.params {
                self.check_type(&p.ty)?;
            }
            if let Some(actor) = &action.actor {
                if action.params.first().map(|p| &p.name) != Some(actor) {
                    return Err(DomainError::BadActor {
                        action: action.name.clone(),
                        reason: format!("actor `{actor}` must be the first parameter"),
                    });
                }
            }
            let context = format!("action `{}`", action.name);
            for pattern in action.pre.iter().chain(&action.add).chain(&action.del) {
                self.check_pattern(pattern, &action.params, &context)?;
            }
        }
        for mutex in &self.mutexes {
            let decl = self
                .predicate(&mutex.pattern.predicate)
                .ok_or_else(|| DomainError::UndeclaredPredicate(mutex.pattern.predicate.clone()))?;
            if decl.params.len() != mutex.pattern.args.len() {
                return Err(DomainError::ArityMismatch {
                    predicate: decl.name.clone(),
                    expected: decl.params.len(),
                    found: mutex.pattern.args.len(),
                });
            }
            let mut vars = Vec::new();
            for arg in &mutex.pattern.args {
                match arg {
                    Term::Var(v) if !vars.contains(&v) => vars.push(v),
                    _ => {
                        return Err(DomainError::BadMutex(format!(
                            "arguments of `{}` must be distinct variables",
                            decl.name
                        )))
                    }
                }
            }
            if !vars.contains(&&mutex.vary) {
                return Err(DomainError::BadMutex(format!(
                    "varying variable `{}` does not occur in `{}`",
                    mutex.vary, decl.name
                )));
            }
        }
        Ok(())
    }

    fn check_type(&self, ty: &str) -> Result<(), DomainError> {
        if self.types.iter().any(|t| t == ty) {
            Ok(())
        } else {
            Err(DomainError::UndeclaredType(ty.into()))
        }
    }

    fn check_pattern(
        &self,
        pattern: &AtomPattern,
        params: &[TypedVar],
        context: &str,
    ) -> Result<(), DomainError> {
        let decl = self
            .predicate(&pattern.predicate)
            .ok_or_else(|| DomainError::UndeclaredPredicate(pattern.predicate.clone()))?;
        if decl.params.len() != pattern.args.len() {
            return Err(DomainError::ArityMismatch {
                predicate: decl.name.clone(),
                expected: decl.params.len(),
                found: pattern.args.len(),
            });
        }
        for (arg, expected) in pattern.args.iter().zip(&decl.params) {
            if let Term::Var(v) = arg {
                let param = params.iter().find(|p| &p.name == v).ok_or_else(|| {
                    DomainError::UndeclaredVariable {
                        var: v.clone(),
                        context: context.into(),
                    }
                })?;
                if param.ty != expected.ty {
                    return Err(DomainError::TypeMismatch {
                        predicate: decl.name.clone(),
                        arg: v.clone(),
                        expected: expected.ty.clone(),
                        found: param.ty.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Grounds `problem` against `domain`.
pub fn ground(domain: &Domain, problem: &ProblemDef) -> Result<Problem, DomainError> {
    domain.validate()?;
    if !problem.domain.is_empty() && problem.domain != domain.name {
        return Err(DomainError::DomainMismatch {
            expected: domain.name.clone(),
            found: problem.domain.clone(),
        });
    }
    let mut by_type: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut object_type: BTreeMap<&str, &str> = BTreeMap::new();
    for (name, ty) in &problem.objects {
        domain.check_type(ty)?;
        if object_type.insert(name, ty).is_some() {
            return Err(DomainError::Duplicate(name.clone()));
        }
        by_type.entry(ty).or_default().push(name);
    }
    for actor in &problem.actors {
        if !object_type.contains_key(actor.as_str()) {
            return Err(DomainError::UndeclaredObject(actor.clone()));
        }
    }

    let mut atoms = Vec::new();
    for pred in &domain.predicates {
        let domains: Vec<&[&str]> = pred
            .params
            .iter()
            .map(|p| by_type.get(p.ty.as_str()).map_or(&[][..], |v| &v[..]))
            .collect();
        for_each_tuple(&domains, false, &mut |tuple| {
            atoms.push(Atom::new(pred.name.clone(), tuple.iter().copied()));
        });
    }
    if problem.turn_taking {
        for actor in &problem.actors {
            atoms.push(Atom::new(TURN_PREDICATE, [actor.as_str()]));
        }
    }
    let index: BTreeMap<&Atom, u32> = atoms.iter().zip(0u32..).collect();
    let lookup = |atom: &Atom| -> Result<AtomId, DomainError> {
        index.get(atom).map(|&i| AtomId(i)).ok_or_else(|| {
            let known = domain.predicate(&atom.predicate);
            match known {
                None => DomainError::UndeclaredPredicate(atom.predicate.clone()),
                Some(decl) if decl.params.len() != atom.args.len() => DomainError::ArityMismatch {
                    predicate: decl.name.clone(),
                    expected: decl.params.len(),
                    found: atom.args.len(),
                },
                Some(decl) => {
                    match atom.args.iter().zip(&decl.params).find_map(|(arg, param)| {
                        match object_type.get(arg.as_str()) {
                            None => Some(DomainError::UndeclaredObject(arg.clone())),
                            Some(&ty) if ty != param.ty => Some(DomainError::TypeMismatch {
                                predicate: decl.name.clone(),
                                arg: arg.clone(),
                                expected: param.ty.clone(),
                                found: ty.into(),
                            }),
                            Some(_) => None,
                        }
                    }) {
                        Some(err) => err,
                        None => DomainError::Model(ModelError::UnknownAtom(atom.to_string())),
                    }
                }
            }
        })
    };

    let mut actions = Vec::new();
    for schema in &domain.actions {
        let domains: Vec<&[&str]> = schema
            .params
            .iter()
            .map(|p| by_type.get(p.ty.as_str()).map_or(&[][..], |v| &v[..]))
            .collect();
        let mut failure = None;
        for_each_tuple(&domains, true, &mut |tuple| {
            if failure.is_some() {
                return;
            }
            let actor = schema.actor.as_ref().map(|_| tuple[0].to_string());
            if let Some(actor) = &actor {
                if !problem.actors.contains(actor) {
                    return;
                }
            }
            match ground_action(schema, tuple, &lookup) {
                Ok(mut action) => {
                    if problem.turn_taking {
                        if let Some(actor) = &actor {
                            add_turn_bookkeeping(&mut action, actor, &problem.actors, &lookup);
                        }
                    }
                    action.actor = actor;
                    actions.push(action);
                }
                Err(err) => failure = Some(err),
            }
        });
        if let Some(err) = failure {
            return Err(err);
        }
    }

    let mut init = Vec::new();
    for atom in &problem.init {
        init.push(lookup(atom)?);
    }
    if problem.turn_taking {
        if let Some(first) = problem.actors.first() {
            init.push(lookup(&Atom::new(TURN_PREDICATE, [first.as_str()]))?);
        }
    }
    let mut goal = Vec::new();
    for atom in &problem.goal {
        goal.push(lookup(atom)?);
    }
    for (_, atoms) in &problem.hypotheses {
        for atom in atoms {
            lookup(atom)?;
        }
    }

    let mutex_groups = domain
        .mutexes
        .iter()
        .map(|m| MutexGroup {
            predicate: m.pattern.predicate.clone(),
            arity: m.pattern.args.len(),
            vary: m
                .pattern
                .args
                .iter()
                .position(|t| matches!(t, Term::Var(v) if *v == m.vary))
                .unwrap_or(0),
        })
        .collect();

    Ok(Problem::from_parts(ProblemParts {
        objects: problem.objects.clone(),
        atoms,
        actions,
        init,
        goal: GoalCondition::new(goal),
        mutex_groups,
        actors: problem.actors.clone(),
    })?)
}

fn ground_action(
    schema: &ActionSchema,
    tuple: &[&str],
    lookup: &impl Fn(&Atom) -> Result<AtomId, DomainError>,
) -> Result<GroundAction, DomainError> {
    let bind = |pattern: &AtomPattern| -> Result<AtomId, DomainError> {
        let args = pattern.args.iter().map(|term| match term {
            Term::Const(c) => c.as_str(),
            Term::Var(v) => {
                let pos = schema.params.iter().position(|p| &p.name == v).unwrap_or(0);
                tuple[pos]
            }
        });
        lookup(&Atom::new(pattern.predicate.clone(), args))
    };
    let collect = |patterns: &[AtomPattern]| -> Result<Vec<AtomId>, DomainError> {
        patterns.iter().map(bind).collect()
    };
    Ok(GroundAction {
        name: schema.name.clone(),
        args: tuple.iter().map(|s| s.to_string()).collect(),
        actor: None,
        pre: collect(&schema.pre)?,
        add: collect(&schema.add)?,
        del: collect(&schema.del)?,
        cost: schema.cost,
    })
}

fn add_turn_bookkeeping(
    action: &mut GroundAction,
    actor: &str,
    order: &[String],
    lookup: &impl Fn(&Atom) -> Result<AtomId, DomainError>,
) {
    let Some(pos) = order.iter().position(|a| a == actor) else {
        return;
    };
    let next = &order[(pos + 1) % order.len()];
    let Ok(mine) = lookup(&Atom::new(TURN_PREDICATE, [actor])) else {
        return;
    };
    action.pre.push(mine);
    if next != actor {
        if let Ok(theirs) = lookup(&Atom::new(TURN_PREDICATE, [next.as_str()])) {
            action.del.push(mine);
            action.add.push(theirs);
        }
    }
}

/// Calls `f` on every tuple in the product of `domains`, optionally skipping
/// tuples with repeated objects.
fn for_each_tuple<'a>(domains: &[&[&'a str]], distinct: bool, f: &mut impl FnMut(&[&'a str])) {
    fn rec<'a>(
        domains: &[&[&'a str]],
        distinct: bool,
        prefix: &mut Vec<&'a str>,
        f: &mut impl FnMut(&[&'a str]),
    ) {
        if prefix.len() == domains.len() {
            f(prefix);
            return;
        }
        for &obj in domains[prefix.len()] {
            if distinct && prefix.contains(&obj) {
                continue;
            }
            prefix.push(obj);
            rec(domains, distinct, prefix, f);
            prefix.pop();
        }
    }
    rec(domains, distinct, &mut Vec::new(), f);
}
