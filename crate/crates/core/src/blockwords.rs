//! Block Words: lettered blocks stacked on a table, where a goal word must be
//! spelled top-to-bottom by a single stack.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cost::Cost;
use crate::domain::{
    self, ActionSchema, AtomPattern, Domain, DomainError, MutexTemplate, PredicateDecl,
    ProblemDef, Term, TypedVar,
};
use crate::strips::{Atom, GoalCondition, Problem, State};

pub const BLOCK_TYPE: &str = "block";
pub const AGENT_TYPE: &str = "agent";

/// Default actor names: the human plays first, the assistant second.
pub const USER: &str = "user";
pub const AGENT: &str = "agent";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockWordsSpec {
    /// Stacks listed bottom-to-top, one letter per block.
    pub stacks: Vec<Vec<char>>,
    pub words: Vec<String>,
    /// Actors in turn order, each with a one-block hand.
    pub actors: Vec<String>,
}

impl BlockWordsSpec {
    /// The demonstration layout: ten stacks with `h` on `e` on `r`, and six
    /// candidate words.
    pub fn demo() -> Self {
        BlockWordsSpec {
            stacks: vec![
                vec!['t'],
                vec!['r', 'e', 'h'],
                vec!['l'],
                vec!['s'],
                vec!['m'],
                vec!['o'],
                vec!['f'],
                vec!['w'],
                vec!['b'],
                vec!['a'],
            ],
            words: ["father", "mother", "master", "faster", "later", "water"]
                .iter()
                .map(|w| w.to_string())
                .collect(),
            actors: vec![USER.into(), AGENT.into()],
        }
    }

    /// The demonstration layout with the user acting alone.
    pub fn demo_solo() -> Self {
        BlockWordsSpec {
            actors: vec![USER.into()],
            ..Self::demo()
        }
    }

    pub fn letters(&self) -> impl Iterator<Item = char> + '_ {
        self.stacks.iter().flatten().copied()
    }

    pub fn validate(&self) -> Result<(), BlockWordsError> {
        if self.actors.is_empty() {
            return Err(BlockWordsError::NoActors);
        }
        let mut seen = Vec::new();
        for letter in self.letters() {
            if !letter.is_ascii_lowercase() {
                return Err(BlockWordsError::BadLetter(letter));
            }
            if seen.contains(&letter) {
                return Err(BlockWordsError::DuplicateBlock(letter));
            }
            seen.push(letter);
        }
        for (i, actor) in self.actors.iter().enumerate() {
            if actor.chars().count() == 1 && actor.chars().all(|c| seen.contains(&c)) {
                return Err(BlockWordsError::ActorNameClash(actor.clone()));
            }
            if self.actors[..i].contains(actor) {
                return Err(BlockWordsError::DuplicateActor(actor.clone()));
            }
        }
        for word in &self.words {
            if word.chars().count() < 2 {
                return Err(BlockWordsError::WordTooShort(word.clone()));
            }
            let mut used = Vec::new();
            for c in word.chars() {
                if !seen.contains(&c) {
                    return Err(BlockWordsError::MissingLetter {
                        word: word.clone(),
                        letter: c,
                    });
                }
                if used.contains(&c) {
                    return Err(BlockWordsError::RepeatedLetter {
                        word: word.clone(),
                        letter: c,
                    });
                }
                used.push(c);
            }
        }
        Ok(())
    }

    pub fn problem_def(&self) -> ProblemDef {
        let mut objects: Vec<(String, String)> = self
            .letters()
            .map(|c| (c.to_string(), BLOCK_TYPE.to_string()))
            .collect();
        objects.extend(self.actors.iter().map(|a| (a.clone(), AGENT_TYPE.to_string())));
        let mut init = Vec::new();
        for stack in &self.stacks {
            let Some((&bottom, _)) = stack.split_first() else {
                continue;
            };
            init.push(Atom::new("on-table", [bottom.to_string()]));
            for pair in stack.windows(2) {
                init.push(Atom::new("on", [pair[1].to_string(), pair[0].to_string()]));
            }
            if let Some(top) = stack.last() {
                init.push(Atom::new("clear", [top.to_string()]));
            }
        }
        for actor in &self.actors {
            init.push(Atom::new("handempty", [actor.as_str()]));
        }
        ProblemDef {
            name: "blockwords".into(),
            domain: "blockwords".into(),
            objects,
            actors: self.actors.clone(),
            turn_taking: self.actors.len() > 1,
            init,
            goal: Vec::new(),
            hypotheses: self
                .words
                .iter()
                .map(|w| (w.clone(), word_atoms(w)))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BlockWordsError {
    #[error("at least one actor is required")]
    NoActors,
    #[error("block letters must be lowercase ASCII, got `{0}`")]
    BadLetter(char),
    #[error("block `{0}` appears more than once")]
    DuplicateBlock(char),
    #[error("actor `{0}` appears more than once")]
    DuplicateActor(String),
    #[error("actor name `{0}` clashes with a block")]
    ActorNameClash(String),
    #[error("word `{0}` needs at least two letters")]
    WordTooShort(String),
    #[error("word `{word}` uses missing letter `{letter}`")]
    MissingLetter { word: String, letter: char },
    #[error("word `{word}` repeats letter `{letter}`")]
    RepeatedLetter { word: String, letter: char },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// A named goal hypothesis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedGoal {
    pub name: String,
    pub goal: GoalCondition,
}

/// Goal atoms for a word read top-to-bottom: `on(l1,l2), ..., on(l(n-1),ln)`.
pub fn word_atoms(word: &str) -> Vec<Atom> {
    let letters: Vec<char> = word.chars().collect();
    letters
        .windows(2)
        .map(|pair| Atom::new("on", [pair[0].to_string(), pair[1].to_string()]))
        .collect()
}

/// Builds the ground problem and one goal per candidate word.
pub fn make_blockwords(spec: &BlockWordsSpec) -> Result<(Problem, Vec<NamedGoal>), BlockWordsError> {
    spec.validate()?;
    let def = spec.problem_def();
    let problem = domain::ground(&blockwords_domain(), &def)?;
    let goals = def
        .hypotheses
        .iter()
        .map(|(name, atoms)| {
            Ok(NamedGoal {
                name: name.clone(),
                goal: problem.goal_from_atoms(atoms).map_err(DomainError::from)?,
            })
        })
        .collect::<Result<Vec<_>, BlockWordsError>>()?;
    Ok((problem, goals))
}

fn var(name: &str, ty: &str) -> TypedVar {
    TypedVar {
        name: name.into(),
        ty: ty.into(),
    }
}

fn pat(predicate: &str, vars: &[&str]) -> AtomPattern {
    AtomPattern {
        predicate: predicate.into(),
        args: vars.iter().map(|v| Term::Var((*v).into())).collect(),
    }
}

/// The lifted Block Words domain with per-actor hands and a no-op.
pub fn blockwords_domain() -> Domain {
    let a = "?a";
    let x = "?x";
    let y = "?y";
    let schema = |name: &str,
                  params: Vec<TypedVar>,
                  pre: Vec<AtomPattern>,
                  add: Vec<AtomPattern>,
                  del: Vec<AtomPattern>,
                  cost: Cost| ActionSchema {
        name: name.into(),
        params,
        actor: Some(a.into()),
        pre,
        add,
        del,
        cost,
    };
    Domain {
        name: "blockwords".into(),
        types: vec![BLOCK_TYPE.into(), AGENT_TYPE.into()],
        predicates: vec![
            PredicateDecl {
                name: "on".into(),
                params: vec![var(x, BLOCK_TYPE), var(y, BLOCK_TYPE)],
            },
            PredicateDecl {
                name: "on-table".into(),
                params: vec![var(x, BLOCK_TYPE)],
            },
            PredicateDecl {
                name: "clear".into(),
                params: vec![var(x, BLOCK_TYPE)],
            },
            PredicateDecl {
                name: "holding".into(),
                params: vec![var(a, AGENT_TYPE), var(x, BLOCK_TYPE)],
            },
            PredicateDecl {
                name: "handempty".into(),
                params: vec![var(a, AGENT_TYPE)],
            },
        ],
        actions: vec![
            schema(
                "pickup",
                vec![var(a, AGENT_TYPE), var(x, BLOCK_TYPE)],
                vec![pat("on-table", &[x]), pat("clear", &[x]), pat("handempty", &[a])],
                vec![pat("holding", &[a, x])],
                vec![pat("on-table", &[x]), pat("clear", &[x]), pat("handempty", &[a])],
                Cost::UNIT,
            ),
            schema(
                "putdown",
                vec![var(a, AGENT_TYPE), var(x, BLOCK_TYPE)],
                vec![pat("holding", &[a, x])],
                vec![pat("on-table", &[x]), pat("clear", &[x]), pat("handempty", &[a])],
                vec![pat("holding", &[a, x])],
                Cost::UNIT,
            ),
            schema(
                "stack",
                vec![var(a, AGENT_TYPE), var(x, BLOCK_TYPE), var(y, BLOCK_TYPE)],
                vec![pat("holding", &[a, x]), pat("clear", &[y])],
                vec![pat("on", &[x, y]), pat("clear", &[x]), pat("handempty", &[a])],
                vec![pat("holding", &[a, x]), pat("clear", &[y])],
                Cost::UNIT,
            ),
            schema(
                "unstack",
                vec![var(a, AGENT_TYPE), var(x, BLOCK_TYPE), var(y, BLOCK_TYPE)],
                vec![pat("on", &[x, y]), pat("clear", &[x]), pat("handempty", &[a])],
                vec![pat("holding", &[a, x]), pat("clear", &[y])],
                vec![pat("on", &[x, y]), pat("clear", &[x]), pat("handempty", &[a])],
                Cost::UNIT,
            ),
            schema(
                "noop",
                vec![var(a, AGENT_TYPE)],
                vec![],
                vec![],
                vec![],
                Cost::ZERO,
            ),
        ],
        mutexes: vec![
            MutexTemplate {
                pattern: pat("on", &[x, y]),
                vary: x.into(),
            },
            MutexTemplate {
                pattern: pat("on", &[x, y]),
                vary: y.into(),
            },
            MutexTemplate {
                pattern: pat("holding", &[a, x]),
                vary: x.into(),
            },
            MutexTemplate {
                pattern: pat("holding", &[a, x]),
                vary: a.into(),
            },
        ],
    }
}

/// The physical layout of a Block Words state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Board {
    /// Stacks bottom-to-top, ordered by the bottom block's letter rank.
    pub stacks: Vec<Vec<char>>,
    /// Block held by each actor, in actor order.
    pub held: Vec<(String, Option<char>)>,
}

/// Reads the stacks and hands out of `state`.
pub fn board(problem: &Problem, state: &State, rank: &[char]) -> Board {
    let mut below: Vec<(char, char)> = Vec::new();
    let mut bottoms: Vec<char> = Vec::new();
    let mut held = Vec::new();
    let letter = |s: &str| s.chars().next().unwrap_or('?');
    for id in state.iter() {
        let atom = problem.atom(id);
        match atom.predicate.as_str() {
            "on" => below.push((letter(&atom.args[0]), letter(&atom.args[1]))),
            "on-table" => bottoms.push(letter(&atom.args[0])),
            "holding" => held.push((atom.args[0].clone(), letter(&atom.args[1]))),
            _ => {}
        }
    }
    let position = |c: char| rank.iter().position(|&r| r == c).unwrap_or(usize::MAX);
    bottoms.sort_by_key(|&c| (position(c), c));
    let stacks = bottoms
        .into_iter()
        .map(|bottom| {
            let mut stack = vec![bottom];
            while let Some(&(top, _)) = below.iter().find(|(_, b)| Some(b) == stack.last()) {
                if stack.contains(&top) {
                    break;
                }
                stack.push(top);
            }
            stack
        })
        .collect();
    let held = problem
        .actors()
        .iter()
        .map(|actor| {
            let block = held.iter().find(|(a, _)| a == actor).map(|(_, b)| *b);
            (actor.clone(), block)
        })
        .collect();
    Board { stacks, held }
}

/// Letter order used to sort stacks for display: bottoms of the initial
/// layout first, then the remaining letters.
pub fn letter_rank(spec: &BlockWordsSpec) -> Vec<char> {
    let mut rank: Vec<char> = spec.stacks.iter().filter_map(|s| s.first().copied()).collect();
    for c in spec.letters() {
        if !rank.contains(&c) {
            rank.push(c);
        }
    }
    rank
}
