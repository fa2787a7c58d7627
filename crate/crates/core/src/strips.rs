//! Ground propositional STRIPS model: atoms, states, actions, goals, and
//! declared at-most-one mutex groups.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::cost::Cost;

/// Predicate reserved for turn bookkeeping.
pub const TURN_PREDICATE: &str = "turn";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<P, I, S>(predicate: P, args: I) -> Self
    where
        P: Into<String>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Atom {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(arg)?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomId(pub u32);

impl AtomId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub u32);

impl ActionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Name and arguments of a ground action; the identity used for observation
/// matching and monitoring. The actor, when present, is the first argument.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionSig {
    pub name: String,
    pub args: Vec<String>,
}

impl ActionSig {
    pub fn new<N, I, S>(name: N, args: I) -> Self
    where
        N: Into<String>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ActionSig {
            name: name.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for ActionSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(arg)?;
        }
        f.write_str(")")
    }
}

/// Splits `name(a,b,...)` (or a bare `name`) into its parts.
fn parse_call(text: &str) -> Option<(String, Vec<String>)> {
    let text = text.trim();
    let valid = |s: &str| !s.is_empty() && !s.contains(|c: char| c.is_whitespace() || "(),".contains(c));
    let Some(open) = text.find('(') else {
        return valid(text).then(|| (text.to_string(), Vec::new()));
    };
    let name = text[..open].trim();
    let inner = text[open + 1..].strip_suffix(')')?;
    let args: Vec<String> = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(|a| a.trim().to_string()).collect()
    };
    (valid(name) && args.iter().all(|a| valid(a))).then(|| (name.to_string(), args))
}

macro_rules! call_syntax {
    ($ty:ident, $name:ident, $what:literal) => {
        impl core::str::FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                parse_call(s)
                    .map(|($name, args)| $ty { $name, args })
                    .ok_or_else(|| format!(concat!("malformed ", $what, " `{}`"), s))
            }
        }

        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let text = String::deserialize(deserializer)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

call_syntax!(Atom, predicate, "atom");
call_syntax!(ActionSig, name, "action");

/// A set of atoms, stored as a bitset over the owning problem's atom table.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct State {
    words: Vec<u64>,
}

impl State {
    pub fn empty(atom_count: usize) -> Self {
        State {
            words: alloc::vec![0; atom_count.div_ceil(64)],
        }
    }

    pub fn from_atoms(atom_count: usize, atoms: impl IntoIterator<Item = AtomId>) -> Self {
        let mut state = State::empty(atom_count);
        for atom in atoms {
            state.insert(atom);
        }
        state
    }

    #[inline]
    pub fn contains(&self, atom: AtomId) -> bool {
        let i = atom.index();
        self.words
            .get(i / 64)
            .is_some_and(|w| w & (1u64 << (i % 64)) != 0)
    }

    #[inline]
    pub fn insert(&mut self, atom: AtomId) {
        let i = atom.index();
        if i / 64 >= self.words.len() {
            self.words.resize(i / 64 + 1, 0);
        }
        self.words[i / 64] |= 1u64 << (i % 64);
    }

    #[inline]
    pub fn remove(&mut self, atom: AtomId) {
        let i = atom.index();
        if let Some(w) = self.words.get_mut(i / 64) {
            *w &= !(1u64 << (i % 64));
        }
    }

    pub fn contains_all(&self, atoms: &[AtomId]) -> bool {
        atoms.iter().all(|&a| self.contains(a))
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Atom ids in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut bits = word;
            core::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros();
                bits &= bits - 1;
                Some(AtomId((wi * 64) as u32 + tz))
            })
        })
    }
}

/// An atom permutation that maps the problem's actions onto actions of the
/// same cost, e.g. swapping two interchangeable actors. States in the same
/// orbit have the same cost to any goal the permutation fixes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Symmetry {
    perm: Vec<AtomId>,
}

impl Symmetry {
    pub fn apply(&self, state: &State) -> State {
        let mut out = State::empty(self.perm.len());
        for atom in state.iter() {
            out.insert(self.perm[atom.index()]);
        }
        out
    }

    /// The smaller of a state and its image.
    pub fn canonical(&self, state: State) -> State {
        let image = self.apply(&state);
        if image < state {
            image
        } else {
            state
        }
    }

    pub fn fixes(&self, goal: &GoalCondition) -> bool {
        goal.atoms().iter().all(|&a| goal.contains(self.perm[a.index()]))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroundAction {
    pub name: String,
    /// Arguments, actor first when the schema declares one.
    pub args: Vec<String>,
    pub actor: Option<String>,
    pub pre: Vec<AtomId>,
    pub add: Vec<AtomId>,
    pub del: Vec<AtomId>,
    pub cost: Cost,
}

impl GroundAction {
    pub fn signature(&self) -> ActionSig {
        ActionSig {
            name: self.name.clone(),
            args: self.args.clone(),
        }
    }

    pub fn matches(&self, sig: &ActionSig) -> bool {
        self.name == sig.name && self.args == sig.args
    }

    /// Arguments other than the actor.
    pub fn object_args(&self) -> &[String] {
        if self.actor.is_some() {
            &self.args[1..]
        } else {
            &self.args
        }
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.signature(), f)
    }
}

/// Conjunction of atoms. Stored sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct GoalCondition {
    atoms: Vec<AtomId>,
}

impl GoalCondition {
    pub fn new(atoms: impl IntoIterator<Item = AtomId>) -> Self {
        let mut atoms: Vec<AtomId> = atoms.into_iter().collect();
        atoms.sort_unstable();
        atoms.dedup();
        GoalCondition { atoms }
    }

    /// The empty conjunction, satisfied by every state.
    pub fn trivial() -> Self {
        GoalCondition::default()
    }

    pub fn atoms(&self) -> &[AtomId] {
        &self.atoms
    }

    pub fn is_trivial(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn contains(&self, atom: AtomId) -> bool {
        self.atoms.binary_search(&atom).is_ok()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn with(&self, extra: impl IntoIterator<Item = AtomId>) -> Self {
        GoalCondition::new(self.atoms.iter().copied().chain(extra))
    }
}

/// At-most-one template: for every assignment of the non-varying argument
/// positions of `predicate`, at most one atom may hold as the `vary`-th
/// argument ranges over objects.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MutexGroup {
    pub predicate: String,
    pub arity: usize,
    pub vary: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown action id {0}")]
    UnknownAction(u32),
    #[error("unknown action {0}")]
    UnknownActionSig(String),
    #[error("unknown atom {0}")]
    UnknownAtom(String),
    #[error("action {action} is not applicable: missing {}", join_atoms(missing))]
    PreconditionViolation { action: String, missing: Vec<Atom> },
    #[error("action {0} both adds and deletes {1}")]
    AddDeleteOverlap(String, String),
    #[error("initial state violates mutex group {group}: {first} and {second}")]
    InitialMutexViolation {
        group: String,
        first: String,
        second: String,
    },
    #[error("mutex group over {predicate} varies position {vary} of an arity-{arity} predicate")]
    BadMutexGroup {
        predicate: String,
        arity: usize,
        vary: usize,
    },
    #[error("duplicate action {0}")]
    DuplicateAction(String),
    #[error("{0}")]
    Invalid(String),
}

fn join_atoms(atoms: &[Atom]) -> String {
    let parts: Vec<String> = atoms.iter().map(ToString::to_string).collect();
    parts.join(", ")
}

/// Everything needed to assemble a [`Problem`].
#[derive(Clone, Debug, Default)]
pub struct ProblemParts {
    pub objects: Vec<(String, String)>,
    pub atoms: Vec<Atom>,
    pub actions: Vec<GroundAction>,
    pub init: Vec<AtomId>,
    pub goal: GoalCondition,
    pub mutex_groups: Vec<MutexGroup>,
    pub actors: Vec<String>,
}

/// A fully ground planning problem.
#[derive(Clone, Debug)]
pub struct Problem {
    objects: Vec<(String, String)>,
    atoms: Vec<Atom>,
    atom_index: BTreeMap<Atom, AtomId>,
    actions: Vec<GroundAction>,
    action_index: BTreeMap<ActionSig, ActionId>,
    init: State,
    goal: GoalCondition,
    mutex_groups: Vec<MutexGroup>,
    mutex_instances: Vec<Vec<AtomId>>,
    instance_group: Vec<usize>,
    actors: Vec<String>,
    // Successor generation: each action is filed under one precondition atom.
    anchored: Vec<Vec<ActionId>>,
    unanchored: Vec<ActionId>,
}

impl Problem {
    /// Assembles and validates a problem. Actions are reordered by their
    /// signature text so that action ids follow lexicographic name order.
    pub fn from_parts(parts: ProblemParts) -> Result<Problem, ModelError> {
        let ProblemParts {
            objects,
            atoms,
            mut actions,
            init,
            goal,
            mutex_groups,
            actors,
        } = parts;

        let mut atom_index = BTreeMap::new();
        for (i, atom) in atoms.iter().enumerate() {
            if atom_index.insert(atom.clone(), AtomId(i as u32)).is_some() {
                return Err(ModelError::Invalid(format!("duplicate atom {atom}")));
            }
        }
        let atom_count = atoms.len();
        let check_ids = |ids: &[AtomId]| -> Result<(), ModelError> {
            match ids.iter().find(|id| id.index() >= atom_count) {
                Some(id) => Err(ModelError::UnknownAtom(format!("#{}", id.0))),
                None => Ok(()),
            }
        };

        for action in &mut actions {
            check_ids(&action.pre)?;
            check_ids(&action.add)?;
            check_ids(&action.del)?;
            for list in [&mut action.pre, &mut action.add, &mut action.del] {
                list.sort_unstable();
                list.dedup();
            }
            if let Some(&overlap) = action.add.iter().find(|a| action.del.binary_search(a).is_ok()) {
                return Err(ModelError::AddDeleteOverlap(
                    action.to_string(),
                    atoms[overlap.index()].to_string(),
                ));
            }
        }
        actions.sort_by_cached_key(|a| a.to_string());

        let mut action_index = BTreeMap::new();
        for (i, action) in actions.iter().enumerate() {
            if action_index.insert(action.signature(), ActionId(i as u32)).is_some() {
                return Err(ModelError::DuplicateAction(action.to_string()));
            }
        }
        check_ids(&init)?;
        check_ids(goal.atoms())?;

        let (instance_group, mutex_instances) =
            instantiate_mutex_groups(&atoms, &mutex_groups)?.into_iter().unzip();

        let mut predicate_size: BTreeMap<&str, usize> = BTreeMap::new();
        for atom in &atoms {
            *predicate_size.entry(atom.predicate.as_str()).or_default() += 1;
        }
        let mut anchored = alloc::vec![Vec::new(); atom_count];
        let mut unanchored = Vec::new();
        for (i, action) in actions.iter().enumerate() {
            // Prefer the precondition from the largest predicate family: such
            // atoms are sparse in typical states.
            let anchor = action.pre.iter().copied().max_by_key(|&p| {
                let atom = &atoms[p.index()];
                (predicate_size[atom.predicate.as_str()], core::cmp::Reverse(p))
            });
            match anchor {
                Some(p) => anchored[p.index()].push(ActionId(i as u32)),
                None => unanchored.push(ActionId(i as u32)),
            }
        }

        let problem = Problem {
            objects,
            init: State::from_atoms(atom_count, init.iter().copied()),
            atoms,
            atom_index,
            actions,
            action_index,
            goal,
            mutex_groups,
            mutex_instances,
            instance_group,
            actors,
            anchored,
            unanchored,
        };
        if let Some((group, first, second)) = problem.mutex_violation(&problem.init) {
            return Err(ModelError::InitialMutexViolation {
                group: format!("{:?}", problem.mutex_groups[group]),
                first: problem.atom(first).to_string(),
                second: problem.atom(second).to_string(),
            });
        }
        Ok(problem)
    }

    /// Decomposes the problem back into its parts.
    pub fn to_parts(&self) -> ProblemParts {
        ProblemParts {
            objects: self.objects.clone(),
            atoms: self.atoms.clone(),
            actions: self.actions.clone(),
            init: self.init.iter().collect(),
            goal: self.goal.clone(),
            mutex_groups: self.mutex_groups.clone(),
            actors: self.actors.clone(),
        }
    }

    pub fn objects(&self) -> &[(String, String)] {
        &self.objects
    }

    pub fn actors(&self) -> &[String] {
        &self.actors
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, id: AtomId) -> &Atom {
        &self.atoms[id.index()]
    }

    pub fn atom_id(&self, atom: &Atom) -> Option<AtomId> {
        self.atom_index.get(atom).copied()
    }

    /// Resolves atoms into ids, failing on the first unknown atom.
    pub fn atom_ids<'a>(
        &self,
        atoms: impl IntoIterator<Item = &'a Atom>,
    ) -> Result<Vec<AtomId>, ModelError> {
        atoms
            .into_iter()
            .map(|a| self.atom_id(a).ok_or_else(|| ModelError::UnknownAtom(a.to_string())))
            .collect()
    }

    pub fn goal_from_atoms<'a>(
        &self,
        atoms: impl IntoIterator<Item = &'a Atom>,
    ) -> Result<GoalCondition, ModelError> {
        Ok(GoalCondition::new(self.atom_ids(atoms)?))
    }

    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    pub fn action(&self, id: ActionId) -> &GroundAction {
        &self.actions[id.index()]
    }

    pub fn try_action(&self, id: ActionId) -> Result<&GroundAction, ModelError> {
        self.actions
            .get(id.index())
            .ok_or(ModelError::UnknownAction(id.0))
    }

    pub fn find_action(&self, sig: &ActionSig) -> Option<ActionId> {
        self.action_index.get(sig).copied()
    }

    pub fn resolve_action(&self, sig: &ActionSig) -> Result<ActionId, ModelError> {
        self.find_action(sig)
            .ok_or_else(|| ModelError::UnknownActionSig(sig.to_string()))
    }

    pub fn initial_state(&self) -> &State {
        &self.init
    }

    pub fn goal(&self) -> &GoalCondition {
        &self.goal
    }

    pub fn mutex_groups(&self) -> &[MutexGroup] {
        &self.mutex_groups
    }

    /// Instantiated mutex groups, each with at least two atoms.
    pub fn mutex_instances(&self) -> &[Vec<AtomId>] {
        &self.mutex_instances
    }

    pub fn with_goal(&self, goal: GoalCondition) -> Problem {
        let mut problem = self.clone();
        problem.goal = goal;
        problem
    }

    pub fn with_initial_state(&self, state: State) -> Problem {
        let mut problem = self.clone();
        problem.init = state;
        problem
    }

    pub fn applicable(&self, state: &State, action: ActionId) -> Result<bool, ModelError> {
        Ok(state.contains_all(&self.try_action(action)?.pre))
    }

    pub fn apply(&self, state: &State, action: ActionId) -> Result<State, ModelError> {
        let act = self.try_action(action)?;
        let missing: Vec<Atom> = act
            .pre
            .iter()
            .filter(|&&p| !state.contains(p))
            .map(|&p| self.atom(p).clone())
            .collect();
        if !missing.is_empty() {
            return Err(ModelError::PreconditionViolation {
                action: act.to_string(),
                missing,
            });
        }
        Ok(self.apply_unchecked(state, action))
    }

    /// Applies effects without checking preconditions.
    #[inline]
    pub fn apply_unchecked(&self, state: &State, action: ActionId) -> State {
        let act = &self.actions[action.index()];
        let mut next = state.clone();
        for &d in &act.del {
            next.remove(d);
        }
        for &a in &act.add {
            next.insert(a);
        }
        next
    }

    pub fn satisfies(&self, state: &State, goal: &GoalCondition) -> bool {
        state.contains_all(goal.atoms())
    }

    pub fn is_goal(&self, state: &State) -> bool {
        self.satisfies(state, &self.goal)
    }

    /// Applicable actions in ascending id order.
    pub fn applicable_actions(&self, state: &State) -> Vec<ActionId> {
        let mut out: Vec<ActionId> = self
            .unanchored
            .iter()
            .copied()
            .filter(|&a| state.contains_all(&self.actions[a.index()].pre))
            .collect();
        for atom in state.iter() {
            for &a in &self.anchored[atom.index()] {
                if state.contains_all(&self.actions[a.index()].pre) {
                    out.push(a);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Pairs of goal atoms that share an instantiated mutex group.
    pub fn goal_conflicts(&self, goal: &GoalCondition) -> Vec<(AtomId, AtomId)> {
        goal_conflicts(goal, &self.mutex_instances)
    }

    /// First violated mutex instance in `state`, if any, as
    /// (group index, first atom, second atom).
    pub fn mutex_violation(&self, state: &State) -> Option<(usize, AtomId, AtomId)> {
        for (gi, instance) in self.mutex_instances.iter().enumerate() {
            let mut held = instance.iter().copied().filter(|&a| state.contains(a));
            if let (Some(first), Some(second)) = (held.next(), held.next()) {
                return Some((self.instance_group[gi], first, second));
            }
        }
        None
    }

    /// Keeps only actions that `keep` accepts.
    pub fn filter_actions(&self, keep: impl Fn(&GroundAction) -> bool) -> Problem {
        let mut parts = self.to_parts();
        parts.actions.retain(|a| keep(a));
        Problem::from_parts(parts).expect("filtering actions preserves validity")
    }

    /// Removes every atom of `predicate` from the model and drops actions
    /// left without effects.
    pub fn without_predicate(&self, predicate: &str) -> Problem {
        let keep: Vec<bool> = self.atoms.iter().map(|a| a.predicate != predicate).collect();
        let mut remap = alloc::vec![None; self.atoms.len()];
        let mut atoms = Vec::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            if keep[i] {
                remap[i] = Some(AtomId(atoms.len() as u32));
                atoms.push(atom.clone());
            }
        }
        let map = |ids: &[AtomId]| -> Vec<AtomId> {
            ids.iter().filter_map(|id| remap[id.index()]).collect()
        };
        let actions = self
            .actions
            .iter()
            .map(|a| GroundAction {
                pre: map(&a.pre),
                add: map(&a.add),
                del: map(&a.del),
                ..a.clone()
            })
            .filter(|a| !a.add.is_empty() || !a.del.is_empty())
            .collect();
        let parts = ProblemParts {
            objects: self.objects.clone(),
            atoms,
            actions,
            init: map(&self.init.iter().collect::<Vec<_>>()),
            goal: GoalCondition::new(map(self.goal.atoms())),
            mutex_groups: self
                .mutex_groups
                .iter()
                .filter(|g| g.predicate != predicate)
                .cloned()
                .collect(),
            actors: self.actors.clone(),
        };
        Problem::from_parts(parts).expect("dropping a predicate preserves validity")
    }

    /// The symmetry exchanging actors `a` and `b`, if every action has a
    /// mirror image.
    pub fn actor_swap(&self, a: &str, b: &str) -> Option<Symmetry> {
        let swap = |args: &[String]| -> Vec<String> {
            args.iter()
                .map(|x| match x.as_str() {
                    x if x == a => b.to_string(),
                    x if x == b => a.to_string(),
                    x => x.to_string(),
                })
                .collect()
        };
        let perm = self
            .atoms
            .iter()
            .map(|atom| {
                self.atom_id(&Atom {
                    predicate: atom.predicate.clone(),
                    args: swap(&atom.args),
                })
            })
            .collect::<Option<Vec<AtomId>>>()?;
        let image = |ids: &[AtomId]| {
            let mut out: Vec<AtomId> = ids.iter().map(|id| perm[id.index()]).collect();
            out.sort_unstable();
            out
        };
        let sorted = |ids: &[AtomId]| {
            let mut out = ids.to_vec();
            out.sort_unstable();
            out
        };
        for action in &self.actions {
            let sig = ActionSig {
                name: action.name.clone(),
                args: swap(&action.args),
            };
            let mirror = self.action(self.find_action(&sig)?);
            if mirror.cost != action.cost
                || image(&action.pre) != sorted(&mirror.pre)
                || image(&action.add) != sorted(&mirror.add)
                || image(&action.del) != sorted(&mirror.del)
            {
                return None;
            }
        }
        Some(Symmetry { perm })
    }

    /// The actor swap of a two-actor problem, when it is a symmetry.
    pub fn hand_symmetry(&self) -> Option<Symmetry> {
        match self.actors.as_slice() {
            [a, b] => self.actor_swap(a, b),
            _ => None,
        }
    }

    /// Feeds everything that determines search results into `state`.
    pub fn hash_content<H: core::hash::Hasher>(&self, state: &mut H) {
        use core::hash::Hash;
        self.atoms.hash(state);
        self.actions.hash(state);
        self.init.hash(state);
        self.goal.hash(state);
        self.mutex_instances.hash(state);
        self.actors.hash(state);
    }

    /// Translates a state of `other` into this problem's atom table, keeping
    /// the atoms both models share.
    pub fn translate_state(&self, other: &Problem, state: &State) -> State {
        State::from_atoms(
            self.atom_count(),
            state
                .iter()
                .filter_map(|id| self.atom_id(other.atom(id))),
        )
    }

    pub fn atom_names(&self, ids: impl IntoIterator<Item = AtomId>) -> Vec<String> {
        ids.into_iter().map(|id| self.atom(id).to_string()).collect()
    }
}

/// Pairs of goal atoms that co-occur in one instantiated mutex group.
pub fn goal_conflicts(goal: &GoalCondition, instances: &[Vec<AtomId>]) -> Vec<(AtomId, AtomId)> {
    let mut out = Vec::new();
    for instance in instances {
        let members: Vec<AtomId> = instance.iter().copied().filter(|&a| goal.contains(a)).collect();
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                let pair = (members[i].min(members[j]), members[i].max(members[j]));
                if !out.contains(&pair) {
                    out.push(pair);
                }
            }
        }
    }
    out.sort_unstable();
    out
}

fn instantiate_mutex_groups(
    atoms: &[Atom],
    groups: &[MutexGroup],
) -> Result<Vec<(usize, Vec<AtomId>)>, ModelError> {
    let mut out = Vec::new();
    for (gi, group) in groups.iter().enumerate() {
        if group.vary >= group.arity {
            return Err(ModelError::BadMutexGroup {
                predicate: group.predicate.clone(),
                arity: group.arity,
                vary: group.vary,
            });
        }
        let mut buckets: BTreeMap<Vec<&str>, Vec<AtomId>> = BTreeMap::new();
        for (i, atom) in atoms.iter().enumerate() {
            if atom.predicate != group.predicate || atom.args.len() != group.arity {
                continue;
            }
            let key: Vec<&str> = atom
                .args
                .iter()
                .enumerate()
                .filter(|(pos, _)| *pos != group.vary)
                .map(|(_, a)| a.as_str())
                .collect();
            buckets.entry(key).or_default().push(AtomId(i as u32));
        }
        // Single-atom instantiations constrain nothing.
        out.extend(
            buckets
                .into_values()
                .filter(|b| b.len() >= 2)
                .map(|b| (gi, b)),
        );
    }
    Ok(out)
}
