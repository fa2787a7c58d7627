//! Goal recognition as planning.
//!
//! Each hypothesis is scored by two optimal plan costs in a turn-free copy of
//! the world: the cheapest plan that embeds the observations as a
//! subsequence (`comply`) and the cheapest plan that does not (`avoid`). The
//! likelihood is a sigmoid of their difference.
//!
//! Observations are matched by action name and object arguments only, so an
//! observed `unstack(user,h,e)` is also embedded by `unstack(agent,h,e)`.
//! Without that, a second hand could always "avoid" an observation at no
//! extra cost and every likelihood would collapse to one half.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::blockwords::NamedGoal;
use crate::cost::Cost;
use crate::planner::{Clock, NoClock, PlanOutcome, Search, SearchBudget, SearchMode, SearchStats};
use crate::strips::{
    ActionId, ActionSig, Atom, AtomId, GoalCondition, GroundAction, ModelError, MutexGroup, Problem,
    ProblemParts, State, TURN_PREDICATE,
};

const LEVEL_PREDICATE: &str = "observed-level";

/// An observed action reduced to what recognition compares: its name and
/// its non-actor arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObservationKey {
    pub name: String,
    pub objects: Vec<String>,
}

impl ObservationKey {
    pub fn of(action: &GroundAction) -> Self {
        ObservationKey {
            name: action.name.clone(),
            objects: action.object_args().to_vec(),
        }
    }

    pub fn matches(&self, action: &GroundAction) -> bool {
        self.name == action.name && self.objects.as_slice() == action.object_args()
    }
}

impl fmt::Display for ObservationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.objects.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecognitionConfig {
    pub beta: f64,
    /// One prior per hypothesis; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<Vec<f64>>,
    pub mode: SearchMode,
    /// Per compiled comply/avoid search.
    pub budget: SearchBudget,
    /// Per plain search for a hypothesis, which optimal mode runs first.
    #[serde(default)]
    pub reference_budget: SearchBudget,
}

impl Default for RecognitionConfig {
    fn default() -> Self {
        RecognitionConfig {
            beta: 1.0,
            priors: None,
            mode: SearchMode::Optimal,
            budget: SearchBudget::default(),
            reference_budget: SearchBudget::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum RecognitionError {
    #[error("no goal hypotheses")]
    NoHypotheses,
    #[error("beta must be positive and finite, got {0}")]
    BadBeta(f64),
    #[error("priors must be {expected} positive values summing to 1")]
    BadPriors { expected: usize },
    #[error("every hypothesis is infeasible given the observations")]
    NoFeasibleHypothesis,
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl RecognitionConfig {
    pub fn validate(&self, hypotheses: usize) -> Result<(), RecognitionError> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(RecognitionError::BadBeta(self.beta));
        }
        if let Some(priors) = &self.priors {
            let sum: f64 = priors.iter().sum();
            let ok = priors.len() == hypotheses
                && priors.iter().all(|p| p.is_finite() && *p > 0.0 && *p <= 1.0)
                && libm::fabs(sum - 1.0) <= 1e-9;
            if !ok {
                return Err(RecognitionError::BadPriors { expected: hypotheses });
            }
        }
        Ok(())
    }

    pub fn prior_vector(&self, hypotheses: usize) -> Vec<f64> {
        match &self.priors {
            Some(p) => p.clone(),
            None => alloc::vec![1.0 / hypotheses as f64; hypotheses],
        }
    }
}

/// One search of a recognition batch.
#[derive(Clone, Debug)]
pub struct SearchJob {
    pub problem: Problem,
    /// Only plans strictly cheaper than this are of interest.
    pub bound: Option<Cost>,
}

impl SearchJob {
    pub fn new(problem: Problem) -> Self {
        SearchJob { problem, bound: None }
    }

    pub fn run(&self, mode: SearchMode, budget: SearchBudget, clock: &dyn Clock) -> (PlanOutcome, SearchStats) {
        let symmetry = self.problem.hand_symmetry();
        Search::new(&self.problem, mode, budget)
            .with_bound(self.bound)
            .with_symmetry(symmetry.as_ref())
            .with_clock(clock)
            .run()
    }
}

/// Runs a batch of independent searches. Results come back in job order
/// whatever the execution order was.
pub trait SearchRunner: Sync {
    fn solve_all(&self, jobs: &[SearchJob], mode: SearchMode, budget: SearchBudget) -> Vec<(PlanOutcome, SearchStats)>;
}

/// Runs jobs one after another on the calling thread.
#[derive(Clone, Copy)]
pub struct Sequential<'c> {
    pub clock: &'c dyn Clock,
}

impl Default for Sequential<'_> {
    fn default() -> Self {
        Sequential { clock: &NoClock }
    }
}

impl SearchRunner for Sequential<'_> {
    fn solve_all(&self, jobs: &[SearchJob], mode: SearchMode, budget: SearchBudget) -> Vec<(PlanOutcome, SearchStats)> {
        jobs.iter().map(|job| job.run(mode, budget, self.clock)).collect()
    }
}

/// Likelihood that the observations serve a goal, given the comply and
/// avoid costs. `None` when both are infinite.
pub fn goal_likelihood(c_comply: Cost, c_avoid: Cost, beta: f64) -> Option<f64> {
    match (c_comply.is_infinite(), c_avoid.is_infinite()) {
        (true, true) => None,
        (false, true) => Some(1.0),
        (true, false) => Some(0.0),
        (false, false) => {
            let delta = c_comply.as_f64() - c_avoid.as_f64();
            Some(1.0 / (1.0 + libm::exp(beta * delta)))
        }
    }
}

/// Per-hypothesis scoring detail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoalScore {
    pub goal: String,
    pub prior: f64,
    /// Absent when no search was needed (empty observation sequence).
    pub c_comply: Option<Cost>,
    pub c_avoid: Option<Cost>,
    /// `c_comply - c_avoid` in cost units when both are finite.
    pub delta: Option<f64>,
    pub likelihood: Option<f64>,
    pub probability: f64,
    /// A search for this goal ran out of budget. Its cost is then the best
    /// known upper bound, or infinite when there is none.
    pub budget_exhausted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoalPosterior {
    pub goals: Vec<GoalScore>,
    pub observations: usize,
    pub budget_degraded: bool,
    pub searches: usize,
    pub expanded: u64,
}

impl GoalPosterior {
    /// The prior as a posterior, with no searches behind it.
    pub fn from_prior(names: &[String], priors: &[f64]) -> Self {
        GoalPosterior {
            goals: names
                .iter()
                .zip(priors)
                .map(|(name, &p)| GoalScore {
                    goal: name.clone(),
                    prior: p,
                    c_comply: None,
                    c_avoid: None,
                    delta: None,
                    likelihood: None,
                    probability: p,
                    budget_exhausted: false,
                })
                .collect(),
            observations: 0,
            budget_degraded: false,
            searches: 0,
            expanded: 0,
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.goals.iter().map(|g| g.probability).collect()
    }

    pub fn probability(&self, goal: &str) -> Option<f64> {
        self.goals.iter().find(|g| g.goal == goal).map(|g| g.probability)
    }

    /// The goal with the highest probability; earliest wins ties.
    pub fn most_likely(&self) -> Option<&GoalScore> {
        self.goals
            .iter()
            .fold(None, |best: Option<&GoalScore>, g| match best {
                Some(b) if b.probability >= g.probability => Some(b),
                _ => Some(g),
            })
    }
}

/// Recognition bound to one world: holds the turn-free model that all
/// compiled problems are built from.
pub struct Recognizer {
    model: Problem,
    world_atoms: usize,
}

impl Recognizer {
    pub fn new(world: &Problem) -> Self {
        Recognizer {
            model: world.without_predicate(TURN_PREDICATE),
            world_atoms: world.atom_count(),
        }
    }

    pub fn model(&self) -> &Problem {
        &self.model
    }

    /// Reduces world actions to observation keys, dropping actions that have
    /// no counterpart in the model (passes).
    pub fn observation_keys(&self, world: &Problem, observed: &[ActionSig]) -> Result<Vec<ObservationKey>, ModelError> {
        debug_assert_eq!(world.atom_count(), self.world_atoms);
        let mut keys = Vec::with_capacity(observed.len());
        for sig in observed {
            let action = world.action(world.resolve_action(sig)?);
            if self.model.find_action(sig).is_some() {
                keys.push(ObservationKey::of(action));
            }
        }
        Ok(keys)
    }

    /// Maps a goal over world atoms into the model's atom table.
    pub fn model_goal(&self, world: &Problem, goal: &GoalCondition) -> Result<GoalCondition, ModelError> {
        let atoms: Vec<Atom> = goal.atoms().iter().map(|&a| world.atom(a).clone()).collect();
        self.model.goal_from_atoms(&atoms)
    }

    pub fn recognize(
        &self,
        world: &Problem,
        hypotheses: &[NamedGoal],
        observed: &[ActionSig],
        config: &RecognitionConfig,
        runner: &dyn SearchRunner,
    ) -> Result<GoalPosterior, RecognitionError> {
        let keys = self.observation_keys(world, observed)?;
        let goals = hypotheses
            .iter()
            .map(|h| self.model_goal(world, &h.goal))
            .collect::<Result<Vec<_>, _>>()?;
        let names: Vec<String> = hypotheses.iter().map(|h| h.name.clone()).collect();
        recognize(&self.model, &names, &goals, &keys, None, config, runner)
    }
}

/// Scores every hypothesis against `observed` in `model` and normalizes.
/// With no observations the prior is returned untouched.
///
/// `current` is the model state reached by executing the observations from
/// the model's initial state, when they were executed there. It only speeds
/// up optimal-mode scoring; results are the same without it unless a search
/// runs out of budget.
pub fn recognize(
    model: &Problem,
    names: &[String],
    goals: &[GoalCondition],
    observed: &[ObservationKey],
    current: Option<&State>,
    config: &RecognitionConfig,
    runner: &dyn SearchRunner,
) -> Result<GoalPosterior, RecognitionError> {
    if goals.is_empty() {
        return Err(RecognitionError::NoHypotheses);
    }
    config.validate(goals.len())?;
    let priors = config.prior_vector(goals.len());
    if observed.is_empty() {
        return Ok(GoalPosterior::from_prior(names, &priors));
    }

    let mut tally = Tally::default();
    let costs = match config.mode {
        SearchMode::Optimal => optimal_costs(model, goals, observed, current, config, runner, &mut tally),
        SearchMode::Satisficing => direct_costs(model, goals, observed, config, runner, &mut tally),
    };

    let mut scores = Vec::with_capacity(goals.len());
    let mut budget_degraded = false;
    for (i, (name, cost)) in names.iter().zip(costs).enumerate() {
        budget_degraded |= cost.exhausted;
        let (c_comply, c_avoid) = (cost.comply, cost.avoid);
        let delta = (c_comply.is_finite() && c_avoid.is_finite()).then(|| c_comply.as_f64() - c_avoid.as_f64());
        scores.push(GoalScore {
            goal: name.clone(),
            prior: priors[i],
            c_comply: Some(c_comply),
            c_avoid: Some(c_avoid),
            delta,
            likelihood: goal_likelihood(c_comply, c_avoid, config.beta),
            probability: 0.0,
            budget_exhausted: cost.exhausted,
        });
    }

    let total: f64 = scores.iter().map(|s| s.likelihood.unwrap_or(0.0) * s.prior).sum();
    if !(total > 0.0) {
        return Err(RecognitionError::NoFeasibleHypothesis);
    }
    for s in &mut scores {
        s.probability = s.likelihood.unwrap_or(0.0) * s.prior / total;
    }
    Ok(GoalPosterior {
        goals: scores,
        observations: observed.len(),
        budget_degraded,
        searches: tally.searches,
        expanded: tally.expanded,
    })
}

#[derive(Default)]
struct Tally {
    searches: usize,
    expanded: u64,
}

impl Tally {
    fn run(
        &mut self,
        runner: &dyn SearchRunner,
        jobs: &[SearchJob],
        mode: SearchMode,
        budget: SearchBudget,
    ) -> Vec<(PlanOutcome, SearchStats)> {
        let results = runner.solve_all(jobs, mode, budget);
        self.searches += jobs.len();
        self.expanded += results.iter().map(|(_, s)| s.expanded).sum::<u64>();
        results
    }
}

struct GoalCosts {
    comply: Cost,
    avoid: Cost,
    exhausted: bool,
}

/// Compiles and solves both problems for every goal.
fn direct_costs(
    model: &Problem,
    goals: &[GoalCondition],
    observed: &[ObservationKey],
    config: &RecognitionConfig,
    runner: &dyn SearchRunner,
    tally: &mut Tally,
) -> Vec<GoalCosts> {
    let mut jobs = Vec::with_capacity(goals.len() * 2);
    for goal in goals {
        jobs.push(SearchJob::new(compile_comply(model, goal, observed)));
        jobs.extend(compile_avoid(model, goal, observed).map(SearchJob::new));
    }
    let results = tally.run(runner, &jobs, config.mode, config.budget);
    results
        .chunks(2)
        .map(|pair| {
            let exhausted = pair.iter().any(|(o, _)| matches!(o, PlanOutcome::BudgetExhausted));
            GoalCosts {
                comply: pair[0].0.cost(),
                avoid: pair[1].0.cost(),
                exhausted,
            }
        })
        .collect()
}

// Optimal costs with one of the two compiled searches skipped per goal. An
// optimal plan for the bare goal either embeds the observations, and then
// its cost is also the cheapest complying cost, or it does not, and then it
// is also the cheapest avoiding cost. The comply search that remains is
// bounded above by executing the observations as they happened and then
// finishing optimally.
fn optimal_costs(
    model: &Problem,
    goals: &[GoalCondition],
    observed: &[ObservationKey],
    current: Option<&State>,
    config: &RecognitionConfig,
    runner: &dyn SearchRunner,
    tally: &mut Tally,
) -> Vec<GoalCosts> {
    let jobs: Vec<SearchJob> = goals
        .iter()
        .map(|goal| SearchJob::new(model.with_goal(goal.clone())))
        .collect();
    let bare = tally.run(runner, &jobs, config.mode, config.reference_budget);

    // Finishing after the observations only has to give an achievable cost,
    // so a greedy plan stands in when the optimal one is out of budget.
    let observed_cost = current.and_then(|_| observation_cost(model, observed));
    let mut tails: Vec<Option<Cost>> = alloc::vec![None; goals.len()];
    if let (Some(state), Some(_)) = (current, observed_cost) {
        let from_here = model.with_initial_state(state.clone());
        let jobs: Vec<SearchJob> = goals
            .iter()
            .map(|goal| SearchJob::new(from_here.with_goal(goal.clone())))
            .collect();
        let optimal = tally.run(runner, &jobs, config.mode, config.budget);
        let mut retry = Vec::new();
        for (i, (outcome, _)) in optimal.iter().enumerate() {
            match outcome {
                PlanOutcome::Solved(plan) => tails[i] = Some(plan.cost),
                PlanOutcome::BudgetExhausted => retry.push(i),
                PlanOutcome::Unsolvable => {}
            }
        }
        let jobs: Vec<SearchJob> = retry.iter().map(|&i| jobs[i].clone()).collect();
        let greedy = tally.run(runner, &jobs, SearchMode::Satisficing, config.reference_budget);
        for (&i, (outcome, _)) in retry.iter().zip(&greedy) {
            tails[i] = outcome.plan().map(|p| p.cost);
        }
    }

    enum Pending {
        Done(GoalCosts),
        Comply { avoid: Cost, bound: Option<Cost> },
        Avoid { comply: Cost },
        Both,
    }
    let mut pending = Vec::with_capacity(goals.len());
    let mut jobs = Vec::new();
    for (i, goal) in goals.iter().enumerate() {
        let step = match &bare[i].0 {
            PlanOutcome::Unsolvable => Pending::Done(GoalCosts {
                comply: Cost::INFINITE,
                avoid: Cost::INFINITE,
                exhausted: false,
            }),
            PlanOutcome::BudgetExhausted => {
                jobs.push(SearchJob::new(compile_comply(model, goal, observed)));
                jobs.extend(compile_avoid(model, goal, observed).map(SearchJob::new));
                Pending::Both
            }
            PlanOutcome::Solved(plan) if embeds(model, &plan.steps, observed) => {
                jobs.extend(compile_avoid(model, goal, observed).map(SearchJob::new));
                Pending::Avoid { comply: plan.cost }
            }
            PlanOutcome::Solved(plan) => {
                let bound = observed_cost.zip(tails[i]).map(|(o, t)| o + t);
                jobs.push(SearchJob {
                    problem: compile_comply(model, goal, observed),
                    bound,
                });
                Pending::Comply { avoid: plan.cost, bound }
            }
        };
        pending.push(step);
    }
    let second = tally.run(runner, &jobs, config.mode, config.budget);
    let mut results = second.iter().map(|(o, _)| o);
    pending
        .into_iter()
        .map(|step| match step {
            Pending::Done(costs) => costs,
            Pending::Comply { avoid, bound } => {
                let outcome = results.next().expect("one result per job");
                let comply = match (outcome, bound) {
                    (PlanOutcome::Solved(plan), _) => plan.cost,
                    // Nothing beats the bound, which is itself achievable.
                    (PlanOutcome::Unsolvable, Some(b)) => b,
                    (PlanOutcome::Unsolvable, None) => Cost::INFINITE,
                    (PlanOutcome::BudgetExhausted, b) => b.unwrap_or(Cost::INFINITE),
                };
                GoalCosts {
                    comply,
                    avoid,
                    exhausted: matches!(outcome, PlanOutcome::BudgetExhausted),
                }
            }
            Pending::Avoid { comply } => {
                let outcome = results.next().expect("one result per job");
                GoalCosts {
                    comply,
                    avoid: outcome.cost(),
                    exhausted: matches!(outcome, PlanOutcome::BudgetExhausted),
                }
            }
            Pending::Both => {
                let comply = results.next().expect("one result per job");
                let avoid = results.next().expect("one result per job");
                GoalCosts {
                    comply: comply.cost(),
                    avoid: avoid.cost(),
                    exhausted: [comply, avoid].iter().any(|o| matches!(o, PlanOutcome::BudgetExhausted)),
                }
            }
        })
        .collect()
}

/// Whether `steps` embed `observed` as a subsequence.
fn embeds(model: &Problem, steps: &[ActionId], observed: &[ObservationKey]) -> bool {
    let mut next = observed.iter().peekable();
    for &id in steps {
        if next.peek().is_some_and(|key| key.matches(model.action(id))) {
            next.next();
        }
    }
    next.peek().is_none()
}

/// Total cost of the observed actions.
fn observation_cost(model: &Problem, observed: &[ObservationKey]) -> Option<Cost> {
    observed.iter().try_fold(Cost::ZERO, |total, key| {
        let action = model.actions().iter().find(|a| key.matches(a))?;
        Some(total + action.cost)
    })
}

/// Which side of the observation sequence a compiled problem asks for.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Comply,
    Avoid,
}

/// A problem whose optimal plans reach `goal` while executing `observed` in
/// order, other actions allowed in between. The empty sequence leaves the
/// problem as it is, with `goal` installed.
pub fn compile_comply(model: &Problem, goal: &GoalCondition, observed: &[ObservationKey]) -> Problem {
    if observed.is_empty() {
        return model.with_goal(goal.clone());
    }
    compile(model, goal, observed, Side::Comply)
}

/// A problem whose optimal plans reach `goal` without executing all of
/// `observed` in order. `None` for the empty sequence, which every plan
/// executes.
pub fn compile_avoid(model: &Problem, goal: &GoalCondition, observed: &[ObservationKey]) -> Option<Problem> {
    if observed.is_empty() {
        return None;
    }
    Some(compile(model, goal, observed, Side::Avoid))
}

// Progress through the observations is tracked by one-hot level atoms:
// level L means the first L observations have been embedded. An action that
// matches observation L+1 advances from level L; it is forced to, because
// its only variant at level L is the advancing one. Greedy embedding loses
// nothing: a sequence embeds in a plan iff its leftmost embedding does.
//
// Avoiding drops the variants that would complete the embedding instead of
// marking completion, which lets relaxed reachability see when the goal
// cannot be reached without them.
fn compile(model: &Problem, goal: &GoalCondition, observed: &[ObservationKey], side: Side) -> Problem {
    let n = observed.len();
    let mut parts: ProblemParts = model.to_parts();
    let base = parts.atoms.len() as u32;
    let level = |l: usize| AtomId(base + l as u32);
    for l in 0..=n {
        parts.atoms.push(Atom::new(LEVEL_PREDICATE, [l.to_string()]));
    }
    parts.init.push(level(0));

    let matching: Vec<Vec<usize>> = parts
        .actions
        .iter()
        .map(|a| (0..n).filter(|&j| observed[j].matches(a)).collect())
        .collect();
    let reachable = level_reachability(model, &matching, n, side);

    let mut actions = Vec::with_capacity(parts.actions.len());
    for (action, matching) in parts.actions.into_iter().zip(&matching) {
        if matching.is_empty() {
            actions.push(action);
            continue;
        }
        for (l, facts) in reachable.iter().enumerate() {
            if !action.pre.iter().all(|p| facts[p.index()]) {
                continue;
            }
            let mut variant = action.clone();
            variant.pre.push(level(l));
            if l < n && matching.contains(&l) {
                if side == Side::Avoid && l + 1 == n {
                    continue;
                }
                variant.name = format!("{}@{}>{}", action.name, l, l + 1);
                variant.del.push(level(l));
                variant.add.push(level(l + 1));
            } else {
                variant.name = format!("{}@{}", action.name, l);
            }
            actions.push(variant);
        }
    }
    parts.actions = actions;
    parts.goal = match side {
        Side::Comply => goal.with([level(n)]),
        Side::Avoid => goal.clone(),
    };
    parts.mutex_groups.push(MutexGroup {
        predicate: LEVEL_PREDICATE.into(),
        arity: 1,
        vary: 0,
    });
    Problem::from_parts(parts).expect("observation compilation preserves validity")
}

/// Over-approximates, for every level, the atoms that can hold while the
/// embedding is at that level (delete relaxation, levels only rising).
/// Variants whose preconditions fall outside their level's set can never
/// fire and are left out of the compiled problem.
fn level_reachability(model: &Problem, matching: &[Vec<usize>], n: usize, side: Side) -> Vec<Vec<bool>> {
    let actions = model.actions();
    let last = match side {
        Side::Comply => n,
        // Level n is unreachable when avoiding.
        Side::Avoid => n - 1,
    };
    let mut levels: Vec<Vec<bool>> = Vec::with_capacity(n + 1);
    let mut facts = alloc::vec![false; model.atom_count()];
    for atom in model.initial_state().iter() {
        facts[atom.index()] = true;
    }
    for l in 0..=last {
        // Actions usable without leaving level l.
        let stays = |i: usize| !matching[i].contains(&l);
        let mut fired = alloc::vec![false; actions.len()];
        loop {
            let mut changed = false;
            for (i, a) in actions.iter().enumerate() {
                if fired[i] || !stays(i) || !a.pre.iter().all(|p| facts[p.index()]) {
                    continue;
                }
                fired[i] = true;
                for q in &a.add {
                    if !facts[q.index()] {
                        facts[q.index()] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let here = facts.clone();
        // Entering level l+1 adds the effects of the advancing actions.
        let mut advanced = false;
        if l < n {
            for (i, a) in actions.iter().enumerate() {
                if matching[i].contains(&l) && a.pre.iter().all(|p| here[p.index()]) {
                    advanced = true;
                    for q in &a.add {
                        facts[q.index()] = true;
                    }
                }
            }
        }
        levels.push(here);
        if !advanced {
            break;
        }
    }
    levels.truncate(last + 1);
    levels
}
