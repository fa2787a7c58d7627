//! From a goal posterior to an agent action: weigh goal features, keep the
//! ones above the threshold as an intermediate goal, plan a joint
//! turn-taking path to it, and fall back when there is none.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cost::Cost;
use crate::planner::{Clock, PlanOutcome, Search, SearchBudget, SearchMode};
use crate::strips::{ActionId, ActionSig, Atom, AtomId, GoalCondition, ModelError, Problem, State};

/// Posterior values are compared in integer units of this size, so a weight
/// sitting exactly on the threshold compares the same everywhere.
pub const WEIGHT_SCALE: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FallbackPolicy {
    /// Pass the turn.
    #[default]
    Noop,
    /// Empty the agent's hand, then pass.
    DefaultGoal,
}

impl core::str::FromStr for FallbackPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "noop" => Ok(FallbackPolicy::Noop),
            "default-goal" => Ok(FallbackPolicy::DefaultGoal),
            other => Err(alloc::format!("unknown fallback policy `{other}` (expected noop or default-goal)")),
        }
    }
}

/// A posterior probability in fixed-point units.
pub fn weight_units(p: f64) -> u64 {
    libm::round(p.clamp(0.0, 1.0) * WEIGHT_SCALE) as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureWeight {
    pub atom: AtomId,
    /// Summed posterior in units of 1e-12.
    pub units: u64,
}

impl FeatureWeight {
    pub fn value(&self) -> f64 {
        self.units as f64 / WEIGHT_SCALE
    }
}

/// Posterior-weighted frequency of every atom appearing in some goal,
/// ordered by atom id.
pub fn feature_weights(goals: &[GoalCondition], posterior: &[f64]) -> Vec<FeatureWeight> {
    debug_assert_eq!(goals.len(), posterior.len());
    let mut weights: Vec<FeatureWeight> = Vec::new();
    for (goal, &p) in goals.iter().zip(posterior) {
        let units = weight_units(p);
        for &atom in goal.atoms() {
            match weights.binary_search_by_key(&atom, |w| w.atom) {
                Ok(i) => weights[i].units += units,
                Err(i) => weights.insert(i, FeatureWeight { atom, units }),
            }
        }
    }
    weights
}

/// Conjunction of the features whose weight reaches the threshold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntermediateGoal {
    pub features: Vec<FeatureWeight>,
    pub goal: GoalCondition,
    /// Pairs of features that cannot hold together.
    pub conflicts: Vec<(AtomId, AtomId)>,
    /// Features not yet true in the state the goal was built for.
    pub unsatisfied: Vec<AtomId>,
}

impl IntermediateGoal {
    pub fn is_consistent(&self) -> bool {
        self.conflicts.is_empty()
    }

    /// Nothing to change: every feature already holds (or there are none).
    pub fn satisfied_already(&self) -> bool {
        self.unsatisfied.is_empty()
    }
}

pub fn intermediate_goal(
    problem: &Problem,
    state: &State,
    goals: &[GoalCondition],
    posterior: &[f64],
    tau: f64,
) -> IntermediateGoal {
    let threshold = weight_units(tau);
    let features: Vec<FeatureWeight> = feature_weights(goals, posterior)
        .into_iter()
        .filter(|w| w.units >= threshold)
        .collect();
    let goal = GoalCondition::new(features.iter().map(|w| w.atom));
    IntermediateGoal {
        conflicts: problem.goal_conflicts(&goal),
        unsatisfied: goal.atoms().iter().copied().filter(|&a| !state.contains(a)).collect(),
        features,
        goal,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointStep {
    pub actor: String,
    pub action: ActionSig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointPlan {
    pub steps: Vec<JointStep>,
    pub cost: Cost,
    /// Atoms of the goal the plan serves.
    pub goal: Vec<Atom>,
}

impl JointPlan {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum JointOutcome {
    Solved { plan: JointPlan, ids: Vec<ActionId> },
    Unsolvable,
    BudgetExhausted,
}

/// Optimal plan for `goal` from `state` in the turn-taking world, with the
/// steps tagged by actor.
pub fn joint_plan(
    world: &Problem,
    state: &State,
    goal: &GoalCondition,
    budget: SearchBudget,
    clock: &dyn Clock,
) -> JointOutcome {
    let symmetry = world.hand_symmetry();
    let (outcome, _) = Search::new(world, SearchMode::Optimal, budget)
        .with_symmetry(symmetry.as_ref())
        .with_clock(clock)
        .run_from(state, goal);
    match outcome {
        PlanOutcome::Solved(plan) => JointOutcome::Solved {
            plan: JointPlan {
                steps: plan
                    .steps
                    .iter()
                    .map(|&id| {
                        let a = world.action(id);
                        JointStep {
                            actor: a.actor.clone().unwrap_or_default(),
                            action: a.signature(),
                        }
                    })
                    .collect(),
                cost: plan.cost,
                goal: goal.atoms().iter().map(|&a| world.atom(a).clone()).collect(),
            },
            ids: plan.steps,
        },
        PlanOutcome::Unsolvable => JointOutcome::Unsolvable,
        PlanOutcome::BudgetExhausted => JointOutcome::BudgetExhausted,
    }
}

/// The first step taken by `agent` and the first step by anyone else after
/// it.
pub fn next_actions<'p>(plan: &'p JointPlan, agent: &str) -> Option<(&'p JointStep, Option<&'p JointStep>)> {
    let first = plan.steps.iter().position(|s| s.actor == agent)?;
    let reply = plan.steps[first + 1..].iter().find(|s| s.actor != agent);
    Some((&plan.steps[first], reply))
}

/// The no-op action of `actor`.
pub fn noop_action(world: &Problem, actor: &str) -> Result<ActionId, ModelError> {
    world.resolve_action(&ActionSig::new("noop", [actor]))
}

/// The default goal: the actor's hand is empty.
pub fn default_goal(world: &Problem, actor: &str) -> Result<GoalCondition, ModelError> {
    world.goal_from_atoms(&[Atom::new("handempty", [actor])])
}

/// What the agent does when it has no plan to follow.
pub fn fallback_action(
    world: &Problem,
    state: &State,
    agent: &str,
    policy: FallbackPolicy,
    budget: SearchBudget,
    clock: &dyn Clock,
) -> Result<ActionId, ModelError> {
    let noop = noop_action(world, agent)?;
    if policy == FallbackPolicy::Noop {
        return Ok(noop);
    }
    let goal = default_goal(world, agent)?;
    if world.satisfies(state, &goal) {
        return Ok(noop);
    }
    let (outcome, _) = Search::new(world, SearchMode::Optimal, budget)
        .with_clock(clock)
        .run_from(state, &goal);
    let step = outcome.plan().and_then(|plan| {
        plan.steps
            .iter()
            .copied()
            .find(|&id| world.action(id).actor.as_deref() == Some(agent))
    });
    Ok(step.unwrap_or(noop))
}
