//! Worst-case distinctiveness between two goals: the longest action prefix
//! that some optimal plan for each goal has in common.
//!
//! Exhaustive over optimal plans, so only practical on small instances.

use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::cost::Cost;
use crate::heuristic::{Evaluator, HeuristicKind};
use crate::planner::{PlanOutcome, Search, SearchBudget, SearchMode};
use crate::strips::{GoalCondition, Problem, State};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum WcdError {
    #[error("goal {0} is unsolvable from the initial state")]
    Unsolvable(char),
    #[error("optimal-plan enumeration exceeded its budget")]
    BudgetExhausted,
}

struct Distances<'p> {
    problem: &'p Problem,
    goal: GoalCondition,
    evaluator: Evaluator<'p>,
    memo: HashMap<State, Cost>,
}

impl<'p> Distances<'p> {
    fn new(problem: &'p Problem, goal: GoalCondition) -> Self {
        Distances {
            problem,
            goal,
            evaluator: Evaluator::new(problem),
            memo: HashMap::new(),
        }
    }

    /// Optimal cost from `state`, drawing expansions from `remaining`.
    fn distance(&mut self, state: &State, remaining: &mut u64) -> Result<Cost, WcdError> {
        if let Some(&d) = self.memo.get(state) {
            return Ok(d);
        }
        let budget = SearchBudget {
            max_expansions: *remaining,
            max_millis: u64::MAX,
        };
        let search = Search::new(self.problem, SearchMode::Optimal, budget);
        let (outcome, stats) = search.run_with(&mut self.evaluator, state, &self.goal);
        *remaining = remaining.saturating_sub(stats.expanded);
        let d = match outcome {
            PlanOutcome::Solved(plan) => plan.cost,
            PlanOutcome::Unsolvable => Cost::INFINITE,
            PlanOutcome::BudgetExhausted => return Err(WcdError::BudgetExhausted),
        };
        self.memo.insert(state.clone(), d);
        Ok(d)
    }

    fn lower_bound(&mut self, state: &State) -> Cost {
        let goal = self.goal.clone();
        self.evaluator.evaluate(state, &goal, HeuristicKind::LmCut)
    }
}

/// Length of the longest common prefix over all pairs of optimal plans for
/// `goal_a` and `goal_b` from the problem's initial state. Plans are taken
/// as simple paths: steps that revisit a state are never counted.
pub fn wcd(
    problem: &Problem,
    goal_a: &GoalCondition,
    goal_b: &GoalCondition,
    budget: SearchBudget,
) -> Result<usize, WcdError> {
    let mut remaining = budget.max_expansions;
    let mut a = Distances::new(problem, goal_a.clone());
    let mut b = Distances::new(problem, goal_b.clone());
    let init = problem.initial_state().clone();
    let best_a = a.distance(&init, &mut remaining)?;
    if best_a.is_infinite() {
        return Err(WcdError::Unsolvable('A'));
    }
    let best_b = b.distance(&init, &mut remaining)?;
    if best_b.is_infinite() {
        return Err(WcdError::Unsolvable('B'));
    }
    let mut walker = Walker {
        problem,
        a,
        b,
        best_a,
        best_b,
        remaining,
        path: alloc::vec![init.clone()],
        memo: HashMap::new(),
    };
    walker.longest(&init, Cost::ZERO)
}

struct Walker<'p> {
    problem: &'p Problem,
    a: Distances<'p>,
    b: Distances<'p>,
    best_a: Cost,
    best_b: Cost,
    remaining: u64,
    path: Vec<State>,
    memo: HashMap<(State, Cost), usize>,
}

impl Walker<'_> {
    fn longest(&mut self, state: &State, g: Cost) -> Result<usize, WcdError> {
        if let Some(&depth) = self.memo.get(&(state.clone(), g)) {
            return Ok(depth);
        }
        let mut best = 0;
        for action in self.problem.applicable_actions(state) {
            let next = self.problem.apply_unchecked(state, action);
            if self.path.contains(&next) {
                continue;
            }
            let g2 = g + self.problem.action(action).cost;
            if g2 + self.a.lower_bound(&next) > self.best_a
                || g2 + self.b.lower_bound(&next) > self.best_b
            {
                continue;
            }
            if g2 + self.a.distance(&next, &mut self.remaining)? != self.best_a {
                continue;
            }
            if g2 + self.b.distance(&next, &mut self.remaining)? != self.best_b {
                continue;
            }
            self.path.push(next.clone());
            let depth = self.longest(&next, g2);
            self.path.pop();
            best = best.max(1 + depth?);
        }
        self.memo.insert((state.clone(), g), best);
        Ok(best)
    }
}
