//! Forward state-space search.
//!
//! Optimal mode runs A* with the LM-cut bound and reopens nodes whose cost
//! improves. Satisficing mode runs greedy best-first search on hadd. Ties on
//! the priority key fall back to lower heuristic values and then to
//! generation order; successors are generated in action-name order, so runs
//! are reproducible.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use hashbrown::HashMap;
use serde::{Deserialize, Serialize};

use crate::cost::Cost;
use crate::heuristic::{Evaluator, HeuristicKind};
use crate::strips::{ActionId, GoalCondition, Problem, State, Symmetry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    #[default]
    Optimal,
    Satisficing,
}

/// Limits on a single search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchBudget {
    pub max_expansions: u64,
    pub max_millis: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_expansions: 2_000_000,
            max_millis: 60_000,
        }
    }
}

impl SearchBudget {
    pub fn is_valid(&self) -> bool {
        self.max_expansions > 0 && self.max_millis > 0
    }
}

/// Millisecond time source for wall-clock budgets.
pub trait Clock: Sync {
    fn now_millis(&self) -> u64;
}

/// A clock that never advances; only the expansion budget applies.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_millis(&self) -> u64 {
        0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Plan {
    pub steps: Vec<ActionId>,
    pub cost: Cost,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlanOutcome {
    Solved(Plan),
    /// The reachable state space holds no goal state.
    Unsolvable,
    BudgetExhausted,
}

impl PlanOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            PlanOutcome::Solved(plan) => Some(plan),
            _ => None,
        }
    }

    /// Plan cost, infinite when no plan was found.
    pub fn cost(&self) -> Cost {
        self.plan().map_or(Cost::INFINITE, |p| p.cost)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expanded: u64,
    pub generated: u64,
}

/// Plans from the problem's initial state to its goal.
pub fn plan(problem: &Problem, mode: SearchMode, budget: SearchBudget) -> PlanOutcome {
    Search::new(problem, mode, budget).run().0
}

/// Search configuration bound to one problem.
pub struct Search<'a> {
    problem: &'a Problem,
    mode: SearchMode,
    budget: SearchBudget,
    clock: &'a dyn Clock,
    bound: Option<Cost>,
    symmetry: Option<&'a Symmetry>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
struct OpenEntry {
    primary: Cost,
    h: Cost,
    seq: u64,
    node: u32,
}

impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.primary, self.h, self.seq).cmp(&(other.primary, other.h, other.seq))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Node {
    state: State,
    parent: u32,
    action: Option<ActionId>,
    g: Cost,
}

struct Seen {
    node: u32,
    g: Cost,
    h: Cost,
    closed: bool,
}

impl<'a> Search<'a> {
    pub fn new(problem: &'a Problem, mode: SearchMode, budget: SearchBudget) -> Self {
        Search {
            problem,
            mode,
            budget,
            clock: &NoClock,
            bound: None,
            symmetry: None,
        }
    }

    /// Treats states related by `symmetry` as one state. Ignored for goals
    /// the symmetry does not fix.
    pub fn with_symmetry(mut self, symmetry: Option<&'a Symmetry>) -> Self {
        self.symmetry = symmetry;
        self
    }

    /// Only look for plans strictly cheaper than `bound` (optimal mode).
    /// When none exists the search reports `Unsolvable`.
    pub fn with_bound(mut self, bound: Option<Cost>) -> Self {
        self.bound = bound.filter(|_| self.mode == SearchMode::Optimal);
        self
    }

    pub fn with_clock(mut self, clock: &'a dyn Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn run(&self) -> (PlanOutcome, SearchStats) {
        self.run_from(self.problem.initial_state(), self.problem.goal())
    }

    /// Searches from an arbitrary state toward an arbitrary goal.
    pub fn run_from(&self, start: &State, goal: &GoalCondition) -> (PlanOutcome, SearchStats) {
        let mut evaluator = Evaluator::new(self.problem);
        self.run_with(&mut evaluator, start, goal)
    }

    pub(crate) fn run_with(
        &self,
        evaluator: &mut Evaluator<'_>,
        start: &State,
        goal: &GoalCondition,
    ) -> (PlanOutcome, SearchStats) {
        let mut stats = SearchStats::default();
        if !self.problem.goal_conflicts(goal).is_empty() {
            return (PlanOutcome::Unsolvable, stats);
        }
        let kind = match self.mode {
            SearchMode::Optimal => HeuristicKind::LmCut,
            SearchMode::Satisficing => HeuristicKind::Add,
        };
        let started = self.clock.now_millis();
        let problem = self.problem;
        let symmetry = self.symmetry.filter(|s| s.fixes(goal));
        let key = |state: &State| match symmetry {
            Some(s) => s.canonical(state.clone()),
            None => state.clone(),
        };

        let h0 = evaluator.evaluate(start, goal, kind);
        if h0.is_infinite() || self.out_of_bound(Cost::ZERO, h0) {
            return (PlanOutcome::Unsolvable, stats);
        }
        let mut nodes = alloc::vec![Node {
            state: start.clone(),
            parent: u32::MAX,
            action: None,
            g: Cost::ZERO,
        }];
        let mut seen: HashMap<State, Seen> = HashMap::new();
        seen.insert(
            key(start),
            Seen {
                node: 0,
                g: Cost::ZERO,
                h: h0,
                closed: false,
            },
        );
        let mut open = BinaryHeap::new();
        let mut seq = 0u64;
        open.push(Reverse(OpenEntry {
            primary: self.priority(Cost::ZERO, h0),
            h: h0,
            seq,
            node: 0,
        }));

        while let Some(Reverse(entry)) = open.pop() {
            let node = &nodes[entry.node as usize];
            let record = seen.get_mut(&key(&node.state)).expect("open nodes are recorded");
            if record.node != entry.node || record.closed {
                continue;
            }
            record.closed = true;
            let g = node.g;
            if problem.satisfies(&node.state, goal) {
                return (PlanOutcome::Solved(extract(&nodes, entry.node)), stats);
            }
            stats.expanded += 1;
            if stats.expanded > self.budget.max_expansions {
                return (PlanOutcome::BudgetExhausted, stats);
            }
            if stats.expanded % 64 == 0
                && self.clock.now_millis().saturating_sub(started) > self.budget.max_millis
            {
                return (PlanOutcome::BudgetExhausted, stats);
            }

            let state = node.state.clone();
            for action in problem.applicable_actions(&state) {
                let next = problem.apply_unchecked(&state, action);
                let g2 = g + problem.action(action).cost;
                stats.generated += 1;
                let next_key = key(&next);
                let h = match seen.get_mut(&next_key) {
                    Some(record) => {
                        let improves = match self.mode {
                            SearchMode::Optimal => g2 < record.g,
                            SearchMode::Satisficing => false,
                        };
                        if !improves || self.out_of_bound(g2, record.h) {
                            continue;
                        }
                        record.g = g2;
                        record.closed = false;
                        record.node = nodes.len() as u32;
                        record.h
                    }
                    None => {
                        let h = evaluator.evaluate(&next, goal, kind);
                        if h.is_infinite() {
                            // Dead end: remember it so it is never evaluated again.
                            seen.insert(
                                next_key,
                                Seen {
                                    node: u32::MAX,
                                    g: Cost::ZERO,
                                    h,
                                    closed: true,
                                },
                            );
                            continue;
                        }
                        if self.out_of_bound(g2, h) {
                            // Closed at this g; a cheaper path may reopen it.
                            seen.insert(
                                next_key,
                                Seen {
                                    node: u32::MAX,
                                    g: g2,
                                    h,
                                    closed: true,
                                },
                            );
                            continue;
                        }
                        seen.insert(
                            next_key,
                            Seen {
                                node: nodes.len() as u32,
                                g: g2,
                                h,
                                closed: false,
                            },
                        );
                        h
                    }
                };
                let id = nodes.len() as u32;
                nodes.push(Node {
                    state: next,
                    parent: entry.node,
                    action: Some(action),
                    g: g2,
                });
                seq += 1;
                open.push(Reverse(OpenEntry {
                    primary: self.priority(g2, h),
                    h,
                    seq,
                    node: id,
                }));
            }
        }
        (PlanOutcome::Unsolvable, stats)
    }

    fn out_of_bound(&self, g: Cost, h: Cost) -> bool {
        self.bound.is_some_and(|b| g + h >= b)
    }

    fn priority(&self, g: Cost, h: Cost) -> Cost {
        match self.mode {
            SearchMode::Optimal => g + h,
            SearchMode::Satisficing => h,
        }
    }
}

fn extract(nodes: &[Node], mut at: u32) -> Plan {
    let cost = nodes[at as usize].g;
    let mut steps = Vec::new();
    while let Some(action) = nodes[at as usize].action {
        steps.push(action);
        at = nodes[at as usize].parent;
    }
    steps.reverse();
    Plan { steps, cost }
}

/// Result of checking a plan against a problem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum PlanValidation {
    Valid,
    /// Step `step` (1-based) is not applicable where it occurs.
    Inapplicable { step: usize },
    /// Every step applies but the final state misses the goal.
    GoalNotReached,
}

impl PlanValidation {
    pub fn is_valid(&self) -> bool {
        matches!(self, PlanValidation::Valid)
    }
}

pub fn validate_plan(problem: &Problem, plan: &Plan) -> PlanValidation {
    validate_steps(problem, problem.initial_state(), problem.goal(), &plan.steps)
}

pub fn validate_steps(
    problem: &Problem,
    start: &State,
    goal: &GoalCondition,
    steps: &[ActionId],
) -> PlanValidation {
    let mut state = start.clone();
    for (i, &action) in steps.iter().enumerate() {
        match problem.apply(&state, action) {
            Ok(next) => state = next,
            Err(_) => return PlanValidation::Inapplicable { step: i + 1 },
        }
    }
    if problem.satisfies(&state, goal) {
        PlanValidation::Valid
    } else {
        PlanValidation::GoalNotReached
    }
}
