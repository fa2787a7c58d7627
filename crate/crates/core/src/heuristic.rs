//! Delete-relaxation heuristics: hmax, hadd, and the LM-cut bound used by
//! optimal search.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::cost::Cost;
use crate::strips::{AtomId, GoalCondition, Problem, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    /// Maximum over preconditions; admissible.
    #[serde(rename = "hmax")]
    Max,
    /// Sum over preconditions; informative but inadmissible.
    #[serde(rename = "hadd")]
    Add,
    /// Landmark-cut bound; admissible and dominates hmax.
    #[serde(rename = "lmcut")]
    LmCut,
}

/// Heuristic estimate of the cost of reaching `goal` from `state`.
/// Returns [`Cost::INFINITE`] when some goal atom is relaxed-unreachable.
pub fn heuristic(problem: &Problem, state: &State, goal: &GoalCondition, kind: HeuristicKind) -> Cost {
    Evaluator::new(problem).evaluate(state, goal, kind)
}

/// Compressed adjacency lists.
struct Csr {
    start: Vec<u32>,
    items: Vec<u32>,
}

impl Csr {
    fn from_lists<'a>(lists: impl Iterator<Item = &'a [u32]>) -> Self {
        let mut start = vec![0];
        let mut items = Vec::new();
        for list in lists {
            items.extend_from_slice(list);
            start.push(items.len() as u32);
        }
        Csr { start, items }
    }

    fn transpose(&self, targets: usize) -> Self {
        let mut lists = vec![Vec::new(); targets];
        for row in 0..self.start.len() - 1 {
            for &t in self.row(row) {
                lists[t as usize].push(row as u32);
            }
        }
        Csr::from_lists(lists.iter().map(|l| l.as_slice()))
    }

    #[inline]
    fn row(&self, i: usize) -> &[u32] {
        &self.items[self.start[i] as usize..self.start[i + 1] as usize]
    }
}

/// Reusable heuristic evaluator holding per-problem relaxation tables and
/// scratch buffers.
///
/// Actions with no preconditions are given a virtual always-true `source`
/// fact. The goal is handled as one more action whose preconditions are the
/// goal atoms and whose only effect is a virtual goal fact.
pub struct Evaluator<'p> {
    problem: &'p Problem,
    action_count: usize,
    pre: Csr,
    add: Csr,
    consumers: Csr,
    achievers: Csr,
    base_cost: Vec<Cost>,
    atom_count: usize,
    goal_pre: Vec<u32>,
    is_goal_atom: Vec<bool>,
    // scratch
    cost: Vec<Cost>,
    fact_cost: Vec<Cost>,
    action_cost: Vec<Cost>,
    unsatisfied: Vec<u32>,
    support: Vec<u32>,
    heap: BinaryHeap<Reverse<(Cost, u32)>>,
    in_goal_zone: Vec<bool>,
    reached: Vec<bool>,
    stack: Vec<u32>,
    cut: Vec<u32>,
}

const NO_FACT: u32 = u32::MAX;

impl<'p> Evaluator<'p> {
    pub fn new(problem: &'p Problem) -> Self {
        let atom_count = problem.atom_count();
        let source = atom_count as u32 + 1;
        let fact_count = atom_count + 2;
        let action_count = problem.actions().len();
        let pre_lists: Vec<Vec<u32>> = problem
            .actions()
            .iter()
            .map(|a| {
                if a.pre.is_empty() {
                    vec![source]
                } else {
                    a.pre.iter().map(|p| p.0).collect()
                }
            })
            .collect();
        let add_lists: Vec<Vec<u32>> = problem
            .actions()
            .iter()
            .map(|a| a.add.iter().map(|p| p.0).collect())
            .collect();
        let pre = Csr::from_lists(pre_lists.iter().map(|l| l.as_slice()));
        let add = Csr::from_lists(add_lists.iter().map(|l| l.as_slice()));
        let consumers = pre.transpose(fact_count);
        let achievers = add.transpose(fact_count);
        let slots = action_count + 1;
        Evaluator {
            problem,
            action_count,
            pre,
            add,
            consumers,
            achievers,
            base_cost: problem.actions().iter().map(|a| a.cost).collect(),
            atom_count,
            goal_pre: Vec::new(),
            is_goal_atom: vec![false; fact_count],
            cost: vec![Cost::ZERO; slots],
            fact_cost: vec![Cost::INFINITE; fact_count],
            action_cost: vec![Cost::INFINITE; slots],
            unsatisfied: vec![0; slots],
            support: vec![NO_FACT; slots],
            heap: BinaryHeap::new(),
            in_goal_zone: vec![false; fact_count],
            reached: vec![false; fact_count],
            stack: Vec::new(),
            cut: Vec::new(),
        }
    }

    pub fn problem(&self) -> &'p Problem {
        self.problem
    }

    #[inline]
    fn goal_action(&self) -> usize {
        self.action_count
    }

    #[inline]
    fn goal_fact(&self) -> u32 {
        self.atom_count as u32
    }

    #[inline]
    fn source_fact(&self) -> u32 {
        self.atom_count as u32 + 1
    }

    #[inline]
    fn pre_of(&self, a: usize) -> &[u32] {
        if a == self.action_count {
            &self.goal_pre
        } else {
            self.pre.row(a)
        }
    }

    fn set_goal(&mut self, goal: &GoalCondition) {
        for &f in &self.goal_pre {
            self.is_goal_atom[f as usize] = false;
        }
        self.goal_pre.clear();
        self.goal_pre.extend(goal.atoms().iter().map(|a| a.0));
        if self.goal_pre.is_empty() {
            self.goal_pre.push(self.source_fact());
        }
        for &f in &self.goal_pre {
            self.is_goal_atom[f as usize] = true;
        }
    }

    pub fn evaluate(&mut self, state: &State, goal: &GoalCondition, kind: HeuristicKind) -> Cost {
        if self.problem.satisfies(state, goal) {
            return Cost::ZERO;
        }
        self.set_goal(goal);
        self.cost[..self.action_count].copy_from_slice(&self.base_cost);
        let ga = self.goal_action();
        self.cost[ga] = Cost::ZERO;
        match kind {
            HeuristicKind::Max | HeuristicKind::Add => {
                self.relax(state, kind == HeuristicKind::Add);
                self.fact_cost[self.goal_fact() as usize]
            }
            HeuristicKind::LmCut => self.lmcut(state),
        }
    }

    /// Generalized Dijkstra over the relaxed problem using the current
    /// action costs. Fills `fact_cost`, `action_cost`, and (for max) the
    /// supporting precondition of each action.
    fn relax(&mut self, state: &State, additive: bool) {
        let ga = self.goal_action();
        self.fact_cost.fill(Cost::INFINITE);
        self.action_cost.fill(if additive { Cost::ZERO } else { Cost::INFINITE });
        self.support.fill(NO_FACT);
        for a in 0..self.action_count {
            self.unsatisfied[a] = self.pre.start[a + 1] - self.pre.start[a];
        }
        self.unsatisfied[ga] = self.goal_pre.len() as u32;
        self.heap.clear();
        for atom in state.iter() {
            self.fact_cost[atom.index()] = Cost::ZERO;
            self.heap.push(Reverse((Cost::ZERO, atom.0)));
        }
        let source = self.source_fact();
        self.fact_cost[source as usize] = Cost::ZERO;
        self.heap.push(Reverse((Cost::ZERO, source)));

        while let Some(Reverse((cost, fact))) = self.heap.pop() {
            if cost > self.fact_cost[fact as usize] {
                continue;
            }
            let f = fact as usize;
            let (lo, hi) = (self.consumers.start[f] as usize, self.consumers.start[f + 1] as usize);
            for i in lo..hi {
                let a = self.consumers.items[i] as usize;
                self.enable(a, cost, fact, additive);
            }
            if self.is_goal_atom[f] {
                self.enable(ga, cost, fact, additive);
            }
        }
        // Actions never enabled keep an infinite cost.
        for a in 0..=ga {
            if self.unsatisfied[a] != 0 {
                self.action_cost[a] = Cost::INFINITE;
            }
        }
    }

    #[inline]
    fn enable(&mut self, a: usize, cost: Cost, fact: u32, additive: bool) {
        if additive {
            self.action_cost[a] += cost;
        } else {
            // Facts pop in non-decreasing cost order, so the last
            // precondition popped carries the maximum.
            self.action_cost[a] = cost;
            self.support[a] = fact;
        }
        self.unsatisfied[a] -= 1;
        if self.unsatisfied[a] == 0 {
            let reach = self.action_cost[a] + self.cost[a];
            self.lower_effects(a, reach);
        }
    }

    #[inline]
    fn lower_effects(&mut self, a: usize, reach: Cost) {
        if a == self.goal_action() {
            let g = self.goal_fact() as usize;
            if reach < self.fact_cost[g] {
                self.fact_cost[g] = reach;
            }
            return;
        }
        let (lo, hi) = (self.add.start[a] as usize, self.add.start[a + 1] as usize);
        for i in lo..hi {
            let q = self.add.items[i];
            if reach < self.fact_cost[q as usize] {
                self.fact_cost[q as usize] = reach;
                self.heap.push(Reverse((reach, q)));
            }
        }
    }

    /// Restores hmax values after the costs of the actions in `cut` dropped.
    /// Costs only fall, so only decreases need propagating, and an action's
    /// maximum can only change through its current support.
    fn update_after_cut(&mut self) {
        self.heap.clear();
        for i in 0..self.cut.len() {
            let a = self.cut[i] as usize;
            let reach = self.action_cost[a] + self.cost[a];
            self.lower_effects(a, reach);
        }
        let ga = self.goal_action();
        while let Some(Reverse((cost, fact))) = self.heap.pop() {
            if cost > self.fact_cost[fact as usize] {
                continue;
            }
            let f = fact as usize;
            let (lo, hi) = (self.consumers.start[f] as usize, self.consumers.start[f + 1] as usize);
            for i in lo..hi {
                let a = self.consumers.items[i] as usize;
                if self.support[a] == fact {
                    self.refresh_support(a);
                }
            }
            if self.is_goal_atom[f] && self.support[ga] == fact {
                self.refresh_support(ga);
            }
        }
    }

    fn refresh_support(&mut self, a: usize) {
        let mut best = Cost::ZERO;
        let mut arg = NO_FACT;
        for &p in self.pre_of(a) {
            let c = self.fact_cost[p as usize];
            if arg == NO_FACT || c > best {
                best = c;
                arg = p;
            }
        }
        let old = self.action_cost[a];
        self.support[a] = arg;
        self.action_cost[a] = best;
        if best < old {
            let reach = best + self.cost[a];
            self.lower_effects(a, reach);
        }
    }

    fn lmcut(&mut self, state: &State) -> Cost {
        let goal = self.goal_fact() as usize;
        let source = self.source_fact();
        let ga = self.goal_action();
        let mut total = Cost::ZERO;
        self.relax(state, false);
        loop {
            let hgoal = self.fact_cost[goal];
            if hgoal.is_infinite() {
                return Cost::INFINITE;
            }
            if hgoal == Cost::ZERO {
                return total;
            }

            // Goal zone: facts connected to the goal through zero-cost
            // justification edges.
            self.in_goal_zone.fill(false);
            self.in_goal_zone[goal] = true;
            self.stack.clear();
            // The goal fact's only achiever is the goal action (cost 0).
            let s = self.support[ga];
            if s != NO_FACT && !self.in_goal_zone[s as usize] {
                self.in_goal_zone[s as usize] = true;
                self.stack.push(s);
            }
            while let Some(f) = self.stack.pop() {
                let f = f as usize;
                let (lo, hi) = (self.achievers.start[f] as usize, self.achievers.start[f + 1] as usize);
                for i in lo..hi {
                    let a = self.achievers.items[i] as usize;
                    if self.cost[a] != Cost::ZERO || self.action_cost[a].is_infinite() {
                        continue;
                    }
                    let s = self.support[a];
                    if s != NO_FACT && !self.in_goal_zone[s as usize] {
                        self.in_goal_zone[s as usize] = true;
                        self.stack.push(s);
                    }
                }
            }

            // Facts reachable from the state without entering the goal
            // zone; actions crossing into it form the cut. The goal action
            // never qualifies: its support lies inside the zone.
            self.reached.fill(false);
            self.stack.clear();
            for atom in state.iter() {
                if !self.in_goal_zone[atom.index()] {
                    self.reached[atom.index()] = true;
                    self.stack.push(atom.0);
                }
            }
            self.reached[source as usize] = true;
            self.stack.push(source);
            self.cut.clear();
            while let Some(f) = self.stack.pop() {
                let fi = f as usize;
                let (lo, hi) = (self.consumers.start[fi] as usize, self.consumers.start[fi + 1] as usize);
                for i in lo..hi {
                    let a = self.consumers.items[i] as usize;
                    if self.support[a] != f || self.action_cost[a].is_infinite() {
                        continue;
                    }
                    let mut crosses = false;
                    let (alo, ahi) = (self.add.start[a] as usize, self.add.start[a + 1] as usize);
                    for j in alo..ahi {
                        let q = self.add.items[j] as usize;
                        if self.in_goal_zone[q] {
                            crosses = true;
                        } else if !self.reached[q] {
                            self.reached[q] = true;
                            self.stack.push(q as u32);
                        }
                    }
                    if crosses {
                        self.cut.push(a as u32);
                    }
                }
            }
            self.cut.sort_unstable();
            self.cut.dedup();
            let Some(landmark) = self.cut.iter().map(|&a| self.cost[a as usize]).min() else {
                // No cut can only mean the goal is unreachable.
                return Cost::INFINITE;
            };
            debug_assert!(landmark > Cost::ZERO);
            total += landmark;
            for i in 0..self.cut.len() {
                let a = self.cut[i] as usize;
                self.cost[a] = self.cost[a] - landmark;
            }
            self.update_after_cut();
        }
    }
}

/// Whether `atom` has any achieving action in `problem`.
pub fn has_achiever(problem: &Problem, atom: AtomId) -> bool {
    problem.actions().iter().any(|a| a.add.contains(&atom))
}
