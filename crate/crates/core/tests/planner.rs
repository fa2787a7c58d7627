mod common;

use common::frozen::*;
use common::{optimal_cost, random_walk, World};
use pretcil_core::blockwords::{make_blockwords, word_atoms, BlockWordsSpec};
use pretcil_core::distinctiveness::{wcd, WcdError};
use pretcil_core::heuristic::{heuristic, HeuristicKind};
use pretcil_core::planner::{plan, validate_plan, validate_steps, PlanOutcome, PlanValidation, Search, SearchBudget, SearchMode};
use pretcil_core::{ActionSig, Atom, Cost, GoalCondition, Problem, State};

const BUDGET: SearchBudget = SearchBudget {
    max_expansions: 2_000_000,
    max_millis: u64::MAX,
};

fn solo() -> (Problem, Vec<pretcil_core::blockwords::NamedGoal>) {
    make_blockwords(&BlockWordsSpec::demo_solo()).unwrap()
}

fn word_goal(p: &Problem, word: &str) -> GoalCondition {
    p.goal_from_atoms(&word_atoms(word)).unwrap()
}

fn goal(p: &Problem, atoms: &[&str]) -> GoalCondition {
    let atoms: Vec<Atom> = atoms.iter().map(|a| a.parse().unwrap()).collect();
    p.goal_from_atoms(&atoms).unwrap()
}

fn names(p: &Problem, steps: &[pretcil_core::ActionId]) -> Vec<String> {
    steps.iter().map(|&a| p.action(a).signature().to_string()).collect()
}

fn solved(outcome: PlanOutcome) -> pretcil_core::planner::Plan {
    match outcome {
        PlanOutcome::Solved(plan) => plan,
        other => panic!("expected a plan, got {other:?}"),
    }
}

#[test]
fn optimal_costs_match_the_oracle() {
    let (p, goals) = solo();
    for (g, (word, cost)) in goals.iter().zip(SOLO_COST) {
        assert_eq!(g.name, word);
        let problem = p.with_goal(g.goal.clone());
        let found = solved(plan(&problem, SearchMode::Optimal, BUDGET));
        assert_eq!(found.cost, Cost::units(cost.into()), "{word}");
        assert!(validate_plan(&problem, &found).is_valid());
    }
}

#[test]
fn the_father_plan() {
    let (p, _) = solo();
    let problem = p.with_goal(word_goal(&p, "father"));
    let found = solved(plan(&problem, SearchMode::Optimal, BUDGET));
    assert_eq!(names(&problem, &found.steps), FATHER_PLAN);

    let mut swapped = found.steps.clone();
    swapped.swap(4, 5);
    assert_eq!(
        validate_steps(&problem, problem.initial_state(), problem.goal(), &swapped),
        PlanValidation::Inapplicable { step: 5 }
    );
    assert_eq!(
        validate_steps(&problem, problem.initial_state(), problem.goal(), &found.steps[..5]),
        PlanValidation::GoalNotReached
    );
}

#[test]
fn satisficing_plans_are_valid_and_no_cheaper_than_optimal() {
    let (p, goals) = solo();
    for (g, (word, cost)) in goals.iter().zip(SOLO_COST) {
        let problem = p.with_goal(g.goal.clone());
        let found = solved(plan(&problem, SearchMode::Satisficing, BUDGET));
        assert!(validate_plan(&problem, &found).is_valid(), "{word}");
        assert!(found.cost >= Cost::units(cost.into()), "{word}");
    }
}

#[test]
fn trivial_conflicting_and_exhausted_searches() {
    let (p, _) = solo();
    let already = p.with_goal(goal(&p, &["on(h,e)", "on(e,r)"]));
    let empty = solved(plan(&already, SearchMode::Optimal, BUDGET));
    assert!(empty.is_empty());
    assert_eq!(empty.cost, Cost::ZERO);

    let conflict = p.with_goal(goal(&p, &["on(t,h)", "on(t,e)"]));
    for mode in [SearchMode::Optimal, SearchMode::Satisficing] {
        assert_eq!(plan(&conflict, mode, BUDGET), PlanOutcome::Unsolvable);
    }

    let father = p.with_goal(word_goal(&p, "father"));
    let tiny = SearchBudget {
        max_expansions: 1,
        max_millis: u64::MAX,
    };
    assert_eq!(plan(&father, SearchMode::Optimal, tiny), PlanOutcome::BudgetExhausted);
    assert_eq!(PlanOutcome::BudgetExhausted.cost(), Cost::INFINITE);

    // A goal made unreachable by removing every stack action is proved so.
    let no_stacking = p.filter_actions(|a| a.name != "stack").with_goal(goal(&p, &["on(t,h)"]));
    assert_eq!(plan(&no_stacking, SearchMode::Optimal, BUDGET), PlanOutcome::Unsolvable);
}

#[test]
fn repeated_searches_agree() {
    let (p, _) = make_blockwords(&BlockWordsSpec::demo()).unwrap();
    for word in ["later", "master"] {
        let problem = p.with_goal(word_goal(&p, word));
        for mode in [SearchMode::Optimal, SearchMode::Satisficing] {
            assert_eq!(plan(&problem, mode, BUDGET), plan(&problem, mode, BUDGET), "{word} {mode:?}");
        }
    }
}

#[test]
fn hand_symmetry_keeps_costs() {
    let (p, _) = make_blockwords(&BlockWordsSpec::demo()).unwrap();
    let free = p.without_predicate("turn");
    let symmetry = free.hand_symmetry().expect("two hands");
    for (word, cost) in TWO_HAND_COST {
        let problem = free.with_goal(word_goal(&free, word));
        let (outcome, _) = Search::new(&problem, SearchMode::Optimal, BUDGET)
            .with_symmetry(Some(&symmetry))
            .run();
        let found = solved(outcome);
        assert_eq!(found.cost, Cost::units(cost.into()), "{word}");
        assert!(validate_plan(&problem, &found).is_valid());
    }
}

#[test]
fn heuristic_examples() {
    let (p, _) = solo();
    let s = p.initial_state();
    let father = word_goal(&p, "father");
    assert_eq!(heuristic(&p, s, &goal(&p, &["on(h,e)"]), HeuristicKind::Max), Cost::ZERO);
    assert_eq!(heuristic(&p, s, &GoalCondition::trivial(), HeuristicKind::LmCut), Cost::ZERO);
    let hmax = heuristic(&p, s, &father, HeuristicKind::Max);
    let lmcut = heuristic(&p, s, &father, HeuristicKind::LmCut);
    let hadd = heuristic(&p, s, &father, HeuristicKind::Add);
    assert!(Cost::UNIT <= hmax && hmax <= lmcut && lmcut <= Cost::units(6));
    assert!(hadd >= hmax);

    let no_stacking = p.filter_actions(|a| a.name != "stack");
    for kind in [HeuristicKind::Max, HeuristicKind::Add, HeuristicKind::LmCut] {
        assert_eq!(heuristic(&no_stacking, s, &goal(&p, &["on(t,h)"]), kind), Cost::INFINITE);
    }
}

#[test]
fn shared_prefixes() {
    let (p, _) = solo();
    let budget = SearchBudget {
        max_expansions: 5_000_000,
        max_millis: u64::MAX,
    };
    for (a, b, shared) in WCD {
        assert_eq!(wcd(&p, &word_goal(&p, a), &word_goal(&p, b), budget), Ok(shared), "{a}/{b}");
    }
    let conflict = goal(&p, &["on(t,h)", "on(t,e)"]);
    assert_eq!(wcd(&p, &word_goal(&p, "father"), &conflict, budget), Err(WcdError::Unsolvable('B')));
}

/// Replays oracle moves in the engine.
fn engine_state(p: &Problem, moves: &[String]) -> State {
    moves.iter().fold(p.initial_state().clone(), |state, m| {
        let sig: ActionSig = m.parse().unwrap();
        p.apply(&state, p.resolve_action(&sig).unwrap()).unwrap()
    })
}

#[test]
fn random_small_instances_match_the_oracle() {
    let stacks = ["ab", "c", "d", "fe"];
    let spec = BlockWordsSpec {
        stacks: stacks.iter().map(|s| s.chars().collect()).collect(),
        words: vec!["ab".into()],
        actors: vec!["user".into()],
    };
    let (p, _) = make_blockwords(&spec).unwrap();
    let (w, c) = World::new(&stacks, &["user"]);
    for seed in 0..60 {
        let (start, moves) = random_walk(&w, &c, 8, seed);
        let state = engine_state(&p, &moves);
        for word in ["abc", "cba", "dfe", "ecad", "fa", "bdfe"] {
            let expected = optimal_cost(&w, &start, &w.word_pairs(word));
            let problem = p.with_initial_state(state.clone()).with_goal(word_goal(&p, word));
            let found = plan(&problem, SearchMode::Optimal, BUDGET);
            assert_eq!(found.plan().map(|pl| pl.cost), expected.map(|e| Cost::units(e.into())), "{seed} {word}");
            let h = heuristic(&problem, &state, problem.goal(), HeuristicKind::LmCut);
            assert!(h <= found.cost(), "{seed} {word}");
        }
    }
}
