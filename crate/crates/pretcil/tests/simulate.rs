use pretcil::runner::Memo;
use pretcil::simulate::{run_simulation, SimulatedUser, SimulationError, UserPolicy};
use pretcil_core::blockwords::{make_blockwords, BlockWordsSpec};
use pretcil_core::planner::{NoClock, SearchBudget, SearchMode};
use pretcil_core::recognition::Sequential;
use pretcil_core::responder::FallbackPolicy;
use pretcil_core::session::{Env, Event, Session, SessionConfig};

fn config() -> SessionConfig {
    SessionConfig {
        mode: SearchMode::Satisficing,
        recognition_budget: SearchBudget {
            max_expansions: 300,
            max_millis: 60_000,
        },
        tau: 0.5,
        head_start: 2,
        fallback: FallbackPolicy::DefaultGoal,
        ..SessionConfig::default()
    }
}

fn user(goal: &str, policy: UserPolicy, seed: u64) -> SimulatedUser {
    SimulatedUser {
        goal: goal.into(),
        policy,
        seed,
    }
}

#[test]
fn optimal_user_reaches_father_without_extra_moves() {
    let (world, hyps) = make_blockwords(&BlockWordsSpec::demo()).unwrap();
    let report = run_simulation(&world, &hyps, &config(), &user("father", UserPolicy::Optimal, 0), 40, &Env::default()).unwrap();
    assert!(report.metrics.reached);
    assert!(report.metrics.user_actions <= 6, "{:?}", report.metrics);
    assert_eq!(report.metrics.holding_needed_block, 0);
}

#[test]
fn zero_noise_is_the_optimal_policy() {
    let (world, hyps) = make_blockwords(&BlockWordsSpec::demo()).unwrap();
    let memo = Memo::new(Sequential::default());
    let env = Env {
        clock: &NoClock,
        runner: &memo,
    };
    for (goal, seed) in [("later", 3), ("mother", 8)] {
        let optimal = run_simulation(&world, &hyps, &config(), &user(goal, UserPolicy::Optimal, seed), 40, &env).unwrap();
        let noisy = run_simulation(
            &world,
            &hyps,
            &config(),
            &user(goal, UserPolicy::Noisy { epsilon: 0.0 }, seed),
            40,
            &env,
        )
        .unwrap();
        assert_eq!(noisy.transcript, optimal.transcript);
        assert_eq!(noisy.metrics, optimal.metrics);
    }
}

#[test]
fn runs_are_deterministic_and_replayable() {
    let (world, hyps) = make_blockwords(&BlockWordsSpec::demo()).unwrap();
    let config = config();
    let user = user("water", UserPolicy::Noisy { epsilon: 0.3 }, 11);
    let a = run_simulation(&world, &hyps, &config, &user, 30, &Env::default()).unwrap();
    let b = run_simulation(&world, &hyps, &config, &user, 30, &Env::default()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.metrics.turns <= 30);

    // Feeding the user's moves back in reproduces every agent turn.
    let mut session = Session::new(world, hyps, config).unwrap();
    for event in &a.transcript {
        let Event::Turn(turn) = event else { continue };
        let again = if turn.actor == "user" {
            session.submit_user_action(&turn.action).unwrap()
        } else {
            session.agent_step(&Env::default()).unwrap()
        };
        assert_eq!(&again, event);
    }
}

#[test]
fn bad_inputs_are_errors() {
    let (world, hyps) = make_blockwords(&BlockWordsSpec::demo()).unwrap();
    let env = Env::default();
    assert!(matches!(
        run_simulation(&world, &hyps, &config(), &user("father", UserPolicy::Optimal, 0), 0, &env),
        Err(SimulationError::NoTurns)
    ));
    assert!(matches!(
        run_simulation(&world, &hyps, &config(), &user("zebra", UserPolicy::Optimal, 0), 5, &env),
        Err(SimulationError::UnknownGoal(_))
    ));
    assert!("noisy:1.5".parse::<UserPolicy>().is_err());
    assert_eq!("noisy:0.25".parse::<UserPolicy>(), Ok(UserPolicy::Noisy { epsilon: 0.25 }));
    assert_eq!(UserPolicy::Confuser.to_string().parse::<UserPolicy>(), Ok(UserPolicy::Confuser));
}
