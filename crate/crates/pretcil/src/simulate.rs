//! Simulated users playing against the assistive agent.

use std::fmt;
use std::str::FromStr;

use pretcil_core::blockwords::NamedGoal;
use pretcil_core::planner::{SearchBudget, SearchMode};
use pretcil_core::session::{Env, Event, Session, SessionConfig, SessionError};
use pretcil_core::{ActionSig, Atom, GoalCondition, Problem, State};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use pretcil_core::planner::Search;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UserPolicy {
    /// Always an optimal next step toward the true goal.
    Optimal,
    /// A uniformly random legal move with probability `epsilon`.
    Noisy { epsilon: f64 },
    /// Works toward a decoy word for a few moves before turning to the true goal.
    Confuser,
}

impl fmt::Display for UserPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UserPolicy::Optimal => f.write_str("optimal"),
            UserPolicy::Noisy { epsilon } => write!(f, "noisy:{epsilon}"),
            UserPolicy::Confuser => f.write_str("confuser"),
        }
    }
}

impl FromStr for UserPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(UserPolicy::Optimal),
            "confuser" => Ok(UserPolicy::Confuser),
            _ => {
                let eps = s
                    .strip_prefix("noisy:")
                    .ok_or_else(|| format!("unknown user policy `{s}` (expected optimal, noisy:<eps>, or confuser)"))?;
                let epsilon: f64 = eps.parse().map_err(|_| format!("bad epsilon `{eps}`"))?;
                if !(0.0..=1.0).contains(&epsilon) {
                    return Err(format!("epsilon must be within [0, 1], got {epsilon}"));
                }
                Ok(UserPolicy::Noisy { epsilon })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulatedUser {
    pub goal: String,
    pub policy: UserPolicy,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationMetrics {
    pub reached: bool,
    pub turns: u32,
    pub user_actions: u32,
    pub agent_actions: u32,
    pub mismatches: u32,
    pub conflict_fallbacks: u32,
    pub recognition_calls: u32,
    /// User turns spent waiting for a block the agent kept holding through
    /// its previous turn.
    pub holding_needed_block: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationReport {
    pub user: SimulatedUser,
    pub config: SessionConfig,
    pub metrics: SimulationMetrics,
    pub transcript: Vec<Event>,
}

#[derive(Debug, thiserror::Error)]
pub enum SimulationError {
    #[error("max turns must be positive")]
    NoTurns,
    #[error("unknown goal `{0}`")]
    UnknownGoal(String),
    #[error(transparent)]
    Session(#[from] SessionError),
}

enum Step {
    Act(ActionSig),
    /// The next step needs a block another actor is holding.
    Blocked,
    Nothing,
}

/// Plans the user's own moves, ignoring turns and the agent's actions.
struct UserPlanner {
    model: Problem,
    budget: SearchBudget,
}

impl UserPlanner {
    fn new(world: &Problem, user: &str, budget: SearchBudget) -> Self {
        let model = world
            .without_predicate(pretcil_core::strips::TURN_PREDICATE)
            .filter_actions(|a| a.actor.as_deref() == Some(user));
        UserPlanner { model, budget }
    }

    /// First step of an optimal plan toward `goal`.
    ///
    /// Blocks held by other actors are treated as if they were back on the
    /// table; when the step needs such a block the user has to wait.
    fn next_step(&self, world: &Problem, state: &State, user: &str, goal: &GoalCondition) -> Step {
        let mut atoms: Vec<Atom> = Vec::new();
        for id in state.iter() {
            let atom = world.atom(id);
            match (atom.predicate.as_str(), atom.args.as_slice()) {
                ("holding", [actor, block]) if actor != user => {
                    atoms.push(Atom::new("on-table", [block]));
                    atoms.push(Atom::new("clear", [block]));
                    atoms.push(Atom::new("handempty", [actor]));
                }
                _ => atoms.push(atom.clone()),
            }
        }
        let start = State::from_atoms(
            self.model.atom_count(),
            atoms.iter().filter_map(|a| self.model.atom_id(a)),
        );
        let goal = GoalCondition::new(
            goal.atoms()
                .iter()
                .filter_map(|&a| self.model.atom_id(world.atom(a))),
        );
        let (outcome, _) = Search::new(&self.model, SearchMode::Optimal, self.budget).run_from(&start, &goal);
        let Some(&first) = outcome.plan().and_then(|p| p.steps.first()) else {
            return Step::Nothing;
        };
        let step = self.model.action(first).signature();
        match world.find_action(&step).map(|id| world.applicable(state, id)) {
            Some(Ok(true)) => Step::Act(step),
            _ => Step::Blocked,
        }
    }
}

struct Driver<'a> {
    world: &'a Problem,
    planner: UserPlanner,
    user: String,
    policy: UserPolicy,
    rng: ChaCha8Rng,
    goal: GoalCondition,
    decoy: Option<(GoalCondition, u32)>,
}

impl Driver<'_> {
    /// The user's move, and whether the true goal was blocked by a held block.
    fn choose(&mut self, session: &Session) -> (ActionSig, bool) {
        let state = &session.state().world;
        match self.policy {
            UserPolicy::Optimal => {}
            UserPolicy::Noisy { epsilon } => {
                if self.rng.gen::<f64>() < epsilon {
                    let legal = session.legal_actions(&self.user);
                    if let Some(pick) = legal.choose(&mut self.rng) {
                        return (pick.clone(), false);
                    }
                }
            }
            UserPolicy::Confuser => {
                if let Some((decoy, left)) = &mut self.decoy {
                    if *left > 0 {
                        *left -= 1;
                        if let Step::Act(step) = self.planner.next_step(self.world, state, &self.user, decoy) {
                            return (step, false);
                        }
                    }
                }
            }
        }
        match self.planner.next_step(self.world, state, &self.user, &self.goal) {
            Step::Act(step) => (step, false),
            Step::Blocked => (ActionSig::new("noop", [self.user.as_str()]), true),
            Step::Nothing => (ActionSig::new("noop", [self.user.as_str()]), false),
        }
    }
}

/// Plays one session between a simulated user and the agent.
pub fn run_simulation(
    world: &Problem,
    hypotheses: &[NamedGoal],
    config: &SessionConfig,
    user: &SimulatedUser,
    max_turns: u32,
    env: &Env<'_>,
) -> Result<SimulationReport, SimulationError> {
    if max_turns == 0 {
        return Err(SimulationError::NoTurns);
    }
    let target = hypotheses
        .iter()
        .position(|h| h.name == user.goal)
        .ok_or_else(|| SimulationError::UnknownGoal(user.goal.clone()))?;
    let mut session = Session::new(world.clone(), hypotheses.to_vec(), config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(user.seed);
    let decoy = match user.policy {
        UserPolicy::Confuser if hypotheses.len() > 1 => {
            let others: Vec<usize> = (0..hypotheses.len()).filter(|&i| i != target).collect();
            let pick = others[rng.gen_range(0..others.len())];
            Some((hypotheses[pick].goal.clone(), rng.gen_range(2..=4)))
        }
        _ => None,
    };
    let goal = hypotheses[target].goal.clone();
    let mut driver = Driver {
        world,
        planner: UserPlanner::new(world, &config.user, config.plan_budget),
        user: config.user.clone(),
        policy: user.policy,
        rng,
        goal: goal.clone(),
        decoy,
    };
    let mut transcript = Vec::new();
    let mut metrics = SimulationMetrics::default();
    let reached = |session: &Session| world.satisfies(&session.state().world, &goal);
    let mut was_blocked = false;
    while session.state().turn < max_turns && !reached(&session) && !session.is_terminal().0 {
        if session.is_users_turn() {
            let (action, blocked) = driver.choose(&session);
            if blocked && was_blocked {
                metrics.holding_needed_block += 1;
            }
            was_blocked = blocked;
            transcript.push(session.submit_user_action(&action)?);
        } else {
            transcript.push(session.agent_step(env)?);
        }
    }
    let state = session.state();
    metrics.reached = reached(&session);
    metrics.turns = state.turn;
    metrics.user_actions = state.user_actions;
    metrics.agent_actions = state.agent_actions;
    metrics.mismatches = state.counters.mismatches;
    metrics.conflict_fallbacks = state.counters.conflict_fallbacks;
    metrics.recognition_calls = state.counters.recognition_calls;
    Ok(SimulationReport {
        user: user.clone(),
        config: config.clone(),
        metrics,
        transcript,
    })
}
