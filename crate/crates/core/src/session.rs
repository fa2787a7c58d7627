//! The closed interaction loop: the user moves, the agent watches, infers,
//! responds, predicts the user's reply, and checks the prediction on the
//! next move.
//!
//! A session is a strictly serialized command processor. Every committed
//! move comes back as an [`Event`], which is all a log needs to replay it.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::blockwords::NamedGoal;
use crate::planner::{Clock, NoClock, SearchBudget, SearchMode};
use crate::recognition::{
    self, GoalPosterior, RecognitionConfig, RecognitionError, Recognizer, SearchRunner, Sequential,
};
use crate::responder::{self, FallbackPolicy, FeatureWeight, IntermediateGoal, JointOutcome, JointPlan};
use crate::strips::{ActionSig, Atom, GoalCondition, ModelError, Problem, State, TURN_PREDICATE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SessionConfig {
    pub tau: f64,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub priors: Option<Vec<f64>>,
    /// User actions the agent waits through (passing) before it responds.
    pub head_start: u32,
    pub fallback: FallbackPolicy,
    pub mode: SearchMode,
    /// Per compiled comply/avoid search inside one recognition step.
    pub recognition_budget: SearchBudget,
    /// For joint, fallback, and plain reference plans.
    pub plan_budget: SearchBudget,
    /// Recorded for reproducibility; searches break ties without it.
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_goal: Option<String>,
    pub user: String,
    pub agent: String,
    /// End the session as soon as some hypothesis holds.
    pub finish_on_goal: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            tau: 0.5,
            beta: 1.0,
            priors: None,
            head_start: 0,
            fallback: FallbackPolicy::Noop,
            mode: SearchMode::Optimal,
            recognition_budget: SearchBudget {
                max_expansions: 4_000,
                max_millis: 30_000,
            },
            plan_budget: SearchBudget {
                max_expansions: 200_000,
                max_millis: 30_000,
            },
            seed: 0,
            true_goal: None,
            user: crate::blockwords::USER.into(),
            agent: crate::blockwords::AGENT.into(),
            finish_on_goal: false,
        }
    }
}

impl SessionConfig {
    pub fn recognition(&self) -> RecognitionConfig {
        RecognitionConfig {
            beta: self.beta,
            priors: self.priors.clone(),
            mode: self.mode,
            budget: self.recognition_budget,
            reference_budget: self.plan_budget,
        }
    }

    /// Field-level problems with the configuration, independent of any world.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.tau) {
            out.push(("tau", alloc::format!("must be within [0, 1], got {}", self.tau)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            out.push(("beta", alloc::format!("must be positive, got {}", self.beta)));
        }
        if !self.recognition_budget.is_valid() {
            out.push(("recognitionBudget", "both limits must be positive".into()));
        }
        if !self.plan_budget.is_valid() {
            out.push(("planBudget", "both limits must be positive".into()));
        }
        if self.user == self.agent {
            out.push(("agent", "user and agent must differ".into()));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("invalid configuration: {field}: {message}")]
    InvalidConfig { field: String, message: String },
    #[error("the session has finished")]
    Finished,
    #[error("it is {owner}'s turn")]
    OutOfTurn { owner: String },
    #[error("action {action} does not belong to {actor}")]
    WrongActor { action: String, actor: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl SessionError {
    fn config(field: &str, message: impl Into<String>) -> Self {
        SessionError::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum MonitorVerdict {
    Match,
    Mismatch { expected: ActionSig, observed: ActionSig },
    NoPrediction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionKind {
    /// Passing while the user has the head start.
    HeadStart,
    /// The user followed the plan; its next agent step was taken as is.
    ReusedPlan,
    /// Fresh recognition and a joint plan.
    Planned,
    Fallback,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FallbackReason {
    /// Every hypothesis was ruled out by the observations.
    NoFeasibleGoal,
    /// The intermediate goal holds contradictory features.
    Conflict,
    /// The intermediate goal already holds (or is empty).
    NothingToChange,
    Unsolvable,
    BudgetExhausted,
    /// The user passed and the plan has the agent pass too, so neither
    /// would change the table.
    Stalled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedAtom {
    pub atom: Atom,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IntermediateGoalView {
    pub tau: f64,
    pub atoms: Vec<WeightedAtom>,
    pub unsatisfied: Vec<Atom>,
    pub conflicts: Vec<(Atom, Atom)>,
    pub satisfied_already: bool,
}

/// Everything behind one agent move.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentDecision {
    pub kind: DecisionKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback: Option<FallbackReason>,
    /// Present when recognition ran for this move.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior: Option<GoalPosterior>,
    pub weights: Vec<WeightedAtom>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intermediate: Option<IntermediateGoalView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<JointPlan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<ActionSig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TurnRecord {
    /// 1-based, strictly increasing.
    pub turn: u32,
    pub actor: String,
    pub action: ActionSig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<MonitorVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision: Option<AgentDecision>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Turn(TurnRecord),
    /// Observations before this point were dropped from recognition.
    Truncate { turn: u32 },
    Quit { turn: u32 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counters {
    pub recognition_calls: u32,
    pub plan_calls: u32,
    pub matches: u32,
    pub mismatches: u32,
    pub no_predictions: u32,
    pub conflict_fallbacks: u32,
    pub fallbacks: u32,
    pub reused_plans: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Termination {
    Quit,
    GoalReached { goals: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MonitorRecord {
    pub turn: u32,
    #[serde(flatten)]
    pub verdict: MonitorVerdict,
}

#[derive(Clone, Debug, PartialEq)]
struct ActivePlan {
    plan: JointPlan,
    /// Index of the next step expected to execute.
    next: usize,
}

/// Live session data.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionState {
    pub world: State,
    pub turn_owner: String,
    /// Every executed action in order.
    pub history: Vec<ActionSig>,
    /// Start of the recognition window within `history`.
    pub window_start: usize,
    pub posterior: GoalPosterior,
    pub predicted: Option<ActionSig>,
    pub last_verdict: Option<MonitorVerdict>,
    pub monitor_history: Vec<MonitorRecord>,
    pub last_decision: Option<AgentDecision>,
    pub turn: u32,
    pub user_actions: u32,
    pub agent_actions: u32,
    pub terminal: Option<Termination>,
    pub counters: Counters,
    active_plan: Option<ActivePlan>,
}

impl SessionState {
    /// The observations recognition currently works from.
    pub fn observations(&self) -> &[ActionSig] {
        &self.history[self.window_start..]
    }

    pub fn active_plan(&self) -> Option<(&JointPlan, usize)> {
        self.active_plan.as_ref().map(|p| (&p.plan, p.next))
    }
}

/// Clock and search runner used by a session's planning work.
#[derive(Clone, Copy)]
pub struct Env<'a> {
    pub clock: &'a dyn Clock,
    pub runner: &'a dyn SearchRunner,
}

static SEQUENTIAL: Sequential<'static> = Sequential { clock: &NoClock };

impl Default for Env<'static> {
    fn default() -> Self {
        Env {
            clock: &NoClock,
            runner: &SEQUENTIAL,
        }
    }
}

/// Structured view of the agent's beliefs and intentions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DebugSnapshot {
    pub turn: u32,
    pub turn_owner: String,
    pub posterior: GoalPosterior,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_decision: Option<AgentDecision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active_plan: Option<JointPlan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan_cursor: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<ActionSig>,
    pub monitor_history: Vec<MonitorRecord>,
    pub counters: Counters,
    pub satisfied: Vec<String>,
    pub observations: Vec<ActionSig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal: Option<Termination>,
}

pub struct Session {
    world: Problem,
    hypotheses: Vec<NamedGoal>,
    names: Vec<String>,
    recognizer: Recognizer,
    /// Recognition model started from the current window's origin.
    origin_model: Problem,
    model_goals: Vec<GoalCondition>,
    config: SessionConfig,
    state: SessionState,
}

impl Session {
    pub fn new(world: Problem, hypotheses: Vec<NamedGoal>, config: SessionConfig) -> Result<Session, SessionError> {
        if let Some((field, message)) = config.problems().into_iter().next() {
            return Err(SessionError::config(field, message));
        }
        if hypotheses.is_empty() {
            return Err(SessionError::config("hypotheses", "at least one goal is required"));
        }
        let recognition = config.recognition();
        if let Err(e) = recognition.validate(hypotheses.len()) {
            return Err(SessionError::config("priors", e.to_string()));
        }
        for actor in [&config.user, &config.agent] {
            if !world.actors().contains(actor) {
                return Err(SessionError::config("actors", alloc::format!("`{actor}` is not an actor of the world")));
            }
        }
        if let Some(goal) = &config.true_goal {
            if !hypotheses.iter().any(|h| &h.name == goal) {
                return Err(SessionError::config("trueGoal", alloc::format!("`{goal}` is not a hypothesis")));
            }
        }
        let owner = turn_owner(&world, world.initial_state())
            .ok_or_else(|| SessionError::config("world", "the world has no turn bookkeeping"))?;
        if owner != config.user {
            return Err(SessionError::config("world", "the user must move first"));
        }
        let recognizer = Recognizer::new(&world);
        let model_goals = hypotheses
            .iter()
            .map(|h| recognizer.model_goal(&world, &h.goal))
            .collect::<Result<Vec<_>, _>>()?;
        let names: Vec<String> = hypotheses.iter().map(|h| h.name.clone()).collect();
        let priors = recognition.prior_vector(hypotheses.len());
        let state = SessionState {
            world: world.initial_state().clone(),
            turn_owner: owner,
            history: Vec::new(),
            window_start: 0,
            posterior: GoalPosterior::from_prior(&names, &priors),
            predicted: None,
            last_verdict: None,
            monitor_history: Vec::new(),
            last_decision: None,
            turn: 0,
            user_actions: 0,
            agent_actions: 0,
            terminal: None,
            counters: Counters::default(),
            active_plan: None,
        };
        Ok(Session {
            origin_model: recognizer.model().clone(),
            world,
            hypotheses,
            names,
            recognizer,
            model_goals,
            config,
            state,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn world(&self) -> &Problem {
        &self.world
    }

    pub fn hypotheses(&self) -> &[NamedGoal] {
        &self.hypotheses
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn is_users_turn(&self) -> bool {
        self.state.terminal.is_none() && self.state.turn_owner == self.config.user
    }

    pub fn is_agents_turn(&self) -> bool {
        self.state.terminal.is_none() && self.state.turn_owner == self.config.agent
    }

    /// Names of the hypotheses that hold in the current world state.
    pub fn satisfied_goals(&self) -> Vec<String> {
        self.hypotheses
            .iter()
            .filter(|h| self.world.satisfies(&self.state.world, &h.goal))
            .map(|h| h.name.clone())
            .collect()
    }

    /// Whether the session is over, and which hypotheses currently hold.
    pub fn is_terminal(&self) -> (bool, Vec<String>) {
        (self.state.terminal.is_some(), self.satisfied_goals())
    }

    /// Actions `actor` could take now, in action-id order.
    pub fn legal_actions(&self, actor: &str) -> Vec<ActionSig> {
        if self.state.terminal.is_some() || self.state.turn_owner != actor {
            return Vec::new();
        }
        self.world
            .applicable_actions(&self.state.world)
            .into_iter()
            .map(|id| self.world.action(id))
            .filter(|a| a.actor.as_deref() == Some(actor))
            .map(|a| a.signature())
            .collect()
    }

    /// Checks that `actor` may play `action` now, without changing anything.
    pub fn check_action(&self, actor: &str, action: &ActionSig) -> Result<State, SessionError> {
        if self.state.terminal.is_some() {
            return Err(SessionError::Finished);
        }
        if self.state.turn_owner != actor {
            return Err(SessionError::OutOfTurn {
                owner: self.state.turn_owner.clone(),
            });
        }
        let id = self.world.resolve_action(action)?;
        if self.world.action(id).actor.as_deref() != Some(actor) {
            return Err(SessionError::WrongActor {
                action: action.to_string(),
                actor: actor.into(),
            });
        }
        Ok(self.world.apply(&self.state.world, id)?)
    }

    pub fn submit_user_action(&mut self, action: &ActionSig) -> Result<Event, SessionError> {
        let user = self.config.user.clone();
        let next = self.check_action(&user, action)?;
        let verdict = match self.state.predicted.take() {
            None => MonitorVerdict::NoPrediction,
            Some(expected) if &expected == action => MonitorVerdict::Match,
            Some(expected) => MonitorVerdict::Mismatch {
                expected,
                observed: action.clone(),
            },
        };
        match verdict {
            MonitorVerdict::Match => {
                self.state.counters.matches += 1;
                if let Some(active) = &mut self.state.active_plan {
                    active.next += 1;
                }
            }
            MonitorVerdict::Mismatch { .. } => {
                self.state.counters.mismatches += 1;
                self.state.active_plan = None;
            }
            MonitorVerdict::NoPrediction => {
                self.state.counters.no_predictions += 1;
                self.state.active_plan = None;
            }
        }
        self.state.user_actions += 1;
        let record = self.commit(user, action.clone(), next, Some(verdict.clone()), None);
        self.state.last_verdict = Some(verdict.clone());
        self.state.monitor_history.push(MonitorRecord {
            turn: record.turn,
            verdict,
        });
        Ok(Event::Turn(record))
    }

    pub fn agent_step(&mut self, env: &Env<'_>) -> Result<Event, SessionError> {
        if self.state.terminal.is_some() {
            return Err(SessionError::Finished);
        }
        let agent = self.config.agent.clone();
        if self.state.turn_owner != agent {
            return Err(SessionError::OutOfTurn {
                owner: self.state.turn_owner.clone(),
            });
        }
        let (action, decision) = self.decide(env)?;
        let next = self.world.apply(&self.state.world, self.world.resolve_action(&action)?)?;
        self.state.predicted = decision.predicted.clone();
        self.state.agent_actions += 1;
        self.state.last_decision = Some(decision.clone());
        let record = self.commit(agent, action, next, None, Some(decision));
        Ok(Event::Turn(record))
    }

    /// Ends the session at the user's request.
    pub fn quit(&mut self) -> Result<Event, SessionError> {
        if self.state.terminal.is_some() {
            return Err(SessionError::Finished);
        }
        self.state.terminal = Some(Termination::Quit);
        self.state.predicted = None;
        self.state.active_plan = None;
        Ok(Event::Quit { turn: self.state.turn })
    }

    /// Drops the observations so far from recognition; later recognition
    /// starts from the current world state.
    pub fn truncate_observations(&mut self) -> Event {
        self.state.window_start = self.state.history.len();
        let origin = self.recognizer.model().translate_state(&self.world, &self.state.world);
        self.origin_model = self.recognizer.model().with_initial_state(origin);
        Event::Truncate { turn: self.state.turn }
    }

    pub fn debug_snapshot(&self) -> DebugSnapshot {
        let active = self.state.active_plan.as_ref();
        DebugSnapshot {
            turn: self.state.turn,
            turn_owner: self.state.turn_owner.clone(),
            posterior: self.state.posterior.clone(),
            last_decision: self.state.last_decision.clone(),
            active_plan: active.map(|a| a.plan.clone()),
            plan_cursor: active.map(|a| a.next),
            predicted: self.state.predicted.clone(),
            monitor_history: self.state.monitor_history.clone(),
            counters: self.state.counters,
            satisfied: self.satisfied_goals(),
            observations: self.state.observations().to_vec(),
            terminal: self.state.terminal.clone(),
        }
    }

    fn commit(
        &mut self,
        actor: String,
        action: ActionSig,
        next: State,
        verdict: Option<MonitorVerdict>,
        decision: Option<AgentDecision>,
    ) -> TurnRecord {
        self.state.world = next;
        self.state.turn += 1;
        self.state.history.push(action.clone());
        self.state.turn_owner = turn_owner(&self.world, &self.state.world).unwrap_or_default();
        if self.config.finish_on_goal {
            let goals = self.satisfied_goals();
            if !goals.is_empty() {
                self.state.terminal = Some(Termination::GoalReached { goals });
                self.state.predicted = None;
            }
        }
        TurnRecord {
            turn: self.state.turn,
            actor,
            action,
            verdict,
            decision,
        }
    }

    fn decide(&mut self, env: &Env<'_>) -> Result<(ActionSig, AgentDecision), SessionError> {
        let agent = self.config.agent.clone();
        let blank = |kind| AgentDecision {
            kind,
            fallback: None,
            posterior: None,
            weights: Vec::new(),
            intermediate: None,
            plan: None,
            predicted: None,
        };

        if self.state.user_actions <= self.config.head_start {
            let noop = responder::noop_action(&self.world, &agent)?;
            return Ok((self.world.action(noop).signature(), blank(DecisionKind::HeadStart)));
        }

        if self.state.last_verdict == Some(MonitorVerdict::Match) {
            if let Some(reused) = self.reuse_plan(&agent) {
                self.state.counters.reused_plans += 1;
                return Ok(reused);
            }
        }
        self.state.active_plan = None;

        self.state.counters.recognition_calls += 1;
        let keys = self.recognizer.observation_keys(&self.world, self.state.observations())?;
        let current = self.recognizer.model().translate_state(&self.world, &self.state.world);
        let recognized = recognition::recognize(
            &self.origin_model,
            &self.names,
            &self.model_goals,
            &keys,
            Some(&current),
            &self.config.recognition(),
            env.runner,
        );
        let posterior = match recognized {
            Ok(p) => p,
            Err(RecognitionError::NoFeasibleHypothesis) => {
                let mut decision = blank(DecisionKind::Fallback);
                decision.fallback = Some(FallbackReason::NoFeasibleGoal);
                return self.fall_back(env, decision);
            }
            Err(RecognitionError::Model(e)) => return Err(e.into()),
            Err(e) => return Err(SessionError::config("recognition", e.to_string())),
        };
        self.state.posterior = posterior.clone();

        let goals: Vec<GoalCondition> = self.hypotheses.iter().map(|h| h.goal.clone()).collect();
        let probabilities = posterior.probabilities();
        let weights = responder::feature_weights(&goals, &probabilities);
        let intermediate =
            responder::intermediate_goal(&self.world, &self.state.world, &goals, &probabilities, self.config.tau);
        let mut decision = blank(DecisionKind::Planned);
        decision.posterior = Some(posterior);
        decision.weights = self.weighted(&weights);
        decision.intermediate = Some(self.intermediate_view(&intermediate));

        if !intermediate.is_consistent() {
            self.state.counters.conflict_fallbacks += 1;
            decision.kind = DecisionKind::Fallback;
            decision.fallback = Some(FallbackReason::Conflict);
            return self.fall_back(env, decision);
        }
        if intermediate.satisfied_already() {
            decision.kind = DecisionKind::Fallback;
            decision.fallback = Some(FallbackReason::NothingToChange);
            return self.fall_back(env, decision);
        }

        self.state.counters.plan_calls += 1;
        match responder::joint_plan(
            &self.world,
            &self.state.world,
            &intermediate.goal,
            self.config.plan_budget,
            env.clock,
        ) {
            JointOutcome::Solved { plan, .. } => {
                let Some((first, reply)) = responder::next_actions(&plan, &agent).map(|(a, r)| (a.clone(), r.cloned()))
                else {
                    decision.kind = DecisionKind::Fallback;
                    decision.fallback = Some(FallbackReason::NothingToChange);
                    return self.fall_back(env, decision);
                };
                decision.predicted = reply.map(|s| s.action);
                decision.plan = Some(plan.clone());
                let noop = self.world.action(responder::noop_action(&self.world, &agent)?).signature();
                if first.action == noop && self.user_passed() {
                    decision.kind = DecisionKind::Fallback;
                    decision.fallback = Some(FallbackReason::Stalled);
                    return self.fall_back(env, decision);
                }
                self.state.active_plan = Some(ActivePlan { plan, next: 1 });
                Ok((first.action, decision))
            }
            JointOutcome::Unsolvable => {
                decision.kind = DecisionKind::Fallback;
                decision.fallback = Some(FallbackReason::Unsolvable);
                self.fall_back(env, decision)
            }
            JointOutcome::BudgetExhausted => {
                decision.kind = DecisionKind::Fallback;
                decision.fallback = Some(FallbackReason::BudgetExhausted);
                self.fall_back(env, decision)
            }
        }
    }

    fn user_passed(&self) -> bool {
        self.state
            .history
            .last()
            .is_some_and(|last| last.name == "noop" && last.args.first() == Some(&self.config.user))
    }

    /// The next agent step of the active plan, when the user kept to it.
    fn reuse_plan(&mut self, agent: &str) -> Option<(ActionSig, AgentDecision)> {
        let active = self.state.active_plan.as_mut()?;
        let step = active.plan.steps.get(active.next)?;
        if step.actor != agent {
            return None;
        }
        let id = self.world.find_action(&step.action)?;
        if !self.world.applicable(&self.state.world, id).ok()? {
            return None;
        }
        let action = step.action.clone();
        let predicted = active
            .plan
            .steps
            .get(active.next + 1)
            .filter(|s| s.actor != agent)
            .map(|s| s.action.clone());
        active.next += 1;
        let plan = active.plan.clone();
        let previous = self.state.last_decision.as_ref();
        Some((
            action,
            AgentDecision {
                kind: DecisionKind::ReusedPlan,
                fallback: None,
                posterior: None,
                weights: previous.map(|d| d.weights.clone()).unwrap_or_default(),
                intermediate: previous.and_then(|d| d.intermediate.clone()),
                plan: Some(plan),
                predicted,
            },
        ))
    }

    fn fall_back(&mut self, env: &Env<'_>, mut decision: AgentDecision) -> Result<(ActionSig, AgentDecision), SessionError> {
        self.state.counters.fallbacks += 1;
        self.state.active_plan = None;
        let id = responder::fallback_action(
            &self.world,
            &self.state.world,
            &self.config.agent,
            self.config.fallback,
            self.config.plan_budget,
            env.clock,
        )?;
        decision.predicted = None;
        Ok((self.world.action(id).signature(), decision))
    }

    fn weighted(&self, weights: &[FeatureWeight]) -> Vec<WeightedAtom> {
        weights
            .iter()
            .map(|w| WeightedAtom {
                atom: self.world.atom(w.atom).clone(),
                weight: w.value(),
            })
            .collect()
    }

    fn intermediate_view(&self, goal: &IntermediateGoal) -> IntermediateGoalView {
        let atom = |id| self.world.atom(id).clone();
        IntermediateGoalView {
            tau: self.config.tau,
            atoms: self.weighted(&goal.features),
            unsatisfied: goal.unsatisfied.iter().map(|&a| atom(a)).collect(),
            conflicts: goal.conflicts.iter().map(|&(a, b)| (atom(a), atom(b))).collect(),
            satisfied_already: goal.satisfied_already(),
        }
    }
}

/// The actor whose turn atom holds in `state`.
pub fn turn_owner(world: &Problem, state: &State) -> Option<String> {
    state
        .iter()
        .map(|id| world.atom(id))
        .find(|a| a.predicate == TURN_PREDICATE)
        .and_then(|a| a.args.first().cloned())
}
