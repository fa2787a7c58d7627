//! Transport-independent session service.
//!
//! [`Hub`] owns the live sessions. Commands on one session are serialized
//! by its lock; a posted user action and the agent's reply are committed
//! together, and only then published to event subscribers. With a log
//! directory every record is appended to `<id>.jsonl` before it is
//! published, and [`Hub::recover`] rebuilds the sessions from those files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use pretcil_core::blockwords::{board, letter_rank, Board};
use pretcil_core::session::{
    DebugSnapshot, Env, Event, Session, SessionConfig, SessionError, Termination, TurnRecord,
};
use pretcil_core::ActionSig;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::log::{LogHeader, LogRecord, LogWriter, SessionLog, WorldSource};

/// Name of the built-in demonstration world in create requests.
pub const DEMO_WORLD: &str = "blockwords-demo";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CreateRequest {
    /// A built-in world name; see [`DEMO_WORLD`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    /// An explicit world; takes precedence over `domain`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<WorldSource>,
    /// Attach a debug snapshot to every turn result.
    #[serde(default)]
    pub debug: bool,
    #[serde(flatten)]
    pub config: SessionConfig,
}

impl Default for CreateRequest {
    fn default() -> Self {
        CreateRequest {
            domain: None,
            world: None,
            debug: false,
            config: SessionConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionRequest {
    /// Action in `name(arg,...)` form, e.g. `pickup(user,t)`.
    pub action: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WordStatus {
    pub word: String,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApiSessionView {
    pub id: String,
    /// Turns played so far.
    pub turn: u32,
    pub turn_owner: String,
    /// Present for Block Words worlds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub board: Option<Board>,
    /// Applicable actions of the turn owner.
    pub legal_actions: Vec<ActionSig>,
    pub words: Vec<WordStatus>,
    pub terminal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
    pub debug: bool,
    pub config: SessionConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TurnResult {
    pub user: TurnRecord,
    /// Absent when the user's move ended the session.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent: Option<TurnRecord>,
    pub view: ApiSessionView,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub debug: Option<DebugSnapshot>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionSummary {
    pub id: String,
    pub turn: u32,
    pub turn_owner: String,
    pub terminal: bool,
}

/// One item of a session's event feed.
#[derive(Clone, Debug, PartialEq)]
pub enum StreamItem {
    /// A committed record; `index` counts from 1.
    Record { index: u64, record: LogRecord },
    /// The agent started deciding its reply to this turn.
    Thinking { turn: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldProblem {
    pub field: String,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    BadRequest,
    NotFound,
    Conflict,
    Internal,
}

impl ErrorKind {
    pub fn status(self) -> u16 {
        match self {
            ErrorKind::BadRequest => 400,
            ErrorKind::NotFound => 404,
            ErrorKind::Conflict => 409,
            ErrorKind::Internal => 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{message}")]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldProblem>,
}

impl ApiError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        ApiError {
            kind,
            message: message.into(),
            fields: Vec::new(),
        }
    }

    fn not_found(id: &str) -> Self {
        ApiError::new(ErrorKind::NotFound, format!("no session `{id}`"))
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        ApiError::new(ErrorKind::Internal, e.to_string())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match &e {
            SessionError::InvalidConfig { field, message } => ApiError {
                kind: ErrorKind::BadRequest,
                message: e.to_string(),
                fields: vec![FieldProblem {
                    field: field.clone(),
                    message: message.clone(),
                }],
            },
            _ => ApiError::new(ErrorKind::Conflict, e.to_string()),
        }
    }
}

struct Live {
    session: Session,
    debug: bool,
    rank: Option<Vec<char>>,
    records: Vec<LogRecord>,
    writer: Option<LogWriter>,
}

impl Live {
    fn view(&self, id: &str) -> ApiSessionView {
        let s = &self.session;
        let state = s.state();
        let satisfied = s.satisfied_goals();
        ApiSessionView {
            id: id.to_string(),
            turn: state.turn,
            turn_owner: state.turn_owner.clone(),
            board: self.rank.as_ref().map(|rank| board(s.world(), &state.world, rank)),
            legal_actions: s.legal_actions(&state.turn_owner),
            words: s
                .hypotheses()
                .iter()
                .map(|h| WordStatus {
                    word: h.name.clone(),
                    satisfied: satisfied.contains(&h.name),
                })
                .collect(),
            terminal: state.terminal.is_some(),
            termination: state.terminal.clone(),
            debug: self.debug,
            config: s.config().clone(),
        }
    }

    /// Persists a record and returns its stream item; publishing is left to
    /// the caller so that a whole turn becomes visible at once.
    fn commit(&mut self, event: Event) -> Result<StreamItem, ApiError> {
        let record = LogRecord::new(&self.session, event, now_ms());
        if let Some(writer) = &mut self.writer {
            writer.append(&record).map_err(ApiError::internal)?;
        }
        self.records.push(record.clone());
        Ok(StreamItem::Record {
            index: self.records.len() as u64,
            record,
        })
    }
}

struct Slot {
    live: Mutex<Live>,
    feed: broadcast::Sender<StreamItem>,
}

impl Slot {
    fn new(live: Live) -> Arc<Slot> {
        let (feed, _) = broadcast::channel(256);
        Arc::new(Slot {
            live: Mutex::new(live),
            feed,
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Live> {
        // A panic mid-command leaves the session as it was before the
        // command's first commit, which is still consistent.
        self.live.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn publish(&self, items: Vec<StreamItem>) {
        for item in items {
            // No subscribers is fine.
            let _ = self.feed.send(item);
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub struct Hub {
    env: Env<'static>,
    dir: Option<PathBuf>,
    sessions: RwLock<BTreeMap<String, Arc<Slot>>>,
    next_id: AtomicU64,
    thinking: AtomicBool,
}

impl Hub {
    /// A hub that keeps sessions in memory only.
    pub fn new(env: Env<'static>) -> Hub {
        Hub {
            env,
            dir: None,
            sessions: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
            thinking: AtomicBool::new(false),
        }
    }

    /// A hub that logs to `dir`, first restoring every session logged there.
    /// Logs that fail to replay are reported and left untouched.
    pub fn recover(env: Env<'static>, dir: &Path) -> std::io::Result<(Hub, Vec<(PathBuf, String)>)> {
        fs::create_dir_all(dir)?;
        let mut hub = Hub::new(env);
        hub.dir = Some(dir.to_path_buf());
        let mut failures = Vec::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            match hub.restore(&path) {
                Ok(()) => {}
                Err(message) => failures.push((path, message)),
            }
        }
        Ok((hub, failures))
    }

    fn restore(&self, path: &Path) -> Result<(), String> {
        let log = SessionLog::load(path).map_err(|e| e.to_string())?;
        let session = crate::log::replay(&log, &self.env).map_err(|e| e.to_string())?;
        let id = log.header.session.clone();
        if let Some(n) = id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
            self.next_id.fetch_max(n + 1, Ordering::SeqCst);
        }
        let mut live = Live {
            rank: rank_of(&log.header.world),
            debug: false,
            session,
            records: log.records,
            writer: Some(LogWriter::append_to(path).map_err(|e| e.to_string())?),
        };
        // A crash between the user's move and the agent's reply leaves the
        // agent to move; finish that turn now.
        if !live.session.is_terminal().0 && live.session.is_agents_turn() {
            let event = live.session.agent_step(&self.env).map_err(|e| e.to_string())?;
            live.commit(event).map_err(|e| e.to_string())?;
        }
        self.sessions.write().expect("sessions lock").insert(id, Slot::new(live));
        Ok(())
    }

    /// Emit a [`StreamItem::Thinking`] before each agent decision.
    pub fn set_thinking_events(&self, on: bool) {
        self.thinking.store(on, Ordering::SeqCst);
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    pub fn create(&self, request: CreateRequest) -> Result<ApiSessionView, ApiError> {
        let problems = request.config.problems();
        if !problems.is_empty() {
            return Err(ApiError {
                kind: ErrorKind::BadRequest,
                message: "invalid session configuration".into(),
                fields: problems
                    .into_iter()
                    .map(|(field, message)| FieldProblem {
                        field: field.to_string(),
                        message,
                    })
                    .collect(),
            });
        }
        let world = match (request.world, request.domain.as_deref()) {
            (Some(world), _) => world,
            (None, None | Some(DEMO_WORLD)) => WorldSource::demo(),
            (None, Some(other)) => {
                return Err(ApiError {
                    kind: ErrorKind::BadRequest,
                    message: format!("unknown world `{other}`"),
                    fields: vec![FieldProblem {
                        field: "domain".into(),
                        message: format!("expected `{DEMO_WORLD}` or an explicit `world`"),
                    }],
                })
            }
        };
        let (problem, hypotheses) = world.build().map_err(|e| ApiError::new(ErrorKind::BadRequest, e))?;
        let session = Session::new(problem, hypotheses, request.config.clone())?;
        let id = format!("s{:04}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let writer = match &self.dir {
            Some(dir) => {
                let header = LogHeader::new(id.clone(), now_ms(), world.clone(), request.config);
                Some(LogWriter::create(&dir.join(format!("{id}.jsonl")), &header).map_err(ApiError::internal)?)
            }
            None => None,
        };
        let live = Live {
            rank: rank_of(&world),
            debug: request.debug,
            session,
            records: Vec::new(),
            writer,
        };
        let view = live.view(&id);
        self.sessions.write().expect("sessions lock").insert(id, Slot::new(live));
        Ok(view)
    }

    pub fn list(&self) -> Vec<SessionSummary> {
        let slots: Vec<(String, Arc<Slot>)> = self
            .sessions
            .read()
            .expect("sessions lock")
            .iter()
            .map(|(id, slot)| (id.clone(), slot.clone()))
            .collect();
        slots
            .into_iter()
            .map(|(id, slot)| {
                let live = slot.lock();
                let state = live.session.state();
                SessionSummary {
                    id,
                    turn: state.turn,
                    turn_owner: state.turn_owner.clone(),
                    terminal: state.terminal.is_some(),
                }
            })
            .collect()
    }

    pub fn view(&self, id: &str) -> Result<ApiSessionView, ApiError> {
        Ok(self.slot(id)?.lock().view(id))
    }

    pub fn debug(&self, id: &str) -> Result<DebugSnapshot, ApiError> {
        Ok(self.slot(id)?.lock().session.debug_snapshot())
    }

    /// Applies the user's action and the agent's reply as one turn pair.
    pub fn act(&self, id: &str, request: &ActionRequest) -> Result<TurnResult, ApiError> {
        let action: ActionSig = request.action.parse().map_err(|_| ApiError {
            kind: ErrorKind::BadRequest,
            message: format!("malformed action `{}`", request.action),
            fields: vec![FieldProblem {
                field: "action".into(),
                message: "expected `name(arg,...)`".into(),
            }],
        })?;
        let slot = self.slot(id)?;
        let mut live = slot.lock();
        let user_event = live.session.submit_user_action(&action)?;
        let mut items = vec![live.commit(user_event.clone())?];
        let mut agent = None;
        if !live.session.is_terminal().0 {
            if self.thinking.load(Ordering::SeqCst) {
                let _ = slot.feed.send(StreamItem::Thinking {
                    turn: live.session.state().turn,
                });
            }
            let event = live.session.agent_step(&self.env)?;
            if let Event::Turn(record) = &event {
                agent = Some(record.clone());
            }
            items.push(live.commit(event)?);
        }
        slot.publish(items);
        let Event::Turn(user) = user_event else {
            unreachable!("a user action yields a turn record")
        };
        Ok(TurnResult {
            user,
            agent,
            view: live.view(id),
            debug: live.debug.then(|| live.session.debug_snapshot()),
        })
    }

    pub fn quit(&self, id: &str) -> Result<ApiSessionView, ApiError> {
        let slot = self.slot(id)?;
        let mut live = slot.lock();
        let event = live.session.quit()?;
        let item = live.commit(event)?;
        slot.publish(vec![item]);
        Ok(live.view(id))
    }

    /// Drops the observations so far from recognition.
    pub fn truncate(&self, id: &str) -> Result<ApiSessionView, ApiError> {
        let slot = self.slot(id)?;
        let mut live = slot.lock();
        if live.session.is_terminal().0 {
            return Err(SessionError::Finished.into());
        }
        let event = live.session.truncate_observations();
        let item = live.commit(event)?;
        slot.publish(vec![item]);
        Ok(live.view(id))
    }

    /// Records after index `after`, plus a receiver for later items.
    ///
    /// The receiver is subscribed before the backlog is read, so consumers
    /// should skip live records whose index they have already seen.
    pub fn subscribe(
        &self,
        id: &str,
        after: u64,
    ) -> Result<(Vec<StreamItem>, broadcast::Receiver<StreamItem>), ApiError> {
        let slot = self.slot(id)?;
        let rx = slot.feed.subscribe();
        let live = slot.lock();
        let backlog = live
            .records
            .iter()
            .enumerate()
            .skip(after as usize)
            .map(|(i, record)| StreamItem::Record {
                index: i as u64 + 1,
                record: record.clone(),
            })
            .collect();
        Ok((backlog, rx))
    }
}

fn rank_of(world: &WorldSource) -> Option<Vec<char>> {
    match world {
        WorldSource::BlockWords { spec } => Some(letter_rank(spec)),
        WorldSource::Text { .. } => None,
    }
}
