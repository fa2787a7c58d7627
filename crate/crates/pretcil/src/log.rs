//! Append-only session logs and replay verification.
//!
//! A log is UTF-8 JSON lines. Line 1 is a [`LogHeader`] naming the schema,
//! the world, and the session configuration; every following line is one
//! [`LogRecord`]. Each record carries a digest of the world state after the
//! event, so a replay can tell exactly where it diverged.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use pretcil_core::blockwords::{make_blockwords, BlockWordsSpec, NamedGoal};
use pretcil_core::session::{Env, Event, Session, SessionConfig, SessionError};
use pretcil_core::{Problem, State};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model_text;

pub const SCHEMA: &str = "pretcil-session-log/1";

/// Where a session's world comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WorldSource {
    BlockWords { spec: BlockWordsSpec },
    /// Domain and problem in the s-expression dialect.
    Text { domain: String, problem: String },
}

impl WorldSource {
    pub fn demo() -> Self {
        WorldSource::BlockWords {
            spec: BlockWordsSpec::demo(),
        }
    }

    pub fn build(&self) -> Result<(Problem, Vec<NamedGoal>), String> {
        match self {
            WorldSource::BlockWords { spec } => make_blockwords(spec).map_err(|e| e.to_string()),
            WorldSource::Text { domain, problem } => model_text::load(domain, problem).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogHeader {
    pub schema: String,
    pub session: String,
    pub created_ms: u64,
    pub world: WorldSource,
    pub config: SessionConfig,
}

impl LogHeader {
    pub fn new(session: impl Into<String>, created_ms: u64, world: WorldSource, config: SessionConfig) -> Self {
        LogHeader {
            schema: SCHEMA.into(),
            session: session.into(),
            created_ms,
            world,
            config,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogRecord {
    #[serde(flatten)]
    pub event: Event,
    /// Hex SHA-256 of the world state after the event.
    pub digest: String,
    pub at_ms: u64,
}

impl LogRecord {
    pub fn new(session: &Session, event: Event, at_ms: u64) -> Self {
        LogRecord {
            digest: state_digest(session.world(), &session.state().world),
            event,
            at_ms,
        }
    }

    fn turn(&self) -> Option<u32> {
        match &self.event {
            Event::Turn(record) => Some(record.turn),
            _ => None,
        }
    }
}

/// SHA-256 over the sorted atom names of `state`, one per line.
pub fn state_digest(world: &Problem, state: &State) -> String {
    let mut names: Vec<String> = state.iter().map(|id| world.atom(id).to_string()).collect();
    names.sort();
    let mut hasher = Sha256::new();
    for name in &names {
        hasher.update(name.as_bytes());
        hasher.update(b"\n");
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("log has no header line")]
    MissingHeader,
    #[error("unsupported log schema `{0}`")]
    Schema(String),
    #[error("line {line}: turn {turn} does not follow turn {previous}")]
    TurnOrder { line: usize, turn: u32, previous: u32 },
}

/// Writes one record per line.
pub fn write_records<W: Write>(mut out: W, records: &[LogRecord]) -> io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads records, numbering lines from `first_line`.
fn read_records_from<R: BufRead>(lines: io::Lines<R>, first_line: usize) -> Result<Vec<LogRecord>, LogError> {
    let mut records: Vec<LogRecord> = Vec::new();
    let mut previous = 0;
    for (i, line) in lines.enumerate() {
        let line_no = first_line + i;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogRecord = serde_json::from_str(&line).map_err(|e| LogError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(turn) = record.turn() {
            if turn <= previous {
                return Err(LogError::TurnOrder {
                    line: line_no,
                    turn,
                    previous,
                });
            }
            previous = turn;
        }
        records.push(record);
    }
    Ok(records)
}

/// Reads records written by [`write_records`]; an empty input has none.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<LogRecord>, LogError> {
    read_records_from(input.lines(), 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
}

impl SessionLog {
    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        serde_json::to_writer(&mut out, &self.header)?;
        out.write_all(b"\n")?;
        write_records(out, &self.records)
    }

    pub fn read<R: BufRead>(input: R) -> Result<SessionLog, LogError> {
        let mut lines = input.lines();
        let first = lines.next().ok_or(LogError::MissingHeader)??;
        let header: LogHeader = serde_json::from_str(&first).map_err(|e| LogError::Malformed {
            line: 1,
            message: e.to_string(),
        })?;
        if header.schema != SCHEMA {
            return Err(LogError::Schema(header.schema));
        }
        let records = read_records_from(lines, 2)?;
        Ok(SessionLog { header, records })
    }

    pub fn load(path: &Path) -> Result<SessionLog, LogError> {
        SessionLog::read(BufReader::new(File::open(path)?))
    }
}

/// Single writer for one session's log file; every append is flushed.
pub struct LogWriter {
    file: File,
}

impl LogWriter {
    /// Creates the file with its header; fails if it already exists.
    pub fn create(path: &Path, header: &LogHeader) -> io::Result<LogWriter> {
        let mut file = OpenOptions::new().write(true).create_new(true).open(path)?;
        let mut line = serde_json::to_vec(header)?;
        line.push(b'\n');
        file.write_all(&line)?;
        file.sync_data()?;
        Ok(LogWriter { file })
    }

    /// Reopens an existing log for appending.
    pub fn append_to(path: &Path) -> io::Result<LogWriter> {
        Ok(LogWriter {
            file: OpenOptions::new().append(true).open(path)?,
        })
    }

    pub fn append(&mut self, record: &LogRecord) -> io::Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("cannot build world: {0}")]
    World(String),
    #[error("turn {turn}: {source}")]
    Session {
        turn: u32,
        #[source]
        source: SessionError,
    },
    #[error("record {index}: state digest mismatch (log {expected}, replay {found})")]
    DigestMismatch {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("record {index}: replay diverged in {what}")]
    Diverged { index: usize, what: String },
}

/// Rebuilds the session a log describes, checking every record against the
/// recomputed one: user actions are re-submitted, agent turns are
/// re-decided, and posteriors, intermediate goals, verdicts, and digests
/// must agree exactly.
pub fn replay(log: &SessionLog, env: &Env<'_>) -> Result<Session, ReplayError> {
    let (world, hypotheses) = log.header.world.build().map_err(ReplayError::World)?;
    let mut session =
        Session::new(world, hypotheses, log.header.config.clone()).map_err(|source| ReplayError::Session { turn: 0, source })?;
    for (index, record) in log.records.iter().enumerate() {
        let turn = session.state().turn + 1;
        let wrap = |source| ReplayError::Session { turn, source };
        let event = match &record.event {
            Event::Turn(logged) if logged.actor == session.config().user => {
                session.submit_user_action(&logged.action).map_err(wrap)?
            }
            Event::Turn(_) => session.agent_step(env).map_err(wrap)?,
            Event::Truncate { .. } => session.truncate_observations(),
            Event::Quit { .. } => session.quit().map_err(wrap)?,
        };
        let replayed = LogRecord::new(&session, event, record.at_ms);
        if replayed.event != record.event {
            return Err(ReplayError::Diverged {
                index,
                what: divergence(&record.event, &replayed.event),
            });
        }
        // Floating-point values must agree to the last bit, not just compare equal.
        let bytes = |e: &Event| serde_json::to_string(e).expect("events serialize");
        if bytes(&replayed.event) != bytes(&record.event) {
            return Err(ReplayError::Diverged {
                index,
                what: "serialized event".into(),
            });
        }
        if replayed.digest != record.digest {
            return Err(ReplayError::DigestMismatch {
                index,
                expected: record.digest.clone(),
                found: replayed.digest,
            });
        }
    }
    Ok(session)
}

fn divergence(logged: &Event, replayed: &Event) -> String {
    match (logged, replayed) {
        (Event::Turn(a), Event::Turn(b)) => {
            if a.actor != b.actor {
                format!("actor ({} vs {})", a.actor, b.actor)
            } else if a.action != b.action {
                format!("action ({} vs {})", a.action, b.action)
            } else if a.verdict != b.verdict {
                "monitor verdict".into()
            } else if a.decision.as_ref().map(|d| &d.posterior) != b.decision.as_ref().map(|d| &d.posterior) {
                "posterior".into()
            } else if a.decision.as_ref().map(|d| &d.intermediate) != b.decision.as_ref().map(|d| &d.intermediate) {
                "intermediate goal".into()
            } else if a.turn != b.turn {
                format!("turn index ({} vs {})", a.turn, b.turn)
            } else {
                "agent decision".into()
            }
        }
        _ => "event kind".into(),
    }
}
