//! Parameter sweeps over simulated sessions, written as CSV.

use std::io::Write;

use pretcil_core::blockwords::NamedGoal;
use pretcil_core::session::{Env, SessionConfig};
use pretcil_core::Problem;
use serde::{Deserialize, Serialize};

use crate::simulate::{run_simulation, SimulatedUser, SimulationError, UserPolicy};

/// Column order of the sweep CSV; fixed.
pub const HEADER: [&str; 12] = [
    "tau",
    "headStart",
    "beta",
    "policy",
    "goal",
    "seed",
    "reached",
    "userActions",
    "agentActions",
    "mismatches",
    "conflictFallbacks",
    "recognitionCalls",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepGrid {
    pub taus: Vec<f64>,
    pub head_starts: Vec<u32>,
    pub betas: Vec<f64>,
    pub policies: Vec<UserPolicy>,
    /// Goal names; empty means every hypothesis.
    pub goals: Vec<String>,
    pub repetitions: u32,
    /// Repetition `r` uses seed `seed + r`.
    pub seed: u64,
    pub max_turns: u32,
    /// Settings not varied by the grid.
    pub base: SessionConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    pub tau: f64,
    pub head_start: u32,
    pub beta: f64,
    pub policy: String,
    pub goal: String,
    pub seed: u64,
    pub reached: bool,
    pub user_actions: u32,
    pub agent_actions: u32,
    pub mismatches: u32,
    pub conflict_fallbacks: u32,
    pub recognition_calls: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("sweep grid has no cells: {0} is empty")]
    EmptyGrid(&'static str),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SweepGrid {
    fn check(&self) -> Result<(), SweepError> {
        let empty = [
            ("taus", self.taus.is_empty()),
            ("head starts", self.head_starts.is_empty()),
            ("betas", self.betas.is_empty()),
            ("policies", self.policies.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(SweepError::EmptyGrid(name));
        }
        if self.repetitions == 0 {
            return Err(SweepError::EmptyGrid("repetitions"));
        }
        Ok(())
    }
}

/// Runs every cell of the grid for every repetition, in a fixed order:
/// repetition, tau, head start, beta, policy, goal.
pub fn run_sweep(
    world: &Problem,
    hypotheses: &[NamedGoal],
    grid: &SweepGrid,
    env: &Env<'_>,
) -> Result<Vec<SweepRow>, SweepError> {
    grid.check()?;
    let goals: Vec<String> = if grid.goals.is_empty() {
        hypotheses.iter().map(|h| h.name.clone()).collect()
    } else {
        grid.goals.clone()
    };
    if goals.is_empty() {
        return Err(SweepError::EmptyGrid("goals"));
    }
    let mut rows = Vec::new();
    for rep in 0..grid.repetitions {
        let seed = grid.seed.wrapping_add(u64::from(rep));
        for &tau in &grid.taus {
            for &head_start in &grid.head_starts {
                for &beta in &grid.betas {
                    for policy in &grid.policies {
                        for goal in &goals {
                            let config = SessionConfig {
                                tau,
                                head_start,
                                beta,
                                seed,
                                true_goal: Some(goal.clone()),
                                ..grid.base.clone()
                            };
                            let user = SimulatedUser {
                                goal: goal.clone(),
                                policy: *policy,
                                seed,
                            };
                            let m = run_simulation(world, hypotheses, &config, &user, grid.max_turns, env)?.metrics;
                            rows.push(SweepRow {
                                tau,
                                head_start,
                                beta,
                                policy: policy.to_string(),
                                goal: goal.clone(),
                                seed,
                                reached: m.reached,
                                user_actions: m.user_actions,
                                agent_actions: m.agent_actions,
                                mismatches: m.mismatches,
                                conflict_fallbacks: m.conflict_fallbacks,
                                recognition_calls: m.recognition_calls,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), SweepError> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(HEADER)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}
