//! Planning-and-recognition engine for closed-loop assistive interaction.
//!
//! The crate observes a user acting in a turn-based STRIPS world, infers a
//! posterior over their candidate goals by comparing plan costs, derives an
//! intermediate goal from the features those goals share, plans a joint
//! turn-taking response, and monitors whether the user follows it.
//!
//! Everything here is `no_std` with `alloc`; IO, clocks, threads, and file
//! formats live in the companion `pretcil` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod blockwords;
pub mod cost;
pub mod distinctiveness;
pub mod domain;
pub mod heuristic;
pub mod planner;
pub mod recognition;
pub mod responder;
pub mod session;
pub mod strips;

pub use cost::Cost;
pub use strips::{ActionId, ActionSig, Atom, AtomId, GoalCondition, GroundAction, Problem, State};
