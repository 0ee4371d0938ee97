//! Scheduling of LLM prefill queries on a single instance that caches the
//! most recently processed prompt.
//!
//! The crate provides the exact cost model and simulator ([`sim`]), the
//! FCFS, LPM and k-LPM policies ([`sched`]) on top of a radix index
//! ([`prefix`]), workload generators ([`gen`]), closed-form bounds
//! ([`bounds`]) and feasibility search for TTFT limits ([`feasible`]).
//! All times are exact rationals.

pub mod bounds;
pub mod error;
pub mod feasible;
pub mod gen;
pub mod io;
pub mod prefix;
pub mod rng;
pub mod sched;
pub mod sim;
pub mod time;
pub mod types;

pub use error::{Error, Result};
pub use feasible::{brute_force, percentile_schedule, FeasibilityOutcome};
pub use sched::{CycleLen, Policy, PolicyKind, Scheduler};
pub use sim::{run_fixed, run_policy, SimConfig, StartMode};
pub use time::{Rational, Time};
pub use types::{CostModel, Query, QueryId, QueryStream, Schedule, SimResult, Token, TokenSeq};
