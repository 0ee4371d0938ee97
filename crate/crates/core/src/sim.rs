//! Single-instance prefill simulation with last-prompt caching.
//!
//! A query processed right after prompt `prev` costs
//! `(1 + c_attn * |cur|) * (|cur| - overlap(cur, prev))` and cannot start
//! before it arrives. The cache holds only the previously processed prompt,
//! including across idle gaps.

use std::io::Write;
use std::num::NonZeroUsize;

use crate::error::{Error, Result};
use crate::prefix::overlap;
use crate::sched::{PendingSet, Policy, PolicyKind, Scheduler};
use crate::time::{rational_from_usize, Rational, Time};
use crate::types::{CostModel, QueryRecord, QueryStream, Schedule, SimResult, Token, TokenSeq};

/// When the instance may begin processing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartMode {
    /// Queries may start as soon as they arrive.
    Immediate,
    /// Nothing starts before the given time.
    Delayed(Time),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub cost: CostModel,
    pub start: StartMode,
    /// Report completions as if queries were processed in bins of this size.
    pub batch_bin: Option<NonZeroUsize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            cost: CostModel::linear(),
            start: StartMode::Immediate,
            batch_bin: None,
        }
    }
}

impl SimConfig {
    pub fn immediate() -> Self {
        Self::default()
    }

    pub fn delayed(start: Time) -> Self {
        SimConfig {
            start: StartMode::Delayed(start),
            ..Self::default()
        }
    }

    pub fn with_cost(mut self, cost: CostModel) -> Self {
        self.cost = cost;
        self
    }

    pub fn with_batch_bin(mut self, b: Option<NonZeroUsize>) -> Self {
        self.batch_bin = b;
        self
    }

    pub fn global_start(&self) -> Time {
        match self.start {
            StartMode::Immediate => Time::ZERO,
            StartMode::Delayed(t) => t,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.global_start().is_negative() {
            return Err(Error::InvalidParams(format!(
                "delayed start must be non-negative, got {}",
                self.global_start()
            )));
        }
        Ok(())
    }
}

/// Processing time of `cur` when `prev` is the cached prompt.
pub fn cost_of(prev: Option<&[Token]>, cur: &[Token], cost: &CostModel) -> Time {
    let len = cur.len();
    let reused = prev.map_or(0, |p| overlap(cur, p));
    let scale = Rational::from_integer(1) + cost.c_attn() * rational_from_usize(len);
    Time::from_rational(scale * rational_from_usize(len - reused))
}

/// Simulates `schedule` on `stream`.
pub fn run_fixed(stream: &QueryStream, schedule: &Schedule, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    schedule.validate(stream)?;
    let mut ready = cfg.global_start();
    let mut cache: Option<&TokenSeq> = None;
    let mut records = Vec::with_capacity(schedule.len());
    for &id in &schedule.order {
        let q = stream.get(id).ok_or(Error::UnknownId(id))?;
        let start = ready.max(q.arrival);
        let completion = start + cost_of(cache.map(|c| c.tokens()), &q.prompt, &cfg.cost);
        records.push(QueryRecord {
            id,
            arrival: q.arrival,
            start,
            completion,
            ttft: completion - q.arrival,
        });
        ready = completion;
        cache = Some(&q.prompt);
    }
    Ok(finish(SimResult::from_records(records), cfg))
}

/// Runs the built-in policy `kind` online, with tie-breaking seeded by `seed`.
pub fn run_policy(
    stream: &QueryStream,
    kind: PolicyKind,
    cfg: &SimConfig,
    seed: u64,
) -> Result<(Schedule, SimResult)> {
    run_with(stream, &mut Scheduler::new(kind, seed), cfg)
}

/// Event loop: at each decision the policy sees only arrived, unprocessed
/// queries and the cached prompt. With nothing pending the clock jumps to
/// the next arrival.
pub fn run_with<P: Policy + ?Sized>(
    stream: &QueryStream,
    policy: &mut P,
    cfg: &SimConfig,
) -> Result<(Schedule, SimResult)> {
    cfg.validate()?;
    let queries = stream.queries();
    let mut pending = PendingSet::new();
    let mut next = 0;
    let mut clock = cfg.global_start();
    let mut cache: Option<&TokenSeq> = None;
    let mut records = Vec::with_capacity(queries.len());

    while records.len() < queries.len() {
        while next < queries.len() && queries[next].arrival <= clock {
            pending.insert(&queries[next])?;
            next += 1;
        }
        if pending.is_empty() {
            clock = queries[next].arrival;
            continue;
        }
        let id = policy.select(&pending, cache)?;
        pending.remove(id)?;
        let q = stream.get(id).ok_or(Error::UnknownId(id))?;
        let completion = clock + cost_of(cache.map(|c| c.tokens()), &q.prompt, &cfg.cost);
        records.push(QueryRecord {
            id,
            arrival: q.arrival,
            start: clock,
            completion,
            ttft: completion - q.arrival,
        });
        clock = completion;
        cache = Some(&q.prompt);
    }

    let result = finish(SimResult::from_records(records), cfg);
    Ok((result.schedule(), result))
}

fn finish(result: SimResult, cfg: &SimConfig) -> SimResult {
    match cfg.batch_bin {
        Some(b) => batchify(&result, b),
        None => result,
    }
}

/// Bins the processing order into consecutive groups of `b`; every query
/// reports the completion of the last query in its bin. Starts are kept.
pub fn batchify(result: &SimResult, b: NonZeroUsize) -> SimResult {
    let n = result.records.len();
    let b = b.get();
    let records = result
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let last = ((i / b + 1) * b).min(n) - 1;
            let completion = result.records[last].completion;
            QueryRecord {
                completion,
                ttft: completion - r.arrival,
                ..r.clone()
            }
        })
        .collect();
    SimResult::from_records(records)
}

pub const CSV_HEADER: &str = "id,arrival,start,completion,ttft";

/// Writes one row per query in processing order, times as exact decimals.
pub fn write_csv<W: Write>(result: &SimResult, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &result.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.id, r.arrival, r.start, r.completion, r.ttft
        )?;
    }
    Ok(())
}
