//! FCFS, LPM and k-LPM scheduling behind one [`Policy`] contract.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::prefix::RadixIndex;
use crate::rng::{policy_rng, SimRng};
use crate::time::Time;
use crate::types::{Query, QueryId, TokenSeq};

/// Queries that have arrived and are not yet processed.
#[derive(Clone, Debug, Default)]
pub struct PendingSet {
    by_arrival: BTreeSet<(Time, QueryId)>,
    arrivals: HashMap<QueryId, Time>,
    index: RadixIndex,
}

impl PendingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, q: &Query) -> Result<()> {
        self.index.insert(q.id, &q.prompt)?;
        self.by_arrival.insert((q.arrival, q.id));
        self.arrivals.insert(q.id, q.arrival);
        Ok(())
    }

    pub fn remove(&mut self, id: QueryId) -> Result<()> {
        let arrival = self.arrivals.remove(&id).ok_or(Error::NotPending(id))?;
        self.by_arrival.remove(&(arrival, id));
        self.index.remove(id)
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    pub fn contains(&self, id: QueryId) -> bool {
        self.arrivals.contains_key(&id)
    }

    /// Earliest arrival, ties by lowest id.
    pub fn oldest(&self) -> Option<QueryId> {
        self.by_arrival.first().map(|&(_, id)| id)
    }

    pub fn index(&self) -> &RadixIndex {
        &self.index
    }
}

/// The k-LPM cycle length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CycleLen {
    Finite(NonZeroUsize),
    Infinite,
}

impl CycleLen {
    pub fn finite(k: usize) -> Result<Self> {
        NonZeroUsize::new(k)
            .map(CycleLen::Finite)
            .ok_or_else(|| Error::InvalidParams("k must be at least 1".into()))
    }
}

impl fmt::Display for CycleLen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CycleLen::Finite(k) => write!(f, "{k}"),
            CycleLen::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for CycleLen {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "∞" => Ok(CycleLen::Infinite),
            other => {
                let k: usize = other
                    .parse()
                    .map_err(|_| Error::Parse(format!("invalid k {other:?}")))?;
                CycleLen::finite(k)
            }
        }
    }
}

/// Which scheduling rule to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Fcfs,
    Lpm,
    KLpm(CycleLen),
}

impl PolicyKind {
    /// Short family name used in reports: `fcfs`, `lpm` or `klpm`.
    pub fn family(&self) -> &'static str {
        match self {
            PolicyKind::Fcfs => "fcfs",
            PolicyKind::Lpm => "lpm",
            PolicyKind::KLpm(_) => "klpm",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::KLpm(k) => write!(f, "klpm:{k}"),
            other => f.write_str(other.family()),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fcfs" => Ok(PolicyKind::Fcfs),
            "lpm" => Ok(PolicyKind::Lpm),
            other => match other.strip_prefix("klpm:") {
                Some(k) => Ok(PolicyKind::KLpm(k.parse()?)),
                None => Err(Error::Parse(format!(
                    "unknown policy {other:?} (expected fcfs, lpm, klpm:<k> or klpm:inf)"
                ))),
            },
        }
    }
}

/// Oldest pending query; ties by lowest id. Consumes no randomness.
pub fn fcfs_next(pending: &PendingSet) -> Result<QueryId> {
    pending.oldest().ok_or(Error::NoPending)
}

/// Pending query with the longest prefix overlap against the cached prompt,
/// uniformly random among ties. With no cache every overlap is zero.
pub fn lpm_next<R: Rng + ?Sized>(
    pending: &PendingSet,
    cache: Option<&TokenSeq>,
    rng: &mut R,
) -> Result<QueryId> {
    if pending.is_empty() {
        return Err(Error::NoPending);
    }
    let probe = cache.map(|c| c.tokens()).unwrap_or(&[]);
    Ok(pending.index().best_match(probe, rng)?.0)
}

/// One k-LPM decision. `phase` is the 0-based position within the current
/// cycle: position 0 takes the oldest query, the remaining `k - 1`
/// positions take the longest prefix match. An infinite cycle never takes
/// the FCFS step.
pub fn klpm_next<R: Rng + ?Sized>(
    pending: &PendingSet,
    cache: Option<&TokenSeq>,
    phase: usize,
    k: CycleLen,
    rng: &mut R,
) -> Result<QueryId> {
    match k {
        CycleLen::Finite(_) if phase == 0 => fcfs_next(pending),
        _ => lpm_next(pending, cache, rng),
    }
}

/// Online scheduling rule: pick the next query among those pending.
pub trait Policy {
    fn select(&mut self, pending: &PendingSet, cache: Option<&TokenSeq>) -> Result<QueryId>;
}

/// A single-run scheduler instance: rule, tie-break generator and cycle
/// position.
#[derive(Clone, Debug)]
pub struct Scheduler {
    kind: PolicyKind,
    rng: SimRng,
    phase: usize,
}

impl Scheduler {
    pub fn new(kind: PolicyKind, seed: u64) -> Self {
        Scheduler {
            kind,
            rng: policy_rng(seed),
            phase: 0,
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn phase(&self) -> usize {
        self.phase
    }
}

impl Policy for Scheduler {
    fn select(&mut self, pending: &PendingSet, cache: Option<&TokenSeq>) -> Result<QueryId> {
        match self.kind {
            PolicyKind::Fcfs => fcfs_next(pending),
            PolicyKind::Lpm => lpm_next(pending, cache, &mut self.rng),
            PolicyKind::KLpm(k) => {
                let id = klpm_next(pending, cache, self.phase, k, &mut self.rng)?;
                // the cycle counts processed queries, so it survives idle gaps
                if let CycleLen::Finite(k) = k {
                    self.phase = (self.phase + 1) % k.get();
                }
                Ok(id)
            }
        }
    }
}
