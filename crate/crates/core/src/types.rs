//! Queries, streams, schedules and simulation results.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::Deref;

use num_traits::Signed;

use crate::error::{Error, Result};
use crate::time::{ceil_int, rational_from_usize, Rational, Time};

pub type Token = u32;
pub type QueryId = u64;

/// An ordered sequence of opaque token identifiers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSeq(Vec<Token>);

impl TokenSeq {
    pub fn new(tokens: Vec<Token>) -> Self {
        TokenSeq(tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Token> {
        self.0
    }

    /// True when `self` is a (possibly equal) prefix of `other`.
    pub fn is_prefix_of(&self, other: &TokenSeq) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl Deref for TokenSeq {
    type Target = [Token];
    fn deref(&self) -> &[Token] {
        &self.0
    }
}

impl From<Vec<Token>> for TokenSeq {
    fn from(v: Vec<Token>) -> Self {
        TokenSeq(v)
    }
}

impl FromIterator<Token> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = Token>>(iter: I) -> Self {
        TokenSeq(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub id: QueryId,
    pub prompt: TokenSeq,
    pub arrival: Time,
}

impl Query {
    pub fn new(id: QueryId, prompt: impl Into<TokenSeq>, arrival: Time) -> Self {
        Query {
            id,
            prompt: prompt.into(),
            arrival,
        }
    }
}

/// A finite query stream kept in canonical order: by arrival, ties by id.
#[derive(Clone, Debug)]
pub struct QueryStream {
    queries: Vec<Query>,
    positions: HashMap<QueryId, usize>,
}

impl PartialEq for QueryStream {
    fn eq(&self, other: &Self) -> bool {
        self.queries == other.queries
    }
}

impl Eq for QueryStream {}

impl QueryStream {
    /// Validates and canonicalizes `queries`. See [`canonicalize`].
    pub fn new(queries: Vec<Query>) -> Result<Self> {
        canonicalize(queries)
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Query> {
        self.queries.iter()
    }

    /// Index of `id` in canonical order.
    pub fn position(&self, id: QueryId) -> Option<usize> {
        self.positions.get(&id).copied()
    }

    pub fn get(&self, id: QueryId) -> Option<&Query> {
        self.position(id).map(|i| &self.queries[i])
    }

    pub fn ids(&self) -> impl Iterator<Item = QueryId> + '_ {
        self.queries.iter().map(|q| q.id)
    }

    pub fn max_arrival(&self) -> Option<Time> {
        self.queries.last().map(|q| q.arrival)
    }

    pub fn into_queries(self) -> Vec<Query> {
        self.queries
    }
}

impl<'a> IntoIterator for &'a QueryStream {
    type Item = &'a Query;
    type IntoIter = std::slice::Iter<'a, Query>;
    fn into_iter(self) -> Self::IntoIter {
        self.queries.iter()
    }
}

/// Sorts queries by `(arrival, id)` after checking ids are unique and
/// arrivals non-negative. Idempotent.
pub fn canonicalize(mut queries: Vec<Query>) -> Result<QueryStream> {
    let mut seen = HashSet::with_capacity(queries.len());
    for q in &queries {
        if !seen.insert(q.id) {
            return Err(Error::DuplicateId(q.id));
        }
        if q.arrival.is_negative() {
            return Err(Error::InvalidParams(format!(
                "query {} has negative arrival {}",
                q.id, q.arrival
            )));
        }
    }
    queries.sort_by(|a, b| a.arrival.cmp(&b.arrival).then(a.id.cmp(&b.id)));
    let positions = queries.iter().enumerate().map(|(i, q)| (q.id, i)).collect();
    Ok(QueryStream { queries, positions })
}

/// Relative cost of quadratic attention against linear per-token work.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostModel {
    c_attn: Rational,
}

impl CostModel {
    pub fn new(c_attn: Rational) -> Result<Self> {
        if c_attn.is_negative() {
            return Err(Error::InvalidParams(format!(
                "c_attn must be non-negative, got {c_attn}"
            )));
        }
        Ok(CostModel { c_attn })
    }

    /// `c_attn = 0`: cost equals the number of uncached tokens.
    pub fn linear() -> Self {
        CostModel {
            c_attn: Rational::from_integer(0),
        }
    }

    pub fn c_attn(&self) -> Rational {
        self.c_attn
    }

    pub fn is_linear(&self) -> bool {
        *self.c_attn.numer() == 0
    }
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel::linear()
    }
}

/// A processing order over the ids of a stream.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Schedule {
    pub order: Vec<QueryId>,
}

impl Schedule {
    pub fn new(order: Vec<QueryId>) -> Self {
        Schedule { order }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Checks that the order names every query of `stream` exactly once.
    pub fn validate(&self, stream: &QueryStream) -> Result<()> {
        if self.order.len() != stream.len() {
            return Err(Error::NotAPermutation(format!(
                "{} ids for a stream of {}",
                self.order.len(),
                stream.len()
            )));
        }
        let mut seen = HashSet::with_capacity(self.order.len());
        for &id in &self.order {
            if stream.position(id).is_none() {
                return Err(Error::NotAPermutation(format!("unknown id {id}")));
            }
            if !seen.insert(id) {
                return Err(Error::NotAPermutation(format!("id {id} repeated")));
            }
        }
        Ok(())
    }
}

/// Timing of one processed query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryRecord {
    pub id: QueryId,
    pub arrival: Time,
    pub start: Time,
    pub completion: Time,
    pub ttft: Time,
}

/// Per-query timings, in processing order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimResult {
    pub records: Vec<QueryRecord>,
    pub max_ttft: Time,
}

impl SimResult {
    pub fn from_records(records: Vec<QueryRecord>) -> Self {
        let max_ttft = records.iter().map(|r| r.ttft).max().unwrap_or(Time::ZERO);
        SimResult { records, max_ttft }
    }

    pub fn schedule(&self) -> Schedule {
        Schedule::new(self.records.iter().map(|r| r.id).collect())
    }

    pub fn sorted_ttfts(&self) -> Vec<Time> {
        let mut v: Vec<Time> = self.records.iter().map(|r| r.ttft).collect();
        v.sort();
        v
    }

    pub fn percentile(&self, p: Rational) -> Result<Time> {
        percentile(&self.sorted_ttfts(), p)
    }

    pub fn summary(&self) -> Result<LatencySummary> {
        LatencySummary::from_sorted(&self.sorted_ttfts())
    }

    /// Number of queries whose TTFT is at most `limit`.
    pub fn count_within(&self, limit: Time) -> usize {
        self.records.iter().filter(|r| r.ttft <= limit).count()
    }

    pub fn record(&self, id: QueryId) -> Option<&QueryRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// Nearest-rank percentile: the element at 1-based rank `ceil(p * n)` of an
/// ascending sample.
pub fn percentile(sorted: &[Time], p: Rational) -> Result<Time> {
    if sorted.is_empty() {
        return Err(Error::EmptySample);
    }
    if p <= Rational::from_integer(0) || p > Rational::from_integer(1) {
        return Err(Error::PercentileRange(p.to_string()));
    }
    let rank = ceil_int(p * rational_from_usize(sorted.len())).max(1) as usize;
    Ok(sorted[rank - 1])
}

/// `pct(99)` is the fraction 99/100.
pub fn pct(percent: i128) -> Rational {
    Rational::new(percent, 100)
}

/// The latency summary emitted by `run` and `sweep`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatencySummary {
    pub max: Time,
    pub p50: Time,
    pub p90: Time,
    pub p95: Time,
    pub p99: Time,
}

impl LatencySummary {
    pub fn from_sorted(sorted: &[Time]) -> Result<Self> {
        Ok(LatencySummary {
            max: percentile(sorted, Rational::from_integer(1))?,
            p50: percentile(sorted, pct(50))?,
            p90: percentile(sorted, pct(90))?,
            p95: percentile(sorted, pct(95))?,
            p99: percentile(sorted, pct(99))?,
        })
    }
}

impl fmt::Display for LatencySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "max_ttft={} p50={} p90={} p95={} p99={}",
            self.max, self.p50, self.p90, self.p95, self.p99
        )
    }
}
