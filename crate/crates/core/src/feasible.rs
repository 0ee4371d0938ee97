//! Feasibility of TTFT constraints.
//!
//! [`brute_force`] decides exactly whether some processing order gives every
//! query a TTFT of at most `T`. [`percentile_schedule`] is the block
//! algorithm for percentile constraints: it either certifies that no order
//! meets `T` for every query, or returns an order in which at least
//! `ceil((1 - p) n)` queries meet `T`.
//!
//! The block algorithm splits the stream (in arrival order) into blocks of
//! `n0 = ceil(2T / p)` queries and drops the `2T` latest arrivals from every
//! block but the last. The kept parts are solved one block at a time, linked
//! through the last query of each block. Per block, a subset program finds
//! the earliest completion and a witness order for every feasible
//! (cache, last query) pair.
//!
//! A path through this strict model yields the returned schedule, with the
//! dropped queries appended. Certificates come from a relaxed model where
//! each kept query may also reuse its longest shared prefix with any dropped
//! query; an empty relaxed layer means no order meets `T` for all queries.
//! When only the strict model fails, small streams go to the exact search
//! and larger ones return [`Error::Inconclusive`].

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::prefix::overlap;
use crate::sim::{cost_of, run_fixed, SimConfig};
use crate::time::{ceil_int, rational_from_usize, Rational, Time};
use crate::types::{CostModel, QueryId, QueryStream, Schedule};

/// Result of a feasibility question.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FeasibilityOutcome {
    /// No processing order meets the constraint for every query.
    Infeasible { certificate: String },
    /// `schedule` gives at least `satisfied_count` queries a TTFT within the
    /// constraint.
    Feasible {
        schedule: Schedule,
        satisfied_count: usize,
    },
}

impl FeasibilityOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasibilityOutcome::Feasible { .. })
    }

    pub fn schedule(&self) -> Option<&Schedule> {
        match self {
            FeasibilityOutcome::Feasible { schedule, .. } => Some(schedule),
            FeasibilityOutcome::Infeasible { .. } => None,
        }
    }
}

pub const DEFAULT_EXACT_LIMIT: usize = 10;

/// Exact search with the default size limit.
pub fn brute_force(
    stream: &QueryStream,
    limit: Time,
    cfg: &SimConfig,
) -> Result<FeasibilityOutcome> {
    brute_force_with_limit(stream, limit, cfg, DEFAULT_EXACT_LIMIT)
}

/// Depth-first search over processing orders, most urgent query first.
///
/// A branch is cut when a placed query misses the deadline, when some
/// unplaced query can no longer meet it even at its cheapest possible cost,
/// or when the same (placed set, last query) state was already refuted at an
/// earlier or equal clock. The last rule is exact because later completion
/// can only delay every subsequent start.
pub fn brute_force_with_limit(
    stream: &QueryStream,
    limit: Time,
    cfg: &SimConfig,
    max_queries: usize,
) -> Result<FeasibilityOutcome> {
    let n = stream.len();
    if n > max_queries || n > 64 {
        return Err(Error::TooLarge {
            n,
            limit: max_queries.min(64),
        });
    }
    if cfg.batch_bin.is_some() {
        return Err(Error::Precondition(
            "exact search does not model batch bins".into(),
        ));
    }
    let queries = stream.queries();
    let mut cost = vec![Time::ZERO; (n + 1) * n];
    for cur in 0..n {
        cost[cur] = cost_of(None, &queries[cur].prompt, &cfg.cost);
        for prev in 0..n {
            cost[(prev + 1) * n + cur] =
                cost_of(Some(&queries[prev].prompt), &queries[cur].prompt, &cfg.cost);
        }
    }
    let cheapest = (0..n)
        .map(|cur| {
            (0..=n)
                .filter(|&p| p != cur + 1)
                .map(|p| cost[p * n + cur])
                .min()
                .unwrap()
        })
        .collect();
    let mut search = ExactSearch {
        n,
        arrivals: queries.iter().map(|q| q.arrival).collect(),
        cost,
        cheapest,
        limit,
        refuted: HashMap::new(),
        order: Vec::with_capacity(n),
        visited: 0,
    };
    if search.dfs(0, None, cfg.global_start()) {
        let order = search.order.iter().map(|&i| queries[i].id).collect();
        return Ok(FeasibilityOutcome::Feasible {
            schedule: Schedule::new(order),
            satisfied_count: n,
        });
    }
    Ok(FeasibilityOutcome::Infeasible {
        certificate: format!(
            "exhaustive search over all orders of {n} queries ({} states) found none with every TTFT <= {limit}",
            search.visited
        ),
    })
}

struct ExactSearch {
    n: usize,
    /// Canonical order, so index order is deadline order.
    arrivals: Vec<Time>,
    /// `cost[(prev + 1) * n + cur]`, with row 0 for an empty cache.
    cost: Vec<Time>,
    cheapest: Vec<Time>,
    limit: Time,
    refuted: HashMap<(u64, usize), Time>,
    order: Vec<usize>,
    visited: u64,
}

impl ExactSearch {
    fn dfs(&mut self, placed: u64, last: Option<usize>, ready: Time) -> bool {
        self.visited += 1;
        if placed.count_ones() as usize == self.n {
            return true;
        }
        let open = || (0..self.n).filter(move |&i| placed & (1 << i) == 0);
        if open()
            .any(|i| ready.max(self.arrivals[i]) + self.cheapest[i] - self.arrivals[i] > self.limit)
        {
            return false;
        }
        let key = (placed, last.map_or(usize::MAX, |l| l));
        if self.refuted.get(&key).is_some_and(|&t| t <= ready) {
            return false;
        }
        let row = last.map_or(0, |l| l + 1) * self.n;
        for cur in open().collect::<Vec<_>>() {
            let done = ready.max(self.arrivals[cur]) + self.cost[row + cur];
            if done - self.arrivals[cur] > self.limit {
                continue;
            }
            self.order.push(cur);
            if self.dfs(placed | (1 << cur), Some(cur), done) {
                return true;
            }
            self.order.pop();
        }
        let entry = self.refuted.entry(key).or_insert(ready);
        *entry = (*entry).min(ready);
        false
    }
}

/// Tunables for [`percentile_schedule_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PercentileConfig {
    /// Longest prompt accepted.
    pub max_prompt_len: usize,
    /// Largest kept block the subset program will enumerate.
    pub max_block: usize,
    /// Streams up to this size are settled exactly when the block models
    /// disagree.
    pub exact_fallback: usize,
}

impl Default for PercentileConfig {
    fn default() -> Self {
        PercentileConfig {
            max_prompt_len: 4096,
            max_block: 12,
            exact_fallback: 12,
        }
    }
}

/// Split of a stream into arrival-contiguous blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockDecomposition {
    /// `ceil(2T / p)`.
    pub block_size: usize,
    pub blocks: Vec<Vec<QueryId>>,
    /// Each block without its latest arrivals.
    pub reduced: Vec<Vec<QueryId>>,
    /// The dropped latest arrivals of each block.
    pub removed: Vec<Vec<QueryId>>,
}

impl BlockDecomposition {
    pub fn removal_counts(&self) -> Vec<usize> {
        self.removed.iter().map(Vec::len).collect()
    }

    pub fn kept(&self) -> usize {
        self.reduced.iter().map(Vec::len).sum()
    }
}

fn validate_percentile_inputs(
    stream: &QueryStream,
    limit: Time,
    p: Rational,
    cfg: &PercentileConfig,
) -> Result<i128> {
    if !limit.is_integer() || limit <= Time::ZERO {
        return Err(Error::Precondition(format!(
            "T must be a positive integer, got {limit}"
        )));
    }
    let (zero, one) = (Rational::from_integer(0), Rational::from_integer(1));
    if p <= zero || p >= one {
        return Err(Error::Precondition(format!(
            "p must lie in (0, 1), got {p}"
        )));
    }
    if let Some(q) = stream
        .iter()
        .find(|q| q.prompt.len() > cfg.max_prompt_len || q.prompt.is_empty())
    {
        return Err(Error::Precondition(format!(
            "query {} has length {} outside 1..={}",
            q.id,
            q.prompt.len(),
            cfg.max_prompt_len
        )));
    }
    Ok(limit.floor_int())
}

/// Some pair `(a, b)` of distinct queries where `a`'s prompt is a prefix of
/// (or equal to) `b`'s.
pub fn prefix_pair(stream: &QueryStream) -> Option<(QueryId, QueryId)> {
    let mut sorted: Vec<_> = stream.iter().collect();
    sorted.sort_by(|a, b| a.prompt.cmp(&b.prompt));
    sorted
        .windows(2)
        .find(|w| w[0].prompt.is_prefix_of(&w[1].prompt))
        .map(|w| (w[0].id, w[1].id))
}

/// Blocks of `n0 = ceil(2T / p)` queries in canonical order; every block
/// but the last drops its `min(2T, size)` latest arrivals. With more than
/// one block, no prompt may be a prefix of (or equal to) another.
pub fn decompose(stream: &QueryStream, limit: Time, p: Rational) -> Result<BlockDecomposition> {
    decompose_with(stream, limit, p, &PercentileConfig::default())
}

pub fn decompose_with(
    stream: &QueryStream,
    limit: Time,
    p: Rational,
    cfg: &PercentileConfig,
) -> Result<BlockDecomposition> {
    let t = validate_percentile_inputs(stream, limit, p, cfg)?;
    let block_size = ceil_int(Rational::from_integer(2 * t) / p) as usize;
    let ids: Vec<QueryId> = stream.ids().collect();
    let blocks: Vec<Vec<QueryId>> = ids.chunks(block_size).map(<[QueryId]>::to_vec).collect();
    if blocks.len() > 1 {
        if let Some((a, b)) = prefix_pair(stream) {
            return Err(Error::Precondition(format!(
                "prompt of query {a} is a prefix of query {b}"
            )));
        }
    }
    let last = blocks.len().saturating_sub(1);
    let (mut reduced, mut removed) = (Vec::new(), Vec::new());
    for (k, block) in blocks.iter().enumerate() {
        let drop = if k == last {
            0
        } else {
            (2 * t as usize).min(block.len())
        };
        let split = block.len() - drop;
        reduced.push(block[..split].to_vec());
        removed.push(block[split..].to_vec());
    }
    Ok(BlockDecomposition {
        block_size,
        blocks,
        reduced,
        removed,
    })
}

/// Feasible (cache, last query) pair of one block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionEdge {
    /// Query whose prompt is cached when the block starts; `None` is the
    /// empty cache.
    pub from: Option<QueryId>,
    /// Last query of the block.
    pub to: QueryId,
    pub block: usize,
    /// Earliest completion of `to` over feasible orders with this pair.
    pub completion: Time,
    /// One order achieving `completion`.
    pub witness: Vec<QueryId>,
}

/// Stream data indexed by canonical position, with per-query reuse bonus.
struct BlockCtx<'a> {
    stream: &'a QueryStream,
    limit: Time,
    bonus: Vec<usize>,
}

impl BlockCtx<'_> {
    fn strict(stream: &QueryStream, limit: Time) -> BlockCtx<'_> {
        BlockCtx {
            stream,
            limit,
            bonus: vec![0; stream.len()],
        }
    }

    fn cost(&self, prev: Option<usize>, cur: usize) -> Time {
        let queries = self.stream.queries();
        let prompt = &queries[cur].prompt;
        let reused = prev
            .map_or(0, |p| overlap(prompt, &queries[p].prompt))
            .max(self.bonus[cur]);
        Time::from_int((prompt.len() - reused) as i64)
    }

    /// Subset program over `block` (canonical positions) from one cache
    /// state. Returns `(last, completion, order)` for every reachable last.
    fn solve(
        &self,
        block: &[usize],
        init: Option<usize>,
        ready: Time,
    ) -> Vec<(usize, Time, Vec<usize>)> {
        let b = block.len();
        if b == 0 {
            return Vec::new();
        }
        let arrivals: Vec<Time> = block
            .iter()
            .map(|&i| self.stream.queries()[i].arrival)
            .collect();
        let full = (1usize << b) - 1;
        let mut best: Vec<Option<Time>> = vec![None; (full + 1) * b];
        let mut parent: Vec<u8> = vec![u8::MAX; (full + 1) * b];
        for j in 0..b {
            let done = ready.max(arrivals[j]) + self.cost(init, block[j]);
            if done - arrivals[j] <= self.limit {
                best[(1 << j) * b + j] = Some(done);
            }
        }
        for mask in 1..=full {
            for last in 0..b {
                let Some(now) = best[mask * b + last] else {
                    continue;
                };
                for next in (0..b).filter(|&j| mask & (1 << j) == 0) {
                    let done = now.max(arrivals[next]) + self.cost(Some(block[last]), block[next]);
                    if done - arrivals[next] > self.limit {
                        continue;
                    }
                    let slot = (mask | 1 << next) * b + next;
                    if best[slot].is_none_or(|t| done < t) {
                        best[slot] = Some(done);
                        parent[slot] = last as u8;
                    }
                }
            }
        }
        (0..b)
            .filter_map(|last| {
                let done = best[full * b + last]?;
                let mut order = Vec::with_capacity(b);
                let (mut mask, mut at) = (full, last);
                loop {
                    order.push(block[at]);
                    let prev = parent[mask * b + at];
                    mask &= !(1 << at);
                    if mask == 0 {
                        break;
                    }
                    at = prev as usize;
                }
                order.reverse();
                Some((block[last], done, order))
            })
            .collect()
    }
}

/// All feasible (cache, last) pairs of `block` under the exact model with
/// `c_attn = 0`, one per pair, keeping the earliest completion. Each init
/// comes with the time the block may start.
pub fn block_transitions(
    stream: &QueryStream,
    block_index: usize,
    block: &[QueryId],
    inits: &[(Option<QueryId>, Time)],
    limit: Time,
) -> Result<Vec<TransitionEdge>> {
    let pos = |id| stream.position(id).ok_or(Error::UnknownId(id));
    let block: Vec<usize> = block.iter().map(|&id| pos(id)).collect::<Result<_>>()?;
    let ctx = BlockCtx::strict(stream, limit);
    let mut edges = Vec::new();
    for &(from, ready) in inits {
        let init = from.map(pos).transpose()?;
        for (last, completion, order) in ctx.solve(&block, init, ready) {
            let ids = |v: &[usize]| {
                v.iter()
                    .map(|&i| stream.queries()[i].id)
                    .collect::<Vec<_>>()
            };
            edges.push(TransitionEdge {
                from,
                to: stream.queries()[last].id,
                block: block_index,
                completion,
                witness: ids(&order),
            });
        }
    }
    Ok(edges)
}

/// Frontier entry: best way found to end a block on a given query.
#[derive(Clone)]
struct Reached {
    completion: Time,
    /// Index of the predecessor entry in the previous layer, if any.
    from: Option<usize>,
    order: Vec<usize>,
}

enum Chain {
    Path(Vec<usize>),
    /// First block whose layer came out empty.
    Cut(usize),
}

/// Layer-by-layer search for a path from the empty cache through every
/// reduced block, keeping for each end query the earliest completion.
fn chain(ctx: &BlockCtx<'_>, reduced: &[Vec<usize>], start: Time) -> Chain {
    let mut layers: Vec<Vec<(usize, Reached)>> = Vec::new();
    let mut frontier: Vec<(Option<usize>, Time)> = vec![(None, start)];
    for (k, block) in reduced.iter().enumerate() {
        let mut reached: Vec<(usize, Reached)> = Vec::new();
        for (f, &(init, ready)) in frontier.iter().enumerate() {
            for (last, completion, order) in ctx.solve(block, init, ready) {
                let entry = Reached {
                    completion,
                    from: (k > 0).then_some(f),
                    order,
                };
                match reached.iter_mut().find(|(l, _)| *l == last) {
                    Some((_, r)) if completion < r.completion => *r = entry,
                    Some(_) => {}
                    None => reached.push((last, entry)),
                }
            }
        }
        if reached.is_empty() {
            return Chain::Cut(k);
        }
        reached.sort_by_key(|(last, _)| *last);
        frontier = reached
            .iter()
            .map(|(last, r)| (Some(*last), r.completion))
            .collect();
        layers.push(reached);
    }

    let Some(final_layer) = layers.last() else {
        return Chain::Path(Vec::new());
    };
    let mut at = (0..final_layer.len())
        .min_by_key(|&i| final_layer[i].1.completion)
        .unwrap();
    let mut parts = Vec::with_capacity(layers.len());
    for layer in layers.iter().rev() {
        let r = &layer[at].1;
        parts.push(r.order.clone());
        at = r.from.unwrap_or(0);
    }
    parts.reverse();
    Chain::Path(parts.concat())
}

/// Percentile algorithm with default limits.
pub fn percentile_schedule(
    stream: &QueryStream,
    limit: Time,
    p: Rational,
) -> Result<FeasibilityOutcome> {
    percentile_schedule_with(stream, limit, p, &PercentileConfig::default())
}

/// Either certifies that no order meets `limit` for every query, or returns
/// an order in which at least `ceil((1 - p) n)` queries meet it. Assumes
/// `c_attn = 0`; the other preconditions are those of [`decompose`].
pub fn percentile_schedule_with(
    stream: &QueryStream,
    limit: Time,
    p: Rational,
    cfg: &PercentileConfig,
) -> Result<FeasibilityOutcome> {
    let dec = decompose_with(stream, limit, p, cfg)?;
    if let Some((k, big)) = dec
        .reduced
        .iter()
        .enumerate()
        .find(|(_, b)| b.len() > cfg.max_block)
    {
        return Err(Error::Precondition(format!(
            "reduced block {k} has {} queries, above the limit of {}",
            big.len(),
            cfg.max_block
        )));
    }
    let pos = |id: &QueryId| {
        stream
            .position(*id)
            .expect("decomposition ids come from the stream")
    };
    let reduced: Vec<Vec<usize>> = dec
        .reduced
        .iter()
        .map(|b| b.iter().map(pos).collect())
        .collect();
    let removed: Vec<usize> = dec.removed.iter().flatten().map(pos).collect();
    let n = stream.len();
    let required = ceil_int((Rational::from_integer(1) - p) * rational_from_usize(n)) as usize;

    let strict = BlockCtx::strict(stream, limit);
    let cut = match chain(&strict, &reduced, Time::ZERO) {
        Chain::Path(order) => {
            let queries = stream.queries();
            let ids: Vec<QueryId> = order
                .iter()
                .chain(&removed)
                .map(|&i| queries[i].id)
                .collect();
            let schedule = Schedule::new(ids);
            let replay = run_fixed(stream, &schedule, &SimConfig::immediate())?;
            let satisfied_count = replay.count_within(limit);
            debug_assert!(satisfied_count >= required);
            return Ok(FeasibilityOutcome::Feasible {
                schedule,
                satisfied_count,
            });
        }
        Chain::Cut(k) => k,
    };

    if removed.is_empty() {
        return Ok(infeasible(&dec, cut, limit));
    }
    let mut relaxed = BlockCtx::strict(stream, limit);
    let queries = stream.queries();
    for block in &reduced {
        for &q in block {
            relaxed.bonus[q] = removed
                .iter()
                .map(|&r| overlap(&queries[q].prompt, &queries[r].prompt))
                .max()
                .unwrap_or(0);
        }
    }
    match chain(&relaxed, &reduced, Time::ZERO) {
        Chain::Cut(k) => Ok(infeasible(&dec, k, limit)),
        Chain::Path(_) if n <= cfg.exact_fallback => {
            brute_force_with_limit(stream, limit, &SimConfig::immediate(), cfg.exact_fallback)
        }
        Chain::Path(_) => Err(Error::Inconclusive(format!(
            "block models disagree at block {cut} and {n} queries exceed the exact fallback limit {}",
            cfg.exact_fallback
        ))),
    }
}

fn infeasible(dec: &BlockDecomposition, block: usize, limit: Time) -> FeasibilityOutcome {
    FeasibilityOutcome::Infeasible {
        certificate: format!(
            "reduced block {block} of {} (queries {:?}) has no order meeting TTFT <= {limit} from any reachable cache state",
            dec.reduced.len(),
            dec.reduced[block]
        ),
    }
}

/// `c_attn = 0` guard used by front ends that accept a cost model.
pub fn require_linear(cost: &CostModel) -> Result<()> {
    if cost.is_linear() {
        Ok(())
    } else {
        Err(Error::Precondition(
            "the percentile algorithm requires c_attn = 0".into(),
        ))
    }
}
