//! Query-stream generators.
//!
//! Token ids are allocated from disjoint ranges so that distinct blocks never
//! share a first token: user prefixes start at `1000 * user`, documents at
//! `1_000_000 + 1000 * doc`, and the reduction families use their own ranges
//! from 10 000 000 upwards.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::generator_rng;
use crate::time::{Rational, Time};
use crate::types::{Query, QueryId, QueryStream, Token, TokenSeq};

const USER_STRIDE: u64 = 1000;
const DOC_BASE: u64 = 1_000_000;
const DOC_STRIDE: u64 = 1000;
const X_BASE: u64 = 10_000_000;
const Y_BASE: u64 = 20_000_000;
const W_BASE: u64 = 30_000_000;

/// Arrival times drawn from floating-point processes are rounded to this grid.
pub const ARRIVAL_RESOLUTION: i128 = 1_000_000_000;

/// Parameters of the regular-arrival shuffled queue.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffledQueueParams {
    pub n: usize,
    /// How many prompts share each user prefix.
    pub k_rep: usize,
    /// User-prefix length.
    pub u: usize,
    /// Document length.
    pub d: usize,
    /// Gap between consecutive arrivals.
    #[serde(with = "time_string")]
    pub s: Time,
    pub seed: u64,
}

impl ShuffledQueueParams {
    pub fn new(n: usize, k_rep: usize, u: usize, d: usize, s: Time, seed: u64) -> Self {
        ShuffledQueueParams {
            n,
            k_rep,
            u,
            d,
            s,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        PromptShape {
            n: self.n,
            k_rep: self.k_rep,
            u: self.u,
            d: self.d,
        }
        .validate()?;
        if self.s.is_negative() {
            return Err(Error::InvalidParams(format!(
                "s must be non-negative, got {}",
                self.s
            )));
        }
        Ok(())
    }
}

/// Shape of the (user)(doc) prompt family: `n / k_rep` user prefixes of
/// length `u`, each used by `k_rep` prompts, and `n` documents of length `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptShape {
    pub n: usize,
    pub k_rep: usize,
    pub u: usize,
    pub d: usize,
}

impl PromptShape {
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidParams(m));
        if self.n == 0 {
            return invalid("n must be positive".into());
        }
        if self.k_rep == 0 || !self.n.is_multiple_of(self.k_rep) {
            return invalid(format!("k_rep = {} must divide n = {}", self.k_rep, self.n));
        }
        if self.u == 0 || self.d == 0 {
            return invalid("u and d must be at least 1".into());
        }
        Ok(())
    }

    /// Prompt `i` (1-based) is `(user)_{((i-1) mod n/k_rep) + 1} (doc)_i`.
    pub fn prompts(&self) -> Result<Vec<TokenSeq>> {
        self.validate()?;
        let users = (self.n / self.k_rep) as u64;
        (1..=self.n as u64)
            .map(|i| {
                let user = (i - 1) % users + 1;
                let mut tokens = block(USER_STRIDE * user, self.u)?;
                tokens.extend(block(DOC_BASE + DOC_STRIDE * i, self.d)?);
                Ok(TokenSeq::new(tokens))
            })
            .collect()
    }
}

fn token(v: u64) -> Result<Token> {
    Token::try_from(v).map_err(|_| Error::Overflow)
}

fn block(base: u64, len: usize) -> Result<Vec<Token>> {
    (0..len as u64).map(|o| token(base + o)).collect()
}

/// Regular-arrival shuffled queue: prompt `i` gets arrival `s * sigma(i)`
/// for a uniformly random permutation `sigma` of `1..=n`. Query ids are the
/// 1-based prompt indices.
pub fn gen_shuffled(params: &ShuffledQueueParams) -> Result<QueryStream> {
    params.validate()?;
    let prompts = PromptShape {
        n: params.n,
        k_rep: params.k_rep,
        u: params.u,
        d: params.d,
    }
    .prompts()?;
    let mut sigma: Vec<i128> = (1..=params.n as i128).collect();
    sigma.shuffle(&mut generator_rng(params.seed));
    let queries = prompts
        .into_iter()
        .zip(sigma)
        .enumerate()
        .map(|(i, (prompt, pos))| {
            Query::new(
                i as QueryId + 1,
                prompt,
                params.s * Rational::from_integer(pos),
            )
        })
        .collect();
    QueryStream::new(queries)
}

/// The four-query burst: two users with two documents each, `u = d = 5`,
/// everything arriving at time zero. Ids 1..=4 name `x1..x4`.
pub fn toy_stream() -> QueryStream {
    gen_shuffled(&ShuffledQueueParams::new(4, 2, 5, 5, Time::ZERO, 0))
        .expect("toy parameters are valid")
}

/// Poisson arrivals at `rate` queries per time unit over the shuffled
/// (user)(doc) prompt family. Arrivals are rounded to [`ARRIVAL_RESOLUTION`].
pub fn gen_poisson(n: usize, rate: f64, shape: PromptShape, seed: u64) -> Result<QueryStream> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidParams(format!(
            "rate must be positive, got {rate}"
        )));
    }
    let shape = PromptShape { n, ..shape };
    let prompts = shape.prompts()?;
    let mut rng = generator_rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let gaps = Exp::new(rate).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut clock = 0.0f64;
    let mut queries = Vec::with_capacity(n);
    for idx in order {
        clock += gaps.sample(&mut rng);
        let arrival = Time::from_f64_rounded(clock, ARRIVAL_RESOLUTION)?;
        queries.push(Query::new(
            idx as QueryId + 1,
            prompts[idx].clone(),
            arrival,
        ));
    }
    QueryStream::new(queries)
}

/// A 3-PARTITION instance: `3m` integers strictly between `H/4` and `H/2`
/// summing to `mH`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionInstance {
    pub m: usize,
    pub h: u64,
    pub a: Vec<u64>,
}

impl PartitionInstance {
    pub fn new(m: usize, h: u64, a: Vec<u64>) -> Result<Self> {
        let inst = PartitionInstance { m, h, a };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidInstance(m));
        if self.m == 0 || self.h == 0 {
            return invalid("m and H must be positive".into());
        }
        if self.a.len() != 3 * self.m {
            return invalid(format!(
                "expected {} integers, got {}",
                3 * self.m,
                self.a.len()
            ));
        }
        let total: u64 = self.a.iter().sum();
        if total != self.m as u64 * self.h {
            return invalid(format!(
                "sum {total} differs from mH = {}",
                self.m as u64 * self.h
            ));
        }
        if let Some(&bad) = self.a.iter().find(|&&a| 4 * a <= self.h || 2 * a >= self.h) {
            return invalid(format!("{bad} is not strictly between H/4 and H/2"));
        }
        Ok(())
    }

    /// The TTFT constraint of the reduction, `(m + m^2) H`.
    pub fn deadline(&self) -> u64 {
        (self.m as u64 + (self.m * self.m) as u64) * self.h
    }

    /// Exhaustive search for a split into `m` groups each summing to `H`.
    pub fn has_partition(&self) -> bool {
        let mut items = self.a.clone();
        items.sort_unstable_by(|a, b| b.cmp(a));
        let mut loads = vec![0u64; self.m];
        fill_bins(&items, &mut loads, self.h)
    }
}

fn fill_bins(items: &[u64], loads: &mut [u64], cap: u64) -> bool {
    let Some((&first, rest)) = items.split_first() else {
        return loads.iter().all(|&l| l == cap);
    };
    for b in 0..loads.len() {
        // bins with equal load are interchangeable
        if loads[..b].contains(&loads[b]) || loads[b] + first > cap {
            continue;
        }
        loads[b] += first;
        let ok = fill_bins(rest, loads, cap);
        loads[b] -= first;
        if ok {
            return true;
        }
    }
    false
}

/// Every valid instance with `m <= max_m` and `H <= max_h`, each as a
/// non-increasing multiset.
pub fn enumerate_partition_instances(max_m: usize, max_h: u64) -> Vec<PartitionInstance> {
    let mut out = Vec::new();
    for m in 1..=max_m {
        for h in 1..=max_h {
            let lo = h / 4 + 1;
            let hi = (h - 1) / 2;
            let mut current = Vec::with_capacity(3 * m);
            multisets(lo, hi, 3 * m, m as u64 * h, &mut current, &mut |a| {
                out.push(PartitionInstance {
                    m,
                    h,
                    a: a.to_vec(),
                });
            });
        }
    }
    out.retain(|inst| inst.validate().is_ok());
    out
}

fn multisets(
    lo: u64,
    hi: u64,
    count: usize,
    sum: u64,
    cur: &mut Vec<u64>,
    emit: &mut dyn FnMut(&[u64]),
) {
    if count == 0 {
        if sum == 0 {
            emit(cur);
        }
        return;
    }
    let top = cur.last().copied().unwrap_or(hi).min(hi);
    let mut v = top;
    while v >= lo && v > 0 {
        if v * count as u64 >= sum && lo * (count as u64 - 1) + v <= sum {
            cur.push(v);
            multisets(lo, hi, count - 1, sum - v, cur, emit);
            cur.pop();
        }
        v -= 1;
    }
}

/// Query families of the reduction stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionStream {
    pub stream: QueryStream,
    /// TTFT constraint `(m + m^2) H`.
    pub deadline: Time,
    pub x_ids: Vec<QueryId>,
    pub y_ids: Vec<QueryId>,
    pub z_ids: Vec<QueryId>,
    pub w_ids: [QueryId; 2],
}

/// Builds the stream whose TTFT-`(m + m^2) H` feasibility is equivalent to
/// the instance admitting a 3-partition (for `c_attn = 0`):
///
/// - `x_i`: `a_i` copies of a private token, arriving at `T`;
/// - `y_i`: `mH` copies of a private token, arriving at `i (H + mH)`;
/// - `z_i`: same prompt as `y_i`, arriving at `T + i (H + mH)`;
/// - `w_1`, `w_2`: length `T`, private tokens, arriving at `0` and `2T`.
pub fn gen_3partition_stream(inst: &PartitionInstance) -> Result<PartitionStream> {
    inst.validate()?;
    let m = inst.m as u64;
    let h = inst.h;
    let deadline = inst.deadline();
    let period = h + m * h;
    let t = |v: u64| Time::from_int(v as i64);
    let repeat = |tok: u64, len: u64| -> Result<TokenSeq> {
        Ok(TokenSeq::new(vec![token(tok)?; len as usize]))
    };

    let mut queries = Vec::new();
    let mut next_id: QueryId = 0;
    let mut push = |prompt: TokenSeq, arrival: Time| {
        queries.push(Query::new(next_id, prompt, arrival));
        next_id += 1;
        next_id - 1
    };

    let mut x_ids = Vec::new();
    for (i, &a) in inst.a.iter().enumerate() {
        x_ids.push(push(repeat(X_BASE + i as u64, a)?, t(deadline)));
    }
    let mut y_ids = Vec::new();
    for i in 1..=m {
        y_ids.push(push(repeat(Y_BASE + i, m * h)?, t(i * period)));
    }
    let mut z_ids = Vec::new();
    for i in 1..=m {
        z_ids.push(push(repeat(Y_BASE + i, m * h)?, t(deadline + i * period)));
    }
    let w1 = push(repeat(W_BASE + 1, deadline)?, t(0));
    let w2 = push(repeat(W_BASE + 2, deadline)?, t(2 * deadline));

    Ok(PartitionStream {
        stream: QueryStream::new(queries)?,
        deadline: t(deadline),
        x_ids,
        y_ids,
        z_ids,
        w_ids: [w1, w2],
    })
}

pub(crate) mod time_string {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::time::Time;

    pub fn serialize<S: Serializer>(t: &Time, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Time, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
