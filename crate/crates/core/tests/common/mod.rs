#![allow(dead_code)]

use prefixsched::{Query, QueryStream, Rational, Schedule, SimConfig, SimResult, Time, Token};
use proptest::prelude::*;

/// Small streams over a tiny alphabet so that prompts share prefixes often.
pub fn small_stream(
    max_n: usize,
    alphabet: Token,
    max_len: usize,
    horizon: i64,
) -> impl Strategy<Value = QueryStream> {
    prop::collection::vec(
        (
            prop::collection::vec(1..=alphabet, 1..=max_len),
            0..=horizon,
            1..=2i128,
        ),
        1..=max_n,
    )
    .prop_map(|raw| {
        let queries = raw
            .into_iter()
            .enumerate()
            .map(|(i, (tokens, a, den))| {
                Query::new(
                    i as u64,
                    tokens,
                    Time::from_rational(Rational::new(a as i128, den)),
                )
            })
            .collect();
        QueryStream::new(queries).unwrap()
    })
}

pub fn permutations(items: &[u64]) -> Vec<Vec<u64>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Every order of the stream, simulated.
pub fn all_orders(stream: &QueryStream, cfg: &SimConfig) -> Vec<(Schedule, SimResult)> {
    let ids: Vec<u64> = stream.ids().collect();
    permutations(&ids)
        .into_iter()
        .map(|order| {
            let s = Schedule::new(order);
            let r = prefixsched::run_fixed(stream, &s, cfg).unwrap();
            (s, r)
        })
        .collect()
}
