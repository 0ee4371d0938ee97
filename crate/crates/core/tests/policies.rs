mod common;

use common::{all_orders, small_stream};
use prefixsched::sched::CycleLen;
use prefixsched::{
    run_fixed, run_policy, CostModel, PolicyKind, Query, QueryStream, Rational, SimConfig, Time,
};
use proptest::prelude::*;

fn klpm(k: usize) -> PolicyKind {
    PolicyKind::KLpm(CycleLen::finite(k).unwrap())
}

fn policies() -> impl Strategy<Value = PolicyKind> {
    prop_oneof![
        Just(PolicyKind::Fcfs),
        Just(PolicyKind::Lpm),
        (1..=4usize).prop_map(klpm),
        Just(PolicyKind::KLpm(CycleLen::Infinite)),
    ]
}

fn configs() -> impl Strategy<Value = SimConfig> {
    (0..=1u8, 0..=6i64, 0..=2i128).prop_map(|(delayed, start, c)| {
        let cfg = if delayed == 1 {
            SimConfig::delayed(Time::from_int(start))
        } else {
            SimConfig::immediate()
        };
        cfg.with_cost(CostModel::new(Rational::new(c, 10)).unwrap())
    })
}

/// Position of each id in processing order.
fn positions(order: &[u64]) -> std::collections::HashMap<u64, usize> {
    order.iter().enumerate().map(|(i, &id)| (id, i)).collect()
}

proptest! {
    #[test]
    fn online_run_replays_exactly(s in small_stream(10, 3, 5, 12), kind in policies(), cfg in configs(), seed in any::<u64>()) {
        let (schedule, online) = run_policy(&s, kind, &cfg, seed).unwrap();
        prop_assert_eq!(run_fixed(&s, &schedule, &cfg).unwrap(), online);
    }

    #[test]
    fn completions_are_monotone_and_causal(s in small_stream(10, 3, 5, 12), kind in policies(), cfg in configs(), seed in any::<u64>()) {
        let (_, r) = run_policy(&s, kind, &cfg, seed).unwrap();
        for w in r.records.windows(2) {
            prop_assert!(w[0].completion <= w[1].start);
        }
        for rec in &r.records {
            prop_assert!(rec.start >= rec.arrival);
            prop_assert!(rec.start >= cfg.global_start());
            prop_assert!(rec.completion >= rec.start);
            prop_assert_eq!(rec.ttft, rec.completion - rec.arrival);
        }
        prop_assert_eq!(Some(r.max_ttft), r.records.iter().map(|x| x.ttft).max());
    }

    #[test]
    fn never_idle_while_work_is_pending(s in small_stream(10, 3, 5, 12), kind in policies(), cfg in configs(), seed in any::<u64>()) {
        let (_, r) = run_policy(&s, kind, &cfg, seed).unwrap();
        let mut ready = cfg.global_start();
        for (i, rec) in r.records.iter().enumerate() {
            let earliest = r.records[i..].iter().map(|x| x.arrival).min().unwrap();
            prop_assert_eq!(rec.start, ready.max(earliest));
            ready = rec.completion;
        }
    }

    #[test]
    fn one_cycle_is_fcfs(s in small_stream(10, 3, 5, 12), cfg in configs(), seed in any::<u64>()) {
        let a = run_policy(&s, klpm(1), &cfg, seed).unwrap();
        let b = run_policy(&s, PolicyKind::Fcfs, &cfg, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn infinite_cycle_is_lpm(s in small_stream(10, 3, 5, 12), cfg in configs(), seed in any::<u64>()) {
        let a = run_policy(&s, PolicyKind::KLpm(CycleLen::Infinite), &cfg, seed).unwrap();
        let b = run_policy(&s, PolicyKind::Lpm, &cfg, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fcfs_ignores_the_seed(s in small_stream(10, 3, 5, 12), cfg in configs(), a in any::<u64>(), b in any::<u64>()) {
        prop_assert_eq!(run_policy(&s, PolicyKind::Fcfs, &cfg, a).unwrap(), run_policy(&s, PolicyKind::Fcfs, &cfg, b).unwrap());
    }

    #[test]
    fn cycle_starts_take_the_oldest(s in small_stream(10, 3, 5, 12), k in 1..=4usize, cfg in configs(), seed in any::<u64>()) {
        let (_, r) = run_policy(&s, klpm(k), &cfg, seed).unwrap();
        for (i, rec) in r.records.iter().enumerate().step_by(k) {
            let oldest = r.records[i..]
                .iter()
                .filter(|x| x.arrival <= rec.start)
                .map(|x| (x.arrival, x.id))
                .min()
                .unwrap();
            prop_assert_eq!((rec.arrival, rec.id), oldest);
        }
    }

    #[test]
    fn klpm_starvation_bound(s in small_stream(10, 2, 4, 8), k in 1..=4usize, seed in any::<u64>()) {
        let (schedule, r) = run_policy(&s, klpm(k), &SimConfig::immediate(), seed).unwrap();
        let pos = positions(&schedule.order);
        for q in s.iter() {
            let first = r.records.iter().position(|x| x.start >= q.arrival).unwrap_or(r.records.len());
            let older = s
                .iter()
                .filter(|o| (o.arrival, o.id) < (q.arrival, q.id) && pos[&o.id] >= first)
                .count();
            prop_assert!(pos[&q.id] < first + k * (older + 1));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fcfs_is_optimal_without_reuse(lens in prop::collection::vec((1..=4usize, 0..=8i64), 1..=6)) {
        let queries = lens
            .iter()
            .enumerate()
            .map(|(i, &(len, a))| Query::new(i as u64, vec![100 + i as u32; len], Time::from_int(a)))
            .collect();
        let s = QueryStream::new(queries).unwrap();
        let cfg = SimConfig::immediate();
        let best = all_orders(&s, &cfg).into_iter().map(|(_, r)| r.max_ttft).min().unwrap();
        let (_, fcfs) = run_policy(&s, PolicyKind::Fcfs, &cfg, 0).unwrap();
        prop_assert_eq!(fcfs.max_ttft, best);
    }
}

#[test]
fn lpm_uses_randomness_on_ties() {
    let s = prefixsched::gen::toy_stream();
    let firsts: std::collections::BTreeSet<u64> = (0..64)
        .map(|seed| {
            run_policy(&s, PolicyKind::Lpm, &SimConfig::immediate(), seed)
                .unwrap()
                .0
                .order[0]
        })
        .collect();
    assert_eq!(firsts.into_iter().collect::<Vec<_>>(), vec![1, 2, 3, 4]);
}
