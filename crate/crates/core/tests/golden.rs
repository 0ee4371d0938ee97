use prefixsched::gen::toy_stream;
use prefixsched::sched::CycleLen;
use prefixsched::{run_fixed, run_policy, PolicyKind, Schedule, SimConfig, Time};

fn ttfts(order: Vec<u64>) -> Vec<i64> {
    let r = run_fixed(
        &toy_stream(),
        &Schedule::new(order),
        &SimConfig::immediate(),
    )
    .unwrap();
    r.records
        .iter()
        .map(|x| x.ttft.floor_int() as i64)
        .collect()
}

#[test]
fn toy_orders() {
    assert_eq!(ttfts(vec![1, 2, 3, 4]), vec![10, 20, 30, 40]);
    assert_eq!(ttfts(vec![1, 3, 2, 4]), vec![10, 15, 25, 30]);
}

#[test]
fn toy_policies() {
    let cfg = SimConfig::immediate();
    let (fcfs, r) = run_policy(&toy_stream(), PolicyKind::Fcfs, &cfg, 0).unwrap();
    assert_eq!(fcfs.order, vec![1, 2, 3, 4]);
    assert_eq!(r.max_ttft, Time::from_int(40));
    for seed in 0..32 {
        let (_, lpm) = run_policy(&toy_stream(), PolicyKind::Lpm, &cfg, seed).unwrap();
        assert_eq!(lpm.max_ttft, Time::from_int(30));
        let k2 = PolicyKind::KLpm(CycleLen::finite(2).unwrap());
        let (order, _) = run_policy(&toy_stream(), k2, &cfg, seed).unwrap();
        assert_eq!(order.order[0], 1);
    }
}
