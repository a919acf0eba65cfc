mod common;

use caw_core::rng::keyed_rng;
use caw_core::walk_sampler::WalkSet;
use caw_core::{Execution, NodeId, SamplerConfig, TemporalStore, WalkSampler};
use common::random_stream;
use proptest::prelude::*;

fn check_causal(store: &TemporalStore, set: &WalkSet, m: usize) -> Result<(), TestCaseError> {
    for w in &set.walks {
        prop_assert_eq!(w.steps.len(), m + 1);
        prop_assert_eq!(w.steps[0].node, set.root);
        prop_assert_eq!(w.steps[0].t, set.t0);
        let real = w.truncated_at.unwrap_or(m + 1);
        for i in 1..real {
            let (prev, cur) = (w.steps[i - 1], w.steps[i]);
            prop_assert!(cur.t < prev.t);
            let linked = store.history_before(prev.node, prev.t).iter().any(|e| e.neighbor == cur.node && e.t == cur.t);
            prop_assert!(linked, "step {} of {:?} is not a link", i, w);
        }
        if let Some(k) = w.truncated_at {
            prop_assert!(store.history_before(w.steps[k - 1].node, w.steps[k - 1].t).is_empty());
            for s in &w.steps[k..] {
                prop_assert!(s.node.is_sentinel());
                prop_assert_eq!(s.t, w.steps[k - 1].t);
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn walks_are_causal_and_blind_to_the_future(
        seed in any::<u64>(),
        n_events in 1usize..120,
        m in 1usize..4,
        walks in 1usize..6,
        alpha in 0.01f64..3.0,
        cut in 0.0f64..1.0,
    ) {
        let mut rng = keyed_rng(seed, &[]);
        let events = random_stream(&mut rng, 8, n_events, 0);
        let t0 = events[0].t + cut * (events.last().unwrap().t - events[0].t) + 0.25;
        let past: Vec<_> = events.iter().filter(|e| e.t < t0).cloned().collect();
        let full = TemporalStore::from_events(alpha, &events).unwrap();
        let seen = TemporalStore::from_events(alpha, &past).unwrap();
        let cfg = SamplerConfig::new(walks, m, alpha, seed);
        let a = WalkSampler::new(&full, cfg.clone()).unwrap();
        let b = WalkSampler::new(&seen, cfg).unwrap();
        for w in 0..8 {
            let root = NodeId(w);
            let sa = a.sample(root, t0, &[w as u64]);
            check_causal(&full, &sa, m)?;
            prop_assert_eq!(&sa, &b.sample(root, t0, &[w as u64]));
            prop_assert_eq!(&sa, &a.sample(root, t0, &[w as u64]));
        }
    }

    #[test]
    fn tree_walks_are_causal(seed in any::<u64>(), k1 in 1usize..4, k2 in 1usize..4, k3 in 1usize..3) {
        let mut rng = keyed_rng(seed, &[]);
        let events = random_stream(&mut rng, 6, 60, 0);
        let store = TemporalStore::from_events(0.5, &events).unwrap();
        let cfg = SamplerConfig::new(k1 * k2 * k3, 3, 0.5, seed).with_branching(vec![k1, k2, k3]);
        let sampler = WalkSampler::new(&store, cfg).unwrap();
        let t0 = events.last().unwrap().t + 1.0;
        let set = sampler.sample(events.last().unwrap().u, t0, &[0]);
        prop_assert_eq!(set.walks.len(), k1 * k2 * k3);
        check_causal(&store, &set, 3)?;
    }
}

#[test]
fn batch_modes_agree() {
    let mut rng = keyed_rng(21, &[]);
    let events = random_stream(&mut rng, 30, 800, 0);
    let store = TemporalStore::from_events(0.2, &events).unwrap();
    let sampler = WalkSampler::new(&store, SamplerConfig::new(16, 3, 0.2, 4)).unwrap();
    let t_end = events.last().unwrap().t;
    let requests: Vec<(NodeId, f64)> = (0..200).map(|i| (NodeId(i % 30), t_end * (i as f64) / 200.0)).collect();
    let seq = sampler.sample_batch(&requests, 7, Execution::Sequential);
    let par = sampler.sample_batch(&requests, 7, Execution::Parallel);
    assert_eq!(seq, par);
    for (i, (w, t)) in requests.iter().enumerate() {
        assert_eq!(seq[i], sampler.sample(*w, *t, &[7, i as u64]));
    }
}
