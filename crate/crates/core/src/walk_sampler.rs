//! Backward-in-time walk extraction.
//!
//! A walk starts at `(w0, t0)` and repeatedly jumps over a link of the
//! current node that happened strictly before the current time. The link is
//! chosen with probability proportional to `exp(alpha * (t - t_p))` using the
//! acceptance loop over precomputed probabilities: iterate the history from
//! the latest entry backwards and stop at the first entry whose stored
//! probability beats a fresh uniform draw. The earliest entry of every node
//! has probability one, so the loop always terminates on a non-empty history.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::rng::keyed_rng;
use crate::temporal_graph::{AdjEntry, EventId, NodeId, TemporalStore};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("walks per endpoint must be at least 1")]
    NoWalks,
    #[error("walk length must be at least 1")]
    NoSteps,
    #[error("decay rate must be finite and non-negative, got {0}")]
    BadAlpha(f64),
    #[error("branching {branching:?} must have {length} factors with product {walks}")]
    BadBranching {
        branching: Vec<usize>,
        length: usize,
        walks: usize,
    },
    #[error("sampler decay {config} differs from the store decay {store}")]
    AlphaMismatch { config: f64, store: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Walks per endpoint (`M`).
    pub walks: usize,
    /// Steps per walk (`m`); a walk holds `m + 1` nodes.
    pub length: usize,
    /// Time decay in 1/seconds.
    pub alpha: f64,
    /// Per-level fan-out for tree-structured sampling.
    pub branching: Option<Vec<usize>>,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(walks: usize, length: usize, alpha: f64, seed: u64) -> Self {
        Self {
            walks,
            length,
            alpha,
            branching: None,
            seed,
        }
    }

    pub fn with_branching(mut self, branching: Vec<usize>) -> Self {
        self.branching = Some(branching);
        self
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.walks == 0 {
            return Err(SamplerError::NoWalks);
        }
        if self.length == 0 {
            return Err(SamplerError::NoSteps);
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(SamplerError::BadAlpha(self.alpha));
        }
        if let Some(b) = &self.branching {
            let product = b.iter().try_fold(1usize, |acc, &k| acc.checked_mul(k));
            if b.len() != self.length || product != Some(self.walks) || b.contains(&0) {
                return Err(SamplerError::BadBranching {
                    branching: b.clone(),
                    length: self.length,
                    walks: self.walks,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub node: NodeId,
    pub t: f64,
    /// Link traversed to reach this step; `None` for the root and padding.
    pub event: Option<EventId>,
}

impl Step {
    fn root(node: NodeId, t: f64) -> Self {
        Self {
            node,
            t,
            event: None,
        }
    }

    fn padding(t: f64) -> Self {
        Self {
            node: NodeId::SENTINEL,
            t,
            event: None,
        }
    }

    fn from_entry(e: &AdjEntry) -> Self {
        Self {
            node: e.neighbor,
            t: e.t,
            event: Some(e.event),
        }
    }
}

/// A walk of `m + 1` steps with strictly decreasing times up to the first
/// padded step. Padded steps repeat the last real time (zero time delta).
#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    pub steps: Vec<Step>,
    pub truncated_at: Option<usize>,
}

impl Walk {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.steps.iter().map(|s| s.node)
    }

    fn tail(&self) -> Step {
        *self.steps.last().expect("walks always hold a root step")
    }

    fn extend(&mut self, next: Option<&AdjEntry>) {
        let tail = self.tail();
        match next {
            Some(e) if !tail.node.is_sentinel() => self.steps.push(Step::from_entry(e)),
            _ => {
                if self.truncated_at.is_none() {
                    self.truncated_at = Some(self.steps.len());
                }
                self.steps.push(Step::padding(tail.t));
            }
        }
    }
}

/// Walks sampled from one root plus the number of neighbor draws spent.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSet {
    pub root: NodeId,
    pub t0: f64,
    pub walks: Vec<Walk>,
    pub sampler_calls: usize,
}

/// Draws one link of `w_p` strictly before `t_p` with probability
/// proportional to `exp(alpha (t - t_p))`. Returns `None` iff the history
/// before `t_p` is empty.
pub fn sample_neighbor<R: Rng + ?Sized>(
    store: &TemporalStore,
    w_p: NodeId,
    t_p: f64,
    rng: &mut R,
) -> Option<AdjEntry> {
    sample_neighbor_counted(store, w_p, t_p, rng).0
}

/// As [`sample_neighbor`], also reporting how many history entries the
/// acceptance loop examined.
pub fn sample_neighbor_counted<R: Rng + ?Sized>(
    store: &TemporalStore,
    w_p: NodeId,
    t_p: f64,
    rng: &mut R,
) -> (Option<AdjEntry>, usize) {
    let mut iterations = 0;
    for entry in store.neighbors_before(w_p, t_p) {
        iterations += 1;
        let a: f64 = rng.random();
        if a < entry.p {
            return (Some(*entry), iterations);
        }
    }
    // Only reachable on an empty history: the oldest entry has p = 1.
    (None, iterations)
}

/// Walk extraction bound to one store.
#[derive(Debug, Clone)]
pub struct WalkSampler<'a> {
    store: &'a TemporalStore,
    config: SamplerConfig,
}

impl<'a> WalkSampler<'a> {
    pub fn new(store: &'a TemporalStore, config: SamplerConfig) -> Result<Self, SamplerError> {
        config.validate()?;
        if config.alpha != store.alpha() {
            return Err(SamplerError::AlphaMismatch {
                config: config.alpha,
                store: store.alpha(),
            });
        }
        Ok(Self { store, config })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn store(&self) -> &'a TemporalStore {
        self.store
    }

    /// Samples with the configured scheme (tree-structured if branching is set).
    pub fn sample(&self, w0: NodeId, t0: f64, key: &[u64]) -> WalkSet {
        match &self.config.branching {
            Some(b) => self.sample_walks_tree(w0, t0, b, key),
            None => self.sample_walks(w0, t0, key),
        }
    }

    /// `M` independent walks; walk `i` draws from the stream `key ++ [i]`.
    pub fn sample_walks(&self, w0: NodeId, t0: f64, key: &[u64]) -> WalkSet {
        let mut calls = 0;
        let mut stream_key = key.to_vec();
        stream_key.push(0);
        let walks = (0..self.config.walks)
            .map(|i| {
                *stream_key.last_mut().unwrap() = i as u64;
                let mut rng = keyed_rng(self.config.seed, &stream_key);
                let mut walk = Walk {
                    steps: Vec::with_capacity(self.config.length + 1),
                    truncated_at: None,
                };
                walk.steps.push(Step::root(w0, t0));
                for _ in 0..self.config.length {
                    let tail = walk.tail();
                    let next = if tail.node.is_sentinel() {
                        None
                    } else {
                        calls += 1;
                        sample_neighbor(self.store, tail.node, tail.t, &mut rng)
                    };
                    walk.extend(next.as_ref());
                }
                walk
            })
            .collect();
        WalkSet {
            root: w0,
            t0,
            walks,
            sampler_calls: calls,
        }
    }

    /// Tree-structured extraction: every node at depth `i - 1` draws
    /// `branching[i - 1]` children; the `M` leaves are read off as
    /// root-to-leaf walks. A dead end pads its whole subtree.
    pub fn sample_walks_tree(&self, w0: NodeId, t0: f64, branching: &[usize], key: &[u64]) -> WalkSet {
        let mut calls = 0;
        let mut frontier = vec![Walk {
            steps: vec![Step::root(w0, t0)],
            truncated_at: None,
        }];
        let mut stream_key = key.to_vec();
        stream_key.extend([u64::MAX, 0, 0]);
        let n = stream_key.len();
        for (level, &fanout) in branching.iter().enumerate() {
            let mut next = Vec::with_capacity(frontier.len() * fanout);
            for (parent_idx, parent) in frontier.iter().enumerate() {
                stream_key[n - 2] = level as u64;
                stream_key[n - 1] = parent_idx as u64;
                let mut rng = keyed_rng(self.config.seed, &stream_key);
                let tail = parent.tail();
                for _ in 0..fanout {
                    let drawn = if tail.node.is_sentinel() {
                        None
                    } else {
                        calls += 1;
                        sample_neighbor(self.store, tail.node, tail.t, &mut rng)
                    };
                    let mut child = parent.clone();
                    child.extend(drawn.as_ref());
                    next.push(child);
                }
            }
            frontier = next;
        }
        WalkSet {
            root: w0,
            t0,
            walks: frontier,
            sampler_calls: calls,
        }
    }

    /// Samples one walk set per `(node, time)` request; request `i` uses the
    /// stream key `[base, i]`.
    pub fn sample_batch(&self, requests: &[(NodeId, f64)], base: u64, exec: Execution) -> Vec<WalkSet> {
        exec.map_range(requests.len(), |i| {
            let (w, t) = requests[i];
            self.sample(w, t, &[base, i as u64])
        })
    }
}

/// Neighbor draws needed by tree sampling: `sum_i k_1 * ... * k_i`.
pub fn tree_call_count(branching: &[usize]) -> usize {
    branching
        .iter()
        .scan(1usize, |acc, &k| {
            *acc *= k;
            Some(*acc)
        })
        .sum()
}

/// Exact (normalization-based) walk distribution, used as an oracle.
pub mod exact {
    use super::*;

    /// Normalized `exp(alpha (t - t_p))` weights over the history before `t_p`,
    /// in reverse-chronological order.
    pub fn neighbor_distribution(store: &TemporalStore, w_p: NodeId, t_p: f64) -> Vec<(AdjEntry, f64)> {
        let alpha = store.alpha();
        let entries: Vec<AdjEntry> = store.neighbors_before(w_p, t_p).copied().collect();
        let weights: Vec<f64> = entries.iter().map(|e| (alpha * (e.t - t_p)).exp()).collect();
        let total: f64 = weights.iter().sum();
        entries.into_iter().zip(weights).map(|(e, w)| (e, w / total)).collect()
    }

    /// Every backward walk of `m` steps from `(w0, t0)` with its probability.
    pub fn enumerate_walks(store: &TemporalStore, w0: NodeId, t0: f64, m: usize) -> Vec<(Walk, f64)> {
        let mut out = vec![(
            Walk {
                steps: vec![Step::root(w0, t0)],
                truncated_at: None,
            },
            1.0,
        )];
        for _ in 0..m {
            let mut next = Vec::new();
            for (walk, prob) in out {
                let tail = walk.tail();
                let dist = if tail.node.is_sentinel() {
                    Vec::new()
                } else {
                    neighbor_distribution(store, tail.node, tail.t)
                };
                if dist.is_empty() {
                    let mut w = walk.clone();
                    w.extend(None);
                    next.push((w, prob));
                } else {
                    for (e, p) in dist {
                        let mut w = walk.clone();
                        w.extend(Some(&e));
                        next.push((w, prob * p));
                    }
                }
            }
            out = next;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::keyed_rng;
    use crate::temporal_graph::Event;

    fn store(alpha: f64, events: &[(u32, u32, f64)]) -> TemporalStore {
        let evs: Vec<Event> = events
            .iter()
            .map(|&(u, v, t)| Event::new(NodeId(u), NodeId(v), t))
            .collect();
        TemporalStore::from_events(alpha, &evs).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::new(0, 2, 0.0, 0).validate().is_err());
        assert!(SamplerConfig::new(4, 0, 0.0, 0).validate().is_err());
        assert!(SamplerConfig::new(4, 2, -0.1, 0).validate().is_err());
        assert!(SamplerConfig::new(4, 2, 0.1, 0).with_branching(vec![2, 3]).validate().is_err());
        assert!(SamplerConfig::new(6, 2, 0.1, 0).with_branching(vec![2, 3]).validate().is_ok());
        let s = store(0.5, &[(0, 1, 1.0)]);
        assert!(WalkSampler::new(&s, SamplerConfig::new(1, 1, 0.4, 0)).is_err());
    }

    #[test]
    fn empty_history_gives_none() {
        let s = store(0.5, &[(0, 1, 1.0)]);
        let mut rng = keyed_rng(0, &[]);
        assert!(sample_neighbor(&s, NodeId(0), 1.0, &mut rng).is_none());
        assert!(sample_neighbor(&s, NodeId(7), 5.0, &mut rng).is_none());
    }

    #[test]
    fn two_event_history_frequencies() {
        let s = store(std::f64::consts::LN_2, &[(0, 1, 1.0), (0, 2, 2.0)]);
        let mut rng = keyed_rng(3, &[]);
        let n = 200_000;
        let mut recent = 0;
        for _ in 0..n {
            if sample_neighbor(&s, NodeId(0), 3.0, &mut rng).unwrap().t == 2.0 {
                recent += 1;
            }
        }
        assert!((recent as f64 / n as f64 - 2.0 / 3.0).abs() < 0.005);
    }

    #[test]
    fn isolated_root_is_fully_padded() {
        let s = store(0.1, &[(0, 1, 1.0)]);
        let sampler = WalkSampler::new(&s, SamplerConfig::new(5, 3, 0.1, 0)).unwrap();
        let set = sampler.sample_walks(NodeId(9), 4.0, &[0]);
        assert_eq!(set.walks.len(), 5);
        for w in &set.walks {
            assert_eq!(w.truncated_at, Some(1));
            assert!(w.steps[1..].iter().all(|s| s.node.is_sentinel() && s.t == 4.0));
        }
        assert_eq!(set.sampler_calls, 5);
    }

    #[test]
    fn forced_single_candidate_walks() {
        let s = store(0.3, &[(0, 1, 1.0)]);
        let sampler = WalkSampler::new(&s, SamplerConfig::new(8, 1, 0.3, 1)).unwrap();
        for w in sampler.sample_walks(NodeId(1), 2.0, &[0]).walks {
            assert_eq!(w.nodes().collect::<Vec<_>>(), vec![NodeId(1), NodeId(0)]);
            assert_eq!(w.steps[1].t, 1.0);
        }

        // a=0, b=1, c=2: a-b at 1, b-c at 2, query (c, 3), m = 2.
        let s = store(0.3, &[(0, 1, 1.0), (1, 2, 2.0)]);
        let sampler = WalkSampler::new(&s, SamplerConfig::new(8, 2, 0.3, 1)).unwrap();
        for w in sampler.sample_walks(NodeId(2), 3.0, &[0]).walks {
            let got: Vec<(NodeId, f64)> = w.steps.iter().map(|s| (s.node, s.t)).collect();
            assert_eq!(got, vec![(NodeId(2), 3.0), (NodeId(1), 2.0), (NodeId(0), 1.0)]);
            assert_eq!(w.truncated_at, None);
        }
    }

    #[test]
    fn tree_counts_and_forced_walks() {
        assert_eq!(tree_call_count(&[4, 4, 4]), 84);
        assert_eq!(tree_call_count(&[8, 1, 1]), 24);
        let s = store(0.0, &[(0, 1, 1.0), (1, 2, 2.0)]);
        let cfg = SamplerConfig::new(4, 2, 0.0, 5).with_branching(vec![2, 2]);
        let sampler = WalkSampler::new(&s, cfg).unwrap();
        let set = sampler.sample(NodeId(2), 3.0, &[0]);
        assert_eq!(set.walks.len(), 4);
        assert_eq!(set.sampler_calls, 6);
        assert!(set.walks.iter().all(|w| *w == set.walks[0]));
    }

    #[test]
    fn dead_subtree_pads_all_leaves() {
        let s = store(0.0, &[(0, 1, 1.0)]);
        let cfg = SamplerConfig::new(6, 2, 0.0, 5).with_branching(vec![3, 2]);
        let sampler = WalkSampler::new(&s, cfg).unwrap();
        let set = sampler.sample(NodeId(1), 2.0, &[0]);
        // Level 1 reaches node 0, which has nothing before t=1.
        assert_eq!(set.sampler_calls, 3 + 6);
        assert!(set.walks.iter().all(|w| w.truncated_at == Some(2)));
    }

    #[test]
    fn enumeration_sums_to_one() {
        let s = store(0.4, &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 2.5), (2, 3, 3.0)]);
        let all = exact::enumerate_walks(&s, NodeId(2), 4.0, 3);
        let total: f64 = all.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_batches_are_reproducible() {
        let s = store(0.2, &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 2.5), (2, 3, 3.0), (0, 3, 3.5)]);
        let sampler = WalkSampler::new(&s, SamplerConfig::new(16, 3, 0.2, 11)).unwrap();
        let reqs = vec![(NodeId(0), 4.0), (NodeId(3), 4.0), (NodeId(2), 3.2)];
        let a = sampler.sample_batch(&reqs, 7, Execution::Sequential);
        let b = sampler.sample_batch(&reqs, 7, Execution::Parallel);
        assert_eq!(a, b);
    }
}
