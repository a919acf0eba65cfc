//! Append-only temporal adjacency with online acceptance probabilities.
//!
//! Every recorded link `({u, v}, t)` is appended to the histories of both
//! endpoints. Each history entry carries the probability
//!
//! ```text
//! p_{w,t} = exp(alpha * t) / sum_{t' <= t} exp(alpha * t')
//! ```
//!
//! taken over the entries of `w` recorded so far. The iterative sampler in
//! [`crate::walk_sampler`] walks a history backwards and accepts each entry
//! with this probability, which realizes exponential time-decay sampling
//! without ever normalizing over the whole history.
//!
//! The normalizer is kept relative to the latest timestamp of the node so
//! that `alpha * t` never overflows, even for epoch-scale timestamps.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense node identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    /// Padding marker for walks that hit a node without earlier history.
    pub const SENTINEL: NodeId = NodeId(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_sentinel(self) -> bool {
        self == Self::SENTINEL
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_sentinel() {
            f.write_str("_")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Index of an event in the order it was recorded.
pub type EventId = u32;

/// One interaction `({u, v}, t)` with optional link attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub u: NodeId,
    pub v: NodeId,
    pub t: f64,
    pub attrs: Vec<f64>,
}

impl Event {
    pub fn new(u: NodeId, v: NodeId, t: f64) -> Self {
        Self {
            u,
            v,
            t,
            attrs: Vec::new(),
        }
    }

    pub fn with_attrs(mut self, attrs: Vec<f64>) -> Self {
        self.attrs = attrs;
        self
    }

    pub fn touches(&self, w: NodeId) -> bool {
        self.u == w || self.v == w
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("event {index} at t={t} precedes the last recorded time {last}")]
    OutOfOrder { index: usize, t: f64, last: f64 },
    #[error("event {index} is a self-loop on node {node}")]
    SelfLoop { index: usize, node: NodeId },
    #[error("event {index} has {got} attributes, stream dimension is {expected}")]
    AttrDim {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("event {index} uses the reserved sentinel node id")]
    ReservedNode { index: usize },
    #[error("event {index} has a non-finite or negative timestamp {t}")]
    BadTime { index: usize, t: f64 },
    #[error("decay rate must be finite and non-negative, got {0}")]
    BadAlpha(f64),
}

/// A history entry seen from one endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjEntry {
    pub neighbor: NodeId,
    pub t: f64,
    /// Acceptance probability written at insertion; never updated.
    pub p: f64,
    pub event: EventId,
}

#[derive(Debug, Clone, Default)]
struct NodeHistory {
    entries: Vec<AdjEntry>,
    t_last: f64,
    /// `sum_{t'} exp(alpha * (t' - t_last))`.
    scaled_norm: f64,
}

impl NodeHistory {
    fn push(&mut self, alpha: f64, neighbor: NodeId, t: f64, event: EventId) -> f64 {
        if self.entries.is_empty() {
            self.scaled_norm = 1.0;
        } else {
            self.scaled_norm = self.scaled_norm * (alpha * (self.t_last - t)).exp() + 1.0;
        }
        self.t_last = t;
        let p = 1.0 / self.scaled_norm;
        self.entries.push(AdjEntry {
            neighbor,
            t,
            p,
            event,
        });
        p
    }
}

/// Summary statistics of a recorded stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamStats {
    pub n_nodes: usize,
    pub n_events: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// Link-stream intensity `2|E| / (|V| (t_max - t_min))`; absent when the
    /// stream spans zero time.
    pub tau: Option<f64>,
}

/// Link-stream intensity `2|E| / (|V| T)`.
pub fn stream_intensity(n_nodes: usize, n_events: usize, span: f64) -> Option<f64> {
    if span > 0.0 && n_nodes > 0 {
        Some(2.0 * n_events as f64 / (n_nodes as f64 * span))
    } else {
        None
    }
}

/// Per-node, time-sorted link histories for one decay rate.
#[derive(Debug, Clone)]
pub struct TemporalStore {
    alpha: f64,
    attr_dim: Option<usize>,
    nodes: Vec<NodeHistory>,
    attrs: Vec<f64>,
    n_events: usize,
    n_active: usize,
    t_first: f64,
    t_last: f64,
}

impl TemporalStore {
    pub fn new(alpha: f64) -> Result<Self, GraphError> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(GraphError::BadAlpha(alpha));
        }
        Ok(Self {
            alpha,
            attr_dim: None,
            nodes: Vec::new(),
            attrs: Vec::new(),
            n_events: 0,
            n_active: 0,
            t_first: 0.0,
            t_last: f64::NEG_INFINITY,
        })
    }

    /// Builds a store from an already chronological event sequence.
    pub fn from_events<'a, I>(alpha: f64, events: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = &'a Event>,
    {
        let mut store = Self::new(alpha)?;
        for e in events {
            store.record(e)?;
        }
        Ok(store)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn attr_dim(&self) -> usize {
        self.attr_dim.unwrap_or(0)
    }

    pub fn n_events(&self) -> usize {
        self.n_events
    }

    /// Size of the dense id space (one past the largest id seen).
    pub fn id_space(&self) -> usize {
        self.nodes.len()
    }

    pub fn last_time(&self) -> Option<f64> {
        (self.n_events > 0).then_some(self.t_last)
    }

    /// Appends an event to both endpoint histories and returns the pair of
    /// acceptance probabilities `(p_u, p_v)` written for it.
    pub fn record(&mut self, event: &Event) -> Result<(f64, f64), GraphError> {
        let index = self.n_events;
        if event.u.is_sentinel() || event.v.is_sentinel() {
            return Err(GraphError::ReservedNode { index });
        }
        if event.u == event.v {
            return Err(GraphError::SelfLoop {
                index,
                node: event.u,
            });
        }
        if !event.t.is_finite() || event.t < 0.0 {
            return Err(GraphError::BadTime { index, t: event.t });
        }
        if self.n_events > 0 && event.t < self.t_last {
            return Err(GraphError::OutOfOrder {
                index,
                t: event.t,
                last: self.t_last,
            });
        }
        match self.attr_dim {
            Some(dim) if dim != event.attrs.len() => {
                return Err(GraphError::AttrDim {
                    index,
                    expected: dim,
                    got: event.attrs.len(),
                })
            }
            Some(_) => {}
            None => self.attr_dim = Some(event.attrs.len()),
        }

        let needed = event.u.index().max(event.v.index()) + 1;
        if self.nodes.len() < needed {
            self.nodes.resize_with(needed, NodeHistory::default);
        }
        if self.n_events == 0 {
            self.t_first = event.t;
        }
        let id = index as EventId;
        let mut probs = [0.0; 2];
        for (slot, (w, other)) in [(event.u, event.v), (event.v, event.u)].into_iter().enumerate() {
            let history = &mut self.nodes[w.index()];
            if history.entries.is_empty() {
                self.n_active += 1;
            }
            probs[slot] = history.push(self.alpha, other, event.t, id);
        }
        self.attrs.extend_from_slice(&event.attrs);
        self.n_events += 1;
        self.t_last = event.t;
        Ok((probs[0], probs[1]))
    }

    /// Full history of `w`, oldest first. Empty for unknown nodes.
    pub fn history(&self, w: NodeId) -> &[AdjEntry] {
        self.nodes
            .get(w.index())
            .map(|h| h.entries.as_slice())
            .unwrap_or(&[])
    }

    /// Entries of `w` strictly before `t`, oldest first.
    pub fn history_before(&self, w: NodeId, t: f64) -> &[AdjEntry] {
        let all = self.history(w);
        let end = all.partition_point(|e| e.t < t);
        &all[..end]
    }

    /// Entries of `w` strictly before `t`, latest first. Tied timestamps are
    /// yielded in reverse insertion order.
    pub fn neighbors_before(&self, w: NodeId, t: f64) -> impl Iterator<Item = &AdjEntry> + '_ {
        self.history_before(w, t).iter().rev()
    }

    /// Normalizer of `w` relative to its latest timestamp, as `(t_last, sum)`.
    pub fn scaled_normalizer(&self, w: NodeId) -> Option<(f64, f64)> {
        self.nodes
            .get(w.index())
            .filter(|h| !h.entries.is_empty())
            .map(|h| (h.t_last, h.scaled_norm))
    }

    pub fn event_attrs(&self, event: EventId) -> &[f64] {
        let dim = self.attr_dim();
        let start = event as usize * dim;
        &self.attrs[start..start + dim]
    }

    pub fn stats(&self) -> Option<StreamStats> {
        if self.n_events == 0 {
            return None;
        }
        Some(StreamStats {
            n_nodes: self.n_active,
            n_events: self.n_events,
            t_min: self.t_first,
            t_max: self.t_last,
            tau: stream_intensity(self.n_active, self.n_events, self.t_last - self.t_first),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(u: u32, v: u32, t: f64) -> Event {
        Event::new(NodeId(u), NodeId(v), t)
    }

    /// Normalization over the full prefix, computed without any shifting.
    fn brute_force_p(times: &[f64], idx: usize, alpha: f64) -> f64 {
        let t = times[idx];
        let norm: f64 = times[..=idx].iter().map(|&s| (alpha * (s - t)).exp()).sum();
        1.0 / norm
    }

    #[test]
    fn first_entry_has_unit_probability() {
        let mut s = TemporalStore::new(0.7).unwrap();
        let (pu, pv) = s.record(&ev(0, 1, 123.0)).unwrap();
        assert_eq!(pu, 1.0);
        assert_eq!(pv, 1.0);
    }

    #[test]
    fn two_events_with_log2_decay() {
        let mut s = TemporalStore::new(std::f64::consts::LN_2).unwrap();
        s.record(&ev(0, 1, 1.0)).unwrap();
        let (p0, _) = s.record(&ev(0, 2, 2.0)).unwrap();
        assert!((p0 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.history(NodeId(2))[0].p, 1.0);
    }

    #[test]
    fn zero_decay_is_uniform() {
        let mut s = TemporalStore::new(0.0).unwrap();
        for k in 0..5u32 {
            let (p, _) = s.record(&ev(0, k + 1, k as f64)).unwrap();
            assert!((p - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn huge_timestamps_do_not_overflow() {
        let mut s = TemporalStore::new(1.0).unwrap();
        s.record(&ev(0, 1, 1.0e6)).unwrap();
        let (p, _) = s.record(&ev(0, 2, 1.0e6 + 1.0)).unwrap();
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((p - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_events() {
        let mut s = TemporalStore::new(0.1).unwrap();
        s.record(&ev(0, 1, 5.0)).unwrap();
        assert_eq!(
            s.record(&ev(1, 2, 4.0)),
            Err(GraphError::OutOfOrder {
                index: 1,
                t: 4.0,
                last: 5.0
            })
        );
        assert!(matches!(s.record(&ev(3, 3, 6.0)), Err(GraphError::SelfLoop { index: 1, .. })));
        assert!(matches!(
            s.record(&ev(1, 2, 6.0).with_attrs(vec![1.0])),
            Err(GraphError::AttrDim { expected: 0, got: 1, .. })
        ));
        assert!(TemporalStore::new(-1.0).is_err());
        // Rejected events leave the store untouched.
        assert_eq!(s.n_events(), 1);
        assert_eq!(s.history(NodeId(1)).len(), 1);
    }

    #[test]
    fn neighbors_before_is_strict_and_reversed() {
        let mut s = TemporalStore::new(0.0).unwrap();
        s.record(&ev(0, 1, 1.0)).unwrap();
        s.record(&ev(0, 2, 2.0)).unwrap();
        s.record(&ev(0, 3, 3.0)).unwrap();
        let ts: Vec<f64> = s.neighbors_before(NodeId(0), 3.0).map(|e| e.t).collect();
        assert_eq!(ts, vec![2.0, 1.0]);
        assert_eq!(s.neighbors_before(NodeId(0), 0.5).count(), 0);
        assert_eq!(s.neighbors_before(NodeId(42), 10.0).count(), 0);
    }

    #[test]
    fn tied_timestamps_yield_reverse_insertion_order() {
        let mut s = TemporalStore::new(0.5).unwrap();
        s.record(&ev(0, 1, 2.0)).unwrap();
        s.record(&ev(0, 2, 2.0)).unwrap();
        let order: Vec<NodeId> = s.neighbors_before(NodeId(0), 3.0).map(|e| e.neighbor).collect();
        assert_eq!(order, vec![NodeId(2), NodeId(1)]);
        // The second tied entry sees both entries in its normalizer.
        assert!((s.history(NodeId(0))[1].p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn stats_intensity() {
        let mut s = TemporalStore::new(0.0).unwrap();
        s.record(&ev(0, 1, 0.0)).unwrap();
        assert_eq!(s.stats().unwrap().tau, None);
        s.record(&ev(0, 1, 100.0)).unwrap();
        let st = s.stats().unwrap();
        assert_eq!(st.n_nodes, 2);
        assert!((st.tau.unwrap() - 0.02).abs() < 1e-15);
        // UCI forum: 1,899 nodes and 59,835 links over ~20.3 days.
        let tau = stream_intensity(1899, 59_835, 1.7554e6).unwrap();
        assert!((tau / 3.59e-5 - 1.0).abs() < 5e-3);
    }

    #[test]
    fn stored_probabilities_match_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for &alpha in &[0.0, 0.05, 1.0] {
            let mut s = TemporalStore::new(alpha).unwrap();
            let mut t = 0.0;
            for _ in 0..500 {
                t += rng.random::<f64>() * 3.0;
                let u = rng.random_range(0..12u32);
                let v = (u + rng.random_range(1..12u32)) % 12;
                s.record(&ev(u, v, t)).unwrap();
            }
            for w in 0..12 {
                let hist = s.history(NodeId(w));
                let times: Vec<f64> = hist.iter().map(|e| e.t).collect();
                for (i, e) in hist.iter().enumerate() {
                    let want = brute_force_p(&times, i, alpha);
                    assert!(((e.p - want) / want).abs() < 1e-9);
                }
            }
        }
    }
}
