//! Set-based relative node identities.
//!
//! For a candidate link `{u, v}` with walk sets `S_u` and `S_v`, a node `w`
//! is described by how often it occupies each walk position in either set:
//! `g(w, S)[i] = |{W in S : W[i] = w}|`. The unordered pair
//! `{g(w, S_u), g(w, S_v)}` replaces the node id, so the result depends only
//! on the structure of the sampled walks and never on the labels themselves.
//!
//! The per-walk anonymous-walk identity (first-occurrence rank) and the
//! shape coordinates `(d_u, d_v)` used for inspection live here too.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::temporal_graph::{EventId, NodeId};
use crate::walk_sampler::Walk;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnonymizeError {
    #[error("walk {index} has {got} steps, expected {expected}")]
    RaggedWalk {
        index: usize,
        expected: usize,
        got: usize,
    },
}

/// Occurrence count of a node per walk position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PositionCounts(pub Vec<u32>);

impl PositionCounts {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// First position with a non-zero count.
    pub fn first_position(&self) -> Option<usize> {
        self.0.iter().position(|&c| c > 0)
    }
}

/// Unordered pair `{g(w, S_u), g(w, S_v)}`, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelativeIdentity {
    pair: [PositionCounts; 2],
}

impl RelativeIdentity {
    pub fn new(a: PositionCounts, b: PositionCounts) -> Self {
        let pair = if a <= b { [a, b] } else { [b, a] };
        Self { pair }
    }

    pub fn members(&self) -> &[PositionCounts; 2] {
        &self.pair
    }
}

impl fmt::Display for RelativeIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{:?},{:?}}}", self.pair[0].0, self.pair[1].0)
    }
}

/// `g(w, S)` for every node in `S`. The sentinel is never counted.
pub fn position_counts(walks: &[Walk], len: usize) -> Result<HashMap<NodeId, PositionCounts>, AnonymizeError> {
    let mut counts: HashMap<NodeId, PositionCounts> = HashMap::new();
    for (index, walk) in walks.iter().enumerate() {
        if walk.len() != len {
            return Err(AnonymizeError::RaggedWalk {
                index,
                expected: len,
                got: walk.len(),
            });
        }
        for (i, node) in walk.nodes().enumerate() {
            if node.is_sentinel() {
                continue;
            }
            counts.entry(node).or_insert_with(|| PositionCounts::zeros(len)).0[i] += 1;
        }
    }
    Ok(counts)
}

/// Position counts of both walk sets of a candidate link.
#[derive(Debug, Clone)]
pub struct IcawTable {
    len: usize,
    u: HashMap<NodeId, PositionCounts>,
    v: HashMap<NodeId, PositionCounts>,
}

impl IcawTable {
    pub fn new(s_u: &[Walk], s_v: &[Walk]) -> Result<Self, AnonymizeError> {
        let len = s_u.first().or(s_v.first()).map_or(1, Walk::len);
        Ok(Self {
            len,
            u: position_counts(s_u, len)?,
            v: position_counts(s_v, len)?,
        })
    }

    pub fn walk_len(&self) -> usize {
        self.len
    }

    pub fn counts_u(&self, w: NodeId) -> PositionCounts {
        self.u.get(&w).cloned().unwrap_or_else(|| PositionCounts::zeros(self.len))
    }

    pub fn counts_v(&self, w: NodeId) -> PositionCounts {
        self.v.get(&w).cloned().unwrap_or_else(|| PositionCounts::zeros(self.len))
    }

    pub fn identity(&self, w: NodeId) -> RelativeIdentity {
        RelativeIdentity::new(self.counts_u(w), self.counts_v(w))
    }

    /// `(d_u, d_v)`: first position at which `w` shows up in each set.
    pub fn coordinate(&self, w: NodeId) -> (Option<usize>, Option<usize>) {
        let first = |m: &HashMap<NodeId, PositionCounts>| m.get(&w).and_then(PositionCounts::first_position);
        (first(&self.u), first(&self.v))
    }
}

/// `I_CAW(w; {S_u, S_v})`.
pub fn compute_icaw(w: NodeId, s_u: &[Walk], s_v: &[Walk]) -> Result<RelativeIdentity, AnonymizeError> {
    Ok(IcawTable::new(s_u, s_v)?.identity(w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnonymizedStep {
    pub identity: RelativeIdentity,
    pub t: f64,
    pub event: Option<EventId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnonymizedWalk {
    pub steps: Vec<AnonymizedStep>,
}

impl AnonymizedWalk {
    pub fn from_walk(walk: &Walk, table: &IcawTable) -> Self {
        let steps = walk
            .steps
            .iter()
            .map(|s| AnonymizedStep {
                identity: table.identity(s.node),
                t: s.t,
                event: s.event,
            })
            .collect();
        Self { steps }
    }
}

/// Anonymized walks of a candidate link, grouped by root side.
#[derive(Debug, Clone, PartialEq)]
pub struct AnonymizedPair {
    pub side_u: Vec<AnonymizedWalk>,
    pub side_v: Vec<AnonymizedWalk>,
}

impl AnonymizedPair {
    pub fn walks(&self) -> impl Iterator<Item = &AnonymizedWalk> {
        self.side_u.iter().chain(self.side_v.iter())
    }
}

/// Replaces every node of `S_u` and `S_v` by its relative identity.
pub fn anonymize_walks(s_u: &[Walk], s_v: &[Walk]) -> Result<AnonymizedPair, AnonymizeError> {
    let table = IcawTable::new(s_u, s_v)?;
    Ok(AnonymizedPair {
        side_u: s_u.iter().map(|w| AnonymizedWalk::from_walk(w, &table)).collect(),
        side_v: s_v.iter().map(|w| AnonymizedWalk::from_walk(w, &table)).collect(),
    })
}

/// Anonymous-walk identity: each position gets the number of distinct
/// nodes seen up to the first occurrence of its node.
pub fn anonymize_aw(nodes: &[NodeId]) -> Vec<u32> {
    let mut first_rank: HashMap<NodeId, u32> = HashMap::new();
    nodes
        .iter()
        .map(|n| {
            let next = first_rank.len() as u32 + 1;
            *first_rank.entry(*n).or_insert(next)
        })
        .collect()
}

/// Per-step `(d_u, d_v)`; `None` stands for an infinite distance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShapeCoordinate(pub Vec<(Option<usize>, Option<usize>)>);

impl fmt::Display for ShapeCoordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = |x: Option<usize>| x.map_or_else(|| "inf".to_string(), |v| v.to_string());
        for (i, &(a, b)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("->")?;
            }
            write!(f, "({},{})", d(a), d(b))?;
        }
        Ok(())
    }
}

pub fn walk_shape(walk: &Walk, table: &IcawTable) -> ShapeCoordinate {
    ShapeCoordinate(walk.nodes().map(|w| table.coordinate(w)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk_sampler::Step;

    fn walk(ids: &[u32]) -> Walk {
        let steps = ids
            .iter()
            .enumerate()
            .map(|(i, &n)| Step {
                node: NodeId(n),
                t: 10.0 - i as f64,
                event: None,
            })
            .collect();
        Walk {
            steps,
            truncated_at: None,
        }
    }

    fn pc(v: &[u32]) -> PositionCounts {
        PositionCounts(v.to_vec())
    }

    const U: u32 = 0;
    const A: u32 = 1;
    const B: u32 = 2;
    const C: u32 = 3;

    #[test]
    fn counts_per_position() {
        let s = vec![walk(&[U, B, A]), walk(&[U, B, C])];
        let g = position_counts(&s, 3).unwrap();
        assert_eq!(g[&NodeId(U)], pc(&[2, 0, 0]));
        assert_eq!(g[&NodeId(B)], pc(&[0, 2, 0]));
        assert_eq!(g[&NodeId(A)], pc(&[0, 0, 1]));
        assert_eq!(g[&NodeId(C)], pc(&[0, 0, 1]));
        let table = IcawTable::new(&s, &[]).unwrap();
        assert_eq!(table.counts_u(NodeId(99)), pc(&[0, 0, 0]));
    }

    #[test]
    fn repeated_walks_accumulate() {
        let s = vec![walk(&[U, A]); 5];
        assert_eq!(position_counts(&s, 2).unwrap()[&NodeId(A)], pc(&[0, 5]));
    }

    #[test]
    fn ragged_walks_rejected() {
        let s = vec![walk(&[U, A]), walk(&[U, A, B])];
        assert_eq!(
            position_counts(&s, 2),
            Err(AnonymizeError::RaggedWalk {
                index: 1,
                expected: 2,
                got: 3
            })
        );
    }

    #[test]
    fn sentinel_is_never_counted() {
        let mut w = walk(&[U, A]);
        w.steps[1].node = NodeId::SENTINEL;
        let g = position_counts(&[w.clone()], 2).unwrap();
        assert!(!g.contains_key(&NodeId::SENTINEL));
        let pair = anonymize_walks(&[w], &[]).unwrap();
        let id = &pair.side_u[0].steps[1].identity;
        assert!(id.members().iter().all(PositionCounts::is_zero));
    }

    #[test]
    fn identity_is_unordered() {
        let a = RelativeIdentity::new(pc(&[2, 0]), pc(&[0, 1]));
        let b = RelativeIdentity::new(pc(&[0, 1]), pc(&[2, 0]));
        assert_eq!(a, b);
        let s_u = vec![walk(&[U, A])];
        let s_v = vec![walk(&[B, A])];
        assert_eq!(
            compute_icaw(NodeId(A), &s_u, &s_v).unwrap(),
            compute_icaw(NodeId(A), &s_v, &s_u).unwrap()
        );
        let same = compute_icaw(NodeId(U), &s_u, &s_u).unwrap();
        assert_eq!(same.members()[0], same.members()[1]);
        assert_eq!(
            compute_icaw(NodeId(77), &s_u, &s_v).unwrap(),
            RelativeIdentity::new(pc(&[0, 0]), pc(&[0, 0]))
        );
    }

    #[test]
    fn single_walk_identities() {
        // x = 5; S_v is a fully padded single walk from v = 6.
        let s_u = vec![walk(&[U, 5])];
        let mut pad = walk(&[6, 0]);
        pad.steps[1].node = NodeId::SENTINEL;
        let pair = anonymize_walks(&s_u, &[pad]).unwrap();
        let ids: Vec<_> = pair.side_u[0].steps.iter().map(|s| s.identity.clone()).collect();
        assert_eq!(ids[0], RelativeIdentity::new(pc(&[1, 0]), pc(&[0, 0])));
        assert_eq!(ids[1], RelativeIdentity::new(pc(&[0, 1]), pc(&[0, 0])));
    }

    #[test]
    fn disjoint_sets_have_one_zero_member() {
        let s_u = vec![walk(&[U, A, B]), walk(&[U, B, A])];
        let s_v = vec![walk(&[10, 11, 12]), walk(&[10, 12, 13])];
        let pair = anonymize_walks(&s_u, &s_v).unwrap();
        for w in pair.walks() {
            for s in &w.steps {
                assert!(s.identity.members()[0].is_zero());
                assert!(!s.identity.members()[1].is_zero());
            }
        }
    }

    #[test]
    fn aw_examples() {
        let ids = |v: &[u32]| v.iter().map(|&x| NodeId(x)).collect::<Vec<_>>();
        assert_eq!(anonymize_aw(&ids(&[7, 8, 7, 9])), vec![1, 2, 1, 3]);
        assert_eq!(anonymize_aw(&ids(&[4, 3, 2, 1])), vec![1, 2, 3, 4]);
        assert_eq!(anonymize_aw(&ids(&[1, 2, 1, 3])), anonymize_aw(&ids(&[9, 5, 9, 6])));
    }

    #[test]
    fn toy_shape_coordinates() {
        // S_u holds u->b->a->c; S_v reaches u and b at position 2 only.
        const V: u32 = 4;
        const Y: u32 = 5;
        let s_u = vec![walk(&[U, B, A, C]), walk(&[U, Y, B, 9])];
        let s_v = vec![walk(&[V, Y, U, 9]), walk(&[V, Y, B, 9])];
        let table = IcawTable::new(&s_u, &s_v).unwrap();
        let shape = walk_shape(&s_u[0], &table);
        assert_eq!(shape.to_string(), "(0,2)->(1,2)->(2,inf)->(3,inf)");
        let mut padded = walk(&[U, A, 0, 0]);
        padded.steps[2].node = NodeId::SENTINEL;
        assert_eq!(walk_shape(&padded, &table).0[2], (None, None));
    }
}
