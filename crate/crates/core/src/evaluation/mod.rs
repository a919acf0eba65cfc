//! Chronological splits, inductive masking, negative sampling, metrics,
//! training and shape analysis.

mod metrics;
mod motifs;
mod train;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{EncoderError, LinkQuery};
use crate::rng::keyed_rng;
use crate::temporal_graph::{Event, GraphError, NodeId};
use crate::walk_sampler::SamplerError;

pub use metrics::{ap, auc};
pub use motifs::{motif_table, ShapeMode, ShapeRow};
pub use train::{evaluate, score_queries, train, ClassMetrics, EpochRecord, History, Part, Report, Restore, TrainConfig, TrainSetup};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("split ratios must satisfy 0 < r_train < r_val < 1, got {0} and {1}")]
    Ratios(f64, f64),
    #[error("mask fraction {0} outside [0, 1]")]
    Fraction(f64),
    #[error("masking {masked} of {nodes} nodes leaves no training events (had {before})")]
    EmptyTrain { masked: usize, nodes: usize, before: usize },
    #[error("no positive training queries")]
    NoQueries,
    #[error("node universe has no candidate besides {u} and {v}")]
    UniverseTooSmall { u: NodeId, v: NodeId },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("shape scores need a mean-pooling model: attention pooling is not linear in the walk encodings")]
    NotLinear,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Whether evaluation events touch nodes hidden from training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalClass {
    Transductive,
    NewOld,
    NewNew,
}

impl fmt::Display for EvalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalClass::Transductive => "transductive",
            EvalClass::NewOld => "new-old",
            EvalClass::NewNew => "new-new",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Transductive,
    Inductive,
}

/// Event-index ranges of a chronological stream plus the masked nodes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
    pub t_train: f64,
    pub t_val: f64,
    pub masked: BTreeSet<NodeId>,
}

impl Split {
    pub fn class(&self, e: &Event) -> EvalClass {
        match (self.masked.contains(&e.u) as u8) + (self.masked.contains(&e.v) as u8) {
            0 => EvalClass::Transductive,
            1 => EvalClass::NewOld,
            _ => EvalClass::NewNew,
        }
    }

    /// Training events that touch no masked node.
    pub fn train_indices(&self, events: &[Event]) -> Vec<usize> {
        self.train
            .clone()
            .filter(|&i| self.class(&events[i]) == EvalClass::Transductive)
            .collect()
    }

    pub fn range(&self, part: Part) -> Range<usize> {
        match part {
            Part::Train => self.train.clone(),
            Part::Val => self.val.clone(),
            Part::Test => self.test.clone(),
        }
    }

    /// Evaluation events of `part` with their class.
    pub fn classified(&self, events: &[Event], part: Part) -> Vec<(usize, EvalClass)> {
        self.range(part).map(|i| (i, self.class(&events[i]))).collect()
    }
}

/// Assigns each event by `t < t_min + T * r` with `T` the stream's time span.
pub fn chronological_split(events: &[Event], r_train: f64, r_val: f64) -> Result<Split, EvalError> {
    if !(0.0 < r_train && r_train < r_val && r_val < 1.0) {
        return Err(EvalError::Ratios(r_train, r_val));
    }
    let (t0, t1) = match (events.first(), events.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => (0.0, 0.0),
    };
    let span = t1 - t0;
    let t_train = t0 + span * r_train;
    let t_val = t0 + span * r_val;
    let n = events.len();
    let (end_train, end_val) = if span > 0.0 {
        (
            events.partition_point(|e| e.t < t_train),
            events.partition_point(|e| e.t < t_val),
        )
    } else {
        (n, n)
    };
    let split = Split {
        train: 0..end_train,
        val: end_train..end_val,
        test: end_val..n,
        t_train,
        t_val,
        masked: BTreeSet::new(),
    };
    for (name, r) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        if r.is_empty() {
            log::warn!("{name} partition is empty");
        }
    }
    Ok(split)
}

/// Hides `round(fraction * n_nodes)` random nodes from training.
pub fn inductive_mask(split: &Split, events: &[Event], n_nodes: usize, fraction: f64, seed: u64) -> Result<Split, EvalError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(EvalError::Fraction(fraction));
    }
    let k = (fraction * n_nodes as f64).round() as usize;
    let mut rng = keyed_rng(seed, &[0x3a5c]);
    let masked: BTreeSet<NodeId> = index::sample(&mut rng, n_nodes, k.min(n_nodes))
        .into_iter()
        .map(|i| NodeId(i as u32))
        .collect();
    let out = Split {
        masked,
        ..split.clone()
    };
    if k > 0 {
        let kept = out.train_indices(events).len();
        if kept == 0 {
            return Err(EvalError::EmptyTrain {
                masked: k,
                nodes: n_nodes,
                before: split.train.len(),
            });
        }
    }
    Ok(out)
}

/// One negative per positive: the second endpoint is replaced by a node
/// drawn uniformly from `universe` minus both endpoints.
pub fn sample_negatives(positives: &[LinkQuery], universe: &[NodeId], key: &[u64], seed: u64) -> Result<Vec<LinkQuery>, EvalError> {
    let mut rng = keyed_rng(seed, key);
    positives
        .iter()
        .map(|q| {
            let others = universe.iter().filter(|&&w| w != q.u && w != q.v).count();
            if others == 0 {
                return Err(EvalError::UniverseTooSmall { u: q.u, v: q.v });
            }
            let v = loop {
                let w = universe[rng.random_range(0..universe.len())];
                if w != q.u && w != q.v {
                    break w;
                }
            };
            Ok(LinkQuery {
                u: q.u,
                v,
                t: q.t,
                label: Some(false),
            })
        })
        .collect()
}
