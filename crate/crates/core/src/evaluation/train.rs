use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ap, auc, sample_negatives, EvalClass, EvalError, Split};
use crate::encoder::{CawModel, LinkFeatures, LinkQuery, LinkWalks};
use crate::exec::Execution;
use crate::nn::{Adam, ParamSet};
use crate::rng::keyed_rng;
use crate::temporal_graph::{Event, NodeId, TemporalStore};
use crate::walk_sampler::{SamplerConfig, WalkSampler};

const KEY_TRAIN: u64 = 0x7a;
const KEY_TRAIN_NEG: u64 = 0x7b;
const KEY_DROPOUT: u64 = 0x7c;
const KEY_VAL: u64 = 0x7d;
const KEY_VAL_NEG: u64 = 0x7e;
const KEY_EVAL: u64 = 0x7f;
const KEY_EVAL_NEG: u64 = 0x80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Val,
    Test,
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Part::Train => "train",
            Part::Val => "val",
            Part::Test => "test",
        })
    }
}

/// Which parameters are kept when training ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Restore {
    /// Parameters of the epoch with the best validation AUC.
    #[default]
    Best,
    /// On early stop, the parameters from `patience` epochs before the
    /// stopping epoch; otherwise the last epoch.
    PatienceBack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub restore: Restore,
    /// Redraw negatives, walks and dropout masks every epoch.
    pub resample: bool,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            lr: 1e-4,
            max_epochs: 50,
            patience: 3,
            seed: 0,
            restore: Restore::Best,
            resample: true,
            exec: Execution::default(),
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), EvalError> {
        if self.batch_size == 0 {
            return Err(EvalError::Config("batch size must be positive".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(EvalError::Config(format!("learning rate {} must be non-negative", self.lr)));
        }
        if self.patience == 0 {
            return Err(EvalError::Config("patience must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: Option<f64>,
    pub val_ap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters the model holds after training.
    pub restored_epoch: Option<usize>,
    pub stopped_early: bool,
}

/// Everything the training loop reads besides the model.
#[derive(Debug, Clone)]
pub struct TrainSetup<'a> {
    pub events: &'a [Event],
    pub n_nodes: usize,
    pub split: &'a Split,
    /// Events eligible as positive queries; `None` means all.
    pub positives: Option<&'a [bool]>,
    pub sampler: SamplerConfig,
}

impl TrainSetup<'_> {
    fn eligible(&self, i: usize) -> bool {
        self.positives.is_none_or(|p| p[i])
    }

    fn query(&self, i: usize) -> LinkQuery {
        let e = &self.events[i];
        LinkQuery {
            u: e.u,
            v: e.v,
            t: e.t,
            label: Some(true),
        }
    }

    fn universe(&self) -> Vec<NodeId> {
        (0..self.n_nodes as u32).map(NodeId).collect()
    }

    /// Positive evaluation queries of a part with their classes.
    pub fn eval_positives(&self, part: Part) -> Vec<(LinkQuery, EvalClass)> {
        self.split
            .classified(self.events, part)
            .into_iter()
            .filter(|&(i, _)| self.eligible(i))
            .map(|(i, c)| (self.query(i), c))
            .collect()
    }

    fn full_store(&self) -> Result<TemporalStore, EvalError> {
        Ok(TemporalStore::from_events(self.sampler.alpha, self.events)?)
    }
}

fn features(sampler: &WalkSampler, model: &CawModel, q: &LinkQuery, key: &[u64]) -> Result<LinkFeatures, EvalError> {
    let walks = LinkWalks::sample(sampler, q.u, q.v, q.t, key);
    Ok(LinkFeatures::build(&walks, sampler.store(), &model.config)?)
}

/// Inference-mode probabilities; query `i` samples with key `key ++ [i]`.
pub fn score_queries(
    model: &CawModel,
    sampler: &WalkSampler,
    queries: &[LinkQuery],
    key: &[u64],
    exec: Execution,
) -> Result<Vec<f64>, EvalError> {
    exec.map_range(queries.len(), |i| {
        let mut k = key.to_vec();
        k.push(i as u64);
        let feats = features(sampler, model, &queries[i], &k)?;
        Ok(model.score(&feats)?)
    })
    .into_iter()
    .collect()
}

/// Mini-batch BCE training over chronological training events with one
/// sampled negative per positive and early stopping on validation AUC.
pub fn train(model: &mut CawModel, setup: &TrainSetup, cfg: &TrainConfig) -> Result<History, EvalError> {
    cfg.validate()?;
    let train_idx: Vec<usize> = setup.split.train_indices(setup.events);
    let train_events: Vec<Event> = train_idx.iter().map(|&i| setup.events[i].clone()).collect();
    let train_store = TemporalStore::from_events(setup.sampler.alpha, &train_events)?;
    let train_sampler = WalkSampler::new(&train_store, setup.sampler.clone())?;
    let positives: Vec<(usize, LinkQuery)> = train_idx
        .iter()
        .filter(|&&i| setup.eligible(i))
        .map(|&i| (i, setup.query(i)))
        .collect();
    if positives.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let pos_queries: Vec<LinkQuery> = positives.iter().map(|p| p.1).collect();
    let train_universe: Vec<NodeId> = setup.universe().into_iter().filter(|n| !setup.split.masked.contains(n)).collect();

    let full_store = setup.full_store()?;
    let full_sampler = WalkSampler::new(&full_store, setup.sampler.clone())?;
    let mut val_pos = setup.eval_positives(Part::Val);
    if !setup.split.masked.is_empty() && val_pos.iter().any(|(_, c)| *c != EvalClass::Transductive) {
        val_pos.retain(|(_, c)| *c != EvalClass::Transductive);
    }
    let val_pos: Vec<LinkQuery> = val_pos.into_iter().map(|(q, _)| q).collect();
    let val_neg = sample_negatives(&val_pos, &setup.universe(), &[KEY_VAL_NEG], cfg.seed)?;
    let val_queries: Vec<LinkQuery> = val_pos.iter().chain(&val_neg).copied().collect();
    let val_labels: Vec<bool> = val_queries.iter().map(|q| q.label == Some(true)).collect();

    let opt = Adam::new(cfg.lr);
    let mut history = History::default();
    let mut best: Option<(f64, usize, ParamSet)> = None;
    let mut recent: VecDeque<(usize, ParamSet)> = VecDeque::new();
    let mut since_best = 0;

    for epoch in 0..cfg.max_epochs {
        let draw = if cfg.resample { epoch as u64 } else { 0 };
        let negatives = sample_negatives(&pos_queries, &train_universe, &[KEY_TRAIN_NEG, draw], cfg.seed)?;
        let mut epoch_loss = 0.0;
        let n_batches = positives.len().div_ceil(cfg.batch_size);
        for b in 0..n_batches {
            let lo = b * cfg.batch_size;
            let hi = (lo + cfg.batch_size).min(positives.len());
            let items: Vec<(LinkQuery, [u64; 4])> = (lo..hi)
                .flat_map(|j| {
                    let event = positives[j].0 as u64;
                    [
                        (positives[j].1, [KEY_TRAIN, draw, event, 0]),
                        (negatives[j], [KEY_TRAIN, draw, event, 1]),
                    ]
                })
                .collect();
            let weight = 1.0 / items.len() as f64;
            let frozen: &CawModel = model;
            let results = cfg.exec.map_slice(&items, |(q, key)| {
                let feats = features(&train_sampler, frozen, q, key)?;
                let mut rng = keyed_rng(cfg.seed, &[KEY_DROPOUT, key[1], key[2], key[3]]);
                let label = if q.label == Some(true) { 1.0 } else { 0.0 };
                Ok::<_, EvalError>(frozen.loss_and_grads(&feats, label, weight, true, &mut rng)?)
            });
            let mut batch_loss = 0.0;
            for r in results {
                let (loss, grads) = r?;
                batch_loss += loss;
                model.params.accumulate(&grads);
            }
            if !batch_loss.is_finite() {
                return Err(EvalError::NonFiniteLoss { epoch, batch: b });
            }
            opt.step(&mut model.params);
            epoch_loss += batch_loss;
        }
        let train_loss = epoch_loss / n_batches as f64;

        let (val_auc, val_ap) = if val_queries.is_empty() {
            (None, None)
        } else {
            let scores = score_queries(model, &full_sampler, &val_queries, &[KEY_VAL], cfg.exec)?;
            (auc(&scores, &val_labels), ap(&scores, &val_labels))
        };
        log::info!(
            "epoch {epoch}: loss {train_loss:.5} val auc {}",
            val_auc.map_or_else(|| "NA".to_string(), |a| format!("{a:.4}"))
        );
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_auc,
            val_ap,
        });

        recent.push_back((epoch, model.params.clone()));
        if recent.len() > cfg.patience + 1 {
            recent.pop_front();
        }
        let Some(score) = val_auc else {
            continue;
        };
        match &best {
            Some((b, _, _)) if score <= *b => since_best += 1,
            _ => {
                best = Some((score, epoch, model.params.clone()));
                since_best = 0;
            }
        }
        if since_best >= cfg.patience {
            history.stopped_early = true;
            break;
        }
    }

    let last = history.epochs.last().map(|r| r.epoch);
    history.restored_epoch = match (cfg.restore, history.stopped_early) {
        (Restore::PatienceBack, true) => recent.front().map(|(e, p)| {
            model.params.load_values(p);
            *e
        }),
        (Restore::PatienceBack, false) => last,
        (Restore::Best, _) => match &best {
            Some((_, e, p)) => {
                model.params.load_values(p);
                Some(*e)
            }
            None => last,
        },
    };
    Ok(history)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub n_pos: usize,
    pub n_neg: usize,
    pub auc: Option<f64>,
    pub ap: Option<f64>,
}

/// Metrics per evaluation class, plus `all` and `inductive` (both new classes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub part: Part,
    pub rows: Vec<(String, ClassMetrics)>,
}

impl Report {
    pub fn get(&self, name: &str) -> Option<&ClassMetrics> {
        self.rows.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }
}

/// Scores the positives of `part` against one negative each. Walks come
/// from all events strictly before each query time.
pub fn evaluate(model: &CawModel, setup: &TrainSetup, part: Part, seed: u64, exec: Execution) -> Result<Report, EvalError> {
    let store = setup.full_store()?;
    let sampler = WalkSampler::new(&store, setup.sampler.clone())?;
    let pos = setup.eval_positives(part);
    let pos_q: Vec<LinkQuery> = pos.iter().map(|p| p.0).collect();
    let neg_q = sample_negatives(&pos_q, &setup.universe(), &[KEY_EVAL_NEG, part as u64], seed)?;
    let pos_s = score_queries(model, &sampler, &pos_q, &[KEY_EVAL, part as u64, 0], exec)?;
    let neg_s = score_queries(model, &sampler, &neg_q, &[KEY_EVAL, part as u64, 1], exec)?;

    type Group = (&'static str, fn(EvalClass) -> bool);
    let groups: [Group; 5] = [
        ("all", |_| true),
        ("transductive", |c| c == EvalClass::Transductive),
        ("inductive", |c| c != EvalClass::Transductive),
        ("new-old", |c| c == EvalClass::NewOld),
        ("new-new", |c| c == EvalClass::NewNew),
    ];
    let rows = groups
        .iter()
        .map(|(name, keep)| {
            let mut scores = Vec::new();
            let mut labels = Vec::new();
            for (k, (_, c)) in pos.iter().enumerate() {
                if keep(*c) {
                    scores.extend([pos_s[k], neg_s[k]]);
                    labels.extend([true, false]);
                }
            }
            let n = labels.len() / 2;
            (
                name.to_string(),
                ClassMetrics {
                    n_pos: n,
                    n_neg: n,
                    auc: auc(&scores, &labels),
                    ap: ap(&scores, &labels),
                },
            )
        })
        .collect();
    Ok(Report { part, rows })
}
