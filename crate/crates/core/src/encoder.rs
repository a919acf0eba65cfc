//! Neural encoder for anonymized walk pairs.
//!
//! Per step of every walk the input is
//! `f1(identity) ++ f2(t_{i-1} - t_i) ++ X_i`, where `f1` is a shared
//! two-layer MLP summed over both members of the relative identity, `f2`
//! maps the time gap to learnable Fourier features, and `X_i` holds the
//! attributes of the traversed link. A recurrent cell consumes the steps
//! root first; walk encodings are pooled (mean or bilinear self-attention)
//! and a two-layer perceptron produces the link logit.

use std::collections::HashMap;
use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anonymization::{anonymize_aw, AnonymizeError, AnonymizedPair, AnonymizedWalk, IcawTable, RelativeIdentity};
use crate::nn::{checkpoint, CellKind, Dense, ParamId, ParamSet, RecurrentCell, Tape, Tensor, TensorError, Var};
use crate::rng::keyed_rng;
use crate::temporal_graph::{NodeId, TemporalStore};
use crate::walk_sampler::{WalkSampler, WalkSet};

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Anonymize(#[from] AnonymizeError),
    #[error("walks carry {got} attribute dims, encoder expects {expected}")]
    AttrDim { expected: usize, got: usize },
    #[error("walks have {got} steps, encoder expects {expected}")]
    WalkLen { expected: usize, got: usize },
    #[error("no walks to aggregate")]
    NoWalks,
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error(transparent)]
    Checkpoint(#[from] checkpoint::CheckpointError),
    #[error("checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("checkpoint parameter {name}: {problem}")]
    ParamMismatch { name: String, problem: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Attention,
}

/// How node identities enter the step input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentityEncoding {
    /// Set-based position counts through the shared MLP.
    #[default]
    Caw,
    /// One-hot anonymous-walk rank through the same MLP.
    Aw,
    /// No identity input at all (time and attributes only).
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Steps per walk; identity vectors have `walk_len + 1` entries.
    pub walk_len: usize,
    pub d_count: usize,
    /// Number of frequencies; the time encoding has `2 * d_time` entries.
    pub d_time: usize,
    pub d_walk: usize,
    pub d_attr: usize,
    pub agg: Aggregation,
    pub dropout: f64,
    pub cell: CellKind,
    pub identity: IdentityEncoding,
}

impl EncoderConfig {
    pub fn new(walk_len: usize) -> Self {
        Self {
            walk_len,
            d_count: 64,
            d_time: 64,
            d_walk: 64,
            d_attr: 0,
            agg: Aggregation::Mean,
            dropout: 0.1,
            cell: CellKind::Gru,
            identity: IdentityEncoding::Caw,
        }
    }

    /// Same hidden size everywhere.
    pub fn with_dims(mut self, d: usize) -> Self {
        self.d_count = d;
        self.d_time = d;
        self.d_walk = d;
        self
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.walk_len == 0 {
            return Err(EncoderError::Config("walk_len must be at least 1".into()));
        }
        if self.d_count == 0 || self.d_time == 0 || self.d_walk == 0 {
            return Err(EncoderError::Config("hidden dimensions must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(EncoderError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    fn step_input_dim(&self) -> usize {
        let ident = if self.identity == IdentityEncoding::Off { 0 } else { self.d_count };
        ident + 2 * self.d_time + self.d_attr
    }
}

/// Timescales of a stream used to spread the initial frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScale {
    pub range: f64,
    pub median_gap: f64,
}

impl TimeScale {
    /// From sorted timestamps.
    pub fn from_times(times: &[f64]) -> Self {
        let range = match (times.first(), times.last()) {
            (Some(a), Some(b)) if b > a => b - a,
            _ => 1.0,
        };
        let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).collect();
        gaps.sort_by(f64::total_cmp);
        let median_gap = gaps.get(gaps.len() / 2).copied().unwrap_or(range);
        Self { range, median_gap }
    }

    /// `d` frequencies log-spaced over `[1 / range, 10 / median_gap]`.
    pub fn frequencies(&self, d: usize) -> Vec<f64> {
        let mut lo = 1.0 / self.range.max(f64::MIN_POSITIVE);
        let mut hi = 10.0 / self.median_gap.max(f64::MIN_POSITIVE);
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        if d == 1 {
            return vec![(lo * hi).sqrt()];
        }
        let ratio = (hi / lo).ln();
        (0..d)
            .map(|k| lo * (ratio * k as f64 / (d - 1) as f64).exp())
            .collect()
    }
}

impl Default for TimeScale {
    fn default() -> Self {
        Self {
            range: 1.0,
            median_gap: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Layers {
    count_hidden: Dense,
    count_out: Dense,
    omega: ParamId,
    cell: RecurrentCell,
    attention: Option<(ParamId, ParamId)>,
    head_hidden: Dense,
    head_out: Dense,
}

impl Layers {
    fn register<R: Rng + ?Sized>(config: &EncoderConfig, scale: &TimeScale, params: &mut ParamSet, rng: &mut R) -> Self {
        let ident_dim = config.walk_len + 1;
        let count_hidden = Dense::new(params, "count.hidden", ident_dim, config.d_count, rng);
        let count_out = Dense::new(params, "count.out", config.d_count, config.d_count, rng);
        let omega = params.add("time.omega", Tensor::row(&scale.frequencies(config.d_time)));
        let cell = RecurrentCell::new(params, "walk", config.cell, config.step_input_dim(), config.d_walk, rng);
        let attention = (config.agg == Aggregation::Attention).then(|| {
            let d = config.d_walk;
            (
                params.add_uniform("attn.q1", d, d, d, rng),
                params.add_uniform("attn.q2", d, d, d, rng),
            )
        });
        let head_hidden = Dense::new(params, "head.hidden", config.d_walk, config.d_walk, rng);
        let head_out = Dense::new(params, "head.out", config.d_walk, 1, rng);
        Self {
            count_hidden,
            count_out,
            omega,
            cell,
            attention,
            head_hidden,
            head_out,
        }
    }
}

/// Walk sets sampled for one candidate link.
#[derive(Debug, Clone)]
pub struct LinkWalks {
    pub u: NodeId,
    pub v: NodeId,
    pub t: f64,
    pub s_u: WalkSet,
    pub s_v: WalkSet,
}

impl LinkWalks {
    /// Samples both sides with stream keys `key ++ [0]` and `key ++ [1]`.
    pub fn sample(sampler: &WalkSampler, u: NodeId, v: NodeId, t: f64, key: &[u64]) -> Self {
        let mut ku = key.to_vec();
        ku.push(0);
        let mut kv = key.to_vec();
        kv.push(1);
        Self::sample_with_keys(sampler, u, v, t, &ku, &kv)
    }

    pub fn sample_with_keys(sampler: &WalkSampler, u: NodeId, v: NodeId, t: f64, key_u: &[u64], key_v: &[u64]) -> Self {
        Self {
            u,
            v,
            t,
            s_u: sampler.sample(u, t, key_u),
            s_v: sampler.sample(v, t, key_v),
        }
    }

    pub fn table(&self) -> Result<IcawTable, AnonymizeError> {
        IcawTable::new(&self.s_u.walks, &self.s_v.walks)
    }
}

/// Parameter-independent encoder inputs for one candidate link.
///
/// Rows are walks: the two sides are stacked in a canonical order derived
/// from their anonymized content, so swapping the endpoints of a query
/// yields bitwise identical inputs.
#[derive(Debug, Clone)]
pub struct LinkFeatures {
    n_walks: usize,
    /// True when side `v` was stacked first.
    pub swapped: bool,
    /// Distinct identity rows (first and second member).
    ident_a: Rc<Tensor>,
    ident_b: Option<Rc<Tensor>>,
    /// Per step, the identity row of every walk.
    ident_index: Vec<Rc<[usize]>>,
    /// Per step, `n_walks x 1` time gaps.
    gaps: Vec<Rc<Tensor>>,
    /// Per step, `n_walks x d_attr` link attributes.
    attrs: Vec<Rc<Tensor>>,
}

type SideKey = Vec<Vec<(RelativeIdentity, u64, Vec<u64>)>>;

fn side_key(walks: &[AnonymizedWalk], store: &TemporalStore, d_attr: usize) -> SideKey {
    walks
        .iter()
        .map(|w| {
            w.steps
                .iter()
                .map(|s| {
                    let attrs = match (s.event, d_attr) {
                        (Some(e), d) if d > 0 => store.event_attrs(e).iter().map(|x| x.to_bits()).collect(),
                        _ => Vec::new(),
                    };
                    (s.identity.clone(), s.t.to_bits(), attrs)
                })
                .collect()
        })
        .collect()
}

impl LinkFeatures {
    pub fn build(walks: &LinkWalks, store: &TemporalStore, config: &EncoderConfig) -> Result<Self, EncoderError> {
        let steps = config.walk_len + 1;
        for w in walks.s_u.walks.iter().chain(&walks.s_v.walks) {
            if w.len() != steps {
                return Err(EncoderError::WalkLen {
                    expected: steps,
                    got: w.len(),
                });
            }
        }
        if store.attr_dim() != config.d_attr {
            return Err(EncoderError::AttrDim {
                expected: config.d_attr,
                got: store.attr_dim(),
            });
        }
        let table = walks.table()?;
        let pair = AnonymizedPair {
            side_u: walks.s_u.walks.iter().map(|w| AnonymizedWalk::from_walk(w, &table)).collect(),
            side_v: walks.s_v.walks.iter().map(|w| AnonymizedWalk::from_walk(w, &table)).collect(),
        };
        let swapped = side_key(&pair.side_v, store, config.d_attr) < side_key(&pair.side_u, store, config.d_attr);
        let (first, second, raw_first, raw_second) = if swapped {
            (&pair.side_v, &pair.side_u, &walks.s_v, &walks.s_u)
        } else {
            (&pair.side_u, &pair.side_v, &walks.s_u, &walks.s_v)
        };
        let anon: Vec<&AnonymizedWalk> = first.iter().chain(second.iter()).collect();
        let raw: Vec<_> = raw_first.walks.iter().chain(&raw_second.walks).collect();
        let n_walks = anon.len();
        if n_walks == 0 {
            return Err(EncoderError::NoWalks);
        }

        let mut rows_a: Vec<f64> = Vec::new();
        let mut rows_b: Vec<f64> = Vec::new();
        let mut ident_index: Vec<Vec<usize>> = vec![Vec::with_capacity(n_walks); steps];
        match config.identity {
            IdentityEncoding::Caw => {
                let mut seen: HashMap<&RelativeIdentity, usize> = HashMap::new();
                for w in &anon {
                    for (i, s) in w.steps.iter().enumerate() {
                        let next = seen.len();
                        let row = *seen.entry(&s.identity).or_insert_with(|| {
                            let [a, b] = s.identity.members();
                            rows_a.extend(a.0.iter().map(|&c| c as f64));
                            rows_b.extend(b.0.iter().map(|&c| c as f64));
                            next
                        });
                        ident_index[i].push(row);
                    }
                }
            }
            IdentityEncoding::Aw => {
                // Row 0 is the all-zero padding row; row r is the one-hot of rank r.
                rows_a = vec![0.0; steps * (steps + 1)];
                for r in 1..=steps {
                    rows_a[r * steps + (r - 1)] = 1.0;
                }
                for w in &raw {
                    let nodes: Vec<NodeId> = w.nodes().collect();
                    let ranks = anonymize_aw(&nodes);
                    for (i, (n, rank)) in nodes.iter().zip(ranks).enumerate() {
                        ident_index[i].push(if n.is_sentinel() { 0 } else { rank as usize });
                    }
                }
            }
            IdentityEncoding::Off => {}
        }
        let n_ident = rows_a.len() / steps;
        let ident_a = Rc::new(Tensor::from_vec(n_ident, steps, rows_a));
        let ident_b = (config.identity == IdentityEncoding::Caw).then(|| Rc::new(Tensor::from_vec(n_ident, steps, rows_b)));

        let mut gaps = Vec::with_capacity(steps);
        let mut attrs = Vec::with_capacity(steps);
        for i in 0..steps {
            let g: Vec<f64> = raw
                .iter()
                .map(|w| if i == 0 { 0.0 } else { w.steps[i - 1].t - w.steps[i].t })
                .collect();
            gaps.push(Rc::new(Tensor::column(&g)));
            if config.d_attr > 0 {
                let mut x = Vec::with_capacity(n_walks * config.d_attr);
                for w in &raw {
                    match w.steps[i].event {
                        Some(e) => x.extend_from_slice(store.event_attrs(e)),
                        None => x.extend(std::iter::repeat_n(0.0, config.d_attr)),
                    }
                }
                attrs.push(Rc::new(Tensor::from_vec(n_walks, config.d_attr, x)));
            }
        }
        Ok(Self {
            n_walks,
            swapped,
            ident_a,
            ident_b,
            ident_index: ident_index.into_iter().map(Into::into).collect(),
            gaps,
            attrs,
        })
    }

    pub fn n_walks(&self) -> usize {
        self.n_walks
    }
}

/// Parameters plus the layer wiring of the encoder.
#[derive(Debug, Clone)]
pub struct CawModel {
    pub config: EncoderConfig,
    pub params: ParamSet,
    layers: Layers,
}

impl CawModel {
    pub fn new(config: EncoderConfig, scale: &TimeScale, seed: u64) -> Result<Self, EncoderError> {
        config.validate()?;
        let mut rng = keyed_rng(seed, &[0x1a17]);
        let mut params = ParamSet::new();
        let layers = Layers::register(&config, scale, &mut params, &mut rng);
        Ok(Self { config, params, layers })
    }

    pub fn identity_input_dim(&self) -> usize {
        self.config.walk_len + 1
    }

    /// Per-walk encodings, `n_walks x d_walk`.
    pub fn encode_walks<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        feats: &LinkFeatures,
        train: bool,
        rng: &mut R,
    ) -> Result<Var, EncoderError> {
        let cfg = &self.config;
        let l = &self.layers;
        let ident = match cfg.identity {
            IdentityEncoding::Off => None,
            _ => {
                let a = tape.constant((*feats.ident_a).clone());
                let fa = self.count_mlp(tape, a, train, rng)?;
                Some(match &feats.ident_b {
                    Some(b) => {
                        let b = tape.constant((**b).clone());
                        let fb = self.count_mlp(tape, b, train, rng)?;
                        tape.add(fa, fb)?
                    }
                    None => fa,
                })
            }
        };
        let omega = tape.param(l.omega);
        let mut h = tape.constant(Tensor::zeros(feats.n_walks, cfg.d_walk));
        for i in 0..feats.gaps.len() {
            let mut parts = Vec::with_capacity(3);
            if let Some(f) = ident {
                parts.push(tape.gather_rows(f, feats.ident_index[i].clone())?);
            }
            let gap = tape.constant((*feats.gaps[i]).clone());
            parts.push(tape.fourier(gap, omega)?);
            if cfg.d_attr > 0 {
                let x = feats.attrs.get(i).ok_or(EncoderError::AttrDim {
                    expected: cfg.d_attr,
                    got: 0,
                })?;
                parts.push(tape.constant((**x).clone()));
            }
            let x = tape.concat(&parts)?;
            h = l.cell.step(tape, x, h)?;
        }
        Ok(tape.dropout(h, cfg.dropout, train, rng))
    }

    /// Shared identity MLP: linear -> ReLU -> linear.
    fn count_mlp<R: Rng + ?Sized>(&self, tape: &mut Tape, x: Var, train: bool, rng: &mut R) -> Result<Var, EncoderError> {
        let h = self.layers.count_hidden.forward(tape, x)?;
        let h = tape.relu(h);
        let h = tape.dropout(h, self.config.dropout, train, rng);
        Ok(self.layers.count_out.forward(tape, h)?)
    }

    /// Pools `n x d` walk encodings into a `1 x d` link encoding.
    pub fn aggregate<R: Rng + ?Sized>(&self, tape: &mut Tape, enc: Var, train: bool, rng: &mut R) -> Result<Var, EncoderError> {
        let (n, _) = tape.shape(enc);
        if n == 0 {
            return Err(EncoderError::NoWalks);
        }
        match self.layers.attention {
            None => Ok(tape.mean_rows(enc)),
            Some((q1, q2)) => {
                let q1 = tape.param(q1);
                let q2 = tape.param(q2);
                let eq = tape.matmul(enc, q1)?;
                let scores = tape.matmul_nt(eq, enc)?;
                let weights = tape.softmax_rows(scores);
                let values = tape.matmul(enc, q2)?;
                let attended = tape.matmul(weights, values)?;
                let attended = tape.dropout(attended, self.config.dropout, train, rng);
                Ok(tape.mean_rows(attended))
            }
        }
    }

    /// Two-layer perceptron producing one logit per row.
    pub fn head<R: Rng + ?Sized>(&self, tape: &mut Tape, x: Var, train: bool, rng: &mut R) -> Result<Var, EncoderError> {
        let h = self.layers.head_hidden.forward(tape, x)?;
        let h = tape.relu(h);
        let h = tape.dropout(h, self.config.dropout, train, rng);
        Ok(self.layers.head_out.forward(tape, h)?)
    }

    pub fn forward_logit<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        feats: &LinkFeatures,
        train: bool,
        rng: &mut R,
    ) -> Result<Var, EncoderError> {
        let enc = self.encode_walks(tape, feats, train, rng)?;
        let pooled = self.aggregate(tape, enc, train, rng)?;
        self.head(tape, pooled, train, rng)
    }

    /// Link probability in inference mode.
    pub fn score(&self, feats: &LinkFeatures) -> Result<f64, EncoderError> {
        let mut tape = Tape::new(&self.params);
        let mut rng = keyed_rng(0, &[]);
        let logit = self.forward_logit(&mut tape, feats, false, &mut rng)?;
        Ok(crate::nn::sigmoid(tape.value(logit).data[0]))
    }

    /// Per-walk logits `head(enc(W_i))` in inference mode, in feature row order.
    pub fn walk_logits(&self, feats: &LinkFeatures) -> Result<Vec<f64>, EncoderError> {
        let mut tape = Tape::new(&self.params);
        let mut rng = keyed_rng(0, &[]);
        let enc = self.encode_walks(&mut tape, feats, false, &mut rng)?;
        let logits = self.head(&mut tape, enc, false, &mut rng)?;
        Ok(tape.value(logits).data.clone())
    }

    /// BCE loss of one labelled link scaled by `weight`, with parameter gradients.
    pub fn loss_and_grads<R: Rng + ?Sized>(
        &self,
        feats: &LinkFeatures,
        label: f64,
        weight: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<(f64, Vec<Tensor>), EncoderError> {
        let mut tape = Tape::new(&self.params);
        let logit = self.forward_logit(&mut tape, feats, train, rng)?;
        let bce = tape.bce_with_logits(logit, &[label])?;
        let loss = tape.scale(bce, weight);
        let value = tape.value(loss).data[0];
        let grads = tape.backward(loss)?;
        Ok((value, grads.params))
    }

    /// Saves parameters with a JSON header holding the config and `meta`.
    pub fn write_checkpoint<W: std::io::Write>(&self, w: W, meta: &serde_json::Value) -> Result<(), EncoderError> {
        let header = serde_json::to_string(&CheckpointHeader {
            encoder: self.config.clone(),
            meta: meta.clone(),
        })?;
        checkpoint::write_checkpoint(w, &header, &self.params)?;
        Ok(())
    }

    pub fn read_checkpoint<R: std::io::Read>(r: R) -> Result<(Self, serde_json::Value), EncoderError> {
        let (header, stored) = checkpoint::read_checkpoint(r)?;
        let CheckpointHeader { encoder: config, meta } = serde_json::from_str(&header)?;
        let mut model = Self::new(config, &TimeScale::default(), 0)?;
        if stored.len() != model.params.len() {
            return Err(EncoderError::ParamMismatch {
                name: "*".into(),
                problem: format!("{} stored, {} expected", stored.len(), model.params.len()),
            });
        }
        for p in stored.iter() {
            let slot = model.params.by_name_mut(&p.name).ok_or_else(|| EncoderError::ParamMismatch {
                name: p.name.clone(),
                problem: "unknown parameter".into(),
            })?;
            if slot.value.shape() != p.value.shape() {
                return Err(EncoderError::ParamMismatch {
                    name: p.name.clone(),
                    problem: format!("shape {:?}, expected {:?}", p.value.shape(), slot.value.shape()),
                });
            }
            slot.value = p.value.clone();
        }
        Ok((model, meta))
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    encoder: EncoderConfig,
    #[serde(default)]
    meta: serde_json::Value,
}

/// A candidate link at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkQuery {
    pub u: NodeId,
    pub v: NodeId,
    pub t: f64,
    pub label: Option<bool>,
}

/// Samples, anonymizes, encodes and scores one candidate link.
pub fn predict_link(
    query: &LinkQuery,
    store: &TemporalStore,
    model: &CawModel,
    sampler: &WalkSampler,
    key: &[u64],
) -> Result<f64, EncoderError> {
    let walks = LinkWalks::sample(sampler, query.u, query.v, query.t, key);
    let feats = LinkFeatures::build(&walks, store, &model.config)?;
    model.score(&feats)
}
