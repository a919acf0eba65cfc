use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::anonymization::{anonymize_aw, walk_shape};
use crate::encoder::{Aggregation, CawModel, EncoderError, LinkFeatures, LinkQuery, LinkWalks};
use crate::exec::Execution;
use crate::walk_sampler::{Walk, WalkSampler};

/// How walks are grouped into shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeMode {
    /// Per-step `(d_u, d_v)` distance coordinates.
    #[default]
    Caw,
    /// Anonymous-walk rank pattern of the walk alone.
    Aw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeRow {
    pub shape: String,
    /// Mean per-walk logit over all occurrences.
    pub mean_logit: f64,
    pub count_pos: usize,
    pub count_neg: usize,
    /// Share of the walks of positive (negative) queries with this shape.
    pub ratio_pos: f64,
    pub ratio_neg: f64,
}

fn aw_shape(walk: &Walk) -> String {
    let nodes: Vec<_> = walk.nodes().collect();
    let ranks = anonymize_aw(&nodes);
    nodes
        .iter()
        .zip(ranks)
        .map(|(n, r)| if n.is_sentinel() { "_".to_string() } else { r.to_string() })
        .collect::<Vec<_>>()
        .join("-")
}

/// Per-shape mean walk logit and occurrence ratios for labelled queries,
/// sorted by decreasing mean logit. Query `i` samples with key `key ++ [i]`.
pub fn motif_table(
    model: &CawModel,
    sampler: &WalkSampler,
    queries: &[LinkQuery],
    mode: ShapeMode,
    key: &[u64],
    exec: Execution,
) -> Result<Vec<ShapeRow>, EvalError> {
    if model.config.agg != Aggregation::Mean {
        return Err(EvalError::NotLinear);
    }
    let per_query = exec.map_range(queries.len(), |i| {
        let q = &queries[i];
        let mut k = key.to_vec();
        k.push(i as u64);
        let walks = LinkWalks::sample(sampler, q.u, q.v, q.t, &k);
        let feats = LinkFeatures::build(&walks, sampler.store(), &model.config)?;
        let logits = model.walk_logits(&feats)?;
        let table = walks.table().map_err(EncoderError::from)?;
        let (first, second) = if feats.swapped {
            (&walks.s_v, &walks.s_u)
        } else {
            (&walks.s_u, &walks.s_v)
        };
        let shapes: Vec<String> = first
            .walks
            .iter()
            .chain(&second.walks)
            .map(|w| match mode {
                ShapeMode::Caw => walk_shape(w, &table).to_string(),
                ShapeMode::Aw => aw_shape(w),
            })
            .collect();
        Ok::<_, EvalError>((q.label == Some(true), shapes, logits))
    });

    #[derive(Default)]
    struct Acc {
        logit_sum: f64,
        pos: usize,
        neg: usize,
    }
    let mut acc: BTreeMap<String, Acc> = BTreeMap::new();
    let (mut total_pos, mut total_neg) = (0usize, 0usize);
    for r in per_query {
        let (positive, shapes, logits) = r?;
        for (shape, logit) in shapes.into_iter().zip(logits) {
            let a = acc.entry(shape).or_default();
            a.logit_sum += logit;
            if positive {
                a.pos += 1;
                total_pos += 1;
            } else {
                a.neg += 1;
                total_neg += 1;
            }
        }
    }
    let ratio = |c: usize, total: usize| if total == 0 { 0.0 } else { c as f64 / total as f64 };
    let mut rows: Vec<ShapeRow> = acc
        .into_iter()
        .map(|(shape, a)| ShapeRow {
            mean_logit: a.logit_sum / (a.pos + a.neg) as f64,
            ratio_pos: ratio(a.pos, total_pos),
            ratio_neg: ratio(a.neg, total_neg),
            count_pos: a.pos,
            count_neg: a.neg,
            shape,
        })
        .collect();
    rows.sort_by(|a, b| b.mean_logit.total_cmp(&a.mean_logit).then_with(|| a.shape.cmp(&b.shape)));
    Ok(rows)
}
