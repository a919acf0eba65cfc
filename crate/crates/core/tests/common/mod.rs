//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use caw_core::nn::{ParamSet, Tensor};
use caw_core::{Event, NodeId};
use rand::Rng;

/// `exp(alpha t_k) / sum_j exp(alpha t_j)` over the given times, computed
/// relative to the largest time.
pub fn exp_weights(times: &[f64], alpha: f64) -> Vec<f64> {
    let top = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = times.iter().map(|t| (alpha * (t - top)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// AUC by enumerating every positive/negative pair.
pub fn brute_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| **l).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| !**l).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

/// AP by sweeping every distinct threshold `s` (predict positive iff
/// `score >= s`) from high to low.
pub fn brute_ap(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|l| **l).count();
    if n_pos == 0 {
        return None;
    }
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for s in thresholds {
        let tp = scores.iter().zip(labels).filter(|(x, l)| **x >= s && **l).count();
        let predicted = scores.iter().filter(|x| **x >= s).count();
        let recall = tp as f64 / n_pos as f64;
        area += (recall - prev_recall) * tp as f64 / predicted as f64;
        prev_recall = recall;
    }
    Some(area)
}

/// Relative error with a floor on the magnitude so that two gradients that
/// are both numerically zero compare equal.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-5)
}

/// Largest relative error between `analytic` and central differences of
/// `f` over every scalar of every parameter.
pub fn max_fd_error(params: &ParamSet, analytic: &[Tensor], f: impl Fn(&ParamSet) -> f64) -> (f64, String) {
    let h = 1e-5;
    let mut worst = (0.0, String::new());
    let mut probe = params.clone();
    for (pi, p) in params.iter().enumerate() {
        for k in 0..p.value.len() {
            let orig = p.value.data[k];
            let id = probe.id(&p.name).unwrap();
            probe.get_mut(id).value.data[k] = orig + h;
            let up = f(&probe);
            probe.get_mut(id).value.data[k] = orig - h;
            let down = f(&probe);
            probe.get_mut(id).value.data[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let e = rel_err(analytic[pi].data[k], numeric);
            if e > worst.0 {
                worst = (e, format!("{}[{k}]: analytic {} numeric {numeric}", p.name, analytic[pi].data[k]));
            }
        }
    }
    worst
}

/// Chronological random stream without self-loops; about one in five
/// events reuses the previous timestamp.
pub fn random_stream<R: Rng>(rng: &mut R, n_nodes: u32, n_events: usize, attr_dim: usize) -> Vec<Event> {
    let mut t = 0.0;
    (0..n_events)
        .map(|_| {
            if rng.random::<f64>() > 0.2 {
                t += rng.random::<f64>() * 2.0;
            }
            let u = rng.random_range(0..n_nodes);
            let mut v = rng.random_range(0..n_nodes - 1);
            if v >= u {
                v += 1;
            }
            let attrs = (0..attr_dim).map(|_| rng.random::<f64>() - 0.5).collect();
            Event::new(NodeId(u), NodeId(v), t).with_attrs(attrs)
        })
        .collect()
}
