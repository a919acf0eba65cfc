//! Sampler cost measurements: acceptance-loop iterations against their
//! theoretical bound, and accumulated walk-extraction time against the
//! number of processed events.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::keyed_rng;
use crate::temporal_graph::{Event, GraphError, TemporalStore};
use crate::walk_sampler::{sample_neighbor_counted, SamplerConfig, SamplerError, WalkSampler};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub calls: usize,
    pub mean_iterations: f64,
    /// Mean history length `|E_{w,t}|` over the calls.
    pub mean_history: f64,
    /// `2 tau / alpha + 1`, infinite for `alpha = 0`.
    pub rate_bound: f64,
    /// Mean of `min(rate_bound, |E_{w,t}|)` over the calls.
    pub mean_bound: f64,
}

/// Runs `calls` single-step samples from random `(node, time)` pairs taken
/// at event times in the second half of the stream.
pub fn iteration_profile(store: &TemporalStore, events: &[Event], tau: f64, calls: usize, seed: u64) -> IterationReport {
    let rate_bound = if store.alpha() > 0.0 {
        2.0 * tau / store.alpha() + 1.0
    } else {
        f64::INFINITY
    };
    let mut rng = keyed_rng(seed, &[0x17e5]);
    let lo = events.len() / 2;
    let (mut iters, mut hist, mut bound) = (0usize, 0usize, 0.0);
    for _ in 0..calls {
        let e = &events[rng.random_range(lo..events.len())];
        let w = if rng.random::<bool>() { e.u } else { e.v };
        let n = store.history_before(w, e.t).len();
        let (_, k) = sample_neighbor_counted(store, w, e.t, &mut rng);
        iters += k;
        hist += n;
        bound += rate_bound.min(n as f64);
    }
    let c = calls.max(1) as f64;
    IterationReport {
        calls,
        mean_iterations: iters as f64 / c,
        mean_history: hist as f64 / c,
        rate_bound,
        mean_bound: bound / c,
    }
}

/// Least-squares line with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit { slope, intercept, r2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeCurve {
    /// `(events processed, accumulated sampling seconds)`.
    pub points: Vec<(usize, f64)>,
    pub fit: Option<LinearFit>,
}

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Replays the stream: before each event is recorded, walks are sampled
/// from both endpoints at its time. Only sampling is timed.
pub fn runtime_profile(events: &[Event], config: &SamplerConfig, checkpoints: usize) -> Result<RuntimeCurve, ProfileError> {
    config.validate()?;
    let mut store = TemporalStore::new(config.alpha)?;
    let every = (events.len() / checkpoints.max(1)).max(1);
    let mut elapsed = 0.0;
    let mut points = Vec::with_capacity(checkpoints + 1);
    for (i, e) in events.iter().enumerate() {
        let sampler = WalkSampler::new(&store, config.clone())?;
        let start = Instant::now();
        let a = sampler.sample(e.u, e.t, &[i as u64, 0]);
        let b = sampler.sample(e.v, e.t, &[i as u64, 1]);
        elapsed += start.elapsed().as_secs_f64();
        std::hint::black_box((a, b));
        store.record(e)?;
        if (i + 1) % every == 0 || i + 1 == events.len() {
            points.push((i + 1, elapsed));
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(RuntimeCurve {
        fit: linear_fit(&xs, &ys),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal_graph::NodeId;

    #[test]
    fn fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn uniform_acceptance_walks_half_the_history() {
        // alpha = 0 on a star: history of node 0 before t=101 has 100 entries.
        let evs: Vec<Event> = (1..=101).map(|i| Event::new(NodeId(0), NodeId(i), i as f64)).collect();
        let store = TemporalStore::from_events(0.0, &evs).unwrap();
        let mut rng = keyed_rng(3, &[]);
        let n = 20_000;
        let total: usize = (0..n)
            .map(|_| sample_neighbor_counted(&store, NodeId(0), 101.0, &mut rng).1)
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 50.5).abs() < 1.0, "{mean}");
    }
}
