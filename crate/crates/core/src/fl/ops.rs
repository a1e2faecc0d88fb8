use rand::Rng;
use thiserror::Error;

use super::{DeviceProfile, EarlyStopConfig, SimError, StopMetric, TimingConfig};
use crate::learning::{evaluate, init_model, train, Dataset, EvalMetrics, ModelParams, ModelShape, TrainConfig};
use crate::rng::{derive_seed, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregateError {
    #[error("model {index} has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        index: usize,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("{got} weights given for {expected} models")]
    WeightCount { expected: usize, got: usize },
    #[error("weights must be finite, nonnegative and sum to a positive value")]
    BadWeights,
}

/// Coordinate-wise weighted mean of `local` and every `received` model.
/// `weights` covers `local` first, then `received` in order; `None` is
/// uniform.
///
/// Computed as `local + sum_i w_i (m_i - local) / W`, so identical inputs
/// return the local model bit for bit.
pub fn aggregate(local: &ModelParams, received: &[&ModelParams], weights: Option<&[f64]>) -> Result<ModelParams, AggregateError> {
    for (i, m) in received.iter().enumerate() {
        if m.shape() != local.shape() {
            return Err(AggregateError::ShapeMismatch {
                index: i + 1,
                expected: local.shape().dims().to_vec(),
                got: m.shape().dims().to_vec(),
            });
        }
    }
    let count = received.len() + 1;
    let uniform;
    let w = match weights {
        Some(w) => {
            if w.len() != count {
                return Err(AggregateError::WeightCount {
                    expected: count,
                    got: w.len(),
                });
            }
            w
        }
        None => {
            uniform = vec![1.0; count];
            &uniform
        }
    };
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(AggregateError::BadWeights);
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(AggregateError::BadWeights);
    }
    if received.is_empty() {
        return Ok(local.clone());
    }
    let base = local.weights();
    let mut out = base.to_vec();
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (m, wi) in received.iter().zip(&w[1..]) {
            acc += wi * (m.weights()[k] - base[k]);
        }
        *o = base[k] + acc / total;
    }
    Ok(ModelParams::new(local.shape().clone(), out).expect("same shape as local"))
}

/// Simulated seconds for `epochs` passes over `rows` rows.
pub fn compute_time(device: &DeviceProfile, rows: usize, epochs: usize, timing: &TimingConfig) -> f64 {
    let mut t = timing.base_seconds_per_row * rows as f64 * epochs as f64 / device.speed_factor;
    if device.has_accelerator {
        t /= timing.accelerator_speedup;
    }
    t
}

/// Mini-batch size the device can hold: `min(requested, floor(ram_mb *
/// rows_per_mb))`, never below 1. The flag reports whether it was clamped.
pub fn effective_batch(device: &DeviceProfile, requested: usize, _shape: &ModelShape, timing: &TimingConfig) -> (usize, bool) {
    let cap = (device.ram_mb as f64 * timing.rows_per_mb).floor();
    let cap = if cap >= usize::MAX as f64 { usize::MAX } else { cap as usize };
    let b = requested.min(cap).max(1);
    (b, b != requested)
}

/// Uniform sample without replacement of `min(fanout, peers.len())` peers,
/// returned in ascending order.
pub fn gossip_select<R: Rng + ?Sized>(peers: &[usize], fanout: usize, rng: &mut R) -> Vec<usize> {
    if fanout >= peers.len() {
        return peers.to_vec();
    }
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, peers.len(), fanout)
        .into_iter()
        .map(|i| peers[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// True once the last `patience` entries all fail to beat the best earlier
/// entry by more than `min_delta`.
pub fn early_stop(history: &[f64], cfg: &EarlyStopConfig) -> bool {
    let p = cfg.patience;
    if p == 0 || history.len() < p + 1 {
        return false;
    }
    let (before, window) = history.split_at(history.len() - p);
    let better = |a: f64, b: f64| match cfg.metric {
        StopMetric::Loss => a < b - cfg.min_delta,
        StopMetric::Accuracy => a > b + cfg.min_delta,
    };
    let best = match cfg.metric {
        StopMetric::Loss => before.iter().copied().fold(f64::INFINITY, f64::min),
        StopMetric::Accuracy => before.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    !window.iter().any(|&v| better(v, best))
}

/// Seed of device `device`'s local training in `round`.
pub fn train_seed(run_seed: u64, device: usize, round: usize) -> u64 {
    derive_seed(run_seed, Stream::Train, device as u64, round as u64)
}

/// Initial-weights seed; `None` is the single model shared by every device
/// in centralized mode.
pub fn init_seed(run_seed: u64, device: Option<usize>) -> u64 {
    match device {
        Some(d) => derive_seed(run_seed, Stream::Init, d as u64, 0),
        None => derive_seed(run_seed, Stream::Init, u64::MAX, 0),
    }
}

/// One device step: initialize if needed, average with what was received,
/// then train. With `cfg.epochs == 0` the aggregate is returned unchanged
/// and the metrics are measured on `data`.
pub fn local_update(
    model: Option<&ModelParams>,
    shape: &ModelShape,
    init: u64,
    received: &[&ModelParams],
    weights: Option<&[f64]>,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ModelParams, EvalMetrics), SimError> {
    let fresh;
    let local = match model {
        Some(m) => m,
        None => {
            fresh = init_model(shape, init);
            &fresh
        }
    };
    let merged = aggregate(local, received, weights)?;
    if cfg.epochs == 0 {
        let m = evaluate(&merged, data)?;
        return Ok((merged, m));
    }
    Ok(train(&merged, data, cfg)?)
}
