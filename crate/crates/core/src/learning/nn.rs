//! Forward pass, cross-entropy loss, backpropagation and SGD.

use rand::seq::SliceRandom;
use serde::Serialize;

use super::{Dataset, LearningError, ModelParams};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearningError> {
        if self.epochs == 0 {
            return Err(LearningError::InvalidConfig("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(LearningError::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(LearningError::InvalidConfig(format!(
                "learning_rate must be finite and positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Mean cross-entropy (nats) and argmax accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub loss: f64,
    pub accuracy: f64,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|z| (z - lse).exp()).collect()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = i;
        }
    }
    best
}

/// Per-layer activations for one example; the last entry holds logits.
struct Scratch {
    outs: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

impl Scratch {
    fn new(params: &ModelParams) -> Self {
        let dims = params.shape().dims();
        Self {
            outs: dims[1..].iter().map(|&d| vec![0.0; d]).collect(),
            delta: Vec::new(),
            next_delta: Vec::new(),
        }
    }
}

fn forward(params: &ModelParams, x: &[f64], s: &mut Scratch) -> Result<(), LearningError> {
    let shape = params.shape();
    let dims = shape.dims();
    let w = params.weights();
    let layers = shape.layer_count();
    for l in 0..layers {
        let (wr, br) = shape.layer_ranges(l);
        let (fan_in, fan_out) = (dims[l], dims[l + 1]);
        let (prev, rest) = s.outs.split_at_mut(l);
        let input: &[f64] = if l == 0 { x } else { &prev[l - 1] };
        let out = &mut rest[0];
        out.copy_from_slice(&w[br]);
        for (i, &xi) in input.iter().enumerate().take(fan_in) {
            if xi == 0.0 {
                continue;
            }
            let row = &w[wr.start + i * fan_out..wr.start + (i + 1) * fan_out];
            for (o, &wij) in out.iter_mut().zip(row) {
                *o += xi * wij;
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(LearningError::Numeric { layer: l });
        }
        if l + 1 < layers {
            for v in out.iter_mut() {
                *v = v.max(0.0);
            }
        }
    }
    Ok(())
}

/// Forward + backward for one example. Adds `scale * dloss/dw` into `grad`
/// when given and writes `dloss/dx` into `input_grad` when given. Returns the
/// example loss and predicted class.
fn example(
    params: &ModelParams,
    x: &[f64],
    y: usize,
    s: &mut Scratch,
    grad: Option<&mut [f64]>,
    scale: f64,
    input_grad: Option<&mut Vec<f64>>,
) -> Result<(f64, usize), LearningError> {
    forward(params, x, s)?;
    let layers = params.shape().layer_count();
    let logits = &s.outs[layers - 1];
    let lse = log_sum_exp(logits);
    let loss = lse - logits[y];
    if !loss.is_finite() {
        return Err(LearningError::Numeric { layer: layers - 1 });
    }
    let pred = argmax(logits);
    if grad.is_none() && input_grad.is_none() {
        return Ok((loss, pred));
    }

    s.delta.clear();
    s.delta.extend(logits.iter().map(|z| (z - lse).exp()));
    s.delta[y] -= 1.0;

    let shape = params.shape();
    let dims = shape.dims();
    let w = params.weights();
    let mut grad = grad;
    for l in (0..layers).rev() {
        let (wr, br) = shape.layer_ranges(l);
        let (fan_in, fan_out) = (dims[l], dims[l + 1]);
        let input: &[f64] = if l == 0 { x } else { &s.outs[l - 1] };
        if let Some(g) = grad.as_deref_mut() {
            for (i, &xi) in input.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let gi = &mut g[wr.start + i * fan_out..wr.start + (i + 1) * fan_out];
                for (gij, &d) in gi.iter_mut().zip(&s.delta) {
                    *gij += scale * xi * d;
                }
            }
            for (gb, &d) in g[br].iter_mut().zip(&s.delta) {
                *gb += scale * d;
            }
        }
        let need_back = l > 0 || input_grad.is_some();
        if !need_back {
            break;
        }
        s.next_delta.clear();
        for i in 0..fan_in {
            let row = &w[wr.start + i * fan_out..wr.start + (i + 1) * fan_out];
            let mut acc: f64 = row.iter().zip(&s.delta).map(|(a, b)| a * b).sum();
            // ReLU mask of the layer below (its output is > 0 iff active)
            if l > 0 && input[i] <= 0.0 {
                acc = 0.0;
            }
            s.next_delta.push(acc);
        }
        std::mem::swap(&mut s.delta, &mut s.next_delta);
    }
    if let Some(dx) = input_grad {
        dx.clear();
        dx.extend_from_slice(&s.delta);
    }
    Ok((loss, pred))
}

fn check_width(params: &ModelParams, width: usize) -> Result<(), LearningError> {
    let expected = params.shape().input_dim();
    if width != expected {
        return Err(LearningError::WidthMismatch { expected, got: width });
    }
    Ok(())
}

fn check_label(params: &ModelParams, y: usize) -> Result<(), LearningError> {
    let classes = params.shape().classes();
    if y >= classes {
        return Err(LearningError::LabelOutOfRange { label: y, classes });
    }
    Ok(())
}

/// Mean loss, gradient and correct-prediction count over `rows` of `data`.
fn batch_loss_grad(
    params: &ModelParams,
    data: &Dataset,
    rows: &[usize],
    s: &mut Scratch,
    grad: &mut [f64],
) -> Result<(f64, usize), LearningError> {
    let scale = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    let mut correct = 0;
    for &r in rows {
        let y = data.label(r);
        let (l, pred) = example(params, data.row(r), y, s, Some(grad), scale, None)?;
        loss += l;
        correct += usize::from(pred == y);
    }
    Ok((loss * scale, correct))
}

/// Mean cross-entropy over a batch and its exact gradient, aligned with the
/// flat weight vector. `features` is row-major with one row per label.
pub fn loss_and_grad(params: &ModelParams, features: &[f64], labels: &[usize]) -> Result<(f64, Vec<f64>), LearningError> {
    if labels.is_empty() {
        return Err(LearningError::EmptyBatch);
    }
    let d = params.shape().input_dim();
    if features.len() != labels.len() * d {
        return Err(LearningError::WidthMismatch {
            expected: d,
            got: features.len() / labels.len(),
        });
    }
    let mut s = Scratch::new(params);
    let mut grad = vec![0.0; params.weights().len()];
    let scale = 1.0 / labels.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in features.chunks(d).zip(labels) {
        check_label(params, y)?;
        loss += example(params, x, y, &mut s, Some(&mut grad), scale, None)?.0;
    }
    Ok((loss * scale, grad))
}

/// Gradient of one example's loss with respect to its input features.
pub fn input_gradient(params: &ModelParams, x: &[f64], y: usize) -> Result<Vec<f64>, LearningError> {
    check_width(params, x.len())?;
    check_label(params, y)?;
    let mut s = Scratch::new(params);
    let mut dx = Vec::with_capacity(x.len());
    example(params, x, y, &mut s, None, 1.0, Some(&mut dx))?;
    Ok(dx)
}

/// `w <- w - lr * grad`.
pub fn sgd_step(params: &mut ModelParams, grad: &[f64], learning_rate: f64) {
    for (w, g) in params.weights_mut().iter_mut().zip(grad) {
        *w -= learning_rate * g;
    }
}

/// Mini-batch SGD. Each epoch reshuffles the rows with an RNG seeded from
/// `cfg.seed`; the last short batch is kept. Returns the trained parameters
/// and the loss/accuracy accumulated over the final epoch.
pub fn train(params: &ModelParams, data: &Dataset, cfg: &TrainConfig) -> Result<(ModelParams, EvalMetrics), LearningError> {
    cfg.validate()?;
    check_width(params, data.dim())?;
    if data.classes() > params.shape().classes() {
        return Err(LearningError::ShapeMismatch(format!(
            "dataset has {} classes, model outputs {}",
            data.classes(),
            params.shape().classes()
        )));
    }
    let mut params = params.clone();
    let mut rng = seeded(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; params.weights().len()];
    let mut s = Scratch::new(&params);
    let mut metrics = EvalMetrics {
        loss: 0.0,
        accuracy: 0.0,
    };
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let (loss, c) = batch_loss_grad(&params, data, batch, &mut s, &mut grad)?;
            loss_sum += loss * batch.len() as f64;
            correct += c;
            sgd_step(&mut params, &grad, cfg.learning_rate);
        }
        metrics = EvalMetrics {
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        };
    }
    if let Some(i) = params.weights().iter().position(|w| !w.is_finite()) {
        let layer = (0..params.shape().layer_count())
            .find(|&l| params.shape().layer_ranges(l).1.end > i)
            .unwrap_or(0);
        return Err(LearningError::Numeric { layer });
    }
    Ok((params, metrics))
}

/// Predicted class for one row; ties go to the lowest class index.
pub fn predict(params: &ModelParams, x: &[f64]) -> Result<usize, LearningError> {
    check_width(params, x.len())?;
    let mut s = Scratch::new(params);
    forward(params, x, &mut s)?;
    Ok(argmax(&s.outs[params.shape().layer_count() - 1]))
}

pub fn evaluate(params: &ModelParams, data: &Dataset) -> Result<EvalMetrics, LearningError> {
    check_width(params, data.dim())?;
    let mut s = Scratch::new(params);
    let mut loss = 0.0;
    let mut correct = 0;
    for r in 0..data.len() {
        let y = data.label(r);
        check_label(params, y)?;
        let (l, pred) = example(params, data.row(r), y, &mut s, None, 1.0, None)?;
        loss += l;
        correct += usize::from(pred == y);
    }
    let n = data.len() as f64;
    Ok(EvalMetrics {
        loss: loss / n,
        accuracy: correct as f64 / n,
    })
}
