use std::ops::Range;

use rand::Rng;

use super::LearningError;
use crate::rng::seeded;

/// Layer widths `[input, hidden?, classes]`. Hidden layers use ReLU and the
/// output layer is softmax.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelShape {
    dims: Vec<usize>,
}

impl ModelShape {
    pub fn new(dims: Vec<usize>) -> Result<Self, LearningError> {
        if !(2..=3).contains(&dims.len()) {
            return Err(LearningError::InvalidShape(format!(
                "expected 2 or 3 layer dims (softmax regression or one hidden layer), got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(LearningError::InvalidShape("layer dims must be positive".into()));
        }
        Ok(Self { dims })
    }

    pub fn softmax_regression(input: usize, classes: usize) -> Result<Self, LearningError> {
        Self::new(vec![input, classes])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn classes(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Offsets of layer `l`'s weight matrix and bias vector in the flat
    /// parameter vector.
    pub fn layer_ranges(&self, l: usize) -> (Range<usize>, Range<usize>) {
        let mut off = 0;
        for w in self.dims.windows(2).take(l) {
            off += w[0] * w[1] + w[1];
        }
        let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
        let w = off..off + fan_in * fan_out;
        let b = w.end..w.end + fan_out;
        (w, b)
    }

    /// Every tensor (weights and biases, layer-major) as a range.
    pub fn tensor_ranges(&self) -> Vec<Range<usize>> {
        (0..self.layer_count())
            .flat_map(|l| {
                let (w, b) = self.layer_ranges(l);
                [w, b]
            })
            .collect()
    }
}

/// Flat weights in layer order `W1, b1, W2, b2, ...`; each `W` is row-major
/// `fan_in x fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    shape: ModelShape,
    weights: Vec<f64>,
}

impl ModelParams {
    pub fn new(shape: ModelShape, weights: Vec<f64>) -> Result<Self, LearningError> {
        let expected = shape.param_count();
        if weights.len() != expected {
            return Err(LearningError::WeightCount {
                expected,
                got: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(LearningError::NonFiniteWeight(i));
        }
        Ok(Self { shape, weights })
    }

    pub fn zeros(shape: ModelShape) -> Self {
        let n = shape.param_count();
        Self {
            shape,
            weights: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    /// Replace the weights, keeping the shape.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, LearningError> {
        Self::new(self.shape.clone(), weights)
    }

    pub fn max_abs_diff(&self, other: &ModelParams) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_model(shape: &ModelShape, seed: u64) -> ModelParams {
    let mut rng = seeded(seed);
    let mut params = ModelParams::zeros(shape.clone());
    for l in 0..shape.layer_count() {
        let (w, _) = shape.layer_ranges(l);
        let (fan_in, fan_out) = (shape.dims()[l], shape.dims()[l + 1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in &mut params.weights[w] {
            *v = rng.random_range(-limit..limit);
        }
    }
    params
}
