//! Malicious and curious participants.
//!
//! Each attack acts at exactly one phase of a device's life:
//!
//! | kind               | phase    | effect                                            |
//! |--------------------|----------|---------------------------------------------------|
//! | `LabelFlip`        | DataLoad | local shard relabelled `y -> C - 1 - y`, once     |
//! | `SignFlip`         | PreSend  | outgoing weights negated                          |
//! | `NoiseInjection`   | PreSend  | outgoing weights get `N(0, sigma^2)` per entry    |
//! | `FgsmEval`         | Eval     | also reports accuracy on FGSM-perturbed test data |
//! | `HonestButCurious` | Receive  | logs metadata of every received update            |
//!
//! Poisoned devices still train honestly on whatever data they hold, and
//! PreSend poisoning never touches the sender's stored model.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::learning::{evaluate, input_gradient, Dataset, LearningError, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AdversarySpec {
    #[default]
    Honest,
    HonestButCurious,
    LabelFlip,
    SignFlip,
    NoiseInjection {
        sigma: f64,
    },
    FgsmEval {
        epsilon: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    DataLoad,
    PreSend,
    Receive,
    Eval,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("{0:?} does not poison model updates")]
    NotAnUpdateAttack(AdversarySpec),
    #[error("attack parameter must be positive, got {0}")]
    BadParameter(f64),
    #[error("label flipping needs at least 2 classes")]
    TooFewClasses,
    #[error(transparent)]
    Learning(#[from] LearningError),
}

impl AdversarySpec {
    pub fn validate(&self) -> Result<(), AdversaryError> {
        match *self {
            AdversarySpec::NoiseInjection { sigma: p } | AdversarySpec::FgsmEval { epsilon: p } => {
                if p > 0.0 && p.is_finite() {
                    Ok(())
                } else {
                    Err(AdversaryError::BadParameter(p))
                }
            }
            _ => Ok(()),
        }
    }

    /// Whether this kind changes anything at `phase`.
    pub fn acts_at(&self, phase: Phase) -> bool {
        matches!(
            (self, phase),
            (AdversarySpec::LabelFlip, Phase::DataLoad)
                | (AdversarySpec::SignFlip, Phase::PreSend)
                | (AdversarySpec::NoiseInjection { .. }, Phase::PreSend)
                | (AdversarySpec::FgsmEval { .. }, Phase::Eval)
                | (AdversarySpec::HonestButCurious, Phase::Receive)
        )
    }

    pub fn is_malicious(&self) -> bool {
        !matches!(self, AdversarySpec::Honest | AdversarySpec::HonestButCurious)
    }

    pub fn name(&self) -> &'static str {
        match self {
            AdversarySpec::Honest => "honest",
            AdversarySpec::HonestButCurious => "honest_but_curious",
            AdversarySpec::LabelFlip => "label_flip",
            AdversarySpec::SignFlip => "sign_flip",
            AdversarySpec::NoiseInjection { .. } => "noise_injection",
            AdversarySpec::FgsmEval { .. } => "fgsm_eval",
        }
    }
}

/// `y -> classes - 1 - y` on every row.
pub fn flip_labels(data: &Dataset) -> Result<Dataset, AdversaryError> {
    let c = data.classes();
    if c < 2 {
        return Err(AdversaryError::TooFewClasses);
    }
    let labels = data.labels().iter().map(|&y| c - 1 - y).collect();
    Ok(data.with_labels(labels)?)
}

/// Poisoned copy of an outgoing update.
pub fn poison_update<R: Rng + ?Sized>(params: &ModelParams, spec: &AdversarySpec, rng: &mut R) -> Result<ModelParams, AdversaryError> {
    match *spec {
        AdversarySpec::SignFlip => Ok(params.with_weights(params.weights().iter().map(|w| -w).collect())?),
        AdversarySpec::NoiseInjection { sigma } => {
            let normal = Normal::new(0.0, sigma).map_err(|_| AdversaryError::BadParameter(sigma))?;
            let noisy = params.weights().iter().map(|w| w + normal.sample(rng)).collect();
            Ok(params.with_weights(noisy)?)
        }
        other => Err(AdversaryError::NotAnUpdateAttack(other)),
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Fast gradient sign method: `x' = x + epsilon * sign(dloss/dx)` with the
/// input gradient taken exactly from `params`. `sign(0) = 0`.
pub fn fgsm_perturb(params: &ModelParams, data: &Dataset, epsilon: f64) -> Result<Dataset, AdversaryError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(AdversaryError::BadParameter(epsilon));
    }
    let mut features = Vec::with_capacity(data.features().len());
    for r in 0..data.len() {
        let x = data.row(r);
        let g = input_gradient(params, x, data.label(r))?;
        features.extend(x.iter().zip(&g).map(|(xi, gi)| xi + epsilon * sign(*gi)));
    }
    Ok(data.with_features(features)?)
}

/// Accuracy on the FGSM-perturbed copy of `data`.
pub fn adversarial_accuracy(params: &ModelParams, data: &Dataset, epsilon: f64) -> Result<f64, AdversaryError> {
    let perturbed = fgsm_perturb(params, data, epsilon)?;
    Ok(evaluate(params, &perturbed)?.accuracy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_synthetic;
    use crate::learning::{init_model, train, ModelShape, TrainConfig};
    use crate::rng::seeded;

    #[test]
    fn flip_examples() {
        let d = Dataset::new(vec![0.0; 3], vec![3, 0, 9], 1, 10).unwrap();
        assert_eq!(flip_labels(&d).unwrap().labels(), &[6, 9, 0]);
        let b = Dataset::new(vec![1.0, 2.0], vec![0, 1], 1, 2).unwrap();
        let f = flip_labels(&b).unwrap();
        assert_eq!(f.labels(), &[1, 0]);
        assert_eq!(f.features(), b.features());
        assert_eq!(flip_labels(&f).unwrap(), b);
        let single = Dataset::new(vec![1.0], vec![0], 1, 1).unwrap();
        assert_eq!(flip_labels(&single), Err(AdversaryError::TooFewClasses));
    }

    #[test]
    fn sign_flip() {
        let s = ModelShape::new(vec![1, 1]).unwrap();
        let p = ModelParams::new(s, vec![1.0, -2.0]).unwrap();
        let q = poison_update(&p, &AdversarySpec::SignFlip, &mut seeded(0)).unwrap();
        assert_eq!(q.weights(), &[-1.0, 2.0]);
        assert_eq!(poison_update(&q, &AdversarySpec::SignFlip, &mut seeded(0)).unwrap(), p);
    }

    #[test]
    fn other_kinds_do_not_poison() {
        let p = ModelParams::zeros(ModelShape::new(vec![1, 2]).unwrap());
        for spec in [AdversarySpec::Honest, AdversarySpec::LabelFlip, AdversarySpec::FgsmEval { epsilon: 0.1 }] {
            assert!(matches!(
                poison_update(&p, &spec, &mut seeded(0)),
                Err(AdversaryError::NotAnUpdateAttack(_))
            ));
        }
    }

    #[test]
    fn noise_is_centred() {
        let n = 100_000;
        let sigma = 0.5;
        let s = ModelShape::new(vec![n - 1, 1]).unwrap();
        let p = ModelParams::zeros(s);
        let q = poison_update(&p, &AdversarySpec::NoiseInjection { sigma }, &mut seeded(3)).unwrap();
        let mean: f64 = q.weights().iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 3.0 * sigma / (n as f64).sqrt(), "mean {mean}");
        let var: f64 = q.weights().iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((var.sqrt() - sigma).abs() < 0.01);
    }

    #[test]
    fn fgsm_moves_each_coordinate_by_epsilon_or_zero() {
        let s = ModelShape::new(vec![3, 2]).unwrap();
        // zero column for feature 2 gives a zero input gradient there
        let p = ModelParams::new(s, vec![1.0, -1.0, 0.5, 0.2, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let d = Dataset::new(vec![0.3, -0.2, 4.0, 1.0, 1.0, -2.0], vec![0, 1], 3, 2).unwrap();
        let eps = 1e-3;
        let adv = fgsm_perturb(&p, &d, eps).unwrap();
        for (a, b) in adv.features().iter().zip(d.features()) {
            let delta = (a - b).abs();
            assert!((delta - eps).abs() < 1e-12 || delta == 0.0);
        }
        assert_eq!(adv.row(0)[2], 4.0);
        assert_eq!(adv.row(1)[2], -2.0);
    }

    #[test]
    fn fgsm_degrades_trained_model() {
        let sep = 3.0;
        let data = make_synthetic(600, 3, 3, sep, 1).unwrap();
        let test = make_synthetic(300, 3, 3, sep, 2).unwrap();
        let shape = ModelShape::new(vec![3, 3]).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 16,
            learning_rate: 0.1,
            seed: 0,
        };
        let (p, _) = train(&init_model(&shape, 0), &data, &cfg).unwrap();
        let clean = evaluate(&p, &test).unwrap().accuracy;
        let adv = adversarial_accuracy(&p, &test, 0.5 * sep).unwrap();
        assert!(adv < clean, "adv {adv} clean {clean}");
    }

    #[test]
    fn phases() {
        assert!(AdversarySpec::LabelFlip.acts_at(Phase::DataLoad));
        assert!(!AdversarySpec::LabelFlip.acts_at(Phase::PreSend));
        assert!(AdversarySpec::SignFlip.acts_at(Phase::PreSend));
        assert!(AdversarySpec::FgsmEval { epsilon: 1.0 }.acts_at(Phase::Eval));
        assert!(AdversarySpec::HonestButCurious.acts_at(Phase::Receive));
        for ph in [Phase::DataLoad, Phase::PreSend, Phase::Receive, Phase::Eval] {
            assert!(!AdversarySpec::Honest.acts_at(ph));
        }
        assert!(AdversarySpec::NoiseInjection { sigma: 0.0 }.validate().is_err());
    }
}
