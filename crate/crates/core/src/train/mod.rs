//! Mini-batch training with Adam, optional global-norm clipping, dropout in
//! training steps only, and best-validation model selection.

mod optim;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use optim::{adam_step, clip_gradients, AdamConfig, AdamState};

use crate::corpus::{CuratedPost, DatasetSplit};
use crate::error::{Error, Result};
use crate::model::{encode_input, model_gradients, Classifier, Example, InputKind, ModelConfig, ModelKind};
use crate::seed;
use crate::textproc::{tokenize, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global-norm clip threshold; `None` disables clipping.
    pub clip_max_norm: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn lstm() -> Self {
        Self {
            learning_rate: 0.005,
            epochs: 25,
            batch_size: 32,
            clip_max_norm: Some(5.0),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 42,
        }
    }

    /// Fine-tuning schedule: 10 epochs at 1e-5, no clipping.
    pub fn transformer() -> Self {
        Self {
            learning_rate: 1e-5,
            epochs: 10,
            clip_max_norm: None,
            ..Self::lstm()
        }
    }

    /// Same schedule with the learning rate raised to 1e-3 for training a
    /// toy encoder from its initialization.
    pub fn transformer_desk() -> Self {
        Self {
            learning_rate: 1e-3,
            ..Self::transformer()
        }
    }

    pub fn for_model(kind: ModelKind, input: InputKind) -> Self {
        match kind {
            ModelKind::Lstm => Self::lstm(),
            ModelKind::Transformer => {
                let batch_size = if input == InputKind::Titles { 32 } else { 16 };
                Self {
                    batch_size,
                    ..Self::transformer()
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be at least 1");
        }
        if let Some(c) = self.clip_max_norm {
            if !(c > 0.0) {
                return bad("clip_max_norm must be positive");
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return bad("adam betas must lie in [0, 1) and epsilon must be positive");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation accuracy.
    pub best: Classifier,
    pub best_epoch: usize,
    /// Parameters after the final epoch.
    pub last: Classifier,
    pub history: Vec<EpochRecord>,
    /// Mean loss of the very first mini-batch, before any update.
    pub first_batch_loss: f64,
    pub steps: usize,
}

impl TrainOutcome {
    pub fn history_csv(&self) -> String {
        history_csv(&self.history)
    }
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_acc\n");
    for r in history {
        writeln!(out, "{},{:.6},{:.6}", r.epoch, r.train_loss, r.val_acc).unwrap();
    }
    out
}

pub fn accuracy(model: &Classifier, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Empty);
    }
    let mut hits = 0usize;
    for ex in examples {
        if model.predict(&ex.input)? == ex.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / examples.len() as f64)
}

const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

/// Runs `epochs × ⌈N / batch_size⌉` optimizer steps.
pub fn train(model: Classifier, train: &[Example], validation: &[Example], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Empty);
    }
    let Classifier { config, mut params } = model;
    config.check_params(&params)?;
    let adam = cfg.adam();
    let mut state = AdamState::new(&params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Classifier)> = None;
    let mut first_batch_loss = None;
    let mut steps = 0usize;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut seed::rng_for(cfg.seed, &[SHUFFLE_STREAM, epoch as u64]));
        let mut loss_sum = 0.0;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<Example> = chunk.iter().map(|&i| train[i].clone()).collect();
            let dropout_seed = seed::derive(cfg.seed, &[DROPOUT_STREAM, epoch as u64, step as u64]);
            let diverged = || Error::Diverged {
                epoch,
                step,
                last_good: Box::new(params.clone()),
            };
            let (loss, mut grads) = match model_gradients(&batch, &config, &params, Some(dropout_seed)) {
                Ok(v) => v,
                Err(Error::Numeric(_)) => return Err(diverged()),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || !grads.is_finite() {
                return Err(diverged());
            }
            first_batch_loss.get_or_insert(loss);
            if let Some(max_norm) = cfg.clip_max_norm {
                clip_gradients(&mut grads, max_norm);
            }
            adam_step(&mut params, &grads, &mut state, &adam)?;
            loss_sum += loss * batch.len() as f64;
            steps += 1;
        }
        let current = Classifier {
            config: config.clone(),
            params: params.clone(),
        };
        let val_acc = accuracy(&current, validation)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_acc,
        });
        if best.as_ref().is_none_or(|(acc, _, _)| val_acc > *acc) {
            best = Some((val_acc, epoch, current));
        }
    }
    let (_, best_epoch, best) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best,
        best_epoch,
        last: Classifier { config, params },
        history,
        first_batch_loss: first_batch_loss.expect("at least one step"),
        steps,
    })
}

/// Token sequences of the fields an input kind reads, in post order.
pub fn input_tokens(posts: &[CuratedPost], kind: InputKind) -> Vec<Vec<String>> {
    posts
        .iter()
        .map(|p| match kind {
            InputKind::Posts => tokenize(&p.body),
            InputKind::Titles => tokenize(&p.title),
            InputKind::PostsTitles => {
                let mut t = tokenize(&p.title);
                t.extend(tokenize(&p.body));
                t
            }
        })
        .collect()
}

pub fn encode_posts(posts: &[CuratedPost], kind: InputKind, vocab: &Vocabulary, config: &ModelConfig) -> Result<Vec<Example>> {
    posts
        .iter()
        .map(|p| {
            let input = encode_input(&tokenize(&p.title), &tokenize(&p.body), kind, vocab, config)?;
            Ok(Example {
                input,
                label: p.label.code(),
            })
        })
        .collect()
}

/// Everything a full training run produces.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub vocab: Vocabulary,
    pub input_kind: InputKind,
    pub outcome: TrainOutcome,
}

/// Builds the vocabulary on the training split, sizes the embedding table to
/// it, initializes the model with the run seed and trains.
///
/// `model_config.vocab_size` is overwritten with the vocabulary's row count.
pub fn train_model(
    split: &DatasetSplit,
    input_kind: InputKind,
    min_frequency: usize,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<TrainedModel> {
    let vocab = Vocabulary::build(&input_tokens(&split.train, input_kind), min_frequency)?;
    let config = ModelConfig {
        vocab_size: vocab.embedding_rows(),
        ..model_config.clone()
    };
    let model = Classifier::init(config.clone(), seed::derive(train_config.seed, &[0]))?;
    let train_ex = encode_posts(&split.train, input_kind, &vocab, &config)?;
    let val_ex = encode_posts(&split.validation, input_kind, &vocab, &config)?;
    let outcome = train(model, &train_ex, &val_ex, train_config)?;
    Ok(TrainedModel {
        vocab,
        input_kind,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelInput;

    fn tiny() -> ModelConfig {
        ModelConfig {
            embedding_dim: 4,
            hidden_dim: 6,
            ..ModelConfig::lstm(12, 4)
        }
    }

    fn data(n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| Example {
                input: ModelInput::Sequence(vec![2 + (i % 6) as u32, 9, 0, 0]),
                label: i % 6,
            })
            .collect()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 5,
            ..TrainConfig::lstm()
        }
    }

    #[test]
    fn step_count_and_determinism() {
        let model = Classifier::init(tiny(), 3).unwrap();
        let a = train(model.clone(), &data(23), &data(6), &cfg()).unwrap();
        assert_eq!(a.steps, 3 * 5);
        assert_eq!(a.history.len(), 3);
        assert_eq!(a.history.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![1, 2, 3]);
        let b = train(model, &data(23), &data(6), &cfg()).unwrap();
        assert_eq!(a.history_csv(), b.history_csv());
        assert_eq!(a.last, b.last);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let model = Classifier::init(tiny(), 3).unwrap();
        let c = TrainConfig {
            learning_rate: 0.0,
            ..cfg()
        };
        let out = train(model.clone(), &data(12), &data(6), &c).unwrap();
        assert_eq!(out.last.params, model.params);
    }

    #[test]
    fn learns_trivial_mapping() {
        let config = ModelConfig {
            hidden_dim: 16,
            dropout_prob: 0.0,
            ..tiny()
        };
        let model = Classifier::init(config, 3).unwrap();
        let c = TrainConfig {
            epochs: 40,
            batch_size: 6,
            ..TrainConfig::lstm()
        };
        let out = train(model, &data(36), &data(6), &c).unwrap();
        assert_eq!(out.history.last().unwrap().val_acc, 1.0);
        assert!(out.history.last().unwrap().train_loss < out.history[0].train_loss);
    }

    #[test]
    fn divergence_reports_last_good_parameters() {
        let mut model = Classifier::init(tiny(), 3).unwrap();
        model.params.tensors_mut()[0].values[2 * 4] = f64::NAN;
        let err = train(model.clone(), &data(6), &data(6), &cfg()).unwrap_err();
        match err {
            Error::Diverged { epoch, step, last_good } => {
                assert_eq!((epoch, step), (1, 0));
                // NaN != NaN, so compare the printed form
                assert_eq!(format!("{last_good:?}"), format!("{:?}", model.params));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { epochs: 0, ..cfg() }.validate().is_err());
        assert!(TrainConfig { learning_rate: -1.0, ..cfg() }.validate().is_err());
        assert!(TrainConfig { clip_max_norm: Some(0.0), ..cfg() }.validate().is_err());
        assert_eq!(TrainConfig::for_model(ModelKind::Transformer, InputKind::Posts).batch_size, 16);
        assert_eq!(TrainConfig::transformer_desk().learning_rate, 1e-3);
    }
}
