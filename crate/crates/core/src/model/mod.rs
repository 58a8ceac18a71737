//! From-scratch classifiers: a stacked LSTM baseline and a small transformer
//! encoder that reads title/post pairs.
//!
//! Both architectures keep their weights in a [`ParameterSet`] with a fixed,
//! config-derived layout, and both expose a cached forward pass plus a
//! hand-written backward pass. The gradient tests in this module and in the
//! acceptance suite compare every parameter against central differences.

mod checkpoint;
mod dropout;
pub(crate) mod linalg;
mod loss;
pub mod lstm;
mod pair;
mod params;
pub mod transformer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use dropout::{dropout, dropout_mask, Mode};
pub use loss::{argmax, softmax, softmax_cross_entropy};
pub use pair::{build_pair_input, PairInput};
pub use params::{ParameterSet, Tensor};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::seed;
use crate::textproc::{fit_length, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lstm,
    Transformer,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Transformer => "transformer",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(ModelKind::Lstm),
            "transformer" => Ok(ModelKind::Transformer),
            _ => Err(Error::InvalidConfig(format!("unknown model kind `{s}`"))),
        }
    }
}

/// Which text fields feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputKind {
    #[serde(rename = "posts")]
    Posts,
    #[serde(rename = "titles")]
    Titles,
    #[serde(rename = "posts+titles")]
    PostsTitles,
}

impl InputKind {
    pub const ALL: [InputKind; 3] = [InputKind::Posts, InputKind::Titles, InputKind::PostsTitles];

    pub fn as_str(self) -> &'static str {
        match self {
            InputKind::Posts => "posts",
            InputKind::Titles => "titles",
            InputKind::PostsTitles => "posts+titles",
        }
    }

    /// 512 slots for anything carrying a post, 35 for titles alone.
    pub fn default_max_len(self) -> usize {
        match self {
            InputKind::Titles => 35,
            _ => 512,
        }
    }
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        InputKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown input kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Embedding rows, including the begin and separator markers.
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub dropout_prob: f64,
    pub num_classes: usize,
    pub max_len: usize,
    pub model_dim: usize,
    pub num_heads: usize,
    pub feedforward_dim: usize,
    pub num_blocks: usize,
    /// Start the classification head at exactly zero.
    #[serde(default)]
    pub zero_head: bool,
}

impl ModelConfig {
    pub fn lstm(vocab_size: usize, max_len: usize) -> Self {
        Self {
            kind: ModelKind::Lstm,
            vocab_size,
            embedding_dim: 100,
            hidden_dim: 256,
            num_layers: 2,
            dropout_prob: 0.5,
            num_classes: Label::COUNT,
            max_len,
            model_dim: 64,
            num_heads: 4,
            feedforward_dim: 128,
            num_blocks: 2,
            zero_head: false,
        }
    }

    pub fn transformer(vocab_size: usize, max_len: usize) -> Self {
        Self {
            kind: ModelKind::Transformer,
            dropout_prob: 0.3,
            ..Self::lstm(vocab_size, max_len)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.vocab_size == 0 || self.num_classes == 0 || self.max_len == 0 {
            return bad("vocab_size, num_classes and max_len must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return bad("dropout_prob must lie in [0, 1)");
        }
        match self.kind {
            ModelKind::Lstm => {
                if self.embedding_dim == 0 || self.hidden_dim == 0 || self.num_layers == 0 {
                    return bad("lstm dimensions must be positive");
                }
            }
            ModelKind::Transformer => {
                if self.model_dim == 0 || self.num_heads == 0 || self.feedforward_dim == 0 || self.num_blocks == 0 {
                    return bad("transformer dimensions must be positive");
                }
                if !self.model_dim.is_multiple_of(self.num_heads) {
                    return bad("model_dim must be divisible by num_heads");
                }
                if self.max_len < 3 {
                    return bad("transformer max_len must hold the markers");
                }
            }
        }
        Ok(())
    }

    /// Parameter names and shapes, in storage order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        match self.kind {
            ModelKind::Lstm => lstm::layout(self),
            ModelKind::Transformer => transformer::layout(self),
        }
    }

    pub fn check_params(&self, params: &ParameterSet) -> Result<()> {
        let layout = self.layout();
        if layout.len() != params.len() {
            return Err(Error::shape(format!(
                "expected {} tensors, got {}",
                layout.len(),
                params.len()
            )));
        }
        for ((name, shape), t) in layout.iter().zip(params.tensors()) {
            if *name != t.name || *shape != t.shape || t.values.len() != shape.iter().product::<usize>() {
                return Err(Error::shape(format!(
                    "expected `{name}` {shape:?}, got `{}` {:?}",
                    t.name, t.shape
                )));
            }
        }
        Ok(())
    }
}

/// Encoded model input, matching the architecture it is meant for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelInput {
    Sequence(Vec<u32>),
    Pair(PairInput),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub input: ModelInput,
    pub label: usize,
}

/// Builds the input for an already tokenized post.
///
/// The LSTM sees `title [SEP] post` for the combined kind; the transformer
/// sees a proper sequence pair. Single-field kinds become single segments.
pub fn encode_input(
    title: &[impl AsRef<str>],
    body: &[impl AsRef<str>],
    kind: InputKind,
    vocab: &Vocabulary,
    config: &ModelConfig,
) -> Result<ModelInput> {
    let title_ids = vocab.encode(title);
    let body_ids = vocab.encode(body);
    match config.kind {
        ModelKind::Lstm => {
            let ids = match kind {
                InputKind::Posts => body_ids,
                InputKind::Titles => title_ids,
                InputKind::PostsTitles => {
                    let mut ids = title_ids;
                    ids.push(vocab.sep_id());
                    ids.extend(body_ids);
                    ids
                }
            };
            Ok(ModelInput::Sequence(fit_length(ids, config.max_len)))
        }
        ModelKind::Transformer => {
            let (a, b) = match kind {
                InputKind::Posts => (Vec::new(), body_ids),
                InputKind::Titles => (Vec::new(), title_ids),
                InputKind::PostsTitles => (title_ids, body_ids),
            };
            let pair = build_pair_input(&a, &b, config.max_len, vocab.begin_id(), vocab.sep_id())?;
            Ok(ModelInput::Pair(pair))
        }
    }
}

/// A configured architecture together with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub config: ModelConfig,
    pub params: ParameterSet,
}

impl Classifier {
    pub fn new(config: ModelConfig, params: ParameterSet) -> Result<Self> {
        config.validate()?;
        config.check_params(&params)?;
        Ok(Self { config, params })
    }

    /// Seeded initialization: uniform(±0.08) for the LSTM, normal with
    /// std `1/sqrt(model_dim)` for the transformer.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed);
        let params = match config.kind {
            ModelKind::Lstm => lstm::init(&config, &mut rng),
            ModelKind::Transformer => transformer::init(&config, &mut rng),
        };
        Ok(Self { config, params })
    }

    pub fn forward(&self, input: &ModelInput, mode: Mode) -> Result<Vec<f64>> {
        forward_unchecked(input, &self.config, &self.params, mode)
    }

    pub fn predict(&self, input: &ModelInput) -> Result<usize> {
        Ok(argmax(&self.forward(input, Mode::Eval)?))
    }
}

fn forward_unchecked(input: &ModelInput, config: &ModelConfig, params: &ParameterSet, mode: Mode) -> Result<Vec<f64>> {
    match (config.kind, input) {
        (ModelKind::Lstm, ModelInput::Sequence(ids)) => {
            Ok(lstm::forward_cached(ids, config, params, mode)?.0)
        }
        (ModelKind::Transformer, ModelInput::Pair(pair)) => {
            Ok(transformer::forward_cached(pair, config, params, mode)?.0)
        }
        _ => Err(Error::shape(format!("{} model given the wrong input form", config.kind))),
    }
}

/// Loss and parameter gradients for one example, accumulated into `grads`.
pub fn example_gradients(
    example: &Example,
    config: &ModelConfig,
    params: &ParameterSet,
    mode: Mode,
    grads: &mut ParameterSet,
) -> Result<f64> {
    match (config.kind, &example.input) {
        (ModelKind::Lstm, ModelInput::Sequence(ids)) => {
            let (logits, cache) = lstm::forward_cached(ids, config, params, mode)?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, example.label)?;
            lstm::backward(&cache, &dlogits, config, params, grads);
            Ok(loss)
        }
        (ModelKind::Transformer, ModelInput::Pair(pair)) => {
            let (logits, cache) = transformer::forward_cached(pair, config, params, mode)?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, example.label)?;
            transformer::backward(&cache, &dlogits, config, params, grads);
            Ok(loss)
        }
        _ => Err(Error::shape(format!("{} model given the wrong input form", config.kind))),
    }
}

/// Mean batch loss and its gradient with respect to every parameter.
///
/// With `dropout_seed = Some(s)` example `i` draws its dropout mask from a
/// stream derived from `(s, i)`, so the result is a pure function of the
/// arguments. `None` runs every example in eval mode.
pub fn model_gradients(
    batch: &[Example],
    config: &ModelConfig,
    params: &ParameterSet,
    dropout_seed: Option<u64>,
) -> Result<(f64, ParameterSet)> {
    if batch.is_empty() {
        return Err(Error::Empty);
    }
    config.check_params(params)?;
    let mut grads = params.zeros_like();
    let mut total = 0.0;
    for (i, ex) in batch.iter().enumerate() {
        let mode = match dropout_seed {
            Some(s) => Mode::Train {
                seed: seed::derive(s, &[i as u64]),
            },
            None => Mode::Eval,
        };
        total += example_gradients(ex, config, params, mode, &mut grads)?;
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok((total / n, grads))
}

/// Mean loss only, for finite-difference checks and validation.
pub fn batch_loss(batch: &[Example], config: &ModelConfig, params: &ParameterSet, dropout_seed: Option<u64>) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty);
    }
    let mut total = 0.0;
    for (i, ex) in batch.iter().enumerate() {
        let mode = match dropout_seed {
            Some(s) => Mode::Train {
                seed: seed::derive(s, &[i as u64]),
            },
            None => Mode::Eval,
        };
        let logits = forward_unchecked(&ex.input, config, params, mode)?;
        total += softmax_cross_entropy(&logits, ex.label)?.0;
    }
    Ok(total / batch.len() as f64)
}
