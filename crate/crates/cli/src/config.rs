//! Flat key/value run configuration. Every key is optional; command-line
//! flags override file values, and library defaults fill the rest.

use std::path::Path;

use mindgauge::behave::PerturbationMode;
use mindgauge::corpus::{SplitRatios, MIN_TOKENS, MIN_UPVOTES};
use mindgauge::{InputKind, ModelConfig, ModelKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,

    pub min_upvotes: Option<i64>,
    pub min_tokens: Option<usize>,

    pub train_ratio: Option<f64>,
    pub validation_ratio: Option<f64>,
    pub test_ratio: Option<f64>,

    pub model: Option<ModelKind>,
    pub input_kind: Option<InputKind>,
    pub min_frequency: Option<usize>,
    pub max_len: Option<usize>,
    pub embedding_dim: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub num_layers: Option<usize>,
    pub dropout: Option<f64>,
    pub model_dim: Option<usize>,
    pub num_heads: Option<usize>,
    pub feedforward_dim: Option<usize>,
    pub num_blocks: Option<usize>,
    pub zero_head: Option<bool>,

    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    /// 0 disables clipping.
    pub clip_max_norm: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,

    pub modes: Option<Vec<PerturbationMode>>,
    pub fractions: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = crate::io::read_text(path)?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn ratios(&self) -> SplitRatios {
        let d = SplitRatios::default();
        SplitRatios {
            train: self.train_ratio.unwrap_or(d.train),
            validation: self.validation_ratio.unwrap_or(d.validation),
            test: self.test_ratio.unwrap_or(d.test),
        }
    }

    pub fn min_upvotes(&self) -> i64 {
        self.min_upvotes.unwrap_or(MIN_UPVOTES)
    }

    pub fn min_tokens(&self) -> usize {
        self.min_tokens.unwrap_or(MIN_TOKENS)
    }

    pub fn model_kind(&self) -> ModelKind {
        self.model.unwrap_or(ModelKind::Lstm)
    }

    pub fn input(&self) -> InputKind {
        self.input_kind.unwrap_or(InputKind::PostsTitles)
    }

    pub fn min_frequency(&self) -> usize {
        self.min_frequency.unwrap_or(1)
    }

    /// Model hyperparameters; `vocab_size` is filled in at training time.
    pub fn model_config(&self) -> ModelConfig {
        let max_len = self.max_len.unwrap_or_else(|| self.input().default_max_len());
        let base = match self.model_kind() {
            ModelKind::Lstm => ModelConfig::lstm(0, max_len),
            ModelKind::Transformer => ModelConfig::transformer(0, max_len),
        };
        ModelConfig {
            embedding_dim: self.embedding_dim.unwrap_or(base.embedding_dim),
            hidden_dim: self.hidden_dim.unwrap_or(base.hidden_dim),
            num_layers: self.num_layers.unwrap_or(base.num_layers),
            dropout_prob: self.dropout.unwrap_or(base.dropout_prob),
            model_dim: self.model_dim.unwrap_or(base.model_dim),
            num_heads: self.num_heads.unwrap_or(base.num_heads),
            feedforward_dim: self.feedforward_dim.unwrap_or(base.feedforward_dim),
            num_blocks: self.num_blocks.unwrap_or(base.num_blocks),
            zero_head: self.zero_head.unwrap_or(base.zero_head),
            ..base
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let base = TrainConfig::for_model(self.model_kind(), self.input());
        TrainConfig {
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            epochs: self.epochs.unwrap_or(base.epochs),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            clip_max_norm: match self.clip_max_norm {
                Some(0.0) => None,
                Some(c) => Some(c),
                None => base.clip_max_norm,
            },
            beta1: self.beta1.unwrap_or(base.beta1),
            beta2: self.beta2.unwrap_or(base.beta2),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            seed: self.seed(),
        }
    }

    /// Behavioral modes; the default is all four.
    pub fn modes(&self) -> Vec<PerturbationMode> {
        self.modes.clone().unwrap_or_else(|| PerturbationMode::ALL.to_vec())
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.fractions
            .clone()
            .unwrap_or_else(|| mindgauge::behave::TESTSET_FRACTIONS.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys_and_rejects_unknown_ones() {
        let c: RunConfig = toml::from_str(
            "model = \"transformer\"\ninput_kind = \"posts+titles\"\nlearning_rate = 1e-3\nmodes = [\"remove_label\"]\n",
        )
        .unwrap();
        assert_eq!(c.model_kind(), ModelKind::Transformer);
        assert_eq!(c.input(), InputKind::PostsTitles);
        assert_eq!(c.train_config().learning_rate, 1e-3);
        assert_eq!(c.train_config().batch_size, 16);
        assert_eq!(c.modes(), vec![PerturbationMode::RemoveLabel]);
        assert!(toml::from_str::<RunConfig>("colour = 3\n").is_err());
    }

    #[test]
    fn zero_clip_disables_clipping() {
        let c = RunConfig {
            clip_max_norm: Some(0.0),
            ..Default::default()
        };
        assert_eq!(c.train_config().clip_max_norm, None);
        assert_eq!(RunConfig::default().train_config().clip_max_norm, Some(5.0));
    }

    #[test]
    fn shipped_configs_parse() {
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");
        for name in ["lstm.toml", "transformer.toml", "transformer-desk.toml"] {
            let c = RunConfig::load(&Path::new(dir).join(name)).unwrap();
            ModelConfig { vocab_size: 1, ..c.model_config() }.validate().unwrap();
            c.train_config().validate().unwrap();
        }
    }
}
