//! JSON checkpoint: a small header, the model config, the vocabulary in id
//! order and every named parameter array.
//!
//! ```text
//! {"format":"mindgauge-checkpoint","version":1,
//!  "config":{...},"input_kind":"posts","min_frequency":2,
//!  "vocabulary":["<pad>","<unk>",...],
//!  "params":[{"name":"embedding","shape":[V,E],"values":[...]}, ...]}
//! ```

use serde::{Deserialize, Serialize};

use super::{Classifier, InputKind, ModelConfig, ParameterSet};
use crate::error::{Error, Result};
use crate::textproc::Vocabulary;

pub const CHECKPOINT_FORMAT: &str = "mindgauge-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub input_kind: InputKind,
    pub min_frequency: usize,
    pub vocabulary: Vec<String>,
    pub params: ParameterSet,
}

impl Checkpoint {
    pub fn new(model: &Classifier, vocab: &Vocabulary, input_kind: InputKind) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_owned(),
            version: CHECKPOINT_VERSION,
            config: model.config.clone(),
            input_kind,
            min_frequency: vocab.min_frequency(),
            vocabulary: vocab.tokens().to_vec(),
            params: model.params.clone(),
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec(self)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(bytes)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        Ok(ck)
    }

    /// Splits into a validated model and its vocabulary.
    pub fn into_parts(self) -> Result<(Classifier, Vocabulary, InputKind)> {
        let vocab = Vocabulary::from_tokens(self.vocabulary, self.min_frequency)?;
        if vocab.embedding_rows() != self.config.vocab_size {
            return Err(Error::shape(format!(
                "vocabulary needs {} embedding rows, config has {}",
                vocab.embedding_rows(),
                self.config.vocab_size
            )));
        }
        let model = Classifier::new(self.config, self.params)?;
        Ok((model, vocab, self.input_kind))
    }
}
