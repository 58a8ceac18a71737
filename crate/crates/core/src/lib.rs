//! Mental-health post classification toolkit: corpus curation, text
//! processing, from-scratch LSTM and transformer classifiers, evaluation and
//! behavioral perturbation tests.

pub mod analysis;
pub mod behave;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod seed;
pub mod synth;
pub mod textproc;
pub mod train;

pub use corpus::{CuratedPost, DatasetSplit, Label, RawPost, SplitRatios};
pub use error::{Error, Result};
pub use eval::{ClassReport, ConfusionMatrix};
pub use model::{Checkpoint, Classifier, Example, InputKind, ModelConfig, ModelInput, ModelKind, ParameterSet};
pub use textproc::{RootFormSet, StopWordList, SynonymLexicon, Vocabulary};
pub use train::{TrainConfig, TrainOutcome};
