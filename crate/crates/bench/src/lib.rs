//! Shared inputs for the kernel benchmarks.

use mindgauge::synth::{planted_corpus, SynthConfig};
use mindgauge::train::{encode_posts, input_tokens};
use mindgauge::{CuratedPost, Example, InputKind, ModelConfig, Vocabulary};

pub fn corpus(docs_per_class: usize) -> Vec<CuratedPost> {
    planted_corpus(&SynthConfig {
        docs_per_class,
        ..SynthConfig::default()
    })
}

/// Posts encoded for `base` with the vocabulary filled in.
pub fn examples(posts: &[CuratedPost], base: ModelConfig) -> (ModelConfig, Vec<Example>) {
    let tokens = input_tokens(posts, InputKind::Posts);
    let vocab = Vocabulary::build(&tokens, 1).expect("vocabulary");
    let config = ModelConfig {
        vocab_size: vocab.embedding_rows(),
        ..base
    };
    let ex = encode_posts(posts, InputKind::Posts, &vocab, &config).expect("encode");
    (config, ex)
}

/// A long free-text post for tokenizer timing.
pub fn long_text(words: usize) -> String {
    let pool = [
        "I've", "been", "feeling", "SO", "anxious", "lately,", "can't", "focus...", "https://x.io/a",
        "@someone", "depression!!", "mood", "swings", "&", "don't", "sleep", "well.",
    ];
    (0..words).map(|i| pool[i % pool.len()]).collect::<Vec<_>>().join(" ")
}
