//! Seeded planted-keyword corpus for smoke tests and benchmarks.
//!
//! Every illness post carries one of its class keywords; about half also
//! carry a weaker class cue. `none` posts carry no keyword and sometimes the
//! word "illness".

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{CuratedPost, Label};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub docs_per_class: usize,
    /// Inclusive body length range in tokens.
    pub body_len: (usize, usize),
    pub title_len: (usize, usize),
    /// Chance that a post carries a class cue word.
    pub cue_prob: f64,
    /// Chance that an illness title repeats the class keyword.
    pub title_keyword_prob: f64,
    /// Chance that a `none` body contains "illness".
    pub generic_in_none: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            docs_per_class: 100,
            body_len: (12, 24),
            title_len: (3, 6),
            cue_prob: 0.5,
            title_keyword_prob: 0.3,
            generic_in_none: 0.25,
            seed: 0,
        }
    }
}

pub fn keywords(label: Label) -> &'static [&'static str] {
    match label {
        Label::Adhd => &["adhd"],
        Label::Anxiety => &["anxiety", "anxious", "anxiou", "anxiet"],
        Label::Bipolar => &["bipolar"],
        Label::Depression => &["depression", "depressed", "depress"],
        Label::Ptsd => &["ptsd"],
        Label::None => &[],
    }
}

pub fn cues(label: Label) -> &'static [&'static str] {
    match label {
        Label::Adhd => &["focus", "restless", "forget"],
        Label::Anxiety => &["panic", "nervous", "worried"],
        Label::Bipolar => &["manic", "mood", "energy"],
        Label::Depression => &["hopeless", "empty", "crying"],
        Label::Ptsd => &["trauma", "flashbacks", "afraid"],
        Label::None => &["guitar", "concert", "election", "experiment", "vacation", "dataset"],
    }
}

const FILLER: &[&str] = &[
    "the", "a", "and", "i", "my", "to", "of", "it", "is", "was", "for", "with", "this", "that", "at", "so", "but",
    "day", "night", "week", "time", "life", "people", "friend", "family", "home", "work", "job", "school", "thing",
    "think", "feel", "know", "want", "need", "help", "talk", "walk", "sleep", "eat", "good", "bad", "new", "old",
    "really", "maybe", "often", "sometimes", "today", "yesterday", "just", "still", "again", "lately",
];

fn pick(rng: &mut seed::Rng, words: &[&str]) -> String {
    words.choose(rng).expect("non-empty word list").to_string()
}

fn filler(rng: &mut seed::Rng, len: (usize, usize)) -> Vec<String> {
    let n = rng.gen_range(len.0..=len.1);
    (0..n).map(|_| pick(rng, FILLER)).collect()
}

fn insert_random(rng: &mut seed::Rng, words: &mut Vec<String>, w: String) {
    let at = rng.gen_range(0..=words.len());
    words.insert(at, w);
}

/// `docs_per_class` posts per label, ids `syn-<label>-<nnn>`, in label order.
pub fn planted_corpus(cfg: &SynthConfig) -> Vec<CuratedPost> {
    let mut out = Vec::with_capacity(cfg.docs_per_class * Label::COUNT);
    for label in Label::ALL {
        let mut rng = seed::rng_for(cfg.seed, &[label.code() as u64]);
        for i in 0..cfg.docs_per_class {
            let mut body = filler(&mut rng, cfg.body_len);
            let mut title = filler(&mut rng, cfg.title_len);
            if label.is_illness() {
                let kw = pick(&mut rng, keywords(label));
                insert_random(&mut rng, &mut body, kw);
                if rng.gen_bool(cfg.title_keyword_prob) {
                    let kw = pick(&mut rng, keywords(label));
                    insert_random(&mut rng, &mut title, kw);
                }
            } else if rng.gen_bool(cfg.generic_in_none) {
                insert_random(&mut rng, &mut body, "illness".into());
            }
            if rng.gen_bool(cfg.cue_prob) {
                let cue = pick(&mut rng, cues(label));
                insert_random(&mut rng, &mut body, cue);
            }
            let token_count = body.len();
            out.push(CuratedPost {
                id: format!("syn-{}-{i:03}", label.as_str()),
                title: title.join(" "),
                body: body.join(" "),
                label,
                upvotes: 11 + (i as i64 % 50),
                token_count,
            });
        }
    }
    out
}
