//! Behavioral tests: synonym invariance and three root-masking perturbations.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{round_half_away, CuratedPost, Label};
use crate::error::{Error, Result};
use crate::eval::{class_report, confusion_matrix, ClassReport};
use crate::model::{encode_input, Classifier, InputKind};
use crate::seed;
use crate::textproc::{contains_root, tokenize, RootFormSet, StopWordList, SynonymLexicon, Vocabulary};

pub const GENERIC_TOKEN: &str = "illness";
pub const TOKEN_FRACTION: f64 = 0.10;
pub const POST_CLAMP: (usize, usize) = (4, 30);
pub const TITLE_CLAMP: (usize, usize) = (1, 5);
pub const TESTSET_FRACTIONS: [f64; 3] = [0.10, 0.50, 1.00];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    Synonym,
    RemoveLabel,
    ReplaceGeneric,
    ReplaceRandom,
}

impl PerturbationMode {
    pub const ALL: [PerturbationMode; 4] = [PerturbationMode::Synonym, PerturbationMode::RemoveLabel, PerturbationMode::ReplaceGeneric, PerturbationMode::ReplaceRandom];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationMode::Synonym => "synonym",
            PerturbationMode::RemoveLabel => "remove_label",
            PerturbationMode::ReplaceGeneric => "replace_generic",
            PerturbationMode::ReplaceRandom => "replace_random",
        }
    }

    /// Whether posts of class `none` are perturbed in this mode.
    pub fn touches_none(self) -> bool {
        self == PerturbationMode::Synonym
    }

    fn stream(self) -> u64 {
        self as u64 + 10
    }
}

impl fmt::Display for PerturbationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerturbationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PerturbationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown perturbation mode `{s}`")))
    }
}

/// Which text field a perturbation acts on; selects the replacement clamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Post,
    Title,
}

impl Field {
    pub fn clamp(self) -> (usize, usize) {
        match self {
            Field::Post => POST_CLAMP,
            Field::Title => TITLE_CLAMP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationConfig {
    pub mode: PerturbationMode,
    pub token_fraction: f64,
    pub clamp: (usize, usize),
    pub testset_fraction: f64,
    pub seed: u64,
    pub roots: RootFormSet,
    pub generic: String,
}

impl PerturbationConfig {
    pub fn new(mode: PerturbationMode, field: Field, seed: u64) -> Self {
        Self {
            mode,
            token_fraction: TOKEN_FRACTION,
            clamp: field.clamp(),
            testset_fraction: 1.0,
            seed,
            roots: RootFormSet::default(),
            generic: GENERIC_TOKEN.to_owned(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.token_fraction > 0.0 && self.token_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!("token_fraction {} not in (0, 1]", self.token_fraction)));
        }
        if !(self.testset_fraction > 0.0 && self.testset_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "testset_fraction {} not in (0, 1]",
                self.testset_fraction
            )));
        }
        if self.clamp.0 > self.clamp.1 {
            return Err(Error::InvalidConfig(format!("clamp min {} > max {}", self.clamp.0, self.clamp.1)));
        }
        Ok(())
    }
}

/// Number of synonym replacements for `eligible` candidate positions.
pub fn replacement_count(eligible: usize, fraction: f64, clamp: (usize, usize)) -> usize {
    if eligible == 0 {
        return 0;
    }
    let k = round_half_away(fraction * eligible as f64);
    k.clamp(clamp.0, clamp.1).min(eligible)
}

/// Positions a synonym replacement may touch.
pub fn eligible_positions(
    tokens: &[String],
    roots: &RootFormSet,
    lexicon: &SynonymLexicon,
    stopwords: &StopWordList,
) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| !stopwords.contains(t) && !roots.contains_any(t) && !lexicon.lookup(t).is_empty())
        .map(|(i, _)| i)
        .collect()
}

/// Replaces a clamped 10% of the eligible tokens with a seeded synonym.
/// The class is not consulted: the label is preserved by construction.
pub fn synonym_perturb(
    tokens: &[String],
    _class: Label,
    config: &PerturbationConfig,
    lexicon: &SynonymLexicon,
    stopwords: &StopWordList,
) -> Vec<String> {
    let eligible = eligible_positions(tokens, &config.roots, lexicon, stopwords);
    let k = replacement_count(eligible.len(), config.token_fraction, config.clamp);
    let mut rng = seed::rng(config.seed);
    let mut out = tokens.to_vec();
    let mut picked: Vec<usize> = index::sample(&mut rng, eligible.len(), k).into_vec();
    picked.sort_unstable();
    for i in picked {
        let pos = eligible[i];
        let syns = lexicon.lookup(&tokens[pos]);
        out[pos] = syns.choose(&mut rng).expect("eligible tokens have synonyms").clone();
    }
    out
}

fn require_illness(class: Label) -> Result<()> {
    if class.is_illness() {
        Ok(())
    } else {
        Err(Error::NoRoots)
    }
}

/// Deletes every token that contains a root of the sample's own class.
pub fn mask_remove(tokens: &[String], class: Label, roots: &RootFormSet) -> Result<Vec<String>> {
    require_illness(class)?;
    Ok(tokens
        .iter()
        .filter(|t| !contains_root(t, roots, class))
        .cloned()
        .collect())
}

/// Replaces every own-root token with the generic token.
pub fn mask_generic(tokens: &[String], class: Label, roots: &RootFormSet, generic: &str) -> Result<Vec<String>> {
    require_illness(class)?;
    Ok(tokens
        .iter()
        .map(|t| {
            if contains_root(t, roots, class) {
                generic.to_owned()
            } else {
                t.clone()
            }
        })
        .collect())
}

/// Replaces every own-root token with a root string drawn uniformly from the
/// other classes' groups.
pub fn mask_random(tokens: &[String], class: Label, roots: &RootFormSet, seed: u64) -> Result<Vec<String>> {
    require_illness(class)?;
    let pool = roots.other_roots(class);
    let mut rng = seed::rng(seed);
    Ok(tokens
        .iter()
        .map(|t| {
            if contains_root(t, roots, class) {
                pool[rng.gen_range(0..pool.len())].to_owned()
            } else {
                t.clone()
            }
        })
        .collect())
}

/// Applies `config.mode` to one field of one post.
pub fn perturb(
    tokens: &[String],
    class: Label,
    config: &PerturbationConfig,
    lexicon: &SynonymLexicon,
    stopwords: &StopWordList,
) -> Result<Vec<String>> {
    match config.mode {
        PerturbationMode::Synonym => Ok(synonym_perturb(tokens, class, config, lexicon, stopwords)),
        PerturbationMode::RemoveLabel => mask_remove(tokens, class, &config.roots),
        PerturbationMode::ReplaceGeneric => mask_generic(tokens, class, &config.roots, &config.generic),
        PerturbationMode::ReplaceRandom => mask_random(tokens, class, &config.roots, config.seed),
    }
}

/// Shared resources of a suite run.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub modes: Vec<PerturbationMode>,
    pub fractions: Vec<f64>,
    pub seed: u64,
    pub roots: RootFormSet,
    pub lexicon: SynonymLexicon,
    pub stopwords: StopWordList,
    pub generic: String,
}

impl SuiteConfig {
    pub fn new(modes: Vec<PerturbationMode>, fractions: Vec<f64>, seed: u64) -> Self {
        Self {
            modes,
            fractions,
            seed,
            roots: RootFormSet::default(),
            lexicon: SynonymLexicon::bundled(),
            stopwords: StopWordList::bundled(),
            generic: GENERIC_TOKEN.to_owned(),
        }
    }

    fn field_config(&self, mode: PerturbationMode, field: Field, fraction: f64, seed: u64) -> PerturbationConfig {
        PerturbationConfig {
            testset_fraction: fraction,
            roots: self.roots.clone(),
            generic: self.generic.clone(),
            ..PerturbationConfig::new(mode, field, seed)
        }
    }
}

/// A post after (possible) perturbation, kept as token lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedPost {
    pub id: String,
    pub label: Label,
    pub mode: PerturbationMode,
    pub testset_fraction: f64,
    pub perturbed: bool,
    pub title: Vec<String>,
    pub body: Vec<String>,
}

/// Ids selected at `fraction`, stratified by class. Each class has one
/// seeded order, so a smaller fraction always selects a prefix of a larger one.
pub fn select_posts(posts: &[CuratedPost], mode: PerturbationMode, fraction: f64, seed: u64) -> Vec<bool> {
    let mut selected = vec![false; posts.len()];
    for label in Label::ALL {
        if !label.is_illness() && !mode.touches_none() {
            continue;
        }
        let mut members: Vec<usize> = (0..posts.len()).filter(|&i| posts[i].label == label).collect();
        members.sort_by(|&a, &b| posts[a].id.cmp(&posts[b].id));
        members.shuffle(&mut seed::rng_for(seed, &[3, label.code() as u64]));
        let take = round_half_away(fraction * members.len() as f64).min(members.len());
        for &i in &members[..take] {
            selected[i] = true;
        }
    }
    selected
}

/// Perturbs the selected fraction of `posts`; the rest pass through tokenized.
pub fn perturb_posts(posts: &[CuratedPost], mode: PerturbationMode, fraction: f64, suite: &SuiteConfig) -> Result<Vec<PerturbedPost>> {
    let selected = select_posts(posts, mode, fraction, suite.seed);
    posts
        .iter()
        .zip(selected)
        .map(|(p, sel)| {
            let mut title = tokenize(&p.title);
            let mut body = tokenize(&p.body);
            if sel {
                let post_seed = |field: u64| seed::derive(suite.seed, &[mode.stream(), seed::hash_str(&p.id), field]);
                let tc = suite.field_config(mode, Field::Title, fraction, post_seed(0));
                let bc = suite.field_config(mode, Field::Post, fraction, post_seed(1));
                title = perturb(&title, p.label, &tc, &suite.lexicon, &suite.stopwords)?;
                body = perturb(&body, p.label, &bc, &suite.lexicon, &suite.stopwords)?;
            }
            Ok(PerturbedPost {
                id: p.id.clone(),
                label: p.label,
                mode,
                testset_fraction: fraction,
                perturbed: sel,
                title,
                body,
            })
        })
        .collect()
}

fn evaluate_tokens(
    model: &Classifier,
    vocab: &Vocabulary,
    kind: InputKind,
    items: impl Iterator<Item = (Vec<String>, Vec<String>, Label)>,
) -> Result<ClassReport> {
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    for (title, body, label) in items {
        let input = encode_input(&title, &body, kind, vocab, &model.config)?;
        preds.push(model.predict(&input)?);
        truths.push(label.code());
    }
    class_report(&confusion_matrix(&preds, &truths)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorRow {
    /// `None` marks the clean baseline.
    pub mode: Option<PerturbationMode>,
    pub input_kind: InputKind,
    pub testset_fraction: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl BehaviorRow {
    fn new(mode: Option<PerturbationMode>, kind: InputKind, fraction: f64, r: &ClassReport) -> Self {
        Self {
            mode,
            input_kind: kind,
            testset_fraction: fraction,
            precision: r.weighted.precision,
            recall: r.weighted.recall,
            f1: r.weighted.f1,
            accuracy: r.accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BehaviorReport {
    pub rows: Vec<BehaviorRow>,
}

impl BehaviorReport {
    pub fn baseline(&self, kind: InputKind) -> Option<&BehaviorRow> {
        self.rows.iter().find(|r| r.mode.is_none() && r.input_kind == kind)
    }

    pub fn row(&self, mode: PerturbationMode, kind: InputKind, fraction: f64) -> Option<&BehaviorRow> {
        self.rows
            .iter()
            .find(|r| r.mode == Some(mode) && r.input_kind == kind && r.testset_fraction == fraction)
    }

    /// Clean F1 minus perturbed F1.
    pub fn degradation(&self, mode: PerturbationMode, kind: InputKind, fraction: f64) -> Option<f64> {
        Some(self.baseline(kind)?.f1 - self.row(mode, kind, fraction)?.f1)
    }

    pub fn extend(&mut self, other: BehaviorReport) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,input_kind,testset_fraction,precision,recall,f1,accuracy\n");
        for r in &self.rows {
            let mode = r.mode.map_or("clean", PerturbationMode::as_str);
            writeln!(
                out,
                "{mode},{},{:.2},{:.4},{:.4},{:.4},{:.4}",
                r.input_kind, r.testset_fraction, r.precision, r.recall, r.f1, r.accuracy
            )
            .unwrap();
        }
        out
    }
}

/// Clean baseline plus one row per (mode, fraction), all scored on the full
/// test split.
pub fn run_suite(
    model: &Classifier,
    vocab: &Vocabulary,
    kind: InputKind,
    test: &[CuratedPost],
    suite: &SuiteConfig,
) -> Result<BehaviorReport> {
    if test.is_empty() {
        return Err(Error::Empty);
    }
    for &f in &suite.fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidConfig(format!("testset_fraction {f} not in (0, 1]")));
        }
    }
    let clean = evaluate_tokens(
        model,
        vocab,
        kind,
        test.iter().map(|p| (tokenize(&p.title), tokenize(&p.body), p.label)),
    )?;
    let mut rows = vec![BehaviorRow::new(None, kind, 0.0, &clean)];
    for &mode in &suite.modes {
        for &fraction in &suite.fractions {
            let perturbed = perturb_posts(test, mode, fraction, suite)?;
            let r = evaluate_tokens(model, vocab, kind, perturbed.into_iter().map(|p| (p.title, p.body, p.label)))?;
            rows.push(BehaviorRow::new(Some(mode), kind, fraction, &r));
        }
    }
    Ok(BehaviorReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    fn lexicon() -> SynonymLexicon {
        SynonymLexicon::bundled()
    }

    #[test]
    fn replacement_counts() {
        assert_eq!(replacement_count(100, 0.1, POST_CLAMP), 10);
        assert_eq!(replacement_count(500, 0.1, POST_CLAMP), 30);
        assert_eq!(replacement_count(2, 0.1, TITLE_CLAMP), 1);
        assert_eq!(replacement_count(3, 0.1, POST_CLAMP), 3);
        assert_eq!(replacement_count(0, 0.1, POST_CLAMP), 0);
        assert_eq!(replacement_count(45, 0.1, POST_CLAMP), 5);
        assert_eq!(replacement_count(80, 0.1, TITLE_CLAMP), 5);
    }

    #[test]
    fn remove_keeps_other_roots() {
        let t = toks("i feel happy for some time and then depressed again. i'm definitely bipolar");
        let out = mask_remove(&t, Label::Bipolar, &RootFormSet::default()).unwrap();
        assert_eq!(out.join(" "), toks("i feel happy for some time and then depressed again. i'm definitely").join(" "));
        let out = mask_remove(&toks("depression and depressing days"), Label::Depression, &RootFormSet::default()).unwrap();
        assert_eq!(out, toks("and days"));
        let plain = toks("nothing to see");
        assert_eq!(mask_remove(&plain, Label::Adhd, &RootFormSet::default()).unwrap(), plain);
    }

    #[test]
    fn generic_replacement() {
        let roots = RootFormSet::default();
        let out = mask_generic(&toks("i'm definitely bipolar"), Label::Bipolar, &roots, GENERIC_TOKEN).unwrap();
        assert_eq!(out, toks("i'm definitely illness"));
        let out = mask_generic(&toks("bipolar me bipolar"), Label::Bipolar, &roots, GENERIC_TOKEN).unwrap();
        assert_eq!(out, toks("illness me illness"));
    }

    #[test]
    fn random_replacement_excludes_own_class() {
        let roots = RootFormSet::default();
        let t = toks("i'm definitely bipolar");
        let mut seen = std::collections::BTreeSet::new();
        for s in 0..200 {
            let out = mask_random(&t, Label::Bipolar, &roots, s).unwrap();
            assert_eq!(out[..2], t[..2]);
            seen.insert(out[2].clone());
            assert_eq!(out, mask_random(&t, Label::Bipolar, &roots, s).unwrap());
        }
        let want: std::collections::BTreeSet<String> =
            ["depress", "ptsd", "anxiou", "anxiet", "adhd"].into_iter().map(String::from).collect();
        assert_eq!(seen, want);
    }

    #[test]
    fn masks_reject_none() {
        let roots = RootFormSet::default();
        let t = toks("x");
        assert!(matches!(mask_remove(&t, Label::None, &roots), Err(Error::NoRoots)));
        assert!(matches!(mask_generic(&t, Label::None, &roots, "illness"), Err(Error::NoRoots)));
        assert!(matches!(mask_random(&t, Label::None, &roots, 0), Err(Error::NoRoots)));
    }

    #[test]
    fn config_validation() {
        let mut c = PerturbationConfig::new(PerturbationMode::Synonym, Field::Post, 0);
        assert!(c.validate().is_ok());
        c.token_fraction = 0.0;
        assert!(c.validate().is_err());
        c.token_fraction = 0.1;
        c.clamp = (5, 4);
        assert!(c.validate().is_err());
        assert_eq!("replace_generic".parse::<PerturbationMode>().unwrap(), PerturbationMode::ReplaceGeneric);
        assert!("shout".parse::<PerturbationMode>().is_err());
    }

    #[test]
    fn selection_is_nested_and_stratified() {
        let posts: Vec<CuratedPost> = (0..60)
            .map(|i| CuratedPost {
                id: format!("p{i:02}"),
                title: String::new(),
                body: String::new(),
                label: Label::ALL[i % 6],
                upvotes: 11,
                token_count: 0,
            })
            .collect();
        let small = select_posts(&posts, PerturbationMode::RemoveLabel, 0.1, 5);
        let mid = select_posts(&posts, PerturbationMode::RemoveLabel, 0.5, 5);
        let all = select_posts(&posts, PerturbationMode::RemoveLabel, 1.0, 5);
        for i in 0..60 {
            assert!(!small[i] || mid[i]);
            assert!(!mid[i] || all[i]);
            assert_eq!(all[i], posts[i].label.is_illness());
        }
        assert_eq!(small.iter().filter(|s| **s).count(), 5);
        assert_eq!(mid.iter().filter(|s| **s).count(), 25);
        assert_eq!(select_posts(&posts, PerturbationMode::Synonym, 1.0, 5).iter().filter(|s| **s).count(), 60);
    }

    fn word_pool() -> Vec<String> {
        let lex = lexicon();
        let mut pool: Vec<String> = ["the", "and", "of", "depressed", "bipolar", "adhd", "ptsd", "anxious", "zzqx", "blorp"]
            .into_iter()
            .map(String::from)
            .collect();
        pool.extend(["happy", "sad", "music", "travel", "focus", "panic", "big", "small"].map(String::from));
        assert!(pool.iter().filter(|w| !lex.lookup(w).is_empty()).count() >= 5);
        pool
    }

    proptest! {
        #[test]
        fn synonym_invariants(picks in prop::collection::vec(0usize..18, 0..400), s in any::<u64>(), title in any::<bool>()) {
            let pool = word_pool();
            let roots = RootFormSet::default();
            let lex = lexicon();
            let stop = StopWordList::bundled();
            let tokens: Vec<String> = picks.iter().map(|&i| pool[i].clone()).collect();
            let field = if title { Field::Title } else { Field::Post };
            let cfg = PerturbationConfig::new(PerturbationMode::Synonym, field, s);
            let out = synonym_perturb(&tokens, Label::Anxiety, &cfg, &lex, &stop);
            prop_assert_eq!(out.len(), tokens.len());
            let eligible = eligible_positions(&tokens, &roots, &lex, &stop);
            let changed = tokens.iter().zip(&out).filter(|(a, b)| a != b).count();
            let k = replacement_count(eligible.len(), 0.1, field.clamp());
            prop_assert_eq!(changed, k);
            for (i, (a, b)) in tokens.iter().zip(&out).enumerate() {
                if a != b {
                    prop_assert!(eligible.contains(&i));
                    prop_assert!(lex.lookup(a).contains(b));
                }
                if stop.contains(a) || roots.contains_any(a) {
                    prop_assert_eq!(a, b);
                }
            }
            prop_assert_eq!(&out, &synonym_perturb(&tokens, Label::Anxiety, &cfg, &lex, &stop));
        }

        #[test]
        fn mask_invariants(picks in prop::collection::vec(0usize..18, 0..100), s in any::<u64>(), c in 0usize..5) {
            let pool = word_pool();
            let roots = RootFormSet::default();
            let class = Label::ALL[c];
            let tokens: Vec<String> = picks.iter().map(|&i| pool[i].clone()).collect();
            let own = tokens.iter().filter(|t| contains_root(t, &roots, class)).count();
            let removed = mask_remove(&tokens, class, &roots).unwrap();
            prop_assert_eq!(removed.len(), tokens.len() - own);
            prop_assert!(removed.iter().all(|t| !contains_root(t, &roots, class)));
            let generic = mask_generic(&tokens, class, &roots, GENERIC_TOKEN).unwrap();
            prop_assert_eq!(generic.len(), tokens.len());
            prop_assert!(generic.iter().all(|t| !contains_root(t, &roots, class)));
            let random = mask_random(&tokens, class, &roots, s).unwrap();
            prop_assert!(random.iter().all(|t| !contains_root(t, &roots, class)));
            let other_before = tokens.iter().filter(|t| roots.contains_any(t) && !contains_root(t, &roots, class)).count();
            let other_after = random.iter().filter(|t| roots.contains_any(t)).count();
            prop_assert_eq!(other_after, other_before + own);
        }
    }
}
