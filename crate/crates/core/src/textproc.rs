//! Tokenizer of record, vocabulary, sequence encoding and the lexical
//! resources used by the behavioral tests.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::corpus::Label;
use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const BUNDLED_SYNONYMS: &str = include_str!("../data/synonyms.tsv");

/// Lowercases, splits on Unicode whitespace and detaches leading and trailing
/// punctuation, one token per punctuation character. Apostrophes, hyphens and
/// any other punctuation strictly inside a word stay attached.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    for word in lower.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let start = chars.iter().position(|c| c.is_alphanumeric());
        let Some(start) = start else {
            out.extend(chars.iter().map(|c| c.to_string()));
            continue;
        };
        let end = chars.iter().rposition(|c| c.is_alphanumeric()).unwrap() + 1;
        out.extend(chars[..start].iter().map(|c| c.to_string()));
        out.push(chars[start..end].iter().collect());
        out.extend(chars[end..].iter().map(|c| c.to_string()));
    }
    out
}

/// Token → id mapping. Ids `0` and `1` are the padding and unknown tokens;
/// real tokens follow in frequency-descending, then lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    min_frequency: usize,
}

impl Vocabulary {
    pub fn build<S: AsRef<str>>(corpus: &[Vec<S>], min_frequency: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for doc in corpus {
            for tok in doc {
                *counts.entry(tok.as_ref()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, n)| n >= min_frequency && t != PAD_TOKEN && t != UNK_TOKEN)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let tokens = [PAD_TOKEN, UNK_TOKEN]
            .into_iter()
            .chain(kept.into_iter().map(|(t, _)| t))
            .map(str::to_owned)
            .collect();
        Ok(Self::from_parts(tokens, min_frequency))
    }

    /// Rebuilds a vocabulary from its id-ordered token list (as stored in a
    /// checkpoint).
    pub fn from_tokens(tokens: Vec<String>, min_frequency: usize) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::InvalidConfig(
                "vocabulary must start with the padding and unknown tokens".into(),
            ));
        }
        let vocab = Self::from_parts(tokens, min_frequency);
        if vocab.index.len() != vocab.tokens.len() {
            return Err(Error::InvalidConfig("vocabulary has duplicate tokens".into()));
        }
        Ok(vocab)
    }

    fn from_parts(tokens: Vec<String>, min_frequency: usize) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            tokens,
            index,
            min_frequency,
        }
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_frequency(&self) -> usize {
        self.min_frequency
    }

    /// Sequence-begin marker. Markers live just past the vocabulary so they
    /// can never collide with a real token.
    pub fn begin_id(&self) -> u32 {
        self.tokens.len() as u32
    }

    pub fn sep_id(&self) -> u32 {
        self.tokens.len() as u32 + 1
    }

    /// Rows needed in an embedding table: every token plus the two markers.
    pub fn embedding_rows(&self) -> usize {
        self.tokens.len() + 2
    }

    pub fn encode(&self, tokens: &[impl AsRef<str>]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.tokens.len()))?;
        for (i, t) in self.tokens.iter().enumerate() {
            map.serialize_entry(t, &i)?;
        }
        map.end()
    }
}

/// Maps tokens to ids and fits the result to exactly `max_len`: longer input
/// loses its tail, shorter input is padded at the end.
pub fn encode_sequence(tokens: &[impl AsRef<str>], vocab: &Vocabulary, max_len: usize) -> Vec<u32> {
    fit_length(vocab.encode(tokens), max_len)
}

pub fn fit_length(mut ids: Vec<u32>, max_len: usize) -> Vec<u32> {
    ids.resize(max_len, PAD_ID);
    ids
}

/// Class-identifying substrings, one group per illness class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootFormSet {
    groups: BTreeMap<Label, Vec<String>>,
}

impl Default for RootFormSet {
    fn default() -> Self {
        let groups = [
            (Label::Depression, vec!["depress"]),
            (Label::Ptsd, vec!["ptsd"]),
            (Label::Anxiety, vec!["anxiou", "anxiet"]),
            (Label::Bipolar, vec!["bipolar"]),
            (Label::Adhd, vec!["adhd"]),
        ]
        .into_iter()
        .map(|(l, r)| (l, r.into_iter().map(str::to_owned).collect()))
        .collect();
        Self { groups }
    }
}

impl RootFormSet {
    pub fn new(groups: BTreeMap<Label, Vec<String>>) -> Result<Self> {
        if groups.contains_key(&Label::None) {
            return Err(Error::InvalidConfig("class `none` cannot carry roots".into()));
        }
        for l in Label::ALL.iter().filter(|l| **l != Label::None) {
            if groups.get(l).is_none_or(Vec::is_empty) {
                return Err(Error::InvalidConfig(format!("no roots for class `{l}`")));
            }
        }
        let groups = groups
            .into_iter()
            .map(|(l, r)| (l, r.into_iter().map(|s| s.to_lowercase()).collect()))
            .collect();
        Ok(Self { groups })
    }

    /// Roots of one class; empty for `none`.
    pub fn roots(&self, class: Label) -> &[String] {
        self.groups.get(&class).map_or(&[], Vec::as_slice)
    }

    pub fn groups(&self) -> impl Iterator<Item = (Label, &[String])> {
        self.groups.iter().map(|(l, r)| (*l, r.as_slice()))
    }

    /// Every root string except those of `class`, in class order.
    pub fn other_roots(&self, class: Label) -> Vec<&str> {
        self.groups
            .iter()
            .filter(|(l, _)| **l != class)
            .flat_map(|(_, r)| r.iter().map(String::as_str))
            .collect()
    }

    pub fn contains_any(&self, token: &str) -> bool {
        let token = token.to_lowercase();
        self.groups
            .values()
            .flatten()
            .any(|r| token.contains(r.as_str()))
    }
}

/// True iff some root of `class` is a substring of `token` (case-insensitive).
pub fn contains_root(token: &str, roots: &RootFormSet, class: Label) -> bool {
    let token = token.to_lowercase();
    roots.roots(class).iter().any(|r| token.contains(r.as_str()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWordList {
    words: HashSet<String>,
}

impl StopWordList {
    pub fn parse(text: &str) -> Result<Self> {
        let words: HashSet<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        if words.is_empty() {
            return Err(Error::InvalidConfig("stop-word list is empty".into()));
        }
        Ok(Self { words })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_STOPWORDS).expect("bundled stop words are valid")
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Token → synonyms, loaded from `word<TAB>syn1,syn2,...` lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    entries: HashMap<String, Vec<String>>,
}

impl SynonymLexicon {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim_end_matches('\r');
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| Error::InvalidLexicon {
                line,
                reason: reason.to_owned(),
            };
            let (word, syns) = raw.split_once('\t').ok_or_else(|| bad("missing tab"))?;
            let word = word.trim().to_lowercase();
            if word.is_empty() || word.contains(char::is_whitespace) {
                return Err(bad("headword must be a single token"));
            }
            let mut list: Vec<String> = Vec::new();
            for s in syns.split(',').map(|s| s.trim().to_lowercase()) {
                if s.is_empty() || s.contains(char::is_whitespace) {
                    return Err(bad("synonyms must be single non-empty tokens"));
                }
                if s != word && !list.contains(&s) {
                    list.push(s);
                }
            }
            if list.is_empty() {
                return Err(bad("entry maps a token only to itself"));
            }
            if entries.insert(word, list).is_some() {
                return Err(bad("duplicate headword"));
            }
        }
        Ok(Self { entries })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_SYNONYMS).expect("bundled lexicon is valid")
    }

    pub fn lookup(&self, token: &str) -> &[String] {
        self.entries.get(token).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn lookup_synonyms<'a>(token: &str, lexicon: &'a SynonymLexicon) -> &'a [String] {
    lexicon.lookup(token)
}
