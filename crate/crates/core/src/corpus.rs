//! Ingestion of raw post dumps: scrubbing, quality filters, labelling and
//! stratified splits.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::textproc::tokenize;

pub const MIN_UPVOTES: i64 = 10;
pub const MIN_TOKENS: usize = 30;

/// The closed six-way label set. Discriminants are the stable integer codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Adhd = 0,
    Anxiety = 1,
    Bipolar = 2,
    Depression = 3,
    Ptsd = 4,
    None = 5,
}

impl Label {
    pub const ALL: [Label; 6] = [
        Label::Adhd,
        Label::Anxiety,
        Label::Bipolar,
        Label::Depression,
        Label::Ptsd,
        Label::None,
    ];
    pub const COUNT: usize = 6;

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Label> {
        Self::ALL.get(code).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Adhd => "adhd",
            Label::Anxiety => "anxiety",
            Label::Bipolar => "bipolar",
            Label::Depression => "depression",
            Label::Ptsd => "ptsd",
            Label::None => "none",
        }
    }

    /// True for the five illness classes.
    pub fn is_illness(self) -> bool {
        self != Label::None
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown label `{s}`")))
    }
}

/// General-topic sources merged into the `none` class.
pub const NONE_SOURCES: [&str; 8] = [
    "music",
    "travel",
    "india",
    "politics",
    "english",
    "datasets",
    "mathematics",
    "science",
];

/// Maps a subreddit name (optionally prefixed `r/`) to its class label.
pub fn assign_label(subreddit: &str) -> Result<Label> {
    let name = subreddit.trim().to_lowercase();
    let name = name.strip_prefix("r/").unwrap_or(&name);
    match name {
        "adhd" => Ok(Label::Adhd),
        "anxiety" => Ok(Label::Anxiety),
        "bipolar" => Ok(Label::Bipolar),
        "depression" => Ok(Label::Depression),
        "ptsd" => Ok(Label::Ptsd),
        n if NONE_SOURCES.contains(&n) => Ok(Label::None),
        _ => Err(Error::UnknownSource(subreddit.to_owned())),
    }
}

/// One record of a raw dump, as found in the JSON-lines input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPost {
    pub id: String,
    pub subreddit: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "selftext", default)]
    pub body: String,
    #[serde(rename = "ups")]
    pub upvotes: i64,
}

impl RawPost {
    fn validate(&self, line: usize) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Format {
                line,
                reason: "empty id".into(),
            });
        }
        if self.upvotes < 0 {
            return Err(Error::Format {
                line,
                reason: format!("negative upvotes {}", self.upvotes),
            });
        }
        Ok(())
    }
}

/// Reads a JSON-lines dump. Blank lines are skipped.
pub fn read_raw_posts(reader: impl BufRead) -> Result<Vec<RawPost>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let post: RawPost = serde_json::from_str(&line).map_err(|e| Error::Format {
            line: i + 1,
            reason: e.to_string(),
        })?;
        post.validate(i + 1)?;
        out.push(post);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedPost {
    pub id: String,
    pub title: String,
    pub body: String,
    pub label: Label,
    pub upvotes: i64,
    pub token_count: usize,
}

pub fn read_curated(reader: impl BufRead) -> Result<Vec<CuratedPost>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    LowUpvotes,
    TooShort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterOutcome {
    Accept { token_count: usize },
    Reject(RejectReason),
}

/// Quality gate: strictly more than `min_upvotes`, at least `min_tokens` body
/// tokens. The upvote check wins when both fail.
pub fn filter_post(raw: &RawPost, min_upvotes: i64, min_tokens: usize) -> FilterOutcome {
    if raw.upvotes <= min_upvotes {
        return FilterOutcome::Reject(RejectReason::LowUpvotes);
    }
    let token_count = tokenize(&raw.body).len();
    if token_count < min_tokens {
        return FilterOutcome::Reject(RejectReason::TooShort);
    }
    FilterOutcome::Accept { token_count }
}

fn is_url(run: &str) -> bool {
    let lower = run.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

fn is_user_mention(run: &str) -> bool {
    let rest = run.strip_prefix('/').unwrap_or(run);
    let rest = rest
        .strip_prefix("u/")
        .or_else(|| rest.strip_prefix("U/"));
    rest.and_then(|r| r.chars().next())
        .is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

/// Deletes every whitespace-delimited run that is a URL or a `u/<name>`
/// mention. Whitespace and all other characters are left untouched.
pub fn scrub_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut run_start: Option<usize> = None;
    let flush = |out: &mut String, run: &str| {
        if !(is_url(run) || is_user_mention(run)) {
            out.push_str(run);
        }
    };
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = run_start.take() {
                flush(&mut out, &text[s..i]);
            }
            out.push(c);
        } else if run_start.is_none() {
            run_start = Some(i);
        }
    }
    if let Some(s) = run_start {
        flush(&mut out, &text[s..]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Curation {
    pub curated: Vec<CuratedPost>,
    pub rejects: Vec<Rejection>,
}

/// Label, scrub, then filter every raw post. Token counts are taken on the
/// scrubbed body. Unknown sources abort the run.
pub fn curate(raw: &[RawPost], min_upvotes: i64, min_tokens: usize) -> Result<Curation> {
    let mut out = Curation::default();
    for post in raw {
        let label = assign_label(&post.subreddit)?;
        let title = scrub_text(&post.title);
        let body = scrub_text(&post.body);
        let scrubbed = RawPost {
            body,
            ..post.clone()
        };
        match filter_post(&scrubbed, min_upvotes, min_tokens) {
            FilterOutcome::Accept { token_count } => out.curated.push(CuratedPost {
                id: post.id.clone(),
                title,
                body: scrubbed.body,
                label,
                upvotes: post.upvotes,
                token_count,
            }),
            FilterOutcome::Reject(reason) => out.rejects.push(Rejection {
                id: post.id.clone(),
                reason,
            }),
        }
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, it)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        let all = [self.train, self.validation, self.test];
        if all.iter().any(|r| !(*r > 0.0)) || ((all.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split ratios must be positive and sum to 1, got {all:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<CuratedPost>,
    pub validation: Vec<CuratedPost>,
    pub test: Vec<CuratedPost>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

/// The persisted form of a split: ids only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: SplitRatios,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn manifest(&self) -> SplitManifest {
        let ids = |v: &[CuratedPost]| v.iter().map(|p| p.id.clone()).collect();
        SplitManifest {
            seed: self.seed,
            ratios: self.ratios,
            train: ids(&self.train),
            validation: ids(&self.validation),
            test: ids(&self.test),
        }
    }

    /// Rehydrates a split from its manifest and the curated posts.
    pub fn from_manifest(manifest: &SplitManifest, posts: &[CuratedPost]) -> Result<Self> {
        let by_id: BTreeMap<&str, &CuratedPost> = posts.iter().map(|p| (p.id.as_str(), p)).collect();
        let pick = |ids: &[String]| -> Result<Vec<CuratedPost>> {
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .map(|p| (*p).clone())
                        .ok_or_else(|| Error::InvalidConfig(format!("split id `{id}` not in corpus")))
                })
                .collect()
        };
        Ok(Self {
            train: pick(&manifest.train)?,
            validation: pick(&manifest.validation)?,
            test: pick(&manifest.test)?,
            seed: manifest.seed,
            ratios: manifest.ratios,
        })
    }
}

/// Round half away from zero.
pub(crate) fn round_half_away(x: f64) -> usize {
    x.round().max(0.0) as usize
}

/// Stratified, seeded split. Posts are sorted by id first so the result does
/// not depend on dump order.
pub fn split_dataset(posts: &[CuratedPost], ratios: SplitRatios, seed: u64) -> Result<DatasetSplit> {
    ratios.validate()?;
    if posts.is_empty() {
        return Err(Error::Empty);
    }
    let mut seen = HashSet::new();
    for p in posts {
        if !seen.insert(p.id.as_str()) {
            return Err(Error::DuplicateId(p.id.clone()));
        }
    }
    let mut sorted: Vec<&CuratedPost> = posts.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut by_label: BTreeMap<Label, Vec<&CuratedPost>> = BTreeMap::new();
    for p in sorted {
        by_label.entry(p.label).or_default().push(p);
    }
    for (label, group) in &by_label {
        if group.len() < 3 {
            return Err(Error::InsufficientClass {
                label: label.to_string(),
                count: group.len(),
            });
        }
    }

    let mut rng = seed::rng(seed);
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
        ratios,
    };
    for group in by_label.values_mut() {
        group.shuffle(&mut rng);
        let n = group.len() as f64;
        let n_val = round_half_away(n * ratios.validation);
        let n_test = round_half_away(n * ratios.test);
        let n_train = group.len().saturating_sub(n_val + n_test);
        let (train, rest) = group.split_at(n_train);
        let (val, test) = rest.split_at(n_val.min(rest.len()));
        split.train.extend(train.iter().map(|p| (*p).clone()));
        split.validation.extend(val.iter().map(|p| (*p).clone()));
        split.test.extend(test.iter().map(|p| (*p).clone()));
    }
    Ok(split)
}
