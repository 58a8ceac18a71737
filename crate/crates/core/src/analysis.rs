//! Dataset statistics and the two leakage audits: class-term co-occurrence
//! and TF-IDF cosine similarity between posts.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use crate::corpus::{CuratedPost, Label};
use crate::error::{Error, Result};
use crate::textproc::{contains_root, tokenize, RootFormSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelStats {
    pub label: Label,
    pub posts: usize,
    pub mean_body_tokens: f64,
    pub mean_title_tokens: f64,
    pub mean_upvotes: f64,
    pub max_upvotes: i64,
    pub min_upvotes: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    /// Labels with at least one post, in label order.
    pub rows: Vec<LabelStats>,
}

impl CorpusStats {
    pub fn total_posts(&self) -> usize {
        self.rows.iter().map(|r| r.posts).sum()
    }

    pub fn get(&self, label: Label) -> Option<&LabelStats> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "label,posts,mean_body_tokens,mean_title_tokens,mean_upvotes,max_upvotes,min_upvotes\n",
        );
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.2},{:.2},{:.2},{},{}",
                r.label,
                r.posts,
                r.mean_body_tokens,
                r.mean_title_tokens,
                r.mean_upvotes,
                r.max_upvotes,
                r.min_upvotes
            )
            .unwrap();
        }
        out
    }
}

/// Per-label counts and means. Body length is the curated `token_count`;
/// title length is recomputed with the tokenizer of record.
pub fn corpus_stats(posts: &[CuratedPost]) -> Result<CorpusStats> {
    if posts.is_empty() {
        return Err(Error::Empty);
    }
    #[derive(Default)]
    struct Acc {
        n: usize,
        body: usize,
        title: usize,
        ups: i64,
        max: i64,
        min: i64,
    }
    let mut accs: BTreeMap<Label, Acc> = BTreeMap::new();
    for p in posts {
        let a = accs.entry(p.label).or_insert(Acc {
            max: i64::MIN,
            min: i64::MAX,
            ..Acc::default()
        });
        a.n += 1;
        a.body += p.token_count;
        a.title += tokenize(&p.title).len();
        a.ups += p.upvotes;
        a.max = a.max.max(p.upvotes);
        a.min = a.min.min(p.upvotes);
    }
    let rows = accs
        .into_iter()
        .map(|(label, a)| {
            let n = a.n as f64;
            LabelStats {
                label,
                posts: a.n,
                mean_body_tokens: a.body as f64 / n,
                mean_title_tokens: a.title as f64 / n,
                mean_upvotes: a.ups as f64 / n,
                max_upvotes: a.max,
                min_upvotes: a.min,
            }
        })
        .collect();
    Ok(CorpusStats { rows })
}

/// Fraction of posts per label whose body carries a root of each term group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cooccurrence {
    /// `(term group, label) -> fraction`; labels without posts are absent.
    pub fractions: BTreeMap<(Label, Label), f64>,
}

impl Cooccurrence {
    pub fn get(&self, group: Label, label: Label) -> Option<f64> {
        self.fractions.get(&(group, label)).copied()
    }

    pub fn to_csv(&self) -> String {
        let labels: Vec<Label> = Label::ALL
            .into_iter()
            .filter(|l| self.fractions.keys().any(|(_, pl)| pl == l))
            .collect();
        let groups: Vec<Label> = Label::ALL
            .into_iter()
            .filter(|g| self.fractions.keys().any(|(pg, _)| pg == g))
            .collect();
        let mut out = String::from("term_group");
        for l in &labels {
            write!(out, ",{l}").unwrap();
        }
        out.push('\n');
        for g in &groups {
            out.push_str(g.as_str());
            for l in &labels {
                write!(out, ",{:.4}", self.fractions[&(*g, *l)]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn keyword_cooccurrence(posts: &[CuratedPost], terms: &RootFormSet) -> Result<Cooccurrence> {
    if posts.is_empty() {
        return Err(Error::Empty);
    }
    let mut totals: BTreeMap<Label, usize> = BTreeMap::new();
    let mut hits: BTreeMap<(Label, Label), usize> = BTreeMap::new();
    for p in posts {
        *totals.entry(p.label).or_default() += 1;
        let tokens = tokenize(&p.body);
        for (group, _) in terms.groups() {
            let hit = tokens.iter().any(|t| contains_root(t, terms, group));
            let e = hits.entry((group, p.label)).or_default();
            if hit {
                *e += 1;
            }
        }
    }
    let fractions = hits
        .into_iter()
        .map(|(k, h)| (k, h as f64 / totals[&k.1] as f64))
        .collect();
    Ok(Cooccurrence { fractions })
}

/// Sparse TF-IDF document vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TfidfVector {
    pub weights: HashMap<String, f64>,
}

impl TfidfVector {
    pub fn norm(&self) -> f64 {
        self.weights.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &TfidfVector) -> f64 {
        let (small, large) = if self.weights.len() <= other.weights.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .weights
            .iter()
            .filter_map(|(t, w)| large.weights.get(t).map(|v| w * v))
            .sum()
    }
}

/// Document frequencies over a reference corpus; `idf = ln(N / df)`.
#[derive(Debug, Clone)]
pub struct TfidfModel {
    docs: usize,
    df: HashMap<String, usize>,
}

impl TfidfModel {
    pub fn fit<S: AsRef<str>>(corpus: &[Vec<S>]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in corpus {
            let mut uniq: Vec<&str> = doc.iter().map(AsRef::as_ref).collect();
            uniq.sort_unstable();
            uniq.dedup();
            for t in uniq {
                *df.entry(t.to_owned()).or_default() += 1;
            }
        }
        Ok(Self {
            docs: corpus.len(),
            df,
        })
    }

    pub fn idf(&self, token: &str) -> f64 {
        // tokens outside the reference corpus count as df = 1
        let df = self.df.get(token).copied().unwrap_or(1).max(1);
        (self.docs as f64 / df as f64).ln().max(0.0)
    }

    /// Raw term frequency times idf. Terms with zero weight are kept out so
    /// the vector only lists tokens that carry signal.
    pub fn vectorize<S: AsRef<str>>(&self, doc: &[S]) -> TfidfVector {
        let mut tf: HashMap<&str, usize> = HashMap::new();
        for t in doc {
            *tf.entry(t.as_ref()).or_default() += 1;
        }
        let weights = tf
            .into_iter()
            .map(|(t, n)| (t.to_owned(), n as f64 * self.idf(t)))
            .filter(|(_, w)| *w > 0.0)
            .collect();
        TfidfVector { weights }
    }
}

/// Cosine of two sparse vectors. A single zero vector gives 0.
pub fn cosine_similarity(a: &TfidfVector, b: &TfidfVector) -> Result<f64> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 && nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((a.dot(b) / (na * nb)).clamp(0.0, 1.0))
}

/// Cosine similarity of two posts by id, under TF-IDF fitted on all bodies.
pub fn post_similarity(posts: &[CuratedPost], a: &str, b: &str) -> Result<f64> {
    let docs: Vec<Vec<String>> = posts.iter().map(|p| tokenize(&p.body)).collect();
    let model = TfidfModel::fit(&docs)?;
    let find = |id: &str| {
        posts
            .iter()
            .position(|p| p.id == id)
            .ok_or_else(|| Error::InvalidConfig(format!("post `{id}` not found")))
    };
    let (ia, ib) = (find(a)?, find(b)?);
    cosine_similarity(&model.vectorize(&docs[ia]), &model.vectorize(&docs[ib]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(id: &str, label: Label, body: &str, ups: i64) -> CuratedPost {
        CuratedPost {
            id: id.into(),
            title: "a title here".into(),
            body: body.into(),
            label,
            upvotes: ups,
            token_count: tokenize(body).len(),
        }
    }

    fn vec_of(pairs: &[(&str, f64)]) -> TfidfVector {
        TfidfVector {
            weights: pairs.iter().map(|(t, w)| (t.to_string(), *w)).collect(),
        }
    }

    #[test]
    fn stats_means() {
        let posts: Vec<_> = [30, 40, 50]
            .iter()
            .enumerate()
            .map(|(i, n)| post(&i.to_string(), Label::Adhd, &vec!["w"; *n].join(" "), 11 + i as i64))
            .collect();
        let s = corpus_stats(&posts).unwrap();
        let r = s.get(Label::Adhd).unwrap();
        assert_eq!(r.mean_body_tokens, 40.0);
        assert_eq!(r.mean_title_tokens, 3.0);
        assert_eq!((r.min_upvotes, r.max_upvotes), (11, 13));
        assert_eq!(s.total_posts(), 3);
        assert!(s.to_csv().contains("adhd,3,40.00,3.00,12.00,13,11"));
        assert!(matches!(corpus_stats(&[]), Err(Error::Empty)));
    }

    #[test]
    fn cooccurrence_counts_body_only() {
        let roots = RootFormSet::default();
        let posts = vec![
            post("1", Label::Anxiety, "i was so depressed", 20),
            post("2", Label::Anxiety, "just anxious", 20),
            post("3", Label::None, "nothing here", 20),
        ];
        let c = keyword_cooccurrence(&posts, &roots).unwrap();
        assert_eq!(c.get(Label::Depression, Label::Anxiety), Some(0.5));
        assert_eq!(c.get(Label::Anxiety, Label::Anxiety), Some(0.5));
        assert_eq!(c.get(Label::Depression, Label::None), Some(0.0));
        let clean = vec![post("1", Label::Adhd, "plain words", 20), post("2", Label::None, "other words", 20)];
        let c = keyword_cooccurrence(&clean, &roots).unwrap();
        assert!(c.fractions.values().all(|f| *f == 0.0));
    }

    #[test]
    fn cosine_cases() {
        let a = vec_of(&[("x", 1.0), ("y", 2.0)]);
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let b = vec_of(&[("z", 3.0)]);
        assert_eq!(cosine_similarity(&a, &b).unwrap(), 0.0);
        let zero = TfidfVector::default();
        assert_eq!(cosine_similarity(&a, &zero).unwrap(), 0.0);
        assert!(matches!(cosine_similarity(&zero, &zero), Err(Error::ZeroVector)));
    }

    #[test]
    fn cosine_matches_dense_oracle() {
        let docs: Vec<Vec<String>> = [
            "the cat sat on the mat",
            "the dog sat on the log",
            "a bird flew over the cat",
            "nothing in common here",
        ]
        .iter()
        .map(|d| tokenize(d))
        .collect();
        let model = TfidfModel::fit(&docs).unwrap();
        let (va, vb) = (model.vectorize(&docs[0]), model.vectorize(&docs[2]));

        // dense oracle over the union vocabulary, idf recomputed by hand
        let mut vocab: Vec<&String> = docs.iter().flatten().collect();
        vocab.sort();
        vocab.dedup();
        let n = docs.len() as f64;
        let dense = |doc: &Vec<String>| -> Vec<f64> {
            vocab
                .iter()
                .map(|t| {
                    let tf = doc.iter().filter(|x| x == t).count() as f64;
                    let df = docs.iter().filter(|d| d.contains(t)).count() as f64;
                    tf * (n / df).ln()
                })
                .collect()
        };
        let (da, db) = (dense(&docs[0]), dense(&docs[2]));
        let dot: f64 = da.iter().zip(&db).map(|(x, y)| x * y).sum();
        let na = da.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = db.iter().map(|x| x * x).sum::<f64>().sqrt();
        let got = cosine_similarity(&va, &vb).unwrap();
        assert!((got - dot / (na * nb)).abs() < 1e-12);
        assert_eq!(got, cosine_similarity(&vb, &va).unwrap());
        assert!(got > 0.0 && got < 1.0);
    }
}
