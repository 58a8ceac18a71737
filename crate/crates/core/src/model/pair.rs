use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::PAD_ID;

/// Sequence-pair input: `[BEGIN] A [SEP] B [SEP]` followed by padding, with
/// segment ids (0 for the begin marker and A, 1 for B) and an attention mask.
/// An empty A collapses to `[BEGIN] B [SEP]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairInput {
    pub ids: Vec<u32>,
    pub segments: Vec<u8>,
    pub mask: Vec<bool>,
    /// Segment lengths after truncation.
    pub title_len: usize,
    pub post_len: usize,
}

impl PairInput {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of leading positions that are not padding.
    pub fn valid_len(&self) -> usize {
        self.mask.iter().rposition(|m| *m).map_or(0, |i| i + 1)
    }

    pub fn separators(&self, sep_id: u32) -> usize {
        self.ids.iter().filter(|&&i| i == sep_id).count()
    }
}

/// Lays out a title/post pair in `max_len` slots. When the pair does not fit,
/// the post is cut first (down to one token); only then is the title cut.
pub fn build_pair_input(
    title_ids: &[u32],
    post_ids: &[u32],
    max_len: usize,
    begin_id: u32,
    sep_id: u32,
) -> Result<PairInput> {
    let has_title = !title_ids.is_empty();
    let markers = if has_title { 3 } else { 2 };
    let needed = markers + usize::from(has_title) + usize::from(!post_ids.is_empty());
    if max_len < needed {
        return Err(Error::Length { max_len });
    }
    let budget = max_len - markers;
    let mut a = title_ids.len();
    let mut b = post_ids.len();
    if a + b > budget {
        let post_floor = b.min(1);
        b = budget.saturating_sub(a).max(post_floor);
        a = a.min(budget - b);
    }

    let mut ids = Vec::with_capacity(max_len);
    let mut segments = Vec::with_capacity(max_len);
    ids.push(begin_id);
    segments.push(0);
    if has_title {
        ids.extend_from_slice(&title_ids[..a]);
        ids.push(sep_id);
        segments.resize(ids.len(), 0);
    }
    ids.extend_from_slice(&post_ids[..b]);
    ids.push(sep_id);
    segments.resize(ids.len(), 1);
    let valid = ids.len();
    ids.resize(max_len, PAD_ID);
    segments.resize(max_len, 0);
    let mask = (0..max_len).map(|i| i < valid).collect();
    Ok(PairInput {
        ids,
        segments,
        mask,
        title_len: a,
        post_len: b,
    })
}
