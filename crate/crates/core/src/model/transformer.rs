//! Post-norm transformer encoder over sequence-pair inputs.
//!
//! Token, position and segment embeddings are summed, passed through
//! `num_blocks` blocks of masked multi-head self-attention and a GELU
//! feedforward (each followed by residual + layer norm), and the begin-marker
//! position feeds dropout and a linear head. Positions past the last unmasked
//! slot cannot influence the begin marker and are skipped.

use rand::Rng;

use super::dropout::{dropout_mask, Mode};
use super::linalg::{dot, linear, linear_backward, matvec_t_acc, outer_acc};
use super::{ModelConfig, PairInput, ParameterSet, Tensor};
use crate::error::{Error, Result};
use crate::seed;

const LN_EPS: f64 = 1e-5;
const PER_BLOCK: usize = 16;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

pub(super) fn layout(c: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let (d, f) = (c.model_dim, c.feedforward_dim);
    let mut out = vec![
        ("tok_emb".to_owned(), vec![c.vocab_size, d]),
        ("pos_emb".to_owned(), vec![c.max_len, d]),
        ("seg_emb".to_owned(), vec![2, d]),
    ];
    for b in 0..c.num_blocks {
        let p = |n: &str| format!("block.{b}.{n}");
        out.extend([
            (p("attn.wq"), vec![d, d]),
            (p("attn.bq"), vec![d]),
            (p("attn.wk"), vec![d, d]),
            (p("attn.bk"), vec![d]),
            (p("attn.wv"), vec![d, d]),
            (p("attn.bv"), vec![d]),
            (p("attn.wo"), vec![d, d]),
            (p("attn.bo"), vec![d]),
            (p("ln1.gain"), vec![d]),
            (p("ln1.bias"), vec![d]),
            (p("ff1.weight"), vec![f, d]),
            (p("ff1.bias"), vec![f]),
            (p("ff2.weight"), vec![d, f]),
            (p("ff2.bias"), vec![d]),
            (p("ln2.gain"), vec![d]),
            (p("ln2.bias"), vec![d]),
        ]);
    }
    out.push(("head.weight".to_owned(), vec![c.num_classes, d]));
    out.push(("head.bias".to_owned(), vec![c.num_classes]));
    out
}

fn standard_normal(rng: &mut seed::Rng) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub(super) fn init(c: &ModelConfig, rng: &mut seed::Rng) -> ParameterSet {
    let std = 1.0 / (c.model_dim as f64).sqrt();
    let lay = layout(c);
    let n = lay.len();
    ParameterSet::new(
        lay.into_iter()
            .enumerate()
            .map(|(i, (name, shape))| {
                let mut t = Tensor::zeros(name, &shape);
                let is_head = i + 2 >= n;
                if t.name.ends_with("gain") {
                    t.values.iter_mut().for_each(|v| *v = 1.0);
                } else if shape.len() == 2 && !(is_head && c.zero_head) {
                    t.values.iter_mut().for_each(|v| *v = std * standard_normal(rng));
                }
                t
            })
            .collect(),
    )
}

fn block_base(b: usize) -> usize {
    3 + PER_BLOCK * b
}

fn head_idx(c: &ModelConfig) -> usize {
    3 + PER_BLOCK * c.num_blocks
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

struct LayerNormCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &[f64], d: usize, gain: &[f64], bias: &[f64]) -> (Vec<f64>, LayerNormCache) {
    let rows = x.len() / d;
    let mut y = Vec::with_capacity(x.len());
    let mut xhat = Vec::with_capacity(x.len());
    let mut inv_std = Vec::with_capacity(rows);
    for row in x.chunks_exact(d) {
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv_std.push(is);
        for (j, v) in row.iter().enumerate() {
            let xh = (v - mean) * is;
            xhat.push(xh);
            y.push(gain[j] * xh + bias[j]);
        }
    }
    (y, LayerNormCache { xhat, inv_std })
}

fn layer_norm_backward(dy: &[f64], d: usize, gain: &[f64], cache: &LayerNormCache, dgain: &mut [f64], dbias: &mut [f64]) -> Vec<f64> {
    let mut dx = vec![0.0; dy.len()];
    let n = d as f64;
    for (r, (dyr, dxr)) in dy.chunks_exact(d).zip(dx.chunks_exact_mut(d)).enumerate() {
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let mut sum = 0.0;
        let mut sum_x = 0.0;
        let mut dxhat = vec![0.0; d];
        for j in 0..d {
            dgain[j] += dyr[j] * xh[j];
            dbias[j] += dyr[j];
            dxhat[j] = dyr[j] * gain[j];
            sum += dxhat[j];
            sum_x += dxhat[j] * xh[j];
        }
        let is = cache.inv_std[r];
        for j in 0..d {
            dxr[j] = is / n * (n * dxhat[j] - sum - xh[j] * sum_x);
        }
    }
    dx
}

struct BlockCache {
    x: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// `[head][query][key]` attention weights, zero on masked keys.
    probs: Vec<f64>,
    ctx: Vec<f64>,
    ln1: LayerNormCache,
    y1: Vec<f64>,
    f1: Vec<f64>,
    act: Vec<f64>,
    ln2: LayerNormCache,
}

pub struct Cache {
    ids: Vec<u32>,
    segments: Vec<u8>,
    len: usize,
    heads: usize,
    blocks: Vec<BlockCache>,
    mask: Option<Vec<f64>>,
    pooled: Vec<f64>,
}

impl Cache {
    /// Number of positions the forward pass actually computed.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Attention weights of one head as `len × len`, rows indexed by query.
    pub fn attention(&self, block: usize, head: usize) -> &[f64] {
        let s = self.len;
        &self.blocks[block].probs[head * s * s..(head + 1) * s * s]
    }
}

pub fn forward_cached(pair: &PairInput, c: &ModelConfig, params: &ParameterSet, mode: Mode) -> Result<(Vec<f64>, Cache)> {
    if pair.ids.len() != c.max_len || pair.segments.len() != c.max_len || pair.mask.len() != c.max_len {
        return Err(Error::shape(format!("pair input length {} != max_len {}", pair.ids.len(), c.max_len)));
    }
    if params.len() != layout(c).len() {
        return Err(Error::shape("parameter set does not match transformer layout"));
    }
    let s = pair.valid_len();
    if s == 0 {
        return Err(Error::shape("pair input has no unmasked positions"));
    }
    if let Some(bad) = pair.ids[..s].iter().find(|&&i| i as usize >= c.vocab_size) {
        return Err(Error::shape(format!("token id {bad} outside vocabulary of {}", c.vocab_size)));
    }
    if pair.segments[..s].iter().any(|&g| g > 1) {
        return Err(Error::shape("segment ids must be 0 or 1"));
    }
    let d = c.model_dim;
    let heads = c.num_heads;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let (tok, pos, seg) = (params.values(0), params.values(1), params.values(2));
    let mut x = Vec::with_capacity(s * d);
    for p in 0..s {
        let id = pair.ids[p] as usize;
        let sg = pair.segments[p] as usize;
        for j in 0..d {
            x.push(tok[id * d + j] + pos[p * d + j] + seg[sg * d + j]);
        }
    }

    let mut blocks = Vec::with_capacity(c.num_blocks);
    for b in 0..c.num_blocks {
        let base = block_base(b);
        let w = |o: usize| params.values(base + o);
        let q = linear(&x, d, w(0), w(1));
        let k = linear(&x, d, w(2), w(3));
        let v = linear(&x, d, w(4), w(5));
        let mut probs = vec![0.0; heads * s * s];
        let mut ctx = vec![0.0; s * d];
        for h in 0..heads {
            let off = h * dh;
            for i in 0..s {
                let qi = &q[i * d + off..i * d + off + dh];
                let row = &mut probs[(h * s + i) * s..(h * s + i + 1) * s];
                let mut max = f64::NEG_INFINITY;
                for j in (0..s).filter(|&j| pair.mask[j]) {
                    row[j] = dot(qi, &k[j * d + off..j * d + off + dh]) * scale;
                    max = max.max(row[j]);
                }
                let mut sum = 0.0;
                for j in 0..s {
                    row[j] = if pair.mask[j] { (row[j] - max).exp() } else { 0.0 };
                    sum += row[j];
                }
                row.iter_mut().for_each(|p| *p /= sum);
                let ci = &mut ctx[i * d + off..i * d + off + dh];
                for j in (0..s).filter(|&j| row[j] != 0.0) {
                    for (cv, vv) in ci.iter_mut().zip(&v[j * d + off..j * d + off + dh]) {
                        *cv += row[j] * vv;
                    }
                }
            }
        }
        let attn = linear(&ctx, d, w(6), w(7));
        let r1: Vec<f64> = x.iter().zip(&attn).map(|(a, b)| a + b).collect();
        let (y1, ln1) = layer_norm(&r1, d, w(8), w(9));
        let f1 = linear(&y1, d, w(10), w(11));
        let act: Vec<f64> = f1.iter().map(|&z| gelu(z)).collect();
        let f2 = linear(&act, c.feedforward_dim, w(12), w(13));
        let r2: Vec<f64> = y1.iter().zip(&f2).map(|(a, b)| a + b).collect();
        let (out, ln2) = layer_norm(&r2, d, w(14), w(15));
        blocks.push(BlockCache {
            x: std::mem::replace(&mut x, out),
            q,
            k,
            v,
            probs,
            ctx,
            ln1,
            y1,
            f1,
            act,
            ln2,
        });
    }

    let mask = dropout_mask(d, c.dropout_prob, mode);
    let pooled: Vec<f64> = match &mask {
        Some(m) => x[..d].iter().zip(m).map(|(a, b)| a * b).collect(),
        None => x[..d].to_vec(),
    };
    let hi = head_idx(c);
    let logits = params
        .values(hi + 1)
        .iter()
        .zip(params.values(hi).chunks_exact(d))
        .map(|(b, row)| b + dot(row, &pooled))
        .collect();
    Ok((
        logits,
        Cache {
            ids: pair.ids[..s].to_vec(),
            segments: pair.segments[..s].to_vec(),
            len: s,
            heads,
            blocks,
            mask,
            pooled,
        },
    ))
}

fn add_into(grads: &mut ParameterSet, idx: usize, d: &[f64]) {
    grads.values_mut(idx).iter_mut().zip(d).for_each(|(a, b)| *a += b);
}

pub fn backward(cache: &Cache, dlogits: &[f64], c: &ModelConfig, params: &ParameterSet, grads: &mut ParameterSet) {
    let d = c.model_dim;
    let f = c.feedforward_dim;
    let s = cache.len;
    let heads = cache.heads;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let hi = head_idx(c);

    outer_acc(grads.values_mut(hi), dlogits, &cache.pooled);
    add_into(grads, hi + 1, dlogits);
    let mut dpooled = vec![0.0; d];
    matvec_t_acc(params.values(hi), d, dlogits, &mut dpooled);
    if let Some(m) = &cache.mask {
        dpooled.iter_mut().zip(m).for_each(|(g, k)| *g *= k);
    }
    let mut dout = vec![0.0; s * d];
    dout[..d].copy_from_slice(&dpooled);

    for b in (0..c.num_blocks).rev() {
        let bc = &cache.blocks[b];
        let base = block_base(b);
        let w = |o: usize| params.values(base + o);
        let mut tmp_g = vec![0.0; d];
        let mut tmp_b = vec![0.0; d];

        let dr2 = layer_norm_backward(&dout, d, w(14), &bc.ln2, &mut tmp_g, &mut tmp_b);
        add_into(grads, base + 14, &tmp_g);
        add_into(grads, base + 15, &tmp_b);

        let mut dw2 = vec![0.0; d * f];
        let mut db2 = vec![0.0; d];
        let dact = linear_backward(&bc.act, f, w(12), &dr2, &mut dw2, &mut db2);
        add_into(grads, base + 12, &dw2);
        add_into(grads, base + 13, &db2);
        let df1: Vec<f64> = dact.iter().zip(&bc.f1).map(|(g, z)| g * gelu_grad(*z)).collect();
        let mut dw1 = vec![0.0; f * d];
        let mut db1 = vec![0.0; f];
        let dy1_ff = linear_backward(&bc.y1, d, w(10), &df1, &mut dw1, &mut db1);
        add_into(grads, base + 10, &dw1);
        add_into(grads, base + 11, &db1);
        let dy1: Vec<f64> = dr2.iter().zip(&dy1_ff).map(|(a, b)| a + b).collect();

        tmp_g.iter_mut().for_each(|v| *v = 0.0);
        tmp_b.iter_mut().for_each(|v| *v = 0.0);
        let dr1 = layer_norm_backward(&dy1, d, w(8), &bc.ln1, &mut tmp_g, &mut tmp_b);
        add_into(grads, base + 8, &tmp_g);
        add_into(grads, base + 9, &tmp_b);

        let mut dwo = vec![0.0; d * d];
        let mut dbo = vec![0.0; d];
        let dctx = linear_backward(&bc.ctx, d, w(6), &dr1, &mut dwo, &mut dbo);
        add_into(grads, base + 6, &dwo);
        add_into(grads, base + 7, &dbo);

        let mut dq = vec![0.0; s * d];
        let mut dk = vec![0.0; s * d];
        let mut dv = vec![0.0; s * d];
        for h in 0..heads {
            let off = h * dh;
            for i in 0..s {
                let row = &bc.probs[(h * s + i) * s..(h * s + i + 1) * s];
                let dci = &dctx[i * d + off..i * d + off + dh];
                let dp: Vec<f64> = (0..s)
                    .map(|j| if row[j] != 0.0 { dot(dci, &bc.v[j * d + off..j * d + off + dh]) } else { 0.0 })
                    .collect();
                let inner: f64 = row.iter().zip(&dp).map(|(p, g)| p * g).sum();
                for j in 0..s {
                    if row[j] == 0.0 {
                        continue;
                    }
                    for t in 0..dh {
                        dv[j * d + off + t] += row[j] * dci[t];
                    }
                    let ds = row[j] * (dp[j] - inner) * scale;
                    for t in 0..dh {
                        dq[i * d + off + t] += ds * bc.k[j * d + off + t];
                        dk[j * d + off + t] += ds * bc.q[i * d + off + t];
                    }
                }
            }
        }
        let mut dx = dr1;
        for (o, dy) in [(0, &dq), (2, &dk), (4, &dv)] {
            let mut dwm = vec![0.0; d * d];
            let mut dbm = vec![0.0; d];
            let part = linear_backward(&bc.x, d, w(o), dy, &mut dwm, &mut dbm);
            add_into(grads, base + o, &dwm);
            add_into(grads, base + o + 1, &dbm);
            dx.iter_mut().zip(&part).for_each(|(a, b)| *a += b);
        }
        dout = dx;
    }

    for p in 0..s {
        let row = &dout[p * d..(p + 1) * d];
        let id = cache.ids[p] as usize;
        let sg = cache.segments[p] as usize;
        for (idx, r) in [(0, id), (1, p), (2, sg)] {
            grads.values_mut(idx)[r * d..(r + 1) * d]
                .iter_mut()
                .zip(row)
                .for_each(|(a, b)| *a += b);
        }
    }
}

pub fn transformer_forward(pair: &PairInput, config: &ModelConfig, params: &ParameterSet, mode: Mode) -> Result<Vec<f64>> {
    config.check_params(params)?;
    Ok(forward_cached(pair, config, params, mode)?.0)
}
