//! Stacked unidirectional LSTM classifier.
//!
//! Gate order inside the `4H` rows is input, forget, cell, output. The head
//! reads the top layer's hidden state at the last non-padding timestep;
//! trailing padding is never fed through the recurrence.

use rand::Rng;

use super::dropout::{dropout_mask, Mode};
use super::linalg::{dot, matvec_acc, matvec_t_acc, outer_acc, sigmoid};
use super::{ModelConfig, ParameterSet, Tensor};
use crate::error::{Error, Result};
use crate::seed;
use crate::textproc::PAD_ID;

const INIT_RANGE: f64 = 0.08;

pub(super) fn layout(c: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let h = c.hidden_dim;
    let mut out = vec![("embedding".to_owned(), vec![c.vocab_size, c.embedding_dim])];
    for l in 0..c.num_layers {
        let input = if l == 0 { c.embedding_dim } else { h };
        out.push((format!("lstm.{l}.w_ih"), vec![4 * h, input]));
        out.push((format!("lstm.{l}.w_hh"), vec![4 * h, h]));
        out.push((format!("lstm.{l}.bias"), vec![4 * h]));
    }
    out.push(("head.weight".to_owned(), vec![c.num_classes, h]));
    out.push(("head.bias".to_owned(), vec![c.num_classes]));
    out
}

pub(super) fn init(c: &ModelConfig, rng: &mut seed::Rng) -> ParameterSet {
    let n = layout(c).len();
    ParameterSet::new(
        layout(c)
            .into_iter()
            .enumerate()
            .map(|(i, (name, shape))| {
                let mut t = Tensor::zeros(name, &shape);
                let is_head = i + 2 >= n;
                if !(is_head && c.zero_head) {
                    for v in &mut t.values {
                        *v = rng.gen_range(-INIT_RANGE..INIT_RANGE);
                    }
                }
                t
            })
            .collect(),
    )
}

fn w_ih(l: usize) -> usize {
    1 + 3 * l
}
fn w_hh(l: usize) -> usize {
    2 + 3 * l
}
fn bias(l: usize) -> usize {
    3 + 3 * l
}
fn head_w(c: &ModelConfig) -> usize {
    1 + 3 * c.num_layers
}

struct LayerCache {
    /// Input at each step.
    xs: Vec<Vec<f64>>,
    /// Hidden and cell states, `hs[0] = cs[0] = 0`.
    hs: Vec<Vec<f64>>,
    cs: Vec<Vec<f64>>,
    /// Activated gates `[i, f, g, o]`, `4H` per step.
    gates: Vec<Vec<f64>>,
    tanh_c: Vec<Vec<f64>>,
}

pub struct Cache {
    ids: Vec<u32>,
    layers: Vec<LayerCache>,
    mask: Option<Vec<f64>>,
    dropped: Vec<f64>,
}

/// Number of leading timesteps up to the last non-padding id.
pub fn effective_len(ids: &[u32]) -> usize {
    ids.iter().rposition(|&i| i != PAD_ID).map_or(0, |i| i + 1)
}

fn run_layer(x_seq: Vec<Vec<f64>>, h: usize, wih: &[f64], whh: &[f64], b: &[f64]) -> LayerCache {
    let steps = x_seq.len();
    let in_dim = x_seq.first().map_or(0, Vec::len);
    let mut cache = LayerCache {
        xs: x_seq,
        hs: vec![vec![0.0; h]],
        cs: vec![vec![0.0; h]],
        gates: Vec::with_capacity(steps),
        tanh_c: Vec::with_capacity(steps),
    };
    for t in 0..steps {
        let mut z = b.to_vec();
        matvec_acc(wih, in_dim, &cache.xs[t], &mut z);
        matvec_acc(whh, h, &cache.hs[t], &mut z);
        let (zi, rest) = z.split_at_mut(h);
        let (zf, rest) = rest.split_at_mut(h);
        let (zg, zo) = rest.split_at_mut(h);
        zi.iter_mut().for_each(|v| *v = sigmoid(*v));
        zf.iter_mut().for_each(|v| *v = sigmoid(*v));
        zg.iter_mut().for_each(|v| *v = v.tanh());
        zo.iter_mut().for_each(|v| *v = sigmoid(*v));
        let c_prev = &cache.cs[t];
        let c: Vec<f64> = (0..h).map(|j| zf[j] * c_prev[j] + zi[j] * zg[j]).collect();
        let tc: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let hn: Vec<f64> = (0..h).map(|j| zo[j] * tc[j]).collect();
        cache.gates.push(z);
        cache.cs.push(c);
        cache.tanh_c.push(tc);
        cache.hs.push(hn);
    }
    cache
}

pub fn forward_cached(ids: &[u32], c: &ModelConfig, params: &ParameterSet, mode: Mode) -> Result<(Vec<f64>, Cache)> {
    if ids.len() != c.max_len {
        return Err(Error::shape(format!("input length {} != max_len {}", ids.len(), c.max_len)));
    }
    if let Some(bad) = ids.iter().find(|&&i| i as usize >= c.vocab_size) {
        return Err(Error::shape(format!("token id {bad} outside vocabulary of {}", c.vocab_size)));
    }
    if params.len() != layout(c).len() {
        return Err(Error::shape("parameter set does not match lstm layout"));
    }
    let steps = effective_len(ids);
    let e = c.embedding_dim;
    let h = c.hidden_dim;
    let emb = params.values(0);
    let mut seq: Vec<Vec<f64>> = ids[..steps]
        .iter()
        .map(|&id| emb[id as usize * e..(id as usize + 1) * e].to_vec())
        .collect();
    let mut layers = Vec::with_capacity(c.num_layers);
    for l in 0..c.num_layers {
        let cache = run_layer(seq, h, params.values(w_ih(l)), params.values(w_hh(l)), params.values(bias(l)));
        seq = cache.hs[1..].to_vec();
        layers.push(cache);
    }
    let final_hidden = layers.last().map(|lc| lc.hs[steps].clone()).unwrap_or_else(|| vec![0.0; h]);
    let mask = dropout_mask(h, c.dropout_prob, mode);
    let dropped: Vec<f64> = match &mask {
        Some(m) => final_hidden.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => final_hidden.clone(),
    };
    let hw = params.values(head_w(c));
    let hb = params.values(head_w(c) + 1);
    let logits = hb
        .iter()
        .zip(hw.chunks_exact(h))
        .map(|(b, row)| b + dot(row, &dropped))
        .collect();
    Ok((
        logits,
        Cache {
            ids: ids[..steps].to_vec(),
            layers,
            mask,
            dropped,
        },
    ))
}

/// Accumulates parameter gradients for one example into `grads`.
pub fn backward(cache: &Cache, dlogits: &[f64], c: &ModelConfig, params: &ParameterSet, grads: &mut ParameterSet) {
    let h = c.hidden_dim;
    let hw_idx = head_w(c);
    outer_acc(grads.values_mut(hw_idx), dlogits, &cache.dropped);
    for (g, d) in grads.values_mut(hw_idx + 1).iter_mut().zip(dlogits) {
        *g += d;
    }
    let mut dh_final = vec![0.0; h];
    matvec_t_acc(params.values(hw_idx), h, dlogits, &mut dh_final);
    if let Some(m) = &cache.mask {
        dh_final.iter_mut().zip(m).for_each(|(d, k)| *d *= k);
    }
    let steps = cache.ids.len();
    if steps == 0 {
        return;
    }

    // gradient arriving at each step's hidden output from above
    let mut dh_ext = vec![vec![0.0; h]; steps];
    dh_ext[steps - 1] = dh_final;
    for l in (0..c.num_layers).rev() {
        let lc = &cache.layers[l];
        let in_dim = lc.xs[0].len();
        let wih = params.values(w_ih(l));
        let whh = params.values(w_hh(l));
        let mut d_wih = vec![0.0; 4 * h * in_dim];
        let mut d_whh = vec![0.0; 4 * h * h];
        let mut d_b = vec![0.0; 4 * h];
        let mut dx_seq = vec![vec![0.0; in_dim]; steps];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        for t in (0..steps).rev() {
            let g = &lc.gates[t];
            let (gi, gf, gg, go) = (&g[..h], &g[h..2 * h], &g[2 * h..3 * h], &g[3 * h..]);
            let tc = &lc.tanh_c[t];
            let c_prev = &lc.cs[t];
            let mut dz = vec![0.0; 4 * h];
            for j in 0..h {
                let dh = dh_ext[t][j] + dh_next[j];
                let dc = dh * go[j] * (1.0 - tc[j] * tc[j]) + dc_next[j];
                dz[j] = dc * gg[j] * gi[j] * (1.0 - gi[j]);
                dz[h + j] = dc * c_prev[j] * gf[j] * (1.0 - gf[j]);
                dz[2 * h + j] = dc * gi[j] * (1.0 - gg[j] * gg[j]);
                dz[3 * h + j] = dh * tc[j] * go[j] * (1.0 - go[j]);
                dc_next[j] = dc * gf[j];
            }
            outer_acc(&mut d_wih, &dz, &lc.xs[t]);
            outer_acc(&mut d_whh, &dz, &lc.hs[t]);
            d_b.iter_mut().zip(&dz).for_each(|(a, b)| *a += b);
            matvec_t_acc(wih, in_dim, &dz, &mut dx_seq[t]);
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            matvec_t_acc(whh, h, &dz, &mut dh_next);
        }
        for (idx, d) in [(w_ih(l), d_wih), (w_hh(l), d_whh), (bias(l), d_b)] {
            grads.values_mut(idx).iter_mut().zip(&d).for_each(|(a, b)| *a += b);
        }
        dh_ext = dx_seq;
    }
    let e = c.embedding_dim;
    let demb = grads.values_mut(0);
    for (t, &id) in cache.ids.iter().enumerate() {
        let row = &mut demb[id as usize * e..(id as usize + 1) * e];
        row.iter_mut().zip(&dh_ext[t]).for_each(|(a, b)| *a += b);
    }
}

/// Eval- or train-mode logits for one encoded sequence.
pub fn lstm_forward(ids: &[u32], config: &ModelConfig, params: &ParameterSet, mode: Mode) -> Result<Vec<f64>> {
    config.check_params(params)?;
    Ok(forward_cached(ids, config, params, mode)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::tiny_lstm;
    use crate::model::Classifier;

    fn sigm(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Scalar-loop recurrence written straight from the LSTM equations,
    /// indexing the parameter tensors by hand.
    fn oracle(ids: &[u32], c: &ModelConfig, p: &ParameterSet) -> Vec<f64> {
        let (e, h) = (c.embedding_dim, c.hidden_dim);
        let emb = &p.tensors()[0].values;
        let len = ids.iter().rposition(|&i| i != 0).map_or(0, |i| i + 1);
        let mut inputs: Vec<Vec<f64>> = ids[..len]
            .iter()
            .map(|&id| (0..e).map(|k| emb[id as usize * e + k]).collect())
            .collect();
        for l in 0..c.num_layers {
            let wih = &p.get(&format!("lstm.{l}.w_ih")).unwrap().values;
            let whh = &p.get(&format!("lstm.{l}.w_hh")).unwrap().values;
            let b = &p.get(&format!("lstm.{l}.bias")).unwrap().values;
            let in_dim = if l == 0 { e } else { h };
            let mut hs = vec![0.0; h];
            let mut cs = vec![0.0; h];
            let mut outs = Vec::new();
            for x in &inputs {
                let pre = |gate: usize, j: usize| {
                    let row = gate * h + j;
                    let mut s = b[row];
                    for k in 0..in_dim {
                        s += wih[row * in_dim + k] * x[k];
                    }
                    for k in 0..h {
                        s += whh[row * h + k] * hs[k];
                    }
                    s
                };
                let mut nh = vec![0.0; h];
                let mut nc = vec![0.0; h];
                for j in 0..h {
                    let i = sigm(pre(0, j));
                    let f = sigm(pre(1, j));
                    let g = pre(2, j).tanh();
                    let o = sigm(pre(3, j));
                    nc[j] = f * cs[j] + i * g;
                    nh[j] = o * nc[j].tanh();
                }
                hs = nh;
                cs = nc;
                outs.push(hs.clone());
            }
            inputs = outs;
        }
        let last = inputs.last().cloned().unwrap_or(vec![0.0; h]);
        let hw = &p.get("head.weight").unwrap().values;
        let hb = &p.get("head.bias").unwrap().values;
        (0..c.num_classes)
            .map(|k| hb[k] + (0..h).map(|j| hw[k * h + j] * last[j]).sum::<f64>())
            .collect()
    }

    #[test]
    fn matches_scalar_oracle() {
        let config = tiny_lstm();
        let model = Classifier::init(config.clone(), 99).unwrap();
        for ids in [[3u32, 7, 2], [9, 1, 0], [5, 0, 0]] {
            let got = lstm_forward(&ids, &config, &model.params, Mode::Eval).unwrap();
            let want = oracle(&ids, &config, &model.params);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-10, "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn zero_head_on_padding_gives_zero_logits() {
        let config = ModelConfig {
            zero_head: true,
            ..tiny_lstm()
        };
        let model = Classifier::init(config.clone(), 1).unwrap();
        let logits = lstm_forward(&[0, 0, 0], &config, &model.params, Mode::Eval).unwrap();
        assert_eq!(logits, vec![0.0; 6]);
    }

    #[test]
    fn eval_mode_is_deterministic_and_train_mode_differs() {
        let config = tiny_lstm();
        let model = Classifier::init(config.clone(), 4).unwrap();
        let ids = [4, 5, 6];
        let a = lstm_forward(&ids, &config, &model.params, Mode::Eval).unwrap();
        let b = lstm_forward(&ids, &config, &model.params, Mode::Eval).unwrap();
        assert_eq!(a, b);
        let t1 = lstm_forward(&ids, &config, &model.params, Mode::Train { seed: 1 }).unwrap();
        let t2 = lstm_forward(&ids, &config, &model.params, Mode::Train { seed: 1 }).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn rejects_out_of_range_ids() {
        let config = tiny_lstm();
        let model = Classifier::init(config.clone(), 4).unwrap();
        assert!(lstm_forward(&[4, 50, 0], &config, &model.params, Mode::Eval).is_err());
    }
}
