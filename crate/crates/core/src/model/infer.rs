//! Tape-free forward pass used for generation.

use std::sync::Arc;

use super::params::{Attn, Ffn, Linear, Norm};
use super::{sinusoid, Model};
use crate::autodiff::{gemm, softmax_in_place, Tensor};
use crate::corpus::BOS;
use crate::error::{Error, Result};
use crate::preference::PreferenceVector;

impl Model {
    fn p(&self, i: usize) -> &Tensor {
        &self.params().tensors()[i]
    }

    /// `x·W + b` for `rows` rows stored contiguously in `x`.
    fn affine(&self, l: Linear, x: &[f64], rows: usize) -> Vec<f64> {
        let (w, b) = (self.p(l.w), self.p(l.b));
        let (k, n) = (w.rows(), w.cols());
        let mut out = Vec::with_capacity(rows * n);
        for _ in 0..rows {
            out.extend_from_slice(b.data());
        }
        gemm(x, rows, k, false, w.data(), n, false, &mut out, true);
        out
    }

    fn norm_rows(&self, n: Norm, x: &mut [f64]) {
        let (gain, bias) = (self.p(n.g).data(), self.p(n.b).data());
        let eps = self.config().layer_norm_eps;
        for row in x.chunks_mut(gain.len()) {
            let len = row.len() as f64;
            let mean = row.iter().sum::<f64>() / len;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len;
            let inv = 1.0 / (var + eps).sqrt();
            for ((v, gv), bv) in row.iter_mut().zip(gain).zip(bias) {
                *v = (*v - mean) * inv * gv + bv;
            }
        }
    }

    fn ffn(&self, f: Ffn, x: &[f64], rows: usize) -> Vec<f64> {
        let mut h = self.affine(f.l1, x, rows);
        for v in &mut h {
            *v = v.max(0.0);
        }
        self.affine(f.l2, &h, rows)
    }

    fn mha(&self, a: Attn, query: &[f64], q_rows: usize, kv: &[f64], kv_rows: usize) -> Vec<f64> {
        let q = self.affine(a.q, query, q_rows);
        let k = self.affine(a.k, kv, kv_rows);
        let v = self.affine(a.v, kv, kv_rows);
        let c = self.config();
        let o = attend(&q, &k, &v, c.d_model, c.n_heads, 1.0 / (c.head_dim() as f64).sqrt());
        self.affine(a.o, &o, q_rows)
    }

    /// Encoded features `E` (`S×d`).
    pub fn encode(&self, features: &Tensor) -> Result<Tensor> {
        let c = self.config();
        if features.shape() != [c.patches, c.d_in] {
            return Err(Error::shape("encode", &[c.patches, c.d_in], features.shape()));
        }
        let lay = self.layout();
        let s = c.patches;
        let mut x = self.affine(lay.input, features.data(), s);
        if let Some(pos) = lay.enc_pos {
            for (v, p) in x.iter_mut().zip(self.p(pos).data()) {
                *v += p;
            }
        }
        for layer in &lay.enc {
            let a = self.mha(layer.attn, &x, s, &x, s);
            add_into(&mut x, &a);
            self.norm_rows(layer.ln1, &mut x);
            let f = self.ffn(layer.ffn, &x, s);
            add_into(&mut x, &f);
            self.norm_rows(layer.ln2, &mut x);
        }
        Tensor::matrix(s, c.d_model, x)
    }

    /// `P = Expand(Linear(p))`.
    pub fn expand_preference(&self, p: &PreferenceVector) -> Result<Tensor> {
        let c = self.config();
        if p.dim() != c.pref_dim {
            return Err(Error::Contract(format!(
                "preference has {} components, model expects {}",
                p.dim(),
                c.pref_dim
            )));
        }
        let row = self.affine(self.layout().pref, p.weights(), 1);
        let data = row.iter().copied().cycle().take(c.patches * row.len()).collect();
        Tensor::matrix(c.patches, c.d_model, data)
    }

    /// `U = E + alpha·H`.
    pub fn pvf_fuse(&self, pexp: &Tensor, e: &Tensor) -> Result<Tensor> {
        let c = self.config();
        let want = [c.patches, c.d_model];
        if e.shape() != want || pexp.shape() != want {
            return Err(Error::shape("pvf_fuse", pexp.shape(), e.shape()));
        }
        let h = match self.layout().pvf {
            Some(a) => self.mha(a, pexp.data(), c.patches, e.data(), c.patches),
            None => attend(pexp.data(), e.data(), e.data(), c.d_model, 1, 1.0 / (c.d_model as f64).sqrt()),
        };
        let data = e.data().iter().zip(&h).map(|(ev, hv)| ev + c.alpha * hv).collect();
        Tensor::matrix(c.patches, c.d_model, data)
    }

    /// Fused features `U` for one item.
    pub fn condition(&self, features: &Tensor, p: &PreferenceVector) -> Result<Tensor> {
        let e = self.encode(features)?;
        let pexp = self.expand_preference(p)?;
        self.pvf_fuse(&pexp, &e)
    }

    /// Incremental decoder positioned after `<bos>`.
    pub fn decoder(&self, u: &Tensor) -> Result<Decoder<'_>> {
        let c = self.config();
        if u.shape() != [c.patches, c.d_model] {
            return Err(Error::shape("decoder", &[c.patches, c.d_model], u.shape()));
        }
        let cross = self
            .layout()
            .dec
            .iter()
            .map(|l| {
                (
                    self.affine(l.cross.k, u.data(), c.patches),
                    self.affine(l.cross.v, u.data(), c.patches),
                )
            })
            .collect();
        let mut dec = Decoder {
            model: self,
            cross: Arc::new(cross),
            cache: vec![(Vec::new(), Vec::new()); c.n_dec_layers],
            generated: 0,
            logits: Vec::new(),
        };
        dec.step(BOS);
        Ok(dec)
    }

    /// Next-token logits after `prefix` (generated tokens, without `<bos>`).
    pub fn decode_step(&self, u: &Tensor, prefix: &[usize]) -> Result<Vec<f64>> {
        if prefix.len() >= self.config().max_len {
            return Err(Error::Contract(format!(
                "prefix length {} reaches max_len {}",
                prefix.len(),
                self.config().max_len
            )));
        }
        let mut dec = self.decoder(u)?;
        for &t in prefix {
            dec.push(t)?;
        }
        Ok(dec.logits)
    }
}

fn add_into(x: &mut [f64], y: &[f64]) {
    for (a, b) in x.iter_mut().zip(y) {
        *a += b;
    }
}

/// Unmasked multi-head attention over row-major `q` (`n×d`), `k`, `v` (`m×d`).
fn attend(q: &[f64], k: &[f64], v: &[f64], d: usize, heads: usize, scale: f64) -> Vec<f64> {
    let (n, m) = (q.len() / d, k.len() / d);
    let dh = d / heads;
    let mut out = vec![0.0; n * d];
    let mut w = vec![0.0; m];
    for i in 0..n {
        for h in 0..heads {
            let qi = &q[i * d + h * dh..i * d + (h + 1) * dh];
            for (j, wj) in w.iter_mut().enumerate() {
                let kj = &k[j * d + h * dh..j * d + (h + 1) * dh];
                *wj = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
            }
            softmax_in_place(&mut w);
            let o = &mut out[i * d + h * dh..i * d + (h + 1) * dh];
            for (j, wj) in w.iter().enumerate() {
                for (ov, vv) in o.iter_mut().zip(&v[j * d + h * dh..j * d + (h + 1) * dh]) {
                    *ov += wj * vv;
                }
            }
        }
    }
    out
}

/// Autoregressive decoding state: the next-token logits for the current
/// prefix and a way to extend it.
pub trait DecodeState: Clone {
    fn logits(&self) -> &[f64];
    fn push(&mut self, token: usize) -> Result<()>;
}

/// Decoder with cached self-attention keys and values.
#[derive(Clone)]
pub struct Decoder<'m> {
    model: &'m Model,
    cross: Arc<Vec<(Vec<f64>, Vec<f64>)>>,
    cache: Vec<(Vec<f64>, Vec<f64>)>,
    generated: usize,
    logits: Vec<f64>,
}

impl Decoder<'_> {
    fn step(&mut self, token: usize) {
        let m = self.model;
        let c = m.config();
        let d = c.d_model;
        let pos = self.cache[0].0.len() / d;
        let emb = &m.p(m.layout().embed).row_slice(token);
        let mut x: Vec<f64> = emb.iter().zip(sinusoid(pos, d)).map(|(e, p)| e + p).collect();
        let scale = 1.0 / (c.head_dim() as f64).sqrt();
        for (l, layer) in m.layout().dec.iter().enumerate() {
            let q = m.affine(layer.self_attn.q, &x, 1);
            let (kc, vc) = &mut self.cache[l];
            kc.extend(m.affine(layer.self_attn.k, &x, 1));
            vc.extend(m.affine(layer.self_attn.v, &x, 1));
            let o = attend(&q, kc, vc, d, c.n_heads, scale);
            add_into(&mut x, &m.affine(layer.self_attn.o, &o, 1));
            m.norm_rows(layer.ln1, &mut x);

            let q = m.affine(layer.cross.q, &x, 1);
            let (ck, cv) = &self.cross[l];
            let o = attend(&q, ck, cv, d, c.n_heads, scale);
            add_into(&mut x, &m.affine(layer.cross.o, &o, 1));
            m.norm_rows(layer.ln2, &mut x);

            let f = m.ffn(layer.ffn, &x, 1);
            add_into(&mut x, &f);
            m.norm_rows(layer.ln3, &mut x);
        }
        self.logits = m.affine(m.layout().out, &x, 1);
    }

    pub fn generated(&self) -> usize {
        self.generated
    }
}

impl DecodeState for Decoder<'_> {
    fn logits(&self) -> &[f64] {
        &self.logits
    }

    fn push(&mut self, token: usize) -> Result<()> {
        let c = self.model.config();
        if self.generated >= c.max_len {
            return Err(Error::Contract(format!("decoder already produced max_len {} tokens", c.max_len)));
        }
        if token >= c.vocab_size {
            return Err(Error::Index {
                op: "decode",
                index: token,
                bound: c.vocab_size,
            });
        }
        self.step(token);
        self.generated += 1;
        Ok(())
    }
}
