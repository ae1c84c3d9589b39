//! Differentiable forward pass on a [`Graph`].

use super::params::{Attn, Ffn, Linear, Norm};
use super::{sinusoid_table, Model};
use crate::autodiff::{Graph, Tensor, Var};
use crate::corpus::{BOS, EOS};
use crate::error::{Error, Result};
use crate::preference::PreferenceVector;

/// Model parameters placed on a tape, in store order.
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn at(&self, i: usize) -> Var {
        self.vars[i]
    }
}

impl Model {
    /// Places every parameter on `g` as a differentiable leaf.
    pub fn bind(&self, g: &mut Graph) -> Bound {
        self.bind_where(g, |_| true)
    }

    /// Wraps leaves already on a tape, one per parameter in store order.
    pub fn bound_from_vars(&self, vars: Vec<Var>) -> Result<Bound> {
        if vars.len() != self.params().len() {
            return Err(Error::shape("bind", &[self.params().len()], &[vars.len()]));
        }
        Ok(Bound { vars })
    }

    /// Places parameters on `g`; those rejected by `trainable` become constants.
    pub fn bind_where(&self, g: &mut Graph, trainable: impl Fn(&str) -> bool) -> Bound {
        let vars = self
            .params()
            .names()
            .iter()
            .zip(self.params().tensors())
            .map(|(name, t)| g.leaf(t.clone(), trainable(name)))
            .collect();
        Bound { vars }
    }

    fn t_linear(&self, g: &mut Graph, b: &Bound, l: Linear, x: Var) -> Result<Var> {
        let y = g.matmul(x, b.at(l.w))?;
        g.add_row(y, b.at(l.b))
    }

    fn t_norm(&self, g: &mut Graph, b: &Bound, n: Norm, x: Var) -> Result<Var> {
        let y = g.layer_norm(x, self.config().layer_norm_eps)?;
        let y = g.mul_row(y, b.at(n.g))?;
        g.add_row(y, b.at(n.b))
    }

    fn t_ffn(&self, g: &mut Graph, b: &Bound, f: Ffn, x: Var) -> Result<Var> {
        let h = self.t_linear(g, b, f.l1, x)?;
        let h = g.relu(h);
        self.t_linear(g, b, f.l2, h)
    }

    fn t_mha(&self, g: &mut Graph, b: &Bound, a: Attn, query: Var, kv: Var, causal: bool) -> Result<Var> {
        let q = self.t_linear(g, b, a.q, query)?;
        let k = self.t_linear(g, b, a.k, kv)?;
        let v = self.t_linear(g, b, a.v, kv)?;
        let heads = self.config().n_heads;
        let scale = 1.0 / (self.config().head_dim() as f64).sqrt();
        let o = attend(g, q, k, v, heads, scale, causal)?;
        self.t_linear(g, b, a.o, o)
    }

    /// Encoded features `E` (`S×d`).
    pub fn encode_taped(&self, g: &mut Graph, b: &Bound, features: Var) -> Result<Var> {
        let c = self.config();
        let shape = g.value(features).shape();
        if shape != [c.patches, c.d_in] {
            return Err(Error::shape("encode", &[c.patches, c.d_in], shape));
        }
        let lay = self.layout();
        let mut x = self.t_linear(g, b, lay.input, features)?;
        if let Some(pos) = lay.enc_pos {
            x = g.add(x, b.at(pos))?;
        }
        for layer in &lay.enc {
            let a = self.t_mha(g, b, layer.attn, x, x, false)?;
            let r = g.add(x, a)?;
            x = self.t_norm(g, b, layer.ln1, r)?;
            let f = self.t_ffn(g, b, layer.ffn, x)?;
            let r = g.add(x, f)?;
            x = self.t_norm(g, b, layer.ln2, r)?;
        }
        Ok(x)
    }

    /// `P = Expand(Linear(p))`: the projected row repeated once per patch.
    pub fn expand_preference_taped(&self, g: &mut Graph, b: &Bound, p: Var) -> Result<Var> {
        let c = self.config();
        let shape = g.value(p).shape();
        if shape != [1, c.pref_dim] {
            return Err(Error::Contract(format!(
                "preference has shape {shape:?}, model expects [1, {}]",
                c.pref_dim
            )));
        }
        let row = self.t_linear(g, b, self.layout().pref, p)?;
        g.repeat_rows(row, c.patches)
    }

    /// `U = E + alpha·H` with `H` the preference query attending over `E`.
    pub fn pvf_fuse_taped(&self, g: &mut Graph, b: &Bound, pexp: Var, e: Var) -> Result<Var> {
        let c = self.config();
        let h = match self.layout().pvf {
            Some(a) => self.t_mha(g, b, a, pexp, e, false)?,
            None => attend(g, pexp, e, e, 1, 1.0 / (c.d_model as f64).sqrt(), false)?,
        };
        let h = g.scale(h, c.alpha);
        g.add(e, h)
    }

    /// Fused features for one item with `p` entering as a constant.
    pub fn condition_taped(&self, g: &mut Graph, b: &Bound, features: &Tensor, p: &PreferenceVector) -> Result<Var> {
        let x = g.constant(features.clone());
        let e = self.encode_taped(g, b, x)?;
        let pv = g.constant(Tensor::row(p.weights().to_vec()));
        let pexp = self.expand_preference_taped(g, b, pv)?;
        self.pvf_fuse_taped(g, b, pexp, e)
    }

    /// Teacher-forced logits (`T×V`), one row per input position.
    pub fn decode_taped(&self, g: &mut Graph, b: &Bound, u: Var, inputs: &[usize]) -> Result<Var> {
        let c = self.config();
        if inputs.is_empty() {
            return Err(Error::Contract("decoder input must be non-empty".into()));
        }
        let lay = self.layout();
        let emb = g.embedding_lookup(b.at(lay.embed), inputs)?;
        let pe = g.constant(sinusoid_table(inputs.len(), c.d_model));
        let mut y = g.add(emb, pe)?;
        for layer in &lay.dec {
            let a = self.t_mha(g, b, layer.self_attn, y, y, true)?;
            let r = g.add(y, a)?;
            y = self.t_norm(g, b, layer.ln1, r)?;
            let a = self.t_mha(g, b, layer.cross, y, u, false)?;
            let r = g.add(y, a)?;
            y = self.t_norm(g, b, layer.ln2, r)?;
            let f = self.t_ffn(g, b, layer.ffn, y)?;
            let r = g.add(y, f)?;
            y = self.t_norm(g, b, layer.ln3, r)?;
        }
        self.t_linear(g, b, lay.out, y)
    }

    /// Negative log-likelihood `-log π(tokens)` given fused features `u`.
    /// With `with_eos` the terminating `<eos>` step is included.
    pub fn sequence_nll(&self, g: &mut Graph, b: &Bound, u: Var, tokens: &[usize], with_eos: bool) -> Result<Var> {
        let mut targets = tokens.to_vec();
        if with_eos {
            targets.push(EOS);
        }
        if targets.is_empty() {
            return Err(Error::Contract("cannot score an empty sequence".into()));
        }
        let mut inputs = Vec::with_capacity(targets.len());
        inputs.push(BOS);
        inputs.extend_from_slice(&targets[..targets.len() - 1]);
        let logits = self.decode_taped(g, b, u, &inputs)?;
        g.cross_entropy(logits, &targets)
    }

    /// Teacher-forced cross-entropy of `reference` followed by `<eos>`.
    pub fn mle_loss(&self, g: &mut Graph, b: &Bound, features: &Tensor, p: &PreferenceVector, reference: &[usize]) -> Result<Var> {
        if reference.is_empty() {
            return Err(Error::Contract("reference must be non-empty".into()));
        }
        let u = self.condition_taped(g, b, features, p)?;
        self.sequence_nll(g, b, u, reference, true)
    }
}

/// Scaled dot-product attention split over `heads` column blocks.
fn attend(g: &mut Graph, q: Var, k: Var, v: Var, heads: usize, scale: f64, causal: bool) -> Result<Var> {
    let d = g.value(q).cols();
    let dh = d / heads;
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (qh, kh, vh) = if heads == 1 {
            (q, k, v)
        } else {
            (
                g.slice_cols(q, h * dh, (h + 1) * dh)?,
                g.slice_cols(k, h * dh, (h + 1) * dh)?,
                g.slice_cols(v, h * dh, (h + 1) * dh)?,
            )
        };
        let s = g.matmul_bt(qh, kh)?;
        let mut s = g.scale(s, scale);
        if causal {
            s = g.causal_mask(s)?;
        }
        let a = g.softmax_rows(s)?;
        outs.push(g.matmul(a, vh)?);
    }
    if heads == 1 {
        Ok(outs[0])
    } else {
        g.concat_cols(&outs)
    }
}
