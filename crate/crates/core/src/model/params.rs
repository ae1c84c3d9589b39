use std::collections::HashMap;

use rand_distr::{Distribution, Normal};

use super::config::{FusionMode, ModelConfig};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Named parameter tensors in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    fn push(&mut self, name: String, t: Tensor) -> usize {
        let i = self.tensors.len();
        self.index.insert(name.clone(), i);
        self.names.push(name);
        self.tensors.push(t);
        i
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    /// Replaces a parameter, keeping its shape.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let i = self
            .index_of(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter {name:?}")))?;
        if self.tensors[i].shape() != value.shape() {
            return Err(Error::shape("set_param", self.tensors[i].shape(), value.shape()));
        }
        self.tensors[i] = value;
        Ok(())
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn entries(&self) -> Vec<(String, Tensor)> {
        self.names.iter().cloned().zip(self.tensors.iter().cloned()).collect()
    }

    /// Loads values from named entries; names and shapes must match exactly.
    pub fn load_entries(&mut self, entries: Vec<(String, Tensor)>) -> Result<()> {
        if entries.len() != self.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, model expects {}",
                entries.len(),
                self.len()
            )));
        }
        for (name, t) in entries {
            let i = self
                .index_of(&name)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor {name:?}")))?;
            if self.tensors[i].shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name:?} has shape {:?}, model expects {:?}",
                    t.shape(),
                    self.tensors[i].shape()
                )));
            }
            self.tensors[i] = t;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Linear {
    pub w: usize,
    pub b: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Attn {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Norm {
    pub g: usize,
    pub b: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Ffn {
    pub l1: Linear,
    pub l2: Linear,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct EncLayer {
    pub attn: Attn,
    pub ln1: Norm,
    pub ffn: Ffn,
    pub ln2: Norm,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct DecLayer {
    pub self_attn: Attn,
    pub ln1: Norm,
    pub cross: Attn,
    pub ln2: Norm,
    pub ffn: Ffn,
    pub ln3: Norm,
}

/// Positions of every parameter in the store.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub input: Linear,
    pub enc_pos: Option<usize>,
    pub enc: Vec<EncLayer>,
    pub pref: Linear,
    pub pvf: Option<Attn>,
    pub embed: usize,
    pub dec: Vec<DecLayer>,
    pub out: Linear,
}

struct Init<'a> {
    store: ParamStore,
    rng: &'a mut Rng,
}

impl Init<'_> {
    fn normal(&mut self, name: String, rows: usize, cols: usize, std: f64) -> usize {
        let dist = Normal::new(0.0, std).expect("positive std");
        let data = (0..rows * cols).map(|_| dist.sample(self.rng)).collect();
        self.store.push(name, Tensor::matrix(rows, cols, data).expect("positive dims"))
    }

    fn filled(&mut self, name: String, cols: usize, value: f64) -> usize {
        self.store.push(name, Tensor::filled(1, cols, value))
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear {
        Linear {
            w: self.normal(format!("{name}.w"), fan_in, fan_out, (1.0 / fan_in as f64).sqrt()),
            b: self.filled(format!("{name}.b"), fan_out, 0.0),
        }
    }

    fn attn(&mut self, name: &str, d: usize) -> Attn {
        Attn {
            q: self.linear(&format!("{name}.q"), d, d),
            k: self.linear(&format!("{name}.k"), d, d),
            v: self.linear(&format!("{name}.v"), d, d),
            o: self.linear(&format!("{name}.o"), d, d),
        }
    }

    fn norm(&mut self, name: &str, d: usize) -> Norm {
        Norm {
            g: self.filled(format!("{name}.g"), d, 1.0),
            b: self.filled(format!("{name}.b"), d, 0.0),
        }
    }

    fn ffn(&mut self, name: &str, d: usize, d_ff: usize) -> Ffn {
        Ffn {
            l1: self.linear(&format!("{name}.1"), d, d_ff),
            l2: self.linear(&format!("{name}.2"), d_ff, d),
        }
    }
}

/// Draws a fresh parameter set for `config`.
pub(crate) fn initialize(config: &ModelConfig, rng: &mut Rng) -> (ParamStore, Layout) {
    let d = config.d_model;
    let mut init = Init {
        store: ParamStore::default(),
        rng,
    };
    let input = init.linear("enc.input", config.d_in, d);
    let enc_pos = config
        .encoder_positions
        .then(|| init.normal("enc.pos".into(), config.patches, d, 1.0));
    let enc = (0..config.n_enc_layers)
        .map(|l| EncLayer {
            attn: init.attn(&format!("enc.{l}.attn"), d),
            ln1: init.norm(&format!("enc.{l}.ln1"), d),
            ffn: init.ffn(&format!("enc.{l}.ffn"), d, config.d_ff),
            ln2: init.norm(&format!("enc.{l}.ln2"), d),
        })
        .collect();
    let pref = init.linear("pvf.pref", config.pref_dim, d);
    let pvf = match config.fusion {
        FusionMode::Projected => Some(init.attn("pvf.attn", d)),
        FusionMode::Literal => None,
    };
    let embed = init.normal("dec.embed".into(), config.vocab_size, d, 1.0);
    let dec = (0..config.n_dec_layers)
        .map(|l| DecLayer {
            self_attn: init.attn(&format!("dec.{l}.self"), d),
            ln1: init.norm(&format!("dec.{l}.ln1"), d),
            cross: init.attn(&format!("dec.{l}.cross"), d),
            ln2: init.norm(&format!("dec.{l}.ln2"), d),
            ffn: init.ffn(&format!("dec.{l}.ffn"), d, config.d_ff),
            ln3: init.norm(&format!("dec.{l}.ln3"), d),
        })
        .collect();
    let out = init.linear("dec.out", d, config.vocab_size);
    let layout = Layout {
        input,
        enc_pos,
        enc,
        pref,
        pvf,
        embed,
        dec,
        out,
    };
    (init.store, layout)
}
