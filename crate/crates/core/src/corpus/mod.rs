//! Synthetic radiology-style corpus with two competing report grammars.

mod grammar;
mod io;
mod scene;
mod vocab;

pub use grammar::{render, render_fluent, render_terse, Style};
pub use io::{load_records, save_records, write_records, CorpusRecord, SCHEMA_VERSION};
pub use scene::{signature, GridSpec, Scene, Severity, SIGNATURE_SEED};
pub use vocab::{Vocab, BOS, EOS, PAD, SPECIALS, UNK};

use rand::Rng as _;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::metrics::{Lexicon, Reference, Scorer};
use crate::rng;

/// Parameters of a generated corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub n_items: usize,
    pub seed: u64,
    /// Probability that a training item uses the FLUENT grammar.
    pub style_mix: f64,
    /// Probability that a FLUENT report omits its last finding.
    pub omit_prob: f64,
    pub max_findings: usize,
    pub grid: GridSpec,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_items: 600,
            seed: 7,
            style_mix: 0.7,
            omit_prob: 0.95,
            max_findings: 4,
            grid: GridSpec::default(),
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_items == 0 {
            return Err(Error::Config("corpus needs at least one item".into()));
        }
        for (name, p) in [("style mix", self.style_mix), ("omission probability", self.omit_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.max_findings == 0 || self.grid.patches == 0 || self.grid.feature_dim == 0 {
            return Err(Error::Config("findings, patches and feature width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Train/val/test sizes in 7:1:2 proportion; training takes the remainder.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let val = n / 10;
    let test = n * 2 / 10;
    (n - val - test, val, test)
}

pub fn split_of(index: usize, n: usize) -> Split {
    let (train, val, _) = split_sizes(n);
    if index < train {
        Split::Train
    } else if index < train + val {
        Split::Val
    } else {
        Split::Test
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<CorpusRecord>,
    pub val: Vec<CorpusRecord>,
    pub test: Vec<CorpusRecord>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[CorpusRecord] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &CorpusRecord> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }
}

fn item_seed(spec: &CorpusSpec, index: usize) -> u64 {
    rng::derive_seed(spec.seed, &[index as u64])
}

/// The ground-truth scene behind item `index`.
pub fn scene_for(spec: &CorpusSpec, lexicon: &Lexicon, index: usize) -> Scene {
    Scene::sample(lexicon.len(), spec.max_findings, item_seed(spec, index))
}

/// Generates one item. Validation and test references are always FLUENT.
pub fn generate_item(spec: &CorpusSpec, lexicon: &Lexicon, index: usize) -> Result<CorpusRecord> {
    let scene = scene_for(spec, lexicon, index);
    let mut r = rng::stream(item_seed(spec, index), &[2]);
    let fluent_draw = r.random::<f64>() < spec.style_mix;
    let style = match split_of(index, spec.n_items) {
        Split::Train if !fluent_draw => Style::Terse,
        _ => Style::Fluent,
    };
    let report = render(&scene, style, lexicon, spec.omit_prob, &mut r);
    Ok(CorpusRecord {
        id: format!("item-{index:06}"),
        features: scene.features(&spec.grid)?,
        report,
        labels: lexicon.names(&scene.labels()),
    })
}

pub fn generate(spec: &CorpusSpec, lexicon: &Lexicon) -> Result<Splits> {
    spec.validate()?;
    let mut splits = Splits::default();
    for i in 0..spec.n_items {
        let rec = generate_item(spec, lexicon, i)?;
        match split_of(i, spec.n_items) {
            Split::Train => splits.train.push(rec),
            Split::Val => splits.val.push(rec),
            Split::Test => splits.test.push(rec),
        }
    }
    Ok(splits)
}

/// A record resolved against a vocabulary and lexicon.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: String,
    pub features: Tensor,
    pub reference: Reference,
}

impl Example {
    pub fn from_record(record: &CorpusRecord, vocab: &Vocab, lexicon: &Lexicon) -> Result<Example> {
        Ok(Example {
            id: record.id.clone(),
            features: record.features.clone(),
            reference: Reference {
                tokens: vocab.encode(&record.report),
                labels: lexicon.label_set(&record.labels)?,
            },
        })
    }
}

pub fn examples(records: &[CorpusRecord], vocab: &Vocab, lexicon: &Lexicon) -> Result<Vec<Example>> {
    records.iter().map(|r| Example::from_record(r, vocab, lexicon)).collect()
}

/// A scorer whose lexicon triggers are mapped onto `vocab` ids.
pub fn scorer(lexicon: &Lexicon, vocab: &Vocab) -> Scorer {
    Scorer::new(lexicon, |w| {
        let id = vocab.id(w);
        (id != UNK).then_some(id)
    })
}

/// Writes `train.jsonl`, `val.jsonl`, `test.jsonl` and `vocab.txt` under `dir`.
pub fn save_splits(dir: &std::path::Path, splits: &Splits) -> Result<Vocab> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for split in [Split::Train, Split::Val, Split::Test] {
        save_records(&dir.join(format!("{}.jsonl", split.name())), splits.get(split))?;
    }
    let vocab = Vocab::build(splits.all().map(|r| r.report.as_str()));
    vocab.save(&dir.join("vocab.txt"))?;
    Ok(vocab)
}

/// Reads a corpus directory written by [`save_splits`].
pub fn load_splits(dir: &std::path::Path) -> Result<(Splits, Vocab)> {
    let load = |s: Split| load_records(&dir.join(format!("{}.jsonl", s.name())));
    let splits = Splits {
        train: load(Split::Train)?,
        val: load(Split::Val)?,
        test: load(Split::Test)?,
    };
    let vocab = Vocab::load(&dir.join("vocab.txt"))?;
    Ok((splits, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_follow_ratio() {
        assert_eq!(split_sizes(600), (420, 60, 120));
        assert_eq!(split_sizes(10), (7, 1, 2));
        assert_eq!(split_sizes(1), (1, 0, 0));
    }

    #[test]
    fn generation_is_deterministic() {
        let lex = Lexicon::default_chest();
        let spec = CorpusSpec {
            n_items: 30,
            ..CorpusSpec::default()
        };
        let a = generate(&spec, &lex).unwrap();
        assert_eq!(a, generate(&spec, &lex).unwrap());
        assert_eq!((a.train.len(), a.val.len(), a.test.len()), (21, 3, 6));
    }
}
