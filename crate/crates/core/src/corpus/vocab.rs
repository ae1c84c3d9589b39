use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const SPECIALS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Token vocabulary: the four specials, then corpus tokens by descending
/// frequency with lexicographic tie-break.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn build<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Vocab {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for text in texts {
            for tok in text.split_whitespace() {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, _)| !SPECIALS.contains(t))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Vocab::from_tokens(SPECIALS.iter().copied().chain(ranked.into_iter().map(|(t, _)| t)))
            .expect("specials are in order")
    }

    fn from_tokens<'a, I: IntoIterator<Item = &'a str>>(tokens: I) -> Result<Vocab> {
        let tokens: Vec<String> = tokens.into_iter().map(str::to_owned).collect();
        if tokens.len() < SPECIALS.len() || tokens[..SPECIALS.len()] != SPECIALS {
            return Err(Error::Config(format!(
                "vocabulary must start with {}",
                SPECIALS.join(" ")
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map(String::as_str).unwrap_or(SPECIALS[UNK])
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.split_whitespace().map(|t| self.id(t)).collect()
    }

    /// Joins tokens with spaces, stopping at the first `<eos>`.
    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .take_while(|&&i| i != EOS)
            .map(|&i| self.token(i))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// One token per line, in id order.
    pub fn to_text(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Vocab> {
        Vocab::from_tokens(text.lines().filter(|l| !l.is_empty()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Vocab> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Vocab::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specials_first_then_frequency() {
        let v = Vocab::build(["b a a", "c b a"]);
        assert_eq!(v.tokens(), &["<pad>", "<bos>", "<eos>", "<unk>", "a", "b", "c"]);
        assert_eq!(v.id("zzz"), UNK);
        assert_eq!(v.decode(&[4, 5, EOS, 6]), "a b");
        assert_eq!(Vocab::from_text(&v.to_text()).unwrap(), v);
        assert!(Vocab::from_text("a\nb\n").is_err());
    }
}
