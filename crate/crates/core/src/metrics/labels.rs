//! Keyword finding labeler and clinical-efficacy scores.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::error::{Error, Result};

/// Tokens before a trigger that are searched for a negation.
pub const NEGATION_WINDOW: usize = 3;

/// Text of the bundled 14-finding lexicon.
pub const DEFAULT_LEXICON: &str = include_str!("../../data/findings.tsv");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Finding {
    pub name: String,
    pub triggers: Vec<String>,
    pub negations: Vec<String>,
}

/// Ordered finding vocabulary with trigger and negation words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    findings: Vec<Finding>,
}

/// Findings present in a report, as indices into a [`Lexicon`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelSet(BTreeSet<usize>);

impl LabelSet {
    pub fn new() -> Self {
        LabelSet::default()
    }

    pub fn insert(&mut self, finding: usize) {
        self.0.insert(finding);
    }

    pub fn contains(&self, finding: usize) -> bool {
        self.0.contains(&finding)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn intersection_len(&self, other: &LabelSet) -> usize {
        self.0.intersection(&other.0).count()
    }

    pub fn is_strict_subset(&self, other: &LabelSet) -> bool {
        self.0.is_subset(&other.0) && self.0.len() < other.0.len()
    }
}

impl FromIterator<usize> for LabelSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        LabelSet(iter.into_iter().collect())
    }
}

impl Lexicon {
    /// The bundled 14-finding chest lexicon.
    pub fn default_chest() -> Self {
        Lexicon::parse(DEFAULT_LEXICON, Path::new("<bundled findings.tsv>"))
            .expect("bundled lexicon is well formed")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Lexicon::parse(&text, path)
    }

    /// Parses `name<TAB>trigger,trigger<TAB>negation,negation` lines;
    /// blank lines and `#` comments are skipped.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut findings: Vec<Finding> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
            }
            let list = |s: &str| -> Vec<String> {
                s.split(',').map(str::trim).filter(|w| !w.is_empty()).map(String::from).collect()
            };
            let name = fields[0].trim().to_string();
            let triggers = list(fields[1]);
            if name.is_empty() || triggers.is_empty() {
                return Err(err("finding needs a name and at least one trigger".into()));
            }
            if findings.iter().any(|f| f.name == name) {
                return Err(err(format!("duplicate finding {name:?}")));
            }
            findings.push(Finding {
                name,
                triggers,
                negations: list(fields[2]),
            });
        }
        if findings.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: "lexicon defines no findings".into(),
            });
        }
        Ok(Lexicon { findings })
    }

    pub fn findings(&self) -> &[Finding] {
        &self.findings
    }

    pub fn len(&self) -> usize {
        self.findings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.findings.iter().position(|f| f.name == name)
    }

    pub fn name(&self, finding: usize) -> &str {
        &self.findings[finding].name
    }

    pub fn label_set<S: AsRef<str>>(&self, names: &[S]) -> Result<LabelSet> {
        names
            .iter()
            .map(|n| {
                self.index_of(n.as_ref())
                    .ok_or_else(|| Error::Contract(format!("unknown finding {:?}", n.as_ref())))
            })
            .collect()
    }

    pub fn names(&self, labels: &LabelSet) -> Vec<String> {
        labels.iter().map(|i| self.name(i).to_string()).collect()
    }

    /// Labels a whitespace-tokenised report.
    pub fn extract_labels(&self, tokens: &[&str]) -> LabelSet {
        let labeler = Labeler::build(self, |w| Some(w.to_string()));
        let keys: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
        labeler.extract(&keys)
    }
}

#[derive(Clone, Debug, Default)]
struct Roles {
    triggers: Vec<usize>,
    negates: Vec<usize>,
}

/// A lexicon compiled onto token keys, typically vocabulary ids.
#[derive(Clone, Debug)]
pub struct Labeler<K: std::hash::Hash + Eq> {
    roles: HashMap<K, Roles>,
}

impl<K: std::hash::Hash + Eq + Clone> Labeler<K> {
    /// `key` maps a lexicon word to its token key; words without a key are
    /// dropped since they can never occur.
    pub fn build(lexicon: &Lexicon, key: impl Fn(&str) -> Option<K>) -> Self {
        let mut roles: HashMap<K, Roles> = HashMap::new();
        for (i, f) in lexicon.findings.iter().enumerate() {
            for w in &f.triggers {
                if let Some(k) = key(w) {
                    roles.entry(k).or_default().triggers.push(i);
                }
            }
            for w in &f.negations {
                if let Some(k) = key(w) {
                    roles.entry(k).or_default().negates.push(i);
                }
            }
        }
        Labeler { roles }
    }

    /// A finding is present iff some trigger occurrence has none of that
    /// finding's negations among the preceding [`NEGATION_WINDOW`] tokens.
    pub fn extract(&self, tokens: &[K]) -> LabelSet {
        let mut out = LabelSet::new();
        for (pos, tok) in tokens.iter().enumerate() {
            let Some(r) = self.roles.get(tok) else { continue };
            for &finding in &r.triggers {
                let window = &tokens[pos.saturating_sub(NEGATION_WINDOW)..pos];
                let negated = window.iter().any(|w| {
                    self.roles
                        .get(w)
                        .is_some_and(|wr| wr.negates.contains(&finding))
                });
                if !negated {
                    out.insert(finding);
                }
            }
        }
        out
    }
}

/// Precision, recall and F1 of generated labels against reference labels.
///
/// Empty-set conventions: both empty gives `(1, 1, 1)`; an empty generation
/// against a non-empty reference gives `(0, 0, 0)`; a non-empty generation
/// against an empty reference gives `(0, 1, 0)`.
pub fn ce_prf(generated: &LabelSet, reference: &LabelSet) -> (f64, f64, f64) {
    match (generated.is_empty(), reference.is_empty()) {
        (true, true) => (1.0, 1.0, 1.0),
        (true, false) => (0.0, 0.0, 0.0),
        (false, true) => (0.0, 1.0, 0.0),
        (false, false) => {
            let hit = generated.intersection_len(reference) as f64;
            let p = hit / generated.len() as f64;
            let r = hit / reference.len() as f64;
            let f1 = if hit == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            (p, r, f1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn bundled_lexicon_has_fourteen_findings() {
        let lex = Lexicon::default_chest();
        assert_eq!(lex.len(), 14);
        assert_eq!(lex.name(1), "effusion");
    }

    #[test]
    fn trigger_and_negation_window() {
        let lex = Lexicon::default_chest();
        let eff = lex.index_of("effusion").unwrap();
        assert_eq!(lex.extract_labels(&toks("small left effusion .")), [eff].into_iter().collect());
        assert!(lex.extract_labels(&toks("no effusion .")).is_empty());
        // Negation exactly three tokens back still applies; four back does not.
        assert!(lex.extract_labels(&toks("no large left effusion")).is_empty());
        assert_eq!(lex.extract_labels(&toks("no a large left effusion")).len(), 1);
        // Order matters: a negation after the trigger does not negate it.
        assert_eq!(lex.extract_labels(&toks("effusion no")).len(), 1);
        // A second, un-negated mention counts.
        assert_eq!(lex.extract_labels(&toks("no effusion but then a b c effusion")).len(), 1);
    }

    #[test]
    fn ce_scores_and_conventions() {
        let lex = Lexicon::default_chest();
        let s = |names: &[&str]| lex.label_set(names).unwrap();
        assert_eq!(ce_prf(&s(&["effusion"]), &s(&["effusion"])), (1.0, 1.0, 1.0));
        assert_eq!(
            ce_prf(&s(&["effusion", "edema"]), &s(&["effusion", "cardiomegaly"])),
            (0.5, 0.5, 0.5)
        );
        assert_eq!(ce_prf(&s(&[]), &s(&[])), (1.0, 1.0, 1.0));
        assert_eq!(ce_prf(&s(&[]), &s(&["edema"])), (0.0, 0.0, 0.0));
        assert_eq!(ce_prf(&s(&["edema"]), &s(&[])), (0.0, 1.0, 0.0));
        assert_eq!(ce_prf(&s(&["edema"]), &s(&["effusion"])), (0.0, 0.0, 0.0));
    }

    #[test]
    fn parse_errors_cite_line() {
        let err = Lexicon::parse("# c\nedema\tedema\tno\nbroken line\n", Path::new("lex.tsv")).unwrap_err();
        assert!(err.to_string().starts_with("lex.tsv:3:"), "{err}");
    }
}
