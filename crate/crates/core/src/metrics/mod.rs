//! Reward objectives: text-overlap scores (BLEU-n, ROUGE-L), clinical label
//! scores from a keyword labeler, and the preference-weighted reward algebra.

mod bleu;
mod labels;
mod reward;
mod rouge;

pub use bleu::{bleu, brevity_penalty, ngram_matches};
pub use labels::{ce_prf, Finding, LabelSet, Labeler, Lexicon, DEFAULT_LEXICON, NEGATION_WINDOW};
pub use reward::{weighted_reward, Objective, Reference, RewardVector, Scorer};
pub use rouge::{lcs_len, rouge_l, DEFAULT_ROUGE_BETA};
