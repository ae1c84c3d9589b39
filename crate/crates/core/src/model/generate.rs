use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use super::infer::DecodeState;
use crate::autodiff::log_softmax;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Decoding strategy. Sampling takes its RNG explicitly.
pub enum Strategy<'r> {
    Greedy,
    Sample { temperature: f64, rng: &'r mut Rng },
    Beam { width: usize },
}

/// A decoded sequence. `tokens` excludes `<eos>`; `step_log_probs` holds
/// `log π(y_t | y_<t)` under the model (temperature 1) for every emitted
/// step, including the `<eos>` step when there is one.
#[derive(Clone, Debug, PartialEq)]
pub struct Generation {
    pub tokens: Vec<usize>,
    pub step_log_probs: Vec<f64>,
    pub log_prob: f64,
    pub ended_with_eos: bool,
}

impl Generation {
    fn new(tokens: Vec<usize>, step_log_probs: Vec<f64>, ended_with_eos: bool) -> Self {
        Generation {
            log_prob: step_log_probs.iter().sum(),
            tokens,
            step_log_probs,
            ended_with_eos,
        }
    }
}

pub fn decode<S: DecodeState>(state: S, max_len: usize, eos: Option<usize>, strategy: Strategy<'_>) -> Result<Generation> {
    match strategy {
        Strategy::Greedy => greedy(state, max_len, eos),
        Strategy::Sample { temperature, rng } => sample(state, max_len, eos, temperature, rng),
        Strategy::Beam { width } => beam(state, max_len, eos, width),
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn run<S: DecodeState>(
    mut state: S,
    max_len: usize,
    eos: Option<usize>,
    mut choose: impl FnMut(&[f64]) -> Result<usize>,
) -> Result<Generation> {
    let mut tokens = Vec::new();
    let mut lps = Vec::new();
    while tokens.len() < max_len {
        let logits = state.logits();
        let tok = choose(logits)?;
        lps.push(log_softmax(logits)[tok]);
        if Some(tok) == eos {
            return Ok(Generation::new(tokens, lps, true));
        }
        tokens.push(tok);
        if tokens.len() < max_len {
            state.push(tok)?;
        }
    }
    Ok(Generation::new(tokens, lps, false))
}

/// Highest-scoring token at every step; ties go to the lowest id.
pub fn greedy<S: DecodeState>(state: S, max_len: usize, eos: Option<usize>) -> Result<Generation> {
    run(state, max_len, eos, |l| Ok(argmax(l)))
}

pub fn sample<S: DecodeState>(
    state: S,
    max_len: usize,
    eos: Option<usize>,
    temperature: f64,
    rng: &mut Rng,
) -> Result<Generation> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
    }
    run(state, max_len, eos, |logits| {
        let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scaled.iter().map(|l| (l - max).exp()).collect();
        let dist = WeightedIndex::new(&weights).map_err(|e| Error::Contract(format!("sampling weights: {e}")))?;
        Ok(dist.sample(rng))
    })
}

struct Hyp<S> {
    state: S,
    tokens: Vec<usize>,
    lps: Vec<f64>,
    score: f64,
    done: Option<bool>,
}

/// Beam search on total log-probability, without length normalisation.
/// Candidates are ranked stably, so ties keep beam order then token order.
pub fn beam<S: DecodeState>(state: S, max_len: usize, eos: Option<usize>, width: usize) -> Result<Generation> {
    if width == 0 {
        return Err(Error::Config("beam width must be at least 1".into()));
    }
    let mut beams = vec![Hyp {
        state,
        tokens: Vec::new(),
        lps: Vec::new(),
        score: 0.0,
        done: (max_len == 0).then_some(false),
    }];
    while beams.iter().any(|h| h.done.is_none()) {
        // (score, beam, token, token log-prob)
        let mut cands: Vec<(f64, usize, Option<(usize, f64)>)> = Vec::new();
        for (bi, h) in beams.iter().enumerate() {
            if h.done.is_some() {
                cands.push((h.score, bi, None));
                continue;
            }
            for (tok, lp) in log_softmax(h.state.logits()).into_iter().enumerate() {
                cands.push((h.score + lp, bi, Some((tok, lp))));
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        cands.truncate(width);
        let mut next = Vec::with_capacity(cands.len());
        for (score, bi, ext) in cands {
            let parent = &beams[bi];
            let Some((tok, lp)) = ext else {
                next.push(Hyp {
                    state: parent.state.clone(),
                    tokens: parent.tokens.clone(),
                    lps: parent.lps.clone(),
                    score,
                    done: parent.done,
                });
                continue;
            };
            let mut h = Hyp {
                state: parent.state.clone(),
                tokens: parent.tokens.clone(),
                lps: parent.lps.clone(),
                score,
                done: None,
            };
            h.lps.push(lp);
            if Some(tok) == eos {
                h.done = Some(true);
            } else {
                h.tokens.push(tok);
                if h.tokens.len() == max_len {
                    h.done = Some(false);
                } else {
                    h.state.push(tok)?;
                }
            }
            next.push(h);
        }
        beams = next;
    }
    let best = beams.into_iter().next().expect("beam is non-empty");
    Ok(Generation::new(best.tokens, best.lps, best.done == Some(true)))
}
