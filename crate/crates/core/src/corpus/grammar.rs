//! Two report grammars over the same scenes.
//!
//! FLUENT reports wrap findings in fixed connective phrasing and, with some
//! probability, leave out the last finding. TERSE reports list every finding
//! as a short `finding severity .` clause. Against FLUENT references the
//! FLUENT grammar wins on word overlap while TERSE wins on label F1.

use rand::Rng as _;

use super::scene::Scene;
use crate::metrics::Lexicon;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Fluent,
    Terse,
}

const OPENERS: [&str; 2] = ["the chest radiograph shows", "frontal and lateral views show"];

/// Renders a FLUENT report. `omit_prob` is the chance that the last
/// finding (in lexicon order) is left unmentioned.
pub fn render_fluent(scene: &Scene, lexicon: &Lexicon, omit_prob: f64, rng: &mut Rng) -> String {
    let opener = OPENERS[rng.random_range(0..OPENERS.len())];
    let mut mentioned = scene.findings.clone();
    if rng.random::<f64>() < omit_prob {
        mentioned.pop();
    }
    let mut words: Vec<&str> = opener.split(' ').collect();
    if mentioned.is_empty() {
        words.extend(["no", "acute", "disease", "."]);
    } else {
        for (i, &(f, sev)) in mentioned.iter().enumerate() {
            if i > 0 {
                words.push(if i + 1 == mentioned.len() { "and" } else { "," });
            }
            words.push(sev.word());
            words.push(lexicon.name(f));
        }
        words.push(".");
    }
    let pneumothorax = lexicon.index_of("pneumothorax");
    if mentioned.iter().any(|&(f, _)| Some(f) == pneumothorax) {
        words.extend(["the", "lungs", "are", "otherwise", "clear", "."]);
    } else {
        words.extend(["there", "is", "no", "pneumothorax", "."]);
    }
    words.join(" ")
}

/// Renders a TERSE report: one `finding severity .` clause per finding.
pub fn render_terse(scene: &Scene, lexicon: &Lexicon) -> String {
    let mut words = Vec::new();
    for &(f, sev) in &scene.findings {
        words.extend([lexicon.name(f), sev.word(), "."]);
    }
    words.join(" ")
}

pub fn render(scene: &Scene, style: Style, lexicon: &Lexicon, omit_prob: f64, rng: &mut Rng) -> String {
    match style {
        Style::Fluent => render_fluent(scene, lexicon, omit_prob, rng),
        Style::Terse => render_terse(scene, lexicon),
    }
}
