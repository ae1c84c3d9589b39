use crate::corpus::Example;
use crate::error::{Error, Result};
use crate::metrics::{Objective, Scorer};
use crate::model::{Model, Strategy};
use crate::preference::PreferenceVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalStrategy {
    Greedy,
    Beam(usize),
}

/// Mean of each objective over `examples`, decoding under `p`.
pub fn evaluate(
    model: &Model,
    examples: &[Example],
    p: &PreferenceVector,
    objectives: &[Objective],
    scorer: &Scorer,
    strategy: EvalStrategy,
) -> Result<Vec<f64>> {
    if examples.is_empty() {
        return Err(Error::Contract("evaluation split is empty".into()));
    }
    let mut sums = vec![0.0; objectives.len()];
    for ex in examples {
        let s = match strategy {
            EvalStrategy::Greedy => Strategy::Greedy,
            EvalStrategy::Beam(width) => Strategy::Beam { width },
        };
        let gen = model.generate(&ex.features, p, s)?;
        for (acc, &o) in sums.iter_mut().zip(objectives) {
            *acc += scorer.score(o, &gen.tokens, &ex.reference);
        }
    }
    let n = examples.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// One row of mean metrics per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub objectives: Vec<Objective>,
    pub rows: Vec<(PreferenceVector, Vec<f64>)>,
}

impl SweepTable {
    /// CSV with columns `p_1..p_m` followed by one column per objective.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let m = self.rows.first().map(|(p, _)| p.dim()).unwrap_or(self.objectives.len());
        let mut header: Vec<String> = (1..=m).map(|i| format!("p_{i}")).collect();
        header.extend(self.objectives.iter().map(Objective::to_string));
        let err = |e: csv::Error| Error::Contract(format!("writing sweep: {e}"));
        out.write_record(&header).map_err(err)?;
        for (p, metrics) in &self.rows {
            let rec: Vec<String> = p.weights().iter().chain(metrics).map(f64::to_string).collect();
            out.write_record(&rec).map_err(err)?;
        }
        out.flush().map_err(|e| Error::io("sweep", e))
    }

    pub fn column(&self, objective: usize) -> Vec<f64> {
        self.rows.iter().map(|(_, m)| m[objective]).collect()
    }
}

/// Greedy-decodes every example at every grid point.
pub fn preference_sweep(
    model: &Model,
    examples: &[Example],
    grid: &[PreferenceVector],
    objectives: &[Objective],
    scorer: &Scorer,
) -> Result<SweepTable> {
    let rows = grid
        .iter()
        .map(|p| Ok((p.clone(), evaluate(model, examples, p, objectives, scorer, EvalStrategy::Greedy)?)))
        .collect::<Result<_>>()?;
    Ok(SweepTable {
        objectives: objectives.to_vec(),
        rows,
    })
}
