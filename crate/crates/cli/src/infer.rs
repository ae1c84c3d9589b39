use std::io::Write as _;
use std::path::PathBuf;

use anyhow::Context as _;
use prefseq::corpus::{self, CorpusRecord, Example, Split, Vocab};
use prefseq::metrics::{Objective, Scorer};
use prefseq::model::{Model, Strategy};
use prefseq::trainer::{enumerate_preference_grid, evaluate as evaluate_split, preference_sweep, EvalStrategy};
use prefseq::PreferenceVector;

use crate::gen_corpus::Corpus;
use crate::{parse_preference, CliError, CliResult, RunConfig, RunPaths};

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Checkpoint to load; defaults to the run's stage-2 checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Corpus directory the run was trained on.
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum StrategyArg {
    Greedy,
    Beam,
    Sample,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Item id, e.g. `item-000480`.
    #[arg(long)]
    pub item: String,
    /// Comma-separated preference weights summing to one.
    #[arg(long, value_parser = parse_preference)]
    pub pref: PreferenceVector,
    #[arg(long, value_enum, default_value_t = StrategyArg::Greedy)]
    pub strategy: StrategyArg,
    /// Beam width.
    #[arg(long, default_value_t = 3)]
    pub width: usize,
    /// Sampling temperature.
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Sampling seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, clap::Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_parser = parse_preference)]
    pub pref: PreferenceVector,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Beam width; greedy decoding when absent.
    #[arg(long)]
    pub beam: Option<usize>,
}

#[derive(Debug, clap::Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Grid step; `1/interval` must be an integer.
    #[arg(long, default_value_t = 0.1)]
    pub interval: f64,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// CSV output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG line chart of each metric against grid index.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

struct Loaded {
    config: RunConfig,
    model: Model,
    vocab: Vocab,
    corpus: Corpus,
    scorer: Scorer,
}

impl Loaded {
    fn open(args: &RunArgs) -> CliResult<Loaded> {
        let paths = RunPaths::new(&args.run);
        let config = RunConfig::load(&paths.config())?;
        let vocab = Vocab::load(&paths.vocab())?;
        let ckpt = args.checkpoint.clone().unwrap_or_else(|| paths.checkpoint(2));
        let model = Model::load(config.model.clone(), &ckpt).with_context(|| format!("loading {}", ckpt.display()))?;
        let corpus = crate::gen_corpus::load(&args.corpus)?;
        let scorer = corpus::scorer(&corpus.lexicon, &vocab);
        Ok(Loaded {
            config,
            model,
            vocab,
            corpus,
            scorer,
        })
    }

    fn check_pref(&self, p: &PreferenceVector) -> CliResult<()> {
        if p.dim() != self.config.model.pref_dim {
            return Err(CliError::Usage(format!(
                "preference has {} weights but the model expects {}",
                p.dim(),
                self.config.model.pref_dim
            )));
        }
        Ok(())
    }

    fn examples(&self, split: Split) -> CliResult<Vec<Example>> {
        Ok(corpus::examples(self.corpus.splits.get(split), &self.vocab, &self.corpus.lexicon)?)
    }

    fn record(&self, id: &str) -> CliResult<&CorpusRecord> {
        self.corpus
            .splits
            .all()
            .find(|r| r.id == id)
            .ok_or_else(|| CliError::Usage(format!("no item with id {id:?} in the corpus")))
    }
}

pub fn generate(args: GenerateArgs) -> CliResult<()> {
    let run = Loaded::open(&args.run)?;
    run.check_pref(&args.pref)?;
    if !(args.temperature > 0.0 && args.temperature.is_finite()) {
        return Err(CliError::Usage(format!("temperature must be positive, got {}", args.temperature)));
    }
    if args.strategy == StrategyArg::Beam && args.width == 0 {
        return Err(CliError::Usage("beam width must be at least 1".into()));
    }
    let ex = Example::from_record(run.record(&args.item)?, &run.vocab, &run.corpus.lexicon)?;
    let mut rng = prefseq::rng::seeded(args.seed);
    let strategy = match args.strategy {
        StrategyArg::Greedy => Strategy::Greedy,
        StrategyArg::Beam => Strategy::Beam { width: args.width },
        StrategyArg::Sample => Strategy::Sample {
            temperature: args.temperature,
            rng: &mut rng,
        },
    };
    let gen = run.model.generate(&ex.features, &args.pref, strategy)?;
    let mut out = std::io::stdout().lock();
    let io = |e| anyhow::Error::new(e).context("writing to stdout");
    writeln!(out, "{}", run.vocab.decode(&gen.tokens)).map_err(io)?;
    for o in Objective::ALL {
        writeln!(out, "{o}\t{}", run.scorer.score(o, &gen.tokens, &ex.reference)).map_err(io)?;
    }
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    let run = Loaded::open(&args.run)?;
    run.check_pref(&args.pref)?;
    let strategy = match args.beam {
        None => EvalStrategy::Greedy,
        Some(0) => return Err(CliError::Usage("beam width must be at least 1".into())),
        Some(w) => EvalStrategy::Beam(w),
    };
    let examples = run.examples(args.split.into())?;
    let scores = evaluate_split(&run.model, &examples, &args.pref, &Objective::ALL, &run.scorer, strategy)?;
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    let err = |e: csv::Error| anyhow::Error::new(e).context("writing to stdout");
    w.write_record(Objective::ALL.iter().map(Objective::to_string)).map_err(err)?;
    w.write_record(scores.iter().map(f64::to_string)).map_err(err)?;
    w.flush().context("writing to stdout")?;
    Ok(())
}

pub fn sweep(args: SweepArgs) -> CliResult<()> {
    let run = Loaded::open(&args.run)?;
    let grid = enumerate_preference_grid(run.config.model.pref_dim, args.interval)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let examples = run.examples(args.split.into())?;
    let table = preference_sweep(&run.model, &examples, &grid, &run.config.train.objectives, &run.scorer)?;
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
            table.write_csv(std::io::BufWriter::new(file))?;
        }
        None => table.write_csv(std::io::stdout().lock())?,
    }
    if let Some(path) = &args.plot {
        std::fs::write(path, crate::plot::sweep_svg(&table)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
