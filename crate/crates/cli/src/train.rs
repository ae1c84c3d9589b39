use std::path::PathBuf;

use anyhow::Context as _;
use prefseq::corpus;
use prefseq::model::{FusionMode, Model};
use prefseq::trainer::{Stage, Trainer};

use crate::gen_corpus::LEXICON_FILE;
use crate::manifest::{now, CorpusRef, Manifest};
use crate::{CliError, CliResult, RunConfig, RunPaths};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Corpus directory written by `gen-corpus`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Run directory for checkpoints, log, config and manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file with `[model]` and `[train]` sections; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs1: Option<usize>,
    #[arg(long)]
    pub epochs2: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr1: Option<f64>,
    #[arg(long)]
    pub lr2: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Monte-Carlo rollouts per item in stage 2.
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// Fusion residual scale.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub fusion: Option<Fusion>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum Fusion {
    Projected,
    Literal,
}

fn resolve(args: &Args, corpus: &crate::gen_corpus::Corpus) -> CliResult<RunConfig> {
    let mut c = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let t = &mut c.train;
    if let Some(v) = args.epochs1 {
        t.epochs1 = v;
    }
    if let Some(v) = args.epochs2 {
        t.epochs2 = v;
    }
    if let Some(v) = args.seed {
        t.seed = v;
    }
    if let Some(v) = args.lr1 {
        t.lr1 = v;
    }
    if let Some(v) = args.lr2 {
        t.lr2 = v;
    }
    if let Some(v) = args.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = args.n_samples {
        t.n_samples = v;
    }
    t.threads = crate::threads_from_env()?;
    if let Some(v) = args.alpha {
        c.model.alpha = v;
    }
    if let Some(f) = args.fusion {
        c.model.fusion = match f {
            Fusion::Projected => FusionMode::Projected,
            Fusion::Literal => FusionMode::Literal,
        };
    }
    // Sizes fixed by the data and the objective list.
    let first = corpus
        .splits
        .train
        .first()
        .ok_or_else(|| anyhow::anyhow!("corpus has no training items"))?;
    c.model.vocab_size = corpus.vocab.len();
    c.model.patches = first.features.rows();
    c.model.d_in = first.features.cols();
    c.model.pref_dim = c.train.pref_dim();
    c.validate()?;
    Ok(c)
}

pub fn run(args: Args) -> CliResult<()> {
    let corpus_data = crate::gen_corpus::load(&args.corpus)?;
    let config = resolve(&args, &corpus_data)?;
    let paths = RunPaths::new(&args.out);
    std::fs::create_dir_all(&paths.dir).with_context(|| format!("creating {}", paths.dir.display()))?;

    let mut manifest = Manifest {
        version: env!("PREFSEQ_DESCRIBE").to_string(),
        argv: std::env::args().collect(),
        seed: config.train.seed,
        config: config.clone(),
        corpus: CorpusRef::hash_dir(
            &args.corpus,
            &["train.jsonl", "val.jsonl", "test.jsonl", "vocab.txt", LEXICON_FILE],
        )?,
        checkpoints: [1, 2].map(|s| paths.checkpoint(s).display().to_string()).to_vec(),
        log: paths.log().display().to_string(),
        threads: config.train.threads,
        started_at: now(),
        finished_at: None,
    };
    manifest.save(&paths.manifest())?;
    config.save(&paths.config())?;
    corpus_data.vocab.save(&paths.vocab())?;

    let train = corpus::examples(&corpus_data.splits.train, &corpus_data.vocab, &corpus_data.lexicon)?;
    let scorer = corpus::scorer(&corpus_data.lexicon, &corpus_data.vocab);
    let mut model = Model::new(config.model.clone(), config.train.seed)?;
    let trainer = Trainer::new(&config.train, &scorer).map_err(|e| CliError::Usage(e.to_string()))?;
    let log = trainer
        .train(&mut model, &train, |stage: Stage, m: &Model| {
            let path = paths.checkpoint(stage.number());
            m.save(&path)?;
            eprintln!("stage {} done, wrote {}", stage.number(), path.display());
            Ok(())
        })
        .context("training aborted")?;

    let file = std::fs::File::create(paths.log()).with_context(|| format!("writing {}", paths.log().display()))?;
    log.write_csv(std::io::BufWriter::new(file))?;
    manifest.finished_at = Some(now());
    manifest.save(&paths.manifest())?;
    if let Some(last) = log.rows.last() {
        println!("final\tstage {}\tepoch {}\tloss {}", last.stage.number(), last.epoch, last.loss);
    }
    println!("checkpoint\t{}", paths.checkpoint(2).display());
    Ok(())
}
