use std::path::{Path, PathBuf};

use anyhow::Context as _;
use prefseq::corpus::{self, CorpusSpec, Splits, Vocab};
use prefseq::metrics::{Lexicon, DEFAULT_LEXICON};

use crate::{CliError, CliResult};

/// File name of the lexicon copied into every corpus directory.
pub const LEXICON_FILE: &str = "lexicon.tsv";

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Number of items across all splits.
    #[arg(long, default_value_t = 600, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Share of training items rendered with the fluent grammar.
    #[arg(long, default_value_t = 0.7)]
    pub mix: f64,
    /// Probability that a fluent report leaves out one finding.
    #[arg(long, default_value_t = 0.95)]
    pub omit: f64,
    #[arg(long, default_value_t = 4)]
    pub max_findings: usize,
    /// Finding lexicon (`name<TAB>triggers<TAB>negations`); defaults to the bundled one.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: Args) -> CliResult<()> {
    let spec = CorpusSpec {
        n_items: args.n as usize,
        seed: args.seed,
        style_mix: args.mix,
        omit_prob: args.omit,
        max_findings: args.max_findings,
        ..CorpusSpec::default()
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let lexicon_text = match &args.lexicon {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => DEFAULT_LEXICON.to_string(),
    };
    let lexicon = Lexicon::parse(&lexicon_text, args.lexicon.as_deref().unwrap_or(Path::new(LEXICON_FILE)))?;
    let splits = corpus::generate(&spec, &lexicon)?;
    let vocab = corpus::save_splits(&args.out, &splits)?;
    let lex_path = args.out.join(LEXICON_FILE);
    std::fs::write(&lex_path, lexicon_text).with_context(|| format!("writing {}", lex_path.display()))?;
    println!("train\t{}", splits.train.len());
    println!("val\t{}", splits.val.len());
    println!("test\t{}", splits.test.len());
    println!("vocab\t{}", vocab.len());
    Ok(())
}

/// A corpus directory loaded back from disk.
pub struct Corpus {
    pub splits: Splits,
    pub vocab: Vocab,
    pub lexicon: Lexicon,
}

pub fn load(dir: &Path) -> CliResult<Corpus> {
    if !dir.is_dir() {
        return Err(anyhow::anyhow!("corpus directory {} does not exist", dir.display()).into());
    }
    let (splits, vocab) = corpus::load_splits(dir)?;
    let lex_path = dir.join(LEXICON_FILE);
    let lexicon = if lex_path.exists() {
        Lexicon::load(&lex_path)?
    } else {
        Lexicon::default_chest()
    };
    Ok(Corpus { splits, vocab, lexicon })
}
