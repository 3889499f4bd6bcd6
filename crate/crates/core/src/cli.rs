//! The `lla` command line: train, eval, translate, lexicon-dump, lesion.
//!
//! Training configuration can come from a flat `key=value` file; explicit
//! command-line flags override file values, which override built-in defaults.

use crate::checkpoint;
use crate::data::{self, Domain, ParallelPair, Vocabulary};
use crate::error::{Error, Result};
use crate::lesion::{self, LesionSpec};
use crate::metrics::MetricsReport;
use crate::model::{ModelConfig, ModelVariant, Seq2SeqModel};
use crate::training::{self, TrainSchedule, ValidationMetric};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "lla", about = "Lexicon-gated LSTM sequence-to-sequence toolkit", version)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint, vocabularies, and log.
    Train(TrainArgs),
    /// Score a checkpoint on a parallel corpus.
    Eval(EvalArgs),
    /// Greedily translate stdin lines.
    Translate(TranslateArgs),
    /// Dump lexicon gate values for given input words.
    LexiconDump(LexiconDumpArgs),
    /// Damage trained submodules and report the behavior change.
    Lesion(LesionArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Flat key=value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Data domain: colors, geo, wsj, or zh.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long = "train-data", value_name = "TSV")]
    train_data: Option<PathBuf>,
    #[arg(long = "val-data", value_name = "TSV")]
    val_data: Option<PathBuf>,
    /// Optional; folded into the vocabularies so test tokens are representable.
    #[arg(long = "test-data", value_name = "TSV")]
    test_data: Option<PathBuf>,
    /// Model variant: lla, lla-noadv, or plain.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Total epochs (both stages share this count).
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "lexicon-epochs")]
    lexicon_epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long = "lexicon-batch")]
    lexicon_batch: Option<usize>,
    #[arg(long = "lexicon-lr")]
    lexicon_lr: Option<f64>,
    /// Gradient-reversal strength; 0 disables the adversary term.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    embed: Option<usize>,
    #[arg(long = "adversary-hidden")]
    adversary_hidden: Option<usize>,
    /// Validation metric: exact or bleu.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long = "max-len")]
    max_len: Option<usize>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, value_name = "TSV")]
    data: PathBuf,
    /// Also compute corpus BLEU.
    #[arg(long)]
    bleu: bool,
    #[arg(long = "max-len", default_value_t = 1000)]
    max_len: usize,
    /// Defaults to vocab_in.txt next to the checkpoint.
    #[arg(long = "vocab-in")]
    vocab_in: Option<PathBuf>,
    /// Defaults to vocab_out.txt next to the checkpoint.
    #[arg(long = "vocab-out")]
    vocab_out: Option<PathBuf>,
}

#[derive(Args)]
struct TranslateArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long = "max-len", default_value_t = 1000)]
    max_len: usize,
    #[arg(long = "vocab-in")]
    vocab_in: Option<PathBuf>,
    #[arg(long = "vocab-out")]
    vocab_out: Option<PathBuf>,
}

#[derive(Args)]
struct LexiconDumpArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Keep rows with gate value >= this.
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    #[arg(long = "vocab-in")]
    vocab_in: Option<PathBuf>,
    #[arg(long = "vocab-out")]
    vocab_out: Option<PathBuf>,
    /// Input words to dump.
    #[arg(required = true)]
    words: Vec<String>,
}

#[derive(Args)]
struct LesionArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Comma-separated targets: lstms, lexicon, adversary.
    #[arg(long)]
    targets: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Test corpus for the precision rows.
    #[arg(long, value_name = "TSV")]
    data: Option<PathBuf>,
    /// File of probe inputs, one per line.
    #[arg(long)]
    probes: Option<PathBuf>,
    #[arg(long = "max-len", default_value_t = 1000)]
    max_len: usize,
    #[arg(long = "vocab-in")]
    vocab_in: Option<PathBuf>,
    #[arg(long = "vocab-out")]
    vocab_out: Option<PathBuf>,
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Translate(args) => cmd_translate(args),
        Command::LexiconDump(args) => cmd_lexicon_dump(args),
        Command::Lesion(args) => cmd_lesion(args),
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("file {} does not exist", path.display())))
    }
}

const CONFIG_KEYS: &[&str] = &[
    "domain",
    "train_data",
    "val_data",
    "test_data",
    "variant",
    "seed",
    "epochs",
    "lexicon_epochs",
    "batch",
    "lexicon_batch",
    "lexicon_lr",
    "lambda",
    "hidden",
    "embed",
    "adversary_hidden",
    "metric",
    "max_len",
];

/// Parses a flat key=value file: one setting per line, '#' comments, blank
/// lines ignored, later keys override earlier ones.
fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    require_file(path)?;
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{}:{}: expected key=value, got {line:?}",
                path.display(),
                i + 1
            )));
        };
        let key = key.trim().to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "{}:{}: unknown key {key:?}",
                path.display(),
                i + 1
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn parse_key<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

/// Fully resolved training run: flag > config file > default.
#[derive(Debug)]
struct TrainPlan {
    domain: Domain,
    train_data: PathBuf,
    val_data: PathBuf,
    test_data: Option<PathBuf>,
    variant: ModelVariant,
    seed: u64,
    hidden: usize,
    embed: usize,
    adversary_hidden: usize,
    metric: ValidationMetric,
    schedule: TrainSchedule,
}

impl TrainPlan {
    fn resolve(args: &TrainArgs) -> Result<TrainPlan> {
        let file = match &args.config {
            Some(path) => read_config(path)?,
            None => BTreeMap::new(),
        };
        let get = |key: &str| file.get(key).map(String::as_str);
        macro_rules! pick {
            ($flag:expr, $key:literal, $default:expr) => {
                match (&$flag, get($key)) {
                    (Some(v), _) => v.clone(),
                    (None, Some(v)) => parse_key($key, v)?,
                    (None, None) => $default,
                }
            };
        }
        let domain: String = pick!(args.domain, "domain", {
            return Err(Error::Config("domain is required (flag or config file)".into()));
        });
        let train_data: PathBuf = pick!(args.train_data, "train_data", {
            return Err(Error::Config("train_data is required (flag or config file)".into()));
        });
        let val_data: PathBuf = pick!(args.val_data, "val_data", {
            return Err(Error::Config("val_data is required (flag or config file)".into()));
        });
        let test_data: Option<PathBuf> = match (&args.test_data, get("test_data")) {
            (Some(v), _) => Some(v.clone()),
            (None, Some(v)) => Some(parse_key("test_data", v)?),
            (None, None) => None,
        };
        let variant: String = pick!(args.variant, "variant", "lla".to_string());
        let metric: String = pick!(args.metric, "metric", "exact".to_string());
        let schedule = TrainSchedule {
            lexicon_epochs: pick!(args.lexicon_epochs, "lexicon_epochs", 30),
            total_epochs: pick!(args.epochs, "epochs", 1000),
            lexicon_batch: pick!(args.lexicon_batch, "lexicon_batch", 1),
            main_batch: pick!(args.batch, "batch", 30),
            lexicon_lr: pick!(args.lexicon_lr, "lexicon_lr", 0.1),
            adversary_lambda: pick!(args.lambda, "lambda", 1e-4),
            seed: pick!(args.seed, "seed", 0),
            max_len: pick!(args.max_len, "max_len", 1000),
        };
        schedule.validate()?;
        Ok(TrainPlan {
            domain: domain.parse()?,
            train_data,
            val_data,
            test_data,
            variant: variant.parse()?,
            seed: schedule.seed,
            hidden: pick!(args.hidden, "hidden", 300),
            embed: pick!(args.embed, "embed", 300),
            adversary_hidden: pick!(args.adversary_hidden, "adversary_hidden", 1000),
            metric: metric.parse()?,
            schedule,
        })
    }

    /// The resolved settings, serialized back to the config format.
    fn to_config(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("domain = {}\n", self.domain));
        s.push_str(&format!("train_data = {}\n", self.train_data.display()));
        s.push_str(&format!("val_data = {}\n", self.val_data.display()));
        if let Some(t) = &self.test_data {
            s.push_str(&format!("test_data = {}\n", t.display()));
        }
        s.push_str(&format!("variant = {}\n", self.variant));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("epochs = {}\n", self.schedule.total_epochs));
        s.push_str(&format!("lexicon_epochs = {}\n", self.schedule.lexicon_epochs));
        s.push_str(&format!("batch = {}\n", self.schedule.main_batch));
        s.push_str(&format!("lexicon_batch = {}\n", self.schedule.lexicon_batch));
        s.push_str(&format!("lexicon_lr = {}\n", self.schedule.lexicon_lr));
        s.push_str(&format!("lambda = {}\n", self.schedule.adversary_lambda));
        s.push_str(&format!("hidden = {}\n", self.hidden));
        s.push_str(&format!("embed = {}\n", self.embed));
        s.push_str(&format!("adversary_hidden = {}\n", self.adversary_hidden));
        let metric = match self.metric {
            ValidationMetric::ExactMatch => "exact",
            ValidationMetric::Bleu => "bleu",
        };
        s.push_str(&format!("metric = {}\n", metric));
        s.push_str(&format!("max_len = {}\n", self.schedule.max_len));
        s
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let plan = TrainPlan::resolve(&args)?;
    require_file(&plan.train_data)?;
    require_file(&plan.val_data)?;
    if let Some(t) = &plan.test_data {
        require_file(t)?;
    }
    let (in_mode, out_mode) = plan.domain.modes();
    let train_pairs = data::load_tsv(&plan.train_data, in_mode, out_mode)?;
    let val_pairs = data::load_tsv(&plan.val_data, in_mode, out_mode)?;
    let test_pairs = match &plan.test_data {
        Some(p) => data::load_tsv(p, in_mode, out_mode)?,
        None => Vec::new(),
    };
    let splits: [&[ParallelPair]; 3] = [&train_pairs, &val_pairs, &test_pairs];
    let vin = data::build_vocab_all(&splits, data::Side::Input)?;
    let vout = data::build_vocab_all(&splits, data::Side::Output)?;

    let config = ModelConfig {
        hidden: plan.hidden,
        embed: plan.embed,
        adversary_hidden: plan.adversary_hidden,
        variant: plan.variant,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut model = Seq2SeqModel::new(config, vin, vout, &mut rng)?;
    let train_enc = training::encode_pairs(&model, &train_pairs)?;
    let val_enc = training::encode_pairs(&model, &val_pairs)?;
    let logs =
        training::train_two_stage(&mut model, &train_enc, &val_enc, &plan.schedule, plan.metric)?;

    std::fs::create_dir_all(&args.out)?;
    model.input_vocab.save(&args.out.join("vocab_in.txt"))?;
    model.output_vocab.save(&args.out.join("vocab_out.txt"))?;
    checkpoint::save_model(&args.out.join("best.ckpt"), &model, plan.domain)?;
    std::fs::write(args.out.join("train_log.tsv"), training::format_log(&logs))?;
    std::fs::write(args.out.join("config.txt"), plan.to_config())?;

    let best = logs
        .iter()
        .filter(|l| l.stage == 2)
        .map(|l| l.val_score)
        .fold(f64::NEG_INFINITY, f64::max);
    println!("trained {} on {}: best validation score {:.2}", plan.variant, plan.domain, best);
    println!("artifacts in {}", args.out.display());
    Ok(())
}

fn load_checkpoint(
    ckpt: &Path,
    vocab_in: &Option<PathBuf>,
    vocab_out: &Option<PathBuf>,
) -> Result<(Seq2SeqModel, Domain)> {
    let dir = ckpt.parent().map(Path::to_path_buf).unwrap_or_default();
    let vin_path = vocab_in.clone().unwrap_or_else(|| dir.join("vocab_in.txt"));
    let vout_path = vocab_out.clone().unwrap_or_else(|| dir.join("vocab_out.txt"));
    require_file(ckpt)?;
    require_file(&vin_path)?;
    require_file(&vout_path)?;
    let vin = Vocabulary::load(&vin_path)?;
    let vout = Vocabulary::load(&vout_path)?;
    checkpoint::load_model(ckpt, vin, vout)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (model, domain) = load_checkpoint(&args.ckpt, &args.vocab_in, &args.vocab_out)?;
    require_file(&args.data)?;
    let (in_mode, out_mode) = domain.modes();
    let pairs = data::load_tsv(&args.data, in_mode, out_mode)?;
    let report = training::evaluate_model(&model, &pairs, args.bleu, args.max_len)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", MetricsReport::header(args.bleu))?;
    writeln!(out, "{}", report.to_tsv_row())?;
    Ok(())
}

fn cmd_translate(args: TranslateArgs) -> Result<()> {
    let (model, domain) = load_checkpoint(&args.ckpt, &args.vocab_in, &args.vocab_out)?;
    let (in_mode, _) = domain.modes();
    let stdin = std::io::stdin().lock();
    let mut out = std::io::stdout().lock();
    for line in stdin.lines() {
        let line = line?;
        if line.trim().is_empty() {
            writeln!(out)?;
            continue;
        }
        let tokens = data::tokenize(&line, in_mode)?;
        let unknown: Vec<&str> = tokens
            .iter()
            .filter(|t| model.input_vocab.id(t).is_none())
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            eprintln!("warning: unknown token(s) {}", unknown.join(", "));
        }
        let ids = model.input_vocab.encode_with_unk(&tokens);
        let translated = model.greedy_translate(&ids, args.max_len)?;
        writeln!(out, "{}", model.output_vocab.decode(&translated)?.join(" "))?;
    }
    Ok(())
}

fn cmd_lexicon_dump(args: LexiconDumpArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(Error::Config(format!("threshold {} outside [0, 1]", args.threshold)));
    }
    let (model, _) = load_checkpoint(&args.ckpt, &args.vocab_in, &args.vocab_out)?;
    if model.lexicon.is_none() {
        return Err(Error::Config("variant has no lexicon".into()));
    }
    let unknown: Vec<&str> = args
        .words
        .iter()
        .filter(|w| model.input_vocab.id(w).is_none())
        .map(String::as_str)
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Config(format!("unknown word(s): {}", unknown.join(", "))));
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "word\toutput\tvalue")?;
    for word in &args.words {
        let id = model.input_vocab.id(word).expect("checked above");
        let gate = model.lexicon_gate(&[id])?;
        let mut rows: Vec<(usize, f64)> = gate.into_iter().enumerate().collect();
        rows.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("gate values are finite"));
        for (token_id, value) in rows {
            if value >= args.threshold {
                writeln!(out, "{word}\t{}\t{value:.4}", model.output_vocab.token(token_id)?)?;
            }
        }
    }
    Ok(())
}

fn cmd_lesion(args: LesionArgs) -> Result<()> {
    let (model, domain) = load_checkpoint(&args.ckpt, &args.vocab_in, &args.vocab_out)?;
    let spec = LesionSpec::parse(&args.targets, args.seed)?;
    let (in_mode, out_mode) = domain.modes();
    let test_pairs = match &args.data {
        Some(p) => {
            require_file(p)?;
            data::load_tsv(p, in_mode, out_mode)?
        }
        None => Vec::new(),
    };
    let probes = match &args.probes {
        Some(p) => {
            require_file(p)?;
            let text = std::fs::read_to_string(p)?;
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| data::tokenize(l, in_mode))
                .collect::<Result<Vec<_>>>()?
        }
        None => Vec::new(),
    };
    let report = lesion::lesion_report(&model, &spec, &test_pairs, &probes, args.max_len)?;
    print!("{report}");
    Ok(())
}
