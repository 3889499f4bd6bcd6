//! Python module `lla_lstm`: training, checkpoint loading, translation,
//! lexicon inspection, damage experiments, and the evaluation scores.

use lla_core::data::{self, Domain, ParallelPair, Side};
use lla_core::lesion::{self, LesionSpec};
use lla_core::model::{ModelConfig, ModelVariant, Seq2SeqModel};
use lla_core::training::{self, TrainSchedule, ValidationMetric};
use lla_core::{checkpoint, metrics};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::PathBuf;

fn err(e: lla_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A trained sequence-to-sequence model together with its data domain.
#[pyclass(frozen)]
struct Model {
    inner: Seq2SeqModel,
    domain: Domain,
}

#[pymethods]
impl Model {
    /// Loads `best.ckpt`, `vocab_in.txt`, and `vocab_out.txt` from a
    /// training output directory.
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        let vin = data::Vocabulary::load(&dir.join("vocab_in.txt")).map_err(err)?;
        let vout = data::Vocabulary::load(&dir.join("vocab_out.txt")).map_err(err)?;
        let (inner, domain) =
            checkpoint::load_model(&dir.join("best.ckpt"), vin, vout).map_err(err)?;
        Ok(Model { inner, domain })
    }

    #[getter]
    fn variant(&self) -> String {
        self.inner.config.variant.to_string()
    }

    #[getter]
    fn domain(&self) -> String {
        self.domain.to_string()
    }

    /// Greedy translation of one input line; unknown words embed as zeros.
    #[pyo3(signature = (text, max_len = 1000))]
    fn translate(&self, text: &str, max_len: usize) -> PyResult<String> {
        let (in_mode, _) = self.domain.modes();
        let tokens = data::tokenize(text, in_mode).map_err(err)?;
        let ids = self.inner.input_vocab.encode_with_unk(&tokens);
        let out = self.inner.greedy_translate(&ids, max_len).map_err(err)?;
        Ok(self.inner.output_vocab.decode(&out).map_err(err)?.join(" "))
    }

    /// Lexicon gate values for one input word, keyed by output token.
    fn lexicon(&self, word: &str) -> PyResult<BTreeMap<String, f64>> {
        let id = self
            .inner
            .input_vocab
            .id(word)
            .ok_or_else(|| PyValueError::new_err(format!("unknown word {word:?}")))?;
        let gate = self.inner.lexicon_gate(&[id]).map_err(err)?;
        let mut map = BTreeMap::new();
        for (token_id, value) in gate.into_iter().enumerate() {
            map.insert(self.inner.output_vocab.token(token_id).map_err(err)?.to_string(), value);
        }
        Ok(map)
    }

    /// Returns a damaged copy: the comma-separated targets (`lstms`,
    /// `lexicon`, `adversary`) are re-randomized under the given seed.
    #[pyo3(signature = (targets, seed = 0))]
    fn lesion(&self, targets: &str, seed: u64) -> PyResult<Self> {
        let spec = LesionSpec::parse(targets, seed).map_err(err)?;
        let inner = lesion::apply_lesion(&self.inner, &spec).map_err(err)?;
        Ok(Model { inner, domain: self.domain })
    }

    /// Scores the model on a parallel TSV; keys `precision`, `recall`,
    /// `accuracy`, `exact` (percentages), plus `bleu` when requested.
    #[pyo3(signature = (data_tsv, bleu = false, max_len = 1000))]
    fn evaluate(
        &self,
        data_tsv: PathBuf,
        bleu: bool,
        max_len: usize,
    ) -> PyResult<BTreeMap<String, f64>> {
        let (in_mode, out_mode) = self.domain.modes();
        let pairs = data::load_tsv(&data_tsv, in_mode, out_mode).map_err(err)?;
        let report = training::evaluate_model(&self.inner, &pairs, bleu, max_len).map_err(err)?;
        let mut map = BTreeMap::new();
        map.insert("precision".to_string(), report.mean_precision);
        map.insert("recall".to_string(), report.mean_recall);
        map.insert("accuracy".to_string(), report.mean_accuracy);
        map.insert("exact".to_string(), report.mean_exact);
        if let Some(b) = report.corpus_bleu {
            map.insert("bleu".to_string(), b);
        }
        Ok(map)
    }
}

/// Trains a model and writes `best.ckpt`, vocabularies, and the training log
/// into `out`; returns the best main-stage validation score.
#[pyfunction]
#[pyo3(signature = (
    domain, train_data, val_data, out, test_data = None, variant = "lla", seed = 0,
    epochs = 1000, lexicon_epochs = 30, batch = 30, lexicon_batch = 1, lexicon_lr = 0.1,
    lambda_ = 1e-4, hidden = 300, embed = 300, adversary_hidden = 1000,
    metric = "exact", max_len = 1000
))]
#[allow(clippy::too_many_arguments)]
fn train(
    domain: &str,
    train_data: PathBuf,
    val_data: PathBuf,
    out: PathBuf,
    test_data: Option<PathBuf>,
    variant: &str,
    seed: u64,
    epochs: usize,
    lexicon_epochs: usize,
    batch: usize,
    lexicon_batch: usize,
    lexicon_lr: f64,
    lambda_: f64,
    hidden: usize,
    embed: usize,
    adversary_hidden: usize,
    metric: &str,
    max_len: usize,
) -> PyResult<f64> {
    let domain: Domain = domain.parse().map_err(err)?;
    let variant: ModelVariant = variant.parse().map_err(err)?;
    let metric: ValidationMetric = metric.parse().map_err(err)?;
    let (in_mode, out_mode) = domain.modes();
    let train_pairs = data::load_tsv(&train_data, in_mode, out_mode).map_err(err)?;
    let val_pairs = data::load_tsv(&val_data, in_mode, out_mode).map_err(err)?;
    let test_pairs = match &test_data {
        Some(p) => data::load_tsv(p, in_mode, out_mode).map_err(err)?,
        None => Vec::new(),
    };
    let splits: [&[ParallelPair]; 3] = [&train_pairs, &val_pairs, &test_pairs];
    let vin = data::build_vocab_all(&splits, Side::Input).map_err(err)?;
    let vout = data::build_vocab_all(&splits, Side::Output).map_err(err)?;

    let config = ModelConfig { hidden, embed, adversary_hidden, variant };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Seq2SeqModel::new(config, vin, vout, &mut rng).map_err(err)?;
    let train_enc = training::encode_pairs(&model, &train_pairs).map_err(err)?;
    let val_enc = training::encode_pairs(&model, &val_pairs).map_err(err)?;
    let schedule = TrainSchedule {
        lexicon_epochs,
        total_epochs: epochs,
        lexicon_batch,
        main_batch: batch,
        lexicon_lr,
        adversary_lambda: lambda_,
        seed,
        max_len,
    };
    let logs = training::train_two_stage(&mut model, &train_enc, &val_enc, &schedule, metric)
        .map_err(err)?;

    std::fs::create_dir_all(&out)?;
    model.input_vocab.save(&out.join("vocab_in.txt")).map_err(err)?;
    model.output_vocab.save(&out.join("vocab_out.txt")).map_err(err)?;
    checkpoint::save_model(&out.join("best.ckpt"), &model, domain).map_err(err)?;
    std::fs::write(out.join("train_log.tsv"), training::format_log(&logs))?;

    Ok(logs
        .iter()
        .filter(|l| l.stage == 2)
        .map(|l| l.val_score)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Token-level precision, recall, positional accuracy, and exact match of
/// one prediction against one reference, as fractions.
#[pyfunction]
fn pair_scores(pred: Vec<String>, gold: Vec<String>) -> (f64, f64, f64, f64) {
    let s = metrics::pair_scores(&pred, &gold);
    (s.precision, s.recall, s.accuracy, s.exact)
}

/// Type-level precision (distinct predicted tokens found in the reference);
/// an empty prediction is vacuously precise.
#[pyfunction]
fn type_precision(pred: Vec<String>, gold: Vec<String>) -> f64 {
    metrics::type_precision(&pred, &gold)
}

/// Corpus BLEU as a fraction.
#[pyfunction]
fn corpus_bleu(preds: Vec<Vec<String>>, golds: Vec<Vec<String>>) -> PyResult<f64> {
    metrics::corpus_bleu(&preds, &golds).map_err(err)
}

/// Input-side tokenization for a domain.
#[pyfunction]
fn tokenize(domain: &str, text: &str) -> PyResult<Vec<String>> {
    let domain: Domain = domain.parse().map_err(err)?;
    let (in_mode, _) = domain.modes();
    data::tokenize(text, in_mode).map_err(err)
}

/// Writes a damage report (probe translations and type-precision rows) for a
/// model directory, mirroring the command-line `lesion` subcommand.
#[pyfunction]
#[pyo3(signature = (dir, targets, seed = 0, data_tsv = None, probes = None, max_len = 1000))]
fn lesion_report(
    dir: PathBuf,
    targets: &str,
    seed: u64,
    data_tsv: Option<PathBuf>,
    probes: Option<Vec<String>>,
    max_len: usize,
) -> PyResult<String> {
    let model = Model::load(dir)?;
    let spec = LesionSpec::parse(targets, seed).map_err(err)?;
    let (in_mode, out_mode) = model.domain.modes();
    let pairs = match &data_tsv {
        Some(p) => data::load_tsv(p, in_mode, out_mode).map_err(err)?,
        None => Vec::new(),
    };
    let probe_tokens = probes
        .unwrap_or_default()
        .iter()
        .map(|line| data::tokenize(line, in_mode))
        .collect::<lla_core::Result<Vec<_>>>()
        .map_err(err)?;
    lesion::lesion_report(&model.inner, &spec, &pairs, &probe_tokens, max_len).map_err(err)
}

#[pymodule]
fn lla_lstm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(pair_scores, m)?)?;
    m.add_function(wrap_pyfunction!(type_precision, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_bleu, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(lesion_report, m)?)?;
    Ok(())
}
