//! Two-stage optimization: the lexicon table alone first, then everything
//! else with the lexicon frozen. Per-epoch validation drives best-epoch
//! selection in both stages.

use crate::autodiff::{AdamState, Tape};
use crate::data::ParallelPair;
use crate::error::{Error, Result};
use crate::metrics::{self, MetricsReport};
use crate::model::{lexicon_target, Seq2SeqModel};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Epsilon inside the step loss `-ln(o'_t + eps)`; keeps the loss finite when
/// the gate zeroes a needed token.
pub const LOG_EPS: f64 = 1e-12;

/// Epsilon for clamped binary cross-entropy, shared with the tape op.
const BCE_EPS: f64 = 1e-12;

// Shuffle streams are seeded independently of model initialization so that
// variants with different parameter counts still see identical data order
// under one seed.
const LEXICON_SHUFFLE_SALT: u64 = 0x9e3779b97f4a7c15;
const MAIN_SHUFFLE_SALT: u64 = 0xd1b54a32d192ed03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSchedule {
    /// Stage-1 epochs; stage 2 runs from here to `total_epochs`.
    pub lexicon_epochs: usize,
    pub total_epochs: usize,
    pub lexicon_batch: usize,
    pub main_batch: usize,
    pub lexicon_lr: f64,
    /// Gradient-reversal strength; 0 disables the adversary term entirely.
    pub adversary_lambda: f64,
    pub seed: u64,
    /// Inference cap for greedy decoding.
    pub max_len: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            lexicon_epochs: 30,
            total_epochs: 1000,
            lexicon_batch: 1,
            main_batch: 30,
            lexicon_lr: 0.1,
            adversary_lambda: 1e-4,
            seed: 0,
            max_len: 1000,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.lexicon_epochs >= self.total_epochs {
            return Err(Error::Config(format!(
                "lexicon epochs ({}) must be below total epochs ({})",
                self.lexicon_epochs, self.total_epochs
            )));
        }
        if self.lexicon_batch == 0 || self.main_batch == 0 {
            return Err(Error::Config("batch sizes must be >= 1".into()));
        }
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be >= 1".into()));
        }
        if self.adversary_lambda < 0.0 || !self.adversary_lambda.is_finite() {
            return Err(Error::Config("adversary lambda must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Stage-2 model selection criterion; stage 1 always selects on validation
/// BCE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMetric {
    ExactMatch,
    Bleu,
}

impl std::str::FromStr for ValidationMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ValidationMetric::ExactMatch),
            "bleu" => Ok(ValidationMetric::Bleu),
            other => Err(Error::Config(format!("unknown validation metric {other:?}"))),
        }
    }
}

/// Id-encoded pair ready for the training loops.
#[derive(Debug, Clone)]
pub struct EncodedPair {
    pub input: Vec<usize>,
    pub output: Vec<usize>,
}

/// Encodes pairs against the model's vocabularies; input-side unknowns map to
/// the virtual UNK id, output-side unknowns are errors.
pub fn encode_pairs(model: &Seq2SeqModel, pairs: &[ParallelPair]) -> Result<Vec<EncodedPair>> {
    pairs
        .iter()
        .map(|p| {
            Ok(EncodedPair {
                input: model.input_vocab.encode_with_unk(&p.input),
                output: model.output_vocab.encode_strict(&p.output)?,
            })
        })
        .collect()
}

/// One training-log line.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub stage: u8,
    pub train_loss: f64,
    pub val_score: f64,
}

/// Tab-separated log with header, one line per epoch.
pub fn format_log(logs: &[EpochLog]) -> String {
    let mut s = String::from("epoch\tstage\ttrain_loss\tval_score\n");
    for l in logs {
        s.push_str(&format!("{}\t{}\t{:.9}\t{:.9}\n", l.epoch, l.stage, l.train_loss, l.val_score));
    }
    s
}

/// Index of the best score: maximum (or minimum) with earliest-epoch
/// tie-breaking.
pub fn best_index(scores: &[f64], higher_is_better: bool) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        let improved = if higher_is_better { s > scores[best] } else { s < scores[best] };
        if improved {
            best = i;
        }
    }
    best
}

fn clamped_bce(pred: &[f64], target: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&p, &t) in pred.iter().zip(target) {
        let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        total -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    }
    total / pred.len() as f64
}

/// Mean validation BCE of the lexicon gate.
fn lexicon_val_bce(model: &Seq2SeqModel, pairs: &[EncodedPair]) -> Result<f64> {
    let v_out = model.output_vocab.len();
    let mut total = 0.0;
    for pair in pairs {
        let gate = model.lexicon_gate(&pair.input)?;
        let target = lexicon_target(&pair.output, v_out)?;
        total += clamped_bce(&gate, &target);
    }
    Ok(total / pairs.len() as f64)
}

/// Stage 1: trains only the lexicon rows with sparse Adam, selecting the
/// epoch with the lowest validation BCE and installing those rows.
pub fn train_lexicon(
    model: &mut Seq2SeqModel,
    train: &[EncodedPair],
    val: &[EncodedPair],
    schedule: &TrainSchedule,
) -> Result<Vec<EpochLog>> {
    schedule.validate()?;
    if model.lexicon.is_none() {
        return Err(Error::Config("variant has no lexicon to train".into()));
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config("training and validation sets must be non-empty".into()));
    }
    let v_out = model.output_vocab.len();
    let numel = model.lexicon.as_ref().unwrap().numel();
    let mut adam = AdamState::new(numel, schedule.lexicon_lr);
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed ^ LEXICON_SHUFFLE_SALT);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut logs = Vec::with_capacity(schedule.lexicon_epochs);
    let mut best: Option<(f64, Vec<f64>)> = None;

    for epoch in 1..=schedule.lexicon_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(schedule.lexicon_batch) {
            let mut tape = Tape::new();
            // Rows shared across the chunk accumulate gradient naturally.
            let mut row_values = std::collections::BTreeMap::new();
            let mut losses = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                let pair = &train[idx];
                let rows = model.participating_rows(&pair.input);
                if rows.is_empty() {
                    return Err(Error::Precondition {
                        op: "train_lexicon",
                        msg: "pair has no in-vocabulary input tokens".into(),
                    });
                }
                let lex = model.lexicon.as_ref().unwrap();
                let mut pool = Vec::with_capacity(rows.len());
                for r in rows {
                    let v = match row_values.get(&r) {
                        Some(&v) => v,
                        None => {
                            let v =
                                tape.leaf(&[v_out], &lex.data[r * v_out..(r + 1) * v_out], true)?;
                            row_values.insert(r, v);
                            v
                        }
                    };
                    pool.push(v);
                }
                let pooled = tape.maxpool(&pool)?;
                let gate = tape.sigmoid(pooled);
                let target = lexicon_target(&pair.output, v_out)?;
                let target = tape.constant(&[v_out], &target)?;
                losses.push(tape.bce_loss(gate, target)?);
            }
            let joined = tape.concat(&losses)?;
            let total = tape.sum(joined);
            let scale = tape.scalar(1.0 / chunk.len() as f64);
            let loss = tape.mul(total, scale)?;
            let loss_val = tape.data(loss)[0];
            if !loss_val.is_finite() {
                return Err(Error::Numeric {
                    what: "non-finite lexicon loss",
                    param: format!("stage 1 epoch {epoch}"),
                });
            }
            loss_sum += loss_val * chunk.len() as f64;
            tape.backward(loss)?;
            let row_grads: Vec<(usize, Vec<f64>)> = row_values
                .iter()
                .filter_map(|(&r, &v)| tape.grad(v).map(|g| (r, g.to_vec())))
                .collect();
            let lex = model.lexicon.as_mut().unwrap();
            adam.step_rows("lex", &mut lex.data, v_out, &row_grads)?;
        }
        let val_bce = lexicon_val_bce(model, val)?;
        logs.push(EpochLog {
            epoch,
            stage: 1,
            train_loss: loss_sum / train.len() as f64,
            val_score: val_bce,
        });
        let improved = best.as_ref().map_or(true, |(b, _)| val_bce < *b);
        if improved {
            best = Some((val_bce, model.lexicon.as_ref().unwrap().data.clone()));
        }
    }

    if let Some((_, rows)) = best {
        model.lexicon.as_mut().unwrap().data = rows;
    }
    Ok(logs)
}

fn snapshot(model: &Seq2SeqModel) -> Vec<(String, Vec<f64>)> {
    model.named_params().into_iter().map(|(n, t)| (n, t.data.clone())).collect()
}

fn restore(model: &mut Seq2SeqModel, snap: &[(String, Vec<f64>)]) {
    for ((name, tensor), (snap_name, data)) in model.named_params_mut().into_iter().zip(snap) {
        debug_assert_eq!(&name, snap_name);
        tensor.data.clone_from(data);
    }
}

/// Validation score for stage 2 as a percentage (mean exact match or corpus
/// BLEU).
fn validate_main(
    model: &Seq2SeqModel,
    val: &[EncodedPair],
    metric: ValidationMetric,
    max_len: usize,
) -> Result<f64> {
    match metric {
        ValidationMetric::ExactMatch => {
            // One shared binding; decodes are capped near gold length, which
            // is enough to decide exactness.
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape, false)?;
            let mut hits = 0usize;
            for pair in val {
                let pred = model.greedy_on_tape(&mut tape, &bound, &pair.input, pair.output.len())?;
                let gold = &pair.output[..pair.output.len() - 1];
                if pred == gold {
                    hits += 1;
                }
            }
            Ok(100.0 * hits as f64 / val.len() as f64)
        }
        ValidationMetric::Bleu => {
            // Full-length decodes can be long; use one tape per pair.
            let mut preds = Vec::with_capacity(val.len());
            let mut golds = Vec::with_capacity(val.len());
            for pair in val {
                let pred = model.greedy_translate(&pair.input, max_len)?;
                preds.push(pred);
                golds.push(pair.output[..pair.output.len() - 1].to_vec());
            }
            Ok(100.0 * metrics::corpus_bleu(&preds, &golds)?)
        }
    }
}

/// Stage 2: trains encoder, decoder, output projection, and (for the
/// adversarial variant with lambda > 0) the adversary, with the lexicon
/// frozen and acting through a detached constant gate. Installs the
/// best-validation parameters before returning.
pub fn train_main(
    model: &mut Seq2SeqModel,
    train: &[EncodedPair],
    val: &[EncodedPair],
    schedule: &TrainSchedule,
    metric: ValidationMetric,
) -> Result<Vec<EpochLog>> {
    schedule.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config("training and validation sets must be non-empty".into()));
    }
    let uses_lexicon = model.config.variant.uses_lexicon();
    let adversary_on =
        model.config.variant.uses_adversary() && schedule.adversary_lambda > 0.0;
    let v_out = model.output_vocab.len();

    let mut optimizers: std::collections::BTreeMap<String, AdamState> = model
        .named_params()
        .into_iter()
        .filter(|(name, _)| trainable_in_main(name, adversary_on))
        .map(|(name, t)| (name.clone(), AdamState::with_defaults(t.numel())))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed ^ MAIN_SHUFFLE_SALT);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut logs = Vec::new();
    let mut best: Option<(f64, Vec<(String, Vec<f64>)>)> = None;

    for epoch in (schedule.lexicon_epochs + 1)..=schedule.total_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(schedule.main_batch).enumerate() {
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape, adversary_on)?;
            let mut pair_losses = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                let pair = &train[idx];
                let gate = if uses_lexicon {
                    let g = model.lexicon_gate(&pair.input)?;
                    Some(tape.constant(&[v_out], &g)?)
                } else {
                    None
                };
                let state = model.encode_on_tape(&mut tape, &bound, &pair.input)?;
                let steps =
                    model.decode_on_tape(&mut tape, &bound, state, gate, pair.output.len())?;
                let mut step_losses = Vec::with_capacity(steps.len());
                for (step, &gold_id) in steps.iter().zip(&pair.output) {
                    let lp = tape.ln_eps(step.o_gated, LOG_EPS)?;
                    step_losses.push(tape.nll_loss(lp, gold_id)?);
                }
                let seq = tape.concat(&step_losses)?;
                let mut pair_loss = tape.sum(seq);
                if adversary_on {
                    let l_a = self_adversary(model, &mut tape, &bound, state, schedule)?;
                    // The gate value doubles as the detached target.
                    let target = gate.expect("adversarial variant always gates");
                    let adv_loss = tape.bce_loss(l_a, target)?;
                    pair_loss = tape.add(pair_loss, adv_loss)?;
                }
                pair_losses.push(pair_loss);
            }
            let joined = tape.concat(&pair_losses)?;
            let total = tape.sum(joined);
            let scale = tape.scalar(1.0 / chunk.len() as f64);
            let loss = tape.mul(total, scale)?;
            let loss_val = tape.data(loss)[0];
            if !loss_val.is_finite() {
                return Err(Error::Numeric {
                    what: "non-finite loss",
                    param: format!("stage 2 epoch {epoch} batch {batch_idx}"),
                });
            }
            loss_sum += loss_val * chunk.len() as f64;
            tape.backward(loss)?;
            model.harvest_grads(&tape, &bound);
            for (name, tensor) in model.named_params_mut() {
                if let Some(opt) = optimizers.get_mut(&name) {
                    if let Some(grad) = tensor.grad.take() {
                        opt.step(&name, &mut tensor.data, &grad)?;
                    }
                } else {
                    tensor.grad = None;
                }
            }
        }
        let val_score = validate_main(model, val, metric, schedule.max_len)?;
        logs.push(EpochLog {
            epoch,
            stage: 2,
            train_loss: loss_sum / train.len() as f64,
            val_score,
        });
        let improved = best.as_ref().map_or(true, |(b, _)| val_score > *b);
        if improved {
            best = Some((val_score, snapshot(model)));
        }
    }

    if let Some((_, snap)) = best {
        restore(model, &snap);
    }
    Ok(logs)
}

fn self_adversary(
    model: &Seq2SeqModel,
    tape: &mut Tape,
    bound: &crate::model::BoundModel,
    state: (crate::autodiff::Value, crate::autodiff::Value),
    schedule: &TrainSchedule,
) -> Result<crate::autodiff::Value> {
    model.adversary_on_tape(tape, bound, state, schedule.adversary_lambda)
}

fn trainable_in_main(name: &str, adversary_on: bool) -> bool {
    if name == "lex" {
        return false;
    }
    if name.starts_with("adv.") {
        return adversary_on;
    }
    true
}

/// Full schedule: stage 1 for lexicon variants, then stage 2. Returns the
/// concatenated per-epoch logs.
pub fn train_two_stage(
    model: &mut Seq2SeqModel,
    train: &[EncodedPair],
    val: &[EncodedPair],
    schedule: &TrainSchedule,
    metric: ValidationMetric,
) -> Result<Vec<EpochLog>> {
    let mut logs = Vec::new();
    if model.config.variant.uses_lexicon() {
        logs.extend(train_lexicon(model, train, val, schedule)?);
    }
    logs.extend(train_main(model, train, val, schedule, metric)?);
    Ok(logs)
}

/// Greedy-translates every pair on a frozen model and aggregates the scores.
/// Comparison is over token strings, so reference tokens outside the output
/// vocabulary simply never match.
pub fn evaluate_model(
    model: &Seq2SeqModel,
    pairs: &[ParallelPair],
    with_bleu: bool,
    max_len: usize,
) -> Result<MetricsReport> {
    let mut preds = Vec::with_capacity(pairs.len());
    let mut golds = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let input = model.input_vocab.encode_with_unk(&pair.input);
        // Long degenerate decodes are possible; a private tape per pair keeps
        // memory bounded.
        let ids = model.greedy_translate(&input, max_len)?;
        preds.push(model.output_vocab.decode(&ids)?);
        let mut gold = pair.output.clone();
        if gold.last().map(String::as_str) == Some(crate::data::STOP_TOKEN) {
            gold.pop();
        }
        golds.push(gold);
    }
    metrics::aggregate(&preds, &golds, with_bleu)
}
