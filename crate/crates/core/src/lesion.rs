//! Artificial aphasia: re-randomize named submodules of a trained model and
//! report how its translations and test precision degrade.

use crate::autodiff::{fan_in_bound, Tensor};
use crate::data::{ParallelPair, STOP_TOKEN};
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{LstmParams, Seq2SeqModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

/// Damage sites. Ordering fixes the re-randomization sequence when several
/// are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LesionTarget {
    /// Encoder, decoder, input embeddings, and the output projection.
    Lstms,
    LexiconUnit,
    /// Inert at inference; damage exists for completeness.
    Adversary,
}

impl std::str::FromStr for LesionTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstms" => Ok(LesionTarget::Lstms),
            "lexicon" => Ok(LesionTarget::LexiconUnit),
            "adversary" => Ok(LesionTarget::Adversary),
            other => Err(Error::Config(format!(
                "unknown lesion target {other:?} (expected lstms, lexicon, or adversary)"
            ))),
        }
    }
}

impl std::fmt::Display for LesionTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LesionTarget::Lstms => "lstms",
            LesionTarget::LexiconUnit => "lexicon",
            LesionTarget::Adversary => "adversary",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LesionSpec {
    pub targets: BTreeSet<LesionTarget>,
    pub seed: u64,
}

impl LesionSpec {
    pub fn new(targets: impl IntoIterator<Item = LesionTarget>, seed: u64) -> Result<Self> {
        let targets: BTreeSet<_> = targets.into_iter().collect();
        if targets.is_empty() {
            return Err(Error::Config("lesion needs at least one target".into()));
        }
        Ok(LesionSpec { targets, seed })
    }

    /// Parses a comma-separated target list.
    pub fn parse(list: &str, seed: u64) -> Result<Self> {
        let targets = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<LesionTarget>>>()?;
        LesionSpec::new(targets, seed)
    }

    pub fn label(&self) -> String {
        self.targets.iter().map(ToString::to_string).collect::<Vec<_>>().join("+")
    }
}

/// Returns a damaged copy: every parameter of each target is re-drawn from
/// its fresh-initialization distribution (the lexicon from uniform(-1,1), so
/// its gate becomes informative noise instead of the neutral zero table).
/// The source model is untouched.
pub fn apply_lesion(model: &Seq2SeqModel, spec: &LesionSpec) -> Result<Seq2SeqModel> {
    if spec.targets.is_empty() {
        return Err(Error::Config("lesion needs at least one target".into()));
    }
    let mut damaged = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let config = model.config;
    let (v_in, v_out) = (model.input_vocab.len(), model.output_vocab.len());
    for target in &spec.targets {
        match target {
            LesionTarget::Lstms => {
                damaged.input_embedding =
                    Tensor::uniform(vec![v_in, config.embed], fan_in_bound(config.embed), &mut rng);
                damaged.encoder = LstmParams::init(config.hidden, config.embed, &mut rng);
                damaged.decoder = LstmParams::init(config.hidden, config.embed, &mut rng);
                damaged.output_projection = Tensor::uniform(
                    vec![v_out, config.hidden],
                    fan_in_bound(config.hidden),
                    &mut rng,
                );
            }
            LesionTarget::LexiconUnit => {
                let lex = damaged.lexicon.as_mut().ok_or_else(|| {
                    Error::Config("variant has no lexicon to damage".into())
                })?;
                *lex = Tensor::uniform(vec![v_in, v_out], 1.0, &mut rng);
            }
            LesionTarget::Adversary => {
                let adv = damaged.adversary.as_mut().ok_or_else(|| {
                    Error::Config("variant has no adversary to damage".into())
                })?;
                adv.w1 = Tensor::uniform(
                    vec![config.adversary_hidden, 2 * config.hidden],
                    fan_in_bound(2 * config.hidden),
                    &mut rng,
                );
                adv.w2 = Tensor::uniform(
                    vec![v_out, config.adversary_hidden],
                    fan_in_bound(config.adversary_hidden),
                    &mut rng,
                );
            }
        }
    }
    Ok(damaged)
}

fn probe_rows(
    model: &Seq2SeqModel,
    label: &str,
    probes: &[Vec<String>],
    max_len: usize,
    out: &mut String,
) -> Result<()> {
    for probe in probes {
        let input = model.input_vocab.encode_with_unk(probe);
        let ids = model.greedy_translate(&input, max_len)?;
        let words = model.output_vocab.decode(&ids)?;
        out.push_str(&format!("{label}\t{}\t{}\n", probe.join(" "), words.join(" ")));
    }
    Ok(())
}

/// Mean type-level precision of greedy decodes over `pairs`, as a percentage.
/// Token identity — not count or position — is what damage is expected to
/// spare or destroy: a damaged model that stalls on one licensed word, or
/// says nothing at all, is still precise; one that substitutes unrelated
/// words is not.
pub fn mean_type_precision(
    model: &Seq2SeqModel,
    pairs: &[ParallelPair],
    max_len: usize,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Config("precision needs at least one pair".into()));
    }
    let mut total = 0.0;
    for pair in pairs {
        let input = model.input_vocab.encode_with_unk(&pair.input);
        let ids = model.greedy_translate(&input, max_len)?;
        let pred = model.output_vocab.decode(&ids)?;
        let mut gold = pair.output.clone();
        if gold.last().map(String::as_str) == Some(STOP_TOKEN) {
            gold.pop();
        }
        total += metrics::type_precision(&pred, &gold);
    }
    Ok(100.0 * total / pairs.len() as f64)
}

fn precision_row(
    model: &Seq2SeqModel,
    label: &str,
    test_pairs: &[ParallelPair],
    max_len: usize,
    out: &mut String,
) -> Result<()> {
    let precision = mean_type_precision(model, test_pairs, max_len)?;
    out.push_str(&format!("{label}\tprecision\t{precision:.2}\n"));
    Ok(())
}

/// Tab-separated damage report: per-probe translations and mean test
/// precision for the intact model, then for the damaged copy.
pub fn lesion_report(
    model: &Seq2SeqModel,
    spec: &LesionSpec,
    test_pairs: &[ParallelPair],
    probes: &[Vec<String>],
    max_len: usize,
) -> Result<String> {
    let damaged = apply_lesion(model, spec)?;
    let mut out = String::from("damage\tinput\toutput\n");
    probe_rows(model, "none", probes, max_len, &mut out)?;
    if !test_pairs.is_empty() {
        precision_row(model, "none", test_pairs, max_len, &mut out)?;
    }
    let label = spec.label();
    probe_rows(&damaged, &label, probes, max_len, &mut out)?;
    if !test_pairs.is_empty() {
        precision_row(&damaged, &label, test_pairs, max_len, &mut out)?;
    }
    Ok(out)
}
