//! Evaluation scores: per-pair precision/recall/accuracy/exact and
//! corpus-level BLEU. Stop tokens must be stripped before scoring.

use crate::error::{Error, Result};
use std::collections::HashMap;

/// Per-pair scores as fractions in [0,1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScores {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub exact: f64,
}

/// Multiset intersection size.
fn intersection_size<T: Eq + Ord>(pred: &[T], gold: &[T]) -> usize {
    let mut counts = std::collections::BTreeMap::new();
    for g in gold {
        *counts.entry(g).or_insert(0usize) += 1;
    }
    let mut hits = 0;
    for p in pred {
        if let Some(c) = counts.get_mut(p) {
            if *c > 0 {
                *c -= 1;
                hits += 1;
            }
        }
    }
    hits
}

/// Token-level scores for one prediction against one reference.
///
/// Precision and recall count multiset overlap; an empty prediction scores 0
/// against a non-empty reference. Accuracy is positional agreement divided by
/// the longer length; exact is whole-sequence equality.
pub fn pair_scores<T: Eq + Ord>(pred: &[T], gold: &[T]) -> PairScores {
    let inter = intersection_size(pred, gold) as f64;
    let precision = if pred.is_empty() {
        if gold.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        inter / pred.len() as f64
    };
    let recall = if gold.is_empty() {
        if pred.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        inter / gold.len() as f64
    };
    let exact = if pred == gold { 1.0 } else { 0.0 };
    let longer = pred.len().max(gold.len());
    let accuracy = if longer == 0 {
        1.0
    } else {
        let matched = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
        matched as f64 / longer as f64
    };
    PairScores { precision, recall, accuracy, exact }
}

/// Type-level precision: the fraction of distinct predicted tokens that also
/// occur in the reference. An empty prediction asserts nothing and scores 1.
///
/// This deliberately ignores counts and positions: a degenerate decode that
/// repeats one correct word is fully precise, while a single substituted word
/// costs a full type. Damage reports score precision this way.
pub fn type_precision<T: Eq + Ord>(pred: &[T], gold: &[T]) -> f64 {
    let pred_types: std::collections::BTreeSet<&T> = pred.iter().collect();
    if pred_types.is_empty() {
        return 1.0;
    }
    let gold_types: std::collections::BTreeSet<&T> = gold.iter().collect();
    let hits = pred_types.iter().filter(|t| gold_types.contains(*t)).count();
    hits as f64 / pred_types.len() as f64
}

/// Corpus-level BLEU as a fraction: modified n-gram precisions (n = 1..4)
/// pooled over the corpus, uniform-weight geometric mean, brevity penalty
/// `exp(1 - r/c)` when the total prediction length c falls short of the total
/// reference length r. No smoothing: any zero pooled precision gives 0.
pub fn corpus_bleu<T: Eq + std::hash::Hash>(preds: &[Vec<T>], golds: &[Vec<T>]) -> Result<f64> {
    if preds.is_empty() || preds.len() != golds.len() {
        return Err(Error::Precondition {
            op: "corpus_bleu",
            msg: format!("need equal non-empty lists, got {} and {}", preds.len(), golds.len()),
        });
    }
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    for (pred, gold) in preds.iter().zip(golds) {
        for n in 1..=4usize {
            if pred.len() >= n {
                totals[n - 1] += pred.len() - n + 1;
            }
            let mut gold_counts: HashMap<&[T], usize> = HashMap::new();
            for w in gold.windows(n) {
                *gold_counts.entry(w).or_insert(0) += 1;
            }
            let mut pred_counts: HashMap<&[T], usize> = HashMap::new();
            for w in pred.windows(n) {
                *pred_counts.entry(w).or_insert(0) += 1;
            }
            for (w, c) in pred_counts {
                if let Some(&g) = gold_counts.get(w) {
                    matches[n - 1] += c.min(g);
                }
            }
        }
    }
    let c: usize = preds.iter().map(Vec::len).sum();
    let r: usize = golds.iter().map(Vec::len).sum();
    if c == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        if matches[n] == 0 || totals[n] == 0 {
            return Ok(0.0);
        }
        log_sum += 0.25 * (matches[n] as f64 / totals[n] as f64).ln();
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    Ok(bp * log_sum.exp())
}

/// Aggregated percentages across pairs, in report column order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_accuracy: f64,
    pub mean_exact: f64,
    pub corpus_bleu: Option<f64>,
}

impl MetricsReport {
    pub fn header(with_bleu: bool) -> String {
        let mut s = "prec\trec\tacc\texact".to_string();
        if with_bleu {
            s.push_str("\tbleu");
        }
        s
    }

    pub fn to_tsv_row(&self) -> String {
        let mut s = format!(
            "{:.2}\t{:.2}\t{:.2}\t{:.2}",
            self.mean_precision, self.mean_recall, self.mean_accuracy, self.mean_exact
        );
        if let Some(b) = self.corpus_bleu {
            s.push_str(&format!("\t{b:.2}"));
        }
        s
    }
}

/// Scores a batch of predictions. Means are over pairs, expressed as
/// percentages; BLEU is computed over the whole corpus when requested.
pub fn aggregate<T: Eq + Ord + std::hash::Hash>(
    preds: &[Vec<T>],
    golds: &[Vec<T>],
    with_bleu: bool,
) -> Result<MetricsReport> {
    if preds.is_empty() || preds.len() != golds.len() {
        return Err(Error::Precondition {
            op: "aggregate",
            msg: format!("need equal non-empty lists, got {} and {}", preds.len(), golds.len()),
        });
    }
    let n = preds.len() as f64;
    let mut sums = (0.0, 0.0, 0.0, 0.0);
    for (p, g) in preds.iter().zip(golds) {
        let s = pair_scores(p, g);
        sums.0 += s.precision;
        sums.1 += s.recall;
        sums.2 += s.accuracy;
        sums.3 += s.exact;
    }
    let bleu = if with_bleu { Some(corpus_bleu(preds, golds)? * 100.0) } else { None };
    Ok(MetricsReport {
        mean_precision: 100.0 * sums.0 / n,
        mean_recall: 100.0 * sums.1 / n,
        mean_accuracy: 100.0 * sums.2 / n,
        mean_exact: 100.0 * sums.3 / n,
        corpus_bleu: bleu,
    })
}
