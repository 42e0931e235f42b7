//! Surface similarity metrics: corpus/sentence BLEU, ROUGE-1 F, Jaccard and
//! Jaro-Winkler.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tokenize::TokenList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Bleu,
    Rouge1,
    Jaccard,
    JaroWinkler,
    Cosine,
}

impl MetricName {
    /// Inclusive value range for the metric.
    pub fn range(self) -> (f64, f64) {
        match self {
            MetricName::Bleu => (0.0, 100.0),
            MetricName::Cosine => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricName::Bleu => "bleu",
            MetricName::Rouge1 => "rouge1",
            MetricName::Jaccard => "jaccard",
            MetricName::JaroWinkler => "jaro_winkler",
            MetricName::Cosine => "cosine",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub name: MetricName,
    pub value: f64,
}

impl MetricScore {
    fn new(name: MetricName, value: f64) -> Self {
        let (lo, hi) = name.range();
        MetricScore {
            name,
            value: value.clamp(lo, hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("no hypotheses to score")]
    EmptyHypotheses,
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("reference {0} is empty")]
    EmptyReference(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    #[default]
    None,
    /// Add one to matches and totals for n-gram orders 2 and up.
    AddOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BleuConfig {
    pub max_order: usize,
    pub smoothing: Smoothing,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            max_order: 4,
            smoothing: Smoothing::None,
        }
    }
}

/// Sufficient statistics for corpus BLEU; they add across sentences.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn for_sentence(hyp: &[String], reference: &[String], max_order: usize) -> Self {
        let mut matches = vec![0; max_order];
        let mut totals = vec![0; max_order];
        for n in 1..=max_order {
            let hyp_counts = ngram_counts(hyp, n);
            let ref_counts = ngram_counts(reference, n);
            totals[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
            matches[n - 1] = hyp_counts
                .iter()
                .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        BleuStats {
            matches,
            totals,
            hyp_len: hyp.len() as u64,
            ref_len: reference.len() as u64,
        }
    }

    pub fn add(&mut self, other: &BleuStats) {
        if self.matches.is_empty() {
            *self = other.clone();
            return;
        }
        for (a, b) in self.matches.iter_mut().zip(&other.matches) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// BLEU on a 0-100 scale from these statistics.
    pub fn score(&self, smoothing: Smoothing) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        // Orders longer than every hypothesis have no n-grams at all; they are
        // left out of the mean instead of zeroing it.
        let mut log_sum = 0.0;
        let mut orders = 0;
        for (i, (&m, &t)) in self.matches.iter().zip(&self.totals).enumerate() {
            if t == 0 {
                break;
            }
            orders += 1;
            let (m, t) = match smoothing {
                Smoothing::AddOne if i >= 1 => (m + 1, t + 1),
                _ => (m, t),
            };
            if m == 0 {
                return 0.0;
            }
            log_sum += (m as f64 / t as f64).ln();
        }
        let geo = (log_sum / orders as f64).exp();
        let bp = if self.hyp_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        };
        100.0 * bp * geo
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU-4 with brevity penalty and no smoothing.
pub fn bleu(hypotheses: &[TokenList], references: &[TokenList]) -> Result<MetricScore, MetricError> {
    bleu_with(hypotheses, references, BleuConfig::default())
}

pub fn bleu_with(
    hypotheses: &[TokenList],
    references: &[TokenList],
    cfg: BleuConfig,
) -> Result<MetricScore, MetricError> {
    Ok(MetricScore::new(
        MetricName::Bleu,
        bleu_stats(hypotheses, references, cfg.max_order)?.score(cfg.smoothing),
    ))
}

pub fn bleu_stats(
    hypotheses: &[TokenList],
    references: &[TokenList],
    max_order: usize,
) -> Result<BleuStats, MetricError> {
    if hypotheses.is_empty() {
        return Err(MetricError::EmptyHypotheses);
    }
    if hypotheses.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    let mut total = BleuStats::default();
    for (i, (h, r)) in hypotheses.iter().zip(references).enumerate() {
        if r.is_empty() {
            return Err(MetricError::EmptyReference(i));
        }
        total.add(&BleuStats::for_sentence(&h.tokens, &r.tokens, max_order));
    }
    Ok(total)
}

/// Sentence BLEU with add-one smoothing for orders 2 and up, used for
/// per-sentence similarity reports. An empty reference scores 0.
pub fn sentence_bleu(hypothesis: &TokenList, reference: &TokenList) -> MetricScore {
    let stats = BleuStats::for_sentence(&hypothesis.tokens, &reference.tokens, 4);
    let value = if reference.is_empty() {
        0.0
    } else {
        stats.score(Smoothing::AddOne)
    };
    MetricScore::new(MetricName::Bleu, value)
}

fn bag(tokens: &TokenList) -> HashMap<&str, u64> {
    let mut m = HashMap::new();
    for t in tokens.iter() {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

/// Unigram F1 with clipped counts.
pub fn rouge1_f(a: &TokenList, b: &TokenList) -> MetricScore {
    if a.is_empty() || b.is_empty() {
        return MetricScore::new(MetricName::Rouge1, 0.0);
    }
    let ba = bag(a);
    let bb = bag(b);
    let overlap: u64 = ba
        .iter()
        .map(|(t, &c)| c.min(bb.get(t).copied().unwrap_or(0)))
        .sum();
    if overlap == 0 {
        return MetricScore::new(MetricName::Rouge1, 0.0);
    }
    let p = overlap as f64 / a.len() as f64;
    let r = overlap as f64 / b.len() as f64;
    MetricScore::new(MetricName::Rouge1, 2.0 * p * r / (p + r))
}

/// Token-set Jaccard index; two empty lists score 1.
pub fn jaccard(a: &TokenList, b: &TokenList) -> MetricScore {
    let sa: HashSet<&str> = a.iter().collect();
    let sb: HashSet<&str> = b.iter().collect();
    let union = sa.union(&sb).count();
    let value = if union == 0 {
        1.0
    } else {
        sa.intersection(&sb).count() as f64 / union as f64
    };
    MetricScore::new(MetricName::Jaccard, value)
}

fn jaro(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_matched = vec![false; a.len()];
    let mut b_matched = vec![false; b.len()];
    let mut matches = 0usize;
    for (i, ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_matched[j] && b[j] == *ca {
                a_matched[i] = true;
                b_matched[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }
    let a_seq = a.iter().zip(&a_matched).filter(|(_, &m)| m).map(|(c, _)| c);
    let b_seq = b.iter().zip(&b_matched).filter(|(_, &m)| m).map(|(c, _)| c);
    let half_transpositions = a_seq.zip(b_seq).filter(|(x, y)| x != y).count();
    let m = matches as f64;
    let t = (half_transpositions / 2) as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro similarity with the Winkler prefix boost (p = 0.1, prefix capped at 4).
///
/// Arguments are put in a canonical order first, so the greedy matching step
/// cannot make the score depend on argument order.
pub fn jaro_winkler(a: &str, b: &str) -> MetricScore {
    let (a, b) = if (a.chars().count(), a) <= (b.chars().count(), b) {
        (a, b)
    } else {
        (b, a)
    };
    let ca: Vec<char> = a.chars().collect();
    let cb: Vec<char> = b.chars().collect();
    let j = jaro(&ca, &cb);
    let prefix = ca.iter().zip(&cb).take(4).take_while(|(x, y)| x == y).count();
    MetricScore::new(MetricName::JaroWinkler, j + prefix as f64 * 0.1 * (1.0 - j))
}
