//! Similarity between noisy and cleaned targets, per cleaning method.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clean::{CleanedCorpus, CleanedRow, Method};
use crate::corpus::{Corpus, LangCode};
use crate::embed::{cosine, EmbedError, Embedder};
use crate::metrics::{jaccard, jaro_winkler, rouge1_f, sentence_bleu};
use crate::tokenize::tokenize;

pub const SIMILARITY_METRICS: [&str; 5] = ["LASER", "BLEU", "Jaccard", "Rouge-1", "Jaro Winkler"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub metric: String,
    pub method: Method,
    pub value: f64,
}

/// Mean of each metric over samples, comparing every cleaned target with
/// its noisy original. BLEU is sentence-level and divided by 100 so all
/// columns share the 0..1 scale.
pub fn similarity_report(
    corpus: &Corpus,
    cleaned: &[CleanedCorpus],
    embedder: &dyn Embedder,
) -> Result<Vec<SimilarityRow>, EmbedError> {
    let mut rows = Vec::new();
    for set in cleaned {
        let pairs: Vec<(&str, &LangCode, &str)> = corpus
            .samples
            .iter()
            .zip(&set.records)
            .map(|(s, r)| (s.tgt_text.as_str(), &s.tgt_lang, r.final_text.as_str()))
            .collect();
        rows.extend(method_rows(set.method, &pairs, embedder)?);
    }
    Ok(rows)
}

/// [`similarity_report`] over cleaned JSONL rows, one list per method.
pub fn similarity_report_rows(sets: &[Vec<CleanedRow>], embedder: &dyn Embedder) -> Result<Vec<SimilarityRow>, EmbedError> {
    let mut rows = Vec::new();
    for set in sets.iter().filter(|s| !s.is_empty()) {
        let pairs: Vec<(&str, &LangCode, &str)> =
            set.iter().map(|r| (r.tgt.as_str(), &r.tgt_lang, r.cleaned_tgt.as_str())).collect();
        rows.extend(method_rows(set[0].method, &pairs, embedder)?);
    }
    Ok(rows)
}

fn method_rows(
    method: Method,
    pairs: &[(&str, &LangCode, &str)],
    embedder: &dyn Embedder,
) -> Result<Vec<SimilarityRow>, EmbedError> {
    let per_sample = pairs
        .par_iter()
        .map(|&(noisy, lang, cleaned)| -> Result<[f64; 5], EmbedError> {
            let laser = if cleaned.trim().is_empty() {
                0.0
            } else {
                let e1 = embedder.embed(noisy, lang)?;
                let e2 = embedder.embed(cleaned, lang)?;
                cosine(&e1, &e2)?
            };
            let a = tokenize(noisy, lang);
            let b = tokenize(cleaned, lang);
            Ok([
                laser,
                sentence_bleu(&b, &a).value / 100.0,
                jaccard(&a, &b).value,
                rouge1_f(&a, &b).value,
                jaro_winkler(noisy, cleaned).value,
            ])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = per_sample.len().max(1) as f64;
    Ok(SIMILARITY_METRICS
        .iter()
        .enumerate()
        .map(|(k, name)| SimilarityRow {
            metric: name.to_string(),
            method,
            value: per_sample.iter().map(|v| v[k]).sum::<f64>() / n,
        })
        .collect())
}

/// `metric,method,value` rows grouped by metric, four decimals.
pub fn write_similarity_csv<W: Write + ?Sized>(out: &mut W, rows: &[SimilarityRow]) -> std::io::Result<()> {
    writeln!(out, "metric,method,value")?;
    for metric in SIMILARITY_METRICS {
        for r in rows.iter().filter(|r| r.metric == metric) {
            writeln!(out, "{},{},{:.4}", r.metric, r.method.label(), r.value)?;
        }
    }
    Ok(())
}
