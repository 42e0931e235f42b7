//! BLEU-based robustness scoring, relative gain, and the contrastive loss
//! reference math.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LangCode;
use crate::embed::{cosine, EmbedError, EmbeddingVector};
use crate::metrics::{bleu, MetricError};
use crate::tokenize::{tokenize, TokenList};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("baseline score must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("no records to average")]
    Empty,
    #[error("{name}: {found} lines, references have {expected}")]
    Alignment { name: String, expected: usize, found: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("tau must be positive, got {0}")]
    Tau(f64),
    #[error("batch sizes differ: {0} originals, {1} augmented")]
    BatchMismatch(usize, usize),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Percentage change of `s_r` over `s_b`.
pub fn relative_gain(s_b: f64, s_r: f64) -> Result<f64, EvalError> {
    if s_b.is_nan() || s_b <= 0.0 {
        return Err(EvalError::NonPositiveBaseline(s_b));
    }
    Ok(100.0 * (s_r - s_b) / s_b)
}

/// One decimal place, never "-0.0".
pub fn display_1dp(x: f64) -> String {
    let s = format!("{x:.1}");
    if s == "-0.0" {
        "0.0".to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRecord {
    pub eval_set: String,
    pub system: String,
    #[serde(rename = "baseline_bleu")]
    pub s_b: f64,
    #[serde(rename = "bleu")]
    pub s_r: f64,
    #[serde(rename = "gain_percent")]
    pub gain: f64,
}

impl GainRecord {
    pub fn new(eval_set: impl Into<String>, system: impl Into<String>, s_b: f64, s_r: f64) -> Result<Self, EvalError> {
        Ok(GainRecord {
            eval_set: eval_set.into(),
            system: system.into(),
            s_b,
            s_r,
            gain: relative_gain(s_b, s_r)?,
        })
    }
}

fn tokenize_all(lines: &[String], lang: &LangCode) -> Vec<TokenList> {
    lines.iter().map(|l| tokenize(l, lang)).collect()
}

/// Corpus BLEU for the baseline and every system against `references`, with
/// the gain of each system over the baseline. Rows are sorted by system name.
pub fn score_systems(
    eval_set: &str,
    baseline: &[String],
    systems: &[(String, Vec<String>)],
    references: &[String],
    lang: &LangCode,
) -> Result<Vec<GainRecord>, EvalError> {
    let check = |name: &str, lines: &[String]| {
        if lines.len() != references.len() {
            return Err(EvalError::Alignment {
                name: name.to_string(),
                expected: references.len(),
                found: lines.len(),
            });
        }
        Ok(())
    };
    check("baseline", baseline)?;
    for (name, lines) in systems {
        check(name, lines)?;
    }
    let refs = tokenize_all(references, lang);
    let s_b = bleu(&tokenize_all(baseline, lang), &refs)?.value;
    let mut out = systems
        .iter()
        .map(|(name, lines)| {
            let s_r = bleu(&tokenize_all(lines, lang), &refs)?.value;
            GainRecord::new(eval_set, name.clone(), s_b, s_r)
        })
        .collect::<Result<Vec<_>, _>>()?;
    out.sort_by(|a, b| (&a.eval_set, &a.system).cmp(&(&b.eval_set, &b.system)));
    Ok(out)
}

/// Reads a plain-text system output, one sentence per line.
pub fn read_lines(path: &Path) -> Result<Vec<String>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Mean gain per evaluation set.
pub fn average_gain(records: &[GainRecord]) -> Result<BTreeMap<String, f64>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = sums.entry(r.eval_set.clone()).or_default();
        e.0 += r.gain;
        e.1 += 1;
    }
    Ok(sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect())
}

/// `eval_set,system,bleu,baseline_bleu,gain_percent` at full precision.
pub fn write_gain_csv<W: Write + ?Sized>(out: &mut W, records: &[GainRecord]) -> std::io::Result<()> {
    writeln!(out, "eval_set,system,bleu,baseline_bleu,gain_percent")?;
    for r in records {
        writeln!(out, "{},{},{},{},{}", r.eval_set, r.system, r.s_r, r.s_b, r.gain)?;
    }
    Ok(())
}

pub fn write_gain_json<W: Write + ?Sized>(out: &mut W, records: &[GainRecord]) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, records)?;
    writeln!(out)
}

pub fn read_gain_json(path: &Path) -> Result<Vec<GainRecord>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}

/// Evaluation sets as rows, a baseline column, then each system's BLEU and
/// gain side by side; one decimal throughout.
pub fn write_wide_csv<W: Write + ?Sized>(out: &mut W, records: &[GainRecord]) -> std::io::Result<()> {
    let systems: Vec<&str> = {
        let mut v: Vec<&str> = records.iter().map(|r| r.system.as_str()).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut rows: BTreeMap<&str, (f64, BTreeMap<&str, &GainRecord>)> = BTreeMap::new();
    for r in records {
        let row = rows.entry(&r.eval_set).or_insert((r.s_b, BTreeMap::new()));
        row.1.insert(&r.system, r);
    }
    write!(out, "eval_set,baseline")?;
    for s in &systems {
        write!(out, ",{s},{s}_gain")?;
    }
    writeln!(out)?;
    for (set, (s_b, by_system)) in rows {
        write!(out, "{set},{}", display_1dp(s_b))?;
        for s in &systems {
            match by_system.get(s) {
                Some(r) => write!(out, ",{},{}", display_1dp(r.s_r), display_1dp(r.gain))?,
                None => write!(out, ",,")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

// ------------------------------------------------------ contrastive loss ----

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveParams {
    pub tau: f64,
    pub lambda: f64,
}

impl Default for ContrastiveParams {
    fn default() -> Self {
        ContrastiveParams { tau: 0.1, lambda: 0.01 }
    }
}

/// Paired sentence embeddings: `ex[i]` is an original, `ez[i]` its augmented twin.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEmbeddings {
    ex: Vec<EmbeddingVector>,
    ez: Vec<EmbeddingVector>,
}

impl BatchEmbeddings {
    pub fn new(ex: Vec<EmbeddingVector>, ez: Vec<EmbeddingVector>) -> Result<Self, EvalError> {
        if ex.len() != ez.len() {
            return Err(EvalError::BatchMismatch(ex.len(), ez.len()));
        }
        if ex.is_empty() {
            return Err(EvalError::Empty);
        }
        let dim = ex[0].dim();
        for v in ex.iter().chain(&ez) {
            if v.dim() != dim {
                return Err(EmbedError::DimMismatch(dim, v.dim()).into());
            }
            if v.norm() == 0.0 {
                return Err(EmbedError::ZeroNorm.into());
            }
        }
        Ok(BatchEmbeddings { ex, ez })
    }

    pub fn len(&self) -> usize {
        self.ex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ex.is_empty()
    }
}

/// Sum over the batch of the softmax cross-entropy that picks `ez[i]` for
/// `ex[i]` among all `ez`, with cosine logits divided by `tau`.
pub fn contrastive_loss(batch: &BatchEmbeddings, tau: f64) -> Result<f64, EvalError> {
    if !(tau > 0.0) {
        return Err(EvalError::Tau(tau));
    }
    let mut total = 0.0;
    for (i, x) in batch.ex.iter().enumerate() {
        let logits = batch
            .ez
            .iter()
            .map(|z| Ok(cosine(x, z)? / tau))
            .collect::<Result<Vec<f64>, EvalError>>()?;
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        total += lse - logits[i];
    }
    Ok(total)
}

/// `l_ce + lambda * l_ctr`.
pub fn combined_loss(l_ce: f64, l_ctr: f64, params: &ContrastiveParams) -> f64 {
    l_ce + params.lambda * l_ctr
}
