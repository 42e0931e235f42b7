//! The gate-and-retry cleaning loop, corpus runs, and the rule-based
//! correction baseline.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize, write_records, Corpus, CorpusError, LangCode, ParallelSample};
use crate::embed::{gate, Embedder, GateConfig, LangText};
use crate::http::HttpError;
use crate::llm::{Completer, LlmParams};
use crate::noise::{is_alphabetic_token, GrammarService, SpellDictionary};
use crate::prompt::{parse_completion, CleaningMethod, PromptError, PromptPack};
use crate::tokenize::segment;

#[derive(Debug, thiserror::Error)]
pub enum CleanError {
    #[error("invalid gate configuration: {0}")]
    Gate(String),
    #[error(transparent)]
    Llm(#[from] crate::llm::LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("pack is for {pack}, corpus is {corpus}")]
    PackMismatch { pack: String, corpus: String },
    #[error("parallelism must be positive")]
    Parallelism,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("no spelling dictionary for {0}")]
    NoDictionary(LangCode),
    #[error(transparent)]
    Service(#[from] HttpError),
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

/// A cleaning method as recorded in output: one of the LLM methods or the
/// correction tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bilingual,
    Monolingual,
    Translation,
    CorrectionTool,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Bilingual,
        Method::Translation,
        Method::Monolingual,
        Method::CorrectionTool,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bilingual => "bilingual",
            Method::Monolingual => "monolingual",
            Method::Translation => "translation",
            Method::CorrectionTool => "correction_tool",
        }
    }

    /// Heading used in similarity reports.
    pub fn label(self) -> &'static str {
        match self {
            Method::Bilingual => "Bilingual",
            Method::Monolingual => "Monolingual",
            Method::Translation => "Translation",
            Method::CorrectionTool => "Correction-tool",
        }
    }

    pub fn llm(self) -> Option<CleaningMethod> {
        match self {
            Method::Bilingual => Some(CleaningMethod::Bilingual),
            Method::Monolingual => Some(CleaningMethod::Monolingual),
            Method::Translation => Some(CleaningMethod::Translation),
            Method::CorrectionTool => None,
        }
    }
}

impl From<CleaningMethod> for Method {
    fn from(m: CleaningMethod) -> Self {
        match m {
            CleaningMethod::Bilingual => Method::Bilingual,
            CleaningMethod::Monolingual => Method::Monolingual,
            CleaningMethod::Translation => Method::Translation,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "correction" | "correction_tool" => Ok(Method::CorrectionTool),
            other => other
                .parse::<CleaningMethod>()
                .map(Method::from)
                .map_err(|_| format!("unknown method {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningAttempt {
    pub attempt_index: u32,
    pub prompt_digest: String,
    pub candidate: String,
    pub similarity: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningRecord {
    pub sample_id: u64,
    pub method: Method,
    pub attempts: Vec<CleaningAttempt>,
    pub final_text: String,
    pub final_similarity: f64,
    pub accepted: bool,
    pub fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errored: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CleanStats {
    pub samples: usize,
    pub accepted: usize,
    pub fallback: usize,
    pub errored: usize,
    pub accept_rate: f64,
    pub mean_attempts: f64,
    pub mean_final_similarity: f64,
}

impl CleanStats {
    pub fn from_records(records: &[CleaningRecord]) -> Self {
        let n = records.len();
        if n == 0 {
            return CleanStats::default();
        }
        let count = |f: fn(&CleaningRecord) -> bool| records.iter().filter(|r| f(r)).count();
        let accepted = count(|r| r.accepted);
        CleanStats {
            samples: n,
            accepted,
            fallback: count(|r| r.fallback),
            errored: count(|r| r.errored.is_some()),
            accept_rate: accepted as f64 / n as f64,
            mean_attempts: records.iter().map(|r| r.attempts.len() as f64).sum::<f64>() / n as f64,
            mean_final_similarity: records.iter().map(|r| r.final_similarity).sum::<f64>() / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanedCorpus {
    pub corpus_name: String,
    pub method: Method,
    pub records: Vec<CleaningRecord>,
}

impl CleanedCorpus {
    pub fn stats(&self) -> CleanStats {
        CleanStats::from_records(&self.records)
    }

    pub fn final_texts(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.final_text.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanConfig {
    pub gate: GateConfig,
    pub params: LlmParams,
    pub parallelism: usize,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            gate: GateConfig::default(),
            params: LlmParams::default(),
            parallelism: 4,
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<(), CleanError> {
        self.gate.validate().map_err(CleanError::Gate)?;
        self.params.validate()?;
        if self.parallelism == 0 {
            return Err(CleanError::Parallelism);
        }
        Ok(())
    }
}

/// The sentence a candidate must stay close to.
pub fn gate_original(sample: &ParallelSample, method: CleaningMethod) -> LangText {
    match method {
        CleaningMethod::Translation => LangText::new(sample.src_text.clone(), sample.src_lang.clone()),
        _ => LangText::new(sample.tgt_text.clone(), sample.tgt_lang.clone()),
    }
}

fn best_attempt(attempts: &[CleaningAttempt]) -> Option<&CleaningAttempt> {
    // Earliest attempt wins ties.
    attempts
        .iter()
        .fold(None, |best: Option<&CleaningAttempt>, a| match best {
            Some(b) if b.similarity >= a.similarity => Some(b),
            _ => Some(a),
        })
}

/// Runs the prompt, gate, retry loop for one sample.
///
/// Provider failures do not propagate: they end the loop and mark the record
/// as errored, keeping the best candidate seen so far or the noisy target.
pub fn clean_sample(
    sample: &ParallelSample,
    pack: &PromptPack,
    cfg: &CleanConfig,
    llm: &dyn Completer,
    embedder: &dyn Embedder,
) -> Result<CleaningRecord, CleanError> {
    let base = pack.render(sample)?;
    let original = gate_original(sample, pack.method);
    let mut attempts = Vec::new();
    let mut errored = None;
    for i in 1..=cfg.gate.max_iters {
        let prompt = if i == 1 {
            base.clone()
        } else {
            base.with_notice(&cfg.gate.notice)?
        };
        let raw = match llm.complete(&prompt.text, &cfg.params, i) {
            Ok(c) => c.text,
            Err(e) => {
                errored = Some(e.to_string());
                break;
            }
        };
        let candidate = normalize(&parse_completion(&raw));
        let similarity = if candidate.trim().is_empty() {
            0.0
        } else {
            let cand = LangText::new(candidate.clone(), sample.tgt_lang.clone());
            match gate(&original, &cand, &cfg.gate, embedder) {
                Ok(d) => d.similarity,
                Err(e) => {
                    errored = Some(e.to_string());
                    break;
                }
            }
        };
        let passed = similarity >= cfg.gate.threshold;
        attempts.push(CleaningAttempt {
            attempt_index: i,
            prompt_digest: prompt.digest(),
            candidate,
            similarity,
            passed,
        });
        if passed {
            break;
        }
    }
    let accepted = attempts.last().is_some_and(|a| a.passed);
    let fallback = !accepted && errored.is_none();
    let (final_text, final_similarity) = match (accepted, best_attempt(&attempts)) {
        (true, _) => {
            let a = attempts.last().unwrap();
            (a.candidate.clone(), a.similarity)
        }
        (false, Some(b)) if !b.candidate.trim().is_empty() => (b.candidate.clone(), b.similarity),
        _ => (sample.tgt_text.clone(), 0.0),
    };
    if let Some(e) = &errored {
        log::warn!("sample {}: {e}", sample.id);
    }
    Ok(CleaningRecord {
        sample_id: sample.id,
        method: pack.method.into(),
        attempts,
        final_text,
        final_similarity,
        accepted,
        fallback,
        errored,
    })
}

fn pool(parallelism: usize) -> Result<rayon::ThreadPool, CleanError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| CleanError::Pool(e.to_string()))
}

fn check_direction(corpus: &Corpus, pack: &PromptPack) -> Result<(), CleanError> {
    if let Some((s, t)) = corpus.direction() {
        if *s != pack.src_lang || *t != pack.tgt_lang {
            return Err(CleanError::PackMismatch {
                pack: pack.direction(),
                corpus: format!("{s}-{t}"),
            });
        }
    }
    Ok(())
}

/// Cleans every sample with at most `cfg.parallelism` workers. Records come
/// back in input order whatever order the workers finish in.
pub fn clean_corpus(
    corpus: &Corpus,
    pack: &PromptPack,
    cfg: &CleanConfig,
    llm: &dyn Completer,
    embedder: &dyn Embedder,
) -> Result<CleanedCorpus, CleanError> {
    cfg.validate()?;
    check_direction(corpus, pack)?;
    let records = pool(cfg.parallelism)?.install(|| {
        corpus
            .samples
            .par_iter()
            .map(|s| clean_sample(s, pack, cfg, llm, embedder))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(CleanedCorpus {
        corpus_name: corpus.meta.name.clone(),
        method: pack.method.into(),
        records,
    })
}

// ------------------------------------------------------------ correction ----

/// Dictionary-based corrector: replaces out-of-vocabulary words with their
/// single nearest dictionary word.
#[derive(Debug, Clone)]
pub struct DictionaryCorrector {
    dict: SpellDictionary,
    alphabet: Vec<char>,
}

fn edits1(word: &[char], alphabet: &[char]) -> (HashSet<String>, HashSet<String>) {
    let mut swaps = HashSet::new();
    let mut others = HashSet::new();
    let s = |v: Vec<char>| v.into_iter().collect::<String>();
    for i in 0..word.len() {
        if i + 1 < word.len() && word[i] != word[i + 1] {
            let mut v = word.to_vec();
            v.swap(i, i + 1);
            swaps.insert(s(v));
        }
        let mut v = word.to_vec();
        v.remove(i);
        others.insert(s(v));
        for &c in alphabet {
            if c != word[i] {
                let mut v = word.to_vec();
                v[i] = c;
                others.insert(s(v));
            }
        }
    }
    for i in 0..=word.len() {
        for &c in alphabet {
            let mut v = word.to_vec();
            v.insert(i, c);
            others.insert(s(v));
        }
    }
    (swaps, others)
}

/// Copies the casing pattern of `like` onto `word` where it can.
pub fn match_case(word: &str, like: &str) -> String {
    let letters: Vec<char> = like.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        return word.to_uppercase();
    }
    if like.chars().next().is_some_and(char::is_uppercase) {
        let mut cs = word.chars();
        return match cs.next() {
            Some(f) => f.to_uppercase().chain(cs).collect(),
            None => String::new(),
        };
    }
    word.to_string()
}

impl DictionaryCorrector {
    pub fn new(dict: SpellDictionary) -> Self {
        let alphabet = dict.alphabet();
        DictionaryCorrector { dict, alphabet }
    }

    pub fn lang(&self) -> &LangCode {
        &self.dict.lang
    }

    pub fn dictionary(&self) -> &SpellDictionary {
        &self.dict
    }

    /// The unique in-dictionary word one edit away from an out-of-vocabulary
    /// `word`, lowercased. Adjacent transpositions win over other edits; any
    /// remaining tie yields `None`.
    pub fn suggest(&self, word: &str) -> Option<String> {
        if !is_alphabetic_token(word) || self.dict.contains(word) {
            return None;
        }
        let lower: Vec<char> = word.to_lowercase().chars().collect();
        let (swaps, others) = edits1(&lower, &self.alphabet);
        let unique = |set: HashSet<String>| {
            let hits: Vec<String> = set.into_iter().filter(|w| self.dict.contains(w)).collect();
            hits
        };
        let swaps = unique(swaps);
        match swaps.len() {
            1 => return swaps.into_iter().next(),
            0 => {}
            _ => return None,
        }
        let others = unique(others);
        if others.len() == 1 {
            others.into_iter().next()
        } else {
            None
        }
    }

    pub fn correct(&self, text: &str) -> String {
        let text = normalize(text);
        let mut out = String::with_capacity(text.len());
        let mut last = 0;
        for span in segment(&text, &self.dict.lang) {
            let tok = &text[span.clone()];
            if let Some(fix) = self.suggest(tok) {
                out.push_str(&text[last..span.start]);
                out.push_str(&match_case(&fix, tok));
                last = span.end;
            }
        }
        out.push_str(&text[last..]);
        out
    }
}

/// Applies the first suggested replacement of each match, left to right,
/// skipping matches that overlap an earlier one or carry no suggestion.
pub fn apply_matches(text: &str, matches: &[crate::noise::GrammarMatch]) -> String {
    let mut sorted: Vec<_> = matches.iter().filter(|m| !m.replacements.is_empty()).collect();
    sorted.sort_by_key(|m| (m.start, m.end));
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for m in sorted {
        if m.start < last || m.end > text.len() {
            continue;
        }
        out.push_str(&text[last..m.start]);
        out.push_str(&m.replacements[0]);
        last = m.end;
    }
    out.push_str(&text[last..]);
    out
}

#[derive(Debug, Clone)]
pub enum Corrector {
    Dictionary(DictionaryCorrector),
    Service(GrammarService),
}

impl Corrector {
    /// Native corrector from the bundled dictionary for `lang`.
    pub fn builtin(lang: &LangCode) -> Result<Self, CleanError> {
        SpellDictionary::builtin(lang)
            .map(|d| Corrector::Dictionary(DictionaryCorrector::new(d)))
            .ok_or_else(|| CleanError::NoDictionary(lang.clone()))
    }

    pub fn correct(&self, text: &str, lang: &LangCode) -> Result<String, CleanError> {
        match self {
            Corrector::Dictionary(d) => Ok(d.correct(text)),
            Corrector::Service(s) => {
                let text = normalize(text);
                let matches = s.check(&text, lang)?;
                Ok(apply_matches(&text, &matches))
            }
        }
    }
}

/// Shorthand for [`Corrector::correct`].
pub fn correction_baseline(text: &str, lang: &LangCode, corrector: &Corrector) -> Result<String, CleanError> {
    corrector.correct(text, lang)
}

/// Runs the correction tool over the target side. Each record has a single
/// attempt whose similarity to the noisy target is measured with `embedder`;
/// retrying a deterministic tool cannot change its output, so a failed gate
/// sets `fallback` directly.
pub fn correct_corpus(
    corpus: &Corpus,
    corrector: &Corrector,
    cfg: &CleanConfig,
    embedder: &dyn Embedder,
) -> Result<CleanedCorpus, CleanError> {
    cfg.validate()?;
    let records = pool(cfg.parallelism)?.install(|| {
        corpus
            .samples
            .par_iter()
            .map(|s| {
                let original = LangText::new(s.tgt_text.clone(), s.tgt_lang.clone());
                let corrected = match corrector.correct(&s.tgt_text, &s.tgt_lang) {
                    Ok(t) => t,
                    Err(e) => return errored_record(s, Method::CorrectionTool, e.to_string()),
                };
                let cand = LangText::new(corrected.clone(), s.tgt_lang.clone());
                let similarity = match gate(&original, &cand, &cfg.gate, embedder) {
                    Ok(d) => d.similarity,
                    Err(e) => return errored_record(s, Method::CorrectionTool, e.to_string()),
                };
                let passed = similarity >= cfg.gate.threshold;
                CleaningRecord {
                    sample_id: s.id,
                    method: Method::CorrectionTool,
                    attempts: vec![CleaningAttempt {
                        attempt_index: 1,
                        prompt_digest: String::new(),
                        candidate: corrected.clone(),
                        similarity,
                        passed,
                    }],
                    final_text: corrected,
                    final_similarity: similarity,
                    accepted: passed,
                    fallback: !passed,
                    errored: None,
                }
            })
            .collect()
    });
    Ok(CleanedCorpus {
        corpus_name: corpus.meta.name.clone(),
        method: Method::CorrectionTool,
        records,
    })
}

fn errored_record(s: &ParallelSample, method: Method, message: String) -> CleaningRecord {
    log::warn!("sample {}: {message}", s.id);
    CleaningRecord {
        sample_id: s.id,
        method,
        attempts: Vec::new(),
        final_text: s.tgt_text.clone(),
        final_similarity: 0.0,
        accepted: false,
        fallback: false,
        errored: Some(message),
    }
}

// ---------------------------------------------------------------- output ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanedRow {
    pub id: u64,
    pub src_lang: LangCode,
    pub tgt_lang: LangCode,
    pub src: String,
    pub tgt: String,
    pub method: Method,
    pub cleaned_tgt: String,
    pub similarity: f64,
    pub attempts: usize,
    pub accepted: bool,
    pub fallback: bool,
}

/// Joins records back onto their samples. Both lists must be aligned by id.
pub fn cleaned_rows(corpus: &Corpus, cleaned: &CleanedCorpus) -> Vec<CleanedRow> {
    corpus
        .samples
        .iter()
        .zip(&cleaned.records)
        .map(|(s, r)| {
            debug_assert_eq!(s.id, r.sample_id);
            CleanedRow {
                id: s.id,
                src_lang: s.src_lang.clone(),
                tgt_lang: s.tgt_lang.clone(),
                src: s.src_text.clone(),
                tgt: s.tgt_text.clone(),
                method: r.method,
                cleaned_tgt: r.final_text.clone(),
                similarity: r.final_similarity,
                attempts: r.attempts.len(),
                accepted: r.accepted,
                fallback: r.fallback,
            }
        })
        .collect()
}

pub fn write_cleaned_jsonl(corpus: &Corpus, cleaned: &CleanedCorpus, path: &Path) -> Result<(), CorpusError> {
    write_records(path, cleaned_rows(corpus, cleaned))
}

/// Full per-attempt provenance, one record per line.
pub fn write_provenance_jsonl(cleaned: &CleanedCorpus, path: &Path) -> Result<(), CorpusError> {
    write_records(path, &cleaned.records)
}

pub fn read_cleaned_jsonl(path: &Path) -> Result<Vec<CleanedRow>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CorpusError::Json {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// One cleaned target per line.
pub fn write_cleaned_text<W: Write + ?Sized>(out: &mut W, cleaned: &CleanedCorpus) -> std::io::Result<()> {
    for t in cleaned.final_texts() {
        writeln!(out, "{}", t.replace('\n', " "))?;
    }
    Ok(())
}
