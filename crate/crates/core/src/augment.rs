//! Source-side noise augmentation and training-set assembly.
//!
//! Every kind flips a Bernoulli(alpha) coin per token. Randomness comes from a
//! ChaCha stream derived from (seed, kind, sample id), so outputs do not depend
//! on how samples are scheduled across threads.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clean::{match_case, DictionaryCorrector};
use crate::corpus::{normalize, Corpus, LangCode, ParallelSample};
use crate::http::{HttpClient, HttpError};
use crate::noise::{is_alphabetic_token, GrammarService};
use crate::sync::mix64;
use crate::tokenize::{segment, TokenList};

pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("alpha {0} outside [0, 1]")]
    Alpha(f64),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("synonym file line {line}: {message}")]
    Synonyms { line: usize, message: String },
    #[error("no synonym lexicon for {0}")]
    NoSynonyms(LangCode),
    #[error("no error dictionary supplied")]
    NoErrorDict,
    #[error("fill-mask service unavailable: {0}")]
    Unavailable(String),
    #[error(transparent)]
    Service(#[from] HttpError),
    #[error("unknown augmentation kind {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentKind {
    Char,
    Contextual,
    Error,
    Synonym,
}

impl AugmentKind {
    pub const ALL: [AugmentKind; 4] = [
        AugmentKind::Char,
        AugmentKind::Contextual,
        AugmentKind::Error,
        AugmentKind::Synonym,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AugmentKind::Char => "char",
            AugmentKind::Contextual => "contextual",
            AugmentKind::Error => "error",
            AugmentKind::Synonym => "synonym",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for AugmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AugmentKind {
    type Err = AugmentError;
    fn from_str(s: &str) -> Result<Self, AugmentError> {
        AugmentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| AugmentError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub alpha: f64,
    pub seed: u64,
    pub kind: AugmentKind,
}

impl AugmentConfig {
    pub fn new(kind: AugmentKind, alpha: f64, seed: u64) -> Result<Self, AugmentError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(AugmentError::Alpha(alpha));
        }
        Ok(AugmentConfig { alpha, seed, kind })
    }

    /// The random stream for one sample.
    pub fn rng_for(&self, sample_id: u64) -> ChaCha8Rng {
        let s = mix64(self.seed ^ mix64(sample_id ^ (self.kind.tag() << 56)));
        ChaCha8Rng::seed_from_u64(s)
    }
}

// ------------------------------------------------------------ char edits ----

const QWERTY: [&str; 3] = ["qwertyuiop", "asdfghjkl", "zxcvbnm"];

fn keyboard_neighbors(c: char) -> Vec<char> {
    let lower = c.to_ascii_lowercase();
    let rows: Vec<Vec<char>> = QWERTY.iter().map(|r| r.chars().collect()).collect();
    for (ri, row) in rows.iter().enumerate() {
        if let Some(ci) = row.iter().position(|&k| k == lower) {
            let mut out = Vec::new();
            for dr in [-1i32, 0, 1] {
                let r = ri as i32 + dr;
                if !(0..3).contains(&r) {
                    continue;
                }
                let row = &rows[r as usize];
                for dc in [-1i32, 0, 1] {
                    let col = ci as i32 + dc;
                    if (dr, dc) != (0, 0) && (0..row.len() as i32).contains(&col) {
                        let k = row[col as usize];
                        out.push(if c.is_ascii_uppercase() { k.to_ascii_uppercase() } else { k });
                    }
                }
            }
            return out;
        }
    }
    Vec::new()
}

fn random_letter(rng: &mut ChaCha8Rng, chars: &[char]) -> char {
    if chars.iter().all(char::is_ascii) {
        (b'a' + rng.random_range(0..26u8)) as char
    } else {
        *chars.choose(rng).unwrap()
    }
}

fn random_edit(chars: &mut Vec<char>, rng: &mut ChaCha8Rng) {
    let ascii = chars.iter().all(char::is_ascii);
    let mut ops = vec![1u8];
    if chars.windows(2).any(|w| w[0] != w[1]) {
        ops.push(0);
    }
    if chars.len() >= 2 {
        ops.push(2);
    }
    if ascii {
        ops.push(3);
    }
    match *ops.choose(rng).unwrap() {
        0 => {
            let spots: Vec<usize> = (0..chars.len() - 1).filter(|&i| chars[i] != chars[i + 1]).collect();
            let i = *spots.choose(rng).unwrap();
            chars.swap(i, i + 1);
        }
        1 => {
            let c = random_letter(rng, chars);
            let i = rng.random_range(0..=chars.len());
            chars.insert(i, c);
        }
        2 => {
            let i = rng.random_range(0..chars.len());
            chars.remove(i);
        }
        _ => {
            let i = rng.random_range(0..chars.len());
            let old = chars[i].to_ascii_lowercase();
            let mut c = old;
            while c == old {
                c = (b'a' + rng.random_range(0..26u8)) as char;
            }
            chars[i] = c;
        }
    }
}

/// Case flip or keyboard-neighbor substitution; false when neither applies.
fn controlled_edit(chars: &mut [char], rng: &mut ChaCha8Rng) -> bool {
    let flippable: Vec<usize> = (0..chars.len())
        .filter(|&i| chars[i].is_lowercase() != chars[i].is_uppercase())
        .collect();
    let typeable: Vec<usize> = (0..chars.len()).filter(|&i| chars[i].is_ascii_alphabetic()).collect();
    let flip = match (flippable.is_empty(), typeable.is_empty()) {
        (true, true) => return false,
        (false, true) => true,
        (true, false) => false,
        (false, false) => rng.random_bool(0.5),
    };
    if flip {
        let i = *flippable.choose(rng).unwrap();
        let c = chars[i];
        let flipped: Vec<char> = if c.is_uppercase() {
            c.to_lowercase().collect()
        } else {
            c.to_uppercase().collect()
        };
        if flipped.len() == 1 && flipped[0] != c {
            chars[i] = flipped[0];
            return true;
        }
        return false;
    }
    let i = *typeable.choose(rng).unwrap();
    chars[i] = *keyboard_neighbors(chars[i]).choose(rng).unwrap();
    true
}

/// One guaranteed-visible edit to a token containing a letter.
pub fn edit_token(token: &str, rng: &mut ChaCha8Rng) -> String {
    if !token.chars().any(char::is_alphabetic) {
        return token.to_string();
    }
    let mut chars: Vec<char> = token.chars().collect();
    let random = rng.random_bool(0.5);
    if random || !controlled_edit(&mut chars, rng) {
        random_edit(&mut chars, rng);
    }
    chars.into_iter().collect()
}

/// Per token with probability alpha: a random edit (swap, insert, delete,
/// substitute) or a controlled one (case flip, keyboard neighbor), 50/50.
pub fn char_augment(tokens: &TokenList, cfg: &AugmentConfig, rng: &mut ChaCha8Rng) -> TokenList {
    let out = tokens
        .iter()
        .map(|t| {
            if rng.random_bool(cfg.alpha) {
                edit_token(t, rng)
            } else {
                t.to_string()
            }
        })
        .collect();
    TokenList::new(out, tokens.lang.clone())
}

// ------------------------------------------------------------ error dict ----

/// Correct form to observed misspellings with counts, all case-folded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorDict {
    pub entries: BTreeMap<String, Vec<(String, u32)>>,
}

impl ErrorDict {
    pub const MIN_COUNT: u32 = 2;

    /// Keeps (correct, error) pairs seen at least [`Self::MIN_COUNT`] times.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut counts: BTreeMap<(String, String), u32> = BTreeMap::new();
        for (c, e) in pairs {
            let (c, e) = (c.to_lowercase(), e.to_lowercase());
            if c != e && !c.is_empty() && !e.is_empty() {
                *counts.entry((c, e)).or_default() += 1;
            }
        }
        let mut entries: BTreeMap<String, Vec<(String, u32)>> = BTreeMap::new();
        for ((c, e), n) in counts {
            if n >= Self::MIN_COUNT {
                entries.entry(c).or_default().push((e, n));
            }
        }
        ErrorDict { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, correct: &str) -> Option<&[(String, u32)]> {
        self.entries.get(&correct.to_lowercase()).map(Vec::as_slice)
    }

    pub fn load(path: &Path) -> Result<Self, AugmentError> {
        let text = std::fs::read_to_string(path).map_err(|source| AugmentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| AugmentError::Synonyms {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), AugmentError> {
        let text = serde_json::to_string_pretty(self).expect("error dict serializes");
        std::fs::write(path, text + "\n").map_err(|source| AugmentError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// How misspellings are found when mining an [`ErrorDict`].
#[derive(Debug, Clone)]
pub enum ErrorDetector {
    /// Out-of-vocabulary words paired with their unique nearest dictionary word.
    Dictionary(DictionaryCorrector),
    /// Single-token spans flagged by a grammar service, paired with the first suggestion.
    Service(GrammarService),
}

pub fn build_error_dict<S: AsRef<str> + Sync>(
    texts: &[S],
    lang: &LangCode,
    detector: &ErrorDetector,
) -> Result<ErrorDict, AugmentError> {
    let pairs = texts
        .par_iter()
        .map(|t| -> Result<Vec<(String, String)>, AugmentError> {
            let text = normalize(t.as_ref());
            match detector {
                ErrorDetector::Dictionary(d) => Ok(segment(&text, lang)
                    .into_iter()
                    .filter_map(|r| {
                        let tok = &text[r];
                        d.suggest(tok).map(|fix| (fix, tok.to_string()))
                    })
                    .collect()),
                ErrorDetector::Service(s) => Ok(s
                    .check(&text, lang)?
                    .into_iter()
                    .filter_map(|m| {
                        let span = &text[m.start..m.end];
                        let fix = m.replacements.first()?;
                        (is_alphabetic_token(span) && is_alphabetic_token(fix)).then(|| (fix.clone(), span.to_string()))
                    })
                    .collect()),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ErrorDict::from_pairs(pairs.into_iter().flatten()))
}

/// Replaces dictionary keys, with probability alpha, by a count-weighted
/// sample of their error forms.
pub fn error_augment(tokens: &TokenList, cfg: &AugmentConfig, dict: &ErrorDict, rng: &mut ChaCha8Rng) -> TokenList {
    if dict.is_empty() && cfg.alpha > 0.0 {
        log::warn!("error dictionary is empty; error augmentation is the identity");
    }
    let out = tokens
        .iter()
        .map(|t| {
            let hit = rng.random_bool(cfg.alpha);
            match dict.get(t) {
                Some(forms) if hit => {
                    let w = WeightedIndex::new(forms.iter().map(|(_, n)| *n)).expect("positive counts");
                    match_case(&forms[w.sample(rng)].0, t)
                }
                _ => t.to_string(),
            }
        })
        .collect();
    TokenList::new(out, tokens.lang.clone())
}

// -------------------------------------------------------------- synonyms ----

#[derive(Debug, Clone, PartialEq)]
pub struct SynonymLexicon {
    pub lang: LangCode,
    entries: HashMap<String, Vec<String>>,
}

impl SynonymLexicon {
    /// Parses `word<TAB>syn1,syn2` lines; `#` starts a comment.
    pub fn parse(lang: LangCode, text: &str) -> Result<Self, AugmentError> {
        let mut entries: HashMap<String, Vec<String>> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, syns) = line.split_once('\t').ok_or_else(|| AugmentError::Synonyms {
                line: i + 1,
                message: "expected word<TAB>synonyms".into(),
            })?;
            let word = normalize(word.trim()).to_lowercase();
            let list = entries.entry(word.clone()).or_default();
            for s in syns.split(',') {
                let s = normalize(s.trim()).to_lowercase();
                if !s.is_empty() && s != word && !list.contains(&s) {
                    list.push(s);
                }
            }
        }
        entries.retain(|_, v| !v.is_empty());
        Ok(SynonymLexicon { lang, entries })
    }

    /// Groups `synset<TAB>lemma` lines (a flattened WordNet export) into
    /// mutual-synonym entries.
    pub fn import_wordnet(lang: LangCode, text: &str) -> Result<Self, AugmentError> {
        let mut sets: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, lemma) = line.split_once('\t').ok_or_else(|| AugmentError::Synonyms {
                line: i + 1,
                message: "expected synset<TAB>lemma".into(),
            })?;
            sets.entry(id.to_string()).or_default().push(lemma.replace('_', " "));
        }
        let mut tsv = String::new();
        for lemmas in sets.values() {
            for w in lemmas {
                let others: Vec<&str> = lemmas.iter().filter(|o| *o != w).map(String::as_str).collect();
                tsv.push_str(&format!("{w}\t{}\n", others.join(",")));
            }
        }
        SynonymLexicon::parse(lang, &tsv)
    }

    pub fn load(lang: LangCode, path: &Path) -> Result<Self, AugmentError> {
        let text = std::fs::read_to_string(path).map_err(|source| AugmentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        SynonymLexicon::parse(lang, &text)
    }

    pub fn builtin(lang: &LangCode) -> Option<Self> {
        let text = match lang.as_str() {
            "en" => include_str!("../data/synonyms/en.tsv"),
            "fr" => include_str!("../data/synonyms/fr.tsv"),
            "ja" => include_str!("../data/synonyms/ja.tsv"),
            _ => return None,
        };
        Some(SynonymLexicon::parse(lang.clone(), text).expect("bundled synonyms parse"))
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn synonym_augment(tokens: &TokenList, cfg: &AugmentConfig, lexicon: &SynonymLexicon, rng: &mut ChaCha8Rng) -> TokenList {
    let out = tokens
        .iter()
        .map(|t| {
            let hit = rng.random_bool(cfg.alpha);
            match lexicon.get(t) {
                Some(syns) if hit => {
                    let s = syns.choose(rng).unwrap();
                    if t.chars().next().is_some_and(char::is_uppercase) {
                        match_case(s, &t.chars().take(1).collect::<String>())
                    } else {
                        s.clone()
                    }
                }
                _ => t.to_string(),
            }
        })
        .collect();
    TokenList::new(out, tokens.lang.clone())
}

// ------------------------------------------------------------ contextual ----

/// Masked-LM service: candidates for the token at `mask_index` of `text`.
pub trait FillMask: Send + Sync {
    fn fill(&self, text: &str, mask_index: usize, top_k: usize) -> Result<Vec<String>, HttpError>;
}

#[derive(Debug, Clone)]
pub struct HttpFillMask {
    client: HttpClient,
}

impl HttpFillMask {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        HttpFillMask {
            client: HttpClient::new(base_url, timeout),
        }
    }
}

#[derive(Deserialize)]
struct FillResponse {
    candidates: Vec<String>,
}

impl FillMask for HttpFillMask {
    fn fill(&self, text: &str, mask_index: usize, top_k: usize) -> Result<Vec<String>, HttpError> {
        let body = serde_json::json!({"text": text, "mask_index": mask_index, "top_k": top_k});
        let r: FillResponse = self.client.post_json("/fill", &body)?;
        Ok(r.candidates)
    }
}

pub const FILL_TOP_K: usize = 5;

/// A text as tokens plus the exact separators around them.
struct Spliced {
    gaps: Vec<String>,
    tokens: Vec<String>,
}

impl Spliced {
    fn new(text: &str, lang: &LangCode) -> Self {
        let mut gaps = Vec::new();
        let mut tokens = Vec::new();
        let mut last = 0;
        for r in segment(text, lang) {
            gaps.push(text[last..r.start].to_string());
            tokens.push(text[r.clone()].to_string());
            last = r.end;
        }
        gaps.push(text[last..].to_string());
        Spliced { gaps, tokens }
    }

    fn text(&self) -> String {
        let mut s = String::new();
        for (g, t) in self.gaps.iter().zip(&self.tokens) {
            s.push_str(g);
            s.push_str(t);
        }
        s.push_str(self.gaps.last().unwrap());
        s
    }
}

/// Masks word tokens one at a time with probability alpha and substitutes the
/// best service candidate that differs from the original word.
pub fn contextual_augment(
    text: &str,
    lang: &LangCode,
    cfg: &AugmentConfig,
    fill: &dyn FillMask,
    rng: &mut ChaCha8Rng,
) -> Result<String, AugmentError> {
    let mut s = Spliced::new(&normalize(text), lang);
    for i in 0..s.tokens.len() {
        let hit = rng.random_bool(cfg.alpha);
        if !hit || !s.tokens[i].chars().any(char::is_alphanumeric) {
            continue;
        }
        let cands = fill
            .fill(&s.text(), i, FILL_TOP_K)
            .map_err(|e| AugmentError::Unavailable(e.to_string()))?;
        let orig = s.tokens[i].to_lowercase();
        if let Some(c) = cands
            .into_iter()
            .map(|c| c.trim().to_string())
            .find(|c| !c.is_empty() && c.to_lowercase() != orig)
        {
            s.tokens[i] = c;
        }
    }
    Ok(s.text())
}

// --------------------------------------------------------- training sets ----

/// Resources the token-level kinds draw on.
#[derive(Default)]
pub struct AugmentResources {
    pub errors: Option<ErrorDict>,
    pub synonyms: Option<SynonymLexicon>,
    pub fill_mask: Option<Box<dyn FillMask>>,
}

/// Augments one source sentence, keeping its whitespace layout.
pub fn augment_text(
    text: &str,
    lang: &LangCode,
    cfg: &AugmentConfig,
    res: &AugmentResources,
    rng: &mut ChaCha8Rng,
) -> Result<String, AugmentError> {
    if cfg.kind == AugmentKind::Contextual {
        let fill = res
            .fill_mask
            .as_deref()
            .ok_or_else(|| AugmentError::Unavailable("no fill-mask endpoint configured".into()))?;
        return contextual_augment(text, lang, cfg, fill, rng);
    }
    let mut s = Spliced::new(&normalize(text), lang);
    let tokens = TokenList::new(s.tokens.clone(), lang.clone());
    let out = match cfg.kind {
        AugmentKind::Char => char_augment(&tokens, cfg, rng),
        AugmentKind::Error => error_augment(&tokens, cfg, res.errors.as_ref().ok_or(AugmentError::NoErrorDict)?, rng),
        AugmentKind::Synonym => {
            let lex = res.synonyms.as_ref().ok_or_else(|| AugmentError::NoSynonyms(lang.clone()))?;
            if lex.lang != *lang {
                return Err(AugmentError::NoSynonyms(lang.clone()));
            }
            synonym_augment(&tokens, cfg, lex, rng)
        }
        AugmentKind::Contextual => unreachable!(),
    };
    s.tokens = out.tokens;
    Ok(s.text())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedRow {
    pub id: u64,
    pub src_lang: LangCode,
    pub tgt_lang: LangCode,
    pub src: String,
    pub tgt: String,
    pub augmentation: String,
    pub origin_id: u64,
}

impl AugmentedRow {
    fn from_sample(id: u64, s: &ParallelSample, src: String, augmentation: &str) -> Self {
        AugmentedRow {
            id,
            src_lang: s.src_lang.clone(),
            tgt_lang: s.tgt_lang.clone(),
            src,
            tgt: s.tgt_text.clone(),
            augmentation: augmentation.to_string(),
            origin_id: s.id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingSetStats {
    pub pairs: usize,
    /// Augmented twins identical to their original.
    pub duplicate_twins: usize,
    pub tokens: usize,
    pub modified_tokens: usize,
}

#[derive(Debug)]
pub enum TrainingSet {
    Built { rows: Vec<AugmentedRow>, stats: TrainingSetStats },
    Unavailable(String),
}

pub fn write_training_set(path: &Path, rows: &[AugmentedRow]) -> Result<(), crate::corpus::CorpusError> {
    crate::corpus::write_records(path, rows)
}

/// For each kind, the original pairs interleaved with their augmented-source
/// twins (`id` 2i and 2i+1); targets are copied verbatim.
pub fn make_training_sets(
    corpus: &Corpus,
    kinds: &[AugmentKind],
    alpha: f64,
    seed: u64,
    res: &AugmentResources,
) -> Result<Vec<(AugmentKind, TrainingSet)>, AugmentError> {
    let mut out = Vec::new();
    for &kind in kinds {
        let cfg = AugmentConfig::new(kind, alpha, seed)?;
        let augmented: Result<Vec<String>, AugmentError> = corpus
            .samples
            .par_iter()
            .map(|s| augment_text(&s.src_text, &s.src_lang, &cfg, res, &mut cfg.rng_for(s.id)))
            .collect();
        let set = match augmented {
            Err(e) => {
                log::warn!("{kind} augmentation unavailable: {e}");
                TrainingSet::Unavailable(e.to_string())
            }
            Ok(srcs) => {
                let mut rows = Vec::with_capacity(corpus.len() * 2);
                let mut stats = TrainingSetStats::default();
                for (i, (s, z)) in corpus.samples.iter().zip(srcs).enumerate() {
                    let a = crate::tokenize::tokenize(&s.src_text, &s.src_lang);
                    let b = crate::tokenize::tokenize(&z, &s.src_lang);
                    stats.tokens += a.len();
                    stats.modified_tokens += a.iter().zip(b.iter()).filter(|(x, y)| x != y).count()
                        + a.len().abs_diff(b.len());
                    if z == s.src_text {
                        stats.duplicate_twins += 1;
                    }
                    rows.push(AugmentedRow::from_sample(2 * i as u64, s, s.src_text.clone(), "none"));
                    rows.push(AugmentedRow::from_sample(2 * i as u64 + 1, s, z, kind.as_str()));
                }
                stats.pairs = rows.len();
                if stats.duplicate_twins > 0 {
                    log::info!("{kind}: {} augmented twins equal their original", stats.duplicate_twins);
                }
                TrainingSet::Built { rows, stats }
            }
        };
        out.push((kind, set));
    }
    Ok(out)
}
