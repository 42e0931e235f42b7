//! Noise measurement: spelling/grammar errors, emojis, internet slang and
//! profanities, reported as frequencies per 100 tokens.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::corpus::{normalize, LangCode};
use crate::http::{HttpClient, HttpError};
use crate::tokenize::{tokenize, TokenList, Tokenizer};

#[derive(Debug, thiserror::Error)]
pub enum NoiseError {
    #[error("no {kind} resource for language {lang}")]
    MissingResource { kind: &'static str, lang: LangCode },
    #[error("resource language {resource} does not match token language {tokens}")]
    LangMismatch { resource: LangCode, tokens: LangCode },
    #[error("emoji data line {line}: {message}")]
    EmojiData { line: usize, message: String },
    #[error("emoji data is empty")]
    EmptyEmojiData,
    #[error("{0} has no entries")]
    EmptyResource(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Service(#[from] HttpError),
}

fn read_resource(path: &Path) -> Result<String, NoiseError> {
    std::fs::read_to_string(path).map_err(|source| NoiseError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Lines of a resource file with `#` comments and blank lines removed.
fn entry_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(|l| l.split_once('#').map_or(l, |(before, _)| before).trim())
        .filter(|l| !l.is_empty())
}

// ---------------------------------------------------------------- emoji ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmojiProperty {
    Emoji,
    EmojiPresentation,
    EmojiModifier,
    EmojiModifierBase,
    EmojiComponent,
    ExtendedPictographic,
}

impl FromStr for EmojiProperty {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "Emoji" => EmojiProperty::Emoji,
            "Emoji_Presentation" => EmojiProperty::EmojiPresentation,
            "Emoji_Modifier" => EmojiProperty::EmojiModifier,
            "Emoji_Modifier_Base" => EmojiProperty::EmojiModifierBase,
            "Emoji_Component" => EmojiProperty::EmojiComponent,
            "Extended_Pictographic" => EmojiProperty::ExtendedPictographic,
            _ => return Err(()),
        })
    }
}

/// Code-point ranges per emoji property, parsed from `emoji-data.txt`.
#[derive(Debug, Clone)]
pub struct EmojiData {
    ranges: HashMap<EmojiProperty, Vec<(u32, u32)>>,
}

const BUILTIN_EMOJI_DATA: &str = include_str!("../data/emoji-data.txt");

impl EmojiData {
    pub fn builtin() -> Self {
        EmojiData::parse(BUILTIN_EMOJI_DATA).expect("bundled emoji data parses")
    }

    pub fn load(path: &Path) -> Result<Self, NoiseError> {
        EmojiData::parse(&read_resource(path)?)
    }

    /// Parses `<cp>[..<cp>] ; <Property> # comment` lines. Unknown properties
    /// are skipped.
    pub fn parse(text: &str) -> Result<Self, NoiseError> {
        let mut ranges: HashMap<EmojiProperty, Vec<(u32, u32)>> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(b, _)| b).trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| NoiseError::EmojiData {
                line: i + 1,
                message: message.to_string(),
            };
            let (cps, prop) = line.split_once(';').ok_or_else(|| err("missing ';'"))?;
            let Ok(prop) = prop.trim().parse::<EmojiProperty>() else {
                continue;
            };
            let parse_cp = |s: &str| u32::from_str_radix(s.trim(), 16).map_err(|_| err("bad code point"));
            let (lo, hi) = match cps.split_once("..") {
                Some((a, b)) => (parse_cp(a)?, parse_cp(b)?),
                None => {
                    let c = parse_cp(cps)?;
                    (c, c)
                }
            };
            if lo > hi {
                return Err(err("range start after end"));
            }
            ranges.entry(prop).or_default().push((lo, hi));
        }
        if ranges.is_empty() {
            return Err(NoiseError::EmptyEmojiData);
        }
        for v in ranges.values_mut() {
            v.sort_unstable();
        }
        Ok(EmojiData { ranges })
    }

    pub fn has(&self, c: char, prop: EmojiProperty) -> bool {
        let cp = c as u32;
        let Some(v) = self.ranges.get(&prop) else {
            return false;
        };
        let idx = v.partition_point(|&(lo, _)| lo <= cp);
        idx > 0 && v[idx - 1].1 >= cp
    }

    /// Whether an extended grapheme cluster renders as an emoji.
    ///
    /// Counted: clusters with a default-emoji-presentation code point, clusters
    /// qualified by VS16 or a keycap mark, modifier sequences, and pictographs
    /// from U+2600 upwards (hearts and dingbats are often typed without VS16).
    /// Digits, `#`, `©` and the like count only when qualified.
    pub fn is_emoji_cluster(&self, cluster: &str) -> bool {
        let qualified = cluster.contains('\u{FE0F}') || cluster.contains('\u{20E3}');
        cluster.chars().any(|c| {
            self.has(c, EmojiProperty::EmojiPresentation)
                || self.has(c, EmojiProperty::EmojiModifier)
                || (self.has(c, EmojiProperty::Emoji)
                    && (qualified
                        || (c as u32 >= 0x2600 && self.has(c, EmojiProperty::ExtendedPictographic))))
        })
    }
}

/// Number of emoji grapheme clusters in `text`. ZWJ sequences count once.
pub fn count_emojis(text: &str, data: &EmojiData) -> usize {
    text.graphemes(true).filter(|g| data.is_emoji_cluster(g)).count()
}

// -------------------------------------------------------------- lexicons ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconKind {
    Slang,
    Profanity,
}

impl fmt::Display for LexiconKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LexiconKind::Slang => "slang",
            LexiconKind::Profanity => "profanity",
        })
    }
}

/// Slang or profanity entries, each stored as a lowercase token sequence.
#[derive(Debug, Clone)]
pub struct NoiseLexicon {
    pub kind: LexiconKind,
    pub lang: LangCode,
    entries: Vec<Vec<String>>,
    by_first: HashMap<String, Vec<usize>>,
}

impl NoiseLexicon {
    pub fn new<S: AsRef<str>>(
        kind: LexiconKind,
        lang: LangCode,
        entries: impl IntoIterator<Item = S>,
    ) -> Result<Self, NoiseError> {
        let mut seen = HashSet::new();
        let mut list: Vec<Vec<String>> = Vec::new();
        for e in entries {
            let toks: Vec<String> = tokenize(&normalize(e.as_ref()).to_lowercase(), &lang).tokens;
            if !toks.is_empty() && seen.insert(toks.clone()) {
                list.push(toks);
            }
        }
        if list.is_empty() {
            return Err(NoiseError::EmptyResource(format!("{kind} lexicon ({lang})")));
        }
        let mut by_first: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in list.iter().enumerate() {
            by_first.entry(e[0].clone()).or_default().push(i);
        }
        for idx in by_first.values_mut() {
            idx.sort_by_key(|&i| std::cmp::Reverse(list[i].len()));
        }
        Ok(NoiseLexicon {
            kind,
            lang,
            entries: list,
            by_first,
        })
    }

    /// Parses a lexicon file: one entry per line, `#` starts a comment.
    pub fn parse(kind: LexiconKind, lang: LangCode, text: &str) -> Result<Self, NoiseError> {
        NoiseLexicon::new(kind, lang, entry_lines(text))
    }

    pub fn load(kind: LexiconKind, lang: LangCode, path: &Path) -> Result<Self, NoiseError> {
        NoiseLexicon::parse(kind, lang, &read_resource(path)?)
    }

    /// Seed lexicon shipped with the crate, if there is one for `lang`.
    pub fn builtin(kind: LexiconKind, lang: &LangCode) -> Option<Self> {
        let text = match (kind, lang.as_str()) {
            (LexiconKind::Slang, "en") => include_str!("../data/lexicons/slang-en.txt"),
            (LexiconKind::Slang, "fr") => include_str!("../data/lexicons/slang-fr.txt"),
            (LexiconKind::Slang, "ja") => include_str!("../data/lexicons/slang-ja.txt"),
            (LexiconKind::Profanity, "en") => include_str!("../data/lexicons/profanity-en.txt"),
            (LexiconKind::Profanity, "fr") => include_str!("../data/lexicons/profanity-fr.txt"),
            (LexiconKind::Profanity, "ja") => include_str!("../data/lexicons/profanity-ja.txt"),
            _ => return None,
        };
        Some(NoiseLexicon::parse(kind, lang.clone(), text).expect("bundled lexicon parses"))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn masked_hit(&self, token: &str) -> bool {
        self.entries
            .iter()
            .filter(|e| e.len() == 1)
            .any(|e| mask_matches(token, &e[0]))
    }
}

/// `*` stands for one hidden character; a trailing run of `*` may hide the
/// rest of the word. At least one visible character is required.
fn mask_matches(masked: &str, word: &str) -> bool {
    let p: Vec<char> = masked.chars().collect();
    let w: Vec<char> = word.chars().collect();
    if !p.contains(&'*') || p.iter().all(|&c| c == '*') {
        return false;
    }
    let trailing = p.iter().rev().take_while(|&&c| c == '*').count();
    let body = &p[..p.len() - trailing];
    let fits = if trailing > 0 {
        w.len() >= p.len()
    } else {
        w.len() == p.len()
    };
    fits && body.iter().zip(&w).all(|(&pc, &wc)| pc == '*' || pc == wc)
}

/// Case-insensitive lexicon hits. Phrases match contiguous tokens; at each
/// position the longest matching entry wins and its tokens are consumed.
pub fn count_lexicon_hits(tokens: &TokenList, lexicon: &NoiseLexicon) -> Result<usize, NoiseError> {
    if tokens.lang != lexicon.lang {
        return Err(NoiseError::LangMismatch {
            resource: lexicon.lang.clone(),
            tokens: tokens.lang.clone(),
        });
    }
    let lower: Vec<String> = tokens.iter().map(str::to_lowercase).collect();
    let mut hits = 0;
    let mut i = 0;
    while i < lower.len() {
        let matched = lexicon.by_first.get(&lower[i]).and_then(|cands| {
            cands
                .iter()
                .map(|&c| &lexicon.entries[c])
                .find(|e| lower.len() - i >= e.len() && lower[i..i + e.len()] == e[..])
                .map(Vec::len)
        });
        match matched {
            Some(len) => {
                hits += 1;
                i += len;
            }
            None => {
                if lower[i].contains('*') && lexicon.masked_hit(&lower[i]) {
                    hits += 1;
                }
                i += 1;
            }
        }
    }
    Ok(hits)
}

// -------------------------------------------------------------- spelling ----

#[derive(Debug, Clone)]
pub struct SpellDictionary {
    pub lang: LangCode,
    words: HashSet<String>,
}

impl SpellDictionary {
    pub fn new<S: AsRef<str>>(lang: LangCode, words: impl IntoIterator<Item = S>) -> Result<Self, NoiseError> {
        let words: HashSet<String> = words
            .into_iter()
            .map(|w| normalize(w.as_ref().trim()).to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(NoiseError::EmptyResource(format!("spelling dictionary ({lang})")));
        }
        Ok(SpellDictionary { lang, words })
    }

    pub fn parse(lang: LangCode, text: &str) -> Result<Self, NoiseError> {
        SpellDictionary::new(lang, entry_lines(text))
    }

    pub fn load(lang: LangCode, path: &Path) -> Result<Self, NoiseError> {
        SpellDictionary::parse(lang, &read_resource(path)?)
    }

    pub fn builtin(lang: &LangCode) -> Option<Self> {
        let text = match lang.as_str() {
            "en" => include_str!("../data/dict/en.txt"),
            "fr" => include_str!("../data/dict/fr.txt"),
            _ => return None,
        };
        Some(SpellDictionary::parse(lang.clone(), text).expect("bundled dictionary parses"))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Every character used by some dictionary word.
    pub(crate) fn alphabet(&self) -> Vec<char> {
        let set: HashSet<char> = self.words.iter().flat_map(|w| w.chars()).collect();
        let mut v: Vec<char> = set.into_iter().collect();
        v.sort_unstable();
        v
    }
}

/// Tokens made only of letters; the only ones spell-checked.
pub fn is_alphabetic_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(char::is_alphabetic)
}

/// Alphabetic tokens missing from the dictionary (case-folded).
pub fn count_misspellings(tokens: &TokenList, dict: &SpellDictionary) -> Result<usize, NoiseError> {
    if tokens.lang != dict.lang {
        return Err(NoiseError::LangMismatch {
            resource: dict.lang.clone(),
            tokens: tokens.lang.clone(),
        });
    }
    Ok(tokens
        .iter()
        .filter(|t| is_alphabetic_token(t) && !dict.contains(t))
        .count())
}

/// One flagged span from a LanguageTool-compatible service, in byte offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarMatch {
    pub start: usize,
    pub end: usize,
    pub replacements: Vec<String>,
}

/// Client for `POST /v2/check` grammar-check services.
#[derive(Debug, Clone)]
pub struct GrammarService {
    client: HttpClient,
}

#[derive(Deserialize)]
struct CheckResponse {
    matches: Vec<CheckMatch>,
}

#[derive(Deserialize)]
struct CheckMatch {
    offset: usize,
    length: usize,
    #[serde(default)]
    replacements: Vec<CheckReplacement>,
}

#[derive(Deserialize)]
struct CheckReplacement {
    value: String,
}

impl GrammarService {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        GrammarService {
            client: HttpClient::new(base_url, timeout),
        }
    }

    pub fn from_client(client: HttpClient) -> Self {
        GrammarService { client }
    }

    fn language_tag(lang: &LangCode) -> &str {
        match lang.as_str() {
            "en" => "en-US",
            "ja" => "ja-JP",
            other => other,
        }
    }

    /// Flagged spans of `text`. Service offsets count UTF-16 code units and
    /// are converted to byte offsets; spans that do not map are dropped.
    pub fn check(&self, text: &str, lang: &LangCode) -> Result<Vec<GrammarMatch>, HttpError> {
        let resp: CheckResponse = self
            .client
            .post_form("/v2/check", &[("text", text), ("language", Self::language_tag(lang))])?;
        let mut utf16_to_byte = HashMap::new();
        let mut units = 0usize;
        for (b, c) in text.char_indices() {
            utf16_to_byte.insert(units, b);
            units += c.len_utf16();
        }
        utf16_to_byte.insert(units, text.len());
        Ok(resp
            .matches
            .into_iter()
            .filter_map(|m| {
                let start = *utf16_to_byte.get(&m.offset)?;
                let end = *utf16_to_byte.get(&(m.offset + m.length))?;
                Some(GrammarMatch {
                    start,
                    end,
                    replacements: m.replacements.into_iter().map(|r| r.value).collect(),
                })
            })
            .collect())
    }

    pub fn count(&self, text: &str, lang: &LangCode) -> Result<usize, HttpError> {
        Ok(self.check(text, lang)?.len())
    }
}

/// Source of spelling/grammar error counts.
#[derive(Debug, Clone)]
pub enum SpellChecker {
    Dictionary(SpellDictionary),
    Service(GrammarService),
}

// ---------------------------------------------------------------- report ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseCategory {
    SpellGram,
    Emoji,
    Slang,
    Profanity,
}

impl NoiseCategory {
    pub const ALL: [NoiseCategory; 4] = [
        NoiseCategory::SpellGram,
        NoiseCategory::Emoji,
        NoiseCategory::Slang,
        NoiseCategory::Profanity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseCategory::SpellGram => "spell_gram",
            NoiseCategory::Emoji => "emoji",
            NoiseCategory::Slang => "slang",
            NoiseCategory::Profanity => "profanity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub token_count: u64,
    pub counts: BTreeMap<NoiseCategory, u64>,
    pub freq_per_100: BTreeMap<NoiseCategory, f64>,
}

impl NoiseReport {
    pub fn from_counts(token_count: u64, counts: [u64; 4]) -> Self {
        let counts: BTreeMap<_, _> = NoiseCategory::ALL.into_iter().zip(counts).collect();
        let freq_per_100 = counts
            .iter()
            .map(|(&c, &n)| {
                let f = if token_count == 0 {
                    0.0
                } else {
                    100.0 * n as f64 / token_count as f64
                };
                (c, f)
            })
            .collect();
        NoiseReport {
            token_count,
            counts,
            freq_per_100,
        }
    }

    pub fn empty() -> Self {
        NoiseReport::from_counts(0, [0; 4])
    }

    pub fn count(&self, c: NoiseCategory) -> u64 {
        self.counts.get(&c).copied().unwrap_or(0)
    }

    pub fn freq(&self, c: NoiseCategory) -> f64 {
        self.freq_per_100.get(&c).copied().unwrap_or(0.0)
    }

    fn count_array(&self) -> [u64; 4] {
        NoiseCategory::ALL.map(|c| self.count(c))
    }

    /// Report of the union of two corpora: counts and tokens add.
    pub fn merge(&self, other: &NoiseReport) -> NoiseReport {
        let a = self.count_array();
        let b = other.count_array();
        NoiseReport::from_counts(
            self.token_count + other.token_count,
            [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]],
        )
    }
}

/// Everything [`noise_report`] needs, keyed by language.
#[derive(Debug, Clone)]
pub struct NoiseResources {
    pub emoji: EmojiData,
    pub slang: HashMap<LangCode, NoiseLexicon>,
    pub profanity: HashMap<LangCode, NoiseLexicon>,
    pub dictionaries: HashMap<LangCode, SpellDictionary>,
    pub grammar: Option<GrammarService>,
    pub tokenizer: Tokenizer,
}

impl NoiseResources {
    /// Empty lexicon/dictionary maps with the bundled emoji data.
    pub fn new() -> Self {
        NoiseResources {
            emoji: EmojiData::builtin(),
            slang: HashMap::new(),
            profanity: HashMap::new(),
            dictionaries: HashMap::new(),
            grammar: None,
            tokenizer: Tokenizer::Native,
        }
    }

    /// Bundled seed lexicons and dictionaries for every language that has them.
    pub fn builtin() -> Self {
        let mut r = NoiseResources::new();
        for code in crate::corpus::DEFAULT_LANGS {
            let lang = LangCode::parse(code).expect("default language");
            if let Some(l) = NoiseLexicon::builtin(LexiconKind::Slang, &lang) {
                r.slang.insert(lang.clone(), l);
            }
            if let Some(l) = NoiseLexicon::builtin(LexiconKind::Profanity, &lang) {
                r.profanity.insert(lang.clone(), l);
            }
            if let Some(d) = SpellDictionary::builtin(&lang) {
                r.dictionaries.insert(lang.clone(), d);
            }
        }
        r
    }

    pub fn with_lexicon(mut self, lexicon: NoiseLexicon) -> Self {
        match lexicon.kind {
            LexiconKind::Slang => self.slang.insert(lexicon.lang.clone(), lexicon),
            LexiconKind::Profanity => self.profanity.insert(lexicon.lang.clone(), lexicon),
        };
        self
    }

    pub fn with_dictionary(mut self, dict: SpellDictionary) -> Self {
        self.dictionaries.insert(dict.lang.clone(), dict);
        self
    }

    /// The spell checker for `lang`: the grammar service when configured,
    /// otherwise the dictionary.
    pub fn spell_checker(&self, lang: &LangCode) -> Result<SpellChecker, NoiseError> {
        if let Some(g) = &self.grammar {
            return Ok(SpellChecker::Service(g.clone()));
        }
        self.dictionaries
            .get(lang)
            .cloned()
            .map(SpellChecker::Dictionary)
            .ok_or(NoiseError::MissingResource {
                kind: "spelling dictionary or grammar service",
                lang: lang.clone(),
            })
    }
}

impl Default for NoiseResources {
    fn default() -> Self {
        NoiseResources::new()
    }
}

/// Tokenizes every text, sums category counts and tokens, and derives
/// per-100-token frequencies. Sentences are counted in parallel.
pub fn noise_report<S: AsRef<str> + Sync>(
    texts: &[S],
    lang: &LangCode,
    resources: &NoiseResources,
) -> Result<NoiseReport, NoiseError> {
    let missing = |kind| NoiseError::MissingResource { kind, lang: lang.clone() };
    let slang = resources.slang.get(lang).ok_or_else(|| missing("slang lexicon"))?;
    let profanity = resources.profanity.get(lang).ok_or_else(|| missing("profanity lexicon"))?;
    let checker = resources.spell_checker(lang)?;

    let per_sentence = texts
        .par_iter()
        .map(|t| {
            let text = normalize(t.as_ref());
            let tokens = resources.tokenizer.tokenize(&text, lang)?;
            let spell = match &checker {
                SpellChecker::Dictionary(d) => count_misspellings(&tokens, d)?,
                SpellChecker::Service(s) => s.count(&text, lang)?,
            };
            Ok([
                tokens.len() as u64,
                spell as u64,
                count_emojis(&text, &resources.emoji) as u64,
                count_lexicon_hits(&tokens, slang)? as u64,
                count_lexicon_hits(&tokens, profanity)? as u64,
            ])
        })
        .collect::<Result<Vec<[u64; 5]>, NoiseError>>()?;
    let mut sums = [0u64; 5];
    for row in per_sentence {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    Ok(NoiseReport::from_counts(sums[0], [sums[1], sums[2], sums[3], sums[4]]))
}

/// Writes `eval_set,spell_gram,emoji,slang,profanity` rows, three decimals.
pub fn write_noise_csv<W: Write + ?Sized>(out: &mut W, rows: &[(String, NoiseReport)]) -> std::io::Result<()> {
    writeln!(out, "eval_set,spell_gram,emoji,slang,profanity")?;
    for (name, r) in rows {
        writeln!(
            out,
            "{},{:.3},{:.3},{:.3},{:.3}",
            name,
            r.freq(NoiseCategory::SpellGram),
            r.freq(NoiseCategory::Emoji),
            r.freq(NoiseCategory::Slang),
            r.freq(NoiseCategory::Profanity)
        )?;
    }
    Ok(())
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn res() -> NoiseResources {
        let en = LangCode::en();
        NoiseResources::new()
            .with_lexicon(NoiseLexicon::new(LexiconKind::Slang, en.clone(), ["tbh"]).unwrap())
            .with_lexicon(NoiseLexicon::new(LexiconKind::Profanity, en.clone(), ["darn"]).unwrap())
            .with_dictionary(SpellDictionary::new(en, ["ok", "tbh", "darn"]).unwrap())
    }

    proptest! {
        #[test]
        fn merge_matches_concatenation(
            texts in prop::collection::vec(prop::sample::select(vec!["ok tbh", "darn 😂", "okk", "🔥 ok ok", ""]), 0..20),
            cut in 0usize..20,
        ) {
            let cut = cut.min(texts.len());
            let en = LangCode::en();
            let r = res();
            let whole = noise_report(&texts, &en, &r).unwrap();
            let parts = noise_report(&texts[..cut], &en, &r).unwrap().merge(&noise_report(&texts[cut..], &en, &r).unwrap());
            prop_assert_eq!(whole, parts);
        }
    }
}
