//! Parallel corpora: language codes, aligned sentence pairs, and their
//! on-disk forms (two aligned plain-text files, or one JSONL file).

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Languages accepted when no extra codes are configured.
pub const DEFAULT_LANGS: [&str; 3] = ["en", "fr", "ja"];

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not valid UTF-8 (byte offset {offset})")]
    Encoding { path: PathBuf, offset: usize },
    #[error("{path} is empty")]
    EmptyFile { path: PathBuf },
    #[error("line-count mismatch: {src_path} has {src_lines} lines, {tgt_path} has {tgt_lines}")]
    LineCountMismatch {
        src_path: PathBuf,
        src_lines: usize,
        tgt_path: PathBuf,
        tgt_lines: usize,
    },
    #[error("unknown language code {0:?}")]
    UnknownLang(String),
    #[error("source and target language are both {0}")]
    SameLang(LangCode),
    #[error("line {line}: malformed JSON: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: missing field {field:?}")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
}

/// A lowercase two-letter language code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LangCode(String);

impl LangCode {
    /// Parses a code against the default language set (`en`, `fr`, `ja`).
    pub fn parse(code: &str) -> Result<Self, CorpusError> {
        Self::parse_with(code, &[])
    }

    /// Parses a code, additionally accepting the configured `extra` codes.
    pub fn parse_with(code: &str, extra: &[String]) -> Result<Self, CorpusError> {
        let well_formed = code.len() == 2 && code.bytes().all(|b| b.is_ascii_lowercase());
        let known = DEFAULT_LANGS.contains(&code) || extra.iter().any(|e| e == code);
        if well_formed && known {
            Ok(LangCode(code.to_string()))
        } else {
            Err(CorpusError::UnknownLang(code.to_string()))
        }
    }

    pub fn en() -> Self {
        LangCode("en".into())
    }
    pub fn fr() -> Self {
        LangCode("fr".into())
    }
    pub fn ja() -> Self {
        LangCode("ja".into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// English display name, used when filling prompt templates.
    pub fn display_name(&self) -> &str {
        match self.0.as_str() {
            "en" => "English",
            "fr" => "French",
            "ja" => "Japanese",
            other => other,
        }
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for LangCode {
    type Err = CorpusError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LangCode::parse(s)
    }
}

impl TryFrom<String> for LangCode {
    type Error = CorpusError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        LangCode::parse(&s)
    }
}

impl From<LangCode> for String {
    fn from(l: LangCode) -> String {
        l.0
    }
}

/// One aligned sentence pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelSample {
    pub id: u64,
    pub src_lang: LangCode,
    pub tgt_lang: LangCode,
    #[serde(rename = "src")]
    pub src_text: String,
    #[serde(rename = "tgt")]
    pub tgt_text: String,
}

impl ParallelSample {
    /// Builds a sample, NFC-normalizing both sides and checking invariants.
    pub fn new(
        id: u64,
        src_lang: LangCode,
        tgt_lang: LangCode,
        src_text: &str,
        tgt_text: &str,
    ) -> Result<Self, String> {
        if src_lang == tgt_lang {
            return Err(format!("source and target language are both {src_lang}"));
        }
        let src_text = normalize(src_text);
        let tgt_text = normalize(tgt_text);
        if src_text.trim().is_empty() {
            return Err("empty source text".into());
        }
        if tgt_text.trim().is_empty() {
            return Err("empty target text".into());
        }
        Ok(ParallelSample {
            id,
            src_lang,
            tgt_lang,
            src_text,
            tgt_text,
        })
    }

    pub fn text(&self, side: Side) -> &str {
        match side {
            Side::Src => &self.src_text,
            Side::Tgt => &self.tgt_text,
        }
    }

    pub fn lang(&self, side: Side) -> &LangCode {
        match side {
            Side::Src => &self.src_lang,
            Side::Tgt => &self.tgt_lang,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Src,
    Tgt,
}

impl FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "src" => Ok(Side::Src),
            "tgt" => Ok(Side::Tgt),
            other => Err(format!("unknown side {other:?} (expected src or tgt)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusMeta {
    pub name: String,
    pub sources: Vec<PathBuf>,
    pub created: SystemTime,
}

impl CorpusMeta {
    pub fn named(name: impl Into<String>) -> Self {
        CorpusMeta {
            name: name.into(),
            sources: Vec::new(),
            created: SystemTime::now(),
        }
    }
}

/// An ordered collection of samples sharing one language direction.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub samples: Vec<ParallelSample>,
    pub meta: CorpusMeta,
}

impl PartialEq for Corpus {
    /// Content equality; metadata is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples
    }
}

impl Corpus {
    pub fn new(name: impl Into<String>, samples: Vec<ParallelSample>) -> Result<Self, CorpusError> {
        let corpus = Corpus {
            samples,
            meta: CorpusMeta::named(name),
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The shared `(src, tgt)` direction, or `None` for an empty corpus.
    pub fn direction(&self) -> Option<(&LangCode, &LangCode)> {
        self.samples.first().map(|s| (&s.src_lang, &s.tgt_lang))
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let Some(first) = self.samples.first() else {
            return Ok(());
        };
        let mut prev: Option<u64> = None;
        for (i, s) in self.samples.iter().enumerate() {
            let line = i + 1;
            if s.src_lang != first.src_lang || s.tgt_lang != first.tgt_lang {
                return Err(CorpusError::Schema {
                    line,
                    message: format!(
                        "direction {}-{} differs from corpus direction {}-{}",
                        s.src_lang, s.tgt_lang, first.src_lang, first.tgt_lang
                    ),
                });
            }
            if s.src_lang == s.tgt_lang {
                return Err(CorpusError::SameLang(s.src_lang.clone()));
            }
            if let Some(p) = prev {
                if s.id <= p {
                    return Err(CorpusError::Schema {
                        line,
                        message: format!("id {} is not greater than previous id {p}", s.id),
                    });
                }
            }
            prev = Some(s.id);
        }
        Ok(())
    }
}

/// NFC normalization applied to every text on ingestion. Case is preserved.
pub fn normalize(text: &str) -> String {
    text.nfc().collect()
}

fn read_utf8(path: &Path) -> Result<String, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|e| CorpusError::Encoding {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })
}

fn split_lines(text: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    if text.ends_with('\n') {
        lines.pop();
    }
    lines
}

/// Pairs line `i` of `src_path` with line `i` of `tgt_path`; ids are `0..n`.
pub fn load_parallel(
    src_path: &Path,
    tgt_path: &Path,
    src_lang: LangCode,
    tgt_lang: LangCode,
) -> Result<Corpus, CorpusError> {
    if src_lang == tgt_lang {
        return Err(CorpusError::SameLang(src_lang));
    }
    let src = read_utf8(src_path)?;
    let tgt = read_utf8(tgt_path)?;
    if src.is_empty() {
        return Err(CorpusError::EmptyFile {
            path: src_path.to_path_buf(),
        });
    }
    if tgt.is_empty() {
        return Err(CorpusError::EmptyFile {
            path: tgt_path.to_path_buf(),
        });
    }
    let src_lines = split_lines(&src);
    let tgt_lines = split_lines(&tgt);
    if src_lines.len() != tgt_lines.len() {
        return Err(CorpusError::LineCountMismatch {
            src_path: src_path.to_path_buf(),
            src_lines: src_lines.len(),
            tgt_path: tgt_path.to_path_buf(),
            tgt_lines: tgt_lines.len(),
        });
    }
    let samples = src_lines
        .iter()
        .zip(&tgt_lines)
        .enumerate()
        .map(|(i, (s, t))| {
            ParallelSample::new(i as u64, src_lang.clone(), tgt_lang.clone(), s, t)
                .map_err(|message| CorpusError::Schema { line: i + 1, message })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let name = src_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Corpus {
        samples,
        meta: CorpusMeta {
            name,
            sources: vec![src_path.to_path_buf(), tgt_path.to_path_buf()],
            created: SystemTime::now(),
        },
    })
}

const REQUIRED_FIELDS: [&str; 5] = ["id", "src_lang", "tgt_lang", "src", "tgt"];

/// Parses one JSONL corpus record, reporting schema problems against `line`.
pub(crate) fn parse_record(raw: &str, line: usize) -> Result<ParallelSample, CorpusError> {
    let value: serde_json::Value = serde_json::from_str(raw).map_err(|e| CorpusError::Json {
        line,
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or(CorpusError::Schema {
        line,
        message: "record is not a JSON object".into(),
    })?;
    for field in REQUIRED_FIELDS {
        if !obj.contains_key(field) {
            return Err(CorpusError::MissingField { line, field });
        }
    }
    let id = obj["id"].as_u64().ok_or(CorpusError::Schema {
        line,
        message: "field \"id\" must be a non-negative integer".into(),
    })?;
    let get_str = |field: &'static str| {
        obj[field].as_str().ok_or(CorpusError::Schema {
            line,
            message: format!("field {field:?} must be a string"),
        })
    };
    let src_lang = LangCode::parse(get_str("src_lang")?).map_err(|e| CorpusError::Schema {
        line,
        message: e.to_string(),
    })?;
    let tgt_lang = LangCode::parse(get_str("tgt_lang")?).map_err(|e| CorpusError::Schema {
        line,
        message: e.to_string(),
    })?;
    ParallelSample::new(id, src_lang, tgt_lang, get_str("src")?, get_str("tgt")?)
        .map_err(|message| CorpusError::Schema { line, message })
}

/// Reads a JSONL corpus. An empty file yields an empty corpus and a warning.
pub fn read_jsonl(path: &Path) -> Result<Corpus, CorpusError> {
    let text = read_utf8(path)?;
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        samples.push(parse_record(raw, i + 1)?);
    }
    if samples.is_empty() {
        log::warn!("{} contains no records", path.display());
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut corpus = Corpus::new(name, samples)?;
    corpus.meta.sources = vec![path.to_path_buf()];
    Ok(corpus)
}

/// Writes one JSON object per sample, LF-terminated.
pub fn write_jsonl(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    write_records(path, corpus.samples.iter())
}

/// Serializes any records as JSONL to `path`.
pub(crate) fn write_records<T: Serialize>(
    path: &Path,
    records: impl IntoIterator<Item = T>,
) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    for rec in records {
        let line = serde_json::to_string(&rec).expect("records serialize");
        out.write_all(line.as_bytes()).map_err(io_err)?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn pairs_lines_in_order() {
        let dir = tempdir().unwrap();
        let s = write(dir.path(), "s.txt", "bonjour\nmerci\n");
        let t = write(dir.path(), "t.txt", "hello\nthanks");
        let c = load_parallel(&s, &t, LangCode::fr(), LangCode::en()).unwrap();
        let ids: Vec<u64> = c.samples.iter().map(|s| s.id).collect();
        assert_eq!(ids, vec![0, 1]);
        assert_eq!(c.samples[1].src_text, "merci");
        assert_eq!(c.samples[1].tgt_text, "thanks");
    }

    #[test]
    fn line_count_mismatch() {
        let dir = tempdir().unwrap();
        let s = write(dir.path(), "s.txt", "a\nb\nc\n");
        let t = write(dir.path(), "t.txt", "a\nb\n");
        let err = load_parallel(&s, &t, LangCode::fr(), LangCode::en()).unwrap_err();
        assert!(matches!(err, CorpusError::LineCountMismatch { src_lines: 3, tgt_lines: 2, .. }));
    }

    #[test]
    fn empty_and_invalid_files() {
        let dir = tempdir().unwrap();
        let s = write(dir.path(), "s.txt", "");
        let t = write(dir.path(), "t.txt", "x\n");
        assert!(matches!(
            load_parallel(&s, &t, LangCode::fr(), LangCode::en()),
            Err(CorpusError::EmptyFile { .. })
        ));
        let bad = dir.path().join("bad.txt");
        fs::write(&bad, b"ok\n\xff\xfe\n").unwrap();
        assert!(matches!(
            load_parallel(&bad, &t, LangCode::fr(), LangCode::en()),
            Err(CorpusError::Encoding { offset: 3, .. })
        ));
        let missing = dir.path().join("nope.txt");
        assert!(matches!(
            load_parallel(&missing, &t, LangCode::fr(), LangCode::en()),
            Err(CorpusError::Io { .. })
        ));
    }

    #[test]
    fn lang_codes() {
        assert!(LangCode::parse("de").is_err());
        assert!(LangCode::parse("EN").is_err());
        assert_eq!(LangCode::parse_with("de", &["de".into()]).unwrap().as_str(), "de");
    }

    #[test]
    fn missing_field_is_named() {
        let dir = tempdir().unwrap();
        let p = write(
            dir.path(),
            "c.jsonl",
            "{\"id\":0,\"src_lang\":\"fr\",\"tgt_lang\":\"en\",\"src\":\"a\"}\n",
        );
        let err = read_jsonl(&p).unwrap_err();
        assert!(matches!(err, CorpusError::MissingField { line: 1, field: "tgt" }));
        assert!(err.to_string().contains("\"tgt\""));
    }

    #[test]
    fn malformed_json_reports_line() {
        let dir = tempdir().unwrap();
        let p = write(
            dir.path(),
            "c.jsonl",
            "{\"id\":0,\"src_lang\":\"fr\",\"tgt_lang\":\"en\",\"src\":\"a\",\"tgt\":\"b\"}\n{oops\n",
        );
        assert!(matches!(read_jsonl(&p), Err(CorpusError::Json { line: 2, .. })));
    }

    #[test]
    fn empty_jsonl_is_empty_corpus() {
        let dir = tempdir().unwrap();
        let p = write(dir.path(), "c.jsonl", "");
        assert!(read_jsonl(&p).unwrap().is_empty());
    }

    #[test]
    fn nfc_on_ingestion_without_case_folding() {
        let s = ParallelSample::new(0, LangCode::fr(), LangCode::en(), "Cafe\u{301}", "Reddit").unwrap();
        assert_eq!(s.src_text, "Café");
        assert_eq!(s.tgt_text, "Reddit");
    }
}
