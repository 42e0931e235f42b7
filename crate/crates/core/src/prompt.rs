//! Few-shot prompt packs for the three LLM cleaning methods.
//!
//! A pack lives at `<root>/<method>/<src>-<tgt>/` and holds `task.txt`,
//! `request.txt` and `examples.jsonl`. The default packs are compiled in.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{LangCode, ParallelSample};

pub const EXAMPLES_PER_PACK: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: unknown placeholder {{{name}}}")]
    UnknownPlaceholder { file: String, name: String },
    #[error("{file}: placeholder {{{name}}} is not valid for the {method} method")]
    Arity {
        file: String,
        name: String,
        method: CleaningMethod,
    },
    #[error("request template is missing {{{name}}}")]
    MissingPlaceholder { name: String },
    #[error("examples: expected {expected}, found {found}")]
    ExampleCount { expected: usize, found: usize },
    #[error("examples line {line}: expected {expected} input(s), found {found}")]
    ExampleInputs { line: usize, expected: usize, found: usize },
    #[error("examples line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("sample {sample_id} is {found}, pack expects {expected}")]
    LangMismatch {
        sample_id: u64,
        expected: String,
        found: String,
    },
    #[error("retry notice is empty")]
    EmptyNotice,
    #[error("no built-in {method} pack for {direction}")]
    NoBuiltin { method: CleaningMethod, direction: String },
    #[error("judge template is missing slot {{{0}}}")]
    JudgeSlot(usize),
    #[error("unknown cleaning method {0:?}")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CleaningMethod {
    Bilingual,
    Monolingual,
    Translation,
}

impl CleaningMethod {
    pub const ALL: [CleaningMethod; 3] = [
        CleaningMethod::Bilingual,
        CleaningMethod::Monolingual,
        CleaningMethod::Translation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CleaningMethod::Bilingual => "bilingual",
            CleaningMethod::Monolingual => "monolingual",
            CleaningMethod::Translation => "translation",
        }
    }

    /// Number of sentences each example and request carries.
    pub fn input_arity(self) -> usize {
        match self {
            CleaningMethod::Bilingual => 2,
            _ => 1,
        }
    }

    fn allows(self, slot: Slot) -> bool {
        match slot {
            Slot::Src | Slot::Tgt => true,
            Slot::InputSent => self != CleaningMethod::Bilingual,
            Slot::SrcSent | Slot::TgtSent => self == CleaningMethod::Bilingual,
        }
    }

    fn required(self) -> &'static [Slot] {
        match self {
            CleaningMethod::Bilingual => &[Slot::SrcSent, Slot::TgtSent],
            _ => &[Slot::InputSent],
        }
    }
}

impl fmt::Display for CleaningMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CleaningMethod {
    type Err = PromptError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bilingual" => Ok(CleaningMethod::Bilingual),
            "monolingual" => Ok(CleaningMethod::Monolingual),
            "translation" => Ok(CleaningMethod::Translation),
            _ => Err(PromptError::UnknownMethod(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Src,
    Tgt,
    InputSent,
    SrcSent,
    TgtSent,
}

impl Slot {
    fn parse(name: &str) -> Option<Slot> {
        Some(match name {
            "src" => Slot::Src,
            "tgt" => Slot::Tgt,
            "input_sent" => Slot::InputSent,
            "src_sent" => Slot::SrcSent,
            "tgt_sent" => Slot::TgtSent,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Slot::Src => "src",
            Slot::Tgt => "tgt",
            Slot::InputSent => "input_sent",
            Slot::SrcSent => "src_sent",
            Slot::TgtSent => "tgt_sent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Lit(String),
    Slot(Slot),
}

/// A template string split into literal text and `{name}` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    raw: String,
    pieces: Vec<Piece>,
}

impl Template {
    fn parse(raw: &str, file: &str) -> Result<Self, PromptError> {
        let raw = raw.trim_end().to_string();
        let mut pieces = Vec::new();
        let mut lit = String::new();
        let mut rest = raw.as_str();
        while let Some(open) = rest.find('{') {
            lit.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let ident_len = after
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .unwrap_or(after.len());
            if ident_len > 0 && after[ident_len..].starts_with('}') {
                let name = &after[..ident_len];
                let slot = Slot::parse(name).ok_or_else(|| PromptError::UnknownPlaceholder {
                    file: file.to_string(),
                    name: name.to_string(),
                })?;
                if !lit.is_empty() {
                    pieces.push(Piece::Lit(std::mem::take(&mut lit)));
                }
                pieces.push(Piece::Slot(slot));
                rest = &after[ident_len + 1..];
            } else {
                lit.push('{');
                rest = after;
            }
        }
        lit.push_str(rest);
        if !lit.is_empty() {
            pieces.push(Piece::Lit(lit));
        }
        Ok(Template { raw, pieces })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Slot(s) => Some(*s),
            Piece::Lit(_) => None,
        })
    }

    fn render(&self, fill: impl Fn(Slot) -> String) -> String {
        let mut out = String::with_capacity(self.raw.len());
        for p in &self.pieces {
            match p {
                Piece::Lit(s) => out.push_str(s),
                Piece::Slot(s) => out.push_str(&fill(*s)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub inputs: Vec<String>,
    pub reasoning: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptPack {
    pub method: CleaningMethod,
    pub src_lang: LangCode,
    pub tgt_lang: LangCode,
    pub task: Template,
    pub request: Template,
    pub examples: Vec<FewShotExample>,
}

fn quoted(s: &str) -> String {
    format!("\"{s}\"")
}

impl PromptPack {
    /// Builds and validates a pack from the contents of its three files.
    pub fn from_parts(
        method: CleaningMethod,
        src_lang: LangCode,
        tgt_lang: LangCode,
        task: &str,
        request: &str,
        examples: &str,
    ) -> Result<Self, PromptError> {
        let task = Template::parse(task, "task.txt")?;
        let request = Template::parse(request, "request.txt")?;
        for (file, t) in [("task.txt", &task), ("request.txt", &request)] {
            if let Some(bad) = t.slots().find(|s| !method.allows(*s)) {
                return Err(PromptError::Arity {
                    file: file.to_string(),
                    name: bad.name().to_string(),
                    method,
                });
            }
        }
        for need in method.required() {
            if !request.slots().any(|s| s == *need) {
                return Err(PromptError::MissingPlaceholder {
                    name: need.name().to_string(),
                });
            }
        }
        let examples = parse_examples(examples, method)?;
        Ok(PromptPack {
            method,
            src_lang,
            tgt_lang,
            task,
            request,
            examples,
        })
    }

    /// One of the compiled-in packs.
    pub fn builtin(method: CleaningMethod, src: &LangCode, tgt: &LangCode) -> Result<Self, PromptError> {
        let direction = format!("{src}-{tgt}");
        let files = builtin_files(method, &direction).ok_or_else(|| PromptError::NoBuiltin {
            method,
            direction: direction.clone(),
        })?;
        PromptPack::from_parts(method, src.clone(), tgt.clone(), files.0, files.1, files.2)
    }

    pub fn direction(&self) -> String {
        format!("{}-{}", self.src_lang, self.tgt_lang)
    }

    fn lang_slot(&self, slot: Slot) -> Option<String> {
        match slot {
            Slot::Src => Some(self.src_lang.display_name().to_string()),
            Slot::Tgt => Some(self.tgt_lang.display_name().to_string()),
            _ => None,
        }
    }

    fn render_request(&self, sample: &ParallelSample) -> String {
        self.request.render(|slot| {
            self.lang_slot(slot).unwrap_or_else(|| match slot {
                Slot::SrcSent => quoted(&sample.src_text),
                Slot::TgtSent => quoted(&sample.tgt_text),
                _ => match self.method {
                    CleaningMethod::Translation => quoted(&sample.src_text),
                    _ => quoted(&sample.tgt_text),
                },
            })
        })
    }

    /// Renders the base prompt: task section, the examples, then the request.
    pub fn render(&self, sample: &ParallelSample) -> Result<RenderedPrompt, PromptError> {
        if sample.src_lang != self.src_lang || sample.tgt_lang != self.tgt_lang {
            return Err(PromptError::LangMismatch {
                sample_id: sample.id,
                expected: self.direction(),
                found: format!("{}-{}", sample.src_lang, sample.tgt_lang),
            });
        }
        let mut text = self.task.render(|slot| self.lang_slot(slot).unwrap_or_default());
        text.push_str("\n\n");
        for (i, ex) in self.examples.iter().enumerate() {
            let inputs: Vec<String> = ex.inputs.iter().map(|s| quoted(s)).collect();
            text.push_str(&format!(
                "Example {}:\nInput: {}\nReasoning: {}\nDesired output: {}\n\n",
                i + 1,
                inputs.join(", "),
                ex.reasoning,
                quoted(&ex.output)
            ));
        }
        let request_start = text.len();
        text.push_str(&self.render_request(sample));
        Ok(RenderedPrompt {
            text,
            method: self.method,
            sample_id: sample.id,
            request_start,
        })
    }
}

/// Shorthand for [`PromptPack::render`].
pub fn render_prompt(pack: &PromptPack, sample: &ParallelSample) -> Result<RenderedPrompt, PromptError> {
    pack.render(sample)
}

fn parse_examples(text: &str, method: CleaningMethod) -> Result<Vec<FewShotExample>, PromptError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: FewShotExample = serde_json::from_str(line).map_err(|e| PromptError::Json {
            line: i + 1,
            message: e.to_string(),
        })?;
        if ex.inputs.len() != method.input_arity() {
            return Err(PromptError::ExampleInputs {
                line: i + 1,
                expected: method.input_arity(),
                found: ex.inputs.len(),
            });
        }
        out.push(ex);
    }
    if out.len() != EXAMPLES_PER_PACK {
        return Err(PromptError::ExampleCount {
            expected: EXAMPLES_PER_PACK,
            found: out.len(),
        });
    }
    Ok(out)
}

fn read(path: PathBuf) -> Result<String, PromptError> {
    std::fs::read_to_string(&path).map_err(|source| PromptError::Io { path, source })
}

/// Loads `<root>/<method>/<src>-<tgt>/`.
pub fn load_prompt_pack(
    root: &Path,
    method: CleaningMethod,
    src: &LangCode,
    tgt: &LangCode,
) -> Result<PromptPack, PromptError> {
    let dir = root.join(method.as_str()).join(format!("{src}-{tgt}"));
    let task = read(dir.join("task.txt"))?;
    let request = read(dir.join("request.txt"))?;
    let examples = read(dir.join("examples.jsonl"))?;
    PromptPack::from_parts(method, src.clone(), tgt.clone(), &task, &request, &examples)
}

/// Loads from `root` when given, else falls back to the built-in packs.
pub fn resolve_pack(
    root: Option<&Path>,
    method: CleaningMethod,
    src: &LangCode,
    tgt: &LangCode,
) -> Result<PromptPack, PromptError> {
    match root {
        Some(r) => load_prompt_pack(r, method, src, tgt),
        None => PromptPack::builtin(method, src, tgt),
    }
}

macro_rules! pack_files {
    ($m:literal, $d:literal) => {
        (
            include_str!(concat!("../data/packs/", $m, "/", $d, "/task.txt")),
            include_str!(concat!("../data/packs/", $m, "/", $d, "/request.txt")),
            include_str!(concat!("../data/packs/", $m, "/", $d, "/examples.jsonl")),
        )
    };
}

type PackFiles = (&'static str, &'static str, &'static str);

fn builtin_files(method: CleaningMethod, direction: &str) -> Option<PackFiles> {
    use CleaningMethod::*;
    Some(match (method, direction) {
        (Bilingual, "fr-en") => pack_files!("bilingual", "fr-en"),
        (Bilingual, "en-fr") => pack_files!("bilingual", "en-fr"),
        (Bilingual, "en-ja") => pack_files!("bilingual", "en-ja"),
        (Monolingual, "fr-en") => pack_files!("monolingual", "fr-en"),
        (Monolingual, "en-fr") => pack_files!("monolingual", "en-fr"),
        (Monolingual, "en-ja") => pack_files!("monolingual", "en-ja"),
        (Translation, "fr-en") => pack_files!("translation", "fr-en"),
        (Translation, "en-fr") => pack_files!("translation", "en-fr"),
        (Translation, "en-ja") => pack_files!("translation", "en-ja"),
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedPrompt {
    pub text: String,
    pub method: CleaningMethod,
    pub sample_id: u64,
    request_start: usize,
}

impl RenderedPrompt {
    /// The request section, including any appended notice.
    pub fn request(&self) -> &str {
        &self.text[self.request_start..]
    }

    /// Hex SHA-256 of the prompt text.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }

    /// Returns a copy with `notice` appended to the request section.
    pub fn with_notice(&self, notice: &str) -> Result<RenderedPrompt, PromptError> {
        let notice = notice.trim();
        if notice.is_empty() {
            return Err(PromptError::EmptyNotice);
        }
        let mut out = self.clone();
        out.text.push(' ');
        out.text.push_str(notice);
        Ok(out)
    }
}

/// Shorthand for [`RenderedPrompt::with_notice`].
pub fn render_retry(prompt: &RenderedPrompt, notice: &str) -> Result<RenderedPrompt, PromptError> {
    prompt.with_notice(notice)
}

const QUOTES: [(char, char); 5] = [('"', '"'), ('\'', '\''), ('“', '”'), ('«', '»'), ('「', '」')];

/// Pulls the cleaned sentence out of a raw completion.
///
/// Takes the text after the last `Desired output:` label when one is present,
/// then strips one pair of surrounding quotes.
pub fn parse_completion(raw: &str) -> String {
    let mut s = raw.trim();
    let lower = s.to_ascii_lowercase();
    if let Some(pos) = lower.rfind("desired output") {
        let tail = s[pos + "desired output".len()..].trim_start_matches(|c: char| c == ':' || c.is_whitespace());
        s = tail.lines().next().unwrap_or("").trim();
    }
    for (open, close) in QUOTES {
        if s.chars().count() >= 2 && s.starts_with(open) && s.ends_with(close) {
            let inner = &s[open.len_utf8()..s.len() - close.len_utf8()];
            return inner.trim().to_string();
        }
    }
    s.to_string()
}

/// Pairwise judging prompt with positional slots `{0}`..`{3}`:
/// noisy source, noisy target, first candidate, second candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgeTemplate {
    raw: String,
}

impl JudgeTemplate {
    pub fn new(raw: impl Into<String>) -> Result<Self, PromptError> {
        let raw = raw.into().trim_end().to_string();
        for i in 0..4 {
            if !raw.contains(&format!("{{{i}}}")) {
                return Err(PromptError::JudgeSlot(i));
            }
        }
        Ok(JudgeTemplate { raw })
    }

    pub fn builtin() -> Self {
        JudgeTemplate::new(include_str!("../data/judge.txt")).expect("built-in judge template")
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        JudgeTemplate::new(read(path.to_path_buf())?)
    }

    pub fn render(&self, src: &str, noisy_tgt: &str, first: &str, second: &str) -> String {
        // Single pass so slot-like text inside the sentences is left alone.
        let args = [src, noisy_tgt, first, second];
        let mut out = String::with_capacity(self.raw.len() + 256);
        let mut rest = self.raw.as_str();
        while let Some(pos) = rest.find('{') {
            out.push_str(&rest[..pos]);
            let b = rest.as_bytes();
            if b.len() > pos + 2 && (b'0'..=b'3').contains(&b[pos + 1]) && b[pos + 2] == b'}' {
                out.push_str(args[(b[pos + 1] - b'0') as usize]);
                rest = &rest[pos + 3..];
            } else {
                out.push('{');
                rest = &rest[pos + 1..];
            }
        }
        out.push_str(rest);
        out
    }
}
