//! Word segmentation used for every per-token statistic.
//!
//! English and French text is split on UAX #29 word boundaries with
//! whitespace dropped. Japanese falls back to one token per Han/Kana
//! character unless an external tokenizer is configured. Masked words such as
//! `f*ck` stay a single token so lexicon matching can see them whole.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::corpus::{normalize, LangCode};
use crate::http::{HttpClient, HttpError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenList {
    pub tokens: Vec<String>,
    pub lang: LangCode,
}

impl TokenList {
    pub fn new(tokens: Vec<String>, lang: LangCode) -> Self {
        TokenList { tokens, lang }
    }

    /// Splits `text` on ASCII spaces; handy for already-tokenized fixtures.
    pub fn from_whitespace(text: &str, lang: LangCode) -> Self {
        TokenList {
            tokens: text.split_whitespace().map(str::to_string).collect(),
            lang,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Space-joined form of the tokens.
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Tokenizes `text` after NFC normalization. Total and deterministic.
pub fn tokenize(text: &str, lang: &LangCode) -> TokenList {
    let text = normalize(text);
    let tokens = segment(&text, lang)
        .into_iter()
        .map(|r| text[r].to_string())
        .collect();
    TokenList::new(tokens, lang.clone())
}

/// Byte spans of the tokens of `text`, which should already be NFC.
pub fn segment(text: &str, lang: &LangCode) -> Vec<Range<usize>> {
    let pieces: Vec<Range<usize>> = text
        .split_word_bound_indices()
        .filter(|(_, s)| !s.chars().all(char::is_whitespace))
        .map(|(i, s)| i..i + s.len())
        .collect();
    let merged = merge_masks(text, pieces);
    if lang.as_str() == "ja" {
        merged
            .into_iter()
            .flat_map(|r| split_cjk(text, r))
            .collect()
    } else {
        merged
    }
}

fn is_mask(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c == '*')
}

fn is_wordish(s: &str) -> bool {
    s.chars().any(char::is_alphanumeric)
}

/// Joins runs of touching word and `*` pieces that contain at least one of each.
fn merge_masks(text: &str, pieces: Vec<Range<usize>>) -> Vec<Range<usize>> {
    let mut out = Vec::with_capacity(pieces.len());
    let mut i = 0;
    while i < pieces.len() {
        let piece = &text[pieces[i].clone()];
        if !(is_wordish(piece) || is_mask(piece)) {
            out.push(pieces[i].clone());
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < pieces.len()
            && pieces[j].start == pieces[j - 1].end
            && {
                let p = &text[pieces[j].clone()];
                is_wordish(p) || is_mask(p)
            }
        {
            j += 1;
        }
        let run = &pieces[i..j];
        let has_mask = run.iter().any(|r| is_mask(&text[r.clone()]));
        let has_word = run.iter().any(|r| is_wordish(&text[r.clone()]));
        if has_mask && has_word {
            out.push(run[0].start..run[run.len() - 1].end);
        } else {
            out.extend(run.iter().cloned());
        }
        i = j;
    }
    out
}

pub(crate) fn is_han_or_kana(c: char) -> bool {
    matches!(c as u32,
        0x3005 | 0x3007
        | 0x3040..=0x309F
        | 0x30A0..=0x30FF
        | 0x31F0..=0x31FF
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0xFF66..=0xFF9D
        | 0x20000..=0x2A6DF)
}

fn split_cjk(text: &str, span: Range<usize>) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    for (off, c) in text[span.clone()].char_indices() {
        let at = span.start + off;
        if is_han_or_kana(c) {
            if let Some(s) = run_start.take() {
                out.push(s..at);
            }
            out.push(at..at + c.len_utf8());
        } else if run_start.is_none() {
            run_start = Some(at);
        }
    }
    if let Some(s) = run_start {
        out.push(s..span.end);
    }
    out
}

/// Tokenizer used by reports: native segmentation, or an HTTP service.
///
/// The service contract is `POST <endpoint>` with `{"text", "lang"}` answering
/// `{"tokens": [...]}`. It is consulted only for the languages it was
/// configured for; everything else is segmented natively.
#[derive(Debug, Clone, Default)]
pub enum Tokenizer {
    #[default]
    Native,
    External {
        client: HttpClient,
        langs: Vec<LangCode>,
    },
}

#[derive(Serialize)]
struct TokenizeRequest<'a> {
    text: &'a str,
    lang: &'a str,
}

#[derive(Deserialize)]
struct TokenizeResponse {
    tokens: Vec<String>,
}

impl Tokenizer {
    pub fn tokenize(&self, text: &str, lang: &LangCode) -> Result<TokenList, HttpError> {
        match self {
            Tokenizer::External { client, langs } if langs.contains(lang) => {
                let text = normalize(text);
                let resp: TokenizeResponse = client.post_json(
                    "",
                    &TokenizeRequest {
                        text: &text,
                        lang: lang.as_str(),
                    },
                )?;
                let tokens = resp.tokens.into_iter().filter(|t| !t.trim().is_empty()).collect();
                Ok(TokenList::new(tokens, lang.clone()))
            }
            _ => Ok(tokenize(text, lang)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(text: &str, lang: LangCode) -> Vec<String> {
        tokenize(text, &lang).tokens
    }

    #[test]
    fn contraction_and_punctuation() {
        assert_eq!(toks("I'm so happy!", LangCode::en()), ["I'm", "so", "happy", "!"]);
    }

    #[test]
    fn empty_and_whitespace_runs() {
        assert!(toks("", LangCode::en()).is_empty());
        assert_eq!(toks("a  b", LangCode::en()), ["a", "b"]);
        assert_eq!(toks(" \t\n", LangCode::en()), Vec::<String>::new());
    }

    #[test]
    fn masked_words_stay_whole() {
        assert_eq!(toks("what the f*ck man", LangCode::en()), ["what", "the", "f*ck", "man"]);
        assert_eq!(toks("sh* happens", LangCode::en()), ["sh*", "happens"]);
        assert_eq!(toks("a * b", LangCode::en()), ["a", "*", "b"]);
    }

    #[test]
    fn emoji_is_a_token() {
        assert_eq!(toks("so happy 😊", LangCode::en()), ["so", "happy", "😊"]);
        assert_eq!(toks("🔥🔥", LangCode::en()), ["🔥", "🔥"]);
    }

    #[test]
    fn japanese_character_fallback() {
        assert_eq!(
            toks("すごく嬉しい！", LangCode::ja()),
            ["す", "ご", "く", "嬉", "し", "い", "！"]
        );
        assert_eq!(toks("LOL 笑", LangCode::ja()), ["LOL", "笑"]);
    }

    #[test]
    fn french_elision() {
        assert_eq!(toks("J'ai hâte !", LangCode::fr()), ["J'ai", "hâte", "!"]);
    }

    proptest! {
        #[test]
        fn deterministic_and_without_blank_tokens(s in "\\PC{0,40}") {
            let a = toks(&s, LangCode::en());
            let b = toks(&s, LangCode::en());
            prop_assert_eq!(&a, &b);
            prop_assert!(a.iter().all(|t| !t.is_empty() && !t.chars().all(char::is_whitespace)));
        }

        #[test]
        fn counts_add_over_concatenation(
            a in "[a-zA-Z0-9 ,.!?'*]{0,30}",
            b in "[a-zA-Z0-9 ,.!?'*]{0,30}",
        ) {
            let joined = format!("{a} {b}");
            for lang in [LangCode::en(), LangCode::ja()] {
                prop_assert_eq!(
                    toks(&joined, lang.clone()).len(),
                    toks(&a, lang.clone()).len() + toks(&b, lang.clone()).len()
                );
            }
        }

        #[test]
        fn tokens_reassemble_text(s in "[a-zA-Zéà ,.!?']{0,40}") {
            let spans = segment(&s, &LangCode::fr());
            let stripped: String = s.chars().filter(|c| !c.is_whitespace()).collect();
            let rebuilt: String = spans.iter().map(|r| &s[r.clone()]).collect();
            prop_assert_eq!(rebuilt, stripped);
        }
    }
}
