#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Mutex;

use noiseforge::clean::{clean_corpus, CleanConfig};
use noiseforge::corpus::{read_jsonl, Corpus};
use noiseforge::embed::HashEmbedder;
use noiseforge::llm::{cassette_key, CassetteEntry, FnCompleter, LlmError, LlmParams};
use noiseforge::prompt::{CleaningMethod, PromptPack};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn corpus20() -> Corpus {
    read_jsonl(&fixture("fr_en_20.jsonl")).unwrap()
}

const FIXES: [(&str, &str); 16] = [
    ("sooo", "so"),
    ("teh", "the"),
    ("didnt", "didn't"),
    ("doesnt", "doesn't"),
    ("recieve", "receive"),
    ("u", "you"),
    ("ur", "your"),
    ("gotta", "have to"),
    ("pls", "please"),
    ("shit", "shoot"),
    ("crap", "bad"),
    ("lol", ""),
    ("lmao", ""),
    ("omg", ""),
    ("tbh", ""),
    ("imo", ""),
];

/// What the stand-in model returns for a noisy target: slang and typos
/// fixed, emojis dropped.
pub fn tidy(noisy: &str) -> String {
    let words: Vec<String> = noisy
        .split_whitespace()
        .filter(|w| !w.chars().any(|c| c as u32 >= 0x2600))
        .map(|w| {
            let core = w.trim_end_matches(|c: char| c.is_ascii_punctuation());
            let tail = &w[core.len()..];
            match FIXES.iter().find(|(k, _)| core.eq_ignore_ascii_case(k)) {
                Some((_, v)) if v.is_empty() => tail.to_string(),
                Some((_, v)) => format!("{v}{tail}"),
                None => w.to_string(),
            }
        })
        .filter(|w| !w.is_empty())
        .collect();
    let mut out = words.join(" ");
    if let Some(first) = out.chars().next() {
        out = first.to_uppercase().collect::<String>() + &out[first.len_utf8()..];
    }
    out
}

/// Stand-in completion model over `corpus`. Every third sample first drifts
/// off-meaning, so the gate has something to reject.
pub fn fake_model(corpus: &Corpus) -> impl Fn(&str, &LlmParams, u32) -> Result<String, LlmError> + Send + Sync + '_ {
    move |prompt, _params, attempt| {
        let request = prompt.rsplit("\n\n").next().unwrap_or(prompt);
        let sample = corpus
            .samples
            .iter()
            .find(|s| request.contains(&format!("\"{}\"", s.tgt_text)) || request.contains(&format!("\"{}\"", s.src_text)))
            .ok_or_else(|| LlmError::Malformed {
                endpoint: "fixture".into(),
                message: format!("unknown request: {request}"),
            })?;
        if sample.id % 3 == 0 && attempt == 1 {
            return Ok("Reasoning: none.\nDesired output: \"Penguins enjoy cold weather near the ocean.\"".into());
        }
        Ok(format!("Reasoning: fixed spelling and slang.\nDesired output: \"{}\"", tidy(&sample.tgt_text)))
    }
}

/// Every exchange the three LLM methods make on `corpus`, sorted by key.
pub fn build_cassette(corpus: &Corpus) -> Vec<CassetteEntry> {
    let seen = Mutex::new(Vec::new());
    let model = fake_model(corpus);
    let llm = FnCompleter::new(|prompt: &str, params: &LlmParams, attempt: u32| {
        let response = model(prompt, params, attempt)?;
        seen.lock().unwrap().push(CassetteEntry {
            key: cassette_key(prompt, params, attempt),
            prompt: prompt.to_string(),
            response: response.clone(),
        });
        Ok(response)
    });
    let (src, tgt) = corpus.direction().unwrap();
    let cfg = CleanConfig {
        parallelism: 1,
        ..CleanConfig::default()
    };
    for m in CleaningMethod::ALL {
        let pack = PromptPack::builtin(m, src, tgt).unwrap();
        clean_corpus(corpus, &pack, &cfg, &llm, &HashEmbedder::default()).unwrap();
    }
    let mut entries = seen.into_inner().unwrap();
    entries.sort_by(|a, b| a.key.cmp(&b.key));
    entries.dedup_by(|a, b| a.key == b.key);
    entries
}
