//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Tolerances are fixed here, not tuned per run.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use noiseforge::augment::{
    char_augment, contextual_augment, error_augment, make_training_sets, synonym_augment, AugmentConfig, AugmentKind,
    AugmentResources, ErrorDict, FillMask, SynonymLexicon, TrainingSet,
};
use noiseforge::clean::{clean_corpus, clean_sample, cleaned_rows, CleanConfig, CleanedRow, Method};
use noiseforge::corpus::{Corpus, LangCode, ParallelSample};
use noiseforge::embed::{cosine, EmbeddingVector, HashEmbedder, ScriptedEmbedder};
use noiseforge::eval::{combined_loss, contrastive_loss, display_1dp, relative_gain, BatchEmbeddings, ContrastiveParams};
use noiseforge::http::HttpError;
use noiseforge::llm::{Cassette, ScriptedCompleter};
use noiseforge::metrics::{bleu, jaccard, jaro_winkler, rouge1_f};
use noiseforge::noise::{
    noise_report, write_noise_csv, LexiconKind, NoiseCategory, NoiseLexicon, NoiseReport, NoiseResources,
    SpellDictionary,
};
use noiseforge::preference::{aggregate, build_comparisons, judge_all, spawn_router, AnnotationServer, VoteStore};
use noiseforge::prompt::{CleaningMethod, JudgeTemplate, PromptPack};
use noiseforge::report::{similarity_report, write_similarity_csv};
use noiseforge::tokenize::{tokenize, TokenList};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn vec_of(v: &[f64]) -> EmbeddingVector {
    EmbeddingVector::new(v.to_vec()).unwrap()
}

fn en(s: &str) -> TokenList {
    tokenize(s, &LangCode::en())
}

// ------------------------------------------------------------------ cosine ---

fn cosine_criterion() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let dim = rng.random_range(2..64);
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = rng.random_range(0.01..100.0);
        let (ea, eb) = (vec_of(&a), vec_of(&b));
        let ka = vec_of(&a.iter().map(|x| x * k).collect::<Vec<_>>());
        let self_sim = cosine(&ea, &ea).unwrap();
        let ab = cosine(&ea, &eb).unwrap();
        let ba = cosine(&eb, &ea).unwrap();
        let kab = cosine(&ka, &eb).unwrap();
        worst = worst.max((self_sim - 1.0).abs()).max((ab - ba).abs()).max((kab - ab).abs());
    }
    ensure!(worst <= 1e-9, "max deviation {worst:e} > 1e-9");
    let ex = cosine(&vec_of(&[1.0, 2.0, 3.0]), &vec_of(&[4.0, 5.0, 6.0])).unwrap();
    ensure!(close(ex, 0.9746, 1e-4), "([1,2,3],[4,5,6]) = {ex}");
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(1), "took {t:?}");
    Ok(format!("max dev {worst:.1e}, worked example {ex:.4}, {t:.2?}"))
}

// -------------------------------------------------------------------- BLEU ---

/// Textbook corpus BLEU-4, written without sharing code with the library:
/// explicit n-gram lists, clipping by linear search.
fn oracle_bleu(pairs: &[(&str, &str)]) -> f64 {
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rf) in pairs {
        let h: Vec<&str> = h.split_whitespace().collect();
        let rf: Vec<&str> = rf.split_whitespace().collect();
        c += h.len();
        r += rf.len();
        for n in 1..=4 {
            if h.len() < n {
                break;
            }
            let hg: Vec<&[&str]> = h.windows(n).collect();
            let mut rg: Vec<Option<&[&str]>> = if rf.len() >= n { rf.windows(n).map(Some).collect() } else { vec![] };
            total[n - 1] += hg.len();
            for g in hg {
                if let Some(slot) = rg.iter_mut().find(|x| **x == Some(g)) {
                    *slot = None;
                    matched[n - 1] += 1;
                }
            }
        }
    }
    // Orders with no hypothesis n-grams at all drop out of the mean.
    let orders: Vec<usize> = (0..4).take_while(|&i| total[i] > 0).collect();
    if c == 0 || orders.iter().any(|&i| matched[i] == 0) {
        return 0.0;
    }
    let log_p: f64 =
        orders.iter().map(|&i| (matched[i] as f64 / total[i] as f64).ln()).sum::<f64>() / orders.len() as f64;
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    100.0 * bp * log_p.exp()
}

const BLEU_FIXTURES: [(&str, &str); 20] = [
    ("a b c d e f g h", "a b c d e f g x"),
    ("the cat sat on the mat", "the cat sat on the mat"),
    ("the the the the the the the", "the cat is on the mat"),
    ("the cat is on the mat today", "the cat is on the mat"),
    ("a cat sat on a mat", "the cat sat on the mat"),
    ("one two three four five", "one two three four five six seven"),
    ("x y z w", "a b c d"),
    ("it is a guide to action which ensures that the military always obeys the commands of the party", "it is a guide to action that ensures that the military will forever heed party commands"),
    ("he read the book because he was interested in world history", "he was interested in world history because he read the book"),
    ("i love this song so much", "i love this song"),
    ("the quick brown fox jumps over the lazy dog", "the quick brown fox jumped over the lazy dog"),
    ("good luck with your exam", "good luck with your exam tomorrow"),
    ("see you later guys", "see you later"),
    ("a b a b a b a b", "a b a b c d"),
    ("thank you very much for your help", "thanks a lot for your help"),
    ("we will meet at noon near the station", "we meet at noon near the old station"),
    ("this is a test of the system", "this is a test of the system and more"),
    ("red green blue red green blue", "red green blue yellow red green blue"),
    ("short", "short"),
    ("it does not work on my phone at all", "it doesn't work on my phone at all"),
];

fn bleu_criterion() -> Outcome {
    let start = Instant::now();
    let single = |h: &str, r: &str| bleu(&[en(h)], &[en(r)]).unwrap().value;
    let sub = single("a b c d e f g h", "a b c d e f g x");
    ensure!(close(sub, 84.09, 0.01), "one-substitution fixture = {sub}");
    let id = single("the cat sat on the mat", "the cat sat on the mat");
    ensure!(close(id, 100.0, 1e-9), "identity = {id}");
    let mut worst = 0.0f64;
    for (h, r) in BLEU_FIXTURES {
        let got = single(h, r);
        let want = oracle_bleu(&[(h, r)]);
        worst = worst.max((got - want).abs());
        ensure!(close(got, want, 1e-4), "{h:?} vs {r:?}: {got} != oracle {want}");
    }
    let hyps: Vec<TokenList> = BLEU_FIXTURES.iter().map(|(h, _)| en(h)).collect();
    let refs: Vec<TokenList> = BLEU_FIXTURES.iter().map(|(_, r)| en(r)).collect();
    let corpus = bleu(&hyps, &refs).unwrap().value;
    let want = oracle_bleu(&BLEU_FIXTURES);
    ensure!(close(corpus, want, 1e-4), "corpus-level {corpus} != oracle {want}");
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(1), "took {t:?}");
    Ok(format!("84.09 fixture {sub:.4}, 20 fixtures max |Δ| {worst:.1e}, corpus {corpus:.4}, {t:.2?}"))
}

// ---------------------------------------------- Jaro-Winkler, ROUGE, Jaccard ---

fn string_metrics_criterion() -> Outcome {
    let jw = jaro_winkler("MARTHA", "MARHTA").value;
    ensure!(close(jw, 0.9611, 1e-4), "JW(MARTHA, MARHTA) = {jw}");
    ensure!(jaro_winkler("abc", "abc").value == 1.0, "JW identity");
    ensure!(jaro_winkler("abc", "xyz").value == 0.0, "JW disjoint");
    let r = rouge1_f(&en("the cat"), &en("the cat sat")).value;
    ensure!(close(r, 0.8, 1e-12), "ROUGE-1 = {r}");
    ensure!(rouge1_f(&en("a b c"), &en("a b c")).value == 1.0, "ROUGE identity");
    ensure!(rouge1_f(&en("a b"), &en("c d")).value == 0.0, "ROUGE disjoint");
    let j = jaccard(&en("a b c"), &en("b c d")).value;
    ensure!(j == 0.5, "Jaccard = {j}");
    ensure!(jaccard(&en("a b"), &en("a b")).value == 1.0, "Jaccard identity");
    ensure!(jaccard(&en("a b"), &en("c d")).value == 0.0, "Jaccard disjoint");
    Ok(format!("JW {jw:.4}, ROUGE-1 {r}, Jaccard {j}"))
}

// --------------------------------------------------------------- gate loop ---

fn gate_sample() -> ParallelSample {
    ParallelSample::new(0, LangCode::fr(), LangCode::en(), "Jss tro content", "Im soooo happyyyy").unwrap()
}

/// Original on the first axis; a candidate whose cosine with it is exactly
/// `num/10`: `(num, 1, 1, ...)` with `100 - num^2` ones has norm 10.
fn exact_embedder(cands: &[(&str, u32)]) -> ScriptedEmbedder {
    let dim = 100;
    let mut orig = vec![0.0; dim];
    orig[0] = 1.0;
    let mut e = ScriptedEmbedder::new().with("Im soooo happyyyy", orig);
    for (text, num) in cands {
        let mut v = vec![0.0; dim];
        v[0] = *num as f64;
        for x in v.iter_mut().skip(1).take((100 - num * num) as usize) {
            *x = 1.0;
        }
        e.insert(*text, v);
    }
    e
}

fn unit_embedder(cands: &[(&str, f64)]) -> ScriptedEmbedder {
    let mut e = ScriptedEmbedder::new().with("Im soooo happyyyy", vec![1.0, 0.0]);
    for (t, s) in cands {
        e.insert(*t, vec![*s, (1.0 - s * s).sqrt()]);
    }
    e
}

fn gate_criterion() -> Outcome {
    let start = Instant::now();
    let pack = PromptPack::builtin(CleaningMethod::Monolingual, &LangCode::fr(), &LangCode::en()).unwrap();
    let cfg = CleanConfig::default();

    let llm = ScriptedCompleter::new(["Desired output: \"a\"", "Desired output: \"b\"", "Desired output: \"c\""]);
    let emb = unit_embedder(&[("a", 0.5), ("b", 0.65), ("c", 0.9)]);
    let r = clean_sample(&gate_sample(), &pack, &cfg, &llm, &emb).unwrap();
    ensure!(r.accepted && r.attempts.len() == 3 && llm.calls() == 3, "schedule [0.5,0.65,0.9]: {r:?}");

    let names: Vec<String> = (0..12).map(|i| format!("c{i}")).collect();
    let sims: Vec<(&str, f64)> = names.iter().map(|n| (n.as_str(), 0.3)).collect();
    let llm = ScriptedCompleter::new(names.iter().map(|n| format!("Desired output: \"{n}\"")));
    let r = clean_sample(&gate_sample(), &pack, &cfg, &llm, &unit_embedder(&sims)).unwrap();
    ensure!(r.attempts.len() == 10 && llm.calls() == 10, "all-failing stopped after {}", r.attempts.len());
    ensure!(r.fallback && !r.accepted, "all-failing flags: {r:?}");

    let llm = ScriptedCompleter::new(["Desired output: \"edge\""]);
    let r = clean_sample(&gate_sample(), &pack, &cfg, &llm, &exact_embedder(&[("edge", 7)])).unwrap();
    ensure!(r.final_similarity == 0.7, "boundary similarity {}", r.final_similarity);
    ensure!(r.accepted && r.attempts.len() == 1, "boundary 0.7 rejected");

    let t = start.elapsed();
    ensure!(t < Duration::from_secs(1), "took {t:?}");
    Ok(format!("accept@3 with 3 calls, stop@10 with fallback, 0.7 passes, {t:.2?}"))
}

// ------------------------------------------------------- e2e determinism ---

fn e2e_artifacts(parallelism: usize, dir: &std::path::Path) -> Vec<u8> {
    let corpus = common::corpus20();
    let tape = Cassette::load(&common::fixture("fr_en_20.cassette.jsonl")).unwrap();
    let emb = HashEmbedder::default();
    let cfg = CleanConfig {
        parallelism,
        ..CleanConfig::default()
    };
    let (src, tgt) = corpus.direction().unwrap();
    let mut out = Vec::new();
    let mut sets = Vec::new();
    for m in CleaningMethod::ALL {
        let pack = PromptPack::builtin(m, src, tgt).unwrap();
        let cleaned = clean_corpus(&corpus, &pack, &cfg, &tape, &emb).unwrap();
        let path = dir.join(format!("{m}-{parallelism}.jsonl"));
        noiseforge::clean::write_cleaned_jsonl(&corpus, &cleaned, &path).unwrap();
        out.extend(std::fs::read(&path).unwrap());
        sets.push(cleaned);
    }
    assert_eq!(tape.misses(), 0, "cassette misses");
    let res = NoiseResources::builtin();
    let mut rows = vec![(
        "noisy".to_string(),
        noise_report(&corpus.samples.iter().map(|s| s.tgt_text.as_str()).collect::<Vec<_>>(), tgt, &res).unwrap(),
    )];
    for s in &sets {
        let texts: Vec<&str> = s.final_texts().collect();
        rows.push((s.method.label().to_string(), noise_report(&texts, tgt, &res).unwrap()));
    }
    write_noise_csv(&mut out, &rows).unwrap();
    let sim = similarity_report(&corpus, &sets, &emb).unwrap();
    write_similarity_csv(&mut out, &sim).unwrap();
    out
}

fn e2e_criterion() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let a = e2e_artifacts(1, dir.path());
    let b = e2e_artifacts(1, dir.path());
    let c = e2e_artifacts(4, dir.path());
    ensure!(a == b, "two runs at parallelism 1 differ");
    ensure!(a == c, "parallelism 1 and 4 differ");
    let lines = a.iter().filter(|&&b| b == b'\n').count();
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(10), "took {t:?}");
    Ok(format!("{} bytes / {lines} lines identical across 3 runs, {t:.2?}", a.len()))
}

// -------------------------------------------------------- noise frequency ---

fn noise_resources() -> NoiseResources {
    let en = LangCode::en();
    NoiseResources::new()
        .with_lexicon(NoiseLexicon::new(LexiconKind::Slang, en.clone(), ["tbh", "smh"]).unwrap())
        .with_lexicon(NoiseLexicon::new(LexiconKind::Profanity, en.clone(), ["darn"]).unwrap())
        .with_dictionary(SpellDictionary::new(en, ["alpha", "beta", "gamma", "delta", "tbh", "smh"]).unwrap())
}

/// `n` in-dictionary tokens in sentences of ten.
fn filler(n: usize) -> Vec<String> {
    let words = ["alpha", "beta", "gamma", "delta"];
    let toks: Vec<&str> = (0..n).map(|i| words[i % 4]).collect();
    toks.chunks(10).map(|c| c.join(" ")).collect()
}

fn noise_criterion() -> Outcome {
    let en = LangCode::en();
    let res = noise_resources();

    let mut emoji_corpus = filler(48);
    emoji_corpus.push("😊 🔥".into());
    let r = noise_report(&emoji_corpus, &en, &res).unwrap();
    ensure!(r.token_count == 50, "emoji corpus has {} tokens", r.token_count);
    let f = |r: &NoiseReport| NoiseCategory::ALL.map(|c| r.freq(c));
    ensure!(f(&r) == [0.0, 4.0, 0.0, 0.0], "emoji corpus freqs {:?}", f(&r));

    let mut slang_corpus = filler(196);
    slang_corpus.push("tbh smh tbh alpah".into());
    let r = noise_report(&slang_corpus, &en, &res).unwrap();
    ensure!(r.token_count == 200, "slang corpus has {} tokens", r.token_count);
    ensure!(f(&r) == [0.5, 0.0, 1.5, 0.0], "slang corpus freqs {:?}", f(&r));

    let empty: Vec<String> = Vec::new();
    ensure!(f(&noise_report(&empty, &en, &res).unwrap()) == [0.0; 4], "empty corpus not all zero");

    // Token-weighted additivity: report(A ∪ B) == report(A).merge(report(B)).
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pool = ["alpha beta", "tbh 😂", "darn gamma smh", "delta alpah", "🔥🔥 beta", "gama darn"];
    for trial in 0..50 {
        let n = rng.random_range(2..40);
        let texts: Vec<&str> = (0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect();
        let cut = rng.random_range(0..=n);
        let whole = noise_report(&texts, &en, &res).unwrap();
        let merged = noise_report(&texts[..cut], &en, &res)
            .unwrap()
            .merge(&noise_report(&texts[cut..], &en, &res).unwrap());
        ensure!(whole == merged, "trial {trial}: merge differs at cut {cut}");
    }
    Ok("emoji 4.0/100 on 50 tokens, slang 1.5 + spell 0.5 on 200, 50 random splits additive".into())
}

// ---------------------------------------------------------- relative gain ---

fn gain_criterion() -> Outcome {
    let g = relative_gain(29.2, 29.2).unwrap();
    ensure!(g == 0.0 && display_1dp(g) == "0.0", "(29.2, 29.2) -> {g} / {}", display_1dp(g));
    let g2 = relative_gain(25.3, 28.3).unwrap();
    ensure!(close(g2, 11.86, 0.01), "(25.3, 28.3) -> {g2}");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let a: f64 = rng.random_range(1.0..60.0);
        let b: f64 = rng.random_range(1.0..60.0);
        let (x, y) = (relative_gain(a, b).unwrap(), relative_gain(b, a).unwrap());
        ensure!(x.signum() == -y.signum() || (a == b && x == 0.0 && y == 0.0), "sign({a},{b})");
    }
    let cases = [(11.857, "11.9"), (-0.04, "0.0"), (-2.25, "-2.2"), (3.95, "4.0"), (0.0, "0.0")];
    for (x, want) in cases {
        ensure!(display_1dp(x) == want, "display {x} -> {} (want {want})", display_1dp(x));
    }
    Ok(format!("zero cell 0.0, (25.3,28.3) {g2:.2}, 1000 swapped pairs antisymmetric"))
}

// ------------------------------------------------------- contrastive loss ---

fn batch(ex: &[Vec<f64>], ez: &[Vec<f64>]) -> BatchEmbeddings {
    BatchEmbeddings::new(ex.iter().map(|v| vec_of(v)).collect(), ez.iter().map(|v| vec_of(v)).collect()).unwrap()
}

fn contrastive_criterion() -> Outcome {
    let l1 = contrastive_loss(&batch(&[vec![1.0, 2.0]], &[vec![-3.0, 0.5]]), 0.1).unwrap();
    ensure!(l1 == 0.0, "N=1 -> {l1}");
    for n in [2usize, 4, 8] {
        let v = vec![vec![0.3, -1.0, 2.0]; n];
        let l = contrastive_loss(&batch(&v, &v), 0.1).unwrap();
        let want = n as f64 * (n as f64).ln();
        ensure!(close(l, want, 1e-9), "identical N={n}: {l} vs {want}");
    }
    let e = [vec![1.0, 0.0], vec![0.0, 1.0]];
    let l2 = contrastive_loss(&batch(&e, &e), 1.0).unwrap();
    ensure!(close(l2, 0.6265, 1e-4), "N=2 closed form {l2}");
    let mut prev = f64::INFINITY;
    for k in 0..=20 {
        let c = -1.0 + k as f64 * 0.1;
        // Only S[0][0] moves; every other pair stays orthogonal.
        let z0 = vec![c, (1.0 - c * c).max(0.0).sqrt(), 0.0];
        let ez = [z0, vec![0.0, 0.0, 1.0]];
        let ex = [vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        let l = contrastive_loss(&batch(&ex, &ez), 0.1).unwrap();
        ensure!(l < prev, "not decreasing at diagonal sim {c}: {l} >= {prev}");
        prev = l;
    }
    let p = ContrastiveParams::default();
    ensure!(p.tau == 0.1 && p.lambda == 0.01, "defaults {p:?}");
    ensure!(combined_loss(1.0, 0.0, &p) == 1.0, "combined (1,0)");
    ensure!(close(combined_loss(0.0, 5.0, &p), 0.05, 1e-15), "combined (0,5)");
    Ok(format!("N=1 0, N ln N for 2/4/8, N=2 {l2:.4}, monotone over 21 steps, τ=0.1 λ=0.01"))
}

// ------------------------------------------------------------ augmentation ---

struct NoCalls;

impl FillMask for NoCalls {
    fn fill(&self, _: &str, _: usize, _: usize) -> Result<Vec<String>, HttpError> {
        panic!("fill-mask called with alpha = 0")
    }
}

fn augmentation_criterion() -> Outcome {
    let en = LangCode::en();
    let text = "The big house is good and I receive mail";
    let toks = en_tokens(text);
    let dict = ErrorDict::from_pairs(vec![("receive".to_string(), "recieve".to_string()); 2]);
    let lex = SynonymLexicon::builtin(&en).unwrap();
    for kind in AugmentKind::ALL {
        let cfg = AugmentConfig::new(kind, 0.0, 1).unwrap();
        let mut rng = cfg.rng_for(0);
        let same = match kind {
            AugmentKind::Char => char_augment(&toks, &cfg, &mut rng) == toks,
            AugmentKind::Error => error_augment(&toks, &cfg, &dict, &mut rng) == toks,
            AugmentKind::Synonym => synonym_augment(&toks, &cfg, &lex, &mut rng) == toks,
            AugmentKind::Contextual => contextual_augment(text, &en, &cfg, &NoCalls, &mut rng).unwrap() == text,
        };
        ensure!(same, "{kind}: alpha 0 changed the input");
    }

    let n = 100_000;
    let words: Vec<String> = (0..n).map(|i| ["receive", "big", "happy", "good"][i % 4].to_string()).collect();
    let big = TokenList::new(words, en.clone());
    let mut rates = BTreeMap::new();
    for kind in [AugmentKind::Char, AugmentKind::Error, AugmentKind::Synonym] {
        let cfg = AugmentConfig::new(kind, 0.1, 7).unwrap();
        let run = |seed_rng: &mut ChaCha8Rng| match kind {
            AugmentKind::Char => char_augment(&big, &cfg, seed_rng),
            AugmentKind::Error => error_augment(&big, &cfg, &dict, seed_rng),
            _ => synonym_augment(&big, &cfg, &lex, seed_rng),
        };
        let out = run(&mut cfg.rng_for(0));
        ensure!(out == run(&mut cfg.rng_for(0)), "{kind}: same seed gave different output");
        ensure!(out != run(&mut cfg.rng_for(1)), "{kind}: different streams gave same output");
        // Alpha applies to eligible tokens: "receive" is the only word with an
        // error form and the only one without builtin synonyms.
        let eligible: Vec<usize> = match kind {
            AugmentKind::Error => (0..n).filter(|i| i % 4 == 0).collect(),
            AugmentKind::Synonym => (0..n).filter(|i| i % 4 != 0).collect(),
            _ => (0..n).collect(),
        };
        let r = eligible.iter().filter(|&&i| big.tokens[i] != out.tokens[i]).count() as f64 / eligible.len() as f64;
        ensure!((0.085..=0.115).contains(&r), "{kind}: rate {r:.4} outside [0.085, 0.115]");
        rates.insert(kind.as_str(), r);
    }

    let mined = ErrorDict::from_pairs([
        ("receive".to_string(), "recieve".to_string()),
        ("receive".to_string(), "Recieve".to_string()),
        ("the".to_string(), "teh".to_string()),
    ]);
    ensure!(mined.len() == 1 && mined.get("receive") == Some(&[("recieve".to_string(), 2)][..]), "error dict {mined:?}");
    ensure!(mined.get("the").is_none(), "single 'teh' kept");

    let samples: Vec<ParallelSample> = (0..10)
        .map(|i| ParallelSample::new(i, LangCode::fr(), en.clone(), &format!("le grand chien {i}"), &format!("the big dog {i}")).unwrap())
        .collect();
    let corpus = Corpus::new("ten", samples).unwrap();
    let sets = make_training_sets(&corpus, &[AugmentKind::Char], 0.1, 5, &AugmentResources::default()).unwrap();
    let TrainingSet::Built { rows, .. } = &sets[0].1 else {
        return Err("char training set unavailable".into());
    };
    ensure!(rows.len() == 20, "training set has {} pairs", rows.len());
    for (i, s) in corpus.samples.iter().enumerate() {
        ensure!(rows[2 * i].src == s.src_text, "row {} is not the original", 2 * i);
        ensure!(rows[2 * i].tgt == s.tgt_text && rows[2 * i + 1].tgt == s.tgt_text, "targets changed at {i}");
    }
    Ok(format!("alpha 0 identity x4, rates {rates:.4?}, dict threshold exact, 10 -> 20 pairs"))
}

fn en_tokens(s: &str) -> TokenList {
    en(s)
}

// ------------------------------------------------------------- preference ---

fn mock_sets(n: u64) -> BTreeMap<Method, Vec<CleanedRow>> {
    let corpus = Corpus::new(
        "mock",
        (0..n)
            .map(|i| ParallelSample::new(i, LangCode::fr(), LangCode::en(), &format!("source {i}"), &format!("noisy {i}")).unwrap())
            .collect(),
    )
    .unwrap();
    [Method::Bilingual, Method::Monolingual, Method::Translation]
        .into_iter()
        .map(|m| {
            let records = corpus
                .samples
                .iter()
                .map(|s| noiseforge::clean::CleaningRecord {
                    sample_id: s.id,
                    method: m,
                    attempts: vec![],
                    final_text: format!("{} output {}", m.as_str(), s.id),
                    final_similarity: 0.9,
                    accepted: true,
                    fallback: false,
                    errored: None,
                })
                .collect();
            let cleaned = noiseforge::clean::CleanedCorpus {
                corpus_name: "mock".into(),
                method: m,
                records,
            };
            (m, cleaned_rows(&corpus, &cleaned))
        })
        .collect()
}

fn preference_criterion() -> Outcome {
    let files = build_comparisons(&mock_sets(150), 100, 11, false).unwrap();
    ensure!(files.len() == 3 && files.iter().all(|f| f.comparisons.len() == 100), "file shape");
    for f in &files {
        for (i, c) in f.comparisons.iter().enumerate() {
            let payload = serde_json::to_string(&c.payload(i + 1, 100)).unwrap();
            ensure!(!payload.contains("\"method\""), "payload names a method");
        }
    }

    let big = build_comparisons(&mock_sets(1000), 1000, 2024, false).unwrap();
    let mut balance = Vec::new();
    for f in &big {
        let a_first = f.comparisons.iter().filter(|c| c.a.method == c.pair().0).count();
        let pct = 100.0 * a_first as f64 / f.comparisons.len() as f64;
        ensure!((45.0..=55.0).contains(&pct), "{}: A holds the first method in {pct:.1}%", f.id);
        balance.push(pct);
    }

    // Judge prefers bilingual on the first 60 items, ties the remaining 40.
    let comps = &files[0].comparisons;
    let answers: Vec<&str> = comps
        .iter()
        .enumerate()
        .map(|(i, c)| match (i < 60, c.a.method == Method::Bilingual) {
            (true, true) => "1",
            (true, false) => "2",
            (false, _) => "3",
        })
        .collect();
    let judge = ScriptedCompleter::new(answers);
    let run = judge_all(comps, &JudgeTemplate::builtin(), &judge, &Default::default());
    ensure!(run.votes.len() == 100 && run.abstentions.is_empty(), "judge run {:?}", run.abstentions);
    let s = aggregate(&run.votes, comps).unwrap();
    let t = &s.pairs[0].overall;
    ensure!(
        (s.pairs[0].first_method, t.first_pct, t.second_pct, t.tie_pct) == (Method::Bilingual, 60.0, 0.0, 40.0),
        "judge tallies {t:?}"
    );

    let rest = rest_round_trip(&files)?;
    Ok(format!("3 x 100 blinded, A-balance {balance:.1?}%, judge 60/0/40 exact, {rest}"))
}

fn rest_round_trip(files: &[noiseforge::preference::ComparisonFile]) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let store = VoteStore::open(&dir.path().join("votes.jsonl")).unwrap();
    let server = AnnotationServer::new(files.to_vec(), store, vec![], None).unwrap();
    let h = spawn_router(server.router(), "127.0.0.1:0").unwrap();
    let mut r = ureq::get(format!("{}/api/comparisons/next?annotator=acc&file=file2", h.url()))
        .call()
        .map_err(|e| e.to_string())?;
    let item: Value = r.body_mut().read_json().map_err(|e| e.to_string())?;
    let id = item["comparison_id"].as_str().ok_or("no comparison id")?.to_string();
    let r = ureq::post(format!("{}/api/votes", h.url()))
        .send_json(json!({"comparison_id": id, "annotator": "acc", "choice": "first"}))
        .map_err(|e| e.to_string())?;
    ensure!(r.status() == 201, "vote status {}", r.status());
    let mut r = ureq::get(format!("{}/api/results", h.url())).call().map_err(|e| e.to_string())?;
    let res: Value = r.body_mut().read_json().map_err(|e| e.to_string())?;
    let total: u64 = res["pairs"].as_array().unwrap().iter().map(|p| p["overall"]["total"].as_u64().unwrap()).sum();
    ensure!(total == 1, "results count {total} votes");
    Ok("REST serve -> vote -> results ok".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("cosine", cosine_criterion),
        ("bleu-oracle", bleu_criterion),
        ("jaro-winkler/rouge-1/jaccard", string_metrics_criterion),
        ("gate-loop", gate_criterion),
        ("e2e-determinism", e2e_criterion),
        ("noise-frequencies", noise_criterion),
        ("relative-gain", gain_criterion),
        ("contrastive-loss", contrastive_criterion),
        ("augmentation", augmentation_criterion),
        ("preference-pipeline", preference_criterion),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
