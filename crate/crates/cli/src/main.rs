use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use noiseforge::augment::{
    build_error_dict, make_training_sets, write_training_set, AugmentKind, AugmentResources, ErrorDetector, ErrorDict,
    FillMask, HttpFillMask, SynonymLexicon, TrainingSet,
};
use noiseforge::clean::{
    clean_corpus, correct_corpus, read_cleaned_jsonl, write_cleaned_jsonl, write_cleaned_text, write_provenance_jsonl,
    CleanConfig, CleanedRow, Corrector, DictionaryCorrector, Method,
};
use noiseforge::config::{Config, ConfigError};
use noiseforge::corpus::{load_parallel, read_jsonl, write_jsonl, Corpus, LangCode};
use noiseforge::embed::{CachedEmbedder, Embedder, HashEmbedder, HttpEmbedder};
use noiseforge::eval::{average_gain, read_gain_json, read_lines, score_systems, write_gain_csv, write_gain_json, write_wide_csv};
use noiseforge::http::HttpClient;
use noiseforge::llm::{Cassette, Completer, HttpCompleter, Recorder};
use noiseforge::noise::{
    noise_report, write_noise_csv, GrammarService, LexiconKind, NoiseLexicon, NoiseReport, NoiseResources,
    SpellDictionary,
};
use noiseforge::preference::{
    aggregate, build_comparisons, judge_all, read_comparisons, read_votes, serve_until_interrupt, write_comparisons,
    write_votes, AnnotationServer, Comparison, VoteStore,
};
use noiseforge::prompt::{resolve_pack, JudgeTemplate};
use noiseforge::report::{similarity_report_rows, write_similarity_csv};
use noiseforge::tokenize::Tokenizer;

/// Clean noisy parallel corpora with LLM prompts, measure noise, augment
/// training data and evaluate robustness.
#[derive(Parser, Debug)]
#[command(name = "noiseforge", version)]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pair two line-aligned text files into corpus JSONL.
    Ingest(IngestArgs),
    /// Clean the target side of a corpus.
    Clean(CleanArgs),
    /// Noise frequencies per 100 tokens.
    NoiseReport(NoiseArgs),
    /// Similarity of cleaned targets to their noisy originals.
    SimilarityReport(SimilarityArgs),
    /// Build source-augmented training sets.
    Augment(AugmentArgs),
    /// Corpus BLEU and relative gain over a baseline.
    Score(ScoreArgs),
    /// Ask an LLM judge to vote on comparison files.
    Judge(JudgeArgs),
    /// Build, serve and aggregate blinded pairwise comparisons.
    HumanEval {
        #[command(subcommand)]
        command: HumanEvalCommand,
    },
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long)]
    src_lang: String,
    #[arg(long)]
    tgt_lang: String,
    /// Corpus name; defaults to the source file stem.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Bilingual,
    Monolingual,
    Translation,
    Correction,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Bilingual => Method::Bilingual,
            MethodArg::Monolingual => Method::Monolingual,
            MethodArg::Translation => Method::Translation,
            MethodArg::Correction => Method::CorrectionTool,
        }
    }
}

#[derive(Args, Debug, Default)]
struct LlmArgs {
    /// Replay completions from this cassette instead of calling an endpoint.
    #[arg(long)]
    cassette: Option<PathBuf>,
    /// Call the endpoint and append every exchange to this cassette.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Completions endpoint base URL.
    #[arg(long)]
    llm_url: Option<String>,
}

#[derive(Args, Debug, Default)]
struct EmbedArgs {
    /// Embedding service base URL.
    #[arg(long)]
    embed_url: Option<String>,
    /// Use the deterministic offline hash embedder.
    #[arg(long)]
    mock_embed: bool,
}

#[derive(Args, Debug)]
struct CleanArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Corpus JSONL.
    #[arg(long = "in")]
    input: PathBuf,
    /// Prompt pack root (`<method>/<src>-<tgt>/`); bundled packs otherwise.
    #[arg(long)]
    pack: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmArgs,
    #[command(flatten)]
    embed: EmbedArgs,
    /// Grammar-check service for the correction method.
    #[arg(long)]
    grammar_url: Option<String>,
    /// Cleaned JSONL output.
    #[arg(long)]
    out: PathBuf,
    /// Cleaned targets, one per line.
    #[arg(long)]
    text_out: Option<PathBuf>,
    /// Per-attempt provenance JSONL.
    #[arg(long)]
    provenance: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_iters: Option<u32>,
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Src,
    Tgt,
    /// `cleaned_tgt` of a cleaned JSONL file.
    Cleaned,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    /// Input file, optionally `NAME=PATH`; repeatable.
    #[arg(long = "in", required = true)]
    input: Vec<String>,
    #[arg(long, value_enum, default_value = "tgt")]
    side: SideArg,
    /// Slang lexicon for the measured language.
    #[arg(long)]
    slang: Option<PathBuf>,
    #[arg(long)]
    profanity: Option<PathBuf>,
    /// Spelling dictionary, one word per line.
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long)]
    grammar_url: Option<String>,
    #[arg(long)]
    tokenizer_url: Option<String>,
    /// CSV output; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimilarityArgs {
    /// Cleaned JSONL, one per method; repeatable.
    #[arg(long = "cleaned", required = true)]
    cleaned: Vec<PathBuf>,
    #[command(flatten)]
    embed: EmbedArgs,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Augmentation kinds; all four by default.
    #[arg(long = "kind", value_parser = parse_kind)]
    kinds: Vec<AugmentKind>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Synonym lexicon TSV (`word<TAB>syn1,syn2`).
    #[arg(long)]
    synonyms: Option<PathBuf>,
    /// Error-replacement dictionary JSON.
    #[arg(long)]
    error_dict: Option<PathBuf>,
    /// Mine the error dictionary from the input's source side.
    #[arg(long)]
    mine_errors: bool,
    #[arg(long)]
    grammar_url: Option<String>,
    #[arg(long)]
    fill_mask_url: Option<String>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Writes `<kind>.jsonl` and `stats.json`.
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_kind(s: &str) -> Result<AugmentKind, String> {
    s.parse().map_err(|e: noiseforge::augment::AugmentError| e.to_string())
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    baseline: PathBuf,
    /// System output, optionally `NAME=PATH`; repeatable.
    #[arg(long = "system", required = true)]
    systems: Vec<String>,
    #[arg(long)]
    refs: PathBuf,
    #[arg(long, default_value = "test")]
    eval_set: String,
    /// Target language, for tokenization.
    #[arg(long, default_value = "en")]
    lang: String,
    /// Long-form gain CSV; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table-shaped CSV with one row per evaluation set.
    #[arg(long)]
    wide: Option<PathBuf>,
    /// Records as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Merge with the records already in `--json` (other evaluation sets).
    #[arg(long, requires = "json")]
    append: bool,
}

#[derive(Args, Debug)]
struct JudgeArgs {
    /// Directory of comparison files.
    #[arg(long)]
    comparisons: PathBuf,
    /// Judge prompt with `{0}`..`{3}` slots; bundled otherwise.
    #[arg(long)]
    template: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmArgs,
    /// Votes JSONL output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum HumanEvalCommand {
    /// Sample comparisons from cleaned outputs.
    Build {
        /// Cleaned JSONL, one per method; repeatable.
        #[arg(long = "cleaned", required = true)]
        cleaned: Vec<PathBuf>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        include_correction: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the annotation API and UI bundle.
    Serve {
        #[arg(long)]
        comparisons: PathBuf,
        /// Vote store JSONL; created when missing.
        #[arg(long)]
        votes: PathBuf,
        /// Judge votes to include in results.
        #[arg(long)]
        judge_votes: Option<PathBuf>,
        /// Built UI directory (`index.html`, `assets/`).
        #[arg(long)]
        assets: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Tally votes per method pair.
    Aggregate {
        #[arg(long)]
        comparisons: PathBuf,
        /// Vote files; repeatable.
        #[arg(long = "votes", required = true)]
        votes: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = if e.downcast_ref::<ConfigError>().is_some() { "config" } else { "runtime" };
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            let report = serde_json::json!({"error": {"kind": kind, "message": e.to_string(), "chain": chain}});
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = Config::load_or_default(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(a) => ingest(&cfg, a),
        Command::Clean(a) => clean(&mut cfg, a),
        Command::NoiseReport(a) => noise(&cfg, a),
        Command::SimilarityReport(a) => similarity(&mut cfg, a),
        Command::Augment(a) => augment(&mut cfg, a),
        Command::Score(a) => score(a),
        Command::Judge(a) => judge(&mut cfg, a),
        Command::HumanEval { command } => human_eval(&cfg, command),
    }
}

fn lang(cfg: &Config, code: &str) -> Result<LangCode> {
    Ok(LangCode::parse_with(code, &cfg.extra_langs)?)
}

fn split_named(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let p = PathBuf::from(arg);
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            (name, p)
        }
    }
}

fn output(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = std::io::BufWriter::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?);
            write(&mut f)?;
            f.flush()?;
        }
        None => write(&mut std::io::stdout().lock())?,
    }
    Ok(())
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn ingest(cfg: &Config, a: IngestArgs) -> Result<()> {
    let mut corpus = load_parallel(&a.src, &a.tgt, lang(cfg, &a.src_lang)?, lang(cfg, &a.tgt_lang)?)?;
    corpus.meta.name = a
        .name
        .unwrap_or_else(|| a.src.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    write_jsonl(&corpus, &a.out)?;
    print_json(&serde_json::json!({"samples": corpus.len(), "out": a.out}))
}

fn embedder(cfg: &Config, a: &EmbedArgs) -> Result<Box<dyn Embedder>> {
    if a.mock_embed {
        return Ok(Box::new(HashEmbedder::default()));
    }
    let url = a.embed_url.as_deref().or(cfg.endpoints.embedding.as_deref());
    let url = url.ok_or(ConfigError::MissingEndpoint("embedding"))?;
    let http = HttpEmbedder::new(url, cfg.timeout(), &cfg.credentials.embed_key_env, cfg.parallelism);
    Ok(Box::new(CachedEmbedder::new(http)))
}

fn completer(cfg: &Config, a: &LlmArgs) -> Result<Box<dyn Completer>> {
    if let (Some(tape), None) = (&a.cassette, &a.record) {
        return Ok(Box::new(Cassette::load(tape)?));
    }
    let url = a.llm_url.as_deref().or(cfg.endpoints.llm.as_deref());
    let url = url.ok_or(ConfigError::MissingEndpoint("llm"))?;
    let client = HttpClient::new(url, cfg.timeout()).with_token_env(&cfg.credentials.llm_key_env);
    let http = HttpCompleter::new(client)
        .with_wire(cfg.endpoints.llm_wire)
        .with_rate_limit(cfg.endpoints.rate_limit_per_sec)
        .with_max_in_flight(cfg.parallelism);
    match &a.record {
        Some(path) => Ok(Box::new(Recorder::new(http, path)?)),
        None => Ok(Box::new(http)),
    }
}

fn clean(cfg: &mut Config, a: CleanArgs) -> Result<()> {
    if let Some(t) = a.threshold {
        cfg.gate.threshold = t;
    }
    if let Some(n) = a.max_iters {
        cfg.gate.max_iters = n;
    }
    if let Some(p) = a.parallelism {
        cfg.parallelism = p;
    }
    cfg.validate().map_err(ConfigError::Invalid)?;
    let corpus = read_jsonl(&a.input)?;
    let Some((src, tgt)) = corpus.direction() else {
        bail!("{} is empty or mixes language directions", a.input.display());
    };
    let (src, tgt) = (src.clone(), tgt.clone());
    let clean_cfg = CleanConfig {
        gate: cfg.gate.clone(),
        params: cfg.llm.clone(),
        parallelism: cfg.parallelism,
    };
    let emb = embedder(cfg, &a.embed)?;
    let method: Method = a.method.into();
    let cleaned = match method.llm() {
        Some(m) => {
            let pack_root = a.pack.as_deref().or(cfg.pack_dir.as_deref());
            let pack = resolve_pack(pack_root, m, &src, &tgt)?;
            let llm = completer(cfg, &a.llm)?;
            clean_corpus(&corpus, &pack, &clean_cfg, llm.as_ref(), emb.as_ref())?
        }
        None => {
            let corrector = match a.grammar_url.as_deref().or(cfg.endpoints.grammar.as_deref()) {
                Some(url) => Corrector::Service(GrammarService::new(url, cfg.timeout())),
                None => Corrector::builtin(&tgt)?,
            };
            correct_corpus(&corpus, &corrector, &clean_cfg, emb.as_ref())?
        }
    };
    write_cleaned_jsonl(&corpus, &cleaned, &a.out)?;
    if let Some(p) = &a.provenance {
        write_provenance_jsonl(&cleaned, p)?;
    }
    if let Some(p) = &a.text_out {
        output(Some(p), |w| write_cleaned_text(w, &cleaned))?;
    }
    print_json(&cleaned.stats())
}

enum Loaded {
    Corpus(Corpus),
    Cleaned(Vec<CleanedRow>),
}

fn noise(cfg: &Config, a: NoiseArgs) -> Result<()> {
    let mut res = NoiseResources::builtin();
    if let Some(url) = a.grammar_url.as_deref().or(cfg.endpoints.grammar.as_deref()) {
        res.grammar = Some(GrammarService::new(url, cfg.timeout()));
    }
    if let Some(url) = a.tokenizer_url.as_deref().or(cfg.endpoints.tokenizer.as_deref()) {
        let langs = cfg
            .endpoints
            .tokenizer_langs
            .iter()
            .map(|l| lang(cfg, l))
            .collect::<Result<Vec<_>>>()?;
        let langs = if langs.is_empty() { vec![LangCode::ja()] } else { langs };
        res.tokenizer = Tokenizer::External {
            client: HttpClient::new(url, cfg.timeout()),
            langs,
        };
    }
    let mut rows: Vec<(String, NoiseReport)> = Vec::new();
    for named in &a.input {
        let (name, path) = split_named(named);
        let loaded = match a.side {
            SideArg::Cleaned => Loaded::Cleaned(read_cleaned_jsonl(&path)?),
            _ => Loaded::Corpus(read_jsonl(&path)?),
        };
        let (texts, lang): (Vec<String>, LangCode) = match &loaded {
            Loaded::Corpus(c) => {
                let Some((s, t)) = c.direction() else {
                    bail!("{} is empty or mixes language directions", path.display());
                };
                match a.side {
                    SideArg::Src => (c.samples.iter().map(|x| x.src_text.clone()).collect(), s.clone()),
                    _ => (c.samples.iter().map(|x| x.tgt_text.clone()).collect(), t.clone()),
                }
            }
            Loaded::Cleaned(rows) => {
                let Some(first) = rows.first() else {
                    bail!("{} has no rows", path.display());
                };
                (rows.iter().map(|r| r.cleaned_tgt.clone()).collect(), first.tgt_lang.clone())
            }
        };
        if let Some(p) = &a.slang {
            res = res.with_lexicon(NoiseLexicon::load(LexiconKind::Slang, lang.clone(), p)?);
        }
        if let Some(p) = &a.profanity {
            res = res.with_lexicon(NoiseLexicon::load(LexiconKind::Profanity, lang.clone(), p)?);
        }
        if let Some(p) = &a.dict {
            res = res.with_dictionary(SpellDictionary::load(lang.clone(), p)?);
        }
        rows.push((name, noise_report(&texts, &lang, &res)?));
    }
    output(a.out.as_deref(), |w| write_noise_csv(w, &rows))
}

fn similarity(cfg: &mut Config, a: SimilarityArgs) -> Result<()> {
    if let Some(p) = a.parallelism {
        cfg.parallelism = p;
    }
    let emb = embedder(cfg, &a.embed)?;
    let sets = a
        .cleaned
        .iter()
        .map(|p| read_cleaned_jsonl(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let rows = similarity_report_rows(&sets, emb.as_ref())?;
    output(a.out.as_deref(), |w| write_similarity_csv(w, &rows))
}

fn augment(cfg: &mut Config, a: AugmentArgs) -> Result<()> {
    let alpha = a.alpha.unwrap_or(cfg.augment.alpha);
    let seed = a.seed.unwrap_or(cfg.seed);
    let kinds = if a.kinds.is_empty() { cfg.augment.kinds.clone() } else { a.kinds.clone() };
    let corpus = read_jsonl(&a.input)?;
    let Some((src, _)) = corpus.direction() else {
        bail!("{} is empty or mixes language directions", a.input.display());
    };
    let src = src.clone();
    fs::create_dir_all(&a.out_dir)?;

    let mut res = AugmentResources::default();
    res.synonyms = match a.synonyms.as_ref().or(cfg.augment.synonyms.as_ref()) {
        Some(p) => Some(SynonymLexicon::load(src.clone(), p)?),
        None => SynonymLexicon::builtin(&src),
    };
    res.errors = if let Some(p) = a.error_dict.as_ref().or(cfg.augment.error_dict.as_ref()) {
        Some(ErrorDict::load(p)?)
    } else if a.mine_errors {
        let detector = match a.grammar_url.as_deref().or(cfg.endpoints.grammar.as_deref()) {
            Some(url) => ErrorDetector::Service(GrammarService::new(url, cfg.timeout())),
            None => {
                let dict = SpellDictionary::builtin(&src).with_context(|| format!("no bundled dictionary for {src}"))?;
                ErrorDetector::Dictionary(DictionaryCorrector::new(dict))
            }
        };
        let texts: Vec<&str> = corpus.samples.iter().map(|s| s.src_text.as_str()).collect();
        let dict = build_error_dict(&texts, &src, &detector)?;
        dict.save(&a.out_dir.join("error_dict.json"))?;
        Some(dict)
    } else {
        None
    };
    if let Some(url) = a.fill_mask_url.as_deref().or(cfg.endpoints.fill_mask.as_deref()) {
        res.fill_mask = Some(Box::new(HttpFillMask::new(url, cfg.timeout())) as Box<dyn FillMask>);
    }

    let pool = rayon_pool(a.parallelism.unwrap_or(cfg.parallelism))?;
    let sets = pool.install(|| make_training_sets(&corpus, &kinds, alpha, seed, &res))?;
    let mut summary = BTreeMap::new();
    for (kind, set) in sets {
        match set {
            TrainingSet::Built { rows, stats } => {
                write_training_set(&a.out_dir.join(format!("{kind}.jsonl")), &rows)?;
                summary.insert(kind.as_str(), serde_json::json!({"status": "built", "stats": stats}));
            }
            TrainingSet::Unavailable(reason) => {
                summary.insert(kind.as_str(), serde_json::json!({"status": "unavailable", "reason": reason}));
            }
        }
    }
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(a.out_dir.join("stats.json"), format!("{text}\n"))?;
    println!("{text}");
    Ok(())
}

fn rayon_pool(n: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?)
}

fn score(a: ScoreArgs) -> Result<()> {
    let baseline = read_lines(&a.baseline)?;
    let refs = read_lines(&a.refs)?;
    let systems = a
        .systems
        .iter()
        .map(|s| {
            let (name, path) = split_named(s);
            Ok((name, read_lines(&path)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let lang = LangCode::parse(&a.lang)?;
    let mut records = score_systems(&a.eval_set, &baseline, &systems, &refs, &lang)?;
    if a.append {
        let json = a.json.as_ref().expect("clap requires --json");
        if json.exists() {
            let mut prior = read_gain_json(json)?;
            prior.retain(|r| r.eval_set != a.eval_set);
            prior.extend(records);
            prior.sort_by(|x, y| (&x.eval_set, &x.system).cmp(&(&y.eval_set, &y.system)));
            records = prior;
        }
    }
    output(a.out.as_deref(), |w| write_gain_csv(w, &records))?;
    if let Some(p) = &a.wide {
        output(Some(p), |w| write_wide_csv(w, &records))?;
    }
    if let Some(p) = &a.json {
        output(Some(p), |w| write_gain_json(w, &records))?;
    }
    if a.out.is_some() {
        print_json(&serde_json::json!({"average_gain": average_gain(&records)?}))?;
    }
    Ok(())
}

fn judge(cfg: &mut Config, a: JudgeArgs) -> Result<()> {
    let template = match &a.template {
        Some(p) => JudgeTemplate::load(p)?,
        None => JudgeTemplate::builtin(),
    };
    let files = read_comparisons(&a.comparisons)?;
    let comps: Vec<Comparison> = files.into_iter().flat_map(|f| f.comparisons).collect();
    let llm = completer(cfg, &a.llm)?;
    let run = judge_all(&comps, &template, llm.as_ref(), &cfg.llm);
    for ab in &run.abstentions {
        log::warn!("judge abstained on {}: {}", ab.comparison_id, ab.reason);
    }
    // Timestamps would make reruns differ; judge votes carry none.
    let votes: Vec<_> = run.votes.into_iter().map(|v| noiseforge::preference::Vote { timestamp: 0, ..v }).collect();
    write_votes(&a.out, &votes)?;
    print_json(&serde_json::json!({"votes": votes.len(), "abstentions": run.abstentions.len()}))
}

fn human_eval(cfg: &Config, cmd: HumanEvalCommand) -> Result<()> {
    match cmd {
        HumanEvalCommand::Build {
            cleaned,
            n,
            seed,
            include_correction,
            out,
        } => {
            let mut sets: BTreeMap<Method, Vec<CleanedRow>> = BTreeMap::new();
            for p in &cleaned {
                let rows = read_cleaned_jsonl(p)?;
                let Some(method) = rows.first().map(|r| r.method) else {
                    bail!("{} has no rows", p.display());
                };
                if sets.insert(method, rows).is_some() {
                    bail!("method {method} given twice");
                }
            }
            let files = build_comparisons(&sets, n, seed.unwrap_or(cfg.seed), include_correction)?;
            write_comparisons(&out, &files)?;
            let counts: BTreeMap<&str, usize> = files.iter().map(|f| (f.id.as_str(), f.comparisons.len())).collect();
            print_json(&counts)
        }
        HumanEvalCommand::Serve {
            comparisons,
            votes,
            judge_votes,
            assets,
            addr,
        } => {
            let files = read_comparisons(&comparisons)?;
            let store = VoteStore::open(&votes)?;
            let extra = match judge_votes {
                Some(p) => read_votes(&p)?,
                None => Vec::new(),
            };
            let server = AnnotationServer::new(files, store, extra, assets)?;
            serve_until_interrupt(server, &addr)?;
            Ok(())
        }
        HumanEvalCommand::Aggregate { comparisons, votes, out } => {
            let comps: Vec<Comparison> = read_comparisons(&comparisons)?
                .into_iter()
                .flat_map(|f| f.comparisons)
                .collect();
            let mut all = Vec::new();
            for p in &votes {
                all.extend(read_votes(p)?);
            }
            let summary = aggregate(&all, &comps)?;
            let text = serde_json::to_string_pretty(&summary)?;
            output(out.as_deref(), |w| writeln!(w, "{text}"))
        }
    }
}
