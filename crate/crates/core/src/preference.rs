//! Blinded pairwise comparisons of cleaning methods: building the comparison
//! files, LLM judging, vote storage, aggregation, and the annotation server.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clean::{CleanedRow, Method};
use crate::llm::{parse_judge, Completer, JudgeVote, LlmParams};
use crate::prompt::JudgeTemplate;
use crate::sync::mix64;

pub const JUDGE_VOTER: &str = "judge";

#[derive(Debug, thiserror::Error)]
pub enum PrefError {
    #[error("method set {0} is missing")]
    MissingMethod(Method),
    #[error("method sets are not aligned: {0}")]
    Misaligned(String),
    #[error("asked for {n} comparisons but only {available} samples exist")]
    TooMany { n: usize, available: usize },
    #[error("vote for unknown comparison {0}")]
    Orphan(String),
    #[error("{path} line {line}: corrupt vote store: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{comparison_id} already has a vote from {voter}")]
    Duplicate { comparison_id: String, voter: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PrefError + '_ {
    move |source| PrefError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub method: Method,
    pub text: String,
}

/// One blinded item. Method identities stay server-side; annotators only
/// ever see [`ComparisonPayload`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub comparison_id: String,
    pub file: String,
    pub sample_id: u64,
    pub src: String,
    pub noisy_tgt: String,
    pub a: Candidate,
    pub b: Candidate,
}

impl Comparison {
    /// The unordered method pair, smaller method first.
    pub fn pair(&self) -> (Method, Method) {
        let (x, y) = (self.a.method, self.b.method);
        if x <= y {
            (x, y)
        } else {
            (y, x)
        }
    }

    pub fn method_for(&self, choice: JudgeVote) -> Option<Method> {
        match choice {
            JudgeVote::First => Some(self.a.method),
            JudgeVote::Second => Some(self.b.method),
            JudgeVote::Tie => None,
        }
    }

    pub fn payload(&self, index: usize, total: usize) -> ComparisonPayload {
        ComparisonPayload {
            comparison_id: self.comparison_id.clone(),
            src: self.src.clone(),
            noisy_tgt: self.noisy_tgt.clone(),
            a: self.a.text.clone(),
            b: self.b.text.clone(),
            index,
            total,
        }
    }
}

/// What an annotator is shown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonPayload {
    pub comparison_id: String,
    pub src: String,
    pub noisy_tgt: String,
    pub a: String,
    pub b: String,
    /// 1-based position within the file.
    pub index: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonFile {
    /// Opaque id such as `file1`; never names the methods.
    pub id: String,
    pub comparisons: Vec<Comparison>,
}

fn opaque_id(seed: u64, file: &str, sample_id: u64) -> String {
    let digest = Sha256::digest(format!("{seed}:{file}:{sample_id}").as_bytes());
    hex::encode(&digest[..8])
}

/// Samples `n` ids (seeded, without replacement) and emits one file per
/// unordered pair of the given methods, each independently shuffled with
/// random A/B placement. The correction tool joins only when
/// `include_correction` is set.
pub fn build_comparisons(
    sets: &BTreeMap<Method, Vec<CleanedRow>>,
    n: usize,
    seed: u64,
    include_correction: bool,
) -> Result<Vec<ComparisonFile>, PrefError> {
    let mut methods = vec![Method::Bilingual, Method::Monolingual, Method::Translation];
    if include_correction {
        methods.push(Method::CorrectionTool);
    }
    for m in &methods {
        if !sets.contains_key(m) {
            return Err(PrefError::MissingMethod(*m));
        }
    }
    let base = &sets[&methods[0]];
    for m in &methods[1..] {
        let other = &sets[m];
        if other.len() != base.len() || other.iter().zip(base).any(|(x, y)| x.id != y.id) {
            return Err(PrefError::Misaligned(format!("{} vs {}", methods[0], m)));
        }
    }
    if n > base.len() {
        return Err(PrefError::TooMany {
            n,
            available: base.len(),
        });
    }
    if n == 0 {
        log::warn!("building empty comparison files (n = 0)");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed));
    let mut picked = index::sample(&mut rng, base.len(), n).into_vec();
    picked.sort_unstable();

    let mut files = Vec::new();
    for (i, &m1) in methods.iter().enumerate() {
        for &m2 in &methods[i + 1..] {
            let id = format!("file{}", files.len() + 1);
            let mut frng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(files.len() as u64 + 1)));
            let mut comps: Vec<Comparison> = picked
                .iter()
                .map(|&k| {
                    let (r1, r2) = (&sets[&m1][k], &sets[&m2][k]);
                    let c1 = Candidate {
                        method: m1,
                        text: r1.cleaned_tgt.clone(),
                    };
                    let c2 = Candidate {
                        method: m2,
                        text: r2.cleaned_tgt.clone(),
                    };
                    let (a, b) = if frng.random_bool(0.5) { (c1, c2) } else { (c2, c1) };
                    Comparison {
                        comparison_id: opaque_id(seed, &id, r1.id),
                        file: id.clone(),
                        sample_id: r1.id,
                        src: r1.src.clone(),
                        noisy_tgt: r1.tgt.clone(),
                        a,
                        b,
                    }
                })
                .collect();
            comps.shuffle(&mut frng);
            files.push(ComparisonFile { id, comparisons: comps });
        }
    }
    Ok(files)
}

/// Writes `<dir>/<file id>.jsonl` for every file.
pub fn write_comparisons(dir: &Path, files: &[ComparisonFile]) -> Result<(), PrefError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for f in files {
        let path = dir.join(format!("{}.jsonl", f.id));
        let mut out = String::new();
        for c in &f.comparisons {
            out.push_str(&serde_json::to_string(c).expect("comparison serializes"));
            out.push('\n');
        }
        fs::write(&path, out).map_err(io_err(&path))?;
    }
    Ok(())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, PrefError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| PrefError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Reads every `*.jsonl` comparison file in `dir`, ordered by file id.
pub fn read_comparisons(dir: &Path) -> Result<Vec<ComparisonFile>, PrefError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let id = p.file_stem().unwrap().to_string_lossy().into_owned();
            Ok(ComparisonFile {
                id,
                comparisons: read_jsonl(&p)?,
            })
        })
        .collect()
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub comparison_id: String,
    pub voter: String,
    pub choice: JudgeVote,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Abstention {
    pub comparison_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRun {
    pub votes: Vec<Vote>,
    pub abstentions: Vec<Abstention>,
}

/// Asks the judge model about every comparison. Unparseable replies and
/// provider failures become abstentions, never ties.
pub fn judge_all(
    comparisons: &[Comparison],
    template: &JudgeTemplate,
    judge: &dyn Completer,
    params: &LlmParams,
) -> JudgeRun {
    let mut run = JudgeRun::default();
    for c in comparisons {
        let prompt = template.render(&c.src, &c.noisy_tgt, &c.a.text, &c.b.text);
        let reply = judge.complete(&prompt, params, 1);
        match reply.map_err(|e| e.to_string()).and_then(|r| parse_judge(&r.text).map_err(|e| e.to_string())) {
            Ok(choice) => run.votes.push(Vote {
                comparison_id: c.comparison_id.clone(),
                voter: JUDGE_VOTER.to_string(),
                choice,
                timestamp: now_secs(),
            }),
            Err(reason) => run.abstentions.push(Abstention {
                comparison_id: c.comparison_id.clone(),
                reason,
            }),
        }
    }
    run
}

// ----------------------------------------------------------- aggregation ----

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub first_wins: u64,
    pub second_wins: u64,
    pub ties: u64,
    pub total: u64,
    pub first_pct: f64,
    pub second_pct: f64,
    pub tie_pct: f64,
}

impl Tally {
    fn add(&mut self, winner: Option<Method>, first: Method) {
        match winner {
            Some(m) if m == first => self.first_wins += 1,
            Some(_) => self.second_wins += 1,
            None => self.ties += 1,
        }
        self.total += 1;
    }

    fn finish(mut self) -> Self {
        if self.total > 0 {
            let t = self.total as f64;
            self.first_pct = 100.0 * self.first_wins as f64 / t;
            self.second_pct = 100.0 * self.second_wins as f64 / t;
            self.tie_pct = 100.0 * self.ties as f64 / t;
        }
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    /// Every vote counted once.
    pub pooled: Tally,
    /// One outcome per comparison: the majority of that class's votes on it.
    pub per_item_majority: Tally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub first_method: Method,
    pub second_method: Method,
    pub overall: Tally,
    /// Keyed by `human` or `judge`.
    pub by_class: BTreeMap<String, ClassSummary>,
    pub by_voter: BTreeMap<String, Tally>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSummary {
    pub pairs: Vec<PairSummary>,
}

pub fn voter_class(voter: &str) -> &'static str {
    if voter == JUDGE_VOTER {
        "judge"
    } else {
        "human"
    }
}

/// Resolves positional choices to methods and tallies them per method pair.
/// The result does not depend on vote order.
pub fn aggregate(votes: &[Vote], comparisons: &[Comparison]) -> Result<PreferenceSummary, PrefError> {
    let by_id: HashMap<&str, &Comparison> = comparisons.iter().map(|c| (c.comparison_id.as_str(), c)).collect();
    struct Acc {
        overall: Tally,
        pooled: BTreeMap<String, Tally>,
        voters: BTreeMap<String, Tally>,
        items: BTreeMap<(String, String), [u64; 3]>,
    }
    let mut pairs: BTreeMap<(Method, Method), Acc> = BTreeMap::new();
    for c in comparisons {
        pairs.entry(c.pair()).or_insert_with(|| Acc {
            overall: Tally::default(),
            pooled: BTreeMap::new(),
            voters: BTreeMap::new(),
            items: BTreeMap::new(),
        });
    }
    for v in votes {
        let c = by_id
            .get(v.comparison_id.as_str())
            .ok_or_else(|| PrefError::Orphan(v.comparison_id.clone()))?;
        let (first, _) = c.pair();
        let winner = c.method_for(v.choice);
        let acc = pairs.get_mut(&c.pair()).expect("pair registered");
        let class = voter_class(&v.voter).to_string();
        acc.overall.add(winner, first);
        acc.pooled.entry(class.clone()).or_default().add(winner, first);
        acc.voters.entry(v.voter.clone()).or_default().add(winner, first);
        let slot = match winner {
            Some(m) if m == first => 0,
            Some(_) => 1,
            None => 2,
        };
        acc.items.entry((class, c.comparison_id.clone())).or_default()[slot] += 1;
    }
    let mut out = PreferenceSummary::default();
    for ((m1, m2), acc) in pairs {
        let mut by_class: BTreeMap<String, ClassSummary> = BTreeMap::new();
        for (class, t) in acc.pooled {
            by_class.entry(class).or_default().pooled = t.finish();
        }
        for ((class, _), [w1, w2, _]) in acc.items {
            let winner = match w1.cmp(&w2) {
                std::cmp::Ordering::Greater => Some(m1),
                std::cmp::Ordering::Less => Some(m2),
                std::cmp::Ordering::Equal => None,
            };
            by_class.entry(class).or_default().per_item_majority.add(winner, m1);
        }
        for s in by_class.values_mut() {
            s.per_item_majority = std::mem::take(&mut s.per_item_majority).finish();
        }
        out.pairs.push(PairSummary {
            first_method: m1,
            second_method: m2,
            overall: acc.overall.finish(),
            by_class,
            by_voter: acc.voters.into_iter().map(|(k, t)| (k, t.finish())).collect(),
        });
    }
    Ok(out)
}

// ------------------------------------------------------------ vote store ----

/// Append-only JSONL of votes. Each append is fsynced; `checkpoint`
/// rewrites the file through a temporary and an atomic rename.
#[derive(Debug)]
pub struct VoteStore {
    path: PathBuf,
    votes: Vec<Vote>,
    seen: HashSet<(String, String)>,
}

impl VoteStore {
    /// Opens or creates the store. Any unparseable line is reported as
    /// corruption rather than skipped.
    pub fn open(path: &Path) -> Result<Self, PrefError> {
        let mut store = VoteStore {
            path: path.to_path_buf(),
            votes: Vec::new(),
            seen: HashSet::new(),
        };
        if !path.exists() {
            return Ok(store);
        }
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v: Vote = serde_json::from_str(line).map_err(|e| PrefError::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            if !store.seen.insert((v.comparison_id.clone(), v.voter.clone())) {
                return Err(PrefError::Corrupt {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: "duplicate vote".into(),
                });
            }
            store.votes.push(v);
        }
        Ok(store)
    }

    pub fn votes(&self) -> &[Vote] {
        &self.votes
    }

    pub fn has_voted(&self, comparison_id: &str, voter: &str) -> bool {
        self.seen.contains(&(comparison_id.to_string(), voter.to_string()))
    }

    pub fn append(&mut self, vote: Vote) -> Result<(), PrefError> {
        let key = (vote.comparison_id.clone(), vote.voter.clone());
        if self.seen.contains(&key) {
            return Err(PrefError::Duplicate {
                comparison_id: key.0,
                voter: key.1,
            });
        }
        let mut line = serde_json::to_string(&vote).expect("vote serializes");
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(io_err(&self.path))?;
        f.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        f.sync_all().map_err(io_err(&self.path))?;
        self.seen.insert(key);
        self.votes.push(vote);
        Ok(())
    }

    pub fn checkpoint(&self) -> Result<(), PrefError> {
        let tmp = self.path.with_extension("jsonl.tmp");
        {
            let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
            for v in &self.votes {
                let line = serde_json::to_string(v).expect("vote serializes");
                writeln!(f, "{line}").map_err(io_err(&tmp))?;
            }
            f.sync_all().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, &self.path).map_err(io_err(&self.path))
    }
}

pub fn read_votes(path: &Path) -> Result<Vec<Vote>, PrefError> {
    read_jsonl(path)
}

pub fn write_votes(path: &Path, votes: &[Vote]) -> Result<(), PrefError> {
    let mut out = String::new();
    for v in votes {
        out.push_str(&serde_json::to_string(v).expect("vote serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

// ---------------------------------------------------------------- server ----

struct ServerState {
    files: Vec<ComparisonFile>,
    by_id: HashMap<String, (usize, usize)>,
    store: Mutex<VoteStore>,
    /// Snapshot of all votes for readers; replaced after every write.
    snapshot: RwLock<Arc<Vec<Vote>>>,
    extra_votes: Vec<Vote>,
    assets: Option<PathBuf>,
}

/// Everything the annotation server needs.
pub struct AnnotationServer {
    state: Arc<ServerState>,
}

impl AnnotationServer {
    /// `extra_votes` (for example judge votes) are included in `/api/results`.
    pub fn new(
        files: Vec<ComparisonFile>,
        store: VoteStore,
        extra_votes: Vec<Vote>,
        assets: Option<PathBuf>,
    ) -> Result<Self, PrefError> {
        let mut by_id = HashMap::new();
        for (fi, f) in files.iter().enumerate() {
            for (ci, c) in f.comparisons.iter().enumerate() {
                by_id.insert(c.comparison_id.clone(), (fi, ci));
            }
        }
        if let Some(v) = store.votes().iter().find(|v| !by_id.contains_key(&v.comparison_id)) {
            return Err(PrefError::Orphan(v.comparison_id.clone()));
        }
        let snapshot = RwLock::new(Arc::new(store.votes().to_vec()));
        Ok(AnnotationServer {
            state: Arc::new(ServerState {
                files,
                by_id,
                store: Mutex::new(store),
                snapshot,
                extra_votes,
                assets,
            }),
        })
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/api/comparisons/next", get(next_comparison))
            .route("/api/votes", post(post_vote))
            .route("/api/results", get(results))
            .route("/", get(index_page))
            .route("/assets/{*path}", get(asset))
            .with_state(self.state.clone())
    }

    /// Serves until `shutdown` resolves.
    pub async fn serve(
        self,
        listener: tokio::net::TcpListener,
        shutdown: impl std::future::Future<Output = ()> + Send + 'static,
    ) -> std::io::Result<()> {
        axum::serve(listener, self.router()).with_graceful_shutdown(shutdown).await
    }
}

/// Binds `addr` and serves until Ctrl-C. Prints the bound address first.
pub fn serve_until_interrupt(server: AnnotationServer, addr: &str) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        println!("listening on http://{}", listener.local_addr()?);
        server
            .serve(listener, async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}

/// A server running on a background thread; stops when dropped.
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Binds `addr` and serves `router` on its own runtime thread.
pub fn spawn_router(router: Router, addr: &str) -> std::io::Result<ServerHandle> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let thread = std::thread::spawn(move || {
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
            let _ = axum::serve(listener, router)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(ServerHandle {
        addr: local,
        stop: Some(tx),
        thread: Some(thread),
    })
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: Option<String>,
    file: Option<String>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({"error": message.into()}))).into_response()
}

async fn next_comparison(State(st): State<Arc<ServerState>>, Query(q): Query<NextQuery>) -> Response {
    let Some(annotator) = q.annotator.filter(|a| !a.trim().is_empty()) else {
        return error(StatusCode::BAD_REQUEST, "missing annotator");
    };
    let files: Vec<&ComparisonFile> = match &q.file {
        Some(id) => match st.files.iter().find(|f| &f.id == id) {
            Some(f) => vec![f],
            None => return error(StatusCode::NOT_FOUND, format!("unknown file {id}")),
        },
        None => st.files.iter().collect(),
    };
    let snapshot = st.snapshot.read().unwrap().clone();
    let voted: HashSet<&str> = snapshot
        .iter()
        .filter(|v| v.voter == annotator)
        .map(|v| v.comparison_id.as_str())
        .collect();
    for f in files {
        if let Some((i, c)) = f
            .comparisons
            .iter()
            .enumerate()
            .find(|(_, c)| !voted.contains(c.comparison_id.as_str()))
        {
            return Json(c.payload(i + 1, f.comparisons.len())).into_response();
        }
    }
    StatusCode::NO_CONTENT.into_response()
}

#[derive(Deserialize)]
struct VoteBody {
    comparison_id: String,
    annotator: String,
    choice: String,
}

async fn post_vote(State(st): State<Arc<ServerState>>, body: Option<Json<VoteBody>>) -> Response {
    let Some(Json(body)) = body else {
        return error(StatusCode::BAD_REQUEST, "expected {comparison_id, annotator, choice}");
    };
    let Ok(choice) = body.choice.parse::<JudgeVote>() else {
        return error(StatusCode::BAD_REQUEST, "choice must be first, second or tie");
    };
    if body.annotator.trim().is_empty() || body.annotator == JUDGE_VOTER {
        return error(StatusCode::BAD_REQUEST, "invalid annotator id");
    }
    if !st.by_id.contains_key(&body.comparison_id) {
        return error(StatusCode::NOT_FOUND, "unknown comparison");
    }
    let vote = Vote {
        comparison_id: body.comparison_id,
        voter: body.annotator,
        choice,
        timestamp: now_secs(),
    };
    let mut store = st.store.lock().unwrap();
    match store.append(vote.clone()) {
        Ok(()) => {
            *st.snapshot.write().unwrap() = Arc::new(store.votes().to_vec());
            (StatusCode::CREATED, Json(vote)).into_response()
        }
        Err(PrefError::Duplicate { .. }) => error(StatusCode::CONFLICT, "already voted"),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn results(State(st): State<Arc<ServerState>>) -> Response {
    let snapshot = st.snapshot.read().unwrap().clone();
    let mut votes: Vec<Vote> = snapshot.to_vec();
    votes.extend(st.extra_votes.iter().cloned());
    let all: Vec<Comparison> = st.files.iter().flat_map(|f| f.comparisons.iter().cloned()).collect();
    match aggregate(&votes, &all) {
        Ok(s) => Json(s).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

const PLACEHOLDER_PAGE: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>noiseforge annotation</title></head>\n<body><p>No UI bundle is installed. The JSON API is available under <code>/api/</code>.</p></body></html>\n";

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json" | "map") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        Some("woff2") => "font/woff2",
        _ => "application/octet-stream",
    }
}

async fn serve_file(path: PathBuf) -> Response {
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn index_page(State(st): State<Arc<ServerState>>) -> Response {
    match &st.assets {
        Some(dir) if dir.join("index.html").is_file() => serve_file(dir.join("index.html")).await,
        _ => ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], PLACEHOLDER_PAGE).into_response(),
    }
}

async fn asset(State(st): State<Arc<ServerState>>, axum::extract::Path(rel): axum::extract::Path<String>) -> Response {
    let Some(dir) = &st.assets else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let rel = Path::new(&rel);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return StatusCode::NOT_FOUND.into_response();
    }
    serve_file(dir.join("assets").join(rel)).await
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LangCode;
    use crate::llm::ScriptedCompleter;

    pub(crate) fn mock_sets(n: usize) -> BTreeMap<Method, Vec<CleanedRow>> {
        Method::ALL
            .iter()
            .map(|&m| {
                let rows = (0..n as u64)
                    .map(|id| CleanedRow {
                        id,
                        src_lang: LangCode::fr(),
                        tgt_lang: LangCode::en(),
                        src: format!("source {id}"),
                        tgt: format!("noisy {id}"),
                        method: m,
                        cleaned_tgt: format!("{} {id}", m.label()),
                        similarity: 0.9,
                        attempts: 1,
                        accepted: true,
                        fallback: false,
                    })
                    .collect();
                (m, rows)
            })
            .collect()
    }

    #[test]
    fn three_files_seeded() {
        let sets = mock_sets(150);
        let files = build_comparisons(&sets, 100, 7, false).unwrap();
        assert_eq!(files.len(), 3);
        assert!(files.iter().all(|f| f.comparisons.len() == 100));
        assert_eq!(files, build_comparisons(&sets, 100, 7, false).unwrap());
        assert_ne!(files, build_comparisons(&sets, 100, 8, false).unwrap());
        assert_eq!(build_comparisons(&sets, 10, 7, true).unwrap().len(), 6);
        assert!(build_comparisons(&sets, 0, 7, false).unwrap().iter().all(|f| f.comparisons.is_empty()));
        assert!(matches!(build_comparisons(&sets, 151, 7, false), Err(PrefError::TooMany { .. })));
    }

    #[test]
    fn payload_is_blind() {
        let files = build_comparisons(&mock_sets(20), 20, 1, false).unwrap();
        for f in &files {
            assert!(!f.id.contains("lingual") && !f.id.contains("translation"));
            for (i, c) in f.comparisons.iter().enumerate() {
                let v = serde_json::to_value(c.payload(i + 1, 20)).unwrap();
                let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
                assert_eq!(keys.len(), 7);
                for k in ["method", "pair", "pair_key", "file", "sample_id"] {
                    assert!(!keys.iter().any(|x| x.as_str() == k));
                }
                for m in Method::ALL {
                    assert!(!v.to_string().contains(m.as_str()));
                }
            }
        }
    }

    #[test]
    fn judge_and_aggregate() {
        let files = build_comparisons(&mock_sets(10), 10, 3, false).unwrap();
        let comps = &files[0].comparisons;
        let judge = ScriptedCompleter::new(std::iter::repeat_n("3", 9).chain(["garbage"]));
        let run = judge_all(comps, &JudgeTemplate::builtin(), &judge, &LlmParams::default());
        assert_eq!(run.votes.len(), 9);
        assert_eq!(run.abstentions.len(), 1);
        let s = aggregate(&run.votes, comps).unwrap();
        assert_eq!(s.pairs.len(), 1);
        assert_eq!(s.pairs[0].overall.tie_pct, 100.0);
        assert_eq!(s.pairs[0].by_class["judge"].pooled.total, 9);
    }

    #[test]
    fn first_votes_credit_position_a() {
        let files = build_comparisons(&mock_sets(40), 40, 11, false).unwrap();
        let comps = &files[0].comparisons;
        let votes: Vec<Vote> = comps
            .iter()
            .map(|c| Vote {
                comparison_id: c.comparison_id.clone(),
                voter: "ann".into(),
                choice: if c.a.method == Method::Bilingual { JudgeVote::First } else { JudgeVote::Second },
                timestamp: 0,
            })
            .collect();
        let s = aggregate(&votes, comps).unwrap();
        let p = &s.pairs[0];
        assert_eq!(p.first_method, Method::Bilingual);
        assert_eq!(p.overall.first_pct, 100.0);
        let mut rev = votes.clone();
        rev.reverse();
        assert_eq!(aggregate(&rev, comps).unwrap(), s);
        let orphan = Vote {
            comparison_id: "nope".into(),
            ..votes[0].clone()
        };
        assert!(matches!(aggregate(&[orphan], comps), Err(PrefError::Orphan(_))));
    }

    #[test]
    fn store_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("votes.jsonl");
        let mut s = VoteStore::open(&path).unwrap();
        for i in 0..10 {
            s.append(Vote {
                comparison_id: format!("c{i}"),
                voter: "a".into(),
                choice: JudgeVote::Tie,
                timestamp: 1,
            })
            .unwrap();
        }
        let dup = s.votes()[0].clone();
        assert!(matches!(s.append(dup), Err(PrefError::Duplicate { .. })));
        s.checkpoint().unwrap();
        let s2 = VoteStore::open(&path).unwrap();
        assert_eq!(s2.votes().len(), 10);
        fs::write(&path, "{\"broken\n").unwrap();
        assert!(matches!(VoteStore::open(&path), Err(PrefError::Corrupt { .. })));
    }
}
