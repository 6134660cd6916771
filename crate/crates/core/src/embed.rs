//! Skip-gram word embeddings with negative sampling, trained by stochastic
//! gradient descent over prepared token streams.
//!
//! Two execution modes. With `workers = 1` training is fully deterministic:
//! a fixed seed yields a byte-identical model. With `workers > 1` (and the
//! `parallel` feature) workers update the shared matrices without mutual
//! exclusion; occasional lost updates are tolerated and only the accuracy
//! contract holds.

use std::cell::Cell;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{TokenStream, Vocabulary};
use crate::seed::derive_seed;
use crate::stats::{log_logistic, logistic};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("unknown token {token:?}; nearest spellings: {suggestions:?}")]
    UnknownToken { token: String, suggestions: Vec<String> },
    #[error("non-finite loss at epoch {epoch}, document {doc}: diverged (try a lower learning rate)")]
    NonFiniteLoss { epoch: usize, doc: usize },
    #[error("model file {path}: {detail}")]
    BadModelFile { path: String, detail: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path, source: std::io::Error) -> EmbedError {
    EmbedError::Io { path: path.display().to_string(), source }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// 1 = deterministic; >1 = lock-free workers (needs `parallel`).
    pub workers: usize,
    /// Frequent-word subsampling threshold; off by default.
    pub subsample: Option<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            dim: 512,
            window: 7,
            negatives: 15,
            epochs: 30,
            learning_rate: 0.025,
            seed: 1,
            workers: 1,
            subsample: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dim < 1 || self.window < 1 || self.negatives < 1 || self.epochs < 1 {
            return Err(EmbedError::Config(
                "dim, window, negatives, and epochs must all be at least 1".to_string(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(EmbedError::Config("learning rate must be positive".to_string()));
        }
        if self.workers < 1 {
            return Err(EmbedError::Config("workers must be at least 1".to_string()));
        }
        Ok(())
    }
}

/// Unigram sampler with probabilities proportional to count^(3/4).
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
}

/// Build the 3/4-power unigram distribution over vocabulary indices.
pub fn build_sampler(vocab: &Vocabulary) -> Result<NegativeSampler, EmbedError> {
    if vocab.is_empty() {
        return Err(EmbedError::EmptyVocabulary);
    }
    let weights: Vec<f64> = vocab.counts().iter().map(|&c| (c as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w / total;
        cumulative.push(acc);
    }
    *cumulative.last_mut().expect("non-empty") = 1.0;
    Ok(NegativeSampler { cumulative })
}

impl NegativeSampler {
    /// Exact sampling probability of index `i`.
    pub fn probability(&self, i: usize) -> f64 {
        let prev = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        self.cumulative[i] - prev
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }
}

/// Loss and gradients for one (center, context, negatives) configuration.
#[derive(Debug, Clone)]
pub struct PairObjective {
    pub loss: f64,
    /// Gradient of the loss w.r.t. the center's input vector.
    pub center_grad: Vec<f64>,
    /// Gradients w.r.t. touched output vectors, accumulated per index,
    /// sorted by index.
    pub output_grads: Vec<(usize, Vec<f64>)>,
}

/// Evaluate the SGNS objective
/// `−log σ(u_ctx·v) − Σ_neg log σ(−u_neg·v)` and its gradients.
pub fn pair_objective(
    model: &EmbeddingModel,
    center: usize,
    context: usize,
    negatives: &[usize],
) -> PairObjective {
    let dim = model.dim;
    let v = &model.input[center * dim..(center + 1) * dim];
    let mut center_grad = vec![0.0; dim];
    let mut by_output: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut loss = 0.0;

    let mut accumulate = |target: usize, label: f64, loss: &mut f64, center_grad: &mut [f64]| {
        let u = &model.output[target * dim..(target + 1) * dim];
        let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        *loss -= if label > 0.5 { log_logistic(dot) } else { log_logistic(-dot) };
        // d loss / d dot = σ(dot) − label
        let g = logistic(dot) - label;
        for (cg, ui) in center_grad.iter_mut().zip(u) {
            *cg += g * ui;
        }
        let entry = by_output.entry(target).or_insert_with(|| vec![0.0; dim]);
        for (og, vi) in entry.iter_mut().zip(v) {
            *og += g * vi;
        }
    };

    accumulate(context, 1.0, &mut loss, &mut center_grad);
    for &neg in negatives {
        accumulate(neg, 0.0, &mut loss, &mut center_grad);
    }

    let mut output_grads: Vec<(usize, Vec<f64>)> = by_output.into_iter().collect();
    output_grads.sort_by_key(|&(i, _)| i);
    PairObjective { loss, center_grad, output_grads }
}

/// Shared-parameter access; one implementation per execution mode.
trait Params {
    fn get(&self, i: usize) -> f64;
    fn add(&self, i: usize, delta: f64);
}

struct CellParams<'a>(&'a [Cell<f64>]);

impl Params for CellParams<'_> {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        self.0[i].get()
    }
    #[inline]
    fn add(&self, i: usize, delta: f64) {
        self.0[i].set(self.0[i].get() + delta);
    }
}

#[cfg(feature = "parallel")]
struct AtomicParams<'a>(&'a [std::sync::atomic::AtomicU64]);

#[cfg(feature = "parallel")]
impl Params for AtomicParams<'_> {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(std::sync::atomic::Ordering::Relaxed))
    }
    #[inline]
    fn add(&self, i: usize, delta: f64) {
        // Plain read-modify-write; concurrent updates may be lost.
        let next = self.get(i) + delta;
        self.0[i].store(next.to_bits(), std::sync::atomic::Ordering::Relaxed);
    }
}

/// One SGD step for a (center, context) pair. Returns the pair loss.
fn sgns_step<P: Params>(
    input: &P,
    output: &P,
    dim: usize,
    center: usize,
    context: usize,
    negatives: &[usize],
    alpha: f64,
    center_delta: &mut [f64],
) -> f64 {
    let ci = center * dim;
    center_delta.fill(0.0);
    let mut loss = 0.0;

    let one = |target: usize, label: f64, loss: &mut f64, center_delta: &mut [f64]| {
        let oi = target * dim;
        let mut dot = 0.0;
        for d in 0..dim {
            dot += input.get(ci + d) * output.get(oi + d);
        }
        *loss -= if label > 0.5 { log_logistic(dot) } else { log_logistic(-dot) };
        let g = (label - logistic(dot)) * alpha;
        for d in 0..dim {
            center_delta[d] += g * output.get(oi + d);
        }
        for d in 0..dim {
            output.add(oi + d, g * input.get(ci + d));
        }
    };

    one(context, 1.0, &mut loss, center_delta);
    for &neg in negatives {
        one(neg, 0.0, &mut loss, center_delta);
    }
    for d in 0..dim {
        input.add(ci + d, center_delta[d]);
    }
    loss
}

/// A trained embedding: input (word) and output (context) matrices over a
/// token list, plus the config that produced them.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    pub tokens: Vec<String>,
    index: HashMap<String, usize>,
    pub dim: usize,
    /// Row-major V×D word representations.
    pub input: Vec<f64>,
    /// Row-major V×D context representations.
    pub output: Vec<f64>,
    pub config: TrainingConfig,
    /// Smoothed training loss recorded at the end of each epoch.
    pub epoch_loss: Vec<f64>,
}

impl EmbeddingModel {
    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn input_vector(&self, i: usize) -> &[f64] {
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    fn resolve(&self, token: &str) -> Result<usize, EmbedError> {
        self.index_of(token).ok_or_else(|| EmbedError::UnknownToken {
            token: token.to_string(),
            suggestions: self.nearest_spellings(token, 3),
        })
    }

    fn nearest_spellings(&self, token: &str, n: usize) -> Vec<String> {
        let mut scored: Vec<(usize, &String)> =
            self.tokens.iter().map(|t| (levenshtein(token, t), t)).collect();
        scored.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        scored.into_iter().take(n).map(|(_, t)| t.clone()).collect()
    }
}

/// Cosine similarity of the input vectors of two tokens.
pub fn cosine(model: &EmbeddingModel, a: &str, b: &str) -> Result<f64, EmbedError> {
    let ia = model.resolve(a)?;
    let ib = model.resolve(b)?;
    Ok(crate::stats::cosine(model.input_vector(ia), model.input_vector(ib)))
}

/// Top-n tokens by cosine to `token` over input vectors, excluding the
/// query itself. Ties break by token order.
pub fn nearest(model: &EmbeddingModel, token: &str, n: usize) -> Result<Vec<(String, f64)>, EmbedError> {
    let qi = model.resolve(token)?;
    let q = model.input_vector(qi);
    let mut scored: Vec<(String, f64)> = (0..model.vocab_size())
        .filter(|&i| i != qi)
        .map(|i| (model.tokens[i].clone(), crate::stats::cosine(q, model.input_vector(i))))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(n);
    Ok(scored)
}

struct DocBatch {
    /// Token indices per document, vocabulary lookups already applied.
    docs: Vec<Vec<usize>>,
}

fn index_streams(streams: &[TokenStream], vocab: &Vocabulary) -> DocBatch {
    let docs = streams
        .iter()
        .map(|s| s.tokens.iter().filter_map(|t| vocab.index_of(t)).collect())
        .collect();
    DocBatch { docs }
}

/// Train a model over the streams. See the module docs for the two
/// execution modes.
pub fn train(
    streams: &[TokenStream],
    vocab: &Vocabulary,
    config: &TrainingConfig,
) -> Result<EmbeddingModel, EmbedError> {
    config.validate()?;
    let sampler = build_sampler(vocab)?;
    let batch = index_streams(streams, vocab);
    let v = vocab.len();
    let dim = config.dim;

    // Input rows uniform in [−0.5/D, +0.5/D]; output rows zero.
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "embed-init", 0));
    let mut input = vec![0.0f64; v * dim];
    for x in input.iter_mut() {
        *x = (init_rng.random::<f64>() - 0.5) / dim as f64;
    }
    let mut output = vec![0.0f64; v * dim];

    let keep_prob = subsample_table(vocab, config.subsample);

    let epoch_loss = if config.workers <= 1 {
        train_single(&mut input, &mut output, &batch, &sampler, config, &keep_prob)?
    } else {
        train_hogwild(&mut input, &mut output, &batch, &sampler, config, &keep_prob)?
    };

    let index = vocab
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(EmbeddingModel {
        tokens: vocab.tokens().to_vec(),
        index,
        dim,
        input,
        output,
        config: config.clone(),
        epoch_loss,
    })
}

/// Per-index keep probability under frequent-word subsampling; None = keep all.
fn subsample_table(vocab: &Vocabulary, threshold: Option<f64>) -> Option<Vec<f64>> {
    let t = threshold?;
    let total = vocab.total_count() as f64;
    Some(
        vocab
            .counts()
            .iter()
            .map(|&c| {
                let f = c as f64 / total;
                (((f / t).sqrt() + 1.0) * t / f).min(1.0)
            })
            .collect(),
    )
}

struct WorkerOutcome {
    ema_per_epoch: Vec<f64>,
    error: Option<(usize, usize)>,
}

/// The per-worker training loop, shared by both modes.
#[allow(clippy::too_many_arguments)]
fn worker_loop<P: Params>(
    input: &P,
    output: &P,
    docs: &[(usize, &[usize])],
    sampler: &NegativeSampler,
    config: &TrainingConfig,
    keep_prob: Option<&[f64]>,
    rng_seed: u64,
) -> WorkerOutcome {
    let dim = config.dim;
    let total_positions: u64 =
        config.epochs as u64 * docs.iter().map(|(_, d)| d.len() as u64).sum::<u64>();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut center_delta = vec![0.0; dim];
    let mut negatives = Vec::with_capacity(config.negatives);
    let mut kept: Vec<usize> = Vec::new();

    let mut done: u64 = 0;
    let mut ema = f64::NAN;
    let mut ema_per_epoch = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        for (doc_pos, doc) in docs {
            kept.clear();
            match keep_prob {
                None => kept.extend_from_slice(doc),
                Some(table) => {
                    for &w in doc.iter() {
                        if rng.random::<f64>() < table[w] {
                            kept.push(w);
                        }
                    }
                }
            }
            done += doc.len() as u64;
            let alpha_scale = (1.0 - done as f64 / total_positions.max(1) as f64).max(1e-4);
            let alpha = config.learning_rate * alpha_scale;
            for pos in 0..kept.len() {
                let center = kept[pos];
                let radius = rng.random_range(1..=config.window);
                let start = pos.saturating_sub(radius);
                let stop = (pos + radius + 1).min(kept.len());
                for ctx_pos in start..stop {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = kept[ctx_pos];
                    negatives.clear();
                    for _ in 0..config.negatives {
                        let neg = sampler.sample(&mut rng);
                        if neg != context {
                            negatives.push(neg);
                        }
                    }
                    let loss =
                        sgns_step(input, output, dim, center, context, &negatives, alpha, &mut center_delta);
                    if !loss.is_finite() {
                        return WorkerOutcome { ema_per_epoch, error: Some((epoch, *doc_pos)) };
                    }
                    ema = if ema.is_nan() { loss } else { 0.999 * ema + 0.001 * loss };
                }
            }
        }
        ema_per_epoch.push(ema);
    }
    WorkerOutcome { ema_per_epoch, error: None }
}

fn train_single(
    input: &mut [f64],
    output: &mut [f64],
    batch: &DocBatch,
    sampler: &NegativeSampler,
    config: &TrainingConfig,
    keep_prob: &Option<Vec<f64>>,
) -> Result<Vec<f64>, EmbedError> {
    // Interior mutability lets one code path serve both modes; with a
    // single thread Cell compiles to plain loads and stores.
    let input_cells = Cell::from_mut(input).as_slice_of_cells();
    let output_cells = Cell::from_mut(output).as_slice_of_cells();
    let docs: Vec<(usize, &[usize])> =
        batch.docs.iter().enumerate().map(|(i, d)| (i, d.as_slice())).collect();
    let outcome = worker_loop(
        &CellParams(input_cells),
        &CellParams(output_cells),
        &docs,
        sampler,
        config,
        keep_prob.as_deref(),
        derive_seed(config.seed, "embed-train", 0),
    );
    if let Some((epoch, doc)) = outcome.error {
        return Err(EmbedError::NonFiniteLoss { epoch, doc });
    }
    Ok(outcome.ema_per_epoch)
}

#[cfg(feature = "parallel")]
fn train_hogwild(
    input: &mut [f64],
    output: &mut [f64],
    batch: &DocBatch,
    sampler: &NegativeSampler,
    config: &TrainingConfig,
    keep_prob: &Option<Vec<f64>>,
) -> Result<Vec<f64>, EmbedError> {
    use std::sync::atomic::AtomicU64;

    let input_atomic: Vec<AtomicU64> = input.iter().map(|&x| AtomicU64::new(x.to_bits())).collect();
    let output_atomic: Vec<AtomicU64> = output.iter().map(|&x| AtomicU64::new(x.to_bits())).collect();

    let workers = config.workers;
    let shards: Vec<Vec<(usize, &[usize])>> = (0..workers)
        .map(|w| {
            batch
                .docs
                .iter()
                .enumerate()
                .filter(|(i, _)| i % workers == w)
                .map(|(i, d)| (i, d.as_slice()))
                .collect()
        })
        .collect();

    let outcomes: Vec<WorkerOutcome> = {
        let input_ref = &input_atomic;
        let output_ref = &output_atomic;
        crate::exec::map_indices(workers, move |w| {
            worker_loop(
                &AtomicParams(input_ref),
                &AtomicParams(output_ref),
                &shards[w],
                sampler,
                config,
                keep_prob.as_deref(),
                derive_seed(config.seed, "embed-train", w as u64),
            )
        })
    };

    for outcome in &outcomes {
        if let Some((epoch, doc)) = outcome.error {
            return Err(EmbedError::NonFiniteLoss { epoch, doc });
        }
    }
    for (dst, a) in input.iter_mut().zip(&input_atomic) {
        *dst = f64::from_bits(a.load(std::sync::atomic::Ordering::Relaxed));
    }
    for (dst, a) in output.iter_mut().zip(&output_atomic) {
        *dst = f64::from_bits(a.load(std::sync::atomic::Ordering::Relaxed));
    }

    // Average the per-worker loss traces epoch by epoch.
    let epochs = config.epochs;
    let mut averaged = vec![0.0; epochs];
    for outcome in &outcomes {
        for (e, &l) in outcome.ema_per_epoch.iter().enumerate() {
            averaged[e] += l / outcomes.len() as f64;
        }
    }
    Ok(averaged)
}

#[cfg(not(feature = "parallel"))]
fn train_hogwild(
    input: &mut [f64],
    output: &mut [f64],
    batch: &DocBatch,
    sampler: &NegativeSampler,
    config: &TrainingConfig,
    keep_prob: &Option<Vec<f64>>,
) -> Result<Vec<f64>, EmbedError> {
    // Without the parallel feature, fast mode degrades to the sequential path.
    train_single(input, output, batch, sampler, config, keep_prob)
}

const MODEL_MAGIC: &[u8; 8] = b"DSEMBED\0";
const MODEL_VERSION: u32 = 1;

/// Save the model: a binary file (header, then both matrices as row-major
/// little-endian f32) plus a `.vocab` text sidecar with one token per line.
pub fn save_model(model: &EmbeddingModel, path: &Path) -> Result<(), EmbedError> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let werr = |e| io_err(path, e);
    out.write_all(MODEL_MAGIC).map_err(werr)?;
    out.write_all(&MODEL_VERSION.to_le_bytes()).map_err(werr)?;
    out.write_all(&(model.vocab_size() as u64).to_le_bytes()).map_err(werr)?;
    out.write_all(&(model.dim as u64).to_le_bytes()).map_err(werr)?;
    let cfg = &model.config;
    for v in [cfg.window as u64, cfg.negatives as u64, cfg.epochs as u64, cfg.seed, cfg.workers as u64] {
        out.write_all(&v.to_le_bytes()).map_err(werr)?;
    }
    out.write_all(&cfg.learning_rate.to_le_bytes()).map_err(werr)?;
    out.write_all(&cfg.subsample.unwrap_or(f64::NAN).to_le_bytes()).map_err(werr)?;
    for matrix in [&model.input, &model.output] {
        for &x in matrix.iter() {
            out.write_all(&(x as f32).to_le_bytes()).map_err(werr)?;
        }
    }
    drop(out);

    let sidecar = sidecar_path(path);
    let mut vout = BufWriter::new(File::create(&sidecar).map_err(|e| io_err(&sidecar, e))?);
    for token in &model.tokens {
        writeln!(vout, "{token}").map_err(|e| io_err(&sidecar, e))?;
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<EmbeddingModel, EmbedError> {
    let mut file = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let rerr = |e| io_err(path, e);
    let bad = |detail: &str| EmbedError::BadModelFile {
        path: path.display().to_string(),
        detail: detail.to_string(),
    };

    let mut magic = [0u8; 8];
    file.read_exact(&mut magic).map_err(rerr)?;
    if &magic != MODEL_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut u32buf = [0u8; 4];
    file.read_exact(&mut u32buf).map_err(rerr)?;
    if u32::from_le_bytes(u32buf) != MODEL_VERSION {
        return Err(bad("unsupported version"));
    }
    let mut u64buf = [0u8; 8];
    let mut read_u64 = |file: &mut BufReader<File>| -> Result<u64, EmbedError> {
        file.read_exact(&mut u64buf).map_err(rerr)?;
        Ok(u64::from_le_bytes(u64buf))
    };
    let v = read_u64(&mut file)? as usize;
    let dim = read_u64(&mut file)? as usize;
    let window = read_u64(&mut file)? as usize;
    let negatives = read_u64(&mut file)? as usize;
    let epochs = read_u64(&mut file)? as usize;
    let seed = read_u64(&mut file)?;
    let workers = read_u64(&mut file)? as usize;
    let mut f64buf = [0u8; 8];
    file.read_exact(&mut f64buf).map_err(rerr)?;
    let learning_rate = f64::from_le_bytes(f64buf);
    file.read_exact(&mut f64buf).map_err(rerr)?;
    let subsample_raw = f64::from_le_bytes(f64buf);

    let read_matrix = |file: &mut BufReader<File>| -> Result<Vec<f64>, EmbedError> {
        let mut data = vec![0.0f64; v * dim];
        let mut f32buf = [0u8; 4];
        for x in data.iter_mut() {
            file.read_exact(&mut f32buf).map_err(rerr)?;
            *x = f32::from_le_bytes(f32buf) as f64;
        }
        Ok(data)
    };
    let input = read_matrix(&mut file)?;
    let output = read_matrix(&mut file)?;

    let sidecar = sidecar_path(path);
    let text = std::fs::read_to_string(&sidecar).map_err(|e| io_err(&sidecar, e))?;
    let tokens: Vec<String> = text.lines().map(str::to_string).collect();
    if tokens.len() != v {
        return Err(bad("sidecar token count does not match header"));
    }
    let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();

    Ok(EmbeddingModel {
        tokens,
        index,
        dim,
        input,
        output,
        config: TrainingConfig {
            dim,
            window,
            negatives,
            epochs,
            learning_rate,
            seed,
            workers,
            subsample: if subsample_raw.is_nan() { None } else { Some(subsample_raw) },
        },
        epoch_loss: Vec::new(),
    })
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".vocab");
    os.into()
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocabulary;

    fn vocab_from(tokens: &[&str]) -> Vocabulary {
        let mut streams = vec![TokenStream {
            doc_id: "d".to_string(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }];
        build_vocabulary(&mut streams, 1)
    }

    fn zero_model(v: usize, dim: usize) -> EmbeddingModel {
        let tokens: Vec<String> = (0..v).map(|i| format!("t{i}")).collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        EmbeddingModel {
            tokens,
            index,
            dim,
            input: vec![0.0; v * dim],
            output: vec![0.0; v * dim],
            config: TrainingConfig::default(),
            epoch_loss: Vec::new(),
        }
    }

    #[test]
    fn sampler_matches_exact_three_quarter_power() {
        // counts {a:16, b:1} → weights {8, 1} → P(a) = 8/9
        let mut streams = vec![TokenStream {
            doc_id: "d".into(),
            tokens: std::iter::repeat_n("a".to_string(), 16).chain(["b".to_string()]).collect(),
        }];
        let vocab = build_vocabulary(&mut streams, 1);
        let sampler = build_sampler(&vocab).unwrap();
        let ia = vocab.index_of("a").unwrap();
        let ib = vocab.index_of("b").unwrap();
        assert!((sampler.probability(ia) - 8.0 / 9.0).abs() < 1e-12);
        assert!((sampler.probability(ib) - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn sampler_degenerate_single_word() {
        let vocab = vocab_from(&["only"]);
        let sampler = build_sampler(&vocab).unwrap();
        assert!((sampler.probability(0) - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(sampler.sample(&mut rng), 0);
        }
    }

    #[test]
    fn sampler_rejects_empty_vocabulary() {
        let vocab = Vocabulary::default();
        assert!(matches!(build_sampler(&vocab), Err(EmbedError::EmptyVocabulary)));
    }

    #[test]
    fn zero_model_loss_is_log2_per_term() {
        let model = zero_model(20, 8);
        let negatives: Vec<usize> = (2..17).collect();
        let obj = pair_objective(&model, 0, 1, &negatives);
        assert!((obj.loss - 16.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn saturated_positive_leaves_negative_terms() {
        let mut model = zero_model(20, 4);
        // push u·v far positive for the (0,1) pair
        for d in 0..4 {
            model.input[d] = 40.0;
            model.output[4 + d] = 40.0;
        }
        let negatives: Vec<usize> = (2..17).collect();
        let obj = pair_objective(&model, 0, 1, &negatives);
        assert!((obj.loss - 15.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn gradients_match_finite_differences_small() {
        let dim = 8;
        let v = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut model = zero_model(v, dim);
        for x in model.input.iter_mut().chain(model.output.iter_mut()) {
            *x = rng.random::<f64>() - 0.5;
        }
        let negatives = vec![3, 4, 5, 4];
        let (center, context) = (0, 1);
        let obj = pair_objective(&model, center, context, &negatives);
        let h = 1e-6;
        for d in 0..dim {
            let mut plus = model.clone();
            plus.input[center * dim + d] += h;
            let mut minus = model.clone();
            minus.input[center * dim + d] -= h;
            let fd = (pair_objective(&plus, center, context, &negatives).loss
                - pair_objective(&minus, center, context, &negatives).loss)
                / (2.0 * h);
            let rel = (obj.center_grad[d] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel < 1e-5, "center dim {d}: analytic {} vs fd {fd}", obj.center_grad[d]);
        }
        for (target, grad) in &obj.output_grads {
            for d in 0..dim {
                let mut plus = model.clone();
                plus.output[target * dim + d] += h;
                let mut minus = model.clone();
                minus.output[target * dim + d] -= h;
                let fd = (pair_objective(&plus, center, context, &negatives).loss
                    - pair_objective(&minus, center, context, &negatives).loss)
                    / (2.0 * h);
                let rel = (grad[d] - fd).abs() / fd.abs().max(1e-8);
                assert!(rel < 1e-5, "output {target} dim {d}");
            }
        }
    }

    #[test]
    fn train_step_applies_pair_objective_gradients() {
        let dim = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut model = zero_model(10, dim);
        for x in model.input.iter_mut().chain(model.output.iter_mut()) {
            *x = rng.random::<f64>() - 0.5;
        }
        let negatives = vec![2, 3];
        let alpha = 0.05;
        let obj = pair_objective(&model, 0, 1, &negatives);

        let mut input = model.input.clone();
        let output = model.output.clone();
        let output_cells: Vec<Cell<f64>> = output.iter().map(|&x| Cell::new(x)).collect();
        let mut scratch = vec![0.0; dim];
        let loss = {
            let cells = Cell::from_mut(&mut input[..]).as_slice_of_cells();
            sgns_step(
                &CellParams(cells),
                &CellParams(&output_cells),
                dim,
                0,
                1,
                &negatives,
                alpha,
                &mut scratch,
            )
        };
        assert!((loss - obj.loss).abs() < 1e-12);
        for d in 0..dim {
            let expected = model.input[d] - alpha * obj.center_grad[d];
            assert!((input[d] - expected).abs() < 1e-12);
        }
        for (target, grad) in &obj.output_grads {
            for d in 0..dim {
                let expected = model.output[target * dim + d] - alpha * grad[d];
                assert!((output_cells[target * dim + d].get() - expected).abs() < 1e-12);
            }
        }
    }

    fn tiny_corpus() -> (Vec<TokenStream>, Vocabulary) {
        // Two co-occurrence blocks that never mix.
        let mut streams = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..60 {
            let topic = i % 2;
            let tokens: Vec<String> = (0..20)
                .map(|_| format!("w{}_{}", topic, rng.random_range(0..8)))
                .collect();
            streams.push(TokenStream { doc_id: format!("d{i}"), tokens });
        }
        let vocab = build_vocabulary(&mut streams, 1);
        (streams, vocab)
    }

    #[test]
    fn fixed_seed_single_worker_is_byte_identical() {
        let (streams, vocab) = tiny_corpus();
        let config = TrainingConfig {
            dim: 8,
            window: 3,
            negatives: 4,
            epochs: 2,
            learning_rate: 0.05,
            seed: 42,
            workers: 1,
            subsample: None,
        };
        let m1 = train(&streams, &vocab, &config).unwrap();
        let m2 = train(&streams, &vocab, &config).unwrap();
        assert_eq!(m1.input, m2.input);
        assert_eq!(m1.output, m2.output);
        assert_eq!(m1.epoch_loss, m2.epoch_loss);
    }

    #[test]
    fn training_separates_planted_topics() {
        let (streams, vocab) = tiny_corpus();
        let config = TrainingConfig {
            dim: 12,
            window: 3,
            negatives: 5,
            epochs: 8,
            learning_rate: 0.05,
            seed: 7,
            workers: 1,
            subsample: None,
        };
        let model = train(&streams, &vocab, &config).unwrap();
        let intra = cosine(&model, "w0_0", "w0_1").unwrap();
        let inter = cosine(&model, "w0_0", "w1_1").unwrap();
        assert!(intra > inter + 0.2, "intra {intra} vs inter {inter}");
        // smoothed loss improves over training
        assert!(model.epoch_loss.last().unwrap() < model.epoch_loss.first().unwrap());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let (streams, vocab) = tiny_corpus();
        let config = TrainingConfig { epochs: 0, ..TrainingConfig::default() };
        assert!(matches!(train(&streams, &vocab, &config), Err(EmbedError::Config(_))));
    }

    #[test]
    fn cosine_identities_and_unknown_tokens() {
        let (streams, vocab) = tiny_corpus();
        let config = TrainingConfig {
            dim: 8,
            window: 2,
            negatives: 3,
            epochs: 1,
            learning_rate: 0.05,
            seed: 1,
            workers: 1,
            subsample: None,
        };
        let model = train(&streams, &vocab, &config).unwrap();
        assert!((cosine(&model, "w0_0", "w0_0").unwrap() - 1.0).abs() < 1e-12);
        let err = cosine(&model, "w0_zz", "w0_0").unwrap_err();
        match err {
            EmbedError::UnknownToken { suggestions, .. } => {
                assert_eq!(suggestions.len(), 3);
                assert!(suggestions[0].starts_with("w0_"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn orthogonal_hand_set_vectors_have_zero_cosine() {
        let mut model = zero_model(2, 4);
        model.input[0] = 1.0; // t0 = e0
        model.input[5] = 2.0; // t1 = 2·e1
        assert_eq!(cosine(&model, "t0", "t1").unwrap(), 0.0);
    }

    #[test]
    fn nearest_basics_and_brute_force_agreement() {
        let (streams, vocab) = tiny_corpus();
        let config = TrainingConfig {
            dim: 8,
            window: 2,
            negatives: 3,
            epochs: 2,
            learning_rate: 0.05,
            seed: 3,
            workers: 1,
            subsample: None,
        };
        let model = train(&streams, &vocab, &config).unwrap();
        assert!(nearest(&model, "w0_0", 0).unwrap().is_empty());
        let top = nearest(&model, "w0_0", 5).unwrap();
        assert_eq!(top.len(), 5);
        // brute-force oracle over all tokens
        let mut expected: Vec<(String, f64)> = model
            .tokens
            .iter()
            .filter(|t| t.as_str() != "w0_0")
            .map(|t| (t.clone(), cosine(&model, "w0_0", t).unwrap()))
            .collect();
        expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        expected.truncate(5);
        assert_eq!(top, expected);
    }

    #[test]
    fn nearest_with_two_tokens_returns_the_other() {
        let mut model = zero_model(2, 3);
        model.input = vec![1.0, 0.0, 0.0, 0.5, 0.5, 0.0];
        let top = nearest(&model, "t0", 4).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].0, "t1");
    }

    #[test]
    fn model_file_roundtrip() {
        let (streams, vocab) = tiny_corpus();
        let config = TrainingConfig {
            dim: 4,
            window: 2,
            negatives: 2,
            epochs: 1,
            learning_rate: 0.05,
            seed: 9,
            workers: 1,
            subsample: None,
        };
        let model = train(&streams, &vocab, &config).unwrap();
        let dir = std::env::temp_dir().join(format!("embed_io_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.bin");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.tokens, model.tokens);
        assert_eq!(back.dim, model.dim);
        assert_eq!(back.config.window, model.config.window);
        for (a, b) in back.input.iter().zip(&model.input) {
            assert!((a - b).abs() <= (*b as f32).abs() as f64 * 1e-6 + 1e-9);
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("same", "same"), 0);
    }
}
