//! Corpus ingestion and normalization: tokenizing raw abstract records,
//! frequency filtering, acronym expansion, and pasting frequent adjacent
//! word pairs into single phrase tokens.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("zero unigram count for {token:?}: vocabulary is corrupted")]
    ZeroUnigramCount { token: String },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document {id:?} has year {year} outside [1900, 2100]")]
    YearOutOfRange { id: String, year: i32 },
    #[error("document {0:?} has an empty abstract")]
    EmptyAbstract(String),
    #[error("malformed line {line} in {what}: {detail}")]
    Malformed { what: String, line: usize, detail: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io { path: path.display().to_string(), source }
}

/// Where a document record came from; controls which fields feed the
/// embedding corpus by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    ArxivLike,
    WosLike,
    Synthetic,
}

/// One publication record as ingested from JSON-lines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub year: i32,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    pub venue_id: String,
    #[serde(default)]
    pub subject_categories: BTreeSet<String>,
    pub source: Source,
}

/// Check store-level invariants: unique ids, sane years, non-empty abstracts
/// for documents destined for embedding training.
pub fn validate_documents(docs: &[RawDocument], require_abstract: bool) -> Result<(), CorpusError> {
    let mut seen = HashSet::with_capacity(docs.len());
    for doc in docs {
        if !seen.insert(doc.id.as_str()) {
            return Err(CorpusError::DuplicateId(doc.id.clone()));
        }
        if !(1900..=2100).contains(&doc.year) {
            return Err(CorpusError::YearOutOfRange { id: doc.id.clone(), year: doc.year });
        }
        if require_abstract && doc.abstract_text.trim().is_empty() {
            return Err(CorpusError::EmptyAbstract(doc.id.clone()));
        }
    }
    Ok(())
}

/// Ordered, normalized tokens of one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub doc_id: String,
    pub tokens: Vec<String>,
}

/// Normalization settings. The defaults follow the token forms used
/// throughout the shipped acronym and phrase tables: lowercase, punctuation
/// stripped, hyphens split, underscores preserved, numbers kept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizeConfig {
    pub include_title: bool,
    pub include_abstract: bool,
    pub include_keywords: bool,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        NormalizeConfig { include_title: true, include_abstract: true, include_keywords: true }
    }
}

impl NormalizeConfig {
    /// Default field selection for a source. Abstract servers rarely carry
    /// curated keywords, so they are excluded for arxiv-like records.
    pub fn for_source(source: Source) -> Self {
        NormalizeConfig {
            include_title: true,
            include_abstract: true,
            include_keywords: source != Source::ArxivLike,
        }
    }
}

/// Normalize free text into tokens: lowercase, split on hyphens and any
/// punctuation other than underscores, drop apostrophes in place.
pub fn normalize_text(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '_' {
            for lower in ch.to_lowercase() {
                current.push(lower);
            }
        } else if ch == '\'' || ch == '\u{2019}' {
            // removed without splitting the word
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Tokenize one document, concatenating title, abstract, and keywords in
/// that order as selected by the config.
pub fn tokenize(doc: &RawDocument, cfg: &NormalizeConfig) -> TokenStream {
    let mut tokens = Vec::new();
    if cfg.include_title {
        tokens.extend(normalize_text(&doc.title));
    }
    if cfg.include_abstract {
        tokens.extend(normalize_text(&doc.abstract_text));
    }
    if cfg.include_keywords {
        for kw in &doc.keywords {
            tokens.extend(normalize_text(kw));
        }
    }
    TokenStream { doc_id: doc.id.clone(), tokens }
}

/// Tokenize a batch of documents. Output order follows input order.
pub fn tokenize_all(docs: &[RawDocument], cfg: &NormalizeConfig) -> Vec<TokenStream> {
    exec::map_slice(docs, |doc| tokenize(doc, cfg))
}

/// Drop documents with fewer than `min_tokens` tokens.
pub fn filter_short(streams: Vec<TokenStream>, min_tokens: usize) -> Vec<TokenStream> {
    streams.into_iter().filter(|s| s.tokens.len() >= min_tokens).collect()
}

/// Remove stopword tokens in place.
pub fn remove_stopwords(streams: &mut [TokenStream], stopwords: &HashSet<String>) {
    for stream in streams.iter_mut() {
        stream.tokens.retain(|t| !stopwords.contains(t));
    }
}

/// The stopword list shipped with the crate.
pub fn builtin_stopwords() -> HashSet<String> {
    include_str!("../data/stopwords.txt").lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect()
}

/// A frequency-filtered vocabulary with dense indices.
///
/// Indices are assigned by descending count, ties broken by token order, so
/// the mapping is a pure function of the corpus.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn count_of(&self, token: &str) -> Option<u64> {
        self.index_of(token).map(|i| self.counts[i])
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total token occurrences covered by the vocabulary.
    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Vocabulary {
        let mut entries: Vec<(String, u64)> =
            counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut vocab = Vocabulary::default();
        for (i, (token, count)) in entries.into_iter().enumerate() {
            vocab.index.insert(token.clone(), i);
            vocab.tokens.push(token);
            vocab.counts.push(count);
        }
        vocab
    }

    /// Write as TSV: token, index, count.
    pub fn write_tsv(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
        for (i, token) in self.tokens.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}", token, i, self.counts[i]).map_err(|e| io_err(path, e))?;
        }
        Ok(())
    }

    pub fn read_tsv(path: &Path) -> Result<Vocabulary, CorpusError> {
        let file = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
        let mut vocab = Vocabulary::default();
        for (lineno, line) in file.lines().enumerate() {
            let line = line.map_err(|e| io_err(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let token = parts.next().unwrap_or_default().to_string();
            let malformed = |detail: &str| CorpusError::Malformed {
                what: path.display().to_string(),
                line: lineno + 1,
                detail: detail.to_string(),
            };
            let index: usize = parts
                .next()
                .ok_or_else(|| malformed("missing index"))?
                .parse()
                .map_err(|_| malformed("bad index"))?;
            let count: u64 = parts
                .next()
                .ok_or_else(|| malformed("missing count"))?
                .parse()
                .map_err(|_| malformed("bad count"))?;
            if index != vocab.tokens.len() {
                return Err(malformed("indices must be dense and in order"));
            }
            vocab.index.insert(token.clone(), index);
            vocab.tokens.push(token);
            vocab.counts.push(count);
        }
        Ok(vocab)
    }
}

/// Count token frequencies, drop tokens below `min_count` from both the
/// vocabulary and the streams, and assign dense indices.
pub fn build_vocabulary(streams: &mut Vec<TokenStream>, min_count: u64) -> Vocabulary {
    // Sharded counting with an order-independent merge.
    let shards = exec::map_slice(streams.as_slice(), |stream| {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for token in &stream.tokens {
            *counts.entry(token.clone()).or_insert(0) += 1;
        }
        counts
    });
    let mut total: HashMap<String, u64> = HashMap::new();
    for shard in shards {
        for (token, c) in shard {
            *total.entry(token).or_insert(0) += c;
        }
    }
    let vocab = Vocabulary::from_counts(total, min_count);
    if min_count > 1 {
        for stream in streams.iter_mut() {
            stream.tokens.retain(|t| vocab.index.contains_key(t.as_str()));
        }
    }
    vocab
}

/// Collocation score of an adjacent pair: (count_ij − δ) / (count_i · count_j).
///
/// May be negative when the pair count falls below the discount δ.
pub fn score_bigram(count_ij: u64, count_i: u64, count_j: u64, delta: f64) -> Result<f64, CorpusError> {
    if count_i == 0 || count_j == 0 {
        return Err(CorpusError::ZeroUnigramCount { token: String::new() });
    }
    Ok((count_ij as f64 - delta) / (count_i as f64 * count_j as f64))
}

/// Scored adjacent pairs for one pasting pass.
///
/// Stored scores are scaled by the total corpus token count so that the
/// acceptance threshold operates on a size-independent quantity.
#[derive(Debug, Clone)]
pub struct PhraseTable {
    pub scores: HashMap<(String, String), f64>,
    pub delta: f64,
    pub threshold: f64,
}

impl PhraseTable {
    pub fn passes(&self, left: &str, right: &str) -> bool {
        self.scores
            .get(&(left.to_string(), right.to_string()))
            .is_some_and(|&s| s >= self.threshold)
    }
}

/// Count adjacent ordered pairs across all streams.
pub fn count_bigrams(streams: &[TokenStream]) -> HashMap<(String, String), u64> {
    let shards = exec::map_slice(streams, |stream| {
        let mut counts: HashMap<(String, String), u64> = HashMap::new();
        for pair in stream.tokens.windows(2) {
            *counts.entry((pair[0].clone(), pair[1].clone())).or_insert(0) += 1;
        }
        counts
    });
    let mut total: HashMap<(String, String), u64> = HashMap::new();
    for shard in shards {
        for (pair, c) in shard {
            *total.entry(pair).or_insert(0) += c;
        }
    }
    total
}

/// Build the scaled score table for the current streams and vocabulary.
pub fn score_pass(
    streams: &[TokenStream],
    vocab: &Vocabulary,
    delta: f64,
    threshold: f64,
) -> Result<PhraseTable, CorpusError> {
    let scale = vocab.total_count() as f64;
    let mut scores = HashMap::new();
    for ((left, right), count_ij) in count_bigrams(streams) {
        let (Some(ci), Some(cj)) = (vocab.count_of(&left), vocab.count_of(&right)) else {
            continue;
        };
        if ci == 0 || cj == 0 {
            return Err(CorpusError::ZeroUnigramCount { token: left });
        }
        let raw = score_bigram(count_ij, ci, cj, delta)?;
        scores.insert((left, right), raw * scale);
    }
    Ok(PhraseTable { scores, delta, threshold })
}

/// Phrase pasting settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhraseConfig {
    pub delta: f64,
    pub threshold: f64,
    pub passes: u32,
}

impl Default for PhraseConfig {
    fn default() -> Self {
        PhraseConfig { delta: 5.0, threshold: 50.0, passes: 3 }
    }
}

/// Outcome of one pasting pass.
#[derive(Debug, Clone, Copy)]
pub struct PassStats {
    pub pass: u32,
    pub pastes: u64,
}

/// Paste high-scoring adjacent pairs into underscore-joined tokens,
/// left to right, non-overlapping within one pass. The vocabulary is
/// rebuilt after every pass; repeated passes grow longer phrases.
pub fn paste_phrases(
    streams: &mut Vec<TokenStream>,
    mut vocab: Vocabulary,
    cfg: &PhraseConfig,
) -> Result<(Vocabulary, Vec<PassStats>), CorpusError> {
    let mut stats = Vec::new();
    for pass in 1..=cfg.passes {
        let table = score_pass(streams, &vocab, cfg.delta, cfg.threshold)?;
        let mut pastes = 0u64;
        for stream in streams.iter_mut() {
            let tokens = std::mem::take(&mut stream.tokens);
            let mut out = Vec::with_capacity(tokens.len());
            let mut i = 0;
            while i < tokens.len() {
                if i + 1 < tokens.len() && table.passes(&tokens[i], &tokens[i + 1]) {
                    out.push(format!("{}_{}", tokens[i], tokens[i + 1]));
                    pastes += 1;
                    i += 2;
                } else {
                    out.push(tokens[i].clone());
                    i += 1;
                }
            }
            stream.tokens = out;
        }
        vocab = build_vocabulary(streams, 1);
        stats.push(PassStats { pass, pastes });
        if pastes == 0 {
            break;
        }
    }
    Ok((vocab, stats))
}

/// Acronym-to-expansion table. Expansions use the underscore phrase form.
#[derive(Debug, Clone, Default)]
pub struct AcronymTable {
    entries: HashMap<String, String>,
}

impl AcronymTable {
    /// The table shipped with the crate.
    pub fn builtin() -> AcronymTable {
        AcronymTable::parse(include_str!("../data/acronyms.tsv")).expect("bundled table is valid")
    }

    pub fn parse(text: &str) -> Result<AcronymTable, CorpusError> {
        let mut entries = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(acronym), Some(expansion)) = (parts.next(), parts.next()) else {
                return Err(CorpusError::Malformed {
                    what: "acronym table".to_string(),
                    line: lineno + 1,
                    detail: "expected two tab-separated columns".to_string(),
                });
            };
            entries.insert(acronym.trim().to_string(), expansion.trim().to_string());
        }
        Ok(AcronymTable { entries })
    }

    pub fn load(path: &Path) -> Result<AcronymTable, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        AcronymTable::parse(&text)
    }

    pub fn expansion(&self, token: &str) -> Option<&str> {
        self.entries.get(token).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Replace every acronym token by its full-name phrase token.
pub fn expand_acronyms(streams: &mut [TokenStream], table: &AcronymTable) {
    for stream in streams.iter_mut() {
        for token in stream.tokens.iter_mut() {
            if let Some(expansion) = table.expansion(token) {
                *token = expansion.to_string();
            }
        }
    }
}

/// Read documents from JSON-lines, one record per line.
pub fn read_documents_jsonl(path: &Path) -> Result<Vec<RawDocument>, CorpusError> {
    let file = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut docs = Vec::new();
    for (lineno, line) in file.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            what: path.display().to_string(),
            line: lineno + 1,
            detail: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_documents_jsonl(path: &Path, docs: &[RawDocument]) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for doc in docs {
        let line = serde_json::to_string(doc).expect("document serializes");
        writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Write token streams as text, one document per line, with a `.ids`
/// sidecar carrying the document id for each line.
pub fn write_streams(path: &Path, streams: &[TokenStream]) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for stream in streams {
        writeln!(out, "{}", stream.tokens.join(" ")).map_err(|e| io_err(path, e))?;
    }
    let ids_path = sidecar_ids_path(path);
    let mut ids = BufWriter::new(File::create(&ids_path).map_err(|e| io_err(&ids_path, e))?);
    for stream in streams {
        writeln!(ids, "{}", stream.doc_id).map_err(|e| io_err(&ids_path, e))?;
    }
    Ok(())
}

pub fn read_streams(path: &Path) -> Result<Vec<TokenStream>, CorpusError> {
    let ids_path = sidecar_ids_path(path);
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let ids = std::fs::read_to_string(&ids_path).map_err(|e| io_err(&ids_path, e))?;
    let mut streams = Vec::new();
    for (line, id) in text.lines().zip(ids.lines()) {
        streams.push(TokenStream {
            doc_id: id.to_string(),
            tokens: line.split_whitespace().map(str::to_string).collect(),
        });
    }
    Ok(streams)
}

fn sidecar_ids_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".ids");
    os.into()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, title: &str, abstract_text: &str) -> RawDocument {
        RawDocument {
            id: id.to_string(),
            year: 2015,
            title: title.to_string(),
            abstract_text: abstract_text.to_string(),
            keywords: vec![],
            venue_id: "v1".to_string(),
            subject_categories: BTreeSet::new(),
            source: Source::Synthetic,
        }
    }

    fn stream(tokens: &[&str]) -> TokenStream {
        TokenStream { doc_id: "d".to_string(), tokens: tokens.iter().map(|t| t.to_string()).collect() }
    }

    #[test]
    fn tokenize_lowers_and_strips_punctuation() {
        let d = doc("a", "", "Deep Learning, in science!");
        let ts = tokenize(&d, &NormalizeConfig::default());
        assert_eq!(ts.tokens, vec!["deep", "learning", "in", "science"]);
    }

    #[test]
    fn tokenize_empty_input() {
        let d = doc("a", "", "");
        assert!(tokenize(&d, &NormalizeConfig::default()).tokens.is_empty());
    }

    #[test]
    fn tokenize_splits_hyphens() {
        let d = doc("a", "", "ANN-based model");
        let ts = tokenize(&d, &NormalizeConfig::default());
        assert_eq!(ts.tokens, vec!["ann", "based", "model"]);
    }

    #[test]
    fn tokenize_field_order_is_title_abstract_keywords() {
        let mut d = doc("a", "First Words", "then the abstract");
        d.keywords = vec!["key one".to_string(), "key-two".to_string()];
        let ts = tokenize(&d, &NormalizeConfig::default());
        assert_eq!(ts.tokens, vec!["first", "words", "then", "the", "abstract", "key", "one", "key", "two"]);
        let arxiv = NormalizeConfig::for_source(Source::ArxivLike);
        let ts = tokenize(&d, &arxiv);
        assert_eq!(ts.tokens, vec!["first", "words", "then", "the", "abstract"]);
    }

    #[test]
    fn filter_short_is_a_strict_boundary() {
        let long: Vec<&str> = std::iter::repeat_n("w", 15).collect();
        let short: Vec<&str> = std::iter::repeat_n("w", 14).collect();
        let kept = filter_short(vec![stream(&long), stream(&short)], 15);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].tokens.len(), 15);
        assert!(filter_short(vec![], 15).is_empty());
    }

    #[test]
    fn filter_short_is_idempotent() {
        let streams = vec![stream(&["a"; 20]), stream(&["b"; 15]), stream(&["c"; 3])];
        let once = filter_short(streams.clone(), 15);
        let twice = filter_short(once.clone(), 15);
        assert_eq!(once, twice);
    }

    #[test]
    fn vocabulary_min_count_boundary() {
        // 5 occurrences of "a", 4 of "b"
        let mut streams = vec![stream(&["a", "b", "a", "b", "a", "b", "a", "b", "a"])];
        let vocab = build_vocabulary(&mut streams, 5);
        assert_eq!(vocab.len(), 1);
        assert_eq!(vocab.count_of("a"), Some(5));
        assert_eq!(vocab.count_of("b"), None);
        assert_eq!(streams[0].tokens, vec!["a"; 5]);
    }

    #[test]
    fn vocabulary_counts_match_hand_count() {
        let mut streams =
            vec![stream(&["x", "y", "x", "z", "z", "z"]), stream(&["y", "x", "w", "x", "x", "x", "q", "q", "r", "r", "r", "s", "t", "u"])];
        let total: usize = streams.iter().map(|s| s.tokens.len()).sum();
        assert_eq!(total, 20);
        let vocab = build_vocabulary(&mut streams, 1);
        assert_eq!(vocab.count_of("x"), Some(6));
        assert_eq!(vocab.count_of("y"), Some(2));
        assert_eq!(vocab.count_of("z"), Some(3));
        assert_eq!(vocab.count_of("w"), Some(1));
        assert_eq!(vocab.total_count(), 20);
        // indices dense and ordered by count then token
        let mut counts: Vec<u64> = (0..vocab.len()).map(|i| vocab.count(i)).collect();
        let mut sorted = counts.clone();
        sorted.sort_by(|a, b| b.cmp(a));
        assert_eq!(counts, sorted);
        counts.dedup();
    }

    #[test]
    fn vocabulary_build_is_idempotent() {
        let mut streams = vec![stream(&["a", "a", "a", "b", "b", "c"])];
        let v1 = build_vocabulary(&mut streams, 2);
        let v2 = build_vocabulary(&mut streams, 2);
        assert_eq!(v1.tokens(), v2.tokens());
        assert_eq!(v1.counts(), v2.counts());
    }

    #[test]
    fn score_bigram_formula() {
        assert!((score_bigram(100, 1000, 2000, 5.0).unwrap() - 4.75e-5).abs() < 1e-18);
        assert_eq!(score_bigram(5, 10, 10, 5.0).unwrap(), 0.0);
        assert!((score_bigram(3, 10, 10, 5.0).unwrap() - -0.02).abs() < 1e-15);
        assert!(score_bigram(3, 0, 10, 5.0).is_err());
    }

    #[test]
    fn pasting_finds_planted_bigram() {
        // "neural networks" co-occurs often against a wide unique background,
        // so its size-scaled score clears the default threshold.
        let mut streams: Vec<TokenStream> = (0..30)
            .map(|i| {
                let mut tokens = vec!["neural".to_string(), "networks".to_string()];
                tokens.extend((0..60).map(|j| format!("filler{i}_{j}")));
                TokenStream { doc_id: format!("d{i}"), tokens }
            })
            .collect();
        let vocab = build_vocabulary(&mut streams, 1);
        let cfg = PhraseConfig { delta: 1.0, threshold: 50.0, passes: 1 };
        let (vocab, stats) = paste_phrases(&mut streams, vocab, &cfg).unwrap();
        assert_eq!(stats[0].pastes, 30);
        assert_eq!(vocab.count_of("neural_networks"), Some(30));
        assert!(streams.iter().all(|s| s.tokens[0] == "neural_networks"));
    }

    #[test]
    fn pasting_with_infinite_threshold_is_identity() {
        let mut streams = vec![stream(&["a", "b", "a", "b", "a", "b"])];
        let before = streams.clone();
        let vocab = build_vocabulary(&mut streams, 1);
        let cfg = PhraseConfig { delta: 0.0, threshold: f64::INFINITY, passes: 3 };
        let (_, stats) = paste_phrases(&mut streams, vocab, &cfg).unwrap();
        assert_eq!(streams, before);
        assert!(stats.iter().all(|s| s.pastes == 0));
    }

    #[test]
    fn planted_four_gram_survives_three_passes() {
        let mut streams: Vec<TokenStream> = (0..25)
            .map(|i| {
                let mut tokens = vec!["opq".to_string(), "rst".to_string(), "uvw".to_string(), "xyz".to_string()];
                tokens.extend((0..46).map(|j| format!("pad{i}_{j}")));
                TokenStream { doc_id: format!("d{i}"), tokens }
            })
            .collect();
        let vocab = build_vocabulary(&mut streams, 1);
        let cfg = PhraseConfig { delta: 1.0, threshold: 40.0, passes: 3 };
        let (vocab, _) = paste_phrases(&mut streams, vocab, &cfg).unwrap();
        assert_eq!(vocab.count_of("opq_rst_uvw_xyz"), Some(25));
        // exhaustive scan: the phrase is a single token everywhere
        for s in &streams {
            assert!(s.tokens.contains(&"opq_rst_uvw_xyz".to_string()));
            assert!(!s.tokens.iter().any(|t| t == "opq" || t == "rst"));
        }
    }

    #[test]
    fn token_conservation_per_pass() {
        let mut streams: Vec<TokenStream> = (0..20)
            .map(|i| TokenStream {
                doc_id: format!("d{i}"),
                tokens: vec!["aa".into(), "bb".into(), "cc".into(), format!("u{i}")],
            })
            .collect();
        let before: usize = streams.iter().map(|s| s.tokens.len()).sum();
        let vocab = build_vocabulary(&mut streams, 1);
        let cfg = PhraseConfig { delta: 1.0, threshold: 3.0, passes: 1 };
        let (_, stats) = paste_phrases(&mut streams, vocab, &cfg).unwrap();
        let after: usize = streams.iter().map(|s| s.tokens.len()).sum();
        assert!(stats[0].pastes > 0);
        assert_eq!(before, after + stats[0].pastes as usize);
    }

    #[test]
    fn acronym_expansion_applies_builtin_table() {
        let table = AcronymTable::builtin();
        let mut streams = vec![stream(&["the", "cnn", "model"]), stream(&["lstm"])];
        expand_acronyms(&mut streams, &table);
        assert_eq!(streams[0].tokens, vec!["the", "convolutional_neural_network", "model"]);
        assert_eq!(streams[1].tokens, vec!["long_short_term_memory"]);
    }

    #[test]
    fn acronym_expansion_without_matches_is_identity() {
        let table = AcronymTable::builtin();
        let mut streams = vec![stream(&["plain", "words", "only"])];
        let before = streams.clone();
        expand_acronyms(&mut streams, &table);
        assert_eq!(streams, before);
    }

    #[test]
    fn streaming_bigram_counts_match_quadratic_oracle() {
        // Oracle: for every distinct pair, rescan the whole corpus.
        let tokens = ["m", "n", "o", "m", "n", "m", "n", "o", "p"];
        let streams = vec![stream(&tokens), stream(&["m", "n"])];
        let fast = count_bigrams(&streams);
        let mut pairs: Vec<(String, String)> = fast.keys().cloned().collect();
        pairs.sort();
        for pair in pairs {
            let mut slow = 0u64;
            for s in &streams {
                for w in s.tokens.windows(2) {
                    if w[0] == pair.0 && w[1] == pair.1 {
                        slow += 1;
                    }
                }
            }
            assert_eq!(fast[&pair], slow);
        }
        assert_eq!(fast[&("m".to_string(), "n".to_string())], 4);
    }

    #[test]
    fn documents_roundtrip_jsonl() {
        let dir = std::env::temp_dir().join(format!("corpus_io_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("docs.jsonl");
        let docs = vec![doc("a", "T", "A"), doc("b", "T2", "A2")];
        write_documents_jsonl(&path, &docs).unwrap();
        let back = read_documents_jsonl(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].id, "a");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn validation_rejects_duplicates_and_bad_years() {
        let docs = vec![doc("a", "t", "x"), doc("a", "t", "x")];
        assert!(matches!(validate_documents(&docs, false), Err(CorpusError::DuplicateId(_))));
        let mut bad_year = doc("b", "t", "x");
        bad_year.year = 1776;
        assert!(matches!(
            validate_documents(&[bad_year], false),
            Err(CorpusError::YearOutOfRange { .. })
        ));
        let empty = doc("c", "t", "  ");
        assert!(matches!(validate_documents(&[empty], true), Err(CorpusError::EmptyAbstract(_))));
    }
}
