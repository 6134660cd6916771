//! Document store with phrase retrieval and diffusion statistics: yearly
//! trends, cross-classification shares, and research-area shares.
//!
//! Matching uses the same normalization as the corpus module; a search term's
//! underscores denote token adjacency, so `deep_learning` matches the
//! contiguous token pair (deep, learning) in a title, keyword, or abstract.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::corpus::{self, normalize_text, RawDocument};
use crate::exec;
use crate::termcluster::SearchTermList;

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error("store index {path} is corrupt: {detail}")]
    CorruptIndex { path: String, detail: String },
    #[error("store index does not match documents: {0}")]
    Inconsistent(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path, source: std::io::Error) -> RetrieveError {
    RetrieveError::Io { path: path.display().to_string(), source }
}

/// Normalized token sequences of the three searchable fields.
#[derive(Debug, Clone)]
pub struct FieldTokens {
    pub title: Vec<String>,
    pub abstract_text: Vec<String>,
    /// One sequence per keyword; phrases do not span keyword boundaries.
    pub keywords: Vec<Vec<String>>,
}

/// An immutable, indexed collection of documents.
#[derive(Debug)]
pub struct DocumentStore {
    docs: Vec<RawDocument>,
    fields: Vec<FieldTokens>,
    by_id: HashMap<String, usize>,
    /// token → sorted, deduplicated postings over all three fields
    inverted: HashMap<String, Vec<u32>>,
}

fn field_tokens(doc: &RawDocument) -> FieldTokens {
    FieldTokens {
        title: normalize_text(&doc.title),
        abstract_text: normalize_text(&doc.abstract_text),
        keywords: doc.keywords.iter().map(|k| normalize_text(k)).collect(),
    }
}

impl DocumentStore {
    pub fn build(docs: Vec<RawDocument>) -> Result<DocumentStore, RetrieveError> {
        corpus::validate_documents(&docs, false)?;
        let fields: Vec<FieldTokens> = exec::map_slice(&docs, field_tokens);
        let mut inverted: HashMap<String, Vec<u32>> = HashMap::new();
        for (i, f) in fields.iter().enumerate() {
            let mut seen: HashSet<&str> = HashSet::new();
            for token in f.title.iter().chain(&f.abstract_text).chain(f.keywords.iter().flatten()) {
                if seen.insert(token) {
                    inverted.entry(token.clone()).or_default().push(i as u32);
                }
            }
        }
        let by_id = docs.iter().enumerate().map(|(i, d)| (d.id.clone(), i)).collect();
        Ok(DocumentStore { docs, fields, by_id, inverted })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[RawDocument] {
        &self.docs
    }

    pub fn document(&self, id: &str) -> Option<&RawDocument> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    /// Retrieve ids of all documents matching at least one term, via the
    /// inverted index. Exactly equals [`DocumentStore::retrieve_scan`].
    pub fn retrieve(&self, terms: &SearchTermList) -> BTreeSet<String> {
        let mut hits: BTreeSet<String> = BTreeSet::new();
        for term in &terms.terms {
            let parts: Vec<&str> = term.split('_').filter(|p| !p.is_empty()).collect();
            if parts.is_empty() {
                continue;
            }
            // candidate docs must contain every constituent token
            let mut postings: Vec<&Vec<u32>> = Vec::with_capacity(parts.len());
            let mut missing = false;
            for p in &parts {
                match self.inverted.get(*p) {
                    Some(list) => postings.push(list),
                    None => {
                        missing = true;
                        break;
                    }
                }
            }
            if missing {
                continue;
            }
            postings.sort_by_key(|l| l.len());
            let (first, rest) = postings.split_first().expect("non-empty");
            'docs: for &doc in first.iter() {
                for list in rest {
                    if list.binary_search(&doc).is_err() {
                        continue 'docs;
                    }
                }
                if match_fields(&self.fields[doc as usize], &parts) {
                    hits.insert(self.docs[doc as usize].id.clone());
                }
            }
        }
        hits
    }

    /// Brute-force retrieval: scan every document with [`match_document`].
    pub fn retrieve_scan(&self, terms: &SearchTermList) -> BTreeSet<String> {
        let matched = exec::map_indices(self.docs.len(), |i| match_document(&self.fields[i], terms));
        matched
            .into_iter()
            .zip(&self.docs)
            .filter(|(m, _)| *m)
            .map(|(_, d)| d.id.clone())
            .collect()
    }

    /// Persist as JSON-lines plus a binary inverted-index sidecar.
    pub fn save(&self, dir: &Path) -> Result<(), RetrieveError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        corpus::write_documents_jsonl(&dir.join("docs.jsonl"), &self.docs)?;
        let path = dir.join("index.bin");
        let mut out = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
        let werr = |e| io_err(&path, e);
        out.write_all(STORE_MAGIC).map_err(werr)?;
        out.write_all(&(self.docs.len() as u64).to_le_bytes()).map_err(werr)?;
        out.write_all(&(self.inverted.len() as u64).to_le_bytes()).map_err(werr)?;
        let mut tokens: Vec<&String> = self.inverted.keys().collect();
        tokens.sort();
        for token in tokens {
            let bytes = token.as_bytes();
            out.write_all(&(bytes.len() as u32).to_le_bytes()).map_err(werr)?;
            out.write_all(bytes).map_err(werr)?;
            let postings = &self.inverted[token];
            out.write_all(&(postings.len() as u32).to_le_bytes()).map_err(werr)?;
            for &p in postings {
                out.write_all(&p.to_le_bytes()).map_err(werr)?;
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<DocumentStore, RetrieveError> {
        let docs = corpus::read_documents_jsonl(&dir.join("docs.jsonl"))?;
        let path = dir.join("index.bin");
        let mut file = BufReader::new(File::open(&path).map_err(|e| io_err(&path, e))?);
        let rerr = |e| io_err(&path, e);
        let corrupt = |detail: &str| RetrieveError::CorruptIndex {
            path: path.display().to_string(),
            detail: detail.to_string(),
        };

        let mut magic = [0u8; 8];
        file.read_exact(&mut magic).map_err(rerr)?;
        if &magic != STORE_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let mut u64buf = [0u8; 8];
        file.read_exact(&mut u64buf).map_err(rerr)?;
        let n_docs = u64::from_le_bytes(u64buf) as usize;
        if n_docs != docs.len() {
            return Err(RetrieveError::Inconsistent(format!(
                "index built over {n_docs} documents, store has {}",
                docs.len()
            )));
        }
        file.read_exact(&mut u64buf).map_err(rerr)?;
        let n_tokens = u64::from_le_bytes(u64buf) as usize;
        let mut inverted = HashMap::with_capacity(n_tokens);
        let mut u32buf = [0u8; 4];
        for _ in 0..n_tokens {
            file.read_exact(&mut u32buf).map_err(rerr)?;
            let len = u32::from_le_bytes(u32buf) as usize;
            let mut token = vec![0u8; len];
            file.read_exact(&mut token).map_err(rerr)?;
            let token = String::from_utf8(token).map_err(|_| corrupt("non-utf8 token"))?;
            file.read_exact(&mut u32buf).map_err(rerr)?;
            let plen = u32::from_le_bytes(u32buf) as usize;
            let mut postings = Vec::with_capacity(plen);
            for _ in 0..plen {
                file.read_exact(&mut u32buf).map_err(rerr)?;
                let doc = u32::from_le_bytes(u32buf);
                if doc as usize >= n_docs {
                    return Err(corrupt("posting out of range"));
                }
                postings.push(doc);
            }
            inverted.insert(token, postings);
        }

        let fields: Vec<FieldTokens> = exec::map_slice(&docs, field_tokens);
        let by_id = docs.iter().enumerate().map(|(i, d)| (d.id.clone(), i)).collect();
        Ok(DocumentStore { docs, fields, by_id, inverted })
    }
}

const STORE_MAGIC: &[u8; 8] = b"DSSTORE\0";

fn contains_seq(haystack: &[String], needle: &[&str]) -> bool {
    if needle.is_empty() || needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w.iter().zip(needle).all(|(a, b)| a == b))
}

fn match_fields(fields: &FieldTokens, parts: &[&str]) -> bool {
    contains_seq(&fields.title, parts)
        || contains_seq(&fields.abstract_text, parts)
        || fields.keywords.iter().any(|kw| contains_seq(kw, parts))
}

/// True iff any term appears as a contiguous token sequence in the title,
/// the abstract, or any single keyword.
pub fn match_document(fields: &FieldTokens, terms: &SearchTermList) -> bool {
    terms.terms.iter().any(|term| {
        let parts: Vec<&str> = term.split('_').filter(|p| !p.is_empty()).collect();
        !parts.is_empty() && match_fields(fields, &parts)
    })
}

/// Normalized fields for a standalone document, for callers without a store.
pub fn document_fields(doc: &RawDocument) -> FieldTokens {
    field_tokens(doc)
}

/// Yearly counts with 3-year moving-average growth rates.
#[derive(Debug, Clone)]
pub struct TrendSeries {
    pub start_year: i32,
    pub counts: Vec<u64>,
    /// Moving-average growth where the 3-year window is complete.
    pub growth: Vec<Option<f64>>,
    /// Set when a zero prior-year count forced skipping a term of the mean.
    pub partial: Vec<bool>,
}

impl TrendSeries {
    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.counts.len()).map(move |i| self.start_year + i as i32)
    }
}

/// Per-year counts of the retrieved ids, with growth(y) = mean over
/// t ∈ {y−2, y−1, y} of (c_t − c_{t−1}) / c_{t−1}.
pub fn yearly_trend(ids: &BTreeSet<String>, store: &DocumentStore) -> TrendSeries {
    let mut by_year: BTreeMap<i32, u64> = BTreeMap::new();
    for id in ids {
        if let Some(doc) = store.document(id) {
            *by_year.entry(doc.year).or_insert(0) += 1;
        }
    }
    let (&min_year, &max_year) = match (by_year.keys().next(), by_year.keys().next_back()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => {
            return TrendSeries { start_year: 0, counts: vec![], growth: vec![], partial: vec![] }
        }
    };
    let counts: Vec<u64> =
        (min_year..=max_year).map(|y| by_year.get(&y).copied().unwrap_or(0)).collect();

    let mut growth = vec![None; counts.len()];
    let mut partial = vec![false; counts.len()];
    for i in 3..counts.len() {
        let mut terms = Vec::with_capacity(3);
        let mut skipped = false;
        for t in i - 2..=i {
            let prev = counts[t - 1];
            if prev == 0 {
                skipped = true;
            } else {
                terms.push((counts[t] as f64 - prev as f64) / prev as f64);
            }
        }
        partial[i] = skipped;
        if !terms.is_empty() {
            growth[i] = Some(terms.iter().sum::<f64>() / terms.len() as f64);
        }
    }
    TrendSeries { start_year: min_year, counts, growth, partial }
}

/// The computer-science subject categories used for cross-classification.
pub fn builtin_cs_categories() -> BTreeSet<String> {
    include_str!("../data/cs_categories.txt")
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

/// Per-year fraction of documents whose category set intersects the target
/// set. Years without documents yield `None`.
pub fn cross_classification_share(
    ids: &BTreeSet<String>,
    store: &DocumentStore,
    targets: &BTreeSet<String>,
) -> Vec<(i32, Option<f64>)> {
    let mut totals: BTreeMap<i32, (u64, u64)> = BTreeMap::new();
    for id in ids {
        if let Some(doc) = store.document(id) {
            let entry = totals.entry(doc.year).or_insert((0, 0));
            entry.0 += 1;
            if doc.subject_categories.iter().any(|c| targets.contains(c)) {
                entry.1 += 1;
            }
        }
    }
    let (Some(&min_year), Some(&max_year)) = (totals.keys().next(), totals.keys().next_back())
    else {
        return Vec::new();
    };
    (min_year..=max_year)
        .map(|y| match totals.get(&y) {
            Some(&(total, hits)) if total > 0 => (y, Some(hits as f64 / total as f64)),
            _ => (y, None),
        })
        .collect()
}

/// How documents spread over research areas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AreaCounting {
    /// A document in m areas contributes 1/m to each; mass is conserved.
    Weighted,
    /// A document in m areas adds a full count to each.
    MultiCount,
}

pub const UNKNOWN_AREA: &str = "unknown";

/// Fractional (or multi-) counts per research area. `area_map` sends subject
/// categories to areas; documents without any mapped category fall into
/// [`UNKNOWN_AREA`].
pub fn area_shares(
    ids: &BTreeSet<String>,
    store: &DocumentStore,
    area_map: &HashMap<String, String>,
    counting: AreaCounting,
) -> BTreeMap<String, f64> {
    let mut shares: BTreeMap<String, f64> = BTreeMap::new();
    for id in ids {
        let Some(doc) = store.document(id) else { continue };
        let areas: BTreeSet<&str> = doc
            .subject_categories
            .iter()
            .filter_map(|c| area_map.get(c))
            .map(String::as_str)
            .collect();
        if areas.is_empty() {
            *shares.entry(UNKNOWN_AREA.to_string()).or_insert(0.0) += 1.0;
            continue;
        }
        let weight = match counting {
            AreaCounting::Weighted => 1.0 / areas.len() as f64,
            AreaCounting::MultiCount => 1.0,
        };
        for area in areas {
            *shares.entry(area.to_string()).or_insert(0.0) += weight;
        }
    }
    shares
}

/// Write a trend series as CSV (year, count, growth).
pub fn write_trend_csv(path: &Path, trend: &TrendSeries) -> Result<(), RetrieveError> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    writeln!(out, "year,count,growth").map_err(|e| io_err(path, e))?;
    for (i, year) in trend.years().enumerate() {
        let growth = trend.growth[i].map(|g| format!("{g:.12}")).unwrap_or_default();
        writeln!(out, "{},{},{}", year, trend.counts[i], growth).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}
