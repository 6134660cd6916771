//! Re-combinatorial novelty over referenced-journal pairs.
//!
//! A paper is novel in its focal year when its reference list contains a
//! journal pair that (a) never co-occurred in any reference list of a
//! strictly earlier year, and (b) is re-used by at least `reuse_threshold`
//! papers within the following `reuse_window` years. Each qualifying pair
//! contributes `1 − cosine` of the two journals' co-citation profiles over
//! the three preceding years, and the paper's weighted score is
//! `log(1 + Σ distances)`.
//!
//! Scores are computed in three scopes (all sciences, excluding
//! computer-science journals, and restricted to uniquely health-science
//! journals); since the scopes only filter which pairs qualify, the
//! qualifying sets nest and the weighted scores are monotone across scopes.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;

#[derive(Debug, Error)]
pub enum NoveltyError {
    #[error("focal year {focal} is right-censored: reuse window ends {needed} but data end {data_end}")]
    RightCensored { focal: i32, needed: i32, data_end: i32 },
    #[error("category code {0:?} is listed as both computer science and health science")]
    OverlappingScopes(String),
    #[error("no reference records")]
    Empty,
    #[error("bad reference csv at line {line}: {detail}")]
    BadCsv { line: usize, detail: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path, source: std::io::Error) -> NoveltyError {
    NoveltyError::Io { path: path.display().to_string(), source }
}

/// One paper's referenced journals (multiset; duplicates are allowed and
/// collapse when pairs are formed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub paper_id: String,
    pub year: i32,
    pub journals: Vec<String>,
}

/// Which journal pairs qualify in each scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    AllSciences,
    NoCs,
    OnlyHs,
}

pub const SCOPES: [Scope; 3] = [Scope::AllSciences, Scope::NoCs, Scope::OnlyHs];

/// Journal category assignments plus the category codes that define the
/// computer-science and health-science groups.
#[derive(Debug, Clone, Default)]
pub struct ScopeFilter {
    categories: HashMap<String, BTreeSet<String>>,
    cs_codes: HashSet<String>,
    hs_codes: HashSet<String>,
}

impl ScopeFilter {
    /// The code sets must be disjoint; that is what makes the qualifying
    /// sets nest across scopes.
    pub fn new(
        categories: HashMap<String, BTreeSet<String>>,
        cs_codes: HashSet<String>,
        hs_codes: HashSet<String>,
    ) -> Result<ScopeFilter, NoveltyError> {
        if let Some(code) = cs_codes.intersection(&hs_codes).next() {
            return Err(NoveltyError::OverlappingScopes(code.clone()));
        }
        Ok(ScopeFilter { categories, cs_codes, hs_codes })
    }

    fn is_cs(&self, journal: &str) -> bool {
        self.categories
            .get(journal)
            .is_some_and(|cats| cats.iter().any(|c| self.cs_codes.contains(c)))
    }

    fn is_uniquely_hs(&self, journal: &str) -> bool {
        self.categories
            .get(journal)
            .is_some_and(|cats| !cats.is_empty() && cats.iter().all(|c| self.hs_codes.contains(c)))
    }

    /// Whether a pair qualifies under the scope.
    pub fn admits(&self, scope: Scope, a: &str, b: &str) -> bool {
        match scope {
            Scope::AllSciences => true,
            Scope::NoCs => !self.is_cs(a) && !self.is_cs(b),
            Scope::OnlyHs => self.is_uniquely_hs(a) && self.is_uniquely_hs(b),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoveltyConfig {
    /// Minimum number of re-using papers within the window (default 5).
    pub reuse_threshold: u32,
    /// Years after the focal year inspected for re-use (default 3).
    pub reuse_window: i32,
    /// Years before the focal year feeding co-citation profiles (default 3).
    pub cooccur_window: i32,
}

impl Default for NoveltyConfig {
    fn default() -> Self {
        NoveltyConfig { reuse_threshold: 5, reuse_window: 3, cooccur_window: 3 }
    }
}

/// Six novelty measures for one paper.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoveltyScores {
    pub paper_id: String,
    pub year: i32,
    pub dummy_all: bool,
    pub dummy_nocs: bool,
    pub dummy_onlyhs: bool,
    pub weighted_all: f64,
    pub weighted_nocs: f64,
    pub weighted_onlyhs: f64,
}

#[derive(Debug)]
pub struct NoveltyOutcome {
    pub scores: Vec<NoveltyScores>,
    /// Pairs whose co-citation profile was empty (distance set to 1).
    pub zero_profile_pairs: u64,
}

/// Unordered distinct-journal pairs of a record, each once per paper.
pub fn enumerate_pairs(record: &ReferenceRecord) -> BTreeSet<(String, String)> {
    let distinct: BTreeSet<&String> = record.journals.iter().collect();
    let list: Vec<&String> = distinct.into_iter().collect();
    let mut pairs = BTreeSet::new();
    for i in 0..list.len() {
        for j in i + 1..list.len() {
            pairs.insert((list[i].clone(), list[j].clone()));
        }
    }
    pairs
}

/// Indexed reference corpus; build once, score any focal year.
pub struct NoveltyEngine {
    records: Vec<ReferenceRecord>,
    /// Interned pair → first year it appears in any reference list.
    pair_first_year: HashMap<(u32, u32), i32>,
    /// Interned pair → (year, number of papers containing it that year).
    pair_year_counts: HashMap<(u32, u32), Vec<(i32, u32)>>,
    /// Paper pairs by record index, interned.
    record_pairs: Vec<Vec<(u32, u32)>>,
    journal_names: Vec<String>,
    journal_ids: HashMap<String, u32>,
    pub min_year: i32,
    pub max_year: i32,
}

impl NoveltyEngine {
    pub fn new(records: Vec<ReferenceRecord>) -> Result<NoveltyEngine, NoveltyError> {
        if records.is_empty() {
            return Err(NoveltyError::Empty);
        }
        let mut journal_names: Vec<String> = Vec::new();
        let mut journal_ids: HashMap<String, u32> = HashMap::new();
        // Stable interning order: sorted journal names.
        let mut all: BTreeSet<&str> =
            records.iter().flat_map(|r| r.journals.iter().map(String::as_str)).collect();
        for name in std::mem::take(&mut all) {
            journal_ids.insert(name.to_string(), journal_names.len() as u32);
            journal_names.push(name.to_string());
        }

        let mut pair_first_year: HashMap<(u32, u32), i32> = HashMap::new();
        let mut pair_year_papers: HashMap<(u32, u32), BTreeMap<i32, u32>> = HashMap::new();
        let mut record_pairs = Vec::with_capacity(records.len());
        let mut min_year = i32::MAX;
        let mut max_year = i32::MIN;
        for record in &records {
            min_year = min_year.min(record.year);
            max_year = max_year.max(record.year);
            let distinct: BTreeSet<u32> =
                record.journals.iter().map(|j| journal_ids[j.as_str()]).collect();
            let list: Vec<u32> = distinct.into_iter().collect();
            let mut pairs = Vec::new();
            for i in 0..list.len() {
                for j in i + 1..list.len() {
                    let pair = (list[i], list[j]);
                    pairs.push(pair);
                    let first = pair_first_year.entry(pair).or_insert(record.year);
                    *first = (*first).min(record.year);
                    *pair_year_papers.entry(pair).or_default().entry(record.year).or_insert(0) += 1;
                }
            }
            record_pairs.push(pairs);
        }
        let pair_year_counts = pair_year_papers
            .into_iter()
            .map(|(pair, by_year)| (pair, by_year.into_iter().collect()))
            .collect();
        Ok(NoveltyEngine {
            records,
            pair_first_year,
            pair_year_counts,
            record_pairs,
            journal_names,
            journal_ids,
            min_year,
            max_year,
        })
    }

    pub fn records(&self) -> &[ReferenceRecord] {
        &self.records
    }

    fn intern_pair(&self, a: &str, b: &str) -> Option<(u32, u32)> {
        let ia = *self.journal_ids.get(a)?;
        let ib = *self.journal_ids.get(b)?;
        Some(if ia < ib { (ia, ib) } else { (ib, ia) })
    }

    /// True iff the pair never appeared in any reference list strictly
    /// before year `y`. Unseen pairs are new by definition.
    pub fn is_new_pair(&self, a: &str, b: &str, y: i32) -> bool {
        match self.intern_pair(a, b) {
            Some(pair) => self.pair_first_year.get(&pair).map(|&f| f >= y).unwrap_or(true),
            None => true,
        }
    }

    /// Number of papers in `(y, y + window]` whose reference list contains
    /// the pair. Errors when the corpus does not cover the full window.
    pub fn reuse_count(&self, a: &str, b: &str, y: i32, window: i32) -> Result<u32, NoveltyError> {
        let needed = y + window;
        if needed > self.max_year {
            return Err(NoveltyError::RightCensored { focal: y, needed, data_end: self.max_year });
        }
        let Some(pair) = self.intern_pair(a, b) else { return Ok(0) };
        Ok(self
            .pair_year_counts
            .get(&pair)
            .map(|years| {
                years
                    .iter()
                    .filter(|&&(yy, _)| yy > y && yy <= needed)
                    .map(|&(_, c)| c)
                    .sum()
            })
            .unwrap_or(0))
    }

    /// Journal co-occurrence counts over `[y − window, y − 1]`, one count
    /// per (paper, pair).
    pub fn cooccurrence_window(&self, y: i32, window: i32) -> CooccurrenceWindow {
        let mut counts: HashMap<u32, HashMap<u32, u64>> = HashMap::new();
        for (record, pairs) in self.records.iter().zip(&self.record_pairs) {
            if record.year < y - window || record.year >= y {
                continue;
            }
            for &(a, b) in pairs {
                *counts.entry(a).or_default().entry(b).or_insert(0) += 1;
                *counts.entry(b).or_default().entry(a).or_insert(0) += 1;
            }
        }
        CooccurrenceWindow { focal_year: y, profiles: counts }
    }

    fn journal_name(&self, id: u32) -> &str {
        &self.journal_names[id as usize]
    }

    /// Score one record against prebuilt windows.
    fn score_record(
        &self,
        idx: usize,
        filter: &ScopeFilter,
        config: &NoveltyConfig,
        window: &CooccurrenceWindow,
    ) -> Result<(NoveltyScores, u64), NoveltyError> {
        let record = &self.records[idx];
        let y = record.year;
        let mut zero_profiles = 0u64;
        let mut sums = [0.0f64; 3];
        let mut any = [false; 3];
        for &pair in &self.record_pairs[idx] {
            let first = self.pair_first_year[&pair];
            if first < y {
                continue; // not new
            }
            let (a, b) = pair;
            let name_a = self.journal_name(a);
            let name_b = self.journal_name(b);
            let reuse = self.reuse_count(name_a, name_b, y, config.reuse_window)?;
            if reuse < config.reuse_threshold {
                continue;
            }
            let (distance, empty_profile) = window.pair_distance_ids(a, b);
            if empty_profile {
                zero_profiles += 1;
            }
            for (s, scope) in SCOPES.iter().enumerate() {
                if filter.admits(*scope, name_a, name_b) {
                    sums[s] += distance;
                    any[s] = true;
                }
            }
        }
        let scores = NoveltyScores {
            paper_id: record.paper_id.clone(),
            year: y,
            dummy_all: any[0],
            dummy_nocs: any[1],
            dummy_onlyhs: any[2],
            weighted_all: sums[0].ln_1p(),
            weighted_nocs: sums[1].ln_1p(),
            weighted_onlyhs: sums[2].ln_1p(),
        };
        Ok((scores, zero_profiles))
    }

    /// Score all papers in `focal_years`, in record order within each year.
    pub fn score_all(
        &self,
        filter: &ScopeFilter,
        config: &NoveltyConfig,
        focal_years: impl IntoIterator<Item = i32>,
    ) -> Result<NoveltyOutcome, NoveltyError> {
        let mut scores = Vec::new();
        let mut zero_profile_pairs = 0u64;
        for y in focal_years {
            if y + config.reuse_window > self.max_year {
                return Err(NoveltyError::RightCensored {
                    focal: y,
                    needed: y + config.reuse_window,
                    data_end: self.max_year,
                });
            }
            let window = self.cooccurrence_window(y, config.cooccur_window);
            let indices: Vec<usize> = (0..self.records.len())
                .filter(|&i| self.records[i].year == y)
                .collect();
            let results = exec::map_slice(&indices, |&i| self.score_record(i, filter, config, &window));
            for result in results {
                let (s, zeros) = result?;
                scores.push(s);
                zero_profile_pairs += zeros;
            }
        }
        Ok(NoveltyOutcome { scores, zero_profile_pairs })
    }

    /// Default focal range: first year with a full co-citation window
    /// through the last year with a full reuse window.
    pub fn default_focal_years(&self, config: &NoveltyConfig) -> std::ops::RangeInclusive<i32> {
        (self.min_year + config.cooccur_window)..=(self.max_year - config.reuse_window)
    }
}

/// Sparse journal co-citation profiles for one focal year.
pub struct CooccurrenceWindow {
    pub focal_year: i32,
    profiles: HashMap<u32, HashMap<u32, u64>>,
}

impl CooccurrenceWindow {
    /// 1 − cosine of the two journals' profiles. The second value reports
    /// whether either profile was empty (distance forced to 1).
    fn pair_distance_ids(&self, a: u32, b: u32) -> (f64, bool) {
        let (Some(pa), Some(pb)) = (self.profiles.get(&a), self.profiles.get(&b)) else {
            return (1.0, true);
        };
        let norm = |p: &HashMap<u32, u64>| {
            p.values().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
        };
        let (na, nb) = (norm(pa), norm(pb));
        if na == 0.0 || nb == 0.0 {
            return (1.0, true);
        }
        let (small, large) = if pa.len() <= pb.len() { (pa, pb) } else { (pb, pa) };
        let dot: f64 = small
            .iter()
            .filter_map(|(j, &va)| large.get(j).map(|&vb| va as f64 * vb as f64))
            .sum();
        ((1.0 - dot / (na * nb)).clamp(0.0, 1.0), false)
    }

    /// Distance for named journals; unknown journals count as empty profiles.
    pub fn pair_distance(&self, engine: &NoveltyEngine, a: &str, b: &str) -> f64 {
        match engine.intern_pair(a, b) {
            Some((ia, ib)) => self.pair_distance_ids(ia, ib).0,
            None => 1.0,
        }
    }
}

/// Read reference triples from CSV with header `paper_id,year,journal_id`
/// (extra columns ignored), grouping rows into one record per paper.
pub fn read_references_csv(path: &Path) -> Result<Vec<ReferenceRecord>, NoveltyError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| NoveltyError::BadCsv { line: 0, detail: e.to_string() })?;
    let mut order: Vec<String> = Vec::new();
    let mut by_paper: HashMap<String, ReferenceRecord> = HashMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| NoveltyError::BadCsv { line: i + 2, detail: e.to_string() })?;
        let paper_id = row.get(0).unwrap_or("").to_string();
        let year: i32 = row
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| NoveltyError::BadCsv { line: i + 2, detail: "bad year".to_string() })?;
        let journal = row
            .get(2)
            .ok_or_else(|| NoveltyError::BadCsv { line: i + 2, detail: "missing journal".to_string() })?
            .to_string();
        by_paper
            .entry(paper_id.clone())
            .or_insert_with(|| {
                order.push(paper_id.clone());
                ReferenceRecord { paper_id, year, journals: Vec::new() }
            })
            .journals
            .push(journal);
    }
    Ok(order.into_iter().map(|id| by_paper.remove(&id).expect("inserted above")).collect())
}

/// Read a journal-category map from CSV with header `journal_id,category`.
pub fn read_categories_csv(path: &Path) -> Result<HashMap<String, BTreeSet<String>>, NoveltyError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| NoveltyError::BadCsv { line: 0, detail: e.to_string() })?;
    let mut map: HashMap<String, BTreeSet<String>> = HashMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| NoveltyError::BadCsv { line: i + 2, detail: e.to_string() })?;
        let journal = row.get(0).unwrap_or("").to_string();
        let category = row
            .get(1)
            .ok_or_else(|| NoveltyError::BadCsv { line: i + 2, detail: "missing category".to_string() })?
            .to_string();
        map.entry(journal).or_default().insert(category);
    }
    Ok(map)
}

/// Write per-paper scores as CSV, one row per paper.
pub fn write_scores_csv(path: &Path, outcome: &NoveltyOutcome) -> Result<(), NoveltyError> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    writeln!(out, "paper_id,year,dummy_all,dummy_nocs,dummy_onlyhs,novelty_all,novelty_nocs,novelty_onlyhs")
        .map_err(|e| io_err(path, e))?;
    for s in &outcome.scores {
        writeln!(
            out,
            "{},{},{},{},{},{:.12},{:.12},{:.12}",
            s.paper_id,
            s.year,
            u8::from(s.dummy_all),
            u8::from(s.dummy_nocs),
            u8::from(s.dummy_onlyhs),
            s.weighted_all,
            s.weighted_nocs,
            s.weighted_onlyhs
        )
        .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}
