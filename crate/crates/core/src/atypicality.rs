//! Conventionality and novelty z-scores for referenced-journal pairs against
//! randomized citation networks, with the four-quadrant paper taxonomy.
//!
//! The null model swaps cited endpoints between edges that share the same
//! cited-work year, which preserves three marginals exactly: each paper's
//! reference count, each (journal, cited-year) citation count, and each
//! paper's distribution of citations over time. Each cited-year stratum is
//! shuffled with its own seed stream, so adding an unrelated stratum never
//! perturbs the randomization of existing ones.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::seed::derive_seed;
use crate::stats::{percentile_sorted};

#[derive(Debug, Error)]
pub enum AtypicalityError {
    #[error("empty citation network")]
    Empty,
    #[error("need at least 2 null networks, got {0}")]
    TooFewNulls(usize),
    #[error("bad citation csv at line {line}: {detail}")]
    BadCsv { line: usize, detail: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path, source: std::io::Error) -> AtypicalityError {
    AtypicalityError::Io { path: path.display().to_string(), source }
}

/// One reference: a paper cites a journal's work from a given year.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CitationEdge {
    pub paper: u32,
    pub citing_year: i32,
    pub journal: u32,
    pub cited_year: i32,
}

/// An edge-list citation network with interned paper and journal names.
#[derive(Debug, Clone)]
pub struct CitationNetwork {
    pub edges: Vec<CitationEdge>,
    paper_names: Vec<String>,
    journal_names: Vec<String>,
    /// cited-year → indices into `edges`
    strata: BTreeMap<i32, Vec<usize>>,
}

impl CitationNetwork {
    pub fn new(
        rows: impl IntoIterator<Item = (String, i32, String, i32)>,
    ) -> Result<CitationNetwork, AtypicalityError> {
        let mut paper_names = Vec::new();
        let mut paper_ids: HashMap<String, u32> = HashMap::new();
        let mut journal_names = Vec::new();
        let mut journal_ids: HashMap<String, u32> = HashMap::new();
        let mut edges = Vec::new();
        for (paper, citing_year, journal, cited_year) in rows {
            let paper = *paper_ids.entry(paper.clone()).or_insert_with(|| {
                paper_names.push(paper);
                (paper_names.len() - 1) as u32
            });
            let journal = *journal_ids.entry(journal.clone()).or_insert_with(|| {
                journal_names.push(journal);
                (journal_names.len() - 1) as u32
            });
            edges.push(CitationEdge { paper, citing_year, journal, cited_year });
        }
        if edges.is_empty() {
            return Err(AtypicalityError::Empty);
        }
        let mut strata: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        for (i, e) in edges.iter().enumerate() {
            strata.entry(e.cited_year).or_default().push(i);
        }
        Ok(CitationNetwork { edges, paper_names, journal_names, strata })
    }

    pub fn paper_name(&self, id: u32) -> &str {
        &self.paper_names[id as usize]
    }

    pub fn journal_name(&self, id: u32) -> &str {
        &self.journal_names[id as usize]
    }

    pub fn n_papers(&self) -> usize {
        self.paper_names.len()
    }

    /// Randomize cited endpoints within each cited-year stratum.
    /// `swap_factor × stratum size` swap attempts per stratum; strata with
    /// fewer than two edges have no legal swap and stay untouched.
    pub fn randomize(&self, seed: u64, swap_factor: usize) -> CitationNetwork {
        let mut rng_seedless = self.clone();
        rng_seedless.randomize_in_place(seed, swap_factor);
        rng_seedless
    }

    fn randomize_in_place(&mut self, seed: u64, swap_factor: usize) {
        for (&year, members) in &self.strata {
            if members.len() < 2 {
                continue;
            }
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(seed, "swap-stratum", year_tag(year)));
            let attempts = swap_factor * members.len();
            for _ in 0..attempts {
                let a = members[rng.random_range(0..members.len())];
                let b = members[rng.random_range(0..members.len())];
                if a != b {
                    let ja = self.edges[a].journal;
                    self.edges[a].journal = self.edges[b].journal;
                    self.edges[b].journal = ja;
                }
            }
        }
    }

    /// Count papers containing each unordered distinct-journal pair.
    pub fn pair_counts(&self) -> HashMap<(u32, u32), u32> {
        let mut per_paper: HashMap<u32, Vec<u32>> = HashMap::new();
        for e in &self.edges {
            per_paper.entry(e.paper).or_default().push(e.journal);
        }
        let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
        for journals in per_paper.values_mut() {
            journals.sort_unstable();
            journals.dedup();
            for i in 0..journals.len() {
                for j in i + 1..journals.len() {
                    *counts.entry((journals[i], journals[j])).or_insert(0) += 1;
                }
            }
        }
        counts
    }

    /// The three preserved marginals, for conservation checks.
    pub fn marginals(&self) -> Marginals {
        let mut per_paper_refs: BTreeMap<u32, u32> = BTreeMap::new();
        let mut per_journal_year: BTreeMap<(u32, i32), u32> = BTreeMap::new();
        let mut per_paper_years: BTreeMap<(u32, i32), u32> = BTreeMap::new();
        for e in &self.edges {
            *per_paper_refs.entry(e.paper).or_insert(0) += 1;
            *per_journal_year.entry((e.journal, e.cited_year)).or_insert(0) += 1;
            *per_paper_years.entry((e.paper, e.cited_year)).or_insert(0) += 1;
        }
        Marginals { per_paper_refs, per_journal_year, per_paper_years }
    }
}

fn year_tag(year: i32) -> u64 {
    year as i64 as u64
}

/// Marginals preserved by [`CitationNetwork::randomize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Marginals {
    pub per_paper_refs: BTreeMap<u32, u32>,
    pub per_journal_year: BTreeMap<(u32, i32), u32>,
    pub per_paper_years: BTreeMap<(u32, i32), u32>,
}

/// Observed pair frequency against the null ensemble.
#[derive(Debug, Clone)]
pub struct PairZScore {
    pub pair: (u32, u32),
    pub observed: u32,
    pub null_mean: f64,
    pub null_sd: f64,
    /// None when the null standard deviation is zero.
    pub z: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct NullConfig {
    pub n_nulls: usize,
    pub swap_factor: usize,
    pub seed: u64,
}

impl Default for NullConfig {
    fn default() -> Self {
        NullConfig { n_nulls: 50, swap_factor: 10, seed: 0 }
    }
}

/// z-scores for every pair observed in the real network, from `n_nulls`
/// independent randomizations.
pub fn pair_zscores(
    network: &CitationNetwork,
    config: &NullConfig,
) -> Result<Vec<PairZScore>, AtypicalityError> {
    if config.n_nulls < 2 {
        return Err(AtypicalityError::TooFewNulls(config.n_nulls));
    }
    let observed = network.pair_counts();
    let mut tracked: Vec<(u32, u32)> = observed.keys().copied().collect();
    tracked.sort_unstable();
    let slot: HashMap<(u32, u32), usize> =
        tracked.iter().enumerate().map(|(i, &p)| (p, i)).collect();

    // Integer sums make the parallel reduction exact and order-independent.
    let per_null: Vec<Vec<u32>> = exec::map_indices(config.n_nulls, |b| {
        let null =
            network.randomize(derive_seed(config.seed, "null-network", b as u64), config.swap_factor);
        let mut counts = vec![0u32; tracked.len()];
        for (pair, c) in null.pair_counts() {
            if let Some(&i) = slot.get(&pair) {
                counts[i] = c;
            }
        }
        counts
    });
    let mut sum = vec![0u64; tracked.len()];
    let mut sumsq = vec![0u128; tracked.len()];
    for counts in &per_null {
        for (i, &c) in counts.iter().enumerate() {
            sum[i] += c as u64;
            sumsq[i] += (c as u128) * (c as u128);
        }
    }

    let n = config.n_nulls as f64;
    Ok(tracked
        .into_iter()
        .enumerate()
        .map(|(i, pair)| {
            let mean = sum[i] as f64 / n;
            let var = (sumsq[i] as f64 - n * mean * mean) / (n - 1.0);
            let sd = var.max(0.0).sqrt();
            let obs = observed[&pair];
            PairZScore {
                pair,
                observed: obs,
                null_mean: mean,
                null_sd: sd,
                z: (sd > 0.0).then(|| (obs as f64 - mean) / sd),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrant {
    #[serde(rename = "HC-HN")]
    HcHn,
    #[serde(rename = "HC-LN")]
    HcLn,
    #[serde(rename = "LC-HN")]
    LcHn,
    #[serde(rename = "LC-LN")]
    LcLn,
}

impl Quadrant {
    pub fn label(self) -> &'static str {
        match self {
            Quadrant::HcHn => "HC-HN",
            Quadrant::HcLn => "HC-LN",
            Quadrant::LcHn => "LC-HN",
            Quadrant::LcLn => "LC-LN",
        }
    }
}

/// Median and 10th-percentile z of one paper's pairs, and its quadrant
/// once population thresholds are known.
#[derive(Debug, Clone)]
pub struct PaperZSummary {
    pub paper_id: String,
    pub median_z: f64,
    pub p10_z: f64,
    pub quadrant: Option<Quadrant>,
}

/// Summary statistics produced alongside the per-paper table.
#[derive(Debug, Clone, Copy, Default)]
pub struct SummaryDiagnostics {
    /// Pairs without a defined z, excluded from the per-paper lists.
    pub undefined_pairs: u64,
    /// Papers with no defined z at all, excluded from the output.
    pub dropped_papers: u64,
}

/// Per-paper median and 10th percentile (linear interpolation) over the
/// defined z-scores of its pairs. Papers without any defined z are dropped.
pub fn summarize_papers(
    network: &CitationNetwork,
    zscores: &[PairZScore],
) -> (Vec<PaperZSummary>, SummaryDiagnostics) {
    let z_by_pair: HashMap<(u32, u32), Option<f64>> =
        zscores.iter().map(|p| (p.pair, p.z)).collect();
    let mut per_paper: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for e in &network.edges {
        per_paper.entry(e.paper).or_default().push(e.journal);
    }
    let mut diagnostics = SummaryDiagnostics::default();
    let mut summaries = Vec::new();
    for (paper, journals) in per_paper.iter_mut() {
        journals.sort_unstable();
        journals.dedup();
        let mut zs = Vec::new();
        for i in 0..journals.len() {
            for j in i + 1..journals.len() {
                match z_by_pair.get(&(journals[i], journals[j])) {
                    Some(Some(z)) => zs.push(*z),
                    Some(None) => diagnostics.undefined_pairs += 1,
                    None => {}
                }
            }
        }
        if zs.is_empty() {
            diagnostics.dropped_papers += 1;
            continue;
        }
        zs.sort_by(|a, b| a.partial_cmp(b).expect("finite z"));
        summaries.push(PaperZSummary {
            paper_id: network.paper_name(*paper).to_string(),
            median_z: percentile_sorted(&zs, 0.5),
            p10_z: percentile_sorted(&zs, 0.1),
            quadrant: None,
        });
    }
    (summaries, diagnostics)
}

/// Population thresholds behind the quadrant coding.
#[derive(Debug, Clone, Copy)]
pub struct QuadrantThresholds {
    pub median_of_medians: f64,
    pub median_of_p10s: f64,
}

/// Code each paper: high conventionality iff `median_z >=` the overall
/// median of medians; high novelty iff `p10_z <` the overall median of
/// 10th percentiles. The strict `<` pins the high-novel share at one half
/// for continuous score distributions.
pub fn assign_quadrants(summaries: &mut [PaperZSummary]) -> Option<QuadrantThresholds> {
    if summaries.is_empty() {
        return None;
    }
    let medians: Vec<f64> = summaries.iter().map(|s| s.median_z).collect();
    let p10s: Vec<f64> = summaries.iter().map(|s| s.p10_z).collect();
    let thresholds = QuadrantThresholds {
        median_of_medians: crate::stats::median(&medians),
        median_of_p10s: crate::stats::median(&p10s),
    };
    for s in summaries.iter_mut() {
        let hc = s.median_z >= thresholds.median_of_medians;
        let hn = s.p10_z < thresholds.median_of_p10s;
        s.quadrant = Some(match (hc, hn) {
            (true, true) => Quadrant::HcHn,
            (true, false) => Quadrant::HcLn,
            (false, true) => Quadrant::LcHn,
            (false, false) => Quadrant::LcLn,
        });
    }
    Some(thresholds)
}

/// Read a citation network from CSV with header
/// `paper_id,year,journal_id,cited_year`.
pub fn read_citations_csv(path: &Path) -> Result<CitationNetwork, AtypicalityError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| AtypicalityError::BadCsv { line: 0, detail: e.to_string() })?;
    let mut rows = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| AtypicalityError::BadCsv { line: i + 2, detail: e.to_string() })?;
        let get = |idx: usize, what: &str| {
            row.get(idx)
                .map(str::to_string)
                .ok_or_else(|| AtypicalityError::BadCsv { line: i + 2, detail: format!("missing {what}") })
        };
        let paper = get(0, "paper_id")?;
        let citing_year: i32 = get(1, "year")?
            .trim()
            .parse()
            .map_err(|_| AtypicalityError::BadCsv { line: i + 2, detail: "bad year".to_string() })?;
        let journal = get(2, "journal_id")?;
        let cited_year: i32 = get(3, "cited_year")?
            .trim()
            .parse()
            .map_err(|_| AtypicalityError::BadCsv { line: i + 2, detail: "bad cited_year".to_string() })?;
        rows.push((paper, citing_year, journal, cited_year));
    }
    CitationNetwork::new(rows)
}

/// Write per-paper summaries as CSV: paper_id, median_z, p10_z, quadrant.
pub fn write_summaries_csv(path: &Path, summaries: &[PaperZSummary]) -> Result<(), AtypicalityError> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    writeln!(out, "paper_id,median_z,p10_z,quadrant").map_err(|e| io_err(path, e))?;
    for s in summaries {
        writeln!(
            out,
            "{},{:.12},{:.12},{}",
            s.paper_id,
            s.median_z,
            s.p10_z,
            s.quadrant.map(Quadrant::label).unwrap_or("")
        )
        .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}
