//! Synthetic fixture generators with planted structure: a two-topic corpus
//! for embedding and retrieval, citation data with a controllable
//! first-ever-pair schedule, planted two-family time series, and analysis
//! tables drawn from known regression models.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{RawDocument, Source};
use crate::novelty::ReferenceRecord;
use crate::tsclust::TimeSeries;

/// Scalar draws used across the generators and the estimation tests.
pub mod draws {
    use rand::Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    pub fn uniform<R: Rng>(rng: &mut R) -> f64 {
        rng.random()
    }

    /// Standard normal via the inverse CDF.
    pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
        let n = Normal::new(0.0, 1.0).expect("unit normal");
        // keep u strictly inside (0, 1)
        let u = rng.random::<f64>().clamp(1e-300, 1.0 - 1e-16);
        n.inverse_cdf(u)
    }

    /// Gamma(shape, scale) by Marsaglia-Tsang squeeze.
    pub fn gamma<R: Rng>(shape: f64, scale: f64, rng: &mut R) -> f64 {
        assert!(shape > 0.0 && scale > 0.0);
        if shape < 1.0 {
            let boost = uniform(rng).powf(1.0 / shape);
            return gamma(shape + 1.0, scale, rng) * boost;
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = standard_normal(rng);
            let v = (1.0 + c * x).powi(3);
            if v <= 0.0 {
                continue;
            }
            let u = uniform(rng);
            if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
                return d * v * scale;
            }
        }
    }

    /// Poisson by exponential inter-arrival counting; fine for modest λ.
    pub fn poisson<R: Rng>(lambda: f64, rng: &mut R) -> u64 {
        assert!((0.0..1e5).contains(&lambda), "lambda out of supported range");
        let mut t = 0.0;
        let mut n = 0u64;
        loop {
            t += -uniform(rng).ln();
            if t >= lambda {
                return n;
            }
            n += 1;
        }
    }

    /// Negative binomial with mean `mu` and dispersion `alpha`
    /// (variance μ + α μ²), as a gamma-mixed Poisson.
    pub fn negbin_draw<R: Rng>(mu: f64, alpha: f64, rng: &mut R) -> f64 {
        let r = 1.0 / alpha;
        let lambda = gamma(r, mu / r, rng);
        poisson(lambda, rng) as f64
    }
}

// ---- corpus ----------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusParams {
    pub docs_per_topic: usize,
    pub vocab_per_topic: usize,
    pub tokens_per_doc: usize,
    pub first_year: i32,
    pub last_year: i32,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            docs_per_topic: 400,
            vocab_per_topic: 300,
            tokens_per_doc: 60,
            first_year: 2000,
            last_year: 2018,
        }
    }
}

/// Phrases planted in topic-0 documents; the first one is the seed term
/// of the replication recipe.
pub const TOPIC_A_PHRASES: [&[&str]; 4] = [
    &["deep", "learning"],
    &["neural", "network"],
    &["neural", "networks"],
    &["convolutional", "neural", "network"],
];

pub const TOPIC_B_PHRASES: [&[&str]; 2] = [&["protein", "folding"], &["clinical", "trial"]];

const CS_CATEGORY: &str = "Computer Science, Artificial Intelligence";
const HS_CATEGORY: &str = "Radiology";

/// Two disjoint co-occurrence topics with planted phrases. Topic 0 carries
/// the method vocabulary and a computer-science category, topic 1 an
/// application vocabulary and a health category.
pub fn gen_corpus(params: &CorpusParams, seed: u64) -> Vec<RawDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(2 * params.docs_per_topic);
    for topic in 0..2usize {
        let prefix = if topic == 0 { "meth" } else { "appl" };
        let phrases: &[&[&str]] = if topic == 0 { &TOPIC_A_PHRASES } else { &TOPIC_B_PHRASES };
        for d in 0..params.docs_per_topic {
            let mut tokens: Vec<String> = Vec::with_capacity(params.tokens_per_doc + 8);
            while tokens.len() < params.tokens_per_doc {
                // sprinkle planted phrases between topic-specific words
                if rng.random::<f64>() < 0.25 {
                    let phrase = phrases[rng.random_range(0..phrases.len())];
                    tokens.extend(phrase.iter().map(|w| w.to_string()));
                } else {
                    tokens.push(format!("{prefix}{:04}", rng.random_range(0..params.vocab_per_topic)));
                }
            }
            let (title_tokens, abstract_tokens) = tokens.split_at(6.min(tokens.len()));
            let year =
                params.first_year + rng.random_range(0..=(params.last_year - params.first_year));
            let mut categories = BTreeSet::new();
            categories.insert(if topic == 0 { CS_CATEGORY } else { HS_CATEGORY }.to_string());
            docs.push(RawDocument {
                id: format!("doc{:05}", topic * params.docs_per_topic + d),
                year,
                title: title_tokens.join(" "),
                abstract_text: abstract_tokens.join(" "),
                keywords: vec![],
                venue_id: format!("venue{}{}", prefix, d % 7),
                subject_categories: categories,
                source: Source::Synthetic,
            });
        }
    }
    docs
}

// ---- citations --------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedNovelty {
    pub focal_year: i32,
    /// Papers re-using the planted pair within the three following years.
    pub reuse_times: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CitationParams {
    pub background_journals: usize,
    pub papers_per_year: usize,
    pub first_year: i32,
    pub last_year: i32,
    pub min_refs: usize,
    pub max_refs: usize,
    pub planted: Vec<PlantedNovelty>,
}

impl Default for CitationParams {
    fn default() -> Self {
        CitationParams {
            background_journals: 12,
            papers_per_year: 14,
            first_year: 1996,
            last_year: 2012,
            min_refs: 3,
            max_refs: 6,
            planted: vec![PlantedNovelty { focal_year: 2004, reuse_times: 5 }],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedNoveltyTruth {
    pub paper_id: String,
    pub focal_year: i32,
    pub pair: (String, String),
    pub reuse_times: u32,
}

#[derive(Debug, Clone)]
pub struct CitationData {
    pub records: Vec<ReferenceRecord>,
    /// Cited-work year per reference, aligned with each record's journals.
    pub cited_years: Vec<Vec<i32>>,
    pub truth: Vec<PlantedNoveltyTruth>,
}

/// Background papers cite only adjacent background-journal runs, so pairs of
/// non-adjacent journals never form by accident. Each planted event uses a
/// reserved journal pair that appears nowhere else, first in the focal year,
/// then in exactly `reuse_times` follow-up papers.
pub fn gen_citations(params: &CitationParams, seed: u64) -> CitationData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut cited_years = Vec::new();
    let mut truth = Vec::new();
    let journal = |j: usize| format!("jnl{j:03}");

    let mut paper_counter = 0usize;
    let mut push_paper = |year: i32,
                          journals: Vec<String>,
                          records: &mut Vec<ReferenceRecord>,
                          cited_years: &mut Vec<Vec<i32>>,
                          rng: &mut ChaCha8Rng|
     -> String {
        let id = format!("paper{paper_counter:05}");
        paper_counter += 1;
        let lags: Vec<i32> = journals.iter().map(|_| year - 1 - rng.random_range(0..5)).collect();
        records.push(ReferenceRecord { paper_id: id.clone(), year, journals });
        cited_years.push(lags);
        id
    };

    for year in params.first_year..=params.last_year {
        for _ in 0..params.papers_per_year {
            let n_refs = rng.random_range(params.min_refs..=params.max_refs);
            let start = rng.random_range(0..params.background_journals.saturating_sub(n_refs).max(1));
            let journals: Vec<String> = (0..n_refs)
                .map(|k| journal((start + k) % params.background_journals))
                .collect();
            push_paper(year, journals, &mut records, &mut cited_years, &mut rng);
        }
    }

    for (event, planted) in params.planted.iter().enumerate() {
        let a = journal(params.background_journals + 2 * event);
        let b = journal(params.background_journals + 2 * event + 1);
        let id = push_paper(
            planted.focal_year,
            vec![a.clone(), b.clone()],
            &mut records,
            &mut cited_years,
            &mut rng,
        );
        for k in 0..planted.reuse_times {
            let reuse_year = planted.focal_year + 1 + (k as i32 % 3);
            push_paper(reuse_year, vec![a.clone(), b.clone()], &mut records, &mut cited_years, &mut rng);
        }
        truth.push(PlantedNoveltyTruth {
            paper_id: id,
            focal_year: planted.focal_year,
            pair: (a, b),
            reuse_times: planted.reuse_times,
        });
    }
    CitationData { records, cited_years, truth }
}

/// Journal-category map for generated citation data: background journals
/// alternate between a health-science and a general category; every third
/// one is additionally computer science. Reserved (planted) journals are
/// uniquely health-science so planted pairs qualify in every scope.
pub fn gen_journal_categories(params: &CitationParams) -> Vec<(String, String)> {
    let mut rows = Vec::new();
    for j in 0..params.background_journals {
        let id = format!("jnl{j:03}");
        if j % 3 == 0 {
            rows.push((id.clone(), "CS".to_string()));
        }
        if j % 2 == 0 {
            rows.push((id, "HS".to_string()));
        } else {
            rows.push((id, "GEN".to_string()));
        }
    }
    for j in params.background_journals..params.background_journals + 2 * params.planted.len().max(1) {
        rows.push((format!("jnl{j:03}"), "HS".to_string()));
    }
    rows
}

pub fn write_references_csv(path: &Path, data: &CitationData) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "paper_id,year,journal_id")?;
    for record in &data.records {
        for j in &record.journals {
            writeln!(out, "{},{},{}", record.paper_id, record.year, j)?;
        }
    }
    Ok(())
}

pub fn write_citations_csv(path: &Path, data: &CitationData) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "paper_id,year,journal_id,cited_year")?;
    for (record, lags) in data.records.iter().zip(&data.cited_years) {
        for (j, cited) in record.journals.iter().zip(lags) {
            writeln!(out, "{},{},{},{}", record.paper_id, record.year, j, cited)?;
        }
    }
    Ok(())
}

pub fn write_categories_csv(path: &Path, rows: &[(String, String)]) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "journal_id,category")?;
    for (journal, category) in rows {
        writeln!(out, "{journal},{category}")?;
    }
    Ok(())
}

// ---- time series ------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesParams {
    pub per_family: usize,
    pub length: usize,
    pub first_year: i32,
    pub noise: f64,
}

impl Default for SeriesParams {
    fn default() -> Self {
        SeriesParams { per_family: 9, length: 16, first_year: 2000, noise: 0.08 }
    }
}

/// Two planted families: early-peaked profiles that decay, and late-rising
/// profiles, mimicking citation-share curves of old and new cohorts.
pub fn gen_series(params: &SeriesParams, seed: u64) -> Vec<TimeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series = Vec::new();
    for family in 0..2usize {
        for i in 0..params.per_family {
            let values: Vec<f64> = (0..params.length)
                .map(|t| {
                    let x = t as f64 / (params.length - 1) as f64;
                    let base = if family == 0 { 1.0 - x } else { x };
                    (base + (rng.random::<f64>() - 0.5) * params.noise).max(0.0)
                })
                .collect();
            series.push(TimeSeries {
                id: format!("{}{:02}", if family == 0 { "legacy" } else { "rising" }, i),
                start_year: params.first_year,
                values,
            });
        }
    }
    series
}

pub fn write_series_csv(path: &Path, series: &[TimeSeries]) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "series_id,year,value")?;
    for s in series {
        for (i, v) in s.values.iter().enumerate() {
            writeln!(out, "{},{},{v}", s.id, s.start_year + i as i32)?;
        }
    }
    Ok(())
}

// ---- analysis table ----------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub rows: usize,
    pub journals: usize,
    pub fields: usize,
    pub years: usize,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams { rows: 6000, journals: 80, fields: 4, years: 6 }
    }
}

/// The coefficients behind a generated analysis table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisTruth {
    /// Probit: novelty_dummy on (const, dl, log_refs).
    pub probit: [f64; 3],
    /// Tobit: novelty on (const, dl, log_refs), with noise sd.
    pub tobit: [f64; 3],
    pub tobit_sigma: f64,
    /// Negative binomial mean block on (const, dl, log_refs).
    pub negbin_mean: [f64; 3],
    /// Negative binomial dispersion block on (const, dl).
    pub negbin_disp: [f64; 2],
}

impl Default for AnalysisTruth {
    fn default() -> Self {
        AnalysisTruth {
            probit: [-0.3, -0.25, 0.35],
            tobit: [-0.4, -0.186, 0.5],
            tobit_sigma: 0.7,
            negbin_mean: [0.8, 0.101, 0.3],
            negbin_disp: [-0.5, 0.136],
            }
    }
}

/// Draw an analysis table from the truth above: per-paper covariates,
/// journal cluster ids, and four response columns (binary, censored,
/// count, and quadrant labels).
pub fn gen_analysis(
    params: &AnalysisParams,
    truth: &AnalysisTruth,
    seed: u64,
) -> crate::econ::DataTable {
    use draws::{negbin_draw, standard_normal, uniform};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let headers: Vec<String> = [
        "paper_id",
        "journal",
        "field",
        "year",
        "dl",
        "log_refs",
        "novelty_dummy",
        "novelty",
        "citations",
        "quadrant",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();

    let mut rows = Vec::with_capacity(params.rows);
    for i in 0..params.rows {
        let journal = format!("j{:03}", rng.random_range(0..params.journals));
        let field = format!("f{}", rng.random_range(0..params.fields));
        let year = 2010 + rng.random_range(0..params.years) as i32;
        let dl = f64::from(uniform(&mut rng) < 0.3);
        let log_refs = 2.5 + standard_normal(&mut rng) * 0.6;

        let eta_probit = truth.probit[0] + truth.probit[1] * dl + truth.probit[2] * log_refs;
        let novelty_dummy = f64::from(eta_probit + standard_normal(&mut rng) > 0.0);

        let eta_tobit = truth.tobit[0] + truth.tobit[1] * dl + truth.tobit[2] * log_refs;
        let novelty = (eta_tobit + truth.tobit_sigma * standard_normal(&mut rng)).max(0.0);

        let mu = (truth.negbin_mean[0] + truth.negbin_mean[1] * dl + truth.negbin_mean[2] * log_refs)
            .exp();
        let alpha = (truth.negbin_disp[0] + truth.negbin_disp[1] * dl).exp();
        let citations = negbin_draw(mu, alpha, &mut rng);

        let quadrant = ["HC-HN", "HC-LN", "LC-HN", "LC-LN"][rng.random_range(0..4)];

        rows.push(vec![
            format!("p{i:05}"),
            journal,
            field,
            year.to_string(),
            format!("{dl}"),
            format!("{log_refs:.6}"),
            format!("{novelty_dummy}"),
            format!("{novelty:.6}"),
            format!("{citations}"),
            quadrant.to_string(),
        ]);
    }
    crate::econ::DataTable { headers, rows }
}

pub fn write_table_csv(path: &Path, table: &crate::econ::DataTable) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", table.headers.join(","))?;
    for row in &table.rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
