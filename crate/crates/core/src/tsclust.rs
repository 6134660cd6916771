//! Time-series clustering: dynamic time warping dissimilarity with
//! k-medoid (PAM) partitioning, plus the per-cluster envelopes used for
//! plotting.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;

#[derive(Debug, Error)]
pub enum TsError {
    #[error("empty series {0:?}")]
    EmptySeries(String),
    #[error("band {band} is infeasible for lengths {a} and {b}")]
    InfeasibleBand { band: usize, a: usize, b: usize },
    #[error("k = {k} exceeds the number of series ({n})")]
    TooManyClusters { k: usize, n: usize },
    #[error("series {id:?} has a gap at year {year}")]
    YearGap { id: String, year: i32 },
    #[error("non-finite value in series {0:?}")]
    NonFinite(String),
    #[error("bad series csv at line {line}: {detail}")]
    BadCsv { line: usize, detail: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path, source: std::io::Error) -> TsError {
    TsError::Io { path: path.display().to_string(), source }
}

/// An annual series of values (for example citation shares).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub start_year: i32,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn validate(&self) -> Result<(), TsError> {
        if self.values.is_empty() {
            return Err(TsError::EmptySeries(self.id.clone()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(TsError::NonFinite(self.id.clone()));
        }
        Ok(())
    }

    /// Standardize to zero mean and unit variance (no-op on constant series).
    pub fn z_normalize(&mut self) {
        let mean = crate::stats::mean(&self.values);
        let sd = crate::stats::sample_sd(&self.values);
        if sd > 0.0 {
            for v in self.values.iter_mut() {
                *v = (*v - mean) / sd;
            }
        }
    }
}

/// Local cost between two aligned samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalCost {
    Abs,
    Squared,
}

impl LocalCost {
    fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            LocalCost::Abs => (a - b).abs(),
            LocalCost::Squared => (a - b) * (a - b),
        }
    }
}

/// Minimal cumulative alignment cost between two series under the
/// diagonal/horizontal/vertical step pattern, optionally constrained to a
/// Sakoe-Chiba band of half-width `band`.
pub fn dtw(a: &[f64], b: &[f64], band: Option<usize>, cost: LocalCost) -> Result<f64, TsError> {
    if a.is_empty() || b.is_empty() {
        return Err(TsError::EmptySeries(String::new()));
    }
    if let Some(w) = band {
        let diff = a.len().abs_diff(b.len());
        if w < diff {
            return Err(TsError::InfeasibleBand { band: w, a: a.len(), b: b.len() });
        }
    }
    let n = a.len();
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        cur.fill(f64::INFINITY);
        let (j_lo, j_hi) = match band {
            Some(w) => (i.saturating_sub(w).max(1), (i + w).min(m)),
            None => (1, m),
        };
        for j in j_lo..=j_hi {
            let c = cost.eval(a[i - 1], b[j - 1]);
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = c + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Condensed symmetric distance matrix over n items.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.data[lo * self.n - lo * (lo + 1) / 2 + (hi - lo - 1)]
    }
}

/// All pairwise DTW distances; cells are independent and run in parallel.
pub fn distance_matrix(
    series: &[TimeSeries],
    band: Option<usize>,
    cost: LocalCost,
) -> Result<DistanceMatrix, TsError> {
    for s in series {
        s.validate()?;
    }
    let n = series.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let cells = exec::map_slice(&pairs, |&(i, j)| {
        dtw(&series[i].values, &series[j].values, band, cost)
    });
    let mut data = Vec::with_capacity(pairs.len());
    for cell in cells {
        data.push(cell?);
    }
    Ok(DistanceMatrix { n, data })
}

/// Sequential twin of [`distance_matrix`], for benches and fallback.
pub fn distance_matrix_seq(
    series: &[TimeSeries],
    band: Option<usize>,
    cost: LocalCost,
) -> Result<DistanceMatrix, TsError> {
    for s in series {
        s.validate()?;
    }
    let n = series.len();
    let mut data = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            data.push(dtw(&series[i].values, &series[j].values, band, cost)?);
        }
    }
    Ok(DistanceMatrix { n, data })
}

/// A PAM clustering: medoids are actual members.
#[derive(Debug, Clone)]
pub struct MedoidClustering {
    pub k: usize,
    pub medoids: Vec<usize>,
    pub labels: Vec<usize>,
    pub total_cost: f64,
    /// Cost after the build phase and after each accepted swap.
    pub cost_trace: Vec<f64>,
}

/// Partitioning around medoids: greedy build initialization, then swaps
/// until no cost-improving swap remains. Deterministic; ties break toward
/// the lower index.
pub fn kmedoids(dist: &DistanceMatrix, k: usize, max_iter: usize) -> Result<MedoidClustering, TsError> {
    let n = dist.len();
    if k > n || k == 0 {
        return Err(TsError::TooManyClusters { k, n });
    }

    // BUILD: start from the 1-medoid optimum, then add the point that
    // lowers total cost the most.
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let first = (0..n)
        .min_by(|&a, &b| {
            total_to(dist, a).partial_cmp(&total_to(dist, b)).unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("n >= 1");
    medoids.push(first);
    let mut nearest: Vec<f64> = (0..n).map(|i| dist.get(i, first)).collect();
    while medoids.len() < k {
        let mut best = usize::MAX;
        let mut best_gain = f64::NEG_INFINITY;
        for cand in 0..n {
            if medoids.contains(&cand) {
                continue;
            }
            let gain: f64 =
                (0..n).map(|i| (nearest[i] - dist.get(i, cand)).max(0.0)).sum();
            if gain > best_gain {
                best_gain = gain;
                best = cand;
            }
        }
        medoids.push(best);
        for i in 0..n {
            nearest[i] = nearest[i].min(dist.get(i, best));
        }
    }

    let mut cost = assign_cost(dist, &medoids).1;
    let mut cost_trace = vec![cost];

    // SWAP: steepest descent over (medoid, candidate) exchanges.
    for _ in 0..max_iter {
        let mut best_swap: Option<(usize, usize, f64)> = None;
        for (mi, &_m) in medoids.iter().enumerate() {
            for cand in 0..n {
                if medoids.contains(&cand) {
                    continue;
                }
                let mut trial = medoids.clone();
                trial[mi] = cand;
                let (_, trial_cost) = assign_cost(dist, &trial);
                if trial_cost < cost - 1e-12 {
                    let better = match best_swap {
                        None => true,
                        Some((_, _, prev)) => trial_cost < prev,
                    };
                    if better {
                        best_swap = Some((mi, cand, trial_cost));
                    }
                }
            }
        }
        match best_swap {
            Some((mi, cand, new_cost)) => {
                medoids[mi] = cand;
                cost = new_cost;
                cost_trace.push(cost);
            }
            None => break,
        }
    }

    let (labels, total_cost) = assign_cost(dist, &medoids);
    Ok(MedoidClustering { k, medoids, labels, total_cost, cost_trace })
}

fn total_to(dist: &DistanceMatrix, center: usize) -> f64 {
    (0..dist.len()).map(|i| dist.get(i, center)).sum()
}

fn assign_cost(dist: &DistanceMatrix, medoids: &[usize]) -> (Vec<usize>, f64) {
    let n = dist.len();
    let mut labels = vec![0usize; n];
    let mut cost = 0.0;
    for i in 0..n {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, &m) in medoids.iter().enumerate() {
            let d = dist.get(i, m);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
        cost += best_d;
    }
    (labels, cost)
}

/// Mean silhouette coefficient of a labeling under the given distances.
pub fn silhouette(dist: &DistanceMatrix, labels: &[usize], k: usize) -> f64 {
    let n = dist.len();
    if n < 2 || k < 2 {
        return 0.0;
    }
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if i != j {
                sums[labels[j]] += dist.get(i, j);
                counts[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if counts[own] == 0 {
            scores.push(0.0);
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if !b.is_finite() {
            scores.push(0.0);
        } else {
            scores.push((b - a) / a.max(b));
        }
    }
    crate::stats::mean(&scores)
}

/// Silhouette for each k in `[2, k_max]`, fitting PAM per k.
pub fn silhouette_sweep(
    dist: &DistanceMatrix,
    k_max: usize,
    max_iter: usize,
) -> Result<Vec<(usize, f64)>, TsError> {
    let k_hi = k_max.min(dist.len());
    (2..=k_hi)
        .map(|k| {
            let clustering = kmedoids(dist, k, max_iter)?;
            Ok((k, silhouette(dist, &clustering.labels, k)))
        })
        .collect()
}

/// Per-cluster min/mean/max per year, for plotting shaded envelopes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterEnvelope {
    pub cluster: usize,
    pub years: Vec<i32>,
    pub min: Vec<f64>,
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn cluster_envelopes(series: &[TimeSeries], labels: &[usize], k: usize) -> Vec<ClusterEnvelope> {
    let mut envelopes = Vec::with_capacity(k);
    for cluster in 0..k {
        let members: Vec<&TimeSeries> = series
            .iter()
            .zip(labels)
            .filter(|&(_, &l)| l == cluster)
            .map(|(s, _)| s)
            .collect();
        let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
        for s in &members {
            for (i, &v) in s.values.iter().enumerate() {
                by_year.entry(s.start_year + i as i32).or_default().push(v);
            }
        }
        let mut env = ClusterEnvelope {
            cluster,
            years: Vec::new(),
            min: Vec::new(),
            mean: Vec::new(),
            max: Vec::new(),
        };
        for (year, values) in by_year {
            env.years.push(year);
            env.min.push(values.iter().copied().fold(f64::INFINITY, f64::min));
            env.max.push(values.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            env.mean.push(crate::stats::mean(&values));
        }
        envelopes.push(env);
    }
    envelopes
}

/// Read series from CSV with header `series_id,year,value`; years within
/// a series must be contiguous.
pub fn read_series_csv(path: &Path) -> Result<Vec<TimeSeries>, TsError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| TsError::BadCsv { line: 0, detail: e.to_string() })?;
    let mut rows: Vec<(String, i32, f64)> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| TsError::BadCsv { line: i + 2, detail: e.to_string() })?;
        let id = row.get(0).unwrap_or("").to_string();
        let year: i32 = row
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| TsError::BadCsv { line: i + 2, detail: "bad year".to_string() })?;
        let value: f64 = row
            .get(2)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| TsError::BadCsv { line: i + 2, detail: "bad value".to_string() })?;
        rows.push((id, year, value));
    }
    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, BTreeMap<i32, f64>> = BTreeMap::new();
    for (id, year, value) in rows {
        if !grouped.contains_key(&id) {
            order.push(id.clone());
        }
        grouped.entry(id).or_default().insert(year, value);
    }
    let mut series = Vec::with_capacity(order.len());
    for id in order {
        let by_year = grouped.remove(&id).expect("grouped above");
        let (&start_year, _) = by_year.iter().next().expect("non-empty group");
        let mut values = Vec::with_capacity(by_year.len());
        for (i, (&year, &value)) in by_year.iter().enumerate() {
            if year != start_year + i as i32 {
                return Err(TsError::YearGap { id, year });
            }
            values.push(value);
        }
        let ts = TimeSeries { id, start_year, values };
        ts.validate()?;
        series.push(ts);
    }
    Ok(series)
}

/// Write labels CSV (series_id, cluster) and the full distance matrix TSV.
pub fn write_labels_csv(
    path: &Path,
    series: &[TimeSeries],
    clustering: &MedoidClustering,
) -> Result<(), TsError> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    writeln!(out, "series_id,cluster").map_err(|e| io_err(path, e))?;
    for (s, &label) in series.iter().zip(&clustering.labels) {
        writeln!(out, "{},{}", s.id, label).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn write_distance_tsv(
    path: &Path,
    series: &[TimeSeries],
    dist: &DistanceMatrix,
) -> Result<(), TsError> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let header: Vec<&str> = series.iter().map(|s| s.id.as_str()).collect();
    writeln!(out, "series_id\t{}", header.join("\t")).map_err(|e| io_err(path, e))?;
    for (i, s) in series.iter().enumerate() {
        let row: Vec<String> =
            (0..series.len()).map(|j| format!("{:.12}", dist.get(i, j))).collect();
        writeln!(out, "{}\t{}", s.id, row.join("\t")).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}
