//! Clustering of the embedding space and distillation of the cluster around
//! a seed term into a filtered search-term list.
//!
//! Vectors are L2-normalized before clustering so that squared Euclidean
//! distance equals `2 − 2·cosine` and k-means respects cosine geometry.

use std::collections::{BTreeSet, HashMap, HashSet};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::embed::EmbeddingModel;
use crate::exec;
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("k = {k} exceeds the number of points ({points})")]
    TooManyClusters { k: usize, points: usize },
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("no points to cluster")]
    NoPoints,
    #[error("gap statistic needs k_max >= 2 and n_refs >= 1")]
    BadGapConfig,
    #[error("seed token {token:?} is not in the clustered vocabulary")]
    MissingSeedToken { token: String },
}

/// Result of one k-means run (the best of all restarts).
#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    pub k: usize,
    /// Cluster id per input point.
    pub labels: Vec<usize>,
    /// Row-major k×D centroid matrix.
    pub centroids: Vec<f64>,
    pub dim: usize,
    /// Total within-cluster squared Euclidean distance.
    pub inertia: f64,
    /// Inertia after every Lloyd iteration of the winning run.
    pub inertia_trace: Vec<f64>,
}

pub const MAX_LLOYD_ITERATIONS: usize = 300;

/// Normalize each point to unit L2 norm; zero vectors are left unchanged.
pub fn l2_normalize(points: &mut [Vec<f64>]) {
    for p in points.iter_mut() {
        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in p.iter_mut() {
                *x /= norm;
            }
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by
/// inertia (ties broken by run index).
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<ClusterAssignment, ClusterError> {
    if points.is_empty() {
        return Err(ClusterError::NoPoints);
    }
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if k > points.len() {
        return Err(ClusterError::TooManyClusters { k, points: points.len() });
    }
    let runs = exec::map_indices(restarts.max(1), |run| {
        kmeans_single(points, k, derive_seed(seed, "kmeans-restart", run as u64))
    });
    // Deterministic winner: lowest inertia, then lowest run index.
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.inertia.partial_cmp(&b.inertia).unwrap_or(std::cmp::Ordering::Equal).then(ia.cmp(ib))
        })
        .map(|(_, run)| run)
        .expect("at least one restart");
    Ok(best)
}

fn kmeans_single(points: &[Vec<f64>], k: usize, seed: u64) -> ClusterAssignment {
    let n = points.len();
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut dists: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dists.iter().sum();
        let next = if total <= 0.0 {
            // all mass at existing centroids; any point works
            rng.random_range(0..n)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dists.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(points[next].clone());
        for (d, p) in dists.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, centroids.last().expect("just pushed")));
        }
    }

    let mut labels = vec![0usize; n];
    let mut inertia_trace = Vec::new();
    let mut inertia = f64::INFINITY;
    for _ in 0..MAX_LLOYD_ITERATIONS {
        // assignment step
        let mut changed = false;
        let mut total = 0.0;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
            total += best_d;
        }
        inertia = total;
        inertia_trace.push(total);
        if !changed && inertia_trace.len() > 1 {
            break;
        }
        // update step
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[labels[i]] += 1;
            for (s, x) in sums[labels[i]].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed an emptied cluster with the point farthest from its centroid
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centroids[labels[a]])
                            .partial_cmp(&sq_dist(&points[b], &centroids[labels[b]]))
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .expect("non-empty points");
                centroids[c] = points[far].clone();
            } else {
                for (dst, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
    }

    ClusterAssignment {
        k,
        labels,
        centroids: centroids.into_iter().flatten().collect(),
        dim,
        inertia,
        inertia_trace,
    }
}

/// One row of a gap-statistic report.
#[derive(Debug, Clone, Copy)]
pub struct GapPoint {
    pub k: usize,
    pub log_within: f64,
    pub expected_log_within: f64,
    pub gap: f64,
    pub se: f64,
}

#[derive(Debug, Clone)]
pub struct GapReport {
    pub per_k: Vec<GapPoint>,
    pub chosen_k: usize,
}

/// Choose the number of clusters by comparing within-cluster dispersion
/// against reference data drawn uniformly in the PCA-aligned bounding box,
/// picking the smallest k with `gap(k) >= gap(k+1) − se(k+1)`.
pub fn gap_statistic(
    points: &[Vec<f64>],
    k_max: usize,
    n_refs: usize,
    restarts: usize,
    seed: u64,
) -> Result<GapReport, ClusterError> {
    if points.is_empty() {
        return Err(ClusterError::NoPoints);
    }
    if k_max < 2 || n_refs < 1 {
        return Err(ClusterError::BadGapConfig);
    }
    let k_max = k_max.min(points.len());
    let dim = points[0].len();
    let n = points.len();

    // Degenerate data: a single distinct point cannot support k > 1.
    let spread: f64 = {
        let first = &points[0];
        points.iter().map(|p| sq_dist(p, first)).sum()
    };
    if spread <= 1e-24 {
        return Ok(GapReport { per_k: Vec::new(), chosen_k: 1 });
    }

    // Rotate into the principal axes; k-means inertia is rotation-invariant,
    // so both data and references can be clustered in this frame.
    let mut mean = vec![0.0; dim];
    for p in points {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x / n as f64;
        }
    }
    let mut cov: DMatrix<f64> = DMatrix::zeros(dim, dim);
    for p in points {
        for i in 0..dim {
            for j in 0..dim {
                cov[(i, j)] += (p[i] - mean[i]) * (p[j] - mean[j]) / n as f64;
            }
        }
    }
    let eigen = SymmetricEigen::new(cov);
    let rotation = eigen.eigenvectors;
    let rotated: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            (0..dim)
                .map(|j| (0..dim).map(|i| (p[i] - mean[i]) * rotation[(i, j)]).sum::<f64>())
                .collect()
        })
        .collect();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in &rotated {
        for d in 0..dim {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }

    let log_within: Vec<f64> = (1..=k_max)
        .map(|k| {
            Ok(kmeans(points, k, restarts, derive_seed(seed, "gap-data", k as u64))?
                .inertia
                .max(1e-300)
                .ln())
        })
        .collect::<Result<_, ClusterError>>()?;

    // Reference draws, one independent stream per replicate.
    let ref_logs: Vec<Vec<f64>> = exec::map_indices(n_refs, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "gap-ref", b as u64));
        let sample: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|d| lo[d] + rng.random::<f64>() * (hi[d] - lo[d])).collect())
            .collect();
        (1..=k_max)
            .map(|k| {
                kmeans(&sample, k, restarts, derive_seed(seed, "gap-ref-run", (b * k_max + k) as u64))
                    .expect("k <= n by construction")
                    .inertia
                    .max(1e-300)
                    .ln()
            })
            .collect()
    });

    let mut per_k = Vec::with_capacity(k_max);
    for (idx, k) in (1..=k_max).enumerate() {
        let logs: Vec<f64> = ref_logs.iter().map(|r| r[idx]).collect();
        let expected = crate::stats::mean(&logs);
        let sd =
            (logs.iter().map(|l| (l - expected) * (l - expected)).sum::<f64>() / n_refs as f64).sqrt();
        let se = sd * (1.0 + 1.0 / n_refs as f64).sqrt();
        per_k.push(GapPoint {
            k,
            log_within: log_within[idx],
            expected_log_within: expected,
            gap: expected - log_within[idx],
            se,
        });
    }

    let mut chosen_k = k_max;
    for w in per_k.windows(2) {
        if w[0].gap >= w[1].gap - w[1].se {
            chosen_k = w[0].k;
            break;
        }
    }
    Ok(GapReport { per_k, chosen_k })
}

/// Token-level clustering of an embedding model.
#[derive(Debug, Clone)]
pub struct TokenClusters {
    pub assignment: ClusterAssignment,
    /// Token per point, aligned with `assignment.labels`.
    pub tokens: Vec<String>,
}

impl TokenClusters {
    pub fn label_of(&self, token: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == token).map(|i| self.assignment.labels[i])
    }
}

/// Cluster the model's input vectors (L2-normalized) into k clusters.
pub fn cluster_embeddings(
    model: &EmbeddingModel,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<TokenClusters, ClusterError> {
    let mut points: Vec<Vec<f64>> =
        (0..model.vocab_size()).map(|i| model.input_vector(i).to_vec()).collect();
    l2_normalize(&mut points);
    let assignment = kmeans(&points, k, restarts, seed)?;
    Ok(TokenClusters { assignment, tokens: model.tokens.clone() })
}

/// All tokens sharing the seed token's cluster.
pub fn select_seed_cluster(
    clusters: &TokenClusters,
    seed_token: &str,
) -> Result<BTreeSet<String>, ClusterError> {
    let label = clusters
        .label_of(seed_token)
        .ok_or_else(|| ClusterError::MissingSeedToken { token: seed_token.to_string() })?;
    Ok(clusters
        .tokens
        .iter()
        .zip(&clusters.assignment.labels)
        .filter(|&(_, &l)| l == label)
        .map(|(t, _)| t.clone())
        .collect())
}

/// An ordered search-term list with per-term corpus frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchTermList {
    pub terms: Vec<String>,
    pub frequencies: Vec<u64>,
}

impl SearchTermList {
    pub fn from_terms(terms: Vec<String>) -> SearchTermList {
        let frequencies = vec![0; terms.len()];
        SearchTermList { terms, frequencies }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Write terms as newline-delimited text.
    pub fn write_text(&self, path: &std::path::Path) -> std::io::Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for term in &self.terms {
            writeln!(out, "{term}")?;
        }
        Ok(())
    }

    pub fn read_text(path: &std::path::Path) -> std::io::Result<SearchTermList> {
        let text = std::fs::read_to_string(path)?;
        Ok(SearchTermList::from_terms(
            text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect(),
        ))
    }
}

/// Write a cluster report as TSV: token, cluster id, corpus frequency.
pub fn write_cluster_report(
    path: &std::path::Path,
    clusters: &TokenClusters,
    frequencies: &HashMap<String, u64>,
) -> std::io::Result<()> {
    use std::io::Write;
    let mut rows: Vec<(usize, &String)> =
        clusters.assignment.labels.iter().copied().zip(clusters.tokens.iter()).collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (label, token) in rows {
        let freq = frequencies.get(token).copied().unwrap_or(0);
        writeln!(out, "{token}\t{label}\t{freq}")?;
    }
    Ok(())
}

/// The generic-term blocklist shipped with the crate.
pub fn builtin_blocklist() -> HashSet<String> {
    include_str!("../data/generic_terms.txt")
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

/// Distill cluster tokens into search terms: drop unigrams and blocklisted
/// terms, keep the `max_terms` most frequent, order by frequency then token.
pub fn extract_search_terms(
    cluster_tokens: &BTreeSet<String>,
    frequencies: &HashMap<String, u64>,
    blocklist: &HashSet<String>,
    max_terms: usize,
) -> SearchTermList {
    let mut candidates: Vec<(String, u64)> = cluster_tokens
        .iter()
        .filter(|t| t.contains('_'))
        .filter(|t| !blocklist.contains(t.as_str()))
        .map(|t| (t.clone(), frequencies.get(t).copied().unwrap_or(0)))
        .collect();
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    candidates.truncate(max_terms);
    let (terms, frequencies) = candidates.into_iter().unzip();
    SearchTermList { terms, frequencies }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(center: &[f64], n: usize, spread: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| center.iter().map(|c| c + (rng.random::<f64>() - 0.5) * spread).collect())
            .collect()
    }

    #[test]
    fn kmeans_separates_distant_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut points = blob(&[0.0, 0.0], 40, 0.5, &mut rng);
        points.extend(blob(&[100.0, 100.0], 40, 0.5, &mut rng));
        let result = kmeans(&points, 2, 4, 7).unwrap();
        let first = result.labels[0];
        assert!(result.labels[..40].iter().all(|&l| l == first));
        assert!(result.labels[40..].iter().all(|&l| l != first));
    }

    #[test]
    fn kmeans_k1_recovers_mean_and_total_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points = blob(&[3.0, -1.0, 2.0], 50, 2.0, &mut rng);
        let result = kmeans(&points, 1, 1, 0).unwrap();
        let n = points.len() as f64;
        for d in 0..3 {
            let mean: f64 = points.iter().map(|p| p[d]).sum::<f64>() / n;
            assert!((result.centroids[d] - mean).abs() < 1e-12);
        }
        let total: f64 = points.iter().map(|p| sq_dist(p, &result.centroids)).sum();
        assert!((result.inertia - total).abs() < 1e-9);
    }

    #[test]
    fn kmeans_k_equals_n_has_zero_inertia() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points = blob(&[0.0, 0.0], 8, 5.0, &mut rng);
        let result = kmeans(&points, 8, 2, 1).unwrap();
        assert!(result.inertia < 1e-18);
    }

    #[test]
    fn kmeans_rejects_k_above_n() {
        let points = vec![vec![0.0], vec![1.0]];
        assert!(matches!(kmeans(&points, 3, 1, 0), Err(ClusterError::TooManyClusters { .. })));
    }

    #[test]
    fn lloyd_inertia_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut points = blob(&[0.0, 0.0, 0.0], 60, 4.0, &mut rng);
        points.extend(blob(&[2.0, 2.0, 2.0], 60, 4.0, &mut rng));
        let result = kmeans(&points, 4, 1, 5).unwrap();
        for w in result.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "inertia increased: {:?}", result.inertia_trace);
        }
    }

    #[test]
    fn restart_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut points = blob(&[0.0; 4], 30, 3.0, &mut rng);
        points.extend(blob(&[4.0; 4], 30, 3.0, &mut rng));
        points.extend(blob(&[-4.0; 4], 10, 3.0, &mut rng));
        // restart seeds are a prefix-stable stream, so best-of-10 <= best-of-1
        let one = kmeans(&points, 3, 1, 9).unwrap();
        let ten = kmeans(&points, 3, 10, 9).unwrap();
        assert!(ten.inertia <= one.inertia + 1e-12);
    }

    #[test]
    fn normalization_turns_euclidean_into_cosine() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut points = blob(&[1.0, 2.0, 3.0], 20, 1.0, &mut rng);
        l2_normalize(&mut points);
        for a in points.iter().take(5) {
            for b in points.iter().take(5) {
                let cos = crate::stats::cosine(a, b);
                assert!((sq_dist(a, b) - (2.0 - 2.0 * cos)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gap_detects_three_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut points = blob(&[0.0; 4], 40, 1.0, &mut rng);
        points.extend(blob(&[10.0, 0.0, 0.0, 0.0], 40, 1.0, &mut rng));
        points.extend(blob(&[0.0, 10.0, 0.0, 0.0], 40, 1.0, &mut rng));
        let report = gap_statistic(&points, 6, 10, 3, 11).unwrap();
        assert_eq!(report.chosen_k, 3);
    }

    #[test]
    fn gap_on_identical_points_chooses_one() {
        let points = vec![vec![1.5, 2.5]; 30];
        let report = gap_statistic(&points, 5, 5, 2, 0).unwrap();
        assert_eq!(report.chosen_k, 1);
    }

    #[test]
    fn gap_on_uniform_cube_chooses_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let points: Vec<Vec<f64>> =
            (0..200).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let report = gap_statistic(&points, 5, 10, 3, 13).unwrap();
        assert_eq!(report.chosen_k, 1);
    }

    fn toy_clusters() -> TokenClusters {
        let tokens: Vec<String> =
            ["deep_learning", "neural_network", "alpha", "beta_gamma", "delta"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        TokenClusters {
            assignment: ClusterAssignment {
                k: 2,
                labels: vec![0, 0, 1, 0, 1],
                centroids: vec![0.0; 4],
                dim: 2,
                inertia: 0.0,
                inertia_trace: vec![],
            },
            tokens,
        }
    }

    #[test]
    fn seed_cluster_selection() {
        let clusters = toy_clusters();
        let cluster = select_seed_cluster(&clusters, "deep_learning").unwrap();
        let expected: BTreeSet<String> = ["deep_learning", "neural_network", "beta_gamma"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(cluster, expected);
        assert!(matches!(
            select_seed_cluster(&clusters, "absent"),
            Err(ClusterError::MissingSeedToken { .. })
        ));
    }

    #[test]
    fn seed_in_singleton_cluster_returns_itself() {
        let mut clusters = toy_clusters();
        clusters.assignment.labels = vec![0, 1, 1, 1, 1];
        let cluster = select_seed_cluster(&clusters, "deep_learning").unwrap();
        assert_eq!(cluster.len(), 1);
        assert!(cluster.contains("deep_learning"));
    }

    #[test]
    fn search_terms_drop_unigrams_and_blocklist() {
        let cluster: BTreeSet<String> = ["short_term", "deep_learning", "alpha", "neural_network"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let freqs: HashMap<String, u64> =
            [("short_term", 900), ("deep_learning", 500), ("alpha", 800), ("neural_network", 700)]
                .iter()
                .map(|&(t, c)| (t.to_string(), c))
                .collect();
        let blocklist: HashSet<String> = ["short_term".to_string()].into_iter().collect();
        let list = extract_search_terms(&cluster, &freqs, &blocklist, 30);
        assert_eq!(list.terms, vec!["neural_network", "deep_learning"]);
        assert_eq!(list.frequencies, vec![700, 500]);
        assert!(list.terms.iter().all(|t| t.contains('_')));
    }

    #[test]
    fn search_terms_from_only_unigrams_is_empty() {
        let cluster: BTreeSet<String> = ["alpha", "beta"].iter().map(|s| s.to_string()).collect();
        let list = extract_search_terms(&cluster, &HashMap::new(), &HashSet::new(), 30);
        assert!(list.is_empty());
    }

    #[test]
    fn builtin_blocklist_carries_the_known_generics() {
        let blocklist = builtin_blocklist();
        assert!(blocklist.contains("short_term"));
        assert!(blocklist.contains("supervised_learning"));
    }
}
