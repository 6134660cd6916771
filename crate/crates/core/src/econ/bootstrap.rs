//! Cluster bootstrap covariance: resample clusters with replacement, refit,
//! and take the empirical covariance of the coefficient draws.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EconError;
use crate::exec;
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { replications: 500, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapResult {
    pub se: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub n_converged: usize,
    pub n_dropped: usize,
    /// Set when more than 10% of replicates failed to converge.
    pub warning: Option<String>,
}

/// Resample whole clusters with replacement (keeping the number of clusters
/// fixed) and refit via `refit`, which receives row indices in draw order
/// and returns the coefficient vector of a converged fit, or `None`.
///
/// Replicates run in parallel on independent seed streams and are reduced
/// in replicate order, so results are identical for any worker count.
pub fn bootstrap_se<F>(
    cluster: &[u32],
    refit: F,
    config: &BootstrapConfig,
) -> Result<BootstrapResult, EconError>
where
    F: Fn(&[usize]) -> Option<DVector<f64>> + Sync + Send,
{
    if config.replications < 2 {
        return Err(EconError::Shape("need at least 2 replications".to_string()));
    }
    let mut unique: Vec<u32> = cluster.to_vec();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() < 2 {
        return Err(EconError::TooFewClusters { needed: 2, found: unique.len() });
    }
    let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); unique.len()];
    for (row, id) in cluster.iter().enumerate() {
        let slot = unique.binary_search(id).expect("id in unique list");
        rows_of[slot].push(row);
    }

    let draws: Vec<Option<DVector<f64>>> = exec::map_indices(config.replications, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "bootstrap", r as u64));
        let mut rows = Vec::with_capacity(cluster.len());
        for _ in 0..unique.len() {
            let pick = rng.random_range(0..unique.len());
            rows.extend_from_slice(&rows_of[pick]);
        }
        refit(&rows)
    });

    let kept: Vec<&DVector<f64>> = draws.iter().flatten().collect();
    let n_converged = kept.len();
    let n_dropped = config.replications - n_converged;
    if n_converged < 2 {
        return Err(EconError::BootstrapFailed { converged: n_converged, total: config.replications });
    }
    let p = kept[0].len();
    let mut mean = DVector::zeros(p);
    for coef in &kept {
        mean += *coef;
    }
    mean /= n_converged as f64;
    let mut covariance = DMatrix::zeros(p, p);
    for coef in &kept {
        let d = *coef - &mean;
        covariance += &d * d.transpose();
    }
    covariance /= (n_converged - 1) as f64;
    let se = (0..p).map(|i| covariance[(i, i)].max(0.0).sqrt()).collect();
    let warning = (n_dropped * 10 > config.replications).then(|| {
        format!("{n_dropped} of {} bootstrap replicates did not converge", config.replications)
    });
    Ok(BootstrapResult { se, covariance, n_converged, n_dropped, warning })
}
