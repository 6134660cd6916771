//! Treatment-effect estimation by matching: exact cells or 1:1 nearest
//! neighbor on propensity scores, without replacement.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fit_probit, DataTable, EconError};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum MatchMode {
    /// Treated units match controls agreeing exactly on all key columns.
    Exact { keys: Vec<String> },
    /// 1:1 nearest neighbor on a probit propensity score, without
    /// replacement, treated units processed in seed-fixed random order.
    Psm { covariates: Vec<String> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchSpec {
    pub treatment: String,
    pub outcomes: Vec<String>,
    #[serde(flatten)]
    pub mode: MatchMode,
    #[serde(default)]
    pub seed: u64,
}

/// Average treatment effect on the treated for one outcome column.
#[derive(Debug, Clone)]
pub struct AttEstimate {
    pub outcome: String,
    pub att: f64,
    /// Standard error from the paired differences.
    pub se: f64,
    pub n_matched: usize,
    pub n_dropped: usize,
}

/// Matched pairs: treated row → either one control row (PSM) or a cell of
/// control rows weighted uniformly (exact).
enum Matched {
    Single(Vec<(usize, usize)>),
    Cells(Vec<(usize, Vec<usize>)>),
}

pub fn match_and_att(table: &DataTable, spec: &MatchSpec) -> Result<Vec<AttEstimate>, EconError> {
    let treatment = table.f64_column(&spec.treatment)?;
    if let Some(&bad) = treatment.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(EconError::NotBinary(bad));
    }
    let treated: Vec<usize> =
        (0..table.n_rows()).filter(|&i| treatment[i] == 1.0).collect();
    let controls: Vec<usize> =
        (0..table.n_rows()).filter(|&i| treatment[i] == 0.0).collect();

    let (matched, n_dropped) = match &spec.mode {
        MatchMode::Exact { keys } => {
            let key_cols: Vec<Vec<&str>> =
                keys.iter().map(|k| table.string_column(k)).collect::<Result<_, _>>()?;
            let key_of = |row: usize| -> String {
                key_cols.iter().map(|c| c[row]).collect::<Vec<_>>().join("\u{1f}")
            };
            let mut cells: HashMap<String, Vec<usize>> = HashMap::new();
            for &c in &controls {
                cells.entry(key_of(c)).or_default().push(c);
            }
            let mut pairs = Vec::new();
            let mut dropped = 0;
            for &t in &treated {
                match cells.get(&key_of(t)) {
                    Some(cell) if !cell.is_empty() => pairs.push((t, cell.clone())),
                    _ => dropped += 1,
                }
            }
            (Matched::Cells(pairs), dropped)
        }
        MatchMode::Psm { covariates } => {
            // propensity from a probit of treatment on the covariates
            let n = table.n_rows();
            let mut names = vec!["const".to_string()];
            names.extend(covariates.iter().cloned());
            let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
            for c in covariates {
                cols.push(table.f64_column(c)?);
            }
            let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
            let fit = fit_probit(&x, &treatment, &names)?;
            let scores: Vec<f64> = (0..n)
                .map(|i| (0..cols.len()).map(|j| x[(i, j)] * fit.coefficients[j]).sum())
                .collect();

            let mut order = treated.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "psm-order", 0));
            order.shuffle(&mut rng);
            let mut available: Vec<usize> = controls.clone();
            let mut pairs = Vec::new();
            let mut dropped = 0;
            for &t in &order {
                if available.is_empty() {
                    dropped += 1;
                    continue;
                }
                // nearest available control; ties go to the lowest row index
                let best = available
                    .iter()
                    .enumerate()
                    .min_by(|(_, &a), (_, &b)| {
                        let da = (scores[a] - scores[t]).abs();
                        let db = (scores[b] - scores[t]).abs();
                        da.partial_cmp(&db).expect("finite scores").then(a.cmp(&b))
                    })
                    .map(|(slot, _)| slot)
                    .expect("non-empty");
                let control = available.swap_remove(best);
                pairs.push((t, control));
            }
            (Matched::Single(pairs), dropped)
        }
    };

    let n_matched = match &matched {
        Matched::Single(pairs) => pairs.len(),
        Matched::Cells(cells) => cells.len(),
    };
    if n_matched == 0 {
        return Err(EconError::NoMatches);
    }

    let mut estimates = Vec::with_capacity(spec.outcomes.len());
    for outcome in &spec.outcomes {
        let y = table.f64_column(outcome)?;
        let diffs: Vec<f64> = match &matched {
            Matched::Single(pairs) => pairs.iter().map(|&(t, c)| y[t] - y[c]).collect(),
            Matched::Cells(cells) => cells
                .iter()
                .map(|(t, cell)| {
                    let control_mean =
                        cell.iter().map(|&c| y[c]).sum::<f64>() / cell.len() as f64;
                    y[*t] - control_mean
                })
                .collect(),
        };
        let att = crate::stats::mean(&diffs);
        let se = crate::stats::sample_sd(&diffs) / (diffs.len() as f64).sqrt();
        estimates.push(AttEstimate {
            outcome: outcome.clone(),
            att,
            se,
            n_matched,
            n_dropped,
        });
    }
    Ok(estimates)
}
