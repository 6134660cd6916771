//! Marginal effects at a representative covariate row.

use nalgebra::DMatrix;

use super::mnlogit::mnlogit_probabilities;
use super::{norm_cdf, norm_pdf, EconError, FitResult};

/// Which representative row the effect is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileRow {
    MedianRow,
    MeanRow,
}

fn profile(x: &DMatrix<f64>, at: ProfileRow) -> Vec<f64> {
    let n = x.nrows();
    (0..x.ncols())
        .map(|j| {
            let col: Vec<f64> = (0..n).map(|i| x[(i, j)]).collect();
            match at {
                ProfileRow::MeanRow => crate::stats::mean(&col),
                ProfileRow::MedianRow => crate::stats::median(&col),
            }
        })
        .collect()
}

fn is_binary(x: &DMatrix<f64>, j: usize) -> bool {
    (0..x.nrows()).all(|i| x[(i, j)] == 0.0 || x[(i, j)] == 1.0)
}

/// Probit marginal effect of `target` at the chosen profile row: the
/// discrete probability difference for a dummy column, the density-scaled
/// slope for a continuous one.
pub fn marginal_effect(
    fit: &FitResult,
    x: &DMatrix<f64>,
    at: ProfileRow,
    target: &str,
) -> Result<f64, EconError> {
    let j = fit
        .names
        .iter()
        .position(|n| n == target)
        .ok_or_else(|| EconError::UnknownColumn(target.to_string()))?;
    let row = profile(x, at);
    let eta_at = |row: &[f64]| -> f64 {
        row.iter().zip(fit.coefficients.iter()).map(|(v, c)| v * c).sum()
    };
    if is_binary(x, j) {
        let mut hi = row.clone();
        hi[j] = 1.0;
        let mut lo = row;
        lo[j] = 0.0;
        Ok(norm_cdf(eta_at(&hi)) - norm_cdf(eta_at(&lo)))
    } else {
        Ok(norm_pdf(eta_at(&row)) * fit.coefficients[j])
    }
}

/// Multinomial-logit marginal effects of a dummy `target` on each category
/// probability (levels sorted), at the chosen profile row.
pub fn mnlogit_marginal_effects(
    fit: &FitResult,
    levels: &[String],
    reference: &str,
    x: &DMatrix<f64>,
    names: &[String],
    at: ProfileRow,
    target: &str,
) -> Result<Vec<f64>, EconError> {
    let j = names
        .iter()
        .position(|n| n == target)
        .ok_or_else(|| EconError::UnknownColumn(target.to_string()))?;
    let row = profile(x, at);
    let mut hi = row.clone();
    hi[j] = 1.0;
    let mut lo = row;
    lo[j] = 0.0;
    let p_hi = mnlogit_probabilities(fit, levels, reference, &hi);
    let p_lo = mnlogit_probabilities(fit, levels, reference, &lo);
    Ok(p_hi.iter().zip(&p_lo).map(|(h, l)| h - l).collect())
}
