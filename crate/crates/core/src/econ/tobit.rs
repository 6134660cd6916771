//! Left-censored normal (Tobit) MLE in the (β, ln σ) parameterization.

use nalgebra::{DMatrix, DVector};

use super::{
    covariance_from_hessian, inv_mills, newton_maximize, norm_log_cdf, EconError, FitResult,
    MAX_NEWTON_ITERATIONS,
};

const HALF_LOG_2PI: f64 = 0.9189385332046727;

pub(crate) fn tobit_eval(
    x: &DMatrix<f64>,
    y: &[f64],
    censor: f64,
    theta: &DVector<f64>,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let p = x.ncols();
    let beta = theta.rows(0, p).into_owned();
    let s = theta[p];
    let sigma = s.exp();
    let eta = x * &beta;

    let mut ll = 0.0;
    let mut grad = DVector::zeros(p + 1);
    let mut hess = DMatrix::zeros(p + 1, p + 1);
    for i in 0..n {
        let row = x.row(i);
        if y[i] > censor {
            let r = (y[i] - eta[i]) / sigma;
            ll += -s - HALF_LOG_2PI - 0.5 * r * r;
            // ∂ll/∂β = r x / σ ; ∂ll/∂s = r² − 1
            let gb = r / sigma;
            for a in 0..p {
                grad[a] += gb * row[a];
            }
            grad[p] += r * r - 1.0;
            // ∂²ll/∂β∂βᵀ = −x xᵀ/σ² ; ∂²ll/∂β∂s = −2 r x/σ ; ∂²ll/∂s² = −2 r²
            let hbb = -1.0 / (sigma * sigma);
            let hbs = -2.0 * r / sigma;
            for a in 0..p {
                for b in a..p {
                    hess[(a, b)] += hbb * row[a] * row[b];
                }
                hess[(a, p)] += hbs * row[a];
            }
            hess[(p, p)] += -2.0 * r * r;
        } else {
            let z = (censor - eta[i]) / sigma;
            ll += norm_log_cdf(z);
            let m = inv_mills(z);
            // ∂ll/∂β = −m x/σ ; ∂ll/∂s = −m z
            for a in 0..p {
                grad[a] += -m * row[a] / sigma;
            }
            grad[p] += -m * z;
            let dm = -m * (z + m); // dm/dz
            // ∂²ll/∂β∂βᵀ = dm/σ² x xᵀ ; ∂²ll/∂β∂s = (dm·z + m)/σ x ;
            // ∂²ll/∂s² = dm·z² + m·z
            let hbb = dm / (sigma * sigma);
            let hbs = (dm * z + m) / sigma;
            for a in 0..p {
                for b in a..p {
                    hess[(a, b)] += hbb * row[a] * row[b];
                }
                hess[(a, p)] += hbs * row[a];
            }
            hess[(p, p)] += dm * z * z + m * z;
        }
    }
    for a in 0..p + 1 {
        for b in 0..a {
            hess[(a, b)] = hess[(b, a)];
        }
    }
    (ll, grad, hess)
}

/// Fit a Tobit model of a response left-censored at `censor` (default 0).
/// The last coefficient is ln σ, reported as `log_sigma`.
pub fn fit_tobit(
    x: &DMatrix<f64>,
    y: &[f64],
    names: &[String],
    censor: f64,
) -> Result<FitResult, EconError> {
    if x.nrows() != y.len() {
        return Err(EconError::Shape(format!("{} rows vs {} responses", x.nrows(), y.len())));
    }
    if let Some(&bad) = y.iter().find(|&&v| v < censor) {
        return Err(EconError::BelowCensorPoint(bad));
    }
    if y.iter().all(|&v| v <= censor) {
        return Err(EconError::AllCensored);
    }
    let p = x.ncols();

    // Least-squares start for β; residual spread for σ.
    let xtx = x.transpose() * x;
    let xty = x.transpose() * DVector::from_column_slice(y);
    let beta0 = xtx
        .cholesky()
        .map(|c| c.solve(&xty))
        .ok_or(EconError::SingularHessian)?;
    let residuals = DVector::from_column_slice(y) - x * &beta0;
    let sigma0 = (residuals.norm_squared() / y.len() as f64).sqrt().max(1e-6);
    let mut theta0 = DVector::zeros(p + 1);
    theta0.rows_mut(0, p).copy_from(&beta0);
    theta0[p] = sigma0.ln();

    let out = newton_maximize(
        theta0,
        |theta| tobit_eval(x, y, censor, theta),
        MAX_NEWTON_ITERATIONS,
    )?;
    if !out.converged {
        return Err(EconError::NotConverged(out.iterations));
    }
    let covariance = covariance_from_hessian(&out.hessian)?;
    let mut all_names = names.to_vec();
    all_names.push("log_sigma".to_string());
    Ok(FitResult {
        model: "tobit",
        names: all_names,
        coefficients: out.theta,
        covariance,
        loglik: out.loglik,
        iterations: out.iterations,
        converged: out.converged,
        n: y.len(),
        ll_trace: out.ll_trace,
    })
}
